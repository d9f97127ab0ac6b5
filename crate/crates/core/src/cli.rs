//! The `plasma` command-line tool.
//!
//! Configuration comes from one JSON document (`--config`), then command-line
//! flags override individual fields. Each run writes its files into the output
//! directory only after every input has been validated.

use std::fs;
use std::io::Write as _;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use serde::{Deserialize, Serialize};
use serde_json::{json, Value};
use sha2::{Digest, Sha256};

use crate::error::Error;
use crate::pipeline::{accuracy, run_diagnose, run_forward, run_inversion, run_roundtrip, KGridSpec, Settings};
use crate::types::{BoundaryData, Potential, PotentialFamily};

pub const EXIT_OK: u8 = 0;
pub const EXIT_CONFIG: u8 = 2;
pub const EXIT_SOLVER: u8 = 3;
pub const EXIT_HYPOTHESIS: u8 = 4;
pub const EXIT_ACCURACY: u8 = 5;

const LOCK_NAME: &str = ".plasma.lock";

const AFTER_HELP: &str = "\
Configuration precedence (lowest to highest):
  1. built-in defaults
  2. the JSON document given by --config
  3. command-line flags (--potential, --n-x, --k-min, --k-max, --n-k, --output-dir, --data)
The subcommand, when given, overrides the config's `stage`.

Exit codes: 0 ok, 2 configuration or input error, 3 solver failure,
4 nonzero Riemann index (bound states; inversion refused), 5 residual threshold exceeded.

PLASMA_THREADS caps the worker threads (0 or unset = all cores).";

#[derive(Debug, Parser)]
#[command(name = "plasma", version, about = "Boundary-data synthesis and potential reconstruction", after_help = AFTER_HELP)]
pub struct Cli {
    #[command(subcommand)]
    pub command: Option<Command>,
    /// JSON configuration document.
    #[arg(long, global = true)]
    pub config: Option<PathBuf>,
    #[command(flatten)]
    pub overrides: Overrides,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Subcommand)]
#[serde(rename_all = "snake_case")]
pub enum Stage {
    /// Synthesize u(-1,k), u(1,k) for the configured potential.
    Forward,
    /// Reconstruct q from a boundary-data CSV.
    Invert,
    /// Forward then invert, with reconstruction errors against the truth.
    Roundtrip,
    /// Bound states, winding indices and norming constants.
    Diagnose,
}

pub type Command = Stage;

#[derive(Debug, Clone, Default, Args)]
pub struct Overrides {
    /// `zero`, `square_well:q0=1`, `bump:c=2` or `csv:PATH`.
    #[arg(long, global = true)]
    pub potential: Option<String>,
    /// Nodes of the potential grid on [-1, 1].
    #[arg(long, global = true)]
    pub n_x: Option<usize>,
    /// Smallest wavenumber of the data grid.
    #[arg(long, global = true)]
    pub k_min: Option<f64>,
    /// Largest wavenumber of the data grid.
    #[arg(long, global = true)]
    pub k_max: Option<f64>,
    /// Number of wavenumbers.
    #[arg(long, global = true)]
    pub n_k: Option<usize>,
    /// Directory for results (created if missing).
    #[arg(long, short = 'o', global = true)]
    pub output_dir: Option<PathBuf>,
    /// Boundary-data CSV for `invert`.
    #[arg(long, global = true)]
    pub data: Option<PathBuf>,
}

/// Where the potential comes from.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum PotentialSpec {
    Family(PotentialFamily),
    Csv { csv: PathBuf },
}

impl PotentialSpec {
    pub fn parse(text: &str) -> Result<Self, String> {
        if let Some(path) = text.strip_prefix("csv:") {
            return Ok(Self::Csv { csv: path.into() });
        }
        let (name, rest) = text.split_once(':').unwrap_or((text, ""));
        let mut params = std::collections::BTreeMap::new();
        for pair in rest.split(',').filter(|p| !p.is_empty()) {
            let (k, v) = pair.split_once('=').ok_or_else(|| format!("expected key=value, got `{pair}`"))?;
            let v: f64 = v.parse().map_err(|e| format!("`{v}`: {e}"))?;
            params.insert(k.to_string(), v);
        }
        PotentialFamily::from_name(name, &params).map(Self::Family).map_err(|e| e.to_string())
    }

    pub fn load(&self, n_x: usize) -> crate::Result<Potential> {
        match self {
            Self::Family(f) => f.sample(n_x),
            Self::Csv { csv } => {
                let text = fs::read_to_string(csv)
                    .map_err(|e| Error::InvalidInput(format!("cannot read potential `{}`: {e}", csv.display())))?;
                Potential::from_csv(&text)
            }
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RunConfig {
    pub stage: Option<Stage>,
    pub potential: Option<PotentialSpec>,
    /// Boundary-data CSV read by `invert`.
    pub data: Option<PathBuf>,
    /// Nodes of the potential grid on `[-1, 1]` (synthesis and reconstruction).
    pub n_x: usize,
    pub k_grid: KGridSpec,
    pub output_dir: PathBuf,
    pub numerics: Settings,
}

impl Default for RunConfig {
    fn default() -> Self {
        Self {
            stage: None,
            potential: None,
            data: None,
            n_x: 801,
            k_grid: KGridSpec::default(),
            output_dir: PathBuf::from("plasma-out"),
            numerics: Settings::default(),
        }
    }
}

impl RunConfig {
    pub fn from_json(text: &str) -> Result<Self, String> {
        serde_json::from_str(text).map_err(|e| format!("config: {e}"))
    }

    pub fn apply(&mut self, o: &Overrides) -> Result<(), String> {
        if let Some(p) = &o.potential {
            self.potential = Some(PotentialSpec::parse(p)?);
        }
        if let Some(v) = o.n_x {
            self.n_x = v;
        }
        if let Some(v) = o.k_min {
            self.k_grid.k_min = v;
        }
        if let Some(v) = o.k_max {
            self.k_grid.k_max = v;
        }
        if let Some(v) = o.n_k {
            self.k_grid.n_k = v;
        }
        if let Some(v) = &o.output_dir {
            self.output_dir = v.clone();
        }
        if let Some(v) = &o.data {
            self.data = Some(v.clone());
        }
        Ok(())
    }

    pub fn validate(&self, stage: Stage) -> Result<(), String> {
        self.numerics.validate().map_err(|e| e.to_string())?;
        self.k_grid.build(self.numerics.tolerances.k_min_floor).map_err(|e| e.to_string())?;
        if self.n_x < 3 {
            return Err(format!("n_x must be at least 3, got {}", self.n_x));
        }
        match stage {
            Stage::Forward | Stage::Roundtrip | Stage::Diagnose if self.potential.is_none() => {
                Err(format!("stage `{}` needs a potential", stage.name()))
            }
            Stage::Invert if self.data.is_none() => Err("stage `invert` needs a data file".into()),
            _ => Ok(()),
        }
    }
}

impl Stage {
    pub fn name(self) -> &'static str {
        match self {
            Self::Forward => "forward",
            Self::Invert => "invert",
            Self::Roundtrip => "roundtrip",
            Self::Diagnose => "diagnose",
        }
    }
}

/// A failed run: exit code and message for standard error.
#[derive(Debug)]
pub struct Failure {
    pub code: u8,
    pub message: String,
    /// Report written even though the run failed.
    pub files: Vec<(String, String)>,
}

impl Failure {
    fn config(message: impl Into<String>) -> Self {
        Self {
            code: EXIT_CONFIG,
            message: message.into(),
            files: Vec::new(),
        }
    }
}

/// Everything loaded and checked before any computation.
pub struct Prepared {
    pub stage: Stage,
    pub config: RunConfig,
    pub potential: Option<Potential>,
    pub data: Option<(BoundaryData, String)>,
}

pub fn prepare(cli: &Cli) -> Result<Prepared, Failure> {
    let mut config = match &cli.config {
        Some(path) => {
            let text = fs::read_to_string(path)
                .map_err(|e| Failure::config(format!("cannot read config `{}`: {e}", path.display())))?;
            RunConfig::from_json(&text).map_err(Failure::config)?
        }
        None => RunConfig::default(),
    };
    config.apply(&cli.overrides).map_err(Failure::config)?;
    let stage = cli
        .command
        .or(config.stage)
        .ok_or_else(|| Failure::config("no stage: give a subcommand or set `stage` in the config"))?;
    config.stage = Some(stage);
    config.validate(stage).map_err(Failure::config)?;

    let potential = match &config.potential {
        Some(spec) => Some(spec.load(config.n_x).map_err(|e| Failure::config(e.to_string()))?),
        None => None,
    };
    let data = match (&config.data, stage) {
        (Some(path), Stage::Invert) => {
            let text = fs::read_to_string(path)
                .map_err(|e| Failure::config(format!("cannot read data `{}`: {e}", path.display())))?;
            let data = BoundaryData::from_csv(&text).map_err(|e| Failure::config(e.to_string()))?;
            if !config.k_grid.matches(&data.grid) {
                return Err(Failure::config(format!(
                    "data grid ({} points on [{}, {}]) does not match the configured k-grid {:?}",
                    data.grid.len(),
                    data.grid.k_min(),
                    data.grid.k_max(),
                    config.k_grid
                )));
            }
            Some((data, sha256(&text)))
        }
        _ => None,
    };
    Ok(Prepared {
        stage,
        config,
        potential,
        data,
    })
}

pub fn sha256(text: &str) -> String {
    hex::encode(Sha256::digest(text.as_bytes()))
}

fn to_json(value: &Value) -> String {
    let mut s = serde_json::to_string_pretty(value).expect("reports serialize");
    s.push('\n');
    s
}

fn solver_failure(stage: Stage, err: Error) -> Failure {
    let code = match (&err, stage) {
        (Error::NonzeroIndex { .. }, _) => EXIT_HYPOTHESIS,
        (Error::Residual { .. }, Stage::Invert | Stage::Roundtrip) => EXIT_ACCURACY,
        _ => EXIT_SOLVER,
    };
    Failure {
        code,
        message: err.to_string(),
        files: Vec::new(),
    }
}

/// Runs the prepared stage and returns the files to write.
pub fn execute(p: &Prepared) -> Result<Vec<(String, String)>, Failure> {
    let config = &p.config;
    let settings = &config.numerics;
    let grid = config
        .k_grid
        .build(settings.tolerances.k_min_floor)
        .map_err(|e| Failure::config(e.to_string()))?;
    let stage = p.stage;
    let fail = |e| solver_failure(stage, e);
    let config_json = serde_json::to_value(config).expect("config serializes");
    let potential_hash = p.potential.as_ref().map(|q| sha256(&q.to_csv()));

    match stage {
        Stage::Forward => {
            let q = p.potential.as_ref().expect("validated");
            let run = run_forward(q, &grid, settings).map_err(fail)?;
            let report = json!({
                "stage": "forward",
                "version": env!("CARGO_PKG_VERSION"),
                "config": config_json,
                "provenance": {
                    "potential_sha256": potential_hash,
                    "n_x": q.n_x(),
                    "k_grid": config.k_grid,
                    "tolerances": settings.tolerances,
                },
                "report": run.report,
            });
            Ok(vec![
                ("data.csv".into(), run.data.to_csv()),
                ("forward.json".into(), to_json(&report)),
            ])
        }
        Stage::Invert => {
            let (data, data_hash) = p.data.as_ref().expect("validated");
            let inv = match run_inversion(data, config.n_x, settings) {
                Ok(inv) => inv,
                Err(Error::NonzeroIndex { ind_m }) => {
                    let indices = crate::pipeline::reduce(data, &settings.tolerances).ok().map(|r| r.indices);
                    let err = Error::NonzeroIndex { ind_m };
                    let report = json!({
                        "stage": "invert",
                        "status": "refused",
                        "version": env!("CARGO_PKG_VERSION"),
                        "config": config_json,
                        "data_sha256": data_hash,
                        "ind_m": ind_m,
                        "indices": indices,
                        "message": err.to_string(),
                    });
                    let mut f = fail(err);
                    f.files.push(("invert.json".into(), to_json(&report)));
                    return Err(f);
                }
                Err(e) => return Err(fail(e)),
            };
            let q_hat = &inv.reconstruction.potential;
            let truth = p.potential.as_ref().map(|t| accuracy(q_hat, t));
            let report = json!({
                "stage": "invert",
                "status": "ok",
                "version": env!("CARGO_PKG_VERSION"),
                "config": config_json,
                "data_sha256": data_hash,
                "truth_sha256": potential_hash,
                "ind_m": inv.report.ind_m,
                "ind_a": inv.report.ind_a,
                "riemann_residual": inv.report.riemann_residual,
                "cross_check_residual": inv.report.cross_check_residual,
                "unitarity_defect": inv.report.unitarity_defect,
                "report": inv.report,
                "accuracy": {
                    "l2_rel_error": truth.map(|a| a.l2_rel_error),
                    "linf_error": truth.map(|a| a.linf_error),
                    "leakage": inv.report.leakage,
                    "marchenko_residual": inv.report.marchenko_residual,
                    "q_max_abs": inv.report.q_max_abs,
                },
            });
            Ok(vec![
                ("a.csv".into(), inv.spectrum.a.to_csv()),
                ("b.csv".into(), inv.spectrum.b.to_csv()),
                ("r.csv".into(), inv.spectrum.r.to_csv()),
                ("q.csv".into(), q_hat.to_csv()),
                ("q_extended.csv".into(), xq_csv(&inv.reconstruction.x_grid, &inv.reconstruction.q_full)),
                ("invert.json".into(), to_json(&report)),
            ])
        }
        Stage::Roundtrip => {
            let q = p.potential.as_ref().expect("validated");
            let rt = run_roundtrip(q, &grid, settings).map_err(fail)?;
            let report = json!({
                "stage": "roundtrip",
                "version": env!("CARGO_PKG_VERSION"),
                "config": config_json,
                "potential_sha256": potential_hash,
                "forward": rt.forward.report,
                "inversion": rt.inversion.report,
                "accuracy": rt.accuracy,
            });
            Ok(vec![
                ("q.csv".into(), rt.inversion.reconstruction.potential.to_csv()),
                ("roundtrip.json".into(), to_json(&report)),
            ])
        }
        Stage::Diagnose => {
            let q = p.potential.as_ref().expect("validated");
            let spectrum = run_diagnose(q, &grid, settings).map_err(fail)?;
            let report = json!({
                "stage": "diagnose",
                "version": env!("CARGO_PKG_VERSION"),
                "config": config_json,
                "potential_sha256": potential_hash,
                "tolerances": settings.tolerances,
                "spectrum": spectrum,
            });
            Ok(vec![("diagnose.json".into(), to_json(&report))])
        }
    }
}

fn xq_csv(x: &[f64], q: &[f64]) -> String {
    let mut out = String::from("x,q\n");
    for (x, q) in x.iter().zip(q) {
        out.push_str(&format!("{},{}\n", crate::types::fmt_f64(*x), crate::types::fmt_f64(*q)));
    }
    out
}

/// Exclusive claim on an output directory, released on drop.
pub struct DirLock {
    path: PathBuf,
}

impl DirLock {
    pub fn acquire(dir: &Path) -> std::io::Result<Self> {
        fs::create_dir_all(dir)?;
        let path = dir.join(LOCK_NAME);
        let mut file = fs::OpenOptions::new().write(true).create_new(true).open(&path)?;
        writeln!(file, "{}", std::process::id())?;
        Ok(Self { path })
    }
}

impl Drop for DirLock {
    fn drop(&mut self) {
        let _ = fs::remove_file(&self.path);
    }
}

fn write_files(dir: &Path, files: &[(String, String)]) -> std::io::Result<()> {
    for (name, body) in files {
        fs::write(dir.join(name), body)?;
    }
    Ok(())
}

fn init_threads() -> Result<(), String> {
    let n = match std::env::var("PLASMA_THREADS") {
        Ok(v) => v.trim().parse::<usize>().map_err(|e| format!("PLASMA_THREADS=`{v}`: {e}"))?,
        Err(_) => 0,
    };
    // a second call in the same process is harmless
    let _ = rayon::ThreadPoolBuilder::new().num_threads(n).build_global();
    Ok(())
}

/// Full run: parse, validate, lock, compute, write. Returns the exit code.
pub fn run(cli: Cli) -> ExitCode {
    let code = match run_inner(&cli) {
        Ok(()) => EXIT_OK,
        Err(f) => {
            eprintln!("plasma: {}", f.message);
            f.code
        }
    };
    ExitCode::from(code)
}

fn run_inner(cli: &Cli) -> Result<(), Failure> {
    init_threads().map_err(Failure::config)?;
    let prepared = prepare(cli)?;
    let dir = prepared.config.output_dir.clone();
    let _lock = DirLock::acquire(&dir).map_err(|e| {
        Failure::config(format!("cannot lock output directory `{}`: {e} (another run in progress?)", dir.display()))
    })?;
    let io_failure = |e: std::io::Error| Failure {
        code: EXIT_SOLVER,
        message: format!("writing outputs: {e}"),
        files: Vec::new(),
    };
    match execute(&prepared) {
        Ok(files) => write_files(&dir, &files).map_err(io_failure),
        Err(f) => {
            write_files(&dir, &f.files).map_err(io_failure)?;
            Err(f)
        }
    }
}
