//! Plain-Rust versions of the exported operations, so they can be tested natively.

use plasma_core::pipeline::{accuracy, run_diagnose, run_forward, run_inversion, Settings};
use plasma_core::spectral::SpectrumReport;
use plasma_core::{Error, KGrid, Potential, PotentialFamily};
use serde::Serialize;

pub const N_X: usize = 401;

pub fn family(name: &str, param: f64) -> Result<PotentialFamily, String> {
    let key = match name {
        "square_well" => "q0",
        "bump" => "c",
        _ => "",
    };
    let params = std::iter::once((key.to_string(), param)).collect();
    PotentialFamily::from_name(name, &params).map_err(|e| e.to_string())
}

fn setup(name: &str, param: f64, k_max: f64, n_k: usize) -> Result<(Potential, KGrid), String> {
    let q = family(name, param)?.sample(N_X).map_err(|e| e.to_string())?;
    let grid = KGrid::uniform(0.05, k_max, n_k).map_err(|e| e.to_string())?;
    Ok((q, grid))
}

#[derive(Debug, Serialize)]
pub struct Curves {
    pub k: Vec<f64>,
    pub abs_a: Vec<f64>,
    pub abs_b: Vec<f64>,
    pub abs_r: Vec<f64>,
    pub re_u_minus: Vec<f64>,
    pub im_u_minus: Vec<f64>,
    pub re_u_plus: Vec<f64>,
    pub im_u_plus: Vec<f64>,
    pub unitarity_defect: f64,
}

pub fn forward_curves(name: &str, param: f64, k_max: f64, n_k: usize) -> Result<Curves, String> {
    let (q, grid) = setup(name, param, k_max, n_k)?;
    let run = run_forward(&q, &grid, &Settings::default()).map_err(|e| e.to_string())?;
    let c = &run.coefficients;
    let d = &run.data;
    Ok(Curves {
        k: grid.values().to_vec(),
        abs_a: c.a.iter().map(|v| v.norm()).collect(),
        abs_b: c.b.iter().map(|v| v.norm()).collect(),
        abs_r: c.reflection().iter().map(|v| v.norm()).collect(),
        re_u_minus: d.u_minus.iter().map(|v| v.re).collect(),
        im_u_minus: d.u_minus.iter().map(|v| v.im).collect(),
        re_u_plus: d.u_plus.iter().map(|v| v.re).collect(),
        im_u_plus: d.u_plus.iter().map(|v| v.im).collect(),
        unitarity_defect: run.report.unitarity_defect,
    })
}

#[derive(Debug, Serialize)]
pub struct Reconstructed {
    /// `ok` or `refused`.
    pub status: &'static str,
    pub ind_m: i64,
    pub message: Option<String>,
    pub x: Vec<f64>,
    pub q_true: Vec<f64>,
    pub q_hat: Vec<f64>,
    pub l2_rel_error: Option<f64>,
    pub linf_error: Option<f64>,
    pub riemann_residual: Option<f64>,
    pub leakage: Option<f64>,
}

pub fn reconstruct(name: &str, param: f64, k_max: f64, n_k: usize) -> Result<Reconstructed, String> {
    let (q, grid) = setup(name, param, k_max, n_k)?;
    let settings = Settings::default();
    let data = run_forward(&q, &grid, &settings).map_err(|e| e.to_string())?.data;
    let x = q.nodes();
    let q_true = q.samples().to_vec();
    match run_inversion(&data, N_X, &settings) {
        Ok(inv) => {
            let acc = accuracy(&inv.reconstruction.potential, &q);
            Ok(Reconstructed {
                status: "ok",
                ind_m: inv.report.ind_m,
                message: None,
                x,
                q_true,
                q_hat: inv.reconstruction.potential.samples().to_vec(),
                l2_rel_error: Some(acc.l2_rel_error),
                linf_error: Some(acc.linf_error),
                riemann_residual: Some(inv.report.riemann_residual),
                leakage: Some(inv.report.leakage),
            })
        }
        Err(e @ Error::NonzeroIndex { ind_m }) => Ok(Reconstructed {
            status: "refused",
            ind_m,
            message: Some(e.to_string()),
            x,
            q_true,
            q_hat: Vec::new(),
            l2_rel_error: None,
            linf_error: None,
            riemann_residual: None,
            leakage: None,
        }),
        Err(e) => Err(e.to_string()),
    }
}

pub fn diagnose(name: &str, param: f64, k_max: f64, n_k: usize) -> Result<SpectrumReport, String> {
    let (q, grid) = setup(name, param, k_max, n_k)?;
    run_diagnose(&q, &grid, &Settings::default()).map_err(|e| e.to_string())
}
