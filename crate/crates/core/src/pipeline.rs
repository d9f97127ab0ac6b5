//! The stages chained together, with the numbers each one reports.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::forward::{scattering_coefficients_with, ForwardOptions, ScatteringCoefficients};
use crate::marchenko::{recover_q, solve_kernel, MarchenkoKernel, MarchenkoOptions, Reconstruction};
use crate::riemann::{
    data_to_h, extend_symmetric, index_report, recover_b, reflection, rh_coefficients, solve_riemann_with, DataFunctions,
    IndexReport, RecoveredSpectrum, RiemannCoefficients, SolverOptions,
};
use crate::spectral::{spectrum_report, EigenOptions, NormingOptions, SpectrumInputs, SpectrumReport};
use crate::tolerances::Tolerances;
use crate::types::{BoundaryData, KGrid, Potential};
use crate::winding::regularized_index;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct KGridSpec {
    pub k_min: f64,
    pub k_max: f64,
    pub n_k: usize,
}

impl Default for KGridSpec {
    fn default() -> Self {
        Self {
            k_min: 0.05,
            k_max: 60.0,
            n_k: 4096,
        }
    }
}

impl KGridSpec {
    pub fn build(&self, floor: f64) -> Result<KGrid> {
        let grid = KGrid::uniform(self.k_min, self.k_max, self.n_k)?;
        grid.check_floor(floor)?;
        Ok(grid)
    }

    /// True when `grid` is the uniform grid these settings describe (to 1e-12 relative).
    pub fn matches(&self, grid: &KGrid) -> bool {
        let close = |a: f64, b: f64| (a - b).abs() <= 1e-12 * a.abs().max(b.abs()).max(1.0);
        grid.len() == self.n_k && close(grid.k_min(), self.k_min) && close(grid.k_max(), self.k_max)
    }
}

/// Numerical settings shared by every stage.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct Settings {
    pub tolerances: Tolerances,
    /// Largest number of Magnus substeps per potential cell.
    pub max_substeps: usize,
    pub riemann: SolverOptions,
    pub marchenko: MarchenkoOptions,
    pub eigen: EigenOptions,
    pub norming: NormingOptions,
}

impl Default for Settings {
    fn default() -> Self {
        Self {
            tolerances: Tolerances::default(),
            max_substeps: 64,
            riemann: SolverOptions::default(),
            marchenko: MarchenkoOptions::default(),
            eigen: EigenOptions::default(),
            norming: NormingOptions::default(),
        }
    }
}

impl Settings {
    pub fn validate(&self) -> Result<()> {
        self.tolerances.validate()?;
        if self.max_substeps == 0 {
            return Err(Error::InvalidInput("max_substeps must be at least 1".into()));
        }
        self.riemann.validate()?;
        self.marchenko.validate()?;
        self.eigen.validate()?;
        self.norming.validate()
    }

    pub fn forward_options(&self) -> ForwardOptions {
        ForwardOptions {
            unitarity_tol: self.tolerances.unitarity,
            refine_tol: self.tolerances.integrator_refine,
            max_substeps: self.max_substeps,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct ForwardReport {
    pub unitarity_defect: f64,
    pub connection_defect: f64,
    pub substeps: usize,
    /// `|a(k_max) - 1|`.
    pub a_edge_defect: f64,
    /// `|b(k_max)|`.
    pub b_edge: f64,
}

#[derive(Debug, Clone)]
pub struct ForwardRun {
    pub coefficients: ScatteringCoefficients,
    pub data: BoundaryData,
    pub report: ForwardReport,
}

pub fn run_forward(q: &Potential, grid: &KGrid, settings: &Settings) -> Result<ForwardRun> {
    let coefficients = scattering_coefficients_with(q, grid, &settings.forward_options())?;
    let data = coefficients.boundary_data()?;
    let last = grid.len() - 1;
    let report = ForwardReport {
        unitarity_defect: coefficients.unitarity_defect,
        connection_defect: coefficients.connection_defect,
        substeps: coefficients.integrator.substeps,
        a_edge_defect: (coefficients.a[last] - 1.0).norm(),
        b_edge: coefficients.b[last].norm(),
    };
    Ok(ForwardRun {
        coefficients,
        data,
        report,
    })
}

/// Data functions, Riemann coefficients and indices; everything before the solve.
#[derive(Debug, Clone)]
pub struct Reduction {
    pub h: DataFunctions,
    pub coefficients: RiemannCoefficients,
    pub indices: IndexReport,
}

pub fn reduce(data: &BoundaryData, tol: &Tolerances) -> Result<Reduction> {
    data.grid.check_floor(tol.k_min_floor)?;
    let h = extend_symmetric(&data_to_h(data, tol.zero_threshold)?)?;
    let coefficients = rh_coefficients(&h, tol)?;
    let indices = index_report(&h, &coefficients, tol)?;
    Ok(Reduction {
        h,
        coefficients,
        indices,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct InversionReport {
    pub ind_m: i64,
    pub ind_m_raw: Option<i64>,
    /// Index of the recovered `a`.
    pub ind_a: i64,
    pub ind_h1: i64,
    pub ind_h2: i64,
    pub origin_order_h1: i32,
    pub origin_order_h2: i32,
    pub riemann_residual: f64,
    pub cross_check_residual: f64,
    pub unitarity_defect: f64,
    pub analyticity: f64,
    pub kernel_imag: f64,
    pub marchenko_residual: f64,
    pub marchenko_condition: f64,
    pub truncation_tail: f64,
    pub leakage: f64,
    pub q_max_abs: f64,
}

#[derive(Debug, Clone)]
pub struct Inversion {
    pub reduction: Reduction,
    pub spectrum: RecoveredSpectrum,
    pub kernel: MarchenkoKernel,
    pub reconstruction: Reconstruction,
    pub report: InversionReport,
}

/// Runs the Riemann stage on reduced data; refuses when `ind_m != 0`.
pub fn recover(reduction: &Reduction, settings: &Settings) -> Result<(RecoveredSpectrum, f64)> {
    let tol = &settings.tolerances;
    if reduction.indices.ind_m != 0 {
        return Err(Error::NonzeroIndex {
            ind_m: reduction.indices.ind_m,
        });
    }
    let sol = solve_riemann_with(&reduction.coefficients, tol, &settings.riemann)?;
    let (b, cross) = recover_b(&sol.a, &reduction.h, tol)?;
    let unitarity_defect = sol
        .a
        .values()
        .iter()
        .zip(b.values())
        .map(|(a, b)| (a.norm_sqr() - b.norm_sqr() - 1.0).abs())
        .fold(0.0, f64::max);
    if unitarity_defect > tol.recovered_unitarity {
        return Err(Error::Residual {
            what: "recovered unitarity",
            value: unitarity_defect,
            threshold: tol.recovered_unitarity,
        });
    }
    let r = reflection(&sol.a, &b, tol)?;
    Ok((
        RecoveredSpectrum {
            a: sol.a,
            b,
            r,
            residual: sol.residual,
            cross_check_residual: cross,
            unitarity_defect,
        },
        sol.analyticity,
    ))
}

pub fn run_inversion(data: &BoundaryData, n_x: usize, settings: &Settings) -> Result<Inversion> {
    let tol = &settings.tolerances;
    let reduction = reduce(data, tol)?;
    let (spectrum, analyticity) = recover(&reduction, settings)?;
    let ind_a = regularized_index(&spectrum.a, tol.zero_threshold)?.winding.index;
    let kernel = solve_kernel(&spectrum.r, &settings.marchenko, tol)?;
    let reconstruction = recover_q(&kernel, n_x)?;
    let ix = reduction.indices;
    let report = InversionReport {
        ind_m: ix.ind_m,
        ind_m_raw: ix.ind_m_raw,
        ind_a,
        ind_h1: ix.ind_h1,
        ind_h2: ix.ind_h2,
        origin_order_h1: ix.origin_order_h1,
        origin_order_h2: ix.origin_order_h2,
        riemann_residual: spectrum.residual,
        cross_check_residual: spectrum.cross_check_residual,
        unitarity_defect: spectrum.unitarity_defect,
        analyticity,
        kernel_imag: kernel.f.max_imag,
        marchenko_residual: kernel.max_residual(),
        marchenko_condition: kernel.max_condition(),
        truncation_tail: kernel.truncation_tail(),
        leakage: reconstruction.leakage,
        q_max_abs: reconstruction.potential.max_abs(),
    };
    Ok(Inversion {
        reduction,
        spectrum,
        kernel,
        reconstruction,
        report,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Accuracy {
    /// Relative L2 error on `[-1, 1]`; absolute when the truth is zero.
    pub l2_rel_error: f64,
    pub linf_error: f64,
}

pub fn accuracy(recovered: &Potential, truth: &Potential) -> Accuracy {
    let linf_error = truth
        .nodes()
        .iter()
        .zip(truth.samples())
        .map(|(&x, &t)| (recovered.eval(x) - t).abs())
        .fold(0.0, f64::max);
    Accuracy {
        l2_rel_error: recovered.relative_l2_error(truth),
        linf_error,
    }
}

#[derive(Debug, Clone)]
pub struct RoundTrip {
    pub forward: ForwardRun,
    pub inversion: Inversion,
    pub accuracy: Accuracy,
}

pub fn run_roundtrip(q: &Potential, grid: &KGrid, settings: &Settings) -> Result<RoundTrip> {
    let forward = run_forward(q, grid, settings)?;
    let inversion = run_inversion(&forward.data, q.n_x(), settings)?;
    let accuracy = accuracy(&inversion.reconstruction.potential, q);
    Ok(RoundTrip {
        forward,
        inversion,
        accuracy,
    })
}

pub fn run_diagnose(q: &Potential, grid: &KGrid, settings: &Settings) -> Result<SpectrumReport> {
    let forward = run_forward(q, grid, settings)?;
    let reduction = reduce(&forward.data, &settings.tolerances)?;
    spectrum_report(
        SpectrumInputs {
            q,
            coefficients: &forward.coefficients,
            indices: reduction.indices,
        },
        &settings.eigen,
        &settings.norming,
        &settings.tolerances,
    )
}
