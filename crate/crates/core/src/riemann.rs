//! From boundary data to `a(k)`, `b(k)` and the reflection coefficient.
//!
//! The data give `h1 = g(0,k)/a(k)` and `h2 = f(0,k)/a(k)`. Eliminating `b`
//! leaves the scalar problem `a(k) = m(k) a(-k) + n(k)` on the real line with
//! `|m| = 1`, which carries no pointwise information (pairing it with its
//! conjugate gives a singular 2x2 system). It is solved by factorising `m`.
//!
//! Generic potentials have `a(k) ~ c/k` at the origin, so `h1, h2 ~ k` and `m`
//! picks up `((k+i)/(k-i))^nu` with `nu = nu1 + nu2` from the boundary point.
//! With `m = m_hat ((k+i)/(k-i))^nu` and `-m_hat = X̂+ / X̂-`:
//!
//! ```text
//! X+ = X̂+ ((k+i)/k)^nu,  X- = X̂- ((k-i)/k)^nu,  m = -X+/X-,
//! a = X+ Psi+,  -a(-k) = X- Psi-,  Psi+ - Psi- = n / X+.
//! ```
//!
//! `Psi±` follow from one Cauchy projection of `n/X+ - 2`. The index that gates
//! the solve is the winding of `m_hat`, i.e. with the origin kept out of the
//! upper half-plane. When `a` has a zero within about `k_min` of the origin,
//! `m_hat` turns quickly between `-k_min` and `k_min` and the problem is refused.

use num_complex::Complex64;
use serde::Serialize;

use crate::cauchy::{extend_by_tail, hilbert, lagrange_resample, project, Line};
use crate::error::{Error, Result};
use crate::tolerances::Tolerances;
use crate::types::{BoundaryData, ComplexSamples, KGrid};
use crate::winding::{self, check_nonzero, origin_fit, unwrapped_phase, OriginFit, MAX_PHASE_STEP};

const I: Complex64 = Complex64::new(0.0, 1.0);

/// `h1 = g(0,k)/a(k)` and `h2 = f(0,k)/a(k)` on a common set of nodes.
#[derive(Debug, Clone, PartialEq)]
pub struct DataFunctions {
    pub h1: ComplexSamples,
    pub h2: ComplexSamples,
}

impl DataFunctions {
    pub fn nodes(&self) -> &[f64] {
        self.h1.nodes()
    }
}

/// `h1 = -2ik e^{-ik} u(1,k)`, `h2 = -2ik e^{-ik} u(-1,k)`.
pub fn data_to_h(data: &BoundaryData, zero_threshold: f64) -> Result<DataFunctions> {
    let scale = |k: f64| -2.0 * I * k * (-I * k).exp();
    let k = data.grid.values();
    let h1 = k.iter().zip(&data.u_plus).map(|(&k, u)| scale(k) * u).collect();
    let h2 = k.iter().zip(&data.u_minus).map(|(&k, u)| scale(k) * u).collect();
    let h = DataFunctions {
        h1: ComplexSamples::on_grid(&data.grid, h1)?,
        h2: ComplexSamples::on_grid(&data.grid, h2)?,
    };
    check_nonzero(&h.h1, zero_threshold)?;
    check_nonzero(&h.h2, zero_threshold)?;
    Ok(h)
}

/// Conjugate extension to `-k_max .. -k_min, k_min .. k_max`.
pub fn extend_symmetric(h: &DataFunctions) -> Result<DataFunctions> {
    Ok(DataFunctions {
        h1: h.h1.conj_extend()?,
        h2: h.h2.conj_extend()?,
    })
}

#[derive(Debug, Clone)]
pub struct RiemannCoefficients {
    pub m: ComplexSamples,
    pub n: ComplexSamples,
    /// Powers `nu1`, `nu2` in `h1 ~ k^nu1`, `h2 ~ k^nu2` at the origin.
    pub origin_orders: (i32, i32),
    /// Max `| |m| - 1 |`.
    pub unimodularity_defect: f64,
    /// Phase change of `m_hat` across `[-k_min, k_min]`, from the local models of `h1`, `h2`.
    pub gap_step: f64,
}

impl RiemannCoefficients {
    pub fn nu(&self) -> i32 {
        self.origin_orders.0 + self.origin_orders.1
    }

    /// `m ((k-i)/(k+i))^nu`, free of the boundary point at the origin.
    pub fn m_hat(&self) -> Result<ComplexSamples> {
        let nu = self.nu();
        self.m.map(|k, m| m * (Complex64::new(k, -1.0) / Complex64::new(k, 1.0)).powi(nu))
    }

    /// Fails when `m_hat` turns too fast inside the gap for the samples to follow.
    pub fn check_gap(&self) -> Result<()> {
        if self.gap_step.abs() >= MAX_PHASE_STEP {
            return Err(Error::UnresolvedGap { step: self.gap_step });
        }
        Ok(())
    }

    /// `m` and `n` at the node nearest `k_max`.
    pub fn edge_values(&self) -> (Complex64, Complex64) {
        let last = self.m.len() - 1;
        (self.m.values()[last], self.n.values()[last])
    }
}

const GAP_POINTS: usize = 400;

/// Unwrapped phase change of `m_hat = -conj(h1 h2) / (h1 h2) ((k-i)/(k+i))^nu` over the gap.
fn gap_step(f1: &OriginFit, f2: &OriginFit, nu: i32) -> f64 {
    let k0 = f1.k0;
    let m_hat = |k: f64| {
        let h = f1.eval(k) * f2.eval(k);
        -h.conj() / h * (Complex64::new(k, -1.0) / Complex64::new(k, 1.0)).powi(nu)
    };
    let vals: Vec<Complex64> = (0..GAP_POINTS)
        .map(|j| m_hat(-k0 + 2.0 * k0 * j as f64 / (GAP_POINTS - 1) as f64))
        .collect();
    vals.windows(2).map(|w| (w[1] / w[0]).arg()).sum()
}

/// `m = -h1(-k) h2(-k) / (h1 h2)`, `n = h1(-k)/h2 + h2(-k)/h1` on the symmetric grid.
pub fn rh_coefficients(h: &DataFunctions, tol: &Tolerances) -> Result<RiemannCoefficients> {
    h.h1.require_symmetric("h1")?;
    h.h2.require_symmetric("h2")?;
    if h.h1.nodes() != h.h2.nodes() {
        return Err(Error::Mismatch("h1 and h2 live on different grids".into()));
    }
    check_nonzero(&h.h1, tol.zero_threshold)?;
    check_nonzero(&h.h2, tol.zero_threshold)?;
    let (r1, r2) = (h.h1.reversed_values(), h.h2.reversed_values());
    let (h1, h2) = (h.h1.values(), h.h2.values());
    let nodes = h.nodes().to_vec();
    let m: Vec<Complex64> = (0..nodes.len()).map(|i| -r1[i] * r2[i] / (h1[i] * h2[i])).collect();
    let n: Vec<Complex64> = (0..nodes.len()).map(|i| r1[i] / h2[i] + r2[i] / h1[i]).collect();
    let unimodularity_defect = m.iter().map(|v| (v.norm() - 1.0).abs()).fold(0.0, f64::max);
    if unimodularity_defect > tol.unitarity {
        return Err(Error::Residual {
            what: "|m| = 1",
            value: unimodularity_defect,
            threshold: tol.unitarity,
        });
    }
    let (f1, f2) = (origin_fit(&h.h1)?, origin_fit(&h.h2)?);
    Ok(RiemannCoefficients {
        m: ComplexSamples::new(nodes.clone(), m)?,
        n: ComplexSamples::new(nodes, n)?,
        origin_orders: (f1.order, f2.order),
        unimodularity_defect,
        gap_step: gap_step(&f1, &f2, f1.order + f2.order),
    })
}

/// Winding numbers of the Riemann data.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct IndexReport {
    /// Winding of `m_hat`; the index that gates inversion.
    pub ind_m: i64,
    /// Literal winding of `m` over the grid, when the phase can be followed.
    pub ind_m_raw: Option<i64>,
    pub ind_h1: i64,
    pub ind_h2: i64,
    pub origin_order_h1: i32,
    pub origin_order_h2: i32,
    pub rounding_defect: f64,
}

pub fn index_report(h: &DataFunctions, coeffs: &RiemannCoefficients, tol: &Tolerances) -> Result<IndexReport> {
    coeffs.check_gap()?;
    let wm = winding::winding_index(&coeffs.m_hat()?, tol.zero_threshold)?;
    let raw = winding::winding_index(&coeffs.m, tol.zero_threshold).ok().map(|w| w.index);
    let i1 = winding::regularized_index(&h.h1, tol.zero_threshold)?;
    let i2 = winding::regularized_index(&h.h2, tol.zero_threshold)?;
    Ok(IndexReport {
        ind_m: wm.index,
        ind_m_raw: raw,
        ind_h1: i1.winding.index,
        ind_h2: i2.winding.index,
        origin_order_h1: i1.origin_order,
        origin_order_h2: i2.origin_order,
        rounding_defect: wm.rounding_defect.max(i1.winding.rounding_defect).max(i2.winding.rounding_defect),
    })
}

/// Discretisation settings of the factorisation.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, serde::Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SolverOptions {
    /// Points in each local Lagrange interpolant.
    pub interp_points: usize,
    /// The uniform line extends to `pad * k_max`; the fitted tail fills the extra room.
    pub pad: f64,
    /// Tail coefficients are fitted on `[fit_from * k_max, k_max]`.
    pub fit_from: f64,
}

impl SolverOptions {
    pub fn validate(&self) -> Result<()> {
        if self.interp_points < 2 || self.pad.is_nan() || self.pad <= 1.0 || !(0.0..1.0).contains(&self.fit_from) || self.fit_from == 0.0 {
            return Err(Error::InvalidInput(format!("invalid Riemann solver options {self:?}")));
        }
        Ok(())
    }
}

impl Default for SolverOptions {
    fn default() -> Self {
        Self {
            interp_points: 8,
            pad: 2.0,
            fit_from: 0.8,
        }
    }
}

#[derive(Debug, Clone)]
pub struct RiemannSolution {
    /// `a` on the symmetric grid.
    pub a: ComplexSamples,
    pub ind_m: i64,
    /// Max `|a(k) - m(k) a(-k) - n(k)|`.
    pub residual: f64,
    /// Max of `|C-[a k/(k+i) - 1]|` over the sampled range.
    pub analyticity: f64,
}

/// Spacing and `k_max` of the positive half of a symmetric grid.
fn grid_scale(nodes: &[f64]) -> (f64, f64) {
    let positive = &nodes[nodes.len() / 2..];
    let k_max = positive[positive.len() - 1];
    ((k_max - positive[0]) / (positive.len() - 1) as f64, k_max)
}

/// `log(-m_hat)` on the symmetric grid: odd, anchored at zero at `±k_max`.
fn log_branch(m_hat: &ComplexSamples, zero_threshold: f64) -> Result<Vec<Complex64>> {
    let n = m_hat.len();
    let nodes = m_hat.nodes();
    let neg: Vec<Complex64> = m_hat.values()[..n / 2].iter().map(|v| -v).collect();
    let neg = ComplexSamples::new(nodes[..n / 2].to_vec(), neg)?;
    let theta = unwrapped_phase(&neg, zero_threshold)?;
    let gap = 2.0 * theta[theta.len() - 1];
    if gap.abs() >= MAX_PHASE_STEP {
        return Err(Error::PhaseStep { k: 0.0, step: gap });
    }
    let left: Vec<Complex64> = neg
        .values()
        .iter()
        .zip(&theta)
        .map(|(v, t)| Complex64::new(v.norm().ln(), *t))
        .collect();
    Ok(left.iter().copied().chain(left.iter().rev().map(|v| -v)).collect())
}

pub fn solve_riemann(coeffs: &RiemannCoefficients, tol: &Tolerances) -> Result<RiemannSolution> {
    solve_riemann_with(coeffs, tol, &SolverOptions::default())
}

pub fn solve_riemann_with(
    coeffs: &RiemannCoefficients,
    tol: &Tolerances,
    opts: &SolverOptions,
) -> Result<RiemannSolution> {
    coeffs.m.require_symmetric("m")?;
    coeffs.check_gap()?;
    let m_hat = coeffs.m_hat()?;
    let ind_m = winding::winding_index(&m_hat, tol.zero_threshold)?.index;
    if ind_m != 0 {
        return Err(Error::NonzeroIndex { ind_m });
    }
    let nu = coeffs.nu();
    let nodes = coeffs.m.nodes();
    let p = opts.interp_points;
    let (h, k_max) = grid_scale(nodes);
    let line = Line::covering(h, opts.pad * k_max)?;
    let xs = line.nodes();
    let inside: Vec<f64> = xs.iter().copied().filter(|x| x.abs() <= k_max).collect();
    let offset = xs.iter().position(|x| x.abs() <= k_max).unwrap_or(0);
    let on_line = |vals: Vec<Complex64>| {
        let mut full = vec![Complex64::default(); xs.len()];
        full[offset..offset + vals.len()].copy_from_slice(&vals);
        full
    };

    // X̂± = exp(±ell/2 + (i/2) H ell) with ell = log(-m_hat). Only the Hilbert
    // parts are interpolated back, so X̂+/X̂- = -m_hat holds exactly on the nodes.
    let ell = log_branch(&m_hat, tol.zero_threshold)?;
    let ell_line = on_line(lagrange_resample(nodes, &ell, &inside, p)?);
    let ext = extend_by_tail(&line, &ell_line, k_max, opts.fit_from)?;
    let h_ell = hilbert(&line, &ext.values, ext.tail)?;
    let x_plus_line: Vec<Complex64> = ext.values.iter().zip(&h_ell).map(|(l, h)| (0.5 * l + 0.5 * I * h).exp()).collect();
    let h_ell_nodes = lagrange_resample(&xs, &h_ell, nodes, p)?;
    let x_plus: Vec<Complex64> = ell.iter().zip(&h_ell_nodes).map(|(l, h)| (0.5 * l + 0.5 * I * h).exp()).collect();

    // Psi± = ±1 + C±[phi], phi = n/X+ - 2 = n k^nu / (X̂+ (k+i)^nu) - 2
    let phi_at = |k: f64, n: Complex64, xp: Complex64| n * Complex64::from(k).powi(nu) / (xp * Complex64::new(k, 1.0).powi(nu)) - 2.0;
    let n_line = on_line(lagrange_resample(nodes, coeffs.n.values(), &inside, p)?);
    let phi_line: Vec<Complex64> = xs
        .iter()
        .zip(n_line.iter().zip(&x_plus_line))
        .map(|(&x, (&n, &xp))| if x.abs() <= k_max { phi_at(x, n, xp) } else { Complex64::default() })
        .collect();
    let ext = extend_by_tail(&line, &phi_line, k_max, opts.fit_from)?;
    let h_phi = lagrange_resample(&xs, &hilbert(&line, &ext.values, ext.tail)?, nodes, p)?;

    let a: Vec<Complex64> = (0..nodes.len())
        .map(|i| {
            let k = nodes[i];
            let phi = phi_at(k, coeffs.n.values()[i], x_plus[i]);
            let psi_plus = 1.0 + 0.5 * phi + 0.5 * I * h_phi[i];
            x_plus[i] * psi_plus * (Complex64::new(k, 1.0) / k).powi(nu)
        })
        .collect();
    let a = ComplexSamples::new(nodes.to_vec(), a)?;

    let residual = jump_residual(&a, coeffs);
    if residual > tol.riemann_residual {
        return Err(Error::Residual {
            what: "Riemann jump",
            value: residual,
            threshold: tol.riemann_residual,
        });
    }
    let analyticity = lower_projection_norm(&a, nu, &line, &inside, offset, k_max, opts)?;
    if analyticity > tol.analyticity {
        return Err(Error::Residual {
            what: "lower half-plane projection of a",
            value: analyticity,
            threshold: tol.analyticity,
        });
    }
    Ok(RiemannSolution {
        a,
        ind_m,
        residual,
        analyticity,
    })
}

/// Max `|a(k) - m(k) a(-k) - n(k)|` over the symmetric grid.
pub fn jump_residual(a: &ComplexSamples, coeffs: &RiemannCoefficients) -> f64 {
    let rev = a.reversed_values();
    a.values()
        .iter()
        .zip(&rev)
        .zip(coeffs.m.values().iter().zip(coeffs.n.values()))
        .map(|((a, ar), (m, n))| (a - m * ar - n).norm())
        .fold(0.0, f64::max)
}

fn lower_projection_norm(
    a: &ComplexSamples,
    nu: i32,
    line: &Line,
    inside: &[f64],
    offset: usize,
    k_max: f64,
    opts: &SolverOptions,
) -> Result<f64> {
    let s = if nu >= 1 { 1 } else { 0 };
    let a_hat = a.map(|k, v| v * (Complex64::from(k) / Complex64::new(k, 1.0)).powi(s) - 1.0)?;
    let vals = lagrange_resample(a_hat.nodes(), a_hat.values(), inside, opts.interp_points)?;
    let mut full = vec![Complex64::default(); line.len()];
    full[offset..offset + vals.len()].copy_from_slice(&vals);
    let ext = extend_by_tail(line, &full, k_max, opts.fit_from)?;
    let proj = project(line, &ext.values, ext.tail)?;
    Ok(proj.minus[offset..offset + vals.len()]
        .iter()
        .map(|v| v.norm())
        .fold(0.0, f64::max))
}

/// Recovered transition coefficients and reflection coefficient on the symmetric grid.
#[derive(Debug, Clone)]
pub struct RecoveredSpectrum {
    pub a: ComplexSamples,
    pub b: ComplexSamples,
    pub r: ComplexSamples,
    /// Max defect of `a = m a(-k) + n`.
    pub residual: f64,
    /// Max defect of `-b(-k) h2 + h2(-k) a(-k) = h1`.
    pub cross_check_residual: f64,
    /// Max `| |a|^2 - |b|^2 - 1 |`.
    pub unitarity_defect: f64,
}

impl RecoveredSpectrum {
    pub fn positive_grid(&self) -> Result<KGrid> {
        KGrid::from_values(self.a.positive_half().nodes().to_vec())
    }
}

/// `b(k) = (h2(k) - a(-k) h1(-k)) / h1(k)`, checked against the companion identity
/// `-b(-k) h2(k) + h2(-k) a(-k) = h1(k)`.
pub fn recover_b(a: &ComplexSamples, h: &DataFunctions, tol: &Tolerances) -> Result<(ComplexSamples, f64)> {
    if a.nodes() != h.nodes() {
        return Err(Error::Mismatch("a and h live on different grids".into()));
    }
    check_nonzero(&h.h1, tol.zero_threshold)?;
    let (ar, r1, r2) = (a.reversed_values(), h.h1.reversed_values(), h.h2.reversed_values());
    let (h1, h2) = (h.h1.values(), h.h2.values());
    let b: Vec<Complex64> = (0..a.len()).map(|i| (h2[i] - ar[i] * r1[i]) / h1[i]).collect();
    let br: Vec<Complex64> = b.iter().rev().copied().collect();
    let cross = (0..a.len())
        .map(|i| (-br[i] * h2[i] + r2[i] * ar[i] - h1[i]).norm())
        .fold(0.0, f64::max);
    if cross > tol.cross_check_residual {
        return Err(Error::Residual {
            what: "cross-check",
            value: cross,
            threshold: tol.cross_check_residual,
        });
    }
    Ok((ComplexSamples::new(a.nodes().to_vec(), b)?, cross))
}

/// `r = b / a`.
pub fn reflection(a: &ComplexSamples, b: &ComplexSamples, tol: &Tolerances) -> Result<ComplexSamples> {
    let floor = a.values().iter().map(|v| v.norm()).fold(f64::INFINITY, f64::min);
    if floor < 1.0 - tol.recovered_unitarity {
        return Err(Error::Residual {
            what: "1 - min |a|",
            value: 1.0 - floor,
            threshold: tol.recovered_unitarity,
        });
    }
    let r = a.zip_with(b, |a, b| b / a)?;
    let top = r.values().iter().map(|v| v.norm()).fold(0.0, f64::max);
    if top > 1.0 + tol.recovered_unitarity {
        return Err(Error::Residual {
            what: "|r| - 1",
            value: top - 1.0,
            threshold: tol.recovered_unitarity,
        });
    }
    Ok(r)
}

/// Data functions through to `(a, b, r)`.
pub fn recover_spectrum(h: &DataFunctions, tol: &Tolerances) -> Result<(RecoveredSpectrum, RiemannCoefficients)> {
    let coeffs = rh_coefficients(h, tol)?;
    let sol = solve_riemann(&coeffs, tol)?;
    let (b, cross) = recover_b(&sol.a, h, tol)?;
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
        coeffs,
    ))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn free_h(n_k: usize) -> DataFunctions {
        let grid = KGrid::uniform(0.05, 30.0, n_k).unwrap();
        let one = ComplexSamples::constant(grid.values().to_vec(), 1.0.into()).unwrap();
        DataFunctions {
            h1: one.clone(),
            h2: one,
        }
    }

    #[test]
    fn free_data_functions() {
        let grid = KGrid::uniform(0.05, 10.0, 50).unwrap();
        let u: Vec<Complex64> = grid.values().iter().map(|&k| I * (I * k).exp() / (2.0 * k)).collect();
        let data = BoundaryData::new(grid, u.clone(), u).unwrap();
        let h = data_to_h(&data, 1e-10).unwrap();
        for v in h.h1.values().iter().chain(h.h2.values()) {
            assert!((v - 1.0).norm() < 1e-14);
        }
    }

    #[test]
    fn free_problem_gives_unit_a() {
        let tol = Tolerances::default();
        let h = extend_symmetric(&free_h(1024)).unwrap();
        let c = rh_coefficients(&h, &tol).unwrap();
        assert_eq!(c.origin_orders, (0, 0));
        for (m, n) in c.m.values().iter().zip(c.n.values()) {
            assert!((m + 1.0).norm() < 1e-15 && (n - 2.0).norm() < 1e-15);
        }
        let (spec, _) = recover_spectrum(&h, &tol).unwrap();
        for ((a, b), r) in spec.a.values().iter().zip(spec.b.values()).zip(spec.r.values()) {
            assert!((a - 1.0).norm() < 1e-12 && b.norm() < 1e-12 && r.norm() < 1e-12);
        }
    }

    #[test]
    fn pointwise_system_is_singular() {
        // pairing a - m conj(a) = n with its conjugate: det = 1 - |m|^2
        let grid = KGrid::uniform(0.05, 30.0, 512).unwrap();
        let h1: Vec<Complex64> = grid.values().iter().map(|&k| Complex64::new(1.0, 0.3 / (1.0 + k))).collect();
        let h2: Vec<Complex64> = grid.values().iter().map(|&k| Complex64::new(1.0 + 0.1 / (1.0 + k * k), 0.0)).collect();
        let h = extend_symmetric(&DataFunctions {
            h1: ComplexSamples::on_grid(&grid, h1).unwrap(),
            h2: ComplexSamples::on_grid(&grid, h2).unwrap(),
        })
        .unwrap();
        let c = rh_coefficients(&h, &Tolerances::default()).unwrap();
        for m in c.m.values() {
            let det = (1.0 - m.re) * (1.0 + m.re) - m.im * m.im;
            assert!(det.abs() < 1e-12);
        }
    }

    #[test]
    fn asymmetric_grid_is_rejected() {
        let h = free_h(64);
        assert!(rh_coefficients(&h, &Tolerances::default()).is_err());
    }
}
