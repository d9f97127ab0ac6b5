//! Bound states, index identities and norming constants.
//!
//! `-d²/dx² + q` is discretised with the three-point Laplacian on `[-R, R]`
//! (Dirichlet ends), `q` averaged over each cell. Eigenvalues come from Sturm
//! counts of the tridiagonal matrix and bisection. The half-line problem on
//! `[0, R]` uses the same nodes, so its vectors extend by zero to admissible
//! full-line vectors and `kappa1 <= kappa0` holds exactly in the discrete setting.

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::forward::{transition_a, transition_ab, Integrator, ScatteringCoefficients};
use crate::tolerances::Tolerances;
use crate::types::{ComplexSamples, Potential, X_MAX, X_MIN};
use crate::winding::regularized_index;

const I: Complex64 = Complex64::new(0.0, 1.0);

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct EigenOptions {
    /// Half-width `R` of the truncated line.
    pub radius: f64,
    /// Number of cells on `[-R, R]`; must be even so that `x = 0` is a node.
    pub cells: usize,
}

impl Default for EigenOptions {
    fn default() -> Self {
        Self {
            radius: 12.0,
            cells: 4000,
        }
    }
}

impl EigenOptions {
    pub fn validate(&self) -> Result<()> {
        if self.radius.is_nan() || self.radius <= X_MAX || self.cells < 4 || !self.cells.is_multiple_of(2) {
            return Err(Error::InvalidInput(format!(
                "eigen grid needs radius > 1 and an even cell count >= 4, got {self:?}"
            )));
        }
        Ok(())
    }

    pub fn spacing(&self) -> f64 {
        2.0 * self.radius / self.cells as f64
    }
}

/// `∫_{-1}^{x} q` for the piecewise-linear potential, `x` clamped to the support.
fn antiderivative(q: &Potential, x: f64) -> f64 {
    let x = x.clamp(X_MIN, X_MAX);
    let h = q.spacing();
    let s = q.samples();
    let t = (x - X_MIN) / h;
    let i = (t.floor() as usize).min(s.len() - 2);
    let full: f64 = s.windows(2).take(i).map(|w| 0.5 * h * (w[0] + w[1])).sum();
    let d = x - q.node(i);
    let qx = s[i] + (s[i + 1] - s[i]) * d / h;
    full + 0.5 * d * (s[i] + qx)
}

/// Symmetric tridiagonal matrix with constant off-diagonal.
#[derive(Debug, Clone)]
struct Tridiagonal {
    diag: Vec<f64>,
    off: f64,
}

impl Tridiagonal {
    /// Interior nodes `x_lo + i h`, `i = 1..=n`.
    fn build(q: &Potential, x_lo: f64, h: f64, n: usize) -> Self {
        let diag = (1..=n)
            .map(|i| {
                let x = x_lo + i as f64 * h;
                let avg = (antiderivative(q, x + 0.5 * h) - antiderivative(q, x - 0.5 * h)) / h;
                2.0 / (h * h) + avg
            })
            .collect();
        Self {
            diag,
            off: -1.0 / (h * h),
        }
    }

    /// Number of eigenvalues below `lambda`.
    fn count_below(&self, lambda: f64) -> usize {
        let e2 = self.off * self.off;
        let mut count = 0;
        let mut p = 1.0;
        for (i, &d) in self.diag.iter().enumerate() {
            p = if i == 0 { d - lambda } else { d - lambda - e2 / p };
            if p == 0.0 {
                p = -f64::EPSILON * (d.abs() + lambda.abs() + 1.0);
            }
            if p < 0.0 {
                count += 1;
            }
        }
        count
    }

    fn lower_bound(&self) -> f64 {
        self.diag.iter().copied().fold(f64::INFINITY, f64::min) - 2.0 * self.off.abs()
    }

    fn upper_bound(&self) -> f64 {
        self.diag.iter().copied().fold(f64::NEG_INFINITY, f64::max) + 2.0 * self.off.abs()
    }

    /// The `j`-th smallest eigenvalue (0-based) by bisection.
    fn eigenvalue(&self, j: usize) -> f64 {
        let (mut lo, mut hi) = (self.lower_bound(), self.upper_bound());
        for _ in 0..200 {
            let mid = 0.5 * (lo + hi);
            if mid <= lo || mid >= hi {
                break;
            }
            if self.count_below(mid) > j {
                hi = mid;
            } else {
                lo = mid;
            }
        }
        0.5 * (lo + hi)
    }

    /// Solves `(T - lambda) v = rhs` by the Thomas algorithm.
    fn shifted_solve(&self, lambda: f64, rhs: &[f64]) -> Vec<f64> {
        let n = self.diag.len();
        let e = self.off;
        let mut c = vec![0.0; n];
        let mut d = vec![0.0; n];
        let mut piv = self.diag[0] - lambda;
        c[0] = e / piv;
        d[0] = rhs[0] / piv;
        for i in 1..n {
            piv = self.diag[i] - lambda - e * c[i - 1];
            if piv == 0.0 {
                piv = f64::EPSILON;
            }
            c[i] = e / piv;
            d[i] = (rhs[i] - e * d[i - 1]) / piv;
        }
        let mut v = vec![0.0; n];
        v[n - 1] = d[n - 1];
        for i in (0..n - 1).rev() {
            v[i] = d[i] - c[i] * v[i + 1];
        }
        v
    }
}

fn line_matrix(q: &Potential, opts: &EigenOptions) -> Tridiagonal {
    Tridiagonal::build(q, -opts.radius, opts.spacing(), opts.cells - 1)
}

fn half_line_matrix(q: &Potential, opts: &EigenOptions) -> Tridiagonal {
    Tridiagonal::build(q, 0.0, opts.spacing(), opts.cells / 2 - 1)
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct BoundStates {
    pub count: usize,
    /// Negative eigenvalues in increasing order.
    pub eigenvalues: Vec<f64>,
    /// `sqrt(-lambda_j)`, decreasing.
    pub bound_k: Vec<f64>,
}

/// Eigenvalues below `-eps`; fails when one lies within `eps` of zero.
pub fn count_negative_eigenvalues_line(q: &Potential, opts: &EigenOptions, eps: f64) -> Result<BoundStates> {
    opts.validate()?;
    let t = line_matrix(q, opts);
    let count = t.count_below(-eps);
    if t.count_below(eps) > count {
        return Err(Error::BorderlineEigenvalue(t.eigenvalue(count)));
    }
    let eigenvalues: Vec<f64> = (0..count).map(|j| t.eigenvalue(j)).collect();
    let bound_k = eigenvalues.iter().map(|l| (-l).sqrt()).collect();
    Ok(BoundStates {
        count,
        eigenvalues,
        bound_k,
    })
}

/// `(kappa0, kappa1)`: lowest Dirichlet eigenvalues on `[0, R]` and on `[-R, R]`.
pub fn kappa_pair(q: &Potential, opts: &EigenOptions) -> Result<(f64, f64)> {
    opts.validate()?;
    Ok((half_line_matrix(q, opts).eigenvalue(0), line_matrix(q, opts).eigenvalue(0)))
}

/// Unit-norm (discrete L2) eigenvector for an eigenvalue near `lambda`, by inverse iteration.
/// Returns the nodes and values, sign chosen positive at the left end.
pub fn eigenvector(q: &Potential, opts: &EigenOptions, lambda: f64) -> Result<(Vec<f64>, Vec<f64>)> {
    opts.validate()?;
    let t = line_matrix(q, opts);
    let h = opts.spacing();
    let n = t.diag.len();
    let shift = lambda - 1e-10 * lambda.abs().max(1.0);
    let mut v = vec![1.0; n];
    for _ in 0..4 {
        v = t.shifted_solve(shift, &v);
        let norm = (v.iter().map(|x| x * x).sum::<f64>() * h).sqrt();
        v.iter_mut().for_each(|x| *x /= norm);
    }
    if v[n / 8] < 0.0 {
        v.iter_mut().for_each(|x| *x = -*x);
    }
    let x = (1..=n).map(|i| -opts.radius + i as f64 * h).collect();
    Ok((x, v))
}

/// `(ind_f, ind_g)`: windings of `f(0,k)` and `g(0,k)` over the symmetric grid.
pub fn jost_indices(sc: &ScatteringCoefficients, zero_threshold: f64) -> Result<(i64, i64)> {
    let f = ComplexSamples::on_grid(&sc.grid, sc.f_origin.clone())?.conj_extend()?;
    let g = ComplexSamples::on_grid(&sc.grid, sc.g_origin.clone())?.conj_extend()?;
    Ok((
        regularized_index(&f, zero_threshold)?.winding.index,
        regularized_index(&g, zero_threshold)?.winding.index,
    ))
}

/// Winding of `a` with the origin kept out of the upper half-plane.
pub fn index_of_a(sc: &ScatteringCoefficients, zero_threshold: f64) -> Result<i64> {
    let a = ComplexSamples::on_grid(&sc.grid, sc.a.clone())?.conj_extend()?;
    Ok(regularized_index(&a, zero_threshold)?.winding.index)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct NormingOptions {
    /// Relative step of the central difference for `ȧ`.
    pub diff_step: f64,
    /// Newton stops once `|a|` falls below this.
    pub root_tol: f64,
    pub max_newton: usize,
    /// Trapezoid points on the residue circle.
    pub circle_points: usize,
    /// Allowed `|Im s| / |s|`.
    pub imag_tol: f64,
    /// Smallest accepted `|b(i k_j)|`.
    pub b_floor: f64,
}

impl Default for NormingOptions {
    fn default() -> Self {
        Self {
            diff_step: 1e-5,
            root_tol: 1e-12,
            max_newton: 50,
            circle_points: 64,
            imag_tol: 1e-6,
            b_floor: 1e-8,
        }
    }
}

impl NormingOptions {
    pub fn validate(&self) -> Result<()> {
        let positive = [self.diff_step, self.root_tol, self.imag_tol, self.b_floor];
        if positive.iter().any(|v| !(v.is_finite() && *v > 0.0)) || self.max_newton == 0 || self.circle_points < 8 {
            return Err(Error::InvalidInput(format!("invalid norming options {self:?}")));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct NormingConstant {
    /// Refined `k_j` (bound state at `k = i k_j`).
    pub k: f64,
    /// `-i b(i k_j) / ȧ(i k_j)`.
    pub s: f64,
    /// `-i` times the contour estimate of the residue of `r` at `i k_j`.
    pub s_residue: f64,
    pub relative_gap: f64,
    /// `|a(i k_j)|` after refinement.
    pub a_residual: f64,
}

fn a_derivative(q: &Potential, k: Complex64, step: f64, integrator: Integrator) -> Result<Complex64> {
    let d = step * k.norm().max(1.0);
    let ap = transition_a(q, k + d, integrator)?;
    let am = transition_a(q, k - d, integrator)?;
    Ok((ap - am) / (2.0 * d))
}

/// Newton on `a(k) = 0` from `i k0` with step halving.
fn refine_root(q: &Potential, k0: f64, opts: &NormingOptions, integrator: Integrator) -> Result<(Complex64, f64)> {
    let mut k = I * k0;
    let mut ak = transition_a(q, k, integrator)?;
    for _ in 0..opts.max_newton {
        if ak.norm() < opts.root_tol {
            break;
        }
        let step = ak / a_derivative(q, k, opts.diff_step, integrator)?;
        let mut lambda = 1.0;
        loop {
            let trial = k - lambda * step;
            let at = transition_a(q, trial, integrator)?;
            if at.norm() < ak.norm() || lambda < 1e-6 {
                k = trial;
                ak = at;
                break;
            }
            lambda *= 0.5;
        }
        if (lambda * step).norm() < 1e-15 * k.norm() {
            break;
        }
    }
    Ok((k, ak.norm()))
}

/// Residue of `r = b/a` at `center` by the trapezoid rule on a circle.
pub fn residue_of_reflection(
    q: &Potential,
    center: Complex64,
    radius: f64,
    points: usize,
    integrator: Integrator,
) -> Result<Complex64> {
    let mut acc = Complex64::default();
    for m in 0..points {
        let e = Complex64::from_polar(1.0, 2.0 * std::f64::consts::PI * m as f64 / points as f64);
        let (a, b) = transition_ab(q, center + radius * e, integrator)?;
        acc += b / a * radius * e;
    }
    Ok(acc / points as f64)
}

/// Norming constants `s_j = -i b(i k_j) / ȧ(i k_j)`, each checked against a contour residue.
pub fn norming_constants(
    q: &Potential,
    bound_k: &[f64],
    opts: &NormingOptions,
    integrator: Integrator,
) -> Result<Vec<NormingConstant>> {
    let mut out = Vec::with_capacity(bound_k.len());
    for (j, &k0) in bound_k.iter().enumerate() {
        if k0.is_nan() || k0 <= 0.0 {
            return Err(Error::Norming(format!("bound state {j} has k_j = {k0}")));
        }
        let (root, a_residual) = refine_root(q, k0, opts, integrator)?;
        if a_residual > 1e3 * opts.root_tol {
            return Err(Error::Norming(format!("|a| = {a_residual:e} at refined root {root}")));
        }
        let (_, b) = transition_ab(q, root, integrator)?;
        if b.norm() < opts.b_floor {
            return Err(Error::Norming(format!("b vanishes together with a at {root}")));
        }
        let s = -I * b / a_derivative(q, root, opts.diff_step, integrator)?;
        if s.im.abs() > opts.imag_tol * s.norm() {
            return Err(Error::Norming(format!("s_{j} = {s} is not real")));
        }
        let kj = root.im;
        let nearest = bound_k
            .iter()
            .enumerate()
            .filter(|(i, _)| *i != j)
            .map(|(_, &o)| (o - kj).abs())
            .fold(kj, f64::min);
        let radius = 0.5 * nearest.min(1.0);
        let res = residue_of_reflection(q, root, radius, opts.circle_points, integrator)?;
        let s_residue = (-I * res).re;
        out.push(NormingConstant {
            k: kj,
            s: s.re,
            s_residue,
            relative_gap: (s.re - s_residue).abs() / s.re.abs(),
            a_residual,
        });
    }
    Ok(out)
}

/// Everything `diagnose` reports about one potential.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SpectrumReport {
    pub j: usize,
    pub kappa0: f64,
    pub kappa1: f64,
    pub ind_a: i64,
    pub ind_f: i64,
    pub ind_g: i64,
    pub ind_m: i64,
    pub ind_m_raw: Option<i64>,
    pub ind_h1: i64,
    pub ind_h2: i64,
    pub eigenvalues: Vec<f64>,
    pub bound_k: Vec<f64>,
    pub norming: Vec<f64>,
    pub norming_checks: Vec<NormingConstant>,
    pub identities: IdentityChecks,
}

/// The relations the report is expected to satisfy.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct IdentityChecks {
    pub j_equals_ind_a: bool,
    pub kappa1_le_kappa0: bool,
    pub ind_f_le_j: bool,
    pub ind_g_le_j: bool,
    pub ind_m_nonnegative: bool,
    /// `J = 0` implies `ind_f = ind_g = ind_m = 0`.
    pub lemma_chain: bool,
    pub ind_m_from_h: bool,
}

impl IdentityChecks {
    pub fn all(&self) -> bool {
        self.j_equals_ind_a
            && self.kappa1_le_kappa0
            && self.ind_f_le_j
            && self.ind_g_le_j
            && self.ind_m_nonnegative
            && self.lemma_chain
            && self.ind_m_from_h
    }
}

pub struct SpectrumInputs<'a> {
    pub q: &'a Potential,
    pub coefficients: &'a ScatteringCoefficients,
    pub indices: crate::riemann::IndexReport,
}

pub fn spectrum_report(
    input: SpectrumInputs<'_>,
    eigen: &EigenOptions,
    norming: &NormingOptions,
    tol: &Tolerances,
) -> Result<SpectrumReport> {
    let bs = count_negative_eigenvalues_line(input.q, eigen, tol.eps_spec)?;
    let (kappa0, kappa1) = kappa_pair(input.q, eigen)?;
    let ind_a = index_of_a(input.coefficients, tol.zero_threshold)?;
    let (ind_f, ind_g) = jost_indices(input.coefficients, tol.zero_threshold)?;
    let checks = norming_constants(input.q, &bs.bound_k, norming, input.coefficients.integrator)?;
    let j = bs.count;
    let ix = input.indices;
    let identities = IdentityChecks {
        j_equals_ind_a: j as i64 == ind_a,
        kappa1_le_kappa0: kappa1 <= kappa0 + tol.eps_spec,
        ind_f_le_j: ind_f <= j as i64,
        ind_g_le_j: ind_g <= j as i64,
        ind_m_nonnegative: ix.ind_m >= 0,
        lemma_chain: j != 0 || (ind_f == 0 && ind_g == 0 && ix.ind_m == 0),
        ind_m_from_h: ix.ind_m == -2 * (ix.ind_h1 + ix.ind_h2),
    };
    Ok(SpectrumReport {
        j,
        kappa0,
        kappa1,
        ind_a,
        ind_f,
        ind_g,
        ind_m: ix.ind_m,
        ind_m_raw: ix.ind_m_raw,
        ind_h1: ix.ind_h1,
        ind_h2: ix.ind_h2,
        eigenvalues: bs.eigenvalues,
        bound_k: bs.bound_k,
        norming: checks.iter().map(|c| c.s).collect(),
        norming_checks: checks,
        identities,
    })
}
