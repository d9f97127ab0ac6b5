//! Jost solutions, transition coefficients and synthetic boundary data.
//!
//! The homogeneous equation `-w'' + q w = k^2 w` is written as the first-order
//! system `Y' = A(x) Y` with `Y = (w, w')` and `A = [[0, 1], [q - k^2, 0]]`.
//! Each cell of the potential grid is advanced with the fourth-order Magnus
//! exponential built from the two Gauss points of the cell. `A` is traceless,
//! so every cell propagator has determinant one and the Wronskian of two
//! numerical solutions is conserved to rounding error.

use num_complex::Complex64;

use crate::error::{Error, Result};
use crate::par_map;
use crate::types::{BoundaryData, KGrid, Potential, X_MAX, X_MIN};

/// Largest `|Im k|` accepted by the integrator.
pub const MAX_IMAG_K: f64 = 25.0;

const I: Complex64 = Complex64::new(0.0, 1.0);

type State = [Complex64; 2];
type Mat = [[Complex64; 2]; 2];

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Side {
    /// `f(x, k) = e^{ikx}` for `x >= 1`.
    FromRight,
    /// `g(x, k) = e^{-ikx}` for `x <= -1`.
    FromLeft,
}

/// Fixed-step Magnus integrator; `substeps` equal pieces per potential cell.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Integrator {
    pub substeps: usize,
}

impl Default for Integrator {
    fn default() -> Self {
        Self { substeps: 1 }
    }
}

fn check_k(k: Complex64) -> Result<()> {
    if k == Complex64::new(0.0, 0.0) {
        return Err(Error::ZeroWavenumber);
    }
    if !(k.re.is_finite() && k.im.is_finite()) {
        return Err(Error::InvalidInput(format!("non-finite wavenumber {k}")));
    }
    if k.im.abs() > MAX_IMAG_K {
        return Err(Error::ImaginaryPartTooLarge(k.im.abs(), MAX_IMAG_K));
    }
    Ok(())
}

/// `cosh(s)` and `sinh(s)/s` as functions of `s^2`.
fn cosh_sinhc(s2: Complex64) -> (Complex64, Complex64) {
    if s2.norm() < 1e-6 {
        let ch = 1.0 + s2 * (0.5 + s2 / 24.0);
        let sc = 1.0 + s2 * (1.0 / 6.0 + s2 / 120.0);
        return (ch, sc);
    }
    if s2.im == 0.0 {
        let r = s2.re;
        return if r > 0.0 {
            let s = r.sqrt();
            (Complex64::from(s.cosh()), Complex64::from(s.sinh() / s))
        } else {
            let w = (-r).sqrt();
            (Complex64::from(w.cos()), Complex64::from(w.sin() / w))
        };
    }
    let s = s2.sqrt();
    (s.cosh(), s.sinh() / s)
}

/// Magnus propagator over `[x, x + h]` with linear `q` from `q_left` to `q_right`.
fn cell_propagator(q_left: f64, q_right: f64, h: f64, k2: Complex64) -> Mat {
    const G: f64 = 0.288_675_134_594_812_9; // sqrt(3)/6
    let q1 = q_left + (q_right - q_left) * (0.5 - G);
    let q2 = q_left + (q_right - q_left) * (0.5 + G);
    let c_mean = 0.5 * (q1 + q2) - k2;
    let d = Complex64::from(3f64.sqrt() / 12.0 * h * h * (q1 - q2));
    let off_lower = c_mean * h;
    let s2 = d * d + off_lower * h;
    let (ch, sc) = cosh_sinhc(s2);
    [[ch + sc * d, sc * h], [sc * off_lower, ch - sc * d]]
}

fn apply(m: &Mat, y: State) -> State {
    [m[0][0] * y[0] + m[0][1] * y[1], m[1][0] * y[0] + m[1][1] * y[1]]
}

/// Inverse of a unit-determinant 2x2 matrix applied to `y`.
fn apply_inverse(m: &Mat, y: State) -> State {
    [m[1][1] * y[0] - m[0][1] * y[1], -m[1][0] * y[0] + m[0][0] * y[1]]
}

/// Advances `y` from `x_from` to `x_to` (either direction) inside `[-1, 1]`.
fn propagate(q: &Potential, k2: Complex64, x_from: f64, x_to: f64, y: State, substeps: usize) -> State {
    if x_from == x_to {
        return y;
    }
    let h = q.spacing();
    let n = q.n_x();
    let cell_of = |x: f64| (((x - X_MIN) / h).floor() as usize).min(n - 2);
    let (lo, hi) = if x_from < x_to { (x_from, x_to) } else { (x_to, x_from) };
    let (c_lo, c_hi) = (cell_of(lo), cell_of(hi));

    // pieces in increasing x, each with its endpoints
    let mut pieces = Vec::with_capacity(c_hi - c_lo + 1);
    for c in c_lo..=c_hi {
        let a = q.node(c).max(lo);
        let b = q.node(c + 1).min(hi);
        if b > a {
            pieces.push((a, b));
        }
    }
    let sub = substeps.max(1);
    let mut y = y;
    let step = |a: f64, b: f64, forward: bool, y: State| -> State {
        let dh = (b - a) / sub as f64;
        let mut y = y;
        if forward {
            for s in 0..sub {
                let xa = a + s as f64 * dh;
                let m = cell_propagator(q.eval(xa), q.eval(xa + dh), dh, k2);
                y = apply(&m, y);
            }
        } else {
            for s in (0..sub).rev() {
                let xa = a + s as f64 * dh;
                let m = cell_propagator(q.eval(xa), q.eval(xa + dh), dh, k2);
                y = apply_inverse(&m, y);
            }
        }
        y
    };
    if x_from < x_to {
        for &(a, b) in &pieces {
            y = step(a, b, true, y);
        }
    } else {
        for &(a, b) in pieces.iter().rev() {
            y = step(a, b, false, y);
        }
    }
    y
}

fn seed(k: Complex64, side: Side) -> State {
    let e = (I * k).exp();
    match side {
        Side::FromRight => [e, I * k * e],
        Side::FromLeft => [e, -I * k * e],
    }
}

/// Value and x-derivative of a Jost solution at `x` in `[-1, 1]`.
pub fn jost_at(q: &Potential, k: Complex64, side: Side, x: f64, integrator: Integrator) -> Result<State> {
    check_k(k)?;
    if !(X_MIN..=X_MAX).contains(&x) {
        return Err(Error::InvalidInput(format!("x = {x} outside [-1, 1]")));
    }
    let start = match side {
        Side::FromRight => X_MAX,
        Side::FromLeft => X_MIN,
    };
    Ok(propagate(q, k * k, start, x, seed(k, side), integrator.substeps))
}

/// A Jost solution tabulated on the potential grid.
#[derive(Debug, Clone)]
pub struct JostField {
    pub x_grid: Vec<f64>,
    pub value: Vec<Complex64>,
    pub derivative: Vec<Complex64>,
    pub k: Complex64,
    pub side: Side,
    /// `(w(0), w'(0))`, propagated exactly to the origin even when it is not a node.
    pub origin: State,
}

pub fn solve_jost(q: &Potential, k: Complex64, side: Side) -> Result<JostField> {
    solve_jost_with(q, k, side, Integrator::default())
}

pub fn solve_jost_with(q: &Potential, k: Complex64, side: Side, integrator: Integrator) -> Result<JostField> {
    check_k(k)?;
    let n = q.n_x();
    let k2 = k * k;
    let x_grid = q.nodes();
    let mut value = vec![Complex64::default(); n];
    let mut derivative = vec![Complex64::default(); n];
    let mut y = seed(k, side);
    let mut put = |i: usize, y: State| {
        value[i] = y[0];
        derivative[i] = y[1];
    };
    match side {
        Side::FromRight => {
            put(n - 1, y);
            for i in (0..n - 1).rev() {
                y = propagate(q, k2, x_grid[i + 1], x_grid[i], y, integrator.substeps);
                put(i, y);
            }
        }
        Side::FromLeft => {
            put(0, y);
            for i in 1..n {
                y = propagate(q, k2, x_grid[i - 1], x_grid[i], y, integrator.substeps);
                put(i, y);
            }
        }
    }
    let origin = jost_at(q, k, side, 0.0, integrator)?;
    Ok(JostField {
        x_grid,
        value,
        derivative,
        k,
        side,
        origin,
    })
}

/// `f g' - f' g` at the origin, with the largest deviation seen at three interior nodes.
#[derive(Debug, Clone, Copy)]
pub struct Wronskian {
    pub value: Complex64,
    pub max_deviation: f64,
}

pub fn wronskian(wf: &JostField, wg: &JostField) -> Result<Wronskian> {
    if wf.x_grid != wg.x_grid {
        return Err(Error::Mismatch("Jost fields on different grids".into()));
    }
    if wf.k != wg.k {
        return Err(Error::Mismatch(format!("Jost fields at different k ({} vs {})", wf.k, wg.k)));
    }
    if wf.side != Side::FromRight || wg.side != Side::FromLeft {
        return Err(Error::Mismatch("wronskian expects (f, g) = (from_right, from_left)".into()));
    }
    let w = |f: State, g: State| f[0] * g[1] - f[1] * g[0];
    let value = w(wf.origin, wg.origin);
    let n = wf.x_grid.len();
    let max_deviation = [n / 4, n / 2, (3 * n) / 4]
        .iter()
        .map(|&i| {
            let wi = w([wf.value[i], wf.derivative[i]], [wg.value[i], wg.derivative[i]]);
            (wi - value).norm()
        })
        .fold(0.0, f64::max);
    Ok(Wronskian { value, max_deviation })
}

/// Jost data at the origin for one real or complex `k`.
#[derive(Debug, Clone, Copy)]
pub struct OriginJost {
    pub f: State,
    pub g: State,
}

impl OriginJost {
    pub fn compute(q: &Potential, k: Complex64, integrator: Integrator) -> Result<Self> {
        Ok(Self {
            f: jost_at(q, k, Side::FromRight, 0.0, integrator)?,
            g: jost_at(q, k, Side::FromLeft, 0.0, integrator)?,
        })
    }

    /// `[f, g]`.
    pub fn wronskian(&self) -> Complex64 {
        self.f[0] * self.g[1] - self.f[1] * self.g[0]
    }
}

/// `a(k) = [f, g] / (-2ik)` for any admissible complex `k`.
pub fn transition_a(q: &Potential, k: Complex64, integrator: Integrator) -> Result<Complex64> {
    let o = OriginJost::compute(q, k, integrator)?;
    Ok(o.wronskian() / (-2.0 * I * k))
}

/// `(a(k), b(k))` with `b(k) = [f(., k), g(., -k)] / (2ik)` by direct integration at `-k`.
pub fn transition_ab(q: &Potential, k: Complex64, integrator: Integrator) -> Result<(Complex64, Complex64)> {
    let o = OriginJost::compute(q, k, integrator)?;
    let g_neg = jost_at(q, -k, Side::FromLeft, 0.0, integrator)?;
    let a = o.wronskian() / (-2.0 * I * k);
    let b = (o.f[0] * g_neg[1] - o.f[1] * g_neg[0]) / (2.0 * I * k);
    Ok((a, b))
}

#[derive(Debug, Clone)]
pub struct ScatteringCoefficients {
    pub grid: KGrid,
    pub a: Vec<Complex64>,
    pub b: Vec<Complex64>,
    /// `f(0, k)`.
    pub f_origin: Vec<Complex64>,
    /// `g(0, k)`.
    pub g_origin: Vec<Complex64>,
    /// Max `| |a|^2 - |b|^2 - 1 |`.
    pub unitarity_defect: f64,
    /// Max residual of `f(0,k) = b g(0,k) + a g(0,-k)`.
    pub connection_defect: f64,
    pub integrator: Integrator,
}

#[derive(Debug, Clone, Copy)]
pub struct ForwardOptions {
    pub unitarity_tol: f64,
    /// Convergence threshold for the substep-halving check on `a(k_max)`.
    pub refine_tol: f64,
    pub max_substeps: usize,
}

impl Default for ForwardOptions {
    fn default() -> Self {
        Self {
            unitarity_tol: 1e-8,
            refine_tol: 1e-10,
            max_substeps: 64,
        }
    }
}

/// Halves the Magnus step until `a` at the top of the grid stops changing.
pub fn choose_integrator(q: &Potential, grid: &KGrid, opts: &ForwardOptions) -> Result<Integrator> {
    let probes = [grid.k_min(), 0.5 * (grid.k_min() + grid.k_max()), grid.k_max()];
    let eval = |substeps: usize| -> Result<Vec<Complex64>> {
        probes
            .iter()
            .map(|&k| transition_a(q, k.into(), Integrator { substeps }))
            .collect()
    };
    let mut substeps = 1;
    let mut prev = eval(substeps)?;
    loop {
        let next = eval(2 * substeps)?;
        let change = prev.iter().zip(&next).map(|(a, b)| (a - b).norm()).fold(0.0, f64::max);
        if change < opts.refine_tol {
            return Ok(Integrator { substeps });
        }
        substeps *= 2;
        if substeps > opts.max_substeps {
            return Err(Error::IntegratorFailure {
                max_change: change,
                substeps,
            });
        }
        prev = next;
    }
}

pub fn scattering_coefficients(q: &Potential, grid: &KGrid) -> Result<ScatteringCoefficients> {
    scattering_coefficients_with(q, grid, &ForwardOptions::default())
}

pub fn scattering_coefficients_with(
    q: &Potential,
    grid: &KGrid,
    opts: &ForwardOptions,
) -> Result<ScatteringCoefficients> {
    let integrator = choose_integrator(q, grid, opts)?;
    let origin: Vec<OriginJost> = par_map(grid.values(), |&k| OriginJost::compute(q, k.into(), integrator))
        .into_iter()
        .collect::<Result<_>>()?;

    let n = grid.len();
    let mut a = Vec::with_capacity(n);
    let mut b = Vec::with_capacity(n);
    let mut unitarity_defect: f64 = 0.0;
    let mut connection_defect: f64 = 0.0;
    for (&k, o) in grid.values().iter().zip(&origin) {
        // for real k and real q, g(x, -k) = conj(g(x, k))
        let g_neg = [o.g[0].conj(), o.g[1].conj()];
        let ak = o.wronskian() / (-2.0 * I * k);
        let bk = (o.f[0] * g_neg[1] - o.f[1] * g_neg[0]) / (2.0 * I * k);
        let defect = (ak.norm_sqr() - bk.norm_sqr() - 1.0).abs();
        if defect > opts.unitarity_tol {
            return Err(Error::Unitarity {
                k,
                defect,
                tol: opts.unitarity_tol,
            });
        }
        unitarity_defect = unitarity_defect.max(defect);
        let conn = (o.f[0] - bk * o.g[0] - ak * g_neg[0]).norm() / o.f[0].norm().max(1.0);
        connection_defect = connection_defect.max(conn);
        a.push(ak);
        b.push(bk);
    }
    Ok(ScatteringCoefficients {
        grid: grid.clone(),
        a,
        b,
        f_origin: origin.iter().map(|o| o.f[0]).collect(),
        g_origin: origin.iter().map(|o| o.g[0]).collect(),
        unitarity_defect,
        connection_defect,
        integrator,
    })
}

impl ScatteringCoefficients {
    /// `r = b / a` on the positive grid.
    pub fn reflection(&self) -> Vec<Complex64> {
        self.a.iter().zip(&self.b).map(|(a, b)| b / a).collect()
    }

    /// Boundary data `u(-1, k)`, `u(1, k)` of the point-source problem.
    pub fn boundary_data(&self) -> Result<BoundaryData> {
        let (mut u_minus, mut u_plus) = (Vec::with_capacity(self.grid.len()), Vec::with_capacity(self.grid.len()));
        for (((&k, a), f0), g0) in self.grid.values().iter().zip(&self.a).zip(&self.f_origin).zip(&self.g_origin) {
            let w = -2.0 * I * k * a;
            let edge = (I * k).exp(); // f(1, k) = g(-1, k) = e^{ik}
            u_plus.push(g0 * edge / w);
            u_minus.push(f0 * edge / w);
        }
        BoundaryData::new(self.grid.clone(), u_minus, u_plus)
    }
}

pub fn boundary_data(q: &Potential, grid: &KGrid) -> Result<BoundaryData> {
    scattering_coefficients(q, grid)?.boundary_data()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::types::{sample_potential, PotentialFamily};

    #[test]
    fn free_solution_real_k() {
        let q = Potential::zero(201).unwrap();
        let f = solve_jost(&q, 2.0.into(), Side::FromRight).unwrap();
        for (x, v) in f.x_grid.iter().zip(&f.value) {
            assert!((v - (I * 2.0 * x).exp()).norm() < 1e-12);
        }
        assert!((f.origin[0] - 1.0).norm() < 1e-12);
    }

    #[test]
    fn free_solution_imaginary_k() {
        let q = Potential::zero(201).unwrap();
        let f = solve_jost(&q, I, Side::FromRight).unwrap();
        for (x, v) in f.x_grid.iter().zip(&f.value) {
            assert!((v.re - (-x).exp()).abs() < 1e-12);
            assert!(v.im.abs() < 1e-14);
        }
    }

    #[test]
    fn seeds_are_exact() {
        let q = sample_potential(PotentialFamily::Bump { c: 3.0 }, 51).unwrap();
        let k = Complex64::new(1.3, 0.2);
        let f = solve_jost(&q, k, Side::FromRight).unwrap();
        let g = solve_jost(&q, k, Side::FromLeft).unwrap();
        let e = (I * k).exp();
        assert_eq!(f.value[50], e);
        assert_eq!(f.derivative[50], I * k * e);
        assert_eq!(g.value[0], e);
        assert_eq!(g.derivative[0], -I * k * e);
    }

    #[test]
    fn rejects_zero_and_far_complex_k() {
        let q = Potential::zero(11).unwrap();
        assert!(matches!(solve_jost(&q, 0.0.into(), Side::FromLeft), Err(Error::ZeroWavenumber)));
        assert!(matches!(
            solve_jost(&q, Complex64::new(1.0, 30.0), Side::FromLeft),
            Err(Error::ImaginaryPartTooLarge(..))
        ));
    }

    #[test]
    fn free_wronskian() {
        let q = Potential::zero(101).unwrap();
        let f = solve_jost(&q, 2.0.into(), Side::FromRight).unwrap();
        let g = solve_jost(&q, 2.0.into(), Side::FromLeft).unwrap();
        let w = wronskian(&f, &g).unwrap();
        assert!((w.value - Complex64::new(0.0, -4.0)).norm() < 1e-12);
        assert!(w.max_deviation < 1e-12);
        assert!(wronskian(&g, &f).is_err());
    }

    #[test]
    fn origin_off_grid_matches_on_grid() {
        // even n_x puts x = 0 inside a cell
        let q_even = Potential::from_fn(400, |x| 1.0 + 0.5 * x).unwrap();
        let q_odd = Potential::from_fn(401, |x| 1.0 + 0.5 * x).unwrap();
        let a = transition_a(&q_even, 3.0.into(), Integrator::default()).unwrap();
        let b = transition_a(&q_odd, 3.0.into(), Integrator::default()).unwrap();
        assert!((a - b).norm() < 1e-9, "{a} vs {b}");
    }

    #[test]
    fn free_coefficients_and_data() {
        let q = Potential::zero(101).unwrap();
        let grid = KGrid::uniform(0.05, 20.0, 64).unwrap();
        let sc = scattering_coefficients(&q, &grid).unwrap();
        for (a, b) in sc.a.iter().zip(&sc.b) {
            assert!((a - 1.0).norm() < 1e-12);
            assert!(b.norm() < 1e-12);
        }
        let data = sc.boundary_data().unwrap();
        for ((&k, um), up) in grid.values().iter().zip(&data.u_minus).zip(&data.u_plus) {
            let expected = I * (I * k).exp() / (2.0 * k);
            assert!((um - expected).norm() < 1e-12);
            assert!((up - expected).norm() < 1e-12);
        }
    }
}
