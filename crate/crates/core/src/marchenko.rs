//! Potential reconstruction from the reflection coefficient (no bound states).
//!
//! With `F(s) = (1/2pi) ∫ r(k) e^{iks} dk` the kernel solves
//! `K(x,y) + F(x+y) + ∫_x^∞ K(x,t) F(t+y) dt = 0` for `y >= x`, and
//! `-2 d/dx K(x,x)` is the potential. `r = b/a` describes a wave coming in from
//! the left, so this equation returns the mirror image `q(-x)`; [`recover_q`]
//! flips it back.
//!
//! For `q` supported in `[-1, 1]`, `F(s)` and `K(x,y)` vanish once `s` or `x+y`
//! exceeds 2, so the `t`-integral is cut at `x + t = s_trunc` (a little past 2)
//! instead of running over a long half-line.

use std::f64::consts::PI;

use nalgebra::{DMatrix, DVector};
use num_complex::Complex64;
use serde::Serialize;

use crate::cauchy::lagrange_resample;
use crate::error::{Error, Result};
use crate::par_map;
use crate::tolerances::Tolerances;
use crate::types::{ComplexSamples, Potential, X_MAX, X_MIN};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, serde::Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct MarchenkoOptions {
    pub x_lo: f64,
    pub x_hi: f64,
    /// The `t`-integral runs over `x <= t <= max(s_trunc - x, x + min_span)`.
    pub s_trunc: f64,
    pub min_span: f64,
    /// Upper bound on the x-spacing; the spacing also follows `pi / (4 k_max)`.
    pub max_spacing: f64,
    /// Fraction of the k-range (at the top) covered by the raised-cosine taper.
    pub taper_fraction: f64,
    pub interp_points: usize,
}

impl Default for MarchenkoOptions {
    fn default() -> Self {
        Self {
            x_lo: -1.5,
            x_hi: 1.5,
            s_trunc: 2.5,
            min_span: 0.5,
            max_spacing: 0.01,
            taper_fraction: 0.15,
            interp_points: 8,
        }
    }
}

impl MarchenkoOptions {
    /// Uniform x-spacing for data up to `k_max`, dividing `[x_lo, x_hi]` evenly.
    pub fn spacing(&self, k_max: f64) -> f64 {
        let target = (PI / (4.0 * k_max)).min(self.max_spacing);
        let width = self.x_hi - self.x_lo;
        width / (width / target).ceil()
    }

    pub fn validate(&self) -> Result<()> {
        let ok = self.x_lo < X_MIN
            && self.x_hi > X_MAX
            && self.s_trunc >= 2.0 * X_MAX
            && self.min_span > 0.0
            && self.max_spacing > 0.0
            && (0.0..1.0).contains(&self.taper_fraction)
            && self.interp_points >= 2;
        if ok {
            Ok(())
        } else {
            Err(Error::InvalidInput(format!("invalid Marchenko options {self:?}")))
        }
    }
}

/// `F` tabulated at `s_m = s_min + m ds`.
#[derive(Debug, Clone, PartialEq)]
pub struct KernelF {
    pub s_min: f64,
    pub ds: f64,
    pub values: Vec<f64>,
    /// Largest `|Im F|` before it was discarded.
    pub max_imag: f64,
}

impl KernelF {
    pub fn s(&self, m: usize) -> f64 {
        self.s_min + m as f64 * self.ds
    }

    pub fn zero(s_min: f64, ds: f64, len: usize) -> Self {
        Self {
            s_min,
            ds,
            values: vec![0.0; len],
            max_imag: 0.0,
        }
    }
}

/// Raised-cosine window equal to 1 below `(1 - fraction) k_max`.
pub fn taper(k: f64, k_max: f64, fraction: f64) -> f64 {
    let start = (1.0 - fraction) * k_max;
    let k = k.abs();
    if k <= start {
        1.0
    } else if k >= k_max {
        0.0
    } else {
        0.5 * (1.0 + (PI * (k - start) / (k_max - start)).cos())
    }
}

/// `F(s_m) = (1/2pi) Σ r(k_j) T(k_j) e^{i k_j s_m} dk` on a uniform line through `k = 0`.
pub fn kernel_from_reflection(
    r: &ComplexSamples,
    s_min: f64,
    ds: f64,
    len: usize,
    opts: &MarchenkoOptions,
    tol: &Tolerances,
) -> Result<KernelF> {
    r.require_symmetric("r")?;
    let top = r.values().iter().map(|v| v.norm()).fold(0.0, f64::max);
    if top > 1.0 + tol.recovered_unitarity {
        return Err(Error::Residual {
            what: "|r| - 1",
            value: top - 1.0,
            threshold: tol.recovered_unitarity,
        });
    }
    let positive = r.positive_half();
    let pk = positive.nodes();
    let k_max = pk[pk.len() - 1];
    let dk = (k_max - pk[0]) / (pk.len() - 1) as f64;
    let half = (k_max / dk).floor() as usize;
    let ks: Vec<f64> = (0..=2 * half).map(|j| (j as f64 - half as f64) * dk).collect();
    let rk = lagrange_resample(r.nodes(), r.values(), &ks, opts.interp_points)?;
    let weighted: Vec<Complex64> = ks
        .iter()
        .zip(&rk)
        .enumerate()
        .map(|(j, (&k, &v))| {
            let end = if j == 0 || j == 2 * half { 0.5 } else { 1.0 };
            v * (end * dk * taper(k, k_max, opts.taper_fraction) / (2.0 * PI))
        })
        .collect();

    let s_values: Vec<f64> = (0..len).map(|m| s_min + m as f64 * ds).collect();
    let raw: Vec<Complex64> = par_map(&s_values, |&s| {
        // pair k and -k so the sum is real up to rounding
        let mut acc = weighted[half];
        for j in 1..=half {
            let (a, b) = (weighted[half + j], weighted[half - j]);
            let e = Complex64::from_polar(1.0, ks[half + j] * s);
            acc += a * e + b * e.conj();
        }
        acc
    });
    let max_imag = raw.iter().map(|v| v.im.abs()).fold(0.0, f64::max);
    if max_imag > tol.kernel_imag {
        return Err(Error::Residual {
            what: "imaginary part of F",
            value: max_imag,
            threshold: tol.kernel_imag,
        });
    }
    Ok(KernelF {
        s_min,
        ds,
        values: raw.iter().map(|v| v.re).collect(),
        max_imag,
    })
}

/// One row `K(x, y_j)`, `y_j = x + j dy`.
#[derive(Debug, Clone, PartialEq)]
pub struct KernelRow {
    pub x: f64,
    pub values: Vec<f64>,
    /// Max residual of the discrete equation at the collocation nodes.
    pub residual: f64,
    /// 1-norm condition estimate of the symmetrised system.
    pub condition: f64,
}

type Solver = dyn Fn(&DVector<f64>) -> DVector<f64>;

/// Solves the trapezoid Nyström system for one `x`.
///
/// `offset` is the index of `F(2x)` in `f`; the row has `n` nodes with the spacing of `f`.
pub fn solve_marchenko(f: &KernelF, x: f64, offset: usize, n: usize) -> Result<KernelRow> {
    let need = offset + 2 * (n - 1);
    if n == 0 || need >= f.values.len() {
        return Err(Error::InvalidInput(format!("F table too short for row at x = {x}")));
    }
    let dy = f.ds;
    let w: Vec<f64> = (0..n)
        .map(|j| if n > 1 && (j == 0 || j == n - 1) { 0.5 * dy } else { dy })
        .collect();
    let sw: Vec<f64> = w.iter().map(|v| v.sqrt()).collect();
    let fv = &f.values;
    let a = DMatrix::from_fn(n, n, |j, l| {
        let d = if j == l { 1.0 } else { 0.0 };
        d + sw[j] * fv[offset + j + l] * sw[l]
    });
    let rhs = DVector::from_fn(n, |j, _| -sw[j] * fv[offset + j]);

    let solve: Box<Solver> = match a.clone().cholesky() {
        Some(ch) => Box::new(move |b| ch.solve(b)),
        None => {
            let lu = a.clone().lu();
            if lu.is_invertible() {
                Box::new(move |b| lu.solve(b).unwrap_or_else(|| DVector::from_element(b.len(), f64::NAN)))
            } else {
                return Err(Error::IllConditioned {
                    x,
                    condition: f64::INFINITY,
                });
            }
        }
    };
    let kt = solve(&rhs);
    let values: Vec<f64> = kt.iter().zip(&sw).map(|(v, s)| v / s).collect();
    if values.iter().any(|v| !v.is_finite()) {
        return Err(Error::IllConditioned {
            x,
            condition: f64::INFINITY,
        });
    }
    let residual = (0..n)
        .map(|j| {
            let integral: f64 = (0..n).map(|l| w[l] * values[l] * fv[offset + j + l]).sum();
            (values[j] + fv[offset + j] + integral).abs()
        })
        .fold(0.0, f64::max);
    let condition = one_norm(&a) * inverse_one_norm(n, &solve);
    Ok(KernelRow {
        x,
        values,
        residual,
        condition,
    })
}

fn one_norm(a: &DMatrix<f64>) -> f64 {
    a.column_iter().map(|c| c.iter().map(|v| v.abs()).sum::<f64>()).fold(0.0, f64::max)
}

/// Hager's estimate of `||A^{-1}||_1` for symmetric `A`.
fn inverse_one_norm(n: usize, solve: &Solver) -> f64 {
    let mut x = DVector::from_element(n, 1.0 / n as f64);
    let mut est = 0.0;
    for _ in 0..5 {
        let y = solve(&x);
        est = y.iter().map(|v| v.abs()).sum();
        let xi = y.map(|v| if v >= 0.0 { 1.0 } else { -1.0 });
        let z = solve(&xi);
        let (j, zmax) = z.iter().enumerate().fold((0, 0.0), |acc, (i, v)| if v.abs() > acc.1 { (i, v.abs()) } else { acc });
        if zmax <= z.dot(&x) {
            break;
        }
        x = DVector::zeros(n);
        x[j] = 1.0;
    }
    est
}

/// Kernel rows over the x-grid, with the table of `F` they were built from.
#[derive(Debug, Clone)]
pub struct MarchenkoKernel {
    pub x_grid: Vec<f64>,
    pub rows: Vec<KernelRow>,
    pub f: KernelF,
}

impl MarchenkoKernel {
    pub fn diagonal(&self) -> Vec<f64> {
        self.rows.iter().map(|r| r.values[0]).collect()
    }

    pub fn max_residual(&self) -> f64 {
        self.rows.iter().map(|r| r.residual).fold(0.0, f64::max)
    }

    pub fn max_condition(&self) -> f64 {
        self.rows.iter().map(|r| r.condition).fold(0.0, f64::max)
    }

    /// Largest `|K|` at the cut end of any row.
    pub fn truncation_tail(&self) -> f64 {
        self.rows
            .iter()
            .map(|r| r.values.last().map_or(0.0, |v| v.abs()))
            .fold(0.0, f64::max)
    }
}

/// Builds `F` from `r` and solves every row on `[x_lo, x_hi]`.
pub fn solve_kernel(r: &ComplexSamples, opts: &MarchenkoOptions, tol: &Tolerances) -> Result<MarchenkoKernel> {
    opts.validate()?;
    let k_max = r.nodes()[r.len() - 1];
    let dx = opts.spacing(k_max);
    let n_x = ((opts.x_hi - opts.x_lo) / dx).round() as usize;
    let x_grid: Vec<f64> = (0..=n_x).map(|i| opts.x_lo + i as f64 * dx).collect();
    let span = |x: f64| ((opts.s_trunc - 2.0 * x).max(opts.min_span) / dx).round() as usize + 1;
    let len = (0..=n_x).map(|i| 2 * i + 2 * (span(x_grid[i]) - 1) + 1).max().unwrap_or(1);
    let f = kernel_from_reflection(r, 2.0 * opts.x_lo, dx, len, opts, tol)?;
    let idx: Vec<usize> = (0..=n_x).collect();
    let rows = par_map(&idx, |&i| solve_marchenko(&f, x_grid[i], 2 * i, span(x_grid[i])))
        .into_iter()
        .collect::<Result<Vec<_>>>()?;
    let kernel = MarchenkoKernel { x_grid, rows, f };
    let condition = kernel.max_condition();
    if condition > tol.marchenko_condition {
        let worst = kernel.rows.iter().max_by(|a, b| a.condition.total_cmp(&b.condition)).map_or(0.0, |r| r.x);
        return Err(Error::IllConditioned { x: worst, condition });
    }
    let residual = kernel.max_residual();
    if residual > tol.marchenko_residual {
        return Err(Error::Residual {
            what: "Marchenko",
            value: residual,
            threshold: tol.marchenko_residual,
        });
    }
    Ok(kernel)
}

/// Fourth-order derivative on a uniform grid, one-sided at both ends.
pub fn derivative(values: &[f64], h: f64) -> Vec<f64> {
    let n = values.len();
    assert!(n >= 5, "need at least five samples");
    let v = values;
    (0..n)
        .map(|i| {
            let d = if i >= 2 && i + 2 < n {
                v[i - 2] - 8.0 * v[i - 1] + 8.0 * v[i + 1] - v[i + 2]
            } else if i < 2 {
                let b = &v[i..i + 5];
                match i {
                    0 => -25.0 * b[0] + 48.0 * b[1] - 36.0 * b[2] + 16.0 * b[3] - 3.0 * b[4],
                    _ => -3.0 * v[0] - 10.0 * v[1] + 18.0 * v[2] - 6.0 * v[3] + v[4],
                }
            } else {
                let b = &v[n - 5..];
                if i == n - 1 {
                    25.0 * b[4] - 48.0 * b[3] + 36.0 * b[2] - 16.0 * b[1] + 3.0 * b[0]
                } else {
                    3.0 * b[4] + 10.0 * b[3] - 18.0 * b[2] + 6.0 * b[1] - b[0]
                }
            };
            d / (12.0 * h)
        })
        .collect()
}

/// Reconstructed potential and its energy outside `[-1, 1]`.
#[derive(Debug, Clone)]
pub struct Reconstruction {
    pub potential: Potential,
    /// `-2 d/dx K(x,x)` flipped back, on the kernel's x-grid.
    pub x_grid: Vec<f64>,
    pub q_full: Vec<f64>,
    /// `||q|| outside [-1,1] / ||q|| inside`, both discrete L2 on the kernel grid.
    pub leakage: f64,
}

/// `q(x) = -2 d/dx K(-x,-x)` resampled (piecewise linear) onto `n_x` nodes of `[-1, 1]`.
pub fn recover_q(kernel: &MarchenkoKernel, n_x: usize) -> Result<Reconstruction> {
    let xg = &kernel.x_grid;
    if xg.len() < 5 {
        return Err(Error::InvalidInput("kernel grid too short".into()));
    }
    let h = xg[1] - xg[0];
    let mirrored: Vec<f64> = derivative(&kernel.diagonal(), h).iter().map(|d| -2.0 * d).collect();
    if (xg[0] + xg[xg.len() - 1]).abs() > 1e-9 {
        return Err(Error::InvalidInput("kernel grid must be symmetric about 0".into()));
    }
    let q_full: Vec<f64> = mirrored.iter().rev().copied().collect();
    let at = |x: f64| {
        let t = ((x - xg[0]) / h).clamp(0.0, (xg.len() - 1) as f64);
        let i = (t.floor() as usize).min(xg.len() - 2);
        let w = t - i as f64;
        (1.0 - w) * q_full[i] + w * q_full[i + 1]
    };
    let potential = Potential::from_fn(n_x, at)?;
    let (mut inside, mut outside) = (0.0, 0.0);
    for (&x, &v) in xg.iter().zip(&q_full) {
        if x.abs() <= X_MAX + 1e-12 {
            inside += v * v;
        } else {
            outside += v * v;
        }
    }
    let leakage = if inside > 0.0 { (outside / inside).sqrt() } else { outside.sqrt() };
    Ok(Reconstruction {
        potential,
        x_grid: xg.clone(),
        q_full,
        leakage,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn taper_shape() {
        assert_eq!(taper(10.0, 60.0, 0.15), 1.0);
        assert_eq!(taper(-51.0, 60.0, 0.15), 1.0);
        assert!((taper(55.5, 60.0, 0.15) - 0.5).abs() < 1e-12);
        assert!(taper(60.0, 60.0, 0.15).abs() < 1e-15);
    }

    #[test]
    fn zero_f_gives_zero_row() {
        let f = KernelF::zero(-3.0, 0.01, 400);
        let row = solve_marchenko(&f, -1.0, 0, 100).unwrap();
        assert!(row.values.iter().all(|v| *v == 0.0));
        assert!((row.condition - 1.0).abs() < 1e-12);
    }

    #[test]
    fn derivative_is_fourth_order() {
        let h = 0.01;
        let v: Vec<f64> = (0..200).map(|i| (i as f64 * h).sin()).collect();
        let d = derivative(&v, h);
        for (i, di) in d.iter().enumerate() {
            assert!((di - (i as f64 * h).cos()).abs() < 1e-8, "{i}");
        }
    }

    #[test]
    fn exact_solution_of_separable_kernel() {
        // F(s) = c e^{-s}: K(x,y) = -c e^{-(x+y)} / (1 + c e^{-2x}/2) on the half-line;
        // with a finite cut at T the denominator becomes 1 + c (e^{-2x} - e^{-2T})/2
        let (c, ds): (f64, f64) = (0.3, 0.001);
        let len = 4001;
        let f = KernelF {
            s_min: 0.0,
            ds,
            values: (0..len).map(|m| c * (-(m as f64 * ds)).exp()).collect(),
            max_imag: 0.0,
        };
        let n = 1001;
        let row = solve_marchenko(&f, 0.5, 1000, n).unwrap();
        let (x, t): (f64, f64) = (0.5, 0.5 + (n - 1) as f64 * ds);
        let denom = 1.0 + 0.5 * c * ((-2.0 * x).exp() - (-2.0 * t).exp());
        for (j, v) in row.values.iter().enumerate() {
            let y = x + j as f64 * ds;
            let exact = -c * (-(x + y)).exp() / denom;
            assert!((v - exact).abs() < 1e-6, "{j}: {v} vs {exact}");
        }
        assert!(row.residual < 1e-12);
    }
}
