//! Phase unwrapping and winding indices of sampled functions on the real k-axis.
//!
//! Functions built from the transition coefficients may vanish or blow up at
//! `k = 0` (generically `a(k) ~ c / k`), which sits in the gap of every
//! symmetric grid. The index along the real axis is then only meaningful with
//! the origin excluded from the upper half-plane. [`origin_order`] finds the
//! local power `k^nu` from the samples next to the gap and
//! [`regularized_index`] removes it with the factor `((k + i) / k)^nu`, which
//! has neither zeros nor poles in the open upper half-plane.

use std::f64::consts::PI;

use nalgebra::{DMatrix, DVector};
use num_complex::Complex64;

use crate::error::{Error, Result};
use crate::types::ComplexSamples;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Winding {
    pub index: i64,
    /// Total unwrapped argument change divided by `2 pi`.
    pub turns: f64,
    /// `|turns - index|`.
    pub rounding_defect: f64,
}

fn median(mut v: Vec<f64>) -> f64 {
    v.sort_by(f64::total_cmp);
    let n = v.len();
    if n % 2 == 1 {
        v[n / 2]
    } else {
        0.5 * (v[n / 2 - 1] + v[n / 2])
    }
}

/// Fails on samples below `threshold` times the median magnitude.
pub fn check_nonzero(samples: &ComplexSamples, threshold: f64) -> Result<()> {
    let mags: Vec<f64> = samples.values().iter().map(|v| v.norm()).collect();
    let floor = threshold * median(mags.clone());
    for (k, m) in samples.nodes().iter().zip(&mags) {
        if *m <= floor {
            return Err(Error::NearZero {
                k: *k,
                magnitude: *m,
                threshold: floor,
            });
        }
    }
    Ok(())
}

/// Largest accepted principal phase increment between adjacent samples.
///
/// A principal increment never exceeds `pi`, so a true step beyond `pi` shows up
/// as a large increment of the wrong sign; anything past `pi / 2` is treated as
/// an unresolved step.
pub const MAX_PHASE_STEP: f64 = 0.5 * PI;

/// Continuous argument along the nodes, starting from the principal value at the first node.
pub fn unwrapped_phase(samples: &ComplexSamples, zero_threshold: f64) -> Result<Vec<f64>> {
    check_nonzero(samples, zero_threshold)?;
    let values = samples.values();
    let mut phase = Vec::with_capacity(values.len());
    let Some(first) = values.first() else {
        return Ok(phase);
    };
    phase.push(first.arg());
    for (i, w) in values.windows(2).enumerate() {
        let step = (w[1] / w[0]).arg();
        if step.abs() >= MAX_PHASE_STEP {
            return Err(Error::PhaseStep {
                k: samples.nodes()[i + 1],
                step,
            });
        }
        phase.push(phase[i] + step);
    }
    Ok(phase)
}

/// Winding number of the samples over their nodes, rounded to the nearest integer.
pub fn winding_index(samples: &ComplexSamples, zero_threshold: f64) -> Result<Winding> {
    let phase = unwrapped_phase(samples, zero_threshold)?;
    let turns = match (phase.first(), phase.last()) {
        (Some(a), Some(b)) => (b - a) / (2.0 * PI),
        _ => 0.0,
    };
    let index = turns.round() as i64;
    Ok(Winding {
        index,
        turns,
        rounding_defect: (turns - index as f64).abs(),
    })
}

/// Width of the window next to the gap used by [`origin_order`].
pub const ORIGIN_WINDOW: f64 = 0.6;
const ORIGIN_MAX_DEGREE: usize = 8;
const ORIGIN_FIT_TOL: f64 = 1e-9;
const CIRCLE_POINTS: usize = 256;

type Fit = (Vec<Complex64>, Vec<Complex64>, f64);

/// Linearised least-squares fit `v ≈ P(t) / R(t)`, `R(0) = 1`, both of degree `d`,
/// with the relative residual of the fit.
fn rational_fit(t: &[f64], v: &[Complex64], d: usize) -> Option<Fit> {
    let n = t.len();
    let a = DMatrix::from_fn(n, 2 * d + 1, |i, j| {
        if j <= d {
            Complex64::from(t[i].powi(j as i32))
        } else {
            -v[i] * t[i].powi((j - d) as i32)
        }
    });
    let rhs = DVector::from_column_slice(v);
    let x = a.clone().svd(true, true).solve(&rhs, 1e-13).ok()?;
    let residual = (&a * &x - &rhs).norm() / rhs.norm();
    let p = x.iter().take(d + 1).copied().collect();
    let r = std::iter::once(Complex64::from(1.0)).chain(x.iter().skip(d + 1).copied()).collect();
    Some((p, r, residual))
}

/// Zeros of the polynomial inside `|t| < rho`, by the argument principle.
fn zeros_inside(coeffs: &[Complex64], rho: f64) -> Option<i32> {
    let eval = |z: Complex64| horner(coeffs, z);
    let mut total = 0.0;
    let mut prev = eval(Complex64::from(rho));
    for j in 1..=CIRCLE_POINTS {
        let z = Complex64::from_polar(rho, 2.0 * PI * j as f64 / CIRCLE_POINTS as f64);
        let cur = eval(z);
        if cur.norm() == 0.0 || prev.norm() == 0.0 {
            return None;
        }
        let step = (cur / prev).arg();
        if step.abs() > MAX_PHASE_STEP {
            return None;
        }
        total += step;
        prev = cur;
    }
    Some((total / (2.0 * PI)).round() as i32)
}

/// Rational model `P(k / k_hi) / R(k / k_hi)` of a sampled function next to the gap.
#[derive(Debug, Clone, PartialEq)]
pub struct OriginFit {
    /// Power `nu` in `v(k) ~ c k^nu` as `k -> 0`.
    pub order: i32,
    /// Smallest positive node.
    pub k0: f64,
    k_hi: f64,
    p: Vec<Complex64>,
    r: Vec<Complex64>,
}

fn horner(coeffs: &[Complex64], z: Complex64) -> Complex64 {
    coeffs.iter().rev().fold(Complex64::default(), |acc, &c| acc * z + c)
}

impl OriginFit {
    pub fn eval(&self, k: f64) -> Complex64 {
        let t = Complex64::from(k / self.k_hi);
        horner(&self.p, t) / horner(&self.r, t)
    }
}

/// Fits the samples next to the gap.
///
/// `nu` is the number of zeros of the fit minus its number of poles within
/// `k_min / 2` of the origin. A zero or pole that close to the gap cannot be
/// told apart from one at the origin itself.
pub fn origin_fit(samples: &ComplexSamples) -> Result<OriginFit> {
    let half = samples.positive_half();
    let (nodes, values) = (half.nodes(), half.values());
    let k0 = match nodes.first() {
        Some(&k) => k,
        None => return Err(Error::OriginOrder("no positive nodes".into())),
    };
    let end = nodes.partition_point(|&k| k <= k0 + ORIGIN_WINDOW);
    let max_degree = ORIGIN_MAX_DEGREE.min(end.saturating_sub(2) / 2);
    if max_degree == 0 {
        return Err(Error::OriginOrder(format!("only {end} nodes within {ORIGIN_WINDOW} of the gap")));
    }
    let k_hi = nodes[end - 1];
    let t: Vec<f64> = nodes[..end].iter().map(|k| k / k_hi).collect();
    // the lowest degree that fits: higher ones add spurious zero-pole pairs
    let mut best: Option<Fit> = None;
    for d in 1..=max_degree {
        if let Some(fit) = rational_fit(&t, &values[..end], d) {
            let done = fit.2 <= ORIGIN_FIT_TOL;
            if best.as_ref().is_none_or(|b| fit.2 < b.2) {
                best = Some(fit);
            }
            if done {
                break;
            }
        }
    }
    let (p, r, _) = best.ok_or_else(|| Error::OriginOrder("rational fit failed".into()))?;
    let rho = 0.5 * k0 / k_hi;
    match (zeros_inside(&p, rho), zeros_inside(&r, rho)) {
        (Some(zp), Some(zr)) => Ok(OriginFit {
            order: zp - zr,
            k0,
            k_hi,
            p,
            r,
        }),
        _ => Err(Error::OriginOrder(format!(
            "fitted zero or pole on the circle |k| = {}",
            0.5 * k0
        ))),
    }
}

/// Power `nu` in `v(k) ~ c k^nu` as `k -> 0+`; see [`origin_fit`].
pub fn origin_order(samples: &ComplexSamples) -> Result<i32> {
    origin_fit(samples).map(|f| f.order)
}

/// `v(k) ((k + i) / k)^order`.
pub fn regularize_origin(samples: &ComplexSamples, order: i32) -> Result<ComplexSamples> {
    samples.map(|k, v| v * ((Complex64::new(k, 1.0)) / k).powi(order))
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct OriginIndex {
    pub winding: Winding,
    pub origin_order: i32,
}

/// Index with the origin excluded from the upper half-plane.
pub fn regularized_index(samples: &ComplexSamples, zero_threshold: f64) -> Result<OriginIndex> {
    let order = origin_order(samples)?;
    let winding = winding_index(&regularize_origin(samples, order)?, zero_threshold)?;
    Ok(OriginIndex {
        winding,
        origin_order: order,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::types::KGrid;

    fn sym(f: impl Fn(f64) -> Complex64) -> ComplexSamples {
        let g = KGrid::uniform(0.05, 40.0, 2000).unwrap();
        let nodes = g.symmetric_nodes();
        let values = nodes.iter().map(|&k| f(k)).collect();
        ComplexSamples::new(nodes, values).unwrap()
    }

    #[test]
    fn constant_has_index_zero() {
        let s = sym(|_| Complex64::new(1.0, 0.0));
        assert_eq!(winding_index(&s, 1e-10).unwrap().index, 0);
    }

    #[test]
    fn mobius_factors() {
        // (k - i)/(k + i) -> one turn; its inverse -> minus one
        let s = sym(|k| Complex64::new(k, -1.0) / Complex64::new(k, 1.0));
        let w = winding_index(&s, 1e-10).unwrap();
        assert_eq!(w.index, 1);
        assert!(w.rounding_defect < 0.02);
        let s = sym(|k| Complex64::new(k, 1.0) / Complex64::new(k, -1.0));
        assert_eq!(winding_index(&s, 1e-10).unwrap().index, -1);
    }

    #[test]
    fn coarse_grid_is_refused() {
        let nodes = vec![-2.0, -1.0, 1.0, 2.0];
        let values = nodes.iter().map(|&k: &f64| Complex64::from_polar(1.0, 3.0 * k)).collect();
        let s = ComplexSamples::new(nodes, values).unwrap();
        assert!(matches!(winding_index(&s, 1e-10), Err(Error::PhaseStep { .. })));
    }

    #[test]
    fn near_zero_sample_is_refused() {
        let s = sym(|k| Complex64::new(if (k - 1.0).abs() < 0.01 { 0.0 } else { 1.0 }, 0.0));
        assert!(matches!(winding_index(&s, 1e-10), Err(Error::NearZero { .. })));
    }

    #[test]
    fn origin_orders() {
        // k / (k + i) ~ -i k: odd, order one
        let s = sym(|k| Complex64::new(k, 0.0) / Complex64::new(k, 1.0));
        assert_eq!(origin_order(&s).unwrap(), 1);
        let s = sym(|k| (Complex64::new(k, 1.0) / k) * 2.0);
        assert_eq!(origin_order(&s).unwrap(), -1);
        let s = sym(|k| Complex64::new(k * k, 0.0) / Complex64::new(k, 1.0).powi(2));
        assert_eq!(origin_order(&s).unwrap(), 2);
        let s = sym(|k| Complex64::new(1.0, 0.0) + Complex64::new(0.0, 0.3 * k));
        assert_eq!(origin_order(&s).unwrap(), 0);
    }

    #[test]
    fn regularized_index_counts_upper_zeros_only() {
        // (k - 2i)(k) / (k + i)^2: zero at 2i and a boundary zero at 0
        let s = sym(|k| Complex64::new(k, -2.0) * k / Complex64::new(k, 1.0).powi(2));
        let r = regularized_index(&s, 1e-10).unwrap();
        assert_eq!(r.origin_order, 1);
        assert_eq!(r.winding.index, 1);
    }
}
