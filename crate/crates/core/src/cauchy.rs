//! Cauchy projections of functions sampled on the real line.
//!
//! `C± phi(x) = ±phi(x)/2 + (i/2) H phi(x)` with the Hilbert transform
//! `H phi(x) = (1/pi) p.v. ∫ phi(t) / (x - t) dt`. On a uniform line `x_j = j h`
//! the transform uses the staggered rule `H phi_j ≈ (2/pi) Σ_{j-l odd} phi_l / (j - l)`,
//! evaluated as one FFT convolution. Functions are assumed to behave like
//! `c / t` beyond the sampled range; that part is integrated in closed form.

use std::f64::consts::PI;

use num_complex::Complex64;
use rustfft::FftPlanner;

use crate::error::{Error, Result};

const I: Complex64 = Complex64::new(0.0, 1.0);

/// Uniform nodes `j h`, `j = -half ..= half`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Line {
    h: f64,
    half: usize,
}

impl Line {
    pub fn new(h: f64, half: usize) -> Result<Self> {
        if !(h.is_finite() && h > 0.0) || half == 0 {
            return Err(Error::InvalidInput(format!("bad line (h = {h}, half = {half})")));
        }
        Ok(Self { h, half })
    }

    /// Smallest line with spacing `h` whose last node is at or beyond `reach`.
    pub fn covering(h: f64, reach: f64) -> Result<Self> {
        Self::new(h, (reach / h - 1e-9).ceil().max(1.0) as usize)
    }

    pub fn spacing(&self) -> f64 {
        self.h
    }

    pub fn half(&self) -> usize {
        self.half
    }

    pub fn len(&self) -> usize {
        2 * self.half + 1
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    pub fn node(&self, i: usize) -> f64 {
        (i as f64 - self.half as f64) * self.h
    }

    pub fn nodes(&self) -> Vec<f64> {
        (0..self.len()).map(|i| self.node(i)).collect()
    }

    pub fn zero_index(&self) -> usize {
        self.half
    }

    pub fn edge(&self) -> f64 {
        self.node(self.len() - 1)
    }
}

/// Coefficients of the `c / t` behaviour beyond either end of the line.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct Tail {
    pub left: Complex64,
    pub right: Complex64,
}

/// Least-squares `c` in `phi(t) ≈ c / t` over the samples with `lo <= |t| <= hi` on each side.
pub fn fit_tail(nodes: &[f64], values: &[Complex64], lo: f64, hi: f64) -> Tail {
    let fit = |sign: f64| {
        let (mut num, mut den) = (Complex64::default(), 0.0);
        for (&t, &v) in nodes.iter().zip(values) {
            let s = sign * t;
            if s >= lo && s <= hi {
                num += v / t;
                den += 1.0 / (t * t);
            }
        }
        if den > 0.0 { num / den } else { Complex64::default() }
    };
    Tail {
        left: fit(-1.0),
        right: fit(1.0),
    }
}

/// `ln(1 - x/k) / x`, continuous at `x = 0`.
fn log_ratio(x: f64, k: f64) -> f64 {
    if x == 0.0 { -1.0 / k } else { (-x / k).ln_1p() / x }
}

/// Staggered discrete Hilbert transform plus the closed-form contribution of the tails.
pub fn hilbert(line: &Line, values: &[Complex64], tail: Tail) -> Result<Vec<Complex64>> {
    let n = line.len();
    if values.len() != n {
        return Err(Error::Mismatch(format!("{} values on a line of {n} nodes", values.len())));
    }
    let size = (2 * n - 1).next_power_of_two();
    let mut planner = FftPlanner::<f64>::new();
    let fwd = planner.plan_fft_forward(size);
    let inv = planner.plan_fft_inverse(size);

    let mut kernel = vec![Complex64::default(); size];
    for d in (1..n).step_by(2) {
        let w = Complex64::from(2.0 / (PI * d as f64));
        kernel[d] = w;
        kernel[size - d] = -w;
    }
    let mut signal = vec![Complex64::default(); size];
    signal[..n].copy_from_slice(values);
    fwd.process(&mut kernel);
    fwd.process(&mut signal);
    for (s, k) in signal.iter_mut().zip(&kernel) {
        *s *= k;
    }
    inv.process(&mut signal);
    let scale = 1.0 / size as f64;

    let h = line.spacing();
    let (first, last) = (line.node(0), line.node(n - 1));
    Ok((0..n)
        .map(|j| {
            let x = line.node(j);
            // each summed node stands for an interval of width 2h
            let right_edge = if (n - 1 - j) % 2 == 1 { last + h } else { last };
            let left_edge = if j % 2 == 1 { -first + h } else { -first };
            let tails = tail.right * log_ratio(x, right_edge) + tail.left * log_ratio(-x, left_edge);
            signal[j] * scale + tails / PI
        })
        .collect())
}

/// Boundary values `C+ phi` and `C- phi`.
#[derive(Debug, Clone)]
pub struct Projections {
    pub plus: Vec<Complex64>,
    pub minus: Vec<Complex64>,
}

pub fn project(line: &Line, values: &[Complex64], tail: Tail) -> Result<Projections> {
    let hv = hilbert(line, values, tail)?;
    let plus = values.iter().zip(&hv).map(|(v, h)| 0.5 * v + 0.5 * I * h).collect();
    let minus = values.iter().zip(&hv).map(|(v, h)| -0.5 * v + 0.5 * I * h).collect();
    Ok(Projections { plus, minus })
}

/// Samples of a function known for `|x| <= reach`, continued by its fitted `c/t` tail
/// up to the edge of `line`.
#[derive(Debug, Clone)]
pub struct Extended {
    pub values: Vec<Complex64>,
    pub tail: Tail,
}

/// Keeps `values` on the nodes with `|x| <= reach` and fills the rest with the tail
/// fitted on `[fit_from * reach, reach]`.
pub fn extend_by_tail(line: &Line, values: &[Complex64], reach: f64, fit_from: f64) -> Result<Extended> {
    if values.len() != line.len() {
        return Err(Error::Mismatch(format!("{} values on a line of {} nodes", values.len(), line.len())));
    }
    let nodes = line.nodes();
    let tail = fit_tail(&nodes, values, fit_from * reach, reach);
    let values = nodes
        .iter()
        .zip(values)
        .map(|(&x, &v)| {
            if x > reach {
                tail.right / x
            } else if x < -reach {
                tail.left / x
            } else {
                v
            }
        })
        .collect();
    Ok(Extended { values, tail })
}

/// Lagrange interpolation through the `points` nodes nearest each target.
pub fn lagrange_resample(
    nodes: &[f64],
    values: &[Complex64],
    targets: &[f64],
    points: usize,
) -> Result<Vec<Complex64>> {
    let n = nodes.len();
    if values.len() != n {
        return Err(Error::Mismatch(format!("{n} nodes but {} values", values.len())));
    }
    if points < 2 || points > n {
        return Err(Error::InvalidInput(format!("cannot interpolate with {points} of {n} nodes")));
    }
    Ok(targets
        .iter()
        .map(|&t| {
            let idx = nodes.partition_point(|&x| x < t);
            let start = idx.saturating_sub(points / 2).min(n - points);
            let xs = &nodes[start..start + points];
            let vs = &values[start..start + points];
            if let Some(p) = xs.iter().position(|&x| x == t) {
                return vs[p];
            }
            let mut acc = Complex64::default();
            for (i, (&xi, &vi)) in xs.iter().zip(vs).enumerate() {
                let mut w = 1.0;
                for (j, &xj) in xs.iter().enumerate() {
                    if i != j {
                        w *= (t - xj) / (xi - xj);
                    }
                }
                acc += vi * w;
            }
            acc
        })
        .collect())
}

#[cfg(test)]
mod tests {
    use super::*;

    fn max_err(a: &[Complex64], b: impl Fn(f64) -> Complex64, line: &Line, within: f64) -> f64 {
        a.iter()
            .enumerate()
            .filter(|(i, _)| line.node(*i).abs() <= within)
            .map(|(i, v)| (v - b(line.node(i))).norm())
            .fold(0.0, f64::max)
    }

    #[test]
    fn hilbert_of_lorentzian() {
        let line = Line::covering(0.01, 400.0).unwrap();
        let v: Vec<Complex64> = line.nodes().iter().map(|&t| (1.0 / (1.0 + t * t)).into()).collect();
        let hv = hilbert(&line, &v, Tail::default()).unwrap();
        let e = max_err(&hv, |x| (x / (1.0 + x * x)).into(), &line, 50.0);
        assert!(e < 1e-4, "{e}");
    }

    #[test]
    fn slow_tail_is_corrected() {
        // 1/(t + i) is analytic above, so C+ returns it and C- kills it
        let f = |t: f64| 1.0 / Complex64::new(t, 1.0);
        let line = Line::covering(0.01, 60.0).unwrap();
        let v: Vec<Complex64> = line.nodes().iter().map(|&t| f(t)).collect();
        let ext = extend_by_tail(&line, &v, 60.0, 0.8).unwrap();
        let p = project(&line, &ext.values, ext.tail).unwrap();
        let e_plus = max_err(&p.plus, f, &line, 40.0);
        let e_minus = max_err(&p.minus, |_| Complex64::default(), &line, 40.0);
        assert!(e_plus < 2e-5 && e_minus < 2e-5, "{e_plus} {e_minus}");

        let bare = project(&line, &ext.values, Tail::default()).unwrap();
        assert!(max_err(&bare.minus, |_| Complex64::default(), &line, 40.0) > 10.0 * e_minus);
    }

    #[test]
    fn lagrange_is_exact_on_polynomials() {
        let nodes: Vec<f64> = (-10..=10).filter(|&i| i != 0 && i != 1).map(|i| i as f64 * 0.1).collect();
        let p = |x: f64| Complex64::new(1.0 + x - 2.0 * x.powi(3), x.powi(5));
        let values: Vec<Complex64> = nodes.iter().map(|&x| p(x)).collect();
        let targets = [-0.95, 0.0, 0.05, 0.13, 0.99];
        let out = lagrange_resample(&nodes, &values, &targets, 8).unwrap();
        for (t, v) in targets.iter().zip(out) {
            assert!((v - p(*t)).norm() < 1e-12);
        }
    }
}
