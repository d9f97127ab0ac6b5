//! Grids, sampled potentials and complex spectral samples shared by every stage.
//!
//! The potential is always supported on `[-1, 1]`; callers with a wider support
//! rescale before constructing a [`Potential`].

use std::collections::BTreeMap;
use std::fmt::Write as _;

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub const X_MIN: f64 = -1.0;
pub const X_MAX: f64 = 1.0;

/// Default lower bound for the smallest wavenumber of a [`KGrid`].
pub const DEFAULT_K_MIN_FLOOR: f64 = 0.05;

/// Real potential sampled on a uniform grid over `[-1, 1]`, zero outside.
///
/// Between nodes the potential is the piecewise-linear interpolant of the samples.
#[derive(Debug, Clone, PartialEq)]
pub struct Potential {
    samples: Vec<f64>,
}

impl Potential {
    pub fn new(samples: Vec<f64>) -> Result<Self> {
        if samples.len() < 3 {
            return Err(Error::InvalidInput(format!(
                "potential needs at least 3 samples, got {}",
                samples.len()
            )));
        }
        if let Some(i) = samples.iter().position(|v| !v.is_finite()) {
            return Err(Error::InvalidInput(format!("potential sample {i} is not finite")));
        }
        Ok(Self { samples })
    }

    pub fn from_fn(n_x: usize, f: impl Fn(f64) -> f64) -> Result<Self> {
        if n_x < 3 {
            return Err(Error::InvalidInput(format!("n_x must be >= 3, got {n_x}")));
        }
        Self::new((0..n_x).map(|i| f(node_at(i, n_x))).collect())
    }

    pub fn zero(n_x: usize) -> Result<Self> {
        Self::from_fn(n_x, |_| 0.0)
    }

    pub fn samples(&self) -> &[f64] {
        &self.samples
    }

    pub fn n_x(&self) -> usize {
        self.samples.len()
    }

    pub fn spacing(&self) -> f64 {
        (X_MAX - X_MIN) / (self.samples.len() - 1) as f64
    }

    pub fn node(&self, i: usize) -> f64 {
        node_at(i, self.n_x())
    }

    pub fn nodes(&self) -> Vec<f64> {
        (0..self.n_x()).map(|i| self.node(i)).collect()
    }

    /// Piecewise-linear value at `x`; zero for `|x| > 1`.
    pub fn eval(&self, x: f64) -> f64 {
        if !(X_MIN..=X_MAX).contains(&x) {
            return 0.0;
        }
        let h = self.spacing();
        let t = (x - X_MIN) / h;
        let i = (t.floor() as usize).min(self.n_x() - 2);
        let frac = t - i as f64;
        self.samples[i] * (1.0 - frac) + self.samples[i + 1] * frac
    }

    /// `q(-x)` on the same grid.
    pub fn mirrored(&self) -> Self {
        let mut samples = self.samples.clone();
        samples.reverse();
        Self { samples }
    }

    pub fn is_even(&self) -> bool {
        let n = self.n_x();
        (0..n / 2).all(|i| self.samples[i] == self.samples[n - 1 - i])
    }

    pub fn is_zero(&self) -> bool {
        self.samples.iter().all(|&v| v == 0.0)
    }

    /// Trapezoid integral over the support.
    pub fn integral(&self) -> f64 {
        trapezoid(&self.samples, self.spacing())
    }

    /// Trapezoid L2 norm over `[-1, 1]`.
    pub fn l2_norm(&self) -> f64 {
        let sq: Vec<f64> = self.samples.iter().map(|v| v * v).collect();
        trapezoid(&sq, self.spacing()).sqrt()
    }

    pub fn max_abs(&self) -> f64 {
        self.samples.iter().fold(0.0, |m, v| m.max(v.abs()))
    }

    /// Relative L2 error of `self` against `truth` on the nodes of `truth`.
    pub fn relative_l2_error(&self, truth: &Potential) -> f64 {
        let diff: Vec<f64> = truth
            .nodes()
            .iter()
            .zip(truth.samples())
            .map(|(&x, &t)| (self.eval(x) - t).powi(2))
            .collect();
        let err = trapezoid(&diff, truth.spacing()).sqrt();
        let norm = truth.l2_norm();
        if norm == 0.0 {
            err
        } else {
            err / norm
        }
    }

    pub fn to_csv(&self) -> String {
        let mut out = String::from("x,q\n");
        for (x, q) in self.nodes().iter().zip(&self.samples) {
            let _ = writeln!(out, "{},{}", fmt_f64(*x), fmt_f64(*q));
        }
        out
    }

    /// Parses the `x,q` format. Nodes must form the uniform grid over `[-1, 1]`.
    pub fn from_csv(text: &str) -> Result<Self> {
        let rows = parse_rows(text, &["x", "q"])?;
        let n = rows.len();
        if n < 3 {
            return Err(Error::Parse(format!("potential CSV needs >= 3 rows, got {n}")));
        }
        for (i, row) in rows.iter().enumerate() {
            let expected = node_at(i, n);
            if (row[0] - expected).abs() > 1e-9 {
                return Err(Error::Parse(format!(
                    "row {i}: x = {} is not the uniform node {expected} on [-1, 1]",
                    row[0]
                )));
            }
        }
        Self::new(rows.into_iter().map(|r| r[1]).collect())
    }
}

/// Exact at the ends and the midpoint; mirror nodes are exact negatives.
fn node_at(i: usize, n: usize) -> f64 {
    (2.0 * i as f64 - (n - 1) as f64) / (n - 1) as f64
}

pub(crate) fn trapezoid(values: &[f64], h: f64) -> f64 {
    match values.len() {
        0 | 1 => 0.0,
        n => h * (values[1..n - 1].iter().sum::<f64>() + 0.5 * (values[0] + values[n - 1])),
    }
}

/// Named test-potential families.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "family", rename_all = "snake_case")]
pub enum PotentialFamily {
    Zero,
    /// `q0` on `[-1, 1]`.
    SquareWell { q0: f64 },
    /// `c (1 - x^2)^2` on `[-1, 1]`.
    Bump { c: f64 },
}

impl PotentialFamily {
    pub fn from_name(name: &str, params: &BTreeMap<String, f64>) -> Result<Self> {
        let get = |key: &str| {
            params
                .get(key)
                .copied()
                .ok_or_else(|| Error::InvalidInput(format!("family `{name}` needs parameter `{key}`")))
        };
        let family = match name {
            "zero" => Self::Zero,
            "square_well" => Self::SquareWell { q0: get("q0")? },
            "bump" => Self::Bump { c: get("c")? },
            other => return Err(Error::UnknownFamily(other.to_string())),
        };
        family.check()?;
        Ok(family)
    }

    fn check(&self) -> Result<()> {
        let ok = match *self {
            Self::Zero => true,
            Self::SquareWell { q0 } => q0.is_finite(),
            Self::Bump { c } => c.is_finite(),
        };
        if ok {
            Ok(())
        } else {
            Err(Error::InvalidInput(format!("non-finite parameter in {self:?}")))
        }
    }

    pub fn value(&self, x: f64) -> f64 {
        if !(X_MIN..=X_MAX).contains(&x) {
            return 0.0;
        }
        match *self {
            Self::Zero => 0.0,
            Self::SquareWell { q0 } => q0,
            Self::Bump { c } => c * (1.0 - x * x).powi(2),
        }
    }

    pub fn sample(&self, n_x: usize) -> Result<Potential> {
        self.check()?;
        Potential::from_fn(n_x, |x| self.value(x))
    }
}

pub fn sample_potential(family: PotentialFamily, n_x: usize) -> Result<Potential> {
    family.sample(n_x)
}

/// Strictly increasing positive wavenumbers.
#[derive(Debug, Clone, PartialEq)]
pub struct KGrid {
    k: Vec<f64>,
}

impl KGrid {
    /// Uniform grid with endpoints exactly `k_min` and `k_max`.
    pub fn uniform(k_min: f64, k_max: f64, n_k: usize) -> Result<Self> {
        if !(k_min.is_finite() && k_max.is_finite()) {
            return Err(Error::InvalidInput("k-grid bounds must be finite".into()));
        }
        if k_min <= 0.0 {
            return Err(Error::InvalidInput(format!(
                "k_min = {k_min} must be positive (k = 0 is a pole of the Green's function)"
            )));
        }
        if k_min >= k_max {
            return Err(Error::InvalidInput(format!("k_min = {k_min} must be < k_max = {k_max}")));
        }
        if n_k < 2 {
            return Err(Error::InvalidInput(format!("n_k must be >= 2, got {n_k}")));
        }
        let dk = (k_max - k_min) / (n_k - 1) as f64;
        let k = (0..n_k)
            .map(|i| if i + 1 == n_k { k_max } else { k_min + i as f64 * dk })
            .collect();
        Ok(Self { k })
    }

    pub fn from_values(k: Vec<f64>) -> Result<Self> {
        if k.len() < 2 {
            return Err(Error::InvalidInput("k-grid needs at least 2 nodes".into()));
        }
        if k.iter().any(|v| !v.is_finite()) || k[0] <= 0.0 {
            return Err(Error::InvalidInput("k-grid nodes must be finite and positive".into()));
        }
        if k.windows(2).any(|w| w[1] <= w[0]) {
            return Err(Error::InvalidInput("k-grid must be strictly increasing".into()));
        }
        Ok(Self { k })
    }

    pub fn check_floor(&self, floor: f64) -> Result<()> {
        if self.k[0] < floor {
            return Err(Error::InvalidInput(format!(
                "k_min = {} is below the configured floor {floor}",
                self.k[0]
            )));
        }
        Ok(())
    }

    pub fn values(&self) -> &[f64] {
        &self.k
    }

    pub fn len(&self) -> usize {
        self.k.len()
    }

    pub fn is_empty(&self) -> bool {
        self.k.is_empty()
    }

    pub fn k_min(&self) -> f64 {
        self.k[0]
    }

    pub fn k_max(&self) -> f64 {
        self.k[self.k.len() - 1]
    }

    /// Mean spacing; equals the node spacing for uniform grids.
    pub fn spacing(&self) -> f64 {
        (self.k_max() - self.k_min()) / (self.len() - 1) as f64
    }

    /// `-k_max .. -k_min, k_min .. k_max`.
    pub fn symmetric_nodes(&self) -> Vec<f64> {
        self.k.iter().rev().map(|k| -k).chain(self.k.iter().copied()).collect()
    }
}

/// Complex samples of a function over a strictly increasing set of real nodes.
#[derive(Debug, Clone, PartialEq)]
pub struct ComplexSamples {
    nodes: Vec<f64>,
    values: Vec<Complex64>,
}

impl ComplexSamples {
    pub fn new(nodes: Vec<f64>, values: Vec<Complex64>) -> Result<Self> {
        if nodes.len() != values.len() {
            return Err(Error::Mismatch(format!(
                "{} nodes but {} values",
                nodes.len(),
                values.len()
            )));
        }
        if nodes.iter().any(|v| !v.is_finite()) || nodes.windows(2).any(|w| w[1] <= w[0]) {
            return Err(Error::InvalidInput("sample nodes must be finite and strictly increasing".into()));
        }
        if let Some(i) = values.iter().position(|v| !(v.re.is_finite() && v.im.is_finite())) {
            return Err(Error::InvalidInput(format!("sample {i} at k = {} is not finite", nodes[i])));
        }
        Ok(Self { nodes, values })
    }

    pub fn on_grid(grid: &KGrid, values: Vec<Complex64>) -> Result<Self> {
        Self::new(grid.values().to_vec(), values)
    }

    pub fn constant(nodes: Vec<f64>, value: Complex64) -> Result<Self> {
        let values = vec![value; nodes.len()];
        Self::new(nodes, values)
    }

    pub fn nodes(&self) -> &[f64] {
        &self.nodes
    }

    pub fn values(&self) -> &[Complex64] {
        &self.values
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    /// True when nodes are mirror images `-k_max .. -k_min, k_min .. k_max` without a node at 0.
    pub fn is_symmetric_grid(&self) -> bool {
        let n = self.len();
        n.is_multiple_of(2)
            && n > 0
            && self.nodes[n / 2] > 0.0
            && (0..n / 2).all(|i| self.nodes[i] == -self.nodes[n - 1 - i])
    }

    pub fn require_symmetric(&self, what: &str) -> Result<()> {
        if self.is_symmetric_grid() {
            Ok(())
        } else {
            Err(Error::Mismatch(format!("{what} must live on a symmetric grid")))
        }
    }

    /// Extends samples on a positive grid to the symmetric grid using `v(-k) = conj(v(k))`.
    pub fn conj_extend(&self) -> Result<Self> {
        if self.nodes.first().is_none_or(|&k| k <= 0.0) {
            return Err(Error::InvalidInput("conj_extend expects positive nodes".into()));
        }
        let nodes = self.nodes.iter().rev().map(|k| -k).chain(self.nodes.iter().copied()).collect();
        let values = self
            .values
            .iter()
            .rev()
            .map(|v| v.conj())
            .chain(self.values.iter().copied())
            .collect();
        Self::new(nodes, values)
    }

    /// The `k > 0` half of a symmetric-grid sample set.
    pub fn positive_half(&self) -> Self {
        let start = self.nodes.iter().position(|&k| k > 0.0).unwrap_or(self.len());
        Self {
            nodes: self.nodes[start..].to_vec(),
            values: self.values[start..].to_vec(),
        }
    }

    /// Max over mirrored pairs of `|v(-k) - conj(v(k))|`.
    pub fn conj_symmetry_defect(&self) -> f64 {
        let n = self.len();
        (0..n / 2)
            .map(|i| (self.values[i] - self.values[n - 1 - i].conj()).norm())
            .fold(0.0, f64::max)
    }

    pub fn map(&self, f: impl Fn(f64, Complex64) -> Complex64) -> Result<Self> {
        let values = self.nodes.iter().zip(&self.values).map(|(&k, &v)| f(k, v)).collect();
        Self::new(self.nodes.clone(), values)
    }

    pub fn zip_with(&self, other: &Self, f: impl Fn(Complex64, Complex64) -> Complex64) -> Result<Self> {
        if self.nodes != other.nodes {
            return Err(Error::Mismatch("sample sets live on different grids".into()));
        }
        let values = self.values.iter().zip(&other.values).map(|(&a, &b)| f(a, b)).collect();
        Self::new(self.nodes.clone(), values)
    }

    /// Value at the mirrored node `-k` for every node, i.e. `v(-k_i)`.
    pub fn reversed_values(&self) -> Vec<Complex64> {
        self.values.iter().rev().copied().collect()
    }

    /// Max `|a - b|` over nodes whose `|k|` lies in `[lo, hi]`.
    pub fn max_diff_in(&self, other: &Self, lo: f64, hi: f64) -> f64 {
        self.nodes
            .iter()
            .zip(self.values.iter().zip(&other.values))
            .filter(|(k, _)| (lo..=hi).contains(&k.abs()))
            .map(|(_, (a, b))| (a - b).norm())
            .fold(0.0, f64::max)
    }

    pub fn to_csv(&self) -> String {
        let mut out = String::from("k,re,im\n");
        for (k, v) in self.nodes.iter().zip(&self.values) {
            let _ = writeln!(out, "{},{},{}", fmt_f64(*k), fmt_f64(v.re), fmt_f64(v.im));
        }
        out
    }

    pub fn from_csv(text: &str) -> Result<Self> {
        let rows = parse_rows(text, &["k", "re", "im"])?;
        let nodes = rows.iter().map(|r| r[0]).collect();
        let values = rows.iter().map(|r| Complex64::new(r[1], r[2])).collect();
        Self::new(nodes, values)
    }
}

/// The data set `{u(-1, k), u(1, k)}` on a positive k-grid.
#[derive(Debug, Clone, PartialEq)]
pub struct BoundaryData {
    pub grid: KGrid,
    pub u_minus: Vec<Complex64>,
    pub u_plus: Vec<Complex64>,
}

impl BoundaryData {
    pub fn new(grid: KGrid, u_minus: Vec<Complex64>, u_plus: Vec<Complex64>) -> Result<Self> {
        if u_minus.len() != grid.len() || u_plus.len() != grid.len() {
            return Err(Error::Mismatch("boundary data length differs from the k-grid".into()));
        }
        let finite = |v: &Complex64| v.re.is_finite() && v.im.is_finite();
        if !u_minus.iter().all(finite) || !u_plus.iter().all(finite) {
            return Err(Error::InvalidInput("boundary data contain non-finite values".into()));
        }
        Ok(Self { grid, u_minus, u_plus })
    }

    pub fn to_csv(&self) -> String {
        let mut out = String::from("k,re_um,im_um,re_up,im_up\n");
        for ((k, um), up) in self.grid.values().iter().zip(&self.u_minus).zip(&self.u_plus) {
            let _ = writeln!(
                out,
                "{},{},{},{},{}",
                fmt_f64(*k),
                fmt_f64(um.re),
                fmt_f64(um.im),
                fmt_f64(up.re),
                fmt_f64(up.im)
            );
        }
        out
    }

    pub fn from_csv(text: &str) -> Result<Self> {
        let rows = parse_rows(text, &["k", "re_um", "im_um", "re_up", "im_up"])?;
        let grid = KGrid::from_values(rows.iter().map(|r| r[0]).collect())?;
        let u_minus = rows.iter().map(|r| Complex64::new(r[1], r[2])).collect();
        let u_plus = rows.iter().map(|r| Complex64::new(r[3], r[4])).collect();
        Self::new(grid, u_minus, u_plus)
    }
}

/// 17 significant digits.
pub(crate) fn fmt_f64(v: f64) -> String {
    format!("{v:.16e}")
}

fn parse_rows(text: &str, header: &[&str]) -> Result<Vec<Vec<f64>>> {
    let mut lines = text.lines().filter(|l| !l.trim().is_empty());
    let head = lines.next().ok_or_else(|| Error::Parse("empty CSV".into()))?;
    let cols: Vec<&str> = head.split(',').map(str::trim).collect();
    if cols != header {
        return Err(Error::Parse(format!("expected header `{}`, got `{head}`", header.join(","))));
    }
    lines
        .enumerate()
        .map(|(i, line)| {
            let fields: Vec<&str> = line.split(',').map(str::trim).collect();
            if fields.len() != header.len() {
                return Err(Error::Parse(format!("row {i}: expected {} fields", header.len())));
            }
            fields
                .iter()
                .map(|f| f.parse::<f64>().map_err(|e| Error::Parse(format!("row {i}: `{f}`: {e}"))))
                .collect()
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn kgrid_default_shape() {
        let g = KGrid::uniform(0.05, 60.0, 4096).unwrap();
        assert_eq!(g.len(), 4096);
        assert_eq!(g.k_min(), 0.05);
        assert_eq!(g.k_max(), 60.0);
        let dk = (60.0 - 0.05) / 4095.0;
        for w in g.values().windows(2) {
            assert!(((w[1] - w[0]) - dk).abs() < 1e-12);
        }
    }

    #[test]
    fn kgrid_rejects_bad_bounds() {
        assert!(KGrid::uniform(1.0, 1.0, 2).is_err());
        assert!(KGrid::uniform(-1.0, 10.0, 100).is_err());
        assert!(KGrid::uniform(0.0, 10.0, 100).is_err());
        assert!(KGrid::uniform(0.1, 10.0, 1).is_err());
        let g = KGrid::uniform(0.01, 1.0, 10).unwrap();
        assert!(g.check_floor(DEFAULT_K_MIN_FLOOR).is_err());
    }

    #[test]
    fn families_at_nodes() {
        let z = sample_potential(PotentialFamily::Zero, 101).unwrap();
        assert!(z.samples().iter().all(|&v| v == 0.0));
        let w = sample_potential(PotentialFamily::SquareWell { q0: 1.0 }, 101).unwrap();
        assert!(w.samples().iter().all(|&v| v == 1.0));
        let b = sample_potential(PotentialFamily::Bump { c: 2.0 }, 101).unwrap();
        assert_eq!(b.samples()[50], 2.0);
        assert_eq!(b.samples()[0], 0.0);
        assert_eq!(b.samples()[100], 0.0);
        assert!(b.is_even());
    }

    #[test]
    fn unknown_family_is_an_error() {
        let err = PotentialFamily::from_name("gaussian", &BTreeMap::new()).unwrap_err();
        assert!(matches!(err, Error::UnknownFamily(_)));
        let mut p = BTreeMap::new();
        p.insert("q0".to_string(), 1.0);
        assert_eq!(
            PotentialFamily::from_name("square_well", &p).unwrap(),
            PotentialFamily::SquareWell { q0: 1.0 }
        );
    }

    #[test]
    fn potential_rejects_short_or_nonfinite() {
        assert!(Potential::new(vec![0.0, 1.0]).is_err());
        assert!(Potential::new(vec![0.0, f64::NAN, 1.0]).is_err());
    }

    #[test]
    fn eval_interpolates_and_vanishes_outside() {
        let p = Potential::new(vec![0.0, 2.0, 0.0]).unwrap();
        assert_eq!(p.eval(0.0), 2.0);
        assert_eq!(p.eval(-0.5), 1.0);
        assert_eq!(p.eval(1.5), 0.0);
        assert_eq!(p.eval(-1.0), 0.0);
    }

    #[test]
    fn potential_csv_round_trip_is_exact() {
        let p = Potential::from_fn(37, |x| (3.0 * x).sin() / 7.0 + 1e-300).unwrap();
        let back = Potential::from_csv(&p.to_csv()).unwrap();
        assert_eq!(p, back);
    }

    #[test]
    fn potential_csv_rejects_wrong_nodes() {
        let text = "x,q\n-1,0\n0.5,1\n1,0\n";
        assert!(Potential::from_csv(text).is_err());
        assert!(Potential::from_csv("k,q\n-1,0\n0,1\n1,0\n").is_err());
    }

    #[test]
    fn conj_extension_is_exact() {
        let g = KGrid::uniform(0.5, 2.0, 4).unwrap();
        let s = ComplexSamples::on_grid(&g, g.values().iter().map(|&k| Complex64::new(0.0, k).exp()).collect())
            .unwrap();
        let full = s.conj_extend().unwrap();
        assert!(full.is_symmetric_grid());
        assert_eq!(full.conj_symmetry_defect(), 0.0);
        assert_eq!(full.values()[0], Complex64::new(0.0, -2.0).exp());
        assert_eq!(full.positive_half(), s);
    }

    #[test]
    fn boundary_csv_round_trip() {
        let g = KGrid::uniform(0.1, 1.0, 5).unwrap();
        let um: Vec<_> = (0..5).map(|i| Complex64::new(i as f64 / 3.0, -1.0 / 7.0)).collect();
        let up: Vec<_> = (0..5).map(|i| Complex64::new(1e-20, i as f64 * 0.1)).collect();
        let d = BoundaryData::new(g, um, up).unwrap();
        assert_eq!(BoundaryData::from_csv(&d.to_csv()).unwrap(), d);
    }
}
