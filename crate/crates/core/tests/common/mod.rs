//! Closed-form references, written without touching the library's integrators.
#![allow(dead_code)]

use num_complex::Complex64;

pub const I: Complex64 = Complex64::new(0.0, 1.0);

/// Square well `q0` on `[-1, 1]`: the Jost solution from the right, solved by hand.
/// Returns `(f(-1), f'(-1), f(0))`.
fn well_jost(q0: f64, k: Complex64) -> (Complex64, Complex64, Complex64) {
    let p = (k * k - q0).sqrt();
    let sinc = |z: Complex64| if z.norm() < 1e-12 { Complex64::from(1.0) } else { z.sin() / z };
    let e = (I * k).exp();
    // f = e^{ik} [cos p(x-1) + ik sin p(x-1)/p] inside
    let f_m1 = e * ((2.0 * p).cos() - I * k * 2.0 * sinc(2.0 * p));
    let df_m1 = e * (p * (2.0 * p).sin() + I * k * (2.0 * p).cos());
    let f_0 = e * (p.cos() - I * k * sinc(p));
    (f_m1, df_m1, f_0)
}

/// `(a, b)` of the square well: `f = a e^{ikx} + b e^{-ikx}` for `x <= -1`.
pub fn well_ab(q0: f64, k: Complex64) -> (Complex64, Complex64) {
    let (f, df, _) = well_jost(q0, k);
    let a = (I * k).exp() * (f + df / (I * k)) / 2.0;
    let b = (-I * k).exp() * (f - df / (I * k)) / 2.0;
    (a, b)
}

/// `(u(-1,k), u(1,k))` of the square well. The well is even, so `g(0) = f(0)`.
pub fn well_u(q0: f64, k: f64) -> (Complex64, Complex64) {
    let kc = Complex64::from(k);
    let (_, _, f0) = well_jost(q0, kc);
    let (a, _) = well_ab(q0, kc);
    let u = (I * k).exp() * f0 / (-2.0 * I * k * a);
    (u, u)
}

pub fn free_u(k: f64) -> Complex64 {
    I * (I * k).exp() / (2.0 * k)
}

/// Even ground state of the well `q0 < 0`: `(kappa, p)` with `p tan p = kappa`, `p^2 + kappa^2 = -q0`.
pub fn well_ground_state(q0: f64) -> (f64, f64) {
    let depth = -q0;
    let r = depth.sqrt();
    let h = |p: f64| p * p.tan() - (depth - p * p).sqrt();
    let (mut lo, mut hi) = (1e-12, r.min(std::f64::consts::FRAC_PI_2 - 1e-12));
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if h(mid) > 0.0 {
            hi = mid;
        } else {
            lo = mid;
        }
    }
    let p = 0.5 * (lo + hi);
    ((depth - p * p).sqrt(), p)
}

/// `1 / ∫ g(x, i kappa)^2 dx` for the even ground state, with `g = e^{kappa x}` left of the well.
pub fn well_norming(q0: f64) -> f64 {
    let (kappa, p) = well_ground_state(q0);
    let amp = (-kappa).exp() / p.cos();
    let outside = (-2.0 * kappa).exp() / kappa;
    let inside = amp * amp * (1.0 + (2.0 * p).sin() / (2.0 * p));
    1.0 / (outside + inside)
}

/// Adaptive Simpson on `[a, b]`.
pub fn adaptive_simpson(f: &dyn Fn(f64) -> f64, a: f64, b: f64, tol: f64) -> f64 {
    #[allow(clippy::too_many_arguments)]
    fn step(f: &dyn Fn(f64) -> f64, a: f64, b: f64, fa: f64, fm: f64, fb: f64, whole: f64, tol: f64, depth: u32) -> f64 {
        let m = 0.5 * (a + b);
        let (lm, rm) = (0.5 * (a + m), 0.5 * (m + b));
        let (flm, frm) = (f(lm), f(rm));
        let left = (m - a) / 6.0 * (fa + 4.0 * flm + fm);
        let right = (b - m) / 6.0 * (fm + 4.0 * frm + fb);
        let delta = left + right - whole;
        if depth == 0 || delta.abs() <= 15.0 * tol {
            left + right + delta / 15.0
        } else {
            step(f, a, m, fa, flm, fm, left, 0.5 * tol, depth - 1) + step(f, m, b, fm, frm, fb, right, 0.5 * tol, depth - 1)
        }
    }
    let (fa, fb, fm) = (f(a), f(b), f(0.5 * (a + b)));
    let whole = (b - a) / 6.0 * (fa + 4.0 * fm + fb);
    step(f, a, b, fa, fm, fb, whole, tol, 40)
}
