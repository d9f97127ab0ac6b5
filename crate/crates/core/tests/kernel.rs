use plasma_core::forward::scattering_coefficients;
use plasma_core::marchenko::{kernel_from_reflection, recover_q, solve_kernel, solve_marchenko, MarchenkoOptions};
use plasma_core::pipeline::{run_roundtrip, Settings};
use plasma_core::{ComplexSamples, KGrid, PotentialFamily, Tolerances};

fn default_grid() -> KGrid {
    KGrid::uniform(0.05, 60.0, 4096).unwrap()
}

#[test]
fn weak_bump_rows_match_neumann_series() {
    let grid = default_grid();
    let q = PotentialFamily::Bump { c: 0.1 }.sample(801).unwrap();
    let sc = scattering_coefficients(&q, &grid).unwrap();
    let r = ComplexSamples::on_grid(&grid, sc.reflection()).unwrap().conj_extend().unwrap();
    let opts = MarchenkoOptions::default();
    let ds = opts.spacing(60.0);
    let len = (12.0 / ds).round() as usize;
    let f = kernel_from_reflection(&r, -3.0, ds, len, &opts, &Tolerances::default()).unwrap();
    let max_abs = |v: &[f64]| v.iter().fold(0.0, |m: f64, x| m.max(x.abs()));

    for x in [-1.5, -1.0, -0.7, -0.4, 0.0, 0.3, 1.0] {
        let offset = ((2.0 * x + 3.0) / ds).round() as usize;
        let n = ((2.5 - 2.0 * x).max(0.5) / ds).round() as usize + 1;
        let row = solve_marchenko(&f, x, offset, n).unwrap();
        // terms T^p F with (T v)_j = Σ_l w_l F(y_j + y_l) v_l
        let w = |l: usize| if l == 0 || l == n - 1 { 0.5 * ds } else { ds };
        let t = |v: &[f64]| -> Vec<f64> {
            (0..n).map(|j| (0..n).map(|l| w(l) * f.values[offset + j + l] * v[l]).sum()).collect()
        };
        let mut terms = vec![(0..n).map(|j| f.values[offset + j]).collect::<Vec<f64>>()];
        for _ in 0..40 {
            let next = t(terms.last().unwrap());
            terms.push(next);
        }
        let partial = |m: usize| -> Vec<f64> {
            (0..n)
                .map(|j| row.values[j] - (0..m).map(|p| if p % 2 == 0 { -terms[p][j] } else { terms[p][j] }).sum::<f64>())
                .collect()
        };
        let (gap3, converged) = (max_abs(&partial(3)), max_abs(&partial(terms.len())));
        let fourth = max_abs(&terms[3]);
        // the three-term gap is the first neglected term, so 1e-6 holds where that term allows it
        assert!((gap3 - fourth).abs() <= 0.1 * fourth + 1e-12, "x = {x}: {gap3:e} vs {fourth:e}");
        if fourth < 5e-7 {
            assert!(gap3 < 1e-6, "x = {x}: {gap3:e}");
        }
        assert!(converged < 1e-12, "x = {x}: {converged:e}");
    }
}

#[test]
fn zero_reflection_gives_zero_kernel_and_potential() {
    let grid = KGrid::uniform(0.05, 20.0, 512).unwrap();
    let r = ComplexSamples::on_grid(&grid, vec![Default::default(); grid.len()]).unwrap().conj_extend().unwrap();
    let kernel = solve_kernel(&r, &MarchenkoOptions::default(), &Tolerances::default()).unwrap();
    assert!(kernel.f.values.iter().all(|v| *v == 0.0));
    assert!(kernel.rows.iter().all(|row| row.values.iter().all(|v| *v == 0.0)));
    let rec = recover_q(&kernel, 201).unwrap();
    assert!(rec.potential.max_abs() == 0.0);
}

#[test]
fn bump_kernel_is_real_decays_and_stays_inside() {
    let q = PotentialFamily::Bump { c: 2.0 }.sample(801).unwrap();
    let rt = run_roundtrip(&q, &default_grid(), &Settings::default()).unwrap();
    let f = &rt.inversion.kernel.f;
    assert!(f.max_imag < 1e-9, "{:e}", f.max_imag);
    let tail = (0..f.values.len()).filter(|&m| f.s(m) >= 2.5).map(|m| f.values[m].abs()).fold(0.0, f64::max);
    assert!(tail < 1e-6, "F tail {tail:e}");
    assert!(rt.inversion.report.truncation_tail < 1e-6);
    assert!(rt.inversion.reconstruction.leakage <= 1e-2, "{}", rt.inversion.reconstruction.leakage);
}
