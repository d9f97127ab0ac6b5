use plasma_web::demo::{diagnose, family, forward_curves, reconstruct};

#[test]
fn unknown_family_is_an_error() {
    assert!(family("staircase", 1.0).is_err());
    assert!(forward_curves("bump", f64::NAN, 20.0, 64).is_err());
}

#[test]
fn forward_curves_are_unitary() {
    let c = forward_curves("bump", 2.0, 20.0, 256).unwrap();
    assert_eq!(c.k.len(), 256);
    assert!(c.unitarity_defect < 1e-8);
    for i in 0..c.k.len() {
        assert!((c.abs_a[i].powi(2) - c.abs_b[i].powi(2) - 1.0).abs() < 1e-8);
        assert!(c.abs_r[i] <= 1.0);
    }
}

#[test]
fn reconstruction_and_refusal() {
    let ok = reconstruct("bump", 2.0, 40.0, 2048).unwrap();
    assert_eq!(ok.status, "ok");
    assert!(ok.l2_rel_error.unwrap() < 5e-2);
    assert_eq!(ok.q_hat.len(), ok.x.len());

    let refused = reconstruct("square_well", -2.0, 40.0, 2048).unwrap();
    assert_eq!(refused.status, "refused");
    assert!(refused.ind_m != 0);
    assert!(refused.message.unwrap().contains("ind_m"));
}

#[test]
fn diagnosis_counts_the_bound_state() {
    let r = diagnose("square_well", -2.0, 40.0, 1024).unwrap();
    assert_eq!(r.j, 1);
    assert_eq!(r.ind_a, 1);
    let json = serde_json::to_string(&r).unwrap();
    assert!(json.contains("\"norming\""));
}
