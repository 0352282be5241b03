use ldrate::{
    builtin_model, run_convergence_study, Error, MinimizeOptions, ReferenceKind,
};

fn grid() -> Vec<Vec<f64>> {
    [-2.0, -1.0, 0.5, 1.0, 2.0].iter().map(|&x| vec![x]).collect()
}

const H: [f64; 5] = [1.0 / 8.0, 1.0 / 16.0, 1.0 / 32.0, 1.0 / 64.0, 1.0 / 128.0];

#[test]
fn brownian_study_is_exact() {
    let entry = builtin_model("brownian").unwrap();
    let r = run_convergence_study(
        &entry, 0.5, &[0.0], 1.0, &grid(), &H, ReferenceKind::ClosedForm, &MinimizeOptions::default(),
    )
    .unwrap();
    assert!(r.errors.iter().all(|&e| e <= 1e-10));
    assert!(r.fitted_order.is_none());
}

#[test]
fn additive_study_has_first_order() {
    let entry = builtin_model("ou-additive(-1)").unwrap();
    let r = run_convergence_study(
        &entry, 0.0, &[0.0], 1.0, &grid(), &H, ReferenceKind::ClosedForm, &MinimizeOptions::default(),
    )
    .unwrap();
    let p = r.fitted_order.unwrap();
    assert!((0.9..=1.1).contains(&p), "{p}: {:?}", r.errors);
    let e = &r.errors;
    for k in [3, 4] {
        let ratio = e[k] / e[k - 1];
        assert!((0.4..=0.6).contains(&ratio), "{ratio}");
    }
    assert!(e.iter().all(|v| v.is_finite() && *v > 0.0));
    assert_eq!(r.empirical_constants().unwrap().len(), 5);
}

#[test]
fn fine_reference_is_stable() {
    let entry = builtin_model("mult-sine").unwrap();
    let h = &H[..3];
    let study = |h_ref| {
        run_convergence_study(
            &entry, 0.5, &[0.0], 1.0, &grid(), h, ReferenceKind::FineGrid { h_ref },
            &MinimizeOptions::default(),
        )
        .unwrap()
    };
    let a = study(1.0 / 256.0);
    let b = study(1.0 / 512.0);
    assert!((a.errors[0] - b.errors[0]).abs() < 0.1 * b.errors[0]);
}

#[test]
fn preconditions_are_checked() {
    let entry = builtin_model("ou-additive(-1)").unwrap();
    let o = MinimizeOptions::default();
    let g = grid();
    let run = |h: &[f64], r| run_convergence_study(&entry, 0.0, &[0.0], 1.0, &g, h, r, &o);
    assert!(matches!(run(&[1.0, 0.5], ReferenceKind::ClosedForm), Err(Error::StepRestriction { .. })));
    assert!(matches!(run(&[0.25, 0.5], ReferenceKind::ClosedForm), Err(Error::Config(_))));
    assert!(matches!(run(&[0.5, 0.3], ReferenceKind::ClosedForm), Err(Error::Config(_))));
    assert!(matches!(
        run(&[0.5, 0.25], ReferenceKind::FineGrid { h_ref: 1.0 / 16.0 }),
        Err(Error::Config(_))
    ));
    let ms = builtin_model("mult-sine").unwrap();
    assert!(run_convergence_study(&ms, 0.0, &[0.0], 1.0, &g, &[0.25], ReferenceKind::ClosedForm, &o).is_err());
}

#[test]
fn empty_grid_gives_empty_rows() {
    let entry = builtin_model("ou-additive(-1)").unwrap();
    let r = run_convergence_study(
        &entry, 0.0, &[0.0], 1.0, &[], &H[..2], ReferenceKind::ClosedForm, &MinimizeOptions::default(),
    )
    .unwrap();
    assert_eq!(r.errors, vec![0.0, 0.0]);
    assert!(r.values.iter().all(Vec::is_empty));
}
