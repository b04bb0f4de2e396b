use approx::assert_relative_eq;
use eyecod::optics::{
    generate_mask, objective_value, recon_as_layers, reconstruct, simulate_capture, MaskFamily, MaskKind, MaskPair,
    ReconSettings, SceneImage,
};
use eyecod::oracle::{finite_diff_grad, tikhonov_bruteforce};
use nalgebra::DMatrix;
use proptest::prelude::*;

fn matrix(r: usize, c: usize) -> impl Strategy<Value = DMatrix<f64>> {
    prop::collection::vec(-1.0f64..1.0, r * c).prop_map(move |v| DMatrix::from_vec(r, c, v))
}

fn problem() -> impl Strategy<Value = (MaskPair, DMatrix<f64>, f64)> {
    (1usize..=6, 1usize..=6, 0usize..=3, 0usize..=3)
        .prop_flat_map(|(n1, n2, d1, d2)| {
            let (m1, m2) = (n1 + d1, n2 + d2);
            (matrix(m1, n1), matrix(m2, n2), matrix(m1, m2), -3.0f64..0.0)
        })
        .prop_map(|(l, r, y, e)| (MaskPair::new(l, r, MaskKind::Real).unwrap(), y, 10f64.powf(e)))
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn closed_form_matches_kronecker_solve((masks, y, eps) in problem()) {
        let fast = reconstruct(&y, &masks, ReconSettings::new(eps).unwrap()).unwrap().values;
        let slow = tikhonov_bruteforce(&y, &masks, eps).unwrap();
        prop_assert!((&fast - &slow).abs().max() <= 1e-8);
    }

    #[test]
    fn minimizer_has_zero_gradient((masks, y, eps) in problem()) {
        let x = reconstruct(&y, &masks, ReconSettings::new(eps).unwrap()).unwrap().values;
        let f = |v: &DMatrix<f64>| objective_value(v, &y, &masks, eps).unwrap();
        let g = finite_diff_grad(f, &x, 1e-6).unwrap().abs().max();
        let g0 = finite_diff_grad(f, &DMatrix::zeros(x.nrows(), x.ncols()), 1e-6).unwrap().abs().max();
        prop_assert!(g <= 1e-4 * g0.max(1e-12));
    }

    #[test]
    fn layer_form_equals_closed_form((masks, y, eps) in problem()) {
        let s = ReconSettings::new(eps).unwrap();
        let a = reconstruct(&y, &masks, s).unwrap().values;
        let b = recon_as_layers(&masks, s).unwrap().execute(&y);
        prop_assert!((&a - &b).abs().max() <= 1e-9);
    }
}

#[test]
fn coded_mask_capture_recovers_scene() {
    let (masks, _) = generate_mask(MaskFamily::Mls, 63, 32, 0).unwrap();
    let scene = SceneImage::new(DMatrix::from_fn(32, 32, |r, c| ((r * 3 + c * 5) % 17) as f64 / 16.0)).unwrap();
    let y = simulate_capture(&scene, &masks, 0.0, 0).unwrap();
    let back = reconstruct(&y.channels[0], &masks, ReconSettings::new(1e-9).unwrap()).unwrap();
    assert_relative_eq!(back.values, scene.values, epsilon = 1e-5);
}
