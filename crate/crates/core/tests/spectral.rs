mod common;

use anisoldp::random::{random_scalar, random_solenoidal};
use anisoldp::spectral::{inner, leray_project, mixed_norm, mixed_norm_vh, mollify, sobolev_norm, Fft2, ScalarGridField};
use anisoldp::GridSpec;
use common::{max_diff, textbook_leray};
use proptest::prelude::*;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

fn scalar_field(g: GridSpec, seed: u64) -> ScalarGridField {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let raw = random_scalar(g, &mut rng);
    ScalarGridField::try_new(g, raw.component_values(0, &mut Fft2::new(g.n1, g.n2))).unwrap()
}

#[test]
fn minkowski_ordering_of_mixed_norms() {
    let g = GridSpec::new(16, 12).unwrap();
    for seed in 0..50 {
        let u = scalar_field(g, seed);
        for (q, p) in [(1.0, 2.0), (2.0, 4.0), (1.5, f64::INFINITY), (2.0, 2.0)] {
            let hv = mixed_norm(&u, p, q).unwrap();
            let vh = mixed_norm_vh(&u, q, p).unwrap();
            assert!(hv <= vh * (1.0 + 1e-12), "seed {seed}, q {q}, p {p}: {hv} > {vh}");
        }
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn leray_agrees_with_textbook_projector_and_is_idempotent(seed in any::<u64>()) {
        let g = GridSpec::square(12);
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut w = random_scalar(g, &mut rng);
        // make the second component nonzero as well
        let other = random_scalar(g, &mut rng);
        for (c, o) in w.coeffs_mut().iter_mut().zip(other.coeffs()) {
            c[1] = o[0];
        }
        let p = leray_project(&w).unwrap();
        prop_assert!(max_diff(&p, &textbook_leray(&w)) <= 1e-13 * w.max_amplitude().max(1.0));
        let pp = leray_project(&p).unwrap();
        prop_assert!(max_diff(&p, &pp) <= 1e-14 * p.max_amplitude().max(1.0));
        prop_assert!(p.divergence_defect() <= 1e-12);
    }

    #[test]
    fn mollifier_contracts_and_norms_are_ordered(seed in any::<u64>(), eps in 1e-3f64..2.0) {
        let g = GridSpec::square(16);
        let u = random_solenoidal(g, &mut ChaCha8Rng::seed_from_u64(seed), 1.0);
        let m = mollify(&u, eps).unwrap();
        prop_assert!(sobolev_norm(&m, 0.0, None) <= sobolev_norm(&u, 0.0, None) * (1.0 + 1e-14));
        let h = sobolev_norm(&u, 0.0, None);
        let h1 = sobolev_norm(&u, 1.0, None);
        let h11 = sobolev_norm(&u, 1.0, Some(1.0));
        prop_assert!(h <= h1 && h1 <= h11 * (1.0 + 1e-14));
        prop_assert!((inner(&u, &u) - h * h).abs() <= 1e-12 * h * h);
    }
}
