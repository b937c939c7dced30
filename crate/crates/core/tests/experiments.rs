use std::sync::Arc;

use anisoldp::dynamics::{EquationSpec, SolverConfig};
use anisoldp::experiments::{
    coupled_sup_deviation, energy_stats, exp_equivalence_probe, mc_tail, simulate_ensemble, small_time_scaling_check,
    EquationFamily, Event, LdpProbeSpec,
};
use anisoldp::dynamics::Solver;
use anisoldp::noise::NoiseModel;
use anisoldp::rate::ScalarMode;
use anisoldp::{GridSpec, SpectralField};
use statrs::distribution::{ContinuousCDF, Normal};

fn probe(eps: Vec<f64>, n: usize, event: Event) -> LdpProbeSpec {
    LdpProbeSpec { eps_ladder: eps, n_samples: vec![n], event, base_seed: 17 }
}

fn vertical_unit(g: GridSpec, k: i64) -> SpectralField {
    let v = SpectralField::vertical_shear(g, 1.0, k);
    let norm = anisoldp::spectral::sobolev_norm(&v, 0.0, None);
    v.scaled(1.0 / norm)
}

#[test]
fn certain_event_has_zero_rate() {
    let g = GridSpec::square(8);
    let mode = ScalarMode::new(g, 1, 1.0).unwrap();
    let family = EquationFamily::SmallNoise { model: mode.model.clone(), linear: true };
    let cfg = SolverConfig::new(0.05, 0.5);
    let res = mc_tail(&probe(vec![0.2, 0.1], 200, Event::TerminalNormExceeds(0.0)), &mode.field(0.0), &family, &cfg).unwrap();
    for r in &res.rows {
        assert_eq!((r.hits, r.eps_log_p), (200, 0.0));
    }
}

#[test]
fn gaussian_tail_within_three_standard_errors() {
    let g = GridSpec::square(8);
    let (c, eps, dt) = (1.0, 0.1, 0.01);
    let mode = ScalarMode::new(g, 1, c).unwrap();
    let family = EquationFamily::SmallNoise { model: mode.model.clone(), linear: true };
    let cfg = SolverConfig::new(dt, 1.0);
    let r = 0.3;
    let n = 20_000;
    let res = mc_tail(&probe(vec![eps], n, Event::TerminalNormExceeds(r)), &mode.field(0.0), &family, &cfg).unwrap();
    // the scheme's terminal variance: ε c² dt Σ_j e^{−2λ dt j}
    let var: f64 = eps * c * c * dt * (1..=100).map(|j| (-2.0 * mode.lambda * dt * j as f64).exp()).sum::<f64>();
    let p = 2.0 * (1.0 - Normal::standard().cdf(r / var.sqrt()));
    let row = res.rows[0];
    assert!((row.p_hat - p).abs() <= 3.0 * row.stderr, "{} vs {p} ± {}", row.p_hat, row.stderr);
}

#[test]
fn huge_threshold_censors_every_row() {
    let g = GridSpec::square(8);
    let model = Arc::new(NoiseModel::default_additive(g, 4, 1.0).unwrap());
    let cfg = SolverConfig::new(0.1, 1.0);
    let u0 = SpectralField::vertical_shear(g, 1.0, 1);
    let res = exp_equivalence_probe(&u0, model, 1e6, &probe(vec![0.2, 0.1, 0.05], 100, Event::SupPairDeviation(1e6)), &cfg)
        .unwrap();
    for r in &res.rows {
        assert!(r.censored);
        assert!((r.eps_log_p + r.eps * 100f64.ln()).abs() < 1e-15);
    }
}

#[test]
fn noiseless_pair_deviation_is_all_or_nothing() {
    let g = GridSpec::square(8);
    let model = Arc::new(NoiseModel::additive(vec![vertical_unit(g, 1).scaled(0.0)]).unwrap());
    let u0 = SpectralField::unit_mode(g, 1, 1, 0.0);
    let cfg = SolverConfig::new(0.05, 1.0);
    let res = exp_equivalence_probe(&u0, model, 1e-4, &probe(vec![0.5, 0.2], 100, Event::SupPairDeviation(1e-4)), &cfg)
        .unwrap();
    for r in &res.rows {
        assert!(r.hits == 0 || r.hits == r.n, "{r:?}");
    }
}

#[test]
fn coupling_cancels_noise_on_vertical_shears() {
    // vertical shears neither dissipate nor advect, so u_ε − v_ε ≡ 0 under
    // shared noise
    let g = GridSpec::square(16);
    let model = Arc::new(NoiseModel::additive(vec![vertical_unit(g, 1), vertical_unit(g, 2).scaled(0.5)]).unwrap());
    let u0 = SpectralField::vertical_shear(g, 1.0, 1);
    let cfg = SolverConfig::new(0.05, 1.0).with_save_every(usize::MAX);
    let mut us = Solver::new(g, EquationSpec::small_time(model.clone(), 0.1), cfg.clone()).unwrap();
    let mut vs = Solver::new(g, EquationSpec::driftless(model, 0.1), cfg).unwrap();
    let devs: Vec<f64> = (0..50).map(|i| coupled_sup_deviation(&mut us, &mut vs, &u0, (3, 0, i)).unwrap()).collect();
    let mean = devs.iter().sum::<f64>() / devs.len() as f64;
    let var = devs.iter().map(|d| (d - mean).powi(2)).sum::<f64>() / (devs.len() - 1) as f64;
    assert!(var <= 1e-10, "{var}");
}

#[test]
fn energy_tail_matches_reflection_principle() {
    // driftless vertical-shear mode: ‖v‖² = X², X a Brownian motion of
    // variance ε c² t, so P(F > r²) = P(sup|X| > r)
    let g = GridSpec::square(8);
    let (c, eps, dt, t_end) = (1.0, 1.0, 4e-3, 1.0);
    let model = Arc::new(NoiseModel::additive(vec![vertical_unit(g, 1).scaled(c)]).unwrap());
    let cfg = SolverConfig::new(dt, t_end).with_save_every(usize::MAX);
    let n = 5000;
    let ens = simulate_ensemble(&SpectralField::zero(g), EquationSpec::driftless(model, eps), &cfg, n, 5, 0).unwrap();
    let r = 1.5;
    let summary = energy_stats(&ens, eps, &[0.25 * r * r, r * r, 4.0 * r * r], 1e9);
    let s = (eps * c * c * t_end).sqrt();
    // discrete monitoring shifts the barrier by 0.5826 σ √dt
    let b = r + 0.5826 * (eps * c * c * dt).sqrt();
    let stay: f64 = (0..50)
        .map(|k| {
            let m = (2 * k + 1) as f64;
            (if k % 2 == 0 { 1.0 } else { -1.0 }) / m * (-m * m * std::f64::consts::PI.powi(2) * s * s / (8.0 * b * b)).exp()
        })
        .sum::<f64>()
        * 4.0
        / std::f64::consts::PI;
    let p = 1.0 - stay;
    let row = &summary.rows[1];
    let se = (p * (1.0 - p) / n as f64).sqrt();
    assert!((row.p_hat - p).abs() <= 4.0 * se, "{} vs {p}", row.p_hat);
    let ps: Vec<f64> = summary.rows.iter().map(|r| r.p_hat).collect();
    assert!(ps.windows(2).all(|w| w[1] <= w[0]), "{ps:?}");
}

#[test]
fn deterministic_ensemble_gives_point_mass() {
    let g = GridSpec::square(8);
    let u0 = SpectralField::unit_mode(g, 1, 1, 0.0);
    let cfg = SolverConfig::new(0.05, 1.0).with_save_every(usize::MAX);
    let ens = simulate_ensemble(&u0, EquationSpec::deterministic(), &cfg, 20, 0, 0).unwrap();
    let s = energy_stats(&ens, 0.5, &[0.5, 1.0, 2.0], 10.0);
    assert!(s.f_values.windows(2).all(|w| w[0] == w[1]));
    assert!(s.rows.iter().all(|r| r.p_hat == 0.0 || r.p_hat == 1.0));
}

#[test]
fn scaling_check_trivial_cases() {
    let g = GridSpec::square(8);
    let u0 = SpectralField::unit_mode(g, 1, 1, 0.3);
    let cfg = SolverConfig::new(0.05, 1.0);
    let quiet = Arc::new(NoiseModel::additive(vec![vertical_unit(g, 1).scaled(0.0)]).unwrap());
    let s = small_time_scaling_check(&u0, quiet, 0.5, 10, &cfg, 1).unwrap();
    assert_eq!(s.max_abs_z, 0.0);
    let model = Arc::new(NoiseModel::default_additive(g, 4, 1.0).unwrap());
    let s = small_time_scaling_check(&u0, model, 1.0, 2000, &cfg, 1).unwrap();
    assert!(s.max_abs_z < 4.0, "{s:?}");
}
