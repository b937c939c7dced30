use anisoldp::dynamics::{exit_time, solve, solve_skeleton, EquationSpec, ExitMode, SolverConfig};
use anisoldp::random::random_solenoidal_with;
use anisoldp::rate::{Control, ScalarMode};
use anisoldp::seed::sample_rng;
use anisoldp::spectral::sobolev_norm;
use anisoldp::{GridSpec, SpectralField};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

#[test]
fn energy_defect_is_first_order_in_dt() {
    let g = GridSpec::square(32);
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    let u0 = random_solenoidal_with(g, &mut rng, 0.5, |k1, k2| (-((k1 * k1 + k2 * k2) as f64) / 4.0).exp());
    let defects: Vec<f64> = [2e-3, 1e-3, 5e-4]
        .iter()
        .map(|&dt| {
            let cfg = SolverConfig::new(dt, 1.0);
            solve(&u0, EquationSpec::deterministic(), &cfg, &mut rng).unwrap().energy_defect(1.0, 0.0)
        })
        .collect();
    assert!(defects[0] < 1e-3);
    for w in defects.windows(2) {
        let ratio = w[0] / w[1];
        assert!((1.6..=2.4).contains(&ratio), "{defects:?}");
    }
}

#[test]
fn driftless_equation_is_gaussian_with_known_variance() {
    // one additive template of size c: ⟨v(T), e⟩ ~ N(z₀, ε c² T)
    let g = GridSpec::square(8);
    let (c, eps, z0) = (1.5, 0.3, 0.7);
    let mode = ScalarMode::new(g, 1, c).unwrap();
    let spec = EquationSpec::driftless(mode.model.clone(), eps);
    let cfg = SolverConfig::new(0.05, 1.0).with_save_every(usize::MAX);
    let n = 4000;
    let xs: Vec<f64> = (0..n)
        .map(|i| {
            let traj = solve(&mode.field(z0), spec.clone(), &cfg, &mut sample_rng(3, 0, i)).unwrap();
            mode.coordinate(traj.final_state())
        })
        .collect();
    let mean = xs.iter().sum::<f64>() / n as f64;
    let var = xs.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (n - 1) as f64;
    let want = eps * c * c;
    assert!((mean - z0).abs() < 4.0 * (want / n as f64).sqrt(), "mean {mean}");
    // standard error of a Gaussian sample variance is σ²√(2/(n−1))
    assert!((var - want).abs() < 4.0 * want * (2.0 / (n - 1) as f64).sqrt(), "var {var} vs {want}");
}

#[test]
fn skeleton_matches_scalar_ode() {
    // horizontal shear carries no advection, so z' = −λz + cφ(t) exactly
    let g = GridSpec::square(16);
    let (k1, c, z0) = (2, 0.8, 0.3);
    let mode = ScalarMode::new(g, k1, c).unwrap();
    let dt_c = 0.1;
    let phis = [1.0, -0.5, 2.0, 0.0, 0.3, -1.2, 0.7, 0.7, 1.1, -0.4];
    let control = Control::new(dt_c, phis.iter().map(|&p| vec![p]).collect()).unwrap();
    let cfg = SolverConfig::new(1e-4, 1.0).with_save_every(100);
    let traj = solve_skeleton(&mode.field(z0), mode.model.clone(), control, &cfg).unwrap();
    let lambda = mode.lambda;
    let oracle = |t: f64| {
        let mut z = z0;
        let mut s = 0.0;
        for &p in &phis {
            let h = (t - s).min(dt_c);
            if h <= 0.0 {
                break;
            }
            let e = (-lambda * h).exp();
            z = z * e + c * p * (1.0 - e) / lambda;
            s += dt_c;
        }
        z
    };
    for (t, u) in traj.times.iter().zip(&traj.states) {
        let z = mode.coordinate(u);
        assert!((z - oracle(*t)).abs() <= 1e-6, "t = {t}: {z} vs {}", oracle(*t));
    }
}

#[test]
fn exit_time_matches_analytic_crossing() {
    // ‖u(t)‖² = ‖u₀‖² e^{−2t} for the horizontal shear at k = 1
    let g = GridSpec::square(16);
    let u0 = SpectralField::horizontal_shear(g, 2.0, 1);
    let h0 = sobolev_norm(&u0, 0.0, None).powi(2);
    let dt = 1e-3;
    let cfg = SolverConfig::new(dt, 2.0);
    let traj = solve(&u0, EquationSpec::deterministic(), &cfg, &mut ChaCha8Rng::seed_from_u64(0)).unwrap();
    assert_eq!(exit_time(&traj, 10.0 * h0, 0.0, ExitMode::H), traj.final_time());
    // ε∫‖∂₁u‖² = ε h0 (1 − e^{−2t}) / 2 crosses m at t* = −½ log(1 − 2m/(ε h0))
    let (eps, m) = (10.0, 1.5 * h0);
    let t_star = -0.5 * (1.0 - 2.0 * m / (eps * h0)).ln();
    let tau = exit_time(&traj, m, eps, ExitMode::H);
    assert!((tau - t_star).abs() <= 2.0 * dt, "{tau} vs {t_star}");
    assert_eq!(exit_time(&traj, 0.5 * h0, 0.0, ExitMode::H), 0.0);
}

#[test]
fn regularized_vertical_mode_decays_at_reg_rate() {
    let g = GridSpec::square(16);
    let u0 = SpectralField::vertical_shear(g, 1.0, 3);
    let mut cfg = SolverConfig::new(1e-3, 1.0);
    cfg.reg_eps = 0.2;
    let traj = solve(&u0, EquationSpec::deterministic(), &cfg, &mut ChaCha8Rng::seed_from_u64(0)).unwrap();
    let want = sobolev_norm(&u0, 0.0, None) * (-0.04 * 9.0f64).exp();
    assert!((sobolev_norm(traj.final_state(), 0.0, None) - want).abs() <= 1e-10);
    assert!(traj.energy_defect(1.0, 0.2) < 1e-3);
}
