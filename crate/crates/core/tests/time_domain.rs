use std::f64::consts::TAU;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use spinlink::stats::{correlation, linear_fit, mean, variance};
use spinlink::time_domain::*;

const RUNS: usize = 10_000;

fn config(kappa: f64) -> PulseConfig {
    PulseConfig::new(kappa, TAU * 100.0, 10_000)
}

fn lockin_samples(cfg: &PulseConfig, atoms: AtomicQuadratures, n: usize, seed: u64) -> (Vec<f64>, Vec<f64>) {
    let sim = PulseSimulator::new(cfg.clone()).unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    (0..n).map(|_| sim.run(atoms, &mut rng).1).map(|r| (r.x_l1, r.x_l2)).unzip()
}

#[test]
fn shot_noise_only_without_coupling() {
    let (x1, x2) = lockin_samples(&config(0.0), AtomicQuadratures::default(), RUNS, 1);
    assert!((variance(&x1) - 0.5).abs() < 0.015);
    assert!((variance(&x2) - 0.5).abs() < 0.015);
    assert!(correlation(&x1, &x2).abs() < 3.0 / (RUNS as f64).sqrt());
}

#[test]
fn lockin_extracts_momentum_sums() {
    let atoms = AtomicQuadratures { x_a1: 0.0, p_a1: 2.0, x_a2: 0.0, p_a2: -1.5 };
    let (x1, x2) = lockin_samples(&config(1.0), atoms, 2_000, 2);
    assert!((mean(&x1) - 2.0).abs() < 0.03 * 2.0);
    assert!((mean(&x2) + 1.5).abs() < 0.03 * 1.5);
}

#[test]
fn difference_noise_piles_up() {
    for (kappa, expected) in [(0.0, 0.5), (1.0, 1.0), (2.0, 2.5)] {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let cfg = PulseConfig::new(kappa, TAU * 20.0, 2_000);
        let v = diff_noise_growth(&cfg, RUNS, &mut rng).unwrap();
        assert!((v - expected).abs() < 0.03 * expected, "kappa {kappa}: {v}");
    }
}

#[test]
fn shot_noise_is_linear_in_photon_number() {
    let mut rng = ChaCha8Rng::seed_from_u64(4);
    let v = shot_noise_scaling(&[4.0], 100, RUNS, &mut rng).unwrap();
    assert!((v[0] - 1.0).abs() < 0.05);
    let n_ph = [1e6, 2e6, 4e6, 8e6];
    let vars = shot_noise_scaling(&n_ph, 100, RUNS, &mut rng).unwrap();
    let fit = linear_fit(&n_ph, &vars);
    assert!((fit.slope - 0.25).abs() < 0.05 * 0.25);
    assert!(shot_noise_scaling(&[], 100, RUNS, &mut rng).is_err());
}

#[test]
fn concatenated_pulses_match_double_pulse() {
    let mut rng = ChaCha8Rng::seed_from_u64(8);
    let n = 20_000;
    let two: Vec<f64> = (0..n).map(|_| integrated_sy(1e4, 50, &mut rng) + integrated_sy(1e4, 50, &mut rng)).collect();
    let one: Vec<f64> = (0..n).map(|_| integrated_sy(2e4, 100, &mut rng)).collect();
    let tol = 4.0 * (2.0 / n as f64).sqrt() * 5e3;
    assert!((variance(&two) - variance(&one)).abs() < 2.0 * tol);
    assert!((variance(&one) - 5e3).abs() < tol);
}

#[test]
fn discretization_converges() {
    // κ = 0 lock-in variance is exactly Σcos²·dt; use a non-integer cycle count.
    let omega_t = TAU * 650.3;
    let n = PulseConfig::min_steps(omega_t);
    let coarse = demod_windows(omega_t, n).cos2;
    let fine = demod_windows(omega_t, 2 * n).cos2;
    assert!(((coarse - fine) / fine).abs() < 0.005);
    let w = demod_windows(TAU * 650.0, 65_000);
    assert!((w.cos2 - 0.5).abs() < 1e-10 && w.cross.abs() < 1e-10);
}

#[test]
fn spin_sums_conserved_for_random_input() {
    let mut rng = ChaCha8Rng::seed_from_u64(21);
    let cfg = PulseConfig::new(2.0, TAU * 50.0, 5_000);
    let sim = PulseSimulator::new(cfg.clone()).unwrap();
    let scale = (2.0 * cfg.j_x).sqrt();
    for _ in 0..20 {
        let atoms = AtomicQuadratures::sample_vacuum(&mut rng);
        let (trace, _) = sim.run(atoms, &mut rng);
        let drift = trace.max_spin_sum_drift((scale * atoms.p_a2, scale * atoms.p_a1)) / scale;
        assert!(drift < 1e-10);
        assert!((trace.atoms_out.p_a1 - atoms.p_a1).abs() < 1e-10);
        assert!((trace.atoms_out.p_a2 - atoms.p_a2).abs() < 1e-10);
    }
}

#[test]
fn trace_free_run_matches_recorded_run() {
    let cfg = PulseConfig::new(1.3, TAU * 20.0, 2_000);
    let sim = PulseSimulator::new(cfg.clone()).unwrap();
    let scale = (2.0 * cfg.j_x).sqrt();
    let atoms = AtomicQuadratures::sample_vacuum(&mut ChaCha8Rng::seed_from_u64(4));
    let (trace, lockin) = sim.run(atoms, &mut ChaCha8Rng::seed_from_u64(5));
    let (out, lockin2, drift) = sim.run_outputs(atoms, &mut ChaCha8Rng::seed_from_u64(5));
    assert_eq!(out, trace.atoms_out);
    assert_eq!(lockin, lockin2);
    assert_eq!(drift, trace.max_spin_sum_drift((scale * atoms.p_a2, scale * atoms.p_a1)) / scale);
}

#[test]
fn cross_engine_agreement_small() {
    let cfg = PulseConfig::new(1.0, TAU * 20.0, 2_000);
    let report = cross_engine_check(&cfg, 20_000, 12, 0.03).unwrap();
    for e in &report.entries {
        assert!(e.passed(), "{e:?}");
    }
    assert!(report.max_spin_sum_drift < 1e-10);
}

#[test]
fn gaussian_prediction_values() {
    let (mean, cov) = gaussian_prediction(2.0).unwrap();
    assert!(mean.iter().all(|&m| m == 0.0));
    assert!((cov[0][0] - 2.5).abs() < 1e-15);
    assert!((cov[0][3] - 1.0).abs() < 1e-15);
    assert!((cov[2][2] - 2.5).abs() < 1e-15);
    assert!(cov[0][1].abs() < 1e-15);
}
