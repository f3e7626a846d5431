use spinlink::experiment::*;
use spinlink::stats::correlation;
use spinlink::{ModeRef, Quadrature};

const N: usize = 100_000;

fn stats(kappa2: f64, beta: f64, n: usize, seed: u64) -> CycleStats {
    analyze(&run_cycles(kappa2, beta, n, seed).unwrap(), kappa2, beta, 0.0).unwrap()
}

#[test]
fn no_coupling_means_no_correlation() {
    let recs = run_cycles(0.0, 1.0, 20_000, 1).unwrap();
    let a1: Vec<f64> = recs.iter().map(|r| r.a1).collect();
    let a2: Vec<f64> = recs.iter().map(|r| r.a2).collect();
    assert!(correlation(&a1, &a2).abs() < 3.0 / (recs.len() as f64).sqrt());
    let s = analyze(&recs, 0.0, 1.0, 0.0).unwrap();
    assert_eq!(s.atomic_var_inferred, None);
    assert!(!s.entangled());
}

#[test]
fn ideal_entanglement() {
    let s = stats(1.0, 1.0, N, 7);
    assert!((s.var1 - 2.0).abs() < 0.02 * 2.0);
    assert!((s.alpha_star - 0.5).abs() < 0.02);
    assert!((s.cond_var - 1.5).abs() < 0.02 * 1.5);
    assert!(s.entangled());
    assert!((s.var2 - s.var1).abs() < 4.0 * (2.0 / N as f64).sqrt() * 2.0);
}

#[test]
fn complete_decay_is_separable() {
    let s = stats(1.0, 0.0, N, 8);
    assert!(s.alpha_star.abs() < 0.02);
    assert!((s.cond_var - 2.0).abs() < 0.02 * 2.0);
    assert_eq!(s.verdict, Verdict::Separable);
}

#[test]
fn decoherence_model_value() {
    let s = stats(1.0, 0.65, N, 9);
    let (cond, alpha) = theory_curves(1.0, 0.65);
    assert!((cond - 1.788_75).abs() < 1e-12);
    assert!((s.cond_var - cond).abs() < 0.02 * cond);
    assert!((s.alpha_star - alpha).abs() < 0.02);
}

#[test]
fn calibration_identity_on_grid() {
    let n = 20_000;
    for k2 in [0.1, 0.25, 0.5, 1.0, 2.0, 4.0] {
        let s = stats(k2, 1.0, n, 10);
        let tol = 3.0 * (2.0 / n as f64).sqrt() * (1.0 + k2);
        assert!((s.var1 - 1.0 - k2).abs() < tol, "kappa2 {k2}: {}", s.var1);
        assert_ne!(s.verdict, Verdict::CalibrationFailure);
    }
}

#[test]
fn alpha_estimator_consistency() {
    for beta in [1.0, 0.65] {
        for k2 in [0.25, 1.0, 4.0] {
            let s = stats(k2, beta, N, 11);
            let (_, alpha) = theory_curves(k2, beta);
            assert!((s.alpha_star - alpha).abs() < 0.02, "beta {beta} kappa2 {k2}");
        }
    }
}

#[test]
fn verdict_margin_shrinks_with_decay() {
    let k2 = 1.0;
    let margins: Vec<f64> = [1.0, 0.9, 0.65, 0.3, 0.0]
        .iter()
        .map(|&b| {
            let s = stats(k2, b, 50_000, 12);
            s.separable_bound() - s.cond_var
        })
        .collect();
    for w in margins.windows(2) {
        assert!(w[1] <= w[0] + 0.01, "{margins:?}");
    }
}

#[test]
fn monte_carlo_matches_exact_engine() {
    for (k2, beta) in [(1.0, 1.0), (1.449, 0.65), (0.5, 0.65)] {
        let s = stats(k2, beta, N, 13);
        let exact = conditioned_atoms(k2, beta).unwrap().duan_sum(ModeRef(0), ModeRef(1)).unwrap();
        let mc = s.atomic_var_inferred.unwrap();
        assert!((mc - exact).abs() < 4.0 * s.cond_var_se / k2, "{k2} {beta}: {mc} vs {exact}");
    }
}

#[test]
fn headline_reduction() {
    let s = stats(1.449, 0.65, N, 14);
    assert!((s.atomic_var_inferred.unwrap() - 0.75).abs() < 0.02);
}

#[test]
fn low_coupling_still_entangled() {
    let s = stats(0.5, 0.65, N, 15);
    assert!(s.entangled());
    assert!(s.margin_in_se() >= 3.0);
}

#[test]
fn detector_noise_is_subtracted() {
    let cfg = CycleConfig { electronics_noise: 0.2, ..CycleConfig::new(1.0, 1.0, N, 16) };
    let recs = run_cycles_with(&cfg).unwrap();
    let s = analyze(&recs, 1.0, 1.0, 0.2).unwrap();
    assert!((s.var1 - 2.4).abs() < 0.02 * 2.4);
    assert_ne!(s.verdict, Verdict::CalibrationFailure);
    let wrong = analyze(&recs, 1.0, 1.0, 0.0).unwrap();
    assert_eq!(wrong.verdict, Verdict::CalibrationFailure);
}

#[test]
fn records_do_not_depend_on_thread_count() {
    let serial = rayon::ThreadPoolBuilder::new().num_threads(1).build().unwrap();
    let wide = rayon::ThreadPoolBuilder::new().num_threads(4).build().unwrap();
    let a = serial.install(|| run_cycles(0.7, 0.8, 5_000, 3).unwrap());
    let b = wide.install(|| run_cycles(0.7, 0.8, 5_000, 3).unwrap());
    assert_eq!(a, b);
}

#[test]
fn definitional_bound() {
    let s = stats(2.0, 0.65, 10_000, 17);
    assert!(s.cond_var <= s.var2 + s.var1 * s.alpha_star.powi(2) + 1e-12);
}

#[test]
fn sweep_reproduces_projection_noise_slope() {
    let thetas: Vec<f64> = (0..=7).map(|i| 2.0 * i as f64).collect();
    let rows = density_sweep(&thetas, 0.65, 20_000, 18, 0.0).unwrap();
    assert_eq!(rows[0].pn1, 0.0);
    assert_eq!(rows[0].cond_var_minus_shot, 0.0);
    assert!((projection_noise_slope(&rows) - 0.10).abs() < 0.05 * 0.10);
    for r in &rows[1..] {
        assert!(r.cond_var_minus_shot < r.pn1, "{r:?}");
        let tol = 4.0 * (2.0 / 20_000f64).sqrt() * (1.0 + r.kappa2);
        assert!((r.pn2 - r.pn1).abs() < tol);
        assert!((r.theory_cond - (theory_curves(r.kappa2, 0.65).0 - 1.0)).abs() < 1e-15);
    }
}

#[test]
fn zero_only_sweep() {
    let rows = density_sweep(&[0.0], 0.3, 100, 1, 0.0).unwrap();
    assert_eq!(rows.len(), 1);
    assert!(rows[0].values()[..5].iter().all(|&v| v == 0.0));
    assert!(density_sweep(&[], 0.3, 100, 1, 0.0).is_err());
    assert!(density_sweep(&[-1.0], 0.3, 100, 1, 0.0).is_err());
}

#[test]
fn per_channel_alpha_agrees_with_pooled() {
    let recs = run_cycles(1.0, 1.0, 50_000, 19).unwrap();
    let (aa, ab) = per_channel_alpha(&recs).unwrap();
    let pooled = optimal_alpha(&recs).unwrap().alpha;
    assert!((aa - pooled).abs() < 0.02 && (ab - pooled).abs() < 0.02);
}

#[test]
fn canonical_and_spin_duan_checks_agree() {
    let j_x = 4e11;
    for kappa2 in [0.0, 0.5, 1.0, 3.0] {
        let s = conditioned_atoms(kappa2, 0.9).unwrap();
        let p1 = s.quadrature_variance(ModeRef(0), Quadrature::P).unwrap();
        let p2 = s.quadrature_variance(ModeRef(1), Quadrature::P).unwrap();
        // var(J_z1 + J_z2) = 2 J_x var(P_A1), var(J_y1 + J_y2) = 2 J_x var(P_A2).
        let spin = duan_spin_check(2.0 * j_x * p2, 2.0 * j_x * p1, j_x).unwrap();
        assert_eq!(spin, p1 + p2 < 1.0);
    }
}
