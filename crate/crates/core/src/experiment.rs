//! Monte Carlo measurement cycles and their statistics.
//!
//! A cycle prepares two oppositely oriented cells in the coherent spin state
//! (two collective vacuum modes `A1`, `A2`), sends an entangling pulse whose
//! lock-in outputs give `(a1, b1)`, lets the atoms decay with survival
//! amplitude `β`, and sends a verifying pulse giving `(a2, b2)`. Outcomes are
//! in canonical units, so each pulse carries unit shot noise per `(A, B)` pair.

use std::io::{self, Write};

use rand::Rng;
use rand_distr::StandardNormal;
use rayon::prelude::*;

use crate::error::{invalid, Error, Result};
use crate::gaussian::{GaussianState, ModeRef};
use crate::physics::kappa2_experimental;
use crate::rng::stream_rng;
use crate::stats::linear_fit;

/// Default number of cycles per run.
pub const DEFAULT_CYCLES: usize = 10_000;

/// Margin, in standard errors, required before a run is called entangled.
pub const VERDICT_SIGNIFICANCE: f64 = 3.0;

/// Deviation, in standard errors, of the first-pulse noise from `1 + κ²`
/// beyond which the shot-noise calibration is declared broken.
pub const CALIBRATION_SIGMAS: f64 = 5.0;

const A1: ModeRef = ModeRef(0);
const A2: ModeRef = ModeRef(1);
const L1: ModeRef = ModeRef(2);
const L2: ModeRef = ModeRef(3);

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct CycleRecord {
    pub a1: f64,
    pub b1: f64,
    pub a2: f64,
    pub b2: f64,
}

/// Settings for [`run_cycles_with`].
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct CycleConfig {
    pub kappa2: f64,
    pub beta: f64,
    pub n_cycles: usize,
    pub seed: u64,
    /// Variance of additive detector noise on every outcome.
    pub electronics_noise: f64,
}

impl CycleConfig {
    pub fn new(kappa2: f64, beta: f64, n_cycles: usize, seed: u64) -> Self {
        Self { kappa2, beta, n_cycles, seed, electronics_noise: 0.0 }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.kappa2.is_finite() && self.kappa2 >= 0.0) {
            return invalid(format!("kappa2 must be non-negative, got {}", self.kappa2));
        }
        if !(0.0..=1.0).contains(&self.beta) {
            return invalid(format!("beta must lie in [0, 1], got {}", self.beta));
        }
        if self.n_cycles == 0 {
            return invalid("need at least one cycle");
        }
        if !(self.electronics_noise.is_finite() && self.electronics_noise >= 0.0) {
            return invalid("electronics noise must be non-negative");
        }
        Ok(())
    }
}

fn pulse_and_measure<R: Rng + ?Sized>(
    atoms: &GaussianState,
    kappa: f64,
    rng: &mut R,
) -> Result<(f64, f64, GaussianState)> {
    let state =
        atoms.with_vacuum_mode("L1").with_vacuum_mode("L2").apply_qnd(A1, L1, kappa)?.apply_qnd(A2, L2, kappa)?;
    let (x1, state) = state.measure_x(L1, rng)?;
    // L2 has moved into L1's slot.
    let (x2, state) = state.measure_x(L1, rng)?;
    Ok((x1.value, x2.value, state))
}

/// One measurement cycle. The atoms are returned after the verifying pulse.
pub fn simulate_cycle<R: Rng + ?Sized>(config: &CycleConfig, rng: &mut R) -> Result<(CycleRecord, GaussianState)> {
    let kappa = config.kappa2.sqrt();
    let atoms = GaussianState::vacuum_labeled(["A1", "A2"])?;
    let (a1, b1, atoms) = pulse_and_measure(&atoms, kappa, rng)?;
    let atoms = atoms.apply_beta_decay(A1, config.beta)?.apply_beta_decay(A2, config.beta)?;
    let (a2, b2, atoms) = pulse_and_measure(&atoms, kappa, rng)?;
    let mut record = CycleRecord { a1, b1, a2, b2 };
    if config.electronics_noise > 0.0 {
        let sd = config.electronics_noise.sqrt();
        for v in [&mut record.a1, &mut record.b1, &mut record.a2, &mut record.b2] {
            *v += sd * rng.sample::<f64, _>(StandardNormal);
        }
    }
    Ok((record, atoms))
}

/// Runs `config.n_cycles` cycles. Cycle `i` draws from stream `i` of the
/// seed and records come back in cycle order, so the output is identical
/// for any thread count.
pub fn run_cycles_with(config: &CycleConfig) -> Result<Vec<CycleRecord>> {
    config.validate()?;
    (0..config.n_cycles as u64)
        .into_par_iter()
        .map(|i| simulate_cycle(config, &mut stream_rng(config.seed, i)).map(|(r, _)| r))
        .collect()
}

pub fn run_cycles(kappa2: f64, beta: f64, n_cycles: usize, seed: u64) -> Result<Vec<CycleRecord>> {
    run_cycles_with(&CycleConfig::new(kappa2, beta, n_cycles, seed))
}

/// Pooled least-squares weight `α*` predicting the verifying outcomes from
/// the entangling ones.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct AlphaEstimate {
    pub alpha: f64,
    /// Set when every first-pulse outcome is zero; `alpha` is then 0.
    pub degenerate: bool,
}

pub fn optimal_alpha(records: &[CycleRecord]) -> Result<AlphaEstimate> {
    if records.len() < 2 {
        return Err(Error::InsufficientData(format!("{} records; need at least 2", records.len())));
    }
    let (num, den) =
        records.iter().fold((0.0, 0.0), |(n, d), r| (n + r.a1 * r.a2 + r.b1 * r.b2, d + r.a1 * r.a1 + r.b1 * r.b1));
    if den == 0.0 {
        return Ok(AlphaEstimate { alpha: 0.0, degenerate: true });
    }
    Ok(AlphaEstimate { alpha: num / den, degenerate: false })
}

/// Per-channel weights `(α_A, α_B)`, a diagnostic only.
pub fn per_channel_alpha(records: &[CycleRecord]) -> Result<(f64, f64)> {
    if records.len() < 2 {
        return Err(Error::InsufficientData(format!("{} records; need at least 2", records.len())));
    }
    let ratio = |num: f64, den: f64| if den == 0.0 { 0.0 } else { num / den };
    let sa = records.iter().fold((0.0, 0.0), |(n, d), r| (n + r.a1 * r.a2, d + r.a1 * r.a1));
    let sb = records.iter().fold((0.0, 0.0), |(n, d), r| (n + r.b1 * r.b2, d + r.b1 * r.b1));
    Ok((ratio(sa.0, sa.1), ratio(sb.0, sb.1)))
}

fn residual(r: &CycleRecord, alpha: f64) -> f64 {
    (r.a2 - alpha * r.a1).powi(2) + (r.b2 - alpha * r.b1).powi(2)
}

/// `var(A2 | A1) + var(B2 | B1)` for weight `alpha`, normalized by `N − 1`.
pub fn conditional_variance(records: &[CycleRecord], alpha: f64) -> Result<f64> {
    if records.len() < 2 {
        return Err(Error::InsufficientData(format!("{} records; need at least 2", records.len())));
    }
    Ok(records.iter().map(|r| residual(r, alpha)).sum::<f64>() / (records.len() - 1) as f64)
}

/// Standard error of the mean of `values`.
fn standard_error(values: impl Iterator<Item = f64> + Clone, n: usize) -> f64 {
    let nf = n as f64;
    let m = values.clone().sum::<f64>() / nf;
    let var = values.map(|v| (v - m).powi(2)).sum::<f64>() / (nf - 1.0);
    (var / nf).sqrt()
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Verdict {
    Entangled,
    Separable,
    /// First-pulse noise is inconsistent with `1 + κ²`; no verdict is given.
    CalibrationFailure,
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct CycleStats {
    pub n: usize,
    /// `var(A1) + var(B1)`.
    pub var1: f64,
    /// `var(A2) + var(B2)`.
    pub var2: f64,
    pub alpha_star: f64,
    pub alpha_degenerate: bool,
    pub cond_var: f64,
    pub cond_var_se: f64,
    /// `(cond_var − 1)/κ²` with detector noise removed; `None` at `κ² = 0`.
    pub atomic_var_inferred: Option<f64>,
    pub verdict: Verdict,
    pub kappa2: f64,
    pub beta: f64,
    pub electronics_noise: f64,
}

impl CycleStats {
    pub fn entangled(&self) -> bool {
        self.verdict == Verdict::Entangled
    }

    /// Noise level a separable state cannot beat: `1 + κ²` plus detector noise.
    pub fn separable_bound(&self) -> f64 {
        1.0 + self.kappa2 + 2.0 * self.electronics_noise
    }

    /// `(bound − cond_var) / se`: how many standard errors below the
    /// separable bound the conditional variance lies.
    pub fn margin_in_se(&self) -> f64 {
        (self.separable_bound() - self.cond_var) / self.cond_var_se
    }

    /// Flat `key = value` block.
    pub fn summary(&self) -> String {
        let atomic = self.atomic_var_inferred.map_or("nan".to_string(), fmt_real);
        let lines = [
            ("n", self.n.to_string()),
            ("kappa2", fmt_real(self.kappa2)),
            ("beta", fmt_real(self.beta)),
            ("var1", fmt_real(self.var1)),
            ("var2", fmt_real(self.var2)),
            ("alpha_star", fmt_real(self.alpha_star)),
            ("cond_var", fmt_real(self.cond_var)),
            ("atomic_var", atomic),
            ("entangled", self.entangled().to_string()),
            ("verdict", format!("{:?}", self.verdict).to_lowercase()),
            ("cond_var_se", fmt_real(self.cond_var_se)),
        ];
        lines.iter().map(|(k, v)| format!("{k} = {v}\n")).collect()
    }
}

fn sum_var(xs: impl Iterator<Item = f64> + Clone, n: usize) -> f64 {
    let nf = n as f64;
    let m = xs.clone().sum::<f64>() / nf;
    xs.map(|x| (x - m).powi(2)).sum::<f64>() / (nf - 1.0)
}

/// Statistics of a run with known coupling, decay and detector noise.
pub fn analyze(records: &[CycleRecord], kappa2: f64, beta: f64, electronics_noise: f64) -> Result<CycleStats> {
    let n = records.len();
    let alpha = optimal_alpha(records)?;
    let var1 = sum_var(records.iter().map(|r| r.a1), n) + sum_var(records.iter().map(|r| r.b1), n);
    let var2 = sum_var(records.iter().map(|r| r.a2), n) + sum_var(records.iter().map(|r| r.b2), n);
    let cond_var = conditional_variance(records, alpha.alpha)?;
    let cond_var_se = standard_error(records.iter().map(|r| residual(r, alpha.alpha)), n);
    let var1_se = standard_error(records.iter().map(|r| r.a1 * r.a1 + r.b1 * r.b1), n);

    let bound = 1.0 + kappa2 + 2.0 * electronics_noise;
    let verdict = if (var1 - bound).abs() > CALIBRATION_SIGMAS * var1_se {
        Verdict::CalibrationFailure
    } else if bound - cond_var > VERDICT_SIGNIFICANCE * cond_var_se {
        Verdict::Entangled
    } else {
        Verdict::Separable
    };
    let atomic_var_inferred = (kappa2 > 0.0).then(|| (cond_var - 1.0 - 2.0 * electronics_noise) / kappa2);
    Ok(CycleStats {
        n,
        var1,
        var2,
        alpha_star: alpha.alpha,
        alpha_degenerate: alpha.degenerate,
        cond_var,
        cond_var_se,
        atomic_var_inferred,
        verdict,
        kappa2,
        beta,
        electronics_noise,
    })
}

pub fn entanglement_verdict(stats: &CycleStats) -> bool {
    stats.entangled()
}

/// Expected `(cond_var, α)` for coupling `κ²` and survival amplitude `β`.
pub fn theory_curves(kappa2: f64, beta: f64) -> (f64, f64) {
    let cond = 1.0 + kappa2 * (1.0 + (1.0 - beta * beta) * kappa2) / (1.0 + kappa2);
    (cond, beta * kappa2 / (1.0 + kappa2))
}

/// Spin-unit Duan test for two macroscopically oriented cells:
/// `var(J_y1 + J_y2) + var(J_z1 + J_z2) < 2 J_x`.
pub fn duan_spin_check(varsum_y: f64, varsum_z: f64, j_x: f64) -> Result<bool> {
    if !(j_x.is_finite() && j_x > 0.0) {
        return invalid(format!("j_x must be positive, got {j_x}"));
    }
    Ok(varsum_y + varsum_z < 2.0 * j_x)
}

/// Atoms after an ideal entangling pulse with the outcomes conditioned on
/// (the covariance does not depend on their values) and the decay between
/// pulses. Its Duan sum is the atomic variance a verifying pulse infers.
pub fn conditioned_atoms(kappa2: f64, beta: f64) -> Result<GaussianState> {
    if !(kappa2.is_finite() && kappa2 >= 0.0) {
        return invalid(format!("kappa2 must be non-negative, got {kappa2}"));
    }
    let kappa = kappa2.sqrt();
    let state = GaussianState::vacuum_labeled(["A1", "A2", "L1", "L2"])?
        .apply_qnd(A1, L1, kappa)?
        .apply_qnd(A2, L2, kappa)?
        .condition(L1, crate::gaussian::Quadrature::X, 0.0)?
        .condition(L1, crate::gaussian::Quadrature::X, 0.0)?;
    state.apply_beta_decay(A1, beta)?.apply_beta_decay(A2, beta)
}

/// One row of a density sweep. Noise columns are shot-noise subtracted and
/// in units of shot noise, using a `κ = 0` reference run with the same seed.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct SweepRow {
    pub theta_deg: f64,
    pub kappa2: f64,
    /// First-pulse noise.
    pub pn1: f64,
    /// Verifying-pulse noise.
    pub pn2: f64,
    /// Conditional noise of the verifying pulse.
    pub cond_var_minus_shot: f64,
    pub alpha_star: f64,
    /// `cond_var − 1` from [`theory_curves`] at the sweep's `β`.
    pub theory_cond: f64,
    pub theory_alpha: f64,
    /// As `theory_cond` at `β = 1`.
    pub theory_cond_ideal: f64,
    pub theory_alpha_ideal: f64,
}

pub const SWEEP_COLUMNS: [&str; 10] = [
    "theta_deg",
    "kappa2",
    "pn1",
    "pn2",
    "cond_var_minus_shot",
    "alpha_star",
    "theory_cond",
    "theory_alpha",
    "theory_cond_ideal",
    "theory_alpha_ideal",
];

impl SweepRow {
    pub fn values(&self) -> [f64; 10] {
        [
            self.theta_deg,
            self.kappa2,
            self.pn1,
            self.pn2,
            self.cond_var_minus_shot,
            self.alpha_star,
            self.theory_cond,
            self.theory_alpha,
            self.theory_cond_ideal,
            self.theory_alpha_ideal,
        ]
    }
}

/// Sweeps the Faraday angle with `κ² = 0.10 θ`. Every row and the shot-noise
/// reference use the same seed.
pub fn density_sweep(
    theta_list: &[f64],
    beta: f64,
    n_cycles: usize,
    seed: u64,
    electronics_noise: f64,
) -> Result<Vec<SweepRow>> {
    if theta_list.is_empty() {
        return invalid("theta list is empty");
    }
    if let Some(t) = theta_list.iter().find(|t| !(t.is_finite() && **t >= 0.0)) {
        return invalid(format!("theta must be non-negative, got {t}"));
    }
    if n_cycles < 2 {
        return Err(Error::InsufficientData("a sweep needs at least 2 cycles per point".into()));
    }
    let config = |kappa2| CycleConfig { kappa2, beta, n_cycles, seed, electronics_noise };
    let reference = analyze(&run_cycles_with(&config(0.0))?, 0.0, beta, electronics_noise)?;
    let shot = reference.var1 - 2.0 * electronics_noise;
    theta_list
        .iter()
        .map(|&theta| {
            let kappa2 = kappa2_experimental(theta);
            let stats = analyze(&run_cycles_with(&config(kappa2))?, kappa2, beta, electronics_noise)?;
            let (cond, alpha) = theory_curves(kappa2, beta);
            let (cond_ideal, alpha_ideal) = theory_curves(kappa2, 1.0);
            Ok(SweepRow {
                theta_deg: theta,
                kappa2,
                pn1: (stats.var1 - reference.var1) / shot,
                pn2: (stats.var2 - reference.var2) / shot,
                cond_var_minus_shot: (stats.cond_var - reference.cond_var) / shot,
                alpha_star: stats.alpha_star,
                theory_cond: cond - 1.0,
                theory_alpha: alpha,
                theory_cond_ideal: cond_ideal - 1.0,
                theory_alpha_ideal: alpha_ideal,
            })
        })
        .collect()
}

/// Least-squares slope of `pn1` against `θ`.
pub fn projection_noise_slope(rows: &[SweepRow]) -> f64 {
    let xs: Vec<f64> = rows.iter().map(|r| r.theta_deg).collect();
    let ys: Vec<f64> = rows.iter().map(|r| r.pn1).collect();
    linear_fit(&xs, &ys).slope
}

/// Reals are written with 17 significant digits so they re-parse exactly.
pub fn fmt_real(v: f64) -> String {
    format!("{v:.16e}")
}

pub fn write_cycles_csv<W: Write>(records: &[CycleRecord], mut w: W) -> io::Result<()> {
    writeln!(w, "cycle_index,a1,b1,a2,b2")?;
    for (i, r) in records.iter().enumerate() {
        writeln!(w, "{i},{},{},{},{}", fmt_real(r.a1), fmt_real(r.b1), fmt_real(r.a2), fmt_real(r.b2))?;
    }
    Ok(())
}

pub fn write_sweep_csv<W: Write>(rows: &[SweepRow], mut w: W) -> io::Result<()> {
    writeln!(w, "{}", SWEEP_COLUMNS.join(","))?;
    for row in rows {
        let cells: Vec<String> = row.values().iter().map(|&v| fmt_real(v)).collect();
        writeln!(w, "{}", cells.join(","))?;
    }
    Ok(())
}
