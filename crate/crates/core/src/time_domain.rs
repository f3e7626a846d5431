//! Stochastic time-domain model of one probe pulse through two spin cells.
//!
//! The rotating-frame spin components are integrated with Euler–Maruyama
//! steps driven by delta-correlated Stokes noise, the transmitted `S_y` is
//! demodulated at the Larmor frequency, and the result is expressed in the
//! same canonical units as [`crate::gaussian`]. It shares no code with the
//! Gaussian engine and serves as an independent check of the QND map.
//!
//! Time is measured in units of the pulse length `T`, so `S_x` is the number
//! of photons per pulse divided by two and `a = κ / sqrt(J_x S_x)`.
//!
//! Spins feel `S_z` only and the detector sees `S_y` only; the two noise
//! processes are independent, so the left-point rule has no Itô/Stratonovich
//! ambiguity.

use std::f64::consts::TAU;
use std::io::{self, Write};

use rand::Rng;
use rand_distr::StandardNormal;
use rayon::prelude::*;

use crate::error::{invalid, Result};
use crate::gaussian::{GaussianState, ModeRef, Quadrature};
use crate::rng::stream_rng;
use crate::stats::covariance_matrix;

/// Minimum number of integration steps per Larmor period.
pub const STEPS_PER_PERIOD: f64 = 100.0;

/// Larmor cycles per pulse: 325 kHz over 2 ms.
pub const DEFAULT_LARMOR_CYCLES: f64 = 650.0;

#[derive(Clone, Debug, PartialEq)]
pub struct PulseConfig {
    pub kappa: f64,
    /// Larmor phase accumulated over the pulse, Ω·T.
    pub omega_t: f64,
    pub n_steps: usize,
    /// Macroscopic spin of cell 2 in units of cell 1's. −1 is the
    /// entangling geometry; 0 leaves a single active cell.
    pub second_cell_spin: f64,
    /// Photons per pulse divided by two.
    pub s_x: f64,
    pub j_x: f64,
    /// Only used to label trace time stamps.
    pub pulse_ms: f64,
}

impl PulseConfig {
    pub fn new(kappa: f64, omega_t: f64, n_steps: usize) -> Self {
        Self { kappa, omega_t, n_steps, second_cell_spin: -1.0, s_x: 1e6, j_x: 1e6, pulse_ms: 2.0 }
    }

    /// Smallest step count that resolves the Larmor oscillation.
    pub fn min_steps(omega_t: f64) -> usize {
        (STEPS_PER_PERIOD * omega_t / TAU).ceil().max(1.0) as usize
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.kappa.is_finite() && self.kappa >= 0.0) {
            return invalid(format!("kappa must be non-negative, got {}", self.kappa));
        }
        if !(self.omega_t.is_finite() && self.omega_t >= 0.0) {
            return invalid(format!("omega_t must be non-negative, got {}", self.omega_t));
        }
        if self.n_steps == 0 || (self.n_steps as f64) < STEPS_PER_PERIOD * self.omega_t / TAU {
            return invalid(format!(
                "{} steps under-resolve the Larmor precession; need at least {}",
                self.n_steps,
                Self::min_steps(self.omega_t)
            ));
        }
        for (name, v) in [("s_x", self.s_x), ("j_x", self.j_x), ("pulse_ms", self.pulse_ms)] {
            if !(v.is_finite() && v > 0.0) {
                return invalid(format!("{name} must be positive, got {v}"));
            }
        }
        if !self.second_cell_spin.is_finite() {
            return invalid("second_cell_spin must be finite");
        }
        Ok(())
    }
}

/// Canonical atomic quadratures `(X_A1, P_A1, X_A2, P_A2)`.
#[derive(Clone, Copy, Debug, Default, PartialEq)]
pub struct AtomicQuadratures {
    pub x_a1: f64,
    pub p_a1: f64,
    pub x_a2: f64,
    pub p_a2: f64,
}

impl AtomicQuadratures {
    /// Draws a realization of the two-mode vacuum (both cells in a CSS).
    pub fn sample_vacuum<R: Rng + ?Sized>(rng: &mut R) -> Self {
        let s = std::f64::consts::FRAC_1_SQRT_2;
        let mut draw = || s * rng.sample::<f64, _>(StandardNormal);
        Self { x_a1: draw(), p_a1: draw(), x_a2: draw(), p_a2: draw() }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct PulseTrace {
    pub dt_ms: f64,
    pub n_steps: usize,
    /// Per-step integrated `S_y^out`, in units of its shot-noise standard deviation.
    pub sy_samples: Vec<f64>,
    /// `(J_y1' + J_y2', J_z1' + J_z2')` after each step.
    pub spin_sums: Vec<(f64, f64)>,
    /// `(J_y1' − J_y2', J_z1' − J_z2')` after each step.
    pub spin_diffs: Vec<(f64, f64)>,
    pub atoms_in: AtomicQuadratures,
    pub atoms_out: AtomicQuadratures,
}

impl PulseTrace {
    /// Largest excursion of either spin sum from its initial value.
    pub fn max_spin_sum_drift(&self, initial: (f64, f64)) -> f64 {
        self.spin_sums.iter().map(|&(y, z)| (y - initial.0).abs().max((z - initial.1).abs())).fold(0.0, f64::max)
    }

    /// Writes `step, t_ms, sy_sample, jy_sum, jz_sum, jy_diff, jz_diff`.
    pub fn write_csv<W: Write>(&self, mut w: W) -> io::Result<()> {
        writeln!(w, "step,t_ms,sy_sample,jy_sum,jz_sum,jy_diff,jz_diff")?;
        for k in 0..self.n_steps {
            let (sy, sz) = self.spin_sums[k];
            let (dy, dz) = self.spin_diffs[k];
            writeln!(
                w,
                "{},{:.16e},{:.16e},{:.16e},{:.16e},{:.16e},{:.16e}",
                k,
                k as f64 * self.dt_ms,
                self.sy_samples[k],
                sy,
                sz,
                dy,
                dz
            )?;
        }
        Ok(())
    }
}

/// Demodulated outputs in canonical units.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct LockInResult {
    pub x_l1: f64,
    pub x_l2: f64,
}

/// Exact discrete demodulation windows, in units of `T`:
/// `Σ cos² dt`, `Σ sin² dt` and `Σ cos·sin dt`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct DemodWindows {
    pub cos2: f64,
    pub sin2: f64,
    pub cross: f64,
}

pub fn demod_windows(omega_t: f64, n_steps: usize) -> DemodWindows {
    let dt = 1.0 / n_steps as f64;
    let mut w = DemodWindows { cos2: 0.0, sin2: 0.0, cross: 0.0 };
    for k in 0..n_steps {
        let (s, c) = (omega_t * k as f64 * dt).sin_cos();
        w.cos2 += c * c * dt;
        w.sin2 += s * s * dt;
        w.cross += c * s * dt;
    }
    w
}

/// Pulse integrator with a precomputed Larmor reference table, reusable
/// across runs with the same configuration.
#[derive(Clone, Debug)]
pub struct PulseSimulator {
    config: PulseConfig,
    /// `(cos Ωt_k, sin Ωt_k)` at the left edge of every step.
    reference: Vec<(f64, f64)>,
}

impl PulseSimulator {
    pub fn new(config: PulseConfig) -> Result<Self> {
        config.validate()?;
        let dt = 1.0 / config.n_steps as f64;
        let reference = (0..config.n_steps)
            .map(|k| {
                let (s, c) = (config.omega_t * k as f64 * dt).sin_cos();
                (c, s)
            })
            .collect();
        Ok(Self { config, reference })
    }

    pub fn config(&self) -> &PulseConfig {
        &self.config
    }

    pub fn run<R: Rng + ?Sized>(&self, atoms_in: AtomicQuadratures, rng: &mut R) -> (PulseTrace, LockInResult) {
        let n = self.config.n_steps;
        let mut sy_samples = Vec::with_capacity(n);
        let mut spin_sums = Vec::with_capacity(n);
        let mut spin_diffs = Vec::with_capacity(n);
        let (atoms_out, lockin) = self.integrate(atoms_in, rng, |sy, sums, diffs| {
            sy_samples.push(sy);
            spin_sums.push(sums);
            spin_diffs.push(diffs);
        });
        let trace = PulseTrace {
            dt_ms: self.config.pulse_ms / n as f64,
            n_steps: n,
            sy_samples,
            spin_sums,
            spin_diffs,
            atoms_in,
            atoms_out,
        };
        (trace, lockin)
    }

    /// As [`run`](Self::run) without recording the trace. Also returns the
    /// largest spin-sum drift in units of `√(2J_x)`.
    pub fn run_outputs<R: Rng + ?Sized>(
        &self,
        atoms_in: AtomicQuadratures,
        rng: &mut R,
    ) -> (AtomicQuadratures, LockInResult, f64) {
        let scale = (2.0 * self.config.j_x).sqrt();
        let initial = (scale * atoms_in.p_a2, scale * atoms_in.p_a1);
        let mut drift: f64 = 0.0;
        let (atoms_out, lockin) = self.integrate(atoms_in, rng, |_, (y, z), _| {
            drift = drift.max((y - initial.0).abs()).max((z - initial.1).abs());
        });
        (atoms_out, lockin, drift / scale)
    }

    /// Euler–Maruyama loop; `on_step` sees the normalized `S_y^out` sample,
    /// the spin sums and the spin differences after every step.
    fn integrate<R, F>(
        &self,
        atoms_in: AtomicQuadratures,
        rng: &mut R,
        mut on_step: F,
    ) -> (AtomicQuadratures, LockInResult)
    where
        R: Rng + ?Sized,
        F: FnMut(f64, (f64, f64), (f64, f64)),
    {
        let cfg = &self.config;
        let dt = 1.0 / cfg.n_steps as f64;
        let a = cfg.kappa / (cfg.j_x * cfg.s_x).sqrt();
        let noise_sd = (cfg.s_x * dt / 2.0).sqrt();
        let spin_scale = (2.0 * cfg.j_x).sqrt();

        let diff_y = spin_scale * atoms_in.x_a1;
        let sum_z = spin_scale * atoms_in.p_a1;
        let diff_z = -spin_scale * atoms_in.x_a2;
        let sum_y = spin_scale * atoms_in.p_a2;
        let (mut jy1, mut jy2) = ((sum_y + diff_y) / 2.0, (sum_y - diff_y) / 2.0);
        let (mut jz1, mut jz2) = ((sum_z + diff_z) / 2.0, (sum_z - diff_z) / 2.0);

        let kick1 = a * cfg.j_x;
        let kick2 = a * cfg.j_x * cfg.second_cell_spin;
        let readout = a * cfg.s_x * dt;
        let (mut acc_cos, mut acc_sin) = (0.0, 0.0);

        for &(c, s) in &self.reference {
            let d_sy: f64 = noise_sd * rng.sample::<f64, _>(StandardNormal);
            let d_sz: f64 = noise_sd * rng.sample::<f64, _>(StandardNormal);

            // Lab-frame J_z expressed through the rotating-frame components.
            let jz_lab = (jy1 + jy2) * s + (jz1 + jz2) * c;
            let sy_out = d_sy + readout * jz_lab;
            acc_cos += sy_out * c;
            acc_sin += sy_out * s;

            // Rotating-frame back-action: dJ_y' ∝ S_z cos Ωt, dJ_z' ∝ −S_z sin Ωt.
            jy1 += kick1 * d_sz * c;
            jz1 -= kick1 * d_sz * s;
            jy2 += kick2 * d_sz * c;
            jz2 -= kick2 * d_sz * s;

            on_step(sy_out / noise_sd, (jy1 + jy2, jz1 + jz2), (jy1 - jy2, jz1 - jz2));
        }

        let norm = (2.0 / cfg.s_x).sqrt();
        let lockin = LockInResult { x_l1: norm * acc_cos, x_l2: norm * acc_sin };
        let atoms_out = AtomicQuadratures {
            x_a1: (jy1 - jy2) / spin_scale,
            p_a1: (jz1 + jz2) / spin_scale,
            x_a2: -(jz1 - jz2) / spin_scale,
            p_a2: (jy1 + jy2) / spin_scale,
        };
        (atoms_out, lockin)
    }
}

/// One stochastic pulse through the two cells.
pub fn simulate_pulse<R: Rng + ?Sized>(
    config: &PulseConfig,
    atoms_in: AtomicQuadratures,
    rng: &mut R,
) -> Result<(PulseTrace, LockInResult)> {
    Ok(PulseSimulator::new(config.clone())?.run(atoms_in, rng))
}

/// `∫ S_y dt` over one pulse of coherent light carrying `n_photons`.
pub fn integrated_sy<R: Rng + ?Sized>(n_photons: f64, n_steps: usize, rng: &mut R) -> f64 {
    let s_x = n_photons / 2.0;
    let sd = (s_x / (2.0 * n_steps as f64)).sqrt();
    (0..n_steps).map(|_| sd * rng.sample::<f64, _>(StandardNormal)).sum()
}

/// Monte Carlo variance of `∫ S_y dt` for each photon number.
pub fn shot_noise_scaling<R: Rng + ?Sized>(
    n_photons: &[f64],
    n_steps: usize,
    n_runs: usize,
    rng: &mut R,
) -> Result<Vec<f64>> {
    if n_photons.is_empty() {
        return invalid("photon-number list is empty");
    }
    if n_photons.iter().any(|&n| !(n.is_finite() && n > 0.0)) {
        return invalid("photon numbers must be positive");
    }
    if n_runs < 2 || n_steps == 0 {
        return invalid("need at least two runs and one step");
    }
    Ok(n_photons
        .iter()
        .map(|&n| {
            let samples: Vec<f64> = (0..n_runs).map(|_| integrated_sy(n, n_steps, rng)).collect();
            crate::stats::variance(&samples)
        })
        .collect())
}

/// Monte Carlo `var(X_A1^out)` for vacuum input; grows as `(1 + κ²)/2`.
pub fn diff_noise_growth<R: Rng + ?Sized>(config: &PulseConfig, n_runs: usize, rng: &mut R) -> Result<f64> {
    if n_runs < 2 {
        return invalid("need at least two runs");
    }
    let sim = PulseSimulator::new(config.clone())?;
    let samples: Vec<f64> = (0..n_runs)
        .map(|_| {
            let atoms = AtomicQuadratures::sample_vacuum(rng);
            sim.run(atoms, rng).0.atoms_out.x_a1
        })
        .collect();
    Ok(crate::stats::variance(&samples))
}

/// Observables compared between the two engines, in this order.
pub const CROSS_ENGINE_VARIABLES: [&str; 6] = ["x_l1", "x_l2", "x_a1", "p_a1", "x_a2", "p_a2"];

#[derive(Clone, Debug, PartialEq)]
pub struct MomentComparison {
    pub name: String,
    pub predicted: f64,
    pub simulated: f64,
    /// Allowed absolute deviation.
    pub tolerance: f64,
}

impl MomentComparison {
    pub fn passed(&self) -> bool {
        (self.simulated - self.predicted).abs() <= self.tolerance
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct CrossEngineReport {
    pub kappa: f64,
    pub n_runs: usize,
    pub entries: Vec<MomentComparison>,
    pub max_spin_sum_drift: f64,
}

impl CrossEngineReport {
    pub fn passed(&self) -> bool {
        self.entries.iter().all(MomentComparison::passed)
    }
}

/// Moments of `(X_L1, X_L2, X_A1, P_A1, X_A2, P_A2)` after one QND pulse on
/// the two-mode vacuum, from the Gaussian engine.
pub fn gaussian_prediction(kappa: f64) -> Result<([f64; 6], [[f64; 6]; 6])> {
    let state = GaussianState::vacuum_labeled(["A1", "A2", "L1", "L2"])?
        .apply_qnd(ModeRef(0), ModeRef(2), kappa)?
        .apply_qnd(ModeRef(1), ModeRef(3), kappa)?;
    let vars = [
        (ModeRef(2), Quadrature::X),
        (ModeRef(3), Quadrature::X),
        (ModeRef(0), Quadrature::X),
        (ModeRef(0), Quadrature::P),
        (ModeRef(1), Quadrature::X),
        (ModeRef(1), Quadrature::P),
    ];
    let mut mean = [0.0; 6];
    let mut cov = [[0.0; 6]; 6];
    for (i, &a) in vars.iter().enumerate() {
        mean[i] = state.quadrature_mean(a.0, a.1)?;
        for (j, &b) in vars.iter().enumerate() {
            cov[i][j] = state.quadrature_covariance(a, b)?;
        }
    }
    Ok((mean, cov))
}

/// Runs `n_runs` pulses on freshly sampled vacuum atoms and compares means
/// and covariances against [`gaussian_prediction`]. Entries must agree to
/// `rel_tol` of the relevant standard-deviation scale. Run `i` uses stream
/// `i` of `seed`, so the report does not depend on the thread count.
pub fn cross_engine_check(config: &PulseConfig, n_runs: usize, seed: u64, rel_tol: f64) -> Result<CrossEngineReport> {
    if n_runs < 2 {
        return invalid("need at least two runs");
    }
    let sim = PulseSimulator::new(config.clone())?;
    let results: Vec<([f64; 6], f64)> = (0..n_runs as u64)
        .into_par_iter()
        .map(|i| {
            let mut rng = stream_rng(seed, i);
            let atoms = AtomicQuadratures::sample_vacuum(&mut rng);
            let (out, lockin, drift) = sim.run_outputs(atoms, &mut rng);
            ([lockin.x_l1, lockin.x_l2, out.x_a1, out.p_a1, out.x_a2, out.p_a2], drift)
        })
        .collect();
    let rows: Vec<[f64; 6]> = results.iter().map(|r| r.0).collect();
    let max_spin_sum_drift = results.iter().map(|r| r.1).fold(0.0, f64::max);

    let (pred_mean, pred_cov) = gaussian_prediction(config.kappa)?;
    let (sim_mean, sim_cov) = covariance_matrix(&rows);
    let mut entries = Vec::new();
    for i in 0..6 {
        entries.push(MomentComparison {
            name: format!("mean({})", CROSS_ENGINE_VARIABLES[i]),
            predicted: pred_mean[i],
            simulated: sim_mean[i],
            tolerance: rel_tol * pred_cov[i][i].sqrt(),
        });
    }
    for i in 0..6 {
        for j in i..6 {
            entries.push(MomentComparison {
                name: format!("cov({},{})", CROSS_ENGINE_VARIABLES[i], CROSS_ENGINE_VARIABLES[j]),
                predicted: pred_cov[i][j],
                simulated: sim_cov[i][j],
                tolerance: rel_tol * (pred_cov[i][i] * pred_cov[j][j]).sqrt(),
            });
        }
    }
    Ok(CrossEngineReport { kappa: config.kappa, n_runs, entries, max_spin_sum_drift })
}
