//! Teleportation, entanglement swapping and light-to-atom memory built from
//! the two-cell QND pulse.
//!
//! Cells are oriented along `+J_x` or `−J_x`. For a plus cell `a` and a minus
//! cell `b` the pulse reads out `(p_a + x_b)/√2` and `(x_a + p_b)/√2` on two
//! light modes, which are then measured. Every protocol has a Monte Carlo
//! form (sampled outcomes and feedback) and an exact ensemble form in which
//! the feedback is applied as a linear map on the moments before the light
//! is discarded.

use std::f64::consts::{FRAC_1_SQRT_2, FRAC_PI_2, SQRT_2};
use std::io::{self, Write};

use nalgebra::{DMatrix, Matrix2, Vector2};
use rand::Rng;
use rayon::prelude::*;

use crate::error::{invalid, Result};
use crate::experiment::fmt_real;
use crate::gaussian::{GaussianState, ModeRef, Quadrature, VACUUM_VARIANCE};
use crate::rng::stream_rng;

/// Symplectic map of one two-cell pulse on `(x_a, p_a, x_b, p_b, X_1, P_1, X_2, P_2)`
/// with `a` the plus cell and `b` the minus cell.
pub fn two_cell_pulse_matrix(kappa: f64) -> DMatrix<f64> {
    let k = kappa * FRAC_1_SQRT_2;
    let mut s = DMatrix::identity(8, 8);
    s[(4, 1)] = k;
    s[(4, 2)] = k;
    s[(6, 0)] = k;
    s[(6, 3)] = k;
    s[(0, 5)] = k;
    s[(3, 5)] = -k;
    s[(1, 7)] = -k;
    s[(2, 7)] = k;
    s
}

fn mode(state: &GaussianState, label: &str) -> Result<ModeRef> {
    match state.mode(label) {
        Some(m) => Ok(m),
        None => invalid(format!("no mode labelled {label}")),
    }
}

/// Sends a pulse through `plus` and `minus` and leaves the two light modes,
/// labelled `{tag}.1` and `{tag}.2`, in the state unmeasured.
pub fn two_cell_pulse(state: &GaussianState, plus: &str, minus: &str, kappa: f64, tag: &str) -> Result<GaussianState> {
    let (l1, l2) = (format!("{tag}.1"), format!("{tag}.2"));
    let state = state.with_vacuum_mode(l1.as_str()).with_vacuum_mode(l2.as_str());
    let modes = [mode(&state, plus)?, mode(&state, minus)?, mode(&state, &l1)?, mode(&state, &l2)?];
    state.apply_symplectic(&modes, &two_cell_pulse_matrix(kappa))
}

/// Pulse plus homodyne detection of both light modes; returns `(A, B)`.
fn pulse_and_measure<R: Rng + ?Sized>(
    state: &GaussianState,
    plus: &str,
    minus: &str,
    kappa: f64,
    rng: &mut R,
) -> Result<(f64, f64, GaussianState)> {
    let state = two_cell_pulse(state, plus, minus, kappa, "L")?;
    let (a, state) = state.measure_x(mode(&state, "L.1")?, rng)?;
    let (b, state) = state.measure_x(mode(&state, "L.2")?, rng)?;
    Ok((a.value, b.value, state))
}

/// Feedback of the light outcome `source` (an `X` quadrature still in the
/// state) onto `target` with `gain`, followed by discarding `source`.
fn feed_forward(state: &GaussianState, target: (&str, Quadrature), source: &str, gain: f64) -> Result<GaussianState> {
    let t = mode(state, target.0)?;
    let s = mode(state, source)?;
    state.add_quadrature((t, target.1), (s, Quadrature::X), gain)
}

fn discard(state: &GaussianState, labels: &[&str]) -> Result<GaussianState> {
    let mut state = state.clone();
    for l in labels {
        state = state.trace_out(mode(&state, l)?)?;
    }
    Ok(state)
}

/// Conditional `var((p_a + x_b)/√2) + var((x_a + p_b)/√2)` for a plus cell
/// `a` and a minus cell `b`; below 1 certifies entanglement.
pub fn epr_duan_sum(state: &GaussianState, plus: &str, minus: &str) -> Result<f64> {
    let (a, b) = (mode(state, plus)?, mode(state, minus)?);
    let s = FRAC_1_SQRT_2;
    Ok(state.combination_variance(&[(a, Quadrature::P, s), (b, Quadrature::X, s)])?
        + state.combination_variance(&[(a, Quadrature::X, s), (b, Quadrature::P, s)])?)
}

/// Means of the two EPR combinations used by [`epr_duan_sum`].
pub fn epr_means(state: &GaussianState, plus: &str, minus: &str) -> Result<(f64, f64)> {
    let (a, b) = (mode(state, plus)?, mode(state, minus)?);
    let s = FRAC_1_SQRT_2;
    Ok((
        state.combination_mean(&[(a, Quadrature::P, s), (b, Quadrature::X, s)])?,
        state.combination_mean(&[(a, Quadrature::X, s), (b, Quadrature::P, s)])?,
    ))
}

/// Overlap of a single-mode Gaussian `(cov, mean)` with the coherent state
/// centred on `target`.
pub fn fidelity(cov: &Matrix2<f64>, mean: (f64, f64), target: (f64, f64)) -> f64 {
    let m = cov + Matrix2::identity() * VACUUM_VARIANCE;
    let d = Vector2::new(mean.0 - target.0, mean.1 - target.1);
    let Some(inv) = m.try_inverse() else {
        return 0.0;
    };
    let q = (d.transpose() * inv * d)[(0, 0)];
    (m.determinant().powf(-0.5) * (-0.5 * q).exp()).clamp(0.0, 1.0)
}

/// Fidelity of `label` in `state` against the coherent state at `target`.
pub fn mode_fidelity(state: &GaussianState, label: &str, target: (f64, f64)) -> Result<f64> {
    let m = mode(state, label)?;
    Ok(fidelity(&state.mode_cov(m)?, state.mode_mean(m)?, target))
}

#[derive(Clone, Debug, PartialEq)]
pub struct ProtocolResult {
    /// Run-averaged fidelity against the target state, where one exists.
    pub mean_fidelity: Option<f64>,
    pub fidelity_se: Option<f64>,
    /// Conditional Duan sum of the output pair (swapping only).
    pub duan_sum_out: Option<f64>,
    /// Run-averaged `(x, p)` offset of the output from its target. For
    /// swapping this is the mean of the two EPR combinations.
    pub mean_displacement_error: (f64, f64),
    pub n_runs: usize,
    pub runs: Vec<ProtocolRun>,
}

impl ProtocolResult {
    fn from_runs(runs: Vec<ProtocolRun>, duan_sum_out: Option<f64>) -> Self {
        let n = runs.len() as f64;
        let err = runs.iter().fold((0.0, 0.0), |acc, r| (acc.0 + r.error.0 / n, acc.1 + r.error.1 / n));
        let fids: Option<Vec<f64>> = runs.iter().map(|r| r.fidelity).collect();
        let (mean_fidelity, fidelity_se) = match fids {
            Some(f) if !f.is_empty() => {
                let m = f.iter().sum::<f64>() / n;
                let se = if f.len() > 1 {
                    (f.iter().map(|v| (v - m).powi(2)).sum::<f64>() / (n - 1.0) / n).sqrt()
                } else {
                    0.0
                };
                (Some(m), Some(se))
            }
            _ => (None, None),
        };
        Self { mean_fidelity, fidelity_se, duan_sum_out, mean_displacement_error: err, n_runs: runs.len(), runs }
    }

    /// Flat `key = value` block; absent quantities are written as `nan`.
    pub fn summary(&self, protocol: &str, params: &[(&str, f64)]) -> String {
        let opt = |v: Option<f64>| v.map_or("nan".to_string(), fmt_real);
        let mut out = format!("protocol = {protocol}\n");
        for (k, v) in params {
            out.push_str(&format!("{k} = {}\n", fmt_real(*v)));
        }
        out.push_str(&format!("n_runs = {}\n", self.n_runs));
        out.push_str(&format!("mean_fidelity = {}\n", opt(self.mean_fidelity)));
        out.push_str(&format!("fidelity_se = {}\n", opt(self.fidelity_se)));
        out.push_str(&format!("duan_sum_out = {}\n", opt(self.duan_sum_out)));
        out.push_str(&format!("mean_displacement_error_x = {}\n", fmt_real(self.mean_displacement_error.0)));
        out.push_str(&format!("mean_displacement_error_p = {}\n", fmt_real(self.mean_displacement_error.1)));
        out
    }

    /// One row per run: outcomes, applied displacement, fidelity.
    pub fn write_runs_csv<W: Write>(&self, mut w: W) -> io::Result<()> {
        let n_out = self.runs.first().map_or(0, |r| r.outcomes.len());
        let mut header = vec!["run".to_string()];
        header.extend((1..=n_out).map(|i| format!("outcome{i}")));
        header.extend(["dx", "dp", "fidelity"].map(String::from));
        writeln!(w, "{}", header.join(","))?;
        for (i, r) in self.runs.iter().enumerate() {
            let mut cells = vec![i.to_string()];
            cells.extend(r.outcomes.iter().map(|&v| fmt_real(v)));
            cells.push(fmt_real(r.displacement.0));
            cells.push(fmt_real(r.displacement.1));
            cells.push(r.fidelity.map_or("nan".to_string(), fmt_real));
            writeln!(w, "{}", cells.join(","))?;
        }
        Ok(())
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct ProtocolRun {
    pub outcomes: Vec<f64>,
    /// Feedback displacement applied to the output mode.
    pub displacement: (f64, f64),
    pub fidelity: Option<f64>,
    pub error: (f64, f64),
}

fn check_kappa2(kappa2: f64) -> Result<f64> {
    if !(kappa2.is_finite() && kappa2 >= 0.0) {
        return invalid(format!("kappa2 must be non-negative, got {kappa2}"));
    }
    Ok(kappa2.sqrt())
}

fn check_runs(n_runs: usize) -> Result<()> {
    if n_runs == 0 {
        return invalid("need at least one run");
    }
    Ok(())
}

fn run_parallel<F>(n_runs: usize, seed: u64, f: F) -> Result<Vec<ProtocolRun>>
where
    F: Fn(&mut rand_chacha::ChaCha8Rng) -> Result<ProtocolRun> + Sync,
{
    (0..n_runs as u64).into_par_iter().map(|i| f(&mut stream_rng(seed, i))).collect()
}

/// Bob's feedback coefficient: outcomes are multiplied by `−gain·√2/κ`.
/// At `κ = 0` the outcomes carry no information and no feedback is applied.
fn feedback_gain(gain: f64, kappa: f64) -> f64 {
    if kappa > 0.0 {
        -gain * SQRT_2 / kappa
    } else {
        0.0
    }
}

/// Cell 3 (minus) holds the displaced vacuum to send; cells 1 (plus) and
/// 2 (minus) share the entanglement. Bob owns cell 2.
fn teleport_input(input: (f64, f64)) -> Result<GaussianState> {
    GaussianState::vacuum_labeled(["c1", "c2", "c3"])?.displace(ModeRef(2), input.0, input.1)
}

/// Teleports a displaced vacuum held in a third cell onto Bob's cell.
pub fn teleport_spin_state(
    input: (f64, f64),
    kappa2: f64,
    gain: f64,
    n_runs: usize,
    seed: u64,
) -> Result<ProtocolResult> {
    let kappa = check_kappa2(kappa2)?;
    check_runs(n_runs)?;
    if !(gain.is_finite() && gain >= 0.0) {
        return invalid(format!("gain must be non-negative, got {gain}"));
    }
    let g = feedback_gain(gain, kappa);
    let initial = teleport_input(input)?;
    let runs = run_parallel(n_runs, seed, |rng| {
        let (a1, b1, s) = pulse_and_measure(&initial, "c1", "c2", kappa, rng)?;
        let (a2, b2, s) = pulse_and_measure(&s, "c1", "c3", kappa, rng)?;
        let displacement = (g * (a1 - a2), g * (b1 - b2));
        let s = s.displace(mode(&s, "c2")?, displacement.0, displacement.1)?;
        let out = mode(&s, "c2")?;
        let m = s.mode_mean(out)?;
        Ok(ProtocolRun {
            outcomes: vec![a1, b1, a2, b2],
            displacement,
            fidelity: Some(fidelity(&s.mode_cov(out)?, m, input)),
            error: (m.0 - input.0, m.1 - input.1),
        })
    })?;
    Ok(ProtocolResult::from_runs(runs, None))
}

/// Exact output of teleportation averaged over outcomes (Bob's cell only).
pub fn teleport_ensemble(input: (f64, f64), kappa2: f64, gain: f64) -> Result<GaussianState> {
    let kappa = check_kappa2(kappa2)?;
    let g = feedback_gain(gain, kappa);
    let s = two_cell_pulse(&teleport_input(input)?, "c1", "c2", kappa, "P")?;
    let s = two_cell_pulse(&s, "c1", "c3", kappa, "Q")?;
    let s = feed_forward(&s, ("c2", Quadrature::X), "P.1", g)?;
    let s = feed_forward(&s, ("c2", Quadrature::X), "Q.1", -g)?;
    let s = feed_forward(&s, ("c2", Quadrature::P), "P.2", g)?;
    let s = feed_forward(&s, ("c2", Quadrature::P), "Q.2", -g)?;
    s.reduced(&[mode(&s, "c2")?])
}

/// Cells 1 and 4 are plus, 2 and 3 minus. Pairs (1, 2) and (4, 3) are
/// entangled, Alice probes (1, 3) and Bob corrects cell 2.
fn swap_cells() -> Result<GaussianState> {
    GaussianState::vacuum_labeled(["c1", "c2", "c3", "c4"])
}

/// Entanglement swapping onto cells 2 and 4, which never interact.
pub fn entanglement_swap(kappa2: f64, n_runs: usize, seed: u64) -> Result<ProtocolResult> {
    let kappa = check_kappa2(kappa2)?;
    check_runs(n_runs)?;
    let g = feedback_gain(1.0, kappa);
    let initial = swap_cells()?;
    let runs = run_parallel(n_runs, seed, |rng| {
        let (a12, b12, s) = pulse_and_measure(&initial, "c1", "c2", kappa, rng)?;
        let (a43, b43, s) = pulse_and_measure(&s, "c4", "c3", kappa, rng)?;
        let (a13, b13, s) = pulse_and_measure(&s, "c1", "c3", kappa, rng)?;
        let displacement = (g * (a12 - a13 + a43), g * (b12 - b13 + b43));
        let s = s.displace(mode(&s, "c2")?, displacement.0, displacement.1)?;
        Ok(ProtocolRun {
            outcomes: vec![a12, b12, a43, b43, a13, b13],
            displacement,
            fidelity: None,
            error: epr_means(&s, "c4", "c2")?,
        })
    })?;
    let duan = epr_duan_sum(&swap_conditional(kappa2)?, "c4", "c2")?;
    Ok(ProtocolResult::from_runs(runs, Some(duan)))
}

/// Cells 2 and 4 conditioned on Alice's outcomes (the covariance does not
/// depend on their values, so zero outcomes are used).
pub fn swap_conditional(kappa2: f64) -> Result<GaussianState> {
    let kappa = check_kappa2(kappa2)?;
    let mut s = swap_cells()?;
    for (plus, minus) in [("c1", "c2"), ("c4", "c3"), ("c1", "c3")] {
        s = two_cell_pulse(&s, plus, minus, kappa, "L")?;
        for l in ["L.1", "L.2"] {
            s = s.condition(mode(&s, l)?, Quadrature::X, 0.0)?;
        }
    }
    s.reduced(&[mode(&s, "c2")?, mode(&s, "c4")?])
}

/// Coupling of the write pulse in the memory protocol.
pub const MEMORY_WRITE_KAPPA: f64 = 1.0;

fn memory_resource(light: (f64, f64), r: f64) -> Result<GaussianState> {
    if !(r.is_finite() && r >= 0.0) {
        return invalid(format!("squeezing parameter must be non-negative, got {r}"));
    }
    GaussianState::vacuum_labeled(["c1", "c2", "in"])?.two_mode_squeeze(ModeRef(0), ModeRef(1), r)?.displace(
        ModeRef(2),
        light.0,
        light.1,
    )
}

fn check_readout(kappa2_readout: f64) -> Result<f64> {
    if !(kappa2_readout.is_finite() && kappa2_readout > 0.0) {
        return invalid(format!("readout kappa2 must be positive, got {kappa2_readout}"));
    }
    Ok(kappa2_readout.sqrt())
}

/// Writes the light state `light` into cell 2 using an EPR pair of cells
/// 1 (plus) and 2 (minus) with squeezing `r`. The light's `X` is measured
/// after a QND pulse on cell 1 and fed into cell 2's `x`; cell 1 is rotated
/// by 90° and read out with a strong pulse whose result is fed into cell
/// 2's `p` with weight `gain`.
pub fn quantum_memory(
    light: (f64, f64),
    resource_squeeze_r: f64,
    kappa2_readout: f64,
    gain: f64,
    n_runs: usize,
    seed: u64,
) -> Result<ProtocolResult> {
    let kappa_r = check_readout(kappa2_readout)?;
    check_runs(n_runs)?;
    let initial = memory_resource(light, resource_squeeze_r)?;
    let runs = run_parallel(n_runs, seed, |rng| {
        let s = initial.apply_qnd(ModeRef(0), ModeRef(2), MEMORY_WRITE_KAPPA)?;
        let (m1, s) = s.measure_x(ModeRef(2), rng)?;
        let s = s.rotate(ModeRef(0), FRAC_PI_2)?.with_vacuum_mode("out");
        let s = s.apply_qnd(ModeRef(0), ModeRef(2), kappa_r)?;
        let (m2, s) = s.measure_x(ModeRef(2), rng)?;
        let displacement = (m1.value / MEMORY_WRITE_KAPPA, -gain * m2.value / kappa_r);
        let s = s.displace(ModeRef(1), displacement.0, displacement.1)?;
        let m = s.mode_mean(ModeRef(1))?;
        Ok(ProtocolRun {
            outcomes: vec![m1.value, m2.value],
            displacement,
            fidelity: Some(fidelity(&s.mode_cov(ModeRef(1))?, m, light)),
            error: (m.0 - light.0, m.1 - light.1),
        })
    })?;
    Ok(ProtocolResult::from_runs(runs, None))
}

/// Exact outcome-averaged stored state of [`quantum_memory`].
pub fn memory_ensemble(
    light: (f64, f64),
    resource_squeeze_r: f64,
    kappa2_readout: f64,
    gain: f64,
) -> Result<GaussianState> {
    let kappa_r = check_readout(kappa2_readout)?;
    let s = memory_resource(light, resource_squeeze_r)?.apply_qnd(ModeRef(0), ModeRef(2), MEMORY_WRITE_KAPPA)?;
    let s = feed_forward(&s, ("c2", Quadrature::X), "in", 1.0 / MEMORY_WRITE_KAPPA)?;
    let s = discard(&s, &["in"])?;
    let s = s.rotate(ModeRef(0), FRAC_PI_2)?.with_vacuum_mode("out");
    let s = s.apply_qnd(ModeRef(0), ModeRef(2), kappa_r)?;
    let s = feed_forward(&s, ("c2", Quadrature::P), "out", -gain / kappa_r)?;
    s.reduced(&[ModeRef(1)])
}
