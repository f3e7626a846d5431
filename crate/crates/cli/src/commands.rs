//! Command implementations. Each writes its report to `out` and, when an
//! output directory is configured, its data files.

use std::fmt::Write as _;
use std::fs;
use std::io::Write;
use std::path::Path;

use spinlink::experiment::{self, fmt_real, CycleConfig};
use spinlink::physics::{self, KAPPA2_THEORY_PREFACTOR};
use spinlink::protocols;
use spinlink::rng::stream_rng;
use spinlink::time_domain::{self, AtomicQuadratures, CrossEngineReport, PulseConfig, PulseSimulator};

use crate::config::{CommandKind, ProtocolName, RunConfig};
use crate::CliError;

/// Relative tolerance of the time-domain moment comparison.
pub const CROSS_ENGINE_TOLERANCE: f64 = 0.03;
/// Largest acceptable spin-sum drift per trajectory, in units of `√(2J_x)`.
pub const SPIN_DRIFT_LIMIT: f64 = 1e-10;
/// Couplings compared by `timedomain` when no κ² is given.
pub const DEFAULT_PULSE_KAPPAS: [f64; 3] = [0.5, 1.0, 2.0];

pub fn dispatch(config: &RunConfig, out: &mut dyn Write) -> Result<(), CliError> {
    match config.command {
        CommandKind::Calibrate => calibrate(config, out),
        CommandKind::Run => run(config, out),
        CommandKind::Sweep => sweep(config, out),
        CommandKind::Timedomain => timedomain(config, out),
        CommandKind::Protocol => protocol(config, out),
    }
}

fn key_values(pairs: &[(&str, f64)]) -> String {
    pairs.iter().map(|(k, v)| format!("{k} = {}\n", fmt_real(*v))).collect()
}

fn emit(out: &mut dyn Write, text: &str) -> Result<(), CliError> {
    out.write_all(text.as_bytes()).map_err(|e| CliError::Io(format!("stdout: {e}")))
}

fn io_err(path: &Path, e: std::io::Error) -> CliError {
    CliError::Io(format!("{}: {e}", path.display()))
}

fn prepare_dir(dir: &Path) -> Result<(), CliError> {
    fs::create_dir_all(dir).map_err(|e| io_err(dir, e))
}

fn write_file(dir: &Path, name: &str, bytes: &[u8]) -> Result<(), CliError> {
    let path = dir.join(name);
    fs::write(&path, bytes).map_err(|e| io_err(&path, e))
}

fn write_config(dir: &Path, config: &RunConfig) -> Result<(), CliError> {
    write_file(dir, "config.toml", config.to_settings().to_toml()?.as_bytes())
}

fn kappa2_of(config: &RunConfig) -> Result<f64, CliError> {
    config.kappa2.ok_or_else(|| CliError::Usage("--kappa2 is required".into()))
}

/// Faraday angle, both κ² calibrations and the underlying couplings.
/// The angle comes from `--theta-deg`, else from the atom number.
pub fn calibrate(config: &RunConfig, out: &mut dyn Write) -> Result<(), CliError> {
    let p = &config.physical;
    let theta = match config.theta_deg {
        Some(t) => t,
        None => physics::faraday_theta(4.0 * p.n_atoms, p)?,
    };
    let cal = physics::calibrate(p, physics::j_x_from_theta(theta, p)?)?;
    let theory = physics::kappa2_theory(p.power_mw, p.pulse_ms, theta, p.detuning_mhz);
    let measured = physics::kappa2_experimental(theta.abs());
    let ratio = if measured > 0.0 { theory / measured } else { f64::NAN };
    let text = key_values(&[
        ("theta_deg", theta),
        ("kappa2_theory", theory),
        ("kappa2_exp", measured),
        ("ratio", ratio),
        ("kappa2_physics", cal.kappa2()),
        ("prefactor", KAPPA2_THEORY_PREFACTOR),
        ("prefactor_derived", physics::kappa2_prefactor(p)?),
        ("a", cal.a_coupling),
        ("j_x", cal.j_x),
        ("s_x", cal.s_x),
    ]);
    emit(out, &text)
}

/// Monte Carlo cycles: summary to `out`; `cycles.csv`, `summary.txt` and
/// `config.toml` to the output directory.
pub fn run(config: &RunConfig, out: &mut dyn Write) -> Result<(), CliError> {
    if let Some(dir) = &config.output_path {
        prepare_dir(dir)?;
    }
    let kappa2 = kappa2_of(config)?;
    let cycle = CycleConfig {
        electronics_noise: config.electronics_noise,
        ..CycleConfig::new(kappa2, config.beta, config.n_cycles, config.seed)
    };
    let records = experiment::run_cycles_with(&cycle)?;
    let stats = experiment::analyze(&records, kappa2, config.beta, config.electronics_noise)?;
    let summary = stats.summary();
    if let Some(dir) = &config.output_path {
        let mut csv = Vec::new();
        experiment::write_cycles_csv(&records, &mut csv)?;
        write_file(dir, "cycles.csv", &csv)?;
        write_file(dir, "summary.txt", summary.as_bytes())?;
        write_config(dir, config)?;
    }
    emit(out, &summary)
}

/// Density sweep. The CSV goes to `sweep.csv` when an output directory is
/// set and to `out` otherwise.
pub fn sweep(config: &RunConfig, out: &mut dyn Write) -> Result<(), CliError> {
    if let Some(dir) = &config.output_path {
        prepare_dir(dir)?;
    }
    let rows =
        experiment::density_sweep(&config.thetas, config.beta, config.n_cycles, config.seed, config.electronics_noise)?;
    let mut csv = Vec::new();
    experiment::write_sweep_csv(&rows, &mut csv)?;
    match &config.output_path {
        Some(dir) => {
            write_file(dir, "sweep.csv", &csv)?;
            write_config(dir, config)?;
            let slope = if rows.len() > 1 { experiment::projection_noise_slope(&rows) } else { f64::NAN };
            emit(out, &key_values(&[("rows", rows.len() as f64), ("projection_noise_slope", slope)]))
        }
        None => out.write_all(&csv).map_err(|e| CliError::Io(format!("stdout: {e}"))),
    }
}

/// Plain-text table of one cross-engine comparison.
pub fn format_report(report: &CrossEngineReport) -> String {
    let mut s = String::new();
    let _ = writeln!(s, "kappa = {}", fmt_real(report.kappa));
    let _ = writeln!(s, "n_runs = {}", report.n_runs);
    let _ = writeln!(s, "{:<16} {:>24} {:>24} {:>24}  result", "moment", "gaussian", "time_domain", "tolerance");
    for e in &report.entries {
        let verdict = if e.passed() { "PASS" } else { "FAIL" };
        let _ = writeln!(
            s,
            "{:<16} {:>24} {:>24} {:>24}  {verdict}",
            e.name,
            fmt_real(e.predicted),
            fmt_real(e.simulated),
            fmt_real(e.tolerance)
        );
    }
    let _ = writeln!(s, "max_spin_sum_drift = {}", fmt_real(report.max_spin_sum_drift));
    let _ = writeln!(s, "passed = {}", report.passed());
    s
}

/// Compares time-domain pulses against the Gaussian engine. Exits with an
/// invariant error when a spin sum drifts.
pub fn timedomain(config: &RunConfig, out: &mut dyn Write) -> Result<(), CliError> {
    if let Some(dir) = &config.output_path {
        prepare_dir(dir)?;
    }
    let kappas: Vec<f64> = match config.kappa2 {
        Some(k2) => vec![k2.sqrt()],
        None => DEFAULT_PULSE_KAPPAS.to_vec(),
    };
    let mut text = String::new();
    let mut worst_drift: f64 = 0.0;
    for &kappa in &kappas {
        let pulse = PulseConfig::new(kappa, config.omega_t, config.steps);
        let report = time_domain::cross_engine_check(&pulse, config.runs, config.seed, CROSS_ENGINE_TOLERANCE)?;
        worst_drift = worst_drift.max(report.max_spin_sum_drift);
        text.push_str(&format_report(&report));
        text.push('\n');
    }
    if let Some(dir) = &config.output_path {
        let pulse = PulseConfig::new(kappas[0], config.omega_t, config.steps);
        let mut rng = stream_rng(config.seed, 0);
        let atoms = AtomicQuadratures::sample_vacuum(&mut rng);
        let (trace, _) = PulseSimulator::new(pulse)?.run(atoms, &mut rng);
        let mut csv = Vec::new();
        trace.write_csv(&mut csv)?;
        write_file(dir, "trace.csv", &csv)?;
        write_file(dir, "report.txt", text.as_bytes())?;
        write_config(dir, config)?;
    }
    emit(out, &text)?;
    if worst_drift > SPIN_DRIFT_LIMIT {
        return Err(CliError::Invariant(format!("spin sum drifted by {worst_drift:e}")));
    }
    Ok(())
}

/// Teleportation, swapping or memory: result block to `out`; `runs.csv`,
/// `summary.txt` and `config.toml` to the output directory.
pub fn protocol(config: &RunConfig, out: &mut dyn Write) -> Result<(), CliError> {
    if let Some(dir) = &config.output_path {
        prepare_dir(dir)?;
    }
    let name = config.protocol.ok_or_else(|| CliError::Usage("--protocol is required".into()))?;
    let (x, p) = config.input;
    let (result, params) = match name {
        ProtocolName::Teleport => {
            let k2 = kappa2_of(config)?;
            let r = protocols::teleport_spin_state(config.input, k2, config.gain, config.runs, config.seed)?;
            (r, vec![("input_x", x), ("input_p", p), ("kappa2", k2), ("gain", config.gain)])
        }
        ProtocolName::Swap => {
            let k2 = kappa2_of(config)?;
            (protocols::entanglement_swap(k2, config.runs, config.seed)?, vec![("kappa2", k2)])
        }
        ProtocolName::Memory => {
            let r = protocols::quantum_memory(
                config.input,
                config.squeeze_r,
                config.kappa2_readout,
                config.gain,
                config.runs,
                config.seed,
            )?;
            let params = vec![
                ("input_x", x),
                ("input_p", p),
                ("squeeze_r", config.squeeze_r),
                ("kappa2_readout", config.kappa2_readout),
                ("gain", config.gain),
            ];
            (r, params)
        }
    };
    let summary = result.summary(&name.to_string(), &params);
    if let Some(dir) = &config.output_path {
        let mut csv = Vec::new();
        result.write_runs_csv(&mut csv)?;
        write_file(dir, "runs.csv", &csv)?;
        write_file(dir, "summary.txt", summary.as_bytes())?;
        write_config(dir, config)?;
    }
    emit(out, &summary)
}
