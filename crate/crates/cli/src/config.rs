//! Flag and config-file handling.
//!
//! Every flag has a config-file key of the same name without the leading
//! dashes. Values given on the command line win over the file.

use std::fmt;
use std::path::{Path, PathBuf};

use clap::{Args, ValueEnum};
use serde::{Deserialize, Serialize};
use spinlink::experiment::DEFAULT_CYCLES;
use spinlink::physics::{self, PhysicalParams};
use spinlink::time_domain::PulseConfig;

use crate::CliError;

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum CommandKind {
    Calibrate,
    Run,
    Sweep,
    Timedomain,
    Protocol,
}

impl fmt::Display for CommandKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let name = match self {
            CommandKind::Calibrate => "calibrate",
            CommandKind::Run => "run",
            CommandKind::Sweep => "sweep",
            CommandKind::Timedomain => "timedomain",
            CommandKind::Protocol => "protocol",
        };
        f.write_str(name)
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ProtocolName {
    Teleport,
    Swap,
    Memory,
}

impl fmt::Display for ProtocolName {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let name = match self {
            ProtocolName::Teleport => "teleport",
            ProtocolName::Swap => "swap",
            ProtocolName::Memory => "memory",
        };
        f.write_str(name)
    }
}

/// Raw settings from flags or a config file; `None` means "not given".
#[derive(Clone, Debug, Default, PartialEq, Args, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case", deny_unknown_fields)]
pub struct Settings {
    /// Command the file was written for.
    #[arg(skip)]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub command: Option<CommandKind>,

    /// Coupling strength κ²; overrides anything derived from physical parameters.
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub kappa2: Option<f64>,
    /// Survival amplitude of the atomic quadratures between pulses.
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub beta: Option<f64>,
    /// DC Faraday rotation angle in degrees.
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub theta_deg: Option<f64>,
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub power_mw: Option<f64>,
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub pulse_ms: Option<f64>,
    #[arg(long, allow_negative_numbers = true)]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub detuning_mhz: Option<f64>,
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub wavelength_nm: Option<f64>,
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub linewidth_mhz: Option<f64>,
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub area_eff_cm2: Option<f64>,
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub larmor_khz: Option<f64>,
    /// Atoms per cell.
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub n_atoms: Option<f64>,
    /// Measurement cycles per run.
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub cycles: Option<usize>,
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub seed: Option<u64>,
    /// Output directory.
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub out: Option<PathBuf>,
    /// Worker threads; results do not depend on it.
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub parallel: Option<usize>,
    #[arg(long, value_enum)]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub protocol: Option<ProtocolName>,
    /// Feedback gain for teleportation and memory readout.
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub gain: Option<f64>,
    /// Two-mode squeezing of the memory resource.
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub squeeze_r: Option<f64>,
    /// κ² of the memory readout pulse.
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub kappa2_readout: Option<f64>,
    /// Input state displacement `x` for teleportation and memory.
    #[arg(long, allow_negative_numbers = true)]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub input_x: Option<f64>,
    #[arg(long, allow_negative_numbers = true)]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub input_p: Option<f64>,
    /// Faraday angles of a sweep, comma separated.
    #[arg(long, value_delimiter = ',')]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub thetas: Option<Vec<f64>>,
    /// Protocol runs or time-domain pulses.
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub runs: Option<usize>,
    /// Integration steps per pulse.
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub steps: Option<usize>,
    /// Larmor phase per pulse, Ω·T in radians.
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub omega_t: Option<f64>,
    /// Variance of additive detector noise per outcome.
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub electronics_noise: Option<f64>,
}

macro_rules! overlay {
    ($hi:expr, $lo:expr; $($f:ident),*) => {
        Settings { $($f: $hi.$f.or($lo.$f)),* }
    };
}

impl Settings {
    /// Fields set in `self` win over `base`.
    pub fn over(self, base: Settings) -> Settings {
        overlay!(self, base; command, kappa2, beta, theta_deg, power_mw, pulse_ms, detuning_mhz,
            wavelength_nm, linewidth_mhz, area_eff_cm2, larmor_khz, n_atoms, cycles, seed, out,
            parallel, protocol, gain, squeeze_r, kappa2_readout, input_x, input_p, thetas, runs,
            steps, omega_t, electronics_noise)
    }

    pub fn from_toml(text: &str) -> Result<Settings, CliError> {
        toml::from_str(text).map_err(|e| CliError::Usage(format!("config: {e}")))
    }

    pub fn load(path: &Path) -> Result<Settings, CliError> {
        let text = std::fs::read_to_string(path).map_err(|e| CliError::Io(format!("{}: {e}", path.display())))?;
        Self::from_toml(&text)
    }

    pub fn to_toml(&self) -> Result<String, CliError> {
        toml::to_string(self).map_err(|e| CliError::Usage(format!("config: {e}")))
    }
}

pub const DEFAULT_BETA: f64 = 0.65;
pub const DEFAULT_SEED: u64 = 1;
pub const DEFAULT_PROTOCOL_RUNS: usize = 1_000;
pub const DEFAULT_PULSE_RUNS: usize = 20_000;
pub const DEFAULT_READOUT_KAPPA2: f64 = 100.0;
pub const DEFAULT_SQUEEZE_R: f64 = 1.0;

/// Fully resolved settings for one command.
#[derive(Clone, Debug, PartialEq)]
pub struct RunConfig {
    pub command: CommandKind,
    pub physical: PhysicalParams,
    /// Coupling for `run` and `protocol` (from `kappa2`, else `theta_deg`,
    /// else the atom number) and for `timedomain` when given explicitly.
    pub kappa2: Option<f64>,
    pub theta_deg: Option<f64>,
    pub beta: f64,
    pub n_cycles: usize,
    pub seed: u64,
    pub output_path: Option<PathBuf>,
    pub parallel: Option<usize>,
    pub protocol: Option<ProtocolName>,
    pub gain: f64,
    pub squeeze_r: f64,
    pub kappa2_readout: f64,
    pub input: (f64, f64),
    pub thetas: Vec<f64>,
    pub runs: usize,
    pub steps: usize,
    pub omega_t: f64,
    pub electronics_noise: f64,
}

fn usage<T>(msg: impl Into<String>) -> Result<T, CliError> {
    Err(CliError::Usage(msg.into()))
}

impl RunConfig {
    pub fn resolve(command: CommandKind, s: Settings) -> Result<RunConfig, CliError> {
        if let Some(c) = s.command {
            if c != command {
                return usage(format!("config file was written for `{c}`, not `{command}`"));
            }
        }
        let d = PhysicalParams::default();
        let physical = PhysicalParams {
            wavelength_nm: s.wavelength_nm.unwrap_or(d.wavelength_nm),
            linewidth_mhz: s.linewidth_mhz.unwrap_or(d.linewidth_mhz),
            detuning_mhz: s.detuning_mhz.unwrap_or(d.detuning_mhz),
            power_mw: s.power_mw.unwrap_or(d.power_mw),
            pulse_ms: s.pulse_ms.unwrap_or(d.pulse_ms),
            area_eff_cm2: s.area_eff_cm2.unwrap_or(d.area_eff_cm2),
            larmor_khz: s.larmor_khz.unwrap_or(d.larmor_khz),
            n_atoms: s.n_atoms.unwrap_or(d.n_atoms),
        };
        physical.validate().map_err(|e| CliError::Usage(e.to_string()))?;

        if let Some(t) = s.theta_deg {
            if !(t.is_finite() && t >= 0.0) {
                return usage(format!("--theta-deg must be non-negative, got {t}"));
            }
        }
        let kappa2 = match command {
            CommandKind::Run | CommandKind::Protocol => Some(match (s.kappa2, s.theta_deg) {
                (Some(k), _) => k,
                (None, Some(theta)) => {
                    physics::calibrate(&physical, physics::j_x_from_theta(theta, &physical)?)?.kappa2()
                }
                (None, None) => physics::calibrate_atoms(&physical)?.kappa2(),
            }),
            CommandKind::Timedomain => s.kappa2,
            CommandKind::Calibrate | CommandKind::Sweep => None,
        };
        if let Some(k) = kappa2 {
            if !(k.is_finite() && k >= 0.0) {
                return usage(format!("--kappa2 must be non-negative, got {k}"));
            }
        }

        let beta = s.beta.unwrap_or(DEFAULT_BETA);
        if !(0.0..=1.0).contains(&beta) {
            return usage(format!("--beta must lie in [0, 1], got {beta}"));
        }
        let n_cycles = s.cycles.unwrap_or(DEFAULT_CYCLES);
        if n_cycles < 2 {
            return usage("--cycles must be at least 2");
        }
        if s.parallel == Some(0) {
            return usage("--parallel must be at least 1");
        }
        let omega_t = s.omega_t.unwrap_or_else(|| physical.larmor_phase());
        if !(omega_t.is_finite() && omega_t >= 0.0) {
            return usage(format!("--omega-t must be non-negative, got {omega_t}"));
        }
        let default_runs = match command {
            CommandKind::Timedomain => DEFAULT_PULSE_RUNS,
            _ => DEFAULT_PROTOCOL_RUNS,
        };
        let runs = s.runs.unwrap_or(default_runs);
        if runs < 2 {
            return usage("--runs must be at least 2");
        }
        let electronics_noise = s.electronics_noise.unwrap_or(0.0);
        if !(electronics_noise.is_finite() && electronics_noise >= 0.0) {
            return usage("--electronics-noise must be non-negative");
        }

        let config = RunConfig {
            command,
            physical,
            kappa2,
            theta_deg: s.theta_deg,
            beta,
            n_cycles,
            seed: s.seed.unwrap_or(DEFAULT_SEED),
            output_path: s.out,
            parallel: s.parallel,
            protocol: s.protocol,
            gain: s.gain.unwrap_or(1.0),
            squeeze_r: s.squeeze_r.unwrap_or(DEFAULT_SQUEEZE_R),
            kappa2_readout: s.kappa2_readout.unwrap_or(DEFAULT_READOUT_KAPPA2),
            input: (s.input_x.unwrap_or(0.0), s.input_p.unwrap_or(0.0)),
            thetas: s.thetas.unwrap_or_else(|| (0..=7).map(|i| 2.0 * i as f64).collect()),
            runs,
            steps: s.steps.unwrap_or_else(|| PulseConfig::min_steps(omega_t)),
            omega_t,
            electronics_noise,
        };
        match command {
            CommandKind::Protocol if config.protocol.is_none() => usage("--protocol is required"),
            CommandKind::Sweep if config.thetas.is_empty() => usage("--thetas must not be empty"),
            _ => Ok(config),
        }
    }

    /// Settings that reproduce this run. Output location and thread count
    /// do not affect results and are left out.
    pub fn to_settings(&self) -> Settings {
        let p = &self.physical;
        Settings {
            command: Some(self.command),
            kappa2: self.kappa2,
            beta: Some(self.beta),
            theta_deg: self.theta_deg,
            power_mw: Some(p.power_mw),
            pulse_ms: Some(p.pulse_ms),
            detuning_mhz: Some(p.detuning_mhz),
            wavelength_nm: Some(p.wavelength_nm),
            linewidth_mhz: Some(p.linewidth_mhz),
            area_eff_cm2: Some(p.area_eff_cm2),
            larmor_khz: Some(p.larmor_khz),
            n_atoms: Some(p.n_atoms),
            cycles: Some(self.n_cycles),
            seed: Some(self.seed),
            out: None,
            parallel: None,
            protocol: self.protocol,
            gain: Some(self.gain),
            squeeze_r: Some(self.squeeze_r),
            kappa2_readout: Some(self.kappa2_readout),
            input_x: Some(self.input.0),
            input_p: Some(self.input.1),
            thetas: Some(self.thetas.clone()),
            runs: Some(self.runs),
            steps: Some(self.steps),
            omega_t: Some(self.omega_t),
            electronics_noise: Some(self.electronics_noise),
        }
    }
}
