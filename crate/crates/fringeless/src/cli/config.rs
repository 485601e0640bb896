//! Flat key/value run configuration with strict parsing and line-anchored
//! diagnostics. An empty file yields the full apparatus defaults.

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use crate::error::{Error, Result};
use crate::model::{DetectionChain, LockPoint, Modulation, OpticalField, QuadratureNoise};
use crate::synth::SynthesisPlan;

/// Experiment selected by the CLI verb or the `experiment` config key.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Experiment {
    Calibrate,
    Sensitivity,
    SqlCompare,
    AnalyzeTrace,
}

impl Experiment {
    pub fn name(&self) -> &'static str {
        match self {
            Experiment::Calibrate => "calibrate",
            Experiment::Sensitivity => "sensitivity",
            Experiment::SqlCompare => "sql-compare",
            Experiment::AnalyzeTrace => "analyze-trace",
        }
    }
}

impl FromStr for Experiment {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "calibrate" => Ok(Experiment::Calibrate),
            "sensitivity" => Ok(Experiment::Sensitivity),
            "sql-compare" => Ok(Experiment::SqlCompare),
            "analyze-trace" => Ok(Experiment::AnalyzeTrace),
            other => Err(Error::Config(format!(
                "unknown experiment '{other}'; expected calibrate | sensitivity | \
                 sql-compare | analyze-trace"
            ))),
        }
    }
}

/// Which artifacts to emit.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum OutputFormat {
    Json,
    Csv,
    #[default]
    Both,
}

impl FromStr for OutputFormat {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "json" => Ok(OutputFormat::Json),
            "csv" => Ok(OutputFormat::Csv),
            "both" => Ok(OutputFormat::Both),
            other => Err(Error::Config(format!(
                "unknown output format '{other}'; expected json | csv | both"
            ))),
        }
    }
}

/// Fully resolved run configuration.
#[derive(Debug, Clone)]
pub struct RunConfig {
    pub experiment: Option<Experiment>,
    pub plan: SynthesisPlan,
    /// Calibration sweep grid, volts.
    pub voltages_v: Vec<f64>,
    /// Reduced-range grid for the sensitivity experiment; derived from the
    /// configured slope when absent.
    pub sensitivity_voltages_v: Option<Vec<f64>>,
    pub base_seed: u64,
    pub workers: usize,
    pub snr_exclusion_threshold: f64,
    /// Detection efficiency used for photon-number and SQL arithmetic.
    pub efficiency: f64,
    /// Externally measured sensitivity for `sql-compare`, m/sqrt(Hz).
    pub measured_d_min_per_rthz_m: Option<f64>,
    /// Trace file for `analyze-trace`.
    pub trace_path: Option<PathBuf>,
    pub out_dir: PathBuf,
    pub format: OutputFormat,
}

impl Default for RunConfig {
    fn default() -> Self {
        Self {
            experiment: None,
            plan: SynthesisPlan::reference_apparatus(),
            voltages_v: (1..=10).map(|v| v as f64).collect(),
            sensitivity_voltages_v: None,
            base_seed: 1,
            workers: 0, // 0 = rayon default
            snr_exclusion_threshold: crate::calib::DEFAULT_SNR_EXCLUSION_THRESHOLD,
            efficiency: 0.667,
            measured_d_min_per_rthz_m: None,
            trace_path: None,
            out_dir: PathBuf::from("fringeless-out"),
            format: OutputFormat::Both,
        }
    }
}

const KNOWN_KEYS: &[&str] = &[
    "experiment",
    "wavelength_m",
    "signal_power_W",
    "lo_power_W",
    "refractive_index",
    "quantum_efficiency",
    "overlap",
    "rbw_Hz",
    "vbw_Hz",
    "mod_freq_Hz",
    "displacement_per_volt_m",
    "residual_jitter_rad",
    "lock_phase_rad",
    "noise",
    "amp_var",
    "phase_var_scaled",
    "sample_rate_Hz",
    "duration_s",
    "voltages_V",
    "sensitivity_voltages_V",
    "base_seed",
    "workers",
    "snr_exclusion_threshold",
    "efficiency",
    "measured_d_min_per_rtHz_m",
    "trace_path",
    "out_dir",
    "format",
];

/// Load and validate a flat `key = value` configuration file. Unknown keys
/// are rejected; diagnostics carry the offending line number.
pub fn load_config(path: &Path) -> Result<RunConfig> {
    let text = std::fs::read_to_string(path).map_err(|e| {
        Error::Config(format!("cannot read config {}: {e}", path.display()))
    })?;
    parse_config(&text)
}

/// Parse configuration text; see [`load_config`].
pub fn parse_config(text: &str) -> Result<RunConfig> {
    let mut entries: BTreeMap<&str, (String, usize)> = BTreeMap::new();
    for (idx, raw_line) in text.lines().enumerate() {
        let line_no = idx + 1;
        let line = match raw_line.find('#') {
            Some(pos) => &raw_line[..pos],
            None => raw_line,
        }
        .trim();
        if line.is_empty() {
            continue;
        }
        let (key, value) = line.split_once('=').ok_or_else(|| {
            Error::Config(format!("line {line_no}: expected 'key = value', got '{line}'"))
        })?;
        let key = key.trim();
        let value = value.trim();
        let known = KNOWN_KEYS
            .iter()
            .find(|k| **k == key)
            .ok_or_else(|| Error::Config(format!("line {line_no}: unknown key '{key}'")))?;
        if entries.insert(known, (value.to_string(), line_no)).is_some() {
            return Err(Error::Config(format!("line {line_no}: duplicate key '{key}'")));
        }
    }

    let mut cfg = RunConfig::default();
    let defaults = SynthesisPlan::reference_apparatus();

    let f64_at = |entries: &BTreeMap<&str, (String, usize)>, key: &str, default: f64| -> Result<f64> {
        match entries.get(key) {
            None => Ok(default),
            Some((v, line)) => v.parse::<f64>().map_err(|_| {
                Error::Config(format!("line {line}: key '{key}': '{v}' is not a number"))
            }),
        }
    };
    let line_of = |entries: &BTreeMap<&str, (String, usize)>, key: &str| -> String {
        entries
            .get(key)
            .map(|(_, l)| format!("line {l}: "))
            .unwrap_or_default()
    };

    if let Some((v, line)) = entries.get("experiment") {
        cfg.experiment = Some(
            v.parse::<Experiment>()
                .map_err(|e| Error::Config(format!("line {line}: {e}")))?,
        );
    }

    let wavelength = f64_at(&entries, "wavelength_m", defaults.field.wavelength_m)?;
    let signal_power = f64_at(&entries, "signal_power_W", defaults.field.signal_power_w)?;
    let lo_power = f64_at(&entries, "lo_power_W", defaults.field.lo_power_w)?;
    let index = f64_at(&entries, "refractive_index", defaults.field.refractive_index)?;
    let field = OpticalField::new(wavelength, signal_power, lo_power, index)
        .map_err(|e| Error::Config(format!("{}{e}", line_of(&entries, "wavelength_m"))))?;

    let qe = f64_at(&entries, "quantum_efficiency", defaults.det.quantum_efficiency)?;
    let overlap = f64_at(&entries, "overlap", defaults.det.overlap)?;
    let rbw = f64_at(&entries, "rbw_Hz", defaults.det.rbw_hz)?;
    let vbw = f64_at(&entries, "vbw_Hz", defaults.det.vbw_hz)?;
    let det = DetectionChain::new(qe, overlap, rbw, vbw).map_err(|e| {
        let anchor = if !(rbw > 0.0) {
            line_of(&entries, "rbw_Hz")
        } else {
            line_of(&entries, "vbw_Hz")
        };
        Error::Config(format!("{anchor}{e}"))
    })?;

    let mod_freq = f64_at(&entries, "mod_freq_Hz", defaults.modulation.frequency_hz)?;
    let dpv = f64_at(
        &entries,
        "displacement_per_volt_m",
        defaults.modulation.displacement_per_volt_m,
    )?;
    let modulation = Modulation::new(mod_freq, dpv, 0.0)
        .map_err(|e| Error::Config(format!("{}{e}", line_of(&entries, "mod_freq_Hz"))))?;

    let jitter = f64_at(&entries, "residual_jitter_rad", defaults.lock.residual_jitter_rad)?;
    let lock_phase = f64_at(&entries, "lock_phase_rad", std::f64::consts::FRAC_PI_2)?;
    let lock = LockPoint::new(lock_phase, jitter)
        .map_err(|e| Error::Config(format!("{}{e}", line_of(&entries, "residual_jitter_rad"))))?;

    let noise = match entries.get("noise").map(|(v, l)| (v.as_str(), *l)) {
        None | Some(("on", _)) => {
            let amp = f64_at(&entries, "amp_var", QuadratureNoise::SHOT_NOISE_VAR)?;
            let phase = f64_at(&entries, "phase_var_scaled", QuadratureNoise::SHOT_NOISE_VAR)?;
            Some(QuadratureNoise::new(amp, phase).map_err(|e| {
                Error::Config(format!("{}{e}", line_of(&entries, "amp_var")))
            })?)
        }
        Some(("off", _)) => None,
        Some((other, line)) => {
            return Err(Error::Config(format!(
                "line {line}: key 'noise': expected on | off, got '{other}'"
            )))
        }
    };

    cfg.plan = SynthesisPlan {
        field,
        det,
        modulation,
        lock,
        noise,
        sample_rate_hz: f64_at(&entries, "sample_rate_Hz", defaults.sample_rate_hz)?,
        duration_s: f64_at(&entries, "duration_s", defaults.duration_s)?,
        rng_seed: cfg.base_seed,
    };
    cfg.plan
        .validate()
        .map_err(|e| Error::Config(format!("{}{e}", line_of(&entries, "sample_rate_Hz"))))?;

    if let Some((v, line)) = entries.get("voltages_V") {
        cfg.voltages_v = parse_voltage_list(v, *line)?;
    }
    if let Some((v, line)) = entries.get("sensitivity_voltages_V") {
        cfg.sensitivity_voltages_v = Some(parse_voltage_list(v, *line)?);
    }
    if let Some((v, line)) = entries.get("base_seed") {
        cfg.base_seed = v.parse::<u64>().map_err(|_| {
            Error::Config(format!("line {line}: key 'base_seed': '{v}' is not a u64"))
        })?;
        cfg.plan.rng_seed = cfg.base_seed;
    }
    if let Some((v, line)) = entries.get("workers") {
        cfg.workers = v.parse::<usize>().map_err(|_| {
            Error::Config(format!("line {line}: key 'workers': '{v}' is not an integer"))
        })?;
    }
    cfg.snr_exclusion_threshold = f64_at(
        &entries,
        "snr_exclusion_threshold",
        crate::calib::DEFAULT_SNR_EXCLUSION_THRESHOLD,
    )?;
    cfg.efficiency = f64_at(&entries, "efficiency", 0.667)?;
    if !(cfg.efficiency > 0.0 && cfg.efficiency <= 1.0) {
        return Err(Error::Config(format!(
            "{}efficiency must be in (0, 1], got {}",
            line_of(&entries, "efficiency"),
            cfg.efficiency
        )));
    }
    if entries.contains_key("measured_d_min_per_rtHz_m") {
        cfg.measured_d_min_per_rthz_m =
            Some(f64_at(&entries, "measured_d_min_per_rtHz_m", 0.0)?);
    }
    if let Some((v, _)) = entries.get("trace_path") {
        cfg.trace_path = Some(PathBuf::from(v));
    }
    if let Some((v, _)) = entries.get("out_dir") {
        cfg.out_dir = PathBuf::from(v);
    }
    if let Some((v, line)) = entries.get("format") {
        cfg.format = v
            .parse::<OutputFormat>()
            .map_err(|e| Error::Config(format!("line {line}: {e}")))?;
    }

    Ok(cfg)
}

fn parse_voltage_list(value: &str, line: usize) -> Result<Vec<f64>> {
    let grid: Vec<f64> = value
        .split(',')
        .map(|p| {
            p.trim().parse::<f64>().map_err(|_| {
                Error::Config(format!("line {line}: '{p}' is not a voltage"))
            })
        })
        .collect::<Result<_>>()?;
    if grid.is_empty() {
        return Err(Error::Config(format!("line {line}: voltage grid must be nonempty")));
    }
    Ok(grid)
}
