//! Trace file format: `#`-prefixed header lines carrying key/value metadata,
//! then one sample per row (optionally `time,value` rows with a uniform time
//! column). Serialization uses shortest round-trip float formatting, so a
//! write/ingest cycle is bit-exact.

use std::collections::BTreeMap;
use std::io::Write;
use std::path::Path;

use crate::error::{Error, Result};
use crate::synth::{PhotocurrentTrace, TraceMetadata};

const MAGIC: &str = "fringeless-trace v1";

/// Serialize a trace to CSV with header metadata.
pub fn write_trace(trace: &PhotocurrentTrace, path: &Path) -> Result<()> {
    let mut buffer = String::with_capacity(trace.samples.len() * 20 + 256);
    buffer.push_str(&format!("# {MAGIC}\n"));
    buffer.push_str(&format!("# sample_rate_Hz = {}\n", trace.sample_rate_hz));
    let units = if trace.metadata.units.is_empty() {
        "simulation"
    } else {
        &trace.metadata.units
    };
    buffer.push_str(&format!("# units = {units}\n"));
    if let Some(v) = trace.metadata.lock_phase_rad {
        buffer.push_str(&format!("# lock_phase_rad = {v}\n"));
    }
    if let Some(v) = trace.metadata.drive_voltage_v {
        buffer.push_str(&format!("# drive_voltage_V = {v}\n"));
    }
    if let Some(v) = trace.metadata.mod_freq_hz {
        buffer.push_str(&format!("# mod_freq_Hz = {v}\n"));
    }
    for (key, value) in &trace.metadata.extra {
        buffer.push_str(&format!("# {key} = {value}\n"));
    }
    for s in &trace.samples {
        buffer.push_str(&format!("{s}\n"));
    }
    let tmp = path.with_extension("tmp");
    {
        let mut file = std::fs::File::create(&tmp)?;
        file.write_all(buffer.as_bytes())?;
    }
    std::fs::rename(&tmp, path)?;
    Ok(())
}

/// Ingest a trace file, validating sample finiteness and time-column
/// uniformity (1 ppm). Header keys beyond the known set are preserved as
/// free-form metadata.
pub fn ingest_trace(path: &Path) -> Result<PhotocurrentTrace> {
    let text = std::fs::read_to_string(path).map_err(|e| Error::Ingestion {
        row: None,
        msg: format!("cannot read {}: {e}", path.display()),
    })?;
    let mut metadata = TraceMetadata::default();
    let mut header_rate: Option<f64> = None;
    let mut samples = Vec::new();
    let mut times: Vec<f64> = Vec::new();
    let mut extra = BTreeMap::new();

    for (idx, raw) in text.lines().enumerate() {
        let row = idx + 1;
        let line = raw.trim();
        if line.is_empty() {
            continue;
        }
        if let Some(header) = line.strip_prefix('#') {
            let header = header.trim();
            if header == MAGIC || header.is_empty() {
                continue;
            }
            let Some((key, value)) = header.split_once('=') else {
                continue; // free-form comment
            };
            let key = key.trim();
            let value = value.trim();
            let parse = |v: &str| -> Result<f64> {
                v.parse::<f64>().map_err(|_| Error::Ingestion {
                    row: Some(row),
                    msg: format!("header key '{key}': '{v}' is not a number"),
                })
            };
            match key {
                "sample_rate_Hz" => header_rate = Some(parse(value)?),
                "units" => metadata.units = value.to_string(),
                "lock_phase_rad" => metadata.lock_phase_rad = Some(parse(value)?),
                "drive_voltage_V" => metadata.drive_voltage_v = Some(parse(value)?),
                "mod_freq_Hz" => metadata.mod_freq_hz = Some(parse(value)?),
                _ => {
                    extra.insert(key.to_string(), value.to_string());
                }
            }
            continue;
        }
        // Data row: `value` or `time,value`.
        let value_str = match line.split_once(',') {
            None => line,
            Some((t, v)) => {
                let t: f64 = t.trim().parse().map_err(|_| Error::Ingestion {
                    row: Some(row),
                    msg: format!("'{t}' is not a timestamp"),
                })?;
                times.push(t);
                v.trim()
            }
        };
        let value: f64 = value_str.parse().map_err(|_| Error::Ingestion {
            row: Some(row),
            msg: format!("'{value_str}' is not a sample value"),
        })?;
        if !value.is_finite() {
            return Err(Error::Ingestion {
                row: Some(row),
                msg: format!("non-finite sample {value_str}"),
            });
        }
        samples.push(value);
    }

    if samples.is_empty() {
        return Err(Error::Ingestion {
            row: None,
            msg: "no samples in trace file".into(),
        });
    }
    if !times.is_empty() && times.len() != samples.len() {
        return Err(Error::Ingestion {
            row: None,
            msg: "mixed `value` and `time,value` rows".into(),
        });
    }

    // Time column, when present, must be uniform to 1 ppm and consistent
    // with any declared sample rate.
    let mut rate = header_rate;
    if times.len() >= 2 {
        let dt0 = times[1] - times[0];
        if !(dt0 > 0.0) {
            return Err(Error::Ingestion {
                row: Some(2),
                msg: "time column must be strictly increasing".into(),
            });
        }
        for (i, w) in times.windows(2).enumerate() {
            let dt = w[1] - w[0];
            if ((dt - dt0) / dt0).abs() > 1e-6 {
                return Err(Error::Ingestion {
                    row: Some(i + 2),
                    msg: format!(
                        "non-uniform time step: {dt} s against {dt0} s (1 ppm tolerance)"
                    ),
                });
            }
        }
        let derived = 1.0 / dt0;
        match rate {
            None => rate = Some(derived),
            Some(r) => {
                if ((r - derived) / derived).abs() > 1e-6 {
                    return Err(Error::Ingestion {
                        row: None,
                        msg: format!(
                            "sample_rate_Hz header {r} disagrees with the time column rate {derived}"
                        ),
                    });
                }
            }
        }
    }
    let sample_rate_hz = rate.ok_or_else(|| Error::Ingestion {
        row: None,
        msg: "missing mandatory header key sample_rate_Hz (and no time column)".into(),
    })?;
    if !(sample_rate_hz > 0.0) {
        return Err(Error::Ingestion {
            row: None,
            msg: format!("sample_rate_Hz must be > 0, got {sample_rate_hz}"),
        });
    }

    metadata.extra = extra;
    if metadata.units.is_empty() {
        metadata.units = "unknown".into();
    }
    let start_time_s = times.first().copied().unwrap_or(0.0);
    Ok(PhotocurrentTrace {
        samples,
        sample_rate_hz,
        start_time_s,
        metadata,
    })
}
