//! On-disk formats: record header + raw sample files, CSV import/export,
//! and JSON helpers.
//!
//! A record is stored as a small JSON header describing the layout plus a
//! raw binary of channel-major little-endian `f64` samples next to it. All
//! JSON is written pretty-printed with a trailing newline and stable field
//! order, so identical inputs produce byte-identical files.

use crate::error::{Error, Result};
use crate::signal::{CorrelationFunction, MultichannelRecord};
use serde::{de::DeserializeOwned, Deserialize, Serialize};
use std::fs;
use std::io::{BufWriter, Write};
use std::path::Path;

/// The JSON header that accompanies a raw sample file.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RecordHeader {
    pub n_channels: usize,
    pub sample_rate: f64,
    /// Samples per channel.
    pub length: usize,
    /// Always `"f64-le"`; refused otherwise so silent misreads are
    /// impossible.
    pub sample_format: String,
    /// Name of the raw sample file, relative to the header's directory.
    pub data_file: String,
}

/// The only sample encoding this build reads and writes.
pub const SAMPLE_FORMAT: &str = "f64-le";

/// Write `record` as a JSON header at `header_path` plus a raw sample file
/// with the same stem and the `.raw` extension in the same directory.
pub fn save_record(record: &MultichannelRecord, header_path: &Path) -> Result<()> {
    let data_path = header_path.with_extension("raw");
    let data_file = data_path
        .file_name()
        .ok_or_else(|| Error::Parameter(format!("invalid record path {header_path:?}")))?
        .to_string_lossy()
        .into_owned();
    let header = RecordHeader {
        n_channels: record.n_channels(),
        sample_rate: record.sample_rate,
        length: record.len(),
        sample_format: SAMPLE_FORMAT.to_string(),
        data_file,
    };
    save_json(&header, header_path)?;

    let mut writer = BufWriter::new(fs::File::create(&data_path)?);
    for channel in &record.channels {
        for v in channel {
            writer.write_all(&v.to_le_bytes())?;
        }
    }
    writer.flush()?;
    Ok(())
}

/// Read a record back from its JSON header.
pub fn load_record(header_path: &Path) -> Result<MultichannelRecord> {
    let header: RecordHeader = load_json(header_path)?;
    if header.sample_format != SAMPLE_FORMAT {
        return Err(Error::Parameter(format!(
            "unsupported sample_format {:?}; this build reads {SAMPLE_FORMAT:?}",
            header.sample_format
        )));
    }
    let data_path = header_path
        .parent()
        .unwrap_or_else(|| Path::new(""))
        .join(&header.data_file);
    let bytes = fs::read(&data_path)?;
    let expected = header
        .n_channels
        .checked_mul(header.length)
        .and_then(|n| n.checked_mul(8))
        .ok_or_else(|| Error::Parameter("record dimensions overflow".into()))?;
    if bytes.len() != expected {
        return Err(Error::Parameter(format!(
            "data file {data_path:?} holds {} bytes but the header implies {expected} \
             ({} channels x {} samples x 8)",
            bytes.len(),
            header.n_channels,
            header.length
        )));
    }
    let mut channels = Vec::with_capacity(header.n_channels);
    for c in 0..header.n_channels {
        let start = c * header.length * 8;
        let channel: Vec<f64> = bytes[start..start + header.length * 8]
            .chunks_exact(8)
            .map(|b| f64::from_le_bytes(b.try_into().expect("chunks_exact yields 8 bytes")))
            .collect();
        channels.push(channel);
    }
    MultichannelRecord::new(header.sample_rate, channels)
}

/// Import a record from CSV: a header row, then one column per channel.
/// CSV carries no rate, so the caller supplies it.
pub fn load_record_csv(path: &Path, sample_rate: f64) -> Result<MultichannelRecord> {
    let mut reader = csv::Reader::from_path(path)?;
    let n_channels = reader.headers()?.len();
    let mut channels: Vec<Vec<f64>> = vec![Vec::new(); n_channels];
    for (row_idx, row) in reader.records().enumerate() {
        let row = row?;
        if row.len() != n_channels {
            return Err(Error::Parameter(format!(
                "CSV row {} has {} fields, expected {n_channels}",
                row_idx + 2,
                row.len()
            )));
        }
        for (c, field) in row.iter().enumerate() {
            let v: f64 = field.trim().parse().map_err(|_| {
                Error::Parameter(format!(
                    "CSV row {}, column {}: {field:?} is not a number",
                    row_idx + 2,
                    c + 1
                ))
            })?;
            channels[c].push(v);
        }
    }
    MultichannelRecord::new(sample_rate, channels)
}

/// Export a correlation function as `lag,value` rows.
pub fn save_correlation_csv(ccf: &CorrelationFunction, path: &Path) -> Result<()> {
    let mut writer = csv::Writer::from_path(path)?;
    writer.write_record(["lag", "value"])?;
    for (lag, value) in ccf.lags.iter().zip(&ccf.values) {
        writer.serialize((lag, value))?;
    }
    writer.flush()?;
    Ok(())
}

/// Export per-pass learning diagnostics as `pass,mean_update_norm` rows
/// (passes numbered from 1).
pub fn save_convergence_csv(pass_norms: &[f64], path: &Path) -> Result<()> {
    let mut writer = csv::Writer::from_path(path)?;
    writer.write_record(["pass", "mean_update_norm"])?;
    for (i, norm) in pass_norms.iter().enumerate() {
        writer.serialize((i + 1, norm))?;
    }
    writer.flush()?;
    Ok(())
}

/// Write any serializable value as pretty JSON with a trailing newline.
pub fn save_json<T: Serialize>(value: &T, path: &Path) -> Result<()> {
    let mut text = serde_json::to_string_pretty(value)?;
    text.push('\n');
    fs::write(path, text)?;
    Ok(())
}

/// Read a JSON file into any deserializable value.
pub fn load_json<T: DeserializeOwned>(path: &Path) -> Result<T> {
    let text = fs::read_to_string(path)?;
    Ok(serde_json::from_str(&text)?)
}
