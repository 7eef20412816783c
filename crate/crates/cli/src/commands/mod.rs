pub mod diagnose;
pub mod eval;
pub mod extend;
pub mod gen;
pub mod report;
pub mod rollout;
pub mod superres;
pub mod train;

use std::path::Path;

use sok_core::{Error, RealTensor, Result};

/// Write a CSV body that already carries its trailing invocation
/// comment line.
pub(crate) fn write_text(path: &Path, content: &str) -> Result<()> {
    std::fs::write(path, content)?;
    Ok(())
}

/// Parse a 1-d signal from a CSV file: the last column of each data
/// row, skipping a non-numeric header and comment lines.
pub(crate) fn read_signal_csv(path: &Path) -> Result<Vec<f64>> {
    let text = std::fs::read_to_string(path)?;
    let mut values = Vec::new();
    for line in text.lines() {
        let line = line.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        let last = line.split(',').next_back().unwrap_or("").trim();
        match last.parse::<f64>() {
            Ok(v) => values.push(v),
            Err(_) => {
                if values.is_empty() {
                    continue; // header row
                }
                return Err(Error::Format(format!(
                    "{}: cannot parse '{last}' as a number",
                    path.display()
                )));
            }
        }
    }
    if values.is_empty() {
        return Err(Error::Format(format!(
            "{}: no numeric rows found",
            path.display()
        )));
    }
    Ok(values)
}

pub(crate) fn write_signal_csv(path: &Path, values: &[f64], invocation: &str) -> Result<()> {
    let mut out = String::from("index,value\n");
    for (i, v) in values.iter().enumerate() {
        out.push_str(&format!("{i},{v:.17e}\n"));
    }
    out.push_str(&format!("# invocation: {invocation}\n"));
    write_text(path, &out)
}

/// Single-channel [1, N..] view of a bare spatial field.
pub(crate) fn as_channel_field(field: &RealTensor) -> Result<RealTensor> {
    let mut shape = vec![1usize];
    shape.extend_from_slice(field.shape());
    RealTensor::from_data(&shape, field.data().to_vec())
}
