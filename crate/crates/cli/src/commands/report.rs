//! `sok report`: render a history CSV as an SVG line plot.

use std::path::PathBuf;

use clap::Args;
use sok_core::{Error, Result};

use crate::svg::{line_plot, Series};

#[derive(Args)]
pub struct ReportArgs {
    /// History CSV (first column is the x axis).
    #[arg(long)]
    pub history: PathBuf,
    /// Comma-separated column names to plot (default: every numeric
    /// column).
    #[arg(long)]
    pub series: Option<String>,
    /// Logarithmic y axis with decade ticks.
    #[arg(long, default_value_t = false)]
    pub log_y: bool,
    #[arg(short, long)]
    pub output: PathBuf,
}

pub fn run(args: ReportArgs) -> Result<()> {
    let text = std::fs::read_to_string(&args.history)?;
    let mut lines = text
        .lines()
        .filter(|l| !l.trim().is_empty() && !l.trim_start().starts_with('#'));
    let header = lines
        .next()
        .ok_or_else(|| Error::Format("history CSV is empty".into()))?;
    let columns: Vec<String> = header.split(',').map(|c| c.trim().to_string()).collect();
    if columns.len() < 2 {
        return Err(Error::Format("history CSV needs at least two columns".into()));
    }

    let selected: Vec<String> = match &args.series {
        Some(list) => list.split(',').map(|s| s.trim().to_string()).collect(),
        None => columns[1..].to_vec(),
    };
    for name in &selected {
        if !columns.contains(name) {
            return Err(Error::InvalidArg(format!(
                "column '{name}' not in the CSV header ({})",
                columns.join(", ")
            )));
        }
    }

    let mut series: Vec<Series> = selected
        .iter()
        .map(|name| Series {
            name: name.clone(),
            points: Vec::new(),
        })
        .collect();
    let mut n_rows = 0usize;
    for line in lines {
        let cells: Vec<&str> = line.split(',').collect();
        // skip non-numeric rows such as a trailing summary
        let Ok(x) = cells[0].trim().parse::<f64>() else {
            continue;
        };
        for (s, name) in series.iter_mut().zip(&selected) {
            let idx = columns.iter().position(|c| c == name).unwrap();
            if let Some(cell) = cells.get(idx) {
                if let Ok(y) = cell.trim().parse::<f64>() {
                    s.points.push((x, y));
                }
            }
        }
        n_rows += 1;
    }
    if n_rows == 0 {
        return Err(Error::Format("history CSV has no data rows".into()));
    }

    let title = format!("{}", args.history.display());
    let svg = line_plot(&title, &series, args.log_y)?;
    super::write_text(&args.output, &svg)?;
    println!(
        "plotted {} series over {} rows to {}",
        series.len(),
        n_rows,
        args.output.display()
    );
    Ok(())
}
