//! `sok diagnose`: spectral hygiene report for a dataset — per-mode
//! mean power, a recommended mode count, and an aliasing flag based on
//! the energy parked near the Nyquist band.

use std::path::PathBuf;

use clap::Args;
use sok_core::data::dataset::read_dataset;
use sok_core::spectral::shell_power_1d;
use sok_core::{RealTensor, Result};

#[derive(Args)]
pub struct DiagnoseArgs {
    #[arg(long)]
    pub dataset: PathBuf,
    /// Energy fraction a mode block must capture for the
    /// recommendation.
    #[arg(long, default_value_t = 0.999)]
    pub energy_ratio: f64,
    /// Tail band (fraction of Nyquist) inspected for fold-back energy.
    #[arg(long, default_value_t = 0.75)]
    pub tail_band: f64,
    /// Tail energy fraction above which the aliasing flag is raised.
    #[arg(long, default_value_t = 1e-6)]
    pub tail_threshold: f64,
    #[arg(short, long)]
    pub output: PathBuf,
}

fn mean_shells(fields: &[RealTensor], channels: usize) -> Result<Vec<f64>> {
    let mut mean: Vec<f64> = Vec::new();
    for field in fields {
        let spatial: Vec<usize> = field.shape()[1..].to_vec();
        let per_chan = field.len() / channels;
        for c in 0..channels {
            let chan = RealTensor::from_data(
                &spatial,
                field.data()[c * per_chan..(c + 1) * per_chan].to_vec(),
            )?;
            let shells = shell_power_1d(&chan)?;
            if mean.len() < shells.len() {
                mean.resize(shells.len(), 0.0);
            }
            for (a, b) in mean.iter_mut().zip(&shells) {
                *a += b;
            }
        }
    }
    let count = (fields.len() * channels) as f64;
    for v in &mut mean {
        *v /= count;
    }
    Ok(mean)
}

/// Fraction of the total shell energy sitting above
/// `tail_band * max_shell`.
pub(crate) fn tail_energy_fraction(shells: &[f64], tail_band: f64) -> f64 {
    let total: f64 = shells.iter().sum();
    if total <= 0.0 {
        return 0.0;
    }
    let start = ((shells.len() - 1) as f64 * tail_band).ceil() as usize;
    shells[start.min(shells.len() - 1)..].iter().sum::<f64>() / total
}

/// Smallest symmetric centered block capturing `ratio` of the energy.
pub(crate) fn recommended_n_modes(shells: &[f64], ratio: f64) -> usize {
    let total: f64 = shells.iter().sum();
    if total <= 0.0 {
        return 1;
    }
    let mut acc = 0.0;
    for (k, &p) in shells.iter().enumerate() {
        acc += p;
        if acc >= ratio * total {
            return 2 * k + 1;
        }
    }
    2 * (shells.len() - 1) + 1
}

pub fn run(args: DiagnoseArgs) -> Result<()> {
    let dataset = read_dataset(&args.dataset)?;
    let in_shells = mean_shells(&dataset.inputs, dataset.header.input_shape[0])?;
    let out_shells = mean_shells(&dataset.outputs, dataset.header.output_shape[0])?;

    let recommend = recommended_n_modes(&in_shells, args.energy_ratio)
        .max(recommended_n_modes(&out_shells, args.energy_ratio));
    let tail_in = tail_energy_fraction(&in_shells, args.tail_band);
    let tail_out = tail_energy_fraction(&out_shells, args.tail_band);
    let tail = tail_in.max(tail_out);
    let aliasing_suspect = tail > args.tail_threshold;

    let mut csv = String::from("mode,input_power,output_power\n");
    for k in 0..in_shells.len().max(out_shells.len()) {
        let pi = in_shells.get(k).copied().unwrap_or(0.0);
        let po = out_shells.get(k).copied().unwrap_or(0.0);
        csv.push_str(&format!("{k},{pi:.17e},{po:.17e}\n"));
    }
    csv.push_str(&format!("# recommended_n_modes: {recommend}\n"));
    csv.push_str(&format!("# tail_energy_fraction: {tail:.17e}\n"));
    csv.push_str(&format!("# aliasing_suspect: {aliasing_suspect}\n"));
    csv.push_str(&format!("# invocation: {}\n", crate::invocation()));
    super::write_text(&args.output, &csv)?;

    println!(
        "recommended n_modes {recommend}; tail energy fraction {tail:.3e}{}",
        if aliasing_suspect {
            " (aliasing suspected)"
        } else {
            ""
        }
    );
    Ok(())
}
