//! `sok superres`: zero-shot super-resolution consistency report.
//! Evaluates a (coarse-trained) checkpoint on a fine dataset and
//! checks that the truncated fine prediction matches the coarse one.

use std::path::PathBuf;

use clap::Args;
use sok_core::data::dataset::read_dataset;
use sok_core::fno::checkpoint::load_checkpoint;
use sok_core::spectral::validate_nyquist;
use sok_core::train::loss::relative_l2;
use sok_core::train::trainer::field_resample;
use sok_core::{Error, Result};

#[derive(Args)]
pub struct SuperresArgs {
    #[arg(long)]
    pub checkpoint: PathBuf,
    /// Dataset at the fine evaluation resolution.
    #[arg(long)]
    pub fine_dataset: PathBuf,
    /// Coarse resolution for the consistency check
    /// (defaults to half the fine resolution).
    #[arg(long)]
    pub coarse_res: Option<usize>,
    /// Split of the fine dataset to use.
    #[arg(long, default_value = "test")]
    pub split: String,
    #[arg(short, long)]
    pub output: PathBuf,
}

pub fn run(args: SuperresArgs) -> Result<()> {
    let model = load_checkpoint(&args.checkpoint)?;
    let dataset = read_dataset(&args.fine_dataset)?;
    let range = match args.split.as_str() {
        "train" => dataset.train_range(),
        "test" => dataset.test_range(),
        "all" => 0..dataset.header.sample_count,
        other => {
            return Err(Error::InvalidArg(format!(
                "--split must be train | test | all, got '{other}'"
            )))
        }
    };
    if range.is_empty() {
        return Err(Error::InvalidArg("requested split is empty".into()));
    }
    let fine_res = dataset.header.grid.resolution().to_vec();
    let coarse: Vec<usize> = match args.coarse_res {
        Some(r) => vec![r; fine_res.len()],
        None => fine_res.iter().map(|&n| n / 2).collect(),
    };
    for (&c, &f) in coarse.iter().zip(&fine_res) {
        if c == 0 || f % c != 0 {
            return Err(Error::InvalidArg(format!(
                "coarse resolution {c} must divide the fine resolution {f}"
            )));
        }
    }

    // warn when the coarse grid is too small for the model's modes
    let coarse_grid = dataset.header.grid.with_resolution(&coarse)?;
    let report = validate_nyquist(&model.config.n_modes, &coarse_grid)?;
    let mut warning = None;
    if !report.is_ok() {
        let msg = report.message();
        eprintln!("warning: {msg}");
        warning = Some(msg);
    }
    if report.has_hard_violation() {
        return Err(Error::Nyquist(report.message()));
    }

    let mut csv = String::from("sample,rel_l2_fine,coarse_consistency\n");
    let mut rel_sum = 0.0;
    let mut cons_sum = 0.0;
    let count = range.len();
    for i in range {
        let fine_in = &dataset.inputs[i];
        let fine_pred = model.forward_real(fine_in)?;
        let rel = relative_l2(&fine_pred, &dataset.outputs[i]);

        let coarse_in = field_resample(fine_in, &coarse)?;
        let coarse_pred = model.forward_real(&coarse_in)?;
        let truncated = field_resample(&fine_pred, &coarse)?;
        let consistency = relative_l2(&truncated, &coarse_pred);

        rel_sum += rel;
        cons_sum += consistency;
        csv.push_str(&format!("{i},{rel:.17e},{consistency:.17e}\n"));
    }
    let mean_rel = rel_sum / count as f64;
    let mean_cons = cons_sum / count as f64;
    csv.push_str(&format!("summary,{mean_rel:.17e},{mean_cons:.17e}\n"));
    if let Some(msg) = warning {
        csv.push_str(&format!("# nyquist: {msg}\n"));
    }
    csv.push_str(&format!("# invocation: {}\n", crate::invocation()));
    super::write_text(&args.output, &csv)?;
    println!(
        "fine relative L2 {mean_rel:.6e}; coarse-consistency {mean_cons:.6e} over {count} samples"
    );
    Ok(())
}
