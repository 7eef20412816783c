//! `sok eval`: per-sample metrics of a checkpoint on a dataset split.

use std::path::PathBuf;

use clap::Args;
use sok_core::data::dataset::read_dataset;
use sok_core::fno::checkpoint::load_checkpoint;
use sok_core::train::trainer::evaluate;
use sok_core::{Error, Result};

#[derive(Args)]
pub struct EvalArgs {
    #[arg(long)]
    pub checkpoint: PathBuf,
    #[arg(long)]
    pub dataset: PathBuf,
    /// Which split to evaluate: train | test | all.
    #[arg(long, default_value = "test")]
    pub split: String,
    #[arg(short, long)]
    pub output: PathBuf,
}

pub fn run(args: EvalArgs) -> Result<()> {
    let model = load_checkpoint(&args.checkpoint)?;
    let dataset = read_dataset(&args.dataset)?;
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
        return Err(Error::InvalidArg(format!(
            "the '{}' split of {} is empty",
            args.split,
            args.dataset.display()
        )));
    }
    let offset = range.start;
    let report = evaluate(&model, &dataset, range)?;

    let mut csv = String::from("sample,rel_l2,h1\n");
    for (i, (rel, h1)) in report
        .per_sample_rel_l2
        .iter()
        .zip(&report.per_sample_h1)
        .enumerate()
    {
        csv.push_str(&format!("{},{rel:.17e},{h1:.17e}\n", offset + i));
    }
    csv.push_str(&format!(
        "summary,{:.17e},{:.17e}\n",
        report.mean_rel_l2, report.mean_h1
    ));
    csv.push_str(&format!("# invocation: {}\n", crate::invocation()));
    super::write_text(&args.output, &csv)?;
    println!(
        "split {}: mean relative L2 {:.6e} over {} samples",
        args.split,
        report.mean_rel_l2,
        report.per_sample_rel_l2.len()
    );
    Ok(())
}
