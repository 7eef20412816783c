//! `sok rollout`: apply a checkpoint recursively to its own
//! predictions, writing the trajectory and an optional per-step error
//! report against the exact heat evolution.

use std::path::PathBuf;

use clap::Args;
use sok_core::data::heat_operator_exact;
use sok_core::fno::checkpoint::load_checkpoint;
use sok_core::grid::GridSpec;
use sok_core::train::loss::relative_l2;
use sok_core::train::trainer::rollout;
use sok_core::{RealTensor, Result};

use super::{as_channel_field, read_signal_csv};

#[derive(Args)]
pub struct RolloutArgs {
    #[arg(long)]
    pub checkpoint: PathBuf,
    /// Initial condition: CSV with one value per row.
    #[arg(long)]
    pub u0: PathBuf,
    #[arg(long)]
    pub steps: usize,
    /// Residual-target mode: the model output is added to the state.
    #[arg(long, default_value_t = false)]
    pub residual: bool,
    /// Compare against the exact heat trajectory with this nu
    /// (the model's one-step horizon is --t per step).
    #[arg(long)]
    pub exact_heat_nu: Option<f64>,
    /// Time per step for the exact-heat comparison.
    #[arg(long, default_value_t = 1.0)]
    pub t: f64,
    /// Per-step error CSV (needs --exact-heat-nu).
    #[arg(long)]
    pub errors: Option<PathBuf>,
    /// Trajectory CSV output.
    #[arg(short, long)]
    pub output: PathBuf,
}

pub fn run(args: RolloutArgs) -> Result<()> {
    let model = load_checkpoint(&args.checkpoint)?;
    let values = read_signal_csv(&args.u0)?;
    let n = values.len();
    let u0 = RealTensor::from_vec(values);

    let step = |u: &RealTensor| -> Result<RealTensor> {
        let pred = model.forward_real(&as_channel_field(u)?)?;
        RealTensor::from_data(u.shape(), pred.data().to_vec())
    };
    let trajectory = rollout(step, &u0, args.steps, args.residual)?;

    let mut csv = String::from("step");
    for i in 0..n {
        csv.push_str(&format!(",x{i}"));
    }
    csv.push('\n');
    for (s, state) in trajectory.iter().enumerate() {
        csv.push_str(&s.to_string());
        for v in state.data() {
            csv.push_str(&format!(",{v:.17e}"));
        }
        csv.push('\n');
    }
    csv.push_str(&format!("# invocation: {}\n", crate::invocation()));
    super::write_text(&args.output, &csv)?;

    if let Some(nu) = args.exact_heat_nu {
        let grid = GridSpec::periodic_unit(&[n]);
        let mut err_csv = String::from("step,rel_l2\n");
        let mut exact = u0.clone();
        err_csv.push_str("0,0.0\n");
        for (s, state) in trajectory.iter().enumerate().skip(1) {
            exact = heat_operator_exact(&exact, nu, args.t, &grid)?;
            let rel = relative_l2(state, &exact);
            err_csv.push_str(&format!("{s},{rel:.17e}\n"));
        }
        err_csv.push_str(&format!("# invocation: {}\n", crate::invocation()));
        if let Some(path) = &args.errors {
            super::write_text(path, &err_csv)?;
        } else {
            print!("{err_csv}");
        }
    }
    println!(
        "rolled out {} steps; trajectory with {} states written to {}",
        args.steps,
        trajectory.len(),
        args.output.display()
    );
    Ok(())
}
