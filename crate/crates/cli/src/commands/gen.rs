//! `sok gen`: benchmark dataset generation.

use std::path::PathBuf;

use clap::Args;
use sok_core::data::dataset::{write_dataset, DatasetFile};
use sok_core::data::{
    burgers_solve, heat_operator_exact, poisson_solve_exact, sample_grf, GrfSpec,
};
use sok_core::{Error, RealTensor, Result};

use super::as_channel_field;

#[derive(Args)]
pub struct GenArgs {
    /// Problem family: heat | poisson | burgers.
    #[arg(long)]
    pub problem: String,
    /// Training sample count.
    #[arg(long, default_value_t = 200)]
    pub n: usize,
    /// Held-out test sample count appended after the training split.
    #[arg(long, default_value_t = 0)]
    pub n_test: usize,
    /// Per-axis resolution.
    #[arg(long, default_value_t = 64)]
    pub res: usize,
    /// Spatial dimension (heat supports 1 or 2).
    #[arg(long, default_value_t = 1)]
    pub dim: usize,
    /// Viscosity / diffusivity.
    #[arg(long, default_value_t = 0.05)]
    pub nu: f64,
    /// Final time (heat) or integration horizon (burgers).
    #[arg(long, default_value_t = 1.0)]
    pub t: f64,
    /// Time step for the Burgers integrator.
    #[arg(long, default_value_t = 1e-3)]
    pub dt: f64,
    /// GRF spectral decay exponent.
    #[arg(long, default_value_t = 1.5)]
    pub gamma: f64,
    /// GRF band limit (highest active mode).
    #[arg(long, default_value_t = 5)]
    pub kmax: usize,
    #[arg(long)]
    pub seed: Option<u64>,
    /// Output FNOD path.
    #[arg(short, long)]
    pub output: PathBuf,
}

pub fn run(args: GenArgs) -> Result<()> {
    let seed = crate::resolve_seed(args.seed);
    let total = args.n + args.n_test;
    if args.n == 0 {
        return Err(Error::InvalidArg("need at least one training sample".into()));
    }
    if args.dim == 0 || args.dim > 2 {
        return Err(Error::InvalidArg("--dim must be 1 or 2".into()));
    }
    let grf = GrfSpec {
        resolution: vec![args.res; args.dim],
        domain_length: vec![2.0 * std::f64::consts::PI; args.dim],
        gamma: args.gamma,
        k_max: args.kmax,
        seed,
    };
    grf.validate()?;
    let grid = grf.grid();

    let mut inputs = Vec::with_capacity(total);
    let mut outputs = Vec::with_capacity(total);
    for index in 0..total {
        let input = sample_grf(&grf, index as u64)?;
        let output: RealTensor = match args.problem.to_ascii_lowercase().as_str() {
            "heat" => heat_operator_exact(&input, args.nu, args.t, &grid)?,
            "poisson" => {
                if args.dim != 1 {
                    return Err(Error::InvalidArg("poisson generation is 1-d".into()));
                }
                poisson_solve_exact(&input, &grid)?
            }
            "burgers" => {
                if args.dim != 1 {
                    return Err(Error::InvalidArg("burgers generation is 1-d".into()));
                }
                let steps = (args.t / args.dt).round() as usize;
                burgers_solve(&input, args.nu, args.dt, steps.max(1), &grid)?
            }
            other => {
                return Err(Error::InvalidArg(format!(
                    "unknown problem '{other}' (expected heat | poisson | burgers)"
                )))
            }
        };
        inputs.push(as_channel_field(&input)?);
        outputs.push(as_channel_field(&output)?);
    }

    let dataset = DatasetFile::new(grid, inputs, outputs, args.n)?;
    write_dataset(&dataset, &args.output)?;
    println!(
        "wrote {} samples ({} train, {} test) to {}",
        total,
        args.n,
        args.n_test,
        args.output.display()
    );
    Ok(())
}
