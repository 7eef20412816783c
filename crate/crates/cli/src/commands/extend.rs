//! `sok extend`: periodic extension of a signal file with seam metrics
//! and an optional spectral-derivative accuracy comparison.

use std::path::PathBuf;

use clap::Args;
use sok_core::extension::{extend_1d, ExtensionMethod, ExtensionOperator};
use sok_core::grid::GridSpec;
use sok_core::spectral::spectral_derivative;
use sok_core::{ComplexTensor, Error, Result};

use super::read_signal_csv;

#[derive(Args)]
pub struct ExtendArgs {
    /// Signal CSV (one value per row; a header row is allowed).
    #[arg(long)]
    pub signal: PathBuf,
    /// zero-pad | mirror-pad | fc-legendre | fc-gram | spectrum-opt | none.
    #[arg(long)]
    pub method: String,
    /// Boundary stencil width (FC methods).
    #[arg(long, default_value_t = 6)]
    pub d: usize,
    /// Total extension length (split half per side).
    #[arg(long, default_value_t = 32)]
    pub c: usize,
    /// Sobolev order (spectrum-opt).
    #[arg(long, default_value_t = 1.0)]
    pub s: f64,
    /// Physical length of the signal's domain.
    #[arg(long, default_value_t = 1.0)]
    pub domain_length: f64,
    /// Reference derivative CSV for an accuracy comparison.
    #[arg(long)]
    pub reference_derivative: Option<PathBuf>,
    /// Where to write the computed derivative (with --reference-derivative).
    #[arg(long)]
    pub derivative_output: Option<PathBuf>,
    #[arg(short, long)]
    pub output: PathBuf,
}

fn build_operator(args: &ExtendArgs, n: usize) -> Result<Option<ExtensionOperator>> {
    if args.method.eq_ignore_ascii_case("none") {
        return Ok(None);
    }
    let op = match ExtensionMethod::parse(&args.method)? {
        ExtensionMethod::ZeroPad => ExtensionOperator::zero_pad(args.c)?,
        ExtensionMethod::MirrorPad => ExtensionOperator::mirror_pad(args.c)?,
        ExtensionMethod::FcLegendre => ExtensionOperator::fc_legendre(args.d, args.c, n)?,
        ExtensionMethod::FcGram => ExtensionOperator::fc_gram(args.d, args.c, n)?,
        ExtensionMethod::SpectrumOpt => ExtensionOperator::spectrum_opt(n, args.c, args.s)?,
    };
    Ok(Some(op))
}

/// Discrete curvature at the periodic seam (between the two extension
/// halves): |f[0] - 2 f[m-1] + f[m-2]| on the extended sequence.
fn seam_second_difference(extended: &[f64]) -> f64 {
    let m = extended.len();
    if m < 3 {
        return 0.0;
    }
    (extended[0] - 2.0 * extended[m - 1] + extended[m - 2]).abs()
}

pub fn run(args: ExtendArgs) -> Result<()> {
    let signal = read_signal_csv(&args.signal)?;
    let n = signal.len();
    let op = build_operator(&args, n)?;
    let (extended, c) = match &op {
        Some(op) => (extend_1d(&signal, op)?, op.extension_len()),
        None => (signal.clone(), 0),
    };

    let mut csv = String::from("index,value\n");
    for (i, v) in extended.iter().enumerate() {
        csv.push_str(&format!("{i},{v:.17e}\n"));
    }
    let seam = seam_second_difference(&extended);
    csv.push_str(&format!("# method: {}\n", args.method));
    csv.push_str(&format!("# n: {n}\n# c: {c}\n"));
    csv.push_str(&format!("# seam_second_diff: {seam:.17e}\n"));

    if let Some(ref_path) = &args.reference_derivative {
        let reference = read_signal_csv(ref_path)?;
        if reference.len() != n {
            return Err(Error::Format(format!(
                "reference derivative has {} rows, signal has {n}",
                reference.len()
            )));
        }
        // differentiate on the (extended) periodic domain and restrict
        let m = extended.len();
        let length = args.domain_length * m as f64 / n as f64;
        let grid = GridSpec::new(vec![m], vec![length], vec![true])?;
        let field = ComplexTensor::from_real_slice(&[m], &extended)?;
        let derivative = spectral_derivative(&field, &grid, 0, 1)?;
        let restricted: Vec<f64> = (0..n).map(|i| derivative.data()[c / 2 + i].re).collect();
        let max_err: f64 = restricted
            .iter()
            .zip(&reference)
            .map(|(a, b)| (a - b).abs())
            .fold(0.0, f64::max);
        csv.push_str(&format!("# max_derivative_error: {max_err:.17e}\n"));
        if let Some(out) = &args.derivative_output {
            super::write_signal_csv(out, &restricted, &crate::invocation())?;
        }
        println!("max derivative error {max_err:.6e}");
    }

    csv.push_str(&format!("# invocation: {}\n", crate::invocation()));
    super::write_text(&args.output, &csv)?;
    println!(
        "extended {n} -> {} samples ({}); seam second difference {seam:.3e}",
        extended.len(),
        args.method
    );
    Ok(())
}
