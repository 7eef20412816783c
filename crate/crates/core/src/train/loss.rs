//! Function-space data losses with quadrature weights, in eager form
//! and as tape programs for training.

use num_complex::Complex64;

use crate::error::{Error, Result};
use crate::grid::GridSpec;
use crate::tensor::{fft, ComplexTensor, RealTensor};
use crate::train::tape::{Tape, ValueId};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum LossKind {
    LpAbs,
    LpRel,
    H1Abs,
    WeightedLp,
    Spectral,
}

/// Per-point integration weights making the discrete loss a consistent
/// approximation of the continuous one.
#[derive(Debug, Clone, PartialEq)]
pub enum Quadrature {
    /// One shared weight per point (rectangle rule = trapezoid rule on
    /// periodic grids): prod_j L_j / N_j.
    Uniform(f64),
    /// Explicit per-point weights.
    Weights(RealTensor),
}

impl Quadrature {
    pub fn from_grid(grid: &GridSpec) -> Self {
        Quadrature::Uniform(grid.quadrature_weight())
    }

    pub fn validate(&self, domain_measure: Option<f64>, n_points: usize) -> Result<()> {
        match self {
            Quadrature::Uniform(d) => {
                if *d <= 0.0 {
                    return Err(Error::InvalidArg("quadrature weight must be positive".into()));
                }
                if let Some(measure) = domain_measure {
                    let total = d * n_points as f64;
                    if (total - measure).abs() > 1e-6 * measure {
                        return Err(Error::InvalidArg(format!(
                            "quadrature sums to {total}, expected the domain measure {measure}"
                        )));
                    }
                }
            }
            Quadrature::Weights(w) => {
                if w.data().iter().any(|&v| v <= 0.0) {
                    return Err(Error::InvalidArg("quadrature weights must be positive".into()));
                }
            }
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct LossSpec {
    pub kind: LossKind,
    /// Exponent p >= 1.
    pub p: f64,
    /// Stabilizer for the relative denominator.
    pub epsilon: f64,
    /// Spatial weight field (WeightedLp).
    pub weights: Option<RealTensor>,
    pub quadrature: Quadrature,
}

impl LossSpec {
    pub fn lp_rel(p: f64, grid: &GridSpec) -> Self {
        LossSpec {
            kind: LossKind::LpRel,
            p,
            epsilon: 1e-12,
            weights: None,
            quadrature: Quadrature::from_grid(grid),
        }
    }

    pub fn lp_abs(p: f64, grid: &GridSpec) -> Self {
        LossSpec {
            kind: LossKind::LpAbs,
            p,
            epsilon: 0.0,
            weights: None,
            quadrature: Quadrature::from_grid(grid),
        }
    }

    pub fn validate(&self, n_points: usize) -> Result<()> {
        if self.p < 1.0 {
            return Err(Error::InvalidArg(format!("loss exponent p = {} < 1", self.p)));
        }
        self.quadrature.validate(None, n_points)
    }
}

fn check_shapes(pred: &ComplexTensor, target: &ComplexTensor) -> Result<()> {
    if pred.shape() != target.shape() {
        return Err(Error::ShapeMismatch(format!(
            "prediction {:?} vs target {:?}",
            pred.shape(),
            target.shape()
        )));
    }
    Ok(())
}

fn weighted_power_sum(
    diff: impl Iterator<Item = f64>,
    quadrature: &Quadrature,
    weights: Option<&RealTensor>,
) -> f64 {
    match (quadrature, weights) {
        (Quadrature::Uniform(d), None) => d * diff.sum::<f64>(),
        (Quadrature::Uniform(d), Some(w)) => {
            d * diff.zip(w.data()).map(|(v, &wi)| v * wi).sum::<f64>()
        }
        (Quadrature::Weights(q), None) => diff.zip(q.data()).map(|(v, &qi)| v * qi).sum::<f64>(),
        (Quadrature::Weights(q), Some(w)) => diff
            .zip(q.data().iter().zip(w.data()))
            .map(|(v, (&qi, &wi))| v * qi * wi)
            .sum::<f64>(),
    }
}

/// Absolute or relative Lp loss:
/// sum_j |p_j - t_j|^p Delta_j, the relative form divided by
/// sum_j |t_j|^p Delta_j + epsilon.
pub fn lp_loss(pred: &ComplexTensor, target: &ComplexTensor, spec: &LossSpec) -> Result<f64> {
    check_shapes(pred, target)?;
    spec.validate(pred.len())?;
    if let Some(w) = &spec.weights {
        if w.len() != pred.len() {
            return Err(Error::ShapeMismatch("weight field shape mismatch".into()));
        }
    }
    let numerator = weighted_power_sum(
        pred.data()
            .iter()
            .zip(target.data())
            .map(|(a, b)| (a - b).norm().powf(spec.p)),
        &spec.quadrature,
        spec.weights.as_ref(),
    );
    match spec.kind {
        LossKind::LpRel => {
            let denominator = weighted_power_sum(
                target.data().iter().map(|b| b.norm().powf(spec.p)),
                &spec.quadrature,
                spec.weights.as_ref(),
            );
            Ok(numerator / (denominator + spec.epsilon))
        }
        _ => Ok(numerator),
    }
}

/// Squared H1 loss: the L2 term plus the L2 norm of the spectral
/// gradient difference over every axis.
pub fn h1_loss(pred: &ComplexTensor, target: &ComplexTensor, grid: &GridSpec) -> Result<f64> {
    check_shapes(pred, target)?;
    let spec = LossSpec::lp_abs(2.0, grid);
    let mut total = lp_loss(pred, target, &spec)?;
    for axis in 0..grid.ndim() {
        let dp = crate::spectral::spectral_derivative(pred, grid, axis, 1)?;
        let dt = crate::spectral::spectral_derivative(target, grid, axis, 1)?;
        total += lp_loss(&dp, &dt, &spec)?;
    }
    Ok(total)
}

/// Spectral loss: quadrature-weighted squared coefficient differences,
/// optionally restricted to |k| <= band per axis. Equals the L2 loss
/// for the full band by Parseval.
pub fn spectral_loss(
    pred: &ComplexTensor,
    target: &ComplexTensor,
    quadrature_weight: f64,
    band: Option<&[usize]>,
) -> Result<f64> {
    check_shapes(pred, target)?;
    let axes: Vec<usize> = (0..pred.ndim()).collect();
    let fp = fft::fft_nd(pred, &axes, false)?;
    let ft = fft::fft_nd(target, &axes, false)?;
    let shape = fp.shape().to_vec();
    let strides = fp.strides();
    let mut total = 0.0;
    for (lin, (a, b)) in fp.data().iter().zip(ft.data()).enumerate() {
        if let Some(band) = band {
            let mut rem = lin;
            let mut keep = true;
            for ax in 0..shape.len() {
                let idx = rem / strides[ax];
                rem %= strides[ax];
                if fft::signed_mode(idx, shape[ax]).unsigned_abs() as usize > band[ax] {
                    keep = false;
                    break;
                }
            }
            if !keep {
                continue;
            }
        }
        total += (a - b).norm_sqr();
    }
    Ok(total * quadrature_weight)
}

/// Relative L2 metric ||pred - target||_2 / ||target||_2 (the number
/// reported by evaluation and the acceptance runs).
pub fn relative_l2(pred: &RealTensor, target: &RealTensor) -> f64 {
    let num: f64 = pred
        .data()
        .iter()
        .zip(target.data())
        .map(|(a, b)| (a - b).powi(2))
        .sum::<f64>()
        .sqrt();
    num / target.norm2().max(1e-300)
}

/// Tape version of [`lp_loss`]. The target is a constant; for the
/// relative form the denominator is the (constant) target norm.
pub fn lp_loss_tape(
    tape: &mut Tape,
    pred: ValueId,
    target: &ComplexTensor,
    spec: &LossSpec,
) -> Result<ValueId> {
    spec.validate(target.len())?;
    let t = tape.constant(target.clone());
    let diff = tape.sub(pred, t)?;
    let mut powered = tape.abs_pow(diff, spec.p);
    if let Some(w) = &spec.weights {
        let wc = tape.constant(w.to_complex().reshape(tape.shape(powered))?);
        powered = tape.mul(powered, wc)?;
    }
    let summed = match &spec.quadrature {
        Quadrature::Uniform(d) => {
            let s = tape.sum(powered);
            tape.scale(s, Complex64::new(*d, 0.0))
        }
        Quadrature::Weights(q) => {
            let qc = tape.constant(q.to_complex().reshape(tape.shape(powered))?);
            let weighted = tape.mul(powered, qc)?;
            tape.sum(weighted)
        }
    };
    match spec.kind {
        LossKind::LpRel => {
            let denominator = weighted_power_sum(
                target.data().iter().map(|b| b.norm().powf(spec.p)),
                &spec.quadrature,
                spec.weights.as_ref(),
            ) + spec.epsilon;
            Ok(tape.scale(summed, Complex64::new(1.0 / denominator, 0.0)))
        }
        _ => Ok(summed),
    }
}

/// Tape version of [`h1_loss`] for a [C, N..] prediction field.
pub fn h1_loss_tape(
    tape: &mut Tape,
    pred: ValueId,
    target: &ComplexTensor,
    grid: &GridSpec,
) -> Result<ValueId> {
    let spec = LossSpec::lp_abs(2.0, grid);
    let mut total = lp_loss_tape(tape, pred, target, &spec)?;
    let shape = tape.shape(pred).to_vec();
    for axis in 1..shape.len() {
        // first-derivative multiplier (i k) broadcast over channels,
        // with the Nyquist bin zeroed on even extents (the symmetric
        // odd-order convention, matching the eager spectral derivative)
        let n = shape[axis];
        let mut wavenumbers = grid.wavenumbers(axis - 1);
        if n % 2 == 0 {
            wavenumbers[n / 2] = 0.0;
        }
        let mult = ComplexTensor::from_fn(&shape, |idx| {
            Complex64::new(0.0, wavenumbers[idx[axis]])
        });
        let spec_f = tape.fft(pred, &[axis])?;
        let mc = tape.constant(mult);
        let scaled = tape.mul(spec_f, mc)?;
        let back = tape.ifft(scaled, &[axis])?;
        let dp = tape.real(back);
        let dt_target = {
            // eager spectral derivative of the constant target with the
            // same multiplier
            let mut spec_t = fft::fft_nd(target, &[axis], false)?;
            let stride = spec_t.strides()[axis];
            for base in spec_t.lane_offsets(axis) {
                for j in 0..n {
                    spec_t.data_mut()[base + j * stride] *= Complex64::new(0.0, wavenumbers[j]);
                }
            }
            fft::fft_nd(&spec_t, &[axis], true)?.map(|z| Complex64::new(z.re, 0.0))
        };
        let term = lp_loss_tape(tape, dp, &dt_target, &spec)?;
        total = tape.add(total, term)?;
    }
    Ok(total)
}
