//! Physics residuals evaluated by spectral differentiation, for
//! physics-informed training and data-free fine-tuning.

use num_complex::Complex64;

use crate::error::{Error, Result};
use crate::extension::{extend_nd, restrict_nd, ExtensionOperator};
use crate::grid::GridSpec;
use crate::tensor::{ComplexTensor, RealTensor};
use crate::train::tape::{Tape, ValueId};

fn mean_zero_check(f: &RealTensor) -> Result<()> {
    let mean = f.mean();
    if mean.abs() > 1e-8 * (1.0 + f.max_abs()) {
        return Err(Error::Numerical(format!(
            "Poisson residual needs mean-zero forcing (periodic solvability), got mean {mean:.3e}"
        )));
    }
    Ok(())
}

/// Squared residual of -Lap(u) = f on a periodic grid:
/// || -Lap(u) - f ||^2 (quadrature-weighted) + mean(u)^2 to pin the
/// free constant. With an extension operator the derivative is taken
/// on the periodically extended domain instead (non-periodic demos).
pub fn physics_residual_poisson(
    u: &RealTensor,
    f: &RealTensor,
    grid: &GridSpec,
    extension: Option<&ExtensionOperator>,
) -> Result<f64> {
    if u.shape() != f.shape() {
        return Err(Error::ShapeMismatch("u and f shapes differ".into()));
    }
    mean_zero_check(f)?;
    let lap = match extension {
        None => {
            grid.require_periodic("spectral Poisson residual")?;
            laplacian_spectral(&u.to_complex(), grid)?
        }
        Some(op) => {
            let ops: Vec<&ExtensionOperator> = vec![op; u.shape().len()];
            let extended = extend_nd(u, &ops)?;
            let ext_grid = extended_grid(grid, op)?;
            let lap_ext = laplacian_spectral(&extended.to_complex(), &ext_grid)?;
            restrict_nd(&lap_ext.real_part(), &ops)?.to_complex()
        }
    };
    let dv = grid.quadrature_weight();
    let residual: f64 = lap
        .data()
        .iter()
        .zip(f.data())
        .map(|(l, &fv)| (-l.re - fv).powi(2))
        .sum::<f64>()
        * dv;
    let pin = u.mean().powi(2);
    Ok(residual + pin)
}

fn extended_grid(grid: &GridSpec, op: &ExtensionOperator) -> Result<GridSpec> {
    let resolution: Vec<usize> = grid
        .resolution()
        .iter()
        .map(|&n| n + op.extension_len())
        .collect();
    let lengths: Vec<f64> = grid
        .resolution()
        .iter()
        .zip(grid.domain_length())
        .map(|(&n, &l)| l * (n + op.extension_len()) as f64 / n as f64)
        .collect();
    GridSpec::new(resolution, lengths, vec![true; grid.ndim()])
}

fn laplacian_spectral(u: &ComplexTensor, grid: &GridSpec) -> Result<ComplexTensor> {
    let axes: Vec<usize> = (0..u.ndim()).collect();
    let mut spec = crate::tensor::fft::fft_nd(u, &axes, false)?;
    let shape = spec.shape().to_vec();
    let strides = spec.strides();
    let wavenumbers: Vec<Vec<f64>> = (0..shape.len()).map(|ax| grid.wavenumbers(ax)).collect();
    for lin in 0..spec.len() {
        let mut rem = lin;
        let mut k2 = 0.0;
        for ax in 0..shape.len() {
            let idx = rem / strides[ax];
            rem %= strides[ax];
            let k = wavenumbers[ax][idx];
            k2 += k * k;
        }
        spec.data_mut()[lin] *= -k2;
    }
    crate::tensor::fft::fft_nd(&spec, &axes, true)
}

/// Tape version for a [1, N..] prediction field on a periodic grid:
/// loss = sum (-Lap(u) - f)^2 * Delta + mean(u)^2.
pub fn physics_residual_poisson_tape(
    tape: &mut Tape,
    u: ValueId,
    f: &RealTensor,
    grid: &GridSpec,
) -> Result<ValueId> {
    grid.require_periodic("spectral Poisson residual")?;
    mean_zero_check(f)?;
    let shape = tape.shape(u).to_vec();
    if shape[0] != 1 || &shape[1..] != f.shape() {
        return Err(Error::ShapeMismatch(format!(
            "prediction {shape:?} vs forcing {:?}",
            f.shape()
        )));
    }
    let axes: Vec<usize> = (1..shape.len()).collect();
    // negative Laplacian multiplier +|k|^2 on the channel field
    let wavenumbers: Vec<Vec<f64>> = (0..axes.len())
        .map(|j| grid.wavenumbers(j))
        .collect();
    let mult = ComplexTensor::from_fn(&shape, |idx| {
        let mut k2 = 0.0;
        for (j, &ax_idx) in idx[1..].iter().enumerate() {
            let k = wavenumbers[j][ax_idx];
            k2 += k * k;
        }
        Complex64::new(k2, 0.0)
    });

    let spec = tape.fft(u, &axes)?;
    let mc = tape.constant(mult);
    let scaled = tape.mul(spec, mc)?;
    let back = tape.ifft(scaled, &axes)?;
    let neg_lap = tape.real(back);
    let f_const = tape.constant(f.to_complex().reshape(&shape)?);
    let residual = tape.sub(neg_lap, f_const)?;
    let squared = tape.abs_pow(residual, 2.0);
    let summed = tape.sum(squared);
    let weighted = tape.scale(summed, Complex64::new(grid.quadrature_weight(), 0.0));

    let mean_u = tape.mean(u);
    let pin = tape.square(mean_u);
    let pin_real = tape.real(pin);
    tape.add(weighted, pin_real)
}
