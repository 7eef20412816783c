//! Downsampling strategies for field data: stride, spectral
//! truncation, low-pass + stride, mean/max pooling, and linear
//! interpolation.

use crate::error::{Error, Result};
use crate::spectral;
use crate::tensor::RealTensor;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum DownsampleStrategy {
    /// Keep every s-th sample (aliases super-Nyquist energy).
    Stride,
    /// Ideal low-pass via centered spectral truncation.
    Spectral,
    /// Low-pass below the coarse Nyquist band, then stride.
    LowPassThenStride,
    MeanPool,
    MaxPool,
    /// Linear interpolation at cell-centered coarse sample positions.
    LinearInterp,
}

impl DownsampleStrategy {
    pub fn parse(name: &str) -> Result<Self> {
        match name.to_ascii_lowercase().replace('_', "-").as_str() {
            "stride" => Ok(Self::Stride),
            "spectral" => Ok(Self::Spectral),
            "low-pass-then-stride" | "lowpass-stride" => Ok(Self::LowPassThenStride),
            "mean-pool" | "mean" => Ok(Self::MeanPool),
            "max-pool" | "max" => Ok(Self::MaxPool),
            "linear-interp" | "linear" => Ok(Self::LinearInterp),
            other => Err(Error::InvalidArg(format!(
                "unknown downsampling strategy '{other}'"
            ))),
        }
    }
}

/// Downsample every axis of a real field by the same integer factor,
/// which must divide each extent.
pub fn downsample(
    field: &RealTensor,
    strategy: DownsampleStrategy,
    factor: usize,
) -> Result<RealTensor> {
    if factor == 0 {
        return Err(Error::InvalidArg("factor must be >= 1".into()));
    }
    for (ax, &n) in field.shape().iter().enumerate() {
        if n % factor != 0 {
            return Err(Error::InvalidArg(format!(
                "factor {factor} does not divide extent {n} on axis {ax}"
            )));
        }
    }
    if factor == 1 {
        return Ok(field.clone());
    }
    let coarse: Vec<usize> = field.shape().iter().map(|&n| n / factor).collect();
    let factors = vec![factor; field.shape().len()];
    match strategy {
        DownsampleStrategy::Stride => {
            let out = spectral::stride_downsample(&field.to_complex(), &factors)?;
            Ok(out.real_part())
        }
        DownsampleStrategy::Spectral => {
            let out = spectral::spectral_truncate(&field.to_complex(), &coarse)?;
            Ok(out.real_part())
        }
        DownsampleStrategy::LowPassThenStride => {
            // keep exactly the modes the coarse grid's centered block
            // retains apart from its asymmetric edge mode
            let cutoffs: Vec<usize> = coarse.iter().map(|&m| m / 2 - 1).collect();
            let filtered = spectral::low_pass(&field.to_complex(), &cutoffs)?;
            let out = spectral::stride_downsample(&filtered, &factors)?;
            Ok(out.real_part())
        }
        DownsampleStrategy::MeanPool | DownsampleStrategy::MaxPool => {
            pool(field, factor, strategy == DownsampleStrategy::MeanPool)
        }
        DownsampleStrategy::LinearInterp => linear_interp(field, factor),
    }
}

fn pool(field: &RealTensor, factor: usize, mean: bool) -> Result<RealTensor> {
    let coarse: Vec<usize> = field.shape().iter().map(|&n| n / factor).collect();
    let d = coarse.len();
    let block: usize = factor.pow(d as u32);
    Ok(RealTensor::from_fn(&coarse, |idx| {
        let mut acc = if mean { 0.0 } else { f64::NEG_INFINITY };
        for b in 0..block {
            let mut off = Vec::with_capacity(d);
            let mut rem = b;
            for _ in 0..d {
                off.push(rem % factor);
                rem /= factor;
            }
            let fine_idx: Vec<usize> = idx
                .iter()
                .zip(&off)
                .map(|(&i, &o)| i * factor + o)
                .collect();
            let v = field.get(&fine_idx);
            if mean {
                acc += v;
            } else {
                acc = acc.max(v);
            }
        }
        if mean {
            acc / block as f64
        } else {
            acc
        }
    }))
}

/// Cell-centered linear interpolation: coarse sample j sits at fine
/// coordinate (j + 1/2) * factor - 1/2, interpolating periodically.
fn linear_interp(field: &RealTensor, factor: usize) -> Result<RealTensor> {
    let coarse: Vec<usize> = field.shape().iter().map(|&n| n / factor).collect();
    let d = coarse.len();
    Ok(RealTensor::from_fn(&coarse, |idx| {
        // separable multilinear interpolation
        let mut corners = vec![(0usize, 0.0f64); 0];
        let mut lo = Vec::with_capacity(d);
        let mut frac = Vec::with_capacity(d);
        for ax in 0..d {
            let pos = (idx[ax] as f64 + 0.5) * factor as f64 - 0.5;
            let base = pos.floor();
            lo.push(base as i64);
            frac.push(pos - base);
        }
        let n_corners = 1usize << d;
        let mut acc = 0.0;
        for c in 0..n_corners {
            let mut weight = 1.0;
            let mut fine_idx = Vec::with_capacity(d);
            for ax in 0..d {
                let hi = (c >> ax) & 1 == 1;
                weight *= if hi { frac[ax] } else { 1.0 - frac[ax] };
                let n = field.shape()[ax] as i64;
                let i = (lo[ax] + if hi { 1 } else { 0 }).rem_euclid(n) as usize;
                fine_idx.push(i);
            }
            acc += weight * field.get(&fine_idx);
        }
        corners.clear();
        acc
    }))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::data::{sample_grf, GrfSpec};
    use crate::tensor::fft;
    use std::f64::consts::PI;

    const ALL: [DownsampleStrategy; 6] = [
        DownsampleStrategy::Stride,
        DownsampleStrategy::Spectral,
        DownsampleStrategy::LowPassThenStride,
        DownsampleStrategy::MeanPool,
        DownsampleStrategy::MaxPool,
        DownsampleStrategy::LinearInterp,
    ];

    #[test]
    fn constant_fields_survive_every_strategy() {
        let field = RealTensor::from_fn(&[32], |_| 1.25);
        for s in ALL {
            let out = downsample(&field, s, 4).unwrap();
            assert_eq!(out.shape(), &[8]);
            for &v in out.data() {
                assert!((v - 1.25).abs() <= 1e-12, "{s:?}");
            }
        }
    }

    #[test]
    fn spectral_downsampling_is_exact_for_band_limited_fields() {
        let spec = GrfSpec {
            resolution: vec![64],
            domain_length: vec![2.0 * PI],
            gamma: 1.0,
            k_max: 7,
            seed: 2,
        };
        let field = sample_grf(&spec, 0).unwrap();
        let coarse = downsample(&field, DownsampleStrategy::Spectral, 2).unwrap();
        for j in 0..32 {
            assert!((coarse.data()[j] - field.data()[2 * j]).abs() <= 1e-12);
        }
    }

    #[test]
    fn stride_differs_from_spectral_by_the_fold_back() {
        // field with energy above the coarse Nyquist
        let n = 64;
        let field = RealTensor::from_fn(&[n], |idx| {
            let x = 2.0 * PI * idx[0] as f64 / n as f64;
            (3.0 * x).sin() + 0.7 * (20.0 * x).cos()
        });
        let strided = downsample(&field, DownsampleStrategy::Stride, 2).unwrap();
        let fine_spec = fft::fft(&field.to_complex(), &[0]).unwrap();
        let folded = crate::spectral::aliasing_fold(&fine_spec, &[32]).unwrap();
        let direct = fft::fft(&strided.to_complex(), &[0]).unwrap();
        let max: f64 = folded
            .coeffs()
            .data()
            .iter()
            .zip(direct.coeffs().data())
            .map(|(a, b)| (a - b).norm())
            .fold(0.0, f64::max);
        assert!(max <= 1e-12, "{max:e}");

        let spectral = downsample(&field, DownsampleStrategy::Spectral, 2).unwrap();
        let gap: f64 = strided
            .data()
            .iter()
            .zip(spectral.data())
            .map(|(a, b)| (a - b).abs())
            .fold(0.0, f64::max);
        assert!(gap > 1e-3, "stride and spectral should differ, gap {gap:e}");
    }

    #[test]
    fn low_pass_then_stride_matches_spectral_on_clean_band() {
        // field with no energy at or above the coarse block edge
        let n = 64;
        let field = RealTensor::from_fn(&[n], |idx| {
            let x = 2.0 * PI * idx[0] as f64 / n as f64;
            (3.0 * x).sin() + 0.4 * (9.0 * x).cos()
        });
        let a = downsample(&field, DownsampleStrategy::LowPassThenStride, 2).unwrap();
        let b = downsample(&field, DownsampleStrategy::Spectral, 2).unwrap();
        for j in 0..32 {
            assert!((a.data()[j] - b.data()[j]).abs() <= 1e-12);
        }
    }

    #[test]
    fn spectral_never_increases_energy_and_stride_preserves_nodes() {
        let spec = GrfSpec {
            resolution: vec![64],
            domain_length: vec![2.0 * PI],
            gamma: 0.8,
            k_max: 30,
            seed: 4,
        };
        let field = sample_grf(&spec, 1).unwrap();
        let energy = |f: &RealTensor| f.data().iter().map(|v| v * v).sum::<f64>() / f.len() as f64;
        let coarse = downsample(&field, DownsampleStrategy::Spectral, 4).unwrap();
        assert!(energy(&coarse) <= energy(&field) * (1.0 + 1e-12));

        let strided = downsample(&field, DownsampleStrategy::Stride, 4).unwrap();
        for j in 0..16 {
            assert_eq!(strided.data()[j], field.data()[4 * j]);
        }
    }

    #[test]
    fn pooling_2d_blocks() {
        let field = RealTensor::from_fn(&[4, 4], |idx| (idx[0] * 4 + idx[1]) as f64);
        let mean = downsample(&field, DownsampleStrategy::MeanPool, 2).unwrap();
        assert_eq!(mean.data(), &[2.5, 4.5, 10.5, 12.5]);
        let max = downsample(&field, DownsampleStrategy::MaxPool, 2).unwrap();
        assert_eq!(max.data(), &[5.0, 7.0, 13.0, 15.0]);
    }

    #[test]
    fn rejects_non_divisor_factors() {
        let field = RealTensor::from_fn(&[10], |idx| idx[0] as f64);
        assert!(downsample(&field, DownsampleStrategy::Stride, 3).is_err());
    }
}
