//! Tucker decomposition of complex tensors via higher-order orthogonal
//! iteration (HOOI), initialized by the truncated SVDs of the mode
//! unfoldings (HOSVD).

use nalgebra::DMatrix;
use num_complex::Complex64;

use crate::error::{Error, Result};
use crate::tensor::ComplexTensor;
use crate::train::tape::mode_product_eval;

/// Per-mode ranks for a fractional rank: the same fraction
/// `rank^(1/order)` of every mode extent, which makes the core hold
/// about `rank` times the entries of the full tensor (the convention
/// behind the ~1/rank parameter saving of a Tucker-factorized layer).
/// Each rank is additionally capped by the product of the others
/// (a Tucker core cannot have a mode rank above that bound).
pub fn ranks_from_fraction(shape: &[usize], rank: f64) -> Vec<usize> {
    let fraction = rank.powf(1.0 / shape.len() as f64);
    let mut ranks: Vec<usize> = shape
        .iter()
        .map(|&d| ((fraction * d as f64).ceil() as usize).clamp(1, d))
        .collect();
    loop {
        let mut changed = false;
        for n in 0..ranks.len() {
            let others: usize = ranks
                .iter()
                .enumerate()
                .filter(|&(m, _)| m != n)
                .map(|(_, &r)| r)
                .product();
            if ranks[n] > others {
                ranks[n] = others.max(1);
                changed = true;
            }
        }
        if !changed {
            break;
        }
    }
    ranks
}

/// Mode-n unfolding: rows indexed by the mode, one column per lane.
fn unfold(t: &ComplexTensor, mode: usize) -> DMatrix<Complex64> {
    let rows = t.shape()[mode];
    let offsets = t.lane_offsets(mode);
    let stride = t.strides()[mode];
    DMatrix::from_fn(rows, offsets.len(), |r, c| t.data()[offsets[c] + r * stride])
}

/// Leading left singular vectors of a complex matrix as a
/// [rows x rank] tensor.
fn leading_left_vectors(m: &DMatrix<Complex64>, rank: usize) -> Result<ComplexTensor> {
    let svd = m.clone().svd(true, false);
    let u = svd
        .u
        .as_ref()
        .ok_or_else(|| Error::Numerical("SVD did not produce U".into()))?;
    let rank = rank.min(u.ncols());
    let rows = u.nrows();
    let mut data = Vec::with_capacity(rows * rank);
    for r in 0..rows {
        for c in 0..rank {
            data.push(u[(r, c)]);
        }
    }
    ComplexTensor::from_data(&[rows, rank], data)
}

/// Project every mode of `t` except `skip` through the adjoint factors.
fn project_others(
    t: &ComplexTensor,
    factors: &[ComplexTensor],
    skip: Option<usize>,
) -> Result<ComplexTensor> {
    let mut cur = t.clone();
    for (mode, f) in factors.iter().enumerate() {
        if Some(mode) == skip {
            continue;
        }
        cur = mode_product_eval(&cur, f, mode, true)?;
    }
    Ok(cur)
}

#[derive(Debug, Clone)]
pub struct TuckerDecomposition {
    pub core: ComplexTensor,
    /// One [dim_i x R_i] factor with orthonormal columns per mode.
    pub factors: Vec<ComplexTensor>,
    /// Relative reconstruction error after each HOOI sweep
    /// (non-increasing; entry 0 is the HOSVD initialization).
    pub rel_errors: Vec<f64>,
    /// False when the sweep budget ran out before the tolerance was
    /// met; the best iterate is still returned.
    pub converged: bool,
}

impl TuckerDecomposition {
    pub fn reconstruct(&self) -> Result<ComplexTensor> {
        tucker_reconstruct(&self.core, &self.factors)
    }

    pub fn final_rel_error(&self) -> f64 {
        *self.rel_errors.last().unwrap_or(&f64::NAN)
    }
}

/// Core x_1 U_1 x_2 U_2 ... over every mode.
pub fn tucker_reconstruct(core: &ComplexTensor, factors: &[ComplexTensor]) -> Result<ComplexTensor> {
    if factors.len() != core.ndim() {
        return Err(Error::ShapeMismatch("one factor per core mode required".into()));
    }
    let mut cur = core.clone();
    for (mode, f) in factors.iter().enumerate() {
        cur = mode_product_eval(&cur, f, mode, false)?;
    }
    Ok(cur)
}

/// HOOI with HOSVD initialization. Runs up to `max_sweeps` sweeps and
/// stops early once the per-sweep improvement of the relative
/// reconstruction error drops below `tol`.
pub fn tucker_decompose(
    t: &ComplexTensor,
    ranks: &[usize],
    max_sweeps: usize,
    tol: f64,
) -> Result<TuckerDecomposition> {
    if ranks.len() != t.ndim() {
        return Err(Error::InvalidArg("one rank per mode required".into()));
    }
    for (mode, (&r, &d)) in ranks.iter().zip(t.shape()).enumerate() {
        if r == 0 || r > d {
            return Err(Error::InvalidArg(format!(
                "rank {r} invalid for mode {mode} of extent {d}"
            )));
        }
    }
    let norm = t.norm2();
    if norm == 0.0 {
        let core = ComplexTensor::zeros(ranks);
        let factors = t
            .shape()
            .iter()
            .zip(ranks)
            .map(|(&d, &r)| {
                ComplexTensor::from_fn(&[d, r], |idx| {
                    Complex64::new(if idx[0] == idx[1] { 1.0 } else { 0.0 }, 0.0)
                })
            })
            .collect();
        return Ok(TuckerDecomposition {
            core,
            factors,
            rel_errors: vec![0.0],
            converged: true,
        });
    }

    // HOSVD initialization
    let mut factors: Vec<ComplexTensor> = Vec::with_capacity(t.ndim());
    for mode in 0..t.ndim() {
        factors.push(leading_left_vectors(&unfold(t, mode), ranks[mode])?);
    }

    let rel_error = |factors: &[ComplexTensor]| -> Result<f64> {
        let core = project_others(t, factors, None)?;
        let recon = tucker_reconstruct(&core, factors)?;
        let diff = recon.zip_map(t, |a, b| a - b)?;
        Ok(diff.norm2() / norm)
    };

    let mut rel_errors = vec![rel_error(&factors)?];
    let mut converged = false;
    for _ in 0..max_sweeps {
        for mode in 0..t.ndim() {
            let projected = project_others(t, &factors, Some(mode))?;
            factors[mode] = leading_left_vectors(&unfold(&projected, mode), ranks[mode])?;
        }
        let err = rel_error(&factors)?;
        let prev = *rel_errors.last().unwrap();
        rel_errors.push(err);
        if (prev - err).abs() <= tol {
            converged = true;
            break;
        }
    }

    let core = project_others(t, &factors, None)?;
    Ok(TuckerDecomposition {
        core,
        factors,
        rel_errors,
        converged,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn random_complex(shape: &[usize], rng: &mut ChaCha8Rng) -> ComplexTensor {
        ComplexTensor::from_fn(shape, |_| {
            Complex64::new(rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0))
        })
    }

    #[test]
    fn exact_recovery_at_matching_ranks() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let core = random_complex(&[4, 3, 3], &mut rng);
        let factors: Vec<ComplexTensor> = [(9, 4), (7, 3), (6, 3)]
            .iter()
            .map(|&(d, r)| {
                // orthonormalize a random matrix for a well-posed factor
                let m = DMatrix::<Complex64>::from_fn(d, r, |_, _| {
                    Complex64::new(rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0))
                });
                let q = m.qr().q();
                ComplexTensor::from_data(
                    &[d, r],
                    (0..d).flat_map(|i| (0..r).map(move |j| (i, j)))
                        .map(|(i, j)| q[(i, j)])
                        .collect(),
                )
                .unwrap()
            })
            .collect();
        let t = tucker_reconstruct(&core, &factors).unwrap();
        let dec = tucker_decompose(&t, &[4, 3, 3], 20, 1e-14).unwrap();
        assert!(dec.final_rel_error() <= 1e-8, "{:e}", dec.final_rel_error());
    }

    #[test]
    fn full_rank_reconstructs_any_tensor() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let t = random_complex(&[5, 4, 3], &mut rng);
        let ranks = ranks_from_fraction(t.shape(), 1.0);
        assert_eq!(ranks, vec![5, 4, 3]);
        let dec = tucker_decompose(&t, &ranks, 10, 1e-14).unwrap();
        assert!(dec.final_rel_error() <= 1e-8, "{:e}", dec.final_rel_error());
    }

    #[test]
    fn matrix_case_reduces_to_svd() {
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        let t = random_complex(&[8, 6], &mut rng);
        let r = 3;
        let dec = tucker_decompose(&t, &[r, r], 30, 1e-14).unwrap();
        // singular values of the core match the matrix singular values
        let core_m = DMatrix::<Complex64>::from_fn(r, r, |i, j| dec.core.get(&[i, j]));
        let mut core_svs: Vec<f64> = core_m.svd(false, false).singular_values.iter().copied().collect();
        core_svs.sort_by(|a, b| b.total_cmp(a));
        let full = DMatrix::<Complex64>::from_fn(8, 6, |i, j| t.get(&[i, j]));
        let mut full_svs: Vec<f64> = full.svd(false, false).singular_values.iter().copied().collect();
        full_svs.sort_by(|a, b| b.total_cmp(a));
        for i in 0..r {
            assert!(
                (core_svs[i] - full_svs[i]).abs() <= 1e-10,
                "sv {i}: {} vs {}",
                core_svs[i],
                full_svs[i]
            );
        }
    }

    #[test]
    fn factors_are_orthonormal_and_error_monotone() {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        let t = random_complex(&[6, 5, 4], &mut rng);
        let dec = tucker_decompose(&t, &[3, 3, 2], 8, 0.0).unwrap();
        for f in &dec.factors {
            let (d, r) = (f.shape()[0], f.shape()[1]);
            for a in 0..r {
                for b in 0..r {
                    let mut acc = Complex64::new(0.0, 0.0);
                    for i in 0..d {
                        acc += f.get(&[i, a]).conj() * f.get(&[i, b]);
                    }
                    let expect = if a == b { 1.0 } else { 0.0 };
                    assert!(
                        (acc - Complex64::new(expect, 0.0)).norm() <= 1e-10,
                        "factor gram ({a},{b}) = {acc}"
                    );
                }
            }
        }
        for w in dec.rel_errors.windows(2) {
            assert!(w[1] <= w[0] + 1e-12, "errors not monotone: {:?}", dec.rel_errors);
        }
    }

    #[test]
    fn non_convergence_returns_best_iterate_with_flag() {
        let mut rng = ChaCha8Rng::seed_from_u64(13);
        let t = random_complex(&[6, 6, 6], &mut rng);
        // zero sweeps allowed: cannot converge, still returns HOSVD iterate
        let dec = tucker_decompose(&t, &[2, 2, 2], 0, 1e-16).unwrap();
        assert!(!dec.converged);
        assert!(dec.final_rel_error().is_finite());
    }

    #[test]
    fn fraction_ranks_scale_each_mode() {
        assert_eq!(ranks_from_fraction(&[10, 10], 1.0), vec![10, 10]);
        let r = ranks_from_fraction(&[32, 32, 48, 48], 0.1);
        // fraction 0.1^(1/4) ~ 0.562
        assert_eq!(r, vec![18, 18, 27, 27]);
    }
}
