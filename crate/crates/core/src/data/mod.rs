//! Desk-scale benchmark data: Gaussian random fields with power-law
//! spectra, exact heat and Poisson operators, a pseudo-spectral
//! Burgers stepper, downsampling strategies, and the dataset file
//! format.

pub mod dataset;
pub mod downsample;

use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::grid::GridSpec;
use crate::tensor::{fft, ComplexTensor, RealTensor};

/// Band-limited Gaussian random field with |k|^-gamma amplitude decay.
/// Fields are real by construction (Hermitian coefficient symmetry).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GrfSpec {
    pub resolution: Vec<usize>,
    pub domain_length: Vec<f64>,
    /// Power-law exponent on the coefficient amplitude.
    pub gamma: f64,
    /// Highest active mode per axis (inclusive).
    pub k_max: usize,
    pub seed: u64,
}

impl GrfSpec {
    pub fn grid(&self) -> GridSpec {
        GridSpec::new(
            self.resolution.clone(),
            self.domain_length.clone(),
            vec![true; self.resolution.len()],
        )
        .expect("valid grf grid")
    }

    pub fn validate(&self) -> Result<()> {
        let grid = GridSpec::new(
            self.resolution.clone(),
            self.domain_length.clone(),
            vec![true; self.resolution.len()],
        )?;
        for (ax, &n) in grid.resolution().iter().enumerate() {
            if self.k_max > n / 2 {
                return Err(Error::Nyquist(format!(
                    "k_max {} above Nyquist mode {} on axis {ax}",
                    self.k_max,
                    n / 2
                )));
            }
        }
        if self.k_max == 0 {
            return Err(Error::InvalidArg("k_max must be >= 1".into()));
        }
        Ok(())
    }
}

/// Derived per-sample seed so that parallel and serial generation
/// agree bit for bit.
fn sample_rng(seed: u64, index: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed.wrapping_mul(0x9E37_79B9_7F4A_7C15).wrapping_add(index))
}

/// Draw sample `index` of the field ensemble. The k = 0 coefficient is
/// zero, so every sample has zero mean (convenient for the periodic
/// Poisson solvability condition).
pub fn sample_grf(spec: &GrfSpec, index: u64) -> Result<RealTensor> {
    spec.validate()?;
    let mut rng = sample_rng(spec.seed, index);
    let shape = &spec.resolution;
    let mut coeffs = ComplexTensor::zeros(shape);
    let n_total: f64 = shape.iter().product::<usize>() as f64;

    match shape.len() {
        1 => {
            let n = shape[0];
            for k in 1..=spec.k_max {
                let amp = (k as f64).powf(-spec.gamma) * n_total.sqrt();
                let re: f64 = rng.gen_range(-1.0..1.0);
                let im: f64 = rng.gen_range(-1.0..1.0);
                let z = Complex64::new(re, im) * amp / 2.0_f64.sqrt();
                coeffs.set(&[k], z);
                coeffs.set(&[n - k], z.conj());
            }
        }
        2 => {
            let (n0, n1) = (shape[0], shape[1]);
            for k0 in 0..=spec.k_max {
                for k1 in 0..=spec.k_max {
                    if k0 == 0 && k1 == 0 {
                        continue;
                    }
                    let kk = ((k0 * k0 + k1 * k1) as f64).sqrt();
                    if kk > spec.k_max as f64 {
                        continue;
                    }
                    let amp = kk.powf(-spec.gamma) * n_total.sqrt();
                    let re: f64 = rng.gen_range(-1.0..1.0);
                    let im: f64 = rng.gen_range(-1.0..1.0);
                    let z = Complex64::new(re, im) * amp / 2.0_f64.sqrt();
                    let i0 = k0;
                    let i1 = k1;
                    let c0 = (n0 - k0) % n0;
                    let c1 = (n1 - k1) % n1;
                    coeffs.set(&[i0, i1], z);
                    coeffs.set(&[c0, c1], z.conj());
                    // second quadrant pair for a fully real field
                    if k0 > 0 && k1 > 0 {
                        let re2: f64 = rng.gen_range(-1.0..1.0);
                        let im2: f64 = rng.gen_range(-1.0..1.0);
                        let z2 = Complex64::new(re2, im2) * amp / 2.0_f64.sqrt();
                        coeffs.set(&[i0, c1], z2);
                        coeffs.set(&[c0, i1], z2.conj());
                    }
                }
            }
        }
        d => {
            return Err(Error::InvalidArg(format!(
                "GRF sampling implemented for 1-d and 2-d fields, got {d}-d"
            )))
        }
    }

    let axes: Vec<usize> = (0..shape.len()).collect();
    let field = fft::fft_nd(&coeffs, &axes, true)?;
    debug_assert!(field.imag_part().max_abs() <= 1e-10);
    Ok(field.real_part())
}

/// Exact periodic heat propagator: each mode scaled by
/// exp(-nu |k|^2 t) with physical wavenumbers.
pub fn heat_operator_exact(u0: &RealTensor, nu: f64, t: f64, grid: &GridSpec) -> Result<RealTensor> {
    grid.require_periodic("heat propagation")?;
    if u0.shape() != grid.resolution() {
        return Err(Error::ShapeMismatch(format!(
            "field {:?} vs grid {:?}",
            u0.shape(),
            grid.resolution()
        )));
    }
    let axes: Vec<usize> = (0..u0.shape().len()).collect();
    let mut spec = fft::fft_nd(&u0.to_complex(), &axes, false)?;
    apply_mode_multiplier(&mut spec, grid, |k2| (-nu * k2 * t).exp());
    let back = fft::fft_nd(&spec, &axes, true)?;
    Ok(back.real_part())
}

/// Exact mean-zero solution of -u'' = f on a periodic grid.
/// Errors when f violates the solvability condition mean(f) = 0.
pub fn poisson_solve_exact(f: &RealTensor, grid: &GridSpec) -> Result<RealTensor> {
    grid.require_periodic("Poisson solve")?;
    if f.shape() != grid.resolution() {
        return Err(Error::ShapeMismatch(format!(
            "field {:?} vs grid {:?}",
            f.shape(),
            grid.resolution()
        )));
    }
    let mean = f.mean();
    if mean.abs() > 1e-9 * (1.0 + f.max_abs()) {
        return Err(Error::Numerical(format!(
            "periodic Poisson problem needs mean-zero forcing, got mean {mean:.3e}"
        )));
    }
    let axes: Vec<usize> = (0..f.shape().len()).collect();
    let mut spec = fft::fft_nd(&f.to_complex(), &axes, false)?;
    apply_mode_multiplier(&mut spec, grid, |k2| if k2 == 0.0 { 0.0 } else { 1.0 / k2 });
    let back = fft::fft_nd(&spec, &axes, true)?;
    Ok(back.real_part())
}

/// Multiply every coefficient by g(|k|^2) with physical wavenumbers.
fn apply_mode_multiplier(spec: &mut ComplexTensor, grid: &GridSpec, g: impl Fn(f64) -> f64) {
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
        spec.data_mut()[lin] *= g(k2);
    }
}

/// One integrating-factor RK4 step of the 1-d viscous Burgers equation
/// u_t + u u_x = nu u_xx. The viscous term is integrated exactly per
/// mode (no stiffness restriction on dt); the quadratic term is
/// dealiased with the 2/3 rule.
pub fn burgers_step(u: &RealTensor, nu: f64, dt: f64, grid: &GridSpec) -> Result<RealTensor> {
    grid.require_periodic("Burgers step")?;
    if u.shape().len() != 1 || u.shape() != grid.resolution() {
        return Err(Error::ShapeMismatch("burgers step expects a 1-d field on its grid".into()));
    }
    let n = u.shape()[0];
    let k: Vec<f64> = grid.wavenumbers(0);
    let cutoff = n as f64 / 3.0; // 2/3 rule on the mode index

    // nonlinear term only: -F[u u_x], dealiased
    let nonlinear = |u_hat: &Vec<Complex64>| -> Vec<Complex64> {
        let mut masked = u_hat.clone();
        for (j, m) in masked.iter_mut().enumerate() {
            let mode = fft::signed_mode(j, n) as f64;
            if mode.abs() > cutoff {
                *m = Complex64::new(0.0, 0.0);
            }
        }
        let u_phys = fft::fft_nd(&ComplexTensor::from_vec(masked.clone()), &[0], true)
            .expect("1-d ifft");
        let ux_hat: Vec<Complex64> = masked
            .iter()
            .enumerate()
            .map(|(j, &c)| Complex64::new(0.0, k[j]) * c)
            .collect();
        let ux_phys = fft::fft_nd(&ComplexTensor::from_vec(ux_hat), &[0], true).expect("1-d ifft");
        let product = u_phys
            .zip_map(&ux_phys, |a, b| Complex64::new(a.re * b.re, 0.0))
            .expect("same shape");
        let nl_hat = fft::fft_nd(&product, &[0], false).expect("1-d fft");
        (0..n)
            .map(|j| {
                let mode = fft::signed_mode(j, n) as f64;
                if mode.abs() > cutoff {
                    Complex64::new(0.0, 0.0)
                } else {
                    -nl_hat.data()[j]
                }
            })
            .collect()
    };

    let e_half: Vec<f64> = k.iter().map(|&kj| (-nu * kj * kj * dt / 2.0).exp()).collect();
    let e_full: Vec<f64> = e_half.iter().map(|&e| e * e).collect();
    let u_hat: Vec<Complex64> = fft::fft_nd(&u.to_complex(), &[0], false)?.into_data();

    let comb = |a: &[Complex64], e: Option<&[f64]>, b: &[Complex64], s: f64| -> Vec<Complex64> {
        (0..n)
            .map(|j| {
                let base = match e {
                    Some(e) => a[j] * e[j],
                    None => a[j],
                };
                base + s * b[j]
            })
            .collect()
    };

    let k1 = nonlinear(&u_hat);
    let stage2 = {
        let inner = comb(&u_hat, None, &k1, dt / 2.0);
        inner.iter().zip(&e_half).map(|(v, &e)| v * e).collect::<Vec<_>>()
    };
    let k2 = nonlinear(&stage2);
    let stage3 = comb(&u_hat, Some(&e_half), &k2, dt / 2.0);
    let k3 = nonlinear(&stage3);
    let stage4 = {
        let mut v = comb(&u_hat, Some(&e_full), &k3, 0.0);
        for j in 0..n {
            v[j] += dt * e_half[j] * k3[j];
        }
        v
    };
    let k4 = nonlinear(&stage4);

    let next: Vec<Complex64> = (0..n)
        .map(|j| {
            e_full[j] * u_hat[j]
                + dt / 6.0 * (e_full[j] * k1[j] + 2.0 * e_half[j] * (k2[j] + k3[j]) + k4[j])
        })
        .collect();
    let back = fft::fft_nd(&ComplexTensor::from_vec(next), &[0], true)?;
    Ok(back.real_part())
}

/// Integrate Burgers over `steps` RK4 steps.
pub fn burgers_solve(
    u0: &RealTensor,
    nu: f64,
    dt: f64,
    steps: usize,
    grid: &GridSpec,
) -> Result<RealTensor> {
    let mut u = u0.clone();
    for _ in 0..steps {
        u = burgers_step(&u, nu, dt, grid)?;
    }
    Ok(u)
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::f64::consts::PI;

    fn grid1(n: usize) -> GridSpec {
        GridSpec::periodic_unit(&[n])
    }

    #[test]
    fn grf_is_deterministic_and_real() {
        let spec = GrfSpec {
            resolution: vec![64],
            domain_length: vec![2.0 * PI],
            gamma: 1.5,
            k_max: 8,
            seed: 7,
        };
        let a = sample_grf(&spec, 3).unwrap();
        let b = sample_grf(&spec, 3).unwrap();
        assert_eq!(a, b);
        let c = sample_grf(&spec, 4).unwrap();
        assert_ne!(a, c);

        // imaginary part of the inverse transform vanished
        let complex = fft::fft_nd(
            &fft::fft_nd(&a.to_complex(), &[0], false).unwrap(),
            &[0],
            true,
        )
        .unwrap();
        assert!(complex.imag_part().max_abs() <= 1e-12);
    }

    #[test]
    fn grf_respects_its_band_limit_and_mean() {
        let spec = GrfSpec {
            resolution: vec![64],
            domain_length: vec![2.0 * PI],
            gamma: 2.0,
            k_max: 5,
            seed: 11,
        };
        let f = sample_grf(&spec, 0).unwrap();
        assert!(f.mean().abs() <= 1e-12);
        let shells = crate::spectral::shell_power_1d(&f).unwrap();
        let beyond: f64 = shells[6..].iter().sum();
        assert!(beyond <= 1e-20, "energy beyond k_max: {beyond:e}");
        let report = crate::spectral::validate_nyquist(&[2 * spec.k_max], &grid1(64)).unwrap();
        assert!(!report.has_hard_violation());
    }

    #[test]
    fn grf_ensemble_power_follows_the_power_law() {
        let spec = GrfSpec {
            resolution: vec![64],
            domain_length: vec![2.0 * PI],
            gamma: 1.5,
            k_max: 8,
            seed: 5,
        };
        let n_samples = 1000;
        let mut mean_shells = vec![0.0; 33];
        for i in 0..n_samples {
            let f = sample_grf(&spec, i).unwrap();
            let shells = crate::spectral::shell_power_1d(&f).unwrap();
            for (a, b) in mean_shells.iter_mut().zip(&shells) {
                *a += b / n_samples as f64;
            }
        }
        // E|X_k|^2 proportional to k^{-2 gamma}
        let reference = mean_shells[1];
        for k in 1..=8usize {
            let expect = reference * (k as f64).powf(-2.0 * spec.gamma);
            let got = mean_shells[k];
            assert!(
                (got - expect).abs() <= 0.10 * expect,
                "k={k}: {got:e} vs {expect:e}"
            );
        }
    }

    #[test]
    fn grf_2d_is_real_and_band_limited() {
        let spec = GrfSpec {
            resolution: vec![32, 32],
            domain_length: vec![2.0 * PI, 2.0 * PI],
            gamma: 2.0,
            k_max: 6,
            seed: 3,
        };
        let f = sample_grf(&spec, 1).unwrap();
        assert_eq!(f.shape(), &[32, 32]);
        let shells = crate::spectral::shell_power_1d(&f).unwrap();
        let beyond: f64 = shells[7..].iter().sum();
        assert!(beyond <= 1e-18);
    }

    #[test]
    fn heat_damps_single_modes_exactly() {
        let n = 64;
        let grid = grid1(n);
        let k = 3.0;
        let u0 = RealTensor::from_fn(&[n], |idx| (k * 2.0 * PI * idx[0] as f64 / n as f64).sin());
        let (nu, t) = (0.05, 0.7);
        let u = heat_operator_exact(&u0, nu, t, &grid).unwrap();
        let decay = (-nu * k * k * t).exp();
        for j in 0..n {
            assert!((u.data()[j] - decay * u0.data()[j]).abs() <= 1e-12);
        }
    }

    #[test]
    fn heat_identity_and_semigroup() {
        let grid = grid1(32);
        let spec = GrfSpec {
            resolution: vec![32],
            domain_length: vec![2.0 * PI],
            gamma: 1.0,
            k_max: 6,
            seed: 9,
        };
        let u0 = sample_grf(&spec, 0).unwrap();
        let id1 = heat_operator_exact(&u0, 0.0, 1.0, &grid).unwrap();
        let id2 = heat_operator_exact(&u0, 0.3, 0.0, &grid).unwrap();
        for j in 0..32 {
            assert!((id1.data()[j] - u0.data()[j]).abs() <= 1e-12);
            assert!((id2.data()[j] - u0.data()[j]).abs() <= 1e-12);
        }
        let two_steps = heat_operator_exact(
            &heat_operator_exact(&u0, 0.1, 0.4, &grid).unwrap(),
            0.1,
            0.6,
            &grid,
        )
        .unwrap();
        let one_step = heat_operator_exact(&u0, 0.1, 1.0, &grid).unwrap();
        for j in 0..32 {
            assert!((two_steps.data()[j] - one_step.data()[j]).abs() <= 1e-12);
        }
    }

    #[test]
    fn heat_2d_damps_by_total_wavenumber() {
        let n = 32;
        let grid = GridSpec::periodic_unit(&[n, n]);
        let (kx, ky) = (3.0, 2.0);
        let u0 = RealTensor::from_fn(&[n, n], |idx| {
            let x = 2.0 * PI * idx[0] as f64 / n as f64;
            let y = 2.0 * PI * idx[1] as f64 / n as f64;
            (kx * x).sin() * (ky * y).cos()
        });
        let (nu, t) = (0.04, 0.5);
        let u = heat_operator_exact(&u0, nu, t, &grid).unwrap();
        let decay = (-nu * (kx * kx + ky * ky) * t).exp();
        for (a, b) in u.data().iter().zip(u0.data()) {
            assert!((a - decay * b).abs() <= 1e-12);
        }
    }

    #[test]
    fn poisson_solves_single_modes() {
        let n = 64;
        let grid = grid1(n);
        let k = 4.0;
        let f = RealTensor::from_fn(&[n], |idx| (k * 2.0 * PI * idx[0] as f64 / n as f64).sin());
        let u = poisson_solve_exact(&f, &grid).unwrap();
        for j in 0..n {
            assert!((u.data()[j] - f.data()[j] / (k * k)).abs() <= 1e-12);
        }
        assert!(u.mean().abs() <= 1e-13);
    }

    #[test]
    fn poisson_rejects_nonzero_mean() {
        let grid = grid1(16);
        let f = RealTensor::from_fn(&[16], |_| 1.0);
        assert!(poisson_solve_exact(&f, &grid).is_err());
    }

    #[test]
    fn burgers_conserves_the_mean() {
        let grid = grid1(128);
        let u0 = RealTensor::from_fn(&[128], |idx| {
            let x = 2.0 * PI * idx[0] as f64 / 128.0;
            x.sin() + 0.5 * (2.0 * x).cos() + 0.3
        });
        let mut u = u0.clone();
        for _ in 0..20 {
            u = burgers_step(&u, 0.05, 1e-3, &grid).unwrap();
            assert!((u.mean() - u0.mean()).abs() <= 1e-10);
        }
    }

    #[test]
    fn burgers_is_resolution_converged_for_smooth_data() {
        let make = |n: usize| {
            RealTensor::from_fn(&[n], |idx| {
                let x = 2.0 * PI * idx[0] as f64 / n as f64;
                0.5 * x.sin() + 0.3 * (2.0 * x).cos()
            })
        };
        let coarse = burgers_solve(&make(256), 0.05, 1e-3, 100, &grid1(256)).unwrap();
        let fine = burgers_solve(&make(512), 0.05, 1e-3, 100, &grid1(512)).unwrap();
        // compare on the shared nodes
        let mut max = 0.0f64;
        for j in 0..256 {
            max = max.max((coarse.data()[j] - fine.data()[2 * j]).abs());
        }
        assert!(max <= 1e-6, "resolution gap {max:e}");
    }

    #[test]
    fn burgers_linearizes_to_heat_for_tiny_amplitudes() {
        // the Burgers-vs-heat gap scales like eps * k * T, so the
        // horizon is kept short enough for a 1e-8 relative match
        let n = 128;
        let grid = grid1(n);
        let eps = 1e-6;
        let u0 = RealTensor::from_fn(&[n], |idx| {
            let x = 2.0 * PI * idx[0] as f64 / n as f64;
            eps * ((3.0 * x).sin() + 0.5 * x.cos())
        });
        let steps = 40;
        let dt = 5e-5;
        let nonlinear = burgers_solve(&u0, 0.1, dt, steps, &grid).unwrap();
        let linear = heat_operator_exact(&u0, 0.1, dt * steps as f64, &grid).unwrap();
        let num: f64 = nonlinear
            .data()
            .iter()
            .zip(linear.data())
            .map(|(a, b)| (a - b).powi(2))
            .sum::<f64>()
            .sqrt();
        let den = linear.norm2().max(1e-300);
        assert!(num / den <= 1e-8, "relative gap {:e}", num / den);
    }
}
