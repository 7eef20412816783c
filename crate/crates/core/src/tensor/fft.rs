//! Discrete Fourier transforms under the orthonormal convention:
//! a factor of 1/sqrt(N) on both the forward and inverse transform,
//! which makes every transform unitary.
//!
//! Power-of-two lanes go through an iterative radix-2 FFT with
//! precomputed twiddle tables; any other length silently falls back to
//! the quadratic DFT (queryable via [`uses_fast_path`]).

use num_complex::Complex64;
use std::f64::consts::PI;

use super::{ComplexTensor, RealTensor};
use crate::error::{Error, Result};

/// True when the radix-2 fast path handles a lane of length `n`.
pub fn uses_fast_path(n: usize) -> bool {
    n.is_power_of_two()
}

/// In-place orthonormal transform of one lane. `inverse` flips the
/// exponent sign; both directions scale by 1/sqrt(n).
fn transform_lane(buf: &mut [Complex64], inverse: bool) {
    let n = buf.len();
    if n <= 1 {
        return;
    }
    if uses_fast_path(n) {
        radix2(buf, inverse);
    } else {
        naive_dft(buf, inverse);
    }
    let scale = 1.0 / (n as f64).sqrt();
    for v in buf.iter_mut() {
        *v *= scale;
    }
}

fn radix2(buf: &mut [Complex64], inverse: bool) {
    let n = buf.len();
    let levels = n.trailing_zeros() as usize;

    // bit-reversal permutation
    for i in 0..n {
        let j = i.reverse_bits() >> (usize::BITS as usize - levels);
        if j > i {
            buf.swap(i, j);
        }
    }

    // twiddle table for the largest stage; stage m reuses every (n/m)-th entry
    let sign = if inverse { 1.0 } else { -1.0 };
    let twiddles: Vec<Complex64> = (0..n / 2)
        .map(|k| Complex64::from_polar(1.0, sign * 2.0 * PI * k as f64 / n as f64))
        .collect();

    let mut size = 2;
    while size <= n {
        let half = size / 2;
        let step = n / size;
        for start in (0..n).step_by(size) {
            for k in 0..half {
                let w = twiddles[k * step];
                let a = buf[start + k];
                let b = buf[start + k + half] * w;
                buf[start + k] = a + b;
                buf[start + k + half] = a - b;
            }
        }
        size *= 2;
    }
}

fn naive_dft(buf: &mut [Complex64], inverse: bool) {
    let n = buf.len();
    let sign = if inverse { 1.0 } else { -1.0 };
    let mut out = vec![Complex64::new(0.0, 0.0); n];
    for (k, o) in out.iter_mut().enumerate() {
        let mut acc = Complex64::new(0.0, 0.0);
        for (j, &x) in buf.iter().enumerate() {
            let phase = sign * 2.0 * PI * ((k * j) % n) as f64 / n as f64;
            acc += x * Complex64::from_polar(1.0, phase);
        }
        *o = acc;
    }
    buf.copy_from_slice(&out);
}

/// Orthonormal transform along the given axes (forward when
/// `inverse == false`). This is the raw, layout-free entry point; the
/// [`Spectrum`] API adds layout bookkeeping on top.
pub fn fft_nd(x: &ComplexTensor, axes: &[usize], inverse: bool) -> Result<ComplexTensor> {
    for &ax in axes {
        if ax >= x.ndim() {
            return Err(Error::InvalidArg(format!(
                "axis {ax} out of range for rank {}",
                x.ndim()
            )));
        }
    }
    let mut out = x.clone();
    for &ax in axes {
        let n = out.shape()[ax];
        let stride = out.strides()[ax];
        let mut lane = vec![Complex64::new(0.0, 0.0); n];
        for base in out.lane_offsets(ax) {
            out.read_lane(base, stride, &mut lane);
            transform_lane(&mut lane, inverse);
            out.write_lane(base, stride, &lane);
        }
    }
    Ok(out)
}

/// Rotate each lane so the zero mode moves to index floor(N/2)
/// (`inverse == false`), or back (`inverse == true`). Handles odd N.
pub fn shift_nd(x: &ComplexTensor, axes: &[usize], inverse: bool) -> Result<ComplexTensor> {
    let mut out = x.clone();
    for &ax in axes {
        if ax >= x.ndim() {
            return Err(Error::InvalidArg(format!(
                "axis {ax} out of range for rank {}",
                x.ndim()
            )));
        }
        let n = out.shape()[ax];
        // forward shift: out[i] = in[(i + ceil(n/2)) mod n]
        let rot = if inverse { n / 2 } else { n - n / 2 };
        let stride = out.strides()[ax];
        let mut lane = vec![Complex64::new(0.0, 0.0); n];
        let mut rotated = vec![Complex64::new(0.0, 0.0); n];
        for base in out.lane_offsets(ax) {
            out.read_lane(base, stride, &mut lane);
            for i in 0..n {
                rotated[i] = lane[(i + rot) % n];
            }
            out.write_lane(base, stride, &rotated);
        }
    }
    Ok(out)
}

/// Signed mode index for entry `j` of a length-`n` natural-order
/// spectrum: 0, 1, .., n/2-1, -n/2, .., -1 (even n).
pub fn signed_mode(j: usize, n: usize) -> i64 {
    if j <= (n - 1) / 2 {
        j as i64
    } else {
        j as i64 - n as i64
    }
}

/// Whether the zero mode sits at index 0 (`Natural`) or at the center
/// (`Centered`, after an fftshift).
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Layout {
    Natural,
    Centered,
}

/// Frequency-domain values plus the layout they are stored in.
/// Layout changes only through [`fftshift`] / [`ifftshift`].
#[derive(Clone, Debug, PartialEq)]
pub struct Spectrum {
    coeffs: ComplexTensor,
    layout: Layout,
}

impl Spectrum {
    pub fn new_natural(coeffs: ComplexTensor) -> Self {
        Spectrum {
            coeffs,
            layout: Layout::Natural,
        }
    }

    pub fn coeffs(&self) -> &ComplexTensor {
        &self.coeffs
    }

    pub fn coeffs_mut(&mut self) -> &mut ComplexTensor {
        &mut self.coeffs
    }

    pub fn into_coeffs(self) -> ComplexTensor {
        self.coeffs
    }

    pub fn layout(&self) -> Layout {
        self.layout
    }

    pub fn shape(&self) -> &[usize] {
        self.coeffs.shape()
    }
}

/// Orthonormal DFT of a 1-d complex signal: X_k = N^{-1/2} sum_n x_n e^{-2 pi i k n / N}.
pub fn dft_1d(signal: &[Complex64]) -> Spectrum {
    let t = ComplexTensor::from_vec(signal.to_vec());
    let coeffs = fft_nd(&t, &[0], false).expect("1-d transform");
    Spectrum::new_natural(coeffs)
}

/// Inverse of [`dft_1d`]. The spectrum must be in natural layout;
/// callers holding a centered spectrum must `ifftshift` first.
pub fn idft_1d(spectrum: &Spectrum) -> Result<Vec<Complex64>> {
    if spectrum.layout != Layout::Natural {
        return Err(Error::Layout(
            "idft requires natural layout; apply ifftshift first".into(),
        ));
    }
    let out = fft_nd(&spectrum.coeffs, &[0], true)?;
    Ok(out.into_data())
}

/// Forward transform along `axes`, returning a natural-layout spectrum.
pub fn fft(signal: &ComplexTensor, axes: &[usize]) -> Result<Spectrum> {
    Ok(Spectrum::new_natural(fft_nd(signal, axes, false)?))
}

/// Inverse transform along `axes`. Natural layout required.
pub fn ifft(spectrum: &Spectrum, axes: &[usize]) -> Result<ComplexTensor> {
    if spectrum.layout != Layout::Natural {
        return Err(Error::Layout(
            "ifft requires natural layout; apply ifftshift first".into(),
        ));
    }
    fft_nd(&spectrum.coeffs, axes, true)
}

/// Move the zero mode to the center along every axis.
/// Errors when the spectrum is already centered.
pub fn fftshift(spectrum: &Spectrum) -> Result<Spectrum> {
    if spectrum.layout == Layout::Centered {
        return Err(Error::Layout("spectrum is already centered".into()));
    }
    let axes: Vec<usize> = (0..spectrum.coeffs.ndim()).collect();
    Ok(Spectrum {
        coeffs: shift_nd(&spectrum.coeffs, &axes, false)?,
        layout: Layout::Centered,
    })
}

/// Move the zero mode back to index 0 along every axis.
/// Errors when the spectrum is already natural.
pub fn ifftshift(spectrum: &Spectrum) -> Result<Spectrum> {
    if spectrum.layout == Layout::Natural {
        return Err(Error::Layout("spectrum is already in natural layout".into()));
    }
    let axes: Vec<usize> = (0..spectrum.coeffs.ndim()).collect();
    Ok(Spectrum {
        coeffs: shift_nd(&spectrum.coeffs, &axes, true)?,
        layout: Layout::Natural,
    })
}

/// Power spectrum P_k = |X_k|^2 over the transformed axes (natural
/// layout). By Parseval under the orthonormal convention the entries
/// sum to the signal energy.
pub fn power_spectrum(signal: &ComplexTensor, axes: &[usize]) -> Result<RealTensor> {
    let spec = fft_nd(signal, axes, false)?;
    Ok(RealTensor::from_data(
        &spec.shape().to_vec(),
        spec.data().iter().map(|z| z.norm_sqr()).collect(),
    )
    .expect("consistent shape"))
}

/// Fold the +-k shells of a 1-d power spectrum: entry k of the result
/// is P_k + P_{N-k} (k >= 1), entry 0 is P_0. Length floor(N/2)+1.
pub fn fold_power_shells(power: &[f64]) -> Vec<f64> {
    let n = power.len();
    let mut shells = vec![0.0; n / 2 + 1];
    shells[0] = power[0];
    for k in 1..=n / 2 {
        let mut v = power[k];
        if k != n - k && n - k < n {
            v += power[n - k];
        }
        shells[k] = v;
    }
    shells
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    /// Textbook quadratic DFT, independent of the library path.
    fn oracle_dft(x: &[Complex64]) -> Vec<Complex64> {
        let n = x.len();
        let mut out = vec![Complex64::new(0.0, 0.0); n];
        for k in 0..n {
            let mut acc = Complex64::new(0.0, 0.0);
            for (j, &v) in x.iter().enumerate() {
                let ang = -2.0 * PI * (k as f64) * (j as f64) / n as f64;
                acc += v * Complex64::new(ang.cos(), ang.sin());
            }
            out[k] = acc / (n as f64).sqrt();
        }
        out
    }

    fn random_signal(n: usize, seed: u64) -> Vec<Complex64> {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        (0..n)
            .map(|_| Complex64::new(rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0)))
            .collect()
    }

    #[test]
    fn constant_signal_concentrates_at_zero() {
        let c = Complex64::new(0.7, -0.2);
        let n = 16;
        let spec = dft_1d(&vec![c; n]);
        let x0 = spec.coeffs().data()[0];
        assert!((x0 - c * (n as f64).sqrt()).norm() < 1e-12);
        for k in 1..n {
            assert!(spec.coeffs().data()[k].norm() < 1e-12);
        }
    }

    #[test]
    fn unit_impulse_has_flat_spectrum() {
        let mut x = vec![Complex64::new(0.0, 0.0); 4];
        x[0] = Complex64::new(1.0, 0.0);
        let spec = dft_1d(&x);
        for k in 0..4 {
            assert!((spec.coeffs().data()[k] - Complex64::new(0.5, 0.0)).norm() < 1e-14);
        }
    }

    #[test]
    fn complex_exponential_is_a_basis_vector() {
        let n = 8;
        let x: Vec<Complex64> = (0..n)
            .map(|j| Complex64::from_polar(1.0, 2.0 * PI * 3.0 * j as f64 / n as f64))
            .collect();
        let spec = dft_1d(&x);
        for k in 0..n {
            let expect = if k == 3 { (n as f64).sqrt() } else { 0.0 };
            assert!(
                (spec.coeffs().data()[k] - Complex64::new(expect, 0.0)).norm() < 1e-12,
                "k={k}"
            );
        }
    }

    #[test]
    fn idft_inverts_dft() {
        let x = random_signal(32, 7);
        let back = idft_1d(&dft_1d(&x)).unwrap();
        for (a, b) in x.iter().zip(&back) {
            assert!((a - b).norm() < 1e-12);
        }
    }

    #[test]
    fn idft_of_scaled_basis_vector() {
        let n = 8;
        let mut coeffs = vec![Complex64::new(0.0, 0.0); n];
        coeffs[3] = Complex64::new((n as f64).sqrt(), 0.0);
        let sig = idft_1d(&Spectrum::new_natural(ComplexTensor::from_vec(coeffs))).unwrap();
        for (j, v) in sig.iter().enumerate() {
            let expect = Complex64::from_polar(1.0, 2.0 * PI * 3.0 * j as f64 / n as f64);
            assert!((v - expect).norm() < 1e-12);
        }
    }

    #[test]
    fn idft_zero_spectrum_is_zero_signal() {
        let spec = Spectrum::new_natural(ComplexTensor::zeros(&[9]));
        let sig = idft_1d(&spec).unwrap();
        assert!(sig.iter().all(|v| v.norm() == 0.0));
    }

    #[test]
    fn idft_rejects_centered_layout() {
        let spec = fftshift(&dft_1d(&random_signal(8, 1))).unwrap();
        assert!(matches!(idft_1d(&spec), Err(Error::Layout(_))));
    }

    #[test]
    fn fft_matches_oracle_on_powers_of_two_and_fallback_lengths() {
        for &n in &[2usize, 4, 8, 16, 64, 12, 15, 100] {
            let x = random_signal(n, n as u64);
            let fast = dft_1d(&x);
            let slow = oracle_dft(&x);
            let max: f64 = fast
                .coeffs()
                .data()
                .iter()
                .zip(&slow)
                .map(|(a, b)| (a - b).norm())
                .fold(0.0, f64::max);
            assert!(max < 1e-12, "n={n}, max diff {max:e}");
            assert_eq!(uses_fast_path(n), n.is_power_of_two());
        }
    }

    #[test]
    fn fft_is_linear() {
        let x = ComplexTensor::from_vec(random_signal(64, 2));
        let y = ComplexTensor::from_vec(random_signal(64, 3));
        let a = Complex64::new(0.3, 1.1);
        let b = Complex64::new(-0.8, 0.2);
        let lhs = fft(
            &x.zip_map(&y, |u, v| a * u + b * v).unwrap(),
            &[0],
        )
        .unwrap();
        let fx = fft(&x, &[0]).unwrap();
        let fy = fft(&y, &[0]).unwrap();
        let rhs = fx
            .coeffs()
            .zip_map(fy.coeffs(), |u, v| a * u + b * v)
            .unwrap();
        let max: f64 = lhs
            .coeffs()
            .data()
            .iter()
            .zip(rhs.data())
            .map(|(p, q)| (p - q).norm())
            .fold(0.0, f64::max);
        assert!(max < 1e-12);
    }

    #[test]
    fn fft_2d_equals_axis_composition() {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        let field = ComplexTensor::from_fn(&[32, 32], |_| {
            Complex64::new(rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0))
        });
        let both = fft_nd(&field, &[0, 1], false).unwrap();
        let one_then_other = fft_nd(&fft_nd(&field, &[0], false).unwrap(), &[1], false).unwrap();
        let max: f64 = both
            .data()
            .iter()
            .zip(one_then_other.data())
            .map(|(a, b)| (a - b).norm())
            .fold(0.0, f64::max);
        assert!(max < 1e-12);
    }

    #[test]
    fn fft_is_unitary_inner_product() {
        let x = ComplexTensor::from_vec(random_signal(64, 4));
        let y = ComplexTensor::from_vec(random_signal(64, 5));
        let fx = fft(&x, &[0]).unwrap();
        let fy = fft(&y, &[0]).unwrap();
        let lhs = fx.coeffs().inner(fy.coeffs()).unwrap();
        let rhs = x.inner(&y).unwrap();
        assert!((lhs - rhs).norm() < 1e-12);
    }

    #[test]
    fn fftshift_even_and_odd() {
        let s = Spectrum::new_natural(ComplexTensor::from_vec(
            (0..4).map(|i| Complex64::new(i as f64, 0.0)).collect(),
        ));
        let shifted = fftshift(&s).unwrap();
        let got: Vec<f64> = shifted.coeffs().data().iter().map(|z| z.re).collect();
        assert_eq!(got, vec![2.0, 3.0, 0.0, 1.0]);

        let s5 = Spectrum::new_natural(ComplexTensor::from_vec(
            (0..5).map(|i| Complex64::new(i as f64, 0.0)).collect(),
        ));
        let shifted5 = fftshift(&s5).unwrap();
        let got5: Vec<f64> = shifted5.coeffs().data().iter().map(|z| z.re).collect();
        assert_eq!(got5, vec![3.0, 4.0, 0.0, 1.0, 2.0]);
        let back = ifftshift(&shifted5).unwrap();
        let round: Vec<f64> = back.coeffs().data().iter().map(|z| z.re).collect();
        assert_eq!(round, vec![0.0, 1.0, 2.0, 3.0, 4.0]);
    }

    #[test]
    fn double_shift_errors() {
        let s = dft_1d(&random_signal(8, 6));
        let c = fftshift(&s).unwrap();
        assert!(fftshift(&c).is_err());
        let n = ifftshift(&c).unwrap();
        assert!(ifftshift(&n).is_err());
    }

    #[test]
    fn power_spectrum_fingerprint() {
        // f(x) = 3 cos 4x + 0.1 sin 10x + cos 22x on [0, 2pi), 128 points
        let n = 128;
        let sig = ComplexTensor::from_fn(&[n], |idx| {
            let x = 2.0 * PI * idx[0] as f64 / n as f64;
            Complex64::new(
                3.0 * (4.0 * x).cos() + 0.1 * (10.0 * x).sin() + (22.0 * x).cos(),
                0.0,
            )
        });
        let p = power_spectrum(&sig, &[0]).unwrap();
        let shells = fold_power_shells(p.data());
        for (k, &v) in shells.iter().enumerate() {
            if [4usize, 10, 22].contains(&k) {
                assert!(v > 1e-6, "expected peak at k={k}");
            } else {
                assert!(v < 1e-20, "unexpected power {v:e} at k={k}");
            }
        }
        assert!(shells[4] > shells[22] && shells[22] > shells[10]);
    }

    #[test]
    fn parseval_holds() {
        let x = ComplexTensor::from_vec(random_signal(96, 9));
        let p = power_spectrum(&x, &[0]).unwrap();
        let lhs: f64 = x.data().iter().map(|z| z.norm_sqr()).sum();
        let rhs: f64 = p.data().iter().sum();
        assert!((lhs - rhs).abs() <= 1e-10 * lhs.max(1.0));
    }

    #[test]
    fn hermitian_symmetry_for_real_input() {
        let mut rng = ChaCha8Rng::seed_from_u64(13);
        let n = 24;
        let x: Vec<Complex64> = (0..n)
            .map(|_| Complex64::new(rng.gen_range(-1.0..1.0), 0.0))
            .collect();
        let spec = dft_1d(&x);
        for k in 1..n {
            let a = spec.coeffs().data()[k];
            let b = spec.coeffs().data()[n - k].conj();
            assert!((a - b).norm() < 1e-12);
        }
    }

    proptest! {
        #[test]
        fn roundtrip_and_unitarity(seed in 0u64..1000, log_n in 1usize..9) {
            let n = 1usize << log_n;
            let x = ComplexTensor::from_vec(random_signal(n, seed));
            let spec = fft(&x, &[0]).unwrap();
            // unitarity
            prop_assert!((spec.coeffs().norm2() - x.norm2()).abs() <= 1e-12 * x.norm2().max(1.0));
            // round trip
            let back = ifft(&spec, &[0]).unwrap();
            let max: f64 = back.data().iter().zip(x.data()).map(|(a, b)| (a - b).norm()).fold(0.0, f64::max);
            prop_assert!(max < 1e-12);
        }

        #[test]
        fn shift_roundtrip_any_length(n in 1usize..40) {
            let x = ComplexTensor::from_vec(random_signal(n, n as u64 + 77));
            let s = Spectrum::new_natural(x.clone());
            let back = ifftshift(&fftshift(&s).unwrap()).unwrap();
            prop_assert_eq!(back.coeffs().data(), x.data());
        }
    }
}
