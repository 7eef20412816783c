//! Periodic extensions of non-periodic signals: zero/mirror padding,
//! FC-Legendre, FC-Gram, and Sobolev-spectrum optimization, plus the
//! restriction back to the original samples.
//!
//! Layout: a length-n signal extended by c points becomes the periodic
//! sequence [ext_{c/2} .. ext_{c-1}, f_0 .. f_{n-1}, ext_0 .. ext_{c/2-1}]
//! of period n + c; the original samples always sit unchanged in the
//! middle. Extension values live at unit-spaced positions n .. n+c-1,
//! with the wrapped left boundary at positions n+c .. n+c+d-1.
//!
//! FC methods are accurate for noise-free signals; differentiating
//! noisy data through them amplifies high-frequency noise. For noisy
//! inputs prefer `SpectrumOpt` with s in [1, 2].

use nalgebra::{DMatrix, DVector};
use num_complex::Complex64;

use crate::error::{Error, Result};
use crate::tensor::fft::signed_mode;
use crate::tensor::RealTensor;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ExtensionMethod {
    ZeroPad,
    MirrorPad,
    FcLegendre,
    FcGram,
    SpectrumOpt,
}

impl ExtensionMethod {
    pub fn parse(name: &str) -> Result<Self> {
        match name.to_ascii_lowercase().replace('_', "-").as_str() {
            "zero" | "zero-pad" => Ok(ExtensionMethod::ZeroPad),
            "mirror" | "mirror-pad" => Ok(ExtensionMethod::MirrorPad),
            "fc-legendre" | "legendre" => Ok(ExtensionMethod::FcLegendre),
            "fc-gram" | "gram" => Ok(ExtensionMethod::FcGram),
            "spectrum-opt" | "spectrum" => Ok(ExtensionMethod::SpectrumOpt),
            other => Err(Error::InvalidArg(format!("unknown extension method '{other}'"))),
        }
    }
}

#[derive(Debug, Clone)]
enum OperatorData {
    Pad,
    /// E in R^{c x 2d}: extension = E (f_r, f_l).
    Legendre { e: DMatrix<f64> },
    /// Blended one-sided evaluation matrices, each c x d:
    /// extension = right f_r + left f_l.
    Gram {
        right: DMatrix<f64>,
        left: DMatrix<f64>,
    },
    /// G in R^{c x n}: extension = G f (depends on the signal length).
    SpectrumOpt { g: DMatrix<f64>, n: usize },
}

/// Precomputed, input-independent map from boundary samples to
/// extension samples. Immutable after construction; apply it to any
/// number of signals.
#[derive(Debug, Clone)]
pub struct ExtensionOperator {
    method: ExtensionMethod,
    d: usize,
    c: usize,
    s: Option<f64>,
    data: OperatorData,
}

fn check_c(c: usize) -> Result<()> {
    if c < 2 || c % 2 != 0 {
        return Err(Error::InvalidArg(format!(
            "extension length c must be even and >= 2, got {c}"
        )));
    }
    Ok(())
}

/// Shifted Legendre polynomials evaluated on [-1, 1] via the
/// three-term recurrence; one row per node, one column per degree.
fn legendre_rows(ts: &[f64], n_basis: usize) -> DMatrix<f64> {
    let mut m = DMatrix::zeros(ts.len(), n_basis);
    for (row, &t) in ts.iter().enumerate() {
        let mut p_prev = 1.0;
        let mut p_cur = t;
        for col in 0..n_basis {
            let v = match col {
                0 => 1.0,
                1 => t,
                _ => {
                    let k = (col - 1) as f64;
                    let p_next = ((2.0 * k + 1.0) * t * p_cur - k * p_prev) / (k + 1.0);
                    p_prev = p_cur;
                    p_cur = p_next;
                    p_next
                }
            };
            m[(row, col)] = v;
        }
    }
    m
}

fn pseudo_inverse(m: &DMatrix<f64>, what: &str) -> Result<DMatrix<f64>> {
    let svd = m.clone().svd(true, true);
    let smax = svd.singular_values.max();
    let smin = svd.singular_values.min();
    if smax <= 0.0 || smin < 1e-12 * smax {
        return Err(Error::Numerical(format!(
            "{what}: least-squares system is rank deficient \
             (condition number {:.3e}); reduce d or enlarge the stencil",
            if smin > 0.0 { smax / smin } else { f64::INFINITY }
        )));
    }
    svd.pseudo_inverse(1e-13 * smax)
        .map_err(|e| Error::Numerical(format!("{what}: SVD failed: {e}")))
}

impl ExtensionOperator {
    pub fn method(&self) -> ExtensionMethod {
        self.method
    }

    pub fn stencil_width(&self) -> usize {
        self.d
    }

    pub fn extension_len(&self) -> usize {
        self.c
    }

    pub fn sobolev_order(&self) -> Option<f64> {
        self.s
    }

    pub fn zero_pad(c: usize) -> Result<Self> {
        check_c(c)?;
        Ok(ExtensionOperator {
            method: ExtensionMethod::ZeroPad,
            d: 1,
            c,
            s: None,
            data: OperatorData::Pad,
        })
    }

    pub fn mirror_pad(c: usize) -> Result<Self> {
        check_c(c)?;
        Ok(ExtensionOperator {
            method: ExtensionMethod::MirrorPad,
            d: 1,
            c,
            s: None,
            data: OperatorData::Pad,
        })
    }

    /// FC-Legendre: fit one polynomial of degree 2d-1 through the 2d
    /// boundary samples (in a Legendre basis over the wrap interval for
    /// conditioning) and evaluate it at the extension nodes.
    pub fn fc_legendre(d: usize, c: usize, n: usize) -> Result<Self> {
        check_c(c)?;
        if d < 1 {
            return Err(Error::InvalidArg("stencil width d must be >= 1".into()));
        }
        if n < 2 * d {
            return Err(Error::InvalidArg(format!(
                "signal length {n} shorter than 2d = {}",
                2 * d
            )));
        }
        // positions (unit spacing, shifted so the right stencil starts at 0):
        // right stencil 0..d-1, extension d..d+c-1, wrapped left d+c..d+c+d-1
        let span = (2 * d + c - 1) as f64;
        let to_t = |x: f64| 2.0 * x / span - 1.0;
        let sample_ts: Vec<f64> = (0..d)
            .map(|i| to_t(i as f64))
            .chain((0..d).map(|i| to_t((d + c + i) as f64)))
            .collect();
        let ext_ts: Vec<f64> = (0..c).map(|i| to_t((d + i) as f64)).collect();
        let b = legendre_rows(&sample_ts, 2 * d);
        let p_ext = legendre_rows(&ext_ts, 2 * d);
        let e = p_ext * pseudo_inverse(&b, "FC-Legendre")?;
        Ok(ExtensionOperator {
            method: ExtensionMethod::FcLegendre,
            d,
            c,
            s: None,
            data: OperatorData::Legendre { e },
        })
    }

    /// FC-Gram: project each boundary vector onto an orthonormal
    /// degree-(d-1) polynomial basis on its own stencil, evaluate both
    /// one-sided fits at the extension nodes, and blend them with the
    /// window w(t) = (1 + cos(pi t)) / 2.
    pub fn fc_gram(d: usize, c: usize, n: usize) -> Result<Self> {
        check_c(c)?;
        if d < 1 {
            return Err(Error::InvalidArg("stencil width d must be >= 1".into()));
        }
        if n < 2 * d {
            return Err(Error::InvalidArg(format!(
                "signal length {n} shorter than 2d = {}",
                2 * d
            )));
        }
        let scale = c as f64;

        // one-sided fit: orthonormalize monomials on the stencil nodes,
        // return the blended c x d evaluation matrix
        let one_side = |stencil_x: Vec<f64>, x_ref: f64, blend: &dyn Fn(usize) -> f64| -> Result<DMatrix<f64>> {
            let v = DMatrix::from_fn(d, d, |row, col| {
                ((stencil_x[row] - x_ref) / scale).powi(col as i32)
            });
            let qr = v.clone().qr();
            let q = qr.q();
            let r = qr.r();
            for i in 0..d {
                if r[(i, i)].abs() < 1e-12 {
                    return Err(Error::Numerical(
                        "FC-Gram: degenerate stencil basis (rank deficient)".into(),
                    ));
                }
            }
            let r_inv = pseudo_inverse(&r, "FC-Gram")?;
            let m_ext = DMatrix::from_fn(c, d, |row, col| {
                (((d + row) as f64 - x_ref) / scale).powi(col as i32)
            });
            let mut blended = m_ext * r_inv * q.transpose();
            for i in 0..c {
                let w = blend(i);
                for j in 0..d {
                    blended[(i, j)] *= w;
                }
            }
            Ok(blended)
        };

        // blend parameter runs from the right boundary (t=0, w=1) to the
        // wrapped left boundary (t=1, w=0) across the extension nodes
        let w_of = |i: usize| {
            let t = (i + 1) as f64 / (c + 1) as f64;
            0.5 * (1.0 + (std::f64::consts::PI * t).cos())
        };
        let right_x: Vec<f64> = (0..d).map(|i| i as f64).collect();
        let left_x: Vec<f64> = (0..d).map(|i| (d + c + i) as f64).collect();
        let right = one_side(right_x, (d - 1) as f64, &w_of)?;
        let left = one_side(left_x, (d + c) as f64, &|i| 1.0 - w_of(i))?;
        Ok(ExtensionOperator {
            method: ExtensionMethod::FcGram,
            d,
            c,
            s: None,
            data: OperatorData::Gram { right, left },
        })
    }

    /// Extension minimizing the discrete Sobolev H^s seminorm
    /// sum_{k != 0} (1 + |k|^2)^s |u_hat(k)|^2 of the extended periodic
    /// sequence, by closed-form linear least squares. The k = 0 term is
    /// excluded so that the functional is a pure smoothness penalty
    /// (a constant signal then extends to itself exactly).
    pub fn spectrum_opt(n: usize, c: usize, s: f64) -> Result<Self> {
        check_c(c)?;
        if s < 0.0 {
            return Err(Error::InvalidArg("Sobolev order s must be >= 0".into()));
        }
        if n < 1 {
            return Err(Error::InvalidArg("empty signal".into()));
        }
        let m = n + c;
        // rows of sqrt(w_k) F, split into real and imaginary parts;
        // columns 0..n are the fixed samples, n..m the free values
        let mut a = DMatrix::<f64>::zeros(2 * m, c);
        let mut b = DMatrix::<f64>::zeros(2 * m, n);
        for k in 0..m {
            let mode = signed_mode(k, m);
            let w = if mode == 0 {
                0.0
            } else {
                (1.0 + (mode * mode) as f64).powf(s)
            };
            let sw = w.sqrt() / (m as f64).sqrt();
            for j in 0..m {
                let ang = -2.0 * std::f64::consts::PI * (k as f64) * (j as f64) / m as f64;
                let re = sw * ang.cos();
                let im = sw * ang.sin();
                if j < n {
                    b[(k, j)] = re;
                    b[(m + k, j)] = im;
                } else {
                    a[(k, j - n)] = re;
                    a[(m + k, j - n)] = im;
                }
            }
        }
        let g = -(pseudo_inverse(&a, "spectrum-opt")? * b);
        Ok(ExtensionOperator {
            method: ExtensionMethod::SpectrumOpt,
            d: 1,
            c,
            s: Some(s),
            data: OperatorData::SpectrumOpt { g, n },
        })
    }

    /// Raw extension values ext_0 .. ext_{c-1} (positions n .. n+c-1).
    fn extension_values(&self, f: &[f64]) -> Result<Vec<f64>> {
        let n = f.len();
        let (d, c) = (self.d, self.c);
        match &self.data {
            OperatorData::Pad => match self.method {
                ExtensionMethod::ZeroPad => Ok(vec![0.0; c]),
                ExtensionMethod::MirrorPad => {
                    if c / 2 + 1 > n {
                        return Err(Error::InvalidArg(format!(
                            "mirror padding c = {c} too long for signal length {n}"
                        )));
                    }
                    // reflection about the endpoints, endpoints not duplicated
                    Ok((0..c)
                        .map(|j| {
                            if j < c / 2 {
                                f[n - 2 - j]
                            } else {
                                f[c - j]
                            }
                        })
                        .collect())
                }
                _ => unreachable!(),
            },
            OperatorData::Legendre { e } => {
                if n < 2 * d {
                    return Err(Error::InvalidArg(format!(
                        "signal length {n} shorter than 2d = {}",
                        2 * d
                    )));
                }
                let mut y = DVector::zeros(2 * d);
                for i in 0..d {
                    y[i] = f[n - d + i];
                    y[d + i] = f[i];
                }
                Ok((e * y).iter().copied().collect())
            }
            OperatorData::Gram { right, left } => {
                if n < 2 * d {
                    return Err(Error::InvalidArg(format!(
                        "signal length {n} shorter than 2d = {}",
                        2 * d
                    )));
                }
                let fr = DVector::from_fn(d, |i, _| f[n - d + i]);
                let fl = DVector::from_fn(d, |i, _| f[i]);
                Ok((right * fr + left * fl).iter().copied().collect())
            }
            OperatorData::SpectrumOpt { g, n: op_n } => {
                if n != *op_n {
                    return Err(Error::InvalidArg(format!(
                        "spectrum-opt operator built for length {op_n}, got {n}"
                    )));
                }
                let fv = DVector::from_column_slice(f);
                Ok((g * fv).iter().copied().collect())
            }
        }
    }
}

/// Extend a 1-d signal to one period of length n + c with the original
/// samples in the middle.
pub fn extend_1d(f: &[f64], op: &ExtensionOperator) -> Result<Vec<f64>> {
    if f.is_empty() {
        return Err(Error::InvalidArg("empty signal".into()));
    }
    let ext = op.extension_values(f)?;
    let c = op.c;
    let mut out = Vec::with_capacity(f.len() + c);
    out.extend_from_slice(&ext[c / 2..]);
    out.extend_from_slice(f);
    out.extend_from_slice(&ext[..c / 2]);
    Ok(out)
}

/// Recover the original n samples from an extended sequence.
pub fn restrict(extended: &[f64], n: usize, c: usize) -> Result<Vec<f64>> {
    if extended.len() != n + c {
        return Err(Error::ShapeMismatch(format!(
            "extended length {} != n + c = {}",
            extended.len(),
            n + c
        )));
    }
    Ok(extended[c / 2..c / 2 + n].to_vec())
}

/// Apply a 1-d extension along each axis in turn (axis 0 first).
pub fn extend_nd(field: &RealTensor, ops: &[&ExtensionOperator]) -> Result<RealTensor> {
    if ops.len() != field.shape().len() {
        return Err(Error::InvalidArg("one extension operator per axis required".into()));
    }
    let mut cur = field.to_complex();
    for (axis, op) in ops.iter().enumerate() {
        let n = cur.shape()[axis];
        let stride = cur.strides()[axis];
        let mut out_shape = cur.shape().to_vec();
        out_shape[axis] = n + op.c;
        let mut out = crate::tensor::ComplexTensor::zeros(&out_shape);
        let out_stride = out.strides()[axis];
        let in_offsets = cur.lane_offsets(axis);
        let out_offsets = out.lane_offsets(axis);
        let mut lane = vec![Complex64::new(0.0, 0.0); n];
        for (&ib, &ob) in in_offsets.iter().zip(&out_offsets) {
            cur.read_lane(ib, stride, &mut lane);
            let reals: Vec<f64> = lane.iter().map(|z| z.re).collect();
            let extended = extend_1d(&reals, op)?;
            for (i, &v) in extended.iter().enumerate() {
                out.data_mut()[ob + i * out_stride] = Complex64::new(v, 0.0);
            }
        }
        cur = out;
    }
    Ok(cur.real_part())
}

/// Invert [`extend_nd`] (restriction along each axis, reverse order).
pub fn restrict_nd(field: &RealTensor, ops: &[&ExtensionOperator]) -> Result<RealTensor> {
    if ops.len() != field.shape().len() {
        return Err(Error::InvalidArg("one extension operator per axis required".into()));
    }
    let mut cur = field.clone();
    for axis in (0..ops.len()).rev() {
        let c = ops[axis].c;
        let m = cur.shape()[axis];
        if m <= c {
            return Err(Error::ShapeMismatch(format!(
                "axis {axis} extent {m} too small to strip extension {c}"
            )));
        }
        let complex = cur.to_complex();
        let mut start = vec![0usize; cur.shape().len()];
        let mut size = cur.shape().to_vec();
        start[axis] = c / 2;
        size[axis] = m - c;
        cur = complex.slice(&start, &size)?.real_part();
    }
    Ok(cur)
}

/// One-call Sobolev-spectrum extension (see
/// [`ExtensionOperator::spectrum_opt`]).
pub fn extend_spectrum_opt(f: &[f64], c: usize, s: f64) -> Result<Vec<f64>> {
    let op = ExtensionOperator::spectrum_opt(f.len(), c, s)?;
    extend_1d(f, &op)
}

/// Discrete Sobolev H^s seminorm of one period
/// (the k = 0 term excluded, matching the spectrum-opt objective).
pub fn sobolev_seminorm(sequence: &[f64], s: f64) -> f64 {
    let m = sequence.len();
    let t = crate::tensor::ComplexTensor::from_real_slice(&[m], sequence).expect("1-d");
    let spec = crate::tensor::fft::fft_nd(&t, &[0], false).expect("1-d fft");
    spec.data()
        .iter()
        .enumerate()
        .map(|(k, z)| {
            let mode = signed_mode(k, m);
            if mode == 0 {
                0.0
            } else {
                (1.0 + (mode * mode) as f64).powf(s) * z.norm_sqr()
            }
        })
        .sum()
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn zero_pad_example() {
        let op = ExtensionOperator::zero_pad(2).unwrap();
        let out = extend_1d(&[1.0, 2.0, 3.0], &op).unwrap();
        assert_eq!(out, vec![0.0, 1.0, 2.0, 3.0, 0.0]);
    }

    #[test]
    fn mirror_pad_example() {
        let op = ExtensionOperator::mirror_pad(2).unwrap();
        let out = extend_1d(&[1.0, 2.0, 3.0], &op).unwrap();
        assert_eq!(out, vec![2.0, 1.0, 2.0, 3.0, 2.0]);
    }

    #[test]
    fn odd_c_rejected() {
        assert!(ExtensionOperator::zero_pad(3).is_err());
        assert!(ExtensionOperator::fc_legendre(2, 5, 16).is_err());
    }

    #[test]
    fn fc_methods_reject_short_signals() {
        assert!(ExtensionOperator::fc_legendre(4, 8, 6).is_err());
        let op = ExtensionOperator::fc_legendre(3, 8, 16).unwrap();
        assert!(extend_1d(&[1.0; 5], &op).is_err());
    }

    #[test]
    fn fc_legendre_d1_is_linear_interpolation() {
        let n = 8;
        let c = 4;
        let op = ExtensionOperator::fc_legendre(1, c, n).unwrap();
        let f: Vec<f64> = (0..n).map(|i| (i as f64 * 0.7).sin() + 1.0).collect();
        let ext = op.extension_values(&f).unwrap();
        // linear blend from f_{n-1} (position 0 of the gap) to the
        // wrapped f_0 (position c+1)
        for (j, &v) in ext.iter().enumerate() {
            let t = (j + 1) as f64 / (c + 1) as f64;
            let expect = f[n - 1] * (1.0 - t) + f[0] * t;
            assert!((v - expect).abs() <= 1e-10, "j={j}: {v} vs {expect}");
        }
    }

    /// Lagrange interpolation through the 2d boundary samples —
    /// an implementation-independent oracle for FC-Legendre.
    fn lagrange_eval(xs: &[f64], ys: &[f64], x: f64) -> f64 {
        let mut acc = 0.0;
        for i in 0..xs.len() {
            let mut l = 1.0;
            for j in 0..xs.len() {
                if j != i {
                    l *= (x - xs[j]) / (xs[i] - xs[j]);
                }
            }
            acc += ys[i] * l;
        }
        acc
    }

    #[test]
    fn fc_legendre_reproduces_degree_2d_minus_1_polynomials() {
        let (d, c, n) = (3usize, 8usize, 20usize);
        let op = ExtensionOperator::fc_legendre(d, c, n).unwrap();
        // boundary data sampled from p(x) = x^5 in wrap coordinates
        let p = |x: f64| (x * 0.11).powi(5);
        let mut f = vec![0.0; n];
        for i in 0..d {
            f[n - d + i] = p(i as f64); // right stencil at positions 0..d-1
            f[i] = p((d + c + i) as f64); // left stencil at wrapped positions
        }
        let ext = op.extension_values(&f).unwrap();
        for (j, &v) in ext.iter().enumerate() {
            let expect = p((d + j) as f64);
            assert!((v - expect).abs() <= 1e-8, "j={j}: {v} vs {expect}");
        }
    }

    #[test]
    fn fc_legendre_matches_lagrange_oracle_and_restricts_exactly() {
        // f(x) = x on [0, 1]
        let (d, c, n) = (3usize, 8usize, 16usize);
        let op = ExtensionOperator::fc_legendre(d, c, n).unwrap();
        let f: Vec<f64> = (0..n).map(|i| i as f64 / n as f64).collect();
        let ext = op.extension_values(&f).unwrap();
        let xs: Vec<f64> = (0..d)
            .map(|i| i as f64)
            .chain((0..d).map(|i| (d + c + i) as f64))
            .collect();
        let ys: Vec<f64> = (0..d)
            .map(|i| f[n - d + i])
            .chain((0..d).map(|i| f[i]))
            .collect();
        for (j, &v) in ext.iter().enumerate() {
            let oracle = lagrange_eval(&xs, &ys, (d + j) as f64);
            assert!((v - oracle).abs() <= 1e-9, "j={j}: {v} vs {oracle}");
        }
        let extended = extend_1d(&f, &op).unwrap();
        assert_eq!(restrict(&extended, n, c).unwrap(), f);
    }

    #[test]
    fn fc_legendre_meets_signal_across_the_seam() {
        // sin(16x) - cos(8x) on [0, 1): the fitted polynomial must meet
        // the wrapped boundary samples to interpolation accuracy
        let n = 128;
        let (d, c) = (6usize, 32usize);
        let f: Vec<f64> = (0..n)
            .map(|i| {
                let x = i as f64 / n as f64;
                (16.0 * x).sin() - (8.0 * x).cos()
            })
            .collect();
        let op = ExtensionOperator::fc_legendre(d, c, n).unwrap();
        let ext = op.extension_values(&f).unwrap();
        let range = 4.0;
        let xs: Vec<f64> = (0..d)
            .map(|i| i as f64)
            .chain((0..d).map(|i| (d + c + i) as f64))
            .collect();
        let ys: Vec<f64> = (0..d)
            .map(|i| f[n - d + i])
            .chain((0..d).map(|i| f[i]))
            .collect();
        // continuity of the extension values themselves
        for j in 1..c {
            assert!((ext[j] - ext[j - 1]).abs() < 1.0);
        }
        // the polynomial passes through the first wrapped sample: the
        // periodic seam closes to interpolation accuracy
        let jump = (lagrange_eval(&xs, &ys, (d + c) as f64) - f[0]).abs();
        assert!(jump <= 1e-6 * range, "seam jump {jump:e}");
    }

    #[test]
    fn fc_gram_preserves_constants() {
        let (d, c, n) = (4usize, 10usize, 24usize);
        let op = ExtensionOperator::fc_gram(d, c, n).unwrap();
        let f = vec![3.25; n];
        let ext = op.extension_values(&f).unwrap();
        for &v in &ext {
            assert!((v - 3.25).abs() <= 1e-10);
        }
    }

    #[test]
    fn fc_gram_d2_blends_the_boundary_lines() {
        let (d, c, n) = (2usize, 6usize, 16usize);
        let op = ExtensionOperator::fc_gram(d, c, n).unwrap();
        let mut f = vec![0.0; n];
        // right boundary line: v = 2 + 0.5 * position (positions 0..d-1)
        f[n - 2] = 2.0;
        f[n - 1] = 2.5;
        // left boundary line in wrapped coordinates (positions d+c, d+c+1):
        // v = -1 + 0.25 * (position - (d+c))
        f[0] = -1.0;
        f[1] = -0.75;
        let ext = op.extension_values(&f).unwrap();
        for (j, &v) in ext.iter().enumerate() {
            let x = (d + j) as f64;
            let right_line = 2.0 + 0.5 * x;
            let left_line = -1.0 + 0.25 * (x - (d + c) as f64);
            let t = (j + 1) as f64 / (c + 1) as f64;
            let w = 0.5 * (1.0 + (std::f64::consts::PI * t).cos());
            let expect = w * right_line + (1.0 - w) * left_line;
            assert!((v - expect).abs() <= 1e-9, "j={j}: {v} vs {expect}");
        }
    }

    #[test]
    fn fc_gram_reproduces_shared_low_degree_polynomials() {
        let (d, c, n) = (4usize, 8usize, 20usize);
        let op = ExtensionOperator::fc_gram(d, c, n).unwrap();
        let p = |x: f64| 0.3 * x.powi(3) - x + 2.0;
        let scale = 0.2; // keep values modest over the wrap interval
        let mut f = vec![0.0; n];
        for i in 0..d {
            f[n - d + i] = p(i as f64 * scale);
            f[i] = p((d + c + i) as f64 * scale);
        }
        let ext = op.extension_values(&f).unwrap();
        for (j, &v) in ext.iter().enumerate() {
            let expect = p((d + j) as f64 * scale);
            assert!((v - expect).abs() <= 1e-8, "j={j}: {v} vs {expect}");
        }
    }

    #[test]
    fn spectrum_opt_constant_extends_to_constant() {
        let out = extend_spectrum_opt(&vec![1.7; 12], 6, 1.0).unwrap();
        for &v in &out {
            assert!((v - 1.7).abs() <= 1e-10, "{v}");
        }
    }

    #[test]
    fn spectrum_opt_matches_gradient_descent_oracle() {
        let n = 16;
        let c = 8;
        let s = 1.0;
        let f: Vec<f64> = (0..n)
            .map(|i| {
                let x = i as f64 / n as f64;
                (16.0 * x).sin() - (8.0 * x).cos()
            })
            .collect();
        let closed = ExtensionOperator::spectrum_opt(n, c, s)
            .unwrap()
            .extension_values(&f)
            .unwrap();

        // oracle: steepest descent on the quadratic functional
        // J(v) = || A v + B f ||^2 built directly from the DFT matrix
        let m = n + c;
        let mut a = DMatrix::<f64>::zeros(2 * m, c);
        let mut b_mat = DMatrix::<f64>::zeros(2 * m, n);
        for k in 0..m {
            let mode = signed_mode(k, m);
            let w: f64 = if mode == 0 {
                0.0
            } else {
                (1.0 + (mode * mode) as f64).powf(s)
            };
            let sw = w.sqrt() / (m as f64).sqrt();
            for j in 0..m {
                let ang = -2.0 * std::f64::consts::PI * (k as f64) * (j as f64) / m as f64;
                let (re, im) = (sw * ang.cos(), sw * ang.sin());
                if j < n {
                    b_mat[(k, j)] = re;
                    b_mat[(m + k, j)] = im;
                } else {
                    a[(k, j - n)] = re;
                    a[(m + k, j - n)] = im;
                }
            }
        }
        let h = a.transpose() * &a;
        let rhs = -(a.transpose() * &b_mat * DVector::from_column_slice(&f));
        let eig = h.clone().symmetric_eigen();
        let lmax = eig.eigenvalues.max();
        let lmin = eig.eigenvalues.min();
        let step = 2.0 / (lmax + lmin.max(0.0));
        let mut v = DVector::<f64>::zeros(c);
        for _ in 0..200_000 {
            let grad = &h * &v - &rhs;
            v -= step * grad;
        }
        for j in 0..c {
            assert!(
                (closed[j] - v[j]).abs() <= 1e-8,
                "j={j}: closed {} vs descent {}",
                closed[j],
                v[j]
            );
        }

        // first-order stationarity of the closed-form solution: the
        // least-squares residual gradient vanishes
        let v_closed = DVector::from_column_slice(&closed);
        let residual_gradient = &h * &v_closed - &rhs;
        assert!(
            residual_gradient.amax() <= 1e-8,
            "residual gradient {:e}",
            residual_gradient.amax()
        );
    }

    #[test]
    fn spectrum_opt_beats_random_perturbations_and_is_stationary() {
        let n = 32;
        let c = 16;
        let s = 1.5;
        let f: Vec<f64> = (0..n)
            .map(|i| {
                let x = i as f64 / n as f64;
                (16.0 * x).sin() - (8.0 * x).cos()
            })
            .collect();
        let op = ExtensionOperator::spectrum_opt(n, c, s).unwrap();
        let extended = extend_1d(&f, &op).unwrap();
        let achieved = sobolev_seminorm(&extended, s);

        let mut rng = ChaCha8Rng::seed_from_u64(99);
        for _ in 0..100 {
            let mut perturbed = extended.clone();
            // perturb only the extension entries (first and last c/2)
            for j in 0..c / 2 {
                perturbed[j] += rng.gen_range(-0.1..0.1);
                let m = perturbed.len();
                perturbed[m - 1 - j] += rng.gen_range(-0.1..0.1);
            }
            assert!(sobolev_seminorm(&perturbed, s) >= achieved - 1e-10);
        }

        // first-order stationarity via central differences of the
        // functional in each free coordinate
        let h = 1e-6;
        for j in 0..c / 2 {
            for &idx in &[j, extended.len() - 1 - j] {
                let mut up = extended.clone();
                up[idx] += h;
                let mut dn = extended.clone();
                dn[idx] -= h;
                let g = (sobolev_seminorm(&up, s) - sobolev_seminorm(&dn, s)) / (2.0 * h);
                assert!(g.abs() <= 1e-6, "gradient {g:e} at free index {idx}");
            }
        }
    }

    #[test]
    fn restrict_round_trips_every_method() {
        let n = 20;
        let f: Vec<f64> = (0..n).map(|i| ((i as f64) * 0.37).cos()).collect();
        let ops = vec![
            ExtensionOperator::zero_pad(8).unwrap(),
            ExtensionOperator::mirror_pad(8).unwrap(),
            ExtensionOperator::fc_legendre(3, 8, n).unwrap(),
            ExtensionOperator::fc_gram(3, 8, n).unwrap(),
            ExtensionOperator::spectrum_opt(n, 8, 1.0).unwrap(),
        ];
        for op in &ops {
            let extended = extend_1d(&f, op).unwrap();
            assert_eq!(extended.len(), n + 8);
            assert_eq!(restrict(&extended, n, 8).unwrap(), f, "{:?}", op.method());
        }
    }

    #[test]
    fn extend_nd_separable_and_roundtrip() {
        let (nx, ny) = (12usize, 10usize);
        // separable field f(x) g(y) with linear factors
        let field = RealTensor::from_fn(&[nx, ny], |idx| {
            (1.0 + 0.25 * idx[0] as f64) * (2.0 - 0.125 * idx[1] as f64)
        });
        let opx = ExtensionOperator::fc_legendre(2, 4, nx).unwrap();
        let opy = ExtensionOperator::fc_legendre(2, 4, ny).unwrap();
        let extended = extend_nd(&field, &[&opx, &opy]).unwrap();
        assert_eq!(extended.shape(), &[nx + 4, ny + 4]);

        // separability: extending the factors separately gives the product
        let fx: Vec<f64> = (0..nx).map(|i| 1.0 + 0.25 * i as f64).collect();
        let gy: Vec<f64> = (0..ny).map(|j| 2.0 - 0.125 * j as f64).collect();
        let ex = extend_1d(&fx, &opx).unwrap();
        let ey = extend_1d(&gy, &opy).unwrap();
        for i in 0..nx + 4 {
            for j in 0..ny + 4 {
                let expect = ex[i] * ey[j];
                let got = extended.get(&[i, j]);
                assert!((got - expect).abs() <= 1e-8, "({i},{j}): {got} vs {expect}");
            }
        }

        let back = restrict_nd(&extended, &[&opx, &opy]).unwrap();
        assert_eq!(back, field);

        // constant 2-d field stays constant
        let const_field = RealTensor::from_fn(&[nx, ny], |_| 0.75);
        let const_ext = extend_nd(&const_field, &[&opx, &opy]).unwrap();
        for &v in const_ext.data() {
            assert!((v - 0.75).abs() <= 1e-9);
        }
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(16))]

        #[test]
        fn interior_preserved_and_linear(seed in 0u64..1000) {
            let n = 24;
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let f: Vec<f64> = (0..n).map(|_| rng.gen_range(-1.0..1.0)).collect();
            let g: Vec<f64> = (0..n).map(|_| rng.gen_range(-1.0..1.0)).collect();
            let (alpha, beta) = (rng.gen_range(-2.0..2.0), rng.gen_range(-2.0..2.0));
            let combined: Vec<f64> = f.iter().zip(&g).map(|(a, b)| alpha * a + beta * b).collect();

            let ops = vec![
                ExtensionOperator::zero_pad(8).unwrap(),
                ExtensionOperator::fc_legendre(3, 8, n).unwrap(),
                ExtensionOperator::fc_gram(3, 8, n).unwrap(),
                ExtensionOperator::spectrum_opt(n, 8, 1.0).unwrap(),
            ];
            for op in &ops {
                let ef = extend_1d(&f, op).unwrap();
                // interior preservation is exact
                prop_assert_eq!(&ef[4..4 + n], &f[..]);
                // linearity of the matrix-based methods
                let eg = extend_1d(&g, op).unwrap();
                let ec = extend_1d(&combined, op).unwrap();
                for i in 0..ef.len() {
                    let lin = alpha * ef[i] + beta * eg[i];
                    prop_assert!((ec[i] - lin).abs() <= 1e-12 * (1.0 + lin.abs()));
                }
            }
        }
    }
}
