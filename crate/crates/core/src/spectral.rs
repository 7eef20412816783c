//! Spectral resampling, differentiation, filtering, and the
//! aliasing/Nyquist diagnostic suite.

use num_complex::Complex64;

use crate::error::{Error, Result};
use crate::grid::GridSpec;
use crate::math::Activation;
use crate::tensor::fft::{self, Spectrum};
use crate::tensor::{ComplexTensor, RealTensor};

/// Crop or zero-pad the centered block of a natural-layout spectrum so
/// that each `axes[i]` reaches extent `new_sizes[i]`, rescaling by
/// prod sqrt(M/N) so that *function values* (not coefficients) are
/// preserved under the orthonormal convention. Axes not listed keep
/// their extent.
pub(crate) fn resample_spectrum_natural(
    spec: &ComplexTensor,
    axes: &[usize],
    new_sizes: &[usize],
) -> Result<ComplexTensor> {
    if axes.len() != new_sizes.len() {
        return Err(Error::InvalidArg("axes/new_sizes length mismatch".into()));
    }
    if new_sizes.iter().any(|&m| m == 0) {
        return Err(Error::InvalidArg("target resolution must be >= 1".into()));
    }
    let centered = fft::shift_nd(spec, axes, false)?;

    let ndim = spec.ndim();
    let mut out_shape: Vec<usize> = spec.shape().to_vec();
    let mut block = spec.shape().to_vec();
    let mut src_start = vec![0usize; ndim];
    let mut dst_start = vec![0usize; ndim];
    let mut scale = 1.0f64;
    for (i, &ax) in axes.iter().enumerate() {
        let n = spec.shape()[ax];
        let m = new_sizes[i];
        let b = n.min(m);
        out_shape[ax] = m;
        block[ax] = b;
        src_start[ax] = n / 2 - b / 2;
        dst_start[ax] = m / 2 - b / 2;
        scale *= (m as f64 / n as f64).sqrt();
    }
    let cropped = centered.slice(&src_start, &block)?;
    let embedded = cropped.pad_embed(&out_shape, &dst_start)?;
    let scaled = embedded.scale(Complex64::new(scale, 0.0));
    fft::shift_nd(&scaled, axes, true)
}

/// Resample a periodic signal onto a new uniform grid by zero-padding
/// (or cropping) the center of its spectrum. Preserves function values;
/// exact for band-limited signals.
pub fn spectral_interpolate(
    signal: &ComplexTensor,
    grid: &GridSpec,
    new_resolution: &[usize],
) -> Result<ComplexTensor> {
    grid.require_periodic("spectral interpolation")?;
    if new_resolution.len() != signal.ndim() {
        return Err(Error::InvalidArg(
            "new_resolution rank must match signal rank".into(),
        ));
    }
    let axes: Vec<usize> = (0..signal.ndim()).collect();
    let spec = fft::fft_nd(signal, &axes, false)?;
    let resampled = resample_spectrum_natural(&spec, &axes, new_resolution)?;
    fft::fft_nd(&resampled, &axes, true)
}

/// Frequency-domain center crop followed by the inverse transform:
/// an ideal low-pass filter onto a coarser grid. Retained modes are
/// unchanged up to the sqrt(M/N) normalization-convention factor.
pub fn spectral_truncate(signal: &ComplexTensor, new_resolution: &[usize]) -> Result<ComplexTensor> {
    if new_resolution.len() != signal.ndim() {
        return Err(Error::InvalidArg(
            "new_resolution rank must match signal rank".into(),
        ));
    }
    for (ax, (&m, &n)) in new_resolution.iter().zip(signal.shape()).enumerate() {
        if m > n {
            return Err(Error::InvalidArg(format!(
                "truncation target {m} exceeds resolution {n} on axis {ax}; \
                 use spectral_interpolate to upsample"
            )));
        }
    }
    let axes: Vec<usize> = (0..signal.ndim()).collect();
    let spec = fft::fft_nd(signal, &axes, false)?;
    let resampled = resample_spectrum_natural(&spec, &axes, new_resolution)?;
    fft::fft_nd(&resampled, &axes, true)
}

/// m-th spectral derivative along `axis`: multiplication of the
/// spectrum by (i k 2 pi / L)^m. For even N and odd m the Nyquist
/// coefficient is zeroed (symmetric convention).
pub fn spectral_derivative(
    signal: &ComplexTensor,
    grid: &GridSpec,
    axis: usize,
    order: u32,
) -> Result<ComplexTensor> {
    grid.require_periodic("spectral differentiation")?;
    if axis >= signal.ndim() {
        return Err(Error::InvalidArg(format!("axis {axis} out of range")));
    }
    if signal.shape() != grid.resolution() {
        return Err(Error::ShapeMismatch(format!(
            "signal shape {:?} vs grid resolution {:?}",
            signal.shape(),
            grid.resolution()
        )));
    }
    if order == 0 {
        return Ok(signal.clone());
    }
    let mut spec = fft::fft_nd(signal, &[axis], false)?;
    let n = spec.shape()[axis];
    let wavenumbers = grid.wavenumbers(axis);
    let multipliers: Vec<Complex64> = (0..n)
        .map(|j| {
            let nyquist_bin = n % 2 == 0 && j == n / 2;
            if nyquist_bin && order % 2 == 1 {
                Complex64::new(0.0, 0.0)
            } else {
                Complex64::new(0.0, wavenumbers[j]).powu(order)
            }
        })
        .collect();
    let stride = spec.strides()[axis];
    for base in spec.lane_offsets(axis) {
        for j in 0..n {
            spec.data_mut()[base + j * stride] *= multipliers[j];
        }
    }
    fft::fft_nd(&spec, &[axis], true)
}

/// Zero all coefficients with |k| > cutoff on each axis. Idempotent.
/// Errors when a cutoff exceeds the Nyquist mode N/2.
pub fn low_pass(signal: &ComplexTensor, cutoffs: &[usize]) -> Result<ComplexTensor> {
    if cutoffs.len() != signal.ndim() {
        return Err(Error::InvalidArg("cutoff rank mismatch".into()));
    }
    for (ax, (&c, &n)) in cutoffs.iter().zip(signal.shape()).enumerate() {
        if c > n / 2 {
            return Err(Error::Nyquist(format!(
                "cutoff {c} above Nyquist mode {} on axis {ax}",
                n / 2
            )));
        }
    }
    let axes: Vec<usize> = (0..signal.ndim()).collect();
    let mut spec = fft::fft_nd(signal, &axes, false)?;
    let shape = spec.shape().to_vec();
    let strides = spec.strides();
    let len = spec.len();
    for lin in 0..len {
        let mut rem = lin;
        let mut keep = true;
        for ax in 0..shape.len() {
            let idx = rem / strides[ax];
            rem %= strides[ax];
            let k = fft::signed_mode(idx, shape[ax]);
            if k.unsigned_abs() as usize > cutoffs[ax] {
                keep = false;
                break;
            }
        }
        if !keep {
            spec.data_mut()[lin] = Complex64::new(0.0, 0.0);
        }
    }
    fft::fft_nd(&spec, &axes, true)
}

/// Keep every `factor[ax]`-th sample along each axis. Factors must
/// divide the resolution.
pub fn stride_downsample(signal: &ComplexTensor, factors: &[usize]) -> Result<ComplexTensor> {
    if factors.len() != signal.ndim() {
        return Err(Error::InvalidArg("stride factor rank mismatch".into()));
    }
    let mut out_shape = Vec::with_capacity(signal.ndim());
    for (ax, (&f, &n)) in factors.iter().zip(signal.shape()).enumerate() {
        if f == 0 || n % f != 0 {
            return Err(Error::InvalidArg(format!(
                "stride factor {f} does not divide resolution {n} on axis {ax}"
            )));
        }
        out_shape.push(n / f);
    }
    let strides = signal.strides();
    Ok(ComplexTensor::from_fn(&out_shape, |idx| {
        let mut off = 0usize;
        for ax in 0..idx.len() {
            off += idx[ax] * factors[ax] * strides[ax];
        }
        signal.data()[off]
    }))
}

/// Fold a fine natural-layout spectrum onto a coarser resolution:
/// the coarse coefficient at k is sqrt(M/N) * sum_m fine[k + m M]
/// per axis. Exactly equals the DFT of the stride-downsampled signal.
pub fn aliasing_fold(fine: &Spectrum, coarse_resolution: &[usize]) -> Result<Spectrum> {
    if fine.layout() != fft::Layout::Natural {
        return Err(Error::Layout("aliasing_fold needs natural layout".into()));
    }
    if coarse_resolution.len() != fine.coeffs().ndim() {
        return Err(Error::InvalidArg("coarse resolution rank mismatch".into()));
    }
    let mut cur = fine.coeffs().clone();
    for (ax, &m) in coarse_resolution.iter().enumerate() {
        let n = cur.shape()[ax];
        if m == 0 || n % m != 0 {
            return Err(Error::InvalidArg(format!(
                "coarse resolution {m} does not divide fine resolution {n} on axis {ax}"
            )));
        }
        if m == n {
            continue;
        }
        let scale = (m as f64 / n as f64).sqrt();
        let mut out_shape = cur.shape().to_vec();
        out_shape[ax] = m;
        let mut out = ComplexTensor::zeros(&out_shape);
        let in_stride = cur.strides()[ax];
        let out_stride = out.strides()[ax];
        let in_offsets = cur.lane_offsets(ax);
        let out_offsets = out.lane_offsets(ax);
        for (&ib, &ob) in in_offsets.iter().zip(&out_offsets) {
            for k in 0..m {
                let mut acc = Complex64::new(0.0, 0.0);
                let mut j = k;
                while j < n {
                    acc += cur.data()[ib + j * in_stride];
                    j += m;
                }
                out.data_mut()[ob + k * out_stride] = acc * scale;
            }
        }
        cur = out;
    }
    Ok(Spectrum::new_natural(cur))
}

/// One resolution's entry in a bandwidth-probe report.
#[derive(Debug, Clone)]
pub struct BandwidthProbeEntry {
    pub resolution: usize,
    /// Folded shell power of activation(signal) at this resolution.
    pub shell_power: Vec<f64>,
    /// L2 norm of (coarse low band - truncated fine low band),
    /// normalized by the fine low-band norm. Zero means no aliasing.
    pub aliased_energy: f64,
}

#[derive(Debug, Clone)]
pub struct BandwidthProbeReport {
    pub activation: Activation,
    pub entries: Vec<BandwidthProbeEntry>,
}

impl BandwidthProbeReport {
    /// CSV with columns: mode index, power, resolution tag.
    pub fn to_csv(&self, invocation: &str) -> String {
        let mut out = String::from("mode,power,resolution\n");
        for e in &self.entries {
            for (k, p) in e.shell_power.iter().enumerate() {
                out.push_str(&format!("{k},{p:.17e},{}\n", e.resolution));
            }
        }
        out.push_str(&format!("# invocation: {invocation}\n"));
        out
    }
}

/// Apply a pointwise nonlinearity to a 1-d periodic signal at several
/// resolutions and report the resulting spectra plus an aliased-energy
/// measure against the finest resolution in the list.
pub fn nonlinearity_bandwidth_probe(
    signal: &ComplexTensor,
    activation: Activation,
    resolutions: &[usize],
) -> Result<BandwidthProbeReport> {
    if signal.ndim() != 1 {
        return Err(Error::InvalidArg("bandwidth probe is 1-d".into()));
    }
    if !matches!(
        activation,
        Activation::Gelu | Activation::Square | Activation::Tanh
    ) {
        return Err(Error::InvalidArg(
            "probe activation must be gelu, square, or tanh".into(),
        ));
    }
    if resolutions.is_empty() {
        return Err(Error::InvalidArg("no resolutions given".into()));
    }
    let grid = GridSpec::periodic_unit(signal.shape());
    let finest = *resolutions.iter().max().unwrap();

    let activated = |res: usize| -> Result<ComplexTensor> {
        let resampled = spectral_interpolate(signal, &grid, &[res])?;
        Ok(resampled.map(|z| Complex64::new(activation.apply(z.re), 0.0)))
    };

    let fine_field = activated(finest)?;
    let fine_spec = fft::fft_nd(&fine_field, &[0], false)?;

    let mut entries = Vec::with_capacity(resolutions.len());
    for &res in resolutions {
        let field = activated(res)?;
        let spec = fft::fft_nd(&field, &[0], false)?;
        let power: Vec<f64> = spec.data().iter().map(|z| z.norm_sqr()).collect();
        let shell_power = fft::fold_power_shells(&power);

        // coarse low band vs the fine spectrum truncated to the same band
        let fine_block = resample_spectrum_natural(&fine_spec, &[0], &[res])?;
        let mut diff2 = 0.0;
        let mut ref2 = 0.0;
        for (a, b) in spec.data().iter().zip(fine_block.data()) {
            diff2 += (a - b).norm_sqr();
            ref2 += b.norm_sqr();
        }
        let aliased_energy = if ref2 > 0.0 {
            (diff2 / ref2).sqrt()
        } else {
            diff2.sqrt()
        };
        entries.push(BandwidthProbeEntry {
            resolution: res,
            shell_power,
            aliased_energy,
        });
    }
    Ok(BandwidthProbeReport {
        activation,
        entries,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum NyquistStatus {
    Ok,
    /// Retained modes exceed ratio * resolution: legal, but aliasing
    /// from nonlinearities will corrupt super-resolution.
    SoftWarning,
    /// Retained modes exceed the resolution itself.
    HardViolation,
}

#[derive(Debug, Clone)]
pub struct NyquistAxisReport {
    pub axis: usize,
    pub n_modes: usize,
    pub resolution: usize,
    pub status: NyquistStatus,
}

#[derive(Debug, Clone)]
pub struct NyquistReport {
    pub axes: Vec<NyquistAxisReport>,
    pub warn_ratio: f64,
}

impl NyquistReport {
    pub fn is_ok(&self) -> bool {
        self.axes.iter().all(|a| a.status == NyquistStatus::Ok)
    }

    pub fn has_hard_violation(&self) -> bool {
        self.axes
            .iter()
            .any(|a| a.status == NyquistStatus::HardViolation)
    }

    pub fn has_warning(&self) -> bool {
        self.axes
            .iter()
            .any(|a| a.status == NyquistStatus::SoftWarning)
    }

    pub fn message(&self) -> String {
        let mut parts = Vec::new();
        for a in &self.axes {
            match a.status {
                NyquistStatus::Ok => {}
                NyquistStatus::SoftWarning => parts.push(format!(
                    "axis {}: {} modes > {:.0}% of resolution {} (aliasing risk under nonlinearities)",
                    a.axis,
                    a.n_modes,
                    self.warn_ratio * 100.0,
                    a.resolution
                )),
                NyquistStatus::HardViolation => parts.push(format!(
                    "axis {}: {} modes exceed resolution {}",
                    a.axis, a.n_modes, a.resolution
                )),
            }
        }
        if parts.is_empty() {
            "ok".into()
        } else {
            parts.join("; ")
        }
    }
}

/// Flag mode counts that exceed what the grid can represent. Hard
/// violation when modes exceed the resolution; soft warning above
/// `warn_ratio` * resolution (the guidance for super-resolution use).
pub fn validate_nyquist_with_ratio(
    n_modes: &[usize],
    grid: &GridSpec,
    warn_ratio: f64,
) -> Result<NyquistReport> {
    if n_modes.len() != grid.ndim() {
        return Err(Error::InvalidArg("n_modes rank mismatch with grid".into()));
    }
    let axes = n_modes
        .iter()
        .zip(grid.resolution())
        .enumerate()
        .map(|(axis, (&k, &n))| {
            let status = if k > n {
                NyquistStatus::HardViolation
            } else if (k as f64) > warn_ratio * n as f64 {
                NyquistStatus::SoftWarning
            } else {
                NyquistStatus::Ok
            };
            NyquistAxisReport {
                axis,
                n_modes: k,
                resolution: n,
                status,
            }
        })
        .collect();
    Ok(NyquistReport { axes, warn_ratio })
}

/// [`validate_nyquist_with_ratio`] with the default 0.5 warning ratio.
pub fn validate_nyquist(n_modes: &[usize], grid: &GridSpec) -> Result<NyquistReport> {
    validate_nyquist_with_ratio(n_modes, grid, 0.5)
}

/// Folded shell power of a real field, averaged over leading channel
/// axes if present; used by dataset diagnostics.
pub fn shell_power_1d(field: &RealTensor) -> Result<Vec<f64>> {
    let c = field.to_complex();
    let axes: Vec<usize> = (0..c.ndim()).collect();
    let p = fft::power_spectrum(&c, &axes)?;
    if c.ndim() == 1 {
        return Ok(fft::fold_power_shells(p.data()));
    }
    // n-d: radial shells by max |k_j|
    let shape = p.shape().to_vec();
    let max_shell = shape.iter().map(|&n| n / 2).max().unwrap();
    let strides = crate::tensor::row_major_strides(&shape);
    let mut shells = vec![0.0; max_shell + 1];
    for (lin, &v) in p.data().iter().enumerate() {
        let mut rem = lin;
        let mut shell = 0usize;
        for ax in 0..shape.len() {
            let idx = rem / strides[ax];
            rem %= strides[ax];
            shell = shell.max(fft::signed_mode(idx, shape[ax]).unsigned_abs() as usize);
        }
        shells[shell] += v;
    }
    Ok(shells)
}
