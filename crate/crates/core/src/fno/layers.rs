//! Layer forward passes recorded on the autodiff tape, eager wrappers
//! for single-shot evaluation, sinusoidal embeddings, domain padding,
//! and the complex-wrapping utility for real linear operators.

use num_complex::Complex64;

use crate::error::{Error, Result};
use crate::fno::{FnoConfig, FnoModel, FnoParams, MlpParams, NormKind, SkipParams, SpectralWeights};
use crate::grid::GridSpec;
use crate::math::Activation;
use crate::spectral;
use crate::tensor::{ComplexTensor, RealTensor};
use crate::train::tape::{Tape, ValueId};

const INSTANCE_NORM_EPS: f64 = 1e-5;

pub struct MlpIds {
    layers: Vec<(ValueId, ValueId)>,
}

pub enum SkipIds {
    Identity,
    None,
    Linear(ValueId),
    SoftGating { w: ValueId, b: ValueId },
}

pub enum SpectralIds {
    Dense(ValueId),
    Tucker { core: ValueId, factors: Vec<ValueId> },
    Separable(Vec<ValueId>),
}

pub struct BlockIds {
    pub spectral: SpectralIds,
    pub bias: ValueId,
    pub mlp: MlpIds,
    pub fno_skip: SkipIds,
    pub mlp_skip: SkipIds,
}

/// Parameter leaves registered on a tape, in the canonical visit order
/// (`flat` matches `FnoParams::visit`).
pub struct RegisteredParams {
    pub flat: Vec<ValueId>,
    pub lifting: MlpIds,
    pub blocks: Vec<BlockIds>,
    pub projection: MlpIds,
}

impl MlpParams {
    fn register(&self, tape: &mut Tape, flat: &mut Vec<ValueId>) -> MlpIds {
        let layers = self
            .layers
            .iter()
            .map(|(w, b)| {
                let wi = tape.param(w.clone());
                let bi = tape.param(b.clone());
                flat.push(wi);
                flat.push(bi);
                (wi, bi)
            })
            .collect();
        MlpIds { layers }
    }
}

impl SkipParams {
    fn register(&self, tape: &mut Tape, flat: &mut Vec<ValueId>) -> SkipIds {
        match self {
            SkipParams::Identity => SkipIds::Identity,
            SkipParams::None => SkipIds::None,
            SkipParams::Linear(w) => {
                let wi = tape.param(w.clone());
                flat.push(wi);
                SkipIds::Linear(wi)
            }
            SkipParams::SoftGating { w, b } => {
                let wi = tape.param(w.clone());
                let bi = tape.param(b.clone());
                flat.push(wi);
                flat.push(bi);
                SkipIds::SoftGating { w: wi, b: bi }
            }
        }
    }
}

impl FnoParams {
    /// Push every parameter tensor onto the tape as a gradient leaf.
    pub fn register(&self, tape: &mut Tape) -> RegisteredParams {
        let mut flat = Vec::new();
        let lifting = self.lifting.register(tape, &mut flat);
        let blocks = self
            .blocks
            .iter()
            .map(|b| {
                let spectral = match &b.spectral {
                    SpectralWeights::Dense(w) => {
                        let wi = tape.param(w.clone());
                        flat.push(wi);
                        SpectralIds::Dense(wi)
                    }
                    SpectralWeights::Tucker { core, factors } => {
                        let ci = tape.param(core.clone());
                        flat.push(ci);
                        let fi: Vec<ValueId> = factors
                            .iter()
                            .map(|f| {
                                let id = tape.param(f.clone());
                                flat.push(id);
                                id
                            })
                            .collect();
                        SpectralIds::Tucker { core: ci, factors: fi }
                    }
                    SpectralWeights::Separable(ws) => SpectralIds::Separable(
                        ws.iter()
                            .map(|w| {
                                let id = tape.param(w.clone());
                                flat.push(id);
                                id
                            })
                            .collect(),
                    ),
                };
                let bias = tape.param(b.bias.clone());
                flat.push(bias);
                let mlp = b.mlp.register(tape, &mut flat);
                let fno_skip = b.fno_skip.register(tape, &mut flat);
                let mlp_skip = b.mlp_skip.register(tape, &mut flat);
                BlockIds {
                    spectral,
                    bias,
                    mlp,
                    fno_skip,
                    mlp_skip,
                }
            })
            .collect();
        let projection = self.projection.register(tape, &mut flat);
        RegisteredParams {
            flat,
            lifting,
            blocks,
            projection,
        }
    }
}

/// Per-location MLP over channels: position-wise linear maps with the
/// activation between internal layers.
pub fn channel_mlp_tape(
    tape: &mut Tape,
    x: ValueId,
    mlp: &MlpIds,
    activation: Activation,
) -> Result<ValueId> {
    let mut cur = x;
    let last = mlp.layers.len().saturating_sub(1);
    for (i, (w, b)) in mlp.layers.iter().enumerate() {
        cur = tape.channel_matmul(*w, cur)?;
        cur = tape.add_bias(cur, *b)?;
        if i < last {
            cur = tape.activation(cur, activation);
        }
    }
    Ok(cur)
}

/// Skip path; `None` kind contributes nothing.
pub fn skip_tape(tape: &mut Tape, x: ValueId, skip: &SkipIds) -> Result<Option<ValueId>> {
    Ok(match skip {
        SkipIds::Identity => Some(x),
        SkipIds::None => None,
        SkipIds::Linear(w) => Some(tape.channel_matmul(*w, x)?),
        SkipIds::SoftGating { w, b } => {
            let scaled = tape.channel_scale(x, *w)?;
            Some(tape.add_bias(scaled, *b)?)
        }
    })
}

fn spatial_axes(x_rank: usize) -> Vec<usize> {
    (1..x_rank).collect()
}

fn check_modes(n_modes: &[usize], in_res: &[usize], out_res: &[usize]) -> Result<()> {
    for (ax, &k) in n_modes.iter().enumerate() {
        if k > in_res[ax] {
            return Err(Error::Nyquist(format!(
                "n_modes {k} exceeds input resolution {} on axis {ax}",
                in_res[ax]
            )));
        }
        if k > out_res[ax] {
            return Err(Error::Nyquist(format!(
                "n_modes {k} exceeds output resolution {} on axis {ax}",
                out_res[ax]
            )));
        }
    }
    Ok(())
}

/// The dense spectral weight tensor for this layer (reconstructing the
/// Tucker form on the tape so gradients flow to core and factors).
fn materialize_weight(tape: &mut Tape, ids: &SpectralIds) -> Result<ValueId> {
    match ids {
        SpectralIds::Dense(w) => Ok(*w),
        SpectralIds::Tucker { core, factors } => {
            let mut cur = *core;
            for (mode, f) in factors.iter().enumerate() {
                cur = tape.mode_product(cur, *f, mode)?;
            }
            Ok(cur)
        }
        SpectralIds::Separable(_) => Err(Error::InvalidArg(
            "separable weights have no dense materialization".into(),
        )),
    }
}

/// Spectral convolution: fft, center the spectrum, apply the per-mode
/// channel matrices on the retained block, zero-embed into the output
/// resolution, transform back. Centered block arithmetic:
/// start = center - K/2, end = center + (K+1)/2.
#[allow(clippy::too_many_arguments)]
pub fn spectral_conv_tape(
    tape: &mut Tape,
    x: ValueId,
    spectral: &SpectralIds,
    bias: Option<ValueId>,
    n_modes: &[usize],
    out_res: &[usize],
    complex_data: bool,
) -> Result<ValueId> {
    let in_shape = tape.shape(x).to_vec();
    let d = in_shape.len() - 1;
    if n_modes.len() != d || out_res.len() != d {
        return Err(Error::ShapeMismatch("mode/resolution rank mismatch".into()));
    }
    let in_res = &in_shape[1..];
    check_modes(n_modes, in_res, out_res)?;

    if let SpectralIds::Separable(per_axis) = spectral {
        return separable_conv_tape(tape, x, per_axis, bias, n_modes, out_res, complex_data);
    }

    let axes = spatial_axes(in_shape.len());
    let spec = tape.fft(x, &axes)?;
    let centered = tape.fftshift(spec, &axes)?;

    // input block
    let mut start = vec![0usize];
    let mut size = vec![in_shape[0]];
    for (ax, &k) in n_modes.iter().enumerate() {
        start.push(in_res[ax] / 2 - k / 2);
        size.push(k);
    }
    let block = tape.slice(centered, &start, &size)?;

    // active sub-block of the stored weights
    let w_full = materialize_weight(tape, spectral)?;
    let w_shape = tape.shape(w_full).to_vec();
    let mut w_start = Vec::with_capacity(d + 2);
    let mut w_size = Vec::with_capacity(d + 2);
    for (ax, &k) in n_modes.iter().enumerate() {
        let k_max = w_shape[ax];
        if k > k_max {
            return Err(Error::Nyquist(format!(
                "n_modes {k} exceeds stored max_n_modes {k_max} on axis {ax}"
            )));
        }
        w_start.push(k_max / 2 - k / 2);
        w_size.push(k);
    }
    w_start.extend_from_slice(&[0, 0]);
    w_size.push(w_shape[d]);
    w_size.push(w_shape[d + 1]);
    let w_active = tape.slice(w_full, &w_start, &w_size)?;

    let mixed = tape.mode_matmul(w_active, block)?; // [C_out, K..]
    let c_out = tape.shape(mixed)[0];

    // zero-embed into the centered output spectrum
    let mut out_shape = vec![c_out];
    let mut offset = vec![0usize];
    let mut scale = 1.0f64;
    for (ax, &m) in out_res.iter().enumerate() {
        out_shape.push(m);
        offset.push(m / 2 - n_modes[ax] / 2);
        scale *= (m as f64 / in_res[ax] as f64).sqrt();
    }
    let embedded = tape.pad_embed(mixed, &out_shape, &offset)?;
    let scaled = if (scale - 1.0).abs() > 0.0 {
        tape.scale(embedded, Complex64::new(scale, 0.0))
    } else {
        embedded
    };
    let natural = tape.ifftshift(scaled, &axes)?;
    let field = tape.ifft(natural, &axes)?;
    let out = if complex_data { field } else { tape.real(field) };
    match bias {
        Some(b) => tape.add_bias(out, b),
        None => Ok(out),
    }
}

/// Separable variant: independent 1-d transforms along each axis with
/// distinct per-axis weights, applied sequentially.
fn separable_conv_tape(
    tape: &mut Tape,
    x: ValueId,
    per_axis: &[ValueId],
    bias: Option<ValueId>,
    n_modes: &[usize],
    out_res: &[usize],
    complex_data: bool,
) -> Result<ValueId> {
    let d = tape.shape(x).len() - 1;
    if per_axis.len() != d {
        return Err(Error::ShapeMismatch("one weight tensor per axis required".into()));
    }
    let mut cur = x;
    for j in 0..d {
        let axis = j + 1;
        let shape = tape.shape(cur).to_vec();
        let n = shape[axis];
        let k = n_modes[j];
        let m = out_res[j];

        let spec = tape.fft(cur, &[axis])?;
        let centered = tape.fftshift(spec, &[axis])?;
        let mut start = vec![0usize; shape.len()];
        let mut size = shape.clone();
        start[axis] = n / 2 - k / 2;
        size[axis] = k;
        let block = tape.slice(centered, &start, &size)?;

        let k_max = tape.shape(per_axis[j])[0];
        if k > k_max {
            return Err(Error::Nyquist(format!(
                "n_modes {k} exceeds stored max_n_modes {k_max} on axis {j}"
            )));
        }
        let w_shape = tape.shape(per_axis[j]).to_vec();
        let w_active = tape.slice(
            per_axis[j],
            &[k_max / 2 - k / 2, 0, 0],
            &[k, w_shape[1], w_shape[2]],
        )?;
        let mixed = tape.broadcast_mode_matmul(w_active, block, axis)?;

        let mut out_shape = tape.shape(mixed).to_vec();
        out_shape[axis] = m;
        let mut offset = vec![0usize; out_shape.len()];
        offset[axis] = m / 2 - k / 2;
        let embedded = tape.pad_embed(mixed, &out_shape, &offset)?;
        let scale = (m as f64 / n as f64).sqrt();
        let scaled = tape.scale(embedded, Complex64::new(scale, 0.0));
        let natural = tape.ifftshift(scaled, &[axis])?;
        cur = tape.ifft(natural, &[axis])?;
    }
    let out = if complex_data { cur } else { tape.real(cur) };
    match bias {
        Some(b) => tape.add_bias(out, b),
        None => Ok(out),
    }
}

/// Value-preserving spectral resample of a [C, N..] field (used on
/// skip paths when a layer changes resolution).
pub fn spectral_resample_tape(
    tape: &mut Tape,
    x: ValueId,
    out_res: &[usize],
    complex_data: bool,
) -> Result<ValueId> {
    let shape = tape.shape(x).to_vec();
    if &shape[1..] == out_res {
        return Ok(x);
    }
    let axes = spatial_axes(shape.len());
    let spec = tape.fft(x, &axes)?;
    let centered = tape.fftshift(spec, &axes)?;
    let mut start = vec![0usize];
    let mut block = vec![shape[0]];
    let mut out_shape = vec![shape[0]];
    let mut offset = vec![0usize];
    let mut scale = 1.0f64;
    for (ax, &m) in out_res.iter().enumerate() {
        let n = shape[ax + 1];
        let b = n.min(m);
        start.push(n / 2 - b / 2);
        block.push(b);
        out_shape.push(m);
        offset.push(m / 2 - b / 2);
        scale *= (m as f64 / n as f64).sqrt();
    }
    let cropped = tape.slice(centered, &start, &block)?;
    let embedded = tape.pad_embed(cropped, &out_shape, &offset)?;
    let scaled = tape.scale(embedded, Complex64::new(scale, 0.0));
    let natural = tape.ifftshift(scaled, &axes)?;
    let field = tape.ifft(natural, &axes)?;
    Ok(if complex_data { field } else { tape.real(field) })
}

/// One FNO block:
/// x_{k+1/2} = act(Norm(SpectralConv(x)) + S_fno(x)),
/// x_{k+1} = act(Norm(ChannelMLP(x_{k+1/2}) + S_mlp(x))),
/// with the trailing activation omitted on the final block.
#[allow(clippy::too_many_arguments)]
pub fn fno_block_tape(
    tape: &mut Tape,
    x: ValueId,
    block: &BlockIds,
    config: &FnoConfig,
    n_modes: &[usize],
    out_res: &[usize],
    last: bool,
) -> Result<ValueId> {
    let in_res = tape.shape(x)[1..].to_vec();
    let mut s_fno = skip_tape(tape, x, &block.fno_skip)?;
    let mut s_mlp = skip_tape(tape, x, &block.mlp_skip)?;
    if in_res != out_res {
        if let Some(id) = s_fno {
            s_fno = Some(spectral_resample_tape(tape, id, out_res, config.complex_data)?);
        }
        if let Some(id) = s_mlp {
            s_mlp = Some(spectral_resample_tape(tape, id, out_res, config.complex_data)?);
        }
    }

    let mut conv = spectral_conv_tape(
        tape,
        x,
        &block.spectral,
        Some(block.bias),
        n_modes,
        out_res,
        config.complex_data,
    )?;
    if config.norm == NormKind::InstanceNorm {
        conv = tape.instance_norm(conv, INSTANCE_NORM_EPS)?;
    }
    let mut h = match s_fno {
        Some(s) => tape.add(conv, s)?,
        None => conv,
    };
    h = tape.activation(h, config.activation);

    let mlp_out = channel_mlp_tape(tape, h, &block.mlp, config.activation)?;
    let mut out = match s_mlp {
        Some(s) => tape.add(mlp_out, s)?,
        None => mlp_out,
    };
    if config.norm == NormKind::InstanceNorm {
        out = tape.instance_norm(out, INSTANCE_NORM_EPS)?;
    }
    if !last {
        out = tape.activation(out, config.activation);
    }
    Ok(out)
}

/// Per-layer output resolutions implied by the input resolution, the
/// domain padding, and the resolution scaling factors. Errors when a
/// scale produces a non-integer resolution.
pub fn resolution_chain(config: &FnoConfig, input_res: &[usize]) -> Result<Vec<Vec<usize>>> {
    let padded = padded_resolution(config, input_res);
    let mut chain = Vec::with_capacity(config.n_layers);
    let mut cur: Vec<f64> = padded.iter().map(|&n| n as f64).collect();
    for layer in 0..config.n_layers {
        let s = config
            .resolution_scaling_factor
            .as_ref()
            .map(|v| v[layer])
            .unwrap_or(1.0);
        let mut next = Vec::with_capacity(cur.len());
        for &r in &cur {
            let scaled = r * s;
            if (scaled - scaled.round()).abs() > 1e-9 || scaled.round() < 1.0 {
                return Err(Error::InvalidArg(format!(
                    "resolution scaling produces non-integer resolution {scaled} at layer {layer}"
                )));
            }
            next.push(scaled.round());
        }
        chain.push(next.iter().map(|&r| r as usize).collect());
        cur = next;
    }
    Ok(chain)
}

fn pad_amounts(config: &FnoConfig, input_res: &[usize]) -> Vec<usize> {
    if config.domain_padding.is_empty() {
        return vec![0; input_res.len()];
    }
    config
        .domain_padding
        .iter()
        .zip(input_res)
        .map(|(&f, &n)| (f * n as f64).round() as usize)
        .collect()
}

fn padded_resolution(config: &FnoConfig, input_res: &[usize]) -> Vec<usize> {
    input_res
        .iter()
        .zip(pad_amounts(config, input_res))
        .map(|(&n, p)| n + p)
        .collect()
}

/// Full forward pass: lifting, optional zero padding of the domain,
/// the FNO blocks (with optional per-layer resolution scaling),
/// unpadding, projection.
pub fn fno_forward_tape(
    tape: &mut Tape,
    input: ValueId,
    reg: &RegisteredParams,
    config: &FnoConfig,
) -> Result<ValueId> {
    let shape = tape.shape(input).to_vec();
    if shape.len() != config.ndim() + 1 || shape[0] != config.in_channels {
        return Err(Error::ShapeMismatch(format!(
            "input shape {shape:?} incompatible with {} channels x {}-d field",
            config.in_channels,
            config.ndim()
        )));
    }
    let input_res = shape[1..].to_vec();
    let padded = padded_resolution(config, &input_res);

    // hard Nyquist gate on the resolution the spectral layers see
    let grid = GridSpec::periodic_unit(&padded);
    let report = spectral::validate_nyquist(&config.n_modes, &grid)?;
    if report.has_hard_violation() {
        return Err(Error::Nyquist(report.message()));
    }

    let mut h = channel_mlp_tape(tape, input, &reg.lifting, config.activation)?;

    let pads = pad_amounts(config, &input_res);
    if pads.iter().any(|&p| p > 0) {
        let mut target = vec![config.hidden_channels];
        target.extend_from_slice(&padded);
        let offset = vec![0usize; target.len()];
        h = tape.pad_embed(h, &target, &offset)?;
    }

    let chain = resolution_chain(config, &input_res)?;
    let n_blocks = reg.blocks.len();
    for (i, block) in reg.blocks.iter().enumerate() {
        h = fno_block_tape(
            tape,
            h,
            block,
            config,
            &config.n_modes,
            &chain[i],
            i + 1 == n_blocks,
        )?;
    }

    // strip the padding, scaled along with the resolution
    if pads.iter().any(|&p| p > 0) {
        let final_res = tape.shape(h)[1..].to_vec();
        let mut start = vec![0usize; final_res.len() + 1];
        let mut size = vec![config.hidden_channels];
        for (ax, &f) in final_res.iter().enumerate() {
            let unpadded = (input_res[ax] as f64) * (f as f64) / (padded[ax] as f64);
            if (unpadded - unpadded.round()).abs() > 1e-9 {
                return Err(Error::InvalidArg(
                    "resolution scaling is incompatible with the padding amounts".into(),
                ));
            }
            size.push(unpadded.round() as usize);
        }
        start[0] = 0;
        h = tape.slice(h, &start, &size)?;
    }

    channel_mlp_tape(tape, h, &reg.projection, config.activation)
}

impl FnoModel {
    /// Single evaluation on a scratch tape.
    pub fn forward(&self, input: &ComplexTensor) -> Result<ComplexTensor> {
        let mut tape = Tape::new();
        let reg = self.params.register(&mut tape);
        let x = tape.constant(input.clone());
        let y = fno_forward_tape(&mut tape, x, &reg, &self.config)?;
        Ok(tape.value(y).clone())
    }

    /// Forward on a real field, returning the real output field.
    pub fn forward_real(&self, input: &RealTensor) -> Result<RealTensor> {
        Ok(self.forward(&input.to_complex())?.real_part())
    }
}

/// Eager spectral convolution with dense weights [K.., C_in, C_out].
pub fn spectral_conv_forward(
    x: &ComplexTensor,
    weights: &ComplexTensor,
    bias: Option<&ComplexTensor>,
    n_modes: &[usize],
    out_resolution: &[usize],
    complex_data: bool,
) -> Result<ComplexTensor> {
    let mut tape = Tape::new();
    let w = tape.param(weights.clone());
    let b = bias.map(|b| tape.param(b.clone()));
    let xi = tape.constant(x.clone());
    let y = spectral_conv_tape(
        &mut tape,
        xi,
        &SpectralIds::Dense(w),
        b,
        n_modes,
        out_resolution,
        complex_data,
    )?;
    Ok(tape.value(y).clone())
}

/// Eager separable convolution with per-axis weights [K_j, C, C].
pub fn separable_spectral_conv_forward(
    x: &ComplexTensor,
    per_axis: &[ComplexTensor],
    n_modes: &[usize],
    out_resolution: &[usize],
    complex_data: bool,
) -> Result<ComplexTensor> {
    let mut tape = Tape::new();
    let ws: Vec<ValueId> = per_axis.iter().map(|w| tape.param(w.clone())).collect();
    let xi = tape.constant(x.clone());
    let y = spectral_conv_tape(
        &mut tape,
        xi,
        &SpectralIds::Separable(ws),
        None,
        n_modes,
        out_resolution,
        complex_data,
    )?;
    Ok(tape.value(y).clone())
}

/// Eager channel MLP.
pub fn channel_mlp_forward(
    x: &ComplexTensor,
    layers: &[(ComplexTensor, ComplexTensor)],
    activation: Activation,
) -> Result<ComplexTensor> {
    let mut tape = Tape::new();
    let mlp = MlpParams {
        layers: layers.to_vec(),
    };
    let ids = mlp.register(&mut tape, &mut Vec::new());
    let xi = tape.constant(x.clone());
    let y = channel_mlp_tape(&mut tape, xi, &ids, activation)?;
    Ok(tape.value(y).clone())
}

/// Eager FNO block evaluation.
pub fn fno_block_forward(
    x: &ComplexTensor,
    block: &crate::fno::BlockParams,
    config: &FnoConfig,
    n_modes: &[usize],
    out_res: &[usize],
    last: bool,
) -> Result<ComplexTensor> {
    let mut tape = Tape::new();
    let params = FnoParams {
        lifting: MlpParams { layers: vec![] },
        blocks: vec![block.clone()],
        projection: MlpParams { layers: vec![] },
        complex_data: config.complex_data,
    };
    let reg = params.register(&mut tape);
    let xi = tape.constant(x.clone());
    let y = fno_block_tape(&mut tape, xi, &reg.blocks[0], config, n_modes, out_res, last)?;
    Ok(tape.value(y).clone())
}

/// Eager skip path (the `None` kind yields a zero field).
pub fn skip_forward(x: &ComplexTensor, params: &SkipParams) -> Result<ComplexTensor> {
    let mut tape = Tape::new();
    let ids = params.register(&mut tape, &mut Vec::new());
    let xi = tape.constant(x.clone());
    match skip_tape(&mut tape, xi, &ids)? {
        Some(id) => Ok(tape.value(id).clone()),
        None => Ok(ComplexTensor::zeros(x.shape())),
    }
}

/// Zero-pad the end of each spatial axis of a [C, N..] field by
/// round(fraction * N) points.
pub fn domain_pad(x: &ComplexTensor, fractions: &[f64]) -> Result<ComplexTensor> {
    if fractions.len() + 1 != x.ndim() {
        return Err(Error::ShapeMismatch("one padding fraction per spatial axis".into()));
    }
    if fractions.iter().any(|&f| !(0.0..1.0).contains(&f)) {
        return Err(Error::InvalidArg("padding fractions must lie in [0, 1)".into()));
    }
    let mut shape = x.shape().to_vec();
    for (ax, &f) in fractions.iter().enumerate() {
        shape[ax + 1] += (f * x.shape()[ax + 1] as f64).round() as usize;
    }
    x.pad_embed(&shape, &vec![0; shape.len()])
}

/// Recover the original field from a padded one.
pub fn domain_unpad(x: &ComplexTensor, original_resolution: &[usize]) -> Result<ComplexTensor> {
    if original_resolution.len() + 1 != x.ndim() {
        return Err(Error::ShapeMismatch("rank mismatch".into()));
    }
    let mut size = vec![x.shape()[0]];
    size.extend_from_slice(original_resolution);
    x.slice(&vec![0; x.ndim()], &size)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum EmbeddingMode {
    /// [p sin(x), p cos(x), .., p sin(Lx), p cos(Lx)]
    AmplitudeMod,
    /// [sin(c p x), cos(c p x), .., sin(L c p x), cos(L c p x)]
    FrequencyMod,
}

/// Sinusoidal embedding of a scalar parameter on a 1-d grid.
#[derive(Debug, Clone)]
pub struct EmbeddingSpec {
    pub mode: EmbeddingMode,
    /// Number of harmonics L.
    pub harmonics: usize,
    /// Frequency scale c (frequency modulation only).
    pub freq_scale: f64,
    pub grid: GridSpec,
}

/// Expand a scalar parameter into 2L sinusoidal channels. Errors when
/// the highest generated frequency exceeds the Nyquist mode N/2.
pub fn sinusoidal_embed(p: f64, spec: &EmbeddingSpec) -> Result<RealTensor> {
    if spec.grid.ndim() != 1 {
        return Err(Error::InvalidArg("sinusoidal embedding is 1-d".into()));
    }
    if spec.harmonics == 0 {
        return Err(Error::InvalidArg("need at least one harmonic".into()));
    }
    let n = spec.grid.resolution()[0];
    let l = spec.harmonics;
    let max_freq = match spec.mode {
        EmbeddingMode::AmplitudeMod => l as f64,
        EmbeddingMode::FrequencyMod => spec.freq_scale * p.abs() * l as f64,
    };
    if max_freq > n as f64 / 2.0 {
        return Err(Error::Nyquist(format!(
            "embedding frequency {max_freq} exceeds Nyquist mode {}",
            n / 2
        )));
    }
    let mut out = RealTensor::zeros(&[2 * l, n]);
    for j in 1..=l {
        for i in 0..n {
            // angle on the canonical [0, 2 pi) parameterization
            let x = 2.0 * std::f64::consts::PI * i as f64 / n as f64;
            let (s, c) = match spec.mode {
                EmbeddingMode::AmplitudeMod => {
                    ((j as f64 * x).sin() * p, (j as f64 * x).cos() * p)
                }
                EmbeddingMode::FrequencyMod => {
                    let f = j as f64 * spec.freq_scale * p;
                    ((f * x).sin(), (f * x).cos())
                }
            };
            out.set(&[2 * (j - 1), i], s);
            out.set(&[2 * (j - 1) + 1, i], c);
        }
    }
    Ok(out)
}

/// Wrap a real linear operator into a complex-capable one:
/// (W_r + i W_i)(x_r + i x_i) = (W_r x_r - W_i x_i) + i (W_r x_i + W_i x_r).
pub struct ComplexWrapped<F> {
    real_op: F,
    imag_op: F,
}

impl<F: Fn(&RealTensor) -> RealTensor> ComplexWrapped<F> {
    pub fn new(real_op: F, imag_op: F) -> Self {
        ComplexWrapped { real_op, imag_op }
    }

    pub fn apply(&self, x: &ComplexTensor) -> ComplexTensor {
        let xr = x.real_part();
        let xi = x.imag_part();
        let rr = (self.real_op)(&xr);
        let ri = (self.real_op)(&xi);
        let ir = (self.imag_op)(&xr);
        let ii = (self.imag_op)(&xi);
        ComplexTensor::from_fn(rr.shape(), |idx| {
            Complex64::new(rr.get(idx) - ii.get(idx), ri.get(idx) + ir.get(idx))
        })
    }
}
