//! Tape-based reverse-mode differentiation over the model's operation
//! set.
//!
//! Every node holds a dense complex tensor. Real quantities ride along
//! with zero imaginary part; a leaf marked real receives its gradient
//! in the real component. The cotangent convention for a real scalar
//! loss L is w = dL/d(re v) + i dL/d(im v), which makes the fft adjoint
//! the ifft of the cotangent (the transforms are unitary) and keeps
//! complex parameter gradients directly usable by the optimizer.

use num_complex::Complex64;

use crate::error::{Error, Result};
use crate::math::Activation;
use crate::tensor::{fft, ComplexTensor};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct ValueId(pub(crate) usize);

#[derive(Debug, Clone)]
enum Op {
    Leaf { requires_grad: bool },
    AddScaled(ValueId, ValueId, Complex64),
    Scale(ValueId, Complex64),
    Mul(ValueId, ValueId),
    /// out[o, s] = sum_i w[o, i] x[i, s]; w: [Cout, Cin], x: [Cin, S..]
    ChannelMatmul { w: ValueId, x: ValueId },
    /// out[o, k..] = sum_i w[k.., i, o] x[i, k..]; w: [K.., Cin, Cout]
    ModeMatmul { w: ValueId, x: ValueId },
    /// out[o, s..] = sum_i w[s_axis, i, o] x[i, s..]; w: [K, Cin, Cout]
    BroadcastModeMatmul { w: ValueId, x: ValueId, axis: usize },
    /// n-mode product: out = t x_mode m with m: [R, dim_mode]
    ModeProduct { t: ValueId, m: ValueId, mode: usize },
    /// out[c, s] = x[c, s] + b[c]
    AddBias { x: ValueId, b: ValueId },
    /// out[c, s] = w[c] * x[c, s]
    ChannelScale { x: ValueId, w: ValueId },
    Fft { x: ValueId, axes: Vec<usize> },
    Ifft { x: ValueId, axes: Vec<usize> },
    FftShift { x: ValueId, axes: Vec<usize> },
    IfftShift { x: ValueId, axes: Vec<usize> },
    Slice { x: ValueId, start: Vec<usize> },
    PadEmbed { x: ValueId, offset: Vec<usize> },
    Permute { x: ValueId, perm: Vec<usize> },
    Reshape { x: ValueId },
    Activation { x: ValueId, act: Activation },
    Square { x: ValueId },
    AbsPow { x: ValueId, p: f64 },
    Real { x: ValueId },
    Sum { x: ValueId },
    Mean { x: ValueId },
    /// Per-channel normalization over spatial axes (real path).
    InstanceNorm { x: ValueId, eps: f64 },
}

struct Node {
    value: ComplexTensor,
    op: Op,
}

/// Recorded computation; topological order by construction, backward
/// visits each node exactly once in reverse.
#[derive(Default)]
pub struct Tape {
    nodes: Vec<Node>,
}

impl Tape {
    pub fn new() -> Self {
        Tape { nodes: Vec::new() }
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    pub fn clear(&mut self) {
        self.nodes.clear();
    }

    pub fn value(&self, id: ValueId) -> &ComplexTensor {
        &self.nodes[id.0].value
    }

    pub fn shape(&self, id: ValueId) -> &[usize] {
        self.nodes[id.0].value.shape()
    }

    fn push(&mut self, value: ComplexTensor, op: Op) -> ValueId {
        self.nodes.push(Node { value, op });
        ValueId(self.nodes.len() - 1)
    }

    /// Leaf that does not receive a gradient.
    pub fn constant(&mut self, value: ComplexTensor) -> ValueId {
        self.push(
            value,
            Op::Leaf {
                requires_grad: false,
            },
        )
    }

    /// Leaf that accumulates a gradient.
    pub fn param(&mut self, value: ComplexTensor) -> ValueId {
        self.push(
            value,
            Op::Leaf {
                requires_grad: true,
            },
        )
    }

    pub fn add(&mut self, a: ValueId, b: ValueId) -> Result<ValueId> {
        self.add_scaled(a, b, Complex64::new(1.0, 0.0))
    }

    pub fn sub(&mut self, a: ValueId, b: ValueId) -> Result<ValueId> {
        self.add_scaled(a, b, Complex64::new(-1.0, 0.0))
    }

    pub fn add_scaled(&mut self, a: ValueId, b: ValueId, alpha: Complex64) -> Result<ValueId> {
        let value = self.value(a).zip_map(self.value(b), |u, v| u + alpha * v)?;
        Ok(self.push(value, Op::AddScaled(a, b, alpha)))
    }

    pub fn scale(&mut self, a: ValueId, alpha: Complex64) -> ValueId {
        let value = self.value(a).scale(alpha);
        self.push(value, Op::Scale(a, alpha))
    }

    pub fn mul(&mut self, a: ValueId, b: ValueId) -> Result<ValueId> {
        let value = self.value(a).zip_map(self.value(b), |u, v| u * v)?;
        Ok(self.push(value, Op::Mul(a, b)))
    }

    pub fn channel_matmul(&mut self, w: ValueId, x: ValueId) -> Result<ValueId> {
        let (wt, xt) = (self.value(w), self.value(x));
        if wt.ndim() != 2 {
            return Err(Error::ShapeMismatch("channel matmul weight must be 2-d".into()));
        }
        let (c_out, c_in) = (wt.shape()[0], wt.shape()[1]);
        if xt.shape()[0] != c_in {
            return Err(Error::ShapeMismatch(format!(
                "channel mismatch: weight expects {c_in}, field has {}",
                xt.shape()[0]
            )));
        }
        let spatial: usize = xt.shape()[1..].iter().product();
        let mut out_shape = xt.shape().to_vec();
        out_shape[0] = c_out;
        let mut out = ComplexTensor::zeros(&out_shape);
        for o in 0..c_out {
            for i in 0..c_in {
                let wv = wt.data()[o * c_in + i];
                if wv == Complex64::new(0.0, 0.0) {
                    continue;
                }
                let src = &xt.data()[i * spatial..(i + 1) * spatial];
                let dst = &mut out.data_mut()[o * spatial..(o + 1) * spatial];
                for (d, s) in dst.iter_mut().zip(src) {
                    *d += wv * s;
                }
            }
        }
        Ok(self.push(out, Op::ChannelMatmul { w, x }))
    }

    pub fn mode_matmul(&mut self, w: ValueId, x: ValueId) -> Result<ValueId> {
        let (wt, xt) = (self.value(w), self.value(x));
        let wr = wt.ndim();
        if wr < 3 {
            return Err(Error::ShapeMismatch("mode matmul weight must be [K.., Cin, Cout]".into()));
        }
        let modes = &wt.shape()[..wr - 2];
        let c_in = wt.shape()[wr - 2];
        let c_out = wt.shape()[wr - 1];
        if xt.shape()[0] != c_in || &xt.shape()[1..] != modes {
            return Err(Error::ShapeMismatch(format!(
                "mode matmul: weight {:?} incompatible with field {:?}",
                wt.shape(),
                xt.shape()
            )));
        }
        let k_total: usize = modes.iter().product();
        let mut out_shape = vec![c_out];
        out_shape.extend_from_slice(modes);
        let mut out = ComplexTensor::zeros(&out_shape);
        // w laid out as [k, i, o] with k row-major over the mode axes
        for k in 0..k_total {
            for i in 0..c_in {
                let xv = xt.data()[i * k_total + k];
                if xv == Complex64::new(0.0, 0.0) {
                    continue;
                }
                let base = (k * c_in + i) * c_out;
                for o in 0..c_out {
                    out.data_mut()[o * k_total + k] += wt.data()[base + o] * xv;
                }
            }
        }
        Ok(self.push(out, Op::ModeMatmul { w, x }))
    }

    pub fn broadcast_mode_matmul(&mut self, w: ValueId, x: ValueId, axis: usize) -> Result<ValueId> {
        let (wt, xt) = (self.value(w), self.value(x));
        if wt.ndim() != 3 {
            return Err(Error::ShapeMismatch("per-axis weight must be [K, Cin, Cout]".into()));
        }
        let (k, c_in, c_out) = (wt.shape()[0], wt.shape()[1], wt.shape()[2]);
        if axis == 0 || axis >= xt.ndim() {
            return Err(Error::InvalidArg(format!("axis {axis} is not a spatial axis")));
        }
        if xt.shape()[0] != c_in || xt.shape()[axis] != k {
            return Err(Error::ShapeMismatch(format!(
                "per-axis weight {:?} incompatible with field {:?} on axis {axis}",
                wt.shape(),
                xt.shape()
            )));
        }
        let mut out_shape = xt.shape().to_vec();
        out_shape[0] = c_out;
        let mut out = ComplexTensor::zeros(&out_shape);
        let in_strides = xt.strides();
        let out_strides = out.strides();
        let spatial: usize = xt.shape()[1..].iter().product();
        let ax_stride = in_strides[axis];
        let ax_extent = xt.shape()[axis];
        for s in 0..spatial {
            // recover the axis index from the flattened spatial offset
            let kj = (s / ax_stride) % ax_extent;
            for o in 0..c_out {
                let mut acc = Complex64::new(0.0, 0.0);
                for i in 0..c_in {
                    acc += wt.data()[(kj * c_in + i) * c_out + o] * xt.data()[i * spatial + s];
                }
                out.data_mut()[o * out_strides[0] + s] = acc;
            }
        }
        Ok(self.push(out, Op::BroadcastModeMatmul { w, x, axis }))
    }

    pub fn mode_product(&mut self, t: ValueId, m: ValueId, mode: usize) -> Result<ValueId> {
        let (tt, mt) = (self.value(t), self.value(m));
        if mt.ndim() != 2 {
            return Err(Error::ShapeMismatch("mode product matrix must be 2-d".into()));
        }
        if mode >= tt.ndim() || mt.shape()[1] != tt.shape()[mode] {
            return Err(Error::ShapeMismatch(format!(
                "mode product: matrix {:?} vs tensor {:?} on mode {mode}",
                mt.shape(),
                tt.shape()
            )));
        }
        let value = mode_product_eval(tt, mt, mode, false)?;
        Ok(self.push(value, Op::ModeProduct { t, m, mode }))
    }

    pub fn add_bias(&mut self, x: ValueId, b: ValueId) -> Result<ValueId> {
        let (xt, bt) = (self.value(x), self.value(b));
        if bt.ndim() != 1 || bt.shape()[0] != xt.shape()[0] {
            return Err(Error::ShapeMismatch(format!(
                "bias {:?} incompatible with field {:?}",
                bt.shape(),
                xt.shape()
            )));
        }
        let spatial: usize = xt.shape()[1..].iter().product();
        let mut out = xt.clone();
        for c in 0..bt.shape()[0] {
            let bv = bt.data()[c];
            for s in 0..spatial {
                out.data_mut()[c * spatial + s] += bv;
            }
        }
        Ok(self.push(out, Op::AddBias { x, b }))
    }

    pub fn channel_scale(&mut self, x: ValueId, w: ValueId) -> Result<ValueId> {
        let (xt, wt) = (self.value(x), self.value(w));
        if wt.ndim() != 1 || wt.shape()[0] != xt.shape()[0] {
            return Err(Error::ShapeMismatch(format!(
                "channel scale {:?} incompatible with field {:?}",
                wt.shape(),
                xt.shape()
            )));
        }
        let spatial: usize = xt.shape()[1..].iter().product();
        let mut out = xt.clone();
        for c in 0..wt.shape()[0] {
            let wv = wt.data()[c];
            for s in 0..spatial {
                out.data_mut()[c * spatial + s] *= wv;
            }
        }
        Ok(self.push(out, Op::ChannelScale { x, w }))
    }

    pub fn fft(&mut self, x: ValueId, axes: &[usize]) -> Result<ValueId> {
        let value = fft::fft_nd(self.value(x), axes, false)?;
        Ok(self.push(value, Op::Fft { x, axes: axes.to_vec() }))
    }

    pub fn ifft(&mut self, x: ValueId, axes: &[usize]) -> Result<ValueId> {
        let value = fft::fft_nd(self.value(x), axes, true)?;
        Ok(self.push(value, Op::Ifft { x, axes: axes.to_vec() }))
    }

    pub fn fftshift(&mut self, x: ValueId, axes: &[usize]) -> Result<ValueId> {
        let value = fft::shift_nd(self.value(x), axes, false)?;
        Ok(self.push(value, Op::FftShift { x, axes: axes.to_vec() }))
    }

    pub fn ifftshift(&mut self, x: ValueId, axes: &[usize]) -> Result<ValueId> {
        let value = fft::shift_nd(self.value(x), axes, true)?;
        Ok(self.push(value, Op::IfftShift { x, axes: axes.to_vec() }))
    }

    pub fn slice(&mut self, x: ValueId, start: &[usize], size: &[usize]) -> Result<ValueId> {
        let value = self.value(x).slice(start, size)?;
        Ok(self.push(
            value,
            Op::Slice {
                x,
                start: start.to_vec(),
            },
        ))
    }

    pub fn pad_embed(&mut self, x: ValueId, shape: &[usize], offset: &[usize]) -> Result<ValueId> {
        let value = self.value(x).pad_embed(shape, offset)?;
        Ok(self.push(
            value,
            Op::PadEmbed {
                x,
                offset: offset.to_vec(),
            },
        ))
    }

    pub fn permute(&mut self, x: ValueId, perm: &[usize]) -> Result<ValueId> {
        let value = self.value(x).permute(perm)?;
        Ok(self.push(value, Op::Permute { x, perm: perm.to_vec() }))
    }

    pub fn reshape(&mut self, x: ValueId, shape: &[usize]) -> Result<ValueId> {
        let value = self.value(x).reshape(shape)?;
        Ok(self.push(value, Op::Reshape { x }))
    }

    /// Pointwise nonlinearity applied to real and imaginary parts
    /// separately (they coincide with the real case when im = 0).
    pub fn activation(&mut self, x: ValueId, act: Activation) -> ValueId {
        if act == Activation::Identity {
            return x;
        }
        let value = self
            .value(x)
            .map(|z| Complex64::new(act.apply(z.re), act.apply(z.im)));
        self.push(value, Op::Activation { x, act })
    }

    pub fn square(&mut self, x: ValueId) -> ValueId {
        let value = self.value(x).map(|z| z * z);
        self.push(value, Op::Square { x })
    }

    /// |x|^p elementwise; output is real.
    pub fn abs_pow(&mut self, x: ValueId, p: f64) -> ValueId {
        let value = self.value(x).map(|z| Complex64::new(z.norm().powf(p), 0.0));
        self.push(value, Op::AbsPow { x, p })
    }

    pub fn real(&mut self, x: ValueId) -> ValueId {
        let value = self.value(x).map(|z| Complex64::new(z.re, 0.0));
        self.push(value, Op::Real { x })
    }

    pub fn sum(&mut self, x: ValueId) -> ValueId {
        let total: Complex64 = self.value(x).data().iter().sum();
        self.push(ComplexTensor::scalar(total), Op::Sum { x })
    }

    pub fn mean(&mut self, x: ValueId) -> ValueId {
        let n = self.value(x).len() as f64;
        let total: Complex64 = self.value(x).data().iter().sum();
        self.push(ComplexTensor::scalar(total / n), Op::Mean { x })
    }

    /// Per-channel instance normalization over the spatial axes,
    /// without affine parameters. Real path only.
    pub fn instance_norm(&mut self, x: ValueId, eps: f64) -> Result<ValueId> {
        let xt = self.value(x);
        if xt.ndim() < 2 {
            return Err(Error::ShapeMismatch("instance norm expects [C, S..]".into()));
        }
        let value = instance_norm_eval(xt, eps);
        Ok(self.push(value, Op::InstanceNorm { x, eps }))
    }

    /// Reverse pass from a real scalar loss; returns the gradients of
    /// the requested leaves in order. Complex leaves receive
    /// dL/d(re) + i dL/d(im); real leaves carry their gradient in the
    /// real component.
    pub fn grad(&self, loss: ValueId, wrt: &[ValueId]) -> Result<Vec<ComplexTensor>> {
        let loss_val = self.value(loss);
        if loss_val.len() != 1 {
            return Err(Error::InvalidArg(format!(
                "grad root must be scalar, got shape {:?}",
                loss_val.shape()
            )));
        }
        let mut adjoints: Vec<Option<ComplexTensor>> = vec![None; self.nodes.len()];
        adjoints[loss.0] = Some(ComplexTensor::scalar(Complex64::new(1.0, 0.0)));

        for idx in (0..=loss.0).rev() {
            let Some(cot) = adjoints[idx].take() else {
                continue;
            };
            self.backward_node(idx, &cot, &mut adjoints)?;
            // keep the adjoint available in case a leaf is queried
            adjoints[idx] = Some(cot);
        }

        let mut out = Vec::with_capacity(wrt.len());
        for &id in wrt {
            let g = adjoints[id.0]
                .clone()
                .unwrap_or_else(|| ComplexTensor::zeros(self.shape(id)));
            out.push(g);
        }
        Ok(out)
    }

    fn accumulate(
        &self,
        adjoints: &mut [Option<ComplexTensor>],
        target: ValueId,
        delta: ComplexTensor,
    ) -> Result<()> {
        // constants never need adjoints
        if let Op::Leaf { requires_grad: false } = self.nodes[target.0].op {
            return Ok(());
        }
        match &mut adjoints[target.0] {
            Some(existing) => {
                *existing = existing.zip_map(&delta, |a, b| a + b)?;
            }
            slot @ None => *slot = Some(delta),
        }
        Ok(())
    }

    fn backward_node(
        &self,
        idx: usize,
        cot: &ComplexTensor,
        adjoints: &mut [Option<ComplexTensor>],
    ) -> Result<()> {
        match &self.nodes[idx].op {
            Op::Leaf { .. } => {}
            Op::AddScaled(a, b, alpha) => {
                self.accumulate(adjoints, *a, cot.clone())?;
                self.accumulate(adjoints, *b, cot.scale(alpha.conj()))?;
            }
            Op::Scale(a, alpha) => {
                self.accumulate(adjoints, *a, cot.scale(alpha.conj()))?;
            }
            Op::Mul(a, b) => {
                let da = cot.zip_map(self.value(*b), |w, v| w * v.conj())?;
                let db = cot.zip_map(self.value(*a), |w, u| w * u.conj())?;
                self.accumulate(adjoints, *a, da)?;
                self.accumulate(adjoints, *b, db)?;
            }
            Op::ChannelMatmul { w, x } => {
                let wt = self.value(*w);
                let xt = self.value(*x);
                let (c_out, c_in) = (wt.shape()[0], wt.shape()[1]);
                let spatial: usize = xt.shape()[1..].iter().product();
                let mut dw = ComplexTensor::zeros(wt.shape());
                let mut dx = ComplexTensor::zeros(xt.shape());
                for o in 0..c_out {
                    let wrow = &wt.data()[o * c_in..(o + 1) * c_in];
                    let crow = &cot.data()[o * spatial..(o + 1) * spatial];
                    for i in 0..c_in {
                        let xrow = &xt.data()[i * spatial..(i + 1) * spatial];
                        let mut acc = Complex64::new(0.0, 0.0);
                        let wc = wrow[i].conj();
                        let drow = &mut dx.data_mut()[i * spatial..(i + 1) * spatial];
                        for s in 0..spatial {
                            acc += crow[s] * xrow[s].conj();
                            drow[s] += wc * crow[s];
                        }
                        dw.data_mut()[o * c_in + i] = acc;
                    }
                }
                self.accumulate(adjoints, *w, dw)?;
                self.accumulate(adjoints, *x, dx)?;
            }
            Op::ModeMatmul { w, x } => {
                let wt = self.value(*w);
                let xt = self.value(*x);
                let wr = wt.ndim();
                let c_in = wt.shape()[wr - 2];
                let c_out = wt.shape()[wr - 1];
                let k_total: usize = wt.shape()[..wr - 2].iter().product();
                let mut dw = ComplexTensor::zeros(wt.shape());
                let mut dx = ComplexTensor::zeros(xt.shape());
                for k in 0..k_total {
                    for i in 0..c_in {
                        let xv = xt.data()[i * k_total + k];
                        let base = (k * c_in + i) * c_out;
                        let mut acc = Complex64::new(0.0, 0.0);
                        for o in 0..c_out {
                            let co = cot.data()[o * k_total + k];
                            dw.data_mut()[base + o] += co * xv.conj();
                            acc += wt.data()[base + o].conj() * co;
                        }
                        dx.data_mut()[i * k_total + k] = acc;
                    }
                }
                self.accumulate(adjoints, *w, dw)?;
                self.accumulate(adjoints, *x, dx)?;
            }
            Op::BroadcastModeMatmul { w, x, axis } => {
                let wt = self.value(*w);
                let xt = self.value(*x);
                let (_, c_in, c_out) = (wt.shape()[0], wt.shape()[1], wt.shape()[2]);
                let spatial: usize = xt.shape()[1..].iter().product();
                let ax_stride = xt.strides()[*axis];
                let ax_extent = xt.shape()[*axis];
                let mut dw = ComplexTensor::zeros(wt.shape());
                let mut dx = ComplexTensor::zeros(xt.shape());
                for s in 0..spatial {
                    let kj = (s / ax_stride) % ax_extent;
                    for i in 0..c_in {
                        let xv = xt.data()[i * spatial + s];
                        let mut acc = Complex64::new(0.0, 0.0);
                        for o in 0..c_out {
                            let co = cot.data()[o * spatial + s];
                            dw.data_mut()[(kj * c_in + i) * c_out + o] += co * xv.conj();
                            acc += wt.data()[(kj * c_in + i) * c_out + o].conj() * co;
                        }
                        dx.data_mut()[i * spatial + s] = acc;
                    }
                }
                self.accumulate(adjoints, *w, dw)?;
                self.accumulate(adjoints, *x, dx)?;
            }
            Op::ModeProduct { t, m, mode } => {
                let tt = self.value(*t);
                let mt = self.value(*m);
                // dt = cot x_mode m^H ; dm[r, j] = sum cot[.., r, ..] conj(t[.., j, ..])
                let dt = mode_product_eval(cot, mt, *mode, true)?;
                let dm = mode_product_outer(cot, tt, *mode)?;
                self.accumulate(adjoints, *t, dt)?;
                self.accumulate(adjoints, *m, dm)?;
            }
            Op::AddBias { x, b } => {
                let bt = self.value(*b);
                let spatial: usize = self.value(*x).shape()[1..].iter().product();
                let mut db = ComplexTensor::zeros(bt.shape());
                for c in 0..bt.shape()[0] {
                    let mut acc = Complex64::new(0.0, 0.0);
                    for s in 0..spatial {
                        acc += cot.data()[c * spatial + s];
                    }
                    db.data_mut()[c] = acc;
                }
                self.accumulate(adjoints, *x, cot.clone())?;
                self.accumulate(adjoints, *b, db)?;
            }
            Op::ChannelScale { x, w } => {
                let xt = self.value(*x);
                let wt = self.value(*w);
                let spatial: usize = xt.shape()[1..].iter().product();
                let mut dx = ComplexTensor::zeros(xt.shape());
                let mut dw = ComplexTensor::zeros(wt.shape());
                for c in 0..wt.shape()[0] {
                    let wc = wt.data()[c].conj();
                    let mut acc = Complex64::new(0.0, 0.0);
                    for s in 0..spatial {
                        let co = cot.data()[c * spatial + s];
                        dx.data_mut()[c * spatial + s] = wc * co;
                        acc += co * xt.data()[c * spatial + s].conj();
                    }
                    dw.data_mut()[c] = acc;
                }
                self.accumulate(adjoints, *x, dx)?;
                self.accumulate(adjoints, *w, dw)?;
            }
            Op::Fft { x, axes } => {
                self.accumulate(adjoints, *x, fft::fft_nd(cot, axes, true)?)?;
            }
            Op::Ifft { x, axes } => {
                self.accumulate(adjoints, *x, fft::fft_nd(cot, axes, false)?)?;
            }
            Op::FftShift { x, axes } => {
                self.accumulate(adjoints, *x, fft::shift_nd(cot, axes, true)?)?;
            }
            Op::IfftShift { x, axes } => {
                self.accumulate(adjoints, *x, fft::shift_nd(cot, axes, false)?)?;
            }
            Op::Slice { x, start } => {
                let dx = cot.pad_embed(self.value(*x).shape(), start)?;
                self.accumulate(adjoints, *x, dx)?;
            }
            Op::PadEmbed { x, offset } => {
                let dx = cot.slice(offset, self.value(*x).shape())?;
                self.accumulate(adjoints, *x, dx)?;
            }
            Op::Permute { x, perm } => {
                let mut inverse = vec![0usize; perm.len()];
                for (i, &p) in perm.iter().enumerate() {
                    inverse[p] = i;
                }
                self.accumulate(adjoints, *x, cot.permute(&inverse)?)?;
            }
            Op::Reshape { x } => {
                let dx = cot.reshape(self.value(*x).shape())?;
                self.accumulate(adjoints, *x, dx)?;
            }
            Op::Activation { x, act } => {
                let dx = self.value(*x).zip_map(cot, |z, w| {
                    Complex64::new(w.re * act.derivative(z.re), w.im * act.derivative(z.im))
                })?;
                self.accumulate(adjoints, *x, dx)?;
            }
            Op::Square { x } => {
                let dx = self
                    .value(*x)
                    .zip_map(cot, |z, w| 2.0 * z.conj() * w)?;
                self.accumulate(adjoints, *x, dx)?;
            }
            Op::AbsPow { x, p } => {
                let p = *p;
                let dx = self.value(*x).zip_map(cot, |z, w| {
                    let r = z.norm();
                    if r == 0.0 {
                        Complex64::new(0.0, 0.0)
                    } else {
                        z * (p * r.powf(p - 2.0) * w.re)
                    }
                })?;
                self.accumulate(adjoints, *x, dx)?;
            }
            Op::Real { x } => {
                let dx = cot.map(|w| Complex64::new(w.re, 0.0));
                self.accumulate(adjoints, *x, dx)?;
            }
            Op::Sum { x } => {
                let w = cot.data()[0];
                let shape = self.value(*x).shape().to_vec();
                let dx = ComplexTensor::from_fn(&shape, |_| w);
                self.accumulate(adjoints, *x, dx)?;
            }
            Op::Mean { x } => {
                let n = self.value(*x).len() as f64;
                let w = cot.data()[0] / n;
                let shape = self.value(*x).shape().to_vec();
                let dx = ComplexTensor::from_fn(&shape, |_| w);
                self.accumulate(adjoints, *x, dx)?;
            }
            Op::InstanceNorm { x, eps } => {
                let xt = self.value(*x);
                let dx = instance_norm_backward(xt, cot, *eps);
                self.accumulate(adjoints, *x, dx)?;
            }
        }
        Ok(())
    }
}

/// y = t x_mode m (adjoint_matrix: use m^H instead of m).
pub(crate) fn mode_product_eval(
    t: &ComplexTensor,
    m: &ComplexTensor,
    mode: usize,
    adjoint_matrix: bool,
) -> Result<ComplexTensor> {
    let (rows, cols) = (m.shape()[0], m.shape()[1]);
    let (in_dim, out_dim) = if adjoint_matrix { (rows, cols) } else { (cols, rows) };
    if t.shape()[mode] != in_dim {
        return Err(Error::ShapeMismatch(format!(
            "mode product: tensor mode extent {} vs matrix input {in_dim}",
            t.shape()[mode]
        )));
    }
    let mut out_shape = t.shape().to_vec();
    out_shape[mode] = out_dim;
    let mut out = ComplexTensor::zeros(&out_shape);
    let t_stride = t.strides()[mode];
    let o_stride = out.strides()[mode];
    let t_offsets = t.lane_offsets(mode);
    let o_offsets = out.lane_offsets(mode);
    for (&tb, &ob) in t_offsets.iter().zip(&o_offsets) {
        for r in 0..out_dim {
            let mut acc = Complex64::new(0.0, 0.0);
            for j in 0..in_dim {
                let mv = if adjoint_matrix {
                    m.data()[j * cols + r].conj()
                } else {
                    m.data()[r * cols + j]
                };
                acc += mv * t.data()[tb + j * t_stride];
            }
            out.data_mut()[ob + r * o_stride] = acc;
        }
    }
    Ok(out)
}

/// dm[r, j] = sum over lanes of cot[.., r, ..] * conj(t[.., j, ..]).
fn mode_product_outer(cot: &ComplexTensor, t: &ComplexTensor, mode: usize) -> Result<ComplexTensor> {
    let r_dim = cot.shape()[mode];
    let j_dim = t.shape()[mode];
    let mut dm = ComplexTensor::zeros(&[r_dim, j_dim]);
    let c_stride = cot.strides()[mode];
    let t_stride = t.strides()[mode];
    let c_offsets = cot.lane_offsets(mode);
    let t_offsets = t.lane_offsets(mode);
    for (&cb, &tb) in c_offsets.iter().zip(&t_offsets) {
        for r in 0..r_dim {
            let cv = cot.data()[cb + r * c_stride];
            for j in 0..j_dim {
                dm.data_mut()[r * j_dim + j] += cv * t.data()[tb + j * t_stride].conj();
            }
        }
    }
    Ok(dm)
}

fn instance_norm_eval(x: &ComplexTensor, eps: f64) -> ComplexTensor {
    let c = x.shape()[0];
    let spatial: usize = x.shape()[1..].iter().product();
    let mut out = x.clone();
    for ch in 0..c {
        let lane = &x.data()[ch * spatial..(ch + 1) * spatial];
        let mean: f64 = lane.iter().map(|z| z.re).sum::<f64>() / spatial as f64;
        let var: f64 = lane.iter().map(|z| (z.re - mean).powi(2)).sum::<f64>() / spatial as f64;
        let inv = 1.0 / (var + eps).sqrt();
        for s in 0..spatial {
            let v = (x.data()[ch * spatial + s].re - mean) * inv;
            out.data_mut()[ch * spatial + s] = Complex64::new(v, 0.0);
        }
    }
    out
}

fn instance_norm_backward(x: &ComplexTensor, cot: &ComplexTensor, eps: f64) -> ComplexTensor {
    let c = x.shape()[0];
    let spatial: usize = x.shape()[1..].iter().product();
    let mut dx = ComplexTensor::zeros(x.shape());
    for ch in 0..c {
        let lane: Vec<f64> = x.data()[ch * spatial..(ch + 1) * spatial]
            .iter()
            .map(|z| z.re)
            .collect();
        let g: Vec<f64> = cot.data()[ch * spatial..(ch + 1) * spatial]
            .iter()
            .map(|z| z.re)
            .collect();
        let mean: f64 = lane.iter().sum::<f64>() / spatial as f64;
        let var: f64 = lane.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / spatial as f64;
        let inv = 1.0 / (var + eps).sqrt();
        let y: Vec<f64> = lane.iter().map(|v| (v - mean) * inv).collect();
        let g_mean: f64 = g.iter().sum::<f64>() / spatial as f64;
        let gy_mean: f64 = g.iter().zip(&y).map(|(a, b)| a * b).sum::<f64>() / spatial as f64;
        for s in 0..spatial {
            let v = inv * (g[s] - g_mean - y[s] * gy_mean);
            dx.data_mut()[ch * spatial + s] = Complex64::new(v, 0.0);
        }
    }
    dx
}
