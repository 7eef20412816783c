//! Fourier Neural Operator: configuration, parameter tensors,
//! initialization, and closed-form parameter accounting.

pub mod checkpoint;
pub mod layers;
pub mod tucker;

use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::math::Activation;
use crate::tensor::ComplexTensor;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum SkipKind {
    Identity,
    Linear,
    SoftGating,
    None,
}

impl SkipKind {
    pub fn parse(name: &str) -> Result<Self> {
        match name.to_ascii_lowercase().replace('_', "-").as_str() {
            "identity" => Ok(SkipKind::Identity),
            "linear" => Ok(SkipKind::Linear),
            "soft-gating" | "softgating" => Ok(SkipKind::SoftGating),
            "none" => Ok(SkipKind::None),
            other => Err(Error::InvalidArg(format!("unknown skip kind '{other}'"))),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Factorization {
    Dense,
    Tucker,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum NormKind {
    None,
    InstanceNorm,
}

/// Architecture hyperparameters. `n_modes` is the active per-axis mode
/// count; weights are allocated at `max_n_modes` so incremental
/// training can grow `n_modes` without reallocation.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FnoConfig {
    pub n_modes: Vec<usize>,
    pub max_n_modes: Vec<usize>,
    pub hidden_channels: usize,
    pub in_channels: usize,
    pub out_channels: usize,
    pub n_layers: usize,
    pub lifting_channel_ratio: f64,
    pub projection_channel_ratio: f64,
    pub channel_mlp_expansion: f64,
    pub fno_skip: SkipKind,
    pub channel_mlp_skip: SkipKind,
    pub activation: Activation,
    pub domain_padding: Vec<f64>,
    pub resolution_scaling_factor: Option<Vec<f64>>,
    pub factorization: Factorization,
    pub rank: f64,
    pub separable: bool,
    pub complex_data: bool,
    pub norm: NormKind,
    pub dropout: f64,
}

impl FnoConfig {
    /// 1-d default: dense weights, soft-gating skips, GELU.
    pub fn new_1d(n_modes: usize, hidden_channels: usize, n_layers: usize) -> Self {
        FnoConfig {
            n_modes: vec![n_modes],
            max_n_modes: vec![n_modes],
            hidden_channels,
            in_channels: 1,
            out_channels: 1,
            n_layers,
            lifting_channel_ratio: 2.0,
            projection_channel_ratio: 2.0,
            channel_mlp_expansion: 0.5,
            fno_skip: SkipKind::SoftGating,
            channel_mlp_skip: SkipKind::SoftGating,
            activation: Activation::Gelu,
            domain_padding: vec![],
            resolution_scaling_factor: None,
            factorization: Factorization::Dense,
            rank: 1.0,
            separable: false,
            complex_data: false,
            norm: NormKind::None,
            dropout: 0.0,
        }
    }

    pub fn ndim(&self) -> usize {
        self.n_modes.len()
    }

    /// Internal width of a two-layer channel MLP given a ratio.
    fn ratio_width(&self, ratio: f64) -> usize {
        ((ratio * self.hidden_channels as f64).round() as usize).max(1)
    }

    pub fn lifting_width(&self) -> usize {
        self.ratio_width(self.lifting_channel_ratio)
    }

    pub fn projection_width(&self) -> usize {
        self.ratio_width(self.projection_channel_ratio)
    }

    pub fn mlp_width(&self) -> usize {
        self.ratio_width(self.channel_mlp_expansion)
    }

    pub fn validate(&self) -> Result<()> {
        if self.n_layers < 1 {
            return Err(Error::InvalidArg("n_layers must be >= 1".into()));
        }
        if self.hidden_channels < 1 || self.in_channels < 1 || self.out_channels < 1 {
            return Err(Error::InvalidArg("channel counts must be >= 1".into()));
        }
        if self.n_modes.is_empty() || self.n_modes.iter().any(|&k| k == 0) {
            return Err(Error::InvalidArg("n_modes must be positive per axis".into()));
        }
        if self.max_n_modes.len() != self.n_modes.len() {
            return Err(Error::InvalidArg("max_n_modes rank mismatch".into()));
        }
        for (ax, (&k, &m)) in self.n_modes.iter().zip(&self.max_n_modes).enumerate() {
            if k > m {
                return Err(Error::InvalidArg(format!(
                    "n_modes {k} exceeds max_n_modes {m} on axis {ax}"
                )));
            }
        }
        if !(self.rank > 0.0 && self.rank <= 1.0) {
            return Err(Error::InvalidArg(format!(
                "rank must lie in (0, 1], got {}",
                self.rank
            )));
        }
        if let Some(s) = &self.resolution_scaling_factor {
            if s.len() != self.n_layers {
                return Err(Error::InvalidArg(
                    "resolution scaling list must have one entry per layer".into(),
                ));
            }
            if s.iter().any(|&f| f <= 0.0 || !f.is_finite()) {
                return Err(Error::InvalidArg("scaling factors must be positive".into()));
            }
        }
        if !self.domain_padding.is_empty() {
            if self.domain_padding.len() != self.n_modes.len() {
                return Err(Error::InvalidArg("domain_padding rank mismatch".into()));
            }
            if self.domain_padding.iter().any(|&f| !(0.0..1.0).contains(&f)) {
                return Err(Error::InvalidArg(
                    "domain padding fractions must lie in [0, 1)".into(),
                ));
            }
        }
        if self.dropout != 0.0 {
            return Err(Error::InvalidArg(
                "dropout is accepted in the config but must be 0 (deterministic training)".into(),
            ));
        }
        if self.activation == Activation::Square {
            return Err(Error::InvalidArg(
                "square is a probe nonlinearity, not a model activation".into(),
            ));
        }
        if self.complex_data && self.norm != NormKind::None {
            return Err(Error::InvalidArg(
                "instance norm is only wired for the real data path".into(),
            ));
        }
        if self.separable && self.factorization == Factorization::Tucker {
            return Err(Error::InvalidArg(
                "separable weights and Tucker factorization are mutually exclusive".into(),
            ));
        }
        Ok(())
    }
}

/// Spectral weights of one layer, allocated at `max_n_modes`.
#[derive(Debug, Clone, PartialEq)]
pub enum SpectralWeights {
    /// [K_1, .., K_d, C_in, C_out]
    Dense(ComplexTensor),
    /// Tucker core [R_1.., R_I, R_O] plus one factor [dim_i, R_i] per mode.
    Tucker {
        core: ComplexTensor,
        factors: Vec<ComplexTensor>,
    },
    /// Per-axis weights, each [K_j, C, C].
    Separable(Vec<ComplexTensor>),
}

#[derive(Debug, Clone, PartialEq)]
pub struct MlpParams {
    /// (weight [out, in], bias [out]) per layer.
    pub layers: Vec<(ComplexTensor, ComplexTensor)>,
}

#[derive(Debug, Clone, PartialEq)]
pub enum SkipParams {
    Identity,
    None,
    /// [C_out, C_in]
    Linear(ComplexTensor),
    /// w, b: per-channel scale and bias.
    SoftGating { w: ComplexTensor, b: ComplexTensor },
}

#[derive(Debug, Clone, PartialEq)]
pub struct BlockParams {
    pub spectral: SpectralWeights,
    /// Real per-output-channel bias added in physical space.
    pub bias: ComplexTensor,
    pub mlp: MlpParams,
    pub fno_skip: SkipParams,
    pub mlp_skip: SkipParams,
}

/// All trainable tensors. Real-valued parameters are stored as complex
/// tensors with zero imaginary part and flagged real during visits so
/// optimizers and serialization treat them as single scalars.
#[derive(Debug, Clone, PartialEq)]
pub struct FnoParams {
    pub lifting: MlpParams,
    pub blocks: Vec<BlockParams>,
    pub projection: MlpParams,
    pub complex_data: bool,
}

/// Whether a parameter tensor counts 2 real scalars per entry.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ParamKind {
    Real,
    Complex,
}

impl MlpParams {
    fn visit<'a>(&'a self, kind: ParamKind, out: &mut Vec<(&'a ComplexTensor, ParamKind)>) {
        for (w, b) in &self.layers {
            out.push((w, kind));
            out.push((b, kind));
        }
    }

    fn visit_mut<'a>(
        &'a mut self,
        kind: ParamKind,
        out: &mut Vec<(&'a mut ComplexTensor, ParamKind)>,
    ) {
        for (w, b) in &mut self.layers {
            out.push((w, kind));
            out.push((b, kind));
        }
    }
}

impl SkipParams {
    fn visit<'a>(&'a self, kind: ParamKind, out: &mut Vec<(&'a ComplexTensor, ParamKind)>) {
        match self {
            SkipParams::Identity | SkipParams::None => {}
            SkipParams::Linear(w) => out.push((w, kind)),
            SkipParams::SoftGating { w, b } => {
                out.push((w, kind));
                out.push((b, kind));
            }
        }
    }

    fn visit_mut<'a>(
        &'a mut self,
        kind: ParamKind,
        out: &mut Vec<(&'a mut ComplexTensor, ParamKind)>,
    ) {
        match self {
            SkipParams::Identity | SkipParams::None => {}
            SkipParams::Linear(w) => out.push((w, kind)),
            SkipParams::SoftGating { w, b } => {
                out.push((w, kind));
                out.push((b, kind));
            }
        }
    }
}

impl FnoParams {
    fn pointwise_kind(&self) -> ParamKind {
        if self.complex_data {
            ParamKind::Complex
        } else {
            ParamKind::Real
        }
    }

    /// All parameter tensors in canonical declaration order (the order
    /// used by the optimizer, the checkpoint format, and the
    /// brute-force parameter count).
    pub fn visit(&self) -> Vec<(&ComplexTensor, ParamKind)> {
        let pk = self.pointwise_kind();
        let mut out = Vec::new();
        self.lifting.visit(pk, &mut out);
        for block in &self.blocks {
            match &block.spectral {
                SpectralWeights::Dense(w) => out.push((w, ParamKind::Complex)),
                SpectralWeights::Tucker { core, factors } => {
                    out.push((core, ParamKind::Complex));
                    for f in factors {
                        out.push((f, ParamKind::Complex));
                    }
                }
                SpectralWeights::Separable(ws) => {
                    for w in ws {
                        out.push((w, ParamKind::Complex));
                    }
                }
            }
            out.push((&block.bias, pk));
            block.mlp.visit(pk, &mut out);
            block.fno_skip.visit(pk, &mut out);
            block.mlp_skip.visit(pk, &mut out);
        }
        self.projection.visit(pk, &mut out);
        out
    }

    pub fn visit_mut(&mut self) -> Vec<(&mut ComplexTensor, ParamKind)> {
        let pk = self.pointwise_kind();
        let mut out = Vec::new();
        self.lifting.visit_mut(pk, &mut out);
        for block in &mut self.blocks {
            match &mut block.spectral {
                SpectralWeights::Dense(w) => out.push((w, ParamKind::Complex)),
                SpectralWeights::Tucker { core, factors } => {
                    out.push((core, ParamKind::Complex));
                    for f in factors {
                        out.push((f, ParamKind::Complex));
                    }
                }
                SpectralWeights::Separable(ws) => {
                    for w in ws {
                        out.push((w, ParamKind::Complex));
                    }
                }
            }
            out.push((&mut block.bias, pk));
            block.mlp.visit_mut(pk, &mut out);
            block.fno_skip.visit_mut(pk, &mut out);
            block.mlp_skip.visit_mut(pk, &mut out);
        }
        self.projection.visit_mut(pk, &mut out);
        out
    }

    /// Stored real scalars (2 per complex entry, 1 per real entry).
    pub fn stored_scalars(&self) -> usize {
        self.visit()
            .iter()
            .map(|(t, kind)| match kind {
                ParamKind::Complex => 2 * t.len(),
                ParamKind::Real => t.len(),
            })
            .sum()
    }

    /// Zero all imaginary parts of real-flagged tensors (the optimizer
    /// never writes them; this is a post-deserialization guard).
    pub fn scrub_real_params(&mut self) {
        for (t, kind) in self.visit_mut() {
            if kind == ParamKind::Real {
                for z in t.data_mut() {
                    *z = Complex64::new(z.re, 0.0);
                }
            }
        }
    }
}

fn glorot_uniform(
    rng: &mut ChaCha8Rng,
    rows: usize,
    cols: usize,
    complex: bool,
) -> ComplexTensor {
    let bound = (6.0 / (rows + cols) as f64).sqrt();
    ComplexTensor::from_fn(&[rows, cols], |_| {
        Complex64::new(
            rng.gen_range(-bound..bound),
            if complex { rng.gen_range(-bound..bound) } else { 0.0 },
        )
    })
}

fn mlp_init(
    rng: &mut ChaCha8Rng,
    sizes: &[usize],
    complex: bool,
) -> MlpParams {
    let mut layers = Vec::new();
    for win in sizes.windows(2) {
        let (c_in, c_out) = (win[0], win[1]);
        layers.push((
            glorot_uniform(rng, c_out, c_in, complex),
            ComplexTensor::zeros(&[c_out]),
        ));
    }
    MlpParams { layers }
}

fn spectral_gaussian(rng: &mut ChaCha8Rng, shape: &[usize], scale: f64) -> ComplexTensor {
    ComplexTensor::from_fn(shape, |_| {
        let re: f64 = StandardNormal.sample(rng);
        let im: f64 = StandardNormal.sample(rng);
        Complex64::new(re * scale, im * scale)
    })
}

fn skip_init(rng: &mut ChaCha8Rng, kind: SkipKind, channels: usize, complex: bool) -> SkipParams {
    match kind {
        SkipKind::Identity => SkipParams::Identity,
        SkipKind::None => SkipParams::None,
        SkipKind::Linear => SkipParams::Linear(glorot_uniform(rng, channels, channels, complex)),
        SkipKind::SoftGating => SkipParams::SoftGating {
            w: ComplexTensor::from_fn(&[channels], |_| Complex64::new(1.0, 0.0)),
            b: ComplexTensor::zeros(&[channels]),
        },
    }
}

/// Model = config + parameters. Parameters are immutable during
/// forward evaluation; only the optimizer step mutates them.
#[derive(Debug, Clone)]
pub struct FnoModel {
    pub config: FnoConfig,
    pub params: FnoParams,
}

impl FnoModel {
    pub fn init(config: FnoConfig, seed: u64) -> Result<Self> {
        config.validate()?;
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let c = config.hidden_channels;
        let complex = config.complex_data;

        let lifting = mlp_init(
            &mut rng,
            &[config.in_channels, config.lifting_width(), c],
            complex,
        );

        let k_total: usize = config.max_n_modes.iter().product();
        let scale = 1.0 / ((c * k_total) as f64).sqrt();
        let mut blocks = Vec::with_capacity(config.n_layers);
        for _ in 0..config.n_layers {
            let spectral = if config.separable {
                SpectralWeights::Separable(
                    config
                        .max_n_modes
                        .iter()
                        .map(|&k| {
                            let s = 1.0 / ((c * k) as f64).sqrt();
                            spectral_gaussian(&mut rng, &[k, c, c], s)
                        })
                        .collect(),
                )
            } else {
                let mut shape = config.max_n_modes.clone();
                shape.push(c);
                shape.push(c);
                let dense = spectral_gaussian(&mut rng, &shape, scale);
                match config.factorization {
                    Factorization::Dense => SpectralWeights::Dense(dense),
                    Factorization::Tucker => {
                        let ranks = tucker::ranks_from_fraction(&shape, config.rank);
                        let dec = tucker::tucker_decompose(&dense, &ranks, 10, 1e-10)?;
                        SpectralWeights::Tucker {
                            core: dec.core,
                            factors: dec.factors,
                        }
                    }
                }
            };
            blocks.push(BlockParams {
                spectral,
                bias: ComplexTensor::zeros(&[c]),
                mlp: mlp_init(&mut rng, &[c, config.mlp_width(), c], complex),
                fno_skip: skip_init(&mut rng, config.fno_skip, c, complex),
                mlp_skip: skip_init(&mut rng, config.channel_mlp_skip, c, complex),
            });
        }

        let projection = mlp_init(
            &mut rng,
            &[c, config.projection_width(), config.out_channels],
            complex,
        );

        Ok(FnoModel {
            config,
            params: FnoParams {
                lifting,
                blocks,
                projection,
                complex_data: complex,
            },
        })
    }
}

/// Per-component parameter counts in stored real scalars.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ParamCount {
    pub lifting: usize,
    pub projection: usize,
    pub spectral_per_layer: usize,
    /// The eta = 1 figure for real-valued data reported alongside the
    /// stored count: this implementation stores the full complex block
    /// (eta = 2) rather than tying Hermitian-symmetric weights.
    pub spectral_per_layer_effective_eta1: usize,
    pub channel_mlp_per_layer: usize,
    pub fno_skip_per_layer: usize,
    pub channel_mlp_skip_per_layer: usize,
    pub n_layers: usize,
    pub total: usize,
}

/// Three-case channel-MLP parameter count (real scalars, real data):
/// single layer, two layers, and the general L >= 3 form.
pub fn channel_mlp_param_count(
    c_in: usize,
    c_hidden: usize,
    c_out: usize,
    n_layers: usize,
) -> usize {
    match n_layers {
        0 => 0,
        1 => c_out * (c_in + 1),
        2 => c_hidden * (c_in + 1) + c_out * (c_hidden + 1),
        l => {
            c_hidden * (c_in + 1)
                + (l - 2) * c_hidden * (c_hidden + 1)
                + c_out * (c_hidden + 1)
        }
    }
}

/// Closed-form parameter accounting; matches the brute enumeration of
/// stored scalars exactly.
pub fn count_params(config: &FnoConfig) -> ParamCount {
    let c = config.hidden_channels;
    let eta_pointwise = if config.complex_data { 2 } else { 1 };
    let k_total: usize = config.max_n_modes.iter().product();

    let bias = eta_pointwise * c;
    let spectral = if config.separable {
        let k_sum: usize = config.max_n_modes.iter().sum();
        2 * c * c * k_sum + bias
    } else {
        match config.factorization {
            Factorization::Dense => 2 * c * c * k_total + bias,
            Factorization::Tucker => {
                let mut shape = config.max_n_modes.clone();
                shape.push(c);
                shape.push(c);
                let ranks = tucker::ranks_from_fraction(&shape, config.rank);
                let core: usize = ranks.iter().product();
                let factors: usize = shape.iter().zip(&ranks).map(|(&d, &r)| d * r).sum();
                2 * (core + factors) + bias
            }
        }
    };
    let spectral_eta1 = c * c * k_total + c;

    let channel_mlp =
        eta_pointwise * channel_mlp_param_count(c, config.mlp_width(), c, 2);
    let skip_count = |kind: SkipKind| -> usize {
        eta_pointwise
            * match kind {
                SkipKind::Identity | SkipKind::None => 0,
                SkipKind::Linear => c * c,
                SkipKind::SoftGating => 2 * c,
            }
    };
    let fno_skip = skip_count(config.fno_skip);
    let mlp_skip = skip_count(config.channel_mlp_skip);

    let lifting = eta_pointwise
        * channel_mlp_param_count(config.in_channels, config.lifting_width(), c, 2);
    let projection = eta_pointwise
        * channel_mlp_param_count(c, config.projection_width(), config.out_channels, 2);

    let total = lifting
        + projection
        + config.n_layers * (spectral + channel_mlp + fno_skip + mlp_skip);
    ParamCount {
        lifting,
        projection,
        spectral_per_layer: spectral,
        spectral_per_layer_effective_eta1: spectral_eta1,
        channel_mlp_per_layer: channel_mlp,
        fno_skip_per_layer: fno_skip,
        channel_mlp_skip_per_layer: mlp_skip,
        n_layers: config.n_layers,
        total,
    }
}
