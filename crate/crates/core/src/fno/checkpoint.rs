//! Model checkpoint format (FNOM): magic "FNOM", version u16, the
//! config fields in canonical order, then every parameter tensor in
//! declaration order as little-endian f64 (re, im) pairs. A JSON
//! sidecar `<path>.json` mirrors the config and parameter counts.

use std::fs::File;
use std::io::{BufReader, BufWriter, Read, Write};
use std::path::Path;

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::fno::{count_params, Factorization, FnoConfig, FnoModel, NormKind, ParamCount, SkipKind};
use crate::math::Activation;

const MAGIC: &[u8; 4] = b"FNOM";
const VERSION: u16 = 1;

fn write_u16(w: &mut impl Write, v: u16) -> Result<()> {
    w.write_all(&v.to_le_bytes())?;
    Ok(())
}

fn write_u32(w: &mut impl Write, v: u32) -> Result<()> {
    w.write_all(&v.to_le_bytes())?;
    Ok(())
}

fn write_f64(w: &mut impl Write, v: f64) -> Result<()> {
    w.write_all(&v.to_le_bytes())?;
    Ok(())
}

fn read_u16(r: &mut impl Read) -> Result<u16> {
    let mut b = [0u8; 2];
    r.read_exact(&mut b)?;
    Ok(u16::from_le_bytes(b))
}

fn read_u32(r: &mut impl Read) -> Result<u32> {
    let mut b = [0u8; 4];
    r.read_exact(&mut b)?;
    Ok(u32::from_le_bytes(b))
}

fn read_f64(r: &mut impl Read) -> Result<f64> {
    let mut b = [0u8; 8];
    r.read_exact(&mut b)?;
    Ok(f64::from_le_bytes(b))
}

fn write_usize_list(w: &mut impl Write, v: &[usize]) -> Result<()> {
    write_u32(w, v.len() as u32)?;
    for &x in v {
        write_u32(w, x as u32)?;
    }
    Ok(())
}

fn read_usize_list(r: &mut impl Read) -> Result<Vec<usize>> {
    let n = read_u32(r)? as usize;
    if n > 16 {
        return Err(Error::Format(format!("implausible list length {n}")));
    }
    (0..n).map(|_| Ok(read_u32(r)? as usize)).collect()
}

fn write_f64_list(w: &mut impl Write, v: &[f64]) -> Result<()> {
    write_u32(w, v.len() as u32)?;
    for &x in v {
        write_f64(w, x)?;
    }
    Ok(())
}

fn read_f64_list(r: &mut impl Read) -> Result<Vec<f64>> {
    let n = read_u32(r)? as usize;
    if n > 64 {
        return Err(Error::Format(format!("implausible list length {n}")));
    }
    (0..n).map(|_| read_f64(r)).collect()
}

fn skip_code(kind: SkipKind) -> u8 {
    match kind {
        SkipKind::Identity => 0,
        SkipKind::Linear => 1,
        SkipKind::SoftGating => 2,
        SkipKind::None => 3,
    }
}

fn skip_from(code: u8) -> Result<SkipKind> {
    Ok(match code {
        0 => SkipKind::Identity,
        1 => SkipKind::Linear,
        2 => SkipKind::SoftGating,
        3 => SkipKind::None,
        c => return Err(Error::Format(format!("bad skip code {c}"))),
    })
}

fn act_code(a: Activation) -> u8 {
    match a {
        Activation::Gelu => 0,
        Activation::Relu => 1,
        Activation::Tanh => 2,
        Activation::Square => 3,
        Activation::Identity => 4,
    }
}

fn act_from(code: u8) -> Result<Activation> {
    Ok(match code {
        0 => Activation::Gelu,
        1 => Activation::Relu,
        2 => Activation::Tanh,
        3 => Activation::Square,
        4 => Activation::Identity,
        c => return Err(Error::Format(format!("bad activation code {c}"))),
    })
}

fn write_config(w: &mut impl Write, c: &FnoConfig) -> Result<()> {
    write_usize_list(w, &c.n_modes)?;
    write_usize_list(w, &c.max_n_modes)?;
    write_u32(w, c.hidden_channels as u32)?;
    write_u32(w, c.in_channels as u32)?;
    write_u32(w, c.out_channels as u32)?;
    write_u32(w, c.n_layers as u32)?;
    write_f64(w, c.lifting_channel_ratio)?;
    write_f64(w, c.projection_channel_ratio)?;
    write_f64(w, c.channel_mlp_expansion)?;
    w.write_all(&[skip_code(c.fno_skip), skip_code(c.channel_mlp_skip), act_code(c.activation)])?;
    write_f64_list(w, &c.domain_padding)?;
    match &c.resolution_scaling_factor {
        None => {
            w.write_all(&[0])?;
        }
        Some(s) => {
            w.write_all(&[1])?;
            write_f64_list(w, s)?;
        }
    }
    let fact = match c.factorization {
        Factorization::Dense => 0u8,
        Factorization::Tucker => 1u8,
    };
    let norm = match c.norm {
        NormKind::None => 0u8,
        NormKind::InstanceNorm => 1u8,
    };
    w.write_all(&[fact])?;
    write_f64(w, c.rank)?;
    w.write_all(&[c.separable as u8, c.complex_data as u8, norm])?;
    write_f64(w, c.dropout)?;
    Ok(())
}

fn read_config(r: &mut impl Read) -> Result<FnoConfig> {
    let n_modes = read_usize_list(r)?;
    let max_n_modes = read_usize_list(r)?;
    let hidden_channels = read_u32(r)? as usize;
    let in_channels = read_u32(r)? as usize;
    let out_channels = read_u32(r)? as usize;
    let n_layers = read_u32(r)? as usize;
    let lifting_channel_ratio = read_f64(r)?;
    let projection_channel_ratio = read_f64(r)?;
    let channel_mlp_expansion = read_f64(r)?;
    let mut codes = [0u8; 3];
    r.read_exact(&mut codes)?;
    let domain_padding = read_f64_list(r)?;
    let mut flag = [0u8; 1];
    r.read_exact(&mut flag)?;
    let resolution_scaling_factor = if flag[0] == 1 {
        Some(read_f64_list(r)?)
    } else {
        None
    };
    let mut fact = [0u8; 1];
    r.read_exact(&mut fact)?;
    let rank = read_f64(r)?;
    let mut flags = [0u8; 3];
    r.read_exact(&mut flags)?;
    let dropout = read_f64(r)?;
    Ok(FnoConfig {
        n_modes,
        max_n_modes,
        hidden_channels,
        in_channels,
        out_channels,
        n_layers,
        lifting_channel_ratio,
        projection_channel_ratio,
        channel_mlp_expansion,
        fno_skip: skip_from(codes[0])?,
        channel_mlp_skip: skip_from(codes[1])?,
        activation: act_from(codes[2])?,
        domain_padding,
        resolution_scaling_factor,
        factorization: match fact[0] {
            0 => Factorization::Dense,
            1 => Factorization::Tucker,
            c => return Err(Error::Format(format!("bad factorization code {c}"))),
        },
        rank,
        separable: flags[0] != 0,
        complex_data: flags[1] != 0,
        norm: match flags[2] {
            0 => NormKind::None,
            1 => NormKind::InstanceNorm,
            c => return Err(Error::Format(format!("bad norm code {c}"))),
        },
        dropout,
    })
}

#[derive(Serialize, Deserialize)]
struct Sidecar {
    format: String,
    version: u16,
    config: FnoConfig,
    counts: ParamCount,
}

/// Save a checkpoint plus its human-readable JSON sidecar.
pub fn save_checkpoint(model: &FnoModel, path: &Path) -> Result<()> {
    let mut w = BufWriter::new(File::create(path)?);
    w.write_all(MAGIC)?;
    write_u16(&mut w, VERSION)?;
    write_config(&mut w, &model.config)?;
    for (tensor, _) in model.params.visit() {
        for z in tensor.data() {
            write_f64(&mut w, z.re)?;
            write_f64(&mut w, z.im)?;
        }
    }
    w.flush()?;

    let sidecar = Sidecar {
        format: "FNOM".into(),
        version: VERSION,
        config: model.config.clone(),
        counts: count_params(&model.config),
    };
    let json = serde_json::to_string_pretty(&sidecar)
        .map_err(|e| Error::Format(format!("sidecar serialization: {e}")))?;
    std::fs::write(sidecar_path(path), json)?;
    Ok(())
}

pub fn sidecar_path(path: &Path) -> std::path::PathBuf {
    let mut p = path.as_os_str().to_owned();
    p.push(".json");
    std::path::PathBuf::from(p)
}

/// Load a checkpoint written by [`save_checkpoint`]. Rejects files
/// with a wrong magic or version as format errors.
pub fn load_checkpoint(path: &Path) -> Result<FnoModel> {
    let mut r = BufReader::new(File::open(path)?);
    let mut magic = [0u8; 4];
    r.read_exact(&mut magic)?;
    if &magic != MAGIC {
        return Err(Error::Format(format!(
            "{} is not an FNOM checkpoint (bad magic)",
            path.display()
        )));
    }
    let version = read_u16(&mut r)?;
    if version != VERSION {
        return Err(Error::Format(format!("unsupported FNOM version {version}")));
    }
    let config = read_config(&mut r)?;
    config
        .validate()
        .map_err(|e| Error::Format(format!("checkpoint config invalid: {e}")))?;

    // materialize the parameter skeleton, then overwrite every tensor
    let mut model = FnoModel::init(config, 0)
        .map_err(|e| Error::Format(format!("checkpoint config unusable: {e}")))?;
    for (tensor, _) in model.params.visit_mut() {
        for z in tensor.data_mut() {
            let re = read_f64(&mut r)?;
            let im = read_f64(&mut r)?;
            *z = Complex64::new(re, im);
        }
    }
    let mut trailing = [0u8; 1];
    if r.read(&mut trailing)? != 0 {
        return Err(Error::Format("trailing bytes after parameter payload".into()));
    }
    model.params.scrub_real_params();
    Ok(model)
}
