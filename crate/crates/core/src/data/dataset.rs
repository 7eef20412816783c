//! On-disk dataset collections (FNOD): header with grid metadata and
//! per-channel normalization statistics, little-endian payload of
//! input/output field pairs, JSON sidecar mirroring the header.
//! Round trips are bit-exact for the f64 storage path.

use std::fs::File;
use std::io::{BufReader, BufWriter, Read, Write};
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::grid::GridSpec;
use crate::tensor::RealTensor;

const MAGIC: &[u8; 4] = b"FNOD";
const VERSION: u16 = 1;

/// Per-channel standardization statistics, computed on the training
/// split only and applied unchanged everywhere else.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NormStats {
    pub mean: Vec<f64>,
    pub std: Vec<f64>,
}

impl NormStats {
    fn identity(channels: usize) -> Self {
        NormStats {
            mean: vec![0.0; channels],
            std: vec![1.0; channels],
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DatasetHeader {
    pub sample_count: usize,
    /// The first `train_count` samples form the training split.
    pub train_count: usize,
    /// [C_in, N..]
    pub input_shape: Vec<usize>,
    /// [C_out, M..]
    pub output_shape: Vec<usize>,
    pub grid: GridSpec,
    pub input_stats: NormStats,
    pub output_stats: NormStats,
    /// Payload precision flag: f64 by default, f32 when set.
    pub store_f32: bool,
}

#[derive(Debug, Clone, PartialEq)]
pub struct DatasetFile {
    pub header: DatasetHeader,
    pub inputs: Vec<RealTensor>,
    pub outputs: Vec<RealTensor>,
}

fn channel_stats(fields: &[RealTensor], channels: usize) -> NormStats {
    let mut mean = vec![0.0; channels];
    let mut count = vec![0usize; channels];
    for f in fields {
        let per_chan = f.len() / channels;
        for c in 0..channels {
            for v in &f.data()[c * per_chan..(c + 1) * per_chan] {
                mean[c] += v;
                count[c] += 1;
            }
        }
    }
    for c in 0..channels {
        mean[c] /= count[c].max(1) as f64;
    }
    let mut var = vec![0.0; channels];
    for f in fields {
        let per_chan = f.len() / channels;
        for c in 0..channels {
            for v in &f.data()[c * per_chan..(c + 1) * per_chan] {
                var[c] += (v - mean[c]).powi(2);
            }
        }
    }
    let std = var
        .iter()
        .zip(&count)
        .map(|(&v, &n)| (v / n.max(1) as f64).sqrt().max(1e-12))
        .collect();
    NormStats { mean, std }
}

impl DatasetFile {
    /// Bundle samples with their grid; statistics are computed on the
    /// first `train_count` samples.
    pub fn new(
        grid: GridSpec,
        inputs: Vec<RealTensor>,
        outputs: Vec<RealTensor>,
        train_count: usize,
    ) -> Result<Self> {
        if inputs.is_empty() || inputs.len() != outputs.len() {
            return Err(Error::InvalidArg(
                "need matching, non-empty input/output sample lists".into(),
            ));
        }
        if train_count == 0 || train_count > inputs.len() {
            return Err(Error::InvalidArg(format!(
                "train_count {train_count} out of range for {} samples",
                inputs.len()
            )));
        }
        let input_shape = inputs[0].shape().to_vec();
        let output_shape = outputs[0].shape().to_vec();
        for (i, (a, b)) in inputs.iter().zip(&outputs).enumerate() {
            if a.shape() != input_shape.as_slice() || b.shape() != output_shape.as_slice() {
                return Err(Error::ShapeMismatch(format!("sample {i} shape differs")));
            }
        }
        if input_shape[1..] != *grid.resolution() {
            return Err(Error::ShapeMismatch(format!(
                "input spatial shape {:?} vs grid {:?}",
                &input_shape[1..],
                grid.resolution()
            )));
        }
        let input_stats = channel_stats(&inputs[..train_count], input_shape[0]);
        let output_stats = channel_stats(&outputs[..train_count], output_shape[0]);
        Ok(DatasetFile {
            header: DatasetHeader {
                sample_count: inputs.len(),
                train_count,
                input_shape,
                output_shape,
                grid,
                input_stats,
                output_stats,
                store_f32: false,
            },
            inputs,
            outputs,
        })
    }

    pub fn train_range(&self) -> std::ops::Range<usize> {
        0..self.header.train_count
    }

    pub fn test_range(&self) -> std::ops::Range<usize> {
        self.header.train_count..self.header.sample_count
    }

    pub fn is_empty(&self) -> bool {
        self.inputs.is_empty()
    }
}

/// Standardize per channel with the given statistics.
pub fn normalize(field: &RealTensor, stats: &NormStats) -> Result<RealTensor> {
    let channels = stats.mean.len();
    if field.shape()[0] != channels {
        return Err(Error::ShapeMismatch(format!(
            "field has {} channels, stats have {channels}",
            field.shape()[0]
        )));
    }
    let per_chan = field.len() / channels;
    let mut out = field.clone();
    for c in 0..channels {
        for v in &mut out.data_mut()[c * per_chan..(c + 1) * per_chan] {
            *v = (*v - stats.mean[c]) / stats.std[c];
        }
    }
    Ok(out)
}

/// Invert [`normalize`].
pub fn denormalize(field: &RealTensor, stats: &NormStats) -> Result<RealTensor> {
    let channels = stats.mean.len();
    if field.shape()[0] != channels {
        return Err(Error::ShapeMismatch(format!(
            "field has {} channels, stats have {channels}",
            field.shape()[0]
        )));
    }
    let per_chan = field.len() / channels;
    let mut out = field.clone();
    for c in 0..channels {
        for v in &mut out.data_mut()[c * per_chan..(c + 1) * per_chan] {
            *v = *v * stats.std[c] + stats.mean[c];
        }
    }
    Ok(out)
}

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

fn write_shape(w: &mut impl Write, shape: &[usize]) -> Result<()> {
    write_u32(w, shape.len() as u32)?;
    for &s in shape {
        write_u32(w, s as u32)?;
    }
    Ok(())
}

fn read_shape(r: &mut impl Read) -> Result<Vec<usize>> {
    let n = read_u32(r)? as usize;
    if n == 0 || n > 8 {
        return Err(Error::Format(format!("implausible shape rank {n}")));
    }
    (0..n).map(|_| Ok(read_u32(r)? as usize)).collect()
}

fn write_stats(w: &mut impl Write, s: &NormStats) -> Result<()> {
    write_u32(w, s.mean.len() as u32)?;
    for (&m, &sd) in s.mean.iter().zip(&s.std) {
        write_f64(w, m)?;
        write_f64(w, sd)?;
    }
    Ok(())
}

fn read_stats(r: &mut impl Read) -> Result<NormStats> {
    let n = read_u32(r)? as usize;
    if n > 1024 {
        return Err(Error::Format(format!("implausible channel count {n}")));
    }
    let mut mean = Vec::with_capacity(n);
    let mut std = Vec::with_capacity(n);
    for _ in 0..n {
        mean.push(read_f64(r)?);
        std.push(read_f64(r)?);
    }
    Ok(NormStats { mean, std })
}

pub fn sidecar_path(path: &Path) -> std::path::PathBuf {
    let mut p = path.as_os_str().to_owned();
    p.push(".json");
    std::path::PathBuf::from(p)
}

pub fn write_dataset(ds: &DatasetFile, path: &Path) -> Result<()> {
    let h = &ds.header;
    let mut w = BufWriter::new(File::create(path)?);
    w.write_all(MAGIC)?;
    write_u16(&mut w, VERSION)?;
    w.write_all(&[h.store_f32 as u8])?;
    write_u32(&mut w, h.sample_count as u32)?;
    write_u32(&mut w, h.train_count as u32)?;
    write_shape(&mut w, &h.input_shape)?;
    write_shape(&mut w, &h.output_shape)?;
    write_u32(&mut w, h.grid.ndim() as u32)?;
    for ax in 0..h.grid.ndim() {
        write_u32(&mut w, h.grid.resolution()[ax] as u32)?;
        write_f64(&mut w, h.grid.domain_length()[ax])?;
        w.write_all(&[h.grid.periodic()[ax] as u8])?;
    }
    write_stats(&mut w, &h.input_stats)?;
    write_stats(&mut w, &h.output_stats)?;
    for (input, output) in ds.inputs.iter().zip(&ds.outputs) {
        for &v in input.data().iter().chain(output.data()) {
            if h.store_f32 {
                w.write_all(&(v as f32).to_le_bytes())?;
            } else {
                write_f64(&mut w, v)?;
            }
        }
    }
    w.flush()?;

    let json = serde_json::to_string_pretty(h)
        .map_err(|e| Error::Format(format!("sidecar serialization: {e}")))?;
    std::fs::write(sidecar_path(path), json)?;
    Ok(())
}

pub fn read_dataset(path: &Path) -> Result<DatasetFile> {
    let mut r = BufReader::new(File::open(path)?);
    let mut magic = [0u8; 4];
    r.read_exact(&mut magic)?;
    if &magic != MAGIC {
        return Err(Error::Format(format!(
            "{} is not an FNOD dataset (bad magic)",
            path.display()
        )));
    }
    let version = read_u16(&mut r)?;
    if version != VERSION {
        return Err(Error::Format(format!("unsupported FNOD version {version}")));
    }
    let mut dtype = [0u8; 1];
    r.read_exact(&mut dtype)?;
    let store_f32 = dtype[0] != 0;
    let sample_count = read_u32(&mut r)? as usize;
    let train_count = read_u32(&mut r)? as usize;
    let input_shape = read_shape(&mut r)?;
    let output_shape = read_shape(&mut r)?;
    let ndim = read_u32(&mut r)? as usize;
    if ndim == 0 || ndim > 4 {
        return Err(Error::Format(format!("implausible grid rank {ndim}")));
    }
    let mut resolution = Vec::with_capacity(ndim);
    let mut lengths = Vec::with_capacity(ndim);
    let mut periodic = Vec::with_capacity(ndim);
    for _ in 0..ndim {
        resolution.push(read_u32(&mut r)? as usize);
        lengths.push(read_f64(&mut r)?);
        let mut p = [0u8; 1];
        r.read_exact(&mut p)?;
        periodic.push(p[0] != 0);
    }
    let grid = GridSpec::new(resolution, lengths, periodic)
        .map_err(|e| Error::Format(format!("bad grid metadata: {e}")))?;
    let input_stats = read_stats(&mut r)?;
    let output_stats = read_stats(&mut r)?;

    if sample_count == 0 || train_count == 0 || train_count > sample_count {
        return Err(Error::Format(format!(
            "inconsistent counts: {sample_count} samples, {train_count} train"
        )));
    }
    let in_len: usize = input_shape.iter().product();
    let out_len: usize = output_shape.iter().product();
    let mut read_field = |len: usize, shape: &[usize]| -> Result<RealTensor> {
        let mut data = Vec::with_capacity(len);
        for _ in 0..len {
            if store_f32 {
                let mut b = [0u8; 4];
                r.read_exact(&mut b).map_err(|_| {
                    Error::Format("payload shorter than the header promises".into())
                })?;
                data.push(f32::from_le_bytes(b) as f64);
            } else {
                let mut b = [0u8; 8];
                r.read_exact(&mut b).map_err(|_| {
                    Error::Format("payload shorter than the header promises".into())
                })?;
                data.push(f64::from_le_bytes(b));
            }
        }
        RealTensor::from_data(shape, data)
    };
    let mut inputs = Vec::with_capacity(sample_count);
    let mut outputs = Vec::with_capacity(sample_count);
    for _ in 0..sample_count {
        inputs.push(read_field(in_len, &input_shape)?);
        outputs.push(read_field(out_len, &output_shape)?);
    }
    let mut trailing = [0u8; 1];
    if r.read(&mut trailing)? != 0 {
        return Err(Error::Format(
            "payload longer than the header promises".into(),
        ));
    }
    Ok(DatasetFile {
        header: DatasetHeader {
            sample_count,
            train_count,
            input_shape,
            output_shape,
            grid,
            input_stats,
            output_stats,
            store_f32,
        },
        inputs,
        outputs,
    })
}

/// Normalization statistics that leave fields unchanged.
pub fn identity_stats(channels: usize) -> NormStats {
    NormStats::identity(channels)
}
