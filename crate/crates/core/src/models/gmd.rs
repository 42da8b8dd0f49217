//! GMD1: little-endian model container.
//!
//! ```text
//! magic "GMD1" | u32 version | u8 model kind (0 = MLR, 1 = CNN) | u32 layer count
//! per layer: u8 kind tag | u32 rank | rank × u32 extent | f64 payload
//! u64 total parameter count
//! ```
//!
//! Trainable layers carry the weight tensor's shape and a payload of the
//! weights followed by the bias. Parameterless layers have rank 0 and no
//! payload. A logistic regression is a single dense layer `[C, D]`; class
//! names are not stored, so loaded models are labeled `"0"`, `"1"`, ….

use std::fs::File;
use std::io::{BufReader, BufWriter, Read, Write};
use std::path::Path;

use super::cnn::{CnnModel, Layer};
use super::layers::{Conv2d, Dense};
use super::mlr::MlrModel;
use crate::error::{Error, Result};
use crate::numerics::Tensor;

pub const GMD_MAGIC: [u8; 4] = *b"GMD1";
pub const GMD_VERSION: u32 = 1;

const KIND_MLR: u8 = 0;
const KIND_CNN: u8 = 1;

const TAG_CONV: u8 = 0;
const TAG_MAXPOOL: u8 = 1;
const TAG_RELU: u8 = 2;
const TAG_FLATTEN: u8 = 3;
const TAG_DENSE: u8 = 4;
const TAG_SIGMOID: u8 = 5;

/// Either trained classifier.
#[derive(Debug, Clone, PartialEq)]
pub enum Model {
    Mlr(MlrModel),
    Cnn(CnnModel),
}

impl Model {
    pub fn n_classes(&self) -> usize {
        match self {
            Model::Mlr(m) => m.n_classes(),
            Model::Cnn(_) => 2,
        }
    }

    pub fn param_count(&self) -> usize {
        match self {
            Model::Mlr(m) => m.param_count(),
            Model::Cnn(m) => m.param_count(),
        }
    }

    /// `[n, C]` class probabilities for `[n, h, w]` images; the binary
    /// network yields `[1 − p, p]`.
    pub fn class_probabilities(&self, images: &Tensor) -> Result<Tensor> {
        match self {
            Model::Mlr(m) => m.predict_proba(images),
            Model::Cnn(m) => {
                let p = m.predict_proba(images)?;
                let n = p.len();
                Tensor::from_vec(&[n, 2], p.into_iter().flat_map(|v| [1.0 - v, v]).collect())
            }
        }
    }
}

fn to_u32(v: usize) -> Result<u32> {
    u32::try_from(v).map_err(|_| Error::Argument(format!("extent {v} does not fit in u32")))
}

fn put_layer(buf: &mut Vec<u8>, tag: u8, params: Option<(&Tensor, &Tensor)>) -> Result<()> {
    buf.push(tag);
    match params {
        None => buf.extend_from_slice(&0u32.to_le_bytes()),
        Some((w, b)) => {
            buf.extend_from_slice(&to_u32(w.rank())?.to_le_bytes());
            for &e in w.shape() {
                buf.extend_from_slice(&to_u32(e)?.to_le_bytes());
            }
            for v in w.data().iter().chain(b.data()) {
                buf.extend_from_slice(&v.to_le_bytes());
            }
        }
    }
    Ok(())
}

/// Serialize `model`; returns the number of bytes written.
pub fn write_gmd<W: Write>(model: &Model, mut sink: W) -> Result<usize> {
    let mut buf = Vec::new();
    buf.extend_from_slice(&GMD_MAGIC);
    buf.extend_from_slice(&GMD_VERSION.to_le_bytes());
    match model {
        Model::Mlr(m) => {
            buf.push(KIND_MLR);
            buf.extend_from_slice(&1u32.to_le_bytes());
            put_layer(&mut buf, TAG_DENSE, Some((&m.w, &m.b)))?;
        }
        Model::Cnn(m) => {
            buf.push(KIND_CNN);
            buf.extend_from_slice(&to_u32(m.layers().len())?.to_le_bytes());
            for layer in m.layers() {
                match layer {
                    Layer::Conv2d(c) => put_layer(&mut buf, TAG_CONV, Some((&c.weights, &c.bias)))?,
                    Layer::Dense(d) => put_layer(&mut buf, TAG_DENSE, Some((&d.weights, &d.bias)))?,
                    Layer::MaxPool2x2 => put_layer(&mut buf, TAG_MAXPOOL, None)?,
                    Layer::Relu => put_layer(&mut buf, TAG_RELU, None)?,
                    Layer::Flatten => put_layer(&mut buf, TAG_FLATTEN, None)?,
                    Layer::Sigmoid => put_layer(&mut buf, TAG_SIGMOID, None)?,
                }
            }
        }
    }
    buf.extend_from_slice(&(model.param_count() as u64).to_le_bytes());
    sink.write_all(&buf)?;
    sink.flush()?;
    Ok(buf.len())
}

struct Cursor<'a> {
    bytes: &'a [u8],
    pos: usize,
}

impl<'a> Cursor<'a> {
    fn take(&mut self, n: usize, what: &str) -> Result<&'a [u8]> {
        let end = self
            .pos
            .checked_add(n)
            .filter(|&e| e <= self.bytes.len())
            .ok_or_else(|| Error::corrupt(format!("GMD1 file truncated while reading {what}")))?;
        let s = &self.bytes[self.pos..end];
        self.pos = end;
        Ok(s)
    }

    fn u8(&mut self, what: &str) -> Result<u8> {
        Ok(self.take(1, what)?[0])
    }

    fn u32(&mut self, what: &str) -> Result<usize> {
        Ok(u32::from_le_bytes(self.take(4, what)?.try_into().unwrap()) as usize)
    }

    fn u64(&mut self, what: &str) -> Result<u64> {
        Ok(u64::from_le_bytes(self.take(8, what)?.try_into().unwrap()))
    }

    fn f64s(&mut self, n: usize, what: &str) -> Result<Vec<f64>> {
        let len = n.checked_mul(8).ok_or_else(|| Error::corrupt("GMD1 payload overflows"))?;
        Ok(self
            .take(len, what)?
            .chunks_exact(8)
            .map(|c| f64::from_le_bytes(c.try_into().unwrap()))
            .collect())
    }
}

// (weights, bias) of a trainable layer; bias length is the leading extent
fn get_params(cur: &mut Cursor, rank: usize) -> Result<(Tensor, Tensor)> {
    let mut shape = Vec::with_capacity(rank.min(8));
    for _ in 0..rank {
        shape.push(cur.u32("layer extent")?);
    }
    let count = shape
        .iter()
        .try_fold(1usize, |acc, &e| acc.checked_mul(e))
        .ok_or_else(|| Error::corrupt("GMD1 layer extents overflow"))?;
    let outputs = *shape.first().ok_or_else(|| Error::corrupt("trainable layer with rank 0"))?;
    let weights = Tensor::from_vec(&shape, cur.f64s(count, "weights")?)?;
    let bias = Tensor::from_vec(&[outputs], cur.f64s(outputs, "bias")?)?;
    Ok((weights, bias))
}

fn corrupt(e: Error) -> Error {
    match e {
        Error::Corrupt { .. } => e,
        other => Error::corrupt(other.to_string()),
    }
}

pub fn read_gmd<R: Read>(mut source: R) -> Result<Model> {
    let mut bytes = Vec::new();
    source.read_to_end(&mut bytes)?;
    let mut cur = Cursor {
        bytes: &bytes,
        pos: 0,
    };
    if cur.take(4, "magic")? != GMD_MAGIC {
        return Err(Error::corrupt("bad GMD1 magic"));
    }
    let version = cur.u32("version")?;
    if version != GMD_VERSION as usize {
        return Err(Error::corrupt(format!("unsupported GMD version {version}")));
    }
    let kind = cur.u8("model kind")?;
    let n_layers = cur.u32("layer count")?;

    let model = match kind {
        KIND_MLR => {
            if n_layers != 1 {
                return Err(Error::corrupt(format!("logistic model with {n_layers} layers")));
            }
            let tag = cur.u8("layer tag")?;
            let rank = cur.u32("layer rank")?;
            if tag != TAG_DENSE || rank != 2 {
                return Err(Error::corrupt("logistic model must be one rank-2 dense layer"));
            }
            let (w, b) = get_params(&mut cur, rank)?;
            let names = (0..w.shape()[0]).map(|c| c.to_string()).collect();
            Model::Mlr(MlrModel::from_params(w, b, names).map_err(corrupt)?)
        }
        KIND_CNN => {
            let mut layers = Vec::with_capacity(n_layers.min(1024));
            for _ in 0..n_layers {
                let tag = cur.u8("layer tag")?;
                let rank = cur.u32("layer rank")?;
                let layer = match tag {
                    TAG_CONV => {
                        let (w, b) = get_params(&mut cur, rank)?;
                        Layer::Conv2d(Conv2d::from_params(w, b).map_err(corrupt)?)
                    }
                    TAG_DENSE => {
                        let (w, b) = get_params(&mut cur, rank)?;
                        Layer::Dense(Dense::from_params(w, b).map_err(corrupt)?)
                    }
                    TAG_MAXPOOL | TAG_RELU | TAG_FLATTEN | TAG_SIGMOID if rank == 0 => match tag {
                        TAG_MAXPOOL => Layer::MaxPool2x2,
                        TAG_RELU => Layer::Relu,
                        TAG_FLATTEN => Layer::Flatten,
                        _ => Layer::Sigmoid,
                    },
                    TAG_MAXPOOL | TAG_RELU | TAG_FLATTEN | TAG_SIGMOID => {
                        return Err(Error::corrupt(format!("parameterless layer {tag} has rank {rank}")));
                    }
                    other => return Err(Error::corrupt(format!("unknown layer tag {other}"))),
                };
                layers.push(layer);
            }
            Model::Cnn(CnnModel::new(layers))
        }
        other => return Err(Error::corrupt(format!("unknown model kind {other}"))),
    };

    let stored = cur.u64("parameter count")?;
    if stored != model.param_count() as u64 {
        return Err(Error::corrupt(format!(
            "parameter count {stored} does not match payload ({})",
            model.param_count()
        )));
    }
    if cur.pos != bytes.len() {
        return Err(Error::corrupt(format!(
            "{} trailing bytes after GMD1 payload",
            bytes.len() - cur.pos
        )));
    }
    Ok(model)
}

pub fn write_gmd_file(model: &Model, path: &Path) -> Result<usize> {
    write_gmd(model, BufWriter::new(File::create(path)?))
}

pub fn read_gmd_file(path: &Path) -> Result<Model> {
    read_gmd(BufReader::new(File::open(path)?)).map_err(|e| e.with_path(path))
}
