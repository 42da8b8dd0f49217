//! GLY1: little-endian dataset container.
//!
//! ```text
//! magic "GLY1" | u32 version | u32 n | u32 height | u32 width | u32 n_classes
//! n_classes × (u16 byte length, UTF-8 name)
//! n × u16 label
//! n·height·width × u8 pixel (0..=255)
//! ```

use std::fs::File;
use std::io::{BufReader, BufWriter, Read, Write};
use std::path::Path;

use super::LabeledDataset;
use crate::error::{Error, Result};
use crate::numerics::Tensor;

pub const GLY_MAGIC: [u8; 4] = *b"GLY1";
pub const GLY_VERSION: u32 = 1;

fn to_u32(v: usize, what: &str) -> Result<u32> {
    u32::try_from(v).map_err(|_| Error::Argument(format!("{what} {v} does not fit in u32")))
}

/// Serialize `ds`; returns the number of bytes written. Intensities are
/// quantized to `round(v * 255)`.
pub fn write_gly<W: Write>(ds: &LabeledDataset, mut sink: W) -> Result<usize> {
    let mut buf = Vec::new();
    buf.extend_from_slice(&GLY_MAGIC);
    buf.extend_from_slice(&GLY_VERSION.to_le_bytes());
    for (v, what) in [
        (ds.len(), "record count"),
        (ds.height(), "height"),
        (ds.width(), "width"),
        (ds.n_classes(), "class count"),
    ] {
        buf.extend_from_slice(&to_u32(v, what)?.to_le_bytes());
    }
    for name in ds.class_names() {
        let len = u16::try_from(name.len())
            .map_err(|_| Error::Argument(format!("class name too long: {name:?}")))?;
        buf.extend_from_slice(&len.to_le_bytes());
        buf.extend_from_slice(name.as_bytes());
    }
    for &l in ds.labels() {
        let l = u16::try_from(l).map_err(|_| Error::Argument(format!("label {l} exceeds u16")))?;
        buf.extend_from_slice(&l.to_le_bytes());
    }
    buf.extend(
        ds.images()
            .data()
            .iter()
            .map(|&v| (v.clamp(0.0, 1.0) * 255.0).round() as u8),
    );
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
            .ok_or_else(|| Error::corrupt(format!("GLY1 file truncated while reading {what}")))?;
        let s = &self.bytes[self.pos..end];
        self.pos = end;
        Ok(s)
    }

    fn u16(&mut self, what: &str) -> Result<u16> {
        Ok(u16::from_le_bytes(self.take(2, what)?.try_into().unwrap()))
    }

    fn u32(&mut self, what: &str) -> Result<usize> {
        Ok(u32::from_le_bytes(self.take(4, what)?.try_into().unwrap()) as usize)
    }
}

pub fn read_gly<R: Read>(mut source: R) -> Result<LabeledDataset> {
    let mut bytes = Vec::new();
    source.read_to_end(&mut bytes)?;
    let mut cur = Cursor {
        bytes: &bytes,
        pos: 0,
    };
    if cur.take(4, "magic")? != GLY_MAGIC {
        return Err(Error::corrupt("bad GLY1 magic"));
    }
    let version = cur.u32("version")?;
    if version != GLY_VERSION as usize {
        return Err(Error::corrupt(format!("unsupported GLY version {version}")));
    }
    let n = cur.u32("record count")?;
    let h = cur.u32("height")?;
    let w = cur.u32("width")?;
    let n_classes = cur.u32("class count")?;
    if n_classes == 0 {
        return Err(Error::corrupt("GLY1 class table is empty"));
    }
    if h == 0 || w == 0 {
        return Err(Error::corrupt(format!("GLY1 image extent {h}x{w}")));
    }
    let mut names = Vec::with_capacity(n_classes.min(1 << 16));
    for _ in 0..n_classes {
        let len = cur.u16("class name length")? as usize;
        let raw = cur.take(len, "class name")?;
        let name = std::str::from_utf8(raw)
            .map_err(|_| Error::corrupt("class name is not UTF-8"))?;
        names.push(name.to_string());
    }
    let mut labels = Vec::with_capacity(n.min(1 << 24));
    for _ in 0..n {
        labels.push(cur.u16("labels")? as usize);
    }
    let count = n
        .checked_mul(h)
        .and_then(|v| v.checked_mul(w))
        .ok_or_else(|| Error::corrupt("GLY1 extents overflow"))?;
    let pixels = cur.take(count, "pixels")?;
    if cur.pos != bytes.len() {
        return Err(Error::corrupt(format!(
            "{} trailing bytes after GLY1 payload",
            bytes.len() - cur.pos
        )));
    }
    let data = pixels.iter().map(|&p| p as f64 / 255.0).collect();
    let images = Tensor::from_vec(&[n, h, w], data)?;
    LabeledDataset::new(images, labels, names).map_err(|e| Error::corrupt(e.to_string()))
}

pub fn write_gly_file(ds: &LabeledDataset, path: &Path) -> Result<usize> {
    write_gly(ds, BufWriter::new(File::create(path)?))
}

pub fn read_gly_file(path: &Path) -> Result<LabeledDataset> {
    read_gly(BufReader::new(File::open(path)?)).map_err(|e| e.with_path(path))
}
