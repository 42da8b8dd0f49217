//! Binary portable graymap (P5, maxval 255) decoding and bilinear resizing.

use crate::error::{Error, Result};

/// 8-bit grayscale image, row-major.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct GrayImage {
    width: usize,
    height: usize,
    pixels: Vec<u8>,
}

impl GrayImage {
    pub fn new(width: usize, height: usize, pixels: Vec<u8>) -> Result<Self> {
        if width == 0 || height == 0 {
            return Err(Error::Argument(format!("image extent {width}x{height} must be positive")));
        }
        if pixels.len() != width * height {
            return Err(Error::Dimension(format!(
                "{width}x{height} image needs {} pixels, got {}",
                width * height,
                pixels.len()
            )));
        }
        Ok(GrayImage {
            width,
            height,
            pixels,
        })
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn pixels(&self) -> &[u8] {
        &self.pixels
    }

    pub fn into_pixels(self) -> Vec<u8> {
        self.pixels
    }

    pub fn get(&self, x: usize, y: usize) -> u8 {
        self.pixels[y * self.width + x]
    }

    /// Encode as binary P5 with maxval 255.
    pub fn to_pgm(&self) -> Vec<u8> {
        let mut out = format!("P5\n{} {}\n255\n", self.width, self.height).into_bytes();
        out.extend_from_slice(&self.pixels);
        out
    }
}

struct HeaderReader<'a> {
    bytes: &'a [u8],
    pos: usize,
}

impl HeaderReader<'_> {
    fn skip_space_and_comments(&mut self) {
        while let Some(&b) = self.bytes.get(self.pos) {
            if b.is_ascii_whitespace() {
                self.pos += 1;
            } else if b == b'#' {
                while let Some(&c) = self.bytes.get(self.pos) {
                    self.pos += 1;
                    if c == b'\n' || c == b'\r' {
                        break;
                    }
                }
            } else {
                break;
            }
        }
    }

    fn number(&mut self, what: &str) -> Result<u32> {
        self.skip_space_and_comments();
        let start = self.pos;
        while self.bytes.get(self.pos).is_some_and(u8::is_ascii_digit) {
            self.pos += 1;
        }
        if start == self.pos {
            return Err(Error::corrupt(format!("missing {what} in PGM header")));
        }
        std::str::from_utf8(&self.bytes[start..self.pos])
            .ok()
            .and_then(|s| s.parse().ok())
            .ok_or_else(|| Error::corrupt(format!("{what} out of range in PGM header")))
    }
}

/// Decode a binary P5 graymap with maxval 255.
pub fn load_pgm(bytes: &[u8]) -> Result<GrayImage> {
    if bytes.len() < 2 || &bytes[..2] != b"P5" {
        let magic = String::from_utf8_lossy(&bytes[..bytes.len().min(2)]).into_owned();
        return Err(Error::UnsupportedFormat(format!(
            "expected binary graymap magic \"P5\", found {magic:?}"
        )));
    }
    let mut reader = HeaderReader { bytes, pos: 2 };
    let width = reader.number("width")? as usize;
    let height = reader.number("height")? as usize;
    let maxval = reader.number("maxval")?;
    if maxval != 255 {
        return Err(Error::UnsupportedDepth(maxval));
    }
    // exactly one whitespace byte separates the header from the raster
    match bytes.get(reader.pos) {
        Some(b) if b.is_ascii_whitespace() => reader.pos += 1,
        _ => return Err(Error::corrupt("PGM header not terminated by whitespace")),
    }
    if width == 0 || height == 0 {
        return Err(Error::corrupt(format!("degenerate PGM extent {width}x{height}")));
    }
    let need = width
        .checked_mul(height)
        .ok_or_else(|| Error::corrupt("PGM extent overflows"))?;
    let raster = &bytes[reader.pos..];
    if raster.len() < need {
        return Err(Error::corrupt(format!(
            "PGM raster truncated: header claims {need} pixels, {} present",
            raster.len()
        )));
    }
    GrayImage::new(width, height, raster[..need].to_vec())
}

/// Center-aligned bilinear resize with edge clamping; results are rounded
/// half-up back to 8 bits.
pub fn resize_bilinear(img: &GrayImage, out_w: usize, out_h: usize) -> Result<GrayImage> {
    if out_w == 0 || out_h == 0 {
        return Err(Error::Argument(format!("resize target {out_w}x{out_h} must be positive")));
    }
    let axis = |dst_len: usize, src_len: usize| -> Vec<(usize, usize, f64)> {
        let scale = src_len as f64 / dst_len as f64;
        let last = (src_len - 1) as f64;
        (0..dst_len)
            .map(|d| {
                let s = ((d as f64 + 0.5) * scale - 0.5).clamp(0.0, last);
                let i0 = s.floor() as usize;
                let i1 = (i0 + 1).min(src_len - 1);
                (i0, i1, s - i0 as f64)
            })
            .collect()
    };
    let xs = axis(out_w, img.width);
    let ys = axis(out_h, img.height);
    let mut out = Vec::with_capacity(out_w * out_h);
    for &(y0, y1, fy) in &ys {
        for &(x0, x1, fx) in &xs {
            let p = |x: usize, y: usize| img.get(x, y) as f64;
            let top = p(x0, y0) * (1.0 - fx) + p(x1, y0) * fx;
            let bottom = p(x0, y1) * (1.0 - fx) + p(x1, y1) * fx;
            let v = top * (1.0 - fy) + bottom * fy;
            out.push((v + 0.5).floor().clamp(0.0, 255.0) as u8);
        }
    }
    GrayImage::new(out_w, out_h, out)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn p5(w: usize, h: usize, px: &[u8]) -> Vec<u8> {
        let mut v = format!("P5 {w} {h} 255\n").into_bytes();
        v.extend_from_slice(px);
        v
    }

    #[test]
    fn decodes_p5() {
        let img = load_pgm(&p5(2, 2, &[0, 64, 128, 255])).unwrap();
        assert_eq!((img.width(), img.height()), (2, 2));
        assert_eq!(img.pixels(), &[0, 64, 128, 255]);
    }

    #[test]
    fn header_comments_are_skipped() {
        let mut bytes = b"P5\n# made by hand\n3 1\n# depth\n255\n".to_vec();
        bytes.extend_from_slice(&[1, 2, 3]);
        assert_eq!(load_pgm(&bytes).unwrap().pixels(), &[1, 2, 3]);
    }

    #[test]
    fn rejects_ascii_graymap() {
        let err = load_pgm(b"P2 2 2 255\n0 1 2 3\n").unwrap_err();
        assert!(matches!(err, Error::UnsupportedFormat(_)), "{err}");
    }

    #[test]
    fn rejects_other_depth() {
        let mut bytes = b"P5 1 1 65535\n".to_vec();
        bytes.extend_from_slice(&[0, 0]);
        assert!(matches!(load_pgm(&bytes), Err(Error::UnsupportedDepth(65535))));
    }

    #[test]
    fn truncated_raster_is_corrupt() {
        let err = load_pgm(&p5(2, 2, &[0, 1, 2])).unwrap_err();
        assert!(matches!(err, Error::Corrupt { .. }), "{err}");
    }

    #[test]
    fn pgm_encode_decode() {
        let img = GrayImage::new(3, 2, vec![9, 8, 7, 6, 5, 4]).unwrap();
        assert_eq!(load_pgm(&img.to_pgm()).unwrap(), img);
    }

    #[test]
    fn resize_identity() {
        let img = GrayImage::new(3, 2, vec![1, 50, 99, 200, 3, 255]).unwrap();
        assert_eq!(resize_bilinear(&img, 3, 2).unwrap(), img);
    }

    #[test]
    fn resize_2x2_to_1x1() {
        let img = GrayImage::new(2, 2, vec![0, 100, 200, 255]).unwrap();
        assert_eq!(resize_bilinear(&img, 1, 1).unwrap().pixels(), &[139]);
    }

    #[test]
    fn resize_constant() {
        let img = GrayImage::new(5, 3, vec![77; 15]).unwrap();
        for (w, h) in [(1, 1), (7, 2), (64, 64), (2, 9)] {
            let r = resize_bilinear(&img, w, h).unwrap();
            assert!(r.pixels().iter().all(|&p| p == 77));
        }
    }

    #[test]
    fn resize_rejects_zero_target() {
        let img = GrayImage::new(1, 1, vec![0]).unwrap();
        assert!(resize_bilinear(&img, 0, 1).is_err());
    }
}
