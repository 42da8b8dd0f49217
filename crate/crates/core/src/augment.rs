//! Geometric augmentation: flips (lossless) and rotation/shift/shear/zoom
//! (lossy), sampled from seeded per-image streams.

use std::fmt;
use std::str::FromStr;

use crate::error::{Error, Result};
use crate::numerics::{Rng, Tensor};

/// Maximal distortions an augmentation regime may apply.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AugmentPolicy {
    pub hflip: bool,
    pub vflip: bool,
    /// Degrees.
    pub rot_max: f64,
    /// Fraction of the width.
    pub wshift_max: f64,
    /// Fraction of the height.
    pub hshift_max: f64,
    /// Shear-angle bound in radians.
    pub shear_max: f64,
    /// Zoom factors are drawn from [1 - zoom_max, 1 + zoom_max].
    pub zoom_max: f64,
}

impl AugmentPolicy {
    pub const fn none() -> Self {
        AugmentPolicy {
            hflip: false,
            vflip: false,
            rot_max: 0.0,
            wshift_max: 0.0,
            hshift_max: 0.0,
            shear_max: 0.0,
            zoom_max: 0.0,
        }
    }

    /// Random horizontal and vertical flips only.
    pub const fn lossless() -> Self {
        AugmentPolicy {
            hflip: true,
            vflip: true,
            ..Self::none()
        }
    }

    /// Rotations up to 40°, shifts, shear and zoom up to 20%; no flips.
    pub const fn lossy() -> Self {
        AugmentPolicy {
            rot_max: 40.0,
            wshift_max: 0.2,
            hshift_max: 0.2,
            shear_max: 0.2,
            zoom_max: 0.2,
            ..Self::none()
        }
    }

    pub fn preset(name: &str) -> Result<Self> {
        match name {
            "none" => Ok(Self::none()),
            "lossless" => Ok(Self::lossless()),
            "lossy" => Ok(Self::lossy()),
            other => Err(Error::Argument(format!(
                "unknown augmentation policy {other:?} (expected none, lossless or lossy)"
            ))),
        }
    }

    /// Name of the matching preset, if any.
    pub fn preset_name(&self) -> Option<&'static str> {
        ["none", "lossless", "lossy"]
            .into_iter()
            .find(|n| Self::preset(n).is_ok_and(|p| p == *self))
    }

    pub fn is_identity(&self) -> bool {
        *self == Self::none()
    }

    pub fn validate(&self) -> Result<()> {
        let maxima = [
            self.rot_max,
            self.wshift_max,
            self.hshift_max,
            self.shear_max,
            self.zoom_max,
        ];
        if maxima.iter().any(|m| !(m.is_finite() && *m >= 0.0)) {
            return Err(Error::Argument(format!("policy maxima must be >= 0: {maxima:?}")));
        }
        if self.rot_max > 180.0 {
            return Err(Error::Argument(format!("rot_max {} exceeds 180", self.rot_max)));
        }
        if self.zoom_max >= 1.0 {
            return Err(Error::Argument(format!("zoom_max {} must be < 1", self.zoom_max)));
        }
        Ok(())
    }
}

impl Default for AugmentPolicy {
    fn default() -> Self {
        Self::none()
    }
}

impl FromStr for AugmentPolicy {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Self::preset(s)
    }
}

impl fmt::Display for AugmentPolicy {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self.preset_name() {
            Some(name) => f.write_str(name),
            None => write!(f, "{self:?}"),
        }
    }
}

/// One sampled distortion.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AffineParams {
    /// Degrees.
    pub theta: f64,
    pub tx: f64,
    pub ty: f64,
    /// Radians.
    pub shear: f64,
    pub zx: f64,
    pub zy: f64,
    pub hflip: bool,
    pub vflip: bool,
}

impl AffineParams {
    pub const fn identity() -> Self {
        AffineParams {
            theta: 0.0,
            tx: 0.0,
            ty: 0.0,
            shear: 0.0,
            zx: 1.0,
            zy: 1.0,
            hflip: false,
            vflip: false,
        }
    }

    pub fn flips(hflip: bool, vflip: bool) -> Self {
        AffineParams {
            hflip,
            vflip,
            ..Self::identity()
        }
    }
}

impl Default for AffineParams {
    fn default() -> Self {
        Self::identity()
    }
}

fn symmetric(rng: &mut Rng, bound: f64) -> f64 {
    rng.uniform(-bound, bound).expect("bound is non-negative")
}

/// Draw parameters for a `w`×`h` image. Draw order is fixed: theta, tx, ty,
/// shear, zx, zy, then the allowed flips.
pub fn sample_affine(policy: &AugmentPolicy, rng: &mut Rng, w: usize, h: usize) -> AffineParams {
    let theta = symmetric(rng, policy.rot_max);
    let tx = symmetric(rng, policy.wshift_max * w as f64);
    let ty = symmetric(rng, policy.hshift_max * h as f64);
    let shear = symmetric(rng, policy.shear_max);
    let zx = 1.0 + symmetric(rng, policy.zoom_max);
    let zy = 1.0 + symmetric(rng, policy.zoom_max);
    let hflip = policy.hflip && rng.coin();
    let vflip = policy.vflip && rng.coin();
    AffineParams {
        // -0.0 + 0.0 keeps the identity exact for zero ranges
        theta: theta + 0.0,
        tx: tx + 0.0,
        ty: ty + 0.0,
        shear: shear + 0.0,
        zx,
        zy,
        hflip,
        vflip,
    }
}

/// Inverse of `Rot(theta) · Shear(s) · Scale(zx, zy)` as a row-major 2×2.
fn inverse_linear(p: &AffineParams) -> Result<[f64; 4]> {
    if !(p.zx > 0.0 && p.zy > 0.0) {
        return Err(Error::Argument(format!(
            "zoom factors must be positive (zx={}, zy={})",
            p.zx, p.zy
        )));
    }
    let (s, c) = p.theta.to_radians().sin_cos();
    let k = p.shear;
    // Rot · [[1, -k], [0, 1]] · diag(zx, zy)
    let m = [c * p.zx, (-c * k - s) * p.zy, s * p.zx, (-s * k + c) * p.zy];
    let det = m[0] * m[3] - m[1] * m[2];
    if det == 0.0 || !det.is_finite() {
        return Err(Error::Argument("affine map is singular".into()));
    }
    Ok([m[3] / det, -m[1] / det, -m[2] / det, m[0] / det])
}

/// Transform one row-major `h`×`w` image into `dst`.
///
/// Each destination pixel d samples the source at `C + M⁻¹(d − C) + t`,
/// mirrored by the flips, where C is the image center. Sampling is bilinear
/// and coordinates outside the image are clamped to the nearest edge.
pub fn apply_affine_into(src: &[f64], h: usize, w: usize, p: &AffineParams, dst: &mut [f64]) -> Result<()> {
    if src.len() != h * w || dst.len() != h * w {
        return Err(Error::Dimension(format!(
            "image buffers must hold {h}x{w} pixels"
        )));
    }
    let inv = inverse_linear(p)?;
    let cx = (w as f64 - 1.0) / 2.0;
    let cy = (h as f64 - 1.0) / 2.0;
    let max_x = (w - 1) as f64;
    let max_y = (h - 1) as f64;
    for y in 0..h {
        for x in 0..w {
            let dx = x as f64 - cx;
            let dy = y as f64 - cy;
            let mut sx = cx + inv[0] * dx + inv[1] * dy + p.tx;
            let mut sy = cy + inv[2] * dx + inv[3] * dy + p.ty;
            if p.hflip {
                sx = max_x - sx;
            }
            if p.vflip {
                sy = max_y - sy;
            }
            dst[y * w + x] = bilinear_clamped(src, h, w, sx, sy);
        }
    }
    Ok(())
}

fn bilinear_clamped(src: &[f64], h: usize, w: usize, x: f64, y: f64) -> f64 {
    let x = x.clamp(0.0, (w - 1) as f64);
    let y = y.clamp(0.0, (h - 1) as f64);
    let x0 = x.floor() as usize;
    let y0 = y.floor() as usize;
    let x1 = (x0 + 1).min(w - 1);
    let y1 = (y0 + 1).min(h - 1);
    let fx = x - x0 as f64;
    let fy = y - y0 as f64;
    let at = |xx: usize, yy: usize| src[yy * w + xx];
    let top = at(x0, y0) * (1.0 - fx) + at(x1, y0) * fx;
    let bottom = at(x0, y1) * (1.0 - fx) + at(x1, y1) * fx;
    (top * (1.0 - fy) + bottom * fy).clamp(0.0, 1.0)
}

/// Transform a single `[h, w]` image.
pub fn apply_affine(img: &Tensor, p: &AffineParams) -> Result<Tensor> {
    let &[h, w] = img.shape() else {
        return Err(Error::Dimension(format!(
            "expected an [h, w] image, got {:?}",
            img.shape()
        )));
    };
    let mut out = Tensor::zeros(&[h, w]);
    apply_affine_into(img.data(), h, w, p, out.data_mut())?;
    Ok(out)
}

/// Augment a batch `[n, h, w]`. Image `i` uses the stream derived from
/// `(seed, counter, i)`, so the result depends only on those three values.
pub fn augment_batch(images: &Tensor, policy: &AugmentPolicy, seed: u64, counter: u64) -> Result<Tensor> {
    let &[n, h, w] = images.shape() else {
        return Err(Error::Dimension(format!(
            "expected an [n, h, w] batch, got {:?}",
            images.shape()
        )));
    };
    if n == 0 {
        return Err(Error::Argument("cannot augment an empty batch".into()));
    }
    policy.validate()?;
    if policy.is_identity() {
        return Ok(images.clone());
    }
    let mut out = Tensor::zeros(images.shape());
    for i in 0..n {
        let mut rng = Rng::derive(seed, &[counter, i as u64]);
        let params = sample_affine(policy, &mut rng, w, h);
        apply_affine_into(images.row(i), h, w, &params, out.row_mut(i))?;
    }
    Ok(out)
}
