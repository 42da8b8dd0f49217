//! Forward and backward passes of the individual network layers.
//!
//! Activations are single-sample tensors: `[c, h, w]` for spatial layers and
//! `[n]` once flattened.

use crate::error::{Error, Result};
use crate::numerics::{glorot_init, Rng, Tensor};

/// 3×3 same-padded convolution (cross-correlation, zero border).
#[derive(Debug, Clone, PartialEq)]
pub struct Conv2d {
    pub in_ch: usize,
    pub out_ch: usize,
    /// `[out_ch, in_ch, 3, 3]`.
    pub weights: Tensor,
    /// `[out_ch]`.
    pub bias: Tensor,
}

impl Conv2d {
    pub fn new(in_ch: usize, out_ch: usize) -> Self {
        Conv2d {
            in_ch,
            out_ch,
            weights: Tensor::zeros(&[out_ch, in_ch, 3, 3]),
            bias: Tensor::zeros(&[out_ch]),
        }
    }

    pub fn from_params(weights: Tensor, bias: Tensor) -> Result<Self> {
        let &[out_ch, in_ch, 3, 3] = weights.shape() else {
            return Err(Error::Dimension(format!(
                "conv weights must be [out, in, 3, 3], got {:?}",
                weights.shape()
            )));
        };
        if bias.shape() != [out_ch] {
            return Err(Error::Dimension(format!("conv bias must be [{out_ch}]")));
        }
        Ok(Conv2d {
            in_ch,
            out_ch,
            weights,
            bias,
        })
    }

    /// Glorot-uniform weights with fans `in·9` and `out·9`; zero bias.
    pub fn init(&mut self, rng: &mut Rng) -> Result<()> {
        self.weights = glorot_init(rng, self.in_ch * 9, self.out_ch * 9, self.weights.shape())?;
        self.bias = Tensor::zeros(&[self.out_ch]);
        Ok(())
    }

    pub fn param_count(&self) -> usize {
        self.weights.len() + self.bias.len()
    }
}

/// Fully connected layer `y = W x + b`.
#[derive(Debug, Clone, PartialEq)]
pub struct Dense {
    pub inputs: usize,
    pub outputs: usize,
    /// `[outputs, inputs]`.
    pub weights: Tensor,
    /// `[outputs]`.
    pub bias: Tensor,
}

impl Dense {
    pub fn new(inputs: usize, outputs: usize) -> Self {
        Dense {
            inputs,
            outputs,
            weights: Tensor::zeros(&[outputs, inputs]),
            bias: Tensor::zeros(&[outputs]),
        }
    }

    pub fn from_params(weights: Tensor, bias: Tensor) -> Result<Self> {
        let [outputs, inputs] = weights.dims2()?;
        if bias.shape() != [outputs] {
            return Err(Error::Dimension(format!("dense bias must be [{outputs}]")));
        }
        Ok(Dense {
            inputs,
            outputs,
            weights,
            bias,
        })
    }

    pub fn init(&mut self, rng: &mut Rng) -> Result<()> {
        self.weights = glorot_init(rng, self.inputs, self.outputs, self.weights.shape())?;
        self.bias = Tensor::zeros(&[self.outputs]);
        Ok(())
    }

    pub fn param_count(&self) -> usize {
        self.weights.len() + self.bias.len()
    }
}

fn spatial(x: &Tensor) -> Result<(usize, usize, usize)> {
    match *x.shape() {
        [c, h, w] => Ok((c, h, w)),
        _ => Err(Error::Dimension(format!("expected [c, h, w], got {:?}", x.shape()))),
    }
}

/// Patch matrix `[in_ch·9, h·w]`; row `(c·3 + di)·3 + dj` holds
/// `x[c, i+di−1, j+dj−1]` for every output position, zero outside.
fn im2col(x: &[f64], c_in: usize, h: usize, w: usize) -> Vec<f64> {
    let hw = h * w;
    let mut cols = vec![0.0; c_in * 9 * hw];
    for c in 0..c_in {
        let xc = &x[c * hw..(c + 1) * hw];
        for di in 0..3 {
            for dj in 0..3 {
                let row = &mut cols[((c * 3 + di) * 3 + dj) * hw..][..hw];
                let (i0, i1) = (usize::from(di == 0), if di == 2 { h - 1 } else { h });
                let (j0, j1) = (usize::from(dj == 0), if dj == 2 { w - 1 } else { w });
                if i0 >= i1 || j0 >= j1 {
                    continue;
                }
                for i in i0..i1 {
                    let src = (i + di - 1) * w + j0 + dj - 1;
                    row[i * w + j0..i * w + j1].copy_from_slice(&xc[src..src + (j1 - j0)]);
                }
            }
        }
    }
    cols
}

fn col2im_add(cols: &[f64], c_in: usize, h: usize, w: usize, grad_x: &mut [f64]) {
    let hw = h * w;
    for c in 0..c_in {
        let gc = &mut grad_x[c * hw..(c + 1) * hw];
        for di in 0..3 {
            for dj in 0..3 {
                let row = &cols[((c * 3 + di) * 3 + dj) * hw..][..hw];
                let (i0, i1) = (usize::from(di == 0), if di == 2 { h - 1 } else { h });
                let (j0, j1) = (usize::from(dj == 0), if dj == 2 { w - 1 } else { w });
                if i0 >= i1 || j0 >= j1 {
                    continue;
                }
                for i in i0..i1 {
                    let dst = (i + di - 1) * w + j0 + dj - 1;
                    for (g, &v) in gc[dst..dst + (j1 - j0)].iter_mut().zip(&row[i * w + j0..i * w + j1]) {
                        *g += v;
                    }
                }
            }
        }
    }
}

/// `out[o,i,j] = b_o + Σ_{c,di,dj} w[o,c,di,dj] · x[c, i+di−1, j+dj−1]`.
pub fn conv2d_forward(x: &Tensor, layer: &Conv2d) -> Result<Tensor> {
    let (c_in, h, w) = spatial(x)?;
    if c_in != layer.in_ch {
        return Err(Error::Dimension(format!(
            "conv expects {} input channels, got {c_in}",
            layer.in_ch
        )));
    }
    let cols = im2col(x.data(), c_in, h, w);
    Ok(conv_from_cols(&cols, layer, h, w))
}

fn conv_from_cols(cols: &[f64], layer: &Conv2d, h: usize, w: usize) -> Tensor {
    let hw = h * w;
    let taps = layer.in_ch * 9;
    let mut out = vec![0.0; layer.out_ch * hw];
    for o in 0..layer.out_ch {
        let orow = &mut out[o * hw..(o + 1) * hw];
        orow.fill(layer.bias.data()[o]);
        let wrow = &layer.weights.data()[o * taps..(o + 1) * taps];
        for (t, &wv) in wrow.iter().enumerate() {
            let crow = &cols[t * hw..(t + 1) * hw];
            for (acc, &v) in orow.iter_mut().zip(crow) {
                *acc += wv * v;
            }
        }
    }
    Tensor::from_vec(&[layer.out_ch, h, w], out).expect("shape is consistent")
}

/// Gradients `(grad_x, grad_w, grad_b)` of the convolution at input `x`.
pub fn conv2d_backward(x: &Tensor, layer: &Conv2d, grad_out: &Tensor) -> Result<(Tensor, Tensor, Tensor)> {
    let mut gw = vec![0.0; layer.weights.len()];
    let mut gb = vec![0.0; layer.out_ch];
    let gx = conv2d_backward_acc(x, layer, grad_out, true, &mut gw, &mut gb)?;
    Ok((
        gx.expect("input gradient requested"),
        Tensor::from_vec(layer.weights.shape(), gw)?,
        Tensor::from_vec(&[layer.out_ch], gb)?,
    ))
}

/// Adds the weight and bias gradients into `gw`/`gb` and returns the input
/// gradient when `want_grad_x` is set.
pub(crate) fn conv2d_backward_acc(
    x: &Tensor,
    layer: &Conv2d,
    grad_out: &Tensor,
    want_grad_x: bool,
    gw: &mut [f64],
    gb: &mut [f64],
) -> Result<Option<Tensor>> {
    let (c_in, h, w) = spatial(x)?;
    if c_in != layer.in_ch || grad_out.shape() != [layer.out_ch, h, w] {
        return Err(Error::Dimension(format!(
            "conv backward: input {:?}, grad {:?} do not match layer {}->{}",
            x.shape(),
            grad_out.shape(),
            layer.in_ch,
            layer.out_ch
        )));
    }
    let hw = h * w;
    let taps = c_in * 9;
    let cols = im2col(x.data(), c_in, h, w);
    let g = grad_out.data();

    for o in 0..layer.out_ch {
        let go = &g[o * hw..(o + 1) * hw];
        gb[o] += go.iter().sum::<f64>();
        let gw_row = &mut gw[o * taps..(o + 1) * taps];
        for (t, slot) in gw_row.iter_mut().enumerate() {
            let crow = &cols[t * hw..(t + 1) * hw];
            *slot += go.iter().zip(crow).map(|(a, b)| a * b).sum::<f64>();
        }
    }
    if !want_grad_x {
        return Ok(None);
    }
    let mut gcols = vec![0.0; taps * hw];
    for o in 0..layer.out_ch {
        let go = &g[o * hw..(o + 1) * hw];
        let wrow = &layer.weights.data()[o * taps..(o + 1) * taps];
        for (t, &wv) in wrow.iter().enumerate() {
            for (acc, &v) in gcols[t * hw..(t + 1) * hw].iter_mut().zip(go) {
                *acc += wv * v;
            }
        }
    }
    let mut gx = vec![0.0; c_in * hw];
    col2im_add(&gcols, c_in, h, w, &mut gx);
    Ok(Some(Tensor::from_vec(&[c_in, h, w], gx)?))
}

/// Argmax positions recorded by a 2×2 max-pool forward pass.
#[derive(Debug, Clone, PartialEq)]
pub struct PoolMask {
    pub input_shape: Vec<usize>,
    /// Flat input index of the winner for every output element.
    pub argmax: Vec<usize>,
}

/// Non-overlapping 2×2 max pooling; ties go to the first element in
/// row-major order.
pub fn maxpool2x2_forward(x: &Tensor) -> Result<(Tensor, PoolMask)> {
    let (c, h, w) = spatial(x)?;
    if h % 2 != 0 || w % 2 != 0 {
        return Err(Error::Dimension(format!("max-pool needs even extents, got {h}x{w}")));
    }
    let (oh, ow) = (h / 2, w / 2);
    let mut out = Vec::with_capacity(c * oh * ow);
    let mut argmax = Vec::with_capacity(c * oh * ow);
    let data = x.data();
    for ch in 0..c {
        let base = ch * h * w;
        for i in 0..oh {
            for j in 0..ow {
                let top = base + 2 * i * w + 2 * j;
                let mut best = top;
                for idx in [top + 1, top + w, top + w + 1] {
                    if data[idx] > data[best] {
                        best = idx;
                    }
                }
                out.push(data[best]);
                argmax.push(best);
            }
        }
    }
    Ok((
        Tensor::from_vec(&[c, oh, ow], out)?,
        PoolMask {
            input_shape: x.shape().to_vec(),
            argmax,
        },
    ))
}

pub fn maxpool2x2_backward(mask: &PoolMask, grad_out: &Tensor) -> Result<Tensor> {
    if grad_out.len() != mask.argmax.len() {
        return Err(Error::Dimension(format!(
            "pool gradient has {} elements, mask {}",
            grad_out.len(),
            mask.argmax.len()
        )));
    }
    let mut gx = Tensor::zeros(&mask.input_shape);
    for (&idx, &g) in mask.argmax.iter().zip(grad_out.data()) {
        gx.data_mut()[idx] += g;
    }
    Ok(gx)
}

pub fn dense_forward(x: &Tensor, layer: &Dense) -> Result<Tensor> {
    if x.len() != layer.inputs {
        return Err(Error::Dimension(format!(
            "dense layer expects {} inputs, got {} (shape {:?})",
            layer.inputs,
            x.len(),
            x.shape()
        )));
    }
    let xv = x.data();
    let out = (0..layer.outputs)
        .map(|o| {
            let row = &layer.weights.data()[o * layer.inputs..(o + 1) * layer.inputs];
            layer.bias.data()[o] + row.iter().zip(xv).map(|(a, b)| a * b).sum::<f64>()
        })
        .collect();
    Tensor::from_vec(&[layer.outputs], out)
}

/// Gradients `(grad_x, grad_w, grad_b)` of the dense layer at input `x`.
pub fn dense_backward(x: &Tensor, layer: &Dense, grad_out: &Tensor) -> Result<(Tensor, Tensor, Tensor)> {
    let mut gw = vec![0.0; layer.weights.len()];
    let mut gb = vec![0.0; layer.outputs];
    let gx = dense_backward_acc(x, layer, grad_out, &mut gw, &mut gb)?;
    Ok((
        gx,
        Tensor::from_vec(layer.weights.shape(), gw)?,
        Tensor::from_vec(&[layer.outputs], gb)?,
    ))
}

pub(crate) fn dense_backward_acc(
    x: &Tensor,
    layer: &Dense,
    grad_out: &Tensor,
    gw: &mut [f64],
    gb: &mut [f64],
) -> Result<Tensor> {
    if x.len() != layer.inputs || grad_out.len() != layer.outputs {
        return Err(Error::Dimension(format!(
            "dense backward: input {}, grad {} do not match layer {}->{}",
            x.len(),
            grad_out.len(),
            layer.inputs,
            layer.outputs
        )));
    }
    let n_in = layer.inputs;
    let mut gx = vec![0.0; n_in];
    for (o, &g) in grad_out.data().iter().enumerate() {
        gb[o] += g;
        let wrow = &layer.weights.data()[o * n_in..(o + 1) * n_in];
        for ((slot, &xv), (gxv, &wv)) in gw[o * n_in..(o + 1) * n_in]
            .iter_mut()
            .zip(x.data())
            .zip(gx.iter_mut().zip(wrow))
        {
            *slot += g * xv;
            *gxv += wv * g;
        }
    }
    Tensor::from_vec(x.shape(), gx)
}

pub fn relu_forward(x: &Tensor) -> Tensor {
    let mut out = x.clone();
    for v in out.data_mut() {
        *v = v.max(0.0);
    }
    out
}

/// Subgradient 0 at the kink.
pub fn relu_backward(x: &Tensor, grad_out: &Tensor) -> Result<Tensor> {
    if x.shape() != grad_out.shape() {
        return Err(Error::Dimension("relu gradient shape mismatch".into()));
    }
    let mut gx = grad_out.clone();
    for (g, &v) in gx.data_mut().iter_mut().zip(x.data()) {
        if v <= 0.0 {
            *g = 0.0;
        }
    }
    Ok(gx)
}

/// Logistic function, kept strictly inside (0, 1) even where it saturates.
pub fn sigmoid(z: f64) -> f64 {
    let s = if z >= 0.0 {
        1.0 / (1.0 + (-z).exp())
    } else {
        let e = z.exp();
        e / (1.0 + e)
    };
    s.clamp(f64::MIN_POSITIVE, 1.0 - f64::EPSILON / 2.0)
}

pub fn sigmoid_forward(x: &Tensor) -> Tensor {
    let mut out = x.clone();
    for v in out.data_mut() {
        *v = sigmoid(*v);
    }
    out
}

/// Gradient through the sigmoid given its output `y`.
pub fn sigmoid_backward(y: &Tensor, grad_out: &Tensor) -> Result<Tensor> {
    if y.shape() != grad_out.shape() {
        return Err(Error::Dimension("sigmoid gradient shape mismatch".into()));
    }
    let mut gx = grad_out.clone();
    for (g, &s) in gx.data_mut().iter_mut().zip(y.data()) {
        *g *= s * (1.0 - s);
    }
    Ok(gx)
}
