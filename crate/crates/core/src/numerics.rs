//! Dense row-major tensors and a seeded splitmix64 generator.
//!
//! Every reduction in this crate walks its operands in ascending index order,
//! so results are bitwise reproducible across runs and platforms.

use crate::error::{Error, Result};

/// Dense n-dimensional array of `f64`, row-major (last axis fastest).
#[derive(Debug, Clone, PartialEq)]
pub struct Tensor {
    shape: Vec<usize>,
    data: Vec<f64>,
}

impl Tensor {
    /// Tensor of the given shape with every element set to `fill`.
    /// An empty shape yields a scalar.
    pub fn new(shape: &[usize], fill: f64) -> Self {
        let len = shape.iter().product();
        Tensor {
            shape: shape.to_vec(),
            data: vec![fill; len],
        }
    }

    pub fn zeros(shape: &[usize]) -> Self {
        Self::new(shape, 0.0)
    }

    pub fn scalar(value: f64) -> Self {
        Self::new(&[], value)
    }

    pub fn from_vec(shape: &[usize], data: Vec<f64>) -> Result<Self> {
        let len: usize = shape.iter().product();
        if len != data.len() {
            return Err(Error::Dimension(format!(
                "shape {shape:?} holds {len} elements but {} were supplied",
                data.len()
            )));
        }
        Ok(Tensor {
            shape: shape.to_vec(),
            data,
        })
    }

    /// Row-major 2-D tensor from nested rows; all rows must share a length.
    pub fn from_rows(rows: &[Vec<f64>]) -> Result<Self> {
        let cols = rows.first().map_or(0, Vec::len);
        if rows.iter().any(|r| r.len() != cols) {
            return Err(Error::Dimension("ragged rows".into()));
        }
        let data = rows.iter().flatten().copied().collect();
        Self::from_vec(&[rows.len(), cols], data)
    }

    pub fn identity(n: usize) -> Self {
        let mut t = Self::zeros(&[n, n]);
        for i in 0..n {
            t.data[i * n + i] = 1.0;
        }
        t
    }

    pub fn shape(&self) -> &[usize] {
        &self.shape
    }

    pub fn rank(&self) -> usize {
        self.shape.len()
    }

    pub fn len(&self) -> usize {
        self.data.len()
    }

    pub fn is_empty(&self) -> bool {
        self.data.is_empty()
    }

    pub fn data(&self) -> &[f64] {
        &self.data
    }

    pub fn data_mut(&mut self) -> &mut [f64] {
        &mut self.data
    }

    pub fn into_data(self) -> Vec<f64> {
        self.data
    }

    pub fn reshape(self, shape: &[usize]) -> Result<Self> {
        Self::from_vec(shape, self.data)
    }

    fn offset(&self, index: &[usize]) -> usize {
        assert_eq!(index.len(), self.shape.len(), "index rank mismatch");
        let mut off = 0;
        for (&i, &extent) in index.iter().zip(&self.shape) {
            assert!(i < extent, "index {index:?} out of bounds for {:?}", self.shape);
            off = off * extent + i;
        }
        off
    }

    /// Element at a multi-index. Panics when out of bounds.
    pub fn at(&self, index: &[usize]) -> f64 {
        self.data[self.offset(index)]
    }

    pub fn set(&mut self, index: &[usize], value: f64) {
        let off = self.offset(index);
        self.data[off] = value;
    }

    /// Number of elements in one slice along the first axis.
    pub fn row_len(&self) -> usize {
        self.shape.iter().skip(1).product()
    }

    /// The `i`-th slice along the first axis, flattened.
    pub fn row(&self, i: usize) -> &[f64] {
        let len = self.row_len();
        &self.data[i * len..(i + 1) * len]
    }

    pub fn row_mut(&mut self, i: usize) -> &mut [f64] {
        let len = self.row_len();
        &mut self.data[i * len..(i + 1) * len]
    }

    pub fn is_finite(&self) -> bool {
        self.data.iter().all(|v| v.is_finite())
    }

    pub fn transpose(&self) -> Result<Tensor> {
        let [m, n] = self.dims2()?;
        let mut out = vec![0.0; m * n];
        for i in 0..m {
            for j in 0..n {
                out[j * m + i] = self.data[i * n + j];
            }
        }
        Tensor::from_vec(&[n, m], out)
    }

    pub(crate) fn dims2(&self) -> Result<[usize; 2]> {
        match self.shape[..] {
            [m, n] => Ok([m, n]),
            _ => Err(Error::Dimension(format!(
                "expected a rank-2 tensor, got shape {:?}",
                self.shape
            ))),
        }
    }

    pub fn matmul(&self, other: &Tensor) -> Result<Tensor> {
        matmul(self, other)
    }
}

/// Matrix product `a · b` of rank-2 tensors, summing in ascending inner index.
pub fn matmul(a: &Tensor, b: &Tensor) -> Result<Tensor> {
    let [m, k] = a.dims2()?;
    let [k2, n] = b.dims2()?;
    if k != k2 {
        return Err(Error::Dimension(format!(
            "matmul inner extents differ: {:?} x {:?}",
            a.shape, b.shape
        )));
    }
    let mut out = vec![0.0; m * n];
    // i-t-j order keeps every c[i,j] accumulating in ascending t.
    for i in 0..m {
        let row = &mut out[i * n..(i + 1) * n];
        for t in 0..k {
            let av = a.data[i * k + t];
            let brow = &b.data[t * n..(t + 1) * n];
            for (c, &bv) in row.iter_mut().zip(brow) {
                *c += av * bv;
            }
        }
    }
    Tensor::from_vec(&[m, n], out)
}

/// splitmix64 pseudo-random generator.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Rng {
    state: u64,
}

const GOLDEN_GAMMA: u64 = 0x9E37_79B9_7F4A_7C15;

fn mix64(mut z: u64) -> u64 {
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

impl Rng {
    pub fn new(seed: u64) -> Self {
        Rng { state: seed }
    }

    /// Generator for an independent sub-stream identified by `path`,
    /// e.g. `(seed, [epoch, sample])`.
    pub fn derive(seed: u64, path: &[u64]) -> Self {
        let mut s = mix64(seed.wrapping_add(GOLDEN_GAMMA));
        for &p in path {
            s = mix64(s ^ mix64(p.wrapping_add(GOLDEN_GAMMA)));
        }
        Rng::new(s)
    }

    pub fn state(&self) -> u64 {
        self.state
    }

    pub fn next_u64(&mut self) -> u64 {
        self.state = self.state.wrapping_add(GOLDEN_GAMMA);
        mix64(self.state)
    }

    /// Uniform in [0, 1) with 53 bits of precision.
    pub fn next_f64(&mut self) -> f64 {
        (self.next_u64() >> 11) as f64 * (1.0 / (1u64 << 53) as f64)
    }

    /// Uniform draw in [lo, hi). A degenerate interval returns `lo`.
    pub fn uniform(&mut self, lo: f64, hi: f64) -> Result<f64> {
        if !(lo <= hi) {
            return Err(Error::Argument(format!("uniform bounds out of order: [{lo}, {hi})")));
        }
        let u = self.next_f64();
        if lo == hi {
            return Ok(lo);
        }
        let v = lo + (hi - lo) * u;
        // rounding can land exactly on `hi`
        Ok(if v < hi { v } else { lo })
    }

    /// Standard normal draw (Box–Muller, one value per two uniforms).
    pub fn normal(&mut self) -> f64 {
        let u1 = 1.0 - self.next_f64();
        let u2 = self.next_f64();
        (-2.0 * u1.ln()).sqrt() * (std::f64::consts::TAU * u2).cos()
    }

    /// Uniform integer in `0..n`. `n` must be positive.
    pub fn below(&mut self, n: usize) -> usize {
        assert!(n > 0, "below(0)");
        ((self.next_u64() as u128 * n as u128) >> 64) as usize
    }

    /// Fisher–Yates shuffle.
    pub fn shuffle<T>(&mut self, items: &mut [T]) {
        for i in (1..items.len()).rev() {
            let j = self.below(i + 1);
            items.swap(i, j);
        }
    }

    pub fn coin(&mut self) -> bool {
        self.next_u64() >> 63 == 1
    }
}

/// Glorot/Xavier uniform initialization: i.i.d. U(-L, L) with
/// L = sqrt(6 / (fan_in + fan_out)).
pub fn glorot_init(rng: &mut Rng, fan_in: usize, fan_out: usize, shape: &[usize]) -> Result<Tensor> {
    if fan_in == 0 || fan_out == 0 {
        return Err(Error::Argument(format!(
            "glorot fans must be positive (fan_in={fan_in}, fan_out={fan_out})"
        )));
    }
    let limit = (6.0 / (fan_in + fan_out) as f64).sqrt();
    let mut t = Tensor::zeros(shape);
    for v in t.data_mut() {
        *v = rng.uniform(-limit, limit)?;
    }
    Ok(t)
}
