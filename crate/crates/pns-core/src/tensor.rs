//! Minimal dense tensor type and the numeric primitives every block is
//! built from.
//!
//! Tensors are row-major, rank 1 to 5, and immutable from the caller's
//! perspective: every operation is a pure function returning a fresh
//! tensor. Parallel sections only ever split work across independent
//! output elements, so results are bitwise identical at any thread count.

use std::fmt;

use rand::Rng;

use crate::error::{Error, Result};

pub(crate) const MAX_RANK: usize = 5;

/// Element type tag used by the on-disk tensor format.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum DType {
    F32,
    F64,
}

impl DType {
    pub fn code(self) -> u8 {
        match self {
            DType::F32 => 0,
            DType::F64 => 1,
        }
    }

    pub fn from_code(code: u8) -> Option<DType> {
        match code {
            0 => Some(DType::F32),
            1 => Some(DType::F64),
            _ => None,
        }
    }

    pub fn size_bytes(self) -> usize {
        match self {
            DType::F32 => 4,
            DType::F64 => 8,
        }
    }
}

impl fmt::Display for DType {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            DType::F32 => write!(f, "f32"),
            DType::F64 => write!(f, "f64"),
        }
    }
}

/// Scalar element of a [`Tensor`]. Implemented for `f32` and `f64`.
pub trait Element:
    num_traits::Float + fmt::Debug + fmt::Display + Default + Send + Sync + 'static
{
    const DTYPE: DType;

    fn from_f64(v: f64) -> Self;
    fn to_f64(self) -> f64;
    fn write_le(self, out: &mut Vec<u8>);
    fn read_le(bytes: &[u8]) -> Self;
}

impl Element for f32 {
    const DTYPE: DType = DType::F32;

    fn from_f64(v: f64) -> Self {
        v as f32
    }

    fn to_f64(self) -> f64 {
        self as f64
    }

    fn write_le(self, out: &mut Vec<u8>) {
        out.extend_from_slice(&self.to_le_bytes());
    }

    fn read_le(bytes: &[u8]) -> Self {
        f32::from_le_bytes(bytes.try_into().expect("f32 needs 4 bytes"))
    }
}

impl Element for f64 {
    const DTYPE: DType = DType::F64;

    fn from_f64(v: f64) -> Self {
        v
    }

    fn to_f64(self) -> f64 {
        self
    }

    fn write_le(self, out: &mut Vec<u8>) {
        out.extend_from_slice(&self.to_le_bytes());
    }

    fn read_le(bytes: &[u8]) -> Self {
        f64::from_le_bytes(bytes.try_into().expect("f64 needs 8 bytes"))
    }
}

/// Dense n-dimensional array, row-major, outermost extent first.
#[derive(Debug, Clone, PartialEq)]
pub struct Tensor<T> {
    shape: Vec<usize>,
    data: Vec<T>,
}

impl<T: Element> Tensor<T> {
    /// Builds a tensor from a shape and a flat row-major buffer.
    pub fn new(shape: Vec<usize>, data: Vec<T>) -> Result<Self> {
        validate_shape(&shape)?;
        let expected: usize = shape.iter().product();
        if expected != data.len() {
            return Err(Error::InvalidArgument(format!(
                "shape {:?} wants {} elements, buffer holds {}",
                shape,
                expected,
                data.len()
            )));
        }
        Ok(Tensor { shape, data })
    }

    /// All-zero tensor. Panics on an invalid shape; internal call sites
    /// always pass validated shapes.
    pub fn zeros(shape: &[usize]) -> Self {
        validate_shape(shape).expect("invalid tensor shape");
        let len = shape.iter().product();
        Tensor {
            shape: shape.to_vec(),
            data: vec![T::zero(); len],
        }
    }

    pub fn from_fn(shape: &[usize], mut f: impl FnMut(usize) -> T) -> Self {
        validate_shape(shape).expect("invalid tensor shape");
        let len = shape.iter().product();
        Tensor {
            shape: shape.to_vec(),
            data: (0..len).map(|i| f(i)).collect(),
        }
    }

    /// Uniform samples in `lo..hi`, consumed from `rng` in index order.
    pub fn random_uniform(shape: &[usize], lo: f64, hi: f64, rng: &mut impl Rng) -> Self {
        Self::from_fn(shape, |_| T::from_f64(rng.random_range(lo..hi)))
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

    pub fn data(&self) -> &[T] {
        &self.data
    }

    pub fn data_mut(&mut self) -> &mut [T] {
        &mut self.data
    }

    pub fn into_data(self) -> Vec<T> {
        self.data
    }

    /// Row-major offset of a full index.
    pub fn offset(&self, idx: &[usize]) -> usize {
        debug_assert_eq!(idx.len(), self.shape.len());
        let mut off = 0;
        for (i, &x) in idx.iter().enumerate() {
            debug_assert!(x < self.shape[i], "index {:?} out of shape {:?}", idx, self.shape);
            off = off * self.shape[i] + x;
        }
        off
    }

    pub fn at(&self, idx: &[usize]) -> T {
        self.data[self.offset(idx)]
    }

    pub fn set(&mut self, idx: &[usize], v: T) {
        let off = self.offset(idx);
        self.data[off] = v;
    }

    /// Same data reinterpreted under a new shape of equal element count.
    pub fn reshaped(&self, shape: &[usize]) -> Result<Self> {
        validate_shape(shape)?;
        let expected: usize = shape.iter().product();
        if expected != self.data.len() {
            return Err(Error::dim("reshape", &self.shape, shape));
        }
        Ok(Tensor {
            shape: shape.to_vec(),
            data: self.data.clone(),
        })
    }

    /// Element-by-element cast to another precision.
    pub fn cast<U: Element>(&self) -> Tensor<U> {
        Tensor {
            shape: self.shape.clone(),
            data: self.data.iter().map(|&v| U::from_f64(v.to_f64())).collect(),
        }
    }

    pub fn map(&self, f: impl Fn(T) -> T) -> Self {
        Tensor {
            shape: self.shape.clone(),
            data: self.data.iter().map(|&v| f(v)).collect(),
        }
    }

    /// Accumulates `other` into `self` elementwise.
    pub fn add_assign(&mut self, other: &Tensor<T>) -> Result<()> {
        if self.shape != other.shape {
            return Err(Error::dim("add_assign", &self.shape, &other.shape));
        }
        for (a, b) in self.data.iter_mut().zip(other.data.iter()) {
            *a = *a + *b;
        }
        Ok(())
    }
}

fn validate_shape(shape: &[usize]) -> Result<()> {
    if shape.is_empty() || shape.len() > MAX_RANK {
        return Err(Error::InvalidArgument(format!(
            "tensor rank must be 1..={MAX_RANK}, got shape {shape:?}"
        )));
    }
    if shape.iter().any(|&e| e == 0) {
        return Err(Error::InvalidArgument(format!(
            "tensor extents must be >= 1, got shape {shape:?}"
        )));
    }
    Ok(())
}

/// Dense boolean matrix used for softmax masks and sample-validity flags.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct BoolMat {
    rows: usize,
    cols: usize,
    data: Vec<bool>,
}

impl BoolMat {
    pub fn new_filled(rows: usize, cols: usize, value: bool) -> Self {
        BoolMat {
            rows,
            cols,
            data: vec![value; rows * cols],
        }
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn get(&self, r: usize, c: usize) -> bool {
        self.data[r * self.cols + c]
    }

    pub fn set(&mut self, r: usize, c: usize, v: bool) {
        self.data[r * self.cols + c] = v;
    }

    pub fn row(&self, r: usize) -> &[bool] {
        &self.data[r * self.cols..(r + 1) * self.cols]
    }

    pub fn data(&self) -> &[bool] {
        &self.data
    }
}

/// Weights of a per-position linear map: `weight` is `[C_in, C_out]`,
/// `bias` is `[C_out]`. A 1x1x1 convolution over a feature map is exactly
/// this map applied at every position.
#[derive(Debug, Clone, PartialEq)]
pub struct LinearWeights<T> {
    pub weight: Tensor<T>,
    pub bias: Tensor<T>,
}

impl<T: Element> LinearWeights<T> {
    pub fn new(weight: Tensor<T>, bias: Tensor<T>) -> Result<Self> {
        if weight.rank() != 2 {
            return Err(Error::InvalidArgument(format!(
                "linear weight must be rank 2, got shape {:?}",
                weight.shape()
            )));
        }
        if bias.rank() != 1 || bias.shape()[0] != weight.shape()[1] {
            return Err(Error::dim("linear bias", bias.shape(), &[weight.shape()[1]]));
        }
        Ok(LinearWeights { weight, bias })
    }

    pub fn zeros(c_in: usize, c_out: usize) -> Self {
        LinearWeights {
            weight: Tensor::zeros(&[c_in, c_out]),
            bias: Tensor::zeros(&[c_out]),
        }
    }

    /// Fan-in uniform init in `±1/sqrt(c_in)`; bias starts at zero.
    pub fn fan_in_uniform(c_in: usize, c_out: usize, rng: &mut impl Rng) -> Self {
        let scale = 1.0 / (c_in as f64).sqrt();
        LinearWeights {
            weight: Tensor::random_uniform(&[c_in, c_out], -scale, scale, rng),
            bias: Tensor::zeros(&[c_out]),
        }
    }

    pub fn c_in(&self) -> usize {
        self.weight.shape()[0]
    }

    pub fn c_out(&self) -> usize {
        self.weight.shape()[1]
    }
}

/// Applies a linear map to the channel (last) axis of a `[T,H,W,C_in]`
/// feature map: `out[t,h,w,:] = x[t,h,w,:] . weight + bias`.
pub fn linear_embed<T: Element>(x: &Tensor<T>, w: &LinearWeights<T>) -> Result<Tensor<T>> {
    if x.rank() != 4 {
        return Err(Error::InvalidArgument(format!(
            "linear_embed expects a rank-4 input, got shape {:?}",
            x.shape()
        )));
    }
    let c_in = x.shape()[3];
    if c_in != w.c_in() {
        return Err(Error::dim("linear_embed", x.shape(), w.weight.shape()));
    }
    let rows = x.len() / c_in;
    let c_out = w.c_out();
    let mut out_shape = x.shape().to_vec();
    out_shape[3] = c_out;
    let mut out = Tensor::zeros(&out_shape);
    matmul_bias(
        x.data(),
        rows,
        c_in,
        w.weight.data(),
        c_out,
        w.bias.data(),
        out.data_mut(),
    );
    Ok(out)
}

/// `out[r,:] = x[r,:] . weight + bias` over flat row-major buffers.
/// Rows are independent, so the row loop may be parallelized.
pub(crate) fn matmul_bias<T: Element>(
    x: &[T],
    rows: usize,
    c_in: usize,
    weight: &[T],
    c_out: usize,
    bias: &[T],
    out: &mut [T],
) {
    debug_assert_eq!(x.len(), rows * c_in);
    debug_assert_eq!(out.len(), rows * c_out);
    crate::par::for_each_row(out, c_out, |r, out_row| {
        let x_row = &x[r * c_in..(r + 1) * c_in];
        out_row.copy_from_slice(bias);
        for (i, &xv) in x_row.iter().enumerate() {
            let w_row = &weight[i * c_out..(i + 1) * c_out];
            for (o, &wv) in out_row.iter_mut().zip(w_row.iter()) {
                *o = *o + xv * wv;
            }
        }
    });
}

/// Splits the channel (last) axis into `n` equal groups, preserving order.
pub fn channel_split<T: Element>(x: &Tensor<T>, n: usize) -> Result<Vec<Tensor<T>>> {
    if n == 0 {
        return Err(Error::InvalidArgument("group count must be >= 1".into()));
    }
    let c = *x.shape().last().expect("rank >= 1");
    if c % n != 0 {
        return Err(Error::InvalidSplit {
            channels: c,
            groups: n,
        });
    }
    let cg = c / n;
    let rows = x.len() / c;
    let mut group_shape = x.shape().to_vec();
    *group_shape.last_mut().unwrap() = cg;
    let mut groups = Vec::with_capacity(n);
    for g in 0..n {
        let mut data = Vec::with_capacity(rows * cg);
        for r in 0..rows {
            let start = r * c + g * cg;
            data.extend_from_slice(&x.data()[start..start + cg]);
        }
        groups.push(Tensor {
            shape: group_shape.clone(),
            data,
        });
    }
    Ok(groups)
}

/// Concatenates tensors along the channel (last) axis. All leading extents
/// must agree; the inverse of [`channel_split`].
pub fn concat_channels<T: Element>(parts: &[Tensor<T>]) -> Result<Tensor<T>> {
    let first = parts
        .first()
        .ok_or_else(|| Error::InvalidArgument("concat_channels needs at least one part".into()))?;
    let lead = &first.shape()[..first.rank() - 1];
    let mut c_total = 0;
    for p in parts {
        if p.rank() != first.rank() || &p.shape()[..p.rank() - 1] != lead {
            return Err(Error::dim("concat_channels", first.shape(), p.shape()));
        }
        c_total += *p.shape().last().unwrap();
    }
    let rows: usize = lead.iter().product();
    let mut shape = first.shape().to_vec();
    *shape.last_mut().unwrap() = c_total;
    let mut data = Vec::with_capacity(rows * c_total);
    for r in 0..rows {
        for p in parts {
            let cg = *p.shape().last().unwrap();
            data.extend_from_slice(&p.data()[r * cg..(r + 1) * cg]);
        }
    }
    Ok(Tensor { shape, data })
}

/// Layer normalization along the temporal (first) axis of a `[T,H,W,C]`
/// tensor: each `(h,w,c)` column is centered by its mean over the T frames
/// and divided by `sqrt(var + eps)` with the biased (1/T) variance. No
/// learnable affine.
pub fn layer_norm_temporal<T: Element>(q: &Tensor<T>, eps: T) -> Result<Tensor<T>> {
    let (stats, out) = layer_norm_temporal_with_stats(q, eps)?;
    drop(stats);
    Ok(out)
}

/// Per-column `1/sqrt(var+eps)` retained for the backward pass.
pub(crate) fn layer_norm_temporal_with_stats<T: Element>(
    q: &Tensor<T>,
    eps: T,
) -> Result<(Tensor<T>, Tensor<T>)> {
    if q.rank() != 4 {
        return Err(Error::InvalidArgument(format!(
            "layer_norm_temporal expects a rank-4 input, got shape {:?}",
            q.shape()
        )));
    }
    let t = q.shape()[0];
    let cols = q.len() / t;
    let inv_t = T::from_f64(1.0 / t as f64);
    let mut inv_std = Tensor::zeros(&[q.shape()[1], q.shape()[2], q.shape()[3]]);
    let mut out = Tensor::zeros(q.shape());

    // Column j lives at offsets j, j+cols, j+2*cols, ... in the flat buffer.
    let q_data = q.data();
    let out_data = out.data_mut();
    for j in 0..cols {
        let mut mean = T::zero();
        for ti in 0..t {
            mean = mean + q_data[ti * cols + j];
        }
        mean = mean * inv_t;
        let mut var = T::zero();
        for ti in 0..t {
            let d = q_data[ti * cols + j] - mean;
            var = var + d * d;
        }
        var = var * inv_t;
        let inv = T::one() / (var + eps).sqrt();
        inv_std.data_mut()[j] = inv;
        for ti in 0..t {
            out_data[ti * cols + j] = (q_data[ti * cols + j] - mean) * inv;
        }
    }
    Ok((inv_std, out))
}

/// Row-wise softmax of a `[rows, cols]` matrix, computed with
/// max-subtraction. Masked entries are excluded from the exp/sum and come
/// out exactly zero.
pub fn softmax_rows<T: Element>(m: &Tensor<T>, mask: Option<&BoolMat>) -> Result<Tensor<T>> {
    if m.rank() != 2 {
        return Err(Error::InvalidArgument(format!(
            "softmax_rows expects a rank-2 input, got shape {:?}",
            m.shape()
        )));
    }
    let rows = m.shape()[0];
    let cols = m.shape()[1];
    if let Some(mk) = mask {
        if mk.rows() != rows || mk.cols() != cols {
            return Err(Error::dim("softmax mask", m.shape(), &[mk.rows(), mk.cols()]));
        }
        for r in 0..rows {
            if !mk.row(r).iter().any(|&v| v) {
                return Err(Error::DegenerateRow { row: r });
            }
        }
    }
    let mut out = Tensor::zeros(m.shape());
    let m_data = m.data();
    crate::par::for_each_row(out.data_mut(), cols, |r, out_row| {
        let row = &m_data[r * cols..(r + 1) * cols];
        let mask_row = mask.map(|mk| mk.row(r));
        softmax_row_masked(row, mask_row, out_row);
    });
    Ok(out)
}

/// Single-row masked softmax into `out`. The caller guarantees at least one
/// unmasked entry.
pub(crate) fn softmax_row_masked<T: Element>(row: &[T], mask: Option<&[bool]>, out: &mut [T]) {
    let live = |j: usize| mask.map_or(true, |m| m[j]);
    let mut max = T::neg_infinity();
    for (j, &v) in row.iter().enumerate() {
        if live(j) && v > max {
            max = v;
        }
    }
    let mut sum = T::zero();
    for (j, &v) in row.iter().enumerate() {
        if live(j) {
            let e = (v - max).exp();
            out[j] = e;
            sum = sum + e;
        } else {
            out[j] = T::zero();
        }
    }
    let inv = T::one() / sum;
    for (j, o) in out.iter_mut().enumerate() {
        if live(j) {
            *o = *o * inv;
        }
    }
}

/// Maximum of each row of a `[rows, cols]` matrix, returned as `[rows, 1]`.
pub fn rowwise_max<T: Element>(m: &Tensor<T>) -> Result<Tensor<T>> {
    if m.rank() != 2 {
        return Err(Error::InvalidArgument(format!(
            "rowwise_max expects a rank-2 input, got shape {:?}",
            m.shape()
        )));
    }
    let rows = m.shape()[0];
    let cols = m.shape()[1];
    let mut out = Tensor::zeros(&[rows, 1]);
    for r in 0..rows {
        let row = &m.data()[r * cols..(r + 1) * cols];
        let mut best = row[0];
        for &v in &row[1..] {
            if v > best {
                best = v;
            }
        }
        out.data_mut()[r] = best;
    }
    Ok(out)
}
