//! Tape-based reverse-mode differentiation.
//!
//! A [`Graph`] records every primitive in evaluation order. Since a node can
//! only reference earlier nodes, walking the tape from the end back to the
//! start visits each node once in reverse topological order. Gradients from
//! several use sites are summed into one buffer per node.
//!
//! Primitives are coarse (whole matrix products, sparse propagation, fused
//! truncated spectral convolutions) so that tapes for the graph ODE stay small.

use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::error::{Result, SparkError};
use crate::fft::{transform_channels, ModeSet};
use crate::grid::Adjacency;
use crate::params::{Gradients, ParamId, ParamSet};
use crate::tensor::{matmul, matmul_nt, matmul_tn, Tensor};

const LAYER_NORM_EPS: f64 = 1e-5;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct Var(usize);

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum Activation {
    /// Exact GeLU, `x·Φ(x)`.
    #[default]
    Gelu,
    Tanh,
    Identity,
}

const FRAC_1_SQRT_2PI: f64 = 0.398_942_280_401_432_7;

impl Activation {
    pub fn apply(self, x: f64) -> f64 {
        match self {
            Activation::Gelu => 0.5 * x * (1.0 + libm::erf(x * std::f64::consts::FRAC_1_SQRT_2)),
            Activation::Tanh => x.tanh(),
            Activation::Identity => x,
        }
    }

    pub fn derivative(self, x: f64) -> f64 {
        match self {
            Activation::Gelu => {
                let cdf = 0.5 * (1.0 + libm::erf(x * std::f64::consts::FRAC_1_SQRT_2));
                cdf + x * FRAC_1_SQRT_2PI * (-0.5 * x * x).exp()
            }
            Activation::Tanh => {
                let t = x.tanh();
                1.0 - t * t
            }
            Activation::Identity => 1.0,
        }
    }
}

/// Static description of a truncated spectral convolution on a grid.
///
/// `y = Re F⁻¹( P ⊙_modes [ (A·) F(x) ] W )`: forward transform, optional
/// real adjacency applied to the spectrum, per-mode complex channel mixing on
/// the retained bins (all other bins zeroed), inverse transform, real part.
#[derive(Clone, Debug)]
pub struct SpectralPlan {
    pub modes: ModeSet,
    pub spectral_adjacency: Option<Arc<Adjacency>>,
}

impl SpectralPlan {
    pub fn nodes(&self) -> usize {
        self.modes.height * self.modes.width
    }

    /// Forward spectrum after the optional adjacency: `(re, im)` of shape `[N, cin]`.
    fn spectrum(&self, x: &[f64], cin: usize) -> (Vec<f64>, Vec<f64>) {
        let (h, w) = (self.modes.height, self.modes.width);
        let zeros = vec![0.0; x.len()];
        let (re, im) = transform_channels(x, &zeros, h, w, cin, false, 1.0);
        match &self.spectral_adjacency {
            Some(a) => (a.spmm(&re, cin), a.spmm(&im, cin)),
            None => (re, im),
        }
    }

    pub fn forward(&self, x: &[f64], wre: &[f64], wim: &[f64], cin: usize, cout: usize) -> Vec<f64> {
        let n = self.nodes();
        let (h, w) = (self.modes.height, self.modes.width);
        let (xr, xi) = self.spectrum(x, cin);
        let mut yr = vec![0.0; n * cout];
        let mut yi = vec![0.0; n * cout];
        for (m, &bin) in self.modes.bins.iter().enumerate() {
            let wbase = m * cin * cout;
            let (ro, io) = (
                &mut yr[bin * cout..(bin + 1) * cout],
                &mut yi[bin * cout..(bin + 1) * cout],
            );
            for c in 0..cin {
                let (a, b) = (xr[bin * cin + c], xi[bin * cin + c]);
                let wr = &wre[wbase + c * cout..wbase + (c + 1) * cout];
                let wi = &wim[wbase + c * cout..wbase + (c + 1) * cout];
                for o in 0..cout {
                    ro[o] += a * wr[o] - b * wi[o];
                    io[o] += a * wi[o] + b * wr[o];
                }
            }
        }
        let (out, _) = transform_channels(&yr, &yi, h, w, cout, true, 1.0 / n as f64);
        out
    }

    /// Returns `(dx, dW_re, dW_im)` for upstream gradient `g` of shape `[N, cout]`.
    pub fn backward(
        &self,
        x: &[f64],
        wre: &[f64],
        wim: &[f64],
        g: &[f64],
        cin: usize,
        cout: usize,
    ) -> (Vec<f64>, Vec<f64>, Vec<f64>) {
        let n = self.nodes();
        let (h, w) = (self.modes.height, self.modes.width);
        let (xr, xi) = self.spectrum(x, cin);
        let zeros = vec![0.0; g.len()];
        let (gyr, gyi) = transform_channels(g, &zeros, h, w, cout, false, 1.0 / n as f64);
        let mut gwr = vec![0.0; wre.len()];
        let mut gwi = vec![0.0; wim.len()];
        let mut gxr = vec![0.0; n * cin];
        let mut gxi = vec![0.0; n * cin];
        for (m, &bin) in self.modes.bins.iter().enumerate() {
            let wbase = m * cin * cout;
            let gr = &gyr[bin * cout..(bin + 1) * cout];
            let gi = &gyi[bin * cout..(bin + 1) * cout];
            for c in 0..cin {
                let (a, b) = (xr[bin * cin + c], xi[bin * cin + c]);
                let off = wbase + c * cout;
                let (mut sr, mut si) = (0.0, 0.0);
                for o in 0..cout {
                    gwr[off + o] += a * gr[o] + b * gi[o];
                    gwi[off + o] += a * gi[o] - b * gr[o];
                    sr += gr[o] * wre[off + o] + gi[o] * wim[off + o];
                    si += gi[o] * wre[off + o] - gr[o] * wim[off + o];
                }
                gxr[bin * cin + c] = sr;
                gxi[bin * cin + c] = si;
            }
        }
        if let Some(a) = &self.spectral_adjacency {
            gxr = a.spmm_t(&gxr, cin);
            gxi = a.spmm_t(&gxi, cin);
        }
        let (gx, _) = transform_channels(&gxr, &gxi, h, w, cin, true, 1.0);
        (gx, gwr, gwi)
    }
}

#[derive(Clone, Debug)]
enum Op {
    Input,
    StopGradient,
    Param(ParamId),
    Add(Var, Var),
    Sub(Var, Var),
    Mul(Var, Var),
    Scale(Var, f64),
    AddRow(Var, Var),
    MulRow(Var, Var),
    MulCol(Var, Var),
    MatMul(Var, Var),
    SpMM(Arc<Adjacency>, Var),
    Act(Var, Activation),
    Square(Var),
    Sum(Var),
    Mean(Var),
    RowDot(Var, Var),
    ConcatCols(Var, Var),
    Gather(Var, Arc<[usize]>),
    Pack(Var, Var),
    Part(Var, usize),
    Fft2 {
        x: Var,
        h: usize,
        w: usize,
        inverse: bool,
    },
    SpectralConv {
        x: Var,
        wre: Var,
        wim: Var,
        plan: Arc<SpectralPlan>,
    },
    LayerNorm {
        x: Var,
        gain: Var,
        bias: Var,
    },
    StraightThrough(Var),
}

impl Op {
    fn name(&self) -> &'static str {
        match self {
            Op::Input => "input",
            Op::StopGradient => "stop_gradient",
            Op::Param(_) => "param",
            Op::Add(..) => "add",
            Op::Sub(..) => "sub",
            Op::Mul(..) => "mul",
            Op::Scale(..) => "scale",
            Op::AddRow(..) => "add_row",
            Op::MulRow(..) => "mul_row",
            Op::MulCol(..) => "mul_col",
            Op::MatMul(..) => "matmul",
            Op::SpMM(..) => "spmm",
            Op::Act(_, Activation::Gelu) => "gelu",
            Op::Act(_, Activation::Tanh) => "tanh",
            Op::Act(_, Activation::Identity) => "identity",
            Op::Square(_) => "square",
            Op::Sum(_) => "sum",
            Op::Mean(_) => "mean",
            Op::RowDot(..) => "row_dot",
            Op::ConcatCols(..) => "concat_cols",
            Op::Gather(..) => "gather",
            Op::Pack(..) => "pack",
            Op::Part(..) => "part",
            Op::Fft2 { inverse: false, .. } => "fft2",
            Op::Fft2 { inverse: true, .. } => "ifft2",
            Op::SpectralConv { .. } => "spectral_conv",
            Op::LayerNorm { .. } => "layer_norm",
            Op::StraightThrough(_) => "straight_through",
        }
    }
}

struct Node {
    value: Tensor,
    op: Op,
}

/// Computation tape.
#[derive(Default)]
pub struct Graph {
    nodes: Vec<Node>,
}

fn same_shape(op: &'static str, a: &Tensor, b: &Tensor) -> Result<()> {
    if a.shape() != b.shape() {
        return Err(SparkError::shape(op, format!("{:?} vs {:?}", a.shape(), b.shape())));
    }
    Ok(())
}

fn matrix_dims(op: &'static str, t: &Tensor) -> Result<(usize, usize)> {
    match t.shape() {
        [r, c] => Ok((*r, *c)),
        [c] => Ok((1, *c)),
        s => Err(SparkError::shape(op, format!("expected a matrix, got {s:?}"))),
    }
}

impl Graph {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    fn push(&mut self, value: Tensor, op: Op) -> Var {
        self.nodes.push(Node { value, op });
        Var(self.nodes.len() - 1)
    }

    pub fn value(&self, v: Var) -> &Tensor {
        &self.nodes[v.0].value
    }

    /// Constant input; receives no gradient.
    pub fn input(&mut self, value: Tensor) -> Var {
        self.push(value, Op::Input)
    }

    /// Trainable leaf tied to `id`. Registering the same id twice sums the
    /// gradients of both uses.
    pub fn param(&mut self, id: ParamId, value: Tensor) -> Var {
        self.push(value, Op::Param(id))
    }

    pub fn param_from(&mut self, params: &ParamSet, id: ParamId) -> Var {
        self.param(id, params.get(id).clone())
    }

    pub fn stop_gradient(&mut self, x: Var) -> Var {
        let value = self.value(x).clone();
        self.push(value, Op::StopGradient)
    }

    /// Forward value of `z`, backward identity into `h` (nothing reaches `z`).
    pub fn straight_through(&mut self, h: Var, z: Var) -> Result<Var> {
        same_shape("straight_through", self.value(h), self.value(z))?;
        let value = self.value(z).clone();
        Ok(self.push(value, Op::StraightThrough(h)))
    }

    pub fn add(&mut self, a: Var, b: Var) -> Result<Var> {
        same_shape("add", self.value(a), self.value(b))?;
        let v = self.value(a).zip_map(self.value(b), |x, y| x + y);
        Ok(self.push(v, Op::Add(a, b)))
    }

    pub fn sub(&mut self, a: Var, b: Var) -> Result<Var> {
        same_shape("sub", self.value(a), self.value(b))?;
        let v = self.value(a).zip_map(self.value(b), |x, y| x - y);
        Ok(self.push(v, Op::Sub(a, b)))
    }

    pub fn mul(&mut self, a: Var, b: Var) -> Result<Var> {
        same_shape("mul", self.value(a), self.value(b))?;
        let v = self.value(a).zip_map(self.value(b), |x, y| x * y);
        Ok(self.push(v, Op::Mul(a, b)))
    }

    pub fn scale(&mut self, a: Var, s: f64) -> Var {
        let v = self.value(a).scale(s);
        self.push(v, Op::Scale(a, s))
    }

    /// `x[i, j] + b[j]`.
    pub fn add_row(&mut self, x: Var, b: Var) -> Result<Var> {
        let (xv, bv) = (self.value(x), self.value(b));
        let cols = xv.cols();
        if bv.numel() != cols {
            return Err(SparkError::shape(
                "add_row",
                format!("{:?} + row {:?}", xv.shape(), bv.shape()),
            ));
        }
        let mut v = xv.clone();
        for row in v.data_mut().chunks_mut(cols) {
            for (o, b) in row.iter_mut().zip(bv.data()) {
                *o += b;
            }
        }
        Ok(self.push(v, Op::AddRow(x, b)))
    }

    /// `x[i, j] · a[j]`.
    pub fn mul_row(&mut self, x: Var, a: Var) -> Result<Var> {
        let (xv, av) = (self.value(x), self.value(a));
        let cols = xv.cols();
        if av.numel() != cols {
            return Err(SparkError::shape(
                "mul_row",
                format!("{:?} ⊙ row {:?}", xv.shape(), av.shape()),
            ));
        }
        let mut v = xv.clone();
        for row in v.data_mut().chunks_mut(cols) {
            for (o, a) in row.iter_mut().zip(av.data()) {
                *o *= a;
            }
        }
        Ok(self.push(v, Op::MulRow(x, a)))
    }

    /// `x[i, j] · s[i]`.
    pub fn mul_col(&mut self, x: Var, s: Var) -> Result<Var> {
        let (xv, sv) = (self.value(x), self.value(s));
        let cols = xv.cols();
        if sv.numel() != xv.rows() {
            return Err(SparkError::shape(
                "mul_col",
                format!("{:?} ⊙ column {:?}", xv.shape(), sv.shape()),
            ));
        }
        let mut v = xv.clone();
        for (row, s) in v.data_mut().chunks_mut(cols).zip(sv.data()) {
            for o in row.iter_mut() {
                *o *= s;
            }
        }
        Ok(self.push(v, Op::MulCol(x, s)))
    }

    pub fn matmul(&mut self, a: Var, b: Var) -> Result<Var> {
        let (n, k) = matrix_dims("matmul", self.value(a))?;
        let (k2, m) = matrix_dims("matmul", self.value(b))?;
        if k != k2 {
            return Err(SparkError::shape(
                "matmul",
                format!("{:?} · {:?}", self.value(a).shape(), self.value(b).shape()),
            ));
        }
        let data = matmul(self.value(a).data(), self.value(b).data(), n, k, m);
        Ok(self.push(Tensor::new(vec![n, m], data)?, Op::MatMul(a, b)))
    }

    /// `x·W + b`.
    pub fn linear(&mut self, x: Var, w: Var, b: Var) -> Result<Var> {
        let y = self.matmul(x, w)?;
        self.add_row(y, b)
    }

    /// Sparse `A·x` for node features `x` of shape `[N, C]`.
    pub fn spmm(&mut self, adjacency: &Arc<Adjacency>, x: Var) -> Result<Var> {
        let xv = self.value(x);
        if xv.rows() != adjacency.nodes() {
            return Err(SparkError::shape(
                "spmm",
                format!("{} nodes vs features {:?}", adjacency.nodes(), xv.shape()),
            ));
        }
        let c = xv.cols();
        let data = adjacency.spmm(xv.data(), c);
        let v = Tensor::new(vec![adjacency.nodes(), c], data)?;
        Ok(self.push(v, Op::SpMM(Arc::clone(adjacency), x)))
    }

    pub fn act(&mut self, x: Var, act: Activation) -> Var {
        if act == Activation::Identity {
            return x;
        }
        let v = self.value(x).map(|z| act.apply(z));
        self.push(v, Op::Act(x, act))
    }

    pub fn gelu(&mut self, x: Var) -> Var {
        self.act(x, Activation::Gelu)
    }

    pub fn tanh(&mut self, x: Var) -> Var {
        self.act(x, Activation::Tanh)
    }

    pub fn square(&mut self, x: Var) -> Var {
        let v = self.value(x).map(|z| z * z);
        self.push(v, Op::Square(x))
    }

    pub fn sum(&mut self, x: Var) -> Var {
        let v = Tensor::scalar(self.value(x).sum());
        self.push(v, Op::Sum(x))
    }

    pub fn mean(&mut self, x: Var) -> Var {
        let t = self.value(x);
        let v = Tensor::scalar(t.sum() / t.numel() as f64);
        self.push(v, Op::Mean(x))
    }

    /// Row-wise inner products: `[N, C] × [N, C] → [N, 1]`.
    pub fn row_dot(&mut self, a: Var, b: Var) -> Result<Var> {
        same_shape("row_dot", self.value(a), self.value(b))?;
        let (av, bv) = (self.value(a), self.value(b));
        let c = av.cols();
        let data: Vec<f64> = av
            .data()
            .chunks(c)
            .zip(bv.data().chunks(c))
            .map(|(x, y)| x.iter().zip(y).map(|(p, q)| p * q).sum())
            .collect();
        let v = Tensor::new(vec![av.rows(), 1], data)?;
        Ok(self.push(v, Op::RowDot(a, b)))
    }

    pub fn concat_cols(&mut self, a: Var, b: Var) -> Result<Var> {
        let (av, bv) = (self.value(a), self.value(b));
        if av.rows() != bv.rows() {
            return Err(SparkError::shape(
                "concat_cols",
                format!("{:?} ‖ {:?}", av.shape(), bv.shape()),
            ));
        }
        let (p, q) = (av.cols(), bv.cols());
        let mut data = Vec::with_capacity(av.numel() + bv.numel());
        for (x, y) in av.data().chunks(p).zip(bv.data().chunks(q)) {
            data.extend_from_slice(x);
            data.extend_from_slice(y);
        }
        let v = Tensor::new(vec![av.rows(), p + q], data)?;
        Ok(self.push(v, Op::ConcatCols(a, b)))
    }

    /// Rows of `table` selected by `indices`.
    pub fn gather(&mut self, table: Var, indices: Arc<[usize]>) -> Result<Var> {
        let tv = self.value(table);
        let (rows, c) = (tv.rows(), tv.cols());
        let mut data = Vec::with_capacity(indices.len() * c);
        for &i in indices.iter() {
            if i >= rows {
                return Err(SparkError::shape("gather", format!("index {i} outside {rows} rows")));
            }
            data.extend_from_slice(tv.row(i));
        }
        let v = Tensor::new(vec![indices.len(), c], data)?;
        Ok(self.push(v, Op::Gather(table, indices)))
    }

    /// Stack real and imaginary parts into one `[2, ...]` complex tensor.
    pub fn pack(&mut self, re: Var, im: Var) -> Result<Var> {
        same_shape("pack", self.value(re), self.value(im))?;
        let mut shape = vec![2];
        shape.extend_from_slice(self.value(re).shape());
        let mut data = self.value(re).data().to_vec();
        data.extend_from_slice(self.value(im).data());
        Ok(self.push(Tensor::new(shape, data)?, Op::Pack(re, im)))
    }

    /// Real (`0`) or imaginary (`1`) half of a packed complex tensor.
    pub fn part(&mut self, z: Var, which: usize) -> Result<Var> {
        let zv = self.value(z);
        if zv.shape().first() != Some(&2) || zv.shape().len() < 2 || which > 1 {
            return Err(SparkError::shape("part", format!("{:?} part {which}", zv.shape())));
        }
        let half = zv.numel() / 2;
        let data = zv.data()[which * half..(which + 1) * half].to_vec();
        let v = Tensor::new(zv.shape()[1..].to_vec(), data)?;
        Ok(self.push(v, Op::Part(z, which)))
    }

    fn fft_packed(&mut self, re: Var, im: Var, inverse: bool) -> Result<(Var, Var)> {
        let op = if inverse { "ifft2" } else { "fft2" };
        same_shape(op, self.value(re), self.value(im))?;
        let (h, w) = match self.value(re).shape() {
            [h, w] => (*h, *w),
            s => return Err(SparkError::shape(op, format!("expected H×W, got {s:?}"))),
        };
        let z = self.pack(re, im)?;
        let zv = self.value(z);
        let n = h * w;
        let scale = if inverse { 1.0 / n as f64 } else { 1.0 };
        let (r, i) = transform_channels(&zv.data()[..n], &zv.data()[n..], h, w, 1, inverse, scale);
        let mut data = r;
        data.extend(i);
        let out = self.push(Tensor::new(vec![2, h, w], data)?, Op::Fft2 { x: z, h, w, inverse });
        Ok((self.part(out, 0)?, self.part(out, 1)?))
    }

    /// Differentiable forward DFT of an `H×W` complex field.
    pub fn fft2(&mut self, re: Var, im: Var) -> Result<(Var, Var)> {
        self.fft_packed(re, im, false)
    }

    pub fn ifft2(&mut self, re: Var, im: Var) -> Result<(Var, Var)> {
        self.fft_packed(re, im, true)
    }

    /// Truncated spectral convolution; `wre`, `wim` have shape `[modes, cin, cout]`.
    pub fn spectral_conv(&mut self, x: Var, wre: Var, wim: Var, plan: &Arc<SpectralPlan>) -> Result<Var> {
        let (xv, wr, wi) = (self.value(x), self.value(wre), self.value(wim));
        same_shape("spectral_conv", wr, wi)?;
        let n = plan.nodes();
        let [modes, cin, cout] = match wr.shape() {
            [a, b, c] => [*a, *b, *c],
            s => return Err(SparkError::shape("spectral_conv", format!("weights {s:?}"))),
        };
        if modes != plan.modes.len() || xv.rows() != n || xv.cols() != cin {
            return Err(SparkError::shape(
                "spectral_conv",
                format!(
                    "input {:?}, weights {:?}, plan has {} modes on {} nodes",
                    xv.shape(),
                    wr.shape(),
                    plan.modes.len(),
                    n
                ),
            ));
        }
        let data = plan.forward(xv.data(), wr.data(), wi.data(), cin, cout);
        let v = Tensor::new(vec![n, cout], data)?;
        Ok(self.push(
            v,
            Op::SpectralConv {
                x,
                wre,
                wim,
                plan: Arc::clone(plan),
            },
        ))
    }

    /// Per-row normalization followed by `gain ⊙ x̂ + bias`.
    pub fn layer_norm(&mut self, x: Var, gain: Var, bias: Var) -> Result<Var> {
        let xv = self.value(x);
        let c = xv.cols();
        if self.value(gain).numel() != c || self.value(bias).numel() != c {
            return Err(SparkError::shape("layer_norm", format!("features {:?}", xv.shape())));
        }
        let (g, b) = (self.value(gain).data(), self.value(bias).data());
        let mut out = Vec::with_capacity(xv.numel());
        for row in xv.data().chunks(c) {
            let (xhat, _) = normalize_row(row);
            out.extend(xhat.iter().zip(g).zip(b).map(|((x, g), b)| x * g + b));
        }
        let v = Tensor::new(xv.shape().to_vec(), out)?;
        Ok(self.push(v, Op::LayerNorm { x, gain, bias }))
    }

    /// Reverse pass from a scalar loss.
    ///
    /// Every parameter leaf on the tape appears in the result; leaves that the
    /// loss does not depend on get an all-zero gradient.
    pub fn backward(&self, loss: Var) -> Result<Gradients> {
        let lv = self.value(loss);
        if !lv.is_scalar() {
            return Err(SparkError::Contract(format!(
                "backward needs a scalar loss, got shape {:?}",
                lv.shape()
            )));
        }
        let mut grads: Vec<Option<Tensor>> = vec![None; self.nodes.len()];
        grads[loss.0] = Some(Tensor::new(lv.shape().to_vec(), vec![1.0])?);
        let mut out = Gradients::default();

        for idx in (0..=loss.0).rev() {
            let node = &self.nodes[idx];
            if let Op::Param(id) = node.op {
                let g = grads[idx].take().unwrap_or_else(|| Tensor::zeros(node.value.shape()));
                match out.by_param.get_mut(&id) {
                    Some(acc) => acc.add_assign(&g),
                    None => {
                        out.by_param.insert(id, g);
                    }
                }
                continue;
            }
            let Some(g) = grads[idx].take() else { continue };
            let contributions = self.local_backward(&node.op, &node.value, &g)?;
            for (target, contrib) in contributions {
                if !contrib.is_finite() {
                    return Err(SparkError::numeric(
                        node.op.name(),
                        format!("gradient at tape node {idx} is not finite"),
                    ));
                }
                match &mut grads[target.0] {
                    Some(acc) => acc.add_assign(&contrib),
                    slot @ None => *slot = Some(contrib),
                }
            }
        }
        // parameters registered after the loss node cannot influence it
        for node in &self.nodes[loss.0 + 1..] {
            if let Op::Param(id) = node.op {
                out.by_param
                    .entry(id)
                    .or_insert_with(|| Tensor::zeros(node.value.shape()));
            }
        }
        Ok(out)
    }

    fn local_backward(&self, op: &Op, out: &Tensor, g: &Tensor) -> Result<Vec<(Var, Tensor)>> {
        let val = |v: Var| &self.nodes[v.0].value;
        let shaped = |like: &Tensor, data: Vec<f64>| Tensor::new(like.shape().to_vec(), data);
        Ok(match *op {
            Op::Input | Op::StopGradient | Op::Param(_) => vec![],
            Op::StraightThrough(h) => vec![(h, g.clone())],
            Op::Add(a, b) => vec![(a, g.clone()), (b, g.clone())],
            Op::Sub(a, b) => vec![(a, g.clone()), (b, g.scale(-1.0))],
            Op::Mul(a, b) => vec![
                (a, g.zip_map(val(b), |g, y| g * y)),
                (b, g.zip_map(val(a), |g, x| g * x)),
            ],
            Op::Scale(a, s) => vec![(a, g.scale(s))],
            Op::AddRow(x, b) => {
                let cols = g.cols();
                let mut gb = vec![0.0; cols];
                for row in g.data().chunks(cols) {
                    for (acc, v) in gb.iter_mut().zip(row) {
                        *acc += v;
                    }
                }
                vec![(x, g.clone()), (b, shaped(val(b), gb)?)]
            }
            Op::MulRow(x, a) => {
                let (xv, av) = (val(x), val(a));
                let cols = g.cols();
                let mut gx = g.clone();
                let mut ga = vec![0.0; cols];
                for (grow, xrow) in gx.data_mut().chunks_mut(cols).zip(xv.data().chunks(cols)) {
                    for j in 0..cols {
                        ga[j] += grow[j] * xrow[j];
                        grow[j] *= av.data()[j];
                    }
                }
                vec![(x, gx), (a, shaped(av, ga)?)]
            }
            Op::MulCol(x, s) => {
                let (xv, sv) = (val(x), val(s));
                let cols = g.cols();
                let mut gx = g.clone();
                let mut gs = vec![0.0; sv.numel()];
                for (i, (grow, xrow)) in gx.data_mut().chunks_mut(cols).zip(xv.data().chunks(cols)).enumerate() {
                    let si = sv.data()[i];
                    for j in 0..cols {
                        gs[i] += grow[j] * xrow[j];
                        grow[j] *= si;
                    }
                }
                vec![(x, gx), (s, shaped(sv, gs)?)]
            }
            Op::MatMul(a, b) => {
                let (av, bv) = (val(a), val(b));
                let (n, k) = matrix_dims("matmul", av)?;
                let m = bv.cols();
                let ga = matmul_nt(g.data(), bv.data(), n, m, k);
                let gb = matmul_tn(av.data(), g.data(), n, k, m);
                vec![(a, shaped(av, ga)?), (b, shaped(bv, gb)?)]
            }
            Op::SpMM(ref adj, x) => {
                let gx = adj.spmm_t(g.data(), g.cols());
                vec![(x, shaped(val(x), gx)?)]
            }
            Op::Act(x, act) => vec![(x, g.zip_map(val(x), |g, z| g * act.derivative(z)))],
            Op::Square(x) => vec![(x, g.zip_map(val(x), |g, z| 2.0 * g * z))],
            Op::Sum(x) => vec![(x, Tensor::full(val(x).shape(), g.item()))],
            Op::Mean(x) => {
                let xv = val(x);
                vec![(x, Tensor::full(xv.shape(), g.item() / xv.numel() as f64))]
            }
            Op::RowDot(a, b) => {
                let (av, bv) = (val(a), val(b));
                let c = av.cols();
                let mut ga = av.clone();
                let mut gb = bv.clone();
                for (i, gi) in g.data().iter().enumerate() {
                    for j in 0..c {
                        ga.data_mut()[i * c + j] = gi * bv.data()[i * c + j];
                        gb.data_mut()[i * c + j] = gi * av.data()[i * c + j];
                    }
                }
                vec![(a, ga), (b, gb)]
            }
            Op::ConcatCols(a, b) => {
                let (p, q) = (val(a).cols(), val(b).cols());
                let mut ga = Vec::with_capacity(val(a).numel());
                let mut gb = Vec::with_capacity(val(b).numel());
                for row in g.data().chunks(p + q) {
                    ga.extend_from_slice(&row[..p]);
                    gb.extend_from_slice(&row[p..]);
                }
                vec![(a, shaped(val(a), ga)?), (b, shaped(val(b), gb)?)]
            }
            Op::Gather(table, ref indices) => {
                let tv = val(table);
                let c = tv.cols();
                let mut gt = vec![0.0; tv.numel()];
                for (r, &i) in indices.iter().enumerate() {
                    for j in 0..c {
                        gt[i * c + j] += g.data()[r * c + j];
                    }
                }
                vec![(table, shaped(tv, gt)?)]
            }
            Op::Pack(re, im) => {
                let half = g.numel() / 2;
                vec![
                    (re, shaped(val(re), g.data()[..half].to_vec())?),
                    (im, shaped(val(im), g.data()[half..].to_vec())?),
                ]
            }
            Op::Part(z, which) => {
                let zv = val(z);
                let half = zv.numel() / 2;
                let mut gz = vec![0.0; zv.numel()];
                gz[which * half..(which + 1) * half].copy_from_slice(g.data());
                vec![(z, shaped(zv, gz)?)]
            }
            Op::Fft2 { x, h, w, inverse } => {
                // adjoint of the unnormalized DFT is N·ifft; of ifft it is fft/N
                let n = h * w;
                let scale = if inverse { 1.0 / n as f64 } else { 1.0 };
                let (r, i) = transform_channels(&g.data()[..n], &g.data()[n..], h, w, 1, !inverse, scale);
                let mut data = r;
                data.extend(i);
                vec![(x, shaped(out, data)?)]
            }
            Op::SpectralConv { x, wre, wim, ref plan } => {
                let (xv, wr, wi) = (val(x), val(wre), val(wim));
                let (cin, cout) = (wr.shape()[1], wr.shape()[2]);
                let (gx, gwr, gwi) = plan.backward(xv.data(), wr.data(), wi.data(), g.data(), cin, cout);
                vec![(x, shaped(xv, gx)?), (wre, shaped(wr, gwr)?), (wim, shaped(wi, gwi)?)]
            }
            Op::LayerNorm { x, gain, bias } => {
                let xv = val(x);
                let gainv = val(gain).data();
                let c = xv.cols();
                let mut gx = Vec::with_capacity(xv.numel());
                let mut ggain = vec![0.0; c];
                let mut gbias = vec![0.0; c];
                for (row, grow) in xv.data().chunks(c).zip(g.data().chunks(c)) {
                    let (xhat, inv_std) = normalize_row(row);
                    let dxhat: Vec<f64> = grow.iter().zip(gainv).map(|(g, s)| g * s).collect();
                    let mean_d = dxhat.iter().sum::<f64>() / c as f64;
                    let mean_dx = dxhat.iter().zip(&xhat).map(|(d, x)| d * x).sum::<f64>() / c as f64;
                    for j in 0..c {
                        ggain[j] += grow[j] * xhat[j];
                        gbias[j] += grow[j];
                        gx.push(inv_std * (dxhat[j] - mean_d - xhat[j] * mean_dx));
                    }
                }
                vec![
                    (x, shaped(xv, gx)?),
                    (gain, shaped(val(gain), ggain)?),
                    (bias, shaped(val(bias), gbias)?),
                ]
            }
        })
    }
}

fn normalize_row(row: &[f64]) -> (Vec<f64>, f64) {
    let c = row.len() as f64;
    let mean = row.iter().sum::<f64>() / c;
    let var = row.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / c;
    let inv_std = 1.0 / (var + LAYER_NORM_EPS).sqrt();
    (row.iter().map(|v| (v - mean) * inv_std).collect(), inv_std)
}
