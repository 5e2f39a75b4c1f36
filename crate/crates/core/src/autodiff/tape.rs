use rand::Rng;

use super::{matmul_into, Real, Tensor, BN_EPS};
use crate::error::{Error, Result};

/// Handle to a value recorded on a [`Tape`].
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct Var(usize);

impl Var {
    pub fn index(self) -> usize {
        self.0
    }
}

/// Per-column batch mean and biased variance seen by a training-mode batch norm.
#[derive(Debug, Clone, PartialEq)]
pub struct BatchStats {
    pub mean: Vec<f64>,
    pub var: Vec<f64>,
}

#[derive(Debug)]
enum Op<T> {
    Leaf,
    MatMul(Var, Var),
    Add(Var, Var),
    AddRow(Var, Var),
    Mul(Var, Var),
    Scale(Var, T),
    LeakyRelu(Var, T),
    BatchNorm {
        x: Var,
        gamma: Var,
        beta: Var,
        xhat: Vec<T>,
        inv_std: Vec<T>,
        train: bool,
    },
    Mask(Var, Vec<T>),
    GatherRows(Var, Vec<u32>),
    SegmentSum(Var, Vec<u32>),
    SegmentMean(Var, Vec<u32>, Vec<T>),
    MeanRows(Var),
    ConcatCols(Vec<Var>),
    EdgeContract { f: Var, w: Var },
    SoftmaxCrossEntropy {
        logits: Var,
        labels: Vec<usize>,
        weights: Vec<T>,
        probs: Vec<T>,
    },
    SumSquares(Var),
    SumAll(Var),
}

#[derive(Debug)]
struct Node<T> {
    value: Tensor<T>,
    op: Op<T>,
    needs_grad: bool,
}

/// Records operations in execution order; [`Tape::backward`] replays them in reverse.
#[derive(Debug)]
pub struct Tape<T> {
    nodes: Vec<Node<T>>,
    grads: Vec<Option<Tensor<T>>>,
}

impl<T: Real> Default for Tape<T> {
    fn default() -> Self {
        Self::new()
    }
}

fn check(ok: bool, op: &'static str, detail: impl FnOnce() -> String) -> Result<()> {
    if ok {
        Ok(())
    } else {
        Err(Error::shape(op, detail()))
    }
}

fn segment_count(seg: &[u32], segments: usize, op: &'static str) -> Result<()> {
    check(seg.iter().all(|&s| (s as usize) < segments), op, || {
        format!("segment id out of range for {segments} segments")
    })
}

impl<T: Real> Tape<T> {
    pub fn new() -> Self {
        Tape {
            nodes: Vec::new(),
            grads: Vec::new(),
        }
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    fn push(&mut self, value: Tensor<T>, op: Op<T>, needs_grad: bool) -> Var {
        self.nodes.push(Node { value, op, needs_grad });
        Var(self.nodes.len() - 1)
    }

    fn needs(&self, vars: &[Var]) -> bool {
        vars.iter().any(|v| self.nodes[v.0].needs_grad)
    }

    /// A trainable input.
    pub fn param(&mut self, value: Tensor<T>) -> Var {
        self.push(value, Op::Leaf, true)
    }

    pub fn constant(&mut self, value: Tensor<T>) -> Var {
        self.push(value, Op::Leaf, false)
    }

    pub fn value(&self, v: Var) -> &Tensor<T> {
        &self.nodes[v.0].value
    }

    pub fn shape(&self, v: Var) -> (usize, usize) {
        self.nodes[v.0].value.shape()
    }

    /// Adjoint of `v` after [`Tape::backward`]; `None` if no gradient reached it.
    pub fn grad(&self, v: Var) -> Option<&Tensor<T>> {
        self.grads.get(v.0).and_then(Option::as_ref)
    }

    pub fn matmul(&mut self, a: Var, b: Var) -> Result<Var> {
        let ((n, k), (k2, m)) = (self.shape(a), self.shape(b));
        check(k == k2, "matmul", || format!("{n}x{k} * {k2}x{m}"))?;
        let mut out = Tensor::zeros(n, m);
        matmul_into(&self.value(a).data, &self.value(b).data, &mut out.data, k, m);
        let g = self.needs(&[a, b]);
        Ok(self.push(out, Op::MatMul(a, b), g))
    }

    pub fn add(&mut self, a: Var, b: Var) -> Result<Var> {
        let (sa, sb) = (self.shape(a), self.shape(b));
        check(sa == sb, "add", || format!("{sa:?} + {sb:?}"))?;
        let data = self.value(a).data.iter().zip(&self.value(b).data).map(|(&x, &y)| x + y).collect();
        let g = self.needs(&[a, b]);
        Ok(self.push(Tensor { rows: sa.0, cols: sa.1, data }, Op::Add(a, b), g))
    }

    /// Adds the `1 x m` row `bias` to every row of `x`.
    pub fn add_row(&mut self, x: Var, bias: Var) -> Result<Var> {
        let ((n, m), sb) = (self.shape(x), self.shape(bias));
        check(sb == (1, m), "add_row", || format!("{n}x{m} + {sb:?}"))?;
        let b = &self.value(bias).data;
        let mut out = self.value(x).clone();
        if m > 0 {
            out.data.chunks_mut(m).for_each(|r| r.iter_mut().zip(b).for_each(|(v, &bv)| *v += bv));
        }
        let g = self.needs(&[x, bias]);
        Ok(self.push(out, Op::AddRow(x, bias), g))
    }

    pub fn mul(&mut self, a: Var, b: Var) -> Result<Var> {
        let (sa, sb) = (self.shape(a), self.shape(b));
        check(sa == sb, "mul", || format!("{sa:?} * {sb:?}"))?;
        let data = self.value(a).data.iter().zip(&self.value(b).data).map(|(&x, &y)| x * y).collect();
        let g = self.needs(&[a, b]);
        Ok(self.push(Tensor { rows: sa.0, cols: sa.1, data }, Op::Mul(a, b), g))
    }

    pub fn scale(&mut self, x: Var, s: f64) -> Var {
        let s = T::of(s);
        let v = self.value(x);
        let out = Tensor {
            rows: v.rows,
            cols: v.cols,
            data: v.data.iter().map(|&e| e * s).collect(),
        };
        let g = self.needs(&[x]);
        self.push(out, Op::Scale(x, s), g)
    }

    pub fn leaky_relu(&mut self, x: Var, slope: f64) -> Var {
        let s = T::of(slope);
        let v = self.value(x);
        let out = Tensor {
            rows: v.rows,
            cols: v.cols,
            data: v.data.iter().map(|&e| if e >= T::zero() { e } else { e * s }).collect(),
        };
        let g = self.needs(&[x]);
        self.push(out, Op::LeakyRelu(x, s), g)
    }

    fn check_bn(&self, x: Var, gamma: Var, beta: Var) -> Result<usize> {
        let (n, m) = self.shape(x);
        let (sg, sb) = (self.shape(gamma), self.shape(beta));
        check(sg == (1, m) && sb == (1, m), "batch_norm", || format!("{n}x{m} with gamma {sg:?}, beta {sb:?}"))?;
        Ok(m)
    }

    fn bn_apply(&mut self, x: Var, gamma: Var, beta: Var, mean: &[T], inv_std: Vec<T>, train: bool) -> Var {
        let v = self.value(x);
        let m = v.cols;
        let (gm, bt) = (&self.value(gamma).data, &self.value(beta).data);
        let mut xhat = Vec::with_capacity(v.data.len());
        let mut out = Vec::with_capacity(v.data.len());
        for (i, &e) in v.data.iter().enumerate() {
            let j = i % m;
            let h = (e - mean[j]) * inv_std[j];
            xhat.push(h);
            out.push(gm[j] * h + bt[j]);
        }
        let value = Tensor {
            rows: v.rows,
            cols: m,
            data: out,
        };
        let g = self.needs(&[x, gamma, beta]);
        self.push(
            value,
            Op::BatchNorm {
                x,
                gamma,
                beta,
                xhat,
                inv_std,
                train,
            },
            g,
        )
    }

    /// Normalizes each column by its batch statistics (biased variance).
    pub fn batch_norm_train(&mut self, x: Var, gamma: Var, beta: Var) -> Result<(Var, BatchStats)> {
        let m = self.check_bn(x, gamma, beta)?;
        let v = self.value(x);
        let n = v.rows;
        check(n > 0, "batch_norm", || "empty batch".into())?;
        let mut mean = vec![0.0f64; m];
        let mut var = vec![0.0f64; m];
        for r in v.data.chunks(m) {
            r.iter().zip(&mut mean).for_each(|(e, s)| *s += e.f64());
        }
        mean.iter_mut().for_each(|s| *s /= n as f64);
        for r in v.data.chunks(m) {
            for ((e, s), mu) in r.iter().zip(&mut var).zip(&mean) {
                let d = e.f64() - mu;
                *s += d * d;
            }
        }
        var.iter_mut().for_each(|s| *s /= n as f64);
        let mean_t: Vec<T> = mean.iter().map(|&x| T::of(x)).collect();
        let inv_std = var.iter().map(|&s| T::of(1.0 / (s + BN_EPS).sqrt())).collect();
        let out = self.bn_apply(x, gamma, beta, &mean_t, inv_std, true);
        Ok((out, BatchStats { mean, var }))
    }

    /// The frozen affine map `gamma * (x - mean) / sqrt(var + eps) + beta`.
    pub fn batch_norm_eval(&mut self, x: Var, gamma: Var, beta: Var, mean: &[f64], var: &[f64]) -> Result<Var> {
        let m = self.check_bn(x, gamma, beta)?;
        check(mean.len() == m && var.len() == m, "batch_norm", || "running statistics length".into())?;
        let mean_t: Vec<T> = mean.iter().map(|&x| T::of(x)).collect();
        let inv_std = var.iter().map(|&s| T::of(1.0 / (s + BN_EPS).sqrt())).collect();
        Ok(self.bn_apply(x, gamma, beta, &mean_t, inv_std, false))
    }

    /// Elementwise product with a constant mask.
    pub fn mask(&mut self, x: Var, mask: Vec<T>) -> Result<Var> {
        let v = self.value(x);
        check(mask.len() == v.data.len(), "mask", || format!("{} mask values for {:?}", mask.len(), v.shape()))?;
        let out = Tensor {
            rows: v.rows,
            cols: v.cols,
            data: v.data.iter().zip(&mask).map(|(&e, &k)| e * k).collect(),
        };
        let g = self.needs(&[x]);
        Ok(self.push(out, Op::Mask(x, mask), g))
    }

    /// Inverted dropout: zeroes entries with probability `p` and rescales the rest by
    /// `1 / (1 - p)`. The identity when `train` is false or `p` is zero.
    pub fn dropout<R: Rng>(&mut self, x: Var, p: f64, train: bool, rng: &mut R) -> Result<Var> {
        if !train || p <= 0.0 {
            return Ok(x);
        }
        if p >= 1.0 {
            return Err(Error::InvalidArgument(format!("dropout probability {p}")));
        }
        let keep = T::of(1.0 / (1.0 - p));
        let mask = (0..self.value(x).len())
            .map(|_| if rng.random::<f64>() < p { T::zero() } else { keep })
            .collect();
        self.mask(x, mask)
    }

    /// Zeroes whole rows with probability `p`, without rescaling.
    pub fn row_dropout<R: Rng>(&mut self, x: Var, p: f64, rng: &mut R) -> Result<Var> {
        if p <= 0.0 {
            return Ok(x);
        }
        let (n, m) = self.shape(x);
        let mut mask = Vec::with_capacity(n * m);
        for _ in 0..n {
            let k = if rng.random::<f64>() < p { T::zero() } else { T::one() };
            mask.extend(std::iter::repeat_n(k, m));
        }
        self.mask(x, mask)
    }

    pub fn gather_rows(&mut self, x: Var, idx: Vec<u32>) -> Result<Var> {
        let v = self.value(x);
        let (n, m) = v.shape();
        check(idx.iter().all(|&i| (i as usize) < n), "gather_rows", || format!("index out of range for {n} rows"))?;
        let mut data = Vec::with_capacity(idx.len() * m);
        for &i in &idx {
            data.extend_from_slice(v.row(i as usize));
        }
        let out = Tensor {
            rows: idx.len(),
            cols: m,
            data,
        };
        let g = self.needs(&[x]);
        Ok(self.push(out, Op::GatherRows(x, idx), g))
    }

    fn segment_totals(&self, x: Var, seg: &[u32], segments: usize) -> Tensor<T> {
        let v = self.value(x);
        let m = v.cols;
        let mut out = Tensor::zeros(segments, m);
        for (i, &s) in seg.iter().enumerate() {
            let dst = &mut out.data[s as usize * m..(s as usize + 1) * m];
            dst.iter_mut().zip(v.row(i)).for_each(|(d, &e)| *d += e);
        }
        out
    }

    /// Row `s` of the result is the sum of the rows of `x` whose id is `s`, accumulated in
    /// ascending row order.
    pub fn segment_sum(&mut self, x: Var, seg: Vec<u32>, segments: usize) -> Result<Var> {
        let n = self.shape(x).0;
        check(seg.len() == n, "segment_sum", || format!("{} ids for {n} rows", seg.len()))?;
        segment_count(&seg, segments, "segment_sum")?;
        let out = self.segment_totals(x, &seg, segments);
        let g = self.needs(&[x]);
        Ok(self.push(out, Op::SegmentSum(x, seg), g))
    }

    /// Segment sums scaled by the reciprocal member count; empty segments stay zero.
    pub fn segment_mean(&mut self, x: Var, seg: Vec<u32>, segments: usize) -> Result<Var> {
        let n = self.shape(x).0;
        check(seg.len() == n, "segment_mean", || format!("{} ids for {n} rows", seg.len()))?;
        segment_count(&seg, segments, "segment_mean")?;
        let mut counts = vec![0usize; segments];
        seg.iter().for_each(|&s| counts[s as usize] += 1);
        let inv: Vec<T> = counts.iter().map(|&c| if c == 0 { T::zero() } else { T::of(1.0 / c as f64) }).collect();
        let mut out = self.segment_totals(x, &seg, segments);
        let m = out.cols;
        if m > 0 {
            out.data.chunks_mut(m).zip(&inv).for_each(|(r, &k)| r.iter_mut().for_each(|v| *v *= k));
        }
        let g = self.needs(&[x]);
        Ok(self.push(out, Op::SegmentMean(x, seg, inv), g))
    }

    /// Column means as a `1 x m` row.
    pub fn mean_rows(&mut self, x: Var) -> Result<Var> {
        let n = self.shape(x).0;
        check(n > 0, "mean_rows", || "no rows".into())?;
        let mut out = self.segment_totals(x, &vec![0; n], 1);
        let k = T::of(1.0 / n as f64);
        out.data.iter_mut().for_each(|v| *v *= k);
        let g = self.needs(&[x]);
        Ok(self.push(out, Op::MeanRows(x), g))
    }

    pub fn concat_cols(&mut self, xs: &[Var]) -> Result<Var> {
        check(!xs.is_empty(), "concat_cols", || "no inputs".into())?;
        let n = self.shape(xs[0]).0;
        check(xs.iter().all(|&x| self.shape(x).0 == n), "concat_cols", || {
            format!("row counts {:?}", xs.iter().map(|&x| self.shape(x)).collect::<Vec<_>>())
        })?;
        let m: usize = xs.iter().map(|&x| self.shape(x).1).sum();
        let mut data = Vec::with_capacity(n * m);
        for i in 0..n {
            for &x in xs {
                data.extend_from_slice(self.value(x).row(i));
            }
        }
        let g = self.needs(xs);
        Ok(self.push(Tensor { rows: n, cols: m, data }, Op::ConcatCols(xs.to_vec()), g))
    }

    /// Per-row vector-matrix product: `f` is `E x t`, `w` is `E x (t * k)` holding one
    /// row-major `t x k` matrix per row; the result is `E x k`.
    pub fn edge_contract(&mut self, f: Var, w: Var) -> Result<Var> {
        use rayon::prelude::*;
        let ((e, t), (e2, tk)) = (self.shape(f), self.shape(w));
        check(e == e2 && t > 0 && tk % t == 0, "edge_contract", || format!("{e}x{t} with {e2}x{tk}"))?;
        let k = tk / t;
        let (fv, wv) = (&self.value(f).data, &self.value(w).data);
        let mut out = Tensor::zeros(e, k);
        if k > 0 {
            let row = |(r, o): (usize, &mut [T])| {
                let fr = &fv[r * t..(r + 1) * t];
                let wr = &wv[r * tk..(r + 1) * tk];
                for (j, &fj) in fr.iter().enumerate() {
                    for (ov, &wv) in o.iter_mut().zip(&wr[j * k..(j + 1) * k]) {
                        *ov += fj * wv;
                    }
                }
            };
            if e * tk >= 1 << 16 {
                out.data.par_chunks_mut(k).enumerate().for_each(row);
            } else {
                out.data.chunks_mut(k).enumerate().for_each(row);
            }
        }
        let g = self.needs(&[f, w]);
        Ok(self.push(out, Op::EdgeContract { f, w }, g))
    }

    /// Mean (optionally class-weighted) softmax cross-entropy of `logits` (`B x C`).
    pub fn softmax_cross_entropy(&mut self, logits: Var, labels: &[usize], class_weights: Option<&[f64]>) -> Result<Var> {
        let (b, c) = self.shape(logits);
        check(labels.len() == b && b > 0, "softmax_cross_entropy", || format!("{} labels for {b} rows", labels.len()))?;
        check(labels.iter().all(|&l| l < c), "softmax_cross_entropy", || format!("label out of range for {c} classes"))?;
        if let Some(w) = class_weights {
            check(w.len() == c, "softmax_cross_entropy", || format!("{} class weights for {c} classes", w.len()))?;
        }
        let v = self.value(logits);
        let mut probs = Vec::with_capacity(b * c);
        let mut weights = Vec::with_capacity(b);
        let mut loss = 0.0f64;
        let mut total = 0.0f64;
        for (r, &y) in labels.iter().enumerate() {
            let row = v.row(r);
            let mx = row.iter().fold(f64::NEG_INFINITY, |a, &x| a.max(x.f64()));
            let z: f64 = row.iter().map(|&x| (x.f64() - mx).exp()).sum();
            let wy = class_weights.map_or(1.0, |w| w[y]);
            loss += wy * (z.ln() - (row[y].f64() - mx));
            total += wy;
            probs.extend(row.iter().map(|&x| T::of((x.f64() - mx).exp() / z)));
            weights.push(wy);
        }
        let weights = weights.into_iter().map(|w| T::of(w / total)).collect();
        let out = Tensor::scalar(T::of(loss / total));
        let g = self.needs(&[logits]);
        Ok(self.push(
            out,
            Op::SoftmaxCrossEntropy {
                logits,
                labels: labels.to_vec(),
                weights,
                probs,
            },
            g,
        ))
    }

    pub fn sum_squares(&mut self, x: Var) -> Var {
        let s = self.value(x).data.iter().map(|&v| v * v).sum();
        let g = self.needs(&[x]);
        self.push(Tensor::scalar(s), Op::SumSquares(x), g)
    }

    pub fn sum_all(&mut self, x: Var) -> Var {
        let s = self.value(x).data.iter().copied().sum();
        let g = self.needs(&[x]);
        self.push(Tensor::scalar(s), Op::SumAll(x), g)
    }

    /// Reverse sweep from the `1 x 1` value `loss`.
    pub fn backward(&mut self, loss: Var) -> Result<()> {
        check(self.shape(loss) == (1, 1), "backward", || format!("loss has shape {:?}", self.shape(loss)))?;
        let mut grads: Vec<Option<Tensor<T>>> = (0..self.nodes.len()).map(|_| None).collect();
        grads[loss.0] = Some(Tensor::scalar(T::one()));
        for idx in (0..=loss.0).rev() {
            let Some(g) = grads[idx].take() else { continue };
            let node = &self.nodes[idx];
            if node.needs_grad {
                self.propagate(&node.op, &g, &mut grads);
            }
            grads[idx] = Some(g);
        }
        self.grads = grads;
        Ok(())
    }

    fn propagate(&self, op: &Op<T>, g: &Tensor<T>, grads: &mut [Option<Tensor<T>>]) {
        let val = |v: Var| &self.nodes[v.0].value;
        let mut acc = |v: Var, f: &mut dyn FnMut(&mut [T])| {
            if !self.nodes[v.0].needs_grad {
                return;
            }
            let (r, c) = self.nodes[v.0].value.shape();
            let slot = grads[v.0].get_or_insert_with(|| Tensor::zeros(r, c));
            f(&mut slot.data);
        };
        match op {
            Op::Leaf => {}
            Op::MatMul(a, b) => {
                let (av, bv) = (val(*a), val(*b));
                let (n, k, m) = (av.rows, av.cols, bv.cols);
                acc(*a, &mut |d| {
                    let bt = transpose(&bv.data, k, m);
                    let mut tmp = vec![T::zero(); n * k];
                    matmul_into(&g.data, &bt, &mut tmp, m, k);
                    d.iter_mut().zip(tmp).for_each(|(x, y)| *x += y);
                });
                acc(*b, &mut |d| {
                    let at = transpose(&av.data, n, k);
                    let mut tmp = vec![T::zero(); k * m];
                    matmul_into(&at, &g.data, &mut tmp, n, m);
                    d.iter_mut().zip(tmp).for_each(|(x, y)| *x += y);
                });
            }
            Op::Add(a, b) => {
                acc(*a, &mut |d| d.iter_mut().zip(&g.data).for_each(|(x, &y)| *x += y));
                acc(*b, &mut |d| d.iter_mut().zip(&g.data).for_each(|(x, &y)| *x += y));
            }
            Op::AddRow(x, bias) => {
                acc(*x, &mut |d| d.iter_mut().zip(&g.data).for_each(|(x, &y)| *x += y));
                let m = g.cols;
                acc(*bias, &mut |d| {
                    if m > 0 {
                        g.data.chunks(m).for_each(|r| d.iter_mut().zip(r).for_each(|(x, &y)| *x += y));
                    }
                });
            }
            Op::Mul(a, b) => {
                let (av, bv) = (val(*a), val(*b));
                acc(*a, &mut |d| {
                    d.iter_mut().zip(&g.data).zip(&bv.data).for_each(|((x, &gy), &o)| *x += gy * o)
                });
                acc(*b, &mut |d| {
                    d.iter_mut().zip(&g.data).zip(&av.data).for_each(|((x, &gy), &o)| *x += gy * o)
                });
            }
            Op::Scale(x, s) => acc(*x, &mut |d| d.iter_mut().zip(&g.data).for_each(|(x, &y)| *x += y * *s)),
            Op::LeakyRelu(x, s) => {
                let xv = val(*x);
                acc(*x, &mut |d| {
                    for ((dx, &gy), &e) in d.iter_mut().zip(&g.data).zip(&xv.data) {
                        *dx += if e >= T::zero() { gy } else { gy * *s };
                    }
                });
            }
            Op::BatchNorm {
                x,
                gamma,
                beta,
                xhat,
                inv_std,
                train,
            } => {
                let m = g.cols;
                let n = g.rows;
                let gm = &val(*gamma).data;
                acc(*gamma, &mut |d| {
                    for (i, (&gy, &h)) in g.data.iter().zip(xhat).enumerate() {
                        d[i % m] += gy * h;
                    }
                });
                acc(*beta, &mut |d| {
                    for (i, &gy) in g.data.iter().enumerate() {
                        d[i % m] += gy;
                    }
                });
                acc(*x, &mut |d| {
                    if !*train {
                        for (i, (dx, &gy)) in d.iter_mut().zip(&g.data).enumerate() {
                            *dx += gy * gm[i % m] * inv_std[i % m];
                        }
                        return;
                    }
                    let mut s1 = vec![T::zero(); m];
                    let mut s2 = vec![T::zero(); m];
                    for (i, (&gy, &h)) in g.data.iter().zip(xhat).enumerate() {
                        let dh = gy * gm[i % m];
                        s1[i % m] += dh;
                        s2[i % m] += dh * h;
                    }
                    let nn = T::of(n as f64);
                    for (i, (dx, (&gy, &h))) in d.iter_mut().zip(g.data.iter().zip(xhat)).enumerate() {
                        let j = i % m;
                        let dh = gy * gm[j];
                        *dx += inv_std[j] / nn * (nn * dh - s1[j] - h * s2[j]);
                    }
                });
            }
            Op::Mask(x, mask) => {
                acc(*x, &mut |d| d.iter_mut().zip(&g.data).zip(mask).for_each(|((x, &y), &k)| *x += y * k))
            }
            Op::GatherRows(x, idx) => {
                let m = g.cols;
                acc(*x, &mut |d| {
                    for (r, &i) in idx.iter().enumerate() {
                        let i = i as usize;
                        d[i * m..(i + 1) * m].iter_mut().zip(g.row(r)).for_each(|(x, &y)| *x += y);
                    }
                });
            }
            Op::SegmentSum(x, seg) => {
                let m = g.cols;
                acc(*x, &mut |d| {
                    for (i, &s) in seg.iter().enumerate() {
                        d[i * m..(i + 1) * m].iter_mut().zip(g.row(s as usize)).for_each(|(x, &y)| *x += y);
                    }
                });
            }
            Op::SegmentMean(x, seg, inv) => {
                let m = g.cols;
                acc(*x, &mut |d| {
                    for (i, &s) in seg.iter().enumerate() {
                        let k = inv[s as usize];
                        d[i * m..(i + 1) * m]
                            .iter_mut()
                            .zip(g.row(s as usize))
                            .for_each(|(x, &y)| *x += y * k);
                    }
                });
            }
            Op::MeanRows(x) => {
                let n = val(*x).rows;
                let k = T::of(1.0 / n as f64);
                let m = g.cols;
                acc(*x, &mut |d| {
                    if m > 0 {
                        d.chunks_mut(m).for_each(|r| r.iter_mut().zip(&g.data).for_each(|(x, &y)| *x += y * k));
                    }
                });
            }
            Op::ConcatCols(xs) => {
                let mut off = 0;
                let total = g.cols;
                for &x in xs {
                    let w = val(x).cols;
                    acc(x, &mut |d| {
                        for (r, dr) in d.chunks_mut(w.max(1)).enumerate().take(g.rows) {
                            dr.iter_mut()
                                .zip(&g.data[r * total + off..r * total + off + w])
                                .for_each(|(x, &y)| *x += y);
                        }
                    });
                    off += w;
                }
            }
            Op::EdgeContract { f, w } => {
                let (fv, wv) = (val(*f), val(*w));
                let (t, k) = (fv.cols, g.cols);
                let tk = t * k;
                acc(*f, &mut |d| {
                    for r in 0..g.rows {
                        let gr = g.row(r);
                        for j in 0..t {
                            let wr = &wv.data[r * tk + j * k..r * tk + (j + 1) * k];
                            d[r * t + j] += wr.iter().zip(gr).map(|(&a, &b)| a * b).sum::<T>();
                        }
                    }
                });
                acc(*w, &mut |d| {
                    for r in 0..g.rows {
                        let gr = g.row(r);
                        for j in 0..t {
                            let fj = fv.data[r * t + j];
                            d[r * tk + j * k..r * tk + (j + 1) * k]
                                .iter_mut()
                                .zip(gr)
                                .for_each(|(x, &y)| *x += fj * y);
                        }
                    }
                });
            }
            Op::SoftmaxCrossEntropy {
                logits,
                labels,
                weights,
                probs,
            } => {
                let c = val(*logits).cols;
                let go = g.data[0];
                acc(*logits, &mut |d| {
                    for (r, (&y, &w)) in labels.iter().zip(weights).enumerate() {
                        for j in 0..c {
                            let target = if j == y { T::one() } else { T::zero() };
                            d[r * c + j] += go * w * (probs[r * c + j] - target);
                        }
                    }
                });
            }
            Op::SumSquares(x) => {
                let xv = val(*x);
                let go = g.data[0] + g.data[0];
                acc(*x, &mut |d| d.iter_mut().zip(&xv.data).for_each(|(x, &e)| *x += go * e));
            }
            Op::SumAll(x) => {
                let go = g.data[0];
                acc(*x, &mut |d| d.iter_mut().for_each(|x| *x += go));
            }
        }
    }
}

fn transpose<T: Real>(a: &[T], rows: usize, cols: usize) -> Vec<T> {
    let mut out = vec![T::zero(); a.len()];
    for i in 0..rows {
        for j in 0..cols {
            out[j * rows + i] = a[i * cols + j];
        }
    }
    out
}
