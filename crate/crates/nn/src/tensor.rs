//! Dense row-major tensors with a dynamically built reverse-mode graph.

use std::cell::RefCell;
use std::cmp::Reverse;
use std::collections::{HashMap, HashSet};
use std::fmt;
use std::rc::Rc;
use std::sync::atomic::{AtomicUsize, Ordering};

use eoattn_core::activation::Nonlinearity;
use eoattn_core::Scalar;
use rand::{Rng, RngCore};

use crate::error::{shape_err, Error, Result};

static NEXT_ID: AtomicUsize = AtomicUsize::new(0);

/// Maps the output gradient to one gradient per parent, in parent order.
type BackwardFn<T> = Box<dyn Fn(&[T]) -> Vec<Vec<T>>>;

struct Node<T> {
    id: usize,
    shape: Vec<usize>,
    data: Vec<T>,
    requires_grad: bool,
    grad: RefCell<Option<Vec<T>>>,
    parents: Vec<Tensor<T>>,
    backward: Option<BackwardFn<T>>,
}

#[derive(Clone)]
pub struct Tensor<T>(Rc<Node<T>>);

impl<T: Scalar> fmt::Debug for Tensor<T> {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("Tensor")
            .field("shape", &self.0.shape)
            .field("requires_grad", &self.0.requires_grad)
            .finish()
    }
}

fn numel(shape: &[usize]) -> usize {
    shape.iter().product()
}

/// How the attention nonlinearity is evaluated in the forward pass.
pub enum ActMode<'a> {
    /// Quantized hardware model, noisy when the nonlinearity carries noise.
    Hardware(Option<&'a mut dyn RngCore>),
    /// Smooth surrogate (what the backward pass differentiates).
    Surrogate,
}

/// Shortens the borrow of an optional random source for one call.
pub fn reborrow<'s>(rng: &'s mut Option<&mut dyn RngCore>) -> Option<&'s mut dyn RngCore> {
    match rng {
        Some(r) => Some(&mut **r),
        None => None,
    }
}

impl<T: Scalar> Tensor<T> {
    fn make(
        shape: Vec<usize>,
        data: Vec<T>,
        requires_grad: bool,
        parents: Vec<Tensor<T>>,
        backward: Option<BackwardFn<T>>,
    ) -> Self {
        debug_assert_eq!(numel(&shape), data.len());
        Tensor(Rc::new(Node {
            id: NEXT_ID.fetch_add(1, Ordering::Relaxed),
            shape,
            data,
            requires_grad,
            grad: RefCell::new(None),
            parents,
            backward,
        }))
    }

    fn from_op(
        shape: Vec<usize>,
        data: Vec<T>,
        parents: &[&Tensor<T>],
        backward: impl Fn(&[T]) -> Vec<Vec<T>> + 'static,
    ) -> Self {
        if parents.iter().any(|p| p.requires_grad()) {
            let parents = parents.iter().map(|&p| p.clone()).collect();
            Self::make(shape, data, true, parents, Some(Box::new(backward)))
        } else {
            Self::make(shape, data, false, Vec::new(), None)
        }
    }

    pub fn new(shape: &[usize], data: Vec<T>) -> Result<Self> {
        if numel(shape) != data.len() {
            return Err(shape_err(format!(
                "shape {shape:?} needs {} values, got {}",
                numel(shape),
                data.len()
            )));
        }
        Ok(Self::make(shape.to_vec(), data, false, Vec::new(), None))
    }

    /// Leaf whose gradient is retained by [`Tensor::backward`].
    pub fn param(shape: &[usize], data: Vec<T>) -> Result<Self> {
        if numel(shape) != data.len() {
            return Err(shape_err(format!(
                "shape {shape:?} needs {} values, got {}",
                numel(shape),
                data.len()
            )));
        }
        Ok(Self::make(shape.to_vec(), data, true, Vec::new(), None))
    }

    pub fn scalar(v: T) -> Self {
        Self::make(vec![], vec![v], false, Vec::new(), None)
    }

    pub fn zeros(shape: &[usize]) -> Self {
        Self::make(
            shape.to_vec(),
            vec![T::zero(); numel(shape)],
            false,
            Vec::new(),
            None,
        )
    }

    pub fn shape(&self) -> &[usize] {
        &self.0.shape
    }

    pub fn data(&self) -> &[T] {
        &self.0.data
    }

    pub fn len(&self) -> usize {
        self.0.data.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.data.is_empty()
    }

    pub fn requires_grad(&self) -> bool {
        self.0.requires_grad
    }

    /// Value of a one-element tensor.
    pub fn item(&self) -> T {
        self.0.data[0]
    }

    pub fn grad(&self) -> Option<Vec<T>> {
        self.0.grad.borrow().clone()
    }

    pub fn detach(&self) -> Self {
        Self::make(
            self.0.shape.clone(),
            self.0.data.clone(),
            false,
            Vec::new(),
            None,
        )
    }

    /// Accumulates `d(sum of self)/d(leaf)` into every reachable parameter.
    pub fn backward(&self) {
        if !self.requires_grad() {
            return;
        }
        let mut order = Vec::new();
        let mut seen = HashSet::new();
        let mut stack = vec![self.clone()];
        while let Some(t) = stack.pop() {
            if seen.insert(t.0.id) {
                stack.extend(t.0.parents.iter().filter(|p| p.requires_grad()).cloned());
                order.push(t);
            }
        }
        // children are always created after their parents
        order.sort_by_key(|t| Reverse(t.0.id));

        let mut grads: HashMap<usize, Vec<T>> = HashMap::new();
        grads.insert(self.0.id, vec![T::one(); self.len()]);
        for t in order {
            let Some(g) = grads.remove(&t.0.id) else {
                continue;
            };
            match &t.0.backward {
                Some(bw) => {
                    for (p, pg) in t.0.parents.iter().zip(bw(&g)) {
                        if !p.requires_grad() {
                            continue;
                        }
                        match grads.get_mut(&p.0.id) {
                            Some(acc) => acc.iter_mut().zip(&pg).for_each(|(a, &b)| *a = *a + b),
                            None => {
                                grads.insert(p.0.id, pg);
                            }
                        }
                    }
                }
                None => {
                    let mut slot = t.0.grad.borrow_mut();
                    match slot.as_mut() {
                        Some(acc) => acc.iter_mut().zip(&g).for_each(|(a, &b)| *a = *a + b),
                        None => *slot = Some(g),
                    }
                }
            }
        }
    }

    pub fn zero_grad(&self) {
        *self.0.grad.borrow_mut() = None;
    }

    fn same_shape(&self, other: &Self, op: &str) -> Result<()> {
        if self.shape() != other.shape() {
            return Err(shape_err(format!(
                "{op}: {:?} vs {:?}",
                self.shape(),
                other.shape()
            )));
        }
        Ok(())
    }

    pub fn add(&self, other: &Self) -> Result<Self> {
        self.same_shape(other, "add")?;
        let data = self
            .data()
            .iter()
            .zip(other.data())
            .map(|(&a, &b)| a + b)
            .collect();
        Ok(Self::from_op(
            self.shape().to_vec(),
            data,
            &[self, other],
            |g| vec![g.to_vec(), g.to_vec()],
        ))
    }

    pub fn sub(&self, other: &Self) -> Result<Self> {
        self.same_shape(other, "sub")?;
        let data = self
            .data()
            .iter()
            .zip(other.data())
            .map(|(&a, &b)| a - b)
            .collect();
        Ok(Self::from_op(
            self.shape().to_vec(),
            data,
            &[self, other],
            |g| vec![g.to_vec(), g.iter().map(|&v| -v).collect()],
        ))
    }

    pub fn mul(&self, other: &Self) -> Result<Self> {
        self.same_shape(other, "mul")?;
        let (a, b) = (self.data().to_vec(), other.data().to_vec());
        let data = a.iter().zip(&b).map(|(&x, &y)| x * y).collect();
        Ok(Self::from_op(
            self.shape().to_vec(),
            data,
            &[self, other],
            move |g| {
                vec![
                    g.iter().zip(&b).map(|(&gi, &y)| gi * y).collect(),
                    g.iter().zip(&a).map(|(&gi, &x)| gi * x).collect(),
                ]
            },
        ))
    }

    /// `self + bias`, where `bias.shape()` is a suffix of `self.shape()`.
    pub fn add_broadcast(&self, bias: &Self) -> Result<Self> {
        let (s, b) = (self.shape(), bias.shape());
        if b.len() > s.len() || s[s.len() - b.len()..] != *b {
            return Err(shape_err(format!(
                "add_broadcast: {b:?} is not a suffix of {s:?}"
            )));
        }
        let m = bias.len().max(1);
        let data = self
            .data()
            .iter()
            .enumerate()
            .map(|(i, &v)| v + bias.data()[i % m])
            .collect();
        Ok(Self::from_op(s.to_vec(), data, &[self, bias], move |g| {
            let mut gb = vec![T::zero(); m];
            for (i, &v) in g.iter().enumerate() {
                gb[i % m] = gb[i % m] + v;
            }
            vec![g.to_vec(), gb]
        }))
    }

    pub fn scale(&self, s: T) -> Self {
        let data = self.data().iter().map(|&v| v * s).collect();
        Self::from_op(self.shape().to_vec(), data, &[self], move |g| {
            vec![g.iter().map(|&v| v * s).collect()]
        })
    }

    pub fn sum(&self) -> Self {
        let total: T = self.data().iter().copied().sum();
        let n = self.len();
        Self::from_op(vec![], vec![total], &[self], move |g| vec![vec![g[0]; n]])
    }

    pub fn mean(&self) -> Self {
        let n = T::from_usize_lossy(self.len());
        self.sum().scale(T::one() / n)
    }

    /// Weighted sum `Σ w_i x_i` with constant weights.
    pub fn dot_const(&self, w: &[T]) -> Result<Self> {
        if w.len() != self.len() {
            return Err(shape_err(format!(
                "dot_const: {} weights for {} values",
                w.len(),
                self.len()
            )));
        }
        let w = w.to_vec();
        let v: T = self.data().iter().zip(&w).map(|(&a, &b)| a * b).sum();
        Ok(Self::from_op(vec![], vec![v], &[self], move |g| {
            vec![w.iter().map(|&b| b * g[0]).collect()]
        }))
    }

    pub fn reshape(&self, shape: &[usize]) -> Result<Self> {
        if numel(shape) != self.len() {
            return Err(shape_err(format!(
                "reshape {:?} -> {shape:?}",
                self.shape()
            )));
        }
        Ok(Self::from_op(
            shape.to_vec(),
            self.data().to_vec(),
            &[self],
            |g| vec![g.to_vec()],
        ))
    }

    /// Reorders axes: output axis `i` is input axis `axes[i]`.
    pub fn permute(&self, axes: &[usize]) -> Result<Self> {
        let shape = self.shape();
        let rank = shape.len();
        let mut check = axes.to_vec();
        check.sort_unstable();
        if check != (0..rank).collect::<Vec<_>>() {
            return Err(shape_err(format!(
                "permute: {axes:?} is not a permutation of rank {rank}"
            )));
        }
        let out_shape: Vec<usize> = axes.iter().map(|&a| shape[a]).collect();
        let in_strides = strides(shape);
        let out_strides = strides(&out_shape);
        // index map: out position -> in position
        let map: Vec<usize> = (0..self.len())
            .map(|o| {
                let mut rem = o;
                let mut src = 0;
                for (d, &os) in out_strides.iter().enumerate() {
                    let idx = rem / os;
                    rem %= os;
                    src += idx * in_strides[axes[d]];
                }
                src
            })
            .collect();
        let data = map.iter().map(|&i| self.data()[i]).collect();
        let n = self.len();
        Ok(Self::from_op(out_shape, data, &[self], move |g| {
            let mut gi = vec![T::zero(); n];
            for (o, &i) in map.iter().enumerate() {
                gi[i] = g[o];
            }
            vec![gi]
        }))
    }

    /// Swaps the last two axes.
    pub fn transpose(&self) -> Result<Self> {
        let r = self.shape().len();
        if r < 2 {
            return Err(shape_err("transpose needs rank >= 2"));
        }
        let mut axes: Vec<usize> = (0..r).collect();
        axes.swap(r - 1, r - 2);
        self.permute(&axes)
    }

    /// `[..., m, k] × [..., k, n]`; `other` may also be a plain `[k, n]`
    /// matrix shared across the batch.
    pub fn matmul(&self, other: &Self) -> Result<Self> {
        let (a, b) = (self.shape(), other.shape());
        if a.len() < 2 || b.len() < 2 {
            return Err(shape_err(format!("matmul: {a:?} x {b:?}")));
        }
        let (m, k) = (a[a.len() - 2], a[a.len() - 1]);
        let (k2, n) = (b[b.len() - 2], b[b.len() - 1]);
        let batch_a = &a[..a.len() - 2];
        let batch_b = &b[..b.len() - 2];
        let shared = batch_b.is_empty();
        if k != k2 || (!shared && batch_a != batch_b) {
            return Err(shape_err(format!("matmul: {a:?} x {b:?}")));
        }
        let batches = numel(batch_a);
        let mut out_shape = batch_a.to_vec();
        out_shape.extend([m, n]);
        let (av, bv) = (self.data().to_vec(), other.data().to_vec());
        let mut data = vec![T::zero(); batches * m * n];
        for bi in 0..batches {
            let boff = if shared { 0 } else { bi * k * n };
            mm(
                &av[bi * m * k..],
                &bv[boff..],
                m,
                k,
                n,
                &mut data[bi * m * n..(bi + 1) * m * n],
            );
        }
        Ok(Self::from_op(out_shape, data, &[self, other], move |g| {
            let mut ga = vec![T::zero(); av.len()];
            let mut gb = vec![T::zero(); bv.len()];
            for bi in 0..batches {
                let gs = &g[bi * m * n..(bi + 1) * m * n];
                let boff = if shared { 0 } else { bi * k * n };
                // ga = g · bᵀ
                for i in 0..m {
                    for p in 0..k {
                        let mut acc = T::zero();
                        for j in 0..n {
                            acc = acc + gs[i * n + j] * bv[boff + p * n + j];
                        }
                        ga[bi * m * k + i * k + p] = acc;
                    }
                }
                // gb += aᵀ · g
                for i in 0..m {
                    for p in 0..k {
                        let x = av[bi * m * k + i * k + p];
                        if x == T::zero() {
                            continue;
                        }
                        let row = &mut gb[boff + p * n..boff + (p + 1) * n];
                        for j in 0..n {
                            row[j] = row[j] + x * gs[i * n + j];
                        }
                    }
                }
            }
            vec![ga, gb]
        }))
    }

    pub fn relu(&self) -> Self {
        let x = self.data().to_vec();
        let data = x.iter().map(|&v| v.max(T::zero())).collect();
        Self::from_op(self.shape().to_vec(), data, &[self], move |g| {
            vec![g
                .iter()
                .zip(&x)
                .map(|(&gi, &v)| if v > T::zero() { gi } else { T::zero() })
                .collect()]
        })
    }

    /// Tanh approximation of GELU.
    pub fn gelu(&self) -> Self {
        let x = self.data().to_vec();
        let c = T::lit((2.0 / std::f64::consts::PI).sqrt());
        let k = T::lit(0.044715);
        let half = T::lit(0.5);
        let three = T::lit(3.0);
        let data = x
            .iter()
            .map(|&v| half * v * (T::one() + (c * (v + k * v * v * v)).tanh()))
            .collect();
        Self::from_op(self.shape().to_vec(), data, &[self], move |g| {
            vec![g
                .iter()
                .zip(&x)
                .map(|(&gi, &v)| {
                    let t = (c * (v + k * v * v * v)).tanh();
                    let dt = (T::one() - t * t) * c * (T::one() + three * k * v * v);
                    gi * (half * (T::one() + t) + half * v * dt)
                })
                .collect()]
        })
    }

    /// Normalizes over the last axis, then applies `gamma`, `beta`.
    pub fn layer_norm(&self, gamma: &Self, beta: &Self, eps: T) -> Result<Self> {
        let d = *self
            .shape()
            .last()
            .ok_or_else(|| shape_err("layer_norm on a scalar"))?;
        if gamma.shape() != [d] || beta.shape() != [d] {
            return Err(shape_err(format!(
                "layer_norm: gamma {:?}, beta {:?}, features {d}",
                gamma.shape(),
                beta.shape()
            )));
        }
        let rows = self.len() / d;
        let dn = T::from_usize_lossy(d);
        let mut xhat = vec![T::zero(); self.len()];
        let mut inv_std = vec![T::zero(); rows];
        for r in 0..rows {
            let row = &self.data()[r * d..(r + 1) * d];
            let mu = row.iter().copied().sum::<T>() / dn;
            let var = row.iter().map(|&v| (v - mu) * (v - mu)).sum::<T>() / dn;
            let is = (var + eps).sqrt().recip();
            inv_std[r] = is;
            for j in 0..d {
                xhat[r * d + j] = (row[j] - mu) * is;
            }
        }
        let gm = gamma.data().to_vec();
        let data = xhat
            .iter()
            .enumerate()
            .map(|(i, &h)| h * gm[i % d] + beta.data()[i % d])
            .collect();
        Ok(Self::from_op(
            self.shape().to_vec(),
            data,
            &[self, gamma, beta],
            move |g| {
                let mut gx = vec![T::zero(); xhat.len()];
                let mut gg = vec![T::zero(); d];
                let mut gbeta = vec![T::zero(); d];
                for r in 0..rows {
                    let gs = &g[r * d..(r + 1) * d];
                    let hs = &xhat[r * d..(r + 1) * d];
                    let mut m1 = T::zero();
                    let mut m2 = T::zero();
                    for j in 0..d {
                        let dh = gs[j] * gm[j];
                        m1 = m1 + dh;
                        m2 = m2 + dh * hs[j];
                        gg[j] = gg[j] + gs[j] * hs[j];
                        gbeta[j] = gbeta[j] + gs[j];
                    }
                    m1 = m1 / dn;
                    m2 = m2 / dn;
                    for j in 0..d {
                        gx[r * d + j] = inv_std[r] * (gs[j] * gm[j] - m1 - hs[j] * m2);
                    }
                }
                vec![gx, gg, gbeta]
            },
        ))
    }

    /// Mean over `axis`, which is removed from the shape.
    pub fn mean_axis(&self, axis: usize) -> Result<Self> {
        let shape = self.shape();
        if axis >= shape.len() {
            return Err(shape_err(format!("mean_axis {axis} on {shape:?}")));
        }
        let outer: usize = shape[..axis].iter().product();
        let len = shape[axis];
        let inner: usize = shape[axis + 1..].iter().product();
        let mut out_shape = shape.to_vec();
        out_shape.remove(axis);
        let inv = T::one() / T::from_usize_lossy(len);
        let mut data = vec![T::zero(); outer * inner];
        for o in 0..outer {
            for l in 0..len {
                for i in 0..inner {
                    let v = self.data()[(o * len + l) * inner + i];
                    data[o * inner + i] = data[o * inner + i] + v;
                }
            }
        }
        data.iter_mut().for_each(|v| *v = *v * inv);
        let n = self.len();
        Ok(Self::from_op(out_shape, data, &[self], move |g| {
            let mut gi = vec![T::zero(); n];
            for o in 0..outer {
                for l in 0..len {
                    for i in 0..inner {
                        gi[(o * len + l) * inner + i] = g[o * inner + i] * inv;
                    }
                }
            }
            vec![gi]
        }))
    }

    /// Rows `idx` of a `[vocab, d]` table, shaped `[idx.len(), d]`.
    pub fn gather_rows(&self, idx: &[usize]) -> Result<Self> {
        let [v, d] = *self.shape() else {
            return Err(shape_err(format!("gather_rows on {:?}", self.shape())));
        };
        if let Some(&bad) = idx.iter().find(|&&i| i >= v) {
            return Err(Error::IndexOutOfRange {
                index: bad,
                bound: v,
            });
        }
        let data = idx
            .iter()
            .flat_map(|&i| self.data()[i * d..(i + 1) * d].iter().copied())
            .collect();
        let idx = idx.to_vec();
        let n = self.len();
        Ok(Self::from_op(vec![idx.len(), d], data, &[self], move |g| {
            let mut gt = vec![T::zero(); n];
            for (r, &i) in idx.iter().enumerate() {
                for j in 0..d {
                    gt[i * d + j] = gt[i * d + j] + g[r * d + j];
                }
            }
            vec![gt]
        }))
    }

    /// Inverted dropout; identity when `p == 0`.
    pub fn dropout(&self, p: f64, rng: &mut dyn RngCore) -> Self {
        if p <= 0.0 {
            return self.clone();
        }
        let keep = T::lit(1.0 / (1.0 - p));
        let mask: Vec<T> = (0..self.len())
            .map(|_| {
                if rng.random::<f64>() < p {
                    T::zero()
                } else {
                    keep
                }
            })
            .collect();
        let data = self
            .data()
            .iter()
            .zip(&mask)
            .map(|(&v, &m)| v * m)
            .collect();
        Self::from_op(self.shape().to_vec(), data, &[self], move |g| {
            vec![g.iter().zip(&mask).map(|(&gi, &m)| gi * m).collect()]
        })
    }

    /// Applies `nl` to every row of the last axis. With `causal`, row `i`
    /// of each trailing `[n, n]` block only sees its first `i + 1` entries;
    /// the rest are 0.
    pub fn activation(
        &self,
        nl: &Nonlinearity<T>,
        causal: bool,
        mode: ActMode<'_>,
    ) -> Result<Self> {
        let shape = self.shape();
        let cols = *shape
            .last()
            .ok_or_else(|| shape_err("activation on a scalar"))?;
        let rows_per_block = if shape.len() >= 2 {
            shape[shape.len() - 2]
        } else {
            1
        };
        let rows = self.len() / cols.max(1);
        let valid = move |r: usize| {
            if causal {
                (r % rows_per_block + 1).min(cols)
            } else {
                cols
            }
        };
        let x = self.data().to_vec();
        let mut data = Vec::with_capacity(x.len());
        match mode {
            ActMode::Hardware(mut rng) => {
                for r in 0..rows {
                    let row = &x[r * cols..(r + 1) * cols];
                    data.extend(nl.forward_row(row, valid(r), reborrow(&mut rng))?);
                }
            }
            ActMode::Surrogate => {
                for r in 0..rows {
                    data.extend(nl.surrogate_row(&x[r * cols..(r + 1) * cols], valid(r)));
                }
            }
        }
        let nl = *nl;
        Ok(Self::from_op(shape.to_vec(), data, &[self], move |g| {
            let mut gx = Vec::with_capacity(x.len());
            for r in 0..rows {
                let span = r * cols..(r + 1) * cols;
                gx.extend(nl.vjp_row(&x[span.clone()], valid(r), &g[span]));
            }
            vec![gx]
        }))
    }

    /// Mean negative log-likelihood of `targets` under the row-wise softmax
    /// of `[positions, classes]` logits.
    pub fn cross_entropy(&self, targets: &[usize]) -> Result<Self> {
        let [p, c] = *self.shape() else {
            return Err(shape_err(format!(
                "cross_entropy expects [positions, classes], got {:?}",
                self.shape()
            )));
        };
        if targets.len() != p {
            return Err(shape_err(format!(
                "cross_entropy: {} targets for {p} positions",
                targets.len()
            )));
        }
        if let Some(&bad) = targets.iter().find(|&&t| t >= c) {
            return Err(Error::IndexOutOfRange {
                index: bad,
                bound: c,
            });
        }
        let mut probs = vec![T::zero(); p * c];
        let mut loss = T::zero();
        for r in 0..p {
            let row = &self.data()[r * c..(r + 1) * c];
            let m = row.iter().fold(T::neg_infinity(), |a, &b| a.max(b));
            let lse = row.iter().map(|&v| (v - m).exp()).sum::<T>().ln() + m;
            for j in 0..c {
                probs[r * c + j] = (row[j] - lse).exp();
            }
            loss = loss + lse - row[targets[r]];
        }
        let pn = T::from_usize_lossy(p);
        let targets = targets.to_vec();
        Ok(Self::from_op(vec![], vec![loss / pn], &[self], move |g| {
            let s = g[0] / pn;
            let mut gl: Vec<T> = probs.iter().map(|&q| q * s).collect();
            for (r, &t) in targets.iter().enumerate() {
                gl[r * c + t] = gl[r * c + t] - s;
            }
            vec![gl]
        }))
    }
}

fn strides(shape: &[usize]) -> Vec<usize> {
    let mut s = vec![1; shape.len()];
    for i in (0..shape.len().saturating_sub(1)).rev() {
        s[i] = s[i + 1] * shape[i + 1];
    }
    s
}

/// `out = a · b` for row-major `m×k` and `k×n` blocks.
fn mm<T: Scalar>(a: &[T], b: &[T], m: usize, k: usize, n: usize, out: &mut [T]) {
    for i in 0..m {
        let orow = &mut out[i * n..(i + 1) * n];
        for p in 0..k {
            let x = a[i * k + p];
            if x == T::zero() {
                continue;
            }
            let brow = &b[p * n..(p + 1) * n];
            for j in 0..n {
                orow[j] = orow[j] + x * brow[j];
            }
        }
    }
}

/// Mean negative log-likelihood without building a graph.
pub fn nll_loss<T: Scalar>(logits: &Tensor<T>, targets: &[usize]) -> Result<T> {
    Ok(logits.detach().cross_entropy(targets)?.item())
}

#[cfg(test)]
mod tests {
    use super::*;

    fn t(shape: &[usize], v: &[f64]) -> Tensor<f64> {
        Tensor::param(shape, v.to_vec()).unwrap()
    }

    #[test]
    fn matmul_values_and_grads() {
        let a = t(&[2, 3], &[1.0, 2.0, 3.0, 4.0, 5.0, 6.0]);
        let b = t(&[3, 2], &[7.0, 8.0, 9.0, 10.0, 11.0, 12.0]);
        let c = a.matmul(&b).unwrap();
        assert_eq!(c.data(), &[58.0, 64.0, 139.0, 154.0]);
        c.sum().backward();
        assert_eq!(a.grad().unwrap(), vec![15.0, 19.0, 23.0, 15.0, 19.0, 23.0]);
        assert_eq!(b.grad().unwrap(), vec![5.0, 5.0, 7.0, 7.0, 9.0, 9.0]);
    }

    #[test]
    fn permute_round_trip() {
        let x = t(&[2, 3, 4], &(0..24).map(f64::from).collect::<Vec<_>>());
        let y = x.permute(&[2, 0, 1]).unwrap();
        assert_eq!(y.shape(), &[4, 2, 3]);
        assert_eq!(y.data()[1], 4.0);
        let z = y.permute(&[1, 2, 0]).unwrap();
        assert_eq!(z.data(), x.data());
    }

    #[test]
    fn shared_subexpression_accumulates() {
        let x = t(&[2], &[3.0, -1.0]);
        let y = x.mul(&x).unwrap().add(&x).unwrap().sum();
        y.backward();
        assert_eq!(x.grad().unwrap(), vec![7.0, -1.0]);
    }

    #[test]
    fn shape_errors() {
        let a = t(&[2, 3], &[0.0; 6]);
        let b = t(&[2, 3], &[0.0; 6]);
        assert!(matches!(a.matmul(&b), Err(Error::ShapeMismatch(_))));
        assert!(a.add(&b.reshape(&[3, 2]).unwrap()).is_err());
        assert!(a.cross_entropy(&[0, 3]).is_err());
    }

    #[test]
    fn nll_uniform_and_margin() {
        let v = 50257;
        let logits = Tensor::new(&[1, v], vec![0.0f64; v]).unwrap();
        assert!((nll_loss(&logits, &[123]).unwrap() - (v as f64).ln()).abs() < 1e-3);
        let mut row = vec![0.0; 10];
        row[4] = 20.0;
        let logits = Tensor::new(&[1, 10], row).unwrap();
        assert!(nll_loss(&logits, &[4]).unwrap() < 1e-4);
    }
}
