use crate::real::{lit, Real};

use super::conv::{conv2d_backward, conv2d_forward, ConvGeometry};
use super::{AutodiffError, Tensor};

/// Handle to a value recorded on a [`Tape`].
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub struct Var(usize);

impl Var {
    pub fn index(self) -> usize {
        self.0
    }
}

/// Elementwise nonlinearities.
#[derive(Clone, Copy, Debug, PartialEq)]
pub enum Activation {
    Relu,
    LeakyRelu(f64),
    Sigmoid,
}

enum Op<T> {
    Leaf,
    Conv2d { input: Var, kernel: Var, bias: Option<Var>, geom: ConvGeometry },
    InstanceNorm { input: Var, gain: Var, shift: Var, normalized: Vec<T>, inv_std: Vec<T> },
    Upsample2x { input: Var },
    AvgPool2x { input: Var },
    Activation { input: Var, kind: Activation },
    Add { a: Var, b: Var },
    Sub { a: Var, b: Var },
    Mul { a: Var, b: Var },
    Scale { input: Var, factor: T },
    PowerMix { a: Var, b: Var, exponent: T },
    MeanAbs { input: Var },
    MeanSquare { input: Var, target: T },
    Sum { input: Var },
    Combine { terms: Vec<(Var, T)> },
}

impl<T> Op<T> {
    fn name(&self) -> &'static str {
        match self {
            Op::Leaf => "leaf",
            Op::Conv2d { .. } => "conv2d",
            Op::InstanceNorm { .. } => "instance_norm",
            Op::Upsample2x { .. } => "upsample2x",
            Op::AvgPool2x { .. } => "avg_pool2x",
            Op::Activation { .. } => "activation",
            Op::Add { .. } => "add",
            Op::Sub { .. } => "sub",
            Op::Mul { .. } => "mul",
            Op::Scale { .. } => "scale",
            Op::PowerMix { .. } => "power_mix",
            Op::MeanAbs { .. } => "mean_abs",
            Op::MeanSquare { .. } => "mean_square",
            Op::Sum { .. } => "sum",
            Op::Combine { .. } => "combine",
        }
    }
}

struct Node<T> {
    value: Tensor<T>,
    requires_grad: bool,
    op: Op<T>,
}

/// Gradients produced by [`Tape::backward`], indexed by [`Var`].
#[derive(Debug)]
pub struct Gradients<T> {
    grads: Vec<Option<Tensor<T>>>,
    shapes: Vec<Vec<usize>>,
}

impl<T: Real> Gradients<T> {
    /// Gradient of the loss with respect to `var`, `None` if the loss does not reach it.
    pub fn get(&self, var: Var) -> Option<&Tensor<T>> {
        self.grads.get(var.0).and_then(|g| g.as_ref())
    }

    /// Gradient with respect to `var`; zeros when the loss does not reach it.
    pub fn wrt(&self, var: Var) -> Tensor<T> {
        self.get(var).cloned().unwrap_or_else(|| Tensor::zeros(&self.shapes[var.0]))
    }

    pub fn take(&mut self, var: Var) -> Tensor<T> {
        self.grads[var.0].take().unwrap_or_else(|| Tensor::zeros(&self.shapes[var.0]))
    }
}

/// Wengert list of the operations of one forward pass.
///
/// Values are stored in recording order, so every operation's inputs precede it
/// and a reverse sweep is a valid topological traversal. A tape supports a
/// single backward pass; a second call returns
/// [`AutodiffError::BackwardAlreadyRun`].
pub struct Tape<T> {
    nodes: Vec<Node<T>>,
    check_finite: bool,
    backward_done: bool,
}

impl<T: Real> Default for Tape<T> {
    fn default() -> Self {
        Self::new()
    }
}

impl<T: Real> Tape<T> {
    pub fn new() -> Self {
        Tape { nodes: Vec::new(), check_finite: false, backward_done: false }
    }

    /// Tape that rejects any operation producing NaN or infinity.
    pub fn with_finite_checks() -> Self {
        Tape { check_finite: true, ..Self::new() }
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    pub fn value(&self, var: Var) -> &Tensor<T> {
        &self.nodes[var.0].value
    }

    pub fn requires_grad(&self, var: Var) -> bool {
        self.nodes[var.0].requires_grad
    }

    pub fn leaf(&mut self, value: Tensor<T>, requires_grad: bool) -> Var {
        self.nodes.push(Node { value, requires_grad, op: Op::Leaf });
        Var(self.nodes.len() - 1)
    }

    pub fn constant(&mut self, value: Tensor<T>) -> Var {
        self.leaf(value, false)
    }

    pub fn param(&mut self, value: Tensor<T>) -> Var {
        self.leaf(value, true)
    }

    /// Copy of `var`'s value that gradients do not flow through.
    pub fn detach(&mut self, var: Var) -> Var {
        let value = self.value(var).clone();
        self.constant(value)
    }

    fn push(&mut self, value: Tensor<T>, op: Op<T>, inputs: &[Var]) -> Result<Var, AutodiffError> {
        if self.check_finite && !value.is_finite() {
            return Err(AutodiffError::NonFinite { op: op.name() });
        }
        let requires_grad = inputs.iter().any(|v| self.nodes[v.0].requires_grad);
        self.nodes.push(Node { value, requires_grad, op });
        Ok(Var(self.nodes.len() - 1))
    }

    fn same_shape(&self, op: &'static str, a: Var, b: Var) -> Result<(), AutodiffError> {
        let (sa, sb) = (self.value(a).shape(), self.value(b).shape());
        if sa != sb {
            return Err(AutodiffError::Shape { op, detail: format!("{sa:?} vs {sb:?}") });
        }
        Ok(())
    }

    /// Zero-padded 2-d cross-correlation plus per-channel bias.
    pub fn conv2d(
        &mut self,
        input: Var,
        kernel: Var,
        bias: Option<Var>,
        stride: usize,
        padding: usize,
    ) -> Result<Var, AutodiffError> {
        let x = self.value(input).dims4("conv2d")?;
        let k = self.value(kernel).dims4("conv2d")?;
        let geom = ConvGeometry::new(x, k, stride, padding)?;
        if let Some(b) = bias {
            if self.value(b).shape() != [geom.out_channels] {
                return Err(AutodiffError::Shape {
                    op: "conv2d",
                    detail: format!(
                        "bias shape {:?} does not match {} output channels",
                        self.value(b).shape(),
                        geom.out_channels
                    ),
                });
            }
        }
        let out = conv2d_forward(
            &geom,
            self.value(input).data(),
            self.value(kernel).data(),
            bias.map(|b| self.value(b).data()),
        );
        let value = Tensor::new(geom.output_shape().to_vec(), out)?;
        let mut inputs = vec![input, kernel];
        inputs.extend(bias);
        self.push(value, Op::Conv2d { input, kernel, bias, geom }, &inputs)
    }

    /// Per-(sample, channel) plane normalization with learned gain and shift.
    pub fn instance_norm(&mut self, input: Var, gain: Var, shift: Var, eps: f64) -> Result<Var, AutodiffError> {
        let [n, c, h, w] = self.value(input).dims4("instance_norm")?;
        let plane = h * w;
        if plane < 2 {
            return Err(AutodiffError::DegenerateStatistics { plane });
        }
        for p in [gain, shift] {
            if self.value(p).shape() != [c] {
                return Err(AutodiffError::Shape {
                    op: "instance_norm",
                    detail: format!("expected [{c}] affine parameters, got {:?}", self.value(p).shape()),
                });
            }
        }
        let x = self.value(input).data();
        let (g, s) = (self.value(gain).data(), self.value(shift).data());
        let inv_n = lit::<T>(1.0 / plane as f64);
        let eps = lit::<T>(eps);
        let mut normalized = vec![T::zero(); x.len()];
        let mut inv_std = vec![T::zero(); n * c];
        let mut out = vec![T::zero(); x.len()];
        for (idx, ((xs, ns), os)) in x
            .chunks(plane)
            .zip(normalized.chunks_mut(plane))
            .zip(out.chunks_mut(plane))
            .enumerate()
        {
            let ch = idx % c;
            let mean = xs.iter().copied().sum::<T>() * inv_n;
            let var = xs.iter().map(|&v| (v - mean) * (v - mean)).sum::<T>() * inv_n;
            let istd = T::one() / (var + eps).sqrt();
            inv_std[idx] = istd;
            for ((&xv, nv), ov) in xs.iter().zip(ns.iter_mut()).zip(os.iter_mut()) {
                *nv = (xv - mean) * istd;
                *ov = g[ch] * *nv + s[ch];
            }
        }
        let value = Tensor::new(vec![n, c, h, w], out)?;
        self.push(value, Op::InstanceNorm { input, gain, shift, normalized, inv_std }, &[input, gain, shift])
    }

    pub fn upsample2x(&mut self, input: Var) -> Result<Var, AutodiffError> {
        let [n, c, h, w] = self.value(input).dims4("upsample2x")?;
        let x = self.value(input).data();
        let mut out = vec![T::zero(); n * c * 4 * h * w];
        for (src, dst) in x.chunks(h * w).zip(out.chunks_mut(4 * h * w)) {
            for i in 0..2 * h {
                let row = &src[(i / 2) * w..(i / 2 + 1) * w];
                for (j, d) in dst[i * 2 * w..(i + 1) * 2 * w].iter_mut().enumerate() {
                    *d = row[j / 2];
                }
            }
        }
        let value = Tensor::new(vec![n, c, 2 * h, 2 * w], out)?;
        self.push(value, Op::Upsample2x { input }, &[input])
    }

    /// 2×2 average pooling with stride 2; odd trailing rows/columns are dropped.
    pub fn avg_pool2x(&mut self, input: Var) -> Result<Var, AutodiffError> {
        let [n, c, h, w] = self.value(input).dims4("avg_pool2x")?;
        let (ho, wo) = (h / 2, w / 2);
        if ho == 0 || wo == 0 {
            return Err(AutodiffError::Shape { op: "avg_pool2x", detail: format!("{h}x{w} plane is too small") });
        }
        let x = self.value(input).data();
        let quarter = lit::<T>(0.25);
        let mut out = vec![T::zero(); n * c * ho * wo];
        for (src, dst) in x.chunks(h * w).zip(out.chunks_mut(ho * wo)) {
            for i in 0..ho {
                for j in 0..wo {
                    let (r0, r1) = (2 * i * w, (2 * i + 1) * w);
                    dst[i * wo + j] = (src[r0 + 2 * j] + src[r0 + 2 * j + 1] + src[r1 + 2 * j] + src[r1 + 2 * j + 1]) * quarter;
                }
            }
        }
        let value = Tensor::new(vec![n, c, ho, wo], out)?;
        self.push(value, Op::AvgPool2x { input }, &[input])
    }

    pub fn activation(&mut self, input: Var, kind: Activation) -> Result<Var, AutodiffError> {
        let x = self.value(input);
        let value = match kind {
            Activation::Relu => x.map(|v| v.max(T::zero())),
            Activation::LeakyRelu(slope) => {
                let slope = lit::<T>(slope);
                x.map(|v| if v > T::zero() { v } else { v * slope })
            }
            Activation::Sigmoid => x.map(sigmoid),
        };
        self.push(value, Op::Activation { input, kind }, &[input])
    }

    pub fn relu(&mut self, input: Var) -> Result<Var, AutodiffError> {
        self.activation(input, Activation::Relu)
    }

    pub fn leaky_relu(&mut self, input: Var, slope: f64) -> Result<Var, AutodiffError> {
        self.activation(input, Activation::LeakyRelu(slope))
    }

    pub fn sigmoid(&mut self, input: Var) -> Result<Var, AutodiffError> {
        self.activation(input, Activation::Sigmoid)
    }

    fn zip_with(&mut self, op: &'static str, a: Var, b: Var, f: impl Fn(T, T) -> T) -> Result<Tensor<T>, AutodiffError> {
        self.same_shape(op, a, b)?;
        let (x, y) = (self.value(a), self.value(b));
        let data = x.data().iter().zip(y.data()).map(|(&p, &q)| f(p, q)).collect();
        Tensor::new(x.shape().to_vec(), data)
    }

    pub fn add(&mut self, a: Var, b: Var) -> Result<Var, AutodiffError> {
        let value = self.zip_with("add", a, b, |p, q| p + q)?;
        self.push(value, Op::Add { a, b }, &[a, b])
    }

    pub fn sub(&mut self, a: Var, b: Var) -> Result<Var, AutodiffError> {
        let value = self.zip_with("sub", a, b, |p, q| p - q)?;
        self.push(value, Op::Sub { a, b }, &[a, b])
    }

    pub fn mul(&mut self, a: Var, b: Var) -> Result<Var, AutodiffError> {
        let value = self.zip_with("mul", a, b, |p, q| p * q)?;
        self.push(value, Op::Mul { a, b }, &[a, b])
    }

    pub fn scale(&mut self, input: Var, factor: f64) -> Result<Var, AutodiffError> {
        let factor = lit::<T>(factor);
        let value = self.value(input).map(|v| v * factor);
        self.push(value, Op::Scale { input, factor }, &[input])
    }

    /// `(a^(1/p) + b^(1/p))^p` for non-negative `a`, `b`: the sum of two
    /// power-compressed magnitudes taken in the linear magnitude domain.
    pub fn power_mix(&mut self, a: Var, b: Var, p: f64) -> Result<Var, AutodiffError> {
        if !(p > 0.0 && p <= 1.0) {
            return Err(AutodiffError::Shape { op: "power_mix", detail: format!("exponent {p} outside (0, 1]") });
        }
        let exponent = lit::<T>(p);
        let q = T::one() / exponent;
        let value = self.zip_with("power_mix", a, b, |x, y| {
            (x.max(T::zero()).powf(q) + y.max(T::zero()).powf(q)).powf(exponent)
        })?;
        self.push(value, Op::PowerMix { a, b, exponent }, &[a, b])
    }

    /// Mean of `|x|` over all entries.
    pub fn mean_abs(&mut self, input: Var) -> Result<Var, AutodiffError> {
        let x = self.value(input).data();
        let n = lit::<T>(x.len().max(1) as f64);
        let value = Tensor::scalar(x.iter().map(|v| v.abs()).sum::<T>() / n);
        self.push(value, Op::MeanAbs { input }, &[input])
    }

    /// Mean of `(x − target)²` over all entries.
    pub fn mean_square(&mut self, input: Var, target: f64) -> Result<Var, AutodiffError> {
        let target = lit::<T>(target);
        let x = self.value(input).data();
        let n = lit::<T>(x.len().max(1) as f64);
        let value = Tensor::scalar(x.iter().map(|&v| (v - target) * (v - target)).sum::<T>() / n);
        self.push(value, Op::MeanSquare { input, target }, &[input])
    }

    pub fn sum(&mut self, input: Var) -> Result<Var, AutodiffError> {
        let value = Tensor::scalar(self.value(input).data().iter().copied().sum());
        self.push(value, Op::Sum { input }, &[input])
    }

    /// Weighted sum of scalar nodes.
    pub fn combine(&mut self, terms: &[(Var, f64)]) -> Result<Var, AutodiffError> {
        let mut total = T::zero();
        let mut stored = Vec::with_capacity(terms.len());
        for &(v, w) in terms {
            let x = self.value(v);
            if x.len() != 1 {
                return Err(AutodiffError::Shape { op: "combine", detail: format!("term has shape {:?}", x.shape()) });
            }
            let w = lit::<T>(w);
            total += w * x.item();
            stored.push((v, w));
        }
        let inputs: Vec<Var> = stored.iter().map(|t| t.0).collect();
        self.push(Tensor::scalar(total), Op::Combine { terms: stored }, &inputs)
    }

    /// Reverse sweep from a scalar `loss`.
    pub fn backward(&mut self, loss: Var) -> Result<Gradients<T>, AutodiffError> {
        if self.backward_done {
            return Err(AutodiffError::BackwardAlreadyRun);
        }
        let loss_shape = self.value(loss).shape().to_vec();
        if loss_shape.iter().product::<usize>() != 1 {
            return Err(AutodiffError::NonScalarLoss { shape: loss_shape });
        }
        self.backward_done = true;
        let mut grads: Vec<Option<Tensor<T>>> = (0..self.nodes.len()).map(|_| None).collect();
        if self.nodes[loss.0].requires_grad {
            grads[loss.0] = Some(Tensor::full(&loss_shape, T::one()));
        }
        for idx in (0..=loss.0).rev() {
            let Some(dy) = grads[idx].take() else { continue };
            let node = &self.nodes[idx];
            if matches!(node.op, Op::Leaf) {
                grads[idx] = Some(dy);
                continue;
            }
            self.node_backward(idx, &dy, &mut grads)?;
        }
        // Interior nodes keep no gradient; leaves keep theirs.
        for (g, node) in grads.iter_mut().zip(&self.nodes) {
            if !matches!(node.op, Op::Leaf) || !node.requires_grad {
                *g = None;
            }
        }
        let shapes = self.nodes.iter().map(|n| n.value.shape().to_vec()).collect();
        Ok(Gradients { grads, shapes })
    }

    fn accumulate(&self, grads: &mut [Option<Tensor<T>>], var: Var, g: Tensor<T>) {
        if !self.nodes[var.0].requires_grad {
            return;
        }
        match &mut grads[var.0] {
            Some(acc) => acc.add_assign(&g),
            slot => *slot = Some(g),
        }
    }

    fn like(&self, var: Var, data: Vec<T>) -> Tensor<T> {
        Tensor::new(self.value(var).shape().to_vec(), data).expect("gradient shape matches its value")
    }

    fn node_backward(&self, idx: usize, dy: &Tensor<T>, grads: &mut [Option<Tensor<T>>]) -> Result<(), AutodiffError> {
        let node = &self.nodes[idx];
        let rg = |v: Var| self.nodes[v.0].requires_grad;
        match &node.op {
            Op::Leaf => {}
            Op::Conv2d { input, kernel, bias, geom } => {
                let need = (rg(*input), rg(*kernel), bias.is_some_and(rg));
                let cg = conv2d_backward(geom, self.value(*input).data(), self.value(*kernel).data(), dy.data(), need);
                if let Some(dx) = cg.input {
                    self.accumulate(grads, *input, self.like(*input, dx));
                }
                if let Some(dk) = cg.kernel {
                    self.accumulate(grads, *kernel, self.like(*kernel, dk));
                }
                if let (Some(b), Some(db)) = (bias, cg.bias) {
                    self.accumulate(grads, *b, self.like(*b, db));
                }
            }
            Op::InstanceNorm { input, gain, shift, normalized, inv_std } => {
                let [_, c, h, w] = self.value(*input).dims4("instance_norm")?;
                let plane = h * w;
                let g = self.value(*gain).data();
                let mut dgain = vec![T::zero(); c];
                let mut dshift = vec![T::zero(); c];
                let mut dx = vec![T::zero(); dy.len()];
                let pn = lit::<T>(plane as f64);
                for (p, ((dys, xh), dxs)) in dy
                    .data()
                    .chunks(plane)
                    .zip(normalized.chunks(plane))
                    .zip(dx.chunks_mut(plane))
                    .enumerate()
                {
                    let ch = p % c;
                    let mut sum_dy = T::zero();
                    let mut sum_dy_xh = T::zero();
                    for (&d, &xhat) in dys.iter().zip(xh) {
                        sum_dy += d;
                        sum_dy_xh += d * xhat;
                    }
                    dshift[ch] += sum_dy;
                    dgain[ch] += sum_dy_xh;
                    let k = g[ch] * inv_std[p] / pn;
                    for ((o, &d), &xhat) in dxs.iter_mut().zip(dys).zip(xh) {
                        *o = k * (pn * d - sum_dy - xhat * sum_dy_xh);
                    }
                }
                self.accumulate(grads, *input, self.like(*input, dx));
                self.accumulate(grads, *gain, self.like(*gain, dgain));
                self.accumulate(grads, *shift, self.like(*shift, dshift));
            }
            Op::Upsample2x { input } => {
                let [_, _, h, w] = self.value(*input).dims4("upsample2x")?;
                let mut dx = vec![T::zero(); self.value(*input).len()];
                for (dst, src) in dx.chunks_mut(h * w).zip(dy.data().chunks(4 * h * w)) {
                    for i in 0..2 * h {
                        for j in 0..2 * w {
                            dst[(i / 2) * w + j / 2] += src[i * 2 * w + j];
                        }
                    }
                }
                self.accumulate(grads, *input, self.like(*input, dx));
            }
            Op::AvgPool2x { input } => {
                let [_, _, h, w] = self.value(*input).dims4("avg_pool2x")?;
                let (ho, wo) = (h / 2, w / 2);
                let quarter = lit::<T>(0.25);
                let mut dx = vec![T::zero(); self.value(*input).len()];
                for (dst, src) in dx.chunks_mut(h * w).zip(dy.data().chunks(ho * wo)) {
                    for i in 0..ho {
                        for j in 0..wo {
                            let d = src[i * wo + j] * quarter;
                            for (di, dj) in [(0, 0), (0, 1), (1, 0), (1, 1)] {
                                dst[(2 * i + di) * w + 2 * j + dj] = d;
                            }
                        }
                    }
                }
                self.accumulate(grads, *input, self.like(*input, dx));
            }
            Op::Activation { input, kind } => {
                let x = self.value(*input).data();
                let d = dy.data();
                let dx: Vec<T> = match kind {
                    Activation::Relu => x.iter().zip(d).map(|(&v, &g)| if v > T::zero() { g } else { T::zero() }).collect(),
                    Activation::LeakyRelu(slope) => {
                        let slope = lit::<T>(*slope);
                        x.iter().zip(d).map(|(&v, &g)| if v > T::zero() { g } else { g * slope }).collect()
                    }
                    Activation::Sigmoid => node
                        .value
                        .data()
                        .iter()
                        .zip(d)
                        .map(|(&s, &g)| g * s * (T::one() - s))
                        .collect(),
                };
                self.accumulate(grads, *input, self.like(*input, dx));
            }
            Op::Add { a, b } => {
                self.accumulate(grads, *a, dy.clone());
                self.accumulate(grads, *b, dy.clone());
            }
            Op::Sub { a, b } => {
                self.accumulate(grads, *a, dy.clone());
                self.accumulate(grads, *b, dy.map(|v| -v));
            }
            Op::Mul { a, b } => {
                if rg(*a) {
                    let prod = dy.data().iter().zip(self.value(*b).data()).map(|(&g, &y)| g * y).collect();
                    self.accumulate(grads, *a, self.like(*a, prod));
                }
                if rg(*b) {
                    let prod = dy.data().iter().zip(self.value(*a).data()).map(|(&g, &x)| g * x).collect();
                    self.accumulate(grads, *b, self.like(*b, prod));
                }
            }
            Op::Scale { input, factor } => {
                self.accumulate(grads, *input, dy.map(|v| v * *factor));
            }
            Op::PowerMix { a, b, exponent } => {
                // d/da (a^q + b^q)^p = (a^q / (a^q + b^q))^(1−p), bounded in [0, 1].
                let q = T::one() / *exponent;
                let one_minus_p = T::one() - *exponent;
                let (x, y) = (self.value(*a).data(), self.value(*b).data());
                let mut da = Vec::with_capacity(x.len());
                let mut db = Vec::with_capacity(x.len());
                for ((&xv, &yv), &g) in x.iter().zip(y).zip(dy.data()) {
                    let (xq, yq) = (xv.max(T::zero()).powf(q), yv.max(T::zero()).powf(q));
                    let total = xq + yq;
                    if total > T::zero() {
                        da.push(g * (xq / total).powf(one_minus_p));
                        db.push(g * (yq / total).powf(one_minus_p));
                    } else {
                        da.push(T::zero());
                        db.push(T::zero());
                    }
                }
                self.accumulate(grads, *a, self.like(*a, da));
                self.accumulate(grads, *b, self.like(*b, db));
            }
            Op::MeanAbs { input } => {
                let x = self.value(*input).data();
                let scale = dy.item() / lit::<T>(x.len().max(1) as f64);
                let dx = x.iter().map(|&v| if v > T::zero() { scale } else if v < T::zero() { -scale } else { T::zero() }).collect();
                self.accumulate(grads, *input, self.like(*input, dx));
            }
            Op::MeanSquare { input, target } => {
                let x = self.value(*input).data();
                let scale = lit::<T>(2.0) * dy.item() / lit::<T>(x.len().max(1) as f64);
                let dx = x.iter().map(|&v| scale * (v - *target)).collect();
                self.accumulate(grads, *input, self.like(*input, dx));
            }
            Op::Sum { input } => {
                let g = dy.item();
                let shape = self.value(*input).shape().to_vec();
                self.accumulate(grads, *input, Tensor::full(&shape, g));
            }
            Op::Combine { terms } => {
                let g = dy.item();
                for &(v, w) in terms {
                    self.accumulate(grads, v, Tensor::scalar(g * w));
                }
            }
        }
        Ok(())
    }
}

/// Logistic function clamped to the open interval `(ε, 1 − ε)`.
fn sigmoid<T: Real>(x: T) -> T {
    let s = if x >= T::zero() {
        T::one() / (T::one() + (-x).exp())
    } else {
        let e = x.exp();
        e / (T::one() + e)
    };
    if s.is_nan() {
        return s;
    }
    let eps = T::epsilon();
    s.max(eps).min(T::one() - eps)
}
