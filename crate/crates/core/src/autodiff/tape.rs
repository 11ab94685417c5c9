//! Dynamic reverse-mode tape.
//!
//! Every operation appends a node holding its output value, so the tape is in
//! topological order by construction. `backward` walks it once in reverse.

use std::cell::RefCell;

use super::tensor::{broadcast_zip, reduce_to_shape, Tensor};
use super::AdError;

/// Handle to a tape node.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Var(pub(crate) usize);

#[derive(Debug, Clone)]
pub(crate) enum Op {
    Leaf { requires_grad: bool },
    Add(usize, usize),
    Sub(usize, usize),
    Mul(usize, usize),
    Div(usize, usize),
    MatMul(usize, usize),
    Transpose(usize),
    Reshape(usize),
    Exp(usize),
    Ln(usize),
    ClampMin(usize, f64),
    Sigmoid(usize),
    Tanh(usize),
    LeakyRelu(usize, f64),
    Softplus(usize),
    Softmax(usize, usize),
    Sum(usize, Option<usize>),
    Mean(usize),
    Concat(Vec<usize>, usize),
    Slice { input: usize, axis: usize, start: usize, len: usize },
    Scale(usize, f64),
    AddScalar(usize, f64),
}

pub(crate) struct Node {
    pub op: Op,
    pub value: Tensor,
}

/// Append-only computation tape. Single-threaded; independent tapes may run
/// in parallel.
pub struct Tape {
    nodes: RefCell<Vec<Node>>,
    check_finite: bool,
}

impl Default for Tape {
    fn default() -> Self {
        Self::new()
    }
}

impl Tape {
    pub fn new() -> Self {
        Tape {
            nodes: RefCell::new(Vec::new()),
            check_finite: cfg!(debug_assertions),
        }
    }

    pub fn with_finite_checks(mut self, on: bool) -> Self {
        self.check_finite = on;
        self
    }

    pub fn len(&self) -> usize {
        self.nodes.borrow().len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.borrow().is_empty()
    }

    pub fn value(&self, v: Var) -> Tensor {
        self.nodes.borrow()[v.0].value.clone()
    }

    pub fn shape(&self, v: Var) -> Vec<usize> {
        self.nodes.borrow()[v.0].value.shape().to_vec()
    }

    pub(crate) fn op_of(&self, idx: usize) -> Op {
        self.nodes.borrow()[idx].op.clone()
    }

    pub(crate) fn value_of(&self, idx: usize) -> Tensor {
        self.nodes.borrow()[idx].value.clone()
    }

    fn push(&self, op: Op, value: Tensor, name: &'static str) -> Result<Var, AdError> {
        if self.check_finite && !value.all_finite() {
            return Err(AdError::NonFinite { op: name });
        }
        let mut nodes = self.nodes.borrow_mut();
        nodes.push(Node { op, value });
        Ok(Var(nodes.len() - 1))
    }

    /// Registers a parameter leaf (participates in gradients).
    pub fn leaf(&self, value: Tensor) -> Var {
        self.push(Op::Leaf { requires_grad: true }, value, "leaf")
            .expect("leaf values must be finite")
    }

    /// Registers a constant leaf (no gradient accumulated).
    pub fn constant(&self, value: Tensor) -> Var {
        self.push(Op::Leaf { requires_grad: false }, value, "constant")
            .expect("constant values must be finite")
    }

    pub fn add(&self, a: Var, b: Var) -> Result<Var, AdError> {
        let v = {
            let nodes = self.nodes.borrow();
            broadcast_zip("add", &nodes[a.0].value, &nodes[b.0].value, |x, y| x + y)?
        };
        self.push(Op::Add(a.0, b.0), v, "add")
    }

    pub fn sub(&self, a: Var, b: Var) -> Result<Var, AdError> {
        let v = {
            let nodes = self.nodes.borrow();
            broadcast_zip("sub", &nodes[a.0].value, &nodes[b.0].value, |x, y| x - y)?
        };
        self.push(Op::Sub(a.0, b.0), v, "sub")
    }

    pub fn mul(&self, a: Var, b: Var) -> Result<Var, AdError> {
        let v = {
            let nodes = self.nodes.borrow();
            broadcast_zip("mul", &nodes[a.0].value, &nodes[b.0].value, |x, y| x * y)?
        };
        self.push(Op::Mul(a.0, b.0), v, "mul")
    }

    pub fn div(&self, a: Var, b: Var) -> Result<Var, AdError> {
        let v = {
            let nodes = self.nodes.borrow();
            broadcast_zip("div", &nodes[a.0].value, &nodes[b.0].value, |x, y| x / y)?
        };
        self.push(Op::Div(a.0, b.0), v, "div")
    }

    pub fn matmul(&self, a: Var, b: Var) -> Result<Var, AdError> {
        let v = {
            let nodes = self.nodes.borrow();
            matmul_value(&nodes[a.0].value, &nodes[b.0].value)?
        };
        self.push(Op::MatMul(a.0, b.0), v, "matmul")
    }

    pub fn transpose(&self, a: Var) -> Result<Var, AdError> {
        let v = self.nodes.borrow()[a.0].value.transposed()?;
        self.push(Op::Transpose(a.0), v, "transpose")
    }

    pub fn reshape(&self, a: Var, shape: Vec<usize>) -> Result<Var, AdError> {
        let v = self.nodes.borrow()[a.0].value.reshaped(shape)?;
        self.push(Op::Reshape(a.0), v, "reshape")
    }

    fn unary(
        &self,
        a: Var,
        op: Op,
        name: &'static str,
        f: impl Fn(f64) -> f64,
    ) -> Result<Var, AdError> {
        let v = self.nodes.borrow()[a.0].value.map(f);
        self.push(op, v, name)
    }

    pub fn exp(&self, a: Var) -> Result<Var, AdError> {
        self.unary(a, Op::Exp(a.0), "exp", f64::exp)
    }

    pub fn ln(&self, a: Var) -> Result<Var, AdError> {
        {
            let nodes = self.nodes.borrow();
            if nodes[a.0].value.data().iter().any(|&x| x <= 0.0) {
                return Err(AdError::Domain {
                    op: "ln",
                    detail: "nonpositive argument".into(),
                });
            }
        }
        self.unary(a, Op::Ln(a.0), "ln", f64::ln)
    }

    pub fn clamp_min(&self, a: Var, floor: f64) -> Result<Var, AdError> {
        self.unary(a, Op::ClampMin(a.0, floor), "clamp_min", move |x| x.max(floor))
    }

    pub fn sigmoid(&self, a: Var) -> Result<Var, AdError> {
        self.unary(a, Op::Sigmoid(a.0), "sigmoid", sigmoid)
    }

    pub fn tanh(&self, a: Var) -> Result<Var, AdError> {
        self.unary(a, Op::Tanh(a.0), "tanh", f64::tanh)
    }

    pub fn leaky_relu(&self, a: Var, slope: f64) -> Result<Var, AdError> {
        self.unary(a, Op::LeakyRelu(a.0, slope), "leaky_relu", move |x| {
            if x > 0.0 {
                x
            } else {
                slope * x
            }
        })
    }

    pub fn softplus(&self, a: Var) -> Result<Var, AdError> {
        self.unary(a, Op::Softplus(a.0), "softplus", softplus)
    }

    /// Numerically stable softmax along `axis` (max-subtraction).
    pub fn softmax(&self, a: Var, axis: usize) -> Result<Var, AdError> {
        let v = {
            let nodes = self.nodes.borrow();
            softmax_value(&nodes[a.0].value, axis)?
        };
        self.push(Op::Softmax(a.0, axis), v, "softmax")
    }

    /// Sum over all elements (axis `None`, scalar output) or along one axis
    /// of a 2-D tensor (vector output).
    pub fn sum(&self, a: Var, axis: Option<usize>) -> Result<Var, AdError> {
        let v = {
            let nodes = self.nodes.borrow();
            sum_value(&nodes[a.0].value, axis)?
        };
        self.push(Op::Sum(a.0, axis), v, "sum")
    }

    pub fn mean(&self, a: Var) -> Result<Var, AdError> {
        let v = {
            let nodes = self.nodes.borrow();
            let t = &nodes[a.0].value;
            if t.is_empty() {
                return Err(AdError::Domain {
                    op: "mean",
                    detail: "empty tensor".into(),
                });
            }
            Tensor::scalar(t.data().iter().sum::<f64>() / t.len() as f64)
        };
        self.push(Op::Mean(a.0), v, "mean")
    }

    pub fn concat(&self, parts: &[Var], axis: usize) -> Result<Var, AdError> {
        if parts.is_empty() {
            return Err(AdError::Domain {
                op: "concat",
                detail: "no inputs".into(),
            });
        }
        let v = {
            let nodes = self.nodes.borrow();
            let tensors: Vec<&Tensor> = parts.iter().map(|p| &nodes[p.0].value).collect();
            concat_value(&tensors, axis)?
        };
        self.push(Op::Concat(parts.iter().map(|p| p.0).collect(), axis), v, "concat")
    }

    pub fn slice(&self, a: Var, axis: usize, start: usize, len: usize) -> Result<Var, AdError> {
        let v = {
            let nodes = self.nodes.borrow();
            slice_value(&nodes[a.0].value, axis, start, len)?
        };
        self.push(Op::Slice { input: a.0, axis, start, len }, v, "slice")
    }

    pub fn scale(&self, a: Var, c: f64) -> Result<Var, AdError> {
        self.unary(a, Op::Scale(a.0, c), "scale", move |x| c * x)
    }

    pub fn add_scalar(&self, a: Var, c: f64) -> Result<Var, AdError> {
        self.unary(a, Op::AddScalar(a.0, c), "add_scalar", move |x| x + c)
    }

    /// Gradients of the scalar `loss` with respect to every node.
    ///
    /// Indexed by node id; callers usually read back only their leaves.
    pub fn backward(&self, loss: Var) -> Result<Vec<Tensor>, AdError> {
        let nodes = self.nodes.borrow();
        if nodes[loss.0].value.len() != 1 {
            return Err(AdError::NonScalarLoss {
                shape: nodes[loss.0].value.shape().to_vec(),
            });
        }
        // a node needs a gradient only if some leaf under it requires one;
        // everything hanging off constants (inputs, costs, targets) is skipped
        let mut needs = vec![false; loss.0 + 1];
        for idx in 0..=loss.0 {
            needs[idx] = match &nodes[idx].op {
                Op::Leaf { requires_grad } => *requires_grad,
                Op::Add(a, b)
                | Op::Sub(a, b)
                | Op::Mul(a, b)
                | Op::Div(a, b)
                | Op::MatMul(a, b) => needs[*a] || needs[*b],
                Op::Concat(parts, _) => parts.iter().any(|p| needs[*p]),
                Op::Transpose(a)
                | Op::Reshape(a)
                | Op::Exp(a)
                | Op::Ln(a)
                | Op::ClampMin(a, _)
                | Op::Sigmoid(a)
                | Op::Tanh(a)
                | Op::LeakyRelu(a, _)
                | Op::Softplus(a)
                | Op::Softmax(a, _)
                | Op::Sum(a, _)
                | Op::Mean(a)
                | Op::Slice { input: a, .. }
                | Op::Scale(a, _)
                | Op::AddScalar(a, _) => needs[*a],
            };
        }
        let mut grads: Vec<Tensor> = nodes
            .iter()
            .map(|n| Tensor::zeros(n.value.shape().to_vec()))
            .collect();
        grads[loss.0].data_mut()[0] = 1.0;

        for idx in (0..=loss.0).rev() {
            if !needs[idx] {
                continue;
            }
            let g = grads[idx].clone();
            if g.data().iter().all(|&x| x == 0.0) {
                continue;
            }
            match &nodes[idx].op {
                Op::Leaf { .. } => {}
                Op::Add(a, b) => {
                    accumulate(&mut grads[*a], &reduce_to_shape(&g, nodes[*a].value.shape()));
                    accumulate(&mut grads[*b], &reduce_to_shape(&g, nodes[*b].value.shape()));
                }
                Op::Sub(a, b) => {
                    accumulate(&mut grads[*a], &reduce_to_shape(&g, nodes[*a].value.shape()));
                    let neg = g.map(|x| -x);
                    accumulate(&mut grads[*b], &reduce_to_shape(&neg, nodes[*b].value.shape()));
                }
                Op::Mul(a, b) => {
                    let ga = broadcast_zip("mul_bwd", &g, &nodes[*b].value, |x, y| x * y)?;
                    let gb = broadcast_zip("mul_bwd", &g, &nodes[*a].value, |x, y| x * y)?;
                    accumulate(&mut grads[*a], &reduce_to_shape(&ga, nodes[*a].value.shape()));
                    accumulate(&mut grads[*b], &reduce_to_shape(&gb, nodes[*b].value.shape()));
                }
                Op::Div(a, b) => {
                    let ga = broadcast_zip("div_bwd", &g, &nodes[*b].value, |x, y| x / y)?;
                    let num = broadcast_zip("div_bwd", &g, &nodes[*a].value, |x, y| x * y)?;
                    let gb = broadcast_zip("div_bwd", &num, &nodes[*b].value, |x, y| -x / (y * y))?;
                    accumulate(&mut grads[*a], &reduce_to_shape(&ga, nodes[*a].value.shape()));
                    accumulate(&mut grads[*b], &reduce_to_shape(&gb, nodes[*b].value.shape()));
                }
                Op::MatMul(a, b) => {
                    let (ga, gb) = matmul_backward(&g, &nodes[*a].value, &nodes[*b].value)?;
                    accumulate(&mut grads[*a], &ga);
                    accumulate(&mut grads[*b], &gb);
                }
                Op::Transpose(a) => {
                    accumulate(&mut grads[*a], &g.transposed()?);
                }
                Op::Reshape(a) => {
                    accumulate(&mut grads[*a], &g.reshaped(nodes[*a].value.shape().to_vec())?);
                }
                Op::Exp(a) => {
                    let ga = broadcast_zip("exp_bwd", &g, &nodes[idx].value, |x, y| x * y)?;
                    accumulate(&mut grads[*a], &ga);
                }
                Op::Ln(a) => {
                    let ga = broadcast_zip("ln_bwd", &g, &nodes[*a].value, |x, y| x / y)?;
                    accumulate(&mut grads[*a], &ga);
                }
                Op::ClampMin(a, floor) => {
                    let c = *floor;
                    let ga =
                        broadcast_zip("clamp_bwd", &g, &nodes[*a].value, |x, y| {
                            if y >= c {
                                x
                            } else {
                                0.0
                            }
                        })?;
                    accumulate(&mut grads[*a], &ga);
                }
                Op::Sigmoid(a) => {
                    let ga = broadcast_zip("sigmoid_bwd", &g, &nodes[idx].value, |x, y| {
                        x * y * (1.0 - y)
                    })?;
                    accumulate(&mut grads[*a], &ga);
                }
                Op::Tanh(a) => {
                    let ga =
                        broadcast_zip("tanh_bwd", &g, &nodes[idx].value, |x, y| x * (1.0 - y * y))?;
                    accumulate(&mut grads[*a], &ga);
                }
                Op::LeakyRelu(a, slope) => {
                    let s = *slope;
                    let ga = broadcast_zip("leaky_bwd", &g, &nodes[*a].value, |x, y| {
                        if y > 0.0 {
                            x
                        } else {
                            s * x
                        }
                    })?;
                    accumulate(&mut grads[*a], &ga);
                }
                Op::Softplus(a) => {
                    let ga =
                        broadcast_zip("softplus_bwd", &g, &nodes[*a].value, |x, y| x * sigmoid(y))?;
                    accumulate(&mut grads[*a], &ga);
                }
                Op::Softmax(a, axis) => {
                    let ga = softmax_backward(&g, &nodes[idx].value, *axis)?;
                    accumulate(&mut grads[*a], &ga);
                }
                Op::Sum(a, _axis) => {
                    let ga = sum_backward(&g, nodes[*a].value.shape(), &nodes[idx].op)?;
                    accumulate(&mut grads[*a], &ga);
                }
                Op::Mean(a) => {
                    let n = nodes[*a].value.len() as f64;
                    let fill = g.item() / n;
                    let ga = nodes[*a].value.map(|_| fill);
                    accumulate(&mut grads[*a], &ga);
                }
                Op::Concat(parts, axis) => {
                    let mut start = 0usize;
                    for p in parts {
                        let len = nodes[*p].value.shape()[*axis];
                        let gp = slice_value(&g, *axis, start, len)?;
                        accumulate(&mut grads[*p], &gp);
                        start += len;
                    }
                }
                Op::Slice { input, axis, start, len: _ } => {
                    let ga = scatter_slice(&g, nodes[*input].value.shape(), *axis, *start);
                    accumulate(&mut grads[*input], &ga);
                }
                Op::Scale(a, c) => {
                    let c = *c;
                    accumulate(&mut grads[*a], &g.map(|x| c * x));
                }
                Op::AddScalar(a, _) => {
                    accumulate(&mut grads[*a], &g);
                }
            }
        }
        Ok(grads)
    }
}

pub(crate) fn accumulate(dst: &mut Tensor, src: &Tensor) {
    debug_assert_eq!(dst.shape(), src.shape());
    for (d, s) in dst.data_mut().iter_mut().zip(src.data()) {
        *d += s;
    }
}

pub(crate) fn sigmoid(x: f64) -> f64 {
    if x >= 0.0 {
        1.0 / (1.0 + (-x).exp())
    } else {
        let e = x.exp();
        e / (1.0 + e)
    }
}

pub(crate) fn softplus(x: f64) -> f64 {
    if x > 30.0 {
        x
    } else {
        (1.0 + x.exp()).ln()
    }
}

/// matmul over (2-D|1-D) × (2-D|1-D); 1-D operands are promoted and the
/// corresponding output axis squeezed.
pub(crate) fn matmul_value(a: &Tensor, b: &Tensor) -> Result<Tensor, AdError> {
    let (a2, sq_a) = promote_lhs(a)?;
    let (b2, sq_b) = promote_rhs(b)?;
    if a2.shape()[1] != b2.shape()[0] {
        return Err(AdError::ShapeMismatch {
            op: "matmul",
            lhs: a.shape().to_vec(),
            rhs: b.shape().to_vec(),
        });
    }
    let (m, k, n) = (a2.shape()[0], a2.shape()[1], b2.shape()[1]);
    let mut out = Tensor::zeros(vec![m, n]);
    for i in 0..m {
        for p in 0..k {
            let av = a2.data()[i * k + p];
            if av == 0.0 {
                continue;
            }
            for j in 0..n {
                out.data_mut()[i * n + j] += av * b2.data()[p * n + j];
            }
        }
    }
    let mut shape = vec![];
    if !sq_a {
        shape.push(m);
    }
    if !sq_b {
        shape.push(n);
    }
    out.reshaped(shape)
}

fn promote_lhs(a: &Tensor) -> Result<(Tensor, bool), AdError> {
    match a.rank() {
        2 => Ok((a.clone(), false)),
        1 => Ok((a.reshaped(vec![1, a.len()])?, true)),
        _ => Err(AdError::ShapeMismatch {
            op: "matmul",
            lhs: a.shape().to_vec(),
            rhs: vec![],
        }),
    }
}

fn promote_rhs(b: &Tensor) -> Result<(Tensor, bool), AdError> {
    match b.rank() {
        2 => Ok((b.clone(), false)),
        1 => Ok((b.reshaped(vec![b.len(), 1])?, true)),
        _ => Err(AdError::ShapeMismatch {
            op: "matmul",
            lhs: vec![],
            rhs: b.shape().to_vec(),
        }),
    }
}

pub(crate) fn matmul_backward(g: &Tensor, a: &Tensor, b: &Tensor) -> Result<(Tensor, Tensor), AdError> {
    let (a2, _) = promote_lhs(a)?;
    let (b2, _) = promote_rhs(b)?;
    let g2 = g.reshaped(vec![a2.shape()[0], b2.shape()[1]])?;
    let ga = matmul_value(&g2, &b2.transposed()?)?.reshaped(a.shape().to_vec())?;
    let gb = matmul_value(&a2.transposed()?, &g2)?.reshaped(b.shape().to_vec())?;
    Ok((ga, gb))
}

pub(crate) fn softmax_value(t: &Tensor, axis: usize) -> Result<Tensor, AdError> {
    let lanes = lane_iter(t.shape(), axis)?;
    let mut out = t.clone();
    for lane in lanes {
        let max = lane.iter().map(|&i| t.data()[i]).fold(f64::NEG_INFINITY, f64::max);
        let mut z = 0.0;
        for &i in &lane {
            let e = (t.data()[i] - max).exp();
            out.data_mut()[i] = e;
            z += e;
        }
        for &i in &lane {
            out.data_mut()[i] /= z;
        }
    }
    Ok(out)
}

fn softmax_backward(g: &Tensor, y: &Tensor, axis: usize) -> Result<Tensor, AdError> {
    let lanes = lane_iter(y.shape(), axis)?;
    let mut out = g.clone();
    for lane in lanes {
        let dot: f64 = lane.iter().map(|&i| g.data()[i] * y.data()[i]).sum();
        for &i in &lane {
            out.data_mut()[i] = y.data()[i] * (g.data()[i] - dot);
        }
    }
    Ok(out)
}

/// Index lists for each 1-D lane along `axis` of a 1-D or 2-D shape.
pub(crate) fn lane_iter(shape: &[usize], axis: usize) -> Result<Vec<Vec<usize>>, AdError> {
    match (shape.len(), axis) {
        (1, 0) => Ok(vec![(0..shape[0]).collect()]),
        (2, 0) => {
            let (r, c) = (shape[0], shape[1]);
            Ok((0..c).map(|j| (0..r).map(|i| i * c + j).collect()).collect())
        }
        (2, 1) => {
            let (r, c) = (shape[0], shape[1]);
            Ok((0..r).map(|i| (0..c).map(|j| i * c + j).collect()).collect())
        }
        _ => Err(AdError::ShapeMismatch {
            op: "softmax",
            lhs: shape.to_vec(),
            rhs: vec![axis],
        }),
    }
}

pub(crate) fn sum_value(t: &Tensor, axis: Option<usize>) -> Result<Tensor, AdError> {
    match axis {
        None => Ok(Tensor::scalar(t.data().iter().sum())),
        Some(ax) => {
            if t.rank() != 2 || ax > 1 {
                return Err(AdError::ShapeMismatch {
                    op: "sum",
                    lhs: t.shape().to_vec(),
                    rhs: vec![ax],
                });
            }
            let (r, c) = (t.shape()[0], t.shape()[1]);
            if ax == 0 {
                let mut out = Tensor::zeros(vec![c]);
                for i in 0..r {
                    for j in 0..c {
                        out.data_mut()[j] += t.data()[i * c + j];
                    }
                }
                Ok(out)
            } else {
                let mut out = Tensor::zeros(vec![r]);
                for i in 0..r {
                    for j in 0..c {
                        out.data_mut()[i] += t.data()[i * c + j];
                    }
                }
                Ok(out)
            }
        }
    }
}

fn sum_backward(g: &Tensor, in_shape: &[usize], op: &Op) -> Result<Tensor, AdError> {
    let axis = match op {
        Op::Sum(_, axis) => *axis,
        _ => unreachable!(),
    };
    match axis {
        None => {
            let fill = g.item();
            Ok(Tensor::zeros(in_shape.to_vec()).map(|_| fill))
        }
        Some(ax) => {
            let (r, c) = (in_shape[0], in_shape[1]);
            let mut out = Tensor::zeros(in_shape.to_vec());
            for i in 0..r {
                for j in 0..c {
                    out.data_mut()[i * c + j] = if ax == 0 { g.data()[j] } else { g.data()[i] };
                }
            }
            Ok(out)
        }
    }
}

pub(crate) fn concat_value(parts: &[&Tensor], axis: usize) -> Result<Tensor, AdError> {
    let rank = parts[0].rank();
    if axis >= rank.max(1) {
        return Err(AdError::ShapeMismatch {
            op: "concat",
            lhs: parts[0].shape().to_vec(),
            rhs: vec![axis],
        });
    }
    match rank {
        1 => {
            let mut data = Vec::new();
            for p in parts {
                if p.rank() != 1 {
                    return Err(AdError::ShapeMismatch {
                        op: "concat",
                        lhs: parts[0].shape().to_vec(),
                        rhs: p.shape().to_vec(),
                    });
                }
                data.extend_from_slice(p.data());
            }
            Ok(Tensor::vector(data))
        }
        2 => {
            let other = 1 - axis;
            let fixed = parts[0].shape()[other];
            for p in parts {
                if p.rank() != 2 || p.shape()[other] != fixed {
                    return Err(AdError::ShapeMismatch {
                        op: "concat",
                        lhs: parts[0].shape().to_vec(),
                        rhs: p.shape().to_vec(),
                    });
                }
            }
            let total: usize = parts.iter().map(|p| p.shape()[axis]).sum();
            let (rows, cols) = if axis == 0 { (total, fixed) } else { (fixed, total) };
            let mut out = Tensor::zeros(vec![rows, cols]);
            let mut start = 0usize;
            for p in parts {
                let len = p.shape()[axis];
                for i in 0..p.shape()[0] {
                    for j in 0..p.shape()[1] {
                        let (oi, oj) = if axis == 0 { (start + i, j) } else { (i, start + j) };
                        out.set2(oi, oj, p.at2(i, j));
                    }
                }
                start += len;
            }
            Ok(out)
        }
        _ => Err(AdError::ShapeMismatch {
            op: "concat",
            lhs: parts[0].shape().to_vec(),
            rhs: vec![axis],
        }),
    }
}

pub(crate) fn slice_value(t: &Tensor, axis: usize, start: usize, len: usize) -> Result<Tensor, AdError> {
    match t.rank() {
        1 => {
            if axis != 0 || start + len > t.len() {
                return Err(AdError::ShapeMismatch {
                    op: "slice",
                    lhs: t.shape().to_vec(),
                    rhs: vec![axis, start, len],
                });
            }
            Ok(Tensor::vector(t.data()[start..start + len].to_vec()))
        }
        2 => {
            if axis > 1 || start + len > t.shape()[axis] {
                return Err(AdError::ShapeMismatch {
                    op: "slice",
                    lhs: t.shape().to_vec(),
                    rhs: vec![axis, start, len],
                });
            }
            let (r, c) = (t.shape()[0], t.shape()[1]);
            if axis == 0 {
                let mut data = Vec::with_capacity(len * c);
                for i in start..start + len {
                    data.extend_from_slice(&t.data()[i * c..(i + 1) * c]);
                }
                Tensor::new(vec![len, c], data)
            } else {
                let mut data = Vec::with_capacity(r * len);
                for i in 0..r {
                    data.extend_from_slice(&t.data()[i * c + start..i * c + start + len]);
                }
                Tensor::new(vec![r, len], data)
            }
        }
        _ => Err(AdError::ShapeMismatch {
            op: "slice",
            lhs: t.shape().to_vec(),
            rhs: vec![axis, start, len],
        }),
    }
}

pub(crate) fn scatter_slice(g: &Tensor, in_shape: &[usize], axis: usize, start: usize) -> Tensor {
    let mut out = Tensor::zeros(in_shape.to_vec());
    match in_shape.len() {
        1 => {
            for (k, v) in g.data().iter().enumerate() {
                out.data_mut()[start + k] = *v;
            }
        }
        2 => {
            let c = in_shape[1];
            let (gr, gc) = (g.shape()[0], g.shape()[1]);
            for i in 0..gr {
                for j in 0..gc {
                    let (oi, oj) = if axis == 0 { (start + i, j) } else { (i, start + j) };
                    out.data_mut()[oi * c + oj] = g.data()[i * gc + j];
                }
            }
        }
        _ => unreachable!("slice only defined for rank 1 and 2"),
    }
    out
}
