//! DeepLIFT multiplier propagation over the tape.
//!
//! Multipliers play the role gradients do in `backward`, but each rule is an
//! exact finite-difference decomposition between the recorded input and a
//! reference input:
//! - affine ops use the linear rule (multiplier = weight);
//! - elementwise nonlinearities use Rescale (Δout/Δin, falling back to the
//!   derivative when |Δin| < 1e-7);
//! - products/divisions/matmuls use the symmetric exact split
//!   Δ(ab) = ā·Δb + b̄·Δa with ā = (a + a_ref)/2;
//! - softmax is decomposed into exp and the normalizing division, each with
//!   its own exact multiplier, or held constant in frozen mode.
//!
//! With frozen softmax every rule is exact, so completeness
//! (Σ contributions = f(x) − f(x_ref)) holds to rounding.

use std::collections::HashMap;

use super::tape::{
    accumulate, concat_value, lane_iter, matmul_backward, matmul_value, scatter_slice, sigmoid,
    slice_value, softmax_value, softplus, sum_value, Op, Tape,
};
use super::tensor::{broadcast_zip, reduce_to_shape, Tensor};
use super::{AdError, Var};

/// |Δin| below this uses the derivative instead of Δout/Δin.
pub const RESCALE_EPS: f64 = 1e-7;

/// Multipliers and both forward evaluations, indexed by node id.
/// Contribution of leaf `v` = `multipliers[v] ⊙ (x_values[v] − ref_values[v])`.
pub struct DeepLift {
    pub multipliers: Vec<Tensor>,
    pub x_values: Vec<Tensor>,
    pub ref_values: Vec<Tensor>,
    /// f(x) − f(x_ref) for the attributed output.
    pub delta_out: f64,
}

impl DeepLift {
    pub fn contribution(&self, leaf: Var) -> Tensor {
        let m = &self.multipliers[leaf.0];
        let x = &self.x_values[leaf.0];
        let r = &self.ref_values[leaf.0];
        let mut out = m.clone();
        for (o, (xv, rv)) in out.data_mut().iter_mut().zip(x.data().iter().zip(r.data())) {
            *o *= xv - rv;
        }
        out
    }

    /// |Σ leaf contributions − Δout| over the given leaves.
    pub fn residual(&self, leaves: &[Var]) -> f64 {
        let total: f64 = leaves
            .iter()
            .map(|&v| self.contribution(v).data().iter().sum::<f64>())
            .sum();
        (total - self.delta_out).abs()
    }
}

impl Tape {
    /// Attributes the scalar `output` to the leaves named in `ref_inputs`,
    /// each evaluated against its reference value. Leaves not listed keep
    /// their recorded values (zero difference, zero contribution).
    pub fn deeplift(
        &self,
        output: Var,
        ref_inputs: &[(Var, Tensor)],
        frozen_softmax: bool,
    ) -> Result<DeepLift, AdError> {
        let upto = output.0;
        if self.value_of(upto).len() != 1 {
            return Err(AdError::NonScalarLoss { shape: self.shape(output) });
        }
        if matches!(self.op_of(upto), Op::Leaf { .. }) {
            return Err(AdError::Domain {
                op: "deeplift",
                detail: "output is a leaf; nothing to attribute".into(),
            });
        }
        let mut overrides: HashMap<usize, Tensor> = HashMap::new();
        for (v, r) in ref_inputs {
            if !matches!(self.op_of(v.0), Op::Leaf { .. }) {
                return Err(AdError::Domain {
                    op: "deeplift",
                    detail: "reference given for a non-leaf node".into(),
                });
            }
            if r.shape() != self.shape(*v).as_slice() {
                return Err(AdError::ShapeMismatch {
                    op: "deeplift",
                    lhs: self.shape(*v),
                    rhs: r.shape().to_vec(),
                });
            }
            overrides.insert(v.0, r.clone());
        }

        let ref_values = self.replay(upto, &overrides, None)?;
        let x_values = if frozen_softmax {
            // both sides see the softmax frozen at its reference value
            self.replay(upto, &HashMap::new(), Some(&ref_values))?
        } else {
            (0..=upto).map(|i| self.value_of(i)).collect()
        };
        let delta_out = x_values[upto].item() - ref_values[upto].item();

        let mut mult: Vec<Tensor> = x_values.iter().map(|t| Tensor::zeros(t.shape().to_vec())).collect();
        mult[upto].data_mut()[0] = 1.0;

        for idx in (0..=upto).rev() {
            let mo = mult[idx].clone();
            if mo.data().iter().all(|&x| x == 0.0) {
                continue;
            }
            match self.op_of(idx) {
                Op::Leaf { .. } => {}
                Op::Add(a, b) => {
                    accumulate(&mut mult[a], &reduce_to_shape(&mo, x_values[a].shape()));
                    accumulate(&mut mult[b], &reduce_to_shape(&mo, x_values[b].shape()));
                }
                Op::Sub(a, b) => {
                    accumulate(&mut mult[a], &reduce_to_shape(&mo, x_values[a].shape()));
                    let neg = mo.map(|x| -x);
                    accumulate(&mut mult[b], &reduce_to_shape(&neg, x_values[b].shape()));
                }
                Op::Mul(a, b) => {
                    let abar = average(&x_values[a], &ref_values[a]);
                    let bbar = average(&x_values[b], &ref_values[b]);
                    let ga = broadcast_zip("dl_mul", &mo, &bbar, |x, y| x * y)?;
                    let gb = broadcast_zip("dl_mul", &mo, &abar, |x, y| x * y)?;
                    accumulate(&mut mult[a], &reduce_to_shape(&ga, x_values[a].shape()));
                    accumulate(&mut mult[b], &reduce_to_shape(&gb, x_values[b].shape()));
                }
                Op::Div(a, b) => {
                    // c·b = a, so Δc = (Δa − c̄·Δb)/b̄ exactly while b̄ ≠ 0
                    let cbar = average(&x_values[idx], &ref_values[idx]);
                    // lift b to the output shape on both sides
                    let bx = broadcast_zip("dl_div", &x_values[idx], &x_values[b], |_, y| y)?;
                    let bbar_full = {
                        let br = broadcast_zip("dl_div", &x_values[idx], &ref_values[b], |_, y| y)?;
                        broadcast_zip("dl_div", &bx, &br, |x, r| (x + r) / 2.0)?
                    };
                    let denom = broadcast_zip("dl_div", &bbar_full, &bx, |m, x| {
                        if m.abs() >= 1e-12 {
                            m
                        } else {
                            x
                        }
                    })?;
                    let cfac = {
                        let sel = broadcast_zip("dl_div", &bbar_full, &cbar, |m, c| {
                            if m.abs() >= 1e-12 {
                                c
                            } else {
                                f64::NAN // replaced below by the x-side value
                            }
                        })?;
                        broadcast_zip("dl_div", &sel, &x_values[idx], |s, cx| {
                            if s.is_nan() {
                                cx
                            } else {
                                s
                            }
                        })?
                    };
                    let ga = broadcast_zip("dl_div", &mo, &denom, |x, d| x / d)?;
                    let gb = {
                        let num = broadcast_zip("dl_div", &mo, &cfac, |x, c| -x * c)?;
                        broadcast_zip("dl_div", &num, &denom, |x, d| x / d)?
                    };
                    accumulate(&mut mult[a], &reduce_to_shape(&ga, x_values[a].shape()));
                    accumulate(&mut mult[b], &reduce_to_shape(&gb, x_values[b].shape()));
                }
                Op::MatMul(a, b) => {
                    let abar = average(&x_values[a], &ref_values[a]);
                    let bbar = average(&x_values[b], &ref_values[b]);
                    let (ga, gb) = matmul_backward(&mo, &abar, &bbar)?;
                    accumulate(&mut mult[a], &ga);
                    accumulate(&mut mult[b], &gb);
                }
                Op::Transpose(a) => accumulate(&mut mult[a], &mo.transposed()?),
                Op::Reshape(a) => {
                    accumulate(&mut mult[a], &mo.reshaped(x_values[a].shape().to_vec())?)
                }
                Op::Exp(a) => {
                    let ga = rescale(&mo, &x_values[a], &ref_values[a], &x_values[idx], &ref_values[idx], |_, yo| yo);
                    accumulate(&mut mult[a], &ga);
                }
                Op::Ln(a) => {
                    let ga = rescale(&mo, &x_values[a], &ref_values[a], &x_values[idx], &ref_values[idx], |xi, _| 1.0 / xi);
                    accumulate(&mut mult[a], &ga);
                }
                Op::ClampMin(a, floor) => {
                    let ga = rescale(&mo, &x_values[a], &ref_values[a], &x_values[idx], &ref_values[idx], |xi, _| {
                        if xi >= floor {
                            1.0
                        } else {
                            0.0
                        }
                    });
                    accumulate(&mut mult[a], &ga);
                }
                Op::Sigmoid(a) => {
                    let ga = rescale(&mo, &x_values[a], &ref_values[a], &x_values[idx], &ref_values[idx], |_, yo| yo * (1.0 - yo));
                    accumulate(&mut mult[a], &ga);
                }
                Op::Tanh(a) => {
                    let ga = rescale(&mo, &x_values[a], &ref_values[a], &x_values[idx], &ref_values[idx], |_, yo| 1.0 - yo * yo);
                    accumulate(&mut mult[a], &ga);
                }
                Op::LeakyRelu(a, slope) => {
                    let ga = rescale(&mo, &x_values[a], &ref_values[a], &x_values[idx], &ref_values[idx], |xi, _| {
                        if xi > 0.0 {
                            1.0
                        } else {
                            slope
                        }
                    });
                    accumulate(&mut mult[a], &ga);
                }
                Op::Softplus(a) => {
                    let ga = rescale(&mo, &x_values[a], &ref_values[a], &x_values[idx], &ref_values[idx], |xi, _| sigmoid(xi));
                    accumulate(&mut mult[a], &ga);
                }
                Op::Softmax(a, axis) => {
                    if frozen_softmax {
                        continue; // held constant: nothing flows to the scores
                    }
                    let ga = softmax_multiplier(
                        &mo,
                        &x_values[a],
                        &ref_values[a],
                        &x_values[idx],
                        &ref_values[idx],
                        axis,
                    )?;
                    accumulate(&mut mult[a], &ga);
                }
                Op::Sum(a, axis) => {
                    let shape = x_values[a].shape();
                    let ga = match axis {
                        None => {
                            let fill = mo.item();
                            Tensor::zeros(shape.to_vec()).map(|_| fill)
                        }
                        Some(ax) => {
                            let (r, c) = (shape[0], shape[1]);
                            let mut out = Tensor::zeros(shape.to_vec());
                            for i in 0..r {
                                for j in 0..c {
                                    out.data_mut()[i * c + j] =
                                        if ax == 0 { mo.data()[j] } else { mo.data()[i] };
                                }
                            }
                            out
                        }
                    };
                    accumulate(&mut mult[a], &ga);
                }
                Op::Mean(a) => {
                    let fill = mo.item() / x_values[a].len() as f64;
                    let ga = x_values[a].map(|_| fill);
                    accumulate(&mut mult[a], &ga);
                }
                Op::Concat(parts, axis) => {
                    let mut start = 0usize;
                    for p in parts {
                        let len = x_values[p].shape()[axis];
                        let gp = slice_value(&mo, axis, start, len)?;
                        accumulate(&mut mult[p], &gp);
                        start += len;
                    }
                }
                Op::Slice { input, axis, start, len: _ } => {
                    let ga = scatter_slice(&mo, x_values[input].shape(), axis, start);
                    accumulate(&mut mult[input], &ga);
                }
                Op::Scale(a, c) => accumulate(&mut mult[a], &mo.map(|x| c * x)),
                Op::AddScalar(a, _) => accumulate(&mut mult[a], &mo),
            }
        }

        Ok(DeepLift { multipliers: mult, x_values, ref_values, delta_out })
    }

    /// Re-evaluates nodes 0..=`upto` with `overrides` substituted at leaves;
    /// `frozen` pins every softmax node to the supplied values.
    fn replay(
        &self,
        upto: usize,
        overrides: &HashMap<usize, Tensor>,
        frozen: Option<&[Tensor]>,
    ) -> Result<Vec<Tensor>, AdError> {
        let mut vals: Vec<Tensor> = Vec::with_capacity(upto + 1);
        for idx in 0..=upto {
            let v = match self.op_of(idx) {
                Op::Leaf { .. } => {
                    overrides.get(&idx).cloned().unwrap_or_else(|| self.value_of(idx))
                }
                Op::Add(a, b) => broadcast_zip("add", &vals[a], &vals[b], |x, y| x + y)?,
                Op::Sub(a, b) => broadcast_zip("sub", &vals[a], &vals[b], |x, y| x - y)?,
                Op::Mul(a, b) => broadcast_zip("mul", &vals[a], &vals[b], |x, y| x * y)?,
                Op::Div(a, b) => broadcast_zip("div", &vals[a], &vals[b], |x, y| x / y)?,
                Op::MatMul(a, b) => matmul_value(&vals[a], &vals[b])?,
                Op::Transpose(a) => vals[a].transposed()?,
                Op::Reshape(a) => vals[a].reshaped(self.shape(Var(idx)))?,
                Op::Exp(a) => vals[a].map(f64::exp),
                Op::Ln(a) => {
                    if vals[a].data().iter().any(|&x| x <= 0.0) {
                        return Err(AdError::Domain {
                            op: "deeplift",
                            detail: "reference evaluation hit ln of a nonpositive value".into(),
                        });
                    }
                    vals[a].map(f64::ln)
                }
                Op::ClampMin(a, floor) => vals[a].map(|x| x.max(floor)),
                Op::Sigmoid(a) => vals[a].map(sigmoid),
                Op::Tanh(a) => vals[a].map(f64::tanh),
                Op::LeakyRelu(a, slope) => {
                    vals[a].map(|x| if x > 0.0 { x } else { slope * x })
                }
                Op::Softplus(a) => vals[a].map(softplus),
                Op::Softmax(a, axis) => match frozen {
                    Some(f) => f[idx].clone(),
                    None => softmax_value(&vals[a], axis)?,
                },
                Op::Sum(a, axis) => sum_value(&vals[a], axis)?,
                Op::Mean(a) => {
                    Tensor::scalar(vals[a].data().iter().sum::<f64>() / vals[a].len() as f64)
                }
                Op::Concat(parts, axis) => {
                    let tensors: Vec<&Tensor> = parts.iter().map(|&p| &vals[p]).collect();
                    concat_value(&tensors, axis)?
                }
                Op::Slice { input, axis, start, len } => {
                    slice_value(&vals[input], axis, start, len)?
                }
                Op::Scale(a, c) => vals[a].map(|x| c * x),
                Op::AddScalar(a, c) => vals[a].map(|x| x + c),
            };
            vals.push(v);
        }
        Ok(vals)
    }
}

fn average(x: &Tensor, r: &Tensor) -> Tensor {
    let mut out = x.clone();
    for (o, rv) in out.data_mut().iter_mut().zip(r.data()) {
        *o = (*o + rv) / 2.0;
    }
    out
}

/// Elementwise Rescale: Δout/Δin where the difference is resolvable, the
/// x-side derivative otherwise. `deriv(x_in, x_out)` supplies the latter.
fn rescale(
    mo: &Tensor,
    xin: &Tensor,
    rin: &Tensor,
    xout: &Tensor,
    rout: &Tensor,
    deriv: impl Fn(f64, f64) -> f64,
) -> Tensor {
    let mut out = mo.clone();
    for i in 0..out.len() {
        let dx = xin.data()[i] - rin.data()[i];
        let local = if dx.abs() >= RESCALE_EPS {
            (xout.data()[i] - rout.data()[i]) / dx
        } else {
            deriv(xin.data()[i], xout.data()[i])
        };
        out.data_mut()[i] *= local;
    }
    out
}

/// Softmax as exp followed by an exact-quotient normalization, per lane.
/// Shift-invariant by construction: a constant added to a lane on both
/// sides cancels between the e-multipliers and Δe.
fn softmax_multiplier(
    mo: &Tensor,
    xin: &Tensor,
    rin: &Tensor,
    yx: &Tensor,
    yr: &Tensor,
    axis: usize,
) -> Result<Tensor, AdError> {
    let mut out = Tensor::zeros(xin.shape().to_vec());
    for lane in lane_iter(xin.shape(), axis)? {
        let max = lane
            .iter()
            .flat_map(|&i| [xin.data()[i], rin.data()[i]])
            .fold(f64::NEG_INFINITY, f64::max);
        let ex: Vec<f64> = lane.iter().map(|&i| (xin.data()[i] - max).exp()).collect();
        let er: Vec<f64> = lane.iter().map(|&i| (rin.data()[i] - max).exp()).collect();
        let zx: f64 = ex.iter().sum();
        let zr: f64 = er.iter().sum();
        let zbar = (zx + zr) / 2.0;
        // y = e/Z, so m_Z collects −Σ m_y·ȳ / Z̄ and feeds every e in the lane
        let mz: f64 = -lane
            .iter()
            .map(|&i| mo.data()[i] * (yx.data()[i] + yr.data()[i]) / 2.0)
            .sum::<f64>()
            / zbar;
        for (t, &i) in lane.iter().enumerate() {
            let me = mo.data()[i] / zbar + mz;
            let dx = xin.data()[i] - rin.data()[i];
            let local = if dx.abs() >= RESCALE_EPS {
                (ex[t] - er[t]) / dx
            } else {
                ex[t]
            };
            out.data_mut()[i] = me * local;
        }
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn leafy(t: &Tape, data: Vec<f64>) -> Var {
        t.leaf(Tensor::vector(data))
    }

    #[test]
    fn affine_model_is_exact() {
        let t = Tape::new();
        let x = leafy(&t, vec![0.3, -1.2, 2.0]);
        let w = t.constant(Tensor::vector(vec![1.5, -0.5, 0.25]));
        let y = t.add_scalar(t.sum(t.mul(w, x).unwrap(), None).unwrap(), 0.7).unwrap();
        let r = Tensor::vector(vec![0.0, 0.0, 0.0]);
        let dl = t.deeplift(y, &[(x, r)], false).unwrap();
        let contrib = dl.contribution(x);
        for (i, &(w_i, x_i)) in [(1.5, 0.3), (-0.5, -1.2), (0.25, 2.0)].iter().enumerate() {
            assert!((contrib.data()[i] - w_i * x_i).abs() < 1e-12);
        }
        assert!(dl.residual(&[x]) < 1e-12);
    }

    #[test]
    fn zero_difference_gives_zero_contributions() {
        let t = Tape::new();
        let x = leafy(&t, vec![0.4, -0.9]);
        let h = t.tanh(x).unwrap();
        let y = t.sum(t.exp(h).unwrap(), None).unwrap();
        let dl = t.deeplift(y, &[(x, Tensor::vector(vec![0.4, -0.9]))], false).unwrap();
        assert!(dl.contribution(x).data().iter().all(|&c| c == 0.0));
        assert!(dl.delta_out.abs() < 1e-15);
    }

    #[test]
    fn two_layer_leaky_matches_hand_rescale() {
        // 3 inputs → 2 hidden (leaky_relu, slope 0.2) → scalar
        let t = Tape::new();
        let x_data = vec![1.0, -2.0, 0.5];
        let r_data = vec![0.0, 0.0, 0.0];
        let w1 = Tensor::matrix(3, 2, vec![0.5, -1.0, 0.25, 0.75, -0.5, 0.3]).unwrap();
        let b1 = Tensor::vector(vec![0.1, -0.2]);
        let w2 = Tensor::vector(vec![2.0, -1.5]);
        let x = t.leaf(Tensor::vector(x_data.clone()));
        let h = t
            .leaky_relu(t.add(t.matmul(x, t.constant(w1.clone())).unwrap(), t.constant(b1.clone())).unwrap(), 0.2)
            .unwrap();
        let y = t.sum(t.mul(h, t.constant(w2.clone())).unwrap(), None).unwrap();
        let dl = t.deeplift(y, &[(x, Tensor::vector(r_data.clone()))], false).unwrap();
        let got = dl.contribution(x);

        // hand Rescale: pre-activations for x and ref, per-unit multipliers
        let pre = |inp: &[f64], c: usize| {
            b1.data()[c] + (0..3).map(|r| inp[r] * w1.at2(r, c)).sum::<f64>()
        };
        let act = |z: f64| if z > 0.0 { z } else { 0.2 * z };
        let mut m_x = [0.0f64; 3];
        for c in 0..2 {
            let zx = pre(&x_data, c);
            let zr = pre(&r_data, c);
            let m_h = w2.data()[c]; // linear head
            let m_z = if (zx - zr).abs() >= RESCALE_EPS {
                m_h * (act(zx) - act(zr)) / (zx - zr)
            } else {
                m_h * (if zx > 0.0 { 1.0 } else { 0.2 })
            };
            for r in 0..3 {
                m_x[r] += m_z * w1.at2(r, c);
            }
        }
        for r in 0..3 {
            let expect = m_x[r] * (x_data[r] - r_data[r]);
            assert!((got.data()[r] - expect).abs() < 1e-10, "input {r}");
        }
        assert!(dl.residual(&[x]) < 1e-10);
    }

    #[test]
    fn completeness_through_mixed_nonlinearities() {
        let t = Tape::new();
        let x = leafy(&t, vec![0.8, -0.3, 1.7, -2.2]);
        let d = leafy(&t, vec![1.4, 0.9, 2.5, 0.6]);
        let q = t.div(t.softplus(x).unwrap(), d).unwrap();
        let y = t.sum(t.exp(t.tanh(q).unwrap()).unwrap(), None).unwrap();
        let dl = t
            .deeplift(
                y,
                &[
                    (x, Tensor::vector(vec![0.0; 4])),
                    (d, Tensor::vector(vec![1.0; 4])),
                ],
                false,
            )
            .unwrap();
        assert!(dl.residual(&[x, d]) < 1e-9, "residual {}", dl.residual(&[x, d]));
    }

    #[test]
    fn frozen_softmax_is_complete() {
        let t = Tape::new();
        let x = leafy(&t, vec![0.5, -1.0, 2.0]);
        let s = t.softmax(t.leaky_relu(x, 0.2).unwrap(), 0).unwrap();
        let w = t.constant(Tensor::vector(vec![1.0, 2.0, 3.0]));
        // softmax output multiplies another x-dependent path
        let y = t.sum(t.mul(s, t.mul(w, x).unwrap()).unwrap(), None).unwrap();
        let dl = t.deeplift(y, &[(x, Tensor::vector(vec![0.0; 3]))], true).unwrap();
        assert!(dl.residual(&[x]) < 1e-12, "residual {}", dl.residual(&[x]));
        // frozen delta differs from the true one; both must be finite
        assert!(dl.delta_out.is_finite());
    }

    #[test]
    fn unfrozen_softmax_is_also_complete_and_shift_invariant() {
        let build = |shift: f64| {
            let t = Tape::new();
            let x = leafy(&t, vec![0.5, -1.0, 2.0]);
            let shifted = t.add_scalar(x, shift).unwrap();
            let s = t.softmax(shifted, 0).unwrap();
            let w = t.constant(Tensor::vector(vec![1.0, 2.0, 3.0]));
            let y = t.sum(t.mul(s, w).unwrap(), None).unwrap();
            let dl = t.deeplift(y, &[(x, Tensor::vector(vec![0.1, 0.2, -0.3]))], false).unwrap();
            (dl.residual(&[x]), dl.contribution(x))
        };
        let (res0, c0) = build(0.0);
        let (res1, c1) = build(5.0);
        assert!(res0 < 1e-12, "residual {res0}");
        assert!(res1 < 1e-12);
        for (a, b) in c0.data().iter().zip(c1.data()) {
            assert!((a - b).abs() < 1e-10, "shift changed attribution: {a} vs {b}");
        }
    }

    #[test]
    fn rejects_leaf_output_and_nonscalar() {
        let t = Tape::new();
        let x = leafy(&t, vec![1.0]);
        assert!(t.deeplift(x, &[], false).is_err());
        let y = t.exp(leafy(&t, vec![1.0, 2.0])).unwrap();
        assert!(t.deeplift(y, &[], false).is_err());
    }

    #[test]
    fn matches_gradient_for_infinitesimal_difference() {
        // reference ≈ input: multipliers collapse to the gradient
        let t = Tape::new();
        let x = leafy(&t, vec![0.7, -0.4]);
        let y = t.sum(t.sigmoid(t.exp(x).unwrap()).unwrap(), None).unwrap();
        let near = Tensor::vector(vec![0.7 + 1e-12, -0.4 - 1e-12]);
        let dl = t.deeplift(y, &[(x, near)], false).unwrap();
        let grads = t.backward(y).unwrap();
        for (m, g) in dl.multipliers[x.0].data().iter().zip(grads[x.0].data()) {
            assert!((m - g).abs() < 1e-9);
        }
    }
}
