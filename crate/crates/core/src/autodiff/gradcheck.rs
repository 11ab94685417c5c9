//! Finite-difference gradient checking for tape-built losses.

use serde::Serialize;

use super::{AdError, Tape, Tensor, Var};

#[derive(Debug, Clone, Serialize)]
pub struct ParamCheck {
    pub name: String,
    pub max_rel_err: f64,
    pub pass: bool,
}

#[derive(Debug, Clone, Serialize)]
pub struct GradCheckReport {
    pub h: f64,
    pub tolerance: f64,
    pub params: Vec<ParamCheck>,
    pub max_rel_err: f64,
    pub pass: bool,
}

/// Compares tape gradients against central finite differences.
///
/// `build` must be deterministic: it receives a fresh tape plus leaves bound
/// to (possibly perturbed) copies of `params`, in order, and returns the
/// scalar loss. Relative error per entry is
/// |g_ad - g_fd| / max(1e-8, |g_ad| + |g_fd|).
pub fn grad_check<F>(
    build: F,
    params: &[(String, Tensor)],
    h: f64,
    tolerance: f64,
) -> Result<GradCheckReport, AdError>
where
    F: Fn(&Tape, &[Var]) -> Result<Var, AdError>,
{
    let tape = Tape::new();
    let vars: Vec<Var> = params.iter().map(|(_, t)| tape.leaf(t.clone())).collect();
    let loss = build(&tape, &vars)?;
    let grads = tape.backward(loss)?;

    let eval = |values: &[Tensor]| -> Result<f64, AdError> {
        let t = Tape::new();
        let vars: Vec<Var> = values.iter().map(|v| t.leaf(v.clone())).collect();
        let l = build(&t, &vars)?;
        Ok(t.value(l).item())
    };

    let mut working: Vec<Tensor> = params.iter().map(|(_, t)| t.clone()).collect();
    let mut checks = Vec::with_capacity(params.len());
    let mut overall: f64 = 0.0;
    for (pi, (name, tensor)) in params.iter().enumerate() {
        let mut worst: f64 = 0.0;
        for e in 0..tensor.len() {
            let orig = working[pi].data()[e];
            working[pi].data_mut()[e] = orig + h;
            let fp = eval(&working)?;
            working[pi].data_mut()[e] = orig - h;
            let fm = eval(&working)?;
            working[pi].data_mut()[e] = orig;
            let fd = (fp - fm) / (2.0 * h);
            let ad = grads[vars[pi].0].data()[e];
            let rel = (ad - fd).abs() / (ad.abs() + fd.abs()).max(1e-8);
            worst = worst.max(rel);
        }
        overall = overall.max(worst);
        checks.push(ParamCheck {
            name: name.clone(),
            max_rel_err: worst,
            pass: worst < tolerance,
        });
    }
    Ok(GradCheckReport {
        h,
        tolerance,
        max_rel_err: overall,
        pass: checks.iter().all(|c| c.pass),
        params: checks,
    })
}
