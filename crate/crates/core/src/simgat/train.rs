//! Adam training loop with a seeded day-level 80/20 split.

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha20Rng;
use serde::{Deserialize, Serialize};

use crate::domain::{CityGraph, FlowTable};
use crate::Tensor;

use super::forward::{poisson_loss_value, ForwardPass};
use super::model::{SimGatModel, PARAM_NAMES};
use crate::autodiff::{GradCheckReport, ParamCheck};
use super::SimGatError;

const ADAM_B1: f64 = 0.9;
const ADAM_B2: f64 = 0.999;
const ADAM_EPS: f64 = 1e-8;

pub struct Dataset<'a> {
    pub city: &'a CityGraph,
    pub flows: &'a FlowTable,
}

impl Dataset<'_> {
    /// Day indices with a full environment window, paired with their dense
    /// n×m observed counts.
    pub fn usable_days(&self, window: usize) -> Vec<(usize, Tensor)> {
        let n = self.city.n_clusters();
        let m = self.city.n_neighborhoods();
        (window - 1..self.city.n_days())
            .map(|d| (d, self.flows.dense_for_date(self.city.dates[d], n, m)))
            .collect()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EpochStats {
    pub epoch: usize,
    pub train_loss: f64,
    pub val_loss: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrainReport {
    pub epochs: Vec<EpochStats>,
    pub best_epoch: usize,
    pub best_val_loss: f64,
    pub seed: u64,
    pub train_days: Vec<usize>,
    pub val_days: Vec<usize>,
    /// Wall time is run-dependent; it never enters serialized artifacts.
    #[serde(skip)]
    pub wall_time_secs: f64,
}

struct Adam {
    m: Vec<Tensor>,
    v: Vec<Tensor>,
    t: usize,
}

impl Adam {
    fn new(params: &[Tensor]) -> Self {
        Adam {
            m: params.iter().map(|p| Tensor::zeros(p.shape().to_vec())).collect(),
            v: params.iter().map(|p| Tensor::zeros(p.shape().to_vec())).collect(),
            t: 0,
        }
    }

    fn step(&mut self, params: &mut [Tensor], grads: &[Tensor], lr: f64) {
        self.t += 1;
        let bc1 = 1.0 - ADAM_B1.powi(self.t as i32);
        let bc2 = 1.0 - ADAM_B2.powi(self.t as i32);
        for ((p, g), (m, v)) in
            params.iter_mut().zip(grads).zip(self.m.iter_mut().zip(self.v.iter_mut()))
        {
            for i in 0..p.len() {
                let gi = g.data()[i];
                m.data_mut()[i] = ADAM_B1 * m.data()[i] + (1.0 - ADAM_B1) * gi;
                v.data_mut()[i] = ADAM_B2 * v.data()[i] + (1.0 - ADAM_B2) * gi * gi;
                let mhat = m.data()[i] / bc1;
                let vhat = v.data()[i] / bc2;
                p.data_mut()[i] -= lr * mhat / (vhat.sqrt() + ADAM_EPS);
            }
        }
    }
}

/// Central-difference check of every model parameter against the tape
/// gradient of the mean Poisson loss over `days`.
pub fn check_gradients(
    model: &SimGatModel,
    city: &CityGraph,
    days: &[(usize, Tensor)],
    h: f64,
    tolerance: f64,
) -> Result<GradCheckReport, SimGatError> {
    let fp = ForwardPass::new(model)?;
    let loss = fp.batch_loss(city, days)?;
    let grads = fp.tape.backward(loss)?;

    let eval = |m: &SimGatModel| -> Result<f64, SimGatError> {
        let fp = ForwardPass::new(m)?;
        let l = fp.batch_loss(city, days)?;
        Ok(fp.tape.value(l).item())
    };

    let mut working = model.clone();
    let mut checks = Vec::with_capacity(model.params.len());
    let mut overall: f64 = 0.0;
    for slot in 0..model.params.len() {
        let g = &grads[fp.param_vars[slot].0];
        let mut worst: f64 = 0.0;
        for e in 0..model.params[slot].len() {
            let orig = model.params[slot].data()[e];
            working.params[slot].data_mut()[e] = orig + h;
            let fplus = eval(&working)?;
            working.params[slot].data_mut()[e] = orig - h;
            let fminus = eval(&working)?;
            working.params[slot].data_mut()[e] = orig;
            let fd = (fplus - fminus) / (2.0 * h);
            let ad = g.data()[e];
            let rel = (ad - fd).abs() / (ad.abs() + fd.abs()).max(1e-8);
            worst = worst.max(rel);
        }
        overall = overall.max(worst);
        checks.push(ParamCheck {
            name: PARAM_NAMES[slot].to_string(),
            max_rel_err: worst,
            pass: worst < tolerance,
        });
    }
    Ok(GradCheckReport {
        h,
        tolerance,
        params: checks,
        max_rel_err: overall,
        pass: overall < tolerance,
    })
}

/// Mean Poisson loss of `model` over the given days, without gradients.
pub fn eval_loss(
    model: &SimGatModel,
    city: &CityGraph,
    days: &[(usize, Tensor)],
) -> Result<f64, SimGatError> {
    if days.is_empty() {
        return Err(SimGatError::Shape("no days to evaluate".into()));
    }
    let mut total = 0.0;
    for (day, observed) in days {
        let fp = ForwardPass::new(model)?;
        let out = fp.predict_flows(city, *day)?;
        total += poisson_loss_value(&fp.tape.value(out.lambda), observed);
    }
    Ok(total / days.len() as f64)
}

/// Trains a copy of `model` and returns the best-validation checkpoint with
/// the per-epoch report. Fully deterministic for a fixed seed.
pub fn train(
    model: &SimGatModel,
    dataset: &Dataset,
) -> Result<(SimGatModel, TrainReport), SimGatError> {
    train_with_inspect(model, dataset, |_, _| {})
}

/// [`train`] with a hook called after every epoch's optimizer steps, for
/// inspecting intermediate parameters.
pub fn train_with_inspect<F>(
    model: &SimGatModel,
    dataset: &Dataset,
    mut inspect: F,
) -> Result<(SimGatModel, TrainReport), SimGatError>
where
    F: FnMut(usize, &SimGatModel),
{
    let cfg = model.config;
    cfg.validate()?;
    let started = std::time::Instant::now();
    let all_days = dataset.usable_days(cfg.lstm_window);
    if all_days.len() < 2 {
        return Err(SimGatError::InsufficientDays {
            have: all_days.len(),
            need: cfg.lstm_window + 1,
        });
    }
    let mut rng = ChaCha20Rng::seed_from_u64(cfg.seed);
    let mut order: Vec<usize> = (0..all_days.len()).collect();
    order.shuffle(&mut rng);
    let n_val = ((all_days.len() as f64 * 0.2).round() as usize).clamp(1, all_days.len() - 1);
    let (val_idx, train_idx) = order.split_at(n_val);
    let mut train_set: Vec<(usize, Tensor)> =
        train_idx.iter().map(|&i| all_days[i].clone()).collect();
    let val_set: Vec<(usize, Tensor)> = val_idx.iter().map(|&i| all_days[i].clone()).collect();
    let train_days: Vec<usize> = train_set.iter().map(|(d, _)| *d).collect();
    let val_days: Vec<usize> = val_set.iter().map(|(d, _)| *d).collect();

    let mut current = model.clone();
    let mut adam = Adam::new(&current.params);
    let mut epochs = Vec::with_capacity(cfg.epochs);
    let mut best: Option<(usize, f64, SimGatModel)> = None;

    for epoch in 1..=cfg.epochs {
        train_set.shuffle(&mut rng);
        for batch in train_set.chunks(cfg.batch_size) {
            let fp = ForwardPass::new(&current)?;
            let loss = fp.batch_loss(dataset.city, batch)?;
            let grads = fp.tape.backward(loss)?;
            let grad_slice: Vec<Tensor> =
                fp.param_vars.iter().map(|v| grads[v.0].clone()).collect();
            adam.step(&mut current.params, &grad_slice, cfg.learning_rate);
        }
        inspect(epoch, &current);
        let train_loss = eval_loss(&current, dataset.city, &train_set)?;
        let val_loss = eval_loss(&current, dataset.city, &val_set)?;
        epochs.push(EpochStats { epoch, train_loss, val_loss });
        let improved = best.as_ref().map_or(true, |(_, b, _)| val_loss < *b);
        if improved {
            best = Some((epoch, val_loss, current.clone()));
        }
    }

    let (best_epoch, best_val_loss, checkpoint) = best.expect("epochs >= 1");
    Ok((
        checkpoint,
        TrainReport {
            epochs,
            best_epoch,
            best_val_loss,
            seed: cfg.seed,
            train_days,
            val_days,
            wall_time_secs: started.elapsed().as_secs_f64(),
        },
    ))
}
