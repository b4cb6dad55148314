//! Projected minibatch Adam ascent on the empirical variational objective.

use std::time::Instant;

use rand::seq::SliceRandom;
use serde::{Deserialize, Serialize};

use crate::distributions::{DistributionPair, PointSet};
use crate::divergences::DivergenceKind;
use crate::error::{Error, Result};
use crate::network::{Checkpoint, NetParams, NetworkClassSpec, ParamBounds};
use crate::rng::{self, purpose};

pub const ADAM_BETA1: f64 = 0.9;
pub const ADAM_BETA2: f64 = 0.999;
pub const ADAM_EPS: f64 = 1e-8;

fn default_epochs() -> usize {
    200
}
fn default_lr_initial() -> f64 {
    1e-2
}
fn default_lr_late() -> f64 {
    1e-3
}
fn default_lr_switch() -> usize {
    100
}

/// `max(1, round(n / 1000))`.
pub fn default_batch_size(n: usize) -> usize {
    ((n as f64 * 1e-3).round() as usize).max(1)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TrainConfig {
    pub kind: DivergenceKind,
    pub class_spec: NetworkClassSpec,
    pub k: usize,
    pub n: usize,
    #[serde(default = "default_epochs")]
    pub epochs: usize,
    /// Defaults to [`default_batch_size`].
    #[serde(default)]
    pub batch_size: Option<usize>,
    #[serde(default = "default_lr_initial")]
    pub lr_initial: f64,
    #[serde(default = "default_lr_late")]
    pub lr_late: f64,
    #[serde(default = "default_lr_switch")]
    pub lr_switch_epoch: usize,
    #[serde(default)]
    pub seed: u64,
}

impl TrainConfig {
    /// Defaults for everything but the problem definition.
    pub fn new(kind: DivergenceKind, class_spec: NetworkClassSpec, k: usize, n: usize, seed: u64) -> Self {
        Self {
            kind,
            class_spec,
            k,
            n,
            epochs: default_epochs(),
            batch_size: None,
            lr_initial: default_lr_initial(),
            lr_late: default_lr_late(),
            lr_switch_epoch: default_lr_switch(),
            seed,
        }
    }

    pub fn batch_size(&self) -> usize {
        self.batch_size.unwrap_or_else(|| default_batch_size(self.n))
    }

    pub fn validate(&self) -> Result<()> {
        if self.n == 0 || self.k == 0 {
            return Err(Error::config(format!("need n >= 1 and k >= 1 (got n={}, k={})", self.n, self.k)));
        }
        if self.epochs == 0 {
            return Err(Error::config("epochs must be at least 1"));
        }
        let bs = self.batch_size();
        if bs == 0 || bs > self.n {
            return Err(Error::config(format!("batch size {bs} must lie in [1, n={}]", self.n)));
        }
        for (name, lr) in [("lr_initial", self.lr_initial), ("lr_late", self.lr_late)] {
            if !(lr.is_finite() && lr > 0.0) {
                return Err(Error::config(format!("{name} must be positive, got {lr}")));
            }
        }
        if self.kind == DivergenceKind::SqHellinger && !self.class_spec.is_truncated() {
            return Err(Error::MissingTruncation);
        }
        Ok(())
    }

    /// Learning rate for `epoch`: the initial rate before the switch epoch, the late rate after.
    pub fn lr_at(&self, epoch: usize) -> f64 {
        if epoch < self.lr_switch_epoch {
            self.lr_initial
        } else {
            self.lr_late
        }
    }
}

/// Adam moment estimates, shaped like the flat parameter vector.
#[derive(Debug, Clone, PartialEq)]
pub struct AdamState {
    pub m: Vec<f64>,
    pub v: Vec<f64>,
    pub step: u64,
}

impl AdamState {
    pub fn new(len: usize) -> Self {
        Self { m: vec![0.0; len], v: vec![0.0; len], step: 0 }
    }
}

/// One bias-corrected Adam ascent step (`θ ← θ + lr·m̂/(√v̂ + ε)`).
///
/// The caller projects afterwards.
pub fn adam_step(state: &mut AdamState, params: &mut NetParams, grad: &NetParams, lr: f64) {
    assert_eq!(state.m.len(), params.len());
    assert_eq!(grad.len(), params.len());
    state.step += 1;
    let t = state.step as i32;
    let c1 = 1.0 - ADAM_BETA1.powi(t);
    let c2 = 1.0 - ADAM_BETA2.powi(t);
    let theta = params.as_mut_slice();
    for (i, &g) in grad.as_slice().iter().enumerate() {
        let m = ADAM_BETA1 * state.m[i] + (1.0 - ADAM_BETA1) * g;
        let v = ADAM_BETA2 * state.v[i] + (1.0 - ADAM_BETA2) * g * g;
        state.m[i] = m;
        state.v[i] = v;
        theta[i] += lr * (m / c1) / ((v / c2).sqrt() + ADAM_EPS);
    }
}

/// Hooks into a training run. Every method has an empty default.
pub trait TrainObserver {
    /// Called after each projected optimizer step.
    fn after_step(&mut self, _epoch: usize, _params: &NetParams, _bounds: &ParamBounds) {}

    /// Called with every network output computed during training.
    fn on_output(&mut self, _value: f64) {}
}

/// Observer that does nothing.
#[derive(Debug, Default, Clone, Copy)]
pub struct NoObserver;

impl TrainObserver for NoObserver {}

/// Counts class-constraint violations: out-of-box parameters after a step,
/// and outputs above the truncation cap.
#[derive(Debug, Default, Clone)]
pub struct ConstraintAudit {
    pub steps: u64,
    pub box_violations: u64,
    pub outputs: u64,
    pub cap: Option<f64>,
    pub cap_violations: u64,
}

impl ConstraintAudit {
    pub fn new(bounds: &ParamBounds) -> Self {
        Self { cap: bounds.cap(), ..Self::default() }
    }

    pub fn violations(&self) -> u64 {
        self.box_violations + self.cap_violations
    }

    pub fn merge(&mut self, other: &ConstraintAudit) {
        self.steps += other.steps;
        self.box_violations += other.box_violations;
        self.outputs += other.outputs;
        self.cap_violations += other.cap_violations;
    }
}

impl TrainObserver for ConstraintAudit {
    fn after_step(&mut self, _epoch: usize, params: &NetParams, bounds: &ParamBounds) {
        self.steps += 1;
        if !params.in_box(bounds) {
            self.box_violations += 1;
        }
        self.cap = bounds.cap();
    }

    fn on_output(&mut self, value: f64) {
        self.outputs += 1;
        if let Some(cap) = self.cap {
            if value > cap {
                self.cap_violations += 1;
            }
        }
    }
}

fn batch_objective_grad<'a, O: TrainObserver>(
    kind: DivergenceKind,
    params: &NetParams,
    bounds: &ParamBounds,
    xs: impl ExactSizeIterator<Item = &'a [f64]>,
    ys: impl ExactSizeIterator<Item = &'a [f64]>,
    grad: &mut NetParams,
    observer: &mut O,
) -> Result<f64> {
    grad.as_mut_slice().fill(0.0);
    let (nx, ny) = (xs.len(), ys.len());
    if nx == 0 || ny == 0 {
        return Err(Error::domain("objective needs non-empty batches from both P and Q"));
    }
    let wx = 1.0 / nx as f64;
    let wy = 1.0 / ny as f64;
    let mut p_sum = 0.0;
    for x in xs {
        let g = params.forward_accumulate(bounds, x, grad, |_| Ok::<_, Error>(wx))?;
        observer.on_output(g);
        p_sum += g;
    }
    let mut q_sum = 0.0;
    for y in ys {
        let g = params.forward_accumulate(bounds, y, grad, |g| Ok::<_, Error>(-wy * kind.gamma_prime(g)?))?;
        observer.on_output(g);
        q_sum += kind.gamma(g)?;
    }
    Ok(p_sum * wx - q_sum * wy)
}

/// Batch objective value and its gradient with respect to the parameters.
pub fn objective_grad(
    kind: DivergenceKind,
    params: &NetParams,
    bounds: &ParamBounds,
    batch_x: &PointSet,
    batch_y: &PointSet,
) -> Result<(f64, NetParams)> {
    let mut grad = NetParams::zeros(params.k(), params.d());
    let v = batch_objective_grad(kind, params, bounds, batch_x.iter(), batch_y.iter(), &mut grad, &mut NoObserver)?;
    Ok((v, grad))
}

fn full_objective<O: TrainObserver>(
    kind: DivergenceKind,
    params: &NetParams,
    bounds: &ParamBounds,
    xs: &PointSet,
    ys: &PointSet,
    observer: &mut O,
) -> Result<f64> {
    let mut p_sum = 0.0;
    for x in xs.iter() {
        let g = params.forward(bounds, x);
        observer.on_output(g);
        p_sum += g;
    }
    let mut q_sum = 0.0;
    for y in ys.iter() {
        let g = params.forward(bounds, y);
        observer.on_output(g);
        q_sum += kind.gamma(g)?;
    }
    Ok(p_sum / xs.len() as f64 - q_sum / ys.len() as f64)
}

#[derive(Debug, Clone, PartialEq)]
pub struct TrainResult {
    pub params: NetParams,
    pub bounds: ParamBounds,
    /// Full-sample empirical objective at the final parameters.
    pub estimate: f64,
    /// Full-sample empirical objective after each epoch.
    pub trajectory: Vec<f64>,
    pub wall_time_s: f64,
}

/// JSON form of a [`TrainResult`].
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrainReport {
    pub kind: DivergenceKind,
    pub k: usize,
    pub n: usize,
    pub seed: u64,
    pub estimate: f64,
    pub trajectory: Vec<f64>,
    pub wall_time_s: f64,
    pub checkpoint: Checkpoint,
}

impl TrainResult {
    pub fn report(&self, config: &TrainConfig) -> TrainReport {
        TrainReport {
            kind: config.kind,
            k: config.k,
            n: config.n,
            seed: config.seed,
            estimate: self.estimate,
            trajectory: self.trajectory.clone(),
            wall_time_s: self.wall_time_s,
            checkpoint: Checkpoint::new(&self.params, &self.bounds),
        }
    }
}

/// Draws `n` samples from each of P and Q and trains.
pub fn train(config: &TrainConfig, pair: &DistributionPair) -> Result<TrainResult> {
    train_observed(config, pair, &mut NoObserver)
}

pub fn train_observed<O: TrainObserver>(
    config: &TrainConfig,
    pair: &DistributionPair,
    observer: &mut O,
) -> Result<TrainResult> {
    config.validate()?;
    let xs = pair.p().sample(config.n, &mut rng::stream(config.seed, purpose::SAMPLE_P));
    let ys = pair.q().sample(config.n, &mut rng::stream(config.seed, purpose::SAMPLE_Q));
    train_on_samples(config, &xs, &ys, observer)
}

/// Trains on given samples. `config.n` is ignored in favor of the sample sizes.
pub fn train_on_samples<O: TrainObserver>(
    config: &TrainConfig,
    xs: &PointSet,
    ys: &PointSet,
    observer: &mut O,
) -> Result<TrainResult> {
    config.validate()?;
    if xs.is_empty() || ys.is_empty() || xs.dims() != ys.dims() {
        return Err(Error::config("training samples must be non-empty and of equal dimension"));
    }
    let start = Instant::now();
    let kind = config.kind;
    let bounds = config.class_spec.expand(config.k)?;
    let d = xs.dims();
    let mut params = NetParams::init(config.k, d, &bounds, &mut rng::stream(config.seed, purpose::INIT));
    let mut adam = AdamState::new(params.len());
    let mut grad = NetParams::zeros(config.k, d);

    let mut shuffle_x = rng::stream(config.seed, purpose::SHUFFLE_X);
    let mut shuffle_y = rng::stream(config.seed, purpose::SHUFFLE_Y);
    let mut order_x: Vec<usize> = (0..xs.len()).collect();
    let mut order_y: Vec<usize> = (0..ys.len()).collect();
    let batch = config.batch_size().min(xs.len()).min(ys.len()).max(1);
    let steps = xs.len().max(ys.len()).div_ceil(batch);

    let mut trajectory = Vec::with_capacity(config.epochs);
    for epoch in 0..config.epochs {
        let lr = config.lr_at(epoch);
        order_x.shuffle(&mut shuffle_x);
        order_y.shuffle(&mut shuffle_y);
        for step in 0..steps {
            let bx = chunk(&order_x, step, batch);
            let by = chunk(&order_y, step, batch);
            batch_objective_grad(
                kind,
                &params,
                &bounds,
                bx.iter().map(|&i| xs.point(i)),
                by.iter().map(|&i| ys.point(i)),
                &mut grad,
                observer,
            )?;
            adam_step(&mut adam, &mut params, &grad, lr);
            params.project_in_place(&bounds);
            observer.after_step(epoch, &params, &bounds);
        }
        let value = full_objective(kind, &params, &bounds, xs, ys, observer)?;
        if !value.is_finite() {
            return Err(Error::domain(format!("objective became non-finite ({value}) at epoch {epoch}")));
        }
        trajectory.push(value);
    }
    let estimate = *trajectory.last().expect("epochs >= 1");
    Ok(TrainResult { params, bounds, estimate, trajectory, wall_time_s: start.elapsed().as_secs_f64() })
}

/// The `step`-th batch of `order`, wrapping around when one side has fewer samples.
fn chunk(order: &[usize], step: usize, batch: usize) -> &[usize] {
    let per_pass = order.len().div_ceil(batch);
    let s = (step % per_pass) * batch;
    &order[s..(s + batch).min(order.len())]
}
