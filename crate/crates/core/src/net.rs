//! Small ReLU feedforward networks with exact reverse-mode gradients, Adam
//! training, and entrywise clamping of first-layer weights.

use ndarray::{Array1, Array2, ArrayView1, ArrayView2, Axis};
use rand::seq::SliceRandom;
use rand::Rng as _;
use serde::{Deserialize, Serialize};

use crate::error::{Result, SdamiError};
use crate::util::rng_from_seed;

/// Hidden-layer presets.
pub const ARCH_SMALL: [usize; 3] = [8, 6, 3];
pub const ARCH_MEDIUM: [usize; 3] = [12, 10, 6];
pub const ARCH_DEFAULT: [usize; 3] = [15, 12, 10];

/// Multilayer perceptron: ReLU on hidden layers, identity scalar output.
/// `weights[l]` has shape `(out, in)`.
#[derive(Debug, Clone, PartialEq)]
pub struct Mlp {
    pub layer_dims: Vec<usize>,
    pub weights: Vec<Array2<f64>>,
    pub biases: Vec<Array1<f64>>,
}

/// Gradient with the same layout as the network parameters.
#[derive(Debug, Clone, PartialEq)]
pub struct MlpGrad {
    pub weights: Vec<Array2<f64>>,
    pub biases: Vec<Array1<f64>>,
}

impl MlpGrad {
    pub fn flatten(&self) -> Vec<f64> {
        let mut out = Vec::new();
        for (w, b) in self.weights.iter().zip(&self.biases) {
            out.extend(w.iter().copied());
            out.extend(b.iter().copied());
        }
        out
    }
}

fn relu(v: f64) -> f64 {
    v.max(0.0)
}

impl Mlp {
    /// Fan-in uniform initialization `U(−1/√fan_in, 1/√fan_in)` for weights and biases.
    pub fn init(layer_dims: &[usize], seed: u64) -> Result<Mlp> {
        validate_dims(layer_dims)?;
        let mut rng = rng_from_seed(seed);
        let mut weights = Vec::new();
        let mut biases = Vec::new();
        for w in layer_dims.windows(2) {
            let (fan_in, fan_out) = (w[0], w[1]);
            let a = 1.0 / (fan_in as f64).sqrt();
            weights.push(Array2::from_shape_fn((fan_out, fan_in), |_| {
                rng.random_range(-a..a)
            }));
            biases.push(Array1::from_shape_fn(fan_out, |_| rng.random_range(-a..a)));
        }
        Ok(Mlp {
            layer_dims: layer_dims.to_vec(),
            weights,
            biases,
        })
    }

    /// Network with every parameter zero.
    pub fn zeros(layer_dims: &[usize]) -> Result<Mlp> {
        validate_dims(layer_dims)?;
        Ok(Mlp {
            layer_dims: layer_dims.to_vec(),
            weights: layer_dims
                .windows(2)
                .map(|w| Array2::zeros((w[1], w[0])))
                .collect(),
            biases: layer_dims.windows(2).map(|w| Array1::zeros(w[1])).collect(),
        })
    }

    /// Assemble from explicit parameters, checking the shape chain.
    pub fn from_parts(weights: Vec<Array2<f64>>, biases: Vec<Array1<f64>>) -> Result<Mlp> {
        if weights.is_empty() || weights.len() != biases.len() {
            return Err(SdamiError::DimensionMismatch(
                "weights and biases must be non-empty and paired".into(),
            ));
        }
        let mut dims = vec![weights[0].ncols()];
        for (l, (w, b)) in weights.iter().zip(&biases).enumerate() {
            if w.ncols() != *dims.last().expect("dims") || b.len() != w.nrows() {
                return Err(SdamiError::DimensionMismatch(format!(
                    "layer {l} shapes do not chain"
                )));
            }
            dims.push(w.nrows());
        }
        validate_dims(&dims)?;
        Ok(Mlp {
            layer_dims: dims,
            weights,
            biases,
        })
    }

    /// `[input, hidden…, 1]`.
    pub fn with_hidden(input: usize, hidden: &[usize], seed: u64) -> Result<Mlp> {
        let mut dims = vec![input];
        dims.extend_from_slice(hidden);
        dims.push(1);
        Mlp::init(&dims, seed)
    }

    pub fn input_dim(&self) -> usize {
        self.layer_dims[0]
    }

    pub fn parameter_count(&self) -> usize {
        self.weights.iter().map(|w| w.len()).sum::<usize>()
            + self.biases.iter().map(|b| b.len()).sum::<usize>()
    }

    pub fn is_finite(&self) -> bool {
        self.weights.iter().all(|w| w.iter().all(|v| v.is_finite()))
            && self.biases.iter().all(|b| b.iter().all(|v| v.is_finite()))
    }

    pub fn first_layer_max_abs(&self) -> f64 {
        self.weights[0].iter().fold(0.0, |m, v| m.max(v.abs()))
    }

    /// Clamp first-layer weights entrywise to `[−bound, bound]`.
    pub fn clamp_first_layer(&mut self, bound: f64) {
        if bound.is_finite() {
            self.weights[0].mapv_inplace(|v| v.clamp(-bound, bound));
        }
    }

    fn check_input(&self, x: &ArrayView2<f64>) -> Result<()> {
        if x.ncols() != self.input_dim() {
            return Err(SdamiError::DimensionMismatch(format!(
                "batch has {} columns, network expects {}",
                x.ncols(),
                self.input_dim()
            )));
        }
        Ok(())
    }

    /// Outputs for each row of `x`.
    pub fn forward(&self, x: ArrayView2<f64>) -> Result<Array1<f64>> {
        self.check_input(&x)?;
        let (acts, _) = self.forward_cache(x);
        Ok(acts.last().expect("output").column(0).to_owned())
    }

    /// Layer activations (input first) and hidden pre-activations.
    fn forward_cache(&self, x: ArrayView2<f64>) -> (Vec<Array2<f64>>, Vec<Array2<f64>>) {
        let depth = self.weights.len();
        let mut acts = vec![x.to_owned()];
        let mut pres = Vec::with_capacity(depth);
        for (l, (w, b)) in self.weights.iter().zip(&self.biases).enumerate() {
            let z = acts[l].dot(&w.t()) + b;
            if l + 1 < depth {
                acts.push(z.mapv(relu));
                pres.push(z);
            } else {
                acts.push(z);
            }
        }
        (acts, pres)
    }

    /// Gradient of `(1/n)Σ(pred − target)²` given `residual = pred − target`.
    pub fn grad(&self, x: ArrayView2<f64>, residual: ArrayView1<f64>) -> Result<MlpGrad> {
        self.check_input(&x)?;
        if residual.len() != x.nrows() {
            return Err(SdamiError::DimensionMismatch(format!(
                "residual of length {} for batch of {} rows",
                residual.len(),
                x.nrows()
            )));
        }
        let (acts, pres) = self.forward_cache(x);
        Ok(self.backward(&acts, &pres, residual))
    }

    fn backward(
        &self,
        acts: &[Array2<f64>],
        pres: &[Array2<f64>],
        residual: ArrayView1<f64>,
    ) -> MlpGrad {
        let n = residual.len().max(1) as f64;
        let depth = self.weights.len();
        let mut delta = residual.mapv(|r| 2.0 * r / n).insert_axis(Axis(1));
        let mut gw = vec![Array2::zeros((0, 0)); depth];
        let mut gb = vec![Array1::zeros(0); depth];
        for l in (0..depth).rev() {
            gw[l] = delta.t().dot(&acts[l]);
            gb[l] = delta.sum_axis(Axis(0));
            if l > 0 {
                let mut back = delta.dot(&self.weights[l]);
                back.zip_mut_with(&pres[l - 1], |d, z| {
                    if *z <= 0.0 {
                        *d = 0.0;
                    }
                });
                delta = back;
            }
        }
        MlpGrad {
            weights: gw,
            biases: gb,
        }
    }

    /// Parameters in layer order, each weight matrix row-major then its bias.
    pub fn flatten(&self) -> Vec<f64> {
        let mut out = Vec::with_capacity(self.parameter_count());
        for (w, b) in self.weights.iter().zip(&self.biases) {
            out.extend(w.iter().copied());
            out.extend(b.iter().copied());
        }
        out
    }

    pub fn set_flat(&mut self, params: &[f64]) -> Result<()> {
        if params.len() != self.parameter_count() {
            return Err(SdamiError::DimensionMismatch(format!(
                "{} parameters for a network with {}",
                params.len(),
                self.parameter_count()
            )));
        }
        let mut it = params.iter().copied();
        for (w, b) in self.weights.iter_mut().zip(self.biases.iter_mut()) {
            w.iter_mut()
                .for_each(|v| *v = it.next().expect("length checked"));
            b.iter_mut()
                .for_each(|v| *v = it.next().expect("length checked"));
        }
        Ok(())
    }
}

fn validate_dims(dims: &[usize]) -> Result<()> {
    if dims.len() < 2 || dims.contains(&0) {
        return Err(SdamiError::InvalidArgument(format!(
            "invalid layer dimensions {dims:?}"
        )));
    }
    if *dims.last().expect("non-empty") != 1 {
        return Err(SdamiError::InvalidArgument(format!(
            "output dimension must be 1 (got {dims:?})"
        )));
    }
    Ok(())
}

/// First-layer bound `κ · ‖f̂_g‖ₙ`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ConstraintSpec {
    pub kappa: f64,
    pub norm_scale: f64,
}

impl ConstraintSpec {
    pub fn new(kappa: f64, norm_scale: f64) -> Result<ConstraintSpec> {
        if !(kappa > 0.0) || !(norm_scale >= 0.0) {
            return Err(SdamiError::InvalidArgument(format!(
                "constraint needs kappa > 0 and norm_scale >= 0 (got {kappa}, {norm_scale})"
            )));
        }
        Ok(ConstraintSpec { kappa, norm_scale })
    }

    /// No effective constraint.
    pub fn unbounded() -> ConstraintSpec {
        ConstraintSpec {
            kappa: 1.0,
            norm_scale: f64::INFINITY,
        }
    }

    pub fn bound(&self) -> f64 {
        self.kappa * self.norm_scale
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct OptimizerConfig {
    pub learning_rate: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub epsilon: f64,
    pub epochs: usize,
    /// Full-batch training up to this many samples, mini-batches above.
    pub full_batch_max: usize,
    pub batch_size: usize,
    /// Stop when the relative loss improvement over `patience` epochs falls below `min_rel_improvement`.
    pub patience: usize,
    pub min_rel_improvement: f64,
}

impl Default for OptimizerConfig {
    fn default() -> Self {
        OptimizerConfig {
            learning_rate: 1e-3,
            beta1: 0.9,
            beta2: 0.999,
            epsilon: 1e-8,
            epochs: 2000,
            full_batch_max: 1000,
            batch_size: 128,
            patience: 100,
            min_rel_improvement: 1e-7,
        }
    }
}

impl OptimizerConfig {
    pub fn validate(&self) -> Result<()> {
        let ok = self.learning_rate > 0.0
            && (0.0..1.0).contains(&self.beta1)
            && (0.0..1.0).contains(&self.beta2)
            && self.epsilon > 0.0
            && self.batch_size > 0
            && self.patience > 0;
        if !ok {
            return Err(SdamiError::InvalidArgument(format!(
                "invalid optimizer settings {self:?}"
            )));
        }
        Ok(())
    }
}

#[derive(Debug, Clone)]
struct Adam {
    m: Vec<f64>,
    v: Vec<f64>,
    t: i32,
}

impl Adam {
    fn new(size: usize) -> Adam {
        Adam {
            m: vec![0.0; size],
            v: vec![0.0; size],
            t: 0,
        }
    }

    fn step(&mut self, params: &mut [f64], grad: &[f64], cfg: &OptimizerConfig) {
        self.t += 1;
        let c1 = 1.0 - cfg.beta1.powi(self.t);
        let c2 = 1.0 - cfg.beta2.powi(self.t);
        for i in 0..params.len() {
            self.m[i] = cfg.beta1 * self.m[i] + (1.0 - cfg.beta1) * grad[i];
            self.v[i] = cfg.beta2 * self.v[i] + (1.0 - cfg.beta2) * grad[i] * grad[i];
            params[i] -=
                cfg.learning_rate * (self.m[i] / c1) / ((self.v[i] / c2).sqrt() + cfg.epsilon);
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrainReport {
    /// Training loss per epoch (mean over mini-batches when batching).
    pub loss_trace: Vec<f64>,
    pub initial_loss: f64,
    pub final_loss: f64,
    pub epochs_run: usize,
    pub stopped_early: bool,
}

fn joint_prediction(nets: &[Mlp], inputs: &[ArrayView2<f64>], offset: f64) -> Result<Array1<f64>> {
    let n = inputs.first().map(|x| x.nrows()).unwrap_or(0);
    let mut pred = Array1::from_elem(n, offset);
    for (net, x) in nets.iter().zip(inputs) {
        pred += &net.forward(x.view())?;
    }
    Ok(pred)
}

fn mse(pred: &Array1<f64>, y: ArrayView1<f64>) -> f64 {
    let d = pred - &y;
    d.dot(&d) / y.len().max(1) as f64
}

/// Train networks jointly on `offset + Σ_g net_g(x_g)` under squared loss,
/// clamping each network's first layer to its bound after every step.
pub fn train_joint(
    nets: &mut [Mlp],
    inputs: &[ArrayView2<f64>],
    bounds: &[f64],
    offset: f64,
    y: ArrayView1<f64>,
    config: &OptimizerConfig,
    seed: u64,
) -> Result<TrainReport> {
    config.validate()?;
    if nets.len() != inputs.len() || nets.len() != bounds.len() {
        return Err(SdamiError::DimensionMismatch(format!(
            "{} networks, {} inputs, {} bounds",
            nets.len(),
            inputs.len(),
            bounds.len()
        )));
    }
    let n = y.len();
    for (net, x) in nets.iter().zip(inputs) {
        net.check_input(x)?;
        if x.nrows() != n {
            return Err(SdamiError::DimensionMismatch(format!(
                "input with {} rows for {n} targets",
                x.nrows()
            )));
        }
        if x.iter().any(|v| !v.is_finite()) {
            return Err(SdamiError::NonFinite("network input".into()));
        }
    }
    if bounds.iter().any(|b| !(*b >= 0.0)) {
        return Err(SdamiError::InvalidArgument(
            "constraint bounds must be >= 0".into(),
        ));
    }
    if y.iter().any(|v| !v.is_finite()) || !offset.is_finite() {
        return Err(SdamiError::NonFinite("training targets".into()));
    }
    for (net, &b) in nets.iter_mut().zip(bounds) {
        net.clamp_first_layer(b);
    }
    let initial_loss = mse(&joint_prediction(nets, inputs, offset)?, y);

    let mut adams: Vec<Adam> = nets
        .iter()
        .map(|m| Adam::new(m.parameter_count()))
        .collect();
    let mut flats: Vec<Vec<f64>> = nets.iter().map(|m| m.flatten()).collect();
    let full_batch = n <= config.full_batch_max;
    let mut order: Vec<usize> = (0..n).collect();
    let mut rng = rng_from_seed(seed);
    let mut loss_trace = Vec::with_capacity(config.epochs);
    let mut stopped_early = false;

    for epoch in 0..config.epochs {
        let batches: Vec<Vec<usize>> = if full_batch {
            vec![Vec::new()]
        } else {
            order.shuffle(&mut rng);
            order
                .chunks(config.batch_size)
                .map(|c| c.to_vec())
                .collect()
        };
        let mut epoch_loss = 0.0;
        for rows in &batches {
            let (xb, yb): (Vec<Array2<f64>>, Array1<f64>) = if full_batch {
                (Vec::new(), Array1::zeros(0))
            } else {
                (
                    inputs.iter().map(|x| x.select(Axis(0), rows)).collect(),
                    y.select(Axis(0), rows),
                )
            };
            let views: Vec<ArrayView2<f64>> = if full_batch {
                inputs.to_vec()
            } else {
                xb.iter().map(|a| a.view()).collect()
            };
            let yv = if full_batch { y } else { yb.view() };
            let caches: Vec<_> = nets
                .iter()
                .zip(&views)
                .map(|(m, x)| m.forward_cache(x.view()))
                .collect();
            let mut pred = Array1::from_elem(yv.len(), offset);
            for (acts, _) in &caches {
                pred += &acts.last().expect("output").column(0);
            }
            let resid = &pred - &yv;
            let loss = resid.dot(&resid) / yv.len() as f64;
            if !loss.is_finite() {
                return Err(SdamiError::Diverged {
                    epoch,
                    learning_rate: config.learning_rate,
                    loss,
                });
            }
            epoch_loss += loss * yv.len() as f64;
            for (g, net) in nets.iter_mut().enumerate() {
                let grad = net
                    .backward(&caches[g].0, &caches[g].1, resid.view())
                    .flatten();
                adams[g].step(&mut flats[g], &grad, config);
                net.set_flat(&flats[g])?;
                net.clamp_first_layer(bounds[g]);
                flats[g].copy_from_slice(&net.flatten());
                if !net.is_finite() {
                    return Err(SdamiError::Diverged {
                        epoch,
                        learning_rate: config.learning_rate,
                        loss,
                    });
                }
            }
        }
        loss_trace.push(epoch_loss / n as f64);
        if epoch >= config.patience {
            let past = loss_trace[epoch - config.patience];
            let now = loss_trace[epoch];
            if past <= 0.0 || (past - now) / past < config.min_rel_improvement {
                stopped_early = true;
                break;
            }
        }
    }
    let final_loss = mse(&joint_prediction(nets, inputs, offset)?, y);
    if !final_loss.is_finite() {
        return Err(SdamiError::Diverged {
            epoch: loss_trace.len(),
            learning_rate: config.learning_rate,
            loss: final_loss,
        });
    }
    Ok(TrainReport {
        epochs_run: loss_trace.len(),
        loss_trace,
        initial_loss,
        final_loss,
        stopped_early,
    })
}

/// Train one network (no offset) under a first-layer constraint.
pub fn train_constrained(
    net: &mut Mlp,
    x: ArrayView2<f64>,
    targets: ArrayView1<f64>,
    constraint: &ConstraintSpec,
    config: &OptimizerConfig,
    seed: u64,
) -> Result<TrainReport> {
    let bound = constraint.bound();
    if !(bound >= 0.0) {
        return Err(SdamiError::InvalidArgument(format!(
            "constraint bound must be >= 0 (got {bound})"
        )));
    }
    train_joint(
        std::slice::from_mut(net),
        &[x],
        &[bound],
        0.0,
        targets,
        config,
        seed,
    )
}
