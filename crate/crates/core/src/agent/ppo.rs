//! Clipped-surrogate policy optimization: configuration, transitions,
//! generalized advantage estimation, analytic loss gradients and optimizers.

use std::fmt;
use std::str::FromStr;

use ndarray::{Array1, Array2, ArrayView1, Zip};

use super::net::{self, Dense, Grads, PolicyParams};
use super::AgentError;
use crate::rng::{self, Rng64};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum OptimizerKind {
    #[default]
    Adam,
    Sgd,
}

impl fmt::Display for OptimizerKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            OptimizerKind::Adam => "adam",
            OptimizerKind::Sgd => "sgd",
        })
    }
}

impl FromStr for OptimizerKind {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "adam" => Ok(OptimizerKind::Adam),
            "sgd" => Ok(OptimizerKind::Sgd),
            _ => Err(format!("unknown optimizer {s:?}, expected adam or sgd")),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct PpoConfig {
    pub learning_rate: f64,
    pub gamma: f64,
    pub clip_epsilon: f64,
    pub gae_lambda: f64,
    pub minibatch_size: usize,
    pub update_epochs: usize,
    pub rollout_size: usize,
    pub value_loss_coeff: f64,
    pub entropy_coeff: f64,
    pub max_grad_norm: f64,
    pub total_env_steps: usize,
    pub seed: u64,
    pub optimizer: OptimizerKind,
}

impl Default for PpoConfig {
    fn default() -> Self {
        PpoConfig {
            learning_rate: 1e-5,
            gamma: 0.1,
            clip_epsilon: 0.2,
            gae_lambda: 0.95,
            minibatch_size: 256,
            update_epochs: 4,
            rollout_size: 1024,
            value_loss_coeff: 0.5,
            entropy_coeff: 0.01,
            max_grad_norm: 0.5,
            total_env_steps: 102_400,
            seed: 0,
            optimizer: OptimizerKind::Adam,
        }
    }
}

pub const CONFIG_KEYS: [&str; 13] = [
    "learning_rate",
    "gamma",
    "clip_epsilon",
    "gae_lambda",
    "minibatch_size",
    "update_epochs",
    "rollout_size",
    "value_loss_coeff",
    "entropy_coeff",
    "max_grad_norm",
    "total_env_steps",
    "seed",
    "optimizer",
];

impl PpoConfig {
    pub fn validate(&self) -> Result<(), AgentError> {
        let bad = |m: &str| Err(AgentError::Config(m.to_string()));
        if !(self.gamma > 0.0 && self.gamma <= 1.0) {
            return bad("gamma must lie in (0, 1]");
        }
        if !(self.clip_epsilon > 0.0 && self.clip_epsilon < 1.0) {
            return bad("clip_epsilon must lie in (0, 1)");
        }
        if !(0.0..=1.0).contains(&self.gae_lambda) {
            return bad("gae_lambda must lie in [0, 1]");
        }
        if self.minibatch_size == 0 || self.update_epochs == 0 {
            return bad("minibatch_size and update_epochs must be positive");
        }
        if self.minibatch_size > self.rollout_size {
            return bad("minibatch_size must not exceed rollout_size");
        }
        if !(self.learning_rate >= 0.0 && self.learning_rate.is_finite()) {
            return bad("learning_rate must be finite and non-negative");
        }
        if !(self.max_grad_norm > 0.0) {
            return bad("max_grad_norm must be positive");
        }
        if !(self.value_loss_coeff >= 0.0 && self.entropy_coeff >= 0.0) {
            return bad("loss coefficients must be non-negative");
        }
        Ok(())
    }

    /// Iterations implied by the step budget, at least one.
    pub fn iterations(&self) -> usize {
        self.total_env_steps.div_ceil(self.rollout_size).max(1)
    }

    pub fn get(&self, key: &str) -> Option<String> {
        Some(match key {
            "learning_rate" => self.learning_rate.to_string(),
            "gamma" => self.gamma.to_string(),
            "clip_epsilon" => self.clip_epsilon.to_string(),
            "gae_lambda" => self.gae_lambda.to_string(),
            "minibatch_size" => self.minibatch_size.to_string(),
            "update_epochs" => self.update_epochs.to_string(),
            "rollout_size" => self.rollout_size.to_string(),
            "value_loss_coeff" => self.value_loss_coeff.to_string(),
            "entropy_coeff" => self.entropy_coeff.to_string(),
            "max_grad_norm" => self.max_grad_norm.to_string(),
            "total_env_steps" => self.total_env_steps.to_string(),
            "seed" => self.seed.to_string(),
            "optimizer" => self.optimizer.to_string(),
            _ => return None,
        })
    }

    /// Sets one field from its text form. Unknown keys are an error.
    pub fn set(&mut self, key: &str, value: &str) -> Result<(), String> {
        fn p<T: FromStr>(v: &str) -> Result<T, String>
        where
            T::Err: fmt::Display,
        {
            v.trim().parse::<T>().map_err(|e| format!("{v:?}: {e}"))
        }
        match key {
            "learning_rate" => self.learning_rate = p(value)?,
            "gamma" => self.gamma = p(value)?,
            "clip_epsilon" => self.clip_epsilon = p(value)?,
            "gae_lambda" => self.gae_lambda = p(value)?,
            "minibatch_size" => self.minibatch_size = p(value)?,
            "update_epochs" => self.update_epochs = p(value)?,
            "rollout_size" => self.rollout_size = p(value)?,
            "value_loss_coeff" => self.value_loss_coeff = p(value)?,
            "entropy_coeff" => self.entropy_coeff = p(value)?,
            "max_grad_norm" => self.max_grad_norm = p(value)?,
            "total_env_steps" => self.total_env_steps = p(value)?,
            "seed" => self.seed = p(value)?,
            "optimizer" => self.optimizer = p(value)?,
            _ => return Err(format!("unknown key {key:?}")),
        }
        Ok(())
    }

    /// `key=value` lines in a fixed key order.
    pub fn to_kv(&self) -> String {
        CONFIG_KEYS.iter().map(|k| format!("{k}={}\n", self.get(k).expect("known key"))).collect()
    }

    pub fn from_kv(text: &str) -> Result<PpoConfig, String> {
        let mut cfg = PpoConfig::default();
        for line in text.lines().filter(|l| !l.trim().is_empty()) {
            let (k, v) = line.split_once('=').ok_or_else(|| format!("malformed line {line:?}"))?;
            cfg.set(k.trim(), v)?;
        }
        Ok(cfg)
    }
}

/// One environment step as seen by the learner.
#[derive(Debug, Clone, PartialEq)]
pub struct Transition {
    pub features: Vec<f64>,
    pub mask: Vec<bool>,
    pub action: usize,
    pub log_prob: f64,
    pub reward: f64,
    pub value: f64,
    pub done: bool,
}

/// Per-transition advantages and return targets by generalized advantage
/// estimation. Advantages are returned before normalization.
pub fn compute_advantages(buffer: &[Transition], gamma: f64, lambda: f64) -> Result<(Vec<f64>, Vec<f64>), AgentError> {
    if buffer.last().is_some_and(|t| !t.done) {
        return Err(AgentError::IncompleteEpisode);
    }
    let n = buffer.len();
    let mut adv = vec![0.0; n];
    let mut gae = 0.0;
    for t in (0..n).rev() {
        let tr = &buffer[t];
        let (next_value, carry) = if tr.done { (0.0, 0.0) } else { (buffer[t + 1].value, 1.0) };
        let delta = tr.reward + gamma * next_value * carry - tr.value;
        gae = delta + gamma * lambda * carry * gae;
        adv[t] = gae;
    }
    let returns = adv.iter().zip(buffer).map(|(a, t)| a + t.value).collect();
    Ok((adv, returns))
}

/// Shifts to zero mean and scales to unit variance (population).
pub fn normalize_advantages(adv: &mut [f64]) {
    if adv.is_empty() {
        return;
    }
    let n = adv.len() as f64;
    let mean = adv.iter().sum::<f64>() / n;
    let var = adv.iter().map(|a| (a - mean) * (a - mean)).sum::<f64>() / n;
    let denom = var.sqrt() + 1e-8;
    for a in adv {
        *a = (*a - mean) / denom;
    }
}

/// `min(rho * A, clip(rho, 1 - eps, 1 + eps) * A)`.
pub fn clipped_surrogate(ratio: f64, advantage: f64, eps: f64) -> f64 {
    (ratio * advantage).min(ratio.clamp(1.0 - eps, 1.0 + eps) * advantage)
}

/// Learner-side view of one training sample.
#[derive(Debug, Clone, Copy)]
pub struct Sample<'a> {
    pub features: &'a [f64],
    pub mask: &'a [bool],
    pub action: usize,
    pub old_log_prob: f64,
    pub advantage: f64,
    pub ret: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct LossCoeffs {
    pub clip_epsilon: f64,
    pub value_loss_coeff: f64,
    pub entropy_coeff: f64,
}

impl From<&PpoConfig> for LossCoeffs {
    fn from(c: &PpoConfig) -> Self {
        LossCoeffs {
            clip_epsilon: c.clip_epsilon,
            value_loss_coeff: c.value_loss_coeff,
            entropy_coeff: c.entropy_coeff,
        }
    }
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct LossBreakdown {
    /// Minimized objective: `policy_loss + c_v * value_loss - c_e * entropy`.
    pub total: f64,
    /// Negated mean clipped surrogate.
    pub policy_loss: f64,
    pub value_loss: f64,
    pub entropy: f64,
    pub clip_fraction: f64,
    pub ratios: Vec<f64>,
    pub surrogates: Vec<f64>,
}

/// Loss over a minibatch and its exact gradient with respect to every
/// parameter.
pub fn loss_and_grads(params: &PolicyParams, batch: &[Sample<'_>], c: LossCoeffs) -> (LossBreakdown, Grads) {
    let b = batch.len();
    let d = PolicyParams::input_len(params.width, params.height);
    let n_act = params.actions();
    let mut x = Array2::<f64>::zeros((b, d));
    for (mut row, s) in x.rows_mut().into_iter().zip(batch) {
        row.assign(&ArrayView1::from(s.features));
    }
    let fc = params.forward_owned(x);
    let inv_b = 1.0 / b as f64;
    let mut d_logits = Array2::<f64>::zeros((b, n_act));
    let mut d_values = Array1::<f64>::zeros(b);
    let mut out =
        LossBreakdown { ratios: Vec::with_capacity(b), surrogates: Vec::with_capacity(b), ..Default::default() };
    let mut clipped = 0usize;
    let mut z = vec![0.0; n_act];
    let mut probs = vec![0.0; n_act];
    for (k, s) in batch.iter().enumerate() {
        z.iter_mut().zip(fc.logits.row(k)).for_each(|(dst, &v)| *dst = v);
        net::apply_mask(&mut z, s.mask);
        let logp = net::log_softmax(&z);
        let ratio = (logp[s.action] - s.old_log_prob).exp();
        let surr = clipped_surrogate(ratio, s.advantage, c.clip_epsilon);
        if (ratio - 1.0).abs() > c.clip_epsilon {
            clipped += 1;
        }
        // d surr / d ratio: the unclipped branch carries A, the clipped one is flat
        let g_ratio = if ratio * s.advantage <= ratio.clamp(1.0 - c.clip_epsilon, 1.0 + c.clip_epsilon) * s.advantage {
            s.advantage
        } else {
            0.0
        };
        let mut entropy = 0.0;
        for (p, &lp) in probs.iter_mut().zip(&logp) {
            if lp > f64::NEG_INFINITY {
                *p = lp.exp();
                entropy -= *p * lp;
            }
        }
        let mut grow = d_logits.row_mut(k);
        for (a, &lp) in logp.iter().enumerate() {
            if lp == f64::NEG_INFINITY {
                continue;
            }
            let pi = probs[a];
            let onehot = if a == s.action { 1.0 } else { 0.0 };
            let d_policy = -g_ratio * ratio * (onehot - pi);
            let d_entropy = c.entropy_coeff * pi * (lp + entropy);
            grow[a] = (d_policy + d_entropy) * inv_b;
        }
        let v = fc.values[k];
        d_values[k] = 2.0 * c.value_loss_coeff * (v - s.ret) * inv_b;
        out.policy_loss -= surr * inv_b;
        out.value_loss += (v - s.ret) * (v - s.ret) * inv_b;
        out.entropy += entropy * inv_b;
        out.ratios.push(ratio);
        out.surrogates.push(surr);
    }
    out.clip_fraction = clipped as f64 * inv_b;
    out.total = out.policy_loss + c.value_loss_coeff * out.value_loss - c.entropy_coeff * out.entropy;
    let grads = params.backward(&fc, &d_logits, &d_values);
    (out, grads)
}

/// First-order optimizer state.
#[derive(Debug, Clone)]
pub struct Optimizer {
    pub kind: OptimizerKind,
    pub lr: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub eps: f64,
    t: i32,
    m: PolicyParams,
    v: PolicyParams,
}

impl Optimizer {
    pub fn new(kind: OptimizerKind, lr: f64, like: &PolicyParams) -> Self {
        Optimizer { kind, lr, beta1: 0.9, beta2: 0.999, eps: 1e-8, t: 0, m: like.zeros_like(), v: like.zeros_like() }
    }

    pub fn steps(&self) -> i32 {
        self.t
    }

    pub fn step(&mut self, params: &mut PolicyParams, grads: &Grads) {
        self.t += 1;
        let lr = self.lr;
        match self.kind {
            OptimizerKind::Sgd => {
                for (p, g) in params.layers_mut().zip(grads.0.layers()) {
                    p.w.scaled_add(-lr, &g.w);
                    p.b.scaled_add(-lr, &g.b);
                }
            }
            OptimizerKind::Adam => {
                let (b1, b2, eps) = (self.beta1, self.beta2, self.eps);
                let c1 = 1.0 - b1.powi(self.t);
                let c2 = 1.0 - b2.powi(self.t);
                let layers =
                    params.layers_mut().zip(grads.0.layers()).zip(self.m.layers_mut().zip(self.v.layers_mut()));
                for ((p, g), (m, v)) in layers {
                    adam_layer(p, g, m, v, lr, b1, b2, eps, c1, c2);
                }
            }
        }
    }
}

#[allow(clippy::too_many_arguments)]
fn adam_layer(
    p: &mut Dense,
    g: &Dense,
    m: &mut Dense,
    v: &mut Dense,
    lr: f64,
    b1: f64,
    b2: f64,
    eps: f64,
    c1: f64,
    c2: f64,
) {
    let update = |p: &mut f64, g: f64, m: &mut f64, v: &mut f64| {
        *m = b1 * *m + (1.0 - b1) * g;
        *v = b2 * *v + (1.0 - b2) * g * g;
        *p -= lr * (*m / c1) / ((*v / c2).sqrt() + eps);
    };
    Zip::from(&mut p.w).and(&g.w).and(&mut m.w).and(&mut v.w).for_each(|p, &g, m, v| update(p, g, m, v));
    Zip::from(&mut p.b).and(&g.b).and(&mut m.b).and(&mut v.b).for_each(|p, &g, m, v| update(p, g, m, v));
}

/// Means over the minibatches of one update.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct UpdateStats {
    pub policy_loss: f64,
    pub value_loss: f64,
    pub clip_fraction: f64,
    pub entropy: f64,
    pub grad_norm: f64,
    pub minibatches: usize,
}

/// Runs `update_epochs` passes of shuffled minibatches over `buffer`. On a
/// non-finite loss or gradient the parameters and optimizer are restored to
/// their state before the call.
pub fn ppo_update(
    params: &mut PolicyParams,
    opt: &mut Optimizer,
    buffer: &[Transition],
    cfg: &PpoConfig,
    rng: &mut Rng64,
) -> Result<UpdateStats, AgentError> {
    if buffer.len() < cfg.minibatch_size {
        return Err(AgentError::BufferTooSmall { len: buffer.len(), minibatch: cfg.minibatch_size });
    }
    let (mut adv, returns) = compute_advantages(buffer, cfg.gamma, cfg.gae_lambda)?;
    normalize_advantages(&mut adv);
    let backup = (params.clone(), opt.clone());
    let coeffs = LossCoeffs::from(cfg);
    let mut stats = UpdateStats::default();
    let mut order: Vec<usize> = (0..buffer.len()).collect();
    for _ in 0..cfg.update_epochs {
        order = rng::sample_without_replacement(rng, &order, order.len());
        for chunk in order.chunks(cfg.minibatch_size) {
            let batch: Vec<Sample<'_>> = chunk
                .iter()
                .map(|&k| Sample {
                    features: &buffer[k].features,
                    mask: &buffer[k].mask,
                    action: buffer[k].action,
                    old_log_prob: buffer[k].log_prob,
                    advantage: adv[k],
                    ret: returns[k],
                })
                .collect();
            let (loss, mut grads) = loss_and_grads(params, &batch, coeffs);
            let norm = grads.norm();
            if !loss.total.is_finite() || !norm.is_finite() {
                (*params, *opt) = backup;
                return Err(AgentError::NonFiniteLoss);
            }
            if norm > cfg.max_grad_norm {
                grads.scale(cfg.max_grad_norm / norm);
            }
            opt.step(params, &grads);
            stats.policy_loss += loss.policy_loss;
            stats.value_loss += loss.value_loss;
            stats.clip_fraction += loss.clip_fraction;
            stats.entropy += loss.entropy;
            stats.grad_norm += norm;
            stats.minibatches += 1;
        }
    }
    if !params.all_finite() {
        (*params, *opt) = backup;
        return Err(AgentError::NonFiniteLoss);
    }
    let m = stats.minibatches as f64;
    stats.policy_loss /= m;
    stats.value_loss /= m;
    stats.clip_fraction /= m;
    stats.entropy /= m;
    stats.grad_norm /= m;
    Ok(stats)
}
