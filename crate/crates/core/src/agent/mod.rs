//! PPO agent: masked categorical policy over map cells, rollouts,
//! advantage estimation and clipped-surrogate updates.

pub mod checkpoint;
pub mod net;
pub mod ppo;
pub mod train;

use ndarray::ArrayView2;
use thiserror::Error;

use crate::env::{EnvError, Observation};
use crate::rng::{self, Rng64};
use crate::sitemap::Coord;

pub use checkpoint::{load_checkpoint, read_checkpoint, save_checkpoint, write_checkpoint, CheckpointError};
pub use net::{InitGains, PolicyParams};
pub use ppo::{compute_advantages, ppo_update, OptimizerKind, PpoConfig, Transition, UpdateStats};
pub use train::{train, CurvePoint, TrainOptions, TrainOutcome};

#[derive(Debug, Error)]
pub enum AgentError {
    #[error("observation is {got}, network expects {expected}")]
    ShapeMismatch { expected: String, got: String },
    #[error("non-finite activation in forward pass")]
    NonFiniteActivation,
    #[error("non-finite loss, update aborted")]
    NonFiniteLoss,
    #[error("buffer ends in an incomplete episode")]
    IncompleteEpisode,
    #[error("buffer holds {len} transitions, minibatch needs {minibatch}")]
    BufferTooSmall { len: usize, minibatch: usize },
    #[error("invalid ppo config: {0}")]
    Config(String),
    #[error("invalid corpus: {0}")]
    Corpus(String),
    #[error("training diverged at iteration {iteration}")]
    Diverged { iteration: usize, last_finite: Box<PolicyParams>, curve: Vec<CurvePoint> },
    #[error(transparent)]
    Env(#[from] EnvError),
}

/// Masked logits and value of a single observation.
#[derive(Debug, Clone, PartialEq)]
pub struct PolicyOutput {
    pub logits: Vec<f64>,
    pub value: f64,
}

fn check_shape(params: &PolicyParams, obs: &Observation) -> Result<(), AgentError> {
    if obs.width != params.width || obs.height != params.height {
        return Err(AgentError::ShapeMismatch {
            expected: format!("{}x{}", params.width, params.height),
            got: format!("{}x{}", obs.width, obs.height),
        });
    }
    Ok(())
}

pub fn forward(params: &PolicyParams, obs: &Observation) -> Result<PolicyOutput, AgentError> {
    check_shape(params, obs)?;
    let x = obs.features();
    let view = ArrayView2::from_shape((1, x.len()), &x).expect("feature row");
    let fc = params.forward(view);
    let mut logits = net::row(&fc.logits, 0);
    let value = fc.values[0];
    if !value.is_finite() || logits.iter().any(|z| !z.is_finite()) {
        return Err(AgentError::NonFiniteActivation);
    }
    net::apply_mask(&mut logits, &obs.mask);
    Ok(PolicyOutput { logits, value })
}

/// Categorical draw from masked logits; returns the flat index and its
/// log-probability.
pub fn sample_action(masked_logits: &[f64], rng: &mut Rng64) -> (usize, f64) {
    let logp = net::log_softmax(masked_logits);
    let u = rng::unit_f64(rng);
    let mut acc = 0.0;
    let mut last = None;
    for (k, &lp) in logp.iter().enumerate() {
        if lp == f64::NEG_INFINITY {
            continue;
        }
        acc += lp.exp();
        last = Some(k);
        if u < acc {
            return (k, lp);
        }
    }
    // rounding left u above the final partial sum
    let k = last.expect("log_softmax guarantees one admissible action");
    (k, logp[k])
}

/// Index of the largest masked logit, lowest index on ties.
pub fn argmax(masked_logits: &[f64]) -> usize {
    let mut best = 0;
    for (k, &z) in masked_logits.iter().enumerate() {
        if z > masked_logits[best] {
            best = k;
        }
    }
    best
}

pub fn act_greedy(params: &PolicyParams, obs: &Observation) -> Result<Coord, AgentError> {
    let out = forward(params, obs)?;
    let k = argmax(&out.logits);
    Ok(Coord::new(k / obs.width, k % obs.width))
}
