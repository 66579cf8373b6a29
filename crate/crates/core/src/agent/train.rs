//! Training loop: batched rollouts over a map corpus, PPO updates and a
//! per-iteration greedy evaluation.

use std::collections::HashSet;
use std::sync::Arc;

use ndarray::Array2;

use super::net::{self, InitGains, PolicyParams};
use super::ppo::{ppo_update, Optimizer, PpoConfig, Transition, UpdateStats};
use super::{argmax, sample_action, AgentError};
use crate::env::{Episode, Observation};
use crate::metrics::{self, NetworkMetrics};
use crate::reward::{preset, RewardWeights};
use crate::rng;
use crate::sitemap::{Coord, SiteMap};
use crate::twin::Twin;

/// Episodes advanced together through one batched forward pass.
const LOCKSTEP: usize = 128;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CurvePoint {
    pub iteration: usize,
    pub env_steps: usize,
    pub mean_reward: f64,
    pub eval_coverage: f64,
    pub eval_capacity: f64,
}

pub const CURVE_HEADER: &str = "iteration,env_steps,mean_reward,eval_coverage,eval_capacity";

pub fn curve_csv(curve: &[CurvePoint]) -> String {
    let mut out = format!("{CURVE_HEADER}\n");
    for p in curve {
        out.push_str(&format!(
            "{},{},{},{},{}\n",
            p.iteration,
            p.env_steps,
            metrics::sig6(p.mean_reward),
            metrics::sig6(p.eval_coverage),
            metrics::sig6(p.eval_capacity)
        ));
    }
    out
}

#[derive(Debug, Clone)]
pub struct TrainOptions {
    pub hidden: Vec<usize>,
    pub gains: InitGains,
    pub horizon: usize,
    /// Rollout worker threads; 1 gives bit-reproducible runs.
    pub workers: usize,
    /// Start from these parameters instead of a fresh initialization.
    pub init: Option<PolicyParams>,
}

impl Default for TrainOptions {
    fn default() -> Self {
        TrainOptions { hidden: vec![128; 4], gains: InitGains::default(), horizon: 1, workers: 1, init: None }
    }
}

#[derive(Debug, Clone)]
pub struct TrainOutcome {
    pub params: PolicyParams,
    pub curve: Vec<CurvePoint>,
}

/// Train/eval split of a corpus of equally sized maps.
pub struct Corpus<'a> {
    pub train: &'a [Arc<SiteMap>],
    /// Held-out maps for the per-iteration evaluation. When empty the
    /// training maps are evaluated instead.
    pub eval: &'a [Arc<SiteMap>],
}

impl Corpus<'_> {
    fn validate(&self) -> Result<(usize, usize), AgentError> {
        let first = self.train.first().ok_or_else(|| AgentError::Corpus("empty training split".into()))?;
        let dims = (first.width(), first.height());
        if self.train.iter().chain(self.eval).any(|m| (m.width(), m.height()) != dims) {
            return Err(AgentError::Corpus("maps differ in size".into()));
        }
        let ids: HashSet<u64> = self.train.iter().map(|m| m.map_id()).collect();
        if let Some(m) = self.eval.iter().find(|m| ids.contains(&m.map_id())) {
            return Err(AgentError::Corpus(format!("map {:016x} is in both splits", m.map_id())));
        }
        Ok(dims)
    }

    fn eval_maps(&self) -> &[Arc<SiteMap>] {
        if self.eval.is_empty() {
            self.train
        } else {
            self.eval
        }
    }
}

pub fn train(
    corpus: &Corpus<'_>,
    twin: &Arc<Twin>,
    weights: &RewardWeights,
    cfg: &PpoConfig,
    opts: &TrainOptions,
) -> Result<TrainOutcome, AgentError> {
    train_with_progress(corpus, twin, weights, cfg, opts, |_, _| {})
}

/// As [`train`], calling `progress` after every iteration.
pub fn train_with_progress(
    corpus: &Corpus<'_>,
    twin: &Arc<Twin>,
    weights: &RewardWeights,
    cfg: &PpoConfig,
    opts: &TrainOptions,
    mut progress: impl FnMut(&CurvePoint, &UpdateStats),
) -> Result<TrainOutcome, AgentError> {
    cfg.validate()?;
    let (width, height) = corpus.validate()?;
    if opts.horizon == 0 {
        return Err(AgentError::Config("horizon must be at least 1".into()));
    }
    let mut params = match &opts.init {
        Some(p) if p.width == width && p.height == height && p.dims_consistent() => p.clone(),
        Some(_) => return Err(AgentError::Config("initial parameters do not fit the corpus".into())),
        None => PolicyParams::new(width, height, &opts.hidden, opts.gains, cfg.seed),
    };
    let mut opt = Optimizer::new(cfg.optimizer, cfg.learning_rate, &params);
    let mut update_rng = rng::derived(cfg.seed, u64::MAX);
    let episodes = cfg.rollout_size.div_ceil(opts.horizon);
    let mut curve = Vec::with_capacity(cfg.iterations());
    let mut env_steps = 0;
    for it in 0..cfg.iterations() {
        let diverged = |params: &PolicyParams, curve: &Vec<CurvePoint>| AgentError::Diverged {
            iteration: it + 1,
            last_finite: Box::new(params.clone()),
            curve: curve.clone(),
        };
        let first_episode = (it * episodes) as u64;
        let rollout = collect(
            &params,
            corpus.train,
            twin,
            weights,
            opts.horizon,
            episodes,
            cfg.seed,
            first_episode,
            opts.workers,
        );
        let (buffer, returns) = match rollout {
            Ok(r) => r,
            Err(AgentError::NonFiniteActivation) => return Err(diverged(&params, &curve)),
            Err(e) => return Err(e),
        };
        let stats = match ppo_update(&mut params, &mut opt, &buffer, cfg, &mut update_rng) {
            Ok(s) => s,
            Err(AgentError::NonFiniteLoss) => return Err(diverged(&params, &curve)),
            Err(e) => return Err(e),
        };
        env_steps += buffer.len();
        let eval = match evaluate_policy(&params, corpus.eval_maps(), twin, opts.horizon) {
            Ok(e) => e,
            Err(AgentError::NonFiniteActivation) => return Err(diverged(&params, &curve)),
            Err(e) => return Err(e),
        };
        let n = eval.len() as f64;
        let point = CurvePoint {
            iteration: it + 1,
            env_steps,
            mean_reward: returns.iter().sum::<f64>() / returns.len() as f64,
            eval_coverage: eval.iter().map(|e| e.1.coverage).sum::<f64>() / n,
            eval_capacity: eval.iter().map(|e| e.1.capacity).sum::<f64>() / n,
        };
        progress(&point, &stats);
        curve.push(point);
    }
    Ok(TrainOutcome { params, curve })
}

/// Runs `count` episodes with the stochastic policy. Episode `k` draws its
/// map and actions from its own stream `(seed, first + k)`, so the result
/// does not depend on how episodes are spread over workers.
#[allow(clippy::too_many_arguments)]
fn collect(
    params: &PolicyParams,
    maps: &[Arc<SiteMap>],
    twin: &Arc<Twin>,
    weights: &RewardWeights,
    horizon: usize,
    count: usize,
    seed: u64,
    first: u64,
    workers: usize,
) -> Result<(Vec<Transition>, Vec<f64>), AgentError> {
    let workers = workers.clamp(1, count);
    let run = |range: std::ops::Range<usize>| -> Result<Vec<(Vec<Transition>, f64)>, AgentError> {
        let mut out = Vec::with_capacity(range.len());
        let ids: Vec<usize> = range.collect();
        for chunk in ids.chunks(LOCKSTEP) {
            out.extend(run_lockstep(params, maps, twin, weights, horizon, chunk, seed, first)?);
        }
        Ok(out)
    };
    let per = count.div_ceil(workers);
    let parts: Vec<Result<_, AgentError>> = if workers == 1 {
        vec![run(0..count)]
    } else {
        std::thread::scope(|s| {
            let handles: Vec<_> = (0..workers)
                .map(|w| {
                    let range = (w * per).min(count)..((w + 1) * per).min(count);
                    s.spawn(move || run(range))
                })
                .collect();
            handles.into_iter().map(|h| h.join().expect("rollout worker panicked")).collect()
        })
    };
    let mut buffer = Vec::with_capacity(count * horizon);
    let mut returns = Vec::with_capacity(count);
    for part in parts {
        for (transitions, ret) in part? {
            buffer.extend(transitions);
            returns.push(ret);
        }
    }
    Ok((buffer, returns))
}

#[allow(clippy::too_many_arguments)]
fn run_lockstep(
    params: &PolicyParams,
    maps: &[Arc<SiteMap>],
    twin: &Arc<Twin>,
    weights: &RewardWeights,
    horizon: usize,
    ids: &[usize],
    seed: u64,
    first: u64,
) -> Result<Vec<(Vec<Transition>, f64)>, AgentError> {
    let mut rngs = Vec::with_capacity(ids.len());
    let mut envs = Vec::with_capacity(ids.len());
    let mut obs = Vec::with_capacity(ids.len());
    for &k in ids {
        let mut r = rng::derived(seed, first + k as u64);
        let map = maps[rng::below(&mut r, maps.len() as u64) as usize].clone();
        let (ep, o) = Episode::reset(map, twin.clone(), horizon)?;
        rngs.push(r);
        envs.push(ep);
        obs.push(o);
    }
    let mut trajectories: Vec<(Vec<Transition>, f64)> = vec![(Vec::with_capacity(horizon), 0.0); ids.len()];
    for _ in 0..horizon {
        let x = stack(&obs);
        let fc = params.forward(x.view());
        for k in 0..ids.len() {
            let mut z = net::row(&fc.logits, k);
            let value = fc.values[k];
            if !value.is_finite() || z.iter().any(|v| !v.is_finite()) {
                return Err(AgentError::NonFiniteActivation);
            }
            net::apply_mask(&mut z, &obs[k].mask);
            let (action, log_prob) = sample_action(&z, &mut rngs[k]);
            let cell = envs[k].map().coord(action);
            let step = envs[k].step(cell, weights)?;
            let prev = std::mem::replace(&mut obs[k], step.observation);
            trajectories[k].0.push(Transition {
                features: x.row(k).to_vec(),
                mask: prev.mask,
                action,
                log_prob,
                reward: step.reward,
                value,
                done: step.done,
            });
            trajectories[k].1 += step.reward;
        }
    }
    Ok(trajectories)
}

fn stack(obs: &[Observation]) -> Array2<f64> {
    let o = &obs[0];
    let d = Observation::feature_len(o.width, o.height);
    let mut x = Array2::zeros((obs.len(), d));
    for (mut row, o) in x.rows_mut().into_iter().zip(obs) {
        o.write_features(row.as_slice_mut().expect("standard layout"));
    }
    x
}

/// Greedy placements and final metrics for each map, all maps advanced in
/// one batch per step.
pub fn evaluate_policy(
    params: &PolicyParams,
    maps: &[Arc<SiteMap>],
    twin: &Arc<Twin>,
    horizon: usize,
) -> Result<Vec<(Vec<Coord>, NetworkMetrics)>, AgentError> {
    let weights = preset(Default::default());
    let mut out = Vec::with_capacity(maps.len());
    for chunk in maps.chunks(LOCKSTEP) {
        let mut envs = Vec::with_capacity(chunk.len());
        let mut obs = Vec::with_capacity(chunk.len());
        for map in chunk {
            if (map.width(), map.height()) != (params.width, params.height) {
                return Err(AgentError::ShapeMismatch {
                    expected: format!("{}x{}", params.width, params.height),
                    got: format!("{}x{}", map.width(), map.height()),
                });
            }
            let (ep, o) = Episode::reset(map.clone(), twin.clone(), horizon)?;
            envs.push(ep);
            obs.push(o);
        }
        for _ in 0..horizon {
            let fc = params.forward(stack(&obs).view());
            for k in 0..chunk.len() {
                let mut z = net::row(&fc.logits, k);
                if z.iter().any(|v| !v.is_finite()) {
                    return Err(AgentError::NonFiniteActivation);
                }
                net::apply_mask(&mut z, &obs[k].mask);
                let cell = envs[k].map().coord(argmax(&z));
                obs[k] = envs[k].step(cell, &weights)?.observation;
            }
        }
        for ep in envs {
            let m = *ep.metrics().expect("horizon >= 1");
            out.push((ep.placements().to_vec(), m));
        }
    }
    Ok(out)
}
