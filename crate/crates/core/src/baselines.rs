//! Comparator placement schemes: uniform random, exhaustive single-BS
//! sweep, budgeted joint multi-BS search and greedy sequential sweeps.
//!
//! Ties are broken towards the lowest row-major index (single cell) or the
//! lexicographically smallest sorted placement list (sets).

use std::collections::HashSet;
use std::fmt;
use std::str::FromStr;

use rand::RngCore;
use thiserror::Error;

use crate::metrics::{self, MetricsError, NetworkMetrics};
use crate::rng;
use crate::sitemap::{Coord, SiteMap};
use crate::twin::{self, Twin};

#[derive(Debug, Error, PartialEq)]
pub enum BaselineError {
    #[error("cannot place {n} base stations on {deployable} deployable cells")]
    TooMany { n: usize, deployable: usize },
    #[error("joint search needs at least two base stations, got {0}")]
    JointNeedsTwo(usize),
    #[error("need at least one base station")]
    Zero,
    #[error("search budget must be at least 1")]
    Budget,
    #[error(transparent)]
    Metrics(#[from] MetricsError),
}

impl From<twin::TwinError> for BaselineError {
    fn from(e: twin::TwinError) -> Self {
        BaselineError::Metrics(e.into())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Metric {
    Coverage,
    Capacity,
}

impl Metric {
    pub fn of(self, m: &NetworkMetrics) -> f64 {
        match self {
            Metric::Coverage => m.coverage,
            Metric::Capacity => m.capacity,
        }
    }
}

impl fmt::Display for Metric {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Metric::Coverage => "coverage",
            Metric::Capacity => "capacity",
        })
    }
}

impl FromStr for Metric {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "coverage" | "v" | "V" => Ok(Metric::Coverage),
            "capacity" | "c" | "C" => Ok(Metric::Capacity),
            other => Err(format!("unknown metric {other:?} (expected coverage or capacity)")),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct SearchBudget {
    pub max_evaluations: usize,
    pub metric: Metric,
    pub seed: u64,
}

impl SearchBudget {
    pub fn new(metric: Metric, seed: u64) -> Self {
        SearchBudget { max_evaluations: 50, metric, seed }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SearchResult {
    /// Sorted for joint searches, selection order for sequential ones.
    pub placements: Vec<Coord>,
    pub metrics: NetworkMetrics,
    pub evaluations: usize,
}

fn check_count(map: &SiteMap, n: usize) -> Result<Vec<Coord>, BaselineError> {
    if n == 0 {
        return Err(BaselineError::Zero);
    }
    let cells = map.deployable_cells();
    if n > cells.len() {
        return Err(BaselineError::TooMany { n, deployable: cells.len() });
    }
    Ok(cells)
}

/// `n` distinct deployable cells drawn uniformly without replacement, in
/// draw order.
pub fn heuristic_place(map: &SiteMap, n: usize, rng: &mut impl RngCore) -> Result<Vec<Coord>, BaselineError> {
    let cells = check_count(map, n)?;
    Ok(rng::sample_without_replacement(rng, &cells, n))
}

/// Evaluates every deployable cell once and keeps the best by `metric`.
pub fn exhaustive_single(twin: &Twin, map: &SiteMap, metric: Metric) -> Result<SearchResult, BaselineError> {
    let cells = check_count(map, 1)?;
    let mut best: Option<(Coord, NetworkMetrics)> = None;
    for &c in &cells {
        let m = metrics::evaluate(twin, map, &[c])?;
        if best.as_ref().is_none_or(|(_, b)| metric.of(&m) > metric.of(b)) {
            best = Some((c, m));
        }
    }
    let (c, m) = best.expect("deployable set is non-empty");
    Ok(SearchResult { placements: vec![c], metrics: m, evaluations: cells.len() })
}

/// `C(n, k)`, saturating at `u128::MAX`.
pub fn binomial(n: usize, k: usize) -> u128 {
    if k > n {
        return 0;
    }
    let k = k.min(n - k);
    let mut acc: u128 = 1;
    for t in 0..k {
        // acc * (n - t) / (t + 1) is exact at every step
        match acc.checked_mul((n - t) as u128) {
            Some(v) => acc = v / (t as u128 + 1),
            None => return u128::MAX,
        }
    }
    acc
}

fn next_combination(idx: &mut [usize], n: usize) -> bool {
    let k = idx.len();
    let mut t = k;
    while t > 0 {
        t -= 1;
        if idx[t] < n - k + t {
            idx[t] += 1;
            for u in t + 1..k {
                idx[u] = idx[u - 1] + 1;
            }
            return true;
        }
    }
    false
}

fn better(metric: Metric, cand: &(Vec<Coord>, NetworkMetrics), best: &Option<(Vec<Coord>, NetworkMetrics)>) -> bool {
    match best {
        None => true,
        Some((bp, bm)) => {
            let (a, b) = (metric.of(&cand.1), metric.of(bm));
            a > b || (a == b && cand.0 < *bp)
        }
    }
}

/// Joint search over `n`-subsets of the deployable set. Enumerates every
/// subset when there are at most `max_evaluations` of them; otherwise
/// evaluates `max_evaluations` distinct subsets drawn uniformly.
pub fn exhaustive_multi(
    twin: &Twin,
    map: &SiteMap,
    n: usize,
    budget: &SearchBudget,
) -> Result<SearchResult, BaselineError> {
    if n < 2 {
        return Err(BaselineError::JointNeedsTwo(n));
    }
    if budget.max_evaluations == 0 {
        return Err(BaselineError::Budget);
    }
    let cells = check_count(map, n)?;
    let maps = cells.iter().map(|&c| twin.pathloss(map, c)).collect::<Result<Vec<_>, _>>()?;
    let score = |idx: &[usize]| -> Result<(Vec<Coord>, NetworkMetrics), BaselineError> {
        let chosen: Vec<_> = idx.iter().map(|&k| maps[k].clone()).collect();
        let agg = twin::aggregate(&chosen)?;
        let m = metrics::from_aggregate(&agg, twin.radio(), map)?;
        Ok((idx.iter().map(|&k| cells[k]).collect(), m))
    };
    let mut best = None;
    let mut evaluations = 0;
    if binomial(cells.len(), n) <= budget.max_evaluations as u128 {
        let mut idx: Vec<usize> = (0..n).collect();
        loop {
            let cand = score(&idx)?;
            evaluations += 1;
            if better(budget.metric, &cand, &best) {
                best = Some(cand);
            }
            if !next_combination(&mut idx, cells.len()) {
                break;
            }
        }
    } else {
        let mut stream = rng::seeded(budget.seed);
        let all: Vec<usize> = (0..cells.len()).collect();
        let mut seen = HashSet::new();
        while evaluations < budget.max_evaluations {
            let mut idx = rng::sample_without_replacement(&mut stream, &all, n);
            idx.sort_unstable();
            if !seen.insert(idx.clone()) {
                continue;
            }
            let cand = score(&idx)?;
            evaluations += 1;
            if better(budget.metric, &cand, &best) {
                best = Some(cand);
            }
        }
    }
    let (placements, metrics) = best.expect("at least one subset evaluated");
    Ok(SearchResult { placements, metrics, evaluations })
}

/// `n` rounds, each fixing the unused deployable cell that maximizes
/// `metric` of the cumulative set.
pub fn greedy_sequential(twin: &Twin, map: &SiteMap, n: usize, metric: Metric) -> Result<SearchResult, BaselineError> {
    let cells = check_count(map, n)?;
    let mut placements: Vec<Coord> = Vec::with_capacity(n);
    let mut fixed = Vec::with_capacity(n);
    let mut evaluations = 0;
    let mut last = None;
    for _ in 0..n {
        let mut best: Option<(Coord, NetworkMetrics)> = None;
        for &c in &cells {
            if placements.contains(&c) {
                continue;
            }
            let mut set = fixed.clone();
            set.push(twin.pathloss(map, c)?);
            let agg = twin::aggregate(&set)?;
            let m = metrics::from_aggregate(&agg, twin.radio(), map)?;
            evaluations += 1;
            if best.as_ref().is_none_or(|(_, b)| metric.of(&m) > metric.of(b)) {
                best = Some((c, m));
            }
        }
        let (c, m) = best.expect("an unused cell remains");
        fixed.push(twin.pathloss(map, c)?);
        placements.push(c);
        last = Some(m);
    }
    Ok(SearchResult { placements, metrics: last.expect("n >= 1"), evaluations })
}
