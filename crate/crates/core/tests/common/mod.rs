#![allow(dead_code)]

//! Independent reference implementations used as test oracles. Nothing here
//! calls into the library's numeric code paths.

use bsplace::agent::net::PolicyParams;
use bsplace::agent::ppo::{LossCoeffs, Sample};
use bsplace::sitemap::{Coord, SiteMap};

/// Scalar loop forward pass: (logits, value) of one feature row.
pub fn naive_forward(p: &PolicyParams, x: &[f64]) -> (Vec<f64>, f64) {
    let mut a = x.to_vec();
    for d in &p.hidden {
        let mut next = vec![0.0; d.b.len()];
        for (o, out) in next.iter_mut().enumerate() {
            let mut s = d.b[o];
            for (i, xi) in a.iter().enumerate() {
                s += xi * d.w[[i, o]];
            }
            *out = s.tanh();
        }
        a = next;
    }
    let lin = |w: &ndarray::Array2<f64>, b: &ndarray::Array1<f64>, o: usize| {
        let mut s = b[o];
        for (i, xi) in a.iter().enumerate() {
            s += xi * w[[i, o]];
        }
        s
    };
    let logits = (0..p.policy.b.len()).map(|o| lin(&p.policy.w, &p.policy.b, o)).collect();
    (logits, lin(&p.value.w, &p.value.b, 0))
}

/// Log-probabilities over admissible actions, `None` where masked.
pub fn naive_log_probs(logits: &[f64], mask: &[bool]) -> Vec<Option<f64>> {
    let max = logits.iter().zip(mask).filter(|(_, &m)| m).map(|(z, _)| *z).fold(f64::NEG_INFINITY, f64::max);
    let sum: f64 = logits.iter().zip(mask).filter(|(_, &m)| m).map(|(z, _)| (z - max).exp()).sum();
    logits.iter().zip(mask).map(|(z, &m)| m.then(|| z - max - sum.ln())).collect()
}

/// Total minimized loss: `-mean(min(rA, clip(r)A)) + c_v mean((V-R)^2) - c_e mean(H)`.
pub fn naive_loss(p: &PolicyParams, batch: &[Sample<'_>], c: LossCoeffs) -> f64 {
    let n = batch.len() as f64;
    let mut total = 0.0;
    for s in batch {
        let (z, v) = naive_forward(p, s.features);
        let lp = naive_log_probs(&z, s.mask);
        let ratio = (lp[s.action].unwrap() - s.old_log_prob).exp();
        let lo = 1.0 - c.clip_epsilon;
        let hi = 1.0 + c.clip_epsilon;
        let clipped = if ratio < lo {
            lo
        } else if ratio > hi {
            hi
        } else {
            ratio
        };
        let surr = f64::min(ratio * s.advantage, clipped * s.advantage);
        let h: f64 = lp.iter().flatten().map(|l| -l.exp() * l).sum();
        total += -surr + c.value_loss_coeff * (v - s.ret).powi(2) - c.entropy_coeff * h;
    }
    total / n
}

/// Cells whose closed box meets the closed segment between two cell
/// centers, by exact separating-axis tests against every cell on the grid.
/// All coordinates are doubled so the arithmetic stays in integers.
pub fn sat_cells(width: usize, height: usize, a: Coord, b: Coord) -> Vec<Coord> {
    let (ax, ay) = (2 * a.j as i64 + 1, 2 * a.i as i64 + 1);
    let (bx, by) = (2 * b.j as i64 + 1, 2 * b.i as i64 + 1);
    let line = |x: i64, y: i64| (bx - ax) * (y - ay) - (by - ay) * (x - ax);
    let mut hit = Vec::new();
    for i in 0..height {
        for j in 0..width {
            let (x0, x1) = (2 * j as i64, 2 * j as i64 + 2);
            let (y0, y1) = (2 * i as i64, 2 * i as i64 + 2);
            if ax.max(bx) < x0 || ax.min(bx) > x1 || ay.max(by) < y0 || ay.min(by) > y1 {
                continue;
            }
            let vals = [line(x0, y0), line(x0, y1), line(x1, y0), line(x1, y1)];
            // the line separates the box only if every corner is strictly on one side
            if !(vals.iter().all(|&v| v > 0) || vals.iter().all(|&v| v < 0)) {
                hit.push(Coord::new(i, j));
            }
        }
    }
    hit
}

/// Walls strictly between the two endpoint cells.
pub fn sat_walls(map: &SiteMap, a: Coord, b: Coord) -> usize {
    sat_cells(map.width(), map.height(), a, b).into_iter().filter(|&c| c != a && c != b && map.is_building(c)).count()
}

/// Largest relative disagreement between the analytic gradient and central
/// finite differences of [`naive_loss`] on one random tiny configuration
/// (8-cell map, two hidden layers of 4). Components that agree to 1e-8
/// absolute count as exact.
pub fn gradcheck(seed: u64) -> f64 {
    use bsplace::agent::net::InitGains;
    use bsplace::agent::ppo::loss_and_grads;
    use bsplace::rng;

    let mut r = rng::seeded(seed);
    let gains = InitGains { hidden: 1.0, policy: 1.0, value: 1.0 };
    let mut params = PolicyParams::new(4, 2, &[4, 4], gains, seed);
    for d in params.layers_mut() {
        for b in d.b.iter_mut() {
            *b = 0.5 * rng::normal(&mut r);
        }
    }
    let n = 2 + rng::below(&mut r, 5) as usize;
    let c = LossCoeffs {
        clip_epsilon: 0.1 + 0.2 * rng::unit_f64(&mut r),
        value_loss_coeff: 0.5,
        entropy_coeff: 0.01 + 0.09 * rng::unit_f64(&mut r),
    };
    let mut feats = Vec::new();
    let mut masks = Vec::new();
    let mut actions = Vec::new();
    let mut olds = Vec::new();
    for _ in 0..n {
        let x: Vec<f64> = (0..17).map(|_| rng::unit_f64(&mut r)).collect();
        let mut m: Vec<bool> = (0..8).map(|_| rng::unit_f64(&mut r) < 0.7).collect();
        let forced = rng::below(&mut r, 8) as usize;
        m[forced] = true;
        let admissible: Vec<usize> = (0..8).filter(|&k| m[k]).collect();
        let a = admissible[rng::below(&mut r, admissible.len() as u64) as usize];
        let lp = naive_log_probs(&naive_forward(&params, &x).0, &m)[a].unwrap();
        // keep every ratio well away from the clip kinks, where the loss
        // is not differentiable
        let old = loop {
            let old = lp + 0.8 * (rng::unit_f64(&mut r) - 0.5);
            let ratio = (lp - old).exp();
            if (ratio - 1.0 - c.clip_epsilon).abs() > 3e-3 && (ratio - 1.0 + c.clip_epsilon).abs() > 3e-3 {
                break old;
            }
        };
        feats.push(x);
        masks.push(m);
        actions.push(a);
        olds.push(old);
    }
    let advs: Vec<f64> = (0..n).map(|_| rng::normal(&mut r)).collect();
    let rets: Vec<f64> = (0..n).map(|_| rng::normal(&mut r)).collect();
    let batch: Vec<Sample<'_>> = (0..n)
        .map(|k| Sample {
            features: &feats[k],
            mask: &masks[k],
            action: actions[k],
            old_log_prob: olds[k],
            advantage: advs[k],
            ret: rets[k],
        })
        .collect();

    let (loss, grads) = loss_and_grads(&params, &batch, c);
    let reference = naive_loss(&params, &batch, c);
    assert!((loss.total - reference).abs() <= 1e-12 * reference.abs().max(1.0), "{} vs {}", loss.total, reference);

    let analytic = grads.0.flatten();
    let base = params.flatten();
    let h = 1e-4;
    let mut worst: f64 = 0.0;
    for k in 0..base.len() {
        let mut v = base.clone();
        v[k] = base[k] + h;
        params.assign_flat(&v);
        let up = naive_loss(&params, &batch, c);
        v[k] = base[k] - h;
        params.assign_flat(&v);
        let down = naive_loss(&params, &batch, c);
        let fd = (up - down) / (2.0 * h);
        let diff = (analytic[k] - fd).abs();
        if diff > 1e-8 {
            worst = worst.max(diff / analytic[k].abs().max(fd.abs()));
        }
    }
    worst
}

/// Received power in watts at every cell, recomputed per cell from the
/// closed-form link budget with walls counted by [`sat_walls`].
pub fn naive_power(map: &SiteMap, radio: &bsplace::RadioConfig, bs: Coord) -> Vec<f64> {
    let f_mhz = radio.carrier_freq_hz / 1e6;
    let mut out = Vec::with_capacity(map.cells());
    for i in 0..map.height() {
        for j in 0..map.width() {
            let c = Coord::new(i, j);
            let dx = (j as f64 - bs.j as f64) * map.cell_size();
            let dy = (i as f64 - bs.i as f64) * map.cell_size();
            let d = dx.hypot(dy).max(radio.min_distance_m);
            let walls = sat_walls(map, bs, c) as f64;
            let pl = 20.0 * d.log10() + 20.0 * f_mhz.log10() + 32.44 - 60.0
                + (radio.wall_loss_db * walls).min(radio.excess_loss_cap_db);
            let watts = 10f64.powf((radio.tx_power_dbm - pl - 30.0) / 10.0);
            out.push(watts.max(1e-20));
        }
    }
    out
}

/// (coverage, capacity, pathgain) from scalar loops over [`naive_power`].
pub fn naive_metrics(map: &SiteMap, radio: &bsplace::RadioConfig, placements: &[Coord]) -> (f64, f64, f64) {
    let mut total = vec![0.0; map.cells()];
    for &p in placements {
        for (t, w) in total.iter_mut().zip(naive_power(map, radio, p)) {
            *t += w;
        }
    }
    let thr = 10f64.powf((radio.coverage_threshold_dbm - 30.0) / 10.0);
    let (mut covered, mut cap, mut gain, mut n) = (0.0, 0.0, 0.0, 0.0);
    for (k, &p) in total.iter().enumerate() {
        if !map.receiver()[k] {
            continue;
        }
        n += 1.0;
        if p >= thr {
            covered += 1.0;
        }
        cap += (1.0 + p / radio.noise_variance_w).log2();
        gain += p;
    }
    (covered / n, cap / n, gain)
}

pub fn rel_err(a: f64, b: f64) -> f64 {
    if a == b {
        0.0
    } else {
        (a - b).abs() / a.abs().max(b.abs())
    }
}

/// Random occupancy with the given building probability; at least one
/// open cell is kept.
pub fn random_map(seed: u64, w: usize, h: usize, cell: f64, density: f64) -> SiteMap {
    let mut r = bsplace::rng::seeded(seed);
    let mut occ: Vec<bool> = (0..w * h).map(|_| bsplace::rng::unit_f64(&mut r) < density).collect();
    occ[bsplace::rng::below(&mut r, (w * h) as u64) as usize] = false;
    SiteMap::new(w, h, cell, occ, None, None).unwrap()
}
