//! Fully connected policy/value network with hand-written backpropagation.
//!
//! Trunk: `input -> [Dense + tanh] x k`, then two linear heads on the last
//! hidden activation: one logit per map cell and one scalar value.

use ndarray::{s, Array1, Array2, ArrayView2, Axis, Zip};

use crate::rng::{self, Rng64};

/// Weight matrix is `fan_in x fan_out`, so a batch forward is `x.dot(&w)`.
#[derive(Debug, Clone, PartialEq)]
pub struct Dense {
    pub w: Array2<f64>,
    pub b: Array1<f64>,
}

impl Dense {
    pub fn zeros(fan_in: usize, fan_out: usize) -> Self {
        Dense { w: Array2::zeros((fan_in, fan_out)), b: Array1::zeros(fan_out) }
    }

    /// Weights drawn from `N(0, gain^2 / fan_in)`, zero biases.
    pub fn scaled_normal(fan_in: usize, fan_out: usize, gain: f64, rng: &mut Rng64) -> Self {
        let std = gain / (fan_in as f64).sqrt();
        let w = Array2::from_shape_simple_fn((fan_in, fan_out), || std * rng::normal(rng));
        Dense { w, b: Array1::zeros(fan_out) }
    }

    pub fn fan_in(&self) -> usize {
        self.w.nrows()
    }

    pub fn fan_out(&self) -> usize {
        self.w.ncols()
    }

    fn forward(&self, x: &ArrayView2<f64>) -> Array2<f64> {
        let mut z = x.dot(&self.w);
        z += &self.b;
        z
    }

    fn param_count(&self) -> usize {
        self.w.len() + self.b.len()
    }
}

/// Initialization gains. Hidden layers use `sqrt(2)`, the value head 1 and
/// the policy head 0.01 so the initial policy is close to uniform.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct InitGains {
    pub hidden: f64,
    pub policy: f64,
    pub value: f64,
}

impl Default for InitGains {
    fn default() -> Self {
        InitGains { hidden: std::f64::consts::SQRT_2, policy: 0.01, value: 1.0 }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct PolicyParams {
    pub width: usize,
    pub height: usize,
    pub hidden: Vec<Dense>,
    pub policy: Dense,
    pub value: Dense,
}

/// Activations kept for the backward pass.
pub struct ForwardCache {
    /// `acts[0]` is the input batch, `acts[k]` the output of hidden layer k.
    acts: Vec<Array2<f64>>,
    pub logits: Array2<f64>,
    pub values: Array1<f64>,
}

/// Parameter-shaped gradient container.
#[derive(Debug, Clone, PartialEq)]
pub struct Grads(pub PolicyParams);

impl PolicyParams {
    pub fn input_len(width: usize, height: usize) -> usize {
        2 * width * height + 1
    }

    pub fn new(width: usize, height: usize, hidden: &[usize], gains: InitGains, seed: u64) -> Self {
        let mut rng = rng::seeded(seed);
        let mut fan_in = Self::input_len(width, height);
        let mut layers = Vec::with_capacity(hidden.len());
        for &h in hidden {
            layers.push(Dense::scaled_normal(fan_in, h, gains.hidden, &mut rng));
            fan_in = h;
        }
        let policy = Dense::scaled_normal(fan_in, width * height, gains.policy, &mut rng);
        let value = Dense::scaled_normal(fan_in, 1, gains.value, &mut rng);
        PolicyParams { width, height, hidden: layers, policy, value }
    }

    pub fn zeros_like(&self) -> Self {
        let z = |d: &Dense| Dense::zeros(d.fan_in(), d.fan_out());
        PolicyParams {
            width: self.width,
            height: self.height,
            hidden: self.hidden.iter().map(z).collect(),
            policy: z(&self.policy),
            value: z(&self.value),
        }
    }

    pub fn actions(&self) -> usize {
        self.width * self.height
    }

    pub fn layers(&self) -> impl Iterator<Item = &Dense> {
        self.hidden.iter().chain([&self.policy, &self.value])
    }

    pub fn layers_mut(&mut self) -> impl Iterator<Item = &mut Dense> {
        self.hidden.iter_mut().chain([&mut self.policy, &mut self.value])
    }

    pub fn param_count(&self) -> usize {
        self.layers().map(Dense::param_count).sum()
    }

    /// Checks that the layer shapes chain together for this map size.
    pub fn dims_consistent(&self) -> bool {
        let mut fan_in = Self::input_len(self.width, self.height);
        for d in &self.hidden {
            if d.fan_in() != fan_in || d.b.len() != d.fan_out() {
                return false;
            }
            fan_in = d.fan_out();
        }
        self.policy.fan_in() == fan_in
            && self.policy.fan_out() == self.actions()
            && self.value.fan_in() == fan_in
            && self.value.fan_out() == 1
    }

    pub fn all_finite(&self) -> bool {
        self.layers().all(|d| d.w.iter().chain(d.b.iter()).all(|v| v.is_finite()))
    }

    /// Flat parameter vector in layer order, weights row-major then biases.
    pub fn flatten(&self) -> Vec<f64> {
        let mut out = Vec::with_capacity(self.param_count());
        for d in self.layers() {
            out.extend(d.w.iter());
            out.extend(d.b.iter());
        }
        out
    }

    pub fn assign_flat(&mut self, flat: &[f64]) {
        assert_eq!(flat.len(), self.param_count());
        let mut k = 0;
        for d in self.layers_mut() {
            for v in d.w.iter_mut().chain(d.b.iter_mut()) {
                *v = flat[k];
                k += 1;
            }
        }
    }

    /// Unmasked logits and values for a batch of feature rows.
    pub fn forward(&self, x: ArrayView2<f64>) -> ForwardCache {
        self.forward_owned(x.to_owned())
    }

    /// [`Self::forward`] without copying the input into the cache.
    pub fn forward_owned(&self, x: Array2<f64>) -> ForwardCache {
        let mut acts = Vec::with_capacity(self.hidden.len() + 1);
        acts.push(x);
        for d in &self.hidden {
            let mut z = d.forward(&acts.last().expect("input present").view());
            z.mapv_inplace(f64::tanh);
            acts.push(z);
        }
        let last = acts.last().expect("input present").view();
        let logits = self.policy.forward(&last);
        let values = self.value.forward(&last).index_axis_move(Axis(1), 0);
        ForwardCache { acts, logits, values }
    }

    /// Backpropagates upstream gradients of the loss with respect to the
    /// logits (`batch x actions`) and the values (`batch`).
    pub fn backward(&self, cache: &ForwardCache, d_logits: &Array2<f64>, d_values: &Array1<f64>) -> Grads {
        let mut grads = self.zeros_like();
        let last = cache.acts.last().expect("input present");
        let dv = d_values.view().insert_axis(Axis(1));
        grads.policy.w = last.t().dot(d_logits);
        grads.policy.b = d_logits.sum_axis(Axis(0));
        grads.value.w = last.t().dot(&dv);
        grads.value.b = dv.sum_axis(Axis(0));
        let mut d_act = d_logits.dot(&self.policy.w.t()) + dv.dot(&self.value.w.t());
        for k in (0..self.hidden.len()).rev() {
            let out = &cache.acts[k + 1];
            // tanh'(z) = 1 - tanh(z)^2
            Zip::from(&mut d_act).and(out).for_each(|g, &a| *g *= 1.0 - a * a);
            let input = &cache.acts[k];
            grads.hidden[k].w = input.t().dot(&d_act);
            grads.hidden[k].b = d_act.sum_axis(Axis(0));
            if k > 0 {
                d_act = d_act.dot(&self.hidden[k].w.t());
            }
        }
        Grads(grads)
    }
}

impl Grads {
    pub fn norm(&self) -> f64 {
        self.0.layers().flat_map(|d| d.w.iter().chain(d.b.iter())).map(|g| g * g).sum::<f64>().sqrt()
    }

    pub fn scale(&mut self, factor: f64) {
        for d in self.0.layers_mut() {
            d.w *= factor;
            d.b *= factor;
        }
    }
}

pub const MASKED: f64 = f64::NEG_INFINITY;

/// Sets inadmissible logits to negative infinity.
pub fn apply_mask(logits: &mut [f64], mask: &[bool]) {
    for (z, &ok) in logits.iter_mut().zip(mask) {
        if !ok {
            *z = MASKED;
        }
    }
}

/// Log-probabilities of a masked logit row; masked entries stay `-inf`.
pub fn log_softmax(masked_logits: &[f64]) -> Vec<f64> {
    let max = masked_logits.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    assert!(max.is_finite(), "no admissible action");
    let sum: f64 = masked_logits.iter().map(|&z| (z - max).exp()).sum();
    let log_z = max + sum.ln();
    masked_logits.iter().map(|&z| z - log_z).collect()
}

pub fn softmax(masked_logits: &[f64]) -> Vec<f64> {
    log_softmax(masked_logits).into_iter().map(f64::exp).collect()
}

/// Copies row `k` of a batch.
pub fn row(batch: &Array2<f64>, k: usize) -> Vec<f64> {
    batch.slice(s![k, ..]).to_vec()
}
