//! A set encoder `H_φ(X) = h²(mean_i h¹(xᵢ))` that predicts two-component
//! mixture parameters, trained on likelihood plus the autophagy penalty.
//!
//! `h¹` maps each point to an 8-wide feature, the features are mean-pooled,
//! and `h²` is a trunk followed by three linear heads: means (identity),
//! variances (softplus) and weights (softmax). Inputs are sorted before
//! pooling, so the output is bitwise identical under any permutation.
//!
//! The penalty re-applies the same network to `m` synthetic points drawn from
//! its own prediction. Points are reparameterized as `μ_c + σ_c z` with fixed
//! `z`; the component `c` is chosen by thresholding fixed uniforms at the
//! predicted `w₁`, and that choice is held constant in the backward pass.

use alloc::string::String;
use alloc::vec::Vec;
use core::ops::Range;

use crate::autodiff::{Matrix, Tape, Var};
use crate::distributions::{Dataset, FamilyTag, ParamVector};
use crate::error::{Error, Result};
use crate::math::{sqrt, LN_2PI};
use crate::rng::{domain, SeededRng};

/// Added to the softplus output so that predicted variances stay positive
/// even where softplus underflows.
pub const VARIANCE_FLOOR: f64 = 1e-6;

pub const HIDDEN: usize = 8;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum Activation {
    Relu,
    Identity,
    Softplus,
    Softmax,
}

#[derive(Clone, Debug, PartialEq)]
pub struct Dense {
    /// `inputs × outputs`.
    pub weight: Matrix,
    /// `1 × outputs`.
    pub bias: Matrix,
    pub activation: Activation,
}

impl Dense {
    /// Weights and biases uniform in `±1/√inputs`.
    pub fn init(inputs: usize, outputs: usize, activation: Activation, rng: &mut SeededRng) -> Self {
        let bound = 1.0 / sqrt(inputs as f64);
        let mut draw = |k: usize| -> Vec<f64> {
            (0..k).map(|_| bound * (2.0 * rng.uniform() - 1.0)).collect()
        };
        Self {
            weight: Matrix::new(inputs, outputs, draw(inputs * outputs)),
            bias: Matrix::row(draw(outputs)),
            activation,
        }
    }

    pub fn zeros(inputs: usize, outputs: usize, activation: Activation) -> Self {
        Self {
            weight: Matrix::zeros(inputs, outputs),
            bias: Matrix::zeros(1, outputs),
            activation,
        }
    }

    pub fn inputs(&self) -> usize {
        self.weight.rows
    }

    pub fn outputs(&self) -> usize {
        self.weight.cols
    }

    fn param_count(&self) -> usize {
        self.weight.data.len() + self.bias.data.len()
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct DenseNet {
    pub layers: Vec<Dense>,
}

impl DenseNet {
    /// Layers of sizes `sizes[i] → sizes[i+1]`, all with `activation`.
    pub fn init(sizes: &[usize], activation: Activation, rng: &mut SeededRng) -> Self {
        Self {
            layers: sizes
                .windows(2)
                .map(|w| Dense::init(w[0], w[1], activation, rng))
                .collect(),
        }
    }

    pub fn validate(&self) -> Result<()> {
        for w in self.layers.windows(2) {
            if w[0].outputs() != w[1].inputs() {
                return Err(Error::Config("consecutive layer sizes do not match".into()));
            }
        }
        Ok(())
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct HyperNet {
    pub encoder: DenseNet,
    pub trunk: DenseNet,
    pub means: Dense,
    pub variances: Dense,
    pub weights: Dense,
}

/// Leaves for every weight and bias, in [`HyperNet::params`] order.
struct Bound {
    vars: Vec<Var>,
}

/// Predicted mixture, each head as a `1 × 2` node.
#[derive(Clone, Copy)]
struct Heads {
    means: Var,
    variances: Var,
    weights: Var,
}

impl HyperNet {
    /// Encoder `1 → 8 → 8 → 8`, trunk `8 → 8 → 8`, one linear layer per head.
    pub fn init(rng: &mut SeededRng) -> Self {
        Self {
            encoder: DenseNet::init(&[1, HIDDEN, HIDDEN, HIDDEN], Activation::Relu, rng),
            trunk: DenseNet::init(&[HIDDEN, HIDDEN, HIDDEN], Activation::Relu, rng),
            means: Dense::init(HIDDEN, 2, Activation::Identity, rng),
            variances: Dense::init(HIDDEN, 2, Activation::Softplus, rng),
            weights: Dense::init(HIDDEN, 2, Activation::Softmax, rng),
        }
    }

    pub fn zeros() -> Self {
        let relu = |i, o| Dense::zeros(i, o, Activation::Relu);
        Self {
            encoder: DenseNet {
                layers: alloc::vec![relu(1, HIDDEN), relu(HIDDEN, HIDDEN), relu(HIDDEN, HIDDEN)],
            },
            trunk: DenseNet {
                layers: alloc::vec![relu(HIDDEN, HIDDEN), relu(HIDDEN, HIDDEN)],
            },
            means: Dense::zeros(HIDDEN, 2, Activation::Identity),
            variances: Dense::zeros(HIDDEN, 2, Activation::Softplus),
            weights: Dense::zeros(HIDDEN, 2, Activation::Softmax),
        }
    }

    fn layers(&self) -> impl Iterator<Item = &Dense> {
        self.encoder
            .layers
            .iter()
            .chain(&self.trunk.layers)
            .chain([&self.means, &self.variances, &self.weights])
    }

    fn layers_mut(&mut self) -> impl Iterator<Item = &mut Dense> {
        self.encoder
            .layers
            .iter_mut()
            .chain(self.trunk.layers.iter_mut())
            .chain([&mut self.means, &mut self.variances, &mut self.weights])
    }

    pub fn validate(&self) -> Result<()> {
        self.encoder.validate()?;
        self.trunk.validate()?;
        let enc_out = self.encoder.layers.last().map(Dense::outputs);
        let trunk_in = self.trunk.layers.first().map(Dense::inputs);
        let trunk_out = self.trunk.layers.last().map(Dense::outputs);
        let ok = self.encoder.layers.first().map(Dense::inputs) == Some(1)
            && enc_out.is_some()
            && enc_out == trunk_in
            && [&self.means, &self.variances, &self.weights]
                .iter()
                .all(|h| Some(h.inputs()) == trunk_out && h.outputs() == 2);
        if !ok {
            return Err(Error::Config("hypernetwork shapes are inconsistent".into()));
        }
        if self.params().iter().any(|p| !p.is_finite()) {
            return Err(Error::Config("hypernetwork has non-finite weights".into()));
        }
        Ok(())
    }

    pub fn param_count(&self) -> usize {
        self.layers().map(Dense::param_count).sum()
    }

    /// All weights and biases, layer by layer (weight then bias).
    pub fn params(&self) -> Vec<f64> {
        let mut out = Vec::with_capacity(self.param_count());
        for l in self.layers() {
            out.extend_from_slice(&l.weight.data);
            out.extend_from_slice(&l.bias.data);
        }
        out
    }

    pub fn set_params(&mut self, params: &[f64]) {
        assert_eq!(params.len(), self.param_count(), "parameter count mismatch");
        let mut at = 0;
        for l in self.layers_mut() {
            for m in [&mut l.weight, &mut l.bias] {
                let k = m.data.len();
                m.data.copy_from_slice(&params[at..at + k]);
                at += k;
            }
        }
    }

    /// Named index ranges into [`Self::params`], one per weight or bias tensor.
    pub fn param_groups(&self) -> Vec<(String, Range<usize>)> {
        let mut names = Vec::new();
        for i in 0..self.encoder.layers.len() {
            names.push(alloc::format!("encoder.{i}"));
        }
        for i in 0..self.trunk.layers.len() {
            names.push(alloc::format!("trunk.{i}"));
        }
        names.extend(["means".into(), "variances".into(), "weights".into()]);
        let mut out = Vec::new();
        let mut at = 0;
        for (name, l) in names.into_iter().zip(self.layers()) {
            let (w, b) = (l.weight.data.len(), l.bias.data.len());
            out.push((alloc::format!("{name}.weight"), at..at + w));
            out.push((alloc::format!("{name}.bias"), at + w..at + w + b));
            at += w + b;
        }
        out
    }

    fn bind(&self, tape: &mut Tape) -> Bound {
        let mut vars = Vec::new();
        for l in self.layers() {
            vars.push(tape.leaf(l.weight.clone()));
            vars.push(tape.leaf(l.bias.clone()));
        }
        Bound { vars }
    }

    fn dense(tape: &mut Tape, layer: &Dense, w: Var, b: Var, x: Var) -> Var {
        let z = tape.matmul(x, w);
        let z = tape.add_row(z, b);
        match layer.activation {
            Activation::Relu => tape.relu(z),
            Activation::Identity => z,
            Activation::Softplus => {
                let s = tape.softplus(z);
                tape.add_const(s, VARIANCE_FLOOR)
            }
            Activation::Softmax => tape.softmax_rows(z),
        }
    }

    /// Forward pass over an `n × 1` column of points, in the given order.
    fn heads(&self, tape: &mut Tape, bound: &Bound, x: Var) -> Heads {
        let mut vars = bound.vars.chunks_exact(2);
        let mut h = x;
        let mut next = |tape: &mut Tape, layer: &Dense, input: Var| {
            let wb = vars.next().expect("one binding per layer");
            Self::dense(tape, layer, wb[0], wb[1], input)
        };
        for l in &self.encoder.layers {
            h = next(tape, l, h);
        }
        h = tape.mean_rows(h);
        for l in &self.trunk.layers {
            h = next(tape, l, h);
        }
        Heads {
            means: next(tape, &self.means, h),
            variances: next(tape, &self.variances, h),
            weights: next(tape, &self.weights, h),
        }
    }

    fn read(tape: &Tape, heads: Heads) -> ParamVector {
        let m = &tape.value(heads.means).data;
        let v = &tape.value(heads.variances).data;
        let w = &tape.value(heads.weights).data;
        ParamVector::new_unchecked(FamilyTag::Gmm2, alloc::vec![m[0], m[1], v[0], v[1], w[0]])
    }

    /// Predicted mixture `(μ₁, μ₂, σ₁², σ₂², w₁)`.
    pub fn forward(&self, data: &Dataset) -> ParamVector {
        let mut tape = Tape::new();
        let bound = self.bind(&mut tape);
        let x = tape.leaf(Matrix::column(data.sorted()));
        let heads = self.heads(&mut tape, &bound, x);
        Self::read(&tape, heads)
    }

    /// Loss and its gradient in [`Self::params`] order.
    pub fn loss(&self, data: &Dataset, lambda: f64, bank: &PenaltyBank) -> (LossParts, Vec<f64>) {
        let mut tape = Tape::new();
        let bound = self.bind(&mut tape);
        let x = tape.leaf(Matrix::column(data.sorted()));
        let hx = self.heads(&mut tape, &bound, x);

        // −(1/n) Σ ln Σ_c w_c N(x; μ_c, σ_c²)
        let n = data.len();
        let mut comps = [x; 2];
        for (c, slot) in comps.iter_mut().enumerate() {
            let mu = tape.column(hx.means, c);
            let mu = tape.repeat_rows(mu, n);
            let var = tape.column(hx.variances, c);
            let var = tape.repeat_rows(var, n);
            let w = tape.column(hx.weights, c);
            let lnw = tape.ln(w);
            let lnw = tape.repeat_rows(lnw, n);
            let d = tape.sub(x, mu);
            let sq = tape.mul(d, d);
            let q = tape.div(sq, var);
            let q = tape.scale(q, -0.5);
            let lnv = tape.ln(var);
            let lnv = tape.scale(lnv, -0.5);
            let t = tape.add(q, lnv);
            *slot = tape.add(t, lnw);
        }
        let lse = tape.log_add_exp(comps[0], comps[1]);
        let total_ll = tape.sum(lse);
        let nll = tape.scale(total_ll, -1.0 / n as f64);
        let nll = tape.add_const(nll, 0.5 * LN_2PI);

        let mut total = nll;
        let mut penalty_value = 0.0;
        if lambda != 0.0 {
            let m = bank.len();
            let w1 = tape.value(hx.weights).data[0];
            let mask: Vec<f64> = bank.u.iter().map(|&u| if u < w1 { 1.0 } else { 0.0 }).collect();
            let inv: Vec<f64> = mask.iter().map(|k| 1.0 - k).collect();
            let z = tape.leaf(Matrix::column(bank.z.clone()));
            let mut parts = [x; 2];
            for (c, slot) in parts.iter_mut().enumerate() {
                let mu = tape.column(hx.means, c);
                let mu = tape.repeat_rows(mu, m);
                let var = tape.column(hx.variances, c);
                let sd = tape.sqrt(var);
                let sd = tape.repeat_rows(sd, m);
                let noise = tape.mul(sd, z);
                let y = tape.add(mu, noise);
                let sel = tape.leaf(Matrix::column(if c == 0 { mask.clone() } else { inv.clone() }));
                *slot = tape.mul(sel, y);
            }
            let y = tape.add(parts[0], parts[1]);
            let hy = self.heads(&mut tape, &bound, y);
            let mut pen = None;
            for (a, b) in [
                (hy.means, hx.means),
                (hy.variances, hx.variances),
                (hy.weights, hx.weights),
            ] {
                let d = tape.sub(a, b);
                // only w₁ of the weight head is a free parameter
                let d = if a == hy.weights { tape.column(d, 0) } else { d };
                let sq = tape.mul(d, d);
                let s = tape.sum(sq);
                pen = Some(match pen {
                    None => s,
                    Some(p) => tape.add(p, s),
                });
            }
            let pen = pen.expect("three heads");
            penalty_value = tape.value(pen).data[0];
            let weighted = tape.scale(pen, lambda);
            total = tape.add(nll, weighted);
        }

        let grads = tape.backward(total);
        let mut g = Vec::with_capacity(self.param_count());
        for &v in &bound.vars {
            match grads.get(v) {
                Some(m) => g.extend_from_slice(&m.data),
                None => g.extend(core::iter::repeat_n(0.0, tape.value(v).data.len())),
            }
        }
        let parts = LossParts {
            total: tape.value(total).data[0],
            nll: tape.value(nll).data[0],
            penalty: penalty_value,
        };
        (parts, g)
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct LossParts {
    pub total: f64,
    /// Mean negative log-likelihood per point.
    pub nll: f64,
    /// Unweighted `‖H(Y) − H(X)‖²`.
    pub penalty: f64,
}

/// Fixed draws behind the synthetic points of one loss evaluation.
#[derive(Clone, Debug, PartialEq)]
pub struct PenaltyBank {
    /// Component selectors in `(0, 1)`.
    pub u: Vec<f64>,
    /// Standard normal draws.
    pub z: Vec<f64>,
}

impl PenaltyBank {
    pub fn draw(m: usize, rng: &mut SeededRng) -> Self {
        let mut u = alloc::vec![0.0; m];
        rng.fill_open_uniform(&mut u);
        let z = (0..m).map(|_| rng.standard_normal()).collect();
        Self { u, z }
    }

    pub fn len(&self) -> usize {
        self.u.len()
    }

    pub fn is_empty(&self) -> bool {
        self.u.is_empty()
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct TrainConfig {
    pub learning_rate: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub epsilon: f64,
    pub steps: usize,
    /// Datasets averaged per step.
    pub datasets_per_step: usize,
    /// Points per training dataset.
    pub points: usize,
    pub lambda: f64,
    /// Synthetic points for the penalty; `None` uses `points`.
    pub synthetic: Option<usize>,
    pub seed: u64,
}

impl Default for TrainConfig {
    fn default() -> Self {
        Self {
            learning_rate: 1e-3,
            beta1: 0.9,
            beta2: 0.999,
            epsilon: 1e-8,
            steps: 3000,
            datasets_per_step: 1,
            points: 50,
            lambda: 0.1,
            synthetic: None,
            seed: 0,
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<()> {
        let rates = self.learning_rate > 0.0
            && (0.0..1.0).contains(&self.beta1)
            && (0.0..1.0).contains(&self.beta2)
            && self.epsilon > 0.0;
        if !rates || self.datasets_per_step == 0 || self.points == 0 || self.synthetic == Some(0) {
            return Err(Error::Config("training rates and counts must be positive".into()));
        }
        if !(self.lambda >= 0.0) {
            return Err(Error::Config("lambda must be >= 0".into()));
        }
        Ok(())
    }
}

/// Adam with bias-corrected moments.
#[derive(Clone, Debug)]
pub struct Adam {
    lr: f64,
    beta1: f64,
    beta2: f64,
    epsilon: f64,
    m: Vec<f64>,
    v: Vec<f64>,
    t: i32,
}

impl Adam {
    pub fn new(params: usize, cfg: &TrainConfig) -> Self {
        Self {
            lr: cfg.learning_rate,
            beta1: cfg.beta1,
            beta2: cfg.beta2,
            epsilon: cfg.epsilon,
            m: alloc::vec![0.0; params],
            v: alloc::vec![0.0; params],
            t: 0,
        }
    }

    pub fn step(&mut self, params: &mut [f64], grad: &[f64]) {
        self.t += 1;
        let c1 = 1.0 - crate::math::powi(self.beta1, self.t);
        let c2 = 1.0 - crate::math::powi(self.beta2, self.t);
        for i in 0..params.len() {
            self.m[i] = self.beta1 * self.m[i] + (1.0 - self.beta1) * grad[i];
            self.v[i] = self.beta2 * self.v[i] + (1.0 - self.beta2) * grad[i] * grad[i];
            let mh = self.m[i] / c1;
            let vh = self.v[i] / c2;
            params[i] -= self.lr * mh / (sqrt(vh) + self.epsilon);
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct LossPoint {
    pub step: usize,
    pub nll: f64,
    pub penalty: f64,
}

/// Trains `net` in place. `source(step, rng)` supplies each training dataset.
pub fn train(
    net: &mut HyperNet,
    mut source: impl FnMut(usize, &mut SeededRng) -> Result<Dataset>,
    cfg: &TrainConfig,
) -> Result<Vec<LossPoint>> {
    cfg.validate()?;
    net.validate()?;
    let mut data_rng = SeededRng::new(cfg.seed, crate::rng::stream_id(&[domain::TRAIN, 0]));
    let mut bank_rng = SeededRng::new(cfg.seed, crate::rng::stream_id(&[domain::TRAIN, 1]));
    let mut adam = Adam::new(net.param_count(), cfg);
    let mut params = net.params();
    let mut curve = Vec::with_capacity(cfg.steps);
    let k = cfg.datasets_per_step as f64;
    for step in 0..cfg.steps {
        let mut grad = alloc::vec![0.0; params.len()];
        let mut point = LossPoint {
            step,
            nll: 0.0,
            penalty: 0.0,
        };
        for _ in 0..cfg.datasets_per_step {
            let data = source(step, &mut data_rng)?;
            let bank = PenaltyBank::draw(cfg.synthetic.unwrap_or(data.len()), &mut bank_rng);
            let (parts, g) = net.loss(&data, cfg.lambda, &bank);
            if !parts.total.is_finite() || g.iter().any(|v| !v.is_finite()) {
                return Err(Error::Divergence {
                    step,
                    detail: alloc::format!("loss {} is not finite", parts.total),
                });
            }
            grad.iter_mut().zip(&g).for_each(|(a, b)| *a += b / k);
            point.nll += parts.nll / k;
            point.penalty += parts.penalty / k;
        }
        adam.step(&mut params, &grad);
        net.set_params(&params);
        curve.push(point);
    }
    Ok(curve)
}

/// A training source that draws a fresh dataset of `points` points from `truth` at every step.
pub fn truth_source(
    truth: &ParamVector,
    points: usize,
) -> impl FnMut(usize, &mut SeededRng) -> Result<Dataset> + '_ {
    move |_, rng| truth.family().sample(truth, points, rng)
}

/// Analytic and central-difference gradient for one parameter.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct GradientCheck {
    pub index: usize,
    pub analytic: f64,
    pub numeric: f64,
}

impl GradientCheck {
    /// `|a − f| / max(|a|, |f|, 1e-7)`.
    pub fn relative_error(&self) -> f64 {
        (self.analytic - self.numeric).abs() / self.analytic.abs().max(self.numeric.abs()).max(1e-7)
    }
}

/// Compares the loss gradient with central differences of step `h` at `indices`.
pub fn gradient_check(
    net: &HyperNet,
    data: &Dataset,
    lambda: f64,
    bank: &PenaltyBank,
    indices: &[usize],
    h: f64,
) -> Vec<GradientCheck> {
    let (_, grad) = net.loss(data, lambda, bank);
    let base = net.params();
    let mut probe = net.clone();
    indices
        .iter()
        .map(|&i| {
            let mut p = base.clone();
            p[i] = base[i] + h;
            probe.set_params(&p);
            let up = probe.loss(data, lambda, bank).0.total;
            p[i] = base[i] - h;
            probe.set_params(&p);
            let down = probe.loss(data, lambda, bank).0.total;
            GradientCheck {
                index: i,
                analytic: grad[i],
                numeric: (up - down) / (2.0 * h),
            }
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    fn mixture() -> ParamVector {
        ParamVector::gmm2(0.0, 2.0, 1.0, 1.0, 0.9).unwrap()
    }

    fn data(n: usize, seed: u64) -> Dataset {
        FamilyTag::Gmm2.sample(&mixture(), n, &mut SeededRng::new(seed, 0)).unwrap()
    }

    #[test]
    fn shapes_and_groups() {
        let net = HyperNet::init(&mut SeededRng::new(0, 0));
        net.validate().unwrap();
        let groups = net.param_groups();
        assert_eq!(groups.len(), 16);
        assert_eq!(groups.last().unwrap().1.end, net.param_count());
        assert_eq!(net.param_count(), (8 + 8) + 2 * (64 + 8) + 2 * (64 + 8) + 3 * (16 + 2));
        let mut other = HyperNet::zeros();
        other.set_params(&net.params());
        assert_eq!(other, net);
    }

    #[test]
    fn permutation_invariance_is_exact() {
        let net = HyperNet::init(&mut SeededRng::new(1, 0));
        let d = data(37, 2);
        let base = net.forward(&d);
        let mut rng = SeededRng::new(3, 0);
        for _ in 0..20 {
            let mut p = d.points().to_vec();
            rng.shuffle(&mut p);
            assert_eq!(net.forward(&Dataset::new(p).unwrap()), base);
        }
    }

    #[test]
    fn zero_net_gives_even_weights() {
        let out = HyperNet::zeros().forward(&data(5, 0));
        let v = out.values();
        assert_eq!(&v[..2], &[0.0, 0.0]);
        assert_eq!(v[4], 0.5);
        assert!((v[2] - (core::f64::consts::LN_2 + VARIANCE_FLOOR)).abs() < 1e-15);
    }

    #[test]
    fn outputs_are_valid_for_any_n() {
        let mut rng = SeededRng::new(4, 0);
        for n in [1, 2, 7, 300] {
            let net = HyperNet::init(&mut rng);
            let p = net.forward(&data(n, n as u64));
            assert!(p.is_valid(), "{p:?}");
        }
    }

    #[test]
    fn gradients_match_finite_differences() {
        let net = HyperNet::init(&mut SeededRng::new(5, 0));
        let d = data(20, 6);
        let bank = PenaltyBank::draw(20, &mut SeededRng::new(7, 0));
        let mut rng = SeededRng::new(8, 0);
        for lambda in [0.0, 0.1] {
            let mut idx = Vec::new();
            for (_, r) in net.param_groups() {
                idx.push(r.start + rng.below(r.len()));
            }
            for c in gradient_check(&net, &d, lambda, &bank, &idx, 1e-5) {
                assert!(c.relative_error() < 1e-4, "{lambda} {c:?}");
            }
        }
    }

    #[test]
    fn zero_lambda_is_plain_likelihood() {
        let net = HyperNet::init(&mut SeededRng::new(9, 0));
        let d = data(30, 1);
        let bank = PenaltyBank::draw(30, &mut SeededRng::new(1, 1));
        let (parts, _) = net.loss(&d, 0.0, &bank);
        let p = net.forward(&d);
        let ll = FamilyTag::Gmm2.log_likelihood(&p, &d).unwrap();
        assert!((parts.nll + ll / 30.0).abs() < 1e-12);
        assert_eq!(parts.total, parts.nll);
        let doubled: Vec<f64> = d.iter().chain(d.iter()).copied().collect();
        let (again, _) = net.loss(&Dataset::new(doubled).unwrap(), 0.0, &bank);
        assert!((again.total - parts.total).abs() < 1e-12);
    }

    #[test]
    fn training_reduces_nll_and_is_deterministic() {
        let cfg = TrainConfig {
            steps: 300,
            learning_rate: 1e-2,
            points: 40,
            seed: 3,
            ..TrainConfig::default()
        };
        let truth = mixture();
        let run = || {
            let mut net = HyperNet::init(&mut SeededRng::new(10, 0));
            let curve = train(&mut net, truth_source(&truth, 40), &cfg).unwrap();
            (net, curve)
        };
        let (a, curve) = run();
        let (b, _) = run();
        assert_eq!(a, b);
        let head: f64 = curve[..50].iter().map(|p| p.nll).sum();
        let tail: f64 = curve[250..].iter().map(|p| p.nll).sum();
        assert!(tail < head, "{head} {tail}");
    }

    #[test]
    fn divergence_is_reported() {
        let mut net = HyperNet::init(&mut SeededRng::new(0, 0));
        let mut p = net.params();
        p[0] = 1e300;
        p[8] = 1e300;
        net.set_params(&p);
        let cfg = TrainConfig {
            steps: 2,
            ..TrainConfig::default()
        };
        let truth = mixture();
        let err = train(&mut net, truth_source(&truth, 10), &cfg);
        assert!(matches!(err, Err(Error::Divergence { .. }) | Err(Error::Config(_))));
    }
}
