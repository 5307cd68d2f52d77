//! Two-component 1-D mixtures: EM, sampled KL divergence, the fairness
//! ratio, and the EM-vs-PLE grid over imbalance and sample size.
//!
//! `D = KL_MLE − KL_PLE`, so `D > 0` means PLE is closer to the truth.

use alloc::string::String;
use alloc::vec::Vec;

use crate::distributions::{gaussian_ln_pdf, log_density, Dataset, FamilyTag, ParamVector};
use crate::error::{Error, Result};
use crate::hypernet::{self, HyperNet, TrainConfig};
use crate::math::{exp, ln, log_add_exp, ln1p};
use crate::rng::{domain, stream_id, SeededRng};
use crate::solver::{ple_fit, ClassForm, EstimatorClass, PenaltyConfig};
use crate::stats::RunningStats;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum EmInit {
    /// Means at two distinct random data points.
    RandomPoints,
    /// Both means at the sample mean. EM keeps the components identical, so
    /// this reproduces the single-Gaussian fit.
    Symmetric,
}

#[derive(Clone, Debug, PartialEq)]
pub struct EmConfig {
    pub init: EmInit,
    /// Stop when the log-likelihood changes by less than `tolerance · max(1, |ll|)`.
    pub tolerance: f64,
    pub max_iter: usize,
    pub restarts: usize,
    pub variance_floor: f64,
}

impl Default for EmConfig {
    fn default() -> Self {
        Self {
            init: EmInit::RandomPoints,
            tolerance: 1e-12,
            max_iter: 100_000,
            restarts: 5,
            variance_floor: 1e-6,
        }
    }
}

impl EmConfig {
    fn validate(&self) -> Result<()> {
        if !(self.tolerance > 0.0) || self.max_iter == 0 || self.restarts == 0 {
            return Err(Error::Config("EM needs tolerance > 0, max_iter >= 1, restarts >= 1".into()));
        }
        Ok(())
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct EmFit {
    pub params: ParamVector,
    pub log_likelihood: f64,
    /// Log-likelihood before every M-step of the winning restart.
    pub trace: Vec<f64>,
    pub iterations: usize,
    pub converged: bool,
    /// A variance hit the floor in the winning restart.
    pub floored: bool,
}

fn mixture_ll(points: &[f64], p: &[f64; 5]) -> f64 {
    let (lw1, lw2) = (ln(p[4]), ln1p(-p[4]));
    points
        .iter()
        .map(|&x| log_add_exp(lw1 + gaussian_ln_pdf(x, p[0], p[2]), lw2 + gaussian_ln_pdf(x, p[1], p[3])))
        .sum()
}

fn em_run(points: &[f64], init: [f64; 5], cfg: &EmConfig) -> EmFit {
    let n = points.len() as f64;
    let mut p = init;
    let mut trace = Vec::new();
    let mut resp = alloc::vec![0.0; points.len()];
    let mut floored = false;
    let mut converged = false;
    let mut old = f64::NEG_INFINITY;
    for _ in 0..cfg.max_iter {
        let (lw1, lw2) = (ln(p[4]), ln1p(-p[4]));
        let mut ll = 0.0;
        for (r, &x) in resp.iter_mut().zip(points) {
            let a = lw1 + gaussian_ln_pdf(x, p[0], p[2]);
            let b = lw2 + gaussian_ln_pdf(x, p[1], p[3]);
            let l = log_add_exp(a, b);
            ll += l;
            *r = exp(a - l);
        }
        trace.push(ll);
        if (ll - old).abs() <= cfg.tolerance * ll.abs().max(1.0) {
            converged = true;
            break;
        }
        old = ll;

        let (mut n1, mut n2, mut s1, mut s2) = (0.0, 0.0, 0.0, 0.0);
        for (&r, &x) in resp.iter().zip(points) {
            n1 += r;
            n2 += 1.0 - r;
            s1 += r * x;
            s2 += (1.0 - r) * x;
        }
        let m1 = if n1 > 0.0 { s1 / n1 } else { p[0] };
        let m2 = if n2 > 0.0 { s2 / n2 } else { p[1] };
        let (mut q1, mut q2) = (0.0, 0.0);
        for (&r, &x) in resp.iter().zip(points) {
            q1 += r * (x - m1) * (x - m1);
            q2 += (1.0 - r) * (x - m2) * (x - m2);
        }
        let mut var = |q: f64, nc: f64| {
            let v = if nc > 0.0 { q / nc } else { 0.0 };
            if v < cfg.variance_floor {
                floored = true;
                cfg.variance_floor
            } else {
                v
            }
        };
        let v1 = var(q1, n1);
        let v2 = var(q2, n2);
        let w = (n1 / n).clamp(1e-12, 1.0 - 1e-12);
        p = [m1, m2, v1, v2, w];
    }
    let log_likelihood = mixture_ll(points, &p);
    EmFit {
        params: ParamVector::new_unchecked(FamilyTag::Gmm2, p.to_vec()),
        log_likelihood,
        iterations: trace.len(),
        trace,
        converged,
        floored,
    }
}

/// Best of `restarts` EM runs. Each run starts with both variances at the
/// data variance, equal weights, and means placed per [`EmConfig::init`].
pub fn em_fit(data: &Dataset, cfg: &EmConfig, rng: &mut SeededRng) -> Result<EmFit> {
    cfg.validate()?;
    if data.len() < 4 {
        return Err(Error::InsufficientData {
            needed: 4,
            got: data.len(),
        });
    }
    let points = data.sorted();
    let n = points.len();
    let mean = points.iter().sum::<f64>() / n as f64;
    let var = (points.iter().map(|x| (x - mean) * (x - mean)).sum::<f64>() / n as f64)
        .max(cfg.variance_floor);
    let mut best: Option<EmFit> = None;
    for _ in 0..cfg.restarts {
        let (m1, m2) = match cfg.init {
            EmInit::RandomPoints => {
                let i = rng.below(n);
                let mut j = rng.below(n - 1);
                if j >= i {
                    j += 1;
                }
                (points[i], points[j])
            }
            EmInit::Symmetric => (mean, mean),
        };
        let fit = em_run(&points, [m1, m2, var, var, 0.5], cfg);
        if best.as_ref().is_none_or(|b| fit.log_likelihood > b.log_likelihood) {
            best = Some(fit);
        }
    }
    Ok(best.expect("at least one restart"))
}

/// Component order `(mean, variance, weight)` ascending; used wherever a
/// result must not depend on how the components are labelled.
///
/// The kept weight goes through `1 - (1 - w)` as a swap would, so both
/// labellings of one mixture map to the same bits.
pub fn canonical(p: &ParamVector) -> ParamVector {
    let v = p.values();
    let first = (v[0], v[2], v[4]);
    let second = (v[1], v[3], 1.0 - v[4]);
    let keep = match first.0.total_cmp(&second.0) {
        core::cmp::Ordering::Equal => match first.1.total_cmp(&second.1) {
            core::cmp::Ordering::Equal => first.2 <= second.2,
            o => o.is_lt(),
        },
        o => o.is_lt(),
    };
    if keep {
        let mut w = v.to_vec();
        w[4] = 1.0 - (1.0 - v[4]);
        ParamVector::new_unchecked(FamilyTag::Gmm2, w)
    } else {
        p.swap_components()
    }
}

/// Monte-Carlo `KL(q ‖ p) = E_{x~q}[ln q(x) − ln p(x)]` and its standard error.
pub fn kl_divergence(
    q: &ParamVector,
    p: &ParamVector,
    samples: usize,
    rng: &mut SeededRng,
) -> Result<(f64, f64)> {
    for v in [q, p] {
        if v.family() != FamilyTag::Gmm2 {
            return Err(Error::FamilyMismatch {
                expected: FamilyTag::Gmm2.name(),
                got: v.family().name(),
            });
        }
        v.validate()?;
    }
    if samples < 2 {
        return Err(Error::Config("KL needs at least 2 samples".into()));
    }
    let q = canonical(q);
    let p = canonical(p);
    let xs = FamilyTag::Gmm2.sample(&q, samples, rng)?;
    let s: RunningStats = xs
        .iter()
        .map(|&x| log_density(FamilyTag::Gmm2, q.values(), x) - log_density(FamilyTag::Gmm2, p.values(), x))
        .collect();
    Ok((s.mean(), s.stderr()))
}

/// Closed-form `KL(N(m1, v1) ‖ N(m2, v2))`.
pub fn gaussian_kl(m1: f64, v1: f64, m2: f64, v2: f64) -> f64 {
    0.5 * (ln(v2 / v1) + (v1 + (m1 - m2) * (m1 - m2)) / v2 - 1.0)
}

pub const SCORE_CAP: f64 = 1e6;

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct FairnessReport {
    pub score_majority: f64,
    pub score_minority: f64,
    /// `score_majority / score_minority`.
    pub ratio: f64,
}

/// Per-component scores `1 / KL(fitted ‖ true)` (capped at [`SCORE_CAP`])
/// after matching fitted to true components by nearest mean. The majority is
/// the true component with the larger weight (the first on a tie).
pub fn fairness_report(fit: &ParamVector, truth: &ParamVector) -> Result<FairnessReport> {
    for v in [fit, truth] {
        if v.family() != FamilyTag::Gmm2 {
            return Err(Error::FamilyMismatch {
                expected: FamilyTag::Gmm2.name(),
                got: v.family().name(),
            });
        }
        v.validate()?;
    }
    let (fit, truth) = (canonical(fit), canonical(truth));
    let f = fit.values();
    let t = truth.values();
    let straight = (f[0] - t[0]).abs() + (f[1] - t[1]).abs();
    let crossed = (f[0] - t[1]).abs() + (f[1] - t[0]).abs();
    let swap = if straight == crossed {
        // pair the heavier fitted component with the heavier true one
        (f[4] >= 0.5) != (t[4] >= 0.5)
    } else {
        crossed < straight
    };
    let (fa, fb) = if swap { (1, 0) } else { (0, 1) };
    let score = |fi: usize, ti: usize| {
        let kl = gaussian_kl(f[fi], f[fi + 2], t[ti], t[ti + 2]);
        if kl > 1.0 / SCORE_CAP {
            1.0 / kl
        } else {
            SCORE_CAP
        }
    };
    let s = [score(fa, 0), score(fb, 1)];
    let (maj, min) = if t[4] >= 0.5 { (s[0], s[1]) } else { (s[1], s[0]) };
    Ok(FairnessReport {
        score_majority: maj,
        score_minority: min,
        ratio: maj / min,
    })
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum PleMethod {
    Solver,
    Hypernet,
}

impl PleMethod {
    pub fn name(self) -> &'static str {
        match self {
            PleMethod::Solver => "solver",
            PleMethod::Hypernet => "hypernet",
        }
    }

    pub fn from_name(name: &str) -> Option<Self> {
        match name {
            "solver" => Some(PleMethod::Solver),
            "hypernet" => Some(PleMethod::Hypernet),
            _ => None,
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct GridSpec {
    /// First-component weights `w₁`.
    pub weights: Vec<f64>,
    pub sizes: Vec<usize>,
    pub seeds: usize,
    pub kl_samples: usize,
    pub means: [f64; 2],
    pub variances: [f64; 2],
    pub method: PleMethod,
    pub em: EmConfig,
    /// Hypernet training; `points` and `seed` are set per cell.
    pub train: TrainConfig,
    /// Solver settings for the [`ClassForm::EmVariance`] class.
    pub solver: PenaltyConfig,
    pub seed: u64,
}

impl Default for GridSpec {
    fn default() -> Self {
        Self {
            weights: alloc::vec![0.5, 0.6, 0.7, 0.8, 0.9, 0.95],
            sizes: alloc::vec![20, 50, 100, 500, 2000],
            seeds: 100,
            kl_samples: 100_000,
            means: [0.0, 2.0],
            variances: [1.0, 1.0],
            method: PleMethod::Hypernet,
            em: EmConfig::default(),
            train: TrainConfig::default(),
            solver: PenaltyConfig {
                k: 16,
                lambda_max: 1e4,
                simplex: crate::optim::NelderMeadConfig {
                    x_tol: 1e-4,
                    max_iter: 200,
                },
                ..PenaltyConfig::default()
            },
            seed: 0,
        }
    }
}

impl GridSpec {
    pub fn validate(&self) -> Result<()> {
        if self.weights.is_empty() || self.weights.iter().any(|w| !(*w > 0.0 && *w < 1.0)) {
            return Err(Error::Config("weights must lie in (0, 1)".into()));
        }
        if self.sizes.iter().any(|&n| n < 4) || self.sizes.is_empty() {
            return Err(Error::Config("sample sizes must be >= 4".into()));
        }
        if self.seeds == 0 || self.kl_samples < 2 {
            return Err(Error::Config("seeds >= 1 and kl_samples >= 2 are required".into()));
        }
        self.truth(self.weights[0])?;
        self.em.validate()
    }

    pub fn truth(&self, w1: f64) -> Result<ParamVector> {
        ParamVector::gmm2(self.means[0], self.means[1], self.variances[0], self.variances[1], w1)
    }

    pub fn cells(&self) -> Vec<(f64, usize)> {
        let mut out = Vec::new();
        for &w in &self.weights {
            for &n in &self.sizes {
                out.push((w, n));
            }
        }
        out
    }
}

/// The PLE estimator for one cell, ready to apply to evaluation datasets.
#[derive(Clone, Debug)]
#[allow(clippy::large_enum_variant)]
pub enum CellModel {
    Solver(EstimatorClass),
    Hypernet(HyperNet),
}

fn cell_stream(kind: u64, w1: f64, n: usize, extra: u64) -> u64 {
    stream_id(&[kind, w1.to_bits(), n as u64, extra])
}

/// Prepares the PLE estimator for a cell; trains the hypernetwork on fresh
/// datasets from the cell's truth.
pub fn prepare_cell(spec: &GridSpec, w1: f64, n: usize) -> Result<CellModel> {
    let truth = spec.truth(w1)?;
    match spec.method {
        PleMethod::Solver => Ok(CellModel::Solver(EstimatorClass::new(
            FamilyTag::Gmm2,
            ClassForm::EmVariance,
            1.0,
        )?)),
        PleMethod::Hypernet => {
            let mut init = SeededRng::new(spec.seed, cell_stream(domain::INIT, w1, n, 0));
            let mut net = HyperNet::init(&mut init);
            let cfg = TrainConfig {
                points: n,
                seed: stream_id(&[spec.seed, w1.to_bits(), n as u64]),
                ..spec.train.clone()
            };
            hypernet::train(&mut net, hypernet::truth_source(&truth, n), &cfg)?;
            Ok(CellModel::Hypernet(net))
        }
    }
}

/// Outcome for one evaluation seed of one cell.
#[derive(Clone, Debug, PartialEq)]
pub struct SeedOutcome {
    pub seed: usize,
    pub kl_mle: f64,
    pub kl_ple: f64,
    pub rfair_mle: f64,
    pub rfair_ple: f64,
}

/// EM and PLE on one dataset, with both KLs on the same sample stream.
pub fn run_seed(spec: &GridSpec, model: &CellModel, w1: f64, n: usize, seed: usize) -> Result<SeedOutcome> {
    let truth = spec.truth(w1)?;
    let s = seed as u64;
    let mut data_rng = SeededRng::new(spec.seed, cell_stream(domain::EVAL, w1, n, s));
    let data = FamilyTag::Gmm2.sample(&truth, n, &mut data_rng)?;
    let mut em_rng = SeededRng::new(spec.seed, cell_stream(domain::EM_INIT, w1, n, s));
    let mle = em_fit(&data, &spec.em, &mut em_rng)?.params;
    let ple = match model {
        CellModel::Hypernet(net) => net.forward(&data),
        CellModel::Solver(class) => {
            let mut rng = SeededRng::new(spec.seed, cell_stream(domain::CONSTRAINT, w1, n, s));
            let (fit, _) = ple_fit(class, &data, &spec.solver, &mut rng)?;
            fit.apply(&data)?
        }
    };
    let kl_rng = SeededRng::new(spec.seed, cell_stream(domain::KL, w1, n, s));
    let (kl_mle, _) = kl_divergence(&mle, &truth, spec.kl_samples, &mut kl_rng.clone())?;
    let (kl_ple, _) = kl_divergence(&ple, &truth, spec.kl_samples, &mut kl_rng.clone())?;
    Ok(SeedOutcome {
        seed,
        kl_mle,
        kl_ple,
        rfair_mle: fairness_report(&mle, &truth)?.ratio,
        rfair_ple: fairness_report(&ple, &truth)?.ratio,
    })
}

#[derive(Clone, Debug, PartialEq)]
pub struct CellResult {
    pub weight: f64,
    pub n: usize,
    pub kl_mle_mean: f64,
    pub kl_ple_mean: f64,
    pub d_mean: f64,
    /// Standard error of the per-seed differences.
    pub d_stderr: f64,
    pub rfair_mle: f64,
    pub rfair_ple: f64,
    /// Seeds whose fit failed; they are left out of every mean.
    pub failures: Vec<(usize, String)>,
    pub outcomes: Vec<SeedOutcome>,
}

impl CellResult {
    /// Aggregates per-seed results given in seed order.
    pub fn aggregate(weight: f64, n: usize, results: Vec<Result<SeedOutcome>>) -> Self {
        let mut outcomes = Vec::new();
        let mut failures = Vec::new();
        for (seed, r) in results.into_iter().enumerate() {
            match r {
                Ok(o) => outcomes.push(o),
                Err(e) => failures.push((seed, alloc::format!("{e}"))),
            }
        }
        let stats = |f: fn(&SeedOutcome) -> f64| -> RunningStats { outcomes.iter().map(f).collect() };
        let d = stats(|o| o.kl_mle - o.kl_ple);
        Self {
            weight,
            n,
            kl_mle_mean: stats(|o| o.kl_mle).mean(),
            kl_ple_mean: stats(|o| o.kl_ple).mean(),
            d_mean: d.mean(),
            d_stderr: d.stderr(),
            rfair_mle: stats(|o| o.rfair_mle).mean(),
            rfair_ple: stats(|o| o.rfair_ple).mean(),
            failures,
            outcomes,
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct GridResult {
    pub method: PleMethod,
    pub cells: Vec<CellResult>,
}

/// Runs one cell sequentially. A training failure fails the whole cell.
pub fn run_cell(spec: &GridSpec, w1: f64, n: usize) -> Result<CellResult> {
    let model = prepare_cell(spec, w1, n)?;
    let results = (0..spec.seeds).map(|s| run_seed(spec, &model, w1, n, s)).collect();
    Ok(CellResult::aggregate(w1, n, results))
}

/// Runs every cell sequentially.
pub fn run_grid(spec: &GridSpec) -> Result<GridResult> {
    spec.validate()?;
    let cells = spec
        .cells()
        .into_iter()
        .map(|(w, n)| run_cell(spec, w, n))
        .collect::<Result<Vec<_>>>()?;
    Ok(GridResult {
        method: spec.method,
        cells,
    })
}
