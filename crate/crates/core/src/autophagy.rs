//! The self-consuming loop `θ → X₀ → θ̂₁ → X₁ → θ̂₂ → …`.
//!
//! Row `g` of a [`GenerationTrace`] holds `θ̂_g`. Row 0 is the ground truth.
//! Row 1 is the fit to data drawn under the truth, and every later row is the
//! fit to data drawn under the previous row. A loop of `G` generations
//! therefore has `G + 1` rows and, for the uniform MLE, `E[row g] = (n/(n+1))^g a`.
//!
//! The data behind row `g + 1` of trial `t` is drawn on
//! [`SeededRng::for_trial`]`(seed, t, g)`, so row 1 reproduces
//! [`crate::estimators::bias_trial`] exactly.

use alloc::string::{String, ToString};
use alloc::vec::Vec;

use crate::distributions::{FamilyTag, ParamVector};
use crate::error::{Error, Result};
use crate::estimators::{Builtin, Estimator};
use crate::math::ln;
use crate::rng::SeededRng;
use crate::stats::{lsq_slope, RunningStats};

#[derive(Clone, Debug, PartialEq)]
pub struct LoopConfig {
    pub truth: ParamVector,
    /// Points drawn per generation.
    pub n: usize,
    pub generations: usize,
    pub trials: usize,
    /// Short or full estimator name, resolved with [`Builtin::resolve`].
    pub estimator: String,
}

impl LoopConfig {
    pub fn family(&self) -> FamilyTag {
        self.truth.family()
    }

    pub fn validate(&self) -> Result<()> {
        if self.generations == 0 || self.trials == 0 || self.n == 0 {
            return Err(Error::Config("generations, trials and n must be >= 1".into()));
        }
        self.truth.validate()
    }

    pub fn resolve_estimator(&self) -> Result<Builtin> {
        let b = Builtin::resolve(self.family(), &self.estimator)?;
        if self.n < b.min_n() {
            return Err(Error::InsufficientData {
                needed: b.min_n(),
                got: self.n,
            });
        }
        Ok(b)
    }
}

/// One trial's chain of estimates.
#[derive(Clone, Debug, PartialEq)]
pub struct TrialChain {
    /// `G + 1` rows of parameter vectors, flattened.
    pub values: Vec<f64>,
    /// First row whose estimate left the family domain; that row is repeated
    /// for the rest of the chain.
    pub degenerate_from: Option<usize>,
}

/// Runs one trial of the loop.
pub fn run_trial(
    cfg: &LoopConfig,
    estimator: &dyn Estimator,
    seed: u64,
    trial: usize,
) -> Result<TrialChain> {
    if estimator.family() != cfg.family() {
        return Err(Error::Config(alloc::format!(
            "estimator {} is for {}, loop is over {}",
            estimator.name(),
            estimator.family().name(),
            cfg.family().name()
        )));
    }
    let p = cfg.family().param_count();
    let mut values = Vec::with_capacity((cfg.generations + 1) * p);
    values.extend_from_slice(cfg.truth.values());
    let mut current = cfg.truth.clone();
    let mut degenerate_from = None;
    for g in 1..=cfg.generations {
        if degenerate_from.is_none() {
            let mut rng = SeededRng::for_trial(seed, trial as u64, g as u64 - 1);
            let data = cfg.family().sample(&current, cfg.n, &mut rng)?;
            current = estimator.estimate(&data)?;
            if !current.is_valid() {
                degenerate_from = Some(g);
            }
        }
        values.extend_from_slice(current.values());
    }
    Ok(TrialChain {
        values,
        degenerate_from,
    })
}

/// Per-generation cross-trial summary of one (possibly transformed) parameter.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct GenerationSummary {
    pub generation: usize,
    pub mean: f64,
    pub stderr: f64,
}

#[derive(Clone, Debug, PartialEq)]
pub struct GenerationTrace {
    pub family: FamilyTag,
    pub estimator: String,
    pub n: usize,
    pub generations: usize,
    chains: Vec<TrialChain>,
}

impl GenerationTrace {
    /// Assembles a trace from chains given in trial order.
    pub fn from_chains(cfg: &LoopConfig, estimator: &str, chains: Vec<TrialChain>) -> Self {
        Self {
            family: cfg.family(),
            estimator: estimator.to_string(),
            n: cfg.n,
            generations: cfg.generations,
            chains,
        }
    }

    pub fn trials(&self) -> usize {
        self.chains.len()
    }

    /// Number of rows, `generations + 1`.
    pub fn rows(&self) -> usize {
        self.generations + 1
    }

    pub fn chains(&self) -> &[TrialChain] {
        &self.chains
    }

    pub fn estimate(&self, trial: usize, generation: usize, param: usize) -> f64 {
        let p = self.family.param_count();
        self.chains[trial].values[generation * p + param]
    }

    pub fn degenerate_trials(&self) -> usize {
        self.chains
            .iter()
            .filter(|c| c.degenerate_from.is_some())
            .count()
    }

    pub fn summary(&self, param: usize) -> Vec<GenerationSummary> {
        self.summary_with(param, |v| v)
    }

    /// Summary of `f(parameter)`, e.g. `sqrt` to report a standard deviation.
    pub fn summary_with(&self, param: usize, f: impl Fn(f64) -> f64) -> Vec<GenerationSummary> {
        (0..self.rows())
            .map(|g| {
                let s: RunningStats = (0..self.trials())
                    .map(|t| f(self.estimate(t, g, param)))
                    .collect();
                GenerationSummary {
                    generation: g,
                    mean: s.mean(),
                    stderr: s.stderr(),
                }
            })
            .collect()
    }

    pub fn collapse_rate(&self, param: usize) -> Result<f64> {
        let means: Vec<f64> = self.summary(param).iter().map(|s| s.mean).collect();
        collapse_rate(&means)
    }
}

/// Runs every trial sequentially.
pub fn run_loop(cfg: &LoopConfig, seed: u64) -> Result<GenerationTrace> {
    cfg.validate()?;
    let est = cfg.resolve_estimator()?;
    let chains = (0..cfg.trials)
        .map(|t| run_trial(cfg, &est, seed, t))
        .collect::<Result<Vec<_>>>()?;
    Ok(GenerationTrace::from_chains(cfg, est.full_name(), chains))
}

/// Least-squares slope of `ln(mean)` against the row index.
pub fn collapse_rate(means: &[f64]) -> Result<f64> {
    if means.len() < 3 {
        return Err(Error::UndefinedRate(
            "at least two generations are needed".into(),
        ));
    }
    if let Some(m) = means.iter().find(|m| !(**m > 0.0)) {
        return Err(Error::UndefinedRate(alloc::format!(
            "generation mean {m} is not positive"
        )));
    }
    let xs: Vec<f64> = (0..means.len()).map(|g| g as f64).collect();
    let ys: Vec<f64> = means.iter().map(|&m| ln(m)).collect();
    Ok(lsq_slope(&xs, &ys))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::estimators::bias_trial;
    use crate::math::powi;
    use std::vec;

    fn uniform_cfg(est: &str, trials: usize) -> LoopConfig {
        LoopConfig {
            truth: ParamVector::uniform(1.0).unwrap(),
            n: 20,
            generations: 10,
            trials,
            estimator: est.into(),
        }
    }

    #[test]
    fn mle_chain_collapses_geometrically() {
        let t = run_loop(&uniform_cfg("mle", 400), 1).unwrap();
        assert_eq!(t.rows(), 11);
        for s in t.summary(0) {
            let target = powi(20.0 / 21.0, s.generation as i32);
            assert!((s.mean - target).abs() <= 4.0 * s.stderr, "{s:?} vs {target}");
        }
        let rate = t.collapse_rate(0).unwrap();
        assert!((rate - ln(20.0 / 21.0)).abs() < 0.01, "{rate}");
    }

    #[test]
    fn ple_chain_is_flat() {
        for est in ["ple-max", "ple-linear"] {
            let t = run_loop(&uniform_cfg(est, 400), 2).unwrap();
            for s in t.summary(0) {
                assert!((s.mean - 1.0).abs() <= 4.0 * s.stderr, "{est} {s:?}");
            }
            assert!(t.collapse_rate(0).unwrap().abs() < 0.005);
        }
    }

    #[test]
    fn mle_chain_never_increases() {
        let t = run_loop(&uniform_cfg("mle", 50), 3).unwrap();
        for trial in 0..t.trials() {
            for g in 1..t.rows() {
                assert!(t.estimate(trial, g, 0) <= t.estimate(trial, g - 1, 0));
            }
        }
    }

    #[test]
    fn first_fit_matches_bias_trial() {
        let cfg = uniform_cfg("mle", 20);
        let t = run_loop(&cfg, 9).unwrap();
        for trial in 0..20 {
            let b = bias_trial(&Builtin::MleUniform, &cfg.truth, 20, 9, trial).unwrap();
            assert_eq!(t.estimate(trial, 1, 0), b.values()[0]);
        }
    }

    struct Collapsing;

    impl Estimator for Collapsing {
        fn name(&self) -> &str {
            "collapsing"
        }

        fn family(&self) -> FamilyTag {
            FamilyTag::OneSidedUniform
        }

        fn estimate(&self, data: &crate::Dataset) -> Result<ParamVector> {
            let m = data.iter().copied().fold(0.0, f64::max);
            let a = if m < 0.5 { 0.0 } else { m };
            Ok(ParamVector::new_unchecked(FamilyTag::OneSidedUniform, vec![a]))
        }
    }

    #[test]
    fn degenerate_chain_is_clamped() {
        let cfg = LoopConfig { n: 2, ..uniform_cfg("mle", 30) };
        let chains: Vec<_> = (0..30).map(|t| run_trial(&cfg, &Collapsing, 0, t).unwrap()).collect();
        let t = GenerationTrace::from_chains(&cfg, "collapsing", chains);
        assert!(t.degenerate_trials() > 0);
        for trial in 0..30 {
            if let Some(g0) = t.chains()[trial].degenerate_from {
                for g in g0..t.rows() {
                    assert_eq!(t.estimate(trial, g, 0), 0.0);
                }
            }
        }
        // clamped trials stay in the mean
        assert_eq!(t.summary(0)[10].mean * 30.0, (0..30).map(|i| t.estimate(i, 10, 0)).sum::<f64>());
    }

    #[test]
    fn mismatch_and_bad_config() {
        let cfg = uniform_cfg("mle", 3);
        assert!(matches!(
            run_trial(&cfg, &Builtin::PleGaussian, 0, 0),
            Err(Error::Config(_))
        ));
        assert!(run_loop(&LoopConfig { generations: 0, ..cfg.clone() }, 0).is_err());
        assert!(run_loop(&LoopConfig { estimator: "nope".into(), ..cfg }, 0).is_err());
    }

    #[test]
    fn rate_examples() {
        assert_eq!(collapse_rate(&[1.0; 5]).unwrap(), 0.0);
        assert!(matches!(collapse_rate(&[1.0, 0.0, 1.0]), Err(Error::UndefinedRate(_))));
        assert!(matches!(collapse_rate(&[1.0, 1.0]), Err(Error::UndefinedRate(_))));
        let geo: Vec<f64> = (0..8).map(|g| powi(0.5, g)).collect();
        assert!((collapse_rate(&geo).unwrap() - ln(0.5)).abs() < 1e-12);
    }

    #[test]
    fn deterministic() {
        let a = run_loop(&uniform_cfg("mle", 10), 4).unwrap();
        let b = run_loop(&uniform_cfg("mle", 10), 4).unwrap();
        assert_eq!(a, b);
    }
}
