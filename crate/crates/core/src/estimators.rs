//! Closed-form MLE and PLE estimators, analytic bias formulas and the
//! Monte-Carlo bias harness.
//!
//! All reductions run over the data in ascending order, which makes every
//! estimator exactly invariant to permutations of its input.

use alloc::string::{String, ToString};
use alloc::vec::Vec;

use crate::distributions::{Dataset, FamilyTag, ParamVector};
use crate::error::{Error, Result};
use crate::rng::SeededRng;
use crate::stats::RunningStats;

/// A deterministic map from a dataset to a parameter vector of one family.
pub trait Estimator {
    fn name(&self) -> &str;

    fn family(&self) -> FamilyTag;

    /// The estimate may sit on the boundary of the family domain (for example
    /// a zero variance from constant data); callers that need a valid model
    /// must check [`ParamVector::is_valid`].
    fn estimate(&self, data: &Dataset) -> Result<ParamVector>;
}

impl<E: Estimator + ?Sized> Estimator for &E {
    fn name(&self) -> &str {
        (**self).name()
    }

    fn family(&self) -> FamilyTag {
        (**self).family()
    }

    fn estimate(&self, data: &Dataset) -> Result<ParamVector> {
        (**self).estimate(data)
    }
}

pub(crate) fn sorted_sum(points: &[f64]) -> f64 {
    let mut v = points.to_vec();
    v.sort_by(f64::total_cmp);
    v.iter().sum()
}

pub(crate) fn max_point(points: &[f64]) -> f64 {
    points.iter().copied().fold(f64::NEG_INFINITY, f64::max)
}

fn require_nonnegative(points: &[f64]) -> Result<()> {
    match points.iter().find(|&&x| x < 0.0) {
        Some(&value) => Err(Error::DataDomain { value }),
        None => Ok(()),
    }
}

/// Sample mean and the centered sum of squares, both in sorted order.
pub(crate) fn mean_and_centered_ss(points: &[f64]) -> (f64, f64) {
    let mut v = points.to_vec();
    v.sort_by(f64::total_cmp);
    let n = v.len() as f64;
    let mean = v.iter().sum::<f64>() / n;
    let ss = v.iter().map(|x| (x - mean) * (x - mean)).sum();
    (mean, ss)
}

fn require_two(data: &Dataset) -> Result<()> {
    if data.len() < 2 {
        return Err(Error::InsufficientData {
            needed: 2,
            got: data.len(),
        });
    }
    Ok(())
}

/// `max(X)`, the uniform MLE.
pub fn mle_uniform(data: &Dataset) -> Result<ParamVector> {
    require_nonnegative(data)?;
    Ok(ParamVector::new_unchecked(
        FamilyTag::OneSidedUniform,
        alloc::vec![max_point(data)],
    ))
}

/// Twice the sample mean.
pub fn ple_uniform_linear(data: &Dataset) -> Result<ParamVector> {
    let a = 2.0 * sorted_sum(data) / data.len() as f64;
    Ok(ParamVector::new_unchecked(FamilyTag::OneSidedUniform, alloc::vec![a]))
}

/// `(n + 1)/n · max(X)`.
pub fn ple_uniform_max(data: &Dataset) -> Result<ParamVector> {
    require_nonnegative(data)?;
    let n = data.len() as f64;
    Ok(ParamVector::new_unchecked(
        FamilyTag::OneSidedUniform,
        alloc::vec![(n + 1.0) / n * max_point(data)],
    ))
}

/// Sample mean and the 1/n variance.
pub fn mle_gaussian(data: &Dataset) -> Result<ParamVector> {
    require_two(data)?;
    let (mean, ss) = mean_and_centered_ss(data);
    Ok(ParamVector::new_unchecked(
        FamilyTag::Gaussian,
        alloc::vec![mean, ss / data.len() as f64],
    ))
}

/// `n / (n - 1)`, the factor taking the 1/n variance to the 1/(n - 1) one.
pub fn bessel_factor(n: usize) -> f64 {
    n as f64 / (n - 1) as f64
}

/// Sample mean and the Bessel-corrected variance. The variance is computed as
/// the MLE variance times [`bessel_factor`], so the two agree exactly.
pub fn ple_gaussian(data: &Dataset) -> Result<ParamVector> {
    let mle = mle_gaussian(data)?;
    let v = mle.values();
    Ok(ParamVector::new_unchecked(
        FamilyTag::Gaussian,
        alloc::vec![v[0], v[1] * bessel_factor(data.len())],
    ))
}

/// Sample mean of exponential data; MLE and PLE coincide.
pub fn mean_exponential(data: &Dataset) -> Result<ParamVector> {
    require_nonnegative(data)?;
    Ok(ParamVector::new_unchecked(
        FamilyTag::Exponential,
        alloc::vec![sorted_sum(data) / data.len() as f64],
    ))
}

/// Success frequency of 0/1 data; MLE and PLE coincide.
pub fn mean_bernoulli(data: &Dataset) -> Result<ParamVector> {
    if let Some(&value) = data.iter().find(|&&x| x != 0.0 && x != 1.0) {
        return Err(Error::DataDomain { value });
    }
    Ok(ParamVector::new_unchecked(
        FamilyTag::Bernoulli,
        alloc::vec![sorted_sum(data) / data.len() as f64],
    ))
}

/// The closed-form estimators.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum Builtin {
    MleUniform,
    PleUniformLinear,
    PleUniformMax,
    MleGaussian,
    PleGaussian,
    MeanExponential,
    MeanBernoulli,
}

impl Builtin {
    pub const ALL: [Builtin; 7] = [
        Builtin::MleUniform,
        Builtin::PleUniformLinear,
        Builtin::PleUniformMax,
        Builtin::MleGaussian,
        Builtin::PleGaussian,
        Builtin::MeanExponential,
        Builtin::MeanBernoulli,
    ];

    pub fn full_name(self) -> &'static str {
        match self {
            Builtin::MleUniform => "mle_uniform",
            Builtin::PleUniformLinear => "ple_uniform_linear",
            Builtin::PleUniformMax => "ple_uniform_max",
            Builtin::MleGaussian => "mle_gaussian",
            Builtin::PleGaussian => "ple_gaussian",
            Builtin::MeanExponential => "mean_exponential",
            Builtin::MeanBernoulli => "mean_bernoulli",
        }
    }

    /// Short name as used on the command line (`mle`, `ple-linear`, ...).
    pub fn short_name(self) -> &'static str {
        match self {
            Builtin::MleUniform | Builtin::MleGaussian => "mle",
            Builtin::PleUniformLinear => "ple-linear",
            Builtin::PleUniformMax => "ple-max",
            Builtin::PleGaussian => "ple",
            Builtin::MeanExponential | Builtin::MeanBernoulli => "mean",
        }
    }

    pub fn family_of(self) -> FamilyTag {
        match self {
            Builtin::MleUniform | Builtin::PleUniformLinear | Builtin::PleUniformMax => {
                FamilyTag::OneSidedUniform
            }
            Builtin::MleGaussian | Builtin::PleGaussian => FamilyTag::Gaussian,
            Builtin::MeanExponential => FamilyTag::Exponential,
            Builtin::MeanBernoulli => FamilyTag::Bernoulli,
        }
    }

    /// Estimators registered for `family`.
    pub fn for_family(family: FamilyTag) -> impl Iterator<Item = Builtin> {
        Self::ALL.into_iter().filter(move |b| b.family_of() == family)
    }

    /// Resolves a short or full name within a family. `ple` maps to the
    /// family's default PLE (the max form for the uniform).
    pub fn resolve(family: FamilyTag, name: &str) -> Result<Builtin> {
        let found = Self::for_family(family).find(|b| b.short_name() == name || b.full_name() == name);
        let found = found.or(match (family, name) {
            (FamilyTag::OneSidedUniform, "ple") => Some(Builtin::PleUniformMax),
            (FamilyTag::Exponential | FamilyTag::Bernoulli, "mle" | "ple") => {
                Self::for_family(family).next()
            }
            _ => None,
        });
        found.ok_or_else(|| Error::UnknownEstimator(name.to_string()))
    }

    pub fn apply(self, data: &Dataset) -> Result<ParamVector> {
        match self {
            Builtin::MleUniform => mle_uniform(data),
            Builtin::PleUniformLinear => ple_uniform_linear(data),
            Builtin::PleUniformMax => ple_uniform_max(data),
            Builtin::MleGaussian => mle_gaussian(data),
            Builtin::PleGaussian => ple_gaussian(data),
            Builtin::MeanExponential => mean_exponential(data),
            Builtin::MeanBernoulli => mean_bernoulli(data),
        }
    }

    /// Smallest dataset the estimator accepts.
    pub fn min_n(self) -> usize {
        match self {
            Builtin::MleGaussian | Builtin::PleGaussian => 2,
            _ => 1,
        }
    }

    /// Exact bias `E[θ̂] − θ` per parameter at sample size `n`.
    pub fn analytic_bias(self, truth: &ParamVector, n: usize) -> Vec<f64> {
        let v = truth.values();
        let n = n as f64;
        match self {
            Builtin::MleUniform => alloc::vec![-v[0] / (n + 1.0)],
            Builtin::MleGaussian => alloc::vec![0.0, -v[1] / n],
            Builtin::PleGaussian => alloc::vec![0.0, 0.0],
            Builtin::PleUniformLinear
            | Builtin::PleUniformMax
            | Builtin::MeanExponential
            | Builtin::MeanBernoulli => alloc::vec![0.0],
        }
    }
}

impl Estimator for Builtin {
    fn name(&self) -> &str {
        self.full_name()
    }

    fn family(&self) -> FamilyTag {
        self.family_of()
    }

    fn estimate(&self, data: &Dataset) -> Result<ParamVector> {
        self.apply(data)
    }
}

/// Analytic bias by estimator name; `None` when no closed form is known or the
/// family does not match.
pub fn analytic_bias(estimator: &str, truth: &ParamVector, n: usize) -> Option<Vec<f64>> {
    let b = Builtin::ALL.into_iter().find(|b| b.full_name() == estimator)?;
    (b.family_of() == truth.family()).then(|| b.analytic_bias(truth, n))
}

/// Outcome of a Monte-Carlo bias run.
#[derive(Clone, Debug, PartialEq)]
pub struct BiasReport {
    pub estimator: String,
    pub truth: ParamVector,
    pub n: usize,
    pub trials: usize,
    pub analytic_bias: Option<Vec<f64>>,
    pub mc_mean: Vec<f64>,
    pub mc_bias: Vec<f64>,
    pub mc_stderr: Vec<f64>,
}

impl BiasReport {
    /// Builds a report from per-trial estimates given in trial order.
    pub fn from_estimates(
        estimator: &str,
        truth: &ParamVector,
        n: usize,
        estimates: &[ParamVector],
    ) -> Self {
        let p = truth.values().len();
        let mut acc = alloc::vec![RunningStats::new(); p];
        for e in estimates {
            for (a, v) in acc.iter_mut().zip(e.values()) {
                a.push(*v);
            }
        }
        let mc_mean: Vec<f64> = acc.iter().map(RunningStats::mean).collect();
        Self {
            estimator: estimator.to_string(),
            truth: truth.clone(),
            n,
            trials: estimates.len(),
            analytic_bias: analytic_bias(estimator, truth, n),
            mc_bias: mc_mean.iter().zip(truth.values()).map(|(m, t)| m - t).collect(),
            mc_stderr: acc.iter().map(RunningStats::stderr).collect(),
            mc_mean,
        }
    }

    /// Whether the Monte-Carlo bias matches the analytic one within `k`
    /// standard errors for every parameter; `None` without an analytic form.
    pub fn agrees_within(&self, k: f64) -> Option<bool> {
        let analytic = self.analytic_bias.as_ref()?;
        Some(
            analytic
                .iter()
                .zip(&self.mc_bias)
                .zip(&self.mc_stderr)
                .all(|((a, m), s)| (m - a).abs() < k * s),
        )
    }
}

/// One Monte-Carlo trial: draws data on the trial's generation-0 stream and
/// applies the estimator. [`crate::autophagy::run_loop`] uses the same stream
/// for its first estimate.
pub fn bias_trial(
    estimator: &dyn Estimator,
    truth: &ParamVector,
    n: usize,
    seed: u64,
    trial: usize,
) -> Result<ParamVector> {
    let mut rng = SeededRng::for_trial(seed, trial as u64, 0);
    let data = truth.family().sample(truth, n, &mut rng)?;
    estimator.estimate(&data)
}

/// Runs `trials` independent trials and compares the mean estimate with the truth.
pub fn monte_carlo_bias(
    estimator: &dyn Estimator,
    truth: &ParamVector,
    n: usize,
    trials: usize,
    seed: u64,
) -> Result<BiasReport> {
    if trials < 2 {
        return Err(Error::Config("monte_carlo_bias needs at least 2 trials".into()));
    }
    if estimator.family() != truth.family() {
        return Err(Error::FamilyMismatch {
            expected: estimator.family().name(),
            got: truth.family().name(),
        });
    }
    let estimates = (0..trials)
        .map(|t| bias_trial(estimator, truth, n, seed, t))
        .collect::<Result<Vec<_>>>()?;
    Ok(BiasReport::from_estimates(estimator.name(), truth, n, &estimates))
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::vec;

    fn ds(v: &[f64]) -> Dataset {
        Dataset::new(v.to_vec()).unwrap()
    }

    #[test]
    fn closed_form_examples() {
        assert_eq!(mle_uniform(&ds(&[0.2, 0.9, 0.5])).unwrap().values(), &[0.9]);
        assert_eq!(mle_uniform(&ds(&[0.7])).unwrap().values(), &[0.7]);
        assert_eq!(ple_uniform_linear(&ds(&[0.5])).unwrap().values(), &[1.0]);
        let a = ple_uniform_linear(&ds(&[0.2, 0.9, 0.5])).unwrap().values()[0];
        assert!((a - 2.0 * 1.6 / 3.0).abs() < 1e-15);
        assert!((ple_uniform_max(&ds(&[0.6])).unwrap().values()[0] - 1.2).abs() < 1e-15);
        let a = ple_uniform_max(&ds(&[0.2, 0.9, 0.5])).unwrap().values()[0];
        assert!((a - 1.2).abs() < 1e-15);
    }

    #[test]
    fn gaussian_examples() {
        assert_eq!(mle_gaussian(&ds(&[1.0; 4])).unwrap().values(), &[1.0, 0.0]);
        assert_eq!(mle_gaussian(&ds(&[0.0, 2.0])).unwrap().values(), &[1.0, 1.0]);
        assert_eq!(ple_gaussian(&ds(&[0.0, 2.0])).unwrap().values(), &[1.0, 2.0]);
        assert_eq!(ple_gaussian(&ds(&[3.25; 3])).unwrap().values(), &[3.25, 0.0]);
    }

    #[test]
    fn error_paths() {
        assert!(matches!(mle_uniform(&ds(&[0.1, -0.2])), Err(Error::DataDomain { .. })));
        assert!(matches!(ple_uniform_max(&ds(&[-1.0])), Err(Error::DataDomain { .. })));
        assert!(matches!(
            mle_gaussian(&ds(&[1.0])),
            Err(Error::InsufficientData { needed: 2, got: 1 })
        ));
        assert!(matches!(ple_gaussian(&ds(&[1.0])), Err(Error::InsufficientData { .. })));
        assert!(matches!(mean_bernoulli(&ds(&[0.5])), Err(Error::DataDomain { .. })));
    }

    #[test]
    fn analytic_bias_examples() {
        let u = ParamVector::uniform(1.0).unwrap();
        let b = analytic_bias("mle_uniform", &u, 20).unwrap();
        assert!((b[0] + 1.0 / 21.0).abs() < 1e-15);
        for n in [1, 7, 100] {
            assert_eq!(analytic_bias("ple_uniform_linear", &u, n).unwrap(), vec![0.0]);
        }
        let g = ParamVector::gaussian(0.0, 1.0).unwrap();
        let b = analytic_bias("mle_gaussian", &g, 10).unwrap();
        assert!((b[1] + 0.1).abs() < 1e-15);
        assert_eq!(analytic_bias("em", &g, 10), None);
        assert_eq!(analytic_bias("mle_uniform", &g, 10), None);
    }

    #[test]
    fn resolve_names() {
        assert_eq!(
            Builtin::resolve(FamilyTag::OneSidedUniform, "mle").unwrap(),
            Builtin::MleUniform
        );
        assert_eq!(
            Builtin::resolve(FamilyTag::OneSidedUniform, "ple-max").unwrap(),
            Builtin::PleUniformMax
        );
        assert_eq!(
            Builtin::resolve(FamilyTag::Gaussian, "ple").unwrap(),
            Builtin::PleGaussian
        );
        assert!(Builtin::resolve(FamilyTag::Gaussian, "ple-max").is_err());
    }

    #[test]
    fn small_mc_bias_run_agrees() {
        let u = ParamVector::uniform(1.0).unwrap();
        let r = monte_carlo_bias(&Builtin::MleUniform, &u, 20, 4000, 1).unwrap();
        assert_eq!(r.agrees_within(4.0), Some(true));
        assert!(r.mc_stderr[0] > 0.0);
        assert!(monte_carlo_bias(&Builtin::MleUniform, &u, 20, 1, 1).is_err());
    }
}
