//! Univariate parametric families: sampling, densities and likelihoods.
//!
//! Every sampler works by inversion: it draws a bank of open uniforms and
//! pushes them through the family's quantile transform. The same transform is
//! exposed as [`FamilyTag::transform_uniforms`] so callers can hold a fixed
//! uniform bank and re-map it under different parameters (common random
//! numbers).

use alloc::format;
use alloc::vec::Vec;
use core::ops::Deref;

use crate::error::{Error, Result};
use crate::math::{ln, ln1p, log_add_exp, normal_quantile, sqrt, std_normal_ln_pdf};
use crate::rng::SeededRng;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum FamilyTag {
    /// U[0, a]; parameters `[a]`.
    OneSidedUniform,
    /// N(mean, variance); parameters `[mean, variance]`.
    Gaussian,
    /// Exponential parameterized by its mean; parameters `[mean]`.
    Exponential,
    /// Bernoulli on {0, 1}; parameters `[p]`.
    Bernoulli,
    /// Two-component Gaussian mixture; parameters `[mu1, mu2, var1, var2, w1]`, `w2 = 1 - w1`.
    Gmm2,
}

/// Inclusive/exclusive bounds on one parameter.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Bound {
    pub lower: f64,
    pub upper: f64,
    pub lower_open: bool,
    pub upper_open: bool,
}

impl Bound {
    const FREE: Bound = Bound {
        lower: f64::NEG_INFINITY,
        upper: f64::INFINITY,
        lower_open: true,
        upper_open: true,
    };
    const POSITIVE: Bound = Bound {
        lower: 0.0,
        upper: f64::INFINITY,
        lower_open: true,
        upper_open: true,
    };
    const UNIT: Bound = Bound {
        lower: 0.0,
        upper: 1.0,
        lower_open: false,
        upper_open: false,
    };

    pub fn contains(&self, v: f64) -> bool {
        if !v.is_finite() {
            return false;
        }
        let above = if self.lower_open {
            v > self.lower
        } else {
            v >= self.lower
        };
        let below = if self.upper_open {
            v < self.upper
        } else {
            v <= self.upper
        };
        above && below
    }
}

/// Registry entry for one family.
#[derive(Debug)]
pub struct FamilySpec {
    pub tag: FamilyTag,
    pub name: &'static str,
    pub param_names: &'static [&'static str],
    pub bounds: &'static [Bound],
}

static SPECS: [FamilySpec; 5] = [
    FamilySpec {
        tag: FamilyTag::OneSidedUniform,
        name: "one_sided_uniform",
        param_names: &["a"],
        bounds: &[Bound::POSITIVE],
    },
    FamilySpec {
        tag: FamilyTag::Gaussian,
        name: "gaussian",
        param_names: &["mean", "variance"],
        bounds: &[Bound::FREE, Bound::POSITIVE],
    },
    FamilySpec {
        tag: FamilyTag::Exponential,
        name: "exponential",
        param_names: &["mean"],
        bounds: &[Bound::POSITIVE],
    },
    FamilySpec {
        tag: FamilyTag::Bernoulli,
        name: "bernoulli",
        param_names: &["p"],
        bounds: &[Bound::UNIT],
    },
    FamilySpec {
        tag: FamilyTag::Gmm2,
        name: "gmm2",
        param_names: &["mu1", "mu2", "var1", "var2", "w1"],
        bounds: &[
            Bound::FREE,
            Bound::FREE,
            Bound::POSITIVE,
            Bound::POSITIVE,
            Bound::UNIT,
        ],
    },
];

impl FamilyTag {
    pub const ALL: [FamilyTag; 5] = [
        FamilyTag::OneSidedUniform,
        FamilyTag::Gaussian,
        FamilyTag::Exponential,
        FamilyTag::Bernoulli,
        FamilyTag::Gmm2,
    ];

    pub fn spec(self) -> &'static FamilySpec {
        &SPECS[self as usize]
    }

    pub fn name(self) -> &'static str {
        self.spec().name
    }

    /// Parses a family name; `uniform` and `gmm` are accepted as short forms.
    pub fn from_name(name: &str) -> Option<Self> {
        match name {
            "uniform" | "one_sided_uniform" | "one-sided-uniform" => Some(Self::OneSidedUniform),
            "gaussian" | "normal" => Some(Self::Gaussian),
            "exponential" => Some(Self::Exponential),
            "bernoulli" => Some(Self::Bernoulli),
            "gmm2" | "gmm" => Some(Self::Gmm2),
            _ => None,
        }
    }

    pub fn param_count(self) -> usize {
        self.spec().bounds.len()
    }

    /// Uniform draws consumed per sampled point.
    pub fn draws_per_point(self) -> usize {
        match self {
            FamilyTag::Gmm2 => 2,
            _ => 1,
        }
    }

    fn check_family(self, params: &ParamVector) -> Result<()> {
        if params.family != self {
            return Err(Error::FamilyMismatch {
                expected: self.name(),
                got: params.family.name(),
            });
        }
        params.validate()
    }

    /// Draws `n` i.i.d. points.
    pub fn sample(self, params: &ParamVector, n: usize, rng: &mut SeededRng) -> Result<Dataset> {
        self.check_family(params)?;
        if n == 0 {
            return Err(Error::InsufficientData { needed: 1, got: 0 });
        }
        let mut bank = alloc::vec![0.0; n * self.draws_per_point()];
        rng.fill_open_uniform(&mut bank);
        Ok(Dataset(self.transform_uniforms(params, &bank)?))
    }

    /// Maps a bank of open uniforms to data under `params`, one point per
    /// [`draws_per_point`](Self::draws_per_point) uniforms.
    pub fn transform_uniforms(self, params: &ParamVector, bank: &[f64]) -> Result<Vec<f64>> {
        self.check_family(params)?;
        let mut out = Vec::with_capacity(bank.len() / self.draws_per_point());
        self.transform_into(&params.values, bank, &mut out);
        Ok(out)
    }

    /// Unchecked transform used in hot loops; `values` must be in the domain.
    pub(crate) fn transform_into(self, values: &[f64], bank: &[f64], out: &mut Vec<f64>) {
        out.clear();
        match self {
            FamilyTag::OneSidedUniform => out.extend(bank.iter().map(|u| u * values[0])),
            FamilyTag::Gaussian => {
                let sd = sqrt(values[1]);
                out.extend(bank.iter().map(|&u| values[0] + sd * normal_quantile(u)));
            }
            FamilyTag::Exponential => out.extend(bank.iter().map(|&u| -values[0] * ln1p(-u))),
            FamilyTag::Bernoulli => {
                out.extend(bank.iter().map(|&u| if u < values[0] { 1.0 } else { 0.0 }))
            }
            FamilyTag::Gmm2 => {
                let sd = [sqrt(values[2]), sqrt(values[3])];
                out.extend(bank.chunks_exact(2).map(|pair| {
                    let c = usize::from(pair[0] >= values[4]);
                    values[c] + sd[c] * normal_quantile(pair[1])
                }));
            }
        }
    }

    pub fn pdf(self, params: &ParamVector, x: f64) -> Result<f64> {
        self.check_family(params)?;
        Ok(crate::math::exp(log_density(self, &params.values, x)))
    }

    /// Log-density (log-mass for Bernoulli); `-inf` outside the support.
    pub fn log_pdf(self, params: &ParamVector, x: f64) -> Result<f64> {
        self.check_family(params)?;
        Ok(log_density(self, &params.values, x))
    }

    /// Sum of pointwise log-densities. A uniform with `a < max(data)` gives `-inf`.
    pub fn log_likelihood(self, params: &ParamVector, data: &Dataset) -> Result<f64> {
        self.check_family(params)?;
        Ok(log_likelihood_unchecked(self, &params.values, data))
    }
}

pub(crate) fn log_likelihood_unchecked(family: FamilyTag, values: &[f64], data: &[f64]) -> f64 {
    match family {
        FamilyTag::OneSidedUniform => {
            let a = values[0];
            if data.iter().any(|&x| x < 0.0 || x > a) {
                f64::NEG_INFINITY
            } else {
                -(data.len() as f64) * ln(a)
            }
        }
        FamilyTag::Gaussian => {
            let (mean, var) = (values[0], values[1]);
            let ss: f64 = data.iter().map(|x| (x - mean) * (x - mean)).sum();
            -0.5 * data.len() as f64 * (crate::math::LN_2PI + ln(var)) - 0.5 * ss / var
        }
        _ => data.iter().map(|&x| log_density(family, values, x)).sum(),
    }
}

pub(crate) fn gaussian_ln_pdf(x: f64, mean: f64, var: f64) -> f64 {
    let sd = sqrt(var);
    std_normal_ln_pdf((x - mean) / sd) - ln(sd)
}

pub(crate) fn log_density(family: FamilyTag, v: &[f64], x: f64) -> f64 {
    match family {
        FamilyTag::OneSidedUniform => {
            if (0.0..=v[0]).contains(&x) {
                -ln(v[0])
            } else {
                f64::NEG_INFINITY
            }
        }
        FamilyTag::Gaussian => gaussian_ln_pdf(x, v[0], v[1]),
        FamilyTag::Exponential => {
            if x >= 0.0 {
                -x / v[0] - ln(v[0])
            } else {
                f64::NEG_INFINITY
            }
        }
        FamilyTag::Bernoulli => {
            if x == 1.0 {
                ln(v[0])
            } else if x == 0.0 {
                ln1p(-v[0])
            } else {
                f64::NEG_INFINITY
            }
        }
        FamilyTag::Gmm2 => log_add_exp(
            ln(v[4]) + gaussian_ln_pdf(x, v[0], v[2]),
            ln1p(-v[4]) + gaussian_ln_pdf(x, v[1], v[3]),
        ),
    }
}

/// A parameter vector tagged with its family.
///
/// Construction through [`ParamVector::new`] enforces the family domain.
/// Estimators may legitimately produce boundary values (a zero variance from
/// constant data, `a = 0` after an autophagy collapse); those are built with
/// [`ParamVector::new_unchecked`] and rejected later by anything that samples
/// or evaluates densities.
#[derive(Clone, Debug, PartialEq)]
pub struct ParamVector {
    family: FamilyTag,
    values: Vec<f64>,
}

impl ParamVector {
    pub fn new(family: FamilyTag, values: Vec<f64>) -> Result<Self> {
        let p = Self::new_unchecked(family, values);
        if p.values.len() != family.param_count() {
            return Err(Error::ParamCount {
                family: family.name(),
                expected: family.param_count(),
                got: p.values.len(),
            });
        }
        p.validate()?;
        Ok(p)
    }

    /// Skips the domain check; the length must still match the family.
    pub fn new_unchecked(family: FamilyTag, values: Vec<f64>) -> Self {
        debug_assert_eq!(values.len(), family.param_count());
        Self { family, values }
    }

    pub fn uniform(a: f64) -> Result<Self> {
        Self::new(FamilyTag::OneSidedUniform, alloc::vec![a])
    }

    pub fn gaussian(mean: f64, variance: f64) -> Result<Self> {
        Self::new(FamilyTag::Gaussian, alloc::vec![mean, variance])
    }

    pub fn exponential(mean: f64) -> Result<Self> {
        Self::new(FamilyTag::Exponential, alloc::vec![mean])
    }

    pub fn bernoulli(p: f64) -> Result<Self> {
        Self::new(FamilyTag::Bernoulli, alloc::vec![p])
    }

    pub fn gmm2(mu1: f64, mu2: f64, var1: f64, var2: f64, w1: f64) -> Result<Self> {
        Self::new(FamilyTag::Gmm2, alloc::vec![mu1, mu2, var1, var2, w1])
    }

    pub fn family(&self) -> FamilyTag {
        self.family
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn into_values(self) -> Vec<f64> {
        self.values
    }

    pub fn is_valid(&self) -> bool {
        self.validate().is_ok()
    }

    pub fn validate(&self) -> Result<()> {
        let spec = self.family.spec();
        if self.values.len() != spec.bounds.len() {
            return Err(Error::ParamCount {
                family: spec.name,
                expected: spec.bounds.len(),
                got: self.values.len(),
            });
        }
        for ((v, b), name) in self.values.iter().zip(spec.bounds).zip(spec.param_names) {
            if !b.contains(*v) {
                return Err(Error::ParamDomain {
                    family: spec.name,
                    detail: format!("{name} = {v}"),
                });
            }
        }
        Ok(())
    }

    /// For `gmm2`: the same mixture with its components listed in the other order.
    pub fn swap_components(&self) -> Self {
        assert_eq!(self.family, FamilyTag::Gmm2, "swap_components on {:?}", self.family);
        let v = &self.values;
        Self::new_unchecked(FamilyTag::Gmm2, alloc::vec![v[1], v[0], v[3], v[2], 1.0 - v[4]])
    }
}

/// A non-empty set of finite 1-D observations.
#[derive(Clone, Debug, PartialEq)]
pub struct Dataset(Vec<f64>);

impl Dataset {
    pub fn new(points: Vec<f64>) -> Result<Self> {
        if points.is_empty() {
            return Err(Error::InsufficientData { needed: 1, got: 0 });
        }
        if points.iter().any(|x| !x.is_finite()) {
            return Err(Error::NonFiniteData);
        }
        Ok(Self(points))
    }

    pub fn points(&self) -> &[f64] {
        &self.0
    }

    pub fn into_points(self) -> Vec<f64> {
        self.0
    }

    /// Points in ascending order; the canonical order used for exact
    /// permutation-invariant reductions.
    pub fn sorted(&self) -> Vec<f64> {
        let mut v = self.0.clone();
        v.sort_by(f64::total_cmp);
        v
    }

    pub fn scaled(&self, c: f64) -> Self {
        Self(self.0.iter().map(|x| x * c).collect())
    }
}

impl Deref for Dataset {
    type Target = [f64];

    fn deref(&self) -> &[f64] {
        &self.0
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::stats::RunningStats;
    use std::vec;

    fn trapezoid(f: impl Fn(f64) -> f64, lo: f64, hi: f64, nodes: usize) -> f64 {
        let h = (hi - lo) / (nodes - 1) as f64;
        let mut s = 0.5 * (f(lo) + f(hi));
        for i in 1..nodes - 1 {
            s += f(lo + i as f64 * h);
        }
        s * h
    }

    #[test]
    fn uniform_sample_in_support() {
        let p = ParamVector::uniform(1.0).unwrap();
        for seed in 0..20 {
            let d = FamilyTag::OneSidedUniform
                .sample(&p, 5, &mut SeededRng::new(seed, 0))
                .unwrap();
            assert_eq!(d.len(), 5);
            assert!(d.iter().all(|x| (0.0..=1.0).contains(x)));
        }
    }

    #[test]
    fn zero_variance_rejected() {
        assert!(matches!(
            ParamVector::gaussian(0.0, 0.0),
            Err(Error::ParamDomain { .. })
        ));
        let degenerate = ParamVector::new_unchecked(FamilyTag::Gaussian, vec![0.0, 0.0]);
        let err = FamilyTag::Gaussian
            .sample(&degenerate, 3, &mut SeededRng::new(0, 0))
            .unwrap_err();
        assert!(matches!(err, Error::ParamDomain { .. }));
        assert!(ParamVector::uniform(0.0).is_err());
        assert!(ParamVector::uniform(-1.0).is_err());
    }

    #[test]
    fn gmm_sample_mean_matches_mixture_mean() {
        let p = ParamVector::gmm2(0.0, 2.0, 1.0, 1.0, 0.5).unwrap();
        let d = FamilyTag::Gmm2
            .sample(&p, 100_000, &mut SeededRng::new(3, 1))
            .unwrap();
        let s: RunningStats = d.iter().copied().collect();
        // mixture mean w1*mu1 + w2*mu2 = 1.0
        assert!((s.mean() - 1.0).abs() < 3.0 * s.stderr(), "{} ± {}", s.mean(), s.stderr());
    }

    #[test]
    fn log_likelihood_examples() {
        let g = ParamVector::gaussian(0.0, 1.0).unwrap();
        let ll = FamilyTag::Gaussian
            .log_likelihood(&g, &Dataset::new(vec![0.0]).unwrap())
            .unwrap();
        assert!((ll + 0.5 * (2.0 * core::f64::consts::PI).ln()).abs() < 1e-15);

        let u = ParamVector::uniform(0.5).unwrap();
        let ll = FamilyTag::OneSidedUniform
            .log_likelihood(&u, &Dataset::new(vec![0.7]).unwrap())
            .unwrap();
        assert_eq!(ll, f64::NEG_INFINITY);
    }

    #[test]
    fn degenerate_mixture_is_a_gaussian() {
        let data = Dataset::new(vec![-2.0, -0.3, 0.0, 0.4, 1.7, 5.0]).unwrap();
        let g = ParamVector::gaussian(0.4, 1.3).unwrap();
        for w in [0.0, 0.1, 0.5, 0.9, 1.0] {
            let m = ParamVector::gmm2(0.4, 0.4, 1.3, 1.3, w).unwrap();
            let lm = FamilyTag::Gmm2.log_likelihood(&m, &data).unwrap();
            let lg = FamilyTag::Gaussian.log_likelihood(&g, &data).unwrap();
            assert!((lm - lg).abs() < 1e-12 * data.len() as f64, "w={w}");
            for &x in data.iter() {
                let pm = FamilyTag::Gmm2.pdf(&m, x).unwrap();
                let pg = FamilyTag::Gaussian.pdf(&g, x).unwrap();
                assert!((pm - pg).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn pdf_examples() {
        let g = ParamVector::gaussian(0.0, 1.0).unwrap();
        assert!((FamilyTag::Gaussian.pdf(&g, 0.0).unwrap() - 0.398_942_280_401_432_7).abs() < 1e-15);
        let u = ParamVector::uniform(2.0).unwrap();
        assert_eq!(FamilyTag::OneSidedUniform.pdf(&u, 1.0).unwrap(), 0.5);
        assert_eq!(FamilyTag::OneSidedUniform.pdf(&u, 3.0).unwrap(), 0.0);
    }

    #[test]
    fn densities_normalize() {
        let cases = [
            (ParamVector::uniform(2.0).unwrap(), 0.0, 2.0),
            (ParamVector::gaussian(1.0, 0.5).unwrap(), -9.0, 11.0),
            (ParamVector::exponential(0.7).unwrap(), 0.0, 40.0),
            (ParamVector::gmm2(0.0, 2.0, 1.0, 0.3, 0.8).unwrap(), -12.0, 14.0),
        ];
        for (p, lo, hi) in cases {
            let f = p.family();
            let mass = trapezoid(|x| f.pdf(&p, x).unwrap(), lo, hi, 200_001);
            assert!((mass - 1.0).abs() < 1e-4, "{:?}: {mass}", f);
        }
        let b = ParamVector::bernoulli(0.3).unwrap();
        let mass = FamilyTag::Bernoulli.pdf(&b, 0.0).unwrap() + FamilyTag::Bernoulli.pdf(&b, 1.0).unwrap();
        assert!((mass - 1.0).abs() < 1e-15);
    }

    #[test]
    fn log_likelihood_is_sum_of_log_pdf() {
        let mut rng = SeededRng::new(17, 0);
        let cases = [
            ParamVector::uniform(1.5).unwrap(),
            ParamVector::gaussian(-1.0, 2.0).unwrap(),
            ParamVector::exponential(3.0).unwrap(),
            ParamVector::bernoulli(0.2).unwrap(),
            ParamVector::gmm2(0.0, 2.0, 1.0, 1.0, 0.9).unwrap(),
        ];
        for p in cases {
            let f = p.family();
            let d = f.sample(&p, 50, &mut rng).unwrap();
            let ll = f.log_likelihood(&p, &d).unwrap();
            let sum: f64 = d.iter().map(|&x| f.pdf(&p, x).unwrap().ln()).sum();
            assert!((ll - sum).abs() < 1e-12 * d.len() as f64, "{f:?}");
        }
    }

    #[test]
    fn sampling_is_deterministic() {
        let p = ParamVector::gmm2(0.0, 2.0, 1.0, 1.0, 0.3).unwrap();
        let a = FamilyTag::Gmm2.sample(&p, 100, &mut SeededRng::new(5, 5)).unwrap();
        let b = FamilyTag::Gmm2.sample(&p, 100, &mut SeededRng::new(5, 5)).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn family_mismatch_is_an_error() {
        let p = ParamVector::uniform(1.0).unwrap();
        assert!(matches!(
            FamilyTag::Gaussian.pdf(&p, 0.0),
            Err(Error::FamilyMismatch { .. })
        ));
    }

    #[test]
    fn registry_is_consistent() {
        for tag in FamilyTag::ALL {
            assert_eq!(tag.spec().tag, tag);
            assert_eq!(FamilyTag::from_name(tag.name()), Some(tag));
            for b in tag.spec().bounds {
                assert!(b.lower < b.upper);
            }
        }
    }
}
