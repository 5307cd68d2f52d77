//! Generic PLE by penalized likelihood over a one-coefficient estimator class.
//!
//! For an estimator `H_θ` the solver maximizes
//!
//! ```text
//! ln P(X; H_θ(X)) − λ · ‖E_Y[H_θ(Y)] − H_θ(X)‖²,   Y ~ P(·; H_θ(X)), |Y| = m
//! ```
//!
//! The expectation is a Monte-Carlo average over `k` synthetic datasets drawn
//! from one fixed bank of uniforms ([`ConstraintBank`]). Re-mapping the same
//! bank under every candidate makes the objective a deterministic, smooth
//! function of θ.
//!
//! A single λ only relaxes the constraint, so [`ple_fit`] runs a penalty
//! continuation: after each simplex solve it multiplies λ by
//! [`PenaltyConfig::lambda_growth`] until the constraint is inside its own
//! Monte-Carlo noise or λ reaches [`PenaltyConfig::lambda_max`]. With
//! `lambda = 0` it solves plain maximum likelihood within the class.

use alloc::string::ToString;
use alloc::vec::Vec;

use crate::distributions::{log_likelihood_unchecked, Dataset, FamilyTag, ParamVector};
use crate::error::{Error, Result};
use crate::gmm::{em_fit, EmConfig};
use crate::estimators::{max_point, mean_and_centered_ss, sorted_sum, Estimator};
use crate::math::sqrt;
use crate::optim::{nelder_mead, NelderMeadConfig};
use crate::rng::SeededRng;
use crate::stats::RunningStats;

/// Objective assigned to candidates with zero likelihood or an invalid estimate.
pub const INFEASIBLE_OBJECTIVE: f64 = -1e18;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum ClassForm {
    /// `H(X) = α Σ xᵢ` (one shared coefficient).
    Linear,
    /// `H(X) = c · max(X)`.
    ScaledMax,
    /// `H(X) = (mean(X), β Σ (xᵢ − mean(X))²)`.
    QuadraticCentered,
    /// EM for a two-component mixture with each variance scaled by
    /// `1 + t / (n ŵ_c)`, a first-order small-sample correction.
    EmVariance,
}

impl ClassForm {
    pub fn name(self) -> &'static str {
        match self {
            ClassForm::Linear => "linear",
            ClassForm::ScaledMax => "scaled_max",
            ClassForm::QuadraticCentered => "quadratic_centered",
            ClassForm::EmVariance => "em_variance",
        }
    }

    pub fn from_name(name: &str) -> Option<Self> {
        match name {
            "linear" => Some(ClassForm::Linear),
            "scaled_max" | "scaled-max" | "max" => Some(ClassForm::ScaledMax),
            "quadratic_centered" | "quadratic-centered" | "quadratic" => {
                Some(ClassForm::QuadraticCentered)
            }
            "em_variance" | "em-variance" => Some(ClassForm::EmVariance),
            _ => None,
        }
    }

    fn supports(self, family: FamilyTag) -> bool {
        matches!(
            (self, family),
            (
                ClassForm::Linear,
                FamilyTag::OneSidedUniform | FamilyTag::Exponential | FamilyTag::Bernoulli
            ) | (ClassForm::ScaledMax, FamilyTag::OneSidedUniform)
                | (ClassForm::QuadraticCentered, FamilyTag::Gaussian)
                | (ClassForm::EmVariance, FamilyTag::Gmm2)
        )
    }
}

/// EM settings inside [`ClassForm::EmVariance`], looser than the grid's EM
/// because the constraint re-runs it on every synthetic dataset.
pub fn class_em_config() -> EmConfig {
    EmConfig {
        tolerance: 1e-8,
        max_iter: 1000,
        restarts: 1,
        ..EmConfig::default()
    }
}

/// One member of a shared-coefficient estimator class.
#[derive(Clone, Debug, PartialEq)]
pub struct EstimatorClass {
    family: FamilyTag,
    form: ClassForm,
    theta: f64,
}

impl EstimatorClass {
    pub fn new(family: FamilyTag, form: ClassForm, theta: f64) -> Result<Self> {
        if !form.supports(family) {
            return Err(Error::Config(alloc::format!(
                "class form {} does not apply to {}",
                form.name(),
                family.name()
            )));
        }
        Ok(Self {
            family,
            form,
            theta,
        })
    }

    pub fn family(&self) -> FamilyTag {
        self.family
    }

    pub fn form(&self) -> ClassForm {
        self.form
    }

    pub fn theta(&self) -> f64 {
        self.theta
    }

    pub fn with_theta(&self, theta: f64) -> Self {
        Self { theta, ..*self }
    }

    /// The coefficient that reproduces the MLE (or its boundary) on `data`;
    /// used as the default starting point.
    pub fn default_start(&self, data: &Dataset) -> f64 {
        let n = data.len() as f64;
        match (self.form, self.family) {
            (ClassForm::Linear, FamilyTag::OneSidedUniform) => {
                let s = sorted_sum(data);
                if s > 0.0 {
                    max_point(data) / s
                } else {
                    1.0 / n
                }
            }
            (ClassForm::Linear, _) => 1.0 / n,
            (ClassForm::ScaledMax, _) | (ClassForm::EmVariance, _) => 1.0,
            (ClassForm::QuadraticCentered, _) => 1.0 / n,
        }
    }

    pub fn apply(&self, data: &Dataset) -> Result<ParamVector> {
        Ok(ParamVector::new_unchecked(self.family, self.apply_points(data)?))
    }

    fn apply_points(&self, points: &[f64]) -> Result<Vec<f64>> {
        Ok(match self.form {
            ClassForm::Linear => alloc::vec![self.theta * sorted_sum(points)],
            ClassForm::ScaledMax => {
                if let Some(&value) = points.iter().find(|&&x| x < 0.0) {
                    return Err(Error::DataDomain { value });
                }
                alloc::vec![self.theta * max_point(points)]
            }
            ClassForm::QuadraticCentered => {
                if points.len() < 2 {
                    return Err(Error::InsufficientData {
                        needed: 2,
                        got: points.len(),
                    });
                }
                let (mean, ss) = mean_and_centered_ss(points);
                alloc::vec![mean, self.theta * ss]
            }
            ClassForm::EmVariance => {
                let data = Dataset::new(points.to_vec())?;
                // a fixed init stream keeps the class a deterministic function of the data
                let mut rng = SeededRng::new(0, crate::rng::domain::EM_INIT);
                let mut v = em_fit(&data, &class_em_config(), &mut rng)?.params.into_values();
                let n = points.len() as f64;
                v[2] *= 1.0 + self.theta / (n * v[4]);
                v[3] *= 1.0 + self.theta / (n * (1.0 - v[4]));
                v
            }
        })
    }
}

impl Estimator for EstimatorClass {
    fn name(&self) -> &str {
        self.form.name()
    }

    fn family(&self) -> FamilyTag {
        self.family
    }

    fn estimate(&self, data: &Dataset) -> Result<ParamVector> {
        self.apply(data)
    }
}

/// Monte-Carlo estimate of `E[H(Y) − H(X)]`, one entry per parameter.
#[derive(Clone, Debug, PartialEq)]
pub struct ConstraintEstimate {
    pub value: Vec<f64>,
    pub stderr: Vec<f64>,
    /// Synthetic dataset size.
    pub m: usize,
    /// Number of synthetic datasets.
    pub k: usize,
}

impl ConstraintEstimate {
    pub fn norm(&self) -> f64 {
        sqrt(self.norm_sq())
    }

    pub fn norm_sq(&self) -> f64 {
        self.value.iter().map(|v| v * v).sum()
    }

    /// Euclidean norm of the per-entry standard errors.
    pub fn stderr_norm(&self) -> f64 {
        sqrt(self.stderr.iter().map(|v| v * v).sum())
    }

    /// `‖value‖ < z · ‖stderr‖`.
    pub fn within(&self, z: f64) -> bool {
        self.norm() < z * self.stderr_norm()
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct PenaltyConfig {
    /// Initial penalty weight.
    pub lambda: f64,
    /// Synthetic dataset size; `None` uses the size of the observed data.
    pub m: Option<usize>,
    /// Constraint replications.
    pub k: usize,
    pub simplex: NelderMeadConfig,
    pub lambda_growth: f64,
    pub lambda_max: f64,
    /// A continuation stage is accepted once `‖C‖ ≤ stage_tol · ‖stderr‖`.
    pub stage_tol: f64,
    /// Starting coefficient; `None` uses [`EstimatorClass::default_start`].
    pub start: Option<f64>,
}

impl Default for PenaltyConfig {
    fn default() -> Self {
        Self {
            lambda: 0.1,
            m: None,
            k: 1000,
            simplex: NelderMeadConfig::default(),
            lambda_growth: 10.0,
            lambda_max: 1e12,
            stage_tol: 1.0,
            start: None,
        }
    }
}

impl PenaltyConfig {
    fn validate(&self) -> Result<()> {
        if !(self.lambda >= 0.0) || !self.lambda.is_finite() {
            return Err(Error::Config("lambda must be finite and >= 0".into()));
        }
        if self.k == 0 || self.m == Some(0) {
            return Err(Error::Config("m and k must be >= 1".into()));
        }
        if !(self.lambda_growth > 1.0) {
            return Err(Error::Config("lambda_growth must exceed 1".into()));
        }
        Ok(())
    }
}

/// A fixed bank of uniforms for `k` synthetic datasets of `m` points.
#[derive(Clone, Debug)]
pub struct ConstraintBank {
    family: FamilyTag,
    m: usize,
    k: usize,
    uniforms: Vec<f64>,
}

impl ConstraintBank {
    pub fn draw(family: FamilyTag, m: usize, k: usize, rng: &mut SeededRng) -> Self {
        let mut uniforms = alloc::vec![0.0; m * k * family.draws_per_point()];
        rng.fill_open_uniform(&mut uniforms);
        Self {
            family,
            m,
            k,
            uniforms,
        }
    }

    /// Evaluates the constraint for `h` on `data`. Fails with
    /// [`Error::Infeasible`] when `h(data)` is outside the family domain.
    pub fn evaluate(&self, h: &dyn Estimator, data: &Dataset) -> Result<ConstraintEstimate> {
        if h.family() != self.family {
            return Err(Error::FamilyMismatch {
                expected: self.family.name(),
                got: h.family().name(),
            });
        }
        let theta_x = h.estimate(data)?;
        if let Err(e) = theta_x.validate() {
            return Err(Error::Infeasible(e.to_string()));
        }
        let p = theta_x.values().len();
        let mut acc = alloc::vec![RunningStats::new(); p];
        let mut buf = Vec::with_capacity(self.m);
        let chunk = self.m * self.family.draws_per_point();
        for bank in self.uniforms.chunks_exact(chunk) {
            self.family.transform_into(theta_x.values(), bank, &mut buf);
            let y = Dataset::new(core::mem::take(&mut buf))?;
            let theta_y = h.estimate(&y)?;
            for ((a, ty), tx) in acc.iter_mut().zip(theta_y.values()).zip(theta_x.values()) {
                a.push(ty - tx);
            }
            buf = y.into_points();
        }
        Ok(ConstraintEstimate {
            value: acc.iter().map(RunningStats::mean).collect(),
            stderr: acc.iter().map(RunningStats::stderr).collect(),
            m: self.m,
            k: self.k,
        })
    }
}

/// Draws a fresh bank and evaluates the constraint for `h` on `data`.
pub fn estimate_constraint(
    h: &dyn Estimator,
    data: &Dataset,
    cfg: &PenaltyConfig,
    rng: &mut SeededRng,
) -> Result<ConstraintEstimate> {
    cfg.validate()?;
    let m = cfg.m.unwrap_or(data.len());
    ConstraintBank::draw(h.family(), m, cfg.k, rng).evaluate(h, data)
}

#[derive(Clone, Debug, PartialEq)]
pub struct FitDiagnostics {
    /// Penalized objective at the fitted coefficient, with the final λ.
    pub objective: f64,
    pub log_likelihood: f64,
    pub constraint: ConstraintEstimate,
    /// λ of the last continuation stage.
    pub lambda: f64,
    pub stages: usize,
    pub iterations: usize,
    pub evaluations: usize,
    pub simplex_converged: bool,
    /// `‖C‖ < 4 · ‖stderr‖` at the fitted coefficient.
    pub constraint_satisfied: bool,
    /// Both of the above.
    pub converged: bool,
}

fn penalized(
    class: &EstimatorClass,
    theta: f64,
    data: &Dataset,
    bank: &ConstraintBank,
    lambda: f64,
) -> Option<(f64, f64, ConstraintEstimate)> {
    let cand = class.with_theta(theta);
    let est = cand.apply(data).ok()?;
    if !est.is_valid() {
        return None;
    }
    let ll = log_likelihood_unchecked(class.family, est.values(), data);
    if !ll.is_finite() {
        return None;
    }
    let c = bank.evaluate(&cand, data).ok()?;
    Some((ll - lambda * c.norm_sq(), ll, c))
}

/// Fits the class coefficient. Non-convergence is reported in the
/// diagnostics; only a fit with no feasible candidate is an error.
pub fn ple_fit(
    class: &EstimatorClass,
    data: &Dataset,
    cfg: &PenaltyConfig,
    rng: &mut SeededRng,
) -> Result<(EstimatorClass, FitDiagnostics)> {
    cfg.validate()?;
    let m = cfg.m.unwrap_or(data.len());
    let bank = ConstraintBank::draw(class.family, m, cfg.k, rng);

    let mut theta = cfg.start.unwrap_or_else(|| class.default_start(data));
    let mut lambda = cfg.lambda;
    let mut stages = 0;
    let mut iterations = 0;
    let mut evaluations = 0;
    loop {
        stages += 1;
        let objective = |x: &[f64]| match penalized(class, x[0], data, &bank, lambda) {
            Some((obj, _, _)) => -obj,
            None => -INFEASIBLE_OBJECTIVE,
        };
        let step = if theta != 0.0 { 0.05 * theta.abs() } else { 0.01 };
        let min = nelder_mead(objective, &[theta], &[step], &cfg.simplex);
        iterations += min.iterations;
        evaluations += min.evaluations;
        if -min.value <= INFEASIBLE_OBJECTIVE {
            return Err(Error::Infeasible(alloc::format!(
                "every {} candidate visited has zero likelihood or an invalid estimate",
                class.form.name()
            )));
        }
        theta = min.x[0];
        let (obj, ll, c) = penalized(class, theta, data, &bank, lambda)
            .expect("simplex minimum is feasible");
        let stage_done = c.norm() <= cfg.stage_tol * c.stderr_norm();
        let next = lambda * cfg.lambda_growth;
        if stage_done || lambda == 0.0 || next > cfg.lambda_max {
            let constraint_satisfied = c.within(4.0);
            let diagnostics = FitDiagnostics {
                objective: obj,
                log_likelihood: ll,
                constraint_satisfied,
                converged: min.converged && constraint_satisfied,
                simplex_converged: min.converged,
                constraint: c,
                lambda,
                stages,
                iterations,
                evaluations,
            };
            return Ok((class.with_theta(theta), diagnostics));
        }
        lambda = next;
    }
}

/// Applies a fitted class to data.
pub fn ple_point_estimate(class: &EstimatorClass, data: &Dataset) -> Result<ParamVector> {
    class.apply(data)
}
