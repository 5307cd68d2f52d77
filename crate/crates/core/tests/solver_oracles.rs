use ple_core::solver::{ple_fit, ClassForm, EstimatorClass, PenaltyConfig};
use ple_core::{Dataset, FamilyTag, ParamVector, SeededRng};

fn uniform(seed: u64) -> Dataset {
    let p = ParamVector::uniform(1.0).unwrap();
    FamilyTag::OneSidedUniform.sample(&p, 20, &mut SeededRng::new(seed, 0)).unwrap()
}

fn gaussian(seed: u64) -> Dataset {
    let p = ParamVector::gaussian(0.0, 1.0).unwrap();
    FamilyTag::Gaussian.sample(&p, 10, &mut SeededRng::new(seed, 0)).unwrap()
}

fn max_over_mean(d: &Dataset) -> f64 {
    let max = d.iter().cloned().fold(f64::MIN, f64::max);
    max * d.len() as f64 / d.iter().sum::<f64>()
}

fn fit(family: FamilyTag, form: ClassForm, data: &Dataset, k: usize, seed: u64) -> (f64, bool) {
    let class = EstimatorClass::new(family, form, 1.0).unwrap();
    let cfg = PenaltyConfig { k, ..PenaltyConfig::default() };
    let (c, d) = ple_fit(&class, data, &cfg, &mut SeededRng::new(seed, 1)).unwrap();
    (c.theta(), d.converged)
}

/// Tolerances halve each time k quadruples.
#[test]
fn closed_forms_are_recovered_at_sqrt_k_rate() {
    // 2/n is only feasible when max(X) < 2·mean(X)
    let seeds: Vec<u64> = (0..10).filter(|&s| max_over_mean(&uniform(s)) < 2.0).take(2).collect();
    for seed in seeds {
        let (u, g) = (uniform(seed), gaussian(seed));
        for (k, tol_sum, tol) in [(625, 0.2, 0.04), (2500, 0.1, 0.02), (10_000, 0.05, 0.01)] {
            let (alpha, ok) = fit(FamilyTag::OneSidedUniform, ClassForm::Linear, &u, k, seed);
            assert!(ok && (20.0 * alpha - 2.0).abs() < tol_sum, "seed {seed} k {k}: n·α = {}", 20.0 * alpha);
            let (c, ok) = fit(FamilyTag::OneSidedUniform, ClassForm::ScaledMax, &u, k, seed);
            assert!(ok && (c - 1.05).abs() < tol, "seed {seed} k {k}: c = {c}");
            let (beta, ok) = fit(FamilyTag::Gaussian, ClassForm::QuadraticCentered, &g, k, seed);
            assert!(ok && (beta - 1.0 / 9.0).abs() < tol, "seed {seed} k {k}: β = {beta}");
        }
    }
}

#[test]
fn linear_root_outside_the_support_stops_at_the_boundary() {
    let seed = (0..10).find(|&s| max_over_mean(&uniform(s)) > 2.0).unwrap();
    let u = uniform(seed);
    let (alpha, converged) = fit(FamilyTag::OneSidedUniform, ClassForm::Linear, &u, 2500, seed);
    // the smallest α with non-zero likelihood is max / Σx
    assert!((20.0 * alpha - max_over_mean(&u)).abs() < 1e-4, "n·α = {}", 20.0 * alpha);
    assert!(!converged);
}
