use ple_core::gmm::{run_cell, GridSpec};
use ple_core::hypernet::{gradient_check, train, truth_source, HyperNet, PenaltyBank, TrainConfig};
use ple_core::{FamilyTag, ParamVector, SeededRng};

fn spec(lambda: f64) -> GridSpec {
    let d = GridSpec::default();
    GridSpec {
        weights: vec![0.9],
        sizes: vec![50],
        seeds: 50,
        kl_samples: 20_000,
        train: TrainConfig { lambda, ..d.train.clone() },
        ..d
    }
}

#[test]
fn penalty_lowers_kl_on_imbalanced_small_samples() {
    let with = run_cell(&spec(0.1), 0.9, 50).unwrap();
    let without = run_cell(&spec(0.0), 0.9, 50).unwrap();
    println!("mean KL with penalty {} without {}", with.kl_ple_mean, without.kl_ple_mean);
    assert!(with.failures.is_empty() && without.failures.is_empty());
    assert!(with.kl_ple_mean < without.kl_ple_mean);
}

#[test]
fn trained_gradients_still_match_finite_differences() {
    let truth = ParamVector::gmm2(0.0, 2.0, 1.0, 1.0, 0.7).unwrap();
    let mut net = HyperNet::init(&mut SeededRng::new(11, 0));
    let cfg = TrainConfig { steps: 200, points: 40, seed: 11, ..TrainConfig::default() };
    train(&mut net, truth_source(&truth, 40), &cfg).unwrap();
    let data = FamilyTag::Gmm2.sample(&truth, 40, &mut SeededRng::new(12, 0)).unwrap();
    let bank = PenaltyBank::draw(40, &mut SeededRng::new(13, 0));
    let indices: Vec<usize> = net.param_groups().iter().map(|(_, r)| r.start + r.len() / 2).collect();
    for c in gradient_check(&net, &data, 0.1, &bank, &indices, 1e-5) {
        assert!(c.relative_error() < 1e-4, "{c:?}");
    }
}

#[test]
fn training_is_deterministic_across_runs() {
    let truth = ParamVector::gmm2(0.0, 2.0, 1.0, 1.0, 0.9).unwrap();
    let cfg = TrainConfig { steps: 100, points: 30, seed: 5, ..TrainConfig::default() };
    let run = || {
        let mut net = HyperNet::init(&mut SeededRng::new(5, 0));
        let curve = train(&mut net, truth_source(&truth, 30), &cfg).unwrap();
        (net.params(), curve)
    };
    let (a, ca) = run();
    let (b, cb) = run();
    assert_eq!(a, b);
    assert_eq!(ca, cb);
}
