//! Subcommands. Each reads its [`Settings`], writes its files into the output
//! directory and returns a short text report.
//!
//! Parallel work is split by trial, dataset, cell or seed, and every unit owns
//! a seeded stream, so outputs do not depend on the worker count.

use std::path::{Path, PathBuf};
use std::time::Instant;

use rayon::prelude::*;

use ple_core::autophagy::{run_trial, GenerationTrace, LoopConfig};
use ple_core::density::{estimator_density, Affine, DensityGrid};
use ple_core::estimators::{bias_trial, BiasReport, Builtin};
use ple_core::gmm::{prepare_cell, run_seed, CellResult, GridSpec, PleMethod, SeedOutcome};
use ple_core::rng::{domain, stream_id};
use ple_core::solver::{ple_fit, ClassForm, EstimatorClass, PenaltyConfig};
use ple_core::{FamilyTag, ParamVector, SeededRng};

use crate::config::Settings;
use crate::error::{LabError, Result};
use crate::manifest::{RunManifest, MANIFEST_FILE};
use crate::output::{num, opt_num, write_file, Table};
use crate::svg;

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Subcommand {
    Bias,
    Madness,
    GmmGrid,
    Density,
    Solver,
}

const PARAM_KEYS: [(&str, &str); 9] = [
    ("a", "uniform upper bound [1]"),
    ("mean", "gaussian mean [0] or exponential mean [1]"),
    ("variance", "gaussian variance [1]"),
    ("p", "bernoulli success probability [0.5]"),
    ("mu1", "gmm2 first mean [0]"),
    ("mu2", "gmm2 second mean [2]"),
    ("var1", "gmm2 first variance [1]"),
    ("var2", "gmm2 second variance [1]"),
    ("w1", "gmm2 first weight [0.5]"),
];

const BIAS_KEYS: &[(&str, &str)] = &[
    ("family", "uniform | gaussian | exponential | bernoulli (required)"),
    ("estimator", "estimator name, or `all` for every closed form of the family [all]"),
    ("n", "points per dataset [20]"),
    ("trials", "Monte-Carlo trials [10000]"),
    ("seed", "base seed; defaults to $PLE_LAB_SEED, then 0"),
];

const MADNESS_KEYS: &[(&str, &str)] = &[
    ("family", "uniform | gaussian | exponential | bernoulli (required)"),
    ("estimator", "estimator refit every generation [mle]"),
    ("n", "points per generation [20]"),
    ("generations", "synthetic generations [10]"),
    ("trials", "independent chains [100]"),
    ("param", "parameter to report [the family's last]"),
    ("svg", "also write an SVG plot [true]"),
    ("seed", "base seed; defaults to $PLE_LAB_SEED, then 0"),
];

const GRID_KEYS: &[(&str, &str)] = &[
    ("weights", "comma-separated first-component weights [0.5,0.6,0.7,0.8,0.9,0.95]"),
    ("sizes", "comma-separated sample sizes [20,50,100,500,2000]"),
    ("seeds", "evaluation datasets per cell [100]"),
    ("kl-samples", "Monte-Carlo samples per KL estimate [100000]"),
    ("method", "PLE method: hypernet | solver [hypernet]"),
    ("steps", "hypernet training steps [3000]"),
    ("lambda", "penalty weight [0.1]"),
    ("learning-rate", "Adam learning rate [0.001]"),
    ("mu1", "first mean [0]"),
    ("mu2", "second mean [2]"),
    ("var1", "first variance [1]"),
    ("var2", "second variance [1]"),
    ("svg", "also write a heatmap SVG [true]"),
    ("seed", "base seed; defaults to $PLE_LAB_SEED, then 0"),
];

const DENSITY_KEYS: &[(&str, &str)] = &[
    ("family", "uniform | gaussian | exponential [uniform]"),
    ("scale", "local estimate h(x) = scale * x + shift [2]"),
    ("shift", "see scale [0]"),
    ("n", "points averaged by the estimator [20]"),
    ("nodes", "grid nodes for the data density, at least 65 [257]"),
    ("samples", "Monte-Carlo estimates for the histogram [100000]"),
    ("bins", "histogram bins [100]"),
    ("seed", "base seed; defaults to $PLE_LAB_SEED, then 0"),
];

const SOLVER_KEYS: &[(&str, &str)] = &[
    ("family", "uniform | gaussian | exponential | bernoulli | gmm2 (required)"),
    ("form", "linear | scaled_max | quadratic_centered | em_variance [by family]"),
    ("n", "points per dataset [20]"),
    ("k", "constraint replications [1000]"),
    ("lambda", "initial penalty weight [0.1]"),
    ("lambda-max", "largest penalty weight of the continuation [1e12]"),
    ("datasets", "independent datasets to fit [1]"),
    ("seed", "base seed; defaults to $PLE_LAB_SEED, then 0"),
];

impl Subcommand {
    pub const ALL: [Subcommand; 5] = [
        Subcommand::Bias,
        Subcommand::Madness,
        Subcommand::GmmGrid,
        Subcommand::Density,
        Subcommand::Solver,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Subcommand::Bias => "bias",
            Subcommand::Madness => "madness",
            Subcommand::GmmGrid => "gmm-grid",
            Subcommand::Density => "density",
            Subcommand::Solver => "solver",
        }
    }

    pub fn from_name(name: &str) -> Option<Self> {
        Self::ALL.into_iter().find(|s| s.name() == name)
    }

    pub fn about(self) -> &'static str {
        match self {
            Subcommand::Bias => "Monte-Carlo bias of closed-form estimators against analytic values",
            Subcommand::Madness => "Per-generation mean and standard error of a self-consuming loop",
            Subcommand::GmmGrid => "EM vs PLE on two-component mixtures over a weight x size grid",
            Subcommand::Density => "Estimator density by self-convolution, with a Monte-Carlo histogram",
            Subcommand::Solver => "Fit a PLE estimator class with the penalized solver",
        }
    }

    /// Setting keys with help text; each is also a `--key` flag.
    pub fn keys(self) -> Vec<(&'static str, &'static str)> {
        let own = match self {
            Subcommand::Bias => BIAS_KEYS,
            Subcommand::Madness => MADNESS_KEYS,
            Subcommand::GmmGrid => GRID_KEYS,
            Subcommand::Density => DENSITY_KEYS,
            Subcommand::Solver => SOLVER_KEYS,
        };
        let mut keys = own.to_vec();
        let params: &[(&str, &str)] = match self {
            Subcommand::Bias | Subcommand::Madness | Subcommand::Density => &PARAM_KEYS[..4],
            Subcommand::Solver => &PARAM_KEYS,
            Subcommand::GmmGrid => &[],
        };
        keys.extend_from_slice(params);
        keys
    }
}

struct Outcome {
    outputs: Vec<String>,
    report: String,
}

impl Outcome {
    fn new() -> Self {
        Self {
            outputs: Vec::new(),
            report: String::new(),
        }
    }

    fn write(&mut self, dir: &Path, name: &str, bytes: &[u8]) -> Result<()> {
        write_file(dir, name, bytes)?;
        self.outputs.push(name.to_string());
        Ok(())
    }

    fn line(&mut self, text: impl AsRef<str>) {
        self.report.push_str(text.as_ref());
        self.report.push('\n');
    }
}

/// Runs `sub` into `out` and writes the manifest; returns it with the report.
pub fn execute(
    sub: Subcommand,
    mut settings: Settings,
    out: &Path,
    threads: Option<usize>,
) -> Result<(RunManifest, String)> {
    let keys: Vec<&str> = sub.keys().iter().map(|k| k.0).collect();
    settings.check_keys(&keys)?;
    std::fs::create_dir_all(out).map_err(|e| LabError::io(out, e))?;
    let start = Instant::now();
    let run = |s: &mut Settings| match sub {
        Subcommand::Bias => bias(s, out),
        Subcommand::Madness => madness(s, out),
        Subcommand::GmmGrid => gmm_grid(s, out),
        Subcommand::Density => density(s, out),
        Subcommand::Solver => solver(s, out),
    };
    let outcome = match threads {
        Some(t) => rayon::ThreadPoolBuilder::new()
            .num_threads(t)
            .build()?
            .install(|| run(&mut settings))?,
        None => run(&mut settings)?,
    };
    let manifest = RunManifest {
        subcommand: sub.name().to_string(),
        seed: settings.require("seed")?,
        config: settings.map().clone(),
        version: env!("CARGO_PKG_VERSION").to_string(),
        outputs: outcome.outputs,
        duration_secs: start.elapsed().as_secs_f64(),
        threads,
    };
    manifest.write(out)?;
    Ok((manifest, outcome.report))
}

/// Re-runs a manifest into `out`, by default the manifest's own directory.
pub fn rerun(manifest: &Path, out: Option<&Path>, threads: Option<usize>) -> Result<(RunManifest, String)> {
    let m = RunManifest::read(manifest)?;
    let sub = Subcommand::from_name(&m.subcommand)
        .ok_or_else(|| LabError::usage(format!("manifest names unknown subcommand `{}`", m.subcommand)))?;
    let dir: PathBuf = match out {
        Some(d) => d.to_path_buf(),
        None => manifest.parent().map(Path::to_path_buf).unwrap_or_default(),
    };
    execute(sub, Settings::from_map(m.config), &dir, threads)
}

pub fn manifest_path(dir: &Path) -> PathBuf {
    dir.join(MANIFEST_FILE)
}

fn family(s: &Settings) -> Result<FamilyTag> {
    let name: String = s.require("family")?;
    FamilyTag::from_name(&name).ok_or_else(|| LabError::usage(format!("unknown family `{name}`")))
}

fn default_param(family: FamilyTag, name: &str) -> f64 {
    match (family, name) {
        (FamilyTag::Exponential, "mean") => 1.0,
        (_, "a" | "variance" | "var1" | "var2") => 1.0,
        (_, "p" | "w1") => 0.5,
        (_, "mu2") => 2.0,
        _ => 0.0,
    }
}

fn truth(s: &mut Settings, family: FamilyTag) -> Result<ParamVector> {
    let names = family.spec().param_names;
    if let Some((k, _)) = PARAM_KEYS.iter().find(|(k, _)| !names.contains(k) && s.contains(k)) {
        return Err(LabError::usage(format!("--{k} does not apply to {}", family.name())));
    }
    let values = names
        .iter()
        .map(|n| s.value(n, default_param(family, n)))
        .collect::<Result<Vec<f64>>>()?;
    Ok(ParamVector::new(family, values)?)
}

fn seed(s: &mut Settings) -> Result<u64> {
    s.value("seed", 0u64)
}

fn bias(s: &mut Settings, out: &Path) -> Result<Outcome> {
    let family = family(s)?;
    let truth = truth(s, family)?;
    let n: usize = s.value("n", 20)?;
    let trials: usize = s.value("trials", 10_000)?;
    let seed = seed(s)?;
    let which: String = s.value("estimator", "all".to_string())?;
    let estimators: Vec<Builtin> = if which == "all" {
        Builtin::for_family(family).collect()
    } else {
        vec![Builtin::resolve(family, &which)?]
    };
    if estimators.is_empty() {
        return Err(LabError::usage(format!("no closed-form estimators for {}", family.name())));
    }
    if trials < 2 {
        return Err(LabError::usage("--trials must be at least 2"));
    }
    let mut table = Table::new(&[
        "estimator",
        "param",
        "truth",
        "mc_mean",
        "mc_bias",
        "stderr",
        "analytic_bias",
        "pass",
    ]);
    let mut outcome = Outcome::new();
    for est in estimators {
        if n < est.min_n() {
            return Err(LabError::usage(format!("{} needs n >= {}", est.full_name(), est.min_n())));
        }
        let estimates = (0..trials)
            .into_par_iter()
            .map(|t| bias_trial(&est, &truth, n, seed, t))
            .collect::<ple_core::Result<Vec<_>>>()?;
        let r = BiasReport::from_estimates(est.full_name(), &truth, n, &estimates);
        for (i, name) in family.spec().param_names.iter().enumerate() {
            let analytic = r.analytic_bias.as_ref().map(|a| a[i]);
            let pass = match analytic {
                Some(a) if (r.mc_bias[i] - a).abs() < 4.0 * r.mc_stderr[i] => "pass",
                Some(_) => "fail",
                None => "",
            };
            table.push(vec![
                r.estimator.clone(),
                name.to_string(),
                num(truth.values()[i]),
                num(r.mc_mean[i]),
                num(r.mc_bias[i]),
                num(r.mc_stderr[i]),
                opt_num(analytic),
                pass.to_string(),
            ]);
            outcome.line(format!(
                "{:<20} {:<9} bias {:+.6} ± {:.6}  analytic {}  {}",
                r.estimator,
                name,
                r.mc_bias[i],
                r.mc_stderr[i],
                analytic.map(|a| format!("{a:+.6}")).unwrap_or_else(|| "-".into()),
                pass
            ));
        }
    }
    outcome.write(out, "bias.csv", &table.to_bytes()?)?;
    Ok(outcome)
}

fn madness(s: &mut Settings, out: &Path) -> Result<Outcome> {
    let family = family(s)?;
    let truth = truth(s, family)?;
    let estimator: String = s.value("estimator", "mle".to_string())?;
    let n: usize = s.value("n", 20)?;
    let generations: usize = s.value("generations", 10)?;
    let trials: usize = s.value("trials", 100)?;
    let names = family.spec().param_names;
    let param: String = s.value("param", names[names.len() - 1].to_string())?;
    let draw_svg: bool = s.value("svg", true)?;
    let seed = seed(s)?;
    let p = names
        .iter()
        .position(|x| *x == param)
        .ok_or_else(|| LabError::usage(format!("{} has no parameter `{param}`", family.name())))?;

    let cfg = LoopConfig {
        truth,
        n,
        generations,
        trials,
        estimator,
    };
    cfg.validate()?;
    let est = cfg.resolve_estimator()?;
    let chains = (0..trials)
        .into_par_iter()
        .map(|t| run_trial(&cfg, &est, seed, t))
        .collect::<ple_core::Result<Vec<_>>>()?;
    let trace = GenerationTrace::from_chains(&cfg, est.full_name(), chains);
    let summary = trace.summary(p);

    let mut table = Table::new(&["x", "y", "error"]);
    for g in &summary {
        table.push(vec![num(g.generation as f64), num(g.mean), num(g.stderr)]);
    }
    let mut outcome = Outcome::new();
    outcome.write(out, "madness.csv", &table.to_bytes()?)?;
    if draw_svg {
        let points: Vec<_> = summary.iter().map(|g| (g.generation as f64, g.mean, g.stderr)).collect();
        let title = format!("{} on {}, n = {n}, {trials} trials", est.full_name(), family.name());
        let plot = svg::line_plot(&title, "generation", &param, &points);
        outcome.write(out, "madness.svg", plot.as_bytes())?;
    }
    let last = summary.last().expect("at least one row");
    outcome.line(format!(
        "{} {param}: generation {} mean {:.6} ± {:.6}",
        est.full_name(),
        last.generation,
        last.mean,
        last.stderr
    ));
    match trace.collapse_rate(p) {
        Ok(rate) => outcome.line(format!("collapse rate {rate:+.6} per generation")),
        Err(e) => outcome.line(format!("collapse rate: {e}")),
    }
    if trace.degenerate_trials() > 0 {
        outcome.line(format!("{} degenerate chains", trace.degenerate_trials()));
    }
    Ok(outcome)
}

fn gmm_grid(s: &mut Settings, out: &Path) -> Result<Outcome> {
    let d = GridSpec::default();
    let weights: Vec<f64> = s.list("weights", &d.weights)?;
    let sizes: Vec<usize> = s.list("sizes", &d.sizes)?;
    let seeds: usize = s.value("seeds", d.seeds)?;
    let kl_samples: usize = s.value("kl-samples", d.kl_samples)?;
    let method: String = s.value("method", d.method.name().to_string())?;
    let method = PleMethod::from_name(&method)
        .ok_or_else(|| LabError::usage(format!("unknown method `{method}`")))?;
    let means = [s.value("mu1", d.means[0])?, s.value("mu2", d.means[1])?];
    let variances = [s.value("var1", d.variances[0])?, s.value("var2", d.variances[1])?];
    let mut train = d.train.clone();
    train.steps = s.value("steps", train.steps)?;
    train.lambda = s.value("lambda", train.lambda)?;
    train.learning_rate = s.value("learning-rate", train.learning_rate)?;
    let mut solver = d.solver.clone();
    solver.lambda = train.lambda;
    let draw_svg: bool = s.value("svg", true)?;
    let spec = GridSpec {
        weights,
        sizes,
        seeds,
        kl_samples,
        means,
        variances,
        method,
        train,
        solver,
        seed: seed(s)?,
        ..d
    };
    spec.validate()?;

    let cells = spec.cells();
    let models = cells
        .par_iter()
        .map(|&(w, n)| prepare_cell(&spec, w, n))
        .collect::<ple_core::Result<Vec<_>>>()?;
    let jobs: Vec<(usize, usize)> = (0..cells.len())
        .flat_map(|c| (0..seeds).map(move |k| (c, k)))
        .collect();
    let results: Vec<ple_core::Result<SeedOutcome>> = jobs
        .par_iter()
        .map(|&(c, k)| run_seed(&spec, &models[c], cells[c].0, cells[c].1, k))
        .collect();
    let mut results = results.into_iter();
    let cell_results: Vec<CellResult> = cells
        .iter()
        .map(|&(w, n)| CellResult::aggregate(w, n, results.by_ref().take(seeds).collect()))
        .collect();

    let mut grid = Table::new(&[
        "weight",
        "n",
        "kl_mle_mean",
        "kl_ple_mean",
        "d_mean",
        "d_stderr",
        "rfair_mle",
        "rfair_ple",
    ]);
    let mut per_seed = Table::new(&["weight", "n", "seed", "kl_mle", "kl_ple", "d", "rfair_mle", "rfair_ple"]);
    let mut outcome = Outcome::new();
    for c in &cell_results {
        grid.push(vec![
            num(c.weight),
            num(c.n as f64),
            num(c.kl_mle_mean),
            num(c.kl_ple_mean),
            num(c.d_mean),
            num(c.d_stderr),
            num(c.rfair_mle),
            num(c.rfair_ple),
        ]);
        for o in &c.outcomes {
            per_seed.push(vec![
                num(c.weight),
                num(c.n as f64),
                num(o.seed as f64),
                num(o.kl_mle),
                num(o.kl_ple),
                num(o.kl_mle - o.kl_ple),
                num(o.rfair_mle),
                num(o.rfair_ple),
            ]);
        }
        outcome.line(format!(
            "w1 {:<5} n {:<6} D {:+.3e} ± {:.3e}  R_fair EM {:.3} PLE {:.3}{}",
            c.weight,
            c.n,
            c.d_mean,
            c.d_stderr,
            c.rfair_mle,
            c.rfair_ple,
            if c.failures.is_empty() {
                String::new()
            } else {
                format!("  ({} failed seeds)", c.failures.len())
            }
        ));
    }
    outcome.write(out, "grid.csv", &grid.to_bytes()?)?;
    outcome.write(out, "seeds.csv", &per_seed.to_bytes()?)?;
    if draw_svg {
        let rows: Vec<String> = spec.weights.iter().map(|w| w.to_string()).collect();
        let cols: Vec<String> = spec.sizes.iter().map(|n| n.to_string()).collect();
        let values: Vec<Vec<f64>> = cell_results
            .chunks(spec.sizes.len())
            .map(|row| row.iter().map(|c| c.d_mean).collect())
            .collect();
        let title = format!("KL(EM) - KL(PLE), {} PLE", spec.method.name());
        let map = svg::heatmap(&title, "w1", &rows, "n", &cols, &values);
        outcome.write(out, "grid.svg", map.as_bytes())?;
    }
    Ok(outcome)
}

const MC_CHUNKS: usize = 64;

fn density(s: &mut Settings, out: &Path) -> Result<Outcome> {
    let name: String = s.value("family", "uniform".to_string())?;
    let family = FamilyTag::from_name(&name).ok_or_else(|| LabError::usage(format!("unknown family `{name}`")))?;
    let truth = truth(s, family)?;
    let scale: f64 = s.value("scale", 2.0)?;
    let shift: f64 = s.value("shift", 0.0)?;
    let n: usize = s.value("n", 20)?;
    let nodes: usize = s.value("nodes", 257)?;
    let samples: usize = s.value("samples", 100_000)?;
    let bins: usize = s.value("bins", 100)?;
    let seed = seed(s)?;
    if bins == 0 || samples == 0 {
        return Err(LabError::usage("--bins and --samples must be positive"));
    }
    let v = truth.values();
    let (lo, hi) = match family {
        FamilyTag::OneSidedUniform => (0.0, v[0]),
        FamilyTag::Gaussian => (v[0] - 8.0 * v[1].sqrt(), v[0] + 8.0 * v[1].sqrt()),
        FamilyTag::Exponential => (0.0, 40.0 * v[0]),
        _ => return Err(LabError::usage(format!("density needs a continuous family, got {}", family.name()))),
    };
    let f = DensityGrid::from_fn(lo, hi, nodes, |x| family.pdf(&truth, x).unwrap_or(0.0))?.normalized()?;
    let map = Affine { scale, shift };
    let grid = estimator_density(&f, &map, n)?;

    let draws: Vec<f64> = (0..MC_CHUNKS)
        .into_par_iter()
        .map(|c| -> ple_core::Result<Vec<f64>> {
            let count = samples * (c + 1) / MC_CHUNKS - samples * c / MC_CHUNKS;
            let mut rng = SeededRng::new(seed, stream_id(&[domain::EVAL, c as u64]));
            (0..count)
                .map(|_| {
                    let x = family.sample(&truth, n, &mut rng)?;
                    Ok(x.iter().map(|x| scale * x + shift).sum::<f64>() / n as f64)
                })
                .collect()
        })
        .collect::<ple_core::Result<Vec<_>>>()?
        .concat();

    let mut table = Table::new(&["node", "density"]);
    for (x, y) in grid.nodes() {
        table.push(vec![num(x), num(y)]);
    }
    let width = (grid.hi() - grid.lo()) / bins as f64;
    let mut counts = vec![0usize; bins];
    for &x in &draws {
        let b = ((x - grid.lo()) / width).floor();
        if b >= 0.0 && (b as usize) < bins {
            counts[b as usize] += 1;
        } else if x == grid.hi() {
            counts[bins - 1] += 1;
        }
    }
    let mut hist = Table::new(&["center", "density"]);
    for (i, c) in counts.iter().enumerate() {
        let center = grid.lo() + (i as f64 + 0.5) * width;
        hist.push(vec![num(center), num(*c as f64 / (samples as f64 * width))]);
    }
    let mut outcome = Outcome::new();
    outcome.write(out, "density.csv", &table.to_bytes()?)?;
    outcome.write(out, "histogram.csv", &hist.to_bytes()?)?;
    outcome.line(format!(
        "grid on [{:.4}, {:.4}] with {} nodes: mean {:.6}, variance {:.6e}",
        grid.lo(),
        grid.hi(),
        grid.len(),
        grid.mean(),
        grid.variance()
    ));
    outcome.line(format!(
        "L1 distance to {samples} Monte-Carlo estimates over {bins} bins: {:.5}",
        grid.l1_to_samples(&draws, bins)
    ));
    Ok(outcome)
}

fn default_form(family: FamilyTag) -> ClassForm {
    match family {
        FamilyTag::OneSidedUniform => ClassForm::ScaledMax,
        FamilyTag::Gaussian => ClassForm::QuadraticCentered,
        FamilyTag::Exponential | FamilyTag::Bernoulli => ClassForm::Linear,
        FamilyTag::Gmm2 => ClassForm::EmVariance,
    }
}

/// Coefficient of the matching closed-form estimator, when there is one.
pub fn closed_form(family: FamilyTag, form: ClassForm, n: usize) -> Option<f64> {
    let n = n as f64;
    match (family, form) {
        (FamilyTag::OneSidedUniform, ClassForm::Linear) => Some(2.0 / n),
        (FamilyTag::OneSidedUniform, ClassForm::ScaledMax) => Some((n + 1.0) / n),
        (FamilyTag::Gaussian, ClassForm::QuadraticCentered) => Some(1.0 / (n - 1.0)),
        (FamilyTag::Exponential | FamilyTag::Bernoulli, ClassForm::Linear) => Some(1.0 / n),
        _ => None,
    }
}

fn solver(s: &mut Settings, out: &Path) -> Result<Outcome> {
    let family = family(s)?;
    let truth = truth(s, family)?;
    let form: String = s.value("form", default_form(family).name().to_string())?;
    let form = ClassForm::from_name(&form).ok_or_else(|| LabError::usage(format!("unknown form `{form}`")))?;
    let n: usize = s.value("n", 20)?;
    let d = PenaltyConfig::default();
    let cfg = PenaltyConfig {
        k: s.value("k", d.k)?,
        lambda: s.value("lambda", d.lambda)?,
        lambda_max: s.value("lambda-max", d.lambda_max)?,
        ..d
    };
    let datasets: usize = s.value("datasets", 1)?;
    let seed = seed(s)?;
    let class = EstimatorClass::new(family, form, 1.0)?;

    let fits = (0..datasets)
        .into_par_iter()
        .map(|i| {
            let mut data_rng = SeededRng::new(seed, stream_id(&[domain::EVAL, i as u64]));
            let data = family.sample(&truth, n, &mut data_rng)?;
            let mut rng = SeededRng::new(seed, stream_id(&[domain::CONSTRAINT, i as u64]));
            ple_fit(&class, &data, &cfg, &mut rng)
        })
        .collect::<ple_core::Result<Vec<_>>>()?;

    let oracle = closed_form(family, form, n);
    let mut table = Table::new(&[
        "dataset",
        "form",
        "theta",
        "closed_form",
        "constraint_norm",
        "constraint_stderr",
        "log_likelihood",
        "lambda",
        "stages",
        "converged",
    ]);
    let mut outcome = Outcome::new();
    for (i, (fit, diag)) in fits.iter().enumerate() {
        table.push(vec![
            num(i as f64),
            form.name().to_string(),
            num(fit.theta()),
            opt_num(oracle),
            num(diag.constraint.norm()),
            num(diag.constraint.stderr_norm()),
            num(diag.log_likelihood),
            num(diag.lambda),
            num(diag.stages as f64),
            diag.converged.to_string(),
        ]);
        outcome.line(format!(
            "dataset {i}: {} theta {:.6} (closed form {}), |C| {:.3e} vs stderr {:.3e}, lambda {:.0e}, {}",
            form.name(),
            fit.theta(),
            oracle.map(|c| format!("{c:.6}")).unwrap_or_else(|| "none".into()),
            diag.constraint.norm(),
            diag.constraint.stderr_norm(),
            diag.lambda,
            if diag.converged { "converged" } else { "not converged" }
        ));
    }
    outcome.write(out, "solver.csv", &table.to_bytes()?)?;
    Ok(outcome)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn settings(text: &str) -> Settings {
        Settings::parse(text).unwrap()
    }

    #[test]
    fn names_round_trip() {
        for s in Subcommand::ALL {
            assert_eq!(Subcommand::from_name(s.name()), Some(s));
            let keys = s.keys();
            assert!(keys.iter().any(|k| k.0 == "seed"));
            let mut names: Vec<_> = keys.iter().map(|k| k.0).collect();
            names.sort();
            names.dedup();
            assert_eq!(names.len(), keys.len(), "{} has duplicate keys", s.name());
        }
        assert_eq!(Subcommand::from_name("nope"), None);
    }

    #[test]
    fn truth_defaults_by_family() {
        let mut s = settings("");
        assert_eq!(truth(&mut s, FamilyTag::Exponential).unwrap().values(), &[1.0]);
        let mut s = settings("");
        assert_eq!(truth(&mut s, FamilyTag::Gaussian).unwrap().values(), &[0.0, 1.0]);
        let mut s = settings("");
        assert_eq!(truth(&mut s, FamilyTag::OneSidedUniform).unwrap().values(), &[1.0]);
        let mut s = settings("");
        assert_eq!(
            truth(&mut s, FamilyTag::Gmm2).unwrap().values(),
            &[0.0, 2.0, 1.0, 1.0, 0.5]
        );
        let mut s = settings("p = 0.3");
        assert_eq!(truth(&mut s, FamilyTag::Bernoulli).unwrap().values(), &[0.3]);
    }

    #[test]
    fn truth_rejects_foreign_and_invalid_params() {
        let mut s = settings("variance = 2");
        assert_eq!(truth(&mut s, FamilyTag::OneSidedUniform).unwrap_err().exit_code(), 2);
        let mut s = settings("a = -1");
        assert_eq!(truth(&mut s, FamilyTag::OneSidedUniform).unwrap_err().exit_code(), 2);
    }

    #[test]
    fn closed_forms() {
        assert_eq!(closed_form(FamilyTag::OneSidedUniform, ClassForm::ScaledMax, 20), Some(1.05));
        assert_eq!(closed_form(FamilyTag::OneSidedUniform, ClassForm::Linear, 20), Some(0.1));
        assert_eq!(closed_form(FamilyTag::Gaussian, ClassForm::QuadraticCentered, 10), Some(1.0 / 9.0));
        assert_eq!(closed_form(FamilyTag::Gmm2, ClassForm::EmVariance, 10), None);
    }

    #[test]
    fn bias_small_run() {
        let dir = tempfile::tempdir().unwrap();
        let s = settings("family = uniform\nn = 5\ntrials = 2000\nseed = 3");
        let (m, report) = execute(Subcommand::Bias, s, dir.path(), Some(1)).unwrap();
        assert_eq!(m.outputs, vec!["bias.csv"]);
        assert_eq!(report.lines().count(), 3);
        let text = std::fs::read_to_string(dir.path().join("bias.csv")).unwrap();
        assert_eq!(text.lines().count(), 4);
        assert!(text.lines().skip(1).all(|l| l.ends_with(",pass")), "{text}");
        assert_eq!(m.config.get("estimator").map(String::as_str), Some("all"));
    }

    #[test]
    fn unknown_key_is_usage_error() {
        let dir = tempfile::tempdir().unwrap();
        let s = settings("family = uniform\nbogus = 1");
        let e = execute(Subcommand::Bias, s, dir.path(), None).unwrap_err();
        assert_eq!(e.exit_code(), 2);
    }
}
