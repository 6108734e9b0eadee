use std::fs::File;
use std::io::BufWriter;
use std::str::FromStr;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use robust_online::dist::DivergenceKind;
use robust_online::game::{loglog_slope, monte_carlo, CurvePoint, GameInstance};
use robust_online::kernel::{gap, min_pairwise_gap};
use robust_online::pairwise::{constant_budget, tester_error_rate, PairTester, Side, StepOutcome};
use robust_online::verify::{self, Suite};

use crate::config::{ClassConfig, ExperimentConfig, InstanceConfig, KernelConfig};
use crate::output::{line_chart, summary_rows, write_curve, write_summary};
use crate::CliError;

fn create(path: &str) -> Result<BufWriter<File>, CliError> {
    File::create(path)
        .map(BufWriter::new)
        .map_err(|e| CliError::Runtime(format!("cannot write {path}: {e}")))
}

fn curve(cfg: &ExperimentConfig, horizons: &[usize], seed0: u64) -> Result<Vec<CurvePoint>, CliError> {
    horizons
        .iter()
        .map(|&t| {
            let s = monte_carlo(&cfg.experiment(t)?, cfg.runs, seed0, &[0.1])?;
            Ok(CurvePoint {
                horizon: t,
                median: s.median,
                q90: s.quantile(0.1).unwrap_or(f64::NAN),
                mean: s.mean,
            })
        })
        .collect()
}

fn slopes(points: &[CurvePoint]) -> (Option<f64>, Option<f64>) {
    let xy = |f: fn(&CurvePoint) -> f64| -> Vec<(f64, f64)> { points.iter().map(|p| (p.horizon as f64, f(p))).collect() };
    (loglog_slope(&xy(|p| p.median)), loglog_slope(&xy(|p| p.mean)))
}

fn fmt_slope(s: Option<f64>) -> String {
    s.map_or_else(|| "undefined".to_string(), |v| format!("{v:.4}"))
}

pub fn simulate(cfg: &ExperimentConfig, seed0: u64, prefix: &str) -> Result<(), CliError> {
    let exp = cfg.experiment(cfg.horizon)?;
    let s = monte_carlo(&exp, cfg.runs, seed0, &[cfg.delta])?;
    let path = format!("{prefix}_summary.csv");
    write_summary(create(&path)?, &summary_rows(&s))?;
    println!("predictor: {}", s.predictor);
    println!("kernel: {}", s.kernel);
    println!("T: {}  runs: {}", s.horizon, s.runs);
    println!("mean cum_errors: {:.4}", s.mean);
    println!("median cum_errors: {}", s.median);
    println!("{:.4}-quantile cum_errors: {}", 1.0 - cfg.delta, s.quantile(cfg.delta).unwrap_or(f64::NAN));
    if let Some(r) = s.guarantee_rate {
        println!("guarantee event rate: {r:.4}");
    }
    println!("wrote {path}");
    if let Some(ts) = &cfg.sweep_t {
        let pts = curve(cfg, ts, seed0)?;
        let path = format!("{prefix}_curve.csv");
        let rows: Vec<_> = pts.iter().map(|p| (None, *p)).collect();
        write_curve(create(&path)?, None, &rows)?;
        let (m, a) = slopes(&pts);
        println!("log-log slope (median): {}", fmt_slope(m));
        println!("log-log slope (mean): {}", fmt_slope(a));
        println!("wrote {path}");
    }
    Ok(())
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Axis {
    T,
    Eta,
    Alpha,
    K,
}

impl FromStr for Axis {
    type Err = String;
    fn from_str(s: &str) -> Result<Self, String> {
        Ok(match s {
            "T" | "t" => Axis::T,
            "eta" => Axis::Eta,
            "alpha" => Axis::Alpha,
            "K" | "k" => Axis::K,
            _ => return Err(format!("unknown axis `{s}`; expected T, eta, alpha or K")),
        })
    }
}

impl Axis {
    fn name(self) -> &'static str {
        match self {
            Axis::T => "T",
            Axis::Eta => "eta",
            Axis::Alpha => "alpha",
            Axis::K => "K",
        }
    }
}

fn as_count(v: f64, what: &str) -> Result<usize, CliError> {
    if v >= 1.0 && v.fract() == 0.0 && v <= usize::MAX as f64 {
        Ok(v as usize)
    } else {
        Err(CliError::Validation(format!("{what} value {v} must be a positive integer")))
    }
}

/// The configuration with one parameter replaced.
pub fn with_axis(cfg: &ExperimentConfig, axis: Axis, v: f64) -> Result<ExperimentConfig, CliError> {
    let mut c = cfg.clone();
    let bad = || CliError::Validation(format!("axis {} does not apply to this configuration", axis.name()));
    match axis {
        Axis::T => c.horizon = as_count(v, "T")?,
        Axis::Eta => match &mut c.kernel {
            Some(KernelConfig::Massart { eta } | KernelConfig::RandomizedResponse { eta, .. }) => *eta = v,
            _ => return Err(bad()),
        },
        Axis::Alpha => match (&mut c.instance, &mut c.kernel) {
            (Some(InstanceConfig::SoftGap { alpha, .. } | InstanceConfig::Tsybakov { alpha, .. }), _) => *alpha = v,
            (None, Some(KernelConfig::Tsybakov { alpha, lambdas: None, .. })) => *alpha = v,
            _ => return Err(bad()),
        },
        Axis::K => match &mut c.hypothesis_class {
            Some(ClassConfig::Random { k, .. }) => *k = as_count(v, "K")?,
            _ => return Err(bad()),
        },
    }
    Ok(c)
}

pub fn sweep(cfg: &ExperimentConfig, axis: Axis, values: &[f64], seed0: u64, prefix: &str, svg: bool) -> Result<(), CliError> {
    if values.is_empty() {
        return Err(CliError::Validation("sweep needs at least one value".into()));
    }
    let configs = values
        .iter()
        .map(|&v| with_axis(cfg, axis, v))
        .collect::<Result<Vec<_>, _>>()?;
    let mut rows = Vec::new();
    let mut series = Vec::new();
    if axis == Axis::T {
        let horizons: Vec<usize> = configs.iter().map(|c| c.horizon).collect();
        let pts = curve(cfg, &horizons, seed0)?;
        let (m, a) = slopes(&pts);
        for p in &pts {
            println!("T={} median={} q90={} mean={:.4}", p.horizon, p.median, p.q90, p.mean);
        }
        println!("log-log slope (median): {}", fmt_slope(m));
        println!("log-log slope (mean): {}", fmt_slope(a));
        series.push(("median".to_string(), pts.iter().map(|p| (p.horizon as f64, p.median)).collect()));
        series.push(("mean".to_string(), pts.iter().map(|p| (p.horizon as f64, p.mean)).collect()));
        rows.extend(pts.into_iter().map(|p| (None, p)));
    } else {
        let horizons = cfg.sweep_t.clone().unwrap_or_else(|| vec![cfg.horizon]);
        for (c, &v) in configs.iter().zip(values) {
            let pts = curve(c, &horizons, seed0)?;
            for p in &pts {
                println!("{}={v} T={} median={} q90={} mean={:.4}", axis.name(), p.horizon, p.median, p.q90, p.mean);
            }
            if pts.len() > 1 {
                let (m, a) = slopes(&pts);
                println!("{}={v} log-log slope (median): {} (mean): {}", axis.name(), fmt_slope(m), fmt_slope(a));
                series.push((format!("{}={v}", axis.name()), pts.iter().map(|p| (p.horizon as f64, p.median)).collect()));
            }
            rows.extend(pts.into_iter().map(|p| (Some(v), p)));
        }
        if horizons.len() == 1 {
            series.push((
                "median".to_string(),
                rows.iter().map(|(v, p)| (v.unwrap_or(f64::NAN), p.median)).collect(),
            ));
        }
    }
    let path = format!("{prefix}_curve.csv");
    let axis_col = (axis != Axis::T).then(|| axis.name());
    write_curve(create(&path)?, axis_col, &rows)?;
    println!("wrote {path}");
    if svg {
        let over_t = axis == Axis::T || cfg.sweep_t.as_ref().is_some_and(|t| t.len() > 1);
        let x_label = if over_t { "T" } else { axis.name() };
        let chart = line_chart("cumulative errors", x_label, "errors", &series, over_t);
        let path = format!("{prefix}_curve.svg");
        std::fs::write(&path, chart)?;
        println!("wrote {path}");
    }
    Ok(())
}

pub fn gap_report(cfg: &ExperimentConfig) -> Result<(), CliError> {
    let inst = cfg.instance(cfg.horizon)?;
    let features: Vec<usize> = match inst.kernel.num_features() {
        Some(f) => (0..f).collect(),
        None => vec![0],
    };
    println!("kernel: {}", inst.kernel.name());
    for d in [DivergenceKind::L2Sq, DivergenceKind::HellingerSq, DivergenceKind::Tv] {
        let g = min_pairwise_gap(&inst.kernel, &features, d)?;
        let (p, q) = &g.report.argmin_pair;
        println!(
            "{}: gap={:.10} feature={} labels=({},{}) argmin=({:?}, {:?}) iterations={} converged={}",
            d.name(),
            g.report.value,
            g.feature,
            g.labels.0,
            g.labels.1,
            p.probs(),
            q.probs(),
            g.report.iterations,
            g.report.converged
        );
    }
    Ok(())
}

pub struct PairArgs {
    pub feature: usize,
    pub labels: (usize, usize),
    pub truth: Side,
    pub budget: Option<usize>,
    pub seed: u64,
    pub runs: usize,
}

/// Runs one Le Cam-Birgé tester to its decision, plus an optional Monte
/// Carlo error rate.
pub fn test_pair(cfg: &ExperimentConfig, a: &PairArgs) -> Result<(), CliError> {
    let GameInstance { kernel, .. } = cfg.instance(cfg.horizon)?;
    let (l0, l1) = a.labels;
    if l0 == l1 {
        return Err(CliError::Validation("test-pair needs two distinct labels".into()));
    }
    let r = gap(&kernel.kernel_set(a.feature, l0)?, &kernel.kernel_set(a.feature, l1)?, DivergenceKind::HellingerSq)?;
    let budget = match a.budget {
        Some(b) => b,
        None => constant_budget(r.value, cfg.delta)?,
    };
    let (p, q) = &r.argmin_pair;
    let law = if a.truth == Side::First { p } else { q };
    let mut rng = ChaCha8Rng::seed_from_u64(a.seed);
    let mut tester = PairTester::lecam_birge(budget)?;
    let mut steps = 0;
    let decision = loop {
        steps += 1;
        if let StepOutcome::Decided(side) = tester.lecam_birge_step(p, q, law.sample(&mut rng))? {
            break side;
        }
    };
    println!("hellinger gap: {:.10}", r.value);
    println!("budget: {budget}");
    println!("truth: {:?}  decision: {decision:?}  steps: {steps}  correct: {}", a.truth, decision == a.truth);
    if a.runs > 1 {
        let rate = tester_error_rate(&kernel, a.feature, a.labels, budget, a.runs, a.seed)?;
        println!("error rate over {} runs: {rate:.5}", a.runs);
    }
    Ok(())
}

pub fn run_verify(suite: Suite) -> Result<(), CliError> {
    let results = verify::run(suite);
    let mut failed = Vec::new();
    for r in &results {
        let status = match (r.passed, r.informational) {
            (true, _) => "PASS",
            (false, true) => "INFO",
            (false, false) => "FAIL",
        };
        println!(
            "{status} {}/{} trials={} worst_slack={:.3e}",
            r.suite, r.name, r.trials, r.worst_slack
        );
        if !r.ok() {
            failed.push(format!("{}/{}", r.suite, r.name));
        }
    }
    if failed.is_empty() {
        Ok(())
    } else {
        Err(CliError::PropertyFailure(failed.join(", ")))
    }
}
