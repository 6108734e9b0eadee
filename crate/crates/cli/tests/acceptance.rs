//! End-to-end acceptance criteria. Prints one PASS/FAIL line per criterion
//! and exits non-zero if any fails.

use std::process::{Command, ExitCode};
use std::time::{Duration, Instant};

use robust_online::dist::{DivergenceKind, Distribution};
use robust_online::game::*;
use robust_online::kernel::{min_pairwise_gap, NoiseKernel};
use robust_online::pairwise::{bayes_oracle, constant_budget, hellinger_pair, tester_error_rate, MetaConfig, TesterKind};

struct Outcome {
    passed: bool,
    detail: String,
}

fn outcome(passed: bool, detail: String) -> Outcome {
    Outcome { passed, detail }
}

fn massart_experiment(horizon: usize) -> Experiment {
    Experiment {
        hclass: HypothesisClass::random(16, 32, 2, 1).unwrap(),
        kernel: NoiseKernel::massart(0.25).unwrap(),
        predictor: PredictorSpec::L2Reduction,
        adversary: AdversaryStrategy {
            feature_rule: FeatureRule::UniformRandom,
            noise_rule: NoiseRule::LeastFavorable,
            ground_truth: TruthRule::Uniform,
        },
        horizon,
    }
}

fn a1() -> Outcome {
    let start = Instant::now();
    let gamma = min_pairwise_gap(&NoiseKernel::massart(0.25).unwrap(), &[0], DivergenceKind::L2Sq)
        .unwrap()
        .report
        .value;
    let s = monte_carlo(&massart_experiment(2000), 200, 0, &[0.05]).unwrap();
    let bound = 16.0 * 16f64.ln() / gamma;
    let took = start.elapsed();
    outcome(
        s.mean <= bound && took < Duration::from_secs(30),
        format!("mean={:.3} bound={bound:.3} gamma_L={gamma} time={:.1}s", s.mean, took.as_secs_f64()),
    )
}

fn a2() -> Outcome {
    let horizons = [1 << 10, 1 << 14];
    let pts = risk_curve(|t| Ok(massart_experiment(t)), &horizons, 200, 0).unwrap();
    let (m0, m1) = (pts[0].median, pts[1].median);
    let rel = (m1 - m0).abs() / m0.max(m1);
    let slope = loglog_slope(&pts.iter().map(|p| (p.horizon as f64, p.median)).collect::<Vec<_>>());
    let ok = rel < 0.15 && slope.is_some_and(|s| s.abs() < 0.1);
    outcome(ok, format!("median(2^10)={m0} median(2^14)={m1} rel_diff={rel:.3} slope={slope:?}"))
}

fn a3() -> Outcome {
    let eta = 0.5;
    let exp = Experiment {
        hclass: HypothesisClass::random(32, 32, 2, 2).unwrap(),
        kernel: NoiseKernel::randomized_response(eta, 2).unwrap(),
        predictor: PredictorSpec::LoglossRr,
        adversary: AdversaryStrategy {
            feature_rule: FeatureRule::UniformRandom,
            noise_rule: NoiseRule::LeastFavorable,
            ground_truth: TruthRule::Uniform,
        },
        horizon: 2000,
    };
    let s = monte_carlo(&exp, 200, 0, &[0.05]).unwrap();
    let scale = (1.0 - eta) * (1.0 - eta) / 4.0;
    let mean_bound = 32f64.ln() / 0.125;
    let q_bound = (32f64.ln() + 2.0 * 20f64.ln()) / scale;
    let q = s.quantile(0.05).unwrap();
    outcome(
        s.mean <= mean_bound && q <= q_bound,
        format!("mean={:.3} bound={mean_bound:.3} q95={q} bound={q_bound:.3}", s.mean),
    )
}

fn a4() -> Outcome {
    let start = Instant::now();
    let (k, delta, gamma_h) = (16.0f64, 0.05, 0.2);
    let (q0, q1) = hellinger_pair(gamma_h).unwrap();
    let exp = Experiment {
        hclass: HypothesisClass::cube(4).unwrap(),
        kernel: NoiseKernel::singleton(vec![vec![q0, q1]; 4]).unwrap(),
        predictor: PredictorSpec::PairwiseMeta(MetaConfig::new(TesterKind::LeCamBirge, delta)),
        adversary: AdversaryStrategy {
            feature_rule: FeatureRule::EpochConstant {
                features: vec![0, 1, 2, 3],
                epoch_len: 500,
            },
            noise_rule: NoiseRule::Vertex(0),
            ground_truth: TruthRule::Uniform,
        },
        horizon: 2000,
    };
    let s = monte_carlo(&exp, 1000, 0, &[0.05]).unwrap();
    let bound = 8.0 * (4.0 * k / delta).ln() * k.ln() / gamma_h + (2.0 / delta).ln();
    let freq = s.results.iter().filter(|r| r.cum_errors as f64 <= bound).count() as f64 / s.runs as f64;
    let took = start.elapsed();
    outcome(
        freq >= 0.95 && took < Duration::from_secs(120),
        format!(
            "freq(cum<=bound)={freq:.3} bound={bound:.2} mean={:.2} q95={} time={:.1}s",
            s.mean,
            s.quantile(0.05).unwrap(),
            took.as_secs_f64()
        ),
    )
}

fn a5() -> Outcome {
    let kernel = NoiseKernel::massart(0.25).unwrap();
    let gamma_h = min_pairwise_gap(&kernel, &[0], DivergenceKind::HellingerSq).unwrap().report.value;
    let budget = constant_budget(gamma_h, 0.1).unwrap();
    let rate = tester_error_rate(&kernel, 0, (0, 1), budget, 10_000, 0).unwrap();
    outcome(rate <= 0.11, format!("gamma_H={gamma_h:.6} budget={budget} error_rate={rate:.4} limit=0.11"))
}

/// Bayes risk summed over rounds by grouping binary histories by their
/// count of ones.
fn binomial_dp(q0: &Distribution, q1: &Distribution, horizon: usize) -> f64 {
    let mut risk = 0.0;
    for t in 0..horizon {
        let mut choose = 1.0;
        for ones in 0..=t {
            let like = |q: &Distribution| q.get(1).powi(ones as i32) * q.get(0).powi((t - ones) as i32);
            risk += 0.5 * choose * like(q0).min(like(q1));
            choose = choose * (t - ones) as f64 / (ones + 1) as f64;
        }
    }
    risk
}

fn a6() -> Outcome {
    let (tau, gamma) = (4, 0.02);
    let floor = 0.05 * tau as f64 / gamma;
    let inst = build_lower_bound_instance(tau, gamma, 2000).unwrap();
    let specs = [
        PredictorSpec::HellingerSingleton,
        PredictorSpec::L2Reduction,
        PredictorSpec::LoglossRr,
        PredictorSpec::PairwiseMeta(MetaConfig::new(TesterKind::LeCamBirge, 0.05)),
        PredictorSpec::PairwiseMeta(MetaConfig::new(TesterKind::EmpiricalMean, 0.05)),
    ];
    let mut ok = true;
    let mut parts = Vec::new();
    for spec in specs {
        let s = monte_carlo(&inst.experiment(spec, 2000), 200, 0, &[]).unwrap();
        ok &= s.mean >= floor;
        let tag = match spec {
            PredictorSpec::PairwiseMeta(c) => format!("pairwise-meta/{:?}", c.tester),
            other => other.name().to_string(),
        };
        parts.push(format!("{tag}={:.1}", s.mean));
    }
    let (q0, q1) = hellinger_pair(gamma).unwrap();
    let mut worst = 0.0f64;
    for t in 1..=8 {
        worst = worst.max((bayes_oracle(&q0, &q1, t).unwrap() - binomial_dp(&q0, &q1, t)).abs());
    }
    ok &= worst <= 1e-12;
    outcome(
        ok,
        format!("floor={floor} means[{}] oracle_vs_dp_max_abs_diff={worst:.2e}", parts.join(" ")),
    )
}

fn a7() -> Outcome {
    let horizons: Vec<usize> = (8..=13).map(|e| 1usize << e).collect();
    let mut ok = true;
    let mut parts = Vec::new();
    for alpha in [0.25, 0.5] {
        let target = 2.0 * (1.0 - alpha) / (2.0 - alpha);
        let spec = PredictorSpec::PairTest {
            tester: TesterKind::EmpiricalMean,
            delta: 0.05,
        };
        let pts = risk_curve(|t| Ok(build_tsybakov_instance(alpha, 1.0, t)?.experiment(spec, t)), &horizons, 200, 0).unwrap();
        let slope = loglog_slope(&pts.iter().map(|p| (p.horizon as f64, p.mean)).collect::<Vec<_>>());
        ok &= slope.is_some_and(|s| (s - target).abs() <= 0.15);
        parts.push(format!("tsybakov(alpha={alpha}) slope={slope:.3?} target={target:.3}"));
    }
    for alpha in [0.25, 0.5] {
        let target = 1.0 - alpha;
        let spec = PredictorSpec::HellingerSingleton;
        let pts = risk_curve(|t| Ok(build_soft_gap_instance(alpha, 1.0, t)?.experiment(spec, t)), &horizons, 400, 0).unwrap();
        let slope = loglog_slope(&pts.iter().map(|p| (p.horizon as f64, p.median)).collect::<Vec<_>>());
        ok &= slope.is_some_and(|s| (s - target).abs() <= 0.15);
        parts.push(format!("soft-gap(alpha={alpha}) slope={slope:.3?} target={target:.3}"));
    }
    outcome(ok, parts.join("; "))
}

fn a8() -> Outcome {
    let start = Instant::now();
    let out = Command::new(env!("CARGO_BIN_EXE_robust-online"))
        .args(["verify", "all"])
        .output()
        .expect("binary runs");
    let took = start.elapsed();
    let text = String::from_utf8_lossy(&out.stdout);
    let failures: Vec<&str> = text.lines().filter(|l| l.starts_with("FAIL")).collect();
    outcome(
        out.status.success() && failures.is_empty() && took < Duration::from_secs(5),
        format!(
            "exit={:?} properties={} failures={} time={:.2}s",
            out.status.code(),
            text.lines().count(),
            failures.len(),
            took.as_secs_f64()
        ),
    )
}

fn main() -> ExitCode {
    let criteria: [(&str, fn() -> Outcome); 8] = [
        ("A1", a1),
        ("A2", a2),
        ("A3", a3),
        ("A4", a4),
        ("A5", a5),
        ("A6", a6),
        ("A7", a7),
        ("A8", a8),
    ];
    let mut all = true;
    for (name, f) in criteria {
        let o = f();
        all &= o.passed;
        println!("{name} {} {}", if o.passed { "PASS" } else { "FAIL" }, o.detail);
    }
    if all {
        ExitCode::SUCCESS
    } else {
        ExitCode::FAILURE
    }
}
