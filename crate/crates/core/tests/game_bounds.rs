use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use robust_online::dist::{hellinger_sq, kl, l2_sq, random_distribution, DivergenceKind, Distribution, LossKind, LossSpec};
use robust_online::game::*;
use robust_online::kernel::{min_pairwise_gap, NoiseKernel};
use robust_online::pairwise::{bayes_oracle, MetaConfig, TesterKind};
use robust_online::predictors::{ewa_regret_audit, ExpertFunction, Predictor};

fn adversary(noise: NoiseRule, truth: usize) -> AdversaryStrategy {
    AdversaryStrategy {
        feature_rule: FeatureRule::UniformRandom,
        noise_rule: noise,
        ground_truth: TruthRule::Fixed(truth),
    }
}

#[test]
fn l2_reduction_errors_bounded_by_excess_l2() {
    let h = HypothesisClass::random(16, 32, 2, 11).unwrap();
    for eta in [0.1, 0.25, 0.4] {
        let k = NoiseKernel::massart(eta).unwrap();
        let gamma = min_pairwise_gap(&k, &[0], DivergenceKind::L2Sq).unwrap().report.value;
        let proto = PredictorSpec::L2Reduction.build(&h, &k).unwrap();
        for noise in [NoiseRule::LeastFavorable, NoiseRule::UniformMixture, NoiseRule::Vertex(0)] {
            for seed in 0..16u64 {
                let truth = seed as usize % h.len();
                let mut excess = 0.0;
                let tr = run_game_observed(&h, &k, &proto, &adversary(noise.clone(), truth), 400, seed, |v| {
                    let Predictor::L2Reduction(p) = v.predictor else { unreachable!() };
                    let p_hat = p.estimate(v.feature).unwrap();
                    let f = &p.experts()[truth].dist_for[v.feature];
                    excess += l2_sq(v.noise_law, &p_hat).unwrap() - l2_sq(v.noise_law, f).unwrap();
                })
                .unwrap();
                let bound = 4.0 / gamma * excess;
                assert!(
                    tr.cum_errors as f64 <= bound + 1e-9,
                    "eta {eta} seed {seed}: {} errors, bound {bound}",
                    tr.cum_errors
                );
            }
        }
    }
}

#[test]
fn randomized_response_errors_cost_kl() {
    for (eta, m) in [(0.2, 2), (0.5, 2), (0.5, 3), (0.8, 4)] {
        let h = HypothesisClass::random(8, 6, m, 3).unwrap();
        let k = NoiseKernel::randomized_response(eta, m).unwrap();
        let proto = PredictorSpec::LoglossRr.build(&h, &k).unwrap();
        let need = (1.0 - eta) * (1.0 - eta) / 2.0 - 1e-9;
        let mut checked = 0;
        for noise in [NoiseRule::LeastFavorable, NoiseRule::Vertex(1)] {
            for seed in 0..10u64 {
                let truth = seed as usize % h.len();
                run_game_observed(&h, &k, &proto, &adversary(noise.clone(), truth), 300, seed, |v| {
                    if v.predicted_label == v.true_label {
                        return;
                    }
                    let Predictor::LoglossArgmax(p) = v.predictor else { unreachable!() };
                    let p_hat = p.estimate(v.feature).unwrap();
                    let f = &p.experts()[truth].dist_for[v.feature];
                    let diff = kl(v.noise_law, &p_hat).unwrap() - kl(v.noise_law, f).unwrap();
                    assert!(diff >= need, "eta {eta}, M {m}: KL excess {diff} < {need}");
                    checked += 1;
                })
                .unwrap();
            }
        }
        assert!(checked > 0, "no errors observed for eta {eta}");
    }
}

#[test]
fn hellinger_singleton_errors_cost_hellinger() {
    let gamma = 0.2;
    let inst = build_lower_bound_instance(4, gamma, 400).unwrap();
    let proto = PredictorSpec::HellingerSingleton.build(&inst.hclass, &inst.kernel).unwrap();
    for seed in 0..20 {
        run_game_observed(&inst.hclass, &inst.kernel, &proto, &inst.adversary, 400, seed, |v| {
            let Predictor::HellingerSingleton(p) = v.predictor else { unreachable!() };
            let p_hat = p.estimate(v.feature).unwrap();
            let ind = f64::from(u8::from(v.predicted_label != v.true_label));
            assert!(ind <= 4.0 / gamma * hellinger_sq(v.noise_law, &p_hat).unwrap() + 1e-12);
        })
        .unwrap();
    }
}

#[test]
fn ewa_regret_never_exceeds_log_k_over_alpha() {
    let mut rng = ChaCha8Rng::seed_from_u64(77);
    for kind in [LossKind::Log, LossKind::Brier] {
        let spec = LossSpec::new(kind);
        for k in [2usize, 8, 64] {
            for _ in 0..200 {
                let m = rng.gen_range(2..=5);
                let f = rng.gen_range(1..=3);
                let experts: Vec<ExpertFunction> = (0..k)
                    .map(|id| ExpertFunction {
                        id,
                        dist_for: (0..f).map(|_| random_distribution(&mut rng, m)).collect(),
                    })
                    .collect();
                let stream: Vec<(usize, usize)> = (0..50).map(|_| (rng.gen_range(0..f), rng.gen_range(0..m))).collect();
                let r = ewa_regret_audit(&experts, spec, &stream).unwrap();
                assert!(r <= (k as f64).ln() / spec.exp_concavity_alpha + 1e-9, "K={k} {kind:?} regret {r}");
            }
        }
    }
}

#[test]
fn survivors_shrink_and_keep_the_truth_under_the_event() {
    let cases = [
        (build_lower_bound_instance(4, 0.2, 800).unwrap(), 800),
        (
            GameInstance {
                hclass: HypothesisClass::random(16, 32, 2, 5).unwrap(),
                kernel: NoiseKernel::massart(0.25).unwrap(),
                adversary: AdversaryStrategy {
                    feature_rule: FeatureRule::MaxDisagreement { patience: 20 },
                    noise_rule: NoiseRule::LeastFavorable,
                    ground_truth: TruthRule::Uniform,
                },
            },
            600,
        ),
    ];
    for (inst, horizon) in cases {
        for tester in [TesterKind::LeCamBirge, TesterKind::EmpiricalMean] {
            let proto = PredictorSpec::PairwiseMeta(MetaConfig::new(tester, 0.05))
                .build(&inst.hclass, &inst.kernel)
                .unwrap();
            for seed in 0..10 {
                let mut prev: Vec<usize> = (0..inst.hclass.len()).collect();
                let mut history = Vec::new();
                let tr = run_game_observed(&inst.hclass, &inst.kernel, &proto, &inst.adversary, horizon, seed, |v| {
                    let Predictor::PairwiseMeta(m) = v.predictor else { unreachable!() };
                    let now = m.survivors().to_vec();
                    assert!(now.iter().all(|i| prev.contains(i)), "survivor set grew");
                    history.push(now.clone());
                    prev = now;
                })
                .unwrap();
                if tr.guarantee_event_held == Some(true) {
                    assert!(history.iter().all(|s| s.contains(&tr.truth)), "truth eliminated under the event");
                }
            }
        }
    }
}

#[test]
fn results_do_not_depend_on_thread_count() {
    let inst = build_lower_bound_instance(4, 0.2, 400).unwrap();
    let exp = inst.experiment(PredictorSpec::PairwiseMeta(MetaConfig::new(TesterKind::LeCamBirge, 0.05)), 400);
    let one = rayon::ThreadPoolBuilder::new().num_threads(1).build().unwrap();
    let four = rayon::ThreadPoolBuilder::new().num_threads(4).build().unwrap();
    let a = one.install(|| monte_carlo(&exp, 24, 100, &[0.05]).unwrap());
    let b = four.install(|| monte_carlo(&exp, 24, 100, &[0.05]).unwrap());
    assert_eq!(a, b);
    let p = exp.predictor.build(&exp.hclass, &exp.kernel).unwrap();
    let t1 = run_game(&exp.hclass, &exp.kernel, &p, &exp.adversary, 400, 3).unwrap();
    let t2 = run_game(&exp.hclass, &exp.kernel, &p, &exp.adversary, 400, 3).unwrap();
    assert_eq!(serde_json::to_vec(&t1).unwrap(), serde_json::to_vec(&t2).unwrap());
}

#[test]
fn empirical_mean_tester_respects_its_error_count() {
    let delta = 0.05;
    for alpha in [0.25, 0.5] {
        let horizon = 1024;
        let inst = build_tsybakov_instance(alpha, 1.0, horizon).unwrap();
        let NoiseKernel::Tsybakov { lambdas, .. } = &inst.kernel else { unreachable!() };
        let bound = empirical_mean_error_bound(&lambdas[..horizon], delta);
        let exp = inst.experiment(
            PredictorSpec::PairTest {
                tester: TesterKind::EmpiricalMean,
                delta,
            },
            horizon,
        );
        let s = monte_carlo(&exp, 200, 0, &[]).unwrap();
        let within = s.results.iter().filter(|r| r.cum_errors <= bound).count();
        assert!(within as f64 >= 0.95 * 200.0, "alpha {alpha}: {within}/200 within {bound}");
    }
}

/// Bayes risk by grouping histories into count vectors.
fn count_oracle(q0: &Distribution, q1: &Distribution, horizon: usize) -> f64 {
    fn compositions(n: usize, parts: usize) -> Vec<Vec<usize>> {
        if parts == 1 {
            return vec![vec![n]];
        }
        (0..=n)
            .flat_map(|first| {
                compositions(n - first, parts - 1).into_iter().map(move |mut rest| {
                    rest.insert(0, first);
                    rest
                })
            })
            .collect()
    }
    let ln_fact = |n: usize| (1..=n).map(|i| (i as f64).ln()).sum::<f64>();
    let m = q0.len();
    let mut risk = 0.0;
    for t in 0..horizon {
        for c in compositions(t, m) {
            let coef = (ln_fact(t) - c.iter().map(|&n| ln_fact(n)).sum::<f64>()).exp();
            let like = |q: &Distribution| c.iter().enumerate().map(|(i, &n)| q.get(i).powi(n as i32)).product::<f64>();
            risk += 0.5 * coef * like(q0).min(like(q1));
        }
    }
    risk
}

#[test]
fn bayes_oracle_matches_count_dp() {
    let mut rng = ChaCha8Rng::seed_from_u64(8);
    for (m, horizon) in [(2, 8), (3, 5), (4, 4), (2, 1)] {
        for _ in 0..20 {
            let (q0, q1) = (random_distribution(&mut rng, m), random_distribution(&mut rng, m));
            let a = bayes_oracle(&q0, &q1, horizon).unwrap();
            let b = count_oracle(&q0, &q1, horizon);
            assert!((a - b).abs() <= 1e-12 * horizon as f64, "M={m} T={horizon}: {a} vs {b}");
        }
    }
    let (q0, q1) = robust_online::pairwise::hellinger_pair(0.02).unwrap();
    assert!((bayes_oracle(&q0, &q1, 8).unwrap() - count_oracle(&q0, &q1, 8)).abs() < 1e-12);
}
