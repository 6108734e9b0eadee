use proptest::prelude::*;
use robust_online::dist::{hellinger_sq, kl, l2_sq, renyi, tv, Distribution};

fn dist(m: usize, floor: f64) -> impl Strategy<Value = Distribution> {
    prop::collection::vec(0.0f64..1.0, m).prop_filter_map("zero mass", move |raw| {
        let s: f64 = raw.iter().sum();
        if s <= 1e-9 {
            return None;
        }
        let v: Vec<f64> = raw.iter().map(|x| (1.0 - floor * m as f64) * x / s + floor).collect();
        Distribution::new(v).ok()
    })
}

fn pair(floor: f64) -> impl Strategy<Value = (Distribution, Distribution)> {
    (2usize..=6).prop_flat_map(move |m| (dist(m, floor), dist(m, floor)))
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(10_000))]

    #[test]
    fn tv_bounded_by_hellinger((p, q) in pair(0.0)) {
        let h = hellinger_sq(&p, &q).unwrap();
        prop_assert!((0.0..=2.0 + 1e-12).contains(&h));
        let t = tv(&p, &q).unwrap();
        prop_assert!(1.0 - t >= 1.0 - (h * (1.0 - h / 4.0)).max(0.0).sqrt() - 1e-12);
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(2_000))]

    #[test]
    fn renyi_half_matches_hellinger((p, q) in pair(0.01)) {
        let h = hellinger_sq(&p, &q).unwrap();
        let d = renyi(0.5, &p, &q).unwrap();
        prop_assert!((h - 2.0 * (1.0 - (-d / 2.0).exp())).abs() <= 1e-10);
    }

    #[test]
    fn kl_dominates_hellinger((p, q) in pair(0.0)) {
        let k = kl(&p, &q).unwrap();
        prop_assert!(k >= hellinger_sq(&p, &q).unwrap() - 1e-12);
        prop_assert!(k >= 0.0);
    }

    #[test]
    fn symmetric_divergences_are_symmetric((p, q) in pair(0.0)) {
        prop_assert_eq!(l2_sq(&p, &q).unwrap(), l2_sq(&q, &p).unwrap());
        prop_assert!((hellinger_sq(&p, &q).unwrap() - hellinger_sq(&q, &p).unwrap()).abs() <= 1e-15);
        prop_assert!((tv(&p, &q).unwrap() - tv(&q, &p).unwrap()).abs() <= 1e-15);
    }

    #[test]
    fn hellinger_tensorizes((p, q) in (2usize..=4).prop_flat_map(|m| (dist(m, 0.0), dist(m, 0.0))), n in 1i32..=4) {
        let h = hellinger_sq(&p, &q).unwrap();
        let (mut pn, mut qn) = (p.clone(), q.clone());
        for _ in 1..n {
            pn = pn.product(&p);
            qn = qn.product(&q);
        }
        let lhs = hellinger_sq(&pn, &qn).unwrap();
        prop_assert!((lhs - (2.0 - 2.0 * (1.0 - h / 2.0).powi(n))).abs() <= 1e-10);
    }
}

#[test]
fn kl_is_asymmetric_and_infinite_off_support() {
    let p = Distribution::new(vec![0.5, 0.5]).unwrap();
    let q = Distribution::new(vec![1.0, 0.0]).unwrap();
    assert_eq!(kl(&p, &q).unwrap(), f64::INFINITY);
    assert!((kl(&q, &p).unwrap() - 2f64.ln()).abs() < 1e-15);
}
