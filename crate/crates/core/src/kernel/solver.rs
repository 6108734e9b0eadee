//! Exact and iterative minimizers behind [`super::gap`] and [`super::project_l2`].

use std::cell::Cell;

use minilp::{ComparisonOp, OptimizationDirection, Problem};
use nalgebra::{DMatrix, DVector};

use crate::dist::{raw_hellinger_sq, raw_l2_sq};
use crate::error::{Error, Result};

pub const MAX_ITERATIONS: usize = 100_000;
const WOLFE_TOL: f64 = 1e-13;
const WOLFE_POS: f64 = 1e-15;
const GOLDEN_TOL: f64 = 1e-12;
const FW_TOL: f64 = 1e-10;

/// Minimum-norm point of a finite point cloud's convex hull.
#[derive(Debug, Clone)]
pub struct MinNorm {
    /// Barycentric weights, one per input point.
    pub weights: Vec<f64>,
    pub point: Vec<f64>,
    pub iterations: usize,
    pub converged: bool,
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

fn combine(points: &[Vec<f64>], idx: &[usize], lambda: &[f64]) -> Vec<f64> {
    let mut x = vec![0.0; points[0].len()];
    for (&i, &l) in idx.iter().zip(lambda) {
        for (xm, pm) in x.iter_mut().zip(&points[i]) {
            *xm += l * pm;
        }
    }
    x
}

/// Minimizer of `||Σ a_i y_i||²` subject to `Σ a_i = 1` over the corral.
fn affine_minimizer(points: &[Vec<f64>], idx: &[usize]) -> Vec<f64> {
    let k = idx.len();
    let mut kkt = DMatrix::<f64>::zeros(k + 1, k + 1);
    for a in 0..k {
        for b in a..k {
            let g = dot(&points[idx[a]], &points[idx[b]]);
            kkt[(a, b)] = g;
            kkt[(b, a)] = g;
        }
        kkt[(a, k)] = 1.0;
        kkt[(k, a)] = 1.0;
    }
    let mut rhs = DVector::<f64>::zeros(k + 1);
    rhs[k] = 1.0;
    let svd = kkt.svd(true, true);
    match svd.solve(&rhs, 1e-14) {
        Ok(sol) => {
            let a: Vec<f64> = (0..k).map(|i| sol[i]).collect();
            let s: f64 = a.iter().sum();
            if s.is_finite() && s.abs() > 1e-12 {
                a.iter().map(|v| v / s).collect()
            } else {
                vec![1.0 / k as f64; k]
            }
        }
        Err(_) => vec![1.0 / k as f64; k],
    }
}

/// Wolfe's minimum-norm-point algorithm.
pub fn min_norm_point(points: &[Vec<f64>]) -> MinNorm {
    assert!(!points.is_empty(), "min_norm_point needs at least one point");
    let n = points.len();
    let scale = points
        .iter()
        .map(|p| dot(p, p))
        .fold(0.0f64, f64::max)
        .max(1e-300);

    let start = (0..n)
        .min_by(|&a, &b| dot(&points[a], &points[a]).total_cmp(&dot(&points[b], &points[b])))
        .expect("nonempty");
    let mut corral = vec![start];
    let mut lambda = vec![1.0];
    let mut x = points[start].clone();
    let mut iterations = 0;
    let mut converged = false;

    while iterations < MAX_ITERATIONS {
        iterations += 1;
        let xx = dot(&x, &x);
        let (j, xj) = (0..n)
            .map(|j| (j, dot(&x, &points[j])))
            .fold((0, f64::INFINITY), |best, cur| if cur.1 < best.1 { cur } else { best });
        if xx - xj <= WOLFE_TOL * scale {
            converged = true;
            break;
        }
        if corral.contains(&j) {
            // No further progress is possible in floating point.
            converged = xx - xj <= 1e-9 * scale;
            break;
        }
        corral.push(j);
        lambda.push(0.0);

        loop {
            iterations += 1;
            let alpha = affine_minimizer(points, &corral);
            if alpha.iter().all(|&a| a > WOLFE_POS) {
                lambda = alpha;
                break;
            }
            let mut theta = 1.0f64;
            for (l, a) in lambda.iter().zip(&alpha) {
                if *a <= WOLFE_POS {
                    let denom = l - a;
                    if denom > 0.0 {
                        theta = theta.min(l / denom);
                    } else {
                        theta = 0.0;
                    }
                }
            }
            for (l, a) in lambda.iter_mut().zip(&alpha) {
                *l = theta * a + (1.0 - theta) * *l;
            }
            let mut keep_c = Vec::with_capacity(corral.len());
            let mut keep_l = Vec::with_capacity(corral.len());
            for (c, l) in corral.iter().zip(&lambda) {
                if *l > WOLFE_POS {
                    keep_c.push(*c);
                    keep_l.push(*l);
                }
            }
            if keep_c.is_empty() {
                // Numerical collapse; restart from the best single vertex.
                keep_c.push(j);
                keep_l.push(1.0);
            }
            let s: f64 = keep_l.iter().sum();
            keep_l.iter_mut().for_each(|l| *l /= s);
            corral = keep_c;
            lambda = keep_l;
            if corral.len() == 1 {
                break;
            }
        }
        x = combine(points, &corral, &lambda);
    }

    let mut weights = vec![0.0; n];
    for (&c, &l) in corral.iter().zip(&lambda) {
        weights[c] += l;
    }
    MinNorm {
        point: combine(points, &corral, &lambda),
        weights,
        iterations,
        converged,
    }
}

/// Generators of a set as raw probability rows.
pub(crate) type Rows = Vec<Vec<f64>>;

pub(crate) fn mix(rows: &[Vec<f64>], w: &[f64]) -> Vec<f64> {
    let mut out = vec![0.0; rows[0].len()];
    for (r, wi) in rows.iter().zip(w) {
        if *wi == 0.0 {
            continue;
        }
        for (o, v) in out.iter_mut().zip(r) {
            *o += wi * v;
        }
    }
    out
}

/// Weights over the generators of each set at the minimizing pair.
#[derive(Debug, Clone)]
pub(crate) struct PairSolution {
    pub w1: Vec<f64>,
    pub w2: Vec<f64>,
    pub iterations: usize,
    pub converged: bool,
}

/// Weights for a point on a 1- or 2-generator set at parameter `s`.
fn seg_weights(n: usize, s: f64) -> Vec<f64> {
    if n == 1 {
        vec![1.0]
    } else {
        vec![1.0 - s, s]
    }
}

/// Exact L² minimization between two sets with at most two generators each,
/// by enumerating the stationary point of the box quadratic and its four edges.
pub(crate) fn l2_box_qp(g1: &Rows, g2: &Rows) -> PairSolution {
    let a0 = &g1[0];
    let b0 = &g2[0];
    let da: Vec<f64> = if g1.len() == 2 {
        g1[1].iter().zip(a0).map(|(x, y)| x - y).collect()
    } else {
        vec![0.0; a0.len()]
    };
    let db: Vec<f64> = if g2.len() == 2 {
        g2[1].iter().zip(b0).map(|(x, y)| x - y).collect()
    } else {
        vec![0.0; b0.len()]
    };
    let u: Vec<f64> = a0.iter().zip(b0).map(|(x, y)| x - y).collect();
    let aa = dot(&da, &da);
    let bb = dot(&db, &db);
    let ab = dot(&da, &db);
    let ua = dot(&u, &da);
    let ub = dot(&u, &db);
    // f(s,t) = |u + s da - t db|²
    let f = |s: f64, t: f64| {
        aa * s * s + bb * t * t + dot(&u, &u) + 2.0 * s * ua - 2.0 * t * ub - 2.0 * s * t * ab
    };
    let clamp = |v: f64| v.clamp(0.0, 1.0);
    let best_t = |s: f64| if bb > 0.0 { clamp((ub + s * ab) / bb) } else { 0.0 };
    let best_s = |t: f64| if aa > 0.0 { clamp((t * ab - ua) / aa) } else { 0.0 };

    let mut cands: Vec<(f64, f64)> = Vec::with_capacity(5);
    let det = aa * bb - ab * ab;
    if det > 1e-18 * (aa * bb).max(1e-300) && aa > 0.0 && bb > 0.0 {
        let s = (ab * ub - bb * ua) / det;
        let t = (aa * ub - ab * ua) / det;
        if (0.0..=1.0).contains(&s) && (0.0..=1.0).contains(&t) {
            cands.push((s, t));
        }
    }
    for s in [0.0, 1.0] {
        cands.push((s, best_t(s)));
    }
    for t in [0.0, 1.0] {
        cands.push((best_s(t), t));
    }
    let mut best = cands[0];
    let mut best_v = f64::INFINITY;
    for &(s, t) in &cands {
        let v = f(s, t);
        if v < best_v - 1e-18 {
            best = (s, t);
            best_v = v;
        }
    }
    PairSolution {
        w1: seg_weights(g1.len(), best.0),
        w2: seg_weights(g2.len(), best.1),
        iterations: cands.len(),
        converged: true,
    }
}

/// Exact L² minimization between two hulls via the minimum-norm point of
/// the difference hull `{a_i - b_j}`.
pub(crate) fn l2_wolfe(g1: &Rows, g2: &Rows) -> PairSolution {
    let n1 = g1.len();
    let n2 = g2.len();
    let mut diffs = Vec::with_capacity(n1 * n2);
    for a in g1 {
        for b in g2 {
            diffs.push(a.iter().zip(b).map(|(x, y)| x - y).collect::<Vec<f64>>());
        }
    }
    let mn = min_norm_point(&diffs);
    let mut w1 = vec![0.0; n1];
    let mut w2 = vec![0.0; n2];
    for i in 0..n1 {
        for j in 0..n2 {
            let m = mn.weights[i * n2 + j];
            w1[i] += m;
            w2[j] += m;
        }
    }
    PairSolution {
        w1,
        w2,
        iterations: mn.iterations,
        converged: mn.converged,
    }
}

/// Golden-section search for the minimum of a convex function on `[0, 1]`.
/// The endpoints are always evaluated, so boundary minima are exact.
pub(crate) fn golden_min(f: impl Fn(f64) -> f64, evals: &mut usize) -> (f64, f64) {
    const INV_PHI: f64 = 0.618_033_988_749_894_9;
    let (mut lo, mut hi) = (0.0f64, 1.0f64);
    let mut c = hi - INV_PHI * (hi - lo);
    let mut d = lo + INV_PHI * (hi - lo);
    let mut fc = f(c);
    let mut fd = f(d);
    *evals += 2;
    while hi - lo > GOLDEN_TOL {
        if fc <= fd {
            hi = d;
            d = c;
            fd = fc;
            c = hi - INV_PHI * (hi - lo);
            fc = f(c);
        } else {
            lo = c;
            c = d;
            fc = fd;
            d = lo + INV_PHI * (hi - lo);
            fd = f(d);
        }
        *evals += 1;
    }
    let mid = 0.5 * (lo + hi);
    let mut best = (mid, f(mid));
    for x in [0.0, 1.0] {
        let v = f(x);
        if v < best.1 {
            best = (x, v);
        }
    }
    *evals += 3;
    best
}

/// Minimizes a jointly convex `div` over two sets with at most two
/// generators each by nested golden-section search.
pub(crate) fn nested_golden(g1: &Rows, g2: &Rows, div: fn(&[f64], &[f64]) -> f64) -> PairSolution {
    let evals = Cell::new(0usize);
    let eval = |s: f64, t: f64| {
        evals.set(evals.get() + 1);
        let p = mix(g1, &seg_weights(g1.len(), s));
        let q = mix(g2, &seg_weights(g2.len(), t));
        div(&p, &q)
    };
    let inner = |s: f64| -> (f64, f64) {
        if g2.len() == 1 {
            (0.0, eval(s, 0.0))
        } else {
            golden_min(|t| eval(s, t), &mut 0)
        }
    };
    let s = if g1.len() == 1 {
        0.0
    } else {
        golden_min(|s| inner(s).1, &mut 0).0
    };
    let t = inner(s).0;
    PairSolution {
        w1: seg_weights(g1.len(), s),
        w2: seg_weights(g2.len(), t),
        iterations: evals.get(),
        converged: true,
    }
}

/// Derivative of `H²(p, q)` in `p[m]`, with a large finite stand-in for the
/// `-∞` that appears where `p[m] = 0 < q[m]`.
fn hellinger_grad(p: &[f64], q: &[f64]) -> Vec<f64> {
    p.iter()
        .zip(q)
        .map(|(a, b)| {
            if *a > 0.0 {
                1.0 - (b / a).sqrt()
            } else if *b > 0.0 {
                -1e12
            } else {
                1.0
            }
        })
        .collect()
}

/// One pairwise Frank-Wolfe step on a block of mixture weights. Returns the
/// block's Frank-Wolfe gap before the step.
fn pairwise_fw_step(
    rows: &Rows,
    w: &mut [f64],
    grad: &[f64],
    objective: impl Fn(&[f64]) -> f64,
    evals: &mut usize,
) -> f64 {
    let scores: Vec<f64> = rows.iter().map(|r| dot(r, grad)).collect();
    let cur: f64 = scores.iter().zip(w.iter()).map(|(s, wi)| s * wi).sum();
    let (fw, fw_score) = scores
        .iter()
        .enumerate()
        .fold((0, f64::INFINITY), |b, (i, &s)| if s < b.1 { (i, s) } else { b });
    let away = scores
        .iter()
        .enumerate()
        .filter(|(i, _)| w[*i] > 0.0)
        .fold((fw, f64::NEG_INFINITY), |b, (i, &s)| if s > b.1 { (i, s) } else { b })
        .0;
    let gap = cur - fw_score;
    if away == fw {
        return gap;
    }
    let cap = w[away];
    let base = w.to_vec();
    let at = |theta: f64| {
        let mut v = base.clone();
        v[fw] += theta * cap;
        v[away] -= theta * cap;
        v
    };
    let (theta, _) = golden_min(|th| objective(&mix(rows, &at(th))), evals);
    let next = at(theta);
    w.copy_from_slice(&next);
    w[away] = w[away].max(0.0);
    gap
}

/// Pairwise Frank-Wolfe on `H²` over two hulls, alternating between blocks.
pub(crate) fn hellinger_frank_wolfe(g1: &Rows, g2: &Rows) -> PairSolution {
    let mut w1 = vec![1.0 / g1.len() as f64; g1.len()];
    let mut w2 = vec![1.0 / g2.len() as f64; g2.len()];
    let mut evals = 0usize;
    let mut converged = false;
    let mut iterations = 0;
    while iterations < MAX_ITERATIONS {
        iterations += 1;
        let q = mix(g2, &w2);
        let p = mix(g1, &w1);
        let g_p = hellinger_grad(&p, &q);
        let gap1 = pairwise_fw_step(g1, &mut w1, &g_p, |pp| raw_hellinger_sq(pp, &q), &mut evals);
        let p = mix(g1, &w1);
        let g_q = hellinger_grad(&q, &p);
        let gap2 = pairwise_fw_step(g2, &mut w2, &g_q, |qq| raw_hellinger_sq(&p, qq), &mut evals);
        if gap1 + gap2 <= FW_TOL {
            converged = true;
            break;
        }
    }
    PairSolution {
        w1,
        w2,
        iterations,
        converged,
    }
}

/// Total variation minimization over two hulls as a linear program:
/// minimize `½ Σ d_m` subject to `d ≥ |P w - Q v|` with `w`, `v` in simplices.
pub(crate) fn tv_lp(g1: &Rows, g2: &Rows) -> Result<PairSolution> {
    let m = g1[0].len();
    let mut lp = Problem::new(OptimizationDirection::Minimize);
    let w: Vec<_> = g1.iter().map(|_| lp.add_var(0.0, (0.0, 1.0))).collect();
    let v: Vec<_> = g2.iter().map(|_| lp.add_var(0.0, (0.0, 1.0))).collect();
    let d: Vec<_> = (0..m).map(|_| lp.add_var(0.5, (0.0, f64::INFINITY))).collect();
    for k in 0..m {
        for sign in [1.0, -1.0] {
            let mut expr = vec![(d[k], 1.0)];
            expr.extend(w.iter().zip(g1).map(|(var, r)| (*var, -sign * r[k])));
            expr.extend(v.iter().zip(g2).map(|(var, r)| (*var, sign * r[k])));
            lp.add_constraint(&expr[..], ComparisonOp::Ge, 0.0);
        }
    }
    lp.add_constraint(&w.iter().map(|x| (*x, 1.0)).collect::<Vec<_>>()[..], ComparisonOp::Eq, 1.0);
    lp.add_constraint(&v.iter().map(|x| (*x, 1.0)).collect::<Vec<_>>()[..], ComparisonOp::Eq, 1.0);
    let sol = lp
        .solve()
        .map_err(|e| Error::InvalidParameter(format!("TV linear program failed: {e}")))?;
    let clean = |vars: &[minilp::Variable]| -> Vec<f64> {
        let raw: Vec<f64> = vars.iter().map(|x| sol[*x].max(0.0)).collect();
        let s: f64 = raw.iter().sum();
        raw.iter().map(|x| x / s).collect()
    };
    Ok(PairSolution {
        w1: clean(&w),
        w2: clean(&v),
        iterations: m + g1.len() + g2.len(),
        converged: true,
    })
}

/// Exact L² projection of `p` onto a segment by clamping the scalar parameter.
pub(crate) fn project_segment(p: &[f64], a: &[f64], b: &[f64]) -> f64 {
    let ba: Vec<f64> = b.iter().zip(a).map(|(x, y)| x - y).collect();
    let pa: Vec<f64> = p.iter().zip(a).map(|(x, y)| x - y).collect();
    let denom = dot(&ba, &ba);
    if denom == 0.0 {
        return 0.0;
    }
    (dot(&pa, &ba) / denom).clamp(0.0, 1.0)
}

pub(crate) fn l2(p: &[f64], q: &[f64]) -> f64 {
    raw_l2_sq(p, q)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn min_norm_of_simplex_vertices_is_centroid() {
        let pts = vec![vec![1.0, 0.0, 0.0], vec![0.0, 1.0, 0.0], vec![0.0, 0.0, 1.0]];
        let mn = min_norm_point(&pts);
        assert!(mn.converged);
        for w in &mn.weights {
            assert!((w - 1.0 / 3.0).abs() < 1e-12);
        }
    }

    #[test]
    fn min_norm_containing_origin_is_zero() {
        let pts = vec![vec![1.0, 1.0], vec![-1.0, 0.5], vec![0.0, -2.0]];
        let mn = min_norm_point(&pts);
        assert!(dot(&mn.point, &mn.point) < 1e-20);
    }

    #[test]
    fn min_norm_on_segment_matches_projection() {
        let pts = vec![vec![1.0, 2.0], vec![3.0, -1.0]];
        let mn = min_norm_point(&pts);
        let t = project_segment(&[0.0, 0.0], &pts[0], &pts[1]);
        assert!((mn.weights[1] - t).abs() < 1e-12);
    }

    #[test]
    fn box_qp_agrees_with_wolfe() {
        let g1 = vec![vec![0.9, 0.1, 0.0], vec![0.2, 0.3, 0.5]];
        let g2 = vec![vec![0.0, 0.2, 0.8], vec![0.1, 0.8, 0.1]];
        let a = l2_box_qp(&g1, &g2);
        let b = l2_wolfe(&g1, &g2);
        let va = l2(&mix(&g1, &a.w1), &mix(&g2, &a.w2));
        let vb = l2(&mix(&g1, &b.w1), &mix(&g2, &b.w2));
        assert!((va - vb).abs() < 1e-12, "{va} vs {vb}");
    }

    #[test]
    fn golden_finds_interior_and_boundary_minima() {
        let mut n = 0;
        let (x, _) = golden_min(|x| (x - 0.3) * (x - 0.3), &mut n);
        assert!((x - 0.3).abs() < 1e-9);
        let (x, _) = golden_min(|x| x, &mut n);
        assert_eq!(x, 0.0);
        let (x, _) = golden_min(|x| -x, &mut n);
        assert_eq!(x, 1.0);
    }
}
