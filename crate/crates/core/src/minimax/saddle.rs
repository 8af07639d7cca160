//! Saddle point of `beta_eps(P x W, P x Q)`: convex in the input law `P`,
//! concave in the reference output law `Q`.
//!
//! Both one-sided optima are evaluated exactly through the LP dual
//!
//! ```text
//! beta_eps(P x W, P x Q) = max_{l >= 0} l (1 - eps) - sum_x P(x) sum_y (l W(y|x) - Q(y))^+
//! ```
//!
//! which is piecewise linear in `l`, so the maximizing `l` sits at a kink.
//!
//! * `upper(P) = max_Q beta`: for fixed `l` the best `Q` is a greedy water-fill
//!   over per-output segments, giving `upper(P) = max_l benefit(l) - eps l`
//!   with kinks at `1 / L_j`.
//! * `lower(Q) = min_P beta = max_l l (1 - eps) - max_x g_x(l)` by the minimax
//!   theorem over the simplex; kinks are the breakpoints `Q(y)/W(y|x)` and the
//!   crossings of the `g_x`.
//!
//! The outer problems run projected subgradient steps, followed for small
//! alphabets by nested golden-section searches, which are valid because
//! partial minimization (maximization) preserves convexity (concavity).

use serde::{Deserialize, Serialize};

use crate::channel::{Channel, Distribution};
use crate::error::{Error, Result};

pub const DEFAULT_SADDLE_TOL: f64 = 1e-4;
const SUBGRADIENT_ITERATIONS: usize = 4000;
const REFINE_MAX_ALPHABET: usize = 4;
const RATE_TIE: f64 = 1e-13;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SaddleResult {
    pub p_star: Distribution,
    pub q_star: Distribution,
    /// `max_Q beta` at `p_star`; an upper bound on the min-max value.
    pub minmax_value: f64,
    /// `min_P beta` at `q_star`; a lower bound on the max-min value.
    pub maxmin_value: f64,
    pub gap: f64,
    pub eps: f64,
    pub tol: f64,
    pub iterations: usize,
    pub refined: bool,
    pub converged: bool,
}

/// Exact `max_Q beta_eps(P x W, P x Q)` with a maximizing `Q`.
#[derive(Debug, Clone)]
pub struct UpperEval {
    pub value: f64,
    pub lambda: f64,
    pub q: Vec<f64>,
    /// A subgradient of `P -> upper(P)`.
    pub subgradient: Vec<f64>,
}

struct Segment {
    y: usize,
    len: f64,
    rate: f64,
}

pub fn upper_eval(w: &Channel, p: &[f64], eps: f64) -> UpperEval {
    let (nx, ny) = (w.input_size(), w.output_size());
    let mut segs: Vec<Segment> = Vec::new();
    let mut col: Vec<(f64, f64)> = Vec::with_capacity(nx);
    for y in 0..ny {
        col.clear();
        col.extend((0..nx).map(|x| (w.prob(x, y), p[x])));
        col.sort_by(|a, b| a.0.total_cmp(&b.0));
        let mut prev = 0.0;
        let mut i = 0;
        while i < col.len() {
            let level = col[i].0;
            let rate: f64 = col[i..].iter().map(|c| c.1).sum();
            if level > prev && rate > 0.0 {
                segs.push(Segment {
                    y,
                    len: level - prev,
                    rate,
                });
            }
            prev = prev.max(level);
            while i < col.len() && col[i].0 == level {
                i += 1;
            }
        }
    }
    segs.sort_by(|a, b| b.rate.total_cmp(&a.rate));

    // groups of (nearly) equal rate: (start, end, total length, rate)
    let mut groups: Vec<(usize, usize, f64, f64)> = Vec::new();
    for (i, s) in segs.iter().enumerate() {
        match groups.last_mut() {
            Some(g) if (g.3 - s.rate).abs() <= RATE_TIE => {
                g.1 = i + 1;
                g.2 += s.len;
            }
            _ => groups.push((i, i + 1, s.len, s.rate)),
        }
    }

    let benefit = |lambda: f64| -> f64 {
        let mut left = 1.0;
        let mut b = 0.0;
        for g in &groups {
            let take = (lambda * g.2).min(left);
            b += g.3 * take;
            left -= take;
            if left <= 0.0 {
                break;
            }
        }
        b
    };
    let mut best = (0.0, 0.0);
    let mut cum = 0.0;
    for g in &groups {
        cum += g.2;
        let lambda = 1.0 / cum;
        let v = benefit(lambda) - eps * lambda;
        if v > best.0 {
            best = (v, lambda);
        }
    }
    let (value, lambda) = best;

    // maximizing Q: fill the groups in rate order, proportionally inside a group
    let mut q = vec![0.0; ny];
    let mut left = 1.0;
    for g in &groups {
        if left <= 0.0 {
            break;
        }
        let take = (lambda * g.2).min(left);
        for s in &segs[g.0..g.1] {
            q[s.y] += take * s.len / g.2;
        }
        left -= take;
    }
    if left > 0.0 {
        // zero benefit from here on; spread along the output law
        for y in 0..ny {
            let py: f64 = (0..nx).map(|x| p[x] * w.prob(x, y)).sum();
            q[y] += left * py;
        }
    }
    let subgradient = (0..nx)
        .map(|x| -(0..ny).map(|y| (lambda * w.prob(x, y) - q[y]).max(0.0)).sum::<f64>())
        .collect();
    UpperEval {
        value,
        lambda,
        q,
        subgradient,
    }
}

/// Exact `min_P beta_eps(P x W, P x Q)`.
#[derive(Debug, Clone)]
pub struct LowerEval {
    pub value: f64,
    pub lambda: f64,
    /// An input attaining `max_x g_x(lambda)`.
    pub active_x: usize,
    /// A supergradient of `Q -> lower(Q)`.
    pub supergradient: Vec<f64>,
}

fn g_x(w: &Channel, q: &[f64], x: usize, lambda: f64) -> f64 {
    w.row(x)
        .iter()
        .zip(q)
        .map(|(&wy, &qy)| (lambda * wy - qy).max(0.0))
        .sum()
}

pub fn lower_eval(w: &Channel, q: &[f64], eps: f64) -> LowerEval {
    let nx = w.input_size();
    let h = |lambda: f64| -> (f64, usize) {
        let mut top = f64::NEG_INFINITY;
        let mut arg = 0;
        for x in 0..nx {
            let g = g_x(w, q, x, lambda);
            if g > top {
                top = g;
                arg = x;
            }
        }
        (lambda * (1.0 - eps) - top, arg)
    };
    let mut breaks: Vec<f64> = Vec::new();
    for x in 0..nx {
        for (&wy, &qy) in w.row(x).iter().zip(q) {
            if wy > 0.0 {
                breaks.push(qy / wy);
            }
        }
    }
    breaks.push(0.0);
    breaks.sort_by(f64::total_cmp);
    breaks.dedup();

    let mut candidates = breaks.clone();
    // crossings of g_x inside each interval, where every g_x is linear
    for win in breaks.windows(2) {
        let (lo, hi) = (win[0], win[1]);
        let mid = 0.5 * (lo + hi);
        let lines: Vec<(f64, f64)> = (0..nx)
            .map(|x| {
                let slope: f64 = w
                    .row(x)
                    .iter()
                    .zip(q)
                    .filter(|(&wy, &qy)| mid * wy > qy)
                    .map(|(&wy, _)| wy)
                    .sum();
                (g_x(w, q, x, mid) - slope * mid, slope)
            })
            .collect();
        for i in 0..nx {
            for j in i + 1..nx {
                let ds = lines[i].1 - lines[j].1;
                if ds != 0.0 {
                    let l = (lines[j].0 - lines[i].0) / ds;
                    if l > lo && l < hi {
                        candidates.push(l);
                    }
                }
            }
        }
    }
    let mut best = (f64::NEG_INFINITY, 0.0, 0);
    for &l in &candidates {
        let (v, arg) = h(l);
        if v > best.0 {
            best = (v, l, arg);
        }
    }
    let (value, lambda, active_x) = best;
    let supergradient = w
        .row(active_x)
        .iter()
        .zip(q)
        .map(|(&wy, &qy)| if lambda * wy > qy { 1.0 } else { 0.0 })
        .collect();
    LowerEval {
        value,
        lambda,
        active_x,
        supergradient,
    }
}

/// Euclidean projection onto the probability simplex.
pub fn project_simplex(v: &[f64]) -> Vec<f64> {
    let mut u = v.to_vec();
    u.sort_by(|a, b| b.total_cmp(a));
    let mut cum = 0.0;
    let mut theta = 0.0;
    for (i, &ui) in u.iter().enumerate() {
        cum += ui;
        let t = (cum - 1.0) / (i + 1) as f64;
        if ui - t > 0.0 {
            theta = t;
        }
    }
    let mut out: Vec<f64> = v.iter().map(|&x| (x - theta).max(0.0)).collect();
    let s: f64 = out.iter().sum();
    out.iter_mut().for_each(|x| *x /= s);
    out
}

const GOLDEN: f64 = 0.618_033_988_749_894_8;

/// Golden-section search for the minimum of a convex function on `[a, b]`;
/// the endpoints are compared at the end.
fn golden_min(mut a: f64, mut b: f64, f: &mut dyn FnMut(f64) -> (f64, Vec<f64>)) -> (f64, Vec<f64>) {
    let (lo, hi) = (a, b);
    let mut c = b - GOLDEN * (b - a);
    let mut d = a + GOLDEN * (b - a);
    let mut fc = f(c);
    let mut fd = f(d);
    while b - a > 1e-10 {
        if fc.0 <= fd.0 {
            b = d;
            d = c;
            fd = fc;
            c = b - GOLDEN * (b - a);
            fc = f(c);
        } else {
            a = c;
            c = d;
            fc = fd;
            d = a + GOLDEN * (b - a);
            fd = f(d);
        }
    }
    let mut best = if fc.0 <= fd.0 { fc } else { fd };
    for end in [lo, hi] {
        let fe = f(end);
        if fe.0 < best.0 {
            best = fe;
        }
    }
    best
}

/// Nested golden-section minimization of a convex function over the simplex
/// on `k` symbols. Maximize a concave function by negating it.
fn nested_simplex_min(k: usize, f: &dyn Fn(&[f64]) -> f64) -> (f64, Vec<f64>) {
    fn rec(prefix: &mut Vec<f64>, left: f64, k: usize, f: &dyn Fn(&[f64]) -> f64) -> (f64, Vec<f64>) {
        if prefix.len() + 1 == k {
            prefix.push(left.max(0.0));
            let v = f(prefix);
            let point = prefix.clone();
            prefix.pop();
            return (v, point);
        }
        let mut inner = |x: f64| {
            prefix.push(x);
            let r = rec(prefix, left - x, k, f);
            prefix.pop();
            r
        };
        golden_min(0.0, left.max(0.0), &mut inner)
    }
    rec(&mut Vec::with_capacity(k), 1.0, k, f)
}

/// Both one-sided optima of the saddle problem with certificates.
///
/// Returns an error when the certified gap exceeds `tol`; see
/// [`saddle_solve_best_effort`] for the unconditional variant.
pub fn saddle_solve(w: &Channel, eps: f64, tol: f64) -> Result<SaddleResult> {
    let r = saddle_solve_best_effort(w, eps, tol)?;
    if r.converged {
        Ok(r)
    } else {
        Err(Error::NonConvergence {
            solver: "saddle",
            iterations: r.iterations,
            gap: r.gap,
        })
    }
}

pub fn saddle_solve_best_effort(w: &Channel, eps: f64, tol: f64) -> Result<SaddleResult> {
    if !(0.0..1.0).contains(&eps) {
        return Err(Error::domain(format!("eps = {eps} outside [0, 1)")));
    }
    if !(tol > 0.0) {
        return Err(Error::domain(format!("tolerance {tol} must be positive")));
    }
    let (nx, ny) = (w.input_size(), w.output_size());
    let mut p = vec![1.0 / nx as f64; nx];
    let mut q = vec![1.0 / ny as f64; ny];
    let first = upper_eval(w, &p, eps);
    let mut best_p = (first.value, p.clone());
    let mut best_q = {
        let l = lower_eval(w, &first.q, eps);
        let u = lower_eval(w, &q, eps);
        if l.value >= u.value {
            (l.value, first.q.clone())
        } else {
            (u.value, q.clone())
        }
    };
    let mut iterations = 0;
    for t in 1..=SUBGRADIENT_ITERATIONS {
        iterations = t;
        if best_p.0 - best_q.0 <= tol {
            break;
        }
        let step = 0.5 / (t as f64).sqrt();
        let up = upper_eval(w, &p, eps);
        if up.value < best_p.0 {
            best_p = (up.value, p.clone());
        }
        let lq = lower_eval(w, &up.q, eps);
        if lq.value > best_q.0 {
            best_q = (lq.value, up.q.clone());
        }
        let lo = lower_eval(w, &q, eps);
        if lo.value > best_q.0 {
            best_q = (lo.value, q.clone());
        }
        let gn = norm(&up.subgradient);
        if gn > 0.0 {
            let moved: Vec<f64> = p.iter().zip(&up.subgradient).map(|(a, g)| a - step * g / gn).collect();
            p = project_simplex(&moved);
        }
        let sn = norm(&lo.supergradient);
        if sn > 0.0 {
            let moved: Vec<f64> = q
                .iter()
                .zip(&lo.supergradient)
                .map(|(a, g)| a + step * g / sn)
                .collect();
            q = project_simplex(&moved);
        }
    }
    let mut refined = false;
    if best_p.0 - best_q.0 > tol && nx <= REFINE_MAX_ALPHABET && ny <= REFINE_MAX_ALPHABET {
        refined = true;
        let (v, pp) = nested_simplex_min(nx, &|pt| upper_eval(w, pt, eps).value);
        if v < best_p.0 {
            best_p = (v, pp);
        }
        let (v, qq) = nested_simplex_min(ny, &|pt| -lower_eval(w, pt, eps).value);
        if -v > best_q.0 {
            best_q = (-v, qq);
        }
    }
    let gap = best_p.0 - best_q.0;
    Ok(SaddleResult {
        p_star: Distribution::new(best_p.1)?,
        q_star: Distribution::new(best_q.1)?,
        minmax_value: best_p.0,
        maxmin_value: best_q.0,
        gap,
        eps,
        tol,
        iterations,
        refined,
        converged: gap <= tol,
    })
}

fn norm(v: &[f64]) -> f64 {
    v.iter().map(|a| a * a).sum::<f64>().sqrt()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::channel::{joint, joint_product};
    use crate::oracles::{np_dual, simplex_grid};
    use crate::testing::beta_from_masses;

    fn beta(w: &Channel, p: &[f64], q: &[f64], eps: f64) -> f64 {
        let p = Distribution::new(p.to_vec()).unwrap();
        let q = Distribution::new(q.to_vec()).unwrap();
        beta_from_masses(joint(&p, w).unwrap().flat(), joint_product(&p, &q).flat(), eps)
            .unwrap()
            .beta
    }

    fn channels() -> Vec<Channel> {
        vec![
            Channel::bsc(0.1).unwrap(),
            Channel::new(vec![vec![0.7, 0.2, 0.1], vec![0.1, 0.3, 0.6]]).unwrap(),
            Channel::new(vec![vec![1.0, 0.0], vec![0.5, 0.5]]).unwrap(),
            Channel::new(vec![vec![0.5, 0.5, 0.0], vec![0.0, 0.5, 0.5], vec![0.2, 0.2, 0.6]]).unwrap(),
        ]
    }

    #[test]
    fn upper_eval_matches_grid_over_q() {
        for w in channels() {
            for p in simplex_grid(w.input_size(), 5) {
                for eps in [0.0, 0.1, 0.35] {
                    let up = upper_eval(&w, &p, eps);
                    let at_q = beta(&w, &p, &up.q, eps);
                    assert!((at_q - up.value).abs() < 1e-9, "{} vs {}", at_q, up.value);
                    for q in simplex_grid(w.output_size(), 20) {
                        assert!(beta(&w, &p, &q, eps) <= up.value + 1e-9);
                    }
                }
            }
        }
    }

    #[test]
    fn lower_eval_matches_grid_over_p() {
        for w in channels() {
            for q in simplex_grid(w.output_size(), 6) {
                for eps in [0.0, 0.2, 0.5] {
                    let lo = lower_eval(&w, &q, eps);
                    let mut min = f64::INFINITY;
                    for p in simplex_grid(w.input_size(), 40) {
                        min = min.min(beta(&w, &p, &q, eps));
                    }
                    assert!(lo.value <= min + 1e-9);
                    assert!(min - lo.value < 0.03, "grid {} vs exact {}", min, lo.value);
                }
            }
        }
    }

    #[test]
    fn lower_eval_point_masses_are_exact() {
        // at a point-mass minimizer the value must match the NP dual exactly
        let w = Channel::bsc(0.1).unwrap();
        let q = [0.3, 0.7];
        let lo = lower_eval(&w, &q, 0.2);
        let at = |x: usize| np_dual(w.row(x), &q, 0.2);
        assert!(lo.value <= at(0).min(at(1)) + 1e-12);
    }

    #[test]
    fn projection() {
        let p = project_simplex(&[0.5, 0.8, -0.2]);
        assert!((p.iter().sum::<f64>() - 1.0).abs() < 1e-15);
        assert!((p[0] - 0.35).abs() < 1e-12 && (p[1] - 0.65).abs() < 1e-12 && p[2] == 0.0);
    }

    #[test]
    fn bsc_saddle() {
        let w = Channel::bsc(0.1).unwrap();
        let r = saddle_solve(&w, 0.2, 1e-4).unwrap();
        assert!(r.gap <= 1e-4 && r.gap >= 0.0);
        assert!((r.q_star.probs()[0] - 0.5).abs() < 1e-3);
        assert!((r.minmax_value - 4.0 / 9.0).abs() < 1e-4);
    }

    #[test]
    fn useless_saddle() {
        let w = Channel::useless(2, 3).unwrap();
        let r = saddle_solve(&w, 0.3, 1e-6).unwrap();
        assert!((r.minmax_value - 0.7).abs() < 1e-6);
        assert!((r.maxmin_value - 0.7).abs() < 1e-6);
    }
}
