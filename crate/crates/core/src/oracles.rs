//! Brute-force reference computations.
//!
//! These deliberately avoid the structure exploited by the production code
//! paths (level sorting, vertex reductions, rational approximations) and are
//! used by the test suites and `--selftest` to cross-check them.

/// Primal oracle for `beta_eps`: enumerate every deterministic acceptance
/// set plus one extra outcome accepted with probability on a grid of step
/// `1/grid`. Returns the smallest type-II error among feasible tests.
pub fn np_primal_grid(p: &[f64], q: &[f64], eps: f64, grid: u32) -> f64 {
    let k = p.len();
    assert!(k <= 16, "primal grid oracle is exponential in the alphabet size");
    let mut best = f64::INFINITY;
    for set in 0u32..(1 << k) {
        let accepted = |z: usize| set >> z & 1 == 1;
        let base_t1: f64 = (0..k).filter(|&z| !accepted(z)).map(|z| p[z]).sum();
        let base_t2: f64 = (0..k).filter(|&z| accepted(z)).map(|z| q[z]).sum();
        if base_t1 <= eps + 1e-15 {
            best = best.min(base_t2);
        }
        for z in (0..k).filter(|&z| !accepted(z)) {
            for g in 1..grid {
                let t = g as f64 / grid as f64;
                let t1 = base_t1 - t * p[z];
                if t1 <= eps + 1e-15 {
                    best = best.min(base_t2 + t * q[z]);
                    break;
                }
            }
        }
    }
    best
}

/// Exact primal oracle: an optimal randomized test accepts a set outright
/// and at most one further outcome with some probability, so enumerating
/// every set and every extra outcome with the exact randomization is exhaustive.
pub fn np_primal_exact(p: &[f64], q: &[f64], eps: f64) -> f64 {
    let k = p.len();
    assert!(k <= 16, "primal oracle is exponential in the alphabet size");
    let mut best = f64::INFINITY;
    for set in 0u32..(1 << k) {
        let accepted = |z: usize| set >> z & 1 == 1;
        let t1: f64 = (0..k).filter(|&z| !accepted(z)).map(|z| p[z]).sum();
        let t2: f64 = (0..k).filter(|&z| accepted(z)).map(|z| q[z]).sum();
        if t1 <= eps {
            best = best.min(t2);
            continue;
        }
        for z in (0..k).filter(|&z| !accepted(z) && p[z] > 0.0) {
            let t = (t1 - eps) / p[z];
            if t <= 1.0 {
                best = best.min(t2 + t * q[z]);
            }
        }
    }
    best
}

/// Dual oracle for `beta_eps`: the LP dual
/// `max_{l >= 0} l (1 - eps) - sum_z (l p_z - q_z)^+`
/// is concave piecewise linear in `l`, so its maximum sits at `l = 0` or at
/// a breakpoint `q_z / p_z`. Equals `beta_eps` by strong duality.
pub fn np_dual(p: &[f64], q: &[f64], eps: f64) -> f64 {
    let g = |l: f64| -> f64 { l * (1.0 - eps) - p.iter().zip(q).map(|(&a, &b)| (l * a - b).max(0.0)).sum::<f64>() };
    let mut best = g(0.0);
    for (&a, &b) in p.iter().zip(q) {
        if a > 0.0 {
            best = best.max(g(b / a));
        }
    }
    best
}

/// All points of the probability simplex on `k` symbols whose coordinates
/// are multiples of `1/steps`.
pub fn simplex_grid(k: usize, steps: u32) -> Vec<Vec<f64>> {
    let mut out = Vec::new();
    let mut cur = vec![0u32; k];
    fn rec(i: usize, left: u32, steps: u32, cur: &mut Vec<u32>, out: &mut Vec<Vec<f64>>) {
        if i + 1 == cur.len() {
            cur[i] = left;
            out.push(cur.iter().map(|&c| c as f64 / steps as f64).collect());
            return;
        }
        for c in 0..=left {
            cur[i] = c;
            rec(i + 1, left - c, steps, cur, out);
        }
    }
    if k > 0 {
        rec(0, steps, steps, &mut cur, &mut out);
    }
    out
}

/// Standard normal CDF from the all-positive series
/// `erf(z) = 2/sqrt(pi) e^{-z^2} sum_n 2^n z^{2n+1} / (2n+1)!!`.
pub fn normal_cdf_series(x: f64) -> f64 {
    let z = x.abs() / std::f64::consts::SQRT_2;
    let mut term = z;
    let mut sum = z;
    let mut n = 0.0;
    while term > sum * 1e-18 {
        n += 1.0;
        term *= 2.0 * z * z / (2.0 * n + 1.0);
        sum += term;
        if n > 10_000.0 {
            break;
        }
    }
    let erf = 2.0 / std::f64::consts::PI.sqrt() * (-z * z).exp() * sum;
    let erf = erf.min(1.0);
    if x >= 0.0 {
        0.5 + 0.5 * erf
    } else {
        0.5 - 0.5 * erf
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn dual_matches_hand_example() {
        assert!((np_dual(&[0.9, 0.1], &[0.5, 0.5], 0.1) - 0.5).abs() < 1e-15);
        assert!((np_primal_grid(&[0.9, 0.1], &[0.5, 0.5], 0.1, 1000) - 0.5).abs() < 1e-15);
        assert!((np_primal_exact(&[0.9, 0.1], &[0.5, 0.5], 0.1) - 0.5).abs() < 1e-15);
        let (p, q) = ([0.5, 0.3, 0.2], [0.2, 0.3, 0.5]);
        assert!((np_primal_exact(&p, &q, 0.25) - np_dual(&p, &q, 0.25)).abs() < 1e-15);
    }

    #[test]
    fn grid_size() {
        assert_eq!(simplex_grid(3, 4).len(), 15);
        assert!(simplex_grid(3, 4)
            .iter()
            .all(|p| (p.iter().sum::<f64>() - 1.0).abs() < 1e-15));
    }

    #[test]
    fn series_cdf_reference_points() {
        assert_eq!(normal_cdf_series(0.0), 0.5);
        assert!((normal_cdf_series(1.0) - 0.841_344_746_068_542_9).abs() < 1e-15);
        assert!((normal_cdf_series(-1.281_551_565_544_600_5) - 0.1).abs() < 1e-15);
    }
}
