use serde::{Deserialize, Serialize};

use crate::channel::{output_distribution, Channel, Distribution};
use crate::error::{Error, Result};
use crate::extreal::kl_divergence;

pub const DEFAULT_CAPACITY_TOL: f64 = 1e-8;
pub const MAX_BA_ITERATIONS: usize = 200_000;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CapacityResult {
    /// Nats per channel use (the certified lower end).
    pub capacity: f64,
    /// `max_x D(W_x || output_dist)`, an upper bound on the capacity.
    pub upper_bound: f64,
    pub input_dist: Distribution,
    pub output_dist: Distribution,
    pub iterations: usize,
    pub gap: f64,
    pub tol: f64,
}

/// `D(W_x || q)` for every input.
pub fn row_divergences(w: &Channel, q: &[f64]) -> Vec<f64> {
    w.rows().map(|row| kl_divergence(row, q)).collect()
}

/// Alternating maximization with the standard duality certificate
/// `max_x D(W_x || pW) - I(p; W)`.
pub fn blahut_arimoto(w: &Channel, tol: f64) -> Result<CapacityResult> {
    if !(tol > 0.0) {
        return Err(Error::domain(format!("tolerance {tol} must be positive")));
    }
    let k = w.input_size();
    let mut p = Distribution::uniform(k);
    let mut best_gap = f64::INFINITY;
    for it in 1..=MAX_BA_ITERATIONS {
        let q = output_distribution(&p, w)?;
        let d = row_divergences(w, q.probs());
        let mutual: f64 = p
            .probs()
            .iter()
            .zip(&d)
            .filter(|(&px, _)| px > 0.0)
            .map(|(px, dx)| px * dx)
            .sum();
        let upper = d.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        let gap = (upper - mutual).max(0.0);
        best_gap = best_gap.min(gap);
        if gap <= tol {
            return Ok(CapacityResult {
                capacity: mutual,
                upper_bound: upper,
                input_dist: p,
                output_dist: q,
                iterations: it,
                gap,
                tol,
            });
        }
        // multiplicative update in the log domain
        let logs: Vec<f64> = p
            .probs()
            .iter()
            .zip(&d)
            .map(|(&px, &dx)| if px > 0.0 { px.ln() + dx } else { f64::NEG_INFINITY })
            .collect();
        let top = logs.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        let un: Vec<f64> = logs.iter().map(|l| (l - top).exp()).collect();
        let z: f64 = un.iter().sum();
        p = Distribution::new(un.into_iter().map(|v| v / z).collect())?;
    }
    Err(Error::NonConvergence {
        solver: "Blahut-Arimoto",
        iterations: MAX_BA_ITERATIONS,
        gap: best_gap,
    })
}

/// Runs at `1e-12` when that converges so that the output law is accurate
/// to well below `tol`, falling back to `tol` itself.
pub fn blahut_arimoto_refined(w: &Channel, tol: f64) -> Result<CapacityResult> {
    match blahut_arimoto(w, tol.min(1e-12)) {
        Err(Error::NonConvergence { .. }) => blahut_arimoto(w, tol),
        r => r,
    }
}

/// Binary entropy in nats.
pub fn binary_entropy(p: f64) -> f64 {
    let h = |v: f64| if v > 0.0 { -v * v.ln() } else { 0.0 };
    h(p) + h(1.0 - p)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn closed_forms() {
        let r = blahut_arimoto(&Channel::identity(2).unwrap(), 1e-10).unwrap();
        assert!((r.capacity - 2f64.ln()).abs() < 1e-10);
        let r = blahut_arimoto(&Channel::useless(3, 4).unwrap(), 1e-10).unwrap();
        assert!(r.capacity.abs() < 1e-12);
        let r = blahut_arimoto(&Channel::bsc(0.1).unwrap(), 1e-10).unwrap();
        assert!((r.capacity - 0.368_064_207_168_497_07).abs() < 1e-10);
        assert!((r.capacity - (2f64.ln() - binary_entropy(0.1))).abs() < 1e-12);
    }

    #[test]
    fn certificate_on_asymmetric_channel() {
        let w = Channel::new(vec![vec![0.7, 0.2, 0.1], vec![0.1, 0.3, 0.6], vec![0.3, 0.4, 0.3]]).unwrap();
        let r = blahut_arimoto(&w, 1e-9).unwrap();
        assert!(r.gap <= 1e-9);
        let d = row_divergences(&w, r.output_dist.probs());
        assert!(d.iter().all(|&v| v <= r.capacity + 1e-9));
    }

    #[test]
    fn z_channel_reference() {
        // C(Z(1/2)) = ln(5/4)
        let w = Channel::new(vec![vec![1.0, 0.0], vec![0.5, 0.5]]).unwrap();
        let r = blahut_arimoto(&w, 1e-11).unwrap();
        assert!((r.capacity - 1.25f64.ln()).abs() < 1e-10);
    }

    #[test]
    fn rejects_bad_tolerance() {
        assert!(blahut_arimoto(&Channel::bsc(0.1).unwrap(), 0.0).is_err());
    }
}
