//! Exact binary hypothesis testing on finite alphabets.
//!
//! Both the optimal type-II error `beta_eps(P, Q)` and the information
//! spectrum divergence `D_s^eps(P || Q)` depend only on the distribution of
//! the log-likelihood ratio `log P(Z)/Q(Z)`. Outcomes are therefore collapsed
//! into ratio levels first; ties (within [`TIE_TOLERANCE`]) share a level, and
//! outcomes with `P = Q = 0` are dropped.

use serde::{Deserialize, Serialize};

use crate::channel::{Distribution, Masses};
use crate::error::{check_dim, Error, Result};
use crate::extreal::{le_with_slack, log_ratio, serde_ext};

/// Log-ratio values closer than this are treated as one level.
pub const TIE_TOLERANCE: f64 = 1e-12;

/// One likelihood-ratio level with its mass under both hypotheses.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Level {
    #[serde(with = "serde_ext")]
    pub log_ratio: f64,
    pub p_mass: f64,
    pub q_mass: f64,
}

/// Collapses `(p, q)` into strictly increasing log-ratio levels.
pub fn ratio_levels(p: &[f64], q: &[f64]) -> Vec<Level> {
    let mut raw: Vec<Level> = p
        .iter()
        .zip(q)
        .filter_map(|(&a, &b)| {
            log_ratio(a, b).map(|log_ratio| Level {
                log_ratio,
                p_mass: a,
                q_mass: b,
            })
        })
        .collect();
    raw.sort_by(|a, b| a.log_ratio.total_cmp(&b.log_ratio));
    let mut levels: Vec<Level> = Vec::with_capacity(raw.len());
    for l in raw {
        match levels.last_mut() {
            Some(last) if same_level(last.log_ratio, l.log_ratio) => {
                last.p_mass += l.p_mass;
                last.q_mass += l.q_mass;
            }
            _ => levels.push(l),
        }
    }
    levels
}

fn same_level(a: f64, b: f64) -> bool {
    a == b || (a.is_finite() && b.is_finite() && (a - b).abs() <= TIE_TOLERANCE)
}

/// A randomized likelihood-ratio test.
///
/// Levels with index below `boundary` are rejected (decide `Q`), the level at
/// `boundary` is rejected with probability `randomization`, higher levels are
/// accepted. `threshold` is the log-ratio of the boundary level.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NPTest {
    pub levels: Vec<Level>,
    pub boundary: usize,
    #[serde(with = "serde_ext")]
    pub threshold: f64,
    pub randomization: f64,
}

impl NPTest {
    /// Probability of accepting the null hypothesis at each level.
    pub fn acceptance(&self) -> Vec<f64> {
        (0..self.levels.len())
            .map(|i| match i.cmp(&self.boundary) {
                std::cmp::Ordering::Less => 0.0,
                std::cmp::Ordering::Equal => 1.0 - self.randomization,
                std::cmp::Ordering::Greater => 1.0,
            })
            .collect()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BetaResult {
    pub beta: f64,
    pub test: NPTest,
    pub type1: f64,
    pub type2: f64,
}

fn check_eps(eps: f64) -> Result<()> {
    if (0.0..1.0).contains(&eps) {
        Ok(())
    } else {
        Err(Error::domain(format!("eps = {eps} outside [0, 1)")))
    }
}

/// Optimal type-II error of a test between `p` (null) and `q` with type-I
/// error at most `eps`.
pub fn beta_epsilon(p: &Distribution, q: &Distribution, eps: f64) -> Result<BetaResult> {
    check_dim("hypotheses", p.len(), q.len())?;
    beta_from_masses(p.masses(), q.masses(), eps)
}

/// [`beta_epsilon`] on raw mass vectors; used for joint distributions.
pub fn beta_from_masses(p: &[f64], q: &[f64], eps: f64) -> Result<BetaResult> {
    check_eps(eps)?;
    check_dim("hypotheses", p.len(), q.len())?;
    Ok(beta_from_levels(ratio_levels(p, q), eps))
}

pub(crate) fn beta_from_levels(levels: Vec<Level>, eps: f64) -> BetaResult {
    // Reject the lowest ratios first; a level with no null mass is free.
    let mut rejected = 0.0;
    let mut boundary = levels.len();
    let mut randomization = 0.0;
    for (i, l) in levels.iter().enumerate() {
        if rejected + l.p_mass <= eps {
            rejected += l.p_mass;
            continue;
        }
        randomization = ((eps - rejected) / l.p_mass).clamp(0.0, 1.0);
        boundary = i;
        break;
    }
    let (type1, beta) = if boundary < levels.len() {
        let b = &levels[boundary];
        let upper: f64 = levels[boundary + 1..].iter().map(|l| l.q_mass).sum();
        (
            rejected + randomization * b.p_mass,
            upper + (1.0 - randomization) * b.q_mass,
        )
    } else {
        (rejected, 0.0)
    };
    let threshold = levels.get(boundary).map(|l| l.log_ratio).unwrap_or(f64::INFINITY);
    BetaResult {
        beta,
        type1,
        type2: beta,
        test: NPTest {
            levels,
            boundary,
            threshold,
            randomization,
        },
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DsResult {
    /// `D_s^eps` in nats; `+inf` when the null puts mass where `q` vanishes
    /// beyond the tolerated tail.
    #[serde(with = "serde_ext")]
    pub value: f64,
    /// `Pr(log P/Q <= value)` under the null.
    pub achieved_tail: f64,
    pub infinite: bool,
}

/// `sup { g : Pr_P(log P/Q <= g) <= eps }`.
///
/// The CDF is a right-continuous step function, so the supremum is the first
/// level at which the CDF strictly exceeds `eps`.
pub fn ds_epsilon(p: &Distribution, q: &Distribution, eps: f64) -> Result<DsResult> {
    check_dim("hypotheses", p.len(), q.len())?;
    ds_from_masses(p.masses(), q.masses(), eps)
}

pub fn ds_from_masses(p: &[f64], q: &[f64], eps: f64) -> Result<DsResult> {
    check_eps(eps)?;
    check_dim("hypotheses", p.len(), q.len())?;
    Ok(ds_from_levels(&ratio_levels(p, q), eps))
}

pub(crate) fn ds_from_levels(levels: &[Level], eps: f64) -> DsResult {
    ds_from_steps(levels.iter().map(|l| (l.log_ratio, l.p_mass)), eps)
}

/// Quantile rule shared with the spectrum engine: `steps` yields
/// `(value, mass)` pairs in increasing value order.
pub(crate) fn ds_from_steps(steps: impl Iterator<Item = (f64, f64)>, eps: f64) -> DsResult {
    let mut cdf = 0.0;
    for (value, mass) in steps {
        cdf += mass;
        if cdf > eps {
            return DsResult {
                value,
                achieved_tail: cdf,
                infinite: value.is_infinite(),
            };
        }
    }
    DsResult {
        value: f64::INFINITY,
        achieved_tail: cdf,
        infinite: true,
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Lemma1Report {
    #[serde(with = "serde_ext")]
    pub ds_eps: f64,
    #[serde(with = "serde_ext")]
    pub neg_log_beta: f64,
    /// `D_s^{eps+zeta} + log(1/zeta)`.
    #[serde(with = "serde_ext")]
    pub ds_eps_plus_zeta_slack: f64,
    pub holds: bool,
}

/// Checks `D_s^eps <= -log beta_eps <= D_s^{eps+zeta} + log(1/zeta)` with
/// `1e-9` slack on each comparison.
pub fn lemma1_check(p: &Distribution, q: &Distribution, eps: f64, zeta: f64) -> Result<Lemma1Report> {
    check_eps(eps)?;
    if !(zeta > 0.0 && zeta < 1.0 - eps) {
        return Err(Error::domain(format!(
            "zeta = {zeta} outside (0, 1 - eps) with eps = {eps}"
        )));
    }
    let ds_eps = ds_epsilon(p, q, eps)?.value;
    let neg_log_beta = -beta_epsilon(p, q, eps)?.beta.ln();
    let upper = ds_epsilon(p, q, eps + zeta)?.value + (1.0 / zeta).ln();
    let holds = le_with_slack(ds_eps, neg_log_beta, 1e-9) && le_with_slack(neg_log_beta, upper, 1e-9);
    Ok(Lemma1Report {
        ds_eps,
        neg_log_beta,
        ds_eps_plus_zeta_slack: upper,
        holds,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn d(v: &[f64]) -> Distribution {
        Distribution::new(v.to_vec()).unwrap()
    }

    #[test]
    fn beta_examples() {
        let p = d(&[0.2, 0.3, 0.5]);
        assert!((beta_epsilon(&p, &p, 0.3).unwrap().beta - 0.7).abs() < 1e-15);

        let a = d(&[0.5, 0.5, 0.0, 0.0]);
        let b = d(&[0.0, 0.0, 0.3, 0.7]);
        for eps in [0.0, 0.2, 0.9] {
            assert_eq!(beta_epsilon(&a, &b, eps).unwrap().beta, 0.0);
        }

        let r = beta_epsilon(&d(&[0.9, 0.1]), &d(&[0.5, 0.5]), 0.1).unwrap();
        assert!((r.beta - 0.5).abs() < 1e-15);
        assert!(r.type1 <= 0.1 + 1e-12);
        assert_eq!(r.type2, r.beta);
    }

    #[test]
    fn beta_domain_errors() {
        let p = d(&[0.5, 0.5]);
        assert!(beta_epsilon(&p, &p, 1.0).is_err());
        assert!(beta_epsilon(&p, &p, -0.1).is_err());
        assert!(beta_epsilon(&p, &d(&[1.0]), 0.1).is_err());
    }

    #[test]
    fn beta_zero_is_q_mass_of_support() {
        let p = d(&[0.5, 0.5, 0.0]);
        let q = d(&[0.2, 0.3, 0.5]);
        assert!((beta_epsilon(&p, &q, 0.0).unwrap().beta - 0.5).abs() < 1e-15);
    }

    #[test]
    fn ties_are_merged() {
        let levels = ratio_levels(&[0.45, 0.45, 0.1], &[0.25, 0.25, 0.5]);
        assert_eq!(levels.len(), 2);
        assert!((levels[1].p_mass - 0.9).abs() < 1e-15);
    }

    #[test]
    fn ds_examples() {
        let p = d(&[0.3, 0.7]);
        assert_eq!(ds_epsilon(&p, &p, 0.5).unwrap().value, 0.0);

        let p = d(&[0.9, 0.1]);
        let q = d(&[0.5, 0.5]);
        let r = ds_epsilon(&p, &q, 0.05).unwrap();
        assert!((r.value - 0.2f64.ln()).abs() < 1e-12);
        assert!((r.value + 1.60944).abs() < 1e-5);
        let r = ds_epsilon(&p, &q, 0.1).unwrap();
        assert!((r.value - 1.8f64.ln()).abs() < 1e-12);
        assert!((r.achieved_tail - 1.0).abs() < 1e-15);
    }

    #[test]
    fn ds_infinite_when_q_misses_support() {
        let r = ds_epsilon(&d(&[0.5, 0.5]), &d(&[1.0, 0.0]), 0.6).unwrap();
        assert!(r.infinite && r.value == f64::INFINITY);
        let r = ds_epsilon(&d(&[0.5, 0.5]), &d(&[1.0, 0.0]), 0.4).unwrap();
        assert!(!r.infinite);
    }

    #[test]
    fn lemma1_examples() {
        let p = d(&[0.2, 0.8]);
        let r = lemma1_check(&p, &p, 0.3, 0.1).unwrap();
        assert!(r.holds);
        assert_eq!(r.ds_eps, 0.0);
        assert!((r.neg_log_beta + 0.7f64.ln()).abs() < 1e-15);
        assert!((r.ds_eps_plus_zeta_slack - 10f64.ln()).abs() < 1e-15);

        let r = lemma1_check(&d(&[0.9, 0.1]), &d(&[0.5, 0.5]), 0.05, 0.05).unwrap();
        assert!(r.holds);

        assert!(lemma1_check(&p, &p, 0.3, 0.7).is_err());
        assert!(lemma1_check(&p, &p, 0.3, 0.0).is_err());
    }
}
