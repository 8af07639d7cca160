//! Single-shot converse bounds on `log log N` for identification codes.

use serde::{Deserialize, Serialize};

use crate::channel::{joint, joint_product, output_distribution, Channel, Distribution, Masses};
use crate::error::{check_dim, Error, Result};
use crate::extreal::{log_ratio, serde_ext};
use crate::minimax::capacity::{blahut_arimoto, DEFAULT_CAPACITY_TOL};
use crate::minimax::saddle::{saddle_solve_best_effort, SaddleResult};
use crate::oracles::simplex_grid;
use crate::testing::{beta_from_masses, ds_from_masses, BetaResult};

/// `beta_eps(P x W, P x Q)`.
pub fn beta_joint(p: &Distribution, w: &Channel, q: &Distribution, eps: f64) -> Result<BetaResult> {
    check_dim("output distribution", w.output_size(), q.len())?;
    let a = joint(p, w)?;
    let b = joint_product(p, q);
    beta_from_masses(a.flat(), b.flat(), eps)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SupDs {
    #[serde(with = "serde_ext")]
    pub value: f64,
    pub witness_x: usize,
}

/// `max_x D_s^eps(W_x || q)`, which equals `sup_P D_s^eps(P x W || P x q)`:
/// point masses attain it, and the symbol-wise relaxation bounds every `P`.
pub fn sup_ds_over_inputs(w: &Channel, q: &Distribution, eps: f64) -> Result<SupDs> {
    check_dim("output distribution", w.output_size(), q.len())?;
    let mut best = SupDs {
        value: f64::NEG_INFINITY,
        witness_x: 0,
    };
    for x in 0..w.input_size() {
        let v = ds_from_masses(w.row(x), q.probs(), eps)?.value;
        if v > best.value {
            best = SupDs { value: v, witness_x: x };
        }
    }
    Ok(best)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ConverseVariant {
    DsCorollary1,
    BetaMinmax,
    BetaMaxmin,
    ExistingBound,
    FiniteN,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SlackTerms {
    /// `log log |X|` (of the block input alphabet for product channels).
    pub loglog_alphabet: f64,
    /// `2 log(1/eta)`.
    pub eta_term: f64,
    pub constant: f64,
}

impl SlackTerms {
    pub fn new(log_alphabet: f64, eta: f64) -> Self {
        SlackTerms {
            loglog_alphabet: log_alphabet.ln(),
            eta_term: 2.0 * (1.0 / eta).ln(),
            constant: 2.0,
        }
    }

    pub fn total(&self) -> f64 {
        self.loglog_alphabet + self.eta_term + self.constant
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ConverseReport {
    pub variant: ConverseVariant,
    /// Upper bound on `log log N*(eps, delta | W)` in nats.
    #[serde(with = "serde_ext")]
    pub bound_on_loglog_n: f64,
    #[serde(with = "serde_ext")]
    pub main_term: f64,
    pub slack_terms: SlackTerms,
    pub eps: f64,
    pub delta: f64,
    pub eta: f64,
    /// The reference output law the main term was evaluated at.
    pub q_used: Option<Distribution>,
}

fn check_converse_params(w: &Channel, eps: f64, delta: f64, eta: f64) -> Result<()> {
    if w.input_size() < 2 {
        return Err(Error::Degenerate("log log |X| needs at least two inputs".into()));
    }
    if !(eps >= 0.0 && delta >= 0.0) {
        return Err(Error::domain("eps and delta must be nonnegative"));
    }
    if eps + delta >= 1.0 {
        return Err(Error::domain(format!(
            "eps + delta = {} >= 1: ID capacity is infinite in this regime",
            eps + delta
        )));
    }
    if !(eta > 0.0 && eta < 1.0 - eps - delta) {
        return Err(Error::domain(format!(
            "eta = {eta} outside (0, 1 - eps - delta) = (0, {})",
            1.0 - eps - delta
        )));
    }
    Ok(())
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Corollary1Report {
    pub report: ConverseReport,
    /// Symbol-wise objective at the saddle output law of the beta surrogate.
    #[serde(with = "serde_ext")]
    pub surrogate_value: f64,
    /// Best symbol-wise objective over the simplex grid plus local refinement.
    #[serde(with = "serde_ext")]
    pub direct_grid_value: f64,
    /// Objective at the capacity-achieving output law.
    #[serde(with = "serde_ext")]
    pub capacity_output_value: f64,
}

fn grid_steps(ny: usize) -> Option<u32> {
    match ny {
        1 | 2 => Some(200),
        3 => Some(64),
        4 => Some(32),
        5 => Some(16),
        _ => None,
    }
}

/// Coordinate moves of shrinking size starting from `start`.
fn local_refine(start: Vec<f64>, mut value: f64, f: &dyn Fn(&[f64]) -> f64) -> (Vec<f64>, f64) {
    let k = start.len();
    let mut best = start;
    let mut step = 1.0 / 64.0;
    while step > 1e-7 {
        let mut improved = false;
        for i in 0..k {
            for j in 0..k {
                if i == j || best[j] < step {
                    continue;
                }
                let mut cand = best.clone();
                cand[i] += step;
                cand[j] -= step;
                let v = f(&cand);
                if v < value {
                    value = v;
                    best = cand;
                    improved = true;
                }
            }
        }
        if !improved {
            step /= 2.0;
        }
    }
    (best, value)
}

/// Corollary-1 style converse: minimize `max_x D_s^{eps+delta+eta}(W_x || Q)`
/// over `Q` and add `log log |X| + 2 log(1/eta) + 2`. Any `Q` gives a valid
/// bound, so the minimum over all candidates examined is reported.
pub fn corollary1_bound(w: &Channel, eps: f64, delta: f64, eta: f64) -> Result<Corollary1Report> {
    check_converse_params(w, eps, delta, eta)?;
    let level = eps + delta + eta;
    let objective = |q: &[f64]| -> f64 {
        let mut top = f64::NEG_INFINITY;
        for x in 0..w.input_size() {
            let v = ds_from_masses(w.row(x), q, level)
                .map(|r| r.value)
                .unwrap_or(f64::INFINITY);
            top = top.max(v);
        }
        top
    };

    let saddle = saddle_solve_best_effort(w, level, 1e-4)?;
    let surrogate_q = saddle.q_star.probs().to_vec();
    let surrogate_value = objective(&surrogate_q);
    let cap_q = blahut_arimoto(w, DEFAULT_CAPACITY_TOL)?.output_dist.probs().to_vec();
    let capacity_output_value = objective(&cap_q);

    let mut grid_best = (f64::INFINITY, vec![1.0 / w.output_size() as f64; w.output_size()]);
    if let Some(steps) = grid_steps(w.output_size()) {
        for q in simplex_grid(w.output_size(), steps) {
            let v = objective(&q);
            if v < grid_best.0 {
                grid_best = (v, q);
            }
        }
    }
    let mut candidates = vec![(surrogate_value, surrogate_q), (capacity_output_value, cap_q)];
    if grid_best.0.is_finite() {
        candidates.push(grid_best.clone());
    }
    let start = candidates
        .iter()
        .min_by(|a, b| a.0.total_cmp(&b.0))
        .cloned()
        .expect("nonempty");
    // never worse than its starting point
    let (q_used, main_term) = local_refine(start.1, start.0, &objective);
    let direct_grid_value = grid_best.0.min(main_term);
    let slack_terms = SlackTerms::new((w.input_size() as f64).ln(), eta);
    Ok(Corollary1Report {
        report: ConverseReport {
            variant: ConverseVariant::DsCorollary1,
            bound_on_loglog_n: main_term + slack_terms.total(),
            main_term,
            slack_terms,
            eps,
            delta,
            eta,
            q_used: Some(Distribution::new(q_used)?),
        },
        surrogate_value,
        direct_grid_value,
        capacity_output_value,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Corollary2Report {
    /// `-log min_P beta` at the saddle output law: a certified bound.
    pub minmax: ConverseReport,
    /// `-log max_Q beta` at the saddle input law.
    pub maxmin: ConverseReport,
    pub saddle: SaddleResult,
}

/// Corollary-2 style converse with `-log beta_{eps+delta+eta}` at the saddle.
pub fn corollary2_bound(w: &Channel, eps: f64, delta: f64, eta: f64, tol: f64) -> Result<Corollary2Report> {
    check_converse_params(w, eps, delta, eta)?;
    let saddle = crate::minimax::saddle::saddle_solve(w, eps + delta + eta, tol)?;
    let slack_terms = SlackTerms::new((w.input_size() as f64).ln(), eta);
    let make = |variant, beta: f64, q_used| {
        let main_term = -beta.ln();
        ConverseReport {
            variant,
            bound_on_loglog_n: main_term + slack_terms.total(),
            main_term,
            slack_terms: slack_terms.clone(),
            eps,
            delta,
            eta,
            q_used,
        }
    };
    Ok(Corollary2Report {
        minmax: make(
            ConverseVariant::BetaMinmax,
            saddle.maxmin_value,
            Some(saddle.q_star.clone()),
        ),
        maxmin: make(ConverseVariant::BetaMaxmin, saddle.minmax_value, None),
        saddle,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExistingBoundReport {
    /// Lower bound on `eps + delta`.
    pub value: f64,
    /// `inf_P [1 - 2 P x W(T_P^c)]`.
    pub inf_term: f64,
    pub penalty: f64,
    pub argmin_p: Distribution,
}

/// `1 - 2 P x W(T_P^c)` with `T_P = {log W(y|x)/PW(y) <= gamma}`.
fn existing_objective(w: &Channel, p: &[f64], gamma: f64) -> f64 {
    let pd = Distribution::new(p.to_vec()).expect("simplex point");
    let out = output_distribution(&pd, w).expect("dimensions checked");
    let mut outside = 0.0;
    for (&px, row) in p.iter().zip(w.rows()) {
        for (&wy, &qy) in row.iter().zip(out.masses()) {
            if let Some(r) = log_ratio(wy, qy) {
                if r > gamma {
                    outside += px * wy;
                }
            }
        }
    }
    1.0 - 2.0 * outside
}

/// The earlier bound `inf_P [1 - 2 P x W(T_P^c)] - sqrt(e^gamma / M)` on
/// `eps + delta`. The typical set depends on `P`, so the infimum is searched
/// on a simplex grid followed by local moves.
pub fn existing_bound(w: &Channel, gamma: f64, m: u64) -> Result<ExistingBoundReport> {
    if m == 0 {
        return Err(Error::domain("M must be >= 1"));
    }
    let steps = match w.input_size() {
        1 | 2 => 200,
        3 => 64,
        4 => 32,
        k => {
            return Err(Error::CapExceeded {
                what: "existing-bound grid over inputs",
                size: k as f64,
                cap: 4.0,
                hint: "the grid search is only offered for |X| <= 4",
            })
        }
    };
    let f = |p: &[f64]| existing_objective(w, p, gamma);
    let mut best = (f64::INFINITY, Vec::new());
    for p in simplex_grid(w.input_size(), steps) {
        let v = f(&p);
        if v < best.0 {
            best = (v, p);
        }
    }
    let (p, inf_term) = local_refine(best.1, best.0, &f);
    let penalty = crate::resolvability::penalty(gamma, m);
    Ok(ExistingBoundReport {
        value: inf_term - penalty,
        inf_term,
        penalty,
        argmin_p: Distribution::new(p)?,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn beta_joint_examples() {
        let w = Channel::useless(2, 3).unwrap();
        let p = Distribution::new(vec![0.3, 0.7]).unwrap();
        let q = output_distribution(&p, &w).unwrap();
        assert!((beta_joint(&p, &w, &q, 0.25).unwrap().beta - 0.75).abs() < 1e-12);
        let id = Channel::identity(2).unwrap();
        let u = Distribution::uniform(2);
        assert!((beta_joint(&u, &id, &u, 0.0).unwrap().beta - 0.5).abs() < 1e-15);
    }

    #[test]
    fn sup_ds_examples() {
        let w = Channel::useless(3, 2).unwrap();
        assert_eq!(
            sup_ds_over_inputs(&w, &Distribution::uniform(2), 0.3).unwrap().value,
            0.0
        );
        let bsc = Channel::bsc(0.1).unwrap();
        let u = Distribution::uniform(2);
        assert!((sup_ds_over_inputs(&bsc, &u, 0.05).unwrap().value - 0.2f64.ln()).abs() < 1e-12);
        assert!((sup_ds_over_inputs(&bsc, &u, 0.2).unwrap().value - 1.8f64.ln()).abs() < 1e-12);
    }

    #[test]
    fn slack_arithmetic() {
        let s = SlackTerms::new(2f64.ln(), 0.1);
        assert!((s.loglog_alphabet + 0.366_512_920_581_664_3).abs() < 1e-12);
        assert!((s.eta_term - 4.605_170_185_988_091).abs() < 1e-12);
        assert_eq!(s.constant, 2.0);
    }

    #[test]
    fn corollary1_useless_channel() {
        let w = Channel::useless(2, 2).unwrap();
        let r = corollary1_bound(&w, 0.1, 0.1, 0.1).unwrap();
        assert!(r.report.main_term <= 1e-12);
        // at Q equal to the common row every log-ratio vanishes
        let q = Distribution::uniform(2);
        assert_eq!(sup_ds_over_inputs(&w, &q, 0.3).unwrap().value, 0.0);
        let total = r.report.slack_terms.total();
        assert!((r.report.bound_on_loglog_n - r.report.main_term - total).abs() < 1e-12);
    }

    #[test]
    fn corollary1_bsc() {
        let w = Channel::bsc(0.1).unwrap();
        let r = corollary1_bound(&w, 0.1, 0.1, 0.05).unwrap();
        assert!(r.report.main_term <= r.surrogate_value + 1e-12);
        assert!(r.report.main_term <= r.capacity_output_value + 1e-12);
        assert!(r.report.main_term.is_finite());
        assert!(corollary1_bound(&w, 0.5, 0.5, 0.05).is_err());
        assert!(corollary1_bound(&w, 0.1, 0.1, 0.8).is_err());
        assert!(matches!(
            corollary1_bound(&Channel::useless(1, 2).unwrap(), 0.1, 0.1, 0.1),
            Err(Error::Degenerate(_))
        ));
    }

    #[test]
    fn corollary2_useless_and_bsc() {
        let w = Channel::useless(2, 2).unwrap();
        let r = corollary2_bound(&w, 0.1, 0.1, 0.1, 1e-6).unwrap();
        assert!((r.minmax.main_term + 0.7f64.ln()).abs() < 1e-6);
        assert!((r.maxmin.main_term + 0.7f64.ln()).abs() < 1e-6);
        let bsc = Channel::bsc(0.1).unwrap();
        let r = corollary2_bound(&bsc, 0.1, 0.1, 0.05, 1e-4).unwrap();
        assert!((r.minmax.main_term - r.maxmin.main_term).abs() <= 1e-3);
        assert!(r.minmax.main_term >= r.maxmin.main_term - 1e-12);
    }

    #[test]
    fn existing_bound_useless() {
        let w = Channel::useless(2, 2).unwrap();
        let r = existing_bound(&w, 0.5, 100).unwrap();
        assert!((r.value - (1.0 - (0.25f64).exp() / 10.0)).abs() < 1e-12);
        assert_eq!(r.penalty, crate::resolvability::penalty(0.5, 100));
        assert!(existing_bound(&Channel::useless(5, 2).unwrap(), 0.5, 100).is_err());
    }
}
