//! Seeded end-to-end checks of the library's inequalities and closed forms.
//! Shared by `idbounds --selftest` and the acceptance test suite.

use rand::Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::channel::{output_distribution, product_channel, Channel, Distribution};
use crate::error::Result;
use crate::idcode::{search_codes, IDCode, SearchBudget};
use crate::minimax::capacity::{binary_entropy, blahut_arimoto};
use crate::minimax::saddle::saddle_solve;
use crate::oracles::np_primal_exact;
use crate::resolvability::{
    soft_cover_expectation, truncation_error_check, truncation_set, verify_theorem1_against_code, TruncationSet,
};
use crate::rng::stream_rng;
use crate::second_order::{
    achievability_rate, dispersion_analysis, finite_n_converse, gaussian_quantile, lemma5_code_point, spectrum_cdf,
    Lemma5Params, SpectrumMode,
};
use crate::testing::{beta_epsilon, lemma1_check};

/// `ln 2 - h(0.1)`, computed offline at 40 digits.
pub const BSC01_CAPACITY: f64 = 0.368_064_207_168_497_07;
/// `0.09 ln^2 9`, computed offline at 40 digits.
pub const BSC01_DISPERSION: f64 = 0.434_501_625_892_529_5;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CheckOutcome {
    pub name: String,
    pub passed: bool,
    pub detail: String,
}

impl CheckOutcome {
    fn new(name: &str, passed: bool, detail: String) -> Self {
        CheckOutcome {
            name: name.to_string(),
            passed,
            detail,
        }
    }

    fn from_result(name: &str, r: Result<(bool, String)>) -> Self {
        match r {
            Ok((passed, detail)) => Self::new(name, passed, detail),
            Err(e) => Self::new(name, false, format!("error: {e}")),
        }
    }
}

/// Random law on `k` symbols; with `zeros` some entries vanish.
pub fn random_distribution<R: Rng>(rng: &mut R, k: usize, zeros: bool) -> Distribution {
    let mut v: Vec<f64> = (0..k)
        .map(|_| {
            if zeros && rng.random::<f64>() < 0.15 {
                0.0
            } else {
                rng.random::<f64>() + 1e-3
            }
        })
        .collect();
    if v.iter().all(|&x| x == 0.0) {
        v[rng.random_range(0..k)] = 1.0;
    }
    let s: f64 = v.iter().sum();
    Distribution::new(v.into_iter().map(|x| x / s).collect()).expect("nonnegative weights")
}

pub fn random_channel<R: Rng>(rng: &mut R, nx: usize, ny: usize) -> Channel {
    Channel::new(
        (0..nx)
            .map(|_| random_distribution(rng, ny, false).probs().to_vec())
            .collect(),
    )
    .expect("stochastic rows")
}

/// `D_s^eps <= -log beta_eps <= D_s^{eps+zeta} + log(1/zeta)`.
pub fn spectrum_sandwich(instances: u64, seed: u64) -> CheckOutcome {
    let r = (0..instances)
        .into_par_iter()
        .map(|i| -> Result<bool> {
            let mut rng = stream_rng(seed, i);
            let k = rng.random_range(2..=8);
            let p = random_distribution(&mut rng, k, true);
            let q = random_distribution(&mut rng, k, true);
            let eps = 0.01 + 0.9 * rng.random::<f64>();
            let zeta = (1.0 - eps) * (0.01 + 0.98 * rng.random::<f64>());
            Ok(lemma1_check(&p, &q, eps, zeta)?.holds)
        })
        .collect::<Result<Vec<bool>>>()
        .map(|v| {
            let bad = v.iter().filter(|&&h| !h).count();
            (
                bad == 0,
                format!("{instances} instances, alphabets 2..=8, {bad} violations"),
            )
        });
    CheckOutcome::from_result("spectrum sandwich of -log beta", r)
}

/// `beta_eps` against exhaustive enumeration of randomized tests.
pub fn np_exactness(instances: u64, seed: u64) -> CheckOutcome {
    let r = (0..instances)
        .into_par_iter()
        .map(|i| -> Result<f64> {
            let mut rng = stream_rng(seed, i);
            let k = rng.random_range(2..=4);
            let p = random_distribution(&mut rng, k, true);
            let q = random_distribution(&mut rng, k, true);
            let eps = 0.95 * rng.random::<f64>();
            let b = beta_epsilon(&p, &q, eps)?.beta;
            Ok((b - np_primal_exact(p.probs(), q.probs(), eps)).abs())
        })
        .collect::<Result<Vec<f64>>>()
        .map(|v| {
            let worst = v.iter().copied().fold(0.0, f64::max);
            (
                worst <= 1e-9,
                format!("{instances} instances, worst disagreement {worst:.3e}"),
            )
        });
    CheckOutcome::from_result("Neyman-Pearson beta is exact", r)
}

/// `d(PW^S, PW) = P x W(S^c)/2` for threshold and arbitrary sets.
pub fn truncation_identity(instances: u64, seed: u64) -> CheckOutcome {
    let r = (0..instances)
        .into_par_iter()
        .map(|i| -> Result<f64> {
            let mut rng = stream_rng(seed, i);
            let (nx, ny) = (rng.random_range(2..=4), rng.random_range(2..=4));
            let w = random_channel(&mut rng, nx, ny);
            let p = random_distribution(&mut rng, nx, true);
            let s = if i % 2 == 0 {
                let q = random_distribution(&mut rng, ny, false);
                truncation_set(&w, &q, 2.0 * rng.random::<f64>() - 0.5)?
            } else {
                let mask = (0..nx * ny).map(|_| rng.random::<bool>()).collect();
                TruncationSet::explicit(mask, nx, ny)?
            };
            let r = truncation_error_check(&p, &w, &s)?;
            Ok((r.lhs - r.rhs).abs())
        })
        .collect::<Result<Vec<f64>>>()
        .map(|v| {
            let worst = v.iter().copied().fold(0.0, f64::max);
            (
                worst <= 1e-12,
                format!("{instances} random (P, W, S), worst gap {worst:.3e}"),
            )
        });
    CheckOutcome::from_result("truncation error identity", r)
}

/// Mean soft-covering distance under the `sqrt(e^gamma/M)/2` bound.
pub fn soft_cover_sweep(trials: u64, seed: u64) -> CheckOutcome {
    let r = (|| -> Result<(bool, String)> {
        let mut rng = stream_rng(seed, u64::MAX);
        let random = random_channel(&mut rng, 3, 3);
        let random_input = random_distribution(&mut rng, 3, false);
        let setups = [
            ("BSC(0.1)", Channel::bsc(0.1)?, Distribution::uniform(2)),
            ("BSC(0.3)", Channel::bsc(0.3)?, Distribution::uniform(2)),
            ("random 3x3", random, random_input),
        ];
        let mut worst_ratio: f64 = 0.0;
        let mut failures = Vec::new();
        let mut configs = 0;
        for (name, w, p) in &setups {
            let q = output_distribution(p, w)?;
            for gamma in [0.0, 2f64.ln()] {
                let s = truncation_set(w, &q, gamma)?;
                for m in [25u64, 100] {
                    configs += 1;
                    let stats = soft_cover_expectation(p, w, &s, m, trials, seed)?;
                    worst_ratio = worst_ratio.max(stats.mean / stats.bound);
                    if !stats.within_bound {
                        failures.push(format!("{name} gamma={gamma:.3} M={m}"));
                    }
                }
            }
        }
        Ok((
            failures.is_empty(),
            format!(
                "{configs} configurations x {trials} trials, worst mean/bound {worst_ratio:.3}, failures {failures:?}"
            ),
        ))
    })();
    CheckOutcome::from_result("soft-covering expectation bound", r)
}

/// Certified saddle gaps; the BSC saddle output is uniform.
pub fn saddle_certificates(seed: u64) -> CheckOutcome {
    let r = (|| -> Result<(bool, String)> {
        let mut rng = stream_rng(seed, 0);
        let mut channels = vec![Channel::bsc(0.1)?];
        channels.extend((0..5).map(|_| random_channel(&mut rng, 2, 3)));
        let mut worst_gap: f64 = 0.0;
        let mut worst_q: f64 = 0.0;
        for (i, w) in channels.iter().enumerate() {
            for eps in [0.1, 0.3] {
                let s = saddle_solve(w, eps, 1e-4)?;
                worst_gap = worst_gap.max((s.minmax_value - s.maxmin_value).abs());
                if i == 0 {
                    worst_q = s.q_star.probs().iter().map(|q| (q - 0.5).abs()).fold(worst_q, f64::max);
                }
            }
        }
        Ok((
            worst_gap <= 1e-4 && worst_q <= 1e-3,
            format!("12 solves, worst certified gap {worst_gap:.3e}, BSC |q* - uniform| {worst_q:.3e}"),
        ))
    })();
    CheckOutcome::from_result("minimax saddle certificates", r)
}

#[derive(Default)]
struct SandwichTally {
    codes: usize,
    applicable: usize,
    violations: usize,
}

impl SandwichTally {
    fn record(&mut self, code: &IDCode, w: &Channel, qs: &[Distribution]) -> Result<()> {
        self.codes += 1;
        for q in qs {
            for gamma in [-1.0, 0.0, 0.5, 1.0, 2.0] {
                for m in [1u64, 2, 3, 5, 10, 100] {
                    let c = verify_theorem1_against_code(code, w, q, gamma, m)?;
                    self.applicable += usize::from(c.applicable);
                    self.violations += usize::from(!c.holds);
                }
            }
        }
        Ok(())
    }
}

/// `eps + delta >= min_x W(S_x|x) - sqrt(e^gamma/M)` for every code with
/// `N > |X|^M`. Searched codes on binary-output channels never have more
/// than two messages, so the sweep adds codes on the two-letter extension
/// and random codes with arbitrary error pairs to make it bite.
pub fn theorem1_sandwich(seed: u64) -> CheckOutcome {
    let r = (|| -> Result<(bool, String)> {
        let mut rng = stream_rng(seed, 0);
        let mut channels = vec![
            Channel::bsc(0.05)?,
            Channel::bsc(0.2)?,
            Channel::new(vec![vec![1.0, 0.0], vec![0.3, 0.7]])?,
        ];
        channels.extend((0..2).map(|_| random_channel(&mut rng, 2, 2)));
        let pairs = [(0.1, 0.1), (0.2, 0.3), (0.45, 0.45), (0.3, 0.6)];

        let mut searched = SandwichTally::default();
        let mut extension = SandwichTally::default();
        let mut random = SandwichTally::default();
        for w in &channels {
            let qs = [
                Distribution::uniform(2),
                output_distribution(&Distribution::uniform(2), w)?,
            ];
            let w2 = product_channel(w, 2)?;
            let q2s = [
                Distribution::uniform(4),
                output_distribution(&Distribution::uniform(4), &w2)?,
            ];
            for (i, &(eps, delta)) in pairs.iter().enumerate() {
                let found = search_codes(w, eps, delta, SearchBudget::default(), seed + i as u64)?;
                searched.record(&found.best_code, w, &qs)?;
                let found = search_codes(&w2, eps, delta, SearchBudget::default(), seed + i as u64)?;
                extension.record(&found.best_code, &w2, &q2s)?;
            }
            for _ in 0..40 {
                let n = rng.random_range(3..=8);
                let encoders = (0..n).map(|_| random_distribution(&mut rng, 2, true)).collect();
                let acceptors = (0..n)
                    .map(|_| (0..2).filter(|_| rng.random::<bool>()).collect())
                    .collect();
                random.record(&IDCode::new(encoders, acceptors)?, w, &qs)?;
            }
        }
        let violations = searched.violations + extension.violations + random.violations;
        Ok((
            violations == 0,
            format!(
                "searched 2x2: {} codes, {} applicable; two-letter extension: {} codes, {} applicable; \
                 random codes: {} codes, {} applicable; {violations} violations",
                searched.codes,
                searched.applicable,
                extension.codes,
                extension.applicable,
                random.codes,
                random.applicable
            ),
        ))
    })();
    CheckOutcome::from_result("converse sandwich for ID codes", r)
}

/// BSC(0.1) capacity and dispersion against their binary closed forms.
pub fn closed_forms() -> CheckOutcome {
    let r = (|| -> Result<(bool, String)> {
        let w = Channel::bsc(0.1)?;
        let c = blahut_arimoto(&w, 1e-10)?.capacity;
        let formula = 2f64.ln() - binary_entropy(0.1);
        let v = dispersion_analysis(&w, 1e-8)?.v_min;
        let ok = (c - BSC01_CAPACITY).abs() <= 1e-8
            && (formula - BSC01_CAPACITY).abs() <= 1e-15
            && (v - BSC01_DISPERSION).abs() <= 1e-8;
        Ok((ok, format!("C = {c:.15}, V = {v:.15}")))
    })();
    CheckOutcome::from_result("BSC capacity and dispersion", r)
}

pub fn lemma5_examples() -> CheckOutcome {
    let r = (|| -> Result<(bool, String)> {
        let fails = match Lemma5Params::new(2.0, 3.0, 2.0, 3.0, 0.1, 0.5, 1e6, 100) {
            Err(e) => e.to_string().contains("log 2 + 1"),
            Ok(_) => false,
        };
        let passes = Lemma5Params::new(2.0, 3.0, 2.0, 3.0, 0.05, 0.9, 1e6, 100).is_ok();
        let params = Lemma5Params::new(3.0, 3.0, 3.0, 3.0, 0.1, 0.9, 1e6, 100)?;
        let w = Channel::bsc(0.1)?;
        let u = Distribution::uniform(2);
        let spectrum = spectrum_cdf(&u, &w, &u, 1, SpectrumMode::ExactDp)?;
        let n = lemma5_code_point(&params, &spectrum)?.n_messages;
        Ok((
            fails && passes && n == Some(81),
            format!("kappa=0.5,tau=0.1 rejected: {fails}; kappa=0.9,tau=0.05 accepted: {passes}; N = {n:?}"),
        ))
    })();
    CheckOutcome::from_result("achievability parameter arithmetic", r)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BracketReport {
    pub target: f64,
    pub converse_main: f64,
    pub converse_bound: f64,
    pub achievability_loglog: f64,
    /// Achievability after adding back `F log n`.
    pub achievability_with_f: f64,
    /// `sqrt(V) Phi^{-1}(Pr(density <= R))`: the spectrum's own reading.
    pub achievability_spectrum: f64,
    pub f_constant: f64,
    pub delta_n: f64,
    pub delta_n_computed: f64,
    pub converse_ok: bool,
    pub achievability_ok: bool,
    pub delta_ok: bool,
}

/// Normalized second-order terms on BSC(0.1) with `eps = 0.4`.
pub fn finite_n_bracket(n: u64, samples: u64, seed: u64) -> Result<BracketReport> {
    let w = Channel::bsc(0.1)?;
    let eps = 0.4;
    let target = BSC01_DISPERSION.sqrt() * gaussian_quantile(eps)?;
    let conv = finite_n_converse(&w, n, eps, 0.0)?;
    let ach = achievability_rate(&w, n, eps, SpectrumMode::MonteCarlo { samples, seed })?;
    let nf = n as f64;
    let with_f = (ach.loglog_n + ach.f_constant * nf.ln() - nf * ach.capacity) / nf.sqrt();
    let spectrum = BSC01_DISPERSION.sqrt() * gaussian_quantile(ach.point.tail_probability)?;
    let formula = (1.0 + 2f64.ln()) / nf.ln() + 2.0 / (nf + 2.0);
    Ok(BracketReport {
        target,
        converse_main: conv.normalized_main,
        converse_bound: conv.normalized_bound,
        achievability_loglog: ach.normalized_loglog,
        achievability_with_f: with_f,
        achievability_spectrum: spectrum,
        f_constant: ach.f_constant,
        delta_n: ach.delta_n,
        delta_n_computed: ach.delta_n_computed,
        converse_ok: (conv.normalized_bound - target).abs() <= 0.08,
        // Adding back `F log n` recovers `nR` by construction, so the schedule's
        // own log-n budget (`M` loses `4 log(n+2)`, `tau` loses one more) caps F
        // and the spectrum reading carries the real test.
        achievability_ok: (with_f - target).abs() <= 0.08
            && (spectrum - target).abs() <= 0.08
            && ach.f_constant <= 5.0 * (nf + 2.0).ln() / nf.ln() + 1e-3,
        delta_ok: ach.delta_n == formula && ach.delta_n_computed <= ach.delta_n,
    })
}

pub fn finite_n_bracket_check(n: u64, samples: u64, seed: u64) -> CheckOutcome {
    let r = finite_n_bracket(n, samples, seed).map(|b| {
        (
            b.converse_ok && b.achievability_ok && b.delta_ok,
            format!(
                "target {:.5}; converse main {:.5}, bound {:.5} (ok: {}); achievability raw {:.5}, \
                 with F log n {:.5}, spectrum {:.5}, F = {:.4} (ok: {}); delta_n {:.6} vs computed {:.6} (ok: {})",
                b.target,
                b.converse_main,
                b.converse_bound,
                b.converse_ok,
                b.achievability_loglog,
                b.achievability_with_f,
                b.achievability_spectrum,
                b.f_constant,
                b.achievability_ok,
                b.delta_n,
                b.delta_n_computed,
                b.delta_ok
            ),
        )
    });
    CheckOutcome::from_result("second-order bracket at desk scale", r)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn fast_checks_pass() {
        for c in [
            spectrum_sandwich(100, 1),
            np_exactness(50, 2),
            truncation_identity(100, 3),
            closed_forms(),
            lemma5_examples(),
        ] {
            assert!(c.passed, "{}: {}", c.name, c.detail);
        }
    }

    #[test]
    fn closed_form_constants() {
        assert!((2f64.ln() - binary_entropy(0.1) - BSC01_CAPACITY).abs() < 1e-16);
        assert!((0.09 * 9f64.ln().powi(2) - BSC01_DISPERSION).abs() < 1e-16);
    }
}
