//! Quick invariant checks across all modules, run by `idbounds --selftest`.

use rand::Rng;

use crate::channel::{joint, output_distribution, product_channel, variational_distance, Channel, Distribution};
pub use crate::checks::CheckOutcome;
use crate::checks::{
    closed_forms, lemma5_examples, np_exactness, spectrum_sandwich, theorem1_sandwich, truncation_identity,
};
use crate::idcode::{evaluate, search_codes, IDCode, SearchBudget};
use crate::minimax::{corollary1_bound, saddle_solve};
use crate::oracles::{normal_cdf_series, np_dual};
use crate::resolvability::{theorem1_bound, truncation_error_check, truncation_set};
use crate::rng::stream_rng;
use crate::second_order::{gaussian_quantile, spectrum_cdf, SpectrumMode};
use crate::testing::beta_epsilon;

type Check = fn() -> std::result::Result<String, String>;

fn ensure(cond: bool, detail: String) -> std::result::Result<String, String> {
    if cond {
        Ok(detail)
    } else {
        Err(detail)
    }
}

fn err<E: std::fmt::Display>(e: E) -> String {
    e.to_string()
}

fn random_distribution<R: Rng>(rng: &mut R, k: usize) -> Distribution {
    crate::checks::random_distribution(rng, k, false)
}

fn random_channel<R: Rng>(rng: &mut R, nx: usize, ny: usize) -> Channel {
    crate::checks::random_channel(rng, nx, ny)
}

const CHECKS: &[(&str, Check)] = &[
    ("output distributions are stochastic", || {
        let mut rng = stream_rng(1, 0);
        for _ in 0..200 {
            let w = random_channel(&mut rng, 3, 4);
            let p = random_distribution(&mut rng, 3);
            let q = output_distribution(&p, &w).map_err(err)?;
            let j = joint(&p, &w).map_err(err)?;
            let gap = j
                .marginal_y()
                .iter()
                .zip(q.probs())
                .map(|(a, b)| (a - b).abs())
                .fold(0.0, f64::max);
            if (q.probs().iter().sum::<f64>() - 1.0).abs() > 1e-12 || gap > 1e-12 {
                return Err(format!("marginal gap {gap:e}"));
            }
        }
        Ok("200 random (p, W)".into())
    }),
    ("variational distance triangle inequality", || {
        let mut rng = stream_rng(2, 0);
        for _ in 0..200 {
            let [a, b, c] = [0; 3].map(|_| random_distribution(&mut rng, 5));
            let ab = variational_distance(&a, &b).map_err(err)?;
            let bc = variational_distance(&b, &c).map_err(err)?;
            let ac = variational_distance(&a, &c).map_err(err)?;
            if ac > ab + bc + 1e-12 {
                return Err(format!("{ac} > {ab} + {bc}"));
            }
        }
        Ok("200 random triples".into())
    }),
    ("product channel rows are stochastic", || {
        let mut rng = stream_rng(3, 0);
        let w = random_channel(&mut rng, 2, 3);
        let w3 = product_channel(&w, 3).map_err(err)?;
        let worst = w3
            .rows()
            .map(|r| (r.iter().sum::<f64>() - 1.0).abs())
            .fold(0.0, f64::max);
        ensure(worst < 1e-12, format!("worst row defect {worst:e}"))
    }),
    ("beta matches the LP dual", || {
        let mut rng = stream_rng(4, 0);
        for _ in 0..100 {
            let p = random_distribution(&mut rng, 4);
            let q = random_distribution(&mut rng, 4);
            let eps = rng.random::<f64>() * 0.9;
            let b = beta_epsilon(&p, &q, eps).map_err(err)?.beta;
            let d = np_dual(p.probs(), q.probs(), eps);
            if (b - d).abs() > 1e-9 {
                return Err(format!("beta {b} vs dual {d}"));
            }
        }
        Ok("100 random pairs".into())
    }),
    ("truncation error on a BSC threshold set", || {
        let w = Channel::bsc(0.1).map_err(err)?;
        let q = Distribution::uniform(2);
        let s = truncation_set(&w, &q, 0.5).map_err(err)?;
        let r = truncation_error_check(&Distribution::uniform(2), &w, &s).map_err(err)?;
        ensure(r.equal, format!("{r:?}"))
    }),
    ("soft-cover lower bound on BSC", || {
        let r =
            theorem1_bound(&Channel::bsc(0.1).map_err(err)?, &Distribution::uniform(2), 0.0, 10_000).map_err(err)?;
        ensure(
            (r.lower_bound_on_eps_plus_delta - 0.09).abs() < 1e-12,
            format!("{}", r.lower_bound_on_eps_plus_delta),
        )
    }),
    ("BSC saddle value", || {
        let r = saddle_solve(&Channel::bsc(0.1).map_err(err)?, 0.2, 1e-4).map_err(err)?;
        ensure(
            (r.minmax_value - 4.0 / 9.0).abs() < 1e-4 && r.gap <= 1e-4,
            format!("value {} gap {}", r.minmax_value, r.gap),
        )
    }),
    ("useless channel has no information", || {
        let r = corollary1_bound(&Channel::useless(3, 2).map_err(err)?, 0.1, 0.1, 0.1).map_err(err)?;
        ensure(r.report.main_term <= 1e-12, format!("main term {}", r.report.main_term))
    }),
    ("Gaussian quantile round trip", || {
        let mut rng = stream_rng(6, 0);
        for _ in 0..10_000 {
            let p = rng.random::<f64>().clamp(1e-12, 1.0 - 1e-12);
            let x = gaussian_quantile(p).map_err(err)?;
            if (normal_cdf_series(x) - p).abs() > 1e-10 {
                return Err(format!("p = {p}"));
            }
        }
        Ok("10000 random levels".into())
    }),
    ("two-letter spectrum", || {
        let s = spectrum_cdf(
            &Distribution::uniform(2),
            &Channel::bsc(0.1).map_err(err)?,
            &Distribution::uniform(2),
            2,
            SpectrumMode::ExactDp,
        )
        .map_err(err)?;
        let probs: Vec<f64> = s.levels.iter().map(|l| l.probability).collect();
        let ok = probs.len() == 3 && probs.iter().zip([0.01, 0.18, 0.81]).all(|(a, b)| (a - b).abs() < 1e-12);
        ensure(ok, format!("{probs:?}"))
    }),
    ("ID code evaluation on the identity channel", || {
        let code = IDCode::new(
            vec![Distribution::point_mass(2, 0), Distribution::point_mass(2, 1)],
            vec![vec![0], vec![1]],
        )
        .map_err(err)?;
        let e = evaluate(&code, &Channel::identity(2).map_err(err)?).map_err(err)?;
        ensure(e.type1 == 0.0 && e.type2 == 0.0, format!("{} {}", e.type1, e.type2))
    }),
    ("code search is monotone in the budget", || {
        let w = Channel::bsc(0.05).map_err(err)?;
        let small = search_codes(&w, 0.2, 0.2, SearchBudget { candidates: 8 }, 7)
            .map_err(err)?
            .n;
        let large = search_codes(&w, 0.2, 0.2, SearchBudget { candidates: 64 }, 7)
            .map_err(err)?
            .n;
        ensure(small <= large, format!("N = {small} at budget 8, {large} at budget 64"))
    }),
];

/// The shared seeded checks followed by the module invariants.
pub fn run_all() -> Vec<CheckOutcome> {
    let mut out = vec![
        spectrum_sandwich(1000, 1),
        np_exactness(200, 2),
        truncation_identity(500, 3),
        theorem1_sandwich(4),
        closed_forms(),
        lemma5_examples(),
    ];
    out.extend(CHECKS.iter().map(|(name, check)| {
        let (passed, detail) = match std::panic::catch_unwind(check) {
            Ok(Ok(d)) => (true, d),
            Ok(Err(d)) => (false, d),
            Err(_) => (false, "panicked".to_string()),
        };
        CheckOutcome {
            name: name.to_string(),
            passed,
            detail,
        }
    }));
    out
}
