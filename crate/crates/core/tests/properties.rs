use idbounds_core::channel::{output_distribution, variational_distance, Channel, Distribution, Masses};
use idbounds_core::idcode::{evaluate, search_codes, SearchBudget};
use idbounds_core::oracles::np_primal_exact;
use idbounds_core::resolvability::{truncation_error_check, truncation_set};
use idbounds_core::second_order::{gaussian_quantile, normal_cdf, spectrum_cdf, Lemma5Params, SpectrumMode};
use idbounds_core::testing::{beta_epsilon, ds_epsilon, lemma1_check};
use proptest::prelude::*;

fn law(k: usize) -> impl Strategy<Value = Distribution> {
    prop::collection::vec(prop_oneof![1 => Just(0.0), 6 => 0.01f64..1.0], k).prop_map(|mut v| {
        if v.iter().all(|&x| x == 0.0) {
            v[0] = 1.0;
        }
        let s: f64 = v.iter().sum();
        Distribution::new(v.into_iter().map(|x| x / s).collect()).unwrap()
    })
}

fn positive_law(k: usize) -> impl Strategy<Value = Distribution> {
    prop::collection::vec(0.01f64..1.0, k).prop_map(|v| {
        let s: f64 = v.iter().sum();
        Distribution::new(v.into_iter().map(|x| x / s).collect()).unwrap()
    })
}

fn channel(nx: usize, ny: usize) -> impl Strategy<Value = Channel> {
    prop::collection::vec(positive_law(ny), nx)
        .prop_map(|rows| Channel::new(rows.iter().map(|r| r.probs().to_vec()).collect()).unwrap())
}

fn pair() -> impl Strategy<Value = (Distribution, Distribution)> {
    (2usize..=6).prop_flat_map(|k| (law(k), law(k)))
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(200))]

    #[test]
    fn variational_distance_is_a_metric((p, q) in pair(), seed in 0usize..1000) {
        let k = p.len();
        let r = Distribution::point_mass(k, seed % k);
        let pq = variational_distance(&p, &q).unwrap();
        prop_assert!((0.0..=1.0 + 1e-12).contains(&pq));
        prop_assert!((pq - variational_distance(&q, &p).unwrap()).abs() <= 1e-15);
        prop_assert!(variational_distance(&p, &p).unwrap() == 0.0);
        let via = variational_distance(&p, &r).unwrap() + variational_distance(&r, &q).unwrap();
        prop_assert!(pq <= via + 1e-12);
    }

    #[test]
    fn output_distribution_is_a_law(w in channel(3, 4), p in law(3)) {
        let q = output_distribution(&p, &w).unwrap();
        prop_assert!((q.probs().iter().sum::<f64>() - 1.0).abs() <= 1e-12);
        prop_assert!(q.probs().iter().all(|&x| x >= 0.0));
    }

    #[test]
    fn beta_matches_the_primal_oracle((p, q) in pair(), eps in 0.0f64..0.95) {
        let b = beta_epsilon(&p, &q, eps).unwrap();
        prop_assert!((b.beta - np_primal_exact(p.probs(), q.probs(), eps)).abs() <= 1e-9);
        prop_assert!(b.type1 <= eps + 1e-12);
        prop_assert!((0.0..=1.0).contains(&b.beta));
    }

    #[test]
    fn beta_and_ds_are_monotone_in_eps((p, q) in pair(), e1 in 0.0f64..0.9, e2 in 0.0f64..0.9) {
        let (lo, hi) = if e1 <= e2 { (e1, e2) } else { (e2, e1) };
        prop_assert!(beta_epsilon(&p, &q, hi).unwrap().beta <= beta_epsilon(&p, &q, lo).unwrap().beta + 1e-12);
        prop_assert!(ds_epsilon(&p, &q, lo).unwrap().value <= ds_epsilon(&p, &q, hi).unwrap().value);
    }

    #[test]
    fn spectrum_sandwich_holds((p, q) in pair(), eps in 0.01f64..0.9, frac in 0.01f64..0.99) {
        let zeta = (1.0 - eps) * frac;
        prop_assert!(lemma1_check(&p, &q, eps, zeta).unwrap().holds);
    }

    #[test]
    fn truncation_error_identity(w in channel(3, 3), p in law(3), q in positive_law(3), gamma in -0.5f64..1.5) {
        let s = truncation_set(&w, &q, gamma).unwrap();
        let r = truncation_error_check(&p, &w, &s).unwrap();
        prop_assert!((r.lhs - r.rhs).abs() <= 1e-12);
    }

    #[test]
    fn spectrum_moments_scale_with_n(w in channel(2, 3), p in positive_law(2), n in 1u64..12) {
        let q = output_distribution(&p, &w).unwrap();
        let one = spectrum_cdf(&p, &w, &q, 1, SpectrumMode::ExactDp).unwrap();
        let many = spectrum_cdf(&p, &w, &q, n, SpectrumMode::ExactDp).unwrap();
        let nf = n as f64;
        prop_assert!((many.total_mass() - 1.0).abs() <= 1e-9);
        prop_assert!((many.mean() * nf - one.mean() * nf).abs() <= 1e-9 * nf.max(1.0));
        prop_assert!((many.variance() * nf * nf - one.variance() * nf).abs() <= 1e-8 * nf);
    }

    #[test]
    fn quantile_round_trip(p in 1e-12f64..(1.0 - 1e-12)) {
        let x = gaussian_quantile(p).unwrap();
        prop_assert!((normal_cdf(x) - p).abs() <= 1e-14 + 1e-12 * p.min(1.0 - p));
    }

    #[test]
    fn schedule_is_valid_and_keeps_delta(n in 6u64..5000, rate in 0.05f64..0.6) {
        let s = Lemma5Params::schedule(n, rate).unwrap();
        prop_assert!(s.validate().is_ok());
        let nf = n as f64;
        prop_assert!((s.kappa - (1.0 + 2f64.ln()) / nf.ln()).abs() <= 1e-15);
        prop_assert!(s.c > 0.0 && s.kappa < 1.0);
        prop_assert!((s.log_k - nf * rate).abs() <= 1e-9 * nf);
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(24))]

    #[test]
    fn searched_codes_meet_their_targets(w in channel(2, 3), eps in 0.05f64..0.45, delta in 0.05f64..0.45) {
        let found = search_codes(&w, eps, delta, SearchBudget { candidates: 512 }, 7).unwrap();
        let eval = evaluate(&found.best_code, &w).unwrap();
        prop_assert!(eval.type1 <= eps + 1e-9 && eval.type2 <= delta + 1e-9);
        prop_assert_eq!(found.n, found.best_code.len());
    }
}

#[test]
fn search_grows_with_the_error_budget() {
    let w = Channel::bsc(0.05).unwrap();
    let mut last = 0;
    for budget in [0.05, 0.2, 0.45] {
        let found = search_codes(&w, budget, budget, SearchBudget::default(), 3).unwrap();
        assert!(found.n >= last, "N fell from {last} to {} at budget {budget}", found.n);
        last = found.n;
    }
    assert!(last >= 2);
}
