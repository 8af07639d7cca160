//! Finite-blocklength sandwich for identification over `W^n`.
//!
//! The converse evaluates the single-shot spectrum bound with the i.i.d.
//! reference `(P_Y*)^n`; by permutation symmetry the maximum over input words
//! is a maximum over compositions, and inputs with identical log-ratio laws
//! are pooled into one class first. The achievability side instantiates the
//! single-shot achievability bound with the blocklength schedule and reads the
//! needed tail probability off the spectrum engine.

use rand::Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::dispersion::{dispersion_analysis, u_eps, u_eps_vertex, v_eps};
use super::gaussian::gaussian_quantile;
use super::spectrum::{
    composition_count, convolve, exact_sum, monte_carlo_sum, spectrum_cdf, LetterLaw, SpectrumCDF, SpectrumMode, SumLaw,
};
use crate::channel::{output_distribution, Channel, Distribution};
use crate::error::{Error, Result};
use crate::extreal::serde_ext;
use crate::minimax::capacity::{blahut_arimoto_refined, DEFAULT_CAPACITY_TOL};
use crate::minimax::converse::{ConverseReport, ConverseVariant, SlackTerms};
use crate::rng::stream_rng;
use crate::testing::ds_from_steps;

pub const DEFAULT_DISPERSION_TOL: f64 = 1e-8;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FiniteNOptions {
    /// Overrides the default `1/sqrt(n)`.
    pub eta: Option<f64>,
    /// Budget on enumerated multinomial terms across all compositions.
    pub work_cap: f64,
    pub mc_samples: u64,
    pub mc_seed: u64,
    /// Random compositions added to the heuristic candidate set.
    pub mc_compositions: usize,
}

impl Default for FiniteNOptions {
    fn default() -> Self {
        FiniteNOptions {
            eta: None,
            work_cap: 5e7,
            mc_samples: 100_000,
            mc_seed: 0,
            mc_compositions: 16,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FiniteNReport {
    pub report: ConverseReport,
    pub n: u64,
    pub capacity: f64,
    /// Per-input letter counts of a maximizing input word.
    pub worst_composition: Vec<u64>,
    pub compositions_evaluated: usize,
    /// Inputs pooled because their log-ratio laws coincide.
    pub input_classes: Vec<Vec<usize>>,
    /// Set when the maximum was taken over a sampled composition set with
    /// Monte Carlo spectra.
    pub heuristic: bool,
    pub mc_samples: Option<u64>,
    pub mc_seed: Option<u64>,
    /// `(main - nC)/sqrt(n)`.
    #[serde(with = "serde_ext")]
    pub normalized_main: f64,
    /// `(bound - nC)/sqrt(n)`.
    #[serde(with = "serde_ext")]
    pub normalized_bound: f64,
}

struct InputClass {
    law: LetterLaw,
    members: Vec<usize>,
}

fn input_classes(w: &Channel, q: &Distribution) -> Vec<InputClass> {
    let mut classes: Vec<InputClass> = Vec::new();
    for x in 0..w.input_size() {
        let law = LetterLaw::row(w.row(x), q.probs());
        match classes.iter_mut().find(|c| c.law.same_as(&law)) {
            Some(c) => c.members.push(x),
            None => classes.push(InputClass { law, members: vec![x] }),
        }
    }
    classes
}

fn compositions(n: u64, parts: usize) -> Vec<Vec<u64>> {
    fn rec(i: usize, left: u64, cur: &mut Vec<u64>, out: &mut Vec<Vec<u64>>) {
        if i + 1 == cur.len() {
            cur[i] = left;
            out.push(cur.clone());
            return;
        }
        for c in (0..=left).rev() {
            cur[i] = c;
            rec(i + 1, left - c, cur, out);
        }
    }
    let mut out = Vec::new();
    rec(0, n, &mut vec![0; parts], &mut out);
    out
}

/// Rounds `n * weights` to a composition by largest remainders.
fn round_composition(n: u64, weights: &[f64]) -> Vec<u64> {
    let total: f64 = weights.iter().sum();
    let scaled: Vec<f64> = weights.iter().map(|w| n as f64 * w / total).collect();
    let mut counts: Vec<u64> = scaled.iter().map(|s| s.floor() as u64).collect();
    let mut order: Vec<usize> = (0..weights.len()).collect();
    order.sort_by(|&a, &b| {
        (scaled[b] - scaled[b].floor())
            .total_cmp(&(scaled[a] - scaled[a].floor()))
            .then(a.cmp(&b))
    });
    let mut left = n - counts.iter().sum::<u64>();
    for i in order.into_iter().cycle() {
        if left == 0 {
            break;
        }
        counts[i] += 1;
        left -= 1;
    }
    counts
}

fn exact_composition_law(classes: &[InputClass], comp: &[u64]) -> SumLaw {
    let mut acc: SumLaw = vec![(0.0, 1.0)];
    for (class, &count) in classes.iter().zip(comp) {
        if count > 0 {
            acc = convolve(&acc, &exact_sum(&class.law, count));
        }
    }
    acc
}

fn composition_work(classes: &[InputClass], comp: &[u64]) -> f64 {
    classes
        .iter()
        .zip(comp)
        .map(|(c, &k)| composition_count(k, c.law.values.len() + usize::from(c.law.inf_mass > 0.0)))
        .product()
}

pub fn finite_n_converse(w: &Channel, n: u64, eps: f64, delta: f64) -> Result<FiniteNReport> {
    finite_n_converse_with(w, n, eps, delta, &FiniteNOptions::default())
}

pub fn finite_n_converse_with(
    w: &Channel,
    n: u64,
    eps: f64,
    delta: f64,
    options: &FiniteNOptions,
) -> Result<FiniteNReport> {
    if n == 0 {
        return Err(Error::domain("blocklength n must be >= 1"));
    }
    if w.input_size() < 2 {
        return Err(Error::Degenerate("log log |X^n| needs at least two inputs".into()));
    }
    if !(eps >= 0.0 && delta >= 0.0 && eps + delta < 1.0) {
        return Err(Error::domain(format!(
            "need eps, delta >= 0 and eps + delta < 1 (got {eps}, {delta})"
        )));
    }
    let eta = options.eta.unwrap_or(1.0 / (n as f64).sqrt());
    if !(eta > 0.0 && eta < 1.0 - eps - delta) {
        return Err(Error::domain(format!(
            "eta = {eta} outside (0, 1 - eps - delta) = (0, {}); use a larger n or set eta explicitly",
            1.0 - eps - delta
        )));
    }
    let level = eps + delta + eta;
    let cap = blahut_arimoto_refined(w, DEFAULT_CAPACITY_TOL)?;
    let q = cap.output_dist.clone();
    let classes = input_classes(w, &q);
    let g = classes.len();

    let exact_comps = if composition_count(n, g) <= options.work_cap {
        let comps = compositions(n, g);
        let work: f64 = comps.iter().map(|c| composition_work(&classes, c)).sum();
        (work <= options.work_cap).then_some(comps)
    } else {
        None
    };
    let heuristic = exact_comps.is_none();
    let comps = match exact_comps {
        Some(c) => c,
        None => heuristic_compositions(n, &classes, &cap.input_dist, options),
    };
    let values: Vec<f64> = comps
        .par_iter()
        .map(|comp| {
            let law = if heuristic {
                let blocks: Vec<(&LetterLaw, u64)> = classes
                    .iter()
                    .zip(comp)
                    .filter(|(_, &k)| k > 0)
                    .map(|(c, &k)| (&c.law, k))
                    .collect();
                monte_carlo_sum(&blocks, options.mc_samples, options.mc_seed)
            } else {
                exact_composition_law(&classes, comp)
            };
            ds_from_steps(law.into_iter(), level).value
        })
        .collect();
    let (best, main) =
        values.iter().copied().enumerate().fold(
            (0, f64::NEG_INFINITY),
            |acc, (i, v)| if v > acc.1 { (i, v) } else { acc },
        );

    let mut worst_composition = vec![0u64; w.input_size()];
    for (class, &k) in classes.iter().zip(&comps[best]) {
        worst_composition[class.members[0]] = k;
    }
    let slack_terms = SlackTerms::new(n as f64 * (w.input_size() as f64).ln(), eta);
    let bound = main + slack_terms.total();
    let nc = n as f64 * cap.capacity;
    let sqrt_n = (n as f64).sqrt();
    Ok(FiniteNReport {
        report: ConverseReport {
            variant: ConverseVariant::FiniteN,
            bound_on_loglog_n: bound,
            main_term: main,
            slack_terms,
            eps,
            delta,
            eta,
            q_used: Some(q),
        },
        n,
        capacity: cap.capacity,
        worst_composition,
        compositions_evaluated: comps.len(),
        input_classes: classes.into_iter().map(|c| c.members).collect(),
        heuristic,
        mc_samples: heuristic.then_some(options.mc_samples),
        mc_seed: heuristic.then_some(options.mc_seed),
        normalized_main: (main - nc) / sqrt_n,
        normalized_bound: (bound - nc) / sqrt_n,
    })
}

/// Pure compositions, the capacity-achieving mix, and seeded random mixes.
fn heuristic_compositions(
    n: u64,
    classes: &[InputClass],
    p_star: &Distribution,
    options: &FiniteNOptions,
) -> Vec<Vec<u64>> {
    let g = classes.len();
    let mut out: Vec<Vec<u64>> = Vec::new();
    let mut push = |c: Vec<u64>| {
        if !out.contains(&c) {
            out.push(c);
        }
    };
    for i in 0..g {
        let mut c = vec![0; g];
        c[i] = n;
        push(c);
    }
    let star: Vec<f64> = classes
        .iter()
        .map(|c| c.members.iter().map(|&x| p_star.probs()[x]).sum())
        .collect();
    push(round_composition(n, &star));
    let mut rng = stream_rng(options.mc_seed, u64::MAX);
    for _ in 0..options.mc_compositions {
        let weights: Vec<f64> = (0..g)
            .map(|_| -rng.random::<f64>().max(f64::MIN_POSITIVE).ln())
            .collect();
        push(round_composition(n, &weights));
    }
    out
}

/// Parameters of the single-shot achievability bound. `K` and `M` are kept
/// in the log domain since the blocklength schedule makes them astronomic.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Lemma5Params {
    pub a: f64,
    pub a_prime: f64,
    pub b: f64,
    pub b_prime: f64,
    pub tau: f64,
    pub kappa: f64,
    pub log_k: f64,
    pub log_m: f64,
    /// `M` itself when it fits in 53 bits.
    pub m: Option<u64>,
    /// `1 - 1/b - 1/b'`.
    pub c: f64,
}

impl Lemma5Params {
    #[allow(clippy::too_many_arguments)]
    pub fn new(a: f64, a_prime: f64, b: f64, b_prime: f64, tau: f64, kappa: f64, k: f64, m: u64) -> Result<Self> {
        if !(k > 0.0) || m == 0 {
            return Err(Error::Constraint(format!(
                "need K > 0 and integer M > 0 (got K = {k}, M = {m})"
            )));
        }
        let p = Lemma5Params {
            a,
            a_prime,
            b,
            b_prime,
            tau,
            kappa,
            log_k: k.ln(),
            log_m: (m as f64).ln(),
            m: Some(m),
            c: 1.0 - 1.0 / b - 1.0 / b_prime,
        };
        p.validate()?;
        Ok(p)
    }

    /// `a = b = 1 + 2/n`, `a' = b' = n + 2`, `tau = 1/(n+2)`,
    /// `kappa = (1 + log 2)/log n`, `K = e^{nR}`, `M = ceil(e^{nR}/(n+2)^4)`.
    pub fn schedule(n: u64, rate: f64) -> Result<Self> {
        if n < 2 {
            return Err(Error::domain("the schedule needs n >= 2"));
        }
        let nf = n as f64;
        let log_k = nf * rate;
        let lm = log_k - 4.0 * (nf + 2.0).ln();
        let (log_m, m) = if lm <= 0.0 {
            (0.0, Some(1))
        } else if lm < 36.0 {
            let m = lm.exp().ceil() as u64;
            ((m as f64).ln(), Some(m))
        } else {
            (lm, None)
        };
        let a = 1.0 + 2.0 / nf;
        let p = Lemma5Params {
            a,
            a_prime: nf + 2.0,
            b: a,
            b_prime: nf + 2.0,
            tau: 1.0 / (nf + 2.0),
            kappa: (1.0 + 2f64.ln()) / nf.ln(),
            log_k,
            log_m,
            m,
            c: 1.0 - 1.0 / a - 1.0 / (nf + 2.0),
        };
        p.validate()?;
        Ok(p)
    }

    pub fn validate(&self) -> Result<()> {
        let fail = |s: String| Err(Error::Constraint(s));
        for (name, v) in [("a", self.a), ("a'", self.a_prime), ("b", self.b), ("b'", self.b_prime)] {
            if !(v > 0.0) {
                return fail(format!("{name} = {v} must be positive"));
            }
        }
        if !(self.tau > 0.0 && self.tau < 1.0 / 3.0) {
            return fail(format!("0 < tau < 1/3 fails (tau = {})", self.tau));
        }
        if !(self.kappa > 0.0 && self.kappa < 1.0) {
            return fail(format!("0 < kappa < 1 fails (kappa = {})", self.kappa));
        }
        let lhs = self.kappa * (1.0 / self.tau - 1.0).ln();
        let rhs = 2f64.ln() + 1.0;
        if !(lhs > rhs) {
            return fail(format!(
                "kappa * log(1/tau - 1) = {lhs:.4} must exceed log 2 + 1 = {rhs:.4}"
            ));
        }
        let s = 1.0 / self.a + 1.0 / self.a_prime;
        if !(s < 1.0) {
            return fail(format!("1 > 1/a + 1/a' fails (1/a + 1/a' = {s})"));
        }
        if !(self.c > 0.0) {
            return fail(format!("c = 1 - 1/b - 1/b' = {} must be positive", self.c));
        }
        if !self.log_k.is_finite() || !(self.log_m >= 0.0) {
            return fail("need finite K > 0 and M >= 1".into());
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Lemma5Point {
    /// `N` when small enough to write out.
    pub n_messages: Option<u128>,
    #[serde(with = "serde_ext")]
    pub ln_n: f64,
    #[serde(with = "serde_ext")]
    pub loglog_n: f64,
    pub eps_bound: f64,
    pub delta_bound: f64,
    /// `a'b' ceil(M/c) / K`.
    pub delta_excess: f64,
    /// `Pr(log W/P_Y <= log K)` as read from the spectrum.
    pub tail_probability: f64,
    pub valid: bool,
}

/// Evaluates the bound; `spectrum` must be the normalized spectrum of the
/// same input law at the blocklength implied by `log_k`.
pub fn lemma5_code_point(params: &Lemma5Params, spectrum: &SpectrumCDF) -> Result<Lemma5Point> {
    params.validate()?;
    let tail = spectrum.cdf_at(params.log_k / spectrum.n as f64);
    let eps_bound = params.a * params.b * tail;

    let ln_ratio = params.log_m - params.c.ln();
    let ln_ceil = if ln_ratio < 50.0 {
        ln_ratio.exp().ceil().ln()
    } else {
        ln_ratio
    };
    let delta_excess = params.a_prime * params.b_prime * (ln_ceil - params.log_k).exp();

    let (n_messages, ln_n, loglog_n) = message_count(params);
    Ok(Lemma5Point {
        n_messages,
        ln_n,
        loglog_n,
        eps_bound,
        delta_bound: params.kappa + delta_excess,
        delta_excess,
        tail_probability: tail,
        valid: eps_bound + delta_excess < 1.0,
    })
}

/// `N = floor(e^{tau M} / (M e))`.
fn message_count(p: &Lemma5Params) -> (Option<u128>, f64, f64) {
    let ln_tau_m = p.tau.ln() + p.log_m;
    if ln_tau_m < 5.0 {
        let m = p.log_m.exp();
        let count = ((p.tau * m).exp() / (m * std::f64::consts::E)).floor();
        let ln_n = if count >= 1.0 { count.ln() } else { f64::NEG_INFINITY };
        let loglog = if count > 1.0 { ln_n.ln() } else { f64::NEG_INFINITY };
        return (Some(count as u128), ln_n, loglog);
    }
    // ln N = tau M - ln M - 1 up to the floor, which is invisible at this size
    let loglog = ln_tau_m + (-(p.log_m + 1.0) * (-ln_tau_m).exp()).ln_1p();
    let ln_n = if ln_tau_m < 700.0 {
        (p.tau * p.log_m.exp()) - p.log_m - 1.0
    } else {
        f64::INFINITY
    };
    (None, ln_n, loglog)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AchievabilityReport {
    pub n: u64,
    pub eps: f64,
    pub capacity: f64,
    pub u_eps: f64,
    pub quantile: f64,
    /// `C + sqrt(U_eps/n) Phi^{-1}(eps)`.
    pub rate: f64,
    pub input: Distribution,
    pub schedule: Lemma5Params,
    pub point: Lemma5Point,
    pub eps_n: f64,
    /// `(1 + log 2)/log n + 2/(n+2)`.
    pub delta_n: f64,
    /// `kappa + a'b' ceil(M/c)/K` as actually computed.
    pub delta_n_computed: f64,
    #[serde(with = "serde_ext")]
    pub loglog_n: f64,
    /// `(n R - log log N)/log n`.
    pub f_constant: f64,
    /// `(log log N - nC)/sqrt(n)`.
    pub normalized_loglog: f64,
    /// `sqrt(U_eps) Phi^{-1}(eps)`.
    pub second_order_target: f64,
    pub mode: SpectrumMode,
}

pub fn achievability_rate(w: &Channel, n: u64, eps: f64, mode: SpectrumMode) -> Result<AchievabilityReport> {
    if !(eps > 0.0 && eps < 1.0) {
        return Err(Error::domain(format!("eps = {eps} outside (0, 1)")));
    }
    // kappa < 1 needs log n > 1 + log 2
    if n < 6 {
        return Err(Error::Constraint(format!(
            "the schedule has kappa = (1 + log 2)/log n < 1 only for n >= 6 (got n = {n})"
        )));
    }
    let disp = dispersion_analysis(w, DEFAULT_DISPERSION_TOL)?;
    let u = u_eps(&disp, eps)?;
    if u <= 1e-12 {
        return Err(Error::Hypothesis(format!(
            "U_eps = {u:e} is zero; the second-order term vanishes"
        )));
    }
    let input = u_eps_vertex(&disp, eps)?.input.clone();
    let q = output_distribution(&input, w)?;
    let quantile = gaussian_quantile(eps)?;
    let nf = n as f64;
    let rate = disp.capacity + (u / nf).sqrt() * quantile;
    let schedule = Lemma5Params::schedule(n, rate)?;
    let spectrum = spectrum_cdf(&input, w, &q, n, mode)?;
    let point = lemma5_code_point(&schedule, &spectrum)?;
    if !point.valid {
        return Err(Error::Constraint(format!(
            "minimum n not yet reached: (1 + 2/n)^2 Pr(...) + a'b' ceil(M/c)/K = {} >= 1 at n = {n}",
            point.eps_bound + point.delta_excess
        )));
    }
    Ok(AchievabilityReport {
        n,
        eps,
        capacity: disp.capacity,
        u_eps: u,
        quantile,
        rate,
        input,
        eps_n: point.eps_bound,
        delta_n: (1.0 + 2f64.ln()) / nf.ln() + 2.0 / (nf + 2.0),
        delta_n_computed: point.delta_bound,
        loglog_n: point.loglog_n,
        f_constant: (nf * rate - point.loglog_n) / nf.ln(),
        normalized_loglog: (point.loglog_n - nf * disp.capacity) / nf.sqrt(),
        second_order_target: u.sqrt() * quantile,
        schedule,
        point,
        mode,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SecondOrderReport {
    pub eps: f64,
    pub capacity: f64,
    pub v_eps: f64,
    pub quantile: f64,
    /// `sqrt(V_eps) Phi^{-1}(eps)` in nats per square-root channel use.
    pub l: f64,
}

pub fn second_order_id_capacity(w: &Channel, eps: f64) -> Result<SecondOrderReport> {
    let disp = dispersion_analysis(w, DEFAULT_DISPERSION_TOL)?;
    let v = v_eps(&disp, eps)?;
    if v <= 1e-12 {
        return Err(Error::Hypothesis(format!(
            "V_eps = {v:e}; the second-order formula needs V_eps > 0"
        )));
    }
    let quantile = gaussian_quantile(eps)?;
    Ok(SecondOrderReport {
        eps,
        capacity: disp.capacity,
        v_eps: v,
        quantile,
        l: v.sqrt() * quantile,
    })
}
