//! Truncated channels, partial responses and the soft-covering construction
//! with auxiliary output distribution, together with the resulting
//! converse inequality for identification codes.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::channel::{output_distribution, tv, Channel, Distribution, MType, Masses, SubDistribution};
use crate::error::{check_dim, Error, Result};
use crate::extreal::log_ratio;
use crate::idcode::{evaluate, IDCode};
use crate::rng::{stream_rng, IndexSampler};

/// Where a truncation set came from.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Provenance {
    /// `S(Q, gamma) = {(x,y) : log W(y|x)/Q(y) <= gamma}`.
    Threshold {
        q: Distribution,
        gamma: f64,
    },
    Explicit,
}

/// A subset of `X x Y`, stored as a row-major mask.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TruncationSet {
    mask: Vec<bool>,
    input_size: usize,
    output_size: usize,
    source: Provenance,
}

impl TruncationSet {
    pub fn explicit(mask: Vec<bool>, input_size: usize, output_size: usize) -> Result<Self> {
        check_dim("truncation mask", input_size * output_size, mask.len())?;
        Ok(TruncationSet {
            mask,
            input_size,
            output_size,
            source: Provenance::Explicit,
        })
    }

    pub fn full(input_size: usize, output_size: usize) -> Self {
        TruncationSet {
            mask: vec![true; input_size * output_size],
            input_size,
            output_size,
            source: Provenance::Explicit,
        }
    }

    pub fn empty(input_size: usize, output_size: usize) -> Self {
        TruncationSet {
            mask: vec![false; input_size * output_size],
            input_size,
            output_size,
            source: Provenance::Explicit,
        }
    }

    pub fn contains(&self, x: usize, y: usize) -> bool {
        self.mask[x * self.output_size + y]
    }

    pub fn mask(&self) -> &[bool] {
        &self.mask
    }

    pub fn source(&self) -> &Provenance {
        &self.source
    }

    pub fn is_threshold_shaped(&self) -> bool {
        matches!(self.source, Provenance::Threshold { .. })
    }

    fn check_channel(&self, w: &Channel) -> Result<()> {
        check_dim("truncation set inputs", w.input_size(), self.input_size)?;
        check_dim("truncation set outputs", w.output_size(), self.output_size)
    }

    /// `P x W(S)` for input `p`.
    pub fn joint_mass(&self, p: &Distribution, w: &Channel) -> Result<f64> {
        self.check_channel(w)?;
        check_dim("input distribution", w.input_size(), p.len())?;
        Ok((0..w.input_size()).map(|x| p.probs()[x] * self.row_mass(w, x)).sum())
    }

    /// `W(S_x | x)`, the kept mass of row `x`.
    pub fn row_mass(&self, w: &Channel, x: usize) -> f64 {
        w.row(x)
            .iter()
            .enumerate()
            .filter(|&(y, _)| self.contains(x, y))
            .map(|(_, v)| v)
            .sum()
    }
}

/// The set `S(Q, gamma)`. Pairs with `W(y|x) = 0` are always kept (ratio
/// `-inf`); pairs with `Q(y) = 0 < W(y|x)` are always dropped (`+inf`).
pub fn truncation_set(w: &Channel, q: &Distribution, gamma: f64) -> Result<TruncationSet> {
    check_dim("output distribution", w.output_size(), q.len())?;
    let mut mask = Vec::with_capacity(w.input_size() * w.output_size());
    for row in w.rows() {
        for (&wy, &qy) in row.iter().zip(q.probs()) {
            let keep = match log_ratio(wy, qy) {
                None => true,
                Some(r) => r <= gamma,
            };
            mask.push(keep);
        }
    }
    Ok(TruncationSet {
        mask,
        input_size: w.input_size(),
        output_size: w.output_size(),
        source: Provenance::Threshold { q: q.clone(), gamma },
    })
}

fn partial_response_raw(p: &[f64], w: &Channel, s: &TruncationSet) -> Vec<f64> {
    let mut out = vec![0.0; w.output_size()];
    for (x, (&px, row)) in p.iter().zip(w.rows()).enumerate() {
        if px == 0.0 {
            continue;
        }
        for (y, (o, &wy)) in out.iter_mut().zip(row).enumerate() {
            if s.contains(x, y) {
                *o += px * wy;
            }
        }
    }
    out
}

/// `PW^S(y) = sum_x P(x) W(y|x) 1[(x,y) in S]`.
pub fn partial_response(p: &Distribution, w: &Channel, s: &TruncationSet) -> Result<SubDistribution> {
    check_dim("input distribution", w.input_size(), p.len())?;
    s.check_channel(w)?;
    SubDistribution::new(partial_response_raw(p.probs(), w, s))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TruncationErrorReport {
    /// `d(PW^S, PW)`.
    pub lhs: f64,
    /// `P x W(S^c) / 2`.
    pub rhs: f64,
    pub equal: bool,
}

pub fn truncation_error_check(p: &Distribution, w: &Channel, s: &TruncationSet) -> Result<TruncationErrorReport> {
    let partial = partial_response(p, w, s)?;
    let full = output_distribution(p, w)?;
    let lhs = tv(partial.masses(), full.masses());
    let dropped: f64 = p
        .probs()
        .iter()
        .zip(w.rows())
        .enumerate()
        .map(|(x, (px, row))| {
            px * row
                .iter()
                .enumerate()
                .filter(|&(y, _)| !s.contains(x, y))
                .map(|(_, v)| v)
                .sum::<f64>()
        })
        .sum();
    let rhs = dropped / 2.0;
    Ok(TruncationErrorReport {
        lhs,
        rhs,
        equal: (lhs - rhs).abs() <= 1e-12,
    })
}

/// `1/2 sqrt(e^gamma / m)`.
pub fn soft_cover_bound(gamma: f64, m: u64) -> f64 {
    0.5 * penalty(gamma, m)
}

/// `sqrt(e^gamma / m)`, evaluated as `exp(gamma/2) / sqrt(m)`.
pub fn penalty(gamma: f64, m: u64) -> f64 {
    (gamma / 2.0).exp() / (m as f64).sqrt()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SoftCoverTrial {
    pub mtype: MType,
    /// `d(P~W^S, PW^S)`.
    pub distance: f64,
    pub seed: u64,
    pub stream: u64,
    /// Set when `S` was not built from `(Q, gamma)`; the soft-covering bound
    /// is not claimed for such sets.
    pub explicit_set: bool,
}

/// Precomputed state for repeated codebook draws.
struct Cover<'a> {
    w: &'a Channel,
    s: &'a TruncationSet,
    sampler: IndexSampler,
    target: Vec<f64>,
    m: u64,
    k: usize,
}

impl<'a> Cover<'a> {
    fn new(p: &Distribution, w: &'a Channel, s: &'a TruncationSet, m: u64) -> Result<Self> {
        if m == 0 {
            return Err(Error::domain("codebook size M must be >= 1"));
        }
        check_dim("input distribution", w.input_size(), p.len())?;
        s.check_channel(w)?;
        Ok(Cover {
            w,
            s,
            sampler: IndexSampler::new(p.probs()),
            target: partial_response_raw(p.probs(), w, s),
            m,
            k: p.len(),
        })
    }

    fn trial(&self, seed: u64, stream: u64) -> SoftCoverTrial {
        let mut rng = stream_rng(seed, stream);
        let mut counts = vec![0u64; self.k];
        for _ in 0..self.m {
            counts[self.sampler.sample(&mut rng)] += 1;
        }
        let mtype = MType::from_counts(counts).expect("m >= 1");
        let approx = partial_response_raw(mtype.to_distribution().probs(), self.w, self.s);
        SoftCoverTrial {
            distance: tv(&approx, &self.target),
            mtype,
            seed,
            stream,
            explicit_set: !self.s.is_threshold_shaped(),
        }
    }
}

/// Draws `m` i.i.d. symbols from `p` and measures how well their type
/// reproduces the partial response. Uses stream 0 of `seed`.
pub fn soft_cover_sample(
    p: &Distribution,
    w: &Channel,
    s: &TruncationSet,
    m: u64,
    seed: u64,
) -> Result<SoftCoverTrial> {
    Ok(Cover::new(p, w, s, m)?.trial(seed, 0))
}

/// Best of `trials` independent codebooks (streams `0..trials`).
pub fn soft_cover_best_of(
    p: &Distribution,
    w: &Channel,
    s: &TruncationSet,
    m: u64,
    trials: u64,
    seed: u64,
) -> Result<SoftCoverTrial> {
    if trials == 0 {
        return Err(Error::domain("trials must be >= 1"));
    }
    let cover = Cover::new(p, w, s, m)?;
    let all: Vec<SoftCoverTrial> = (0..trials).into_par_iter().map(|t| cover.trial(seed, t)).collect();
    // first minimum in stream order
    Ok(all
        .into_iter()
        .reduce(|best, t| if t.distance < best.distance { t } else { best })
        .expect("trials >= 1"))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SoftCoverStats {
    pub trials: u64,
    pub mean: f64,
    pub std_dev: f64,
    pub std_error: f64,
    pub min: f64,
    pub bound: f64,
    /// `mean <= bound + 3 * std_error`.
    pub within_bound: bool,
}

/// Empirical mean of the soft-covering distance over `trials` codebooks.
pub fn soft_cover_expectation(
    p: &Distribution,
    w: &Channel,
    s: &TruncationSet,
    m: u64,
    trials: u64,
    seed: u64,
) -> Result<SoftCoverStats> {
    if trials < 2 {
        return Err(Error::domain("at least two trials are needed for a standard error"));
    }
    let gamma = match s.source() {
        Provenance::Threshold { gamma, .. } => *gamma,
        Provenance::Explicit => {
            return Err(Error::domain(
                "the soft-covering bound is only defined for sets S(Q, gamma)",
            ))
        }
    };
    let cover = Cover::new(p, w, s, m)?;
    let d: Vec<f64> = (0..trials)
        .into_par_iter()
        .map(|t| cover.trial(seed, t).distance)
        .collect();
    let n = trials as f64;
    let mean = d.iter().sum::<f64>() / n;
    let var = d.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (n - 1.0);
    let std_dev = var.sqrt();
    let std_error = std_dev / n.sqrt();
    let bound = soft_cover_bound(gamma, m);
    Ok(SoftCoverStats {
        trials,
        mean,
        std_dev,
        std_error,
        min: d.iter().copied().fold(f64::INFINITY, f64::min),
        bound,
        within_bound: mean <= bound + 3.0 * std_error,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Theorem1Report {
    /// `inf_P P x W(S)`.
    pub inf_term: f64,
    /// `sqrt(e^gamma / M)`.
    pub penalty: f64,
    pub lower_bound_on_eps_plus_delta: f64,
    pub witness_x: usize,
}

/// Lower bound on `eps + delta` valid for every ID code with `N > |X|^M`.
///
/// `P x W(S) = sum_x P(x) W(S_x|x)` is linear in `P`, so its infimum over the
/// simplex is attained at a point mass: `min_x W(S_x|x)`.
pub fn theorem1_bound(w: &Channel, q: &Distribution, gamma: f64, m: u64) -> Result<Theorem1Report> {
    if m == 0 {
        return Err(Error::domain("M must be >= 1"));
    }
    let s = truncation_set(w, q, gamma)?;
    let (witness_x, inf_term) = (0..w.input_size())
        .map(|x| (x, s.row_mass(w, x)))
        .fold((0, f64::INFINITY), |best, cur| if cur.1 < best.1 { cur } else { best });
    let penalty = penalty(gamma, m);
    Ok(Theorem1Report {
        inf_term,
        penalty,
        lower_bound_on_eps_plus_delta: inf_term - penalty,
        witness_x,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Theorem1Check {
    /// `N > |X|^M`.
    pub applicable: bool,
    /// `type1 + type2 >= bound - 1e-9`; vacuously true when not applicable.
    pub holds: bool,
    pub eps_plus_delta: f64,
    pub bound: f64,
}

/// True iff `n > base^m`, without overflow.
pub fn exceeds_type_count(n: usize, base: usize, m: u64) -> bool {
    let mut count: u128 = 1;
    for _ in 0..m {
        count = count.saturating_mul(base as u128);
        if count >= n as u128 {
            return false;
        }
    }
    (n as u128) > count
}

/// Checks a concrete code against [`theorem1_bound`].
pub fn verify_theorem1_against_code(
    code: &IDCode,
    w: &Channel,
    q: &Distribution,
    gamma: f64,
    m: u64,
) -> Result<Theorem1Check> {
    let report = theorem1_bound(w, q, gamma, m)?;
    let eval = evaluate(code, w)?;
    let applicable = exceeds_type_count(code.len(), w.input_size(), m);
    let eps_plus_delta = eval.type1 + eval.type2;
    let bound = report.lower_bound_on_eps_plus_delta;
    Ok(Theorem1Check {
        applicable,
        holds: !applicable || eps_plus_delta >= bound - 1e-9,
        eps_plus_delta,
        bound,
    })
}

/// Both sides of the double triangle inequality used to relate two encoders
/// sharing the same `M`-type approximant `p_tilde`:
/// `d(P_i W, P_j W) <= (P_i x W(S^c) + P_j x W(S^c))/2
///                    + d(p_tilde W^S, P_i W^S) + d(p_tilde W^S, P_j W^S)`.
pub fn triangle_chain(
    p_i: &Distribution,
    p_j: &Distribution,
    p_tilde: &Distribution,
    w: &Channel,
    s: &TruncationSet,
) -> Result<(f64, f64)> {
    let lhs = tv(
        output_distribution(p_i, w)?.probs(),
        output_distribution(p_j, w)?.probs(),
    );
    let pt = partial_response(p_tilde, w, s)?;
    let pi = partial_response(p_i, w, s)?;
    let pj = partial_response(p_j, w, s)?;
    let drop_i = 1.0 - s.joint_mass(p_i, w)?;
    let drop_j = 1.0 - s.joint_mass(p_j, w)?;
    let rhs = 0.5 * (drop_i + drop_j) + tv(pt.masses(), pi.masses()) + tv(pt.masses(), pj.masses());
    Ok((lhs, rhs))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn bsc() -> Channel {
        Channel::bsc(0.1).unwrap()
    }

    #[test]
    fn truncation_set_examples() {
        let w = bsc();
        let u = Distribution::uniform(2);
        let s = truncation_set(&w, &u, 10.0).unwrap();
        assert!(s.mask().iter().all(|&m| m));

        let s = truncation_set(&w, &u, 0.0).unwrap();
        assert_eq!(s.mask(), &[false, true, true, false]);

        let z = Channel::new(vec![vec![1.0, 0.0], vec![0.3, 0.7]]).unwrap();
        let s = truncation_set(&z, &u, -100.0).unwrap();
        assert_eq!(s.mask(), &[false, true, false, false]);

        let s = truncation_set(&z, &Distribution::point_mass(2, 0), 100.0).unwrap();
        // Q(1) = 0 < W(1|1): dropped; W(1|0) = 0: kept
        assert_eq!(s.mask(), &[true, true, true, false]);
    }

    #[test]
    fn partial_response_examples() {
        let w = bsc();
        let u = Distribution::uniform(2);
        let p = Distribution::new(vec![0.3, 0.7]).unwrap();
        let full = partial_response(&p, &w, &TruncationSet::full(2, 2)).unwrap();
        let out = output_distribution(&p, &w).unwrap();
        assert!(tv(full.masses(), out.masses()) < 1e-15);
        let empty = partial_response(&p, &w, &TruncationSet::empty(2, 2)).unwrap();
        assert_eq!(empty.masses(), &[0.0, 0.0]);
        let flips = truncation_set(&w, &u, 0.0).unwrap();
        let r = partial_response(&u, &w, &flips).unwrap();
        assert!((r.masses()[0] - 0.05).abs() < 1e-15 && (r.masses()[1] - 0.05).abs() < 1e-15);
    }

    #[test]
    fn truncation_error_examples() {
        let w = bsc();
        let p = Distribution::new(vec![0.3, 0.7]).unwrap();
        let r = truncation_error_check(&p, &w, &TruncationSet::full(2, 2)).unwrap();
        assert!(r.equal && r.lhs == 0.0);
        let r = truncation_error_check(&p, &w, &TruncationSet::empty(2, 2)).unwrap();
        assert!(r.equal && (r.rhs - 0.5).abs() < 1e-15);
    }

    #[test]
    fn soft_cover_bound_examples() {
        assert!((soft_cover_bound(0.0, 100) - 0.05).abs() < 1e-15);
        assert!((soft_cover_bound(4f64.ln(), 4) - 0.5).abs() < 1e-15);
        let a = soft_cover_bound(0.3, 7);
        assert!((soft_cover_bound(0.3, 28) - a / 2.0).abs() < 1e-15);
    }

    #[test]
    fn soft_cover_degenerate_draws() {
        let w = bsc();
        let u = Distribution::uniform(2);
        let s = truncation_set(&w, &u, 0.0).unwrap();
        for seed in 0..20 {
            let t = soft_cover_sample(&Distribution::point_mass(2, 1), &w, &s, 5, seed).unwrap();
            assert_eq!(t.distance, 0.0);
            assert_eq!(t.mtype.counts(), &[0, 5]);
            let t = soft_cover_sample(&u, &w, &s, 1, seed).unwrap();
            assert!(t.mtype.counts() == [1, 0] || t.mtype.counts() == [0, 1]);
            assert!(!t.explicit_set);
        }
        let t = soft_cover_sample(&u, &w, &TruncationSet::full(2, 2), 3, 1).unwrap();
        assert!(t.explicit_set);
        assert!(soft_cover_sample(&u, &w, &s, 0, 1).is_err());
    }

    #[test]
    fn best_of_one_equals_single_sample() {
        let w = Channel::new(vec![vec![0.7, 0.2, 0.1], vec![0.1, 0.3, 0.6]]).unwrap();
        let p = Distribution::new(vec![0.35, 0.65]).unwrap();
        let s = truncation_set(&w, &Distribution::uniform(3), 0.2).unwrap();
        let single = soft_cover_sample(&p, &w, &s, 9, 42).unwrap();
        let best1 = soft_cover_best_of(&p, &w, &s, 9, 1, 42).unwrap();
        assert_eq!(single, best1);
        let best100 = soft_cover_best_of(&p, &w, &s, 9, 100, 42).unwrap();
        assert!(best100.distance <= best1.distance);
    }

    #[test]
    fn theorem1_examples() {
        let w = bsc();
        let u = Distribution::uniform(2);
        let r = theorem1_bound(&w, &u, 0.0, 10_000).unwrap();
        assert!((r.inf_term - 0.1).abs() < 1e-15);
        assert!((r.penalty - 0.01).abs() < 1e-15);
        assert!((r.lower_bound_on_eps_plus_delta - 0.09).abs() < 1e-15);

        let r = theorem1_bound(&w, &u, 3.0, u64::MAX).unwrap();
        assert_eq!(r.inf_term, 1.0);
        assert!(r.lower_bound_on_eps_plus_delta > 0.99);

        let mut last = f64::NEG_INFINITY;
        for m in [1, 2, 5, 10, 100, 1000] {
            let b = theorem1_bound(&w, &u, 0.4, m).unwrap().lower_bound_on_eps_plus_delta;
            assert!(b >= last);
            last = b;
        }
    }

    #[test]
    fn type_count_comparison() {
        assert!(exceeds_type_count(3, 2, 1));
        assert!(!exceeds_type_count(2, 2, 1));
        assert!(!exceeds_type_count(4, 2, 2));
        assert!(exceeds_type_count(5, 2, 2));
        assert!(!exceeds_type_count(usize::MAX, 2, 200));
    }
}
