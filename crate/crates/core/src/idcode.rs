//! Explicit identification codes: exact error evaluation, `M`-canonical
//! checks and a greedy witness search for lower bounds on the code size.

use rand::seq::SliceRandom;
use serde::{Deserialize, Serialize};

use crate::channel::{enumerate_m_types, is_m_type, joint, output_distribution, tv, Channel, Distribution, Masses};
use crate::error::{check_dim, Error, Result};
use crate::rng::stream_rng;

/// `N` encoder distributions with their acceptance sets.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "RawCode", into = "RawCode")]
pub struct IDCode {
    encoders: Vec<Distribution>,
    acceptors: Vec<Vec<usize>>,
}

#[derive(Serialize, Deserialize)]
struct RawCode {
    encoders: Vec<Distribution>,
    acceptors: Vec<Vec<usize>>,
}

impl TryFrom<RawCode> for IDCode {
    type Error = Error;
    fn try_from(r: RawCode) -> Result<Self> {
        IDCode::new(r.encoders, r.acceptors)
    }
}

impl From<IDCode> for RawCode {
    fn from(c: IDCode) -> Self {
        RawCode {
            encoders: c.encoders,
            acceptors: c.acceptors,
        }
    }
}

impl IDCode {
    /// Acceptance sets are sorted and deduplicated.
    pub fn new(encoders: Vec<Distribution>, mut acceptors: Vec<Vec<usize>>) -> Result<Self> {
        if encoders.is_empty() {
            return Err(Error::validation("an ID code needs at least one message"));
        }
        check_dim("acceptance sets", encoders.len(), acceptors.len())?;
        let k = encoders[0].len();
        if encoders.iter().any(|e| e.len() != k) {
            return Err(Error::validation("encoders live on different input alphabets"));
        }
        for d in &mut acceptors {
            d.sort_unstable();
            d.dedup();
        }
        Ok(IDCode { encoders, acceptors })
    }

    pub fn len(&self) -> usize {
        self.encoders.len()
    }

    pub fn is_empty(&self) -> bool {
        self.encoders.is_empty()
    }

    pub fn encoders(&self) -> &[Distribution] {
        &self.encoders
    }

    pub fn acceptors(&self) -> &[Vec<usize>] {
        &self.acceptors
    }

    fn check_channel(&self, w: &Channel) -> Result<()> {
        check_dim("encoder alphabet", w.input_size(), self.encoders[0].len())?;
        for d in &self.acceptors {
            if let Some(&y) = d.iter().find(|&&y| y >= w.output_size()) {
                return Err(Error::validation(format!(
                    "acceptance set contains output {y}, channel has {} outputs",
                    w.output_size()
                )));
            }
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct IDCodeEvaluation {
    /// `max_i P_iW(D_i^c)`.
    pub type1: f64,
    /// `max_{i != j} P_iW(D_j)`; 0 for a single-message code.
    pub type2: f64,
    pub worst_type1: usize,
    /// `(i, j)` attaining `type2`; `None` when `N = 1`.
    pub worst_pair: Option<(usize, usize)>,
    pub single_message: bool,
}

fn set_mass(out: &[f64], set: &[usize]) -> f64 {
    set.iter().map(|&y| out[y]).sum()
}

/// Exact worst-case errors by enumerating every message and ordered pair.
pub fn evaluate(code: &IDCode, w: &Channel) -> Result<IDCodeEvaluation> {
    code.check_channel(w)?;
    let outs: Vec<Distribution> = code
        .encoders
        .iter()
        .map(|p| output_distribution(p, w))
        .collect::<Result<_>>()?;
    let mut type1 = f64::NEG_INFINITY;
    let mut worst_type1 = 0;
    for (i, (out, d)) in outs.iter().zip(&code.acceptors).enumerate() {
        let miss = (1.0 - set_mass(out.probs(), d)).max(0.0);
        if miss > type1 {
            type1 = miss;
            worst_type1 = i;
        }
    }
    let mut type2 = 0.0;
    let mut worst_pair = None;
    for (i, out) in outs.iter().enumerate() {
        for (j, d) in code.acceptors.iter().enumerate() {
            if i == j {
                continue;
            }
            let hit = set_mass(out.probs(), d);
            if worst_pair.is_none() || hit > type2 {
                type2 = hit;
                worst_pair = Some((i, j));
            }
        }
    }
    Ok(IDCodeEvaluation {
        type1,
        type2,
        worst_type1,
        worst_pair,
        single_message: code.len() == 1,
    })
}

/// Same errors computed through the joint distributions `P_i x W`.
pub fn evaluate_via_joint(code: &IDCode, w: &Channel) -> Result<(f64, f64)> {
    code.check_channel(w)?;
    let ny = w.output_size();
    let masks: Vec<Vec<bool>> = code
        .acceptors
        .iter()
        .map(|d| {
            let mut row = vec![false; ny];
            d.iter().for_each(|&y| row[y] = true);
            row.iter().copied().cycle().take(w.input_size() * ny).collect()
        })
        .collect();
    let joints = code.encoders.iter().map(|p| joint(p, w)).collect::<Result<Vec<_>>>()?;
    let mut t1: f64 = 0.0;
    let mut t2: f64 = 0.0;
    for (i, j) in joints.iter().enumerate() {
        for (k, m) in masks.iter().enumerate() {
            let mass = j.mass_of(m);
            if i == k {
                t1 = t1.max(1.0 - mass);
            } else {
                t2 = t2.max(mass);
            }
        }
    }
    Ok((t1, t2))
}

/// Every encoder is an `m`-type.
pub fn is_m_canonical(code: &IDCode, m: u64) -> bool {
    m >= 1 && code.encoders.iter().all(|p| is_m_type(p, m))
}

/// Pairs of identical encoders (within `1e-12`). An `M`-canonical code with
/// `eps + delta < 1` cannot contain any: identical encoders induce identical
/// outputs, so `1 - eps <= P_iW(D_i) = P_jW(D_i) <= delta`.
pub fn duplicate_encoder_pairs(code: &IDCode) -> Vec<(usize, usize)> {
    let mut out = Vec::new();
    for i in 0..code.len() {
        for j in i + 1..code.len() {
            let same = code.encoders[i]
                .probs()
                .iter()
                .zip(code.encoders[j].probs())
                .all(|(a, b)| (a - b).abs() <= 1e-12);
            if same {
                out.push((i, j));
            }
        }
    }
    out
}

/// Pairs violating `d(P_iW, P_jW) >= 1 - eps - delta` (with `1e-9` slack).
pub fn separation_violations(code: &IDCode, w: &Channel, eps: f64, delta: f64) -> Result<Vec<(usize, usize, f64)>> {
    code.check_channel(w)?;
    let outs: Vec<Distribution> = code
        .encoders
        .iter()
        .map(|p| output_distribution(p, w))
        .collect::<Result<_>>()?;
    let mut bad = Vec::new();
    for i in 0..outs.len() {
        for j in i + 1..outs.len() {
            let d = tv(outs[i].masses(), outs[j].masses());
            if d < 1.0 - eps - delta - 1e-9 {
                bad.push((i, j, d));
            }
        }
    }
    Ok(bad)
}

/// How much of the shuffled candidate pool each greedy pass may inspect.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SearchBudget {
    pub candidates: usize,
}

impl Default for SearchBudget {
    fn default() -> Self {
        SearchBudget { candidates: 4096 }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SearchResult {
    pub best_code: IDCode,
    pub n: usize,
    pub evaluation: IDCodeEvaluation,
    /// Thresholds the winning greedy pass actually enforced.
    pub pass_eps: f64,
    pub pass_delta: f64,
    pub pool_size: usize,
    pub encoder_denominator: u64,
}

/// Spacing of the threshold ladder used by [`search_codes`].
pub const LADDER_STEP: f64 = 0.05;

const MAX_POOL: usize = 2_000_000;
const EXHAUSTIVE_ACCEPTOR_OUTPUTS: usize = 12;

enum AcceptorPool {
    /// Bit masks over `Y`.
    Subsets(Vec<u32>),
    /// Per encoder: outputs sorted by decreasing response; candidate `k`
    /// accepts the `k + 1` most likely outputs.
    TopK(Vec<Vec<usize>>),
}

struct Pool {
    encoders: Vec<Distribution>,
    outputs: Vec<Vec<f64>>,
    acceptors: AcceptorPool,
    ny: usize,
    denominator: u64,
}

impl Pool {
    fn build(w: &Channel) -> Result<Self> {
        let k = w.input_size();
        let ny = w.output_size();
        let per = if ny <= EXHAUSTIVE_ACCEPTOR_OUTPUTS {
            1usize << ny
        } else {
            ny
        };
        let denominator = [8u64, 4, 2, 1]
            .into_iter()
            .find(|&m| binomial(m as usize + k - 1, k - 1) * per as f64 <= MAX_POOL as f64)
            .ok_or(Error::CapExceeded {
                what: "candidate pool",
                size: (k * per) as f64,
                cap: MAX_POOL as f64,
                hint: "the alphabets are too large for the exhaustive code search pool",
            })?;
        let encoders: Vec<Distribution> = enumerate_m_types(k, denominator)
            .iter()
            .map(|t| t.to_distribution())
            .collect();
        let outputs = encoders
            .iter()
            .map(|p| output_distribution(p, w).map(|o| o.probs().to_vec()))
            .collect::<Result<Vec<_>>>()?;
        let acceptors = if ny <= EXHAUSTIVE_ACCEPTOR_OUTPUTS {
            AcceptorPool::Subsets((0..1u32 << ny).collect())
        } else {
            AcceptorPool::TopK(
                outputs
                    .iter()
                    .map(|o| {
                        let mut order: Vec<usize> = (0..ny).collect();
                        order.sort_by(|&a, &b| o[b].total_cmp(&o[a]).then(a.cmp(&b)));
                        order
                    })
                    .collect(),
            )
        };
        Ok(Pool {
            encoders,
            outputs,
            acceptors,
            ny,
            denominator,
        })
    }

    fn acceptors_per_encoder(&self) -> usize {
        match &self.acceptors {
            AcceptorPool::Subsets(s) => s.len(),
            AcceptorPool::TopK(_) => self.ny,
        }
    }

    fn size(&self) -> usize {
        self.encoders.len() * self.acceptors_per_encoder()
    }

    /// Candidates whose acceptance set collects little mass under the
    /// uniform-input response come first, since they interfere least with
    /// other messages; ties follow a shuffle seeded by `seed`.
    fn candidate_order(&self, w: &Channel, seed: u64) -> Result<Vec<usize>> {
        let reference = output_distribution(&Distribution::uniform(w.input_size()), w)?;
        let per = self.acceptors_per_encoder();
        let mut rank: Vec<usize> = (0..self.size()).collect();
        rank.shuffle(&mut stream_rng(seed, 0));
        let mut keyed: Vec<(f64, usize, usize)> = rank
            .into_iter()
            .enumerate()
            .map(|(r, c)| {
                let d = self.acceptor(c / per, c % per);
                (set_mass(reference.probs(), &d), r, c)
            })
            .collect();
        keyed.sort_by(|a, b| a.0.total_cmp(&b.0).then(a.1.cmp(&b.1)));
        Ok(keyed.into_iter().map(|(_, _, c)| c).collect())
    }

    fn acceptor(&self, enc: usize, a: usize) -> Vec<usize> {
        match &self.acceptors {
            AcceptorPool::Subsets(s) => (0..self.ny).filter(|&y| s[a] >> y & 1 == 1).collect(),
            AcceptorPool::TopK(orders) => {
                let mut d = orders[enc][..=a].to_vec();
                d.sort_unstable();
                d
            }
        }
    }
}

fn binomial(n: usize, k: usize) -> f64 {
    (0..k).fold(1.0, |acc, i| acc * (n - i) as f64 / (i + 1) as f64)
}

/// One greedy pass over the candidate order with fixed thresholds.
fn greedy_pass(pool: &Pool, order: &[usize], eps: f64, delta: f64) -> Vec<(usize, Vec<usize>)> {
    let per = pool.acceptors_per_encoder();
    let mut code: Vec<(usize, Vec<usize>)> = Vec::new();
    for &c in order {
        let (enc, a) = (c / per, c % per);
        let d = pool.acceptor(enc, a);
        let out = &pool.outputs[enc];
        if 1.0 - set_mass(out, &d) > eps + 1e-12 {
            continue;
        }
        let fits = code
            .iter()
            .all(|(e2, d2)| set_mass(out, d2) <= delta + 1e-12 && set_mass(&pool.outputs[*e2], &d) <= delta + 1e-12);
        if fits {
            code.push((enc, d));
        }
    }
    code
}

/// Greedy lower-bound witness for `N*(eps, delta | W)`.
///
/// The candidate pool (encoder `M`-types times acceptance sets) is put in a
/// fixed order under `seed`; each pass scans the first `budget.candidates`
/// entries.
/// Passes run at every ladder point `(i * LADDER_STEP, j * LADDER_STEP)`
/// dominated by `(eps, delta)` and the largest code wins. Because the ladder
/// only grows with `eps` and `delta`, and the scanned prefix only grows with
/// the budget, the returned size is monotone in all three.
pub fn search_codes(w: &Channel, eps: f64, delta: f64, budget: SearchBudget, seed: u64) -> Result<SearchResult> {
    if !(0.0..1.0).contains(&eps) || !(0.0..1.0).contains(&delta) {
        return Err(Error::domain("eps and delta must lie in [0, 1)"));
    }
    if eps + delta >= 1.0 {
        return Err(Error::domain(format!(
            "eps + delta = {} >= 1: ID capacity is infinite in this regime",
            eps + delta
        )));
    }
    if budget.candidates == 0 {
        return Err(Error::domain("budget must allow at least one candidate"));
    }
    let pool = Pool::build(w)?;
    let order = pool.candidate_order(w, seed)?;
    let order = &order[..budget.candidates.min(order.len())];

    let rungs = |v: f64| {
        (0..)
            .map(|i| i as f64 * LADDER_STEP)
            .take_while(move |&r| r <= v + 1e-12)
    };
    let mut best: Option<(Vec<(usize, Vec<usize>)>, f64, f64)> = None;
    for e in rungs(eps) {
        for d in rungs(delta) {
            let code = greedy_pass(&pool, order, e, d);
            if best.as_ref().is_none_or(|b| code.len() > b.0.len()) {
                best = Some((code, e, d));
            }
        }
    }
    let (mut chosen, pass_eps, pass_delta) = best.expect("ladder has a rung at zero");
    if chosen.is_empty() {
        // The scanned prefix held no feasible single message; a point-mass
        // encoder accepting everything always is one.
        chosen.push((0, (0..w.output_size()).collect()));
    }
    let best_code = IDCode::new(
        chosen.iter().map(|(e, _)| pool.encoders[*e].clone()).collect(),
        chosen.into_iter().map(|(_, d)| d).collect(),
    )?;
    let evaluation = evaluate(&best_code, w)?;
    Ok(SearchResult {
        n: best_code.len(),
        best_code,
        evaluation,
        pass_eps,
        pass_delta,
        pool_size: pool.size(),
        encoder_denominator: pool.denominator,
    })
}
