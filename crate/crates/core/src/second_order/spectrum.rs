//! Distribution of the normalized information density
//! `(1/n) sum_i log W(Y_i|X_i)/q(Y_i)` under i.i.d. `(X_i, Y_i) ~ p x W`.
//!
//! A letter's log-ratio takes finitely many values, so the sum only depends
//! on how many letters fall on each value. The exact engine enumerates these
//! multinomial compositions with log-factorial weights, which avoids both the
//! drift of repeated floating convolution and any dependence on lattice
//! structure. The Monte Carlo engine draws the same multinomial counts with
//! sequential binomials.

use rand_distr::{Binomial, Distribution as _};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::channel::{Channel, Distribution, Masses};
use crate::error::{check_dim, Error, Result};
use crate::extreal::{log_ratio, serde_ext};
use crate::rng::{stream_rng, GENERATOR_NAME};
use crate::testing::{ds_from_steps, DsResult, TIE_TOLERANCE};

/// Default cap on enumerated compositions in the exact engine.
pub const EXACT_WORK_CAP: f64 = 1e6;
/// Monte Carlo samples per random stream.
const MC_CHUNK: u64 = 4096;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum SpectrumMode {
    ExactDp,
    MonteCarlo { samples: u64, seed: u64 },
}

/// Law of one letter's log-ratio: distinct finite values plus mass at `+inf`.
#[derive(Debug, Clone, PartialEq)]
pub struct LetterLaw {
    pub values: Vec<f64>,
    pub probs: Vec<f64>,
    pub inf_mass: f64,
}

impl LetterLaw {
    fn from_pairs(pairs: impl Iterator<Item = (f64, f64)>) -> Self {
        let mut finite: Vec<(f64, f64)> = Vec::new();
        let mut inf_mass = 0.0;
        for (v, m) in pairs {
            if m <= 0.0 {
                continue;
            }
            if v == f64::INFINITY {
                inf_mass += m;
            } else {
                finite.push((v, m));
            }
        }
        finite.sort_by(|a, b| a.0.total_cmp(&b.0));
        let mut values: Vec<f64> = Vec::new();
        let mut probs: Vec<f64> = Vec::new();
        for (v, m) in finite {
            match values.last() {
                Some(&last) if (v - last).abs() <= TIE_TOLERANCE => *probs.last_mut().unwrap() += m,
                _ => {
                    values.push(v);
                    probs.push(m);
                }
            }
        }
        LetterLaw {
            values,
            probs,
            inf_mass,
        }
    }

    /// Law of `log W(Y|X)/q(Y)` under `p x W`.
    pub fn joint(p: &Distribution, w: &Channel, q: &Distribution) -> Result<Self> {
        check_dim("input distribution", w.input_size(), p.len())?;
        check_dim("reference output distribution", w.output_size(), q.len())?;
        Ok(Self::from_pairs(p.probs().iter().zip(w.rows()).flat_map(
            |(&px, row)| {
                row.iter()
                    .zip(q.probs())
                    .filter_map(move |(&wy, &qy)| log_ratio(wy, qy).map(|v| (v, px * wy)))
            },
        )))
    }

    /// Law of `log W_x(Y)/q(Y)` under `W_x`.
    pub fn row(row: &[f64], q: &[f64]) -> Self {
        Self::from_pairs(
            row.iter()
                .zip(q)
                .filter_map(|(&wy, &qy)| log_ratio(wy, qy).map(|v| (v, wy))),
        )
    }

    fn bins(&self) -> usize {
        self.values.len() + usize::from(self.inf_mass > 0.0)
    }

    /// Same law up to the merge tolerance.
    pub fn same_as(&self, other: &LetterLaw) -> bool {
        self.values.len() == other.values.len()
            && (self.inf_mass - other.inf_mass).abs() <= TIE_TOLERANCE
            && self
                .values
                .iter()
                .zip(&other.values)
                .all(|(a, b)| (a - b).abs() <= TIE_TOLERANCE)
            && self
                .probs
                .iter()
                .zip(&other.probs)
                .all(|(a, b)| (a - b).abs() <= TIE_TOLERANCE)
    }
}

/// Number of compositions of `n` letters over `bins` values.
pub fn composition_count(n: u64, bins: usize) -> f64 {
    if bins <= 1 {
        return 1.0;
    }
    let k = (bins - 1) as f64;
    (1..bins)
        .fold(1.0, |acc, i| acc * (n as f64 + i as f64) / i as f64)
        .max(k.min(1.0))
}

/// `ln i!` for `i = 0..=n`.
fn ln_factorials(n: u64) -> Vec<f64> {
    let mut t = Vec::with_capacity(n as usize + 1);
    t.push(0.0);
    let mut acc = 0.0;
    for i in 1..=n {
        acc += (i as f64).ln();
        t.push(acc);
    }
    t
}

/// Sorted `(sum, probability)` pairs with ties merged.
pub type SumLaw = Vec<(f64, f64)>;

fn merge_sorted(mut v: Vec<(f64, f64)>) -> SumLaw {
    v.sort_by(|a, b| a.0.total_cmp(&b.0));
    let mut out: SumLaw = Vec::with_capacity(v.len());
    for (s, m) in v {
        match out.last_mut() {
            Some(last) if last.0 == s || (s.is_finite() && (s - last.0).abs() <= TIE_TOLERANCE * s.abs().max(1.0)) => {
                last.1 += m
            }
            _ => out.push((s, m)),
        }
    }
    out
}

/// Exact law of the sum of `n` i.i.d. letters.
pub fn exact_sum(law: &LetterLaw, n: u64) -> SumLaw {
    let lf = ln_factorials(n);
    let mut values = law.values.clone();
    let mut logs: Vec<f64> = law.probs.iter().map(|p| p.ln()).collect();
    if law.inf_mass > 0.0 {
        values.push(f64::INFINITY);
        logs.push(law.inf_mass.ln());
    }
    let k = values.len();
    let mut out: Vec<(f64, f64)> = Vec::new();
    let mut counts = vec![0u64; k];
    fn rec(i: usize, left: u64, counts: &mut Vec<u64>, ctx: &(&[f64], &[f64], &[f64], u64), out: &mut Vec<(f64, f64)>) {
        let (values, logs, lf, n) = *ctx;
        if i + 1 == counts.len() {
            counts[i] = left;
            let mut lp = lf[n as usize];
            let mut sum = 0.0;
            for (j, &c) in counts.iter().enumerate() {
                if c > 0 {
                    lp += c as f64 * logs[j] - lf[c as usize];
                    sum += if values[j].is_infinite() {
                        f64::INFINITY
                    } else {
                        c as f64 * values[j]
                    };
                }
            }
            let p = lp.exp();
            if p > 0.0 {
                out.push((sum, p));
            }
            return;
        }
        for c in 0..=left {
            counts[i] = c;
            rec(i + 1, left - c, counts, ctx, out);
        }
    }
    if k == 0 {
        return vec![];
    }
    rec(0, n, &mut counts, &(&values, &logs, &lf, n), &mut out);
    merge_sorted(out)
}

/// Law of the sum of independent blocks.
pub fn convolve(a: &SumLaw, b: &SumLaw) -> SumLaw {
    let mut v = Vec::with_capacity(a.len() * b.len());
    for &(sa, pa) in a {
        for &(sb, pb) in b {
            v.push((sa + sb, pa * pb));
        }
    }
    merge_sorted(v)
}

/// One Monte Carlo draw of the sum of `n` letters from `law`.
fn draw_sum<R: rand::Rng>(law: &LetterLaw, n: u64, rng: &mut R) -> f64 {
    let mut left = n;
    let mut mass_left = 1.0;
    let mut sum = 0.0;
    let bins = law.values.len();
    for j in 0..bins {
        if left == 0 {
            break;
        }
        let c = if j + 1 == bins && law.inf_mass <= 0.0 {
            left
        } else {
            let prob = (law.probs[j] / mass_left).clamp(0.0, 1.0);
            Binomial::new(left, prob).expect("valid binomial").sample(rng)
        };
        sum += c as f64 * law.values[j];
        left -= c;
        mass_left -= law.probs[j];
    }
    if left > 0 {
        f64::INFINITY
    } else {
        sum
    }
}

/// Empirical law of `samples` draws of the sum over the given blocks, each
/// block being `count` letters from one law.
pub fn monte_carlo_sum(blocks: &[(&LetterLaw, u64)], samples: u64, seed: u64) -> SumLaw {
    let chunks = samples.div_ceil(MC_CHUNK);
    let draws: Vec<f64> = (0..chunks)
        .into_par_iter()
        .flat_map_iter(|chunk| {
            let mut rng = stream_rng(seed, chunk);
            let here = MC_CHUNK.min(samples - chunk * MC_CHUNK);
            (0..here)
                .map(|_| blocks.iter().map(|(law, n)| draw_sum(law, *n, &mut rng)).sum::<f64>())
                .collect::<Vec<_>>()
        })
        .collect();
    let w = 1.0 / samples as f64;
    merge_sorted(draws.into_iter().map(|s| (s, w)).collect())
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SpectrumLevel {
    /// Normalized information density value in nats.
    #[serde(with = "serde_ext")]
    pub value: f64,
    pub probability: f64,
    pub cumulative: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SpectrumDescription {
    pub input: Vec<f64>,
    pub reference_output: Vec<f64>,
    pub channel_rows: Vec<Vec<f64>>,
    pub mode: SpectrumMode,
    pub generator: Option<String>,
    pub merge_tolerance: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SpectrumCDF {
    pub n: u64,
    pub levels: Vec<SpectrumLevel>,
    pub description: SpectrumDescription,
}

impl SpectrumCDF {
    fn from_sum(law: SumLaw, n: u64, description: SpectrumDescription) -> Self {
        let mut cum = 0.0;
        let levels = law
            .into_iter()
            .map(|(s, p)| {
                cum += p;
                SpectrumLevel {
                    value: s / n as f64,
                    probability: p,
                    cumulative: cum,
                }
            })
            .collect();
        SpectrumCDF { n, levels, description }
    }

    /// `Pr(normalized density <= t)`; levels within the merge tolerance of
    /// `t` count as equal to it.
    pub fn cdf_at(&self, t: f64) -> f64 {
        let slack = TIE_TOLERANCE * t.abs().max(1.0);
        let i = self.levels.partition_point(|l| l.value <= t + slack);
        if i == 0 {
            0.0
        } else {
            self.levels[i - 1].cumulative
        }
    }

    /// `D_s^eps` of the unnormalized density.
    pub fn ds_unnormalized(&self, eps: f64) -> DsResult {
        let n = self.n as f64;
        ds_from_steps(self.levels.iter().map(|l| (l.value * n, l.probability)), eps)
    }

    pub fn mean(&self) -> f64 {
        self.levels.iter().map(|l| l.value * l.probability).sum()
    }

    pub fn variance(&self) -> f64 {
        let m = self.mean();
        self.levels.iter().map(|l| l.probability * (l.value - m).powi(2)).sum()
    }

    pub fn total_mass(&self) -> f64 {
        self.levels.last().map_or(0.0, |l| l.cumulative)
    }
}

pub fn spectrum_cdf(
    p: &Distribution,
    w: &Channel,
    q: &Distribution,
    n: u64,
    mode: SpectrumMode,
) -> Result<SpectrumCDF> {
    spectrum_cdf_capped(p, w, q, n, mode, EXACT_WORK_CAP)
}

pub fn spectrum_cdf_capped(
    p: &Distribution,
    w: &Channel,
    q: &Distribution,
    n: u64,
    mode: SpectrumMode,
    cap: f64,
) -> Result<SpectrumCDF> {
    if n == 0 {
        return Err(Error::domain("blocklength n must be >= 1"));
    }
    let law = LetterLaw::joint(p, w, q)?;
    let description = SpectrumDescription {
        input: p.probs().to_vec(),
        reference_output: q.probs().to_vec(),
        channel_rows: w.to_rows(),
        mode,
        generator: matches!(mode, SpectrumMode::MonteCarlo { .. }).then(|| GENERATOR_NAME.to_string()),
        merge_tolerance: TIE_TOLERANCE,
    };
    let sum = match mode {
        SpectrumMode::ExactDp => {
            let work = composition_count(n, law.bins());
            if work > cap {
                return Err(Error::CapExceeded {
                    what: "exact spectrum compositions",
                    size: work,
                    cap,
                    hint: "use the Monte Carlo mode",
                });
            }
            exact_sum(&law, n)
        }
        SpectrumMode::MonteCarlo { samples, seed } => {
            if samples == 0 {
                return Err(Error::domain("Monte Carlo mode needs at least one sample"));
            }
            monte_carlo_sum(&[(&law, n)], samples, seed)
        }
    };
    Ok(SpectrumCDF::from_sum(sum, n, description))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::testing::ds_from_masses;

    fn bsc_setup() -> (Channel, Distribution) {
        (Channel::bsc(0.1).unwrap(), Distribution::uniform(2))
    }

    #[test]
    fn two_letters_by_hand() {
        let (w, u) = bsc_setup();
        let s = spectrum_cdf(&u, &w, &u, 2, SpectrumMode::ExactDp).unwrap();
        assert_eq!(s.levels.len(), 3);
        let expect = [
            (0.2f64.ln(), 0.01),
            ((0.2f64.ln() + 1.8f64.ln()) / 2.0, 0.18),
            (1.8f64.ln(), 0.81),
        ];
        for (l, (v, p)) in s.levels.iter().zip(expect) {
            assert!((l.value - v).abs() < 1e-12);
            assert!((l.probability - p).abs() < 1e-12);
        }
    }

    #[test]
    fn one_letter_matches_ds() {
        let w = Channel::new(vec![vec![0.6, 0.3, 0.1], vec![0.1, 0.2, 0.7]]).unwrap();
        let p = Distribution::new(vec![0.4, 0.6]).unwrap();
        let q = Distribution::new(vec![0.2, 0.5, 0.3]).unwrap();
        let s = spectrum_cdf(&p, &w, &q, 1, SpectrumMode::ExactDp).unwrap();
        let joint = crate::channel::joint(&p, &w).unwrap();
        let prod = crate::channel::joint_product(&p, &q);
        for eps in [0.0, 0.1, 0.25, 0.5, 0.9] {
            let a = s.ds_unnormalized(eps).value;
            let b = ds_from_masses(joint.flat(), prod.flat(), eps).unwrap().value;
            assert!((a - b).abs() < 1e-12);
        }
    }

    #[test]
    fn moments_scale() {
        let w = Channel::new(vec![vec![0.6, 0.3, 0.1], vec![0.1, 0.2, 0.7]]).unwrap();
        let p = Distribution::new(vec![0.4, 0.6]).unwrap();
        let q = Distribution::new(vec![0.2, 0.5, 0.3]).unwrap();
        let one = spectrum_cdf(&p, &w, &q, 1, SpectrumMode::ExactDp).unwrap();
        let n = 30;
        let many = spectrum_cdf(&p, &w, &q, n, SpectrumMode::ExactDp).unwrap();
        // normalized: mean unchanged, variance divided by n
        assert!((many.mean() - one.mean()).abs() < 1e-9);
        assert!((many.variance() * n as f64 - one.variance()).abs() < 1e-9);
        assert!((many.total_mass() - 1.0).abs() < 1e-10);
    }

    #[test]
    fn cap_and_infinite_levels() {
        let (w, u) = bsc_setup();
        let err = spectrum_cdf_capped(&u, &w, &u, 100, SpectrumMode::ExactDp, 50.0).unwrap_err();
        assert!(err.to_string().contains("Monte Carlo"));
        let q = Distribution::point_mass(2, 0);
        let s = spectrum_cdf(&u, &w, &q, 3, SpectrumMode::ExactDp).unwrap();
        assert_eq!(s.levels.last().unwrap().value, f64::INFINITY);
        assert!((s.levels.last().unwrap().probability - (1.0 - 0.5f64.powi(3))).abs() < 1e-12);
    }

    #[test]
    fn monte_carlo_is_reproducible_and_consistent() {
        let (w, u) = bsc_setup();
        let mode = SpectrumMode::MonteCarlo {
            samples: 20_000,
            seed: 9,
        };
        let a = spectrum_cdf(&u, &w, &u, 20, mode).unwrap();
        let b = spectrum_cdf(&u, &w, &u, 20, mode).unwrap();
        assert_eq!(a, b);
        let exact = spectrum_cdf(&u, &w, &u, 20, SpectrumMode::ExactDp).unwrap();
        for l in &exact.levels {
            let pe = l.cumulative;
            let pm = a.cdf_at(l.value);
            let se = (pe * (1.0 - pe) / 20_000.0).max(0.0).sqrt();
            assert!((pe - pm).abs() <= 4.0 * se + 1e-9, "{} vs {}", pe, pm);
        }
    }
}
