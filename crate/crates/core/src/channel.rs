//! Distributions, channels and the elementary operations shared by every
//! other module.
//!
//! Alphabets are index ranges `0..k`. Optional string labels are carried for
//! display only. Inputs are accepted with up to [`NORMALIZATION_SLACK`] of
//! normalization error and renormalized; anything beyond is rejected.

use serde::{Deserialize, Serialize};

use crate::error::{check_dim, Error, Result};

/// Maximum accepted deviation of an input vector's sum from one.
pub const NORMALIZATION_SLACK: f64 = 1e-9;

/// Default cap on the number of entries of an explicitly materialized
/// product channel.
pub const PRODUCT_CHANNEL_CAP: usize = 10_000_000;

/// Read-only access to a vector of masses over a finite alphabet.
pub trait Masses {
    fn masses(&self) -> &[f64];

    fn len(&self) -> usize {
        self.masses().len()
    }

    fn is_empty(&self) -> bool {
        self.masses().is_empty()
    }

    fn total(&self) -> f64 {
        self.masses().iter().sum()
    }
}

fn check_entries(what: &str, v: &[f64]) -> Result<Vec<f64>> {
    if v.is_empty() {
        return Err(Error::validation(format!("{what} is empty")));
    }
    v.iter()
        .enumerate()
        .map(|(i, &p)| {
            if !p.is_finite() {
                Err(Error::validation(format!("{what}: entry {i} is not finite")))
            } else if p < -1e-15 {
                Err(Error::validation(format!("{what}: entry {i} is negative ({p})")))
            } else {
                Ok(p.max(0.0))
            }
        })
        .collect()
}

/// A probability vector.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "Vec<f64>", into = "Vec<f64>")]
pub struct Distribution {
    probs: Vec<f64>,
}

impl Distribution {
    /// Validates and renormalizes `probs`.
    pub fn new(probs: Vec<f64>) -> Result<Self> {
        Self::named("distribution", probs)
    }

    fn named(what: &str, probs: Vec<f64>) -> Result<Self> {
        let mut probs = check_entries(what, &probs)?;
        let sum: f64 = probs.iter().sum();
        if (sum - 1.0).abs() > NORMALIZATION_SLACK {
            return Err(Error::validation(format!("{what} not stochastic (sum = {sum})")));
        }
        probs.iter_mut().for_each(|p| *p /= sum);
        Ok(Distribution { probs })
    }

    pub fn uniform(k: usize) -> Self {
        assert!(k > 0, "uniform distribution over an empty alphabet");
        Distribution {
            probs: vec![1.0 / k as f64; k],
        }
    }

    pub fn point_mass(k: usize, at: usize) -> Self {
        assert!(at < k, "point mass outside alphabet");
        let mut probs = vec![0.0; k];
        probs[at] = 1.0;
        Distribution { probs }
    }

    pub fn probs(&self) -> &[f64] {
        &self.probs
    }

    pub fn support(&self) -> impl Iterator<Item = usize> + '_ {
        self.probs.iter().enumerate().filter(|(_, &p)| p > 0.0).map(|(i, _)| i)
    }

    /// Convex combination `lambda * self + (1 - lambda) * other`.
    pub fn mix(&self, other: &Distribution, lambda: f64) -> Result<Self> {
        check_dim("mixture", self.len(), other.len())?;
        Distribution::new(
            self.probs
                .iter()
                .zip(&other.probs)
                .map(|(a, b)| lambda * a + (1.0 - lambda) * b)
                .collect(),
        )
    }

    pub fn as_sub(&self) -> SubDistribution {
        SubDistribution {
            mass: self.probs.clone(),
        }
    }
}

impl Masses for Distribution {
    fn masses(&self) -> &[f64] {
        &self.probs
    }
}

impl TryFrom<Vec<f64>> for Distribution {
    type Error = Error;
    fn try_from(v: Vec<f64>) -> Result<Self> {
        Distribution::new(v)
    }
}

impl From<Distribution> for Vec<f64> {
    fn from(d: Distribution) -> Self {
        d.probs
    }
}

/// A nonnegative vector with total mass at most one, e.g. a partial response.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SubDistribution {
    mass: Vec<f64>,
}

impl SubDistribution {
    pub fn new(mass: Vec<f64>) -> Result<Self> {
        let mass = check_entries("sub-distribution", &mass)?;
        let total: f64 = mass.iter().sum();
        if total > 1.0 + 1e-12 {
            return Err(Error::validation(format!("sub-distribution total {total} exceeds 1")));
        }
        Ok(SubDistribution { mass })
    }

    pub fn zeros(k: usize) -> Self {
        SubDistribution { mass: vec![0.0; k] }
    }
}

impl Masses for SubDistribution {
    fn masses(&self) -> &[f64] {
        &self.mass
    }
}

/// A row-stochastic matrix `W(y|x)`, stored row-major.
#[derive(Debug, Clone, PartialEq)]
pub struct Channel {
    matrix: Vec<f64>,
    input_size: usize,
    output_size: usize,
    input_labels: Option<Vec<String>>,
    output_labels: Option<Vec<String>>,
}

impl Channel {
    /// Builds a channel from its rows; each row must be a distribution.
    pub fn new(rows: Vec<Vec<f64>>) -> Result<Self> {
        let input_size = rows.len();
        if input_size == 0 {
            return Err(Error::validation("channel has no rows"));
        }
        let output_size = rows[0].len();
        let mut matrix = Vec::with_capacity(input_size * output_size);
        for (x, row) in rows.into_iter().enumerate() {
            if row.len() != output_size {
                return Err(Error::validation(format!(
                    "row {x} has {} entries, expected {output_size}",
                    row.len()
                )));
            }
            let row = Distribution::named(&format!("row {x}"), row)?;
            matrix.extend_from_slice(row.probs());
        }
        Ok(Channel {
            matrix,
            input_size,
            output_size,
            input_labels: None,
            output_labels: None,
        })
    }

    pub fn with_labels(
        mut self,
        input_labels: Option<Vec<String>>,
        output_labels: Option<Vec<String>>,
    ) -> Result<Self> {
        if let Some(l) = &input_labels {
            check_dim("input labels", self.input_size, l.len())?;
        }
        if let Some(l) = &output_labels {
            check_dim("output labels", self.output_size, l.len())?;
        }
        self.input_labels = input_labels;
        self.output_labels = output_labels;
        Ok(self)
    }

    /// Binary symmetric channel with crossover probability `p`.
    pub fn bsc(p: f64) -> Result<Self> {
        if !(0.0..=1.0).contains(&p) {
            return Err(Error::domain(format!("crossover probability {p} outside [0,1]")));
        }
        Channel::new(vec![vec![1.0 - p, p], vec![p, 1.0 - p]])
    }

    /// Binary erasure channel; outputs are `0, e, 1`.
    pub fn bec(p: f64) -> Result<Self> {
        if !(0.0..=1.0).contains(&p) {
            return Err(Error::domain(format!("erasure probability {p} outside [0,1]")));
        }
        Channel::new(vec![vec![1.0 - p, p, 0.0], vec![0.0, p, 1.0 - p]])
    }

    pub fn identity(k: usize) -> Result<Self> {
        if k == 0 {
            return Err(Error::domain("identity channel needs k >= 1"));
        }
        Channel::new(
            (0..k)
                .map(|x| Distribution::point_mass(k, x).probs().to_vec())
                .collect(),
        )
    }

    /// Channel whose rows all equal the uniform distribution on `outputs` symbols.
    pub fn useless(inputs: usize, outputs: usize) -> Result<Self> {
        if inputs == 0 || outputs == 0 {
            return Err(Error::domain("useless channel needs nonempty alphabets"));
        }
        Channel::new(vec![vec![1.0 / outputs as f64; outputs]; inputs])
    }

    pub fn input_size(&self) -> usize {
        self.input_size
    }

    pub fn output_size(&self) -> usize {
        self.output_size
    }

    pub fn input_labels(&self) -> Option<&[String]> {
        self.input_labels.as_deref()
    }

    pub fn output_labels(&self) -> Option<&[String]> {
        self.output_labels.as_deref()
    }

    #[inline]
    pub fn prob(&self, x: usize, y: usize) -> f64 {
        self.matrix[x * self.output_size + y]
    }

    pub fn row(&self, x: usize) -> &[f64] {
        &self.matrix[x * self.output_size..(x + 1) * self.output_size]
    }

    pub fn rows(&self) -> impl Iterator<Item = &[f64]> {
        self.matrix.chunks(self.output_size)
    }

    pub fn to_rows(&self) -> Vec<Vec<f64>> {
        self.rows().map(<[f64]>::to_vec).collect()
    }
}

/// `result(y) = sum_x p(x) w(y|x)`.
pub fn output_distribution(p: &Distribution, w: &Channel) -> Result<Distribution> {
    check_dim("input distribution", w.input_size(), p.len())?;
    let mut out = vec![0.0; w.output_size()];
    for (px, row) in p.probs().iter().zip(w.rows()) {
        if *px == 0.0 {
            continue;
        }
        for (o, wy) in out.iter_mut().zip(row) {
            *o += px * wy;
        }
    }
    Distribution::new(out)
}

/// A distribution on `X x Y`, stored row-major in `x`.
#[derive(Debug, Clone, PartialEq)]
pub struct JointDistribution {
    mass: Vec<f64>,
    nx: usize,
    ny: usize,
}

impl JointDistribution {
    pub fn get(&self, x: usize, y: usize) -> f64 {
        self.mass[x * self.ny + y]
    }

    pub fn shape(&self) -> (usize, usize) {
        (self.nx, self.ny)
    }

    pub fn marginal_x(&self) -> Vec<f64> {
        self.mass.chunks(self.ny).map(|r| r.iter().sum()).collect()
    }

    pub fn marginal_y(&self) -> Vec<f64> {
        let mut m = vec![0.0; self.ny];
        for row in self.mass.chunks(self.ny) {
            for (a, b) in m.iter_mut().zip(row) {
                *a += b;
            }
        }
        m
    }

    /// The flattened mass vector over the product alphabet.
    pub fn flat(&self) -> &[f64] {
        &self.mass
    }

    /// Total mass of the pairs where `mask` is true.
    pub fn mass_of(&self, mask: &[bool]) -> f64 {
        self.mass.iter().zip(mask).filter(|(_, &m)| m).map(|(v, _)| v).sum()
    }
}

/// `P x W(x,y) = p(x) W(y|x)`.
pub fn joint(p: &Distribution, w: &Channel) -> Result<JointDistribution> {
    check_dim("input distribution", w.input_size(), p.len())?;
    let mass = p
        .probs()
        .iter()
        .zip(w.rows())
        .flat_map(|(px, row)| row.iter().map(move |wy| px * wy))
        .collect();
    Ok(JointDistribution {
        mass,
        nx: w.input_size(),
        ny: w.output_size(),
    })
}

/// `P x Q(x,y) = p(x) q(y)`.
pub fn joint_product(p: &Distribution, q: &Distribution) -> JointDistribution {
    let mass = p
        .probs()
        .iter()
        .flat_map(|px| q.probs().iter().map(move |qy| px * qy))
        .collect();
    JointDistribution {
        mass,
        nx: p.len(),
        ny: q.len(),
    }
}

/// `d(a, b) = 1/2 sum |a - b|` for (sub-)distributions on the same alphabet.
pub fn variational_distance<A: Masses + ?Sized, B: Masses + ?Sized>(a: &A, b: &B) -> Result<f64> {
    check_dim("variational distance", a.len(), b.len())?;
    Ok(tv(a.masses(), b.masses()))
}

pub(crate) fn tv(a: &[f64], b: &[f64]) -> f64 {
    0.5 * a.iter().zip(b).map(|(x, y)| (x - y).abs()).sum::<f64>()
}

/// Memoryless extension `W^n`. Sequences are indexed lexicographically with
/// the first letter most significant.
pub fn product_channel(w: &Channel, n: usize) -> Result<Channel> {
    product_channel_capped(w, n, PRODUCT_CHANNEL_CAP)
}

pub fn product_channel_capped(w: &Channel, n: usize, cap: usize) -> Result<Channel> {
    if n == 0 {
        return Err(Error::domain("blocklength n must be >= 1"));
    }
    let entries = (w.input_size() as f64 * w.output_size() as f64).powi(n as i32);
    if entries > cap as f64 {
        return Err(Error::CapExceeded {
            what: "product channel entries",
            size: entries,
            cap: cap as f64,
            hint: "use the per-letter (implicit) interfaces, e.g. spectrum or fbl",
        });
    }
    let mut rows = w.to_rows();
    for _ in 1..n {
        let mut next = Vec::with_capacity(rows.len() * w.input_size());
        for prefix in &rows {
            for letter in w.rows() {
                let mut row = Vec::with_capacity(prefix.len() * letter.len());
                for a in prefix {
                    for b in letter {
                        row.push(a * b);
                    }
                }
                next.push(row);
            }
        }
        rows = next;
    }
    Channel::new(rows)
}

/// An `M`-type: counts over `X` summing to `M`.
#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct MType {
    counts: Vec<u64>,
    denominator: u64,
}

impl MType {
    pub fn from_counts(counts: Vec<u64>) -> Result<Self> {
        let denominator: u64 = counts.iter().sum();
        if denominator == 0 {
            return Err(Error::domain("an M-type needs M >= 1"));
        }
        Ok(MType { counts, denominator })
    }

    /// Empirical type of `samples` over an alphabet of size `k`.
    pub fn from_samples(samples: &[usize], k: usize) -> Result<Self> {
        let mut counts = vec![0u64; k];
        for &s in samples {
            if s >= k {
                return Err(Error::validation(format!("sample {s} outside alphabet of size {k}")));
            }
            counts[s] += 1;
        }
        MType::from_counts(counts)
    }

    pub fn counts(&self) -> &[u64] {
        &self.counts
    }

    pub fn denominator(&self) -> u64 {
        self.denominator
    }

    pub fn to_distribution(&self) -> Distribution {
        let m = self.denominator as f64;
        Distribution {
            probs: self.counts.iter().map(|&c| c as f64 / m).collect(),
        }
    }
}

/// True iff every entry of `p` is an integer multiple of `1/m` within `1e-12`.
pub fn is_m_type(p: &Distribution, m: u64) -> bool {
    m >= 1
        && p.probs().iter().all(|&v| {
            let scaled = v * m as f64;
            (scaled - scaled.round()).abs() <= 1e-12 * m as f64
        })
}

/// All `M`-types on an alphabet of size `k`, in lexicographic order of counts.
pub fn enumerate_m_types(k: usize, m: u64) -> Vec<MType> {
    let mut out = Vec::new();
    let mut counts = vec![0u64; k];
    fn rec(i: usize, left: u64, counts: &mut Vec<u64>, out: &mut Vec<MType>) {
        if i + 1 == counts.len() {
            counts[i] = left;
            out.push(MType {
                counts: counts.clone(),
                denominator: counts.iter().sum(),
            });
            return;
        }
        for c in (0..=left).rev() {
            counts[i] = c;
            rec(i + 1, left - c, counts, out);
        }
    }
    if k > 0 && m > 0 {
        rec(0, m, &mut counts, &mut out);
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    fn close(a: &[f64], b: &[f64], tol: f64) -> bool {
        a.len() == b.len() && a.iter().zip(b).all(|(x, y)| (x - y).abs() <= tol)
    }

    #[test]
    fn output_distribution_examples() {
        let bsc = Channel::bsc(0.1).unwrap();
        let out = output_distribution(&Distribution::uniform(2), &bsc).unwrap();
        assert!(close(out.probs(), &[0.5, 0.5], 1e-15));

        let id = Channel::identity(2).unwrap();
        let out = output_distribution(&Distribution::point_mass(2, 0), &id).unwrap();
        assert_eq!(out.probs(), &[1.0, 0.0]);

        let p = Distribution::new(vec![0.3, 0.7]).unwrap();
        let out = output_distribution(&p, &bsc).unwrap();
        assert!(close(out.probs(), &[0.34, 0.66], 1e-15));
    }

    #[test]
    fn output_distribution_dimension_mismatch() {
        let bsc = Channel::bsc(0.1).unwrap();
        let err = output_distribution(&Distribution::uniform(3), &bsc).unwrap_err();
        assert!(matches!(err, Error::DimensionMismatch { .. }));
    }

    #[test]
    fn joint_examples() {
        let j = joint_product(&Distribution::uniform(2), &Distribution::uniform(2));
        assert!(j.flat().iter().all(|&v| v == 0.25));

        let j = joint(&Distribution::point_mass(2, 0), &Channel::bsc(0.1).unwrap()).unwrap();
        assert!(close(j.flat(), &[0.9, 0.1, 0.0, 0.0], 1e-15));
    }

    #[test]
    fn variational_distance_examples() {
        let p = Distribution::new(vec![0.5, 0.5]).unwrap();
        assert_eq!(variational_distance(&p, &p).unwrap(), 0.0);
        let d = variational_distance(&Distribution::point_mass(2, 0), &Distribution::point_mass(2, 1));
        assert_eq!(d.unwrap(), 1.0);
        let q = Distribution::new(vec![0.3, 0.7]).unwrap();
        assert!((variational_distance(&p, &q).unwrap() - 0.2).abs() < 1e-15);
        assert!(variational_distance(&p, &Distribution::uniform(3)).is_err());
    }

    #[test]
    fn product_channel_examples() {
        let bsc = Channel::bsc(0.1).unwrap();
        assert_eq!(product_channel(&bsc, 1).unwrap(), bsc);
        let w2 = product_channel(&bsc, 2).unwrap();
        // (0,0) -> (1,1)
        assert!((w2.prob(0, 3) - 0.01).abs() < 1e-15);
        // (0,1) -> (0,1): first letter kept, second kept
        assert!((w2.prob(1, 1) - 0.81).abs() < 1e-15);
        let err = product_channel_capped(&bsc, 12, 1000).unwrap_err();
        assert!(matches!(err, Error::CapExceeded { .. }));
        assert!(err.to_string().contains("implicit"));
    }

    #[test]
    fn normalization_slack() {
        assert!(Distribution::new(vec![0.5, 0.5 + 5e-10]).is_ok());
        assert!(Distribution::new(vec![0.5, 0.5 + 5e-9]).is_err());
        assert!(Distribution::new(vec![1.2, -0.2]).is_err());
        let err = Channel::new(vec![vec![0.5, 0.5], vec![0.4, 0.4]]).unwrap_err();
        assert_eq!(err.to_string(), "row 1 not stochastic (sum = 0.8)");
    }

    #[test]
    fn m_types() {
        let t = MType::from_samples(&[0, 1, 1, 2], 3).unwrap();
        assert_eq!(t.counts(), &[1, 2, 1]);
        assert_eq!(t.to_distribution().probs(), &[0.25, 0.5, 0.25]);
        assert_eq!(enumerate_m_types(2, 2).len(), 3);
        assert_eq!(enumerate_m_types(3, 8).len(), 45);
        let half = Distribution::new(vec![0.5, 0.5]).unwrap();
        assert!(is_m_type(&half, 2));
        assert!(!is_m_type(&half, 3));
    }
}
