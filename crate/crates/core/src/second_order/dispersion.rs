//! Capacity-achieving input polytope and information variances.
//!
//! `V(W || Q | P) = sum_x P(x) v_x` is linear in `P`, so its extrema over the
//! polytope of capacity-achieving inputs sit at vertices. Vertices are the
//! basic feasible solutions of `{P >= 0, supp P in active, PW = P_Y*}`; they
//! are found by trying every support with linearly independent rows.

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::channel::{output_distribution, Channel, Distribution};
use crate::error::{Error, Result};
use crate::extreal::kl_divergence;
use crate::minimax::capacity::blahut_arimoto_refined;

/// Vertex enumeration is exhaustive over supports, hence the cap.
pub const MAX_ACTIVE_INPUTS: usize = 8;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Vertex {
    pub input: Distribution,
    /// `V(W || P_Y* | P)`.
    pub conditional_variance: f64,
    /// `U(P, W)`.
    pub unconditional_variance: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DispersionReport {
    pub capacity: f64,
    pub output_dist: Distribution,
    pub v_min: f64,
    pub v_max: f64,
    pub u_min: f64,
    pub u_max: f64,
    pub pi_vertices: Vec<Vertex>,
    pub active_inputs: Vec<usize>,
    /// Per-input variance of `log W(Y|x)/P_Y*(Y)` under `W(.|x)`.
    pub letter_variances: Vec<f64>,
    pub capacity_gap: f64,
    pub tol: f64,
}

/// `Var_{W_x}[log W_x(Y)/q(Y)]`.
pub fn letter_variance(row: &[f64], q: &[f64]) -> f64 {
    let d = kl_divergence(row, q);
    row.iter()
        .zip(q)
        .filter(|(&wy, _)| wy > 0.0)
        .map(|(&wy, &qy)| wy * ((wy / qy).ln() - d).powi(2))
        .sum()
}

/// `V(W || q | p)`.
pub fn conditional_variance(w: &Channel, q: &[f64], p: &[f64]) -> f64 {
    p.iter()
        .zip(w.rows())
        .filter(|(&px, _)| px > 0.0)
        .map(|(px, row)| px * letter_variance(row, q))
        .sum()
}

/// `U(p, W)`: variance of the information density under `p x W`.
pub fn unconditional_variance(w: &Channel, p: &Distribution) -> Result<f64> {
    let out = output_distribution(p, w)?;
    let q = out.probs();
    let mut mean = 0.0;
    for (&px, row) in p.probs().iter().zip(w.rows()) {
        for (&wy, &qy) in row.iter().zip(q) {
            let m = px * wy;
            if m > 0.0 {
                mean += m * (wy / qy).ln();
            }
        }
    }
    let mut var = 0.0;
    for (&px, row) in p.probs().iter().zip(w.rows()) {
        for (&wy, &qy) in row.iter().zip(q) {
            let m = px * wy;
            if m > 0.0 {
                var += m * ((wy / qy).ln() - mean).powi(2);
            }
        }
    }
    Ok(var)
}

/// Solves `sum_{x in S} P(x) W_x = q` exactly when the rows are independent.
fn solve_support(w: &Channel, support: &[usize], q: &[f64]) -> Option<(Vec<f64>, f64)> {
    let ny = w.output_size();
    let a = DMatrix::from_fn(ny, support.len(), |y, j| w.prob(support[j], y));
    let svd = a.clone().svd(true, true);
    let smallest = svd.singular_values.iter().copied().fold(f64::INFINITY, f64::min);
    if smallest < 1e-9 {
        return None;
    }
    let b = DVector::from_column_slice(q);
    let sol = svd.solve(&b, 1e-12).ok()?;
    let residual = (&a * &sol - &b).amax();
    Some((sol.iter().copied().collect(), residual))
}

pub fn dispersion_analysis(w: &Channel, tol: f64) -> Result<DispersionReport> {
    if !(tol > 0.0) {
        return Err(Error::domain(format!("tolerance {tol} must be positive")));
    }
    let cap = blahut_arimoto_refined(w, tol)?;
    let q = cap.output_dist.probs().to_vec();
    let c = cap.capacity;
    let divergences: Vec<f64> = w.rows().map(|row| kl_divergence(row, &q)).collect();
    let active_tol = 100.0 * tol;
    let active_inputs: Vec<usize> = (0..w.input_size())
        .filter(|&x| (divergences[x] - c).abs() <= active_tol)
        .collect();
    if active_inputs.len() > MAX_ACTIVE_INPUTS {
        return Err(Error::CapExceeded {
            what: "active inputs for vertex enumeration",
            size: active_inputs.len() as f64,
            cap: MAX_ACTIVE_INPUTS as f64,
            hint: "vertex enumeration of the capacity-achieving polytope is exhaustive",
        });
    }
    let letter_variances: Vec<f64> = w.rows().map(|row| letter_variance(row, &q)).collect();
    // the BA output is only accurate to roughly the square root of its gap
    let residual_tol = 1e-6_f64.max(10.0 * cap.gap.sqrt());

    let mut vertices: Vec<Vertex> = Vec::new();
    let a = active_inputs.len();
    for mask in 1u32..(1 << a) {
        let support: Vec<usize> = (0..a)
            .filter(|&i| mask >> i & 1 == 1)
            .map(|i| active_inputs[i])
            .collect();
        if support.len() > w.output_size() {
            continue;
        }
        let Some((sol, residual)) = solve_support(w, &support, &q) else {
            continue;
        };
        if residual > residual_tol || sol.iter().any(|&v| v < -1e-9) {
            continue;
        }
        let mut p = vec![0.0; w.input_size()];
        for (&x, &v) in support.iter().zip(&sol) {
            p[x] = v.max(0.0);
        }
        let total: f64 = p.iter().sum();
        if (total - 1.0).abs() > residual_tol * w.output_size() as f64 {
            continue;
        }
        let input = Distribution::new(p.iter().map(|v| v / total).collect())?;
        let duplicate = vertices.iter().any(|v| {
            v.input
                .probs()
                .iter()
                .zip(input.probs())
                .all(|(a, b)| (a - b).abs() < 1e-9)
        });
        if duplicate {
            continue;
        }
        vertices.push(Vertex {
            conditional_variance: conditional_variance(w, &q, input.probs()),
            unconditional_variance: unconditional_variance(w, &input)?,
            input,
        });
    }
    if vertices.is_empty() {
        return Err(Error::Degenerate(format!(
            "no capacity-achieving input found among {} active inputs; retry with a larger tolerance",
            active_inputs.len()
        )));
    }
    let fold = |f: fn(&Vertex) -> f64, max: bool| {
        vertices
            .iter()
            .map(f)
            .fold(if max { f64::NEG_INFINITY } else { f64::INFINITY }, |a, b| {
                if max {
                    a.max(b)
                } else {
                    a.min(b)
                }
            })
    };
    Ok(DispersionReport {
        capacity: c,
        v_min: fold(|v| v.conditional_variance, false),
        v_max: fold(|v| v.conditional_variance, true),
        u_min: fold(|v| v.unconditional_variance, false),
        u_max: fold(|v| v.unconditional_variance, true),
        output_dist: cap.output_dist,
        pi_vertices: vertices,
        active_inputs,
        letter_variances,
        capacity_gap: cap.gap,
        tol,
    })
}

/// `V_min` below one half, `V_max` from one half on.
pub fn v_eps(report: &DispersionReport, eps: f64) -> Result<f64> {
    check_eps(eps)?;
    Ok(if eps < 0.5 { report.v_min } else { report.v_max })
}

pub fn u_eps(report: &DispersionReport, eps: f64) -> Result<f64> {
    check_eps(eps)?;
    Ok(if eps < 0.5 { report.u_min } else { report.u_max })
}

/// The polytope vertex attaining `U_eps`; ties go to the lexicographically
/// smallest support.
pub fn u_eps_vertex(report: &DispersionReport, eps: f64) -> Result<&Vertex> {
    let target = u_eps(report, eps)?;
    let support = |v: &Vertex| -> Vec<usize> { v.input.support().collect() };
    report
        .pi_vertices
        .iter()
        .filter(|v| (v.unconditional_variance - target).abs() <= 1e-12)
        .min_by(|a, b| support(a).cmp(&support(b)))
        .ok_or_else(|| Error::Degenerate("no vertex attains U_eps".into()))
}

fn check_eps(eps: f64) -> Result<()> {
    if eps > 0.0 && eps < 1.0 {
        Ok(())
    } else {
        Err(Error::domain(format!("eps = {eps} outside (0, 1)")))
    }
}
