use anyhow::{anyhow, bail, Result};
use clap::{Args, Parser, Subcommand, ValueEnum};
use rand::Rng;
use rayon::prelude::*;
use serde::Serialize;
use serde_json::{json, Value};

use idbounds_core::idcode::{evaluate, search_codes, SearchBudget};
use idbounds_core::io::{load_channel, load_code, load_distribution};
use idbounds_core::minimax::saddle::saddle_solve_best_effort;
use idbounds_core::minimax::{blahut_arimoto, corollary1_bound, corollary2_bound, existing_bound};
use idbounds_core::resolvability::{soft_cover_best_of, soft_cover_expectation, theorem1_bound, truncation_set};
use idbounds_core::rng::stream_rng;
use idbounds_core::second_order::{
    achievability_rate, dispersion_analysis, finite_n_converse_with, second_order_id_capacity, spectrum_cdf,
    FiniteNOptions, SpectrumMode,
};
use idbounds_core::testing::{beta_epsilon, ds_epsilon, lemma1_check};
use idbounds_core::{Channel, Distribution};

use crate::manifest::ManifestBuilder;

/// Bad flag combinations that clap cannot express; reported with exit 64.
#[derive(Debug)]
pub struct UsageError(pub String);

impl std::fmt::Display for UsageError {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(&self.0)
    }
}

impl std::error::Error for UsageError {}

#[derive(Debug, Parser)]
#[command(
    name = "idbounds",
    version,
    about = "Finite-blocklength bounds for identification via channels"
)]
pub struct Cli {
    #[arg(long, global = true, value_enum, default_value_t = Format::Json)]
    pub format: Format,
    /// Caps the number of worker threads.
    #[arg(long, global = true)]
    pub jobs: Option<usize>,
    /// Runs the built-in invariant suite and exits.
    #[arg(long)]
    pub selftest: bool,
    #[command(subcommand)]
    pub command: Option<Command>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum Format {
    Json,
    Csv,
}

#[derive(Debug, Args)]
pub struct SeedArg {
    #[arg(long, env = "IDBOUNDS_SEED", default_value_t = 0)]
    pub seed: u64,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Channel capacity by Blahut-Arimoto.
    Capacity {
        #[arg(long)]
        channel: String,
        #[arg(long, default_value_t = 1e-8)]
        tol: f64,
    },
    /// Saddle point of the hypothesis-testing minimax problem.
    Saddle {
        #[arg(long)]
        channel: String,
        #[arg(long)]
        eps: f64,
        #[arg(long, default_value_t = 1e-4)]
        tol: f64,
    },
    /// Single-shot converse bounds.
    Converse {
        #[arg(long)]
        channel: String,
        #[arg(long, value_enum, default_value_t = Variant::Cor1)]
        variant: Variant,
        #[arg(long)]
        eps: Option<f64>,
        #[arg(long)]
        delta: Option<f64>,
        #[arg(long)]
        eta: Option<f64>,
        #[arg(long, default_value_t = 1e-4)]
        tol: f64,
        #[arg(long)]
        gamma: Option<f64>,
        #[arg(long)]
        m: Option<u64>,
    },
    /// Neyman-Pearson beta between two distributions.
    Beta {
        #[arg(long)]
        p: String,
        #[arg(long)]
        q: String,
        #[arg(long)]
        eps: f64,
    },
    /// Information-spectrum divergence.
    Dspec {
        #[arg(long)]
        p: String,
        #[arg(long)]
        q: String,
        #[arg(long)]
        eps: f64,
    },
    /// Random sweep of the spectrum/beta sandwich.
    Lemma1 {
        #[arg(long, default_value_t = 1000)]
        sweep: u64,
        #[arg(long, default_value_t = 4)]
        size: usize,
        #[command(flatten)]
        seed: SeedArg,
    },
    /// Soft-covering distance of random M-types.
    Softcover {
        #[arg(long)]
        channel: String,
        #[arg(long)]
        input: String,
        #[arg(long)]
        q: String,
        #[arg(long)]
        gamma: f64,
        #[arg(long)]
        m: u64,
        #[arg(long, default_value_t = 100)]
        trials: u64,
        #[command(flatten)]
        seed: SeedArg,
    },
    /// Lower bound on eps + delta for codes with more than |X|^M messages.
    Thm1 {
        #[arg(long)]
        channel: String,
        #[arg(long)]
        q: String,
        #[arg(long)]
        gamma: f64,
        #[arg(long)]
        m: u64,
    },
    /// Capacity-achieving polytope and dispersions.
    Dispersion {
        #[arg(long)]
        channel: String,
        #[arg(long, default_value_t = 1e-8)]
        tol: f64,
    },
    /// Second-order ID capacity sqrt(V_eps) * Phi^{-1}(eps).
    #[command(name = "second-order")]
    SecondOrder {
        #[arg(long)]
        channel: String,
        #[arg(long)]
        eps: f64,
    },
    /// CDF of the normalized information density.
    Spectrum {
        #[arg(long)]
        channel: String,
        #[arg(long)]
        input: String,
        #[arg(long)]
        q: String,
        #[arg(long)]
        n: u64,
        #[arg(long, value_enum, default_value_t = Mode::Dp)]
        mode: Mode,
        #[arg(long, default_value_t = 1_000_000)]
        samples: u64,
        #[command(flatten)]
        seed: SeedArg,
    },
    /// Finite-blocklength converse or achievability over W^n.
    Fbl {
        #[arg(long)]
        channel: String,
        /// One or more blocklengths, comma separated.
        #[arg(long, value_delimiter = ',', required = true)]
        n: Vec<u64>,
        #[arg(long)]
        eps: f64,
        #[arg(long, default_value_t = 0.0)]
        delta: f64,
        #[arg(long, value_enum)]
        side: Side,
        #[arg(long)]
        eta: Option<f64>,
        #[arg(long, value_enum, default_value_t = Mode::Dp)]
        mode: Mode,
        #[arg(long, default_value_t = 1_000_000)]
        samples: u64,
        #[command(flatten)]
        seed: SeedArg,
    },
    /// Identification codes.
    Idcode {
        #[command(subcommand)]
        action: IdcodeAction,
    },
    /// Re-runs a saved JSON report and checks that it reproduces.
    Verify {
        #[arg(long)]
        report: String,
    },
}

#[derive(Debug, Subcommand)]
pub enum IdcodeAction {
    Eval {
        #[arg(long)]
        channel: String,
        #[arg(long)]
        code: String,
    },
    Search {
        #[arg(long)]
        channel: String,
        #[arg(long)]
        eps: f64,
        #[arg(long)]
        delta: f64,
        #[arg(long, default_value_t = 4096)]
        budget: usize,
        #[command(flatten)]
        seed: SeedArg,
    },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum Variant {
    Cor1,
    Cor2,
    Existing,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum Mode {
    Dp,
    Mc,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum Side {
    Converse,
    Achievability,
}

pub struct Outcome {
    pub report: Value,
    /// CSV rows when the report is naturally a table.
    pub rows: Option<Vec<Value>>,
}

fn single<T: Serialize>(report: &T) -> Result<Outcome> {
    Ok(Outcome {
        report: serde_json::to_value(report)?,
        rows: None,
    })
}

fn need<T>(v: Option<T>, flag: &str, variant: &str) -> Result<T> {
    v.ok_or_else(|| anyhow!(UsageError(format!("--{flag} is required for --variant {variant}"))))
}

fn channel(spec: &str, m: &mut ManifestBuilder) -> Result<Channel> {
    m.input("channel", spec);
    Ok(load_channel(spec)?)
}

fn distribution(role: &str, spec: &str, m: &mut ManifestBuilder) -> Result<Distribution> {
    m.input(role, spec);
    Ok(load_distribution(spec)?)
}

fn spectrum_mode(mode: Mode, samples: u64, seed: u64, m: &mut ManifestBuilder) -> SpectrumMode {
    match mode {
        Mode::Dp => SpectrumMode::ExactDp,
        Mode::Mc => {
            m.seed(seed);
            SpectrumMode::MonteCarlo { samples, seed }
        }
    }
}

fn random_distribution<R: Rng>(rng: &mut R, k: usize) -> Result<Distribution> {
    // occasional zeros exercise the infinite-ratio branches
    let v: Vec<f64> = (0..k)
        .map(|_| {
            if rng.random::<f64>() < 0.1 {
                0.0
            } else {
                rng.random::<f64>()
            }
        })
        .collect();
    let s: f64 = v.iter().sum();
    if s == 0.0 {
        return Ok(Distribution::uniform(k));
    }
    Ok(Distribution::new(v.into_iter().map(|x| x / s).collect())?)
}

pub fn dispatch(command: Command, m: &mut ManifestBuilder) -> Result<Outcome> {
    match command {
        Command::Capacity { channel: c, tol } => {
            m.tolerance("capacity", tol);
            single(&blahut_arimoto(&channel(&c, m)?, tol)?)
        }
        Command::Saddle { channel: c, eps, tol } => {
            m.tolerance("saddle", tol);
            single(&saddle_solve_best_effort(&channel(&c, m)?, eps, tol)?)
        }
        Command::Converse {
            channel: c,
            variant,
            eps,
            delta,
            eta,
            tol,
            gamma,
            m: big_m,
        } => {
            let w = channel(&c, m)?;
            match variant {
                Variant::Cor1 => single(&corollary1_bound(
                    &w,
                    need(eps, "eps", "cor1")?,
                    need(delta, "delta", "cor1")?,
                    need(eta, "eta", "cor1")?,
                )?),
                Variant::Cor2 => {
                    m.tolerance("saddle", tol);
                    single(&corollary2_bound(
                        &w,
                        need(eps, "eps", "cor2")?,
                        need(delta, "delta", "cor2")?,
                        need(eta, "eta", "cor2")?,
                        tol,
                    )?)
                }
                Variant::Existing => single(&existing_bound(
                    &w,
                    need(gamma, "gamma", "existing")?,
                    need(big_m, "m", "existing")?,
                )?),
            }
        }
        Command::Beta { p, q, eps } => {
            let (p, q) = (distribution("p", &p, m)?, distribution("q", &q, m)?);
            single(&beta_epsilon(&p, &q, eps)?)
        }
        Command::Dspec { p, q, eps } => {
            let (p, q) = (distribution("p", &p, m)?, distribution("q", &q, m)?);
            single(&ds_epsilon(&p, &q, eps)?)
        }
        Command::Lemma1 { sweep, size, seed } => {
            if size == 0 {
                bail!(UsageError("--size must be at least 1".into()));
            }
            let seed = seed.seed;
            m.seed(seed);
            let rows: Vec<Value> = (0..sweep)
                .into_par_iter()
                .map(|i| -> Result<Value> {
                    let mut rng = stream_rng(seed, i);
                    let p = random_distribution(&mut rng, size)?;
                    let q = random_distribution(&mut rng, size)?;
                    let eps = 0.01 + 0.9 * rng.random::<f64>();
                    let zeta = (1.0 - eps) * (0.01 + 0.98 * rng.random::<f64>());
                    let r = lemma1_check(&p, &q, eps, zeta)?;
                    Ok(json!({"instance": i, "eps": eps, "zeta": zeta, "report": r}))
                })
                .collect::<Result<_>>()?;
            let failures: Vec<u64> = rows
                .iter()
                .filter(|r| r["report"]["holds"] == Value::Bool(false))
                .filter_map(|r| r["instance"].as_u64())
                .collect();
            Ok(Outcome {
                report: json!({"instances": sweep, "alphabet_size": size, "all_hold": failures.is_empty(), "failures": failures}),
                rows: Some(rows),
            })
        }
        Command::Softcover {
            channel: c,
            input,
            q,
            gamma,
            m: big_m,
            trials,
            seed,
        } => {
            let w = channel(&c, m)?;
            let p = distribution("input", &input, m)?;
            let q = distribution("q", &q, m)?;
            m.seed(seed.seed);
            let s = truncation_set(&w, &q, gamma)?;
            let best = soft_cover_best_of(&p, &w, &s, big_m, trials, seed.seed)?;
            let stats = if trials >= 2 {
                Some(soft_cover_expectation(&p, &w, &s, big_m, trials, seed.seed)?)
            } else {
                None
            };
            single(&json!({"best": best, "stats": stats, "trials": trials, "gamma": gamma, "m": big_m}))
        }
        Command::Thm1 {
            channel: c,
            q,
            gamma,
            m: big_m,
        } => {
            let w = channel(&c, m)?;
            let q = distribution("q", &q, m)?;
            let r = theorem1_bound(&w, &q, gamma, big_m)?;
            single(&json!({"bound": r.lower_bound_on_eps_plus_delta, "details": r}))
        }
        Command::Dispersion { channel: c, tol } => {
            m.tolerance("capacity", tol);
            single(&dispersion_analysis(&channel(&c, m)?, tol)?)
        }
        Command::SecondOrder { channel: c, eps } => single(&second_order_id_capacity(&channel(&c, m)?, eps)?),
        Command::Spectrum {
            channel: c,
            input,
            q,
            n,
            mode,
            samples,
            seed,
        } => {
            let w = channel(&c, m)?;
            let p = distribution("input", &input, m)?;
            let q = distribution("q", &q, m)?;
            let mode = spectrum_mode(mode, samples, seed.seed, m);
            let s = spectrum_cdf(&p, &w, &q, n, mode)?;
            let rows = s
                .levels
                .iter()
                .map(serde_json::to_value)
                .collect::<std::result::Result<_, _>>()?;
            Ok(Outcome {
                report: serde_json::to_value(&s)?,
                rows: Some(rows),
            })
        }
        Command::Fbl {
            channel: c,
            n,
            eps,
            delta,
            side,
            eta,
            mode,
            samples,
            seed,
        } => {
            let w = channel(&c, m)?;
            let mut reports = Vec::new();
            let mut rows = Vec::new();
            for &n in &n {
                match side {
                    Side::Converse => {
                        let options = FiniteNOptions {
                            eta,
                            mc_samples: samples,
                            mc_seed: seed.seed,
                            ..Default::default()
                        };
                        let r = finite_n_converse_with(&w, n, eps, delta, &options)?;
                        if r.heuristic {
                            m.seed(seed.seed);
                        }
                        rows.push(json!({
                            "n": n,
                            "bound": r.report.bound_on_loglog_n,
                            "main_term": r.report.main_term,
                            "slack": r.report.slack_terms.total(),
                            "seed": r.mc_seed,
                        }));
                        reports.push(serde_json::to_value(&r)?);
                    }
                    Side::Achievability => {
                        let mode = spectrum_mode(mode, samples, seed.seed, m);
                        let r = achievability_rate(&w, n, eps, mode)?;
                        let main = n as f64 * r.rate;
                        rows.push(json!({
                            "n": n,
                            "bound": r.loglog_n,
                            "main_term": main,
                            "slack": main - r.loglog_n,
                            "seed": matches!(mode, SpectrumMode::MonteCarlo { .. }).then_some(seed.seed),
                        }));
                        reports.push(serde_json::to_value(&r)?);
                    }
                }
            }
            Ok(Outcome {
                report: Value::Array(reports),
                rows: Some(rows),
            })
        }
        Command::Idcode { action } => match action {
            IdcodeAction::Eval { channel: c, code } => {
                let w = channel(&c, m)?;
                m.input("code", &code);
                single(&evaluate(&load_code(&code)?, &w)?)
            }
            IdcodeAction::Search {
                channel: c,
                eps,
                delta,
                budget,
                seed,
            } => {
                let w = channel(&c, m)?;
                m.seed(seed.seed);
                single(&search_codes(
                    &w,
                    eps,
                    delta,
                    SearchBudget { candidates: budget },
                    seed.seed,
                )?)
            }
        },
        Command::Verify { .. } => bail!(UsageError("verify cannot be nested".into())),
    }
}
