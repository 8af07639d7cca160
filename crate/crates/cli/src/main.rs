mod commands;
mod manifest;
mod output;

use std::process::ExitCode;
use std::time::Instant;

use anyhow::{anyhow, Context, Result};
use clap::error::ErrorKind;
use clap::Parser;
use serde_json::{json, Value};

use commands::{dispatch, Cli, Command, Format, Outcome, UsageError};
use manifest::{ManifestBuilder, RunManifest};

const EXIT_FAILURE: u8 = 1;
const EXIT_INVALID: u8 = 2;
const EXIT_USAGE: u8 = 64;

fn execute(argv: &[String], command: Command) -> Result<(RunManifest, Outcome)> {
    let start = Instant::now();
    let mut builder = ManifestBuilder::default();
    let outcome = dispatch(command, &mut builder)?;
    Ok((builder.finish(argv.to_vec(), start.elapsed().as_secs_f64()), outcome))
}

fn render(format: Format, manifest: &RunManifest, outcome: &Outcome) -> Result<String> {
    let manifest = serde_json::to_value(manifest)?;
    match format {
        Format::Json => output::to_json(&json!({"manifest": manifest, "report": outcome.report})),
        Format::Csv => {
            let rows = match &outcome.rows {
                Some(r) => r.clone(),
                None => vec![outcome.report.clone()],
            };
            output::to_csv(&rows, &manifest)
        }
    }
}

/// Re-runs the command line recorded in a JSON report and compares.
fn verify(path: &str) -> Result<Value> {
    let text = std::fs::read_to_string(path).with_context(|| format!("reading {path}"))?;
    let saved: Value = serde_json::from_str(&text).context("report is not JSON")?;
    let manifest: RunManifest = serde_json::from_value(
        saved
            .get("manifest")
            .cloned()
            .ok_or_else(|| anyhow!("report has no manifest"))?,
    )
    .context("malformed manifest")?;
    let inputs_match = manifest.inputs.iter().all(|i| i.still_matches());
    let cli = Cli::try_parse_from(&manifest.command_line).map_err(|e| anyhow!("recorded command line: {e}"))?;
    let command = cli
        .command
        .ok_or_else(|| anyhow!("recorded command line has no subcommand"))?;
    if matches!(command, Command::Verify { .. }) {
        return Err(anyhow!(UsageError("verify cannot be nested".into())));
    }
    let (_, outcome) = execute(&manifest.command_line, command)?;
    let report_matches = output::to_json(&saved["report"])? == output::to_json(&outcome.report)?;
    if !(inputs_match && report_matches) {
        return Err(anyhow!(
            "report does not reproduce (inputs match: {inputs_match}, report matches: {report_matches})"
        ));
    }
    Ok(json!({"report": path, "inputs_match": inputs_match, "report_matches": report_matches}))
}

fn selftest() -> ExitCode {
    let outcomes = idbounds_core::selftest::run_all();
    let failed = outcomes.iter().filter(|o| !o.passed).count();
    for o in &outcomes {
        eprintln!("{} {}: {}", if o.passed { "PASS" } else { "FAIL" }, o.name, o.detail);
    }
    match output::to_json(&json!({"checks": outcomes, "failed": failed})) {
        Ok(s) => println!("{s}"),
        Err(e) => eprintln!("error: {e}"),
    }
    if failed == 0 {
        ExitCode::SUCCESS
    } else {
        ExitCode::from(EXIT_FAILURE)
    }
}

fn report_error(e: &anyhow::Error) -> ExitCode {
    if e.downcast_ref::<UsageError>().is_some() {
        eprintln!("usage error: {e}");
        return ExitCode::from(EXIT_USAGE);
    }
    eprintln!("error: {e:#}");
    ExitCode::from(EXIT_INVALID)
}

fn main() -> ExitCode {
    let argv: Vec<String> = std::env::args().collect();
    let cli = match Cli::try_parse_from(&argv) {
        Ok(c) => c,
        Err(e) if matches!(e.kind(), ErrorKind::DisplayHelp | ErrorKind::DisplayVersion) => {
            let _ = e.print();
            return ExitCode::SUCCESS;
        }
        Err(e) => {
            let _ = e.print();
            return ExitCode::from(EXIT_USAGE);
        }
    };
    if let Some(jobs) = cli.jobs {
        if jobs == 0 {
            return report_error(&anyhow!(UsageError("--jobs must be at least 1".into())));
        }
        if let Err(e) = rayon::ThreadPoolBuilder::new().num_threads(jobs).build_global() {
            return report_error(&anyhow!(e));
        }
    }
    if cli.selftest {
        return selftest();
    }
    let Some(command) = cli.command else {
        return report_error(&anyhow!(UsageError(
            "a subcommand or --selftest is required; see --help".into()
        )));
    };
    let result = match command {
        Command::Verify { report } => verify(&report).and_then(|v| output::to_json(&v)),
        command => execute(&argv, command).and_then(|(m, o)| render(cli.format, &m, &o)),
    };
    match result {
        Ok(text) => {
            print!("{text}");
            if !text.ends_with('\n') {
                println!();
            }
            ExitCode::SUCCESS
        }
        Err(e) => report_error(&e),
    }
}
