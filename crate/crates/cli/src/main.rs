//! `kdesign` command-line frontend.
//!
//! Exit codes: 0 success, 1 a check ran and found a mismatch (the report is
//! still written), 2 invalid arguments or a violated precondition, 3 a
//! resource limit. Codes 2 and 3 write no report.

mod args;
mod run;

use std::fs;
use std::io::Write;
use std::process::ExitCode;
use std::time::Instant;

use clap::Parser;
use kdesign::designmetrics::MetricRecord;
use serde::Serialize;
use serde_json::Value;

use args::{Cli, Format};
use run::{dispatch, params, Outcome, Table};

#[derive(Serialize)]
struct RunConfig {
    subcommand: String,
    params: Value,
    master_seed: u64,
    output_path: Option<String>,
    format: Format,
}

#[derive(Serialize)]
struct Report {
    #[serde(flatten)]
    record: MetricRecord,
    passed: bool,
    config: RunConfig,
    details: Value,
}

fn csv_text(report: &Report, table: Option<&Table>) -> Result<String, csv::Error> {
    let mut w = csv::WriterBuilder::new()
        .terminator(csv::Terminator::CRLF)
        .from_writer(Vec::new());
    match table {
        Some(t) => {
            w.write_record(&t.header)?;
            for r in &t.rows {
                w.write_record(r)?;
            }
        }
        None => {
            let r = &report.record;
            let opt = |v: Option<f64>| v.map(|x| x.to_string()).unwrap_or_default();
            w.write_record(["op", "estimate", "std_error", "samples", "residual", "elapsed_ms", "master_seed"])?;
            w.write_record([
                r.op.clone(),
                opt(r.estimate),
                opt(r.std_error),
                r.samples.map(|s| s.to_string()).unwrap_or_default(),
                opt(r.residual),
                r.elapsed_ms.to_string(),
                r.master_seed.to_string(),
            ])?;
        }
    }
    let bytes = w.into_inner().map_err(|e| e.into_error())?;
    Ok(String::from_utf8(bytes).expect("csv output is UTF-8"))
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return ExitCode::from(e.exit_code() as u8);
        }
    };
    let name = cli.command.name();
    let seed = cli.common.seed;
    let start = Instant::now();
    let outcome: Outcome = match dispatch(&cli.command, seed) {
        Ok(o) => o,
        Err(e) => {
            eprintln!("error: {name}: {e}");
            return ExitCode::from(if e.is_resource_limit() { 3 } else { 2 });
        }
    };
    let params = params(&cli.command);
    let report = Report {
        record: MetricRecord {
            op: name.to_string(),
            params: params.clone(),
            estimate: outcome.estimate,
            std_error: outcome.std_error,
            samples: outcome.samples,
            residual: outcome.residual,
            elapsed_ms: start.elapsed().as_millis() as u64,
            master_seed: seed,
        },
        passed: outcome.passed,
        config: RunConfig {
            subcommand: name.to_string(),
            params,
            master_seed: seed,
            output_path: cli.common.out.as_ref().map(|p| p.display().to_string()),
            format: cli.common.format,
        },
        details: outcome.details,
    };
    let text = match cli.common.format {
        Format::Json => serde_json::to_string_pretty(&report).expect("report serializes") + "\n",
        Format::Csv => match csv_text(&report, outcome.table.as_ref()) {
            Ok(t) => t,
            Err(e) => {
                eprintln!("error: cannot format CSV: {e}");
                return ExitCode::from(1);
            }
        },
    };
    let written = match &cli.common.out {
        Some(path) => fs::write(path, &text).map_err(|e| format!("cannot write {}: {e}", path.display())),
        None => std::io::stdout()
            .write_all(text.as_bytes())
            .map_err(|e| format!("cannot write stdout: {e}")),
    };
    if let Err(msg) = written {
        eprintln!("error: {msg}");
        return ExitCode::from(1);
    }
    if outcome.passed {
        ExitCode::SUCCESS
    } else {
        eprintln!("{name}: check failed, see report");
        ExitCode::from(1)
    }
}
