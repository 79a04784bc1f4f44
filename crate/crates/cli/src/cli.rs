use std::fs::File;
use std::io::{self, BufReader, BufWriter, Read, Write};
use std::path::{Path, PathBuf};

use chrono::{DateTime, NaiveDate, SubsecRound, Utc};
use clap::{Args, Parser, Subcommand};
use facihub_core::presence::{kappa_by_indicator, parse_gold_codes, Kappa};
use facihub_core::synth::{synthetic_log, to_ndjson, SynthParams};
use facihub_core::{timefmt, Engine, EngineConfig};
use serde::Serialize;
use serde_json::{json, Value};

use crate::api::{analysis_output, serve};
use crate::error::AppError;

#[derive(Debug, Parser)]
#[command(name = "facihub", version, about = "Network-targeted, human-reviewed agent replies for discussion forums")]
pub struct Cli {
    /// Configuration file (TOML). Falls back to $FACIHUB_CONFIG, then defaults.
    #[arg(long, global = true)]
    pub config: Option<PathBuf>,
    /// Overrides storage.data_dir from the configuration.
    #[arg(long, global = true)]
    pub data_dir: Option<PathBuf>,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Ingest a line-delimited action log ("-" reads stdin).
    Ingest { file: PathBuf },
    /// Run targeting and candidate generation as of a timestamp.
    Run {
        #[arg(long, value_parser = parse_time)]
        as_of: DateTime<Utc>,
    },
    /// List pending candidates in review order.
    Queue,
    /// Show one candidate with its thread context and decision.
    Show { candidate_id: String },
    /// Record a reviewer decision from a JSON payload file ("-" reads stdin).
    Decide {
        candidate_id: String,
        #[arg(long)]
        payload: PathBuf,
        #[arg(long, value_parser = parse_time)]
        at: Option<DateTime<Utc>>,
    },
    /// Generate a new candidate for a target whose earlier candidates were all rejected.
    Regenerate {
        target_id: String,
        #[arg(long, value_parser = parse_time)]
        at: Option<DateTime<Utc>>,
    },
    /// Publish accepted, unpublished candidates.
    Publish {
        #[arg(long, value_parser = parse_time)]
        since: Option<DateTime<Utc>>,
        #[arg(long, value_parser = parse_time)]
        at: Option<DateTime<Utc>>,
    },
    /// Daily acceptance metrics.
    Metrics {
        #[arg(long)]
        from: NaiveDate,
        #[arg(long)]
        to: NaiveDate,
        #[arg(long)]
        tsv: bool,
    },
    /// Code every uncoded learner record with the configured coder model.
    Code,
    /// Load gold or externally produced codes.
    ImportCodes {
        file: PathBuf,
        /// Keep only this coder's lines.
        #[arg(long)]
        coder: Option<String>,
    },
    /// Inter-rater agreement between two coders of a gold file.
    Kappa {
        file: PathBuf,
        #[arg(long)]
        coder_a: String,
        #[arg(long)]
        coder_b: String,
    },
    /// Run an analysis and write its table.
    Analyze(AnalyzeArgs),
    /// Serve the HTTP API.
    Serve {
        #[arg(long)]
        bind: Option<String>,
    },
    /// Write a seeded synthetic action log.
    Synth {
        #[arg(long, default_value_t = 500)]
        records: usize,
        #[arg(long, default_value_t = 40)]
        learners: usize,
        #[arg(long, default_value_t = 14)]
        days: i64,
        #[arg(long, default_value_t = 7)]
        seed: u64,
        #[arg(long, value_parser = parse_time)]
        start: Option<DateTime<Utc>>,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Fold the event log into a fresh snapshot.
    Compact,
}

#[derive(Debug, Args)]
pub struct AnalyzeArgs {
    #[command(flatten)]
    kind: AnalysisKind,
    /// Output file; stdout when omitted.
    #[arg(long)]
    out: Option<PathBuf>,
    /// Print JSON instead of the table.
    #[arg(long)]
    json: bool,
}

#[derive(Debug, Args)]
#[group(required = true, multiple = false)]
struct AnalysisKind {
    #[arg(long, value_parser = clap::value_parser!(u8).range(1..=2))]
    goal: Option<u8>,
    #[arg(long)]
    permutation: bool,
    #[arg(long)]
    balance: bool,
    /// Learner-level index means per condition.
    #[arg(long)]
    means: bool,
}

fn parse_time(raw: &str) -> Result<DateTime<Utc>, String> {
    timefmt::parse_utc(raw).ok_or_else(|| format!("not an ISO-8601 timestamp: {raw}"))
}

fn now() -> DateTime<Utc> {
    Utc::now().trunc_subsecs(0)
}

fn io_error(path: &Path, e: io::Error) -> AppError {
    AppError::bad_request(format!("{}: {e}", path.display()))
}

fn open_input(path: &Path) -> Result<Box<dyn Read>, AppError> {
    if path.as_os_str() == "-" {
        Ok(Box::new(io::stdin()))
    } else {
        Ok(Box::new(File::open(path).map_err(|e| io_error(path, e))?))
    }
}

fn print_json<T: Serialize>(value: &T) -> Result<(), AppError> {
    let text = serde_json::to_string_pretty(value).map_err(|e| AppError::internal(e.to_string()))?;
    println!("{text}");
    Ok(())
}

fn write_output(out: Option<&Path>, text: &str) -> Result<(), AppError> {
    match out {
        Some(path) => {
            let mut w = BufWriter::new(File::create(path).map_err(|e| io_error(path, e))?);
            w.write_all(text.as_bytes()).and_then(|_| w.flush()).map_err(|e| io_error(path, e))
        }
        None => {
            print!("{text}");
            Ok(())
        }
    }
}

pub fn load_config(cli: &Cli) -> Result<EngineConfig, AppError> {
    let mut config =
        EngineConfig::resolve(cli.config.as_deref()).map_err(|e| AppError::from(facihub_core::EngineError::from(e)))?;
    if let Some(dir) = &cli.data_dir {
        config.storage.data_dir = dir.clone();
    }
    Ok(config)
}

/// Executes one parsed command.
pub fn dispatch(cli: Cli) -> Result<(), AppError> {
    // Commands that do not touch engine state.
    match &cli.command {
        Command::Synth { records, learners, days, seed, start, out } => {
            let mut params = SynthParams {
                n_records: *records,
                n_learners: *learners,
                days: *days,
                seed: *seed,
                ..SynthParams::default()
            };
            if let Some(start) = start {
                params.start = *start;
            }
            return write_output(out.as_deref(), &to_ndjson(&synthetic_log(&params)));
        }
        Command::Kappa { file, coder_a, coder_b } => {
            let codes = parse_gold_codes(BufReader::new(open_input(file)?))
                .map_err(|e| AppError::bad_request(e.to_string()))?;
            let (per, pooled) =
                kappa_by_indicator(&codes, coder_a, coder_b).map_err(|e| AppError::bad_request(e.to_string()))?;
            let fmt = |k: &Kappa| k.value().map_or_else(|| "NA".to_string(), |v| format!("{v:.4}"));
            let mut text = String::from("indicator\tkappa\n");
            for (ind, k) in &per {
                text.push_str(&format!("{ind}\t{}\n", fmt(k)));
            }
            text.push_str(&format!("pooled\t{}\n", fmt(&pooled)));
            return write_output(None, &text);
        }
        _ => {}
    }

    let config = load_config(&cli)?;
    if let Command::Serve { bind } = cli.command {
        let rt = tokio::runtime::Runtime::new().map_err(|e| AppError::internal(e.to_string()))?;
        return rt.block_on(serve(config, bind));
    }
    let mut engine = Engine::open(config)?;
    match cli.command {
        Command::Ingest { file } => {
            let report = engine.ingest(BufReader::new(open_input(&file)?))?;
            print_json(&report)
        }
        Command::Run { as_of } => print_json(&engine.run(as_of)?),
        Command::Queue => print_json(&engine.queue().pending().collect::<Vec<_>>()),
        Command::Show { candidate_id } => {
            let view = engine
                .candidate(&candidate_id)
                .ok_or_else(|| AppError::not_found(format!("unknown candidate: {candidate_id}")))?;
            print_json(&view)
        }
        Command::Decide { candidate_id, payload, at } => {
            let mut raw = String::new();
            open_input(&payload)?.read_to_string(&mut raw).map_err(|e| io_error(&payload, e))?;
            let body: Value =
                serde_json::from_str(&raw).map_err(|e| AppError::bad_request(format!("payload is not JSON: {e}")))?;
            if engine.candidate(&candidate_id).is_none() {
                return Err(AppError::not_found(format!("unknown candidate: {candidate_id}")));
            }
            print_json(&engine.decide_json(&candidate_id, &body, at.unwrap_or_else(now))?)
        }
        Command::Regenerate { target_id, at } => print_json(&engine.regenerate(&target_id, at.unwrap_or_else(now))?),
        Command::Publish { since, at } => print_json(&engine.publish(since, at.unwrap_or_else(now))?),
        Command::Metrics { from, to, tsv } => {
            let m = engine.metrics(from, to);
            if tsv {
                let mut out = Vec::new();
                m.write_tsv(&mut out).map_err(|e| AppError::internal(e.to_string()))?;
                write_output(None, &String::from_utf8_lossy(&out))
            } else {
                print_json(&m)
            }
        }
        Command::Code => {
            let outcome = engine.code_pending()?;
            print_json(&json!({
                "coded_records": outcome.coded_records.len(),
                "units": outcome.units.len(),
                "rejections": outcome.rejections,
            }))
        }
        Command::ImportCodes { file, coder } => {
            let codes = parse_gold_codes(BufReader::new(open_input(&file)?))
                .map_err(|e| AppError::bad_request(e.to_string()))?;
            print_json(&engine.import_codes(&codes, coder.as_deref())?)
        }
        Command::Analyze(args) => {
            let kind = match (args.kind.goal, args.kind.permutation, args.kind.balance) {
                (Some(1), ..) => "goal1",
                (Some(_), ..) => "goal2",
                (None, true, _) => "permutation",
                (None, false, true) => "balance",
                _ => "means",
            };
            let (value, table) = analysis_output(&engine, kind)?;
            if args.json {
                let text = serde_json::to_string_pretty(&value).map_err(|e| AppError::internal(e.to_string()))?;
                write_output(args.out.as_deref(), &(text + "\n"))
            } else {
                write_output(args.out.as_deref(), &table)
            }
        }
        Command::Compact => {
            engine.compact()?;
            print_json(&json!({"events_compacted": true}))
        }
        Command::Synth { .. } | Command::Kappa { .. } | Command::Serve { .. } => unreachable!("handled above"),
    }
}
