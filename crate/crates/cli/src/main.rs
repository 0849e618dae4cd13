mod checks;
mod config;

use std::fs;
use std::io::Write;
use std::path::PathBuf;
use std::process::ExitCode;
use std::time::{SystemTime, UNIX_EPOCH};

use clap::{Args, Parser, Subcommand};
use serde::Serialize;
use serde_json::json;

use checks::{Check, Outcome, Unsupported};
use config::{parse_format, read_config_file, Format, Overrides, RunConfig};

#[derive(Parser)]
#[command(name = "holonomy-lab", version, about = "Finite Möbius groups, holonomy Lie algebras, flatness and monodromy checks")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Group order, exceptional points and the stabilizer partition.
    Group(Flags),
    /// Graded dimensions of the holonomy Lie algebra.
    Dims(Flags),
    /// Exact flatness of the connection form.
    Flatness(Flags),
    /// Partial-fraction identities behind flatness.
    Lemma(Flags),
    /// Numeric monodromy of the generator loops.
    Monodromy(Flags),
    /// Equivalence of the two presentations.
    Equiv(Flags),
    /// Every check above.
    All(Flags),
}

#[derive(Args, Clone)]
struct Flags {
    /// Plain-text `key = value` file supplying defaults.
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long, value_parser = ["cyclic", "dihedral", "tetrahedral", "octahedral", "icosahedral"])]
    kind: Option<String>,
    /// Order parameter for cyclic and dihedral groups.
    #[arg(long = "N")]
    big_n: Option<u32>,
    /// Number of points.
    #[arg(long = "n")]
    n: Option<usize>,
    /// Maximal degree (at most 4).
    #[arg(long = "D")]
    degree: Option<usize>,
    #[arg(long)]
    samples: Option<usize>,
    #[arg(long)]
    steps: Option<usize>,
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long)]
    out: Option<PathBuf>,
    #[arg(long, value_parser = ["json", "csv"])]
    format: Option<String>,
}

impl Flags {
    fn overrides(&self) -> Result<Overrides, config::ConfigError> {
        Ok(Overrides {
            kind: self.kind.clone(),
            big_n: self.big_n,
            n: self.n,
            degree: self.degree,
            samples: self.samples,
            steps: self.steps,
            seed: self.seed,
            out: self.out.clone(),
            format: self.format.as_deref().map(parse_format).transpose()?,
        })
    }
}

#[derive(Serialize)]
struct Report<'a> {
    command: &'a str,
    config: &'a RunConfig,
    checks: Vec<Check>,
    timing: serde_json::Value,
}

fn fail_config(msg: impl std::fmt::Display) -> ExitCode {
    eprintln!("config error: {msg}");
    ExitCode::from(2)
}

fn set_threads() -> Result<(), String> {
    let Ok(value) = std::env::var("HOLONOMY_LAB_THREADS") else {
        return Ok(());
    };
    let threads: usize = value
        .trim()
        .parse()
        .ok()
        .filter(|&t| t > 0)
        .ok_or_else(|| format!("HOLONOMY_LAB_THREADS must be a positive integer, got `{value}`"))?;
    rayon::ThreadPoolBuilder::new()
        .num_threads(threads)
        .build_global()
        .map_err(|e| e.to_string())
}

fn write_output(cfg: &RunConfig, text: &str) -> std::io::Result<()> {
    match &cfg.out {
        Some(path) => fs::write(path, text),
        None => std::io::stdout().write_all(text.as_bytes()),
    }
}

fn csv_text(header: &[String], rows: &[Vec<String>]) -> String {
    let mut w = csv::Writer::from_writer(Vec::new());
    w.write_record(header).expect("in-memory write");
    for r in rows {
        w.write_record(r).expect("in-memory write");
    }
    String::from_utf8(w.into_inner().expect("flush")).expect("utf-8")
}

type Runner = fn(&RunConfig) -> Result<Outcome, Unsupported>;

fn main() -> ExitCode {
    let cli = Cli::parse();
    let (name, flags) = match &cli.command {
        Command::Group(f) => ("group", f),
        Command::Dims(f) => ("dims", f),
        Command::Flatness(f) => ("flatness", f),
        Command::Lemma(f) => ("lemma", f),
        Command::Monodromy(f) => ("monodromy", f),
        Command::Equiv(f) => ("equiv", f),
        Command::All(f) => ("all", f),
    };
    if let Err(e) = set_threads() {
        return fail_config(e);
    }
    let base = match &flags.config {
        Some(path) => match read_config_file(path) {
            Ok(o) => o,
            Err(e) => return fail_config(e),
        },
        None => Overrides::default(),
    };
    let cfg = match flags.overrides().and_then(|o| RunConfig::resolve(base.merge(o))) {
        Ok(c) => c,
        Err(e) => return fail_config(e),
    };
    if cfg.format == Format::Csv && !matches!(name, "dims" | "flatness") {
        return fail_config("CSV output is only available for `dims` and `flatness`");
    }

    let runners: Vec<(&str, Runner)> = match name {
        "group" => vec![("group", checks::run_group)],
        "dims" => vec![("dims", checks::run_dims)],
        "flatness" => vec![("flatness", checks::run_flatness)],
        "lemma" => vec![("lemma", checks::run_lemma)],
        "monodromy" => vec![("monodromy", checks::run_monodromy)],
        "equiv" => vec![("equiv", checks::run_equiv)],
        _ => vec![
            ("group", checks::run_group),
            ("dims", checks::run_dims),
            ("flatness", checks::run_flatness),
            ("lemma", checks::run_lemma),
            ("monodromy", checks::run_monodromy),
            ("equiv", checks::run_equiv),
        ],
    };

    let mut all_checks = Vec::new();
    let mut elapsed = serde_json::Map::new();
    let mut csv = None;
    for (label, run) in runners {
        match run(&cfg) {
            Ok(outcome) => {
                elapsed.insert(label.to_string(), json!(outcome.elapsed_ms));
                if csv.is_none() && !outcome.csv_header.is_empty() {
                    csv = Some(csv_text(&outcome.csv_header, &outcome.csv));
                }
                all_checks.extend(outcome.checks);
            }
            Err(e) => return fail_config(e),
        }
    }
    let ok = all_checks.iter().all(|c| c.passed());
    let timestamp = SystemTime::now().duration_since(UNIX_EPOCH).map(|d| d.as_secs()).unwrap_or(0);
    let report = Report {
        command: name,
        config: &cfg,
        checks: all_checks,
        timing: json!({"timestamp": timestamp, "elapsed_ms": elapsed}),
    };
    for c in report.checks.iter().filter(|c| !c.passed()) {
        eprintln!("FAIL {}", c.name);
    }
    let text = match cfg.format {
        Format::Json => serde_json::to_string_pretty(&report).expect("serializable") + "\n",
        Format::Csv => csv.unwrap_or_default(),
    };
    if let Err(e) = write_output(&cfg, &text) {
        eprintln!("cannot write report: {e}");
        return ExitCode::from(2);
    }
    if ok {
        ExitCode::SUCCESS
    } else {
        ExitCode::from(1)
    }
}
