//! The `trajmt` command line: `gen`, `run`, `report` and `calibrate`.
//!
//! Exit codes: 0 on success, 1 on usage, configuration or input errors, and
//! 2 when `run --fail-on-violation` finds a relation violation.

use std::ffi::OsString;
use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand};
use serde::Serialize;

use crate::analytics::{calibrate_thresholds, emit_report, summary, ReportFormat};
use crate::canonical;
use crate::config::CampaignConfig;
use crate::error::{Error, Result};
use crate::generator::generate_suite;
use crate::mt::{run_campaign, MRKind, Pattern, RowsFile, StrictnessLevel};
use crate::scene::{TaskKind, TestSuite};
use crate::sim::FaultProfile;

pub const EXIT_OK: i32 = 0;
pub const EXIT_ERROR: i32 = 1;
pub const EXIT_VIOLATION: i32 = 2;

#[derive(Debug, Parser)]
#[command(name = "trajmt", version, about = "Metamorphic testing of robot task controllers")]
struct Cli {
    /// Campaign configuration (JSON). Flags override its values.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Generate a suite of source test cases.
    Gen(GenArgs),
    /// Run a metamorphic campaign over a suite.
    Run(RunArgs),
    /// Emit CSV, JSON and SVG reports from a rows file.
    Report(ReportArgs),
    /// Derive strictness thresholds from consistency-relation distances.
    Calibrate(CalibrateArgs),
}

#[derive(Debug, Args)]
struct GenArgs {
    #[arg(long)]
    seed: Option<u64>,
    /// Comma-separated tasks, e.g. `pick_up,put_in`.
    #[arg(long, value_delimiter = ',')]
    tasks: Vec<String>,
    #[arg(long)]
    sources_per_task: Option<usize>,
    /// Suite file to write. Defaults to `<output_dir>/suite.json`.
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Debug, Args)]
struct RunArgs {
    /// Suite file. Defaults to the config's suite path.
    suite: Option<PathBuf>,
    #[arg(long)]
    seed: Option<u64>,
    /// Comma-separated relations, e.g. `MR1,MR4_Negation`.
    #[arg(long, value_delimiter = ',')]
    mrs: Vec<String>,
    /// Comma-separated strictness levels: high, medium, low.
    #[arg(long, value_delimiter = ',')]
    strictness: Vec<String>,
    /// Fault as `kind[:magnitude[:trigger_step]]`.
    #[arg(long)]
    fault: Option<String>,
    #[arg(long)]
    jobs: Option<usize>,
    /// Exit with status 2 if any relation is violated.
    #[arg(long)]
    fail_on_violation: bool,
    /// Rows file to write. Defaults to `<output_dir>/rows.json`.
    #[arg(long)]
    out: Option<PathBuf>,
    /// Directory for per-execution JSON-lines traces.
    #[arg(long)]
    trace_dir: Option<PathBuf>,
}

#[derive(Debug, Args)]
struct ReportArgs {
    rows: PathBuf,
    /// Comma-separated formats: csv, json, svg. Defaults to all three.
    #[arg(long, value_delimiter = ',')]
    format: Vec<String>,
    /// Output directory. Defaults to the rows file's directory.
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Debug, Args)]
struct CalibrateArgs {
    rows: PathBuf,
    /// Thresholds file to write. Defaults to `thresholds.json` beside the rows.
    #[arg(long)]
    out: Option<PathBuf>,
}

fn parse_all<T: std::str::FromStr<Err = Error>>(items: &[String]) -> Result<Vec<T>> {
    items.iter().map(|s| s.parse()).collect()
}

fn load_config(path: Option<&Path>) -> Result<CampaignConfig> {
    match path {
        Some(p) => CampaignConfig::load(p),
        None => Ok(CampaignConfig::default()),
    }
}

fn read(path: &Path) -> Result<String> {
    fs::read_to_string(path).map_err(|e| Error::invalid(format!("cannot read {}: {e}", path.display())))
}

fn write(path: &Path, text: &str) -> Result<()> {
    if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
        fs::create_dir_all(dir)?;
    }
    fs::write(path, text)?;
    Ok(())
}

fn sibling(path: &Path, name: &str) -> PathBuf {
    path.parent()
        .map(|d| d.join(name))
        .unwrap_or_else(|| PathBuf::from(name))
}

fn cmd_gen(mut config: CampaignConfig, args: GenArgs, out: &mut dyn Write) -> Result<i32> {
    if let Some(s) = args.seed {
        config.seed = s;
    }
    if !args.tasks.is_empty() {
        config.tasks = parse_all::<TaskKind>(&args.tasks)?.into_iter().collect();
    }
    if let Some(n) = args.sources_per_task {
        config.sources_per_task = n;
    }
    config.validate()?;
    let suite = generate_suite(config.seed, &config.tasks, config.sources_per_task)?;
    let path = args.out.unwrap_or_else(|| config.output_dir.join("suite.json"));
    write(&path, &suite.to_json()?)?;
    writeln!(out, "wrote {} test cases to {}", suite.cases.len(), path.display())?;
    Ok(EXIT_OK)
}

fn cmd_run(mut config: CampaignConfig, args: RunArgs, out: &mut dyn Write) -> Result<i32> {
    if let Some(s) = args.seed {
        config.seed = s;
    }
    if !args.mrs.is_empty() {
        config.mrs = parse_all::<MRKind>(&args.mrs)?.into_iter().collect();
    }
    if !args.strictness.is_empty() {
        config.strictness = parse_all::<StrictnessLevel>(&args.strictness)?.into_iter().collect();
    }
    if let Some(f) = &args.fault {
        config.fault = f.parse::<FaultProfile>()?;
    }
    if let Some(j) = args.jobs {
        config.jobs = j;
    }
    let mut settings = config.settings()?;
    settings.trace_dir = args.trace_dir;

    let suite_path = args.suite.unwrap_or_else(|| config.suite_path());
    let suite = TestSuite::from_json(&read(&suite_path)?)?;
    let result = run_campaign(&suite.cases, &settings)?;
    let violations = result.rows.iter().filter(|r| r.is_violation()).count();
    let file = RowsFile::new(config.seed, config.fault, result);
    let path = args.out.unwrap_or_else(|| config.output_dir.join("rows.json"));
    write(&path, &file.to_json()?)?;
    writeln!(
        out,
        "{} rows ({} violations), {} sources excluded; wrote {}",
        file.rows.len(),
        violations,
        file.excluded.len(),
        path.display()
    )?;
    Ok(if args.fail_on_violation && violations > 0 {
        EXIT_VIOLATION
    } else {
        EXIT_OK
    })
}

fn cmd_report(args: ReportArgs, out: &mut dyn Write) -> Result<i32> {
    let file = RowsFile::from_json(&read(&args.rows)?)?;
    let formats = if args.format.is_empty() {
        ReportFormat::ALL.to_vec()
    } else {
        parse_all::<ReportFormat>(&args.format)?
    };
    let dir = args.out.unwrap_or_else(|| sibling(&args.rows, ""));
    let written = emit_report(&file, &formats, &dir)?;

    let s = summary(&file);
    writeln!(
        out,
        "rows {}  evaluated {}  skipped {}  follow-ups {}  excluded sources {}",
        s.rows, s.evaluated_rows, s.skipped_rows, s.followups, s.excluded_sources
    )?;
    writeln!(
        out,
        "{:<8} {:>11} {:>7} {:>5} {:>6}",
        "level", "oracle_only", "mr_only", "both", "total"
    )?;
    for (level, v) in &s.venn {
        writeln!(
            out,
            "{:<8} {:>11} {:>7} {:>5} {:>6}",
            level.as_str(),
            v.oracle_only,
            v.mr_only,
            v.both,
            v.total()
        )?;
    }
    writeln!(
        out,
        "{:<20} {:<8} {:>6} {:>11}",
        "relation", "level", "rate", "violations"
    )?;
    for c in &s.rate_matrix.cells {
        writeln!(
            out,
            "{:<20} {:<8} {:>6.3} {:>11}",
            c.mr.as_str(),
            c.strictness.as_str(),
            c.rate,
            format!("{}/{}", c.violations, c.evaluated)
        )?;
    }
    for p in written {
        writeln!(out, "wrote {}", p.display())?;
    }
    Ok(EXIT_OK)
}

#[derive(Serialize)]
struct Thresholds {
    samples: usize,
    p20: f64,
    p50: f64,
    p80: f64,
}

fn cmd_calibrate(args: CalibrateArgs, out: &mut dyn Write) -> Result<i32> {
    let file = RowsFile::from_json(&read(&args.rows)?)?;
    // Each follow-up contributes one distance, whatever the strictness.
    let mut seen = std::collections::BTreeSet::new();
    let distances: Vec<f64> = file
        .rows
        .iter()
        .filter(|r| r.mr.pattern() == Pattern::TC && r.is_evaluated())
        .filter(|r| seen.insert(r.followup_id.clone()))
        .filter_map(|r| r.distance)
        .collect();
    let (p20, p50, p80) = calibrate_thresholds(&distances)?;
    let t = Thresholds {
        samples: distances.len(),
        p20,
        p50,
        p80,
    };
    let path = args.out.unwrap_or_else(|| sibling(&args.rows, "thresholds.json"));
    write(&path, &canonical::to_string(&t)?)?;
    writeln!(
        out,
        "p20 {}  p50 {}  p80 {}  ({} distances)",
        canonical::format_f64(p20)?,
        canonical::format_f64(p50)?,
        canonical::format_f64(p80)?,
        t.samples
    )?;
    writeln!(out, "wrote {}", path.display())?;
    Ok(EXIT_OK)
}

/// Runs the CLI on `args` (including the program name) and returns the
/// process exit code.
pub fn run<I, T>(args: I, out: &mut dyn Write, err: &mut dyn Write) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { EXIT_ERROR } else { EXIT_OK };
            let text = e.render().to_string();
            let _ = if e.use_stderr() {
                write!(err, "{text}")
            } else {
                write!(out, "{text}")
            };
            return code;
        }
    };
    let outcome = (|| match cli.command {
        Command::Gen(a) => cmd_gen(load_config(cli.config.as_deref())?, a, out),
        Command::Run(a) => cmd_run(load_config(cli.config.as_deref())?, a, out),
        Command::Report(a) => cmd_report(a, out),
        Command::Calibrate(a) => cmd_calibrate(a, out),
    })();
    match outcome {
        Ok(code) => code,
        Err(e) => {
            let _ = writeln!(err, "error: {e}");
            EXIT_ERROR
        }
    }
}
