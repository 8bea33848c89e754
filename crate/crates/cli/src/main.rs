use std::io::Write;
use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};
use deltakit_core::sim::{builtin_settings, run_setting, SimulationSetting, Target};
use deltakit_core::{
    asymptotic_variances, build_report, load_setting, load_table, population_truths, AnalysisError, Family,
    GoldStandard, InputError, ReportOptions, SimError, SimulationSummary,
};

/// Agreement between two raters under the delta model.
#[derive(Parser)]
#[command(name = "deltakit", version, about)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Fit a K x K table of counts (CSV or JSON) and report all estimates.
    Fit(FitArgs),
    /// Run the Monte Carlo study for built-in or user-supplied settings.
    Simulate(SimulateArgs),
    /// List the built-in simulation settings with their true values.
    Presets(PresetsArgs),
}

#[derive(Args)]
struct FitArgs {
    /// Table file: K lines of K counts, or {"cells": [[...], ...]}.
    table: PathBuf,
    /// Use the two-category pathway (automatic for 2x2 input).
    #[arg(long)]
    two_by_two: bool,
    /// Treat one rater as the gold standard.
    #[arg(long, value_name = "RATER")]
    gold_standard: Option<GoldStandard>,
    /// Estimator families to report.
    #[arg(long, value_delimiter = ',', default_value = "classic,u")]
    families: Vec<Family>,
    #[arg(long, value_enum, default_value_t = FitFormat::Text)]
    format: FitFormat,
}

#[derive(Clone, Copy, ValueEnum)]
enum FitFormat {
    Json,
    Text,
}

#[derive(Args)]
struct SimulateArgs {
    /// Built-in setting id (1..=48).
    #[arg(long, conflicts_with_all = ["setting_file", "all"], required_unless_present_any = ["setting_file", "all"])]
    setting: Option<usize>,
    /// JSON file with n, alpha, pi1 and pi2.
    #[arg(long, value_name = "PATH", conflicts_with = "all")]
    setting_file: Option<PathBuf>,
    /// Run every built-in setting.
    #[arg(long)]
    all: bool,
    #[arg(long, default_value_t = 10_000)]
    replicates: usize,
    #[arg(long, env = "DELTAKIT_SEED", default_value_t = 1)]
    seed: u64,
    /// Parameters to summarise: delta, alphaI or sI (1-based category).
    #[arg(long, value_delimiter = ',', default_value = "delta,alpha3,s3")]
    target: Vec<Target>,
    #[arg(long, value_enum, default_value_t = TableFormat::Text)]
    format: TableFormat,
}

#[derive(Args)]
struct PresetsArgs {
    #[arg(long, value_enum, default_value_t = TableFormat::Text)]
    format: TableFormat,
}

#[derive(Clone, Copy, ValueEnum)]
enum TableFormat {
    Text,
    Csv,
    Json,
}

const ROW_DECIMALS: usize = 4;

enum Failure {
    Input(InputError),
    Analysis(AnalysisError),
    Simulation(SimError),
    Output(String),
}

impl Failure {
    fn code(&self) -> u8 {
        match self {
            Failure::Input(_) => 3,
            Failure::Analysis(AnalysisError::NotTwoByTwo(_)) => 2,
            Failure::Analysis(AnalysisError::Fit(_)) => 4,
            Failure::Analysis(AnalysisError::Estimator(_)) => 5,
            Failure::Simulation(_) => 6,
            Failure::Output(_) => 1,
        }
    }

    fn message(&self) -> String {
        match self {
            Failure::Input(e) => format!("input: {e}"),
            Failure::Analysis(e) => e.to_string(),
            Failure::Simulation(e) => format!("simulation: {e}"),
            Failure::Output(e) => format!("output: {e}"),
        }
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = match cli.command {
        Command::Fit(args) => fit(args),
        Command::Simulate(args) => simulate(args),
        Command::Presets(args) => presets(args),
    };
    match result {
        Ok(out) => {
            let mut stdout = std::io::stdout().lock();
            if stdout.write_all(out.as_bytes()).is_err() {
                return ExitCode::from(1);
            }
            ExitCode::SUCCESS
        }
        Err(f) => {
            eprintln!("deltakit: {}", f.message());
            ExitCode::from(f.code())
        }
    }
}

fn fit(args: FitArgs) -> Result<String, Failure> {
    let table = load_table(&args.table).map_err(Failure::Input)?;
    let options = ReportOptions { two_by_two: args.two_by_two, gold_standard: args.gold_standard, families: args.families };
    let report = build_report(&table, &options).map_err(Failure::Analysis)?;
    Ok(match args.format {
        FitFormat::Text => report.to_text(),
        FitFormat::Json => {
            let mut s = serde_json::to_string_pretty(&report).map_err(|e| Failure::Output(e.to_string()))?;
            s.push('\n');
            s
        }
    })
}

fn simulate(args: SimulateArgs) -> Result<String, Failure> {
    let settings: Vec<SimulationSetting> = if args.all {
        builtin_settings()
    } else if let Some(path) = &args.setting_file {
        vec![load_setting(path).map_err(Failure::Input)?]
    } else {
        let id = args.setting.expect("clap requires a setting source");
        vec![deltakit_core::sim::builtin_setting(id).map_err(Failure::Simulation)?]
    };
    let mut by_target: Vec<Vec<SimulationSummary>> = vec![Vec::new(); args.target.len()];
    for setting in &settings {
        let summaries = run_setting(setting, args.replicates, args.seed, &args.target).map_err(Failure::Simulation)?;
        for (slot, s) in by_target.iter_mut().zip(summaries) {
            slot.push(s);
        }
    }
    match args.format {
        TableFormat::Json => {
            let all: Vec<&SimulationSummary> = by_target.iter().flatten().collect();
            let mut s = serde_json::to_string_pretty(&all).map_err(|e| Failure::Output(e.to_string()))?;
            s.push('\n');
            Ok(s)
        }
        format => {
            let mut out = String::new();
            for (i, (target, rows)) in args.target.iter().zip(&by_target).enumerate() {
                if i > 0 {
                    out.push('\n');
                }
                let body: Vec<Vec<String>> = rows.iter().map(|s| s.row(ROW_DECIMALS)).collect();
                out.push_str(&render(format, &target.headers(), &body)?);
            }
            Ok(out)
        }
    }
}

fn presets(args: PresetsArgs) -> Result<String, Failure> {
    let headers: Vec<String> =
        ["id", "label", "K", "n", "delta", "s3", "va_delta", "va_alpha3", "va_s3"].map(String::from).to_vec();
    let mut rows = Vec::new();
    let mut records = Vec::new();
    for s in builtin_settings() {
        let truths = population_truths(&s.params);
        let va = asymptotic_variances(&s.params, f64::from(s.n)).map_err(|e| Failure::Simulation(e.into()))?;
        let d = ROW_DECIMALS;
        rows.push(vec![
            s.id.to_string(),
            s.label.clone(),
            s.k().to_string(),
            s.n.to_string(),
            format!("{:.d$}", truths.delta),
            truths.consistency[2].display(d),
            va.delta.display(d),
            va.alpha[2].display(d),
            va.consistency[2].display(d),
        ]);
        records.push(serde_json::json!({
            "setting": s,
            "delta": truths.delta,
            "s3": truths.consistency[2],
            "va_delta": va.delta,
            "va_alpha3": va.alpha[2],
            "va_s3": va.consistency[2],
        }));
    }
    match args.format {
        TableFormat::Json => {
            let mut s = serde_json::to_string_pretty(&records).map_err(|e| Failure::Output(e.to_string()))?;
            s.push('\n');
            Ok(s)
        }
        format => render(format, &headers, &rows),
    }
}

fn render(format: TableFormat, headers: &[String], rows: &[Vec<String>]) -> Result<String, Failure> {
    match format {
        TableFormat::Csv => {
            let mut w = csv::Writer::from_writer(Vec::new());
            let out = std::iter::once(headers).chain(rows.iter().map(Vec::as_slice));
            for record in out {
                w.write_record(record).map_err(|e| Failure::Output(e.to_string()))?;
            }
            let bytes = w.into_inner().map_err(|e| Failure::Output(e.to_string()))?;
            String::from_utf8(bytes).map_err(|e| Failure::Output(e.to_string()))
        }
        _ => {
            let widths: Vec<usize> = (0..headers.len())
                .map(|c| rows.iter().map(|r| r[c].len()).chain([headers[c].len()]).max().unwrap_or(0))
                .collect();
            let line = |cells: &[String]| {
                let mut s: String =
                    cells.iter().zip(&widths).map(|(c, w)| format!("{c:>w$}  ")).collect::<String>().trim_end().to_string();
                s.push('\n');
                s
            };
            let mut out = line(headers);
            for r in rows {
                out.push_str(&line(r));
            }
            Ok(out)
        }
    }
}
