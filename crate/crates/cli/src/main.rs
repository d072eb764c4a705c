//! `copsym` — copula central symmetry testing from the command line.
//!
//! Subcommands: `test` (one panel, one test), `by-year` (yearly windows
//! with FDR control), `power` (Monte Carlo rejection-rate study), `diag`
//! (pairwise exceedance table), `pseudo` (pseudo-observation dump).
//!
//! Exit codes: 0 success, 1 input error, 2 configuration error.

use std::fs::File;
use std::io::{BufReader, Write};
use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};

use copsym::dgp::{power_study, PowerGrid, PowerStudyConfig};
use copsym::multiple_testing::{yearly_procedure, YearlyConfig};
use copsym::panel::{parse_panel, PanelFormat, ReturnPanel};
use copsym::report;
use copsym::symmetry_test::{run_test, BlockLength, BootstrapConfig};

#[derive(Parser)]
#[command(name = "copsym", version, about = "Copula central symmetry testing for return panels")]
struct Cli {
    /// Cap the worker thread count (results do not depend on it).
    #[arg(long, global = true)]
    threads: Option<usize>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Test one panel for copula central symmetry.
    Test(TestArgs),
    /// Run the test per calendar year with FDR-controlled decisions.
    ByYear(ByYearArgs),
    /// Monte Carlo rejection-rate study on the factor copula DGP.
    Power(PowerArgs),
    /// Pairwise exceedance moments/correlations at given levels.
    Diag(DiagArgs),
    /// Dump normalized-rank pseudo-observations (debug).
    Pseudo(PseudoArgs),
}

#[derive(Clone, Copy, ValueEnum)]
enum FormatArg {
    Csv,
    French,
}

impl From<FormatArg> for PanelFormat {
    fn from(f: FormatArg) -> Self {
        match f {
            FormatArg::Csv => PanelFormat::GenericCsv,
            FormatArg::French => PanelFormat::FrenchLib,
        }
    }
}

#[derive(Clone, Copy, ValueEnum)]
enum OutputFormat {
    Json,
    Csv,
}

#[derive(Args)]
struct InputArgs {
    /// Input panel file.
    #[arg(long)]
    input: PathBuf,
    /// Input layout.
    #[arg(long, value_enum, default_value = "csv")]
    format: FormatArg,
}

#[derive(Args)]
struct TestArgs {
    #[command(flatten)]
    input: InputArgs,
    /// Bootstrap replicates M.
    #[arg(long, default_value_t = 250)]
    m: usize,
    /// Block length: "auto" or a positive integer.
    #[arg(long, default_value = "auto")]
    block_length: String,
    #[arg(long, default_value_t = 42)]
    seed: u64,
    /// Use the (1 + count) / (M + 1) p-value.
    #[arg(long)]
    add_one: bool,
    #[arg(long)]
    output: Option<PathBuf>,
    #[arg(long, value_enum, default_value = "json")]
    output_format: OutputFormat,
}

#[derive(Args)]
struct ByYearArgs {
    #[command(flatten)]
    input: InputArgs,
    #[arg(long, default_value_t = 250)]
    m: usize,
    #[arg(long, default_value = "auto")]
    block_length: String,
    #[arg(long, default_value_t = 42)]
    seed: u64,
    #[arg(long)]
    add_one: bool,
    /// Nominal FDR levels, comma separated.
    #[arg(long, default_value = "0.01,0.05,0.10")]
    levels: String,
    /// Minimum observations for a year to be tested.
    #[arg(long, default_value_t = 50)]
    min_obs: usize,
    #[arg(long)]
    output: Option<PathBuf>,
    #[arg(long, value_enum, default_value = "csv")]
    output_format: OutputFormat,
}

#[derive(Args)]
struct PowerArgs {
    /// Gammas: comma list or start:step:end range, e.g. "-0.8:0.1:0".
    #[arg(long, allow_hyphen_values = true, default_value = "-0.8:0.1:0")]
    gammas: String,
    /// Sample sizes, comma separated.
    #[arg(long, default_value = "50,100,250,500")]
    t: String,
    /// Panel widths, comma separated.
    #[arg(long, default_value = "2,6,10,25")]
    n: String,
    /// Monte Carlo replicates per cell.
    #[arg(long, default_value_t = 1000)]
    mc: usize,
    #[arg(long, default_value_t = 250)]
    m: usize,
    #[arg(long, default_value = "auto")]
    block_length: String,
    #[arg(long, default_value_t = 42)]
    seed: u64,
    /// Factor degrees of freedom.
    #[arg(long, default_value_t = 6.0)]
    nu: f64,
    /// Factor AR(1) coefficient.
    #[arg(long, default_value_t = 0.5)]
    phi: f64,
    #[arg(long)]
    output: Option<PathBuf>,
    #[arg(long, value_enum, default_value = "csv")]
    output_format: OutputFormat,
}

#[derive(Args)]
struct DiagArgs {
    #[command(flatten)]
    input: InputArgs,
    /// Exceedance levels (standardized units), comma separated.
    #[arg(long, default_value = "0.0,0.5,1.0,1.5")]
    levels: String,
    #[arg(long)]
    output: Option<PathBuf>,
}

#[derive(Args)]
struct PseudoArgs {
    #[command(flatten)]
    input: InputArgs,
    #[arg(long)]
    output: Option<PathBuf>,
}

enum CliError {
    Input(String),
    Config(String),
}

impl CliError {
    fn exit_code(&self) -> ExitCode {
        match self {
            CliError::Input(_) => ExitCode::from(1),
            CliError::Config(_) => ExitCode::from(2),
        }
    }

    fn message(&self) -> &str {
        match self {
            CliError::Input(m) | CliError::Config(m) => m,
        }
    }
}

fn input_err(e: impl std::fmt::Display) -> CliError {
    CliError::Input(e.to_string())
}

fn config_err(e: impl std::fmt::Display) -> CliError {
    CliError::Config(e.to_string())
}

fn parse_block_length(s: &str) -> Result<BlockLength, CliError> {
    if s.eq_ignore_ascii_case("auto") {
        return Ok(BlockLength::Auto);
    }
    s.parse::<usize>()
        .map(BlockLength::Fixed)
        .map_err(|_| config_err(format!("block length must be \"auto\" or an integer, got {s:?}")))
}

fn parse_f64_list(s: &str, what: &str) -> Result<Vec<f64>, CliError> {
    s.split(',')
        .map(|tok| {
            tok.trim()
                .parse::<f64>()
                .map_err(|_| config_err(format!("invalid {what} entry {tok:?}")))
        })
        .collect()
}

fn parse_usize_list(s: &str, what: &str) -> Result<Vec<usize>, CliError> {
    s.split(',')
        .map(|tok| {
            tok.trim()
                .parse::<usize>()
                .map_err(|_| config_err(format!("invalid {what} entry {tok:?}")))
        })
        .collect()
}

/// "a:step:b" inclusive range or plain comma list.
fn parse_gammas(s: &str) -> Result<Vec<f64>, CliError> {
    let parts: Vec<&str> = s.split(':').collect();
    if parts.len() == 3 {
        let start: f64 = parts[0].trim().parse().map_err(|_| config_err("bad gamma range start"))?;
        let step: f64 = parts[1].trim().parse().map_err(|_| config_err("bad gamma range step"))?;
        let end: f64 = parts[2].trim().parse().map_err(|_| config_err("bad gamma range end"))?;
        if step <= 0.0 || end < start {
            return Err(config_err("gamma range must satisfy start <= end with positive step"));
        }
        let mut out = Vec::new();
        let mut k = 0u32;
        loop {
            let g = start + f64::from(k) * step;
            if g > end + 1e-9 {
                break;
            }
            out.push((g * 1e9).round() / 1e9);
            k += 1;
        }
        return Ok(out);
    }
    parse_f64_list(s, "gamma")
}

fn load_panel(args: &InputArgs) -> Result<ReturnPanel, CliError> {
    let file = File::open(&args.input)
        .map_err(|e| input_err(format!("{}: {e}", args.input.display())))?;
    parse_panel(BufReader::new(file), args.format.into()).map_err(input_err)
}

fn emit(output: Option<&PathBuf>, content: &str) -> Result<(), CliError> {
    match output {
        Some(path) => {
            let mut f = File::create(path)
                .map_err(|e| input_err(format!("{}: {e}", path.display())))?;
            f.write_all(content.as_bytes())
                .map_err(|e| input_err(format!("{}: {e}", path.display())))?;
        }
        None => print!("{content}"),
    }
    Ok(())
}

fn cmd_test(args: &TestArgs) -> Result<(), CliError> {
    let panel = load_panel(&args.input)?;
    let config = BootstrapConfig {
        replicates: args.m,
        block_length: parse_block_length(&args.block_length)?,
        seed: args.seed,
        add_one_pvalue: args.add_one,
        ..Default::default()
    };
    let mut result = run_test(panel.values(), &config).map_err(config_err)?;
    result.dropped_rows = panel.dropped_rows();
    let rendered = match args.output_format {
        OutputFormat::Json => report::test_result_json(&result) + "\n",
        OutputFormat::Csv => report::test_result_csv(&result),
    };
    emit(args.output.as_ref(), &rendered)
}

fn cmd_by_year(args: &ByYearArgs) -> Result<(), CliError> {
    let panel = load_panel(&args.input)?;
    let config = YearlyConfig {
        test: BootstrapConfig {
            replicates: args.m,
            block_length: parse_block_length(&args.block_length)?,
            seed: args.seed,
            add_one_pvalue: args.add_one,
            ..Default::default()
        },
        levels: parse_f64_list(&args.levels, "level")?,
        min_obs: args.min_obs,
    };
    let levels_ok = config.levels.iter().all(|q| *q > 0.0 && *q < 1.0);
    if config.levels.is_empty() || !levels_ok {
        return Err(config_err("levels must lie strictly between 0 and 1"));
    }
    let report_data = yearly_procedure(&panel, &config).map_err(config_err)?;
    let rendered = match args.output_format {
        OutputFormat::Json => report::yearly_report_json(&report_data) + "\n",
        OutputFormat::Csv => report::yearly_report_csv(&report_data),
    };
    emit(args.output.as_ref(), &rendered)
}

fn cmd_power(args: &PowerArgs) -> Result<(), CliError> {
    let grid = PowerGrid {
        gammas: parse_gammas(&args.gammas)?,
        t_values: parse_usize_list(&args.t, "T")?,
        n_values: parse_usize_list(&args.n, "N")?,
    };
    let config = PowerStudyConfig {
        mc_reps: args.mc,
        replicates: args.m,
        block_length: parse_block_length(&args.block_length)?,
        seed: args.seed,
        nu: args.nu,
        phi: args.phi,
        ..Default::default()
    };
    let cells = power_study(&grid, &config).map_err(config_err)?;
    let rendered = match args.output_format {
        OutputFormat::Json => report::power_table_json(&cells, &config) + "\n",
        OutputFormat::Csv => report::power_table_csv(&cells, &config),
    };
    emit(args.output.as_ref(), &rendered)
}

fn cmd_diag(args: &DiagArgs) -> Result<(), CliError> {
    let panel = load_panel(&args.input)?;
    let levels = parse_f64_list(&args.levels, "exceedance level")?;
    if levels.is_empty() {
        return Err(config_err("need at least one exceedance level"));
    }
    let mut out = format!(
        "# copsym diag input={} levels={}\n",
        args.input.input.display(),
        args.levels
    );
    out.push_str(&report::exceedance_table_csv(&panel, &levels).map_err(config_err)?);
    emit(args.output.as_ref(), &out)
}

fn cmd_pseudo(args: &PseudoArgs) -> Result<(), CliError> {
    let panel = load_panel(&args.input)?;
    let out = report::pseudo_csv(&panel).map_err(config_err)?;
    emit(args.output.as_ref(), &out)
}

fn run(cli: &Cli) -> Result<(), CliError> {
    if let Some(k) = cli.threads {
        if k == 0 {
            return Err(config_err("--threads must be positive"));
        }
        // ignore the error if a global pool already exists
        let _ = rayon::ThreadPoolBuilder::new().num_threads(k).build_global();
    }
    match &cli.command {
        Command::Test(args) => cmd_test(args),
        Command::ByYear(args) => cmd_by_year(args),
        Command::Power(args) => cmd_power(args),
        Command::Diag(args) => cmd_diag(args),
        Command::Pseudo(args) => cmd_pseudo(args),
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(&cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {}", e.message());
            e.exit_code()
        }
    }
}
