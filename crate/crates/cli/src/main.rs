use std::io::Write;
use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, ValueEnum};
use vbftrl::barrier::HyperParams;
use vbftrl::harness::{emit_report, run_game, to_json, write_csv, Market, Preset, ReportFormat};
use vbftrl::markets::{
    gen_iid_lognormal, gen_two_asset_switch, load_csv, CsvMode, WorstCoordinate,
};
use vbftrl::strategies::{StrategyConfig, StrategyKind};
use vbftrl::Error;

#[derive(Debug, Clone, Copy, ValueEnum)]
enum Algo {
    Vbftrl,
    VbftrlQn,
    Lbftrl,
    Cover,
    Eg,
    Ons,
}

impl From<Algo> for StrategyKind {
    fn from(a: Algo) -> Self {
        match a {
            Algo::Vbftrl => StrategyKind::Vbftrl,
            Algo::VbftrlQn => StrategyKind::VbftrlQn,
            Algo::Lbftrl => StrategyKind::Lbftrl,
            Algo::Cover => StrategyKind::CoverQuad,
            Algo::Eg => StrategyKind::Eg,
            Algo::Ons => StrategyKind::Ons,
        }
    }
}

#[derive(Debug, Clone, Copy, ValueEnum)]
enum PresetArg {
    Thm2,
    Thm3,
}

#[derive(Debug, Clone, Copy, ValueEnum)]
enum FormatArg {
    Csv,
    Json,
}

#[derive(Debug, Clone)]
enum MarketArg {
    Iid,
    Switch,
    Adversary,
    Csv(PathBuf),
}

fn parse_market(s: &str) -> Result<MarketArg, String> {
    match s {
        "iid" => Ok(MarketArg::Iid),
        "switch" => Ok(MarketArg::Switch),
        "adversary" => Ok(MarketArg::Adversary),
        _ => match s.strip_prefix("csv:") {
            Some(p) if !p.is_empty() => Ok(MarketArg::Csv(PathBuf::from(p))),
            _ => Err("expected iid, switch, adversary or csv:PATH".into()),
        },
    }
}

/// Play an online portfolio game and report per-round regret.
#[derive(Debug, Parser)]
#[command(name = "vbftrl", version)]
struct Args {
    #[arg(long, value_enum, default_value = "vbftrl")]
    algo: Algo,
    /// Number of assets (taken from the file for csv markets).
    #[arg(long, default_value_t = 3)]
    d: usize,
    /// Number of rounds (csv markets use every row).
    #[arg(long = "T", default_value_t = 1000)]
    horizon: usize,
    #[arg(long)]
    lambda: Option<f64>,
    #[arg(long)]
    mu: Option<f64>,
    /// Newton steps per round for vbftrl-qn.
    #[arg(long)]
    steps: Option<usize>,
    #[arg(long, value_enum)]
    preset: Option<PresetArg>,
    /// iid, switch, adversary or csv:PATH.
    #[arg(long, value_parser = parse_market, default_value = "iid")]
    market: MarketArg,
    /// Read the csv market as prices instead of returns.
    #[arg(long)]
    prices: bool,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Log-volatility of the iid market.
    #[arg(long, default_value_t = 0.1)]
    vol: f64,
    /// Record the per-round invariant audit.
    #[arg(long)]
    audit: bool,
    /// Write the report here instead of stdout.
    #[arg(long)]
    out: Option<PathBuf>,
    #[arg(long, value_enum, default_value = "csv")]
    format: FormatArg,
}

fn config(args: &Args, d: usize, horizon: usize) -> StrategyConfig {
    let kind = StrategyKind::from(args.algo);
    let preset = args.preset.map(|p| match p {
        PresetArg::Thm2 => Preset::Thm2,
        PresetArg::Thm3 => Preset::Thm3,
    });
    let mut params = match (preset, kind) {
        (Some(p), _) => p.params(horizon, d),
        (None, StrategyKind::VbftrlQn) => HyperParams::quasi_newton_preset(horizon, d),
        (None, StrategyKind::CoverQuad) => HyperParams::new(0.0, 1.0),
        (None, _) => HyperParams::exact_preset(),
    };
    if let Some(l) = args.lambda {
        params.lambda = l;
    }
    if let Some(m) = args.mu {
        params.mu = m;
    }
    if let Some(s) = args.steps {
        params.steps = s;
    }
    StrategyConfig::new(kind, params)
}

fn run(args: &Args) -> vbftrl::Result<()> {
    let report = match &args.market {
        MarketArg::Adversary => {
            let mut adv = WorstCoordinate { d: args.d };
            let cfg = config(args, args.d, args.horizon);
            run_game(
                &cfg,
                Market::Adaptive {
                    adversary: &mut adv,
                    horizon: args.horizon,
                },
                args.audit,
            )?
        }
        other => {
            let m = match other {
                MarketArg::Iid => gen_iid_lognormal(args.d, args.horizon, args.vol, args.seed)?,
                MarketArg::Switch => gen_two_asset_switch(args.horizon)?,
                MarketArg::Csv(path) => {
                    let mode = if args.prices {
                        CsvMode::Prices
                    } else {
                        CsvMode::Returns
                    };
                    load_csv(path, mode, None)?
                }
                MarketArg::Adversary => unreachable!(),
            };
            let cfg = config(args, m.d(), m.len());
            run_game(&cfg, Market::Oblivious(&m), args.audit)?
        }
    };
    let format = match args.format {
        FormatArg::Csv => ReportFormat::Csv,
        FormatArg::Json => ReportFormat::Json,
    };
    match &args.out {
        Some(path) => emit_report(&report, path, format),
        None => {
            let stdout = std::io::stdout().lock();
            match format {
                ReportFormat::Csv => write_csv(&report, stdout),
                ReportFormat::Json => {
                    let mut stdout = stdout;
                    writeln!(stdout, "{}", to_json(&report)?)?;
                    Ok(())
                }
            }
        }
    }
}

fn exit_code(e: &Error) -> u8 {
    if e.is_input_error() {
        2
    } else {
        3
    }
}

fn main() -> ExitCode {
    let args = match Args::try_parse() {
        Ok(a) => a,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() {
                ExitCode::from(2)
            } else {
                ExitCode::SUCCESS
            };
        }
    };
    match run(&args) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(exit_code(&e))
        }
    }
}
