//! Batch front-end: reads a run configuration, runs the requested step and
//! writes CSV artifacts. Nothing is written unless the whole step succeeds.

pub mod config;
pub mod error;
pub mod pipeline;

use std::ffi::OsString;
use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use clap::{Parser, Subcommand};

use hpp_core::backtest::{HISTOGRAM_HEADER, HOURS_HEADER};
use hpp_core::curves::{delivery_curves, write_curve_dump, SignRule};
use hpp_core::market_data::write_csv;
use hpp_core::training::RiskConfig;

use config::{check_fraction, RunConfig, Settings};
use error::CliError;
use pipeline::{Evaluated, Inputs, Trained};

#[derive(Debug, Parser)]
#[command(name = "hppbid", about = "Day-ahead bidding for a wind farm with an electrolyzer")]
pub struct Cli {
    /// Run configuration (TOML).
    #[arg(long, global = true)]
    pub config: Option<PathBuf>,
    /// Output directory, overriding `paths.out`.
    #[arg(long, global = true)]
    pub out: Option<PathBuf>,
    /// Seed of the synthetic generator, overriding `seed`.
    #[arg(long, global = true)]
    pub seed: Option<u64>,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Write the dataset (generated or loaded) as CSV.
    GenerateData,
    /// Train the configured variants and write their policies.
    Train(RunArgs),
    /// Train, back-test on the test days and compare with hindsight.
    Backtest(RunArgs),
    /// Perfect-foresight benchmark on the test days.
    Hindsight(RunArgs),
    /// Repeat train, back-test and hindsight per hydrogen price.
    SweepH2 {
        /// Comma-separated hydrogen prices, €/kg.
        #[arg(long, value_delimiter = ',')]
        prices: Option<Vec<f64>>,
        /// Risk limits as this share of the betting model's statistics.
        #[arg(long)]
        fraction: Option<f64>,
    },
    /// Calibrate limits from the betting model and compare the nine trading models.
    CompareNine(RunArgs),
}

#[derive(Debug, Clone, Copy, clap::Args)]
pub struct RunArgs {
    /// Risk limits as this share of the betting model's statistics.
    #[arg(long)]
    pub fraction: Option<f64>,
    /// Hydrogen price, €/kg.
    #[arg(long = "h2-price")]
    pub h2_price: Option<f64>,
}

/// Files to write, by name inside the output directory.
pub type Artifacts = Vec<(String, String)>;

/// Parses `argv`, runs the command and returns the process exit status.
pub fn run<I, T>(argv: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(argv) {
        Ok(cli) => cli,
        Err(e) => {
            use clap::error::ErrorKind;
            if matches!(e.kind(), ErrorKind::DisplayHelp | ErrorKind::DisplayVersion) {
                print!("{e}");
                return 0;
            }
            let err = CliError::Usage(e.to_string().lines().next().unwrap_or_default().to_string());
            eprintln!("error {}: {err}", err.code());
            return err.exit_code();
        }
    };
    match execute(&cli) {
        Ok(written) => {
            for path in written {
                println!("wrote {}", path.display());
            }
            0
        }
        Err(err) => {
            eprintln!("error {}: {err}", err.code());
            err.exit_code()
        }
    }
}

/// Runs the command and writes its artifacts; returns the written paths.
pub fn execute(cli: &Cli) -> Result<Vec<PathBuf>, CliError> {
    let path = cli
        .config
        .as_ref()
        .ok_or_else(|| CliError::Usage("--config is required".into()))?;
    let text = std::fs::read_to_string(path).map_err(|e| CliError::io(path, e))?;
    let mut raw = RunConfig::parse(&text)?;
    if let Some(seed) = cli.seed {
        raw.seed = seed;
    }
    if let Some(out) = &cli.out {
        raw.paths.out = out.clone();
    }
    apply_overrides(&mut raw, &cli.command)?;
    let settings = raw.settings()?;
    let inputs = pipeline::load_inputs(&settings)?;
    let artifacts = produce(&settings, &inputs, &cli.command)?;
    write_artifacts(&settings.raw.paths.out, &artifacts)
}

fn apply_overrides(raw: &mut RunConfig, command: &Command) -> Result<(), CliError> {
    match *command {
        Command::GenerateData => {}
        Command::Train(a) | Command::Backtest(a) | Command::Hindsight(a) => {
            if let Some(f) = a.fraction {
                check_fraction("--fraction", f)?;
                raw.training.fraction = f;
            }
            if let Some(p) = a.h2_price {
                raw.electrolyzer.h2_price = p;
            }
        }
        Command::CompareNine(a) => {
            if let Some(f) = a.fraction {
                check_fraction("--fraction", f)?;
                raw.compare.fraction = f;
            }
            if let Some(p) = a.h2_price {
                raw.compare.h2_price = p;
            }
        }
        Command::SweepH2 { ref prices, fraction } => {
            if let Some(p) = prices {
                raw.sweep.h2_prices = p.clone();
            }
            if let Some(f) = fraction {
                check_fraction("--fraction", f)?;
                raw.sweep.fraction = f;
            }
        }
    }
    Ok(())
}

fn write_artifacts(dir: &Path, artifacts: &Artifacts) -> Result<Vec<PathBuf>, CliError> {
    std::fs::create_dir_all(dir).map_err(|e| CliError::io(dir, e))?;
    let mut written = Vec::with_capacity(artifacts.len());
    for (name, body) in artifacts {
        let path = dir.join(name);
        std::fs::write(&path, body).map_err(|e| CliError::io(&path, e))?;
        written.push(path);
    }
    Ok(written)
}

/// Computes every artifact of `command` in memory.
pub fn produce(s: &Settings, inp: &Inputs, command: &Command) -> Result<Artifacts, CliError> {
    let mut out = Artifacts::new();
    match command {
        Command::GenerateData => {
            let mut buf = Vec::new();
            write_csv(&inp.full, &mut buf).expect("writing to memory");
            out.push(("data.csv".into(), utf8(buf)));
        }
        Command::Train(_) => {
            let (limits, betting) = pipeline::risk_limits(s, inp, &s.plant, s.raw.training.fraction, false)?;
            let trained = pipeline::train_all(s, inp, &s.plant, &s.variants, &limits, betting.as_ref())?;
            out.push(("limits.csv".into(), limits_csv(&limits, s.raw.training.fraction, s.fixed_limits.is_some())));
            out.push(("training_report.csv".into(), training_csv(&trained, s.plant.electrolyzer.h2_price)));
            let mut hist = format!("{HISTOGRAM_HEADER}\n");
            for t in &trained {
                let mut buf = Vec::new();
                t.policy.write_csv(&mut buf).expect("writing to memory");
                out.push((format!("policy_{}.csv", t.variant), utf8(buf)));
                hist_rows(&mut hist, &pipeline::histogram(s, &s.plant, &t.report.trades), &t.variant.name(), s);
            }
            out.push(("histogram_train.csv".into(), hist));
        }
        Command::Backtest(_) => {
            let (limits, betting) = pipeline::risk_limits(s, inp, &s.plant, s.raw.training.fraction, false)?;
            let trained = pipeline::train_all(s, inp, &s.plant, &s.variants, &limits, betting.as_ref())?;
            let mut curves = Vec::new();
            for t in &trained {
                curves.push((format!("curves_{}.csv", t.variant), first_day_curves(s, inp, t)?));
            }
            let evaluated = pipeline::evaluate(s, inp, &s.plant, trained)?;
            let mut report = format!("{HOURS_HEADER}\n");
            let mut hist = format!("{HISTOGRAM_HEADER}\n");
            for e in &evaluated {
                let mut buf = Vec::new();
                e.backtest.write_hours(&mut buf).expect("writing to memory");
                report.push_str(&utf8(buf));
                hist_rows(&mut hist, &e.backtest.histogram, &e.trained.variant.name(), s);
            }
            out.push(("limits.csv".into(), limits_csv(&limits, s.raw.training.fraction, s.fixed_limits.is_some())));
            out.push(("report.csv".into(), report));
            out.push((
                "summary.csv".into(),
                summary_csv(&evaluated, s.plant.electrolyzer.h2_price, s.raw.training.fraction),
            ));
            out.push(("histogram.csv".into(), hist));
            out.extend(curves);
        }
        Command::Hindsight(_) => {
            let (limits, _) = pipeline::risk_limits(s, inp, &s.plant, s.raw.training.fraction, false)?;
            let mut body = String::from("variant,h2_price,profit,objective,slack_elec,slack_h2,mean_abs,cvar_abs,max_abs\n");
            let mut hist = format!("{HISTOGRAM_HEADER}\n");
            let h2 = s.plant.electrolyzer.h2_price;
            for &v in &s.variants {
                let r = hpp_core::backtest::run_hindsight(&inp.test, &s.plant, v, &limits, &s.cond, s.raw.training.penalty)?;
                writeln!(
                    body,
                    "{v},{h2},{},{},{},{},{},{},{}",
                    r.profit, r.objective, r.slack_elec, r.slack_h2, r.stats.mean_abs, r.stats.cvar_abs, r.stats.max_abs
                )
                .unwrap();
                hist_rows(&mut hist, &pipeline::histogram(s, &s.plant, &r.trades), &v.name(), s);
            }
            out.push(("limits.csv".into(), limits_csv(&limits, s.raw.training.fraction, s.fixed_limits.is_some())));
            out.push(("hindsight.csv".into(), body));
            out.push(("histogram_hindsight.csv".into(), hist));
        }
        Command::SweepH2 { .. } => {
            let rows = pipeline::sweep(s, inp, &s.raw.sweep.h2_prices, s.raw.sweep.fraction)?;
            let mut body = String::from(
                "h2_price,variant,train_profit,train_hindsight,train_ratio,test_profit,test_hindsight,test_ratio,ratio_gap\n",
            );
            let mut hist = format!("{HISTOGRAM_HEADER}\n");
            for r in &rows {
                let e = &r.evaluated;
                let train_ratio = ratio(e.trained.report.profit, r.train_hindsight.profit);
                let test_ratio = ratio(e.backtest.profit, e.hindsight.profit);
                let gap = match (train_ratio, test_ratio) {
                    (Some(a), Some(b)) => Some(a - b),
                    _ => None,
                };
                writeln!(
                    body,
                    "{},{},{},{},{},{},{},{},{}",
                    r.h2_price,
                    e.trained.variant,
                    e.trained.report.profit,
                    r.train_hindsight.profit,
                    opt(train_ratio),
                    e.backtest.profit,
                    e.hindsight.profit,
                    opt(test_ratio),
                    opt(gap)
                )
                .unwrap();
                for x in r.betting.iter().chain(std::iter::once(e)) {
                    let name = x.trained.variant.name();
                    let plant = s.plant.with_h2_price(r.h2_price);
                    let rows = [
                        (format!("{name}/backtest"), x.backtest.histogram.clone()),
                        (format!("{name}/hindsight"), pipeline::histogram(s, &plant, &x.hindsight.trades)),
                    ];
                    for (label, h) in rows {
                        let mut buf = Vec::new();
                        h.write_rows(&label, r.h2_price, &mut buf).expect("writing to memory");
                        hist.push_str(&utf8(buf));
                    }
                }
            }
            out.push(("sweep_h2.csv".into(), body));
            out.push(("sweep_histogram.csv".into(), hist));
        }
        Command::CompareNine(_) => {
            let price = s.raw.compare.h2_price;
            let plant = s.plant.with_h2_price(price);
            let (limits, evaluated) = pipeline::compare_nine(s, inp, &plant, s.raw.compare.fraction)?;
            out.push(("limits.csv".into(), limits_csv(&limits, s.raw.compare.fraction, false)));
            out.push(("compare_nine.csv".into(), summary_csv(&evaluated, price, s.raw.compare.fraction)));
        }
    }
    Ok(out)
}

fn utf8(buf: Vec<u8>) -> String {
    String::from_utf8(buf).expect("CSV writers emit UTF-8")
}

fn ratio(num: f64, den: f64) -> Option<f64> {
    (den > 0.0).then(|| num / den)
}

fn opt(v: Option<f64>) -> String {
    v.map(|x| x.to_string()).unwrap_or_default()
}

fn hist_rows(out: &mut String, h: &hpp_core::backtest::Histogram, label: &str, s: &Settings) {
    let mut buf = Vec::new();
    h.write_rows(label, s.plant.electrolyzer.h2_price, &mut buf).expect("writing to memory");
    out.push_str(&utf8(buf));
}

fn limits_csv(l: &RiskConfig, fraction: f64, fixed: bool) -> String {
    let source = if fixed { "fixed" } else { "calibrated" };
    format!(
        "source,fraction,alpha,limit_mean,limit_cvar,limit_ext\n{source},{},{},{},{},{}\n",
        if fixed { String::new() } else { fraction.to_string() },
        l.alpha,
        l.limit_mean,
        l.limit_cvar,
        l.limit_ext
    )
}

fn training_csv(trained: &[Trained], h2_price: f64) -> String {
    let mut s = String::from(
        "variant,h2_price,profit,objective,slack_elec,slack_h2,mean_abs,cvar_abs,max_abs,num_vars,num_rows,iterations,max_violation\n",
    );
    for t in trained {
        let r = &t.report;
        writeln!(
            s,
            "{},{h2_price},{},{},{},{},{},{},{},{},{},{},{}",
            t.variant,
            r.profit,
            r.objective,
            r.slack_elec,
            r.slack_h2,
            r.stats.mean_abs,
            r.stats.cvar_abs,
            r.stats.max_abs,
            r.num_vars,
            r.num_rows,
            r.iterations,
            r.max_violation
        )
        .unwrap();
    }
    s
}

pub const SUMMARY_HEADER: &str = "variant,h2_price,fraction,profit,penalized_profit,da_revenue,h2_revenue,balancing_revenue,hindsight_profit,hindsight_objective,ratio,mean_abs,cvar_abs,max_abs,shortfall_kg,import_violation,train_profit";

fn summary_csv(evaluated: &[Evaluated], h2_price: f64, fraction: f64) -> String {
    let mut s = format!("{SUMMARY_HEADER}\n");
    for e in evaluated {
        let b = &e.backtest;
        writeln!(
            s,
            "{},{h2_price},{fraction},{},{},{},{},{},{},{},{},{},{},{},{},{},{}",
            e.trained.variant,
            b.profit,
            b.penalized_profit,
            b.da_revenue,
            b.h2_revenue,
            b.balancing_revenue,
            e.hindsight.profit,
            e.hindsight.objective,
            opt(b.profit_ratio),
            b.stats.mean_abs,
            b.stats.cvar_abs,
            b.stats.max_abs,
            b.total_shortfall(),
            b.import_violation,
            e.trained.report.profit
        )
        .unwrap();
    }
    s
}

/// Restored curves of the first test day, for plotting.
fn first_day_curves(s: &Settings, inp: &Inputs, t: &Trained) -> Result<String, CliError> {
    let rule = SignRule::for_regime(t.variant.regime, s.cond.lambda_s);
    let curves = inp
        .test
        .day(0)
        .iter()
        .map(|r| delivery_curves(&t.policy, r, &s.plant, rule, s.raw.curves.grid_step))
        .collect::<Result<Vec<_>, _>>()?;
    let mut buf = Vec::new();
    write_curve_dump(&curves, &mut buf).expect("writing to memory");
    Ok(utf8(buf))
}
