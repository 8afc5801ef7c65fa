//! Train, back-test and benchmark steps shared by the subcommands.

use rayon::prelude::*;

use hpp_core::backtest::{
    run_backtest, run_hindsight, trade_distribution, BacktestConfig, BacktestReport, HindsightReport, Histogram,
};
use hpp_core::electrolyzer::Plant;
use hpp_core::market_data::{compute_price_domains, generate_synthetic, load_csv, Dataset, PriceDomains};
use hpp_core::policy::PolicySet;
use hpp_core::training::{
    calibrate_risk_limits, train, ModelVariant, Regime, Risk, RiskConfig, TrainingReport, TrainingSetup,
};

use crate::config::Settings;
use crate::error::CliError;

pub struct Inputs {
    pub full: Dataset,
    pub train: Dataset,
    pub test: Dataset,
    pub domains: PriceDomains,
}

pub fn load_inputs(s: &Settings) -> Result<Inputs, CliError> {
    let full = match &s.raw.paths.data {
        Some(path) => load_csv(path)?,
        None => generate_synthetic(&s.generator)?,
    };
    let (train, test) = full.split(s.raw.data.train_days)?;
    let d = &s.raw.domains;
    let domains = compute_price_domains(&train, d.count, d.floor, d.ceiling)?;
    Ok(Inputs {
        full,
        train,
        test,
        domains,
    })
}

pub const BETTING: ModelVariant = ModelVariant::new(Risk::None, Regime::Permitted);

#[derive(Clone, Debug)]
pub struct Trained {
    pub variant: ModelVariant,
    pub policy: PolicySet,
    pub report: TrainingReport,
    pub limits: RiskConfig,
}

fn train_one(
    s: &Settings,
    inp: &Inputs,
    plant: &Plant,
    variant: ModelVariant,
    limits: &RiskConfig,
) -> Result<Trained, CliError> {
    let setup = TrainingSetup {
        data: &inp.train,
        plant,
        features: &s.features,
        domains: &inp.domains,
        variant,
        risk: limits,
        cond: &s.cond,
        penalty: s.raw.training.penalty,
    };
    let (policy, report) = train(&setup)?;
    Ok(Trained {
        variant,
        policy,
        report,
        limits: *limits,
    })
}

/// Risk limits for the trading models: the configured ones, or `fraction` of
/// the betting model's training statistics. The betting model is returned
/// when it had to be trained.
pub fn risk_limits(
    s: &Settings,
    inp: &Inputs,
    plant: &Plant,
    fraction: f64,
    force_calibration: bool,
) -> Result<(RiskConfig, Option<Trained>), CliError> {
    let alpha = s.raw.training.alpha;
    if let (Some(fixed), false) = (s.fixed_limits, force_calibration) {
        return Ok((fixed, None));
    }
    let betting = train_one(s, inp, plant, BETTING, &RiskConfig::unlimited(alpha))?;
    let limits = calibrate_risk_limits(&betting.report, fraction, alpha)?;
    Ok((limits, Some(betting)))
}

/// Trains `variants` in order, reusing an already trained betting model.
pub fn train_all(
    s: &Settings,
    inp: &Inputs,
    plant: &Plant,
    variants: &[ModelVariant],
    limits: &RiskConfig,
    betting: Option<&Trained>,
) -> Result<Vec<Trained>, CliError> {
    variants
        .par_iter()
        .map(|&v| match betting {
            Some(b) if v == b.variant => Ok(b.clone()),
            _ => train_one(s, inp, plant, v, limits),
        })
        .collect()
}

pub fn backtest_config(s: &Settings) -> BacktestConfig {
    BacktestConfig {
        grid_step: s.raw.curves.grid_step,
        lambda_s: s.cond.lambda_s,
        alpha: s.raw.training.alpha,
        hist_bin: s.raw.curves.histogram_bin,
        penalty: s.raw.training.penalty,
    }
}

pub fn hindsight(s: &Settings, data: &Dataset, plant: &Plant, t: &Trained) -> Result<HindsightReport, CliError> {
    Ok(run_hindsight(data, plant, t.variant, &t.limits, &s.cond, s.raw.training.penalty)?)
}

pub struct Evaluated {
    pub trained: Trained,
    pub backtest: BacktestReport,
    pub hindsight: HindsightReport,
}

/// Back-test on the test set and the hindsight benchmark on the same days.
pub fn evaluate(s: &Settings, inp: &Inputs, plant: &Plant, trained: Vec<Trained>) -> Result<Vec<Evaluated>, CliError> {
    let cfg = backtest_config(s);
    trained
        .into_par_iter()
        .map(|t| {
            let mut backtest = run_backtest(&t.policy, &inp.test, plant, t.variant, &cfg)?;
            let hindsight = hindsight(s, &inp.test, plant, &t)?;
            if hindsight.profit > 0.0 {
                backtest.attach_hindsight(hindsight.profit)?;
            }
            Ok(Evaluated {
                trained: t,
                backtest,
                hindsight,
            })
        })
        .collect()
}

pub fn histogram(s: &Settings, plant: &Plant, trades: &[f64]) -> Histogram {
    trade_distribution(trades, s.raw.curves.histogram_bin, plant.max_buy(), plant.wind_capacity)
}

/// One row of the hydrogen price sweep.
pub struct SweepRow {
    pub h2_price: f64,
    pub evaluated: Evaluated,
    pub train_hindsight: HindsightReport,
    pub betting: Option<Evaluated>,
}

pub fn sweep(s: &Settings, inp: &Inputs, prices: &[f64], fraction: f64) -> Result<Vec<SweepRow>, CliError> {
    prices
        .iter()
        .map(|&price| {
            let plant = s.plant.with_h2_price(price);
            let (limits, betting) = risk_limits(s, inp, &plant, fraction, true)?;
            let trained = train_all(s, inp, &plant, &[s.sweep_variant], &limits, betting.as_ref())?;
            let train_hindsight = hindsight(s, &inp.train, &plant, &trained[0])?;
            let evaluated = evaluate(s, inp, &plant, trained)?.pop().expect("one variant");
            let betting = match betting {
                Some(b) if s.sweep_variant != BETTING => evaluate(s, inp, &plant, vec![b])?.pop(),
                _ => None,
            };
            Ok(SweepRow {
                h2_price: price,
                evaluated,
                train_hindsight,
                betting,
            })
        })
        .collect()
}

/// Calibrates at `fraction` from the betting model and evaluates the nine
/// risk-constrained models.
pub fn compare_nine(s: &Settings, inp: &Inputs, plant: &Plant, fraction: f64) -> Result<(RiskConfig, Vec<Evaluated>), CliError> {
    let (limits, betting) = risk_limits(s, inp, plant, fraction, true)?;
    let trained = train_all(s, inp, plant, &ModelVariant::trading(), &limits, betting.as_ref())?;
    Ok((limits, evaluate(s, inp, plant, trained)?))
}
