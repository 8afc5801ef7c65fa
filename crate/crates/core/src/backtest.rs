//! Clearing of bidding curves against realized prices, real-time dispatch,
//! imbalance settlement and the perfect-foresight benchmark.

use std::io::Write;

use rayon::prelude::*;

use crate::curves::{delivery_curves, evaluate, CurveError, SignRule};
use crate::electrolyzer::Plant;
use crate::market_data::{Dataset, Role};
use crate::policy::PolicySet;
use crate::stats::ImbalanceStats;
use crate::training::{
    build_training_problem, solve_lp, BinaryMode, ConditionalBuyConfig, ModelVariant, PolicyMode, ProblemSpec, Regime,
    RiskConfig, TrainingError, DEFAULT_PENALTY, FEASIBILITY_TOL,
};

#[derive(Debug, thiserror::Error)]
pub enum BacktestError {
    #[error(transparent)]
    Curve(#[from] CurveError),
    #[error(transparent)]
    Training(#[from] TrainingError),
    #[error("hindsight profit {0} is not positive")]
    NonPositiveHindsight(f64),
    #[error("invalid backtest settings: {0}")]
    InvalidConfig(String),
}

/// Physical outcome of one delivery hour.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Dispatch {
    pub p_h: f64,
    pub curtailment: f64,
    pub dp: f64,
    /// Grid import the regime does not allow, in MW.
    pub violation: f64,
}

/// Settles hour `wind` against an accepted bid.
///
/// When buying is not allowed a shortfall is first covered by running the
/// electrolyzer down toward `p_h_floor`; what remains is still settled but
/// counted as a violation. Surplus is curtailed instead of sold when the
/// balancing price is negative.
pub fn real_time_dispatch(
    may_buy: bool,
    p_h_floor: f64,
    wind: f64,
    accepted_bid: f64,
    scheduled_ph: f64,
    balancing_price: f64,
) -> Dispatch {
    let mut p_h = scheduled_ph;
    let mut dp = wind - accepted_bid - p_h;
    let mut violation = 0.0;
    if !may_buy && dp < 0.0 {
        // Set p_h directly rather than subtracting, so a fully covered
        // shortfall leaves dp at exactly zero.
        p_h = (wind - accepted_bid).max(p_h_floor.min(p_h));
        dp = wind - accepted_bid - p_h;
        if dp < 0.0 {
            violation = -dp;
        }
    }
    let mut curtailment = 0.0;
    if balancing_price < 0.0 && dp > 0.0 {
        curtailment = dp;
        dp = 0.0;
    }
    Dispatch {
        p_h,
        curtailment,
        dp,
        violation,
    }
}

/// One settled hour.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct DispatchResult {
    pub t: usize,
    pub bid: f64,
    pub p_h: f64,
    pub curtailment: f64,
    pub dp: f64,
    pub hydrogen: f64,
    pub da_revenue: f64,
    pub h2_revenue: f64,
    pub balancing_revenue: f64,
    pub violation: f64,
}

impl DispatchResult {
    pub fn profit(&self) -> f64 {
        self.da_revenue + self.h2_revenue + self.balancing_revenue
    }
}

/// Settles a cleared hour: dispatch, hydrogen and the three revenue terms.
#[allow(clippy::too_many_arguments)]
pub fn settle_hour(
    plant: &Plant,
    may_buy: bool,
    t: usize,
    wind: f64,
    da_price: f64,
    balancing_price: f64,
    bid: f64,
    scheduled_ph: f64,
) -> DispatchResult {
    let (floor, _) = plant.consumption_range();
    let d = real_time_dispatch(may_buy, floor, wind, bid, scheduled_ph, balancing_price);
    let hydrogen = if plant.electrolyzer_online {
        plant.electrolyzer.hydrogen_at(d.p_h).max(0.0)
    } else {
        0.0
    };
    DispatchResult {
        t,
        bid,
        p_h: d.p_h,
        curtailment: d.curtailment,
        dp: d.dp,
        hydrogen,
        da_revenue: bid * da_price,
        h2_revenue: hydrogen * plant.electrolyzer.h2_price,
        balancing_revenue: d.dp * balancing_price,
        violation: d.violation,
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct BacktestConfig {
    pub grid_step: f64,
    pub lambda_s: f64,
    pub alpha: f64,
    /// Width of the trade histogram bins, MW.
    pub hist_bin: f64,
    /// Charge per kg of daily hydrogen shortfall in the penalized profit.
    pub penalty: f64,
}

impl Default for BacktestConfig {
    fn default() -> Self {
        Self {
            grid_step: 1.0,
            lambda_s: 20.0,
            alpha: 0.95,
            hist_bin: 1.0,
            penalty: DEFAULT_PENALTY,
        }
    }
}

impl BacktestConfig {
    pub fn validate(&self) -> Result<(), BacktestError> {
        let bad = |m: &str| Err(BacktestError::InvalidConfig(m.into()));
        if !(self.grid_step > 0.0 && self.grid_step.is_finite()) {
            return bad("grid step must be positive");
        }
        if !self.lambda_s.is_finite() {
            return bad("green-hydrogen price threshold must be finite");
        }
        if !(self.alpha > 0.0 && self.alpha < 1.0) {
            return bad("alpha must lie in (0, 1)");
        }
        if !(self.hist_bin > 0.0 && self.hist_bin.is_finite()) {
            return bad("histogram bin width must be positive");
        }
        if !(self.penalty >= 0.0 && self.penalty.is_finite()) {
            return bad("penalty must be non-negative");
        }
        Ok(())
    }
}

/// One histogram bin. Spike bins have `lower == upper`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct HistBin {
    pub lower: f64,
    pub upper: f64,
    pub count: usize,
}

impl HistBin {
    pub fn is_spike(&self) -> bool {
        self.lower == self.upper
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct Histogram {
    pub bins: Vec<HistBin>,
}

/// Trades this close to a capacity count toward its spike.
pub const SPIKE_TOL: f64 = 1e-6;

impl Histogram {
    pub fn total(&self) -> usize {
        self.bins.iter().map(|b| b.count).sum()
    }

    /// Count in the bins strictly between the two capacity spikes.
    pub fn interior(&self) -> usize {
        self.bins.iter().filter(|b| !b.is_spike()).map(|b| b.count).sum()
    }

    /// Writes one row per bin under [`HISTOGRAM_HEADER`].
    pub fn write_rows(&self, variant: &str, h2_price: f64, out: &mut impl Write) -> std::io::Result<()> {
        for (i, b) in self.bins.iter().enumerate() {
            writeln!(out, "{variant},{},{},{},{},{h2_price}", i + 1, b.lower, b.upper, b.count)?;
        }
        Ok(())
    }
}

pub const HISTOGRAM_HEADER: &str = "variant,bin,lower,upper,count,h2_price";

/// Counts `trades` in `bin`-wide bins over `[-buy_cap, sell_cap]`.
///
/// Trades at either capacity get their own spike bin at each end. Inner bins
/// are half-open `[lower, upper)`, so a value on an edge lands in the bin that
/// starts there. Values beyond the range are clamped onto it.
pub fn trade_distribution(trades: &[f64], bin: f64, buy_cap: f64, sell_cap: f64) -> Histogram {
    assert!(bin > 0.0, "bin width must be positive");
    let lo = -buy_cap;
    let hi = sell_cap;
    let mut edges = Vec::new();
    let mut e = lo;
    while e < hi - 1e-9 {
        edges.push(e);
        e = lo + edges.len() as f64 * bin;
    }
    let mut bins = vec![HistBin {
        lower: lo,
        upper: lo,
        count: 0,
    }];
    for (i, &l) in edges.iter().enumerate() {
        let u = edges.get(i + 1).copied().unwrap_or(hi);
        bins.push(HistBin {
            lower: l,
            upper: u,
            count: 0,
        });
    }
    bins.push(HistBin {
        lower: hi,
        upper: hi,
        count: 0,
    });
    let last = bins.len() - 1;
    for &x in trades {
        let idx = if x <= lo + SPIKE_TOL {
            0
        } else if x >= hi - SPIKE_TOL {
            last
        } else {
            1 + (edges.partition_point(|&l| l <= x) - 1)
        };
        bins[idx].count += 1;
    }
    Histogram { bins }
}

#[derive(Clone, Debug)]
pub struct BacktestReport {
    pub variant: ModelVariant,
    pub hours: Vec<DispatchResult>,
    pub profit: f64,
    pub da_revenue: f64,
    pub h2_revenue: f64,
    pub balancing_revenue: f64,
    /// Profit less the shortfall charge.
    pub penalized_profit: f64,
    pub stats: ImbalanceStats,
    /// Missing kg against the daily minimum, per day.
    pub daily_shortfall: Vec<f64>,
    pub import_violation: f64,
    pub histogram: Histogram,
    pub profit_ratio: Option<f64>,
}

impl BacktestReport {
    pub fn total_shortfall(&self) -> f64 {
        self.daily_shortfall.iter().sum()
    }

    pub fn trades(&self) -> Vec<f64> {
        self.hours.iter().map(|h| h.bid).collect()
    }

    pub fn imbalance(&self) -> Vec<f64> {
        self.hours.iter().map(|h| h.dp).collect()
    }

    /// Records the ratio against a hindsight profit and returns it.
    pub fn attach_hindsight(&mut self, hindsight_profit: f64) -> Result<f64, BacktestError> {
        let r = profit_ratio(self.profit, hindsight_profit)?;
        self.profit_ratio = Some(r);
        Ok(r)
    }

    /// Writes one row per hour under [`HOURS_HEADER`].
    pub fn write_hours(&self, out: &mut impl Write) -> std::io::Result<()> {
        for h in &self.hours {
            writeln!(
                out,
                "{},{},{},{},{},{},{},{},{},{},{}",
                self.variant,
                h.t,
                h.bid,
                h.p_h,
                h.curtailment,
                h.dp,
                h.hydrogen,
                h.da_revenue,
                h.h2_revenue,
                h.balancing_revenue,
                h.violation
            )?;
        }
        Ok(())
    }
}

pub const HOURS_HEADER: &str =
    "variant,t,bid,p_h,curtailment,dp,hydrogen,da_revenue,h2_revenue,balancing_revenue,violation";

/// Whether the regime lets the plant buy at day-ahead price `price`.
pub fn may_buy(regime: Regime, price: f64, lambda_s: f64) -> bool {
    match regime {
        Regime::Permitted => true,
        Regime::Restricted => false,
        Regime::Conditional => price < lambda_s,
    }
}

/// Submits each test hour's restored curves, clears them at the realized
/// day-ahead price and settles the outcome.
pub fn run_backtest(
    ps: &PolicySet,
    test: &Dataset,
    plant: &Plant,
    variant: ModelVariant,
    cfg: &BacktestConfig,
) -> Result<BacktestReport, BacktestError> {
    cfg.validate()?;
    if test.is_empty() {
        return Err(TrainingError::EmptyDataset.into());
    }
    let rule = SignRule::for_regime(variant.regime, cfg.lambda_s);
    let days: Vec<Vec<DispatchResult>> = (0..test.num_days())
        .into_par_iter()
        .map(|d| {
            test.day(d)
                .iter()
                .map(|r| {
                    let curves = delivery_curves(ps, r, plant, rule, cfg.grid_step)?;
                    let bid = evaluate(&curves.power, r.da_price_realized)?;
                    let ph = evaluate(&curves.hydrogen, r.da_price_realized)?;
                    Ok(settle_hour(
                        plant,
                        may_buy(variant.regime, r.da_price_realized, cfg.lambda_s),
                        r.t,
                        r.wind_realized,
                        r.da_price_realized,
                        r.balancing_price_realized,
                        bid,
                        ph,
                    ))
                })
                .collect::<Result<Vec<_>, BacktestError>>()
        })
        .collect::<Result<_, _>>()?;
    Ok(summarize(variant, days.into_iter().flatten().collect(), plant, cfg))
}

fn summarize(variant: ModelVariant, hours: Vec<DispatchResult>, plant: &Plant, cfg: &BacktestConfig) -> BacktestReport {
    let da_revenue = hours.iter().map(|h| h.da_revenue).sum::<f64>();
    let h2_revenue = hours.iter().map(|h| h.h2_revenue).sum::<f64>();
    let balancing_revenue = hours.iter().map(|h| h.balancing_revenue).sum::<f64>();
    let profit = hours.iter().map(|h| h.profit()).sum::<f64>();
    let daily_min = if plant.electrolyzer_online {
        plant.electrolyzer.daily_min
    } else {
        0.0
    };
    let daily_shortfall: Vec<f64> = hours
        .chunks(24)
        .map(|day| (daily_min - day.iter().map(|h| h.hydrogen).sum::<f64>()).max(0.0))
        .collect();
    let dp: Vec<f64> = hours.iter().map(|h| h.dp).collect();
    let trades: Vec<f64> = hours.iter().map(|h| h.bid).collect();
    let shortfall: f64 = daily_shortfall.iter().sum();
    BacktestReport {
        variant,
        profit,
        da_revenue,
        h2_revenue,
        balancing_revenue,
        penalized_profit: profit - cfg.penalty * shortfall,
        stats: ImbalanceStats::of(&dp, cfg.alpha),
        daily_shortfall,
        import_violation: hours.iter().map(|h| h.violation).sum(),
        histogram: trade_distribution(&trades, cfg.hist_bin, plant.max_buy(), plant.wind_capacity),
        hours,
        profit_ratio: None,
    }
}

/// Perfect-foresight optimum over a test set.
#[derive(Clone, Debug)]
pub struct HindsightReport {
    pub variant: ModelVariant,
    /// Revenue without slack penalties.
    pub profit: f64,
    /// Optimal objective, slack penalties included.
    pub objective: f64,
    pub slack_elec: f64,
    pub slack_h2: f64,
    pub trades: Vec<f64>,
    pub consumption: Vec<f64>,
    pub hydrogen: Vec<f64>,
    pub imbalance: Vec<f64>,
    pub stats: ImbalanceStats,
}

/// Solves the variant's problem on realized data, with no policy structure.
/// Without risk limits the days are independent and solved one by one; with
/// them the limits span the whole horizon and one problem is solved.
pub fn run_hindsight(
    test: &Dataset,
    plant: &Plant,
    variant: ModelVariant,
    risk: &RiskConfig,
    cond: &ConditionalBuyConfig,
    penalty: f64,
) -> Result<HindsightReport, BacktestError> {
    risk.validate()?;
    cond.validate()?;
    if test.is_empty() {
        return Err(TrainingError::EmptyDataset.into());
    }
    let solve = |data: &Dataset| -> Result<(f64, crate::training::ProblemValues), TrainingError> {
        let spec = ProblemSpec {
            data,
            plant,
            variant,
            risk,
            cond,
            penalty,
            policy: PolicyMode::Hindsight,
            binaries: BinaryMode::Presolved,
            reduce_monotone: false,
        };
        let prob = build_training_problem(&spec)?;
        let solved = solve_lp(&prob, FEASIBILITY_TOL)?;
        Ok((solved.objective, solved.values))
    };
    let parts: Vec<(f64, crate::training::ProblemValues)> = if variant.is_betting() {
        (0..test.num_days())
            .into_par_iter()
            .map(|d| solve(&test.days(d, d + 1, Role::Test)?))
            .collect::<Result<_, _>>()?
    } else {
        vec![solve(test)?]
    };
    let mut report = HindsightReport {
        variant,
        profit: 0.0,
        objective: 0.0,
        slack_elec: 0.0,
        slack_h2: 0.0,
        trades: Vec::with_capacity(test.len()),
        consumption: Vec::with_capacity(test.len()),
        hydrogen: Vec::with_capacity(test.len()),
        imbalance: Vec::with_capacity(test.len()),
        stats: ImbalanceStats {
            mean_abs: 0.0,
            cvar_abs: 0.0,
            max_abs: 0.0,
        },
    };
    for (objective, v) in parts {
        let (se, sh) = v.slack_totals();
        report.objective += objective;
        report.slack_elec += se;
        report.slack_h2 += sh;
        report.trades.extend_from_slice(&v.p_da);
        report.consumption.extend_from_slice(&v.p_h);
        report.hydrogen.extend_from_slice(&v.h);
        report.imbalance.extend_from_slice(&v.dp);
    }
    let h2 = plant.electrolyzer.h2_price;
    report.profit = test
        .records()
        .iter()
        .enumerate()
        .map(|(i, r)| {
            report.trades[i] * r.da_price_realized
                + report.hydrogen[i] * h2
                + report.imbalance[i] * r.balancing_price_realized
        })
        .sum();
    report.stats = ImbalanceStats::of(&report.imbalance, risk.alpha);
    Ok(report)
}

/// Achieved profit over hindsight profit, unclamped.
pub fn profit_ratio(test_profit: f64, hindsight_profit: f64) -> Result<f64, BacktestError> {
    if !(hindsight_profit > 0.0) {
        return Err(BacktestError::NonPositiveHindsight(hindsight_profit));
    }
    Ok(test_profit / hindsight_profit)
}
