mod common;

use common::{domains, features4, handmade, plant, synthetic};
use hpp_core::backtest::*;
use hpp_core::curves::{delivery_curves, SignRule};
use hpp_core::market_data::{Dataset, HourlyRecord, Role};
use hpp_core::policy::PolicySet;
use hpp_core::training::*;

fn variant(s: &str) -> ModelVariant {
    s.parse().unwrap()
}

fn cond() -> ConditionalBuyConfig {
    ConditionalBuyConfig::default()
}

fn day_of(da: f64, bal: f64, wind: f64) -> Dataset {
    handmade(&[(da, bal, wind); 24])
}

#[test]
fn windless_restricted_day_records_violation_and_shortfall() {
    let p = plant();
    let data = synthetic(3, 5);
    let ps = PolicySet::zeros(features4(), domains(&data, 4));
    let mut recs: Vec<HourlyRecord> = data.day(0).to_vec();
    for r in &mut recs {
        r.wind_realized = 0.0;
        r.wind_forecast = 0.0;
    }
    let test = Dataset::new(recs, Role::Test).unwrap();
    let rep = run_backtest(&ps, &test, &p, variant("B_res"), &BacktestConfig::default()).unwrap();
    for h in &rep.hours {
        assert!(h.bid >= 0.0);
        assert_eq!(h.p_h, p.electrolyzer.p_min);
        assert!(h.violation > 0.0);
    }
    assert!(rep.daily_shortfall[0] > 0.0);
    assert!(rep.import_violation > 0.0);
    assert!(rep.penalized_profit < rep.profit);
}

#[test]
fn report_totals_add_up() {
    let p = plant();
    let data = synthetic(20, 2);
    let (train_set, test) = data.split(14).unwrap();
    let (f, d) = (features4(), domains(&train_set, 4));
    let risk = RiskConfig::default();
    let c = cond();
    let setup = TrainingSetup {
        data: &train_set,
        plant: &p,
        features: &f,
        domains: &d,
        variant: variant("B"),
        risk: &risk,
        cond: &c,
        penalty: DEFAULT_PENALTY,
    };
    let (ps, _) = train(&setup).unwrap();
    let rep = run_backtest(&ps, &test, &p, setup.variant, &BacktestConfig::default()).unwrap();
    let sum: f64 = rep.hours.iter().map(|h| h.profit()).sum();
    assert!((rep.profit - sum).abs() < 1e-6 * sum.abs().max(1.0));
    assert!((rep.da_revenue + rep.h2_revenue + rep.balancing_revenue - rep.profit).abs() < 1e-6 * rep.profit.abs());
    assert_eq!(rep.histogram.total(), test.len());
    assert_eq!(rep.daily_shortfall.len(), test.num_days());
    for (h, r) in rep.hours.iter().zip(test.records()) {
        let balance = r.wind_realized - h.bid - h.p_h - h.curtailment - h.dp;
        assert!(balance.abs() < 1e-9);
        assert!(h.curtailment >= 0.0);
        assert!(h.p_h >= p.electrolyzer.p_min - 1e-12 && h.p_h <= p.electrolyzer.p_max + 1e-12);
    }

    let hs = run_hindsight(&test, &p, setup.variant, &risk, &c, DEFAULT_PENALTY).unwrap();
    assert!(hs.profit >= rep.profit - 1e-6 * hs.profit.abs());
}

#[test]
fn hindsight_sells_everything_when_day_ahead_pays_more() {
    let p = plant().wind_only();
    let hs = run_hindsight(&day_of(50.0, 40.0, 6.0), &p, variant("B"), &RiskConfig::default(), &cond(), DEFAULT_PENALTY)
        .unwrap();
    assert!(hs.trades.iter().all(|&x| (x - 10.0).abs() < 1e-9));
    assert!(hs.imbalance.iter().all(|&x| (x + 4.0).abs() < 1e-9));
    assert!((hs.profit - 24.0 * 340.0).abs() < 1e-6);
}

#[test]
fn hindsight_buys_everything_when_balancing_pays_more() {
    let p = plant().wind_only();
    let hs = run_hindsight(&day_of(40.0, 50.0, 6.0), &p, variant("B"), &RiskConfig::default(), &cond(), DEFAULT_PENALTY)
        .unwrap();
    assert!(hs.trades.iter().all(|&x| (x + 10.0).abs() < 1e-9));
    assert!(hs.imbalance.iter().all(|&x| (x - 16.0).abs() < 1e-9));
    assert!((hs.profit - 24.0 * 400.0).abs() < 1e-6);
}

#[test]
fn equal_prices_make_the_split_irrelevant() {
    let p = plant().wind_only();
    let hours: Vec<(f64, f64, f64)> = (0..48).map(|i| (30.0 + i as f64, 30.0 + i as f64, (i % 11) as f64)).collect();
    let data = handmade(&hours);
    let hs = run_hindsight(&data, &p, variant("B"), &RiskConfig::default(), &cond(), DEFAULT_PENALTY).unwrap();
    let expected: f64 = hours.iter().map(|&(price, _, wind)| price * wind).sum();
    assert!((hs.profit - expected).abs() < 1e-6);
}

#[test]
fn pure_wind_hindsight_is_all_or_nothing() {
    let p = plant().wind_only();
    let data = synthetic(10, 9);
    let hs = run_hindsight(&data, &p, variant("B"), &RiskConfig::default(), &cond(), DEFAULT_PENALTY).unwrap();
    let mut spread = 0;
    for (x, r) in hs.trades.iter().zip(data.records()) {
        if r.da_price_realized != r.balancing_price_realized {
            spread += 1;
            assert_eq!(x.abs(), 10.0, "hour {} trade {x}", r.t);
        }
    }
    assert!(spread * 100 >= 99 * data.len());
    let h = trade_distribution(&hs.trades, 1.0, p.max_buy(), p.wind_capacity);
    assert!(h.bins[0].count + h.bins.last().unwrap().count >= spread);
}

#[test]
fn hindsight_nests_by_regime_and_respects_limits() {
    let p = plant();
    let data = synthetic(6, 3);
    let c = cond();
    let unl = RiskConfig::default();
    let profit = |name: &str, risk: &RiskConfig| run_hindsight(&data, &p, variant(name), risk, &c, DEFAULT_PENALTY).unwrap();
    let (perm, cnd, res) = (profit("B", &unl), profit("B_cond", &unl), profit("B_res", &unl));
    assert!(perm.objective >= cnd.objective - 1e-6 * perm.objective.abs());
    assert!(cnd.objective >= res.objective - 1e-6 * cnd.objective.abs());

    let limits = RiskConfig {
        limit_mean: 2.0,
        limit_cvar: 5.0,
        limit_ext: 6.0,
        alpha: 0.95,
    };
    let m = profit("T_mean", &limits);
    assert!(m.stats.mean_abs <= limits.limit_mean + 1e-6);
    let cv = profit("T_cvar", &limits);
    assert!(cv.stats.cvar_abs <= limits.limit_cvar + 1e-6);
    let e = profit("T_ext", &limits);
    assert!(e.stats.max_abs <= limits.limit_ext + 1e-6);
    for r in [&m, &cv, &e] {
        assert!(r.profit <= perm.profit + 1e-6 * perm.profit);
    }
}

#[test]
fn curves_ignore_the_realized_values_of_the_delivery_hour() {
    let p = plant();
    let data = synthetic(20, 4);
    let (train_set, test) = data.split(14).unwrap();
    let (f, d) = (features4(), domains(&train_set, 4));
    let risk = RiskConfig::default();
    let c = cond();
    let setup = TrainingSetup {
        data: &train_set,
        plant: &p,
        features: &f,
        domains: &d,
        variant: variant("B_cond"),
        risk: &risk,
        cond: &c,
        penalty: DEFAULT_PENALTY,
    };
    let (ps, _) = train(&setup).unwrap();
    let rule = SignRule::for_regime(Regime::Conditional, c.lambda_s);
    let cfg = BacktestConfig::default();
    let before = run_backtest(&ps, &test, &p, setup.variant, &cfg).unwrap();

    let mut recs = test.records().to_vec();
    for r in recs.iter_mut().take(24) {
        let original = delivery_curves(&ps, r, &p, rule, cfg.grid_step).unwrap();
        r.da_price_realized += 37.0;
        r.balancing_price_realized -= 11.0;
        r.wind_realized = 10.0 - r.wind_realized;
        assert_eq!(delivery_curves(&ps, r, &p, rule, cfg.grid_step).unwrap(), original);
    }
    let moved = Dataset::new(recs, Role::Test).unwrap();
    let after = run_backtest(&ps, &moved, &p, setup.variant, &cfg).unwrap();
    assert_eq!(before.hours[24..], after.hours[24..]);
}
