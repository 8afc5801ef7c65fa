mod common;

use common::{domains, features4, handmade, plant, synthetic};
use hpp_core::market_data::{FeatureConfig, PriceDomains};
use hpp_core::stats::empirical_cvar;
use hpp_core::training::audit::audit_solution;
use hpp_core::training::*;
use proptest::prelude::*;

fn variant(s: &str) -> ModelVariant {
    s.parse().unwrap()
}

fn objective(spec: &ProblemSpec<'_>) -> f64 {
    let prob = build_training_problem(spec).unwrap();
    solve_lp(&prob, FEASIBILITY_TOL).unwrap().objective
}

#[test]
fn variable_count_for_cvar_model() {
    let data = synthetic(60, 3);
    let fc = features4();
    let dom = domains(&data, 10);
    let p = plant();
    let risk = RiskConfig::default();
    let cond = ConditionalBuyConfig::default();
    let setup = TrainingSetup {
        data: &data,
        plant: &p,
        features: &fc,
        domains: &dom,
        variant: variant("T_cvar"),
        risk: &risk,
        cond: &cond,
        penalty: DEFAULT_PENALTY,
    };
    let spec = ProblemSpec {
        reduce_monotone: false,
        ..setup.problem_spec()
    };
    let prob = build_training_problem(&spec).unwrap();
    assert_eq!(prob.lp.num_vars(), 10_561);
    assert_eq!(expected_variable_count(1440, 4, 10, variant("T_cvar"), true), 10_561);
    for v in ModelVariant::all() {
        let spec = ProblemSpec { variant: v, ..spec };
        let prob = build_training_problem(&spec).unwrap();
        assert_eq!(prob.lp.num_vars(), expected_variable_count(1440, 4, 10, v, true), "{v}");
    }
}

#[test]
fn restricted_model_forbids_buying_and_has_slacks() {
    let data = synthetic(2, 5);
    let fc = FeatureConfig::default();
    let dom = domains(&data, 3);
    let p = plant();
    let (risk, cond) = (RiskConfig::default(), ConditionalBuyConfig::default());
    let setup = TrainingSetup {
        data: &data,
        plant: &p,
        features: &fc,
        domains: &dom,
        variant: variant("B_res"),
        risk: &risk,
        cond: &cond,
        penalty: DEFAULT_PENALTY,
    };
    let prob = build_training_problem(&setup.problem_spec()).unwrap();
    for (&pda, &dp) in prob.vars.p_da.iter().zip(&prob.vars.dp) {
        assert_eq!(prob.lp.variable(pda).lower, 0.0);
        assert_eq!(prob.lp.variable(dp).lower, 0.0);
    }
    assert_eq!(prob.vars.sigma_elec.len(), 48);
    assert_eq!(prob.vars.sigma_h2.len(), 2);

    let permitted = build_training_problem(&TrainingSetup { variant: variant("B"), ..setup }.problem_spec()).unwrap();
    assert!(permitted.vars.sigma_elec.is_empty() && permitted.vars.sigma_h2.is_empty());
    assert_eq!(permitted.lp.variable(permitted.vars.p_da[0]).lower, -10.0);
}

#[test]
fn conditional_indicator_follows_green_price() {
    let mut hours: Vec<(f64, f64, f64)> = (0..24).map(|i| (30.0 + i as f64, 35.0, 5.0)).collect();
    hours[3].0 = 19.0;
    hours[4].0 = 21.0;
    hours[5].0 = 20.0;
    let data = handmade(&hours);
    let cond = ConditionalBuyConfig::default();
    let prices: Vec<f64> = data.records().iter().map(|r| r.da_price_realized).collect();
    let (b, m) = presolve_binaries(&prices, &cond).unwrap();
    assert!(m >= 53.0);
    assert!(b[3]);
    assert!(!b[4]);
    // At exactly the threshold the strict inequality wins.
    assert!(!b[5]);
    assert_eq!(b.iter().filter(|&&x| x).count(), 1);

    let fc = FeatureConfig::default();
    let dom = PriceDomains::new(vec![40.0], -500.0, 4000.0).unwrap();
    let p = plant();
    let risk = RiskConfig::default();
    let setup = TrainingSetup {
        data: &data,
        plant: &p,
        features: &fc,
        domains: &dom,
        variant: variant("B_cond"),
        risk: &risk,
        cond: &cond,
        penalty: DEFAULT_PENALTY,
    };
    let prob = build_training_problem(&setup.problem_spec()).unwrap();
    assert_eq!(prob.lp.variable(prob.vars.p_da[3]).lower, -10.0);
    assert_eq!(prob.lp.variable(prob.vars.p_da[4]).lower, 0.0);
    assert_eq!(prob.lp.variable(prob.vars.dp[4]).lower, 0.0);
}

#[test]
fn ambiguous_indicator_is_reported() {
    let cond = ConditionalBuyConfig {
        big_m: Some(1e-2),
        epsilon: 1e-3,
        ..Default::default()
    };
    // The Big-M is far too small for a price of 100.
    assert!(matches!(
        presolve_binaries(&[100.0], &cond),
        Err(TrainingError::AmbiguousBinary { hour: 1, .. })
    ));
}

#[test]
fn betting_model_sells_everything_when_day_ahead_pays_more() {
    let hours: Vec<(f64, f64, f64)> = (0..48)
        .map(|i| {
            let da = 40.0 + (i % 7) as f64 * 3.0 + (i % 5) as f64;
            (da, da - 10.0, 10.0)
        })
        .collect();
    let data = handmade(&hours);
    let fc = FeatureConfig::default();
    let dom = domains(&data, 2);
    let p = plant().wind_only();
    let (risk, cond) = (RiskConfig::default(), ConditionalBuyConfig::default());
    let (_, rep) = train(&TrainingSetup {
        data: &data,
        plant: &p,
        features: &fc,
        domains: &dom,
        variant: variant("B"),
        risk: &risk,
        cond: &cond,
        penalty: DEFAULT_PENALTY,
    })
    .unwrap();
    for (t, q) in rep.trades.iter().enumerate() {
        assert!((q - 10.0).abs() < 1e-6, "hour {}: {q}", t + 1);
    }
    let expected: f64 = hours.iter().map(|h| 10.0 * h.0).sum();
    assert!((rep.profit - expected).abs() < 1e-6 * expected);
}

#[test]
fn windless_day_forces_hydrogen_slack_under_restriction() {
    let hours: Vec<(f64, f64, f64)> = (0..48)
        .map(|i| {
            let wind = if i < 24 { 9.0 } else { 0.0 };
            (30.0 + (i % 6) as f64, 32.0, wind)
        })
        .collect();
    let data = handmade(&hours);
    let fc = FeatureConfig::default();
    let dom = PriceDomains::new(vec![], -500.0, 4000.0).unwrap();
    let p = plant();
    let (risk, cond) = (RiskConfig::default(), ConditionalBuyConfig::default());
    let (_, rep) = train(&TrainingSetup {
        data: &data,
        plant: &p,
        features: &fc,
        domains: &dom,
        variant: variant("B_res"),
        risk: &risk,
        cond: &cond,
        penalty: DEFAULT_PENALTY,
    })
    .unwrap();
    assert!(rep.slack_h2 > 1.0, "{}", rep.slack_h2);
    let penalized = rep.profit - DEFAULT_PENALTY * (rep.slack_elec + rep.slack_h2);
    assert!((rep.objective - penalized).abs() < 1e-6 * rep.objective.abs().max(1.0));
    // No purchases at all.
    assert!(rep.trades.iter().all(|&q| q >= -1e-9));
    assert!(rep.imbalance.iter().all(|&d| d >= -1e-9));
}

/// Solves the conditional model with the indicators as variables, trying
/// every 0/1 pattern that the indicator rows admit hour by hour.
fn enumerate_indicator_patterns(spec: &ProblemSpec<'_>) -> f64 {
    let prob = build_training_problem(&ProblemSpec {
        binaries: BinaryMode::Variables,
        ..*spec
    })
    .unwrap();
    let admissible: Vec<Vec<f64>> = prob
        .vars
        .b
        .iter()
        .enumerate()
        .map(|(i, _)| {
            let row = prob
                .lp
                .constraints()
                .iter()
                .find(|c| c.name == format!("indicator[{}]", i + 1))
                .unwrap();
            [0.0, 1.0].into_iter().filter(|&b| row.lower <= b && b <= row.upper).collect()
        })
        .collect();
    let total: usize = admissible.iter().map(Vec::len).product();
    assert!(total >= 1 && total <= 1 << 12);
    let mut best = f64::NEG_INFINITY;
    for code in 0..total {
        let mut lp = prob.lp.clone();
        let mut rest = code;
        for (i, choices) in admissible.iter().enumerate() {
            let b = choices[rest % choices.len()];
            rest /= choices.len();
            lp.set_bounds(prob.vars.b[i], b, b);
        }
        if let Ok(sol) = hpp_lp::solve(&lp) {
            best = best.max(sol.objective);
        }
    }
    best
}

#[test]
fn presolved_indicators_match_enumeration() {
    let hours: Vec<(f64, f64, f64)> = (0..24)
        .map(|i| {
            let da = 8.0 + 2.5 * i as f64;
            let bal = if i % 3 == 0 { da + 12.0 } else { da - 6.0 };
            (da, bal, 2.0 + (i % 8) as f64)
        })
        .collect();
    let data = handmade(&hours);
    let fc = FeatureConfig::default();
    let dom = PriceDomains::new(vec![30.0], -500.0, 4000.0).unwrap();
    let p = plant();
    let (risk, cond) = (RiskConfig::default(), ConditionalBuyConfig::default());
    for policy in [
        PolicyMode::Learned {
            features: &fc,
            domains: &dom,
        },
        PolicyMode::Hindsight,
    ] {
        let spec = ProblemSpec {
            data: &data,
            plant: &p,
            variant: variant("B_cond"),
            risk: &risk,
            cond: &cond,
            penalty: DEFAULT_PENALTY,
            policy,
            binaries: BinaryMode::Presolved,
            reduce_monotone: true,
        };
        let presolved = objective(&spec);
        let enumerated = enumerate_indicator_patterns(&spec);
        assert!(
            (presolved - enumerated).abs() <= 1e-6 * presolved.abs().max(1.0),
            "{presolved} vs {enumerated}"
        );
    }
}

#[test]
fn dropping_implied_monotone_rows_keeps_the_optimum() {
    let data = synthetic(10, 11);
    let fc = FeatureConfig::default();
    let dom = domains(&data, 4);
    let p = plant();
    let (risk, cond) = (RiskConfig::default(), ConditionalBuyConfig::default());
    for name in ["B", "B_cond"] {
        let setup = TrainingSetup {
            data: &data,
            plant: &p,
            features: &fc,
            domains: &dom,
            variant: variant(name),
            risk: &risk,
            cond: &cond,
            penalty: DEFAULT_PENALTY,
        };
        let reduced_spec = setup.problem_spec();
        let full_spec = ProblemSpec {
            reduce_monotone: false,
            ..reduced_spec
        };
        let reduced = build_training_problem(&reduced_spec).unwrap();
        let full = build_training_problem(&full_spec).unwrap();
        assert!(reduced.lp.num_constraints() < full.lp.num_constraints());
        let a = solve_lp(&reduced, FEASIBILITY_TOL).unwrap();
        let b = solve_lp(&full, FEASIBILITY_TOL).unwrap();
        assert!((a.objective - b.objective).abs() <= 1e-7 * b.objective.abs().max(1.0));
        // The reduced solution satisfies every monotonicity row.
        let audit = audit_solution(&full_spec, &a.values).unwrap();
        assert!(audit.family("monotone across domains").unwrap() <= 1e-6);
    }
}

#[test]
fn trained_models_pass_the_audit_and_respect_limits() {
    let data = synthetic(7, 21);
    let fc = FeatureConfig::default();
    let dom = domains(&data, 3);
    let p = plant();
    let cond = ConditionalBuyConfig::default();
    let unlimited = RiskConfig::default();
    let base = TrainingSetup {
        data: &data,
        plant: &p,
        features: &fc,
        domains: &dom,
        variant: variant("B"),
        risk: &unlimited,
        cond: &cond,
        penalty: DEFAULT_PENALTY,
    };
    let (policy, betting) = train(&base).unwrap();
    assert_eq!(policy.num_domains(), 3);
    let risk = calibrate_risk_limits(&betting, 0.4, 0.95).unwrap();
    for v in ModelVariant::all() {
        let (_, rep) = train(&TrainingSetup {
            variant: v,
            risk: &risk,
            ..base
        })
        .unwrap();
        assert!(rep.max_violation <= FEASIBILITY_TOL, "{v}");
        let abs: Vec<f64> = rep.imbalance.iter().map(|d| d.abs()).collect();
        match v.risk {
            Risk::Mean => assert!(abs.iter().sum::<f64>() / abs.len() as f64 <= risk.limit_mean + 1e-6),
            Risk::Cvar => assert!(empirical_cvar(&abs, 0.95) <= risk.limit_cvar + 1e-6),
            Risk::Extreme => assert!(abs.iter().copied().fold(0.0, f64::max) <= risk.limit_ext + 1e-6),
            Risk::None => {}
        }
    }
}

#[test]
fn invalid_settings_are_rejected() {
    let data = synthetic(1, 2);
    let fc = FeatureConfig::default();
    let dom = PriceDomains::new(vec![], -500.0, 4000.0).unwrap();
    let p = plant();
    let cond = ConditionalBuyConfig::default();
    let bad_alpha = RiskConfig::unlimited(1.0);
    let setup = TrainingSetup {
        data: &data,
        plant: &p,
        features: &fc,
        domains: &dom,
        variant: variant("T_cvar"),
        risk: &bad_alpha,
        cond: &cond,
        penalty: DEFAULT_PENALTY,
    };
    assert!(matches!(train(&setup), Err(TrainingError::InvalidConfig(_))));
    let ok = RiskConfig::default();
    let setup = TrainingSetup {
        risk: &ok,
        penalty: 0.0,
        ..setup
    };
    assert!(matches!(train(&setup), Err(TrainingError::InvalidConfig(_))));
    assert!("T_foo".parse::<ModelVariant>().is_err());
    assert_eq!(variant("t_CVAR_cond").name(), "T_cvar_cond");
}

proptest! {
    #![proptest_config(ProptestConfig { cases: 6, ..ProptestConfig::default() })]

    /// Tighter risk limits and stricter buying rules only shrink the
    /// feasible set.
    #[test]
    fn objective_shrinks_with_tighter_models(seed in 0u64..1000) {
        let data = synthetic(3, seed);
        let fc = FeatureConfig::default();
        let dom = domains(&data, 2);
        let p = plant();
        let cond = ConditionalBuyConfig::default();
        let unlimited = RiskConfig::default();
        let base = TrainingSetup {
            data: &data, plant: &p, features: &fc, domains: &dom, variant: variant("B"),
            risk: &unlimited, cond: &cond, penalty: DEFAULT_PENALTY,
        };
        let (_, betting) = train(&base).unwrap();
        let loose = calibrate_risk_limits(&betting, 0.6, 0.95).unwrap();
        let tight = calibrate_risk_limits(&betting, 0.3, 0.95).unwrap();
        let obj = |name: &str, risk: &RiskConfig| train(&TrainingSetup { variant: variant(name), risk, ..base }).unwrap().1.objective;
        let tol = 1e-7 * betting.objective.abs().max(1.0);
        let (t_loose, t_tight) = (obj("T_cvar", &loose), obj("T_cvar", &tight));
        prop_assert!(betting.objective >= t_loose - tol);
        prop_assert!(t_loose >= t_tight - tol);
        let (cond_obj, res_obj) = (obj("B_cond", &unlimited), obj("B_res", &unlimited));
        prop_assert!(cond_obj >= res_obj - tol);
        let ext_cond = obj("T_ext_cond", &loose);
        prop_assert!(cond_obj >= ext_cond - tol);
    }
}
