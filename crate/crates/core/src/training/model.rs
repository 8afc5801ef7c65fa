//! Assembly of the training and hindsight linear programs.

use hpp_lp::{Cmp, LinearProgram, Sense, SolveError, VarId};

use super::{ConditionalBuyConfig, ModelVariant, Regime, Risk, RiskConfig, TrainingError};
use crate::electrolyzer::Plant;
use crate::market_data::{
    breve_features, build_feature_vector, domain_index, hour_of_day, Dataset, FeatureConfig, HourlyRecord, PriceDomains,
};
use crate::policy::PolicySet;

const INF: f64 = f64::INFINITY;

/// Whether day-ahead quantities are tied to learned policies or left free.
#[derive(Clone, Copy, Debug)]
pub enum PolicyMode<'a> {
    Learned {
        features: &'a FeatureConfig,
        domains: &'a PriceDomains,
    },
    /// Perfect-foresight problem: no policy structure, no curve constraints.
    Hindsight,
}

/// How the conditional-buying indicators enter the problem.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum BinaryMode {
    /// Fixed from the price data before the solve.
    Presolved,
    /// Continuous variables in `[0, 1]` with the Big-M rows, for callers that
    /// branch on them.
    Variables,
}

#[derive(Clone, Copy, Debug)]
pub struct ProblemSpec<'a> {
    pub data: &'a Dataset,
    pub plant: &'a Plant,
    pub variant: ModelVariant,
    pub risk: &'a RiskConfig,
    pub cond: &'a ConditionalBuyConfig,
    /// Objective weight of each unit of slack.
    pub penalty: f64,
    pub policy: PolicyMode<'a>,
    pub binaries: BinaryMode,
    /// Keep monotonicity rows only for hours whose features are not a convex
    /// combination of other hours with the same hour of day. The dropped rows
    /// are implied by the kept ones, so the feasible set does not change.
    pub reduce_monotone: bool,
}

/// Variable handles by meaning. Families that a variant does not use are empty.
#[derive(Clone, Debug, Default)]
pub struct VarMap {
    pub p_da: Vec<VarId>,
    pub p_h: Vec<VarId>,
    pub h: Vec<VarId>,
    pub dp: Vec<VarId>,
    pub dp_abs: Vec<VarId>,
    pub xi: Vec<VarId>,
    pub var: Option<VarId>,
    pub sigma_elec: Vec<VarId>,
    pub sigma_h2: Vec<VarId>,
    /// Flat, hour-major then domain then feature, as in [`PolicySet`].
    pub q_da: Vec<VarId>,
    pub q_h: Vec<VarId>,
    pub b: Vec<VarId>,
}

#[derive(Clone, Debug)]
pub struct TrainingProblem {
    pub lp: LinearProgram,
    pub vars: VarMap,
    /// Presolved buying indicators per hour (conditional regime only).
    pub binaries: Vec<bool>,
    pub big_m: f64,
    pub penalty: f64,
}

/// Big-M used for the conditional regime: large enough for both sides of the
/// indicator rows to be satisfiable at every price in `prices`.
pub fn default_big_m(prices: &[f64], lambda_s: f64) -> f64 {
    let max = prices.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let min = prices.iter().copied().fold(f64::INFINITY, f64::min);
    max.max(lambda_s - min).max(1.0)
}

/// Bounds that the indicator rows place on `b_t` at price `price`.
pub fn indicator_bounds(price: f64, lambda_s: f64, big_m: f64, epsilon: f64) -> (f64, f64) {
    ((lambda_s - price) / big_m, (lambda_s - price + big_m - epsilon) / big_m)
}

/// Fixes each `b_t` to the only integer value its indicator rows admit.
pub fn presolve_binaries(prices: &[f64], cond: &ConditionalBuyConfig) -> Result<(Vec<bool>, f64), TrainingError> {
    let m = cond.big_m.unwrap_or_else(|| default_big_m(prices, cond.lambda_s));
    let mut out = Vec::with_capacity(prices.len());
    for (i, &price) in prices.iter().enumerate() {
        let (lo, hi) = indicator_bounds(price, cond.lambda_s, m, cond.epsilon);
        let one = lo <= 1.0 && 1.0 <= hi;
        let zero = lo <= 0.0 && 0.0 <= hi;
        match (zero, one) {
            (false, true) => out.push(true),
            (true, false) => out.push(false),
            _ => {
                return Err(TrainingError::AmbiguousBinary {
                    hour: i + 1,
                    price,
                    big_m: m,
                })
            }
        }
    }
    Ok((out, m))
}

/// Expected number of variables for a learned-policy problem.
pub fn expected_variable_count(hours: usize, n: usize, k: usize, variant: ModelVariant, online: bool) -> usize {
    let days = hours / 24;
    let mut count = 4 * hours + 2 * 24 * k * n;
    if variant.risk != Risk::None {
        count += hours;
    }
    if variant.risk == Risk::Cvar {
        count += hours + 1;
    }
    if variant.regime != Regime::Permitted && online {
        count += hours + days;
    }
    count
}

pub fn build_training_problem(spec: &ProblemSpec<'_>) -> Result<TrainingProblem, TrainingError> {
    let data = spec.data;
    let plant = spec.plant;
    let el = &plant.electrolyzer;
    let hours = data.len();
    if hours == 0 {
        return Err(TrainingError::EmptyDataset);
    }
    if !(spec.penalty > 0.0 && spec.penalty.is_finite()) {
        return Err(TrainingError::InvalidConfig("slack penalty must be positive".into()));
    }
    let records = data.records();
    let regime = spec.variant.regime;
    let risk = spec.variant.risk;
    let online = plant.electrolyzer_online;
    let slacks = online && regime != Regime::Permitted;
    let buy = plant.max_buy();
    let dp_floor = -(plant.wind_capacity + buy);

    let prices: Vec<f64> = records.iter().map(|r| r.da_price_realized).collect();
    let (binaries, big_m) = if regime == Regime::Conditional {
        presolve_binaries(&prices, spec.cond)?
    } else {
        (Vec::new(), 0.0)
    };
    let as_vars = regime == Regime::Conditional && spec.binaries == BinaryMode::Variables;

    let mut lp = LinearProgram::new(spec.variant.name(), Sense::Maximize);
    let mut v = VarMap::default();

    // Per-hour operating variables.
    for (i, r) in records.iter().enumerate() {
        let t = r.t;
        let (p_lo, dp_lo) = match regime {
            Regime::Permitted => (-buy, dp_floor),
            Regime::Restricted => (0.0, 0.0),
            Regime::Conditional if as_vars => (-buy, dp_floor),
            Regime::Conditional => {
                if binaries[i] {
                    (-buy, dp_floor)
                } else {
                    (0.0, 0.0)
                }
            }
        };
        v.p_da.push(lp.add_var(format!("p_da[{t}]"), p_lo, plant.wind_capacity, r.da_price_realized));
        let (ph_lo, ph_hi) = match (online, slacks) {
            (false, _) => (0.0, 0.0),
            (true, true) => (0.0, el.p_max),
            (true, false) => (el.p_min, el.p_max),
        };
        v.p_h.push(lp.add_var(format!("p_h[{t}]"), ph_lo, ph_hi, 0.0));
        let h_hi = if online { INF } else { 0.0 };
        v.h.push(lp.add_var(format!("h[{t}]"), 0.0, h_hi, el.h2_price));
        v.dp.push(lp.add_var(format!("dp[{t}]"), dp_lo, INF, r.balancing_price_realized));
    }

    if risk != Risk::None {
        let hi = if risk == Risk::Extreme { spec.risk.limit_ext } else { INF };
        for r in records {
            v.dp_abs.push(lp.add_var(format!("dp_abs[{}]", r.t), 0.0, hi, 0.0));
        }
    }
    if risk == Risk::Cvar {
        for r in records {
            v.xi.push(lp.add_var(format!("xi[{}]", r.t), 0.0, INF, 0.0));
        }
        v.var = Some(lp.add_var("VaR", -INF, INF, 0.0));
    }
    if slacks {
        for r in records {
            v.sigma_elec
                .push(lp.add_var(format!("sigma_elec[{}]", r.t), 0.0, el.p_min, -spec.penalty));
        }
        for d in 0..data.num_days() {
            v.sigma_h2.push(lp.add_var(format!("sigma_h2[{}]", d + 1), 0.0, INF, -spec.penalty));
        }
    }
    if as_vars {
        for r in records {
            v.b.push(lp.add_var(format!("b[{}]", r.t), 0.0, 1.0, 0.0));
        }
    }

    // Policy coefficients.
    let learned = match spec.policy {
        PolicyMode::Learned { features, domains } => Some((features, domains)),
        PolicyMode::Hindsight => None,
    };
    if let Some((features, domains)) = learned {
        let (n, k) = (features.len(), domains.count());
        for j in 1..=24 {
            for kk in 1..=k {
                for nn in 1..=n {
                    let lo = if nn == 1 { 0.0 } else { -INF };
                    v.q_da.push(lp.add_var(format!("q_da[{j},{kk},{nn}]"), lo, INF, 0.0));
                }
            }
        }
        for j in 1..=24 {
            for kk in 1..=k {
                for nn in 1..=n {
                    v.q_h.push(lp.add_var(format!("q_h[{j},{kk},{nn}]"), -INF, INF, 0.0));
                }
            }
        }
    }

    // Policy links and curve monotonicity.
    if let Some((features, domains)) = learned {
        let (n, k) = (features.len(), domains.count());
        let offset = |j: usize, kk: usize, nn: usize| ((j - 1) * k + (kk - 1)) * n + (nn - 1);
        for (i, r) in records.iter().enumerate() {
            let t = r.t;
            let j = hour_of_day(t);
            let x = build_feature_vector(r, features)?.x;
            let kk = domain_index(r.da_price_realized, domains)?;
            let da_terms = std::iter::once((v.p_da[i], 1.0))
                .chain(x.iter().enumerate().map(|(nn, &xv)| (v.q_da[offset(j, kk, nn + 1)], -xv)));
            lp.add_constraint(format!("link_da[{t}]"), da_terms, Cmp::Eq, 0.0);
            let h_terms = std::iter::once((v.p_h[i], 1.0))
                .chain(x.iter().enumerate().map(|(nn, &xv)| (v.q_h[offset(j, kk, nn + 1)], -xv)));
            lp.add_constraint(format!("link_h[{t}]"), h_terms, Cmp::Eq, 0.0);
        }
        let rows_for: Vec<usize> = if spec.reduce_monotone {
            supporting_hours(records, features)?
        } else {
            (0..hours).collect()
        };
        for &i in &rows_for {
            let r = &records[i];
            let t = r.t;
            let j = hour_of_day(t);
            let breve = breve_features(r, features)?;
            for kk in 1..k {
                let lambda_k = domains.boundaries()[kk - 1];
                let z = std::iter::once(lambda_k).chain(breve.iter().copied());
                let terms: Vec<(VarId, f64)> = z
                    .enumerate()
                    .flat_map(|(nn, zv)| {
                        [
                            (v.q_da[offset(j, kk + 1, nn + 1)], zv),
                            (v.q_da[offset(j, kk, nn + 1)], -zv),
                        ]
                    })
                    .collect();
                lp.add_constraint(format!("monotone[{t},{kk}]"), terms, Cmp::Ge, 0.0);
            }
        }
    }

    // Plant operation.
    for (i, r) in records.iter().enumerate() {
        let t = r.t;
        lp.add_constraint(
            format!("balance[{t}]"),
            [(v.p_da[i], 1.0), (v.dp[i], 1.0), (v.p_h[i], 1.0)],
            Cmp::Le,
            r.wind_realized,
        );
        if !online {
            continue;
        }
        if slacks {
            lp.add_constraint(
                format!("p_h_min[{t}]"),
                [(v.p_h[i], 1.0), (v.sigma_elec[i], 1.0)],
                Cmp::Ge,
                el.p_min,
            );
        }
        for (s, cut) in el.cuts.iter().enumerate() {
            let mut terms = vec![(v.h[i], 1.0), (v.p_h[i], -cut.slope)];
            // With the electrolyzer pushed below its minimum load, a cut with a
            // negative intercept would forbid any non-negative production, so
            // the slack also lifts the intercept to zero.
            if slacks && cut.intercept < 0.0 && el.p_min > 0.0 {
                terms.push((v.sigma_elec[i], cut.intercept / el.p_min));
            }
            lp.add_constraint(format!("cut[{t},{}]", s + 1), terms, Cmp::Le, cut.intercept);
        }
    }
    if online && el.daily_min > 0.0 {
        for d in 0..data.num_days() {
            let mut terms: Vec<(VarId, f64)> = (24 * d..24 * (d + 1)).map(|i| (v.h[i], 1.0)).collect();
            if slacks {
                terms.push((v.sigma_h2[d], 1.0));
            }
            lp.add_constraint(format!("daily_h2[{}]", d + 1), terms, Cmp::Ge, el.daily_min);
        }
    }

    // Conditional buying with explicit indicators.
    if as_vars {
        for (i, r) in records.iter().enumerate() {
            let t = r.t;
            let (lo, hi) = indicator_bounds(r.da_price_realized, spec.cond.lambda_s, big_m, spec.cond.epsilon);
            lp.add_range(format!("indicator[{t}]"), [(v.b[i], 1.0)], lo, hi);
            lp.add_constraint(format!("dp_buy[{t}]"), [(v.dp[i], 1.0), (v.b[i], -dp_floor)], Cmp::Ge, 0.0);
            lp.add_constraint(format!("da_buy[{t}]"), [(v.p_da[i], 1.0), (v.b[i], buy)], Cmp::Ge, 0.0);
        }
    }

    // Imbalance risk.
    if risk != Risk::None {
        for (i, r) in records.iter().enumerate() {
            let t = r.t;
            lp.add_constraint(format!("abs_pos[{t}]"), [(v.dp_abs[i], 1.0), (v.dp[i], -1.0)], Cmp::Ge, 0.0);
            lp.add_constraint(format!("abs_neg[{t}]"), [(v.dp_abs[i], 1.0), (v.dp[i], 1.0)], Cmp::Ge, 0.0);
        }
    }
    match risk {
        Risk::Mean => {
            let terms = v.dp_abs.iter().map(|&a| (a, 1.0));
            lp.add_constraint("mean_imbalance", terms, Cmp::Le, spec.risk.limit_mean * hours as f64);
        }
        Risk::Cvar => {
            let var = v.var.expect("VaR variable");
            for (i, r) in records.iter().enumerate() {
                lp.add_constraint(
                    format!("excess[{}]", r.t),
                    [(v.xi[i], 1.0), (v.dp_abs[i], -1.0), (var, 1.0)],
                    Cmp::Ge,
                    0.0,
                );
            }
            let w = 1.0 / ((1.0 - spec.risk.alpha) * hours as f64);
            let terms = std::iter::once((var, 1.0)).chain(v.xi.iter().map(|&x| (x, w)));
            lp.add_constraint("cvar_imbalance", terms, Cmp::Le, spec.risk.limit_cvar);
        }
        Risk::None | Risk::Extreme => {}
    }

    Ok(TrainingProblem {
        lp,
        vars: v,
        binaries,
        big_m,
        penalty: spec.penalty,
    })
}

/// Indices of the hours whose monotonicity rows are not implied by others.
///
/// For a fixed hour of day and domain pair the rows read `d · [λ_k, y_t, 1] >= 0`
/// with `y_t` the forecast features of hour `t`. They hold for every `t` as
/// soon as they hold at the vertices of the convex hull of the `y_t`, so
/// hours inside that hull are dropped. Hours are tested one at a time against
/// the hours still kept, which keeps one representative of repeated points.
pub fn supporting_hours(records: &[HourlyRecord], features: &FeatureConfig) -> Result<Vec<usize>, TrainingError> {
    let mut by_hour: Vec<Vec<(usize, Vec<f64>)>> = vec![Vec::new(); 24];
    for (i, r) in records.iter().enumerate() {
        let mut y = breve_features(r, features)?;
        y.pop(); // constant
        by_hour[hour_of_day(r.t) - 1].push((i, y));
    }
    let mut keep = Vec::new();
    for group in &mut by_hour {
        let mut kept: Vec<bool> = vec![true; group.len()];
        for s in 0..group.len() {
            if group[..s].iter().zip(&kept).any(|((_, y), &k)| k && *y == group[s].1) {
                kept[s] = false;
                continue;
            }
            let others: Vec<&[f64]> = group
                .iter()
                .zip(&kept)
                .enumerate()
                .filter(|&(o, (_, &k))| o != s && k)
                .map(|(_, ((_, y), _))| y.as_slice())
                .collect();
            if !others.is_empty() && in_convex_hull(&group[s].1, &others) {
                kept[s] = false;
            }
        }
        keep.extend(group.iter().zip(&kept).filter(|(_, &k)| k).map(|((i, _), _)| *i));
    }
    keep.sort_unstable();
    Ok(keep)
}

fn in_convex_hull(point: &[f64], others: &[&[f64]]) -> bool {
    let mut lp = LinearProgram::new("hull", Sense::Minimize);
    let w: Vec<VarId> = (0..others.len()).map(|o| lp.add_var(format!("w{o}"), 0.0, INF, 0.0)).collect();
    lp.add_constraint("sum", w.iter().map(|&v| (v, 1.0)), Cmp::Eq, 1.0);
    for (d, &target) in point.iter().enumerate() {
        let terms = w.iter().zip(others).map(|(&v, y)| (v, y[d]));
        lp.add_constraint(format!("coord{d}"), terms, Cmp::Eq, target);
    }
    match hpp_lp::solve(&lp) {
        Ok(sol) => lp.max_violation(&sol.values) <= 1e-9,
        Err(SolveError::Infeasible) => false,
        // Keeping the hour is always safe.
        Err(_) => false,
    }
}

/// Solution values by meaning.
#[derive(Clone, Debug, Default)]
pub struct ProblemValues {
    pub p_da: Vec<f64>,
    pub p_h: Vec<f64>,
    pub h: Vec<f64>,
    pub dp: Vec<f64>,
    pub dp_abs: Vec<f64>,
    pub xi: Vec<f64>,
    pub var: Option<f64>,
    pub sigma_elec: Vec<f64>,
    pub sigma_h2: Vec<f64>,
    pub q_da: Vec<f64>,
    pub q_h: Vec<f64>,
    pub b: Vec<f64>,
}

impl ProblemValues {
    pub fn extract(vars: &VarMap, x: &[f64]) -> Self {
        let get = |ids: &[VarId]| ids.iter().map(|id| x[id.0]).collect::<Vec<f64>>();
        Self {
            p_da: get(&vars.p_da),
            p_h: get(&vars.p_h),
            h: get(&vars.h),
            dp: get(&vars.dp),
            dp_abs: get(&vars.dp_abs),
            xi: get(&vars.xi),
            var: vars.var.map(|id| x[id.0]),
            sigma_elec: get(&vars.sigma_elec),
            sigma_h2: get(&vars.sigma_h2),
            q_da: get(&vars.q_da),
            q_h: get(&vars.q_h),
            b: get(&vars.b),
        }
    }

    pub fn policy(&self, features: &FeatureConfig, domains: &PriceDomains) -> Result<PolicySet, TrainingError> {
        Ok(PolicySet::from_flat(
            self.q_da.clone(),
            self.q_h.clone(),
            features.clone(),
            domains.clone(),
        )?)
    }

    /// Revenue without slack penalties.
    pub fn profit(&self, data: &Dataset, h2_price: f64) -> f64 {
        data.records()
            .iter()
            .enumerate()
            .map(|(i, r)| {
                self.p_da[i] * r.da_price_realized + self.h[i] * h2_price + self.dp[i] * r.balancing_price_realized
            })
            .sum()
    }

    pub fn slack_totals(&self) -> (f64, f64) {
        (self.sigma_elec.iter().sum(), self.sigma_h2.iter().sum())
    }
}
