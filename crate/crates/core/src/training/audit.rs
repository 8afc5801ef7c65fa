//! Re-evaluation of every constraint family from the raw data, independent of
//! how the problem was assembled.

use super::model::{PolicyMode, ProblemSpec, ProblemValues};
use super::{Regime, Risk, TrainingError};
use crate::market_data::hour_of_day;
use crate::stats::empirical_cvar;

#[derive(Clone, Debug, Default)]
pub struct AuditReport {
    /// Largest violation per constraint family, zero when satisfied.
    pub families: Vec<(String, f64)>,
    pub worst: Option<(String, f64)>,
    /// Revenue minus slack penalties, recomputed from the values.
    pub objective: f64,
}

impl AuditReport {
    pub fn max_violation(&self) -> f64 {
        self.worst.as_ref().map_or(0.0, |w| w.1)
    }

    pub fn family(&self, name: &str) -> Option<f64> {
        self.families.iter().find(|f| f.0 == name).map(|f| f.1)
    }

    fn record(&mut self, name: &str, violation: f64) {
        let v = violation.max(0.0);
        match self.families.iter_mut().find(|f| f.0 == name) {
            Some(f) => f.1 = f.1.max(v),
            None => self.families.push((name.to_string(), v)),
        }
        if self.worst.as_ref().is_none_or(|w| v > w.1) {
            self.worst = Some((name.to_string(), v));
        }
    }
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

pub fn audit_solution(spec: &ProblemSpec<'_>, v: &ProblemValues) -> Result<AuditReport, TrainingError> {
    let data = spec.data;
    let records = data.records();
    let hours = records.len();
    let plant = spec.plant;
    let el = &plant.electrolyzer;
    let regime = spec.variant.regime;
    let risk = spec.variant.risk;
    let online = plant.electrolyzer_online;
    let slacks = online && regime != Regime::Permitted;
    let mut rep = AuditReport::default();

    if v.p_da.len() != hours || v.dp.len() != hours || v.p_h.len() != hours || v.h.len() != hours {
        return Err(TrainingError::InconsistentDimensions("operating variables".into()));
    }
    let sig_e = |i: usize| if slacks { v.sigma_elec[i] } else { 0.0 };
    let sig_h = |d: usize| if slacks { v.sigma_h2[d] } else { 0.0 };

    // Policy links and monotone curves.
    if let PolicyMode::Learned { features, domains } = spec.policy {
        let n = features.len();
        let k_count = domains.count();
        let coeffs = |q: &[f64], j: usize, k: usize| {
            let s = ((j - 1) * k_count + (k - 1)) * n;
            q[s..s + n].to_vec()
        };
        for (i, r) in records.iter().enumerate() {
            let j = hour_of_day(r.t);
            let lambda = r.da_price_realized;
            let k = 1 + domains.boundaries().iter().filter(|&&b| b < lambda).count();
            let x: Vec<f64> = features
                .names()
                .iter()
                .map(|name| r.feature(name).ok_or_else(|| TrainingError::InconsistentDimensions(name.clone())))
                .collect::<Result<_, _>>()?;
            rep.record("policy link (power)", (v.p_da[i] - dot(&coeffs(&v.q_da, j, k), &x)).abs());
            rep.record("policy link (electrolyzer)", (v.p_h[i] - dot(&coeffs(&v.q_h, j, k), &x)).abs());
            for kk in 1..k_count {
                let mut z = x.clone();
                z[0] = domains.boundaries()[kk - 1];
                let diff: Vec<f64> = coeffs(&v.q_da, j, kk + 1)
                    .iter()
                    .zip(coeffs(&v.q_da, j, kk))
                    .map(|(a, b)| a - b)
                    .collect();
                rep.record("monotone across domains", -dot(&diff, &z));
            }
        }
        for j in 1..=24 {
            rep.record("non-negative slope", -coeffs(&v.q_da, j, 1)[0]);
        }
    }

    // Operation.
    for (i, r) in records.iter().enumerate() {
        rep.record("power balance", v.p_da[i] + v.dp[i] + v.p_h[i] - r.wind_realized);
        rep.record("sell limit", v.p_da[i] - plant.wind_capacity);
        let buying = match regime {
            Regime::Permitted => true,
            Regime::Restricted => false,
            Regime::Conditional => r.da_price_realized < spec.cond.lambda_s,
        };
        if buying {
            rep.record("buy limit", -plant.max_buy() - v.p_da[i]);
        } else {
            rep.record("no day-ahead purchase", -v.p_da[i]);
            rep.record("no balancing purchase", -v.dp[i]);
        }
        if online {
            rep.record("electrolyzer max", v.p_h[i] - el.p_max);
            rep.record("electrolyzer min", el.p_min - v.p_h[i] - sig_e(i));
            rep.record("hydrogen non-negative", -v.h[i]);
            for c in &el.cuts {
                let lift = if slacks && c.intercept < 0.0 && el.p_min > 0.0 {
                    -c.intercept * sig_e(i) / el.p_min
                } else {
                    0.0
                };
                rep.record("production cuts", v.h[i] - (c.slope * v.p_h[i] + c.intercept + lift));
            }
            if slacks {
                rep.record("slack range", -v.sigma_elec[i]);
                rep.record("slack range", v.sigma_elec[i] - el.p_min);
            }
        } else {
            rep.record("electrolyzer offline", v.p_h[i].abs().max(v.h[i].abs()));
        }
    }
    if online && el.daily_min > 0.0 {
        for d in 0..data.num_days() {
            let produced: f64 = v.h[24 * d..24 * (d + 1)].iter().sum();
            rep.record("daily hydrogen", el.daily_min - produced - sig_h(d));
            if slacks {
                rep.record("slack range", -v.sigma_h2[d]);
            }
        }
    }

    // Risk.
    if risk != Risk::None {
        for i in 0..hours {
            rep.record("absolute imbalance", v.dp[i].abs() - v.dp_abs[i]);
        }
        let abs: Vec<f64> = v.dp.iter().map(|d| d.abs()).collect();
        let h = hours as f64;
        match risk {
            Risk::Mean => {
                rep.record("mean imbalance", v.dp_abs.iter().sum::<f64>() / h - spec.risk.limit_mean);
                rep.record("empirical mean", abs.iter().sum::<f64>() / h - spec.risk.limit_mean);
            }
            Risk::Cvar => {
                let var = v.var.ok_or_else(|| TrainingError::InconsistentDimensions("VaR".into()))?;
                for i in 0..hours {
                    rep.record("tail excess", v.dp_abs[i] - var - v.xi[i]);
                    rep.record("tail excess", -v.xi[i]);
                }
                let tail = var + v.xi.iter().sum::<f64>() / ((1.0 - spec.risk.alpha) * h);
                rep.record("cvar imbalance", tail - spec.risk.limit_cvar);
                rep.record("empirical cvar", empirical_cvar(&abs, spec.risk.alpha) - spec.risk.limit_cvar);
            }
            Risk::Extreme => {
                for i in 0..hours {
                    rep.record("extreme imbalance", v.dp_abs[i] - spec.risk.limit_ext);
                }
                rep.record("empirical max", abs.iter().copied().fold(0.0, f64::max) - spec.risk.limit_ext);
            }
            Risk::None => unreachable!(),
        }
    }

    let revenue = v.profit(data, el.h2_price);
    let slack_sum: f64 = v.sigma_elec.iter().chain(&v.sigma_h2).sum();
    rep.objective = revenue - spec.penalty * slack_sum;
    Ok(rep)
}
