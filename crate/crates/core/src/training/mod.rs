//! Training of linear bidding policies for the twelve model variants.

pub mod audit;
mod calibrate;
pub mod model;

use std::fmt;
use std::str::FromStr;

use hpp_lp::{SolveError, SolverOptions};

pub use calibrate::calibrate_risk_limits;
pub use model::{
    build_training_problem, expected_variable_count, presolve_binaries, BinaryMode, PolicyMode, ProblemSpec,
    ProblemValues, TrainingProblem, VarMap,
};

use crate::electrolyzer::Plant;
use crate::market_data::{DataError, Dataset, FeatureConfig, PriceDomains};
use crate::policy::{PolicyError, PolicySet};
use crate::stats::ImbalanceStats;

#[derive(Debug, thiserror::Error)]
pub enum TrainingError {
    #[error(transparent)]
    Data(#[from] DataError),
    #[error(transparent)]
    Policy(#[from] PolicyError),
    #[error("training set is empty")]
    EmptyDataset,
    #[error("inconsistent dimensions: {0}")]
    InconsistentDimensions(String),
    #[error("hour {hour}: price {price} admits no unique buying indicator with M = {big_m}")]
    AmbiguousBinary { hour: usize, price: f64, big_m: f64 },
    #[error("invalid training settings: {0}")]
    InvalidConfig(String),
    #[error("solver: {0}")]
    Solver(#[from] SolveError),
    #[error("solution violates `{constraint}` by {amount:e}")]
    AuditFailed { constraint: String, amount: f64 },
    #[error("imbalance series is empty")]
    EmptyImbalanceSeries,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Risk {
    None,
    Mean,
    Cvar,
    Extreme,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Regime {
    /// Buying from the grid is allowed at any price.
    Permitted,
    /// No grid purchases.
    Restricted,
    /// Purchases only below the green-hydrogen price threshold.
    Conditional,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct ModelVariant {
    pub risk: Risk,
    pub regime: Regime,
}

impl ModelVariant {
    pub const fn new(risk: Risk, regime: Regime) -> Self {
        Self { risk, regime }
    }

    /// Every risk/regime combination, betting models first.
    pub fn all() -> Vec<ModelVariant> {
        let mut out = Vec::with_capacity(12);
        for risk in [Risk::None, Risk::Mean, Risk::Cvar, Risk::Extreme] {
            for regime in [Regime::Permitted, Regime::Restricted, Regime::Conditional] {
                out.push(Self { risk, regime });
            }
        }
        out
    }

    /// The nine risk-constrained models.
    pub fn trading() -> Vec<ModelVariant> {
        Self::all().into_iter().filter(|v| !v.is_betting()).collect()
    }

    pub fn is_betting(&self) -> bool {
        self.risk == Risk::None
    }

    pub fn name(&self) -> String {
        let base = match self.risk {
            Risk::None => "B",
            Risk::Mean => "T_mean",
            Risk::Cvar => "T_cvar",
            Risk::Extreme => "T_ext",
        };
        let suffix = match self.regime {
            Regime::Permitted => "",
            Regime::Restricted => "_res",
            Regime::Conditional => "_cond",
        };
        format!("{base}{suffix}")
    }
}

impl fmt::Display for ModelVariant {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.name())
    }
}

impl FromStr for ModelVariant {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        Self::all()
            .into_iter()
            .find(|v| v.name().eq_ignore_ascii_case(s.trim()))
            .ok_or_else(|| format!("unknown model variant `{s}`"))
    }
}

/// Imbalance limits in MW.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct RiskConfig {
    pub limit_mean: f64,
    pub limit_cvar: f64,
    pub limit_ext: f64,
    /// Tail level of the CVaR limit.
    pub alpha: f64,
}

impl RiskConfig {
    pub fn unlimited(alpha: f64) -> Self {
        Self {
            limit_mean: f64::INFINITY,
            limit_cvar: f64::INFINITY,
            limit_ext: f64::INFINITY,
            alpha,
        }
    }

    pub fn validate(&self) -> Result<(), TrainingError> {
        if !(self.alpha > 0.0 && self.alpha < 1.0) {
            return Err(TrainingError::InvalidConfig("alpha must lie in (0, 1)".into()));
        }
        if [self.limit_mean, self.limit_cvar, self.limit_ext].iter().any(|l| !(*l >= 0.0)) {
            return Err(TrainingError::InvalidConfig("risk limits must be non-negative".into()));
        }
        Ok(())
    }
}

impl Default for RiskConfig {
    fn default() -> Self {
        Self::unlimited(0.95)
    }
}

/// Price threshold below which grid purchases are allowed in the conditional
/// regime.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct ConditionalBuyConfig {
    pub lambda_s: f64,
    /// Derived from the data when `None`.
    pub big_m: Option<f64>,
    pub epsilon: f64,
}

impl ConditionalBuyConfig {
    pub fn validate(&self) -> Result<(), TrainingError> {
        if !self.lambda_s.is_finite() {
            return Err(TrainingError::InvalidConfig("lambda_s must be finite".into()));
        }
        if !(self.epsilon > 0.0) {
            return Err(TrainingError::InvalidConfig("epsilon must be positive".into()));
        }
        if let Some(m) = self.big_m {
            if !(m > self.epsilon && m.is_finite()) {
                return Err(TrainingError::InvalidConfig("big_m must exceed epsilon".into()));
            }
        }
        Ok(())
    }
}

impl Default for ConditionalBuyConfig {
    fn default() -> Self {
        Self {
            lambda_s: 20.0,
            big_m: None,
            epsilon: 1e-3,
        }
    }
}

pub const DEFAULT_PENALTY: f64 = 1e4;

/// Inputs of one training run.
#[derive(Clone, Copy, Debug)]
pub struct TrainingSetup<'a> {
    pub data: &'a Dataset,
    pub plant: &'a Plant,
    pub features: &'a FeatureConfig,
    pub domains: &'a PriceDomains,
    pub variant: ModelVariant,
    pub risk: &'a RiskConfig,
    pub cond: &'a ConditionalBuyConfig,
    pub penalty: f64,
}

impl<'a> TrainingSetup<'a> {
    pub fn problem_spec(&self) -> ProblemSpec<'a> {
        ProblemSpec {
            data: self.data,
            plant: self.plant,
            variant: self.variant,
            risk: self.risk,
            cond: self.cond,
            penalty: self.penalty,
            policy: PolicyMode::Learned {
                features: self.features,
                domains: self.domains,
            },
            binaries: BinaryMode::Presolved,
            reduce_monotone: true,
        }
    }
}

#[derive(Clone, Debug)]
pub struct TrainingReport {
    pub variant: ModelVariant,
    /// Revenue on the training set, without slack penalties.
    pub profit: f64,
    /// Optimal objective, slack penalties included.
    pub objective: f64,
    pub slack_elec: f64,
    pub slack_h2: f64,
    pub imbalance: Vec<f64>,
    pub trades: Vec<f64>,
    pub consumption: Vec<f64>,
    pub hydrogen: Vec<f64>,
    pub stats: ImbalanceStats,
    pub num_vars: usize,
    pub num_rows: usize,
    pub iterations: usize,
    /// Largest constraint violation found by the independent audit.
    pub max_violation: f64,
}

/// Solved problem with values by meaning.
#[derive(Clone, Debug)]
pub struct SolvedProblem {
    pub objective: f64,
    pub values: ProblemValues,
    pub iterations: usize,
}

/// Solves `prob` and checks primal feasibility to `tol`.
pub fn solve_lp(prob: &TrainingProblem, tol: f64) -> Result<SolvedProblem, TrainingError> {
    let opts = SolverOptions::default();
    let sol = hpp_lp::solve_with(&prob.lp, &opts)?;
    let worst = prob.lp.max_violation(&sol.values);
    if worst > tol {
        return Err(TrainingError::Solver(SolveError::Numerical(format!(
            "solution violates constraints by {worst:e}"
        ))));
    }
    Ok(SolvedProblem {
        objective: sol.objective,
        values: ProblemValues::extract(&prob.vars, &sol.values),
        iterations: sol.iterations,
    })
}

/// Tolerance for constraint checks on returned solutions.
pub const FEASIBILITY_TOL: f64 = 1e-6;

pub fn train(setup: &TrainingSetup<'_>) -> Result<(PolicySet, TrainingReport), TrainingError> {
    setup.risk.validate()?;
    setup.cond.validate()?;
    let spec = setup.problem_spec();
    let prob = build_training_problem(&spec)?;
    let solved = solve_lp(&prob, FEASIBILITY_TOL)?;
    let audit = audit::audit_solution(&spec, &solved.values)?;
    if let Some((constraint, amount)) = audit.worst.clone() {
        if amount > FEASIBILITY_TOL {
            return Err(TrainingError::AuditFailed { constraint, amount });
        }
    }
    let policy = solved.values.policy(setup.features, setup.domains)?;
    let report = make_report(setup.variant, setup, &prob, &solved, audit.max_violation());
    Ok((policy, report))
}

fn make_report(
    variant: ModelVariant,
    setup: &TrainingSetup<'_>,
    prob: &TrainingProblem,
    solved: &SolvedProblem,
    max_violation: f64,
) -> TrainingReport {
    let v = &solved.values;
    let (slack_elec, slack_h2) = v.slack_totals();
    TrainingReport {
        variant,
        profit: v.profit(setup.data, setup.plant.electrolyzer.h2_price),
        objective: solved.objective,
        slack_elec,
        slack_h2,
        imbalance: v.dp.clone(),
        trades: v.p_da.clone(),
        consumption: v.p_h.clone(),
        hydrogen: v.h.clone(),
        stats: ImbalanceStats::of(&v.dp, setup.risk.alpha),
        num_vars: prob.lp.num_vars(),
        num_rows: prob.lp.num_constraints(),
        iterations: solved.iterations,
        max_violation,
    }
}
