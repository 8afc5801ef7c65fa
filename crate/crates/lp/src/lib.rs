//! Sparse linear programming: a model builder, a bounded-variable revised
//! simplex solver and a fixed-format MPS writer.
//!
//! ```
//! use hpp_lp::{Cmp, LinearProgram, Sense};
//!
//! let mut lp = LinearProgram::new("toy", Sense::Maximize);
//! let x = lp.add_var("x", 0.0, f64::INFINITY, 3.0);
//! let y = lp.add_var("y", 0.0, f64::INFINITY, 2.0);
//! lp.add_constraint("cap", [(x, 1.0), (y, 1.0)], Cmp::Le, 4.0);
//! lp.add_constraint("mix", [(x, 1.0), (y, 3.0)], Cmp::Le, 6.0);
//! let sol = hpp_lp::solve(&lp).unwrap();
//! assert!((sol.objective - 12.0).abs() < 1e-9);
//! ```

mod lu;
pub mod mps;
mod problem;
mod simplex;
mod sparse;

pub use problem::{Cmp, Constraint, LinearProgram, RowId, Sense, VarId, Variable};

use sparse::Compressed;

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum SolveError {
    #[error("problem is infeasible")]
    Infeasible,
    #[error("problem is unbounded")]
    Unbounded,
    #[error("iteration limit reached after {iterations} iterations")]
    IterationLimit { iterations: usize },
    #[error("invalid problem: {0}")]
    InvalidProblem(String),
    #[error("numerical trouble: {0}")]
    Numerical(String),
}

#[derive(Debug, Clone)]
pub struct SolverOptions {
    pub max_iterations: usize,
    /// Absolute primal feasibility tolerance in the scaled problem.
    pub primal_tol: f64,
    /// Absolute reduced-cost tolerance in the scaled problem.
    pub dual_tol: f64,
    /// Basis updates between refactorizations.
    pub refactor_interval: usize,
    pub scaling: bool,
}

impl Default for SolverOptions {
    fn default() -> Self {
        Self {
            max_iterations: 2_000_000,
            primal_tol: 1e-9,
            dual_tol: 1e-9,
            refactor_interval: 100,
            scaling: true,
        }
    }
}

#[derive(Debug, Clone)]
pub struct Solution {
    /// Objective in the problem's own sense.
    pub objective: f64,
    pub values: Vec<f64>,
    pub row_activities: Vec<f64>,
    /// Marginal change of the objective per unit of row right-hand side.
    pub duals: Vec<f64>,
    pub iterations: usize,
}

impl Solution {
    pub fn value(&self, var: VarId) -> f64 {
        self.values[var.0]
    }

    pub fn activity(&self, row: RowId) -> f64 {
        self.row_activities[row.0]
    }

    pub fn dual(&self, row: RowId) -> f64 {
        self.duals[row.0]
    }
}

pub fn solve(lp: &LinearProgram) -> Result<Solution, SolveError> {
    solve_with(lp, &SolverOptions::default())
}

pub fn solve_with(lp: &LinearProgram, opts: &SolverOptions) -> Result<Solution, SolveError> {
    validate(lp)?;
    let scaled = Scaled::new(lp, opts.scaling);
    let outcome = simplex::solve(&scaled.model, opts)?;

    let n = lp.num_vars();
    let mut values: Vec<f64> = (0..n).map(|j| outcome.x[j] * scaled.col_scale[j]).collect();
    // Snap to bounds that the solver reached up to rounding from unscaling.
    for (v, var) in values.iter_mut().zip(lp.variables()) {
        if *v < var.lower {
            *v = var.lower;
        } else if *v > var.upper {
            *v = var.upper;
        }
    }
    let row_activities: Vec<f64> = lp.constraints().iter().map(|r| r.activity(&values)).collect();
    let sign = match lp.sense() {
        Sense::Minimize => 1.0,
        Sense::Maximize => -1.0,
    };
    let duals = outcome
        .pi
        .iter()
        .zip(&scaled.row_scale)
        .map(|(p, r)| sign * p * r / scaled.cost_scale)
        .collect();
    Ok(Solution {
        objective: lp.objective_value(&values),
        values,
        row_activities,
        duals,
        iterations: outcome.iterations,
    })
}

fn validate(lp: &LinearProgram) -> Result<(), SolveError> {
    for v in lp.variables() {
        if v.lower.is_nan() || v.upper.is_nan() || !v.objective.is_finite() {
            return Err(SolveError::InvalidProblem(format!("variable {} has a non-numeric entry", v.name)));
        }
        if v.lower == f64::INFINITY || v.upper == f64::NEG_INFINITY {
            return Err(SolveError::InvalidProblem(format!("variable {} has an empty bound range", v.name)));
        }
        if v.lower > v.upper {
            return Err(SolveError::Infeasible);
        }
    }
    for r in lp.constraints() {
        if r.lower.is_nan() || r.upper.is_nan() || r.terms.iter().any(|t| !t.1.is_finite()) {
            return Err(SolveError::InvalidProblem(format!("row {} has a non-numeric entry", r.name)));
        }
        if r.lower == f64::INFINITY || r.upper == f64::NEG_INFINITY {
            return Err(SolveError::InvalidProblem(format!("row {} has an empty bound range", r.name)));
        }
        if r.lower > r.upper {
            return Err(SolveError::Infeasible);
        }
    }
    Ok(())
}

/// The problem in minimization form after geometric row/column scaling.
/// Scaled variable `j` equals the original divided by `col_scale[j]`; scaled
/// row `i` is the original multiplied by `row_scale[i]`.
struct Scaled {
    model: simplex::Model,
    row_scale: Vec<f64>,
    col_scale: Vec<f64>,
    cost_scale: f64,
}

impl Scaled {
    fn new(lp: &LinearProgram, scaling: bool) -> Self {
        let n = lp.num_vars();
        let m = lp.num_constraints();
        let mut triplets: Vec<(usize, usize, f64)> = Vec::with_capacity(lp.num_nonzeros());
        for (i, r) in lp.constraints().iter().enumerate() {
            for &(v, a) in &r.terms {
                triplets.push((i, v.0, a));
            }
        }
        let mut row_scale = vec![1.0; m];
        let mut col_scale = vec![1.0; n];
        if scaling {
            for _ in 0..6 {
                let mut lo = vec![f64::INFINITY; m];
                let mut hi = vec![0.0f64; m];
                for &(i, j, a) in &triplets {
                    let v = (a * col_scale[j]).abs();
                    lo[i] = lo[i].min(v);
                    hi[i] = hi[i].max(v);
                }
                for i in 0..m {
                    if hi[i] > 0.0 {
                        row_scale[i] = pow2(1.0 / (lo[i] * hi[i]).sqrt());
                    }
                }
                let mut lo = vec![f64::INFINITY; n];
                let mut hi = vec![0.0f64; n];
                for &(i, j, a) in &triplets {
                    let v = (a * row_scale[i]).abs();
                    lo[j] = lo[j].min(v);
                    hi[j] = hi[j].max(v);
                }
                for j in 0..n {
                    if hi[j] > 0.0 {
                        col_scale[j] = pow2(1.0 / (lo[j] * hi[j]).sqrt());
                    }
                }
            }
        }

        let sign = match lp.sense() {
            Sense::Minimize => 1.0,
            Sense::Maximize => -1.0,
        };
        let max_cost = lp
            .variables()
            .iter()
            .zip(&col_scale)
            .map(|(v, s)| (v.objective * s).abs())
            .fold(0.0, f64::max);
        let cost_scale = if scaling && max_cost > 0.0 { pow2(1.0 / max_cost) } else { 1.0 };

        let mut cost = Vec::with_capacity(n + m);
        let mut lb = Vec::with_capacity(n + m);
        let mut ub = Vec::with_capacity(n + m);
        for (v, &s) in lp.variables().iter().zip(&col_scale) {
            cost.push(sign * v.objective * s * cost_scale);
            lb.push(v.lower / s);
            ub.push(v.upper / s);
        }
        for (r, &s) in lp.constraints().iter().zip(&row_scale) {
            cost.push(0.0);
            lb.push(r.lower * s);
            ub.push(r.upper * s);
        }

        let scaled: Vec<(usize, usize, f64)> = triplets
            .iter()
            .map(|&(i, j, a)| (i, j, a * row_scale[i] * col_scale[j]))
            .collect();
        let rows = Compressed::from_triplets(m, &scaled);
        let by_col: Vec<(usize, usize, f64)> = scaled.iter().map(|&(i, j, a)| (j, i, a)).collect();
        let cols = Compressed::from_triplets(n, &by_col);

        Self {
            model: simplex::Model {
                n,
                m,
                cols,
                rows,
                cost,
                lb,
                ub,
            },
            row_scale,
            col_scale,
            cost_scale,
        }
    }
}

fn pow2(v: f64) -> f64 {
    if !v.is_finite() || v <= 0.0 {
        return 1.0;
    }
    2f64.powi(v.log2().round().clamp(-60.0, 60.0) as i32)
}
