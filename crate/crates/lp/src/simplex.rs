//! Bounded-variable revised simplex.
//!
//! The problem is kept in computational form `A x - r = 0` where every row
//! gets a logical variable `r_i` carrying the row bounds. Primal
//! infeasibility is removed with a dual simplex pass (steepest-edge pricing)
//! on costs that are made dual feasible: bound flips first, temporary bounds
//! on one-sided variables next, cost shifts as a last resort. The primal
//! simplex with Devex pricing then optimizes the real costs. Long runs of degenerate pivots switch both passes to Bland's
//! smallest-index rule until progress resumes.

use crate::lu::{Basis, LuFactors};
use crate::sparse::Compressed;
use crate::{SolveError, SolverOptions};

const NONE: usize = usize::MAX;
const PIVOT_TOL: f64 = 1e-7;
const DEGENERATE_STEP: f64 = 1e-12;
const DEGENERATE_RUN: usize = 60;
const DEVEX_RESET: f64 = 1e8;
const MIN_WEIGHT: f64 = 1e-6;
/// Relative size of the cost perturbation applied before the dual pass.
const PERTURBATION: f64 = 1e-7;
/// Distance of a temporary bound from the finite bound of a one-sided
/// variable, and the factor it grows by while the variable sits on it.
const ARTIFICIAL_BOUND: f64 = 1e6;
const ARTIFICIAL_GROWTH: f64 = 100.0;
const ARTIFICIAL_LIMIT: f64 = 1e12;
/// Wrong-signed reduced costs beyond this get an artificial bound instead of
/// a cost shift.
const BOX_THRESHOLD: f64 = 1e-6;

/// A scaled minimization problem over `n` structural and `m` logical variables.
#[derive(Debug)]
pub(crate) struct Model {
    pub(crate) n: usize,
    pub(crate) m: usize,
    pub(crate) cols: Compressed,
    pub(crate) rows: Compressed,
    /// Length `n + m`; logical costs are zero.
    pub(crate) cost: Vec<f64>,
    pub(crate) lb: Vec<f64>,
    pub(crate) ub: Vec<f64>,
}

#[derive(Debug)]
pub(crate) struct Outcome {
    /// Values of all `n + m` variables.
    pub(crate) x: Vec<f64>,
    /// Row duals.
    pub(crate) pi: Vec<f64>,
    pub(crate) iterations: usize,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
enum Status {
    Basic,
    Lower,
    Upper,
    Free,
}

enum PivotCheck {
    Accept,
    Retry,
    Reject,
}

enum PrimalStep {
    Leave { slot: usize, t: f64, to_upper: bool },
    Flip { t: f64 },
    Unbounded,
}

struct Simplex<'a> {
    model: &'a Model,
    opts: &'a SolverOptions,
    cost: Vec<f64>,
    /// Working bounds; differ from the model where an artificial bound is set.
    lb: Vec<f64>,
    ub: Vec<f64>,
    artificial: Vec<bool>,
    /// Variables whose artificial bound grew past the limit; they get cost
    /// shifts from then on.
    unboxed: Vec<bool>,
    status: Vec<Status>,
    head: Vec<usize>,
    slot_of: Vec<usize>,
    x: Vec<f64>,
    d: Vec<f64>,
    pi: Vec<f64>,
    basis: Option<Basis>,
    primal_weights: Vec<f64>,
    dual_weights: Vec<f64>,
    iterations: usize,
    logical_idx: Vec<usize>,
    neg_one: Vec<f64>,
    col: Vec<f64>,
    rho: Vec<f64>,
    tau: Vec<f64>,
    row_alpha: Vec<f64>,
    rhs: Vec<f64>,
    slot_buf: Vec<f64>,
}

pub(crate) fn solve(model: &Model, opts: &SolverOptions) -> Result<Outcome, SolveError> {
    let mut s = Simplex::new(model, opts);
    s.run()?;
    Ok(Outcome {
        x: s.x,
        pi: s.pi,
        iterations: s.iterations,
    })
}

/// Deterministic value in `[0, 1)` derived from `j`.
fn jitter(j: usize) -> f64 {
    let mut z = (j as u64).wrapping_add(0x9e37_79b9_7f4a_7c15);
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^= z >> 31;
    (z >> 11) as f64 / (1u64 << 53) as f64
}

impl<'a> Simplex<'a> {
    fn new(model: &'a Model, opts: &'a SolverOptions) -> Self {
        let (n, m) = (model.n, model.m);
        let mut status = vec![Status::Basic; n + m];
        let mut x = vec![0.0; n + m];
        for j in 0..n {
            let (lb, ub, c) = (model.lb[j], model.ub[j], model.cost[j]);
            let st = match (lb.is_finite(), ub.is_finite()) {
                (true, true) => {
                    if c < 0.0 {
                        Status::Upper
                    } else {
                        Status::Lower
                    }
                }
                (true, false) => Status::Lower,
                (false, true) => Status::Upper,
                (false, false) => Status::Free,
            };
            status[j] = st;
            x[j] = match st {
                Status::Lower => lb,
                Status::Upper => ub,
                _ => 0.0,
            };
        }
        let mut slot_of = vec![NONE; n + m];
        let head: Vec<usize> = (0..m).map(|i| n + i).collect();
        for (s, &j) in head.iter().enumerate() {
            slot_of[j] = s;
        }
        Self {
            model,
            opts,
            cost: model.cost.clone(),
            lb: model.lb.clone(),
            ub: model.ub.clone(),
            artificial: vec![false; n + m],
            unboxed: vec![false; n + m],
            status,
            head,
            slot_of,
            x,
            d: vec![0.0; n + m],
            pi: vec![0.0; m],
            basis: None,
            primal_weights: vec![1.0; n + m],
            dual_weights: vec![1.0; m],
            iterations: 0,
            logical_idx: (0..m).collect(),
            neg_one: vec![-1.0; m],
            col: vec![0.0; m],
            rho: vec![0.0; m],
            tau: vec![0.0; m],
            row_alpha: vec![0.0; n + m],
            rhs: vec![0.0; m],
            slot_buf: vec![0.0; m],
        }
    }

    fn column(&self, j: usize) -> (&[usize], &[f64]) {
        let n = self.model.n;
        if j < n {
            self.model.cols.get(j)
        } else {
            let i = j - n;
            (&self.logical_idx[i..i + 1], &self.neg_one[i..i + 1])
        }
    }

    fn basis(&mut self) -> &mut Basis {
        self.basis.as_mut().expect("basis factorized")
    }

    fn refactor(&mut self) -> Result<(), SolveError> {
        let m = self.model.m;
        let n = self.model.n;
        for _ in 0..=m {
            let result = {
                let head = &self.head;
                let this = &*self;
                LuFactors::factorize(m, |s| this.column(head[s]), 0.1, 1e-11)
            };
            match result {
                Ok(lu) => {
                    self.basis = Some(Basis::new(lu));
                    return Ok(());
                }
                Err(singular) => {
                    for (&slot, &row) in singular.slots.iter().zip(&singular.rows) {
                        let old = self.head[slot];
                        self.make_nonbasic_near(old);
                        let logical = n + row;
                        self.head[slot] = logical;
                        self.slot_of[logical] = slot;
                        self.status[logical] = Status::Basic;
                        self.dual_weights[slot] = 1.0;
                    }
                }
            }
        }
        Err(SolveError::Numerical("basis repair did not converge".into()))
    }

    fn make_nonbasic_near(&mut self, j: usize) {
        let (lb, ub, v) = (self.lb[j], self.ub[j], self.x[j]);
        self.slot_of[j] = NONE;
        let st = match (lb.is_finite(), ub.is_finite()) {
            (true, true) => {
                if (v - lb).abs() <= (ub - v).abs() {
                    Status::Lower
                } else {
                    Status::Upper
                }
            }
            (true, false) => Status::Lower,
            (false, true) => Status::Upper,
            (false, false) => Status::Free,
        };
        self.status[j] = st;
        self.x[j] = match st {
            Status::Lower => lb,
            Status::Upper => ub,
            _ => 0.0,
        };
    }

    /// Recomputes basic values from the nonbasic ones.
    fn compute_primal(&mut self) {
        let m = self.model.m;
        let mut rhs = std::mem::take(&mut self.rhs);
        rhs.iter_mut().for_each(|v| *v = 0.0);
        for j in 0..self.model.n + m {
            if self.status[j] == Status::Basic {
                continue;
            }
            let xj = self.x[j];
            if xj == 0.0 {
                continue;
            }
            let (idx, val) = self.column(j);
            for (&i, &a) in idx.iter().zip(val) {
                rhs[i] -= a * xj;
            }
        }
        let mut out = std::mem::take(&mut self.slot_buf);
        self.basis().ftran(&rhs, &mut out);
        for s in 0..m {
            let j = self.head[s];
            self.x[j] = out[s];
        }
        self.rhs = rhs;
        self.slot_buf = out;
    }

    fn compute_duals(&mut self) {
        let m = self.model.m;
        let mut cb = std::mem::take(&mut self.slot_buf);
        for s in 0..m {
            cb[s] = self.cost[self.head[s]];
        }
        let mut pi = std::mem::take(&mut self.pi);
        self.basis().btran(&mut cb, &mut pi);
        self.pi = pi;
        self.slot_buf = cb;
        for j in 0..self.model.n + m {
            self.d[j] = if self.status[j] == Status::Basic {
                0.0
            } else {
                self.reduced_cost(j)
            };
        }
    }

    fn reduced_cost(&self, j: usize) -> f64 {
        let (idx, val) = self.column(j);
        let mut dj = self.cost[j];
        for (&i, &a) in idx.iter().zip(val) {
            dj -= a * self.pi[i];
        }
        dj
    }

    fn primal_infeasibility(&self, j: usize) -> f64 {
        let v = self.x[j];
        (self.lb[j] - v).max(v - self.ub[j]).max(0.0)
    }

    fn max_primal_infeasibility(&self) -> f64 {
        self.head
            .iter()
            .map(|&j| self.primal_infeasibility(j))
            .fold(0.0, f64::max)
    }

    fn dual_infeasibility(&self, j: usize) -> f64 {
        if self.lb[j] == self.ub[j] {
            return 0.0;
        }
        match self.status[j] {
            Status::Basic => 0.0,
            Status::Lower => (-self.d[j]).max(0.0),
            Status::Upper => self.d[j].max(0.0),
            Status::Free => self.d[j].abs(),
        }
    }

    fn max_dual_infeasibility(&self) -> f64 {
        (0..self.model.n + self.model.m)
            .map(|j| self.dual_infeasibility(j))
            .fold(0.0, f64::max)
    }

    fn check_iterations(&self) -> Result<(), SolveError> {
        if self.iterations >= self.opts.max_iterations {
            Err(SolveError::IterationLimit {
                iterations: self.iterations,
            })
        } else {
            Ok(())
        }
    }

    fn fresh_start(&mut self) -> Result<(), SolveError> {
        self.refactor()?;
        self.compute_primal();
        self.compute_duals();
        Ok(())
    }

    /// Compares the pivot element from the column and the row computation.
    /// On disagreement with updates pending the factors are rebuilt and
    /// `Retry` is returned; on fresh factors the column value is trusted
    /// unless it is too small to pivot on.
    fn check_pivot(&mut self, alpha_col: f64, alpha_row: f64) -> Result<PivotCheck, SolveError> {
        let mismatch = (alpha_col - alpha_row).abs() > 1e-7 * (1.0 + alpha_row.abs());
        if mismatch && self.basis().num_updates() > 0 {
            self.fresh_start()?;
            return Ok(PivotCheck::Retry);
        }
        if alpha_col.abs() < PIVOT_TOL || alpha_col * alpha_row <= 0.0 {
            return Ok(PivotCheck::Reject);
        }
        Ok(PivotCheck::Accept)
    }

    fn run(&mut self) -> Result<(), SolveError> {
        self.fresh_start()?;
        let (ptol, dtol) = (self.opts.primal_tol, self.opts.dual_tol);
        for round in 0..40 {
            if self.max_primal_infeasibility() > ptol {
                if round == 0 {
                    self.perturb_costs();
                }
                self.make_dual_feasible(dtol);
                self.dual_phase()?;
                self.cost.copy_from_slice(&self.model.cost);
                self.fresh_start()?;
                continue;
            }
            if self.release_artificial_bounds() {
                self.fresh_start()?;
                continue;
            }
            if self.max_dual_infeasibility() > dtol {
                self.primal_phase()?;
                self.fresh_start()?;
                continue;
            }
            return Ok(());
        }
        Err(SolveError::Numerical(
            "simplex phases did not settle on an optimal basis".into(),
        ))
    }

    /// Drops artificial bounds that are not binding and widens the others.
    /// Returns whether any variable had to move.
    fn release_artificial_bounds(&mut self) -> bool {
        let mut moved = false;
        for j in 0..self.model.n + self.model.m {
            if !self.artificial[j] {
                continue;
            }
            let (lb, ub) = (self.model.lb[j], self.model.ub[j]);
            let at_artificial = match self.status[j] {
                Status::Upper => !ub.is_finite(),
                Status::Lower => !lb.is_finite(),
                _ => false,
            };
            if !at_artificial {
                self.lb[j] = lb;
                self.ub[j] = ub;
                self.artificial[j] = false;
                continue;
            }
            moved = true;
            let width = (self.ub[j] - self.lb[j]) * ARTIFICIAL_GROWTH;
            if width > ARTIFICIAL_LIMIT {
                // Give up on the box; the phases sort out unboundedness.
                self.lb[j] = lb;
                self.ub[j] = ub;
                self.artificial[j] = false;
                self.unboxed[j] = true;
                if lb.is_finite() {
                    self.status[j] = Status::Lower;
                    self.x[j] = lb;
                } else {
                    self.status[j] = Status::Upper;
                    self.x[j] = ub;
                }
            } else if ub.is_finite() {
                self.lb[j] = ub - width;
                self.x[j] = self.lb[j];
            } else {
                self.ub[j] = lb + width;
                self.x[j] = self.ub[j];
            }
        }
        moved
    }

    /// Moves each nonbasic structural cost a small, index-dependent amount in
    /// its dual feasible direction so that ties between reduced costs, and
    /// with them degenerate dual pivots, become rare. The caller restores the
    /// true costs afterwards.
    fn perturb_costs(&mut self) {
        let n = self.model.n;
        let mut any = false;
        for j in 0..n {
            if self.lb[j] == self.ub[j] {
                continue;
            }
            let delta = PERTURBATION * (1.0 + self.cost[j].abs()) * (1.0 + jitter(j));
            match self.status[j] {
                Status::Lower => self.cost[j] += delta,
                Status::Upper => self.cost[j] -= delta,
                Status::Basic | Status::Free => continue,
            }
            any = true;
        }
        if any {
            self.compute_duals();
        }
    }

    /// Flips boxed variables whose reduced cost has the wrong sign and shifts
    /// the costs of the rest.
    fn make_dual_feasible(&mut self, dtol: f64) {
        let mut flipped = false;
        for j in 0..self.model.n + self.model.m {
            let (lb, ub) = (self.lb[j], self.ub[j]);
            if lb == ub || self.status[j] == Status::Basic {
                continue;
            }
            let dj = self.d[j];
            match self.status[j] {
                Status::Lower if dj < -dtol => {
                    if ub.is_finite() || (dj < -BOX_THRESHOLD && !self.unboxed[j]) {
                        if !ub.is_finite() {
                            self.ub[j] = lb + ARTIFICIAL_BOUND;
                            self.artificial[j] = true;
                        }
                        self.status[j] = Status::Upper;
                        self.x[j] = self.ub[j];
                        flipped = true;
                    } else {
                        self.cost[j] -= dj;
                        self.d[j] = 0.0;
                    }
                }
                Status::Upper if dj > dtol => {
                    if lb.is_finite() || (dj > BOX_THRESHOLD && !self.unboxed[j]) {
                        if !lb.is_finite() {
                            self.lb[j] = ub - ARTIFICIAL_BOUND;
                            self.artificial[j] = true;
                        }
                        self.status[j] = Status::Lower;
                        self.x[j] = self.lb[j];
                        flipped = true;
                    } else {
                        self.cost[j] -= dj;
                        self.d[j] = 0.0;
                    }
                }
                Status::Free if dj.abs() > dtol => {
                    self.cost[j] -= dj;
                    self.d[j] = 0.0;
                }
                _ => {}
            }
        }
        if flipped {
            self.compute_primal();
        }
    }

    /// Computes `e_r^T B^{-1} [A, -I]` into `row_alpha` for nonbasic columns.
    fn pivot_row(&mut self, r: usize) {
        let (n, m) = (self.model.n, self.model.m);
        let mut unit = std::mem::take(&mut self.slot_buf);
        unit.iter_mut().for_each(|v| *v = 0.0);
        unit[r] = 1.0;
        let mut rho = std::mem::take(&mut self.rho);
        self.basis().btran(&mut unit, &mut rho);
        self.slot_buf = unit;
        self.row_alpha.iter_mut().for_each(|v| *v = 0.0);
        for i in 0..m {
            let ri = rho[i];
            if ri == 0.0 {
                continue;
            }
            let (idx, val) = self.model.rows.get(i);
            for (&j, &a) in idx.iter().zip(val) {
                self.row_alpha[j] += ri * a;
            }
            self.row_alpha[n + i] = -ri;
        }
        self.rho = rho;
    }

    fn ftran_column(&mut self, q: usize) {
        let mut rhs = std::mem::take(&mut self.rhs);
        rhs.iter_mut().for_each(|v| *v = 0.0);
        {
            let (idx, val) = self.column(q);
            for (&i, &a) in idx.iter().zip(val) {
                rhs[i] = a;
            }
        }
        let mut col = std::mem::take(&mut self.col);
        self.basis().ftran(&rhs, &mut col);
        self.col = col;
        self.rhs = rhs;
    }

    fn replace_basic(&mut self, r: usize, q: usize, leaving_status: Status, leaving_value: f64) {
        let leaving = self.head[r];
        let col = std::mem::take(&mut self.col);
        self.basis().push_update(r, &col, 0.0);
        self.col = col;
        self.head[r] = q;
        self.slot_of[q] = r;
        self.status[q] = Status::Basic;
        self.slot_of[leaving] = NONE;
        self.status[leaving] = leaving_status;
        self.x[leaving] = leaving_value;
    }

    fn needs_refactor(&mut self) -> bool {
        let interval = self.opts.refactor_interval;
        let b = self.basis();
        b.num_updates() >= interval || b.eta_nnz() > 2 * b.lu.nnz() + 1000
    }

    fn dual_phase(&mut self) -> Result<(), SolveError> {
        let (n, m) = (self.model.n, self.model.m);
        let ptol = self.opts.primal_tol;
        let dtol = self.opts.dual_tol;
        self.dual_weights.iter_mut().for_each(|w| *w = 1.0);
        let mut degenerate = 0usize;
        let mut retried = false;
        let mut taboo: Vec<usize> = Vec::new();
        loop {
            self.check_iterations()?;
            if self.needs_refactor() {
                self.fresh_start()?;
                self.make_dual_feasible(dtol);
            }
            let bland = degenerate > DEGENERATE_RUN;

            // Leaving row.
            let mut r = NONE;
            let mut best = 0.0;
            for s in 0..m {
                let j = self.head[s];
                let inf = self.primal_infeasibility(j);
                if inf <= ptol || (!taboo.is_empty() && taboo.contains(&j)) {
                    continue;
                }
                if bland {
                    if r == NONE || j < self.head[r] {
                        r = s;
                    }
                } else {
                    let score = inf * inf / self.dual_weights[s];
                    if score > best {
                        best = score;
                        r = s;
                    }
                }
            }
            if r == NONE {
                if !taboo.is_empty() {
                    return Err(SolveError::Numerical("no stable pivot for any infeasible row".into()));
                }
                return Ok(());
            }
            let leaving = self.head[r];
            let below = self.x[leaving] < self.lb[leaving];
            let target = if below {
                self.lb[leaving]
            } else {
                self.ub[leaving]
            };
            let sign = if below { 1.0 } else { -1.0 };

            self.pivot_row(r);

            // Entering column: Harris two-pass ratio test on reduced costs.
            let mut theta_max = f64::INFINITY;
            for j in 0..n + m {
                if let Some(dj) = self.dual_ratio_candidate(j, sign) {
                    let a = self.row_alpha[j].abs();
                    // Slightly wrong-signed reduced costs count as zero.
                    theta_max = theta_max.min((dj.max(0.0) + dtol) / a);
                }
            }
            if theta_max == f64::INFINITY {
                if !retried && self.basis().num_updates() > 0 {
                    retried = true;
                    self.fresh_start()?;
                    self.make_dual_feasible(dtol);
                    continue;
                }
                return Err(SolveError::Infeasible);
            }
            let mut q = NONE;
            let mut best_alpha = 0.0;
            let mut best_ratio = f64::INFINITY;
            for j in 0..n + m {
                if let Some(dj) = self.dual_ratio_candidate(j, sign) {
                    let a = self.row_alpha[j].abs();
                    let ratio = dj.max(0.0) / a;
                    if bland {
                        if ratio < best_ratio - 1e-12 || (ratio <= best_ratio + 1e-12 && j < q) {
                            best_ratio = ratio;
                            q = j;
                        }
                    } else if ratio <= theta_max && a > best_alpha {
                        best_alpha = a;
                        q = j;
                    }
                }
            }
            retried = false;

            self.ftran_column(q);
            let alpha_rq = self.col[r];
            match self.check_pivot(alpha_rq, self.row_alpha[q])? {
                PivotCheck::Accept => {}
                PivotCheck::Retry => {
                    self.make_dual_feasible(dtol);
                    continue;
                }
                PivotCheck::Reject => {
                    taboo.push(self.head[r]);
                    continue;
                }
            }
            taboo.clear();
            self.iterations += 1;

            // Primal step.
            let t = (self.x[leaving] - target) / alpha_rq;
            if t != 0.0 {
                for s in 0..m {
                    let a = self.col[s];
                    if a != 0.0 {
                        let j = self.head[s];
                        self.x[j] -= t * a;
                    }
                }
            }
            self.x[q] += t;

            // Dual step.
            // Free variables enter at zero reduced cost by design; that is
            // not a stall.
            let theta = self.d[q] / alpha_rq;
            if theta.abs() > DEGENERATE_STEP {
                degenerate = 0;
            } else if self.status[q] != Status::Free {
                degenerate += 1;
            }
            if theta != 0.0 {
                for j in 0..n + m {
                    if self.status[j] != Status::Basic {
                        let a = self.row_alpha[j];
                        if a != 0.0 {
                            self.d[j] -= theta * a;
                        }
                    }
                }
            }
            self.d[q] = 0.0;
            self.d[leaving] = -theta;

            // Dual steepest-edge weights: w_s = |e_s^T B^{-1}|^2.
            let wr: f64 = self.rho.iter().map(|v| v * v).sum();
            let mut tau = std::mem::take(&mut self.tau);
            {
                let rho = std::mem::take(&mut self.rho);
                self.basis().ftran(&rho, &mut tau);
                self.rho = rho;
            }
            for s in 0..m {
                if s == r {
                    continue;
                }
                let a = self.col[s];
                if a != 0.0 {
                    let ratio = a / alpha_rq;
                    let w = &mut self.dual_weights[s];
                    *w = (*w - 2.0 * ratio * tau[s] + ratio * ratio * wr).max(MIN_WEIGHT);
                }
            }
            self.tau = tau;
            self.dual_weights[r] = (wr / (alpha_rq * alpha_rq)).max(MIN_WEIGHT);

            let st = if below { Status::Lower } else { Status::Upper };
            self.replace_basic(r, q, st, target);
        }
    }

    /// Reduced cost magnitude of `j` if it may enter in the dual ratio test.
    fn dual_ratio_candidate(&self, j: usize, sign: f64) -> Option<f64> {
        let a = self.row_alpha[j];
        if a.abs() <= PIVOT_TOL || self.lb[j] == self.ub[j] {
            return None;
        }
        match self.status[j] {
            Status::Basic => None,
            Status::Lower if sign * a < 0.0 => Some(self.d[j]),
            Status::Upper if sign * a > 0.0 => Some(-self.d[j]),
            Status::Free => Some(self.d[j].abs()),
            _ => None,
        }
    }

    fn primal_phase(&mut self) -> Result<(), SolveError> {
        let (n, m) = (self.model.n, self.model.m);
        let dtol = self.opts.dual_tol;
        self.primal_weights.iter_mut().for_each(|w| *w = 1.0);
        let mut degenerate = 0usize;
        let mut retried = false;
        let mut taboo: Vec<usize> = Vec::new();
        loop {
            self.check_iterations()?;
            if self.needs_refactor() {
                self.refactor()?;
                self.compute_primal();
                self.compute_duals();
            }
            let bland = degenerate > DEGENERATE_RUN;

            // Entering column.
            let mut q = NONE;
            let mut best = 0.0;
            for j in 0..n + m {
                let inf = self.dual_infeasibility(j);
                if inf <= dtol || (!taboo.is_empty() && taboo.contains(&j)) {
                    continue;
                }
                if bland {
                    q = j;
                    break;
                }
                let score = inf * inf / self.primal_weights[j];
                if score > best {
                    best = score;
                    q = j;
                }
            }
            if q == NONE {
                if !taboo.is_empty() {
                    return Err(SolveError::Numerical("no stable pivot for any improving column".into()));
                }
                return Ok(());
            }
            let dir = if self.d[q] < 0.0 { 1.0 } else { -1.0 };

            self.ftran_column(q);
            let step = self.primal_ratio(q, dir, bland);
            let (r, t, to_upper) = match step {
                PrimalStep::Unbounded => {
                    if !retried && self.basis().num_updates() > 0 {
                        retried = true;
                        self.fresh_start()?;
                        continue;
                    }
                    return Err(SolveError::Unbounded);
                }
                PrimalStep::Flip { t } => {
                    retried = false;
                    self.iterations += 1;
                    self.move_basics(dir * t);
                    self.x[q] += dir * t;
                    if dir > 0.0 {
                        self.status[q] = Status::Upper;
                        self.x[q] = self.ub[q];
                    } else {
                        self.status[q] = Status::Lower;
                        self.x[q] = self.lb[q];
                    }
                    degenerate = 0;
                    continue;
                }
                PrimalStep::Leave { slot, t, to_upper } => (slot, t, to_upper),
            };
            retried = false;

            self.pivot_row(r);
            let alpha_rq = self.col[r];
            match self.check_pivot(alpha_rq, self.row_alpha[q])? {
                PivotCheck::Accept => {}
                PivotCheck::Retry => continue,
                PivotCheck::Reject => {
                    taboo.push(q);
                    continue;
                }
            }
            taboo.clear();
            self.iterations += 1;
            if t <= DEGENERATE_STEP {
                degenerate += 1;
            } else {
                degenerate = 0;
            }

            self.move_basics(dir * t);
            self.x[q] += dir * t;

            let leaving = self.head[r];
            let theta = self.d[q] / alpha_rq;
            let wq = self.primal_weights[q];
            for j in 0..n + m {
                if self.status[j] == Status::Basic || j == q {
                    continue;
                }
                let a = self.row_alpha[j];
                if a != 0.0 {
                    self.d[j] -= theta * a;
                    let ratio = a / alpha_rq;
                    let w = &mut self.primal_weights[j];
                    *w = w.max(ratio * ratio * wq);
                }
            }
            self.d[q] = 0.0;
            self.d[leaving] = -theta;
            self.primal_weights[leaving] = (wq / (alpha_rq * alpha_rq)).max(1.0);
            if self.primal_weights[leaving] > DEVEX_RESET {
                self.primal_weights.iter_mut().for_each(|w| *w = 1.0);
            }

            let (st, value) = if to_upper {
                (Status::Upper, self.ub[leaving])
            } else {
                (Status::Lower, self.lb[leaving])
            };
            self.replace_basic(r, q, st, value);
        }
    }

    /// Moves every basic variable along the current column for an entering
    /// change of `delta`.
    fn move_basics(&mut self, delta: f64) {
        if delta == 0.0 {
            return;
        }
        for s in 0..self.model.m {
            let a = self.col[s];
            if a != 0.0 {
                let j = self.head[s];
                self.x[j] -= delta * a;
            }
        }
    }

    fn primal_ratio(&self, q: usize, dir: f64, bland: bool) -> PrimalStep {
        let ptol = self.opts.primal_tol;
        let range = self.ub[q] - self.lb[q];
        let m = self.model.m;

        // Exact ratio and whether the basic variable would reach its upper bound.
        let limit = |s: usize, slack: f64| -> Option<(f64, bool)> {
            let a = self.col[s];
            if a.abs() <= PIVOT_TOL {
                return None;
            }
            let j = self.head[s];
            let rate = -dir * a;
            let v = self.x[j];
            if rate < 0.0 {
                let lb = self.lb[j];
                lb.is_finite().then(|| ((v - lb + slack) / -rate, false))
            } else {
                let ub = self.ub[j];
                ub.is_finite().then(|| ((ub - v + slack) / rate, true))
            }
        };

        if bland {
            let mut best: Option<(usize, f64, bool)> = None;
            for s in 0..m {
                if let Some((ratio, up)) = limit(s, 0.0) {
                    let ratio = ratio.max(0.0);
                    let better = match best {
                        None => true,
                        Some((bs, br, _)) => {
                            ratio < br - 1e-12 || (ratio <= br + 1e-12 && self.head[s] < self.head[bs])
                        }
                    };
                    if better {
                        best = Some((s, ratio, up));
                    }
                }
            }
            return match best {
                Some((_, ratio, _)) if range <= ratio => PrimalStep::Flip { t: range },
                Some((slot, t, to_upper)) => PrimalStep::Leave { slot, t, to_upper },
                None if range.is_finite() => PrimalStep::Flip { t: range },
                None => PrimalStep::Unbounded,
            };
        }

        let mut theta_max = f64::INFINITY;
        for s in 0..m {
            if let Some((ratio, _)) = limit(s, ptol) {
                theta_max = theta_max.min(ratio);
            }
        }
        if range <= theta_max {
            return if range.is_finite() {
                PrimalStep::Flip { t: range }
            } else {
                PrimalStep::Unbounded
            };
        }
        let mut best: Option<(usize, f64, bool)> = None;
        let mut best_alpha = 0.0;
        for s in 0..m {
            if let Some((ratio, up)) = limit(s, 0.0) {
                let a = self.col[s].abs();
                if ratio <= theta_max && a > best_alpha {
                    best_alpha = a;
                    best = Some((s, ratio.max(0.0), up));
                }
            }
        }
        match best {
            Some((slot, t, to_upper)) => PrimalStep::Leave { slot, t, to_upper },
            None => PrimalStep::Unbounded,
        }
    }
}
