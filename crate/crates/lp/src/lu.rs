//! Sparse LU factorization of a simplex basis and the product-form updates
//! applied between refactorizations.
//!
//! The factorization is left-looking: each basis column is solved against the
//! partial `L`, then a pivot is chosen among the not-yet-pivoted rows with a
//! threshold rule that prefers sparse rows. Columns are processed sparsest
//! first, so logical (unit) columns are pivoted without fill.

use crate::sparse::Compressed;

const NONE: usize = usize::MAX;

/// Columns that turned out linearly dependent, with rows left without a pivot.
#[derive(Debug)]
pub(crate) struct Singular {
    pub(crate) slots: Vec<usize>,
    pub(crate) rows: Vec<usize>,
}

#[derive(Debug)]
pub(crate) struct LuFactors {
    m: usize,
    /// Unit lower factor, by column, indices in position space.
    lower: Compressed,
    /// Strictly upper part, by column, indices in position space.
    upper: Compressed,
    /// Row-wise copies of both factors for the transposed solves.
    lower_rows: Compressed,
    upper_rows: Compressed,
    diag: Vec<f64>,
    row_of_pos: Vec<usize>,
    slot_of_pos: Vec<usize>,
}

struct Workspace {
    x: Vec<f64>,
    touched: Vec<usize>,
    mark: Vec<bool>,
    topo: Vec<usize>,
    stack: Vec<(usize, usize)>,
    visited: Vec<bool>,
}

impl LuFactors {
    /// Factorizes the `m x m` matrix whose column `slot` is `column(slot)`.
    pub(crate) fn factorize<'a, F>(m: usize, column: F, threshold: f64, abs_tol: f64) -> Result<Self, Singular>
    where
        F: Fn(usize) -> (&'a [usize], &'a [f64]),
    {
        let mut row_count = vec![0usize; m];
        let mut order: Vec<(usize, usize)> = (0..m)
            .map(|s| {
                let (rows, _) = column(s);
                for &r in rows {
                    row_count[r] += 1;
                }
                (rows.len(), s)
            })
            .collect();
        order.sort_unstable();

        // During factorization L keeps original row indices; pos_of_row maps
        // pivoted rows to the column of L that eliminates them.
        let mut lower = Compressed::with_outer(m);
        let mut upper = Compressed::with_outer(m);
        let mut diag = Vec::with_capacity(m);
        let mut pos_of_row = vec![NONE; m];
        let mut row_of_pos = Vec::with_capacity(m);
        let mut slot_of_pos = Vec::with_capacity(m);
        let mut dependent = Vec::new();

        let mut ws = Workspace {
            x: vec![0.0; m],
            touched: Vec::new(),
            mark: vec![false; m],
            topo: Vec::new(),
            stack: Vec::new(),
            visited: vec![false; m],
        };

        for &(_, slot) in &order {
            let (rows, vals) = column(slot);
            ws.touched.clear();
            for (&r, &v) in rows.iter().zip(vals) {
                if !ws.mark[r] {
                    ws.mark[r] = true;
                    ws.touched.push(r);
                }
                ws.x[r] += v;
            }
            reach(&lower, &pos_of_row, &mut ws);

            // Eliminate with the pivoted rows in topological order.
            for t in (0..ws.topo.len()).rev() {
                let r = ws.topo[t];
                let xr = ws.x[r];
                if xr == 0.0 {
                    continue;
                }
                let (li, lv) = lower.get(pos_of_row[r]);
                for (&q, &l) in li.iter().zip(lv) {
                    ws.x[q] -= l * xr;
                }
            }

            let mut amax = 0.0f64;
            for &r in &ws.touched {
                if pos_of_row[r] == NONE {
                    amax = amax.max(ws.x[r].abs());
                }
            }

            if amax <= abs_tol {
                dependent.push(slot);
                for &r in &ws.touched {
                    ws.x[r] = 0.0;
                    ws.mark[r] = false;
                }
                continue;
            }

            let mut piv = NONE;
            let mut best = (usize::MAX, 0.0f64);
            for &r in &ws.touched {
                if pos_of_row[r] != NONE {
                    continue;
                }
                let a = ws.x[r].abs();
                if a >= threshold * amax {
                    let key = (row_count[r], a);
                    if key.0 < best.0 || (key.0 == best.0 && (key.1 > best.1 || (key.1 == best.1 && r < piv))) {
                        best = key;
                        piv = r;
                    }
                }
            }

            let p = row_of_pos.len();
            let pv = ws.x[piv];
            for &r in &ws.touched {
                let v = ws.x[r];
                if v != 0.0 && r != piv {
                    match pos_of_row[r] {
                        NONE => lower.push(r, v / pv),
                        q => upper.push(q, v),
                    }
                }
                ws.x[r] = 0.0;
                ws.mark[r] = false;
            }
            lower.seal();
            upper.seal();
            diag.push(pv);
            pos_of_row[piv] = p;
            row_of_pos.push(piv);
            slot_of_pos.push(slot);
        }

        if !dependent.is_empty() {
            let rows = (0..m).filter(|&r| pos_of_row[r] == NONE).collect();
            return Err(Singular {
                slots: dependent,
                rows,
            });
        }

        lower.remap_inner(&pos_of_row);
        let lower_rows = lower.transpose(m);
        let upper_rows = upper.transpose(m);
        Ok(Self {
            m,
            lower,
            upper,
            lower_rows,
            upper_rows,
            diag,
            row_of_pos,
            slot_of_pos,
        })
    }

    pub(crate) fn nnz(&self) -> usize {
        self.lower.nnz() + self.upper.nnz() + self.m
    }

    /// Solves `B y = b` for a row-indexed `b`; the result is slot-indexed.
    /// `work` must be zero on entry and is left zeroed.
    pub(crate) fn solve(&self, b: &[f64], out: &mut [f64], work: &mut [f64]) {
        for p in 0..self.m {
            work[p] = b[self.row_of_pos[p]];
        }
        for p in 0..self.m {
            let wp = work[p];
            if wp != 0.0 {
                let (li, lv) = self.lower.get(p);
                for (&q, &l) in li.iter().zip(lv) {
                    work[q] -= l * wp;
                }
            }
        }
        for p in (0..self.m).rev() {
            let wp = work[p];
            if wp != 0.0 {
                let wp = wp / self.diag[p];
                work[p] = wp;
                let (ui, uv) = self.upper.get(p);
                for (&q, &u) in ui.iter().zip(uv) {
                    work[q] -= u * wp;
                }
            }
        }
        for p in 0..self.m {
            out[self.slot_of_pos[p]] = work[p];
            work[p] = 0.0;
        }
    }

    /// Solves `B^T y = c` for a slot-indexed `c`; the result is row-indexed.
    pub(crate) fn solve_transposed(&self, c: &[f64], out: &mut [f64], work: &mut [f64]) {
        for p in 0..self.m {
            work[p] = c[self.slot_of_pos[p]];
        }
        for p in 0..self.m {
            let wp = work[p];
            if wp != 0.0 {
                let wp = wp / self.diag[p];
                work[p] = wp;
                let (ui, uv) = self.upper_rows.get(p);
                for (&q, &u) in ui.iter().zip(uv) {
                    work[q] -= u * wp;
                }
            }
        }
        for p in (0..self.m).rev() {
            let wp = work[p];
            if wp != 0.0 {
                let (li, lv) = self.lower_rows.get(p);
                for (&q, &l) in li.iter().zip(lv) {
                    work[q] -= l * wp;
                }
            }
        }
        for p in 0..self.m {
            out[self.row_of_pos[p]] = work[p];
            work[p] = 0.0;
        }
    }
}

/// Depth-first search from the nonzeros of the current column through the
/// pivoted part of `L`. Leaves pivoted rows in `ws.topo` in reverse
/// topological order and adds every reached row to `ws.touched`.
fn reach(lower: &Compressed, pos_of_row: &[usize], ws: &mut Workspace) {
    ws.topo.clear();
    let n_start = ws.touched.len();
    for k in 0..n_start {
        let root = ws.touched[k];
        if pos_of_row[root] == NONE || ws.visited[root] {
            continue;
        }
        ws.visited[root] = true;
        ws.stack.push((root, 0));
        while let Some(top) = ws.stack.last_mut() {
            let (node, child) = *top;
            let (li, _) = lower.get(pos_of_row[node]);
            if child < li.len() {
                top.1 += 1;
                let next = li[child];
                if !ws.mark[next] {
                    ws.mark[next] = true;
                    ws.touched.push(next);
                }
                if pos_of_row[next] != NONE && !ws.visited[next] {
                    ws.visited[next] = true;
                    ws.stack.push((next, 0));
                }
            } else {
                ws.topo.push(node);
                ws.stack.pop();
            }
        }
    }
    for &r in &ws.topo {
        ws.visited[r] = false;
    }
}

/// One product-form update: the basis column at `slot` was replaced by a
/// column whose representation in the previous basis is `alpha`.
#[derive(Debug)]
struct Eta {
    slot: usize,
    pivot: f64,
    entries: Vec<(usize, f64)>,
}

#[derive(Debug)]
pub(crate) struct Basis {
    pub(crate) lu: LuFactors,
    etas: Vec<Eta>,
    eta_nnz: usize,
    work: Vec<f64>,
}

impl Basis {
    pub(crate) fn new(lu: LuFactors) -> Self {
        let m = lu.m;
        Self {
            lu,
            etas: Vec::new(),
            eta_nnz: 0,
            work: vec![0.0; m],
        }
    }

    pub(crate) fn num_updates(&self) -> usize {
        self.etas.len()
    }

    pub(crate) fn eta_nnz(&self) -> usize {
        self.eta_nnz
    }

    /// `B^{-1} b`, slot-indexed.
    pub(crate) fn ftran(&mut self, b: &[f64], out: &mut [f64]) {
        self.lu.solve(b, out, &mut self.work);
        for eta in &self.etas {
            let xr = out[eta.slot];
            if xr != 0.0 {
                let xr = xr / eta.pivot;
                out[eta.slot] = xr;
                for &(i, a) in &eta.entries {
                    out[i] -= a * xr;
                }
            }
        }
    }

    /// `B^{-T} c`, row-indexed. `c` is slot-indexed and gets overwritten.
    pub(crate) fn btran(&mut self, c: &mut [f64], out: &mut [f64]) {
        for eta in self.etas.iter().rev() {
            let mut s = c[eta.slot];
            for &(i, a) in &eta.entries {
                s -= a * c[i];
            }
            c[eta.slot] = s / eta.pivot;
        }
        self.lu.solve_transposed(c, out, &mut self.work);
    }

    pub(crate) fn push_update(&mut self, slot: usize, alpha: &[f64], drop_tol: f64) {
        let entries: Vec<(usize, f64)> = alpha
            .iter()
            .enumerate()
            .filter(|&(i, &a)| i != slot && a.abs() > drop_tol)
            .map(|(i, &a)| (i, a))
            .collect();
        self.eta_nnz += entries.len() + 1;
        self.etas.push(Eta {
            slot,
            pivot: alpha[slot],
            entries,
        });
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn dense_cols(a: &[Vec<f64>]) -> Vec<(Vec<usize>, Vec<f64>)> {
        let m = a.len();
        (0..m)
            .map(|c| {
                let mut idx = Vec::new();
                let mut val = Vec::new();
                for r in 0..m {
                    if a[r][c] != 0.0 {
                        idx.push(r);
                        val.push(a[r][c]);
                    }
                }
                (idx, val)
            })
            .collect()
    }

    fn factor(a: &[Vec<f64>]) -> Result<LuFactors, Singular> {
        let cols = dense_cols(a);
        LuFactors::factorize(a.len(), |s| (&cols[s].0[..], &cols[s].1[..]), 0.1, 1e-12)
    }

    #[test]
    fn solves_small_dense_system() {
        let a = vec![
            vec![2.0, 0.0, 1.0, 0.0],
            vec![1.0, 3.0, 0.0, 0.0],
            vec![0.0, 1.0, 4.0, 1.0],
            vec![0.0, 0.0, 1.0, 5.0],
        ];
        let lu = factor(&a).unwrap();
        let x_true = [1.0, -2.0, 0.5, 3.0];
        let b: Vec<f64> = a.iter().map(|row| row.iter().zip(&x_true).map(|(p, q)| p * q).sum()).collect();
        let mut x = vec![0.0; 4];
        let mut w = vec![0.0; 4];
        lu.solve(&b, &mut x, &mut w);
        for (xi, ti) in x.iter().zip(&x_true) {
            assert!((xi - ti).abs() < 1e-12);
        }
        // transposed: A^T y = c
        let y_true = [0.25, 1.0, -1.0, 2.0];
        let c: Vec<f64> = (0..4).map(|j| (0..4).map(|i| a[i][j] * y_true[i]).sum()).collect();
        let mut y = vec![0.0; 4];
        lu.solve_transposed(&c, &mut y, &mut w);
        for (yi, ti) in y.iter().zip(&y_true) {
            assert!((yi - ti).abs() < 1e-12);
        }
    }

    #[test]
    fn reports_dependent_columns() {
        let a = vec![vec![1.0, 2.0, 0.0], vec![2.0, 4.0, 0.0], vec![0.0, 0.0, 1.0]];
        let err = factor(&a).unwrap_err();
        assert_eq!(err.slots.len(), 1);
        assert_eq!(err.rows.len(), 1);
    }

    #[test]
    fn eta_updates_match_refactorization() {
        let a = vec![
            vec![4.0, 1.0, 0.0],
            vec![1.0, 3.0, 1.0],
            vec![0.0, 1.0, 2.0],
        ];
        let mut basis = Basis::new(factor(&a).unwrap());
        // replace column 1 by (1, 0, 5)
        let new_col = [1.0, 0.0, 5.0];
        let mut alpha = vec![0.0; 3];
        basis.ftran(&new_col, &mut alpha);
        basis.push_update(1, &alpha, 0.0);

        let mut a2 = a.clone();
        for r in 0..3 {
            a2[r][1] = new_col[r];
        }
        let b = [1.0, 2.0, 3.0];
        let mut x = vec![0.0; 3];
        basis.ftran(&b, &mut x);
        let fresh = factor(&a2).unwrap();
        let mut x2 = vec![0.0; 3];
        let mut w = vec![0.0; 3];
        fresh.solve(&b, &mut x2, &mut w);
        for (p, q) in x.iter().zip(&x2) {
            assert!((p - q).abs() < 1e-12);
        }

        let c = vec![1.0, -1.0, 2.0];
        let mut y = vec![0.0; 3];
        basis.btran(&mut c.clone(), &mut y);
        let mut y2 = vec![0.0; 3];
        fresh.solve_transposed(&c, &mut y2, &mut w);
        for (p, q) in y.iter().zip(&y2) {
            assert!((p - q).abs() < 1e-12);
        }
    }
}
