//! A small dense two-phase simplex solver for the startup face
//! minimization.
//!
//! Solves `min cᵀx  s.t.  Ax = b, x ≥ 0` on the tiny linear programs the
//! path bootstrap assembles (a handful of variables and one row per
//! linear cost piece of the touched coordinates). Bland's rule is used
//! throughout, so the iteration cannot cycle; the cap below only guards
//! against numerical stalling.

/// Result of [`solve_standard_form`].
#[derive(Debug, Clone, PartialEq)]
pub(super) enum LpOutcome {
    /// An optimal basic solution (full variable vector).
    Optimal(Vec<f64>),
    /// The objective is unbounded below on the feasible set.
    Unbounded,
    /// No feasible point exists (phase 1 ended with a positive residual).
    Infeasible,
    /// The pivot loop hit its safety cap.
    Stalled,
}

const EPS: f64 = 1e-9;

/// Two-phase primal simplex with Bland's rule on `min cᵀx, Ax = b, x ≥ 0`.
///
/// `a` is row-major (`rows` × `cols`), `b` has `rows` entries, `c` has
/// `cols` entries. Rows should be pre-scaled to O(1) entries by the
/// caller; pivoting uses an absolute tolerance.
pub(super) fn solve_standard_form(
    rows: usize,
    cols: usize,
    a: &[f64],
    b: &[f64],
    c: &[f64],
) -> LpOutcome {
    assert_eq!(a.len(), rows * cols, "constraint matrix shape mismatch");
    assert_eq!(b.len(), rows, "rhs length mismatch");
    assert_eq!(c.len(), cols, "cost length mismatch");

    // Tableau columns: [original vars | artificials | rhs].
    let total = cols + rows;
    let mut tab: Vec<Vec<f64>> = Vec::with_capacity(rows);
    let mut basis: Vec<usize> = Vec::with_capacity(rows);
    for i in 0..rows {
        let mut row = vec![0.0; total + 1];
        let flip = if b[i] < 0.0 { -1.0 } else { 1.0 };
        for j in 0..cols {
            row[j] = flip * a[i * cols + j];
        }
        row[cols + i] = 1.0;
        row[total] = flip * b[i];
        tab.push(row);
        basis.push(cols + i);
    }

    let cap = 2000 + 40 * (total + rows);

    // Phase 1: minimize the sum of artificials.
    let mut obj = vec![0.0; total + 1];
    for row in &tab {
        for (o, v) in obj.iter_mut().zip(row.iter()) {
            *o -= v;
        }
    }
    for j in cols..total {
        obj[j] = 0.0;
    }
    if !pivot_loop(&mut tab, &mut obj, &mut basis, total, total, cap) {
        return LpOutcome::Stalled;
    }
    // obj[total] carries −(phase-1 objective).
    if -obj[total] > EPS * (1.0 + rows as f64) {
        return LpOutcome::Infeasible;
    }
    // Drive leftover artificials out of the basis where a real pivot exists.
    for i in 0..rows {
        if basis[i] >= cols {
            if let Some(j) = (0..cols).find(|&j| tab[i][j].abs() > EPS) {
                pivot(&mut tab, &mut obj, i, j, total);
                basis[i] = j;
            }
            // An all-zero row is a redundant constraint; its artificial
            // stays basic at value zero and never re-enters (phase 2
            // scans real columns only).
        }
    }

    // Phase 2: real objective, artificial columns excluded from entering.
    let mut obj = vec![0.0; total + 1];
    obj[..cols].copy_from_slice(c);
    for (i, row) in tab.iter().enumerate() {
        if basis[i] < cols {
            let cb = c[basis[i]];
            if cb != 0.0 {
                for (o, v) in obj.iter_mut().zip(row.iter()) {
                    *o -= cb * v;
                }
            }
        }
    }
    match pivot_loop(&mut tab, &mut obj, &mut basis, cols, total, cap) {
        true => {}
        false => return LpOutcome::Stalled,
    }
    if (0..cols).any(|j| obj[j] < -EPS && tab.iter().all(|row| row[j] <= EPS)) {
        return LpOutcome::Unbounded;
    }

    let mut x = vec![0.0; cols];
    for (i, &bi) in basis.iter().enumerate() {
        if bi < cols {
            x[bi] = tab[i][total];
        }
    }
    LpOutcome::Optimal(x)
}

/// Runs Bland-rule pivots until no entering column remains (`true`) or
/// the cap / an unbounded ray is hit (`false` only on cap; unboundedness
/// leaves the tableau for the caller to inspect).
fn pivot_loop(
    tab: &mut [Vec<f64>],
    obj: &mut [f64],
    basis: &mut [usize],
    enter_limit: usize,
    total: usize,
    cap: usize,
) -> bool {
    for _ in 0..cap {
        // Bland: smallest-index column with a negative reduced cost.
        let Some(j) = (0..enter_limit).find(|&j| obj[j] < -EPS) else {
            return true;
        };
        // Ratio test; Bland tie-break on the smallest basis index.
        let mut leave: Option<(usize, f64)> = None;
        for (i, row) in tab.iter().enumerate() {
            if row[j] > EPS {
                let ratio = row[total] / row[j];
                let better = match leave {
                    None => true,
                    Some((li, lr)) => {
                        ratio < lr - EPS
                            || (ratio < lr + EPS && basis[i] < basis[li])
                    }
                };
                if better {
                    leave = Some((i, ratio));
                }
            }
        }
        let Some((i, _)) = leave else {
            // Unbounded ray: leave the column's negative reduced cost in
            // place so the caller's scan detects it.
            return true;
        };
        pivot(tab, obj, i, j, total);
        basis[i] = j;
    }
    false
}

fn pivot(tab: &mut [Vec<f64>], obj: &mut [f64], r: usize, c: usize, total: usize) {
    let piv = tab[r][c];
    for v in tab[r].iter_mut() {
        *v /= piv;
    }
    let pivot_row = tab[r].clone();
    for (i, row) in tab.iter_mut().enumerate() {
        if i != r && row[c].abs() > 0.0 {
            let f = row[c];
            for (v, p) in row.iter_mut().zip(pivot_row.iter()) {
                *v -= f * p;
            }
            row[c] = 0.0;
        }
    }
    let f = obj[c];
    if f != 0.0 {
        for (o, p) in obj.iter_mut().zip(pivot_row.iter()) {
            *o -= f * p;
        }
        obj[c] = 0.0;
    }
    let _ = total;
}
