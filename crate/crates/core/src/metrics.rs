//! OSPA distance, its Monte-Carlo average, and the assignment solver behind it.

use alloc::vec;
use alloc::vec::Vec;

use crate::{Error, Result};

pub const DEFAULT_CUTOFF: f64 = 50.0;
pub const DEFAULT_ORDER: f64 = 1.0;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct OspaParams {
    pub cutoff: f64,
    pub order: f64,
}

impl OspaParams {
    pub fn new(cutoff: f64, order: f64) -> Result<Self> {
        if !(cutoff > 0.0 && cutoff.is_finite()) {
            return Err(Error::invalid("OSPA cutoff must be positive and finite"));
        }
        if !(order >= 1.0 && order.is_finite()) {
            return Err(Error::invalid("OSPA order must be >= 1"));
        }
        Ok(Self { cutoff, order })
    }
}

impl Default for OspaParams {
    fn default() -> Self {
        Self {
            cutoff: DEFAULT_CUTOFF,
            order: DEFAULT_ORDER,
        }
    }
}

/// Minimum-cost assignment for a row-major `rows × cols` cost matrix.
///
/// Returns `assignment[i] = Some(j)` for each row. If `rows ≤ cols` every row
/// is assigned; otherwise exactly `cols` rows are. Shortest augmenting paths
/// with potentials, `O(n² m)`.
pub fn optimal_assignment(costs: &[f64], rows: usize, cols: usize) -> Vec<Option<usize>> {
    assert_eq!(costs.len(), rows * cols, "cost matrix size");
    if rows == 0 || cols == 0 {
        return vec![None; rows];
    }
    if rows > cols {
        let transposed: Vec<f64> = (0..cols * rows)
            .map(|k| costs[(k % rows) * cols + k / rows])
            .collect();
        let col_to_row = optimal_assignment(&transposed, cols, rows);
        let mut out = vec![None; rows];
        for (j, i) in col_to_row.into_iter().enumerate() {
            if let Some(i) = i {
                out[i] = Some(j);
            }
        }
        return out;
    }

    let (n, m) = (rows, cols);
    let cost = |i: usize, j: usize| costs[(i - 1) * m + (j - 1)];
    // 1-based arrays; column 0 is a virtual source.
    let mut u = vec![0.0; n + 1];
    let mut v = vec![0.0; m + 1];
    let mut owner = vec![0usize; m + 1];
    let mut way = vec![0usize; m + 1];
    for i in 1..=n {
        owner[0] = i;
        let mut j0 = 0;
        let mut minv = vec![f64::INFINITY; m + 1];
        let mut used = vec![false; m + 1];
        loop {
            used[j0] = true;
            let i0 = owner[j0];
            let mut delta = f64::INFINITY;
            let mut j1 = 0;
            for j in 1..=m {
                if used[j] {
                    continue;
                }
                let reduced = cost(i0, j) - u[i0] - v[j];
                if reduced < minv[j] {
                    minv[j] = reduced;
                    way[j] = j0;
                }
                if minv[j] < delta {
                    delta = minv[j];
                    j1 = j;
                }
            }
            for j in 0..=m {
                if used[j] {
                    u[owner[j]] += delta;
                    v[j] -= delta;
                } else {
                    minv[j] -= delta;
                }
            }
            j0 = j1;
            if owner[j0] == 0 {
                break;
            }
        }
        loop {
            let j1 = way[j0];
            owner[j0] = owner[j1];
            j0 = j1;
            if j0 == 0 {
                break;
            }
        }
    }
    let mut out = vec![None; n];
    for j in 1..=m {
        if owner[j] != 0 {
            out[owner[j] - 1] = Some(j - 1);
        }
    }
    out
}

fn distance(a: &[f64; 3], b: &[f64; 3]) -> f64 {
    libm::sqrt((0..3).map(|i| (a[i] - b[i]) * (a[i] - b[i])).sum())
}

/// OSPA distance between two finite sets of 3-D positions.
pub fn ospa(est: &[[f64; 3]], truth: &[[f64; 3]], params: &OspaParams) -> f64 {
    let (small, large) = if est.len() <= truth.len() {
        (est, truth)
    } else {
        (truth, est)
    };
    let (n, m) = (small.len(), large.len());
    if m == 0 {
        return 0.0;
    }
    let c = params.cutoff;
    let p = params.order;
    let powered = |d: f64| if p == 1.0 { d } else { libm::pow(d, p) };
    let costs: Vec<f64> = small
        .iter()
        .flat_map(|a| large.iter().map(move |b| powered(distance(a, b).min(c))))
        .collect();
    let assignment = optimal_assignment(&costs, n, m);
    let mut pair_costs: Vec<f64> = assignment
        .iter()
        .enumerate()
        .map(|(i, j)| costs[i * m + j.expect("every row of the smaller set is assigned")])
        .collect();
    // Sorted summation keeps ospa(a, b) == ospa(b, a) bit for bit.
    pair_costs.sort_by(f64::total_cmp);
    let matched: f64 = pair_costs.iter().sum();
    let total = (matched + powered(c) * (m - n) as f64) / m as f64;
    if p == 1.0 {
        total
    } else {
        libm::pow(total, 1.0 / p)
    }
}

/// Per-step mean over runs of a `runs × steps` OSPA table.
pub fn mospa(table: &[Vec<f64>]) -> Result<Vec<f64>> {
    let steps = table.first().ok_or(Error::EmptyTable)?.len();
    if steps == 0 {
        return Err(Error::EmptyTable);
    }
    for row in table {
        if row.len() != steps {
            return Err(Error::DimensionMismatch {
                context: "mospa row",
                expected: steps,
                found: row.len(),
            });
        }
    }
    let runs = table.len() as f64;
    Ok((0..steps)
        .map(|k| table.iter().map(|row| row[k]).sum::<f64>() / runs)
        .collect())
}
