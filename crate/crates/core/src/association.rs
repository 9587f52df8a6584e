//! Iterative sum-product data association.
//!
//! Legacy potential object `j` sends `β_j(a)`, `a ∈ {0..n_m}` (0 = missed),
//! and new potential object `m` sends `ξ_m(0)`; `ξ_m(j ≥ 1) = 1`. The
//! messages exchanged on the bipartite association graph are
//!
//! ```text
//! φ_{j→m} = β_j(m) / (β_j(0) + Σ_{m'≠m} β_j(m') ν_{m'→j})
//! ν_{m→j} = 1 / (ξ_m(0) + Σ_{j'≠j} φ_{j'→m})
//! ```
//!
//! starting from `ν = 1`. On exit `κ_j = [1, ν_{1→j}, …]` and
//! `ι_m = [1, φ_{1→m}, …]`.

use alloc::vec;
use alloc::vec::Vec;

use nalgebra::DMatrix;

use crate::{Error, Result};

pub const DEFAULT_TOL: f64 = 1e-6;
pub const DEFAULT_MAX_ITERS: usize = 200;

#[derive(Debug, Clone, PartialEq)]
pub struct AssociationTables {
    /// `n_p × (n_m + 1)`; column 0 is the missed-detection entry.
    pub beta: DMatrix<f64>,
    /// `ξ_m(0)` for each measurement.
    pub xi: Vec<f64>,
    /// `n_p × (n_m + 1)`, filled by [`run_spa_da`].
    pub kappa: DMatrix<f64>,
    /// `n_m × (n_p + 1)`, filled by [`run_spa_da`].
    pub iota: DMatrix<f64>,
}

/// Convergence summary of one [`run_spa_da`] call.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SpaReport {
    pub iterations: usize,
    pub converged: bool,
    pub final_change: f64,
}

impl AssociationTables {
    pub fn new(beta: DMatrix<f64>, xi: Vec<f64>) -> Result<Self> {
        let n_p = beta.nrows();
        let n_m = xi.len();
        if beta.ncols() != n_m + 1 {
            return Err(Error::DimensionMismatch {
                context: "AssociationTables",
                expected: n_m + 1,
                found: beta.ncols(),
            });
        }
        if beta.iter().chain(&xi).any(|v| !v.is_finite() || *v < 0.0) {
            return Err(Error::invalid(
                "association messages must be finite and nonnegative",
            ));
        }
        if (0..n_p).any(|j| !(beta[(j, 0)] > 0.0)) {
            return Err(Error::invalid("beta_j(0) must be positive"));
        }
        Ok(Self {
            beta,
            xi,
            kappa: DMatrix::from_element(n_p, n_m + 1, 1.0),
            iota: DMatrix::from_element(n_m, n_p + 1, 1.0),
        })
    }

    pub fn n_objects(&self) -> usize {
        self.beta.nrows()
    }

    pub fn n_measurements(&self) -> usize {
        self.xi.len()
    }
}

/// Runs the message iteration until the largest change of any `ν` message is
/// below `tol` or `max_iters` iterations have been made, then fills
/// `tables.kappa` and `tables.iota`.
pub fn run_spa_da(tables: &mut AssociationTables, max_iters: usize, tol: f64) -> Result<SpaReport> {
    let n_p = tables.n_objects();
    let n_m = tables.n_measurements();
    tables.kappa = DMatrix::from_element(n_p, n_m + 1, 1.0);
    tables.iota = DMatrix::from_element(n_m, n_p + 1, 1.0);
    if n_p == 0 || n_m == 0 {
        return Ok(SpaReport {
            iterations: 0,
            converged: true,
            final_change: 0.0,
        });
    }

    let beta = &tables.beta;
    // nu[(j, m)] = ν_{m→j}, phi[(j, m)] = φ_{j→m}
    let mut nu = DMatrix::from_element(n_p, n_m, 1.0);
    let mut phi = DMatrix::zeros(n_p, n_m);
    let mut report = SpaReport {
        iterations: 0,
        converged: false,
        final_change: f64::INFINITY,
    };
    let mut terms = vec![0.0; n_m.max(n_p)];

    for iteration in 1..=max_iters {
        update_phi(beta, &nu, &mut phi, &mut terms);
        let mut change: f64 = 0.0;
        for m in 0..n_m {
            for (j, t) in terms.iter_mut().enumerate().take(n_p) {
                *t = phi[(j, m)];
            }
            for j in 0..n_p {
                let others = sum_excluding(&terms[..n_p], j);
                let new = 1.0 / (tables.xi[m] + others);
                if !new.is_finite() {
                    return Err(Error::NonFiniteMessage { iteration });
                }
                change = change.max((new - nu[(j, m)]).abs());
                nu[(j, m)] = new;
            }
        }
        if phi.iter().any(|v| !v.is_finite()) {
            return Err(Error::NonFiniteMessage { iteration });
        }
        report = SpaReport {
            iterations: iteration,
            converged: change < tol,
            final_change: change,
        };
        if report.converged {
            break;
        }
    }
    update_phi(beta, &nu, &mut phi, &mut terms);
    if phi.iter().any(|v| !v.is_finite()) {
        return Err(Error::NonFiniteMessage {
            iteration: report.iterations,
        });
    }

    for j in 0..n_p {
        for m in 0..n_m {
            tables.kappa[(j, m + 1)] = nu[(j, m)];
            tables.iota[(m, j + 1)] = phi[(j, m)];
        }
    }
    Ok(report)
}

fn update_phi(beta: &DMatrix<f64>, nu: &DMatrix<f64>, phi: &mut DMatrix<f64>, terms: &mut [f64]) {
    let (n_p, n_m) = nu.shape();
    for j in 0..n_p {
        for m in 0..n_m {
            terms[m] = beta[(j, m + 1)] * nu[(j, m)];
        }
        for m in 0..n_m {
            let denom = beta[(j, 0)] + sum_excluding(&terms[..n_m], m);
            phi[(j, m)] = beta[(j, m + 1)] / denom;
        }
    }
}

/// Sum of `values` without entry `skip`, accumulated in index order.
fn sum_excluding(values: &[f64], skip: usize) -> f64 {
    values
        .iter()
        .enumerate()
        .filter(|(i, _)| *i != skip)
        .map(|(_, v)| v)
        .sum()
}

/// Approximate association marginals `p(a_j = a) ∝ β_j(a) κ_j(a)`.
pub fn association_marginals(tables: &AssociationTables) -> Result<DMatrix<f64>> {
    let mut p = tables.beta.component_mul(&tables.kappa);
    for (j, mut row) in p.row_iter_mut().enumerate() {
        let total = row.sum();
        if !(total > 0.0) || !total.is_finite() {
            return Err(Error::DegenerateRow { row: j });
        }
        row /= total;
    }
    Ok(p)
}

/// Approximate probability that measurement `m` was not generated by any
/// legacy object: `ξ_m(0) ι_m(0)` normalized against `Σ_j ι_m(j)`.
pub fn measurement_marginals(tables: &AssociationTables) -> Result<DMatrix<f64>> {
    let mut p = tables.iota.clone();
    for (m, mut row) in p.row_iter_mut().enumerate() {
        row[0] *= tables.xi[m];
        let total = row.sum();
        if !(total > 0.0) || !total.is_finite() {
            return Err(Error::DegenerateRow { row: m });
        }
        row /= total;
    }
    Ok(p)
}
