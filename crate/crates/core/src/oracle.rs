//! Brute-force reference solvers for desk-scale instances.
//!
//! Everything in this module is written in deliberately straight-line form
//! (nested scalar loops over `Vec<Vec<f64>>`, prox operators inlined per
//! formulation) and shares no update kernels with the fast solvers in
//! [`crate::solvers`]; agreement between the two paths is therefore a real
//! cross-check rather than a tautology.
//!
//! [`oracle_bregman`] runs the alternating KL projections at tolerance
//! `1e-12` with a one-million iteration cap. [`oracle_grid`] exhaustively
//! enumerates plans on a grid over the feasible set for very small
//! instances and exists mainly to validate `oracle_bregman` itself.

use alloc::vec;
use alloc::vec::Vec;

use crate::error::{Error, Result};
use crate::math;
use crate::matrix::DenseMatrix;
use crate::solvers::{Formulation, SolverConfig};
use crate::transport::{CostMatrix, TransportPlan};

/// Convergence tolerance of the reference projections.
pub const ORACLE_TOL: f64 = 1e-12;
/// Iteration cap of the reference projections.
pub const ORACLE_MAX_ITER: usize = 1_000_000;

const MAX_BREGMAN_ROWS: usize = 64;
const MAX_BREGMAN_COLS: usize = 8;
const MAX_GRID_CELLS: usize = 6;

/// Which reference path produced a result.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum OracleMethod {
    Grid,
    Bregman,
}

/// Reference plan plus its entropic objective value.
#[derive(Debug, Clone)]
pub struct OracleResult {
    pub plan: TransportPlan,
    pub objective: f64,
    pub method: OracleMethod,
}

/// Entropic objective of a plan under a formulation, used for both oracle
/// results and fast-solver outputs so the two are directly comparable.
///
/// The base term is `eps * KL(Q | exp(-C/eps))` with the generalized
/// (mass-aware) KL; soft column constraints add their weighted KL terms.
/// For P2OT the virtual column is reconstructed from the row deficits
/// `xi_i = 1/N - sum_j Q_ij` and the objective is that of the extended
/// problem, including the `iota`-weighted term on the virtual mass.
pub fn entropic_objective(
    cost: &CostMatrix,
    formulation: Formulation,
    cfg: &SolverConfig,
    plan: &TransportPlan,
) -> f64 {
    let (n, k) = (cost.n(), cost.k());
    let eps = cfg.epsilon;
    let mut base = 0.0;
    for i in 0..n {
        for j in 0..k {
            let q = plan.values().get(i, j);
            let m = math::exp(-cost.values().get(i, j) / eps);
            if q == 0.0 {
                base += m;
            } else {
                base += q * math::ln(q / m) - q + m;
            }
        }
    }
    let cols = plan.col_sums();
    match formulation {
        Formulation::Ot | Formulation::Pot | Formulation::Sla => eps * base,
        Formulation::Uot => {
            let target = vec![1.0 / k as f64; k];
            eps * base + cfg.lambda * math::generalized_kl(&cols, &target)
        }
        Formulation::P2ot => {
            // virtual column from the per-row deficit, with entropy and the
            // stiff mass term of the extended problem
            let alpha = 1.0 / n as f64;
            let mut xi_total = 0.0;
            let mut xi_term = 0.0;
            for r in plan.row_sums() {
                let xi = (alpha - r).max(0.0);
                xi_total += xi;
                // KL against the unit virtual kernel column
                if xi > 0.0 {
                    xi_term += xi * math::ln(xi) - xi + 1.0;
                } else {
                    xi_term += 1.0;
                }
            }
            let target = vec![cfg.rho / k as f64; k];
            let col_term = cfg.lambda * math::generalized_kl(&cols, &target);
            let virt_term = cfg.iota * math::generalized_kl(&[xi_total], &[1.0 - cfg.rho]);
            eps * (base + xi_term) + col_term + virt_term
        }
    }
}

/// Alternating KL projections with the formulation's exact prox operators,
/// at `ORACLE_TOL` / `ORACLE_MAX_ITER`. Instances are capped at 64x8.
pub fn oracle_bregman(
    cost: &CostMatrix,
    formulation: Formulation,
    cfg: &SolverConfig,
    b_upper: Option<f64>,
) -> Result<OracleResult> {
    cfg.validate()?;
    let (n, k) = (cost.n(), cost.k());
    if n > MAX_BREGMAN_ROWS || k > MAX_BREGMAN_COLS {
        return Err(Error::InvalidInput(alloc::format!(
            "oracle instances are capped at {MAX_BREGMAN_ROWS}x{MAX_BREGMAN_COLS}, got {n}x{k}"
        )));
    }
    let eps = cfg.epsilon;
    let alpha = 1.0 / n as f64;

    // per-formulation layout: kernel columns, column targets, column rule
    enum ColRule {
        Eq,
        Ub,
        Kl,
    }
    let (cols, beta, col_f, col_rule, row_capped, mass): (
        usize,
        Vec<f64>,
        Vec<f64>,
        ColRule,
        bool,
        Option<f64>,
    ) = match formulation {
        Formulation::Ot => (
            k,
            vec![1.0 / k as f64; k],
            vec![1.0; k],
            ColRule::Eq,
            false,
            None,
        ),
        Formulation::Uot => (
            k,
            vec![1.0 / k as f64; k],
            vec![cfg.lambda / (cfg.lambda + eps); k],
            ColRule::Kl,
            false,
            None,
        ),
        Formulation::Pot => (
            k,
            vec![cfg.rho / k as f64; k],
            vec![1.0; k],
            ColRule::Eq,
            true,
            None,
        ),
        Formulation::Sla => {
            let bound = b_upper.ok_or_else(|| {
                Error::InvalidConfig(alloc::string::String::from(
                    "SLA oracle requires a column upper bound",
                ))
            })?;
            if (k as f64) * bound < cfg.rho {
                return Err(Error::InvalidConfig(alloc::format!(
                    "infeasible: K * b_upper = {} < rho = {}",
                    k as f64 * bound,
                    cfg.rho
                )));
            }
            (
                k,
                vec![bound; k],
                vec![1.0; k],
                ColRule::Ub,
                true,
                Some(cfg.rho),
            )
        }
        Formulation::P2ot => {
            let mut beta = vec![cfg.rho / k as f64; k];
            beta.push(1.0 - cfg.rho);
            let mut f = vec![cfg.lambda / (cfg.lambda + eps); k];
            f.push(cfg.iota / (cfg.iota + eps));
            (k + 1, beta, f, ColRule::Kl, false, None)
        }
    };

    // kernel, with the virtual all-ones column for P2OT
    let mut m = vec![vec![0.0; cols]; n];
    for (i, row) in m.iter_mut().enumerate() {
        for (j, entry) in row.iter_mut().enumerate() {
            *entry = if j < k {
                math::exp(-cost.values().get(i, j) / eps)
            } else {
                1.0
            };
        }
    }

    let mut a = vec![1.0; n];
    let mut b = vec![1.0; cols];
    let mut s = 1.0;
    let mut converged = false;
    let mut change = f64::INFINITY;
    let mut iterations = 0;
    for it in 1..=ORACLE_MAX_ITER {
        iterations = it;
        for i in 0..n {
            let mut z = 0.0;
            for j in 0..cols {
                z += m[i][j] * b[j];
            }
            z *= s;
            a[i] = if row_capped {
                (alpha / z).min(1.0)
            } else {
                alpha / z
            };
        }
        change = 0.0;
        for j in 0..cols {
            let mut z = 0.0;
            for i in 0..n {
                z += m[i][j] * a[i];
            }
            z *= s;
            let next = match col_rule {
                ColRule::Eq => beta[j] / z,
                ColRule::Ub => (beta[j] / z).min(1.0),
                ColRule::Kl => {
                    if beta[j] == 0.0 {
                        0.0
                    } else {
                        math::powf(beta[j] / z, col_f[j])
                    }
                }
            };
            let delta = math::abs(next - b[j]);
            if delta > change {
                change = delta;
            }
            b[j] = next;
        }
        if let Some(total) = mass {
            let mut dot = 0.0;
            for i in 0..n {
                for j in 0..cols {
                    dot += a[i] * m[i][j] * b[j];
                }
            }
            let next = total / dot;
            let delta = math::abs(next - s);
            if delta > change {
                change = delta;
            }
            s = next;
        }
        if change <= ORACLE_TOL {
            converged = true;
            break;
        }
    }
    if !converged {
        return Err(Error::OracleFailure {
            iterations,
            last_change: change,
        });
    }

    // materialize the first k columns
    let mut out = DenseMatrix::zeros(n, k);
    for i in 0..n {
        for j in 0..k {
            out.set(i, j, s * a[i] * m[i][j] * b[j]);
        }
    }
    let plan = TransportPlan::from_matrix(out);
    let objective = entropic_objective(cost, formulation, cfg, &plan);
    Ok(OracleResult {
        plan,
        objective,
        method: OracleMethod::Bregman,
    })
}

/// Exhaustive grid search over the feasible set, for instances with at most
/// six cells. Row i is discretized in steps of `(1/N)/resolution`; plans
/// violating hard constraints by more than one grid step are discarded and
/// the survivor with the smallest entropic objective wins (ties go to the
/// first plan in enumeration order).
pub fn oracle_grid(
    cost: &CostMatrix,
    formulation: Formulation,
    cfg: &SolverConfig,
    b_upper: Option<f64>,
    resolution: usize,
) -> Result<OracleResult> {
    cfg.validate()?;
    let (n, k) = (cost.n(), cost.k());
    if n * k > MAX_GRID_CELLS {
        return Err(Error::InvalidInput(alloc::format!(
            "grid oracle instances are capped at {MAX_GRID_CELLS} cells, got {n}x{k}"
        )));
    }
    if resolution < 2 {
        return Err(Error::InvalidConfig(alloc::format!(
            "grid resolution {resolution} is too coarse; need at least 2"
        )));
    }
    let bound = match formulation {
        Formulation::Sla => Some(b_upper.ok_or_else(|| {
            Error::InvalidConfig(alloc::string::String::from(
                "SLA oracle requires a column upper bound",
            ))
        })?),
        _ => None,
    };

    let alpha = 1.0 / n as f64;
    let step = alpha / resolution as f64;
    let rows_fixed = matches!(formulation, Formulation::Ot | Formulation::Uot);

    // all ways one row can distribute its units over k columns
    let mut row_options: Vec<Vec<f64>> = Vec::new();
    let mut counts = vec![0usize; k];
    enumerate_compositions(resolution, k, rows_fixed, &mut counts, &mut |c| {
        row_options.push(c.iter().map(|&u| u as f64 * step).collect());
    });

    let slack = 1.0 / resolution as f64;
    let mut best: Option<(f64, Vec<usize>)> = None;
    let mut chosen = vec![0usize; n];
    search_rows(
        0,
        n,
        &row_options,
        &mut chosen,
        &mut |choice: &[usize]| {
            let mut values = DenseMatrix::zeros(n, k);
            for (i, &opt) in choice.iter().enumerate() {
                values.row_mut(i).copy_from_slice(&row_options[opt]);
            }
            let plan = TransportPlan::from_matrix(values);
            if !grid_feasible(&plan, formulation, cfg, bound, slack) {
                return;
            }
            let obj = entropic_objective(cost, formulation, cfg, &plan);
            match &best {
                Some((cur, _)) if obj >= *cur => {}
                _ => best = Some((obj, choice.to_vec())),
            }
        },
    );

    let (objective, choice) = best.ok_or_else(|| {
        Error::InvalidConfig(alloc::string::String::from(
            "no grid-feasible plan; parameters are inconsistent or resolution too coarse",
        ))
    })?;
    let mut values = DenseMatrix::zeros(n, k);
    for (i, &opt) in choice.iter().enumerate() {
        values.row_mut(i).copy_from_slice(&row_options[opt]);
    }
    Ok(OracleResult {
        plan: TransportPlan::from_matrix(values),
        objective,
        method: OracleMethod::Grid,
    })
}

fn grid_feasible(
    plan: &TransportPlan,
    formulation: Formulation,
    cfg: &SolverConfig,
    bound: Option<f64>,
    slack: f64,
) -> bool {
    let k = plan.k() as f64;
    let cols = plan.col_sums();
    match formulation {
        Formulation::Ot => cols.iter().all(|&c| math::abs(c - 1.0 / k) <= slack),
        Formulation::Uot => true,
        Formulation::Pot => cols.iter().all(|&c| math::abs(c - cfg.rho / k) <= slack),
        Formulation::Sla => {
            let b = bound.expect("bound checked by caller");
            cols.iter().all(|&c| c <= b + slack * 1e-6)
                && math::abs(plan.mass() - cfg.rho) <= slack
        }
        Formulation::P2ot => math::abs(plan.mass() - cfg.rho) <= slack,
    }
}

/// Visit every way to place units into `parts` cells; with `exact` the
/// units must all be used, otherwise at most `units` may be.
fn enumerate_compositions(
    units: usize,
    parts: usize,
    exact: bool,
    scratch: &mut Vec<usize>,
    visit: &mut impl FnMut(&[usize]),
) {
    fn rec(
        idx: usize,
        remaining: usize,
        exact: bool,
        scratch: &mut Vec<usize>,
        visit: &mut impl FnMut(&[usize]),
    ) {
        if idx == scratch.len() - 1 {
            if exact {
                scratch[idx] = remaining;
                visit(scratch);
            } else {
                for u in 0..=remaining {
                    scratch[idx] = u;
                    visit(scratch);
                }
            }
            return;
        }
        for u in 0..=remaining {
            scratch[idx] = u;
            rec(idx + 1, remaining - u, exact, scratch, visit);
        }
    }
    scratch.resize(parts, 0);
    rec(0, units, exact, scratch, visit);
}

fn search_rows(
    row: usize,
    n: usize,
    options: &[Vec<f64>],
    chosen: &mut Vec<usize>,
    visit: &mut impl FnMut(&[usize]),
) {
    if row == n {
        visit(chosen);
        return;
    }
    for opt in 0..options.len() {
        chosen[row] = opt;
        search_rows(row + 1, n, options, chosen, visit);
    }
}
