//! The concrete transport formulations, all driven by the proximal-scaling
//! loop in [`crate::transport`]:
//!
//! | solver             | rows           | columns                     | total mass |
//! |--------------------|----------------|-----------------------------|------------|
//! | [`solve_ot`]       | `= 1/N`        | `= 1/K`                     | implied 1  |
//! | [`solve_uot`]      | `= 1/N`        | KL penalty toward `1/K`     | implied 1  |
//! | [`solve_pot`]      | `<= 1/N`       | `= rho/K`                   | implied rho|
//! | [`solve_sla`]      | `<= 1/N`       | `<= b_upper`                | `s` factor |
//! | [`solve_p2ot`]     | `= 1/N` (ext.) | weighted KL, virtual column | via column |
//! | [`solve_p2ot_gsa`] | `<= 1/N`       | KL penalty toward `rho/K`   | `s` factor |
//!
//! `solve_p2ot` follows the virtual-cluster construction: the cost gains an
//! all-zero column, the column target becomes `[rho/K, ..., rho/K, 1-rho]`,
//! and the virtual column's KL weight is a large `iota` standing in for
//! infinity, which pins the unselected mass. The recursion is then plain
//! two-vector scaling with Hadamard-power column updates. `solve_p2ot_gsa`
//! is the three-factor generalized scaling baseline operating directly on
//! the K real columns with an inequality row rule and a mass factor.

use alloc::string::String;
use alloc::vec;
use alloc::vec::Vec;

use crate::error::{Error, Result};
use crate::matrix::DenseMatrix;
use crate::transport::{
    assemble_plan, kernel_matrix, scaling_loop, scaling_loop_with_mass, ConvergenceReport,
    CostMatrix, MarginalSpec, ProxRule, TransportPlan,
};

/// How tightly the virtual column's KL weight must approximate an equality
/// constraint: `iota / (iota + eps) >= 1 - VIRTUAL_EXPONENT_SLACK`.
const VIRTUAL_EXPONENT_SLACK: f64 = 1e-6;

/// Solver parameters. Defaults follow the reference operating point:
/// `epsilon = 0.1`, `lambda = 1`, `rho = 0.1`, stop when the change of the
/// column scaling vector drops below `1e-6` or after 1000 iterations.
#[derive(Debug, Clone, PartialEq)]
pub struct SolverConfig {
    /// Entropic regularization weight.
    pub epsilon: f64,
    /// KL penalty weight on real columns.
    pub lambda: f64,
    /// Fraction of transported mass, in `(0, 1]`.
    pub rho: f64,
    /// Virtual-cluster weight standing in for an infinite penalty.
    pub iota: f64,
    /// Convergence tolerance on the scaling-vector change.
    pub tol: f64,
    /// Iteration cap.
    pub max_iter: usize,
    /// Run the scaling loop in log domain.
    pub log_domain: bool,
    /// Clamp applied to predictions before taking `-log`.
    pub prediction_floor: f64,
}

impl Default for SolverConfig {
    fn default() -> Self {
        Self {
            epsilon: 0.1,
            lambda: 1.0,
            rho: 0.1,
            iota: 1e6,
            tol: 1e-6,
            max_iter: 1000,
            log_domain: false,
            prediction_floor: 1e-30,
        }
    }
}

impl SolverConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.epsilon > 0.0) || !self.epsilon.is_finite() {
            return Err(Error::InvalidConfig(alloc::format!(
                "epsilon must be positive, got {}",
                self.epsilon
            )));
        }
        if !(self.lambda > 0.0) || !self.lambda.is_finite() {
            return Err(Error::InvalidConfig(alloc::format!(
                "lambda must be positive, got {}",
                self.lambda
            )));
        }
        if !(self.rho > 0.0 && self.rho <= 1.0) {
            return Err(Error::InvalidConfig(alloc::format!(
                "rho must lie in (0, 1], got {}",
                self.rho
            )));
        }
        if !(self.tol > 0.0) {
            return Err(Error::InvalidConfig(alloc::format!(
                "tol must be positive, got {}",
                self.tol
            )));
        }
        if self.max_iter == 0 {
            return Err(Error::InvalidConfig(String::from(
                "max_iter must be at least 1",
            )));
        }
        if !(self.prediction_floor > 0.0 && self.prediction_floor <= 1e-3) {
            return Err(Error::InvalidConfig(alloc::format!(
                "prediction floor must lie in (0, 1e-3], got {}",
                self.prediction_floor
            )));
        }
        Ok(())
    }

    /// Additional check for the virtual-cluster solver: `iota` must be large
    /// enough that the virtual column behaves as an equality constraint.
    fn validate_iota(&self) -> Result<()> {
        let f_virtual = self.iota / (self.iota + self.epsilon);
        if !(f_virtual >= 1.0 - VIRTUAL_EXPONENT_SLACK) {
            return Err(Error::InvalidConfig(alloc::format!(
                "iota = {} too small for epsilon = {}: virtual exponent {} < 1 - 1e-6",
                self.iota,
                self.epsilon,
                f_virtual
            )));
        }
        Ok(())
    }
}

/// The transport formulations exposed to callers (the generalized scaling
/// baseline is a second solver for `P2ot`, not a formulation of its own).
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Formulation {
    Ot,
    Uot,
    Pot,
    Sla,
    P2ot,
}

impl Formulation {
    pub const ALL: [Formulation; 5] = [
        Formulation::Ot,
        Formulation::Uot,
        Formulation::Pot,
        Formulation::Sla,
        Formulation::P2ot,
    ];

    pub fn name(&self) -> &'static str {
        match self {
            Formulation::Ot => "ot",
            Formulation::Uot => "uot",
            Formulation::Pot => "pot",
            Formulation::Sla => "sla",
            Formulation::P2ot => "p2ot",
        }
    }
}

/// Plan over the K real columns plus the virtual column absorbing the
/// unselected mass.
#[derive(Debug, Clone)]
pub struct ExtendedPlan {
    plan: TransportPlan,
    real_cols: usize,
}

impl ExtendedPlan {
    pub fn plan(&self) -> &TransportPlan {
        &self.plan
    }

    pub fn real_cols(&self) -> usize {
        self.real_cols
    }

    /// The first K columns as a standalone plan.
    pub fn real_part(&self) -> TransportPlan {
        let n = self.plan.n();
        let mut out = DenseMatrix::zeros(n, self.real_cols);
        for i in 0..n {
            out.row_mut(i)
                .copy_from_slice(&self.plan.values().row(i)[..self.real_cols]);
        }
        TransportPlan::from_matrix(out)
    }

    /// The virtual column.
    pub fn virtual_column(&self) -> Vec<f64> {
        (0..self.plan.n())
            .map(|i| self.plan.values().get(i, self.real_cols))
            .collect()
    }

    /// Total mass parked on the virtual column.
    pub fn virtual_mass(&self) -> f64 {
        self.virtual_column().iter().sum()
    }
}

fn uniform_cols(k: usize, value: f64) -> Vec<f64> {
    vec![value; k]
}

/// Balanced OT: rows `= 1/N`, columns `= 1/K`.
pub fn solve_ot(cost: &CostMatrix, cfg: &SolverConfig) -> Result<(TransportPlan, ConvergenceReport)> {
    cfg.validate()?;
    let (n, k) = (cost.n(), cost.k());
    let kernel = kernel_matrix(cost, cfg.epsilon, cfg.log_domain)?;
    let spec = MarginalSpec::uniform_rows(n, uniform_cols(k, 1.0 / k as f64), cfg.lambda)?;
    let (state, report) = scaling_loop(
        &kernel,
        &spec,
        ProxRule::Equality,
        ProxRule::Equality,
        cfg.tol,
        cfg.max_iter,
    )?;
    Ok((assemble_plan(&state, &kernel)?, report))
}

/// Unbalanced OT: rows `= 1/N`, columns pulled toward `1/K` by a KL
/// penalty of weight `lambda`.
pub fn solve_uot(
    cost: &CostMatrix,
    cfg: &SolverConfig,
) -> Result<(TransportPlan, ConvergenceReport)> {
    cfg.validate()?;
    let (n, k) = (cost.n(), cost.k());
    let kernel = kernel_matrix(cost, cfg.epsilon, cfg.log_domain)?;
    let spec = MarginalSpec::uniform_rows(n, uniform_cols(k, 1.0 / k as f64), cfg.lambda)?;
    let (state, report) = scaling_loop(
        &kernel,
        &spec,
        ProxRule::Equality,
        ProxRule::WeightedKl,
        cfg.tol,
        cfg.max_iter,
    )?;
    Ok((assemble_plan(&state, &kernel)?, report))
}

/// Partial OT: rows `<= 1/N`, columns `= rho/K` (total mass `rho` follows
/// from the column equalities).
pub fn solve_pot(
    cost: &CostMatrix,
    cfg: &SolverConfig,
) -> Result<(TransportPlan, ConvergenceReport)> {
    cfg.validate()?;
    let (n, k) = (cost.n(), cost.k());
    let kernel = kernel_matrix(cost, cfg.epsilon, cfg.log_domain)?;
    let spec = MarginalSpec::uniform_rows(n, uniform_cols(k, cfg.rho / k as f64), cfg.lambda)?;
    let (state, report) = scaling_loop(
        &kernel,
        &spec,
        ProxRule::UpperBound,
        ProxRule::Equality,
        cfg.tol,
        cfg.max_iter,
    )?;
    Ok((assemble_plan(&state, &kernel)?, report))
}

/// SLA: rows `<= 1/N`, columns `<= b_upper`, total mass `rho` enforced by
/// the scalar factor.
pub fn solve_sla(
    cost: &CostMatrix,
    cfg: &SolverConfig,
    b_upper: f64,
) -> Result<(TransportPlan, ConvergenceReport)> {
    cfg.validate()?;
    let (n, k) = (cost.n(), cost.k());
    if !(b_upper > 0.0) || !b_upper.is_finite() {
        return Err(Error::InvalidConfig(alloc::format!(
            "column bound must be positive, got {b_upper}"
        )));
    }
    if (k as f64) * b_upper < cfg.rho {
        return Err(Error::InvalidConfig(alloc::format!(
            "infeasible: K * b_upper = {} cannot carry mass rho = {}",
            k as f64 * b_upper,
            cfg.rho
        )));
    }
    let kernel = kernel_matrix(cost, cfg.epsilon, cfg.log_domain)?;
    let spec = MarginalSpec::uniform_rows(n, uniform_cols(k, b_upper), cfg.lambda)?;
    let (state, report) = scaling_loop_with_mass(
        &kernel,
        &spec,
        ProxRule::UpperBound,
        ProxRule::UpperBound,
        cfg.rho,
        cfg.tol,
        cfg.max_iter,
    )?;
    Ok((assemble_plan(&state, &kernel)?, report))
}

/// P2OT through the virtual-cluster reformulation.
///
/// Builds the extended cost `[C, 0]`, weights `[lambda, .., lambda, iota]`,
/// column target `[rho/K .. rho/K, 1 - rho]` and uniform row marginal
/// `1/N`, runs the weighted-KL scaling recursion, and returns the first K
/// columns as the plan along with the extended plan and the report.
pub fn solve_p2ot(
    cost: &CostMatrix,
    cfg: &SolverConfig,
) -> Result<(TransportPlan, ExtendedPlan, ConvergenceReport)> {
    cfg.validate()?;
    cfg.validate_iota()?;
    let (n, k) = (cost.n(), cost.k());
    let extended = cost.with_virtual_column();
    let kernel = kernel_matrix(&extended, cfg.epsilon, cfg.log_domain)?;

    let mut col_target = uniform_cols(k, cfg.rho / k as f64);
    col_target.push(1.0 - cfg.rho);
    let mut col_weights = uniform_cols(k, cfg.lambda);
    col_weights.push(cfg.iota);
    let spec = MarginalSpec::new(vec![1.0 / n as f64; n], col_target, col_weights)?;

    let (state, report) = scaling_loop(
        &kernel,
        &spec,
        ProxRule::Equality,
        ProxRule::WeightedKl,
        cfg.tol,
        cfg.max_iter,
    )?;
    let full = assemble_plan(&state, &kernel)?;
    let extended_plan = ExtendedPlan {
        plan: full,
        real_cols: k,
    };
    Ok((extended_plan.real_part(), extended_plan, report))
}

/// P2OT through the generalized scaling baseline: inequality rows, KL
/// columns toward `rho/K`, and the scalar mass factor, directly on the K
/// real columns.
pub fn solve_p2ot_gsa(
    cost: &CostMatrix,
    cfg: &SolverConfig,
) -> Result<(TransportPlan, ConvergenceReport)> {
    cfg.validate()?;
    let (n, k) = (cost.n(), cost.k());
    let kernel = kernel_matrix(cost, cfg.epsilon, cfg.log_domain)?;
    let spec = MarginalSpec::uniform_rows(n, uniform_cols(k, cfg.rho / k as f64), cfg.lambda)?;
    let (state, report) = scaling_loop_with_mass(
        &kernel,
        &spec,
        ProxRule::UpperBound,
        ProxRule::WeightedKl,
        cfg.rho,
        cfg.tol,
        cfg.max_iter,
    )?;
    Ok((assemble_plan(&state, &kernel)?, report))
}

/// Dispatch by formulation; `b_upper` is only consulted for SLA. For P2OT
/// the real part is returned.
pub fn solve(
    formulation: Formulation,
    cost: &CostMatrix,
    cfg: &SolverConfig,
    b_upper: Option<f64>,
) -> Result<(TransportPlan, ConvergenceReport)> {
    match formulation {
        Formulation::Ot => solve_ot(cost, cfg),
        Formulation::Uot => solve_uot(cost, cfg),
        Formulation::Pot => solve_pot(cost, cfg),
        Formulation::Sla => {
            let bound = b_upper.ok_or_else(|| {
                Error::InvalidConfig(String::from("SLA requires a column upper bound"))
            })?;
            solve_sla(cost, cfg, bound)
        }
        Formulation::P2ot => {
            let (plan, _, report) = solve_p2ot(cost, cfg)?;
            Ok((plan, report))
        }
    }
}
