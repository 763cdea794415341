//! Shared numerical substrate for every transport formulation: problem
//! representation, the Gibbs kernel `M = exp(-C/eps)`, and the alternating
//! proximal-scaling loop.
//!
//! The loop maintains two scaling vectors `a` (rows) and `b` (columns) and
//! optionally a scalar mass factor `s`, so that the implied plan is
//! `Q = s * diag(a) M diag(b)`. One iteration updates
//!
//! ```text
//! a <- prox_row(s M b, alpha)  / (s M b)
//! b <- prox_col(s M' a, beta)  / (s M' a)
//! s <- mass / (a' M b)                      (only with a total-mass constraint)
//! ```
//!
//! where each prox is the KL-geometry proximal operator of the marginal
//! constraint: equality projects onto the target, an upper bound clamps,
//! and a weighted-KL penalty with weight `lambda_j` yields the Hadamard
//! power `(beta_j / z_j)^(lambda_j / (lambda_j + eps))`.
//!
//! Iteration stops when the max-norm change of `b` (and of `s`, when
//! present) drops to the tolerance, or at the iteration cap. An optional
//! log-domain path carries `log a`, `log b` through log-sum-exp reductions
//! for configurations where the plain kernel underflows; its stopping
//! metric is the max-norm change of `log b`.

use alloc::string::String;
use alloc::vec;
use alloc::vec::Vec;
use core::time::Duration;

use crate::error::{Error, Result};
use crate::math;
use crate::matrix::DenseMatrix;

/// Input row-sum slack accepted when constructing a [`PredictionMatrix`].
const PREDICTION_ROW_SUM_TOL: f64 = 1e-6;
/// Row-marginal normalization required of [`MarginalSpec`].
const ROW_MARGINAL_SUM_TOL: f64 = 1e-12;

/// Nonnegative dense cost matrix, rows = samples, columns = clusters.
#[derive(Debug, Clone, PartialEq)]
pub struct CostMatrix {
    values: DenseMatrix,
}

impl CostMatrix {
    /// Validates that every entry is finite and nonnegative.
    pub fn new(values: DenseMatrix) -> Result<Self> {
        for i in 0..values.rows() {
            for (j, &v) in values.row(i).iter().enumerate() {
                if !v.is_finite() || v < 0.0 {
                    return Err(Error::InvalidInput(alloc::format!(
                        "cost entry ({i},{j}) = {v} must be finite and >= 0"
                    )));
                }
            }
        }
        Ok(Self { values })
    }

    pub fn n(&self) -> usize {
        self.values.rows()
    }

    pub fn k(&self) -> usize {
        self.values.cols()
    }

    pub fn values(&self) -> &DenseMatrix {
        &self.values
    }

    /// The cost extended with an all-zero virtual column.
    pub fn with_virtual_column(&self) -> CostMatrix {
        let (n, k) = (self.n(), self.k());
        let mut out = DenseMatrix::zeros(n, k + 1);
        for i in 0..n {
            out.row_mut(i)[..k].copy_from_slice(self.values.row(i));
        }
        CostMatrix { values: out }
    }
}

/// Row-stochastic prediction matrix with entries in `(0, 1]`.
///
/// Construction accepts rows whose sums deviate from 1 by at most `1e-6`
/// and renormalizes them exactly, so stored rows sum to 1 within `1e-9`.
#[derive(Debug, Clone, PartialEq)]
pub struct PredictionMatrix {
    values: DenseMatrix,
}

impl PredictionMatrix {
    pub fn new(values: DenseMatrix) -> Result<Self> {
        let mut values = values;
        for i in 0..values.rows() {
            let row = values.row_mut(i);
            let mut sum = 0.0;
            for &v in row.iter() {
                if !v.is_finite() || v < 0.0 || v > 1.0 {
                    return Err(Error::InvalidInput(alloc::format!(
                        "prediction entry {v} in row {i} is outside [0, 1]"
                    )));
                }
                sum += v;
            }
            if math::abs(sum - 1.0) > PREDICTION_ROW_SUM_TOL {
                return Err(Error::InvalidInput(alloc::format!(
                    "prediction row {i} sums to {sum}, off by more than {PREDICTION_ROW_SUM_TOL}"
                )));
            }
            for v in row.iter_mut() {
                *v /= sum;
            }
        }
        Ok(Self { values })
    }

    pub fn n(&self) -> usize {
        self.values.rows()
    }

    pub fn k(&self) -> usize {
        self.values.cols()
    }

    pub fn values(&self) -> &DenseMatrix {
        &self.values
    }
}

/// Marginal data for a scaling problem: row marginal `alpha`, column target
/// `beta`, and per-column penalty weights `lambda` (used by the weighted-KL
/// column rule; effectively-infinite constraints are expressed as a large
/// finite weight).
#[derive(Debug, Clone, PartialEq)]
pub struct MarginalSpec {
    row_marginal: Vec<f64>,
    col_target: Vec<f64>,
    col_weights: Vec<f64>,
}

impl MarginalSpec {
    pub fn new(row_marginal: Vec<f64>, col_target: Vec<f64>, col_weights: Vec<f64>) -> Result<Self> {
        if row_marginal.is_empty() || col_target.is_empty() {
            return Err(Error::InvalidInput(String::from(
                "marginals must be non-empty",
            )));
        }
        if col_weights.len() != col_target.len() {
            return Err(Error::InvalidInput(alloc::format!(
                "{} column weights for {} column targets",
                col_weights.len(),
                col_target.len()
            )));
        }
        let mut sum = 0.0;
        for &v in &row_marginal {
            if !v.is_finite() || v < 0.0 {
                return Err(Error::InvalidInput(String::from(
                    "row marginal entries must be finite and >= 0",
                )));
            }
            sum += v;
        }
        if math::abs(sum - 1.0) > ROW_MARGINAL_SUM_TOL {
            return Err(Error::InvalidInput(alloc::format!(
                "row marginal sums to {sum}, expected 1 within {ROW_MARGINAL_SUM_TOL}"
            )));
        }
        if col_target.iter().any(|&v| !v.is_finite() || v < 0.0) {
            return Err(Error::InvalidInput(String::from(
                "column targets must be finite and >= 0",
            )));
        }
        if col_weights.iter().any(|&v| !v.is_finite() || v <= 0.0) {
            return Err(Error::InvalidInput(String::from(
                "column weights must be finite and > 0",
            )));
        }
        Ok(Self {
            row_marginal,
            col_target,
            col_weights,
        })
    }

    /// Uniform `alpha = 1/n`, given `beta` and uniform column weight.
    pub fn uniform_rows(n: usize, col_target: Vec<f64>, col_weight: f64) -> Result<Self> {
        let weights = vec![col_weight; col_target.len()];
        Self::new(vec![1.0 / n as f64; n], col_target, weights)
    }

    pub fn row_marginal(&self) -> &[f64] {
        &self.row_marginal
    }

    pub fn col_target(&self) -> &[f64] {
        &self.col_target
    }

    pub fn col_weights(&self) -> &[f64] {
        &self.col_weights
    }
}

/// Nonnegative transport plan together with its total mass.
#[derive(Debug, Clone, PartialEq)]
pub struct TransportPlan {
    values: DenseMatrix,
    mass: f64,
}

impl TransportPlan {
    pub fn from_matrix(values: DenseMatrix) -> Self {
        let mass = values.total();
        Self { values, mass }
    }

    pub fn n(&self) -> usize {
        self.values.rows()
    }

    pub fn k(&self) -> usize {
        self.values.cols()
    }

    pub fn values(&self) -> &DenseMatrix {
        &self.values
    }

    pub fn mass(&self) -> f64 {
        self.mass
    }

    pub fn row_sums(&self) -> Vec<f64> {
        self.values.row_sums()
    }

    pub fn col_sums(&self) -> Vec<f64> {
        self.values.col_sums()
    }

    pub fn max_abs_diff(&self, other: &TransportPlan) -> f64 {
        self.values.max_abs_diff(&other.values)
    }
}

/// Gibbs kernel of a cost matrix at temperature `eps`, optionally carrying
/// its log-domain representation `log M = -C/eps`.
#[derive(Debug, Clone)]
pub struct Kernel {
    eps: f64,
    m: DenseMatrix,
    log_m: Option<DenseMatrix>,
}

impl Kernel {
    pub fn eps(&self) -> f64 {
        self.eps
    }

    pub fn matrix(&self) -> &DenseMatrix {
        &self.m
    }

    pub fn log_matrix(&self) -> Option<&DenseMatrix> {
        self.log_m.as_ref()
    }

    pub fn rows(&self) -> usize {
        self.m.rows()
    }

    pub fn cols(&self) -> usize {
        self.m.cols()
    }

    pub fn is_log_domain(&self) -> bool {
        self.log_m.is_some()
    }
}

/// `M = exp(-C/eps)`.
///
/// In plain mode any entry underflowing to zero is an error instructing the
/// caller to switch on log-domain stabilization; in log mode the exact
/// representation `log M = -C/eps` is kept alongside and underflow in the
/// materialized `M` is harmless (the loop never reads it).
pub fn kernel_matrix(cost: &CostMatrix, eps: f64, log_domain: bool) -> Result<Kernel> {
    if !(eps > 0.0) || !eps.is_finite() {
        return Err(Error::InvalidConfig(alloc::format!(
            "epsilon must be a positive finite real, got {eps}"
        )));
    }
    let log_m = cost.values().map(|c| -c / eps);
    let m = log_m.map(math::exp);
    if !log_domain {
        for i in 0..m.rows() {
            for (j, &v) in m.row(i).iter().enumerate() {
                if v == 0.0 {
                    return Err(Error::NumericUnderflow {
                        exponent: log_m.get(i, j),
                    });
                }
            }
        }
    }
    Ok(Kernel {
        eps,
        m,
        log_m: log_domain.then_some(log_m),
    })
}

/// `C_ij = -ln(max(P_ij, floor))`, clamped at zero.
pub fn cost_from_predictions(p: &PredictionMatrix, floor: f64) -> Result<CostMatrix> {
    if !(floor > 0.0 && floor <= 1e-3) {
        return Err(Error::InvalidConfig(alloc::format!(
            "prediction floor must lie in (0, 1e-3], got {floor}"
        )));
    }
    let values = p.values().map(|v| (-math::ln(v.max(floor))).max(0.0));
    CostMatrix::new(values)
}

/// KL-geometry proximal rule applied to one side's marginal.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ProxRule {
    /// Marginal pinned to the target.
    Equality,
    /// Marginal at most the target.
    UpperBound,
    /// Marginal pulled toward the target by a weighted KL penalty; the
    /// per-column weights come from [`MarginalSpec::col_weights`].
    WeightedKl,
}

/// Scaling vectors and bookkeeping produced by [`scaling_loop`].
#[derive(Debug, Clone)]
pub struct ScalingState {
    /// Row scaling vector (linear space; saturated exponentials of the log
    /// state in log-domain mode).
    pub a: Vec<f64>,
    /// Column scaling vector.
    pub b: Vec<f64>,
    /// Column exponents `f_j = lambda_j / (lambda_j + eps)`.
    pub exponents: Vec<f64>,
    /// Total-mass factor `s` (1 when no mass constraint was active).
    pub mass_scale: f64,
    /// Iterations performed.
    pub iteration: usize,
    /// Max-norm change of `b` at the last iteration.
    pub last_b_change: f64,
    log: Option<LogState>,
}

#[derive(Debug, Clone)]
struct LogState {
    a: Vec<f64>,
    b: Vec<f64>,
    s: f64,
}

/// Outcome of a scaling run.
#[derive(Debug, Clone, PartialEq)]
pub struct ConvergenceReport {
    pub converged: bool,
    pub iterations: usize,
    pub final_b_change: f64,
    pub wall_time: Duration,
}

/// Alternating proximal-scaling loop without a total-mass constraint
/// (two-marginal problems: OT, UOT, POT, and the virtual-cluster P2OT).
pub fn scaling_loop(
    kernel: &Kernel,
    spec: &MarginalSpec,
    row_rule: ProxRule,
    col_rule: ProxRule,
    tol: f64,
    max_iter: usize,
) -> Result<(ScalingState, ConvergenceReport)> {
    run_scaling(kernel, spec, row_rule, col_rule, None, tol, max_iter)
}

/// Scaling loop with an additional total-mass equality, maintained through
/// the scalar factor `s` (SLA and the generalized scaling baseline).
pub fn scaling_loop_with_mass(
    kernel: &Kernel,
    spec: &MarginalSpec,
    row_rule: ProxRule,
    col_rule: ProxRule,
    total_mass: f64,
    tol: f64,
    max_iter: usize,
) -> Result<(ScalingState, ConvergenceReport)> {
    if !(total_mass > 0.0) || !total_mass.is_finite() {
        return Err(Error::InvalidConfig(alloc::format!(
            "total mass must be positive, got {total_mass}"
        )));
    }
    run_scaling(
        kernel,
        spec,
        row_rule,
        col_rule,
        Some(total_mass),
        tol,
        max_iter,
    )
}

fn run_scaling(
    kernel: &Kernel,
    spec: &MarginalSpec,
    row_rule: ProxRule,
    col_rule: ProxRule,
    total_mass: Option<f64>,
    tol: f64,
    max_iter: usize,
) -> Result<(ScalingState, ConvergenceReport)> {
    if !(tol > 0.0) {
        return Err(Error::InvalidConfig(alloc::format!(
            "tolerance must be positive, got {tol}"
        )));
    }
    if max_iter == 0 {
        return Err(Error::InvalidConfig(String::from(
            "iteration cap must be at least 1",
        )));
    }
    if row_rule == ProxRule::WeightedKl {
        return Err(Error::InvalidConfig(String::from(
            "weighted-KL row marginals are not supported; only column weights exist",
        )));
    }
    let (n, k) = (kernel.rows(), kernel.cols());
    if spec.row_marginal().len() != n || spec.col_target().len() != k {
        return Err(Error::InvalidInput(alloc::format!(
            "marginal sizes ({}, {}) do not match kernel shape {n}x{k}",
            spec.row_marginal().len(),
            spec.col_target().len()
        )));
    }

    let exponents: Vec<f64> = spec
        .col_weights()
        .iter()
        .map(|&l| l / (l + kernel.eps()))
        .collect();

    let timer = Timer::start();
    let outcome = if kernel.is_log_domain() {
        run_log(kernel, spec, row_rule, col_rule, total_mass, tol, max_iter, &exponents)
    } else {
        run_plain(kernel, spec, row_rule, col_rule, total_mass, tol, max_iter, &exponents)
    }?;
    let (mut state, mut report) = outcome;
    state.exponents = exponents;
    report.wall_time = timer.elapsed();
    Ok((state, report))
}

#[allow(clippy::too_many_arguments)]
fn run_plain(
    kernel: &Kernel,
    spec: &MarginalSpec,
    row_rule: ProxRule,
    col_rule: ProxRule,
    total_mass: Option<f64>,
    tol: f64,
    max_iter: usize,
    exponents: &[f64],
) -> Result<(ScalingState, ConvergenceReport)> {
    let (n, k) = (kernel.rows(), kernel.cols());
    let m = kernel.matrix();
    let alpha = spec.row_marginal();
    let beta = spec.col_target();

    let mut a = vec![1.0; n];
    let mut b = vec![1.0; k];
    let mut s = 1.0;
    let mut mb = vec![0.0; n];
    let mut mta = vec![0.0; k];
    m.matvec(&b, &mut mb);

    let mut iterations = 0;
    let mut change = f64::INFINITY;
    let mut converged = false;
    for it in 1..=max_iter {
        iterations = it;
        for i in 0..n {
            let z = s * mb[i];
            a[i] = match row_rule {
                ProxRule::Equality => alpha[i] / z,
                ProxRule::UpperBound => (alpha[i] / z).min(1.0),
                ProxRule::WeightedKl => unreachable!("rejected above"),
            };
        }
        m.matvec_t(&a, &mut mta);
        change = 0.0;
        for j in 0..k {
            let z = s * mta[j];
            let next = match col_rule {
                ProxRule::Equality => beta[j] / z,
                ProxRule::UpperBound => (beta[j] / z).min(1.0),
                ProxRule::WeightedKl => {
                    if beta[j] == 0.0 {
                        0.0
                    } else {
                        math::powf(beta[j] / z, exponents[j])
                    }
                }
            };
            change = change.max(math::abs(next - b[j]));
            b[j] = next;
        }
        m.matvec(&b, &mut mb);
        if let Some(mass) = total_mass {
            let dot: f64 = a.iter().zip(&mb).map(|(av, mv)| av * mv).sum();
            let next = mass / dot;
            change = change.max(math::abs(next - s));
            s = next;
        }
        let finite =
            a.iter().all(|v| v.is_finite()) && b.iter().all(|v| v.is_finite()) && s.is_finite();
        if !finite {
            return Err(Error::Divergence { iteration: it });
        }
        if change <= tol {
            converged = true;
            break;
        }
    }

    Ok((
        ScalingState {
            a,
            b,
            exponents: Vec::new(),
            mass_scale: s,
            iteration: iterations,
            last_b_change: change,
            log: None,
        },
        ConvergenceReport {
            converged,
            iterations,
            final_b_change: change,
            wall_time: Duration::ZERO,
        },
    ))
}

#[allow(clippy::too_many_arguments)]
fn run_log(
    kernel: &Kernel,
    spec: &MarginalSpec,
    row_rule: ProxRule,
    col_rule: ProxRule,
    total_mass: Option<f64>,
    tol: f64,
    max_iter: usize,
    exponents: &[f64],
) -> Result<(ScalingState, ConvergenceReport)> {
    let (n, k) = (kernel.rows(), kernel.cols());
    let log_m = kernel.log_matrix().expect("log kernel");
    let log_alpha: Vec<f64> = spec.row_marginal().iter().map(|&v| math::ln(v)).collect();
    let log_beta: Vec<f64> = spec.col_target().iter().map(|&v| math::ln(v)).collect();

    let mut la = vec![0.0; n];
    let mut lb = vec![0.0; k];
    let mut ls = 0.0;

    let mut iterations = 0;
    let mut change = f64::INFINITY;
    let mut converged = false;
    for it in 1..=max_iter {
        iterations = it;
        for i in 0..n {
            let lse = math::log_sum_exp(log_m.row(i).iter().zip(&lb).map(|(m, b)| m + b));
            let z = ls + lse;
            la[i] = match row_rule {
                ProxRule::Equality => log_alpha[i] - z,
                ProxRule::UpperBound => (log_alpha[i] - z).min(0.0),
                ProxRule::WeightedKl => unreachable!("rejected above"),
            };
        }
        change = 0.0;
        for j in 0..k {
            let lse = math::log_sum_exp((0..n).map(|i| log_m.get(i, j) + la[i]));
            let z = ls + lse;
            let next = match col_rule {
                ProxRule::Equality => log_beta[j] - z,
                ProxRule::UpperBound => (log_beta[j] - z).min(0.0),
                ProxRule::WeightedKl => {
                    if log_beta[j] == f64::NEG_INFINITY {
                        f64::NEG_INFINITY
                    } else {
                        exponents[j] * (log_beta[j] - z)
                    }
                }
            };
            let delta = if next == lb[j] {
                // covers the -inf == -inf case, where subtraction is NaN
                0.0
            } else {
                math::abs(next - lb[j])
            };
            change = change.max(delta);
            lb[j] = next;
        }
        if let Some(mass) = total_mass {
            let log_total = math::log_sum_exp((0..n).flat_map(|i| {
                let lai = la[i];
                let row = log_m.row(i);
                row.iter().zip(lb.iter()).map(move |(m, b)| lai + m + b)
            }));
            let next = math::ln(mass) - log_total;
            change = change.max(math::abs(next - ls));
            ls = next;
        }
        let bad = la.iter().any(|v| v.is_nan() || *v == f64::INFINITY)
            || lb.iter().any(|v| v.is_nan() || *v == f64::INFINITY)
            || ls.is_nan()
            || ls == f64::INFINITY;
        if bad {
            return Err(Error::Divergence { iteration: it });
        }
        if change <= tol {
            converged = true;
            break;
        }
    }

    let a: Vec<f64> = la.iter().map(|&v| math::exp(v)).collect();
    let b: Vec<f64> = lb.iter().map(|&v| math::exp(v)).collect();
    Ok((
        ScalingState {
            a,
            b,
            exponents: Vec::new(),
            mass_scale: math::exp(ls),
            iteration: iterations,
            last_b_change: change,
            log: Some(LogState { a: la, b: lb, s: ls }),
        },
        ConvergenceReport {
            converged,
            iterations,
            final_b_change: change,
            wall_time: Duration::ZERO,
        },
    ))
}

/// `Q = s * diag(a) M diag(b)`; in log-domain mode each entry is formed as
/// a single exponential of the summed logs, so extreme scaling vectors do
/// not overflow on the way.
pub fn assemble_plan(state: &ScalingState, kernel: &Kernel) -> Result<TransportPlan> {
    let (n, k) = (kernel.rows(), kernel.cols());
    if state.a.len() != n || state.b.len() != k {
        return Err(Error::InvalidInput(alloc::format!(
            "state sized ({}, {}) does not match kernel shape {n}x{k}",
            state.a.len(),
            state.b.len()
        )));
    }
    let mut out = DenseMatrix::zeros(n, k);
    match &state.log {
        Some(log) => {
            let log_m = kernel.log_matrix().ok_or_else(|| {
                Error::InvalidInput(String::from(
                    "log-domain state requires a log-domain kernel",
                ))
            })?;
            for i in 0..n {
                let row = out.row_mut(i);
                let lm = log_m.row(i);
                for j in 0..k {
                    row[j] = math::exp(log.s + log.a[i] + lm[j] + log.b[j]);
                }
            }
        }
        None => {
            let m = kernel.matrix();
            for i in 0..n {
                let row = out.row_mut(i);
                let mr = m.row(i);
                for j in 0..k {
                    row[j] = state.mass_scale * state.a[i] * mr[j] * state.b[j];
                }
            }
        }
    }
    Ok(TransportPlan::from_matrix(out))
}

struct Timer {
    #[cfg(feature = "std")]
    start: std::time::Instant,
}

impl Timer {
    fn start() -> Self {
        Self {
            #[cfg(feature = "std")]
            start: std::time::Instant::now(),
        }
    }

    fn elapsed(&self) -> Duration {
        #[cfg(feature = "std")]
        {
            self.start.elapsed()
        }
        #[cfg(not(feature = "std"))]
        {
            Duration::ZERO
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;

    fn cost(rows: usize, cols: usize, data: &[f64]) -> CostMatrix {
        CostMatrix::new(DenseMatrix::from_vec(rows, cols, data.to_vec()).unwrap()).unwrap()
    }

    #[test]
    fn kernel_of_zero_cost_is_all_ones() {
        let c = cost(2, 2, &[0.0; 4]);
        let kern = kernel_matrix(&c, 0.1, false).unwrap();
        for i in 0..2 {
            for j in 0..2 {
                assert_eq!(kern.matrix().get(i, j), 1.0);
            }
        }
    }

    #[test]
    fn kernel_entry_matches_direct_evaluation() {
        // -ln(0.794...) = 0.2303 at eps 0.1 gives exp(-2.303)
        let c = cost(1, 1, &[0.2303]);
        let kern = kernel_matrix(&c, 0.1, false).unwrap();
        assert_abs_diff_eq!(kern.matrix().get(0, 0), math::exp(-2.303), epsilon = 1e-12);
        assert_abs_diff_eq!(kern.matrix().get(0, 0), 0.09997, epsilon = 1e-5);
    }

    #[test]
    fn kernel_underflow_is_reported_in_plain_mode() {
        let c = cost(1, 2, &[0.0, 1e6]);
        match kernel_matrix(&c, 0.1, false) {
            Err(Error::NumericUnderflow { exponent }) => {
                assert_abs_diff_eq!(exponent, -1e7, epsilon = 1.0)
            }
            other => panic!("expected underflow, got {other:?}"),
        }
        // identical input is fine in log mode
        assert!(kernel_matrix(&c, 0.1, true).is_ok());
    }

    #[test]
    fn kernel_rejects_nonpositive_epsilon() {
        let c = cost(1, 1, &[0.5]);
        assert!(matches!(
            kernel_matrix(&c, 0.0, false),
            Err(Error::InvalidConfig(_))
        ));
        assert!(matches!(
            kernel_matrix(&c, -1.0, false),
            Err(Error::InvalidConfig(_))
        ));
    }

    #[test]
    fn kernel_power_identity_across_epsilons() {
        let c = cost(2, 3, &[0.3, 1.2, 0.7, 2.0, 0.05, 0.9]);
        let (e1, e2) = (0.1, 0.25);
        let k1 = kernel_matrix(&c, e1, false).unwrap();
        let k2 = kernel_matrix(&c, e2, false).unwrap();
        for i in 0..2 {
            for j in 0..3 {
                let lifted = math::powf(k1.matrix().get(i, j), e1 / e2);
                assert_abs_diff_eq!(lifted, k2.matrix().get(i, j), epsilon = 1e-12);
            }
        }
    }

    #[test]
    fn cost_from_uniform_and_unit_predictions() {
        let p = PredictionMatrix::new(DenseMatrix::from_vec(1, 1, vec![1.0]).unwrap()).unwrap();
        let c = cost_from_predictions(&p, 1e-30).unwrap();
        assert_eq!(c.values().get(0, 0), 0.0);

        let p = PredictionMatrix::new(DenseMatrix::from_vec(1, 2, vec![0.5, 0.5]).unwrap()).unwrap();
        let c = cost_from_predictions(&p, 1e-30).unwrap();
        assert_abs_diff_eq!(c.values().get(0, 0), 0.6931, epsilon = 1e-4);
        assert_abs_diff_eq!(c.values().get(0, 1), 0.6931, epsilon = 1e-4);
    }

    #[test]
    fn cost_floor_applies_to_zero_predictions() {
        let p = PredictionMatrix::new(DenseMatrix::from_vec(1, 2, vec![0.0, 1.0]).unwrap()).unwrap();
        let c = cost_from_predictions(&p, 1e-30).unwrap();
        assert_abs_diff_eq!(c.values().get(0, 0), 69.08, epsilon = 0.01);
    }

    #[test]
    fn malformed_prediction_rows_are_rejected() {
        let raw = DenseMatrix::from_vec(1, 2, vec![0.6, 0.5]).unwrap();
        assert!(matches!(
            PredictionMatrix::new(raw),
            Err(Error::InvalidInput(_))
        ));
        // within 1e-6 is accepted and renormalized
        let raw = DenseMatrix::from_vec(1, 2, vec![0.5, 0.5000001]).unwrap();
        let p = PredictionMatrix::new(raw).unwrap();
        let sum: f64 = p.values().row(0).iter().sum();
        assert_abs_diff_eq!(sum, 1.0, epsilon = 1e-9);
    }

    #[test]
    fn symmetric_all_ones_kernel_scales_to_quarter_plan() {
        let c = cost(2, 2, &[0.0; 4]);
        let kern = kernel_matrix(&c, 1.0, false).unwrap();
        let spec = MarginalSpec::new(vec![0.5, 0.5], vec![0.5, 0.5], vec![1.0, 1.0]).unwrap();
        let (state, report) = scaling_loop(
            &kern,
            &spec,
            ProxRule::Equality,
            ProxRule::Equality,
            1e-12,
            100,
        )
        .unwrap();
        assert!(report.converged);
        assert_abs_diff_eq!(state.a[0], state.b[0], epsilon = 1e-12);
        let plan = assemble_plan(&state, &kern).unwrap();
        for i in 0..2 {
            for j in 0..2 {
                assert_abs_diff_eq!(plan.values().get(i, j), 0.25, epsilon = 1e-10);
            }
        }
    }

    #[test]
    fn zero_iteration_cap_is_rejected() {
        let c = cost(2, 2, &[0.0; 4]);
        let kern = kernel_matrix(&c, 1.0, false).unwrap();
        let spec = MarginalSpec::new(vec![0.5, 0.5], vec![0.5, 0.5], vec![1.0, 1.0]).unwrap();
        assert!(matches!(
            scaling_loop(&kern, &spec, ProxRule::Equality, ProxRule::Equality, 1e-6, 0),
            Err(Error::InvalidConfig(_))
        ));
    }

    #[test]
    fn sinkhorn_marginals_converge_on_random_kernel() {
        // fixed "random" positive M via a hand-rolled cost
        let c = cost(3, 3, &[0.11, 0.92, 0.33, 0.54, 0.25, 0.76, 0.87, 0.48, 0.09]);
        let kern = kernel_matrix(&c, 0.5, false).unwrap();
        let alpha = vec![0.2, 0.5, 0.3];
        let beta = vec![0.4, 0.4, 0.2];
        let spec = MarginalSpec::new(alpha.clone(), beta.clone(), vec![1.0; 3]).unwrap();
        let (state, report) = scaling_loop(
            &kern,
            &spec,
            ProxRule::Equality,
            ProxRule::Equality,
            1e-10,
            10_000,
        )
        .unwrap();
        assert!(report.converged);
        let plan = assemble_plan(&state, &kern).unwrap();
        for (got, want) in plan.row_sums().iter().zip(&alpha) {
            assert_abs_diff_eq!(got, want, epsilon = 1e-8);
        }
        for (got, want) in plan.col_sums().iter().zip(&beta) {
            assert_abs_diff_eq!(got, want, epsilon = 1e-8);
        }
    }

    #[test]
    fn assemble_plan_identity_and_row_scaling() {
        let c = cost(2, 2, &[0.0; 4]);
        let kern = kernel_matrix(&c, 1.0, false).unwrap();
        let state = ScalingState {
            a: vec![1.0, 1.0],
            b: vec![1.0, 1.0],
            exponents: vec![],
            mass_scale: 1.0,
            iteration: 0,
            last_b_change: 0.0,
            log: None,
        };
        let plan = assemble_plan(&state, &kern).unwrap();
        assert_eq!(plan.values(), kern.matrix());

        let state = ScalingState {
            a: vec![2.0, 0.5],
            ..state
        };
        let plan = assemble_plan(&state, &kern).unwrap();
        assert_eq!(plan.values().row(0), &[2.0, 2.0]);
        assert_eq!(plan.values().row(1), &[0.5, 0.5]);
    }

    #[test]
    fn log_domain_agrees_with_plain_on_sinkhorn() {
        let c = cost(3, 2, &[0.4, 1.3, 0.9, 0.2, 1.7, 0.6]);
        let spec =
            MarginalSpec::new(vec![0.3, 0.3, 0.4], vec![0.5, 0.5], vec![1.0, 1.0]).unwrap();
        let plain = kernel_matrix(&c, 0.2, false).unwrap();
        let logk = kernel_matrix(&c, 0.2, true).unwrap();
        let (sp, rp) = scaling_loop(
            &plain,
            &spec,
            ProxRule::Equality,
            ProxRule::Equality,
            1e-12,
            20_000,
        )
        .unwrap();
        let (sl, rl) = scaling_loop(
            &logk,
            &spec,
            ProxRule::Equality,
            ProxRule::Equality,
            1e-12,
            20_000,
        )
        .unwrap();
        assert!(rp.converged && rl.converged);
        let qp = assemble_plan(&sp, &plain).unwrap();
        let ql = assemble_plan(&sl, &logk).unwrap();
        assert!(qp.max_abs_diff(&ql) < 1e-9);
    }

    #[test]
    fn log_domain_survives_extreme_costs() {
        // plain mode underflows here
        let c = cost(2, 2, &[0.0, 500.0, 500.0, 0.0]);
        let kern = kernel_matrix(&c, 0.1, true).unwrap();
        let spec = MarginalSpec::new(vec![0.5, 0.5], vec![0.5, 0.5], vec![1.0, 1.0]).unwrap();
        let (state, report) = scaling_loop(
            &kern,
            &spec,
            ProxRule::Equality,
            ProxRule::Equality,
            1e-10,
            10_000,
        )
        .unwrap();
        assert!(report.converged);
        let plan = assemble_plan(&state, &kern).unwrap();
        assert_abs_diff_eq!(plan.values().get(0, 0), 0.5, epsilon = 1e-9);
        assert_abs_diff_eq!(plan.values().get(0, 1), 0.0, epsilon = 1e-9);
        assert_abs_diff_eq!(plan.mass(), 1.0, epsilon = 1e-9);
    }

    #[test]
    fn scaling_is_deterministic() {
        let c = cost(3, 3, &[0.11, 0.92, 0.33, 0.54, 0.25, 0.76, 0.87, 0.48, 0.09]);
        let kern = kernel_matrix(&c, 0.3, false).unwrap();
        let spec = MarginalSpec::uniform_rows(3, vec![1.0 / 3.0; 3], 1.0).unwrap();
        let run = || {
            let (state, _) = scaling_loop(
                &kern,
                &spec,
                ProxRule::Equality,
                ProxRule::WeightedKl,
                1e-9,
                500,
            )
            .unwrap();
            (state.a, state.b)
        };
        assert_eq!(run(), run());
    }
}
