//! Synthetic imbalanced-clustering harness.
//!
//! The setup alternates pseudo-label generation and representation
//! updates at desk scale: Gaussian blobs with a geometric class-size
//! profile stand in for an imbalanced dataset, a linear softmax probe
//! stands in for the backbone, and each mini-batch's pseudo-labels come
//! from a transport solver over the batch's predictions augmented with a
//! memory buffer of recent historical predictions. The probe is updated
//! by plain gradient descent on the weighted cross-entropy
//! `<Q, -log P> / rho`, so low-weight (unselected) samples contribute
//! little early in training.
//!
//! Buffer rows enter the transport problem (they stabilize the column
//! marginals) but gradients flow only through current-batch rows: stored
//! predictions are stale constants.

use alloc::collections::VecDeque;
use alloc::vec;
use alloc::vec::Vec;

use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};
use crate::math;
use crate::matrix::DenseMatrix;
use crate::metrics::{evaluate, EvalReport};
use crate::rng;
use crate::schedule::{rho_at, RampKind, RampSchedule};
use crate::solvers::{solve_ot, solve_p2ot, solve_pot, solve_uot, Formulation, SolverConfig};
use crate::transport::{cost_from_predictions, PredictionMatrix, TransportPlan};

// sub-stream ids per seed, so dataset and training draws stay decoupled
const STREAM_DATA: u64 = 0;
const STREAM_INIT: u64 = 1;
const STREAM_TRAIN: u64 = 2;

/// Gaussian-blob dataset with geometric class sizes.
#[derive(Debug, Clone)]
pub struct SyntheticDataset {
    /// `n x d` feature matrix.
    pub points: DenseMatrix,
    /// Cluster id per row, in `[0, k)`.
    pub true_labels: Vec<usize>,
    /// Per-class counts, non-increasing, `sizes[0] / sizes[k-1] = R`.
    pub class_sizes: Vec<usize>,
    pub seed: u64,
}

impl SyntheticDataset {
    pub fn n(&self) -> usize {
        self.points.rows()
    }

    pub fn dim(&self) -> usize {
        self.points.cols()
    }

    pub fn k(&self) -> usize {
        self.class_sizes.len()
    }
}

/// Linear softmax probe with a bias row; weights are `(d+1) x k`.
#[derive(Debug, Clone)]
pub struct PredictorState {
    pub weights: DenseMatrix,
    pub learning_rate: f64,
    /// Gradient steps taken so far (one per mini-batch solve).
    pub step: usize,
}

impl PredictorState {
    pub fn init(dim: usize, k: usize, learning_rate: f64, scale: f64, rng: &mut ChaCha8Rng) -> Self {
        let mut weights = DenseMatrix::zeros(dim + 1, k);
        for i in 0..=dim {
            for j in 0..k {
                weights.set(i, j, scale * rng::standard_normal(rng));
            }
        }
        Self {
            weights,
            learning_rate,
            step: 0,
        }
    }

    /// Softmax predictions for the selected rows of `points`.
    pub fn predict_rows(&self, points: &DenseMatrix, rows: &[usize]) -> DenseMatrix {
        let k = self.weights.cols();
        let d = points.cols();
        let mut out = DenseMatrix::zeros(rows.len(), k);
        for (r, &i) in rows.iter().enumerate() {
            let x = points.row(i);
            let logits = out.row_mut(r);
            for j in 0..k {
                let mut z = self.weights.get(d, j);
                for (f, &xv) in x.iter().enumerate() {
                    z += self.weights.get(f, j) * xv;
                }
                logits[j] = z;
            }
            softmax_in_place(logits);
        }
        out
    }

    pub fn is_finite(&self) -> bool {
        self.weights.is_finite()
    }
}

fn softmax_in_place(row: &mut [f64]) {
    let max = row.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let mut sum = 0.0;
    for v in row.iter_mut() {
        *v = math::exp(*v - max);
        sum += *v;
    }
    for v in row.iter_mut() {
        *v /= sum;
    }
}

/// Ring buffer of historical prediction rows, oldest evicted first.
#[derive(Debug, Clone)]
pub struct MemoryBuffer {
    capacity: usize,
    entries: VecDeque<(usize, Vec<f64>)>,
}

impl MemoryBuffer {
    /// The reference setup uses a queue of 5120 historical predictions.
    pub const DEFAULT_CAPACITY: usize = 5120;

    pub fn new(capacity: usize) -> Self {
        Self {
            capacity,
            entries: VecDeque::new(),
        }
    }

    pub fn capacity(&self) -> usize {
        self.capacity
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn push(&mut self, sample: usize, prediction: Vec<f64>) {
        if self.capacity == 0 {
            return;
        }
        if self.entries.len() == self.capacity {
            self.entries.pop_front();
        }
        self.entries.push_back((sample, prediction));
    }

    pub fn rows(&self) -> impl Iterator<Item = &(usize, Vec<f64>)> {
        self.entries.iter()
    }
}

/// One evaluated epoch.
#[derive(Debug, Clone, PartialEq)]
pub struct TrainLogRow {
    pub epoch: usize,
    /// Mean mini-batch loss, already scaled by `1/rho`.
    pub loss: f64,
    pub acc: f64,
    pub nmi: f64,
    pub f1: f64,
    pub weighted_precision: f64,
    pub weighted_recall: f64,
    /// Schedule value entering the epoch.
    pub rho: f64,
}

/// Per-epoch log of a training run.
#[derive(Debug, Clone, Default)]
pub struct TrainLog {
    pub rows: Vec<TrainLogRow>,
}

impl TrainLog {
    pub fn final_acc(&self) -> Option<f64> {
        self.rows.last().map(|r| r.acc)
    }
}

/// Full harness configuration.
#[derive(Debug, Clone)]
pub struct SimConfig {
    pub n: usize,
    pub k: usize,
    pub dim: usize,
    pub imbalance_ratio: f64,
    pub seed: u64,
    pub epochs: usize,
    pub batch: usize,
    pub buffer_capacity: usize,
    pub learning_rate: f64,
    /// Distance of every blob center from the origin.
    pub center_separation: f64,
    /// Within-class standard deviation.
    pub noise_sigma: f64,
    /// Scale of the probe's random weight initialization.
    pub init_scale: f64,
    /// Pseudo-labeler. SLA is excluded here: it has no stable training
    /// regime to simulate.
    pub formulation: Formulation,
    pub solver: SolverConfig,
    pub ramp: RampKind,
    pub rho0: f64,
    /// Ramp horizon in solver invocations; `None` places the horizon at
    /// the start of the final epoch so the last epoch trains at rho = 1.
    pub total_steps: Option<usize>,
    /// Two feature-noise views with crossed pseudo-labels.
    pub augment: bool,
    pub augment_sigma: f64,
}

impl Default for SimConfig {
    fn default() -> Self {
        Self {
            n: 2000,
            k: 10,
            dim: 16,
            imbalance_ratio: 10.0,
            seed: 0,
            epochs: 50,
            batch: 250,
            buffer_capacity: 1000,
            learning_rate: 1.0,
            center_separation: 2.5,
            noise_sigma: 1.0,
            init_scale: 0.01,
            formulation: Formulation::P2ot,
            solver: SolverConfig {
                lambda: 0.5,
                ..SolverConfig::default()
            },
            ramp: RampKind::Sigmoid,
            rho0: 0.1,
            total_steps: None,
            augment: false,
            augment_sigma: 0.5,
        }
    }
}

/// Geometric class-size profile: sizes interpolate from `N_max` down to
/// `N_min` with `N_max / N_min` equal to the requested ratio exactly, and
/// they sum to `n` exactly (the remainder is folded into middle classes).
pub fn class_size_profile(n: usize, k: usize, ratio: f64) -> Result<Vec<usize>> {
    if k == 0 || n < k {
        return Err(Error::InvalidConfig(alloc::format!(
            "need at least one sample per class, got n = {n}, k = {k}"
        )));
    }
    if !(ratio >= 1.0) || !ratio.is_finite() {
        return Err(Error::InvalidConfig(alloc::format!(
            "imbalance ratio must be >= 1, got {ratio}"
        )));
    }
    if k == 1 {
        if ratio != 1.0 {
            return Err(Error::InvalidConfig(alloc::string::String::from(
                "a single class cannot realize a ratio above 1",
            )));
        }
        return Ok(vec![n]);
    }

    let profile: Vec<f64> = (0..k)
        .map(|j| math::powf(ratio, (k - 1 - j) as f64 / (k - 1) as f64))
        .collect();
    let total: f64 = profile.iter().sum();
    let scale = n as f64 / total;
    let min_size = math::round(scale).max(1.0);
    let max_exact = min_size * ratio;
    let max_size = math::round(max_exact);
    if math::abs(max_exact - max_size) > 1e-9 {
        return Err(Error::InvalidConfig(alloc::format!(
            "ratio {ratio} with smallest class {min_size} does not yield an integer largest class"
        )));
    }

    let mut sizes: Vec<i64> = profile
        .iter()
        .map(|&c| math::round(min_size * c) as i64)
        .collect();
    sizes[0] = max_size as i64;
    sizes[k - 1] = min_size as i64;

    // fold the rounding remainder into middle classes
    let mut diff = n as i64 - sizes.iter().sum::<i64>();
    if diff != 0 && k == 2 {
        return Err(Error::InvalidConfig(alloc::format!(
            "n = {n} is not reachable with two classes at ratio {ratio}"
        )));
    }
    while diff != 0 {
        let step = diff.signum();
        let mut moved = false;
        for j in 1..k - 1 {
            if diff == 0 {
                break;
            }
            let cand = sizes[j] + step;
            if cand >= sizes[k - 1] && cand <= sizes[0] {
                sizes[j] = cand;
                diff -= step;
                moved = true;
            }
        }
        if !moved {
            return Err(Error::InvalidConfig(alloc::format!(
                "cannot fit n = {n} into {k} classes at ratio {ratio}"
            )));
        }
    }
    // middles may have drifted off monotone order by one unit
    sizes[1..k - 1].sort_unstable_by(|a, b| b.cmp(a));

    if sizes.iter().any(|&s| s < 1) {
        return Err(Error::InvalidConfig(alloc::format!(
            "profile for n = {n}, k = {k}, ratio {ratio} drops below one sample"
        )));
    }
    Ok(sizes.into_iter().map(|s| s as usize).collect())
}

/// Gaussian blobs with the geometric size profile; deterministic per seed.
pub fn generate_dataset(n: usize, k: usize, dim: usize, ratio: f64, seed: u64) -> Result<SyntheticDataset> {
    let cfg = SimConfig {
        n,
        k,
        dim,
        imbalance_ratio: ratio,
        seed,
        ..SimConfig::default()
    };
    generate_dataset_with(&cfg)
}

/// Dataset generation honoring the geometry knobs of a [`SimConfig`].
pub fn generate_dataset_with(cfg: &SimConfig) -> Result<SyntheticDataset> {
    if cfg.dim == 0 {
        return Err(Error::InvalidConfig(alloc::string::String::from(
            "feature dimension must be positive",
        )));
    }
    let sizes = class_size_profile(cfg.n, cfg.k, cfg.imbalance_ratio)?;
    let mut rng = rng::sub_rng(cfg.seed, STREAM_DATA);

    // centers on a sphere of the configured radius
    let mut centers = vec![vec![0.0; cfg.dim]; cfg.k];
    for center in centers.iter_mut() {
        let mut norm = 0.0;
        for v in center.iter_mut() {
            *v = rng::standard_normal(&mut rng);
            norm += *v * *v;
        }
        let norm = math::sqrt(norm).max(1e-12);
        for v in center.iter_mut() {
            *v *= cfg.center_separation / norm;
        }
    }

    let mut points = DenseMatrix::zeros(cfg.n, cfg.dim);
    let mut labels = Vec::with_capacity(cfg.n);
    let mut row = 0;
    for (class, &size) in sizes.iter().enumerate() {
        for _ in 0..size {
            let out = points.row_mut(row);
            for (f, &c) in out.iter_mut().zip(&centers[class]) {
                *f = c + cfg.noise_sigma * rng::standard_normal(&mut rng);
            }
            labels.push(class);
            row += 1;
        }
    }

    // present samples in shuffled order
    let mut perm: Vec<usize> = (0..cfg.n).collect();
    rng::shuffle(&mut rng, &mut perm);
    let mut shuffled = DenseMatrix::zeros(cfg.n, cfg.dim);
    let mut shuffled_labels = vec![0usize; cfg.n];
    for (dst, &src) in perm.iter().enumerate() {
        shuffled.row_mut(dst).copy_from_slice(points.row(src));
        shuffled_labels[dst] = labels[src];
    }

    Ok(SyntheticDataset {
        points: shuffled,
        true_labels: shuffled_labels,
        class_sizes: sizes,
        seed: cfg.seed,
    })
}

/// Sample weights and mapped hard labels from a transport plan: sample `i`
/// carries weight `n * (row sum of Q)_i`, its label is the argmax column
/// mapped through the cluster-to-class assignment.
///
/// Returns micro-averaged weighted `(precision, recall)`: correct weight
/// over selected weight, and correct weight over the sample count.
pub fn weighted_precision_recall(
    plan: &TransportPlan,
    truth: &[usize],
    assignment: &[usize],
) -> Result<(f64, f64)> {
    let n = plan.n();
    if truth.len() != n {
        return Err(Error::InvalidInput(alloc::format!(
            "plan has {n} rows but {} labels were given",
            truth.len()
        )));
    }
    if assignment.len() != plan.k() {
        return Err(Error::InvalidInput(alloc::format!(
            "assignment covers {} clusters, plan has {}",
            assignment.len(),
            plan.k()
        )));
    }
    let mut selected = 0.0;
    let mut correct = 0.0;
    for i in 0..n {
        let row = plan.values().row(i);
        let mut best = 0usize;
        let mut sum = 0.0;
        for (j, &v) in row.iter().enumerate() {
            sum += v;
            if v > row[best] {
                best = j;
            }
        }
        let w = (n as f64 * sum).clamp(0.0, 1.0);
        selected += w;
        if assignment[best] == truth[i] {
            correct += w;
        }
    }
    let precision = if selected > 0.0 { correct / selected } else { 0.0 };
    let recall = correct / n as f64;
    Ok((precision, recall))
}

/// The schedule used by a run: horizon defaults to the start of the final
/// epoch, so the last epoch trains at `rho = 1`.
pub fn ramp_for(cfg: &SimConfig) -> Result<RampSchedule> {
    let steps_per_epoch = cfg.n.div_ceil(cfg.batch);
    let default_horizon = (cfg.epochs.saturating_sub(1) * steps_per_epoch).max(1);
    RampSchedule::new(cfg.ramp, cfg.rho0, cfg.total_steps.unwrap_or(default_horizon))
}

/// One pass over the dataset: solve pseudo-labels per mini-batch, take a
/// gradient step, then evaluate the probe on the full dataset.
pub fn train_epoch(
    state: &mut PredictorState,
    data: &SyntheticDataset,
    buffer: &mut MemoryBuffer,
    sched: &RampSchedule,
    cfg: &SimConfig,
    epoch: usize,
    rng: &mut ChaCha8Rng,
) -> Result<TrainLogRow> {
    if cfg.batch == 0 || cfg.batch > data.n() {
        return Err(Error::InvalidConfig(alloc::format!(
            "batch size {} must lie in [1, {}]",
            cfg.batch,
            data.n()
        )));
    }
    let n = data.n();
    let steps_per_epoch = n.div_ceil(cfg.batch);
    let rho_logged = rho_at(sched, (epoch * steps_per_epoch).min(sched.total_steps))?;

    let mut order: Vec<usize> = (0..n).collect();
    rng::shuffle(rng, &mut order);

    let mut loss_sum = 0.0;
    for step_in_epoch in 0..steps_per_epoch {
        let lo = step_in_epoch * cfg.batch;
        let hi = ((step_in_epoch + 1) * cfg.batch).min(n);
        let batch_ids = &order[lo..hi];
        let rho = rho_at(sched, state.step.min(sched.total_steps))?;

        if cfg.augment {
            let p1 = predict_noisy(state, data, batch_ids, cfg, rng);
            let p2 = predict_noisy(state, data, batch_ids, cfg, rng);
            let q1 = pseudo_labels(&p1, buffer, epoch, cfg, rho)?;
            let q2 = pseudo_labels(&p2, buffer, epoch, cfg, rho)?;
            // crossed supervision: each view learns from the other's labels
            loss_sum += 0.5
                * (gradient_step(state, data, batch_ids, &p1, &q2, cfg, rho)?
                    + gradient_step(state, data, batch_ids, &p2, &q1, cfg, rho)?);
            push_batch(buffer, batch_ids, &p1);
        } else {
            let p = state.predict_rows(&data.points, batch_ids);
            let q = pseudo_labels(&p, buffer, epoch, cfg, rho)?;
            loss_sum += gradient_step(state, data, batch_ids, &p, &q, cfg, rho)?;
            push_batch(buffer, batch_ids, &p);
        }
        state.step += 1;
        if !state.is_finite() {
            return Err(Error::Divergence {
                iteration: state.step,
            });
        }
    }

    let report = evaluate_predictor(state, data)?;
    let (wp, wr) = full_dataset_reweighting(state, data, cfg, sched, &report)?;
    Ok(TrainLogRow {
        epoch,
        loss: loss_sum / steps_per_epoch as f64,
        acc: report.acc,
        nmi: report.nmi,
        f1: report.f1,
        weighted_precision: wp,
        weighted_recall: wr,
        rho: rho_logged,
    })
}

/// Run the full training loop described by `cfg`.
pub fn run_training(cfg: &SimConfig) -> Result<(TrainLog, PredictorState, SyntheticDataset)> {
    let data = generate_dataset_with(cfg)?;
    let sched = ramp_for(cfg)?;
    let mut init_rng = rng::sub_rng(cfg.seed, STREAM_INIT);
    let mut state = PredictorState::init(
        cfg.dim,
        cfg.k,
        cfg.learning_rate,
        cfg.init_scale,
        &mut init_rng,
    );
    let mut train_rng = rng::sub_rng(cfg.seed, STREAM_TRAIN);
    let mut buffer = MemoryBuffer::new(cfg.buffer_capacity);
    let mut log = TrainLog::default();
    for epoch in 0..cfg.epochs {
        let row = train_epoch(&mut state, &data, &mut buffer, &sched, cfg, epoch, &mut train_rng)?;
        log.rows.push(row);
    }
    Ok((log, state, data))
}

/// Evaluate the probe's argmax labels on the full dataset.
pub fn evaluate_predictor(state: &PredictorState, data: &SyntheticDataset) -> Result<EvalReport> {
    let all: Vec<usize> = (0..data.n()).collect();
    let p = state.predict_rows(&data.points, &all);
    let pred: Vec<usize> = (0..data.n()).map(|i| argmax(p.row(i))).collect();
    evaluate(&pred, &data.true_labels, &data.class_sizes)
}

fn predict_noisy(
    state: &PredictorState,
    data: &SyntheticDataset,
    batch_ids: &[usize],
    cfg: &SimConfig,
    rng: &mut ChaCha8Rng,
) -> DenseMatrix {
    let mut noisy = DenseMatrix::zeros(batch_ids.len(), data.dim());
    for (r, &i) in batch_ids.iter().enumerate() {
        let row = noisy.row_mut(r);
        row.copy_from_slice(data.points.row(i));
        for v in row.iter_mut() {
            *v += cfg.augment_sigma * rng::standard_normal(rng);
        }
    }
    let all: Vec<usize> = (0..batch_ids.len()).collect();
    state.predict_rows(&noisy, &all)
}

/// Solve the transport problem over batch plus buffer rows; returns the
/// batch rows of the plan rescaled by the number of problem rows, i.e.
/// soft labels whose row sums are the per-sample weights in `[0, 1]`.
fn pseudo_labels(
    batch_pred: &DenseMatrix,
    buffer: &MemoryBuffer,
    epoch: usize,
    cfg: &SimConfig,
    rho: f64,
) -> Result<DenseMatrix> {
    let nb = batch_pred.rows();
    let k = batch_pred.cols();
    // the buffer participates from the second epoch on
    let use_buffer = epoch >= 1 && !buffer.is_empty();
    let extra = if use_buffer { buffer.len() } else { 0 };
    let n_all = nb + extra;

    let mut stacked = DenseMatrix::zeros(n_all, k);
    for i in 0..nb {
        stacked.row_mut(i).copy_from_slice(batch_pred.row(i));
    }
    if use_buffer {
        for (offset, (_, row)) in buffer.rows().enumerate() {
            stacked.row_mut(nb + offset).copy_from_slice(row);
        }
    }
    let predictions = PredictionMatrix::new(stacked)?;
    let cost = cost_from_predictions(&predictions, cfg.solver.prediction_floor)?;
    let solver_cfg = SolverConfig {
        rho,
        ..cfg.solver.clone()
    };
    let plan = match cfg.formulation {
        Formulation::Ot => solve_ot(&cost, &solver_cfg)?.0,
        Formulation::Uot => solve_uot(&cost, &solver_cfg)?.0,
        Formulation::Pot => solve_pot(&cost, &solver_cfg)?.0,
        Formulation::P2ot => solve_p2ot(&cost, &solver_cfg)?.0,
        Formulation::Sla => {
            return Err(Error::InvalidConfig(alloc::string::String::from(
                "SLA is not supported as a training pseudo-labeler",
            )))
        }
    };
    let mut labels = DenseMatrix::zeros(nb, k);
    for i in 0..nb {
        for j in 0..k {
            labels.set(i, j, plan.values().get(i, j) * n_all as f64);
        }
    }
    Ok(labels)
}

/// Gradient of `<Q, -log P> / rho` through the batch logits; returns the
/// scaled batch loss.
fn gradient_step(
    state: &mut PredictorState,
    data: &SyntheticDataset,
    batch_ids: &[usize],
    pred: &DenseMatrix,
    labels: &DenseMatrix,
    cfg: &SimConfig,
    rho: f64,
) -> Result<f64> {
    let nb = batch_ids.len();
    let k = pred.cols();
    let d = data.dim();
    let rho_eff = match cfg.formulation {
        Formulation::Pot | Formulation::P2ot => rho,
        _ => 1.0,
    };
    let scale = 1.0 / (nb as f64 * rho_eff);

    let mut loss = 0.0;
    // logit gradient: w_i * p_ij - q_ij, with w_i the label row sum
    let mut grad = DenseMatrix::zeros(nb, k);
    for i in 0..nb {
        let q = labels.row(i);
        let p = pred.row(i);
        let w: f64 = q.iter().sum();
        for j in 0..k {
            grad.set(i, j, (w * p[j] - q[j]) * scale);
            if q[j] > 0.0 {
                loss -= q[j] * math::ln(p[j].max(cfg.solver.prediction_floor));
            }
        }
    }
    for (r, &i) in batch_ids.iter().enumerate() {
        let x = data.points.row(i);
        let g = grad.row(r);
        for j in 0..k {
            let gj = g[j];
            for f in 0..d {
                let cur = state.weights.get(f, j);
                state.weights.set(f, j, cur - state.learning_rate * x[f] * gj);
            }
            let cur = state.weights.get(d, j);
            state.weights.set(d, j, cur - state.learning_rate * gj);
        }
    }
    Ok(loss * scale)
}

fn push_batch(buffer: &mut MemoryBuffer, batch_ids: &[usize], pred: &DenseMatrix) {
    for (r, &i) in batch_ids.iter().enumerate() {
        buffer.push(i, pred.row(r).to_vec());
    }
}

/// Weighted precision/recall of the current probe, reweighting the full
/// dataset through the configured solver at the epoch-end rho.
fn full_dataset_reweighting(
    state: &PredictorState,
    data: &SyntheticDataset,
    cfg: &SimConfig,
    sched: &RampSchedule,
    report: &EvalReport,
) -> Result<(f64, f64)> {
    let all: Vec<usize> = (0..data.n()).collect();
    let p = state.predict_rows(&data.points, &all);
    let predictions = PredictionMatrix::new(p)?;
    let cost = cost_from_predictions(&predictions, cfg.solver.prediction_floor)?;
    let rho = rho_at(sched, state.step.min(sched.total_steps))?;
    let solver_cfg = SolverConfig {
        rho,
        ..cfg.solver.clone()
    };
    let plan = match cfg.formulation {
        Formulation::Ot => solve_ot(&cost, &solver_cfg)?.0,
        Formulation::Uot => solve_uot(&cost, &solver_cfg)?.0,
        Formulation::Pot => solve_pot(&cost, &solver_cfg)?.0,
        Formulation::P2ot | Formulation::Sla => solve_p2ot(&cost, &solver_cfg)?.0,
    };
    weighted_precision_recall(&plan, &data.true_labels, &report.assignment)
}

fn argmax(row: &[f64]) -> usize {
    let mut best = 0;
    for (j, &v) in row.iter().enumerate() {
        if v > row[best] {
            best = j;
        }
    }
    best
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;

    #[test]
    fn balanced_two_class_profile() {
        assert_eq!(class_size_profile(100, 2, 1.0).unwrap(), vec![50, 50]);
    }

    #[test]
    fn geometric_profile_hits_ratio_exactly() {
        let sizes = class_size_profile(140, 3, 4.0).unwrap();
        assert_eq!(sizes, vec![80, 40, 20]);
        let sizes = class_size_profile(2000, 10, 10.0).unwrap();
        assert_eq!(sizes.iter().sum::<usize>(), 2000);
        assert_abs_diff_eq!(
            sizes[0] as f64 / sizes[9] as f64,
            10.0,
            epsilon = 1e-12
        );
        for w in sizes.windows(2) {
            assert!(w[0] >= w[1], "profile not monotone: {sizes:?}");
        }
    }

    #[test]
    fn infeasible_profiles_are_rejected() {
        assert!(class_size_profile(3, 4, 1.0).is_err());
        assert!(class_size_profile(5, 4, 100.0).is_err());
        assert!(class_size_profile(10, 1, 3.0).is_err());
    }

    #[test]
    fn dataset_is_deterministic_per_seed() {
        let a = generate_dataset(120, 3, 4, 4.0, 7).unwrap();
        let b = generate_dataset(120, 3, 4, 4.0, 7).unwrap();
        assert_eq!(a.points, b.points);
        assert_eq!(a.true_labels, b.true_labels);
        let c = generate_dataset(120, 3, 4, 4.0, 8).unwrap();
        assert_ne!(a.points, c.points);
    }

    #[test]
    fn dataset_respects_class_sizes() {
        let data = generate_dataset(140, 3, 4, 4.0, 1).unwrap();
        let mut counts = vec![0usize; 3];
        for &l in &data.true_labels {
            counts[l] += 1;
        }
        assert_eq!(counts, vec![80, 40, 20]);
    }

    #[test]
    fn weighted_tally_on_perfect_labels() {
        // diagonal plan: every sample fully confident in its own class
        let n = 4;
        let mut q = DenseMatrix::zeros(n, 2);
        for i in 0..n {
            q.set(i, i % 2, 1.0 / n as f64);
        }
        let plan = TransportPlan::from_matrix(q);
        let truth = vec![0, 1, 0, 1];
        let (p, r) = weighted_precision_recall(&plan, &truth, &[0, 1]).unwrap();
        assert_eq!((p, r), (1.0, 1.0));
    }

    #[test]
    fn zero_weight_on_mislabeled_rows_lifts_precision() {
        let mut q = DenseMatrix::zeros(3, 2);
        q.set(0, 0, 1.0 / 3.0); // correct, weight 1
        q.set(1, 1, 1.0 / 3.0); // correct, weight 1
        q.set(2, 0, 0.0); // mislabeled but weight 0
        let plan = TransportPlan::from_matrix(q);
        let truth = vec![0, 1, 1];
        let (p, _) = weighted_precision_recall(&plan, &truth, &[0, 1]).unwrap();
        assert_eq!(p, 1.0);
        // unweighted precision over the same hard labels would be 2/3
    }

    #[test]
    fn weighted_tally_matches_independent_computation() {
        let mut rng = rng::rng_from_seed(42);
        let n = 20;
        let k = 4;
        let mut q = DenseMatrix::zeros(n, k);
        let mut truth = Vec::with_capacity(n);
        for i in 0..n {
            for j in 0..k {
                q.set(i, j, rng::uniform01(&mut rng) / (n as f64 * k as f64));
            }
            truth.push((rng.next_u64() % k as u64) as usize);
        }
        use rand_chacha::rand_core::RngCore;
        let plan = TransportPlan::from_matrix(q.clone());
        let assignment = vec![0, 1, 2, 3];
        let (p, r) = weighted_precision_recall(&plan, &truth, &assignment).unwrap();

        // second, independent tally
        let mut selected = 0.0;
        let mut correct = 0.0;
        for i in 0..n {
            let row = q.row(i);
            let mut best = 0;
            for j in 0..k {
                if row[j] > row[best] {
                    best = j;
                }
            }
            let w = row.iter().sum::<f64>() * n as f64;
            selected += w;
            if best == truth[i] {
                correct += w;
            }
        }
        assert_abs_diff_eq!(p, correct / selected, epsilon = 1e-12);
        assert_abs_diff_eq!(r, correct / n as f64, epsilon = 1e-12);
    }

    #[test]
    fn buffer_evicts_oldest_first() {
        let mut buf = MemoryBuffer::new(2);
        buf.push(0, vec![0.0]);
        buf.push(1, vec![1.0]);
        buf.push(2, vec![2.0]);
        let ids: Vec<usize> = buf.rows().map(|(id, _)| *id).collect();
        assert_eq!(ids, vec![1, 2]);
        let mut disabled = MemoryBuffer::new(0);
        disabled.push(0, vec![0.0]);
        assert!(disabled.is_empty());
    }

    #[test]
    fn separable_balanced_blobs_train_to_high_accuracy() {
        let cfg = SimConfig {
            n: 100,
            k: 2,
            dim: 4,
            imbalance_ratio: 1.0,
            seed: 3,
            epochs: 20,
            batch: 50,
            buffer_capacity: 100,
            center_separation: 6.0,
            ramp: RampKind::Fixed,
            rho0: 0.999,
            formulation: Formulation::P2ot,
            ..SimConfig::default()
        };
        let (log, state, _) = run_training(&cfg).unwrap();
        assert!(state.is_finite());
        let acc = log.final_acc().unwrap();
        assert!(acc > 0.95, "expected near-perfect separation, got {acc}");
        // loss stays finite throughout
        assert!(log.rows.iter().all(|r| r.loss.is_finite()));
    }

    #[test]
    fn buffer_disabled_training_still_runs() {
        let cfg = SimConfig {
            n: 60,
            k: 2,
            dim: 3,
            imbalance_ratio: 1.0,
            seed: 0,
            epochs: 2,
            batch: 30,
            buffer_capacity: 0,
            ..SimConfig::default()
        };
        let (log, _, _) = run_training(&cfg).unwrap();
        assert_eq!(log.rows.len(), 2);
    }

    #[test]
    fn logged_rho_follows_schedule_and_ends_at_one() {
        let cfg = SimConfig {
            n: 80,
            k: 2,
            dim: 3,
            imbalance_ratio: 1.0,
            seed: 1,
            epochs: 5,
            batch: 40,
            ramp: RampKind::Sigmoid,
            rho0: 0.1,
            ..SimConfig::default()
        };
        let (log, _, _) = run_training(&cfg).unwrap();
        assert_abs_diff_eq!(log.rows[0].rho, 0.10606, epsilon = 1e-4);
        assert_eq!(log.rows.last().unwrap().rho, 1.0);
    }

    #[test]
    fn augmented_training_runs() {
        let cfg = SimConfig {
            n: 60,
            k: 2,
            dim: 3,
            imbalance_ratio: 1.0,
            seed: 0,
            epochs: 2,
            batch: 30,
            augment: true,
            ..SimConfig::default()
        };
        let (log, state, _) = run_training(&cfg).unwrap();
        assert_eq!(log.rows.len(), 2);
        assert!(state.is_finite());
    }
}
