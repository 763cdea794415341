//! Clustering evaluation: Hungarian-matched per-class accuracy, normalized
//! mutual information, macro F1, and the size-ranked head/medium/tail
//! breakdown.

use alloc::vec;
use alloc::vec::Vec;

use crate::error::{Error, Result};
use crate::math;

/// Evaluation summary. `acc` is the mean per-class recall under the
/// Hungarian cluster-to-class assignment; the head/medium/tail accuracies
/// are the same quantity restricted to classes ranked by size in a
/// 3:4:3 proportion (head and tail each take `floor(0.3 K)` classes,
/// medium the remainder).
#[derive(Debug, Clone, PartialEq)]
pub struct EvalReport {
    pub acc: f64,
    pub nmi: f64,
    pub f1: f64,
    pub head_acc: f64,
    pub medium_acc: f64,
    pub tail_acc: f64,
    /// Cluster id -> class id permutation chosen by the matching.
    pub assignment: Vec<usize>,
}

/// Maximum-agreement assignment of clusters to classes.
///
/// `confusion[class][cluster]` holds co-occurrence counts; the result maps
/// each cluster to a distinct class so that the total matched count is
/// maximal. The search is a standard shortest-augmenting-path assignment
/// over integer counts with fixed scan order, so results are deterministic
/// and ties resolve toward lower indices.
pub fn hungarian_match(confusion: &[Vec<u64>]) -> Result<Vec<usize>> {
    let k = confusion.len();
    if k == 0 {
        return Err(Error::InvalidInput(alloc::string::String::from(
            "empty confusion matrix",
        )));
    }
    if confusion.iter().any(|row| row.len() != k) {
        return Err(Error::InvalidInput(alloc::string::String::from(
            "confusion matrix must be square",
        )));
    }
    // maximize matches == minimize (max - value)
    let max_entry = confusion
        .iter()
        .flat_map(|r| r.iter())
        .copied()
        .max()
        .unwrap_or(0) as i64;
    // cost[cluster][class]
    let cost =
        |cluster: usize, class: usize| -> i64 { max_entry - confusion[class][cluster] as i64 };

    let inf = i64::MAX / 4;
    let mut u = vec![0i64; k + 1];
    let mut v = vec![0i64; k + 1];
    let mut matched_row = vec![0usize; k + 1]; // column (class, 1-based) -> row (cluster, 1-based)
    let mut way = vec![0usize; k + 1];
    for i in 1..=k {
        matched_row[0] = i;
        let mut j0 = 0usize;
        let mut minv = vec![inf; k + 1];
        let mut used = vec![false; k + 1];
        loop {
            used[j0] = true;
            let i0 = matched_row[j0];
            let mut delta = inf;
            let mut j1 = 0usize;
            for j in 1..=k {
                if used[j] {
                    continue;
                }
                let cur = cost(i0 - 1, j - 1) - u[i0] - v[j];
                if cur < minv[j] {
                    minv[j] = cur;
                    way[j] = j0;
                }
                if minv[j] < delta {
                    delta = minv[j];
                    j1 = j;
                }
            }
            for j in 0..=k {
                if used[j] {
                    u[matched_row[j]] += delta;
                    v[j] -= delta;
                } else {
                    minv[j] -= delta;
                }
            }
            j0 = j1;
            if matched_row[j0] == 0 {
                break;
            }
        }
        loop {
            let j1 = way[j0];
            matched_row[j0] = matched_row[j1];
            j0 = j1;
            if j0 == 0 {
                break;
            }
        }
    }
    let mut assignment = vec![0usize; k];
    for class in 1..=k {
        if matched_row[class] > 0 {
            assignment[matched_row[class] - 1] = class - 1;
        }
    }
    Ok(assignment)
}

/// Normalized mutual information with arithmetic-mean normalization,
/// natural logarithms. Two trivial single-block labelings score 1.
pub fn nmi(pred: &[usize], truth: &[usize], k: usize) -> f64 {
    let n = pred.len() as f64;
    let mut joint = vec![vec![0.0f64; k]; k];
    let mut pu = vec![0.0f64; k];
    let mut pv = vec![0.0f64; k];
    for (&p, &t) in pred.iter().zip(truth) {
        joint[t][p] += 1.0;
        pv[p] += 1.0;
        pu[t] += 1.0;
    }
    let mut h_u = 0.0;
    let mut h_v = 0.0;
    for c in 0..k {
        if pu[c] > 0.0 {
            let f = pu[c] / n;
            h_u -= f * math::ln(f);
        }
        if pv[c] > 0.0 {
            let f = pv[c] / n;
            h_v -= f * math::ln(f);
        }
    }
    if h_u <= 0.0 && h_v <= 0.0 {
        return 1.0;
    }
    let mut mi = 0.0;
    for t in 0..k {
        for p in 0..k {
            if joint[t][p] > 0.0 {
                let pj = joint[t][p] / n;
                mi += pj * math::ln(pj * n * n / (pu[t] * pv[p]));
            }
        }
    }
    (2.0 * mi / (h_u + h_v)).clamp(0.0, 1.0)
}

/// Mean per-class recall, NMI, macro F1 and the 3:4:3 size breakdown.
///
/// `class_sizes` fixes the number of classes and the head/medium/tail
/// ranking; recall denominators use the actual counts in `truth`.
pub fn evaluate(pred: &[usize], truth: &[usize], class_sizes: &[usize]) -> Result<EvalReport> {
    let k = class_sizes.len();
    if k == 0 {
        return Err(Error::InvalidInput(alloc::string::String::from(
            "class_sizes must be non-empty",
        )));
    }
    if pred.len() != truth.len() || pred.is_empty() {
        return Err(Error::InvalidInput(alloc::format!(
            "label vectors must be non-empty and equal-length, got {} and {}",
            pred.len(),
            truth.len()
        )));
    }
    if let Some(&bad) = pred.iter().chain(truth).find(|&&l| l >= k) {
        return Err(Error::InvalidInput(alloc::format!(
            "label {bad} out of range for {k} classes"
        )));
    }

    let mut confusion = vec![vec![0u64; k]; k];
    for (&p, &t) in pred.iter().zip(truth) {
        confusion[t][p] += 1;
    }
    let assignment = hungarian_match(&confusion)?;

    // per-class recall and precision under the mapped predictions
    let mut true_count = vec![0u64; k];
    let mut pred_count = vec![0u64; k];
    let mut correct = vec![0u64; k];
    for (&p, &t) in pred.iter().zip(truth) {
        let mapped = assignment[p];
        true_count[t] += 1;
        pred_count[mapped] += 1;
        if mapped == t {
            correct[t] += 1;
        }
    }
    let recall: Vec<f64> = (0..k)
        .map(|c| {
            if true_count[c] > 0 {
                correct[c] as f64 / true_count[c] as f64
            } else {
                0.0
            }
        })
        .collect();
    let present: Vec<usize> = (0..k).filter(|&c| true_count[c] > 0).collect();
    let mean_over = |classes: &[usize]| -> f64 {
        if classes.is_empty() {
            return 0.0;
        }
        classes.iter().map(|&c| recall[c]).sum::<f64>() / classes.len() as f64
    };
    let acc = mean_over(&present);

    let mut f1_sum = 0.0;
    for &c in &present {
        let p = if pred_count[c] > 0 {
            correct[c] as f64 / pred_count[c] as f64
        } else {
            0.0
        };
        let r = recall[c];
        if p + r > 0.0 {
            f1_sum += 2.0 * p * r / (p + r);
        }
    }
    let f1 = f1_sum / present.len() as f64;

    // size-ranked 3:4:3 split over all K classes
    let mut order: Vec<usize> = (0..k).collect();
    order.sort_by(|&a, &b| class_sizes[b].cmp(&class_sizes[a]).then(a.cmp(&b)));
    let n_head = (0.3 * k as f64) as usize;
    let n_tail = (0.3 * k as f64) as usize;
    let head: Vec<usize> = order[..n_head].to_vec();
    let medium: Vec<usize> = order[n_head..k - n_tail].to_vec();
    let tail: Vec<usize> = order[k - n_tail..].to_vec();

    Ok(EvalReport {
        acc,
        nmi: nmi(pred, truth, k),
        f1,
        head_acc: mean_over(&head),
        medium_acc: mean_over(&medium),
        tail_acc: mean_over(&tail),
        assignment,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;

    fn brute_force_best(confusion: &[Vec<u64>]) -> u64 {
        fn rec(confusion: &[Vec<u64>], cluster: usize, used: &mut [bool], acc: u64, best: &mut u64) {
            let k = confusion.len();
            if cluster == k {
                *best = (*best).max(acc);
                return;
            }
            for class in 0..k {
                if !used[class] {
                    used[class] = true;
                    rec(
                        confusion,
                        cluster + 1,
                        used,
                        acc + confusion[class][cluster],
                        best,
                    );
                    used[class] = false;
                }
            }
        }
        let mut best = 0;
        rec(confusion, 0, &mut vec![false; confusion.len()], 0, &mut best);
        best
    }

    fn matched_total(confusion: &[Vec<u64>], assignment: &[usize]) -> u64 {
        assignment
            .iter()
            .enumerate()
            .map(|(cluster, &class)| confusion[class][cluster])
            .sum()
    }

    #[test]
    fn identity_confusion_yields_identity_assignment() {
        let conf = vec![
            vec![3, 0, 0],
            vec![0, 5, 0],
            vec![0, 0, 2],
        ];
        assert_eq!(hungarian_match(&conf).unwrap(), vec![0, 1, 2]);
    }

    #[test]
    fn antidiagonal_confusion_swaps() {
        let conf = vec![vec![0, 5], vec![5, 0]];
        assert_eq!(hungarian_match(&conf).unwrap(), vec![1, 0]);
    }

    #[test]
    fn non_square_is_rejected() {
        let conf = vec![vec![1, 2, 3], vec![4, 5, 6]];
        assert!(matches!(
            hungarian_match(&conf),
            Err(Error::InvalidInput(_))
        ));
    }

    #[test]
    fn hungarian_equals_exhaustive_search_on_random_5x5() {
        // fixed pseudorandom counts
        let mut state = 88172645463325252u64;
        let mut next = || {
            state ^= state << 13;
            state ^= state >> 7;
            state ^= state << 17;
            state % 20
        };
        for _ in 0..25 {
            let conf: Vec<Vec<u64>> = (0..5).map(|_| (0..5).map(|_| next()).collect()).collect();
            let assignment = hungarian_match(&conf).unwrap();
            assert_eq!(matched_total(&conf, &assignment), brute_force_best(&conf));
        }
    }

    #[test]
    fn perfect_predictions_score_one() {
        let truth = vec![0, 0, 1, 1, 2, 2];
        let report = evaluate(&truth, &truth, &[2, 2, 2]).unwrap();
        assert_eq!(report.acc, 1.0);
        assert_eq!(report.nmi, 1.0);
        assert_eq!(report.f1, 1.0);
    }

    #[test]
    fn acc_is_invariant_under_cluster_relabeling() {
        let truth = vec![0, 0, 0, 1, 1, 2, 2, 2, 2];
        let pred = vec![0, 0, 1, 1, 1, 2, 2, 0, 2];
        let sizes = [3, 2, 4];
        let base = evaluate(&pred, &truth, &sizes).unwrap();
        // relabel clusters by the permutation 0->2, 1->0, 2->1
        let perm = [2usize, 0, 1];
        let relabeled: Vec<usize> = pred.iter().map(|&p| perm[p]).collect();
        let shuffled = evaluate(&relabeled, &truth, &sizes).unwrap();
        assert_abs_diff_eq!(base.acc, shuffled.acc, epsilon = 1e-12);
        assert_abs_diff_eq!(base.f1, shuffled.f1, epsilon = 1e-12);
    }

    #[test]
    fn nmi_is_symmetric() {
        let a = vec![0, 0, 1, 1, 2, 2, 0, 1];
        let b = vec![0, 1, 1, 1, 2, 0, 0, 2];
        assert_abs_diff_eq!(nmi(&a, &b, 3), nmi(&b, &a, 3), epsilon = 1e-12);
    }

    #[test]
    fn macro_f1_equals_mean_of_per_class_f1() {
        let truth = vec![0, 0, 0, 1, 1, 2];
        let pred = vec![0, 0, 1, 1, 1, 2];
        let report = evaluate(&pred, &truth, &[3, 2, 1]).unwrap();
        // assignment is identity here; check against a hand tally
        let f1_class0 = {
            let (p, r) = (2.0 / 2.0, 2.0 / 3.0);
            2.0 * p * r / (p + r)
        };
        let f1_class1 = {
            let (p, r) = (2.0 / 3.0, 2.0 / 2.0);
            2.0 * p * r / (p + r)
        };
        let f1_class2 = 1.0;
        assert_abs_diff_eq!(
            report.f1,
            (f1_class0 + f1_class1 + f1_class2) / 3.0,
            epsilon = 1e-12
        );
    }

    #[test]
    fn ten_classes_split_three_four_three() {
        let sizes = [100, 90, 80, 70, 60, 50, 40, 30, 20, 10];
        let k = sizes.len();
        let n_head = (0.3 * k as f64) as usize;
        let n_tail = (0.3 * k as f64) as usize;
        assert_eq!(n_head, 3);
        assert_eq!(n_tail, 3);
        assert_eq!(k - n_head - n_tail, 4);

        // per-group accuracy reflects which classes are wrong
        let mut truth = Vec::new();
        for (c, &s) in sizes.iter().enumerate() {
            truth.extend(core::iter::repeat(c).take(s));
        }
        // predictions perfect except class 9 (a tail class) all wrong
        let pred: Vec<usize> = truth
            .iter()
            .map(|&t| if t == 9 { 0 } else { t })
            .collect();
        let report = evaluate(&pred, &truth, &sizes).unwrap();
        assert_eq!(report.head_acc, 1.0);
        assert_eq!(report.medium_acc, 1.0);
        assert_abs_diff_eq!(report.tail_acc, 2.0 / 3.0, epsilon = 1e-12);
    }

    #[test]
    fn out_of_range_labels_are_rejected() {
        assert!(evaluate(&[0, 3], &[0, 1], &[2, 2]).is_err());
        assert!(evaluate(&[0], &[0, 1], &[2, 2]).is_err());
    }
}
