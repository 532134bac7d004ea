//! Estimate-to-truth matching, RMSE and hit rate.

use crate::scenario::MetricUnit;

/// Result of one trial after matching: per-target errors, or a failure.
#[derive(Debug, Clone, PartialEq)]
pub enum TrialOutcome {
    /// Absolute errors in matched truth order.
    Errors(Vec<f64>),
    Failed,
}

impl TrialOutcome {
    pub fn is_failure(&self) -> bool {
        matches!(self, TrialOutcome::Failed)
    }
}

/// Permutation `p` minimizing `Σ cost(estimates[p[k]], truth[k])`, with the
/// first such permutation in lexicographic order on ties.
pub fn assignment<E, T>(estimates: &[E], truth: &[T], cost: impl Fn(&E, &T) -> f64) -> Option<Vec<usize>> {
    if estimates.len() != truth.len() {
        return None;
    }
    let n = truth.len();
    let table: Vec<Vec<f64>> = truth.iter().map(|t| estimates.iter().map(|e| cost(e, t)).collect()).collect();
    let mut best: Option<(f64, Vec<usize>)> = None;
    let mut perm: Vec<usize> = (0..n).collect();
    loop {
        let total: f64 = perm.iter().enumerate().map(|(k, &e)| table[k][e]).sum();
        if best.as_ref().is_none_or(|(b, _)| total < *b) {
            best = Some((total, perm.clone()));
        }
        if !next_permutation(&mut perm) {
            break;
        }
    }
    best.map(|(_, p)| p)
}

fn next_permutation(p: &mut [usize]) -> bool {
    let Some(i) = (1..p.len()).rev().find(|&i| p[i - 1] < p[i]) else {
        return false;
    };
    let j = (i..p.len()).rev().find(|&j| p[j] > p[i - 1]).expect("successor exists");
    p.swap(i - 1, j);
    p[i..].reverse();
    true
}

/// Matches scalar estimates (degrees) to truth and returns absolute errors.
pub fn angle_errors(estimates: &[f64], truth: &[f64]) -> Option<Vec<f64>> {
    let p = assignment(estimates, truth, |e, t| (e - t).powi(2))?;
    Some(truth.iter().zip(&p).map(|(t, &i)| (estimates[i] - t).abs()).collect())
}

/// Matches 2-D positions (meters) to truth and returns Euclidean errors.
pub fn position_errors(estimates: &[[f64; 2]], truth: &[[f64; 2]]) -> Option<Vec<f64>> {
    let dist2 = |a: &[f64; 2], b: &[f64; 2]| (a[0] - b[0]).powi(2) + (a[1] - b[1]).powi(2);
    let p = assignment(estimates, truth, dist2)?;
    Some(truth.iter().zip(&p).map(|(t, &i)| dist2(&estimates[i], t).sqrt()).collect())
}

/// `√(Σ_trials Σ_k e² / (K·N))` over successful trials. With `penalty`,
/// each failed trial contributes `penalty` per target instead of being
/// skipped. `None` when no trial contributes.
pub fn rmse(outcomes: &[TrialOutcome], penalty: Option<f64>) -> Option<f64> {
    let mut sum = 0.0;
    let mut count = 0usize;
    let k = outcomes
        .iter()
        .find_map(|o| match o {
            TrialOutcome::Errors(e) => Some(e.len()),
            TrialOutcome::Failed => None,
        })
        .unwrap_or(1);
    for o in outcomes {
        match (o, penalty) {
            (TrialOutcome::Errors(e), _) => {
                sum += e.iter().map(|x| x * x).sum::<f64>();
                count += e.len();
            }
            (TrialOutcome::Failed, Some(p)) => {
                sum += p * p * k as f64;
                count += k;
            }
            (TrialOutcome::Failed, None) => {}
        }
    }
    (count > 0).then(|| (sum / count as f64).sqrt())
}

/// Fraction of trials whose every error is `≤ tol`; failures are misses.
pub fn hit_rate(outcomes: &[TrialOutcome], tol: f64) -> f64 {
    if outcomes.is_empty() {
        return 0.0;
    }
    let hits = outcomes
        .iter()
        .filter(|o| matches!(o, TrialOutcome::Errors(e) if e.iter().all(|x| *x <= tol)))
        .count();
    hits as f64 / outcomes.len() as f64
}

pub fn failure_rate(outcomes: &[TrialOutcome]) -> f64 {
    if outcomes.is_empty() {
        return 0.0;
    }
    outcomes.iter().filter(|o| o.is_failure()).count() as f64 / outcomes.len() as f64
}

/// Aggregated results for one (algorithm, SNR) point.
#[derive(Debug, Clone, PartialEq)]
pub struct MetricsRow {
    pub algorithm: String,
    pub snr_db: f64,
    pub n_trials: usize,
    pub rmse: Option<f64>,
    pub hit_rate: f64,
    pub failure_rate: f64,
    pub unit: MetricUnit,
    /// Near-field only: fraction of trials whose per-ULA DOAs were paired
    /// as in the truth.
    pub association_rate: Option<f64>,
}
