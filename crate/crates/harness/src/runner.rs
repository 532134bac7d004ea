//! Seeded Monte-Carlo execution.

use rayon::prelude::*;

use elaa_doa::signal::select_model;
use elaa_doa::{
    estimate_doa_esprit, estimate_doa_music, local_geometry, localize, EspritOptions, GridSpec, LocalizeOptions, ModelChoice,
    MusicAperture, MusicOptions, Snapshot64, SnapshotOptions, SteeringModel, Ula,
};

use crate::error::Result;
use crate::metrics::{angle_errors, failure_rate, hit_rate, position_errors, rmse, MetricsRow, TrialOutcome};
use crate::scenario::{Algorithm, MetricUnit, ScenarioSpec};
use crate::seed::trial_seed;

/// One executed trial.
#[derive(Debug, Clone, PartialEq)]
pub struct TrialRecord {
    pub algorithm: Algorithm,
    pub snr_db: f64,
    pub trial: usize,
    pub seed: u64,
    pub outcome: TrialOutcome,
    /// Degrees, or `x,y` pairs in meters flattened.
    pub estimates: Vec<f64>,
    /// Estimator error message on failure.
    pub failure: Option<String>,
    /// Near-field only.
    pub association_correct: Option<bool>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct RunReport {
    pub rows: Vec<MetricsRow>,
    /// Ordered by row, then trial index.
    pub trials: Vec<TrialRecord>,
}

impl RunReport {
    /// Largest failure rate across rows.
    pub fn worst_failure_rate(&self) -> f64 {
        self.rows.iter().map(|r| r.failure_rate).fold(0.0, f64::max)
    }
}

pub fn music_options(spec: &ScenarioSpec, aperture: MusicAperture) -> MusicOptions {
    MusicOptions {
        pencil: spec.pencil,
        grid: GridSpec { step_deg: spec.grid_step_deg, ..GridSpec::default() },
        fusion: spec.fusion,
        aperture,
        ..MusicOptions::default()
    }
}

pub fn snapshot_options(spec: &ScenarioSpec) -> SnapshotOptions<f64> {
    let mut opts = SnapshotOptions::auto(&spec.array);
    if let Some(model) = spec.model.fixed() {
        opts.model = ModelChoice::Fixed(model);
    }
    opts
}

/// Generating model of each target under the scenario's model setting.
pub fn target_models(spec: &ScenarioSpec) -> Vec<SteeringModel> {
    let regions = spec.array.field_regions();
    spec.targets
        .iter()
        .map(|t| spec.model.fixed().unwrap_or_else(|| select_model(t.range, &regions)))
        .collect()
}

pub fn make_snapshot(spec: &ScenarioSpec, snr_db: f64, seed: u64) -> Result<Snapshot64> {
    Ok(elaa_doa::snapshot_with(&spec.array, &spec.targets, snr_db, seed, &snapshot_options(spec))?)
}

/// Truth in the units the algorithm reports: ELAA broadside degrees, or
/// per-ULA degrees. Per-ULA truth is the local angle for targets generated
/// with a local wavefront and the global angle otherwise.
fn truth_angles(spec: &ScenarioSpec, algorithm: Algorithm) -> Result<Vec<f64>> {
    let ula = match algorithm {
        Algorithm::SsMusicUla1 => 0,
        Algorithm::SsMusicUla2 => 1,
        _ => return Ok(spec.targets.iter().map(|t| t.angle.to_degrees()).collect()),
    };
    spec.targets
        .iter()
        .zip(target_models(spec))
        .map(|(t, model)| match model {
            SteeringModel::FarField | SteeringModel::NearFieldSharedDoa => Ok(t.angle.to_degrees()),
            SteeringModel::NearFieldLocalPlanar | SteeringModel::Exact => {
                Ok(local_geometry(&spec.array, t)?[ula].angle.to_degrees())
            }
        })
        .collect()
}

fn failed(algorithm: Algorithm, snr_db: f64, trial: usize, seed: u64, message: String) -> TrialRecord {
    TrialRecord {
        algorithm,
        snr_db,
        trial,
        seed,
        outcome: TrialOutcome::Failed,
        estimates: Vec::new(),
        failure: Some(message),
        association_correct: if algorithm == Algorithm::NfLocalize { Some(false) } else { None },
    }
}

/// True when every estimated bearing pair lies nearest, on both ULAs, to
/// the same truth target and each target is used once.
pub fn association_is_correct(pairs: &[(f64, f64)], truth_local: &[(f64, f64)]) -> bool {
    let nearest = |x: f64, pick: fn(&(f64, f64)) -> f64| {
        truth_local
            .iter()
            .enumerate()
            .min_by(|a, b| (pick(a.1) - x).abs().total_cmp(&(pick(b.1) - x).abs()))
            .map(|(i, _)| i)
    };
    let mut used = vec![false; truth_local.len()];
    for &(a, b) in pairs {
        let (Some(i), Some(j)) = (nearest(a, |t| t.0), nearest(b, |t| t.1)) else {
            return false;
        };
        if i != j || used[i] {
            return false;
        }
        used[i] = true;
    }
    pairs.len() == truth_local.len()
}

/// Generates the snapshot for `(algorithm, snr_index, trial)` and runs the
/// estimator on it.
pub fn run_trial(spec: &ScenarioSpec, algorithm: Algorithm, snr_index: usize, trial: usize) -> Result<TrialRecord> {
    let snr_db = spec.snr_grid_db[snr_index];
    let seed = trial_seed(spec.base_seed, algorithm.name(), snr_index, trial);
    let snap = make_snapshot(spec, snr_db, seed)?;
    let k = spec.order();
    let record = |estimates: Vec<f64>, outcome: TrialOutcome, association_correct: Option<bool>| TrialRecord {
        algorithm,
        snr_db,
        trial,
        seed,
        outcome,
        estimates,
        failure: None,
        association_correct,
    };
    let angles = |result: elaa_doa::Result<Vec<f64>>| -> Result<TrialRecord> {
        Ok(match result {
            Ok(est) => {
                let deg: Vec<f64> = est.iter().map(|a| a.to_degrees()).collect();
                let truth = truth_angles(spec, algorithm)?;
                match angle_errors(&deg, &truth) {
                    Some(e) => record(deg, TrialOutcome::Errors(e), None),
                    None => failed(algorithm, snr_db, trial, seed, "estimate count mismatch".into()),
                }
            }
            Err(e) => failed(algorithm, snr_db, trial, seed, e.to_string()),
        })
    };
    match algorithm {
        Algorithm::SsMusicElaa => angles(estimate_doa_music(&snap.y, &spec.array, k, &music_options(spec, MusicAperture::Elaa))),
        Algorithm::SsMusicUla1 => {
            angles(estimate_doa_music(&snap.y, &spec.array, k, &music_options(spec, MusicAperture::Single(Ula::First))))
        }
        Algorithm::SsMusicUla2 => {
            angles(estimate_doa_music(&snap.y, &spec.array, k, &music_options(spec, MusicAperture::Single(Ula::Second))))
        }
        Algorithm::SsEsprit => {
            let opts = EspritOptions { pencil: spec.pencil, ..EspritOptions::default() };
            angles(estimate_doa_esprit(&snap.y, &spec.array, k, &opts).map(|e| e.angles))
        }
        Algorithm::NfLocalize => {
            let opts = LocalizeOptions { music: music_options(spec, MusicAperture::Elaa), association: spec.association };
            let loc = match localize(&snap.y, &spec.array, k, &opts) {
                Ok(loc) => loc,
                Err(e) => return Ok(failed(algorithm, snr_db, trial, seed, e.to_string())),
            };
            let truth_local: Vec<(f64, f64)> = spec
                .targets
                .iter()
                .map(|t| local_geometry(&spec.array, t).map(|v| (v[0].angle, v[1].angle)))
                .collect::<elaa_doa::Result<_>>()?;
            let pairs: Vec<(f64, f64)> = loc.targets.iter().map(|t| t.angles).collect();
            let assoc = association_is_correct(&pairs, &truth_local);
            match loc.positions() {
                Ok(pos) => {
                    let truth: Vec<[f64; 2]> = spec.targets.iter().map(|t| t.position()).collect();
                    let flat = pos.iter().flat_map(|p| p.iter().copied()).collect();
                    match position_errors(&pos, &truth) {
                        Some(e) => Ok(record(flat, TrialOutcome::Errors(e), Some(assoc))),
                        None => Ok(failed(algorithm, snr_db, trial, seed, "estimate count mismatch".into())),
                    }
                }
                Err(e) => {
                    let mut r = failed(algorithm, snr_db, trial, seed, e.to_string());
                    r.association_correct = Some(assoc);
                    Ok(r)
                }
            }
        }
    }
}

/// Failure penalty used when failures are folded into RMSE: 90° for angles,
/// the largest truth range for positions.
fn failure_penalty(spec: &ScenarioSpec, unit: MetricUnit) -> f64 {
    match unit {
        MetricUnit::Degrees => 90.0,
        MetricUnit::Meters => spec.targets.iter().map(|t| t.range).fold(0.0, f64::max),
    }
}

pub fn aggregate(spec: &ScenarioSpec, algorithm: Algorithm, snr_db: f64, trials: &[TrialRecord]) -> MetricsRow {
    let outcomes: Vec<TrialOutcome> = trials.iter().map(|t| t.outcome.clone()).collect();
    let unit = algorithm.unit();
    let tol = match unit {
        MetricUnit::Degrees => spec.hit_tolerance_deg,
        MetricUnit::Meters => spec.hit_tolerance_m,
    };
    let penalty = spec.rmse_include_failures.then(|| failure_penalty(spec, unit));
    let association_rate = (algorithm == Algorithm::NfLocalize).then(|| {
        trials.iter().filter(|t| t.association_correct == Some(true)).count() as f64 / trials.len().max(1) as f64
    });
    MetricsRow {
        algorithm: algorithm.name().to_string(),
        snr_db,
        n_trials: trials.len(),
        rmse: rmse(&outcomes, penalty),
        hit_rate: hit_rate(&outcomes, tol),
        failure_rate: failure_rate(&outcomes),
        unit,
        association_rate,
    }
}

/// Runs every (algorithm, SNR, trial) of the scenario. Work is spread over
/// the current rayon pool; output is independent of the worker count.
/// Rows are sorted by algorithm name, then SNR.
pub fn run_monte_carlo(spec: &ScenarioSpec) -> Result<RunReport> {
    spec.validate().map_err(|(field, message)| crate::error::HarnessError::Config {
        source_name: spec.name.clone(),
        location: crate::error::Location { field: Some(field), ..Default::default() },
        message,
    })?;
    let mut algorithms = spec.algorithms.clone();
    algorithms.sort_by_key(|a| a.name());
    algorithms.dedup();
    let mut snr_order: Vec<usize> = (0..spec.snr_grid_db.len()).collect();
    snr_order.sort_by(|&a, &b| spec.snr_grid_db[a].total_cmp(&spec.snr_grid_db[b]));

    let items: Vec<(Algorithm, usize, usize)> = algorithms
        .iter()
        .flat_map(|&a| snr_order.iter().flat_map(move |&s| (0..spec.n_trials).map(move |t| (a, s, t))))
        .collect();
    let trials: Vec<TrialRecord> =
        items.par_iter().map(|&(a, s, t)| run_trial(spec, a, s, t)).collect::<Result<Vec<_>>>()?;

    let rows = trials
        .chunks(spec.n_trials)
        .map(|chunk| aggregate(spec, chunk[0].algorithm, chunk[0].snr_db, chunk))
        .collect();
    Ok(RunReport { rows, trials })
}
