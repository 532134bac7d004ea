//! CSV emitters.

use std::io::Write;

use crate::error::Result;
use crate::metrics::{MetricsRow, TrialOutcome};
use crate::runner::TrialRecord;

pub const RESULTS_HEADER: [&str; 7] = ["algorithm", "snr_db", "n_trials", "rmse", "hit_rate", "failure_rate", "metric_unit"];

fn join(values: &[f64]) -> String {
    values.iter().map(|v| v.to_string()).collect::<Vec<_>>().join(";")
}

/// One line per row; an absent RMSE is an empty field.
pub fn write_results<W: Write>(rows: &[MetricsRow], out: W) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(RESULTS_HEADER)?;
    for r in rows {
        w.write_record([
            r.algorithm.clone(),
            r.snr_db.to_string(),
            r.n_trials.to_string(),
            r.rmse.map(|v| v.to_string()).unwrap_or_default(),
            r.hit_rate.to_string(),
            r.failure_rate.to_string(),
            r.unit.label().to_string(),
        ])?;
    }
    w.flush().map_err(csv::Error::from)?;
    Ok(())
}

/// Per-trial records. `estimates` and `errors` are `;`-separated; positions
/// are flattened `x;y` pairs.
pub fn write_trials<W: Write>(trials: &[TrialRecord], out: W) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(["algorithm", "snr_db", "trial", "seed", "status", "estimates", "errors", "association_correct", "failure"])?;
    for t in trials {
        let (status, errors) = match &t.outcome {
            TrialOutcome::Errors(e) => ("ok", join(e)),
            TrialOutcome::Failed => ("failed", String::new()),
        };
        w.write_record([
            t.algorithm.name().to_string(),
            t.snr_db.to_string(),
            t.trial.to_string(),
            t.seed.to_string(),
            status.to_string(),
            join(&t.estimates),
            errors,
            t.association_correct.map(|b| b.to_string()).unwrap_or_default(),
            t.failure.clone().unwrap_or_default(),
        ])?;
    }
    w.flush().map_err(csv::Error::from)?;
    Ok(())
}

/// Named numeric columns of equal length.
pub fn write_columns<W: Write>(headers: &[&str], columns: &[&[f64]], out: W) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(headers)?;
    let rows = columns.iter().map(|c| c.len()).min().unwrap_or(0);
    for i in 0..rows {
        w.write_record(columns.iter().map(|c| c[i].to_string()))?;
    }
    w.flush().map_err(csv::Error::from)?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::scenario::MetricUnit;

    #[test]
    fn results_header_and_formatting() {
        let rows = vec![
            MetricsRow {
                algorithm: "ss_esprit".into(),
                snr_db: 30.0,
                n_trials: 500,
                rmse: Some(0.125),
                hit_rate: 1.0,
                failure_rate: 0.0,
                unit: MetricUnit::Degrees,
                association_rate: None,
            },
            MetricsRow {
                algorithm: "nf_localize".into(),
                snr_db: f64::INFINITY,
                n_trials: 2,
                rmse: None,
                hit_rate: 0.0,
                failure_rate: 1.0,
                unit: MetricUnit::Meters,
                association_rate: Some(0.0),
            },
        ];
        let mut buf = Vec::new();
        write_results(&rows, &mut buf).unwrap();
        let text = String::from_utf8(buf).unwrap();
        assert_eq!(
            text,
            "algorithm,snr_db,n_trials,rmse,hit_rate,failure_rate,metric_unit\n\
             ss_esprit,30,500,0.125,1,0,deg\n\
             nf_localize,inf,2,,0,1,m\n"
        );
    }

    #[test]
    fn columns_truncate_to_shortest() {
        let mut buf = Vec::new();
        write_columns(&["a", "b"], &[&[1.0, 2.0], &[0.5]], &mut buf).unwrap();
        assert_eq!(String::from_utf8(buf).unwrap(), "a,b\n1,0.5\n");
    }
}
