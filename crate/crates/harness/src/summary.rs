//! Aggregates per-run CSVs into `summary.csv` (one per sweep point) and a
//! top-level `final.csv`. Both are computed from the CSV files on disk, so
//! they can be audited against them.

use std::path::Path;

use crate::config::ExperimentConfig;
use crate::output::{format_g9, read_csv, write_atomic};
use crate::runner::{point_dir, RunOutcome};
use crate::HarnessError;

pub const SUMMARY_HEADER: &str = "t,regret_mean,regret_se,n_runs,bound_primary,bound_secondary";
pub const FINAL_HEADER: &str = "m,alpha,n_runs,n_failed,final_regret_mean,final_regret_se";

/// Sample mean and standard error; the error is 0 for a single value.
pub fn mean_se(xs: &[f64]) -> (f64, f64) {
    let n = xs.len() as f64;
    if xs.is_empty() {
        return (f64::NAN, f64::NAN);
    }
    let mean = xs.iter().sum::<f64>() / n;
    if xs.len() < 2 {
        return (mean, 0.0);
    }
    let var = xs.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (n - 1.0);
    (mean, (var / n).sqrt())
}

/// Summary rows for one sweep point, from the CSVs of its successful runs.
pub fn summarize_point(csvs: &[&Path]) -> Result<String, HarnessError> {
    let mut out = String::from(SUMMARY_HEADER);
    out.push('\n');
    let tables = csvs.iter().map(|p| read_csv(p)).collect::<Result<Vec<_>, _>>()?;
    let Some(first) = tables.first() else {
        return Ok(out);
    };
    let t = first.column("t")?;
    let primary = first.column("bound_primary")?;
    let secondary = first.column("bound_secondary")?;
    let curves = tables.iter().map(|tb| tb.column("regret_per_agent_mean")).collect::<Result<Vec<_>, _>>()?;
    if curves.iter().any(|c| c.len() != t.len()) {
        return Err(HarnessError::Csv("runs of one sweep point have different time grids".into()));
    }
    for (i, &ti) in t.iter().enumerate() {
        let col: Vec<f64> = curves.iter().map(|c| c[i]).collect();
        let (mean, se) = mean_se(&col);
        out.push_str(&format!(
            "{},{},{},{},{},{}\n",
            ti as u64,
            format_g9(mean),
            format_g9(se),
            col.len(),
            format_g9(primary[i]),
            format_g9(secondary[i])
        ));
    }
    Ok(out)
}

pub fn write_summaries(config: &ExperimentConfig, outcomes: &[RunOutcome]) -> Result<(), HarnessError> {
    let mut fin = String::from(FINAL_HEADER);
    fin.push('\n');
    for (m, alpha) in config.sweep_points() {
        let runs: Vec<&RunOutcome> = outcomes.iter().filter(|o| o.m == m && o.alpha == alpha).collect();
        let ok: Vec<&RunOutcome> = runs.iter().copied().filter(|o| o.error.is_none()).collect();
        let paths: Vec<&Path> = ok.iter().map(|o| o.csv.as_path()).collect();
        write_atomic(&point_dir(&config.output, m, alpha).join("summary.csv"), &summarize_point(&paths)?)?;
        let finals = paths
            .iter()
            .map(|p| {
                let col = read_csv(p)?.column("regret_per_agent_mean")?;
                col.last().copied().ok_or_else(|| HarnessError::Csv(format!("{} has no rows", p.display())))
            })
            .collect::<Result<Vec<f64>, _>>()?;
        let (mean, se) = mean_se(&finals);
        fin.push_str(&format!(
            "{m},{},{},{},{},{}\n",
            format_g9(alpha),
            ok.len(),
            runs.len() - ok.len(),
            format_g9(mean),
            format_g9(se)
        ));
    }
    write_atomic(&config.output.join("final.csv"), &fin)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn test_mean_se() {
        let (m, se) = mean_se(&[1.0, 2.0, 3.0, 4.0]);
        assert_eq!(m, 2.5);
        assert!((se - (5.0f64 / 12.0).sqrt()).abs() < 1e-12);
        assert_eq!(mean_se(&[7.0]), (7.0, 0.0));
        assert!(mean_se(&[]).0.is_nan());
    }
}
