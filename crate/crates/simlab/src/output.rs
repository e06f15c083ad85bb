//! CSV, aligned-text and provenance renderings of experiment reports.

use serde::Serialize;
use serde_json::json;

use jointshrink_core::estimators::{DEFAULT_MAX_ITER, DEFAULT_TOL};
use jointshrink_core::losses::DEFAULT_HUBER_QUANTILE;
use jointshrink_core::modelselect::DEFAULT_FOLDS;

use crate::experiment::{ExperimentReport, MAX_REDRAW_RATE, MIN_GROUP_SIZE};
use crate::iris::IrisReport;

/// Marker for cells that cannot be computed.
pub const ABSENT: &str = "-";

fn opt(v: Option<f64>, digits: usize) -> String {
    v.map_or_else(String::new, |x| format!("{x:.digits$}"))
}

/// `method,mean,std,trials,mean_beta,absent` with one row per method.
pub fn experiment_csv(report: &ExperimentReport) -> String {
    let mut out = String::from("method,mean,std,trials,mean_beta,absent\n");
    for r in &report.rows {
        out.push_str(&format!(
            "{},{},{},{},{},{}\n",
            r.method,
            opt(r.mean, 4),
            opt(r.std, 4),
            r.trials,
            opt(r.mean_beta, 4),
            r.absent.as_deref().map_or(String::new(), |s| format!("\"{s}\"")),
        ));
    }
    out
}

fn pad_table(rows: &[Vec<String>]) -> String {
    let cols = rows.iter().map(Vec::len).max().unwrap_or(0);
    let widths: Vec<usize> = (0..cols)
        .map(|c| rows.iter().filter_map(|r| r.get(c)).map(|s| s.chars().count()).max().unwrap_or(0))
        .collect();
    let mut out = String::new();
    for r in rows {
        let line: Vec<String> = r
            .iter()
            .enumerate()
            .map(|(c, s)| {
                let pad = widths[c] - s.chars().count();
                if c == 0 {
                    format!("{s}{}", " ".repeat(pad))
                } else {
                    format!("{}{s}", " ".repeat(pad))
                }
            })
            .collect();
        out.push_str(line.join("  ").trim_end());
        out.push('\n');
    }
    out
}

/// Aligned `mean (std)` table in percent.
pub fn experiment_table(report: &ExperimentReport) -> String {
    let s = &report.spec;
    let mut rows = vec![vec![
        "method".to_string(),
        format!("{:?} {:?} K={} p={}", s.scenario, s.family, s.k, s.p),
    ]];
    for r in &report.rows {
        let cell = match (r.mean, r.std) {
            (Some(m), Some(sd)) => format!("{m:.1} ({sd:.1})"),
            _ => ABSENT.to_string(),
        };
        rows.push(vec![r.method.clone(), cell]);
    }
    pad_table(&rows)
}

/// `method,split,mean,std,mean_beta` with one row per method and split.
pub fn iris_csv(report: &IrisReport) -> String {
    let mut out = String::from("method,split,mean,std,mean_beta\n");
    let labels = report.split_labels();
    for r in &report.rows {
        for (i, label) in labels.iter().enumerate() {
            out.push_str(&format!(
                "{},{},{:.4},{:.4},{}\n",
                r.method,
                label,
                r.mean[i],
                r.std[i],
                opt(r.mean_beta[i], 4)
            ));
        }
    }
    out
}

/// Aligned table of mean validation errors in percent, splits as columns.
pub fn iris_table(report: &IrisReport) -> String {
    let mut header = vec!["method".to_string()];
    header.extend(report.split_labels());
    let mut rows = vec![header];
    for r in &report.rows {
        let mut row = vec![r.method.clone()];
        row.extend(r.mean.iter().map(|m| format!("{m:.1}")));
        rows.push(row);
    }
    pad_table(&rows)
}

/// Run record: package version, the full specification and all defaults.
pub fn provenance<S: Serialize>(kind: &str, spec: &S, redraws: serde_json::Value) -> serde_json::Value {
    json!({
        "tool": env!("CARGO_PKG_NAME"),
        "version": env!("CARGO_PKG_VERSION"),
        "experiment": kind,
        "spec": spec,
        "redraws": redraws,
        "defaults": {
            "solver_tol": DEFAULT_TOL,
            "solver_max_iter": DEFAULT_MAX_ITER,
            "huber_quantile": DEFAULT_HUBER_QUANTILE,
            "cv_folds": DEFAULT_FOLDS,
            "min_group_size": MIN_GROUP_SIZE,
            "max_redraw_rate": MAX_REDRAW_RATE,
            "rng": "ChaCha8 with per-purpose streams",
        },
    })
}

pub fn experiment_provenance(report: &ExperimentReport) -> serde_json::Value {
    provenance(
        "simulation",
        &report.spec,
        json!({ "class_sizes": report.size_redraws, "solver_failures": report.failure_redraws }),
    )
}

pub fn iris_provenance(report: &IrisReport) -> serde_json::Value {
    provenance("iris", &report.spec, json!({ "solver_failures": report.failure_redraws }))
}
