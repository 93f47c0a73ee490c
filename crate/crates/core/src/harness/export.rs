//! CSV output. Floats use Rust's shortest round-trip formatting, so a rerun
//! with the same config reproduces the files byte for byte.

use std::path::{Path, PathBuf};

use crate::baselines::{computation_power_mw, latency, power, rf_power_mw, Scheme};
use crate::error::{Error, Result};
use crate::harness::config::ExperimentConfig;
use crate::harness::experiment::MetricsReport;

fn writer(path: &Path) -> Result<csv::Writer<std::fs::File>> {
    if let Some(dir) = path.parent() {
        if !dir.as_os_str().is_empty() {
            std::fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
        }
    }
    csv::Writer::from_path(path).map_err(Error::from)
}

fn opt(x: Option<f64>) -> String {
    x.map(|v| v.to_string()).unwrap_or_default()
}

/// One row per sweep point.
pub fn write_summary_csv(reports: &[MetricsReport], path: &Path) -> Result<()> {
    let mut w = writer(path)?;
    let limits: Vec<f64> = reports
        .first()
        .map(|r| r.tpr_at_fpr.iter().map(|(l, _)| *l).collect())
        .unwrap_or_default();
    let mut header: Vec<String> = ["sweep_axis", "sweep_value", "auth", "attack", "n_auth", "auc", "delta", "tpr_at_delta", "fpr_at_delta"]
        .iter()
        .map(|s| s.to_string())
        .collect();
    header.extend(limits.iter().map(|l| format!("tpr_at_fpr_{l}")));
    header.extend(["li", "latency_s", "power_mw", "seed", "config_hash"].iter().map(|s| s.to_string()));
    w.write_record(&header)?;
    for r in reports {
        let mut row = vec![
            r.sweep_axis.clone(),
            r.sweep_value.clone(),
            r.auth.clone(),
            r.attack.clone(),
            r.n_auth.to_string(),
            r.auc.to_string(),
            r.delta.to_string(),
            r.tpr_at_delta.to_string(),
            r.fpr_at_delta.to_string(),
        ];
        row.extend(r.tpr_at_fpr.iter().map(|(_, t)| t.to_string()));
        row.extend([
            opt(r.li),
            r.latency_s.to_string(),
            r.power_mw.to_string(),
            r.seed.to_string(),
            r.config_hash.clone(),
        ]);
        w.write_record(&row)?;
    }
    w.flush().map_err(|e| Error::io(path, e))
}

/// Every ROC operating point of every sweep point.
pub fn write_roc_csv(reports: &[MetricsReport], path: &Path) -> Result<()> {
    let mut w = writer(path)?;
    w.write_record(["sweep_axis", "sweep_value", "auth", "attack", "delta", "fpr", "tpr"])?;
    for r in reports {
        for p in &r.roc.points {
            w.write_record([
                r.sweep_axis.as_str(),
                r.sweep_value.as_str(),
                r.auth.as_str(),
                r.attack.as_str(),
                &p.delta.to_string(),
                &p.fpr.to_string(),
                &p.tpr.to_string(),
            ])?;
        }
    }
    w.flush().map_err(|e| Error::io(path, e))
}

/// Long-format identification counts; the `predicted` column is empty for
/// aborted sessions.
pub fn write_confusion_csv(reports: &[MetricsReport], path: &Path) -> Result<()> {
    let mut w = writer(path)?;
    w.write_record(["sweep_axis", "sweep_value", "true_device", "predicted_device", "count"])?;
    for r in reports {
        let Some(m) = &r.confusion else { continue };
        for (i, row) in m.counts.iter().enumerate() {
            for (j, c) in row.iter().enumerate() {
                w.write_record([
                    r.sweep_axis.clone(),
                    r.sweep_value.clone(),
                    (i + 1).to_string(),
                    (j + 1).to_string(),
                    c.to_string(),
                ])?;
            }
            w.write_record([
                r.sweep_axis.clone(),
                r.sweep_value.clone(),
                (i + 1).to_string(),
                String::new(),
                m.unresolved[i].to_string(),
            ])?;
        }
    }
    w.flush().map_err(|e| Error::io(path, e))
}

/// Latency and power of each scheme against device distance.
pub fn write_costs_csv(cfg: &ExperimentConfig, distances_m: &[f64], path: &Path) -> Result<()> {
    let cost = cfg.cost_model();
    let mut w = writer(path)?;
    w.write_record(["distance_m", "scheme", "n_auth", "latency_s", "power_mw", "rf_power_mw", "computation_power_mw"])?;
    for d in distances_m {
        for scheme in Scheme::ALL {
            w.write_record([
                d.to_string(),
                scheme.name().to_string(),
                cfg.n_auth.to_string(),
                latency(scheme, &cost, cfg.n_auth).to_string(),
                power(scheme, &cost, *d)?.to_string(),
                rf_power_mw(&cost, *d)?.to_string(),
                computation_power_mw(scheme, &cost).to_string(),
            ])?;
        }
    }
    w.flush().map_err(|e| Error::io(path, e))
}

const PLOT_RECIPES: &str = "\
summary.csv
  x = sweep_value, y = auc (one line per auth/attack pair)
  x = sweep_value, y = tpr_at_fpr_<limit>
  x = sweep_value, y = li (eavesdropping runs only)
roc.csv
  x = fpr, y = tpr, one curve per (sweep_value, auth, attack); step plot
confusion.csv
  heatmap of count with rows true_device and columns predicted_device
  the row with an empty predicted_device counts aborted sessions
costs.csv
  x = distance_m, y = power_mw, one line per scheme, log y axis
  bars of latency_s per scheme
";

pub fn write_plot_recipes(path: &Path) -> Result<()> {
    std::fs::write(path, PLOT_RECIPES).map_err(|e| Error::io(path, e))
}

/// Writes the full output set into `dir` and returns the paths written.
pub fn export_all(cfg: &ExperimentConfig, reports: &[MetricsReport], dir: &Path) -> Result<Vec<PathBuf>> {
    std::fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    let mut written = Vec::new();
    let summary = dir.join("summary.csv");
    write_summary_csv(reports, &summary)?;
    written.push(summary);
    let roc = dir.join("roc.csv");
    write_roc_csv(reports, &roc)?;
    written.push(roc);
    if reports.iter().any(|r| r.confusion.is_some()) {
        let confusion = dir.join("confusion.csv");
        write_confusion_csv(reports, &confusion)?;
        written.push(confusion);
    }
    let costs = dir.join("costs.csv");
    let distances: Vec<f64> = (1..=10).map(f64::from).collect();
    write_costs_csv(cfg, &distances, &costs)?;
    written.push(costs);
    let recipes = dir.join("plot_recipes.txt");
    write_plot_recipes(&recipes)?;
    written.push(recipes);
    Ok(written)
}
