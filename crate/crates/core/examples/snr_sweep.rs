//! A small Monte Carlo sweep over SNR, written out as CSV files.

use backscatter_auth::harness::{export_all, run_monte_carlo, ExperimentConfig, SweepAxis, SweepValue};

fn main() -> backscatter_auth::Result<()> {
    let cfg = ExperimentConfig {
        sweep: SweepAxis::Snr,
        sweep_values: [0.0, 5.0, 10.0, 15.0, 20.0].map(SweepValue::Number).to_vec(),
        n_auth: 300,
        out: std::env::temp_dir().join("snr_sweep").display().to_string(),
        ..Default::default()
    };
    let reports = run_monte_carlo(&cfg)?;
    for r in &reports {
        println!(
            "snr {:>4} dB  auc {:.4}  tpr at 2% fpr {:.3}",
            r.sweep_value,
            r.auc,
            r.roc.tpr_at_fpr(0.02)
        );
    }
    for path in export_all(&cfg, &reports, std::path::Path::new(&cfg.out))? {
        println!("wrote {}", path.display());
    }
    Ok(())
}
