use std::path::{Path, PathBuf};
use std::process::ExitCode;

use backscatter_auth::adversary::AttackKind;
use backscatter_auth::harness::{
    calibrate, dump_challenge_iq, export, run_monte_carlo, ExperimentConfig, MetricsReport, SweepAxis,
    SweepValue,
};
use backscatter_auth::Result;
use clap::{Args, Parser, Subcommand};

#[derive(Parser)]
#[command(name = "bsauth", about = "Backscatter authentication experiments")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run the Monte Carlo sweep and write summary.csv.
    Run(Common),
    /// Print the threshold that meets the target false-positive rate.
    Calibrate(Common),
    /// Run the sweep and write roc.csv.
    Roc(Common),
    /// Run the sweep and write every output file.
    Export(Common),
}

#[derive(Args)]
struct Common {
    /// TOML config; defaults apply when omitted.
    config: Option<PathBuf>,
    #[arg(long)]
    seed: Option<u64>,
    /// `axis=v1,v2,...`, for example `snr=0,5,10`.
    #[arg(long)]
    sweep: Option<String>,
    #[arg(long)]
    out: Option<PathBuf>,
    /// Sessions per population and sweep point.
    #[arg(long)]
    trials: Option<usize>,
    #[arg(long)]
    attack: Option<AttackKind>,
    /// Override any config key, e.g. `--set p_hash_mw=9`. Repeatable.
    #[arg(long = "set", value_name = "KEY=VALUE")]
    overrides: Vec<String>,
    /// Write one legitimate challenge as f32 I/Q to this file.
    #[arg(long)]
    dump_iq: Option<PathBuf>,
}

impl Common {
    fn config(&self) -> Result<ExperimentConfig> {
        let mut cfg = match &self.config {
            Some(p) => ExperimentConfig::load(p)?,
            None => ExperimentConfig::default(),
        }
        .with_overrides(&self.overrides)?;
        if let Some(s) = self.seed {
            cfg.seed = s;
        }
        if let Some(t) = self.trials {
            cfg.n_auth = t;
        }
        if let Some(a) = self.attack {
            cfg.attack = a;
        }
        if let Some(o) = &self.out {
            cfg.out = o.display().to_string();
        }
        if let Some(spec) = &self.sweep {
            let (axis, values) = spec.split_once('=').ok_or_else(|| {
                backscatter_auth::Error::Config(format!("sweep `{spec}` is not axis=v1,v2"))
            })?;
            cfg.sweep = axis.parse::<SweepAxis>()?;
            cfg.sweep_values = values.split(',').map(|v| SweepValue::parse(v.trim())).collect();
        }
        cfg.validate()?;
        Ok(cfg)
    }
}

fn print_reports(reports: &[MetricsReport]) {
    for r in reports {
        let li = r.li.map(|v| format!(" li={v:.4}")).unwrap_or_default();
        println!(
            "{}={} auth={} attack={} auc={:.4} delta={:.4} tpr={:.4} fpr={:.4}{li}",
            r.sweep_axis, r.sweep_value, r.auth, r.attack, r.auc, r.delta, r.tpr_at_delta, r.fpr_at_delta
        );
    }
}

fn execute(cli: Cli) -> Result<()> {
    let (common, command) = match &cli.command {
        Command::Run(c) => (c, "run"),
        Command::Calibrate(c) => (c, "calibrate"),
        Command::Roc(c) => (c, "roc"),
        Command::Export(c) => (c, "export"),
    };
    let cfg = common.config()?;
    if let Some(path) = &common.dump_iq {
        let n = dump_challenge_iq(&cfg, path)?;
        eprintln!("wrote {n} samples to {}", path.display());
    }
    let out = Path::new(&cfg.out);
    match command {
        "calibrate" => {
            for (label, point) in cfg.points()? {
                let c = calibrate(&point, &label)?;
                println!(
                    "{}={label} delta={} tpr={} fpr={}",
                    cfg.sweep.name(),
                    c.delta,
                    c.tpr,
                    c.fpr
                );
            }
        }
        "run" => {
            let reports = run_monte_carlo(&cfg)?;
            print_reports(&reports);
            export::write_summary_csv(&reports, &out.join("summary.csv"))?;
            if reports.iter().any(|r| r.confusion.is_some()) {
                export::write_confusion_csv(&reports, &out.join("confusion.csv"))?;
            }
        }
        "roc" => {
            let reports = run_monte_carlo(&cfg)?;
            export::write_roc_csv(&reports, &out.join("roc.csv"))?;
        }
        _ => {
            let reports = run_monte_carlo(&cfg)?;
            print_reports(&reports);
            for p in export::export_all(&cfg, &reports, out)? {
                eprintln!("wrote {}", p.display());
            }
        }
    }
    Ok(())
}

fn main() -> ExitCode {
    match execute(Cli::parse()) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::FAILURE
        }
    }
}
