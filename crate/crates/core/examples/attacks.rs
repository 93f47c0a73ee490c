//! Each active attack against a threshold calibrated for a 2% false-positive
//! rate on that attack, and the leaked information of the two eavesdroppers.

use backscatter_auth::adversary::AttackKind;
use backscatter_auth::harness::{calibrate, leaked_information_trials, ExperimentConfig, TrialContext};

fn main() -> backscatter_auth::Result<()> {
    let base = ExperimentConfig {
        n_auth: 500,
        target_fpr: 0.02,
        ..Default::default()
    };
    for attack in [AttackKind::Impersonation, AttackKind::Counterfeit, AttackKind::Replay] {
        let cfg = ExperimentConfig { attack, ..base.clone() };
        let cal = calibrate(&cfg, "example")?;
        println!(
            "{:<14} delta {:.4}  genuine accepted {:.3}  attacker accepted {:.3}",
            attack.name(),
            cal.delta,
            cal.tpr,
            cal.fpr
        );
    }

    for (attack, d_a) in [(AttackKind::EavesdropNaive, 1.0), (AttackKind::EavesdropSmart, 0.1)] {
        let cfg = ExperimentConfig {
            attack,
            d_a_m: d_a,
            n_auth: 300,
            ..base.clone()
        };
        let li = leaked_information_trials(&cfg, &TrialContext::new(&cfg, "example"))?;
        println!("{:<14} at {d_a} m: leaked information {li:.3}", attack.name());
    }
    Ok(())
}
