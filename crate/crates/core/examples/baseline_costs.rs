//! Latency and power of the physical-layer scheme against the XOR and hash
//! baselines, plus what an eavesdropper learns from each baseline.

use backscatter_auth::baselines::{baseline_leaked_information, latency, power, Scheme};
use backscatter_auth::harness::ExperimentConfig;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

fn main() -> backscatter_auth::Result<()> {
    let cfg = ExperimentConfig::default();
    let m = cfg.cost_model();
    let schemes = [Scheme::Ours, Scheme::Baseline1, Scheme::Baseline2];

    println!("latency of {} authentications:", cfg.n_auth);
    for s in schemes {
        println!("  {:<10} {:.4} s", s.name(), latency(s, &m, cfg.n_auth));
    }
    println!("power per authentication (mW):");
    println!("  {:>5} {:>10} {:>10} {:>10}", "d (m)", "ours", "baseline1", "baseline2");
    for d in [1.0, 2.0, 5.0, 10.0] {
        let row: Vec<String> = schemes
            .iter()
            .map(|s| power(*s, &m, d).map(|p| format!("{p:>10.3}")))
            .collect::<Result<_, _>>()?;
        println!("  {d:>5} {}", row.join(" "));
    }

    let mut rng = ChaCha8Rng::seed_from_u64(5);
    for s in [Scheme::Baseline1, Scheme::Baseline2] {
        let li = baseline_leaked_information(s, 1000, cfg.keylength, 16, &mut rng)?;
        println!("{} eavesdropper leaked information {li:.3}", s.name());
    }
    Ok(())
}
