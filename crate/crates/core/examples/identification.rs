//! A verifier identifies which of ten registered devices answered, by the
//! nearest stored key.

use backscatter_auth::harness::{identification, ExperimentConfig, TrialContext};

fn main() -> backscatter_auth::Result<()> {
    let cfg = ExperimentConfig {
        identification: true,
        n_devices: 10,
        n_auth: 200,
        ..Default::default()
    };
    let m = identification(&cfg, &TrialContext::new(&cfg, "example"))?;
    println!("rows: true device, columns: predicted device");
    for (i, row) in m.counts.iter().enumerate() {
        let cells: Vec<String> = row.iter().map(|c| format!("{c:>4}")).collect();
        println!("{:>2} |{}  unresolved {}", i + 1, cells.join(""), m.unresolved[i]);
    }
    println!("accuracy {:.4}", m.accuracy());
    Ok(())
}
