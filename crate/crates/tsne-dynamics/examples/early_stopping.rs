//! The early-stopping study: run the same data with the three
//! early-exaggeration budgets floor((ln n)^2), n^(2/3), n^(3/4) and a
//! shared initialization, then compare the stage outputs.
//!
//!     cargo run --release --example early_stopping

use tsne_dynamics::experiment::{cmd_early_stop_study, DataSource, ExperimentConfig};
use tsne_dynamics::theory::early_stop_k0_schedule;

fn main() -> tsne_dynamics::Result<()> {
    println!(
        "reference budgets at n = 1600: {:?}",
        early_stop_k0_schedule(1600)
    );

    let mut config = ExperimentConfig::new(DataSource::PresetGmm { n: 200 });
    config.perplexity = 15.0;
    config.seed = 1;
    config.overrides.k1 = Some(200);
    config.out_dir = std::env::temp_dir().join("early_stopping_study");
    let entries = cmd_early_stop_study(&config)?;

    println!("study on the mixture preset at n = 200 (SVGs in {}):", config.out_dir.display());
    for e in &entries {
        println!(
            "  K0 = {:>3}: separation at end of EE = {:?}, final = {:?}",
            e.k0, e.separation_end_ee, e.separation_final
        );
    }
    Ok(())
}
