//! Spectral initialization: on strongly clustered data the two smallest
//! nontrivial eigenvectors of L(P) already separate the components, so the
//! early-exaggeration stage can be skipped entirely.
//!
//!     cargo run --release --example spectral_initialization

use tsne_dynamics::affinity::affinity_from_data;
use tsne_dynamics::datagen::{gmm_means, gmm_sample, CovarianceSpec};
use tsne_dynamics::diagnostics::separation_ratio;
use tsne_dynamics::engine::{init_random, init_spectral, run, InitMode};
use tsne_dynamics::theory::stabilized_theory_tuning;

fn main() -> tsne_dynamics::Result<()> {
    let n = 150;
    let means = gmm_means(3, 40, 40.0, 9)?;
    let data = gmm_sample(
        n,
        &means,
        &CovarianceSpec::Identity(1.0),
        &[0.3, 0.3, 0.4],
        9,
    )?;
    let p = affinity_from_data(&data.data, 15.0)?;
    let labels = data.component_labels();

    let spectral = init_spectral(&p, 0.05)?;
    let random = init_random(n, 0.05, 9)?;
    println!(
        "separation ratio of the raw initialization: spectral {:?}, random {:?}",
        separation_ratio(&spectral.coords, &labels),
        separation_ratio(&random.coords, &labels)
    );

    // Embedding stage only, starting from the spectral map.
    let mut params = stabilized_theory_tuning(n, 0.5, 15.0, &p)?;
    params.k0 = 0;
    params.k1 = 300;
    params.seed = 9;
    let traj = run(&p, &params, InitMode::Given(spectral))?;
    println!(
        "after {} embedding steps from the spectral start: {:?}",
        params.k1,
        separation_ratio(&traj.final_snapshot().coords, &labels)
    );
    Ok(())
}
