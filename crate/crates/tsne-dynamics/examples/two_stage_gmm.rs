//! Full two-stage run on a Gaussian mixture: early exaggeration collapses
//! the clusters, the embedding stage amplifies and then stabilizes them.
//!
//!     cargo run --release --example two_stage_gmm

use tsne_dynamics::affinity::affinity_from_data;
use tsne_dynamics::datagen::gmm_preset;
use tsne_dynamics::diagnostics::{amplification_trace, separation_ratio};
use tsne_dynamics::engine::{run, InitMode};
use tsne_dynamics::plot::render_svg;
use tsne_dynamics::theory::stabilized_theory_tuning;

fn main() -> tsne_dynamics::Result<()> {
    let n = 300;
    let seed = 7;
    let data = gmm_preset(n, seed)?;
    let p = affinity_from_data(&data.data, 30.0)?;

    let mut params = stabilized_theory_tuning(n, 1.0 / 3.0, 30.0, &p)?;
    params.seed = seed;
    println!(
        "n = {n}: alpha = {:.2}, h = h' = {:.2}, K0 = {}, K1 = {}, sigma_n = {:.4}",
        params.alpha, params.h, params.k0, params.k1, params.sigma_n
    );

    let traj = run(&p, &params, InitMode::Random)?;
    let labels = data.component_labels();

    let end_ee = traj.end_of_ee().expect("EE stage logged");
    println!(
        "end of early exaggeration (k = {}): diameter {:.2e}, separation ratio {:?}",
        end_ee.k,
        traj.scalars[params.k0].diameter,
        separation_ratio(&end_ee.coords, &labels)
    );

    let trace = amplification_trace(&traj);
    println!(
        "embedding stage: amplification boundary at k = {:?} of {} iterations",
        trace.phase_boundary,
        params.k0 + params.k1
    );
    println!(
        "final diameter {:.3}, final separation ratio {:?}",
        traj.scalars.last().unwrap().diameter,
        separation_ratio(&traj.final_snapshot().coords, &labels)
    );

    let out = std::env::temp_dir().join("two_stage_gmm.svg");
    render_svg(&traj.final_snapshot().coords, Some(&data.labels), &out)?;
    println!("wrote {}", out.display());
    Ok(())
}
