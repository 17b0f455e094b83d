//! The intercluster-repulsion picture of the amplification phase: each
//! point's step decomposes into one repulsive force per foreign cluster
//! plus a remainder that stays small while the map diameter is small.
//!
//!     cargo run --release --example repulsion_forces

use tsne_dynamics::affinity::AffinityP;
use tsne_dynamics::diagnostics::{amplification_trace, force_residual};
use tsne_dynamics::engine::{run_with_stride, InitMode, SnapshotStride};
use tsne_dynamics::spectral::{connected_components, SquareSym};
use tsne_dynamics::theory::{repulsion_forces, stabilized_theory_tuning};

fn main() -> tsne_dynamics::Result<()> {
    // Three exact clusters with uniform within-cluster affinities.
    let sizes = [100usize, 100, 100];
    let n: usize = sizes.iter().sum();
    let mut who = Vec::new();
    for (r, &s) in sizes.iter().enumerate() {
        who.extend(std::iter::repeat(r).take(s));
    }
    let pairs: usize = sizes.iter().map(|&s| s * (s - 1)).sum();
    let w = 1.0 / pairs as f64;
    let mat = SquareSym::from_fn(n, |i, j| if i != j && who[i] == who[j] { w } else { 0.0 })?;
    let p = AffinityP::from_matrix(mat)?;
    let labels = connected_components(p.matrix(), 0.0);

    let mut params = stabilized_theory_tuning(n, 1.0 / 3.0, 30.0, &p)?;
    params.seed = 1;
    let traj = run_with_stride(
        &p,
        &params,
        InitMode::Random,
        SnapshotStride { ee: 1, embed: 1 },
    )?;

    // Residual-to-force ratio along the embedding stage, grouped by the
    // map diameter at each step.
    let trace = amplification_trace(&traj);
    let series = force_residual(&traj, &labels, params.h_prime);
    let diam_at: std::collections::BTreeMap<usize, f64> =
        traj.scalars.iter().map(|s| (s.k, s.diameter)).collect();
    println!("amplification boundary: k = {:?}", trace.phase_boundary);
    for (lo, hi) in [(0.0, 0.05), (0.05, 0.2), (0.2, 1.0)] {
        let max = series
            .iter()
            .filter(|(k, _)| {
                let d = diam_at.get(k).copied().unwrap_or(f64::NAN);
                d >= lo && d < hi && trace.phase_boundary.map(|b| *k < b).unwrap_or(true)
            })
            .filter_map(|(_, f)| f.value())
            .fold(0.0f64, f64::max);
        println!("diameter in [{lo}, {hi}): max ||eps|| / min ||f|| = {max:.4}");
    }

    // One explicit decomposition at the first embedding step.
    let state = traj.end_of_ee().unwrap();
    let fd = repulsion_forces(&state.coords, &p, &labels, params.h_prime);
    let i = 0;
    println!("point 0 (cluster {}):", labels.labels[i]);
    for r in 0..labels.r {
        if r != labels.labels[i] {
            println!(
                "  force from cluster {r}: ({:+.3e}, {:+.3e})",
                fd.forces[i][r][0], fd.forces[i][r][1]
            );
        }
    }
    println!(
        "  remainder: ({:+.3e}, {:+.3e})",
        fd.residual[i][0], fd.residual[i][1]
    );
    Ok(())
}
