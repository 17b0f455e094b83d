//! Visualize the noisy nested-sphere model: three concentric shells whose
//! radii differ by 2.5x, embedded with the two-stage optimizer.
//!
//!     cargo run --release --example nested_spheres

use tsne_dynamics::affinity::affinity_from_data;
use tsne_dynamics::datagen::spheres_preset;
use tsne_dynamics::diagnostics::separation_ratio;
use tsne_dynamics::engine::{run, InitMode};
use tsne_dynamics::plot::render_svg;
use tsne_dynamics::theory::stabilized_theory_tuning;

fn main() -> tsne_dynamics::Result<()> {
    let n = 300;
    let data = spheres_preset(n, 5)?;

    // Radii are exact up to the radial noise.
    for shell in 0..3 {
        let radii: Vec<f64> = (0..n)
            .filter(|&i| data.labels[i] == shell)
            .map(|i| data.data.row(i).iter().map(|x| x * x).sum::<f64>().sqrt())
            .collect();
        let mean = radii.iter().sum::<f64>() / radii.len() as f64;
        println!("shell {shell}: {} points, mean radius {mean:.2}", radii.len());
    }

    let p = affinity_from_data(&data.data, 30.0)?;
    let mut params = stabilized_theory_tuning(n, 0.5, 30.0, &p)?;
    params.seed = 5;
    let traj = run(&p, &params, InitMode::Random)?;

    let labels = data.component_labels();
    println!(
        "final separation ratio {:?}",
        separation_ratio(&traj.final_snapshot().coords, &labels)
    );
    let out = std::env::temp_dir().join("nested_spheres.svg");
    render_svg(&traj.final_snapshot().coords, Some(&data.labels), &out)?;
    println!("wrote {}", out.display());
    Ok(())
}
