//! The power-iteration surrogate is the Euler scheme of the gradient flow
//! `dY/dt = -L(alpha P - H_n) Y`. Its deviation from the exact spectral
//! solution is bounded by `T h ||L(alpha P - H_n)||^2` and shrinks linearly
//! in h.
//!
//!     cargo run --release --example euler_vs_flow

use tsne_dynamics::affinity::affinity_from_data;
use tsne_dynamics::datagen::gmm_preset;
use tsne_dynamics::diagnostics::euler_flow_gap;
use tsne_dynamics::rng::SplitMix64;

fn main() -> tsne_dynamics::Result<()> {
    let n = 40;
    let data = gmm_preset(n, 4)?;
    let p = affinity_from_data(&data.data, 10.0)?;
    let y0 = [
        SplitMix64::split(4, 0).normals(n),
        SplitMix64::split(4, 1).normals(n),
    ];
    let alpha = 2.0;
    let t = 1.0;
    println!("{:>8} {:>12} {:>12} {:>8}", "h", "measured", "bound", "ratio");
    let mut prev: Option<f64> = None;
    for h in [0.08, 0.04, 0.02, 0.01, 0.005] {
        let gap = euler_flow_gap(&p, alpha, h, &y0, t)?;
        let halving = prev
            .map(|m| format!("{:.3}", gap.measured / m))
            .unwrap_or_else(|| "-".into());
        println!(
            "{h:>8} {:>12.3e} {:>12.3e} {halving:>8}",
            gap.measured, gap.bound
        );
        prev = Some(gap.measured);
    }
    Ok(())
}
