//! Implicit regularization along the gradient flow: eigenmodes of L(P)
//! with `alpha lambda > 1/(n-1)` decay exponentially in t, modes below the
//! threshold grow, and the constant mode never moves.
//!
//!     cargo run --release --example gradient_flow_modes

use tsne_dynamics::affinity::affinity_from_data;
use tsne_dynamics::datagen::gmm_preset;
use tsne_dynamics::engine::init_random;
use tsne_dynamics::theory::regularization_profile;

fn main() -> tsne_dynamics::Result<()> {
    let n = 60;
    let data = gmm_preset(n, 2)?;
    let p = affinity_from_data(&data.data, 10.0)?;
    let alpha = 8.0;
    let y0 = init_random(n, 0.1, 2)?.column(0);

    let grid = [0.0, 5.0, 20.0, 80.0];
    let profile = regularization_profile(&p, alpha, &y0, &grid)?;
    let threshold = 1.0 / (n as f64 - 1.0);

    println!("threshold alpha*lambda = 1/(n-1) = {threshold:.5}");
    println!("{:>4} {:>12} {:>9}  coefficients over t = {grid:?}", "mode", "alpha*lambda", "class");
    for mode in [0usize, 1, 2, 3, 10, 30, n - 1] {
        let rate = alpha * profile.eigenvalues[mode];
        let class = if mode == 0 {
            "constant"
        } else if rate > threshold {
            "decays"
        } else {
            "grows"
        };
        let coeffs: Vec<String> = profile.traces[mode]
            .iter()
            .map(|c| format!("{c:+.4}"))
            .collect();
        println!("{mode:>4} {rate:>12.5} {class:>9}  [{}]", coeffs.join(", "));
    }
    Ok(())
}
