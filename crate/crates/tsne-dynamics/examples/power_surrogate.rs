//! How closely does early exaggeration track its linear surrogate, the
//! power iterates of `I - h L(alpha P - H_n)`? The relative deviation stays
//! small throughout the stage and shrinks as the sample grows.
//!
//!     cargo run --release --example power_surrogate

use tsne_dynamics::affinity::{conditional_affinities, symmetrize, Bandwidths};
use tsne_dynamics::datagen::{gmm_means, gmm_sample, CovarianceSpec};
use tsne_dynamics::diagnostics::surrogate_deviation;
use tsne_dynamics::engine::{run_with_stride, InitMode, SnapshotStride};
use tsne_dynamics::theory::theory_tuning;

fn main() -> tsne_dynamics::Result<()> {
    let p_dim = 50;
    for n in [100usize, 200, 400] {
        // Strong separation and the analytic bandwidth tau^2 = max(p, ln n).
        let rho2 = 50.0 * (p_dim as f64).max((n as f64).ln());
        let means = gmm_means(6, p_dim, rho2.sqrt(), 11)?;
        let data = gmm_sample(
            n,
            &means,
            &CovarianceSpec::Identity(1.0),
            &[0.1, 0.1, 0.1, 0.15, 0.25, 0.3],
            11,
        )?;
        let tau = Bandwidths::fixed(n, (p_dim as f64).max((n as f64).ln()))?;
        let p = symmetrize(&conditional_affinities(&data.data, &tau)?);

        let mut params = theory_tuning(n, 0.5, 30.0);
        params.alpha *= 0.25; // keep h lambda_n(L(alpha P)) below one
        params.sigma_n = 0.5;
        params.seed = 11;
        params.k1 = 0;
        let traj = run_with_stride(
            &p,
            &params,
            InitMode::Random,
            SnapshotStride { ee: 1, embed: 1 },
        )?;
        let series = surrogate_deviation(&traj, &p, params.alpha, params.h)?;
        let sup = series.iter().map(|(_, d)| *d).fold(0.0f64, f64::max);
        let (k_last, last) = series.last().copied().unwrap();
        println!(
            "n = {n:3}: K0 = {:2}, sup_k deviation = {sup:.4}, deviation at k = {k_last}: {last:.4}",
            params.k0
        );
    }
    Ok(())
}
