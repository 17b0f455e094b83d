//! Closed-form surrogates for the early-exaggeration dynamics: the tuning
//! schedule, the linear power-iteration trajectory, the gradient-flow
//! solution path, Laplacian null-space limits, and the intercluster force
//! decomposition of embedding-stage steps.
//!
//! The surrogate operator is `I - h L(alpha P - H_n)`: early exaggeration
//! tracks its power iterates, and the continuous-time limit
//! `Y(t) = exp(-t L(alpha P - H_n)) y0` is evaluated spectrally (exact for
//! symmetric matrices), never by series. Series evaluation appears only in
//! test oracles.

use crate::affinity::AffinityP;
use crate::engine::TuningParams;
use crate::spectral::{
    connected_components, eig_sym, h_matrix, laplacian, ComponentLabels, SquareSym,
    COMPONENT_THRESHOLD,
};
use crate::{Error, Result};

/// The reference schedule: `alpha = n^(1-delta)`, `h = h' = n^delta`,
/// `K0 = floor((ln n)^2)`, `sigma_n = (ln n)^(-2)`. Logs are natural: the
/// reference values K0 = 53 at n = 1500 and K0 = 54 at n = 1600 only hold
/// for ln. `K1` defaults to `1000 - K0`, matching common practice of about
/// a thousand total iterations.
pub fn theory_tuning(n: usize, delta: f64, perplexity: f64) -> TuningParams {
    assert!(n >= 10, "theory_tuning needs n >= 10");
    assert!(delta > 0.0 && delta < 1.0, "delta must lie in (0, 1)");
    let nf = n as f64;
    let ln_n = nf.ln();
    let k0 = (ln_n * ln_n).floor() as usize;
    TuningParams {
        alpha: nf.powf(1.0 - delta),
        h: nf.powf(delta),
        h_prime: nf.powf(delta),
        k0,
        k1: 1000usize.saturating_sub(k0),
        delta,
        perplexity,
        sigma_n: ln_n.powi(-2),
        seed: 0,
    }
}

/// Upper target for `h lambda_n(L(alpha P))` in [`stabilized_theory_tuning`]:
/// keeps every mode of the early-exaggeration operator inside the unit
/// circle with margin.
pub const STABILITY_TARGET: f64 = 0.9;

/// The schedule of [`theory_tuning`] with the exaggeration rescaled so the
/// eigengap upper condition `h lambda_n(L(alpha P)) < 1` actually holds on
/// the given affinities.
///
/// With `alpha h = n` verbatim, `h lambda_n(L(alpha P)) = n lambda_n(L(P))`
/// lands between roughly 2 and 6 on desk-scale kernel matrices, and the
/// exaggeration stage amplifies the top Laplacian modes exponentially. The
/// schedule's derivation only constrains the product `alpha h` up to a
/// constant, so this variant multiplies `alpha` by
/// `min(1, STABILITY_TARGET / (n lambda_n(L(P))))` and leaves everything
/// else untouched.
pub fn stabilized_theory_tuning(
    n: usize,
    delta: f64,
    perplexity: f64,
    p: &AffinityP,
) -> Result<TuningParams> {
    let mut params = theory_tuning(n, delta, perplexity);
    let decomp = eig_sym(&laplacian(p.matrix()))?;
    let lambda_max = decomp.eigenvalues[n - 1];
    let gamma = (STABILITY_TARGET / (n as f64 * lambda_max)).min(1.0);
    params.alpha = (gamma * params.alpha).max(1.0);
    Ok(params)
}

/// The three early-stopping budgets compared in the early-stop study:
/// `floor((ln n)^2)`, `n^(2/3)`, `n^(3/4)`. The power-law entries are
/// rounded to the nearest integer, which reproduces the reference values
/// (137, 253) at n = 1600; plain floor lands one below on both.
pub fn early_stop_k0_schedule(n: usize) -> [usize; 3] {
    let nf = n as f64;
    [
        (nf.ln().powi(2)).floor() as usize,
        nf.powf(2.0 / 3.0).round() as usize,
        nf.powf(0.75).round() as usize,
    ]
}

/// `alpha A - H_n` for a symmetric adjacency `A`.
pub fn exaggerated_adjacency(adj: &SquareSym, alpha: f64) -> SquareSym {
    let h = h_matrix(adj.n()).expect("adjacency has n >= 2");
    SquareSym::linear_comb(alpha, adj, -1.0, &h).expect("same dimensions")
}

/// The early-exaggeration surrogate operator `I - h L(alpha A - H_n)`.
pub fn ee_operator(adj: &SquareSym, alpha: f64, h: f64) -> SquareSym {
    let l = laplacian(&exaggerated_adjacency(adj, alpha));
    let n = adj.n();
    SquareSym::from_fn_full(n, |i, j| {
        let id = if i == j { 1.0 } else { 0.0 };
        id - h * l.get(i, j)
    })
    .expect("adjacency has n >= 2")
}

/// Power-iteration surrogate `[I - h L(alpha P - H_n)]^k y0`, applied
/// iteratively (never via explicit matrix powers). `k = 0` returns `y0`.
pub fn power_surrogate(
    p: &AffinityP,
    alpha: f64,
    h: f64,
    y0: &[Vec<f64>; 2],
    k: usize,
) -> [Vec<f64>; 2] {
    let op = ee_operator(p.matrix(), alpha, h);
    let mut current = y0.clone();
    for _ in 0..k {
        current = [op.matvec(&current[0]), op.matvec(&current[1])];
    }
    current
}

/// All surrogate iterates `k = 0 ..= kmax` for a symmetric adjacency.
pub fn power_surrogate_trajectory(
    adj: &SquareSym,
    alpha: f64,
    h: f64,
    y0: &[Vec<f64>; 2],
    kmax: usize,
) -> Vec<[Vec<f64>; 2]> {
    let op = ee_operator(adj, alpha, h);
    let mut out = Vec::with_capacity(kmax + 1);
    let mut current = y0.clone();
    out.push(current.clone());
    for _ in 0..kmax {
        current = [op.matvec(&current[0]), op.matvec(&current[1])];
        out.push(current.clone());
    }
    out
}

/// Spectral basis for the gradient flow of `L(alpha P - H_n)`, from the
/// eigendecomposition of `L(P)` with the null block aligned so the constant
/// vector is mode 0. Mode 0 has a time-independent coefficient; mode `i`
/// evolves as `exp(-t (alpha lambda_i - 1/(n-1)))`.
struct FlowBasis {
    eigenvalues: Vec<f64>,
    eigenvectors: Vec<Vec<f64>>,
    alpha: f64,
    n: usize,
}

impl FlowBasis {
    fn build(p: &AffinityP, alpha: f64) -> Result<Self> {
        let decomp = eig_sym(&laplacian(p.matrix()))?.align_null_block_to_constant(1e-10);
        Ok(FlowBasis {
            eigenvalues: decomp.eigenvalues,
            eigenvectors: decomp.eigenvectors,
            alpha,
            n: p.n(),
        })
    }

    fn coefficient(&self, mode: usize, c0: f64, t: f64) -> f64 {
        if mode == 0 {
            c0
        } else {
            let rate = self.alpha * self.eigenvalues[mode] - 1.0 / (self.n as f64 - 1.0);
            (-t * rate).exp() * c0
        }
    }

    fn evaluate(&self, y0: &[f64], t: f64) -> Vec<f64> {
        if t == 0.0 {
            // exp(0) is the identity; skip the basis round trip.
            return y0.to_vec();
        }
        let mut out = vec![0.0; self.n];
        for (mode, u) in self.eigenvectors.iter().enumerate() {
            let c0: f64 = u.iter().zip(y0).map(|(a, b)| a * b).sum();
            let c = self.coefficient(mode, c0, t);
            for (o, &ui) in out.iter_mut().zip(u) {
                *o += c * ui;
            }
        }
        out
    }
}

/// Solution path `Y_l(t) = exp(-t L(alpha P - H_n)) y_l^(0)`, assembled
/// spectrally. `t = 0` returns the initial vectors.
pub fn gradient_flow(p: &AffinityP, alpha: f64, y0: &[Vec<f64>; 2], t: f64) -> Result<[Vec<f64>; 2]> {
    Ok(gradient_flow_path(p, alpha, y0, &[t])?.pop().expect("one time"))
}

/// The solution path at several times, sharing one eigendecomposition.
pub fn gradient_flow_path(
    p: &AffinityP,
    alpha: f64,
    y0: &[Vec<f64>; 2],
    ts: &[f64],
) -> Result<Vec<[Vec<f64>; 2]>> {
    if ts.iter().any(|&t| t < 0.0) {
        return Err(Error::InvalidParameter("negative time".into()));
    }
    let basis = FlowBasis::build(p, alpha)?;
    Ok(ts
        .iter()
        .map(|&t| [basis.evaluate(&y0[0], t), basis.evaluate(&y0[1], t)])
        .collect())
}

/// Per-eigenmode coefficient traces of the gradient flow over a time grid.
#[derive(Debug, Clone)]
pub struct RegularizationProfile {
    /// Eigenvalues of `L(P)`, ascending, mode 0 aligned to the constant.
    pub eigenvalues: Vec<f64>,
    /// `traces[mode][j]` = coefficient of eigenvector `mode` at `t_grid[j]`.
    pub traces: Vec<Vec<f64>>,
    pub t_grid: Vec<f64>,
}

/// Implicit-regularization profile: the coefficient of each eigenmode of
/// `L(P)` in `Y(t)` across `t_grid`. Modes with `alpha lambda_i > 1/(n-1)`
/// decay monotonically; modes below the threshold grow.
pub fn regularization_profile(
    p: &AffinityP,
    alpha: f64,
    y0: &[f64],
    t_grid: &[f64],
) -> Result<RegularizationProfile> {
    if t_grid.windows(2).any(|w| w[1] < w[0]) || t_grid.first().map(|&t| t < 0.0).unwrap_or(false)
    {
        return Err(Error::InvalidParameter(
            "t_grid must be ascending and nonnegative".into(),
        ));
    }
    let basis = FlowBasis::build(p, alpha)?;
    let traces = basis
        .eigenvectors
        .iter()
        .enumerate()
        .map(|(mode, u)| {
            let c0: f64 = u.iter().zip(y0).map(|(a, b)| a * b).sum();
            t_grid
                .iter()
                .map(|&t| basis.coefficient(mode, c0, t))
                .collect()
        })
        .collect();
    Ok(RegularizationProfile {
        eigenvalues: basis.eigenvalues,
        traces,
        t_grid: t_grid.to_vec(),
    })
}

/// Limit cluster centers `z_r = (z_1r, z_2r)` of the early-exaggeration
/// stage: blockwise means of the initialization.
#[derive(Debug, Clone, PartialEq)]
pub struct LimitCenters {
    pub r: usize,
    pub centers: Vec<[f64; 2]>,
    pub sizes: Vec<usize>,
}

/// Project a vector onto the indicator span of the components: blockwise
/// means, `z_r = theta_r^T y / sqrt(n_r)` replicated over block `r`.
pub fn project_onto_indicators(labels: &ComponentLabels, y: &[f64]) -> (Vec<f64>, Vec<f64>) {
    let mut sums = vec![0.0; labels.r];
    for (i, &l) in labels.labels.iter().enumerate() {
        sums[l] += y[i];
    }
    let means: Vec<f64> = sums
        .iter()
        .zip(&labels.sizes)
        .map(|(&s, &n)| s / n as f64)
        .collect();
    let projected = labels.labels.iter().map(|&l| means[l]).collect();
    (projected, means)
}

/// Null-space limit of the power iterations for a well-conditioned `P*`:
/// the projection of the initialization onto the indicator span, together
/// with the limit centers. `pstar` is only used to check that `labels`
/// really are its components.
pub fn null_space_limit(
    pstar: &SquareSym,
    labels: &ComponentLabels,
    y0: &[Vec<f64>; 2],
) -> Result<([Vec<f64>; 2], LimitCenters)> {
    let found = connected_components(pstar, COMPONENT_THRESHOLD);
    if found.labels != labels.labels {
        return Err(Error::InvalidParameter(
            "labels are not the components of pstar".into(),
        ));
    }
    let (p0, m0) = project_onto_indicators(labels, &y0[0]);
    let (p1, m1) = project_onto_indicators(labels, &y0[1]);
    let centers = m0.iter().zip(&m1).map(|(&a, &b)| [a, b]).collect();
    Ok((
        [p0, p1],
        LimitCenters {
            r: labels.r,
            centers,
            sizes: labels.sizes.clone(),
        },
    ))
}

/// Deviation of the surrogate power iterates from the null-space projection:
/// `||B^k y - U U^T y|| / ||y||` for `k = 0 ..= kmax`, with
/// `B = I - h L(alpha P* - H_n)` and `U` the indicator basis of `labels`.
pub fn power_convergence_series(
    pstar: &SquareSym,
    labels: &ComponentLabels,
    alpha: f64,
    h: f64,
    y: &[f64],
    kmax: usize,
) -> Vec<f64> {
    let op = ee_operator(pstar, alpha, h);
    let (projected, _) = project_onto_indicators(labels, y);
    let norm_y = y.iter().map(|x| x * x).sum::<f64>().sqrt();
    let mut current = y.to_vec();
    let mut out = Vec::with_capacity(kmax + 1);
    for _ in 0..=kmax {
        let dev: f64 = current
            .iter()
            .zip(&projected)
            .map(|(a, b)| (a - b) * (a - b))
            .sum::<f64>()
            .sqrt();
        out.push(dev / norm_y);
        current = op.matvec(&current);
    }
    out
}

/// Intercluster force decomposition of one embedding-stage step:
/// `y_i^(k+1) = y_i^(k) + sum_r f_ir + eps_i`.
#[derive(Debug, Clone)]
pub struct ForceDecomposition {
    /// `forces[i][r]`: repulsive force on point `i` from cluster `r`;
    /// zero for the point's own cluster.
    pub forces: Vec<Vec<[f64; 2]>>,
    /// `eps_i`, the exact remainder of the decomposition.
    pub residual: Vec<[f64; 2]>,
    /// The actual step displacement `y_i^(k+1) - y_i^(k)`.
    pub displacement: Vec<[f64; 2]>,
}

impl ForceDecomposition {
    /// Smallest foreign-force norm for point `i`.
    pub fn min_force_norm(&self, i: usize, own: usize) -> f64 {
        self.forces[i]
            .iter()
            .enumerate()
            .filter(|(r, _)| *r != own)
            .map(|(_, f)| (f[0] * f[0] + f[1] * f[1]).sqrt())
            .fold(f64::INFINITY, f64::min)
    }
}

/// Forces from the limit formula,
/// `f_ir = h' |H_r| / (n(n-1)) * (y_i - mean_{j in H_r} y_j)`,
/// with the residual defined against a caller-supplied displacement.
pub fn repulsion_forces_from_displacement(
    coords: &[[f64; 2]],
    labels: &ComponentLabels,
    h_prime: f64,
    displacement: &[[f64; 2]],
) -> ForceDecomposition {
    let n = coords.len();
    let nf = n as f64;
    let mut mean = vec![[0.0f64; 2]; labels.r];
    for (i, &l) in labels.labels.iter().enumerate() {
        mean[l][0] += coords[i][0];
        mean[l][1] += coords[i][1];
    }
    for (m, &s) in mean.iter_mut().zip(&labels.sizes) {
        m[0] /= s as f64;
        m[1] /= s as f64;
    }

    let mut forces = vec![vec![[0.0f64; 2]; labels.r]; n];
    let mut residual = vec![[0.0f64; 2]; n];
    for i in 0..n {
        let own = labels.labels[i];
        let mut total = [0.0, 0.0];
        for r in 0..labels.r {
            if r == own {
                continue;
            }
            let scale = h_prime * labels.sizes[r] as f64 / (nf * (nf - 1.0));
            let f = [
                scale * (coords[i][0] - mean[r][0]),
                scale * (coords[i][1] - mean[r][1]),
            ];
            forces[i][r] = f;
            total[0] += f[0];
            total[1] += f[1];
        }
        residual[i] = [
            displacement[i][0] - total[0],
            displacement[i][1] - total[1],
        ];
    }
    ForceDecomposition {
        forces,
        residual,
        displacement: displacement.to_vec(),
    }
}

/// Force decomposition against the actual embedding step computed from `P`.
pub fn repulsion_forces(
    coords: &[[f64; 2]],
    p: &AffinityP,
    labels: &ComponentLabels,
    h_prime: f64,
) -> ForceDecomposition {
    // Displacement via the same matrix form the engine uses.
    let s = crate::affinity::s_matrix(p, coords, 1.0);
    let l = laplacian(&s);
    let n = coords.len();
    let mut displacement = vec![[0.0f64; 2]; n];
    for d in 0..2 {
        let col: Vec<f64> = coords.iter().map(|y| y[d]).collect();
        let lcol = l.matvec(&col);
        for i in 0..n {
            displacement[i][d] = -h_prime * lcol[i];
        }
    }
    repulsion_forces_from_displacement(coords, labels, h_prime, &displacement)
}
