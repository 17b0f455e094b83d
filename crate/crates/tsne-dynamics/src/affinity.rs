//! Similarity matrices: the high-dimensional P (perplexity-calibrated
//! Gaussian kernel), the low-dimensional Q (t kernel), and the exaggerated
//! gradient kernel S used by every optimizer step.
//!
//! Conventions: perplexity is `2^H` with `H` the Shannon entropy of a
//! conditional row in bits, matching standard t-SNE practice. Kernel rows
//! are evaluated with per-row max-subtraction in the exponent so they never
//! overflow; that rescaling cancels in the normalization.

use crate::spectral::SquareSym;
use crate::{Error, Result};

/// `n` data points in `R^p`, row-major, all entries finite. The affinity
/// constructions additionally require `n >= 3`; loaders may hold smaller
/// matrices.
#[derive(Debug, Clone, PartialEq)]
pub struct DataMatrix {
    n: usize,
    p: usize,
    rows: Vec<f64>,
}

impl DataMatrix {
    pub fn new(n: usize, p: usize, rows: Vec<f64>) -> Result<Self> {
        if n < 1 {
            return Err(Error::TooSmall(n, 1));
        }
        if p < 1 {
            return Err(Error::InvalidParameter("p must be >= 1".into()));
        }
        if rows.len() != n * p {
            return Err(Error::DimensionMismatch(format!(
                "expected {} entries, got {}",
                n * p,
                rows.len()
            )));
        }
        if rows.iter().any(|x| !x.is_finite()) {
            return Err(Error::InvalidParameter("non-finite data entry".into()));
        }
        Ok(DataMatrix { n, p, rows })
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn p(&self) -> usize {
        self.p
    }

    #[inline]
    pub fn row(&self, i: usize) -> &[f64] {
        &self.rows[i * self.p..(i + 1) * self.p]
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.rows
    }

    /// Full matrix of pairwise squared Euclidean distances, computed once
    /// and reused by the affinity constructions.
    pub fn squared_distances(&self) -> Vec<f64> {
        let n = self.n;
        let mut d = vec![0.0; n * n];
        for i in 0..n {
            for j in (i + 1)..n {
                let dist = sq_dist(self.row(i), self.row(j));
                d[i * n + j] = dist;
                d[j * n + i] = dist;
            }
        }
        d
    }
}

fn sq_dist(a: &[f64], b: &[f64]) -> f64 {
    a.iter()
        .zip(b)
        .map(|(x, y)| (x - y) * (x - y))
        .sum::<f64>()
}

/// Per-point squared bandwidths `tau_i^2` with the perplexity they target.
#[derive(Debug, Clone)]
pub struct Bandwidths {
    /// `tau_i^2`, all positive and finite.
    pub tau2: Vec<f64>,
    /// The perplexity the calibration aimed for.
    pub target_perplexity: f64,
    /// Rows whose perplexity does not depend on the bandwidth (all
    /// off-diagonal distances equal); these received the bracket midpoint.
    pub degenerate_rows: Vec<usize>,
}

impl Bandwidths {
    /// Fixed bandwidths, bypassing the perplexity search. Used for
    /// experiments that pin `tau` analytically.
    pub fn fixed(n: usize, tau2: f64) -> Result<Self> {
        if !(tau2 > 0.0 && tau2.is_finite()) {
            return Err(Error::InvalidParameter(format!("tau2 = {tau2}")));
        }
        Ok(Bandwidths {
            tau2: vec![tau2; n],
            target_perplexity: f64::NAN,
            degenerate_rows: Vec::new(),
        })
    }
}

/// Conditional affinities `p_{j|i}` as a dense row-stochastic matrix.
#[derive(Debug, Clone)]
pub struct Conditional {
    n: usize,
    data: Vec<f64>,
}

impl Conditional {
    pub fn n(&self) -> usize {
        self.n
    }

    #[inline]
    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.data[i * self.n + j]
    }

    pub fn row(&self, i: usize) -> &[f64] {
        &self.data[i * self.n..(i + 1) * self.n]
    }
}

/// Symmetric joint affinities `p_ij = (p_{i|j} + p_{j|i}) / 2n`: zero
/// diagonal, nonnegative, entries summing to one.
#[derive(Debug, Clone, PartialEq)]
pub struct AffinityP {
    mat: SquareSym,
}

impl AffinityP {
    /// Validate the invariants on an existing symmetric matrix.
    pub fn from_matrix(mat: SquareSym) -> Result<Self> {
        let n = mat.n();
        let mut total = 0.0;
        for i in 0..n {
            if mat.get(i, i) != 0.0 {
                return Err(Error::InvalidParameter(format!(
                    "P diagonal entry {i} is not zero"
                )));
            }
            for j in 0..n {
                let v = mat.get(i, j);
                if v < 0.0 || !v.is_finite() {
                    return Err(Error::InvalidParameter(format!("P[{i}][{j}] = {v}")));
                }
                total += v;
            }
        }
        if (total - 1.0).abs() > 1e-10 {
            return Err(Error::InvalidParameter(format!(
                "P entries sum to {total}, expected 1"
            )));
        }
        Ok(AffinityP { mat })
    }

    pub fn n(&self) -> usize {
        self.mat.n()
    }

    #[inline]
    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.mat.get(i, j)
    }

    pub fn matrix(&self) -> &SquareSym {
        &self.mat
    }
}

/// Low-dimensional affinities `q_ij` with their normalizer `Z`.
#[derive(Debug, Clone)]
pub struct AffinityQ {
    mat: SquareSym,
    /// `sum_{l != s} (1 + ||y_l - y_s||^2)^{-1}`.
    pub z: f64,
}

impl AffinityQ {
    pub fn n(&self) -> usize {
        self.mat.n()
    }

    #[inline]
    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.mat.get(i, j)
    }

    pub fn matrix(&self) -> &SquareSym {
        &self.mat
    }
}

/// Gaussian conditional rows `p_{j|i}` for the given bandwidths. Each row
/// has a zero diagonal and sums to one.
pub fn conditional_affinities(x: &DataMatrix, tau: &Bandwidths) -> Result<Conditional> {
    let n = x.n();
    if n < 3 {
        return Err(Error::TooSmall(n, 3));
    }
    if tau.tau2.len() != n {
        return Err(Error::DimensionMismatch(format!(
            "bandwidths sized {} for {} points",
            tau.tau2.len(),
            n
        )));
    }
    let d = x.squared_distances();
    let mut data = vec![0.0; n * n];
    for i in 0..n {
        let row = conditional_row(&d[i * n..(i + 1) * n], i, tau.tau2[i])
            .ok_or(Error::DegenerateKernelRow(i))?;
        data[i * n..(i + 1) * n].copy_from_slice(&row);
    }
    Ok(Conditional { n, data })
}

/// One conditional row from squared distances. `None` when the off-diagonal
/// kernel mass is zero or non-finite.
fn conditional_row(dists: &[f64], i: usize, tau2: f64) -> Option<Vec<f64>> {
    let n = dists.len();
    // Max-subtraction: the largest off-diagonal exponent becomes 0.
    let mut max_expo = f64::NEG_INFINITY;
    for (j, &dij) in dists.iter().enumerate() {
        if j != i {
            max_expo = max_expo.max(-dij / (2.0 * tau2));
        }
    }
    if !max_expo.is_finite() {
        return None;
    }
    let mut row = vec![0.0; n];
    let mut sum = 0.0;
    for (j, &dij) in dists.iter().enumerate() {
        if j != i {
            let k = (-dij / (2.0 * tau2) - max_expo).exp();
            row[j] = k;
            sum += k;
        }
    }
    if !(sum > 0.0 && sum.is_finite()) {
        return None;
    }
    for v in row.iter_mut() {
        *v /= sum;
    }
    Some(row)
}

/// Shannon perplexity `2^H` (bits) of a probability row.
pub fn row_perplexity(row: &[f64]) -> f64 {
    let h: f64 = row
        .iter()
        .filter(|&&p| p > 0.0)
        .map(|&p| -p * p.log2())
        .sum();
    h.exp2()
}

const BISECT_MAX_ITERS: usize = 100;
const BRACKET_LIMIT: f64 = 700.0;

/// Calibrate per-point bandwidths so every conditional row hits the target
/// perplexity (relative tolerance `1e-4`), by bisection on `ln tau^2`.
///
/// Rows whose perplexity is independent of the bandwidth (all off-diagonal
/// distances equal) get the bracket midpoint and are flagged rather than
/// treated as errors.
pub fn calibrate_bandwidths(x: &DataMatrix, perplexity: f64) -> Result<Bandwidths> {
    let n = x.n();
    if n < 3 {
        return Err(Error::TooSmall(n, 3));
    }
    if !(perplexity > 1.0 && perplexity <= (n - 1) as f64) {
        return Err(Error::InvalidParameter(format!(
            "perplexity {perplexity} outside (1, {}]",
            n - 1
        )));
    }
    let d = x.squared_distances();
    let mut tau2 = vec![0.0; n];
    let mut degenerate = Vec::new();

    for i in 0..n {
        let dists = &d[i * n..(i + 1) * n];
        let perp_at = |log_tau2: f64| -> Result<f64> {
            let row =
                conditional_row(dists, i, log_tau2.exp()).ok_or(Error::DegenerateKernelRow(i))?;
            Ok(row_perplexity(&row))
        };

        let mut lo = -40.0f64;
        let mut hi = 40.0f64;
        // Expand the bracket geometrically until it straddles the target.
        for _ in 0..8 {
            if perp_at(lo)? > perplexity && lo > -BRACKET_LIMIT {
                lo = (lo * 2.0).max(-BRACKET_LIMIT);
            } else {
                break;
            }
        }
        for _ in 0..8 {
            if perp_at(hi)? < perplexity && hi < BRACKET_LIMIT {
                hi = (hi * 2.0).min(BRACKET_LIMIT);
            } else {
                break;
            }
        }

        let f_lo = perp_at(lo)?;
        let f_hi = perp_at(hi)?;
        if (f_hi - f_lo).abs() <= 1e-9 * perplexity {
            // Flat objective: perplexity does not depend on tau.
            tau2[i] = (0.5 * (lo + hi)).exp();
            degenerate.push(i);
            continue;
        }

        let mut a = lo;
        let mut b = hi;
        let mut done = false;
        for _ in 0..BISECT_MAX_ITERS {
            let mid = 0.5 * (a + b);
            let p = perp_at(mid)?;
            if ((p - perplexity) / perplexity).abs() <= 1e-4 {
                tau2[i] = mid.exp();
                done = true;
                break;
            }
            if p < perplexity {
                a = mid;
            } else {
                b = mid;
            }
        }
        if !done {
            return Err(Error::CalibrationNonConvergence {
                row: i,
                target: perplexity,
            });
        }
    }

    Ok(Bandwidths {
        tau2,
        target_perplexity: perplexity,
        degenerate_rows: degenerate,
    })
}

/// Symmetrize conditional rows into the joint matrix
/// `p_ij = (cond[i][j] + cond[j][i]) / 2n`.
pub fn symmetrize(cond: &Conditional) -> AffinityP {
    let n = cond.n();
    let scale = 1.0 / (2.0 * n as f64);
    let mat = SquareSym::from_fn(n, |i, j| {
        if i == j {
            0.0
        } else {
            (cond.get(i, j) + cond.get(j, i)) * scale
        }
    })
    .expect("conditional matrices have n >= 3");
    AffinityP::from_matrix(mat).expect("symmetrization forces the P invariants")
}

/// Build P from data in one call: calibrate, condition, symmetrize.
pub fn affinity_from_data(x: &DataMatrix, perplexity: f64) -> Result<AffinityP> {
    let tau = calibrate_bandwidths(x, perplexity)?;
    Ok(symmetrize(&conditional_affinities(x, &tau)?))
}

/// Pairwise squared distances of a 2-D map.
pub fn map_squared_distances(coords: &[[f64; 2]]) -> Vec<f64> {
    let n = coords.len();
    let mut d = vec![0.0; n * n];
    for i in 0..n {
        for j in (i + 1)..n {
            let dx = coords[i][0] - coords[j][0];
            let dy = coords[i][1] - coords[j][1];
            let dist = dx * dx + dy * dy;
            d[i * n + j] = dist;
            d[j * n + i] = dist;
        }
    }
    d
}

/// The t-kernel affinities `q_ij` of a 2-D map.
pub fn q_matrix(coords: &[[f64; 2]]) -> Result<AffinityQ> {
    let n = coords.len();
    if n < 3 {
        return Err(Error::TooSmall(n, 3));
    }
    let d = map_squared_distances(coords);
    let mut z = 0.0;
    for i in 0..n {
        for j in 0..n {
            if i != j {
                z += 1.0 / (1.0 + d[i * n + j]);
            }
        }
    }
    let mat = SquareSym::from_fn(n, |i, j| {
        if i == j {
            0.0
        } else {
            1.0 / ((1.0 + d[i * n + j]) * z)
        }
    })?;
    Ok(AffinityQ { mat, z })
}

/// The exaggerated gradient kernel
/// `S_ij(alpha) = (alpha p_ij - q_ij) / (1 + ||y_i - y_j||^2)`.
///
/// `alpha = 1` gives the embedding-stage kernel. Squared distances are
/// computed once and shared between the Q normalizer and the S entries.
pub fn s_matrix(p: &AffinityP, coords: &[[f64; 2]], alpha: f64) -> SquareSym {
    let n = p.n();
    assert_eq!(coords.len(), n, "P and the map must share n");
    debug_assert!(alpha >= 1.0, "exaggeration alpha must be >= 1");
    let d = map_squared_distances(coords);
    let mut z = 0.0;
    for i in 0..n {
        for j in 0..n {
            if i != j {
                z += 1.0 / (1.0 + d[i * n + j]);
            }
        }
    }
    SquareSym::from_fn_full(n, |i, j| {
        if i == j {
            0.0
        } else {
            let w = 1.0 + d[i * n + j];
            (alpha * p.get(i, j) - 1.0 / (w * z)) / w
        }
    })
    .expect("P has n >= 3")
}

/// KL divergence `sum_{i != j} p_ij ln(p_ij / q_ij)`, the t-SNE objective.
pub fn kl_divergence(p: &AffinityP, q: &AffinityQ) -> f64 {
    let n = p.n();
    let mut acc = 0.0;
    for i in 0..n {
        for j in 0..n {
            if i != j {
                let pij = p.get(i, j);
                if pij > 0.0 {
                    acc += pij * (pij / q.get(i, j)).ln();
                }
            }
        }
    }
    acc
}
