//! Dense symmetric linear algebra and graph operators.
//!
//! Everything downstream consumes the types here: [`SquareSym`] holds
//! adjacency-like matrices (P, S, αP − H_n), [`laplacian`] and
//! [`degree_operator`] implement the graph operators, [`eig_sym`] is a cyclic
//! Jacobi eigensolver (deterministic, dependency-free, fine for the dense
//! desk-scale matrices this crate works with), and [`connected_components`]
//! labels the weighted graph above a threshold.
//!
//! Matrices are dense and row-major. There is no sparse path: the Gaussian
//! kernel makes P dense by construction.

use crate::{Error, Result};

/// Dense symmetric `n x n` matrix, `n >= 2`. Symmetry is exact and enforced
/// on construction; mutation goes through [`SquareSym::set`] which writes
/// both triangles.
#[derive(Debug, Clone, PartialEq)]
pub struct SquareSym {
    n: usize,
    data: Vec<f64>,
}

impl SquareSym {
    /// Build from row-major data, checking exact symmetry.
    pub fn new(n: usize, data: Vec<f64>) -> Result<Self> {
        if n < 2 {
            return Err(Error::TooSmall(n, 2));
        }
        if data.len() != n * n {
            return Err(Error::DimensionMismatch(format!(
                "expected {} entries, got {}",
                n * n,
                data.len()
            )));
        }
        for i in 0..n {
            for j in (i + 1)..n {
                if data[i * n + j] != data[j * n + i] {
                    return Err(Error::NotSymmetric(i, j));
                }
            }
        }
        Ok(SquareSym { n, data })
    }

    /// Build from `f(i, j)` evaluated on `i <= j` and mirrored, so the result
    /// is symmetric by construction.
    pub fn from_fn<F: FnMut(usize, usize) -> f64>(n: usize, mut f: F) -> Result<Self> {
        if n < 2 {
            return Err(Error::TooSmall(n, 2));
        }
        let mut data = vec![0.0; n * n];
        for i in 0..n {
            for j in i..n {
                let v = f(i, j);
                data[i * n + j] = v;
                data[j * n + i] = v;
            }
        }
        Ok(SquareSym { n, data })
    }

    /// Build from `f(i, j)` evaluated at every entry in row-major order,
    /// for formulas that are symmetric by structure (`f(i, j)` and
    /// `f(j, i)` must be bit-identical). Twice the evaluations of
    /// [`SquareSym::from_fn`] but no strided writes, which matters for the
    /// per-iteration operator builds on large maps.
    pub(crate) fn from_fn_full<F: FnMut(usize, usize) -> f64>(n: usize, mut f: F) -> Result<Self> {
        if n < 2 {
            return Err(Error::TooSmall(n, 2));
        }
        let mut data = Vec::with_capacity(n * n);
        for i in 0..n {
            for j in 0..n {
                data.push(f(i, j));
            }
        }
        Ok(SquareSym { n, data })
    }

    pub fn zeros(n: usize) -> Result<Self> {
        Self::from_fn(n, |_, _| 0.0)
    }

    pub fn n(&self) -> usize {
        self.n
    }

    #[inline]
    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.data[i * self.n + j]
    }

    /// Write both `(i, j)` and `(j, i)`.
    #[inline]
    pub fn set(&mut self, i: usize, j: usize, v: f64) {
        self.data[i * self.n + j] = v;
        self.data[j * self.n + i] = v;
    }

    #[inline]
    pub fn row(&self, i: usize) -> &[f64] {
        &self.data[i * self.n..(i + 1) * self.n]
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.data
    }

    /// `a * self + b * other`, entrywise.
    pub fn linear_comb(a: f64, x: &SquareSym, b: f64, y: &SquareSym) -> Result<SquareSym> {
        if x.n != y.n {
            return Err(Error::DimensionMismatch(format!(
                "linear_comb: {} vs {}",
                x.n, y.n
            )));
        }
        let data = x
            .data
            .iter()
            .zip(&y.data)
            .map(|(&xi, &yi)| a * xi + b * yi)
            .collect();
        Ok(SquareSym { n: x.n, data })
    }

    /// Matrix-vector product.
    pub fn matvec(&self, v: &[f64]) -> Vec<f64> {
        assert_eq!(v.len(), self.n);
        let mut out = vec![0.0; self.n];
        for i in 0..self.n {
            let row = self.row(i);
            let mut acc = 0.0;
            for j in 0..self.n {
                acc += row[j] * v[j];
            }
            out[i] = acc;
        }
        out
    }

    /// Largest absolute entry.
    pub fn max_abs(&self) -> f64 {
        self.data.iter().fold(0.0f64, |m, &x| m.max(x.abs()))
    }

    /// Spectral norm via the eigensolver (exact for symmetric matrices).
    pub fn spectral_norm(&self) -> Result<f64> {
        let decomp = eig_sym(self)?;
        Ok(decomp
            .eigenvalues
            .iter()
            .fold(0.0f64, |m, &l| m.max(l.abs())))
    }
}

/// Diagonal of the degree operator: `result[j] = sum_i A[i][j]`. Computed
/// as row sums, which are entrywise identical for a symmetric matrix and
/// walk memory contiguously.
pub fn degree_operator(a: &SquareSym) -> Vec<f64> {
    (0..a.n()).map(|j| a.row(j).iter().sum()).collect()
}

/// Graph Laplacian `L(A) = D(A) - A`. Rows sum to zero.
pub fn laplacian(a: &SquareSym) -> SquareSym {
    let deg = degree_operator(a);
    let n = a.n();
    SquareSym::from_fn_full(n, |i, j| {
        if i == j {
            deg[i] - a.get(i, i)
        } else {
            -a.get(i, j)
        }
    })
    .expect("laplacian preserves dimensions")
}

/// The constant off-diagonal matrix `H_n = (11^T - I) / (n(n-1))`, the
/// limiting repulsive kernel of a map collapsed at the origin.
pub fn h_matrix(n: usize) -> Result<SquareSym> {
    if n < 2 {
        return Err(Error::TooSmall(n, 2));
    }
    let off = 1.0 / (n as f64 * (n as f64 - 1.0));
    SquareSym::from_fn(n, |i, j| if i == j { 0.0 } else { off })
}

/// Eigendecomposition of a symmetric matrix: ascending eigenvalues with an
/// orthonormal eigenvector basis (column `i` pairs with eigenvalue `i`).
#[derive(Debug, Clone)]
pub struct SpectralDecomp {
    /// Eigenvalues, sorted ascending.
    pub eigenvalues: Vec<f64>,
    /// Orthonormal eigenvectors, column-major: `eigenvectors[i]` is the
    /// eigenvector for `eigenvalues[i]`.
    pub eigenvectors: Vec<Vec<f64>>,
}

impl SpectralDecomp {
    pub fn n(&self) -> usize {
        self.eigenvalues.len()
    }

    /// Rotate the near-zero eigenvalue block of a Laplacian decomposition so
    /// that its first column is exactly the constant vector `1/sqrt(n)`. The
    /// remaining block columns are re-orthonormalized against it. Columns
    /// outside the block are untouched.
    ///
    /// Only meaningful when the constant vector lies in the block span,
    /// which holds for any Laplacian.
    pub fn align_null_block_to_constant(&self, tol: f64) -> SpectralDecomp {
        let n = self.n();
        let block: Vec<usize> = (0..n).filter(|&i| self.eigenvalues[i].abs() < tol).collect();
        if block.is_empty() {
            return self.clone();
        }
        let constant = vec![1.0 / (n as f64).sqrt(); n];
        let mut basis: Vec<Vec<f64>> = vec![constant];
        for &i in &block {
            if basis.len() == block.len() {
                break;
            }
            let mut v = self.eigenvectors[i].clone();
            for b in &basis {
                let dot: f64 = v.iter().zip(b).map(|(x, y)| x * y).sum();
                for (vk, bk) in v.iter_mut().zip(b) {
                    *vk -= dot * bk;
                }
            }
            let norm = v.iter().map(|x| x * x).sum::<f64>().sqrt();
            if norm > 1e-8 {
                for vk in v.iter_mut() {
                    *vk /= norm;
                }
                fix_sign(&mut v);
                basis.push(v);
            }
        }
        let mut out = self.clone();
        for (slot, vec) in block.iter().zip(basis) {
            out.eigenvectors[*slot] = vec;
        }
        out
    }
}

/// Fix the sign of an eigenvector so its first coordinate of non-negligible
/// magnitude is positive. Makes outputs byte-stable across runs.
fn fix_sign(v: &mut [f64]) {
    let max = v.iter().fold(0.0f64, |m, &x| m.max(x.abs()));
    if max == 0.0 {
        return;
    }
    for &x in v.iter() {
        if x.abs() > 1e-12 * max {
            if x < 0.0 {
                for y in v.iter_mut() {
                    *y = -*y;
                }
            }
            return;
        }
    }
}

const JACOBI_MAX_SWEEPS: usize = 64;

/// Cyclic Jacobi eigendecomposition.
///
/// Deterministic for identical input: fixed sweep order, eigenvalues sorted
/// ascending (stable sort), eigenvector signs fixed by [`fix_sign`]. Errors
/// if the off-diagonal mass has not vanished after a bounded number of
/// sweeps, which signals a numeric failure rather than a user mistake.
pub fn eig_sym(a: &SquareSym) -> Result<SpectralDecomp> {
    let n = a.n();
    let mut m = a.data.clone();
    let mut v = vec![0.0; n * n];
    for i in 0..n {
        v[i * n + i] = 1.0;
    }

    let scale = a.max_abs().max(1e-300);
    let tol = f64::EPSILON * scale;

    let mut converged = false;
    for _sweep in 0..JACOBI_MAX_SWEEPS {
        let mut off_max = 0.0f64;
        for p in 0..n {
            for q in (p + 1)..n {
                off_max = off_max.max(m[p * n + q].abs());
            }
        }
        if off_max <= tol {
            converged = true;
            break;
        }
        for p in 0..n {
            for q in (p + 1)..n {
                let apq = m[p * n + q];
                if apq.abs() <= tol * 1e-2 {
                    continue;
                }
                let app = m[p * n + p];
                let aqq = m[q * n + q];
                let theta = (aqq - app) / (2.0 * apq);
                let t = if theta.abs() > 1e10 {
                    1.0 / (2.0 * theta)
                } else {
                    theta.signum() / (theta.abs() + (theta * theta + 1.0).sqrt())
                };
                let c = 1.0 / (t * t + 1.0).sqrt();
                let s = t * c;

                // Similarity rotation in the (p, q) plane: rows then columns.
                for k in 0..n {
                    let mkp = m[k * n + p];
                    let mkq = m[k * n + q];
                    m[k * n + p] = c * mkp - s * mkq;
                    m[k * n + q] = s * mkp + c * mkq;
                }
                for k in 0..n {
                    let mpk = m[p * n + k];
                    let mqk = m[q * n + k];
                    m[p * n + k] = c * mpk - s * mqk;
                    m[q * n + k] = s * mpk + c * mqk;
                }
                for k in 0..n {
                    let vkp = v[k * n + p];
                    let vkq = v[k * n + q];
                    v[k * n + p] = c * vkp - s * vkq;
                    v[k * n + q] = s * vkp + c * vkq;
                }
            }
        }
    }
    if !converged {
        return Err(Error::EigenNonConvergence(JACOBI_MAX_SWEEPS));
    }

    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&i, &j| {
        m[i * n + i]
            .partial_cmp(&m[j * n + j])
            .expect("eigenvalues are finite")
    });

    let eigenvalues: Vec<f64> = order.iter().map(|&i| m[i * n + i]).collect();
    let eigenvectors: Vec<Vec<f64>> = order
        .iter()
        .map(|&col| {
            let mut vec: Vec<f64> = (0..n).map(|row| v[row * n + col]).collect();
            fix_sign(&mut vec);
            vec
        })
        .collect();

    Ok(SpectralDecomp {
        eigenvalues,
        eigenvectors,
    })
}

/// Connected-component labelling of the thresholded weighted graph.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ComponentLabels {
    /// Per-node component label in `[0, r)`, indexed by first occurrence.
    pub labels: Vec<usize>,
    /// Component count.
    pub r: usize,
    /// Nodes per component.
    pub sizes: Vec<usize>,
}

impl ComponentLabels {
    /// Build directly from a label vector (remapped to first-occurrence order).
    pub fn from_labels(raw: &[usize]) -> Self {
        let mut map: Vec<(usize, usize)> = Vec::new();
        let mut labels = Vec::with_capacity(raw.len());
        for &l in raw {
            let mapped = match map.iter().find(|(orig, _)| *orig == l) {
                Some(&(_, m)) => m,
                None => {
                    let m = map.len();
                    map.push((l, m));
                    m
                }
            };
            labels.push(mapped);
        }
        let r = map.len();
        let mut sizes = vec![0usize; r];
        for &l in &labels {
            sizes[l] += 1;
        }
        ComponentLabels { labels, r, sizes }
    }

    /// Indices of the nodes in component `r`.
    pub fn members(&self, r: usize) -> Vec<usize> {
        (0..self.labels.len())
            .filter(|&i| self.labels[i] == r)
            .collect()
    }
}

/// Default absolute threshold for treating an entry of a continuous-valued
/// similarity matrix as an edge. Surfaced as a parameter because the notion
/// of "connected component" on continuous weights needs a cutoff somewhere.
pub const COMPONENT_THRESHOLD: f64 = 1e-12;

/// Union-find components over edges with `A[i][j] > threshold`. Labels are
/// assigned in order of first occurrence, so the output is deterministic.
pub fn connected_components(a: &SquareSym, threshold: f64) -> ComponentLabels {
    let n = a.n();
    let mut parent: Vec<usize> = (0..n).collect();

    fn find(parent: &mut [usize], mut x: usize) -> usize {
        while parent[x] != x {
            parent[x] = parent[parent[x]];
            x = parent[x];
        }
        x
    }

    for i in 0..n {
        for j in (i + 1)..n {
            if a.get(i, j) > threshold {
                let ri = find(&mut parent, i);
                let rj = find(&mut parent, j);
                if ri != rj {
                    parent[ri.max(rj)] = ri.min(rj);
                }
            }
        }
    }

    let roots: Vec<usize> = (0..n).map(|i| find(&mut parent, i)).collect();
    ComponentLabels::from_labels(&roots)
}
