//! Synthetic data: the Gaussian mixture and noisy nested-sphere models,
//! plus IDX and CSV ingestion for external datasets.
//!
//! All generators are pure functions of `(params, seed)`: repeat calls are
//! bit-identical.

use crate::affinity::DataMatrix;
use crate::rng::SplitMix64;
use crate::spectral::{eig_sym, SquareSym};
use crate::{Error, Result};
use std::io::Write as _;
use std::path::Path;

/// A data matrix with per-point cluster labels in `[0, r)`.
#[derive(Debug, Clone, PartialEq)]
pub struct LabeledData {
    pub data: DataMatrix,
    pub labels: Vec<usize>,
    pub r: usize,
    /// Mixing proportions when the data came from a generator.
    pub proportions: Option<Vec<f64>>,
}

impl LabeledData {
    pub fn new(
        data: DataMatrix,
        labels: Vec<usize>,
        r: usize,
        proportions: Option<Vec<f64>>,
    ) -> Result<Self> {
        if labels.len() != data.n() {
            return Err(Error::DimensionMismatch(format!(
                "{} labels for {} points",
                labels.len(),
                data.n()
            )));
        }
        if r < 1 || labels.iter().any(|&l| l >= r) {
            return Err(Error::InvalidParameter("label out of range".into()));
        }
        if let Some(pi) = &proportions {
            let total: f64 = pi.iter().sum();
            if (total - 1.0).abs() > 1e-12 {
                return Err(Error::InvalidParameter(format!(
                    "proportions sum to {total}"
                )));
            }
        }
        Ok(LabeledData {
            data,
            labels,
            r,
            proportions,
        })
    }

    pub fn n(&self) -> usize {
        self.data.n()
    }

    /// Component labels view for the diagnostics layer.
    pub fn component_labels(&self) -> crate::spectral::ComponentLabels {
        crate::spectral::ComponentLabels::from_labels(&self.labels)
    }

    /// Seeded random subsample: keep `per_label` points of each listed
    /// label value, relabelled contiguously. Returns the selected original
    /// row indices alongside, for reproducibility records.
    pub fn subsample_per_label(
        &self,
        keep: &[usize],
        per_label: usize,
        seed: u64,
    ) -> Result<(LabeledData, Vec<usize>)> {
        let mut rng = SplitMix64::split(seed, 0x5AB5);
        let mut chosen: Vec<usize> = Vec::new();
        for &label in keep {
            let mut pool: Vec<usize> = (0..self.n())
                .filter(|&i| self.labels[i] == label)
                .collect();
            if pool.len() < per_label {
                return Err(Error::InvalidParameter(format!(
                    "label {label} has only {} points, need {per_label}",
                    pool.len()
                )));
            }
            // Fisher-Yates, then take the prefix.
            for i in (1..pool.len()).rev() {
                let j = (rng.next_u64() % (i as u64 + 1)) as usize;
                pool.swap(i, j);
            }
            pool.truncate(per_label);
            pool.sort_unstable();
            chosen.extend(pool);
        }
        let p = self.data.p();
        let mut rows = Vec::with_capacity(chosen.len() * p);
        let mut labels = Vec::with_capacity(chosen.len());
        for &i in &chosen {
            rows.extend_from_slice(self.data.row(i));
            labels.push(keep.iter().position(|&k| k == self.labels[i]).unwrap());
        }
        let data = DataMatrix::new(chosen.len(), p, rows)?;
        Ok((LabeledData::new(data, labels, keep.len(), None)?, chosen))
    }
}

/// Covariance specification for the Gaussian mixture sampler.
#[derive(Debug, Clone, PartialEq)]
pub enum CovarianceSpec {
    /// `scale * I`.
    Identity(f64),
    Diagonal(Vec<f64>),
    Full(SquareSym),
}

/// Mixture means placed at the vertices of a regular simplex with minimum
/// pairwise distance exactly `rho`, embedded in the first `r - 1` simplex
/// coordinates and mapped into `R^p` through a seeded random orthonormal
/// frame. Errors when the simplex does not fit (`r - 1 > p`).
pub fn gmm_means(r: usize, p: usize, rho: f64, seed: u64) -> Result<Vec<Vec<f64>>> {
    if r < 1 {
        return Err(Error::InvalidParameter("r must be >= 1".into()));
    }
    if rho < 0.0 {
        return Err(Error::InvalidParameter(format!("rho = {rho}")));
    }
    if r == 1 {
        return Ok(vec![vec![0.0; p]]);
    }
    if r - 1 > p {
        return Err(Error::InvalidParameter(format!(
            "simplex with {r} vertices does not fit in {p} dimensions"
        )));
    }

    // Helmert coordinates: rows k = 1..r-1 are orthonormal and orthogonal
    // to the all-ones vector, so vertex i gets coordinates
    // c_i[k-1] = (rho / sqrt(2)) * helmert_k[i], giving pairwise distances
    // exactly rho.
    let scale = rho / 2.0f64.sqrt();
    let mut simplex = vec![vec![0.0; r - 1]; r];
    for k in 1..r {
        let denom = (k as f64 * (k as f64 + 1.0)).sqrt();
        for (i, vertex) in simplex.iter_mut().enumerate() {
            let h = if i < k {
                1.0 / denom
            } else if i == k {
                -(k as f64) / denom
            } else {
                0.0
            };
            vertex[k - 1] = scale * h;
        }
    }

    // Random orthonormal frame in R^p via Gram-Schmidt on Gaussian columns.
    let mut rng = SplitMix64::split(seed, 0xF3A);
    let mut frame: Vec<Vec<f64>> = Vec::with_capacity(r - 1);
    while frame.len() < r - 1 {
        let mut v = rng.normals(p);
        for b in &frame {
            let dot: f64 = v.iter().zip(b).map(|(a, c)| a * c).sum();
            for (vi, bi) in v.iter_mut().zip(b) {
                *vi -= dot * bi;
            }
        }
        let norm = v.iter().map(|x| x * x).sum::<f64>().sqrt();
        if norm > 1e-8 {
            for vi in v.iter_mut() {
                *vi /= norm;
            }
            frame.push(v);
        }
    }

    Ok(simplex
        .iter()
        .map(|c| {
            let mut mean = vec![0.0; p];
            for (coef, basis) in c.iter().zip(&frame) {
                for (m, b) in mean.iter_mut().zip(basis) {
                    *m += coef * b;
                }
            }
            mean
        })
        .collect())
}

/// Square root of a covariance spec. Rejects eigenvalues below `-1e-10`;
/// tiny negatives are clamped to zero.
fn covariance_sqrt(sigma: &CovarianceSpec, p: usize) -> Result<CovSqrt> {
    match sigma {
        CovarianceSpec::Identity(scale) => {
            if *scale < 0.0 {
                return Err(Error::NotPsd(*scale));
            }
            Ok(CovSqrt::Scalar(scale.sqrt()))
        }
        CovarianceSpec::Diagonal(d) => {
            if d.len() != p {
                return Err(Error::DimensionMismatch(format!(
                    "diagonal covariance sized {} for p = {p}",
                    d.len()
                )));
            }
            let mut out = Vec::with_capacity(p);
            for &v in d {
                if v < -1e-10 {
                    return Err(Error::NotPsd(v));
                }
                out.push(v.max(0.0).sqrt());
            }
            Ok(CovSqrt::Diagonal(out))
        }
        CovarianceSpec::Full(m) => {
            if m.n() != p {
                return Err(Error::DimensionMismatch(format!(
                    "covariance sized {} for p = {p}",
                    m.n()
                )));
            }
            let decomp = eig_sym(m)?;
            if decomp.eigenvalues[0] < -1e-10 {
                return Err(Error::NotPsd(decomp.eigenvalues[0]));
            }
            let root = SquareSym::from_fn(p, |i, j| {
                let mut acc = 0.0;
                for k in 0..p {
                    let l = decomp.eigenvalues[k].max(0.0).sqrt();
                    acc += l * decomp.eigenvectors[k][i] * decomp.eigenvectors[k][j];
                }
                acc
            })?;
            Ok(CovSqrt::Full(root))
        }
    }
}

enum CovSqrt {
    Scalar(f64),
    Diagonal(Vec<f64>),
    Full(SquareSym),
}

impl CovSqrt {
    fn apply(&self, w: &[f64]) -> Vec<f64> {
        match self {
            CovSqrt::Scalar(s) => w.iter().map(|x| s * x).collect(),
            CovSqrt::Diagonal(d) => w.iter().zip(d).map(|(x, s)| s * x).collect(),
            CovSqrt::Full(m) => m.matvec(w),
        }
    }
}

fn validate_proportions(pi: &[f64]) -> Result<()> {
    if pi.is_empty() || pi.iter().any(|&x| x < 0.0) {
        return Err(Error::InvalidParameter("bad proportion vector".into()));
    }
    let total: f64 = pi.iter().sum();
    if (total - 1.0).abs() > 1e-12 {
        return Err(Error::InvalidParameter(format!(
            "proportions sum to {total}"
        )));
    }
    Ok(())
}

/// Sample `X_i = mu_{z_i} + Sigma^{1/2} W_i` with `z_i ~ Multinomial(pi)`.
pub fn gmm_sample(
    n: usize,
    means: &[Vec<f64>],
    sigma: &CovarianceSpec,
    pi: &[f64],
    seed: u64,
) -> Result<LabeledData> {
    if means.is_empty() {
        return Err(Error::InvalidParameter("no means".into()));
    }
    if pi.len() != means.len() {
        return Err(Error::DimensionMismatch(format!(
            "{} proportions for {} means",
            pi.len(),
            means.len()
        )));
    }
    validate_proportions(pi)?;
    let p = means[0].len();
    if means.iter().any(|m| m.len() != p) {
        return Err(Error::DimensionMismatch("ragged means".into()));
    }
    let root = covariance_sqrt(sigma, p)?;

    let mut label_rng = SplitMix64::split(seed, 0);
    let mut noise_rng = SplitMix64::split(seed, 1);
    let mut rows = Vec::with_capacity(n * p);
    let mut labels = Vec::with_capacity(n);
    for _ in 0..n {
        let z = label_rng.next_category(pi);
        labels.push(z);
        let w = noise_rng.normals(p);
        let noise = root.apply(&w);
        rows.extend(means[z].iter().zip(&noise).map(|(m, e)| m + e));
    }
    LabeledData::new(
        DataMatrix::new(n, p, rows)?,
        labels,
        means.len(),
        Some(pi.to_vec()),
    )
}

/// Nested spheres with radial noise: `X_i = theta_i (rho_{z_i} + xi_i)`
/// with `theta_i` uniform on the sphere and `xi_i ~ N(0, sigma^2)`, so
/// `||X_i|| = |rho_{z_i} + xi_i|` exactly.
pub fn nested_spheres(
    n: usize,
    p: usize,
    radii: &[f64],
    sigma: f64,
    pi: &[f64],
    seed: u64,
) -> Result<LabeledData> {
    if radii.is_empty() || radii[0] <= 0.0 {
        return Err(Error::InvalidParameter("radii must be positive".into()));
    }
    if radii.windows(2).any(|w| w[1] <= w[0]) {
        return Err(Error::InvalidParameter(
            "radii must be strictly increasing".into(),
        ));
    }
    if sigma < 0.0 {
        return Err(Error::InvalidParameter(format!("sigma = {sigma}")));
    }
    if pi.len() != radii.len() {
        return Err(Error::DimensionMismatch(format!(
            "{} proportions for {} radii",
            pi.len(),
            radii.len()
        )));
    }
    validate_proportions(pi)?;

    let mut label_rng = SplitMix64::split(seed, 0);
    let mut dir_rng = SplitMix64::split(seed, 1);
    let mut radial_rng = SplitMix64::split(seed, 2);
    let mut rows = Vec::with_capacity(n * p);
    let mut labels = Vec::with_capacity(n);
    for _ in 0..n {
        let z = label_rng.next_category(pi);
        labels.push(z);
        // Uniform direction via normalized Gaussian.
        let mut theta = dir_rng.normals(p);
        let mut norm = theta.iter().map(|x| x * x).sum::<f64>().sqrt();
        while norm < 1e-12 {
            theta = dir_rng.normals(p);
            norm = theta.iter().map(|x| x * x).sum::<f64>().sqrt();
        }
        let radius = radii[z] + sigma * radial_rng.next_normal();
        rows.extend(theta.iter().map(|t| t / norm * radius));
    }
    LabeledData::new(
        DataMatrix::new(n, p, rows)?,
        labels,
        radii.len(),
        Some(pi.to_vec()),
    )
}

/// The reference Gaussian-mixture instance: `p = 100`, six clusters at
/// minimum separation `rho^2 = p`, identity covariance, proportions
/// `(.1, .1, .1, .15, .25, .3)`.
pub fn gmm_preset(n: usize, seed: u64) -> Result<LabeledData> {
    let p = 100;
    let means = gmm_means(6, p, (p as f64).sqrt(), seed)?;
    gmm_sample(
        n,
        &means,
        &CovarianceSpec::Identity(1.0),
        &[0.1, 0.1, 0.1, 0.15, 0.25, 0.3],
        seed,
    )
}

/// The reference nested-sphere instance: `p = 50`, radii `(10, 25, 50)`,
/// radial noise `sigma = 1`, proportions `(.17, .33, .5)`.
pub fn spheres_preset(n: usize, seed: u64) -> Result<LabeledData> {
    nested_spheres(n, 50, &[10.0, 25.0, 50.0], 1.0, &[0.17, 0.33, 0.5], seed)
}

// --- IDX ------------------------------------------------------------------

pub const IDX_MAGIC_IMAGES: u32 = 0x0000_0803;
pub const IDX_MAGIC_LABELS: u32 = 0x0000_0801;

/// Unsigned-byte image tensor from an IDX file, pixels scaled to `[0, 1]`.
#[derive(Debug, Clone, PartialEq)]
pub struct ImageSet {
    pub count: usize,
    pub rows: usize,
    pub cols: usize,
    /// `count * rows * cols` values in `[0, 1]`, row-major per image.
    pub pixels: Vec<f64>,
}

impl ImageSet {
    /// Flatten to an `n x (rows * cols)` data matrix.
    pub fn to_data_matrix(&self) -> Result<DataMatrix> {
        DataMatrix::new(self.count, self.rows * self.cols, self.pixels.clone())
    }
}

/// Parsed IDX content: a 3-D unsigned-byte image tensor or a 1-D label
/// vector.
#[derive(Debug, Clone, PartialEq)]
pub enum IdxContent {
    Images(ImageSet),
    Labels(Vec<u8>),
}

fn be_u32(bytes: &[u8], offset: usize) -> Result<u32> {
    if bytes.len() < offset + 4 {
        return Err(Error::IdxTruncated {
            expected: offset + 4,
            found: bytes.len(),
        });
    }
    Ok(u32::from_be_bytes([
        bytes[offset],
        bytes[offset + 1],
        bytes[offset + 2],
        bytes[offset + 3],
    ]))
}

/// Parse an IDX file (big-endian header, unsigned-byte payload).
pub fn load_idx(path: impl AsRef<Path>) -> Result<IdxContent> {
    let bytes = std::fs::read(path)?;
    parse_idx(&bytes)
}

/// Parse IDX bytes. Wrong magic, truncated payloads, and dimension
/// overflow each produce a distinct error.
pub fn parse_idx(bytes: &[u8]) -> Result<IdxContent> {
    let magic = be_u32(bytes, 0)?;
    match magic {
        IDX_MAGIC_IMAGES => {
            let count = be_u32(bytes, 4)? as usize;
            let rows = be_u32(bytes, 8)? as usize;
            let cols = be_u32(bytes, 12)? as usize;
            let len = count
                .checked_mul(rows)
                .and_then(|x| x.checked_mul(cols))
                .ok_or_else(|| {
                    Error::IdxOverflow(format!("{count} x {rows} x {cols}"))
                })?;
            let expected = 16usize
                .checked_add(len)
                .ok_or_else(|| Error::IdxOverflow(format!("payload of {len} bytes")))?;
            if bytes.len() < expected {
                return Err(Error::IdxTruncated {
                    expected,
                    found: bytes.len(),
                });
            }
            let pixels = bytes[16..expected]
                .iter()
                .map(|&b| b as f64 / 255.0)
                .collect();
            Ok(IdxContent::Images(ImageSet {
                count,
                rows,
                cols,
                pixels,
            }))
        }
        IDX_MAGIC_LABELS => {
            let count = be_u32(bytes, 4)? as usize;
            let expected = 8usize
                .checked_add(count)
                .ok_or_else(|| Error::IdxOverflow(format!("{count} labels")))?;
            if bytes.len() < expected {
                return Err(Error::IdxTruncated {
                    expected,
                    found: bytes.len(),
                });
            }
            Ok(IdxContent::Labels(bytes[8..expected].to_vec()))
        }
        other => Err(Error::IdxMagic(other)),
    }
}

/// Serialize IDX content back to bytes. Inverse of [`parse_idx`] on valid
/// files: pixel values `k/255` recover the original byte `k` exactly.
pub fn idx_bytes(content: &IdxContent) -> Vec<u8> {
    match content {
        IdxContent::Images(set) => {
            let mut out = Vec::with_capacity(16 + set.pixels.len());
            out.extend_from_slice(&IDX_MAGIC_IMAGES.to_be_bytes());
            out.extend_from_slice(&(set.count as u32).to_be_bytes());
            out.extend_from_slice(&(set.rows as u32).to_be_bytes());
            out.extend_from_slice(&(set.cols as u32).to_be_bytes());
            out.extend(set.pixels.iter().map(|&v| (v * 255.0).round() as u8));
            out
        }
        IdxContent::Labels(labels) => {
            let mut out = Vec::with_capacity(8 + labels.len());
            out.extend_from_slice(&IDX_MAGIC_LABELS.to_be_bytes());
            out.extend_from_slice(&(labels.len() as u32).to_be_bytes());
            out.extend_from_slice(labels);
            out
        }
    }
}

/// Write IDX content to a file.
pub fn write_idx(content: &IdxContent, path: impl AsRef<Path>) -> Result<()> {
    let mut f = std::fs::File::create(path)?;
    f.write_all(&idx_bytes(content))?;
    Ok(())
}

// --- CSV ------------------------------------------------------------------

/// Load a rectangular numeric CSV, optionally treating the final column as
/// integer labels (remapped to contiguous `[0, R)` by first occurrence).
pub fn load_csv(path: impl AsRef<Path>, has_labels: bool) -> Result<LabeledData> {
    let text = std::fs::read_to_string(path)?;
    parse_csv(&text, has_labels)
}

pub fn parse_csv(text: &str, has_labels: bool) -> Result<LabeledData> {
    let mut width = None;
    let mut values: Vec<Vec<f64>> = Vec::new();
    for (idx, line) in text.lines().enumerate() {
        let line = line.trim_end_matches('\r');
        if line.trim().is_empty() {
            continue;
        }
        let row: Vec<&str> = line.split(',').collect();
        match width {
            None => width = Some(row.len()),
            Some(w) if w != row.len() => {
                return Err(Error::Csv {
                    line: idx + 1,
                    reason: format!("expected {w} fields, found {}", row.len()),
                })
            }
            _ => {}
        }
        let parsed: Vec<f64> = row
            .iter()
            .enumerate()
            .map(|(col, cell)| {
                cell.trim().parse::<f64>().map_err(|_| Error::Csv {
                    line: idx + 1,
                    reason: format!("field {} is not numeric: {:?}", col + 1, cell.trim()),
                })
            })
            .collect::<Result<_>>()?;
        values.push(parsed);
    }
    let width = width.ok_or_else(|| Error::Csv {
        line: 0,
        reason: "empty file".into(),
    })?;
    if has_labels && width < 2 {
        return Err(Error::Csv {
            line: 1,
            reason: "label column requested but only one column present".into(),
        });
    }

    let n = values.len();
    let p = if has_labels { width - 1 } else { width };
    let mut rows = Vec::with_capacity(n * p);
    let mut raw_labels = Vec::with_capacity(n);
    for (idx, row) in values.iter().enumerate() {
        rows.extend_from_slice(&row[..p]);
        if has_labels {
            let raw = row[p];
            if raw.fract() != 0.0 || raw < 0.0 {
                return Err(Error::Csv {
                    line: idx + 1,
                    reason: format!("label {raw} is not a nonnegative integer"),
                });
            }
            raw_labels.push(raw as usize);
        }
    }
    let data = DataMatrix::new(n, p, rows)?;
    if has_labels {
        let comp = crate::spectral::ComponentLabels::from_labels(&raw_labels);
        LabeledData::new(data, comp.labels, comp.r, None)
    } else {
        LabeledData::new(data, vec![0; n], 1, None)
    }
}

/// Write data as CSV with 17-significant-digit floats (lossless round
/// trip) and an optional final label column.
pub fn write_csv(
    data: &DataMatrix,
    labels: Option<&[usize]>,
    path: impl AsRef<Path>,
) -> Result<()> {
    let mut f = std::io::BufWriter::new(std::fs::File::create(path)?);
    for i in 0..data.n() {
        let mut first = true;
        for v in data.row(i) {
            if !first {
                write!(f, ",")?;
            }
            write!(f, "{v:.16e}")?;
            first = false;
        }
        if let Some(ls) = labels {
            write!(f, ",{}", ls[i])?;
        }
        writeln!(f)?;
    }
    f.flush()?;
    Ok(())
}
