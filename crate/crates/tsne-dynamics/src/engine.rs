//! The two-stage t-SNE optimizer: plain gradient descent, no momentum and
//! no adaptive learning rate. The first `K0` iterations multiply `p_ij` by
//! the exaggeration `alpha` (early exaggeration stage); the remaining `K1`
//! iterations run with `alpha = 1` (embedding stage). The stage switch is
//! purely by iteration count.
//!
//! Each step applies the matrix form
//! `y_l <- [I - h L(S_alpha)] y_l` per coordinate column; the equivalent
//! per-point form `y_i += h sum_j S_ij (y_j - y_i)` serves as the test
//! oracle. Runs are sequential and deterministic: identical inputs, params,
//! and seed give bit-identical trajectories.

use crate::affinity::{s_matrix, AffinityP};
use crate::rng::SplitMix64;
use crate::spectral::laplacian;
use crate::{Error, Result};
use serde::{Deserialize, Serialize};

/// Which stage an embedding state belongs to.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Stage {
    #[serde(rename = "ee")]
    EarlyExaggeration,
    #[serde(rename = "embed")]
    Embedding,
}

/// The evolving 2-D map: `n` points, stage tag, global iteration index.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EmbeddingState {
    pub coords: Vec<[f64; 2]>,
    pub stage: Stage,
    pub k: usize,
}

impl EmbeddingState {
    pub fn n(&self) -> usize {
        self.coords.len()
    }

    /// Coordinate column `l` (0 or 1) as a vector in `R^n`.
    pub fn column(&self, l: usize) -> Vec<f64> {
        self.coords.iter().map(|y| y[l]).collect()
    }

    pub fn from_columns(c0: &[f64], c1: &[f64], stage: Stage, k: usize) -> Self {
        assert_eq!(c0.len(), c1.len());
        EmbeddingState {
            coords: c0.iter().zip(c1).map(|(&x, &y)| [x, y]).collect(),
            stage,
            k,
        }
    }
}

/// Tuning parameters for a full two-stage run.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TuningParams {
    /// Exaggeration for the first stage, `>= 1`.
    pub alpha: f64,
    /// Early-exaggeration step size.
    pub h: f64,
    /// Embedding-stage step size.
    pub h_prime: f64,
    /// Early-exaggeration iterations.
    pub k0: usize,
    /// Embedding iterations.
    pub k1: usize,
    /// Schedule exponent in `(0, 1)` that produced `alpha` and `h`.
    pub delta: f64,
    pub perplexity: f64,
    /// Initialization scale.
    pub sigma_n: f64,
    pub seed: u64,
}

impl TuningParams {
    pub fn validate(&self) -> Result<()> {
        if !(self.alpha >= 1.0 && self.alpha.is_finite()) {
            return Err(Error::InvalidParameter(format!("alpha = {}", self.alpha)));
        }
        if !(self.h >= 0.0 && self.h.is_finite()) {
            return Err(Error::InvalidParameter(format!("h = {}", self.h)));
        }
        if !(self.h_prime >= 0.0 && self.h_prime.is_finite()) {
            return Err(Error::InvalidParameter(format!(
                "h_prime = {}",
                self.h_prime
            )));
        }
        if !(self.delta > 0.0 && self.delta < 1.0) {
            return Err(Error::InvalidParameter(format!("delta = {}", self.delta)));
        }
        if !(self.sigma_n > 0.0 && self.sigma_n.is_finite()) {
            return Err(Error::InvalidParameter(format!(
                "sigma_n = {}",
                self.sigma_n
            )));
        }
        Ok(())
    }
}

/// How to produce the initial map.
#[derive(Debug, Clone)]
pub enum InitMode {
    Random,
    Spectral,
    Given(EmbeddingState),
}

impl InitMode {
    fn tag(&self) -> &'static str {
        match self {
            InitMode::Random => "random",
            InitMode::Spectral => "spectral",
            InitMode::Given(_) => "given",
        }
    }
}

/// One stored map along the trajectory.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Snapshot {
    pub k: usize,
    pub stage: Stage,
    pub coords: Vec<[f64; 2]>,
}

/// Scalars logged at every iteration regardless of the snapshot stride.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct IterationScalars {
    pub k: usize,
    pub stage: Stage,
    /// `diam({y_i})`, the exact pairwise maximum.
    pub diameter: f64,
    /// `eta = diam^2`.
    pub eta: f64,
    /// `diam_k / diam_{k-1}`; 1 at `k = 0` or when the previous diameter is 0.
    pub diam_ratio: f64,
}

/// Reproducibility metadata attached to every run.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunMetadata {
    pub n: usize,
    pub params: TuningParams,
    pub init: String,
    pub prng: String,
}

/// Snapshot strides per stage. Snapshots are additionally capped at
/// [`SNAPSHOT_CAP`]; past the cap the stored set is thinned uniformly
/// (every other snapshot dropped, strides doubled).
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct SnapshotStride {
    pub ee: usize,
    pub embed: usize,
}

impl Default for SnapshotStride {
    fn default() -> Self {
        SnapshotStride { ee: 1, embed: 5 }
    }
}

pub const SNAPSHOT_CAP: usize = 2000;

/// Everything recorded about one run.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrajectoryLog {
    pub snapshots: Vec<Snapshot>,
    pub scalars: Vec<IterationScalars>,
    pub meta: RunMetadata,
}

impl TrajectoryLog {
    pub fn snapshot_at(&self, k: usize) -> Option<&Snapshot> {
        self.snapshots.iter().find(|s| s.k == k)
    }

    /// The early-exaggeration output (state at `k = K0`).
    pub fn end_of_ee(&self) -> Option<&Snapshot> {
        self.snapshot_at(self.meta.params.k0)
    }

    pub fn final_snapshot(&self) -> &Snapshot {
        self.snapshots.last().expect("runs always log the initialization")
    }

    pub fn initial_snapshot(&self) -> &Snapshot {
        self.snapshots.first().expect("runs always log the initialization")
    }
}

/// Random initialization `y_l = sigma_n g_l / ||g_l||` with `g_l` standard
/// normal, one independent PRNG stream per coordinate column. Each column
/// has Euclidean norm exactly `sigma_n`.
pub fn init_random(n: usize, sigma_n: f64, seed: u64) -> Result<EmbeddingState> {
    if n < 2 {
        return Err(Error::TooSmall(n, 2));
    }
    if !(sigma_n > 0.0 && sigma_n.is_finite()) {
        return Err(Error::InvalidParameter(format!("sigma_n = {sigma_n}")));
    }
    let mut cols = Vec::with_capacity(2);
    for stream in 0..2u64 {
        let mut rng = SplitMix64::split(seed, stream);
        let g = rng.normals(n);
        let norm = g.iter().map(|x| x * x).sum::<f64>().sqrt();
        cols.push(g.into_iter().map(|x| sigma_n * x / norm).collect::<Vec<f64>>());
    }
    Ok(EmbeddingState::from_columns(
        &cols[0],
        &cols[1],
        Stage::EarlyExaggeration,
        0,
    ))
}

/// Spectral initialization: the two eigenvectors of `L(P)` with the
/// smallest nontrivial eigenvalues (the constant vector excluded), each
/// scaled to norm `sigma_n`.
pub fn init_spectral(p: &AffinityP, sigma_n: f64) -> Result<EmbeddingState> {
    if !(sigma_n > 0.0 && sigma_n.is_finite()) {
        return Err(Error::InvalidParameter(format!("sigma_n = {sigma_n}")));
    }
    let l = laplacian(p.matrix());
    let decomp = crate::spectral::eig_sym(&l)?.align_null_block_to_constant(1e-8);
    // After alignment the constant vector sits at index 0; the next two
    // columns are the smallest nontrivial directions.
    let mut cols = Vec::with_capacity(2);
    for idx in 1..=2 {
        let v = &decomp.eigenvectors[idx];
        let norm = v.iter().map(|x| x * x).sum::<f64>().sqrt();
        cols.push(v.iter().map(|x| sigma_n * x / norm).collect::<Vec<f64>>());
    }
    Ok(EmbeddingState::from_columns(
        &cols[0],
        &cols[1],
        Stage::EarlyExaggeration,
        0,
    ))
}

const DIVERGENCE_GUARD: f64 = 1e12;

/// One gradient step in matrix form, shared by both stages.
fn step(state: &EmbeddingState, p: &AffinityP, alpha: f64, h: f64) -> Result<EmbeddingState> {
    let s = s_matrix(p, &state.coords, alpha);
    let l = laplacian(&s);
    let mut next = Vec::with_capacity(2);
    for li in 0..2 {
        let col = state.column(li);
        let lcol = l.matvec(&col);
        let updated: Vec<f64> = col.iter().zip(&lcol).map(|(&y, &ly)| y - h * ly).collect();
        for &v in &updated {
            if !v.is_finite() || v.abs() > DIVERGENCE_GUARD {
                return Err(Error::Diverged {
                    k: state.k + 1,
                    value: v,
                });
            }
        }
        next.push(updated);
    }
    Ok(EmbeddingState::from_columns(
        &next[0],
        &next[1],
        state.stage,
        state.k + 1,
    ))
}

/// One early-exaggeration step `y_l <- [I - h L(S_alpha)] y_l`.
pub fn ee_step(state: &EmbeddingState, p: &AffinityP, alpha: f64, h: f64) -> Result<EmbeddingState> {
    assert_eq!(
        state.stage,
        Stage::EarlyExaggeration,
        "ee_step requires an early-exaggeration state"
    );
    step(state, p, alpha, h)
}

/// One embedding step: identical contract to [`ee_step`] with `alpha = 1`.
pub fn embed_step(state: &EmbeddingState, p: &AffinityP, h_prime: f64) -> Result<EmbeddingState> {
    assert_eq!(
        state.stage,
        Stage::Embedding,
        "embed_step requires an embedding-stage state"
    );
    step(state, p, 1.0, h_prime)
}

/// Exact pairwise diameter of a 2-D map.
fn diameter(coords: &[[f64; 2]]) -> f64 {
    crate::diagnostics::diameter(coords)
}

/// Run `K0` early-exaggeration steps then `K1` embedding steps, logging
/// scalars every iteration and snapshots at the configured stride.
pub fn run(p: &AffinityP, params: &TuningParams, init: InitMode) -> Result<TrajectoryLog> {
    run_with_stride(p, params, init, SnapshotStride::default())
}

pub fn run_with_stride(
    p: &AffinityP,
    params: &TuningParams,
    init: InitMode,
    stride: SnapshotStride,
) -> Result<TrajectoryLog> {
    params.validate()?;
    if stride.ee == 0 || stride.embed == 0 {
        return Err(Error::InvalidParameter("snapshot stride must be >= 1".into()));
    }
    let n = p.n();
    let init_tag = init.tag().to_string();
    let mut state = match init {
        InitMode::Random => init_random(n, params.sigma_n, params.seed)?,
        InitMode::Spectral => init_spectral(p, params.sigma_n)?,
        InitMode::Given(mut given) => {
            if given.n() != n {
                return Err(Error::DimensionMismatch(format!(
                    "given init has {} points, P has {}",
                    given.n(),
                    n
                )));
            }
            given.stage = Stage::EarlyExaggeration;
            given.k = 0;
            given
        }
    };

    let total = params.k0 + params.k1;
    let mut log = TrajectoryLog {
        snapshots: Vec::new(),
        scalars: Vec::with_capacity(total + 1),
        meta: RunMetadata {
            n,
            params: params.clone(),
            init: init_tag,
            prng: SplitMix64::NAME.to_string(),
        },
    };

    let mut stride = stride;
    let mut prev_diam = f64::NAN;
    let record = |log: &mut TrajectoryLog,
                      stride: &mut SnapshotStride,
                      state: &EmbeddingState,
                      prev_diam: &mut f64,
                      k0: usize| {
        let diam = diameter(&state.coords);
        let ratio = if prev_diam.is_finite() && *prev_diam > 0.0 {
            diam / *prev_diam
        } else {
            1.0
        };
        log.scalars.push(IterationScalars {
            k: state.k,
            stage: state.stage,
            diameter: diam,
            eta: diam * diam,
            diam_ratio: ratio,
        });
        *prev_diam = diam;

        let due = match state.stage {
            Stage::EarlyExaggeration => state.k % stride.ee == 0,
            Stage::Embedding => (state.k - k0) % stride.embed == 0,
        };
        if due || state.k == k0 {
            log.snapshots.push(Snapshot {
                k: state.k,
                stage: state.stage,
                coords: state.coords.clone(),
            });
            if log.snapshots.len() > SNAPSHOT_CAP {
                // Thin uniformly: drop every other snapshot, double strides.
                let mut idx = 0;
                log.snapshots.retain(|_| {
                    let keep = idx % 2 == 0;
                    idx += 1;
                    keep
                });
                stride.ee *= 2;
                stride.embed *= 2;
            }
        }
    };

    record(&mut log, &mut stride, &state, &mut prev_diam, params.k0);

    for _ in 0..params.k0 {
        state = ee_step(&state, p, params.alpha, params.h).map_err(attach_iter(&state))?;
        record(&mut log, &mut stride, &state, &mut prev_diam, params.k0);
    }
    state.stage = Stage::Embedding;
    for _ in 0..params.k1 {
        state = embed_step(&state, p, params.h_prime).map_err(attach_iter(&state))?;
        record(&mut log, &mut stride, &state, &mut prev_diam, params.k0);
    }

    if log.snapshots.last().map(|s| s.k) != Some(state.k) {
        log.snapshots.push(Snapshot {
            k: state.k,
            stage: state.stage,
            coords: state.coords.clone(),
        });
    }
    Ok(log)
}

fn attach_iter(state: &EmbeddingState) -> impl FnOnce(Error) -> Error {
    let k = state.k + 1;
    move |e| match e {
        Error::Diverged { value, .. } => Error::Diverged { k, value },
        other => other,
    }
}

/// Build P from raw data and run: convenience wrapper for callers holding
/// a [`DataMatrix`](crate::affinity::DataMatrix) instead of affinities.
pub fn run_from_data(
    x: &crate::affinity::DataMatrix,
    params: &TuningParams,
    init: InitMode,
) -> Result<TrajectoryLog> {
    let p = crate::affinity::affinity_from_data(x, params.perplexity)?;
    run(&p, params, init)
}
