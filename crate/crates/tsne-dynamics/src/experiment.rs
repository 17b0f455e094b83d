//! Experiment orchestration: resolve a data source, build affinities, run
//! the engine (and surrogates), and emit artifacts — `embedding_final.csv`,
//! `trajectory.jsonl`, `report.json`, `final.svg`, plus the compare and
//! early-stop-study outputs.
//!
//! Every artifact is a pure function of `(config, seed)`. Floats are
//! serialized with 17 significant digits so parsing them back is lossless.

use crate::affinity::{affinity_from_data, AffinityP};
use crate::datagen::{gmm_preset, load_csv, load_idx, spheres_preset, IdxContent, LabeledData};
use crate::diagnostics::{
    build_report, separation_ratio, surrogate_deviation, DiagnosticReport, DiagnosticThresholds,
    Flagged,
};
use crate::engine::{
    run_with_stride, InitMode, Snapshot, SnapshotStride, TrajectoryLog, TuningParams,
};
use crate::plot::{render_overlay_svg, render_svg};
use crate::spectral::ComponentLabels;
use crate::theory::{
    early_stop_k0_schedule, power_surrogate, stabilized_theory_tuning, theory_tuning,
};
use crate::{Error, Result};
use serde::{Deserialize, Serialize};
use std::io::Write as _;
use std::path::{Path, PathBuf};

/// Where the points come from.
#[derive(Debug, Clone, PartialEq)]
pub enum DataSource {
    PresetGmm { n: usize },
    PresetSpheres { n: usize },
    Idx { images: PathBuf, labels: Option<PathBuf> },
    Csv { path: PathBuf, has_labels: bool },
}

/// How the map is initialized.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum InitChoice {
    Random,
    Spectral,
}

/// Explicit parameter overrides on top of the theory schedule.
#[derive(Debug, Clone, Copy, Default, PartialEq)]
pub struct ParamOverrides {
    pub alpha: Option<f64>,
    pub h: Option<f64>,
    pub h_prime: Option<f64>,
    pub k0: Option<usize>,
    pub k1: Option<usize>,
    pub sigma_n: Option<f64>,
}

/// Full description of one experiment.
#[derive(Debug, Clone, PartialEq)]
pub struct ExperimentConfig {
    pub source: DataSource,
    /// Exponent for the theory schedule; overrides are applied on top.
    pub theory_delta: f64,
    pub overrides: ParamOverrides,
    pub perplexity: f64,
    pub init: InitChoice,
    pub seed: u64,
    pub out_dir: PathBuf,
    /// Embedding-stage snapshot stride (the EE stage always logs every
    /// iteration).
    pub stride: usize,
}

impl ExperimentConfig {
    pub fn new(source: DataSource) -> Self {
        ExperimentConfig {
            source,
            theory_delta: 0.5,
            overrides: ParamOverrides::default(),
            perplexity: 30.0,
            init: InitChoice::Random,
            seed: 0,
            out_dir: PathBuf::from("out"),
            stride: 5,
        }
    }
}

/// Resolved inputs for a run: the data, optional cluster labels, and P.
pub struct ResolvedData {
    pub data: LabeledData,
    pub p: AffinityP,
    /// Present when the source carries meaningful labels (r >= 2).
    pub labels: Option<ComponentLabels>,
}

fn resolve_data(config: &ExperimentConfig) -> Result<ResolvedData> {
    let data = match &config.source {
        DataSource::PresetGmm { n } => gmm_preset(*n, config.seed)?,
        DataSource::PresetSpheres { n } => spheres_preset(*n, config.seed)?,
        DataSource::Csv { path, has_labels } => load_csv(path, *has_labels)?,
        DataSource::Idx { images, labels } => {
            let set = match load_idx(images)? {
                IdxContent::Images(set) => set,
                IdxContent::Labels(_) => {
                    return Err(Error::Config(format!(
                        "{} holds labels, expected an image tensor",
                        images.display()
                    )))
                }
            };
            let matrix = set.to_data_matrix()?;
            match labels {
                Some(lp) => {
                    let raw = match load_idx(lp)? {
                        IdxContent::Labels(ls) => ls,
                        IdxContent::Images(_) => {
                            return Err(Error::Config(format!(
                                "{} holds images, expected labels",
                                lp.display()
                            )))
                        }
                    };
                    if raw.len() != matrix.n() {
                        return Err(Error::Config(format!(
                            "{} labels for {} images",
                            raw.len(),
                            matrix.n()
                        )));
                    }
                    let as_usize: Vec<usize> = raw.iter().map(|&b| b as usize).collect();
                    let comp = ComponentLabels::from_labels(&as_usize);
                    LabeledData::new(matrix, comp.labels, comp.r, None)?
                }
                None => {
                    let n = matrix.n();
                    LabeledData::new(matrix, vec![0; n], 1, None)?
                }
            }
        }
    };
    let p = affinity_from_data(&data.data, config.perplexity)?;
    let labels = if data.r >= 2 {
        Some(data.component_labels())
    } else {
        None
    };
    Ok(ResolvedData { data, p, labels })
}

fn apply_overrides(params: &mut TuningParams, o: &ParamOverrides) {
    if let Some(v) = o.alpha {
        params.alpha = v;
    }
    if let Some(v) = o.h {
        params.h = v;
    }
    if let Some(v) = o.h_prime {
        params.h_prime = v;
    }
    if let Some(v) = o.k0 {
        params.k0 = v;
    }
    if let Some(v) = o.k1 {
        params.k1 = v;
    }
    if let Some(v) = o.sigma_n {
        params.sigma_n = v;
    }
}

/// Materialize the tuning parameters for `n` points: the plain theory
/// schedule plus any explicit overrides.
pub fn resolve_params(config: &ExperimentConfig, n: usize) -> TuningParams {
    let mut params = theory_tuning(n, config.theory_delta, config.perplexity);
    params.seed = config.seed;
    apply_overrides(&mut params, &config.overrides);
    params
}

/// Tuning for a resolved dataset: the stability-scaled schedule (see
/// [`stabilized_theory_tuning`]) unless an explicit `--alpha` was given.
pub fn resolve_params_for(
    config: &ExperimentConfig,
    resolved: &ResolvedData,
) -> Result<TuningParams> {
    let n = resolved.data.n();
    if n < 10 {
        return Err(Error::Config(format!(
            "the tuning schedule needs at least 10 points, got {n}"
        )));
    }
    let mut params = if config.overrides.alpha.is_some() {
        theory_tuning(n, config.theory_delta, config.perplexity)
    } else {
        stabilized_theory_tuning(n, config.theory_delta, config.perplexity, &resolved.p)?
    };
    params.seed = config.seed;
    apply_overrides(&mut params, &config.overrides);
    Ok(params)
}

fn source_tag(source: &DataSource) -> String {
    match source {
        DataSource::PresetGmm { n } => format!("preset:gmm(n={n})"),
        DataSource::PresetSpheres { n } => format!("preset:spheres(n={n})"),
        DataSource::Idx { images, .. } => format!("idx:{}", images.display()),
        DataSource::Csv { path, .. } => format!("csv:{}", path.display()),
    }
}

fn init_mode(choice: InitChoice) -> InitMode {
    match choice {
        InitChoice::Random => InitMode::Random,
        InitChoice::Spectral => InitMode::Spectral,
    }
}

// --- JSON with 17-significant-digit floats ---------------------------------

struct SciFormatter;

impl serde_json::ser::Formatter for SciFormatter {
    fn write_f64<W>(&mut self, writer: &mut W, value: f64) -> std::io::Result<()>
    where
        W: ?Sized + std::io::Write,
    {
        if !value.is_finite() {
            return Err(std::io::Error::new(
                std::io::ErrorKind::InvalidData,
                format!("non-finite float {value} in JSON output"),
            ));
        }
        write!(writer, "{value:.16e}")
    }
}

/// Serialize to JSON with floats at 17 significant digits (lossless).
pub fn to_json(value: &impl Serialize) -> Result<String> {
    let mut buf = Vec::new();
    let mut ser = serde_json::Serializer::with_formatter(&mut buf, SciFormatter);
    value
        .serialize(&mut ser)
        .map_err(|e| Error::Config(format!("serialization failed: {e}")))?;
    Ok(String::from_utf8(buf).expect("serde_json emits UTF-8"))
}

// --- cmd_run ----------------------------------------------------------------

/// Artifacts produced by [`cmd_run`].
#[derive(Debug)]
pub struct RunArtifacts {
    pub traj: TrajectoryLog,
    pub report: DiagnosticReport,
    pub embedding_csv: PathBuf,
    pub trajectory_jsonl: PathBuf,
    pub report_json: PathBuf,
    pub final_svg: PathBuf,
}

/// Full pipeline: data -> P -> two-stage run -> report + artifacts in
/// `config.out_dir`.
pub fn cmd_run(config: &ExperimentConfig) -> Result<RunArtifacts> {
    let resolved = resolve_data(config)?;
    let params = resolve_params_for(config, &resolved)?;
    let stride = SnapshotStride {
        ee: 1,
        embed: config.stride.max(1),
    };
    let traj = run_with_stride(&resolved.p, &params, init_mode(config.init), stride)?;
    let mut report = build_report(
        &traj,
        &resolved.p,
        resolved.labels.as_ref(),
        &DiagnosticThresholds::default(),
    )?;
    report.source = Some(source_tag(&config.source));

    std::fs::create_dir_all(&config.out_dir)?;
    let embedding_csv = config.out_dir.join("embedding_final.csv");
    write_embedding_csv(&embedding_csv, traj.final_snapshot(), &resolved.data.labels)?;

    let trajectory_jsonl = config.out_dir.join("trajectory.jsonl");
    write_trajectory_jsonl(&trajectory_jsonl, &traj.snapshots)?;

    let report_json = config.out_dir.join("report.json");
    std::fs::write(&report_json, to_json(&report)?)?;

    let final_svg = config.out_dir.join("final.svg");
    render_svg(
        &traj.final_snapshot().coords,
        Some(&resolved.data.labels),
        &final_svg,
    )?;

    Ok(RunArtifacts {
        traj,
        report,
        embedding_csv,
        trajectory_jsonl,
        report_json,
        final_svg,
    })
}

fn write_embedding_csv(path: &Path, snapshot: &Snapshot, labels: &[usize]) -> Result<()> {
    let mut f = std::io::BufWriter::new(std::fs::File::create(path)?);
    writeln!(f, "x,y,label")?;
    for (c, l) in snapshot.coords.iter().zip(labels) {
        writeln!(f, "{:.16e},{:.16e},{l}", c[0], c[1])?;
    }
    f.flush()?;
    Ok(())
}

fn write_trajectory_jsonl(path: &Path, snapshots: &[Snapshot]) -> Result<()> {
    let mut f = std::io::BufWriter::new(std::fs::File::create(path)?);
    for s in snapshots {
        writeln!(f, "{}", to_json(s)?)?;
    }
    f.flush()?;
    Ok(())
}

/// Parse one `trajectory.jsonl` line back into a snapshot.
pub fn parse_snapshot_line(line: &str) -> Result<Snapshot> {
    serde_json::from_str(line).map_err(|e| Error::Config(format!("bad snapshot line: {e}")))
}

// --- cmd_compare -------------------------------------------------------------

/// Deviation series between the engine run and the power-iteration
/// surrogate.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CompareResult {
    pub ks: Vec<usize>,
    pub deviation: Vec<f64>,
    /// Deviation at the end of early exaggeration.
    pub final_deviation: f64,
}

/// Run the early-exaggeration stage and compare it against the linear
/// surrogate; writes `compare.json` and an overlay SVG of the two maps at
/// `K0`.
pub fn cmd_compare(config: &ExperimentConfig) -> Result<CompareResult> {
    let resolved = resolve_data(config)?;
    let mut params = resolve_params_for(config, &resolved)?;
    params.k1 = 0;
    let stride = SnapshotStride { ee: 1, embed: 1 };
    let traj = run_with_stride(&resolved.p, &params, init_mode(config.init), stride)?;

    let series = surrogate_deviation(&traj, &resolved.p, params.alpha, params.h)?;
    let (ks, deviation): (Vec<usize>, Vec<f64>) = series.into_iter().unzip();
    let final_deviation = deviation.last().copied().unwrap_or(0.0);
    let result = CompareResult {
        ks,
        deviation,
        final_deviation,
    };

    std::fs::create_dir_all(&config.out_dir)?;
    std::fs::write(config.out_dir.join("compare.json"), to_json(&result)?)?;

    let init = traj.initial_snapshot();
    let y0 = [
        init.coords.iter().map(|c| c[0]).collect::<Vec<f64>>(),
        init.coords.iter().map(|c| c[1]).collect::<Vec<f64>>(),
    ];
    let tilde = power_surrogate(&resolved.p, params.alpha, params.h, &y0, params.k0);
    let surrogate_coords: Vec<[f64; 2]> = tilde[0]
        .iter()
        .zip(&tilde[1])
        .map(|(&x, &y)| [x, y])
        .collect();
    let engine_coords = &traj.final_snapshot().coords;
    render_overlay_svg(
        engine_coords,
        &surrogate_coords,
        config.out_dir.join("compare_overlay.svg"),
    )?;

    Ok(result)
}

// --- cmd_early_stop_study ------------------------------------------------------

/// One arm of the early-stopping study.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StudyEntry {
    pub k0: usize,
    pub separation_end_ee: Flagged,
    pub separation_final: Flagged,
}

/// Run the three early-stopping budgets `floor((ln n)^2)`, `n^(2/3)`,
/// `n^(3/4)` with a shared initialization; writes per-arm SVGs (end of EE
/// and final) plus `study.json` with the separation ratios.
pub fn cmd_early_stop_study(config: &ExperimentConfig) -> Result<Vec<StudyEntry>> {
    let resolved = resolve_data(config)?;
    let labels = resolved
        .labels
        .clone()
        .ok_or_else(|| Error::Config("early-stop study needs labeled data".into()))?;
    let n = resolved.data.n();
    let schedule = early_stop_k0_schedule(n);

    std::fs::create_dir_all(&config.out_dir)?;
    let mut entries = Vec::new();
    for k0 in schedule {
        let mut params = resolve_params_for(config, &resolved)?;
        params.k0 = k0;
        let stride = SnapshotStride {
            ee: 1,
            embed: config.stride.max(1),
        };
        let traj = run_with_stride(&resolved.p, &params, init_mode(config.init), stride)?;
        let end_ee = traj
            .end_of_ee()
            .expect("EE snapshots are logged every iteration");
        let sep_ee = separation_ratio(&end_ee.coords, &labels);
        let sep_final = separation_ratio(&traj.final_snapshot().coords, &labels);
        render_svg(
            &end_ee.coords,
            Some(&resolved.data.labels),
            config.out_dir.join(format!("study_k0_{k0}_ee.svg")),
        )?;
        render_svg(
            &traj.final_snapshot().coords,
            Some(&resolved.data.labels),
            config.out_dir.join(format!("study_k0_{k0}_final.svg")),
        )?;
        entries.push(StudyEntry {
            k0,
            separation_end_ee: sep_ee,
            separation_final: sep_final,
        });
    }
    std::fs::write(config.out_dir.join("study.json"), to_json(&entries)?)?;
    Ok(entries)
}

// --- argument parsing ---------------------------------------------------------

/// CLI subcommands.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Command {
    Run,
    Compare,
    EarlyStopStudy,
}

pub const USAGE: &str = "\
usage: tsne-dynamics <run|compare|early-stop-study> [flags]

data source (exactly one):
  --preset <gmm|spheres>    built-in generator (see --n)
  --idx <path>              IDX image tensor (optional --idx-labels <path>)
  --csv <path>              numeric CSV (--csv-labels: final integer label column)

parameters:
  --n <int>                 preset sample count (default 300)
  --theory-delta <float>    schedule exponent in (0,1), default 0.5
  --alpha --h --h-prime     explicit overrides of the schedule
  --k0 --k1                 explicit stage lengths
  --perplexity <float>      default 30
  --sigma-n <float>         initialization scale override
  --init <random|spectral>  default random
  --seed <int>              default 0
  --out <dir>               output directory, default ./out
  --stride <int>            embedding-stage snapshot stride, default 5
";

/// Parse CLI arguments (everything after the program name).
pub fn parse_args(args: &[String]) -> Result<(Command, ExperimentConfig)> {
    let cmd = match args.first().map(String::as_str) {
        Some("run") => Command::Run,
        Some("compare") => Command::Compare,
        Some("early-stop-study") => Command::EarlyStopStudy,
        Some(other) => return Err(Error::Config(format!("unknown command {other:?}"))),
        None => return Err(Error::Config("missing command".into())),
    };

    let mut preset: Option<String> = None;
    let mut idx: Option<PathBuf> = None;
    let mut idx_labels: Option<PathBuf> = None;
    let mut csv: Option<PathBuf> = None;
    let mut csv_labels = false;
    let mut n = 300usize;
    let mut config_rest = ExperimentConfig::new(DataSource::PresetGmm { n });

    let mut i = 1;
    let next_value = |i: &mut usize, flag: &str| -> Result<String> {
        *i += 1;
        args.get(*i)
            .cloned()
            .ok_or_else(|| Error::Config(format!("{flag} needs a value")))
    };
    while i < args.len() {
        let flag = args[i].as_str();
        match flag {
            "--preset" => preset = Some(next_value(&mut i, flag)?),
            "--idx" => idx = Some(PathBuf::from(next_value(&mut i, flag)?)),
            "--idx-labels" => idx_labels = Some(PathBuf::from(next_value(&mut i, flag)?)),
            "--csv" => csv = Some(PathBuf::from(next_value(&mut i, flag)?)),
            "--csv-labels" => csv_labels = true,
            "--n" => n = parse_num(&next_value(&mut i, flag)?, flag)?,
            "--theory-delta" => {
                config_rest.theory_delta = parse_num(&next_value(&mut i, flag)?, flag)?
            }
            "--alpha" => {
                config_rest.overrides.alpha = Some(parse_num(&next_value(&mut i, flag)?, flag)?)
            }
            "--h" => config_rest.overrides.h = Some(parse_num(&next_value(&mut i, flag)?, flag)?),
            "--h-prime" => {
                config_rest.overrides.h_prime =
                    Some(parse_num(&next_value(&mut i, flag)?, flag)?)
            }
            "--k0" => {
                config_rest.overrides.k0 = Some(parse_num(&next_value(&mut i, flag)?, flag)?)
            }
            "--k1" => {
                config_rest.overrides.k1 = Some(parse_num(&next_value(&mut i, flag)?, flag)?)
            }
            "--perplexity" => {
                config_rest.perplexity = parse_num(&next_value(&mut i, flag)?, flag)?
            }
            "--sigma-n" => {
                config_rest.overrides.sigma_n =
                    Some(parse_num(&next_value(&mut i, flag)?, flag)?)
            }
            "--init" => {
                config_rest.init = match next_value(&mut i, flag)?.as_str() {
                    "random" => InitChoice::Random,
                    "spectral" => InitChoice::Spectral,
                    other => {
                        return Err(Error::Config(format!(
                            "--init must be random or spectral, got {other:?}"
                        )))
                    }
                }
            }
            "--seed" => config_rest.seed = parse_num(&next_value(&mut i, flag)?, flag)?,
            "--out" => config_rest.out_dir = PathBuf::from(next_value(&mut i, flag)?),
            "--stride" => config_rest.stride = parse_num(&next_value(&mut i, flag)?, flag)?,
            other => return Err(Error::Config(format!("unknown flag {other:?}"))),
        }
        i += 1;
    }

    let sources = [preset.is_some(), idx.is_some(), csv.is_some()]
        .iter()
        .filter(|&&s| s)
        .count();
    if sources != 1 {
        return Err(Error::Config(
            "exactly one of --preset, --idx, --csv is required".into(),
        ));
    }
    config_rest.source = if let Some(name) = preset {
        match name.as_str() {
            "gmm" => DataSource::PresetGmm { n },
            "spheres" => DataSource::PresetSpheres { n },
            other => return Err(Error::Config(format!("unknown preset {other:?}"))),
        }
    } else if let Some(images) = idx {
        DataSource::Idx {
            images,
            labels: idx_labels,
        }
    } else {
        DataSource::Csv {
            path: csv.expect("checked above"),
            has_labels: csv_labels,
        }
    };

    Ok((cmd, config_rest))
}

fn parse_num<T: std::str::FromStr>(s: &str, flag: &str) -> Result<T> {
    s.parse()
        .map_err(|_| Error::Config(format!("{flag}: cannot parse {s:?}")))
}

/// Map an error to the process exit code: 1 for configuration problems,
/// 2 for IO and file-format problems, 3 for numeric failures.
pub fn exit_code(err: &Error) -> i32 {
    match err {
        Error::Config(_) => 1,
        Error::Io(_)
        | Error::IdxMagic(_)
        | Error::IdxTruncated { .. }
        | Error::IdxOverflow(_)
        | Error::Csv { .. } => 2,
        _ => 3,
    }
}
