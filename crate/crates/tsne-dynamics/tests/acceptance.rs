//! Acceptance suite: one test per criterion, printing one pass/fail line
//! each (run with `cargo test --test acceptance -- --nocapture` to see all
//! lines).
//!
//! Three assertions are expected to stay red on desk-scale data and are
//! kept failing deliberately; see the comments on criteria 4, 6, and 9.
//! The asymptotic predictions they pin presume separation regimes the
//! configured generators do not reach at these sample sizes; the companion
//! tests in `pipeline.rs` verify the same mechanisms in their valid
//! regimes.

use tsne_dynamics::affinity::{
    affinity_from_data, conditional_affinities, q_matrix, s_matrix, symmetrize, AffinityP,
    Bandwidths,
};
use tsne_dynamics::datagen::{gmm_means, gmm_sample, CovarianceSpec, LabeledData};
use tsne_dynamics::diagnostics::{
    amplification_trace, euler_flow_gap, expansion_check, force_residual,
    separation_ratio, surrogate_deviation, Flagged,
};
use tsne_dynamics::engine::{
    ee_step, init_random, run_with_stride, InitMode, SnapshotStride, Stage,
    TuningParams,
};
use tsne_dynamics::rng::SplitMix64;
use tsne_dynamics::spectral::{
    connected_components, eig_sym, laplacian, ComponentLabels, SquareSym,
};
use tsne_dynamics::theory::{
    early_stop_k0_schedule, exaggerated_adjacency, gradient_flow, null_space_limit,
    power_convergence_series, stabilized_theory_tuning, theory_tuning,
};

fn pass(line: &str) {
    println!("acceptance {line}: PASS");
}

// --- shared fixtures --------------------------------------------------------

fn gmm_instance(n: usize, p: usize, rho2: f64, seed: u64) -> LabeledData {
    let means = gmm_means(6, p, rho2.sqrt(), seed).unwrap();
    gmm_sample(
        n,
        &means,
        &CovarianceSpec::Identity(1.0),
        &[0.1, 0.1, 0.1, 0.15, 0.25, 0.3],
        seed,
    )
    .unwrap()
}

/// Uniform-weight block-diagonal affinity matrix with unit total mass.
fn block_affinity(sizes: &[usize]) -> AffinityP {
    let n: usize = sizes.iter().sum();
    let mut who = Vec::new();
    for (r, &s) in sizes.iter().enumerate() {
        who.extend(std::iter::repeat(r).take(s));
    }
    let pairs: usize = sizes.iter().map(|&s| s * (s - 1)).sum();
    let w = 1.0 / pairs as f64;
    let mat = SquareSym::from_fn(n, |i, j| {
        if i != j && who[i] == who[j] {
            w
        } else {
            0.0
        }
    })
    .unwrap();
    AffinityP::from_matrix(mat).unwrap()
}

fn random_affinity(n: usize, seed: u64) -> AffinityP {
    let mut rng = SplitMix64::new(seed);
    let mut mat = SquareSym::from_fn(n, |i, j| {
        if i == j {
            0.0
        } else {
            0.05 + rng.next_f64()
        }
    })
    .unwrap();
    let total: f64 = (0..n)
        .flat_map(|i| (0..n).map(move |j| (i, j)))
        .map(|(i, j)| mat.get(i, j))
        .sum();
    for i in 0..n {
        for j in i + 1..n {
            let v = mat.get(i, j) / total;
            mat.set(i, j, v);
        }
    }
    AffinityP::from_matrix(mat).unwrap()
}

fn columns_of(coords: &[[f64; 2]]) -> [Vec<f64>; 2] {
    [
        coords.iter().map(|c| c[0]).collect(),
        coords.iter().map(|c| c[1]).collect(),
    ]
}

fn vec_norm(v: &[f64]) -> f64 {
    v.iter().map(|x| x * x).sum::<f64>().sqrt()
}

// --- criterion 1 -------------------------------------------------------------

#[test]
fn criterion_01_tuning_reproduction() {
    assert_eq!(theory_tuning(1600, 0.5, 30.0).k0, 54);
    assert_eq!(theory_tuning(1500, 0.5, 30.0).k0, 53);
    assert_eq!(early_stop_k0_schedule(1600), [54, 137, 253]);
    pass("1 (tuning reproduction: K0 = 54 @ 1600, 53 @ 1500, study schedule 54/137/253)");
}

// --- criterion 2 -------------------------------------------------------------

#[test]
fn criterion_02_laplacian_null_space_exactness() {
    let configs: [&[usize]; 3] = [&[120, 180], &[100, 100, 100], &[30, 40, 50, 60, 70, 50]];
    for sizes in configs {
        let r = sizes.len();
        let p = block_affinity(sizes);
        let l = laplacian(p.matrix());
        let decomp = eig_sym(&l).unwrap();
        let nullity = decomp.eigenvalues.iter().filter(|x| x.abs() < 1e-8).count();
        assert_eq!(nullity, r, "sizes {sizes:?}: nullity {nullity}");

        let labels = connected_components(p.matrix(), 0.0);
        assert_eq!(labels.r, r);
        for cluster in 0..r {
            let members = labels.members(cluster);
            let scale = 1.0 / (members.len() as f64).sqrt();
            let mut theta = vec![0.0; p.n()];
            for &i in &members {
                theta[i] = scale;
            }
            let res = vec_norm(&l.matvec(&theta));
            assert!(res <= 1e-8, "sizes {sizes:?} cluster {cluster}: residual {res}");
        }
    }
    pass("2 (Laplacian null space: R eigenvalues below 1e-8, indicator residuals <= 1e-8)");
}

// --- criterion 3 -------------------------------------------------------------

/// Strongly separated mixture (`rho^2 = 50 max(p, ln n)`, `p = 50`) under
/// the analytic bandwidth choice `tau^2 = max(p, ln n)`, theory
/// schedule at `delta = 1/2` with the exaggeration kept inside the
/// stability region and an O(1) initialization scale.
fn strong_run_sup_deviation(n: usize, seed: u64) -> f64 {
    let p_dim = 50usize;
    let rho2 = 50.0 * (p_dim as f64).max((n as f64).ln());
    let data = gmm_instance(n, p_dim, rho2, seed);
    let tau = Bandwidths::fixed(n, (p_dim as f64).max((n as f64).ln())).unwrap();
    let p = symmetrize(&conditional_affinities(&data.data, &tau).unwrap());
    let mut params = theory_tuning(n, 0.5, 30.0);
    params.alpha *= 0.25;
    params.sigma_n = 0.5;
    params.seed = seed;
    params.k1 = 0;
    let traj = run_with_stride(
        &p,
        &params,
        InitMode::Random,
        SnapshotStride { ee: 1, embed: 1 },
    )
    .unwrap();
    surrogate_deviation(&traj, &p, params.alpha, params.h)
        .unwrap()
        .iter()
        .map(|(_, d)| *d)
        .fold(0.0f64, f64::max)
}

#[test]
fn criterion_03_surrogate_equivalence() {
    let devs: Vec<f64> = [100usize, 200, 400]
        .iter()
        .map(|&n| strong_run_sup_deviation(n, 11))
        .collect();
    assert!(
        devs[1] <= 1.2 * devs[0],
        "deviation rose 100 -> 200: {devs:?}"
    );
    assert!(
        devs[2] <= 1.2 * devs[1],
        "deviation rose 200 -> 400: {devs:?}"
    );
    assert!(devs[2] < 0.15, "deviation at n = 400 is {}", devs[2]);
    pass(&format!(
        "3 (surrogate equivalence: sup deviations {:.4} / {:.4} / {:.4} non-increasing, < 0.15 at n = 400)",
        devs[0], devs[1], devs[2]
    ));
}

// --- criteria 4, 5, 9 share one reference run --------------------------------

struct PresetRun {
    p: AffinityP,
    labels: ComponentLabels,
    params: TuningParams,
    traj: tsne_dynamics::engine::TrajectoryLog,
}

/// The reference-model run: n = 300, p = 100, rho^2 = p, perplexity 30,
/// theory schedule at delta = 1/3 with stability-scaled exaggeration.
/// Computed once and shared by criteria 4, 5, and 9.
fn preset_run(seed: u64) -> &'static PresetRun {
    assert_eq!(seed, 0, "the shared reference run is pinned to seed 0");
    static RUN: std::sync::OnceLock<PresetRun> = std::sync::OnceLock::new();
    RUN.get_or_init(|| {
        let seed = 0;
        let data = gmm_instance(300, 100, 100.0, seed);
        let p = affinity_from_data(&data.data, 30.0).unwrap();
        let labels = data.component_labels();
        let mut params = stabilized_theory_tuning(300, 1.0 / 3.0, 30.0, &p).unwrap();
        params.seed = seed;
        let traj = run_with_stride(
            &p,
            &params,
            InitMode::Random,
            SnapshotStride { ee: 1, embed: 1 },
        )
        .unwrap();
        PresetRun {
            p,
            labels,
            params,
            traj,
        }
    })
}

#[test]
fn criterion_04a_null_space_prediction() {
    let run = preset_run(0);
    let end = run.traj.end_of_ee().unwrap();
    let init = run.traj.initial_snapshot();
    let y0 = columns_of(&init.coords);
    let pstar = tsne_dynamics::diagnostics::block_surrogate(&run.p, &run.labels);
    let (proj, _) = null_space_limit(&pstar, &run.labels, &y0).unwrap();
    let mut worst: f64 = 0.0;
    for l in 0..2 {
        let dev: f64 = end
            .coords
            .iter()
            .map(|c| c[l])
            .zip(&proj[l])
            .map(|(a, b)| (a - b) * (a - b))
            .sum::<f64>()
            .sqrt();
        worst = worst.max(dev / vec_norm(&y0[l]));
    }
    assert!(
        worst < 0.2,
        "end-of-EE distance to the null-space prediction: {worst}"
    );
    pass(&format!(
        "4a (implicit clustering: end-of-EE within {worst:.3} of the null-space limit, < 0.2)"
    ));
}

/// EXPECTED RED. At rho^2 = p the within- and cross-cluster distance
/// distributions overlap (the gap is ~3.5 sigma while the sample holds
/// ~2e4 cross pairs), so P carries cross-cluster entries at within-cluster
/// magnitude and the embedded clusters cannot separate: the best ratio
/// reachable over the whole tuning space measured ~0.66, typical values
/// 5-13. The separated regime needs rho^2 >= ~4p here (see
/// `pipeline::forces_and_separation_in_the_strong_regime`).
#[test]
fn criterion_04b_end_of_ee_separation() {
    let run = preset_run(0);
    let end = run.traj.end_of_ee().unwrap();
    let sep = separation_ratio(&end.coords, &run.labels);
    match sep {
        Flagged::Finite(s) => {
            if s >= 0.2 {
                println!("acceptance 4b (end-of-EE separation ratio < 0.2): FAIL ({s:.3})");
            }
            assert!(
                s < 0.2,
                "end-of-EE separation ratio {s:.3} on the rho^2 = p reference model \
                 (distance-tail inversion keeps it O(1); threshold unreachable at this separation)"
            );
            pass(&format!("4b (end-of-EE separation ratio {s:.3} < 0.2)"));
        }
        Flagged::Inf => panic!("separation ratio degenerate"),
    }
}

#[test]
fn criterion_05_expansion() {
    let run = preset_run(0);
    let steps = expansion_check(&run.traj);
    assert!(
        !steps.is_empty(),
        "no amplification phase detected on the reference run"
    );
    let violations: Vec<usize> = steps.iter().filter(|e| !e.increased).map(|e| e.k).collect();
    assert!(
        violations.is_empty(),
        "diameter failed to increase at iterations {violations:?}"
    );
    let min_ratio = steps
        .iter()
        .map(|e| e.increment_ratio)
        .fold(f64::INFINITY, f64::min);
    assert!(min_ratio > 0.0);
    pass(&format!(
        "5 (expansion: {} amplification iterations all strictly increasing; min increment / (h' sigma_n / n^2) = {:.1})",
        steps.len(),
        min_ratio
    ));
}

// --- criterion 6 -------------------------------------------------------------

/// EXPECTED RED. On rho^2 = p^(2/3) data the clusters physically
/// interleave (about 40% of cross pairs are closer than within pairs), so
/// the label-based separation ratio is dominated by near-zero inter-cluster
/// distances in both arms and its two-arm ratio is noise centered near 1
/// (measured per-seed ratios 0.6-4.4, median ~1.1). Overshooting itself is
/// real and visible as deeper collapse toward the trivial direction; the
/// pinned factor-2 contrast in this metric is not.
#[test]
fn criterion_06_early_stopping_failure_mode() {
    let n = 600usize;
    let p_dim = 100usize;
    let rho2 = (p_dim as f64).powf(2.0 / 3.0);
    let schedule = early_stop_k0_schedule(n);
    let mut ratios = Vec::new();
    for seed in [0u64, 1, 2, 3, 7] {
        let data = gmm_instance(n, p_dim, rho2, seed);
        let p = affinity_from_data(&data.data, 30.0).unwrap();
        let labels = data.component_labels();
        let mut seps = Vec::new();
        for k0 in [schedule[0], schedule[2]] {
            let mut params = stabilized_theory_tuning(n, 0.5, 30.0, &p).unwrap();
            params.seed = seed;
            params.k0 = k0;
            params.k1 = 0;
            let traj = run_with_stride(
                &p,
                &params,
                InitMode::Random,
                SnapshotStride { ee: 1, embed: 1 },
            )
            .unwrap();
            match separation_ratio(&traj.end_of_ee().unwrap().coords, &labels) {
                Flagged::Finite(s) => seps.push(s),
                Flagged::Inf => seps.push(f64::INFINITY),
            }
        }
        ratios.push(seps[1] / seps[0]);
    }
    let mut sorted = ratios.clone();
    sorted.sort_by(|a, b| a.partial_cmp(b).unwrap());
    let median = sorted[sorted.len() / 2];
    if median < 2.0 {
        println!(
            "acceptance 6 (early-stopping failure mode, factor >= 2): FAIL (median {median:.2})"
        );
    }
    assert!(
        median >= 2.0,
        "overshooting contrast: separation ratios at K0 = {} vs K0 = {} give per-seed factors \
         {ratios:?} (median {median:.2}); the factor-2 degradation does not reproduce in this \
         metric at rho^2 = p^(2/3)",
        schedule[2],
        schedule[0]
    );
    pass(&format!(
        "6 (early-stopping failure mode: median separation degradation {median:.2} >= 2)"
    ));
}

// --- criterion 7 -------------------------------------------------------------

#[test]
fn criterion_07_euler_flow_bound() {
    for seed in 0..20u64 {
        let n = 12 + (seed % 4) as usize;
        let p = random_affinity(n, seed * 7 + 1);
        let y0 = [
            SplitMix64::split(seed, 0).normals(n),
            SplitMix64::split(seed, 1).normals(n),
        ];
        let (alpha, h, t) = (2.0, 0.02, 1.0);
        let g1 = euler_flow_gap(&p, alpha, h, &y0, t).unwrap();
        assert!(g1.bound < 0.5, "instance {seed}: bound {b} not informative", b = g1.bound);
        assert!(
            g1.measured <= g1.bound,
            "instance {seed}: measured {m} > bound {b}",
            m = g1.measured,
            b = g1.bound
        );
        let g2 = euler_flow_gap(&p, alpha, h / 2.0, &y0, t).unwrap();
        assert!(
            g2.measured <= 0.55 * g1.measured,
            "instance {seed}: halving h gave {m2} vs {m1}",
            m2 = g2.measured,
            m1 = g1.measured
        );
    }
    pass("7 (Euler-flow bound and first-order halving on 20 instances)");
}

// --- criterion 8 -------------------------------------------------------------

#[test]
fn criterion_08_geometric_convergence_rate() {
    let n = 150usize;
    let sizes = [40usize, 50, 60];
    let pstar = block_affinity(&sizes);
    let labels = connected_components(pstar.matrix(), 0.0);
    let lambda_r1 = eig_sym(&laplacian(pstar.matrix())).unwrap().eigenvalues[sizes.len()];

    // Eigengap window: 0 < h lambda_{R+1}(L(alpha P*)) <= h lambda_n < 1. Keep
    // kh << n over k <= 200 so the null-space drift stays below the decay.
    let h = 1e-4;
    let alpha = 0.03 / (h * lambda_r1);
    let rate = 1.0 + h / (n as f64 - 1.0) - h * alpha * lambda_r1;

    let y = SplitMix64::split(5, 0).normals(n);
    let series = power_convergence_series(pstar.matrix(), &labels, alpha, h, &y, 200);
    for (k, d) in series.iter().enumerate() {
        let bound = rate.powi(k as i32);
        assert!(
            *d <= bound,
            "k = {k}: deviation {d:.6e} exceeds rate bound {bound:.6e}"
        );
    }
    pass(&format!(
        "8 (geometric convergence: deviation <= ({rate:.5})^k for k <= 200, final {:.2e})",
        series[200]
    ));
}

// --- criterion 9 -------------------------------------------------------------

#[test]
fn criterion_09a_decomposition_identity() {
    let run = preset_run(0);
    let trace = amplification_trace(&run.traj);
    let mut checked = 0;
    for w in run.traj.snapshots.windows(2) {
        let (a, b) = (&w[0], &w[1]);
        if b.k != a.k + 1 || b.stage != Stage::Embedding {
            continue;
        }
        if let Some(boundary) = trace.phase_boundary {
            if b.k >= boundary {
                break;
            }
        }
        let displacement: Vec<[f64; 2]> = a
            .coords
            .iter()
            .zip(&b.coords)
            .map(|(ya, yb)| [yb[0] - ya[0], yb[1] - ya[1]])
            .collect();
        let fd = tsne_dynamics::theory::repulsion_forces_from_displacement(
            &a.coords,
            &run.labels,
            run.params.h_prime,
            &displacement,
        );
        for i in 0..a.coords.len() {
            let mut total = [0.0, 0.0];
            for r in 0..run.labels.r {
                total[0] += fd.forces[i][r][0];
                total[1] += fd.forces[i][r][1];
            }
            for d in 0..2 {
                let recon = a.coords[i][d] + total[d] + fd.residual[i][d];
                assert!(
                    (recon - b.coords[i][d]).abs() <= 1e-12,
                    "identity residual at k = {}, point {i}",
                    b.k
                );
            }
        }
        checked += 1;
    }
    assert!(checked > 0);
    pass(&format!(
        "9a (decomposition identity <= 1e-12 over {checked} amplification steps)"
    ));
}

/// EXPECTED RED. The pinned bound presumes the asymptotic regime
/// (`n^2 ||P*||_inf` bounded, diam = o(1) throughout the window, cluster
/// centers well separated). On the reference model `n^2 ||P||_inf` is
/// ~n/perplexity = 10, the detected amplification phase runs to diameters
/// of order 10 where the residual grows like diam^2, and rho^2 = p leaves
/// cross-cluster attraction at within-cluster strength; measured maxima are
/// 25-60. The regime-valid check lives in
/// `pipeline::forces_in_the_valid_regime`.
#[test]
fn criterion_09b_force_residual_bound() {
    let run = preset_run(0);
    let trace = amplification_trace(&run.traj);
    let series = force_residual(&run.traj, &run.labels, run.params.h_prime);
    let max_ratio = series
        .iter()
        .filter(|(k, _)| trace.phase_boundary.map(|b| *k < b).unwrap_or(true))
        .map(|(_, f)| f.value().unwrap_or(f64::INFINITY))
        .fold(0.0f64, f64::max);
    if max_ratio >= 0.2 {
        println!("acceptance 9b (force residual < 0.2): FAIL ({max_ratio:.2})");
    }
    assert!(
        max_ratio < 0.2,
        "max force residual over the amplification phase: {max_ratio:.2} \
         (O(diam^2) error plus within-strength cross attraction at rho^2 = p)"
    );
    pass(&format!(
        "9b (force residual {max_ratio:.3} < 0.2 over the amplification phase)"
    ));
}

// --- criterion 10 ------------------------------------------------------------

#[test]
fn criterion_10_normalizations_and_dual_oracles() {
    // Normalizations.
    let data = gmm_instance(40, 10, 90.0, 2);
    let p = affinity_from_data(&data.data, 8.0).unwrap();
    let total_p: f64 = (0..40)
        .flat_map(|i| (0..40).map(move |j| (i, j)))
        .map(|(i, j)| p.get(i, j))
        .sum();
    assert!((total_p - 1.0).abs() <= 1e-10);

    let state = init_random(40, 0.3, 5).unwrap();
    let q = q_matrix(&state.coords).unwrap();
    let total_q: f64 = (0..40)
        .flat_map(|i| (0..40).map(move |j| (i, j)))
        .map(|(i, j)| q.get(i, j))
        .sum();
    assert!((total_q - 1.0).abs() <= 1e-10);

    // Laplacian row sums.
    let l = laplacian(p.matrix());
    for i in 0..40 {
        let s: f64 = l.row(i).iter().sum();
        assert!(s.abs() <= 1e-12, "row {i} sums to {s}");
    }

    // Matrix form vs per-point form.
    let stepped = ee_step(&state, &p, 4.0, 0.5).unwrap();
    let s = s_matrix(&p, &state.coords, 4.0);
    for i in 0..40 {
        let mut acc = [0.0, 0.0];
        for j in 0..40 {
            if j != i {
                let sij = s.get(i, j);
                for d in 0..2 {
                    acc[d] += sij * (state.coords[j][d] - state.coords[i][d]);
                }
            }
        }
        for d in 0..2 {
            let pointwise = state.coords[i][d] + 0.5 * acc[d];
            assert!(
                (stepped.coords[i][d] - pointwise).abs() <= 1e-10,
                "step mismatch at point {i}"
            );
        }
    }

    // Gradient flow vs truncated series on n <= 15.
    let p_small = random_affinity(12, 9);
    let y0 = [
        SplitMix64::split(1, 0).normals(12),
        SplitMix64::split(1, 1).normals(12),
    ];
    let (alpha, t) = (2.0, 0.4);
    let flow = gradient_flow(&p_small, alpha, &y0, t).unwrap();
    let m = laplacian(&exaggerated_adjacency(p_small.matrix(), alpha));
    for l in 0..2 {
        let mut total = y0[l].clone();
        let mut term = y0[l].clone();
        for k in 1..=60 {
            let mv = m.matvec(&term);
            term = mv.iter().map(|x| -t * x / k as f64).collect();
            for (tot, &v) in total.iter_mut().zip(&term) {
                *tot += v;
            }
        }
        for i in 0..12 {
            assert!(
                (flow[l][i] - total[i]).abs() <= 1e-8,
                "flow vs series at column {l}, entry {i}"
            );
        }
    }
    pass("10 (normalizations 1e-10, Laplacian rows 1e-12, step forms 1e-10, flow vs series 1e-8)");
}

// --- criterion 11 ------------------------------------------------------------

#[test]
fn criterion_11_artifact_determinism() {
    use tsne_dynamics::experiment::{cmd_compare, cmd_run, DataSource, ExperimentConfig};

    let base = std::env::temp_dir().join("tsne_dynamics_acceptance_determinism");
    let _ = std::fs::remove_dir_all(&base);
    let mut config = ExperimentConfig::new(DataSource::PresetGmm { n: 40 });
    config.perplexity = 10.0;
    config.overrides.k0 = Some(5);
    config.overrides.k1 = Some(10);
    config.seed = 3;
    config.stride = 1;

    let mut outputs: Vec<Vec<(String, Vec<u8>)>> = Vec::new();
    for round in 0..2 {
        let dir = base.join(format!("round{round}"));
        config.out_dir = dir.clone();
        cmd_run(&config).unwrap();
        cmd_compare(&config).unwrap();
        let mut files: Vec<(String, Vec<u8>)> = std::fs::read_dir(&dir)
            .unwrap()
            .map(|e| {
                let e = e.unwrap();
                (
                    e.file_name().to_string_lossy().to_string(),
                    std::fs::read(e.path()).unwrap(),
                )
            })
            .collect();
        files.sort();
        outputs.push(files);
    }
    assert_eq!(
        outputs[0].len(),
        6,
        "expected six artifacts (run: 4, compare: 2)"
    );
    for ((name_a, bytes_a), (name_b, bytes_b)) in outputs[0].iter().zip(&outputs[1]) {
        assert_eq!(name_a, name_b);
        assert_eq!(
            bytes_a, bytes_b,
            "artifact {name_a} differs between identical invocations"
        );
    }
    let _ = std::fs::remove_dir_all(&base);
    pass("11 (byte-identical artifacts across repeated cmd_run / cmd_compare)");
}
