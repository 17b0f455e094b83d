//! Run the pipeline on IDX-format image data (the MNIST file layout).
//! Pass the image and label files to reproduce the reference protocol
//! (digits 2/4/6/8, 400 images each, about a minute in release mode):
//!
//!     cargo run --release --example mnist_idx -- train-images-idx3-ubyte train-labels-idx1-ubyte
//!
//! Without arguments a small synthetic IDX pair is written and loaded
//! instead, which exercises the same code path end to end.

use tsne_dynamics::affinity::affinity_from_data;
use tsne_dynamics::datagen::{
    gmm_preset, load_idx, write_idx, IdxContent, ImageSet, LabeledData,
};
use tsne_dynamics::diagnostics::separation_ratio;
use tsne_dynamics::engine::{run, InitMode};
use tsne_dynamics::plot::render_svg;
use tsne_dynamics::spectral::ComponentLabels;
use tsne_dynamics::theory::stabilized_theory_tuning;

fn synthesize_idx_pair() -> tsne_dynamics::Result<(std::path::PathBuf, std::path::PathBuf)> {
    // Encode a small labeled mixture as 6x6 "images".
    let data = gmm_preset(240, 8)?;
    let pixels: Vec<f64> = data
        .data
        .as_slice()
        .iter()
        .map(|&v| ((v + 12.0) / 24.0).clamp(0.0, 1.0))
        .collect();
    let images = IdxContent::Images(ImageSet {
        count: 240,
        rows: 10,
        cols: 10,
        pixels,
    });
    let labels = IdxContent::Labels(data.labels.iter().map(|&l| l as u8).collect());
    let dir = std::env::temp_dir();
    let img_path = dir.join("synthetic-images-idx3-ubyte");
    let lbl_path = dir.join("synthetic-labels-idx1-ubyte");
    write_idx(&images, &img_path)?;
    write_idx(&labels, &lbl_path)?;
    Ok((img_path, lbl_path))
}

fn main() -> tsne_dynamics::Result<()> {
    let args: Vec<String> = std::env::args().skip(1).collect();
    let (img_path, lbl_path, digits, per_digit) = match args.as_slice() {
        [img, lbl] => (img.into(), lbl.into(), vec![2usize, 4, 6, 8], 400),
        _ => {
            let (img, lbl) = synthesize_idx_pair()?;
            println!("no files given; using a synthetic IDX pair");
            (img, lbl, vec![0usize, 1, 2, 3], 12)
        }
    };

    let images = match load_idx(&img_path)? {
        IdxContent::Images(set) => set,
        IdxContent::Labels(_) => panic!("{} holds labels", img_path.display()),
    };
    let labels = match load_idx(&lbl_path)? {
        IdxContent::Labels(ls) => ls,
        IdxContent::Images(_) => panic!("{} holds images", lbl_path.display()),
    };
    println!(
        "loaded {} images of {}x{} pixels",
        images.count, images.rows, images.cols
    );

    let matrix = images.to_data_matrix()?;
    let raw: Vec<usize> = labels.iter().map(|&b| b as usize).collect();
    let comp = ComponentLabels::from_labels(&raw);
    let all = LabeledData::new(matrix, comp.labels.clone(), comp.r, None)?;

    // Seeded random subsample per class; chosen indices are reproducible.
    let keep: Vec<usize> = digits
        .iter()
        .filter_map(|&d| raw.iter().position(|&l| l == d).map(|i| comp.labels[i]))
        .collect();
    let (subset, chosen) = all.subsample_per_label(&keep, per_digit, 42)?;
    println!(
        "subsampled {} points ({} per class); first indices {:?}",
        subset.n(),
        per_digit,
        &chosen[..4.min(chosen.len())]
    );

    let p = affinity_from_data(&subset.data, 30.0)?;
    let mut params = stabilized_theory_tuning(subset.n(), 2.0 / 3.0, 30.0, &p)?;
    params.seed = 42;
    let traj = run(&p, &params, InitMode::Random)?;
    println!(
        "final separation ratio: {:?}",
        separation_ratio(
            &traj.final_snapshot().coords,
            &subset.component_labels()
        )
    );
    let out = std::env::temp_dir().join("idx_embedding.svg");
    render_svg(&traj.final_snapshot().coords, Some(&subset.labels), &out)?;
    println!("wrote {}", out.display());
    Ok(())
}
