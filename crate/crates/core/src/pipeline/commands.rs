//! The five pipeline stages behind the CLI subcommands.
//!
//! Each stage is deterministic given the config and master seed: synthesis
//! seeds derive from `(master, class, index)`, augmentation from
//! `(master, image, variant)`, splits and training from their own domain
//! tags. Rerunning any stage with the same inputs rewrites byte-identical
//! outputs.

use std::path::{Path, PathBuf};

use rayon::prelude::*;

use crate::dsp::{render_spectrogram, stft, to_db};
use crate::error::{Error, Result};
use crate::imaging::{augment, enhance_contrast, read_pgm, resize_bilinear, write_pgm, GrayImage};
use crate::metrics::{report, ClassMetrics, ConfusionMatrix};
use crate::nn::{
    load_checkpoint, predict, reference_model_spec, save_checkpoint, train, LabeledSet, Network,
    TrainHistory,
};
use crate::pipeline::manifest::{Manifest, ManifestEntry, Origin, SplitSet};
use crate::pipeline::PipelineConfig;
use crate::synth::{synthesize_return, write_iq_file, Material};

pub const ORIGINALS_CSV: &str = "originals.csv";
pub const MANIFEST_CSV: &str = "manifest.csv";
pub const CHECKPOINT_FILE: &str = "model.ckpt";
pub const HISTORY_CSV: &str = "history.csv";
pub const METRICS_CSV: &str = "metrics.csv";
pub const CONFUSION_CSV: &str = "confusion.csv";

fn require_file(path: &Path, hint: &str) -> Result<()> {
    if path.is_file() {
        Ok(())
    } else {
        Err(Error::precondition(format!(
            "{} not found at {}; {hint}",
            path.file_name().map_or_else(String::new, |n| n.to_string_lossy().into_owned()),
            path.display()
        )))
    }
}

fn class_names() -> Vec<String> {
    Material::ALL.iter().map(|m| m.name().to_string()).collect()
}

fn original_stem(material: Material, index: usize) -> String {
    format!("{}_{index:02}", material.name().to_lowercase())
}

/// Synthesizes the per-class IQ returns and their spectrogram images.
///
/// Writes `iq/<class>_<n>.iq`, `originals/<class>_<n>.pgm` (rendered at the
/// native STFT size, contrast equalized, then resized square), and the
/// manifest skeleton `originals.csv`.
pub fn cmd_synth(cfg: &PipelineConfig) -> Result<Manifest> {
    cfg.validate()?;
    let radar = cfg.radar()?;
    let out = &cfg.out_dir;
    std::fs::create_dir_all(out.join("iq"))?;
    std::fs::create_dir_all(out.join("originals"))?;

    let jobs: Vec<(Material, usize)> = Material::ALL
        .iter()
        .flat_map(|&m| (0..cfg.originals_per_class).map(move |i| (m, i)))
        .collect();

    let rendered: Vec<(crate::synth::IQSignal, GrayImage)> = jobs
        .par_iter()
        .map(|&(material, index)| {
            let profile = &cfg.materials[material.index()];
            let signal = synthesize_return(
                profile,
                &radar,
                cfg.duration_s,
                cfg.synth_seed(material, index),
            )?;
            let spectrogram = stft(&signal, &cfg.stft)?;
            let db = to_db(&spectrogram, cfg.floor_db)?;
            let native = render_spectrogram(&db, db.cols, db.rows, cfg.floor_db)?;
            let enhanced = enhance_contrast(&native);
            let image =
                resize_bilinear(&enhanced, cfg.spectrogram_size, cfg.spectrogram_size)?;
            Ok((signal, image))
        })
        .collect::<Result<Vec<_>>>()?;

    let mut manifest = Manifest::default();
    for ((material, index), (signal, image)) in jobs.iter().zip(&rendered) {
        let stem = original_stem(*material, *index);
        write_iq_file(&out.join("iq").join(format!("{stem}.iq")), signal)?;
        let rel_path = format!("originals/{stem}.pgm");
        write_pgm(&out.join(&rel_path), image)?;
        manifest.entries.push(ManifestEntry {
            path: rel_path,
            material: *material,
            origin: Origin::Original,
            split: SplitSet::Unassigned,
            resolution: cfg.spectrogram_size,
        });
    }
    manifest.write(&out.join(ORIGINALS_CSV))?;
    Ok(manifest)
}

/// Augments the originals into the full dataset and assigns the split.
///
/// Each original yields `per_original` variants cycling through the output
/// resolutions; rows are grouped per original and the split is stratified
/// per class unless configured otherwise.
pub fn cmd_dataset(cfg: &PipelineConfig) -> Result<Manifest> {
    cfg.validate()?;
    let out = &cfg.out_dir;
    let skeleton_path = out.join(ORIGINALS_CSV);
    require_file(&skeleton_path, "run `synth` first")?;
    let skeleton = Manifest::read(&skeleton_path)?;
    if skeleton.entries.is_empty() {
        return Err(Error::precondition("originals manifest is empty".to_string()));
    }

    let originals: Vec<(ManifestEntry, GrayImage)> = skeleton
        .entries
        .iter()
        .map(|entry| {
            let path = out.join(&entry.path);
            require_file(&path, "run `synth` first")?;
            Ok((entry.clone(), read_pgm(&path)?))
        })
        .collect::<Result<Vec<_>>>()?;

    let aug_spec = cfg.resolved_augmentation();
    let variants: Vec<Vec<GrayImage>> = originals
        .par_iter()
        .enumerate()
        .map(|(parent, (_, image))| augment(image, &aug_spec, parent as u64))
        .collect::<Result<Vec<_>>>()?;

    std::fs::create_dir_all(out.join("dataset"))?;
    let mut manifest = Manifest::default();
    for (parent, ((entry, _), images)) in originals.iter().zip(&variants).enumerate() {
        manifest.entries.push(entry.clone());
        let parent_stem = Path::new(&entry.path)
            .file_stem()
            .map_or_else(String::new, |s| s.to_string_lossy().into_owned());
        for (variant, image) in images.iter().enumerate() {
            let rel_path = format!("dataset/{parent_stem}_aug{variant:02}.pgm");
            write_pgm(&out.join(&rel_path), image)?;
            manifest.entries.push(ManifestEntry {
                path: rel_path,
                material: entry.material,
                origin: Origin::Augmented { parent, variant },
                split: SplitSet::Unassigned,
                resolution: image.width(),
            });
        }
    }
    manifest.assign_splits(&cfg.split, cfg.master_seed)?;
    manifest.write(&out.join(MANIFEST_CSV))?;
    Ok(manifest)
}

fn load_split(cfg: &PipelineConfig, manifest: &Manifest, split: SplitSet) -> Result<LabeledSet> {
    let mut items = Vec::new();
    for entry in manifest.entries_in(split) {
        let path = cfg.out_dir.join(&entry.path);
        require_file(&path, "rerun `dataset`")?;
        items.push((read_pgm(&path)?, entry.material.index()));
    }
    LabeledSet::from_images(&items, cfg.canonical_input)
}

/// Trains the reference classifier on the manifest's train/val splits and
/// writes `model.ckpt` plus `history.csv`.
pub fn cmd_train(cfg: &PipelineConfig) -> Result<(Network, TrainHistory)> {
    cfg.validate()?;
    let out = &cfg.out_dir;
    let manifest_path = out.join(MANIFEST_CSV);
    require_file(&manifest_path, "run `dataset` first")?;
    let manifest = Manifest::read(&manifest_path)?;

    let train_set = load_split(cfg, &manifest, SplitSet::Train)?;
    let val_set = load_split(cfg, &manifest, SplitSet::Val)?;
    if train_set.is_empty() || val_set.is_empty() {
        return Err(Error::precondition(
            "manifest has an empty train or val split".to_string(),
        ));
    }

    let spec = reference_model_spec(cfg.canonical_input);
    let (net, history) = train(&spec, &train_set, &val_set, &cfg.resolved_train())?;
    save_checkpoint(&out.join(CHECKPOINT_FILE), &net)?;
    std::fs::write(out.join(HISTORY_CSV), history.to_csv())?;
    Ok((net, history))
}

/// Evaluates a checkpoint on the manifest's test split and writes
/// `metrics.csv` and `confusion.csv`.
pub fn cmd_eval(cfg: &PipelineConfig, checkpoint: Option<&Path>) -> Result<ClassMetrics> {
    cfg.validate()?;
    let out = &cfg.out_dir;
    let checkpoint_path = checkpoint
        .map(Path::to_path_buf)
        .unwrap_or_else(|| out.join(CHECKPOINT_FILE));
    require_file(&checkpoint_path, "run `train` first")?;
    let net = load_checkpoint(&checkpoint_path)?;
    if net.num_classes() != Material::ALL.len() {
        return Err(Error::format(format!(
            "checkpoint classifies {} classes, pipeline needs {}",
            net.num_classes(),
            Material::ALL.len()
        )));
    }

    let manifest_path = out.join(MANIFEST_CSV);
    require_file(&manifest_path, "run `dataset` first")?;
    let manifest = Manifest::read(&manifest_path)?;
    let test_entries = manifest.entries_in(SplitSet::Test);
    if test_entries.is_empty() {
        return Err(Error::precondition("manifest has no test split".to_string()));
    }

    let mut matrix = ConfusionMatrix::new(class_names())?;
    for entry in test_entries {
        let path = out.join(&entry.path);
        require_file(&path, "rerun `dataset`")?;
        let image = read_pgm(&path)?;
        let (predicted, _) = predict(&net, &image)?;
        matrix.record(entry.material.index(), predicted)?;
    }
    let metrics = report(&matrix)?;
    std::fs::write(out.join(METRICS_CSV), metrics.to_csv())?;
    std::fs::write(out.join(CONFUSION_CSV), matrix.to_csv())?;
    Ok(metrics)
}

/// Renders accuracy and loss charts from a history CSV.
pub fn cmd_report(history_path: &Path, out_dir: &Path) -> Result<(PathBuf, PathBuf)> {
    require_file(history_path, "run `train` first")?;
    let text = std::fs::read_to_string(history_path)?;
    let history = TrainHistory::from_csv(&text)?;
    let (accuracy, loss) = crate::pipeline::plot::render_history_charts(&history)?;
    std::fs::create_dir_all(out_dir)?;
    let accuracy_path = out_dir.join("accuracy.pgm");
    let loss_path = out_dir.join("loss.pgm");
    write_pgm(&accuracy_path, &accuracy)?;
    write_pgm(&loss_path, &loss)?;
    Ok((accuracy_path, loss_path))
}
