//! Implementations of the pipeline subcommands.

use std::collections::BTreeMap;
use std::path::Path;

use lsdefect::annot::{parse_labelme, rasterize, ImageAnnotation};
use lsdefect::error::Error;
use lsdefect::eval::{evaluate, EvalSummary, GroundTruth};
use lsdefect::image::GrayImage;
use lsdefect::report::{write_report, ReportFiles, ReportInput};
use lsdefect::segment::{
    detect_instances, estimate_pattern, load_predictions, write_predictions, DefectInstance,
};
use lsdefect::synth::{generate_dataset, load_manifest, DatasetManifest, Split};
use rayon::prelude::*;

use crate::config::RunConfig;
use crate::CliError;

fn thread_pool(jobs: usize) -> Result<rayon::ThreadPool, CliError> {
    rayon::ThreadPoolBuilder::new()
        .num_threads(jobs)
        .build()
        .map_err(|e| CliError::Config(format!("cannot build thread pool: {e}")))
}

pub fn cmd_gen(config: &RunConfig, out_dir: &Path) -> Result<DatasetManifest, CliError> {
    let manifest = generate_dataset(&config.scene, &config.plan, out_dir)?;
    println!(
        "generated {} images under {} (seed {}, config {})",
        manifest.entries.len(),
        out_dir.display(),
        manifest.seed,
        manifest.config_hash
    );
    Ok(manifest)
}

fn read_split_annotations(
    data_dir: &Path,
    manifest: &DatasetManifest,
    split: Split,
) -> Result<Vec<ImageAnnotation>, CliError> {
    manifest
        .entries_for(split)
        .map(|entry| {
            let path = data_dir.join("annotations").join(format!("{}.json", entry.id));
            let text = std::fs::read_to_string(&path).map_err(|e| Error::io(&path, e))?;
            Ok(parse_labelme(&text)?)
        })
        .collect()
}

fn load_split_images(
    data_dir: &Path,
    manifest: &DatasetManifest,
    split: Split,
) -> Result<Vec<(String, GrayImage)>, CliError> {
    manifest
        .entries_for(split)
        .map(|entry| {
            let img = GrayImage::load_png(&data_dir.join(&entry.file))?;
            Ok((entry.id.clone(), img))
        })
        .collect()
}

pub fn cmd_detect(
    config: &RunConfig,
    data_dir: &Path,
    split: Split,
    out_file: &Path,
    jobs: usize,
) -> Result<usize, CliError> {
    let manifest = load_manifest(data_dir)?;
    let images = load_split_images(data_dir, &manifest, split)?;
    let pool = thread_pool(jobs)?;
    let detected: Vec<(String, Vec<DefectInstance>, usize)> = pool.install(|| {
        images
            .par_iter()
            .map(|(id, img)| {
                let model = estimate_pattern(img)?;
                let det = detect_instances(img, &model, &config.rules)?;
                Ok((id.clone(), det.instances, det.rejects.len()))
            })
            .collect::<Result<Vec<_>, Error>>()
    })?;
    let rejects: usize = detected.iter().map(|(_, _, r)| r).sum();
    if rejects > 0 {
        eprintln!("note: {rejects} residual components were unclassifiable and not reported");
    }
    let per_image: BTreeMap<String, Vec<DefectInstance>> = detected
        .into_iter()
        .map(|(id, instances, _)| (id, instances))
        .collect();
    let total: usize = per_image.values().map(Vec::len).sum();
    if let Some(parent) = out_file.parent() {
        if !parent.as_os_str().is_empty() {
            std::fs::create_dir_all(parent).map_err(|e| Error::io(parent, e))?;
        }
    }
    std::fs::write(out_file, write_predictions(&per_image))
        .map_err(|e| Error::io(out_file, e))?;
    println!(
        "detected {total} instances over {} {split} images -> {}",
        per_image.len(),
        out_file.display()
    );
    Ok(total)
}

pub fn cmd_eval(
    config: &RunConfig,
    data_dir: &Path,
    split: Split,
    pred_file: &Path,
    out_dir: &Path,
) -> Result<EvalSummary, CliError> {
    let manifest = load_manifest(data_dir)?;
    let annotations = read_split_annotations(data_dir, &manifest, split)?;
    let gt = GroundTruth::from_annotations(&annotations)?;
    let text = std::fs::read_to_string(pred_file).map_err(|e| Error::io(pred_file, e))?;
    let preds = load_predictions(&text)?;
    let summary = evaluate(&preds, &gt, &config.eval)?;

    std::fs::create_dir_all(out_dir).map_err(|e| Error::io(out_dir, e))?;
    let json_path = out_dir.join("eval.json");
    let json = serde_json::to_string_pretty(&summary).expect("summary serializes");
    std::fs::write(&json_path, json).map_err(|e| Error::io(&json_path, e))?;
    let table = summary.to_table();
    let table_path = out_dir.join("eval.txt");
    std::fs::write(&table_path, &table).map_err(|e| Error::io(&table_path, e))?;
    print!("{table}");
    Ok(summary)
}

/// Where `report` takes its instances from.
#[derive(Debug, Clone, Copy, PartialEq, Eq, clap::ValueEnum)]
pub enum ReportSource {
    /// A prediction file produced by `detect` (or an external model).
    Pred,
    /// The ground-truth annotations themselves.
    Gt,
}

pub fn cmd_report(
    data_dir: &Path,
    split: Split,
    source: ReportSource,
    pred_file: Option<&Path>,
    out_dir: &Path,
) -> Result<ReportFiles, CliError> {
    let manifest = load_manifest(data_dir)?;
    let images = load_split_images(data_dir, &manifest, split)?;

    let per_image: BTreeMap<String, Vec<DefectInstance>> = match source {
        ReportSource::Pred => {
            let path = pred_file.ok_or_else(|| {
                CliError::Config("--pred is required when --source is pred".into())
            })?;
            let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
            load_predictions(&text)?
        }
        ReportSource::Gt => {
            let annotations = read_split_annotations(data_dir, &manifest, split)?;
            let mut map = BTreeMap::new();
            for ann in &annotations {
                let mut instances = Vec::with_capacity(ann.instances.len());
                for inst in &ann.instances {
                    let mask = rasterize(&inst.polygon, ann.width, ann.height).mask;
                    instances.push(DefectInstance::from_mask(inst.class, 1.0, mask)?);
                }
                map.insert(ann.image_id.clone(), instances);
            }
            map
        }
    };

    let empty: Vec<DefectInstance> = Vec::new();
    let inputs: Vec<ReportInput<'_>> = images
        .iter()
        .map(|(id, img)| ReportInput {
            image_id: id,
            image: img,
            instances: per_image.get(id).map_or(&empty[..], Vec::as_slice),
        })
        .collect();
    let files = write_report(&inputs, out_dir)?;
    println!(
        "wrote {} with {} instance rows",
        files.csv_path.display(),
        files.instance_count
    );
    Ok(files)
}

/// Full pipeline: gen -> detect -> eval -> report under one output root.
pub fn cmd_all(
    config: &RunConfig,
    out_dir: &Path,
    split: Split,
    jobs: usize,
) -> Result<(), CliError> {
    let data_dir = out_dir.join("data");
    let pred_file = out_dir.join("predictions.jsonl");
    cmd_gen(config, &data_dir)?;
    cmd_detect(config, &data_dir, split, &pred_file, jobs)?;
    cmd_eval(config, &data_dir, split, &pred_file, &out_dir.join("eval"))?;
    cmd_report(
        &data_dir,
        split,
        ReportSource::Pred,
        Some(&pred_file),
        &out_dir.join("report"),
    )?;
    Ok(())
}
