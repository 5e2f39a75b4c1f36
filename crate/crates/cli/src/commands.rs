use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use rayon::prelude::*;
use serde_json::json;

use ieprot::net::{embed_protein, load_checkpoint, prepare_protein, ModelConfig};
use ieprot::pooling::format::{read_hierarchy_file, write_hierarchy_file};
use ieprot::train::{
    evaluate, load_dataset, prepare_examples, read_manifest, write_manifest, DatasetManifest, Example, ManifestEntry,
    RunConfig, Split,
};
use ieprot::{parse_pdb, Error};

pub const USAGE: u8 = 2;
pub const DATA: u8 = 3;
pub const NUMERIC: u8 = 4;

#[derive(Debug)]
pub struct Failure {
    pub code: u8,
    pub message: String,
}

impl Failure {
    fn new(code: u8, message: impl Into<String>) -> Self {
        Failure {
            code,
            message: message.into(),
        }
    }
}

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        let code = match e {
            Error::Config(_) | Error::InvalidArgument(_) => USAGE,
            Error::NonFinite(_) => NUMERIC,
            _ => DATA,
        };
        Failure::new(code, e.to_string())
    }
}

type CliResult<T = ()> = Result<T, Failure>;

fn context(what: &Path) -> impl FnOnce(Error) -> Failure + '_ {
    move |e| {
        let f = Failure::from(e);
        Failure::new(f.code, format!("{}: {}", what.display(), f.message))
    }
}

fn is_pdb(path: &Path) -> bool {
    path.extension()
        .and_then(|e| e.to_str())
        .is_some_and(|e| matches!(e.to_ascii_lowercase().as_str(), "pdb" | "ent"))
}

fn preprocess_one(path: &Path, out_dir: &Path, interchain: bool) -> Result<PathBuf, Error> {
    let bytes = std::fs::read(path)?;
    let mut structure = parse_pdb(&bytes)?;
    let stem = path.file_stem().map(|s| s.to_string_lossy().into_owned()).unwrap_or_default();
    structure.source_id = stem.clone();
    let example = Example::from_structure(&structure, 0, interchain)?;
    let target = out_dir.join(format!("{stem}.iecg"));
    write_hierarchy_file(&target, &example.hierarchy)?;
    Ok(target)
}

pub fn preprocess(input: &Path, out: &Path, manifest: &Path, interchain: bool) -> CliResult {
    let listing = std::fs::read_dir(input)
        .map_err(|e| Failure::new(USAGE, format!("cannot read input directory {}: {e}", input.display())))?;
    let mut files: Vec<PathBuf> = listing
        .filter_map(|entry| entry.ok().map(|e| e.path()))
        .filter(|p| p.is_file() && is_pdb(p))
        .collect();
    files.sort();
    std::fs::create_dir_all(out).map_err(|e| Failure::new(DATA, format!("{}: {e}", out.display())))?;

    let results: Vec<Result<PathBuf, Error>> = files.par_iter().map(|p| preprocess_one(p, out, interchain)).collect();
    let mut entries = Vec::new();
    let mut skipped = 0;
    for (file, result) in files.iter().zip(results) {
        match result {
            Ok(target) => entries.push(ManifestEntry {
                path: std::path::absolute(&target).unwrap_or(target),
                label: 0,
                split: Split::Train,
            }),
            Err(e) => {
                skipped += 1;
                log::warn!("skipping {}: {e}", file.display());
            }
        }
    }
    println!("parsed {} skipped {skipped}", entries.len());
    if entries.is_empty() {
        return Err(Failure::new(DATA, format!("no usable PDB files in {}", input.display())));
    }
    let m = DatasetManifest {
        entries,
        label_names: vec!["unlabeled".into()],
    };
    write_manifest(manifest, &m).map_err(context(manifest))?;
    Ok(())
}

pub struct TrainArgs {
    pub manifest: PathBuf,
    pub config: Option<PathBuf>,
    pub out: PathBuf,
    pub seed: Option<u64>,
    pub epochs: Option<usize>,
    pub workers: Option<usize>,
    pub settings: Vec<String>,
}

fn resolve_run(args: &TrainArgs, classes: usize) -> CliResult<RunConfig> {
    let mut run = RunConfig::default();
    run.model.num_classes = classes;
    if let Some(path) = &args.config {
        let text = std::fs::read_to_string(path).map_err(|e| Failure::new(USAGE, format!("{}: {e}", path.display())))?;
        run.overlay(&text).map_err(|e| Failure::new(USAGE, format!("{}: {e}", path.display())))?;
    }
    for s in &args.settings {
        let (k, v) = s
            .split_once('=')
            .ok_or_else(|| Failure::new(USAGE, format!("--set expects KEY=VALUE, got `{s}`")))?;
        run.set(k.trim(), v.trim()).map_err(|e| Failure::new(USAGE, e.to_string()))?;
    }
    if let Some(seed) = args.seed {
        run.train.seed = seed;
    }
    if let Some(epochs) = args.epochs {
        run.train.epochs = epochs;
    }
    if let Some(workers) = args.workers {
        run.train.workers = workers;
    }
    if run.model.num_classes != classes {
        return Err(Failure::new(
            USAGE,
            format!("num_classes = {} but the manifest defines {classes} labels", run.model.num_classes),
        ));
    }
    run.validate().map_err(|e| Failure::new(USAGE, e.to_string()))?;
    Ok(run)
}

pub fn train(args: &TrainArgs) -> CliResult {
    let manifest = read_manifest(&args.manifest).map_err(context(&args.manifest))?;
    manifest
        .require_splits(&[Split::Train, Split::Valid])
        .map_err(|e| Failure::new(USAGE, format!("{}: {e}", args.manifest.display())))?;
    let run = resolve_run(args, manifest.label_names.len())?;
    print!("{}", run.to_text());
    let train_set = load_dataset(&manifest, Split::Train)?;
    let valid_set = load_dataset(&manifest, Split::Valid)?;
    log::info!("training on {} proteins, validating on {}", train_set.len(), valid_set.len());
    let report = ieprot::train::train(&run, &train_set, &valid_set, Some(&args.out), &mut |_| true)?;
    println!(
        "best_epoch = {}\nbest_valid_accuracy = {}",
        report.best_epoch,
        report.best_valid_accuracy.map_or("-".to_string(), |a| format!("{a:.6}"))
    );
    Ok(())
}

fn parse_split(name: &str) -> CliResult<Split> {
    name.parse().map_err(|e: Error| Failure::new(USAGE, e.to_string()))
}

fn load_model(path: &Path) -> CliResult<(ModelConfig, ieprot::net::ModelParams<f32>)> {
    load_checkpoint(path).map_err(context(path))
}

pub fn eval(manifest_path: &Path, checkpoint: &Path, split: &str) -> CliResult {
    let split = parse_split(split)?;
    let manifest = read_manifest(manifest_path).map_err(context(manifest_path))?;
    let (config, params) = load_model(checkpoint)?;
    if manifest.label_names.len() > config.num_classes {
        return Err(Failure::new(
            DATA,
            format!("manifest has {} labels, the model {}", manifest.label_names.len(), config.num_classes),
        ));
    }
    let examples = load_dataset(&manifest, split)?;
    if examples.is_empty() {
        return Err(Failure::new(USAGE, format!("split `{split}` is empty")));
    }
    let prepared = prepare_examples(&examples, &config)?;
    let m = evaluate(&params, &config, &prepared)?;
    let present: Vec<f64> = m.per_class.iter().flatten().copied().collect();
    let per_class: Vec<_> = m
        .per_class
        .iter()
        .enumerate()
        .map(|(c, acc)| {
            let name = manifest.label_names.get(c).cloned().unwrap_or_else(|| c.to_string());
            json!({ "label": name, "accuracy": acc })
        })
        .collect();
    let report = json!({
        "split": split.name(),
        "count": m.count,
        "accuracy": m.accuracy,
        "mean_class_accuracy": present.iter().sum::<f64>() / present.len().max(1) as f64,
        "loss": m.loss,
        "per_class": per_class,
    });
    println!("{}", serde_json::to_string_pretty(&report).expect("metrics serialize"));
    Ok(())
}

pub fn embed(manifest_path: &Path, checkpoint: &Path, out: &Path, split: Option<&str>) -> CliResult {
    let manifest = read_manifest(manifest_path).map_err(context(manifest_path))?;
    let (config, params) = load_model(checkpoint)?;
    let splits = match split {
        Some(s) => vec![parse_split(s)?],
        None => vec![Split::Train, Split::Valid, Split::Test],
    };
    let mut examples = Vec::new();
    for s in splits {
        examples.extend(load_dataset(&manifest, s)?);
    }
    let vectors: Vec<Vec<f64>> = examples
        .par_iter()
        .map(|e| prepare_protein(&e.hierarchy, &config).and_then(|input| embed_protein(&input, &params, &config)))
        .collect::<Result<_, _>>()?;
    let mut text = String::new();
    for (e, v) in examples.iter().zip(&vectors) {
        text.push_str(&e.id);
        for x in v {
            let _ = write!(text, "\t{}", *x as f32);
        }
        text.push('\n');
    }
    std::fs::write(out, text).map_err(|e| Failure::new(DATA, format!("{}: {e}", out.display())))?;
    println!("wrote {} embeddings of length {} to {}", vectors.len(), config.widths()[4], out.display());
    Ok(())
}

pub fn inspect(path: &Path) -> CliResult {
    let h = read_hierarchy_file(path).map_err(context(path))?;
    let g = &h.levels[0];
    let defaults = ModelConfig::default();
    println!("file: {}", path.display());
    println!("atoms: {}", g.node_count());
    println!("feature columns: {}", g.feature_dim);
    println!("residues: {}", g.residue_count());
    println!("chains: {}", g.residue_chain.iter().max().map_or(0, |c| c + 1));
    for (l, level) in h.levels.iter().enumerate() {
        println!(
            "level {l}: {} nodes, {} covalent edges, {} covalent+hydrogen edges",
            level.node_count(),
            level.adj_a.edge_count(),
            level.adj_b.edge_count()
        );
    }
    println!("level sizes: {:?}", h.level_sizes());
    println!(
        "hop caps: covalent {}, hydrogen {} (model defaults)",
        defaults.hop_cap_covalent, defaults.hop_cap_hydrogen
    );
    println!("level radii: {:?}", defaults.level_radii);
    Ok(())
}
