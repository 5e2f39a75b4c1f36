use std::fmt;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use rand::Rng;
use rand_distr::{Distribution, Normal};

use super::TrainConfig;
use crate::error::{Error, Result};
use crate::geometry::{mat_vec, uniform_rotation, Mat3};
use crate::pooling::format::read_hierarchy_file;
use crate::multigraph::graph_from_structure;
use crate::pooling::{build_hierarchy, GraphHierarchy};
use crate::structure::ProteinStructure;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Split {
    Train,
    Valid,
    Test,
}

impl Split {
    pub fn name(self) -> &'static str {
        match self {
            Split::Train => "train",
            Split::Valid => "valid",
            Split::Test => "test",
        }
    }
}

impl fmt::Display for Split {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Split {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "train" => Ok(Split::Train),
            "valid" => Ok(Split::Valid),
            "test" => Ok(Split::Test),
            _ => Err(Error::InvalidArgument(format!("unknown split `{s}`"))),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ManifestEntry {
    pub path: PathBuf,
    pub label: usize,
    pub split: Split,
}

/// `path<TAB>label_id<TAB>split` lines; label names live in `<manifest>.labels`, one per line.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct DatasetManifest {
    pub entries: Vec<ManifestEntry>,
    pub label_names: Vec<String>,
}

impl DatasetManifest {
    pub fn validate(&self) -> Result<()> {
        if let Some(e) = self.entries.iter().find(|e| e.label >= self.label_names.len()) {
            return Err(Error::InvalidArgument(format!(
                "{}: label {} but only {} label names",
                e.path.display(),
                e.label,
                self.label_names.len()
            )));
        }
        Ok(())
    }

    pub fn split(&self, split: Split) -> impl Iterator<Item = &ManifestEntry> {
        self.entries.iter().filter(move |e| e.split == split)
    }

    /// Entries of every split a training run needs, failing on the first empty one.
    pub fn require_splits(&self, splits: &[Split]) -> Result<()> {
        for &s in splits {
            if self.split(s).next().is_none() {
                return Err(Error::Config(format!("manifest has no `{s}` entries")));
            }
        }
        Ok(())
    }
}

fn labels_path(manifest: &Path) -> PathBuf {
    let mut s = manifest.as_os_str().to_owned();
    s.push(".labels");
    PathBuf::from(s)
}

/// Reads a manifest; relative paths resolve against the manifest's directory.
pub fn read_manifest(path: &Path) -> Result<DatasetManifest> {
    let text = std::fs::read_to_string(path)?;
    let base = path.parent().unwrap_or(Path::new(""));
    let mut entries = Vec::new();
    for (i, line) in text.lines().enumerate() {
        if line.trim().is_empty() || line.starts_with('#') {
            continue;
        }
        let fields: Vec<&str> = line.split('\t').collect();
        let parse_err = |msg: String| Error::Parse { line: i + 1, msg };
        if fields.len() != 3 {
            return Err(parse_err(format!("expected 3 tab-separated fields, found {}", fields.len())));
        }
        let label = fields[1]
            .trim()
            .parse()
            .map_err(|_| parse_err(format!("invalid label id `{}`", fields[1])))?;
        let split = fields[2].trim().parse().map_err(|e: Error| parse_err(e.to_string()))?;
        let p = PathBuf::from(fields[0]);
        entries.push(ManifestEntry {
            path: if p.is_absolute() { p } else { base.join(p) },
            label,
            split,
        });
    }
    let label_names = match std::fs::read_to_string(labels_path(path)) {
        Ok(t) => t.lines().map(|l| l.trim().to_string()).filter(|l| !l.is_empty()).collect(),
        Err(e) if e.kind() == std::io::ErrorKind::NotFound => {
            let n = entries.iter().map(|e| e.label + 1).max().unwrap_or(0);
            (0..n).map(|i| i.to_string()).collect()
        }
        Err(e) => return Err(e.into()),
    };
    let m = DatasetManifest { entries, label_names };
    m.validate()?;
    Ok(m)
}

/// Writes the manifest and its label sidecar. Paths are written as given.
pub fn write_manifest(path: &Path, manifest: &DatasetManifest) -> Result<()> {
    let mut text = String::new();
    for e in &manifest.entries {
        text.push_str(&format!("{}\t{}\t{}\n", e.path.display(), e.label, e.split));
    }
    std::fs::write(path, text)?;
    let labels: String = manifest.label_names.iter().map(|l| format!("{l}\n")).collect();
    std::fs::write(labels_path(path), labels)?;
    Ok(())
}

#[derive(Debug, Clone, PartialEq)]
pub struct Example {
    pub id: String,
    pub hierarchy: GraphHierarchy,
    pub label: usize,
}

impl Example {
    /// Builds the graph and pooling hierarchy of `structure`.
    pub fn from_structure(structure: &ProteinStructure, label: usize, interchain_hbonds: bool) -> Result<Example> {
        let graph = graph_from_structure(structure, interchain_hbonds)?;
        Ok(Example {
            id: structure.source_id.clone(),
            hierarchy: build_hierarchy(structure, &graph)?,
            label,
        })
    }
}

/// Loads every entry of `split`, in manifest order.
pub fn load_dataset(manifest: &DatasetManifest, split: Split) -> Result<Vec<Example>> {
    manifest
        .split(split)
        .map(|e| {
            let hierarchy = read_hierarchy_file(&e.path).map_err(|err| match err {
                Error::Io(io) => Error::Io(std::io::Error::new(io.kind(), format!("{}: {io}", e.path.display()))),
                other => Error::Format(format!("{}: {other}", e.path.display())),
            })?;
            let id = e
                .path
                .file_stem()
                .map(|s| s.to_string_lossy().into_owned())
                .unwrap_or_default();
            Ok(Example {
                id,
                hierarchy,
                label: e.label,
            })
        })
        .collect()
}

/// Random rotation, per-axis scaling and Gaussian coordinate noise, propagated to every level.
pub fn augment<R: Rng>(hierarchy: &GraphHierarchy, config: &TrainConfig, rng: &mut R) -> Result<GraphHierarchy> {
    let rot = uniform_rotation(rng.random(), rng.random(), rng.random());
    let (lo, hi) = config.axis_scale_range;
    let scale: [f64; 3] = std::array::from_fn(|_| if hi > lo { rng.random_range(lo..=hi) } else { lo });
    transform_coordinates(hierarchy, &rot, scale, config.coord_noise_sigma, rng)
}

/// `positions <- rot * diag(scale) * positions + eps` with `eps ~ N(0, sigma^2)` per coordinate.
pub fn transform_coordinates<R: Rng>(
    hierarchy: &GraphHierarchy,
    rot: &Mat3,
    scale: [f64; 3],
    sigma: f64,
    rng: &mut R,
) -> Result<GraphHierarchy> {
    let noise = Normal::new(0.0, sigma).map_err(|e| Error::InvalidArgument(e.to_string()))?;
    let moved: Vec<[f32; 3]> = hierarchy.levels[0]
        .positions
        .iter()
        .map(|p| {
            let s = [f64::from(p[0]) * scale[0], f64::from(p[1]) * scale[1], f64::from(p[2]) * scale[2]];
            let r = mat_vec(rot, s);
            std::array::from_fn(|k| {
                let eps = if sigma > 0.0 { noise.sample(rng) } else { 0.0 };
                (r[k] + eps) as f32
            })
        })
        .collect();
    hierarchy.with_atom_positions(&moved)
}
