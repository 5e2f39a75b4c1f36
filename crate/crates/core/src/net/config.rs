use std::fmt;
use std::str::FromStr;

use crate::error::{Error, Result};
use crate::multigraph::NeighborhoodVariant;

/// Which distances the kernel sees.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum ConvVariant {
    /// Extrinsic distance and both intrinsic distances.
    Ours,
    /// Extrinsic distance only.
    ExConv,
    /// Covalent hops only.
    InConvC,
    /// Hydrogen-bond hops only.
    InConvH,
    /// Both intrinsic distances.
    InConvCH,
    /// Normalized coordinate offsets plus both intrinsic distances.
    Ours3DCH,
}

impl ConvVariant {
    pub const ALL: [ConvVariant; 6] = [
        ConvVariant::Ours,
        ConvVariant::ExConv,
        ConvVariant::InConvC,
        ConvVariant::InConvH,
        ConvVariant::InConvCH,
        ConvVariant::Ours3DCH,
    ];

    pub fn kernel_inputs(self) -> usize {
        match self {
            ConvVariant::Ours3DCH => 5,
            _ => 3,
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            ConvVariant::Ours => "ours",
            ConvVariant::ExConv => "exconv",
            ConvVariant::InConvC => "inconv-c",
            ConvVariant::InConvH => "inconv-h",
            ConvVariant::InConvCH => "inconv-ch",
            ConvVariant::Ours3DCH => "ours-3d-ch",
        }
    }
}

impl fmt::Display for ConvVariant {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for ConvVariant {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        ConvVariant::ALL
            .into_iter()
            .find(|v| v.name() == s)
            .ok_or_else(|| Error::Config(format!("unknown conv variant `{s}`")))
    }
}

pub(crate) fn neighborhood_name(v: NeighborhoodVariant) -> &'static str {
    match v {
        NeighborhoodVariant::Euclidean => "euclidean",
        NeighborhoodVariant::CovHops => "cov-hops",
        NeighborhoodVariant::HydHops => "hyd-hops",
    }
}

pub(crate) fn parse_neighborhood(s: &str) -> Result<NeighborhoodVariant> {
    [
        NeighborhoodVariant::Euclidean,
        NeighborhoodVariant::CovHops,
        NeighborhoodVariant::HydHops,
    ]
    .into_iter()
    .find(|&v| neighborhood_name(v) == s)
    .ok_or_else(|| Error::Config(format!("unknown neighborhood variant `{s}`")))
}

#[derive(Debug, Clone, PartialEq)]
pub struct ModelConfig {
    pub level_radii: [f64; 5],
    pub level_widths: [usize; 5],
    pub kernel_hidden: usize,
    pub conv_variant: ConvVariant,
    pub neighborhood_variant: NeighborhoodVariant,
    pub pooling_enabled: bool,
    pub width_scale: f64,
    pub head_hidden: usize,
    pub num_classes: usize,
    pub blocks_per_level: usize,
    pub hop_cap_covalent: u32,
    pub hop_cap_hydrogen: u32,
    pub dropout: f64,
    pub head_dropout: f64,
    pub init_seed: u64,
}

impl Default for ModelConfig {
    fn default() -> Self {
        ModelConfig {
            level_radii: [3.0, 6.0, 8.0, 12.0, 16.0],
            level_widths: [64, 128, 256, 512, 1024],
            kernel_hidden: 16,
            conv_variant: ConvVariant::Ours,
            neighborhood_variant: NeighborhoodVariant::Euclidean,
            pooling_enabled: true,
            width_scale: 1.0,
            head_hidden: 1024,
            num_classes: 2,
            blocks_per_level: 2,
            hop_cap_covalent: 6,
            hop_cap_hydrogen: 6,
            dropout: 0.2,
            head_dropout: 0.5,
            init_seed: 0,
        }
    }
}

fn scaled(w: usize, s: f64, multiple: usize) -> usize {
    let v = (w as f64 * s / multiple as f64).round() as usize * multiple;
    v.max(multiple)
}

impl ModelConfig {
    /// Level widths after `width_scale`, rounded to a positive multiple of 4.
    pub fn widths(&self) -> [usize; 5] {
        self.level_widths.map(|w| scaled(w, self.width_scale, 4))
    }

    pub fn head_width(&self) -> usize {
        scaled(self.head_hidden, self.width_scale, 1)
    }

    pub fn embedding_dim(&self) -> usize {
        self.widths()[4]
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |m: String| Err(Error::Config(m));
        if self.level_radii.iter().any(|r| r.is_nan() || *r <= 0.0) || self.level_radii.windows(2).any(|w| w[1] < w[0]) {
            return bad(format!("level_radii must be positive and ascending: {:?}", self.level_radii));
        }
        if self.level_widths.contains(&0) {
            return bad("level_widths must be positive".into());
        }
        if self.width_scale.is_nan() || self.width_scale <= 0.0 {
            return bad(format!("width_scale must be positive: {}", self.width_scale));
        }
        if self.kernel_hidden == 0 || self.head_hidden == 0 {
            return bad("hidden sizes must be positive".into());
        }
        if self.num_classes < 1 {
            return bad("num_classes must be at least 1".into());
        }
        if self.hop_cap_covalent < 1 || self.hop_cap_hydrogen < 1 {
            return bad("hop caps must be at least 1".into());
        }
        for (k, p) in [("dropout", self.dropout), ("head_dropout", self.head_dropout)] {
            if !(0.0..1.0).contains(&p) {
                return bad(format!("{k} must lie in [0, 1): {p}"));
            }
        }
        Ok(())
    }

    pub const KEYS: [&'static str; 15] = [
        "level_radii",
        "level_widths",
        "kernel_hidden",
        "conv_variant",
        "neighborhood_variant",
        "pooling_enabled",
        "width_scale",
        "head_hidden",
        "num_classes",
        "blocks_per_level",
        "hop_cap_covalent",
        "hop_cap_hydrogen",
        "dropout",
        "head_dropout",
        "init_seed",
    ];

    /// Applies one `key = value` setting; returns false for keys this config does not own.
    pub fn set(&mut self, key: &str, value: &str) -> Result<bool> {
        let err = |_| Error::Config(format!("invalid value `{value}` for `{key}`"));
        match key {
            "level_radii" => self.level_radii = parse_array(key, value)?,
            "level_widths" => self.level_widths = parse_array(key, value)?,
            "kernel_hidden" => self.kernel_hidden = value.parse().map_err(|e: std::num::ParseIntError| err(e.to_string()))?,
            "conv_variant" => self.conv_variant = value.parse()?,
            "neighborhood_variant" => self.neighborhood_variant = parse_neighborhood(value)?,
            "pooling_enabled" => self.pooling_enabled = parse_bool(key, value)?,
            "width_scale" => self.width_scale = parse_ratio(key, value)?,
            "head_hidden" => self.head_hidden = value.parse().map_err(|e: std::num::ParseIntError| err(e.to_string()))?,
            "num_classes" => self.num_classes = value.parse().map_err(|e: std::num::ParseIntError| err(e.to_string()))?,
            "blocks_per_level" => {
                self.blocks_per_level = value.parse().map_err(|e: std::num::ParseIntError| err(e.to_string()))?
            }
            "hop_cap_covalent" => {
                self.hop_cap_covalent = value.parse().map_err(|e: std::num::ParseIntError| err(e.to_string()))?
            }
            "hop_cap_hydrogen" => {
                self.hop_cap_hydrogen = value.parse().map_err(|e: std::num::ParseIntError| err(e.to_string()))?
            }
            "dropout" => self.dropout = value.parse().map_err(|e: std::num::ParseFloatError| err(e.to_string()))?,
            "head_dropout" => self.head_dropout = value.parse().map_err(|e: std::num::ParseFloatError| err(e.to_string()))?,
            "init_seed" => self.init_seed = value.parse().map_err(|e: std::num::ParseIntError| err(e.to_string()))?,
            _ => return Ok(false),
        }
        Ok(true)
    }

    pub fn to_text(&self) -> String {
        let join = |v: Vec<String>| v.join(",");
        let mut s = String::new();
        let mut line = |k: &str, v: String| s.push_str(&format!("{k} = {v}\n"));
        line("level_radii", join(self.level_radii.iter().map(|v| v.to_string()).collect()));
        line("level_widths", join(self.level_widths.iter().map(|v| v.to_string()).collect()));
        line("kernel_hidden", self.kernel_hidden.to_string());
        line("conv_variant", self.conv_variant.to_string());
        line("neighborhood_variant", neighborhood_name(self.neighborhood_variant).to_string());
        line("pooling_enabled", self.pooling_enabled.to_string());
        line("width_scale", self.width_scale.to_string());
        line("head_hidden", self.head_hidden.to_string());
        line("num_classes", self.num_classes.to_string());
        line("blocks_per_level", self.blocks_per_level.to_string());
        line("hop_cap_covalent", self.hop_cap_covalent.to_string());
        line("hop_cap_hydrogen", self.hop_cap_hydrogen.to_string());
        line("dropout", self.dropout.to_string());
        line("head_dropout", self.head_dropout.to_string());
        line("init_seed", self.init_seed.to_string());
        s
    }

    pub fn from_text(text: &str) -> Result<Self> {
        let mut cfg = ModelConfig::default();
        for (key, value) in parse_key_values(text)? {
            if !cfg.set(&key, &value)? {
                return Err(Error::Config(format!("unknown key `{key}`")));
            }
        }
        cfg.validate()?;
        Ok(cfg)
    }
}

/// Splits `key = value` lines, skipping blanks and `#` comments.
pub fn parse_key_values(text: &str) -> Result<Vec<(String, String)>> {
    let mut out = Vec::new();
    for (i, raw) in text.lines().enumerate() {
        let line = raw.split('#').next().unwrap_or("").trim();
        if line.is_empty() {
            continue;
        }
        let (k, v) = line
            .split_once('=')
            .ok_or_else(|| Error::Config(format!("line {}: expected `key = value`", i + 1)))?;
        out.push((k.trim().to_string(), v.trim().to_string()));
    }
    Ok(out)
}

pub(crate) fn parse_bool(key: &str, value: &str) -> Result<bool> {
    match value {
        "true" | "1" | "yes" => Ok(true),
        "false" | "0" | "no" => Ok(false),
        _ => Err(Error::Config(format!("invalid value `{value}` for `{key}`"))),
    }
}

/// A real number, also accepting `a/b`.
pub(crate) fn parse_ratio(key: &str, value: &str) -> Result<f64> {
    let err = || Error::Config(format!("invalid value `{value}` for `{key}`"));
    match value.split_once('/') {
        Some((a, b)) => {
            let (a, b): (f64, f64) = (a.trim().parse().map_err(|_| err())?, b.trim().parse().map_err(|_| err())?);
            Ok(a / b)
        }
        None => value.parse().map_err(|_| err()),
    }
}

fn parse_array<V: FromStr, const N: usize>(key: &str, value: &str) -> Result<[V; N]> {
    let err = || Error::Config(format!("`{key}` expects {N} comma-separated values, got `{value}`"));
    let items = value
        .split(',')
        .map(|s| s.trim().parse::<V>().map_err(|_| err()))
        .collect::<Result<Vec<_>>>()?;
    items.try_into().map_err(|_| err())
}
