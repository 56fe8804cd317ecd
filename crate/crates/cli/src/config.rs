//! Run configuration: a flat dotted-key JSON file overlaid by command-line
//! flags.

use std::path::{Path, PathBuf};

use anyhow::{bail, Context, Result};
use compgen::predictor::{FitConfig, IqrConfig, IqrSpace};
use compgen::retrieval::GalleryScope;
use serde::Serialize;
use serde_json::{Map, Value};

#[derive(Debug, Clone, Default, PartialEq, Serialize)]
pub struct Paths {
    pub corpus: Option<PathBuf>,
    pub vocab: Option<PathBuf>,
    pub exceptions: Option<PathBuf>,
    pub index: Option<PathBuf>,
    pub manifest: Option<PathBuf>,
    pub queries: Option<PathBuf>,
    pub gallery: Option<PathBuf>,
    pub outcomes: Option<PathBuf>,
    pub spec: Option<PathBuf>,
    pub out: Option<PathBuf>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RunConfig {
    pub paths: Paths,
    pub ks: Vec<usize>,
    pub iqr: IqrConfig,
    pub fit: FitConfig,
    /// Cutoff whose indicator the predictor is fitted on.
    pub fit_k: usize,
    pub gallery_scope: GalleryScope,
    /// Seed given explicitly on the command line or in the config file.
    pub seed_override: Option<u64>,
}

impl Default for RunConfig {
    fn default() -> Self {
        Self {
            paths: Paths::default(),
            ks: vec![1, 5, 10],
            iqr: IqrConfig::default(),
            fit: FitConfig::default(),
            fit_k: 10,
            gallery_scope: GalleryScope::Full,
            seed_override: None,
        }
    }
}

/// Values supplied on the command line; `None` leaves the config file or
/// default value in place.
#[derive(Debug, Clone, Default)]
pub struct Overrides {
    pub paths: Paths,
    pub seed: Option<u64>,
    pub ks: Option<String>,
    pub iqr_space: Option<String>,
    pub iqr_mult: Option<f64>,
    pub bootstrap: Option<usize>,
    pub ci_level: Option<f64>,
    pub fit_k: Option<usize>,
    pub gallery_scope: Option<String>,
}

pub fn parse_ks(text: &str) -> Result<Vec<usize>> {
    text.split(',')
        .map(|t| {
            t.trim()
                .parse::<usize>()
                .with_context(|| format!("invalid k value {t:?}"))
        })
        .collect()
}

fn parse_space(text: &str) -> Result<IqrSpace> {
    match text {
        "log" => Ok(IqrSpace::Log),
        "linear" => Ok(IqrSpace::Linear),
        other => bail!("iqr space must be log or linear, got {other:?}"),
    }
}

fn parse_scope(text: &str) -> Result<GalleryScope> {
    match text {
        "full" => Ok(GalleryScope::Full),
        "curated" => Ok(GalleryScope::Curated),
        other => bail!("gallery scope must be full or curated, got {other:?}"),
    }
}

impl RunConfig {
    pub fn from_file(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).with_context(|| format!("reading config {}", path.display()))?;
        let value: Value = serde_json::from_str(&text).with_context(|| format!("parsing config {}", path.display()))?;
        let Value::Object(map) = value else {
            bail!("config {} must be a JSON object", path.display());
        };
        Self::from_map(&map)
    }

    pub fn from_map(map: &Map<String, Value>) -> Result<Self> {
        let mut cfg = Self::default();
        for (key, value) in map {
            let as_path = || -> Result<Option<PathBuf>> {
                value
                    .as_str()
                    .map(|s| Some(PathBuf::from(s)))
                    .with_context(|| format!("config key {key} must be a string"))
            };
            let as_u64 = || value.as_u64().with_context(|| format!("config key {key} must be a non-negative integer"));
            let as_f64 = || value.as_f64().with_context(|| format!("config key {key} must be a number"));
            let as_str = || value.as_str().with_context(|| format!("config key {key} must be a string"));
            match key.as_str() {
                "paths.corpus" => cfg.paths.corpus = as_path()?,
                "paths.vocab" => cfg.paths.vocab = as_path()?,
                "paths.exceptions" => cfg.paths.exceptions = as_path()?,
                "paths.index" => cfg.paths.index = as_path()?,
                "paths.manifest" => cfg.paths.manifest = as_path()?,
                "paths.queries" => cfg.paths.queries = as_path()?,
                "paths.gallery" => cfg.paths.gallery = as_path()?,
                "paths.outcomes" => cfg.paths.outcomes = as_path()?,
                "paths.spec" => cfg.paths.spec = as_path()?,
                "paths.out" => cfg.paths.out = as_path()?,
                "ks" => {
                    cfg.ks = match value {
                        Value::String(s) => parse_ks(s)?,
                        Value::Array(items) => items
                            .iter()
                            .map(|v| v.as_u64().map(|k| k as usize).context("ks entries must be integers"))
                            .collect::<Result<_>>()?,
                        _ => bail!("config key ks must be a list or comma-separated string"),
                    }
                }
                "iqr.space" => cfg.iqr.space = parse_space(as_str()?)?,
                "iqr.multiplier" => cfg.iqr.multiplier = as_f64()?,
                "fit.bootstrap" => cfg.fit.bootstrap = as_u64()? as usize,
                "fit.seed" => {
                    let seed = as_u64()?;
                    cfg.fit.seed = seed;
                    cfg.seed_override = Some(seed);
                }
                "fit.ci_level" => cfg.fit.ci_level = as_f64()?,
                "fit.k" => cfg.fit_k = as_u64()? as usize,
                "gallery_scope" => cfg.gallery_scope = parse_scope(as_str()?)?,
                other => bail!("unknown config key {other:?}"),
            }
        }
        Ok(cfg)
    }

    pub fn apply(mut self, o: &Overrides) -> Result<Self> {
        macro_rules! path {
            ($field:ident) => {
                if let Some(p) = &o.paths.$field {
                    self.paths.$field = Some(p.clone());
                }
            };
        }
        path!(corpus);
        path!(vocab);
        path!(exceptions);
        path!(index);
        path!(manifest);
        path!(queries);
        path!(gallery);
        path!(outcomes);
        path!(spec);
        path!(out);
        if let Some(seed) = o.seed {
            self.fit.seed = seed;
            self.seed_override = Some(seed);
        }
        if let Some(ks) = &o.ks {
            self.ks = parse_ks(ks)?;
        }
        if let Some(space) = &o.iqr_space {
            self.iqr.space = parse_space(space)?;
        }
        if let Some(m) = o.iqr_mult {
            self.iqr.multiplier = m;
        }
        if let Some(b) = o.bootstrap {
            self.fit.bootstrap = b;
        }
        if let Some(level) = o.ci_level {
            self.fit.ci_level = level;
        }
        if let Some(k) = o.fit_k {
            self.fit_k = k;
        }
        if let Some(scope) = &o.gallery_scope {
            self.gallery_scope = parse_scope(scope)?;
        }
        Ok(self)
    }

    pub fn validate(&self) -> Result<()> {
        if self.ks.is_empty() {
            bail!("--k needs at least one cutoff");
        }
        if self.ks.iter().any(|&k| k < 1) || self.fit_k < 1 {
            bail!("every k must be at least 1");
        }
        if !(self.iqr.multiplier > 0.0) {
            bail!("--iqr-mult must be positive");
        }
        if self.fit.bootstrap < 1 {
            bail!("--bootstrap must be at least 1");
        }
        if !(self.fit.ci_level > 0.0 && self.fit.ci_level < 1.0) {
            bail!("ci level must lie in (0, 1)");
        }
        Ok(())
    }
}
