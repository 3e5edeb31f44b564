//! Flat `key = value` experiment configuration with dotted key paths.
//!
//! Blank lines and lines starting with `#` are ignored. Values may be wrapped
//! in double quotes. Lists are comma separated. Every key is optional; an
//! empty file yields the defaults.

use std::fmt::Write as _;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use shiftlab::active::StrategyKind;
use shiftlab::data::{Augment, FeatureMode, FolderOptions};
use shiftlab::{AlConfig, GridSpec, NormKind, ShiftSpec, TrainConfig, TrainMode};

use crate::error::CliError;

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum DataSource {
    Synthetic,
    Folder,
}

impl DataSource {
    fn name(self) -> &'static str {
        match self {
            DataSource::Synthetic => "synthetic",
            DataSource::Folder => "folder",
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct DataConfig {
    pub source: DataSource,
    pub num_classes: usize,
    pub dim: usize,
    pub per_class: usize,
    /// Target rotation in degrees.
    pub rotation_deg: f64,
    pub translation: Vec<f64>,
    pub noise: f64,
    pub seed: u64,
    pub path: Option<PathBuf>,
    pub image_size: u32,
    /// 0 flattens raw pixels; otherwise mean-pool over a `cells × cells` grid.
    pub cells: u32,
    pub flip: bool,
    pub scale: Option<(f64, f64)>,
}

impl Default for DataConfig {
    fn default() -> Self {
        let s = ShiftSpec::default();
        let f = FolderOptions::default();
        DataConfig {
            source: DataSource::Synthetic,
            num_classes: s.num_classes,
            dim: s.dim,
            per_class: s.per_class,
            rotation_deg: s.rotation.to_degrees().round(),
            translation: s.translation,
            noise: s.noise,
            seed: s.seed,
            path: None,
            image_size: f.image_size,
            cells: match f.features {
                FeatureMode::MeanPool { cells } => cells,
                FeatureMode::Flatten => 0,
            },
            flip: f.augment.flip,
            scale: f.augment.scale,
        }
    }
}

impl DataConfig {
    pub fn shift_spec(&self) -> ShiftSpec {
        ShiftSpec {
            num_classes: self.num_classes,
            dim: self.dim,
            per_class: self.per_class,
            rotation: self.rotation_deg.to_radians(),
            translation: self.translation.clone(),
            noise: self.noise,
            seed: self.seed,
        }
    }

    pub fn folder_options(&self) -> FolderOptions {
        FolderOptions {
            image_size: self.image_size,
            features: if self.cells == 0 {
                FeatureMode::Flatten
            } else {
                FeatureMode::MeanPool { cells: self.cells }
            },
            augment: Augment {
                flip: self.flip,
                scale: self.scale,
            },
            seed: self.seed,
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct AlSection {
    pub strategies: Vec<StrategyKind>,
    pub k: usize,
    pub rounds: usize,
    pub lambda_divdis: f64,
    pub emoc_lr: Option<f64>,
    pub emoc_eval_size: Option<usize>,
    pub invert_certainty: bool,
}

impl Default for AlSection {
    fn default() -> Self {
        let a = AlConfig::default();
        AlSection {
            strategies: StrategyKind::ALL.to_vec(),
            k: a.k,
            rounds: a.rounds,
            lambda_divdis: a.lambda_divdis,
            emoc_lr: a.emoc_lr,
            emoc_eval_size: a.emoc_eval_size,
            invert_certainty: a.invert_certainty,
        }
    }
}

impl AlSection {
    pub fn al_config(&self, strategy: StrategyKind, seed: u64) -> AlConfig {
        AlConfig {
            k: self.k,
            rounds: self.rounds,
            strategy,
            seed,
            lambda_divdis: self.lambda_divdis,
            emoc_lr: self.emoc_lr,
            emoc_eval_size: self.emoc_eval_size,
            invert_certainty: self.invert_certainty,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Default)]
pub struct SignificanceSection {
    /// AL results to read; defaults to `<out>/al.csv`.
    pub input: Option<PathBuf>,
    pub welch: bool,
}

#[derive(Clone, Debug, PartialEq)]
pub struct ExperimentConfig {
    pub experiment: String,
    pub out: Option<PathBuf>,
    /// Run seeds; `None` means `train.seed, train.seed+1, ...` (`train.runs` of them).
    pub seeds: Option<Vec<u64>>,
    pub workers: usize,
    /// Record wall-clock seconds; off keeps outputs byte-reproducible.
    pub timing: bool,
    pub data: DataConfig,
    pub train: TrainConfig,
    pub al: Option<AlSection>,
    pub grid: Option<GridSpec>,
    pub significance: SignificanceSection,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        ExperimentConfig {
            experiment: "shiftlab".into(),
            out: None,
            seeds: None,
            workers: 1,
            timing: false,
            data: DataConfig::default(),
            train: TrainConfig::default(),
            al: None,
            grid: None,
            significance: SignificanceSection::default(),
        }
    }
}

fn bad(key: &str, msg: impl std::fmt::Display) -> CliError {
    CliError::Config {
        key: key.to_string(),
        msg: msg.to_string(),
    }
}

fn num<T: FromStr>(key: &str, v: &str) -> Result<T, CliError> {
    v.parse()
        .map_err(|_| bad(key, format!("expected a {}, got `{v}`", std::any::type_name::<T>())))
}

fn list<T: FromStr>(key: &str, v: &str) -> Result<Vec<T>, CliError> {
    if v.trim().is_empty() {
        return Ok(Vec::new());
    }
    v.split(',').map(|s| num(key, s.trim())).collect()
}

fn boolean(key: &str, v: &str) -> Result<bool, CliError> {
    match v {
        "true" => Ok(true),
        "false" => Ok(false),
        _ => Err(bad(key, format!("expected true or false, got `{v}`"))),
    }
}

fn opt<T: FromStr>(key: &str, v: &str) -> Result<Option<T>, CliError> {
    if v == "none" {
        Ok(None)
    } else {
        num(key, v).map(Some)
    }
}

fn join<T: std::fmt::Display>(xs: &[T]) -> String {
    xs.iter().map(|x| x.to_string()).collect::<Vec<_>>().join(",")
}

fn show_opt<T: std::fmt::Display>(x: &Option<T>) -> String {
    x.as_ref().map_or("none".into(), |v| v.to_string())
}

impl ExperimentConfig {
    pub fn parse(text: &str) -> Result<Self, CliError> {
        let mut cfg = ExperimentConfig::default();
        for (n, raw) in text.lines().enumerate() {
            let line = raw.trim();
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            let (key, value) = line.split_once('=').ok_or_else(|| {
                bad(&format!("line {}", n + 1), format!("expected `key = value`, got `{line}`"))
            })?;
            let key = key.trim();
            let mut value = value.trim();
            if value.len() >= 2 && value.starts_with('"') && value.ends_with('"') {
                value = &value[1..value.len() - 1];
            }
            cfg.set(key, value)?;
        }
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn from_path(path: &Path) -> Result<Self, CliError> {
        let text = std::fs::read_to_string(path).map_err(|e| CliError::Io {
            path: path.to_path_buf(),
            source: e,
        })?;
        Self::parse(&text)
    }

    fn set(&mut self, key: &str, v: &str) -> Result<(), CliError> {
        let d = &mut self.data;
        let t = &mut self.train;
        match key {
            "experiment" => {
                if v.is_empty() || v.contains([',', '\n', '"']) {
                    return Err(bad(key, "must be nonempty without commas or quotes"));
                }
                self.experiment = v.to_string();
            }
            "out" => self.out = Some(PathBuf::from(v)),
            "seeds" => self.seeds = Some(list(key, v)?),
            "workers" => self.workers = num(key, v)?,
            "timing" => self.timing = boolean(key, v)?,

            "data.source" => {
                d.source = match v {
                    "synthetic" => DataSource::Synthetic,
                    "folder" => DataSource::Folder,
                    _ => return Err(bad(key, format!("expected synthetic or folder, got `{v}`"))),
                }
            }
            "data.num_classes" => d.num_classes = num(key, v)?,
            "data.dim" => d.dim = num(key, v)?,
            "data.per_class" => d.per_class = num(key, v)?,
            "data.rotation_deg" => d.rotation_deg = num(key, v)?,
            "data.translation" => d.translation = list(key, v)?,
            "data.noise" => d.noise = num(key, v)?,
            "data.seed" => d.seed = num(key, v)?,
            "data.path" => d.path = if v == "none" { None } else { Some(PathBuf::from(v)) },
            "data.image_size" => d.image_size = num(key, v)?,
            "data.cells" => d.cells = num(key, v)?,
            "data.flip" => d.flip = boolean(key, v)?,
            "data.scale" => {
                d.scale = if v == "none" {
                    None
                } else {
                    match list::<f64>(key, v)?.as_slice() {
                        [lo, hi] => Some((*lo, *hi)),
                        _ => return Err(bad(key, "expected `lo,hi` or none")),
                    }
                }
            }

            "train.mode" => {
                t.mode = TrainMode::parse(v).ok_or_else(|| {
                    bad(key, format!("unknown mode `{v}` (source_only, target_only, uada, uada_semi)"))
                })?
            }
            "train.norm" => {
                t.norm = NormKind::parse(v)
                    .ok_or_else(|| bad(key, format!("unknown norm `{v}` (bn, gn_ws, dan, trans)")))?
            }
            "train.lr" => t.lr = num(key, v)?,
            "train.l2" => t.l2 = num(key, v)?,
            "train.momentum" => t.momentum = num(key, v)?,
            "train.batch_size" => t.batch_size = num(key, v)?,
            "train.epochs" => t.epochs = num(key, v)?,
            "train.runs" => t.runs = num(key, v)?,
            "train.seed" => t.seed = num(key, v)?,
            "train.conf_weight" => t.conf_weight = num(key, v)?,
            "train.hidden" => t.hidden = list(key, v)?,
            "train.disc_hidden" => t.disc_hidden = num(key, v)?,
            "train.source_fraction" => t.source_fraction = num(key, v)?,
            "train.norm_eps" => t.norm_cfg.eps = num(key, v)?,
            "train.norm_momentum" => t.norm_cfg.momentum = num(key, v)?,
            "train.groups" => t.norm_cfg.groups = num(key, v)?,

            k if k.starts_with("al.") => {
                let a = self.al.get_or_insert_with(AlSection::default);
                match k {
                    "al.strategies" => {
                        a.strategies = v
                            .split(',')
                            .map(|s| {
                                StrategyKind::parse(s.trim())
                                    .ok_or_else(|| bad(key, format!("unknown strategy `{}`", s.trim())))
                            })
                            .collect::<Result<_, _>>()?
                    }
                    "al.k" => a.k = num(key, v)?,
                    "al.rounds" => a.rounds = num(key, v)?,
                    "al.lambda_divdis" => a.lambda_divdis = num(key, v)?,
                    "al.emoc_lr" => a.emoc_lr = opt(key, v)?,
                    "al.emoc_eval_size" => a.emoc_eval_size = opt(key, v)?,
                    "al.invert_certainty" => a.invert_certainty = boolean(key, v)?,
                    _ => return Err(bad(key, "unknown key")),
                }
            }
            k if k.starts_with("grid.") => {
                let g = self.grid.get_or_insert_with(GridSpec::default);
                match k {
                    "grid.lrs" => g.lrs = list(key, v)?,
                    "grid.l2s" => g.l2s = list(key, v)?,
                    _ => return Err(bad(key, "unknown key")),
                }
            }
            "significance.input" => {
                self.significance.input = if v == "none" { None } else { Some(PathBuf::from(v)) }
            }
            "significance.welch" => self.significance.welch = boolean(key, v)?,
            _ => return Err(bad(key, "unknown key")),
        }
        Ok(())
    }

    /// Checks every constraint and names the offending key.
    pub fn validate(&self) -> Result<(), CliError> {
        if self.workers == 0 {
            return Err(bad("workers", "must be at least 1"));
        }
        if let Some(s) = &self.seeds {
            if s.is_empty() {
                return Err(bad("seeds", "must list at least one seed"));
            }
            let mut sorted = s.clone();
            sorted.sort_unstable();
            sorted.dedup();
            if sorted.len() != s.len() {
                return Err(bad("seeds", "seeds must be distinct"));
            }
        }
        let d = &self.data;
        match d.source {
            DataSource::Synthetic => {
                if let Err(e) = d.shift_spec().validate() {
                    return Err(bad("data", e));
                }
            }
            DataSource::Folder => {
                if d.path.is_none() {
                    return Err(bad("data.path", "required when data.source = folder"));
                }
                if d.image_size == 0 {
                    return Err(bad("data.image_size", "must be positive"));
                }
                if d.cells > d.image_size {
                    return Err(bad("data.cells", "must not exceed data.image_size"));
                }
                if let Some((lo, hi)) = d.scale {
                    if !(0.0 < lo && lo <= hi && hi <= 1.0) {
                        return Err(bad("data.scale", "needs 0 < lo <= hi <= 1"));
                    }
                }
            }
        }
        self.validate_train()?;
        if let Some(a) = &self.al {
            if a.strategies.is_empty() {
                return Err(bad("al.strategies", "must name at least one strategy"));
            }
            if a.k == 0 {
                return Err(bad("al.k", "must be at least 1"));
            }
            if !(0.0..=1.0).contains(&a.lambda_divdis) {
                return Err(bad("al.lambda_divdis", "must be in [0, 1]"));
            }
            if let Some(lr) = a.emoc_lr {
                if !(lr >= 0.0 && lr.is_finite()) {
                    return Err(bad("al.emoc_lr", "must be >= 0"));
                }
            }
            if a.emoc_eval_size == Some(0) {
                return Err(bad("al.emoc_eval_size", "must be at least 1"));
            }
        }
        if let Some(g) = &self.grid {
            if g.lrs.is_empty() || g.lrs.iter().any(|&x| !(x > 0.0 && x.is_finite())) {
                return Err(bad("grid.lrs", "needs at least one positive value"));
            }
            if g.l2s.is_empty() || g.l2s.iter().any(|&x| !(x >= 0.0 && x.is_finite())) {
                return Err(bad("grid.l2s", "needs at least one nonnegative value"));
            }
        }
        Ok(())
    }

    fn validate_train(&self) -> Result<(), CliError> {
        let t = &self.train;
        if !(t.lr > 0.0 && t.lr.is_finite()) {
            return Err(bad("train.lr", "must be positive"));
        }
        if !(t.l2 >= 0.0 && t.l2.is_finite()) {
            return Err(bad("train.l2", "must be >= 0"));
        }
        if !(0.0..1.0).contains(&t.momentum) {
            return Err(bad("train.momentum", "must be in [0, 1)"));
        }
        if !(t.conf_weight >= 0.0 && t.conf_weight.is_finite()) {
            return Err(bad("train.conf_weight", "must be >= 0"));
        }
        if t.runs == 0 {
            return Err(bad("train.runs", "must be at least 1"));
        }
        if t.hidden.is_empty() || t.hidden.contains(&0) {
            return Err(bad("train.hidden", "needs at least one positive width"));
        }
        if t.disc_hidden == 0 {
            return Err(bad("train.disc_hidden", "must be positive"));
        }
        if !(0.0..=1.0).contains(&t.source_fraction) {
            return Err(bad("train.source_fraction", "must be in [0, 1]"));
        }
        if t.norm_cfg.groups == 0 {
            return Err(bad("train.groups", "must be positive"));
        }
        if t.norm_cfg.eps.partial_cmp(&0.0) != Some(std::cmp::Ordering::Greater) {
            return Err(bad("train.norm_eps", "must be positive"));
        }
        if !(0.0..=1.0).contains(&t.norm_cfg.momentum) {
            return Err(bad("train.norm_momentum", "must be in [0, 1]"));
        }
        if t.mode.is_adversarial() {
            let per_src = (t.batch_size as f64 * t.source_fraction).floor() as usize;
            if per_src < 2 || t.batch_size.saturating_sub(per_src) < 2 {
                return Err(bad(
                    "train.batch_size",
                    format!(
                        "{} with source_fraction {} leaves fewer than 2 rows for a domain; \
                         batch statistics need two rows per domain",
                        t.batch_size, t.source_fraction
                    ),
                ));
            }
        } else {
            if t.batch_size < 2 {
                return Err(bad("train.batch_size", "must be at least 2"));
            }
            if t.norm == NormKind::TransNorm {
                return Err(bad(
                    "train.norm",
                    format!("trans needs both domains per batch; mode {} has one", t.mode),
                ));
            }
        }
        t.validate().map_err(|e| bad("train", e))
    }

    pub fn to_text(&self) -> String {
        let mut s = String::new();
        let mut kv = |k: &str, v: String| {
            let _ = writeln!(s, "{k} = {v}");
        };
        kv("experiment", self.experiment.clone());
        if let Some(o) = &self.out {
            kv("out", o.display().to_string());
        }
        if let Some(seeds) = &self.seeds {
            kv("seeds", join(seeds));
        }
        kv("workers", self.workers.to_string());
        kv("timing", self.timing.to_string());

        let d = &self.data;
        kv("data.source", d.source.name().into());
        kv("data.num_classes", d.num_classes.to_string());
        kv("data.dim", d.dim.to_string());
        kv("data.per_class", d.per_class.to_string());
        kv("data.rotation_deg", d.rotation_deg.to_string());
        kv("data.translation", join(&d.translation));
        kv("data.noise", d.noise.to_string());
        kv("data.seed", d.seed.to_string());
        kv("data.path", show_opt(&d.path.as_ref().map(|p| p.display())));
        kv("data.image_size", d.image_size.to_string());
        kv("data.cells", d.cells.to_string());
        kv("data.flip", d.flip.to_string());
        kv("data.scale", d.scale.map_or("none".into(), |(lo, hi)| format!("{lo},{hi}")));

        let t = &self.train;
        kv("train.mode", t.mode.name().into());
        kv("train.norm", t.norm.name().into());
        kv("train.lr", t.lr.to_string());
        kv("train.l2", t.l2.to_string());
        kv("train.momentum", t.momentum.to_string());
        kv("train.batch_size", t.batch_size.to_string());
        kv("train.epochs", t.epochs.to_string());
        kv("train.runs", t.runs.to_string());
        kv("train.seed", t.seed.to_string());
        kv("train.conf_weight", t.conf_weight.to_string());
        kv("train.hidden", join(&t.hidden));
        kv("train.disc_hidden", t.disc_hidden.to_string());
        kv("train.source_fraction", t.source_fraction.to_string());
        kv("train.norm_eps", t.norm_cfg.eps.to_string());
        kv("train.norm_momentum", t.norm_cfg.momentum.to_string());
        kv("train.groups", t.norm_cfg.groups.to_string());

        if let Some(a) = &self.al {
            kv("al.strategies", join(&a.strategies));
            kv("al.k", a.k.to_string());
            kv("al.rounds", a.rounds.to_string());
            kv("al.lambda_divdis", a.lambda_divdis.to_string());
            kv("al.emoc_lr", show_opt(&a.emoc_lr));
            kv("al.emoc_eval_size", show_opt(&a.emoc_eval_size));
            kv("al.invert_certainty", a.invert_certainty.to_string());
        }
        if let Some(g) = &self.grid {
            kv("grid.lrs", join(&g.lrs));
            kv("grid.l2s", join(&g.l2s));
        }
        kv(
            "significance.input",
            show_opt(&self.significance.input.as_ref().map(|p| p.display())),
        );
        kv("significance.welch", self.significance.welch.to_string());
        s
    }

    /// Seeds to run, after defaults.
    pub fn run_seeds(&self) -> Vec<u64> {
        self.seeds
            .clone()
            .unwrap_or_else(|| (0..self.train.runs as u64).map(|i| self.train.seed + i).collect())
    }
}
