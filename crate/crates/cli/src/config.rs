//! Flat `key = value` run configuration.

use std::collections::BTreeMap;
use std::path::Path;

use glitchguard_core::clustering::ClusterParams;
use glitchguard_core::model::{AutoencoderConfig, EncoderLayer, TrainingHyper};
use glitchguard_core::scoring::DEFAULT_THRESHOLD;
use glitchguard_core::synth::{BugCategory, CorpusPlan};
use sha2::{Digest, Sha256};

use crate::error::{CliError, CliResult};

const THRESHOLD_PREFIX: &str = "threshold.";

/// Every tunable of the pipeline. Defaults are the library defaults.
#[derive(Clone, Debug, PartialEq)]
pub struct RunConfig {
    /// Seeds corpus rendering, model initialization and the training shuffle.
    pub seed: u64,
    pub frame_height: usize,
    pub frame_width: usize,
    pub corpus: CorpusPlan,
    pub model: AutoencoderConfig,
    pub train: TrainingHyper,
    pub stride: usize,
    pub threshold: f64,
    pub category_thresholds: BTreeMap<BugCategory, f64>,
    pub cluster: ClusterParams,
}

impl Default for RunConfig {
    fn default() -> Self {
        let corpus = CorpusPlan::default();
        let model = AutoencoderConfig::default();
        RunConfig {
            seed: corpus.seed,
            frame_height: model.frame_height,
            frame_width: model.frame_width,
            corpus,
            model,
            train: TrainingHyper::default(),
            stride: 1,
            threshold: DEFAULT_THRESHOLD,
            category_thresholds: BTreeMap::new(),
            cluster: ClusterParams::default(),
        }
    }
}

fn join<T: ToString>(items: &[T]) -> String {
    items.iter().map(T::to_string).collect::<Vec<_>>().join(",")
}

fn parse_num<T: std::str::FromStr>(key: &str, value: &str) -> CliResult<T> {
    value
        .parse()
        .map_err(|_| CliError::config(format!("bad value for {key}: {value:?}")))
}

fn parse_list<T: std::str::FromStr>(key: &str, value: &str) -> CliResult<Vec<T>> {
    value
        .split(',')
        .map(str::trim)
        .filter(|s| !s.is_empty())
        .map(|s| parse_num(key, s))
        .collect()
}

impl RunConfig {
    /// Applies one setting. Unknown keys are rejected by name.
    pub fn set(&mut self, key: &str, value: &str) -> CliResult<()> {
        let value = value.trim();
        match key {
            "seed" => self.seed = parse_num(key, value)?,
            "frame_height" => self.frame_height = parse_num(key, value)?,
            "frame_width" => self.frame_width = parse_num(key, value)?,
            "corpus.normal_videos" => self.corpus.normal_videos = parse_num(key, value)?,
            "corpus.normal_frames" => self.corpus.normal_frames = parse_num(key, value)?,
            "corpus.categories" => self.corpus.categories = parse_list(key, value)?,
            "corpus.videos_per_category" => self.corpus.videos_per_category = parse_num(key, value)?,
            "corpus.buggy_frames" => self.corpus.buggy_frames = parse_num(key, value)?,
            "corpus.train_fraction" => self.corpus.train_fraction = parse_num(key, value)?,
            "corpus.exemplars_per_category" => self.corpus.exemplars_per_category = parse_num(key, value)?,
            "model.window" => self.model.window = parse_num(key, value)?,
            "model.encoder" => self.model.encoder = parse_list::<EncoderLayer>(key, value)?,
            "model.lstm_hidden" => self.model.lstm_hidden = parse_list(key, value)?,
            "model.lstm_kernel" => self.model.lstm_kernel = parse_num(key, value)?,
            "train.lr" => self.train.lr = parse_num(key, value)?,
            "train.batch_size" => self.train.batch_size = parse_num(key, value)?,
            "train.max_steps" => self.train.max_steps = parse_num(key, value)?,
            "train.beta1" => self.train.beta1 = parse_num(key, value)?,
            "train.beta2" => self.train.beta2 = parse_num(key, value)?,
            "train.adam_eps" => self.train.eps = parse_num(key, value)?,
            "train.weight_decay" => self.train.weight_decay = parse_num(key, value)?,
            "score.stride" => self.stride = parse_num(key, value)?,
            "score.threshold" => self.threshold = parse_num(key, value)?,
            "cluster.eps" => {
                self.cluster.eps = if value == "auto" {
                    None
                } else {
                    Some(parse_num(key, value)?)
                }
            }
            "cluster.min_pts" => self.cluster.min_pts = parse_num(key, value)?,
            "cluster.resample_len" => self.cluster.resample_len = parse_num(key, value)?,
            _ => {
                let category = key
                    .strip_prefix(THRESHOLD_PREFIX)
                    .and_then(|c| c.parse::<BugCategory>().ok())
                    .ok_or_else(|| CliError::config(format!("unknown config key {key:?}")))?;
                self.category_thresholds.insert(category, parse_num(key, value)?);
            }
        }
        Ok(())
    }

    /// Applies a `key=value` assignment as given on the command line.
    pub fn set_assignment(&mut self, assignment: &str) -> CliResult<()> {
        let (key, value) = assignment
            .split_once('=')
            .ok_or_else(|| CliError::config(format!("expected key=value, got {assignment:?}")))?;
        self.set(key.trim(), value)
    }

    /// Applies every setting of a config file on top of `self`. `#` starts a
    /// comment; a key may appear once per file.
    pub fn apply_text(&mut self, text: &str, origin: &str) -> CliResult<()> {
        let mut seen = BTreeMap::new();
        for (n, raw) in text.lines().enumerate() {
            let line = raw.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let (key, value) = line
                .split_once('=')
                .ok_or_else(|| CliError::config(format!("{origin}:{}: expected key = value", n + 1)))?;
            let key = key.trim();
            if let Some(first) = seen.insert(key.to_string(), n + 1) {
                return Err(CliError::config(format!(
                    "{origin}:{}: {key} already set on line {first}",
                    n + 1
                )));
            }
            self.set(key, value)
                .map_err(|e| CliError::config(format!("{origin}:{}: {}", n + 1, e.message)))?;
        }
        Ok(())
    }

    pub fn load(path: &Path) -> CliResult<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| CliError::io(path, e))?;
        let mut cfg = RunConfig::default();
        cfg.apply_text(&text, &path.display().to_string())?;
        Ok(cfg)
    }

    pub fn corpus_plan(&self) -> CorpusPlan {
        CorpusPlan {
            seed: self.seed,
            height: self.frame_height,
            width: self.frame_width,
            ..self.corpus.clone()
        }
    }

    pub fn model_config(&self) -> AutoencoderConfig {
        AutoencoderConfig {
            frame_height: self.frame_height,
            frame_width: self.frame_width,
            seed: self.seed,
            ..self.model.clone()
        }
    }

    /// Detection threshold for videos of `category`, falling back to
    /// `score.threshold`.
    pub fn threshold_for(&self, category: Option<&str>) -> f64 {
        category
            .and_then(|c| c.parse::<BugCategory>().ok())
            .and_then(|c| self.category_thresholds.get(&c).copied())
            .unwrap_or(self.threshold)
    }

    /// Checks every setting; errors name the offending key.
    pub fn validate(&self) -> CliResult<()> {
        let fail = |key: &str, why: &str| Err(CliError::config(format!("{key}: {why}")));
        if self.frame_height == 0 || self.frame_width == 0 {
            return fail("frame_height/frame_width", "must be >= 1");
        }
        if self.corpus.normal_videos < 2 {
            return fail("corpus.normal_videos", "must be >= 2");
        }
        if self.corpus.normal_frames < self.model.window {
            return fail("corpus.normal_frames", "must be >= model.window");
        }
        if self.corpus.buggy_frames < self.model.window {
            return fail("corpus.buggy_frames", "must be >= model.window");
        }
        if !(self.corpus.train_fraction > 0.0 && self.corpus.train_fraction < 1.0) {
            return fail("corpus.train_fraction", "must lie in (0, 1)");
        }
        if self.stride == 0 {
            return fail("score.stride", "must be >= 1");
        }
        let thresholds = std::iter::once(("score.threshold".to_string(), self.threshold)).chain(
            self.category_thresholds
                .iter()
                .map(|(c, &t)| (format!("{THRESHOLD_PREFIX}{c}"), t)),
        );
        for (key, t) in thresholds {
            if !(t > 0.0 && t < 1.0) {
                return fail(&key, "must lie in (0, 1)");
            }
        }
        if let Some(eps) = self.cluster.eps {
            if !(eps > 0.0 && eps.is_finite()) {
                return fail("cluster.eps", "must be > 0 or auto");
            }
        }
        if self.cluster.min_pts == 0 {
            return fail("cluster.min_pts", "must be >= 1");
        }
        if self.cluster.resample_len < 2 {
            return fail("cluster.resample_len", "must be >= 2");
        }
        self.train
            .validate()
            .map_err(|e| CliError::config(format!("train: {e}")))?;
        self.model_config()
            .architecture()
            .map_err(|e| CliError::config(format!("model: {e}")))?;
        Ok(())
    }

    /// The fully resolved configuration, one `key = value` per line in a
    /// fixed order. Loading this text reproduces `self`.
    pub fn to_text(&self) -> String {
        let mut lines = vec![
            ("seed".to_string(), self.seed.to_string()),
            ("frame_height".into(), self.frame_height.to_string()),
            ("frame_width".into(), self.frame_width.to_string()),
            ("corpus.normal_videos".into(), self.corpus.normal_videos.to_string()),
            ("corpus.normal_frames".into(), self.corpus.normal_frames.to_string()),
            ("corpus.categories".into(), join(&self.corpus.categories)),
            (
                "corpus.videos_per_category".into(),
                self.corpus.videos_per_category.to_string(),
            ),
            ("corpus.buggy_frames".into(), self.corpus.buggy_frames.to_string()),
            ("corpus.train_fraction".into(), self.corpus.train_fraction.to_string()),
            (
                "corpus.exemplars_per_category".into(),
                self.corpus.exemplars_per_category.to_string(),
            ),
            ("model.window".into(), self.model.window.to_string()),
            ("model.encoder".into(), join(&self.model.encoder)),
            ("model.lstm_hidden".into(), join(&self.model.lstm_hidden)),
            ("model.lstm_kernel".into(), self.model.lstm_kernel.to_string()),
            ("train.lr".into(), self.train.lr.to_string()),
            ("train.batch_size".into(), self.train.batch_size.to_string()),
            ("train.max_steps".into(), self.train.max_steps.to_string()),
            ("train.beta1".into(), self.train.beta1.to_string()),
            ("train.beta2".into(), self.train.beta2.to_string()),
            ("train.adam_eps".into(), self.train.eps.to_string()),
            ("train.weight_decay".into(), self.train.weight_decay.to_string()),
            ("score.stride".into(), self.stride.to_string()),
            ("score.threshold".into(), self.threshold.to_string()),
        ];
        for c in BugCategory::ALL {
            lines.push((
                format!("{THRESHOLD_PREFIX}{c}"),
                self.threshold_for(Some(c.name())).to_string(),
            ));
        }
        lines.push((
            "cluster.eps".into(),
            self.cluster.eps.map_or("auto".to_string(), |e| e.to_string()),
        ));
        lines.push(("cluster.min_pts".into(), self.cluster.min_pts.to_string()));
        lines.push(("cluster.resample_len".into(), self.cluster.resample_len.to_string()));
        lines.iter().map(|(k, v)| format!("{k} = {v}\n")).collect()
    }

    /// SHA-256 of [`RunConfig::to_text`], hex encoded.
    pub fn digest(&self) -> String {
        hex::encode(Sha256::digest(self.to_text().as_bytes()))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn text_roundtrip_and_digest() {
        let mut cfg = RunConfig::default();
        cfg.apply_text(
            "# comment\nseed = 3  # trailing\nmodel.lstm_hidden = 8,4,8\nthreshold.black_screen = 0.3\ncluster.eps = 1.5\n",
            "test",
        )
        .unwrap();
        assert_eq!(cfg.seed, 3);
        assert_eq!(cfg.model.lstm_hidden, vec![8, 4, 8]);
        assert_eq!(cfg.threshold_for(Some("black_screen")), 0.3);
        assert_eq!(cfg.threshold_for(Some("boundary_hole")), 0.5);
        assert_eq!(cfg.threshold_for(None), 0.5);

        let mut again = RunConfig::default();
        again.apply_text(&cfg.to_text(), "resolved").unwrap();
        assert_eq!(again.to_text(), cfg.to_text());
        assert_eq!(again.digest(), cfg.digest());
        assert_ne!(RunConfig::default().digest(), cfg.digest());
        assert_eq!(cfg.digest().len(), 64);
    }

    #[test]
    fn unknown_and_bad_keys_are_named() {
        let mut cfg = RunConfig::default();
        let e = cfg.apply_text("seed = 1\nmodel.widht = 3\n", "f.conf").unwrap_err();
        assert_eq!(e.code, 3);
        assert!(
            e.message.contains("model.widht") && e.message.contains("f.conf:2"),
            "{}",
            e.message
        );
        assert!(cfg
            .set("threshold.z_fighting", "0.4")
            .unwrap_err()
            .message
            .contains("threshold.z_fighting"));
        assert!(cfg.set("train.lr", "fast").unwrap_err().message.contains("train.lr"));
        assert!(cfg.apply_text("seed = 1\nseed = 2\n", "f").is_err());
        assert!(cfg.apply_text("just words\n", "f").is_err());
    }

    #[test]
    fn validation() {
        assert!(RunConfig::default().validate().is_ok());
        let mut cfg = RunConfig::default();
        cfg.set("score.threshold", "1.5").unwrap();
        assert!(cfg.validate().unwrap_err().message.contains("score.threshold"));
        let mut cfg = RunConfig::default();
        cfg.set("train.lr", "0").unwrap();
        assert_eq!(cfg.validate().unwrap_err().code, 3);
        let mut cfg = RunConfig::default();
        cfg.set("frame_height", "8").unwrap();
        assert!(cfg.validate().unwrap_err().message.contains("model"));
    }
}
