use std::fs;
use std::path::{Path, PathBuf};

use crate::error::{Error, Result};
use crate::model::ModelConfig;
use crate::train::{LossConfig, SamplerConfig, TrainConfig};

/// Every key accepted in a run configuration file, with its default.
pub const KEYS: &[(&str, &str, &str)] = &[
    ("stacks", "4", "repetitions of the dilation pattern"),
    ("filters", "64", "channels per residual layer"),
    ("dilation_depth", "10", "layers per stack (dilations 1..2^(depth-1))"),
    ("target_field", "1600", "output samples per forward pass"),
    ("num_outputs", "3", "regressed sources (3: vocals/drums/bass, 1: vocals)"),
    ("sample_rate", "16000", "expected sample rate in Hz"),
    ("post_filters", "2048,256", "channels of the two post-processing convolutions"),
    ("lr", "0.001", "ADAM learning rate"),
    ("batch_size", "10", "segments per optimizer step"),
    ("patience_epochs", "16", "epochs without improvement before stopping"),
    ("steps_per_epoch", "1000", "optimizer steps per epoch"),
    ("max_epochs", "500", "upper bound on epochs"),
    ("validation_segments", "100", "size of the fixed validation set"),
    ("seed", "0", "seeds weight initialisation and segment sampling"),
    ("alpha", "0", "weight of the dissimilarity term"),
    ("reduction", "sum", "loss reduction: sum or mean"),
    ("p_voiced", "0", "probability of forcing a voiced training window"),
    ("voiced_rms_threshold", "0.001", "vocal RMS above which a window is voiced"),
    ("dataset", "-", "root directory of the stem dataset"),
    ("manifest", "-", "JSON split manifest (defaults to <dataset>/dataset.json)"),
    ("output", "-", "output directory"),
];

/// Help text listing every configuration key.
pub fn keys_help() -> String {
    let mut s = String::from("Configuration file keys (`key = value`, `#` starts a comment):\n");
    for (key, default, doc) in KEYS {
        s.push_str(&format!("  {key:<22} {default:<10} {doc}\n"));
    }
    s
}

/// Everything a run needs, read from a flat `key = value` file.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct RunConfig {
    pub model: ModelConfig,
    pub train: TrainConfig,
    pub loss: LossConfig,
    pub sampler: SamplerConfig,
    pub dataset: Option<PathBuf>,
    pub manifest: Option<PathBuf>,
    pub output: Option<PathBuf>,
}

fn parse_num<T: std::str::FromStr>(key: &str, value: &str, line: usize) -> Result<T> {
    value
        .parse()
        .map_err(|_| Error::config(format!("line {line}: invalid value `{value}` for `{key}`")))
}

impl RunConfig {
    /// Parses configuration text. Relative paths are resolved against `base`.
    pub fn parse(text: &str, base: &Path) -> Result<Self> {
        let mut cfg = RunConfig::default();
        let mut seen = Vec::new();
        for (i, raw) in text.lines().enumerate() {
            let line_no = i + 1;
            let line = raw.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let (key, value) = line
                .split_once('=')
                .ok_or_else(|| Error::config(format!("line {line_no}: expected `key = value`")))?;
            let (key, value) = (key.trim(), value.trim());
            if !KEYS.iter().any(|(k, _, _)| *k == key) {
                return Err(Error::config(format!("line {line_no}: unknown key `{key}`")));
            }
            if seen.contains(&key) {
                return Err(Error::config(format!("line {line_no}: `{key}` is set twice")));
            }
            seen.push(key);
            cfg.set(key, value, line_no, base)?;
        }
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = fs::read_to_string(path)
            .map_err(|e| Error::config(format!("cannot read config {}: {e}", path.display())))?;
        let base = path.parent().unwrap_or(Path::new("."));
        Self::parse(&text, base).map_err(|e| match e {
            Error::Config(m) => Error::config(format!("{}: {m}", path.display())),
            other => other,
        })
    }

    fn set(&mut self, key: &str, value: &str, line: usize, base: &Path) -> Result<()> {
        let path = || Some(base.join(value));
        match key {
            "stacks" => self.model.stacks = parse_num(key, value, line)?,
            "filters" => self.model.filters = parse_num(key, value, line)?,
            "dilation_depth" => self.model.dilation_depth = parse_num(key, value, line)?,
            "target_field" => self.model.target_field = parse_num(key, value, line)?,
            "num_outputs" => self.model.num_outputs = parse_num(key, value, line)?,
            "sample_rate" => self.model.sample_rate = parse_num(key, value, line)?,
            "post_filters" => {
                let parts: Vec<&str> = value.split(',').map(str::trim).collect();
                if parts.len() != 2 {
                    return Err(Error::config(format!("line {line}: `post_filters` takes two values")));
                }
                self.model.post_filters = [parse_num(key, parts[0], line)?, parse_num(key, parts[1], line)?];
            }
            "lr" => self.train.lr = parse_num(key, value, line)?,
            "batch_size" => self.train.batch_size = parse_num(key, value, line)?,
            "patience_epochs" => self.train.patience_epochs = parse_num(key, value, line)?,
            "steps_per_epoch" => self.train.steps_per_epoch = parse_num(key, value, line)?,
            "max_epochs" => self.train.max_epochs = parse_num(key, value, line)?,
            "validation_segments" => self.train.validation_segments = parse_num(key, value, line)?,
            "seed" => {
                self.train.seed = parse_num(key, value, line)?;
                self.sampler.rng_seed = self.train.seed;
            }
            "alpha" => self.loss.alpha = parse_num(key, value, line)?,
            "reduction" => self.loss.reduction = value.parse()?,
            "p_voiced" => self.sampler.p_voiced = parse_num(key, value, line)?,
            "voiced_rms_threshold" => self.sampler.voiced_rms_threshold = parse_num(key, value, line)?,
            "dataset" => self.dataset = path(),
            "manifest" => self.manifest = path(),
            "output" => self.output = path(),
            _ => return Err(Error::Internal(format!("key `{key}` has no setter"))),
        }
        Ok(())
    }

    pub fn validate(&self) -> Result<()> {
        self.model.validate()?;
        self.train.validate()?;
        self.loss.validate(self.model.num_outputs)?;
        self.sampler.validate()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn empty_file_gives_defaults() {
        let cfg = RunConfig::parse("# nothing\n\n", Path::new(".")).unwrap();
        assert_eq!(cfg, RunConfig::default());
    }

    #[test]
    fn values_and_comments() {
        let text = "stacks = 2 # two\nfilters=8\npost_filters = 16, 4\nreduction = mean\nseed = 9\noutput = out\n";
        let cfg = RunConfig::parse(text, Path::new("/base")).unwrap();
        assert_eq!(cfg.model.stacks, 2);
        assert_eq!(cfg.model.filters, 8);
        assert_eq!(cfg.model.post_filters, [16, 4]);
        assert_eq!(cfg.sampler.rng_seed, 9);
        assert_eq!(cfg.output, Some(PathBuf::from("/base/out")));
    }

    #[test]
    fn rejects_unknown_duplicate_and_invalid() {
        for text in ["stakcs = 2", "stacks = 2\nstacks = 3", "stacks = two", "stacks", "stacks = 0"] {
            assert!(matches!(RunConfig::parse(text, Path::new(".")), Err(Error::Config(_))), "{text}");
        }
    }

    #[test]
    fn every_key_documented_and_settable() {
        for (key, default, _) in KEYS {
            let value = if *default == "-" { "x" } else { default };
            RunConfig::parse(&format!("{key} = {value}"), Path::new(".")).unwrap();
        }
    }
}
