//! Flat `key=value` pipeline configuration.

use std::fs;
use std::path::{Path, PathBuf};

use crate::CliError;

#[derive(Debug, Clone, PartialEq)]
pub struct PipelineConfig {
    pub workdir: PathBuf,
    /// Line-delimited messages read by `ingest`.
    pub input: Option<PathBuf>,
    /// Line-delimited headlines read by `detect-keywords`.
    pub headlines: Option<PathBuf>,
    pub eta: usize,
    /// Item sets kept per hourly batch before pair extraction.
    pub itemsets: usize,
    pub pair_sets: usize,
    pub window_secs: u64,
    /// Highest-ranked articulation candidates tried per window.
    pub articulation_top: usize,
    pub min_messages: usize,
    pub k_codewords: usize,
    pub n_tiers: usize,
    pub head_drop_fraction: f64,
    pub early_fraction: f64,
    /// Take the early window before dropping the stale head.
    pub early_before_head_drop: bool,
    pub seed: u64,
    pub l2: f64,
    pub l2_grid: Vec<f64>,
    pub rounds: usize,
    pub threshold: f64,
    pub positive_weight: f64,
    pub validation_sample: usize,
    pub validation_seeds: usize,
    pub bin_width: u64,
    pub cutoff: u64,
    pub strict: bool,
    /// Ground-truth labels CSV used instead of tier assignments.
    pub labels: Option<PathBuf>,
    /// `synth.<key>` settings forwarded to the generator.
    pub synth: Vec<(String, String)>,
}

impl Default for PipelineConfig {
    fn default() -> Self {
        PipelineConfig {
            workdir: PathBuf::from("work"),
            input: None,
            headlines: None,
            eta: 2,
            itemsets: 50,
            pair_sets: 6,
            window_secs: 86_400,
            articulation_top: 5,
            min_messages: 2,
            k_codewords: 20,
            n_tiers: 4,
            head_drop_fraction: 0.05,
            early_fraction: 0.05,
            early_before_head_drop: false,
            seed: 0,
            l2: 0.1,
            l2_grid: vec![0.001, 0.01, 0.1, 1.0, 10.0],
            rounds: 5,
            threshold: 0.5,
            positive_weight: 1.0,
            validation_sample: 50,
            validation_seeds: 3,
            bin_width: 1,
            cutoff: 60,
            strict: false,
            labels: None,
            synth: Vec::new(),
        }
    }
}

fn num<T: std::str::FromStr>(key: &str, value: &str) -> Result<T, CliError> {
    value
        .trim()
        .parse()
        .map_err(|_| CliError::Usage(format!("config key `{key}` has invalid value `{value}`")))
}

fn flag(key: &str, value: &str) -> Result<bool, CliError> {
    match value.trim() {
        "true" | "yes" | "1" => Ok(true),
        "false" | "no" | "0" => Ok(false),
        _ => Err(CliError::Usage(format!("config key `{key}` expects true or false, got `{value}`"))),
    }
}

impl PipelineConfig {
    pub fn set(&mut self, key: &str, value: &str) -> Result<(), CliError> {
        let key = key.trim();
        let v = value.trim();
        match key {
            "workdir" => self.workdir = PathBuf::from(v),
            "input" => self.input = Some(PathBuf::from(v)),
            "headlines" => self.headlines = Some(PathBuf::from(v)),
            "labels" => self.labels = Some(PathBuf::from(v)),
            "eta" => self.eta = num(key, v)?,
            "itemsets" => self.itemsets = num(key, v)?,
            "pair_sets" => self.pair_sets = num(key, v)?,
            "window_secs" => self.window_secs = num(key, v)?,
            "articulation_top" => self.articulation_top = num(key, v)?,
            "min_messages" => self.min_messages = num(key, v)?,
            "k_codewords" => self.k_codewords = num(key, v)?,
            "n_tiers" => self.n_tiers = num(key, v)?,
            "head_drop_fraction" => self.head_drop_fraction = num(key, v)?,
            "early_fraction" => self.early_fraction = num(key, v)?,
            "early_before_head_drop" => self.early_before_head_drop = flag(key, v)?,
            "seed" => self.seed = num(key, v)?,
            "l2" => self.l2 = num(key, v)?,
            "l2_grid" => {
                self.l2_grid = v.split(',').map(|x| num(key, x)).collect::<Result<_, _>>()?;
            }
            "rounds" => self.rounds = num(key, v)?,
            "threshold" => self.threshold = num(key, v)?,
            "positive_weight" => self.positive_weight = num(key, v)?,
            "validation_sample" => self.validation_sample = num(key, v)?,
            "validation_seeds" => self.validation_seeds = num(key, v)?,
            "bin_width" => self.bin_width = num(key, v)?,
            "cutoff" => self.cutoff = num(key, v)?,
            "strict" => self.strict = flag(key, v)?,
            _ => match key.strip_prefix("synth.") {
                Some(rest) if !rest.is_empty() => self.synth.push((rest.to_owned(), v.to_owned())),
                _ => return Err(CliError::Usage(format!("unknown config key `{key}`"))),
            },
        }
        Ok(())
    }

    /// Applies `key=value` lines; blank lines and `#` comments are skipped.
    pub fn apply_text(&mut self, text: &str, origin: &str) -> Result<(), CliError> {
        for (i, line) in text.lines().enumerate() {
            let line = line.trim();
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            let (k, v) = line
                .split_once('=')
                .ok_or_else(|| CliError::Usage(format!("{origin}:{}: expected `key=value`", i + 1)))?;
            self.set(k, v)?;
        }
        Ok(())
    }

    pub fn load(path: &Path) -> Result<Self, CliError> {
        let text = fs::read_to_string(path)
            .map_err(|e| CliError::Usage(format!("cannot read config {}: {e}", path.display())))?;
        let mut cfg = Self::default();
        cfg.apply_text(&text, &path.display().to_string())?;
        Ok(cfg)
    }

    pub fn validate(&self) -> Result<(), CliError> {
        let bad = |m: String| Err(CliError::Usage(m));
        if !(0.0..1.0).contains(&self.head_drop_fraction) {
            return bad(format!("head_drop_fraction must lie in [0, 1), got {}", self.head_drop_fraction));
        }
        if !(self.early_fraction > 0.0 && self.early_fraction < 1.0) {
            return bad(format!("early_fraction must lie in (0, 1), got {}", self.early_fraction));
        }
        if self.k_codewords < 2 {
            return bad(format!("k_codewords must be at least 2, got {}", self.k_codewords));
        }
        if self.n_tiers < 2 {
            return bad(format!("n_tiers must be at least 2, got {}", self.n_tiers));
        }
        if self.eta < 2 {
            return bad(format!("eta must be at least 2, got {}", self.eta));
        }
        if self.l2_grid.is_empty() || self.l2_grid.iter().chain([&self.l2]).any(|x| x.is_nan() || *x < 0.0) {
            return bad("l2 values must be nonnegative and the grid nonempty".into());
        }
        if self.rounds == 0 || self.validation_seeds == 0 || self.bin_width == 0 || self.window_secs == 0 {
            return bad("rounds, validation_seeds, bin_width and window_secs must be positive".into());
        }
        if !(self.threshold > 0.0 && self.threshold < 1.0) {
            return bad(format!("threshold must lie in (0, 1), got {}", self.threshold));
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn parses_and_validates() {
        let mut c = PipelineConfig::default();
        c.apply_text("# comment\n\nseed = 9\nl2_grid=0.1,1\nsynth.n_events=40\n", "t").unwrap();
        assert_eq!(c.seed, 9);
        assert_eq!(c.l2_grid, [0.1, 1.0]);
        assert_eq!(c.synth, [("n_events".to_owned(), "40".to_owned())]);
        assert!(c.validate().is_ok());
        assert!(c.apply_text("nonsense", "t").is_err());
        assert!(c.set("bogus", "1").is_err());
        c.set("n_tiers", "1").unwrap();
        assert!(c.validate().is_err());
    }
}
