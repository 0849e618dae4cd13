//! Run configuration: defaults, optional key-value file, command-line flags.

use std::fs;
use std::path::{Path, PathBuf};

use holonomy_lab::moebius::GroupKind;
use serde::Serialize;
use thiserror::Error;

#[derive(Debug, Error)]
pub enum ConfigError {
    #[error("cannot read config file {0}: {1}")]
    Io(PathBuf, std::io::Error),
    #[error("config file line {line}: {message}")]
    Syntax { line: usize, message: String },
    #[error("invalid value for {key}: {value}")]
    Value { key: String, value: String },
    #[error("{0}")]
    Invalid(String),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum Format {
    Json,
    Csv,
}

/// Values that may come from the config file or the flags.
#[derive(Debug, Clone, Default)]
pub struct Overrides {
    pub kind: Option<String>,
    pub big_n: Option<u32>,
    pub n: Option<usize>,
    pub degree: Option<usize>,
    pub samples: Option<usize>,
    pub steps: Option<usize>,
    pub seed: Option<u64>,
    pub out: Option<PathBuf>,
    pub format: Option<Format>,
}

impl Overrides {
    /// Entries of `other` win.
    pub fn merge(self, other: Overrides) -> Overrides {
        Overrides {
            kind: other.kind.or(self.kind),
            big_n: other.big_n.or(self.big_n),
            n: other.n.or(self.n),
            degree: other.degree.or(self.degree),
            samples: other.samples.or(self.samples),
            steps: other.steps.or(self.steps),
            seed: other.seed.or(self.seed),
            out: other.out.or(self.out),
            format: other.format.or(self.format),
        }
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct RunConfig {
    pub kind: String,
    #[serde(rename = "N")]
    pub big_n: Option<u32>,
    pub n: usize,
    #[serde(rename = "D")]
    pub degree: usize,
    pub samples: usize,
    pub steps: usize,
    pub seed: u64,
    pub out: Option<PathBuf>,
    pub format: Format,
    #[serde(skip)]
    pub group: GroupKind,
}

pub const DEFAULT_DEGREE: usize = 3;
pub const DEFAULT_SAMPLES: usize = 30;
pub const DEFAULT_STEPS: usize = 512;

fn parse<T: std::str::FromStr>(key: &str, value: &str) -> Result<T, ConfigError> {
    value.parse().map_err(|_| ConfigError::Value {
        key: key.to_string(),
        value: value.to_string(),
    })
}

pub fn parse_format(value: &str) -> Result<Format, ConfigError> {
    match value {
        "json" => Ok(Format::Json),
        "csv" => Ok(Format::Csv),
        other => Err(ConfigError::Value {
            key: "format".into(),
            value: other.into(),
        }),
    }
}

/// Parses `key = value` lines; `#` starts a comment.
pub fn parse_config_text(text: &str) -> Result<Overrides, ConfigError> {
    let mut o = Overrides::default();
    for (idx, raw) in text.lines().enumerate() {
        let line = raw.split('#').next().unwrap_or("").trim();
        if line.is_empty() {
            continue;
        }
        let Some((key, value)) = line.split_once('=').or_else(|| line.split_once(':')) else {
            return Err(ConfigError::Syntax {
                line: idx + 1,
                message: format!("expected `key = value`, got `{line}`"),
            });
        };
        let (key, value) = (key.trim(), value.trim());
        match key {
            "kind" => o.kind = Some(value.to_string()),
            "N" => o.big_n = Some(parse(key, value)?),
            "n" => o.n = Some(parse(key, value)?),
            "D" => o.degree = Some(parse(key, value)?),
            "samples" => o.samples = Some(parse(key, value)?),
            "steps" => o.steps = Some(parse(key, value)?),
            "seed" => o.seed = Some(parse(key, value)?),
            "out" => o.out = Some(PathBuf::from(value)),
            "format" => o.format = Some(parse_format(value)?),
            other => {
                return Err(ConfigError::Syntax {
                    line: idx + 1,
                    message: format!("unknown key `{other}`"),
                })
            }
        }
    }
    Ok(o)
}

pub fn read_config_file(path: &Path) -> Result<Overrides, ConfigError> {
    let text = fs::read_to_string(path).map_err(|e| ConfigError::Io(path.to_path_buf(), e))?;
    parse_config_text(&text)
}

impl RunConfig {
    pub fn resolve(o: Overrides) -> Result<RunConfig, ConfigError> {
        let kind = o.kind.unwrap_or_else(|| "cyclic".to_string());
        let needs_n = matches!(kind.as_str(), "cyclic" | "dihedral");
        let big_n = if needs_n { Some(o.big_n.unwrap_or(2)) } else { None };
        let group = GroupKind::from_name(&kind, big_n).map_err(|e| ConfigError::Invalid(e.to_string()))?;
        group.validate().map_err(|e| ConfigError::Invalid(e.to_string()))?;
        let cfg = RunConfig {
            kind,
            big_n,
            n: o.n.unwrap_or(2),
            degree: o.degree.unwrap_or(DEFAULT_DEGREE),
            samples: o.samples.unwrap_or(DEFAULT_SAMPLES),
            steps: o.steps.unwrap_or(DEFAULT_STEPS),
            seed: o.seed.unwrap_or(0),
            out: o.out,
            format: o.format.unwrap_or(Format::Json),
            group,
        };
        if cfg.n == 0 || cfg.samples == 0 {
            return Err(ConfigError::Invalid("n and samples must be positive".into()));
        }
        if !(1..=4).contains(&cfg.degree) {
            return Err(ConfigError::Invalid(format!("D must be in 1..=4, got {}", cfg.degree)));
        }
        if cfg.steps < 64 {
            return Err(ConfigError::Invalid(format!("steps must be at least 64, got {}", cfg.steps)));
        }
        Ok(cfg)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn file_then_flags() {
        let file = parse_config_text("# run\nkind = dihedral\nN = 3\nsamples: 12\nseed = 4 # trailing\n").unwrap();
        let flags = Overrides {
            samples: Some(7),
            ..Default::default()
        };
        let cfg = RunConfig::resolve(file.merge(flags)).unwrap();
        assert_eq!(cfg.group, GroupKind::Dihedral(3));
        assert_eq!((cfg.samples, cfg.seed, cfg.degree, cfg.steps), (7, 4, 3, 512));
    }

    #[test]
    fn rejects_bad_input() {
        assert!(parse_config_text("kind dihedral").is_err());
        assert!(parse_config_text("colour = red").is_err());
        assert!(parse_config_text("N = two").is_err());
        let bad_d = Overrides {
            degree: Some(5),
            ..Default::default()
        };
        assert!(RunConfig::resolve(bad_d).is_err());
        let bad_kind = Overrides {
            kind: Some("cubic".into()),
            ..Default::default()
        };
        assert!(RunConfig::resolve(bad_kind).is_err());
    }

    #[test]
    fn platonic_kinds_ignore_n() {
        let o = Overrides {
            kind: Some("icosahedral".into()),
            big_n: Some(9),
            ..Default::default()
        };
        let cfg = RunConfig::resolve(o).unwrap();
        assert_eq!(cfg.big_n, None);
        assert_eq!(cfg.group, GroupKind::Icosahedral);
    }
}
