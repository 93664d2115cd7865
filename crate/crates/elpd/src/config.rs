//! Run configuration for the `fit-compare` workflow: a flat key/value text
//! format with `model NAME { columns }` blocks.
//!
//! ```text
//! # lines starting with '#' (or trailing '#' fragments) are comments
//! dataset     = data/heart.csv
//! outcome     = chd
//! inference   = mcmc              # or: laplace
//! estimators  = psis_loo, waic    # any of: loo_exact kfold is_loo psis_loo waic dic
//! chains      = 4
//! iterations  = 4000
//! warmup      = 2000
//! seed        = 42
//! standardize = true
//! kfold_k     = 10                # required when 'kfold' is requested
//! subsample_m = 0.1               # fraction in (0,1) or absolute count
//! out         = results
//!
//! model base { age, height }
//! model full {
//!     age, height,
//!     weight
//! }
//! ```

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

use crate::error::{Error, Result};
use crate::estimators::EstimatorKind;

/// How the posterior is obtained for the shared fit.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum InferenceMethod {
    Mcmc,
    Laplace,
}

impl InferenceMethod {
    /// Stable lowercase label used in configuration files and manifests.
    pub fn label(&self) -> &'static str {
        match self {
            InferenceMethod::Mcmc => "mcmc",
            InferenceMethod::Laplace => "laplace",
        }
    }
}

/// Subsample size: a fraction of n or an absolute count.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum SubsampleSize {
    Fraction(f64),
    Count(usize),
}

impl SubsampleSize {
    /// Resolve to a concrete count for a dataset of `n` observations,
    /// clamped into `1..=n`.
    pub fn resolve(&self, n: usize) -> usize {
        match *self {
            SubsampleSize::Fraction(f) => ((f * n as f64).round() as usize).clamp(1, n),
            SubsampleSize::Count(m) => m.clamp(1, n),
        }
    }
}

/// A named model: an intercept plus the listed predictor columns.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ModelDef {
    pub name: String,
    pub predictors: Vec<String>,
}

/// Parsed and validated run configuration.
#[derive(Debug, Clone)]
pub struct RunConfig {
    pub dataset_path: PathBuf,
    pub outcome_column: String,
    pub models: Vec<ModelDef>,
    pub estimators: Vec<EstimatorKind>,
    pub inference: InferenceMethod,
    pub chains: usize,
    pub iterations: usize,
    pub warmup: usize,
    pub kfold_k: Option<usize>,
    pub subsample_m: Option<SubsampleSize>,
    pub seed: u64,
    pub standardize: bool,
    pub out_dir: Option<PathBuf>,
}

fn config_err(line_no: usize, message: impl std::fmt::Display) -> Error {
    Error::Config(format!("line {line_no}: {message}"))
}

fn parse_estimator(token: &str) -> Option<EstimatorKind> {
    match token {
        "loo_exact" => Some(EstimatorKind::LooExact),
        "kfold" => Some(EstimatorKind::KFold),
        "is_loo" => Some(EstimatorKind::IsLoo),
        "psis_loo" => Some(EstimatorKind::PsisLoo),
        "waic" => Some(EstimatorKind::Waic),
        "dic" => Some(EstimatorKind::Dic),
        _ => None,
    }
}

impl RunConfig {
    /// Parse a configuration file.
    pub fn from_file(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|source| Error::Io {
            path: path.display().to_string(),
            source,
        })?;
        Self::parse_str(&text)
    }

    /// Parse configuration text. The grammar is line-oriented: `key = value`
    /// pairs, `model NAME { col, ... }` blocks (braces may span lines), and
    /// `#` comments.
    pub fn parse_str(text: &str) -> Result<Self> {
        let mut keys: BTreeMap<String, (usize, String)> = BTreeMap::new();
        let mut models: Vec<ModelDef> = Vec::new();

        let mut lines = text.lines().enumerate().peekable();
        while let Some((idx, raw)) = lines.next() {
            let line_no = idx + 1;
            let line = strip_comment(raw).trim().to_string();
            if line.is_empty() {
                continue;
            }
            if let Some(rest) = line.strip_prefix("model ") {
                // model NAME { cols } — collect lines until the closing brace
                let mut block = rest.trim().to_string();
                while !block.contains('}') {
                    match lines.next() {
                        Some((_, cont)) => {
                            block.push(' ');
                            block.push_str(strip_comment(cont).trim());
                        }
                        None => {
                            return Err(config_err(line_no, "unterminated model block"));
                        }
                    }
                }
                let open = block.find('{').ok_or_else(|| {
                    config_err(line_no, "expected '{' after the model name")
                })?;
                let close = block.rfind('}').expect("checked above");
                if close < open {
                    return Err(config_err(line_no, "'}' appears before '{'"));
                }
                let name = block[..open].trim().to_string();
                if name.is_empty() || name.contains(char::is_whitespace) {
                    return Err(config_err(line_no, "model name must be a single word"));
                }
                if !block[close + 1..].trim().is_empty() {
                    return Err(config_err(line_no, "unexpected text after '}'"));
                }
                let mut predictors = Vec::new();
                for token in block[open + 1..close].split(',') {
                    let token = token.trim();
                    if token.is_empty() {
                        continue;
                    }
                    if token.contains(char::is_whitespace) {
                        return Err(config_err(
                            line_no,
                            format!("predictor '{token}' contains whitespace; separate columns with commas"),
                        ));
                    }
                    if predictors.iter().any(|p| p == token) {
                        return Err(config_err(
                            line_no,
                            format!("model {name} lists column {token} twice"),
                        ));
                    }
                    predictors.push(token.to_string());
                }
                if models.iter().any(|m| m.name == name) {
                    return Err(config_err(line_no, format!("duplicate model name {name}")));
                }
                models.push(ModelDef { name, predictors });
                continue;
            }
            match line.split_once('=') {
                Some((key, value)) => {
                    let key = key.trim().to_string();
                    let value = value.trim().to_string();
                    if key.is_empty() || value.is_empty() {
                        return Err(config_err(line_no, "expected 'key = value'"));
                    }
                    if keys.contains_key(&key) {
                        return Err(config_err(line_no, format!("duplicate key {key}")));
                    }
                    keys.insert(key, (line_no, value));
                }
                None => {
                    return Err(config_err(
                        line_no,
                        format!("cannot parse '{line}'; expected 'key = value' or a model block"),
                    ));
                }
            }
        }

        let mut take = |key: &str| keys.remove(key);
        let required = |entry: Option<(usize, String)>, key: &str| -> Result<(usize, String)> {
            entry.ok_or_else(|| Error::Config(format!("missing required key '{key}'")))
        };

        let (_, dataset) = required(take("dataset"), "dataset")?;
        let (_, outcome) = required(take("outcome"), "outcome")?;
        let (est_line, est_value) = required(take("estimators"), "estimators")?;
        let mut estimators = Vec::new();
        for token in est_value.split(',') {
            let token = token.trim();
            if token.is_empty() {
                continue;
            }
            let kind = parse_estimator(token).ok_or_else(|| {
                config_err(
                    est_line,
                    format!(
                        "unknown estimator '{token}'; choose from loo_exact, kfold, \
                         is_loo, psis_loo, waic, dic"
                    ),
                )
            })?;
            if estimators.contains(&kind) {
                return Err(config_err(est_line, format!("estimator '{token}' listed twice")));
            }
            estimators.push(kind);
        }

        let inference = match take("inference") {
            None => InferenceMethod::Mcmc,
            Some((line_no, v)) => match v.as_str() {
                "mcmc" => InferenceMethod::Mcmc,
                "laplace" => InferenceMethod::Laplace,
                other => {
                    return Err(config_err(
                        line_no,
                        format!("inference must be 'mcmc' or 'laplace', got '{other}'"),
                    ))
                }
            },
        };

        fn parse_num<T: std::str::FromStr>(
            entry: Option<(usize, String)>,
            key: &str,
            default: T,
        ) -> Result<T> {
            match entry {
                None => Ok(default),
                Some((line_no, v)) => v.parse::<T>().map_err(|_| {
                    config_err(line_no, format!("cannot parse {key} value '{v}' as a number"))
                }),
            }
        }

        let chains = parse_num(take("chains"), "chains", 4usize)?;
        let iterations = parse_num(take("iterations"), "iterations", 4000usize)?;
        let warmup = parse_num(take("warmup"), "warmup", iterations / 2)?;
        let seed = parse_num(take("seed"), "seed", 0u64)?;
        let kfold_k = match take("kfold_k") {
            None => None,
            Some(entry) => Some(parse_num(Some(entry), "kfold_k", 0usize)?),
        };

        let standardize = match take("standardize") {
            None => false,
            Some((line_no, v)) => match v.to_ascii_lowercase().as_str() {
                "true" => true,
                "false" => false,
                other => {
                    return Err(config_err(
                        line_no,
                        format!("standardize must be 'true' or 'false', got '{other}'"),
                    ))
                }
            },
        };

        let subsample_m = match take("subsample_m") {
            None => None,
            Some((line_no, v)) => {
                if let Ok(count) = v.parse::<usize>() {
                    Some(SubsampleSize::Count(count))
                } else {
                    let f = v.parse::<f64>().map_err(|_| {
                        config_err(
                            line_no,
                            format!("subsample_m must be a count or a fraction, got '{v}'"),
                        )
                    })?;
                    if !(0.0..1.0).contains(&f) || f == 0.0 {
                        return Err(config_err(
                            line_no,
                            format!("fractional subsample_m must lie strictly in (0, 1), got {f}"),
                        ));
                    }
                    Some(SubsampleSize::Fraction(f))
                }
            }
        };

        let out_dir = take("out").map(|(_, v)| PathBuf::from(v));

        if let Some((line_no, _)) = keys.values().next() {
            let unknown: Vec<&str> = keys.keys().map(String::as_str).collect();
            return Err(config_err(
                *line_no,
                format!("unknown key(s): {}", unknown.join(", ")),
            ));
        }

        let config = RunConfig {
            dataset_path: PathBuf::from(dataset),
            outcome_column: outcome,
            models,
            estimators,
            inference,
            chains,
            iterations,
            warmup,
            kfold_k,
            subsample_m,
            seed,
            standardize,
            out_dir,
        };
        config.validate()?;
        Ok(config)
    }

    /// Cross-field validation (column existence is checked at ingestion).
    pub fn validate(&self) -> Result<()> {
        if self.models.is_empty() {
            return Err(Error::Config("at least one model block is required".into()));
        }
        if self.estimators.is_empty() {
            return Err(Error::Config("at least one estimator is required".into()));
        }
        if self.chains == 0 {
            return Err(Error::Config("chains must be positive".into()));
        }
        if self.warmup == 0 || self.warmup >= self.iterations {
            return Err(Error::Config(format!(
                "warmup ({}) must be positive and below iterations ({})",
                self.warmup, self.iterations
            )));
        }
        let wants_kfold = self.estimators.contains(&EstimatorKind::KFold);
        match (wants_kfold, self.kfold_k) {
            (true, None) => {
                return Err(Error::Config(
                    "the kfold estimator needs 'kfold_k' (number of folds)".into(),
                ))
            }
            (true, Some(k)) if k < 2 => {
                return Err(Error::Config(format!("kfold_k must be at least 2, got {k}")))
            }
            _ => {}
        }
        if let Some(SubsampleSize::Count(0)) = self.subsample_m {
            return Err(Error::Config("subsample_m count must be positive".into()));
        }
        if self.subsample_m.is_some() && !self.estimators.contains(&EstimatorKind::PsisLoo) {
            return Err(Error::Config(
                "subsample_m only applies to the psis_loo estimator; add it to 'estimators'"
                    .into(),
            ));
        }
        if self.inference == InferenceMethod::Laplace {
            for kind in &self.estimators {
                if matches!(
                    kind,
                    EstimatorKind::IsLoo | EstimatorKind::Waic | EstimatorKind::Dic
                ) {
                    return Err(Error::Config(format!(
                        "estimator '{}' needs draws from the full posterior; \
                         use inference = mcmc",
                        kind.label()
                    )));
                }
            }
        }
        for model in &self.models {
            if model.name.is_empty() {
                return Err(Error::Config("empty model name".into()));
            }
        }
        Ok(())
    }
}

fn strip_comment(line: &str) -> &str {
    match line.find('#') {
        Some(pos) => &line[..pos],
        None => line,
    }
}
