//! Grid configuration files: line-oriented `key = value` cells with `#`
//! comments.
//!
//! ```text
//! # dataset: either the three CSV paths ...
//! responses  = data/responses.csv
//! features   = data/features.csv
//! biomarkers = data/biomarkers.csv
//! # ... or a synthetic cohort:
//! # synth.n = 1000
//! # synth.k = 7
//! # synth.dim = 20
//! # synth.seed = 7
//! # synth.noise = 0.1
//! rules   = data/rules.txt
//! states  = genomic,guideline,both
//! rewards = diff,rank,percentile
//! agents  = uniform linear greedy dropout:keep=0.9
//! seeds   = 0,1,2,3,4
//! out     = results
//! window  = 50
//! # horizon = 2000
//! ```
//!
//! `agents` is whitespace-separated (agent options contain commas);
//! `agents = all` expands to every family.

use std::path::PathBuf;

use thiserror::Error;

use crate::agents::{AgentFamily, AgentSpec, AgentSpecError};
use crate::rewards::RewardKind;
use crate::types::{ContextMode, ParseEnumError};

#[derive(Debug, Error)]
pub enum GridFileError {
    #[error("line {line}: expected `key = value`, found `{text}`")]
    NotKeyValue { line: usize, text: String },
    #[error("line {line}: unknown key `{key}`")]
    UnknownKey { line: usize, key: String },
    #[error("line {line}: duplicate key `{key}`")]
    DuplicateKey { line: usize, key: String },
    #[error("line {line}: bad value for `{key}`: {message}")]
    BadValue { line: usize, key: String, message: String },
    #[error("missing required key `{key}`")]
    MissingKey { key: &'static str },
    #[error("dataset must be either the three CSV paths (responses/features/biomarkers) or synth.* keys, not both")]
    AmbiguousDataset,
    #[error(transparent)]
    Mode(#[from] ParseEnumError),
    #[error(transparent)]
    Agent(#[from] AgentSpecError),
}

/// Where the grid's cohort comes from.
#[derive(Debug, Clone)]
pub enum DatasetSource {
    Paths {
        responses: PathBuf,
        features: PathBuf,
        biomarkers: PathBuf,
    },
    Synth {
        n: usize,
        k: usize,
        dim: usize,
        seed: u64,
        noise: Option<f64>,
    },
}

/// A parsed grid configuration file.
#[derive(Debug, Clone)]
pub struct GridFile {
    pub dataset: DatasetSource,
    pub rules: Option<PathBuf>,
    pub modes: Vec<ContextMode>,
    pub rewards: Vec<RewardKind>,
    pub agents: Vec<AgentSpec>,
    pub seeds: Vec<u64>,
    pub horizon: Option<usize>,
    pub out: PathBuf,
    pub window: usize,
}

pub fn parse_grid_file(text: &str) -> Result<GridFile, GridFileError> {
    let mut pairs: Vec<(usize, String, String)> = Vec::new();
    for (idx, raw) in text.lines().enumerate() {
        let line = idx + 1;
        let stripped = match raw.split_once('#') {
            Some((before, _)) => before.trim(),
            None => raw.trim(),
        };
        if stripped.is_empty() {
            continue;
        }
        let (key, value) = stripped.split_once('=').ok_or_else(|| GridFileError::NotKeyValue {
            line,
            text: stripped.to_string(),
        })?;
        let key = key.trim().to_string();
        if pairs.iter().any(|(_, k, _)| *k == key) {
            return Err(GridFileError::DuplicateKey { line, key });
        }
        pairs.push((line, key, value.trim().to_string()));
    }

    let mut responses = None;
    let mut features = None;
    let mut biomarkers = None;
    let mut synth: [Option<(usize, String)>; 5] = [None, None, None, None, None];
    let mut rules = None;
    let mut modes = None;
    let mut rewards = None;
    let mut agents = None;
    let mut seeds = None;
    let mut horizon = None;
    let mut out = None;
    let mut window = None;

    for (line, key, value) in pairs {
        let bad = |message: String| GridFileError::BadValue {
            line,
            key: key.clone(),
            message,
        };
        match key.as_str() {
            "responses" => responses = Some(PathBuf::from(&value)),
            "features" => features = Some(PathBuf::from(&value)),
            "biomarkers" => biomarkers = Some(PathBuf::from(&value)),
            "rules" => rules = Some(PathBuf::from(&value)),
            "synth.n" => synth[0] = Some((line, value)),
            "synth.k" => synth[1] = Some((line, value)),
            "synth.dim" => synth[2] = Some((line, value)),
            "synth.seed" => synth[3] = Some((line, value)),
            "synth.noise" => synth[4] = Some((line, value)),
            "states" => {
                let parsed: Result<Vec<ContextMode>, _> =
                    value.split(',').map(|m| m.trim().parse::<ContextMode>()).collect();
                modes = Some(parsed?);
            }
            "rewards" => {
                let parsed: Result<Vec<RewardKind>, _> =
                    value.split(',').map(|m| m.trim().parse::<RewardKind>()).collect();
                rewards = Some(parsed.map_err(|e| bad(e.to_string()))?);
            }
            "agents" => {
                let specs = if value == "all" {
                    AgentFamily::ALL.into_iter().map(AgentSpec::new).collect()
                } else {
                    let parsed: Result<Vec<AgentSpec>, _> =
                        value.split_whitespace().map(AgentSpec::parse).collect();
                    parsed?
                };
                agents = Some(specs);
            }
            "seeds" => {
                let parsed: Result<Vec<u64>, _> = value.split(',').map(|s| s.trim().parse::<u64>()).collect();
                seeds = Some(parsed.map_err(|e| bad(e.to_string()))?);
            }
            "horizon" => horizon = Some(value.parse::<usize>().map_err(|e| bad(e.to_string()))?),
            "out" => out = Some(PathBuf::from(&value)),
            "window" => window = Some(value.parse::<usize>().map_err(|e| bad(e.to_string()))?),
            _ => return Err(GridFileError::UnknownKey { line, key }),
        }
    }

    let any_path = responses.is_some() || features.is_some() || biomarkers.is_some();
    let any_synth = synth.iter().any(Option::is_some);
    if any_path && any_synth {
        return Err(GridFileError::AmbiguousDataset);
    }
    let dataset = if any_synth {
        let need = |slot: usize, key: &'static str| -> Result<(usize, String), GridFileError> {
            synth[slot].clone().ok_or(GridFileError::MissingKey { key })
        };
        let parse_num = |pair: (usize, String), key: &str| -> Result<usize, GridFileError> {
            pair.1.parse::<usize>().map_err(|e| GridFileError::BadValue {
                line: pair.0,
                key: key.to_string(),
                message: e.to_string(),
            })
        };
        let n = parse_num(need(0, "synth.n")?, "synth.n")?;
        let k = parse_num(need(1, "synth.k")?, "synth.k")?;
        let dim = parse_num(need(2, "synth.dim")?, "synth.dim")?;
        let seed_pair = need(3, "synth.seed")?;
        let seed = seed_pair.1.parse::<u64>().map_err(|e| GridFileError::BadValue {
            line: seed_pair.0,
            key: "synth.seed".to_string(),
            message: e.to_string(),
        })?;
        let noise = match &synth[4] {
            Some((line, v)) => Some(v.parse::<f64>().map_err(|e| GridFileError::BadValue {
                line: *line,
                key: "synth.noise".to_string(),
                message: e.to_string(),
            })?),
            None => None,
        };
        DatasetSource::Synth { n, k, dim, seed, noise }
    } else {
        DatasetSource::Paths {
            responses: responses.ok_or(GridFileError::MissingKey { key: "responses" })?,
            features: features.ok_or(GridFileError::MissingKey { key: "features" })?,
            biomarkers: biomarkers.ok_or(GridFileError::MissingKey { key: "biomarkers" })?,
        }
    };

    Ok(GridFile {
        dataset,
        rules,
        modes: modes.ok_or(GridFileError::MissingKey { key: "states" })?,
        rewards: rewards.ok_or(GridFileError::MissingKey { key: "rewards" })?,
        agents: agents.ok_or(GridFileError::MissingKey { key: "agents" })?,
        seeds: seeds.ok_or(GridFileError::MissingKey { key: "seeds" })?,
        horizon,
        out: out.ok_or(GridFileError::MissingKey { key: "out" })?,
        window: window.unwrap_or(50),
    })
}
