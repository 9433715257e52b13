//! Shared domain identifiers and the agent-facing context vector.

use std::fmt;

use thiserror::Error;

use crate::num::Scalar;

/// Index into a dataset's drug list.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct DrugId(pub usize);

/// Index into a dataset's unit (cell line / patient proxy) list.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct UnitId(pub usize);

impl fmt::Display for DrugId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.0)
    }
}

impl fmt::Display for UnitId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.0)
    }
}

/// Which feature blocks make up the agent's state vector.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum ContextMode {
    /// Genomic embedding only (default width 20).
    Genomic,
    /// Per-drug guideline recommendation indicators only (width k).
    Guideline,
    /// Embedding followed by the recommendation block.
    Both,
}

impl ContextMode {
    pub const ALL: [ContextMode; 3] = [ContextMode::Genomic, ContextMode::Guideline, ContextMode::Both];

    /// Context length for a dataset with embeddings of width `embed` and `k` drugs.
    pub fn context_len(self, embed: usize, k: usize) -> usize {
        match self {
            ContextMode::Genomic => embed,
            ContextMode::Guideline => k,
            ContextMode::Both => embed + k,
        }
    }

    pub fn as_str(self) -> &'static str {
        match self {
            ContextMode::Genomic => "genomic",
            ContextMode::Guideline => "guideline",
            ContextMode::Both => "both",
        }
    }
}

impl fmt::Display for ContextMode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl std::str::FromStr for ContextMode {
    type Err = ParseEnumError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "genomic" => Ok(ContextMode::Genomic),
            "guideline" => Ok(ContextMode::Guideline),
            "both" => Ok(ContextMode::Both),
            other => Err(ParseEnumError {
                what: "state mode",
                got: other.to_string(),
                expected: "genomic|guideline|both",
            }),
        }
    }
}

/// Unrecognised textual tag for an enum-valued flag.
#[derive(Debug, Clone, Error)]
#[error("unknown {what} `{got}` (expected {expected})")]
pub struct ParseEnumError {
    pub what: &'static str,
    pub got: String,
    pub expected: &'static str,
}

/// Invalid context construction.
#[derive(Debug, Clone, Error)]
pub enum ContextError {
    #[error("recommendation block entry {index} is {value}, expected 0 or 1")]
    NonBinaryRecommendation { index: usize, value: f64 },
}

/// Feature vector presented to an agent before it acts.
///
/// The trailing `rec_len` entries, when present, are the binary guideline
/// recommendation block and are validated to be exactly 0 or 1.
#[derive(Debug, Clone, PartialEq)]
pub struct Context<S: Scalar> {
    mode: ContextMode,
    values: Vec<S>,
    rec_len: usize,
}

impl<S: Scalar> Context<S> {
    pub fn genomic(values: Vec<S>) -> Context<S> {
        Context {
            mode: ContextMode::Genomic,
            values,
            rec_len: 0,
        }
    }

    pub fn guideline(recommendations: Vec<S>) -> Result<Context<S>, ContextError> {
        let rec_len = recommendations.len();
        Self::checked(ContextMode::Guideline, recommendations, rec_len)
    }

    pub fn both(mut embedding: Vec<S>, recommendations: Vec<S>) -> Result<Context<S>, ContextError> {
        let rec_len = recommendations.len();
        embedding.extend(recommendations);
        Self::checked(ContextMode::Both, embedding, rec_len)
    }

    fn checked(mode: ContextMode, values: Vec<S>, rec_len: usize) -> Result<Context<S>, ContextError> {
        let offset = values.len() - rec_len;
        for (i, v) in values[offset..].iter().enumerate() {
            if *v != S::zero() && *v != S::one() {
                return Err(ContextError::NonBinaryRecommendation {
                    index: i,
                    value: v.as_(),
                });
            }
        }
        Ok(Context { mode, values, rec_len })
    }

    pub fn mode(&self) -> ContextMode {
        self.mode
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn as_slice(&self) -> &[S] {
        &self.values
    }

    /// The binary recommendation block (empty in genomic mode).
    pub fn recommendation_block(&self) -> &[S] {
        &self.values[self.values.len() - self.rec_len..]
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn context_len_is_pure_function_of_mode() {
        assert_eq!(ContextMode::Genomic.context_len(20, 7), 20);
        assert_eq!(ContextMode::Guideline.context_len(20, 7), 7);
        assert_eq!(ContextMode::Both.context_len(20, 7), 27);
    }

    #[test]
    fn guideline_block_must_be_binary() {
        assert!(Context::guideline(vec![0.0, 1.0, 0.0]).is_ok());
        assert!(Context::guideline(vec![0.0, 0.5]).is_err());
        let both = Context::both(vec![-1.3, 2.0], vec![1.0, 0.0]).unwrap();
        assert_eq!(both.len(), 4);
        assert_eq!(both.recommendation_block(), &[1.0, 0.0]);
        // Negative embedding entries are fine; only the trailing block is checked.
        assert!(Context::both(vec![-1.0, 7.0], vec![0.0, 2.0]).is_err());
    }

    #[test]
    fn context_mode_round_trips_through_str() {
        for mode in ContextMode::ALL {
            assert_eq!(mode.as_str().parse::<ContextMode>().unwrap(), mode);
        }
        assert!("umap".parse::<ContextMode>().is_err());
    }
}
