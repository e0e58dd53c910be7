//! Black-box identification oracles and query accounting.

mod gallery;
mod remote;

use std::sync::Arc;

use serde::{Deserialize, Serialize};
use thiserror::Error;

pub use self::gallery::{
    extract_embedding, match_embedding, Embedding, Gallery, GalleryEntry, GalleryManifest,
    ManifestIdentity, DEFAULT_EXTRACTOR_ID, DEFAULT_THRESHOLD, EMBEDDING_SIDE,
};
pub use self::remote::{IdentifyRequest, RemoteOracle, WireError, IDENTIFY_PATH, TOKEN_HEADER};
use crate::warp::Image;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum OracleError {
    #[error("query budget exhausted ({used}/{budget})")]
    BudgetExhausted { used: u32, budget: u32 },
    #[error("remote oracle refused the query: budget exhausted")]
    RemoteBudgetExhausted,
    #[error("transport failure: {0}")]
    Transport(String),
    #[error("protocol error: {0}")]
    Protocol(String),
    #[error("gallery is empty")]
    EmptyGallery,
    #[error("embedding dimension {found} does not match gallery dimension {expected}")]
    DimensionMismatch { expected: usize, found: usize },
    #[error("label {0:?} is already enrolled")]
    DuplicateLabel(String),
    #[error("enrollment of {0:?} needs at least one image")]
    NoImages(String),
    #[error("enrollment of {0:?} produced a zero embedding (constant images)")]
    DegenerateEmbedding(String),
    #[error("threshold {0} outside [0, 1]")]
    InvalidThreshold(f64),
    #[error("confidence {0} outside [0, 1]")]
    InvalidConfidence(f64),
    #[error("manifest: {0}")]
    Manifest(String),
}

/// Hard label (absent when nobody is recognized) plus a confidence in `[0, 1]`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct OracleResponse {
    pub identity: Option<String>,
    pub confidence: f64,
}

impl OracleResponse {
    pub fn new(identity: Option<String>, confidence: f64) -> Result<Self, OracleError> {
        if !(0.0..=1.0).contains(&confidence) {
            return Err(OracleError::InvalidConfidence(confidence));
        }
        Ok(Self {
            identity,
            confidence,
        })
    }

    pub fn recognized(label: impl Into<String>, confidence: f64) -> Self {
        Self::new(Some(label.into()), confidence).expect("confidence in [0, 1]")
    }

    pub fn unrecognized(confidence: f64) -> Self {
        Self::new(None, confidence).expect("confidence in [0, 1]")
    }
}

/// Per-run query counter. `used` only grows and never passes `budget`.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct QueryLedger {
    used: u32,
    budget: u32,
}

impl QueryLedger {
    pub fn new(budget: u32) -> Self {
        Self { used: 0, budget }
    }

    pub fn used(&self) -> u32 {
        self.used
    }

    pub fn budget(&self) -> u32 {
        self.budget
    }

    pub fn remaining(&self) -> u32 {
        self.budget - self.used
    }

    /// Reserves one query, failing without side effects when none is left.
    pub fn spend(&mut self) -> Result<(), OracleError> {
        if self.used >= self.budget {
            return Err(OracleError::BudgetExhausted {
                used: self.used,
                budget: self.budget,
            });
        }
        self.used += 1;
        Ok(())
    }
}

/// A target identification model, observable only through its responses.
pub trait Oracle {
    fn query(&mut self, img: &Image) -> Result<OracleResponse, OracleError>;
}

impl<O: Oracle + ?Sized> Oracle for Box<O> {
    fn query(&mut self, img: &Image) -> Result<OracleResponse, OracleError> {
        (**self).query(img)
    }
}

/// Submits `img` to `oracle`, charging the ledger first. A query that fails in
/// transport still counts as spent.
pub fn identify<O: Oracle + ?Sized>(
    oracle: &mut O,
    img: &Image,
    ledger: &mut QueryLedger,
) -> Result<OracleResponse, OracleError> {
    ledger.spend()?;
    oracle.query(img)
}

/// Gallery matching on the default embedding, in-process.
#[derive(Clone, Debug)]
pub struct LocalOracle {
    gallery: Arc<Gallery>,
}

impl LocalOracle {
    pub fn new(gallery: Arc<Gallery>) -> Self {
        Self { gallery }
    }

    pub fn gallery(&self) -> &Gallery {
        &self.gallery
    }
}

impl Oracle for LocalOracle {
    fn query(&mut self, img: &Image) -> Result<OracleResponse, OracleError> {
        match_embedding(&extract_embedding(img), &self.gallery)
    }
}

/// Replays a fixed list of outcomes; the last one repeats once the script runs
/// out.
#[derive(Clone, Debug)]
pub struct ScriptedOracle {
    script: Vec<Result<OracleResponse, OracleError>>,
    calls: usize,
}

impl ScriptedOracle {
    pub fn new(script: Vec<Result<OracleResponse, OracleError>>) -> Self {
        assert!(!script.is_empty(), "scripted oracle needs at least one step");
        Self { script, calls: 0 }
    }

    pub fn from_responses(responses: impl IntoIterator<Item = OracleResponse>) -> Self {
        Self::new(responses.into_iter().map(Ok).collect())
    }

    pub fn constant(response: OracleResponse) -> Self {
        Self::new(vec![Ok(response)])
    }

    pub fn calls(&self) -> usize {
        self.calls
    }
}

impl Oracle for ScriptedOracle {
    fn query(&mut self, _img: &Image) -> Result<OracleResponse, OracleError> {
        let step = self.script[self.calls.min(self.script.len() - 1)].clone();
        self.calls += 1;
        step
    }
}
