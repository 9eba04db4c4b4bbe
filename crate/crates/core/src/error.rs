//! Error type shared across the pipeline stages.

use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("i/o error: {0}")]
    Io(#[from] std::io::Error),

    #[error("{path}: file is empty")]
    EmptyFile { path: String },

    #[error("{path}:{line}: expected {expected} columns, found {found}")]
    RaggedRow {
        path: String,
        line: usize,
        expected: usize,
        found: usize,
    },

    #[error("{path}:{line}: duplicate gene id `{id}`")]
    DuplicateGeneId {
        path: String,
        line: usize,
        id: String,
    },

    #[error("{path}: duplicate sample id `{id}`")]
    DuplicateSampleId { path: String, id: String },

    #[error("{path}:{line}: negative count `{value}`")]
    NegativeCount {
        path: String,
        line: usize,
        value: String,
    },

    #[error("{path}:{line}: invalid {field} `{value}`")]
    InvalidField {
        path: String,
        line: usize,
        field: &'static str,
        value: String,
    },

    #[error("{path}:{line}: duplicate (subject, cid) pair ({subject}, {cid})")]
    DuplicateSubjectCid {
        path: String,
        line: usize,
        subject: String,
        cid: u8,
    },

    #[error("sample `{0}` has no metadata row")]
    MissingMeta(String),

    #[error("marker gene `{0}` not present in count matrix")]
    MarkerAbsent(String),

    #[error("need at least {needed} samples, found {found}")]
    TooFewSamples { needed: usize, found: usize },

    #[error("sample `{0}` has zero effective library size")]
    ZeroLibSize(String),

    #[error("sample `{0}` shares no positive gene with the TMM reference")]
    NoSharedPositiveGenes(String),

    #[error("design has no residual degrees of freedom")]
    NoResidualDf,

    #[error("reduced design is not nested in the full design")]
    NonNestedDesigns,

    #[error("p-value {0} outside [0, 1]")]
    InvalidPValue(f64),

    #[error("contrast {contrast} has {found} paired subjects, need at least {needed}")]
    TooFewPairs {
        contrast: String,
        found: usize,
        needed: usize,
    },

    #[error("empty gene subset")]
    EmptyGeneSubset,

    #[error("regularization parameter must be non-negative, got {0}")]
    InvalidLambda(f64),

    #[error("{what} did not converge within {max_iter} iterations (gap {gap:.3e})")]
    NonConvergence {
        what: &'static str,
        max_iter: usize,
        gap: f64,
    },

    #[error("fixed-effect design is rank deficient")]
    RankDeficientDesign,

    #[error("only {found} complete cases, need at least {needed}")]
    TooFewCompleteCases { found: usize, needed: usize },

    #[error("clinical variable `{0}` has no observed change for this contrast")]
    ClinicalVarMissing(String),

    #[error("graph has no nodes")]
    EmptyGraph,

    #[error("contradictory duplicate edge {u} -- {v}")]
    ContradictoryEdge { u: String, v: String },

    #[error("infeasible scenario: {0}")]
    InfeasibleScenario(String),

    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("missing upstream artifact `{0}`; run the producing stage first")]
    MissingArtifact(String),

    #[error("digest mismatch for `{0}`: cached output is stale")]
    DigestMismatch(String),
}
