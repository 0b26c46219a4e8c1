use thiserror::Error;

use crate::structures::Arc;

/// Domain errors of the loop-energy model and its parameter files.
#[derive(Debug, Clone, PartialEq, Error)]
pub enum ModelError {
    #[error("hairpin below minimum chord length: {unpaired} unpaired bases (need at least 3)")]
    HairpinTooShort { unpaired: usize },
    #[error("multiloop requires at least two inner branches: got {branches} branches including the closing pair")]
    MultiloopTooFewBranches { branches: usize },
    #[error("invalid energy parameters: {0}")]
    InvalidParams(String),
    #[error("parameter file line {line}: {message}")]
    ParamFile { line: usize, message: String },
    #[error("unknown parameter `{0}`")]
    UnknownParam(String),
}

/// Violations of the secondary-structure invariants and dot-bracket syntax errors.
#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum StructureError {
    #[error("arc {arc} lies outside the backbone 1..={n}")]
    OutOfRange { arc: Arc, n: usize },
    #[error("short arc {arc}: chord length {} is below 4", arc.j - arc.i)]
    ShortArc { arc: Arc },
    #[error("vertex {vertex} is shared by arcs {first} and {second}")]
    SharedVertex { vertex: usize, first: Arc, second: Arc },
    #[error("crossing arcs {first} and {second}")]
    Crossing { first: Arc, second: Arc },
    #[error("unbalanced dot-bracket string at position {position}")]
    Unbalanced { position: usize },
    #[error("unexpected character `{ch}` at position {position} (allowed: '(', ')', '.')")]
    InvalidChar { ch: char, position: usize },
    #[error("exhaustive enumeration is limited to n <= {limit}, got {n}")]
    TooLarge { n: usize, limit: usize },
}

/// Failures of root finding, classification and tuning.
#[derive(Debug, Clone, PartialEq, Error)]
pub enum SingularityError {
    #[error("no branch point in unit interval: the discriminant keeps its sign on (0, 1)")]
    NoBranchPoint,
    #[error("past branch point: discriminant is negative at z = {z}")]
    PastBranchPoint { z: f64 },
    #[error("branch validation failed: neither root matches the series at z = {z} (series {series}, roots {plus} / {minus})")]
    BranchValidation {
        z: f64,
        series: f64,
        plus: f64,
        minus: f64,
    },
    #[error("inconsistent classification: tau_h gap {gap} but pole search says {pole}")]
    Inconsistent { gap: f64, pole: String },
    #[error("bracket does not straddle the transition: gap {lo_gap} at {lo}, {hi_gap} at {hi}")]
    BracketNoSignChange {
        lo: f64,
        hi: f64,
        lo_gap: f64,
        hi_gap: f64,
    },
    #[error("gap is not monotone in the free parameter on the bracket (at {at})")]
    NonMonotone { at: f64 },
    #[error(transparent)]
    Model(#[from] ModelError),
}

/// Errors from the series tables, samplers and fits.
#[derive(Debug, Clone, PartialEq, Error)]
pub enum AnalysisError {
    #[error("n = {n} exceeds the brute-force limit {limit}")]
    TooLarge { n: usize, limit: usize },
    #[error("requested n = {n} but tables only reach {nmax}")]
    OutOfTable { n: usize, nmax: usize },
    #[error("block table truncated: kmax = {kmax} is below {needed}")]
    Truncated { kmax: usize, needed: usize },
    #[error("limit law requires the {expected} regime, parameters are {actual}")]
    WrongRegime { expected: String, actual: String },
    #[error("degenerate sample: {0}")]
    Degenerate(String),
    #[error(transparent)]
    Singularity(#[from] SingularityError),
    #[error(transparent)]
    Structure(#[from] StructureError),
}
