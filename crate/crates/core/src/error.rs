use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("topological ordering violated at node {0}")]
    TopologicalOrder(usize),
    #[error("cyclic parent chain through node {0}")]
    Cycle(usize),
    #[error("leaf node {0} has children")]
    LeafWithChildren(usize),
    #[error("internal node {0} has no children")]
    ChildlessInternal(usize),
    #[error("root weight nonzero")]
    RootWeight,
    #[error("invalid weight at node {node}: {weight}")]
    InvalidWeight { node: usize, weight: f64 },
    #[error("malformed tree: {0}")]
    MalformedTree(String),
    #[error("dimension mismatch: expected {expected}, got {got}")]
    Dimension { expected: usize, got: usize },
    #[error("empty input: {0}")]
    Empty(&'static str),
    #[error("nonfinite value at index {0}")]
    NonFinite(usize),
    #[error("invalid configuration: {0}")]
    Config(String),
    #[error("support mismatch: {0}")]
    Support(String),
    #[error("kernel underflow at row {row}: regularization too small for the cost scale")]
    Underflow { row: usize },
    #[error("all entries fall below threshold {0}")]
    AllBelowThreshold(f64),
    #[error("parse error at line {line}: {msg}")]
    Parse { line: usize, msg: String },
    #[error("unknown support id {0:?}")]
    UnknownId(String),
    #[error("negative mass {mass} for {id:?}")]
    NegativeMass { id: String, mass: f64 },
    #[error("io error on {path}: {msg}")]
    Io { path: String, msg: String },
}

pub type Result<T> = std::result::Result<T, Error>;

pub(crate) fn check_len(expected: usize, got: usize) -> Result<()> {
    if expected == got {
        Ok(())
    } else {
        Err(Error::Dimension { expected, got })
    }
}
