use thiserror::Error;

#[derive(Debug, Error)]
pub enum MapError {
    #[error("cannot read map {path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
    #[error("map schema violation at line {line}, column {column}: {message}")]
    Schema {
        line: usize,
        column: usize,
        message: String,
    },
    #[error("invalid map: {field}: {rule}")]
    Invalid { field: String, rule: String },
    #[error("unsupported map format version {0}")]
    UnsupportedVersion(u32),
    #[error("unknown map id {0:?}")]
    UnknownMap(String),
    #[error("map lacks road component {0}")]
    MissingComponent(String),
}

impl MapError {
    /// Stable rule tag for invariant violations.
    pub fn rule(&self) -> Option<&str> {
        match self {
            MapError::Invalid { rule, .. } => Some(rule),
            _ => None,
        }
    }
}

#[derive(Debug, Error)]
pub enum ScenarioError {
    #[error("scenario parse error at line {line}, column {column}: {message}")]
    Parse {
        line: usize,
        column: usize,
        message: String,
    },
    #[error(transparent)]
    Map(#[from] MapError),
    #[error("cannot read {path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
}

#[derive(Debug, Error)]
pub enum TraceError {
    #[error("cannot access trace {path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
    #[error("trace parse error at byte offset {offset}: {message}")]
    Parse { offset: usize, message: String },
    #[error("trace truncated at byte offset {offset}: {message}")]
    Truncated { offset: usize, message: String },
    #[error("unsupported trace format version {0}")]
    UnsupportedVersion(u32),
    #[error("scenario digest mismatch: header says {expected}, scenario hashes to {actual}")]
    ScenarioDigest { expected: String, actual: String },
}

#[derive(Debug, Clone, Error, PartialEq)]
pub enum PlanError {
    #[error("goal is unreachable from the initial lane")]
    UnreachableGoal,
    #[error("position ({x:.2}, {y:.2}) is not on any lane")]
    OffLane { x: f64, y: f64 },
}

#[derive(Debug, Error, PartialEq, Eq)]
pub enum MutationError {
    #[error("no feasible placement after {0} retries")]
    RetryExhausted(u32),
    #[error("scenario has no component mutable under strategy {0}")]
    NothingToMutate(String),
}

#[derive(Debug, Error)]
pub enum CampaignError {
    #[error(transparent)]
    Map(#[from] MapError),
    #[error(transparent)]
    Scenario(#[from] ScenarioError),
    #[error(transparent)]
    Trace(#[from] TraceError),
    #[error("config error: {0}")]
    Config(String),
    #[error("road component {component} yielded no completable mission after {draws} draws")]
    SeedExhausted { component: String, draws: u32 },
    #[error("determinism violation: {0}")]
    Determinism(String),
    #[error("i/o error on {path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
}

impl CampaignError {
    pub fn io(path: impl AsRef<std::path::Path>, source: std::io::Error) -> Self {
        CampaignError::Io {
            path: path.as_ref().display().to_string(),
            source,
        }
    }
}
