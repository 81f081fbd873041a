use std::path::PathBuf;

use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("i/o error on {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("{context}, line {line}: {message}")]
    Parse {
        context: String,
        line: usize,
        message: String,
    },

    #[error("line {line}: self-loop on node `{node}`")]
    SelfLoop { line: usize, node: String },

    #[error("line {line}: negative weight {weight}")]
    NegativeWeight { line: usize, weight: f64 },

    #[error("line {line}: duplicate edge {a} -- {b}{}", if *conflicting { " with conflicting weight" } else { "" })]
    DuplicateEdge {
        line: usize,
        a: String,
        b: String,
        conflicting: bool,
    },

    #[error("empty input: {0}")]
    Empty(String),

    #[error("unknown class `{0}`")]
    UnknownClass(String),

    #[error("unknown node `{0}`")]
    UnknownNode(String),

    #[error("cycle detected among classes: {}", .0.join(", "))]
    Cycle(Vec<String>),

    #[error("class `{0}` has more than one parent")]
    NotATree(String),

    #[error("edge {parent} -> {child} is not part of the input hierarchy")]
    ForeignEdge { parent: String, child: String },

    #[error("unpopulated ancestor `{0}`: no annotated nodes")]
    UnpopulatedAncestor(String),

    #[error("no classes in range [{min}, {max}]")]
    NoClassesInRange { min: usize, max: usize },

    #[error("insufficient {stratum} for stratification: {found} < {k}")]
    InsufficientStratum {
        stratum: &'static str,
        found: usize,
        k: usize,
    },

    #[error("degenerate labels: both classes must be present")]
    DegenerateLabels,

    #[error("non-finite value at row {row}, column {column}")]
    NonFinite { row: usize, column: usize },

    #[error("feature schema mismatch: model {expected}, input {found}")]
    SchemaMismatch { expected: String, found: String },

    #[error("shape mismatch: {0}")]
    Shape(String),

    #[error("invalid configuration: {0}")]
    Config(String),

    #[error("every hyper-parameter candidate failed")]
    AllCandidatesFailed,

    #[error("missing probability for ancestor `{ancestor}` of `{class}`")]
    MissingProbability { class: String, ancestor: String },

    #[error("graph has no edges to walk on")]
    IsolatedGraph,

    #[error("dangling is_a references: {}", .0.join(", "))]
    DanglingReferences(Vec<String>),

    #[error("missing artifact {path} (run `{stage}` first)")]
    MissingArtifact { stage: String, path: PathBuf },

    #[error("stale artifact {path} (rerun `{stage}`)")]
    StaleArtifact { stage: String, path: PathBuf },

    #[error("invariant violated: {0}")]
    Invariant(String),

    #[error("external classifier: {0}")]
    External(String),

    #[error("stage `{stage}`{}: {source}", .subhierarchy.as_ref().map(|s| format!(" (sub-hierarchy {s})")).unwrap_or_default())]
    Stage {
        stage: String,
        subhierarchy: Option<String>,
        #[source]
        source: Box<Error>,
    },
}

impl Error {
    pub fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }

    pub fn parse(context: impl Into<String>, line: usize, message: impl Into<String>) -> Self {
        Error::Parse {
            context: context.into(),
            line,
            message: message.into(),
        }
    }

    pub fn in_stage(self, stage: &str, subhierarchy: Option<&str>) -> Self {
        match self {
            Error::Stage { .. } => self,
            other => Error::Stage {
                stage: stage.to_string(),
                subhierarchy: subhierarchy.map(str::to_string),
                source: Box::new(other),
            },
        }
    }

    /// Errors caused by the user's inputs rather than by the pipeline itself.
    pub fn is_input_error(&self) -> bool {
        match self {
            Error::Stage { stage, source, .. } => stage == "ingest" || source.is_input_error(),
            Error::Io { .. }
            | Error::Parse { .. }
            | Error::SelfLoop { .. }
            | Error::NegativeWeight { .. }
            | Error::DuplicateEdge { .. }
            | Error::Empty(_)
            | Error::UnknownClass(_)
            | Error::UnknownNode(_)
            | Error::Cycle(_)
            | Error::DanglingReferences(_)
            | Error::Config(_)
            | Error::MissingArtifact { .. }
            | Error::StaleArtifact { .. } => true,
            _ => false,
        }
    }
}
