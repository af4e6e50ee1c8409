use std::fmt;
use std::path::PathBuf;

use serde::{Deserialize, Serialize};

pub type Result<T, E = FlickError> = std::result::Result<T, E>;

/// Pipeline stage a failure originated from.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Stage {
    Stage1,
    Stage2,
    Plft,
    Clsft,
    Eval,
}

impl fmt::Display for Stage {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let name = match self {
            Stage::Stage1 => "stage1",
            Stage::Stage2 => "stage2",
            Stage::Plft => "plft",
            Stage::Clsft => "clsft",
            Stage::Eval => "eval",
        };
        f.write_str(name)
    }
}

#[derive(Debug, thiserror::Error)]
pub enum FlickError {
    #[error("invalid argument: {0}")]
    Argument(String),

    #[error("format error: {0}")]
    Format(String),

    #[error("data error: {0}")]
    Data(String),

    #[error("numeric error in epoch {epoch}: {detail}")]
    Numeric { epoch: usize, detail: String },

    #[error("selection error: {0}")]
    Selection(String),

    #[error("config error: {0}")]
    Config(String),

    #[error("io error on {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("[{stage}] {source}")]
    Stage {
        stage: Stage,
        #[source]
        source: Box<FlickError>,
    },
}

/// Coarse error class, used for CLI exit codes.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum ErrorKind {
    Argument,
    Data,
    Numeric,
}

impl FlickError {
    pub fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        FlickError::Io {
            path: path.into(),
            source,
        }
    }

    pub fn at(self, stage: Stage) -> Self {
        FlickError::Stage {
            stage,
            source: Box::new(self),
        }
    }

    /// The innermost error, with stage tags peeled off.
    pub fn root(&self) -> &FlickError {
        match self {
            FlickError::Stage { source, .. } => source.root(),
            other => other,
        }
    }

    pub fn stage(&self) -> Option<Stage> {
        match self {
            FlickError::Stage { stage, .. } => Some(*stage),
            _ => None,
        }
    }

    pub fn kind(&self) -> ErrorKind {
        match self.root() {
            FlickError::Argument(_) | FlickError::Config(_) => ErrorKind::Argument,
            FlickError::Numeric { .. } => ErrorKind::Numeric,
            FlickError::Format(_)
            | FlickError::Data(_)
            | FlickError::Selection(_)
            | FlickError::Io { .. } => ErrorKind::Data,
            FlickError::Stage { .. } => unreachable!("root() strips stage tags"),
        }
    }

    /// Process exit status: 2 bad arguments, 3 data/format, 4 numeric.
    pub fn exit_code(&self) -> i32 {
        match self.kind() {
            ErrorKind::Argument => 2,
            ErrorKind::Data => 3,
            ErrorKind::Numeric => 4,
        }
    }
}

pub(crate) trait StageExt<T> {
    fn stage(self, stage: Stage) -> Result<T>;
}

impl<T> StageExt<T> for Result<T> {
    fn stage(self, stage: Stage) -> Result<T> {
        self.map_err(|e| e.at(stage))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn stage_tag_keeps_root_kind() {
        let err = FlickError::Numeric {
            epoch: 3,
            detail: "loss is NaN".into(),
        }
        .at(Stage::Plft);
        assert_eq!(err.stage(), Some(Stage::Plft));
        assert_eq!(err.exit_code(), 4);
        assert!(err.to_string().starts_with("[plft]"));
    }

    #[test]
    fn exit_codes() {
        assert_eq!(FlickError::Argument("x".into()).exit_code(), 2);
        assert_eq!(FlickError::Format("x".into()).exit_code(), 3);
        assert_eq!(FlickError::Selection("x".into()).at(Stage::Stage2).exit_code(), 3);
    }
}
