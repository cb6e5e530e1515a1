use std::path::PathBuf;

use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("flow {flow_id}: destination {destination} unreachable from source {source_node}")]
    Unreachable {
        flow_id: usize,
        source_node: usize,
        destination: usize,
    },

    #[error("leader backbone is disconnected")]
    DisconnectedBackbone,

    #[error("infeasible geometry: {0}")]
    InfeasibleGeometry(String),

    #[error("config error: {0}")]
    Config(String),

    #[error("malformed csv: {0}")]
    Csv(String),

    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
}

pub type Result<T> = std::result::Result<T, Error>;

pub(crate) fn invalid(msg: impl Into<String>) -> Error {
    Error::InvalidParameter(msg.into())
}
