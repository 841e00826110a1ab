// SPDX-License-Identifier: Apache-2.0

use std::path::PathBuf;

#[derive(Debug, thiserror::Error)]
pub enum Error {
    #[error("invalid configuration: {0}")]
    Config(String),

    #[error("{path}:{line}: {msg}")]
    TrafficTable { path: String, line: usize, msg: String },

    #[error("{}: {cause}", path.display())]
    Io {
        path: PathBuf,
        cause: std::io::Error,
    },

    #[error("failed to parse {what}: {msg}")]
    Parse { what: String, msg: String },

    #[error("no route from {node} toward {dest}")]
    NoRoute { node: crate::Coord3, dest: crate::Coord3 },

    #[error("experiment {experiment} (seed {seed}) hit the cap of {cap} faults without failing")]
    FaultCap { experiment: usize, seed: u64, cap: u64 },
}

pub type Result<T, E = Error> = std::result::Result<T, E>;

impl Error {
    pub fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io { path: path.into(), cause: source }
    }
}
