use std::io;
use std::path::PathBuf;

use thiserror::Error;

use crate::config::VertexId;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid configuration: {0}")]
    InvalidConfig(String),

    #[error("vertex {vertex} is out of range for a graph with {num_vertices} vertices")]
    VertexOutOfRange { vertex: VertexId, num_vertices: usize },

    #[error("hash table is at its load-factor limit ({live} live entries in {slots} slots)")]
    CapacityExceeded { live: usize, slots: usize },

    #[error("allocation of {bytes} bytes failed")]
    OutOfMemory { bytes: usize },

    #[error("requested chunk of {0} bytes is outside the supported range")]
    BadChunkSize(usize),

    #[error("{path}:{line}: {message}")]
    Parse {
        path: PathBuf,
        line: usize,
        message: String,
    },

    #[error("{path}:{line}: vertex id {raw} does not fit the id space")]
    IdOverflow {
        path: PathBuf,
        line: usize,
        raw: String,
    },

    #[error("{path}:{line}: negative edge weight {raw}")]
    NegativeWeight {
        path: PathBuf,
        line: usize,
        raw: String,
    },

    #[error("edge property missing on a weighted graph")]
    MissingWeight,

    #[error(transparent)]
    Io(#[from] io::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),

    #[error("thread pool: {0}")]
    ThreadPool(#[from] rayon::ThreadPoolBuildError),
}
