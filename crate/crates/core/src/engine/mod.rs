//! Split-and-aggregate execution.
//!
//! A [`Task`] (operation + whole-image bands) is cut into row-band tiles;
//! each tile becomes a job carrying its own pixels, executed by a local
//! thread or a remote worker over TCP, and the results are stitched back
//! together. Kernels are pixel-local, so the output never depends on how
//! the work was distributed.

mod op;
pub mod protocol;
mod remote;
mod scheduler;
mod tile;

use std::io;

use thiserror::Error;

pub use op::{CalibrateKind, Operation, Payload};
pub use protocol::{ProtocolError, MAX_FRAME_BYTES, PROTOCOL_VERSION};
pub use remote::{serve_worker, RemoteExecutor, WorkerOptions, WorkerServer};
pub use scheduler::{reduce_histogram, run_task, Endpoint, RunOptions, Task, WorkerDescriptor};
pub use tile::{aggregate, split, TaskOutput, Tile, TileResult};

#[derive(Debug, Error)]
pub enum EngineError {
    #[error("tile count must be at least 1")]
    InvalidTileCount,
    #[error("cannot tile an empty image")]
    EmptyImage,
    #[error("no workers configured")]
    NoWorkers,
    #[error("all workers are dead; unfinished jobs {0:?}")]
    NoLiveWorkers(Vec<u64>),
    #[error("invalid worker descriptor '{0}' (expected local, local:N or host:port)")]
    InvalidWorker(String),
    #[error("job {job_id} failed after {attempts} attempt(s): {reason}")]
    JobFailed { job_id: u64, attempts: u32, reason: String },
    #[error("missing results for jobs {0:?}")]
    MissingTiles(Vec<u64>),
    #[error("failed jobs: {}", .0.iter().map(|(id, r)| format!("{id} ({r})")).collect::<Vec<_>>().join(", "))]
    FailedTiles(Vec<(u64, String)>),
    #[error("cannot aggregate: {0}")]
    Aggregate(String),
    #[error("invalid task input: {0}")]
    Input(String),
    #[error("handshake rejected: {0}")]
    Handshake(String),
    #[error(transparent)]
    Protocol(#[from] ProtocolError),
    #[error(transparent)]
    Io(#[from] io::Error),
}
