//! Job queue and worker slots.
//!
//! Each worker slot runs on its own coordinator thread and pulls jobs from
//! a shared board guarded by one mutex. In static mode job `i` is pinned
//! to slot `i % slots`, reproducing one-tile-per-node distribution; pins
//! are dropped when their slot dies so the work can still finish.

use std::collections::VecDeque;
use std::fmt;
use std::str::FromStr;
use std::sync::{Condvar, Mutex};
use std::thread;
use std::time::Duration;

use crate::raster::{DnHistogram, RasterGrid};

use super::op::{Operation, Payload};
use super::remote::RemoteExecutor;
use super::tile::{aggregate, split, TaskOutput, Tile, TileResult};
use super::EngineError;

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Endpoint {
    /// Threads inside the coordinator process.
    Local,
    /// `host:port` of a process started with `serve_worker`.
    Remote(String),
}

/// A worker and how many jobs it runs concurrently.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct WorkerDescriptor {
    pub endpoint: Endpoint,
    pub capacity: usize,
}

impl WorkerDescriptor {
    pub fn local(capacity: usize) -> Self {
        Self {
            endpoint: Endpoint::Local,
            capacity,
        }
    }

    pub fn remote(addr: impl Into<String>) -> Self {
        Self {
            endpoint: Endpoint::Remote(addr.into()),
            capacity: 1,
        }
    }
}

impl fmt::Display for WorkerDescriptor {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match &self.endpoint {
            Endpoint::Local => write!(f, "local:{}", self.capacity),
            Endpoint::Remote(a) if self.capacity == 1 => write!(f, "{a}"),
            Endpoint::Remote(a) => write!(f, "{a}*{}", self.capacity),
        }
    }
}

/// `local`, `local:N`, `host:port` or `host:port*N`.
impl FromStr for WorkerDescriptor {
    type Err = EngineError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let bad = || EngineError::InvalidWorker(s.to_string());
        let (base, cap) = match s.split_once('*') {
            Some((b, c)) => (b, Some(c)),
            None => (s, None),
        };
        let parse_cap = |c: &str| c.trim().parse::<usize>().ok().filter(|&n| n >= 1).ok_or_else(bad);
        if base == "local" {
            return Ok(Self::local(cap.map(parse_cap).transpose()?.unwrap_or(1)));
        }
        if let Some(n) = base.strip_prefix("local:") {
            if cap.is_some() {
                return Err(bad());
            }
            return Ok(Self::local(parse_cap(n)?));
        }
        match base.rsplit_once(':') {
            Some((host, port)) if !host.is_empty() && port.parse::<u16>().is_ok() => Ok(Self {
                endpoint: Endpoint::Remote(base.to_string()),
                capacity: cap.map(parse_cap).transpose()?.unwrap_or(1),
            }),
            _ => Err(bad()),
        }
    }
}

#[derive(Debug, Clone)]
pub struct RunOptions {
    /// Extra attempts allowed per job after the first.
    pub retry_limit: u32,
    /// Pin tile `i` to slot `i % slots` instead of pulling from the queue.
    pub static_tiling: bool,
    /// Tile count override. Default: one per slot in static mode, four per
    /// slot otherwise.
    pub tiles: Option<usize>,
    pub connect_timeout: Duration,
    /// A worker that does not answer PING within this is declared dead.
    pub ping_timeout: Duration,
    /// Idle time after which a PING precedes the next job.
    pub heartbeat_after: Duration,
    pub job_timeout: Duration,
}

impl Default for RunOptions {
    fn default() -> Self {
        Self {
            retry_limit: 2,
            static_tiling: false,
            tiles: None,
            connect_timeout: Duration::from_secs(10),
            ping_timeout: Duration::from_secs(10),
            heartbeat_after: Duration::from_secs(5),
            job_timeout: Duration::from_secs(600),
        }
    }
}

/// An operation plus its whole-image input bands.
#[derive(Debug, Clone)]
pub struct Task {
    op: Operation,
    bands: Vec<RasterGrid>,
}

impl Task {
    pub fn new(op: Operation, bands: Vec<RasterGrid>) -> Result<Self, EngineError> {
        if bands.len() != op.input_count() || bands.is_empty() {
            return Err(EngineError::Input(format!(
                "{} expects {} band(s), got {}",
                op.name(),
                op.input_count(),
                bands.len()
            )));
        }
        for b in &bands[1..] {
            bands[0].same_shape(b).map_err(|e| EngineError::Input(e.to_string()))?;
        }
        Ok(Self { op, bands })
    }

    pub fn op(&self) -> &Operation {
        &self.op
    }

    pub fn bands(&self) -> &[RasterGrid] {
        &self.bands
    }

    pub fn height(&self) -> usize {
        self.bands[0].height()
    }

    pub fn width(&self) -> usize {
        self.bands[0].width()
    }

    /// Single-threaded, untiled execution; the reference every scheduled
    /// run must reproduce.
    pub fn run_direct(&self) -> Result<TaskOutput, EngineError> {
        let tiles = split(self.height(), self.width(), 1)?;
        let refs: Vec<&RasterGrid> = self.bands.iter().collect();
        let outcome = self.op.execute(&refs);
        aggregate(
            &self.op,
            self.height(),
            self.width(),
            &tiles,
            vec![TileResult {
                job_id: 0,
                tile: tiles[0],
                outcome,
            }],
        )
    }

    fn tile_bands(&self, t: &Tile) -> Result<Vec<RasterGrid>, EngineError> {
        self.bands
            .iter()
            .map(|b| b.window(t.row0, t.rows, t.col0, t.cols).map_err(|e| EngineError::Input(e.to_string())))
            .collect()
    }
}

/// Why a slot could not produce a job's payload.
#[derive(Debug)]
pub(crate) enum ExecError {
    /// The worker reported a failure; it is still usable.
    Job(String),
    /// The worker is gone.
    Connection(String),
}

pub(crate) trait Executor {
    fn execute(&mut self, job_id: u64, op: &Operation, bands: Vec<RasterGrid>) -> Result<Payload, ExecError>;
}

struct LocalExecutor;

impl Executor for LocalExecutor {
    fn execute(&mut self, _job_id: u64, op: &Operation, bands: Vec<RasterGrid>) -> Result<Payload, ExecError> {
        let refs: Vec<&RasterGrid> = bands.iter().collect();
        op.execute(&refs).map_err(ExecError::Job)
    }
}

struct PendingJob {
    index: usize,
    attempts: u32,
    pinned: Option<usize>,
}

struct Board {
    pending: VecDeque<PendingJob>,
    in_flight: usize,
    results: Vec<Option<Payload>>,
    failure: Option<EngineError>,
    live: usize,
}

impl Board {
    fn unpin(&mut self, slot: usize) {
        for j in self.pending.iter_mut().filter(|j| j.pinned == Some(slot)) {
            j.pinned = None;
        }
    }

    fn slot_died(&mut self, slot: usize) {
        self.live -= 1;
        self.unpin(slot);
        if self.live == 0 && self.failure.is_none() && !self.pending.is_empty() {
            let mut ids: Vec<u64> = self.pending.iter().map(|j| j.index as u64).collect();
            ids.sort_unstable();
            self.failure = Some(EngineError::NoLiveWorkers(ids));
        }
    }
}

struct Shared {
    board: Mutex<Board>,
    wake: Condvar,
}

impl Shared {
    fn take(&self, slot: usize) -> Option<PendingJob> {
        let mut b = self.board.lock().unwrap();
        loop {
            if b.failure.is_some() {
                return None;
            }
            if let Some(pos) = b.pending.iter().position(|j| j.pinned.is_none_or(|p| p == slot)) {
                b.in_flight += 1;
                return b.pending.remove(pos);
            }
            if b.pending.is_empty() && b.in_flight == 0 {
                return None;
            }
            b = self.wake.wait(b).unwrap();
        }
    }

    fn finish(&self, job: PendingJob, outcome: Result<Payload, ExecError>, retry_limit: u32, slot: usize) -> bool {
        let mut b = self.board.lock().unwrap();
        b.in_flight -= 1;
        let mut alive = true;
        match outcome {
            Ok(p) => b.results[job.index] = Some(p),
            Err(err) => {
                let reason = match err {
                    ExecError::Job(r) => r,
                    ExecError::Connection(r) => {
                        alive = false;
                        format!("worker lost: {r}")
                    }
                };
                let attempts = job.attempts + 1;
                if attempts > retry_limit {
                    if b.failure.is_none() {
                        b.failure = Some(EngineError::JobFailed {
                            job_id: job.index as u64,
                            attempts,
                            reason,
                        });
                    }
                } else {
                    log::warn!("job {} attempt {attempts} failed ({reason}); rescheduling", job.index);
                    b.pending.push_back(PendingJob { attempts, ..job });
                }
                if !alive {
                    b.slot_died(slot);
                }
            }
        }
        drop(b);
        self.wake.notify_all();
        alive
    }

    fn mark_dead(&self, slot: usize) {
        self.board.lock().unwrap().slot_died(slot);
        self.wake.notify_all();
    }
}

/// Splits the task into tiles, runs them on the given workers with retry,
/// and stitches the result. Output is bit-identical to
/// [`Task::run_direct`] whatever the worker count, tiling or completion
/// order.
pub fn run_task(task: &Task, workers: &[WorkerDescriptor], opts: &RunOptions) -> Result<TaskOutput, EngineError> {
    let slots: Vec<&Endpoint> = workers
        .iter()
        .flat_map(|w| std::iter::repeat_n(&w.endpoint, w.capacity))
        .collect();
    if slots.is_empty() {
        return Err(EngineError::NoWorkers);
    }
    let n_tiles = opts
        .tiles
        .unwrap_or(if opts.static_tiling { slots.len() } else { slots.len() * 4 });
    let tiles = split(task.height(), task.width(), n_tiles)?;
    let shared = Shared {
        board: Mutex::new(Board {
            pending: (0..tiles.len())
                .map(|index| PendingJob {
                    index,
                    attempts: 0,
                    pinned: opts.static_tiling.then_some(index % slots.len()),
                })
                .collect(),
            in_flight: 0,
            results: vec![None; tiles.len()],
            failure: None,
            live: slots.len(),
        }),
        wake: Condvar::new(),
    };
    log::debug!(
        "{}: {} tile(s) on {} slot(s){}",
        task.op().name(),
        tiles.len(),
        slots.len(),
        if opts.static_tiling { ", static" } else { "" }
    );

    thread::scope(|s| {
        for (slot, endpoint) in slots.iter().enumerate() {
            let (shared, tiles) = (&shared, &tiles);
            s.spawn(move || {
                let mut exec: Box<dyn Executor> = match endpoint {
                    Endpoint::Local => Box::new(LocalExecutor),
                    Endpoint::Remote(addr) => match RemoteExecutor::connect(addr, opts) {
                        Ok(r) => Box::new(r),
                        Err(e) => {
                            log::warn!("worker {addr} unavailable: {e}");
                            shared.mark_dead(slot);
                            return;
                        }
                    },
                };
                while let Some(job) = shared.take(slot) {
                    let outcome = match task.tile_bands(&tiles[job.index]) {
                        Ok(bands) => exec.execute(job.index as u64, task.op(), bands),
                        Err(e) => Err(ExecError::Job(e.to_string())),
                    };
                    if !shared.finish(job, outcome, opts.retry_limit, slot) {
                        if let Endpoint::Remote(addr) = endpoint {
                            log::warn!("worker {addr} marked dead");
                        }
                        return;
                    }
                }
            });
        }
    });

    let board = shared.board.into_inner().unwrap();
    if let Some(err) = board.failure {
        return Err(err);
    }
    let results = board
        .results
        .into_iter()
        .zip(&tiles)
        .enumerate()
        .filter_map(|(i, (r, t))| {
            r.map(|p| TileResult {
                job_id: i as u64,
                tile: *t,
                outcome: Ok(p),
            })
        })
        .collect();
    aggregate(task.op(), task.height(), task.width(), &tiles, results)
}

/// Global DN histogram of one band, computed tile-parallel and merged.
pub fn reduce_histogram(
    band: &RasterGrid,
    max_dn: u32,
    workers: &[WorkerDescriptor],
    opts: &RunOptions,
) -> Result<DnHistogram, EngineError> {
    let task = Task::new(Operation::Histogram { max_dn }, vec![band.clone()])?;
    match run_task(&task, workers, opts)? {
        TaskOutput::Histogram(h) => Ok(h),
        _ => unreachable!("histogram task yields a histogram"),
    }
}
