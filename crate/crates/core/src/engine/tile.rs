//! Row-band tiling and result stitching.

use crate::raster::{ClassifiedGrid, DnHistogram, RasterGrid};

use super::op::{Operation, Payload};
use super::EngineError;

/// A rectangular window of the task's image.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Tile {
    pub row0: usize,
    pub rows: usize,
    pub col0: usize,
    pub cols: usize,
}

impl Tile {
    pub fn len(&self) -> usize {
        self.rows * self.cols
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }
}

/// Splits an image into `n` full-width row bands whose heights differ by
/// at most one (taller bands first). `n` is capped at the row count.
pub fn split(height: usize, width: usize, n: usize) -> Result<Vec<Tile>, EngineError> {
    if n == 0 {
        return Err(EngineError::InvalidTileCount);
    }
    if height == 0 || width == 0 {
        return Err(EngineError::EmptyImage);
    }
    let n = n.min(height);
    let (base, extra) = (height / n, height % n);
    let mut row0 = 0;
    Ok((0..n)
        .map(|i| {
            let rows = base + usize::from(i < extra);
            let t = Tile {
                row0,
                rows,
                col0: 0,
                cols: width,
            };
            row0 += rows;
            t
        })
        .collect())
}

/// Whole-image output of a task.
#[derive(Debug, Clone, PartialEq)]
pub enum TaskOutput {
    /// `flagged` sums the per-tile clamp counters.
    Raster { grid: RasterGrid, flagged: u64 },
    Classified(ClassifiedGrid),
    Histogram(DnHistogram),
}

/// Outcome of one job, as reported by a worker.
#[derive(Debug, Clone, PartialEq)]
pub struct TileResult {
    pub job_id: u64,
    pub tile: Tile,
    pub outcome: Result<Payload, String>,
}

/// Stitches tile results into the whole-image output. Results may arrive
/// in any order; job ids are tile indices.
pub fn aggregate(
    op: &Operation,
    height: usize,
    width: usize,
    tiles: &[Tile],
    results: Vec<TileResult>,
) -> Result<TaskOutput, EngineError> {
    let mut slots: Vec<Option<Payload>> = vec![None; tiles.len()];
    let mut failed = Vec::new();
    for r in results {
        let idx = r.job_id as usize;
        if idx >= tiles.len() || tiles[idx] != r.tile {
            return Err(EngineError::Aggregate(format!("result for unknown job {}", r.job_id)));
        }
        match r.outcome {
            Ok(p) => {
                if let Some(shape) = p.shape() {
                    if shape != (r.tile.rows, r.tile.cols) {
                        return Err(EngineError::Aggregate(format!(
                            "job {} returned {}x{} for a {}x{} tile",
                            r.job_id, shape.0, shape.1, r.tile.rows, r.tile.cols
                        )));
                    }
                }
                slots[idx] = Some(p);
            }
            Err(reason) => failed.push((r.job_id, reason)),
        }
    }
    if !failed.is_empty() {
        failed.sort();
        return Err(EngineError::FailedTiles(failed));
    }
    let missing: Vec<u64> = (0..tiles.len()).filter(|&i| slots[i].is_none()).map(|i| i as u64).collect();
    if !missing.is_empty() {
        return Err(EngineError::MissingTiles(missing));
    }
    let covered: usize = tiles.iter().map(Tile::len).sum();
    if covered != height * width {
        return Err(EngineError::Aggregate(format!(
            "tiles cover {covered} of {} pixels",
            height * width
        )));
    }
    let payloads = slots.into_iter().map(Option::unwrap);
    let wrong = |what: &str| EngineError::Aggregate(format!("{} produced a {what} payload", op.name()));

    match op {
        Operation::Histogram { max_dn } => {
            let mut total = DnHistogram::empty(*max_dn);
            for p in payloads {
                match p {
                    Payload::Histogram(h) if h.max_dn() == *max_dn => total.merge(&h),
                    _ => return Err(wrong("non-histogram")),
                }
            }
            Ok(TaskOutput::Histogram(total))
        }
        Operation::Classify { signatures, .. } => {
            let mut labels = vec![0u16; height * width];
            for (tile, p) in tiles.iter().zip(payloads) {
                let Payload::Labels { labels: part, .. } = p else {
                    return Err(wrong("non-label"));
                };
                for r in 0..tile.rows {
                    let dst = (tile.row0 + r) * width + tile.col0;
                    labels[dst..dst + tile.cols].copy_from_slice(&part[r * tile.cols..(r + 1) * tile.cols]);
                }
            }
            let legend = signatures.iter().map(|s| s.class_name.clone()).collect();
            Ok(TaskOutput::Classified(
                ClassifiedGrid::new(width, height, labels, legend).map_err(|e| EngineError::Aggregate(e.to_string()))?,
            ))
        }
        _ => {
            let mut samples = vec![0.0; height * width];
            let mut nodata = None;
            let mut flagged = 0;
            for (tile, p) in tiles.iter().zip(payloads) {
                let Payload::Raster { grid, flagged: f } = p else {
                    return Err(wrong("non-raster"));
                };
                match nodata {
                    None => nodata = Some(grid.nodata()),
                    Some(nd) if nd.to_bits() != grid.nodata().to_bits() => {
                        return Err(EngineError::Aggregate("tiles disagree on the no-data value".into()))
                    }
                    _ => {}
                }
                flagged += f;
                for r in 0..tile.rows {
                    let dst = (tile.row0 + r) * width + tile.col0;
                    samples[dst..dst + tile.cols].copy_from_slice(grid.row(r));
                }
            }
            let grid = RasterGrid::new(width, height, samples, nodata.unwrap_or(crate::DEFAULT_NODATA))
                .map_err(|e| EngineError::Aggregate(e.to_string()))?;
            Ok(TaskOutput::Raster { grid, flagged })
        }
    }
}
