//! In-memory raster container, summary statistics and DN histograms.
//!
//! Every stage of the processing chain (digital numbers, radiance,
//! reflectance, NDVI, emissivity, temperature) is carried in a
//! [`RasterGrid`]: a row-major `f64` buffer with a no-data sentinel.

use thiserror::Error;

/// Conventional ESRI ASCII grid no-data value.
pub const DEFAULT_NODATA: f64 = -9999.0;

/// Largest digital number of an 8-bit Landsat TM/ETM+ band.
pub const MAX_DN_8BIT: u32 = 255;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum RasterError {
    #[error("grid dimensions must be at least 1x1, got {width}x{height}")]
    EmptyDimensions { width: usize, height: usize },
    #[error("sample buffer holds {actual} values, expected {width}x{height} = {expected}")]
    LengthMismatch {
        width: usize,
        height: usize,
        expected: usize,
        actual: usize,
    },
    #[error("shape mismatch: {left_width}x{left_height} vs {right_width}x{right_height}")]
    ShapeMismatch {
        left_width: usize,
        left_height: usize,
        right_width: usize,
        right_height: usize,
    },
    #[error("sample {value} at row {row}, col {col} is not an integer DN in 0..={max_dn}")]
    InvalidDn {
        row: usize,
        col: usize,
        value: f64,
        max_dn: u32,
    },
    #[error("label {label} at row {row}, col {col} exceeds the {classes}-class legend")]
    LabelOutOfRange {
        row: usize,
        col: usize,
        label: u16,
        classes: usize,
    },
    #[error("window rows {row0}..{row_end}, cols {col0}..{col_end} exceeds {width}x{height} grid")]
    WindowOutOfBounds {
        row0: usize,
        row_end: usize,
        col0: usize,
        col_end: usize,
        width: usize,
        height: usize,
    },
}

/// Rectangular grid of floating-point samples, row 0 at the top.
#[derive(Debug, Clone, PartialEq)]
pub struct RasterGrid {
    width: usize,
    height: usize,
    samples: Vec<f64>,
    nodata: f64,
}

impl RasterGrid {
    pub fn new(
        width: usize,
        height: usize,
        samples: Vec<f64>,
        nodata: f64,
    ) -> Result<Self, RasterError> {
        if width == 0 || height == 0 {
            return Err(RasterError::EmptyDimensions { width, height });
        }
        let expected = width * height;
        if samples.len() != expected {
            return Err(RasterError::LengthMismatch {
                width,
                height,
                expected,
                actual: samples.len(),
            });
        }
        Ok(Self {
            width,
            height,
            samples,
            nodata,
        })
    }

    pub fn filled(width: usize, height: usize, value: f64, nodata: f64) -> Result<Self, RasterError> {
        Self::new(width, height, vec![value; width * height], nodata)
    }

    pub fn from_fn(
        width: usize,
        height: usize,
        nodata: f64,
        mut f: impl FnMut(usize, usize) -> f64,
    ) -> Result<Self, RasterError> {
        let mut samples = Vec::with_capacity(width * height);
        for row in 0..height {
            for col in 0..width {
                samples.push(f(row, col));
            }
        }
        Self::new(width, height, samples, nodata)
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn len(&self) -> usize {
        self.samples.len()
    }

    pub fn is_empty(&self) -> bool {
        self.samples.is_empty()
    }

    pub fn nodata(&self) -> f64 {
        self.nodata
    }

    pub fn samples(&self) -> &[f64] {
        &self.samples
    }

    pub fn into_samples(self) -> Vec<f64> {
        self.samples
    }

    pub fn get(&self, row: usize, col: usize) -> Option<f64> {
        (row < self.height && col < self.width).then(|| self.samples[row * self.width + col])
    }

    pub fn row(&self, row: usize) -> &[f64] {
        &self.samples[row * self.width..(row + 1) * self.width]
    }

    /// True when `value` is the sentinel. NaN samples are also treated as
    /// missing so a NaN sentinel behaves as expected.
    pub fn is_nodata(&self, value: f64) -> bool {
        value == self.nodata || value.is_nan()
    }

    pub fn valid_samples(&self) -> impl Iterator<Item = f64> + '_ {
        self.samples.iter().copied().filter(move |v| !self.is_nodata(*v))
    }

    pub fn nodata_count(&self) -> usize {
        self.samples.iter().filter(|v| self.is_nodata(**v)).count()
    }

    pub fn same_shape(&self, other: &RasterGrid) -> Result<(), RasterError> {
        if self.width == other.width && self.height == other.height {
            Ok(())
        } else {
            Err(RasterError::ShapeMismatch {
                left_width: self.width,
                left_height: self.height,
                right_width: other.width,
                right_height: other.height,
            })
        }
    }

    /// Copy of a rectangular window.
    pub fn window(
        &self,
        row0: usize,
        rows: usize,
        col0: usize,
        cols: usize,
    ) -> Result<RasterGrid, RasterError> {
        if rows == 0 || cols == 0 || row0 + rows > self.height || col0 + cols > self.width {
            return Err(RasterError::WindowOutOfBounds {
                row0,
                row_end: row0 + rows,
                col0,
                col_end: col0 + cols,
                width: self.width,
                height: self.height,
            });
        }
        let mut samples = Vec::with_capacity(rows * cols);
        for r in row0..row0 + rows {
            let start = r * self.width + col0;
            samples.extend_from_slice(&self.samples[start..start + cols]);
        }
        RasterGrid::new(cols, rows, samples, self.nodata)
    }

    /// Applies `f` to every valid sample; no-data stays no-data.
    pub fn map_valid(&self, mut f: impl FnMut(f64) -> f64) -> RasterGrid {
        let samples = self
            .samples
            .iter()
            .map(|&v| if self.is_nodata(v) { self.nodata } else { f(v) })
            .collect();
        RasterGrid {
            width: self.width,
            height: self.height,
            samples,
            nodata: self.nodata,
        }
    }

    pub fn stats(&self) -> GridStats {
        stats(self)
    }
}

/// Moments over the valid pixels of a grid. `min`, `max`, `mean` and
/// `stddev` are NaN when `count` is zero.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GridStats {
    pub count: usize,
    pub min: f64,
    pub max: f64,
    pub mean: f64,
    /// Population standard deviation.
    pub stddev: f64,
}

impl GridStats {
    pub fn is_empty(&self) -> bool {
        self.count == 0
    }
}

/// Neumaier-compensated running sum; keeps the mean stable regardless of
/// pixel order.
#[derive(Default, Clone, Copy)]
struct CompensatedSum {
    sum: f64,
    compensation: f64,
}

impl CompensatedSum {
    fn add(&mut self, x: f64) {
        let t = self.sum + x;
        if self.sum.abs() >= x.abs() {
            self.compensation += (self.sum - t) + x;
        } else {
            self.compensation += (x - t) + self.sum;
        }
        self.sum = t;
    }

    fn value(&self) -> f64 {
        self.sum + self.compensation
    }
}

pub fn stats(grid: &RasterGrid) -> GridStats {
    let mut count = 0usize;
    let mut min = f64::INFINITY;
    let mut max = f64::NEG_INFINITY;
    let mut sum = CompensatedSum::default();
    for v in grid.valid_samples() {
        count += 1;
        min = min.min(v);
        max = max.max(v);
        sum.add(v);
    }
    if count == 0 {
        return GridStats {
            count,
            min: f64::NAN,
            max: f64::NAN,
            mean: f64::NAN,
            stddev: f64::NAN,
        };
    }
    let mean = (sum.value() / count as f64).clamp(min, max);
    let mut squares = CompensatedSum::default();
    for v in grid.valid_samples() {
        let d = v - mean;
        squares.add(d * d);
    }
    GridStats {
        count,
        min,
        max,
        mean,
        stddev: (squares.value() / count as f64).sqrt(),
    }
}

/// Occurrence counts per integer digital number `0..=max_dn`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct DnHistogram {
    counts: Vec<u64>,
    total: u64,
}

impl DnHistogram {
    pub fn empty(max_dn: u32) -> Self {
        Self {
            counts: vec![0; max_dn as usize + 1],
            total: 0,
        }
    }

    pub fn from_counts(counts: Vec<u64>) -> Self {
        let total = counts.iter().sum();
        Self { counts, total }
    }

    pub fn counts(&self) -> &[u64] {
        &self.counts
    }

    pub fn total(&self) -> u64 {
        self.total
    }

    pub fn max_dn(&self) -> u32 {
        self.counts.len().saturating_sub(1) as u32
    }

    pub fn count(&self, dn: u32) -> u64 {
        self.counts.get(dn as usize).copied().unwrap_or(0)
    }

    pub fn add(&mut self, dn: u32) {
        self.counts[dn as usize] += 1;
        self.total += 1;
    }

    /// Element-wise sum. Histograms with different `max_dn` widen to the
    /// larger range.
    pub fn merge(&mut self, other: &DnHistogram) {
        if other.counts.len() > self.counts.len() {
            self.counts.resize(other.counts.len(), 0);
        }
        for (acc, c) in self.counts.iter_mut().zip(&other.counts) {
            *acc += c;
        }
        self.total += other.total;
    }
}

/// Counts the valid pixels of `grid` per integer DN.
pub fn dn_histogram(grid: &RasterGrid, max_dn: u32) -> Result<DnHistogram, RasterError> {
    let mut hist = DnHistogram::empty(max_dn);
    for (i, &v) in grid.samples().iter().enumerate() {
        if grid.is_nodata(v) {
            continue;
        }
        if v < 0.0 || v > max_dn as f64 || v.fract() != 0.0 {
            return Err(RasterError::InvalidDn {
                row: i / grid.width(),
                col: i % grid.width(),
                value: v,
                max_dn,
            });
        }
        hist.add(v as u32);
    }
    Ok(hist)
}

/// Reserved label of pixels that match no class.
pub const UNCLASSIFIED: u16 = 0;

/// Per-pixel class labels. Label `i >= 1` refers to `legend[i - 1]`;
/// label 0 is [`UNCLASSIFIED`].
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ClassifiedGrid {
    width: usize,
    height: usize,
    labels: Vec<u16>,
    legend: Vec<String>,
}

impl ClassifiedGrid {
    pub fn new(
        width: usize,
        height: usize,
        labels: Vec<u16>,
        legend: Vec<String>,
    ) -> Result<Self, RasterError> {
        if width == 0 || height == 0 {
            return Err(RasterError::EmptyDimensions { width, height });
        }
        if labels.len() != width * height {
            return Err(RasterError::LengthMismatch {
                width,
                height,
                expected: width * height,
                actual: labels.len(),
            });
        }
        if let Some((i, &l)) = labels
            .iter()
            .enumerate()
            .find(|(_, &l)| l as usize > legend.len())
        {
            return Err(RasterError::LabelOutOfRange {
                row: i / width,
                col: i % width,
                label: l,
                classes: legend.len(),
            });
        }
        Ok(Self {
            width,
            height,
            labels,
            legend,
        })
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn labels(&self) -> &[u16] {
        &self.labels
    }

    pub fn legend(&self) -> &[String] {
        &self.legend
    }

    pub fn get(&self, row: usize, col: usize) -> Option<u16> {
        (row < self.height && col < self.width).then(|| self.labels[row * self.width + col])
    }

    pub fn class_name(&self, label: u16) -> Option<&str> {
        match label {
            UNCLASSIFIED => None,
            l => self.legend.get(l as usize - 1).map(String::as_str),
        }
    }

    pub fn same_shape(&self, other: &ClassifiedGrid) -> Result<(), RasterError> {
        if self.width == other.width && self.height == other.height {
            Ok(())
        } else {
            Err(RasterError::ShapeMismatch {
                left_width: self.width,
                left_height: self.height,
                right_width: other.width,
                right_height: other.height,
            })
        }
    }

    /// Pixel count per label, index 0 = unclassified.
    pub fn class_counts(&self) -> Vec<u64> {
        let mut counts = vec![0u64; self.legend.len() + 1];
        for &l in &self.labels {
            counts[l as usize] += 1;
        }
        counts
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn grid(w: usize, h: usize, s: &[f64]) -> RasterGrid {
        RasterGrid::new(w, h, s.to_vec(), DEFAULT_NODATA).unwrap()
    }

    #[test]
    fn rejects_bad_dimensions() {
        assert!(matches!(
            RasterGrid::new(0, 3, vec![], DEFAULT_NODATA),
            Err(RasterError::EmptyDimensions { .. })
        ));
        assert!(matches!(
            RasterGrid::new(2, 2, vec![1.0; 3], DEFAULT_NODATA),
            Err(RasterError::LengthMismatch { expected: 4, actual: 3, .. })
        ));
    }

    #[test]
    fn stats_simple() {
        let s = grid(2, 2, &[1.0, 2.0, 3.0, 4.0]).stats();
        assert_eq!(s.count, 4);
        assert_eq!(s.mean, 2.5);
        assert_eq!(s.min, 1.0);
        assert_eq!(s.max, 4.0);
        assert!((s.stddev - 1.25f64.sqrt()).abs() < 1e-15);
    }

    #[test]
    fn stats_skip_nodata() {
        let s = grid(2, 2, &[1.0, -9999.0, 3.0, -9999.0]).stats();
        assert_eq!(s.count, 2);
        assert_eq!(s.mean, 2.0);
    }

    #[test]
    fn stats_all_nodata() {
        let s = grid(1, 2, &[-9999.0, -9999.0]).stats();
        assert!(s.is_empty());
        assert!(s.mean.is_nan());
    }

    #[test]
    fn stats_uniform_random_mean() {
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        let samples: Vec<f64> = (0..1000).map(|_| rng.random_range(0.0..10.0)).collect();
        let s = grid(100, 10, &samples).stats();
        // scalar accumulation oracle
        let mut acc = 0.0;
        for v in &samples {
            acc += v;
        }
        assert!((s.mean - acc / 1000.0).abs() < 1e-12);
        // generator mean 5, sigma 10/sqrt(12)
        let bound = 3.0 * (10.0 / 12f64.sqrt()) / 1000f64.sqrt();
        assert!((s.mean - 5.0).abs() < bound, "mean {}", s.mean);
    }

    #[test]
    fn histogram_counts() {
        let h = dn_histogram(&grid(3, 1, &[0.0, 0.0, 255.0]), 255).unwrap();
        assert_eq!(h.count(0), 2);
        assert_eq!(h.count(255), 1);
        assert_eq!(h.total(), 3);
    }

    #[test]
    fn histogram_rejects_bad_dn() {
        let err = dn_histogram(&grid(3, 1, &[0.0, 1.5, 2.0]), 255).unwrap_err();
        assert!(matches!(err, RasterError::InvalidDn { row: 0, col: 1, .. }));
        let err = dn_histogram(&grid(2, 1, &[0.0, 256.0]), 255).unwrap_err();
        assert!(matches!(err, RasterError::InvalidDn { col: 1, .. }));
        assert!(dn_histogram(&grid(1, 1, &[-1.0]), 255).is_err());
    }

    #[test]
    fn histogram_total_full_scene() {
        let (w, h) = (3000, 3000);
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        let samples: Vec<f64> = (0..w * h)
            .map(|_| {
                if rng.random_bool(0.01) {
                    DEFAULT_NODATA
                } else {
                    rng.random_range(0..=255u32) as f64
                }
            })
            .collect();
        let nodata = samples.iter().filter(|v| **v == DEFAULT_NODATA).count() as u64;
        let g = RasterGrid::new(w, h, samples, DEFAULT_NODATA).unwrap();
        let hist = dn_histogram(&g, 255).unwrap();
        assert_eq!(hist.total(), 9_000_000 - nodata);
    }

    #[test]
    fn window_copies_rows() {
        let g = RasterGrid::from_fn(4, 3, DEFAULT_NODATA, |r, c| (r * 10 + c) as f64).unwrap();
        let w = g.window(1, 2, 1, 2).unwrap();
        assert_eq!(w.samples(), &[11.0, 12.0, 21.0, 22.0]);
        assert!(g.window(2, 2, 0, 1).is_err());
    }

    fn arb_dn_grid() -> impl Strategy<Value = RasterGrid> {
        (1usize..20, 1usize..20).prop_flat_map(|(w, h)| {
            prop::collection::vec(
                prop_oneof![9 => (0u32..=255).prop_map(|v| v as f64), 1 => Just(DEFAULT_NODATA)],
                w * h,
            )
            .prop_map(move |s| RasterGrid::new(w, h, s, DEFAULT_NODATA).unwrap())
        })
    }

    proptest! {
        #[test]
        fn tile_histograms_merge_to_whole(g in arb_dn_grid(), cut in 0usize..20) {
            let whole = dn_histogram(&g, 255).unwrap();
            let cut = cut % g.height();
            let mut merged = DnHistogram::empty(255);
            if cut > 0 {
                merged.merge(&dn_histogram(&g.window(0, cut, 0, g.width()).unwrap(), 255).unwrap());
            }
            merged.merge(&dn_histogram(&g.window(cut, g.height() - cut, 0, g.width()).unwrap(), 255).unwrap());
            prop_assert_eq!(merged, whole);
        }

        #[test]
        fn stats_permutation_invariant(g in arb_dn_grid(), seed in any::<u64>()) {
            use rand::seq::SliceRandom;
            let mut s = g.samples().to_vec();
            s.shuffle(&mut ChaCha8Rng::seed_from_u64(seed));
            let shuffled = RasterGrid::new(g.width(), g.height(), s, g.nodata()).unwrap();
            let (a, b) = (g.stats(), shuffled.stats());
            prop_assert_eq!(a.count, b.count);
            if a.count > 0 {
                prop_assert_eq!(a.min, b.min);
                prop_assert_eq!(a.max, b.max);
                prop_assert!((a.mean - b.mean).abs() <= 1e-12 * a.mean.abs().max(1.0));
                prop_assert!((a.stddev - b.stddev).abs() <= 1e-9 * a.stddev.max(1.0));
            }
        }

        #[test]
        fn stats_bound_every_valid_sample(g in arb_dn_grid()) {
            let s = g.stats();
            for v in g.valid_samples() {
                prop_assert!(s.min <= v && v <= s.max);
            }
            if s.count > 0 {
                prop_assert!(s.min <= s.mean && s.mean <= s.max);
            }
        }
    }
}
