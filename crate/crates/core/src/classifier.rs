//! Parallelepiped ("box decision rule") supervised classification.
//!
//! Each class is a box: one closed interval per input band. A pixel gets
//! the label of the **first** class, in training order, whose box contains
//! it; pixels inside no box (or with no-data in any band) stay
//! unclassified. Tools differ on overlap handling; first-match keeps the
//! result deterministic and independent of tiling.

use std::fmt::Write as _;
use std::path::Path;

use thiserror::Error;

use crate::io::{kv, FormatError};
use crate::raster::{ClassifiedGrid, RasterError, RasterGrid, UNCLASSIFIED};

#[derive(Debug, Error)]
pub enum ClassifierError {
    #[error("training region for '{class}' rows {row0}..={row1}, cols {col0}..={col1} lies outside the {width}x{height} image")]
    RegionOutOfBounds {
        class: String,
        row0: usize,
        col0: usize,
        row1: usize,
        col1: usize,
        width: usize,
        height: usize,
    },
    #[error("training region for '{0}' is empty or inverted")]
    InvalidRegion(String),
    #[error("training region for '{0}' has no valid pixels")]
    EmptyRegion(String),
    #[error("classification needs at least one band")]
    NoBands,
    #[error("pixel has {values} band values but signature '{class}' has {bands}")]
    ArityMismatch {
        class: String,
        values: usize,
        bands: usize,
    },
    #[error("class '{class}': interval {lo}..{hi} is inverted")]
    InvertedInterval { class: String, lo: f64, hi: f64 },
    #[error("invalid classifier mode '{0}' (expected minmax or meansigma:K)")]
    InvalidMode(String),
    #[error("{0} classes exceed the label range")]
    TooManyClasses(usize),
    #[error("confusion matrix needs at least one labelled truth pixel")]
    NoEvaluatedPixels,
    #[error(transparent)]
    Raster(#[from] RasterError),
    #[error(transparent)]
    Format(#[from] FormatError),
}

/// Inclusive pixel rectangle of known class.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct TrainingRegion {
    pub class_name: String,
    pub row0: usize,
    pub col0: usize,
    pub row1: usize,
    pub col1: usize,
}

impl TrainingRegion {
    pub fn new(class_name: impl Into<String>, row0: usize, col0: usize, row1: usize, col1: usize) -> Self {
        Self {
            class_name: class_name.into(),
            row0,
            col0,
            row1,
            col1,
        }
    }

    fn check(&self, width: usize, height: usize) -> Result<(), ClassifierError> {
        if self.row1 < self.row0 || self.col1 < self.col0 {
            return Err(ClassifierError::InvalidRegion(self.class_name.clone()));
        }
        if self.row1 >= height || self.col1 >= width {
            return Err(ClassifierError::RegionOutOfBounds {
                class: self.class_name.clone(),
                row0: self.row0,
                col0: self.col0,
                row1: self.row1,
                col1: self.col1,
                width,
                height,
            });
        }
        Ok(())
    }
}

/// Parses `class_name row0 col0 row1 col1` lines; the name may contain
/// spaces, `#` starts a comment.
pub fn parse_training_regions(text: &str) -> Result<Vec<TrainingRegion>, FormatError> {
    let mut regions = Vec::new();
    for (idx, raw) in text.lines().enumerate() {
        let line = raw.split('#').next().unwrap_or("").trim();
        if line.is_empty() {
            continue;
        }
        let tokens: Vec<&str> = line.split_whitespace().collect();
        if tokens.len() < 5 {
            return Err(FormatError::Syntax {
                line: idx + 1,
                message: "expected 'class_name row0 col0 row1 col1'".into(),
            });
        }
        let (name, coords) = tokens.split_at(tokens.len() - 4);
        let mut n = [0usize; 4];
        for (slot, tok) in n.iter_mut().zip(coords) {
            *slot = tok.parse().map_err(|_| FormatError::InvalidNumber {
                line: idx + 1,
                key: "region".into(),
                value: tok.to_string(),
            })?;
        }
        regions.push(TrainingRegion::new(name.join(" "), n[0], n[1], n[2], n[3]));
    }
    Ok(regions)
}

pub fn read_training_regions(path: impl AsRef<Path>) -> Result<Vec<TrainingRegion>, FormatError> {
    let path = path.as_ref();
    let text = std::fs::read_to_string(path).map_err(|e| FormatError::io(path, e))?;
    parse_training_regions(&text)
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum TrainingMode {
    /// Box = per-band `[min, max]` of the training pixels.
    MinMax,
    /// Box = per-band `mean ± k·σ` (population σ).
    MeanSigma(f64),
}

impl Default for TrainingMode {
    fn default() -> Self {
        TrainingMode::MinMax
    }
}

impl std::str::FromStr for TrainingMode {
    type Err = ClassifierError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let lower = s.trim().to_ascii_lowercase();
        if lower == "minmax" {
            return Ok(TrainingMode::MinMax);
        }
        if lower == "meansigma" {
            return Ok(TrainingMode::MeanSigma(2.0));
        }
        if let Some(k) = lower.strip_prefix("meansigma:") {
            if let Ok(k) = k.parse::<f64>() {
                if k > 0.0 && k.is_finite() {
                    return Ok(TrainingMode::MeanSigma(k));
                }
            }
        }
        Err(ClassifierError::InvalidMode(s.to_string()))
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Interval {
    pub lo: f64,
    pub hi: f64,
}

impl Interval {
    pub fn contains(&self, v: f64) -> bool {
        self.lo <= v && v <= self.hi
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ClassSignature {
    pub class_name: String,
    pub intervals: Vec<Interval>,
}

impl ClassSignature {
    pub fn new(class_name: impl Into<String>, intervals: Vec<Interval>) -> Result<Self, ClassifierError> {
        let class_name = class_name.into();
        for iv in &intervals {
            if !(iv.lo <= iv.hi) {
                return Err(ClassifierError::InvertedInterval {
                    class: class_name,
                    lo: iv.lo,
                    hi: iv.hi,
                });
            }
        }
        Ok(Self { class_name, intervals })
    }

    pub fn contains(&self, values: &[f64]) -> bool {
        self.intervals.iter().zip(values).all(|(iv, &v)| iv.contains(v))
    }
}

fn check_bands(bands: &[&RasterGrid]) -> Result<(), ClassifierError> {
    let first = bands.first().ok_or(ClassifierError::NoBands)?;
    for b in &bands[1..] {
        first.same_shape(b)?;
    }
    Ok(())
}

/// Valid training pixels of `regions`, one `Vec` per band.
fn collect_pixels(bands: &[&RasterGrid], regions: &[&TrainingRegion]) -> Result<Vec<Vec<f64>>, ClassifierError> {
    check_bands(bands)?;
    let (w, h) = (bands[0].width(), bands[0].height());
    let mut per_band = vec![Vec::new(); bands.len()];
    for region in regions {
        region.check(w, h)?;
        for row in region.row0..=region.row1 {
            for col in region.col0..=region.col1 {
                let i = row * w + col;
                if bands.iter().any(|b| b.is_nodata(b.samples()[i])) {
                    continue;
                }
                for (acc, b) in per_band.iter_mut().zip(bands) {
                    acc.push(b.samples()[i]);
                }
            }
        }
    }
    Ok(per_band)
}

fn signature_from_pixels(
    class_name: &str,
    per_band: &[Vec<f64>],
    mode: TrainingMode,
) -> Result<ClassSignature, ClassifierError> {
    if per_band.first().is_none_or(|p| p.is_empty()) {
        return Err(ClassifierError::EmptyRegion(class_name.to_string()));
    }
    let intervals = per_band
        .iter()
        .map(|values| match mode {
            TrainingMode::MinMax => Interval {
                lo: values.iter().copied().fold(f64::INFINITY, f64::min),
                hi: values.iter().copied().fold(f64::NEG_INFINITY, f64::max),
            },
            TrainingMode::MeanSigma(k) => {
                let n = values.len() as f64;
                let mean = values.iter().sum::<f64>() / n;
                let var = values.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / n;
                let s = var.sqrt();
                Interval {
                    lo: mean - k * s,
                    hi: mean + k * s,
                }
            }
        })
        .collect();
    ClassSignature::new(class_name, intervals)
}

/// Signature of a single training region.
pub fn train_class(
    bands: &[&RasterGrid],
    region: &TrainingRegion,
    mode: TrainingMode,
) -> Result<ClassSignature, ClassifierError> {
    let pixels = collect_pixels(bands, &[region])?;
    signature_from_pixels(&region.class_name, &pixels, mode)
}

/// One signature per distinct class name, in order of first appearance;
/// regions sharing a name are pooled.
pub fn train_signatures(
    bands: &[&RasterGrid],
    regions: &[TrainingRegion],
    mode: TrainingMode,
) -> Result<Vec<ClassSignature>, ClassifierError> {
    let mut names: Vec<&str> = Vec::new();
    for r in regions {
        if !names.contains(&r.class_name.as_str()) {
            names.push(&r.class_name);
        }
    }
    if names.len() > u16::MAX as usize {
        return Err(ClassifierError::TooManyClasses(names.len()));
    }
    names
        .into_iter()
        .map(|name| {
            let group: Vec<&TrainingRegion> = regions.iter().filter(|r| r.class_name == name).collect();
            let pixels = collect_pixels(bands, &group)?;
            signature_from_pixels(name, &pixels, mode)
        })
        .collect()
}

/// 1-based label of the first containing signature, or [`UNCLASSIFIED`].
pub fn classify_pixel(values: &[f64], signatures: &[ClassSignature]) -> Result<u16, ClassifierError> {
    for sig in signatures {
        if sig.intervals.len() != values.len() {
            return Err(ClassifierError::ArityMismatch {
                class: sig.class_name.clone(),
                values: values.len(),
                bands: sig.intervals.len(),
            });
        }
    }
    Ok(first_match(values, signatures))
}

/// Arity-unchecked kernel behind [`classify_pixel`].
pub(crate) fn first_match(values: &[f64], signatures: &[ClassSignature]) -> u16 {
    signatures
        .iter()
        .position(|s| s.contains(values))
        .map_or(UNCLASSIFIED, |i| i as u16 + 1)
}

pub fn check_arity(band_count: usize, signatures: &[ClassSignature]) -> Result<(), ClassifierError> {
    if signatures.len() > u16::MAX as usize {
        return Err(ClassifierError::TooManyClasses(signatures.len()));
    }
    for sig in signatures {
        if sig.intervals.len() != band_count {
            return Err(ClassifierError::ArityMismatch {
                class: sig.class_name.clone(),
                values: band_count,
                bands: sig.intervals.len(),
            });
        }
    }
    Ok(())
}

/// Labels for a window of pixels given as per-band sample slices.
pub(crate) fn classify_samples(bands: &[&RasterGrid], signatures: &[ClassSignature]) -> Vec<u16> {
    let n = bands[0].len();
    let mut values = vec![0.0; bands.len()];
    (0..n)
        .map(|i| {
            for (slot, b) in values.iter_mut().zip(bands) {
                *slot = b.samples()[i];
            }
            if bands.iter().zip(&values).any(|(b, &v)| b.is_nodata(v)) {
                UNCLASSIFIED
            } else {
                first_match(&values, signatures)
            }
        })
        .collect()
}

pub fn classify_map(bands: &[&RasterGrid], signatures: &[ClassSignature]) -> Result<ClassifiedGrid, ClassifierError> {
    check_bands(bands)?;
    check_arity(bands.len(), signatures)?;
    let labels = classify_samples(bands, signatures);
    Ok(ClassifiedGrid::new(
        bands[0].width(),
        bands[0].height(),
        labels,
        signatures.iter().map(|s| s.class_name.clone()).collect(),
    )?)
}

/// Rows index truth labels, columns predicted labels; both include
/// label 0 (unclassified), but truth row 0 is never populated.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ConfusionMatrix {
    legend: Vec<String>,
    counts: Vec<Vec<u64>>,
}

impl ConfusionMatrix {
    pub fn legend(&self) -> &[String] {
        &self.legend
    }

    pub fn get(&self, truth: u16, predicted: u16) -> u64 {
        self.counts
            .get(truth as usize)
            .and_then(|r| r.get(predicted as usize))
            .copied()
            .unwrap_or(0)
    }

    pub fn rows(&self) -> &[Vec<u64>] {
        &self.counts
    }

    pub fn total(&self) -> u64 {
        self.counts.iter().flatten().sum()
    }

    pub fn trace(&self) -> u64 {
        (1..self.counts.len()).map(|i| self.counts[i][i]).sum()
    }

    pub fn overall_accuracy(&self) -> f64 {
        self.trace() as f64 / self.total() as f64
    }

    /// Plain-text report: overall accuracy then the matrix with class
    /// names.
    pub fn report(&self) -> String {
        let mut s = String::new();
        let _ = writeln!(s, "evaluated pixels: {}", self.total());
        let _ = writeln!(s, "correct pixels:   {}", self.trace());
        let _ = writeln!(s, "overall accuracy: {:.4}", self.overall_accuracy());
        let _ = writeln!(s);
        let _ = writeln!(s, "rows = truth, columns = predicted (0 = unclassified)");
        let mut header = String::from("truth\\pred");
        for j in 0..self.counts.len() {
            let _ = write!(header, "\t{j}");
        }
        let _ = writeln!(s, "{header}");
        for (i, row) in self.counts.iter().enumerate().skip(1) {
            let _ = write!(s, "{i}");
            for c in row {
                let _ = write!(s, "\t{c}");
            }
            let _ = writeln!(s, "\t{}", self.legend[i - 1]);
        }
        s
    }
}

/// Confusion matrix over pixels whose truth label is not unclassified.
pub fn confusion_matrix(predicted: &ClassifiedGrid, truth: &ClassifiedGrid) -> Result<ConfusionMatrix, ClassifierError> {
    predicted.same_shape(truth)?;
    let legend = if truth.legend().len() >= predicted.legend().len() {
        truth.legend().to_vec()
    } else {
        predicted.legend().to_vec()
    };
    let n = legend.len() + 1;
    let mut counts = vec![vec![0u64; n]; n];
    for (&t, &p) in truth.labels().iter().zip(predicted.labels()) {
        if t == UNCLASSIFIED {
            continue;
        }
        counts[t as usize][p as usize] += 1;
    }
    let m = ConfusionMatrix { legend, counts };
    if m.total() == 0 {
        return Err(ClassifierError::NoEvaluatedPixels);
    }
    Ok(m)
}

/// Serialises signatures in the `key = value` format used for scene
/// metadata: one `[class <name>]` section per class, `band_<i> = lo, hi`.
pub fn format_signatures(signatures: &[ClassSignature]) -> String {
    let mut s = String::new();
    let _ = writeln!(s, "# parallelepiped class signatures, first match wins");
    let _ = writeln!(s, "bands = {}", signatures.first().map_or(0, |g| g.intervals.len()));
    for sig in signatures {
        let _ = writeln!(s, "\n[class {}]", sig.class_name);
        for (i, iv) in sig.intervals.iter().enumerate() {
            let _ = writeln!(s, "band_{i} = {}, {}", iv.lo, iv.hi);
        }
    }
    s
}

pub fn parse_signatures(text: &str) -> Result<Vec<ClassSignature>, ClassifierError> {
    let sections = kv::parse(text)?;
    let bands = match sections[0].number("bands")? {
        Some(b) if b >= 0.0 && b.fract() == 0.0 => b as usize,
        Some(b) => {
            return Err(FormatError::InvalidNumber {
                line: sections[0].get("bands").map_or(0, |e| e.line),
                key: "bands".into(),
                value: b.to_string(),
            }
            .into())
        }
        None => return Err(FormatError::MissingKey("bands".into()).into()),
    };
    let mut out = Vec::new();
    for section in &sections[1..] {
        if section.kind != "class" || section.name.is_empty() {
            return Err(FormatError::Syntax {
                line: section.line,
                message: "expected [class <name>]".into(),
            }
            .into());
        }
        let mut intervals = Vec::with_capacity(bands);
        for i in 0..bands {
            let key = format!("band_{i}");
            let entry = section
                .get(&key)
                .ok_or_else(|| FormatError::MissingKey(format!("class {}: {key}", section.name)))?;
            let (lo, hi) = entry.value.split_once(',').ok_or_else(|| FormatError::Syntax {
                line: entry.line,
                message: format!("{key}: expected 'lo, hi'"),
            })?;
            intervals.push(Interval {
                lo: kv::parse_number(lo, entry.line, &key)?,
                hi: kv::parse_number(hi, entry.line, &key)?,
            });
        }
        out.push(ClassSignature::new(section.name.clone(), intervals)?);
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::raster::DEFAULT_NODATA;
    use proptest::prelude::*;

    fn band(w: usize, h: usize, s: Vec<f64>) -> RasterGrid {
        RasterGrid::new(w, h, s, DEFAULT_NODATA).unwrap()
    }

    fn sig(name: &str, ivs: &[(f64, f64)]) -> ClassSignature {
        ClassSignature::new(name, ivs.iter().map(|&(lo, hi)| Interval { lo, hi }).collect()).unwrap()
    }

    #[test]
    fn identical_pixels_give_degenerate_box() {
        let b = band(3, 3, vec![7.0; 9]);
        let s = train_class(&[&b, &b], &TrainingRegion::new("w", 0, 0, 2, 2), TrainingMode::MinMax).unwrap();
        assert_eq!(s.intervals, vec![Interval { lo: 7.0, hi: 7.0 }; 2]);
    }

    #[test]
    fn minmax_and_mean_sigma() {
        let b = band(2, 1, vec![10.0, 20.0]);
        let r = TrainingRegion::new("c", 0, 0, 0, 1);
        let s = train_class(&[&b], &r, TrainingMode::MinMax).unwrap();
        assert_eq!(s.intervals[0], Interval { lo: 10.0, hi: 20.0 });
        // mean 15, population σ 5
        let s = train_class(&[&b], &r, TrainingMode::MeanSigma(1.0)).unwrap();
        assert_eq!(s.intervals[0], Interval { lo: 10.0, hi: 20.0 });
        let s = train_class(&[&b], &r, TrainingMode::MeanSigma(2.0)).unwrap();
        assert_eq!(s.intervals[0], Interval { lo: 5.0, hi: 25.0 });
    }

    #[test]
    fn training_errors() {
        let b = band(2, 2, vec![DEFAULT_NODATA; 4]);
        assert!(matches!(
            train_class(&[&b], &TrainingRegion::new("x", 0, 0, 1, 1), TrainingMode::MinMax),
            Err(ClassifierError::EmptyRegion(_))
        ));
        assert!(matches!(
            train_class(&[&b], &TrainingRegion::new("x", 0, 0, 2, 1), TrainingMode::MinMax),
            Err(ClassifierError::RegionOutOfBounds { .. })
        ));
        assert!(matches!(
            train_class(&[&b], &TrainingRegion::new("x", 1, 0, 0, 1), TrainingMode::MinMax),
            Err(ClassifierError::InvalidRegion(_))
        ));
        assert!(matches!(train_class(&[], &TrainingRegion::new("x", 0, 0, 0, 0), TrainingMode::MinMax), Err(ClassifierError::NoBands)));
    }

    #[test]
    fn pixel_rules() {
        assert_eq!(classify_pixel(&[1.0, 2.0], &[]).unwrap(), UNCLASSIFIED);
        let sigs = vec![
            sig("a", &[(0.0, 1.0), (0.0, 1.0)]),
            sig("b", &[(2.0, 4.0), (2.0, 4.0)]),
            sig("c", &[(5.0, 6.0), (5.0, 6.0)]),
            sig("d", &[(7.0, 8.0), (7.0, 8.0)]),
            sig("e", &[(1.5, 9.0), (1.5, 9.0)]),
        ];
        assert_eq!(classify_pixel(&[5.5, 5.5], &sigs[..4]).unwrap(), 3);
        // (3, 3) sits in boxes 2 and 5
        let containing: Vec<usize> = sigs
            .iter()
            .enumerate()
            .filter(|(_, s)| s.contains(&[3.0, 3.0]))
            .map(|(i, _)| i + 1)
            .collect();
        assert_eq!(containing, vec![2, 5]);
        assert_eq!(classify_pixel(&[3.0, 3.0], &sigs).unwrap(), 2);
        assert_eq!(classify_pixel(&[10.0, 10.0], &sigs).unwrap(), UNCLASSIFIED);
        assert!(matches!(classify_pixel(&[1.0], &sigs), Err(ClassifierError::ArityMismatch { .. })));
    }

    #[test]
    fn all_nodata_scene_unclassified() {
        let b = band(3, 2, vec![DEFAULT_NODATA; 6]);
        let m = classify_map(&[&b], &[sig("any", &[(f64::NEG_INFINITY, f64::INFINITY)])]).unwrap();
        assert!(m.labels().iter().all(|&l| l == UNCLASSIFIED));
    }

    #[test]
    fn classify_map_shape_errors() {
        let a = band(2, 1, vec![0.0; 2]);
        let b = band(1, 2, vec![0.0; 2]);
        assert!(matches!(classify_map(&[&a, &b], &[]), Err(ClassifierError::Raster(_))));
    }

    #[test]
    fn confusion_examples() {
        let legend: Vec<String> = (1..=3).map(|i| format!("c{i}")).collect();
        let labels: Vec<u16> = (0..12).map(|i| (i % 3 + 1) as u16).collect();
        let truth = ClassifiedGrid::new(4, 3, labels.clone(), legend.clone()).unwrap();
        let m = confusion_matrix(&truth, &truth).unwrap();
        assert_eq!(m.overall_accuracy(), 1.0);
        for i in 1..=3u16 {
            for j in 0..=3u16 {
                assert_eq!(m.get(i, j), if i == j { 4 } else { 0 });
            }
        }

        // 89 of 100 on the diagonal
        let truth_labels: Vec<u16> = (0..100).map(|i| (i % 3 + 1) as u16).collect();
        let pred_labels: Vec<u16> = truth_labels
            .iter()
            .enumerate()
            .map(|(i, &t)| if i < 89 { t } else { t % 3 + 1 })
            .collect();
        let t = ClassifiedGrid::new(10, 10, truth_labels, legend.clone()).unwrap();
        let p = ClassifiedGrid::new(10, 10, pred_labels, legend.clone()).unwrap();
        let m = confusion_matrix(&p, &t).unwrap();
        assert_eq!(m.total(), 100);
        assert_eq!(m.trace(), 89);
        assert_eq!(m.overall_accuracy(), 0.89);
        assert!(m.report().contains("overall accuracy: 0.8900"));
    }

    #[test]
    fn confusion_excludes_unclassified_truth() {
        let legend = vec!["a".to_string()];
        let t = ClassifiedGrid::new(2, 1, vec![0, 1], legend.clone()).unwrap();
        let p = ClassifiedGrid::new(2, 1, vec![1, 0], legend.clone()).unwrap();
        let m = confusion_matrix(&p, &t).unwrap();
        assert_eq!(m.total(), 1);
        assert_eq!(m.get(1, 0), 1);
        assert_eq!(m.overall_accuracy(), 0.0);
        let empty = ClassifiedGrid::new(2, 1, vec![0, 0], legend).unwrap();
        assert!(matches!(confusion_matrix(&p, &empty), Err(ClassifierError::NoEvaluatedPixels)));
    }

    #[test]
    fn region_file() {
        let text = "# name row0 col0 row1 col1\ndense vegetation 0 0 9 9\nwater 10 0 12 3 # lake\n";
        let r = parse_training_regions(text).unwrap();
        assert_eq!(r[0], TrainingRegion::new("dense vegetation", 0, 0, 9, 9));
        assert_eq!(r[1].class_name, "water");
        assert!(matches!(parse_training_regions("water 1 2 3\n"), Err(FormatError::Syntax { line: 1, .. })));
        assert!(matches!(
            parse_training_regions("\nwater 1 2 x 4\n"),
            Err(FormatError::InvalidNumber { line: 2, .. })
        ));
    }

    #[test]
    fn pooled_regions_and_signature_text() {
        let b = band(4, 1, vec![1.0, 2.0, 3.0, 9.0]);
        let regions = vec![
            TrainingRegion::new("low", 0, 0, 0, 0),
            TrainingRegion::new("high", 0, 3, 0, 3),
            TrainingRegion::new("low", 0, 2, 0, 2),
        ];
        let sigs = train_signatures(&[&b], &regions, TrainingMode::MinMax).unwrap();
        assert_eq!(sigs.len(), 2);
        assert_eq!(sigs[0].intervals[0], Interval { lo: 1.0, hi: 3.0 });
        let text = format_signatures(&sigs);
        assert_eq!(parse_signatures(&text).unwrap(), sigs);
    }

    #[test]
    fn mode_parsing() {
        assert_eq!("minmax".parse::<TrainingMode>().unwrap(), TrainingMode::MinMax);
        assert_eq!("meansigma:1.5".parse::<TrainingMode>().unwrap(), TrainingMode::MeanSigma(1.5));
        assert_eq!("meansigma".parse::<TrainingMode>().unwrap(), TrainingMode::MeanSigma(2.0));
        assert!("meansigma:-1".parse::<TrainingMode>().is_err());
        assert!("ml".parse::<TrainingMode>().is_err());
    }

    proptest! {
        #[test]
        fn shrinking_never_gains_pixels(
            values in prop::collection::vec(0.0f64..100.0, 50),
            lo in 0.0f64..50.0, width in 1.0f64..50.0, shrink in 0.0f64..0.5,
        ) {
            let b = band(10, 5, values);
            let wide = vec![sig("a", &[(lo, lo + width)])];
            let narrow = vec![sig("a", &[(lo + shrink * width, lo + width - shrink * width)])];
            let cw = classify_map(&[&b], &wide).unwrap().class_counts();
            let cn = classify_map(&[&b], &narrow).unwrap().class_counts();
            prop_assert!(cn[1] <= cw[1]);
        }

        #[test]
        fn confusion_invariants(
            pairs in prop::collection::vec((0u16..4, 0u16..4), 1..60), seed in any::<u64>()
        ) {
            use rand::{seq::SliceRandom, SeedableRng};
            let legend: Vec<String> = (1..=3).map(|i| format!("c{i}")).collect();
            let n = pairs.len();
            let t: Vec<u16> = pairs.iter().map(|p| p.0).collect();
            let p: Vec<u16> = pairs.iter().map(|p| p.1).collect();
            let truth = ClassifiedGrid::new(n, 1, t, legend.clone()).unwrap();
            let pred = ClassifiedGrid::new(n, 1, p, legend.clone()).unwrap();
            let evaluated = pairs.iter().filter(|p| p.0 != 0).count() as u64;
            match confusion_matrix(&pred, &truth) {
                Ok(m) => {
                    prop_assert_eq!(m.total(), evaluated);
                    let acc = m.overall_accuracy();
                    prop_assert!((0.0..=1.0).contains(&acc));
                    prop_assert_eq!(acc, m.trace() as f64 / m.total() as f64);
                    let mut shuffled = pairs.clone();
                    shuffled.shuffle(&mut rand_chacha::ChaCha8Rng::seed_from_u64(seed));
                    let truth2 = ClassifiedGrid::new(n, 1, shuffled.iter().map(|p| p.0).collect(), legend.clone()).unwrap();
                    let pred2 = ClassifiedGrid::new(n, 1, shuffled.iter().map(|p| p.1).collect(), legend.clone()).unwrap();
                    prop_assert_eq!(confusion_matrix(&pred2, &truth2).unwrap(), m);
                }
                Err(_) => prop_assert_eq!(evaluated, 0),
            }
        }
    }
}
