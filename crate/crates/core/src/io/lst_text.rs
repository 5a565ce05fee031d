//! Plain-text LST product: one line per raster row, values in °C with two
//! decimals, `NA` for no-data.

use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::Path;

use super::FormatError;
use crate::raster::{RasterGrid, DEFAULT_NODATA};

pub const NA: &str = "NA";

pub fn format_lst_row(grid: &RasterGrid, row: usize) -> String {
    let mut line = String::with_capacity(grid.width() * 7);
    for (i, &v) in grid.row(row).iter().enumerate() {
        if i > 0 {
            line.push(' ');
        }
        if grid.is_nodata(v) {
            line.push_str(NA);
        } else {
            line.push_str(&format!("{v:.2}"));
        }
    }
    line
}

pub fn write_lst_text(grid: &RasterGrid, path: impl AsRef<Path>) -> Result<(), FormatError> {
    let path = path.as_ref();
    let file = File::create(path).map_err(|e| FormatError::io(path, e))?;
    let mut out = BufWriter::new(file);
    let write = |out: &mut BufWriter<File>| -> std::io::Result<()> {
        for row in 0..grid.height() {
            out.write_all(format_lst_row(grid, row).as_bytes())?;
            out.write_all(b"\n")?;
        }
        out.flush()
    };
    write(&mut out).map_err(|e| FormatError::io(path, e))
}

/// Parses an LST text file back into a grid (`NA` → [`DEFAULT_NODATA`]).
pub fn read_lst_text(path: impl AsRef<Path>) -> Result<RasterGrid, FormatError> {
    let path = path.as_ref();
    let text = std::fs::read_to_string(path).map_err(|e| FormatError::io(path, e))?;
    parse_lst_text(&text)
}

pub fn parse_lst_text(text: &str) -> Result<RasterGrid, FormatError> {
    let mut width = None;
    let mut samples = Vec::new();
    let mut height = 0;
    for (idx, line) in text.lines().enumerate() {
        if line.trim().is_empty() {
            continue;
        }
        let before = samples.len();
        for token in line.split_whitespace() {
            if token == NA {
                samples.push(DEFAULT_NODATA);
            } else {
                samples.push(token.parse::<f64>().map_err(|_| FormatError::InvalidNumber {
                    line: idx + 1,
                    key: "LST".into(),
                    value: token.to_string(),
                })?);
            }
        }
        let n = samples.len() - before;
        match width {
            None => width = Some(n),
            Some(w) if w != n => {
                return Err(FormatError::ShortData {
                    line: idx + 1,
                    expected: w,
                    found: n,
                })
            }
            _ => {}
        }
        height += 1;
    }
    let width = width.ok_or_else(|| FormatError::Syntax {
        line: 1,
        message: "empty LST file".into(),
    })?;
    Ok(RasterGrid::new(width, height, samples, DEFAULT_NODATA)?)
}
