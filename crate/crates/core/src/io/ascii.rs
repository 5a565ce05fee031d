//! ESRI ASCII grid reader/writer.

use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::Path;

use super::FormatError;
use crate::raster::{RasterGrid, DEFAULT_NODATA};

/// Header values that have no place in [`RasterGrid`] but should survive a
/// read/write cycle.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AsciiHeader {
    pub xll: f64,
    pub yll: f64,
    /// True when the file used `xllcenter`/`yllcenter`.
    pub center: bool,
    pub cellsize: f64,
}

impl Default for AsciiHeader {
    fn default() -> Self {
        Self {
            xll: 0.0,
            yll: 0.0,
            center: false,
            cellsize: 1.0,
        }
    }
}

pub fn read_ascii_grid(path: impl AsRef<Path>) -> Result<RasterGrid, FormatError> {
    read_ascii_grid_with_header(path).map(|(g, _)| g)
}

pub fn read_ascii_grid_with_header(
    path: impl AsRef<Path>,
) -> Result<(RasterGrid, AsciiHeader), FormatError> {
    let path = path.as_ref();
    let text = std::fs::read_to_string(path).map_err(|e| FormatError::io(path, e))?;
    parse_ascii_grid(&text)
}

pub fn parse_ascii_grid(text: &str) -> Result<(RasterGrid, AsciiHeader), FormatError> {
    let mut header = AsciiHeader::default();
    let mut ncols = None;
    let mut nrows = None;
    let mut nodata = DEFAULT_NODATA;

    let mut lines = text.lines().enumerate().peekable();
    while let Some(&(idx, line)) = lines.peek() {
        let mut tokens = line.split_whitespace();
        let Some(key) = tokens.next() else {
            lines.next();
            continue;
        };
        if !key.starts_with(|c: char| c.is_ascii_alphabetic()) {
            break;
        }
        let line_no = idx + 1;
        let value = tokens.next().ok_or_else(|| FormatError::Syntax {
            line: line_no,
            message: format!("header key '{key}' has no value"),
        })?;
        if tokens.next().is_some() {
            return Err(FormatError::Syntax {
                line: line_no,
                message: format!("header key '{key}' has trailing tokens"),
            });
        }
        let lower = key.to_ascii_lowercase();
        let number = |v: &str| super::kv::parse_number(v, line_no, key);
        match lower.as_str() {
            "ncols" | "nrows" => {
                let n: usize = value.parse().map_err(|_| FormatError::InvalidNumber {
                    line: line_no,
                    key: key.to_string(),
                    value: value.to_string(),
                })?;
                if lower == "ncols" {
                    ncols = Some(n);
                } else {
                    nrows = Some(n);
                }
            }
            "xllcorner" => header.xll = number(value)?,
            "yllcorner" => header.yll = number(value)?,
            "xllcenter" => {
                header.xll = number(value)?;
                header.center = true;
            }
            "yllcenter" => {
                header.yll = number(value)?;
                header.center = true;
            }
            "cellsize" => header.cellsize = number(value)?,
            "nodata_value" => nodata = number(value)?,
            _ => {
                return Err(FormatError::Syntax {
                    line: line_no,
                    message: format!("unknown header key '{key}'"),
                })
            }
        }
        lines.next();
    }

    let ncols = ncols.ok_or_else(|| FormatError::MissingKey("ncols".into()))?;
    let nrows = nrows.ok_or_else(|| FormatError::MissingKey("nrows".into()))?;
    let expected = ncols * nrows;
    let mut samples = Vec::with_capacity(expected);
    let mut last_line = 0;
    for (idx, line) in lines {
        last_line = idx + 1;
        for token in line.split_whitespace() {
            if samples.len() == expected {
                return Err(FormatError::Syntax {
                    line: last_line,
                    message: format!("more than {expected} samples"),
                });
            }
            let v = token.parse::<f64>().map_err(|_| FormatError::InvalidNumber {
                line: last_line,
                key: "sample".into(),
                value: token.to_string(),
            })?;
            samples.push(v);
        }
    }
    if samples.len() != expected {
        return Err(FormatError::ShortData {
            line: last_line,
            expected,
            found: samples.len(),
        });
    }
    Ok((RasterGrid::new(ncols, nrows, samples, nodata)?, header))
}

pub fn write_ascii_grid(grid: &RasterGrid, path: impl AsRef<Path>) -> Result<(), FormatError> {
    write_ascii_grid_with_header(grid, &AsciiHeader::default(), path)
}

/// Samples are written in shortest round-trip form, so reading the file
/// back reproduces every `f64` bit-exactly.
pub fn write_ascii_grid_with_header(
    grid: &RasterGrid,
    header: &AsciiHeader,
    path: impl AsRef<Path>,
) -> Result<(), FormatError> {
    let path = path.as_ref();
    let file = File::create(path).map_err(|e| FormatError::io(path, e))?;
    let mut out = BufWriter::new(file);
    let suffix = if header.center { "center" } else { "corner" };
    let write = |out: &mut BufWriter<File>| -> std::io::Result<()> {
        writeln!(out, "ncols {}", grid.width())?;
        writeln!(out, "nrows {}", grid.height())?;
        writeln!(out, "xll{suffix} {}", header.xll)?;
        writeln!(out, "yll{suffix} {}", header.yll)?;
        writeln!(out, "cellsize {}", header.cellsize)?;
        writeln!(out, "NODATA_value {}", grid.nodata())?;
        for row in 0..grid.height() {
            let mut first = true;
            for v in grid.row(row) {
                if !first {
                    out.write_all(b" ")?;
                }
                first = false;
                write!(out, "{v}")?;
            }
            out.write_all(b"\n")?;
        }
        out.flush()
    };
    write(&mut out).map_err(|e| FormatError::io(path, e))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn minimal_grid() {
        let (g, _) = parse_ascii_grid("ncols 2\nnrows 1\nxllcorner 0\nyllcorner 0\ncellsize 30\n5 7\n").unwrap();
        assert_eq!((g.width(), g.height()), (2, 1));
        assert_eq!(g.samples(), &[5.0, 7.0]);
    }

    #[test]
    fn nodata_honoured_any_case() {
        let (g, h) = parse_ascii_grid("NCOLS 2\nNROWS 1\nXLLCENTER 10\nYLLCENTER 20\nCELLSIZE 30\nnodata_value -9999\n1 -9999\n")
            .unwrap();
        assert_eq!(g.stats().count, 1);
        assert!(h.center);
        assert_eq!(h.xll, 10.0);
        assert_eq!(h.cellsize, 30.0);
    }

    #[test]
    fn errors_name_lines() {
        match parse_ascii_grid("ncols 2\nnrows 2\n1 2\n3\n") {
            Err(FormatError::ShortData { line, expected, found }) => {
                assert_eq!((line, expected, found), (4, 4, 3));
            }
            other => panic!("{other:?}"),
        }
        match parse_ascii_grid("ncols 2\nnrows 1\n1 x\n") {
            Err(FormatError::InvalidNumber { line, value, .. }) => {
                assert_eq!(line, 3);
                assert_eq!(value, "x");
            }
            other => panic!("{other:?}"),
        }
        assert!(matches!(
            parse_ascii_grid("ncols two\nnrows 1\n1\n"),
            Err(FormatError::InvalidNumber { line: 1, .. })
        ));
        assert!(matches!(
            parse_ascii_grid("ncols 1\nrows 1\n1\n"),
            Err(FormatError::Syntax { line: 2, .. })
        ));
        assert!(matches!(parse_ascii_grid("nrows 1\n1\n"), Err(FormatError::MissingKey(_))));
        assert!(matches!(
            parse_ascii_grid("ncols 1\nnrows 1\n1 2\n"),
            Err(FormatError::Syntax { line: 3, .. })
        ));
    }

    #[test]
    fn header_round_trip() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("g.asc");
        let g = RasterGrid::new(2, 2, vec![0.1, -9999.0, 1e-300, 3.0], -9999.0).unwrap();
        let h = AsciiHeader {
            xll: 500000.5,
            yll: 4.9e6,
            center: true,
            cellsize: 28.5,
        };
        write_ascii_grid_with_header(&g, &h, &path).unwrap();
        let (g2, h2) = read_ascii_grid_with_header(&path).unwrap();
        assert_eq!(g2, g);
        assert_eq!(h2, h);
    }
}
