//! Baseline TIFF subset: uncompressed, stripped, single-sample grayscale
//! (8/16-bit unsigned, 32/64-bit float) plus 8-bit palette images for
//! classified output.
//!
//! The no-data value travels in the GDAL_NODATA ASCII tag (42113) and the
//! class legend of palette images in ImageDescription, one name per line
//! after a `legend` header line.

use std::path::Path;

use super::FormatError;
use crate::raster::{ClassifiedGrid, RasterGrid, DEFAULT_NODATA};

const TAG_IMAGE_WIDTH: u16 = 256;
const TAG_IMAGE_LENGTH: u16 = 257;
const TAG_BITS_PER_SAMPLE: u16 = 258;
const TAG_COMPRESSION: u16 = 259;
const TAG_PHOTOMETRIC: u16 = 262;
const TAG_IMAGE_DESCRIPTION: u16 = 270;
const TAG_STRIP_OFFSETS: u16 = 273;
const TAG_SAMPLES_PER_PIXEL: u16 = 277;
const TAG_ROWS_PER_STRIP: u16 = 278;
const TAG_STRIP_BYTE_COUNTS: u16 = 279;
const TAG_PLANAR_CONFIG: u16 = 284;
const TAG_PREDICTOR: u16 = 317;
const TAG_COLOR_MAP: u16 = 320;
const TAG_TILE_WIDTH: u16 = 322;
const TAG_TILE_LENGTH: u16 = 323;
const TAG_TILE_OFFSETS: u16 = 324;
const TAG_SAMPLE_FORMAT: u16 = 339;
const TAG_GDAL_NODATA: u16 = 42113;

const TYPE_BYTE: u16 = 1;
const TYPE_ASCII: u16 = 2;
const TYPE_SHORT: u16 = 3;
const TYPE_LONG: u16 = 4;

const PHOTOMETRIC_WHITE_IS_ZERO: u32 = 0;
const PHOTOMETRIC_BLACK_IS_ZERO: u32 = 1;
const PHOTOMETRIC_PALETTE: u32 = 3;

const SAMPLE_FORMAT_UINT: u32 = 1;
const SAMPLE_FORMAT_FLOAT: u32 = 3;

const LEGEND_HEADER: &str = "legend";
const TARGET_STRIP_BYTES: usize = 64 * 1024;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SampleType {
    U8,
    U16,
    F32,
    F64,
}

impl SampleType {
    fn bits(self) -> u16 {
        match self {
            SampleType::U8 => 8,
            SampleType::U16 => 16,
            SampleType::F32 => 32,
            SampleType::F64 => 64,
        }
    }

    fn bytes(self) -> usize {
        self.bits() as usize / 8
    }

    fn format(self) -> u32 {
        match self {
            SampleType::U8 | SampleType::U16 => SAMPLE_FORMAT_UINT,
            SampleType::F32 | SampleType::F64 => SAMPLE_FORMAT_FLOAT,
        }
    }
}

/// Fixed colours for the first classes; label 0 (unclassified) is black.
const PALETTE: [[u8; 3]; 13] = [
    [0, 0, 0],
    [230, 25, 75],
    [60, 180, 75],
    [255, 225, 25],
    [0, 130, 200],
    [245, 130, 48],
    [145, 30, 180],
    [70, 240, 240],
    [240, 50, 230],
    [210, 245, 60],
    [250, 190, 212],
    [0, 128, 128],
    [170, 110, 40],
];

/// RGB colour of a class label in classified output.
pub fn class_color(label: u8) -> [u8; 3] {
    match PALETTE.get(label as usize) {
        Some(c) => *c,
        None => {
            // spread the remaining labels over the cube
            let x = (label as u32).wrapping_mul(2_654_435_761);
            [(x >> 24) as u8 | 0x20, (x >> 16) as u8 | 0x20, (x >> 8) as u8 | 0x20]
        }
    }
}

struct Entry {
    tag: u16,
    kind: u16,
    count: u32,
    data: Vec<u8>,
}

fn short(tag: u16, v: u16) -> Entry {
    Entry {
        tag,
        kind: TYPE_SHORT,
        count: 1,
        data: v.to_le_bytes().to_vec(),
    }
}

fn long(tag: u16, v: u32) -> Entry {
    Entry {
        tag,
        kind: TYPE_LONG,
        count: 1,
        data: v.to_le_bytes().to_vec(),
    }
}

fn longs(tag: u16, v: &[u32]) -> Entry {
    Entry {
        tag,
        kind: TYPE_LONG,
        count: v.len() as u32,
        data: v.iter().flat_map(|x| x.to_le_bytes()).collect(),
    }
}

fn ascii(tag: u16, s: &str) -> Entry {
    let mut data = s.as_bytes().to_vec();
    data.push(0);
    Entry {
        tag,
        kind: TYPE_ASCII,
        count: data.len() as u32,
        data,
    }
}

/// Assembles a little-endian single-IFD TIFF: header, strips, out-of-line
/// tag values, IFD.
fn encode(
    width: usize,
    height: usize,
    sample: SampleType,
    pixels: &[u8],
    mut extra: Vec<Entry>,
    photometric: u32,
) -> Result<Vec<u8>, FormatError> {
    let row_bytes = width * sample.bytes();
    let rows_per_strip = (TARGET_STRIP_BYTES / row_bytes).clamp(1, height);
    let strips = height.div_ceil(rows_per_strip);
    if pixels.len() + 8 + 4096 + strips * 8 + extra.iter().map(|e| e.data.len()).sum::<usize>()
        > u32::MAX as usize
    {
        return Err(FormatError::UnsupportedTiff {
            tag: "StripByteCounts",
            detail: "image exceeds 4 GiB classic TIFF limit".into(),
        });
    }

    let mut out = Vec::with_capacity(pixels.len() + 1024);
    out.extend_from_slice(b"II");
    out.extend_from_slice(&42u16.to_le_bytes());
    out.extend_from_slice(&0u32.to_le_bytes());

    let mut offsets = Vec::with_capacity(strips);
    let mut counts = Vec::with_capacity(strips);
    for chunk in pixels.chunks(rows_per_strip * row_bytes) {
        offsets.push(out.len() as u32);
        counts.push(chunk.len() as u32);
        out.extend_from_slice(chunk);
    }

    let mut entries = vec![
        long(TAG_IMAGE_WIDTH, width as u32),
        long(TAG_IMAGE_LENGTH, height as u32),
        short(TAG_BITS_PER_SAMPLE, sample.bits()),
        short(TAG_COMPRESSION, 1),
        short(TAG_PHOTOMETRIC, photometric as u16),
        longs(TAG_STRIP_OFFSETS, &offsets),
        short(TAG_SAMPLES_PER_PIXEL, 1),
        long(TAG_ROWS_PER_STRIP, rows_per_strip as u32),
        longs(TAG_STRIP_BYTE_COUNTS, &counts),
        short(TAG_PLANAR_CONFIG, 1),
        short(TAG_SAMPLE_FORMAT, sample.format() as u16),
    ];
    entries.append(&mut extra);
    entries.sort_by_key(|e| e.tag);

    // out-of-line values, word aligned
    let mut value_offsets = Vec::with_capacity(entries.len());
    for e in &entries {
        if e.data.len() > 4 {
            if out.len() % 2 == 1 {
                out.push(0);
            }
            value_offsets.push(Some(out.len() as u32));
            out.extend_from_slice(&e.data);
        } else {
            value_offsets.push(None);
        }
    }
    if out.len() % 2 == 1 {
        out.push(0);
    }
    let ifd = out.len() as u32;
    out[4..8].copy_from_slice(&ifd.to_le_bytes());
    out.extend_from_slice(&(entries.len() as u16).to_le_bytes());
    for (e, off) in entries.iter().zip(value_offsets) {
        out.extend_from_slice(&e.tag.to_le_bytes());
        out.extend_from_slice(&e.kind.to_le_bytes());
        out.extend_from_slice(&e.count.to_le_bytes());
        match off {
            Some(o) => out.extend_from_slice(&o.to_le_bytes()),
            None => {
                let mut inline = [0u8; 4];
                inline[..e.data.len()].copy_from_slice(&e.data);
                out.extend_from_slice(&inline);
            }
        }
    }
    out.extend_from_slice(&0u32.to_le_bytes());
    Ok(out)
}

/// Writes a grayscale TIFF. Integer sample types require every valid
/// sample to be an in-range integer; no-data pixels must be representable
/// too (or absent).
pub fn write_tiff(
    grid: &RasterGrid,
    sample: SampleType,
    path: impl AsRef<Path>,
) -> Result<(), FormatError> {
    let path = path.as_ref();
    let bytes = encode_grid(grid, sample)?;
    std::fs::write(path, bytes).map_err(|e| FormatError::io(path, e))
}

fn encode_grid(grid: &RasterGrid, sample: SampleType) -> Result<Vec<u8>, FormatError> {
    let limit = match sample {
        SampleType::U8 => Some(u8::MAX as f64),
        SampleType::U16 => Some(u16::MAX as f64),
        _ => None,
    };
    let mut pixels = Vec::with_capacity(grid.len() * sample.bytes());
    for (i, &v) in grid.samples().iter().enumerate() {
        if let Some(max) = limit {
            if !(v >= 0.0 && v <= max && v.fract() == 0.0) {
                return Err(FormatError::UnsupportedTiff {
                    tag: "BitsPerSample",
                    detail: format!(
                        "sample {v} at row {}, col {} does not fit {}-bit unsigned",
                        i / grid.width(),
                        i % grid.width(),
                        sample.bits()
                    ),
                });
            }
        }
        match sample {
            SampleType::U8 => pixels.push(v as u8),
            SampleType::U16 => pixels.extend_from_slice(&(v as u16).to_le_bytes()),
            SampleType::F32 => pixels.extend_from_slice(&(v as f32).to_le_bytes()),
            SampleType::F64 => pixels.extend_from_slice(&v.to_le_bytes()),
        }
    }
    let nodata = ascii(TAG_GDAL_NODATA, &format!("{}", grid.nodata()));
    encode(
        grid.width(),
        grid.height(),
        sample,
        &pixels,
        vec![nodata],
        PHOTOMETRIC_BLACK_IS_ZERO,
    )
}

/// Writes an 8-bit palette TIFF; the legend goes to ImageDescription.
pub fn write_classified_tiff(grid: &ClassifiedGrid, path: impl AsRef<Path>) -> Result<(), FormatError> {
    let path = path.as_ref();
    if grid.legend().len() > u8::MAX as usize {
        return Err(FormatError::UnsupportedTiff {
            tag: "ColorMap",
            detail: format!("{} classes exceed the 8-bit palette", grid.legend().len()),
        });
    }
    let pixels: Vec<u8> = grid.labels().iter().map(|&l| l as u8).collect();
    let mut map = vec![0u16; 3 * 256];
    for i in 0..256usize {
        let [r, g, b] = class_color(i as u8);
        map[i] = r as u16 * 257;
        map[256 + i] = g as u16 * 257;
        map[512 + i] = b as u16 * 257;
    }
    let color_map = Entry {
        tag: TAG_COLOR_MAP,
        kind: TYPE_SHORT,
        count: map.len() as u32,
        data: map.iter().flat_map(|x| x.to_le_bytes()).collect(),
    };
    let mut description = String::from(LEGEND_HEADER);
    for name in grid.legend() {
        description.push('\n');
        description.push_str(name);
    }
    let bytes = encode(
        grid.width(),
        grid.height(),
        SampleType::U8,
        &pixels,
        vec![color_map, ascii(TAG_IMAGE_DESCRIPTION, &description)],
        PHOTOMETRIC_PALETTE,
    )?;
    std::fs::write(path, bytes).map_err(|e| FormatError::io(path, e))
}

#[derive(Clone, Copy, PartialEq, Eq)]
enum Order {
    Little,
    Big,
}

struct Reader<'a> {
    data: &'a [u8],
    order: Order,
}

impl<'a> Reader<'a> {
    fn slice(&self, offset: usize, len: usize) -> Result<&'a [u8], FormatError> {
        offset
            .checked_add(len)
            .and_then(|end| self.data.get(offset..end))
            .ok_or_else(|| {
                FormatError::MalformedTiff(format!(
                    "range {offset}..{} beyond end of file ({} bytes)",
                    offset.saturating_add(len),
                    self.data.len()
                ))
            })
    }

    fn u16_at(&self, offset: usize) -> Result<u16, FormatError> {
        let b: [u8; 2] = self.slice(offset, 2)?.try_into().unwrap();
        Ok(match self.order {
            Order::Little => u16::from_le_bytes(b),
            Order::Big => u16::from_be_bytes(b),
        })
    }

    fn u32_at(&self, offset: usize) -> Result<u32, FormatError> {
        let b: [u8; 4] = self.slice(offset, 4)?.try_into().unwrap();
        Ok(match self.order {
            Order::Little => u32::from_le_bytes(b),
            Order::Big => u32::from_be_bytes(b),
        })
    }
}

struct Field {
    kind: u16,
    count: usize,
    bytes: Vec<u8>,
}

struct Ifd<'a> {
    reader: Reader<'a>,
    fields: Vec<(u16, Field)>,
}

fn type_size(kind: u16) -> Option<usize> {
    match kind {
        1 | 2 | 6 | 7 => Some(1),
        3 | 8 => Some(2),
        4 | 9 | 11 => Some(4),
        5 | 10 | 12 | 16 | 17 | 18 => Some(8),
        _ => None,
    }
}

impl<'a> Ifd<'a> {
    fn parse(data: &'a [u8]) -> Result<Self, FormatError> {
        let order = match data.get(0..2) {
            Some(b"II") => Order::Little,
            Some(b"MM") => Order::Big,
            _ => return Err(FormatError::MalformedTiff("missing II/MM byte-order mark".into())),
        };
        let reader = Reader { data, order };
        match reader.u16_at(2)? {
            42 => {}
            43 => {
                return Err(FormatError::UnsupportedTiff {
                    tag: "BigTIFF",
                    detail: "only classic TIFF is supported".into(),
                })
            }
            m => return Err(FormatError::MalformedTiff(format!("bad magic number {m}"))),
        }
        let ifd = reader.u32_at(4)? as usize;
        let n = reader.u16_at(ifd)? as usize;
        let mut fields = Vec::with_capacity(n);
        for i in 0..n {
            let at = ifd + 2 + i * 12;
            let tag = reader.u16_at(at)?;
            let kind = reader.u16_at(at + 2)?;
            let count = reader.u32_at(at + 4)? as usize;
            let Some(size) = type_size(kind) else {
                continue;
            };
            let len = size.checked_mul(count).ok_or_else(|| {
                FormatError::MalformedTiff(format!("tag {tag}: value count overflow"))
            })?;
            let bytes = if len <= 4 {
                reader.slice(at + 8, len)?.to_vec()
            } else {
                let off = reader.u32_at(at + 8)? as usize;
                reader.slice(off, len)?.to_vec()
            };
            fields.push((tag, Field { kind, count, bytes }));
        }
        Ok(Self { reader, fields })
    }

    fn field(&self, tag: u16) -> Option<&Field> {
        self.fields.iter().find(|(t, _)| *t == tag).map(|(_, f)| f)
    }

    fn uints(&self, tag: u16, name: &'static str) -> Result<Option<Vec<u32>>, FormatError> {
        let Some(f) = self.field(tag) else {
            return Ok(None);
        };
        let r = Reader {
            data: &f.bytes,
            order: self.reader.order,
        };
        let values = match f.kind {
            TYPE_BYTE => f.bytes.iter().map(|&b| b as u32).collect(),
            TYPE_SHORT => (0..f.count).map(|i| r.u16_at(i * 2).map(u32::from)).collect::<Result<_, _>>()?,
            TYPE_LONG => (0..f.count).map(|i| r.u32_at(i * 4)).collect::<Result<_, _>>()?,
            k => {
                return Err(FormatError::MalformedTiff(format!(
                    "{name}: unexpected field type {k}"
                )))
            }
        };
        Ok(Some(values))
    }

    fn uint(&self, tag: u16, name: &'static str) -> Result<Option<u32>, FormatError> {
        Ok(self.uints(tag, name)?.and_then(|v| v.first().copied()))
    }

    fn require(&self, tag: u16, name: &'static str) -> Result<u32, FormatError> {
        self.uint(tag, name)?
            .ok_or_else(|| FormatError::MalformedTiff(format!("missing required tag {name}")))
    }

    fn ascii(&self, tag: u16) -> Option<String> {
        let f = self.field(tag)?;
        if f.kind != TYPE_ASCII {
            return None;
        }
        let end = f.bytes.iter().position(|&b| b == 0).unwrap_or(f.bytes.len());
        Some(String::from_utf8_lossy(&f.bytes[..end]).into_owned())
    }
}

struct Decoded {
    width: usize,
    height: usize,
    sample: SampleType,
    photometric: u32,
    samples: Vec<f64>,
    nodata: Option<f64>,
    description: Option<String>,
}

fn decode(data: &[u8]) -> Result<Decoded, FormatError> {
    let ifd = Ifd::parse(data)?;

    for (tag, name) in [
        (TAG_TILE_WIDTH, "TileWidth"),
        (TAG_TILE_LENGTH, "TileLength"),
        (TAG_TILE_OFFSETS, "TileOffsets"),
    ] {
        if ifd.field(tag).is_some() {
            return Err(FormatError::UnsupportedTiff {
                tag: name,
                detail: "tiled images are not supported".into(),
            });
        }
    }
    let compression = ifd.uint(TAG_COMPRESSION, "Compression")?.unwrap_or(1);
    if compression != 1 {
        return Err(FormatError::UnsupportedTiff {
            tag: "Compression",
            detail: format!("compression scheme {compression}; only uncompressed (1) is supported"),
        });
    }
    let spp = ifd.uint(TAG_SAMPLES_PER_PIXEL, "SamplesPerPixel")?.unwrap_or(1);
    if spp != 1 {
        return Err(FormatError::UnsupportedTiff {
            tag: "SamplesPerPixel",
            detail: format!("{spp} samples per pixel; only single-band images are supported"),
        });
    }
    let predictor = ifd.uint(TAG_PREDICTOR, "Predictor")?.unwrap_or(1);
    if predictor != 1 {
        return Err(FormatError::UnsupportedTiff {
            tag: "Predictor",
            detail: format!("predictor {predictor}"),
        });
    }
    let photometric = ifd.require(TAG_PHOTOMETRIC, "PhotometricInterpretation")?;
    if ![PHOTOMETRIC_WHITE_IS_ZERO, PHOTOMETRIC_BLACK_IS_ZERO, PHOTOMETRIC_PALETTE].contains(&photometric) {
        return Err(FormatError::UnsupportedTiff {
            tag: "PhotometricInterpretation",
            detail: format!("photometric {photometric}; only grayscale and palette are supported"),
        });
    }
    let bits = ifd.uint(TAG_BITS_PER_SAMPLE, "BitsPerSample")?.unwrap_or(1);
    let format = ifd.uint(TAG_SAMPLE_FORMAT, "SampleFormat")?.unwrap_or(SAMPLE_FORMAT_UINT);
    let sample = match (bits, format) {
        (8, SAMPLE_FORMAT_UINT) => SampleType::U8,
        (16, SAMPLE_FORMAT_UINT) => SampleType::U16,
        (32, SAMPLE_FORMAT_FLOAT) => SampleType::F32,
        (64, SAMPLE_FORMAT_FLOAT) => SampleType::F64,
        (8 | 16 | 32 | 64, f) if f != SAMPLE_FORMAT_UINT && f != SAMPLE_FORMAT_FLOAT => {
            return Err(FormatError::UnsupportedTiff {
                tag: "SampleFormat",
                detail: format!("sample format {f}"),
            })
        }
        (b, f) => {
            return Err(FormatError::UnsupportedTiff {
                tag: "BitsPerSample",
                detail: format!("{b}-bit samples with sample format {f}"),
            })
        }
    };

    let width = ifd.require(TAG_IMAGE_WIDTH, "ImageWidth")? as usize;
    let height = ifd.require(TAG_IMAGE_LENGTH, "ImageLength")? as usize;
    let rows_per_strip = ifd
        .uint(TAG_ROWS_PER_STRIP, "RowsPerStrip")?
        .map(|r| (r as usize).min(height))
        .unwrap_or(height)
        .max(1);
    let offsets = ifd
        .uints(TAG_STRIP_OFFSETS, "StripOffsets")?
        .ok_or_else(|| FormatError::MalformedTiff("missing required tag StripOffsets".into()))?;
    let counts = ifd.uints(TAG_STRIP_BYTE_COUNTS, "StripByteCounts")?;

    let row_bytes = width * sample.bytes();
    let strips = height.div_ceil(rows_per_strip);
    if offsets.len() < strips {
        return Err(FormatError::MalformedTiff(format!(
            "{} strip offsets for {strips} strips",
            offsets.len()
        )));
    }
    let mut raw = Vec::with_capacity(row_bytes * height);
    for s in 0..strips {
        let rows = rows_per_strip.min(height - s * rows_per_strip);
        let len = rows * row_bytes;
        if let Some(c) = counts.as_ref().and_then(|c| c.get(s)) {
            if (*c as usize) < len {
                return Err(FormatError::MalformedTiff(format!(
                    "strip {s} holds {c} bytes, expected {len}"
                )));
            }
        }
        raw.extend_from_slice(ifd.reader.slice(offsets[s] as usize, len)?);
    }

    let order = ifd.reader.order;
    let samples: Vec<f64> = match sample {
        SampleType::U8 => raw.iter().map(|&b| b as f64).collect(),
        SampleType::U16 => raw
            .chunks_exact(2)
            .map(|c| {
                let b = [c[0], c[1]];
                (if order == Order::Little { u16::from_le_bytes(b) } else { u16::from_be_bytes(b) }) as f64
            })
            .collect(),
        SampleType::F32 => raw
            .chunks_exact(4)
            .map(|c| {
                let b: [u8; 4] = c.try_into().unwrap();
                (if order == Order::Little { f32::from_le_bytes(b) } else { f32::from_be_bytes(b) }) as f64
            })
            .collect(),
        SampleType::F64 => raw
            .chunks_exact(8)
            .map(|c| {
                let b: [u8; 8] = c.try_into().unwrap();
                if order == Order::Little {
                    f64::from_le_bytes(b)
                } else {
                    f64::from_be_bytes(b)
                }
            })
            .collect(),
    };
    let nodata = match ifd.ascii(TAG_GDAL_NODATA) {
        Some(s) => Some(s.trim().parse::<f64>().map_err(|_| {
            FormatError::MalformedTiff(format!("GDAL_NODATA value '{s}' is not a number"))
        })?),
        None => None,
    };
    Ok(Decoded {
        width,
        height,
        sample,
        photometric,
        samples,
        nodata,
        description: ifd.ascii(TAG_IMAGE_DESCRIPTION),
    })
}

fn read_file(path: &Path) -> Result<Vec<u8>, FormatError> {
    std::fs::read(path).map_err(|e| FormatError::io(path, e))
}

/// Reads a grayscale (or palette) TIFF into a grid. No-data comes from the
/// GDAL_NODATA tag when present, otherwise the default sentinel.
pub fn read_tiff(path: impl AsRef<Path>) -> Result<RasterGrid, FormatError> {
    let d = decode(&read_file(path.as_ref())?)?;
    let nodata = d.nodata.unwrap_or(DEFAULT_NODATA);
    Ok(RasterGrid::new(d.width, d.height, d.samples, nodata)?)
}

/// Reads labels from an 8- or 16-bit unsigned TIFF. The legend comes from
/// ImageDescription when it was written by [`write_classified_tiff`];
/// otherwise classes are named `class_<n>` up to the largest label.
pub fn read_classified_tiff(path: impl AsRef<Path>) -> Result<ClassifiedGrid, FormatError> {
    let d = decode(&read_file(path.as_ref())?)?;
    if !matches!(d.sample, SampleType::U8 | SampleType::U16) {
        return Err(FormatError::UnsupportedTiff {
            tag: "SampleFormat",
            detail: "class labels must be unsigned integers".into(),
        });
    }
    let labels: Vec<u16> = d.samples.iter().map(|&v| v as u16).collect();
    let legend = match d.description.as_deref().and_then(|s| s.strip_prefix(LEGEND_HEADER)) {
        Some(rest) if d.photometric == PHOTOMETRIC_PALETTE || rest.is_empty() || rest.starts_with('\n') => {
            rest.lines().filter(|l| !l.is_empty()).map(str::to_string).collect()
        }
        _ => {
            let max = labels.iter().copied().max().unwrap_or(0);
            (1..=max).map(|i| format!("class_{i}")).collect()
        }
    };
    Ok(ClassifiedGrid::new(d.width, d.height, labels, legend)?)
}
