//! Operations a tile job can carry and their pixel-local kernels.
//!
//! Every kernel depends only on the tile's pixels and scene scalars that
//! were computed beforehand (calibration, path radiance, ψ, signatures),
//! so a stitched tiled result is bit-identical to the whole-image call.

use crate::calibration::ReflectanceParams;
use crate::classifier::{self, ClassSignature, Interval};
use crate::indices::{self, EmissivityConfig};
use crate::lst::{LstParams, PsiCoefficients, ThermalCalibration};
use crate::raster::{self, DnHistogram, RasterGrid, DEFAULT_NODATA};

use super::protocol::{Decoder, Encoder, ProtocolError};

#[derive(Debug, Clone, PartialEq)]
pub enum CalibrateKind {
    Radiance { gain: f64, bias: f64 },
    /// Clamped reflectance; clamped pixels are counted as flagged.
    Reflectance(ReflectanceParams),
}

#[derive(Debug, Clone, PartialEq)]
pub enum Operation {
    /// Copies the input; exercises split/aggregate and the transport.
    Identity,
    /// 1 band: DN → radiance or reflectance.
    Calibrate(CalibrateKind),
    /// 2 bands (red DN, NIR DN) → NDVI via clamped reflectance.
    Ndvi {
        red: ReflectanceParams,
        nir: ReflectanceParams,
    },
    /// 1 band (NDVI) → emissivity.
    Emissivity(EmissivityConfig),
    /// 2 bands (thermal DN, NDVI) → LST °C.
    LstMap(LstParams),
    /// 3 bands (red DN, NIR DN, thermal DN) → LST °C in one pass.
    Pipeline {
        red: ReflectanceParams,
        nir: ReflectanceParams,
        lst: LstParams,
    },
    /// `bands` inputs → class labels.
    Classify {
        bands: usize,
        signatures: Vec<ClassSignature>,
    },
    /// 1 band → DN histogram.
    Histogram { max_dn: u32 },
}

/// What a job produced for its tile.
#[derive(Debug, Clone, PartialEq)]
pub enum Payload {
    Raster { grid: RasterGrid, flagged: u64 },
    Labels { rows: usize, cols: usize, labels: Vec<u16> },
    Histogram(DnHistogram),
}

impl Payload {
    pub fn shape(&self) -> Option<(usize, usize)> {
        match self {
            Payload::Raster { grid, .. } => Some((grid.height(), grid.width())),
            Payload::Labels { rows, cols, .. } => Some((*rows, *cols)),
            Payload::Histogram(_) => None,
        }
    }
}

impl Operation {
    pub fn code(&self) -> u8 {
        match self {
            Operation::Identity => 0,
            Operation::Calibrate(_) => 1,
            Operation::Ndvi { .. } => 2,
            Operation::Emissivity(_) => 3,
            Operation::LstMap(_) => 4,
            Operation::Pipeline { .. } => 5,
            Operation::Classify { .. } => 6,
            Operation::Histogram { .. } => 7,
        }
    }

    pub fn name(&self) -> &'static str {
        match self {
            Operation::Identity => "identity",
            Operation::Calibrate(_) => "calibrate",
            Operation::Ndvi { .. } => "ndvi",
            Operation::Emissivity(_) => "emissivity",
            Operation::LstMap(_) => "lst_map",
            Operation::Pipeline { .. } => "pipeline",
            Operation::Classify { .. } => "classify_map",
            Operation::Histogram { .. } => "histogram",
        }
    }

    pub fn input_count(&self) -> usize {
        match self {
            Operation::Identity | Operation::Calibrate(_) | Operation::Emissivity(_) | Operation::Histogram { .. } => 1,
            Operation::Ndvi { .. } | Operation::LstMap(_) => 2,
            Operation::Pipeline { .. } => 3,
            Operation::Classify { bands, .. } => *bands,
        }
    }

    /// Runs the kernel over one tile's input bands.
    pub fn execute(&self, bands: &[&RasterGrid]) -> Result<Payload, String> {
        if bands.len() != self.input_count() {
            return Err(format!(
                "{} expects {} input band(s), got {}",
                self.name(),
                self.input_count(),
                bands.len()
            ));
        }
        let first = bands.first().ok_or_else(|| format!("{} needs at least one band", self.name()))?;
        for b in &bands[1..] {
            first.same_shape(b).map_err(|e| e.to_string())?;
        }
        let (w, h) = (first.width(), first.height());
        let raster = |samples: Vec<f64>, flagged: u64| -> Result<Payload, String> {
            Ok(Payload::Raster {
                grid: RasterGrid::new(w, h, samples, DEFAULT_NODATA).map_err(|e| e.to_string())?,
                flagged,
            })
        };
        match self {
            Operation::Identity => Ok(Payload::Raster {
                grid: (*first).clone(),
                flagged: 0,
            }),
            Operation::Calibrate(kind) => {
                let mut flagged = 0u64;
                let samples = first
                    .samples()
                    .iter()
                    .map(|&dn| {
                        if first.is_nodata(dn) {
                            return DEFAULT_NODATA;
                        }
                        match kind {
                            CalibrateKind::Radiance { gain, bias } => gain * dn + bias,
                            CalibrateKind::Reflectance(p) => {
                                let (rho, c) = p.clamped_reflectance_of_dn(dn);
                                flagged += c as u64;
                                rho
                            }
                        }
                    })
                    .collect();
                raster(samples, flagged)
            }
            Operation::Ndvi { red, nir } => {
                let (r, n) = (bands[0], bands[1]);
                let mut flagged = 0u64;
                let samples = r
                    .samples()
                    .iter()
                    .zip(n.samples())
                    .map(|(&rd, &nd)| {
                        if r.is_nodata(rd) || n.is_nodata(nd) {
                            return DEFAULT_NODATA;
                        }
                        let (v, c) = indices::ndvi_from_dn(rd, nd, red, nir);
                        flagged += c;
                        v.unwrap_or(DEFAULT_NODATA)
                    })
                    .collect();
                raster(samples, flagged)
            }
            Operation::Emissivity(cfg) => {
                let samples = first
                    .samples()
                    .iter()
                    .map(|&v| if first.is_nodata(v) { DEFAULT_NODATA } else { indices::lse(v, cfg) })
                    .collect();
                raster(samples, 0)
            }
            Operation::LstMap(params) => {
                let out = crate::lst::lst_map_with(bands[0], bands[1], params).map_err(|e| e.to_string())?;
                Ok(Payload::Raster { grid: out, flagged: 0 })
            }
            Operation::Pipeline { red, nir, lst } => {
                let (r, n, t) = (bands[0], bands[1], bands[2]);
                let mut flagged = 0u64;
                let samples = (0..r.len())
                    .map(|i| {
                        let (rd, nd, td) = (r.samples()[i], n.samples()[i], t.samples()[i]);
                        if r.is_nodata(rd) || n.is_nodata(nd) || t.is_nodata(td) {
                            return DEFAULT_NODATA;
                        }
                        let (ndvi, c) = indices::ndvi_from_dn(rd, nd, red, nir);
                        flagged += c;
                        ndvi.and_then(|v| lst.lst_celsius(td, v)).unwrap_or(DEFAULT_NODATA)
                    })
                    .collect();
                raster(samples, flagged)
            }
            Operation::Classify { signatures, .. } => {
                classifier::check_arity(bands.len(), signatures).map_err(|e| e.to_string())?;
                Ok(Payload::Labels {
                    rows: h,
                    cols: w,
                    labels: classifier::classify_samples(bands, signatures),
                })
            }
            Operation::Histogram { max_dn } => raster::dn_histogram(first, *max_dn)
                .map(Payload::Histogram)
                .map_err(|e| e.to_string()),
        }
    }

    pub(crate) fn encode_params(&self, e: &mut Encoder) {
        match self {
            Operation::Identity => {}
            Operation::Calibrate(CalibrateKind::Radiance { gain, bias }) => {
                e.u8(0);
                e.f64(*gain);
                e.f64(*bias);
            }
            Operation::Calibrate(CalibrateKind::Reflectance(p)) => {
                e.u8(1);
                put_reflectance(e, p);
            }
            Operation::Ndvi { red, nir } => {
                put_reflectance(e, red);
                put_reflectance(e, nir);
            }
            Operation::Emissivity(cfg) => put_emissivity(e, cfg),
            Operation::LstMap(p) => put_lst(e, p),
            Operation::Pipeline { red, nir, lst } => {
                put_reflectance(e, red);
                put_reflectance(e, nir);
                put_lst(e, lst);
            }
            Operation::Classify { bands, signatures } => {
                e.u32(*bands as u32);
                e.u32(signatures.len() as u32);
                for s in signatures {
                    e.bytes_with_len(s.class_name.as_bytes());
                    for iv in &s.intervals {
                        e.f64(iv.lo);
                        e.f64(iv.hi);
                    }
                }
            }
            Operation::Histogram { max_dn } => e.u32(*max_dn),
        }
    }

    pub(crate) fn decode_params(code: u8, d: &mut Decoder<'_>) -> Result<Self, ProtocolError> {
        Ok(match code {
            0 => Operation::Identity,
            1 => match d.u8()? {
                0 => Operation::Calibrate(CalibrateKind::Radiance {
                    gain: d.f64()?,
                    bias: d.f64()?,
                }),
                1 => Operation::Calibrate(CalibrateKind::Reflectance(get_reflectance(d)?)),
                k => return Err(ProtocolError::Invalid(format!("unknown calibrate kind {k}"))),
            },
            2 => Operation::Ndvi {
                red: get_reflectance(d)?,
                nir: get_reflectance(d)?,
            },
            3 => Operation::Emissivity(get_emissivity(d)?),
            4 => Operation::LstMap(get_lst(d)?),
            5 => Operation::Pipeline {
                red: get_reflectance(d)?,
                nir: get_reflectance(d)?,
                lst: get_lst(d)?,
            },
            6 => {
                let bands = d.u32()? as usize;
                let classes = d.u32()? as usize;
                let mut signatures = Vec::with_capacity(classes.min(1024));
                for _ in 0..classes {
                    let name = String::from_utf8(d.bytes_with_len()?.to_vec())
                        .map_err(|_| ProtocolError::Invalid("class name is not UTF-8".into()))?;
                    let mut intervals = Vec::with_capacity(bands.min(1024));
                    for _ in 0..bands {
                        intervals.push(Interval {
                            lo: d.f64()?,
                            hi: d.f64()?,
                        });
                    }
                    signatures.push(
                        ClassSignature::new(name, intervals).map_err(|e| ProtocolError::Invalid(e.to_string()))?,
                    );
                }
                Operation::Classify { bands, signatures }
            }
            7 => Operation::Histogram { max_dn: d.u32()? },
            c => return Err(ProtocolError::UnknownOp(c)),
        })
    }
}

fn put_reflectance(e: &mut Encoder, p: &ReflectanceParams) {
    for v in [p.gain, p.bias, p.e0, p.cos_sun_zenith, p.earth_sun_distance, p.l_path] {
        e.f64(v);
    }
}

fn get_reflectance(d: &mut Decoder<'_>) -> Result<ReflectanceParams, ProtocolError> {
    Ok(ReflectanceParams {
        gain: d.f64()?,
        bias: d.f64()?,
        e0: d.f64()?,
        cos_sun_zenith: d.f64()?,
        earth_sun_distance: d.f64()?,
        l_path: d.f64()?,
    })
}

fn put_emissivity(e: &mut Encoder, c: &EmissivityConfig) {
    for v in [c.ndvi_low, c.ndvi_high, c.eps_soil, c.eps_veg, c.eps_water] {
        e.f64(v);
    }
}

fn get_emissivity(d: &mut Decoder<'_>) -> Result<EmissivityConfig, ProtocolError> {
    Ok(EmissivityConfig {
        ndvi_low: d.f64()?,
        ndvi_high: d.f64()?,
        eps_soil: d.f64()?,
        eps_veg: d.f64()?,
        eps_water: d.f64()?,
    })
}

fn put_lst(e: &mut Encoder, p: &LstParams) {
    let t = &p.thermal;
    for v in [t.gain, t.bias, t.k1, t.k2, t.lambda_um, p.psi.psi1, p.psi.psi2, p.psi.psi3] {
        e.f64(v);
    }
    put_emissivity(e, &p.emissivity);
}

fn get_lst(d: &mut Decoder<'_>) -> Result<LstParams, ProtocolError> {
    let thermal = ThermalCalibration {
        gain: d.f64()?,
        bias: d.f64()?,
        k1: d.f64()?,
        k2: d.f64()?,
        lambda_um: d.f64()?,
    };
    let psi = PsiCoefficients::new(d.f64()?, d.f64()?, d.f64()?);
    Ok(LstParams {
        thermal,
        psi,
        emissivity: get_emissivity(d)?,
    })
}
