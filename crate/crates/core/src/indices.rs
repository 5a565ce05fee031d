//! NDVI and NDVI-thresholds land surface emissivity.

use thiserror::Error;

use crate::calibration::ReflectanceParams;
use crate::raster::{RasterError, RasterGrid, DEFAULT_NODATA};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum IndexError {
    #[error("emissivity {name} = {value} must lie in (0.9, 1.0]")]
    Emissivity { name: &'static str, value: f64 },
    #[error("NDVI thresholds must satisfy low < high, got {low} and {high}")]
    Thresholds { low: f64, high: f64 },
    #[error(transparent)]
    Raster(#[from] RasterError),
}

/// `(nir − red) / (nir + red)`, `None` when the denominator vanishes.
pub fn ndvi(red: f64, nir: f64) -> Option<f64> {
    let sum = nir + red;
    if sum == 0.0 || !sum.is_finite() {
        None
    } else {
        Some((nir - red) / sum)
    }
}

/// NDVI of two reflectance grids. No-data in either input, or a zero
/// denominator, yields [`DEFAULT_NODATA`].
pub fn ndvi_grid(red: &RasterGrid, nir: &RasterGrid) -> Result<RasterGrid, IndexError> {
    red.same_shape(nir)?;
    let samples = red
        .samples()
        .iter()
        .zip(nir.samples())
        .map(|(&r, &n)| {
            if red.is_nodata(r) || nir.is_nodata(n) {
                DEFAULT_NODATA
            } else {
                ndvi(r, n).unwrap_or(DEFAULT_NODATA)
            }
        })
        .collect();
    Ok(RasterGrid::new(red.width(), red.height(), samples, DEFAULT_NODATA)?)
}

/// NDVI straight from red/NIR digital numbers through clamped reflectance.
/// Returns the value (or `None`) and how many of the two reflectances
/// were clamped.
pub fn ndvi_from_dn(
    red_dn: f64,
    nir_dn: f64,
    red: &ReflectanceParams,
    nir: &ReflectanceParams,
) -> (Option<f64>, u64) {
    let (r, cr) = red.clamped_reflectance_of_dn(red_dn);
    let (n, cn) = nir.clamped_reflectance_of_dn(nir_dn);
    (ndvi(r, n), cr as u64 + cn as u64)
}

/// Emissivity assignment for the NDVI-thresholds method.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EmissivityConfig {
    pub ndvi_low: f64,
    pub ndvi_high: f64,
    /// Used for `0 <= NDVI < ndvi_low`.
    pub eps_soil: f64,
    /// Used for `NDVI > ndvi_high`.
    pub eps_veg: f64,
    /// Used for `NDVI < 0`.
    pub eps_water: f64,
}

impl Default for EmissivityConfig {
    fn default() -> Self {
        Self {
            ndvi_low: 0.157,
            ndvi_high: 0.727,
            eps_soil: 0.97,
            eps_veg: 0.99,
            eps_water: 0.995,
        }
    }
}

impl EmissivityConfig {
    pub fn validate(&self) -> Result<(), IndexError> {
        for (name, value) in [
            ("eps_soil", self.eps_soil),
            ("eps_veg", self.eps_veg),
            ("eps_water", self.eps_water),
        ] {
            if !(value > 0.9 && value <= 1.0) {
                return Err(IndexError::Emissivity { name, value });
            }
        }
        if !(self.ndvi_low < self.ndvi_high) || self.ndvi_low <= 0.0 {
            return Err(IndexError::Thresholds {
                low: self.ndvi_low,
                high: self.ndvi_high,
            });
        }
        Ok(())
    }
}

/// Land surface emissivity from NDVI:
/// `1.0094 + 0.047·ln(NDVI)` inside `[ndvi_low, ndvi_high]`, the
/// configured constants outside.
pub fn lse(ndvi: f64, cfg: &EmissivityConfig) -> f64 {
    if ndvi < 0.0 {
        cfg.eps_water
    } else if ndvi < cfg.ndvi_low {
        cfg.eps_soil
    } else if ndvi <= cfg.ndvi_high {
        1.0094 + 0.047 * ndvi.ln()
    } else {
        cfg.eps_veg
    }
}

pub fn emissivity_grid(ndvi: &RasterGrid, cfg: &EmissivityConfig) -> RasterGrid {
    let mut out = ndvi.map_valid(|v| lse(v, cfg));
    if ndvi.nodata() != DEFAULT_NODATA {
        out = RasterGrid::new(
            out.width(),
            out.height(),
            out.samples()
                .iter()
                .map(|&v| if ndvi.is_nodata(v) { DEFAULT_NODATA } else { v })
                .collect(),
            DEFAULT_NODATA,
        )
        .expect("same shape");
    }
    out
}
