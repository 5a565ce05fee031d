//! Single-channel land surface temperature retrieval for the TM/ETM+
//! thermal band.
//!
//! ```text
//! Ts = γ [ ε⁻¹ (ψ1 L + ψ2) + ψ3 ] + δ
//! γ  = { (c2 L / T²) (λ⁴ L / c1 + λ⁻¹) }⁻¹
//! δ  = −γ L + T
//! T  = K2 / ln(K1 / L + 1)
//! ```
//!
//! `L` is at-sensor radiance, `T` brightness temperature and `ψ1..ψ3`
//! quadratic functions of the column water vapour `w`.

use log::warn;
use thiserror::Error;

use crate::indices::{lse, EmissivityConfig, IndexError};
use crate::raster::{RasterError, RasterGrid, DEFAULT_NODATA};
use crate::scene::{BandCalibration, SceneContext, SceneError};

/// First radiation constant, W µm⁴ m⁻² sr⁻¹.
pub const C1: f64 = 1.19104e8;
/// Second radiation constant, µm K.
pub const C2: f64 = 14387.7;

pub const KELVIN_OFFSET: f64 = 273.15;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum LstError {
    #[error("water vapour content {0} g/cm² must be >= 0")]
    NegativeWaterVapour(f64),
    #[error(transparent)]
    Scene(#[from] SceneError),
    #[error(transparent)]
    Index(#[from] IndexError),
    #[error(transparent)]
    Raster(#[from] RasterError),
}

/// Constants of the thermal band.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ThermalCalibration {
    pub gain: f64,
    pub bias: f64,
    pub k1: f64,
    pub k2: f64,
    pub lambda_um: f64,
}

impl ThermalCalibration {
    pub fn from_band(cal: &BandCalibration) -> Result<Self, SceneError> {
        Ok(Self {
            gain: cal.gain,
            bias: cal.bias,
            k1: cal.require_k1()?,
            k2: cal.require_k2()?,
            lambda_um: cal.require_lambda()?,
        })
    }

    pub fn radiance(&self, dn: f64) -> f64 {
        self.gain * dn + self.bias
    }
}

/// `K2 / ln(K1/L + 1)`; `None` for non-positive radiance.
pub fn brightness_temperature(l_sensor: f64, cal: &ThermalCalibration) -> Option<f64> {
    if !(l_sensor > 0.0) || !l_sensor.is_finite() {
        return None;
    }
    Some(cal.k2 / (cal.k1 / l_sensor + 1.0).ln())
}

/// Radiance whose brightness temperature is `t_kelvin`.
pub fn radiance_from_brightness_temperature(t_kelvin: f64, cal: &ThermalCalibration) -> f64 {
    cal.k1 / ((cal.k2 / t_kelvin).exp() - 1.0)
}

/// Atmospheric functions of water vapour.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PsiCoefficients {
    pub psi1: f64,
    pub psi2: f64,
    pub psi3: f64,
}

impl PsiCoefficients {
    pub const fn new(psi1: f64, psi2: f64, psi3: f64) -> Self {
        Self { psi1, psi2, psi3 }
    }
}

/// ψ1..ψ3 for the TM/ETM+ thermal band. The quadratic fits are reliable
/// for roughly 0.5–3 g/cm²; outside that range a warning is logged.
pub fn psi(w: f64) -> Result<PsiCoefficients, LstError> {
    if !(w >= 0.0) {
        return Err(LstError::NegativeWaterVapour(w));
    }
    if !(0.5..=3.0).contains(&w) {
        warn!("water vapour {w} g/cm² is outside the 0.5-3 g/cm² fit range of the ψ functions");
    }
    let w2 = w * w;
    Ok(PsiCoefficients {
        psi1: 0.1471 * w2 - 0.15583 * w + 1.1234,
        psi2: -1.1836 * w2 - 0.37607 * w - 0.52894,
        psi3: -0.04554 * w2 + 1.8719 * w - 0.39071,
    })
}

/// `(γ, δ)`; `None` for non-positive inputs.
pub fn gamma_delta(l_sensor: f64, t_sensor: f64, lambda_um: f64) -> Option<(f64, f64)> {
    if !(l_sensor > 0.0 && t_sensor > 0.0 && lambda_um > 0.0) {
        return None;
    }
    let l4 = lambda_um.powi(4);
    let gamma = 1.0 / ((C2 * l_sensor / (t_sensor * t_sensor)) * (l4 * l_sensor / C1 + 1.0 / lambda_um));
    let delta = -gamma * l_sensor + t_sensor;
    Some((gamma, delta))
}

/// Surface temperature in kelvin for one pixel; `None` when the radiance
/// is non-positive or `ε` lies outside `(0.9, 1.0]`.
pub fn lst_pixel(
    l_sensor: f64,
    emissivity: f64,
    psi: &PsiCoefficients,
    cal: &ThermalCalibration,
) -> Option<f64> {
    if !(emissivity > 0.9 && emissivity <= 1.0) {
        return None;
    }
    let t = brightness_temperature(l_sensor, cal)?;
    let (gamma, delta) = gamma_delta(l_sensor, t, cal.lambda_um)?;
    Some(gamma * ((psi.psi1 * l_sensor + psi.psi2) / emissivity + psi.psi3) + delta)
}

/// Scene scalars for the per-pixel LST kernel; ψ is evaluated once per
/// scene.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LstParams {
    pub thermal: ThermalCalibration,
    pub psi: PsiCoefficients,
    pub emissivity: EmissivityConfig,
}

impl LstParams {
    pub fn from_scene(
        ctx: &SceneContext,
        thermal: &BandCalibration,
        emissivity: &EmissivityConfig,
    ) -> Result<Self, LstError> {
        emissivity.validate()?;
        Ok(Self {
            thermal: ThermalCalibration::from_band(thermal)?,
            psi: psi(ctx.water_vapour()?)?,
            emissivity: *emissivity,
        })
    }

    /// LST in °C from a thermal DN and the pixel's NDVI.
    pub fn lst_celsius(&self, thermal_dn: f64, ndvi: f64) -> Option<f64> {
        let eps = lse(ndvi, &self.emissivity).min(1.0);
        let l = self.thermal.radiance(thermal_dn);
        lst_pixel(l, eps, &self.psi, &self.thermal).map(|k| k - KELVIN_OFFSET)
    }
}

/// LST map in °C. No-data in either input (or an invalid pixel) yields
/// [`DEFAULT_NODATA`].
pub fn lst_map(
    thermal_dn: &RasterGrid,
    ndvi: &RasterGrid,
    ctx: &SceneContext,
    thermal: &BandCalibration,
    cfg: &EmissivityConfig,
) -> Result<RasterGrid, LstError> {
    thermal_dn.same_shape(ndvi)?;
    let params = LstParams::from_scene(ctx, thermal, cfg)?;
    Ok(lst_map_with(thermal_dn, ndvi, &params)?)
}

pub fn lst_map_with(
    thermal_dn: &RasterGrid,
    ndvi: &RasterGrid,
    params: &LstParams,
) -> Result<RasterGrid, RasterError> {
    thermal_dn.same_shape(ndvi)?;
    let samples = thermal_dn
        .samples()
        .iter()
        .zip(ndvi.samples())
        .map(|(&dn, &n)| {
            if thermal_dn.is_nodata(dn) || ndvi.is_nodata(n) {
                DEFAULT_NODATA
            } else {
                params.lst_celsius(dn, n).unwrap_or(DEFAULT_NODATA)
            }
        })
        .collect();
    RasterGrid::new(thermal_dn.width(), thermal_dn.height(), samples, DEFAULT_NODATA)
}
