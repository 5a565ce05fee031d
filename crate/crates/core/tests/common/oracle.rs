//! Straight-line, per-pixel evaluator written without the library: DN →
//! radiance → reflectance → NDVI → emissivity → brightness temperature →
//! γ, δ → LST. Kept deliberately naive; it is the reference the engine
//! must agree with.

use std::f64::consts::PI;

#[derive(Debug, Clone, Copy)]
pub struct SolarBand {
    pub gain: f64,
    pub bias: f64,
    pub e0: f64,
    pub path_radiance: f64,
}

#[derive(Debug, Clone, Copy)]
pub struct ThermalBand {
    pub gain: f64,
    pub bias: f64,
    pub k1: f64,
    pub k2: f64,
    pub lambda_um: f64,
}

#[derive(Debug, Clone, Copy)]
pub struct OracleScene {
    pub sun_zenith_deg: f64,
    pub doy: f64,
    pub w: f64,
    pub red: SolarBand,
    pub nir: SolarBand,
    pub thermal: ThermalBand,
}

pub fn earth_sun_distance(doy: f64) -> f64 {
    let angle_deg = 0.9856 * (doy - 4.0);
    1.0 - 0.01672 * (angle_deg * PI / 180.0).cos()
}

/// Reflectance clamped to [0, 1.2].
pub fn reflectance(dn: f64, band: &SolarBand, s: &OracleScene) -> f64 {
    let radiance = band.gain * dn + band.bias;
    let d = earth_sun_distance(s.doy);
    let cos_z = (s.sun_zenith_deg * PI / 180.0).cos();
    let transmittance = cos_z;
    let rho = PI * (radiance - band.path_radiance) * d * d / (band.e0 * cos_z * transmittance);
    rho.max(0.0).min(1.2)
}

pub fn emissivity(ndvi: f64) -> f64 {
    let e = if ndvi < 0.0 {
        0.995
    } else if ndvi < 0.157 {
        0.97
    } else if ndvi <= 0.727 {
        1.0094 + 0.047 * ndvi.ln()
    } else {
        0.99
    };
    e.min(1.0)
}

/// LST in kelvin, `None` where NDVI is undefined or radiance non-positive.
pub fn lst_kelvin(red_dn: f64, nir_dn: f64, thermal_dn: f64, s: &OracleScene) -> Option<f64> {
    let r = reflectance(red_dn, &s.red, s);
    let n = reflectance(nir_dn, &s.nir, s);
    if r + n == 0.0 {
        return None;
    }
    let ndvi = (n - r) / (n + r);
    let eps = emissivity(ndvi);

    let th = &s.thermal;
    let l = th.gain * thermal_dn + th.bias;
    if l <= 0.0 {
        return None;
    }
    let t = th.k2 / (th.k1 / l + 1.0).ln();

    let c1 = 1.19104e8;
    let c2 = 14387.7;
    let lam = th.lambda_um;
    let gamma = 1.0 / ((c2 * l / (t * t)) * (lam * lam * lam * lam * l / c1 + 1.0 / lam));
    let delta = -gamma * l + t;

    let w = s.w;
    let psi1 = 0.1471 * w * w - 0.15583 * w + 1.1234;
    let psi2 = -1.1836 * w * w - 0.37607 * w - 0.52894;
    let psi3 = -0.04554 * w * w + 1.8719 * w - 0.39071;

    Some(gamma * ((psi1 * l + psi2) / eps + psi3) + delta)
}
