//! Radiometric calibration and image-based (dark object subtraction)
//! atmospheric correction of reflective bands.
//!
//! The chain for a reflective band is
//!
//! 1. DN → at-sensor radiance, `L = gain·DN + bias`;
//! 2. a global DN histogram gives the dark-object radiance `L_min`;
//! 3. the radiance of a 1 % reflector, `L_1% = 0.01·cosθz·Tz·E0 / (π d²)`
//!    with `Tz = cosθz`, is subtracted to obtain path radiance
//!    `L_p = L_min − L_1%`;
//! 4. at-surface reflectance `ρ = π (L − L_p) d² / (E0 cosθz Tz)`.
//!
//! Step 2 needs the whole image, so tiled execution reduces histograms
//! first and only then runs the per-pixel pass.

use std::f64::consts::PI;

use log::warn;
use thiserror::Error;

use crate::raster::{DnHistogram, RasterGrid};
use crate::scene::{BandCalibration, SceneContext, SceneError};

/// Default share of pixels at or below the dark-object DN (0.01 %).
pub const DEFAULT_DOS_FRACTION: f64 = 0.0001;

/// Reflectance values are clamped into this range after correction.
pub const REFLECTANCE_MIN: f64 = 0.0;
pub const REFLECTANCE_MAX: f64 = 1.2;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum CalibrationError {
    #[error("dark-object search needs a non-empty histogram")]
    EmptyHistogram,
    #[error("dark-object fraction {0} must lie in (0, 1)")]
    InvalidFraction(f64),
    #[error(transparent)]
    Scene(#[from] SceneError),
}

pub fn dn_to_radiance(dn: f64, cal: &BandCalibration) -> f64 {
    cal.gain * dn + cal.bias
}

/// Radiance grid; no-data pixels stay no-data.
pub fn radiance_grid(dn: &RasterGrid, cal: &BandCalibration) -> RasterGrid {
    dn.map_valid(|v| dn_to_radiance(v, cal))
}

/// Smallest DN whose cumulative count reaches `fraction` of all pixels.
///
/// The threshold is a pixel count, `max(1, round(fraction · total))`.
pub fn dark_object_dn(hist: &DnHistogram, fraction: f64) -> Result<u32, CalibrationError> {
    if !(fraction > 0.0 && fraction < 1.0) {
        return Err(CalibrationError::InvalidFraction(fraction));
    }
    if hist.total() == 0 {
        return Err(CalibrationError::EmptyHistogram);
    }
    let threshold = ((fraction * hist.total() as f64).round() as u64).max(1);
    let mut cumulative = 0u64;
    for (dn, &count) in hist.counts().iter().enumerate() {
        cumulative += count;
        if cumulative >= threshold {
            return Ok(dn as u32);
        }
    }
    unreachable!("threshold never exceeds total")
}

/// Dark-object radiance `L_min`.
pub fn dark_object_radiance(
    hist: &DnHistogram,
    cal: &BandCalibration,
    fraction: f64,
) -> Result<f64, CalibrationError> {
    Ok(dn_to_radiance(dark_object_dn(hist, fraction)? as f64, cal))
}

/// Radiance of a 1 % Lambertian reflector, `L_1%`.
pub fn haze_radiance(ctx: &SceneContext, cal: &BandCalibration) -> Result<f64, CalibrationError> {
    let e0 = cal.require_e0()?;
    let cos = ctx.cos_sun_zenith();
    let d = ctx.earth_sun_distance();
    let tz = cos;
    Ok(0.01 * cos * tz * e0 / (PI * d * d))
}

/// `L_min − L_1%`, clamped at zero.
pub fn path_radiance(l_min: f64, l_one_percent: f64) -> f64 {
    let lp = l_min - l_one_percent;
    if lp < 0.0 {
        warn!("negative path radiance {lp:.4} (L_min {l_min:.4} < L_1% {l_one_percent:.4}); using 0");
        0.0
    } else {
        lp
    }
}

/// Dark-object estimate for one band.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AtmosphericCorrection {
    pub dark_dn: u32,
    pub l_min: f64,
    pub l_one_percent: f64,
    /// `l_min − l_one_percent`, unclamped.
    pub l_path: f64,
}

impl AtmosphericCorrection {
    pub fn estimate(
        hist: &DnHistogram,
        ctx: &SceneContext,
        cal: &BandCalibration,
        fraction: f64,
    ) -> Result<Self, CalibrationError> {
        let dark_dn = dark_object_dn(hist, fraction)?;
        let l_min = dn_to_radiance(dark_dn as f64, cal);
        let l_one_percent = haze_radiance(ctx, cal)?;
        Ok(Self {
            dark_dn,
            l_min,
            l_one_percent,
            l_path: l_min - l_one_percent,
        })
    }

    pub fn is_clamped(&self) -> bool {
        self.l_path < 0.0
    }

    /// Path radiance actually subtracted from the image.
    pub fn applied_path_radiance(&self) -> f64 {
        path_radiance(self.l_min, self.l_one_percent)
    }
}

/// At-surface reflectance. With `l_path = 0` this is top-of-atmosphere
/// reflectance (still using `Tz = cosθz`).
pub fn at_surface_reflectance(
    l_sensor: f64,
    l_path: f64,
    ctx: &SceneContext,
    cal: &BandCalibration,
) -> Result<f64, CalibrationError> {
    Ok(ReflectanceParams::new(ctx, cal, l_path)?.reflectance(l_sensor))
}

/// Scene scalars needed to turn DNs of one band into reflectance; the
/// per-pixel kernel shared by direct and tiled execution.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ReflectanceParams {
    pub gain: f64,
    pub bias: f64,
    pub e0: f64,
    pub cos_sun_zenith: f64,
    pub earth_sun_distance: f64,
    pub l_path: f64,
}

impl ReflectanceParams {
    pub fn new(ctx: &SceneContext, cal: &BandCalibration, l_path: f64) -> Result<Self, CalibrationError> {
        Ok(Self {
            gain: cal.gain,
            bias: cal.bias,
            e0: cal.require_e0()?,
            cos_sun_zenith: ctx.cos_sun_zenith(),
            earth_sun_distance: ctx.earth_sun_distance(),
            l_path,
        })
    }

    /// Top-of-atmosphere variant (no path radiance removed).
    pub fn toa(ctx: &SceneContext, cal: &BandCalibration) -> Result<Self, CalibrationError> {
        Self::new(ctx, cal, 0.0)
    }

    pub fn radiance(&self, dn: f64) -> f64 {
        self.gain * dn + self.bias
    }

    /// Unclamped reflectance of an at-sensor radiance.
    pub fn reflectance(&self, l_sensor: f64) -> f64 {
        let d = self.earth_sun_distance;
        let tz = self.cos_sun_zenith;
        PI * (l_sensor - self.l_path) * d * d / (self.e0 * self.cos_sun_zenith * tz)
    }

    /// Reflectance of a DN clamped to `[REFLECTANCE_MIN, REFLECTANCE_MAX]`;
    /// the flag reports whether clamping happened.
    pub fn clamped_reflectance_of_dn(&self, dn: f64) -> (f64, bool) {
        let rho = self.reflectance(self.radiance(dn));
        if rho < REFLECTANCE_MIN {
            (REFLECTANCE_MIN, true)
        } else if rho > REFLECTANCE_MAX {
            (REFLECTANCE_MAX, true)
        } else {
            (rho, false)
        }
    }
}

/// Reflectance grid from DNs plus the number of clamped pixels.
pub fn reflectance_grid(dn: &RasterGrid, params: &ReflectanceParams) -> (RasterGrid, u64) {
    let mut clamped = 0u64;
    let out = dn.map_valid(|v| {
        let (rho, c) = params.clamped_reflectance_of_dn(v);
        clamped += c as u64;
        rho
    });
    (out, clamped)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::raster::DEFAULT_NODATA;
    use crate::scene::Sensor;

    fn tm6() -> BandCalibration {
        BandCalibration::new("6", 0.055158, 1.2378)
    }

    fn ctx(zenith: f64, d: f64) -> SceneContext {
        SceneContext::new(Sensor::Tm, 232, zenith)
            .unwrap()
            .with_earth_sun_distance(d)
            .unwrap()
    }

    fn reflective(e0: f64) -> BandCalibration {
        let mut c = BandCalibration::new("3", 1.0, 0.0);
        c.e0 = Some(e0);
        c
    }

    #[test]
    fn radiance_examples() {
        assert_eq!(dn_to_radiance(0.0, &tm6()), 1.2378);
        // 0.055158*128 + 1.2378 = 8.298024
        assert!((dn_to_radiance(128.0, &tm6()) - 8.298024).abs() < 1e-12);
        let c = BandCalibration::new("6.2", 0.0370588, 3.2);
        assert!((dn_to_radiance(255.0, &c) - 12.649994).abs() < 1e-9);
    }

    #[test]
    fn radiance_grid_passes_nodata() {
        let g = RasterGrid::new(2, 1, vec![DEFAULT_NODATA, 0.0], DEFAULT_NODATA).unwrap();
        assert_eq!(radiance_grid(&g, &tm6()).samples(), &[DEFAULT_NODATA, 1.2378]);
    }

    /// First DN whose cumulative count reaches the rounded threshold.
    fn brute_force_dark_dn(counts: &[u64], fraction: f64) -> u32 {
        let total: u64 = counts.iter().sum();
        let need = ((fraction * total as f64).round() as u64).max(1);
        (0..counts.len())
            .find(|&v| counts[..=v].iter().sum::<u64>() >= need)
            .unwrap() as u32
    }

    #[test]
    fn dark_object_examples() {
        let mut counts = vec![0u64; 256];
        counts[0] = 1_000_000;
        let h = DnHistogram::from_counts(counts);
        assert_eq!(dark_object_dn(&h, DEFAULT_DOS_FRACTION).unwrap(), 0);
        assert_eq!(dark_object_radiance(&h, &tm6(), DEFAULT_DOS_FRACTION).unwrap(), 1.2378);

        let mut counts = vec![0u64; 256];
        counts[5] = 100;
        counts[50] = 1_000_000;
        assert_eq!(brute_force_dark_dn(&counts, 1e-4), 5);
        let h = DnHistogram::from_counts(counts);
        assert_eq!(dark_object_dn(&h, 1e-4).unwrap(), 5);
        assert_eq!(dark_object_dn(&h, 1e-3).unwrap(), 50);
    }

    #[test]
    fn dark_object_errors() {
        let h = DnHistogram::empty(255);
        assert_eq!(dark_object_dn(&h, 1e-4), Err(CalibrationError::EmptyHistogram));
        let h = DnHistogram::from_counts(vec![1, 2]);
        assert_eq!(dark_object_dn(&h, 0.0), Err(CalibrationError::InvalidFraction(0.0)));
        assert!(dark_object_dn(&h, 1.0).is_err());
    }

    #[test]
    fn dark_object_matches_brute_force_and_is_monotone() {
        use rand::{Rng, SeedableRng};
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(3);
        for _ in 0..200 {
            let counts: Vec<u64> = (0..256)
                .map(|_| if rng.random_bool(0.3) { rng.random_range(0..500) } else { 0 })
                .collect();
            if counts.iter().sum::<u64>() == 0 {
                continue;
            }
            let h = DnHistogram::from_counts(counts.clone());
            let mut prev = 0;
            for f in [1e-5, 1e-4, 1e-3, 0.01, 0.1, 0.5, 0.9] {
                let v = dark_object_dn(&h, f).unwrap();
                assert_eq!(v, brute_force_dark_dn(&counts, f));
                assert!(v >= prev);
                prev = v;
            }
        }
    }

    #[test]
    fn haze_examples() {
        let c = reflective(PI / 0.01);
        assert!((haze_radiance(&ctx(0.0, 1.0), &c).unwrap() - 1.0).abs() < 1e-15);
        // 0.01*cos²(40°)*1554/(π*1.0106²) = 2.84217...
        let l1 = haze_radiance(&ctx(40.0, 1.0106), &reflective(1554.0)).unwrap();
        assert!((l1 - 2.842_172_9).abs() < 1e-6, "{l1}");
        let mut prev = f64::INFINITY;
        for z in 0..90 {
            let l = haze_radiance(&ctx(z as f64, 1.0), &reflective(1554.0)).unwrap();
            assert!(l < prev);
            prev = l;
        }
        let missing = haze_radiance(&ctx(10.0, 1.0), &tm6()).unwrap_err();
        assert!(missing.to_string().contains("e0"));
    }

    #[test]
    fn path_radiance_examples() {
        assert_eq!(path_radiance(2.5, 2.5), 0.0);
        assert!((path_radiance(4.0, 2.842) - 1.158).abs() < 1e-12);
        assert_eq!(path_radiance(1.0, 2.0), 0.0);
    }

    #[test]
    fn correction_keeps_raw_difference() {
        let mut counts = vec![0u64; 256];
        counts[1] = 10;
        let h = DnHistogram::from_counts(counts);
        let c = reflective(1554.0);
        let a = AtmosphericCorrection::estimate(&h, &ctx(40.0, 1.0106), &c, 1e-4).unwrap();
        assert_eq!(a.l_path, a.l_min - a.l_one_percent);
        assert!(a.is_clamped());
        assert_eq!(a.applied_path_radiance(), 0.0);
    }

    #[test]
    fn reflectance_examples() {
        let c = reflective(1554.0);
        let s = ctx(40.0, 1.0106);
        assert_eq!(at_surface_reflectance(2.5, 2.5, &s, &c).unwrap(), 0.0);
        // π*57.5*1.0106²/(1554*cos²40°) = 0.2023100035
        let rho = at_surface_reflectance(60.0, 2.5, &s, &c).unwrap();
        assert!((rho - 0.202_310_003_5).abs() < 1e-9, "{rho}");
        let rho2 = at_surface_reflectance(117.5, 2.5, &s, &c).unwrap();
        assert!((rho2 - 2.0 * rho).abs() < 1e-14);
    }

    #[test]
    fn reflectance_slope() {
        let c = reflective(1031.0);
        let s = ctx(33.0, 0.99);
        let a = at_surface_reflectance(10.0, 1.0, &s, &c).unwrap();
        let b = at_surface_reflectance(30.0, 1.0, &s, &c).unwrap();
        let slope = (b - a) / 20.0;
        let cos = 33f64.to_radians().cos();
        let expect = PI * 0.99 * 0.99 / (1031.0 * cos * cos);
        assert!(((slope - expect) / expect).abs() < 1e-12);
    }

    #[test]
    fn reflectance_grid_clamps_and_counts() {
        let mut c = reflective(200.0);
        c.gain = 1.0;
        c.bias = -5.0;
        let p = ReflectanceParams::new(&ctx(0.0, 1.0), &c, 0.0).unwrap();
        let g = RasterGrid::new(4, 1, vec![0.0, 10.0, 255.0, DEFAULT_NODATA], DEFAULT_NODATA).unwrap();
        let (r, clamped) = reflectance_grid(&g, &p);
        assert_eq!(clamped, 2);
        assert_eq!(r.samples()[0], 0.0);
        assert!((r.samples()[1] - PI * 5.0 / 200.0).abs() < 1e-15);
        assert_eq!(r.samples()[2], REFLECTANCE_MAX);
        assert_eq!(r.samples()[3], DEFAULT_NODATA);
    }
}
