//! Per-scene acquisition facts and per-band radiometric constants.

use std::fmt;
use std::str::FromStr;

use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum SceneError {
    #[error("unknown sensor '{0}' (expected TM or ETM+)")]
    UnknownSensor(String),
    #[error("{key} = {value} is out of range: {reason}")]
    OutOfRange {
        key: &'static str,
        value: f64,
        reason: &'static str,
    },
    #[error("missing required key '{0}'")]
    MissingKey(&'static str),
    #[error("band {band}: missing {what}")]
    MissingBandConstant { band: String, what: &'static str },
    #[error("no calibration for band '{0}'")]
    UnknownBand(String),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Sensor {
    Tm,
    EtmPlus,
}

impl Sensor {
    /// Thermal band used for LST retrieval.
    pub fn thermal_band(self) -> &'static str {
        match self {
            Sensor::Tm => "6",
            Sensor::EtmPlus => "6.1",
        }
    }

    /// Bands used for supervised classification by default.
    pub fn classification_bands(self) -> [&'static str; 3] {
        match self {
            Sensor::Tm => ["4", "5", "1"],
            Sensor::EtmPlus => ["7", "4", "2"],
        }
    }

    /// Canonical id for a band label; accepts `61`/`6` for ETM+ 6.1.
    pub fn canonical_band_id(self, id: &str) -> String {
        let id = id.trim();
        match (self, id) {
            (Sensor::EtmPlus, "6") | (Sensor::EtmPlus, "61") => "6.1".to_string(),
            (Sensor::EtmPlus, "62") => "6.2".to_string(),
            _ => id.to_string(),
        }
    }

    pub fn default_calibration(self, band_id: &str) -> Option<BandCalibration> {
        let id = self.canonical_band_id(band_id);
        let table: &[DefaultBand] = match self {
            Sensor::Tm => TM_BANDS,
            Sensor::EtmPlus => ETM_PLUS_BANDS,
        };
        table.iter().find(|b| b.id == id).map(DefaultBand::to_calibration)
    }

    pub fn default_calibrations(self) -> Vec<BandCalibration> {
        let table: &[DefaultBand] = match self {
            Sensor::Tm => TM_BANDS,
            Sensor::EtmPlus => ETM_PLUS_BANDS,
        };
        table.iter().map(DefaultBand::to_calibration).collect()
    }
}

impl FromStr for Sensor {
    type Err = SceneError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.trim().to_ascii_uppercase().as_str() {
            "TM" | "LANDSAT5" | "L5" => Ok(Sensor::Tm),
            "ETM+" | "ETM" | "ETMPLUS" | "LANDSAT7" | "L7" => Ok(Sensor::EtmPlus),
            _ => Err(SceneError::UnknownSensor(s.to_string())),
        }
    }
}

impl fmt::Display for Sensor {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Sensor::Tm => "TM",
            Sensor::EtmPlus => "ETM+",
        })
    }
}

/// Earth–Sun distance in AU from the day of year.
pub fn earth_sun_distance(doy: u16) -> f64 {
    1.0 - 0.01672 * (0.9856 * (doy as f64 - 4.0)).to_radians().cos()
}

#[derive(Debug, Clone, PartialEq)]
pub struct SceneContext {
    pub sensor: Sensor,
    /// Day of year, 1..=366.
    pub acquisition_doy: u16,
    /// Solar zenith angle in degrees, `0 <= θz < 90`.
    pub sun_zenith_deg: f64,
    pub earth_sun_distance_au: Option<f64>,
    /// Total column water vapour (g/cm²).
    pub water_vapour_g_cm2: Option<f64>,
}

impl SceneContext {
    pub fn new(sensor: Sensor, acquisition_doy: u16, sun_zenith_deg: f64) -> Result<Self, SceneError> {
        let ctx = Self {
            sensor,
            acquisition_doy,
            sun_zenith_deg,
            earth_sun_distance_au: None,
            water_vapour_g_cm2: None,
        };
        ctx.validate()?;
        Ok(ctx)
    }

    pub fn with_water_vapour(mut self, w: f64) -> Result<Self, SceneError> {
        self.water_vapour_g_cm2 = Some(w);
        self.validate()?;
        Ok(self)
    }

    pub fn with_earth_sun_distance(mut self, d: f64) -> Result<Self, SceneError> {
        self.earth_sun_distance_au = Some(d);
        self.validate()?;
        Ok(self)
    }

    pub fn validate(&self) -> Result<(), SceneError> {
        if !(1..=366).contains(&self.acquisition_doy) {
            return Err(SceneError::OutOfRange {
                key: "doy",
                value: self.acquisition_doy as f64,
                reason: "day of year must be in 1..=366",
            });
        }
        if !(0.0..90.0).contains(&self.sun_zenith_deg) {
            return Err(SceneError::OutOfRange {
                key: "sun_zenith_deg",
                value: self.sun_zenith_deg,
                reason: "solar zenith must satisfy 0 <= θz < 90",
            });
        }
        if let Some(d) = self.earth_sun_distance_au {
            if !(0.9..=1.1).contains(&d) {
                return Err(SceneError::OutOfRange {
                    key: "earth_sun_distance_au",
                    value: d,
                    reason: "Earth-Sun distance must lie in [0.9, 1.1] AU",
                });
            }
        }
        if let Some(w) = self.water_vapour_g_cm2 {
            if !(w >= 0.0) {
                return Err(SceneError::OutOfRange {
                    key: "water_vapour_g_cm2",
                    value: w,
                    reason: "water vapour content must be >= 0",
                });
            }
        }
        Ok(())
    }

    /// Given distance, or the day-of-year approximation when absent.
    pub fn earth_sun_distance(&self) -> f64 {
        self.earth_sun_distance_au
            .unwrap_or_else(|| earth_sun_distance(self.acquisition_doy))
    }

    pub fn cos_sun_zenith(&self) -> f64 {
        self.sun_zenith_deg.to_radians().cos()
    }

    pub fn water_vapour(&self) -> Result<f64, SceneError> {
        self.water_vapour_g_cm2
            .ok_or(SceneError::MissingKey("water_vapour_g_cm2"))
    }
}

/// Radiometric constants of one band.
#[derive(Debug, Clone, PartialEq)]
pub struct BandCalibration {
    pub band_id: String,
    /// Radiance per DN (W m⁻² sr⁻¹ µm⁻¹).
    pub gain: f64,
    /// Radiance offset (W m⁻² sr⁻¹ µm⁻¹).
    pub bias: f64,
    pub k1: Option<f64>,
    /// Kelvin.
    pub k2: Option<f64>,
    /// Exo-atmospheric solar irradiance (W m⁻² µm⁻¹).
    pub e0: Option<f64>,
    /// Effective wavelength (µm).
    pub lambda_um: Option<f64>,
}

impl BandCalibration {
    pub fn new(band_id: impl Into<String>, gain: f64, bias: f64) -> Self {
        Self {
            band_id: band_id.into(),
            gain,
            bias,
            k1: None,
            k2: None,
            e0: None,
            lambda_um: None,
        }
    }

    pub fn validate(&self) -> Result<(), SceneError> {
        if !(self.gain > 0.0) {
            return Err(SceneError::OutOfRange {
                key: "gain",
                value: self.gain,
                reason: "gain must be > 0",
            });
        }
        if !self.bias.is_finite() {
            return Err(SceneError::OutOfRange {
                key: "bias",
                value: self.bias,
                reason: "bias must be finite",
            });
        }
        for (key, value) in [
            ("k1", self.k1),
            ("k2", self.k2),
            ("e0", self.e0),
            ("lambda_um", self.lambda_um),
        ] {
            if let Some(v) = value {
                if !(v > 0.0) {
                    return Err(SceneError::OutOfRange {
                        key,
                        value: v,
                        reason: "constant must be > 0",
                    });
                }
            }
        }
        Ok(())
    }

    pub fn require_e0(&self) -> Result<f64, SceneError> {
        self.e0.ok_or_else(|| SceneError::MissingBandConstant {
            band: self.band_id.clone(),
            what: "e0",
        })
    }

    pub fn require_k1(&self) -> Result<f64, SceneError> {
        self.k1.ok_or_else(|| SceneError::MissingBandConstant {
            band: self.band_id.clone(),
            what: "k1",
        })
    }

    pub fn require_k2(&self) -> Result<f64, SceneError> {
        self.k2.ok_or_else(|| SceneError::MissingBandConstant {
            band: self.band_id.clone(),
            what: "k2",
        })
    }

    pub fn require_lambda(&self) -> Result<f64, SceneError> {
        self.lambda_um.ok_or_else(|| SceneError::MissingBandConstant {
            band: self.band_id.clone(),
            what: "lambda_um",
        })
    }
}

struct DefaultBand {
    id: &'static str,
    gain: f64,
    bias: f64,
    e0: Option<f64>,
    k1: Option<f64>,
    k2: Option<f64>,
    lambda_um: Option<f64>,
}

impl DefaultBand {
    const fn reflective(id: &'static str, gain: f64, bias: f64, e0: f64) -> Self {
        Self {
            id,
            gain,
            bias,
            e0: Some(e0),
            k1: None,
            k2: None,
            lambda_um: None,
        }
    }

    const fn thermal(id: &'static str, gain: f64, bias: f64, k1: f64, k2: f64, lambda_um: f64) -> Self {
        Self {
            id,
            gain,
            bias,
            e0: None,
            k1: Some(k1),
            k2: Some(k2),
            lambda_um: Some(lambda_um),
        }
    }

    fn to_calibration(&self) -> BandCalibration {
        BandCalibration {
            band_id: self.id.to_string(),
            gain: self.gain,
            bias: self.bias,
            k1: self.k1,
            k2: self.k2,
            e0: self.e0,
            lambda_um: self.lambda_um,
        }
    }
}

// Landsat 5 TM rescaling gains/biases and solar irradiances from the
// Chander, Markham & Helder (2009) calibration summary; band 6 rescaling
// uses LMIN 1.238 / LMAX 15.303 over 0..255.
const TM_BANDS: &[DefaultBand] = &[
    DefaultBand::reflective("1", 0.762824, -1.52, 1983.0),
    DefaultBand::reflective("2", 1.442510, -2.84, 1796.0),
    DefaultBand::reflective("3", 1.039880, -1.17, 1536.0),
    DefaultBand::reflective("4", 0.872588, -1.51, 1031.0),
    DefaultBand::reflective("5", 0.119882, -0.37, 220.0),
    DefaultBand::thermal("6", 0.055158, 1.2378, 607.76, 1260.56, 11.457),
    DefaultBand::reflective("7", 0.065551, -0.15, 83.44),
];

// Landsat 7 ETM+ low-gain rescaling from the same summary. 6.1 is the
// low-gain thermal channel, 6.2 the high-gain one.
const ETM_PLUS_BANDS: &[DefaultBand] = &[
    DefaultBand::reflective("1", 1.180709, -7.38, 1997.0),
    DefaultBand::reflective("2", 1.209843, -7.61, 1812.0),
    DefaultBand::reflective("3", 0.942520, -5.94, 1533.0),
    DefaultBand::reflective("4", 0.969291, -6.07, 1039.0),
    DefaultBand::reflective("5", 0.191220, -1.19, 230.8),
    DefaultBand::thermal("6.1", 0.067087, -0.07, 666.09, 1282.71, 11.269),
    DefaultBand::thermal("6.2", 0.037205, 3.16, 666.09, 1282.71, 11.269),
    DefaultBand::reflective("7", 0.066496, -0.42, 84.90),
];

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn earth_sun_distance_doy_232() {
        // independent evaluation: 1 - 0.01672*cos(radians(0.9856*228)) = 1.0118811...
        assert!((earth_sun_distance(232) - 1.011_881_118).abs() < 1e-8);
        // perihelion / aphelion bounds
        assert!((earth_sun_distance(4) - (1.0 - 0.01672)).abs() < 1e-12);
        for doy in 1..=366 {
            let d = earth_sun_distance(doy);
            assert!((0.98..=1.02).contains(&d));
        }
    }

    #[test]
    fn context_validation() {
        let ctx = SceneContext::new(Sensor::Tm, 232, 40.0).unwrap();
        assert!(ctx.with_water_vapour(2.0).is_ok());
        assert!(SceneContext::new(Sensor::Tm, 232, 90.0).is_err());
        assert!(SceneContext::new(Sensor::Tm, 0, 40.0).is_err());
        let ctx = SceneContext::new(Sensor::Tm, 232, 40.0).unwrap();
        assert!(ctx.clone().with_earth_sun_distance(1.2).is_err());
        assert!(ctx.clone().with_water_vapour(-0.1).is_err());
        assert_eq!(ctx.water_vapour(), Err(SceneError::MissingKey("water_vapour_g_cm2")));
    }

    #[test]
    fn default_tables() {
        // transcribed calibration constants
        let tm6 = Sensor::Tm.default_calibration("6").unwrap();
        assert_eq!(tm6.gain, 0.055158);
        assert_eq!(tm6.bias, 1.2378);
        assert_eq!(tm6.k1, Some(607.76));
        assert_eq!(tm6.k2, Some(1260.56));
        assert_eq!(tm6.lambda_um, Some(11.457));
        let etm6 = Sensor::EtmPlus.default_calibration("61").unwrap();
        assert_eq!(etm6.band_id, "6.1");
        assert_eq!(etm6.k1, Some(666.09));
        assert_eq!(etm6.k2, Some(1282.71));
        assert_eq!(etm6.lambda_um, Some(11.269));
        for sensor in [Sensor::Tm, Sensor::EtmPlus] {
            for cal in sensor.default_calibrations() {
                cal.validate().unwrap();
            }
            assert!(sensor.default_calibration(sensor.thermal_band()).unwrap().k1.is_some());
            for b in sensor.classification_bands() {
                assert!(sensor.default_calibration(b).is_some());
            }
        }
    }

    #[test]
    fn sensor_parse() {
        assert_eq!("tm".parse::<Sensor>().unwrap(), Sensor::Tm);
        assert_eq!("ETM+".parse::<Sensor>().unwrap(), Sensor::EtmPlus);
        assert!("MSS".parse::<Sensor>().is_err());
    }
}
