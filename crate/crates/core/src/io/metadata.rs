//! Scene metadata files.
//!
//! ```text
//! # Landsat 5 TM, 20 Aug 1989
//! sensor = TM
//! sun_zenith_deg = 40
//! doy = 232
//! water_vapour_g_cm2 = 2.0
//! # earth_sun_distance_au = 1.0119   (derived from doy when absent)
//!
//! [band 6]
//! gain = 0.055158
//! bias = 1.2378
//! ```
//!
//! Every band of the sensor starts from the built-in calibration table;
//! `[band <id>]` sections override individual constants or add bands.

use std::path::Path;

use log::warn;

use super::kv::{self, KvSection};
use super::FormatError;
use crate::scene::{BandCalibration, SceneContext, SceneError, Sensor};

/// What a caller intends to compute; decides which keys are mandatory.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Product {
    Calibrate,
    Ndvi,
    Emissivity,
    Lst,
    Classify,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SceneMetadata {
    pub context: SceneContext,
    pub bands: Vec<BandCalibration>,
    /// Optional label used to name output products.
    pub tag: Option<String>,
}

impl SceneMetadata {
    pub fn band(&self, id: &str) -> Result<&BandCalibration, SceneError> {
        let id = self.context.sensor.canonical_band_id(id);
        self.bands
            .iter()
            .find(|b| b.band_id == id)
            .ok_or(SceneError::UnknownBand(id))
    }

    pub fn require(&self, product: Product) -> Result<(), SceneError> {
        if product == Product::Lst {
            self.context.water_vapour()?;
            let thermal = self.band(self.context.sensor.thermal_band())?;
            thermal.require_k1()?;
            thermal.require_k2()?;
            thermal.require_lambda()?;
        }
        if matches!(product, Product::Lst | Product::Ndvi | Product::Emissivity) {
            for b in ["3", "4"] {
                self.band(b)?.require_e0()?;
            }
        }
        Ok(())
    }
}

const ROOT_KEYS: &[&str] = &[
    "sensor",
    "sun_zenith_deg",
    "doy",
    "acquisition_doy",
    "earth_sun_distance_au",
    "d",
    "water_vapour_g_cm2",
    "w",
    "tag",
];

pub fn read_scene_metadata(path: impl AsRef<Path>) -> Result<SceneMetadata, FormatError> {
    let path = path.as_ref();
    let text = std::fs::read_to_string(path).map_err(|e| FormatError::io(path, e))?;
    parse_scene_metadata(&text)
}

pub fn parse_scene_metadata(text: &str) -> Result<SceneMetadata, FormatError> {
    let sections = kv::parse(text)?;
    let root = &sections[0];
    for e in &root.entries {
        if !ROOT_KEYS.contains(&e.key.as_str()) {
            warn!("metadata line {}: ignoring unknown key '{}'", e.line, e.key);
        }
    }

    let sensor_entry = root
        .get("sensor")
        .ok_or_else(|| FormatError::MissingKey("sensor".into()))?;
    let sensor: Sensor = sensor_entry.value.parse()?;
    let zenith = root
        .number("sun_zenith_deg")?
        .ok_or_else(|| FormatError::MissingKey("sun_zenith_deg".into()))?;
    let doy = first_number(root, &["doy", "acquisition_doy"])?
        .ok_or_else(|| FormatError::MissingKey("doy".into()))?;
    if doy.fract() != 0.0 || !(1.0..=366.0).contains(&doy) {
        return Err(SceneError::OutOfRange {
            key: "doy",
            value: doy,
            reason: "day of year must be an integer in 1..=366",
        }
        .into());
    }

    let mut context = SceneContext::new(sensor, doy as u16, zenith)?;
    if let Some(d) = first_number(root, &["earth_sun_distance_au", "d"])? {
        context = context.with_earth_sun_distance(d)?;
    }
    if let Some(w) = first_number(root, &["water_vapour_g_cm2", "w"])? {
        context = context.with_water_vapour(w)?;
    }

    let mut bands = sensor.default_calibrations();
    for section in &sections[1..] {
        if section.kind != "band" {
            return Err(FormatError::Syntax {
                line: section.line,
                message: format!("unexpected section [{}]", section.kind),
            });
        }
        apply_band_section(sensor, section, &mut bands)?;
    }

    Ok(SceneMetadata {
        context,
        bands,
        tag: root.get("tag").map(|e| e.value.clone()),
    })
}

fn first_number(section: &KvSection, keys: &[&str]) -> Result<Option<f64>, FormatError> {
    for key in keys {
        if let Some(v) = section.number(key)? {
            return Ok(Some(v));
        }
    }
    Ok(None)
}

fn apply_band_section(
    sensor: Sensor,
    section: &KvSection,
    bands: &mut Vec<BandCalibration>,
) -> Result<(), FormatError> {
    if section.name.is_empty() {
        return Err(FormatError::Syntax {
            line: section.line,
            message: "band section needs an id, e.g. [band 6]".into(),
        });
    }
    let id = sensor.canonical_band_id(&section.name);
    for e in &section.entries {
        if !["gain", "bias", "k1", "k2", "e0", "lambda_um"].contains(&e.key.as_str()) {
            return Err(FormatError::Syntax {
                line: e.line,
                message: format!("unknown band key '{}'", e.key),
            });
        }
    }
    let idx = match bands.iter().position(|b| b.band_id == id) {
        Some(i) => i,
        None => {
            let gain = section
                .number("gain")?
                .ok_or_else(|| FormatError::MissingKey(format!("band {id}: gain")))?;
            let bias = section
                .number("bias")?
                .ok_or_else(|| FormatError::MissingKey(format!("band {id}: bias")))?;
            bands.push(BandCalibration::new(id.clone(), gain, bias));
            bands.len() - 1
        }
    };
    let band = &mut bands[idx];
    if let Some(v) = section.number("gain")? {
        band.gain = v;
    }
    if let Some(v) = section.number("bias")? {
        band.bias = v;
    }
    if let Some(v) = section.number("k1")? {
        band.k1 = Some(v);
    }
    if let Some(v) = section.number("k2")? {
        band.k2 = Some(v);
    }
    if let Some(v) = section.number("e0")? {
        band.e0 = Some(v);
    }
    if let Some(v) = section.number("lambda_um")? {
        band.lambda_um = Some(v);
    }
    band.validate()?;
    Ok(())
}
