//! Land surface temperature, NDVI, emissivity and land-cover
//! classification for Landsat TM/ETM+ scenes, executed through a tiled
//! split-and-aggregate engine with optional remote workers.
//!
//! Module map:
//!
//! - [`raster`]: grid container, statistics, DN histograms, label grids
//! - [`scene`] and [`io`]: acquisition metadata, calibration tables and
//!   file formats (ESRI ASCII grid, baseline TIFF, LST text)
//! - [`calibration`]: DN → radiance → reflectance with dark-object
//!   subtraction
//! - [`indices`]: NDVI and NDVI-thresholds emissivity
//! - [`lst`]: single-channel LST retrieval
//! - [`classifier`]: parallelepiped classification and confusion matrices
//! - [`engine`]: tiling, local/remote workers, wire protocol
//! - [`validation`]: comparison of retrieved LST against station readings

pub mod calibration;
pub mod classifier;
pub mod engine;
pub mod indices;
pub mod io;
pub mod lst;
pub mod raster;
pub mod scene;
pub mod validation;

pub use raster::{ClassifiedGrid, DnHistogram, GridStats, RasterGrid, DEFAULT_NODATA};
pub use scene::{BandCalibration, SceneContext, Sensor};
