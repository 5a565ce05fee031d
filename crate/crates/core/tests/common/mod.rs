//! Synthetic scenes shared by the integration tests.
#![allow(dead_code)]

pub mod oracle;

use lstgrid::calibration::ReflectanceParams;
use lstgrid::classifier::TrainingRegion;
use lstgrid::indices::EmissivityConfig;
use lstgrid::lst::LstParams;
use lstgrid::{ClassifiedGrid, RasterGrid, SceneContext, Sensor, DEFAULT_NODATA};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

/// TM scene of 20 August (DOY 232), sun 40° from zenith.
pub fn tm_context(w: f64) -> SceneContext {
    SceneContext::new(Sensor::Tm, 232, 40.0).unwrap().with_water_vapour(w).unwrap()
}

pub fn reflectance_params(ctx: &SceneContext, band: &str, l_path: f64) -> ReflectanceParams {
    let cal = ctx.sensor.default_calibration(band).unwrap();
    ReflectanceParams::new(ctx, &cal, l_path).unwrap()
}

pub fn lst_params(ctx: &SceneContext) -> LstParams {
    let cal = ctx.sensor.default_calibration(ctx.sensor.thermal_band()).unwrap();
    LstParams::from_scene(ctx, &cal, &EmissivityConfig::default()).unwrap()
}

/// Red, NIR and thermal DN bands of a mixed landscape (water, bare soil,
/// vegetation, built-up) in 16-pixel patches, with sparse no-data.
pub struct DnScene {
    pub red: RasterGrid,
    pub nir: RasterGrid,
    pub thermal: RasterGrid,
}

pub fn dn_scene(width: usize, height: usize, seed: u64) -> DnScene {
    // (red, nir, thermal) DN ranges per cover type
    const COVER: [[(u32, u32); 3]; 4] = [
        [(18, 30), (8, 18), (118, 128)],   // water
        [(50, 72), (58, 82), (142, 160)],  // soil
        [(18, 36), (88, 135), (126, 140)], // vegetation
        [(60, 92), (52, 76), (148, 166)],  // built-up
    ];
    let mut r = rng(seed);
    let patch_cover: Vec<usize> = (0..(height / 16 + 1) * (width / 16 + 1)).map(|_| r.random_range(0..4)).collect();
    let per_row = width / 16 + 1;
    let mut red = Vec::with_capacity(width * height);
    let mut nir = Vec::with_capacity(width * height);
    let mut th = Vec::with_capacity(width * height);
    for row in 0..height {
        for col in 0..width {
            let cover = COVER[patch_cover[(row / 16) * per_row + col / 16]];
            let mut draw = |(lo, hi): (u32, u32)| {
                if r.random_bool(0.001) {
                    DEFAULT_NODATA
                } else {
                    r.random_range(lo..=hi) as f64
                }
            };
            red.push(draw(cover[0]));
            nir.push(draw(cover[1]));
            th.push(draw(cover[2]));
        }
    }
    let grid = |s| RasterGrid::new(width, height, s, DEFAULT_NODATA).unwrap();
    DnScene {
        red: grid(red),
        nir: grid(nir),
        thermal: grid(th),
    }
}

/// Uniform random DN grid with about 1 % no-data.
pub fn random_dn(width: usize, height: usize, seed: u64) -> RasterGrid {
    let mut r = rng(seed);
    RasterGrid::from_fn(width, height, DEFAULT_NODATA, |_, _| {
        if r.random_bool(0.01) {
            DEFAULT_NODATA
        } else {
            r.random_range(0..=255u32) as f64
        }
    })
    .unwrap()
}

pub struct ClassScene {
    pub bands: Vec<RasterGrid>,
    pub truth: ClassifiedGrid,
    pub regions: Vec<TrainingRegion>,
}

pub const SEVEN_CLASSES: [&str; 7] = ["water", "forest", "cropland", "grassland", "bare soil", "urban", "wetland"];

/// Seven land-cover strips, 3 bands, class means 28 DN apart (σ = 3),
/// one 20×20 training box per strip.
pub fn seven_class_scene(seed: u64) -> ClassScene {
    let (strip, height) = (30usize, 120usize);
    let width = strip * 7;
    let noise = Normal::new(0.0, 3.0).unwrap();
    let mut r = rng(seed);
    let mean = |class: usize, band: usize| -> f64 {
        match band {
            0 => 30.0 + 28.0 * class as f64,
            1 => 220.0 - 28.0 * class as f64,
            _ => 30.0 + 28.0 * ((3 * class) % 7) as f64,
        }
    };
    let bands = (0..3)
        .map(|b| {
            RasterGrid::from_fn(width, height, DEFAULT_NODATA, |_, col| {
                let v = mean(col / strip, b) + noise.sample(&mut r);
                v.round().clamp(0.0, 255.0)
            })
            .unwrap()
        })
        .collect();
    let labels = (0..width * height).map(|i| ((i % width) / strip + 1) as u16).collect();
    let legend = SEVEN_CLASSES.iter().map(|s| s.to_string()).collect();
    let truth = ClassifiedGrid::new(width, height, labels, legend).unwrap();
    let regions = (0..7)
        .map(|c| TrainingRegion::new(SEVEN_CLASSES[c], 10, c * strip + 5, 29, c * strip + 24))
        .collect();
    ClassScene { bands, truth, regions }
}

pub fn bits(grid: &RasterGrid) -> Vec<u64> {
    grid.samples().iter().map(|v| v.to_bits()).collect()
}
