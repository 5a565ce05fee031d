use std::io::Write as _;
use std::path::{Path, PathBuf};

use log::{info, warn};

use lstgrid::calibration::{AtmosphericCorrection, ReflectanceParams};
use lstgrid::classifier::{self, TrainingMode};
use lstgrid::engine::{
    self, reduce_histogram, run_task, CalibrateKind, Endpoint, Operation, RunOptions, Task, TaskOutput,
    WorkerDescriptor, WorkerOptions,
};
use lstgrid::indices::EmissivityConfig;
use lstgrid::io::{self, Product, SampleType, SceneMetadata};
use lstgrid::lst::LstParams;
use lstgrid::raster::{ClassifiedGrid, RasterError, RasterGrid, MAX_DN_8BIT, UNCLASSIFIED};
use lstgrid::validation::{ClockTime, Comparison, StationReading};

use crate::error::CliError;
use crate::manifest::Outputs;
use crate::{DosArgs, EmissivityArgs, ExecArgs, SceneArgs};

struct Scene {
    meta: SceneMetadata,
    /// Canonical band id → grid, in command-line order.
    bands: Vec<(String, RasterGrid)>,
    tag: String,
}

impl Scene {
    fn load(args: &SceneArgs) -> Result<Self, CliError> {
        let meta = io::read_scene_metadata(&args.metadata)?;
        let sensor = meta.context.sensor;
        let mut bands: Vec<(String, RasterGrid)> = Vec::new();
        for spec in &args.bands {
            let (id, path) = spec
                .split_once('=')
                .filter(|(id, p)| !id.trim().is_empty() && !p.is_empty())
                .ok_or_else(|| CliError::Usage(format!("--band '{spec}': expected ID=PATH")))?;
            let id = sensor.canonical_band_id(id.trim());
            if bands.iter().any(|(b, _)| *b == id) {
                return Err(CliError::Usage(format!("--band {id} given twice")));
            }
            let grid = io::read_raster(path).map_err(|e| CliError::Input(format!("band {id} ({path}): {e}")))?;
            info!("band {id}: {}x{} from {path}", grid.width(), grid.height());
            bands.push((id, grid));
        }
        let tag = args
            .tag
            .clone()
            .or_else(|| meta.tag.clone())
            .unwrap_or_else(|| "scene".to_string());
        if tag.is_empty() || !tag.chars().all(|c| c.is_ascii_alphanumeric() || "-_.".contains(c)) {
            return Err(CliError::Usage(format!(
                "--tag '{tag}': use letters, digits, '-', '_' or '.'"
            )));
        }
        Ok(Self { meta, bands, tag })
    }

    fn band(&self, id: &str, purpose: &str) -> Result<&RasterGrid, CliError> {
        let id = self.meta.context.sensor.canonical_band_id(id);
        self.bands
            .iter()
            .find(|(b, _)| *b == id)
            .map(|(_, g)| g)
            .ok_or_else(|| CliError::Usage(format!("missing --band {id}=PATH (needed for {purpose})")))
    }

    /// A band that must hold 8-bit digital numbers.
    fn dn_band(&self, id: &str, purpose: &str) -> Result<&RasterGrid, CliError> {
        let g = self.band(id, purpose)?;
        check_dn(g).map_err(|e| CliError::Input(format!("band {id}: {e}")))?;
        Ok(g)
    }
}

fn check_dn(g: &RasterGrid) -> Result<(), RasterError> {
    match g
        .samples()
        .iter()
        .enumerate()
        .find(|(_, &v)| !g.is_nodata(v) && !(v >= 0.0 && v <= MAX_DN_8BIT as f64 && v.fract() == 0.0))
    {
        None => Ok(()),
        Some((i, &value)) => Err(RasterError::InvalidDn {
            row: i / g.width(),
            col: i % g.width(),
            value,
            max_dn: MAX_DN_8BIT,
        }),
    }
}

struct Exec {
    workers: Vec<WorkerDescriptor>,
    opts: RunOptions,
}

impl Exec {
    fn new(args: &ExecArgs) -> Result<Self, CliError> {
        let mut workers = Vec::new();
        match &args.workers {
            Some(s) => {
                let d: WorkerDescriptor = s.parse()?;
                if d.endpoint != Endpoint::Local {
                    return Err(CliError::Usage(format!(
                        "--workers '{s}': expected local:N (use --worker for remote workers)"
                    )));
                }
                workers.push(d);
            }
            None if args.remote.is_empty() => {
                let n = std::thread::available_parallelism().map_or(1, |n| n.get());
                workers.push(WorkerDescriptor::local(n));
            }
            None => {}
        }
        for r in &args.remote {
            let d: WorkerDescriptor = r.parse()?;
            if d.endpoint == Endpoint::Local {
                return Err(CliError::Usage(format!("--worker '{r}': expected HOST:PORT")));
            }
            workers.push(d);
        }
        if args.tiles == Some(0) {
            return Err(CliError::Usage("--tiles must be at least 1".into()));
        }
        let opts = RunOptions {
            retry_limit: args.retry,
            static_tiling: args.static_tiling,
            tiles: args.tiles,
            ..RunOptions::default()
        };
        info!(
            "workers: {}",
            workers.iter().map(ToString::to_string).collect::<Vec<_>>().join(", ")
        );
        Ok(Self { workers, opts })
    }

    fn run(&self, op: Operation, bands: Vec<RasterGrid>) -> Result<TaskOutput, CliError> {
        let task = Task::new(op, bands)?;
        Ok(run_task(&task, &self.workers, &self.opts)?)
    }

    fn raster(&self, op: Operation, bands: Vec<RasterGrid>) -> Result<(RasterGrid, u64), CliError> {
        match self.run(op, bands)? {
            TaskOutput::Raster { grid, flagged } => Ok((grid, flagged)),
            _ => unreachable!("raster operation"),
        }
    }
}

fn dos_check(dos: &DosArgs) -> Result<(), CliError> {
    if !(dos.dos_fraction > 0.0 && dos.dos_fraction < 1.0) {
        return Err(CliError::Usage(format!(
            "--dos-fraction {}: must lie in (0, 1)",
            dos.dos_fraction
        )));
    }
    Ok(())
}

/// Reflectance parameters for one band: dark-object subtraction from the
/// global histogram, or plain top-of-atmosphere with `--ndvi-toa`.
fn reflectance_params(
    scene: &Scene,
    id: &str,
    grid: &RasterGrid,
    dos: &DosArgs,
    exec: &Exec,
) -> Result<ReflectanceParams, CliError> {
    let ctx = &scene.meta.context;
    let cal = scene.meta.band(id)?;
    if dos.toa {
        return Ok(ReflectanceParams::toa(ctx, cal)?);
    }
    let hist = reduce_histogram(grid, MAX_DN_8BIT, &exec.workers, &exec.opts)?;
    let corr = AtmosphericCorrection::estimate(&hist, ctx, cal, dos.dos_fraction)?;
    println!(
        "band {}: dark DN {}, L_min {:.4}, L_1% {:.4}, path radiance {:.4}{}",
        cal.band_id,
        corr.dark_dn,
        corr.l_min,
        corr.l_one_percent,
        corr.applied_path_radiance(),
        if corr.is_clamped() { " (clamped from negative)" } else { "" }
    );
    Ok(ReflectanceParams::new(ctx, cal, corr.applied_path_radiance())?)
}

fn emissivity_config(a: &EmissivityArgs) -> Result<EmissivityConfig, CliError> {
    let cfg = EmissivityConfig {
        ndvi_low: a.ndvi_low,
        ndvi_high: a.ndvi_high,
        eps_soil: a.eps_soil,
        eps_veg: a.eps_veg,
        eps_water: a.eps_water,
    };
    cfg.validate().map_err(|e| CliError::Usage(format!("emissivity flags: {e}")))?;
    Ok(cfg)
}

fn report_flagged(flagged: u64) {
    if flagged > 0 {
        warn!("{flagged} reflectance value(s) clamped to [0, 1.2]");
        println!("reflectance clamped: {flagged} value(s)");
    }
}

fn summary(name: &str, grid: &RasterGrid, unit: &str) {
    let s = grid.stats();
    if s.count == 0 {
        println!("{name}: no valid pixels");
    } else {
        println!(
            "{name}: mean {:.4}{unit}, min {:.4}, max {:.4}, sd {:.4}, {} valid of {} pixels",
            s.mean,
            s.min,
            s.max,
            s.stddev,
            s.count,
            grid.len()
        );
    }
}

fn write_f32(out: &mut Outputs, name: &str, grid: &RasterGrid) -> Result<(), CliError> {
    let p = out.path(name);
    io::write_tiff(grid, SampleType::F32, &p)?;
    Ok(())
}

pub fn calibrate(args: &SceneArgs, exec: &ExecArgs, dos: &DosArgs, radiance: bool) -> Result<(), CliError> {
    dos_check(dos)?;
    let scene = Scene::load(args)?;
    let exec = Exec::new(exec)?;
    let mut out = Outputs::new(&args.out)?;
    for (id, _) in &scene.bands {
        let grid = scene.dn_band(id, "calibration")?;
        let cal = scene.meta.band(id)?;
        let reflect = !radiance && cal.e0.is_some();
        let (kind, prefix) = if reflect {
            (CalibrateKind::Reflectance(reflectance_params(&scene, id, grid, dos, &exec)?), "reflectance")
        } else {
            if !radiance {
                println!("band {id}: no solar irradiance, writing radiance");
            }
            (
                CalibrateKind::Radiance {
                    gain: cal.gain,
                    bias: cal.bias,
                },
                "radiance",
            )
        };
        let (result, flagged) = exec.raster(Operation::Calibrate(kind), vec![grid.clone()])?;
        report_flagged(flagged);
        summary(&format!("{prefix} band {id}"), &result, "");
        write_f32(&mut out, &format!("{prefix}_b{id}_{}.tif", scene.tag), &result)?;
    }
    out.finish("calibrate", &scene.tag)
}

/// NDVI through the engine; clamped reflectances are reported.
fn ndvi_grid(scene: &Scene, dos: &DosArgs, exec: &Exec) -> Result<RasterGrid, CliError> {
    let red = scene.dn_band("3", "NDVI")?;
    let nir = scene.dn_band("4", "NDVI")?;
    let rp = reflectance_params(scene, "3", red, dos, exec)?;
    let np = reflectance_params(scene, "4", nir, dos, exec)?;
    let (grid, flagged) = exec.raster(Operation::Ndvi { red: rp, nir: np }, vec![red.clone(), nir.clone()])?;
    report_flagged(flagged);
    Ok(grid)
}

pub fn ndvi(args: &SceneArgs, exec: &ExecArgs, dos: &DosArgs) -> Result<(), CliError> {
    dos_check(dos)?;
    let scene = Scene::load(args)?;
    scene.meta.require(Product::Ndvi)?;
    let exec = Exec::new(exec)?;
    let grid = ndvi_grid(&scene, dos, &exec)?;
    summary("NDVI", &grid, "");
    let mut out = Outputs::new(&args.out)?;
    write_f32(&mut out, &format!("ndvi_{}.tif", scene.tag), &grid)?;
    out.finish("ndvi", &scene.tag)
}

pub fn emissivity(args: &SceneArgs, exec: &ExecArgs, dos: &DosArgs, eps: &EmissivityArgs) -> Result<(), CliError> {
    dos_check(dos)?;
    let cfg = emissivity_config(eps)?;
    let scene = Scene::load(args)?;
    scene.meta.require(Product::Emissivity)?;
    let exec = Exec::new(exec)?;
    let ndvi = ndvi_grid(&scene, dos, &exec)?;
    let (grid, _) = exec.raster(Operation::Emissivity(cfg), vec![ndvi])?;
    summary("emissivity", &grid, "");
    let mut out = Outputs::new(&args.out)?;
    write_f32(&mut out, &format!("emissivity_{}.tif", scene.tag), &grid)?;
    out.finish("emissivity", &scene.tag)
}

/// `lst` runs NDVI and LST as separate tasks; `pipeline` fuses the chain
/// into one. Both must write identical files.
pub fn lst(args: &SceneArgs, exec: &ExecArgs, dos: &DosArgs, eps: &EmissivityArgs, fused: bool) -> Result<(), CliError> {
    dos_check(dos)?;
    let cfg = emissivity_config(eps)?;
    let scene = Scene::load(args)?;
    scene.meta.require(Product::Lst)?;
    let exec = Exec::new(exec)?;
    let thermal_id = scene.meta.context.sensor.thermal_band();
    let thermal = scene.dn_band(thermal_id, "LST")?;
    let params = LstParams::from_scene(&scene.meta.context, scene.meta.band(thermal_id)?, &cfg)?;
    info!(
        "psi = ({:.5}, {:.5}, {:.5})",
        params.psi.psi1, params.psi.psi2, params.psi.psi3
    );

    let grid = if fused {
        let red = scene.dn_band("3", "LST")?;
        let nir = scene.dn_band("4", "LST")?;
        red.same_shape(thermal)?;
        let rp = reflectance_params(&scene, "3", red, dos, &exec)?;
        let np = reflectance_params(&scene, "4", nir, dos, &exec)?;
        let (grid, flagged) = exec.raster(
            Operation::Pipeline {
                red: rp,
                nir: np,
                lst: params,
            },
            vec![red.clone(), nir.clone(), thermal.clone()],
        )?;
        report_flagged(flagged);
        grid
    } else {
        let ndvi = ndvi_grid(&scene, dos, &exec)?;
        exec.raster(Operation::LstMap(params), vec![thermal.clone(), ndvi])?.0
    };

    summary("LST", &grid, " °C");
    let s = grid.stats();
    if s.count > 0 {
        println!("mean LST (°C): {:.2}", s.mean);
    }
    let mut out = Outputs::new(&args.out)?;
    let txt = out.path(&format!("lst_{}.txt", scene.tag));
    io::write_lst_text(&grid, &txt)?;
    write_f32(&mut out, &format!("lst_{}.tif", scene.tag), &grid)?;
    out.finish(if fused { "pipeline" } else { "lst" }, &scene.tag)
}

pub fn classify(
    args: &SceneArgs,
    exec: &ExecArgs,
    train: Option<PathBuf>,
    signatures: Option<PathBuf>,
    mode: &str,
    truth: Option<PathBuf>,
) -> Result<(), CliError> {
    let mode: TrainingMode = mode
        .parse()
        .map_err(|_| CliError::Usage(format!("--classifier-mode '{mode}': expected minmax, meansigma or meansigma:K")))?;
    let scene = Scene::load(args)?;
    let exec = Exec::new(exec)?;
    let bands: Vec<&RasterGrid> = scene.bands.iter().map(|(_, g)| g).collect();
    println!(
        "classifying on bands {}",
        scene.bands.iter().map(|(id, _)| id.as_str()).collect::<Vec<_>>().join(", ")
    );

    let sigs = match (train, signatures) {
        (Some(path), _) => {
            let regions = classifier::read_training_regions(&path)?;
            classifier::train_signatures(&bands, &regions, mode)?
        }
        (None, Some(path)) => {
            let text = std::fs::read_to_string(&path)
                .map_err(|e| CliError::Input(format!("{}: {e}", path.display())))?;
            classifier::parse_signatures(&text)?
        }
        (None, None) => return Err(CliError::Usage("classify needs --train or --signatures".into())),
    };
    classifier::check_arity(bands.len(), &sigs)?;

    let op = Operation::Classify {
        bands: bands.len(),
        signatures: sigs.clone(),
    };
    let classified = match exec.run(op, bands.iter().map(|g| (*g).clone()).collect())? {
        TaskOutput::Classified(c) => c,
        _ => unreachable!("classify yields labels"),
    };
    let counts = classified.class_counts();
    println!("unclassified: {} pixel(s)", counts[UNCLASSIFIED as usize]);
    for (i, name) in classified.legend().iter().enumerate() {
        println!("class {} {name}: {} pixel(s)", i + 1, counts[i + 1]);
    }

    let mut out = Outputs::new(&args.out)?;
    let p = out.path(&format!("classified_{}.tif", scene.tag));
    io::write_classified_tiff(&classified, &p)?;
    out.write_text(&format!("signatures_{}.txt", scene.tag), &classifier::format_signatures(&sigs))?;

    if let Some(path) = truth {
        let truth = load_truth(&path, &classified)?;
        let cm = classifier::confusion_matrix(&classified, &truth)?;
        println!("overall accuracy: {:.4}", cm.overall_accuracy());
        out.write_text(&format!("confusion_{}.txt", scene.tag), &cm.report())?;
    }
    out.finish("classify", &scene.tag)
}

/// Reference labels on the predicted legend. A classified TIFF is matched
/// by class name; any other raster holds label numbers in signature order.
fn load_truth(path: &Path, predicted: &ClassifiedGrid) -> Result<ClassifiedGrid, CliError> {
    let legend = predicted.legend().to_vec();
    let bad = |m: String| CliError::Input(format!("--truth {}: {m}", path.display()));
    let ext = path.extension().and_then(|e| e.to_str()).unwrap_or_default().to_ascii_lowercase();
    let labels: Vec<u16> = if ext == "tif" || ext == "tiff" {
        let t = io::read_classified_tiff(path)?;
        let mut map = vec![UNCLASSIFIED; t.legend().len() + 1];
        for (i, name) in t.legend().iter().enumerate() {
            let j = legend
                .iter()
                .position(|n| n == name)
                .ok_or_else(|| bad(format!("class '{name}' was not trained")))?;
            map[i + 1] = (j + 1) as u16;
        }
        let remapped = t.labels().iter().map(|&l| map[l as usize]).collect();
        return ClassifiedGrid::new(t.width(), t.height(), remapped, legend).map_err(|e| bad(e.to_string()));
    } else {
        let g = io::read_raster(path)?;
        predicted_shape(&g, predicted).map_err(|e| bad(e.to_string()))?;
        g.samples()
            .iter()
            .map(|&v| {
                if g.is_nodata(v) {
                    Ok(UNCLASSIFIED)
                } else if v >= 0.0 && v <= legend.len() as f64 && v.fract() == 0.0 {
                    Ok(v as u16)
                } else {
                    Err(bad(format!("label {v} is not 0..={}", legend.len())))
                }
            })
            .collect::<Result<_, _>>()?
    };
    ClassifiedGrid::new(predicted.width(), predicted.height(), labels, legend).map_err(|e| bad(e.to_string()))
}

fn predicted_shape(g: &RasterGrid, p: &ClassifiedGrid) -> Result<(), String> {
    if g.width() == p.width() && g.height() == p.height() {
        Ok(())
    } else {
        Err(format!(
            "{}x{} does not match the {}x{} scene",
            g.width(),
            g.height(),
            p.width(),
            p.height()
        ))
    }
}

pub fn compare(
    lst: Option<PathBuf>,
    mean: Option<f64>,
    readings: &[String],
    overpass: &str,
    reference: Option<String>,
    label: String,
    metadata: Option<PathBuf>,
) -> Result<(), CliError> {
    let readings = readings
        .iter()
        .map(|r| r.parse::<StationReading>())
        .collect::<Result<Vec<_>, _>>()
        .map_err(|e| CliError::Usage(format!("--reading: {e}")))?;
    let overpass: ClockTime = overpass
        .parse()
        .map_err(|e| CliError::Usage(format!("--overpass: {e}")))?;
    let mean = match (lst, mean) {
        (_, Some(m)) => m,
        (Some(path), None) => {
            let ext = path.extension().and_then(|e| e.to_str()).unwrap_or_default();
            let grid = if ext.eq_ignore_ascii_case("txt") {
                io::read_lst_text(&path)?
            } else {
                io::read_raster(&path)?
            };
            let s = grid.stats();
            if s.count == 0 {
                return Err(CliError::Input(format!("{}: no valid LST pixels", path.display())));
            }
            s.mean
        }
        (None, None) => return Err(CliError::Usage("compare needs --lst or --mean".into())),
    };
    let mut c = Comparison::new(label, readings, overpass, mean).map_err(|e| CliError::Usage(e.to_string()))?;
    c.reference = reference;
    if let Some(m) = metadata {
        c.water_vapour = io::read_scene_metadata(m)?.context.water_vapour().ok();
    }
    print!("{}", c.report());
    println!("note: the station value at overpass is a linear interpolation; it is reported, not asserted");
    Ok(())
}

pub fn worker(listen: &str, fail_after: Option<usize>) -> Result<(), CliError> {
    if fail_after == Some(0) {
        return Err(CliError::Usage("--fail-after must be at least 1".into()));
    }
    let server = engine::serve_worker(
        listen,
        WorkerOptions {
            fail_after_results: fail_after,
        },
    )
    .map_err(|e| CliError::Usage(format!("--listen {listen}: {e}")))?;
    println!("listening on {}", server.local_addr());
    let _ = std::io::stdout().flush();
    server.wait();
    Ok(())
}
