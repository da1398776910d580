use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};
use std::time::Instant;

use anyhow::Context;
use serde::Serialize;
use shapesig::correspond::{
    geodesic_errors, hit_rate, match_p2p, soft_map, sparsify_sweep, write_curve_csv, Bandwidth, GeodesicErrors,
    GroundTruth, SoftHitCriterion,
};
use shapesig::DescriptorField;

use crate::config::{MethodArg, RunConfig, SolverArg};
use crate::dataset::{self, Pair};
use crate::pipeline::{descriptor_pair, descriptors, Shape};
use crate::{DataError, UsageError};

fn create(path: &Path) -> anyhow::Result<BufWriter<File>> {
    if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
        std::fs::create_dir_all(dir).with_context(|| format!("creating {}", dir.display()))?;
    }
    Ok(BufWriter::new(File::create(path).with_context(|| format!("creating {}", path.display()))?))
}

fn out_dir(cfg: &RunConfig) -> anyhow::Result<&Path> {
    let dir = cfg.out_dir.as_deref().ok_or_else(|| UsageError("an output directory is required (--out-dir)".into()))?;
    std::fs::create_dir_all(dir).with_context(|| format!("creating {}", dir.display()))?;
    Ok(dir)
}

fn write_json(path: &Path, value: &impl Serialize) -> anyhow::Result<()> {
    let mut w = create(path)?;
    serde_json::to_writer_pretty(&mut w, value)?;
    writeln!(w)?;
    w.flush()?;
    Ok(())
}

fn load_ground_truth(path: &Path, reference: &Shape, target: &Shape) -> anyhow::Result<GroundTruth> {
    let (n, m) = (reference.num_vertices(), target.num_vertices());
    let gt = if path.as_os_str() == "identity" {
        GroundTruth::parse("identity", n, m)
    } else {
        GroundTruth::load(path, n, m)
    };
    Ok(gt.map_err(shapesig::Error::from)?)
}

fn pair_ground_truth(pair: &Pair, reference: &Shape, target: &Shape) -> anyhow::Result<GroundTruth> {
    match &pair.ground_truth {
        Some(p) => load_ground_truth(p, reference, target),
        None if reference.num_vertices() == target.num_vertices() => Ok(GroundTruth::identity(reference.num_vertices())),
        None => Err(DataError(format!("{}: no ground truth and vertex counts differ", pair.name)).into()),
    }
}

/// `signature`: one descriptor field, optionally on a reference's sampling.
pub fn signature(cfg: &RunConfig, reference_descriptor: Option<&Path>, out: &Path, csv: Option<&Path>) -> anyhow::Result<()> {
    let shape = Shape::load(cfg.require_reference()?)?;
    let reference = reference_descriptor
        .map(|p| DescriptorField::read_binary(p).map_err(shapesig::Error::from))
        .transpose()?;
    let field = descriptors(&shape, cfg, reference.as_ref())?;
    if let Some(dir) = out.parent().filter(|d| !d.as_os_str().is_empty()) {
        std::fs::create_dir_all(dir)?;
    }
    field.write_binary(out).map_err(shapesig::Error::from)?;
    if let Some(csv) = csv {
        let mut w = create(csv)?;
        field.write_csv(&mut w)?;
        w.flush()?;
    }
    log::info!("wrote {} x {} {} descriptor to {}", field.nrows(), field.ncols(), field.method(), out.display());
    Ok(())
}

#[derive(Serialize)]
struct MatchReport<'a> {
    config: &'a RunConfig,
    reference_vertices: usize,
    target_vertices: usize,
    samples: Vec<f64>,
    hit_rate: Option<f64>,
    fraction_at_threshold: Option<f64>,
}

fn read_or_compute(
    shape: &Shape,
    cfg: &RunConfig,
    stored: Option<&Path>,
    reference: Option<&DescriptorField>,
) -> anyhow::Result<DescriptorField> {
    match stored {
        Some(p) => Ok(DescriptorField::read_binary(p).map_err(shapesig::Error::from)?),
        None => descriptors(shape, cfg, reference),
    }
}

/// `match`: point-to-point assignment, hit rate and geodesic-error curve.
pub fn match_shapes(cfg: &RunConfig, stored: [Option<&Path>; 2]) -> anyhow::Result<()> {
    let dir = out_dir(cfg)?;
    let reference = Shape::load(cfg.require_reference()?)?;
    let target = Shape::load(cfg.require_target()?)?;
    let a = read_or_compute(&reference, cfg, stored[0], None)?;
    let b = read_or_compute(&target, cfg, stored[1], Some(&a))?;
    a.check_compatible(&b).map_err(shapesig::Error::from).context("reference and target descriptors disagree")?;
    let assignment = match_p2p(&a, &b).map_err(shapesig::Error::from)?;
    a.write_binary(&dir.join("reference.ssdf")).map_err(shapesig::Error::from)?;
    b.write_binary(&dir.join("target.ssdf")).map_err(shapesig::Error::from)?;
    let mut w = create(&dir.join("assignment.csv"))?;
    assignment.write_csv(&mut w)?;
    w.flush()?;

    let (mut rate, mut fraction) = (None, None);
    if let Some(gt_path) = &cfg.ground_truth {
        let gt = load_ground_truth(gt_path, &reference, &target)?;
        rate = Some(hit_rate(&assignment, &gt).map_err(shapesig::Error::from)?);
        let errors = geodesic_errors(&assignment, &gt, &target.mesh).map_err(shapesig::Error::from)?;
        fraction = Some(errors.fraction_at(cfg.threshold));
        let mut w = create(&dir.join("geodesic_curve.csv"))?;
        write_curve_csv(&mut w, &errors.curve(&GeodesicErrors::default_thresholds()))?;
        w.flush()?;
    }
    let report = MatchReport {
        config: cfg,
        reference_vertices: reference.num_vertices(),
        target_vertices: target.num_vertices(),
        samples: a.sampling().samples(),
        hit_rate: rate,
        fraction_at_threshold: fraction,
    };
    write_json(&dir.join("report.json"), &report)?;
    if let Some(r) = rate {
        println!("hit rate {r:.2}%, fraction below {} {:.2}%", cfg.threshold, fraction.unwrap_or(0.0));
    }
    Ok(())
}

#[derive(Serialize)]
struct SoftmapReport<'a> {
    config: &'a RunConfig,
    minimum_density: Option<f64>,
    geodesic_radius: Option<f64>,
}

/// `softmap`: soft correspondence map, its sparsification sweep and optionally
/// the sparsified map itself.
pub fn softmap(cfg: &RunConfig, density: Option<f64>, radius: Option<f64>) -> anyhow::Result<()> {
    let dir = out_dir(cfg)?;
    let reference = Shape::load(cfg.require_reference()?)?;
    let target = Shape::load(cfg.require_target()?)?;
    let gt_path = cfg.ground_truth.as_deref().ok_or_else(|| UsageError("softmap needs --ground-truth".into()))?;
    let gt = load_ground_truth(gt_path, &reference, &target)?;
    let (a, b) = descriptor_pair(&reference, &target, cfg)?;
    let s = soft_map(&a, &b, Bandwidth::RowMedian).map_err(shapesig::Error::from)?;
    let criterion = match radius {
        Some(radius) => SoftHitCriterion::GeodesicBall { target_mesh: &target.mesh, radius },
        None => SoftHitCriterion::ExactEntry,
    };
    let levels: Vec<f64> = (0..=100).map(f64::from).collect();
    let sweep = sparsify_sweep(&s, &gt, &levels, criterion).map_err(shapesig::Error::from)?;
    let mut w = create(&dir.join("density_sweep.csv"))?;
    sweep.write_csv(&mut w)?;
    w.flush()?;
    if let Some(d) = density {
        if !(0.0..=100.0).contains(&d) {
            return Err(UsageError(format!("density {d} is not a percentage")).into());
        }
        let mut w = create(&dir.join("softmap.txt"))?;
        s.sparsified(d).renormalized().write_triplets(&mut w)?;
        w.flush()?;
    }
    write_json(
        &dir.join("report.json"),
        &SoftmapReport { config: cfg, minimum_density: sweep.minimum_density, geodesic_radius: radius },
    )?;
    match sweep.minimum_density {
        Some(d) => println!("minimum density {d:.4}%"),
        None => println!("the dense map already misses ground-truth entries"),
    }
    Ok(())
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, clap::ValueEnum)]
#[allow(clippy::enum_variant_names)]
pub enum Suite {
    ModesSweep,
    SolverSweep,
    DensitySweep,
}

/// Parameter ranges of a benchmark run.
#[derive(Debug, Clone)]
pub struct Ranges {
    pub methods: Vec<MethodArg>,
    pub modes: Vec<usize>,
    pub eps: Vec<f64>,
    pub max_iters: Vec<usize>,
    /// Skip soft maps with more entries than this.
    pub max_softmap_entries: usize,
    pub timings: bool,
}

struct Row {
    pair: String,
    cfg: RunConfig,
    hit_rate: Option<f64>,
    fraction: Option<f64>,
    minimum_density: Option<f64>,
    seconds: f64,
    error: Option<String>,
}

fn opt(v: Option<f64>) -> String {
    v.map(|x| format!("{x}")).unwrap_or_default()
}

fn write_rows(path: &Path, rows: &[Row], timings: bool) -> anyhow::Result<()> {
    let mut w = csv::Writer::from_writer(create(path)?);
    w.write_record([
        "pair", "method", "pde", "modes", "krylov", "solver", "eps", "max_iters", "adapt_time", "hit_rate",
        "fraction_at_threshold", "minimum_density", "wall_seconds", "error",
    ])?;
    for r in rows {
        let c = &r.cfg;
        let solver = if c.solver == SolverArg::Cg { "cg" } else { "direct" };
        let seconds = if timings { format!("{:.3}", r.seconds) } else { String::new() };
        w.write_record([
            r.pair.clone(),
            shapesig::Method::from(c.method).to_string(),
            shapesig::Pde::from(c.pde).to_string(),
            c.modes.to_string(),
            c.krylov.to_string(),
            solver.to_string(),
            c.eps.to_string(),
            c.max_iters.to_string(),
            c.adapt_time.to_string(),
            opt(r.hit_rate),
            opt(r.fraction),
            opt(r.minimum_density),
            seconds,
            r.error.clone().unwrap_or_default(),
        ])?;
    }
    w.flush()?;
    Ok(())
}

fn evaluate(reference: &Shape, target: &Shape, gt: &GroundTruth, cfg: &RunConfig, ranges: &Ranges, density: bool) -> anyhow::Result<[Option<f64>; 3]> {
    let (a, b) = descriptor_pair(reference, target, cfg)?;
    let assignment = match_p2p(&a, &b).map_err(shapesig::Error::from)?;
    let rate = hit_rate(&assignment, gt).map_err(shapesig::Error::from)?;
    let fraction = geodesic_errors(&assignment, gt, &target.mesh).map_err(shapesig::Error::from)?.fraction_at(cfg.threshold);
    let entries = reference.num_vertices() * target.num_vertices();
    let minimum = if density && entries <= ranges.max_softmap_entries {
        let s = soft_map(&a, &b, Bandwidth::RowMedian).map_err(shapesig::Error::from)?;
        let sweep = sparsify_sweep(&s, gt, &[], SoftHitCriterion::ExactEntry).map_err(shapesig::Error::from)?;
        Some(sweep.minimum_density.unwrap_or(100.0))
    } else {
        if density {
            log::warn!("soft map with {entries} entries exceeds the limit; density not computed");
        }
        None
    };
    Ok([Some(rate), Some(fraction), minimum])
}

fn points(suite: Suite, base: &RunConfig, ranges: &Ranges) -> Vec<RunConfig> {
    let mut out = Vec::new();
    match suite {
        Suite::ModesSweep => {
            for &method in &ranges.methods {
                for &r in &ranges.modes {
                    let mut c = base.clone();
                    c.method = method;
                    if method == MethodArg::Ksmor {
                        c.krylov = r;
                    } else {
                        c.modes = r;
                    }
                    out.push(c);
                }
            }
        }
        Suite::SolverSweep => {
            let mut direct = base.clone();
            direct.method = MethodArg::Full;
            direct.solver = SolverArg::Direct;
            out.push(direct.clone());
            for &eps in &ranges.eps {
                for &max_iters in &ranges.max_iters {
                    out.push(RunConfig { solver: SolverArg::Cg, eps, max_iters, ..direct.clone() });
                }
            }
        }
        Suite::DensitySweep => {
            for &method in &ranges.methods {
                out.push(RunConfig { method, ..base.clone() });
            }
        }
    }
    out
}

/// `benchmark`: one CSV row per (pair, parameter point). Failures are recorded
/// in the row and the run continues.
pub fn benchmark(cfg: &RunConfig, suite: Suite, dataset_dir: &Path, ranges: &Ranges, out: &Path) -> anyhow::Result<()> {
    let pairs = dataset::discover(dataset_dir)?;
    let configs = points(suite, cfg, ranges);
    for c in &configs {
        c.validate()?;
    }
    let density = suite != Suite::SolverSweep;
    let mut rows = Vec::new();
    for pair in &pairs {
        log::info!("pair {}", pair.name);
        let loaded = Shape::load(&pair.reference)
            .and_then(|r| Ok((Shape::load(&pair.target)?, r)))
            .and_then(|(t, r)| Ok((pair_ground_truth(pair, &r, &t)?, r, t)));
        let (gt, reference, target) = match loaded {
            Ok(x) => x,
            Err(e) => {
                log::error!("{}: {e:#}", pair.name);
                for c in &configs {
                    rows.push(Row {
                        pair: pair.name.clone(),
                        cfg: c.clone(),
                        hit_rate: None,
                        fraction: None,
                        minimum_density: None,
                        seconds: 0.0,
                        error: Some(format!("{e:#}")),
                    });
                }
                continue;
            }
        };
        for c in &configs {
            let start = Instant::now();
            let result = evaluate(&reference, &target, &gt, c, ranges, density);
            let seconds = start.elapsed().as_secs_f64();
            let (metrics, error) = match result {
                Ok(m) => (m, None),
                Err(e) => {
                    log::error!("{} {}: {e:#}", pair.name, shapesig::Method::from(c.method));
                    ([None; 3], Some(format!("{e:#}")))
                }
            };
            rows.push(Row {
                pair: pair.name.clone(),
                cfg: c.clone(),
                hit_rate: metrics[0],
                fraction: metrics[1],
                minimum_density: metrics[2],
                seconds,
                error,
            });
        }
    }
    write_rows(out, &rows, ranges.timings)?;
    let failed = rows.iter().filter(|r| r.error.is_some()).count();
    println!("{} rows written to {} ({failed} failed)", rows.len(), out.display());
    Ok(())
}

pub fn default_output(dir: Option<&Path>, name: &str) -> PathBuf {
    dir.map_or_else(|| PathBuf::from(name), |d| d.join(name))
}
