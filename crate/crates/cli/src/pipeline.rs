//! Descriptor computation shared by every command.

use std::cell::RefCell;
use std::collections::HashMap;
use std::path::{Path, PathBuf};
use std::rc::Rc;

use sha2::{Digest, Sha256};
use shapesig::mesh::{assemble_laplacian, load_mesh, MeshFormat};
use shapesig::mor::{ksmor_descriptors, mcr_descriptors, mcr_reduce_with, MorError, ReducedModelMcr};
use shapesig::solvers::EigenMode;
use shapesig::spectral::{default_hks_grid, default_wks_grid, hks, wks, SpectralGrid};
use shapesig::{integrator, DescriptorField, LaplaceOperator, Method, Pde, TimeGrid, TriangleMesh};

use crate::config::{MethodArg, RunConfig};
use crate::UsageError;

const EIG_TOL: f64 = 1e-10;

/// Environment variable naming the reduced-model cache directory.
pub const CACHE_ENV: &str = "SHAPESIG_CACHE_DIR";

/// A loaded mesh with its operator and memoised eigendata.
pub struct Shape {
    pub mesh: TriangleMesh,
    pub op: LaplaceOperator,
    hash: String,
    models: RefCell<HashMap<(usize, &'static str), Rc<ReducedModelMcr>>>,
}

impl Shape {
    pub fn load(path: &Path) -> anyhow::Result<Self> {
        let format = MeshFormat::from_path(path)
            .ok_or_else(|| UsageError(format!("{}: expected a .off, .vert or .tri file", path.display())))?;
        let mesh = load_mesh(path, format).map_err(shapesig::Error::from)?;
        let op = assemble_laplacian(&mesh).map_err(shapesig::Error::from)?;
        log::info!("{}: {} vertices, {} triangles", path.display(), mesh.num_vertices(), mesh.num_triangles());
        Ok(Self { hash: mesh_hash(&mesh), mesh, op, models: RefCell::default() })
    }

    pub fn num_vertices(&self) -> usize {
        self.mesh.num_vertices()
    }

    /// `r` smallest eigenpairs, from memory, the disk cache, or a fresh solve.
    pub fn reduced_model(&self, r: usize, mode: EigenMode) -> anyhow::Result<Rc<ReducedModelMcr>> {
        let key = (r, mode.as_str());
        if let Some(m) = self.models.borrow().get(&key) {
            return Ok(m.clone());
        }
        let model = Rc::new(self.cached_or_solved(r, mode)?);
        self.models.borrow_mut().insert(key, model.clone());
        Ok(model)
    }

    fn cached_or_solved(&self, r: usize, mode: EigenMode) -> anyhow::Result<ReducedModelMcr> {
        let file = std::env::var_os(CACHE_ENV)
            .map(PathBuf::from)
            .map(|dir| dir.join(format!("{}-r{r}-{}.ssmr", self.hash, mode.as_str())));
        if let Some(file) = &file {
            if file.exists() {
                match ReducedModelMcr::read(file) {
                    Ok(m) if m.modes() == r && m.eig_mode() == mode && m.pairs().dim() == self.num_vertices() => {
                        log::info!("reduced model from cache {}", file.display());
                        return Ok(m);
                    }
                    Ok(_) => log::warn!("cache entry {} does not match; recomputing", file.display()),
                    Err(e) => log::warn!("unreadable cache entry {}: {e}; recomputing", file.display()),
                }
            }
        }
        let model = mcr_reduce_with(&self.op, r, mode, EIG_TOL).map_err(shapesig::Error::from)?;
        if let Some(file) = &file {
            let stored = file.parent().map_or(Ok(()), std::fs::create_dir_all).map_err(MorError::Io).and_then(|_| model.write(file));
            if let Err(e) = stored {
                log::warn!("could not write cache entry {}: {e}", file.display());
            }
        }
        Ok(model)
    }
}

/// Content hash of geometry and connectivity.
pub fn mesh_hash(mesh: &TriangleMesh) -> String {
    let mut h = Sha256::new();
    h.update((mesh.num_vertices() as u64).to_le_bytes());
    for p in mesh.vertices() {
        for c in p {
            h.update(c.to_le_bytes());
        }
    }
    for t in mesh.triangles() {
        for &i in t {
            h.update((i as u64).to_le_bytes());
        }
    }
    h.finalize().iter().map(|b| format!("{b:02x}")).collect()
}

/// Descriptor field of `shape` under `cfg`.
///
/// With a `reference` field the sampling (time grid or kernel samples) is taken
/// from it verbatim, so both shapes share one time scale.
pub fn descriptors(shape: &Shape, cfg: &RunConfig, reference: Option<&DescriptorField>) -> anyhow::Result<DescriptorField> {
    let method = Method::from(cfg.method);
    let pde = Pde::from(cfg.pde);
    if let Some(r) = reference {
        if r.method() != method {
            return Err(UsageError(format!("reference descriptor uses {}, config asks for {method}", r.method())).into());
        }
        if r.pde().is_some_and(|p| p != pde) {
            return Err(UsageError(format!("reference descriptor integrates {}, config asks for {pde}", r.pde().unwrap())).into());
        }
    }
    let base = TimeGrid::new(cfg.t_max, cfg.levels).map_err(shapesig::Error::from)?;
    let grid = reference.and_then(DescriptorField::time_grid).unwrap_or(base);
    let mode = cfg.eig_mode.into();
    let field = match cfg.method {
        MethodArg::Full => {
            let run = if pde == Pde::Heat { integrator::heat_full } else { integrator::wave_full };
            run(&shape.op, &grid, cfg.solver()).map_err(shapesig::Error::from)?
        }
        MethodArg::Mcr => {
            let model = shape.reduced_model(cfg.modes, mode)?;
            let fixed = reference.map(|_| grid);
            mcr_descriptors(&model, &base, pde, cfg.adapt_time, fixed.as_ref()).map_err(shapesig::Error::from)?
        }
        MethodArg::Ksmor => {
            ksmor_descriptors(&shape.op, cfg.sigma, cfg.krylov, &grid, pde).map_err(shapesig::Error::from)?
        }
        MethodArg::Hks | MethodArg::Wks => {
            let model = shape.reduced_model(cfg.modes, mode)?;
            let pairs = model.pairs();
            let kernel_grid = match reference.and_then(|r| SpectralGrid::from_sampling(r.sampling())) {
                Some(g) => g,
                None if cfg.method == MethodArg::Hks => default_hks_grid(pairs, cfg.levels).map_err(shapesig::Error::from)?,
                None => default_wks_grid(pairs, cfg.levels).map_err(shapesig::Error::from)?,
            };
            let f = if cfg.method == MethodArg::Hks { hks(pairs, &kernel_grid) } else { wks(pairs, &kernel_grid) };
            f.map_err(shapesig::Error::from)?
        }
    };
    Ok(field)
}

/// Reference-first: the target reuses the reference's sampling.
pub fn descriptor_pair(
    reference: &Shape,
    target: &Shape,
    cfg: &RunConfig,
) -> anyhow::Result<(DescriptorField, DescriptorField)> {
    let a = descriptors(reference, cfg, None)?;
    let b = descriptors(target, cfg, Some(&a))?;
    Ok((a, b))
}
