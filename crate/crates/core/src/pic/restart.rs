//! Checkpoint capture and restart of a [`Simulation`].

use std::path::Path;

use crate::checkpoint::{
    read_checkpoint, write_checkpoint, CheckpointFile, CheckpointHeader, CompressionStats, SpeciesRecord,
};
use crate::codec::compress_species;
use crate::em::{derive_seed, FitReport};
use crate::error::Result;
use crate::gauss::GaussReport;
use crate::pipeline::{reconstruct_species, ReconstructOptions};
use crate::pic::diagnostics::{DiagnosticsRow, Event};
use crate::pic::{field_energy, field_solve, SimConfig, Simulation, Species};

/// Gauss residual above which the stored field is replaced by a fresh solve.
const FIELD_MISMATCH_TOL: f64 = 1e-9;
const RESTART_SALT: u64 = 0x7265_7374_6172_7421;

/// Compresses the current state. A state restored from a checkpoint and not
/// stepped since returns the loaded records unchanged.
pub fn checkpoint_now(sim: &Simulation) -> Result<(CheckpointFile, Vec<FitReport>)> {
    if let Some(f) = &sim.restored {
        return Ok((f.clone(), Vec::new()));
    }
    let cfg = &sim.cfg;
    let fit = crate::em::FitConfig {
        seed: cfg.seed,
        ..cfg.fit.clone()
    };
    let mut species = Vec::with_capacity(sim.species.len());
    let mut reports = Vec::new();
    for (s, sp) in sim.species.iter().enumerate() {
        let (cells, fits) = compress_species(&sp.particles, &sim.grid, 1, &fit, cfg.min_particles)?;
        reports.extend(fits.into_iter().flatten());
        species.push(SpeciesRecord {
            charge: sp.charge,
            mass: sp.mass,
            dim: 1,
            rho_target: sim.species_rho(s)?,
            cells,
        });
    }
    let file = CheckpointFile {
        header: CheckpointHeader {
            time: sim.time(),
            step: sim.step,
            dt: cfg.dt,
            grid: sim.grid,
            periodic: true,
            seed: cfg.seed,
            fit,
            min_particles: cfg.min_particles,
        },
        efield: sim.efield.clone(),
        species,
    };
    Ok((file, reports))
}

/// [`checkpoint_now`] followed by [`write_checkpoint`].
pub fn write_checkpoint_now(sim: &Simulation, path: &Path) -> Result<(CompressionStats, Vec<FitReport>)> {
    let (file, reports) = checkpoint_now(sim)?;
    Ok((write_checkpoint(&file, path)?, reports))
}

/// Field plus kinetic energy of the state the checkpoint was taken from,
/// recomputed from its records.
pub fn implied_energy(file: &CheckpointFile) -> f64 {
    let kinetic: f64 = file
        .species
        .iter()
        .map(|sp| 0.5 * sp.mass * sp.cells.iter().map(|c| c.moment_target().energy()).sum::<f64>())
        .sum();
    field_energy(&file.efield, &file.header.grid) + kinetic
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RestartOptions {
    /// Moment-match velocities at reconstruction and after the charge
    /// correction.
    pub lemons: bool,
    /// Reconstruction seed; derived from the checkpoint seed if unset.
    pub seed: Option<u64>,
}

impl Default for RestartOptions {
    fn default() -> Self {
        Self { lemons: true, seed: None }
    }
}

#[derive(Debug, Clone)]
pub struct RestartReport {
    pub gauss: Vec<GaussReport>,
    /// Cells whose record targets were unattainable after the charge
    /// correction and were matched to rescaled targets instead.
    pub lemons_fallbacks: usize,
    /// Cells left uncorrected because no target could be met.
    pub lemons_skipped: usize,
    pub field_resolved: bool,
    pub implied_energy: f64,
    pub row: DiagnosticsRow,
}

/// Reads a checkpoint and rebuilds a simulation from it.
pub fn restart_from(path: &Path, cfg: &SimConfig, opts: RestartOptions) -> Result<(Simulation, RestartReport)> {
    restart_from_file(read_checkpoint(path)?, cfg, opts)
}

pub fn restart_from_file(file: CheckpointFile, cfg: &SimConfig, opts: RestartOptions) -> Result<(Simulation, RestartReport)> {
    let h = &file.header;
    let grid = h.grid;
    let mut cfg = SimConfig {
        length: grid.length,
        nx: grid.nx,
        dt: h.dt,
        seed: h.seed,
        fit: h.fit.clone(),
        min_particles: h.min_particles,
        ..cfg.clone()
    };
    cfg.fit.seed = h.seed;
    let base_seed = opts.seed.unwrap_or_else(|| derive_seed(h.seed ^ RESTART_SALT, h.step));
    let recon = ReconstructOptions {
        lemons: opts.lemons,
        solver_tol: cfg.solver_tol,
    };

    let mut species = Vec::with_capacity(file.species.len());
    let mut gauss = Vec::new();
    let (mut fallbacks, mut skipped) = (0, 0);
    for (s, rec) in file.species.iter().enumerate() {
        let r = reconstruct_species(rec, &grid, s as u16, recon, derive_seed(base_seed, s as u64))?;
        gauss.push(r.gauss);
        fallbacks += r.lemons_fallbacks;
        skipped += r.lemons_skipped;
        species.push(Species {
            charge: rec.charge,
            mass: rec.mass,
            particles: r.particles,
        });
    }
    if fallbacks > 0 {
        log::warn!("{fallbacks} cells matched to rescaled moments after charge correction");
    }
    if skipped > 0 {
        log::warn!("{skipped} cells could not be moment-matched after charge correction");
    }

    let nx = grid.nx as f64;
    let background = -file.species.iter().map(|s| s.rho_target.iter().sum::<f64>()).sum::<f64>() / nx;
    let mut sim = Simulation::with_background(cfg, grid, species, Some(file.efield.clone()), background)?;
    sim.step = h.step;

    let mut field_resolved = false;
    let rho = sim.total_rho()?;
    let residual = crate::pic::gauss_rms(&sim.efield, &rho, &grid);
    if residual > FIELD_MISMATCH_TOL {
        log::warn!("stored field disagrees with corrected charge (gauss rms {residual:e}); re-solving");
        sim.efield = field_solve(&rho, &grid)?;
        field_resolved = true;
    }

    let implied = implied_energy(&file);
    let mut row = sim.diagnostics(Event::Restart)?;
    row.energy_change = sim.total_energy() - implied;
    sim.restored = Some(file);
    Ok((
        sim,
        RestartReport {
            gauss,
            lemons_fallbacks: fallbacks,
            lemons_skipped: skipped,
            field_resolved,
            implied_energy: implied,
            row,
        },
    ))
}
