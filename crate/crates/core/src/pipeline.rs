//! Standalone compress and reconstruct paths shared by restart and the
//! particle-dump tools.

use crate::checkpoint::{CheckpointFile, CheckpointHeader, SpeciesRecord};
use crate::codec::{
    bin_by_cell, compress_species, decompress_species, lemons_correct, CellMode, CellRecord, DecompressOptions, LemonsMode,
};
use crate::em::{derive_seed, FitConfig, FitReport};
use crate::error::{Error, Result};
use crate::gauss::{deposit_charge, enforce_gauss, DepositionScheme, GaussReport};
use crate::grid::Grid;
use crate::particle::Particle;

/// Charge and mass assigned to every species of a particle dump.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SpeciesParams {
    pub charge: f64,
    pub mass: f64,
}

impl Default for SpeciesParams {
    fn default() -> Self {
        Self { charge: -1.0, mass: 1.0 }
    }
}

/// Compresses a 1D-1V particle set into a checkpoint with a zero field.
/// Species ids must be dense from 0; `rho_target` is the deposited charge.
pub fn compress_particles(
    particles: &[Particle],
    grid: Grid,
    params: SpeciesParams,
    fit: &FitConfig,
    min_particles: usize,
) -> Result<(CheckpointFile, Vec<FitReport>)> {
    for (i, p) in particles.iter().enumerate() {
        if !grid.contains(p.x) {
            return Err(Error::InvalidParticle { index: i, x: p.x });
        }
        if !(p.weight > 0.0) || !p.v[0].is_finite() {
            return Err(Error::InvalidSample(format!(
                "particle {i} has weight {} and velocity {}",
                p.weight, p.v[0]
            )));
        }
    }
    let n_species = particles.iter().map(|p| p.species as usize + 1).max().unwrap_or(0);
    let mut species = Vec::with_capacity(n_species);
    let mut reports = Vec::new();
    for s in 0..n_species {
        let ps: Vec<Particle> = particles.iter().filter(|p| p.species as usize == s).copied().collect();
        let (cells, fits) = compress_species(&ps, &grid, 1, fit, min_particles)?;
        reports.extend(fits.into_iter().flatten());
        species.push(SpeciesRecord {
            charge: params.charge,
            mass: params.mass,
            dim: 1,
            rho_target: deposit_charge(&ps, &grid, DepositionScheme::Linear, params.charge)?,
            cells,
        });
    }
    let file = CheckpointFile {
        header: CheckpointHeader {
            time: 0.0,
            step: 0,
            dt: 0.0,
            grid,
            periodic: true,
            seed: fit.seed,
            fit: fit.clone(),
            min_particles,
        },
        efield: vec![0.0; grid.nx],
        species,
    };
    Ok((file, reports))
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ReconstructOptions {
    /// Moment-match velocities at sampling and after the charge correction.
    pub lemons: bool,
    pub solver_tol: f64,
}

impl Default for ReconstructOptions {
    fn default() -> Self {
        Self {
            lemons: true,
            solver_tol: crate::gauss::DEFAULT_SOLVER_TOL,
        }
    }
}

#[derive(Debug, Clone)]
pub struct Reconstruction {
    pub particles: Vec<Particle>,
    pub gauss: GaussReport,
    /// Cells whose record targets were unattainable after the charge
    /// correction and were matched to rescaled targets instead.
    pub lemons_fallbacks: usize,
    /// Cells left uncorrected because no target could be met.
    pub lemons_skipped: usize,
}

/// Samples one species from its records, corrects the weights to the stored
/// charge density and, with Lemons enabled, restores each cell's momentum
/// and energy.
pub fn reconstruct_species(
    rec: &SpeciesRecord,
    grid: &Grid,
    species: u16,
    opts: ReconstructOptions,
    seed: u64,
) -> Result<Reconstruction> {
    if rec.dim != 1 {
        return Err(Error::InvalidConfig(format!(
            "species {species} has {} velocity dimensions; only 1D-1V reconstruction is supported",
            rec.dim
        )));
    }
    let decompress = DecompressOptions {
        lemons: opts.lemons.then_some(LemonsMode::Scalar),
    };
    let mut particles = decompress_species(&rec.cells, grid, species, decompress, seed)?;
    let gauss = enforce_gauss(
        &mut particles,
        &rec.rho_target,
        grid,
        DepositionScheme::Linear,
        rec.charge,
        opts.solver_tol,
    )?;
    let (mut fallbacks, mut skipped) = (0, 0);
    if opts.lemons {
        (fallbacks, skipped) = final_lemons(&mut particles, &rec.cells, grid)?;
    }
    Ok(Reconstruction {
        particles,
        gauss,
        lemons_fallbacks: fallbacks,
        lemons_skipped: skipped,
    })
}

/// Reconstructs every species of a checkpoint with per-species derived seeds.
pub fn reconstruct_file(file: &CheckpointFile, opts: ReconstructOptions, seed: u64) -> Result<Vec<Reconstruction>> {
    file.species
        .iter()
        .enumerate()
        .map(|(s, rec)| reconstruct_species(rec, &file.header.grid, s as u16, opts, derive_seed(seed, s as u64)))
        .collect()
}

/// Matches each cell's momentum and energy to its record after the weights
/// changed. Returns (fallbacks, skipped).
fn final_lemons(particles: &mut Vec<Particle>, records: &[CellRecord], grid: &Grid) -> Result<(usize, usize)> {
    let mut cells = bin_by_cell(particles, grid)?;
    let (mut fallbacks, mut skipped) = (0, 0);
    for (rec, ps) in records.iter().zip(cells.iter_mut()) {
        // raw cells hold the original particles
        if ps.is_empty() || rec.mode() == CellMode::Raw {
            continue;
        }
        let mut v: Vec<f64> = ps.iter().map(|p| p.v[0]).collect();
        let w: Vec<f64> = ps.iter().map(|p| p.weight).collect();
        let target = rec.moment_target().for_mode(LemonsMode::Scalar);
        match lemons_correct(&mut v, 1, &w, &target) {
            Ok(()) => {}
            Err(Error::InfeasibleTarget(_) | Error::DegenerateSample) => {
                let factor = w.iter().sum::<f64>() / rec.total_weight();
                let rescaled = target.rescaled(factor);
                v = ps.iter().map(|p| p.v[0]).collect();
                match lemons_correct(&mut v, 1, &w, &rescaled) {
                    Ok(()) => fallbacks += 1,
                    Err(Error::InfeasibleTarget(_) | Error::DegenerateSample) => {
                        skipped += 1;
                        continue;
                    }
                    Err(e) => return Err(e),
                }
            }
            Err(e) => return Err(e),
        }
        for (p, nv) in ps.iter_mut().zip(v) {
            p.v[0] = nv;
        }
    }
    *particles = cells.concat();
    Ok((fallbacks, skipped))
}
