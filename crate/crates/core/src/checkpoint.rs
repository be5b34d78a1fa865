//! Binary checkpoint files.
//!
//! Everything is little-endian with 8-byte IEEE-754 floats. The byte layout
//! is described in `docs/format.md`; [`HEADER_BYTES`] and the record sizes
//! below are the authoritative numbers.

use std::collections::BTreeMap;
use std::fmt;
use std::path::Path;

use crate::codec::{CellPayload, CellRecord, StoredGaussian};
use crate::em::FitConfig;
use crate::error::{Error, Result};
use crate::grid::Grid;
use crate::mixture::MAX_DIM;
use crate::particle::Particle;

pub const MAGIC: [u8; 4] = *b"GMCR";
pub const FORMAT_VERSION: u32 = 1;
/// Size of the fixed file header.
pub const HEADER_BYTES: usize = 94;
/// Per-cell record header: mode/K tag (u8) plus particle count (u32).
pub const CELL_HEADER_BYTES: usize = 5;
/// Species header: charge, mass (f64) and velocity dimension (u8).
pub const SPECIES_HEADER_BYTES: usize = 17;

const DX_REL_TOL: f64 = 1e-15;

/// Simulation and fit metadata echoed in the header.
#[derive(Debug, Clone, PartialEq)]
pub struct CheckpointHeader {
    pub time: f64,
    pub step: u64,
    pub dt: f64,
    pub grid: Grid,
    pub periodic: bool,
    pub seed: u64,
    pub fit: FitConfig,
    pub min_particles: usize,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SpeciesRecord {
    pub charge: f64,
    pub mass: f64,
    pub dim: usize,
    /// Node charge density before the checkpoint.
    pub rho_target: Vec<f64>,
    /// One record per cell, in cell order.
    pub cells: Vec<CellRecord>,
}

impl SpeciesRecord {
    pub fn particle_count(&self) -> u64 {
        self.cells.iter().map(|c| c.particle_count).sum()
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct CheckpointFile {
    pub header: CheckpointHeader,
    /// Field at the cell faces, one value per cell.
    pub efield: Vec<f64>,
    pub species: Vec<SpeciesRecord>,
}

#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct CompressionStats {
    pub particles: u64,
    /// Size of a plain particle dump: position, velocity components and weight.
    pub raw_bytes: u64,
    /// Bytes of all cell records (particle data after compression).
    pub compressed_bytes: u64,
    /// Whole file, including header, field and density arrays.
    pub file_bytes: u64,
}

impl CompressionStats {
    /// `raw_bytes / compressed_bytes`, or 1 when there is nothing to compress.
    pub fn ratio(&self) -> f64 {
        if self.raw_bytes == 0 || self.compressed_bytes == 0 {
            1.0
        } else {
            self.raw_bytes as f64 / self.compressed_bytes as f64
        }
    }
}

fn upper_len(d: usize) -> usize {
    d * (d + 1) / 2
}

/// Serialized size of one cell record.
pub fn cell_record_bytes(rec: &CellRecord) -> usize {
    let d = rec.dim;
    CELL_HEADER_BYTES
        + match &rec.payload {
            CellPayload::Raw(ps) => ps.len() * (d + 2) * 8,
            CellPayload::Mixture(gs) => gs.len() * (1 + d + upper_len(d)) * 8,
        }
}

impl CheckpointFile {
    pub fn stats(&self) -> CompressionStats {
        let mut s = CompressionStats::default();
        for sp in &self.species {
            let n = sp.particle_count();
            s.particles += n;
            s.raw_bytes += n * (sp.dim as u64 + 2) * 8;
            s.compressed_bytes += sp.cells.iter().map(|c| cell_record_bytes(c) as u64).sum::<u64>();
        }
        s.file_bytes = self.encoded_len() as u64;
        s
    }

    pub fn encoded_len(&self) -> usize {
        HEADER_BYTES
            + self.efield.len() * 8
            + self
                .species
                .iter()
                .map(|sp| {
                    SPECIES_HEADER_BYTES
                        + sp.rho_target.len() * 8
                        + sp.cells.iter().map(cell_record_bytes).sum::<usize>()
                })
                .sum::<usize>()
    }

    fn validate(&self) -> Result<()> {
        let nx = self.header.grid.nx;
        if self.efield.len() != nx {
            return Err(Error::DimensionMismatch {
                expected: nx,
                found: self.efield.len(),
            });
        }
        if self.header.fit.k_max > 255 {
            return Err(Error::InvalidConfig(format!("k_max {} does not fit the format", self.header.fit.k_max)));
        }
        for sp in &self.species {
            if !(1..=MAX_DIM).contains(&sp.dim) {
                return Err(Error::InvalidConfig(format!("species dimension {} out of range", sp.dim)));
            }
            if sp.rho_target.len() != nx || sp.cells.len() != nx {
                return Err(Error::DimensionMismatch {
                    expected: nx,
                    found: if sp.rho_target.len() != nx { sp.rho_target.len() } else { sp.cells.len() },
                });
            }
            for (i, c) in sp.cells.iter().enumerate() {
                if c.cell_index != i || c.dim != sp.dim {
                    return Err(Error::InvalidConfig(format!("cell record {i} is out of order or has the wrong dimension")));
                }
                if c.particle_count > u32::MAX as u64 {
                    return Err(Error::InvalidConfig(format!("cell {i} holds more than 2^32 particles")));
                }
                match &c.payload {
                    CellPayload::Raw(ps) if ps.len() as u64 != c.particle_count => {
                        return Err(Error::InvalidConfig(format!("raw cell {i} count mismatch")));
                    }
                    CellPayload::Mixture(gs) if gs.is_empty() || gs.len() > 255 => {
                        return Err(Error::InvalidConfig(format!("cell {i} has {} Gaussians", gs.len())));
                    }
                    CellPayload::Mixture(gs)
                        if gs.iter().any(|g| g.mean.len() != sp.dim || g.covariance.len() != sp.dim * sp.dim) =>
                    {
                        return Err(Error::InvalidConfig(format!("cell {i} has a Gaussian of the wrong dimension")));
                    }
                    _ => {}
                }
            }
        }
        Ok(())
    }

    /// Serializes to bytes.
    pub fn encode(&self) -> Result<Vec<u8>> {
        self.validate()?;
        let h = &self.header;
        let mut out = Vec::with_capacity(self.encoded_len());
        out.extend_from_slice(&MAGIC);
        put_u32(&mut out, FORMAT_VERSION);
        put_f64(&mut out, h.time);
        out.extend_from_slice(&h.step.to_le_bytes());
        put_f64(&mut out, h.dt);
        put_u32(&mut out, h.grid.nx as u32);
        put_f64(&mut out, h.grid.length);
        put_f64(&mut out, h.grid.dx);
        out.push(h.periodic as u8);
        out.extend_from_slice(&h.seed.to_le_bytes());
        put_u32(&mut out, h.fit.k_max as u32);
        put_f64(&mut out, h.fit.tol);
        put_u32(&mut out, h.fit.max_iters as u32);
        out.push(h.fit.annihilate as u8);
        put_f64(&mut out, h.fit.covariance_floor);
        put_u32(&mut out, h.min_particles as u32);
        put_u32(&mut out, self.species.len() as u32);
        debug_assert_eq!(out.len(), HEADER_BYTES);

        self.efield.iter().for_each(|&e| put_f64(&mut out, e));
        for sp in &self.species {
            put_f64(&mut out, sp.charge);
            put_f64(&mut out, sp.mass);
            out.push(sp.dim as u8);
            sp.rho_target.iter().for_each(|&r| put_f64(&mut out, r));
            for c in &sp.cells {
                encode_cell(&mut out, c);
            }
        }
        debug_assert_eq!(out.len(), self.encoded_len());
        Ok(out)
    }

    pub fn decode(bytes: &[u8]) -> Result<Self> {
        let mut r = Reader { bytes, pos: 0 };
        let magic: [u8; 4] = r.take(4)?.try_into().expect("4 bytes");
        if magic != MAGIC {
            return Err(Error::BadMagic {
                expected: MAGIC,
                found: magic,
            });
        }
        let version = r.u32()?;
        if version != FORMAT_VERSION {
            return Err(Error::UnsupportedVersion {
                found: version,
                supported: FORMAT_VERSION,
            });
        }
        let time = r.f64()?;
        let step = r.u64()?;
        let dt = r.f64()?;
        let nx_at = r.pos;
        let nx = r.u32()? as usize;
        let length = r.f64()?;
        let dx_at = r.pos;
        let dx = r.f64()?;
        let mut grid = Grid::new(nx, length).map_err(|e| Error::Malformed {
            offset: nx_at,
            reason: e.to_string(),
        })?;
        if !((dx - grid.dx).abs() <= DX_REL_TOL * grid.dx) {
            return Err(Error::Malformed {
                offset: dx_at,
                reason: format!("dx = {dx} disagrees with L/nx = {}", grid.dx),
            });
        }
        grid.dx = dx;
        let periodic = r.flag()?;
        let seed = r.u64()?;
        let fit = FitConfig {
            k_max: r.u32()? as usize,
            tol: r.f64()?,
            max_iters: r.u32()? as usize,
            annihilate: r.flag()?,
            covariance_floor: r.f64()?,
            seed,
        };
        let min_particles = r.u32()? as usize;
        let n_species = r.u32()? as usize;
        let header = CheckpointHeader {
            time,
            step,
            dt,
            grid,
            periodic,
            seed,
            fit,
            min_particles,
        };

        let efield = r.f64_vec(nx)?;
        let mut species = Vec::new();
        for s in 0..n_species {
            let charge = r.f64()?;
            let mass = r.f64()?;
            let dim_at = r.pos;
            let dim = r.u8()? as usize;
            if !(1..=MAX_DIM).contains(&dim) {
                return Err(Error::Malformed {
                    offset: dim_at,
                    reason: format!("species velocity dimension {dim}"),
                });
            }
            let rho_target = r.f64_vec(nx)?;
            let cells = (0..nx)
                .map(|c| decode_cell(&mut r, c, dim, s as u16))
                .collect::<Result<Vec<_>>>()?;
            species.push(SpeciesRecord {
                charge,
                mass,
                dim,
                rho_target,
                cells,
            });
        }
        if r.pos != bytes.len() {
            return Err(Error::Malformed {
                offset: r.pos,
                reason: format!("{} trailing bytes", bytes.len() - r.pos),
            });
        }
        Ok(Self {
            header,
            efield,
            species,
        })
    }
}

fn put_u32(out: &mut Vec<u8>, v: u32) {
    out.extend_from_slice(&v.to_le_bytes());
}

fn put_f64(out: &mut Vec<u8>, v: f64) {
    out.extend_from_slice(&v.to_le_bytes());
}

fn encode_cell(out: &mut Vec<u8>, c: &CellRecord) {
    let d = c.dim;
    match &c.payload {
        CellPayload::Raw(ps) => {
            out.push(0);
            put_u32(out, ps.len() as u32);
            for p in ps {
                put_f64(out, p.x);
                p.v[..d].iter().for_each(|&v| put_f64(out, v));
                put_f64(out, p.weight);
            }
        }
        CellPayload::Mixture(gs) => {
            out.push(gs.len() as u8);
            put_u32(out, c.particle_count as u32);
            for g in gs {
                put_f64(out, g.mass);
                g.mean.iter().for_each(|&m| put_f64(out, m));
                for i in 0..d {
                    for j in i..d {
                        put_f64(out, g.covariance[i * d + j]);
                    }
                }
            }
        }
    }
}

fn decode_cell(r: &mut Reader, cell: usize, dim: usize, species: u16) -> Result<CellRecord> {
    let k = r.u8()? as usize;
    let count = r.u32()? as usize;
    let payload = if k == 0 {
        r.need(count * (dim + 2) * 8)?;
        let ps = (0..count)
            .map(|_| {
                let x = r.f64()?;
                let mut v = [0.0; MAX_DIM];
                for c in v.iter_mut().take(dim) {
                    *c = r.f64()?;
                }
                let weight = r.f64()?;
                Ok(Particle { x, v, weight, species })
            })
            .collect::<Result<Vec<_>>>()?;
        CellPayload::Raw(ps)
    } else {
        let mut gs = Vec::with_capacity(k);
        for _ in 0..k {
            let mass = r.f64()?;
            let mean = r.f64_vec(dim)?;
            let mut covariance = vec![0.0; dim * dim];
            for i in 0..dim {
                for j in i..dim {
                    let v = r.f64()?;
                    covariance[i * dim + j] = v;
                    covariance[j * dim + i] = v;
                }
            }
            gs.push(StoredGaussian { mass, mean, covariance });
        }
        CellPayload::Mixture(gs)
    };
    Ok(CellRecord {
        cell_index: cell,
        dim,
        particle_count: count as u64,
        payload,
    })
}

struct Reader<'a> {
    bytes: &'a [u8],
    pos: usize,
}

impl<'a> Reader<'a> {
    fn need(&self, n: usize) -> Result<()> {
        let left = self.bytes.len() - self.pos;
        if left < n {
            return Err(Error::Truncated {
                offset: self.bytes.len(),
                needed: n - left,
            });
        }
        Ok(())
    }

    fn take(&mut self, n: usize) -> Result<&'a [u8]> {
        self.need(n)?;
        let s = &self.bytes[self.pos..self.pos + n];
        self.pos += n;
        Ok(s)
    }

    fn u8(&mut self) -> Result<u8> {
        Ok(self.take(1)?[0])
    }

    fn flag(&mut self) -> Result<bool> {
        let at = self.pos;
        match self.u8()? {
            0 => Ok(false),
            1 => Ok(true),
            b => Err(Error::Malformed {
                offset: at,
                reason: format!("flag byte {b}"),
            }),
        }
    }

    fn u32(&mut self) -> Result<u32> {
        Ok(u32::from_le_bytes(self.take(4)?.try_into().expect("4 bytes")))
    }

    fn u64(&mut self) -> Result<u64> {
        Ok(u64::from_le_bytes(self.take(8)?.try_into().expect("8 bytes")))
    }

    fn f64(&mut self) -> Result<f64> {
        Ok(f64::from_le_bytes(self.take(8)?.try_into().expect("8 bytes")))
    }

    fn f64_vec(&mut self, n: usize) -> Result<Vec<f64>> {
        self.need(n * 8)?;
        (0..n).map(|_| self.f64()).collect()
    }
}

/// Writes the file and returns its compression accounting.
pub fn write_checkpoint(file: &CheckpointFile, path: &Path) -> Result<CompressionStats> {
    let bytes = file.encode()?;
    std::fs::write(path, &bytes).map_err(|e| Error::io(path, e))?;
    Ok(file.stats())
}

pub fn read_checkpoint(path: &Path) -> Result<CheckpointFile> {
    let bytes = std::fs::read(path).map_err(|e| Error::io(path, e))?;
    CheckpointFile::decode(&bytes)
}

/// Per-species totals recomputed from the records.
#[derive(Debug, Clone, PartialEq)]
pub struct SpeciesSummary {
    pub charge: f64,
    pub mass: f64,
    pub dim: usize,
    pub particles: u64,
    pub raw_cells: usize,
    pub mixture_cells: usize,
    /// Number of mixture cells by Gaussian count.
    pub k_histogram: BTreeMap<usize, usize>,
    /// `Σ α`.
    pub weight: f64,
    /// `Σ α v`.
    pub momentum: Vec<f64>,
    /// `Σ α |v|²`.
    pub second_moment: f64,
}

impl SpeciesSummary {
    pub fn mean_k(&self) -> f64 {
        let (n, s) = self
            .k_histogram
            .iter()
            .fold((0usize, 0usize), |(n, s), (&k, &c)| (n + c, s + k * c));
        if n == 0 {
            0.0
        } else {
            s as f64 / n as f64
        }
    }

    /// Most frequent Gaussian count among mixture cells.
    pub fn modal_k(&self) -> Option<usize> {
        self.k_histogram.iter().max_by_key(|(k, c)| (**c, std::cmp::Reverse(**k))).map(|(k, _)| *k)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Summary {
    pub header: CheckpointHeader,
    pub stats: CompressionStats,
    pub field_energy: f64,
    pub species: Vec<SpeciesSummary>,
}

pub fn summarize(file: &CheckpointFile) -> Summary {
    let species = file
        .species
        .iter()
        .map(|sp| {
            let d = sp.dim;
            let mut s = SpeciesSummary {
                charge: sp.charge,
                mass: sp.mass,
                dim: d,
                particles: sp.particle_count(),
                raw_cells: 0,
                mixture_cells: 0,
                k_histogram: BTreeMap::new(),
                weight: 0.0,
                momentum: vec![0.0; d],
                second_moment: 0.0,
            };
            for c in &sp.cells {
                match c.gaussian_count() {
                    0 => s.raw_cells += 1,
                    k => {
                        s.mixture_cells += 1;
                        *s.k_histogram.entry(k).or_default() += 1;
                    }
                }
                let t = c.moment_target();
                s.weight += c.total_weight();
                for i in 0..d {
                    s.momentum[i] += t.momentum[i];
                }
                s.second_moment += t.energy();
            }
            s
        })
        .collect();
    let dx = file.header.grid.dx;
    Summary {
        header: file.header.clone(),
        stats: file.stats(),
        field_energy: 0.5 * dx * file.efield.iter().map(|e| e * e).sum::<f64>(),
        species,
    }
}

/// Reads and summarizes a checkpoint without modifying it.
pub fn inspect(path: &Path) -> Result<Summary> {
    read_checkpoint(path).map(|f| summarize(&f))
}

impl fmt::Display for Summary {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let h = &self.header;
        writeln!(f, "format version  {FORMAT_VERSION}")?;
        writeln!(f, "time            {} (step {}, dt {})", h.time, h.step, h.dt)?;
        writeln!(
            f,
            "grid            nx={} L={} dx={} periodic={}",
            h.grid.nx, h.grid.length, h.grid.dx, h.periodic
        )?;
        writeln!(
            f,
            "fit             k_max={} tol={} max_iters={} annihilate={} floor={} min_particles={} seed={}",
            h.fit.k_max, h.fit.tol, h.fit.max_iters, h.fit.annihilate, h.fit.covariance_floor, h.min_particles, h.seed
        )?;
        writeln!(f, "field energy    {:e}", self.field_energy)?;
        writeln!(
            f,
            "size            {} bytes ({} in cell records), raw dump {} bytes",
            self.stats.file_bytes, self.stats.compressed_bytes, self.stats.raw_bytes
        )?;
        writeln!(f, "ratio           {:.2}", self.stats.ratio())?;
        for (i, s) in self.species.iter().enumerate() {
            writeln!(f, "species {i}: q={} m={} dim={} particles={}", s.charge, s.mass, s.dim, s.particles)?;
            writeln!(f, "  cells         {} mixture, {} raw", s.mixture_cells, s.raw_cells)?;
            if !s.k_histogram.is_empty() {
                let hist: Vec<String> = s.k_histogram.iter().map(|(k, c)| format!("K={k}:{c}")).collect();
                writeln!(f, "  K histogram   {}  (mean {:.3})", hist.join(" "), s.mean_k())?;
            }
            writeln!(f, "  weight        {:e}", s.weight)?;
            writeln!(f, "  momentum      {:?}", s.momentum)?;
            writeln!(f, "  sum a|v|^2    {:e}", s.second_moment)?;
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn sample_file() -> CheckpointFile {
        let grid = Grid::new(3, 2.0 * std::f64::consts::PI).unwrap();
        let raw = CellRecord::raw(
            1,
            1,
            vec![Particle::new_1d(2.5, 0.3, 0.02, 0), Particle::new_1d(3.1, -0.7, 0.02, 0)],
        );
        let gm = |i| CellRecord {
            cell_index: i,
            dim: 1,
            particle_count: 156,
            payload: CellPayload::Mixture(vec![
                StoredGaussian {
                    mass: 1.0,
                    mean: vec![0.86],
                    covariance: vec![1e-3],
                },
                StoredGaussian {
                    mass: 1.1,
                    mean: vec![-0.86],
                    covariance: vec![2e-3],
                },
            ]),
        };
        CheckpointFile {
            header: CheckpointHeader {
                time: 10.0,
                step: 50,
                dt: 0.2,
                grid,
                periodic: true,
                seed: 7,
                fit: FitConfig { seed: 7, ..FitConfig::default() },
                min_particles: 10,
            },
            efield: vec![0.1, -0.05, -0.05],
            species: vec![SpeciesRecord {
                charge: -1.0,
                mass: 1.0,
                dim: 1,
                rho_target: vec![-1.0, -0.9, -1.1],
                cells: vec![gm(0), raw, gm(2)],
            }],
        }
    }

    #[test]
    fn round_trip_is_bit_identical() {
        let f = sample_file();
        let bytes = f.encode().unwrap();
        let back = CheckpointFile::decode(&bytes).unwrap();
        assert_eq!(back, f);
        assert_eq!(back.encode().unwrap(), bytes);
    }

    #[test]
    fn sizes_add_up() {
        let f = sample_file();
        let bytes = f.encode().unwrap();
        let s = f.stats();
        assert_eq!(s.file_bytes as usize, bytes.len());
        assert_eq!(s.compressed_bytes, 2 * (5 + 48) + 5 + 2 * 24);
        assert_eq!(
            bytes.len(),
            HEADER_BYTES + 3 * 8 + SPECIES_HEADER_BYTES + 3 * 8 + s.compressed_bytes as usize
        );
        assert_eq!(s.raw_bytes, (2 * 156 + 2) * 24);
    }

    #[test]
    fn single_cell_ratio() {
        let mut f = sample_file();
        f.species[0].cells[1] = CellRecord::raw(1, 1, vec![]);
        f.species[0].cells[2] = CellRecord::raw(2, 1, vec![]);
        let s = f.stats();
        assert_eq!(s.raw_bytes, 3744);
        assert_eq!(s.compressed_bytes, 53 + 10);
        let single = 3744.0 / 53.0;
        assert!((70.0..=78.0).contains(&single));
    }

    #[test]
    fn empty_domain_ratio_is_one() {
        let mut f = sample_file();
        for (i, c) in f.species[0].cells.iter_mut().enumerate() {
            *c = CellRecord::raw(i, 1, vec![]);
        }
        let bytes = f.encode().unwrap();
        assert_eq!(CheckpointFile::decode(&bytes).unwrap(), f);
        assert_eq!(f.stats().ratio(), 1.0);
        assert_eq!(summarize(&f).species[0].mixture_cells, 0);
    }

    #[test]
    fn error_taxonomy() {
        let bytes = sample_file().encode().unwrap();
        for cut in [0, 3, 50, HEADER_BYTES + 4, bytes.len() - 1] {
            match CheckpointFile::decode(&bytes[..cut]) {
                Err(Error::Truncated { offset, .. }) => assert_eq!(offset, cut),
                other => panic!("cut {cut}: {other:?}"),
            }
        }
        let mut bad = bytes.clone();
        bad[0] = b'X';
        assert!(matches!(CheckpointFile::decode(&bad), Err(Error::BadMagic { .. })));
        let mut bad = bytes.clone();
        bad[4..8].copy_from_slice(&(FORMAT_VERSION + 1).to_le_bytes());
        assert!(matches!(
            CheckpointFile::decode(&bad),
            Err(Error::UnsupportedVersion { found: 2, supported: 1 })
        ));
        let mut bad = bytes.clone();
        bad.push(0);
        assert!(matches!(CheckpointFile::decode(&bad), Err(Error::Malformed { .. })));
        let mut bad = bytes.clone();
        let dx = 1.01 * 2.0 * std::f64::consts::PI / 3.0;
        bad[44..52].copy_from_slice(&dx.to_le_bytes());
        assert!(matches!(CheckpointFile::decode(&bad), Err(Error::Malformed { offset: 44, .. })));
    }

    #[test]
    fn summary_moments_match_records() {
        let f = sample_file();
        let s = &summarize(&f).species[0];
        assert_eq!(s.k_histogram.get(&2), Some(&2));
        assert_eq!(s.modal_k(), Some(2));
        assert_eq!(s.particles, 314);
        let w = 2.0 * 2.1 + 0.04;
        assert!((s.weight - w).abs() < 1e-14);
        let p = 2.0 * (0.86 - 1.1 * 0.86) + 0.02 * (0.3 - 0.7);
        assert!((s.momentum[0] - p).abs() < 1e-14);
        let e = 2.0 * (1.0 * (1e-3 + 0.86 * 0.86) + 1.1 * (2e-3 + 0.86 * 0.86)) + 0.02 * (0.09 + 0.49);
        assert!((s.second_moment - e).abs() < 1e-13);
    }

    #[test]
    fn file_io_round_trip() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("a.gmcr");
        let f = sample_file();
        let stats = write_checkpoint(&f, &path).unwrap();
        assert_eq!(std::fs::metadata(&path).unwrap().len(), stats.file_bytes);
        assert_eq!(read_checkpoint(&path).unwrap(), f);
        let missing = dir.path().join("nope.gmcr");
        match read_checkpoint(&missing) {
            Err(Error::Io { path, .. }) => assert_eq!(path, missing),
            other => panic!("{other:?}"),
        }
    }
}
