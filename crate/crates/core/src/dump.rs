//! Particle dump files for the standalone codec path.
//!
//! CSV: header `x,v,alpha,species`, one particle per line.
//! Binary: magic `GMPD`, version u32, count u64, then per particle
//! x, v, alpha (f64) and species (u16), all little-endian.

use std::io::Write;
use std::path::Path;

use crate::error::{Error, Result};
use crate::particle::Particle;

pub const CSV_HEADER: &str = "x,v,alpha,species";
pub const MAGIC: [u8; 4] = *b"GMPD";
pub const VERSION: u32 = 1;
const RECORD_BYTES: usize = 26;
const HEADER_BYTES: usize = 16;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum DumpFormat {
    Csv,
    Binary,
}

impl DumpFormat {
    /// Binary for `.bin`/`.gmpd` extensions, CSV otherwise.
    pub fn from_path(path: &Path) -> Self {
        match path.extension().and_then(|e| e.to_str()) {
            Some("bin") | Some("gmpd") => DumpFormat::Binary,
            _ => DumpFormat::Csv,
        }
    }
}

pub fn encode_csv(particles: &[Particle]) -> String {
    let mut out = String::with_capacity(16 + particles.len() * 64);
    out.push_str(CSV_HEADER);
    out.push('\n');
    for p in particles {
        // `{:?}` prints the shortest string that round-trips exactly
        out.push_str(&format!("{:?},{:?},{:?},{}\n", p.x, p.v[0], p.weight, p.species));
    }
    out
}

pub fn parse_csv(text: &str) -> Result<Vec<Particle>> {
    let mut lines = text.lines().enumerate();
    match lines.next() {
        Some((_, h)) if h.trim() == CSV_HEADER => {}
        Some((_, h)) => {
            return Err(Error::Parse {
                line: 1,
                reason: format!("expected header {CSV_HEADER:?}, found {:?}", h.trim()),
            })
        }
        None => {
            return Err(Error::Parse {
                line: 1,
                reason: "empty file".into(),
            })
        }
    }
    let mut out = Vec::new();
    for (i, line) in lines {
        let line = line.trim();
        if line.is_empty() {
            continue;
        }
        let bad = |reason: String| Error::Parse { line: i + 1, reason };
        let f: Vec<&str> = line.split(',').collect();
        if f.len() != 4 {
            return Err(bad(format!("expected 4 fields, found {}", f.len())));
        }
        let num = |k: usize, name: &str| -> Result<f64> {
            let v: f64 = f[k].trim().parse().map_err(|e| bad(format!("{name}: {e}")))?;
            if !v.is_finite() {
                return Err(bad(format!("{name} is not finite")));
            }
            Ok(v)
        };
        let species = f[3].trim().parse::<u16>().map_err(|e| bad(format!("species: {e}")))?;
        out.push(Particle::new_1d(num(0, "x")?, num(1, "v")?, num(2, "alpha")?, species));
    }
    Ok(out)
}

pub fn encode_binary(particles: &[Particle]) -> Vec<u8> {
    let mut out = Vec::with_capacity(HEADER_BYTES + particles.len() * RECORD_BYTES);
    out.extend_from_slice(&MAGIC);
    out.extend_from_slice(&VERSION.to_le_bytes());
    out.extend_from_slice(&(particles.len() as u64).to_le_bytes());
    for p in particles {
        out.extend_from_slice(&p.x.to_le_bytes());
        out.extend_from_slice(&p.v[0].to_le_bytes());
        out.extend_from_slice(&p.weight.to_le_bytes());
        out.extend_from_slice(&p.species.to_le_bytes());
    }
    out
}

pub fn decode_binary(bytes: &[u8]) -> Result<Vec<Particle>> {
    if bytes.len() < HEADER_BYTES {
        return Err(Error::Truncated {
            offset: bytes.len(),
            needed: HEADER_BYTES - bytes.len(),
        });
    }
    let magic: [u8; 4] = bytes[..4].try_into().expect("4 bytes");
    if magic != MAGIC {
        return Err(Error::BadMagic { expected: MAGIC, found: magic });
    }
    let version = u32::from_le_bytes(bytes[4..8].try_into().expect("4 bytes"));
    if version != VERSION {
        return Err(Error::UnsupportedVersion {
            found: version,
            supported: VERSION,
        });
    }
    let n = u64::from_le_bytes(bytes[8..16].try_into().expect("8 bytes")) as usize;
    let need = n.checked_mul(RECORD_BYTES).and_then(|b| b.checked_add(HEADER_BYTES)).ok_or(Error::Malformed {
        offset: 8,
        reason: format!("particle count {n} overflows"),
    })?;
    if bytes.len() < need {
        return Err(Error::Truncated {
            offset: bytes.len(),
            needed: need - bytes.len(),
        });
    }
    if bytes.len() > need {
        return Err(Error::Malformed {
            offset: need,
            reason: format!("{} trailing bytes", bytes.len() - need),
        });
    }
    let f = |o: usize| f64::from_le_bytes(bytes[o..o + 8].try_into().expect("8 bytes"));
    Ok((0..n)
        .map(|i| {
            let o = HEADER_BYTES + i * RECORD_BYTES;
            let species = u16::from_le_bytes(bytes[o + 24..o + 26].try_into().expect("2 bytes"));
            Particle::new_1d(f(o), f(o + 8), f(o + 16), species)
        })
        .collect())
}

/// Reads a dump, detecting the binary form by its magic bytes.
pub fn read_dump(path: &Path) -> Result<Vec<Particle>> {
    let bytes = std::fs::read(path).map_err(|e| Error::io(path, e))?;
    if bytes.starts_with(&MAGIC) {
        decode_binary(&bytes)
    } else {
        let text = String::from_utf8(bytes).map_err(|e| Error::Malformed {
            offset: e.utf8_error().valid_up_to(),
            reason: "not UTF-8 text".into(),
        })?;
        parse_csv(&text)
    }
}

pub fn write_dump(path: &Path, particles: &[Particle], format: DumpFormat) -> Result<()> {
    let bytes = match format {
        DumpFormat::Csv => encode_csv(particles).into_bytes(),
        DumpFormat::Binary => encode_binary(particles),
    };
    let mut f = std::fs::File::create(path).map_err(|e| Error::io(path, e))?;
    f.write_all(&bytes).map_err(|e| Error::io(path, e))
}
