//! Time-history rows, CSV output and post-processing.

use std::fmt;
use std::fs::OpenOptions;
use std::io::{BufRead, BufReader, Write};
use std::path::Path;
use std::str::FromStr;

use crate::error::{Error, Result};
use crate::particle::Particle;

pub const CSV_HEADER: &str = "step,t,E_E,gauss_rms,continuity_rms,dE_total,event";

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Event {
    Init,
    Step,
    Restart,
}

impl fmt::Display for Event {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Event::Init => "init",
            Event::Step => "step",
            Event::Restart => "restart",
        })
    }
}

impl FromStr for Event {
    type Err = String;

    fn from_str(s: &str) -> std::result::Result<Self, String> {
        match s {
            "init" => Ok(Event::Init),
            "step" => Ok(Event::Step),
            "restart" => Ok(Event::Restart),
            other => Err(format!("unknown event {other:?}")),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DiagnosticsRow {
    pub step: u64,
    pub time: f64,
    /// `Σ E² Δx / 2`.
    pub field_energy: f64,
    pub gauss_rms: f64,
    pub continuity_rms: f64,
    /// Total energy change against the previous row.
    pub energy_change: f64,
    pub event: Event,
}

impl DiagnosticsRow {
    pub fn to_csv(&self) -> String {
        format!(
            "{},{},{:e},{:e},{:e},{:e},{}",
            self.step, self.time, self.field_energy, self.gauss_rms, self.continuity_rms, self.energy_change, self.event
        )
    }

    fn parse(line: &str, lineno: usize) -> Result<Self> {
        let bad = |reason: String| Error::Parse { line: lineno, reason };
        let f: Vec<&str> = line.trim().split(',').collect();
        if f.len() != 7 {
            return Err(bad(format!("expected 7 fields, found {}", f.len())));
        }
        let num = |i: usize| f[i].parse::<f64>().map_err(|e| bad(format!("field {}: {e}", i + 1)));
        Ok(Self {
            step: f[0].parse().map_err(|e| bad(format!("step: {e}")))?,
            time: num(1)?,
            field_energy: num(2)?,
            gauss_rms: num(3)?,
            continuity_rms: num(4)?,
            energy_change: num(5)?,
            event: f[6].parse().map_err(bad)?,
        })
    }
}

/// Appends rows to a CSV file, writing the header only into an empty file.
pub struct CsvSink {
    file: std::io::BufWriter<std::fs::File>,
    path: std::path::PathBuf,
}

impl CsvSink {
    pub fn open(path: &Path) -> Result<Self> {
        let file = OpenOptions::new()
            .create(true)
            .append(true)
            .open(path)
            .map_err(|e| Error::io(path, e))?;
        let empty = file.metadata().map_err(|e| Error::io(path, e))?.len() == 0;
        let mut sink = Self {
            file: std::io::BufWriter::new(file),
            path: path.to_path_buf(),
        };
        if empty {
            sink.line(CSV_HEADER)?;
        }
        Ok(sink)
    }

    fn line(&mut self, s: &str) -> Result<()> {
        writeln!(self.file, "{s}").map_err(|e| Error::io(&self.path, e))
    }

    pub fn write(&mut self, row: &DiagnosticsRow) -> Result<()> {
        self.line(&row.to_csv())
    }

    pub fn flush(&mut self) -> Result<()> {
        self.file.flush().map_err(|e| Error::io(&self.path, e))
    }
}

impl Drop for CsvSink {
    fn drop(&mut self) {
        let _ = self.file.flush();
    }
}

/// Reads a diagnostics CSV.
pub fn read_csv(path: &Path) -> Result<Vec<DiagnosticsRow>> {
    let f = std::fs::File::open(path).map_err(|e| Error::io(path, e))?;
    let mut rows = Vec::new();
    for (i, line) in BufReader::new(f).lines().enumerate() {
        let line = line.map_err(|e| Error::io(path, e))?;
        if line.trim().is_empty() || line.trim() == CSV_HEADER {
            continue;
        }
        rows.push(DiagnosticsRow::parse(&line, i + 1)?);
    }
    Ok(rows)
}

/// Least-squares slope and intercept of `y` against `x`.
pub fn linear_fit(x: &[f64], y: &[f64]) -> Option<(f64, f64)> {
    let n = x.len() as f64;
    if x.len() < 2 {
        return None;
    }
    let mx = x.iter().sum::<f64>() / n;
    let my = y.iter().sum::<f64>() / n;
    let sxy: f64 = x.iter().zip(y).map(|(a, b)| (a - mx) * (b - my)).sum();
    let sxx: f64 = x.iter().map(|a| (a - mx) * (a - mx)).sum();
    if sxx == 0.0 {
        return None;
    }
    let slope = sxy / sxx;
    Some((slope, my - slope * mx))
}

/// Growth rate of the field amplitude from a fit of `ln E_E` on
/// `[t0, t1]`. Field energy grows at twice the amplitude rate.
pub fn fit_growth_rate(rows: &[DiagnosticsRow], t0: f64, t1: f64) -> Option<f64> {
    let (t, y): (Vec<f64>, Vec<f64>) = rows
        .iter()
        .filter(|r| r.time >= t0 - 1e-9 && r.time <= t1 + 1e-9 && r.field_energy > 0.0)
        .map(|r| (r.time, r.field_energy.ln()))
        .unzip();
    linear_fit(&t, &y).map(|(s, _)| 0.5 * s)
}

/// Growth rate of the unstable root of the cold symmetric two-beam
/// dispersion relation `1 = ½[(ω−kv)⁻² + (ω+kv)⁻²]`; zero if stable.
pub fn cold_two_stream_growth_rate(k: f64, beam_speed: f64) -> f64 {
    let a2 = (k * beam_speed).powi(2);
    let omega2 = 0.5 * ((2.0 * a2 + 1.0) - (8.0 * a2 + 1.0).sqrt());
    if omega2 < 0.0 {
        (-omega2).sqrt()
    } else {
        0.0
    }
}

/// Worst deviation of `ln E_E` between two histories over `[t0, t1]`,
/// divided by the range `ln E_E` of the reference spans over all its rows.
pub fn log_curve_deviation(reference: &[DiagnosticsRow], other: &[DiagnosticsRow], t0: f64, t1: f64) -> Option<f64> {
    let logs: Vec<f64> = reference.iter().filter(|r| r.field_energy > 0.0).map(|r| r.field_energy.ln()).collect();
    let lo = logs.iter().cloned().fold(f64::INFINITY, f64::min);
    let hi = logs.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    let range = hi - lo;
    if !(range > 0.0) {
        return None;
    }
    let mut worst: Option<f64> = None;
    for r in other.iter().filter(|r| r.time >= t0 - 1e-9 && r.time <= t1 + 1e-9) {
        let Some(u) = reference.iter().find(|u| (u.time - r.time).abs() < 1e-9 && u.event != Event::Restart) else {
            continue;
        };
        if !(u.field_energy > 0.0 && r.field_energy > 0.0) {
            return Some(f64::INFINITY);
        }
        let d = (u.field_energy.ln() - r.field_energy.ln()).abs() / range;
        worst = Some(worst.map_or(d, |w: f64| w.max(d)));
    }
    worst
}

/// Weighted 2D histogram of phase space, normalized to unit total.
#[derive(Debug, Clone, PartialEq)]
pub struct PhaseHistogram {
    pub nx: usize,
    pub nv: usize,
    pub v_range: (f64, f64),
    pub bins: Vec<f64>,
}

impl PhaseHistogram {
    pub fn build(particles: &[Particle], length: f64, nx: usize, nv: usize, v_range: (f64, f64)) -> Self {
        let mut bins = vec![0.0; nx * nv];
        let (vlo, vhi) = v_range;
        let mut total = 0.0;
        for p in particles {
            let i = ((p.x / length * nx as f64) as usize).min(nx - 1);
            let f = (p.v[0] - vlo) / (vhi - vlo);
            let j = ((f * nv as f64).floor().max(0.0) as usize).min(nv - 1);
            bins[i * nv + j] += p.weight;
            total += p.weight;
        }
        if total > 0.0 {
            bins.iter_mut().for_each(|b| *b /= total);
        }
        Self { nx, nv, v_range, bins }
    }

    /// Total-variation distance, in `[0, 1]`.
    pub fn distance(&self, other: &Self) -> f64 {
        0.5 * self.bins.iter().zip(&other.bins).map(|(a, b)| (a - b).abs()).sum::<f64>()
    }
}

/// Writes a phase-space dump as CSV (`x,v,species`).
pub fn write_phase_dump(path: &Path, particles: &[Particle]) -> Result<()> {
    let mut out = String::with_capacity(particles.len() * 48);
    out.push_str("x,v,species\n");
    for p in particles {
        out.push_str(&format!("{:e},{:e},{}\n", p.x, p.v[0], p.species));
    }
    std::fs::write(path, out).map_err(|e| Error::io(path, e))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn row(step: u64, t: f64, ee: f64) -> DiagnosticsRow {
        DiagnosticsRow {
            step,
            time: t,
            field_energy: ee,
            gauss_rms: 1e-15,
            continuity_rms: 2e-16,
            energy_change: -3e-14,
            event: Event::Step,
        }
    }

    #[test]
    fn csv_round_trip_and_append() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("d.csv");
        {
            let mut s = CsvSink::open(&path).unwrap();
            s.write(&row(0, 0.0, 1e-8)).unwrap();
        }
        {
            let mut s = CsvSink::open(&path).unwrap();
            s.write(&DiagnosticsRow {
                event: Event::Restart,
                ..row(1, 0.2, 2e-8)
            })
            .unwrap();
        }
        let text = std::fs::read_to_string(&path).unwrap();
        assert_eq!(text.lines().filter(|l| *l == CSV_HEADER).count(), 1);
        let rows = read_csv(&path).unwrap();
        assert_eq!(rows.len(), 2);
        assert_eq!(rows[0], row(0, 0.0, 1e-8));
        assert_eq!(rows[1].event, Event::Restart);
    }

    #[test]
    fn malformed_csv_names_the_line() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("d.csv");
        std::fs::write(&path, format!("{CSV_HEADER}\n0,0,1,1,1,1,step\n1,0.2,x,1,1,1,step\n")).unwrap();
        assert!(matches!(read_csv(&path), Err(Error::Parse { line: 3, .. })));
    }

    #[test]
    fn growth_fit_recovers_exponential() {
        let rows: Vec<_> = (0..100).map(|i| row(i, i as f64 * 0.2, 1e-9 * (0.54 * i as f64 * 0.2).exp())).collect();
        let g = fit_growth_rate(&rows, 3.0, 9.0).unwrap();
        assert!((g - 0.27).abs() < 1e-12);
    }

    fn bisect_growth(k: f64, vb: f64) -> f64 {
        // with ω = iγ the relation reads (a² − γ²) = (a² + γ²)²
        let a2 = (k * vb).powi(2);
        let f = |g: f64| (a2 - g * g) - (a2 + g * g).powi(2);
        let (mut lo, mut hi) = (1e-12, 1.0);
        for _ in 0..200 {
            let mid = 0.5 * (lo + hi);
            if (f(mid) > 0.0) == (f(lo) > 0.0) {
                lo = mid;
            } else {
                hi = mid;
            }
        }
        lo
    }

    #[test]
    fn closed_form_matches_root_finder() {
        for vb in [0.3, 0.6, 3f64.sqrt() / 2.0, 0.95] {
            let a = cold_two_stream_growth_rate(1.0, vb);
            let b = bisect_growth(1.0, vb);
            assert!((a - b).abs() < 1e-10, "{vb}: {a} vs {b}");
        }
        assert!((cold_two_stream_growth_rate(1.0, 3f64.sqrt() / 2.0) - 0.270).abs() < 1e-3);
        assert_eq!(cold_two_stream_growth_rate(2.0, 3f64.sqrt() / 2.0), 0.0);
    }

    #[test]
    fn log_deviation() {
        let a: Vec<_> = (0..=100).map(|i| row(i, i as f64 * 0.2, (0.5 * i as f64 * 0.2).exp())).collect();
        assert_eq!(log_curve_deviation(&a, &a, 10.0, 20.0), Some(0.0));
        let b: Vec<_> = a.iter().map(|r| DiagnosticsRow { field_energy: r.field_energy * 2.0, ..*r }).collect();
        let d = log_curve_deviation(&a, &b, 10.0, 20.0).unwrap();
        assert!((d - 2f64.ln() / 10.0).abs() < 1e-12);
    }

    #[test]
    fn histogram_distance() {
        let p = |x: f64, v: f64| Particle::new_1d(x, v, 1.0, 0);
        let a = PhaseHistogram::build(&[p(0.1, 0.5), p(0.6, -0.5)], 1.0, 2, 2, (-1.0, 1.0));
        let b = PhaseHistogram::build(&[p(0.1, 0.5), p(0.6, 0.5)], 1.0, 2, 2, (-1.0, 1.0));
        assert_eq!(a.distance(&a), 0.0);
        assert!((a.distance(&b) - 0.5).abs() < 1e-15);
    }
}
