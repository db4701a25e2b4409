//! On-disk formats: per-epoch run CSV, JSON metadata sidecar, iterate trace
//! text. Floats use 17 significant digits so every value round-trips.

use std::fmt::Write as _;
use std::io::Write as _;
use std::path::Path;

use serde::Serialize;

use crate::error::{Error, Result};
use crate::geometry::ManifoldDescriptor;
use crate::optimizer::{IterateTrace, RunResult, Schedule};
use crate::oracles::OracleStats;

pub const RUN_CSV_HEADER: &str = "epoch,proxy,value_queries,grad_queries,wallclock_ms";

pub fn format_float(v: f64) -> String {
    if v.is_nan() {
        "nan".to_string()
    } else {
        format!("{v:.16e}")
    }
}

/// Per-epoch rows. Epochs without a proxy (Stiefel runs, or `final_only`
/// traces) report `nan`. Wall-clock is written as 0 unless requested.
pub fn run_csv(result: &RunResult, record_wallclock: bool) -> String {
    let mut out = String::with_capacity(64 * (result.epochs.len() + 1));
    out.push_str(RUN_CSV_HEADER);
    out.push('\n');
    for e in &result.epochs {
        let proxy = e.proxy.as_ref().map_or(f64::NAN, |p| p.proxy);
        let ms = if record_wallclock { e.elapsed_ms } else { 0.0 };
        let _ = writeln!(
            out,
            "{},{},{},{},{}",
            e.epoch,
            format_float(proxy),
            e.stats.value_queries,
            e.stats.gradient_queries,
            format_float(ms)
        );
    }
    out
}

#[derive(Debug, Clone, Serialize)]
pub struct RunMeta {
    pub config_hash: String,
    pub label: String,
    pub seed: u64,
    pub mode: String,
    pub grad_source: String,
    pub manifold: ManifoldDescriptor,
    pub schedule: Schedule,
    pub stats: OracleStats,
    pub w_out_epoch: usize,
    /// Column-major coordinates of the output point.
    pub w_out: Vec<f64>,
}

/// Writes `bytes` to `path` through a temporary file in the same directory
/// and a rename, so readers never observe a partial file.
pub fn write_atomic(path: &Path, bytes: &[u8]) -> Result<()> {
    let dir = match path.parent() {
        Some(d) if !d.as_os_str().is_empty() => d,
        _ => Path::new("."),
    };
    std::fs::create_dir_all(dir)?;
    let mut tmp = tempfile::NamedTempFile::new_in(dir)?;
    tmp.write_all(bytes)?;
    tmp.as_file().sync_all()?;
    tmp.persist(path).map_err(|e| Error::Io(e.error))?;
    Ok(())
}

/// Parses a run CSV into `(epoch, proxy)` rows.
pub fn read_run_csv(path: &Path) -> Result<Vec<(usize, f64)>> {
    let text = std::fs::read_to_string(path)?;
    let src = path.display().to_string();
    let mut lines = text.lines().enumerate();
    match lines.next() {
        Some((_, h)) if h.trim() == RUN_CSV_HEADER => {}
        _ => return Err(Error::parse(format!("{src}:1"), format!("expected header `{RUN_CSV_HEADER}`"))),
    }
    let mut rows: Vec<(usize, f64)> = Vec::new();
    for (i, line) in lines {
        if line.trim().is_empty() {
            continue;
        }
        let loc = format!("{src}:{}", i + 1);
        let fields: Vec<&str> = line.split(',').collect();
        if fields.len() != 5 {
            return Err(Error::parse(loc, format!("expected 5 fields, found {}", fields.len())));
        }
        let epoch: usize = fields[0]
            .trim()
            .parse()
            .map_err(|_| Error::parse(loc.clone(), format!("invalid epoch {:?}", fields[0])))?;
        let proxy: f64 = fields[1]
            .trim()
            .parse()
            .map_err(|_| Error::parse(loc.clone(), format!("invalid proxy {:?}", fields[1])))?;
        if let Some(&(prev, _)) = rows.last() {
            if epoch <= prev {
                return Err(Error::parse(loc, "epochs must be strictly increasing"));
            }
        }
        rows.push((epoch, proxy));
    }
    if rows.is_empty() {
        return Err(Error::parse(src, "no data rows"));
    }
    Ok(rows)
}

fn push_coords(out: &mut String, v: &crate::geometry::Mat) {
    for c in v.iter() {
        out.push(',');
        out.push_str(&format_float(*c));
    }
}

/// Text rendering of a full iterate trace, one line per recorded quantity:
/// `x,k,t,...`, `w,k,t,...`, `d,k,t,...` (Delta), `g,k,t,...`, `s,k,t,value`
/// and `wbar,k,...`.
pub fn trace_text(trace: &IterateTrace) -> String {
    let mut out = String::new();
    for (k, e) in trace.epochs.iter().enumerate() {
        let k = k + 1;
        for (t, x) in e.xs.iter().enumerate() {
            let _ = write!(out, "x,{k},{t}");
            push_coords(&mut out, x.coords());
            out.push('\n');
        }
        for (t, d) in e.deltas.iter().enumerate() {
            let _ = write!(out, "d,{k},{t}");
            push_coords(&mut out, d.coords());
            out.push('\n');
        }
        for (t, w) in e.ws.iter().enumerate() {
            let _ = write!(out, "w,{k},{t}");
            push_coords(&mut out, w.coords());
            out.push('\n');
        }
        for (t, s) in e.s.iter().enumerate() {
            let _ = writeln!(out, "s,{k},{t},{}", format_float(*s));
        }
        for (t, g) in e.grads.iter().enumerate() {
            let _ = write!(out, "g,{k},{t}");
            push_coords(&mut out, g.coords());
            out.push('\n');
        }
        let _ = write!(out, "wbar,{k}");
        push_coords(&mut out, e.w_bar.coords());
        out.push('\n');
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn floats_round_trip() {
        for v in [0.1, 1.0 / 3.0, 5e-324, 1.7976931348623157e308, -2.5e-17] {
            let s = format_float(v);
            assert_eq!(s.parse::<f64>().unwrap(), v, "{s}");
        }
        assert_eq!(format_float(f64::NAN), "nan");
    }

    #[test]
    fn csv_reader_validates() {
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("r.csv");
        std::fs::write(&p, format!("{RUN_CSV_HEADER}\n1,0.5,0,8,0\n2,0.25,0,16,0\n")).unwrap();
        assert_eq!(read_run_csv(&p).unwrap(), vec![(1, 0.5), (2, 0.25)]);
        std::fs::write(&p, format!("{RUN_CSV_HEADER}\n2,0.5,0,8,0\n1,0.25,0,16,0\n")).unwrap();
        assert!(read_run_csv(&p).is_err());
        std::fs::write(&p, "epoch,proxy\n1,0.5\n").unwrap();
        assert!(read_run_csv(&p).is_err());
        std::fs::write(&p, format!("{RUN_CSV_HEADER}\n1,abc,0,8,0\n")).unwrap();
        assert!(read_run_csv(&p).unwrap_err().to_string().contains(":2"));
    }

    #[test]
    fn atomic_write_replaces_whole_file() {
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("sub").join("f.txt");
        write_atomic(&p, b"first").unwrap();
        write_atomic(&p, b"second").unwrap();
        assert_eq!(std::fs::read(&p).unwrap(), b"second");
        let leftovers = std::fs::read_dir(p.parent().unwrap()).unwrap().count();
        assert_eq!(leftovers, 1);
    }
}
