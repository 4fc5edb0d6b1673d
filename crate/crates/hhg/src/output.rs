//! CSV writers for every artifact the commands produce.

use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::Path;

use hhg_core::trajectory::{PathPoint, Segment};
use hhg_core::Complex64;

pub type CsvResult = Result<(), csv::Error>;

/// Shortest round-trip text form, so identical values give identical bytes.
pub fn num(v: f64) -> String {
    format!("{v:e}")
}

pub fn write_rows<I>(path: &Path, header: &[&str], rows: I) -> CsvResult
where
    I: IntoIterator<Item = Vec<String>>,
{
    let mut w = csv::Writer::from_path(path)?;
    w.write_record(header)?;
    for r in rows {
        w.write_record(&r)?;
    }
    w.flush()?;
    Ok(())
}

/// `(x, Re Psi, Im Psi, |Psi|)`.
pub fn write_wavefunction(path: &Path, x: &[f64], psi: &[Complex64]) -> CsvResult {
    let rows = x.iter().zip(psi).map(|(x, v)| vec![num(*x), num(v.re), num(v.im), num(v.norm())]);
    write_rows(path, &["x", "re_psi", "im_psi", "abs_psi"], rows)
}

/// `(t, a)`.
pub fn write_series(path: &Path, t: &[f64], a: &[f64]) -> CsvResult {
    write_rows(path, &["t", "a"], t.iter().zip(a).map(|(t, a)| vec![num(*t), num(*a)]))
}

/// `(s, Re t, Im t, Re q, Im q, Re p, Im p, sheet_index)`.
pub fn write_path(path: &Path, points: &[PathPoint]) -> CsvResult {
    let rows = points.iter().map(|p| {
        vec![num(p.s), num(p.t.re), num(p.t.im), num(p.q.re), num(p.q.im), num(p.p.re), num(p.p.im), p.sheet_index.to_string()]
    });
    write_rows(path, &["s", "re_t", "im_t", "re_q", "im_q", "re_p", "im_p", "sheet_index"], rows)
}

/// One row per segment: kind, end points and, for loops, circle data.
pub fn write_contour(path: &Path, segments: &[Segment]) -> CsvResult {
    let rows = segments.iter().enumerate().map(|(k, seg)| {
        let (a, b) = (seg.start(), seg.end());
        let mut row = vec![k.to_string(), String::new(), num(a.re), num(a.im), num(b.re), num(b.im)];
        match seg {
            Segment::Line { .. } => {
                row[1] = "line".into();
                row.extend([String::new(), String::new(), String::new(), String::new(), String::new()]);
            }
            Segment::Loop { center, radius, turns, direction, .. } => {
                row[1] = "loop".into();
                row.extend([num(center.re), num(center.im), num(*radius), turns.to_string(), direction.to_string()]);
            }
        }
        row
    });
    write_rows(
        path,
        &["index", "kind", "re_start", "im_start", "re_end", "im_end", "re_center", "im_center", "radius", "turns", "direction"],
        rows,
    )
}

/// `key = value` lines.
pub fn write_summary(path: &Path, entries: &[(String, String)]) -> std::io::Result<()> {
    let mut w = BufWriter::new(File::create(path)?);
    for (k, v) in entries {
        writeln!(w, "{k} = {v}")?;
    }
    w.flush()
}
