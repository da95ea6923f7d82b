use std::fmt::Write as _;
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use super::histogram::Histogram;
use super::{RunOutput, RunRecord};
use crate::error::{invalid, Error, Result};

/// One CSV row.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CsvBin {
    pub bin_lo: f64,
    pub bin_hi: f64,
    pub count: u64,
}

fn csv_err(e: csv::Error) -> Error {
    Error::Schema(format!("histogram csv: {e}"))
}

pub fn write_jsonl(path: &Path, records: &[RunRecord]) -> Result<()> {
    let mut w = BufWriter::new(std::fs::File::create(path)?);
    for r in records {
        serde_json::to_writer(&mut w, r)?;
        w.write_all(b"\n")?;
    }
    w.flush()?;
    Ok(())
}

pub fn write_histogram_csv(path: &Path, h: &Histogram) -> Result<()> {
    let mut w = csv::Writer::from_path(path).map_err(csv_err)?;
    for (bin_lo, bin_hi, count) in h.bins() {
        w.serialize(CsvBin { bin_lo, bin_hi, count }).map_err(csv_err)?;
    }
    w.flush()?;
    Ok(())
}

pub fn read_histogram_csv(path: &Path) -> Result<Vec<CsvBin>> {
    let mut r = csv::Reader::from_path(path).map_err(csv_err)?;
    r.deserialize().map(|row| row.map_err(csv_err)).collect()
}

/// Writes records, summary, CSV and (if requested) SVG; returns the paths written.
pub fn persist_run(out: &RunOutput, dir: &Path, stem: &str, svg: bool) -> Result<Vec<PathBuf>> {
    std::fs::create_dir_all(dir)?;
    let mut written = Vec::new();
    let path = dir.join(format!("{stem}.jsonl"));
    write_jsonl(&path, &out.records)?;
    written.push(path);
    let path = dir.join(format!("{stem}.summary.json"));
    std::fs::write(&path, out.summary.to_json()? + "\n")?;
    written.push(path);
    let path = dir.join(format!("{stem}.csv"));
    write_histogram_csv(&path, &out.summary.histogram)?;
    written.push(path);
    if svg {
        let h = &out.summary.histogram;
        let bins: Vec<CsvBin> = h.bins().map(|(bin_lo, bin_hi, count)| CsvBin { bin_lo, bin_hi, count }).collect();
        let title = format!(
            "{} N={} {}",
            out.summary.config.inequality.label(),
            out.summary.config.n_qubits,
            out.summary.config.ensemble.label()
        );
        let path = dir.join(format!("{stem}.svg"));
        std::fs::write(&path, render_svg(&bins, Some(h.classical_bound), Some(h.quantum_bound), &title)?)?;
        written.push(path);
    }
    Ok(written)
}

fn escape(s: &str) -> String {
    s.replace('&', "&amp;").replace('<', "&lt;").replace('>', "&gt;")
}

/// Bar chart of normalized counts with dashed vertical bound markers.
pub fn render_svg(bins: &[CsvBin], classical: Option<f64>, quantum: Option<f64>, title: &str) -> Result<String> {
    if bins.is_empty() {
        return Err(invalid("nothing to plot"));
    }
    let (w, h, ml, mr, mt, mb) = (640.0, 400.0, 60.0, 20.0, 40.0, 50.0);
    let lo = bins.iter().map(|b| b.bin_lo).fold(f64::INFINITY, f64::min);
    let hi = bins
        .iter()
        .map(|b| b.bin_hi)
        .chain(classical)
        .chain(quantum)
        .fold(f64::NEG_INFINITY, f64::max);
    if !(hi > lo) {
        return Err(invalid("degenerate plot range"));
    }
    let total: u64 = bins.iter().map(|b| b.count).sum();
    let frac = |c: u64| if total == 0 { 0.0 } else { c as f64 / total as f64 };
    let ymax = bins.iter().map(|b| frac(b.count)).fold(0.0, f64::max).max(1e-12);
    let x = |v: f64| ml + (v - lo) / (hi - lo) * (w - ml - mr);
    let y = |f: f64| h - mb - f / ymax * (h - mt - mb);

    let mut s = String::new();
    let _ = writeln!(s, r#"<svg xmlns="http://www.w3.org/2000/svg" width="{w}" height="{h}" viewBox="0 0 {w} {h}">"#);
    let _ = writeln!(s, r#"<rect width="100%" height="100%" fill="white"/>"#);
    let _ = writeln!(s, r#"<text x="{}" y="24" text-anchor="middle" font-family="sans-serif" font-size="16">{}</text>"#, w / 2.0, escape(title));
    for b in bins {
        let (x0, x1, y0) = (x(b.bin_lo), x(b.bin_hi), y(frac(b.count)));
        let _ = writeln!(
            s,
            r##"<rect x="{x0:.2}" y="{y0:.2}" width="{:.2}" height="{:.2}" fill="#4a7ab7" stroke="#2b4a70" stroke-width="0.5"/>"##,
            (x1 - x0).max(0.0),
            (h - mb - y0).max(0.0)
        );
    }
    let _ = writeln!(s, r#"<line x1="{ml}" y1="{}" x2="{}" y2="{}" stroke="black"/>"#, h - mb, w - mr, h - mb);
    let _ = writeln!(s, r#"<line x1="{ml}" y1="{mt}" x2="{ml}" y2="{}" stroke="black"/>"#, h - mb);
    for k in 0..=5 {
        let v = lo + (hi - lo) * k as f64 / 5.0;
        let _ = writeln!(s, r#"<text x="{:.2}" y="{}" text-anchor="middle" font-family="sans-serif" font-size="11">{v:.2}</text>"#, x(v), h - mb + 16.0);
        let f = ymax * k as f64 / 5.0;
        let _ = writeln!(s, r#"<text x="{}" y="{:.2}" text-anchor="end" font-family="sans-serif" font-size="11">{f:.3}</text>"#, ml - 6.0, y(f) + 4.0);
    }
    let _ = writeln!(s, r#"<text x="{}" y="{}" text-anchor="middle" font-family="sans-serif" font-size="12">maximal violation</text>"#, w / 2.0, h - 10.0);
    for (v, color, label) in [(classical, "#c0392b", "classical"), (quantum, "#27ae60", "quantum")] {
        if let Some(v) = v {
            let _ = writeln!(
                s,
                r#"<line x1="{0:.2}" y1="{mt}" x2="{0:.2}" y2="{1}" stroke="{color}" stroke-width="1.5" stroke-dasharray="6,4"><title>{label} bound {v}</title></line>"#,
                x(v),
                h - mb
            );
        }
    }
    s.push_str("</svg>\n");
    Ok(s)
}
