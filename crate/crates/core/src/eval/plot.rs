//! CSV and SVG export of recall curves.

use std::fmt::Write as _;
use std::io::Write;
use std::path::Path;

use crate::error::{Error, Result};

/// Recall columns sharing the rank axis `k = 1..=len`.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct RecallTable {
    pub columns: Vec<(String, Vec<f64>)>,
}

impl RecallTable {
    pub fn push(&mut self, name: impl Into<String>, curve: Vec<f64>) -> Result<()> {
        if let Some((_, first)) = self.columns.first() {
            if first.len() != curve.len() {
                return Err(Error::DimensionMismatch("recall curves differ in length".into()));
            }
        }
        self.columns.push((name.into(), curve));
        Ok(())
    }

    pub fn ranks(&self) -> usize {
        self.columns.first().map_or(0, |c| c.1.len())
    }
}

pub fn write_csv<W: Write>(w: W, table: &RecallTable) -> Result<()> {
    let mut out = csv::Writer::from_writer(w);
    let header: Vec<&str> = std::iter::once("k").chain(table.columns.iter().map(|c| c.0.as_str())).collect();
    out.write_record(&header).map_err(csv_error)?;
    for k in 0..table.ranks() {
        let row: Vec<String> =
            std::iter::once((k + 1).to_string()).chain(table.columns.iter().map(|c| format!("{:.6}", c.1[k]))).collect();
        out.write_record(&row).map_err(csv_error)?;
    }
    out.flush()?;
    Ok(())
}

fn csv_error(e: csv::Error) -> Error {
    Error::Io(std::io::Error::other(e))
}

const COLORS: [&str; 6] = ["#1f77b4", "#d62728", "#2ca02c", "#ff7f0e", "#9467bd", "#8c564b"];

/// Line chart of recall against rank.
pub fn write_svg(path: &Path, table: &RecallTable) -> Result<()> {
    let (w, h, m) = (640.0, 420.0, 50.0);
    let n = table.ranks().max(2);
    let x = |k: usize| m + (w - 2.0 * m) * (k as f64 - 1.0) / (n as f64 - 1.0);
    let y = |r: f64| h - m - (h - 2.0 * m) * r;
    let mut s = String::new();
    let _ = writeln!(s, r#"<svg xmlns="http://www.w3.org/2000/svg" width="{w}" height="{h}">"#);
    let _ = writeln!(s, r#"<rect width="100%" height="100%" fill="white"/>"#);
    let _ = writeln!(
        s,
        r#"<path d="M{m} {m} L{m} {b} L{r} {b}" stroke="black" fill="none"/>"#,
        b = h - m,
        r = w - m
    );
    for t in [0.0, 0.25, 0.5, 0.75, 1.0] {
        let _ = writeln!(s, r#"<text x="{}" y="{:.1}" font-size="11" text-anchor="end">{t}</text>"#, m - 6.0, y(t) + 4.0);
    }
    let _ = writeln!(s, r#"<text x="{}" y="{}" font-size="12" text-anchor="middle">rank k</text>"#, w / 2.0, h - 12.0);
    let _ = writeln!(s, r#"<text x="{}" y="{}" font-size="11" text-anchor="middle">{n}</text>"#, x(n), h - m + 16.0);
    for (i, (name, c)) in table.columns.iter().enumerate() {
        let color = COLORS[i % COLORS.len()];
        let pts: Vec<String> = c.iter().enumerate().map(|(k, r)| format!("{:.2},{:.2}", x(k + 1), y(*r))).collect();
        let _ = writeln!(s, r#"<polyline points="{}" stroke="{color}" fill="none" stroke-width="1.5"/>"#, pts.join(" "));
        let ly = m + 16.0 * i as f64;
        let _ = writeln!(s, r#"<text x="{}" y="{ly}" font-size="12" fill="{color}">{name}</text>"#, w - m - 140.0);
    }
    s.push_str("</svg>\n");
    std::fs::write(path, s)?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn csv_layout() {
        let mut t = RecallTable::default();
        t.push("a", vec![0.5, 1.0]).unwrap();
        t.push("b", vec![0.25, 1.0]).unwrap();
        assert!(t.push("c", vec![1.0]).is_err());
        let mut buf = Vec::new();
        write_csv(&mut buf, &t).unwrap();
        assert_eq!(String::from_utf8(buf).unwrap(), "k,a,b\n1,0.500000,0.250000\n2,1.000000,1.000000\n");
    }

    #[test]
    fn svg_has_one_line_per_column() {
        let dir = tempfile::tempdir().unwrap();
        let mut t = RecallTable::default();
        t.push("a", vec![0.1, 0.4, 1.0]).unwrap();
        t.push("b", vec![0.2, 0.3, 1.0]).unwrap();
        let p = dir.path().join("r.svg");
        write_svg(&p, &t).unwrap();
        let s = std::fs::read_to_string(p).unwrap();
        assert_eq!(s.matches("<polyline").count(), 2);
    }
}
