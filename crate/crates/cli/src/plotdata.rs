//! Two-column `.dat` files from a report CSV: h vs ERR, h vs M, level vs efficiency.

use std::fs;
use std::path::{Path, PathBuf};

use anyhow::{bail, Context};

fn column(header: &[&str], name: &str) -> anyhow::Result<usize> {
    header
        .iter()
        .position(|h| *h == name)
        .with_context(|| format!("column '{name}' missing"))
}

/// `(file suffix, x column, y column)` for each emitted series.
const SERIES: [(&str, &str, &str); 3] = [
    ("h_err", "h", "ERR_total"),
    ("h_majorant", "h", "M_total"),
    ("level_efficiency", "level", "efficiency"),
];

/// Returns the series as `(suffix, body)`; rows with an empty cell are skipped.
pub fn series(csv: &str) -> anyhow::Result<Vec<(&'static str, String)>> {
    let mut lines = csv.lines();
    let header: Vec<&str> = lines.next().context("empty CSV")?.split(',').collect();
    let rows: Vec<Vec<&str>> = lines.filter(|l| !l.is_empty()).map(|l| l.split(',').collect()).collect();
    if rows.iter().any(|r| r.len() != header.len()) {
        bail!("ragged CSV: rows must have {} fields", header.len());
    }
    let mut out = Vec::new();
    for (suffix, x, y) in SERIES {
        let (ix, iy) = (column(&header, x)?, column(&header, y)?);
        let mut body = format!("# {x} {y}\n");
        for r in &rows {
            if !r[ix].is_empty() && !r[iy].is_empty() {
                body.push_str(&format!("{} {}\n", r[ix], r[iy]));
            }
        }
        out.push((suffix, body));
    }
    Ok(out)
}

/// Writes `<stem>_<series>.dat` next to the CSV, or into `out_dir`.
pub fn write_plotdata(csv_path: &Path, out_dir: Option<&Path>) -> anyhow::Result<Vec<PathBuf>> {
    let text = fs::read_to_string(csv_path).with_context(|| format!("reading {}", csv_path.display()))?;
    let stem = csv_path.file_stem().and_then(|s| s.to_str()).unwrap_or("report");
    let dir = out_dir
        .map(Path::to_path_buf)
        .unwrap_or_else(|| csv_path.parent().unwrap_or(Path::new(".")).to_path_buf());
    fs::create_dir_all(&dir)?;
    let mut files = Vec::new();
    for (suffix, body) in series(&text)? {
        let p = dir.join(format!("{stem}_{suffix}.dat"));
        fs::write(&p, body).with_context(|| format!("writing {}", p.display()))?;
        files.push(p);
    }
    Ok(files)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn extracts_three_series() {
        let csv = "level,h,dofs,ERR_total,M_total,efficiency,M1:a\n0,0.5,1,2e0,2e0,1e0,2e0\n1,0.25,3,,5e-1,,5e-1\n";
        let s = series(csv).unwrap();
        assert_eq!(s[0], ("h_err", "# h ERR_total\n0.5 2e0\n".to_string()));
        assert_eq!(s[1].1, "# h M_total\n0.5 2e0\n0.25 5e-1\n");
        assert_eq!(s[2].1, "# level efficiency\n0 1e0\n");
    }

    #[test]
    fn rejects_foreign_csv() {
        assert!(series("a,b\n1,2\n").is_err());
        assert!(series("").is_err());
        assert!(series("level,h,dofs,ERR_total,M_total,efficiency\n1,2\n").is_err());
    }
}
