use std::fmt::Write as _;

use super::{efficiency_index, Breakdown, Indicators};
use crate::coefficients::ValidationReport;

/// One mesh level of a refinement study.
#[derive(Clone, Debug, PartialEq)]
pub struct LevelRow {
    pub level: usize,
    pub h: f64,
    pub dofs: usize,
    pub majorant: Breakdown,
    pub error: Option<Breakdown>,
}

impl LevelRow {
    pub fn efficiency(&self) -> Option<f64> {
        self.error.as_ref().map(|e| efficiency_index(self.majorant.total, e.total))
    }
}

/// Results of one theorem over a sequence of levels.
#[derive(Clone, Debug, PartialEq)]
pub struct ErrorReport {
    pub title: String,
    pub rows: Vec<LevelRow>,
    /// Indicators on the finest level.
    pub indicators: Option<Indicators>,
    /// Finest-level majorant over the weighted source norm.
    pub normalized: Option<f64>,
    pub validation: Vec<ValidationReport>,
}

fn num(v: f64) -> String {
    format!("{v:.16e}")
}

impl ErrorReport {
    pub fn new(title: &str) -> ErrorReport {
        ErrorReport {
            title: title.to_string(),
            rows: Vec::new(),
            indicators: None,
            normalized: None,
            validation: Vec::new(),
        }
    }

    /// Header `level,h,dofs,ERR_total,M_total,efficiency` followed by one column per term.
    pub fn to_csv(&self) -> String {
        let mut out = String::from("level,h,dofs,ERR_total,M_total,efficiency");
        if let Some(first) = self.rows.first() {
            for (n, _) in &first.majorant.terms {
                write!(out, ",{}:{n}", first.majorant.identity).unwrap();
            }
            if let Some(e) = &first.error {
                for (n, _) in &e.terms {
                    write!(out, ",{}:{n}", e.identity).unwrap();
                }
            }
        }
        out.push('\n');
        for r in &self.rows {
            let err = r.error.as_ref().map(|e| num(e.total)).unwrap_or_default();
            let eff = r.efficiency().map(num).unwrap_or_default();
            write!(out, "{},{},{},{err},{},{eff}", r.level, num(r.h), r.dofs, num(r.majorant.total)).unwrap();
            for (_, v) in &r.majorant.terms {
                write!(out, ",{}", num(*v)).unwrap();
            }
            if let Some(e) = &r.error {
                for (_, v) in &e.terms {
                    write!(out, ",{}", num(*v)).unwrap();
                }
            }
            out.push('\n');
        }
        out
    }

    pub fn to_text(&self) -> String {
        let mut out = format!("== {} ==\n", self.title);
        for v in &self.validation {
            write!(out, "{v}").unwrap();
        }
        for r in &self.rows {
            writeln!(out, "level {} (h = {:.6e}, dofs = {})", r.level, r.h, r.dofs).unwrap();
            write!(out, "{}", r.majorant).unwrap();
            if let Some(e) = &r.error {
                write!(out, "{e}").unwrap();
            }
            if let Some(eff) = r.efficiency() {
                writeln!(out, "efficiency = {eff:.16e}").unwrap();
            }
        }
        if let Some(n) = self.normalized {
            writeln!(out, "normalized majorant = {n:.16e}").unwrap();
        }
        if let Some(ind) = &self.indicators {
            let worst = ind
                .e_sq
                .as_ref()
                .map(|e| {
                    ind.eta_sq
                        .iter()
                        .zip(e)
                        .map(|(a, b)| a / b.max(1e-30))
                        .fold(0.0, f64::max)
                })
                .unwrap_or(f64::NAN);
            writeln!(
                out,
                "indicators: {} cells, sum eta^2 = {:.16e}, max eta^2/e^2 = {worst:.6}",
                ind.eta_sq.len(),
                ind.eta_total()
            )
            .unwrap();
        }
        out
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::functionals::NormIdentity;

    #[test]
    fn csv_layout() {
        let mut r = ErrorReport::new("THM31");
        r.rows.push(LevelRow {
            level: 0,
            h: 0.5,
            dofs: 3,
            majorant: Breakdown::new(NormIdentity::M1, vec![("a", 1.0), ("b", 1.0)]),
            error: Some(Breakdown::new(NormIdentity::Err1, vec![("c", 2.0)])),
        });
        let csv = r.to_csv();
        let lines: Vec<&str> = csv.lines().collect();
        assert_eq!(lines[0], "level,h,dofs,ERR_total,M_total,efficiency,M1:a,M1:b,ERR1:c");
        assert_eq!(lines[1].split(',').count(), 9);
        assert!(lines[1].starts_with("0,5.0000000000000000e-1,3,2.0000000000000000e0,"));
        assert!(r.to_text().contains("efficiency = 1.0000000000000000e0"));
    }
}
