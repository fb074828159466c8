//! `certerr check`: every catalog case against every theorem its regime admits.

use std::path::Path;

use certerr_core::coefficients::{validate, Regime};
use certerr_core::fem::{ASSEMBLY_DEGREE, REFERENCE_DEGREE};
use certerr_core::oracle::{catalog, ManufacturedCase};

use crate::config::{ExperimentConfig, Theorem};
use crate::runner::{run_experiment, Summary};

fn applicable(case: &ManufacturedCase, levels: &[usize]) -> anyhow::Result<Vec<Theorem>> {
    let mesh = case.domain.mesh(*levels.last().unwrap())?;
    let ok = |r| validate(&case.coeffs, &mesh, r).map(|v| v.pass);
    let (t31, t34, t41) = (ok(Regime::Thm31)?, ok(Regime::Thm34)?, ok(Regime::Thm41)?);
    let mut out = Vec::new();
    if t31 {
        out.extend([Theorem::Thm31, Theorem::Indicators, Theorem::PrimalBounds]);
    }
    if t34 {
        out.push(Theorem::Thm34);
    }
    if t41 {
        out.push(Theorem::Thm41);
    }
    if t31 || t34 {
        out.extend([Theorem::AppendixB, Theorem::Isometry]);
    }
    out.push(Theorem::Identity);
    out.sort();
    Ok(out)
}

/// Runs the catalog; with `out`, each case writes into its own subdirectory.
pub fn run_check(out: Option<&Path>, seed: u64) -> anyhow::Result<Vec<Summary>> {
    let mut summaries = Vec::new();
    for case in catalog() {
        let levels = if case.domain.dim() == 1 { vec![8, 16, 32, 64] } else { vec![4, 8, 16] };
        let theorems = applicable(&case, &levels)?;
        let cfg = ExperimentConfig {
            output: out.map(|d| d.join(&case.id)),
            case,
            levels,
            theorems,
            assembly_degree: ASSEMBLY_DEGREE,
            reference_degree: REFERENCE_DEGREE,
            seed,
            perturbations: 20,
            friedrichs: None,
        };
        summaries.push(run_experiment(&cfg)?);
    }
    Ok(summaries)
}

#[cfg(test)]
mod tests {
    use super::*;
    use certerr_core::oracle::case_by_id;

    #[test]
    fn theorem_selection_follows_regimes() {
        let t = applicable(&case_by_id("SPLIT-2D").unwrap(), &[4]).unwrap();
        assert_eq!(t, vec![Theorem::Thm41, Theorem::Identity]);
        let t = applicable(&case_by_id("CD-1D").unwrap(), &[8]).unwrap();
        assert!(t.contains(&Theorem::Thm34) && !t.contains(&Theorem::Thm31));
        let t = applicable(&case_by_id("RD-1D").unwrap(), &[8]).unwrap();
        assert!(t.contains(&Theorem::Thm31) && t.contains(&Theorem::Thm34) && t.contains(&Theorem::Thm41));
    }
}
