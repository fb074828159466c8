//! Runs the requested theorem checks level by level and collects invariant verdicts.

use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};

use anyhow::{bail, Context};
use certerr_core::coefficients::{friedrichs_upper_bound, split_domain, validate, Regime, ValidationReport};
use certerr_core::fem::{
    integrate, interpolate_scalar, FluxField, Region, ScalarField, ScalarFunction, Zero,
};
use certerr_core::functionals::{
    bounds_m3, efficiency_index, identity_residual, isometry_residual, local_indicators, majorant_m1,
    majorant_m2, neg_div_b_nonnegative, norm_equivalence_check, normalized_efficiency,
    postprocessed_primal_bound, primal_bounds, weighted_square, Breakdown, Equivalence, ErrorReport, LevelRow,
};
use certerr_core::mesh::Mesh;
use certerr_core::oracle::{reference_error, ErrorMeasure, ManufacturedCase};
use certerr_core::solver::{nodal_average, reconstruct_flux, solve_primal, FluxKind, Formulation};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::config::{ExperimentConfig, Theorem};

/// Verdict on one invariant: every observed value must stay at or below `limit`.
#[derive(Clone, Debug, PartialEq)]
pub struct Invariant {
    pub name: String,
    pub limit: f64,
    pub worst: f64,
    pub checks: usize,
    pub pass: bool,
}

impl Invariant {
    fn new(name: &str, limit: f64) -> Invariant {
        Invariant {
            name: name.to_string(),
            limit,
            worst: f64::NEG_INFINITY,
            checks: 0,
            pass: true,
        }
    }

    fn observe(&mut self, value: f64) {
        self.checks += 1;
        if !(value <= self.limit) {
            self.pass = false;
        }
        if value > self.worst || value.is_nan() {
            self.worst = value;
        }
    }

    /// Records a boolean outcome together with a value for the report.
    fn require(&mut self, ok: bool, value: f64) {
        self.checks += 1;
        self.pass &= ok;
        if value > self.worst || value.is_nan() {
            self.worst = value;
        }
    }
}

#[derive(Clone, Debug, Default)]
pub struct Summary {
    pub case: String,
    pub invariants: Vec<Invariant>,
    pub files: Vec<PathBuf>,
}

impl Summary {
    pub fn passed(&self) -> bool {
        self.invariants.iter().all(|i| i.pass)
    }

    pub fn to_text(&self) -> String {
        let mut s = format!("case {}\n", self.case);
        for i in &self.invariants {
            writeln!(
                s,
                "{} {:<24} worst {:>12.4e}  limit {:.1e}  ({} checks)",
                if i.pass { "PASS" } else { "FAIL" },
                i.name,
                i.worst,
                i.limit,
                i.checks
            )
            .unwrap();
        }
        writeln!(s, "{}", if self.passed() { "all invariants pass" } else { "FAILED" }).unwrap();
        s
    }
}

fn required_regimes(t: Theorem) -> &'static [Regime] {
    match t {
        Theorem::Thm31 | Theorem::Indicators | Theorem::PrimalBounds => &[Regime::Thm31],
        Theorem::Thm34 => &[Regime::Thm34],
        Theorem::Thm41 => &[Regime::Thm41],
        // either formulation suffices
        Theorem::AppendixB | Theorem::Isometry => &[Regime::Thm31, Regime::Thm34],
        Theorem::Identity => &[],
    }
}

/// Validation of every regime on the finest mesh.
pub struct Preflight {
    pub reports: Vec<ValidationReport>,
}

impl Preflight {
    pub fn valid(&self, r: Regime) -> bool {
        self.reports.iter().any(|v| v.regime == r && v.pass)
    }

    fn report(&self, r: Regime) -> &ValidationReport {
        self.reports.iter().find(|v| v.regime == r).expect("all regimes validated")
    }
}

/// Fails with the violated conditions when a requested theorem's regime does not hold.
pub fn preflight(cfg: &ExperimentConfig) -> anyhow::Result<Preflight> {
    let mesh = cfg.case.domain.mesh(*cfg.levels.last().unwrap())?;
    let reports = [Regime::Thm31, Regime::Thm34, Regime::Thm41]
        .into_iter()
        .map(|r| validate(&cfg.case.coeffs, &mesh, r))
        .collect::<Result<Vec<_>, _>>()?;
    let pf = Preflight { reports };
    for &t in &cfg.theorems {
        let need = required_regimes(t);
        if !need.is_empty() && !need.iter().any(|&r| pf.valid(r)) {
            let mut msg = format!("pre-flight validation failed for {t} on case {}:\n", cfg.case.id);
            for &r in need {
                msg.push_str(&pf.report(r).to_string());
            }
            bail!(msg.trim_end().to_string());
        }
    }
    Ok(pf)
}

fn rel(a: f64, b: f64) -> f64 {
    (a - b).abs() / b.abs().max(1e-30)
}

fn interior_vertices(mesh: &Mesh) -> usize {
    (0..mesh.num_vertices()).filter(|&v| !mesh.is_boundary_vertex(v)).count()
}

fn num(v: f64) -> String {
    format!("{v:.16e}")
}

struct Runner<'c> {
    cfg: &'c ExperimentConfig,
    case: &'c ManufacturedCase,
    pf: Preflight,
    invariants: Vec<Invariant>,
    outputs: Vec<(String, String)>,
}

impl Runner<'_> {
    fn rng(&self, t: Theorem) -> ChaCha8Rng {
        ChaCha8Rng::seed_from_u64(self.cfg.seed.wrapping_mul(0x9e37_79b9_7f4a_7c15) ^ t as u64)
    }

    fn galerkin<'m>(&self, mesh: &'m Mesh, form: Formulation) -> anyhow::Result<(ScalarField<'m>, FluxField<'m>)> {
        let deg = self.cfg.assembly_degree;
        let u = solve_primal(mesh, &self.case.coeffs, form, deg)?;
        let kind = match form {
            Formulation::Form1 => FluxKind::Diffusive,
            Formulation::Form2 => FluxKind::Total,
        };
        let p = reconstruct_flux(&u, &self.case.coeffs, kind, deg)?;
        Ok((u, p))
    }

    /// `I_h u + s r` and `flux + s t`, with `s = 0.1` for the first half and `1` after.
    fn perturbed<'m>(
        &self,
        mesh: &'m Mesh,
        flux: &FluxField<'m>,
        rng: &mut ChaCha8Rng,
    ) -> anyhow::Result<Vec<(ScalarField<'m>, FluxField<'m>)>> {
        let iu = interpolate_scalar(mesh, |x| self.case.u.value.eval_at(x), true)?;
        let n = self.cfg.perturbations;
        (0..n)
            .map(|k| {
                let s = if k < n / 2 { 0.1 } else { 1.0 };
                Ok((
                    iu.add_scaled(s, &ScalarField::random(mesh, rng, true))?,
                    flux.add_scaled(s, &FluxField::random(mesh, rng))?,
                ))
            })
            .collect()
    }

    fn equality(&mut self, t: Theorem, form: Formulation) -> anyhow::Result<()> {
        let (regime, measure, name, stem) = match form {
            Formulation::Form1 => (Regime::Thm31, ErrorMeasure::Err1, "EQUALITY-1", "thm31"),
            Formulation::Form2 => (Regime::Thm34, ErrorMeasure::Err2, "EQUALITY-2", "thm34"),
        };
        let deg = self.cfg.reference_degree;
        let mut rng = self.rng(t);
        let mut eq = Invariant::new(name, 1e-8);
        let mut norm = Invariant::new(&format!("NORMALIZATION-{}", &name[9..]), 1e-8);
        let mut mono = Invariant::new("MONOTONE CONSISTENCY", 1e-6);
        let mut report = ErrorReport::new(&format!("{t}: majorant vs true error"));
        report.validation.push(self.pf.report(regime).clone());
        let mut prev_err = f64::INFINITY;
        for (li, &n) in self.cfg.levels.iter().enumerate() {
            let mesh = self.case.domain.mesh(n)?;
            let (u, p) = self.galerkin(&mesh, form)?;
            let majorant = |u: &ScalarField, p: &FluxField| -> anyhow::Result<Breakdown> {
                Ok(match form {
                    Formulation::Form1 => majorant_m1(&mesh, &self.case.coeffs, u, p, deg)?,
                    Formulation::Form2 => majorant_m2(&mesh, &self.case.coeffs, u, p, deg)?,
                })
            };
            let m = majorant(&u, &p)?;
            let e = reference_error(&mesh, self.case, &u, &p, measure, None, deg)?;
            eq.observe(rel(m.total, e.total));
            let eff = efficiency_index(m.total, e.total);
            if form == Formulation::Form1 && self.cfg.levels.len() > 1 {
                mono.observe((eff - 1.0).abs());
                mono.require(e.total < prev_err, (eff - 1.0).abs());
                prev_err = e.total;
            }
            let whole = reference_error(&mesh, self.case, &Zero, &Zero, measure, None, deg)?.total;
            let normalized = normalized_efficiency(&mesh, &m, &self.case.coeffs, form, deg)?;
            norm.observe(rel(normalized, e.total / whole));
            let m0 = majorant(&ScalarField::zeros(&mesh, true), &FluxField::zeros(&mesh))?;
            norm.observe((normalized_efficiency(&mesh, &m0, &self.case.coeffs, form, deg)? - 1.0).abs());
            report.normalized = Some(normalized);
            for (uh, ph) in self.perturbed(&mesh, &p, &mut rng)? {
                let m = majorant(&uh, &ph)?;
                let e = reference_error(&mesh, self.case, &uh, &ph, measure, None, deg)?;
                eq.observe(rel(m.total, e.total));
            }
            report.rows.push(LevelRow {
                level: li,
                h: mesh.max_diameter(),
                dofs: interior_vertices(&mesh),
                majorant: m,
                error: Some(e),
            });
        }
        self.write_report(stem, &report);
        self.invariants.push(eq);
        if form == Formulation::Form1 && self.cfg.levels.len() > 1 {
            self.invariants.push(mono);
        }
        self.invariants.push(norm);
        Ok(())
    }

    fn sandwich(&mut self) -> anyhow::Result<()> {
        let deg = self.cfg.reference_degree;
        let mut rng = self.rng(Theorem::Thm41);
        let mut sand = Invariant::new("SANDWICH", 1e-10);
        let mut ratio = Invariant::new("M3 RATIO", 1e-10);
        let mut report = ErrorReport::new("THM41: upper bound vs true error");
        report.validation.push(self.pf.report(Regime::Thm41).clone());
        let mut table = String::from("level,trial,simple_lower,M3minus,ERR3,M3plus,ratio,ratio_bound\n");
        for (li, &n) in self.cfg.levels.iter().enumerate() {
            let mesh = self.case.domain.mesh(n)?;
            let split = split_domain(&self.case.coeffs, &mesh)?;
            let cf = match self.cfg.friedrichs {
                Some(c) => c,
                None => friedrichs_upper_bound(&mesh)?,
            };
            let (u, p) = self.galerkin(&mesh, Formulation::Form1)?;
            let mut pairs = vec![(u, p.clone())];
            pairs.extend(self.perturbed(&mesh, &p, &mut rng)?);
            for (k, (uh, ph)) in pairs.iter().enumerate() {
                let b = bounds_m3(&mesh, &self.case.coeffs, uh, ph, &split, cf, deg)?;
                let e = reference_error(&mesh, self.case, uh, ph, ErrorMeasure::Err3, Some(&split), deg)?;
                sand.observe(b.simple_lower.total - e.total);
                sand.observe(e.total - b.plus.total);
                let (minus, r) = match &b.minus {
                    Some(m) => {
                        sand.observe(m.total - e.total);
                        let r = (b.plus.total / m.total).sqrt();
                        ratio.observe(r - b.ratio_bound);
                        (num(m.total), num(r))
                    }
                    None => (String::new(), String::new()),
                };
                writeln!(
                    table,
                    "{li},{k},{},{minus},{},{},{r},{}",
                    num(b.simple_lower.total),
                    num(e.total),
                    num(b.plus.total),
                    num(b.ratio_bound)
                )
                .unwrap();
                if k == 0 {
                    report.rows.push(LevelRow {
                        level: li,
                        h: mesh.max_diameter(),
                        dofs: interior_vertices(&mesh),
                        majorant: b.plus,
                        error: Some(e),
                    });
                }
            }
        }
        self.write_report("thm41", &report);
        self.outputs.push(("thm41_bounds.csv".into(), table));
        self.invariants.push(sand);
        if ratio.checks > 0 {
            self.invariants.push(ratio);
        }
        Ok(())
    }

    fn indicators(&mut self) -> anyhow::Result<()> {
        let deg = self.cfg.reference_degree;
        let mut rng = self.rng(Theorem::Indicators);
        let mut sum = Invariant::new("INDICATOR SUM", 1e-12);
        let mut local = Invariant::new("LOCAL EFFICIENCY", 1e-12);
        let mut table = String::new();
        for &n in &self.cfg.levels {
            let mesh = self.case.domain.mesh(n)?;
            let all: Vec<usize> = (0..mesh.num_cells()).collect();
            let sign_ok = neg_div_b_nonnegative(&mesh, &self.case.coeffs, &all)?;
            let (u, p) = self.galerkin(&mesh, Formulation::Form1)?;
            let mut pairs = vec![(u, p.clone())];
            pairs.extend(self.perturbed(&mesh, &p, &mut rng)?);
            for (k, (uh, ph)) in pairs.iter().enumerate() {
                let ind = local_indicators(&mesh, &self.case.coeffs, uh, ph, Some(self.case), deg)?;
                let m = majorant_m1(&mesh, &self.case.coeffs, uh, ph, deg)?;
                sum.observe(rel(ind.eta_total(), m.total));
                let e_sq = ind.e_sq.as_ref().expect("case supplied");
                if sign_ok {
                    for (eta, e) in ind.eta_sq.iter().zip(e_sq) {
                        local.observe(eta.sqrt() - (2.0 * e).sqrt());
                    }
                }
                if k == 0 && Some(&n) == self.cfg.levels.last() {
                    table = String::from("cell,eta_sq,e_sq\n");
                    for (c, (eta, e)) in ind.eta_sq.iter().zip(e_sq).enumerate() {
                        writeln!(table, "{c},{},{}", num(*eta), num(*e)).unwrap();
                    }
                }
            }
        }
        self.outputs.push(("indicators.csv".into(), table));
        self.invariants.push(sum);
        if local.checks > 0 {
            self.invariants.push(local);
        }
        Ok(())
    }

    fn primal(&mut self) -> anyhow::Result<()> {
        let deg = self.cfg.reference_degree;
        let k = &self.case.coeffs;
        let mut rng = self.rng(Theorem::PrimalBounds);
        let mut inv = Invariant::new("PRIMAL BOUNDS", 0.0);
        let mut post = Invariant::new("POSTPROCESSED BOUND", 0.0);
        let mut table = String::from("level,trial,bound1,err_c_minus_div_b,bound2,err_neg_div_b\n");
        for (li, &n) in self.cfg.levels.iter().enumerate() {
            let mesh = self.case.domain.mesh(n)?;
            let (_, p) = self.galerkin(&mesh, Formulation::Form1)?;
            for (t, (uh, phi)) in self.perturbed(&mesh, &p, &mut rng)?.iter().enumerate() {
                let pb = primal_bounds(&mesh, k, uh, phi, deg)?;
                let diff = |qp: &certerr_core::fem::QuadPoint| self.case.u.value(qp) - uh.value(qp);
                let ec = weighted_square(&mesh, deg, |x| k.c_at(x) - k.div_b_at(x), diff)?;
                inv.observe(ec - pb.bound1);
                let (b2, eb) = match pb.bound2 {
                    Some(b2) => {
                        let eb = weighted_square(&mesh, deg, |x| -k.div_b_at(x), diff)?;
                        inv.observe(eb - b2);
                        (num(b2), num(eb))
                    }
                    None => (String::new(), String::new()),
                };
                writeln!(table, "{li},{t},{},{},{b2},{eb}", num(pb.bound1), num(ec)).unwrap();
            }
            let means = (0..mesh.num_cells())
                .map(|c| {
                    Ok(integrate(&mesh, deg, Region::Cell(c), |qp| self.case.u.value(qp))? / mesh.geometry(c).measure)
                })
                .collect::<anyhow::Result<Vec<f64>>>()?;
            let g = nodal_average(&mesh, &means)?;
            let phi = reconstruct_flux(&g, k, FluxKind::Diffusive, self.cfg.assembly_degree)?;
            let b = postprocessed_primal_bound(&mesh, k, &means, &phi, deg)?;
            let pc = |qp: &certerr_core::fem::QuadPoint| self.case.u.value(qp) - means[qp.cell];
            post.observe(weighted_square(&mesh, deg, |x| k.c_at(x) - k.div_b_at(x), pc)?.sqrt() - b.bound_c);
            if let Some(bb) = b.bound_b {
                post.observe(weighted_square(&mesh, deg, |x| -k.div_b_at(x), pc)?.sqrt() - bb);
            }
        }
        self.outputs.push(("primal_bounds.csv".into(), table));
        self.invariants.push(inv);
        self.invariants.push(post);
        Ok(())
    }

    fn appendix_b(&mut self) -> anyhow::Result<()> {
        let k = &self.case.coeffs;
        let mut variants = Vec::new();
        if self.pf.valid(Regime::Thm31) {
            variants.push(Equivalence::Form1);
        }
        if self.pf.valid(Regime::Thm34) {
            variants.push(if k.c0 > 0.0 { Equivalence::Form2 } else { Equivalence::Form2Friedrichs });
        }
        let mut rng = self.rng(Theorem::AppendixB);
        let mut inv = Invariant::new("NORM EQUIVALENCE", 0.0);
        let mut table = String::from("level,trial,variant,lower,product,upper\n");
        for (li, &n) in self.cfg.levels.iter().enumerate() {
            let mesh = self.case.domain.mesh(n)?;
            let cf = match self.cfg.friedrichs {
                Some(c) => c,
                None => friedrichs_upper_bound(&mesh)?,
            };
            for t in 0..self.cfg.perturbations {
                let x = ScalarField::random(&mesh, &mut rng, true);
                let y = FluxField::random(&mesh, &mut rng);
                for &v in &variants {
                    let r = norm_equivalence_check(&mesh, k, &x, &y, Some(cf), v, self.cfg.assembly_degree)?;
                    // violation size relative to the product norm; negative when the chain holds
                    let over = (r.lower - r.product).max(r.product - r.upper) / r.product.max(1e-300);
                    inv.require(r.holds, over);
                    writeln!(table, "{li},{t},{v:?},{},{},{}", num(r.lower), num(r.product), num(r.upper)).unwrap();
                }
            }
        }
        self.outputs.push(("appendix_b.csv".into(), table));
        self.invariants.push(inv);
        Ok(())
    }

    fn isometry(&mut self) -> anyhow::Result<()> {
        let mesh = self.case.domain.mesh(*self.cfg.levels.last().unwrap())?;
        let mut inv = Invariant::new("ISOMETRY", 1e-8);
        let mut table = String::from("formulation,residual\n");
        for (r, form) in [(Regime::Thm31, Formulation::Form1), (Regime::Thm34, Formulation::Form2)] {
            if self.pf.valid(r) {
                let res = isometry_residual(&mesh, self.case, form, self.cfg.reference_degree)?;
                inv.observe(res);
                writeln!(table, "{form},{}", num(res)).unwrap();
            }
        }
        self.outputs.push(("isometry.csv".into(), table));
        self.invariants.push(inv);
        Ok(())
    }

    fn identity(&mut self) -> anyhow::Result<()> {
        let mut rng = self.rng(Theorem::Identity);
        let mut id = Invariant::new("IDENTITY", 1e-12);
        let mut conv = Invariant::new("CONVECTION IDENTITY", 1e-12);
        let mut table = String::from("level,trial,identity,convection\n");
        for (li, &n) in self.cfg.levels.iter().enumerate() {
            let mesh = self.case.domain.mesh(n)?;
            for t in 0..self.cfg.perturbations {
                let v = ScalarField::random(&mesh, &mut rng, true);
                let w = ScalarField::random(&mesh, &mut rng, true);
                let r = identity_residual(&mesh, &self.case.coeffs, &v, &w, self.cfg.reference_degree)?;
                id.observe(r.identity);
                conv.observe(r.convection);
                writeln!(table, "{li},{t},{},{}", num(r.identity), num(r.convection)).unwrap();
            }
        }
        self.outputs.push(("identity.csv".into(), table));
        self.invariants.push(id);
        self.invariants.push(conv);
        Ok(())
    }

    fn write_report(&mut self, stem: &str, report: &ErrorReport) {
        self.outputs.push((format!("{stem}.csv"), report.to_csv()));
        self.outputs.push((format!("{stem}.txt"), report.to_text()));
    }
}

/// Pre-flight, then every requested theorem over all levels. Files are written only
/// when the config names an output directory.
pub fn run_experiment(cfg: &ExperimentConfig) -> anyhow::Result<Summary> {
    let pf = preflight(cfg)?;
    let mut r = Runner {
        cfg,
        case: &cfg.case,
        pf,
        invariants: Vec::new(),
        outputs: Vec::new(),
    };
    for &t in &cfg.theorems {
        match t {
            Theorem::Thm31 => r.equality(t, Formulation::Form1),
            Theorem::Thm34 => r.equality(t, Formulation::Form2),
            Theorem::Thm41 => r.sandwich(),
            Theorem::Indicators => r.indicators(),
            Theorem::PrimalBounds => r.primal(),
            Theorem::AppendixB => r.appendix_b(),
            Theorem::Isometry => r.isometry(),
            Theorem::Identity => r.identity(),
        }
        .with_context(|| format!("{t} on case {}", cfg.case.id))?;
    }
    let mut summary = Summary {
        case: cfg.case.id.clone(),
        invariants: r.invariants,
        files: Vec::new(),
    };
    if let Some(dir) = &cfg.output {
        summary.files = write_outputs(dir, &r.outputs, &summary)?;
    }
    Ok(summary)
}

fn write_outputs(dir: &Path, outputs: &[(String, String)], summary: &Summary) -> anyhow::Result<Vec<PathBuf>> {
    fs::create_dir_all(dir).with_context(|| format!("creating {}", dir.display()))?;
    let mut files = Vec::new();
    let all = outputs.iter().cloned().chain([("summary.txt".to_string(), summary.to_text())]);
    for (name, body) in all {
        let path = dir.join(name);
        fs::write(&path, body).with_context(|| format!("writing {}", path.display()))?;
        files.push(path);
    }
    Ok(files)
}
