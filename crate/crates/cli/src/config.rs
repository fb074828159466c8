//! Experiment configuration: `[case]`, `[mesh]` and `[run]` sections with quoted
//! expression strings.

use std::fmt;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use anyhow::{bail, Context};
use certerr_core::coefficients::CoefficientSet;
use certerr_core::expr::Expr;
use certerr_core::fem::{ASSEMBLY_DEGREE, REFERENCE_DEGREE};
use certerr_core::oracle::{case_by_id, manufacture_case, Domain, ManufacturedCase};
use serde::Deserialize;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Theorem {
    Thm31,
    Thm34,
    Thm41,
    Indicators,
    PrimalBounds,
    AppendixB,
    Isometry,
    Identity,
}

impl Theorem {
    pub const ALL: [Theorem; 8] = [
        Theorem::Thm31,
        Theorem::Thm34,
        Theorem::Thm41,
        Theorem::Indicators,
        Theorem::PrimalBounds,
        Theorem::AppendixB,
        Theorem::Isometry,
        Theorem::Identity,
    ];
}

impl fmt::Display for Theorem {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let s = match self {
            Theorem::Thm31 => "THM31",
            Theorem::Thm34 => "THM34",
            Theorem::Thm41 => "THM41",
            Theorem::Indicators => "INDICATORS",
            Theorem::PrimalBounds => "PRIMAL_BOUNDS",
            Theorem::AppendixB => "APPENDIX_B",
            Theorem::Isometry => "ISOMETRY",
            Theorem::Identity => "IDENTITY",
        };
        f.write_str(s)
    }
}

impl FromStr for Theorem {
    type Err = anyhow::Error;

    fn from_str(s: &str) -> anyhow::Result<Theorem> {
        Theorem::ALL
            .into_iter()
            .find(|t| t.to_string().eq_ignore_ascii_case(s.trim()))
            .with_context(|| format!("unknown theorem '{s}'"))
    }
}

#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawCase {
    id: Option<String>,
    domain: Option<String>,
    interval: Option<[f64; 2]>,
    lo: Option<[f64; 2]>,
    hi: Option<[f64; 2]>,
    a: Option<[String; 3]>,
    b: Option<Vec<String>>,
    div_b: Option<String>,
    c: Option<String>,
    u: Option<String>,
    alpha: Option<f64>,
    beta: Option<f64>,
    c0: Option<f64>,
    lambda: Option<f64>,
    b_inf_sq: Option<f64>,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawMesh {
    levels: Vec<usize>,
}

#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawRun {
    theorems: Vec<String>,
    assembly_degree: Option<usize>,
    reference_degree: Option<usize>,
    output: Option<PathBuf>,
    seed: Option<u64>,
    perturbations: Option<usize>,
    friedrichs: Option<f64>,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawConfig {
    case: RawCase,
    mesh: RawMesh,
    run: RawRun,
}

#[derive(Clone, Debug)]
pub struct ExperimentConfig {
    pub case: ManufacturedCase,
    /// Strictly increasing cells-per-direction counts.
    pub levels: Vec<usize>,
    pub theorems: Vec<Theorem>,
    pub assembly_degree: usize,
    pub reference_degree: usize,
    pub output: Option<PathBuf>,
    pub seed: u64,
    /// Random conforming pairs per level for the randomized checks.
    pub perturbations: usize,
    /// Overrides the slab-width Friedrichs bound.
    pub friedrichs: Option<f64>,
}

pub const SEED_ENV: &str = "CERTERR_SEED";

fn case_from_raw(raw: RawCase, finest: usize) -> anyhow::Result<ManufacturedCase> {
    let inline = raw.u.is_some() || raw.c.is_some() || raw.a.is_some() || raw.b.is_some() || raw.domain.is_some();
    if !inline {
        let id = raw.id.context("[case] needs `id` or inline coefficients")?;
        return Ok(case_by_id(&id)?);
    }
    let domain = match raw.domain.as_deref().unwrap_or("interval") {
        "interval" => {
            let [a, b] = raw.interval.unwrap_or([0.0, 1.0]);
            Domain::Interval { a, b }
        }
        "unit_square" => Domain::unit_square(),
        "rectangle" => Domain::Rectangle {
            lo: raw.lo.context("rectangle needs `lo`")?,
            hi: raw.hi.context("rectangle needs `hi`")?,
        },
        other => bail!("unknown domain '{other}' (interval, unit_square, rectangle)"),
    };
    let p = |s: &str| Expr::parse(s).with_context(|| format!("expression '{s}'"));
    let a = raw.a.unwrap_or_else(|| ["1".into(), "0".into(), "1".into()]);
    let b = raw.b.unwrap_or_else(|| vec!["0".into(), "0".into()]);
    if b.is_empty() || b.len() > 2 {
        bail!("`b` needs one or two components");
    }
    let b1 = b.get(1).map(String::as_str).unwrap_or("0");
    let coeffs = CoefficientSet::new(
        domain.dim(),
        [p(&a[0])?, p(&a[1])?, p(&a[2])?],
        [p(&b[0])?, p(b1)?],
        p(raw.div_b.as_deref().unwrap_or("0"))?,
        p(raw.c.as_deref().unwrap_or("0"))?,
        Expr::zero(),
    )?;
    let u = p(raw.u.as_deref().context("inline case needs `u`")?)?;
    let coeffs = match (raw.alpha, raw.beta, raw.c0, raw.lambda, raw.b_inf_sq) {
        (Some(al), Some(be), Some(c0), Some(la), Some(bi)) => coeffs.with_constants(al, be, c0, la, bi),
        _ => coeffs.with_sampled_constants(&domain.mesh(finest)?)?,
    };
    let id = raw.id.unwrap_or_else(|| "inline".into());
    Ok(manufacture_case(&id, domain, u, coeffs)?)
}

impl ExperimentConfig {
    pub fn parse(text: &str) -> anyhow::Result<ExperimentConfig> {
        let raw: RawConfig = toml::from_str(text).context("malformed config")?;
        let levels = raw.mesh.levels;
        if levels.is_empty() || levels[0] == 0 || levels.windows(2).any(|w| w[0] >= w[1]) {
            bail!("[mesh] levels must be positive and strictly increasing, got {levels:?}");
        }
        let mut theorems = raw
            .run
            .theorems
            .iter()
            .map(|s| s.parse())
            .collect::<anyhow::Result<Vec<Theorem>>>()?;
        theorems.sort();
        theorems.dedup();
        if theorems.is_empty() {
            bail!("[run] theorems is empty");
        }
        let case = case_from_raw(raw.case, *levels.last().unwrap())?;
        let reference_degree = raw.run.reference_degree.unwrap_or(REFERENCE_DEGREE);
        if reference_degree < certerr_core::oracle::MIN_REFERENCE_DEGREE {
            bail!("reference_degree must be at least {}", certerr_core::oracle::MIN_REFERENCE_DEGREE);
        }
        Ok(ExperimentConfig {
            case,
            levels,
            theorems,
            assembly_degree: raw.run.assembly_degree.unwrap_or(ASSEMBLY_DEGREE),
            reference_degree,
            output: raw.run.output,
            seed: raw.run.seed.unwrap_or(0),
            perturbations: raw.run.perturbations.unwrap_or(20),
            friedrichs: raw.run.friedrichs,
        })
    }

    /// Reads the file; relative output directories resolve against the config's folder.
    /// `CERTERR_SEED` overrides the seed.
    pub fn load(path: &Path) -> anyhow::Result<ExperimentConfig> {
        let text = std::fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
        let mut cfg = ExperimentConfig::parse(&text)?;
        if let Some(out) = &cfg.output {
            if out.is_relative() {
                cfg.output = Some(path.parent().unwrap_or(Path::new(".")).join(out));
            }
        }
        if let Ok(s) = std::env::var(SEED_ENV) {
            cfg.seed = s.trim().parse().with_context(|| format!("{SEED_ENV}='{s}' is not an integer"))?;
        }
        Ok(cfg)
    }
}
