//! Problem data `A, b, div b, c, f`, regime checks, the zero-reaction split, and
//! Friedrichs-constant bounds.
//!
//! Essential infima and suprema of the coefficients are not certified: every check
//! samples the degree-12 quadrature points of every cell plus each cell vertex moved
//! 1e-9 of the way towards the cell centroid. Interior samples keep piecewise data whose
//! jumps sit on facets from being evaluated on the wrong side.

use std::f64::consts::PI;
use std::fmt;

use rand::Rng;

use crate::error::{Error, Result};
use crate::expr::Expr;
use crate::fem::{cell_points, rule, spd_inverse, Mat2, REFERENCE_DEGREE};
use crate::mesh::{Mesh, Point};

/// Relative slack used for sampled lower bounds such as `c >= c0`.
const SAMPLE_TOL: f64 = 1e-12;
/// Cells with `max |c|` below this are assigned to the zero-reaction region.
pub const ZERO_REACTION_EPS: f64 = 1e-12;

#[derive(Clone, Debug, PartialEq)]
pub struct CoefficientSet {
    pub dim: usize,
    /// `[a11, a12, a22]`; in 1D only `a11` is used.
    pub a: [Expr; 3],
    pub b: [Expr; 2],
    /// Supplied in closed form, never differenced.
    pub div_b: Expr,
    pub c: Expr,
    pub f: Expr,
    pub alpha: f64,
    pub beta: f64,
    /// Lower bound of `c` where `c` does not vanish.
    pub c0: f64,
    /// Lower bound of `c - div b`.
    pub lambda: f64,
    /// Sum over components of `sup b_j^2`.
    pub b_inf_sq: f64,
}

/// Extremes of the coefficients over the sample set.
#[derive(Clone, Debug, PartialEq)]
pub struct SampledConstants {
    pub alpha: f64,
    pub beta: f64,
    pub c_min: f64,
    /// Smallest `c` over cells outside the zero-reaction region (0 if there are none).
    pub c0: f64,
    pub c_minus_div_b_min: f64,
    pub neg_div_b_min: f64,
    pub b_inf_sq: f64,
}

impl CoefficientSet {
    /// Data with unset constants; see [`CoefficientSet::with_constants`] and
    /// [`CoefficientSet::with_sampled_constants`].
    pub fn new(dim: usize, a: [Expr; 3], b: [Expr; 2], div_b: Expr, c: Expr, f: Expr) -> Result<Self> {
        if dim != 1 && dim != 2 {
            return Err(Error::Dimension(format!("unsupported dimension {dim}")));
        }
        let (a, b) = if dim == 1 {
            let [a11, _, _] = a;
            let [b1, _] = b;
            ([a11, Expr::zero(), Expr::one()], [b1, Expr::zero()])
        } else {
            (a, b)
        };
        Ok(CoefficientSet {
            dim,
            a,
            b,
            div_b,
            c,
            f,
            alpha: 0.0,
            beta: 0.0,
            c0: 0.0,
            lambda: 0.0,
            b_inf_sq: 0.0,
        })
    }

    /// Parses every coefficient from the expression grammar of [`Expr`].
    pub fn parse(dim: usize, a: [&str; 3], b: [&str; 2], div_b: &str, c: &str, f: &str) -> Result<Self> {
        CoefficientSet::new(
            dim,
            [Expr::parse(a[0])?, Expr::parse(a[1])?, Expr::parse(a[2])?],
            [Expr::parse(b[0])?, Expr::parse(b[1])?],
            Expr::parse(div_b)?,
            Expr::parse(c)?,
            Expr::parse(f)?,
        )
    }

    pub fn with_constants(mut self, alpha: f64, beta: f64, c0: f64, lambda: f64, b_inf_sq: f64) -> Self {
        self.alpha = alpha;
        self.beta = beta;
        self.c0 = c0;
        self.lambda = lambda;
        self.b_inf_sq = b_inf_sq;
        self
    }

    /// Fills the constants from samples on `mesh`. The values are sampled extremes, not
    /// certified bounds.
    pub fn with_sampled_constants(self, mesh: &Mesh) -> Result<Self> {
        let s = self.sample(mesh)?;
        Ok(self.with_constants(s.alpha, s.beta, s.c0, s.c_minus_div_b_min, s.b_inf_sq))
    }

    pub fn with_source(mut self, f: Expr) -> Self {
        self.f = f;
        self
    }

    pub fn a_at(&self, x: Point) -> Mat2 {
        let a12 = self.a[1].eval_at(x);
        [[self.a[0].eval_at(x), a12], [a12, self.a[2].eval_at(x)]]
    }

    pub fn a_inv_at(&self, x: Point) -> Result<Mat2> {
        spd_inverse(&self.a_at(x), x)
    }

    pub fn b_at(&self, x: Point) -> Point {
        [self.b[0].eval_at(x), self.b[1].eval_at(x)]
    }

    pub fn div_b_at(&self, x: Point) -> f64 {
        self.div_b.eval_at(x)
    }

    pub fn c_at(&self, x: Point) -> f64 {
        self.c.eval_at(x)
    }

    pub fn f_at(&self, x: Point) -> f64 {
        self.f.eval_at(x)
    }

    /// Smallest and largest eigenvalue of `A(x)`.
    pub fn a_spectrum_at(&self, x: Point) -> (f64, f64) {
        let a = self.a_at(x);
        if self.dim == 1 {
            return (a[0][0], a[0][0]);
        }
        let mean = 0.5 * (a[0][0] + a[1][1]);
        let rad = (0.5 * (a[0][0] - a[1][1])).hypot(a[0][1]);
        (mean - rad, mean + rad)
    }

    pub fn sample(&self, mesh: &Mesh) -> Result<SampledConstants> {
        let mut s = SampledConstants {
            alpha: f64::INFINITY,
            beta: f64::NEG_INFINITY,
            c_min: f64::INFINITY,
            c0: f64::INFINITY,
            c_minus_div_b_min: f64::INFINITY,
            neg_div_b_min: f64::INFINITY,
            b_inf_sq: 0.0,
        };
        let mut b_sup = [0.0f64; 2];
        for cell in 0..mesh.num_cells() {
            let pts = sample_points(mesh, cell)?;
            let c_max = pts.iter().map(|&x| self.c_at(x).abs()).fold(0.0, f64::max);
            for &x in &pts {
                let (lo, hi) = self.a_spectrum_at(x);
                let c = self.c_at(x);
                let db = self.div_b_at(x);
                let b = self.b_at(x);
                s.alpha = s.alpha.min(lo);
                s.beta = s.beta.max(hi);
                s.c_min = s.c_min.min(c);
                if c_max >= ZERO_REACTION_EPS {
                    s.c0 = s.c0.min(c);
                }
                s.c_minus_div_b_min = s.c_minus_div_b_min.min(c - db);
                s.neg_div_b_min = s.neg_div_b_min.min(-db);
                b_sup[0] = b_sup[0].max(b[0].abs());
                b_sup[1] = b_sup[1].max(b[1].abs());
            }
        }
        if s.c0 == f64::INFINITY {
            s.c0 = 0.0;
        }
        s.b_inf_sq = b_sup[0] * b_sup[0] + b_sup[1] * b_sup[1];
        Ok(s)
    }
}

/// Quadrature points of degree 12 plus vertices nudged towards the centroid.
pub fn sample_points(mesh: &Mesh, cell: usize) -> Result<Vec<Point>> {
    let mut pts: Vec<Point> = cell_points(mesh, cell, REFERENCE_DEGREE)?.into_iter().map(|q| q.x).collect();
    let g = mesh.geometry(cell).centroid;
    for &v in mesh.cell(cell) {
        let p = mesh.vertex(v);
        let t = 1e-9;
        pts.push([p[0] + t * (g[0] - p[0]), p[1] + t * (g[1] - p[1])]);
    }
    Ok(pts)
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum Regime {
    /// Reaction-dominated form: `c >= c0 > 0`, `c - div b >= 0`.
    Thm31,
    /// Total-flux form: `c >= 0`, `c - div b >= lambda > 0`.
    Thm34,
    /// Zero-reaction split: `c >= c0 > 0` where `c` does not vanish, `c - div b >= 0`.
    Thm41,
}

impl fmt::Display for Regime {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Regime::Thm31 => "THM31",
            Regime::Thm34 => "THM34",
            Regime::Thm41 => "THM41",
        })
    }
}

impl std::str::FromStr for Regime {
    type Err = Error;
    fn from_str(s: &str) -> Result<Regime> {
        match s.trim().to_ascii_uppercase().as_str() {
            "THM31" => Ok(Regime::Thm31),
            "THM34" => Ok(Regime::Thm34),
            "THM41" => Ok(Regime::Thm41),
            other => Err(Error::Parse {
                pos: 0,
                msg: format!("unknown regime '{other}'"),
            }),
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct Violation {
    pub condition: String,
    /// Worst sampled value of the checked quantity.
    pub worst: f64,
    pub at: Point,
}

impl fmt::Display for Violation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(
            f,
            "{} violated: worst value {:e} at ({}, {})",
            self.condition, self.worst, self.at[0], self.at[1]
        )
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct ValidationReport {
    pub regime: Regime,
    pub pass: bool,
    pub violations: Vec<Violation>,
    /// THM41 only: whether `-div b >= 0` on the reacting region.
    pub improved_lower_bound: Option<bool>,
    pub notes: Vec<String>,
}

impl fmt::Display for ValidationReport {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        writeln!(f, "{}: {}", self.regime, if self.pass { "pass" } else { "FAIL" })?;
        for v in &self.violations {
            writeln!(f, "  {v}")?;
        }
        if let Some(b) = self.improved_lower_bound {
            writeln!(f, "  improved lower bound available: {b}")?;
        }
        for n in &self.notes {
            writeln!(f, "  note: {n}")?;
        }
        Ok(())
    }
}

struct Checker {
    violations: Vec<Violation>,
}

impl Checker {
    /// Records a violation if `min over samples of q` falls below `bound`.
    fn at_least(&mut self, condition: &str, samples: &[Point], bound: f64, q: impl Fn(Point) -> f64) -> f64 {
        let mut worst = f64::INFINITY;
        let mut at = [f64::NAN, f64::NAN];
        for &x in samples {
            let v = q(x);
            if v < worst || v.is_nan() {
                worst = v;
                at = x;
                if v.is_nan() {
                    break;
                }
            }
        }
        if !(worst >= bound - SAMPLE_TOL * bound.abs().max(1.0)) {
            self.violations.push(Violation {
                condition: condition.to_string(),
                worst,
                at,
            });
        }
        worst
    }

    fn positive_constant(&mut self, condition: &str, value: f64) {
        if !(value > 0.0) {
            self.violations.push(Violation {
                condition: condition.to_string(),
                worst: value,
                at: [f64::NAN, f64::NAN],
            });
        }
    }
}

/// Checks the coefficient conditions of `regime` and coercivity of the primal form.
pub fn validate(coeffs: &CoefficientSet, mesh: &Mesh, regime: Regime) -> Result<ValidationReport> {
    let mut all = Vec::new();
    for cell in 0..mesh.num_cells() {
        all.extend(sample_points(mesh, cell)?);
    }
    let mut ck = Checker { violations: Vec::new() };
    let mut notes = Vec::new();
    let mut improved = None;

    ck.positive_constant("alpha > 0", coeffs.alpha);
    ck.at_least("min eig A >= alpha", &all, coeffs.alpha * (1.0 - 1e-9), |x| coeffs.a_spectrum_at(x).0);
    ck.at_least("max eig A <= beta", &all, -coeffs.beta * (1.0 + 1e-9), |x| -coeffs.a_spectrum_at(x).1);
    ck.at_least("c >= 0", &all, 0.0, |x| coeffs.c_at(x));

    let c_minus_div_b = |x: Point| coeffs.c_at(x) - coeffs.div_b_at(x);
    match regime {
        Regime::Thm31 => {
            ck.positive_constant("c0 > 0", coeffs.c0);
            ck.at_least("c >= c0", &all, coeffs.c0, |x| coeffs.c_at(x));
            let m = ck.at_least("c - div b >= 0", &all, 0.0, c_minus_div_b);
            if m.abs() <= SAMPLE_TOL {
                notes.push(
                    "c - div b vanishes at sampled points; the error measure has no L2 part there \
                     and control relies on a bounded domain"
                        .into(),
                );
            }
        }
        Regime::Thm34 => {
            ck.positive_constant("lambda > 0 (c - div b >= lambda)", coeffs.lambda);
            ck.at_least("c - div b >= lambda", &all, coeffs.lambda, c_minus_div_b);
        }
        Regime::Thm41 => {
            ck.positive_constant("c0 > 0", coeffs.c0);
            ck.at_least("c - div b >= 0", &all, 0.0, c_minus_div_b);
            match split_domain(coeffs, mesh) {
                Ok(split) => {
                    let mut reacting = Vec::new();
                    for &cell in split.omega_c() {
                        reacting.extend(sample_points(mesh, cell)?);
                    }
                    ck.at_least("c >= c0 on reacting cells", &reacting, coeffs.c0, |x| coeffs.c_at(x));
                    let neg = reacting.iter().map(|&x| -coeffs.div_b_at(x)).fold(f64::INFINITY, f64::min);
                    improved = Some(neg >= -SAMPLE_TOL);
                    if split.omega0().is_empty() {
                        notes.push("zero-reaction region is empty".into());
                    }
                }
                Err(e) => ck.violations.push(Violation {
                    condition: format!("clean zero-reaction split ({e})"),
                    worst: f64::NAN,
                    at: [f64::NAN, f64::NAN],
                }),
            }
        }
    }

    let half = |x: Point| coeffs.c_at(x) - 0.5 * coeffs.div_b_at(x);
    let plain = all.iter().map(|&x| half(x)).fold(f64::INFINITY, f64::min);
    if !(plain > 0.0) {
        let cf = friedrichs_upper_bound(mesh)?;
        let shift = coeffs.alpha / (2.0 * cf * cf);
        let (worst, at) = all
            .iter()
            .map(|&x| (half(x) + shift, x))
            .fold((f64::INFINITY, [f64::NAN; 2]), |acc, v| if v.0 < acc.0 { v } else { acc });
        if !(worst > 0.0) {
            ck.violations.push(Violation {
                condition: "coercivity: c - div b/2 + alpha/(2 C_F^2) > 0".into(),
                worst,
                at,
            });
        } else {
            notes.push(format!(
                "coercive only through the Friedrichs inequality (C_F <= {cf:.6})"
            ));
        }
    }

    Ok(ValidationReport {
        regime,
        pass: ck.violations.is_empty(),
        violations: ck.violations,
        improved_lower_bound: improved,
        notes,
    })
}

/// Partition of the cells into the zero-reaction region and the reacting region.
#[derive(Clone, Debug, PartialEq)]
pub struct DomainSplit {
    zero: Vec<bool>,
    omega0: Vec<usize>,
    omega_c: Vec<usize>,
}

impl DomainSplit {
    pub fn from_flags(zero: Vec<bool>) -> DomainSplit {
        let omega0 = (0..zero.len()).filter(|&c| zero[c]).collect();
        let omega_c = (0..zero.len()).filter(|&c| !zero[c]).collect();
        DomainSplit { zero, omega0, omega_c }
    }

    pub fn is_zero_reaction(&self, cell: usize) -> bool {
        self.zero[cell]
    }

    pub fn omega0(&self) -> &[usize] {
        &self.omega0
    }

    pub fn omega_c(&self) -> &[usize] {
        &self.omega_c
    }

    /// `c + 1` on zero-reaction cells, `c` elsewhere.
    pub fn c_hat(&self, coeffs: &CoefficientSet, cell: usize, x: Point) -> f64 {
        coeffs.c_at(x) + if self.zero[cell] { 1.0 } else { 0.0 }
    }
}

/// Classifies each cell by `max |c|` over its samples. Cells that are neither clean
/// zero (below 1e-12) nor clearly reacting (at least `c0 * 1e-6`) are rejected.
pub fn split_domain(coeffs: &CoefficientSet, mesh: &Mesh) -> Result<DomainSplit> {
    let mut zero = Vec::with_capacity(mesh.num_cells());
    for cell in 0..mesh.num_cells() {
        let pts = sample_points(mesh, cell)?;
        let m = pts.iter().map(|&x| coeffs.c_at(x).abs()).fold(0.0, f64::max);
        if m < ZERO_REACTION_EPS {
            zero.push(true);
        } else if m < coeffs.c0 * 1e-6 {
            return Err(Error::Regime(format!(
                "cell {cell}: max |c| = {m:e} is neither zero nor uniformly positive"
            )));
        } else {
            zero.push(false);
        }
    }
    Ok(DomainSplit::from_flags(zero))
}

/// `d / pi` with `d` the thinnest axis-aligned slab containing the mesh.
pub fn friedrichs_upper_bound(mesh: &Mesh) -> Result<f64> {
    let (lo, hi) = mesh.bounding_box();
    let d = if mesh.dim() == 1 {
        hi[0] - lo[0]
    } else {
        (hi[0] - lo[0]).min(hi[1] - lo[1])
    };
    if !(d > 0.0) {
        return Err(Error::InvalidMesh("degenerate domain width".into()));
    }
    Ok(d / PI)
}

/// Exact Friedrichs constant of a `w` by `h` rectangle, `1 / (pi sqrt(1/w^2 + 1/h^2))`.
pub fn friedrichs_rectangle(w: f64, h: f64) -> f64 {
    1.0 / (PI * (1.0 / (w * w) + 1.0 / (h * h)).sqrt())
}

/// Largest `|int div b - int b.n|` over random axis-aligned sub-boxes of `[lo, hi]`.
pub fn divergence_consistency<R: Rng + ?Sized>(
    coeffs: &CoefficientSet,
    lo: Point,
    hi: Point,
    rng: &mut R,
    trials: usize,
) -> Result<f64> {
    let r = rule(1, 30)?;
    let line = |a: f64, b: f64, g: &dyn Fn(f64) -> f64| -> f64 {
        r.points.iter().zip(&r.weights).map(|(p, w)| w * (b - a) * g(a + (b - a) * p[0])).sum()
    };
    let mut worst = 0.0f64;
    for _ in 0..trials {
        let mut pick = |k: usize| {
            let s = rng.random_range(lo[k]..hi[k]);
            let t = rng.random_range(lo[k]..hi[k]);
            (s.min(t), s.max(t))
        };
        let (x0, x1) = pick(0);
        if coeffs.dim == 1 {
            let vol = line(x0, x1, &|x| coeffs.div_b_at([x, 0.0]));
            let flux = coeffs.b_at([x1, 0.0])[0] - coeffs.b_at([x0, 0.0])[0];
            worst = worst.max((vol - flux).abs());
            continue;
        }
        let (y0, y1) = pick(1);
        let vol = line(y0, y1, &|y| line(x0, x1, &|x| coeffs.div_b_at([x, y])));
        let flux = line(y0, y1, &|y| coeffs.b_at([x1, y])[0] - coeffs.b_at([x0, y])[0])
            + line(x0, x1, &|x| coeffs.b_at([x, y1])[1] - coeffs.b_at([x, y0])[1]);
        worst = worst.max((vol - flux).abs());
    }
    Ok(worst)
}
