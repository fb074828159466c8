//! Manufactured solutions and an independent reference evaluator for the error measures.
//!
//! A case fixes the coefficients and a closed-form `u` vanishing on the boundary; the
//! source, both fluxes and their divergences follow by symbolic differentiation:
//!
//! ```text
//! p = A grad u,   f = -div p + b . grad u + c u,
//! q = p - b u,    div q = div p - (div b) u - b . grad u.
//! ```
//!
//! [`reference_error`] assembles the true error measures point by point from the closed
//! forms. It shares only the quadrature tables with [`crate::functionals`].

use std::f64::consts::PI;

use rand::Rng;

use crate::coefficients::{CoefficientSet, DomainSplit};
use crate::error::{Error, Result};
use crate::expr::{Expr, Var};
use crate::fem::{cell_points, ExprScalar, ExprVector, ScalarFunction, VectorFunction};
use crate::functionals::{Breakdown, NormIdentity};
use crate::mesh::{build_interval_mesh, build_rectangle_mesh, Mesh, Point};

#[derive(Clone, Copy, Debug, PartialEq)]
pub enum Domain {
    Interval { a: f64, b: f64 },
    Rectangle { lo: Point, hi: Point },
}

impl Domain {
    pub fn unit_interval() -> Domain {
        Domain::Interval { a: 0.0, b: 1.0 }
    }

    pub fn unit_square() -> Domain {
        Domain::Rectangle {
            lo: [0.0, 0.0],
            hi: [1.0, 1.0],
        }
    }

    pub fn dim(&self) -> usize {
        match self {
            Domain::Interval { .. } => 1,
            Domain::Rectangle { .. } => 2,
        }
    }

    /// Uniform mesh with `n` cells per direction (times two triangles in 2D).
    pub fn mesh(&self, n: usize) -> Result<Mesh> {
        match *self {
            Domain::Interval { a, b } => build_interval_mesh(a, b, n),
            Domain::Rectangle { lo, hi } => build_rectangle_mesh(lo, hi, n, n),
        }
    }

    /// `count` points spread evenly over the boundary (both endpoints in 1D).
    pub fn boundary_samples(&self, count: usize) -> Vec<Point> {
        match *self {
            Domain::Interval { a, b } => vec![[a, 0.0], [b, 0.0]],
            Domain::Rectangle { lo, hi } => {
                let per_side = count.div_ceil(4).max(1);
                let mut pts = Vec::with_capacity(4 * per_side);
                for k in 0..per_side {
                    let t = k as f64 / per_side as f64;
                    let x = lo[0] + t * (hi[0] - lo[0]);
                    let y = lo[1] + t * (hi[1] - lo[1]);
                    let xr = hi[0] - t * (hi[0] - lo[0]);
                    let yr = hi[1] - t * (hi[1] - lo[1]);
                    pts.push([x, lo[1]]);
                    pts.push([hi[0], y]);
                    pts.push([xr, hi[1]]);
                    pts.push([lo[0], yr]);
                }
                pts
            }
        }
    }

    pub fn random_interior<R: Rng + ?Sized>(&self, rng: &mut R) -> Point {
        match *self {
            Domain::Interval { a, b } => [rng.random_range(a..b), 0.0],
            Domain::Rectangle { lo, hi } => [rng.random_range(lo[0]..hi[0]), rng.random_range(lo[1]..hi[1])],
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct ManufacturedCase {
    pub id: String,
    pub domain: Domain,
    /// Coefficients with the manufactured source in `f`.
    pub coeffs: CoefficientSet,
    pub u: ExprScalar,
    pub p: ExprVector,
    pub q: ExprVector,
}

/// Derives `f`, `p`, `q` and their divergences from `u` and the coefficients.
///
/// The source already present in `coeffs` is replaced. Fails when `u` does not vanish
/// (to 1e-12) at 100 boundary samples or when `u` or `A` cannot be differentiated.
pub fn manufacture_case(id: &str, domain: Domain, u: Expr, coeffs: CoefficientSet) -> Result<ManufacturedCase> {
    if coeffs.dim != domain.dim() {
        return Err(Error::Dimension(format!(
            "{}D coefficients on a {}D domain",
            coeffs.dim,
            domain.dim()
        )));
    }
    for x in domain.boundary_samples(100) {
        let r = u.eval_at(x);
        if !(r.abs() <= 1e-12) {
            return Err(Error::BoundaryResidual {
                residual: r,
                x: x[0],
                y: x[1],
            });
        }
    }
    let grad = u.gradient()?;
    let [a11, a12, a22] = coeffs.a.clone();
    let p = [
        a11 * grad[0].clone() + a12.clone() * grad[1].clone(),
        a12 * grad[0].clone() + a22 * grad[1].clone(),
    ];
    let div_p = p[0].diff(Var::X)? + p[1].diff(Var::Y)?;
    let b = coeffs.b.clone();
    let b_grad_u = b[0].clone() * grad[0].clone() + b[1].clone() * grad[1].clone();
    let f = -div_p.clone() + b_grad_u.clone() + coeffs.c.clone() * u.clone();
    let q = [p[0].clone() - b[0].clone() * u.clone(), p[1].clone() - b[1].clone() * u.clone()];
    let div_q = div_p.clone() - coeffs.div_b.clone() * u.clone() - b_grad_u;
    Ok(ManufacturedCase {
        id: id.to_string(),
        domain,
        coeffs: coeffs.with_source(f),
        u: ExprScalar { value: u, grad },
        p: ExprVector { value: p, div: div_p },
        q: ExprVector { value: q, div: div_q },
    })
}

/// Largest residuals of a case at random interior points.
#[derive(Clone, Debug, PartialEq)]
pub struct CaseCheck {
    /// `-div p + b . grad u + c u - f`.
    pub strong_form1: f64,
    /// `-div q + (c - div b) u - f`.
    pub strong_form2: f64,
    /// Relative gap between `f` and a central-difference evaluation of the operator.
    pub finite_difference: f64,
}

pub fn check_case<R: Rng + ?Sized>(case: &ManufacturedCase, points: usize, rng: &mut R) -> CaseCheck {
    let k = &case.coeffs;
    let mut out = CaseCheck {
        strong_form1: 0.0,
        strong_form2: 0.0,
        finite_difference: 0.0,
    };
    let h = 1e-5;
    let dim = case.domain.dim();
    for _ in 0..points {
        let x = case.domain.random_interior(rng);
        let u = case.u.value.eval_at(x);
        let g = [case.u.grad[0].eval_at(x), case.u.grad[1].eval_at(x)];
        let b = k.b_at(x);
        let c = k.c_at(x);
        let f = k.f_at(x);
        let bg = b[0] * g[0] + b[1] * g[1];
        let r1 = -case.p.div.eval_at(x) + bg + c * u - f;
        let r2 = -case.q.div.eval_at(x) + (c - k.div_b_at(x)) * u - f;
        out.strong_form1 = out.strong_form1.max(r1.abs());
        out.strong_form2 = out.strong_form2.max(r2.abs());

        // central differences of u, then of A grad_h u
        let shift = |x: Point, d: usize, s: f64| {
            let mut y = x;
            y[d] += s;
            y
        };
        let grad_fd = |y: Point| {
            let mut g = [0.0; 2];
            for d in 0..dim {
                g[d] = (case.u.value.eval_at(shift(y, d, h)) - case.u.value.eval_at(shift(y, d, -h))) / (2.0 * h);
            }
            g
        };
        let flux_fd = |y: Point| {
            let a = k.a_at(y);
            let g = grad_fd(y);
            [a[0][0] * g[0] + a[0][1] * g[1], a[1][0] * g[0] + a[1][1] * g[1]]
        };
        let hd = 1e-4;
        let mut div = 0.0;
        for d in 0..dim {
            div += (flux_fd(shift(x, d, hd))[d] - flux_fd(shift(x, d, -hd))[d]) / (2.0 * hd);
        }
        let gfd = grad_fd(x);
        let f_fd = -div + b[0] * gfd[0] + b[1] * gfd[1] + c * u;
        out.finite_difference = out.finite_difference.max((f_fd - f).abs() / f.abs().max(1.0));
    }
    out
}

fn sin_pi(v: Expr) -> Expr {
    (Expr::constant(PI) * v).sin()
}

fn case(id: &str, domain: Domain, u: Expr, k: CoefficientSet) -> ManufacturedCase {
    manufacture_case(id, domain, u, k).unwrap_or_else(|e| panic!("catalog case {id}: {e}"))
}

/// The shipped manufactured cases.
pub fn catalog() -> Vec<ManufacturedCase> {
    let p = |s: &str| Expr::parse(s).unwrap_or_else(|e| panic!("{s}: {e}"));
    let u1 = sin_pi(Expr::x());
    let u2 = sin_pi(Expr::x()) * sin_pi(Expr::y());
    let k1 = |b: &str, div_b: &str, c: &str| {
        CoefficientSet::new(1, [p("1"), p("0"), p("1")], [p(b), p("0")], p(div_b), p(c), p("0")).unwrap()
    };
    let k2 = |a: [&str; 3], b: [&str; 2], c: &str| {
        CoefficientSet::new(2, [p(a[0]), p(a[1]), p(a[2])], [p(b[0]), p(b[1])], p("0"), p(c), p("0")).unwrap()
    };
    let line = Domain::unit_interval();
    let square = Domain::unit_square();
    vec![
        case("RD-1D", line, u1.clone(), k1("0", "0", "1").with_constants(1.0, 1.0, 1.0, 1.0, 0.0)),
        case("CRD-1D", line, u1.clone(), k1("1", "0", "1").with_constants(1.0, 1.0, 1.0, 1.0, 1.0)),
        case("CD-1D", line, u1.clone(), k1("-x", "-1", "0").with_constants(1.0, 1.0, 0.0, 1.0, 1.0)),
        case(
            "CRD-1D-compress",
            line,
            u1,
            k1("-x", "-1", "1").with_constants(1.0, 1.0, 1.0, 2.0, 1.0),
        ),
        case(
            "RD-2D",
            square,
            u2.clone(),
            k2(["1", "0", "1"], ["0", "0"], "1").with_constants(1.0, 1.0, 1.0, 1.0, 0.0),
        ),
        case(
            "CRD-2D-rot",
            square,
            u2.clone(),
            k2(["2", "0", "1"], ["y", "-x"], "1").with_constants(1.0, 2.0, 1.0, 1.0, 2.0),
        ),
        case(
            "SPLIT-2D",
            square,
            u2,
            k2(["1", "0", "1"], ["y", "-x"], "step(x - 0.5)").with_constants(1.0, 1.0, 1.0, 0.0, 2.0),
        ),
    ]
}

pub fn case_by_id(id: &str) -> Result<ManufacturedCase> {
    catalog()
        .into_iter()
        .find(|c| c.id.eq_ignore_ascii_case(id))
        .ok_or_else(|| Error::MissingOracle(format!("no manufactured case '{id}'")))
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum ErrorMeasure {
    Err1,
    Err2,
    Err3,
}

/// Smallest quadrature degree accepted by [`reference_error`].
pub const MIN_REFERENCE_DEGREE: usize = 10;

fn invert(w: f64, what: &str, x: Point) -> Result<f64> {
    if w >= 1e-14 {
        Ok(1.0 / w)
    } else {
        Err(Error::Regime(format!("{what} = {w:e} at ({}, {})", x[0], x[1])))
    }
}

/// True error measure of an approximation `(u_h, flux_h)` against the case's closed forms.
///
/// `flux_h` approximates `p` for ERR1/ERR3 and `q` for ERR2. ERR3 needs the split.
pub fn reference_error(
    mesh: &Mesh,
    case: &ManufacturedCase,
    u_h: &dyn ScalarFunction,
    flux_h: &dyn VectorFunction,
    which: ErrorMeasure,
    split: Option<&DomainSplit>,
    degree: usize,
) -> Result<Breakdown> {
    if degree < MIN_REFERENCE_DEGREE {
        return Err(Error::QuadratureUnavailable {
            dim: mesh.dim(),
            degree,
        });
    }
    if which == ErrorMeasure::Err3 && split.is_none() {
        return Err(Error::MissingOracle("ERR3 needs the zero-reaction split".into()));
    }
    let k = &case.coeffs;
    let exact_flux = if which == ErrorMeasure::Err2 { &case.q } else { &case.p };
    let mut sums = [0.0f64; 4];
    for cell in 0..mesh.num_cells() {
        let mut local = [0.0f64; 4];
        for qp in cell_points(mesh, cell, degree)? {
            let x = qp.x;
            let (xx, yy) = (x[0], x[1]);
            let a11 = k.a[0].eval(xx, yy);
            let a12 = k.a[1].eval(xx, yy);
            let a22 = k.a[2].eval(xx, yy);
            let det = a11 * a22 - a12 * a12;
            let (b1, b2) = (k.b[0].eval(xx, yy), k.b[1].eval(xx, yy));
            let c = k.c.eval(xx, yy);
            let db = k.div_b.eval(xx, yy);

            let e = case.u.value.eval(xx, yy) - u_h.value(&qp);
            let gh = u_h.gradient(&qp);
            let g0 = case.u.grad[0].eval(xx, yy) - gh[0];
            let g1 = case.u.grad[1].eval(xx, yy) - gh[1];
            let fh = flux_h.value(&qp);
            let mut s0 = exact_flux.value[0].eval(xx, yy) - fh[0];
            let mut s1 = exact_flux.value[1].eval(xx, yy) - fh[1];
            let d = exact_flux.div.eval(xx, yy) - flux_h.divergence(&qp);

            let grad_a = a11 * g0 * g0 + 2.0 * a12 * g0 * g1 + a22 * g1 * g1;
            let terms = match which {
                ErrorMeasure::Err1 | ErrorMeasure::Err3 => {
                    let reaction = if which == ErrorMeasure::Err3 {
                        let s = split.expect("checked above");
                        c + if s.is_zero_reaction(cell) { 1.0 } else { 0.0 }
                    } else {
                        c
                    };
                    let r = b1 * g0 + b2 * g1 - d;
                    [
                        (c - db).max(0.0) * e * e,
                        grad_a,
                        (a22 * s0 * s0 - 2.0 * a12 * s0 * s1 + a11 * s1 * s1) / det,
                        invert(reaction, "reaction weight", x)? * r * r,
                    ]
                }
                ErrorMeasure::Err2 => {
                    s0 += b1 * e;
                    s1 += b2 * e;
                    [
                        c.max(0.0) * e * e,
                        grad_a,
                        (a22 * s0 * s0 - 2.0 * a12 * s0 * s1 + a11 * s1 * s1) / det,
                        invert(c - db, "c - div b", x)? * d * d,
                    ]
                }
            };
            for i in 0..4 {
                local[i] += qp.weight * terms[i];
            }
        }
        for i in 0..4 {
            sums[i] += local[i];
        }
    }
    let (identity, names) = match which {
        ErrorMeasure::Err1 => (NormIdentity::Err1, crate::functionals::ERR1_TERMS),
        ErrorMeasure::Err2 => (NormIdentity::Err2, crate::functionals::ERR2_TERMS),
        ErrorMeasure::Err3 => (NormIdentity::Err3, crate::functionals::ERR3_TERMS),
    };
    Ok(Breakdown::new(identity, names.iter().copied().zip(sums).collect()))
}
