//! Error measures, majorants, minorants and local indicators.
//!
//! Every quantity is a sum of squared weighted norms. Each term is integrated cellwise
//! from a pointwise-expanded integrand and the cells are summed in ascending order.
//! Weights that must be inverted are checked at every quadrature node; a value below
//! 1e-14 is reported as a regime error.
//!
//! Regime preconditions are not re-validated here (see [`crate::coefficients::validate`]);
//! an invalid regime surfaces through the pointwise weight checks.

mod report;

pub use report::{ErrorReport, LevelRow};

use std::fmt;

use crate::coefficients::{sample_points, CoefficientSet, DomainSplit};
use crate::error::{Error, Result};
use crate::fem::{
    cell_integrals, direct_weight, integrate, inverse_weight, mat_vec, quad_form, sum_cells, Mat2, QuadPoint,
    Region, ScalarField, ScalarFunction, VectorFunction, Zero,
};
use crate::mesh::{Mesh, Point};
use crate::oracle::ManufacturedCase;
use crate::solver::{nodal_average, Formulation};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum NormIdentity {
    M1,
    Err1,
    M2,
    Err2,
    M3Plus,
    M3Minus,
    /// The lower bound that needs no sign condition on `div b`.
    M3Lower,
    Err3,
    HodivNorm,
}

impl fmt::Display for NormIdentity {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let s = match self {
            NormIdentity::M1 => "M1",
            NormIdentity::Err1 => "ERR1",
            NormIdentity::M2 => "M2",
            NormIdentity::Err2 => "ERR2",
            NormIdentity::M3Plus => "M3PLUS",
            NormIdentity::M3Minus => "M3MINUS",
            NormIdentity::M3Lower => "M3LOWER",
            NormIdentity::Err3 => "ERR3",
            NormIdentity::HodivNorm => "HODIV_NORM",
        };
        f.write_str(s)
    }
}

pub const M1_TERMS: [&str; 2] = ["residual_c_inv", "flux_a_inv"];
pub const M2_TERMS: [&str; 2] = ["residual_c_minus_div_b_inv", "total_flux_a_inv"];
pub const ERR1_TERMS: [&str; 4] = ["u_c_minus_div_b", "grad_a", "flux_a_inv", "conv_div_c_inv"];
pub const ERR2_TERMS: [&str; 4] = ["u_c", "grad_a", "total_flux_a_inv", "div_c_minus_div_b_inv"];
pub const ERR3_TERMS: [&str; 4] = ["u_c_minus_div_b", "grad_a", "flux_a_inv", "conv_div_c_hat_inv"];

/// Named squared-norm terms and their sum.
#[derive(Clone, Debug, PartialEq)]
pub struct Breakdown {
    pub identity: NormIdentity,
    pub terms: Vec<(String, f64)>,
    pub total: f64,
}

impl Breakdown {
    pub fn new(identity: NormIdentity, terms: Vec<(&str, f64)>) -> Breakdown {
        let total = terms.iter().map(|t| t.1).sum();
        Breakdown {
            identity,
            terms: terms.into_iter().map(|(n, v)| (n.to_string(), v)).collect(),
            total,
        }
    }

    pub fn term(&self, name: &str) -> Option<f64> {
        self.terms.iter().find(|t| t.0 == name).map(|t| t.1)
    }
}

impl fmt::Display for Breakdown {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        writeln!(f, "{} = {:.16e}", self.identity, self.total)?;
        for (n, v) in &self.terms {
            writeln!(f, "  {n:<28} {v:.16e}")?;
        }
        Ok(())
    }
}

/// `M / max(ERR, 1e-30)`.
pub fn efficiency_index(majorant: f64, error: f64) -> f64 {
    majorant / error.max(1e-30)
}

struct Coeffs {
    a: Mat2,
    a_inv: Mat2,
    b: Point,
    div_b: f64,
    c: f64,
    f: f64,
}

fn coeffs_at(k: &CoefficientSet, x: Point) -> Result<Coeffs> {
    Ok(Coeffs {
        a: k.a_at(x),
        a_inv: k.a_inv_at(x)?,
        b: k.b_at(x),
        div_b: k.div_b_at(x),
        c: k.c_at(x),
        f: k.f_at(x),
    })
}

fn dot(a: Point, b: Point) -> f64 {
    a[0] * b[0] + a[1] * b[1]
}

fn sub(a: Point, b: Point) -> Point {
    [a[0] - b[0], a[1] - b[1]]
}

fn finite_check(v: f64, x: Point) -> Result<f64> {
    if v.is_finite() {
        Ok(v)
    } else {
        Err(Error::NonFinite { value: v, x: x[0], y: x[1] })
    }
}

/// Per-cell `[c^{-1} r^2, |p - A grad u|^2_{A^{-1}}]` with `r = f - c u - b.grad u + div p`.
fn m1_cells<U: ScalarFunction, P: VectorFunction>(
    mesh: &Mesh,
    k: &CoefficientSet,
    u: &U,
    p: &P,
    degree: usize,
) -> Result<Vec<[f64; 2]>> {
    cell_integrals(mesh, degree, Region::All, |qp| {
        let d = coeffs_at(k, qp.x)?;
        let g = u.gradient(qp);
        let r = d.f - d.c * u.value(qp) - dot(d.b, g) + p.divergence(qp);
        let s = sub(p.value(qp), mat_vec(&d.a, g));
        Ok([
            finite_check(inverse_weight(d.c, "c", qp.x)? * r * r, qp.x)?,
            quad_form(&d.a_inv, s),
        ])
    })
}

/// `M1 = |f - c u - b.grad u + div p|^2_{c^{-1}} + |p - A grad u|^2_{A^{-1}}`.
pub fn majorant_m1<U: ScalarFunction, P: VectorFunction>(
    mesh: &Mesh,
    coeffs: &CoefficientSet,
    u: &U,
    p: &P,
    degree: usize,
) -> Result<Breakdown> {
    let s = sum_cells(&m1_cells(mesh, coeffs, u, p, degree)?);
    Ok(Breakdown::new(NormIdentity::M1, M1_TERMS.into_iter().zip(s).collect()))
}

/// `M2 = |f - (c - div b) u + div q|^2_{(c-div b)^{-1}} + |q - A grad u + b u|^2_{A^{-1}}`.
pub fn majorant_m2<U: ScalarFunction, Q: VectorFunction>(
    mesh: &Mesh,
    coeffs: &CoefficientSet,
    u: &U,
    q: &Q,
    degree: usize,
) -> Result<Breakdown> {
    let cells = cell_integrals(mesh, degree, Region::All, |qp| {
        let d = coeffs_at(coeffs, qp.x)?;
        let v = u.value(qp);
        let g = u.gradient(qp);
        let r = d.f - (d.c - d.div_b) * v + q.divergence(qp);
        let ag = mat_vec(&d.a, g);
        let qv = q.value(qp);
        let s = [qv[0] - ag[0] + d.b[0] * v, qv[1] - ag[1] + d.b[1] * v];
        Ok([
            finite_check(inverse_weight(d.c - d.div_b, "c - div b", qp.x)? * r * r, qp.x)?,
            quad_form(&d.a_inv, s),
        ])
    })?;
    let s = sum_cells(&cells);
    Ok(Breakdown::new(NormIdentity::M2, M2_TERMS.into_iter().zip(s).collect()))
}

/// Per-cell ERR1 terms; with a split the last weight becomes `c_hat^{-1}`.
fn err1_cells<U: ScalarFunction, P: VectorFunction>(
    mesh: &Mesh,
    case: &ManufacturedCase,
    u: &U,
    p: &P,
    split: Option<&DomainSplit>,
    degree: usize,
) -> Result<Vec<[f64; 4]>> {
    let k = &case.coeffs;
    cell_integrals(mesh, degree, Region::All, |qp| {
        let d = coeffs_at(k, qp.x)?;
        let e = case.u.value(qp) - u.value(qp);
        let ge = sub(case.u.gradient(qp), u.gradient(qp));
        let ep = sub(case.p.value(qp), p.value(qp));
        let r = dot(d.b, ge) - (case.p.divergence(qp) - p.divergence(qp));
        let reaction = match split {
            Some(s) => s.c_hat(k, qp.cell, qp.x),
            None => d.c,
        };
        Ok([
            direct_weight(d.c - d.div_b, "c - div b", qp.x)? * e * e,
            quad_form(&d.a, ge),
            quad_form(&d.a_inv, ep),
            finite_check(inverse_weight(reaction, "reaction weight", qp.x)? * r * r, qp.x)?,
        ])
    })
}

/// True error of `(u, p)` against the case, the left-hand side of the first equality.
pub fn error_norm_1<U: ScalarFunction, P: VectorFunction>(
    mesh: &Mesh,
    case: &ManufacturedCase,
    u: &U,
    p: &P,
    degree: usize,
) -> Result<Breakdown> {
    let s = sum_cells(&err1_cells(mesh, case, u, p, None, degree)?);
    Ok(Breakdown::new(NormIdentity::Err1, ERR1_TERMS.into_iter().zip(s).collect()))
}

/// True error of `(u, q)` for the total-flux formulation.
pub fn error_norm_2<U: ScalarFunction, Q: VectorFunction>(
    mesh: &Mesh,
    case: &ManufacturedCase,
    u: &U,
    q: &Q,
    degree: usize,
) -> Result<Breakdown> {
    let k = &case.coeffs;
    let cells = cell_integrals(mesh, degree, Region::All, |qp| {
        let d = coeffs_at(k, qp.x)?;
        let e = case.u.value(qp) - u.value(qp);
        let ge = sub(case.u.gradient(qp), u.gradient(qp));
        let eq = sub(case.q.value(qp), q.value(qp));
        let s = [eq[0] + d.b[0] * e, eq[1] + d.b[1] * e];
        let dv = case.q.divergence(qp) - q.divergence(qp);
        Ok([
            direct_weight(d.c, "c", qp.x)? * e * e,
            quad_form(&d.a, ge),
            quad_form(&d.a_inv, s),
            finite_check(inverse_weight(d.c - d.div_b, "c - div b", qp.x)? * dv * dv, qp.x)?,
        ])
    })?;
    let s = sum_cells(&cells);
    Ok(Breakdown::new(NormIdentity::Err2, ERR2_TERMS.into_iter().zip(s).collect()))
}

/// Error measure with the reaction weight `c_hat = c + 1` on the zero-reaction region.
pub fn error_norm_3<U: ScalarFunction, P: VectorFunction>(
    mesh: &Mesh,
    case: &ManufacturedCase,
    u: &U,
    p: &P,
    split: &DomainSplit,
    degree: usize,
) -> Result<Breakdown> {
    let s = sum_cells(&err1_cells(mesh, case, u, p, Some(split), degree)?);
    Ok(Breakdown::new(NormIdentity::Err3, ERR3_TERMS.into_iter().zip(s).collect()))
}

#[derive(Clone, Debug, PartialEq)]
pub struct M3Bounds {
    pub plus: Breakdown,
    /// Present only when `-div b >= 0` on the reacting region.
    pub minus: Option<Breakdown>,
    pub simple_lower: Breakdown,
    /// `max{2, sqrt(1 + 4 C_F^2 / alpha)}`.
    pub ratio_bound: f64,
}

/// Sampled test of `-div b >= 0` on the given cells (with the usual 1e-12 slack).
pub fn neg_div_b_nonnegative(mesh: &Mesh, coeffs: &CoefficientSet, cells: &[usize]) -> Result<bool> {
    for &c in cells {
        for x in sample_points(mesh, c)? {
            if -coeffs.div_b_at(x) < -1e-12 {
                return Ok(false);
            }
        }
    }
    Ok(true)
}

/// `[R_c, R_0, F]`: reacting residual, zero-reaction residual, flux mismatch.
fn m3_parts<U: ScalarFunction, P: VectorFunction>(
    mesh: &Mesh,
    k: &CoefficientSet,
    u: &U,
    p: &P,
    split: &DomainSplit,
    degree: usize,
) -> Result<[f64; 3]> {
    let cells = cell_integrals(mesh, degree, Region::All, |qp| {
        let d = coeffs_at(k, qp.x)?;
        let g = u.gradient(qp);
        let s = sub(p.value(qp), mat_vec(&d.a, g));
        let flux = quad_form(&d.a_inv, s);
        let r0 = d.f - dot(d.b, g) + p.divergence(qp);
        if split.is_zero_reaction(qp.cell) {
            Ok([0.0, r0 * r0, flux])
        } else {
            let r = r0 - d.c * u.value(qp);
            Ok([finite_check(inverse_weight(d.c, "c", qp.x)? * r * r, qp.x)?, 0.0, flux])
        }
    })?;
    Ok(sum_cells(&cells))
}

fn check_friedrichs(cf: f64) -> Result<()> {
    if cf.is_finite() && cf > 0.0 {
        Ok(())
    } else {
        Err(Error::Regime(format!("Friedrichs constant must be positive, got {cf}")))
    }
}

/// Two-sided bounds for the error measure with a zero-reaction region.
pub fn bounds_m3<U: ScalarFunction, P: VectorFunction>(
    mesh: &Mesh,
    coeffs: &CoefficientSet,
    u: &U,
    p: &P,
    split: &DomainSplit,
    c_f: f64,
    degree: usize,
) -> Result<M3Bounds> {
    check_friedrichs(c_f)?;
    let [rc, r0, fl] = m3_parts(mesh, coeffs, u, p, split, degree)?;
    let k = 1.0 + 4.0 * c_f * c_f / coeffs.alpha;
    let plus = Breakdown::new(
        NormIdentity::M3Plus,
        vec![("2*residual_c_inv", 2.0 * rc), ("2*flux_a_inv", 2.0 * fl), ("k*residual_zero", k * r0)],
    );
    let simple_lower = Breakdown::new(
        NormIdentity::M3Lower,
        vec![("residual_zero", r0), ("flux_a_inv/2", 0.5 * fl)],
    );
    let minus = if neg_div_b_nonnegative(mesh, coeffs, split.omega_c())? {
        Some(Breakdown::new(
            NormIdentity::M3Minus,
            vec![("residual_c_inv/2", 0.5 * rc), ("flux_a_inv/2", 0.5 * fl), ("residual_zero", r0)],
        ))
    } else {
        None
    };
    Ok(M3Bounds {
        plus,
        minus,
        simple_lower,
        ratio_bound: 2.0f64.max(k.sqrt()),
    })
}

/// Upper bound with a free Young constant `gamma > 1`; `gamma = 2` gives `M3PLUS`.
///
/// The bound is `g (R_c + F) + (1 + g gamma C_F^2 / alpha) R_0` with `g = gamma / (gamma - 1)`.
pub fn m3_plus_with_young<U: ScalarFunction, P: VectorFunction>(
    mesh: &Mesh,
    coeffs: &CoefficientSet,
    u: &U,
    p: &P,
    split: &DomainSplit,
    c_f: f64,
    gamma: f64,
    degree: usize,
) -> Result<Breakdown> {
    check_friedrichs(c_f)?;
    if !(gamma > 1.0) || !gamma.is_finite() {
        return Err(Error::Regime(format!("Young constant must exceed 1, got {gamma}")));
    }
    let [rc, r0, fl] = m3_parts(mesh, coeffs, u, p, split, degree)?;
    let g = gamma / (gamma - 1.0);
    let k = 1.0 + g * gamma * c_f * c_f / coeffs.alpha;
    Ok(Breakdown::new(
        NormIdentity::M3Plus,
        vec![("g*residual_c_inv", g * rc), ("g*flux_a_inv", g * fl), ("k*residual_zero", k * r0)],
    ))
}

#[derive(Clone, Debug, PartialEq)]
pub struct Indicators {
    /// `eta_T^2` per cell.
    pub eta_sq: Vec<f64>,
    /// `e_T^2` per cell, when an exact solution is known.
    pub e_sq: Option<Vec<f64>>,
}

impl Indicators {
    pub fn eta_total(&self) -> f64 {
        self.eta_sq.iter().sum()
    }

    pub fn e_total(&self) -> Option<f64> {
        self.e_sq.as_ref().map(|e| e.iter().sum())
    }
}

/// Cell restrictions of M1 and, given a case, of ERR1.
pub fn local_indicators<U: ScalarFunction, P: VectorFunction>(
    mesh: &Mesh,
    coeffs: &CoefficientSet,
    u: &U,
    p: &P,
    case: Option<&ManufacturedCase>,
    degree: usize,
) -> Result<Indicators> {
    let eta_sq = m1_cells(mesh, coeffs, u, p, degree)?.iter().map(|t| t[0] + t[1]).collect();
    let e_sq = match case {
        Some(c) => Some(
            err1_cells(mesh, c, u, p, None, degree)?
                .iter()
                .map(|t| t[0] + t[1] + t[2] + t[3])
                .collect(),
        ),
        None => None,
    };
    Ok(Indicators { eta_sq, e_sq })
}

#[derive(Clone, Debug, PartialEq)]
pub struct PrimalBounds {
    /// Bounds `|u - u_h|^2_{c - div b}`.
    pub bound1: f64,
    /// Bounds `|u - u_h|^2_{-div b}`; present when `-div b >= b0 > 0`.
    pub bound2: Option<f64>,
    pub residual: f64,
    pub flux: f64,
}

/// Smallest sampled value of `-div b`.
pub fn min_neg_div_b(mesh: &Mesh, coeffs: &CoefficientSet) -> Result<f64> {
    let mut m = f64::INFINITY;
    for c in 0..mesh.num_cells() {
        for x in sample_points(mesh, c)? {
            m = m.min(-coeffs.div_b_at(x));
        }
    }
    Ok(m)
}

/// Bounds on the primal error alone for an arbitrary flux `phi`.
pub fn primal_bounds<U: ScalarFunction, P: VectorFunction>(
    mesh: &Mesh,
    coeffs: &CoefficientSet,
    u: &U,
    phi: &P,
    degree: usize,
) -> Result<PrimalBounds> {
    let [residual, flux] = sum_cells(&m1_cells(mesh, coeffs, u, phi, degree)?);
    let bound2 = if min_neg_div_b(mesh, coeffs)? > 0.0 {
        Some(0.5 * (residual + flux))
    } else {
        None
    };
    Ok(PrimalBounds {
        bound1: residual + 0.5 * flux,
        bound2,
        residual,
        flux,
    })
}

#[derive(Clone, Debug, PartialEq)]
pub struct PostprocessedBound {
    /// Bounds `|u - u_pc|_{c - div b}` (not squared).
    pub bound_c: f64,
    /// Bounds `|u - u_pc|_{-div b}`; present when `-div b >= b0 > 0`.
    pub bound_b: Option<f64>,
    /// Nodal average of the cellwise-constant field.
    pub averaged: Vec<f64>,
    pub bound1_at_average: f64,
    pub distance_c: f64,
    pub distance_b: Option<f64>,
}

/// Bounds for a cellwise-constant approximation through its nodal average `G(u_pc)`.
///
/// `phi` is any flux; typically the reconstruction from `G(u_pc)`.
pub fn postprocessed_primal_bound<P: VectorFunction>(
    mesh: &Mesh,
    coeffs: &CoefficientSet,
    u_pc: &[f64],
    phi: &P,
    degree: usize,
) -> Result<PostprocessedBound> {
    let g = nodal_average(mesh, u_pc)?;
    let pb = primal_bounds(mesh, coeffs, &g, phi, degree)?;
    let dist = sum_cells(&cell_integrals(mesh, degree, Region::All, |qp| {
        let d = g.value(qp) - u_pc[qp.cell];
        let db = coeffs.div_b_at(qp.x);
        let c = coeffs.c_at(qp.x);
        Ok([
            direct_weight(c - db, "c - div b", qp.x)? * d * d,
            direct_weight(-db, "-div b", qp.x).unwrap_or(0.0) * d * d,
        ])
    })?);
    let distance_c = dist[0].sqrt();
    let distance_b = pb.bound2.map(|_| dist[1].sqrt());
    Ok(PostprocessedBound {
        bound_c: pb.bound1.sqrt() + distance_c,
        bound_b: pb.bound2.zip(distance_b).map(|(b, d)| b.sqrt() + d),
        averaged: g.values().to_vec(),
        bound1_at_average: pb.bound1,
        distance_c,
        distance_b,
    })
}

fn source_norm_sq(mesh: &Mesh, coeffs: &CoefficientSet, form: Formulation, degree: usize) -> Result<f64> {
    let cells = cell_integrals(mesh, degree, Region::All, |qp| {
        let f = coeffs.f_at(qp.x);
        let w = match form {
            Formulation::Form1 => inverse_weight(coeffs.c_at(qp.x), "c", qp.x)?,
            Formulation::Form2 => inverse_weight(coeffs.c_at(qp.x) - coeffs.div_b_at(qp.x), "c - div b", qp.x)?,
        };
        Ok([w * f * f])
    })?;
    Ok(sum_cells(&cells)[0])
}

/// Relative gap between the solution norm and the weighted source norm.
///
/// The solution norm is the error measure of the zero pair. A zero source gives the
/// absolute value of the solution norm.
pub fn isometry_residual(mesh: &Mesh, case: &ManufacturedCase, form: Formulation, degree: usize) -> Result<f64> {
    let n = match form {
        Formulation::Form1 => error_norm_1(mesh, case, &Zero, &Zero, degree)?.total,
        Formulation::Form2 => error_norm_2(mesh, case, &Zero, &Zero, degree)?.total,
    };
    let f = source_norm_sq(mesh, &case.coeffs, form, degree)?;
    if f == 0.0 {
        Ok(n.abs())
    } else {
        Ok((n - f).abs() / f)
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct IdentityResidual {
    /// `|<b.grad v, w> + <b v, grad w> + <(div b) v, w>|`.
    pub identity: f64,
    /// `| |w|^2_{-div b} - 2 <b.grad w, w> |`.
    pub convection: f64,
}

pub fn identity_residual(
    mesh: &Mesh,
    coeffs: &CoefficientSet,
    v: &ScalarField<'_>,
    w: &ScalarField<'_>,
    degree: usize,
) -> Result<IdentityResidual> {
    if !v.zero_boundary() || !w.zero_boundary() {
        return Err(Error::BoundaryCondition("identity needs zero-boundary fields".into()));
    }
    let cells = cell_integrals(mesh, degree, Region::All, |qp: &QuadPoint| {
        let b = coeffs.b_at(qp.x);
        let db = coeffs.div_b_at(qp.x);
        let (vv, gv) = (v.value(qp), v.gradient(qp));
        let (ww, gw) = (w.value(qp), w.gradient(qp));
        Ok([
            dot(b, gv) * ww + vv * dot(b, gw) + db * vv * ww,
            -db * ww * ww - 2.0 * dot(b, gw) * ww,
        ])
    })?;
    let [i, c] = sum_cells(&cells);
    Ok(IdentityResidual {
        identity: i.abs(),
        convection: c.abs(),
    })
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum Equivalence {
    /// Potential-flux norm with `c >= c0 > 0`.
    Form1,
    /// Total-flux norm with `c >= c0 > 0`.
    Form2,
    /// Total-flux norm for `c = 0` on a bounded domain, via the Friedrichs inequality.
    Form2Friedrichs,
}

#[derive(Clone, Debug, PartialEq)]
pub struct NormEquivalence {
    pub variant: Equivalence,
    /// Squared composite norm of the formulation.
    pub composite: f64,
    /// Squared product norm `H`.
    pub product: f64,
    /// `composite / max{2, 1 + 2K}`.
    pub lower: f64,
    /// `2 (1 + K) composite`.
    pub upper: f64,
    pub k: f64,
    pub holds: bool,
}

fn le_with_slack(lhs: f64, rhs: f64) -> bool {
    lhs <= rhs + 1e-12 * rhs.abs().max(1.0)
}

/// Evaluates both sides of the equivalence between the composite norm of a formulation
/// and the plain product norm, for the pair `(x, y)`.
pub fn norm_equivalence_check<X: ScalarFunction, Y: VectorFunction>(
    mesh: &Mesh,
    coeffs: &CoefficientSet,
    x: &X,
    y: &Y,
    c_f: Option<f64>,
    variant: Equivalence,
    degree: usize,
) -> Result<NormEquivalence> {
    let k = match variant {
        Equivalence::Form1 | Equivalence::Form2 => {
            if !(coeffs.c0 > 0.0) {
                return Err(Error::Regime("norm equivalence needs c0 > 0".into()));
            }
            coeffs.b_inf_sq / (coeffs.alpha * coeffs.c0)
        }
        Equivalence::Form2Friedrichs => {
            let cf = c_f.ok_or_else(|| Error::Regime("Friedrichs variant needs C_F".into()))?;
            check_friedrichs(cf)?;
            coeffs.b_inf_sq * cf * cf / (coeffs.alpha * coeffs.alpha)
        }
    };
    let cells = cell_integrals(mesh, degree, Region::All, |qp| {
        let d = coeffs_at(coeffs, qp.x)?;
        let xv = x.value(qp);
        let gx = x.gradient(qp);
        let yv = y.value(qp);
        let dy = y.divergence(qp);
        let grad = quad_form(&d.a, gx);
        let flux = quad_form(&d.a_inv, yv);
        Ok(match variant {
            Equivalence::Form1 => {
                let u = direct_weight(d.c - d.div_b, "c - div b", qp.x)? * xv * xv;
                let ci = inverse_weight(d.c, "c", qp.x)?;
                let r = dot(d.b, gx) - dy;
                // composite: u, grad, flux, ci r^2; product: u, grad, flux, ci dy^2
                [u + grad + flux + ci * r * r, u + grad + flux + ci * dy * dy]
            }
            Equivalence::Form2 | Equivalence::Form2Friedrichs => {
                let u = direct_weight(d.c, "c", qp.x)? * xv * xv;
                let wi = inverse_weight(d.c - d.div_b, "c - div b", qp.x)?;
                let t = [yv[0] + d.b[0] * xv, yv[1] + d.b[1] * xv];
                [
                    u + grad + quad_form(&d.a_inv, t) + wi * dy * dy,
                    u + grad + flux + wi * dy * dy,
                ]
            }
        })
    })?;
    let [composite, product] = sum_cells(&cells);
    let lower = composite / 2.0f64.max(1.0 + 2.0 * k);
    let upper = 2.0 * (1.0 + k) * composite;
    Ok(NormEquivalence {
        variant,
        composite,
        product,
        lower,
        upper,
        k,
        holds: le_with_slack(lower, product) && le_with_slack(product, upper),
    })
}

/// Majorant divided by the weighted source norm of its formulation.
pub fn normalized_efficiency(
    mesh: &Mesh,
    majorant: &Breakdown,
    coeffs: &CoefficientSet,
    form: Formulation,
    degree: usize,
) -> Result<f64> {
    let f = source_norm_sq(mesh, coeffs, form, degree)?;
    if f == 0.0 {
        return Err(Error::Regime("zero source: normalization undefined".into()));
    }
    Ok(majorant.total / f)
}

/// Integral of `w (x) g(x)^2` for a plain weight closure; used by diagnostics.
pub fn weighted_square<G, W>(mesh: &Mesh, degree: usize, weight: W, g: G) -> Result<f64>
where
    G: Fn(&QuadPoint) -> f64,
    W: Fn(Point) -> f64,
{
    integrate(mesh, degree, Region::All, |qp| {
        let v = g(qp);
        weight(qp.x) * v * v
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::coefficients::split_domain;
    use crate::fem::{interpolate_scalar, FluxField, REFERENCE_DEGREE};
    use crate::oracle::{case_by_id, reference_error, ErrorMeasure};
    use crate::solver::{reconstruct_flux, solve_primal, FluxKind};
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    const D: usize = REFERENCE_DEGREE;

    fn rel(a: f64, b: f64) -> f64 {
        (a - b).abs() / b.abs().max(1e-30)
    }

    #[test]
    fn breakdown_sums_terms() {
        let b = Breakdown::new(NormIdentity::M1, vec![("a", 1.5), ("b", 2.25)]);
        assert_eq!(b.total, 3.75);
        assert_eq!(b.term("b"), Some(2.25));
        assert_eq!(NormIdentity::HodivNorm.to_string(), "HODIV_NORM");
    }

    #[test]
    fn exact_pair_gives_zero_majorant() {
        let c = case_by_id("CRD-1D").unwrap();
        let mesh = c.domain.mesh(8).unwrap();
        let m = majorant_m1(&mesh, &c.coeffs, &c.u, &c.p, D).unwrap();
        let f = source_norm_sq(&mesh, &c.coeffs, Formulation::Form1, D).unwrap();
        assert!(m.total <= 1e-16 * f, "{}", m.total);
        assert!(error_norm_1(&mesh, &c, &c.u, &c.p, D).unwrap().total < 1e-20);
    }

    #[test]
    fn zero_pair_gives_source_norm() {
        let c = case_by_id("RD-2D").unwrap();
        let mesh = c.domain.mesh(4).unwrap();
        let m = majorant_m1(&mesh, &c.coeffs, &Zero, &Zero, D).unwrap();
        let f = source_norm_sq(&mesh, &c.coeffs, Formulation::Form1, D).unwrap();
        assert!(rel(m.total, f) < 1e-14);
        assert_eq!(normalized_efficiency(&mesh, &m, &c.coeffs, Formulation::Form1, D).unwrap(), m.total / f);
        let c = case_by_id("CD-1D").unwrap();
        let mesh = c.domain.mesh(4).unwrap();
        let m = majorant_m2(&mesh, &c.coeffs, &Zero, &Zero, D).unwrap();
        let f = source_norm_sq(&mesh, &c.coeffs, Formulation::Form2, D).unwrap();
        assert!(rel(m.total, f) < 1e-14);
    }

    #[test]
    fn m1_equals_err1_on_interpolant() {
        let c = case_by_id("CRD-1D").unwrap();
        let mesh = c.domain.mesh(32).unwrap();
        let uh = interpolate_scalar(&mesh, |x| c.u.value.eval_at(x), true).unwrap();
        let ph = reconstruct_flux(&uh, &c.coeffs, FluxKind::Diffusive, D).unwrap();
        let m = majorant_m1(&mesh, &c.coeffs, &uh, &ph, D).unwrap();
        let e = reference_error(&mesh, &c, &uh, &ph, ErrorMeasure::Err1, None, D).unwrap();
        assert!(rel(m.total, e.total) < 1e-8, "{} vs {}", m.total, e.total);
        let e1 = error_norm_1(&mesh, &c, &uh, &ph, D).unwrap();
        assert!(rel(e1.total, e.total) < 1e-10);
    }

    #[test]
    fn m2_equals_err2_convection_diffusion() {
        let c = case_by_id("CD-1D").unwrap();
        let mesh = c.domain.mesh(16).unwrap();
        let uh = solve_primal(&mesh, &c.coeffs, Formulation::Form2, 5).unwrap();
        let qh = reconstruct_flux(&uh, &c.coeffs, FluxKind::Total, D).unwrap();
        let m = majorant_m2(&mesh, &c.coeffs, &uh, &qh, D).unwrap();
        let e = error_norm_2(&mesh, &c, &uh, &qh, D).unwrap();
        assert!(rel(m.total, e.total) < 1e-8, "{} vs {}", m.total, e.total);
        assert_eq!(e.term("u_c"), Some(0.0));
    }

    #[test]
    fn m3_without_zero_region_reduces_to_m1() {
        let c = case_by_id("RD-2D").unwrap();
        let mesh = c.domain.mesh(4).unwrap();
        let split = split_domain(&c.coeffs, &mesh).unwrap();
        assert!(split.omega0().is_empty());
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let uh = ScalarField::random(&mesh, &mut rng, true);
        let ph = FluxField::random(&mesh, &mut rng);
        let m1 = majorant_m1(&mesh, &c.coeffs, &uh, &ph, D).unwrap().total;
        let b = bounds_m3(&mesh, &c.coeffs, &uh, &ph, &split, 1.0 / std::f64::consts::PI, D).unwrap();
        assert!(rel(b.plus.total, 2.0 * m1) < 1e-14);
        assert!(rel(b.minus.unwrap().total, 0.5 * m1) < 1e-14);
        let e3 = error_norm_3(&mesh, &c, &uh, &ph, &split, D).unwrap().total;
        let e1 = error_norm_1(&mesh, &c, &uh, &ph, D).unwrap().total;
        assert!(rel(e3, e1) < 1e-14);
        let y = m3_plus_with_young(&mesh, &c.coeffs, &uh, &ph, &split, 0.3, 2.0, D).unwrap();
        assert!(rel(y.total, b.plus.total) < 1e-14);
    }

    #[test]
    fn m3_sandwich_on_split_case() {
        let c = case_by_id("SPLIT-2D").unwrap();
        let mesh = c.domain.mesh(4).unwrap();
        let split = split_domain(&c.coeffs, &mesh).unwrap();
        assert_eq!(split.omega0().len(), 16);
        let cf = crate::coefficients::friedrichs_upper_bound(&mesh).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(6);
        for _ in 0..5 {
            let uh = ScalarField::random(&mesh, &mut rng, true);
            let ph = FluxField::random(&mesh, &mut rng);
            let b = bounds_m3(&mesh, &c.coeffs, &uh, &ph, &split, cf, D).unwrap();
            let e = error_norm_3(&mesh, &c, &uh, &ph, &split, D).unwrap().total;
            let minus = b.minus.as_ref().unwrap().total;
            assert!(b.simple_lower.total <= e + 1e-10 && minus <= e + 1e-10 && e <= b.plus.total + 1e-10);
            assert!((b.plus.total / minus).sqrt() <= b.ratio_bound + 1e-10);
            for gamma in [1.5, 3.0, 10.0] {
                let y = m3_plus_with_young(&mesh, &c.coeffs, &uh, &ph, &split, cf, gamma, D).unwrap();
                assert!(e <= y.total + 1e-10);
            }
        }
    }

    #[test]
    fn indicators_sum_to_globals() {
        let c = case_by_id("CRD-2D-rot").unwrap();
        let mesh = c.domain.mesh(4).unwrap();
        let uh = solve_primal(&mesh, &c.coeffs, Formulation::Form1, 5).unwrap();
        let ph = reconstruct_flux(&uh, &c.coeffs, FluxKind::Diffusive, D).unwrap();
        let ind = local_indicators(&mesh, &c.coeffs, &uh, &ph, Some(&c), D).unwrap();
        let m = majorant_m1(&mesh, &c.coeffs, &uh, &ph, D).unwrap().total;
        let e = error_norm_1(&mesh, &c, &uh, &ph, D).unwrap().total;
        assert!(rel(ind.eta_total(), m) < 1e-12);
        assert!(rel(ind.e_total().unwrap(), e) < 1e-12);
        for (eta, e) in ind.eta_sq.iter().zip(ind.e_sq.as_ref().unwrap()) {
            assert!(*eta <= 2.0 * e + 1e-12);
        }
    }

    #[test]
    fn primal_bounds_dominate() {
        let c = case_by_id("CRD-1D-compress").unwrap();
        let mesh = c.domain.mesh(8).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        for _ in 0..10 {
            let uh = ScalarField::random(&mesh, &mut rng, true);
            let phi = FluxField::random(&mesh, &mut rng);
            let pb = primal_bounds(&mesh, &c.coeffs, &uh, &phi, D).unwrap();
            let e = error_norm_1(&mesh, &c, &uh, &phi, D).unwrap();
            assert!(e.term("u_c_minus_div_b").unwrap() <= pb.bound1);
            let eb = weighted_square(&mesh, D, |x| -c.coeffs.div_b_at(x), |qp| c.u.value(qp) - uh.value(qp)).unwrap();
            assert!(eb <= pb.bound2.unwrap());
        }
        let zero = primal_bounds(&mesh, &c.coeffs, &c.u, &c.p, D).unwrap();
        assert!(zero.bound1 < 1e-20 && zero.bound2.unwrap() < 1e-20);
    }

    #[test]
    fn postprocessed_bound_zero_data() {
        let k = CoefficientSet::parse(1, ["1", "0", "1"], ["-x", "0"], "-1", "1", "0").unwrap();
        let mesh = crate::mesh::build_interval_mesh(0.0, 1.0, 4).unwrap();
        let b = postprocessed_primal_bound(&mesh, &k, &[0.0; 4], &Zero, D).unwrap();
        assert_eq!(b.bound_c, 0.0);
        assert_eq!(b.bound_b, Some(0.0));
    }

    #[test]
    fn isometry_on_catalog() {
        for id in ["RD-1D", "CRD-1D", "CRD-2D-rot"] {
            let c = case_by_id(id).unwrap();
            let mesh = c.domain.mesh(8).unwrap();
            assert!(isometry_residual(&mesh, &c, Formulation::Form1, D).unwrap() <= 1e-8, "{id}");
            assert!(isometry_residual(&mesh, &c, Formulation::Form2, D).unwrap() <= 1e-8, "{id}");
        }
    }

    #[test]
    fn identity_with_constant_and_polynomial_b() {
        let mesh = crate::mesh::build_unit_square_mesh(8).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(8);
        let v = ScalarField::random(&mesh, &mut rng, true);
        let w = ScalarField::random(&mesh, &mut rng, true);
        let k = CoefficientSet::parse(2, ["1", "0", "1"], ["1", "2"], "0", "1", "0").unwrap();
        let r = identity_residual(&mesh, &k, &v, &w, 4).unwrap();
        assert!(r.identity <= 1e-13 && r.convection <= 1e-13, "{r:?}");
        let k = CoefficientSet::parse(2, ["1", "0", "1"], ["x^2", "x*y"], "3*x", "1", "0").unwrap();
        let r = identity_residual(&mesh, &k, &v, &w, 4).unwrap();
        assert!(r.identity <= 1e-12 && r.convection <= 1e-12, "{r:?}");
        let zero = ScalarField::zeros(&mesh, true);
        assert_eq!(identity_residual(&mesh, &k, &zero, &w, 4).unwrap().identity, 0.0);
    }

    #[test]
    fn norm_equivalence_with_zero_convection_is_tight() {
        let mesh = crate::mesh::build_unit_square_mesh(4).unwrap();
        let k = CoefficientSet::parse(2, ["1", "0", "1"], ["0", "0"], "0", "1", "0")
            .unwrap()
            .with_constants(1.0, 1.0, 1.0, 1.0, 0.0);
        let mut rng = ChaCha8Rng::seed_from_u64(9);
        let x = ScalarField::random(&mesh, &mut rng, false);
        let y = FluxField::random(&mesh, &mut rng);
        for v in [Equivalence::Form1, Equivalence::Form2] {
            let r = norm_equivalence_check(&mesh, &k, &x, &y, None, v, 5).unwrap();
            assert!(rel(r.composite, r.product) < 1e-14);
            assert_eq!(r.k, 0.0);
            assert!(r.holds);
        }
        let z = norm_equivalence_check(&mesh, &k, &Zero, &Zero, None, Equivalence::Form1, 5).unwrap();
        assert!(z.holds && z.product == 0.0);
    }

    #[test]
    fn weight_underflow_is_a_regime_error() {
        let c = case_by_id("CD-1D").unwrap();
        let mesh = c.domain.mesh(4).unwrap();
        let err = majorant_m1(&mesh, &c.coeffs, &Zero, &Zero, D).unwrap_err();
        assert!(matches!(err, Error::Regime(_)));
    }
}
