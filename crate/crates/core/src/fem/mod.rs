//! Discrete spaces, quadrature over meshes, and weighted norms.
//!
//! [`ScalarField`] is the continuous piecewise-linear space with vertex values.
//! [`FluxField`] is the lowest-order H(div) space with one normal-flux value per facet:
//! on a triangle `T` the basis function of its facet `E` opposite vertex `P` is
//! `s (x - P) / (2|T|)` with `s = +1` when the stored facet normal is outward for `T`,
//! so the dof equals the total flux through `E` along the stored normal. In 1D the flux
//! space is the continuous piecewise-linear space and the dof is the point value.

pub mod quadrature;

use rand::Rng;

use crate::error::{Error, Result};
use crate::expr::Expr;
use crate::mesh::{Mesh, Point};

pub use quadrature::{rule, QuadratureRule, MAX_DEGREE};

pub type Mat2 = [[f64; 2]; 2];

/// Default exactness degree for assembly and estimator evaluation.
pub const ASSEMBLY_DEGREE: usize = 5;
/// Default exactness degree for reference (oracle) integrals.
pub const REFERENCE_DEGREE: usize = 12;

/// Mapped quadrature point. `weight` already includes the cell Jacobian.
#[derive(Clone, Debug, PartialEq)]
pub struct QuadPoint {
    pub cell: usize,
    pub x: Point,
    pub bary: [f64; 3],
    pub weight: f64,
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub enum Region<'a> {
    All,
    Cell(usize),
    /// Arbitrary cell subset; summed in ascending index order.
    Cells(&'a [usize]),
}

impl Region<'_> {
    fn cells(&self, mesh: &Mesh) -> Result<Vec<usize>> {
        match *self {
            Region::All => Ok((0..mesh.num_cells()).collect()),
            Region::Cell(c) => {
                mesh.check_cell(c)?;
                Ok(vec![c])
            }
            Region::Cells(list) => {
                for &c in list {
                    mesh.check_cell(c)?;
                }
                let mut v = list.to_vec();
                v.sort_unstable();
                v.dedup();
                Ok(v)
            }
        }
    }
}

/// Quadrature points of `cell` for a rule of the given exactness degree.
pub fn cell_points(mesh: &Mesh, cell: usize, degree: usize) -> Result<Vec<QuadPoint>> {
    let r = rule(mesh.dim(), degree)?;
    let verts = mesh.cell(cell);
    let g = mesh.geometry(cell);
    let scale = if mesh.dim() == 1 { g.measure } else { 2.0 * g.measure };
    Ok(r.points
        .iter()
        .zip(&r.weights)
        .map(|(p, &w)| {
            let bary = if mesh.dim() == 1 {
                [1.0 - p[0], p[0], 0.0]
            } else {
                [1.0 - p[0] - p[1], p[0], p[1]]
            };
            let mut x = [0.0, 0.0];
            for (i, &v) in verts.iter().enumerate() {
                let q = mesh.vertex(v);
                x[0] += bary[i] * q[0];
                x[1] += bary[i] * q[1];
            }
            QuadPoint {
                cell,
                x,
                bary,
                weight: w * scale,
            }
        })
        .collect())
}

/// Per-cell integrals of an `N`-component integrand. Cells outside `region` get zeros.
pub fn cell_integrals<const N: usize, F>(
    mesh: &Mesh,
    degree: usize,
    region: Region<'_>,
    mut integrand: F,
) -> Result<Vec<[f64; N]>>
where
    F: FnMut(&QuadPoint) -> Result<[f64; N]>,
{
    let mut out = vec![[0.0; N]; mesh.num_cells()];
    for c in region.cells(mesh)? {
        let mut acc = [0.0; N];
        for qp in cell_points(mesh, c, degree)? {
            let v = integrand(&qp)?;
            for k in 0..N {
                acc[k] += qp.weight * v[k];
            }
        }
        out[c] = acc;
    }
    Ok(out)
}

/// Sums per-cell values in ascending cell order.
pub fn sum_cells<const N: usize>(cells: &[[f64; N]]) -> [f64; N] {
    let mut total = [0.0; N];
    for v in cells {
        for k in 0..N {
            total[k] += v[k];
        }
    }
    total
}

pub fn integrate<F>(mesh: &Mesh, degree: usize, region: Region<'_>, integrand: F) -> Result<f64>
where
    F: Fn(&QuadPoint) -> f64,
{
    let cells = cell_integrals(mesh, degree, region, |qp| Ok([integrand(qp)]))?;
    Ok(sum_cells(&cells)[0])
}

/// `1 / w`, rejecting weights below 1e-14.
pub fn inverse_weight(w: f64, name: &str, x: Point) -> Result<f64> {
    if w >= 1e-14 {
        Ok(1.0 / w)
    } else if w.is_nan() {
        Err(Error::NonFinite {
            value: w,
            x: x[0],
            y: x[1],
        })
    } else {
        Err(Error::Regime(format!(
            "weight {name} = {w:e} at ({}, {}) is too small to invert",
            x[0], x[1]
        )))
    }
}

/// Non-negative weight; roundoff-level negatives down to -1e-12 are clamped to 0.
pub fn direct_weight(w: f64, name: &str, x: Point) -> Result<f64> {
    if w >= 0.0 {
        Ok(w)
    } else if w >= -1e-12 {
        Ok(0.0)
    } else {
        Err(Error::Regime(format!(
            "weight {name} = {w:e} at ({}, {}) is negative",
            x[0], x[1]
        )))
    }
}

pub fn quad_form(m: &Mat2, v: Point) -> f64 {
    v[0] * (m[0][0] * v[0] + m[0][1] * v[1]) + v[1] * (m[1][0] * v[0] + m[1][1] * v[1])
}

pub fn mat_vec(m: &Mat2, v: Point) -> Point {
    [m[0][0] * v[0] + m[0][1] * v[1], m[1][0] * v[0] + m[1][1] * v[1]]
}

/// Inverse of a symmetric positive definite 2x2 matrix.
pub fn spd_inverse(m: &Mat2, x: Point) -> Result<Mat2> {
    let det = m[0][0] * m[1][1] - m[0][1] * m[1][0];
    if !(m[0][0] > 0.0 && det > 0.0) {
        return Err(Error::Regime(format!(
            "matrix weight {m:?} at ({}, {}) is not positive definite",
            x[0], x[1]
        )));
    }
    Ok([
        [m[1][1] / det, -m[0][1] / det],
        [-m[1][0] / det, m[0][0] / det],
    ])
}

/// Weight of a squared norm, evaluated pointwise.
pub enum Weight<'a> {
    Unit,
    Scalar(&'a dyn Fn(Point) -> f64),
    InverseScalar(&'a dyn Fn(Point) -> f64),
    Matrix(&'a dyn Fn(Point) -> Mat2),
    InverseMatrix(&'a dyn Fn(Point) -> Mat2),
}

impl Weight<'_> {
    fn scalar_at(&self, x: Point) -> Result<f64> {
        match self {
            Weight::Unit => Ok(1.0),
            Weight::Scalar(w) => direct_weight(w(x), "w", x),
            Weight::InverseScalar(w) => inverse_weight(w(x), "w", x),
            _ => Err(Error::Dimension("matrix weight applied to a scalar".into())),
        }
    }

    fn apply_vector(&self, x: Point, v: Point) -> Result<f64> {
        match self {
            Weight::Matrix(m) => {
                let m = m(x);
                spd_inverse(&m, x)?;
                Ok(quad_form(&m, v))
            }
            Weight::InverseMatrix(m) => Ok(quad_form(&spd_inverse(&m(x), x)?, v)),
            _ => Ok(self.scalar_at(x)? * (v[0] * v[0] + v[1] * v[1])),
        }
    }
}

/// `integral of w |v|^2` over `region` for a scalar integrand.
pub fn weighted_norm_sq_scalar<F>(
    mesh: &Mesh,
    degree: usize,
    region: Region<'_>,
    weight: &Weight<'_>,
    value: F,
) -> Result<f64>
where
    F: Fn(&QuadPoint) -> f64,
{
    let cells = cell_integrals(mesh, degree, region, |qp| {
        let v = value(qp);
        Ok([weight.scalar_at(qp.x)? * v * v])
    })?;
    Ok(sum_cells(&cells)[0])
}

/// `integral of (W v) . v` over `region`; scalar weights act as `w |v|^2`.
pub fn weighted_norm_sq_vector<F>(
    mesh: &Mesh,
    degree: usize,
    region: Region<'_>,
    weight: &Weight<'_>,
    value: F,
) -> Result<f64>
where
    F: Fn(&QuadPoint) -> Point,
{
    let cells = cell_integrals(mesh, degree, region, |qp| {
        Ok([weight.apply_vector(qp.x, value(qp))?])
    })?;
    Ok(sum_cells(&cells)[0])
}

pub fn weighted_norm<F>(
    mesh: &Mesh,
    degree: usize,
    region: Region<'_>,
    weight: &Weight<'_>,
    value: F,
) -> Result<f64>
where
    F: Fn(&QuadPoint) -> f64,
{
    weighted_norm_sq_scalar(mesh, degree, region, weight, value).map(f64::sqrt)
}

/// Scalar function with a (possibly cellwise) gradient, evaluated at quadrature points.
pub trait ScalarFunction {
    fn value(&self, qp: &QuadPoint) -> f64;
    fn gradient(&self, qp: &QuadPoint) -> Point;
}

/// Vector function with a divergence, evaluated at quadrature points.
pub trait VectorFunction {
    fn value(&self, qp: &QuadPoint) -> Point;
    fn divergence(&self, qp: &QuadPoint) -> f64;
}

impl<T: ScalarFunction + ?Sized> ScalarFunction for &T {
    fn value(&self, qp: &QuadPoint) -> f64 {
        (**self).value(qp)
    }
    fn gradient(&self, qp: &QuadPoint) -> Point {
        (**self).gradient(qp)
    }
}

impl<T: VectorFunction + ?Sized> VectorFunction for &T {
    fn value(&self, qp: &QuadPoint) -> Point {
        (**self).value(qp)
    }
    fn divergence(&self, qp: &QuadPoint) -> f64 {
        (**self).divergence(qp)
    }
}

/// Closed-form scalar with its gradient.
#[derive(Clone, Debug, PartialEq)]
pub struct ExprScalar {
    pub value: Expr,
    pub grad: [Expr; 2],
}

impl ExprScalar {
    /// Builds the gradient by symbolic differentiation.
    pub fn new(value: Expr) -> Result<ExprScalar> {
        let grad = value.gradient()?;
        Ok(ExprScalar { value, grad })
    }
}

impl ScalarFunction for ExprScalar {
    fn value(&self, qp: &QuadPoint) -> f64 {
        self.value.eval_at(qp.x)
    }
    fn gradient(&self, qp: &QuadPoint) -> Point {
        [self.grad[0].eval_at(qp.x), self.grad[1].eval_at(qp.x)]
    }
}

/// Closed-form vector field with its divergence.
#[derive(Clone, Debug, PartialEq)]
pub struct ExprVector {
    pub value: [Expr; 2],
    pub div: Expr,
}

impl VectorFunction for ExprVector {
    fn value(&self, qp: &QuadPoint) -> Point {
        [self.value[0].eval_at(qp.x), self.value[1].eval_at(qp.x)]
    }
    fn divergence(&self, qp: &QuadPoint) -> f64 {
        self.div.eval_at(qp.x)
    }
}

/// One value per cell. Its gradient is the broken (cellwise) gradient, i.e. zero.
#[derive(Clone, Debug, PartialEq)]
pub struct CellwiseConstant(pub Vec<f64>);

impl ScalarFunction for CellwiseConstant {
    fn value(&self, qp: &QuadPoint) -> f64 {
        self.0[qp.cell]
    }
    fn gradient(&self, _: &QuadPoint) -> Point {
        [0.0, 0.0]
    }
}

/// The zero function, usable as either a scalar or a vector field.
#[derive(Clone, Copy, Debug, Default, PartialEq)]
pub struct Zero;

impl ScalarFunction for Zero {
    fn value(&self, _: &QuadPoint) -> f64 {
        0.0
    }
    fn gradient(&self, _: &QuadPoint) -> Point {
        [0.0, 0.0]
    }
}

impl VectorFunction for Zero {
    fn value(&self, _: &QuadPoint) -> Point {
        [0.0, 0.0]
    }
    fn divergence(&self, _: &QuadPoint) -> f64 {
        0.0
    }
}

/// Continuous piecewise-linear field with one value per vertex.
#[derive(Clone, Debug, PartialEq)]
pub struct ScalarField<'m> {
    mesh: &'m Mesh,
    values: Vec<f64>,
    zero_boundary: bool,
}

impl<'m> ScalarField<'m> {
    pub fn new(mesh: &'m Mesh, values: Vec<f64>, zero_boundary: bool) -> Result<Self> {
        if values.len() != mesh.num_vertices() {
            return Err(Error::Dimension(format!(
                "{} scalar values for {} vertices",
                values.len(),
                mesh.num_vertices()
            )));
        }
        if zero_boundary {
            if let Some(v) = (0..values.len()).find(|&v| mesh.is_boundary_vertex(v) && values[v] != 0.0) {
                return Err(Error::BoundaryCondition(format!(
                    "boundary vertex {v} has value {}",
                    values[v]
                )));
            }
        }
        Ok(ScalarField {
            mesh,
            values,
            zero_boundary,
        })
    }

    pub fn zeros(mesh: &'m Mesh, zero_boundary: bool) -> Self {
        ScalarField {
            mesh,
            values: vec![0.0; mesh.num_vertices()],
            zero_boundary,
        }
    }

    /// Independent U[-1, 1] vertex values; boundary values are 0 when requested.
    pub fn random<R: Rng + ?Sized>(mesh: &'m Mesh, rng: &mut R, zero_boundary: bool) -> Self {
        let values = (0..mesh.num_vertices())
            .map(|v| {
                let r = rng.random_range(-1.0..=1.0);
                if zero_boundary && mesh.is_boundary_vertex(v) {
                    0.0
                } else {
                    r
                }
            })
            .collect();
        ScalarField {
            mesh,
            values,
            zero_boundary,
        }
    }

    pub fn mesh(&self) -> &'m Mesh {
        self.mesh
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn zero_boundary(&self) -> bool {
        self.zero_boundary
    }

    /// `self + s * other`; the result keeps the zero-boundary flag only if both have it.
    pub fn add_scaled(&self, s: f64, other: &ScalarField<'_>) -> Result<ScalarField<'m>> {
        if self.values.len() != other.values.len() {
            return Err(Error::Dimension("fields live on different meshes".into()));
        }
        Ok(ScalarField {
            mesh: self.mesh,
            values: self.values.iter().zip(&other.values).map(|(a, b)| a + s * b).collect(),
            zero_boundary: self.zero_boundary && other.zero_boundary,
        })
    }

    pub fn value_in(&self, cell: usize, bary: &[f64; 3]) -> f64 {
        self.mesh
            .cell(cell)
            .iter()
            .enumerate()
            .map(|(i, &v)| bary[i] * self.values[v])
            .sum()
    }

    pub fn gradient_in(&self, cell: usize) -> Point {
        let g = &self.mesh.geometry(cell).bary_grad;
        let mut out = [0.0, 0.0];
        for (i, &v) in self.mesh.cell(cell).iter().enumerate() {
            out[0] += g[i][0] * self.values[v];
            out[1] += g[i][1] * self.values[v];
        }
        out
    }
}

impl ScalarFunction for ScalarField<'_> {
    fn value(&self, qp: &QuadPoint) -> f64 {
        self.value_in(qp.cell, &qp.bary)
    }
    fn gradient(&self, qp: &QuadPoint) -> Point {
        self.gradient_in(qp.cell)
    }
}

/// Lowest-order H(div) field with one value per facet.
#[derive(Clone, Debug, PartialEq)]
pub struct FluxField<'m> {
    mesh: &'m Mesh,
    dofs: Vec<f64>,
}

impl<'m> FluxField<'m> {
    pub fn new(mesh: &'m Mesh, dofs: Vec<f64>) -> Result<Self> {
        if dofs.len() != mesh.num_facets() {
            return Err(Error::Dimension(format!(
                "{} flux dofs for {} facets",
                dofs.len(),
                mesh.num_facets()
            )));
        }
        Ok(FluxField { mesh, dofs })
    }

    pub fn zeros(mesh: &'m Mesh) -> Self {
        FluxField {
            mesh,
            dofs: vec![0.0; mesh.num_facets()],
        }
    }

    /// Facet dofs `measure * U[-1, 1]`, i.e. normal components of order one.
    pub fn random<R: Rng + ?Sized>(mesh: &'m Mesh, rng: &mut R) -> Self {
        let dofs = mesh
            .facets()
            .iter()
            .map(|f| f.measure() * rng.random_range(-1.0..=1.0))
            .collect();
        FluxField { mesh, dofs }
    }

    pub fn mesh(&self) -> &'m Mesh {
        self.mesh
    }

    pub fn dofs(&self) -> &[f64] {
        &self.dofs
    }

    pub fn add_scaled(&self, s: f64, other: &FluxField<'_>) -> Result<FluxField<'m>> {
        if self.dofs.len() != other.dofs.len() {
            return Err(Error::Dimension("fields live on different meshes".into()));
        }
        Ok(FluxField {
            mesh: self.mesh,
            dofs: self.dofs.iter().zip(&other.dofs).map(|(a, b)| a + s * b).collect(),
        })
    }

    pub fn value_at(&self, qp: &QuadPoint) -> Point {
        let mut out = [0.0, 0.0];
        for (local, &f) in self.mesh.cell_facets(qp.cell).iter().enumerate() {
            let (phi, _) = flux_basis(self.mesh, qp, local);
            out[0] += self.dofs[f] * phi[0];
            out[1] += self.dofs[f] * phi[1];
        }
        out
    }

    pub fn divergence_in(&self, cell: usize) -> f64 {
        let mesh = self.mesh;
        let fs = mesh.cell_facets(cell);
        let g = mesh.geometry(cell);
        if mesh.dim() == 1 {
            (self.dofs[fs[1]] - self.dofs[fs[0]]) / g.measure
        } else {
            fs.iter()
                .map(|&f| mesh.facet(f).orientation_for(cell) * self.dofs[f])
                .sum::<f64>()
                / g.measure
        }
    }
}

impl VectorFunction for FluxField<'_> {
    fn value(&self, qp: &QuadPoint) -> Point {
        self.value_at(qp)
    }
    fn divergence(&self, qp: &QuadPoint) -> f64 {
        self.divergence_in(qp.cell)
    }
}

/// Value and divergence of the flux basis function of local facet `local` of `qp.cell`.
pub fn flux_basis(mesh: &Mesh, qp: &QuadPoint, local: usize) -> (Point, f64) {
    let g = mesh.geometry(qp.cell);
    if mesh.dim() == 1 {
        let d = g.bary_grad[local][0];
        ([qp.bary[local], 0.0], d)
    } else {
        let f = mesh.cell_facets(qp.cell)[local];
        let s = mesh.facet(f).orientation_for(qp.cell);
        let p = mesh.vertex(mesh.cell(qp.cell)[local]);
        let k = s / (2.0 * g.measure);
        ([k * (qp.x[0] - p[0]), k * (qp.x[1] - p[1])], s / g.measure)
    }
}

fn finite_or_err(v: f64, x: Point) -> Result<f64> {
    if v.is_finite() {
        Ok(v)
    } else {
        Err(Error::NonFinite {
            value: v,
            x: x[0],
            y: x[1],
        })
    }
}

/// Nodal interpolant; boundary values are forced to zero when requested.
pub fn interpolate_scalar<'m, G>(mesh: &'m Mesh, g: G, zero_boundary: bool) -> Result<ScalarField<'m>>
where
    G: Fn(Point) -> f64,
{
    let values = (0..mesh.num_vertices())
        .map(|v| {
            let x = mesh.vertex(v);
            let val = finite_or_err(g(x), x)?;
            Ok(if zero_boundary && mesh.is_boundary_vertex(v) {
                0.0
            } else {
                val
            })
        })
        .collect::<Result<Vec<_>>>()?;
    ScalarField::new(mesh, values, zero_boundary)
}

/// Facet interpolant: total normal flux by the midpoint rule in 2D, the point value in 1D.
pub fn interpolate_flux<'m, G>(mesh: &'m Mesh, g: G) -> Result<FluxField<'m>>
where
    G: Fn(Point) -> Point,
{
    let dofs = mesh
        .facets()
        .iter()
        .map(|f| {
            let vs = f.vertices();
            if mesh.dim() == 1 {
                let x = mesh.vertex(vs[0]);
                finite_or_err(g(x)[0], x)
            } else {
                let (a, b) = (mesh.vertex(vs[0]), mesh.vertex(vs[1]));
                let mid = [0.5 * (a[0] + b[0]), 0.5 * (a[1] + b[1])];
                let v = g(mid);
                let n = f.normal();
                finite_or_err(f.measure() * (v[0] * n[0] + v[1] * n[1]), mid)
            }
        })
        .collect::<Result<Vec<_>>>()?;
    FluxField::new(mesh, dofs)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::mesh::{build_interval_mesh, build_unit_square_mesh, refine};
    use proptest::prelude::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;
    use std::f64::consts::PI;

    #[test]
    fn interpolate_scalar_examples() {
        let m = build_interval_mesh(0.0, 1.0, 4).unwrap();
        let u = interpolate_scalar(&m, |p| p[0] * (1.0 - p[0]), true).unwrap();
        assert_eq!(u.values(), &[0.0, 0.1875, 0.25, 0.1875, 0.0]);
        let z = interpolate_scalar(&m, |_| 0.0, true).unwrap();
        assert!(z.values().iter().all(|&v| v == 0.0));
        let m2 = build_interval_mesh(0.0, 1.0, 2).unwrap();
        let s = interpolate_scalar(&m2, |p| (PI * p[0]).sin(), true).unwrap();
        assert_eq!(s.values()[1], 1.0);
        assert!(matches!(
            interpolate_scalar(&m, |p| 1.0 / p[0], false),
            Err(Error::NonFinite { .. })
        ));
    }

    #[test]
    fn boundary_flag_is_enforced() {
        let m = build_interval_mesh(0.0, 1.0, 2).unwrap();
        assert!(ScalarField::new(&m, vec![1.0, 0.0, 0.0], true).is_err());
        assert!(ScalarField::new(&m, vec![1.0, 0.0, 0.0], false).is_ok());
        assert!(ScalarField::new(&m, vec![0.0, 0.0], false).is_err());
    }

    #[test]
    fn interpolate_flux_examples() {
        let m = build_unit_square_mesh(1).unwrap();
        let f = interpolate_flux(&m, |_| [1.0, 0.0]).unwrap();
        for c in 0..m.num_cells() {
            assert!(f.divergence_in(c).abs() < 1e-14);
        }
        let m1 = build_interval_mesh(0.0, 1.0, 5).unwrap();
        let f = interpolate_flux(&m1, |p| [p[0], 0.0]).unwrap();
        for c in 0..m1.num_cells() {
            assert!((f.divergence_in(c) - 1.0).abs() < 1e-13);
            for qp in cell_points(&m1, c, 3).unwrap() {
                assert!((f.value_at(&qp)[0] - qp.x[0]).abs() < 1e-15);
            }
        }
        let m = build_unit_square_mesh(3).unwrap();
        let f = interpolate_flux(&m, |p| p).unwrap();
        for c in 0..m.num_cells() {
            assert!((f.divergence_in(c) - 2.0).abs() < 1e-12);
            // reproduced pointwise, and the divergence integrates to the boundary flux
            let int_div = integrate(&m, 0, Region::Cell(c), |qp| f.divergence(qp)).unwrap();
            assert!((int_div - 2.0 * m.geometry(c).measure).abs() < 1e-14);
            for qp in cell_points(&m, c, 2).unwrap() {
                let v = f.value_at(&qp);
                assert!((v[0] - qp.x[0]).abs() < 1e-13 && (v[1] - qp.x[1]).abs() < 1e-13);
            }
        }
    }

    #[test]
    fn integrate_examples() {
        let m = build_interval_mesh(0.0, 1.0, 1).unwrap();
        assert!((integrate(&m, 2, Region::All, |qp| qp.x[0] * qp.x[0]).unwrap() - 1.0 / 3.0).abs() < 1e-16);
        let sq = build_unit_square_mesh(3).unwrap();
        assert!((integrate(&sq, 0, Region::All, |_| 1.0).unwrap() - 1.0).abs() < 1e-15);
        let m = build_interval_mesh(0.0, 1.0, 8).unwrap();
        let s = integrate(&m, 12, Region::All, |qp| (PI * qp.x[0]).sin().powi(2)).unwrap();
        assert!((s - 0.5).abs() < 1e-12);
        assert!(integrate(&m, MAX_DEGREE + 1, Region::All, |_| 1.0).is_err());
        assert!(integrate(&m, 2, Region::Cell(8), |_| 1.0).is_err());
    }

    #[test]
    fn weighted_norm_examples() {
        let m = build_interval_mesh(0.0, 1.0, 4).unwrap();
        let four = |_: Point| 4.0;
        let n = weighted_norm(&m, 2, Region::All, &Weight::Scalar(&four), |_| 1.0).unwrap();
        assert!((n - 2.0).abs() < 1e-15);
        let c = |p: Point| if p[0] > 0.5 { 1.0 } else { 0.0 };
        assert!(matches!(
            weighted_norm(&m, 2, Region::All, &Weight::InverseScalar(&c), |_| 1.0),
            Err(Error::Regime(_))
        ));
        let m = build_interval_mesh(0.0, 1.0, 16).unwrap();
        let n = weighted_norm(&m, 12, Region::All, &Weight::Unit, |qp| PI * (PI * qp.x[0]).cos()).unwrap();
        assert!((n - PI / 2f64.sqrt()).abs() < 1e-10);
        let a = |_: Point| [[2.0, 0.0], [0.0, 1.0]];
        let sq = build_unit_square_mesh(2).unwrap();
        let v = weighted_norm_sq_vector(&sq, 2, Region::All, &Weight::InverseMatrix(&a), |_| [1.0, 1.0]).unwrap();
        assert!((v - 1.5).abs() < 1e-14);
        assert!(weighted_norm_sq_scalar(&sq, 2, Region::All, &Weight::Matrix(&a), |_| 1.0).is_err());
    }

    #[test]
    fn partition_of_unity() {
        let m = refine(&build_unit_square_mesh(2).unwrap(), &[0, 3]).unwrap();
        let ones = ScalarField::new(&m, vec![1.0; m.num_vertices()], false).unwrap();
        for c in 0..m.num_cells() {
            for qp in cell_points(&m, c, 5).unwrap() {
                assert!((ones.value(&qp) - 1.0).abs() < 1e-14);
                let g = ones.gradient(&qp);
                assert!(g[0].abs() < 1e-12 && g[1].abs() < 1e-12);
            }
        }
    }

    #[test]
    fn flux_normal_component_is_continuous() {
        let m = build_unit_square_mesh(2).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let y = FluxField::random(&m, &mut rng);
        for f in m.facets() {
            let Some(nb) = f.neighbor() else { continue };
            let vs = f.vertices();
            let (a, b) = (m.vertex(vs[0]), m.vertex(vs[1]));
            let x = [0.3 * a[0] + 0.7 * b[0], 0.3 * a[1] + 0.7 * b[1]];
            let n = f.normal();
            let trace = |c: usize| {
                let verts: Vec<Point> = m.cell(c).iter().map(|&v| m.vertex(v)).collect();
                let bary = barycentric(&verts, x);
                let v = y.value_at(&QuadPoint { cell: c, x, bary, weight: 0.0 });
                v[0] * n[0] + v[1] * n[1]
            };
            assert!((trace(f.owner()) - trace(nb)).abs() < 1e-12);
        }
    }

    fn barycentric(v: &[Point], x: Point) -> [f64; 3] {
        let det = (v[1][0] - v[0][0]) * (v[2][1] - v[0][1]) - (v[2][0] - v[0][0]) * (v[1][1] - v[0][1]);
        let l1 = ((x[0] - v[0][0]) * (v[2][1] - v[0][1]) - (v[2][0] - v[0][0]) * (x[1] - v[0][1])) / det;
        let l2 = ((v[1][0] - v[0][0]) * (x[1] - v[0][1]) - (x[0] - v[0][0]) * (v[1][1] - v[0][1])) / det;
        [1.0 - l1 - l2, l1, l2]
    }

    proptest! {
        #[test]
        fn integration_by_parts_holds(seed in any::<u64>(), n in 1usize..5, two_d in any::<bool>()) {
            let m = if two_d {
                build_unit_square_mesh(n).unwrap()
            } else {
                build_interval_mesh(0.0, 1.0, 3 * n).unwrap()
            };
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let w = ScalarField::random(&m, &mut rng, true);
            let psi = FluxField::random(&m, &mut rng);
            let lhs = integrate(&m, 2, Region::All, |qp| {
                let g = w.gradient(qp);
                let p = psi.value(qp);
                g[0] * p[0] + g[1] * p[1] + w.value(qp) * psi.divergence(qp)
            }).unwrap();
            let h1 = integrate(&m, 2, Region::All, |qp| {
                let g = w.gradient(qp);
                w.value(qp).powi(2) + g[0] * g[0] + g[1] * g[1]
            }).unwrap().sqrt();
            let hdiv = integrate(&m, 2, Region::All, |qp| {
                let p = psi.value(qp);
                p[0] * p[0] + p[1] * p[1] + psi.divergence(qp).powi(2)
            }).unwrap().sqrt();
            prop_assert!(lhs.abs() <= 1e-12 * h1 * hdiv, "{lhs}");
        }
    }
}
