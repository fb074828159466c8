//! Galerkin solve of the primal problem, flux reconstruction, and nodal averaging.

use std::fmt;

use faer::prelude::Solve;
use faer::sparse::{SparseColMat, Triplet};
use faer::{Col, Side};

use crate::coefficients::CoefficientSet;
use crate::error::{Error, Result};
use crate::fem::{cell_points, flux_basis, mat_vec, FluxField, QuadPoint, ScalarField};
use crate::mesh::{Mesh, Point};

/// Row-compressed sparse matrix with sorted, duplicate-free columns per row.
#[derive(Clone, Debug, PartialEq)]
pub struct CsrMatrix {
    n: usize,
    row_ptr: Vec<usize>,
    col_idx: Vec<usize>,
    values: Vec<f64>,
}

impl CsrMatrix {
    /// Square matrix from `(row, col, value)` triplets; duplicates are summed.
    pub fn from_triplets(n: usize, mut triplets: Vec<(usize, usize, f64)>) -> CsrMatrix {
        triplets.sort_by(|a, b| (a.0, a.1).cmp(&(b.0, b.1)));
        let mut row_ptr = vec![0; n + 1];
        let mut col_idx = Vec::with_capacity(triplets.len());
        let mut values: Vec<f64> = Vec::with_capacity(triplets.len());
        let mut last: Option<(usize, usize)> = None;
        for (r, c, v) in triplets {
            if last == Some((r, c)) {
                *values.last_mut().unwrap() += v;
            } else {
                col_idx.push(c);
                values.push(v);
                row_ptr[r + 1] += 1;
                last = Some((r, c));
            }
        }
        for r in 0..n {
            row_ptr[r + 1] += row_ptr[r];
        }
        CsrMatrix {
            n,
            row_ptr,
            col_idx,
            values,
        }
    }

    pub fn dim(&self) -> usize {
        self.n
    }

    pub fn nnz(&self) -> usize {
        self.values.len()
    }

    pub fn get(&self, r: usize, c: usize) -> f64 {
        let cols = &self.col_idx[self.row_ptr[r]..self.row_ptr[r + 1]];
        match cols.binary_search(&c) {
            Ok(k) => self.values[self.row_ptr[r] + k],
            Err(_) => 0.0,
        }
    }

    pub fn row(&self, r: usize) -> impl Iterator<Item = (usize, f64)> + '_ {
        let span = self.row_ptr[r]..self.row_ptr[r + 1];
        self.col_idx[span.clone()].iter().copied().zip(self.values[span].iter().copied())
    }

    pub fn mul_vec(&self, x: &[f64]) -> Vec<f64> {
        (0..self.n).map(|r| self.row(r).map(|(c, v)| v * x[c]).sum()).collect()
    }

    pub fn transpose(&self) -> CsrMatrix {
        let mut t = Vec::with_capacity(self.nnz());
        for r in 0..self.n {
            for (c, v) in self.row(r) {
                t.push((c, r, v));
            }
        }
        CsrMatrix::from_triplets(self.n, t)
    }

    /// `(M + M^T) / 2`.
    pub fn symmetric_part(&self) -> CsrMatrix {
        let mut t = Vec::with_capacity(2 * self.nnz());
        for r in 0..self.n {
            for (c, v) in self.row(r) {
                t.push((r, c, 0.5 * v));
                t.push((c, r, 0.5 * v));
            }
        }
        CsrMatrix::from_triplets(self.n, t)
    }

    fn to_faer(&self) -> Result<SparseColMat<usize, f64>> {
        let mut t = Vec::with_capacity(self.nnz());
        for r in 0..self.n {
            for (c, v) in self.row(r) {
                t.push(Triplet::new(r, c, v));
            }
        }
        SparseColMat::try_new_from_triplets(self.n, self.n, &t)
            .map_err(|e| Error::Solver(format!("sparse matrix construction: {e:?}")))
    }

    /// Whether a sparse Cholesky factorization succeeds (symmetric input expected).
    pub fn cholesky_succeeds(&self) -> bool {
        match self.to_faer() {
            Ok(m) => m.sp_cholesky(Side::Lower).is_ok(),
            Err(_) => false,
        }
    }

    fn solve_direct(&self, rhs: &[f64], symmetric: bool) -> Result<Vec<f64>> {
        let m = self.to_faer()?;
        let b = Col::<f64>::from_fn(self.n, |i| rhs[i]);
        let x = if symmetric {
            match m.sp_cholesky(Side::Lower) {
                Ok(llt) => llt.solve(&b),
                Err(_) => m
                    .sp_lu()
                    .map_err(|e| Error::Solver(format!("LU factorization: {e:?}")))?
                    .solve(&b),
            }
        } else {
            m.sp_lu()
                .map_err(|e| Error::Solver(format!("LU factorization: {e:?}")))?
                .solve(&b)
        };
        Ok((0..self.n).map(|i| x[i]).collect())
    }
}

fn norm2(v: &[f64]) -> f64 {
    v.iter().map(|a| a * a).sum::<f64>().sqrt()
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

/// BiCGSTAB on a general square system, started from `x`.
pub fn bicgstab(a: &CsrMatrix, rhs: &[f64], x: &mut [f64], rel_tol: f64, max_iter: usize) -> Result<usize> {
    let bnorm = norm2(rhs);
    if bnorm == 0.0 {
        x.iter_mut().for_each(|v| *v = 0.0);
        return Ok(0);
    }
    let ax = a.mul_vec(x);
    let mut r: Vec<f64> = rhs.iter().zip(&ax).map(|(b, v)| b - v).collect();
    let r_hat = r.clone();
    let (mut rho, mut alpha, mut omega) = (1.0, 1.0, 1.0);
    let mut v = vec![0.0; a.dim()];
    let mut p = vec![0.0; a.dim()];
    for it in 0..max_iter {
        if norm2(&r) <= rel_tol * bnorm {
            return Ok(it);
        }
        let rho_new = dot(&r_hat, &r);
        if rho_new == 0.0 || omega == 0.0 {
            break;
        }
        let beta = (rho_new / rho) * (alpha / omega);
        rho = rho_new;
        for i in 0..p.len() {
            p[i] = r[i] + beta * (p[i] - omega * v[i]);
        }
        v = a.mul_vec(&p);
        alpha = rho / dot(&r_hat, &v);
        let s: Vec<f64> = r.iter().zip(&v).map(|(ri, vi)| ri - alpha * vi).collect();
        let t = a.mul_vec(&s);
        let tt = dot(&t, &t);
        omega = if tt > 0.0 { dot(&t, &s) / tt } else { 0.0 };
        for i in 0..x.len() {
            x[i] += alpha * p[i] + omega * s[i];
            r[i] = s[i] - omega * t[i];
        }
    }
    if norm2(&r) <= rel_tol * bnorm {
        Ok(max_iter)
    } else {
        Err(Error::Solver(format!(
            "BiCGSTAB stopped with relative residual {:e}",
            norm2(&r) / bnorm
        )))
    }
}

/// Assembled primal system on the interior vertices.
#[derive(Clone, Debug, PartialEq)]
pub struct LinearSystem {
    pub matrix: CsrMatrix,
    pub rhs: Vec<f64>,
    /// Vertex of each unknown, ascending.
    pub dof_vertices: Vec<usize>,
}

/// Relative residual accepted from the direct solve.
pub const SOLVE_TOL: f64 = 1e-12;

impl LinearSystem {
    pub fn residual(&self, x: &[f64]) -> Vec<f64> {
        self.matrix.mul_vec(x).iter().zip(&self.rhs).map(|(ax, b)| b - ax).collect()
    }

    /// Sparse LU with one refinement step; BiCGSTAB if the residual is still too large.
    pub fn solve(&self) -> Result<Vec<f64>> {
        let n = self.matrix.dim();
        let bnorm = norm2(&self.rhs);
        if n == 0 || bnorm == 0.0 {
            return Ok(vec![0.0; n]);
        }
        let mut x = self.matrix.solve_direct(&self.rhs, false).unwrap_or_else(|_| vec![0.0; n]);
        let r = self.residual(&x);
        if norm2(&r) > SOLVE_TOL * bnorm {
            if let Ok(dx) = self.matrix.solve_direct(&r, false) {
                x.iter_mut().zip(&dx).for_each(|(a, d)| *a += d);
            }
        }
        if norm2(&self.residual(&x)) <= SOLVE_TOL * bnorm {
            return Ok(x);
        }
        bicgstab(&self.matrix, &self.rhs, &mut x, SOLVE_TOL, 10_000)?;
        Ok(x)
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum Formulation {
    /// `(A grad u, grad w) + (b . grad u + c u, w) = (f, w)`.
    Form1,
    /// `(A grad u - b u, grad w) + ((c - div b) u, w) = (f, w)`.
    Form2,
}

impl fmt::Display for Formulation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Formulation::Form1 => "FORM1",
            Formulation::Form2 => "FORM2",
        })
    }
}

impl std::str::FromStr for Formulation {
    type Err = Error;
    fn from_str(s: &str) -> Result<Formulation> {
        match s.trim().to_ascii_uppercase().as_str() {
            "FORM1" | "1" => Ok(Formulation::Form1),
            "FORM2" | "2" => Ok(Formulation::Form2),
            other => Err(Error::Parse {
                pos: 0,
                msg: format!("unknown formulation '{other}'"),
            }),
        }
    }
}

pub fn assemble_primal(
    mesh: &Mesh,
    coeffs: &CoefficientSet,
    form: Formulation,
    degree: usize,
) -> Result<LinearSystem> {
    let mut vertex_dof = vec![usize::MAX; mesh.num_vertices()];
    let mut dof_vertices = Vec::new();
    for v in 0..mesh.num_vertices() {
        if !mesh.is_boundary_vertex(v) {
            vertex_dof[v] = dof_vertices.len();
            dof_vertices.push(v);
        }
    }
    let n = dof_vertices.len();
    let nloc = mesh.dim() + 1;
    let mut triplets = Vec::with_capacity(mesh.num_cells() * nloc * nloc);
    let mut rhs = vec![0.0; n];
    for cell in 0..mesh.num_cells() {
        let grads = mesh.geometry(cell).bary_grad;
        let mut k = [[0.0; 3]; 3];
        let mut l = [0.0; 3];
        for qp in cell_points(mesh, cell, degree)? {
            let a = coeffs.a_at(qp.x);
            let b = coeffs.b_at(qp.x);
            let c = coeffs.c_at(qp.x);
            let f = coeffs.f_at(qp.x);
            let reaction = match form {
                Formulation::Form1 => c,
                Formulation::Form2 => c - coeffs.div_b_at(qp.x),
            };
            for i in 0..nloc {
                let (phi_i, g_i) = (qp.bary[i], grads[i]);
                l[i] += qp.weight * f * phi_i;
                for j in 0..nloc {
                    let (phi_j, g_j) = (qp.bary[j], grads[j]);
                    let ag = mat_vec(&a, g_j);
                    let val = match form {
                        Formulation::Form1 => {
                            ag[0] * g_i[0] + ag[1] * g_i[1] + (b[0] * g_j[0] + b[1] * g_j[1]) * phi_i
                        }
                        Formulation::Form2 => {
                            (ag[0] - b[0] * phi_j) * g_i[0] + (ag[1] - b[1] * phi_j) * g_i[1]
                        }
                    } + reaction * phi_j * phi_i;
                    k[i][j] += qp.weight * val;
                }
            }
        }
        let verts = mesh.cell(cell);
        for i in 0..nloc {
            let di = vertex_dof[verts[i]];
            if di == usize::MAX {
                continue;
            }
            rhs[di] += l[i];
            for j in 0..nloc {
                let dj = vertex_dof[verts[j]];
                if dj != usize::MAX {
                    triplets.push((di, dj, k[i][j]));
                }
            }
        }
    }
    Ok(LinearSystem {
        matrix: CsrMatrix::from_triplets(n, triplets),
        rhs,
        dof_vertices,
    })
}

/// Galerkin approximation in the piecewise-linear space with zero boundary values.
pub fn solve_primal<'m>(
    mesh: &'m Mesh,
    coeffs: &CoefficientSet,
    form: Formulation,
    degree: usize,
) -> Result<ScalarField<'m>> {
    let sys = assemble_primal(mesh, coeffs, form, degree)?;
    let x = sys.solve()?;
    let mut values = vec![0.0; mesh.num_vertices()];
    for (k, &v) in sys.dof_vertices.iter().enumerate() {
        values[v] = x[k];
    }
    ScalarField::new(mesh, values, true)
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum FluxKind {
    /// Target `A grad u`.
    Diffusive,
    /// Target `A grad u - b u`.
    Total,
}

/// `A^{-1}`-weighted L2 projection of `target` onto the flux space of `mesh`.
pub fn project_flux<'m, F>(
    mesh: &'m Mesh,
    coeffs: &CoefficientSet,
    target: F,
    degree: usize,
) -> Result<FluxField<'m>>
where
    F: Fn(&QuadPoint) -> Point,
{
    let n = mesh.num_facets();
    let nloc = mesh.dim() + 1;
    let mut triplets = Vec::with_capacity(mesh.num_cells() * nloc * nloc);
    let mut rhs = vec![0.0; n];
    for cell in 0..mesh.num_cells() {
        let facets = mesh.cell_facets(cell);
        for qp in cell_points(mesh, cell, degree)? {
            let ainv = coeffs.a_inv_at(qp.x)?;
            let t = mat_vec(&ainv, target(&qp));
            let basis: Vec<Point> = (0..nloc).map(|k| flux_basis(mesh, &qp, k).0).collect();
            for i in 0..nloc {
                let bi = basis[i];
                rhs[facets[i]] += qp.weight * (t[0] * bi[0] + t[1] * bi[1]);
                for j in 0..nloc {
                    let aj = mat_vec(&ainv, basis[j]);
                    triplets.push((facets[i], facets[j], qp.weight * (aj[0] * bi[0] + aj[1] * bi[1])));
                }
            }
        }
    }
    let m = CsrMatrix::from_triplets(n, triplets);
    let bnorm = norm2(&rhs);
    if bnorm == 0.0 {
        return Ok(FluxField::zeros(mesh));
    }
    let mut x = m.solve_direct(&rhs, true)?;
    let r: Vec<f64> = m.mul_vec(&x).iter().zip(&rhs).map(|(a, b)| b - a).collect();
    if norm2(&r) > SOLVE_TOL * bnorm {
        let dx = m.solve_direct(&r, true)?;
        x.iter_mut().zip(&dx).for_each(|(a, d)| *a += d);
    }
    FluxField::new(mesh, x)
}

/// Projection of `A grad u` or `A grad u - b u` onto the flux space.
pub fn reconstruct_flux<'m>(
    u: &ScalarField<'m>,
    coeffs: &CoefficientSet,
    kind: FluxKind,
    degree: usize,
) -> Result<FluxField<'m>> {
    project_flux(
        u.mesh(),
        coeffs,
        |qp| {
            let g = mat_vec(&coeffs.a_at(qp.x), u.gradient_in(qp.cell));
            match kind {
                FluxKind::Diffusive => g,
                FluxKind::Total => {
                    let b = coeffs.b_at(qp.x);
                    let v = u.value_in(qp.cell, &qp.bary);
                    [g[0] - b[0] * v, g[1] - b[1] * v]
                }
            }
        },
        degree,
    )
}

/// Vertex value = mean of the adjacent cell values; boundary vertices are set to zero.
pub fn nodal_average<'m>(mesh: &'m Mesh, cell_values: &[f64]) -> Result<ScalarField<'m>> {
    if cell_values.len() != mesh.num_cells() {
        return Err(Error::Dimension(format!(
            "{} cell values for {} cells",
            cell_values.len(),
            mesh.num_cells()
        )));
    }
    let mut sum = vec![0.0; mesh.num_vertices()];
    let mut count = vec![0usize; mesh.num_vertices()];
    for (c, cell) in mesh.cells().enumerate() {
        for &v in cell {
            sum[v] += cell_values[c];
            count[v] += 1;
        }
    }
    let values = (0..mesh.num_vertices())
        .map(|v| {
            if mesh.is_boundary_vertex(v) {
                0.0
            } else {
                sum[v] / count[v] as f64
            }
        })
        .collect();
    ScalarField::new(mesh, values, true)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::coefficients::CoefficientSet;
    use crate::fem::{integrate, interpolate_scalar, Region, ScalarFunction, VectorFunction};
    use crate::mesh::{build_interval_mesh, build_unit_square_mesh};
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;
    use std::f64::consts::PI;

    fn coeffs(dim: usize, a: [&str; 3], b: [&str; 2], div_b: &str, c: &str, f: &str) -> CoefficientSet {
        CoefficientSet::parse(dim, a, b, div_b, c, f).unwrap().with_constants(1.0, 1.0, 1.0, 1.0, 0.0)
    }

    #[test]
    fn csr_merges_duplicates() {
        let m = CsrMatrix::from_triplets(2, vec![(1, 0, 1.0), (0, 0, 2.0), (1, 0, 3.0), (0, 1, -1.0)]);
        assert_eq!(m.nnz(), 3);
        assert_eq!(m.get(1, 0), 4.0);
        assert_eq!(m.mul_vec(&[1.0, 2.0]), vec![0.0, 4.0]);
        assert_eq!(m.transpose().get(0, 1), 4.0);
    }

    #[test]
    fn bicgstab_solves_nonsymmetric_system() {
        let n = 30;
        let mut t = Vec::new();
        for i in 0..n {
            t.push((i, i, 4.0));
            if i + 1 < n {
                t.push((i, i + 1, -1.5));
                t.push((i + 1, i, -0.5));
            }
        }
        let a = CsrMatrix::from_triplets(n, t);
        let rhs: Vec<f64> = (0..n).map(|i| (i as f64).sin()).collect();
        let mut x = vec![0.0; n];
        bicgstab(&a, &rhs, &mut x, 1e-13, 1000).unwrap();
        let r: Vec<f64> = a.mul_vec(&x).iter().zip(&rhs).map(|(p, q)| p - q).collect();
        assert!(norm2(&r) <= 1e-13 * norm2(&rhs));
    }

    #[test]
    fn zero_source_gives_zero_solution() {
        let m = build_unit_square_mesh(4).unwrap();
        let k = coeffs(2, ["1", "0", "1"], ["y", "-x"], "0", "1", "0");
        let u = solve_primal(&m, &k, Formulation::Form1, 5).unwrap();
        assert!(u.values().iter().all(|&v| v == 0.0));
    }

    #[test]
    fn reaction_diffusion_nodal_error_is_second_order() {
        // pure 1D Poisson would be nodally exact
        let mut errs = Vec::new();
        for n in [8, 16, 32] {
            let m = build_interval_mesh(0.0, 1.0, n).unwrap();
            let k = coeffs(1, ["1", "0", "1"], ["0", "0"], "0", "1", "(pi^2 + 1)*sin(pi*x)");
            let u = solve_primal(&m, &k, Formulation::Form1, 8).unwrap();
            let e = (0..m.num_vertices())
                .map(|v| (u.values()[v] - (PI * m.vertex(v)[0]).sin()).abs())
                .fold(0.0, f64::max);
            errs.push(e);
        }
        for w in errs.windows(2) {
            assert!((w[0] / w[1]).log2() > 1.9, "{errs:?}");
        }
    }

    #[test]
    fn galerkin_orthogonality() {
        let m = build_unit_square_mesh(6).unwrap();
        let k = coeffs(2, ["2", "0.3", "1"], ["y", "-x"], "0", "1+x", "exp(x)*y");
        let sys = assemble_primal(&m, &k, Formulation::Form1, 5).unwrap();
        let x = sys.solve().unwrap();
        let r = sys.residual(&x);
        assert!(r.iter().all(|v| v.abs() <= 1e-11), "{}", norm2(&r));
        assert!(sys.matrix.symmetric_part().cholesky_succeeds());
    }

    #[test]
    fn both_formulations_agree_for_polynomial_data() {
        let m = build_unit_square_mesh(6).unwrap();
        let k = coeffs(2, ["1", "0", "1"], ["x^2", "x*y"], "3*x", "4", "1 + x*y");
        let u1 = solve_primal(&m, &k, Formulation::Form1, 6).unwrap();
        let u2 = solve_primal(&m, &k, Formulation::Form2, 6).unwrap();
        let d = u1.add_scaled(-1.0, &u2).unwrap();
        let h1 = integrate(&m, 2, Region::All, |qp| {
            let g = d.gradient(qp);
            d.value(qp).powi(2) + g[0] * g[0] + g[1] * g[1]
        })
        .unwrap()
        .sqrt();
        assert!(h1 < 1e-10, "{h1}");
    }

    #[test]
    fn reconstruction_reproduces_constant_gradients() {
        let m = build_unit_square_mesh(3).unwrap();
        let k = coeffs(2, ["1", "0", "1"], ["0", "0"], "0", "1", "0");
        let u = interpolate_scalar(&m, |p| 2.0 * p[0] - 0.5 * p[1], false).unwrap();
        let p = reconstruct_flux(&u, &k, FluxKind::Diffusive, 2).unwrap();
        for c in 0..m.num_cells() {
            for qp in cell_points(&m, c, 2).unwrap() {
                let v = p.value(&qp);
                assert!((v[0] - 2.0).abs() < 1e-12 && (v[1] + 0.5).abs() < 1e-12);
            }
        }
        let z = ScalarField::zeros(&m, true);
        assert!(reconstruct_flux(&z, &k, FluxKind::Total, 2).unwrap().dofs().iter().all(|&d| d == 0.0));
    }

    #[test]
    fn one_dimensional_projection_by_hand() {
        // mass matrix (1/12)[[2,1,0],[1,4,1],[0,1,2]], load (1/8, 0, -1/8)
        let m = build_interval_mesh(0.0, 1.0, 2).unwrap();
        let k = coeffs(1, ["1", "0", "1"], ["0", "0"], "0", "1", "0");
        let u = interpolate_scalar(&m, |p| p[0] * (1.0 - p[0]), true).unwrap();
        let p = reconstruct_flux(&u, &k, FluxKind::Diffusive, 2).unwrap();
        let expect = [0.75, 0.0, -0.75];
        for (f, facet) in m.facets().iter().enumerate() {
            let x = m.vertex(facet.vertices()[0])[0];
            let e = expect[(2.0 * x).round() as usize];
            assert!((p.dofs()[f] - e).abs() < 1e-14, "x = {x}: {}", p.dofs()[f]);
        }
    }

    #[test]
    fn projection_is_idempotent() {
        let m = build_unit_square_mesh(4).unwrap();
        let k = coeffs(2, ["2", "0.5", "1"], ["y", "-x"], "0", "1", "0");
        let mut rng = ChaCha8Rng::seed_from_u64(9);
        let u = ScalarField::random(&m, &mut rng, true);
        let p = reconstruct_flux(&u, &k, FluxKind::Total, 4).unwrap();
        let q = project_flux(&m, &k, |qp| p.value(qp), 4).unwrap();
        for (a, b) in p.dofs().iter().zip(q.dofs()) {
            assert!((a - b).abs() <= 1e-12, "{a} vs {b}");
        }
        let d: f64 = (0..m.num_cells()).map(|c| (p.divergence_in(c) - q.divergence_in(c)).abs()).sum();
        assert!(d < 1e-9);
    }

    #[test]
    fn nodal_average_examples() {
        let m = build_interval_mesh(0.0, 1.0, 2).unwrap();
        assert_eq!(nodal_average(&m, &[1.0, 3.0]).unwrap().values(), &[0.0, 2.0, 0.0]);
        let sq = build_unit_square_mesh(4).unwrap();
        let g = nodal_average(&sq, &vec![2.5; sq.num_cells()]).unwrap();
        for v in 0..sq.num_vertices() {
            let e = if sq.is_boundary_vertex(v) { 0.0 } else { 2.5 };
            assert_eq!(g.values()[v], e);
        }
        let checker: Vec<f64> = (0..sq.num_cells()).map(|c| ((c / 2 + c / 8) % 2) as f64).collect();
        let g = nodal_average(&sq, &checker).unwrap();
        for v in 0..sq.num_vertices() {
            if sq.is_boundary_vertex(v) {
                continue;
            }
            let adj: Vec<f64> = sq
                .cells()
                .enumerate()
                .filter(|(_, cell)| cell.contains(&v))
                .map(|(c, _)| checker[c])
                .collect();
            let mean = adj.iter().sum::<f64>() / adj.len() as f64;
            assert_eq!(g.values()[v], mean);
        }
        assert!(nodal_average(&sq, &[1.0]).is_err());
    }
}
