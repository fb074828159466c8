mod common;

use std::f64::consts::PI;

use certerr_core::coefficients::{friedrichs_upper_bound, split_domain, CoefficientSet};
use certerr_core::expr::Expr;
use certerr_core::fem::{integrate, FluxField, Region, ScalarField, ScalarFunction, VectorFunction, Zero};
use certerr_core::functionals::{
    bounds_m3, error_norm_1, error_norm_2, error_norm_3, isometry_residual, majorant_m1, majorant_m2,
    postprocessed_primal_bound, primal_bounds, weighted_square,
};
use certerr_core::oracle::{case_by_id, catalog, manufacture_case, reference_error, Domain, ErrorMeasure};
use certerr_core::solver::{nodal_average, reconstruct_flux, FluxKind, Formulation};
use common::{galerkin_pair, perturbed_pairs, rel};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

const D: usize = 12;

#[test]
fn two_code_paths_agree() {
    let mut rng = ChaCha8Rng::seed_from_u64(11);
    for case in catalog() {
        let n = if case.domain.dim() == 1 { 16 } else { 4 };
        let mesh = case.domain.mesh(n).unwrap();
        let split = split_domain(&case.coeffs, &mesh).unwrap();
        let (_, p) = galerkin_pair(&mesh, &case, Formulation::Form1);
        for (u, ph) in perturbed_pairs(&mesh, &case, &p, 4, &mut rng) {
            if split.omega0().is_empty() && case.coeffs.c0 > 0.0 {
                let a = error_norm_1(&mesh, &case, &u, &ph, D).unwrap();
                let b = reference_error(&mesh, &case, &u, &ph, ErrorMeasure::Err1, None, D).unwrap();
                assert!(rel(a.total, b.total) <= 1e-10, "{}", case.id);
                for (x, y) in a.terms.iter().zip(&b.terms) {
                    assert_eq!(x.0, y.0);
                    assert!((x.1 - y.1).abs() <= 1e-10 * b.total);
                }
            }
            let a = error_norm_3(&mesh, &case, &u, &ph, &split, D).unwrap();
            let b = reference_error(&mesh, &case, &u, &ph, ErrorMeasure::Err3, Some(&split), D).unwrap();
            assert!(rel(a.total, b.total) <= 1e-10, "{}", case.id);
            if case.coeffs.lambda > 0.0 {
                let a = error_norm_2(&mesh, &case, &u, &ph, D).unwrap();
                let b = reference_error(&mesh, &case, &u, &ph, ErrorMeasure::Err2, None, D).unwrap();
                assert!(rel(a.total, b.total) <= 1e-10, "{}", case.id);
            }
        }
    }
}

#[test]
fn reference_quadrature_has_converged() {
    let mut rng = ChaCha8Rng::seed_from_u64(12);
    for case in catalog() {
        let n = if case.domain.dim() == 1 { 16 } else { 4 };
        let mesh = case.domain.mesh(n).unwrap();
        let split = split_domain(&case.coeffs, &mesh).unwrap();
        let (u, p) = galerkin_pair(&mesh, &case, Formulation::Form1);
        let mut pairs = vec![(u, p.clone())];
        pairs.extend(perturbed_pairs(&mesh, &case, &p, 2, &mut rng));
        for (uh, ph) in &pairs {
            let e10 = reference_error(&mesh, &case, uh, ph, ErrorMeasure::Err3, Some(&split), 10).unwrap();
            let e14 = reference_error(&mesh, &case, uh, ph, ErrorMeasure::Err3, Some(&split), 14).unwrap();
            assert!(rel(e10.total, e14.total) <= 1e-9, "{}: {:e}", case.id, rel(e10.total, e14.total));
        }
    }
}

#[test]
fn reaction_diffusion_specialization() {
    // b = 0: first weight is c, last term is |div(p - p_h)|^2_{c^{-1}}
    let case = case_by_id("RD-2D").unwrap();
    let mesh = case.domain.mesh(4).unwrap();
    let (u, p) = galerkin_pair(&mesh, &case, Formulation::Form1);
    let e = error_norm_1(&mesh, &case, &u, &p, D).unwrap();
    let plain = weighted_square(&mesh, D, |_| 1.0, |qp| case.u.value(qp) - u.value(qp)).unwrap();
    let div = weighted_square(&mesh, D, |_| 1.0, |qp| case.p.divergence(qp) - p.divergence(qp)).unwrap();
    assert!(rel(e.terms[0].1, plain) < 1e-13);
    assert!(rel(e.terms[3].1, div) < 1e-13);
}

#[test]
fn convection_diffusion_drops_reaction_term() {
    let case = case_by_id("CD-1D").unwrap();
    let mesh = case.domain.mesh(16).unwrap();
    let (u, q) = galerkin_pair(&mesh, &case, Formulation::Form2);
    let e = error_norm_2(&mesh, &case, &u, &q, D).unwrap();
    assert_eq!(e.terms[0].1, 0.0);
    let m = majorant_m2(&mesh, &case.coeffs, &u, &q, D).unwrap();
    assert!(rel(m.total, e.total) < 1e-8);
}

#[test]
fn pure_diffusion_m3_bounds() {
    let k = CoefficientSet::parse(2, ["1", "0", "1"], ["0", "0"], "0", "0", "0")
        .unwrap()
        .with_constants(1.0, 1.0, 0.0, 0.0, 0.0);
    let u = Expr::parse("sin(pi*x)*sin(pi*y)").unwrap();
    let case = manufacture_case("D-2D", Domain::unit_square(), u, k).unwrap();
    let mesh = case.domain.mesh(4).unwrap();
    let split = split_domain(&case.coeffs, &mesh).unwrap();
    assert_eq!(split.omega0().len(), mesh.num_cells());
    let cf = friedrichs_upper_bound(&mesh).unwrap();
    assert!((cf - 1.0 / PI).abs() < 1e-15);
    let mut rng = ChaCha8Rng::seed_from_u64(13);
    for _ in 0..10 {
        let uh = ScalarField::random(&mesh, &mut rng, true);
        let ph = FluxField::random(&mesh, &mut rng);
        let b = bounds_m3(&mesh, &case.coeffs, &uh, &ph, &split, cf, D).unwrap();
        let flux = weighted_square(&mesh, D, |_| 1.0, |qp| {
            let (p, g) = (ph.value(qp), uh.gradient(qp));
            (p[0] - g[0]).hypot(p[1] - g[1])
        })
        .unwrap();
        let res = weighted_square(&mesh, D, |_| 1.0, |qp| case.coeffs.f_at(qp.x) + ph.divergence(qp)).unwrap();
        let expect = 2.0 * flux + (1.0 + 4.0 * cf * cf) * res;
        assert!(rel(b.plus.total, expect) < 1e-12);
        let e = reference_error(&mesh, &case, &uh, &ph, ErrorMeasure::Err3, Some(&split), D).unwrap().total;
        assert!(b.simple_lower.total <= e + 1e-10 && e <= b.plus.total + 1e-10);
    }
    let zero = bounds_m3(&mesh, &case.coeffs, &case.u, &case.p, &split, cf, D).unwrap();
    assert!(zero.plus.total < 1e-20 && zero.simple_lower.total < 1e-20);
}

#[test]
fn primal_bound_with_exact_flux() {
    // phi = p: bound1 = |c e + b.grad e|^2_{c^{-1}} + |grad e|^2_A / 2
    let case = case_by_id("CRD-1D").unwrap();
    let mesh = case.domain.mesh(16).unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(14);
    let uh = ScalarField::random(&mesh, &mut rng, true);
    let pb = primal_bounds(&mesh, &case.coeffs, &uh, &case.p, D).unwrap();
    let r = integrate(&mesh, D, Region::All, |qp| {
        let e = case.u.value(qp) - uh.value(qp);
        let g = case.u.gradient(qp)[0] - uh.gradient(qp)[0];
        let s = e + g;
        s * s + 0.5 * g * g
    })
    .unwrap();
    assert!(rel(pb.bound1, r) < 1e-12);
    let e = error_norm_1(&mesh, &case, &uh, &case.p, D).unwrap();
    assert!(e.terms[0].1 <= pb.bound1);
    assert!(pb.bound2.is_none());
}

#[test]
fn postprocessed_bound_holds_for_cell_means() {
    let case = case_by_id("CRD-1D-compress").unwrap();
    for n in [8, 16, 32] {
        let mesh = case.domain.mesh(n).unwrap();
        let means: Vec<f64> = (0..mesh.num_cells())
            .map(|c| integrate(&mesh, D, Region::Cell(c), |qp| case.u.value(qp)).unwrap() / mesh.geometry(c).measure)
            .collect();
        let g = nodal_average(&mesh, &means).unwrap();
        let phi = reconstruct_flux(&g, &case.coeffs, FluxKind::Diffusive, D).unwrap();
        let b = postprocessed_primal_bound(&mesh, &case.coeffs, &means, &phi, D).unwrap();
        let err = |w: &dyn Fn([f64; 2]) -> f64| {
            weighted_square(&mesh, D, w, |qp| case.u.value(qp) - means[qp.cell]).unwrap().sqrt()
        };
        assert!(err(&|x| case.coeffs.c_at(x) - case.coeffs.div_b_at(x)) <= b.bound_c);
        assert!(err(&|x| -case.coeffs.div_b_at(x)) <= b.bound_b.unwrap());
        assert!(b.bound_c >= (b.bound1_at_average.sqrt() - b.distance_c).abs());
    }
}

#[test]
fn zero_solution_has_zero_isometry_residual() {
    let k = CoefficientSet::parse(1, ["1", "0", "1"], ["1", "0"], "0", "1", "0").unwrap();
    let case = manufacture_case("Z", Domain::unit_interval(), Expr::zero(), k).unwrap();
    let mesh = case.domain.mesh(4).unwrap();
    assert_eq!(isometry_residual(&mesh, &case, Formulation::Form1, D).unwrap(), 0.0);
    assert_eq!(isometry_residual(&mesh, &case, Formulation::Form2, D).unwrap(), 0.0);
}

#[test]
fn equality_holds_for_fully_random_pairs() {
    // no relation to the exact solution at all
    let case = case_by_id("CRD-2D-rot").unwrap();
    let mesh = case.domain.mesh(6).unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(15);
    for _ in 0..5 {
        let u = ScalarField::random(&mesh, &mut rng, true);
        let p = FluxField::random(&mesh, &mut rng);
        let m1 = majorant_m1(&mesh, &case.coeffs, &u, &p, D).unwrap();
        let e1 = reference_error(&mesh, &case, &u, &p, ErrorMeasure::Err1, None, D).unwrap();
        assert!(rel(m1.total, e1.total) < 1e-8);
        let m2 = majorant_m2(&mesh, &case.coeffs, &u, &p, D).unwrap();
        let e2 = reference_error(&mesh, &case, &u, &p, ErrorMeasure::Err2, None, D).unwrap();
        assert!(rel(m2.total, e2.total) < 1e-8);
    }
    let m = majorant_m1(&mesh, &case.coeffs, &Zero, &Zero, D).unwrap();
    let e = error_norm_1(&mesh, &case, &Zero, &Zero, D).unwrap();
    assert!(rel(m.total, e.total) < 1e-12);
}
