#![allow(dead_code)]

use certerr_core::fem::{interpolate_scalar, FluxField, ScalarField, ASSEMBLY_DEGREE};
use certerr_core::mesh::Mesh;
use certerr_core::oracle::ManufacturedCase;
use certerr_core::solver::{reconstruct_flux, solve_primal, FluxKind, Formulation};
use rand::Rng;

pub fn levels(case: &ManufacturedCase) -> Vec<usize> {
    if case.domain.dim() == 1 {
        vec![8, 16, 32, 64]
    } else {
        vec![4, 8, 16]
    }
}

pub fn rel(a: f64, b: f64) -> f64 {
    (a - b).abs() / b.abs().max(1e-30)
}

fn kind(form: Formulation) -> FluxKind {
    match form {
        Formulation::Form1 => FluxKind::Diffusive,
        Formulation::Form2 => FluxKind::Total,
    }
}

/// Galerkin solution and its flux reconstruction.
pub fn galerkin_pair<'m>(mesh: &'m Mesh, case: &ManufacturedCase, form: Formulation) -> (ScalarField<'m>, FluxField<'m>) {
    let u = solve_primal(mesh, &case.coeffs, form, ASSEMBLY_DEGREE).unwrap();
    let p = reconstruct_flux(&u, &case.coeffs, kind(form), ASSEMBLY_DEGREE).unwrap();
    (u, p)
}

/// `count` pairs `(I_h u + eps r, flux + delta s)`: the first half with
/// `(eps, delta) = (0.1, 0.1)`, the rest with `(1, 1)`.
pub fn perturbed_pairs<'m, R: Rng>(
    mesh: &'m Mesh,
    case: &ManufacturedCase,
    flux: &FluxField<'m>,
    count: usize,
    rng: &mut R,
) -> Vec<(ScalarField<'m>, FluxField<'m>)> {
    let iu = interpolate_scalar(mesh, |x| case.u.value.eval_at(x), true).unwrap();
    (0..count)
        .map(|k| {
            let s = if k < count / 2 { 0.1 } else { 1.0 };
            let u = iu.add_scaled(s, &ScalarField::random(mesh, rng, true)).unwrap();
            let p = flux.add_scaled(s, &FluxField::random(mesh, rng)).unwrap();
            (u, p)
        })
        .collect()
}
