//! Reference-element quadrature.
//!
//! Interval rules are Gauss-Legendre on `[0, 1]`. Triangle rules on the reference
//! triangle `(0,0), (1,0), (0,1)` are collapsed tensor Gauss rules obtained from the
//! map `(xi, eta) -> (xi (1 - eta), eta)`, which has Jacobian `1 - eta`.

use std::num::NonZeroUsize;
use std::sync::OnceLock;

use gauss_quad::legendre::GaussLegendre;

use crate::error::{Error, Result};

/// Highest exactness degree available for either reference element.
pub const MAX_DEGREE: usize = 41;

#[derive(Clone, Debug, PartialEq)]
pub struct QuadratureRule {
    /// Reference coordinates; the second entry is 0 for interval rules.
    pub points: Vec<[f64; 2]>,
    /// Positive weights summing to the reference measure (1 or 1/2).
    pub weights: Vec<f64>,
    pub degree: usize,
}

impl QuadratureRule {
    pub fn len(&self) -> usize {
        self.weights.len()
    }

    pub fn is_empty(&self) -> bool {
        self.weights.is_empty()
    }
}

fn gauss_unit(n: usize) -> Vec<(f64, f64)> {
    let n = NonZeroUsize::new(n.max(1)).unwrap_or(NonZeroUsize::MIN);
    GaussLegendre::new(n)
        .as_node_weight_pairs()
        .iter()
        .map(|&(x, w)| (0.5 * (x + 1.0), 0.5 * w))
        .collect()
}

fn build_interval(degree: usize) -> QuadratureRule {
    let pairs = gauss_unit(degree / 2 + 1);
    QuadratureRule {
        points: pairs.iter().map(|&(x, _)| [x, 0.0]).collect(),
        weights: pairs.iter().map(|&(_, w)| w).collect(),
        degree,
    }
}

fn build_triangle(degree: usize) -> QuadratureRule {
    let xi = gauss_unit(degree / 2 + 1);
    // one more degree in eta for the Jacobian factor
    let eta = gauss_unit((degree + 1) / 2 + 1);
    let mut points = Vec::with_capacity(xi.len() * eta.len());
    let mut weights = Vec::with_capacity(xi.len() * eta.len());
    for &(t, wt) in &eta {
        for &(s, ws) in &xi {
            points.push([s * (1.0 - t), t]);
            weights.push(ws * wt * (1.0 - t));
        }
    }
    QuadratureRule {
        points,
        weights,
        degree,
    }
}

fn table(dim: usize) -> &'static [QuadratureRule] {
    static INTERVAL: OnceLock<Vec<QuadratureRule>> = OnceLock::new();
    static TRIANGLE: OnceLock<Vec<QuadratureRule>> = OnceLock::new();
    if dim == 1 {
        INTERVAL.get_or_init(|| (0..=MAX_DEGREE).map(build_interval).collect())
    } else {
        TRIANGLE.get_or_init(|| (0..=MAX_DEGREE).map(build_triangle).collect())
    }
}

/// Rule exact for polynomials of total degree `degree` on the reference simplex of
/// dimension `dim`.
pub fn rule(dim: usize, degree: usize) -> Result<&'static QuadratureRule> {
    if (dim != 1 && dim != 2) || degree > MAX_DEGREE {
        return Err(Error::QuadratureUnavailable { dim, degree });
    }
    Ok(&table(dim)[degree])
}
