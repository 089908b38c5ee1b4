//! Collapsed Gauss rules on the reference triangle and Gauss rules on [0, 1].

use std::num::NonZeroUsize;

use gauss_quad::legendre::GaussLegendre;

use crate::error::{Error, Result};

#[derive(Clone, Debug)]
pub struct QuadratureRule {
    /// Polynomial degree integrated exactly.
    pub degree: usize,
    /// Points on the reference triangle (0,0), (1,0), (0,1).
    pub tri_points: Vec<[f64; 2]>,
    pub tri_weights: Vec<f64>,
    /// Points on [0, 1].
    pub edge_points: Vec<f64>,
    pub edge_weights: Vec<f64>,
}

fn gauss_unit(m: usize) -> (Vec<f64>, Vec<f64>) {
    let rule = GaussLegendre::new(NonZeroUsize::new(m).expect("at least one point"));
    let mut pairs: Vec<(f64, f64)> = rule.as_node_weight_pairs().to_vec();
    pairs.sort_by(|a, b| a.0.partial_cmp(&b.0).unwrap());
    pairs.into_iter().map(|(x, w)| (0.5 * (x + 1.0), 0.5 * w)).unzip()
}

impl QuadratureRule {
    /// Rule exact for polynomials of total degree `degree` on triangles and edges.
    pub fn with_degree(degree: usize) -> Self {
        // Duffy map adds one degree in the collapsed direction.
        let m = (degree + 3) / 2;
        let (x, w) = gauss_unit(m);
        let mut tri_points = Vec::with_capacity(m * m);
        let mut tri_weights = Vec::with_capacity(m * m);
        for (u, wu) in x.iter().zip(&w) {
            for (v, wv) in x.iter().zip(&w) {
                tri_points.push([*u, v * (1.0 - u)]);
                tri_weights.push(wu * wv * (1.0 - u));
            }
        }
        let (edge_points, edge_weights) = gauss_unit(degree / 2 + 1);
        QuadratureRule { degree, tri_points, tri_weights, edge_points, edge_weights }
    }
}

/// Default rule for polynomial degree `k`: exact to degree `2k + 2`.
pub fn make_quadrature(k: usize) -> Result<QuadratureRule> {
    if !(1..=3).contains(&k) {
        return Err(Error::Unsupported(format!("polynomial degree {k} (supported: 1..=3)")));
    }
    Ok(QuadratureRule::with_degree(2 * k + 2))
}
