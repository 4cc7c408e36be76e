//! Reference-cell quadrature rules.
//!
//! Cells live on the bi-unit square `[-1, 1]^2`, facets on the bi-unit
//! segment `[-1, 1]`.

use std::str::FromStr;

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum QuadratureKind {
    /// Tensor square of the 3-point Gauss-Lobatto rule (nodes -1, 0, 1).
    GaussLobatto3x3,
    /// Tensor square of the 3-point Gauss-Legendre rule.
    Gauss3x3,
    /// 3-point Gauss-Legendre rule on a facet.
    Gauss3,
}

impl FromStr for QuadratureKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "gauss-lobatto-3x3" => Ok(Self::GaussLobatto3x3),
            "gauss-3x3" => Ok(Self::Gauss3x3),
            "gauss-3" => Ok(Self::Gauss3),
            other => Err(Error::invalid(format!("unknown quadrature variant '{other}'"))),
        }
    }
}

#[derive(Debug, Clone)]
pub struct QuadratureRule {
    pub kind: QuadratureKind,
    /// Reference coordinates; facet rules only use the first entry.
    pub points: Vec<[f64; 2]>,
    pub weights: Vec<f64>,
}

impl QuadratureRule {
    pub fn len(&self) -> usize {
        self.weights.len()
    }

    pub fn is_empty(&self) -> bool {
        self.weights.is_empty()
    }

    pub fn is_facet_rule(&self) -> bool {
        matches!(self.kind, QuadratureKind::Gauss3)
    }

    /// Applies the rule to `f` on the reference cell (or segment).
    pub fn integrate(&self, f: impl Fn(f64, f64) -> f64) -> f64 {
        self.points
            .iter()
            .zip(&self.weights)
            .map(|(p, w)| w * f(p[0], p[1]))
            .sum()
    }
}

const LOBATTO_3: ([f64; 3], [f64; 3]) = ([-1.0, 0.0, 1.0], [1.0 / 3.0, 4.0 / 3.0, 1.0 / 3.0]);

fn gauss_3() -> ([f64; 3], [f64; 3]) {
    let a = (3.0f64 / 5.0).sqrt();
    ([-a, 0.0, a], [5.0 / 9.0, 8.0 / 9.0, 5.0 / 9.0])
}

fn tensor(kind: QuadratureKind, (x, w): ([f64; 3], [f64; 3])) -> QuadratureRule {
    let mut points = Vec::with_capacity(9);
    let mut weights = Vec::with_capacity(9);
    for j in 0..3 {
        for i in 0..3 {
            points.push([x[i], x[j]]);
            weights.push(w[i] * w[j]);
        }
    }
    QuadratureRule {
        kind,
        points,
        weights,
    }
}

pub fn quadrature(kind: QuadratureKind) -> QuadratureRule {
    match kind {
        QuadratureKind::GaussLobatto3x3 => tensor(kind, LOBATTO_3),
        QuadratureKind::Gauss3x3 => tensor(kind, gauss_3()),
        QuadratureKind::Gauss3 => {
            let (x, w) = gauss_3();
            QuadratureRule {
                kind,
                points: x.iter().map(|&s| [s, 0.0]).collect(),
                weights: w.to_vec(),
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    /// Solves the moment equations of a 3-node rule on fixed nodes {-1,0,1}.
    fn lobatto_weights_from_moments() -> [f64; 3] {
        // w0 + w1 + w2 = 2, -w0 + w2 = 0, w0 + w2 = 2/3
        let w0 = 1.0 / 3.0;
        let w2 = w0;
        let w1 = 2.0 - w0 - w2;
        [w0, w1, w2]
    }

    #[test]
    fn lobatto_weights_match_moment_solution() {
        let w = lobatto_weights_from_moments();
        for (a, b) in w.iter().zip(LOBATTO_3.1.iter()) {
            assert!((a - b).abs() < 1e-15);
        }
        // cubic moment vanishes by symmetry
        let m3: f64 = LOBATTO_3.0.iter().zip(w.iter()).map(|(x, w)| w * x.powi(3)).sum();
        assert_eq!(m3, 0.0);
    }

    #[test]
    fn cell_weights_sum_to_four() {
        for kind in [QuadratureKind::GaussLobatto3x3, QuadratureKind::Gauss3x3] {
            let rule = quadrature(kind);
            assert!((rule.weights.iter().sum::<f64>() - 4.0).abs() < 1e-14);
        }
        let facet = quadrature(QuadratureKind::Gauss3);
        assert!((facet.weights.iter().sum::<f64>() - 2.0).abs() < 1e-14);
    }

    #[test]
    fn x2y2_over_square() {
        let rule = quadrature(QuadratureKind::GaussLobatto3x3);
        let v = rule.integrate(|x, y| x * x * y * y);
        assert!((v - 4.0 / 9.0).abs() < 1e-14);
    }

    #[test]
    fn monomials_integrated_up_to_exactness_degree() {
        let exact_1d = |k: i32| if k % 2 == 1 { 0.0 } else { 2.0 / (k as f64 + 1.0) };
        for (kind, degree) in [(QuadratureKind::GaussLobatto3x3, 3), (QuadratureKind::Gauss3x3, 5)] {
            let rule = quadrature(kind);
            for a in 0..=degree {
                for b in 0..=degree {
                    let v = rule.integrate(|x, y| x.powi(a) * y.powi(b));
                    let e = exact_1d(a) * exact_1d(b);
                    assert!((v - e).abs() <= 1e-12 * e.abs().max(1.0), "{kind:?} x^{a} y^{b}");
                }
            }
        }
        let facet = quadrature(QuadratureKind::Gauss3);
        for k in 0..=5 {
            let v = facet.integrate(|s, _| s.powi(k));
            assert!((v - exact_1d(k)).abs() < 1e-14);
        }
    }

    #[test]
    fn unknown_variant_rejected() {
        assert!("gauss-7".parse::<QuadratureKind>().is_err());
        assert_eq!(
            "gauss-lobatto-3x3".parse::<QuadratureKind>().unwrap(),
            QuadratureKind::GaussLobatto3x3
        );
    }
}
