//! Quadrature on the reference triangle {(ξ₁, ξ₂) : ξ₁, ξ₂ ≥ 0, ξ₁ + ξ₂ ≤ 1}.

use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::geometry::{GeometryData, ParametricGeometry};

pub const MAX_DEGREE: usize = 20;

#[derive(Debug, Clone, PartialEq)]
pub struct QuadratureRule {
    /// Reference coordinates (ξ₁, ξ₂); barycentric λ = (1 − ξ₁ − ξ₂, ξ₁, ξ₂).
    pub points: Vec<[f64; 2]>,
    pub weights: Vec<f64>,
    pub degree: usize,
}

impl QuadratureRule {
    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    pub fn barycentric(&self, q: usize) -> [f64; 3] {
        let [x, y] = self.points[q];
        [1.0 - x - y, x, y]
    }

    /// Apply the rule to a function of reference coordinates.
    pub fn integrate(&self, f: impl Fn([f64; 2]) -> f64) -> f64 {
        self.points.iter().zip(&self.weights).map(|(&p, &w)| w * f(p)).sum()
    }

    fn from_orbits(degree: usize, centroid: Option<f64>, orbits: &[(f64, f64)]) -> Self {
        let mut points = Vec::new();
        let mut weights = Vec::new();
        if let Some(w) = centroid {
            points.push([1.0 / 3.0, 1.0 / 3.0]);
            weights.push(0.5 * w);
        }
        for &(a, w) in orbits {
            let b = 1.0 - 2.0 * a;
            for p in [[a, a], [b, a], [a, b]] {
                points.push(p);
                weights.push(0.5 * w);
            }
        }
        QuadratureRule { points, weights, degree }
    }
}

/// Gauss–Legendre nodes and weights on [0, 1].
pub fn gauss_legendre(n: usize) -> (Vec<f64>, Vec<f64>) {
    let mut x = vec![0.0; n];
    let mut w = vec![0.0; n];
    for i in 0..n.div_ceil(2) {
        let mut z = (std::f64::consts::PI * (i as f64 + 0.75) / (n as f64 + 0.5)).cos();
        let mut dp = 0.0;
        for _ in 0..100 {
            let (mut p0, mut p1) = (1.0, z);
            for k in 2..=n {
                let p2 = ((2 * k - 1) as f64 * z * p1 - (k - 1) as f64 * p0) / k as f64;
                p0 = p1;
                p1 = p2;
            }
            dp = n as f64 * (z * p1 - p0) / (z * z - 1.0);
            let dz = p1 / dp;
            z -= dz;
            if dz.abs() < 1e-16 {
                break;
            }
        }
        let wi = 2.0 / ((1.0 - z * z) * dp * dp);
        x[i] = 0.5 * (1.0 - z);
        x[n - 1 - i] = 0.5 * (1.0 + z);
        w[i] = 0.5 * wi;
        w[n - 1 - i] = 0.5 * wi;
    }
    (x, w)
}

/// Collapsed tensor Gauss rule, exact for total degree `degree`.
fn collapsed(degree: usize) -> QuadratureRule {
    // The Duffy factor (1 − s) raises the degree in s by one.
    let n = (degree + 2).div_ceil(2);
    let (x, w) = gauss_legendre(n);
    let mut points = Vec::with_capacity(n * n);
    let mut weights = Vec::with_capacity(n * n);
    for (&s, &ws) in x.iter().zip(&w) {
        for (&t, &wt) in x.iter().zip(&w) {
            points.push([s, (1.0 - s) * t]);
            weights.push(ws * wt * (1.0 - s));
        }
    }
    QuadratureRule { points, weights, degree }
}

/// Positive-weight rule exact for polynomials of total degree ≤ `degree`.
pub fn triangle_rule(degree: usize) -> Result<QuadratureRule> {
    let rule = match degree {
        1 => QuadratureRule { points: vec![[1.0 / 3.0, 1.0 / 3.0]], weights: vec![0.5], degree: 1 },
        2 => QuadratureRule::from_orbits(2, None, &[(1.0 / 6.0, 1.0 / 3.0)]),
        3 | 4 => QuadratureRule::from_orbits(
            4,
            None,
            &[
                (0.445_948_490_915_964_886_32, 0.223_381_589_678_011_465_70),
                (0.091_576_213_509_770_743_46, 0.109_951_743_655_321_867_64),
            ],
        ),
        5 => {
            let s = 15f64.sqrt();
            QuadratureRule::from_orbits(
                5,
                Some(9.0 / 40.0),
                &[((6.0 - s) / 21.0, (155.0 - s) / 1200.0), ((6.0 + s) / 21.0, (155.0 + s) / 1200.0)],
            )
        }
        6..=MAX_DEGREE => collapsed(degree),
        _ => return Err(Error::Config(format!("quadrature degree {degree} outside 1..={MAX_DEGREE}"))),
    };
    Ok(rule)
}

/// ∑_T ∑_q w_q μ_h f(q) over the parametric surface.
pub fn integrate_surface<F>(geom: &ParametricGeometry, rule: &QuadratureRule, integrand: F) -> Result<f64>
where
    F: Fn(&GeometryData) -> f64 + Sync,
{
    let tabs: Vec<_> = rule.points.iter().map(|&xi| geom.tabulate(xi)).collect();
    let per_element = (0..geom.num_elements())
        .into_par_iter()
        .map(|t| {
            let mut s = 0.0;
            for (q, &xi) in rule.points.iter().enumerate() {
                let d = geom.data_with(t, xi, &tabs[q])?;
                s += rule.weights[q] * d.mu * integrand(&d);
            }
            Ok(s)
        })
        .collect::<Result<Vec<f64>>>()?;
    Ok(per_element.iter().sum())
}

/// Exact ∫ ξ₁^a ξ₂^b over the reference triangle: a! b! / (a + b + 2)!.
pub fn monomial_integral(a: usize, b: usize) -> f64 {
    let fact = |n: usize| (1..=n).map(|k| k as f64).product::<f64>();
    fact(a) * fact(b) / fact(a + b + 2)
}
