//! Symmetric quadrature rules on triangles.
//!
//! Points are barycentric coordinates; weights sum to one and are scaled by
//! the triangle area at the call site.

use crate::error::{Error, Result};
use crate::mesh::Point;

#[derive(Debug, Clone)]
pub struct TriangleRule {
    pub degree: usize,
    pub points: Vec<[f64; 3]>,
    pub weights: Vec<f64>,
}

impl TriangleRule {
    /// The cheapest rule in the table that integrates polynomials of total
    /// degree `degree` exactly. Degrees 2 through 5 are supported.
    pub fn with_degree(degree: usize) -> Result<TriangleRule> {
        match degree {
            2 => Ok(Self::three_point()),
            3 | 4 => Ok(Self::six_point()),
            5 => Ok(Self::seven_point()),
            d => Err(Error::UnsupportedQuadrature(d)),
        }
    }

    fn three_point() -> TriangleRule {
        let (a, b) = (2.0 / 3.0, 1.0 / 6.0);
        TriangleRule { degree: 2, points: vec![[a, b, b], [b, a, b], [b, b, a]], weights: vec![1.0 / 3.0; 3] }
    }

    fn six_point() -> TriangleRule {
        let a1 = 0.445_948_490_915_964_9;
        let w1 = 0.223_381_589_678_011_47;
        let a2 = 0.091_576_213_509_770_74;
        let w2 = 0.109_951_743_655_321_87;
        let mut points = orbit(a1);
        points.extend(orbit(a2));
        TriangleRule { degree: 4, points, weights: vec![w1, w1, w1, w2, w2, w2] }
    }

    fn seven_point() -> TriangleRule {
        let s = 15f64.sqrt();
        let a = (6.0 - s) / 21.0;
        let b = (6.0 + s) / 21.0;
        let wa = (155.0 - s) / 1200.0;
        let wb = (155.0 + s) / 1200.0;
        let mut points = vec![[1.0 / 3.0; 3]];
        points.extend(orbit(a));
        points.extend(orbit(b));
        TriangleRule { degree: 5, points, weights: vec![9.0 / 40.0, wa, wa, wa, wb, wb, wb] }
    }

    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    /// Physical quadrature points of the triangle `tri`.
    pub fn map(&self, tri: &[Point; 3]) -> Vec<Point> {
        self.points.iter().map(|l| barycentric_to_point(tri, l)).collect()
    }

    /// Integral of `f` over `tri`.
    pub fn integrate(&self, tri: &[Point; 3], mut f: impl FnMut(Point) -> f64) -> f64 {
        let area = triangle_area(tri).abs();
        self.points.iter().zip(&self.weights).map(|(l, w)| w * f(barycentric_to_point(tri, l))).sum::<f64>() * area
    }
}

fn orbit(a: f64) -> Vec<[f64; 3]> {
    let b = 1.0 - 2.0 * a;
    vec![[b, a, a], [a, b, a], [a, a, b]]
}

pub fn barycentric_to_point(tri: &[Point; 3], l: &[f64; 3]) -> Point {
    [
        l[0] * tri[0][0] + l[1] * tri[1][0] + l[2] * tri[2][0],
        l[0] * tri[0][1] + l[1] * tri[1][1] + l[2] * tri[2][1],
    ]
}

/// Signed area, positive for counterclockwise vertices.
pub fn triangle_area(tri: &[Point; 3]) -> f64 {
    let [a, b, c] = tri;
    0.5 * ((b[0] - a[0]) * (c[1] - a[1]) - (c[0] - a[0]) * (b[1] - a[1]))
}
