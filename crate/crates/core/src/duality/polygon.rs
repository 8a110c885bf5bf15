//! Convex polygons in the plane: polarity, gauge, area and volume product.

use serde::Serialize;

use crate::error::{Error, Result};

/// A strictly convex polygon with counterclockwise vertices.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ConvexPolygon {
    vertices: Vec<[f64; 2]>,
    // Edge duals, present when the origin is strictly inside.
    #[serde(skip)]
    duals: Option<Vec<[f64; 2]>>,
}

fn cross(o: [f64; 2], a: [f64; 2], b: [f64; 2]) -> f64 {
    (a[0] - o[0]) * (b[1] - o[1]) - (a[1] - o[1]) * (b[0] - o[0])
}

impl ConvexPolygon {
    /// Validates strict convexity: every turn `(v[i-1], v[i], v[i+1])` must be
    /// counterclockwise with cross product above `1e-12 * scale^2`.
    pub fn new(vertices: Vec<[f64; 2]>) -> Result<Self> {
        let n = vertices.len();
        if n < 3 {
            return Err(Error::InvalidParameter(format!("a polygon needs at least 3 vertices, got {n}")));
        }
        if vertices.iter().flatten().any(|c| !c.is_finite()) {
            return Err(Error::InvalidParameter("non-finite vertex coordinate".into()));
        }
        let scale = vertices.iter().flatten().fold(0.0f64, |m, c| m.max(c.abs())).max(f64::MIN_POSITIVE);
        let tol = 1e-12 * scale * scale;
        for i in 0..n {
            let prev = vertices[(i + n - 1) % n];
            let next = vertices[(i + 1) % n];
            if cross(prev, vertices[i], next) <= tol {
                return Err(Error::NotConvex(i));
            }
        }
        // Total turning of 2*pi rules out star-shaped windings.
        let mut winding = 0.0;
        for i in 0..n {
            let a = vertices[i];
            let b = vertices[(i + 1) % n];
            let c = vertices[(i + 2) % n];
            let e1 = (b[0] - a[0], b[1] - a[1]);
            let e2 = (c[0] - b[0], c[1] - b[1]);
            winding += (e1.0 * e2.1 - e1.1 * e2.0).atan2(e1.0 * e2.0 + e1.1 * e2.1);
        }
        if (winding - std::f64::consts::TAU).abs() > 1e-6 {
            return Err(Error::NotConvex(0));
        }
        let mut poly = Self { vertices, duals: None };
        if poly.contains_origin_strictly() {
            poly.duals = Some(poly.edge_duals());
        }
        Ok(poly)
    }

    /// Regular `m`-gon with the given circumradius; first vertex at angle `phase`.
    pub fn regular(m: usize, circumradius: f64, phase: f64) -> Result<Self> {
        if m < 3 || circumradius <= 0.0 {
            return Err(Error::InvalidParameter(format!("regular polygon needs m >= 3 and radius > 0, got m={m}, r={circumradius}")));
        }
        let vertices = (0..m)
            .map(|k| {
                let a = phase + std::f64::consts::TAU * k as f64 / m as f64;
                [circumradius * a.cos(), circumradius * a.sin()]
            })
            .collect();
        Self::new(vertices)
    }

    /// Axis-aligned rectangle `[-w, w] x [-h, h]`.
    pub fn rectangle(w: f64, h: f64) -> Result<Self> {
        Self::new(vec![[-w, -h], [w, -h], [w, h], [-w, h]])
    }

    pub fn square() -> Self {
        Self::rectangle(1.0, 1.0).expect("unit square is convex")
    }

    pub fn vertices(&self) -> &[[f64; 2]] {
        &self.vertices
    }

    /// Shoelace area.
    pub fn area(&self) -> f64 {
        let n = self.vertices.len();
        let twice: f64 = (0..n)
            .map(|i| {
                let a = self.vertices[i];
                let b = self.vertices[(i + 1) % n];
                a[0] * b[1] - a[1] * b[0]
            })
            .sum();
        0.5 * twice
    }

    pub fn contains_origin_strictly(&self) -> bool {
        let n = self.vertices.len();
        (0..n).all(|i| cross(self.vertices[i], self.vertices[(i + 1) % n], [0.0, 0.0]) > 0.0)
    }

    fn require_origin(&self) -> Result<()> {
        if self.contains_origin_strictly() {
            Ok(())
        } else {
            Err(Error::OriginOutside)
        }
    }

    /// For each edge `v[i] -> v[i+1]`, the point `w` with `w . v[i] = w . v[i+1] = 1`.
    /// These are the vertices of the polar body, in counterclockwise order.
    fn edge_duals(&self) -> Vec<[f64; 2]> {
        let n = self.vertices.len();
        (0..n)
            .map(|i| {
                let a = self.vertices[i];
                let b = self.vertices[(i + 1) % n];
                let det = a[0] * b[1] - a[1] * b[0];
                [(b[1] - a[1]) / det, (a[0] - b[0]) / det]
            })
            .collect()
    }

    /// `P° = { y : v . y <= 1 for every vertex v }`. Consecutive vertex
    /// half-planes of `P` meet at the polar vertex dual to the shared edge.
    pub fn polar(&self) -> Result<ConvexPolygon> {
        self.require_origin()?;
        // Polar vertex i is dual to edge (i, i+1); it lies on the boundary lines
        // v_i . y = 1 and v_{i+1} . y = 1.
        ConvexPolygon::new(self.edge_duals())
    }

    pub fn volume_product(&self) -> Result<f64> {
        Ok(self.area() * self.polar()?.area())
    }

    /// Minkowski gauge `inf { r > 0 : x in rP }`. The ray from the origin
    /// through `x` leaves `P` through the edge whose dual `w` maximizes `w . x`.
    pub fn gauge(&self, x: [f64; 2]) -> Result<f64> {
        self.require_origin()?;
        Ok(self.gauge_unchecked(x))
    }

    pub(crate) fn gauge_unchecked(&self, x: [f64; 2]) -> f64 {
        self.edge_duals_cached()
            .iter()
            .map(|w| w[0] * x[0] + w[1] * x[1])
            .fold(f64::NEG_INFINITY, f64::max)
    }

    /// Dual of the exiting edge for `x` (smallest index on ties).
    pub(crate) fn gauge_face(&self, x: [f64; 2]) -> [f64; 2] {
        let duals = self.edge_duals_cached();
        let mut best = 0;
        let mut best_v = f64::NEG_INFINITY;
        for (i, w) in duals.iter().enumerate() {
            let v = w[0] * x[0] + w[1] * x[1];
            if v > best_v {
                best_v = v;
                best = i;
            }
        }
        duals[best]
    }

    fn edge_duals_cached(&self) -> &[[f64; 2]] {
        self.duals.as_deref().expect("gauge requires the origin strictly inside")
    }

    /// Support function `max_v v . y`.
    pub fn support(&self, y: [f64; 2]) -> f64 {
        self.vertices.iter().map(|v| v[0] * y[0] + v[1] * y[1]).fold(f64::NEG_INFINITY, f64::max)
    }

    pub fn is_origin_symmetric(&self, tol: f64) -> bool {
        self.vertices
            .iter()
            .all(|v| self.vertices.iter().any(|w| (v[0] + w[0]).abs() <= tol && (v[1] + w[1]).abs() <= tol))
    }

    /// Image under the linear map `[[a, b], [c, d]]` (determinant must be positive).
    pub fn transform(&self, m: [[f64; 2]; 2]) -> Result<ConvexPolygon> {
        let det = m[0][0] * m[1][1] - m[0][1] * m[1][0];
        if det <= 0.0 {
            return Err(Error::InvalidParameter(format!("linear map must preserve orientation, det = {det}")));
        }
        ConvexPolygon::new(
            self.vertices
                .iter()
                .map(|v| [m[0][0] * v[0] + m[0][1] * v[1], m[1][0] * v[0] + m[1][1] * v[1]])
                .collect(),
        )
    }

    /// Polar angles of the vertices, in `[0, 2pi)`.
    pub fn vertex_angles(&self) -> Vec<f64> {
        self.vertices
            .iter()
            .map(|v| v[1].atan2(v[0]).rem_euclid(std::f64::consts::TAU))
            .collect()
    }

    /// Same vertex set up to cyclic relabeling, coordinates within `tol`.
    pub fn approx_eq_cyclic(&self, other: &ConvexPolygon, tol: f64) -> bool {
        let n = self.vertices.len();
        if n != other.vertices.len() {
            return false;
        }
        (0..n).any(|shift| {
            (0..n).all(|i| {
                let a = self.vertices[i];
                let b = other.vertices[(i + shift) % n];
                (a[0] - b[0]).abs() <= tol && (a[1] - b[1]).abs() <= tol
            })
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::f64::consts::PI;

    #[test]
    fn square_polar_is_cross_polytope() {
        let p = ConvexPolygon::square().polar().unwrap();
        let cross = ConvexPolygon::new(vec![[0.0, -1.0], [1.0, 0.0], [0.0, 1.0], [-1.0, 0.0]]).unwrap();
        assert!(p.approx_eq_cyclic(&cross, 1e-14));
        assert_eq!(ConvexPolygon::square().area(), 4.0);
        assert_eq!(p.area(), 2.0);
        assert_eq!(ConvexPolygon::square().volume_product().unwrap(), 8.0);
    }

    #[test]
    fn rejects_bad_polygons() {
        // clockwise
        assert!(ConvexPolygon::new(vec![[0.0, 0.0], [0.0, 1.0], [1.0, 0.0]]).is_err());
        // collinear
        assert!(ConvexPolygon::new(vec![[-1.0, -1.0], [0.0, -1.0], [1.0, -1.0], [0.0, 1.0]]).is_err());
        // origin outside
        let t = ConvexPolygon::new(vec![[1.0, 1.0], [2.0, 1.0], [1.0, 2.0]]).unwrap();
        assert_eq!(t.polar(), Err(Error::OriginOutside));
        assert_eq!(t.gauge([1.0, 0.0]), Err(Error::OriginOutside));
    }

    #[test]
    fn regular_polar_radius() {
        for m in [3usize, 5, 8] {
            let p = ConvexPolygon::regular(m, 1.0, 0.0).unwrap();
            let q = p.polar().unwrap();
            let expected = ConvexPolygon::regular(m, 1.0 / (PI / m as f64).cos(), PI / m as f64).unwrap();
            assert!(q.approx_eq_cyclic(&expected, 1e-12), "m = {m}");
        }
    }

    #[test]
    fn gauge_of_square() {
        let sq = ConvexPolygon::square();
        assert_eq!(sq.gauge([0.5, 0.25]).unwrap(), 0.5);
        assert_eq!(sq.gauge([-0.2, 0.7]).unwrap(), 0.7);
        assert_eq!(sq.gauge([0.0, 0.0]).unwrap(), 0.0);
    }

    #[test]
    fn polar_area_shrinks_as_body_grows() {
        let small = ConvexPolygon::regular(7, 1.0, 0.1).unwrap();
        let big = ConvexPolygon::regular(7, 1.5, 0.1).unwrap();
        assert!(big.polar().unwrap().area() < small.polar().unwrap().area());
    }
}
