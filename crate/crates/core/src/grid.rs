//! Grid geometries and their metrics.
//!
//! Grids are rectangular arrays of nodes with intrinsic 2d coordinates:
//! `(x, y)` in `[0, 1)^2` on the unit torus, `(theta, phi)` on the round
//! sphere (polar grid staggered off the poles), and chart coordinates on
//! a plane chart centred at the origin. Values are stored row-major with
//! the first coordinate as the row.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum GridGeometry {
    /// Unit-period flat torus, `n x n` nodes at `(i/n, j/n)`.
    Torus2 { n: usize },
    /// Unit-period circle, `n` nodes at `i/n` (no nodal measurement).
    Torus1 { n: usize },
    /// Round unit sphere; nodes at `theta_i = (i + 1/2) pi / n_theta`,
    /// `phi_j = 2 pi j / n_phi`. The grid excludes the poles.
    Sphere { n_theta: usize, n_phi: usize },
    /// Square chart `[-side/2, side/2]^2` with `n` nodes per axis and
    /// spacing `side / (n - 1)`.
    PlaneChart { n: usize, side: f64 },
}

impl GridGeometry {
    pub fn torus2(n: usize) -> Result<Self> {
        if n < 8 {
            return Err(Error::Domain(format!("torus grid needs n >= 8, got {n}")));
        }
        Ok(Self::Torus2 { n })
    }

    pub fn sphere(n_theta: usize, n_phi: usize) -> Result<Self> {
        if n_theta < 8 || n_phi < 8 {
            return Err(Error::Domain(format!(
                "sphere grid needs n_theta, n_phi >= 8, got {n_theta} x {n_phi}"
            )));
        }
        Ok(Self::Sphere { n_theta, n_phi })
    }

    pub fn plane_chart(n: usize, side: f64) -> Result<Self> {
        if n < 8 || side <= 0.0 || side.is_nan() {
            return Err(Error::Domain(format!(
                "plane chart needs n >= 8 and side > 0, got n={n}, side={side}"
            )));
        }
        Ok(Self::PlaneChart { n, side })
    }

    /// (rows, cols) of the node array.
    pub fn node_dims(&self) -> (usize, usize) {
        match *self {
            GridGeometry::Torus2 { n } => (n, n),
            GridGeometry::Torus1 { n } => (1, n),
            GridGeometry::Sphere { n_theta, n_phi } => (n_theta, n_phi),
            GridGeometry::PlaneChart { n, .. } => (n, n),
        }
    }

    pub fn node_count(&self) -> usize {
        let (r, c) = self.node_dims();
        r * c
    }

    /// Whether cell rows / columns wrap around.
    pub fn wraps(&self) -> (bool, bool) {
        match *self {
            GridGeometry::Torus2 { .. } => (true, true),
            GridGeometry::Torus1 { .. } => (false, true),
            GridGeometry::Sphere { .. } => (false, true), // phi wraps
            GridGeometry::PlaneChart { .. } => (false, false),
        }
    }

    /// Intrinsic coordinates of node (row, col). Row/col indices may
    /// equal the node count on wrapping axes, giving the unwrapped
    /// coordinate of the far cell edge.
    pub fn node_coords(&self, row: usize, col: usize) -> [f64; 2] {
        match *self {
            GridGeometry::Torus2 { n } => [row as f64 / n as f64, col as f64 / n as f64],
            GridGeometry::Torus1 { n } => [0.0, col as f64 / n as f64],
            GridGeometry::Sphere { n_theta, n_phi } => [
                (row as f64 + 0.5) * std::f64::consts::PI / n_theta as f64,
                col as f64 * 2.0 * std::f64::consts::PI / n_phi as f64,
            ],
            GridGeometry::PlaneChart { n, side } => {
                let h = side / (n as f64 - 1.0);
                [-side / 2.0 + row as f64 * h, -side / 2.0 + col as f64 * h]
            }
        }
    }

    /// Length of a short segment between intrinsic points within one
    /// cell. On the sphere the phi-extent is weighted by sin(theta) at
    /// the segment midpoint.
    pub fn segment_length(&self, a: [f64; 2], b: [f64; 2]) -> f64 {
        match *self {
            GridGeometry::Sphere { .. } => {
                let mid_theta = 0.5 * (a[0] + b[0]);
                let dt = b[0] - a[0];
                let dp = (b[1] - a[1]) * mid_theta.sin();
                (dt * dt + dp * dp).sqrt()
            }
            _ => {
                let dx = b[0] - a[0];
                let dy = b[1] - a[1];
                (dx * dx + dy * dy).sqrt()
            }
        }
    }

    /// Geodesic distance between intrinsic points.
    pub fn distance(&self, a: [f64; 2], b: [f64; 2]) -> f64 {
        match *self {
            GridGeometry::Torus2 { .. } => {
                let dx = wrapped_diff(a[0], b[0]);
                let dy = wrapped_diff(a[1], b[1]);
                (dx * dx + dy * dy).sqrt()
            }
            GridGeometry::Torus1 { .. } => wrapped_diff(a[1], b[1]),
            GridGeometry::Sphere { .. } => {
                let u = unit_vec(a);
                let v = unit_vec(b);
                let dot = u[0] * v[0] + u[1] * v[1] + u[2] * v[2];
                let cross = [
                    u[1] * v[2] - u[2] * v[1],
                    u[2] * v[0] - u[0] * v[2],
                    u[0] * v[1] - u[1] * v[0],
                ];
                let cn = (cross[0] * cross[0] + cross[1] * cross[1] + cross[2] * cross[2]).sqrt();
                cn.atan2(dot)
            }
            GridGeometry::PlaneChart { .. } => {
                let dx = b[0] - a[0];
                let dy = b[1] - a[1];
                (dx * dx + dy * dy).sqrt()
            }
        }
    }

    /// Representative grid step (the largest cell extent).
    pub fn grid_step(&self) -> f64 {
        match *self {
            GridGeometry::Torus2 { n } => 1.0 / n as f64,
            GridGeometry::Torus1 { n } => 1.0 / n as f64,
            GridGeometry::Sphere { n_theta, n_phi } => {
                (std::f64::consts::PI / n_theta as f64)
                    .max(2.0 * std::f64::consts::PI / n_phi as f64)
            }
            GridGeometry::PlaneChart { n, side } => side / (n as f64 - 1.0),
        }
    }

    /// Total volume (area) of the manifold carrying the grid.
    pub fn volume(&self) -> f64 {
        match *self {
            GridGeometry::Torus2 { .. } => 1.0,
            GridGeometry::Torus1 { .. } => 1.0,
            GridGeometry::Sphere { .. } => 4.0 * std::f64::consts::PI,
            GridGeometry::PlaneChart { n: _, side } => side * side,
        }
    }
}

fn wrapped_diff(a: f64, b: f64) -> f64 {
    let d = (a - b).rem_euclid(1.0);
    d.min(1.0 - d)
}

fn unit_vec(p: [f64; 2]) -> [f64; 3] {
    let (st, ct) = p[0].sin_cos();
    let (sp, cp) = p[1].sin_cos();
    [st * cp, st * sp, ct]
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn torus_distance_wraps() {
        let g = GridGeometry::torus2(16).unwrap();
        let d = g.distance([0.05, 0.0], [0.95, 0.0]);
        assert!((d - 0.1).abs() < 1e-12);
    }

    #[test]
    fn sphere_grid_staggered_off_poles() {
        let g = GridGeometry::sphere(16, 32).unwrap();
        let first = g.node_coords(0, 0)[0];
        let last = g.node_coords(15, 0)[0];
        assert!(first > 0.0 && last < std::f64::consts::PI);
        assert!((first - std::f64::consts::PI / 32.0).abs() < 1e-12);
    }

    #[test]
    fn sphere_antipodal_distance() {
        let g = GridGeometry::sphere(16, 32).unwrap();
        let d = g.distance([0.3, 1.0], [std::f64::consts::PI - 0.3, 1.0 + std::f64::consts::PI]);
        assert!((d - std::f64::consts::PI).abs() < 1e-12);
    }

    #[test]
    fn plane_chart_nodes_span_side() {
        let g = GridGeometry::plane_chart(9, 2.0).unwrap();
        assert_eq!(g.node_coords(0, 0), [-1.0, -1.0]);
        assert_eq!(g.node_coords(8, 8), [1.0, 1.0]);
    }

    #[test]
    fn rejects_tiny_grids() {
        assert!(GridGeometry::torus2(4).is_err());
        assert!(GridGeometry::sphere(4, 64).is_err());
        assert!(GridGeometry::plane_chart(4, 1.0).is_err());
    }
}
