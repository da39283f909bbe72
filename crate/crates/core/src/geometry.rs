//! Grids and quadrature.
//!
//! Two discretizations of ℝ⁴ (and, for static functionals, ℝ^d):
//!
//! - **Radial**: a uniform cell-centered grid `r_i = (i + 1/2) h` on
//!   `(0, r_max]`, carrying the measure `ω_{d-1} r^{d-1} dr` where `ω_{d-1}`
//!   is the area of the unit (d−1)-sphere. Cell-centering avoids a node at
//!   the coordinate singularity and makes the midpoint rule superconvergent
//!   for smooth decaying radial integrands (all odd Euler–Maclaurin boundary
//!   terms vanish by even symmetry).
//! - **Cartesian4**: a uniform cell-centered 4d box `[-L, L]^4` with spacing
//!   `h = 2L/n` per axis, node coordinates `-L + (k + 1/2) h`, and weight
//!   `h⁴`. Used where translations and the non-radial symmetry modes matter.

use crate::error::{Error, Result};

/// A discretization of ℝ^d. Copyable value type; every [`crate::Field`]
/// carries one and operations check compatibility.
#[derive(Clone, Copy, Debug, PartialEq)]
pub enum Geometry {
    /// Uniform cell-centered radial grid.
    Radial { r_max: f64, n: usize, dim: usize },
    /// Uniform cell-centered box in ℝ⁴.
    Cartesian4 { half_extent: f64, n_axis: usize },
}

impl Geometry {
    /// Radial grid in dimension 4.
    pub fn radial(r_max: f64, n: usize) -> Result<Self> {
        Self::radial_d(r_max, n, 4)
    }

    /// Radial grid in dimension `dim ≥ 3` (static functionals only; the
    /// time-dependent operations require `dim == 4`).
    pub fn radial_d(r_max: f64, n: usize, dim: usize) -> Result<Self> {
        if !(r_max > 0.0) || n < 16 {
            return Err(Error::Config(format!(
                "radial grid needs r_max > 0 and n >= 16, got r_max={r_max}, n={n}"
            )));
        }
        if dim < 3 {
            return Err(Error::Config(format!(
                "radial grid needs dim >= 3, got {dim}"
            )));
        }
        Ok(Geometry::Radial { r_max, n, dim })
    }

    /// 4d box `[-L, L]^4` with `n_axis` nodes per axis.
    pub fn cartesian4(half_extent: f64, n_axis: usize) -> Result<Self> {
        if !(half_extent > 0.0) || n_axis < 16 {
            return Err(Error::Config(format!(
                "box grid needs half_extent > 0 and n_axis >= 16, got {half_extent}, {n_axis}"
            )));
        }
        Ok(Geometry::Cartesian4 {
            half_extent,
            n_axis,
        })
    }

    /// Total number of degrees of freedom.
    pub fn len(&self) -> usize {
        match *self {
            Geometry::Radial { n, .. } => n,
            Geometry::Cartesian4 { n_axis, .. } => n_axis.pow(4),
        }
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    /// Mesh spacing (radial: Δr; box: per-axis Δx).
    pub fn spacing(&self) -> f64 {
        match *self {
            Geometry::Radial { r_max, n, .. } => r_max / n as f64,
            Geometry::Cartesian4 {
                half_extent,
                n_axis,
            } => 2.0 * half_extent / n_axis as f64,
        }
    }

    /// Ambient dimension.
    pub fn dim(&self) -> usize {
        match *self {
            Geometry::Radial { dim, .. } => dim,
            Geometry::Cartesian4 { .. } => 4,
        }
    }

    pub fn is_radial(&self) -> bool {
        matches!(self, Geometry::Radial { .. })
    }

    /// Radius of the i-th radial node.
    pub fn r(&self, i: usize) -> f64 {
        (i as f64 + 0.5) * self.spacing()
    }

    /// Quadrature weight of node `i` (radial: `ω_{d-1} r_i^{d-1} h`;
    /// box: `h⁴`).
    pub fn weight(&self, i: usize) -> f64 {
        match *self {
            Geometry::Radial { dim, .. } => {
                let h = self.spacing();
                sphere_area(dim) * self.r(i).powi(dim as i32 - 1) * h
            }
            Geometry::Cartesian4 { .. } => self.spacing().powi(4),
        }
    }

    /// Coordinate of box node `k` along one axis.
    pub fn axis_node(&self, k: usize) -> f64 {
        match *self {
            Geometry::Cartesian4 { half_extent, .. } => {
                -half_extent + (k as f64 + 0.5) * self.spacing()
            }
            Geometry::Radial { .. } => panic!("axis_node on a radial grid"),
        }
    }

    /// Flat index of box node `(i0, i1, i2, i3)` (axis 0 fastest).
    pub fn flat(&self, idx: [usize; 4]) -> usize {
        let n = match *self {
            Geometry::Cartesian4 { n_axis, .. } => n_axis,
            Geometry::Radial { .. } => panic!("flat index on a radial grid"),
        };
        idx[0] + n * (idx[1] + n * (idx[2] + n * idx[3]))
    }

    /// Coordinates of the box node with flat index `p`.
    pub fn coords(&self, p: usize) -> [f64; 4] {
        let n = match *self {
            Geometry::Cartesian4 { n_axis, .. } => n_axis,
            Geometry::Radial { .. } => panic!("coords on a radial grid"),
        };
        let i0 = p % n;
        let i1 = (p / n) % n;
        let i2 = (p / (n * n)) % n;
        let i3 = p / (n * n * n);
        [
            self.axis_node(i0),
            self.axis_node(i1),
            self.axis_node(i2),
            self.axis_node(i3),
        ]
    }

    /// Error unless `self` and `other` are the same grid.
    pub fn expect_same(&self, other: &Geometry) -> Result<()> {
        if self == other {
            Ok(())
        } else {
            Err(Error::GeometryMismatch(format!("{self:?} vs {other:?}")))
        }
    }

    /// Error unless the geometry is radial; returns `(r_max, n, dim)`.
    pub fn expect_radial(&self, op: &'static str) -> Result<(f64, usize, usize)> {
        match *self {
            Geometry::Radial { r_max, n, dim } => Ok((r_max, n, dim)),
            Geometry::Cartesian4 { .. } => Err(Error::WrongGeometryKind { op }),
        }
    }

    /// Error unless `dim == 4`.
    pub fn expect_dim4(&self, op: &'static str) -> Result<()> {
        if self.dim() == 4 {
            Ok(())
        } else {
            Err(Error::DimensionUnsupported {
                op,
                dim: self.dim(),
            })
        }
    }
}

/// Area of the unit (d−1)-sphere in ℝ^d: `2 π^{d/2} / Γ(d/2)`.
///
/// For d = 4 this is `2π²`.
pub fn sphere_area(d: usize) -> f64 {
    use std::f64::consts::PI;
    if d % 2 == 0 {
        // Γ(d/2) = (d/2 - 1)!
        let k = d / 2;
        let mut gamma = 1.0;
        for j in 2..k {
            gamma *= j as f64;
        }
        2.0 * PI.powi(k as i32) / gamma
    } else {
        // Γ(k + 1/2) = (2k)! √π / (4^k k!)
        let k = (d - 1) / 2;
        let mut gamma = PI.sqrt();
        for j in 0..k {
            gamma *= j as f64 + 0.5;
        }
        2.0 * PI.powi(k as i32) * PI.sqrt() / gamma
    }
}
