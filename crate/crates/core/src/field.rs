//! Complex fields sampled on a [`Geometry`].

use num_complex::Complex64;

use crate::error::Result;
use crate::geometry::Geometry;
use crate::C64;

/// Complex-valued samples on a grid. The value type of the whole crate:
/// solutions `u(t,·)`, the static bubble, eigenmodes, orbit profiles, and
/// perturbations are all `Field`s.
#[derive(Clone, Debug)]
pub struct Field {
    geom: Geometry,
    data: Vec<C64>,
}

impl Field {
    /// Zero field.
    pub fn zeros(geom: Geometry) -> Self {
        Field {
            geom,
            data: vec![C64::new(0.0, 0.0); geom.len()],
        }
    }

    /// Field from raw samples (length must match the grid).
    pub fn from_samples(geom: Geometry, data: Vec<C64>) -> Result<Self> {
        if data.len() != geom.len() {
            return Err(crate::Error::GeometryMismatch(format!(
                "{} samples on a grid with {} nodes",
                data.len(),
                geom.len()
            )));
        }
        Ok(Field { geom, data })
    }

    /// Sample a real radial profile `r -> f(r)`.
    pub fn from_radial_fn(geom: Geometry, f: impl Fn(f64) -> f64) -> Self {
        let data = (0..geom.len())
            .map(|i| C64::new(f(geom.r(i)), 0.0))
            .collect();
        Field { geom, data }
    }

    /// Sample a complex radial profile.
    pub fn from_radial_fn_complex(geom: Geometry, f: impl Fn(f64) -> C64) -> Self {
        let data = (0..geom.len()).map(|i| f(geom.r(i))).collect();
        Field { geom, data }
    }

    /// Sample a complex function of 4d position on a box grid.
    pub fn from_cart_fn(geom: Geometry, f: impl Fn([f64; 4]) -> C64) -> Self {
        let data = (0..geom.len()).map(|p| f(geom.coords(p))).collect();
        Field { geom, data }
    }

    pub fn geometry(&self) -> &Geometry {
        &self.geom
    }

    pub fn len(&self) -> usize {
        self.data.len()
    }

    pub fn is_empty(&self) -> bool {
        self.data.is_empty()
    }

    pub fn as_slice(&self) -> &[C64] {
        &self.data
    }

    pub fn as_mut_slice(&mut self) -> &mut [C64] {
        &mut self.data
    }

    pub fn into_samples(self) -> Vec<C64> {
        self.data
    }

    /// Pointwise map.
    pub fn map(&self, f: impl Fn(C64) -> C64) -> Field {
        Field {
            geom: self.geom,
            data: self.data.iter().map(|&z| f(z)).collect(),
        }
    }

    /// `self + c * other`.
    pub fn axpy(&self, c: C64, other: &Field) -> Result<Field> {
        self.geom.expect_same(&other.geom)?;
        let data = self
            .data
            .iter()
            .zip(&other.data)
            .map(|(&a, &b)| a + c * b)
            .collect();
        Ok(Field {
            geom: self.geom,
            data,
        })
    }

    /// `self - other`.
    pub fn sub(&self, other: &Field) -> Result<Field> {
        self.axpy(Complex64::new(-1.0, 0.0), other)
    }

    /// `self + other`.
    pub fn add(&self, other: &Field) -> Result<Field> {
        self.axpy(Complex64::new(1.0, 0.0), other)
    }

    /// `c * self`.
    pub fn scale(&self, c: C64) -> Field {
        self.map(|z| c * z)
    }

    /// Complex conjugate (time reversal of the flow).
    pub fn conj(&self) -> Field {
        self.map(|z| z.conj())
    }

    /// Real part, as a field.
    pub fn re_part(&self) -> Field {
        self.map(|z| C64::new(z.re, 0.0))
    }

    /// Imaginary part, as a field.
    pub fn im_part(&self) -> Field {
        self.map(|z| C64::new(z.im, 0.0))
    }

    /// `i * self`.
    pub fn times_i(&self) -> Field {
        self.map(|z| C64::new(-z.im, z.re))
    }

    /// Largest `|f_i|`.
    pub fn max_abs(&self) -> f64 {
        self.data.iter().map(|z| z.norm()).fold(0.0, f64::max)
    }
}
