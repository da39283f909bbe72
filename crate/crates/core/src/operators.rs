//! Discrete differential operators and banded linear algebra.
//!
//! All stencils are sixth-order centered finite differences on cell-centered
//! grids. Radial grids extend evenly across the origin (every radial profile
//! of a smooth field is even in `r`); the outer edge is closed either by
//! polynomial extrapolation (for smooth fields that continue past the box,
//! like slowly decaying profiles) or by zero ghosts (for fields that are
//! treated as members of the decaying Sobolev space).
//!
//! Gradients come in two flavours:
//! * node-centered (`radial_derivative`) — used where pointwise derivative
//!   values are needed (e.g. localized virial integrands);
//! * staggered at cell faces (`staggered_radial` and the line kernel) — used
//!   for all Dirichlet-energy quadratures. A staggered first difference sees
//!   every grid mode (no centered-difference null mode at the Nyquist
//!   frequency), which matters when a quadratic form is *minimized* rather
//!   than merely evaluated.

use num_complex::ComplexFloat;
use num_traits::Zero;

use crate::error::{Error, Result};
use crate::field::Field;
use crate::geometry::Geometry;
use crate::C64;

/// Ghost-zone width on each side of a 1d line (three for 7-point stencils).
pub const HALF: usize = 3;

/// Sixth-order centered first derivative, offsets -3..=3, divided by `h`.
pub const D1_C: [f64; 7] = [
    -1.0 / 60.0,
    9.0 / 60.0,
    -45.0 / 60.0,
    0.0,
    45.0 / 60.0,
    -9.0 / 60.0,
    1.0 / 60.0,
];

/// Sixth-order centered second derivative, offsets -3..=3, divided by `h^2`.
pub const D2_C: [f64; 7] = [
    2.0 / 180.0,
    -27.0 / 180.0,
    270.0 / 180.0,
    -490.0 / 180.0,
    270.0 / 180.0,
    -27.0 / 180.0,
    2.0 / 180.0,
];

/// Sixth-order staggered first derivative at a cell face: coefficients of
/// `f[m+k] - f[m+1-k]` for `k = 1, 2, 3`, divided by `h`.
pub const STAG: [f64; 3] = [75.0 / 64.0, -25.0 / 384.0, 3.0 / 640.0];

/// Degree-six polynomial extrapolation: the next value continuing a sequence,
/// as a combination of the seven previous values (nearest first).
const EXTRAP7: [f64; 7] = [7.0, -21.0, 35.0, -35.0, 21.0, -7.0, 1.0];

/// Outer-edge treatment for field-level operator applications.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Closure {
    /// Continue the field past the edge by degree-six extrapolation.
    /// Appropriate for smooth profiles that do not vanish at the box edge.
    Extrapolate,
    /// Zero ghosts: the field is treated as (numerically) zero outside.
    Dirichlet,
}

/// How a single end of an extended line is filled.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub(crate) enum End {
    /// Even mirror across the boundary (used at the radial origin).
    Mirror,
    /// Zero ghosts.
    Zero,
    /// Degree-six polynomial continuation.
    Extrapolate,
}

impl Closure {
    pub(crate) fn end(self) -> End {
        match self {
            Closure::Extrapolate => End::Extrapolate,
            Closure::Dirichlet => End::Zero,
        }
    }
}

/// Extend a line of samples with `HALF` ghost values on each side.
/// Interior sample `i` lands at `ext[HALF + i]`.
pub(crate) fn extend_line(line: &[C64], lo: End, hi: End) -> Vec<C64> {
    let n = line.len();
    assert!(n >= 7, "line too short for 7-point stencils");
    let mut ext = vec![C64::zero(); n + 2 * HALF];
    ext[HALF..HALF + n].copy_from_slice(line);
    // Upper ghosts first (they only look left, into the interior).
    for g in 0..HALF {
        let at = HALF + n + g;
        ext[at] = match hi {
            End::Zero => C64::zero(),
            End::Mirror => line[n - 1 - g],
            End::Extrapolate => {
                let mut v = C64::zero();
                for (j, c) in EXTRAP7.iter().enumerate() {
                    v += ext[at - 1 - j] * *c;
                }
                v
            }
        };
    }
    // Lower ghosts (looking right).
    for g in 0..HALF {
        let at = HALF - 1 - g;
        ext[at] = match lo {
            End::Zero => C64::zero(),
            End::Mirror => line[g],
            End::Extrapolate => {
                let mut v = C64::zero();
                for (j, c) in EXTRAP7.iter().enumerate() {
                    v += ext[at + 1 + j] * *c;
                }
                v
            }
        };
    }
    ext
}

/// Apply a 7-point stencil centered on interior node `i` of an extended line.
#[inline]
pub(crate) fn stencil7(ext: &[C64], i: usize, c: &[f64; 7]) -> C64 {
    let mut v = C64::zero();
    for (m, cm) in c.iter().enumerate() {
        v += ext[i + m] * *cm;
    }
    v
}

/// Staggered first-derivative values along an extended line. Entry `t`
/// corresponds to the face between interior nodes `p0 + t` and `p0 + t + 1`.
pub(crate) fn staggered_line(ext: &[C64], n_mid: usize, p0: isize, h: f64) -> Vec<C64> {
    let mut out = Vec::with_capacity(n_mid);
    for t in 0..n_mid {
        let b = (HALF as isize + p0 + t as isize) as usize;
        let v = (ext[b + 1] - ext[b]) * STAG[0]
            + (ext[b + 2] - ext[b - 1]) * STAG[1]
            + (ext[b + 3] - ext[b - 2]) * STAG[2];
        out.push(v / h);
    }
    out
}

/// Discrete Laplacian. Radial grids use `f'' + (d-1)/r f'` with an even
/// mirror at the origin; box grids sum per-axis second derivatives with the
/// requested closure at both ends of every line.
pub fn laplacian(f: &Field, closure: Closure) -> Result<Field> {
    match *f.geometry() {
        Geometry::Radial { n, dim, .. } => {
            let h = f.geometry().spacing();
            let ext = extend_line(f.as_slice(), End::Mirror, closure.end());
            let mut out = Vec::with_capacity(n);
            let inv_h2 = 1.0 / (h * h);
            let inv_h = 1.0 / h;
            for i in 0..n {
                let d2 = stencil7(&ext, i, &D2_C) * inv_h2;
                let d1 = stencil7(&ext, i, &D1_C) * inv_h;
                let r = f.geometry().r(i);
                out.push(d2 + d1 * ((dim as f64 - 1.0) / r));
            }
            Field::from_samples(*f.geometry(), out)
        }
        Geometry::Cartesian4 { n_axis, .. } => {
            let h = f.geometry().spacing();
            let inv_h2 = 1.0 / (h * h);
            let mut out = vec![C64::zero(); f.len()];
            let mut line = vec![C64::zero(); n_axis];
            for axis in 0..4 {
                let stride = n_axis.pow(axis as u32);
                for base in cart_line_bases(n_axis, axis) {
                    for k in 0..n_axis {
                        line[k] = f.as_slice()[base + k * stride];
                    }
                    let ext = extend_line(&line, closure.end(), closure.end());
                    for k in 0..n_axis {
                        out[base + k * stride] += stencil7(&ext, k, &D2_C) * inv_h2;
                    }
                }
            }
            Field::from_samples(*f.geometry(), out)
        }
    }
}

/// Banded form of the radial Laplacian `f'' + (d-1)/r f'` with an even
/// mirror at the origin and zero ghosts past the outer edge (Dirichlet).
/// Suitable for decaying fields solved implicitly.
pub(crate) fn radial_laplacian_banded(geom: &Geometry) -> Result<Banded<f64>> {
    let (_, n, dim) = geom.expect_radial("radial_laplacian_banded")?;
    let h = geom.spacing();
    let mut m = Banded::new(n, HALF, HALF);
    for i in 0..n {
        let r = geom.r(i);
        for (k, (&d2, &d1)) in D2_C.iter().zip(D1_C.iter()).enumerate() {
            let c = d2 / (h * h) + (dim as f64 - 1.0) / r * d1 / h;
            let j = i as isize + k as isize - HALF as isize;
            if j >= n as isize {
                continue;
            }
            let jf = if j < 0 { (-1 - j) as usize } else { j as usize };
            m.add(i, jf, c);
        }
    }
    Ok(m)
}

/// Node-centered radial derivative `f'(r_i)` of a radial field.
pub fn radial_derivative(f: &Field, closure: Closure) -> Result<Field> {
    let (_, n, _) = f.geometry().expect_radial("radial_derivative")?;
    let h = f.geometry().spacing();
    let ext = extend_line(f.as_slice(), End::Mirror, closure.end());
    let inv_h = 1.0 / h;
    let out = (0..n).map(|i| stencil7(&ext, i, &D1_C) * inv_h).collect();
    Field::from_samples(*f.geometry(), out)
}

/// Staggered radial derivative: values at the cell faces `r = (p+1) h`,
/// `p = 0..n-1` (the last face sits exactly on the outer edge).
pub fn staggered_radial(f: &Field, closure: Closure) -> Result<Vec<C64>> {
    let (_, n, _) = f.geometry().expect_radial("staggered_radial")?;
    let h = f.geometry().spacing();
    let ext = extend_line(f.as_slice(), End::Mirror, closure.end());
    Ok(staggered_line(&ext, n, 0, h))
}

/// Node-centered first derivatives of a box field along every axis:
/// `out[j]` holds `∂_j f` on the same grid.
pub fn cart_gradient(f: &Field, closure: Closure) -> Result<Vec<Field>> {
    let n_axis = match *f.geometry() {
        Geometry::Cartesian4 { n_axis, .. } => n_axis,
        Geometry::Radial { .. } => {
            return Err(Error::WrongGeometryKind {
                op: "cart_gradient",
            })
        }
    };
    let inv_h = 1.0 / f.geometry().spacing();
    let mut outs = vec![vec![C64::zero(); f.len()]; 4];
    let mut line = vec![C64::zero(); n_axis];
    for (axis, out) in outs.iter_mut().enumerate() {
        let stride = n_axis.pow(axis as u32);
        for base in cart_line_bases(n_axis, axis) {
            for (k, lk) in line.iter_mut().enumerate() {
                *lk = f.as_slice()[base + k * stride];
            }
            let ext = extend_line(&line, closure.end(), closure.end());
            for k in 0..n_axis {
                out[base + k * stride] = stencil7(&ext, k, &D1_C) * inv_h;
            }
        }
    }
    outs.into_iter()
        .map(|v| Field::from_samples(*f.geometry(), v))
        .collect()
}

/// Base indices of all 1d lines along `axis` in an `n^4` box (stride is
/// `n^axis`; the line holds entries `base + k * stride`).
pub(crate) fn cart_line_bases(n: usize, axis: usize) -> Vec<usize> {
    let strides = [1, n, n * n, n * n * n];
    let others: Vec<usize> = (0..4).filter(|&a| a != axis).collect();
    let mut bases = Vec::with_capacity(n * n * n);
    for t in 0..n * n * n {
        let digits = [t % n, (t / n) % n, (t / (n * n)) % n];
        let mut base = 0usize;
        for (d, &ax) in digits.iter().zip(&others) {
            base += d * strides[ax];
        }
        bases.push(base);
    }
    bases
}

/// General band matrix in LAPACK-style storage with room for partial-pivoting
/// fill-in: `2*kl + ku + 1` stored diagonals.
#[derive(Clone, Debug)]
pub struct Banded<T> {
    n: usize,
    kl: usize,
    ku: usize,
    ab: Vec<T>,
}

/// Factored form of a [`Banded`] matrix (LU with partial pivoting).
#[derive(Clone, Debug)]
pub struct BandedLu<T> {
    n: usize,
    kl: usize,
    ku: usize,
    ab: Vec<T>,
    ipiv: Vec<usize>,
}

impl<T: ComplexFloat<Real = f64>> Banded<T> {
    pub fn new(n: usize, kl: usize, ku: usize) -> Self {
        assert!(n > 0 && kl < n && ku < n);
        Banded {
            n,
            kl,
            ku,
            ab: vec![T::zero(); (2 * kl + ku + 1) * n],
        }
    }

    pub fn size(&self) -> usize {
        self.n
    }

    pub fn bandwidths(&self) -> (usize, usize) {
        (self.kl, self.ku)
    }

    #[inline]
    fn slot(&self, i: usize, j: usize) -> usize {
        debug_assert!(i < self.n && j < self.n);
        debug_assert!(
            j + self.kl >= i && i + self.ku + self.kl >= j,
            "outside band"
        );
        (self.kl + self.ku + i - j) * self.n + j
    }

    #[inline]
    pub fn get(&self, i: usize, j: usize) -> T {
        self.ab[self.slot(i, j)]
    }

    #[inline]
    pub fn set(&mut self, i: usize, j: usize, v: T) {
        let s = self.slot(i, j);
        self.ab[s] = v;
    }

    #[inline]
    pub fn add(&mut self, i: usize, j: usize, v: T) {
        let s = self.slot(i, j);
        self.ab[s] = self.ab[s] + v;
    }

    /// `y = A x`. Iterates the declared band only.
    pub fn matvec(&self, x: &[T]) -> Vec<T> {
        assert_eq!(x.len(), self.n);
        let mut y = vec![T::zero(); self.n];
        for i in 0..self.n {
            let lo = i.saturating_sub(self.kl);
            let hi = (i + self.ku).min(self.n - 1);
            let mut s = T::zero();
            for j in lo..=hi {
                s = s + self.get(i, j) * x[j];
            }
            y[i] = s;
        }
        y
    }

    /// Band product `A * B` (bandwidths add).
    pub fn mul(&self, other: &Banded<T>) -> Banded<T> {
        assert_eq!(self.n, other.n);
        let mut c = Banded::new(self.n, self.kl + other.kl, self.ku + other.ku);
        for i in 0..self.n {
            let lo = i.saturating_sub(self.kl);
            let hi = (i + self.ku).min(self.n - 1);
            for k in lo..=hi {
                let a = self.get(i, k);
                if a == T::zero() {
                    continue;
                }
                let blo = k.saturating_sub(other.kl);
                let bhi = (k + other.ku).min(self.n - 1);
                for j in blo..=bhi {
                    let b = other.get(k, j);
                    if b != T::zero() {
                        c.add(i, j, a * b);
                    }
                }
            }
        }
        c
    }

    /// In-place scale and diagonal shift: `A <- alpha A + beta I`.
    pub fn scale_shift(&mut self, alpha: T, beta: T) {
        for v in &mut self.ab {
            *v = alpha * *v;
        }
        for i in 0..self.n {
            let s = self.slot(i, i);
            self.ab[s] = self.ab[s] + beta;
        }
    }

    /// LU factorization with partial pivoting. Fails on an exactly singular
    /// pivot column.
    pub fn factor(mut self) -> Result<BandedLu<T>> {
        let (n, kl, ku) = (self.n, self.kl, self.ku);
        let kv = kl + ku; // upper bandwidth after fill-in
        let mut ipiv = vec![0usize; n];
        for k in 0..n {
            let imax = (k + kl).min(n - 1);
            let mut p = k;
            let mut best = self.get(k, k).abs();
            for i in k + 1..=imax {
                let v = self.get(i, k).abs();
                if v > best {
                    best = v;
                    p = i;
                }
            }
            if !(best > 0.0) || !best.is_finite() {
                return Err(Error::SingularSystem(format!(
                    "banded LU pivot breakdown at column {k} of {n}"
                )));
            }
            ipiv[k] = p;
            if p != k {
                let jmax = (k + kv).min(n - 1);
                for j in k..=jmax {
                    let a = self.get(k, j);
                    let b = self.get(p, j);
                    self.set(k, j, b);
                    self.set(p, j, a);
                }
            }
            let piv = self.get(k, k);
            for i in k + 1..=imax {
                let m = self.get(i, k) / piv;
                self.set(i, k, m);
                if m == T::zero() {
                    continue;
                }
                let jmax = (k + kv).min(n - 1);
                for j in k + 1..=jmax {
                    let v = self.get(i, j) - m * self.get(k, j);
                    self.set(i, j, v);
                }
            }
        }
        Ok(BandedLu {
            n,
            kl,
            ku,
            ab: self.ab,
            ipiv,
        })
    }
}

impl<T: ComplexFloat<Real = f64>> BandedLu<T> {
    #[inline]
    fn get(&self, i: usize, j: usize) -> T {
        self.ab[(self.kl + self.ku + i - j) * self.n + j]
    }

    /// Solve `A x = b` in place.
    pub fn solve_in_place(&self, b: &mut [T]) {
        assert_eq!(b.len(), self.n);
        let (n, kl) = (self.n, self.kl);
        let kv = self.kl + self.ku;
        for k in 0..n {
            let p = self.ipiv[k];
            if p != k {
                b.swap(k, p);
            }
            let imax = (k + kl).min(n - 1);
            let bk = b[k];
            for i in k + 1..=imax {
                b[i] = b[i] - self.get(i, k) * bk;
            }
        }
        for k in (0..n).rev() {
            let jmax = (k + kv).min(n - 1);
            let mut s = b[k];
            for j in k + 1..=jmax {
                s = s - self.get(k, j) * b[j];
            }
            b[k] = s / self.get(k, k);
        }
    }

    pub fn solve(&self, b: &[T]) -> Vec<T> {
        let mut x = b.to_vec();
        self.solve_in_place(&mut x);
        x
    }
}
