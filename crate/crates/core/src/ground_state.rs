//! The explicit ground-state profile, its exact constants, the energy
//! distance functionals, and the zero-direction family.
//!
//! In dimension d the static profile is
//! `W(x) = (1 + |x|² / (d(d-2)))^{-(d-2)/2}`,
//! which solves `ΔW + W^{(d+2)/(d-2)} = 0` and saturates the sharp Sobolev
//! embedding. At d = 4 everything needed has closed form:
//! `‖W‖²_{Ḣ¹} = ‖W‖⁴_{L⁴} = 32π²/3`, `E(W) = 8π²/3`, `∫W⁶ = 16π²/5`.

use std::f64::consts::PI;

use crate::error::{Error, Result};
use crate::field::Field;
use crate::functionals::{energy, h1_sq, l6_sextic, lp_norm};
use crate::geometry::Geometry;
use crate::C64;

/// `‖W‖²_{Ḣ¹} = ‖W‖⁴_{L⁴} = 32π²/3` at d = 4.
pub const H1_SQ_EXACT: f64 = 32.0 * PI * PI / 3.0;

/// `E(W) = 8π²/3` at d = 4.
pub const ENERGY_EXACT: f64 = 8.0 * PI * PI / 3.0;

/// `∫ W⁶ = 16π²/5` at d = 4.
pub const INT_W6_EXACT: f64 = 16.0 * PI * PI / 5.0;

/// Sharp Sobolev constant `C₄ = ‖W‖_{L⁴} / ‖W‖_{Ḣ¹} = (32π²/3)^{-1/4}`
/// at d = 4 (computed, since `powf` is not const).
pub fn sharp_const_exact() -> f64 {
    H1_SQ_EXACT.powf(-0.25)
}

/// `W(r)` in dimension `d`.
pub fn w_value(r: f64, d: usize) -> f64 {
    let dd = d as f64;
    (1.0 + r * r / (dd * (dd - 2.0))).powf(-(dd - 2.0) / 2.0)
}

/// `W'(r)` in dimension `d`.
pub fn w_deriv(r: f64, d: usize) -> f64 {
    let dd = d as f64;
    let q = 1.0 + r * r / (dd * (dd - 2.0));
    -(r / dd) * q.powf(-dd / 2.0)
}

/// `W₁(r) = W + r W'` (the scaling direction at d = 4).
pub fn w1_value(r: f64, d: usize) -> f64 {
    w_value(r, d) + r * w_deriv(r, d)
}

/// The profile sampled on a grid (radial: any `d ≥ 3`; box: `d = 4`).
pub fn w_field(geom: &Geometry) -> Field {
    match *geom {
        Geometry::Radial { dim, .. } => Field::from_radial_fn(*geom, |r| w_value(r, dim)),
        Geometry::Cartesian4 { .. } => Field::from_cart_fn(*geom, |x| {
            let r = (x[0] * x[0] + x[1] * x[1] + x[2] * x[2] + x[3] * x[3]).sqrt();
            C64::new(w_value(r, 4), 0.0)
        }),
    }
}

/// The scaling direction `W₁ = W + x·∇W` sampled on a grid.
pub fn w1_field(geom: &Geometry) -> Field {
    match *geom {
        Geometry::Radial { dim, .. } => Field::from_radial_fn(*geom, |r| w1_value(r, dim)),
        Geometry::Cartesian4 { .. } => Field::from_cart_fn(*geom, |x| {
            let r = (x[0] * x[0] + x[1] * x[1] + x[2] * x[2] + x[3] * x[3]).sqrt();
            C64::new(w1_value(r, 4), 0.0)
        }),
    }
}

/// The translation directions `∂_j W = -(x_j/4) W²` (box grids only).
pub fn dw_fields(geom: &Geometry) -> Result<Vec<Field>> {
    match *geom {
        Geometry::Radial { .. } => Err(Error::WrongGeometryKind { op: "dw_fields" }),
        Geometry::Cartesian4 { .. } => Ok((0..4)
            .map(|j| {
                Field::from_cart_fn(*geom, |x| {
                    let r2 = x[0] * x[0] + x[1] * x[1] + x[2] * x[2] + x[3] * x[3];
                    let w = (1.0 + r2 / 8.0).powi(-1);
                    C64::new(-(x[j] / 4.0) * w * w, 0.0)
                })
            })
            .collect()),
    }
}

/// The family of directions along which the linearized flow is neutral:
/// `{iW, W₁}` on radial grids, `{iW, W₁, ∂₁W..∂₄W}` on box grids (phase,
/// scaling, translations).
pub fn zero_direction_family(geom: &Geometry) -> Vec<Field> {
    let mut fam = vec![w_field(geom).times_i(), w1_field(geom)];
    if !geom.is_radial() {
        fam.extend(dw_fields(geom).expect("box grid"));
    }
    fam
}

/// The profile with its derived fields and grid-quadrature scalars.
#[derive(Debug, Clone)]
pub struct GroundStateData {
    pub w: Field,
    pub w1: Field,
    /// Translation directions; empty on radial grids.
    pub dw: Vec<Field>,
    /// `‖W‖²_{Ḣ¹}` by this grid's quadrature.
    pub h1_sq: f64,
    /// `‖W‖_{L^{2d/(d-2)}}^{2d/(d-2)}` by this grid's quadrature.
    pub lcrit_int: f64,
    /// `E(W)` by this grid's quadrature (d = 4 energy).
    pub energy: f64,
    /// Sharp Sobolev constant for this dimension (exact at d = 4, else the
    /// grid-quadrature ratio for the sampled profile).
    pub sharp_const: f64,
    /// `∫ W⁶` by this grid's quadrature.
    pub int_w6: f64,
}

impl GroundStateData {
    /// `‖W‖²_{Ḣ¹} - ‖W‖_{L^{2*}}^{2*}`: zero in the continuum.
    pub fn pohozaev_defect(&self) -> f64 {
        self.h1_sq - self.lcrit_int
    }
}

/// Sample the profile on `geom` and audit it: if the grid cannot represent
/// its Dirichlet energy and critical-norm mass consistently to `10⁻⁶`
/// relative, the grid is declared too small/coarse for ground-state work.
pub fn ground_state(geom: &Geometry) -> Result<GroundStateData> {
    let d = geom.dim();
    let w = w_field(geom);
    let w1 = w1_field(geom);
    let dw = if geom.is_radial() {
        Vec::new()
    } else {
        dw_fields(geom)?
    };
    let h1 = h1_sq(&w);
    let p_crit = 2.0 * d as f64 / (d as f64 - 2.0);
    let lcrit_int = lp_norm(&w, p_crit)?.powf(p_crit);
    let en = energy(&w);
    let int_w6 = l6_sextic(&w);
    let sharp_const = if d == 4 {
        sharp_const_exact()
    } else {
        lp_norm(&w, p_crit)? / h1.sqrt()
    };
    let defect = (h1 - lcrit_int).abs() / h1;
    if geom.is_radial() && defect > 1e-6 {
        return Err(Error::ResolutionLoss(format!(
            "grid holds the ground state to {defect:.2e} relative (need 1e-6): \
             enlarge r_max or refine"
        )));
    }
    Ok(GroundStateData {
        w,
        w1,
        dw,
        h1_sq: h1,
        lcrit_int,
        energy: en,
        sharp_const,
        int_w6,
    })
}

/// Signed energy-class distance `δ(u) = ‖W‖²_{Ḣ¹} - ‖u‖²_{Ḣ¹}` (d = 4).
/// Positive for fields below the ground-state Dirichlet energy.
pub fn delta(u: &Field) -> Result<f64> {
    u.geometry().expect_dim4("delta")?;
    Ok(H1_SQ_EXACT - h1_sq(u))
}

/// Sharp-embedding defect `C_d ‖f‖_{Ḣ¹} - ‖f‖_{L^{2d/(d-2)}}`; nonnegative
/// in the continuum, and ≥ -1e-8 discretely for resolved fields.
pub fn sobolev_defect(f: &Field) -> Result<f64> {
    let d = f.geometry().dim();
    let p_crit = 2.0 * d as f64 / (d as f64 - 2.0);
    let h1n = h1_sq(f).max(0.0).sqrt();
    if h1n == 0.0 {
        return Err(Error::ZeroField("sobolev_defect"));
    }
    let cd = if d == 4 {
        sharp_const_exact()
    } else {
        let wg = ground_state(f.geometry())?;
        wg.sharp_const
    };
    Ok(cd * h1n - lp_norm(f, p_crit)?)
}

/// Energy-trapping report for a field below the ground-state Dirichlet norm.
#[derive(Debug, Clone, Copy)]
pub struct TrappingReport {
    /// `‖f‖²_{Ḣ¹} / ‖W‖²_{Ḣ¹}`.
    pub h1_ratio: f64,
    /// `E(f) / E(W)`.
    pub energy_ratio: f64,
    /// `E(f) / ‖f‖²_{Ḣ¹}` (0 for the zero field).
    pub energy_over_h1: f64,
    /// The published comparison constant C with
    /// `(1/C)‖f‖² ≤ E(f) ≤ C‖f‖²` in the trapped regime.
    pub comparison_constant: f64,
}

/// The trapped-regime comparison constant: from the sharp embedding,
/// `E(f) ≥ ¼‖f‖²_{Ḣ¹}` whenever `‖f‖_{Ḣ¹} ≤ ‖W‖_{Ḣ¹}`, and `E(f) ≤ ½‖f‖²`
/// always, so `C = 4` covers both sides.
pub const TRAPPING_CONSTANT: f64 = 4.0;

/// Check the energy-trapping inequalities for `f` with
/// `‖f‖_{Ḣ¹} ≤ ‖W‖_{Ḣ¹}` and return the measured ratios.
pub fn trapping_check(f: &Field) -> Result<TrappingReport> {
    f.geometry().expect_dim4("trapping_check")?;
    let y = h1_sq(f);
    if y > H1_SQ_EXACT * (1.0 + 1e-8) {
        return Err(Error::OutOfRegime(format!(
            "trapping_check needs ‖f‖²_{{Ḣ¹}} ≤ ‖W‖²_{{Ḣ¹}}: {y:.6} > {H1_SQ_EXACT:.6}"
        )));
    }
    let e = energy(f);
    let report = TrappingReport {
        h1_ratio: y / H1_SQ_EXACT,
        energy_ratio: e / ENERGY_EXACT,
        energy_over_h1: if y > 0.0 { e / y } else { 0.0 },
        comparison_constant: TRAPPING_CONSTANT,
    };
    let slack = 1e-9 * (1.0 + y / H1_SQ_EXACT);
    if report.h1_ratio > report.energy_ratio + slack {
        return Err(Error::DiscretizationFailure(format!(
            "trapping inequality ‖f‖²/‖W‖² ≤ E(f)/E(W) violated: {} > {}",
            report.h1_ratio, report.energy_ratio
        )));
    }
    if y > 0.0
        && (e < y / TRAPPING_CONSTANT - slack * H1_SQ_EXACT
            || e > y * TRAPPING_CONSTANT + slack * H1_SQ_EXACT)
    {
        return Err(Error::DiscretizationFailure(format!(
            "energy comparison (1/C)‖f‖² ≤ E(f) ≤ C‖f‖² violated: E = {e}, ‖f‖² = {y}"
        )));
    }
    Ok(report)
}
