//! Grid construction, quadrature, and differential-operator oracles.
//!
//! Expected values are closed forms fixed before the implementations:
//! sphere areas from 2π^{d/2}/Γ(d/2); ∫W⁴ = 32π²/3 and the 4-ball volume
//! π²/2 from Beta-function integrals; Δe^{-r²} = (4r² - 8)e^{-r²} at d = 4.

use std::f64::consts::PI;

use critnls_core::functionals::integrate;
use critnls_core::geometry::{sphere_area, Geometry};
use critnls_core::ground_state::w_value;
use critnls_core::operators::{laplacian, radial_derivative, Closure};
use critnls_core::{Field, C64};

fn audit_grid() -> Geometry {
    Geometry::radial(200.0, 4096).unwrap()
}

#[test]
fn sphere_areas_match_closed_forms() {
    assert!((sphere_area(3) - 4.0 * PI).abs() < 1e-14);
    assert!((sphere_area(4) - 2.0 * PI * PI).abs() < 1e-13);
    assert!((sphere_area(5) - 8.0 * PI * PI / 3.0).abs() < 1e-13);
    assert!((sphere_area(6) - PI.powi(3)).abs() < 1e-13);
}

#[test]
fn geometry_validation_and_spacing() {
    let g = audit_grid();
    assert!((g.spacing() - 200.0 / 4096.0).abs() < 1e-15);
    assert_eq!(g.len(), 4096);
    assert!((g.r(0) - 0.5 * g.spacing()).abs() < 1e-15);

    let b = Geometry::cartesian4(16.0, 32).unwrap();
    assert!((b.spacing() - 1.0).abs() < 1e-15);
    assert_eq!(b.len(), 32usize.pow(4));

    assert!(Geometry::radial(-1.0, 4096).is_err());
    assert!(Geometry::radial(10.0, 4).is_err());
    assert!(Geometry::cartesian4(16.0, 8).is_err());
}

#[test]
fn box_indexing_roundtrip() {
    let b = Geometry::cartesian4(2.0, 16).unwrap();
    for &idx in &[[0usize, 0, 0, 0], [3, 1, 4, 1], [15, 15, 15, 15]] {
        let p = b.flat(idx);
        let x = b.coords(p);
        for a in 0..4 {
            assert!((x[a] - (-2.0 + (idx[a] as f64 + 0.5) * b.spacing())).abs() < 1e-14);
        }
    }
}

#[test]
fn integrate_w4_hits_beta_function_value() {
    let g = audit_grid();
    let w4 = Field::from_radial_fn(g, |r| w_value(r, 4).powi(4));
    let val = integrate(&w4).unwrap().re;
    let exact = 32.0 * PI * PI / 3.0;
    assert!(
        ((val - exact) / exact).abs() < 1e-6,
        "∫W⁴ = {val}, expected {exact}"
    );
}

#[test]
fn integrate_zero_is_zero() {
    let g = audit_grid();
    let z = Field::zeros(g);
    assert_eq!(integrate(&z).unwrap(), C64::new(0.0, 0.0));
}

#[test]
fn integrate_mollified_ball_matches_volume() {
    // Smoothed indicator of the unit ball: 1/(1+exp((r-1)/w)). Expanding the
    // r³ weight across the symmetric layer gives the exact mollification
    // bias 3w²·(π²/6)·2π² = π⁴w² (odd moments cancel); the quadrature itself
    // is far more accurate than that bias.
    let w = 0.02;
    let g = Geometry::radial(40.0, 4096).unwrap();
    let f = Field::from_radial_fn(g, |r| 1.0 / (1.0 + ((r - 1.0) / w).exp()));
    let val = integrate(&f).unwrap().re;
    let exact = PI * PI / 2.0;
    let bias = PI.powi(4) * w * w;
    assert!(
        (val - exact).abs() < 1.1 * bias,
        "mollified ball volume = {val}, expected {exact} ± {bias}"
    );
    assert!(
        (val - (exact + bias)).abs() < 1e-3 * exact,
        "bias-corrected volume {val} vs {}",
        exact + bias
    );
}

#[test]
fn integrate_rejects_non_finite() {
    let g = Geometry::radial(10.0, 64).unwrap();
    let mut f = Field::zeros(g);
    f.as_mut_slice()[3] = C64::new(f64::NAN, 0.0);
    assert!(integrate(&f).is_err());
}

#[test]
fn gaussian_integral_is_pi_squared() {
    // ∫_{ℝ⁴} e^{-|x|²} dx = π².
    let g = Geometry::radial(30.0, 2048).unwrap();
    let f = Field::from_radial_fn(g, |r| (-r * r).exp());
    let val = integrate(&f).unwrap().re;
    assert!(((val - PI * PI) / (PI * PI)).abs() < 1e-10);
}

#[test]
fn laplacian_of_gaussian_matches_analytic() {
    let g = Geometry::radial(20.0, 2048).unwrap();
    let f = Field::from_radial_fn(g, |r| (-r * r).exp());
    let lap = laplacian(&f, Closure::Extrapolate).unwrap();
    // Δ e^{-r²} = (4r² - 2d) e^{-r²} with d = 4; check near the origin and
    // at a generic radius.
    for &i in &[0usize, 1, 100, 700] {
        let r = g.r(i);
        let exact = (4.0 * r * r - 8.0) * (-r * r).exp();
        assert!(
            (lap.as_slice()[i].re - exact).abs() < 1e-9,
            "Δgaussian at r={r}: {} vs {exact}",
            lap.as_slice()[i].re
        );
    }
}

#[test]
fn laplacian_of_quadratic_is_exact() {
    // Δ(r²) = 2d = 8 exactly for any stencil of order ≥ 2; degree-2
    // polynomials are reproduced exactly by the 7-point stencils and the
    // even mirror.
    let g = Geometry::radial(10.0, 128).unwrap();
    let f = Field::from_radial_fn(g, |r| r * r);
    let lap = laplacian(&f, Closure::Extrapolate).unwrap();
    for i in 0..g.len() {
        assert!((lap.as_slice()[i].re - 8.0).abs() < 1e-9);
    }
}

#[test]
fn laplacian_of_constant_vanishes_in_interior() {
    let g = Geometry::radial(10.0, 128).unwrap();
    let f = Field::from_radial_fn(g, |_| 3.5);
    let lap = laplacian(&f, Closure::Extrapolate).unwrap();
    for i in 0..g.len() {
        assert!(
            lap.as_slice()[i].norm() < 1e-10,
            "node {i}: {}",
            lap.as_slice()[i]
        );
    }
}

#[test]
fn elliptic_equation_residual_is_small() {
    // ΔW + W³ = 0: the residual at the audit grid must be < 1e-6 · ‖W³‖_{L²}.
    let g = audit_grid();
    let w = Field::from_radial_fn(g, |r| w_value(r, 4));
    let lap = laplacian(&w, Closure::Extrapolate).unwrap();
    let resid = Field::from_samples(
        g,
        (0..g.len())
            .map(|i| lap.as_slice()[i] + w.as_slice()[i].powi(3))
            .collect(),
    )
    .unwrap();
    let w3 = w.map(|z| z.powi(3));
    let rel = critnls_core::functionals::l2_sq(&resid).sqrt()
        / critnls_core::functionals::l2_sq(&w3).sqrt();
    assert!(rel < 1e-6, "elliptic residual {rel}");
}

#[test]
fn radial_derivative_matches_closed_form() {
    let g = Geometry::radial(20.0, 1024).unwrap();
    let w = Field::from_radial_fn(g, |r| w_value(r, 4));
    let dw = radial_derivative(&w, Closure::Extrapolate).unwrap();
    for &i in &[0usize, 10, 300, 900] {
        let r = g.r(i);
        let exact = critnls_core::ground_state::w_deriv(r, 4);
        assert!(
            (dw.as_slice()[i].re - exact).abs() < 1e-9,
            "W' at r={r}: {} vs {exact}",
            dw.as_slice()[i].re
        );
    }
}

#[test]
fn cartesian_laplacian_is_sixth_order_on_gaussian() {
    // Gaussian derivatives are large, so fix the box and verify the error
    // at the near-origin node shrinks like h⁶ when h halves.
    let err_at = |n_axis: usize| -> f64 {
        let b = Geometry::cartesian4(3.0, n_axis).unwrap();
        let f = Field::from_cart_fn(b, |x| {
            let r2 = x.iter().map(|c| c * c).sum::<f64>();
            C64::new((-r2).exp(), 0.0)
        });
        let lap = laplacian(&f, Closure::Extrapolate).unwrap();
        let idx = b.flat([n_axis / 2, n_axis / 2, n_axis / 2, n_axis / 2]);
        let x = b.coords(idx);
        let r2 = x.iter().map(|c| c * c).sum::<f64>();
        let exact = (4.0 * r2 - 8.0) * (-r2).exp();
        (lap.as_slice()[idx].re - exact).abs()
    };
    let coarse = err_at(24); // h = 0.25
    let fine = err_at(48); // h = 0.125
    assert!(coarse < 1e-2, "coarse error {coarse}");
    assert!(
        fine < coarse / 30.0,
        "expected ~2⁶ error reduction, got {coarse} -> {fine}"
    );
}

#[test]
fn integration_by_parts_discretely() {
    // |∫(Δf)ḡ + ∫∇f·∇ḡ| small for smooth decaying f, g.
    let g = Geometry::radial(30.0, 1024).unwrap();
    let f = Field::from_radial_fn(g, |r| (-r * r).exp());
    let gg = Field::from_radial_fn(g, |r| r * r * (-0.5 * r * r).exp());
    let lap = laplacian(&f, Closure::Extrapolate).unwrap();
    let left = critnls_core::functionals::l2_inner(&lap, &gg).unwrap().re;
    let right = critnls_core::functionals::h1_inner(&f, &gg).unwrap();
    assert!(
        (left + right).abs() < 1e-8,
        "∫(Δf)g = {left}, ∫∇f·∇g = {right}"
    );
}
