//! Oracles for the heteroclinic profile recursion, series assembly, and the
//! exponential decay law of the PDE residual.

use critnls_core::functionals::h1_norm;
use critnls_core::geometry::Geometry;
use critnls_core::ground_state::{delta, w_field};
use critnls_core::linearized::{unstable_eigenpair, LinearizedSpectrum};
use critnls_core::orbit::{
    assemble, pde_residual, profile_recursion, residual_decay_slope,
};
use critnls_core::Error;

fn series_grid() -> Geometry {
    Geometry::radial(60.0, 1024).unwrap()
}

fn spectrum() -> LinearizedSpectrum {
    unstable_eigenpair(&series_grid()).unwrap()
}

#[test]
fn zero_branch_is_stationary() {
    let spec = spectrum();
    let series = profile_recursion(0.0, 3, &spec).unwrap();
    for j in 1..=3 {
        assert_eq!(series.profile(j).unwrap().max_abs(), 0.0, "Φ_{j} ≠ 0");
    }
    let u = assemble(&series, 5.0).unwrap();
    let w = w_field(series.geometry());
    assert_eq!(u.sub(&w).unwrap().max_abs(), 0.0);
    // Residual reduces to the static elliptic defect of the profile samples.
    let res = pde_residual(&series, 0.0).unwrap();
    assert!(res < 1e-6, "static residual {res}");
}

#[test]
fn recursion_rejects_zero_order() {
    let spec = spectrum();
    assert!(matches!(
        profile_recursion(1.0, 0, &spec),
        Err(Error::Config(_))
    ));
}

#[test]
fn branch_parameter_scaling_law() {
    // Φ_j(a) = a^j · Φ_j(1): the recursion is homogeneous of degree j.
    let spec = spectrum();
    let base = profile_recursion(1.0, 4, &spec).unwrap();
    for a in [-1.0, 2.0] {
        let other = profile_recursion(a, 4, &spec).unwrap();
        for j in 1..=4 {
            let scaled = base
                .profile(j)
                .unwrap()
                .scale(critnls_core::C64::new(a.powi(j as i32), 0.0));
            let diff = other.profile(j).unwrap().sub(&scaled).unwrap();
            let rel = h1_norm(&diff) / h1_norm(&scaled).max(1e-300);
            assert!(rel < 1e-10, "a = {a}, j = {j}: deviation {rel}");
        }
    }
}

#[test]
fn solve_residuals_and_tails_are_tiny() {
    let spec = spectrum();
    let series = profile_recursion(-1.0, 4, &spec).unwrap();
    assert_eq!(series.solve_residuals().len(), 3);
    for (j, &r) in series.solve_residuals().iter().enumerate() {
        assert!(r < 1e-8, "order {} residual {r}", j + 2);
    }
    for (j, &tf) in series.tail_fractions().iter().enumerate() {
        assert!(tf < 1e-5, "Φ_{} tail fraction {tf}", j + 1);
    }
}

#[test]
fn delta_sign_distinguishes_branches() {
    // The subcritical branch approaches W from below the Dirichlet-energy
    // threshold (δ > 0), the supercritical branch from above (δ < 0).
    let spec = spectrum();
    let minus = profile_recursion(-1.0, 4, &spec).unwrap();
    let plus = profile_recursion(1.0, 4, &spec).unwrap();
    for t in [3.0, 6.0, 10.0] {
        let dm = delta(&assemble(&minus, t).unwrap()).unwrap();
        let dp = delta(&assemble(&plus, t).unwrap()).unwrap();
        assert!(dm > 0.0, "t={t}: subcritical δ = {dm}");
        assert!(dp < 0.0, "t={t}: supercritical δ = {dp}");
    }
}

#[test]
fn delta_decays_monotonically_on_subcritical_branch() {
    let spec = spectrum();
    let series = profile_recursion(-1.0, 4, &spec).unwrap();
    let mut prev = f64::INFINITY;
    for i in 0..12 {
        let t = 4.0 + 0.75 * i as f64;
        let d = delta(&assemble(&series, t).unwrap()).unwrap();
        assert!(d > 0.0 && d < prev, "t={t}: δ={d} after {prev}");
        prev = d;
    }
}

#[test]
fn leading_order_distance_law() {
    // ‖W_k^a(t) − W‖_{Ḣ¹} = |a|e^{-λ₁t} + O(e^{-2λ₁t}).
    let spec = spectrum();
    let series = profile_recursion(-1.0, 4, &spec).unwrap();
    let w = w_field(series.geometry());
    let lam = series.lambda1();
    for t in [6.0, 8.0, 10.0] {
        let dist = h1_norm(&assemble(&series, t).unwrap().sub(&w).unwrap());
        let leading = (-lam * t).exp();
        let correction = (-2.0 * lam * t).exp();
        assert!(
            (dist - leading).abs() < 5.0 * correction,
            "t={t}: distance {dist} vs leading {leading} (allowance {})",
            5.0 * correction
        );
    }
}

#[test]
fn residual_decays_at_the_order_rate() {
    // log‖residual‖ is affine in t with slope −(k+1)λ₁; the ratio between
    // consecutive times matches the same law.
    let spec = spectrum();
    let lam = spec.lambda1;
    for (k, t0, t1) in [(2usize, 1.0, 10.0), (3, 1.0, 8.0), (4, 1.0, 6.0)] {
        let series = profile_recursion(-1.0, k, &spec).unwrap();
        let ts: Vec<f64> = (0..16)
            .map(|i| t0 + (t1 - t0) * i as f64 / 15.0)
            .collect();
        let slope = residual_decay_slope(&series, &ts).unwrap();
        let target = -((k + 1) as f64) * lam;
        let dev = (slope - target).abs() / target.abs();
        assert!(dev < 0.10, "k={k}: slope {slope} vs {target} (dev {dev})");
        // Pointwise ratio over a unit step.
        let r0 = pde_residual(&series, 4.0).unwrap();
        let r1 = pde_residual(&series, 5.0).unwrap();
        let expected = (-((k + 1) as f64) * lam).exp();
        assert!(
            (r1 / r0 - expected).abs() < 0.10 * expected,
            "k={k}: ratio {} vs {expected}",
            r1 / r0
        );
    }
}

#[test]
fn assembly_rejects_out_of_regime_times() {
    let spec = spectrum();
    let series = profile_recursion(1.0, 2, &spec).unwrap();
    // Far in the past the leading term dwarfs the perturbative window.
    assert!(matches!(
        assemble(&series, -9.0),
        Err(Error::OutOfRegime(_))
    ));
    assert!(pde_residual(&series, -9.0).is_err());
}
