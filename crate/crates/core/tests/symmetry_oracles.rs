//! Symmetry-action oracles: exact phase rotation, norm invariance of the
//! scaling action, closed-form transported profiles, and resolution safety.

use critnls_core::functionals::{h1_norm, h1_sq, l4_quartic, lp_norm};
use critnls_core::geometry::Geometry;
use critnls_core::ground_state::{ground_state, w_value, H1_SQ_EXACT};
use critnls_core::symmetry::{apply_symmetry, w_orbit, w_orbit_generators, SymmetryElement};
use critnls_core::C64;

fn grid() -> Geometry {
    Geometry::radial(200.0, 4096).unwrap()
}

#[test]
fn phase_rotation_is_exact() {
    let gs = ground_state(&grid()).unwrap();
    let th = 0.7311;
    let rotated = apply_symmetry(&gs.w, th, 1.0, [0.0; 4]).unwrap();
    let expect = gs.w.scale(C64::new(th.cos(), th.sin()));
    let diff = rotated.sub(&expect).unwrap();
    assert_eq!(diff.max_abs(), 0.0, "pure phase must be bit-exact");
}

#[test]
fn identity_element_is_exact() {
    let gs = ground_state(&grid()).unwrap();
    let id = SymmetryElement::identity();
    assert!(id.is_centered());
    let out = apply_symmetry(&gs.w, id.theta, id.scale, id.center).unwrap();
    assert_eq!(out.sub(&gs.w).unwrap().max_abs(), 0.0);
}

#[test]
fn scaling_preserves_critical_norms() {
    // The action e^{iθ} λ^{-1} f((x-x₀)/λ) is an isometry of Ḣ¹ and L⁴ in 4d.
    let gs = ground_state(&grid()).unwrap();
    let h1_ref = h1_sq(&gs.w);
    let l4_ref = l4_quartic(&gs.w);
    for lam in [0.5, 0.8, 1.25, 2.0] {
        let out = apply_symmetry(&gs.w, 0.3, lam, [0.0; 4]).unwrap();
        let h1 = h1_sq(&out);
        let l4 = l4_quartic(&out);
        assert!(
            ((h1 - h1_ref) / h1_ref).abs() < 1e-4,
            "λ={lam}: h1 rel err {}",
            (h1 - h1_ref) / h1_ref
        );
        assert!(
            ((l4 - l4_ref) / l4_ref).abs() < 1e-4,
            "λ={lam}: l4 rel err {}",
            (l4 - l4_ref) / l4_ref
        );
    }
}

#[test]
fn scaling_matches_closed_form() {
    // Interpolated transport must agree pointwise with sampling the closed
    // form at the transported radius.
    let g = grid();
    let gs = ground_state(&g).unwrap();
    let lam = 1.37;
    let out = apply_symmetry(&gs.w, 0.0, lam, [0.0; 4]).unwrap();
    let mut worst = 0.0f64;
    for i in 0..g.len() {
        let r = g.r(i);
        let exact = w_value(r / lam, 4) / lam;
        worst = worst.max((out.as_slice()[i].re - exact).abs());
    }
    assert!(worst < 1e-6, "worst pointwise transport error {worst}");
}

#[test]
fn group_law_composes() {
    // Scaling by λ then by μ equals scaling by λμ (up to interpolation dust).
    let g = grid();
    let gs = ground_state(&g).unwrap();
    let a = apply_symmetry(&gs.w, 0.2, 1.2, [0.0; 4]).unwrap();
    let ab = apply_symmetry(&a, 0.3, 1.1, [0.0; 4]).unwrap();
    let direct = apply_symmetry(&gs.w, 0.5, 1.32, [0.0; 4]).unwrap();
    let err = ab.sub(&direct).unwrap().max_abs();
    assert!(err < 1e-7, "group-law mismatch {err}");
}

#[test]
fn cartesian_translation_moves_peak() {
    let g = Geometry::cartesian4(12.0, 48).unwrap();
    let gs = ground_state(&g).unwrap();
    let shift = [1.5, -0.75, 0.25, 0.0];
    let out = apply_symmetry(&gs.w, 0.0, 1.0, shift).unwrap();
    // Peak value W(0)=1 should now appear near x = shift.
    let mut best = (0.0f64, [0usize; 4]);
    for i3 in 0..48 {
        for i2 in 0..48 {
            for i1 in 0..48 {
                for i0 in 0..48 {
                    let idx = [i0, i1, i2, i3];
                    let v = out.as_slice()[g.flat(idx)].norm();
                    if v > best.0 {
                        best = (v, idx);
                    }
                }
            }
        }
    }
    let peak = g.coords(g.flat(best.1));
    for j in 0..4 {
        assert!(
            (peak[j] - shift[j]).abs() <= g.spacing() * 1.01,
            "axis {j}: peak {} vs shift {}",
            peak[j],
            shift[j]
        );
    }
    assert!(best.0 > 0.95 && best.0 <= 1.0 + 1e-9);
}

#[test]
fn radial_backend_rejects_off_center() {
    let gs = ground_state(&grid()).unwrap();
    assert!(apply_symmetry(&gs.w, 0.0, 1.0, [1.0, 0.0, 0.0, 0.0]).is_err());
    assert!(apply_symmetry(&gs.w, 0.0, -1.0, [0.0; 4]).is_err());
}

#[test]
fn extreme_scale_flags_resolution_loss() {
    // Concentrating far below grid scale must be refused, not silently wrong.
    let g = Geometry::radial(60.0, 256).unwrap();
    let gs = ground_state(&g).unwrap();
    let err = apply_symmetry(&gs.w, 0.0, 1e-4, [0.0; 4]);
    assert!(err.is_err(), "λ=1e-4 on a 256-point grid must fail loudly");
}

#[test]
fn orbit_generators_radial() {
    let g = grid();
    let gens = w_orbit_generators(&g, SymmetryElement::identity()).unwrap();
    assert_eq!(gens.len(), 2);
    // Phase generator is iW: purely imaginary, Ḣ¹ norm = ‖W‖.
    let phase_gen = &gens[0];
    assert!(phase_gen.as_slice()[3].re == 0.0);
    assert!(((h1_sq(phase_gen) - H1_SQ_EXACT) / H1_SQ_EXACT).abs() < 1e-8);
    // Scaling generator is the real profile W + r W'.
    let scale_gen = &gens[1];
    assert!(scale_gen.as_slice()[3].im == 0.0);
    assert!(scale_gen.as_slice()[0].re > 0.9);
    let far = g.len() - 5;
    assert!(scale_gen.as_slice()[far].re < 0.0, "W₁ is negative far out");
}

#[test]
fn orbit_generators_follow_the_element() {
    // At a transported element the generators are the transported fields.
    let g = grid();
    let elem = SymmetryElement {
        theta: 0.4,
        scale: 1.3,
        center: [0.0; 4],
    };
    let orbit_pt = w_orbit(&g, elem).unwrap();
    let gens = w_orbit_generators(&g, elem).unwrap();
    // d/dθ of e^{iθ}λ^{-1}W(x/λ) is i × (the orbit point itself).
    let diff = gens[0].sub(&orbit_pt.times_i()).unwrap();
    assert!(diff.max_abs() < 1e-12);
    // Scaling generator: finite difference in log λ.
    let eps = 1e-5;
    let plus = w_orbit(
        &g,
        SymmetryElement {
            scale: elem.scale * (1.0 + eps),
            ..elem
        },
    )
    .unwrap();
    let minus = w_orbit(
        &g,
        SymmetryElement {
            scale: elem.scale * (1.0 - eps),
            ..elem
        },
    )
    .unwrap();
    let fd = plus
        .sub(&minus)
        .unwrap()
        .scale(C64::new(-1.0 / (2.0 * eps), 0.0));
    let err = h1_norm(&fd.sub(&gens[1]).unwrap()) / h1_norm(&gens[1]);
    assert!(err < 1e-7, "scaling generator vs finite difference: {err}");
}

#[test]
fn cartesian_orbit_generators_include_translations() {
    let g = Geometry::cartesian4(10.0, 32).unwrap();
    let elem = SymmetryElement {
        theta: 0.1,
        scale: 1.1,
        center: [0.4, -0.2, 0.0, 0.3],
    };
    let gens = w_orbit_generators(&g, elem).unwrap();
    assert_eq!(gens.len(), 6);
    // Translation generators: -(1/λ)[∂_j W] transported. Check against a
    // finite difference of the orbit in the center parameter.
    let eps = 1e-5;
    for j in 0..4 {
        let mut cp = elem.center;
        cp[j] += eps;
        let mut cm = elem.center;
        cm[j] -= eps;
        let plus = w_orbit(&g, SymmetryElement { center: cp, ..elem }).unwrap();
        let minus = w_orbit(&g, SymmetryElement { center: cm, ..elem }).unwrap();
        let fd = plus
            .sub(&minus)
            .unwrap()
            .scale(C64::new(-elem.scale / (2.0 * eps), 0.0));
        let num = lp_norm(&fd.sub(&gens[2 + j]).unwrap(), 2.0).unwrap();
        let den = lp_norm(&gens[2 + j], 2.0).unwrap();
        assert!(num / den < 1e-6, "axis {j}: {}", num / den);
    }
}
