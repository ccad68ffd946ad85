use approx::assert_relative_eq;
use bsgrowth::geometry::{hyperbolic_distance, wrap_angle, Arc, BoundaryPoint, Geodesic, Kind, MoebiusTransform, TAU};
use num_complex::Complex64;
use proptest::prelude::*;

fn transform() -> impl Strategy<Value = MoebiusTransform> {
    (0.0..TAU, 0.0..4.0f64, 0.0..TAU).prop_map(|(d, t, r)| {
        MoebiusTransform::translation(d, t).compose(&MoebiusTransform::rotation(r))
    })
}

// Distance from the origin in closed form: 2 artanh |z|.
fn oracle_dist(z: Complex64) -> f64 {
    2.0 * z.norm().atanh()
}

#[test]
fn translations_along_one_axis_add() {
    for (t1, t2) in [(0.3, 0.9), (1.5, 2.25), (4.0, 0.01)] {
        let g = MoebiusTransform::translation(0.0, t1).compose(&MoebiusTransform::translation(0.0, t2));
        assert_relative_eq!(g.dist_origin(), t1 + t2, epsilon = 1e-12);
    }
}

#[test]
fn dist_origin_matches_closed_form() {
    let g = MoebiusTransform::new(Complex64::new(1.3, 0.4), Complex64::new(0.7, -0.5));
    assert_relative_eq!(g.dist_origin(), oracle_dist(g.apply(Complex64::new(0.0, 0.0))), epsilon = 1e-12);
}

#[test]
fn rotation_fixes_origin() {
    let r = MoebiusTransform::rotation(1.1);
    assert!(r.dist_origin().abs() < 1e-15);
    assert_relative_eq!(r.apply_angle(0.5), 1.6, epsilon = 1e-14);
}

#[test]
fn hyperbolic_translation_classifies_with_attracting_point_first() {
    let g = MoebiusTransform::translation(0.7, 1.2);
    let c = g.classify();
    assert_eq!(c.kind, Kind::Hyperbolic);
    assert_relative_eq!(c.fixed_points[0].angle(), 0.7, epsilon = 1e-12);
    assert_relative_eq!(c.fixed_points[1].angle(), wrap_angle(0.7 + std::f64::consts::PI), epsilon = 1e-12);
    assert_eq!(MoebiusTransform::rotation(0.4).classify().kind, Kind::Elliptic);
    assert_eq!(MoebiusTransform::identity().classify().kind, Kind::Identity);
}

#[test]
fn parabolic_is_detected() {
    // Product of two translations with a common endpoint at angle 0.
    let a = MoebiusTransform::translation(0.0, 1.0);
    let c = Geodesic::new(BoundaryPoint::new(0.0), BoundaryPoint::new(2.0));
    // Translation along `c` by a length that makes the product fix 0 with derivative 1 there.
    let u = MoebiusTransform::to_origin(c.foot_from_origin());
    let tc = u.inverse().compose(&MoebiusTransform::translation(u.apply_angle(2.0), 1.0)).compose(&u);
    let g = a.compose(&tc);
    let d = g.boundary_derivative(BoundaryPoint::new(0.0));
    // The derivative at a common fixed point multiplies; e^{-1} e^{1} = 1.
    assert_relative_eq!(d, 1.0, epsilon = 1e-9);
}

#[test]
fn long_products_stay_accurate() {
    let g = MoebiusTransform::translation(0.3, 0.8);
    let h = MoebiusTransform::translation(2.1, 0.6).compose(&MoebiusTransform::rotation(0.2));
    let mut x = MoebiusTransform::identity();
    let mut y = MoebiusTransform::identity();
    for k in 0..120 {
        let s = if k % 3 == 0 { &h } else { &g };
        x = x.compose(s);
        y = s.inverse().compose(&y);
    }
    assert!(x.dist_origin().is_finite());
    assert!(x.dist_origin() > 20.0);
    assert!((x.dist_origin() - y.dist_origin()).abs() < 1e-6 * x.dist_origin());
}

#[test]
fn arcs() {
    let a = Arc::between(6.0, 0.5);
    assert!(a.contains(0.1));
    assert!(a.contains(6.2));
    assert!(!a.contains(3.0));
    assert_relative_eq!(a.len(), 0.5 + TAU - 6.0, epsilon = 1e-14);
    let b = Arc::between(0.2, 1.0);
    let i = a.intersect(&b);
    assert_eq!(i.len(), 1);
    assert_relative_eq!(i[0].start(), 0.2, epsilon = 1e-14);
    assert_relative_eq!(i[0].len(), 0.3, epsilon = 1e-14);
    assert!(a.contains_arc(&Arc::between(6.1, 0.4), 0.0));
}

#[test]
fn geodesic_between_boundary_points_is_orthogonal() {
    let g = Geodesic::new(BoundaryPoint::new(0.4), BoundaryPoint::new(2.9));
    assert!(g.orthogonality_residual() < 1e-12);
    let d = Geodesic::new(BoundaryPoint::new(0.0), BoundaryPoint::new(std::f64::consts::PI));
    assert!(d.is_diameter());
}

proptest! {
    #[test]
    fn inverse_undoes(g in transform(), z in (0.0..0.95f64, 0.0..TAU)) {
        let z = Complex64::from_polar(z.0, z.1);
        let w = g.inverse().apply(g.apply(z));
        prop_assert!((w - z).norm() < 1e-9);
        prop_assert!((g.dist_origin() - g.inverse().dist_origin()).abs() < 1e-9);
    }

    #[test]
    fn triangle_inequality(g in transform(), h in transform()) {
        prop_assert!(g.compose(&h).dist_origin() <= g.dist_origin() + h.dist_origin() + 1e-9);
    }

    #[test]
    fn composition_is_associative(f in transform(), g in transform(), h in transform()) {
        let l = f.compose(&g).compose(&h);
        let r = f.compose(&g.compose(&h));
        prop_assert!(l.approx_eq(&r, 1e-8 * (1.0 + l.a.norm())));
    }

    #[test]
    fn isometry_preserves_distance(g in transform(), z in (0.0..0.9f64, 0.0..TAU), w in (0.0..0.9f64, 0.0..TAU)) {
        let z = Complex64::from_polar(z.0, z.1);
        let w = Complex64::from_polar(w.0, w.1);
        let d0 = hyperbolic_distance(z, w);
        let d1 = hyperbolic_distance(g.apply(z), g.apply(w));
        prop_assert!((d0 - d1).abs() < 1e-7 * (1.0 + d0));
    }

    #[test]
    fn log_derivative_matches_finite_difference(g in transform(), theta in 0.0..TAU) {
        let h = 1e-6;
        let fd = (wrap_angle(g.apply_angle(theta + h) - g.apply_angle(theta - h) + std::f64::consts::PI)
            - std::f64::consts::PI) / (2.0 * h);
        prop_assert!((g.log_derivative_at(theta) - fd.abs().ln()).abs() < 1e-5);
    }

    #[test]
    fn derivative_range_brackets_samples(g in transform(), start in 0.0..TAU, len in 0.01..6.0f64) {
        let arc = Arc::new(start, len);
        let (lo, hi) = g.log_derivative_range(&arc);
        for k in 0..=200 {
            let v = g.log_derivative_at(start + len * k as f64 / 200.0);
            prop_assert!(v >= lo - 1e-9 && v <= hi + 1e-9);
        }
    }

    #[test]
    fn arc_image_matches_endpoint_images(g in transform(), start in 0.0..TAU, len in 0.01..3.0f64) {
        let arc = Arc::new(start, len);
        let img = arc.image(&g);
        prop_assert!((img.start() - g.apply_angle(start)).abs() < 1e-9
            || (TAU - (img.start() - g.apply_angle(start)).abs()) < 1e-9);
        prop_assert!(img.contains_closed(g.apply_angle(start + 0.5 * len), 1e-12));
    }
}
