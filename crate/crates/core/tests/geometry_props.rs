use dogfight::geometry::{angle_off, aspect_angle, ata, bearing_to, distance, turn_sign, HeadingDeg, Vec2};
use proptest::prelude::*;

fn point() -> impl Strategy<Value = Vec2> {
    (-50.0..50.0f64, -50.0..50.0f64).prop_map(|(x, y)| Vec2::new(x, y))
}

fn grid_point() -> impl Strategy<Value = Vec2> {
    (-20i32..20, -20i32..20).prop_map(|(x, y)| Vec2::new(x as f64, y as f64))
}

fn heading() -> impl Strategy<Value = HeadingDeg> {
    (-720.0..720.0f64).prop_map(HeadingDeg::new)
}

/// Rotates a point about the origin by `deg` clockwise, matching compass
/// headings.
fn rotate(p: Vec2, deg: f64) -> Vec2 {
    let (s, c) = deg.to_radians().sin_cos();
    Vec2::new(p.x * c + p.y * s, -p.x * s + p.y * c)
}

fn separated() -> impl Strategy<Value = (Vec2, Vec2)> {
    (point(), point()).prop_filter("distinct points", |(a, b)| distance(*a, *b) > 1e-3)
}

proptest! {
    #[test]
    fn headings_normalize(h in heading()) {
        prop_assert!((0.0..360.0).contains(&h.value()));
        prop_assert!((HeadingDeg::new(h.value() + 360.0).value() - h.value()).abs() < 1e-9);
    }

    #[test]
    fn angles_stay_in_range((a, b) in separated(), ha in heading(), hb in heading()) {
        let t = ata(a, ha, b);
        let s = aspect_angle(a, b, hb);
        let o = angle_off(ha, hb);
        for v in [t, s, o] {
            prop_assert!((0.0..=180.0).contains(&v), "{v}");
        }
    }

    #[test]
    fn angle_off_is_symmetric(ha in heading(), hb in heading()) {
        prop_assert!((angle_off(ha, hb) - angle_off(hb, ha)).abs() < 1e-9);
    }

    #[test]
    fn facing_the_target_gives_zero_ata((a, b) in separated()) {
        let h = bearing_to(a, b).unwrap();
        prop_assert!(ata(a, h, b) < 1e-6);
        prop_assert!((ata(a, h.reversed(), b) - 180.0).abs() < 1e-6);
    }

    #[test]
    fn metrics_are_rotation_invariant((a, b) in separated(), ha in heading(), hb in heading(), r in 0.0..360.0f64) {
        let (ra, rb) = (rotate(a, r), rotate(b, r));
        let (rha, rhb) = (ha.rotated(r), hb.rotated(r));
        prop_assert!((ata(a, ha, b) - ata(ra, rha, rb)).abs() < 1e-6);
        prop_assert!((aspect_angle(a, b, hb) - aspect_angle(ra, rb, rhb)).abs() < 1e-6);
        prop_assert!((angle_off(ha, hb) - angle_off(rha, rhb)).abs() < 1e-6);
    }

    // integer grid keeps the determinant exact
    #[test]
    fn turn_sign_flips_with_orientation(a in grid_point(), b in grid_point(), c in grid_point()) {
        prop_assert_eq!(turn_sign(a, b, c), -turn_sign(a, c, b));
        prop_assert_eq!(turn_sign(a, b, c), turn_sign(b, c, a));
    }

    #[test]
    fn rotation_keeps_distance((a, b) in separated(), r in 0.0..360.0f64) {
        prop_assert!((distance(a, b) - distance(rotate(a, r), rotate(b, r))).abs() < 1e-9);
    }
}

#[test]
fn compass_convention() {
    let o = Vec2::new(0.0, 0.0);
    assert!((bearing_to(o, Vec2::new(0.0, 1.0)).unwrap().value()).abs() < 1e-12);
    assert!((bearing_to(o, Vec2::new(1.0, 0.0)).unwrap().value() - 90.0).abs() < 1e-12);
    assert!(bearing_to(o, o).is_err());
    // c lies to the left of the ray a -> b
    assert_eq!(turn_sign(o, Vec2::new(0.0, 1.0), Vec2::new(-1.0, 1.0)), 1);
    assert_eq!(turn_sign(o, Vec2::new(0.0, 1.0), Vec2::new(0.0, 2.0)), 0);
}
