//! Property tests for the geometric and counting invariants.

use glintlab::geom::{halfway, reflect, SphericalPolygon, UnitVec3};
use glintlab::glint::{sample_binomial_count, split_count_multinomial, CountKey};
use glintlab::ltc::{integrate_ltc_polygon, LtcLobe};
use glintlab::math::Vec3;
use proptest::prelude::*;

fn arb_unit() -> impl Strategy<Value = UnitVec3> {
    (-1.0f64..1.0, -1.0f64..1.0, -1.0f64..1.0)
        .prop_filter_map("non-degenerate", |(x, y, z)| {
            UnitVec3::normalize(Vec3::new(x, y, z)).ok()
        })
}

fn arb_upper_unit() -> impl Strategy<Value = UnitVec3> {
    (-1.0f64..1.0, -1.0f64..1.0, 0.05f64..1.0)
        .prop_filter_map("non-degenerate", |(x, y, z)| {
            UnitVec3::normalize(Vec3::new(x, y, z)).ok()
        })
}

// quads at z = 1 with jittered corners stay convex and above the horizon
fn arb_quad() -> impl Strategy<Value = SphericalPolygon> {
    (
        -2.0f64..2.0,
        -2.0f64..2.0,
        0.3f64..3.0,
        0.3f64..3.0,
    )
        .prop_map(|(cx, cy, w, h)| {
            let corners = [
                (cx - w, cy - h),
                (cx + w, cy - h),
                (cx + w, cy + h),
                (cx - w, cy + h),
            ];
            SphericalPolygon::new(
                corners
                    .iter()
                    .map(|&(x, y)| UnitVec3::normalize(Vec3::new(x, y, 1.0)).unwrap())
                    .collect(),
            )
            .unwrap()
        })
}

proptest! {
    #[test]
    fn reflect_is_involution(w in arb_unit(), m in arb_unit()) {
        let twice = reflect(reflect(w, m), m);
        prop_assert!((twice.as_vec() - w.as_vec()).length() < 1e-9);
    }

    #[test]
    fn reflect_preserves_length(w in arb_unit(), m in arb_unit()) {
        prop_assert!((reflect(w, m).as_vec().length() - 1.0).abs() < 1e-12);
    }

    #[test]
    fn halfway_reflects_back(wi in arb_upper_unit(), wo in arb_upper_unit()) {
        let h = halfway(wi, wo).unwrap();
        let back = reflect(wo, h);
        prop_assert!((back.as_vec() - wi.as_vec()).length() < 1e-9);
    }

    #[test]
    fn polygon_area_cyclic_invariant(poly in arb_quad(), shift in 0usize..4) {
        let verts = poly.vertices().to_vec();
        let mut rotated = verts.clone();
        rotated.rotate_left(shift);
        let r = SphericalPolygon::new(rotated).unwrap();
        prop_assert!((poly.solid_angle() - r.solid_angle()).abs() < 1e-10);
    }

    #[test]
    fn polygon_area_positive_and_bounded(poly in arb_quad()) {
        let sa = poly.solid_angle();
        prop_assert!(sa > 0.0 && sa < 2.0 * std::f64::consts::PI);
    }

    #[test]
    fn ltc_integral_in_unit_range(poly in arb_quad(), a in 0.05f64..2.0, c in 0.05f64..2.0,
                                  b in -0.5f64..0.5, d in -0.5f64..0.5) {
        prop_assume!(a - b * d > 1e-3);
        let lobe = LtcLobe::from_params([a, b, c, d]).unwrap();
        let v = integrate_ltc_polygon(&lobe, &poly);
        prop_assert!((0.0..=1.0).contains(&v));
    }

    #[test]
    fn binomial_count_in_range(n in 0u64..10_000, p in 0.0f64..=1.0, seed in any::<u64>()) {
        let key = CountKey { cell_x: 1, cell_y: 2, lod: 0, light_id: 0 };
        let k = sample_binomial_count(n, p, &key, seed);
        prop_assert!(k <= n);
        prop_assert_eq!(k, sample_binomial_count(n, p, &key, seed));
    }

    #[test]
    fn multinomial_preserves_total(k in 0u64..100_000, seed in any::<u64>(),
                                   raw in proptest::collection::vec(0.01f64..1.0, 1..12)) {
        let total_raw: f64 = raw.iter().sum();
        let parent = 0.7;
        let probs: Vec<f64> = raw.iter().map(|w| w / total_raw * parent).collect();
        let key = CountKey { cell_x: -5, cell_y: 9, lod: -2, light_id: 3 };
        let parts = split_count_multinomial(k, parent, &probs, &key, seed).unwrap();
        prop_assert_eq!(parts.iter().sum::<u64>(), k);
        prop_assert_eq!(parts.len(), probs.len());
    }
}
