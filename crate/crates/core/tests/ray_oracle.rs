mod common;

use common::{march, oracle_sweep, random_scene};
use proptest::prelude::*;
use racil_core::geometry::Vec2;
use racil_core::sense::{cast_ray, observe, scan, SensorConfig};
use racil_core::sim::{Arena, WorldState};

#[test]
fn analytic_caster_matches_march_on_random_scenes() {
    let r = oracle_sweep(2_000, 2, 20.0, 1e-3);
    assert!(r.failures.is_empty(), "{:#?}", &r.failures[..r.failures.len().min(10)]);
    assert!(r.grazes * 100 <= r.casts, "too many grazes: {}", r.grazes);
}

#[test]
fn peer_disc_matches_march() {
    let (mut w, _) = random_scene(0);
    w.obstacles.clear();
    w.arena = Arena { x_min: -100.0, x_max: 100.0, y_min: -100.0, y_max: 100.0, uav_radius: 1.0, goal_radius: 0.1 };
    w.uavs.truncate(1);
    w.goals.truncate(1);
    w.goals[0].x = 0.0;
    w.goals[0].y = 90.0;
    w.uavs[0].x = 0.0;
    w.uavs[0].y = 0.0;
    let mut peer = w.uavs[0];
    peer.id = 1;
    peer.x = 5.0;
    w.uavs.push(peer);
    let mut g = w.goals[0];
    g.owner = 1;
    g.y = -90.0;
    w.goals.push(g);
    let (t, _) = march(&w, 0, Vec2::ZERO, Vec2::new(1.0, 0.0), 20.0, 2e-3).unwrap();
    assert!((t - 4.0).abs() < 1e-3);
    let h = cast_ray(Vec2::ZERO, Vec2::new(1.0, 0.0), &w, 0, 20.0).unwrap();
    assert!((h.distance - t).abs() < 1e-3);
}

fn rotate_world(w: &WorldState, pivot: Vec2, phi: f64) -> WorldState {
    let mut out = w.clone();
    let rot = |x: f64, y: f64| {
        let p = (Vec2::new(x, y) - pivot).rotated(phi) + pivot;
        (p.x, p.y)
    };
    for u in &mut out.uavs {
        (u.x, u.y) = rot(u.x, u.y);
        u.heading = racil_core::geometry::normalize_degrees(u.heading + phi);
    }
    for g in &mut out.goals {
        (g.x, g.y) = rot(g.x, g.y);
    }
    for o in &mut out.obstacles {
        (o.cx, o.cy) = rot(o.cx, o.cy);
        o.rotation += phi;
    }
    out
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(256))]

    #[test]
    fn rotation_leaves_hits_unchanged(seed in 0u64..100_000, phi in 0.0f64..360.0) {
        let (mut w, _) = random_scene(seed);
        // Walls are not rotated, so push them out of reach.
        w.arena.x_min = -1e6;
        w.arena.x_max = 1e6;
        w.arena.y_min = -1e6;
        w.arena.y_max = 1e6;
        let pivot = w.uavs[0].pos();
        let r = rotate_world(&w, pivot, phi);
        let sensor = SensorConfig { n_rays: 24, arc_degrees: 360.0, ..Default::default() };
        let a = scan(&w, 0, &sensor);
        let b = scan(&r, 0, &sensor);
        for (ha, hb) in a.iter().zip(&b) {
            prop_assert_eq!(ha.hit, hb.hit);
            prop_assert_eq!(ha.tag, hb.tag);
            prop_assert!((ha.distance - hb.distance).abs() < 1e-9);
            let n = ha.normal.rotated(phi);
            prop_assert!((n.x - hb.normal.x).abs() < 1e-9 && (n.y - hb.normal.y).abs() < 1e-9);
        }
    }

    #[test]
    fn shorter_range_never_creates_hits(seed in 0u64..100_000, dir in 0.0f64..360.0, range in 0.1f64..20.0, cut in 0.0f64..1.0) {
        let (w, _) = random_scene(seed);
        let o = w.uavs[0].pos();
        let d = Vec2::from_heading(dir);
        let long = cast_ray(o, d, &w, 0, range).unwrap();
        let short = cast_ray(o, d, &w, 0, range * cut.max(1e-3)).unwrap();
        prop_assert!(long.hit || !short.hit);
        if short.hit {
            prop_assert_eq!(short.distance, long.distance);
        }
    }

    #[test]
    fn hit_invariants(seed in 0u64..100_000, dir in 0.0f64..360.0) {
        let (w, _) = random_scene(seed);
        let h = cast_ray(w.uavs[0].pos(), Vec2::from_heading(dir), &w, 0, 20.0).unwrap();
        if h.hit {
            prop_assert!((0.0..=20.0).contains(&h.distance));
            prop_assert!((h.normal.length() - 1.0).abs() < 1e-9);
            prop_assert!(h.tag.is_some() && h.collider.is_some());
        } else {
            prop_assert_eq!(h.distance, 20.0);
            prop_assert_eq!(h.normal, Vec2::ZERO);
            prop_assert!(h.tag.is_none());
        }
    }

    #[test]
    fn observation_layout_matrix(seed in 0u64..10_000, n_rays in 1usize..40, arc in 1.0f64..=360.0, n_tags in 1usize..=5) {
        let (w, cfg) = random_scene(seed);
        let sensor = SensorConfig { n_rays, arc_degrees: arc, max_range: 20.0, tags: racil_core::sense::Tag::ALL[..n_tags].to_vec() };
        let obs = observe(&w, 0, &sensor, &cfg);
        prop_assert_eq!(obs.len(), 4 + n_rays * (n_tags + 2));
        for block in obs[4..].chunks(n_tags + 2) {
            prop_assert_eq!(block[..=n_tags].iter().filter(|&&v| v == 1.0).count(), 1);
            prop_assert_eq!(block[..=n_tags].iter().sum::<f64>(), 1.0);
            prop_assert!((0.0..=1.0).contains(&block[n_tags + 1]));
        }
    }
}
