#![allow(dead_code)]

use roadfuzz_core::geometry::{Pose, Vec2};
use roadfuzz_core::maps;
use roadfuzz_core::scenario::{
    ActorKind, ActorSpec, LaneMap, Mission, NavMethod, PuddleSpec, Scenario,
};
use std::sync::Arc;

pub const EAST_Y: f64 = -maps::LANE_WIDTH / 2.0;

/// Lane pose nearest to `(x, y)` for a vehicle heading `h`.
pub fn lane_pose(map: &LaneMap, x: f64, y: f64, h: f64) -> Pose {
    let m = map
        .nearest_lane_anywhere(Vec2::new(x, y), Some(h))
        .expect("point near a lane");
    map.lane(m.lane).centerline.pose_at(m.projection.s)
}

pub fn map(id: &str) -> Arc<LaneMap> {
    maps::builtin(id).expect("built-in map")
}

/// Eastbound mission on `straight_road` between two x positions.
pub fn straight_mission(x0: f64, x1: f64) -> (Arc<LaneMap>, Scenario) {
    let m = map(maps::STRAIGHT_ROAD);
    let mission = Mission::new(
        lane_pose(&m, x0, EAST_Y, 0.0),
        lane_pose(&m, x1, EAST_Y, 0.0),
    );
    let s = Scenario::clean(maps::STRAIGHT_ROAD, mission, 7);
    (m, s)
}

pub fn vehicle(nav: NavMethod, initial: Pose, destination: Vec2, speed: f64) -> ActorSpec {
    let kind = ActorKind::Vehicle;
    ActorSpec {
        kind,
        nav,
        initial,
        destination,
        target_speed: speed,
        maneuvers: Vec::new(),
        half_extents: kind.half_extents(),
    }
}

/// Left curve of radius 60 m: east along y = 0, then north along x = 300.
pub fn curve_mission() -> (Arc<LaneMap>, Scenario) {
    let m = map(maps::CURVE_ROAD);
    let mission = Mission::new(
        lane_pose(&m, 100.0, EAST_Y, 0.0),
        lane_pose(&m, 301.75, 150.0, 1.57),
    );
    let s = Scenario::clean(maps::CURVE_ROAD, mission, 1);
    (m, s)
}

/// Low-grip patch covering the curve entry; the ego keeps steering into
/// the turn while the front axle slides.
pub fn understeer_puddle() -> PuddleSpec {
    PuddleSpec {
        center: Vec2::new(265.0, 3.0),
        half_extents: Vec2::new(2.0, 10.0),
        heading: 0.5,
        friction: 0.05,
    }
}

/// Narrow patch laid diagonally across the curve exit, so the rear axle is
/// still on it after the front has regained grip.
pub fn oversteer_puddle(map: &LaneMap) -> PuddleSpec {
    PuddleSpec {
        center: lane_pose(map, 290.0, 10.0, 0.5).position,
        half_extents: Vec2::new(4.0, 12.0),
        heading: -0.785,
        friction: 0.2,
    }
}

/// Corners plus a dense grid over the rectangle, `n` cells per axis.
fn samples(o: &roadfuzz_core::Obb, n: usize) -> Vec<Vec2> {
    let [u, v] = o.axes();
    let mut out = Vec::with_capacity((n + 1) * (n + 1));
    for i in 0..=n {
        let a = -1.0 + 2.0 * i as f64 / n as f64;
        for j in 0..=n {
            let b = -1.0 + 2.0 * j as f64 / n as f64;
            out.push(o.center + u * (a * o.half_extents.x) + v * (b * o.half_extents.y));
        }
    }
    out
}

fn inside(o: &roadfuzz_core::Obb, p: Vec2) -> bool {
    let d = p - o.center;
    let local = d.rotated(-o.heading);
    local.x.abs() <= o.half_extents.x + 1e-12 && local.y.abs() <= o.half_extents.y + 1e-12
}

/// Brute-force overlap: some sample of either rectangle lies in the other.
pub fn sampled_overlap(a: &roadfuzz_core::Obb, b: &roadfuzz_core::Obb, n: usize) -> bool {
    samples(a, n).iter().any(|&p| inside(b, p)) || samples(b, n).iter().any(|&p| inside(a, p))
}

/// Whether the sampled verdict flips when `b` grows or shrinks by `band`.
pub fn in_boundary_band(
    a: &roadfuzz_core::Obb,
    b: &roadfuzz_core::Obb,
    band: f64,
    n: usize,
) -> bool {
    let grown =
        roadfuzz_core::Obb::new(b.center, b.half_extents + Vec2::new(band, band), b.heading);
    let shrunk =
        roadfuzz_core::Obb::new(b.center, b.half_extents - Vec2::new(band, band), b.heading);
    sampled_overlap(a, &grown, n) != sampled_overlap(a, &shrunk, n)
}

/// Random rectangle pair clustered so that about half of them touch.
pub fn random_obb_pair(rng: &mut impl rand::Rng) -> (roadfuzz_core::Obb, roadfuzz_core::Obb) {
    fn one(rng: &mut impl rand::Rng) -> roadfuzz_core::Obb {
        use std::f64::consts::PI;
        let c = Vec2::new(rng.random_range(-3.0..3.0), rng.random_range(-3.0..3.0));
        let h = Vec2::new(rng.random_range(0.2..2.5), rng.random_range(0.2..1.5));
        roadfuzz_core::Obb::new(c, h, rng.random_range(-PI..PI))
    }
    (one(rng), one(rng))
}
