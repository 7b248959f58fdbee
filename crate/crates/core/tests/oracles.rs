mod common;

use common::{lane_pose, map, straight_mission, vehicle, EAST_Y};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use roadfuzz_core::geometry::Vec2;
use roadfuzz_core::maps::{self, MapBuilder};
use roadfuzz_core::oracles::{
    recompute_flags, MisbehaviorKind, OracleConfig, OracleFlags, OracleMonitor,
};
use roadfuzz_core::scenario::map::LightPhase;
use roadfuzz_core::scenario::trace::{ActorFrame, FrameRecord};
use roadfuzz_core::scenario::{
    LaneMap, Mission, NavMethod, RoadComponent, Scenario, VehicleState, EGO_HALF_EXTENTS,
};
use roadfuzz_core::sim::{run_episode, ControlCommand, Entity, EpisodeSetup};
use roadfuzz_core::sut::SutConfig;
use roadfuzz_core::Obb;
use std::sync::Arc;

const DT: f64 = 0.05;

fn frame(k: u64, x: f64, y: f64, heading: f64, v: f64, lights: &[LightPhase]) -> FrameRecord {
    FrameRecord {
        ego: VehicleState {
            position: Vec2::new(x, y),
            heading,
            v_x: v,
            frame_index: k,
            sim_time: k as f64 * DT,
            ..VehicleState::default()
        },
        actors: Vec::new(),
        lights: lights.to_vec(),
        command: ControlCommand::ZERO,
        friction: [0.9, 0.9],
        flags: OracleFlags::default(),
        metrics: Default::default(),
    }
}

/// Eastbound straight drive at constant speed `v(k)`.
fn drive(v: impl Fn(u64) -> f64, n: u64, x0: f64, lights: &[LightPhase]) -> Vec<FrameRecord> {
    let mut x = x0;
    (0..n)
        .map(|k| {
            let f = frame(k, x, EAST_Y, 0.0, v(k), lights);
            x += v(k) * DT;
            f
        })
        .collect()
}

fn flags(m: &LaneMap, s: &Scenario, frames: &[FrameRecord]) -> Vec<OracleFlags> {
    recompute_flags(m, s, EGO_HALF_EXTENTS, OracleConfig::default(), frames)
}

fn first(fl: &[OracleFlags]) -> Option<(usize, MisbehaviorKind)> {
    fl.iter()
        .enumerate()
        .find_map(|(i, f)| f.first().map(|k| (i, k)))
}

#[test]
fn overlapping_immobile_actor_is_a_collision() {
    let (m, mut s) = straight_mission(50.0, 300.0);
    let p = lane_pose(&m, 53.0, EAST_Y, 0.0);
    s.actors
        .push(vehicle(NavMethod::Immobile, p, p.position, 0.0));
    let mut f = frame(0, 50.0, EAST_Y, 0.0, 0.0, &[]);
    f.actors.push(ActorFrame {
        pose: p,
        speed: 0.0,
    });
    let mut mon = OracleMonitor::new(&m, &s, EGO_HALF_EXTENTS, OracleConfig::default());
    assert_eq!(mon.observe(&f).collision, [Entity::Actor(0)]);
}

#[test]
fn small_gap_to_a_wall_is_not_a_collision() {
    let (m, s) = straight_mission(50.0, 300.0);
    let mut walled = (*m).clone();
    let front = 50.0 + EGO_HALF_EXTENTS.x;
    walled.static_obstacles.push(Obb::new(
        Vec2::new(front + 0.2 + 0.5, EAST_Y),
        Vec2::new(0.5, 3.0),
        0.0,
    ));
    let f = frame(0, 50.0, EAST_Y, 0.0, 0.0, &[]);
    assert!(flags(&walled, &s, std::slice::from_ref(&f))[0]
        .collision
        .is_empty());
    let mut g = f;
    g.ego.position.x += 0.25;
    assert_eq!(flags(&walled, &s, &[g])[0].collision, [Entity::Static(0)]);
}

#[test]
fn speed_at_the_limit_is_lawful() {
    let (m, s) = straight_mission(20.0, 500.0);
    let fl = flags(&m, &s, &drive(|_| 10.0, 200, 20.0, &[]));
    assert_eq!(first(&fl), None);
}

#[test]
fn sustained_speeding_fires_after_one_second() {
    let (m, s) = straight_mission(20.0, 500.0);
    let fl = flags(&m, &s, &drive(|_| 12.0, 40, 20.0, &[]));
    assert_eq!(first(&fl), Some((20, MisbehaviorKind::Speeding)));
}

#[test]
fn single_frame_spike_is_ignored() {
    let (m, s) = straight_mission(20.0, 500.0);
    let fl = flags(
        &m,
        &s,
        &drive(|k| if k == 30 { 15.0 } else { 9.0 }, 100, 20.0, &[]),
    );
    assert_eq!(first(&fl), None);
}

fn two_lane_road() -> Arc<LaneMap> {
    let mut b = MapBuilder::new("dual");
    let (a, e) = (b.node(0.0, 0.0, 0.0), b.node(400.0, 0.0, 0.0));
    b.road(a, e, &[], 2, 2, 15.0);
    Arc::new(b.build(|_, _| vec![RoadComponent::Highway]))
}

#[test]
fn lane_change_across_dashed_line_is_lawful() {
    let m = two_lane_road();
    let inner = lane_pose(&m, 50.0, EAST_Y, 0.0);
    let s = Scenario::clean(
        "dual",
        Mission::new(inner, lane_pose(&m, 300.0, EAST_Y, 0.0)),
        0,
    );
    let frames: Vec<FrameRecord> = (0..100u64)
        .map(|k| {
            let u = (k as f64 / 99.0).clamp(0.0, 1.0);
            let y = EAST_Y - 3.5 * (0.5 - 0.5 * (std::f64::consts::PI * u).cos());
            let slope = -3.5 * 0.5 * std::f64::consts::PI * (std::f64::consts::PI * u).sin()
                / (99.0 * DT * 10.0);
            frame(k, 50.0 + 10.0 * k as f64 * DT, y, slope.atan(), 10.0, &[])
        })
        .collect();
    assert!(frames.last().unwrap().ego.position.y < -5.2);
    assert_eq!(first(&flags(&m, &s, &frames)), None);

    // The same swerve to the left crosses the solid center line.
    let mirrored: Vec<FrameRecord> = frames
        .iter()
        .map(|f| {
            let mut g = f.clone();
            g.ego.position.y = 2.0 * EAST_Y - f.ego.position.y;
            g.ego.heading = -f.ego.heading;
            g
        })
        .collect();
    assert_eq!(
        first(&flags(&m, &s, &mirrored)).map(|x| x.1),
        Some(MisbehaviorKind::LaneInvasion)
    );
}

#[test]
fn staying_in_lane_is_lawful() {
    let (m, s) = straight_mission(20.0, 500.0);
    let fl = flags(&m, &s, &drive(|_| 9.0, 600, 20.0, &[]));
    assert!(fl.iter().all(|f| !f.lane_invasion));
}

fn signal() -> (Arc<LaneMap>, Scenario, f64) {
    let m = map(maps::SIGNAL_ROAD);
    let start = lane_pose(&m, 100.0, EAST_Y, 0.0);
    let s = Scenario::clean(
        maps::SIGNAL_ROAD,
        Mission::new(start, lane_pose(&m, 400.0, EAST_Y, 0.0)),
        0,
    );
    let lane = m
        .nearest_lane_anywhere(start.position, Some(0.0))
        .unwrap()
        .lane;
    let stop_x = m
        .lights_for_lane(lane)
        .next()
        .unwrap()
        .stop_line
        .midpoint()
        .x;
    (m, s, stop_x)
}

fn all(m: &LaneMap, p: LightPhase) -> Vec<LightPhase> {
    vec![p; m.traffic_lights.len()]
}

#[test]
fn crossing_on_green_is_lawful() {
    let (m, s, stop_x) = signal();
    let frames = drive(|_| 9.0, 200, stop_x - 40.0, &all(&m, LightPhase::Green));
    assert!(frames.last().unwrap().ego.position.x > stop_x + 20.0);
    assert_eq!(first(&flags(&m, &s, &frames)), None);

    let red = drive(|_| 9.0, 200, stop_x - 40.0, &all(&m, LightPhase::Red));
    let (k, kind) = first(&flags(&m, &s, &red)).unwrap();
    assert_eq!(kind, MisbehaviorKind::RedLight);
    let bumper = red[k].ego.position.x + EGO_HALF_EXTENTS.x;
    assert!(bumper >= stop_x && bumper - 9.0 * DT < stop_x);
}

#[test]
fn stopping_before_the_line_on_red_is_lawful() {
    let (m, s, stop_x) = signal();
    let x_stop = stop_x - 1.0 - EGO_HALF_EXTENTS.x;
    let x0 = x_stop - 25.0;
    // Constant deceleration from 10 m/s to rest exactly at x_stop.
    let a = 100.0 / (2.0 * 25.0);
    let frames: Vec<FrameRecord> = (0..400u64)
        .map(|k| {
            let t = (k as f64 * DT).min(10.0 / a);
            let x = x0 + 10.0 * t - 0.5 * a * t * t;
            frame(k, x, EAST_Y, 0.0, 10.0 - a * t, &all(&m, LightPhase::Red))
        })
        .collect();
    assert!((frames.last().unwrap().ego.position.x - x_stop).abs() < 1e-9);
    assert_eq!(first(&flags(&m, &s, &frames)), None);
}

#[test]
fn long_wait_at_red_is_not_immobility() {
    let (m, s, stop_x) = signal();
    let x = stop_x - 3.0 - EGO_HALF_EXTENTS.x;
    let frames = drive(|_| 0.0, (90.0 / DT) as u64, x, &all(&m, LightPhase::Red));
    assert_eq!(first(&flags(&m, &s, &frames)), None);

    // Same wait away from any light.
    let frames = drive(|_| 0.0, (90.0 / DT) as u64, 60.0, &all(&m, LightPhase::Red));
    let (k, kind) = first(&flags(&m, &s, &frames)).unwrap();
    assert_eq!(kind, MisbehaviorKind::Immobility);
    assert!((k as f64 * DT - 60.0).abs() < 1e-9);
}

#[test]
fn short_stall_is_not_immobility() {
    let (m, s) = straight_mission(20.0, 500.0);
    let stall = (59.0 / DT) as u64;
    let frames = drive(
        |k| if k < stall { 0.0 } else { 5.0 },
        stall + 400,
        30.0,
        &[],
    );
    assert_eq!(first(&flags(&m, &s, &frames)), None);
}

#[test]
fn logged_flags_equal_recomputation() {
    let m = map(maps::TOWN_GRID);
    let mut rng = ChaCha8Rng::seed_from_u64(9);
    let setup = EpisodeSetup::new(SutConfig::defective());
    for _ in 0..12 {
        let a = m.waypoint_pose(&m.waypoints[rng.random_range(0..m.waypoints.len())]);
        let b = m.waypoint_pose(&m.waypoints[rng.random_range(0..m.waypoints.len())]);
        if a.position.dist(b.position) < 30.0 {
            continue;
        }
        let mut s = Scenario::clean(maps::TOWN_GRID, Mission::new(a, b), rng.random());
        s.mission.time_budget = 60.0;
        let ep = run_episode(&s, m.clone(), &setup, None);
        let fl = recompute_flags(&m, &s, EGO_HALF_EXTENTS, setup.oracles, &ep.frames);
        for (f, g) in ep.frames.iter().zip(&fl) {
            assert_eq!(&f.flags, g);
        }
        // At most one misbehavior, and the episode halts on it.
        let raised: Vec<usize> = fl
            .iter()
            .enumerate()
            .filter(|(_, f)| f.any())
            .map(|(i, _)| i)
            .collect();
        assert!(raised.len() <= 1);
        if let Some(&i) = raised.first() {
            assert_eq!(i, ep.frames.len() - 1);
            assert_eq!(ep.status.misbehavior(), fl[i].first());
        }
    }
}
