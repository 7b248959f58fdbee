mod common;

use common::{map, straight_mission, vehicle};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use roadfuzz_core::geometry::{Pose, Vec2};
use roadfuzz_core::maps;
use roadfuzz_core::mutation::constraints::{check_spatial, check_temporal};
use roadfuzz_core::mutation::{MutationConfig, Mutator, Strategy};
use roadfuzz_core::scenario::{
    validate_scenario, ActorKind, ComponentRef, LaneMap, Mission, NavMethod, Scenario, Weather,
    D_MIN,
};
use roadfuzz_core::{MutationError, Obb};

fn town_seed(rng: &mut impl Rng) -> (std::sync::Arc<LaneMap>, Scenario) {
    let m = map(maps::TOWN_GRID);
    loop {
        let a = m.waypoint_pose(&m.waypoints[rng.random_range(0..m.waypoints.len())]);
        let b = m.waypoint_pose(&m.waypoints[rng.random_range(0..m.waypoints.len())]);
        let d = a.position.dist(b.position);
        if (40.0..160.0).contains(&d) {
            let s = Scenario::clean(maps::TOWN_GRID, Mission::new(a, b), rng.random());
            return (m, s);
        }
    }
}

fn count(s: &Scenario) -> usize {
    s.actors.len() + s.puddles.len()
}

#[test]
fn strategies_only_create_their_own_components() {
    let mut rng = ChaCha8Rng::seed_from_u64(1);
    let (m, seed) = town_seed(&mut rng);
    for strategy in Strategy::CONCRETE {
        let mut mu = Mutator::new(&m, &seed, MutationConfig::default());
        for _ in 0..1000 {
            let out = mu.generate(&seed, strategy, &mut rng).unwrap();
            assert_eq!(count(&out), 1);
            match strategy {
                Strategy::Ins => {
                    assert!(out.actors.is_empty());
                    assert_eq!(out.newest, Some(ComponentRef::Puddle(0)));
                }
                _ => {
                    assert!(out.puddles.is_empty());
                    assert!(
                        strategy.allows(out.actors[0].nav),
                        "{strategy}: {:?}",
                        out.actors[0].nav
                    );
                    assert_eq!(out.newest, Some(ComponentRef::Actor(0)));
                }
            }
        }
    }
}

#[test]
fn campaign_like_chains_stay_valid() {
    let mut rng = ChaCha8Rng::seed_from_u64(2);
    for round in 0..12 {
        let (m, seed) = town_seed(&mut rng);
        let strategy = Strategy::CONCRETE[round % 4];
        let strategy = if round >= 8 { Strategy::All } else { strategy };
        let mut mu = Mutator::new(&m, &seed, MutationConfig::default());
        let mut s = seed.clone();
        for _ in 0..6 {
            let before = count(&s);
            s = mu.generate(&s, strategy, &mut rng).unwrap();
            assert_eq!(count(&s), before + 1);
            assert!(
                validate_scenario(&s, &m).unwrap().is_empty(),
                "{:?}",
                validate_scenario(&s, &m)
            );
            for _ in 0..5 {
                let next = mu.mutate(&s, strategy, &mut rng).unwrap();
                assert_eq!(count(&next), count(&s));
                assert_eq!(next.mission, s.mission);
                assert!(validate_scenario(&next, &m).unwrap().is_empty());
                s = next;
            }
        }
    }
}

#[test]
fn maneuver_mutation_redraws_maneuvers_only() {
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    let (m, seed) = town_seed(&mut rng);
    let mut mu = Mutator::new(&m, &seed, MutationConfig::default());
    let s = mu.generate(&seed, Strategy::Man, &mut rng).unwrap();
    let mut redrawn = 0;
    for _ in 0..50 {
        let t = mu.mutate(&s, Strategy::Man, &mut rng).unwrap();
        let (a, b) = (&s.actors[0], &t.actors[0]);
        assert_eq!((b.nav, b.kind), (NavMethod::Maneuver, a.kind));
        assert!(!b.maneuvers.is_empty());
        redrawn += (a.maneuvers != b.maneuvers) as usize;
    }
    assert!(redrawn > 40);
}

#[test]
fn puddle_mutation_keeps_it_wet_and_on_road() {
    let mut rng = ChaCha8Rng::seed_from_u64(4);
    let (m, seed) = town_seed(&mut rng);
    let cfg = MutationConfig::default();
    let mut mu = Mutator::new(&m, &seed, cfg);
    let mut s = mu.generate(&seed, Strategy::Ins, &mut rng).unwrap();
    for _ in 0..200 {
        s = mu.mutate(&s, Strategy::Ins, &mut rng).unwrap();
        let p = &s.puddles[0];
        assert!(p.friction > 0.0 && p.friction < cfg.dry_friction);
        assert!(m.on_road(p.center));
        assert!(s.actors.is_empty());
    }
}

#[test]
fn weather_mutation_changes_one_field() {
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    let (m, seed) = town_seed(&mut rng);
    let cfg = MutationConfig {
        weather_share: 1.0,
        ..MutationConfig::default()
    };
    let mut mu = Mutator::new(&m, &seed, cfg);
    let s = mu.generate(&seed, Strategy::Ent, &mut rng).unwrap();
    let mut fields_seen = [false; 8];
    for _ in 0..300 {
        let t = mu.mutate(&s, Strategy::All, &mut rng).unwrap();
        assert_eq!(t.actors, s.actors);
        let diff: Vec<usize> = (0..8)
            .filter(|&i| t.weather.get(i) != s.weather.get(i))
            .collect();
        assert_eq!(diff.len(), 1, "{:?} -> {:?}", s.weather, t.weather);
        fields_seen[diff[0]] = true;
        assert!(t.weather.in_range().is_none());
    }
    assert!(fields_seen.iter().all(|&b| b));
    assert_eq!(Weather::FIELDS.len(), 8);
}

#[test]
fn nothing_to_mutate_without_a_component() {
    let mut rng = ChaCha8Rng::seed_from_u64(6);
    let (m, seed) = town_seed(&mut rng);
    let mut mu = Mutator::new(&m, &seed, MutationConfig::default());
    assert!(matches!(
        mu.mutate(&seed, Strategy::Ent, &mut rng),
        Err(MutationError::NothingToMutate(_))
    ));
}

#[test]
fn packed_surroundings_exhaust_retries() {
    let (m, mut s) = straight_mission(100.0, 300.0);
    let ego = s.mission.ego_footprint();
    for i in 0..=44 {
        for j in 0..=14 {
            let p = Vec2::new(60.0 + 5.0 * i as f64, -35.0 + 5.0 * j as f64);
            let a = vehicle(NavMethod::Immobile, Pose::new(p.x, p.y, 0.0), p, 0.0);
            if p.dist(s.mission.initial.position) < D_MIN || a.footprint().overlaps(&ego) {
                continue;
            }
            s.actors.push(a);
        }
    }
    assert!(check_spatial(&s, &m).is_ok());
    let cfg = MutationConfig {
        retry_cap: 40,
        ..MutationConfig::default()
    };
    let mut rng = ChaCha8Rng::seed_from_u64(7);
    for strategy in [Strategy::Ent, Strategy::Con, Strategy::Man] {
        let mut mu = Mutator::new(&m, &s, cfg);
        assert_eq!(
            mu.generate(&s, strategy, &mut rng),
            Err(MutationError::RetryExhausted(40))
        );
    }
}

#[test]
fn spacing_boundary_and_static_clearance() {
    let (m, mut s) = straight_mission(50.0, 300.0);
    assert!(check_spatial(&s, &m).is_ok());
    let p = Pose::new(100.0, -1.75, 0.0);
    let q = Pose::new(105.1, -1.75, 0.0);
    s.actors
        .push(vehicle(NavMethod::Immobile, p, p.position, 0.0));
    s.actors
        .push(vehicle(NavMethod::Immobile, q, q.position, 0.0));
    assert!(check_spatial(&s, &m).is_ok());

    let mut built = (*m).clone();
    built
        .static_obstacles
        .push(Obb::new(Vec2::new(100.0, 4.0), Vec2::new(5.0, 5.0), 0.0));
    assert!(check_spatial(&s, &built).is_err());
}

#[test]
fn speed_caps() {
    let (_, mut s) = straight_mission(50.0, 300.0);
    assert!(check_temporal(&s).is_ok());
    let p = Pose::new(100.0, -1.75, 0.0);
    let mut ped = vehicle(NavMethod::Linear, p, Vec2::new(120.0, -1.75), 2.7);
    ped.kind = ActorKind::Pedestrian;
    s.actors.push(ped);
    assert!(check_temporal(&s).is_err());
    s.actors[0] = vehicle(NavMethod::Linear, p, Vec2::new(120.0, -1.75), 8.9);
    assert!(check_temporal(&s).is_ok());
}
