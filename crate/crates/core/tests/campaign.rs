mod common;

use common::{map, straight_mission};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use roadfuzz_core::campaign::replay::{replay, resimulate};
use roadfuzz_core::campaign::seeds::{component_seeds, generate_seeds, SeedConfig};
use roadfuzz_core::campaign::{
    attributable, run_pool, select_successor, CampaignConfig, CampaignSummary, MapCache, NamedSeed,
    Outcome, Runner,
};
use roadfuzz_core::error::{CampaignError, MapError};
use roadfuzz_core::maps;
use roadfuzz_core::mutation::Strategy;
use roadfuzz_core::scenario::trace::Trace;
use roadfuzz_core::scenario::RoadComponent;
use roadfuzz_core::sim::EpisodeSetup;
use roadfuzz_core::sut::{Defects, SutConfig};

fn straight_seeds(n: usize) -> Vec<NamedSeed> {
    (0..n)
        .map(|i| NamedSeed {
            name: format!("straight-{i}"),
            scenario: straight_mission(60.0 + 40.0 * i as f64, 300.0 + 40.0 * i as f64).1,
        })
        .collect()
}

fn town_pool(per_component: usize, verify: Vec<EpisodeSetup>) -> Vec<NamedSeed> {
    let m = map(maps::TOWN_GRID);
    let cfg = SeedConfig {
        verify,
        ..SeedConfig::default()
    };
    let mut pool = Vec::new();
    for c in RoadComponent::ALL {
        if let Ok(seeds) = component_seeds(&m, c, per_component, 5, &cfg) {
            pool.extend(seeds.into_iter().enumerate().map(|(i, s)| NamedSeed {
                name: format!("{}-{i}", c.tag()),
                scenario: s.scenario,
            }));
        }
    }
    pool
}

fn defective(tag: &str) -> EpisodeSetup {
    EpisodeSetup::new(SutConfig::with_defects(Defects::only(tag).unwrap()))
}

/// Summary fields that must not depend on scheduling.
fn stable(s: &CampaignSummary) -> String {
    let mut s = s.clone();
    s.wall_time_s = 0.0;
    s.timing = Default::default();
    serde_json::to_string(&s).unwrap()
}

#[test]
fn successor_is_the_argmin() {
    assert_eq!(select_successor(&[-3.0, -7.0, -5.0]), Some(1));
    assert_eq!(select_successor(&[-2.0, -4.0, -4.0]), Some(1));
    assert_eq!(select_successor(&[0.0]), Some(0));
    assert_eq!(select_successor(&[]), None);
}

#[test]
fn single_cycle_single_member_costs_one_episode() {
    let (m, seed) = straight_mission(60.0, 300.0);
    let cfg = CampaignConfig {
        nc: 1,
        np: 1,
        strategy: Strategy::Ins,
        ..CampaignConfig::default()
    };
    let mut runner = Runner::new(&cfg).unwrap();
    let r = runner.fuzz_one(&seed, &m, &mut ChaCha8Rng::seed_from_u64(1));
    assert_eq!(r.outcome, Outcome::Exhausted);
    assert_eq!(r.episodes, 1);
}

#[test]
fn exhausted_seeds_cost_nc_times_np() {
    let cfg = CampaignConfig {
        nc: 2,
        np: 3,
        strategy: Strategy::Ins,
        timing: false,
        ..CampaignConfig::default()
    };
    let s = run_pool(&straight_seeds(2), &cfg, &mut MapCache::default()).unwrap();
    assert_eq!(s.misbehaviors, 0);
    assert_eq!(s.episodes, 12);
    assert!(s
        .per_seed
        .iter()
        .all(|p| p.exhausted == 1 && p.episodes == 6));
}

#[test]
fn feedback_keeps_the_worst_member() {
    let (m, seed) = straight_mission(60.0, 300.0);
    for feedback in [true, false] {
        let cfg = CampaignConfig {
            nc: 4,
            np: 4,
            strategy: Strategy::Ins,
            feedback,
            ..CampaignConfig::default()
        };
        let mut runner = Runner::new(&cfg).unwrap().keep_cycles(true);
        let r = runner.fuzz_one(&seed, &m, &mut ChaCha8Rng::seed_from_u64(3));
        assert!(!r.cycles.is_empty());
        for (k, c) in r.cycles.iter().enumerate() {
            let scores: Vec<f64> = c.population.iter().map(|p| p.quality.score).collect();
            let Some(succ) = c.successor else { continue };
            assert!(succ < scores.len());
            if feedback {
                assert_eq!(Some(succ), select_successor(&scores));
            }
            // The next cycle grows the successor by one component.
            if let Some(next) = r.cycles.get(k + 1) {
                let parent = &c.population[succ].scenario;
                assert_eq!(
                    next.population[0].scenario.puddles.len(),
                    parent.puddles.len() + 1
                );
            }
        }
    }
}

#[test]
fn budget_is_spent_exactly_with_restarts() {
    let cfg = CampaignConfig {
        nc: 3,
        np: 4,
        strategy: Strategy::Ins,
        episode_budget: Some(30),
        restart_after_find: true,
        timing: false,
        ..CampaignConfig::default()
    };
    let s = run_pool(&straight_seeds(2), &cfg, &mut MapCache::default()).unwrap();
    assert_eq!(s.episodes, 30);
    // Without restarts one pass is the ceiling.
    let once = CampaignConfig {
        restart_after_find: false,
        ..cfg
    };
    let s = run_pool(&straight_seeds(2), &once, &mut MapCache::default()).unwrap();
    assert_eq!(s.episodes, 24);
}

#[test]
fn defective_campaign_reports_replay_and_resimulate() {
    let dir = tempfile::tempdir().unwrap();
    let pool = town_pool(1, vec![EpisodeSetup::default()]);
    assert!(!pool.is_empty());
    let cfg = CampaignConfig {
        strategy: Strategy::Ent,
        setup: defective("D1"),
        episode_budget: Some(150),
        restart_after_find: true,
        out_dir: Some(dir.path().to_path_buf()),
        ..CampaignConfig::default()
    };
    let s = run_pool(&pool, &cfg, &mut MapCache::default()).unwrap();
    assert!(s.misbehaviors >= 1, "{:?}", s.by_kind);
    assert!(dir.path().join("summary.json").is_file());
    let town = map(maps::TOWN_GRID);
    for r in &s.reports {
        let trace = Trace::read(r.trace_path.as_ref().unwrap()).unwrap();
        assert_eq!(trace.footer.status.misbehavior(), Some(r.kind));
        let mut rep = replay(&trace, &town);
        rep.resimulation = Some(resimulate(&trace, town.clone()));
        assert!(rep.consistent(), "{}: {rep:?}", r.id);
        let stored: serde_json::Value = serde_json::from_str(
            &std::fs::read_to_string(dir.path().join("reports").join(format!("{}.json", r.id)))
                .unwrap(),
        )
        .unwrap();
        assert_eq!(stored["kind"], serde_json::to_value(r.kind).unwrap());
    }
}

#[test]
fn worker_count_does_not_change_results() {
    let pool = town_pool(1, vec![EpisodeSetup::default()]);
    let run = |jobs| {
        let cfg = CampaignConfig {
            strategy: Strategy::All,
            setup: defective("D2"),
            episode_budget: Some(80),
            restart_after_find: true,
            jobs: Some(jobs),
            timing: false,
            ..CampaignConfig::default()
        };
        run_pool(&pool, &cfg, &mut MapCache::default()).unwrap()
    };
    assert_eq!(stable(&run(1)), stable(&run(4)));
}

#[test]
fn timing_categories_cover_the_wall_clock() {
    let cfg = CampaignConfig {
        nc: 3,
        np: 4,
        strategy: Strategy::Ent,
        jobs: Some(1),
        ..CampaignConfig::default()
    };
    let s = run_pool(&straight_seeds(2), &cfg, &mut MapCache::default()).unwrap();
    let t = &s.timing;
    let sum = t.mutation_s + t.detector_s + t.feedback_s + t.logging_s + t.simulation_s;
    assert!((sum - t.total_s).abs() < 1e-9);
    assert!(
        (t.total_s - s.wall_time_s).abs() <= 0.02 * s.wall_time_s,
        "{t:?} vs {}",
        s.wall_time_s
    );
}

#[test]
fn attribution_separates_stack_faults() {
    let (m, seed) = straight_mission(60.0, 300.0);
    // Completed scenarios are never attributable.
    assert!(!attributable(&seed, &m, &defective("D1")));
    let fault = EpisodeSetup::new(SutConfig::defect_free().with_faults(
        roadfuzz_core::sut::FaultSwitches {
            force_steer_left: true,
            ..Default::default()
        },
    ));
    assert!(attributable(&seed, &m, &fault));
}

#[test]
fn seedgen_needs_every_component() {
    let m = map(maps::STRAIGHT_ROAD);
    match generate_seeds(&m, 2, 0, &SeedConfig::default()) {
        Err(CampaignError::Map(MapError::MissingComponent(c))) => assert!(!c.is_empty()),
        other => panic!("{other:?}"),
    }
    assert!(
        generate_seeds(&map(maps::TOWN_GRID), 0, 0, &SeedConfig::default())
            .unwrap()
            .is_empty()
    );
}

#[test]
fn invalid_config_is_rejected() {
    let cfg = CampaignConfig {
        np: 0,
        ..CampaignConfig::default()
    };
    assert!(matches!(Runner::new(&cfg), Err(CampaignError::Config(_))));
}
