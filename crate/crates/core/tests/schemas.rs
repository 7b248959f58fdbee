mod common;

use common::{map, straight_mission};
use roadfuzz_core::campaign::ab::{run_ab, AbConfig};
use roadfuzz_core::campaign::replay::{replay, resimulate};
use roadfuzz_core::campaign::seeds::{generate_seeds, ManifestEntry, SeedConfig, SeedManifest};
use roadfuzz_core::campaign::validation::run_suite;
use roadfuzz_core::campaign::validation::Suite;
use roadfuzz_core::campaign::{run_pool, CampaignConfig, MapCache, NamedSeed};
use roadfuzz_core::maps;
use roadfuzz_core::mutation::Strategy;
use roadfuzz_core::scenario::trace::Trace;
use roadfuzz_core::schemas;
use roadfuzz_core::sim::EpisodeSetup;
use roadfuzz_core::sut::SutConfig;
use serde_json::Value;
use std::path::{Path, PathBuf};

fn docs_dir() -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("../../docs/schemas")
}

fn schema(stem: &str) -> Value {
    let (_, s) = schemas::all()
        .into_iter()
        .find(|(n, _)| *n == stem)
        .expect("known schema");
    serde_json::to_value(s).unwrap()
}

fn assert_valid(stem: &str, instance: &Value) {
    let v = jsonschema::validator_for(&schema(stem)).expect("schema compiles");
    let errors: Vec<String> = v
        .iter_errors(instance)
        .map(|e| format!("{} at {}", e, e.instance_path))
        .take(5)
        .collect();
    assert!(errors.is_empty(), "{stem}: {errors:?}");
}

fn read_json(p: &Path) -> Value {
    serde_json::from_str(&std::fs::read_to_string(p).unwrap()).unwrap()
}

/// Set `ROADFUZZ_BLESS=1` to rewrite the published copies.
#[test]
fn published_schemas_are_current() {
    let dir = docs_dir();
    let bless = std::env::var_os("ROADFUZZ_BLESS").is_some();
    for (stem, s) in schemas::all() {
        let path = dir.join(format!("{stem}.schema.json"));
        let text = schemas::render(&s);
        if bless {
            std::fs::create_dir_all(&dir).unwrap();
            std::fs::write(&path, &text).unwrap();
        }
        let published = std::fs::read_to_string(&path).unwrap_or_default();
        assert!(
            published == text,
            "{} is stale; rerun with ROADFUZZ_BLESS=1",
            path.display()
        );
    }
}

#[test]
fn shipped_map_and_scenarios_validate() {
    let town = read_json(&Path::new(env!("CARGO_MANIFEST_DIR")).join("../../maps/town_grid.json"));
    assert_valid("map", &town);
    assert_valid(
        "map",
        &serde_json::to_value(&*map(maps::CURVE_ROAD)).unwrap(),
    );
    let (_, s) = straight_mission(60.0, 300.0);
    assert_valid("scenario", &serde_json::to_value(&s).unwrap());
    assert_valid(
        "campaign_config",
        &serde_json::to_value(CampaignConfig::default()).unwrap(),
    );
    // Configs are partial documents filled from defaults.
    assert_valid(
        "campaign_config",
        &serde_json::json!({"nc": 3, "strategy": "ent"}),
    );
}

#[test]
#[should_panic(expected = "scenario")]
fn schema_rejects_wrong_types() {
    assert_valid("scenario", &serde_json::json!({"map_id": 3}));
}

#[test]
fn campaign_outputs_validate() {
    let dir = tempfile::tempdir().unwrap();
    let town = map(maps::TOWN_GRID);
    let seeds = generate_seeds(&town, 1, 0, &SeedConfig::default()).unwrap();
    let manifest = SeedManifest {
        map_id: town.map_id.clone(),
        n_s: 1,
        rng_seed: 0,
        seeds: seeds
            .iter()
            .map(|s| ManifestEntry {
                file: format!("{}.json", s.component.tag()),
                component: s.component.tag().into(),
                digest: s.scenario.digest(),
            })
            .collect(),
    };
    assert_valid("seed_manifest", &serde_json::to_value(&manifest).unwrap());

    let pool: Vec<NamedSeed> = seeds
        .into_iter()
        .map(|s| NamedSeed {
            name: s.component.tag().into(),
            scenario: s.scenario,
        })
        .collect();
    let cfg = CampaignConfig {
        strategy: Strategy::Ent,
        setup: EpisodeSetup::new(SutConfig::defective()),
        episode_budget: Some(40),
        restart_after_find: true,
        out_dir: Some(dir.path().to_path_buf()),
        ..CampaignConfig::default()
    };
    let summary = run_pool(&pool, &cfg, &mut MapCache::default()).unwrap();
    assert!(!summary.reports.is_empty());
    assert_valid(
        "campaign_summary",
        &read_json(&dir.path().join("summary.json")),
    );
    for r in &summary.reports {
        assert_valid(
            "misbehavior_report",
            &read_json(&dir.path().join("reports").join(format!("{}.json", r.id))),
        );
        let path = r.trace_path.as_ref().unwrap();
        for line in std::fs::read_to_string(path).unwrap().lines() {
            assert_valid("trace_record", &serde_json::from_str(line).unwrap());
        }
        let trace = Trace::read(path).unwrap();
        let mut rep = replay(&trace, &town);
        rep.resimulation = Some(resimulate(&trace, town.clone()));
        assert_valid("replay_report", &serde_json::to_value(&rep).unwrap());
        assert_valid("quality_score", &serde_json::to_value(rep.quality).unwrap());
    }
}

#[test]
fn validation_and_ab_outputs_validate() {
    let rows = vec![
        run_suite(Suite::DisableControl, 2, 0),
        run_suite(Suite::RearEnd, 2, 0),
    ];
    assert_valid("oracle_validation", &serde_json::to_value(&rows).unwrap());
    let cfg = AbConfig {
        repeats: 1,
        budget: 20,
        seeds_per_component: 1,
        ..AbConfig::default()
    };
    let r = run_ab(&map(maps::TOWN_GRID), &cfg).unwrap();
    assert_valid("ab_result", &serde_json::to_value(&r).unwrap());
}
