//! JSON Schemas of every file the tool reads or writes. The copies under
//! `docs/schemas/` are generated from these.

use crate::campaign::ab::AbResult;
use crate::campaign::replay::ReplayReport;
use crate::campaign::seeds::SeedManifest;
use crate::campaign::validation::SuiteResult;
use crate::campaign::{CampaignConfig, CampaignSummary, MisbehaviorReport};
use crate::feedback::QualityScore;
use crate::scenario::trace::TraceRecord;
use crate::scenario::{LaneMap, Scenario};
use schemars::{schema_for, Schema};

/// `(file stem, schema)` pairs.
pub fn all() -> Vec<(&'static str, Schema)> {
    vec![
        ("map", schema_for!(LaneMap)),
        ("scenario", schema_for!(Scenario)),
        ("trace_record", schema_for!(TraceRecord)),
        ("campaign_config", schema_for!(CampaignConfig)),
        ("campaign_summary", schema_for!(CampaignSummary)),
        ("misbehavior_report", schema_for!(MisbehaviorReport)),
        ("seed_manifest", schema_for!(SeedManifest)),
        ("oracle_validation", schema_for!(Vec<SuiteResult>)),
        ("replay_report", schema_for!(ReplayReport)),
        ("quality_score", schema_for!(QualityScore)),
        ("ab_result", schema_for!(AbResult)),
    ]
}

/// Pretty-printed schema text with a trailing newline.
pub fn render(schema: &Schema) -> String {
    let mut s = serde_json::to_string_pretty(schema).expect("schemas serialize");
    s.push('\n');
    s
}
