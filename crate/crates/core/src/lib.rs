//! Feedback-guided scenario fuzzing for driving stacks.
//!
//! The crate bundles a deterministic fixed-step 2D simulator, a reference
//! driving stack with fault switches and planted defects, per-frame test
//! oracles, a driving-quality score, and the fuzzing campaign that ties
//! them together.

pub mod campaign;
pub mod error;
pub mod feedback;
pub mod geometry;
pub mod maps;
pub mod mutation;
pub mod oracles;
pub mod scenario;
pub mod schemas;
pub mod sim;
pub mod sut;

pub use error::{CampaignError, MapError, MutationError, PlanError, ScenarioError, TraceError};
pub use geometry::{Obb, Pose, Vec2};
pub use scenario::{LaneMap, Scenario};
