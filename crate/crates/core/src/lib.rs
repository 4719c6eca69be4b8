//! Loss-driven label assignment for dense detection, without training.
//!
//! The crate models the geometry of a feature pyramid, synthesizes
//! controllable per-instance loss fields from focal and GIoU losses, and runs
//! an aligned points sampler over them: per-level top-K candidate selection,
//! loss-driven scale-level choice, joint unfitness/misalignment scoring, and
//! a Gaussian-mixture split into positives and negatives. Center-sampling
//! baselines, receptive-field arithmetic, and alignment metrics round out the
//! toolkit so assignment behavior can be measured and compared on seeded
//! scenario corpora.

pub mod assigner;
pub mod baseline;
pub mod error;
pub mod geometry;
pub mod gmm;
pub mod losses;
pub mod report;
pub mod rf;
pub mod scenario;

pub use assigner::{
    assign_image, assign_instance, Assignment, CandidateSet, InstanceAssignment, PositivePoint,
    DEFAULT_TOP_K,
};
pub use error::{Error, Result};
pub use geometry::{giou, BBox, LevelSpec, PointId, PyramidGrid};
pub use gmm::Gmm2;
pub use losses::{focal_loss, giou_loss, synth_loss_field, LossField, LossPair};
pub use report::{compare_assigners, AssignerKind, ComparisonReport};
pub use rf::{deformed_rf_bound, static_rf, ConvSpec, RfState};
pub use scenario::{Preset, ScenarioConfig};
