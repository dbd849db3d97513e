//! Checks built on top of the solver: part metric contraction, the periodic
//! attractor and its uniqueness, the tail of localized perturbations, and
//! front tracking.

mod attractor;
mod front;
mod metric;
mod tail;

pub use attractor::{
    find_attractor, find_attractor_from_constant, liouville_check, AttractorOptions, AttractorResult,
    LiouvilleReport, PairDistance,
};
pub use front::{
    default_front_height, make_front_profile, spreading_feature_check, track_front, ConeSample, FrontOptions,
    FrontProfile, FrontRecord, SpreadingReport,
};
pub use metric::{part_metric, part_metric_decay_test, DecayReport};
pub use tail::{tail_gap_profile, TailReport, TailRow};
