use thiserror::Error;

use crate::model::SystemState;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("non-finite value in {0}")]
    NonFinite(&'static str),

    /// |hitch angle| exceeded the configured guard.
    #[error("jackknife guard exceeded: hitch angle {:.2} deg (limit {:.2} deg)", .hitch.to_degrees(), .limit.to_degrees())]
    Jackknife { state: SystemState, hitch: f64, limit: f64 },

    /// A steering map denominator vanished or changed sign: the direction of
    /// the hitch velocity relative to the trailer is undefined.
    #[error("singular steering configuration at hitch angle {:.3} deg (denominator {denominator:.3e})", .hitch.to_degrees())]
    SingularSteering { hitch: f64, denominator: f64 },

    #[error("no admissible virtual steering: [{:.4}, {:.4}] deg is empty", .lo.to_degrees(), .hi.to_degrees())]
    EmptyBounds { lo: f64, hi: f64 },

    #[error("hitch velocity undefined at rest")]
    AtRest,

    #[error("{stage} stage exceeded its step cap of {cap}")]
    StepCap { stage: &'static str, cap: usize },
}
