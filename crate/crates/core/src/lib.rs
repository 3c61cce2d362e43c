//! Multi-object vehicle tracking with a Gaussian-mixture labeled multi-Bernoulli
//! (GM-LMB) filter.
//!
//! The prediction step runs an unscented CTRV transition per mixture component and
//! can adapt each sigma point before it is propagated:
//!
//! * velocity, from the Intelligent Driver Model deceleration towards the nearest
//!   track ahead on the same lane chain ([`motion::adapt_velocity`]);
//! * turn rate, from the orientation of the road-map rectangle the sigma point is in
//!   ([`motion::adapt_turn_rate`]).
//!
//! The crate also ships a scenario simulator ([`sim`]), evaluation metrics
//! ([`metrics`]) and the batch runner used by the `track` binary ([`bench`]).

// Validation uses `!(x > 0.0)` on purpose so that NaN is rejected too.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod angle;
pub mod assignment;
pub mod bench;
pub mod error;
pub mod filter;
pub mod idm;
pub mod linalg;
pub mod lmb;
pub mod metrics;
pub mod motion;
pub mod roadmap;
pub mod sim;

pub use error::{Error, Result};
pub use filter::{FilterConfig, LmbFilter, MeasurementScan, SensorModel};
pub use idm::IdmParams;
pub use lmb::{BernoulliTrack, GaussianComponent, GaussianMixture, Label, LmbDensity, StateVector};
pub use roadmap::{Rectangle, RoadMap};
