//! Frameless ALOHA over multiple cooperating base stations.
//!
//! The crate covers the whole pipeline for a declared network of base
//! stations and user groups:
//!
//! * [`topology`]: which groups reach which base stations, and how many users
//!   each group holds.
//! * [`degrees`]: binomial degree distributions of the transmission graph and
//!   their edge-perspective counterparts.
//! * [`analysis`]: asymptotic packet loss rate by density evolution, with and
//!   without cooperation, the walk-graph enumeration that makes cooperation
//!   exact, and cheap throughput bounds.
//! * [`simulator`]: Monte Carlo frames with joint successive interference
//!   cancellation, plus the framed spatio-temporal baseline.
//! * [`optimizer`]: differential evolution over per-group target degrees.
//!
//! Numeric code is generic over [`Real`]; the `*64` aliases below fix it to
//! `f64`, which is what the simulator, optimizer and CLI use.

pub mod analysis;
pub mod degrees;
mod error;
pub mod optimizer;
pub mod scalar;
pub mod simulator;
pub mod topology;

pub use error::{Error, Result};
pub use scalar::{Real, Weight};
pub use topology::{BsSet, GroupSpec, NetworkTopology, TargetDegreeVector};

pub type DegreePolynomial64 = degrees::DegreePolynomial<f64>;
pub type Binomial64 = degrees::Binomial<f64>;
pub type PlrCurve64 = analysis::PlrCurve<f64>;
pub type EvolutionOutcome64 = analysis::EvolutionOutcome<f64>;
pub type WalkProbs64 = analysis::GroupProbs<f64>;

pub type DegreePolynomial32 = degrees::DegreePolynomial<f32>;
pub type PlrCurve32 = analysis::PlrCurve<f32>;
