//! Synthesis of first-order optimization algorithms that track the minimizer
//! of time-varying strongly convex objectives.
//!
//! The pipeline: build the internal model of the parameter variation
//! ([`exo`], [`plant`]), transform the loop with a Zames–Falb multiplier
//! ([`transform`]), search the optimal rate with convex LMIs ([`lmi`],
//! [`synth`]), then simulate ([`simkit`]).
//!
//! Everything numeric is generic over [`scalar::Scalar`]; the aliases below fix
//! `f64`.

pub mod error;
pub mod exo;
pub mod lmi;
pub mod numkit;
pub mod plant;
pub mod scalar;
pub mod simkit;
pub mod synth;
pub mod transform;

pub use error::{Error, Result};

pub type Matrix = nalgebra::DMatrix<f64>;
pub type Vector = nalgebra::DVector<f64>;
pub type Complex = scalar::Cplx<f64>;
pub type StateSpace = numkit::StateSpace<f64>;
pub type TransferFunction = numkit::TransferFunction<f64>;
pub type Polynomial = numkit::Polynomial<f64>;
pub type HarmonicSet = exo::HarmonicSet<f64>;
pub type Exosystem = exo::Exosystem<f64>;
pub type PlantRealization = plant::PlantRealization<f64>;
pub type Algorithm = plant::Algorithm<f64>;
pub type MultiplierParams = transform::MultiplierParams<f64>;
pub type TransformedPlant = transform::TransformedPlant<f64>;
pub type ClosedLoop = transform::ClosedLoop<f64>;
pub type LmiProblem = lmi::LmiProblem<f64>;
pub type Feasibility = lmi::Feasibility<f64>;
pub type SynthesisCertificate = lmi::SynthesisCertificate<f64>;
pub type RateQuery = synth::RateQuery<f64>;
pub type SynthesisResult = synth::SynthesisResult<f64>;
pub type TimeVaryingObjective = simkit::TimeVaryingObjective<f64>;
pub type Trace = simkit::Trace<f64>;
