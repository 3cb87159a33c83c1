//! Problem instances, algorithm runners and experiment drivers.

pub mod experiments;
pub mod objective;
pub mod run;

pub use experiments::{
    baseline_method, figure1_csv, figure1_exosystem, figure1_instance, logistic_exosystem, logistic_instance, run_figure1, run_rate_sweep,
    sweep_csv, theta_grid, trace_csv, triple_momentum_rate, Baseline, Figure1Config, Figure1Row, SweepConfig, SweepPoint,
};
pub use objective::{gradient, sigmoid, track_optimizer, ObjectiveKind, TimeVaryingObjective};
pub use run::{asymptotic_relative_error, fit_envelope, run_method, Envelope, Trace, TraceRecord};
