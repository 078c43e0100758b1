//! Piecewise-deterministic Markov processes: simulation of the embedded
//! chain, nonparametric estimation of the sojourn-time density, and
//! quadrature/Monte Carlo reference values to check both against.

// `!(x > 0.0)` is used on purpose: it also rejects NaN.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod bench;
pub mod error;
pub mod estimators;
pub mod interval;
pub mod io;
pub mod model;
pub mod oracle;
pub mod quadrature;
pub mod simulator;
pub mod stats;

pub use bench::{bench_exit_time, build_bench_model, BenchModel, BenchParams};
pub use error::{Error, Result};
pub use estimators::{
    build_partition, estimate_density, estimate_density_map, DensityEstimate, EstimatorConfig,
    HorizonMode, Kernel, PartitionSpec, Region,
};
pub use interval::IntervalModel;
pub use model::{Envelope, Model, State};
pub use quadrature::Quadrature;
pub use simulator::{simulate_chain, simulate_chains, Record, Trajectory};
