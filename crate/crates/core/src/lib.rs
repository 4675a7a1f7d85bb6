//! Dynamic precision scaling for approximable floating-point kernels.
//!
//! The pipeline has three stages:
//!
//! 1. [`profiler::profile`] injects stuck-at faults into each mantissa bit of
//!    each dynamic call and records the resulting accuracy loss.
//! 2. A planner in [`policy`] turns those loss matrices and an accuracy
//!    target into a per-call count of mantissa bits to omit.
//! 3. [`report::replay`] runs the workload with those bits truncated and
//!    reports the accuracy loss ([`metrics`]) and energy ([`energy`]).
//!
//! Kernels are written against [`trace::Tracer`], which applies the active
//! transformation and counts instructions by operand source using the cache
//! model in [`cachesim`].

pub mod cachesim;
pub mod energy;
pub mod fpbits;
pub mod kernels;
pub mod metrics;
pub mod policy;
pub mod profiler;
pub mod report;
pub mod trace;

pub use cachesim::{CacheConfig, CacheHierarchy, OperandCategory};
pub use energy::{EnergyReport, EpiTable, ScalingModel};
pub use fpbits::{MantissaFault, Polarity, PrecisionFormat};
pub use kernels::{Execution, Kernel, Workload, WorkloadInput, WorkloadOutput};
pub use metrics::AccuracySummary;
pub use policy::{OmissionSchedule, PolicyConfig, PolicyKind};
pub use profiler::{AccLossMatrices, Entry, ProfileOptions};
pub use report::{RunReport, RunSettings, WorkloadId};
pub use trace::{CallTrace, Real, Tracer, Transformer};
