//! Built-in instrumented workloads.
//!
//! Each kernel is written once, generically over the scalar type, against a
//! [`Tracer`]. Instruction streams and memory addresses never depend on
//! floating-point values, so a run's [`CallTrace`] counts are the same under
//! every transformer; only the values change.

mod blackscholes;
mod hotspot;
mod pagerank;
mod particlefilter;
mod synthetic;

use std::fmt;
use std::path::PathBuf;
use std::str::FromStr;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::cachesim::CacheConfig;
use crate::fpbits::PrecisionFormat;
use crate::trace::{CallTrace, Real, TraceError, Tracer, Transformer};

pub use blackscholes::{BlackScholes, OptionKind, OptionSpec};
pub use hotspot::Hotspot;
pub use pagerank::{Graph, PageRank};
pub use particlefilter::ParticleFilterLite;
pub use synthetic::SyntheticAdditive;

/// A workload that can be executed under a [`Tracer`].
pub trait Kernel: Sync {
    fn name(&self) -> &str;

    /// Runs the region of interest and returns the output data points.
    fn execute<F: Real>(&self, t: &mut Tracer<F>) -> Result<Vec<F>, TraceError>;
}

#[derive(Debug, Error)]
pub enum KernelError {
    #[error("unknown workload `{0}`")]
    UnknownWorkload(String),
    #[error("workload `{workload}` does not accept input `{input}`")]
    UnsupportedInput { workload: String, input: String },
    #[error("cannot read {path}: {source}")]
    Io {
        path: PathBuf,
        source: std::io::Error,
    },
    #[error("{path}:{line}: {message}")]
    Parse {
        path: PathBuf,
        line: usize,
        message: String,
    },
    #[error("invalid input: {0}")]
    Invalid(String),
    #[error(transparent)]
    Trace(#[from] TraceError),
}

/// Where a workload's input comes from.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub enum WorkloadInput {
    /// Embedded generator driven by the run seed.
    Generated,
    /// Directed cycle over `n` vertices (PageRank only).
    Cycle(usize),
    /// Whitespace-separated `src dst` edge list (PageRank only).
    EdgeList(PathBuf),
}

impl fmt::Display for WorkloadInput {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            WorkloadInput::Generated => f.write_str("generated"),
            WorkloadInput::Cycle(n) => write!(f, "cycle:{n}"),
            WorkloadInput::EdgeList(p) => write!(f, "{}", p.display()),
        }
    }
}

impl FromStr for WorkloadInput {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "" | "generated" | "default" => Ok(WorkloadInput::Generated),
            _ => {
                if let Some(n) = s.strip_prefix("cycle:") {
                    let n = n
                        .parse()
                        .map_err(|_| format!("bad vertex count in `{s}`"))?;
                    Ok(WorkloadInput::Cycle(n))
                } else {
                    Ok(WorkloadInput::EdgeList(PathBuf::from(s.strip_prefix("file:").unwrap_or(s))))
                }
            }
        }
    }
}

/// Static description of a bundled workload.
#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct WorkloadSpec {
    pub name: &'static str,
    pub summary: &'static str,
    pub static_functions: &'static [&'static str],
    pub format: PrecisionFormat,
    /// Output length for the generated input.
    pub output_len: usize,
    /// Dynamic calls made on the generated input.
    pub dynamic_calls: usize,
}

pub fn list_workloads() -> Vec<WorkloadSpec> {
    vec![
        WorkloadSpec {
            name: "blackscholes",
            summary: "closed-form European option pricing, one call per option",
            static_functions: blackscholes::STATIC_FNS,
            format: PrecisionFormat::Single,
            output_len: blackscholes::DEFAULT_OPTIONS,
            dynamic_calls: blackscholes::DEFAULT_OPTIONS,
        },
        WorkloadSpec {
            name: "hotspot",
            summary: "5-point thermal stencil, one find_delta call per iteration",
            static_functions: hotspot::STATIC_FNS,
            format: PrecisionFormat::Single,
            output_len: hotspot::DEFAULT_ROWS * hotspot::DEFAULT_COLS,
            dynamic_calls: hotspot::DEFAULT_ITERATIONS,
        },
        WorkloadSpec {
            name: "pagerank",
            summary: "pull-style PageRank, one pagerank_calculate call per iteration",
            static_functions: pagerank::STATIC_FNS,
            format: PrecisionFormat::Single,
            output_len: pagerank::DEFAULT_VERTICES,
            dynamic_calls: pagerank::DEFAULT_ITERATIONS,
        },
        WorkloadSpec {
            name: "particlefilter_lite",
            summary: "2-D particle filter tracking, five calls per frame",
            static_functions: particlefilter::STATIC_FNS,
            format: PrecisionFormat::Single,
            output_len: 2,
            dynamic_calls: particlefilter::DEFAULT_FRAMES * particlefilter::STATIC_FNS.len(),
        },
        WorkloadSpec {
            name: "synthetic_additive",
            summary: "validation workload whose per-call errors add exactly",
            static_functions: synthetic::STATIC_FNS,
            format: PrecisionFormat::Single,
            output_len: synthetic::DEFAULT_CALLS * synthetic::DEFAULT_POINTS_PER_CALL,
            dynamic_calls: synthetic::DEFAULT_CALLS,
        },
    ]
}

pub fn workload_spec(name: &str) -> Option<WorkloadSpec> {
    list_workloads().into_iter().find(|w| w.name == name)
}

/// A bundled workload with its input materialized.
#[derive(Debug, Clone)]
pub enum Workload {
    BlackScholes(BlackScholes),
    Hotspot(Hotspot),
    PageRank(PageRank),
    ParticleFilter(ParticleFilterLite),
    SyntheticAdditive(SyntheticAdditive),
}

impl Workload {
    pub fn build(name: &str, input: &WorkloadInput, seed: u64) -> Result<Self, KernelError> {
        let unsupported = || KernelError::UnsupportedInput {
            workload: name.to_owned(),
            input: input.to_string(),
        };
        let generated_only = |w: Workload| match input {
            WorkloadInput::Generated => Ok(w),
            _ => Err(unsupported()),
        };
        match name {
            "blackscholes" => generated_only(Workload::BlackScholes(BlackScholes::generate(
                blackscholes::DEFAULT_OPTIONS,
                seed,
            ))),
            "hotspot" => generated_only(Workload::Hotspot(Hotspot::generate(
                hotspot::DEFAULT_ROWS,
                hotspot::DEFAULT_COLS,
                hotspot::DEFAULT_ITERATIONS,
                seed,
            ))),
            "particlefilter_lite" => generated_only(Workload::ParticleFilter(
                ParticleFilterLite::generate(
                    particlefilter::DEFAULT_PARTICLES,
                    particlefilter::DEFAULT_FRAMES,
                    seed,
                ),
            )),
            "synthetic_additive" => generated_only(Workload::SyntheticAdditive(
                SyntheticAdditive::generate(
                    synthetic::DEFAULT_CALLS,
                    synthetic::DEFAULT_POINTS_PER_CALL,
                    seed,
                ),
            )),
            "pagerank" => {
                let graph = match input {
                    WorkloadInput::Generated => Graph::random(pagerank::DEFAULT_VERTICES, seed),
                    WorkloadInput::Cycle(n) => Graph::cycle(*n)?,
                    WorkloadInput::EdgeList(path) => Graph::from_edge_list_file(path)?,
                };
                Ok(Workload::PageRank(PageRank::new(graph, pagerank::DEFAULT_ITERATIONS)))
            }
            other => Err(KernelError::UnknownWorkload(other.to_owned())),
        }
    }
}

impl Kernel for Workload {
    fn name(&self) -> &str {
        match self {
            Workload::BlackScholes(k) => k.name(),
            Workload::Hotspot(k) => k.name(),
            Workload::PageRank(k) => k.name(),
            Workload::ParticleFilter(k) => k.name(),
            Workload::SyntheticAdditive(k) => k.name(),
        }
    }

    fn execute<F: Real>(&self, t: &mut Tracer<F>) -> Result<Vec<F>, TraceError> {
        match self {
            Workload::BlackScholes(k) => k.execute(t),
            Workload::Hotspot(k) => k.execute(t),
            Workload::PageRank(k) => k.execute(t),
            Workload::ParticleFilter(k) => k.execute(t),
            Workload::SyntheticAdditive(k) => k.execute(t),
        }
    }
}

/// Output data points of one run, widened to `f64`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct WorkloadOutput {
    pub values: Vec<f64>,
}

impl WorkloadOutput {
    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn is_valid(&self) -> bool {
        crate::fpbits::is_result_valid(&self.values)
    }
}

#[derive(Debug, Clone)]
pub struct Execution {
    pub output: WorkloadOutput,
    pub trace: CallTrace,
}

/// Runs `kernel` once at the given precision under `transformer`.
pub fn execute<K: Kernel>(
    kernel: &K,
    format: PrecisionFormat,
    transformer: Transformer,
    cache: CacheConfig,
) -> Result<Execution, TraceError> {
    fn go<K: Kernel, F: Real>(
        kernel: &K,
        transformer: Transformer,
        cache: CacheConfig,
    ) -> Result<Execution, TraceError> {
        let mut tracer = Tracer::<F>::new(transformer, cache)?;
        let out = kernel.execute(&mut tracer)?;
        let trace = tracer.finish()?;
        Ok(Execution {
            output: WorkloadOutput {
                values: out.into_iter().map(Real::to_f64).collect(),
            },
            trace,
        })
    }
    match format {
        PrecisionFormat::Single => go::<K, f32>(kernel, transformer, cache),
        PrecisionFormat::Double => go::<K, f64>(kernel, transformer, cache),
    }
}

/// Builds a named workload and runs it; the convenience entry point used by
/// the command line.
pub fn run_workload(
    name: &str,
    input: &WorkloadInput,
    seed: u64,
    format: PrecisionFormat,
    transformer: Transformer,
    cache: CacheConfig,
) -> Result<Execution, KernelError> {
    let workload = Workload::build(name, input, seed)?;
    Ok(execute(&workload, format, transformer, cache)?)
}
