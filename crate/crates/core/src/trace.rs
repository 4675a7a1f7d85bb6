//! Execution harness for instrumented kernels.
//!
//! A [`Tracer`] sits between a kernel and its floating-point values. Every
//! tracked arithmetic result, load and store passes through it: the active
//! [`Transformer`] is applied when execution is inside an approximable
//! dynamic call, and the operation is counted by operand-source category so
//! the energy model can price it later.

use std::marker::PhantomData;

use num_traits::Float;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::cachesim::{CacheConfig, CacheConfigError, CacheHierarchy, OperandCategory};
use crate::fpbits::{self, FpBitsError, IeeeFloat, MantissaFault, PrecisionFormat};

/// Scalar types kernels can be instantiated with.
pub trait Real: Float + IeeeFloat + std::fmt::Debug + Send + Sync + 'static {
    fn lit(x: f64) -> Self;
    fn to_f64(self) -> f64;
}

impl Real for f32 {
    #[inline]
    fn lit(x: f64) -> Self {
        x as f32
    }
    #[inline]
    fn to_f64(self) -> f64 {
        f64::from(self)
    }
}

impl Real for f64 {
    #[inline]
    fn lit(x: f64) -> Self {
        x
    }
    #[inline]
    fn to_f64(self) -> f64 {
        self
    }
}

/// How values are rewritten during a run.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub enum Transformer {
    Identity,
    /// Omitted low mantissa bits, one entry per dynamic call.
    Truncate(Vec<u32>),
    /// A fault that is live only during dynamic call `call`.
    Fault { fault: MantissaFault, call: usize },
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum TraceError {
    #[error("dynamic call `{attempted}` started while call {open} is still open")]
    NestedCall { open: usize, attempted: String },
    #[error("end_call without a matching begin_call")]
    NoOpenCall,
    #[error("workload finished with dynamic call {0} still open")]
    UnclosedCall(usize),
    #[error("schedule covers {schedule} dynamic calls but the run made {calls}")]
    ScheduleLength { schedule: usize, calls: usize },
    #[error(transparent)]
    Bits(#[from] FpBitsError),
    #[error(transparent)]
    Cache(#[from] CacheConfigError),
}

/// Instruction counts split by operand source and by whether the instruction
/// was subject to precision scaling.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct CategoryCounts {
    pub approx: [u64; 5],
    pub exact: [u64; 5],
}

impl CategoryCounts {
    #[inline]
    fn bump(&mut self, category: OperandCategory, approximable: bool, n: u64) {
        let row = if approximable {
            &mut self.approx
        } else {
            &mut self.exact
        };
        row[category.index()] += n;
    }

    pub fn get(&self, category: OperandCategory, approximable: bool) -> u64 {
        if approximable {
            self.approx[category.index()]
        } else {
            self.exact[category.index()]
        }
    }

    pub fn total(&self) -> u64 {
        self.approx.iter().chain(self.exact.iter()).sum()
    }

    pub fn approx_total(&self) -> u64 {
        self.approx.iter().sum()
    }

    pub fn add(&mut self, other: &CategoryCounts) {
        for i in 0..5 {
            self.approx[i] += other.approx[i];
            self.exact[i] += other.exact[i];
        }
    }
}

/// One invocation of an approximable static function.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct CallRecord {
    pub index: usize,
    pub static_fn: String,
    pub counts: CategoryCounts,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct CallTrace {
    pub format: PrecisionFormat,
    pub calls: Vec<CallRecord>,
    /// Work done in the region of interest but outside any approximable call.
    pub outside: CategoryCounts,
}

impl CallTrace {
    pub fn num_calls(&self) -> usize {
        self.calls.len()
    }

    pub fn static_fns(&self) -> Vec<String> {
        self.calls.iter().map(|c| c.static_fn.clone()).collect()
    }

    pub fn totals(&self) -> CategoryCounts {
        let mut sum = self.outside;
        for call in &self.calls {
            sum.add(&call.counts);
        }
        sum
    }
}

/// A kernel array living at a fixed simulated address range.
#[derive(Debug, Clone)]
pub struct TracedVec<F> {
    base: u64,
    data: Vec<F>,
}

impl<F: Copy> TracedVec<F> {
    pub fn len(&self) -> usize {
        self.data.len()
    }

    pub fn is_empty(&self) -> bool {
        self.data.is_empty()
    }

    /// Untracked view of the contents, for setup and output collection.
    pub fn as_slice(&self) -> &[F] {
        &self.data
    }

    pub fn into_vec(self) -> Vec<F> {
        self.data
    }

    fn addr(&self, i: usize) -> u64 {
        self.base + (i * std::mem::size_of::<F>()) as u64
    }
}

#[derive(Debug, Clone, Copy)]
enum Active {
    None,
    Omit(u32),
    Force(MantissaFault),
}

pub struct Tracer<F> {
    transformer: Transformer,
    cache: CacheHierarchy,
    calls: Vec<CallRecord>,
    outside: CategoryCounts,
    open: Option<usize>,
    active: Active,
    next_addr: u64,
    _scalar: PhantomData<F>,
}

impl<F: Real> Tracer<F> {
    pub fn new(transformer: Transformer, cache: CacheConfig) -> Result<Self, TraceError> {
        match &transformer {
            Transformer::Identity => {}
            Transformer::Truncate(sched) => {
                for &k in sched {
                    fpbits::check_omission(F::FORMAT, k)?;
                }
            }
            Transformer::Fault { fault, .. } => fpbits::check_fault(F::FORMAT, *fault)?,
        }
        let line = cache.line_size as u64;
        Ok(Self {
            transformer,
            cache: CacheHierarchy::new(cache)?,
            calls: Vec::new(),
            outside: CategoryCounts::default(),
            open: None,
            active: Active::None,
            next_addr: line.max(64),
            _scalar: PhantomData,
        })
    }

    pub fn format(&self) -> PrecisionFormat {
        F::FORMAT
    }

    /// Index of the dynamic call currently executing, if any.
    pub fn current_call(&self) -> Option<usize> {
        self.open
    }

    pub fn begin_call(&mut self, static_fn: &str) -> Result<usize, TraceError> {
        if let Some(open) = self.open {
            return Err(TraceError::NestedCall {
                open,
                attempted: static_fn.to_owned(),
            });
        }
        let index = self.calls.len();
        self.calls.push(CallRecord {
            index,
            static_fn: static_fn.to_owned(),
            counts: CategoryCounts::default(),
        });
        self.open = Some(index);
        self.active = match &self.transformer {
            Transformer::Identity => Active::None,
            Transformer::Truncate(sched) => match sched.get(index).copied().unwrap_or(0) {
                0 => Active::None,
                k => Active::Omit(k),
            },
            Transformer::Fault { fault, call } if *call == index => Active::Force(*fault),
            Transformer::Fault { .. } => Active::None,
        };
        Ok(index)
    }

    pub fn end_call(&mut self) -> Result<(), TraceError> {
        self.open.take().ok_or(TraceError::NoOpenCall)?;
        self.active = Active::None;
        Ok(())
    }

    /// Closes the run and hands back its trace.
    pub fn finish(self) -> Result<CallTrace, TraceError> {
        if let Some(open) = self.open {
            return Err(TraceError::UnclosedCall(open));
        }
        if let Transformer::Truncate(sched) = &self.transformer {
            if sched.len() != self.calls.len() {
                return Err(TraceError::ScheduleLength {
                    schedule: sched.len(),
                    calls: self.calls.len(),
                });
            }
        }
        Ok(CallTrace {
            format: F::FORMAT,
            calls: self.calls,
            outside: self.outside,
        })
    }

    #[inline]
    fn apply(&self, x: F) -> F {
        match self.active {
            Active::None => x,
            Active::Omit(k) => F::from_raw(fpbits::clear_low_bits(x.to_raw(), F::FORMAT, k)),
            Active::Force(fault) => F::from_raw(fpbits::force_bit(x.to_raw(), F::FORMAT, fault)),
        }
    }

    #[inline]
    fn count(&mut self, category: OperandCategory, approximable: bool) {
        match self.open {
            Some(i) => self.calls[i].counts.bump(category, approximable, 1),
            None => self.outside.bump(category, false, 1),
        }
    }

    /// Tracks one arithmetic instruction. The instruction is charged to the
    /// farthest of its operand sources (register file when none are given).
    pub fn track_fp_op(&mut self, result: F, sources: &[OperandCategory]) -> F {
        let category = sources.iter().copied().max().unwrap_or(OperandCategory::Rf);
        self.count(category, true);
        self.apply(result)
    }

    /// Tracks one register-to-register arithmetic instruction.
    #[inline]
    pub fn op(&mut self, result: F) -> F {
        self.track_fp_op(result, &[])
    }

    /// Non floating-point work (address arithmetic, loop control, integer ops).
    pub fn track_overhead(&mut self, n: u64) {
        match self.open {
            Some(i) => self.calls[i].counts.bump(OperandCategory::Rf, false, n),
            None => self.outside.bump(OperandCategory::Rf, false, n),
        }
    }

    /// Places `data` in simulated memory. Setup is not tracked.
    pub fn alloc(&mut self, data: Vec<F>) -> TracedVec<F> {
        let line = self.cache.config().line_size as u64;
        let base = self.next_addr;
        let bytes = (data.len() * std::mem::size_of::<F>()) as u64;
        self.next_addr = (base + bytes).div_ceil(line) * line + line;
        TracedVec { base, data }
    }

    pub fn alloc_zeroed(&mut self, len: usize) -> TracedVec<F> {
        self.alloc(vec![F::zero(); len])
    }

    pub fn load(&mut self, v: &TracedVec<F>, i: usize) -> F {
        let category = self.cache.access(v.addr(i), false);
        self.count(category, true);
        self.apply(v.data[i])
    }

    pub fn store(&mut self, v: &mut TracedVec<F>, i: usize, x: F) {
        let category = self.cache.access(v.addr(i), true);
        self.count(category, true);
        v.data[i] = self.apply(x);
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fpbits::Polarity;

    fn tracer<F: Real>(t: Transformer) -> Tracer<F> {
        Tracer::new(t, CacheConfig::default()).unwrap()
    }

    #[test]
    fn sequential_calls_get_consecutive_indices() {
        let mut t = tracer::<f32>(Transformer::Identity);
        assert_eq!(t.begin_call("a").unwrap(), 0);
        t.end_call().unwrap();
        assert_eq!(t.begin_call("b").unwrap(), 1);
        t.end_call().unwrap();
        let trace = t.finish().unwrap();
        assert_eq!(trace.num_calls(), 2);
        assert_eq!(trace.calls[1].static_fn, "b");
        assert_eq!(trace.calls[0].counts.total(), 0);
    }

    #[test]
    fn call_nesting_and_balance_errors() {
        let mut t = tracer::<f32>(Transformer::Identity);
        t.begin_call("a").unwrap();
        assert!(matches!(t.begin_call("b"), Err(TraceError::NestedCall { open: 0, .. })));
        assert!(matches!(t.finish(), Err(TraceError::UnclosedCall(0))));

        let mut t = tracer::<f32>(Transformer::Identity);
        assert_eq!(t.end_call(), Err(TraceError::NoOpenCall));
    }

    #[test]
    fn identity_op_counts_rf() {
        let mut t = tracer::<f32>(Transformer::Identity);
        t.begin_call("f").unwrap();
        assert_eq!(t.op(1.0 + 2.0), 3.0);
        t.end_call().unwrap();
        let trace = t.finish().unwrap();
        assert_eq!(trace.calls[0].counts.get(OperandCategory::Rf, true), 1);
        assert_eq!(trace.calls[0].counts.total(), 1);
    }

    #[test]
    fn truncate_applies_inside_calls_only() {
        let pi = std::f32::consts::PI;
        let mut t = tracer::<f32>(Transformer::Truncate(vec![23]));
        assert_eq!(t.op(pi), pi);
        t.begin_call("f").unwrap();
        assert_eq!(t.op(pi), 2.0);
        t.end_call().unwrap();
        let trace = t.finish().unwrap();
        assert_eq!(trace.outside.get(OperandCategory::Rf, false), 1);
        assert_eq!(trace.outside.approx_total(), 0);
    }

    #[test]
    fn fault_only_hits_its_target_call() {
        let fault = MantissaFault::new(22, Polarity::StuckAt1);
        let mut t = tracer::<f32>(Transformer::Fault { fault, call: 5 });
        for i in 0..6 {
            t.begin_call("f").unwrap();
            let expect = if i == 5 { 1.5 } else { 1.0 };
            assert_eq!(t.op(1.0), expect, "call {i}");
            t.end_call().unwrap();
        }
        t.finish().unwrap();
    }

    #[test]
    fn loads_and_stores_go_through_the_cache() {
        let mut t = tracer::<f32>(Transformer::Identity);
        let v = t.alloc(vec![1.0, 2.0]);
        t.begin_call("f").unwrap();
        assert_eq!(t.load(&v, 0), 1.0);
        assert_eq!(t.load(&v, 0), 1.0);
        t.end_call().unwrap();
        let counts = t.finish().unwrap().calls[0].counts;
        assert_eq!(counts.get(OperandCategory::MemRd, true), 1);
        assert_eq!(counts.get(OperandCategory::L1, true), 1);
    }

    #[test]
    fn store_writes_transformed_value() {
        let pi = std::f32::consts::PI;
        let mut t = tracer::<f32>(Transformer::Truncate(vec![20]));
        let mut out = t.alloc_zeroed(1);
        t.begin_call("f").unwrap();
        t.store(&mut out, 0, pi);
        t.end_call().unwrap();
        assert_eq!(out.as_slice()[0], fpbits::truncate_mantissa(pi, 20).unwrap());
    }

    #[test]
    fn overhead_counts_as_exact_rf() {
        let mut t = tracer::<f64>(Transformer::Identity);
        t.track_overhead(0);
        t.begin_call("f").unwrap();
        t.track_overhead(10);
        t.end_call().unwrap();
        let trace = t.finish().unwrap();
        assert_eq!(trace.outside.total(), 0);
        assert_eq!(trace.calls[0].counts.get(OperandCategory::Rf, false), 10);
        assert_eq!(trace.calls[0].counts.approx_total(), 0);
    }

    #[test]
    fn op_is_charged_to_farthest_source() {
        let mut t = tracer::<f32>(Transformer::Identity);
        t.begin_call("f").unwrap();
        t.track_fp_op(1.0, &[OperandCategory::Rf, OperandCategory::L2]);
        t.end_call().unwrap();
        let c = t.finish().unwrap().calls[0].counts;
        assert_eq!(c.get(OperandCategory::L2, true), 1);
    }

    #[test]
    fn schedule_length_is_checked_and_ranges_validated() {
        let mut t = tracer::<f32>(Transformer::Truncate(vec![1, 2]));
        t.begin_call("f").unwrap();
        t.end_call().unwrap();
        assert_eq!(
            t.finish().unwrap_err(),
            TraceError::ScheduleLength { schedule: 2, calls: 1 }
        );
        assert!(Tracer::<f32>::new(Transformer::Truncate(vec![24]), CacheConfig::default()).is_err());
        assert!(Tracer::<f64>::new(Transformer::Truncate(vec![52]), CacheConfig::default()).is_ok());
    }
}
