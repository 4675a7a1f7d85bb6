//! Energy accounting over call traces.
//!
//! Each instruction is priced by the EPI of its operand-source category.
//! Approximable instructions inside a dynamic call that omits `k` mantissa
//! bits are priced at the EPI scaled linearly by the remaining width.

use std::fmt;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::cachesim::OperandCategory;
use crate::fpbits::PrecisionFormat;
use crate::trace::{CallTrace, CategoryCounts};

#[derive(Debug, Clone, PartialEq, Error)]
pub enum EnergyError {
    #[error("cannot omit {omitted} bits from a {format} mantissa")]
    OmissionOutOfRange { format: PrecisionFormat, omitted: u32 },
    #[error("schedule covers {schedule} dynamic calls but the trace has {calls}")]
    LengthMismatch { schedule: usize, calls: usize },
    #[error("EPI for {category} must be a positive finite number, got {value}")]
    BadEpi { category: OperandCategory, value: f64 },
}

/// Energy per instruction in nanojoules, per operand category.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct EpiTable {
    pub rf: f64,
    pub l1: f64,
    pub l2: f64,
    pub mem_rd: f64,
    pub mem_wr: f64,
}

impl Default for EpiTable {
    fn default() -> Self {
        Self {
            rf: 0.45,
            l1: 0.88,
            l2: 7.72,
            mem_rd: 52.14,
            mem_wr: 62.14,
        }
    }
}

impl EpiTable {
    pub fn get(&self, category: OperandCategory) -> f64 {
        match category {
            OperandCategory::Rf => self.rf,
            OperandCategory::L1 => self.l1,
            OperandCategory::L2 => self.l2,
            OperandCategory::MemRd => self.mem_rd,
            OperandCategory::MemWr => self.mem_wr,
        }
    }

    pub fn validate(&self) -> Result<(), EnergyError> {
        for category in OperandCategory::ALL {
            let value = self.get(category);
            if !(value.is_finite() && value > 0.0) {
                return Err(EnergyError::BadEpi { category, value });
            }
        }
        Ok(())
    }
}

/// Denominator of the width scaling.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ScalingModel {
    /// `(total_bits - k) / total_bits`
    #[default]
    TotalWidth,
    /// `(mantissa_bits - k) / mantissa_bits`
    MantissaOnly,
}

impl ScalingModel {
    pub fn factor(self, format: PrecisionFormat, omitted: u32) -> Result<f64, EnergyError> {
        if omitted > format.mantissa_bits() {
            return Err(EnergyError::OmissionOutOfRange { format, omitted });
        }
        let width = match self {
            ScalingModel::TotalWidth => format.total_bits(),
            ScalingModel::MantissaOnly => format.mantissa_bits(),
        };
        Ok(f64::from(width - omitted) / f64::from(width))
    }

    /// Largest fraction of an approximable instruction's energy that omission
    /// can remove.
    pub fn max_reduction(self, format: PrecisionFormat) -> f64 {
        1.0 - self.factor(format, format.mantissa_bits()).unwrap_or(1.0)
    }
}

impl fmt::Display for ScalingModel {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            ScalingModel::TotalWidth => "total_width",
            ScalingModel::MantissaOnly => "mantissa_only",
        })
    }
}

pub fn epi_scaled(
    category: OperandCategory,
    format: PrecisionFormat,
    omitted: u32,
    table: &EpiTable,
) -> Result<f64, EnergyError> {
    epi_scaled_with(category, format, omitted, table, ScalingModel::TotalWidth)
}

pub fn epi_scaled_with(
    category: OperandCategory,
    format: PrecisionFormat,
    omitted: u32,
    table: &EpiTable,
    model: ScalingModel,
) -> Result<f64, EnergyError> {
    Ok(table.get(category) * model.factor(format, omitted)?)
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize, Deserialize)]
pub struct CategoryEnergy {
    pub rf: f64,
    pub l1: f64,
    pub l2: f64,
    pub mem_rd: f64,
    pub mem_wr: f64,
}

impl CategoryEnergy {
    pub fn get(&self, category: OperandCategory) -> f64 {
        match category {
            OperandCategory::Rf => self.rf,
            OperandCategory::L1 => self.l1,
            OperandCategory::L2 => self.l2,
            OperandCategory::MemRd => self.mem_rd,
            OperandCategory::MemWr => self.mem_wr,
        }
    }

    fn slot(&mut self, category: OperandCategory) -> &mut f64 {
        match category {
            OperandCategory::Rf => &mut self.rf,
            OperandCategory::L1 => &mut self.l1,
            OperandCategory::L2 => &mut self.l2,
            OperandCategory::MemRd => &mut self.mem_rd,
            OperandCategory::MemWr => &mut self.mem_wr,
        }
    }

    pub fn total(&self) -> f64 {
        OperandCategory::ALL.iter().map(|&c| self.get(c)).sum()
    }

    fn add(&mut self, other: &CategoryEnergy) {
        for c in OperandCategory::ALL {
            *self.slot(c) += other.get(c);
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EnergyReport {
    pub format: PrecisionFormat,
    pub model: ScalingModel,
    pub epi: EpiTable,
    /// Energy of each dynamic call under the schedule, nJ.
    pub per_call: Vec<f64>,
    /// Energy of work outside every dynamic call, always at full precision.
    pub outside: f64,
    pub total: f64,
    /// Total energy of the same trace with nothing omitted.
    pub baseline: f64,
    pub savings: f64,
    /// Share of baseline energy spent on approximable instructions.
    pub approximable_share: f64,
    pub by_category: CategoryEnergy,
}

fn price(
    counts: &CategoryCounts,
    format: PrecisionFormat,
    omitted: u32,
    table: &EpiTable,
    model: ScalingModel,
) -> Result<CategoryEnergy, EnergyError> {
    let factor = model.factor(format, omitted)?;
    let mut e = CategoryEnergy::default();
    for c in OperandCategory::ALL {
        let epi = table.get(c);
        *e.slot(c) = counts.get(c, false) as f64 * epi + counts.get(c, true) as f64 * epi * factor;
    }
    Ok(e)
}

pub fn energy_of_trace(
    trace: &CallTrace,
    omitted: &[u32],
    table: &EpiTable,
) -> Result<EnergyReport, EnergyError> {
    energy_of_trace_with(trace, omitted, table, ScalingModel::TotalWidth)
}

pub fn energy_of_trace_with(
    trace: &CallTrace,
    omitted: &[u32],
    table: &EpiTable,
    model: ScalingModel,
) -> Result<EnergyReport, EnergyError> {
    table.validate()?;
    if omitted.len() != trace.num_calls() {
        return Err(EnergyError::LengthMismatch {
            schedule: omitted.len(),
            calls: trace.num_calls(),
        });
    }
    let format = trace.format;
    let mut by_category = price(&trace.outside, format, 0, table, model)?;
    let outside = by_category.total();
    let mut per_call = Vec::with_capacity(trace.num_calls());
    let mut full = Vec::with_capacity(trace.num_calls());
    let mut approximable = 0.0;
    for (call, &k) in trace.calls.iter().zip(omitted) {
        let e = price(&call.counts, format, k, table, model)?;
        per_call.push(e.total());
        by_category.add(&e);
        full.push(price(&call.counts, format, 0, table, model)?.total());
        approximable += OperandCategory::ALL
            .iter()
            .map(|&c| call.counts.get(c, true) as f64 * table.get(c))
            .sum::<f64>();
    }
    // same summation order for both, so an all-zero schedule saves exactly 0
    let total = outside + per_call.iter().sum::<f64>();
    let baseline = outside + full.iter().sum::<f64>();
    let ratio = |x: f64| if baseline > 0.0 { x / baseline } else { 0.0 };
    Ok(EnergyReport {
        format,
        model,
        epi: *table,
        per_call,
        outside,
        total,
        baseline,
        savings: ratio(baseline - total),
        approximable_share: ratio(approximable),
        by_category,
    })
}
