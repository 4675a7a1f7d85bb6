//! Bit-level IEEE-754 mantissa manipulation.
//!
//! Two primitives drive everything else in the crate: clearing the `k`
//! least-significant mantissa bits of a value (bit omission), and forcing a
//! single mantissa bit to a fixed value (stuck-at fault). Both leave the sign
//! and exponent fields alone, and both pass non-finite values through
//! untouched.

use std::fmt;

use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum PrecisionFormat {
    Single,
    Double,
}

impl PrecisionFormat {
    pub const fn mantissa_bits(self) -> u32 {
        match self {
            PrecisionFormat::Single => 23,
            PrecisionFormat::Double => 52,
        }
    }

    pub const fn exponent_bits(self) -> u32 {
        match self {
            PrecisionFormat::Single => 8,
            PrecisionFormat::Double => 11,
        }
    }

    pub const fn total_bits(self) -> u32 {
        match self {
            PrecisionFormat::Single => 32,
            PrecisionFormat::Double => 64,
        }
    }

    const fn exponent_mask(self) -> u64 {
        ((1u64 << self.exponent_bits()) - 1) << self.mantissa_bits()
    }
}

impl fmt::Display for PrecisionFormat {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            PrecisionFormat::Single => f.write_str("single"),
            PrecisionFormat::Double => f.write_str("double"),
        }
    }
}

impl std::str::FromStr for PrecisionFormat {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "single" | "f32" => Ok(PrecisionFormat::Single),
            "double" | "f64" => Ok(PrecisionFormat::Double),
            other => Err(format!("unknown precision `{other}` (expected single or double)")),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum Polarity {
    StuckAt0,
    StuckAt1,
}

impl Polarity {
    pub const BOTH: [Polarity; 2] = [Polarity::StuckAt0, Polarity::StuckAt1];
}

/// A single stuck-at fault on one mantissa bit, indexed from the
/// least-significant mantissa bit.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct MantissaFault {
    pub bit: u32,
    pub polarity: Polarity,
}

impl MantissaFault {
    pub const fn new(bit: u32, polarity: Polarity) -> Self {
        Self { bit, polarity }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum FpBitsError {
    #[error("cannot omit {omitted} bits: {format} precision has {mantissa} mantissa bits")]
    OmissionOutOfRange {
        omitted: u32,
        format: PrecisionFormat,
        mantissa: u32,
    },
    #[error("fault bit {bit} is outside the {mantissa}-bit {format} mantissa")]
    FaultBitOutOfRange {
        bit: u32,
        format: PrecisionFormat,
        mantissa: u32,
    },
}

/// Floating-point types whose raw encoding the crate can manipulate.
pub trait IeeeFloat: Copy {
    const FORMAT: PrecisionFormat;

    fn to_raw(self) -> u64;
    fn from_raw(raw: u64) -> Self;
}

impl IeeeFloat for f32 {
    const FORMAT: PrecisionFormat = PrecisionFormat::Single;

    #[inline]
    fn to_raw(self) -> u64 {
        u64::from(self.to_bits())
    }

    #[inline]
    fn from_raw(raw: u64) -> Self {
        f32::from_bits(raw as u32)
    }
}

impl IeeeFloat for f64 {
    const FORMAT: PrecisionFormat = PrecisionFormat::Double;

    #[inline]
    fn to_raw(self) -> u64 {
        self.to_bits()
    }

    #[inline]
    fn from_raw(raw: u64) -> Self {
        f64::from_bits(raw)
    }
}

pub fn check_omission(format: PrecisionFormat, omitted: u32) -> Result<(), FpBitsError> {
    if omitted > format.mantissa_bits() {
        return Err(FpBitsError::OmissionOutOfRange {
            omitted,
            format,
            mantissa: format.mantissa_bits(),
        });
    }
    Ok(())
}

pub fn check_fault(format: PrecisionFormat, fault: MantissaFault) -> Result<(), FpBitsError> {
    if fault.bit >= format.mantissa_bits() {
        return Err(FpBitsError::FaultBitOutOfRange {
            bit: fault.bit,
            format,
            mantissa: format.mantissa_bits(),
        });
    }
    Ok(())
}

/// All-ones exponent means Inf or NaN.
#[inline]
pub fn raw_is_finite(raw: u64, format: PrecisionFormat) -> bool {
    let exp = format.exponent_mask();
    raw & exp != exp
}

/// Clears the `omitted` low mantissa bits of a raw encoding. The caller has
/// already range-checked `omitted`.
#[inline]
pub fn clear_low_bits(raw: u64, format: PrecisionFormat, omitted: u32) -> u64 {
    if omitted == 0 || !raw_is_finite(raw, format) {
        return raw;
    }
    raw & !((1u64 << omitted) - 1)
}

/// Forces one mantissa bit of a raw encoding. The caller has already
/// range-checked the fault.
#[inline]
pub fn force_bit(raw: u64, format: PrecisionFormat, fault: MantissaFault) -> u64 {
    if !raw_is_finite(raw, format) {
        return raw;
    }
    let mask = 1u64 << fault.bit;
    match fault.polarity {
        Polarity::StuckAt0 => raw & !mask,
        Polarity::StuckAt1 => raw | mask,
    }
}

/// Drops the `omitted` least-significant mantissa bits of `x` (round toward
/// zero at the reduced width).
pub fn truncate_mantissa<F: IeeeFloat>(x: F, omitted: u32) -> Result<F, FpBitsError> {
    check_omission(F::FORMAT, omitted)?;
    Ok(F::from_raw(clear_low_bits(x.to_raw(), F::FORMAT, omitted)))
}

pub fn inject_fault<F: IeeeFloat>(x: F, fault: MantissaFault) -> Result<F, FpBitsError> {
    check_fault(F::FORMAT, fault)?;
    Ok(F::from_raw(force_bit(x.to_raw(), F::FORMAT, fault)))
}

/// True iff every element is finite (no Inf, no NaN).
pub fn is_result_valid(values: &[f64]) -> bool {
    values.iter().all(|v| v.is_finite())
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn format_layout() {
        for fmt in [PrecisionFormat::Single, PrecisionFormat::Double] {
            assert_eq!(fmt.mantissa_bits() + fmt.exponent_bits() + 1, fmt.total_bits());
        }
        assert_eq!(PrecisionFormat::Single.mantissa_bits(), 23);
        assert_eq!(PrecisionFormat::Double.mantissa_bits(), 52);
    }

    #[test]
    fn truncate_examples() {
        assert_eq!(truncate_mantissa(1.0f32, 23).unwrap(), 1.0);
        assert_eq!(truncate_mantissa(1.5f32, 22).unwrap(), 1.5);
        // 0x40490FDB with every mantissa bit cleared is 0x40000000.
        let pi = f32::from_bits(0x4049_0FDB);
        assert_eq!(pi, std::f32::consts::PI);
        assert_eq!(truncate_mantissa(pi, 23).unwrap().to_bits(), 0x4000_0000);
        assert_eq!(truncate_mantissa(pi, 23).unwrap(), 2.0);
    }

    #[test]
    fn truncate_rejects_out_of_range() {
        assert!(matches!(
            truncate_mantissa(1.0f32, 24),
            Err(FpBitsError::OmissionOutOfRange { omitted: 24, .. })
        ));
        assert!(truncate_mantissa(1.0f64, 52).is_ok());
        assert!(truncate_mantissa(1.0f64, 53).is_err());
    }

    #[test]
    fn fault_examples() {
        let f = |bit, polarity| MantissaFault::new(bit, polarity);
        assert_eq!(inject_fault(1.0f32, f(22, Polarity::StuckAt1)).unwrap(), 1.5);
        assert_eq!(inject_fault(1.5f32, f(22, Polarity::StuckAt0)).unwrap(), 1.0);
        let lsb = inject_fault(1.0f32, f(0, Polarity::StuckAt1)).unwrap();
        assert_eq!(lsb.to_bits(), 0x3F80_0001);
        assert_eq!(lsb, 1.0 + f32::EPSILON);
        assert!(inject_fault(1.0f32, f(23, Polarity::StuckAt1)).is_err());
    }

    #[test]
    fn non_finite_pass_through() {
        for x in [f32::INFINITY, f32::NEG_INFINITY, f32::NAN] {
            let t = truncate_mantissa(x, 23).unwrap();
            assert_eq!(t.to_bits(), x.to_bits());
            let g = inject_fault(x, MantissaFault::new(3, Polarity::StuckAt1)).unwrap();
            assert_eq!(g.to_bits(), x.to_bits());
        }
    }

    #[test]
    fn subnormals_are_cleared_like_normals() {
        let tiny = f32::from_bits(0x0000_00FF);
        assert_eq!(truncate_mantissa(tiny, 4).unwrap().to_bits(), 0x0000_00F0);
        assert_eq!(truncate_mantissa(tiny, 8).unwrap(), 0.0);
    }

    #[test]
    fn validity() {
        assert!(is_result_valid(&[1.0, 2.0]));
        assert!(!is_result_valid(&[1.0, f64::NAN]));
        assert!(!is_result_valid(&[f64::INFINITY]));
        assert!(is_result_valid(&[]));
    }

    proptest! {
        #[test]
        fn truncation_preserves_sign_and_exponent(raw in any::<u32>(), k in 0u32..=23) {
            let x = f32::from_bits(raw);
            prop_assume!(x.is_finite());
            let t = truncate_mantissa(x, k).unwrap();
            prop_assert_eq!(t.to_bits() >> 23, raw >> 23);
            prop_assert!(t.abs() <= x.abs());
        }

        #[test]
        fn truncation_nests(raw in any::<u64>(), a in 0u32..=52, b in 0u32..=52) {
            let x = f64::from_bits(raw);
            let (lo, hi) = (a.min(b), a.max(b));
            let once = truncate_mantissa(x, hi).unwrap();
            let twice = truncate_mantissa(truncate_mantissa(x, lo).unwrap(), hi).unwrap();
            prop_assert_eq!(once.to_bits(), twice.to_bits());
            let again = truncate_mantissa(once, hi).unwrap();
            prop_assert_eq!(once.to_bits(), again.to_bits());
        }

        #[test]
        fn fault_is_idempotent(raw in any::<u32>(), bit in 0u32..23, one in any::<bool>()) {
            let x = f32::from_bits(raw);
            let fault = MantissaFault::new(bit, if one { Polarity::StuckAt1 } else { Polarity::StuckAt0 });
            let a = inject_fault(x, fault).unwrap();
            let b = inject_fault(a, fault).unwrap();
            prop_assert_eq!(a.to_bits(), b.to_bits());
            if x.is_finite() {
                prop_assert_eq!(a.to_bits() & !(1u32 << bit), raw & !(1u32 << bit));
            }
        }
    }
}
