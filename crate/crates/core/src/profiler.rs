//! Offline fault-injection campaign.
//!
//! For every dynamic call and every profiled mantissa bit, the workload is
//! re-executed twice: once with the bit stuck at 0 and once stuck at 1, the
//! fault live at every tracked site of that one call. The mean relative
//! error of each faulty output against the golden run becomes one entry of
//! the stuck-at-0 or stuck-at-1 accuracy-loss matrix. Runs whose output
//! contains Inf or NaN are recorded as invalid.

use std::fmt::Write as _;
use std::io;
use std::path::{Path, PathBuf};
use std::sync::atomic::{AtomicUsize, Ordering};

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};
use thiserror::Error;

use crate::cachesim::CacheConfig;
use crate::fpbits::{MantissaFault, Polarity, PrecisionFormat};
use crate::kernels::{self, Execution, Kernel};
use crate::metrics;
use crate::trace::{TraceError, Transformer};

/// One matrix cell.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub enum Entry {
    Valid(f64),
    Invalid,
}

impl Entry {
    /// Normalizes a raw loss: anything that is not a finite, non-negative
    /// number is invalid.
    pub fn from_loss(loss: f64) -> Self {
        if loss.is_finite() && loss >= 0.0 {
            Entry::Valid(loss)
        } else {
            Entry::Invalid
        }
    }

    pub fn loss(self) -> Option<f64> {
        match self {
            Entry::Valid(v) => Some(v),
            Entry::Invalid => None,
        }
    }
}

#[derive(Debug, Error)]
pub enum ProfileError {
    #[error("golden run produced a non-finite output; nothing to compare against")]
    GoldenNotFinite,
    #[error("cannot profile {requested} bits of a {available}-bit {format} mantissa")]
    TooManyBits {
        requested: u32,
        available: u32,
        format: PrecisionFormat,
    },
    #[error("partial results overlap at call {call}, bit {bit}, {polarity:?}")]
    Overlap {
        call: usize,
        bit: u32,
        polarity: Polarity,
    },
    #[error("no result for call {call}, bit {bit}, {polarity:?}")]
    Missing {
        call: usize,
        bit: u32,
        polarity: Polarity,
    },
    #[error("result key call {call}, bit {bit} is outside the {calls}x{bits} campaign")]
    OutOfRange {
        call: usize,
        bit: u32,
        calls: usize,
        bits: u32,
    },
    #[error("matrix shape mismatch: {0}")]
    Shape(String),
    #[error("{path}: {message}")]
    Format { path: PathBuf, message: String },
    #[error("cannot access {path}: {source}")]
    Io { path: PathBuf, source: io::Error },
    #[error(transparent)]
    Trace(#[from] TraceError),
}

/// Stuck-at-0 and stuck-at-1 accuracy-loss matrices, rows in execution order.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AccLossMatrices {
    num_bits: u32,
    static_fns: Vec<String>,
    s0: Vec<Vec<Entry>>,
    s1: Vec<Vec<Entry>>,
}

impl AccLossMatrices {
    pub fn new(
        static_fns: Vec<String>,
        num_bits: u32,
        s0: Vec<Vec<Entry>>,
        s1: Vec<Vec<Entry>>,
    ) -> Result<Self, ProfileError> {
        let calls = static_fns.len();
        if s0.len() != calls || s1.len() != calls {
            return Err(ProfileError::Shape(format!(
                "{calls} calls but {} stuck-at-0 rows and {} stuck-at-1 rows",
                s0.len(),
                s1.len()
            )));
        }
        if let Some((i, _)) = s0
            .iter()
            .chain(s1.iter())
            .enumerate()
            .find(|(_, row)| row.len() != num_bits as usize)
        {
            return Err(ProfileError::Shape(format!(
                "row {} does not have {num_bits} columns",
                i % calls.max(1)
            )));
        }
        let clean = |m: Vec<Vec<Entry>>| {
            m.into_iter()
                .map(|row| {
                    row.into_iter()
                        .map(|e| match e {
                            Entry::Valid(v) => Entry::from_loss(v),
                            Entry::Invalid => Entry::Invalid,
                        })
                        .collect()
                })
                .collect()
        };
        Ok(Self {
            num_bits,
            static_fns,
            s0: clean(s0),
            s1: clean(s1),
        })
    }

    /// Convenience for tests and tools: `None` marks an invalid entry.
    pub fn from_losses(
        static_fns: Vec<String>,
        s0: &[Vec<Option<f64>>],
        s1: &[Vec<Option<f64>>],
    ) -> Result<Self, ProfileError> {
        let conv = |m: &[Vec<Option<f64>>]| -> Vec<Vec<Entry>> {
            m.iter()
                .map(|row| row.iter().map(|e| e.map_or(Entry::Invalid, Entry::Valid)).collect())
                .collect()
        };
        let num_bits = s0.first().map_or(0, |r| r.len()) as u32;
        Self::new(static_fns, num_bits, conv(s0), conv(s1))
    }

    pub fn num_calls(&self) -> usize {
        self.static_fns.len()
    }

    pub fn num_bits(&self) -> u32 {
        self.num_bits
    }

    pub fn static_fns(&self) -> &[String] {
        &self.static_fns
    }

    pub fn get(&self, polarity: Polarity, call: usize, bit: u32) -> Entry {
        match polarity {
            Polarity::StuckAt0 => self.s0[call][bit as usize],
            Polarity::StuckAt1 => self.s1[call][bit as usize],
        }
    }

    /// Worse of the two polarities, or `None` if either is invalid.
    pub fn max_loss(&self, call: usize, bit: u32) -> Option<f64> {
        let a = self.s0[call][bit as usize].loss()?;
        let b = self.s1[call][bit as usize].loss()?;
        Some(a.max(b))
    }

    pub fn to_csv(&self, polarity: Polarity) -> String {
        let rows = match polarity {
            Polarity::StuckAt0 => &self.s0,
            Polarity::StuckAt1 => &self.s1,
        };
        let mut out = String::from("call,static_fn");
        for b in 0..self.num_bits {
            let _ = write!(out, ",bit{b}");
        }
        out.push('\n');
        for (i, row) in rows.iter().enumerate() {
            let _ = write!(out, "{i},{}", self.static_fns[i]);
            for e in row {
                match e {
                    Entry::Valid(v) => {
                        let _ = write!(out, ",{v:.16e}");
                    }
                    Entry::Invalid => out.push_str(",NA"),
                }
            }
            out.push('\n');
        }
        out
    }

    /// Parses the stuck-at-0 and stuck-at-1 CSV texts. `origin` only labels
    /// errors.
    pub fn from_csv(s0: &str, s1: &str, origin: &Path) -> Result<Self, ProfileError> {
        let (p0, p1) = matrix_paths(origin);
        let (fns0, m0) = parse_matrix_csv(s0, &p0)?;
        let (fns1, m1) = parse_matrix_csv(s1, &p1)?;
        if fns0 != fns1 {
            return Err(ProfileError::Shape(
                "stuck-at-0 and stuck-at-1 files describe different calls".into(),
            ));
        }
        let bits = m0.first().map_or(0, |r| r.len());
        Self::new(fns0, bits as u32, m0, m1)
    }

    pub fn write_files(&self, prefix: &Path) -> Result<(PathBuf, PathBuf), ProfileError> {
        let (p0, p1) = matrix_paths(prefix);
        for (path, pol) in [(&p0, Polarity::StuckAt0), (&p1, Polarity::StuckAt1)] {
            std::fs::write(path, self.to_csv(pol)).map_err(|source| ProfileError::Io {
                path: path.clone(),
                source,
            })?;
        }
        Ok((p0, p1))
    }

    pub fn read_files(prefix: &Path) -> Result<Self, ProfileError> {
        let (p0, p1) = matrix_paths(prefix);
        let read = |p: &PathBuf| {
            std::fs::read_to_string(p).map_err(|source| ProfileError::Io {
                path: p.clone(),
                source,
            })
        };
        Self::from_csv(&read(&p0)?, &read(&p1)?, prefix)
    }

    /// Short content hash of both matrices, used as schedule provenance.
    pub fn fingerprint(&self) -> String {
        let mut h = Sha256::new();
        h.update(self.to_csv(Polarity::StuckAt0).as_bytes());
        h.update(b"\0");
        h.update(self.to_csv(Polarity::StuckAt1).as_bytes());
        h.finalize().iter().take(8).map(|b| format!("{b:02x}")).collect()
    }
}

/// `<prefix>.s0.csv` and `<prefix>.s1.csv`.
pub fn matrix_paths(prefix: &Path) -> (PathBuf, PathBuf) {
    let with = |suffix: &str| {
        let mut s = prefix.as_os_str().to_owned();
        s.push(suffix);
        PathBuf::from(s)
    };
    (with(".s0.csv"), with(".s1.csv"))
}

type ParsedMatrix = (Vec<String>, Vec<Vec<Entry>>);

fn parse_matrix_csv(text: &str, path: &Path) -> Result<ParsedMatrix, ProfileError> {
    let bad = |message: String| ProfileError::Format {
        path: path.to_path_buf(),
        message,
    };
    let mut reader = csv::ReaderBuilder::new()
        .has_headers(true)
        .from_reader(text.as_bytes());
    let headers = reader.headers().map_err(|e| bad(e.to_string()))?.clone();
    if headers.len() < 2 || &headers[0] != "call" || &headers[1] != "static_fn" {
        return Err(bad("header must start with `call,static_fn`".into()));
    }
    for (b, h) in headers.iter().skip(2).enumerate() {
        if h != format!("bit{b}") {
            return Err(bad(format!("column {} should be `bit{b}`, found `{h}`", b + 2)));
        }
    }
    let mut fns = Vec::new();
    let mut rows = Vec::new();
    for (i, rec) in reader.records().enumerate() {
        let rec = rec.map_err(|e| bad(e.to_string()))?;
        let call: usize = rec[0]
            .trim()
            .parse()
            .map_err(|_| bad(format!("bad call index `{}`", &rec[0])))?;
        if call != i {
            return Err(bad(format!("row {i} is labelled call {call}; rows must be in order")));
        }
        fns.push(rec[1].to_owned());
        let row = rec
            .iter()
            .skip(2)
            .map(|cell| match cell.trim() {
                "NA" => Ok(Entry::Invalid),
                s => s
                    .parse::<f64>()
                    .map(Entry::from_loss)
                    .map_err(|_| bad(format!("call {i}: bad loss `{s}`"))),
            })
            .collect::<Result<Vec<_>, _>>()?;
        rows.push(row);
    }
    Ok((fns, rows))
}

/// Identifies one fault-injection experiment.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct ExperimentKey {
    pub call: usize,
    pub bit: u32,
    pub polarity: Polarity,
}

/// Results of a subset of experiments, produced by one worker.
#[derive(Debug, Clone, Default)]
pub struct PartialResult {
    pub entries: Vec<(ExperimentKey, Entry)>,
}

/// Assembles worker results into matrices. The outcome does not depend on
/// the order of `partials`; overlapping or missing keys are errors.
pub fn merge_results(
    static_fns: Vec<String>,
    num_bits: u32,
    partials: impl IntoIterator<Item = PartialResult>,
) -> Result<AccLossMatrices, ProfileError> {
    let calls = static_fns.len();
    let mut grid: [Vec<Vec<Option<Entry>>>; 2] =
        std::array::from_fn(|_| vec![vec![None; num_bits as usize]; calls]);
    for part in partials {
        for (key, entry) in part.entries {
            if key.call >= calls || key.bit >= num_bits {
                return Err(ProfileError::OutOfRange {
                    call: key.call,
                    bit: key.bit,
                    calls,
                    bits: num_bits,
                });
            }
            let slot = &mut grid[key.polarity as usize][key.call][key.bit as usize];
            if slot.is_some() {
                return Err(ProfileError::Overlap {
                    call: key.call,
                    bit: key.bit,
                    polarity: key.polarity,
                });
            }
            *slot = Some(entry);
        }
    }
    let [g0, g1] = grid;
    let finish = |g: Vec<Vec<Option<Entry>>>, polarity: Polarity| {
        g.into_iter()
            .enumerate()
            .map(|(call, row)| {
                row.into_iter()
                    .enumerate()
                    .map(|(bit, e)| {
                        e.ok_or(ProfileError::Missing {
                            call,
                            bit: bit as u32,
                            polarity,
                        })
                    })
                    .collect::<Result<Vec<_>, _>>()
            })
            .collect::<Result<Vec<_>, _>>()
    };
    let s0 = finish(g0, Polarity::StuckAt0)?;
    let s1 = finish(g1, Polarity::StuckAt1)?;
    AccLossMatrices::new(static_fns, num_bits, s0, s1)
}

#[derive(Debug, Clone, Copy)]
pub struct ProfileOptions {
    /// Bits to profile, from the least significant. `None` means the whole
    /// mantissa.
    pub num_bits: Option<u32>,
    pub parallel: bool,
}

impl Default for ProfileOptions {
    fn default() -> Self {
        Self {
            num_bits: None,
            parallel: true,
        }
    }
}

#[derive(Debug, Clone)]
pub struct Profile {
    pub matrices: AccLossMatrices,
    pub golden: Execution,
    /// Faulty executions performed (the golden run is not included).
    pub fault_runs: usize,
}

pub fn profile<K: Kernel>(
    kernel: &K,
    format: PrecisionFormat,
    options: ProfileOptions,
) -> Result<Profile, ProfileError> {
    let num_bits = options.num_bits.unwrap_or(format.mantissa_bits());
    if num_bits > format.mantissa_bits() {
        return Err(ProfileError::TooManyBits {
            requested: num_bits,
            available: format.mantissa_bits(),
            format,
        });
    }
    // cache behaviour does not affect values, so the default geometry is fine
    let cache = CacheConfig::default();
    let golden = kernels::execute(kernel, format, Transformer::Identity, cache)?;
    if !golden.output.is_valid() {
        return Err(ProfileError::GoldenNotFinite);
    }
    let static_fns = golden.trace.static_fns();
    let runs = AtomicUsize::new(0);

    let run_call = |call: usize| -> Result<PartialResult, ProfileError> {
        let mut entries = Vec::with_capacity(2 * num_bits as usize);
        for bit in 0..num_bits {
            for polarity in Polarity::BOTH {
                let fault = MantissaFault::new(bit, polarity);
                let faulty =
                    kernels::execute(kernel, format, Transformer::Fault { fault, call }, cache)?;
                runs.fetch_add(1, Ordering::Relaxed);
                let entry = if faulty.output.is_valid() {
                    let summary = metrics::mean_relative_error(
                        &faulty.output.values,
                        &golden.output.values,
                    )
                    .map_err(|e| ProfileError::Shape(e.to_string()))?;
                    Entry::from_loss(summary.mre)
                } else {
                    Entry::Invalid
                };
                entries.push((ExperimentKey { call, bit, polarity }, entry));
            }
        }
        Ok(PartialResult { entries })
    };

    let calls = static_fns.len();
    let partials: Vec<PartialResult> = if options.parallel {
        (0..calls).into_par_iter().map(run_call).collect::<Result<_, _>>()?
    } else {
        (0..calls).map(run_call).collect::<Result<_, _>>()?
    };
    let matrices = merge_results(static_fns, num_bits, partials)?;
    Ok(Profile {
        matrices,
        golden,
        fault_runs: runs.into_inner(),
    })
}
