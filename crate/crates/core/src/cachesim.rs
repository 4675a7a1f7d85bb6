//! Two-level inclusive data-cache model used to classify memory operands.
//!
//! Every tracked load or store goes through [`CacheHierarchy::access`], which
//! answers with the operand-source category used by the energy model.

use std::fmt;

use serde::{Deserialize, Serialize};
use thiserror::Error;

/// Where an instruction's operand comes from. One row of the EPI table each.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum OperandCategory {
    Rf,
    L1,
    L2,
    MemRd,
    MemWr,
}

impl OperandCategory {
    pub const ALL: [OperandCategory; 5] = [
        OperandCategory::Rf,
        OperandCategory::L1,
        OperandCategory::L2,
        OperandCategory::MemRd,
        OperandCategory::MemWr,
    ];

    #[inline]
    pub const fn index(self) -> usize {
        self as usize
    }

    pub const fn name(self) -> &'static str {
        match self {
            OperandCategory::Rf => "rf",
            OperandCategory::L1 => "l1",
            OperandCategory::L2 => "l2",
            OperandCategory::MemRd => "mem_rd",
            OperandCategory::MemWr => "mem_wr",
        }
    }
}

impl fmt::Display for OperandCategory {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct CacheConfig {
    pub l1_size: usize,
    pub l2_size: usize,
    pub line_size: usize,
    pub l1_assoc: usize,
    pub l2_assoc: usize,
}

impl Default for CacheConfig {
    fn default() -> Self {
        Self {
            l1_size: 32 * 1024,
            l2_size: 512 * 1024,
            line_size: 64,
            l1_assoc: 8,
            l2_assoc: 16,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum CacheConfigError {
    #[error("line size must be a non-zero power of two, got {0}")]
    LineSize(usize),
    #[error("{level} associativity must be non-zero")]
    ZeroAssoc { level: &'static str },
    #[error("{level} size {size} is not a positive multiple of line_size x assoc ({unit})")]
    Geometry {
        level: &'static str,
        size: usize,
        unit: usize,
    },
    #[error("L2 ({l2} B) must be larger than L1 ({l1} B)")]
    NotLarger { l1: usize, l2: usize },
}

impl CacheConfig {
    pub fn validate(&self) -> Result<(), CacheConfigError> {
        if self.line_size == 0 || !self.line_size.is_power_of_two() {
            return Err(CacheConfigError::LineSize(self.line_size));
        }
        for (level, size, assoc) in [
            ("L1", self.l1_size, self.l1_assoc),
            ("L2", self.l2_size, self.l2_assoc),
        ] {
            if assoc == 0 {
                return Err(CacheConfigError::ZeroAssoc { level });
            }
            let unit = self.line_size * assoc;
            if size == 0 || size % unit != 0 {
                return Err(CacheConfigError::Geometry { level, size, unit });
            }
        }
        if self.l2_size <= self.l1_size {
            return Err(CacheConfigError::NotLarger {
                l1: self.l1_size,
                l2: self.l2_size,
            });
        }
        Ok(())
    }

    pub fn l1_sets(&self) -> usize {
        self.l1_size / (self.line_size * self.l1_assoc)
    }

    pub fn l2_sets(&self) -> usize {
        self.l2_size / (self.line_size * self.l2_assoc)
    }
}

#[derive(Debug, Clone, Copy, Default)]
struct Way {
    line: u64,
    valid: bool,
    last_used: u64,
}

/// One set-associative LRU level keyed by line address.
#[derive(Debug, Clone)]
struct Level {
    ways: Vec<Way>,
    num_sets: usize,
    assoc: usize,
}

impl Level {
    fn new(num_sets: usize, assoc: usize) -> Self {
        Self {
            ways: vec![Way::default(); num_sets * assoc],
            num_sets,
            assoc,
        }
    }

    fn set_mut(&mut self, line: u64) -> &mut [Way] {
        let set = (line % self.num_sets as u64) as usize;
        &mut self.ways[set * self.assoc..(set + 1) * self.assoc]
    }

    fn set(&self, line: u64) -> &[Way] {
        let set = (line % self.num_sets as u64) as usize;
        &self.ways[set * self.assoc..(set + 1) * self.assoc]
    }

    fn contains(&self, line: u64) -> bool {
        self.set(line).iter().any(|w| w.valid && w.line == line)
    }

    /// Looks the line up and refreshes its LRU stamp on a hit.
    fn touch(&mut self, line: u64, now: u64) -> bool {
        match self.set_mut(line).iter_mut().find(|w| w.valid && w.line == line) {
            Some(way) => {
                way.last_used = now;
                true
            }
            None => false,
        }
    }

    /// Installs a line that is known to be absent; returns the evicted line.
    fn fill(&mut self, line: u64, now: u64) -> Option<u64> {
        let set = self.set_mut(line);
        let slot = match set.iter().position(|w| !w.valid) {
            Some(free) => free,
            None => set
                .iter()
                .enumerate()
                .min_by_key(|(_, w)| w.last_used)
                .map(|(i, _)| i)
                .expect("associativity is non-zero"),
        };
        let victim = set[slot].valid.then_some(set[slot].line);
        set[slot] = Way {
            line,
            valid: true,
            last_used: now,
        };
        victim
    }

    fn invalidate(&mut self, line: u64) {
        if let Some(way) = self.set_mut(line).iter_mut().find(|w| w.valid && w.line == line) {
            way.valid = false;
        }
    }

    fn resident(&self) -> impl Iterator<Item = u64> + '_ {
        self.ways.iter().filter(|w| w.valid).map(|w| w.line)
    }

    fn clear(&mut self) {
        self.ways.fill(Way::default());
    }
}

/// Inclusive, write-allocate L1/L2 hierarchy with LRU replacement and no
/// prefetcher.
#[derive(Debug, Clone)]
pub struct CacheHierarchy {
    config: CacheConfig,
    line_shift: u32,
    l1: Level,
    l2: Level,
    clock: u64,
    stats: [u64; 5],
}

impl CacheHierarchy {
    pub fn new(config: CacheConfig) -> Result<Self, CacheConfigError> {
        config.validate()?;
        Ok(Self {
            line_shift: config.line_size.trailing_zeros(),
            l1: Level::new(config.l1_sets(), config.l1_assoc),
            l2: Level::new(config.l2_sets(), config.l2_assoc),
            config,
            clock: 0,
            stats: [0; 5],
        })
    }

    pub fn config(&self) -> &CacheConfig {
        &self.config
    }

    pub fn access(&mut self, addr: u64, is_write: bool) -> OperandCategory {
        self.clock += 1;
        let now = self.clock;
        let line = addr >> self.line_shift;

        let category = if self.l1.touch(line, now) {
            OperandCategory::L1
        } else if self.l2.touch(line, now) {
            self.l1.fill(line, now);
            OperandCategory::L2
        } else {
            if let Some(victim) = self.l2.fill(line, now) {
                // back-invalidate to keep L1 a subset of L2
                self.l1.invalidate(victim);
            }
            self.l1.fill(line, now);
            if is_write {
                OperandCategory::MemWr
            } else {
                OperandCategory::MemRd
            }
        };
        self.stats[category.index()] += 1;
        category
    }

    pub fn reset(&mut self) {
        self.l1.clear();
        self.l2.clear();
        self.clock = 0;
        self.stats = [0; 5];
    }

    /// Number of accesses answered with `category` since the last reset.
    pub fn count(&self, category: OperandCategory) -> u64 {
        self.stats[category.index()]
    }

    pub fn total_accesses(&self) -> u64 {
        self.stats.iter().sum()
    }

    /// Checks that every line resident in L1 is also resident in L2.
    pub fn audit_inclusion(&self) -> bool {
        self.l1.resident().all(|line| self.l2.contains(line))
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn default_sim() -> CacheHierarchy {
        CacheHierarchy::new(CacheConfig::default()).unwrap()
    }

    #[test]
    fn default_geometry() {
        let cfg = CacheConfig::default();
        cfg.validate().unwrap();
        assert_eq!(cfg.l1_sets(), 64);
        assert_eq!(cfg.l2_sets(), 512);
    }

    #[test]
    fn rejects_bad_configs() {
        let base = CacheConfig::default();
        let cases = [
            CacheConfig { line_size: 48, ..base },
            CacheConfig { l1_assoc: 0, ..base },
            CacheConfig { l1_size: 1000, ..base },
            CacheConfig { l2_size: base.l1_size, ..base },
        ];
        for cfg in cases {
            assert!(CacheHierarchy::new(cfg).is_err(), "{cfg:?}");
        }
    }

    #[test]
    fn cold_then_hot() {
        let mut sim = default_sim();
        assert_eq!(sim.access(0x1000, false), OperandCategory::MemRd);
        assert_eq!(sim.access(0x1000, false), OperandCategory::L1);
        assert_eq!(sim.access(0x1008, false), OperandCategory::L1);
        assert_eq!(sim.access(0x9000, true), OperandCategory::MemWr);
        assert_eq!(sim.access(0x9000, true), OperandCategory::L1);
    }

    #[test]
    fn l1_conflict_eviction_hits_l2() {
        let mut sim = default_sim();
        let cfg = *sim.config();
        let stride = (cfg.l1_sets() * cfg.line_size) as u64;
        for i in 0..=cfg.l1_assoc as u64 {
            assert_eq!(sim.access(i * stride, false), OperandCategory::MemRd);
        }
        assert_eq!(sim.access(0, false), OperandCategory::L2);
        assert!(sim.audit_inclusion());
    }

    #[test]
    fn reset_clears_everything() {
        let mut sim = default_sim();
        sim.access(64, false);
        sim.access(64, false);
        sim.reset();
        assert_eq!(sim.total_accesses(), 0);
        for cat in OperandCategory::ALL {
            assert_eq!(sim.count(cat), 0);
        }
        sim.reset();
        assert_eq!(sim.access(64, false), OperandCategory::MemRd);
    }

    #[test]
    fn second_pass_over_small_buffer_hits_l1() {
        let mut sim = default_sim();
        let bytes = 16 * 1024u64;
        let accesses = bytes / 4;
        for addr in (0..bytes).step_by(4) {
            sim.access(addr, false);
        }
        let before = sim.count(OperandCategory::L1);
        for addr in (0..bytes).step_by(4) {
            sim.access(addr, false);
        }
        let hits = sim.count(OperandCategory::L1) - before;
        let lines = bytes / 64;
        assert!(hits as f64 / accesses as f64 >= 1.0 - lines as f64 / accesses as f64);
        assert_eq!(hits, accesses);
    }

    fn tiny() -> CacheConfig {
        CacheConfig {
            l1_size: 256,
            l2_size: 1024,
            line_size: 32,
            l1_assoc: 2,
            l2_assoc: 4,
        }
    }

    proptest! {
        #[test]
        fn inclusion_and_determinism(ops in proptest::collection::vec((0u64..4096, any::<bool>()), 1..400)) {
            let mut a = CacheHierarchy::new(tiny()).unwrap();
            let mut b = CacheHierarchy::new(tiny()).unwrap();
            for &(addr, w) in &ops {
                let ca = a.access(addr, w);
                prop_assert_eq!(ca, b.access(addr, w));
                prop_assert!(a.audit_inclusion());
            }
            prop_assert_eq!(a.total_accesses(), ops.len() as u64);
        }
    }
}
