//! Signal catalogs, per-cycle toggle matrices, and power traces.
//!
//! A toggle matrix is the central data structure of the toolkit: one row per
//! clock cycle, one column per catalog entry, bit `(i, j)` set when signal
//! `j` changed value going into cycle `i`. Multi-bit buses are collapsed to a
//! single activity column at ingestion time, and gated clocks contribute a
//! latched-enable activity column instead of a raw value-change column.

pub mod ptrc;
pub mod vcd;

use std::collections::HashMap;
use std::io::Write;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// How a catalog entry turns into one toggle column.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum SignalKind {
    /// One-bit net; the column is its per-cycle value-change indicator.
    SingleBit,
    /// Multi-bit net; per-bit change indicators are OR-collapsed into one column.
    Bus { width: u32 },
    /// Clock gate; the column is the named enable net, latched once per cycle.
    GatedClock { enable: String },
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct SignalSpec {
    pub name: String,
    #[serde(flatten)]
    pub kind: SignalKind,
}

impl SignalSpec {
    pub fn single_bit(name: impl Into<String>) -> Self {
        SignalSpec { name: name.into(), kind: SignalKind::SingleBit }
    }

    pub fn bus(name: impl Into<String>, width: u32) -> Self {
        SignalSpec { name: name.into(), kind: SignalKind::Bus { width } }
    }

    pub fn gated_clock(name: impl Into<String>, enable: impl Into<String>) -> Self {
        SignalSpec { name: name.into(), kind: SignalKind::GatedClock { enable: enable.into() } }
    }
}

/// Ordered list of monitored signals; column `j` of a toggle matrix belongs
/// to entry `j`. Names are unique and non-empty, bus widths are at least 2.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(try_from = "Vec<SignalSpec>", into = "Vec<SignalSpec>")]
pub struct SignalCatalog {
    signals: Vec<SignalSpec>,
}

impl SignalCatalog {
    pub fn new(signals: Vec<SignalSpec>) -> Result<Self> {
        let mut seen = HashMap::with_capacity(signals.len());
        for (j, spec) in signals.iter().enumerate() {
            if spec.name.is_empty() {
                return Err(Error::data(format!("catalog entry {j} has an empty name")));
            }
            if let Some(prev) = seen.insert(spec.name.as_str(), j) {
                return Err(Error::data(format!(
                    "duplicate signal name {:?} (entries {prev} and {j})",
                    spec.name
                )));
            }
            if let SignalKind::Bus { width } = spec.kind {
                if width < 2 {
                    return Err(Error::data(format!(
                        "bus {:?} declared with width {width}; buses are at least 2 bits",
                        spec.name
                    )));
                }
            }
        }
        Ok(SignalCatalog { signals })
    }

    pub fn len(&self) -> usize {
        self.signals.len()
    }

    pub fn is_empty(&self) -> bool {
        self.signals.is_empty()
    }

    pub fn get(&self, j: usize) -> Option<&SignalSpec> {
        self.signals.get(j)
    }

    pub fn iter(&self) -> std::slice::Iter<'_, SignalSpec> {
        self.signals.iter()
    }

    pub fn names(&self) -> Vec<String> {
        self.signals.iter().map(|s| s.name.clone()).collect()
    }

    pub fn position(&self, name: &str) -> Option<usize> {
        self.signals.iter().position(|s| s.name == name)
    }
}

impl TryFrom<Vec<SignalSpec>> for SignalCatalog {
    type Error = Error;

    fn try_from(signals: Vec<SignalSpec>) -> Result<Self> {
        SignalCatalog::new(signals)
    }
}

impl From<SignalCatalog> for Vec<SignalSpec> {
    fn from(c: SignalCatalog) -> Vec<SignalSpec> {
        c.signals
    }
}

/// Dense bit matrix of per-cycle activity, packed row-major into 64-bit
/// words (bit `j` of a row lives in word `j / 64`, position `j % 64`).
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ToggleMatrix {
    n_cycles: usize,
    n_signals: usize,
    words_per_cycle: usize,
    bits: Vec<u64>,
}

impl ToggleMatrix {
    pub fn new(n_cycles: usize, n_signals: usize) -> Self {
        let words_per_cycle = n_signals.div_ceil(64);
        ToggleMatrix {
            n_cycles,
            n_signals,
            words_per_cycle,
            bits: vec![0; n_cycles * words_per_cycle],
        }
    }

    pub fn n_cycles(&self) -> usize {
        self.n_cycles
    }

    pub fn n_signals(&self) -> usize {
        self.n_signals
    }

    #[inline]
    pub fn get(&self, cycle: usize, signal: usize) -> bool {
        debug_assert!(cycle < self.n_cycles && signal < self.n_signals);
        let word = self.bits[cycle * self.words_per_cycle + signal / 64];
        (word >> (signal % 64)) & 1 == 1
    }

    #[inline]
    pub fn set(&mut self, cycle: usize, signal: usize, value: bool) {
        debug_assert!(cycle < self.n_cycles && signal < self.n_signals);
        let word = &mut self.bits[cycle * self.words_per_cycle + signal / 64];
        let mask = 1u64 << (signal % 64);
        if value {
            *word |= mask;
        } else {
            *word &= !mask;
        }
    }

    pub(crate) fn row_words(&self, cycle: usize) -> &[u64] {
        let start = cycle * self.words_per_cycle;
        &self.bits[start..start + self.words_per_cycle]
    }

    pub(crate) fn row_words_mut(&mut self, cycle: usize) -> &mut [u64] {
        let start = cycle * self.words_per_cycle;
        &mut self.bits[start..start + self.words_per_cycle]
    }

    /// Build from per-signal boolean columns (all the same length).
    pub fn from_columns(columns: &[Vec<bool>]) -> Result<Self> {
        let n_cycles = columns.first().map_or(0, |c| c.len());
        for (j, col) in columns.iter().enumerate() {
            if col.len() != n_cycles {
                return Err(Error::data(format!(
                    "column {j} has {} cycles, expected {n_cycles}",
                    col.len()
                )));
            }
        }
        let mut m = ToggleMatrix::new(n_cycles, columns.len());
        for (j, col) in columns.iter().enumerate() {
            for (i, &b) in col.iter().enumerate() {
                if b {
                    m.set(i, j, true);
                }
            }
        }
        Ok(m)
    }

    /// Row indices (cycles) at which column `signal` is set, ascending.
    pub fn column_positions(&self, signal: usize) -> Vec<u32> {
        let mut out = Vec::new();
        for i in 0..self.n_cycles {
            if self.get(i, signal) {
                out.push(i as u32);
            }
        }
        out
    }

    /// `column_positions` for every column in one row-major scan.
    pub fn column_positions_all(&self) -> Vec<Vec<u32>> {
        let mut cols: Vec<Vec<u32>> = vec![Vec::new(); self.n_signals];
        for i in 0..self.n_cycles {
            for (w, &word) in self.row_words(i).iter().enumerate() {
                let mut rest = word;
                while rest != 0 {
                    let b = rest.trailing_zeros() as usize;
                    let j = w * 64 + b;
                    // The last word may carry padding bits beyond n_signals;
                    // they are never set, but guard anyway.
                    if j < self.n_signals {
                        cols[j].push(i as u32);
                    }
                    rest &= rest - 1;
                }
            }
        }
        cols
    }

    /// Copy of the matrix keeping only the given columns, in the given order.
    pub fn select_columns(&self, indices: &[usize]) -> Result<ToggleMatrix> {
        for &j in indices {
            if j >= self.n_signals {
                return Err(Error::data(format!(
                    "column index {j} out of range for {} signals",
                    self.n_signals
                )));
            }
        }
        let mut out = ToggleMatrix::new(self.n_cycles, indices.len());
        for i in 0..self.n_cycles {
            for (k, &j) in indices.iter().enumerate() {
                if self.get(i, j) {
                    out.set(i, k, true);
                }
            }
        }
        Ok(out)
    }

    /// Number of set bits in one column.
    pub fn column_count(&self, signal: usize) -> usize {
        (0..self.n_cycles).filter(|&i| self.get(i, signal)).count()
    }
}

/// Per-cycle (or per-window) power values; always finite.
#[derive(Debug, Clone, PartialEq)]
pub struct PowerTrace {
    values: Vec<f64>,
}

impl PowerTrace {
    pub fn new(values: Vec<f64>) -> Result<Self> {
        if let Some(i) = values.iter().position(|v| !v.is_finite()) {
            return Err(Error::data(format!("non-finite power value at index {i}")));
        }
        Ok(PowerTrace { values })
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn into_values(self) -> Vec<f64> {
        self.values
    }

    pub fn mean(&self) -> f64 {
        if self.values.is_empty() {
            0.0
        } else {
            self.values.iter().sum::<f64>() / self.values.len() as f64
        }
    }
}

/// Turn per-signal sampled values into a toggle matrix: bit `(i, j)` is set
/// when signal `j`'s sample at cycle `i` differs from its sample at cycle
/// `i - 1` (any change counts, including to or from unknown states). Cycle 0
/// has no predecessor and is always all-zero.
///
/// `samples` holds one vector per signal; all vectors must be the same
/// length. The value type only needs equality, so callers can use bools,
/// multi-state logic codes, or anything else with a consistent alphabet.
pub fn extract_toggles<T: PartialEq>(samples: &[Vec<T>]) -> Result<ToggleMatrix> {
    let n_cycles = samples.first().map_or(0, |s| s.len());
    for (j, s) in samples.iter().enumerate() {
        if s.len() != n_cycles {
            return Err(Error::data(format!(
                "signal {j} has {} samples, expected {n_cycles}",
                s.len()
            )));
        }
    }
    let mut m = ToggleMatrix::new(n_cycles, samples.len());
    for (j, s) in samples.iter().enumerate() {
        for i in 1..n_cycles {
            if s[i] != s[i - 1] {
                m.set(i, j, true);
            }
        }
    }
    Ok(m)
}

/// OR-collapse per-bit toggle columns of a bus into one activity column.
pub fn collapse_bus(bit_columns: &[Vec<bool>]) -> Result<Vec<bool>> {
    let first = bit_columns
        .first()
        .ok_or_else(|| Error::data("collapse_bus needs at least one bit column"))?;
    let n = first.len();
    for (b, col) in bit_columns.iter().enumerate() {
        if col.len() != n {
            return Err(Error::data(format!(
                "bus bit {b} has {} cycles, expected {n}",
                col.len()
            )));
        }
    }
    let mut out = vec![false; n];
    for col in bit_columns {
        for (o, &b) in out.iter_mut().zip(col.iter()) {
            *o |= b;
        }
    }
    Ok(out)
}

/// Which cycle a latched clock-gate enable applies to.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum GateConvention {
    /// The enable sampled at cycle `i` gates cycle `i` (default).
    #[default]
    SameCycle,
    /// The enable sampled at cycle `i` gates cycle `i + 1`; cycle 0 is idle.
    Delayed,
}

/// Map per-cycle latched enable states to a gated-clock activity column.
pub fn gated_clock_toggle(enable_asserted: &[bool], convention: GateConvention) -> Vec<bool> {
    match convention {
        GateConvention::SameCycle => enable_asserted.to_vec(),
        GateConvention::Delayed => {
            let mut out = vec![false; enable_asserted.len()];
            for i in 1..enable_asserted.len() {
                out[i] = enable_asserted[i - 1];
            }
            out
        }
    }
}

/// Debug CSV dump: `cycle,<signal...>[,power]` header, one row per cycle
/// with 0/1 activity bits.
pub fn write_csv<W: Write>(
    mut w: W,
    catalog: &SignalCatalog,
    matrix: &ToggleMatrix,
    power: Option<&PowerTrace>,
) -> Result<()> {
    if catalog.len() != matrix.n_signals() {
        return Err(Error::data(format!(
            "catalog has {} entries but matrix has {} columns",
            catalog.len(),
            matrix.n_signals()
        )));
    }
    if let Some(p) = power {
        if p.len() != matrix.n_cycles() {
            return Err(Error::data(format!(
                "power trace has {} values but matrix has {} cycles",
                p.len(),
                matrix.n_cycles()
            )));
        }
    }
    let mut header = String::from("cycle");
    for spec in catalog.iter() {
        header.push(',');
        header.push_str(&spec.name);
    }
    if power.is_some() {
        header.push_str(",power");
    }
    writeln!(w, "{header}")?;
    let mut line = String::new();
    for i in 0..matrix.n_cycles() {
        line.clear();
        line.push_str(&i.to_string());
        for j in 0..matrix.n_signals() {
            line.push(',');
            line.push(if matrix.get(i, j) { '1' } else { '0' });
        }
        if let Some(p) = power {
            line.push(',');
            line.push_str(&format!("{}", p.values()[i]));
        }
        writeln!(w, "{line}")?;
    }
    Ok(())
}
