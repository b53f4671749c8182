//! Packed binary container for toggle matrices.
//!
//! Layout, all integers little-endian:
//!
//! ```text
//! "PTRC"                       magic
//! u32   version (= 1)
//! u64   n_cycles
//! u64   n_signals
//! per signal:
//!   u32 name_len, UTF-8 name
//!   u8  kind tag: 0 single-bit | 1 bus | 2 gated clock
//!       tag 1: u32 source bus width
//!       tag 2: u32 enable_len, UTF-8 enable name
//! per cycle: ceil(n_signals / 64) u64 words, bit j of the cycle stored at
//!   word j / 64, bit position j % 64
//! optional power block: "PWRF", then n_cycles f64 values
//! u32   CRC-32 (IEEE) of every preceding byte
//! ```
//!
//! The word layout matches [`ToggleMatrix`]'s in-memory rows, so cycles are
//! written and read without re-packing.

use std::io::{Read, Write};
use std::path::Path;

use crate::error::{Error, Result};
use crate::trace::{PowerTrace, SignalCatalog, SignalKind, SignalSpec, ToggleMatrix};

const MAGIC: &[u8; 4] = b"PTRC";
const POWER_MAGIC: &[u8; 4] = b"PWRF";
const VERSION: u32 = 1;

const TAG_SINGLE_BIT: u8 = 0;
const TAG_BUS: u8 = 1;
const TAG_GATED_CLOCK: u8 = 2;

/// Serialize a catalog, its toggle matrix, and optionally an aligned power
/// trace. The stream ends with a CRC-32 of everything written before it.
pub fn write_ptrc<W: Write>(
    writer: W,
    catalog: &SignalCatalog,
    matrix: &ToggleMatrix,
    power: Option<&PowerTrace>,
) -> Result<()> {
    if matrix.n_signals() != catalog.len() {
        return Err(Error::param(format!(
            "matrix has {} signals, catalog describes {}",
            matrix.n_signals(),
            catalog.len()
        )));
    }
    if let Some(p) = power {
        if p.len() != matrix.n_cycles() {
            return Err(Error::param(format!(
                "power trace has {} cycles, matrix has {}",
                p.len(),
                matrix.n_cycles()
            )));
        }
    }
    let mut w = CrcWriter { inner: writer, hasher: crc32fast::Hasher::new() };
    w.write_all(MAGIC)?;
    w.write_all(&VERSION.to_le_bytes())?;
    w.write_all(&(matrix.n_cycles() as u64).to_le_bytes())?;
    w.write_all(&(matrix.n_signals() as u64).to_le_bytes())?;
    for spec in catalog.iter() {
        write_str(&mut w, &spec.name)?;
        match &spec.kind {
            SignalKind::SingleBit => w.write_all(&[TAG_SINGLE_BIT])?,
            SignalKind::Bus { width } => {
                w.write_all(&[TAG_BUS])?;
                w.write_all(&width.to_le_bytes())?;
            }
            SignalKind::GatedClock { enable } => {
                w.write_all(&[TAG_GATED_CLOCK])?;
                write_str(&mut w, enable)?;
            }
        }
    }
    for cycle in 0..matrix.n_cycles() {
        for &word in matrix.row_words(cycle) {
            w.write_all(&word.to_le_bytes())?;
        }
    }
    if let Some(p) = power {
        w.write_all(POWER_MAGIC)?;
        for &v in p.values() {
            w.write_all(&v.to_le_bytes())?;
        }
    }
    let crc = w.hasher.finalize();
    w.inner.write_all(&crc.to_le_bytes())?;
    w.inner.flush()?;
    Ok(())
}

/// Read a container produced by [`write_ptrc`], verifying the checksum and
/// every structural invariant before any value is trusted.
pub fn read_ptrc<R: Read>(mut reader: R) -> Result<(SignalCatalog, ToggleMatrix, Option<PowerTrace>)> {
    let mut buf = Vec::new();
    reader.read_to_end(&mut buf)?;
    if buf.len() < MAGIC.len() + 4 {
        return Err(Error::format("truncated trace container"));
    }
    let (body, crc_bytes) = buf.split_at(buf.len() - 4);
    let stored = u32::from_le_bytes(crc_bytes.try_into().unwrap());
    let actual = crc32fast::hash(body);
    if stored != actual {
        return Err(Error::format(format!(
            "checksum mismatch: stored {stored:#010x}, computed {actual:#010x}"
        )));
    }

    let mut c = Cursor { buf: body, pos: 0 };
    if c.take(4)? != MAGIC {
        return Err(Error::format("not a toggle trace container (bad magic)"));
    }
    let version = c.u32()?;
    if version != VERSION {
        return Err(Error::format(format!(
            "unsupported container version {version} (expected {VERSION})"
        )));
    }
    let n_cycles = c.u64()? as usize;
    let n_signals = c.u64()? as usize;
    let mut specs = Vec::with_capacity(n_signals.min(1 << 20));
    for _ in 0..n_signals {
        let name = c.string()?;
        let spec = match c.u8()? {
            TAG_SINGLE_BIT => SignalSpec::single_bit(name),
            TAG_BUS => SignalSpec::bus(name, c.u32()?),
            TAG_GATED_CLOCK => SignalSpec::gated_clock(name, c.string()?),
            tag => return Err(Error::format(format!("unknown signal kind tag {tag}"))),
        };
        specs.push(spec);
    }
    let catalog = SignalCatalog::new(specs)
        .map_err(|e| Error::format(format!("container catalog invalid: {e}")))?;

    let words_per_cycle = n_signals.div_ceil(64);
    let row_bytes = n_cycles
        .checked_mul(words_per_cycle)
        .and_then(|w| w.checked_mul(8))
        .ok_or_else(|| Error::format("container cycle count overflows"))?;
    if c.remaining() < row_bytes {
        return Err(Error::format("truncated trace container"));
    }
    let mut matrix = ToggleMatrix::new(n_cycles, n_signals);
    for cycle in 0..n_cycles {
        let row = matrix.row_words_mut(cycle);
        for w in row.iter_mut().take(words_per_cycle) {
            *w = c.u64()?;
        }
    }
    // Reject set bits beyond the declared signal count.
    if n_signals % 64 != 0 && n_cycles > 0 {
        let mask = !0u64 << (n_signals % 64);
        for cycle in 0..n_cycles {
            let last = *matrix.row_words(cycle).last().unwrap();
            if last & mask != 0 {
                return Err(Error::format(format!(
                    "cycle {cycle} sets bits past the declared {n_signals} signals"
                )));
            }
        }
    }

    let power = if c.remaining() > 0 && c.peek(4)? == POWER_MAGIC {
        c.take(4)?;
        let mut values = Vec::with_capacity(n_cycles);
        for _ in 0..n_cycles {
            values.push(c.f64()?);
        }
        Some(
            PowerTrace::new(values)
                .map_err(|e| Error::format(format!("container power trace invalid: {e}")))?,
        )
    } else {
        None
    };
    if c.remaining() != 0 {
        return Err(Error::format(format!(
            "{} unexpected trailing bytes in container",
            c.remaining()
        )));
    }
    Ok((catalog, matrix, power))
}

/// File convenience wrapper around [`write_ptrc`].
pub fn write_ptrc_file(
    path: impl AsRef<Path>,
    catalog: &SignalCatalog,
    matrix: &ToggleMatrix,
    power: Option<&PowerTrace>,
) -> Result<()> {
    let file = std::fs::File::create(path)?;
    write_ptrc(std::io::BufWriter::new(file), catalog, matrix, power)
}

/// File convenience wrapper around [`read_ptrc`].
pub fn read_ptrc_file(
    path: impl AsRef<Path>,
) -> Result<(SignalCatalog, ToggleMatrix, Option<PowerTrace>)> {
    let file = std::fs::File::open(path)?;
    read_ptrc(std::io::BufReader::new(file))
}

fn write_str<W: Write>(w: &mut W, s: &str) -> Result<()> {
    let len = u32::try_from(s.len())
        .map_err(|_| Error::param(format!("name of {} bytes is too long", s.len())))?;
    w.write_all(&len.to_le_bytes())?;
    w.write_all(s.as_bytes())?;
    Ok(())
}

struct CrcWriter<W: Write> {
    inner: W,
    hasher: crc32fast::Hasher,
}

impl<W: Write> Write for CrcWriter<W> {
    fn write(&mut self, buf: &[u8]) -> std::io::Result<usize> {
        let n = self.inner.write(buf)?;
        self.hasher.update(&buf[..n]);
        Ok(n)
    }

    fn flush(&mut self) -> std::io::Result<()> {
        self.inner.flush()
    }
}

struct Cursor<'a> {
    buf: &'a [u8],
    pos: usize,
}

impl<'a> Cursor<'a> {
    fn remaining(&self) -> usize {
        self.buf.len() - self.pos
    }

    fn take(&mut self, n: usize) -> Result<&'a [u8]> {
        if self.remaining() < n {
            return Err(Error::format("truncated trace container"));
        }
        let out = &self.buf[self.pos..self.pos + n];
        self.pos += n;
        Ok(out)
    }

    fn peek(&self, n: usize) -> Result<&'a [u8]> {
        if self.remaining() < n {
            return Err(Error::format("truncated trace container"));
        }
        Ok(&self.buf[self.pos..self.pos + n])
    }

    fn u8(&mut self) -> Result<u8> {
        Ok(self.take(1)?[0])
    }

    fn u32(&mut self) -> Result<u32> {
        Ok(u32::from_le_bytes(self.take(4)?.try_into().unwrap()))
    }

    fn u64(&mut self) -> Result<u64> {
        Ok(u64::from_le_bytes(self.take(8)?.try_into().unwrap()))
    }

    fn f64(&mut self) -> Result<f64> {
        Ok(f64::from_le_bytes(self.take(8)?.try_into().unwrap()))
    }

    fn string(&mut self) -> Result<String> {
        let len = self.u32()? as usize;
        let bytes = self.take(len)?;
        String::from_utf8(bytes.to_vec())
            .map_err(|_| Error::format("signal name is not valid UTF-8"))
    }
}
