//! Value-change-dump ingestion.
//!
//! Supports the subset of the format that matters for toggle extraction:
//! `$timescale`, `$scope`/`$upscope`, `$var wire|reg`, `$enddefinitions`,
//! `#<time>` stamps, `$dumpvars` blocks, scalar changes (`1a`) and vector
//! changes (`b0101 a`). Everything is sampled at rising edges of a named
//! clock: all changes carrying a timestamp are applied, and if the clock went
//! high across that timestamp, every monitored signal is sampled after the
//! block. Samples then feed the same change-detection rules as
//! [`extract_toggles`](super::extract_toggles): any value difference against
//! the previous sample (unknown states included) sets the bit, buses collapse
//! per-bit changes by OR, and the first sampled cycle never reports activity.

use std::collections::HashMap;
use std::io::BufRead;

use crate::error::{Error, Result};
use crate::trace::{GateConvention, SignalCatalog, SignalKind, SignalSpec, ToggleMatrix};

/// Ingestion options. `clock` names the sampling clock (full dotted path or
/// unique leaf name). `period`, when given, is a consistency check: each pair
/// of consecutive rising edges must be exactly that many time units apart.
#[derive(Debug, Clone)]
pub struct VcdOptions {
    pub clock: String,
    pub period: Option<u64>,
    pub gate_convention: GateConvention,
}

impl VcdOptions {
    pub fn new(clock: impl Into<String>) -> Self {
        VcdOptions {
            clock: clock.into(),
            period: None,
            gate_convention: GateConvention::SameCycle,
        }
    }
}

/// Parse a dump and monitor every declared variable except the clock itself:
/// width-1 vars become single-bit columns, wider vars become collapsed bus
/// columns. Returns the derived catalog alongside the toggle matrix.
pub fn parse_vcd<R: BufRead>(reader: R, opts: &VcdOptions) -> Result<(SignalCatalog, ToggleMatrix)> {
    let mut p = Parser::parse(reader, opts)?;
    let clock = p.resolve_clock(&opts.clock)?;
    let mut specs = Vec::new();
    let mut samplers = Vec::new();
    for (v, var) in p.vars.iter().enumerate() {
        if v == clock {
            continue;
        }
        specs.push(if var.width == 1 {
            SignalSpec::single_bit(var.full_name.clone())
        } else {
            SignalSpec::bus(var.full_name.clone(), var.width)
        });
        samplers.push(Sampler::change(v));
    }
    let catalog = SignalCatalog::new(specs)?;
    let matrix = p.run(clock, samplers, opts)?;
    Ok((catalog, matrix))
}

/// Parse a dump monitoring exactly the given catalog. Single-bit and bus
/// entries must name declared variables of matching width; a gated-clock
/// entry only requires its *enable* net to be present (width 1) — the gated
/// net itself need not be dumped.
pub fn parse_vcd_with_catalog<R: BufRead>(
    reader: R,
    opts: &VcdOptions,
    catalog: &SignalCatalog,
) -> Result<ToggleMatrix> {
    let mut p = Parser::parse(reader, opts)?;
    let clock = p.resolve_clock(&opts.clock)?;
    let mut samplers = Vec::with_capacity(catalog.len());
    for spec in catalog.iter() {
        let sampler = match &spec.kind {
            SignalKind::SingleBit => Sampler::change(p.resolve_width(&spec.name, 1)?),
            SignalKind::Bus { width } => Sampler::change(p.resolve_width(&spec.name, *width)?),
            SignalKind::GatedClock { enable } => Sampler::Gate {
                enable_var: p.resolve_width(enable, 1)?,
                prev: false,
            },
        };
        samplers.push(sampler);
    }
    p.run(clock, samplers, opts)
}

#[derive(Debug)]
struct VarDecl {
    full_name: String,
    leaf_name: String,
    width: u32,
}

enum Sampler {
    /// Value-change detection against the previous sample; a multi-bit state
    /// comparison is exactly the per-bit toggle OR for buses.
    Change { var: usize, prev: Option<Vec<u8>> },
    /// Latched clock-gate enable (state `1` counts as asserted).
    Gate { enable_var: usize, prev: bool },
}

impl Sampler {
    fn change(var: usize) -> Self {
        Sampler::Change { var, prev: None }
    }
}

// Logic state codes: 0, 1, 2 = x, 3 = z. Initial state is x.
const X: u8 = 2;

fn state_code(c: char) -> Option<u8> {
    match c {
        '0' => Some(0),
        '1' => Some(1),
        'x' | 'X' => Some(X),
        'z' | 'Z' => Some(3),
        _ => None,
    }
}

/// One fully-applied change event: which var, its new per-bit states, and the
/// line it came from.
struct Event {
    line: usize,
    time: Option<u64>,
    var: usize,
    states: Vec<u8>,
}

struct Parser {
    vars: Vec<VarDecl>,
    events: Vec<Event>,
}

impl Parser {
    /// Tokenize and validate the whole dump into declaration tables plus an
    /// ordered event list. Events before the first `#` stamp carry no time
    /// and act as initialization only.
    fn parse<R: BufRead>(reader: R, _opts: &VcdOptions) -> Result<Parser> {
        let mut vars: Vec<VarDecl> = Vec::new();
        let mut id_map: HashMap<String, Vec<usize>> = HashMap::new();
        let mut events = Vec::new();
        let mut scope: Vec<String> = Vec::new();
        let mut in_header = true;
        let mut cur_time: Option<u64> = None;
        let mut last_time: Option<u64> = None;
        // Directive collection: Some((name, tokens)) while between `$name` and `$end`.
        let mut directive: Option<(String, Vec<String>)> = None;
        // `$dumpvars`/`$comment` blocks in the body.
        let mut in_dump = false;
        let mut in_comment = false;
        // A vector value waiting for its identifier token.
        let mut pending_vector: Option<Vec<u8>> = None;

        for (idx, line) in reader.lines().enumerate() {
            let line_no = idx + 1;
            let line = line.map_err(|e| Error::parse(line_no, format!("read failed: {e}")))?;
            for tok in line.split_whitespace() {
                if let Some(bits) = pending_vector.take() {
                    // Identifier for a vector change.
                    let var_ids = id_map.get(tok).ok_or_else(|| {
                        Error::parse(line_no, format!("undeclared identifier code {tok:?}"))
                    })?;
                    for &v in var_ids {
                        let states = extend_vector(&bits, vars[v].width, line_no)?;
                        events.push(Event { line: line_no, time: cur_time, var: v, states });
                    }
                    continue;
                }
                if let Some((name, toks)) = directive.as_mut() {
                    if tok == "$end" {
                        let (name, toks) = directive.take().unwrap();
                        match name.as_str() {
                            "$var" => {
                                let decl = parse_var_decl(&toks, &scope, line_no)?;
                                let id = toks[2].clone();
                                id_map.entry(id).or_default().push(vars.len());
                                vars.push(decl);
                            }
                            "$scope" => {
                                if toks.len() != 2 {
                                    return Err(Error::parse(
                                        line_no,
                                        "$scope expects a type and a name",
                                    ));
                                }
                                scope.push(toks[1].clone());
                            }
                            "$upscope" => {
                                if scope.pop().is_none() {
                                    return Err(Error::parse(line_no, "$upscope without $scope"));
                                }
                            }
                            // Content-free for our purposes.
                            "$timescale" | "$date" | "$version" | "$comment" => {}
                            "$enddefinitions" => in_header = false,
                            other => {
                                return Err(Error::parse(
                                    line_no,
                                    format!("unsupported directive {other}"),
                                ))
                            }
                        }
                    } else {
                        let _ = name;
                        toks.push(tok.to_string());
                    }
                    continue;
                }
                if in_comment {
                    if tok == "$end" {
                        in_comment = false;
                    }
                    continue;
                }
                if in_dump && tok == "$end" {
                    in_dump = false;
                    continue;
                }
                if let Some(rest) = tok.strip_prefix('$') {
                    match rest {
                        "dumpvars" if !in_header => in_dump = true,
                        "comment" => in_comment = true,
                        "end" => return Err(Error::parse(line_no, "stray $end")),
                        "var" | "scope" | "upscope" | "timescale" | "date" | "version"
                        | "enddefinitions"
                            if in_header =>
                        {
                            directive = Some((tok.to_string(), Vec::new()));
                        }
                        other => {
                            return Err(Error::parse(
                                line_no,
                                format!("unsupported directive ${other} here"),
                            ))
                        }
                    }
                    continue;
                }
                if in_header {
                    return Err(Error::parse(
                        line_no,
                        format!("unexpected token {tok:?} before $enddefinitions"),
                    ));
                }
                if let Some(t) = tok.strip_prefix('#') {
                    let t: u64 = t.parse().map_err(|_| {
                        Error::parse(line_no, format!("bad timestamp {tok:?}"))
                    })?;
                    if let Some(prev) = last_time {
                        if t <= prev {
                            return Err(Error::parse(
                                line_no,
                                format!("timestamp #{t} does not increase past #{prev}"),
                            ));
                        }
                    }
                    last_time = Some(t);
                    cur_time = Some(t);
                    continue;
                }
                // Value change.
                let mut chars = tok.chars();
                let first = chars.next().unwrap();
                if first == 'b' || first == 'B' {
                    let bits: Option<Vec<u8>> = chars.map(state_code).collect();
                    let bits = bits.ok_or_else(|| {
                        Error::parse(line_no, format!("bad vector value {tok:?}"))
                    })?;
                    if bits.is_empty() {
                        return Err(Error::parse(line_no, format!("empty vector value {tok:?}")));
                    }
                    pending_vector = Some(bits);
                } else if let Some(code) = state_code(first) {
                    let id: String = chars.collect();
                    if id.is_empty() {
                        return Err(Error::parse(
                            line_no,
                            format!("scalar change {tok:?} lacks an identifier"),
                        ));
                    }
                    let var_ids = id_map.get(&id).ok_or_else(|| {
                        Error::parse(line_no, format!("undeclared identifier code {id:?}"))
                    })?;
                    for &v in var_ids {
                        if vars[v].width != 1 {
                            return Err(Error::parse(
                                line_no,
                                format!(
                                    "scalar change applied to {}-bit variable {:?}",
                                    vars[v].width, vars[v].full_name
                                ),
                            ));
                        }
                        events.push(Event {
                            line: line_no,
                            time: cur_time,
                            var: v,
                            states: vec![code],
                        });
                    }
                } else {
                    return Err(Error::parse(
                        line_no,
                        format!("unsupported value change {tok:?}"),
                    ));
                }
            }
        }
        if pending_vector.is_some() {
            return Err(Error::format("vector value at end of input lacks an identifier"));
        }
        if directive.is_some() {
            return Err(Error::format("unterminated directive at end of input"));
        }
        if in_header {
            return Err(Error::format("missing $enddefinitions"));
        }
        Ok(Parser { vars, events })
    }

    /// Find a variable by full dotted path, falling back to a unique leaf name.
    fn resolve(&self, name: &str) -> Result<usize> {
        if let Some(v) = self.vars.iter().position(|v| v.full_name == name) {
            return Ok(v);
        }
        let mut hits = self.vars.iter().enumerate().filter(|(_, v)| v.leaf_name == name);
        match (hits.next(), hits.next()) {
            (Some((v, _)), None) => Ok(v),
            (Some(_), Some(_)) => Err(Error::data(format!(
                "signal name {name:?} is ambiguous in this waveform; use its full path"
            ))),
            _ => Err(Error::data(format!("signal {name:?} not found in waveform"))),
        }
    }

    fn resolve_width(&self, name: &str, width: u32) -> Result<usize> {
        let v = self.resolve(name)?;
        if self.vars[v].width != width {
            return Err(Error::data(format!(
                "signal {name:?} is {} bits wide in the waveform, expected {width}",
                self.vars[v].width
            )));
        }
        Ok(v)
    }

    fn resolve_clock(&self, name: &str) -> Result<usize> {
        self.resolve_width(name, 1)
            .map_err(|e| Error::data(format!("clock: {e}")))
    }

    /// Replay events, sampling every monitored signal after each timestamp
    /// block across which the clock rose. Row 0 of the result is zeroed: the
    /// first sampled cycle is the reference snapshot and carries no activity.
    fn run(&mut self, clock: usize, mut samplers: Vec<Sampler>, opts: &VcdOptions) -> Result<ToggleMatrix> {
        let mut states: Vec<Vec<u8>> =
            self.vars.iter().map(|v| vec![X; v.width as usize]).collect();
        let mut columns: Vec<Vec<bool>> = vec![Vec::new(); samplers.len()];
        let mut edge_times: Vec<u64> = Vec::new();

        let mut block_time: Option<u64> = None;
        let mut block_line = 0usize;
        let mut clock_at_block_start = states[clock][0];

        let events = std::mem::take(&mut self.events);
        let close_block = |states: &Vec<Vec<u8>>,
                               samplers: &mut Vec<Sampler>,
                               columns: &mut Vec<Vec<bool>>,
                               edge_times: &mut Vec<u64>,
                               time: u64,
                               line: usize,
                               clock_start: u8|
         -> Result<()> {
            let rose = clock_start != 1 && states[clock][0] == 1;
            if !rose {
                return Ok(());
            }
            if let Some(period) = opts.period {
                if let Some(&prev) = edge_times.last() {
                    if time - prev != period {
                        return Err(Error::parse(
                            line,
                            format!(
                                "clock edges at #{prev} and #{time} are {} units apart, expected {period}",
                                time - prev
                            ),
                        ));
                    }
                }
            }
            edge_times.push(time);
            for (sampler, col) in samplers.iter_mut().zip(columns.iter_mut()) {
                let bit = match sampler {
                    Sampler::Change { var, prev } => {
                        let cur = &states[*var];
                        let changed = match prev {
                            Some(p) => p != cur,
                            None => false,
                        };
                        *prev = Some(cur.clone());
                        changed
                    }
                    Sampler::Gate { enable_var, prev } => {
                        let asserted = states[*enable_var][0] == 1;
                        let bit = match opts.gate_convention {
                            GateConvention::SameCycle => asserted,
                            GateConvention::Delayed => *prev,
                        };
                        *prev = asserted;
                        bit
                    }
                };
                col.push(bit);
            }
            Ok(())
        };

        for ev in events {
            match ev.time {
                None => {
                    // Initialization before the first timestamp.
                    states[ev.var] = ev.states;
                    clock_at_block_start = states[clock][0];
                }
                Some(t) => {
                    if block_time != Some(t) {
                        if let Some(bt) = block_time {
                            close_block(
                                &states,
                                &mut samplers,
                                &mut columns,
                                &mut edge_times,
                                bt,
                                block_line,
                                clock_at_block_start,
                            )?;
                        }
                        block_time = Some(t);
                        clock_at_block_start = states[clock][0];
                    }
                    block_line = ev.line;
                    states[ev.var] = ev.states;
                }
            }
        }
        if let Some(bt) = block_time {
            close_block(
                &states,
                &mut samplers,
                &mut columns,
                &mut edge_times,
                bt,
                block_line,
                clock_at_block_start,
            )?;
        }

        for col in &mut columns {
            if let Some(first) = col.first_mut() {
                *first = false;
            }
        }
        ToggleMatrix::from_columns(&columns)
    }
}

fn parse_var_decl(tokens: &[String], scope: &[String], line: usize) -> Result<VarDecl> {
    // $var <type> <width> <id> <name> [range] $end
    if tokens.len() < 4 || tokens.len() > 5 {
        return Err(Error::parse(line, "malformed $var declaration"));
    }
    match tokens[0].as_str() {
        "wire" | "reg" => {}
        other => {
            return Err(Error::parse(line, format!("unsupported variable type {other:?}")));
        }
    }
    let width: u32 = tokens[1]
        .parse()
        .map_err(|_| Error::parse(line, format!("bad variable width {:?}", tokens[1])))?;
    if width == 0 {
        return Err(Error::parse(line, "variable width 0"));
    }
    let leaf = tokens[3].clone();
    let full = if scope.is_empty() {
        leaf.clone()
    } else {
        format!("{}.{}", scope.join("."), leaf)
    };
    Ok(VarDecl { full_name: full, leaf_name: leaf, width })
}

/// Right-align a vector value to the declared width, extending on the left
/// with 0 after a 0/1 leading bit, or with the leading x/z state itself.
/// Returned states are LSB-first (index 0 = bit 0).
fn extend_vector(bits_msb_first: &[u8], width: u32, line: usize) -> Result<Vec<u8>> {
    let width = width as usize;
    if bits_msb_first.len() > width {
        return Err(Error::parse(
            line,
            format!("vector value has {} bits, declared width is {width}", bits_msb_first.len()),
        ));
    }
    let fill = match bits_msb_first[0] {
        0 | 1 => 0,
        other => other,
    };
    let mut lsb_first: Vec<u8> = bits_msb_first.iter().rev().copied().collect();
    lsb_first.resize(width, fill);
    Ok(lsb_first)
}
