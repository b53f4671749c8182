//! `opmeter extract`: parse a VCD waveform into per-cycle toggles, optionally
//! attach per-cycle power labels, and write the packed trace.

use std::io::BufReader;
use std::path::Path;

use opmeter_core::trace::vcd::{self, VcdOptions};
use opmeter_core::trace::{ptrc, PowerTrace};
use opmeter_core::{Error, Result};

use crate::manifest::Manifest;
use crate::ExtractArgs;

/// One power value per line; blank lines and `#` comments are skipped.
fn read_power_file(path: &Path) -> Result<PowerTrace> {
    let text = std::fs::read_to_string(path)
        .map_err(|e| Error::data(format!("cannot read {}: {e}", path.display())))?;
    let mut values = Vec::new();
    for (i, raw) in text.lines().enumerate() {
        let line = raw.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        let value: f64 = line
            .parse()
            .map_err(|_| Error::Parse { line: i + 1, msg: format!("bad power value {line:?}") })?;
        values.push(value);
    }
    PowerTrace::new(values)
}

pub fn run(args: ExtractArgs) -> Result<()> {
    let options = VcdOptions {
        clock: args.clock.clone(),
        period: args.period,
        gate_convention: args.gate_convention.into(),
    };
    let file = std::fs::File::open(&args.vcd)
        .map_err(|e| Error::data(format!("cannot open {}: {e}", args.vcd.display())))?;
    let (catalog, toggles) = vcd::parse_vcd(BufReader::new(file), &options)?;

    let power = match &args.power {
        Some(path) => {
            let trace = read_power_file(path)?;
            if trace.len() != toggles.n_cycles() {
                return Err(Error::data(format!(
                    "{} power values for {} extracted cycles",
                    trace.len(),
                    toggles.n_cycles()
                )));
            }
            Some(trace)
        }
        None => None,
    };

    let resolved = serde_json::json!({
        "clock": args.clock,
        "period": args.period,
        "gate_convention": format!("{:?}", options.gate_convention),
        "signals": catalog.len(),
        "cycles": toggles.n_cycles(),
        "labeled": power.is_some(),
    });
    let mut manifest = Manifest::new("extract", &args.out, resolved);
    manifest.add_input(&args.vcd)?;
    if let Some(path) = &args.power {
        manifest.add_input(path)?;
    }

    let mut trace_bytes = Vec::new();
    ptrc::write_ptrc(&mut trace_bytes, &catalog, &toggles, power.as_ref())?;
    manifest.write_output("trace.ptrc", &trace_bytes)?;
    manifest.finish()?;

    println!(
        "extract: {} signals x {} cycles from {} -> {}",
        catalog.len(),
        toggles.n_cycles(),
        args.vcd.display(),
        args.out.display()
    );
    Ok(())
}
