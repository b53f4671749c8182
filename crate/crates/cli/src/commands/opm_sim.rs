//! `opmeter opm-sim`: run the fixed-point meter bit-exactly over a trace and,
//! when the trace carries labels, score the dequantized windows against them.

use opmeter_core::metrics::MetricsReport;
use opmeter_core::opm::{self, OpmSpecDoc};
use opmeter_core::trace::ptrc;
use opmeter_core::{Error, Result};

use crate::manifest::Manifest;
use crate::OpmSimArgs;

pub fn run(args: OpmSimArgs) -> Result<()> {
    let doc_text = std::fs::read_to_string(&args.opm)
        .map_err(|e| Error::data(format!("cannot read {}: {e}", args.opm.display())))?;
    let (quantized, window) = OpmSpecDoc::from_json(&doc_text)?.into_model()?;

    let (catalog, toggles, power) = ptrc::read_ptrc_file(&args.trace)?;
    let max = *quantized.proxy_indices.iter().max().expect("validated non-empty");
    if max >= catalog.len() {
        return Err(Error::data(format!(
            "meter expects signal {max}, trace has only {}",
            catalog.len()
        )));
    }
    // Guard against running the meter on a trace from a different design.
    for (&j, name) in quantized.proxy_indices.iter().zip(&quantized.proxy_names) {
        let have = &catalog.get(j).expect("checked above").name;
        if have != name {
            return Err(Error::data(format!(
                "proxy {j} is {have:?} in the trace but {name:?} in the meter description"
            )));
        }
    }
    let proxy_cols = toggles.select_columns(&quantized.proxy_indices)?;
    let output = opm::simulate_opm(&quantized, &proxy_cols, window)?;
    let dequantized = opm::dequantize_output(&output, quantized.scale)?;
    let bound =
        opm::dequant_error_bound(quantized.q_weights.len(), window, quantized.scale)?;

    // Score against label window means when the trace is labeled.
    let mut label_metrics: Option<MetricsReport> = None;
    if let Some(labels) = &power {
        let n_win = output.raw.len();
        if n_win > 0 {
            let means: Vec<f64> = (0..n_win)
                .map(|w| {
                    labels.values()[w * window..(w + 1) * window].iter().sum::<f64>()
                        / window as f64
                })
                .collect();
            label_metrics = Some(MetricsReport::compute(&means, dequantized.values())?);
        }
    }

    let resolved = serde_json::json!({
        "window": window,
        "bits": quantized.bits,
        "n_proxies": quantized.q_weights.len(),
    });
    let mut manifest = Manifest::new("opm-sim", &args.out, resolved);
    manifest.add_input(&args.opm)?;
    manifest.add_input(&args.trace)?;

    let report = serde_json::json!({
        "window_size": output.window_size,
        "latency_cycles": output.latency_cycles,
        "n_windows": output.raw.len(),
        "scale": quantized.scale,
        "dequant_error_bound": bound,
        "raw": output.raw,
        "dequantized": dequantized.values(),
        "label_window_metrics": label_metrics,
    });
    let text = serde_json::to_string_pretty(&report)
        .map_err(|e| Error::internal(format!("report serialization failed: {e}")))?;
    manifest.write_output("opm_sim.json", text.as_bytes())?;
    manifest.finish()?;

    println!(
        "opm-sim: {} windows of {} cycles ({} trailing cycles ignored)",
        output.raw.len(),
        window,
        toggles.n_cycles() - output.raw.len() * window
    );
    if let Some(m) = &label_metrics {
        println!("opm-sim: dequantized windows vs label means");
        println!("{}", m.to_text());
    }
    Ok(())
}
