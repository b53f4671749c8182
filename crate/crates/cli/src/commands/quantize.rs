//! `opmeter quantize`: round a trained model's weights to B-bit integers and
//! emit the self-contained fixed-point meter description.

use opmeter_core::model;
use opmeter_core::opm::{self, OpmSpecDoc};
use opmeter_core::Result;

use crate::config::{defaults, pick, FileConfig};
use crate::manifest::Manifest;
use crate::QuantizeArgs;

pub fn run(args: QuantizeArgs) -> Result<()> {
    let file = FileConfig::load(args.config.as_deref())?;
    let bits = pick(args.bits, file.bits, defaults::BITS);
    let window = pick(args.window, file.window, defaults::WINDOW);

    let model = model::load_model(&args.model)?;
    let quantized = opm::quantize(&model, bits)?;
    let doc = OpmSpecDoc::new(&quantized, window)?;
    let bound = opm::dequant_error_bound(quantized.q_weights.len(), window, quantized.scale)?;

    let resolved = serde_json::json!({ "bits": bits, "window": window });
    let mut manifest = Manifest::new("quantize", &args.out, resolved);
    manifest.add_input(&args.model)?;
    if let Some(path) = &args.config {
        manifest.add_input(path)?;
    }
    manifest.write_output("opm.json", doc.to_json()?.as_bytes())?;
    manifest.finish()?;

    println!(
        "quantize: {} proxies at {bits} bits, window {window}; cycle sum {} bits, accumulator {} bits",
        doc.n_proxies, doc.cycle_sum_width, doc.window_acc_width
    );
    println!(
        "quantize: scale {:.6} integer units per power unit; worst-case window error {:.6}",
        doc.scale, bound
    );
    if doc.window_acc_width > 63 {
        eprintln!(
            "warning: accumulator width {} exceeds the 63-bit simulation limit; \
             opm-sim will refuse this description",
            doc.window_acc_width
        );
    }
    Ok(())
}
