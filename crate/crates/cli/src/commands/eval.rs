//! `opmeter eval`: score a trained model against a labeled trace, per cycle
//! and over each requested window size.

use opmeter_core::model::{self, EvalReport, WindowReport};
use opmeter_core::{Error, Result};
use rayon::prelude::*;

use opmeter_core::trace::ptrc;

use crate::config::{defaults, FileConfig};
use crate::manifest::Manifest;
use crate::EvalArgs;

pub fn run(args: EvalArgs) -> Result<()> {
    let file = FileConfig::load(args.config.as_deref())?;
    let mut windows: Vec<usize> = if !args.windows.is_empty() {
        args.windows.clone()
    } else if let Some(w) = file.window {
        vec![w]
    } else {
        vec![defaults::WINDOW]
    };
    windows.sort_unstable();
    windows.dedup();

    let (catalog, toggles, power) = ptrc::read_ptrc_file(&args.trace)?;
    let labels = power.ok_or_else(|| {
        Error::data(format!("{} has no power block; eval needs labels", args.trace.display()))
    })?;
    let model = model::load_model(&args.model)?;
    if catalog.len() != toggles.n_signals() {
        return Err(Error::internal("trace catalog and matrix disagree"));
    }

    // Window sizes are independent; score them in parallel.
    let base = model::evaluate(&model, &toggles, &labels, &[])?;
    let window_reports: Vec<WindowReport> = windows
        .par_iter()
        .map(|&t| {
            model::evaluate(&model, &toggles, &labels, &[t]).map(|mut r| r.windows.remove(0))
        })
        .collect::<Result<_>>()?;
    let report = EvalReport {
        per_cycle: base.per_cycle,
        windows: window_reports,
        mean_label: base.mean_label,
        mean_prediction: base.mean_prediction,
    };

    let resolved = serde_json::json!({ "windows": windows });
    let mut manifest = Manifest::new("eval", &args.out, resolved);
    manifest.add_input(&args.trace)?;
    manifest.add_input(&args.model)?;
    if let Some(path) = &args.config {
        manifest.add_input(path)?;
    }
    let text = serde_json::to_string_pretty(&report)
        .map_err(|e| Error::internal(format!("report serialization failed: {e}")))?;
    manifest.write_output("eval_report.json", text.as_bytes())?;
    manifest.finish()?;

    println!("eval: per-cycle over {} cycles", toggles.n_cycles());
    println!("{}", report.per_cycle.to_text());
    for w in &report.windows {
        println!("eval: window {}", w.window);
        println!("{}", w.metrics.to_text());
    }
    let gap = (report.mean_prediction - report.mean_label).abs() / report.mean_label.abs();
    println!(
        "eval: mean power predicted {:.6} vs label {:.6} (relative gap {:.4e})",
        report.mean_prediction, report.mean_label, gap
    );
    Ok(())
}
