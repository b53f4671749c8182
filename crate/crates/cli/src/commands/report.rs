//! `opmeter report`: fold the JSON artifacts of a run directory into one
//! Markdown summary.

use std::path::Path;

use opmeter_core::{Error, Result};
use serde_json::Value;

use crate::manifest::Manifest;
use crate::ReportArgs;

fn load_json(path: &Path) -> Result<Value> {
    let text = std::fs::read_to_string(path)
        .map_err(|e| Error::data(format!("cannot read {}: {e}", path.display())))?;
    serde_json::from_str(&text)
        .map_err(|e| Error::format(format!("bad JSON in {}: {e}", path.display())))
}

fn f(value: &Value, key: &str) -> Option<f64> {
    value.get(key).and_then(Value::as_f64)
}

fn metric_row(out: &mut String, label: &str, metrics: &Value) {
    let grab = |k: &str| {
        metrics.get(k).and_then(Value::as_f64).map_or_else(|| "-".into(), |v| format!("{v:.5}"))
    };
    out.push_str(&format!(
        "| {label} | {} | {} | {} | {} |\n",
        grab("nrmse"),
        grab("nmae"),
        grab("r2"),
        grab("pearson_r")
    ));
}

pub fn run(args: ReportArgs) -> Result<()> {
    let dir = &args.dir;
    let out_dir = args.out.clone().unwrap_or_else(|| dir.clone());
    let mut manifest = Manifest::new("report", &out_dir, serde_json::json!({}));

    let mut md = String::from("# Power-model run summary\n");
    let mut found_any = false;

    let design_path = dir.join("design.json");
    if design_path.is_file() {
        manifest.add_input(&design_path)?;
        let design = load_json(&design_path)?;
        found_any = true;
        md.push_str("\n## Synthetic design\n\n");
        if let Some(cfg) = design.get("config") {
            md.push_str(&format!(
                "- {} signals in {} clusters, {} true contributors, copy probability {}\n",
                cfg.get("n_signals").unwrap_or(&Value::Null),
                cfg.get("n_clusters").unwrap_or(&Value::Null),
                cfg.get("n_contributors").unwrap_or(&Value::Null),
                cfg.get("rho").unwrap_or(&Value::Null),
            ));
            md.push_str(&format!("- seed {}\n", cfg.get("seed").unwrap_or(&Value::Null)));
        }
    }

    let train_path = dir.join("train_report.json");
    if train_path.is_file() {
        manifest.add_input(&train_path)?;
        let train = load_json(&train_path)?;
        found_any = true;
        md.push_str("\n## Training\n\n");
        if let Some(sel) = train.get("selection") {
            md.push_str(&format!(
                "- {} proxies selected at lambda {:.6e} ({} probes, window hit: {})\n",
                sel.get("support_size").and_then(Value::as_u64).unwrap_or(0),
                f(sel, "lambda").unwrap_or(f64::NAN),
                sel.get("probes").and_then(Value::as_u64).unwrap_or(0),
                sel.get("hit_window").and_then(Value::as_bool).unwrap_or(false),
            ));
            if let Some(v) = f(sel, "validation_nrmse") {
                md.push_str(&format!("- hold-out nrmse at selection: {v:.5}\n"));
            }
        }
        if let Some(screen) = train.get("screen") {
            let kept = screen.get("kept").and_then(Value::as_array).map_or(0, Vec::len);
            let dropped = screen.get("dropped").and_then(Value::as_array).map_or(0, Vec::len);
            md.push_str(&format!("- screening kept {kept} columns, dropped {dropped}\n"));
        }
    }

    let model_path = dir.join("model.json");
    if model_path.is_file() {
        manifest.add_input(&model_path)?;
        let model = load_json(&model_path)?;
        found_any = true;
        md.push_str("\n## Model\n\n");
        let n = model.get("proxy_indices").and_then(Value::as_array).map_or(0, Vec::len);
        let flavor = model.get("flavor").and_then(Value::as_str).unwrap_or("?");
        md.push_str(&format!("- {n} proxies, {flavor} flavor"));
        if let Some(tau) = model.get("tau").and_then(Value::as_u64) {
            md.push_str(&format!(" (interval {tau} cycles)"));
        }
        md.push('\n');
        if let Some(weights) = model.get("weights").and_then(Value::as_array) {
            let mass: f64 = weights.iter().filter_map(Value::as_f64).sum();
            md.push_str(&format!("- total weight mass {mass:.5}\n"));
        }
    }

    let eval_path = dir.join("eval_report.json");
    if eval_path.is_file() {
        manifest.add_input(&eval_path)?;
        let eval = load_json(&eval_path)?;
        found_any = true;
        md.push_str("\n## Accuracy\n\n");
        md.push_str("| granularity | nrmse | nmae | r2 | pearson |\n");
        md.push_str("|---|---|---|---|---|\n");
        if let Some(pc) = eval.get("per_cycle") {
            metric_row(&mut md, "per-cycle", pc);
        }
        if let Some(windows) = eval.get("windows").and_then(Value::as_array) {
            for w in windows {
                let t = w.get("window").and_then(Value::as_u64).unwrap_or(0);
                if let Some(m) = w.get("metrics") {
                    metric_row(&mut md, &format!("window {t}"), m);
                }
            }
        }
        if let (Some(mp), Some(ml)) = (f(&eval, "mean_prediction"), f(&eval, "mean_label")) {
            let gap = (mp - ml).abs() / ml.abs().max(f64::MIN_POSITIVE);
            md.push_str(&format!(
                "\n- mean power: predicted {mp:.6} vs label {ml:.6} (relative gap {gap:.4e})\n"
            ));
        }
    }

    let opm_path = dir.join("opm.json");
    if opm_path.is_file() {
        manifest.add_input(&opm_path)?;
        let opm = load_json(&opm_path)?;
        found_any = true;
        md.push_str("\n## Fixed-point meter\n\n");
        md.push_str(&format!(
            "- {} proxies at {} bits, window {} cycles\n",
            opm.get("n_proxies").and_then(Value::as_u64).unwrap_or(0),
            opm.get("bits").and_then(Value::as_u64).unwrap_or(0),
            opm.get("window_size").and_then(Value::as_u64).unwrap_or(0),
        ));
        md.push_str(&format!(
            "- cycle sum {} bits, accumulator {} bits, latency {} cycles\n",
            opm.get("cycle_sum_width").and_then(Value::as_u64).unwrap_or(0),
            opm.get("window_acc_width").and_then(Value::as_u64).unwrap_or(0),
            opm.get("latency_cycles").and_then(Value::as_u64).unwrap_or(0),
        ));
        if let Some(scale) = f(&opm, "scale") {
            md.push_str(&format!("- scale {scale:.6} integer units per power unit\n"));
        }
    }

    let sim_path = dir.join("opm_sim.json");
    if sim_path.is_file() {
        manifest.add_input(&sim_path)?;
        let sim = load_json(&sim_path)?;
        found_any = true;
        md.push_str("\n## Meter simulation\n\n");
        md.push_str(&format!(
            "- {} windows of {} cycles\n",
            sim.get("n_windows").and_then(Value::as_u64).unwrap_or(0),
            sim.get("window_size").and_then(Value::as_u64).unwrap_or(0),
        ));
        if let Some(bound) = f(&sim, "dequant_error_bound") {
            md.push_str(&format!("- guaranteed window error bound {bound:.6}\n"));
        }
        if let Some(m) = sim.get("label_window_metrics").filter(|v| !v.is_null()) {
            md.push_str("\n| granularity | nrmse | nmae | r2 | pearson |\n");
            md.push_str("|---|---|---|---|---|\n");
            metric_row(&mut md, "meter windows", m);
        }
    }

    if !found_any {
        return Err(Error::data(format!("no known artifacts found in {}", dir.display())));
    }

    manifest.write_output("report.md", md.as_bytes())?;
    manifest.finish()?;
    print!("{md}");
    Ok(())
}
