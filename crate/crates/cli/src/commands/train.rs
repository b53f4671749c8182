//! `opmeter train`: select sparse proxies from a labeled trace and fit the
//! relaxed linear power model.

use opmeter_core::model::{self, TrainOptions};
use opmeter_core::trace::ptrc;
use opmeter_core::{Error, Result};

use crate::config::{defaults, pick, FileConfig, PenaltyKind};
use crate::manifest::Manifest;
use crate::TrainArgs;

pub fn run(args: TrainArgs) -> Result<()> {
    let file = FileConfig::load(args.config.as_deref())?;
    let Some(target_q) = args.target_q.or(file.target_q) else {
        return Err(Error::param("train needs --target-q (or target_q in the config file)"));
    };
    let mut opts = TrainOptions::new(target_q);
    if let Some(slack) = args.slack.or(file.slack) {
        opts.slack = slack;
    }
    opts.gamma = pick(args.gamma, file.gamma, defaults::GAMMA);
    opts.tau = pick(args.tau, file.tau, defaults::TAU);
    opts.penalty = pick(args.penalty, file.penalty, PenaltyKind::Mcp).into();
    opts.validation_frac =
        pick(args.validation_frac, file.validation_frac, defaults::VALIDATION_FRAC);
    if let Some(v) = file.max_iter {
        opts.max_iter = v;
    }
    if let Some(v) = file.tol {
        opts.tol = v;
    }
    if let Some(v) = file.max_probes {
        opts.max_probes = v;
    }
    if let Some(v) = file.lambda_min_ratio {
        opts.lambda_min_ratio = v;
    }
    if let Some(v) = file.ridge_ratio {
        opts.ridge_ratio = v;
    }

    let (catalog, toggles, power) = ptrc::read_ptrc_file(&args.trace)?;
    let labels = power.ok_or_else(|| {
        Error::data(format!("{} has no power block; train needs labels", args.trace.display()))
    })?;

    let trained = model::train(&catalog, &toggles, &labels, &opts)?;

    let resolved = serde_json::to_value(&opts)
        .map_err(|e| Error::internal(format!("options serialization failed: {e}")))?;
    let mut manifest = Manifest::new("train", &args.out, resolved);
    manifest.add_input(&args.trace)?;
    if let Some(path) = &args.config {
        manifest.add_input(path)?;
    }

    manifest.write_output("model.json", model::model_to_json(&trained.model)?.as_bytes())?;
    let report = serde_json::json!({
        "selection": trained.selection,
        "screen": trained.screen,
        "n_cycles": toggles.n_cycles(),
        "n_signals": catalog.len(),
    });
    let report_text = serde_json::to_string_pretty(&report)
        .map_err(|e| Error::internal(format!("report serialization failed: {e}")))?;
    manifest.write_output("train_report.json", report_text.as_bytes())?;
    manifest.finish()?;

    println!(
        "train: {} proxies (target {target_q}, lambda {:.6e}, window hit: {}) -> {}",
        trained.model.proxy_indices.len(),
        trained.selection.lambda,
        trained.selection.hit_window,
        args.out.display()
    );
    if let Some(v) = trained.selection.validation_nrmse {
        println!("train: hold-out nrmse of the selection stage: {v:.5}");
    }
    Ok(())
}
