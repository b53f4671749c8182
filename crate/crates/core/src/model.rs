//! End-to-end power-model pipeline: screen degenerate columns, select a
//! sparse proxy set with the concave penalty, refit the survivors with a weak
//! ridge, and run per-cycle or windowed inference.
//!
//! Models come in two flavors. A per-cycle model is trained directly on
//! binary toggles. An interval model is trained on per-interval means (all τ
//! cycles of toggles averaged, all τ power values averaged), which smooths
//! label noise; because the model stays linear, its weights still apply to
//! raw per-cycle toggles at inference time, and averaging T cycles of those
//! per-cycle predictions is algebraically identical to predicting on
//! interval aggregates and averaging the interval predictions.

use serde::{Deserialize, Serialize};
use std::path::Path;

use crate::error::{Error, Result};
use crate::metrics::MetricsReport;
use crate::solver::{
    self, Features, FitConfig, LambdaSearchConfig, Penalty,
};
use crate::trace::{PowerTrace, SignalCatalog, ToggleMatrix};

/// Prediction granularity the model was trained at.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "flavor", rename_all = "snake_case")]
pub enum ModelFlavor {
    PerCycle,
    Interval { tau: usize },
}

impl ModelFlavor {
    pub fn tau(&self) -> usize {
        match self {
            ModelFlavor::PerCycle => 1,
            ModelFlavor::Interval { tau } => *tau,
        }
    }
}

/// Why a column was removed before fitting.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "reason", rename_all = "snake_case")]
pub enum DropReason {
    /// Never toggles.
    AllZero,
    /// Toggles at every informative cycle (cycle 0 is structurally silent),
    /// so it carries a constant, not a signal.
    AlwaysOn,
    /// Byte-identical to an earlier column.
    DuplicateOf { of: usize },
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct DroppedColumn {
    pub index: usize,
    #[serde(flatten)]
    pub reason: DropReason,
}

/// Outcome of pre-fit column hygiene.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ScreenReport {
    /// Ascending indices of usable columns.
    pub kept: Vec<usize>,
    pub dropped: Vec<DroppedColumn>,
}

/// Drop all-zero columns, columns toggling at every cycle past the first,
/// and exact duplicates (lowest index wins).
pub fn screen_signals(toggles: &ToggleMatrix) -> ScreenReport {
    let n = toggles.n_cycles();
    let m = toggles.n_signals();
    let mut kept = Vec::with_capacity(m);
    let mut dropped = Vec::new();
    let mut seen: std::collections::HashMap<Vec<u32>, usize> = std::collections::HashMap::new();
    for j in 0..m {
        let positions = toggles.column_positions(j);
        if positions.is_empty() {
            dropped.push(DroppedColumn { index: j, reason: DropReason::AllZero });
            continue;
        }
        let always_on = positions.len() == n
            || (positions.len() == n - 1 && positions.first() == Some(&1));
        if always_on && n > 1 {
            dropped.push(DroppedColumn { index: j, reason: DropReason::AlwaysOn });
            continue;
        }
        match seen.entry(positions) {
            std::collections::hash_map::Entry::Occupied(e) => {
                dropped.push(DroppedColumn {
                    index: j,
                    reason: DropReason::DuplicateOf { of: *e.get() },
                });
            }
            std::collections::hash_map::Entry::Vacant(e) => {
                e.insert(j);
                kept.push(j);
            }
        }
    }
    ScreenReport { kept, dropped }
}

/// Hyperparameters and defaults recorded with a trained model.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct TrainingMeta {
    pub penalty: Penalty,
    pub lambda: f64,
    pub gamma: f64,
    pub tol: f64,
    pub max_iter: usize,
    pub ridge_lambda: f64,
    pub validation_frac: f64,
    pub dropped_columns: Vec<DroppedColumn>,
    /// Cycles at the trace tail that did not fill a whole interval.
    pub trailing_cycles_dropped: usize,
    pub toolkit_version: String,
}

/// A selected, relaxed linear power model.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct PowerModel {
    /// Strictly increasing catalog indices of the selected proxies.
    pub proxy_indices: Vec<usize>,
    pub proxy_names: Vec<String>,
    /// Nonnegative weight per proxy (power units per toggle).
    pub weights: Vec<f64>,
    #[serde(flatten)]
    pub flavor: ModelFlavor,
    pub meta: TrainingMeta,
}

impl PowerModel {
    fn validate(&self) -> Result<()> {
        if self.proxy_indices.len() != self.weights.len()
            || self.proxy_indices.len() != self.proxy_names.len()
        {
            return Err(Error::format("model fields disagree on proxy count"));
        }
        if self.proxy_indices.is_empty() {
            return Err(Error::format("model has no proxies"));
        }
        if self.proxy_indices.windows(2).any(|w| w[0] >= w[1]) {
            return Err(Error::format("proxy indices must be strictly increasing"));
        }
        if self.weights.iter().any(|w| !w.is_finite() || *w < 0.0) {
            return Err(Error::format("weights must be finite and nonnegative"));
        }
        if self.flavor.tau() == 0 {
            return Err(Error::format("interval length must be positive"));
        }
        Ok(())
    }
}

/// Mean power per fixed-size window of cycles.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct WindowPrediction {
    /// Power-of-two cycle count per window.
    pub window_size: usize,
    /// One mean per complete window, trace order.
    pub values: Vec<f64>,
}

/// How the training run chose its penalty strength.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct SelectionSummary {
    pub penalty: Penalty,
    pub lambda: f64,
    /// Number of strengths probed by the search.
    pub probes: usize,
    /// Whether the achieved support size landed within the requested window.
    pub hit_window: bool,
    pub support_size: usize,
    /// Held-out error of the chosen penalized fit, when a split was active.
    pub validation_nrmse: Option<f64>,
    /// Selection-stage (penalized, pre-relaxation) weights by catalog index.
    pub selection_weights: Vec<(usize, f64)>,
    pub converged: bool,
    pub n_iter: usize,
}

/// A trained model plus everything worth reporting about how it got there.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct Trained {
    pub model: PowerModel,
    pub screen: ScreenReport,
    pub selection: SelectionSummary,
}

/// Training controls. `new` fills the documented defaults: concave penalty at
/// γ=10, per-cycle flavor, 200-sweep budget, weak ridge at 1/100 of the
/// selected strength, 20% validation split.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct TrainOptions {
    pub target_q: usize,
    /// Acceptable support deviation; defaults to max(1, target_q/10).
    pub slack: usize,
    pub penalty: Penalty,
    pub gamma: f64,
    /// Interval length in cycles; 1 trains per-cycle.
    pub tau: usize,
    pub max_iter: usize,
    pub tol: f64,
    /// Relaxation strength as a fraction of the selected lambda.
    pub ridge_ratio: f64,
    /// Fraction of interval rows held out (in 256-cycle blocks) to pick the
    /// strength by held-out error; 0 disables the split.
    pub validation_frac: f64,
    pub max_probes: usize,
    pub lambda_min_ratio: f64,
}

impl TrainOptions {
    pub fn new(target_q: usize) -> Self {
        TrainOptions {
            target_q,
            slack: (target_q / 10).max(1),
            penalty: Penalty::Mcp,
            gamma: 10.0,
            tau: 1,
            max_iter: 200,
            tol: 1e-6,
            ridge_ratio: 0.01,
            validation_frac: 0.2,
            max_probes: 32,
            lambda_min_ratio: 1e-6,
        }
    }
}

/// Average toggles and labels over consecutive `tau`-cycle intervals.
/// Toggle counts stay integers until one final division, so aggregates are
/// exact. Returns the interval features (over all columns of `toggles`),
/// interval labels, and how many trailing cycles were dropped.
pub fn aggregate_intervals(
    toggles: &ToggleMatrix,
    labels: &[f64],
    tau: usize,
) -> Result<(Features, Vec<f64>, usize)> {
    if tau == 0 {
        return Err(Error::param("interval length must be positive"));
    }
    let n = toggles.n_cycles();
    if labels.len() != n {
        return Err(Error::data(format!("{} labels for {n} cycles", labels.len())));
    }
    if tau > n {
        return Err(Error::param(format!("interval length {tau} exceeds trace length {n}")));
    }
    let rows = n / tau;
    let trailing = n - rows * tau;
    if tau == 1 {
        return Ok((Features::from_toggles(toggles), labels.to_vec(), 0));
    }
    let tau_f = tau as f64;
    let mut columns = Vec::with_capacity(toggles.n_signals());
    for j in 0..toggles.n_signals() {
        let mut counts = vec![0u32; rows];
        for pos in toggles.column_positions(j) {
            let k = pos as usize / tau;
            if k < rows {
                counts[k] += 1;
            }
        }
        columns.push(counts.into_iter().map(|c| c as f64 / tau_f).collect());
    }
    let y: Vec<f64> = (0..rows)
        .map(|k| labels[k * tau..(k + 1) * tau].iter().sum::<f64>() / tau_f)
        .collect();
    Ok((Features::dense(columns)?, y, trailing))
}

/// Interleaved hold-out assignment: rows are grouped into 256-cycle blocks
/// (at least one row each) and every block whose index crosses a multiple of
/// `1/frac` goes to validation.
fn split_rows(n_rows: usize, tau: usize, frac: f64) -> (Vec<usize>, Vec<usize>) {
    let rows_per_block = (256 / tau).max(1);
    let mut train = Vec::new();
    let mut val = Vec::new();
    for r in 0..n_rows {
        let b = (r / rows_per_block) as f64;
        if ((b + 1.0) * frac).floor() > (b * frac).floor() {
            val.push(r);
        } else {
            train.push(r);
        }
    }
    (train, val)
}

/// Full training pipeline: screen, search the penalty strength for
/// `target_q` proxies, pick a probe (by held-out error when a split is
/// active), and ridge-refit the chosen support on all rows.
pub fn train(
    catalog: &SignalCatalog,
    toggles: &ToggleMatrix,
    labels: &PowerTrace,
    opts: &TrainOptions,
) -> Result<Trained> {
    if catalog.len() != toggles.n_signals() {
        return Err(Error::data(format!(
            "catalog describes {} signals, matrix has {}",
            catalog.len(),
            toggles.n_signals()
        )));
    }
    if labels.len() != toggles.n_cycles() {
        return Err(Error::data(format!(
            "{} labels for {} cycles",
            labels.len(),
            toggles.n_cycles()
        )));
    }
    if !(0.0..1.0).contains(&opts.validation_frac) {
        return Err(Error::param(format!(
            "validation fraction {} must be in [0, 1)",
            opts.validation_frac
        )));
    }
    if !(opts.ridge_ratio >= 0.0) || !opts.ridge_ratio.is_finite() {
        return Err(Error::param("ridge ratio must be finite and >= 0"));
    }

    let screen = screen_signals(toggles);
    if screen.kept.is_empty() {
        return Err(Error::data("no usable columns survive screening"));
    }
    if opts.target_q > screen.kept.len() {
        return Err(Error::param(format!(
            "target support {} exceeds the {} usable columns",
            opts.target_q,
            screen.kept.len()
        )));
    }

    // Interval aggregation (tau = 1 passes through binary toggles).
    let (x_all_cols, y, trailing) = aggregate_intervals(toggles, labels.values(), opts.tau)?;
    let x = x_all_cols.select_cols(&screen.kept)?;
    let flavor = if opts.tau == 1 {
        ModelFlavor::PerCycle
    } else {
        ModelFlavor::Interval { tau: opts.tau }
    };

    // Optional held-out split for strength selection.
    let (train_rows, val_rows) = if opts.validation_frac > 0.0 {
        split_rows(x.n_rows(), opts.tau, opts.validation_frac)
    } else {
        ((0..x.n_rows()).collect(), Vec::new())
    };
    let use_split = !val_rows.is_empty() && !train_rows.is_empty();

    let base = FitConfig {
        lambda: 0.0,
        gamma: opts.gamma,
        max_iter: opts.max_iter,
        tol: opts.tol,
        nonneg: true,
    };
    let search_cfg = LambdaSearchConfig {
        target_q: opts.target_q,
        slack: opts.slack,
        max_probes: opts.max_probes,
        lambda_min_ratio: opts.lambda_min_ratio,
    };

    let (x_fit, y_fit): (Features, Vec<f64>) = if use_split {
        (x.subset_rows(&train_rows)?, train_rows.iter().map(|&r| y[r]).collect())
    } else {
        (x.clone(), y.clone())
    };
    let search = solver::lambda_search(&x_fit, &y_fit, opts.penalty, &base, &search_cfg)?;

    // Probe choice: within the window, prefer the lowest held-out error;
    // otherwise take the search's closest-support probe.
    let target = opts.target_q as i64;
    let mut chosen = search.best;
    let mut validation_nrmse = None;
    if use_split {
        let x_val = x.subset_rows(&val_rows)?;
        let y_val: Vec<f64> = val_rows.iter().map(|&r| y[r]).collect();
        let mut best_err = f64::INFINITY;
        let mut best_idx = None;
        for (i, probe) in search.probes.iter().enumerate() {
            let dev = (probe.support_size as i64 - target).unsigned_abs() as usize;
            if dev > opts.slack || probe.support_size == 0 {
                continue;
            }
            let pred = x_val.predict(&probe.fit.weights);
            let Ok(err) = crate::metrics::nrmse(&y_val, &pred) else { continue };
            let better = err < best_err
                || (err == best_err
                    && best_idx.is_some_and(|b: usize| {
                        probe.lambda > search.probes[b].lambda
                    }));
            if better {
                best_err = err;
                best_idx = Some(i);
            }
        }
        if let Some(i) = best_idx {
            chosen = i;
            validation_nrmse = Some(best_err);
        }
    }
    let probe = &search.probes[chosen];
    if probe.support_size == 0 {
        return Err(Error::data(
            "selection found no proxies: labels carry no signal at any probed strength",
        ));
    }

    // Map kept-column positions back to catalog indices.
    let support_cols: Vec<usize> = probe.fit.support.clone();
    let proxy_indices: Vec<usize> = support_cols.iter().map(|&c| screen.kept[c]).collect();
    let selection_weights: Vec<(usize, f64)> = support_cols
        .iter()
        .map(|&c| (screen.kept[c], probe.fit.weights[c]))
        .collect();

    // Relaxation: weak ridge on the chosen support, refit on every row.
    let ridge_lambda = opts.ridge_ratio * probe.lambda;
    let x_sel = x.select_cols(&support_cols)?;
    let weights = solver::fit_ridge(&x_sel, &y, ridge_lambda, true)?;

    let proxy_names = proxy_indices
        .iter()
        .map(|&j| catalog.get(j).expect("screened index in range").name.clone())
        .collect();
    let model = PowerModel {
        proxy_indices: proxy_indices.clone(),
        proxy_names,
        weights,
        flavor,
        meta: TrainingMeta {
            penalty: opts.penalty,
            lambda: probe.lambda,
            gamma: opts.gamma,
            tol: opts.tol,
            max_iter: opts.max_iter,
            ridge_lambda,
            validation_frac: if use_split { opts.validation_frac } else { 0.0 },
            dropped_columns: screen.dropped.clone(),
            trailing_cycles_dropped: trailing,
            toolkit_version: crate::VERSION.to_string(),
        },
    };
    model.validate().map_err(|e| Error::internal(format!("constructed invalid model: {e}")))?;

    let hit_window =
        (probe.support_size as i64 - target).unsigned_abs() as usize <= opts.slack;
    Ok(Trained {
        selection: SelectionSummary {
            penalty: opts.penalty,
            lambda: probe.lambda,
            probes: search.probes.len(),
            hit_window,
            support_size: probe.support_size,
            validation_nrmse,
            selection_weights,
            converged: probe.fit.converged,
            n_iter: probe.fit.n_iter,
        },
        model,
        screen,
    })
}

/// Apply the model's weights to each cycle's toggles. Valid for both
/// flavors: an interval model's weights transfer to per-cycle toggles by
/// linearity (this is exactly the rearranged windowed form).
pub fn predict_per_cycle(model: &PowerModel, toggles: &ToggleMatrix) -> Result<PowerTrace> {
    model.validate()?;
    let max = *model.proxy_indices.last().expect("validated non-empty");
    if max >= toggles.n_signals() {
        return Err(Error::data(format!(
            "model expects signal {max}, trace has only {}",
            toggles.n_signals()
        )));
    }
    let mut p = vec![0.0; toggles.n_cycles()];
    for (&j, &w) in model.proxy_indices.iter().zip(&model.weights) {
        if w != 0.0 {
            for pos in toggles.column_positions(j) {
                p[pos as usize] += w;
            }
        }
    }
    PowerTrace::new(p)
}

fn check_window(t: usize) -> Result<()> {
    if t == 0 || !t.is_power_of_two() {
        return Err(Error::param(format!(
            "window size {t} must be a power of two (hardware shift division)"
        )));
    }
    Ok(())
}

/// Mean predicted power per complete `t`-cycle window, computed by averaging
/// per-cycle predictions (the weights-times-binary-toggles order).
pub fn predict_window(
    model: &PowerModel,
    toggles: &ToggleMatrix,
    t: usize,
) -> Result<WindowPrediction> {
    check_window(t)?;
    let per_cycle = predict_per_cycle(model, toggles)?;
    let p = per_cycle.values();
    let windows = p.len() / t;
    let values = (0..windows)
        .map(|w| p[w * t..(w + 1) * t].iter().sum::<f64>() / t as f64)
        .collect();
    Ok(WindowPrediction { window_size: t, values })
}

/// The same windowed means computed the interval way: aggregate toggles into
/// the model's τ-cycle interval means, predict each interval, and average
/// the per-window interval predictions. Requires τ to divide `t`. Agreement
/// with [`predict_window`] is an algebraic identity, asserted by tests.
pub fn predict_window_by_intervals(
    model: &PowerModel,
    toggles: &ToggleMatrix,
    t: usize,
) -> Result<WindowPrediction> {
    check_window(t)?;
    model.validate()?;
    let tau = model.flavor.tau();
    if t % tau != 0 {
        return Err(Error::param(format!(
            "window {t} is not a multiple of the model's interval {tau}"
        )));
    }
    let max = *model.proxy_indices.last().expect("validated non-empty");
    if max >= toggles.n_signals() {
        return Err(Error::data(format!(
            "model expects signal {max}, trace has only {}",
            toggles.n_signals()
        )));
    }
    let n = toggles.n_cycles();
    let windows = n / t;
    let usable = windows * t;
    let intervals = usable / tau;
    let per_window = t / tau;

    // Integer toggle counts per interval, per proxy; divided once below.
    let mut interval_pred = vec![0.0; intervals];
    for (&j, &w) in model.proxy_indices.iter().zip(&model.weights) {
        if w == 0.0 {
            continue;
        }
        for pos in toggles.column_positions(j) {
            let k = pos as usize / tau;
            if k < intervals {
                interval_pred[k] += w;
            }
        }
    }
    for v in &mut interval_pred {
        *v /= tau as f64;
    }
    let values = (0..windows)
        .map(|wi| {
            interval_pred[wi * per_window..(wi + 1) * per_window]
                .iter()
                .sum::<f64>()
                / per_window as f64
        })
        .collect();
    Ok(WindowPrediction { window_size: t, values })
}

/// Metrics for one window size.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct WindowReport {
    pub window: usize,
    pub metrics: MetricsReport,
}

/// Accuracy report at per-cycle granularity plus each requested window size.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct EvalReport {
    pub per_cycle: MetricsReport,
    pub windows: Vec<WindowReport>,
    pub mean_label: f64,
    pub mean_prediction: f64,
}

/// Evaluate a model against labels at per-cycle granularity and over each
/// window size (labels are averaged per window the same way predictions are).
pub fn evaluate(
    model: &PowerModel,
    toggles: &ToggleMatrix,
    labels: &PowerTrace,
    window_sizes: &[usize],
) -> Result<EvalReport> {
    if labels.len() != toggles.n_cycles() {
        return Err(Error::data(format!(
            "{} labels for {} cycles",
            labels.len(),
            toggles.n_cycles()
        )));
    }
    let predictions = predict_per_cycle(model, toggles)?;
    let per_cycle = MetricsReport::compute(labels.values(), predictions.values())?;
    let mut windows = Vec::with_capacity(window_sizes.len());
    for &t in window_sizes {
        check_window(t)?;
        let pred = predict_window(model, toggles, t)?;
        let n_win = pred.values.len();
        if n_win == 0 {
            return Err(Error::param(format!(
                "window {t} exceeds the {}-cycle trace",
                labels.len()
            )));
        }
        let label_means: Vec<f64> = (0..n_win)
            .map(|w| labels.values()[w * t..(w + 1) * t].iter().sum::<f64>() / t as f64)
            .collect();
        windows.push(WindowReport {
            window: t,
            metrics: MetricsReport::compute(&label_means, &pred.values)?,
        });
    }
    Ok(EvalReport {
        per_cycle,
        windows,
        mean_label: labels.mean(),
        mean_prediction: predictions.mean(),
    })
}

const MODEL_FORMAT: &str = "opmeter-model";
const MODEL_FORMAT_VERSION: u32 = 1;

#[derive(Serialize, Deserialize)]
struct ModelDocument {
    format: String,
    format_version: u32,
    #[serde(flatten)]
    model: PowerModel,
}

/// Serialize a model to pretty JSON.
pub fn model_to_json(model: &PowerModel) -> Result<String> {
    model.validate()?;
    let doc = ModelDocument {
        format: MODEL_FORMAT.to_string(),
        format_version: MODEL_FORMAT_VERSION,
        model: model.clone(),
    };
    serde_json::to_string_pretty(&doc)
        .map_err(|e| Error::internal(format!("model serialization failed: {e}")))
}

/// Parse and validate a model from JSON.
pub fn model_from_json(text: &str) -> Result<PowerModel> {
    let doc: ModelDocument =
        serde_json::from_str(text).map_err(|e| Error::format(format!("bad model JSON: {e}")))?;
    if doc.format != MODEL_FORMAT {
        return Err(Error::format(format!("not a model document: format {:?}", doc.format)));
    }
    if doc.format_version != MODEL_FORMAT_VERSION {
        return Err(Error::format(format!(
            "unsupported model format version {}",
            doc.format_version
        )));
    }
    doc.model.validate()?;
    Ok(doc.model)
}

/// Write a model JSON file.
pub fn save_model(path: impl AsRef<Path>, model: &PowerModel) -> Result<()> {
    std::fs::write(path, model_to_json(model)?)?;
    Ok(())
}

/// Read a model JSON file.
pub fn load_model(path: impl AsRef<Path>) -> Result<PowerModel> {
    let text = std::fs::read_to_string(path)?;
    model_from_json(&text)
}
