//! Fixed-point on-chip power meter: quantize a trained model's weights to
//! B-bit integers and simulate the hardware datapath bit-exactly.
//!
//! The meter adds the integer weights of all toggling proxies each cycle,
//! accumulates those sums over a power-of-two window of T cycles, and emits
//! the accumulator right-shifted by log2(T) (a floor division). Register
//! widths are sized so no addition can wrap: the cycle sum needs
//! B + ceil(log2 Q) bits and the window accumulator adds ceil(log2 T) more.
//! The simulation uses u64 arithmetic and therefore requires the accumulator
//! width to stay at or below 63 bits, which it checks up front; runtime
//! width assertions stay on in release builds and report an internal error
//! if they ever trip.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::PowerModel;
use crate::trace::{PowerTrace, ToggleMatrix};

/// Pipeline depth of the reference datapath (weight lookup + accumulate).
pub const OPM_LATENCY_CYCLES: u32 = 2;

/// Bits needed to index/hold `x` distinct increments: ceil(log2 x); 0 for 1.
pub fn ceil_log2(x: u64) -> u32 {
    if x <= 1 {
        0
    } else {
        64 - (x - 1).leading_zeros()
    }
}

/// A power model with weights rounded to B-bit unsigned integers.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct QuantizedModel {
    /// Integer weight per proxy, each below 2^bits.
    pub q_weights: Vec<u64>,
    /// Weight register width B.
    pub bits: u32,
    /// Integer units per power unit; divide raw outputs by this.
    pub scale: f64,
    /// Catalog indices the toggle columns must follow, ascending.
    pub proxy_indices: Vec<usize>,
    pub proxy_names: Vec<String>,
    /// Width of the per-cycle adder output: bits + ceil(log2 Q).
    pub cycle_sum_width: u32,
}

impl QuantizedModel {
    /// Accumulator width needed for a T-cycle window.
    pub fn window_acc_width(&self, t: usize) -> u32 {
        self.cycle_sum_width + ceil_log2(t as u64)
    }

    fn validate(&self) -> Result<()> {
        let q = self.q_weights.len();
        if q == 0 || q != self.proxy_indices.len() || q != self.proxy_names.len() {
            return Err(Error::format("quantized model fields disagree on proxy count"));
        }
        if self.bits == 0 || self.bits > 32 {
            return Err(Error::format(format!("weight width {} outside 1..=32", self.bits)));
        }
        let max_q = (1u64 << self.bits) - 1;
        if self.q_weights.iter().any(|&w| w > max_q) {
            return Err(Error::format(format!("quantized weight exceeds {} bits", self.bits)));
        }
        if !(self.scale > 0.0) || !self.scale.is_finite() {
            return Err(Error::format("scale must be positive and finite"));
        }
        if self.cycle_sum_width != self.bits + ceil_log2(q as u64) {
            return Err(Error::format("cycle sum width is inconsistent with B and Q"));
        }
        if self.proxy_indices.windows(2).any(|w| w[0] >= w[1]) {
            return Err(Error::format("proxy indices must be strictly increasing"));
        }
        Ok(())
    }
}

/// Round a model's weights to `bits`-bit integers. The largest weight maps
/// to 2^bits - 1 and zero weights stay exactly zero; ties round to even.
pub fn quantize(model: &PowerModel, bits: u32) -> Result<QuantizedModel> {
    if bits == 0 || bits > 32 {
        return Err(Error::param(format!("weight width {bits} outside 1..=32")));
    }
    let max_w = model.weights.iter().cloned().fold(0.0_f64, f64::max);
    if !(max_w > 0.0) {
        return Err(Error::param("cannot quantize a model whose weights are all zero"));
    }
    let max_q = (1u64 << bits) - 1;
    let scale = max_q as f64 / max_w;
    let mut q_weights = Vec::with_capacity(model.weights.len());
    for &w in &model.weights {
        let q = (w * scale).round_ties_even();
        if q < 0.0 || q > max_q as f64 {
            return Err(Error::internal(format!("weight {w} quantized out of range")));
        }
        q_weights.push(q as u64);
    }
    let q = model.weights.len() as u64;
    let quantized = QuantizedModel {
        q_weights,
        bits,
        scale,
        proxy_indices: model.proxy_indices.clone(),
        proxy_names: model.proxy_names.clone(),
        cycle_sum_width: bits + ceil_log2(q),
    };
    quantized.validate().map_err(|e| Error::internal(format!("bad quantization: {e}")))?;
    Ok(quantized)
}

/// One simulated window stream.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct OpmOutput {
    /// Cycles per window (power of two).
    pub window_size: usize,
    /// Raw integer output per complete window: floor(window sum / T).
    pub raw: Vec<u64>,
    /// Cycles between a toggle and its effect on the accumulator.
    pub latency_cycles: u32,
}

/// Run the fixed-point datapath over a toggle matrix whose columns are
/// exactly the model's proxies (in `proxy_indices` order — callers restrict
/// the full matrix with `ToggleMatrix::select_columns`). Returns one raw
/// value per complete `t`-cycle window; trailing cycles are ignored.
pub fn simulate_opm(
    model: &QuantizedModel,
    toggles: &ToggleMatrix,
    t: usize,
) -> Result<OpmOutput> {
    model.validate().map_err(|e| Error::param(e.to_string()))?;
    if toggles.n_signals() != model.q_weights.len() {
        return Err(Error::param(format!(
            "matrix has {} columns but the model has {} proxies",
            toggles.n_signals(),
            model.q_weights.len()
        )));
    }
    if t == 0 || !t.is_power_of_two() {
        return Err(Error::param(format!(
            "window size {t} must be a power of two (hardware shift division)"
        )));
    }
    let acc_width = model.window_acc_width(t);
    if acc_width > 63 {
        return Err(Error::param(format!(
            "accumulator width {acc_width} exceeds the 63-bit simulation limit"
        )));
    }
    let sum_limit = 1u64 << model.cycle_sum_width;
    let acc_limit = 1u64 << acc_width;
    let shift = t.trailing_zeros();

    let windows = toggles.n_cycles() / t;
    let mut raw = Vec::with_capacity(windows);
    for w in 0..windows {
        let mut acc = 0u64;
        for i in w * t..(w + 1) * t {
            let mut sum = 0u64;
            for (wi, &word) in toggles.row_words(i).iter().enumerate() {
                let mut bits = word;
                while bits != 0 {
                    let j = wi * 64 + bits.trailing_zeros() as usize;
                    sum += model.q_weights[j];
                    bits &= bits - 1;
                }
            }
            if sum >= sum_limit {
                return Err(Error::internal(format!(
                    "cycle sum {sum} overflows {} bits",
                    model.cycle_sum_width
                )));
            }
            acc += sum;
            if acc >= acc_limit {
                return Err(Error::internal(format!(
                    "window accumulator {acc} overflows {acc_width} bits"
                )));
            }
        }
        raw.push(acc >> shift);
    }
    Ok(OpmOutput { window_size: t, raw, latency_cycles: OPM_LATENCY_CYCLES })
}

/// Convert raw integer outputs back to power units.
pub fn dequantize_output(output: &OpmOutput, scale: f64) -> Result<PowerTrace> {
    if !(scale > 0.0) || !scale.is_finite() {
        return Err(Error::param("scale must be positive and finite"));
    }
    PowerTrace::new(output.raw.iter().map(|&r| r as f64 / scale).collect())
}

/// Worst-case absolute gap between a dequantized window value and the float
/// model's window mean: per-cycle rounding contributes at most Q/2 integer
/// units per cycle and the final shift floors away at most (T-1)/T units.
pub fn dequant_error_bound(n_proxies: usize, t: usize, scale: f64) -> Result<f64> {
    if n_proxies == 0 || t == 0 {
        return Err(Error::param("proxy count and window size must be positive"));
    }
    if !(scale > 0.0) || !scale.is_finite() {
        return Err(Error::param("scale must be positive and finite"));
    }
    let q = n_proxies as f64;
    let t = t as f64;
    Ok((0.5 * q * t + (t - 1.0)) / (t * scale))
}

const OPM_FORMAT: &str = "opmeter-opm";
const OPM_FORMAT_VERSION: u32 = 1;

/// Self-contained hardware description: everything needed to build or
/// re-simulate the meter at one window size.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct OpmSpecDoc {
    pub format: String,
    pub format_version: u32,
    pub n_proxies: usize,
    pub bits: u32,
    pub window_size: usize,
    pub q_weights: Vec<u64>,
    pub scale: f64,
    pub cycle_sum_width: u32,
    pub window_acc_width: u32,
    pub latency_cycles: u32,
    pub proxy_indices: Vec<usize>,
    pub proxy_names: Vec<String>,
}

impl OpmSpecDoc {
    pub fn new(model: &QuantizedModel, t: usize) -> Result<OpmSpecDoc> {
        model.validate()?;
        if t == 0 || !t.is_power_of_two() {
            return Err(Error::param(format!("window size {t} must be a power of two")));
        }
        Ok(OpmSpecDoc {
            format: OPM_FORMAT.to_string(),
            format_version: OPM_FORMAT_VERSION,
            n_proxies: model.q_weights.len(),
            bits: model.bits,
            window_size: t,
            q_weights: model.q_weights.clone(),
            scale: model.scale,
            cycle_sum_width: model.cycle_sum_width,
            window_acc_width: model.window_acc_width(t),
            latency_cycles: OPM_LATENCY_CYCLES,
            proxy_indices: model.proxy_indices.clone(),
            proxy_names: model.proxy_names.clone(),
        })
    }

    /// Rebuild the quantized model (and its window size) from a document.
    pub fn into_model(self) -> Result<(QuantizedModel, usize)> {
        if self.format != OPM_FORMAT {
            return Err(Error::format(format!("not a meter document: format {:?}", self.format)));
        }
        if self.format_version != OPM_FORMAT_VERSION {
            return Err(Error::format(format!(
                "unsupported meter format version {}",
                self.format_version
            )));
        }
        if self.n_proxies != self.q_weights.len() {
            return Err(Error::format("proxy count disagrees with weight list"));
        }
        let model = QuantizedModel {
            q_weights: self.q_weights,
            bits: self.bits,
            scale: self.scale,
            proxy_indices: self.proxy_indices,
            proxy_names: self.proxy_names,
            cycle_sum_width: self.cycle_sum_width,
        };
        model.validate()?;
        if self.window_size == 0 || !self.window_size.is_power_of_two() {
            return Err(Error::format(format!(
                "window size {} must be a power of two",
                self.window_size
            )));
        }
        if self.window_acc_width != model.window_acc_width(self.window_size) {
            return Err(Error::format("accumulator width is inconsistent with B, Q and T"));
        }
        Ok((model, self.window_size))
    }

    pub fn to_json(&self) -> Result<String> {
        serde_json::to_string_pretty(self)
            .map_err(|e| Error::internal(format!("meter serialization failed: {e}")))
    }

    pub fn from_json(text: &str) -> Result<OpmSpecDoc> {
        serde_json::from_str(text).map_err(|e| Error::format(format!("bad meter JSON: {e}")))
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::{self, ModelFlavor, TrainingMeta};
    use crate::solver::Penalty;
    use num_bigint::BigUint;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn toy_model(weights: Vec<f64>) -> PowerModel {
        let indices: Vec<usize> = (0..weights.len()).collect();
        let names = indices.iter().map(|j| format!("sig_{j}")).collect();
        PowerModel {
            proxy_indices: indices,
            proxy_names: names,
            weights,
            flavor: ModelFlavor::PerCycle,
            meta: TrainingMeta {
                penalty: Penalty::Mcp,
                lambda: 0.1,
                gamma: 10.0,
                tol: 1e-6,
                max_iter: 200,
                ridge_lambda: 1e-3,
                validation_frac: 0.0,
                dropped_columns: Vec::new(),
                trailing_cycles_dropped: 0,
                toolkit_version: crate::VERSION.to_string(),
            },
        }
    }

    fn matrix_from_rows(rows: &[&[u8]]) -> ToggleMatrix {
        let mut m = ToggleMatrix::new(rows.len(), rows[0].len());
        for (i, row) in rows.iter().enumerate() {
            for (j, &v) in row.iter().enumerate() {
                if v != 0 {
                    m.set(i, j, true);
                }
            }
        }
        m
    }

    fn random_matrix(rng: &mut ChaCha8Rng, n: usize, m: usize, density: f64) -> ToggleMatrix {
        let mut t = ToggleMatrix::new(n, m);
        for i in 0..n {
            for j in 0..m {
                if rng.random_bool(density) {
                    t.set(i, j, true);
                }
            }
        }
        t
    }

    #[test]
    fn bit_width_helper_matches_hand_values() {
        for (x, want) in [
            (1u64, 0u32),
            (2, 1),
            (3, 2),
            (4, 2),
            (5, 3),
            (1023, 10),
            (1024, 10),
            (1025, 11),
            (1 << 62, 62),
        ] {
            assert_eq!(ceil_log2(x), want, "x = {x}");
        }
        assert_eq!(ceil_log2(0), 0);
    }

    #[test]
    fn quantization_matches_hand_values() {
        let q = quantize(&toy_model(vec![1.0]), 10).unwrap();
        assert_eq!(q.q_weights, vec![1023]);
        assert_eq!(q.scale, 1023.0);
        assert_eq!(q.cycle_sum_width, 10);

        // scale = 3, 0.5 * 3 = 1.5 rounds to even = 2.
        let q2 = quantize(&toy_model(vec![1.0, 0.5]), 2).unwrap();
        assert_eq!(q2.q_weights, vec![3, 2]);
        assert_eq!(q2.cycle_sum_width, 3);

        // Zero weights stay exactly zero.
        let q3 = quantize(&toy_model(vec![2.0, 0.0, 1.0]), 8).unwrap();
        assert_eq!(q3.q_weights, vec![255, 0, 128]);
        assert_eq!(q3.cycle_sum_width, 10);

        assert!(quantize(&toy_model(vec![0.0, 0.0]), 8).is_err());
        assert!(quantize(&toy_model(vec![1.0]), 0).is_err());
        assert!(quantize(&toy_model(vec![1.0]), 33).is_err());
    }

    #[test]
    fn widths_follow_the_register_sizing_rule() {
        let q = quantize(&toy_model(vec![1.0; 5]), 4).unwrap();
        assert_eq!(q.cycle_sum_width, 4 + 3);
        assert_eq!(q.window_acc_width(8), 4 + 3 + 3);
        assert_eq!(q.window_acc_width(1), 7);
        let q1 = quantize(&toy_model(vec![1.0]), 16).unwrap();
        assert_eq!(q1.cycle_sum_width, 16);
    }

    #[test]
    fn simulation_matches_hand_values() {
        let model = QuantizedModel {
            q_weights: vec![3, 5],
            bits: 3,
            scale: 1.0,
            proxy_indices: vec![0, 1],
            proxy_names: vec!["a".into(), "b".into()],
            cycle_sum_width: 4,
        };
        let toggles = matrix_from_rows(&[&[1, 0], &[1, 1]]);
        let out = simulate_opm(&model, &toggles, 2).unwrap();
        assert_eq!(out.raw, vec![5]); // (3 + 8) >> 1
        assert_eq!(out.window_size, 2);
        assert_eq!(out.latency_cycles, OPM_LATENCY_CYCLES);

        // T = 1 streams the per-cycle sums unchanged.
        let per_cycle = simulate_opm(&model, &toggles, 1).unwrap();
        assert_eq!(per_cycle.raw, vec![3, 8]);

        // Quiet input, quiet output.
        let silent = ToggleMatrix::new(4, 2);
        assert_eq!(simulate_opm(&model, &silent, 4).unwrap().raw, vec![0]);

        // Trailing cycles that do not fill a window are ignored.
        let three = matrix_from_rows(&[&[1, 0], &[1, 1], &[0, 1]]);
        assert_eq!(simulate_opm(&model, &three, 2).unwrap().raw.len(), 1);
    }

    #[test]
    fn simulation_rejects_bad_shapes_and_widths() {
        let model = quantize(&toy_model(vec![1.0, 0.5]), 8).unwrap();
        let toggles = matrix_from_rows(&[&[1, 0, 1], &[0, 1, 1]]);
        assert!(simulate_opm(&model, &toggles, 2).is_err()); // 3 cols, 2 proxies
        let two = matrix_from_rows(&[&[1, 0], &[0, 1]]);
        assert!(simulate_opm(&model, &two, 3).is_err()); // not a power of two
        assert!(simulate_opm(&model, &two, 0).is_err());

        // 32-bit weights and 256 proxies need 40 bits per window of 1; a
        // 2^24-cycle window would need 64 and is refused up front.
        let wide = QuantizedModel {
            q_weights: vec![(1u64 << 32) - 1; 256],
            bits: 32,
            scale: 1.0,
            proxy_indices: (0..256).collect(),
            proxy_names: (0..256).map(|j| format!("s{j}")).collect(),
            cycle_sum_width: 40,
        };
        let silent = ToggleMatrix::new(1, 256);
        assert!(simulate_opm(&wide, &silent, 1 << 24).is_err());
        assert!(simulate_opm(&wide, &silent, 1 << 23).is_ok());
    }

    #[test]
    fn simulation_matches_an_arbitrary_precision_oracle() {
        let mut rng = ChaCha8Rng::seed_from_u64(404);
        for _ in 0..300 {
            let q = rng.random_range(1..=12);
            let bits = rng.random_range(1..=16);
            let t = 1usize << rng.random_range(0..=6);
            let windows = rng.random_range(1..=3);
            let n = t * windows + rng.random_range(0..t);
            let weights: Vec<f64> = (0..q).map(|_| rng.random_range(0.05..5.0)).collect();
            let model = quantize(&toy_model(weights), bits).unwrap();
            let toggles = random_matrix(&mut rng, n, q, 0.3);
            let out = simulate_opm(&model, &toggles, t).unwrap();
            assert_eq!(out.raw.len(), windows);

            for w in 0..windows {
                let mut acc = BigUint::from(0u8);
                for i in w * t..(w + 1) * t {
                    for j in 0..q {
                        if toggles.get(i, j) {
                            acc += BigUint::from(model.q_weights[j]);
                        }
                    }
                }
                let want = acc / BigUint::from(t as u64);
                assert_eq!(BigUint::from(out.raw[w]), want);
            }
        }
    }

    #[test]
    fn outputs_never_exceed_the_true_mean_and_respect_the_bound() {
        let mut rng = ChaCha8Rng::seed_from_u64(99);
        for _ in 0..60 {
            let q = rng.random_range(1..=8);
            let bits = rng.random_range(4..=14);
            let t = 1usize << rng.random_range(0..=5);
            let n = t * rng.random_range(1..=4);
            let weights: Vec<f64> = (0..q).map(|_| rng.random_range(0.1..4.0)).collect();
            let float_model = toy_model(weights);
            let qm = quantize(&float_model, bits).unwrap();
            let toggles = random_matrix(&mut rng, n, q, 0.4);

            let out = simulate_opm(&qm, &toggles, t).unwrap();
            let dequant = dequantize_output(&out, qm.scale).unwrap();
            let float_windows = model::predict_window(&float_model, &toggles, t).unwrap();
            let bound = dequant_error_bound(q, t, qm.scale).unwrap();

            for (w, &d) in dequant.values().iter().enumerate() {
                // Floor division only ever loses mass relative to the exact
                // integer mean.
                let mut exact = 0u64;
                for i in w * t..(w + 1) * t {
                    for j in 0..q {
                        if toggles.get(i, j) {
                            exact += qm.q_weights[j];
                        }
                    }
                }
                let exact_mean = exact as f64 / t as f64 / qm.scale;
                assert!(d <= exact_mean + 1e-12);
                assert!(
                    (d - float_windows.values[w]).abs() <= bound,
                    "|{d} - {}| > bound {bound} (q={q} bits={bits} t={t})",
                    float_windows.values[w]
                );
            }
        }
    }

    #[test]
    fn finer_weights_do_not_lose_accuracy() {
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        let weights: Vec<f64> = (0..6).map(|_| rng.random_range(0.1..3.0)).collect();
        let float_model = toy_model(weights);
        let toggles = random_matrix(&mut rng, 256, 6, 0.35);
        let float_windows = model::predict_window(&float_model, &toggles, 16).unwrap();
        let mut errs = Vec::new();
        for bits in [4u32, 8, 16] {
            let qm = quantize(&float_model, bits).unwrap();
            let out = simulate_opm(&qm, &toggles, 16).unwrap();
            let d = dequantize_output(&out, qm.scale).unwrap();
            let err = crate::metrics::nrmse(&float_windows.values, d.values()).unwrap();
            errs.push(err);
        }
        assert!(errs[2] <= errs[0] + 1e-12, "errors {errs:?}");
        assert!(errs[2] < 1e-3);
    }

    #[test]
    fn meter_document_round_trips_and_validates() {
        let qm = quantize(&toy_model(vec![1.5, 0.75, 0.2]), 10).unwrap();
        let doc = OpmSpecDoc::new(&qm, 16).unwrap();
        assert_eq!(doc.window_acc_width, qm.cycle_sum_width + 4);
        let text = doc.to_json().unwrap();
        let (back, t) = OpmSpecDoc::from_json(&text).unwrap().into_model().unwrap();
        assert_eq!(t, 16);
        assert_eq!(back.q_weights, qm.q_weights);
        assert_eq!(back.scale, qm.scale);
        assert_eq!(back.proxy_names, qm.proxy_names);

        assert!(OpmSpecDoc::from_json(&text.replace("opmeter-opm", "nope"))
            .unwrap()
            .into_model()
            .is_err());
        let wrong_width = text.replace("\"window_acc_width\": 16", "\"window_acc_width\": 17");
        assert!(OpmSpecDoc::from_json(&wrong_width).unwrap().into_model().is_err());
        assert!(OpmSpecDoc::new(&qm, 12).is_err()); // not a power of two

        let err = dequantize_output(
            &OpmOutput { window_size: 4, raw: vec![1], latency_cycles: 2 },
            0.0,
        );
        assert!(err.is_err());
    }
}
