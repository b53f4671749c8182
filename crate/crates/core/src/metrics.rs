//! Evaluation mathematics: normalized errors, correlation, collinearity
//! diagnostics, weight mass, and cycle-to-cycle differencing.

use nalgebra::{Cholesky, DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::solver::Features;

fn check_pair(labels: &[f64], predictions: &[f64]) -> Result<()> {
    if labels.len() != predictions.len() {
        return Err(Error::data(format!(
            "{} labels vs {} predictions",
            labels.len(),
            predictions.len()
        )));
    }
    if labels.is_empty() {
        return Err(Error::data("empty series"));
    }
    if labels.iter().chain(predictions).any(|v| !v.is_finite()) {
        return Err(Error::data("series contains a non-finite value"));
    }
    Ok(())
}

/// Root-mean-square error normalized by the mean label:
/// `(1/ȳ)·√(Σ(y−p)²/N)`.
pub fn nrmse(labels: &[f64], predictions: &[f64]) -> Result<f64> {
    check_pair(labels, predictions)?;
    let n = labels.len() as f64;
    let mean = labels.iter().sum::<f64>() / n;
    if mean == 0.0 {
        return Err(Error::data("mean label is zero; normalized error undefined"));
    }
    let sse: f64 = labels
        .iter()
        .zip(predictions)
        .map(|(y, p)| (y - p) * (y - p))
        .sum();
    Ok((sse / n).sqrt() / mean)
}

/// Mean absolute error normalized by total label mass: `Σ|y−p| / Σy`.
pub fn nmae(labels: &[f64], predictions: &[f64]) -> Result<f64> {
    check_pair(labels, predictions)?;
    let total: f64 = labels.iter().sum();
    if total == 0.0 {
        return Err(Error::data("labels sum to zero; normalized error undefined"));
    }
    let abs: f64 = labels.iter().zip(predictions).map(|(y, p)| (y - p).abs()).sum();
    Ok(abs / total)
}

/// Coefficient of determination `1 − Σ(y−p)²/Σ(y−ȳ)²`; can go negative for
/// fits worse than the constant mean predictor.
pub fn r_squared(labels: &[f64], predictions: &[f64]) -> Result<f64> {
    check_pair(labels, predictions)?;
    if labels.len() < 2 {
        return Err(Error::data("need at least two points"));
    }
    let n = labels.len() as f64;
    let mean = labels.iter().sum::<f64>() / n;
    let sst: f64 = labels.iter().map(|y| (y - mean) * (y - mean)).sum();
    if sst == 0.0 {
        return Err(Error::data("labels have zero variance"));
    }
    let sse: f64 = labels
        .iter()
        .zip(predictions)
        .map(|(y, p)| (y - p) * (y - p))
        .sum();
    Ok(1.0 - sse / sst)
}

/// Pearson correlation coefficient.
pub fn pearson(labels: &[f64], predictions: &[f64]) -> Result<f64> {
    check_pair(labels, predictions)?;
    if labels.len() < 2 {
        return Err(Error::data("need at least two points"));
    }
    let n = labels.len() as f64;
    let my = labels.iter().sum::<f64>() / n;
    let mp = predictions.iter().sum::<f64>() / n;
    let mut cov = 0.0;
    let mut vy = 0.0;
    let mut vp = 0.0;
    for (y, p) in labels.iter().zip(predictions) {
        cov += (y - my) * (p - mp);
        vy += (y - my) * (y - my);
        vp += (p - mp) * (p - mp);
    }
    if vy == 0.0 || vp == 0.0 {
        return Err(Error::data("a series has zero variance"));
    }
    Ok(cov / (vy.sqrt() * vp.sqrt()))
}

/// Cycle-to-cycle differences `Δ[i] = p[i+1] − p[i]`, the discrete analog of
/// a current-slope trace.
pub fn delta_current(values: &[f64]) -> Result<Vec<f64>> {
    if values.len() < 2 {
        return Err(Error::param("differencing needs at least two cycles"));
    }
    Ok(values.windows(2).map(|w| w[1] - w[0]).collect())
}

/// Total absolute weight `Σ|w_j|`.
pub fn weight_mass(weights: &[f64]) -> f64 {
    weights.iter().map(|w| w.abs()).sum()
}

/// Collinearity ceiling reported instead of unbounded values when columns
/// are exactly dependent.
pub const VIF_CAP: f64 = 1e6;

/// Per-column variance inflation factors plus their mean and median.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct VifReport {
    pub per_column: Vec<f64>,
    pub mean: f64,
    pub median: f64,
    /// The cap substituted for exactly-collinear columns.
    pub cap: f64,
}

/// Variance inflation factor of every column of `x`: `1/(1 − R²_j)` where
/// `R²_j` comes from regressing the centered column `j` on all the others.
/// The regressions carry a tiny relative ridge so exact collinearity produces
/// the documented cap instead of a failure. Columns with zero variance also
/// report the cap.
pub fn vif(x: &Features) -> Result<VifReport> {
    let q = x.n_cols();
    if q < 2 {
        return Err(Error::param(format!("collinearity check needs >= 2 columns, got {q}")));
    }
    let n = x.n_rows();
    // Centered columns.
    let centered: Vec<Vec<f64>> = (0..q)
        .map(|j| {
            let mut col = x.col_values(j);
            let mean = col.iter().sum::<f64>() / n.max(1) as f64;
            for v in &mut col {
                *v -= mean;
            }
            col
        })
        .collect();
    // Gram matrix of centered columns.
    let mut g = DMatrix::zeros(q, q);
    for a in 0..q {
        for b in a..q {
            let dot: f64 = centered[a].iter().zip(&centered[b]).map(|(x, y)| x * y).sum();
            g[(a, b)] = dot;
            g[(b, a)] = dot;
        }
    }
    let mean_diag = (0..q).map(|j| g[(j, j)]).sum::<f64>() / q as f64;
    let eps = 1e-9 * mean_diag;

    let mut per_column = Vec::with_capacity(q);
    for j in 0..q {
        let gjj = g[(j, j)];
        if gjj <= 0.0 || mean_diag <= 0.0 {
            per_column.push(VIF_CAP);
            continue;
        }
        let others: Vec<usize> = (0..q).filter(|&k| k != j).collect();
        let mut sub = DMatrix::zeros(q - 1, q - 1);
        let mut rhs = DVector::zeros(q - 1);
        for (ai, &a) in others.iter().enumerate() {
            rhs[ai] = g[(a, j)];
            for (bi, &b) in others.iter().enumerate() {
                sub[(ai, bi)] = g[(a, b)];
            }
            sub[(ai, ai)] += eps;
        }
        let vif_j = match Cholesky::new(sub.clone()) {
            Some(chol) => {
                let beta = chol.solve(&rhs);
                let ssr = gjj - 2.0 * beta.dot(&rhs) + beta.dot(&(sub * &beta));
                let r2 = 1.0 - ssr / gjj;
                if r2 >= 1.0 - 1.0 / VIF_CAP {
                    VIF_CAP
                } else {
                    1.0 / (1.0 - r2)
                }
            }
            // Ridge-stabilized Gram should always factor; treat failure as
            // the degenerate case.
            None => VIF_CAP,
        };
        per_column.push(vif_j.min(VIF_CAP));
    }

    let mean = per_column.iter().sum::<f64>() / q as f64;
    let mut sorted = per_column.clone();
    sorted.sort_by(|a, b| a.partial_cmp(b).unwrap());
    let median = if q % 2 == 1 {
        sorted[q / 2]
    } else {
        0.5 * (sorted[q / 2 - 1] + sorted[q / 2])
    };
    Ok(VifReport { per_column, mean, median, cap: VIF_CAP })
}

/// The standard accuracy bundle over one label/prediction pair.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct MetricsReport {
    pub nrmse: f64,
    pub nmae: f64,
    pub r2: f64,
    pub pearson_r: f64,
    pub n_points: usize,
}

impl MetricsReport {
    /// Requires at least two points, nonzero mean label, and nonzero
    /// variance in both series.
    pub fn compute(labels: &[f64], predictions: &[f64]) -> Result<Self> {
        Ok(MetricsReport {
            nrmse: nrmse(labels, predictions)?,
            nmae: nmae(labels, predictions)?,
            r2: r_squared(labels, predictions)?,
            pearson_r: pearson(labels, predictions)?,
            n_points: labels.len(),
        })
    }

    /// Aligned two-column text rendering.
    pub fn to_text(&self) -> String {
        format!(
            "{:<10} {:>12.6}\n{:<10} {:>12.6}\n{:<10} {:>12.6}\n{:<10} {:>12.6}\n{:<10} {:>12}\n",
            "nrmse", self.nrmse, "nmae", self.nmae, "r2", self.r2, "pearson",
            self.pearson_r, "points", self.n_points
        )
    }
}
