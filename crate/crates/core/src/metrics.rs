//! Evaluation metrics: KL divergence, a Fréchet distance between Gaussian
//! fits of feature sets, and box-plot summaries for repeated runs.
//!
//! The Fréchet distance here is a *proxy*: features default to flattened
//! pixel levels (with covariance shrinkage to handle rank deficiency), so
//! absolute values are only comparable within one pipeline.

use ndarray::{Array1, Array2};
use serde::Serialize;

use crate::diffusion::CategoricalImage;
use crate::linalg::{eigh_sym, symmetry_residual};
use crate::{Error, Result};

/// Result of a KL computation; `smoothed` is set when the reference had
/// zeros that were ε-regularized.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct KlValue {
    pub nats: f64,
    pub smoothed: bool,
}

/// `Σ p_i ln(p_i / q_i)` with `0 ln 0 = 0`.
///
/// When `q` has zeros at positions where `p` does not, ε = 1e-12 is added to
/// every entry of `q` and the vector renormalized; the result is flagged.
pub fn kl_divergence(p: &[f64], q: &[f64]) -> Result<KlValue> {
    if p.len() != q.len() {
        return Err(Error::Shape(format!(
            "kl_divergence lengths {} vs {}",
            p.len(),
            q.len()
        )));
    }
    if p.iter().chain(q.iter()).any(|&x| x < 0.0) {
        return Err(Error::Parameter("negative probability in kl input".into()));
    }
    let needs_smoothing = p
        .iter()
        .zip(q.iter())
        .any(|(&pi, &qi)| qi == 0.0 && pi > 0.0);
    let q_owned: Vec<f64>;
    let q_eff: &[f64] = if needs_smoothing {
        let eps = 1e-12;
        let total: f64 = q.iter().map(|&x| x + eps).sum();
        q_owned = q.iter().map(|&x| (x + eps) / total).collect();
        &q_owned
    } else {
        q
    };
    let mut sum = 0.0;
    for (&pi, &qi) in p.iter().zip(q_eff.iter()) {
        if pi > 0.0 {
            sum += pi * (pi / qi).ln();
        }
    }
    Ok(KlValue {
        nats: sum,
        smoothed: needs_smoothing,
    })
}

/// Rows are samples, columns are feature dimensions.
#[derive(Debug, Clone)]
pub struct FeatureMatrix {
    data: Array2<f64>,
}

impl FeatureMatrix {
    pub fn new(data: Array2<f64>) -> Result<Self> {
        if data.nrows() < 2 {
            return Err(Error::InsufficientSamples {
                needed: 2,
                got: data.nrows(),
            });
        }
        if data.iter().any(|x| !x.is_finite()) {
            return Err(Error::Parameter("non-finite feature value".into()));
        }
        Ok(Self { data })
    }

    pub fn from_rows(rows: Vec<Vec<f64>>) -> Result<Self> {
        let n = rows.len();
        let d = rows.first().map_or(0, Vec::len);
        if rows.iter().any(|r| r.len() != d) {
            return Err(Error::Shape("ragged feature rows".into()));
        }
        let flat: Vec<f64> = rows.into_iter().flatten().collect();
        let data = Array2::from_shape_vec((n, d), flat)
            .map_err(|e| Error::Shape(e.to_string()))?;
        Self::new(data)
    }

    pub fn n_samples(&self) -> usize {
        self.data.nrows()
    }

    pub fn dim(&self) -> usize {
        self.data.ncols()
    }

    pub fn data(&self) -> &Array2<f64> {
        &self.data
    }

    fn mean(&self) -> Array1<f64> {
        let n = self.n_samples() as f64;
        self.data.sum_axis(ndarray::Axis(0)) / n
    }

    // Unbiased covariance with trace-preserving shrinkage toward a scaled
    // identity, λ = 1e-3; keeps rank-deficient pixel covariances invertible
    // enough for the square-root term.
    fn shrunk_covariance(&self) -> Array2<f64> {
        let n = self.n_samples();
        let d = self.dim();
        let mean = self.mean();
        let mut centered = self.data.clone();
        for mut row in centered.rows_mut() {
            row -= &mean;
        }
        let mut cov = centered.t().dot(&centered) / (n as f64 - 1.0);
        let lambda = 1e-3;
        let trace: f64 = cov.diag().sum();
        let ridge = lambda * trace / d as f64;
        cov.mapv_inplace(|x| x * (1.0 - lambda));
        for i in 0..d {
            cov[[i, i]] += ridge;
        }
        cov
    }
}

/// Extracts a feature row per image; pluggable so the Fréchet proxy can run
/// on representations other than raw pixels.
pub trait FeatureExtractor {
    fn features(&self, images: &[CategoricalImage]) -> Result<FeatureMatrix>;
}

/// Flattened pixel levels as features.
pub struct PixelFeatures;

impl FeatureExtractor for PixelFeatures {
    fn features(&self, images: &[CategoricalImage]) -> Result<FeatureMatrix> {
        let rows = images
            .iter()
            .map(|img| img.levels().iter().map(|&l| l as f64).collect())
            .collect();
        FeatureMatrix::from_rows(rows)
    }
}

/// Principal square root of a symmetric positive-semidefinite matrix via
/// eigendecomposition; eigenvalues are clamped at zero.
pub fn sqrtm_psd(m: &Array2<f64>) -> Result<Array2<f64>> {
    let asym = symmetry_residual(m);
    if asym > 1e-10 {
        return Err(Error::Numerical(format!(
            "sqrtm_psd input asymmetric by {asym:.3e}"
        )));
    }
    let (w, v) = eigh_sym(m)?;
    // R = (V diag(√w)) Vᵀ with eigenvalues clamped at zero.
    let mut scaled = v.clone();
    for (k, &wk) in w.iter().enumerate() {
        let root = wk.max(0.0).sqrt();
        scaled.column_mut(k).mapv_inplace(|x| x * root);
    }
    Ok(scaled.dot(&v.t()))
}

/// Fréchet distance between Gaussians fitted to two feature sets:
/// `||μ - μ'||² + tr(Σ + Σ' - 2 (Σ^{1/2} Σ' Σ^{1/2})^{1/2})`.
///
/// The symmetrized trace form keeps the result real and symmetric in the
/// arguments.
pub fn frechet_distance(a: &FeatureMatrix, b: &FeatureMatrix) -> Result<f64> {
    if a.dim() != b.dim() {
        return Err(Error::Shape(format!(
            "feature dims {} vs {}",
            a.dim(),
            b.dim()
        )));
    }
    let mu_a = a.mean();
    let mu_b = b.mean();
    let cov_a = a.shrunk_covariance();
    let cov_b = b.shrunk_covariance();

    let mean_term: f64 = mu_a
        .iter()
        .zip(mu_b.iter())
        .map(|(x, y)| (x - y) * (x - y))
        .sum();

    let root_a = sqrtm_psd(&cov_a)?;
    let inner = root_a.dot(&cov_b).dot(&root_a);
    // Symmetrize roundoff, then take the root's trace straight from the
    // eigenvalues: tr((Σ^{1/2} Σ' Σ^{1/2})^{1/2}) = Σ √λ_i.
    let inner = (&inner + &inner.t()) * 0.5;
    let (eigs, _) = eigh_sym(&inner)?;
    let cross_trace: f64 = eigs.into_iter().map(|l| l.max(0.0).sqrt()).sum();

    let trace_sum = cov_a.diag().sum() + cov_b.diag().sum();
    let trace_term = trace_sum - 2.0 * cross_trace;
    let value = mean_term + trace_term;
    // The trace term cancels two large sums, so roundoff grows with the
    // covariance scale; tolerate -1e-8 per unit of that scale and clamp.
    let floor = -1e-8 * trace_sum.max(1.0);
    if value < floor {
        return Err(Error::Numerical(format!(
            "frechet distance {value:.3e} below the {floor:.1e} clamp"
        )));
    }
    Ok(value.max(0.0))
}

/// Five-number summary plus mean, SEM, and flagged outliers.
#[derive(Debug, Clone, Serialize)]
pub struct BoxStats {
    pub median: f64,
    pub q1: f64,
    pub q3: f64,
    pub whisker_low: f64,
    pub whisker_high: f64,
    pub outliers: Vec<f64>,
    pub mean: f64,
    pub sem: f64,
}

// Linear interpolation between order statistics.
fn quantile(sorted: &[f64], q: f64) -> f64 {
    let n = sorted.len();
    let pos = q * (n - 1) as f64;
    let lo = pos.floor() as usize;
    let hi = pos.ceil() as usize;
    if lo == hi {
        sorted[lo]
    } else {
        sorted[lo] + (pos - lo as f64) * (sorted[hi] - sorted[lo])
    }
}

/// Box-plot statistics over at least 5 values. Whiskers reach the most
/// extreme data within 1.5 IQR of the quartiles; values beyond are outliers.
pub fn boxplot_stats(values: &[f64]) -> Result<BoxStats> {
    if values.len() < 5 {
        return Err(Error::InsufficientSamples {
            needed: 5,
            got: values.len(),
        });
    }
    let mut sorted = values.to_vec();
    sorted.sort_by(|a, b| a.partial_cmp(b).unwrap());
    let q1 = quantile(&sorted, 0.25);
    let median = quantile(&sorted, 0.5);
    let q3 = quantile(&sorted, 0.75);
    let iqr = q3 - q1;
    let low_fence = q1 - 1.5 * iqr;
    let high_fence = q3 + 1.5 * iqr;
    let whisker_low = sorted
        .iter()
        .copied()
        .find(|&x| x >= low_fence)
        .unwrap_or(q1);
    let whisker_high = sorted
        .iter()
        .rev()
        .copied()
        .find(|&x| x <= high_fence)
        .unwrap_or(q3);
    let outliers: Vec<f64> = sorted
        .iter()
        .copied()
        .filter(|&x| x < low_fence || x > high_fence)
        .collect();
    let n = sorted.len() as f64;
    let mean = sorted.iter().sum::<f64>() / n;
    let var = sorted.iter().map(|x| (x - mean) * (x - mean)).sum::<f64>() / (n - 1.0);
    let sem = var.sqrt() / n.sqrt();
    Ok(BoxStats {
        median,
        q1,
        q3,
        whisker_low,
        whisker_high,
        outliers,
        mean,
        sem,
    })
}
