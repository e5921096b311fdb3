//! Post-estimation diagnostics, computed after and independently of the
//! estimator: residual local Moran's I and numerical reliability masking.

use serde::{Deserialize, Serialize};

use crate::engine::LocationRecord;
use crate::error::{GimbalError, Result};
use crate::geo::GeoPoint;
use crate::neighborhood::knn;
use crate::summary::percentile_sorted;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum AdjacencyNormalization {
    RowStandardized,
}

/// Fixed residual adjacency, independent of the regression weights.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct AdjacencySpec {
    pub k_moran: usize,
    pub normalization: AdjacencyNormalization,
}

impl Default for AdjacencySpec {
    fn default() -> Self {
        Self { k_moran: 8, normalization: AdjacencyNormalization::RowStandardized }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct LocalMoran {
    pub values: Vec<f64>,
    /// Residual variance was zero; every value is reported as 0.
    pub degenerate: bool,
}

/// `I_i = z_i · Σ_j a_ij z_j` on standardized residuals with a row-standardized
/// KNN adjacency that excludes `i` itself. Values are not clipped.
pub fn local_moran(residuals: &[f64], points: &[GeoPoint], adjacency: AdjacencySpec) -> Result<LocalMoran> {
    if residuals.len() != points.len() {
        return Err(GimbalError::DimensionMismatch(format!(
            "{} residuals for {} points",
            residuals.len(),
            points.len()
        )));
    }
    if adjacency.k_moran == 0 {
        return Err(GimbalError::InvalidConfig("k_moran must be at least 1".into()));
    }
    let n = residuals.len();
    let mean = residuals.iter().sum::<f64>() / n as f64;
    let sd = (residuals.iter().map(|r| (r - mean).powi(2)).sum::<f64>() / n as f64).sqrt();
    if n < 2 || sd == 0.0 || !sd.is_finite() {
        return Ok(LocalMoran { values: vec![0.0; n], degenerate: true });
    }
    let z: Vec<f64> = residuals.iter().map(|r| (r - mean) / sd).collect();
    let k = adjacency.k_moran.min(n - 1);
    let values = (0..n)
        .map(|i| {
            let nb = knn(points, points[i], k, Some(i), Some(i))?;
            let lag = nb.member_indices.iter().map(|&j| z[j]).sum::<f64>() / k as f64;
            Ok(z[i] * lag)
        })
        .collect::<Result<Vec<f64>>>()?;
    Ok(LocalMoran { values, degenerate: false })
}

/// Flags locations whose local solve should be treated as numerically fragile.
///
/// Fragile means ill-posed, or `κ(M_nor)` strictly above the empirical
/// `kappa_quantile` of the well-posed records, or `n_eff_post < neff_floor`.
pub fn reliability_mask(records: &[LocationRecord], kappa_quantile: f64, neff_floor: f64) -> Vec<bool> {
    let mut kappas: Vec<f64> = records
        .iter()
        .filter(|r| r.fit.well_posed)
        .map(|r| r.fit.m_nor_condition)
        .collect();
    kappas.sort_by(f64::total_cmp);
    let threshold = if kappas.is_empty() { f64::INFINITY } else { percentile_sorted(&kappas, kappa_quantile) };
    records
        .iter()
        .map(|r| !r.fit.well_posed || r.fit.m_nor_condition > threshold || r.weight_map.n_eff_post < neff_floor)
        .collect()
}
