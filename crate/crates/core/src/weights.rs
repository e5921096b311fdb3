//! Directional weight construction: metric, raw kernel weights, effective
//! sample size, and the one-shot bandwidth correction with uniform fallback.

use serde::Serialize;

use crate::error::{GimbalError, Result};
use crate::geo::{mat2_mul, mat2_transpose, rotation_matrix, Displacement, Mat2};
use crate::orientation::OrientationResult;

/// Which branch of the safeguard produced the final weights.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum SafeguardBranch {
    /// Corrected weights kept (`n_eff ≥ n_min` after the single correction).
    Corrected,
    /// Post-correction ESS fell below `n_min`.
    UniformFallback,
    /// Every raw weight underflowed at the nominal bandwidth.
    UnderflowFallback,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RealizedWeightMap {
    pub orientation: OrientationResult,
    pub h_nominal: f64,
    pub h_eff: f64,
    /// ESS of the normalized raw weights; `0.0` when they underflowed.
    pub n_eff_raw: f64,
    /// ESS after the one-shot correction, the quantity tested against `n_min`
    /// (`0.0` if undefined). Reported even when the fallback replaces the weights.
    pub n_eff_post: f64,
    /// ESS of the final weights (`n` under either fallback).
    pub n_eff_final: f64,
    pub branch: SafeguardBranch,
    pub fallback_uniform: bool,
    /// Normalized weights at the nominal bandwidth, before any correction.
    pub raw_normalized: Vec<f64>,
    pub weights: Vec<f64>,
    /// Number of bandwidth recomputations performed (one, or zero on underflow).
    pub bandwidth_passes: u32,
}

/// `M = Q Λ Qᵀ` with `Q = R(φ) R(θ*)` and `Λ = h⁻² diag(1, η⁻²)`.
pub fn build_metric(orientation: &OrientationResult, h: f64) -> Mat2 {
    let q = mat2_mul(&rotation_matrix(orientation.phi), &rotation_matrix(orientation.theta_z));
    let inv_h2 = 1.0 / (h * h);
    let lambda = [[inv_h2, 0.0], [0.0, inv_h2 / (orientation.eta * orientation.eta)]];
    let m = mat2_mul(&mat2_mul(&q, &lambda), &mat2_transpose(&q));
    // exact symmetry
    let off = 0.5 * (m[0][1] + m[1][0]);
    [[m[0][0], off], [off, m[1][1]]]
}

/// `exp(−Δᵀ M Δ)` per neighbor.
pub fn raw_weights(displacements: &[Displacement], metric: &Mat2) -> Vec<f64> {
    displacements.iter().map(|d| (-d.quadratic_form(metric)).exp()).collect()
}

/// Kish effective sample size `1 / Σ w²` of a normalized weight vector.
///
/// Evaluated as `(Σv)² / Σv²` on `v = w / max(w)`, which equals `1 / Σw²`
/// for normalized input and is exact for uniform and point-mass vectors.
pub fn ess(normalized_weights: &[f64]) -> Result<f64> {
    let peak = normalized_weights.iter().fold(0.0f64, |m, &w| m.max(w));
    if peak <= 0.0 || !peak.is_finite() {
        return Err(GimbalError::ZeroWeights);
    }
    let (sum, sum_sq) = normalized_weights.iter().fold((0.0, 0.0), |(s, q), &w| {
        let v = w / peak;
        (s + v, q + v * v)
    });
    Ok(sum * sum / sum_sq)
}

fn normalize(w: &[f64]) -> Option<Vec<f64>> {
    let total: f64 = w.iter().sum();
    (total > 0.0 && total.is_finite()).then(|| w.iter().map(|x| x / total).collect())
}

/// One-shot ESS bandwidth correction followed by the uniform fallback rule.
///
/// The orientation basis and `η` are held fixed; only the bandwidth in `Λ`
/// changes between the raw and corrected evaluations.
pub fn one_shot_safeguard(
    displacements: &[Displacement],
    orientation: &OrientationResult,
    h: f64,
    n0: f64,
    n_min: f64,
) -> RealizedWeightMap {
    let n = displacements.len();
    let uniform = vec![1.0 / n as f64; n];

    let raw = raw_weights(displacements, &build_metric(orientation, h));
    let Some(raw_normalized) = normalize(&raw) else {
        return RealizedWeightMap {
            orientation: *orientation,
            h_nominal: h,
            h_eff: h,
            n_eff_raw: 0.0,
            n_eff_post: 0.0,
            n_eff_final: n as f64,
            branch: SafeguardBranch::UnderflowFallback,
            fallback_uniform: true,
            raw_normalized: Vec::new(),
            weights: uniform,
            bandwidth_passes: 0,
        };
    };
    let n_eff_raw = ess(&raw_normalized).expect("normalized weights are nonzero");

    let h_eff = h * (n0 / n_eff_raw).sqrt();
    let corrected = normalize(&raw_weights(displacements, &build_metric(orientation, h_eff)));
    let n_eff_post = corrected
        .as_deref()
        .map_or(0.0, |w| ess(w).expect("normalized weights are nonzero"));

    let (weights, branch) = match corrected {
        Some(w) if n_eff_post >= n_min => (w, SafeguardBranch::Corrected),
        _ => (uniform, SafeguardBranch::UniformFallback),
    };
    let n_eff_final = match branch {
        SafeguardBranch::Corrected => n_eff_post,
        _ => n as f64,
    };
    RealizedWeightMap {
        orientation: *orientation,
        h_nominal: h,
        h_eff,
        n_eff_raw,
        n_eff_post,
        n_eff_final,
        fallback_uniform: branch != SafeguardBranch::Corrected,
        branch,
        raw_normalized,
        weights,
        bandwidth_passes: 1,
    }
}
