//! Map-level summaries across target locations and weight-field comparisons.

use serde::Serialize;

use crate::engine::{BranchCode, LocationRecord};
use crate::error::{GimbalError, Result};

/// Mean and population standard deviation; `(NaN, NaN)` for an empty slice.
pub fn mean_sd(values: &[f64]) -> (f64, f64) {
    if values.is_empty() {
        return (f64::NAN, f64::NAN);
    }
    let n = values.len() as f64;
    let mean = values.iter().sum::<f64>() / n;
    let var = values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / n;
    (mean, var.sqrt())
}

/// Percentile by linear interpolation between order statistics, `q ∈ [0, 1]`.
pub fn percentile(values: &[f64], q: f64) -> f64 {
    if values.is_empty() {
        return f64::NAN;
    }
    let mut sorted = values.to_vec();
    sorted.sort_by(f64::total_cmp);
    percentile_sorted(&sorted, q)
}

pub(crate) fn percentile_sorted(sorted: &[f64], q: f64) -> f64 {
    let pos = q.clamp(0.0, 1.0) * (sorted.len() - 1) as f64;
    let lo = pos.floor() as usize;
    let hi = pos.ceil() as usize;
    let frac = pos - lo as f64;
    sorted[lo] + frac * (sorted[hi] - sorted[lo])
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct MapSummary {
    /// Well-posed records included in every statistic below.
    pub n_targets: usize,
    pub n_ill_posed: usize,
    pub mu_rmse: f64,
    pub sd_rmse: f64,
    pub mu_r2: f64,
    pub sd_r2: f64,
    pub mu_kappa: f64,
    pub sd_kappa: f64,
    pub p50_kappa: f64,
    pub p95_kappa: f64,
    pub p99_kappa: f64,
    pub mu_cond_wls2: f64,
    pub sd_cond_wls2: f64,
    pub mu_h_eff: f64,
    pub sd_h_eff: f64,
    pub mu_neff_raw: f64,
    pub sd_neff_raw: f64,
    pub mu_neff_post: f64,
    pub sd_neff_post: f64,
    pub mu_eta: f64,
    pub sd_eta: f64,
    pub mu_rphi: f64,
    pub sd_rphi: f64,
    pub mu_gident: f64,
    pub sd_gident: f64,
    pub mu_theta: f64,
    pub sd_theta: f64,
    pub pr_phi_zero: f64,
    pub pr_theta_zero: f64,
    pub pr_uniform: f64,
    pub n_uniform: usize,
}

pub fn summarize(records: &[LocationRecord]) -> MapSummary {
    let kept: Vec<&LocationRecord> = records.iter().filter(|r| r.fit.well_posed).collect();
    let n = kept.len();
    let col = |f: &dyn Fn(&LocationRecord) -> Option<f64>| -> Vec<f64> { kept.iter().filter_map(|r| f(r)).collect() };
    let rate = |f: &dyn Fn(&LocationRecord) -> bool| -> f64 {
        if n == 0 {
            f64::NAN
        } else {
            kept.iter().filter(|r| f(r)).count() as f64 / n as f64
        }
    };

    let rmse = col(&|r| r.fit.rmse_local);
    let r2 = col(&|r| r.fit.r2_local);
    let mut kappa = col(&|r| Some(r.fit.m_nor_condition));
    kappa.sort_by(f64::total_cmp);
    let (p50, p95, p99) = if kappa.is_empty() {
        (f64::NAN, f64::NAN, f64::NAN)
    } else {
        (percentile_sorted(&kappa, 0.50), percentile_sorted(&kappa, 0.95), percentile_sorted(&kappa, 0.99))
    };

    let (mu_rmse, sd_rmse) = mean_sd(&rmse);
    let (mu_r2, sd_r2) = mean_sd(&r2);
    let (mu_kappa, sd_kappa) = mean_sd(&kappa);
    let (mu_cond_wls2, sd_cond_wls2) = mean_sd(&col(&|r| Some(r.cond_wls2)));
    let (mu_h_eff, sd_h_eff) = mean_sd(&col(&|r| Some(r.weight_map.h_eff)));
    let (mu_neff_raw, sd_neff_raw) = mean_sd(&col(&|r| Some(r.weight_map.n_eff_raw)));
    let (mu_neff_post, sd_neff_post) = mean_sd(&col(&|r| Some(r.weight_map.n_eff_post)));
    let (mu_eta, sd_eta) = mean_sd(&col(&|r| Some(r.orientation.eta)));
    let (mu_rphi, sd_rphi) = mean_sd(&col(&|r| Some(r.orientation.r_phi)));
    let (mu_gident, sd_gident) = mean_sd(&col(&|r| Some(r.orientation.g_ident)));
    let (mu_theta, sd_theta) = mean_sd(&col(&|r| Some(r.orientation.theta_z)));
    let n_uniform = kept.iter().filter(|r| r.weight_map.fallback_uniform).count();

    MapSummary {
        n_targets: n,
        n_ill_posed: records.len() - n,
        mu_rmse,
        sd_rmse,
        mu_r2,
        sd_r2,
        mu_kappa,
        sd_kappa,
        p50_kappa: p50,
        p95_kappa: p95,
        p99_kappa: p99,
        mu_cond_wls2,
        sd_cond_wls2,
        mu_h_eff,
        sd_h_eff,
        mu_neff_raw,
        sd_neff_raw,
        mu_neff_post,
        sd_neff_post,
        mu_eta,
        sd_eta,
        mu_rphi,
        sd_rphi,
        mu_gident,
        sd_gident,
        mu_theta,
        sd_theta,
        pr_phi_zero: rate(&|r| r.has(BranchCode::PhiIso)),
        pr_theta_zero: rate(&|r| r.has(BranchCode::ThetaNonident)),
        pr_uniform: rate(&|r| r.weight_map.fallback_uniform),
        n_uniform,
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct WeightDiffSummary {
    pub n_targets: usize,
    pub mu_l1: f64,
    pub sd_l1: f64,
    /// `None` when no target had a defined correlation.
    pub mu_corr: Option<f64>,
    pub sd_corr: Option<f64>,
    pub n_corr_defined: usize,
}

/// Pearson correlation, `None` when either vector is constant.
pub fn correlation(a: &[f64], b: &[f64]) -> Option<f64> {
    let n = a.len() as f64;
    let ma = a.iter().sum::<f64>() / n;
    let mb = b.iter().sum::<f64>() / n;
    let (mut sab, mut saa, mut sbb) = (0.0, 0.0, 0.0);
    for (x, y) in a.iter().zip(b) {
        sab += (x - ma) * (y - mb);
        saa += (x - ma) * (x - ma);
        sbb += (y - mb) * (y - mb);
    }
    (saa > 0.0 && sbb > 0.0).then(|| (sab / (saa.sqrt() * sbb.sqrt())).clamp(-1.0, 1.0))
}

/// Per-target ℓ1 distance and correlation between final weight vectors of two runs.
pub fn weight_diff(records_a: &[LocationRecord], records_b: &[LocationRecord]) -> Result<WeightDiffSummary> {
    if records_a.len() != records_b.len() {
        return Err(GimbalError::DimensionMismatch(format!(
            "{} vs {} records",
            records_a.len(),
            records_b.len()
        )));
    }
    let mut l1 = Vec::with_capacity(records_a.len());
    let mut corr = Vec::new();
    for (a, b) in records_a.iter().zip(records_b) {
        if a.index != b.index || a.neighborhood.member_indices != b.neighborhood.member_indices {
            return Err(GimbalError::NeighborhoodMismatch { target: a.index });
        }
        let (wa, wb) = (&a.weight_map.weights, &b.weight_map.weights);
        l1.push(wa.iter().zip(wb).map(|(x, y)| (x - y).abs()).sum());
        if let Some(c) = correlation(wa, wb) {
            corr.push(c);
        }
    }
    let (mu_l1, sd_l1) = mean_sd(&l1);
    let (mu_corr, sd_corr) = if corr.is_empty() {
        (None, None)
    } else {
        let (m, s) = mean_sd(&corr);
        (Some(m), Some(s))
    };
    Ok(WeightDiffSummary {
        n_targets: l1.len(),
        mu_l1,
        sd_l1,
        mu_corr,
        sd_corr,
        n_corr_defined: corr.len(),
    })
}
