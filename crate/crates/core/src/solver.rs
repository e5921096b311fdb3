//! Closed-form directionally modulated local solve
//! `β̂ = (XᵀX + 2γ XᵀWX)⁻¹ (Xᵀy + 2γ XᵀWy)` with conditioning diagnostics.

use serde::Serialize;

use crate::error::{GimbalError, Result};
use crate::linalg::{cholesky, cholesky_solve, symmetric_eigenvalues, DenseMatrix};

/// Floor applied to the smallest eigenvalue in every condition number.
pub const KAPPA_FLOOR: f64 = 1e-12;
/// `λmin / λmax` at or below this declares the normal matrix singular.
pub const SINGULAR_RATIO: f64 = 1e-12;

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct LocalFit {
    /// `None` when the normal matrix is singular and the location is excluded.
    pub beta: Option<Vec<f64>>,
    pub m_nor_condition: f64,
    pub lambda_max: f64,
    pub lambda_min: f64,
    pub operator_norm_bound: Option<f64>,
    pub well_posed: bool,
    pub rmse_local: Option<f64>,
    /// `None` when undefined (ill-posed, or constant response).
    pub r2_local: Option<f64>,
    pub residuals: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct FitSummary {
    pub rmse: f64,
    pub r2: Option<f64>,
    pub residuals: Vec<f64>,
}

/// `λmax / max(λmin, ε)` for eigenvalues sorted descending.
pub fn condition_from_eigenvalues(eig: &[f64]) -> f64 {
    let hi = eig.first().copied().unwrap_or(0.0);
    let lo = eig.last().copied().unwrap_or(0.0);
    hi / lo.max(KAPPA_FLOOR)
}

fn modulated_normal_matrix(x: &DenseMatrix, weights: &[f64], gamma: f64) -> DenseMatrix {
    let plain = x.weighted_gram(None);
    if gamma == 0.0 {
        return plain;
    }
    plain.add_scaled(&x.weighted_gram(Some(weights)), 2.0 * gamma)
}

fn is_singular(eig: &[f64]) -> bool {
    let hi = eig.first().copied().unwrap_or(0.0);
    let lo = eig.last().copied().unwrap_or(0.0);
    !(hi > 0.0 && hi.is_finite()) || lo / hi <= SINGULAR_RATIO
}

pub fn solve_local(x: &DenseMatrix, y: &[f64], weights: &[f64], gamma: f64) -> Result<LocalFit> {
    check_dims(x, y.len(), weights.len())?;
    let m_nor = modulated_normal_matrix(x, weights, gamma);
    let eig = symmetric_eigenvalues(&m_nor);
    let lambda_max = eig[0];
    let lambda_min = eig[eig.len() - 1];
    let m_nor_condition = condition_from_eigenvalues(&eig);

    let ill_posed = LocalFit {
        beta: None,
        m_nor_condition,
        lambda_max,
        lambda_min,
        operator_norm_bound: None,
        well_posed: false,
        rmse_local: None,
        r2_local: None,
        residuals: Vec::new(),
    };
    if is_singular(&eig) {
        return Ok(ill_posed);
    }
    // The eigenvalue test decides singularity; Cholesky only produces the solve.
    let Some(l) = cholesky(&m_nor) else {
        return Ok(ill_posed);
    };

    let mut rhs = x.weighted_xt_vec(None, y);
    if gamma != 0.0 {
        let weighted = x.weighted_xt_vec(Some(weights), y);
        for (r, w) in rhs.iter_mut().zip(weighted) {
            *r += 2.0 * gamma * w;
        }
    }
    let beta = cholesky_solve(&l, &rhs);
    let summary = local_fit_summaries(x, y, &beta);
    let bound = rhs_operator_norm(x, weights, gamma) / lambda_min;
    Ok(LocalFit {
        beta: Some(beta),
        m_nor_condition,
        lambda_max,
        lambda_min,
        operator_norm_bound: Some(bound),
        well_posed: true,
        rmse_local: Some(summary.rmse),
        r2_local: summary.r2,
        residuals: summary.residuals,
    })
}

fn check_dims(x: &DenseMatrix, n_y: usize, n_w: usize) -> Result<()> {
    if x.rows() != n_y || x.rows() != n_w {
        return Err(GimbalError::DimensionMismatch(format!(
            "design has {} rows, response {n_y}, weights {n_w}",
            x.rows()
        )));
    }
    if x.cols() == 0 {
        return Err(GimbalError::DimensionMismatch("design has no columns".into()));
    }
    Ok(())
}

/// `‖B‖₂` for `B = Xᵀ + 2γ XᵀW`, via `λmax(B Bᵀ)`.
fn rhs_operator_norm(x: &DenseMatrix, weights: &[f64], gamma: f64) -> f64 {
    // B Bᵀ = Xᵀ diag((1 + 2γ w)²) X
    let scale: Vec<f64> = weights.iter().map(|w| (1.0 + 2.0 * gamma * w).powi(2)).collect();
    let bbt = x.weighted_gram(Some(&scale));
    symmetric_eigenvalues(&bbt)[0].max(0.0).sqrt()
}

/// Lipschitz bound `‖M_nor⁻¹‖₂ · ‖B‖₂` of the map `y ↦ β̂`.
pub fn stability_bound(x: &DenseMatrix, weights: &[f64], gamma: f64) -> Result<f64> {
    check_dims(x, weights.len(), weights.len())?;
    let eig = symmetric_eigenvalues(&modulated_normal_matrix(x, weights, gamma));
    if is_singular(&eig) {
        return Err(GimbalError::SingularSystem);
    }
    Ok(rhs_operator_norm(x, weights, gamma) / eig[eig.len() - 1])
}

/// Unweighted residual summaries over the neighborhood.
pub fn local_fit_summaries(x: &DenseMatrix, y: &[f64], beta: &[f64]) -> FitSummary {
    let fitted = x.mul_vec(beta);
    let residuals: Vec<f64> = y.iter().zip(&fitted).map(|(a, b)| a - b).collect();
    let n = y.len() as f64;
    let sse: f64 = residuals.iter().map(|r| r * r).sum();
    let y_bar = y.iter().sum::<f64>() / n;
    let sst: f64 = y.iter().map(|v| (v - y_bar).powi(2)).sum();
    FitSummary {
        rmse: (sse / n).sqrt(),
        r2: (sst > 0.0).then(|| 1.0 - sse / sst),
        residuals,
    }
}

/// Condition number of `XᵀWX` for a standardized `[1, x]` design.
pub fn cond_wls2(x2: &DenseMatrix, weights: &[f64]) -> f64 {
    let g = x2.weighted_gram(Some(weights));
    condition_from_eigenvalues(&symmetric_eigenvalues(&g))
}
