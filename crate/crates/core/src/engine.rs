//! The realized estimator map per target: neighborhood → orientation →
//! safeguarded weights → closed-form solve, plus batch fitting and the
//! out-of-sample prediction protocol.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::dataset::Dataset;
use crate::error::{GimbalError, Result};
use crate::geo::{bearing, tangent_displacement, GeoPoint};
use crate::linalg::DenseMatrix;
use crate::neighborhood::{knn, Neighborhood};
use crate::orientation::{anisotropy_ratio, bearing_resultant, value_orientation, OrientationResult};
use crate::solver::{cond_wls2, solve_local, LocalFit};
use crate::weights::{one_shot_safeguard, RealizedWeightMap, SafeguardBranch};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ThetaMode {
    On,
    Off,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PhiMode {
    On,
    ForcedZero,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum EtaMode {
    Geometry,
    ForcedOne,
}

/// Deterministic tuning constants of the estimator map.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct GimbalConfig {
    pub k: usize,
    /// Nominal bandwidth in meters.
    pub h: f64,
    pub gamma: f64,
    /// Distance-normalization scale in meters; `None` means `u = h`.
    pub u: Option<f64>,
    pub n0: f64,
    pub n_min: f64,
    pub eta_max: f64,
    pub eps_phi: f64,
    pub eps_theta: f64,
    pub eps_eta: f64,
    pub theta_z_mode: ThetaMode,
    pub phi_mode: PhiMode,
    pub eta_mode: EtaMode,
    pub seed: u64,
}

impl Default for GimbalConfig {
    fn default() -> Self {
        Self {
            k: 50,
            h: 3000.0,
            gamma: 1.0,
            u: None,
            n0: 15.0,
            n_min: 4.0,
            eta_max: 50.0,
            eps_phi: 1e-3,
            eps_theta: 1e-8,
            eps_eta: 1e-8,
            theta_z_mode: ThetaMode::On,
            phi_mode: PhiMode::On,
            eta_mode: EtaMode::Geometry,
            seed: 0,
        }
    }
}

impl GimbalConfig {
    pub fn distance_scale(&self) -> f64 {
        self.u.unwrap_or(self.h)
    }

    pub fn validate(&self) -> Result<()> {
        let positive = [
            ("h", self.h),
            ("u", self.distance_scale()),
            ("n0", self.n0),
            ("n_min", self.n_min),
            ("eps_phi", self.eps_phi),
            ("eps_theta", self.eps_theta),
            ("eps_eta", self.eps_eta),
        ];
        for (name, v) in positive {
            if !(v > 0.0 && v.is_finite()) {
                return Err(GimbalError::InvalidConfig(format!("{name} must be positive and finite, got {v}")));
            }
        }
        if self.k == 0 {
            return Err(GimbalError::InvalidConfig("k must be at least 1".into()));
        }
        if !(self.gamma >= 0.0 && self.gamma.is_finite()) {
            return Err(GimbalError::InvalidConfig(format!("gamma must be ≥ 0, got {}", self.gamma)));
        }
        if !(self.eta_max >= 1.0 && self.eta_max.is_finite()) {
            return Err(GimbalError::InvalidConfig(format!("eta_max must be ≥ 1, got {}", self.eta_max)));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum BranchCode {
    /// `φ = 0` (isotropy threshold or forced).
    PhiIso,
    /// `θ* = 0` (non-identifiable or forced).
    ThetaNonident,
    UniformFallback,
    UnderflowFallback,
    IllPosed,
}

impl BranchCode {
    pub fn as_str(&self) -> &'static str {
        match self {
            BranchCode::PhiIso => "phi_iso",
            BranchCode::ThetaNonident => "theta_nonident",
            BranchCode::UniformFallback => "uniform_fallback",
            BranchCode::UnderflowFallback => "underflow_fallback",
            BranchCode::IllPosed => "ill_posed",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct LocationRecord {
    pub index: usize,
    pub neighborhood: Neighborhood,
    pub orientation: OrientationResult,
    pub weight_map: RealizedWeightMap,
    pub fit: LocalFit,
    pub cond_wls2: f64,
    pub branch_codes: Vec<BranchCode>,
}

impl LocationRecord {
    pub fn has(&self, code: BranchCode) -> bool {
        self.branch_codes.contains(&code)
    }

    /// `β̂₀ + β̂₁·x` with the distance-trend regressor at zero.
    pub fn predict_at_origin(&self, x: f64) -> Option<f64> {
        self.fit.beta.as_ref().map(|b| b[0] + b[1] * x)
    }
}

/// Local design over one neighborhood.
#[derive(Debug, Clone, PartialEq)]
pub struct LocalDesign {
    /// Columns `[1, x_j, z_ij]`.
    pub x: DenseMatrix,
    pub y: Vec<f64>,
    pub z: Vec<f64>,
}

pub fn build_local_design(dataset: &Dataset, neighborhood: &Neighborhood, u: f64) -> LocalDesign {
    let n = neighborhood.len();
    let mut x = DenseMatrix::zeros(n, 3);
    let mut y = Vec::with_capacity(n);
    let mut z = Vec::with_capacity(n);
    for (row, (&j, &d)) in neighborhood.member_indices.iter().zip(&neighborhood.distances).enumerate() {
        let zj = d / u;
        x.set(row, 0, 1.0);
        x.set(row, 1, dataset.x[j]);
        x.set(row, 2, zj);
        y.push(dataset.y[j]);
        z.push(zj);
    }
    LocalDesign { x, y, z }
}

/// Dataset-level z-scoring of the covariate for the `[1, x]` conditioning diagnostic.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Standardizer {
    mean: f64,
    sd: f64,
}

impl Standardizer {
    pub fn fit(values: &[f64]) -> Self {
        let n = values.len().max(1) as f64;
        let mean = values.iter().sum::<f64>() / n;
        let var = values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / n;
        Self { mean, sd: var.sqrt() }
    }

    pub fn apply(&self, v: f64) -> f64 {
        if self.sd > 0.0 {
            (v - self.mean) / self.sd
        } else {
            v - self.mean
        }
    }
}

fn realize(
    dataset: &Dataset,
    config: &GimbalConfig,
    origin: GeoPoint,
    neighborhood: Neighborhood,
    standardizer: &Standardizer,
    index: usize,
) -> Result<LocationRecord> {
    let displacements: Vec<_> = neighborhood
        .member_indices
        .iter()
        .map(|&j| tangent_displacement(origin, dataset.points[j]))
        .collect();

    // members at the origin carry no bearing
    let (bearings, bearing_dists): (Vec<f64>, Vec<f64>) = displacements
        .iter()
        .zip(&neighborhood.distances)
        .filter_map(|(d, &dist)| bearing(*d).map(|b| (b, dist)))
        .unzip();
    let resultant = bearing_resultant(&bearings, &bearing_dists, config.h, config.eps_phi);

    let design = build_local_design(dataset, &neighborhood, config.distance_scale());
    let value = value_orientation(&design.z, &design.y, config.eps_theta);
    let aniso = anisotropy_ratio(&displacements, &neighborhood.distances, config.h, config.eps_eta, config.eta_max);

    let phi_forced = config.phi_mode == PhiMode::ForcedZero;
    let theta_forced = config.theta_z_mode == ThetaMode::Off;
    let eta_forced = config.eta_mode == EtaMode::ForcedOne;
    let orientation = OrientationResult {
        phi: if phi_forced { 0.0 } else { resultant.phi },
        r_phi: resultant.r_phi,
        phi_deactivated: resultant.deactivated,
        phi_forced,
        theta_z: if theta_forced { 0.0 } else { value.theta_z },
        g_ident: value.g_ident,
        theta_deactivated: value.deactivated,
        theta_forced,
        eta: if eta_forced { 1.0 } else { aniso.eta },
        eta_forced,
        s_matrix_eigs: (aniso.lambda_max, aniso.lambda_min),
    };

    let weight_map = one_shot_safeguard(&displacements, &orientation, config.h, config.n0, config.n_min);
    let fit = solve_local(&design.x, &design.y, &weight_map.weights, config.gamma)?;

    let x2 = DenseMatrix::from_row_major(
        neighborhood.len(),
        2,
        neighborhood
            .member_indices
            .iter()
            .flat_map(|&j| [1.0, standardizer.apply(dataset.x[j])])
            .collect(),
    );
    let cond = cond_wls2(&x2, &weight_map.weights);

    let mut branch_codes = Vec::new();
    if orientation.phi_is_zero() {
        branch_codes.push(BranchCode::PhiIso);
    }
    if orientation.theta_is_zero() {
        branch_codes.push(BranchCode::ThetaNonident);
    }
    match weight_map.branch {
        SafeguardBranch::Corrected => {}
        SafeguardBranch::UniformFallback => branch_codes.push(BranchCode::UniformFallback),
        SafeguardBranch::UnderflowFallback => branch_codes.push(BranchCode::UnderflowFallback),
    }
    if !fit.well_posed {
        branch_codes.push(BranchCode::IllPosed);
    }

    Ok(LocationRecord {
        index,
        neighborhood,
        orientation,
        weight_map,
        fit,
        cond_wls2: cond,
        branch_codes,
    })
}

fn check_inputs(dataset: &Dataset, config: &GimbalConfig) -> Result<()> {
    config.validate()?;
    if config.k > dataset.len() {
        return Err(GimbalError::NeighborhoodTooLarge { target: 0, k: config.k, eligible: dataset.len() });
    }
    Ok(())
}

fn fit_location_with(
    dataset: &Dataset,
    config: &GimbalConfig,
    target_index: usize,
    standardizer: &Standardizer,
) -> Result<LocationRecord> {
    let origin = dataset.points[target_index];
    let nb = knn(&dataset.points, origin, config.k, Some(target_index), None)?;
    realize(dataset, config, origin, nb, standardizer, target_index)
}

/// In-sample fit at one observation; its own row is part of the neighborhood.
pub fn fit_location(dataset: &Dataset, config: &GimbalConfig, target_index: usize) -> Result<LocationRecord> {
    check_inputs(dataset, config)?;
    if target_index >= dataset.len() {
        return Err(GimbalError::DimensionMismatch(format!(
            "target {target_index} outside a table of {} rows",
            dataset.len()
        )));
    }
    fit_location_with(dataset, config, target_index, &Standardizer::fit(&dataset.x))
}

/// Fit every observation in parallel; output order follows input order.
pub fn fit_all(dataset: &Dataset, config: &GimbalConfig) -> Result<Vec<LocationRecord>> {
    check_inputs(dataset, config)?;
    let standardizer = Standardizer::fit(&dataset.x);
    (0..dataset.len())
        .into_par_iter()
        .map(|i| fit_location_with(dataset, config, i, &standardizer))
        .collect()
}

/// Single-threaded [`fit_all`].
pub fn fit_all_serial(dataset: &Dataset, config: &GimbalConfig) -> Result<Vec<LocationRecord>> {
    check_inputs(dataset, config)?;
    let standardizer = Standardizer::fit(&dataset.x);
    (0..dataset.len())
        .map(|i| fit_location_with(dataset, config, i, &standardizer))
        .collect()
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Prediction {
    /// `None` when the local solve is ill-posed.
    pub value: Option<f64>,
    pub record: LocationRecord,
}

/// Out-of-sample prediction from the training pool only, trend regressor at zero.
pub fn predict_at(
    training: &Dataset,
    config: &GimbalConfig,
    target_point: GeoPoint,
    target_covariate: f64,
) -> Result<Prediction> {
    check_inputs(training, config)?;
    predict_with(training, config, target_point, target_covariate, &Standardizer::fit(&training.x))
}

fn predict_with(
    training: &Dataset,
    config: &GimbalConfig,
    target_point: GeoPoint,
    target_covariate: f64,
    standardizer: &Standardizer,
) -> Result<Prediction> {
    let nb = knn(&training.points, target_point, config.k, None, None)?;
    let record = realize(training, config, target_point, nb, standardizer, usize::MAX)?;
    Ok(Prediction { value: record.predict_at_origin(target_covariate), record })
}

/// Predict a batch of targets in parallel, preserving order.
pub fn predict_all(training: &Dataset, config: &GimbalConfig, targets: &Dataset) -> Result<Vec<Prediction>> {
    check_inputs(training, config)?;
    let standardizer = Standardizer::fit(&training.x);
    (0..targets.len())
        .into_par_iter()
        .map(|i| {
            let mut p = predict_with(training, config, targets.points[i], targets.x[i], &standardizer)?;
            p.record.index = i;
            Ok(p)
        })
        .collect()
}

/// Training residual `y_j − (β̂₀ + β̂₁ x_j)` from each in-sample fit; `None` where ill-posed.
pub fn in_sample_residuals(dataset: &Dataset, records: &[LocationRecord]) -> Vec<Option<f64>> {
    records
        .iter()
        .map(|r| r.predict_at_origin(dataset.x[r.index]).map(|f| dataset.y[r.index] - f))
        .collect()
}

/// Unweighted mean of the `k_resid` nearest training residuals.
pub fn residual_knn_correct(
    training_residuals: &[f64],
    training_points: &[GeoPoint],
    target_point: GeoPoint,
    k_resid: usize,
) -> Result<f64> {
    if training_residuals.len() != training_points.len() {
        return Err(GimbalError::DimensionMismatch(format!(
            "{} residuals for {} points",
            training_residuals.len(),
            training_points.len()
        )));
    }
    let nb = knn(training_points, target_point, k_resid, None, None)?;
    Ok(nb.member_indices.iter().map(|&j| training_residuals[j]).sum::<f64>() / k_resid as f64)
}
