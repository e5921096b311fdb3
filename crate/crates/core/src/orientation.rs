//! Realized orientation quantities for one neighborhood: the bearing
//! resultant `φ`, the value-based orientation `θ*`, and the geometric
//! anisotropy ratio `η`.
//!
//! All sums run in neighbor order so repeated evaluations are bit-identical.

use serde::Serialize;

use crate::geo::{sym2_eigenvalues, Displacement, Mat2};

/// Distance-decay weight `exp(−d²/h²)` used for orientation aggregation.
pub fn decay_weight(distance: f64, h: f64) -> f64 {
    (-(distance * distance) / (h * h)).exp()
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct BearingResultant {
    pub phi: f64,
    pub r_phi: f64,
    pub deactivated: bool,
}

/// Distance-decayed circular mean of bearings with isotropy deactivation.
///
/// Zero-displacement members have no bearing and must not be passed in.
pub fn bearing_resultant(bearings: &[f64], distances: &[f64], h: f64, eps_phi: f64) -> BearingResultant {
    debug_assert_eq!(bearings.len(), distances.len());
    let mut c = 0.0;
    let mut s = 0.0;
    let mut total = 0.0;
    for (&theta, &d) in bearings.iter().zip(distances) {
        let w = decay_weight(d, h);
        c += w * theta.cos();
        s += w * theta.sin();
        total += w;
    }
    if total <= 0.0 {
        return BearingResultant { phi: 0.0, r_phi: 0.0, deactivated: true };
    }
    let r_phi = (c.hypot(s) / total).min(1.0);
    if r_phi > eps_phi {
        BearingResultant { phi: s.atan2(c), r_phi, deactivated: false }
    } else {
        BearingResultant { phi: 0.0, r_phi, deactivated: true }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct ValueOrientation {
    pub theta_z: f64,
    pub g_ident: f64,
    pub deactivated: bool,
}

/// Half-angle diagonalizing the population second-moment matrix of `(z, y)`.
pub fn value_orientation(z: &[f64], y: &[f64], eps_theta: f64) -> ValueOrientation {
    debug_assert_eq!(z.len(), y.len());
    let n = z.len() as f64;
    if z.is_empty() {
        return ValueOrientation { theta_z: 0.0, g_ident: 0.0, deactivated: true };
    }
    let z_bar = z.iter().sum::<f64>() / n;
    let y_bar = y.iter().sum::<f64>() / n;
    let (mut var_z, mut var_y, mut cov) = (0.0, 0.0, 0.0);
    for (&zj, &yj) in z.iter().zip(y) {
        let dz = zj - z_bar;
        let dy = yj - y_bar;
        var_z += dz * dz;
        var_y += dy * dy;
        cov += dz * dy;
    }
    var_z /= n;
    var_y /= n;
    cov /= n;

    let diff = var_y - var_z;
    let g_ident = diff.abs() + (2.0 * cov).abs();
    if g_ident > eps_theta {
        ValueOrientation { theta_z: 0.5 * diff.atan2(2.0 * cov), g_ident, deactivated: false }
    } else {
        ValueOrientation { theta_z: 0.0, g_ident, deactivated: true }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Anisotropy {
    pub eta: f64,
    pub eta_raw: f64,
    pub lambda_max: f64,
    pub lambda_min: f64,
}

/// Weighted displacement second-moment matrix `S = Σ ω̃ ΔΔᵀ`.
pub fn displacement_moment(displacements: &[Displacement], distances: &[f64], h: f64) -> Mat2 {
    let weights: Vec<f64> = distances.iter().map(|&d| decay_weight(d, h)).collect();
    let total: f64 = weights.iter().sum();
    let mut s = [[0.0; 2]; 2];
    if total <= 0.0 {
        return s;
    }
    for (delta, w) in displacements.iter().zip(&weights) {
        let wn = w / total;
        s[0][0] += wn * delta.east * delta.east;
        s[0][1] += wn * delta.east * delta.north;
        s[1][1] += wn * delta.north * delta.north;
    }
    s[1][0] = s[0][1];
    s
}

/// Floored and clipped square-root eigenvalue ratio of the displacement moment.
pub fn anisotropy_ratio(
    displacements: &[Displacement],
    distances: &[f64],
    h: f64,
    eps_eta: f64,
    eta_max: f64,
) -> Anisotropy {
    let s = displacement_moment(displacements, distances, h);
    let (lmax, lmin) = sym2_eigenvalues(&s);
    let lambda_max = lmax.max(0.0);
    let lambda_min = lmin.max(0.0);
    let eta_raw = (lambda_max / lambda_min.max(eps_eta)).sqrt();
    Anisotropy {
        eta: eta_raw.max(1.0).min(eta_max),
        eta_raw,
        lambda_max,
        lambda_min,
    }
}

/// Orientation state for one target, after any ablation overrides.
///
/// `phi_deactivated`, `theta_deactivated` always equal their threshold
/// predicates on the data; the `*_forced` flags record mode overrides.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct OrientationResult {
    pub phi: f64,
    pub r_phi: f64,
    pub phi_deactivated: bool,
    pub phi_forced: bool,
    pub theta_z: f64,
    pub g_ident: f64,
    pub theta_deactivated: bool,
    pub theta_forced: bool,
    pub eta: f64,
    pub eta_forced: bool,
    /// Eigenvalues `(λmax, λmin)` of the displacement second-moment matrix.
    pub s_matrix_eigs: (f64, f64),
}

impl OrientationResult {
    /// Fully isotropic orientation: `φ = 0`, `θ* = 0`, `η = 1`.
    pub fn isotropic() -> Self {
        Self {
            phi: 0.0,
            r_phi: 0.0,
            phi_deactivated: true,
            phi_forced: false,
            theta_z: 0.0,
            g_ident: 0.0,
            theta_deactivated: true,
            theta_forced: false,
            eta: 1.0,
            eta_forced: false,
            s_matrix_eigs: (0.0, 0.0),
        }
    }

    pub fn phi_is_zero(&self) -> bool {
        self.phi_deactivated || self.phi_forced
    }

    pub fn theta_is_zero(&self) -> bool {
        self.theta_deactivated || self.theta_forced
    }
}
