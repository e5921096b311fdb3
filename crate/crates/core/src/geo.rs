//! Fixed geometric conventions shared by every stage of the estimator.
//!
//! Distances are great-circle (Haversine) on a sphere of radius
//! [`EARTH_RADIUS_M`]. Displacements live in an equirectangular East–North
//! tangent plane anchored at the origin point, and bearings are measured
//! counterclockwise from the East axis so that they compose directly with
//! [`rotation_matrix`] acting on `(east, north)` column vectors.

use std::f64::consts::PI;

use serde::{Deserialize, Serialize};

use crate::error::{GimbalError, Result};

/// Mean Earth radius in meters.
pub const EARTH_RADIUS_M: f64 = 6_371_000.0;

/// Row-major 2×2 matrix.
pub type Mat2 = [[f64; 2]; 2];

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GeoPoint {
    pub lat: f64,
    pub lon: f64,
}

impl GeoPoint {
    pub fn new(lat: f64, lon: f64) -> Result<Self> {
        let valid = lat.is_finite()
            && lon.is_finite()
            && (-90.0..=90.0).contains(&lat)
            && (-180.0..=180.0).contains(&lon);
        if valid {
            Ok(Self { lat, lon })
        } else {
            Err(GimbalError::InvalidPoint { lat, lon })
        }
    }
}

/// Tangent-plane offset in meters.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct Displacement {
    pub east: f64,
    pub north: f64,
}

impl Displacement {
    pub const ZERO: Displacement = Displacement { east: 0.0, north: 0.0 };

    pub fn new(east: f64, north: f64) -> Self {
        Self { east, north }
    }

    pub fn norm(&self) -> f64 {
        self.east.hypot(self.north)
    }

    pub fn is_zero(&self) -> bool {
        self.east == 0.0 && self.north == 0.0
    }

    /// `m · (east, north)ᵀ`
    pub fn transformed(&self, m: &Mat2) -> Displacement {
        Displacement {
            east: m[0][0] * self.east + m[0][1] * self.north,
            north: m[1][0] * self.east + m[1][1] * self.north,
        }
    }

    /// Quadratic form `Δᵀ M Δ`.
    pub fn quadratic_form(&self, m: &Mat2) -> f64 {
        let (e, n) = (self.east, self.north);
        e * (m[0][0] * e + m[0][1] * n) + n * (m[1][0] * e + m[1][1] * n)
    }
}

/// Wrap a longitude difference in radians into (−π, π].
fn wrap_angle(mut a: f64) -> f64 {
    while a > PI {
        a -= 2.0 * PI;
    }
    while a <= -PI {
        a += 2.0 * PI;
    }
    a
}

/// Great-circle distance in meters.
pub fn haversine_distance(a: GeoPoint, b: GeoPoint) -> f64 {
    if a == b {
        return 0.0;
    }
    let lat1 = a.lat.to_radians();
    let lat2 = b.lat.to_radians();
    let dlat = lat2 - lat1;
    let dlon = wrap_angle((b.lon - a.lon).to_radians());
    let s_lat = (dlat * 0.5).sin();
    let s_lon = (dlon * 0.5).sin();
    let h = (s_lat * s_lat + lat1.cos() * lat2.cos() * s_lon * s_lon).clamp(0.0, 1.0);
    2.0 * EARTH_RADIUS_M * h.sqrt().atan2((1.0 - h).sqrt())
}

/// East–North displacement from `origin` to `target`, using `cos(lat)` of the origin.
pub fn tangent_displacement(origin: GeoPoint, target: GeoPoint) -> Displacement {
    let dlat = (target.lat - origin.lat).to_radians();
    let dlon = wrap_angle((target.lon - origin.lon).to_radians());
    Displacement {
        east: EARTH_RADIUS_M * origin.lat.to_radians().cos() * dlon,
        north: EARTH_RADIUS_M * dlat,
    }
}

/// Inverse of [`tangent_displacement`] about `origin`.
pub fn meters_to_geo(origin: GeoPoint, delta: Displacement) -> GeoPoint {
    let lat = origin.lat + (delta.north / EARTH_RADIUS_M).to_degrees();
    let cos_lat = origin.lat.to_radians().cos();
    let mut lon = origin.lon + (delta.east / (EARTH_RADIUS_M * cos_lat)).to_degrees();
    if lon > 180.0 {
        lon -= 360.0;
    } else if lon < -180.0 {
        lon += 360.0;
    }
    GeoPoint { lat, lon }
}

/// Counterclockwise angle from the East axis, in (−π, π].
///
/// Returns `None` for a zero displacement, where the bearing is undefined.
pub fn bearing(delta: Displacement) -> Option<f64> {
    if delta.is_zero() {
        return None;
    }
    let a = delta.north.atan2(delta.east);
    // atan2(-0.0, negative) yields -π
    Some(if a <= -PI { PI } else { a })
}

pub fn rotation_matrix(alpha: f64) -> Mat2 {
    let (s, c) = alpha.sin_cos();
    [[c, -s], [s, c]]
}

pub fn mat2_mul(a: &Mat2, b: &Mat2) -> Mat2 {
    [
        [
            a[0][0] * b[0][0] + a[0][1] * b[1][0],
            a[0][0] * b[0][1] + a[0][1] * b[1][1],
        ],
        [
            a[1][0] * b[0][0] + a[1][1] * b[1][0],
            a[1][0] * b[0][1] + a[1][1] * b[1][1],
        ],
    ]
}

pub fn mat2_transpose(a: &Mat2) -> Mat2 {
    [[a[0][0], a[1][0]], [a[0][1], a[1][1]]]
}

pub fn mat2_det(a: &Mat2) -> f64 {
    a[0][0] * a[1][1] - a[0][1] * a[1][0]
}

/// Closed-form eigenvalues `(λmax, λmin)` of a symmetric 2×2 matrix.
pub fn sym2_eigenvalues(m: &Mat2) -> (f64, f64) {
    let a = m[0][0];
    let d = m[1][1];
    let b = 0.5 * (m[0][1] + m[1][0]);
    let mean = 0.5 * (a + d);
    let radius = (0.5 * (a - d)).hypot(b);
    (mean + radius, mean - radius)
}
