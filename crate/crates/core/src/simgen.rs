//! Seeded synthetic data in a local East–North meter plane.
//!
//! Three independent ChaCha8 streams share the seed: stream 0 draws
//! locations, stream 1 covariates, stream 2 response noise. Variants that
//! differ only in the response therefore see identical geometry.
//! Normal variates come from `rand_distr::StandardNormal` (ziggurat).

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::dataset::Dataset;
use crate::error::{GimbalError, Result};
use crate::geo::{mat2_mul, meters_to_geo, rotation_matrix, Displacement, GeoPoint, Mat2};

const STREAM_LOCATIONS: u64 = 0;
const STREAM_COVARIATES: u64 = 1;
const STREAM_NOISE: u64 = 2;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Sampling {
    /// Uniform on `[−extent, extent]²`.
    Uniform,
    /// Centered normal with standard deviation `extent / 2` per axis.
    Gaussian,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SimSpec {
    pub n: usize,
    pub lat0: f64,
    pub lon0: f64,
    /// Half-width of the sampling region in meters.
    pub extent: f64,
    pub sampling: Sampling,
    pub rho: f64,
    pub psi: f64,
    pub delta_beta: f64,
    pub sigma: f64,
    pub c_rad: f64,
    pub seed: u64,
}

impl Default for SimSpec {
    fn default() -> Self {
        Self {
            n: 1200,
            lat0: 35.0,
            lon0: 135.0,
            extent: 40_000.0,
            sampling: Sampling::Uniform,
            rho: 1.0,
            psi: 0.0,
            delta_beta: 1.0,
            sigma: 1.0,
            c_rad: 0.0,
            seed: 0,
        }
    }
}

impl SimSpec {
    pub fn validate(&self) -> Result<()> {
        let ok = self.n >= 1
            && self.rho >= 1.0
            && self.rho.is_finite()
            && self.sigma >= 0.0
            && self.extent > 0.0
            && self.psi.is_finite()
            && self.delta_beta.is_finite()
            && self.c_rad.is_finite();
        if !ok {
            return Err(GimbalError::InvalidConfig(format!(
                "simulation needs n ≥ 1, rho ≥ 1, sigma ≥ 0, extent > 0 (got n={}, rho={}, sigma={}, extent={})",
                self.n, self.rho, self.sigma, self.extent
            )));
        }
        GeoPoint::new(self.lat0, self.lon0).map(|_| ())
    }

    pub fn origin(&self) -> GeoPoint {
        GeoPoint { lat: self.lat0, lon: self.lon0 }
    }
}

fn stream(seed: u64, id: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(id);
    rng
}

/// `T(ρ, ψ) = R(−ψ) diag(ρ, 1) R(ψ)`.
pub fn deformation_matrix(rho: f64, psi: f64) -> Mat2 {
    mat2_mul(&mat2_mul(&rotation_matrix(-psi), &[[rho, 0.0], [0.0, 1.0]]), &rotation_matrix(psi))
}

/// Apply `T` to coordinates centered on their sample mean, then re-add the mean.
pub fn deform(planar: &[Displacement], rho: f64, psi: f64) -> Vec<Displacement> {
    let n = planar.len() as f64;
    let mean_e = planar.iter().map(|p| p.east).sum::<f64>() / n;
    let mean_n = planar.iter().map(|p| p.north).sum::<f64>() / n;
    let t = deformation_matrix(rho, psi);
    planar
        .iter()
        .map(|p| {
            let u = Displacement::new(p.east - mean_e, p.north - mean_n).transformed(&t);
            Displacement::new(u.east + mean_e, u.north + mean_n)
        })
        .collect()
}

#[derive(Debug, Clone, PartialEq)]
pub struct SampledLocations {
    pub points: Vec<GeoPoint>,
    /// Deformed planar coordinates relative to `(lat0, lon0)`.
    pub planar: Vec<Displacement>,
}

pub fn sample_locations(spec: &SimSpec) -> Result<SampledLocations> {
    spec.validate()?;
    let mut rng = stream(spec.seed, STREAM_LOCATIONS);
    let raw: Vec<Displacement> = (0..spec.n)
        .map(|_| match spec.sampling {
            Sampling::Uniform => Displacement::new(
                rng.random_range(-spec.extent..spec.extent),
                rng.random_range(-spec.extent..spec.extent),
            ),
            Sampling::Gaussian => {
                let sd = 0.5 * spec.extent;
                let e: f64 = rng.sample(StandardNormal);
                let n: f64 = rng.sample(StandardNormal);
                Displacement::new(sd * e, sd * n)
            }
        })
        .collect();
    let planar = if spec.rho == 1.0 { raw } else { deform(&raw, spec.rho, spec.psi) };
    let origin = spec.origin();
    let points = planar.iter().map(|d| meters_to_geo(origin, *d)).collect();
    Ok(SampledLocations { points, planar })
}

/// `β₁ = 1 + δ_β (lat − mean) / (range + 1e-12)`.
pub fn beta_surface(lats: &[f64], delta_beta: f64) -> Vec<f64> {
    if lats.is_empty() {
        return Vec::new();
    }
    let mean = lats.iter().sum::<f64>() / lats.len() as f64;
    let (lo, hi) = lats.iter().fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), &v| (lo.min(v), hi.max(v)));
    let range = hi - lo + 1e-12;
    lats.iter().map(|&lat| 1.0 + delta_beta * (lat - mean) / range).collect()
}

/// `y = β₁ x + c_rad · r / (r̄ + 1e-12) + ε`, with `r` the planar distance to the centroid.
pub fn gen_response<R: Rng>(planar: &[Displacement], beta1: &[f64], x: &[f64], spec: &SimSpec, noise: &mut R) -> Vec<f64> {
    let n = planar.len() as f64;
    let ce = planar.iter().map(|p| p.east).sum::<f64>() / n;
    let cn = planar.iter().map(|p| p.north).sum::<f64>() / n;
    let r: Vec<f64> = planar.iter().map(|p| (p.east - ce).hypot(p.north - cn)).collect();
    let r_bar = r.iter().sum::<f64>() / n;
    (0..planar.len())
        .map(|i| {
            let eps: f64 = noise.sample(StandardNormal);
            let trend = if spec.c_rad == 0.0 { 0.0 } else { spec.c_rad * r[i] / (r_bar + 1e-12) };
            beta1[i] * x[i] + trend + spec.sigma * eps
        })
        .collect()
}

#[derive(Debug, Clone, PartialEq)]
pub struct SimDataset {
    pub dataset: Dataset,
    /// True coefficient surface `β₁` per row.
    pub beta1: Vec<f64>,
    pub planar: Vec<Displacement>,
}

pub fn simulate(spec: &SimSpec) -> Result<SimDataset> {
    let locs = sample_locations(spec)?;
    let mut cov_rng = stream(spec.seed, STREAM_COVARIATES);
    let x: Vec<f64> = (0..spec.n).map(|_| cov_rng.sample(StandardNormal)).collect();
    let lats: Vec<f64> = locs.points.iter().map(|p| p.lat).collect();
    let beta1 = beta_surface(&lats, spec.delta_beta);
    let mut noise_rng = stream(spec.seed, STREAM_NOISE);
    let y = gen_response(&locs.planar, &beta1, &x, spec, &mut noise_rng);
    Ok(SimDataset {
        dataset: Dataset::new(locs.points, x, y)?,
        beta1,
        planar: locs.planar,
    })
}
