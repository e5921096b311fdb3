//! Named ablations of the weight map, selectable at runtime.
//!
//! Each variant rewrites the orientation modes (or thresholds) of a base
//! configuration; the estimator itself never changes.

use crate::engine::{EtaMode, GimbalConfig, PhiMode, ThetaMode};
use crate::error::{GimbalError, Result};

/// Isotropy threshold used by the strict bearing rerun.
pub const STRICT_EPS_PHI: f64 = 0.30;

pub trait WeightingVariant: Send + Sync {
    /// Registry key, e.g. `iso-proxy`.
    fn name(&self) -> &'static str;
    fn description(&self) -> &'static str;
    fn configure(&self, base: &GimbalConfig) -> GimbalConfig;
}

pub struct Full;
pub struct StrictPhi;
pub struct ThetaOff;
pub struct IsotropicProxy;

impl WeightingVariant for Full {
    fn name(&self) -> &'static str {
        "full"
    }
    fn description(&self) -> &'static str {
        "all orientation mechanisms active"
    }
    fn configure(&self, base: &GimbalConfig) -> GimbalConfig {
        GimbalConfig {
            theta_z_mode: ThetaMode::On,
            phi_mode: PhiMode::On,
            eta_mode: EtaMode::Geometry,
            ..base.clone()
        }
    }
}

impl WeightingVariant for StrictPhi {
    fn name(&self) -> &'static str {
        "strict-phi"
    }
    fn description(&self) -> &'static str {
        "full map rerun with bearing isotropy threshold 0.30"
    }
    fn configure(&self, base: &GimbalConfig) -> GimbalConfig {
        GimbalConfig { eps_phi: STRICT_EPS_PHI, ..Full.configure(base) }
    }
}

impl WeightingVariant for ThetaOff {
    fn name(&self) -> &'static str {
        "theta-off"
    }
    fn description(&self) -> &'static str {
        "value-based orientation forced to zero"
    }
    fn configure(&self, base: &GimbalConfig) -> GimbalConfig {
        GimbalConfig { theta_z_mode: ThetaMode::Off, ..Full.configure(base) }
    }
}

impl WeightingVariant for IsotropicProxy {
    fn name(&self) -> &'static str {
        "iso-proxy"
    }
    fn description(&self) -> &'static str {
        "phi = 0, theta = 0, eta = 1: isotropic Gaussian weights"
    }
    fn configure(&self, base: &GimbalConfig) -> GimbalConfig {
        GimbalConfig {
            theta_z_mode: ThetaMode::Off,
            phi_mode: PhiMode::ForcedZero,
            eta_mode: EtaMode::ForcedOne,
            ..base.clone()
        }
    }
}

pub struct VariantRegistry {
    entries: Vec<Box<dyn WeightingVariant>>,
}

impl VariantRegistry {
    pub fn empty() -> Self {
        Self { entries: Vec::new() }
    }

    pub fn builtin() -> Self {
        let mut r = Self::empty();
        r.register(Box::new(Full));
        r.register(Box::new(StrictPhi));
        r.register(Box::new(ThetaOff));
        r.register(Box::new(IsotropicProxy));
        r
    }

    /// Later registrations replace earlier ones with the same name.
    pub fn register(&mut self, variant: Box<dyn WeightingVariant>) {
        self.entries.retain(|v| v.name() != variant.name());
        self.entries.push(variant);
    }

    pub fn get(&self, name: &str) -> Result<&dyn WeightingVariant> {
        self.entries
            .iter()
            .find(|v| v.name() == name)
            .map(|v| v.as_ref())
            .ok_or_else(|| GimbalError::UnknownStrategy {
                kind: "variant",
                name: name.to_string(),
                available: self.names().join(", "),
            })
    }

    pub fn names(&self) -> Vec<&'static str> {
        self.entries.iter().map(|v| v.name()).collect()
    }

    pub fn iter(&self) -> impl Iterator<Item = &dyn WeightingVariant> {
        self.entries.iter().map(|v| v.as_ref())
    }
}
