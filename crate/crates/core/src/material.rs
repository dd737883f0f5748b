//! Isotropic linear elastic materials.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Isotropic elastic solid stored as density and Lamé parameters.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ElasticMaterial {
    density: f64,
    shear_modulus: f64,
    lambda: f64,
}

/// Material as written in configuration files: density and wave speeds.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MaterialSpec {
    pub density: f64,
    pub cp: f64,
    pub cs: f64,
}

impl ElasticMaterial {
    pub fn from_lame(density: f64, shear_modulus: f64, lambda: f64) -> Result<Self> {
        let m = Self {
            density,
            shear_modulus,
            lambda,
        };
        m.validate()?;
        Ok(m)
    }

    /// Builds a material from density and wave speeds:
    /// `mu = rho cs^2`, `lambda = rho cp^2 - 2 mu`.
    pub fn from_wave_speeds(density: f64, cp: f64, cs: f64) -> Result<Self> {
        if !(cp.is_finite() && cs.is_finite()) || cs <= 0.0 || cp <= cs {
            return Err(Error::Material(format!(
                "wave speeds must satisfy cp > cs > 0 (cp = {cp}, cs = {cs})"
            )));
        }
        let mu = density * cs * cs;
        let lambda = density * cp * cp - 2.0 * mu;
        Self::from_lame(density, mu, lambda)
    }

    fn validate(&self) -> Result<()> {
        if !(self.density.is_finite() && self.density > 0.0) {
            return Err(Error::Material(format!("density must be > 0, got {}", self.density)));
        }
        if !(self.shear_modulus.is_finite() && self.shear_modulus > 0.0) {
            return Err(Error::Material(format!(
                "shear modulus must be > 0, got {}",
                self.shear_modulus
            )));
        }
        let bulk = self.lambda + 2.0 * self.shear_modulus / 3.0;
        if !(self.lambda.is_finite() && bulk > 0.0) {
            return Err(Error::Material(format!("bulk modulus must be > 0, got {bulk}")));
        }
        Ok(())
    }

    pub fn density(&self) -> f64 {
        self.density
    }

    pub fn shear_modulus(&self) -> f64 {
        self.shear_modulus
    }

    pub fn lambda(&self) -> f64 {
        self.lambda
    }

    pub fn cs(&self) -> f64 {
        (self.shear_modulus / self.density).sqrt()
    }

    pub fn cp(&self) -> f64 {
        ((self.lambda + 2.0 * self.shear_modulus) / self.density).sqrt()
    }

    pub fn poisson_ratio(&self) -> f64 {
        self.lambda / (2.0 * (self.lambda + self.shear_modulus))
    }

    /// Shear impedance `mu / cs = rho cs`.
    pub fn shear_impedance(&self) -> f64 {
        self.shear_modulus / self.cs()
    }

    /// Same density, both wave speeds multiplied by `factor`.
    pub fn with_speed_factor(&self, factor: f64) -> Result<Self> {
        Self::from_wave_speeds(self.density, self.cp() * factor, self.cs() * factor)
    }

    pub fn spec(&self) -> MaterialSpec {
        MaterialSpec {
            density: self.density,
            cp: self.cp(),
            cs: self.cs(),
        }
    }
}

impl MaterialSpec {
    pub fn build(&self) -> Result<ElasticMaterial> {
        ElasticMaterial::from_wave_speeds(self.density, self.cp, self.cs)
    }
}

/// `(cp, cs)` for a material.
pub fn derive_wavespeeds(material: &ElasticMaterial) -> (f64, f64) {
    (material.cp(), material.cs())
}
