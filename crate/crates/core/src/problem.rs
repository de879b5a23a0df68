//! Model parameters of the Schrodinger-Poisson system
//!
//! ```text
//! i u_t = -alpha Lap u + beta Phi u + V u + [cubic] |u|^2 u
//! A1(Phi, chi) = mu (|u|^2 - c, chi)
//! ```
//!
//! with homogeneous Dirichlet data for `u` and `Phi`.

use std::fmt;
use std::sync::Arc;

use num_complex::Complex64;

use crate::error::{Error, Result};
use crate::mesh::RectDomain;

pub type RealFn = Arc<dyn Fn(f64, f64) -> f64 + Send + Sync>;
pub type ComplexFn = Arc<dyn Fn(f64, f64) -> Complex64 + Send + Sync>;

/// External potential `V(x, y)`, evaluated exactly at quadrature points.
#[derive(Clone)]
pub enum Potential {
    /// `V0 = 0`
    Zero,
    /// `V1 = (x^2 + y^2) / 2`
    Harmonic,
    /// `V2 = (x^2 - y^2) / 2`
    Saddle,
    Custom(RealFn),
}

impl Potential {
    #[inline]
    pub fn eval(&self, x: f64, y: f64) -> f64 {
        match self {
            Potential::Zero => 0.0,
            Potential::Harmonic => 0.5 * (x * x + y * y),
            Potential::Saddle => 0.5 * (x * x - y * y),
            Potential::Custom(f) => f(x, y),
        }
    }

    pub fn is_zero(&self) -> bool {
        matches!(self, Potential::Zero)
    }

    pub fn name(&self) -> &'static str {
        match self {
            Potential::Zero => "V0",
            Potential::Harmonic => "V1",
            Potential::Saddle => "V2",
            Potential::Custom(_) => "custom",
        }
    }
}

impl std::str::FromStr for Potential {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "V0" | "v0" | "zero" => Ok(Potential::Zero),
            "V1" | "v1" | "harmonic" => Ok(Potential::Harmonic),
            "V2" | "v2" | "saddle" => Ok(Potential::Saddle),
            _ => Err(Error::Config(format!("unknown potential '{s}' (expected V0, V1 or V2)"))),
        }
    }
}

impl fmt::Debug for Potential {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

/// The vortex state `(x + iy) exp(-(x^2 + y^2)/4) / sqrt(2 pi)`. Its mass
/// over the whole plane is exactly 2.
pub fn vortex_initial_condition(x: f64, y: f64) -> Complex64 {
    Complex64::new(x, y) * ((-(x * x + y * y) / 4.0).exp() / (2.0 * std::f64::consts::PI).sqrt())
}

#[derive(Clone)]
pub enum InitialCondition {
    Vortex,
    Zero,
    Custom(ComplexFn),
}

impl InitialCondition {
    pub fn eval(&self, x: f64, y: f64) -> Complex64 {
        match self {
            InitialCondition::Vortex => vortex_initial_condition(x, y),
            InitialCondition::Zero => Complex64::new(0.0, 0.0),
            InitialCondition::Custom(f) => f(x, y),
        }
    }

    pub fn name(&self) -> &'static str {
        match self {
            InitialCondition::Vortex => "vortex",
            InitialCondition::Zero => "zero",
            InitialCondition::Custom(_) => "custom",
        }
    }
}

impl std::str::FromStr for InitialCondition {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "vortex" => Ok(InitialCondition::Vortex),
            "zero" => Ok(InitialCondition::Zero),
            _ => Err(Error::Config(format!("unknown initial condition '{s}' (expected vortex or zero)"))),
        }
    }
}

impl fmt::Debug for InitialCondition {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

#[derive(Debug, Clone)]
pub struct ProblemSpec {
    pub alpha: f64,
    pub mu: f64,
    pub c: f64,
    pub beta: f64,
    pub include_cubic: bool,
    pub potential: Potential,
    pub domain: RectDomain,
    pub initial: InitialCondition,
}

impl ProblemSpec {
    /// Full model on `[-8, 8]^2`: `alpha = 1/2`, `mu = 1`, `c = 1`,
    /// `beta = 1`, cubic term on, vortex initial data.
    pub fn sp_full(potential: Potential) -> Self {
        Self {
            alpha: 0.5,
            mu: 1.0,
            c: 1.0,
            beta: 1.0,
            include_cubic: true,
            potential,
            domain: RectDomain { xmin: -8.0, xmax: 8.0, ymin: -8.0, ymax: 8.0 },
            initial: InitialCondition::Vortex,
        }
    }

    /// Constant-coefficient model `i u_t = -alpha Lap u + beta Phi u`,
    /// `Lap Phi = |u|^2 - c`, i.e. `mu = -1` in the weak Poisson form.
    pub fn sp_constcoef(alpha: f64, beta: f64) -> Self {
        Self { alpha, beta, mu: -1.0, include_cubic: false, potential: Potential::Zero, ..Self::sp_full(Potential::Zero) }
    }

    pub fn validate(&self) -> Result<()> {
        let finite = [self.alpha, self.mu, self.c, self.beta].iter().all(|v| v.is_finite());
        if !finite {
            return Err(Error::Config("problem coefficients must be finite".into()));
        }
        if self.alpha <= 0.0 {
            return Err(Error::Config(format!("problem.alpha must be positive, got {}", self.alpha)));
        }
        if self.mu == 0.0 {
            return Err(Error::Config("problem.mu must be nonzero".into()));
        }
        Ok(())
    }

    /// False when `mu` is a real other than `+-1`; such values are accepted
    /// but fall outside the model's usual scaling.
    pub fn has_unit_mu(&self) -> bool {
        self.mu.abs() == 1.0
    }

    pub fn cubic_coefficient(&self) -> f64 {
        if self.include_cubic {
            1.0
        } else {
            0.0
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn presets() {
        let p = ProblemSpec::sp_full(Potential::Saddle);
        assert_eq!((p.alpha, p.mu, p.c, p.beta, p.include_cubic), (0.5, 1.0, 1.0, 1.0, true));
        let q = ProblemSpec::sp_constcoef(1.0, 1.0);
        assert_eq!((q.mu, q.include_cubic, q.potential.is_zero()), (-1.0, false, true));
        q.validate().unwrap();
        assert!(ProblemSpec { alpha: 0.0, ..p.clone() }.validate().is_err());
        assert!(!ProblemSpec { mu: 2.0, ..p }.has_unit_mu());
    }

    #[test]
    fn potentials() {
        assert_eq!(Potential::Harmonic.eval(1.0, 2.0), 2.5);
        assert_eq!(Potential::Saddle.eval(1.0, 2.0), -1.5);
        assert!("V3".parse::<Potential>().is_err());
        assert_eq!("V2".parse::<Potential>().unwrap().name(), "V2");
    }

    #[test]
    fn vortex_is_radially_symmetric_in_modulus() {
        let a = vortex_initial_condition(1.0, 0.0).norm();
        let b = vortex_initial_condition(0.0, -1.0).norm();
        assert!((a - b).abs() < 1e-15);
        assert_eq!(vortex_initial_condition(0.0, 0.0), Complex64::new(0.0, 0.0));
    }
}
