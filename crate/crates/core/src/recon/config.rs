use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{invalid, Error, Result};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum ReconMethod {
    #[serde(rename = "ADC")]
    Adc,
    #[serde(rename = "TV")]
    Tv,
    #[serde(rename = "wTV")]
    Wtv,
    #[serde(rename = "dTV")]
    Dtv,
    #[serde(rename = "AG-TV")]
    AgTv,
}

impl ReconMethod {
    pub const ALL: [ReconMethod; 5] = [
        ReconMethod::Adc,
        ReconMethod::Tv,
        ReconMethod::Wtv,
        ReconMethod::Dtv,
        ReconMethod::AgTv,
    ];

    pub fn as_str(&self) -> &'static str {
        match self {
            ReconMethod::Adc => "ADC",
            ReconMethod::Tv => "TV",
            ReconMethod::Wtv => "wTV",
            ReconMethod::Dtv => "dTV",
            ReconMethod::AgTv => "AG-TV",
        }
    }

    pub fn needs_prior(&self) -> bool {
        matches!(self, ReconMethod::Wtv | ReconMethod::Dtv | ReconMethod::AgTv)
    }
}

impl fmt::Display for ReconMethod {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for ReconMethod {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        ReconMethod::ALL
            .into_iter()
            .find(|m| m.as_str().eq_ignore_ascii_case(s))
            .ok_or_else(|| invalid(format!("unknown reconstruction method {s:?}")))
    }
}

/// Solver settings. The solvers rescale the encoding operator so the mean
/// eigenvalue of A*A is one; `alpha`, `lambda_*`, `sb_mu` and `admm_rho` act
/// in that scaling, with images in their native intensity units.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ReconConfig {
    pub method: ReconMethod,
    pub alpha: f64,
    pub admm_rho: f64,
    pub max_outer_iters: usize,
    pub fgp_inner_iters: usize,
    /// Prior edge scale; `None` uses 1% of the largest prior gradient.
    pub eta: Option<f64>,
    pub gamma: f64,
    pub lambda_xyz: f64,
    pub lambda_bm: f64,
    pub omega: f64,
    /// Data-fidelity budget; `None` uses the expected noise energy of the data.
    pub sigma_sq: Option<f64>,
    pub tol: f64,
    pub seed: u64,
    pub cg_tol: f64,
    pub cg_max_iters: usize,
    /// Split-Bregman penalty.
    pub sb_mu: f64,
    pub sb_inner_iters: usize,
    /// Window edge length of the adaptive coil combination.
    pub adc_window: usize,
}

impl Default for ReconConfig {
    fn default() -> Self {
        Self {
            method: ReconMethod::Tv,
            alpha: 1.0,
            admm_rho: 1.0,
            max_outer_iters: 200,
            fgp_inner_iters: 20,
            eta: None,
            gamma: 0.95,
            lambda_xyz: 1.0,
            lambda_bm: 1.0,
            omega: 0.2,
            sigma_sq: None,
            tol: 1e-5,
            seed: 0,
            cg_tol: 1e-8,
            cg_max_iters: 50,
            sb_mu: 1.0,
            sb_inner_iters: 2,
            adc_window: 5,
        }
    }
}

impl ReconConfig {
    pub fn for_method(method: ReconMethod) -> Self {
        Self {
            method,
            ..Default::default()
        }
    }

    pub fn validate(&self) -> Result<()> {
        let finite_nonneg = |v: f64| v.is_finite() && v >= 0.0;
        if !finite_nonneg(self.alpha) {
            return Err(invalid("alpha must be finite and >= 0"));
        }
        if !(self.admm_rho > 0.0 && self.admm_rho.is_finite()) {
            return Err(invalid("admm_rho must be positive"));
        }
        if self.max_outer_iters == 0 || self.fgp_inner_iters == 0 || self.sb_inner_iters == 0 {
            return Err(invalid("iteration counts must be at least 1"));
        }
        if let Some(eta) = self.eta {
            if !(eta > 0.0) {
                return Err(invalid("eta must be positive"));
            }
        }
        if !(0.0..=1.0).contains(&self.gamma) {
            return Err(invalid("gamma must lie in [0, 1]"));
        }
        if !(0.0..=1.0).contains(&self.omega) {
            return Err(invalid("omega must lie in [0, 1]"));
        }
        if !finite_nonneg(self.lambda_xyz) || !finite_nonneg(self.lambda_bm) {
            return Err(invalid("lambda weights must be finite and >= 0"));
        }
        if let Some(s) = self.sigma_sq {
            if !finite_nonneg(s) {
                return Err(invalid("sigma_sq must be finite and >= 0"));
            }
        }
        if !(self.tol > 0.0) || !(self.cg_tol > 0.0) || self.cg_max_iters == 0 {
            return Err(invalid("tolerances must be positive"));
        }
        if !(self.sb_mu > 0.0) {
            return Err(invalid("sb_mu must be positive"));
        }
        if self.adc_window % 2 == 0 {
            return Err(invalid("adc_window must be odd"));
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn method_names_round_trip() {
        for m in ReconMethod::ALL {
            assert_eq!(m.as_str().parse::<ReconMethod>().unwrap(), m);
        }
        assert!("bogus".parse::<ReconMethod>().is_err());
    }

    #[test]
    fn validation() {
        assert!(ReconConfig::default().validate().is_ok());
        let bad = [
            ReconConfig { alpha: -1.0, ..Default::default() },
            ReconConfig { gamma: 1.5, ..Default::default() },
            ReconConfig { omega: -0.1, ..Default::default() },
            ReconConfig { adc_window: 4, ..Default::default() },
            ReconConfig { eta: Some(0.0), ..Default::default() },
        ];
        for c in bad {
            assert!(c.validate().is_err(), "{c:?}");
        }
    }
}
