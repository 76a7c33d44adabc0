//! Rate-equation model of the free decay of a prepared two-photon GES.

use serde::Serialize;

use crate::analysis::nearest_branch;
use crate::design::{condition_delta2, solve_ges_n2};
use crate::error::{invalid, Error, Result};
use crate::model::ParamsN2;

/// Decay rates of the GES and of the one-photon states.
#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct DecayParams {
    pub gamma_2002: f64,
    pub gamma_1p: f64,
    pub eta: f64,
}

impl DecayParams {
    /// `Γ_2002 = 2 sin²φ_s κ`, `Γ_1P = κ`.
    pub fn new(sin_phi_s: f64, kappa: f64) -> Result<Self> {
        if !(kappa > 0.0) {
            return Err(invalid("kappa", "must be positive"));
        }
        let eta = 2.0 * sin_phi_s * sin_phi_s;
        if !(eta > 0.0) {
            return Err(invalid("sin_phi_s", "GES must have a photon component"));
        }
        Ok(Self {
            gamma_2002: eta * kappa,
            gamma_1p: kappa,
            eta,
        })
    }

    /// Rates of the GES on the branch nearest to `p.delta2`.
    pub fn from_params(p: &ParamsN2) -> Result<Self> {
        let (branch, _) = nearest_branch(p)?;
        let mut q = *p;
        q.delta2 = condition_delta2(p.delta1, p.g2p, branch)?;
        Self::new(solve_ges_n2(&q, branch)?.sin_phi(), p.kappa)
    }

    fn degenerate(&self) -> bool {
        (self.eta - 1.0).abs() < 1e-9
    }
}

/// Populations of the rate-equation model at one time.
#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct DecayPopulations {
    pub target: f64,
    pub one_photon_plus: f64,
    pub one_photon_minus: f64,
    pub vacuum: f64,
    /// Set when `η = 1` and the limiting form was used.
    pub degenerate: bool,
}

impl DecayPopulations {
    pub fn one_photon(&self) -> f64 {
        self.one_photon_plus + self.one_photon_minus
    }
}

/// Initial populations `(P_2002, P_1P,+, P_1P,−, P_G00)`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct InitialPopulations {
    pub target: f64,
    pub one_photon_plus: f64,
    pub one_photon_minus: f64,
    pub vacuum: f64,
}

impl InitialPopulations {
    /// Perfect preparation.
    pub const PURE: Self = Self {
        target: 1.0,
        one_photon_plus: 0.0,
        one_photon_minus: 0.0,
        vacuum: 0.0,
    };
}

/// Solution for a perfectly prepared GES.
pub fn decay_populations(dp: &DecayParams, t: f64) -> Result<DecayPopulations> {
    decay_populations_from(dp, &InitialPopulations::PURE, t)
}

/// Solution from arbitrary initial populations; `P_G00` closes the total.
pub fn decay_populations_from(
    dp: &DecayParams,
    init: &InitialPopulations,
    t: f64,
) -> Result<DecayPopulations> {
    if !(t >= 0.0) {
        return Err(invalid("t", "must be non-negative"));
    }
    let g = dp.gamma_2002;
    let k = dp.gamma_1p;
    let eg = (-g * t).exp();
    let ek = (-k * t).exp();
    let feed = if dp.degenerate() {
        0.5 * g * t * eg
    } else {
        g * (ek - eg) / (2.0 * (g - k))
    };
    let target = init.target * eg;
    let plus = init.one_photon_plus * ek + init.target * feed;
    let minus = init.one_photon_minus * ek + init.target * feed;
    let total = init.target + init.one_photon_plus + init.one_photon_minus + init.vacuum;
    Ok(DecayPopulations {
        target,
        one_photon_plus: plus,
        one_photon_minus: minus,
        vacuum: total - target - plus - minus,
        degenerate: dp.degenerate(),
    })
}

/// Time and value of the maximum of `P_1P,+ + P_1P,−`:
/// `κ⁻¹ ln(1/η) / (1 − η)` and `exp(ln η / (1 − η))`.
pub fn one_photon_peak(dp: &DecayParams) -> Result<(f64, f64)> {
    let eta = dp.eta;
    if !(eta > 0.0 && eta < 1.0) {
        return Err(Error::InvalidParameter {
            name: "eta",
            reason: format!("peak formula needs 0 < eta < 1, got {eta}"),
        });
    }
    let l = eta.ln() / (1.0 - eta);
    Ok((-l / dp.gamma_1p, l.exp()))
}
