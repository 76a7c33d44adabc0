//! Second-order effective two-photon drive of the GES.

use serde::Serialize;

use crate::design::{one_photon_eigensystem, solve_ges_n2, Branch};
use crate::error::{invalid, Result};
use crate::hilbert::{build_space, Cavity, Topology};
use crate::linalg::{CVector, C64};
use crate::model::{pump_term, ParamsN2};

/// Effective transition amplitude `ξ = M_fi` from the vacuum to the GES.
#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct SwElement {
    pub xi: f64,
    /// Bracketed contributions through `|1P,+⟩` and `|1P,−⟩`.
    pub paths: [f64; 2],
    /// `sin φ_s Ω²` for port 2 and `−sin φ_s Ω²` for port 1.
    pub prefactor: f64,
    pub port: Cavity,
    /// True when pump and cavity 2 both sit at `E_s / 2`.
    pub on_condition: bool,
}

/// Closed-form `M_fi` for pumping through `port`.
pub fn sw_matrix_element(p: &ParamsN2, branch: Branch, port: Cavity) -> Result<SwElement> {
    let ges = solve_ges_n2(p, branch)?;
    let one = one_photon_eigensystem(p)?;
    let (s, c) = one.phi.sin_cos();
    let dp = p.omega_pump_detuning;
    let om2 = p.rabi * p.rabi;
    let wp = 1.0 / (one.energy_plus - dp);
    let wm = 1.0 / (one.energy_minus - dp);
    let (prefactor, paths) = match port {
        Cavity::Two => (ges.sin_phi() * om2, [s * s * wp, c * c * wm]),
        Cavity::One => (-ges.sin_phi() * om2, [c * c * wp, s * s * wm]),
    };
    let on_condition = (dp - 0.5 * ges.energy).abs() <= 1e-9;
    Ok(SwElement {
        xi: prefactor * (paths[0] + paths[1]),
        paths,
        prefactor,
        port,
        on_condition,
    })
}

/// `Σ_k ⟨f|V|k⟩⟨k|V|i⟩ / 2 (1/(E_f − E_k) + 1/(E_i − E_k))` evaluated with
/// explicit operator matrices and rotating-frame energies.
pub fn sw_matrix_element_numeric(p: &ParamsN2, branch: Branch, port: Cavity) -> Result<f64> {
    let space = build_space(Topology::TwoPhoton, 2)?;
    let ges = solve_ges_n2(p, branch)?;
    let one = one_photon_eigensystem(p)?;
    let v = pump_term(&space, p.rabi, port);
    let f = ges.state_vector(&space)?;
    let mut i = CVector::from_element(space.dim(), C64::new(0.0, 0.0));
    i[space.vacuum()] = C64::new(1.0, 0.0);
    let dp = p.omega_pump_detuning;
    let e_f = ges.energy - 2.0 * dp;
    let e_i = 0.0;
    let ks = one.vectors(&space)?;
    let eks = [one.energy_plus - dp, one.energy_minus - dp];
    let elem = |a: &CVector, b: &CVector| (a.adjoint() * v.matrix() * b)[(0, 0)].re;
    let mut m = 0.0;
    for (k, ek) in ks.iter().zip(eks) {
        m += elem(&f, k) * elem(k, &i) * 0.5 * (1.0 / (e_f - ek) + 1.0 / (e_i - ek));
    }
    Ok(m)
}

/// `P_2002 = 4 ξ² / Γ²`.
pub fn analytic_cw_population(xi: f64, gamma_2002: f64) -> f64 {
    4.0 * xi * xi / (gamma_2002 * gamma_2002)
}

/// `8 κ² ΔT_w sin²φ_s ξ² / Γ²`.
pub fn analytic_cw_rate(xi: f64, p: &ParamsN2, branch: Branch, window: f64) -> Result<f64> {
    if !(window > 0.0) {
        return Err(invalid("window", "must be positive"));
    }
    let ges = solve_ges_n2(p, branch)?;
    let s2 = ges.sin_phi().powi(2);
    let gamma = 2.0 * s2 * p.kappa;
    Ok(8.0 * p.kappa * p.kappa * window * s2 * xi * xi / (gamma * gamma))
}
