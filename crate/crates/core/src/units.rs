//! Conversion of model energies to laboratory units.

/// Reduced Planck constant in eV·s.
pub const HBAR_EV_S: f64 = 6.582119e-16;

/// Physical size of one model energy unit (`√2 g_ref`).
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct EnergyScale {
    unit_ev: f64,
}

impl EnergyScale {
    /// Scale for a reference coupling `g_ref` given in μeV.
    pub fn from_g_ref_micro_ev(g_ref: f64) -> Self {
        Self {
            unit_ev: std::f64::consts::SQRT_2 * g_ref * 1e-6,
        }
    }

    pub fn unit_ev(&self) -> f64 {
        self.unit_ev
    }

    pub fn to_micro_ev(&self, energy: f64) -> f64 {
        energy * self.unit_ev * 1e6
    }

    /// Converts a rate expressed as an energy (ħ = 1) to s⁻¹.
    pub fn to_per_second(&self, energy: f64) -> f64 {
        energy * self.unit_ev / HBAR_EV_S
    }

    /// Converts a model time (in units of `1/(√2 g_ref)`) to seconds.
    pub fn to_seconds(&self, time: f64) -> f64 {
        time * HBAR_EV_S / self.unit_ev
    }
}
