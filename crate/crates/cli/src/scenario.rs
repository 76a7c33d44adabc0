//! TOML scenario schema. Every section is optional; missing values fall back
//! to the defaults of the figure each subcommand reproduces.

use serde::{Deserialize, Serialize};

use noon_core::analysis::OuterEvolution;
use noon_core::design::{condition_delta2, Branch};
use noon_core::hilbert::Cavity;
use noon_core::model::{ParamsN2, G_REF};
use noon_core::sweep::{linear_grid, log_grid};

use crate::CliError;

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize, clap::ValueEnum)]
#[serde(rename_all = "kebab-case")]
pub enum SystemKind {
    #[default]
    N2,
    N4,
    N4Variant,
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Scale {
    #[default]
    Linear,
    Log,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GridSpec {
    pub min: f64,
    pub max: f64,
    pub points: usize,
    #[serde(default)]
    pub scale: Scale,
}

impl GridSpec {
    pub const fn linear(min: f64, max: f64, points: usize) -> Self {
        Self { min, max, points, scale: Scale::Linear }
    }

    pub const fn log(min: f64, max: f64, points: usize) -> Self {
        Self { min, max, points, scale: Scale::Log }
    }

    pub fn values(&self, name: &str) -> Result<Vec<f64>, CliError> {
        if self.points == 0 {
            return Err(CliError::Config(format!("grid.{name}: points must be at least 1")));
        }
        let g = match self.scale {
            Scale::Linear => linear_grid(self.min, self.max, self.points),
            Scale::Log => log_grid(self.min, self.max, self.points),
        };
        g.map_err(|e| CliError::Config(format!("grid.{name}: {e}")))
    }
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GridSection {
    pub delta1: Option<GridSpec>,
    pub delta2: Option<GridSpec>,
    pub kappa: Option<GridSpec>,
    pub rabi: Option<GridSpec>,
    pub power: Option<GridSpec>,
    pub duration: Option<GridSpec>,
    pub ratio: Option<GridSpec>,
    /// Coincidence windows in units of `1/ΔE_1`.
    pub window: Option<GridSpec>,
}

/// Four-photon source: the design at `ratio`, driven at `E/4`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct N4Section {
    pub ratio: f64,
    pub kappa: f64,
    pub rabi: f64,
    pub pump_port: Cavity,
}

impl Default for N4Section {
    fn default() -> Self {
        Self {
            ratio: 2.0,
            kappa: 0.01,
            rabi: 0.04,
            pump_port: Cavity::One,
        }
    }
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum BranchName {
    Plus,
    #[default]
    Minus,
}

impl From<BranchName> for Branch {
    fn from(b: BranchName) -> Self {
        match b {
            BranchName::Plus => Branch::Plus,
            BranchName::Minus => Branch::Minus,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct PulseSection {
    /// `Ω_peak² δt_p`.
    pub power: f64,
    pub dt_p: f64,
    pub branch: BranchName,
    /// Also compute the power–duration map.
    pub map: bool,
    /// Samples of the time trace.
    pub samples: usize,
    /// Free decay followed after `t_peak + 2δt_p` by `decay`.
    pub decay_time: f64,
}

impl Default for PulseSection {
    fn default() -> Self {
        Self {
            power: 45.0,
            dt_p: 10f64.powf(0.95),
            branch: BranchName::Minus,
            map: true,
            samples: 201,
            decay_time: 1500.0,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct CoincidenceSection {
    pub outer: OuterEvolution,
}

impl Default for CoincidenceSection {
    fn default() -> Self {
        Self { outer: OuterEvolution::MasterEquation }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct RateSection {
    pub g_ref_micro_ev: f64,
}

impl Default for RateSection {
    fn default() -> Self {
        Self { g_ref_micro_ev: 50.0 }
    }
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ConvergenceSection {
    pub n_max: Option<Vec<usize>>,
    pub tolerance: Option<f64>,
}

/// Scenario file as written by the user.
#[derive(Clone, Debug, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ScenarioFile {
    pub system: Option<SystemKind>,
    pub n_max: Option<usize>,
    pub n2: Option<toml::Table>,
    pub n4: Option<N4Section>,
    #[serde(default)]
    pub grid: GridSection,
    pub pulse: Option<PulseSection>,
    pub coincidence: Option<CoincidenceSection>,
    pub rate: Option<RateSection>,
    pub convergence: Option<ConvergenceSection>,
}

impl ScenarioFile {
    pub fn parse(text: &str) -> Result<Self, CliError> {
        toml::from_str(text).map_err(|e| CliError::Config(e.to_string().trim_end().to_string()))
    }

    /// Two-photon parameters: `base` overlaid with the `[n2]` table.
    pub fn n2_params(&self, base: ParamsN2) -> Result<ParamsN2, CliError> {
        let Some(user) = &self.n2 else {
            return check_n2(base);
        };
        let mut table = toml::Table::try_from(base).map_err(|e| CliError::Config(e.to_string()))?;
        for (k, v) in user {
            table.insert(k.clone(), v.clone());
        }
        let p: ParamsN2 = toml::Value::Table(table)
            .try_into()
            .map_err(|e: toml::de::Error| CliError::Config(format!("[n2] {}", e.to_string().trim_end())))?;
        check_n2(p)
    }
}

fn check_n2(p: ParamsN2) -> Result<ParamsN2, CliError> {
    p.validate().map_err(|e| CliError::Config(format!("[n2] {e}")))?;
    Ok(p)
}

/// cw source at the lower condition root with the quoted `−0.207`.
pub fn cw_defaults() -> ParamsN2 {
    ParamsN2 {
        g2p: G_REF,
        j: 2.0,
        delta1: 1.0,
        delta2: -0.207,
        kappa: 0.1,
        omega_pump_detuning: -0.207,
        rabi: 0.05,
        pump_port: Cavity::Two,
    }
}

/// Pulsed source with cavity 2 and the pump exactly at `E_−/2`.
pub fn pulse_defaults() -> ParamsN2 {
    let d2 = condition_delta2(5.0, G_REF, Branch::Minus).expect("finite condition");
    ParamsN2 {
        g2p: G_REF,
        j: 5.0,
        delta1: 5.0,
        delta2: d2,
        kappa: 0.1,
        omega_pump_detuning: d2,
        rabi: 0.0,
        pump_port: Cavity::Two,
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn overlay_keeps_defaults() {
        let s = ScenarioFile::parse("[n2]\nkappa = 0.2\n").unwrap();
        let p = s.n2_params(cw_defaults()).unwrap();
        assert_eq!(p.kappa, 0.2);
        assert_eq!(p.j, 2.0);
    }

    #[test]
    fn rejects_unknown_fields() {
        let err = ScenarioFile::parse("[n2]\nkapa = 0.2\n")
            .unwrap()
            .n2_params(cw_defaults())
            .unwrap_err();
        assert!(err.to_string().contains("kapa"), "{err}");
        assert!(ScenarioFile::parse("[grid]\nspeed = 1\n").is_err());
    }

    #[test]
    fn empty_grid_is_config_error() {
        let g = GridSpec::linear(0.0, 1.0, 0);
        assert!(matches!(g.values("delta2"), Err(CliError::Config(_))));
    }
}
