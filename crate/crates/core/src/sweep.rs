//! Parameter sweeps, executed in parallel over grid points when the
//! `parallel` feature is enabled.

use serde::Serialize;

use crate::analysis::{concurrence, tomography, trace_distance};
use crate::design::{Branch, DesignSolutionN4};
use crate::dynamics::{
    propagate, steady_state, DensityMatrix, Drive, Propagation, PropagationOptions, PulseShape,
    SteadyStateOptions, TraceProjectors,
};
use crate::error::{invalid, Result};
use crate::hilbert::{annihilator, Cavity, Topology};
use crate::model::{OpenSystem, ParamsN2, ParamsN4};

/// How grid points are distributed.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum Execution {
    Sequential,
    /// Rayon work stealing; identical to `Sequential` without the
    /// `parallel` feature.
    #[default]
    Parallel,
}

/// Maps `f` over `items`, preserving order. The first error wins.
pub fn par_map<T, R, F>(items: &[T], exec: Execution, f: F) -> Result<Vec<R>>
where
    T: Sync,
    R: Send,
    F: Fn(&T) -> Result<R> + Sync + Send,
{
    match exec {
        Execution::Sequential => items.iter().map(f).collect(),
        Execution::Parallel => parallel_map(items, f),
    }
}

#[cfg(feature = "parallel")]
fn parallel_map<T, R, F>(items: &[T], f: F) -> Result<Vec<R>>
where
    T: Sync,
    R: Send,
    F: Fn(&T) -> Result<R> + Sync + Send,
{
    use rayon::prelude::*;
    items.par_iter().map(f).collect()
}

#[cfg(not(feature = "parallel"))]
fn parallel_map<T, R, F>(items: &[T], f: F) -> Result<Vec<R>>
where
    T: Sync,
    R: Send,
    F: Fn(&T) -> Result<R> + Sync + Send,
{
    items.iter().map(f).collect()
}

/// Runs `f` on a pool of `workers` threads, or on the global pool.
pub fn with_workers<R: Send>(workers: Option<usize>, f: impl FnOnce() -> R + Send) -> Result<R> {
    match workers {
        Some(0) => Err(invalid("workers", "must be at least 1")),
        #[cfg(feature = "parallel")]
        Some(n) => rayon::ThreadPoolBuilder::new()
            .num_threads(n)
            .build()
            .map(|pool| pool.install(f))
            .map_err(|e| invalid("workers", e.to_string())),
        _ => Ok(f()),
    }
}

/// `n` evenly spaced points including both ends.
pub fn linear_grid(lo: f64, hi: f64, n: usize) -> Result<Vec<f64>> {
    if n == 0 {
        return Err(invalid("grid", "needs at least one point"));
    }
    if !(lo.is_finite() && hi.is_finite()) || hi < lo {
        return Err(invalid("grid", format!("bad range [{lo}, {hi}]")));
    }
    if n == 1 {
        return Ok(vec![lo]);
    }
    let step = (hi - lo) / (n - 1) as f64;
    Ok((0..n).map(|k| lo + step * k as f64).collect())
}

/// `n` logarithmically spaced points including both ends.
pub fn log_grid(lo: f64, hi: f64, n: usize) -> Result<Vec<f64>> {
    if !(lo > 0.0) {
        return Err(invalid("grid", "log grid needs a positive lower end"));
    }
    Ok(linear_grid(lo.log10(), hi.log10(), n)?
        .into_iter()
        .map(|e| 10f64.powf(e))
        .collect())
}

/// One point of a cw `Δ2` sweep with the pump locked to `Δ2`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct Delta2Point {
    pub delta2: f64,
    pub concurrence: f64,
    pub trace_distance: f64,
    pub theta_opt: f64,
    /// `κ² ⟨a1†² a1² + a2†² a2²⟩`.
    pub two_photon_intensity: f64,
}

/// Steady-state tomography along `grid`, with `δp = Δ2` at every point.
pub fn sweep_delta2(
    base: &ParamsN2,
    grid: &[f64],
    n_max: usize,
    exec: Execution,
) -> Result<Vec<Delta2Point>> {
    if grid.is_empty() {
        return Err(invalid("grid", "empty delta2 grid"));
    }
    base.validate()?;
    par_map(grid, exec, |&d2| {
        let p = ParamsN2 {
            delta2: d2,
            omega_pump_detuning: d2,
            ..*base
        };
        let sys = OpenSystem::n2(&p, n_max)?;
        let rho = steady_state(&sys, &SteadyStateOptions::default())?.rho;
        let t = tomography(&rho, 2)?;
        let pm = trace_distance(&t)?;
        Ok(Delta2Point {
            delta2: d2,
            concurrence: pm.concurrence,
            trace_distance: pm.trace_distance,
            theta_opt: pm.theta_opt,
            two_photon_intensity: two_photon_intensity(&rho, p.kappa),
        })
    })
}

fn two_photon_intensity(rho: &DensityMatrix, kappa: f64) -> f64 {
    let space = rho.space();
    [Cavity::One, Cavity::Two]
        .into_iter()
        .map(|c| {
            let a = annihilator(space, c);
            let a2 = &a * &a;
            rho.expectation(&(&a2.adjoint() * &a2)).re
        })
        .sum::<f64>()
        * kappa
        * kappa
}

/// One point of a `(κ, Ω)` concurrence map.
#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct MapPoint {
    pub kappa: f64,
    pub rabi: f64,
    pub concurrence: f64,
}

fn map_grid(kappas: &[f64], rabis: &[f64]) -> Result<Vec<(f64, f64)>> {
    if kappas.is_empty() || rabis.is_empty() {
        return Err(invalid("grid", "empty concurrence-map grid"));
    }
    Ok(kappas
        .iter()
        .flat_map(|&k| rabis.iter().map(move |&r| (k, r)))
        .collect())
}

/// cw concurrence of the two-photon generator over `kappas × rabis`,
/// kappa-major.
pub fn concurrence_map_n2(
    base: &ParamsN2,
    kappas: &[f64],
    rabis: &[f64],
    n_max: usize,
    exec: Execution,
) -> Result<Vec<MapPoint>> {
    let grid = map_grid(kappas, rabis)?;
    base.validate()?;
    par_map(&grid, exec, |&(kappa, rabi)| {
        let p = ParamsN2 { kappa, rabi, ..*base };
        let sys = OpenSystem::n2(&p, n_max)?;
        let rho = steady_state(&sys, &SteadyStateOptions::default())?.rho;
        Ok(MapPoint {
            kappa,
            rabi,
            concurrence: concurrence(&tomography(&rho, 2)?),
        })
    })
}

/// cw concurrence of a four-photon generator over `kappas × rabis`.
pub fn concurrence_map_n4(
    base: &ParamsN4,
    topology: Topology,
    kappas: &[f64],
    rabis: &[f64],
    n_max: usize,
    exec: Execution,
) -> Result<Vec<MapPoint>> {
    let grid = map_grid(kappas, rabis)?;
    base.validate()?;
    par_map(&grid, exec, |&(kappa, rabi)| {
        let p = ParamsN4 { kappa, rabi, ..*base };
        let sys = OpenSystem::n4(&p, n_max, topology)?;
        let rho = steady_state(&sys, &SteadyStateOptions::default())?.rho;
        Ok(MapPoint {
            kappa,
            rabi,
            concurrence: concurrence(&tomography(&rho, 4)?),
        })
    })
}

/// Pulse centre in units of `δt_p` after the start of integration.
pub const PULSE_OFFSET: f64 = 3.0;

/// Gaussian pulse centred `PULSE_OFFSET · δt_p` after `t = 0`.
pub fn centred_pulse(power: f64, dt_p: f64) -> Result<PulseShape> {
    PulseShape::from_power(power, dt_p, PULSE_OFFSET * dt_p)
}

/// Propagates the two-photon generator from the vacuum at `times[0]`
/// under `pulse`, recording populations at every time in `times`.
pub fn pulse_run(
    p: &ParamsN2,
    branch: Branch,
    pulse: PulseShape,
    n_max: usize,
    times: &[f64],
) -> Result<Propagation> {
    let sys = OpenSystem::n2(p, n_max)?;
    let proj = TraceProjectors::n2(p, branch, sys.space())?;
    let rho0 = DensityMatrix::vacuum(sys.space());
    propagate(&sys, &rho0, Drive::Pulse(pulse), times, &proj, &PropagationOptions::default())
}

/// Populations sampled just after a pulse.
#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct PulsePoint {
    pub power: f64,
    pub dt_p: f64,
    pub target: f64,
    pub remainder: f64,
    pub multi: f64,
}

/// `P_2002(t_peak + 2δt_p)` over `powers × durations`, power-major.
pub fn pulse_map(
    base: &ParamsN2,
    branch: Branch,
    powers: &[f64],
    durations: &[f64],
    n_max: usize,
    exec: Execution,
) -> Result<Vec<PulsePoint>> {
    if powers.is_empty() || durations.is_empty() {
        return Err(invalid("grid", "empty pulse-map grid"));
    }
    base.validate()?;
    let grid: Vec<(f64, f64)> = powers
        .iter()
        .flat_map(|&w| durations.iter().map(move |&d| (w, d)))
        .collect();
    par_map(&grid, exec, |&(power, dt_p)| {
        let pulse = centred_pulse(power, dt_p)?;
        let run = pulse_run(base, branch, pulse, n_max, &[0.0, pulse.after()])?;
        let tr = &run.trace;
        Ok(PulsePoint {
            power,
            dt_p,
            target: tr.target[1],
            remainder: tr.remainder[1],
            multi: tr.multi[1],
        })
    })
}

/// Four-photon design evaluated as a cw source.
pub fn n4_source_params(design: &DesignSolutionN4, kappa: f64, rabi: f64, port: Cavity) -> ParamsN4 {
    ParamsN4 {
        kappa,
        rabi,
        omega_pump_detuning: design.energy / 4.0,
        pump_port: port,
        ..design.hamiltonian_params()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn grids() {
        assert_eq!(linear_grid(0.0, 1.0, 3).unwrap(), vec![0.0, 0.5, 1.0]);
        let g = log_grid(0.01, 1.0, 3).unwrap();
        assert!((g[1] - 0.1).abs() < 1e-15 && (g[2] - 1.0).abs() < 1e-15);
        assert!(linear_grid(0.0, 1.0, 0).is_err());
        assert!(linear_grid(1.0, 0.0, 2).is_err());
        assert!(log_grid(0.0, 1.0, 2).is_err());
    }

    #[test]
    fn par_map_preserves_order_and_errors() {
        let xs: Vec<i32> = (0..100).collect();
        let seq = par_map(&xs, Execution::Sequential, |&x| Ok(x * 2)).unwrap();
        let par = par_map(&xs, Execution::Parallel, |&x| Ok(x * 2)).unwrap();
        assert_eq!(seq, par);
        let err = par_map(&xs, Execution::Parallel, |&x| {
            if x == 50 {
                Err(invalid("x", "boom"))
            } else {
                Ok(x)
            }
        });
        assert!(err.is_err());
        assert_eq!(with_workers(Some(2), || 7).unwrap(), 7);
        assert!(with_workers(Some(0), || 7).is_err());
    }
}
