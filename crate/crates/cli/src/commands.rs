//! Subcommand implementations. Each returns its artifacts; nothing touches
//! the file system until every computation has succeeded.

use noon_core::analysis::{
    coincidence_counts_analytic, coincidence_counts_regression, concurrence, detection_rate,
    gamma_2002, tomography, trace_distance,
};
use noon_core::design::{
    condition_delta2, fig9_curve, flow_graph, one_photon_eigensystem, solve_ges_n2, solve_ges_n4,
    Branch, DesignSolutionN4, N4Outcome,
};
use noon_core::dynamics::{
    convergence_check, steady_state, DensityMatrix, SteadyStateOptions,
};
use noon_core::hilbert::{build_space, Topology};
use noon_core::model::{
    hamiltonian_n2, hamiltonian_n4, hamiltonian_n4_variant, OpenSystem, ParamsN2, ParamsN4,
};
use noon_core::oracle::{decay_populations_from, one_photon_peak, DecayParams, InitialPopulations};
use noon_core::report::{CsvTable, Metadata};
use noon_core::sweep::{
    centred_pulse, concurrence_map_n2, concurrence_map_n4, linear_grid, n4_source_params,
    pulse_map, pulse_run, sweep_delta2, Execution,
};

use crate::scenario::{cw_defaults, pulse_defaults, GridSpec, ScenarioFile, SystemKind};
use crate::CliError;

/// One output file.
pub enum Artifact {
    Csv(String, CsvTable),
    Json(String, serde_json::Value),
}

/// Everything a run produces.
pub struct RunOutput {
    pub artifacts: Vec<Artifact>,
    /// Human-readable summary for stdout.
    pub summary: Vec<String>,
    /// Entries merged into every artifact's metadata.
    pub metadata: Metadata,
}

impl RunOutput {
    fn new() -> Self {
        Self {
            artifacts: Vec::new(),
            summary: Vec::new(),
            metadata: Metadata::new(),
        }
    }
}

pub struct Context<'a> {
    pub scenario: &'a ScenarioFile,
    pub n_max: Option<usize>,
    pub system: SystemKind,
}

impl Context<'_> {
    fn n_max(&self, default: usize) -> usize {
        self.n_max.or(self.scenario.n_max).unwrap_or(default)
    }

    fn grid(&self, spec: Option<GridSpec>, default: GridSpec, name: &str) -> Result<Vec<f64>, CliError> {
        spec.unwrap_or(default).values(name)
    }

    fn n4_source(&self) -> Result<(DesignSolutionN4, ParamsN4), CliError> {
        let s = self.scenario.n4.unwrap_or_default();
        match solve_ges_n4(s.ratio, None)? {
            N4Outcome::Found(d) => {
                let p = n4_source_params(&d, s.kappa, s.rabi, s.pump_port);
                Ok((d, p))
            }
            N4Outcome::NoSolution(n) => Err(CliError::Numeric(noon_core::Error::Unsupported(
                format!("no four-photon design at g2/g1 = {}: {}", n.ratio, n.reason),
            ))),
        }
    }

    fn require_n2(&self, command: &str) -> Result<(), CliError> {
        if self.system != SystemKind::N2 {
            return Err(CliError::Config(format!("{command} supports only system = \"n2\"")));
        }
        Ok(())
    }
}

fn table<const N: usize>(columns: [&str; N]) -> CsvTable {
    CsvTable::new(columns)
}

pub fn design_n2(ctx: &Context) -> Result<RunOutput, CliError> {
    ctx.require_n2("design-n2")?;
    let base = ctx.scenario.n2_params(cw_defaults())?;
    let deltas = match ctx.scenario.grid.delta1 {
        Some(g) => g.values("delta1")?,
        None => vec![base.delta1],
    };
    let mut out = RunOutput::new();
    let mut t = table([
        "branch", "delta1", "delta2", "g2p", "j", "energy", "mixing_angle", "a_b", "a_20", "a_11", "a_02",
    ]);
    let mut sols = Vec::new();
    for &d1 in &deltas {
        for branch in [Branch::Minus, Branch::Plus] {
            let d2 = condition_delta2(d1, base.g2p, branch)?;
            let p = ParamsN2 {
                delta1: d1,
                delta2: d2,
                omega_pump_detuning: d2,
                ..base
            };
            let s = solve_ges_n2(&p, branch)?;
            t.push(vec![
                branch.sign(),
                d1,
                d2,
                p.g2p,
                p.j,
                s.energy,
                s.mixing_angle,
                s.amplitudes[0],
                s.amplitudes[1],
                s.amplitudes[2],
                s.amplitudes[3],
            ])?;
            out.summary.push(format!(
                "{branch:?}: delta1 = {d1}, delta2 = E/2 = {d2:.6}, weights B/20/11/02 = {:.4}/{:.4}/{:.4}/{:.4}",
                s.amplitudes[0].powi(2),
                s.amplitudes[1].powi(2),
                s.amplitudes[2].powi(2),
                s.amplitudes[3].powi(2)
            ));
            sols.push(s);
        }
    }
    out.artifacts.push(Artifact::Csv("design-n2.csv".into(), t));
    out.artifacts.push(json("design-n2.json", &sols)?);
    Ok(out)
}

pub fn fig9(ctx: &Context) -> Result<RunOutput, CliError> {
    let ratios = ctx.grid(ctx.scenario.grid.ratio, GridSpec::linear(1.0, 4.0, 31), "ratio")?;
    if let Some(bad) = ratios.iter().find(|r| !(**r >= 1.0)) {
        return Err(CliError::Config(format!("grid.ratio: g2/g1 must be at least 1, got {bad}")));
    }
    let curve = fig9_curve(&ratios)?;
    let mut out = RunOutput::new();
    let mut t = table(["ratio", "found", "j", "delta1", "delta2", "delta_b", "energy", "residual"]);
    let mut first = None;
    for o in &curve {
        match o {
            N4Outcome::Found(s) => {
                first.get_or_insert(s.ratio);
                t.push(vec![
                    s.ratio,
                    1.0,
                    s.params.j,
                    s.params.delta1,
                    s.params.delta2,
                    s.params.delta_b,
                    s.energy,
                    s.residual,
                ])?;
            }
            N4Outcome::NoSolution(n) => {
                t.push(vec![n.ratio, 0.0, f64::NAN, f64::NAN, f64::NAN, f64::NAN, f64::NAN, f64::NAN])?;
            }
        }
    }
    let end = curve.iter().find_map(|o| match o {
        N4Outcome::NoSolution(n) => n.branch_end,
        _ => None,
    });
    if let Some(e) = end {
        out.metadata.push("branch_end", e);
    }
    out.summary.push(format!(
        "{} of {} ratios admit a GES; smallest found {}",
        curve.iter().filter(|o| o.solution().is_some()).count(),
        curve.len(),
        first.map_or("none".into(), |r| format!("{r}"))
    ));
    out.artifacts.push(Artifact::Csv("fig9.csv".into(), t));
    Ok(out)
}

pub fn sweep_delta2_cmd(ctx: &Context, exec: Execution) -> Result<RunOutput, CliError> {
    ctx.require_n2("sweep-delta2")?;
    let p = ctx.scenario.n2_params(cw_defaults())?;
    let grid = ctx.grid(ctx.scenario.grid.delta2, GridSpec::linear(-1.0, 2.0, 601), "delta2")?;
    let n_max = ctx.n_max(4);
    let pts = sweep_delta2(&p, &grid, n_max, exec)?;
    let peak = pts.iter().map(|x| x.two_photon_intensity).fold(0.0, f64::max);
    let mut t = table([
        "delta2", "concurrence", "trace_distance", "theta_opt", "intensity", "intensity_normalized",
    ]);
    for x in &pts {
        let norm = if peak > 0.0 { x.two_photon_intensity / peak } else { 0.0 };
        t.push(vec![x.delta2, x.concurrence, x.trace_distance, x.theta_opt, x.two_photon_intensity, norm])?;
    }
    let mut out = RunOutput::new();
    out.metadata.push("n_max", n_max);
    if let Some(best) = pts.iter().max_by(|a, b| a.concurrence.total_cmp(&b.concurrence)) {
        out.summary.push(format!(
            "{} points; maximum concurrence {:.4} at delta2 = {:.4}",
            pts.len(),
            best.concurrence,
            best.delta2
        ));
    }
    out.artifacts.push(Artifact::Csv("sweep-delta2.csv".into(), t));
    Ok(out)
}

pub fn concurrence_map(ctx: &Context, exec: Execution) -> Result<RunOutput, CliError> {
    let g = &ctx.scenario.grid;
    let mut out = RunOutput::new();
    let (pts, n_max) = match ctx.system {
        SystemKind::N2 => {
            let p = ctx.scenario.n2_params(cw_defaults())?;
            let kappas = ctx.grid(g.kappa, GridSpec::log(0.01, 3.0, 21), "kappa")?;
            let rabis = ctx.grid(g.rabi, GridSpec::log(0.01, 1.0, 21), "rabi")?;
            let n_max = ctx.n_max(4);
            (concurrence_map_n2(&p, &kappas, &rabis, n_max, exec)?, n_max)
        }
        SystemKind::N4 => {
            let kappas = ctx.grid(g.kappa, GridSpec::log(0.005, 0.5, 21), "kappa")?;
            let rabis = ctx.grid(g.rabi, GridSpec::log(0.005, 0.15, 21), "rabi")?;
            let (_, p) = ctx.n4_source()?;
            let n_max = ctx.n_max(6);
            (concurrence_map_n4(&p, Topology::FourPhoton, &kappas, &rabis, n_max, exec)?, n_max)
        }
        SystemKind::N4Variant => {
            return Err(CliError::Config(
                "concurrence-map needs system = \"n2\" or \"n4\"; the variant has no GES".into(),
            ))
        }
    };
    let mut t = table(["kappa", "rabi", "concurrence"]);
    for x in &pts {
        t.push(vec![x.kappa, x.rabi, x.concurrence])?;
    }
    out.metadata.push("n_max", n_max);
    out.summary.push(format!(
        "{} points; {} with concurrence > 0.9",
        pts.len(),
        pts.iter().filter(|x| x.concurrence > 0.9).count()
    ));
    out.artifacts.push(Artifact::Csv("concurrence-map.csv".into(), t));
    Ok(out)
}

pub fn pulse(ctx: &Context, exec: Execution) -> Result<RunOutput, CliError> {
    ctx.require_n2("pulse")?;
    let p = ctx.scenario.n2_params(pulse_defaults())?;
    let s = ctx.scenario.pulse.unwrap_or_default();
    let branch: Branch = s.branch.into();
    let n_max = ctx.n_max(5);
    let shape = centred_pulse(s.power, s.dt_p).map_err(|e| CliError::Config(format!("[pulse] {e}")))?;
    if s.samples < 2 {
        return Err(CliError::Config("[pulse] samples must be at least 2".into()));
    }
    let mut times = linear_grid(0.0, shape.after(), s.samples)?;
    times.pop();
    times.push(shape.after());
    let run = pulse_run(&p, branch, shape, n_max, &times)?;
    let tr = &run.trace;
    let mut t = table([
        "t", "rabi", "p_ges", "p_1p_plus", "p_1p_minus", "p_vacuum", "p_remainder", "p_multi",
    ]);
    for k in 0..tr.times.len() {
        t.push(vec![
            tr.times[k],
            shape.amplitude(tr.times[k]),
            tr.target[k],
            tr.one_photon_plus[k],
            tr.one_photon_minus[k],
            tr.vacuum[k],
            tr.remainder[k],
            tr.multi[k],
        ])?;
    }
    let mut out = RunOutput::new();
    out.metadata.push("n_max", n_max);
    out.metadata.push("pulse_power", s.power);
    out.metadata.push("pulse_dt_p", s.dt_p);
    out.metadata.push("t_peak", shape.t_peak);
    let last = tr.times.len() - 1;
    out.summary.push(format!(
        "P_GES(t_peak + 2 dt_p) = {:.4}, P_2R + P_M = {:.2e}",
        tr.target[last],
        tr.remainder[last] + tr.multi[last]
    ));
    out.artifacts.push(Artifact::Csv("pulse-trace.csv".into(), t));
    if s.map {
        let g = &ctx.scenario.grid;
        let powers = ctx.grid(g.power, GridSpec::linear(10.0, 290.0, 15), "power")?;
        let durations = ctx.grid(g.duration, GridSpec::log(10f64.powf(0.5), 10f64.powf(1.2), 15), "duration")?;
        let map = pulse_map(&p, branch, &powers, &durations, n_max, exec)?;
        let mut m = table(["power", "dt_p", "p_ges", "p_remainder", "p_multi"]);
        for x in &map {
            m.push(vec![x.power, x.dt_p, x.target, x.remainder, x.multi])?;
        }
        out.artifacts.push(Artifact::Csv("pulse-map.csv".into(), m));
    }
    Ok(out)
}

pub fn decay(ctx: &Context) -> Result<RunOutput, CliError> {
    ctx.require_n2("decay")?;
    let p = ctx.scenario.n2_params(pulse_defaults())?;
    let s = ctx.scenario.pulse.unwrap_or_default();
    let n_max = ctx.n_max(5);
    let dp = DecayParams::from_params(&p)?;
    let shape = centred_pulse(s.power, s.dt_p).map_err(|e| CliError::Config(format!("[pulse] {e}")))?;
    if s.samples < 2 || !(s.decay_time > 0.0) {
        return Err(CliError::Config("[pulse] needs samples >= 2 and decay_time > 0".into()));
    }
    let ts = shape.after();
    let mut times = vec![0.0];
    times.extend(linear_grid(ts, ts + s.decay_time, s.samples)?);
    let run = pulse_run(&p, s.branch.into(), shape, n_max, &times)?;
    let tr = &run.trace;
    let init = InitialPopulations {
        target: tr.target[1],
        one_photon_plus: tr.one_photon_plus[1],
        one_photon_minus: tr.one_photon_minus[1],
        vacuum: tr.vacuum[1],
    };
    let mut t = table([
        "t", "p_ges", "p_1p", "p_vacuum", "oracle_p_ges", "oracle_p_1p", "oracle_p_vacuum",
    ]);
    let mut worst: f64 = 0.0;
    for k in 1..times.len() {
        let o = decay_populations_from(&dp, &init, times[k] - ts)?;
        worst = worst
            .max((o.target - tr.target[k]).abs())
            .max((o.one_photon() - tr.one_photon(k)).abs())
            .max((o.vacuum - tr.vacuum[k]).abs());
        t.push(vec![times[k], tr.target[k], tr.one_photon(k), tr.vacuum[k], o.target, o.one_photon(), o.vacuum])?;
    }
    let mut out = RunOutput::new();
    out.metadata.push("n_max", n_max);
    out.metadata.push("eta", dp.eta);
    out.metadata.push("gamma_2002", dp.gamma_2002);
    if let Ok((tp, vp)) = one_photon_peak(&dp) {
        out.metadata.push("one_photon_peak_time", tp);
        out.metadata.push("one_photon_peak_value", vp);
        out.summary.push(format!("eta = {:.4}, one-photon peak {vp:.4} at {tp:.2}", dp.eta));
    }
    out.summary.push(format!("max |QME - oracle| = {worst:.2e}"));
    out.artifacts.push(Artifact::Csv("decay.csv".into(), t));
    Ok(out)
}

pub fn coincidence(ctx: &Context) -> Result<RunOutput, CliError> {
    ctx.require_n2("coincidence")?;
    let p = ctx.scenario.n2_params(pulse_defaults())?;
    let outer = ctx.scenario.coincidence.unwrap_or_default().outer;
    let branch = noon_core::analysis::nearest_branch(&p)?.0;
    let de = one_photon_eigensystem(&p)?.splitting();
    let windows = ctx.grid(ctx.scenario.grid.window, GridSpec::log(0.01, 100.0, 9), "window")?;
    let n_max = ctx.n_max(3);
    let space = build_space(Topology::TwoPhoton, n_max)?;
    let ges = solve_ges_n2(&p, branch)?;
    let rho0 = DensityMatrix::pure(&space, &ges.state_vector(&space)?)?;
    let mut t = table([
        "window_de1", "window", "n11", "n22", "n12", "n1122_re", "n1122_im", "concurrence",
        "analytic_n11", "analytic_n12", "analytic_n1122_re", "analytic_n1122_im",
    ]);
    for &wde in &windows {
        let w = wde / de;
        let r = coincidence_counts_regression(&p, &rho0, w, outer)?;
        let a = coincidence_counts_analytic(&p, w)?;
        let c = concurrence(&r.tomography()?);
        t.push(vec![
            wde, w, r.n11(), r.n22(), r.n12(), r.n1122().re, r.n1122().im, c,
            a.n11, a.n12, a.n1122.re, a.n1122.im,
        ])?;
    }
    let mut out = RunOutput::new();
    out.metadata.push("n_max", n_max);
    out.metadata.push("delta_e1", de);
    out.metadata.push("outer_evolution", format!("{outer:?}"));
    out.summary.push(format!("{} windows, delta_E1 = {de:.4}", windows.len()));
    out.artifacts.push(Artifact::Csv("coincidence.csv".into(), t));
    Ok(out)
}

pub fn rate(ctx: &Context) -> Result<RunOutput, CliError> {
    ctx.require_n2("rate")?;
    let p = ctx.scenario.n2_params(pulse_defaults())?;
    let g = ctx.scenario.rate.unwrap_or_default().g_ref_micro_ev;
    if !(g > 0.0) {
        return Err(CliError::Config("[rate] g_ref_micro_ev must be positive".into()));
    }
    let hz = detection_rate(&p, g)?;
    let gamma = gamma_2002(&p)?;
    let de = one_photon_eigensystem(&p)?.splitting();
    let mut t = table(["g_ref_micro_ev", "kappa", "gamma_2002", "delta_e1", "rate_hz"]);
    t.push(vec![g, p.kappa, gamma, de, hz])?;
    let mut out = RunOutput::new();
    out.summary.push(format!("detection rate bound {:.3} MHz", hz * 1e-6));
    out.artifacts.push(Artifact::Csv("rate.csv".into(), t));
    Ok(out)
}

pub fn check_candidate(ctx: &Context) -> Result<RunOutput, CliError> {
    let (graph, label) = match ctx.system {
        SystemKind::N2 => {
            let p = ctx.scenario.n2_params(cw_defaults())?;
            let space = build_space(Topology::TwoPhoton, 2)?;
            (flow_graph(&hamiltonian_n2(&p, &space)?, 2)?, "n2")
        }
        SystemKind::N4 | SystemKind::N4Variant => {
            let p = ctx.scenario.n4.unwrap_or_default();
            let q = noon_core::design::N4_ANCHOR.1.params(p.ratio);
            if ctx.system == SystemKind::N4 {
                let space = build_space(Topology::FourPhoton, 4)?;
                (flow_graph(&hamiltonian_n4(&q, &space)?, 4)?, "n4")
            } else {
                let space = build_space(Topology::FourPhotonSingleCavity, 4)?;
                (flow_graph(&hamiltonian_n4_variant(&q, &space)?, 4)?, "n4-variant")
            }
        }
    };
    let mut out = RunOutput::new();
    let blocking = graph.blocking_states();
    let line = match blocking.first() {
        None => "candidate: true".to_string(),
        Some((state, n)) => format!(
            "candidate: false, blocking state {state} ({n} incoming path{})",
            if *n == 1 { "" } else { "s" }
        ),
    };
    out.summary.push(line);
    out.metadata.push("system", label);
    let edges: Vec<_> = graph
        .edges
        .iter()
        .map(|e| serde_json::json!({ "from": e.from.to_string(), "to": e.to.to_string(), "strength": e.strength }))
        .collect();
    let incoming: Vec<_> = graph
        .incoming
        .iter()
        .map(|(l, n)| serde_json::json!({ "state": l.to_string(), "paths": n }))
        .collect();
    let doc = serde_json::json!({
        "candidate": graph.candidate(),
        "photons": graph.photons,
        "nodes": graph.nodes.iter().map(ToString::to_string).collect::<Vec<_>>(),
        "edges": edges,
        "incoming": incoming,
    });
    out.artifacts.push(Artifact::Json("check-candidate.json".into(), doc));
    Ok(out)
}

fn cw_concurrence(ctx: &Context, n_max: usize) -> Result<(f64, DensityMatrix, usize), CliError> {
    let (rho, photons) = match ctx.system {
        SystemKind::N2 => {
            let p = ctx.scenario.n2_params(cw_defaults())?;
            let sys = OpenSystem::n2(&p, n_max)?;
            (steady_state(&sys, &SteadyStateOptions::default())?.rho, 2)
        }
        SystemKind::N4 => {
            let (_, p) = ctx.n4_source()?;
            let sys = OpenSystem::n4(&p, n_max, Topology::FourPhoton)?;
            (steady_state(&sys, &SteadyStateOptions::default())?.rho, 4)
        }
        SystemKind::N4Variant => {
            return Err(CliError::Config("the variant system has no GES to drive".into()))
        }
    };
    Ok((concurrence(&tomography(&rho, photons)?), rho, photons))
}

pub fn convergence(ctx: &Context) -> Result<RunOutput, CliError> {
    let s = ctx.scenario.convergence.clone().unwrap_or_default();
    let base = ctx.n_max(if ctx.system == SystemKind::N2 { 4 } else { 6 });
    let list = s.n_max.unwrap_or_else(|| vec![base - 1, base, base + 1]);
    let tol = s.tolerance.unwrap_or(1e-4);
    let report = convergence_check(&list, tol, |n| {
        cw_concurrence(ctx, n).map(|r| r.0).map_err(|e| match e {
            CliError::Numeric(e) => e,
            other => noon_core::Error::Unsupported(other.to_string()),
        })
    })?;
    let mut t = table(["n_max", "concurrence", "difference"]);
    for (k, (&n, &v)) in report.n_max.iter().zip(&report.values).enumerate() {
        let d = if k == 0 { f64::NAN } else { report.differences[k - 1] };
        t.push(vec![n as f64, v, d])?;
    }
    let mut out = RunOutput::new();
    out.metadata.push("tolerance", tol);
    out.metadata.push("converged", report.converged);
    out.summary.push(format!(
        "concurrence {:?} -> converged: {}",
        report.values, report.converged
    ));
    out.artifacts.push(Artifact::Csv("convergence.csv".into(), t));
    Ok(out)
}

pub fn tomography_cmd(ctx: &Context) -> Result<RunOutput, CliError> {
    let n_max = ctx.n_max(if ctx.system == SystemKind::N2 { 4 } else { 6 });
    let (c, rho, photons) = cw_concurrence(ctx, n_max)?;
    let tm = tomography(&rho, photons)?;
    let mut out = RunOutput::new();
    out.metadata.push("n_max", n_max);
    out.metadata.push("concurrence", c);
    if photons == 2 {
        let m = trace_distance(&tm)?;
        out.metadata.push("trace_distance", m.trace_distance);
        out.metadata.push("theta_opt", m.theta_opt);
        out.summary.push(format!("C = {c:.4}, D = {:.4}", m.trace_distance));
    } else {
        out.summary.push(format!("C = {c:.4}"));
    }
    let mut t = table(["row", "col", "re", "im"]);
    for i in 0..=photons {
        for j in 0..=photons {
            let z = tm.get(i, j);
            t.push(vec![i as f64, j as f64, z.re, z.im])?;
        }
    }
    out.artifacts.push(Artifact::Csv("tomography.csv".into(), t));
    out.artifacts.push(json("tomography.json", &tm)?);
    Ok(out)
}

fn json<T: serde::Serialize>(name: &str, data: &T) -> Result<Artifact, CliError> {
    let value = serde_json::to_value(data)
        .map_err(|e| noon_core::Error::Unsupported(format!("JSON serialization failed: {e}")))?;
    Ok(Artifact::Json(name.into(), value))
}
