//! Master-equation dynamics: density matrices, the Lindblad generator,
//! propagation with population traces, and steady states.

use std::sync::Arc;

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use crate::design::{one_photon_eigensystem, solve_ges_n2, Branch, DesignSolutionN4, N4_BLOCK};
use crate::error::{invalid, Error, Result};
use crate::hilbert::{annihilator, Cavity, HilbertSpace, Operator};
use crate::linalg::{
    gmres, hermitian_eigenvalues, hermiticity_error, max_abs, CMatrix, CVector, SparseMatrix, C64,
    I, ONE, ZERO,
};
use crate::model::{OpenSystem, ParamsN2, ParamsN4};
use crate::ode::{integrate, Tolerances};
use crate::sector::SectorSolver;

/// Bounds enforced on every sampled density matrix.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct InvariantTolerances {
    pub hermiticity: f64,
    pub trace: f64,
    pub positivity: f64,
}

impl Default for InvariantTolerances {
    fn default() -> Self {
        Self {
            hermiticity: 1e-10,
            trace: 1e-8,
            positivity: 1e-8,
        }
    }
}

/// Density matrix on a truncated space.
#[derive(Clone, Debug)]
pub struct DensityMatrix {
    space: Arc<HilbertSpace>,
    data: CMatrix,
}

impl DensityMatrix {
    pub fn vacuum(space: &Arc<HilbertSpace>) -> Self {
        let d = space.dim();
        let mut data = CMatrix::zeros(d, d);
        let v = space.vacuum();
        data[(v, v)] = ONE;
        Self {
            space: space.clone(),
            data,
        }
    }

    /// `|ψ⟩⟨ψ|` for a normalized `ψ`.
    pub fn pure(space: &Arc<HilbertSpace>, psi: &CVector) -> Result<Self> {
        if psi.len() != space.dim() {
            return Err(Error::SpaceMismatch);
        }
        let norm = psi.norm();
        if (norm - 1.0).abs() > 1e-10 {
            return Err(invalid("psi", format!("state norm is {norm}, expected 1")));
        }
        Ok(Self {
            space: space.clone(),
            data: psi * psi.adjoint(),
        })
    }

    /// Validating constructor.
    pub fn from_matrix(space: &Arc<HilbertSpace>, data: CMatrix) -> Result<Self> {
        if data.shape() != (space.dim(), space.dim()) {
            return Err(Error::SpaceMismatch);
        }
        let rho = Self {
            space: space.clone(),
            data,
        };
        rho.check(InvariantTolerances::default())
            .map_err(|what| Error::InvariantViolated { time: 0.0, what })?;
        Ok(rho)
    }

    pub(crate) fn from_raw(space: &Arc<HilbertSpace>, data: CMatrix) -> Self {
        Self {
            space: space.clone(),
            data,
        }
    }

    pub fn space(&self) -> &Arc<HilbertSpace> {
        &self.space
    }

    pub fn matrix(&self) -> &CMatrix {
        &self.data
    }

    pub fn trace(&self) -> C64 {
        self.data.trace()
    }

    /// `⟨ψ|ρ|ψ⟩`.
    pub fn population(&self, psi: &CVector) -> f64 {
        (psi.adjoint() * &self.data * psi)[(0, 0)].re
    }

    /// `Tr(O ρ)`.
    pub fn expectation(&self, op: &Operator) -> C64 {
        (op.matrix() * &self.data).trace()
    }

    /// Total population of basis states with excitation `n`.
    pub fn sector_population(&self, n: usize) -> f64 {
        self.space
            .sector(n)
            .into_iter()
            .map(|i| self.data[(i, i)].re)
            .sum()
    }

    pub fn min_eigenvalue(&self) -> f64 {
        hermitian_eigenvalues(&self.data)[0]
    }

    /// Checks Hermiticity, unit trace and positivity.
    pub fn check(&self, tol: InvariantTolerances) -> std::result::Result<(), String> {
        let h = hermiticity_error(&self.data);
        if !(h <= tol.hermiticity) {
            return Err(format!("Hermiticity error {h:.3e}"));
        }
        let tr = self.trace();
        if !((tr - ONE).norm() <= tol.trace) {
            return Err(format!("trace {tr}"));
        }
        let lmin = self.min_eigenvalue();
        if !(lmin >= -tol.positivity) {
            return Err(format!("negative eigenvalue {lmin:.3e}"));
        }
        Ok(())
    }
}

/// Sparse Lindblad generator of an [`OpenSystem`], with the drive amplitude
/// supplied per call.
pub struct Liouvillian {
    dim: usize,
    h: SparseMatrix,
    pump: SparseMatrix,
    jumps: Vec<(SparseMatrix, SparseMatrix)>,
    /// `κ/2 (n1 + n2)` per basis state.
    loss: Vec<f64>,
    kappa: f64,
}

impl Liouvillian {
    pub fn new(system: &OpenSystem) -> Self {
        let space = system.space();
        let jumps = [Cavity::One, Cavity::Two]
            .into_iter()
            .map(|c| {
                let a = annihilator(space, c).to_sparse();
                let ad = a.adjoint();
                (a, ad)
            })
            .collect();
        Self {
            dim: space.dim(),
            h: system.hamiltonian.to_sparse(),
            pump: system.pump.to_sparse(),
            jumps,
            loss: space
                .labels()
                .iter()
                .map(|l| 0.5 * system.kappa * (l.n1 + l.n2) as f64)
                .collect(),
            kappa: system.kappa,
        }
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    /// `out = L ρ` for a column-major `dim × dim` slice and drive `rabi`.
    pub fn apply_slice(&self, rabi: f64, x: &[C64], out: &mut [C64], scratch: &mut [C64]) {
        let d = self.dim;
        let mi = -I;
        out.iter_mut().for_each(|z| *z = ZERO);
        self.h.left_mul_acc(mi, x, out);
        self.h.right_mul_acc(I, x, out);
        if rabi != 0.0 {
            self.pump.left_mul_acc(mi * rabi, x, out);
            self.pump.right_mul_acc(I * rabi, x, out);
        }
        for j in 0..d {
            let lj = self.loss[j];
            let col = &mut out[j * d..(j + 1) * d];
            let xc = &x[j * d..(j + 1) * d];
            for i in 0..d {
                col[i] -= xc[i] * (self.loss[i] + lj);
            }
        }
        if self.kappa != 0.0 {
            let k = C64::new(self.kappa, 0.0);
            for (a, ad) in &self.jumps {
                scratch.iter_mut().for_each(|z| *z = ZERO);
                a.left_mul_acc(ONE, x, scratch);
                ad.right_mul_acc(k, scratch, out);
            }
        }
    }

    /// `out = L ρ` for Hermitian `ρ`, evaluated as `M + M†` so the result is
    /// Hermitian to the last bit and propagation cannot drift off the
    /// Hermitian subspace.
    pub fn apply_hermitian(&self, rabi: f64, x: &[C64], out: &mut [C64], scratch: &mut [C64]) {
        // With ρ Hermitian, M† = iρH + iΩρP − ρΛ + κ/2 Σ aρa†, and the
        // right products stream through memory.
        let d = self.dim;
        out.iter_mut().for_each(|z| *z = ZERO);
        self.h.right_mul_acc(I, x, out);
        if rabi != 0.0 {
            self.pump.right_mul_acc(I * rabi, x, out);
        }
        for j in 0..d {
            let lj = self.loss[j];
            let col = &mut out[j * d..(j + 1) * d];
            let xc = &x[j * d..(j + 1) * d];
            for (o, v) in col.iter_mut().zip(xc) {
                *o -= v * lj;
            }
        }
        if self.kappa != 0.0 {
            let k = C64::new(0.5 * self.kappa, 0.0);
            for (a, ad) in &self.jumps {
                scratch.iter_mut().for_each(|z| *z = ZERO);
                a.left_mul_acc(ONE, x, scratch);
                ad.right_mul_acc(k, scratch, out);
            }
        }
        for j in 0..d {
            out[j * d + j] = C64::new(2.0 * out[j * d + j].re, 0.0);
            for i in 0..j {
                let s = out[j * d + i] + out[i * d + j].conj();
                out[j * d + i] = s;
                out[i * d + j] = s.conj();
            }
        }
    }

    pub fn apply(&self, rabi: f64, x: &CMatrix) -> CMatrix {
        let d = self.dim;
        let mut out = CMatrix::zeros(d, d);
        let mut scratch = vec![ZERO; d * d];
        self.apply_slice(rabi, x.as_slice(), out.as_mut_slice(), &mut scratch);
        out
    }
}

/// `(1/i)[H, ρ] + κ Σ_j (a_j ρ a_j† − ½{a_j†a_j, ρ})` for a full Hamiltonian.
pub fn liouvillian_apply(h_total: &Operator, kappa: f64, rho: &DensityMatrix) -> Result<CMatrix> {
    let space = h_total.space();
    if space.dim() != rho.space().dim() {
        return Err(Error::SpaceMismatch);
    }
    let r = rho.matrix();
    let h = h_total.matrix();
    let mut out = (h * r - r * h) * (-I);
    for c in [Cavity::One, Cavity::Two] {
        let a = annihilator(space, c);
        let a = a.matrix();
        let ad = a.adjoint();
        let n = &ad * a;
        out += (a * r * &ad - (&n * r + r * &n) * C64::new(0.5, 0.0)) * C64::new(kappa, 0.0);
    }
    Ok(out)
}

/// Gaussian drive envelope `Ω(t) = Ω_peak exp(−(t − t_peak)² / δt_p²)`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct PulseShape {
    pub omega_peak: f64,
    pub t_peak: f64,
    pub dt_p: f64,
}

impl PulseShape {
    /// Pulse with power `Ω_peak² δt_p` and duration `δt_p`.
    pub fn from_power(power: f64, dt_p: f64, t_peak: f64) -> Result<Self> {
        if !(dt_p > 0.0) {
            return Err(invalid("dt_p", "pulse duration must be positive"));
        }
        if !(power >= 0.0) {
            return Err(invalid("power", "pulse power must be non-negative"));
        }
        Ok(Self {
            omega_peak: (power / dt_p).sqrt(),
            t_peak,
            dt_p,
        })
    }

    pub fn amplitude(&self, t: f64) -> f64 {
        let x = (t - self.t_peak) / self.dt_p;
        self.omega_peak * (-x * x).exp()
    }

    /// `Ω_peak² δt_p`.
    pub fn power(&self) -> f64 {
        self.omega_peak * self.omega_peak * self.dt_p
    }

    /// Sampling time just after the pulse.
    pub fn after(&self) -> f64 {
        self.t_peak + 2.0 * self.dt_p
    }
}

/// Time dependence of the drive during propagation.
#[derive(Clone, Copy, Debug, PartialEq)]
pub enum Drive {
    /// The system's own constant `rabi`.
    Constant,
    Pulse(PulseShape),
}

/// States whose populations are recorded during propagation.
#[derive(Clone, Debug)]
pub struct TraceProjectors {
    pub target: CVector,
    pub target_photons: usize,
    pub one_photon: [CVector; 2],
}

impl TraceProjectors {
    /// Two-photon GES on `branch` and the one-photon eigenstates.
    pub fn n2(p: &ParamsN2, branch: Branch, space: &Arc<HilbertSpace>) -> Result<Self> {
        let ges = solve_ges_n2(p, branch)?;
        Ok(Self {
            target: ges.state_vector(space)?,
            target_photons: 2,
            one_photon: one_photon_eigensystem(p)?.vectors(space)?,
        })
    }

    /// Four-photon GES of `design` and the one-photon eigenstates of `p`.
    pub fn n4(design: &DesignSolutionN4, p: &ParamsN4, space: &Arc<HilbertSpace>) -> Result<Self> {
        let mut target = CVector::from_element(space.dim(), ZERO);
        for (l, a) in N4_BLOCK.iter().zip(design.amplitudes) {
            target[space.require_index(l)?] = C64::new(a, 0.0);
        }
        let p1 = ParamsN2 {
            g2p: 1.0,
            j: p.j,
            delta1: p.delta1,
            delta2: p.delta2,
            kappa: p.kappa,
            omega_pump_detuning: p.omega_pump_detuning,
            rabi: p.rabi,
            pump_port: p.pump_port,
        };
        Ok(Self {
            target,
            target_photons: 4,
            one_photon: one_photon_eigensystem(&p1)?.vectors(space)?,
        })
    }
}

/// Time-resolved populations of a propagation.
#[derive(Clone, Debug, Default, PartialEq, Serialize)]
pub struct PopulationTrace {
    pub times: Vec<f64>,
    /// GES population (`P_2002` or `P_4004`).
    pub target: Vec<f64>,
    pub one_photon_plus: Vec<f64>,
    pub one_photon_minus: Vec<f64>,
    pub vacuum: Vec<f64>,
    /// Other states of the target excitation manifold (`P_2R`).
    pub remainder: Vec<f64>,
    /// States above the target manifold (`P_M`).
    pub multi: Vec<f64>,
    /// Manifolds strictly between one excitation and the target.
    pub intermediate: Vec<f64>,
}

impl PopulationTrace {
    pub fn one_photon(&self, k: usize) -> f64 {
        self.one_photon_plus[k] + self.one_photon_minus[k]
    }

    /// Sum over the complete partition at sample `k`.
    pub fn partition_sum(&self, k: usize) -> f64 {
        self.target[k]
            + self.one_photon(k)
            + self.vacuum[k]
            + self.remainder[k]
            + self.multi[k]
            + self.intermediate[k]
    }

    fn record(&mut self, t: f64, rho: &DensityMatrix, proj: &TraceProjectors) {
        let space = rho.space();
        let top = space.max_excitation();
        let n = proj.target_photons;
        let target = rho.population(&proj.target);
        let target_sector = rho.sector_population(n);
        self.times.push(t);
        self.target.push(target);
        self.one_photon_plus.push(rho.population(&proj.one_photon[0]));
        self.one_photon_minus.push(rho.population(&proj.one_photon[1]));
        self.vacuum.push(rho.sector_population(0));
        self.remainder.push(target_sector - target);
        self.multi
            .push(((n + 1)..=top).map(|m| rho.sector_population(m)).sum());
        self.intermediate
            .push((2..n).map(|m| rho.sector_population(m)).sum());
    }
}

/// Integrator settings for [`propagate`].
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct PropagationOptions {
    pub tolerances: Tolerances,
    pub invariants: InvariantTolerances,
    /// Skip the per-sample invariant check (positivity needs an
    /// eigen-decomposition per sample).
    pub check_invariants: bool,
}

impl Default for PropagationOptions {
    fn default() -> Self {
        Self {
            tolerances: Tolerances::default(),
            invariants: InvariantTolerances::default(),
            check_invariants: true,
        }
    }
}

/// Result of [`propagate`].
#[derive(Clone, Debug)]
pub struct Propagation {
    pub trace: PopulationTrace,
    pub final_state: DensityMatrix,
    pub evaluations: usize,
}

/// Integrates the master equation from `rho0` at `t_grid[0]` and records
/// populations at every grid time.
pub fn propagate(
    system: &OpenSystem,
    rho0: &DensityMatrix,
    drive: Drive,
    t_grid: &[f64],
    projectors: &TraceProjectors,
    opts: &PropagationOptions,
) -> Result<Propagation> {
    if t_grid.is_empty() {
        return Err(invalid("t_grid", "needs at least one time"));
    }
    if t_grid.windows(2).any(|w| !(w[1] > w[0])) {
        return Err(invalid("t_grid", "times must be strictly increasing"));
    }
    if rho0.space().dim() != system.space().dim() {
        return Err(Error::SpaceMismatch);
    }
    let liou = Liouvillian::new(system);
    let d = liou.dim();
    let mut tol = opts.tolerances;
    if let Drive::Pulse(p) = drive {
        tol.max_step = tol.max_step.min(0.5 * p.dt_p);
    }
    let mut scratch = vec![ZERO; d * d];
    let rabi_at = |t: f64| match drive {
        Drive::Constant => system.rabi,
        Drive::Pulse(p) => p.amplitude(t),
    };
    let mut y: Vec<C64> = rho0.matrix().as_slice().to_vec();
    let space = system.space().clone();
    let mut trace = PopulationTrace::default();
    let mut observe = |_: usize, t: f64, y: &[C64]| -> Result<()> {
        let rho = DensityMatrix::from_raw(&space, CMatrix::from_column_slice(d, d, y));
        if opts.check_invariants {
            rho.check(opts.invariants)
                .map_err(|what| Error::InvariantViolated { time: t, what })?;
        }
        trace.record(t, &rho, projectors);
        Ok(())
    };
    observe(0, t_grid[0], &y)?;
    let stats = integrate(
        |t, x, dx| liou.apply_hermitian(rabi_at(t), x, dx, &mut scratch),
        t_grid[0],
        &mut y,
        &t_grid[1..],
        tol,
        |k, t, y| observe(k + 1, t, y),
    )?;
    Ok(Propagation {
        trace,
        final_state: DensityMatrix::from_raw(system.space(), CMatrix::from_column_slice(d, d, &y)),
        evaluations: stats.evaluations,
    })
}

/// Algorithm for [`steady_state`].
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum SteadyStateMethod {
    /// Sector-preconditioned GMRES.
    Krylov,
    /// Dense LU of the full Liouvillian with a trace row; small spaces only.
    Direct,
    /// Long-time propagation from the vacuum.
    Propagation,
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct SteadyStateOptions {
    pub method: SteadyStateMethod,
    /// Required `max |L ρ|`.
    pub tolerance: f64,
}

impl Default for SteadyStateOptions {
    fn default() -> Self {
        Self {
            method: SteadyStateMethod::Krylov,
            tolerance: 1e-10,
        }
    }
}

#[derive(Clone, Debug)]
pub struct SteadyState {
    pub rho: DensityMatrix,
    pub residual: f64,
    /// Method that produced `rho`; Krylov falls back to propagation.
    pub method: SteadyStateMethod,
    pub iterations: usize,
}

/// Largest dimension accepted by [`SteadyStateMethod::Direct`].
pub const DIRECT_MAX_DIM: usize = 40;

/// Solves `L ρ = 0` with `Tr ρ = 1`.
pub fn steady_state(system: &OpenSystem, opts: &SteadyStateOptions) -> Result<SteadyState> {
    if !(system.kappa > 0.0) {
        return Err(invalid("kappa", "steady state needs kappa > 0"));
    }
    let liou = Liouvillian::new(system);
    let mut method = opts.method;
    let (rho, iterations) = match opts.method {
        // Strong drive can stall the preconditioned iteration; time
        // evolution is slow but always reaches the attractor.
        SteadyStateMethod::Krylov => match krylov_steady_state(system, &liou, opts.tolerance) {
            Ok(r) => r,
            Err(Error::LinearSolver(_)) => {
                method = SteadyStateMethod::Propagation;
                propagated_steady_state(system, &liou, opts.tolerance)?
            }
            Err(e) => return Err(e),
        },
        SteadyStateMethod::Direct => (direct_steady_state(system, &liou)?, 1),
        SteadyStateMethod::Propagation => propagated_steady_state(system, &liou, opts.tolerance)?,
    };
    let residual = max_abs(&liou.apply(system.rabi, &rho));
    if !(residual <= opts.tolerance) {
        return Err(Error::SteadyStateNotConverged { residual });
    }
    Ok(SteadyState {
        rho: DensityMatrix::from_raw(system.space(), rho),
        residual,
        method,
        iterations,
    })
}

fn hermitize(m: &CMatrix) -> CMatrix {
    (m + m.adjoint()) * C64::new(0.5, 0.0)
}

fn krylov_steady_state(
    system: &OpenSystem,
    liou: &Liouvillian,
    tolerance: f64,
) -> Result<(CMatrix, usize)> {
    let d = liou.dim();
    let v = system.space().vacuum();
    let vv = v + v * d;
    let mut rho_vac = CMatrix::zeros(d, d);
    rho_vac[(v, v)] = ONE;
    if system.rabi == 0.0 {
        return Ok((rho_vac, 0));
    }
    let pre = SectorSolver::new(&system.hamiltonian, system.kappa)?;
    let rabi = system.rabi;
    let pump = system.pump.to_sparse();
    // With y = P z and ρ = |v⟩⟨v| + y − Tr(y)|v⟩⟨v|, the rows of L ρ = 0
    // other than (v, v) read z + Ω L_V (ρ − |v⟩⟨v|) = −Ω L_V |v⟩⟨v|.
    let lv = |x: &[C64], out: &mut [C64]| {
        out.iter_mut().for_each(|z| *z = ZERO);
        pump.left_mul_acc(-I * rabi, x, out);
        pump.right_mul_acc(I * rabi, x, out);
    };
    let expand = |z: &[C64]| -> Result<CMatrix> {
        let mut y = pre.solve(&CMatrix::from_column_slice(d, d, z))?;
        let tr: C64 = y.diagonal().iter().sum();
        y[(v, v)] -= tr;
        Ok(y)
    };
    let mut b = vec![ZERO; d * d];
    lv(rho_vac.as_slice(), &mut b);
    b.iter_mut().for_each(|z| *z = -*z);
    b[vv] = ZERO;
    let mut tmp = vec![ZERO; d * d];
    let (z, report) = gmres(
        |z, out| {
            let y = expand(z)?;
            lv(y.as_slice(), &mut tmp);
            for k in 0..out.len() {
                out[k] = z[k] + tmp[k];
            }
            out[vv] = ZERO;
            Ok(())
        },
        &b,
        krylov_restart(d * d),
        3000,
        tolerance * 1e-2,
    )?;
    let y = expand(&z)?;
    let rho = hermitize(&(rho_vac + y));
    Ok((rho, report.iterations))
}

/// Restart length: long enough for strong drive, bounded in memory.
fn krylov_restart(n: usize) -> usize {
    if n <= 10_000 {
        400
    } else {
        120
    }
}

fn direct_steady_state(system: &OpenSystem, liou: &Liouvillian) -> Result<CMatrix> {
    let d = liou.dim();
    if d > DIRECT_MAX_DIM {
        return Err(Error::Unsupported(format!(
            "dense steady state limited to dim <= {DIRECT_MAX_DIM}, got {d}"
        )));
    }
    let n = d * d;
    let mut m = DMatrix::<C64>::zeros(n, n);
    let mut e = CMatrix::zeros(d, d);
    for col in 0..n {
        e.as_mut_slice()[col] = ONE;
        let l = liou.apply(system.rabi, &e);
        m.set_column(col, &CVector::from_column_slice(l.as_slice()));
        e.as_mut_slice()[col] = ZERO;
    }
    let v = system.space().vacuum();
    let row = v + v * d;
    for col in 0..n {
        m[(row, col)] = ZERO;
    }
    for i in 0..d {
        m[(row, i + i * d)] = ONE;
    }
    let mut b = CVector::zeros(n);
    b[row] = ONE;
    let x = m
        .lu()
        .solve(&b)
        .ok_or_else(|| Error::LinearSolver("singular Liouvillian".into()))?;
    Ok(hermitize(&CMatrix::from_column_slice(d, d, x.as_slice())))
}

fn propagated_steady_state(
    system: &OpenSystem,
    liou: &Liouvillian,
    tolerance: f64,
) -> Result<(CMatrix, usize)> {
    let d = liou.dim();
    let v = system.space().vacuum();
    let mut y = vec![ZERO; d * d];
    y[v + v * d] = ONE;
    let tol = Tolerances {
        rtol: 1e-12,
        atol: 1e-15,
        max_step: f64::INFINITY,
    };
    let chunk = 10.0 / system.kappa;
    let mut scratch = vec![ZERO; d * d];
    let mut t = 0.0;
    let mut residual = f64::INFINITY;
    for round in 1..=400 {
        integrate(
            |_, x, dx| liou.apply_hermitian(system.rabi, x, dx, &mut scratch),
            t,
            &mut y,
            &[t + chunk],
            tol,
            |_, _, _| Ok(()),
        )?;
        t += chunk;
        let rho = hermitize(&CMatrix::from_column_slice(d, d, &y));
        let tr = rho.trace();
        let rho = rho / tr;
        residual = max_abs(&liou.apply(system.rabi, &rho));
        if residual <= tolerance {
            return Ok((rho, round));
        }
    }
    Err(Error::SteadyStateNotConverged { residual })
}

/// Outcome of rerunning a quantity at several truncations.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct ConvergenceReport {
    pub n_max: Vec<usize>,
    pub values: Vec<f64>,
    /// `|value_k − value_{k−1}|` for successive truncations.
    pub differences: Vec<f64>,
    pub tolerance: f64,
    pub converged: bool,
}

/// Evaluates `quantity` at every truncation; converged when successive
/// values differ by less than `tolerance`.
pub fn convergence_check<F>(n_max_list: &[usize], tolerance: f64, quantity: F) -> Result<ConvergenceReport>
where
    F: Fn(usize) -> Result<f64>,
{
    if n_max_list.len() < 2 {
        return Err(invalid("n_max_list", "needs at least two truncations"));
    }
    let values: Vec<f64> = n_max_list.iter().map(|&n| quantity(n)).collect::<Result<_>>()?;
    let differences: Vec<f64> = values.windows(2).map(|w| (w[1] - w[0]).abs()).collect();
    Ok(ConvergenceReport {
        n_max: n_max_list.to_vec(),
        converged: differences.iter().all(|&x| x < tolerance),
        values,
        differences,
        tolerance,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::hilbert::{build_space, ket, BasisLabel, QdState, Topology};
    use crate::model::G_REF;

    fn cw_params() -> ParamsN2 {
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

    #[test]
    fn sparse_generator_matches_dense_formula() {
        let p = cw_params();
        let sys = OpenSystem::n2(&p, 3).unwrap();
        let space = sys.space().clone();
        let d = space.dim();
        let psi = CVector::from_fn(d, |i, _| C64::new((i as f64).cos(), 0.3 * i as f64));
        let psi = &psi / C64::new(psi.norm(), 0.0);
        let rho = DensityMatrix::pure(&space, &psi).unwrap();
        let dense = liouvillian_apply(&sys.total_hamiltonian(), sys.kappa, &rho).unwrap();
        let liou = Liouvillian::new(&sys);
        let sparse = liou.apply(sys.rabi, rho.matrix());
        assert!(max_abs(&(&dense - sparse)) < 1e-13);
        let mut herm = CMatrix::zeros(d, d);
        let mut scratch = vec![ZERO; d * d];
        liou.apply_hermitian(sys.rabi, rho.matrix().as_slice(), herm.as_mut_slice(), &mut scratch);
        assert!(max_abs(&(&dense - &herm)) < 1e-13);
        assert_eq!(hermiticity_error(&herm), 0.0);
    }

    #[test]
    fn single_mode_decay_rate() {
        let mut p = cw_params();
        p.j = 0.0;
        p.delta1 = 0.0;
        p.delta2 = 0.0;
        p.omega_pump_detuning = 0.0;
        p.rabi = 0.0;
        let sys = OpenSystem::n2(&p, 2).unwrap();
        let space = sys.space().clone();
        let psi = ket(&space, &BasisLabel::new(QdState::G, 1, 0)).unwrap();
        let rho = DensityMatrix::pure(&space, &psi).unwrap();
        let d = Liouvillian::new(&sys).apply(0.0, rho.matrix());
        let i = space.index_of(&BasisLabel::new(QdState::G, 1, 0)).unwrap();
        assert!((d[(i, i)].re + p.kappa).abs() < 1e-15);
    }

    #[test]
    fn krylov_matches_direct() {
        let p = cw_params();
        let sys = OpenSystem::n2(&p, 3).unwrap();
        let k = steady_state(&sys, &SteadyStateOptions::default()).unwrap();
        let dsol = steady_state(
            &sys,
            &SteadyStateOptions {
                method: SteadyStateMethod::Direct,
                tolerance: 1e-10,
            },
        )
        .unwrap();
        assert!(max_abs(&(k.rho.matrix() - dsol.rho.matrix())) < 1e-10);
        k.rho.check(InvariantTolerances::default()).unwrap();
    }

    #[test]
    fn vacuum_is_undriven_steady_state() {
        let mut p = cw_params();
        p.rabi = 0.0;
        let sys = OpenSystem::n2(&p, 3).unwrap();
        let ss = steady_state(&sys, &SteadyStateOptions::default()).unwrap();
        let vac = DensityMatrix::vacuum(sys.space());
        assert!(max_abs(&(ss.rho.matrix() - vac.matrix())) == 0.0);
    }

    #[test]
    fn pulse_shape() {
        let p = PulseShape::from_power(45.0, 9.0, 36.0).unwrap();
        assert!((p.power() - 45.0).abs() < 1e-12);
        assert!((p.amplitude(36.0) - 5f64.sqrt()).abs() < 1e-12);
        assert!((p.amplitude(45.0) - 5f64.sqrt() * (-1f64).exp()).abs() < 1e-12);
        assert!(PulseShape::from_power(1.0, 0.0, 0.0).is_err());
    }

    #[test]
    fn rejects_non_increasing_grid() {
        let p = cw_params();
        let sys = OpenSystem::n2(&p, 2).unwrap();
        let space = build_space(Topology::TwoPhoton, 2).unwrap();
        let proj = TraceProjectors::n2(&p, Branch::Minus, &space);
        // Δ2 = −0.207 is only 1e-4 away from the condition; use exact value
        assert!(proj.is_err());
        let mut q = p;
        q.delta2 = crate::design::condition_delta2(1.0, G_REF, Branch::Minus).unwrap();
        let proj = TraceProjectors::n2(&q, Branch::Minus, &space).unwrap();
        let rho = DensityMatrix::vacuum(&space);
        let r = propagate(&sys, &rho, Drive::Constant, &[0.0, 1.0, 1.0], &proj, &PropagationOptions::default());
        assert!(r.is_err());
    }
}
