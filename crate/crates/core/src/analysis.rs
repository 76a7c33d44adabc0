//! Photon-coincidence observables: tomography, entanglement measures,
//! windowed coincidence counts and detection rates.

use std::f64::consts::PI;

use serde::{Serialize, Serializer};

use crate::design::{condition_delta2, one_photon_eigensystem, solve_ges_n2, Branch};
use crate::dynamics::DensityMatrix;
use crate::error::{invalid, Error, Result};
use crate::hilbert::{annihilator, Cavity};
use crate::linalg::{hermitian_eigenvalues, CMatrix, CVector, C64, ONE, ZERO};
use crate::model::{OpenSystem, ParamsN2};
use crate::ode::{integrate, Tolerances};
use crate::sector::SectorSolver;
use crate::units::EnergyScale;

fn factorial(n: usize) -> f64 {
    (1..=n).map(|k| k as f64).product()
}

/// Real and imaginary parts of a complex matrix, row-major.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct ComplexTable {
    pub re: Vec<Vec<f64>>,
    pub im: Vec<Vec<f64>>,
}

impl From<&CMatrix> for ComplexTable {
    fn from(m: &CMatrix) -> Self {
        let rows = |f: fn(&C64) -> f64| {
            (0..m.nrows())
                .map(|i| (0..m.ncols()).map(|j| f(&m[(i, j)])).collect())
                .collect()
        };
        Self {
            re: rows(|z| z.re),
            im: rows(|z| z.im),
        }
    }
}

fn serialize_cmatrix<S: Serializer>(m: &CMatrix, s: S) -> std::result::Result<S::Ok, S::Error> {
    ComplexTable::from(m).serialize(s)
}

/// Unit-trace moment matrix over `|N,0⟩, |N−1,1⟩, …, |0,N⟩`.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct TomographyMatrix {
    pub photons: usize,
    #[serde(serialize_with = "serialize_cmatrix")]
    matrix: CMatrix,
}

impl TomographyMatrix {
    /// Normalizes raw moments `M_{k,k'}` (`k` = photons in cavity 2).
    pub fn from_moments(photons: usize, moments: CMatrix) -> Result<Self> {
        let tr = moments.trace().re;
        if !(tr > 1e-300) {
            return Err(Error::NoPhotonWeight(photons));
        }
        Ok(Self {
            photons,
            matrix: moments / C64::new(tr, 0.0),
        })
    }

    pub fn matrix(&self) -> &CMatrix {
        &self.matrix
    }

    pub fn get(&self, row: usize, col: usize) -> C64 {
        self.matrix[(row, col)]
    }

    /// Coherence between `|N,0⟩` and `|0,N⟩`.
    pub fn corner(&self) -> C64 {
        self.matrix[(0, self.photons)]
    }
}

fn ladder_power(a: &CMatrix, k: usize) -> CMatrix {
    let d = a.nrows();
    (0..k).fold(CMatrix::identity(d, d), |acc, _| acc * a)
}

/// Normally ordered `N`-photon moment matrix of `rho`, normalized.
pub fn tomography(rho: &DensityMatrix, photons: usize) -> Result<TomographyMatrix> {
    if photons == 0 {
        return Err(invalid("photons", "must be positive"));
    }
    let space = rho.space();
    if space.n_max() < photons {
        return Err(Error::TruncationTooSmall {
            n_max: space.n_max(),
            required: photons,
        });
    }
    let a1 = annihilator(space, Cavity::One).into_matrix();
    let a2 = annihilator(space, Cavity::Two).into_matrix();
    // B_k = a2^k a1^(N−k), so row k carries k photons in cavity 2
    let ops: Vec<CMatrix> = (0..=photons)
        .map(|k| ladder_power(&a2, k) * ladder_power(&a1, photons - k))
        .collect();
    let norms: Vec<f64> = (0..=photons)
        .map(|k| (factorial(k) * factorial(photons - k)).sqrt())
        .collect();
    let r = rho.matrix();
    let applied: Vec<CMatrix> = ops.iter().map(|b| b * r).collect();
    let moments = CMatrix::from_fn(photons + 1, photons + 1, |k, kp| {
        // Tr(B_k' ρ B_k†)
        let bk = &ops[k];
        let bkp_rho = &applied[kp];
        let mut acc = ZERO;
        for i in 0..bk.nrows() {
            for j in 0..bk.ncols() {
                acc += bkp_rho[(i, j)] * bk[(i, j)].conj();
            }
        }
        acc / (norms[k] * norms[kp])
    });
    TomographyMatrix::from_moments(photons, moments)
}

/// `2|T_{1,3}|` for two photons and `|T_{1,N+1}|` otherwise.
pub fn concurrence(t: &TomographyMatrix) -> f64 {
    let c = t.corner().norm();
    if t.photons == 2 {
        2.0 * c
    } else {
        c
    }
}

/// Entanglement figures of a two-photon tomography matrix.
#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct PurityMeasures {
    pub concurrence: f64,
    pub trace_distance: f64,
    pub theta_opt: f64,
}

/// `ρ_θ = (|20⟩⟨20| + |02⟩⟨02| + e^{iθ}|20⟩⟨02| + h.c.)/2`.
pub fn noon_reference(theta: f64) -> CMatrix {
    let mut m = CMatrix::zeros(3, 3);
    m[(0, 0)] = C64::new(0.5, 0.0);
    m[(2, 2)] = C64::new(0.5, 0.0);
    m[(0, 2)] = C64::from_polar(0.5, theta);
    m[(2, 0)] = C64::from_polar(0.5, -theta);
    m
}

/// `Tr|ρ_θ − T|` as the sum of absolute eigenvalues.
pub fn trace_norm_distance(t: &TomographyMatrix, theta: f64) -> f64 {
    hermitian_eigenvalues(&(noon_reference(theta) - t.matrix()))
        .iter()
        .map(|x| x.abs())
        .sum()
}

/// Minimizes `Tr|ρ_θ − T|` over `θ ∈ [0, 2π)`.
pub fn trace_distance(t: &TomographyMatrix) -> Result<PurityMeasures> {
    if t.photons != 2 {
        return Err(Error::Unsupported(
            "trace distance is defined for the two-photon matrix only".into(),
        ));
    }
    let n = 720;
    let step = 2.0 * PI / n as f64;
    let (k_best, _) = (0..n)
        .map(|k| (k, trace_norm_distance(t, k as f64 * step)))
        .min_by(|a, b| a.1.total_cmp(&b.1))
        .expect("non-empty grid");
    // golden-section refinement inside the neighbouring cells
    let g = (5f64.sqrt() - 1.0) / 2.0;
    let mut lo = (k_best as f64 - 1.0) * step;
    let mut hi = (k_best as f64 + 1.0) * step;
    let f = |x: f64| trace_norm_distance(t, x);
    let mut x1 = hi - g * (hi - lo);
    let mut x2 = lo + g * (hi - lo);
    let mut f1 = f(x1);
    let mut f2 = f(x2);
    for _ in 0..80 {
        if f1 <= f2 {
            hi = x2;
            x2 = x1;
            f2 = f1;
            x1 = hi - g * (hi - lo);
            f1 = f(x1);
        } else {
            lo = x1;
            x1 = x2;
            f1 = f2;
            x2 = lo + g * (hi - lo);
            f2 = f(x2);
        }
    }
    let theta = 0.5 * (lo + hi);
    Ok(PurityMeasures {
        concurrence: concurrence(t),
        trace_distance: f(theta),
        theta_opt: theta.rem_euclid(2.0 * PI),
    })
}

/// Branch whose condition lies closest to `p.delta2`, with the distance.
pub fn nearest_branch(p: &ParamsN2) -> Result<(Branch, f64)> {
    let dp = (p.delta2 - condition_delta2(p.delta1, p.g2p, Branch::Plus)?).abs();
    let dm = (p.delta2 - condition_delta2(p.delta1, p.g2p, Branch::Minus)?).abs();
    Ok(if dm <= dp {
        (Branch::Minus, dm)
    } else {
        (Branch::Plus, dp)
    })
}

/// `Γ_2002 = 2 sin²φ_s κ` on the nearest branch.
pub fn gamma_2002(p: &ParamsN2) -> Result<f64> {
    let (branch, _) = nearest_branch(p)?;
    let mut q = *p;
    q.delta2 = condition_delta2(p.delta1, p.g2p, branch)?;
    let ges = solve_ges_n2(&q, branch)?;
    Ok(2.0 * ges.sin_phi().powi(2) * p.kappa)
}

/// How `ρ(t)` is evolved for the outer time integral.
#[derive(Clone, Copy, Debug, PartialEq, Eq, serde::Deserialize, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum OuterEvolution {
    /// Full pump-free master equation from `rho0`.
    MasterEquation,
    /// Closed rate-equation solution for a prepared GES.
    RateEquation,
}

/// Windowed coincidence counts for detector pairs.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct CoincidenceRecord {
    pub window: f64,
    /// Repetition period; `None` for a single shot.
    pub rep_period: Option<f64>,
    /// Upper limit of the outer time integral.
    pub accumulation: f64,
    pub delta_e1: f64,
    /// `counts[k][k']`, with `k` the number of cavity-2 detectors in the
    /// creation string and `k'` in the annihilation string.
    #[serde(serialize_with = "serialize_cmatrix")]
    pub counts: CMatrix,
}

impl CoincidenceRecord {
    pub fn n11(&self) -> f64 {
        self.counts[(0, 0)].re
    }

    pub fn n22(&self) -> f64 {
        self.counts[(2, 2)].re
    }

    pub fn n12(&self) -> f64 {
        self.counts[(1, 1)].re
    }

    pub fn n1122(&self) -> C64 {
        self.counts[(0, 2)]
    }

    pub fn n2211(&self) -> C64 {
        self.counts[(2, 0)]
    }

    /// Tomography matrix reconstructed from the counts.
    pub fn tomography(&self) -> Result<TomographyMatrix> {
        let norms = [2f64.sqrt(), 1.0, 2f64.sqrt()];
        let m = CMatrix::from_fn(3, 3, |k, kp| self.counts[(k, kp)] / (norms[k] * norms[kp]));
        TomographyMatrix::from_moments(2, m)
    }

    /// Detected rate `𝒩_11 / ΔT_rep`, if a repetition period is set.
    pub fn rate(&self) -> Option<f64> {
        self.rep_period.map(|t| self.n11() / t)
    }
}

/// Cavity indices of the two creation operators for row `k`.
fn detectors(k: usize) -> [usize; 2] {
    match k {
        0 => [0, 0],
        1 => [0, 1],
        _ => [1, 1],
    }
}

/// Coincidence counts from the regression theorem.
///
/// The outer integral runs to infinity exactly: `∫(ρ(t) − ρ_∞) dt` solves
/// `L0 X = ρ_∞ − ρ0` and the inner window integral is
/// `L0⁻¹(e^{L0 W} σ − σ)`.
pub fn coincidence_counts_regression(
    p: &ParamsN2,
    rho0: &DensityMatrix,
    window: f64,
    outer: OuterEvolution,
) -> Result<CoincidenceRecord> {
    if !(window > 0.0) {
        return Err(invalid("window", "must be positive"));
    }
    if !(p.kappa > 0.0) {
        return Err(invalid("kappa", "coincidence counts need kappa > 0"));
    }
    let mut q = *p;
    q.rabi = 0.0;
    let n_max = rho0.space().n_max();
    let sys = OpenSystem::n2(&q, n_max)?;
    let space = sys.space().clone();
    if space.dim() != rho0.space().dim() {
        return Err(Error::SpaceMismatch);
    }
    let d = space.dim();
    let solver = SectorSolver::new(&sys.hamiltonian, sys.kappa)?;
    let mut vac = CMatrix::zeros(d, d);
    vac[(space.vacuum(), space.vacuum())] = ONE;
    let x = match outer {
        OuterEvolution::MasterEquation => solver.solve(&(vac - rho0.matrix()))?,
        OuterEvolution::RateEquation => rate_equation_integral(p, &space)?,
    };
    let ops = [
        annihilator(&space, Cavity::One).into_matrix(),
        annihilator(&space, Cavity::Two).into_matrix(),
    ];
    let liou = crate::dynamics::Liouvillian::new(&sys);
    let tol = Tolerances {
        rtol: 1e-11,
        atol: 1e-15,
        max_step: f64::INFINITY,
    };
    let mut scratch = vec![ZERO; d * d];
    // y[l][i] = ∫_0^W e^{L0 τ} [a_l X a_i†] dτ
    let mut y: Vec<Vec<CMatrix>> = Vec::with_capacity(2);
    for l in 0..2 {
        let mut row = Vec::with_capacity(2);
        for i in 0..2 {
            let sigma = &ops[l] * &x * ops[i].adjoint();
            let mut s: Vec<C64> = sigma.as_slice().to_vec();
            integrate(
                |_, v, dv| liou.apply_slice(0.0, v, dv, &mut scratch),
                0.0,
                &mut s,
                &[window],
                tol,
                |_, _, _| Ok(()),
            )?;
            let diff = CMatrix::from_column_slice(d, d, &s) - &sigma;
            row.push(solver.solve(&diff)?);
        }
        y.push(row);
    }
    let k2 = sys.kappa * sys.kappa;
    let tr = |a: &CMatrix, b: &CMatrix| -> C64 { (a * b).trace() };
    let counts = CMatrix::from_fn(3, 3, |k, kp| {
        let [c0, c1] = detectors(k);
        let [d0, d1] = detectors(kp);
        let t1 = tr(&(ops[c1].adjoint() * &ops[d1]), &y[d0][c0]);
        let t2 = tr(&(ops[c0].adjoint() * &ops[d0]), &y[d1][c1]);
        (t1 + t2) * k2
    });
    Ok(CoincidenceRecord {
        window,
        rep_period: None,
        accumulation: f64::INFINITY,
        delta_e1: one_photon_eigensystem(p)?.splitting(),
        counts,
    })
}

/// `∫ ρ(t) dt` minus its vacuum part for the rate-equation decay of the GES.
fn rate_equation_integral(
    p: &ParamsN2,
    space: &std::sync::Arc<crate::hilbert::HilbertSpace>,
) -> Result<CMatrix> {
    let (branch, residual) = nearest_branch(p)?;
    if residual > 1e-9 {
        return Err(Error::ConditionViolated { residual });
    }
    let ges = solve_ges_n2(p, branch)?;
    let gamma = 2.0 * ges.sin_phi().powi(2) * p.kappa;
    let v = ges.state_vector(space)?;
    let [plus, minus] = one_photon_eigensystem(p)?.vectors(space)?;
    let outer = |u: &CVector| u * u.adjoint();
    // ∫ P_1P,± dt = 1/(2κ) for either branch
    Ok(outer(&v) / C64::new(gamma, 0.0)
        + (outer(&plus) + outer(&minus)) / C64::new(2.0 * p.kappa, 0.0))
}

/// Closed-form counts for a prepared GES at the design condition.
#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct AnalyticCounts {
    pub window: f64,
    pub delta_e1: f64,
    pub n11: f64,
    pub n22: f64,
    pub n12: f64,
    pub n1122: C64,
}

/// `∫_0^W e^{−κτ} e^{iωτ} dτ`.
fn window_integral(kappa: f64, omega: f64, w: f64) -> C64 {
    let z = C64::new(kappa, -omega);
    if z.norm() < 1e-300 {
        return C64::new(w, 0.0);
    }
    (ONE - (-z * w).exp()) / z
}

/// Elementary closed forms of the windowed coincidence integrals.
///
/// `n1122` is the `⟨a1†² a2²⟩` moment, whose phase runs as `c⁴ e^{iωτ}`.
pub fn coincidence_counts_analytic(p: &ParamsN2, window: f64) -> Result<AnalyticCounts> {
    if !(window > 0.0) {
        return Err(invalid("window", "must be positive"));
    }
    let (_, residual) = nearest_branch(p)?;
    if residual > 1e-9 {
        return Err(Error::ConditionViolated { residual });
    }
    let sys = one_photon_eigensystem(p)?;
    let w = sys.splitting();
    let (s, c) = sys.phi.sin_cos();
    let (s2, c2) = (s * s, c * c);
    let k = p.kappa;
    let i0 = window_integral(k, 0.0, window).re;
    let ip = window_integral(k, w, window);
    let im = window_integral(k, -w, window);
    let n11 = k * ((c2 * c2 + s2 * s2) * i0 + 2.0 * s2 * c2 * ip.re);
    Ok(AnalyticCounts {
        window,
        delta_e1: w,
        n11,
        n22: n11,
        n12: 2.0 * k * s2 * c2 * (i0 - ip.re),
        n1122: -(C64::new(2.0 * s2 * c2 * i0, 0.0) + ip * (c2 * c2) + im * (s2 * s2)) * k,
    })
}

/// Upper bound `κ Γ_2002 / ΔE_1` on the detection rate, in Hz.
pub fn detection_rate(p: &ParamsN2, g_ref_micro_ev: f64) -> Result<f64> {
    let bound = p.kappa * gamma_2002(p)? / one_photon_eigensystem(p)?.splitting();
    Ok(EnergyScale::from_g_ref_micro_ev(g_ref_micro_ev).to_per_second(bound))
}

/// Order-of-magnitude scaling `κ (κ/J)^{N−1}` of the NOON emission rate.
pub fn rate_scaling_n(photons: usize, kappa: f64, j: f64) -> Result<f64> {
    if photons < 2 {
        return Err(invalid("photons", "must be at least 2"));
    }
    if j == 0.0 {
        return Err(invalid("j", "must be non-zero"));
    }
    Ok(kappa * (kappa / j).powi(photons as i32 - 1))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::hilbert::{build_space, ket, BasisLabel, QdState, Topology};

    #[test]
    fn fock_state_tomography() {
        let s = build_space(Topology::TwoPhoton, 3).unwrap();
        let psi = ket(&s, &BasisLabel::new(QdState::G, 2, 0)).unwrap();
        let t = tomography(&DensityMatrix::pure(&s, &psi).unwrap(), 2).unwrap();
        assert!((t.get(0, 0) - ONE).norm() < 1e-14);
        assert!(t.get(1, 1).norm() < 1e-14 && t.get(2, 2).norm() < 1e-14);
        let m = trace_distance(&t).unwrap();
        assert!((m.trace_distance - 2f64.sqrt()).abs() < 1e-12);
        assert_eq!(m.concurrence, 0.0);
    }

    #[test]
    fn pure_noon_state() {
        let s = build_space(Topology::TwoPhoton, 2).unwrap();
        let mut psi = ket(&s, &BasisLabel::new(QdState::G, 2, 0)).unwrap();
        psi -= ket(&s, &BasisLabel::new(QdState::G, 0, 2)).unwrap();
        psi /= C64::new(2f64.sqrt(), 0.0);
        let t = tomography(&DensityMatrix::pure(&s, &psi).unwrap(), 2).unwrap();
        assert!(crate::linalg::max_abs(&(t.matrix() - noon_reference(PI))) < 1e-14);
        let m = trace_distance(&t).unwrap();
        assert!(m.trace_distance < 1e-10);
        assert!((m.theta_opt - PI).abs() < 1e-6);
        assert!((m.concurrence - 1.0).abs() < 1e-14);
    }

    #[test]
    fn vacuum_has_no_tomography() {
        let s = build_space(Topology::TwoPhoton, 2).unwrap();
        assert!(matches!(
            tomography(&DensityMatrix::vacuum(&s), 2),
            Err(Error::NoPhotonWeight(2))
        ));
    }

    #[test]
    fn window_integral_limits() {
        let z = window_integral(0.3, 1.2, 1e-9);
        assert!((z.re - 1e-9).abs() < 1e-17);
        let inf = window_integral(0.3, 0.0, 1e4);
        assert!((inf.re - 1.0 / 0.3).abs() < 1e-12);
    }

    #[test]
    fn rate_scaling() {
        assert!((rate_scaling_n(4, 1.0, 10.0).unwrap() - 1e-3).abs() < 1e-15);
        assert!(rate_scaling_n(1, 1.0, 1.0).is_err());
    }
}
