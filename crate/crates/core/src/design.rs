//! Design conditions for NOON-state generating eigenstates (GES).

use std::collections::BTreeMap;
use std::sync::Arc;

use nalgebra::{DMatrix, DVector, Matrix4, SymmetricEigen, Vector4};
use serde::{Deserialize, Serialize};

use crate::error::{invalid, Error, Result};
use crate::hilbert::{build_space, BasisLabel, HilbertSpace, Operator, QdState, Topology};
use crate::linalg::{CVector, C64, ZERO};
use crate::model::{hamiltonian_n4, ParamsN2, ParamsN4, G_REF};

/// Branch sign `s` of the two-photon condition.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Branch {
    Plus,
    Minus,
}

impl Branch {
    pub fn sign(self) -> f64 {
        match self {
            Branch::Plus => 1.0,
            Branch::Minus => -1.0,
        }
    }
}

/// `E_s = Δ1 + s √(Δ1² + 2 g²)`.
pub fn ges_energy(delta1: f64, g2p: f64, branch: Branch) -> f64 {
    delta1 + branch.sign() * (delta1 * delta1 + 2.0 * g2p * g2p).sqrt()
}

/// Cavity-2 detuning `Δ2 = E_s / 2` at which the GES exists.
pub fn condition_delta2(delta1: f64, g2p: f64, branch: Branch) -> Result<f64> {
    if !(g2p > 0.0) {
        return Err(invalid("g2p", "must be positive"));
    }
    Ok(0.5 * ges_energy(delta1, g2p, branch))
}

/// Analytic two-photon GES of the single-QD system.
#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct DesignSolutionN2 {
    pub branch: Branch,
    pub delta1: f64,
    pub delta2: f64,
    pub g2p: f64,
    pub energy: f64,
    pub mixing_angle: f64,
    /// `(A_B, A_20, A_11, A_02)`.
    pub amplitudes: [f64; 4],
}

/// Labels of the two-photon block in amplitude order.
pub const N2_BLOCK: [BasisLabel; 4] = [
    BasisLabel::new(QdState::B, 0, 0),
    BasisLabel::new(QdState::G, 2, 0),
    BasisLabel::new(QdState::G, 1, 1),
    BasisLabel::new(QdState::G, 0, 2),
];

impl DesignSolutionN2 {
    /// Embeds the GES into a two-photon space.
    pub fn state_vector(&self, space: &Arc<HilbertSpace>) -> Result<CVector> {
        let mut v = CVector::from_element(space.dim(), ZERO);
        for (label, a) in N2_BLOCK.iter().zip(self.amplitudes) {
            v[space.require_index(label)?] = C64::new(a, 0.0);
        }
        Ok(v)
    }

    /// `sin φ_s`.
    pub fn sin_phi(&self) -> f64 {
        self.mixing_angle.sin()
    }
}

/// Two-photon block of `H_eff` in the order of [`N2_BLOCK`].
pub fn h2p_matrix(g2p: f64, j: f64, delta1: f64, delta2: f64) -> DMatrix<f64> {
    let r2 = std::f64::consts::SQRT_2;
    DMatrix::from_row_slice(
        4,
        4,
        &[
            0.0, r2 * g2p, 0.0, 0.0,
            r2 * g2p, 2.0 * delta1, r2 * j, 0.0,
            0.0, r2 * j, delta1 + delta2, r2 * j,
            0.0, 0.0, r2 * j, 2.0 * delta2,
        ],
    )
}

/// Returns the GES on branch `s`, verified against numeric diagonalization.
pub fn solve_ges_n2(p: &ParamsN2, branch: Branch) -> Result<DesignSolutionN2> {
    let d2 = condition_delta2(p.delta1, p.g2p, branch)?;
    let residual = (p.delta2 - d2).abs();
    if !(residual <= 1e-9) {
        return Err(Error::ConditionViolated { residual });
    }
    let energy = 2.0 * d2;
    let phi = (energy / p.g2p).atan();
    let (s, c) = phi.sin_cos();
    let h = std::f64::consts::FRAC_1_SQRT_2;
    let amplitudes = [c, s * h, 0.0, -s * h];

    let m = h2p_matrix(p.g2p, p.j, p.delta1, d2);
    let v = DVector::from_row_slice(&amplitudes);
    let eig_res = (&m * &v - &v * energy).amax();
    let eig = SymmetricEigen::new(m);
    let (k, lam) = eig
        .eigenvalues
        .iter()
        .enumerate()
        .min_by(|a, b| (a.1 - energy).abs().total_cmp(&(b.1 - energy).abs()))
        .expect("non-empty spectrum");
    let overlap = eig.eigenvectors.column(k).dot(&v).abs();
    let mismatch = eig_res.max((lam - energy).abs()).max(1.0 - overlap);
    if mismatch > 1e-10 {
        return Err(Error::ConditionViolated { residual: mismatch });
    }
    Ok(DesignSolutionN2 {
        branch,
        delta1: p.delta1,
        delta2: d2,
        g2p: p.g2p,
        energy,
        mixing_angle: phi,
        amplitudes,
    })
}

/// The two single-photon eigenstates `|1P,±⟩`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct OnePhotonEigensystem {
    pub phi: f64,
    pub energy_plus: f64,
    pub energy_minus: f64,
}

impl OnePhotonEigensystem {
    /// `ΔE_1 = E_1P,+ − E_1P,−`.
    pub fn splitting(&self) -> f64 {
        self.energy_plus - self.energy_minus
    }

    /// Coefficients on `(|G,10⟩, |G,01⟩)`.
    pub fn plus(&self) -> [f64; 2] {
        [self.phi.cos(), self.phi.sin()]
    }

    pub fn minus(&self) -> [f64; 2] {
        [-self.phi.sin(), self.phi.cos()]
    }

    pub fn vectors(&self, space: &Arc<HilbertSpace>) -> Result<[CVector; 2]> {
        let i10 = space.require_index(&BasisLabel::new(QdState::G, 1, 0))?;
        let i01 = space.require_index(&BasisLabel::new(QdState::G, 0, 1))?;
        let make = |c: [f64; 2]| {
            let mut v = CVector::from_element(space.dim(), ZERO);
            v[i10] = C64::new(c[0], 0.0);
            v[i01] = C64::new(c[1], 0.0);
            v
        };
        Ok([make(self.plus()), make(self.minus())])
    }
}

/// Closed-form one-photon eigensystem, checked against the numeric
/// `N_tot = 1` block.
pub fn one_photon_eigensystem(p: &ParamsN2) -> Result<OnePhotonEigensystem> {
    if p.j == 0.0 {
        return Err(invalid("j", "one-photon states are undefined without tunneling"));
    }
    let x = (p.delta1 - p.delta2) / (2.0 * p.j);
    // J > 0 reproduces arctan(√(1+x²) − x); J < 0 flips the eigenvector
    let phi = if p.j > 0.0 {
        ((1.0 + x * x).sqrt() - x).atan()
    } else {
        (-(1.0 + x * x).sqrt() - x).atan()
    };
    let mean = 0.5 * (p.delta1 + p.delta2);
    let half = (0.25 * (p.delta1 - p.delta2).powi(2) + p.j * p.j).sqrt();
    let sys = OnePhotonEigensystem {
        phi,
        energy_plus: mean + half,
        energy_minus: mean - half,
    };
    let m = nalgebra::Matrix2::new(p.delta1, p.j, p.j, p.delta2);
    for (c, e) in [(sys.plus(), sys.energy_plus), (sys.minus(), sys.energy_minus)] {
        let v = nalgebra::Vector2::new(c[0], c[1]);
        let r = (m * v - v * e).amax();
        if r > 1e-10 * (1.0 + half) {
            return Err(Error::ConditionViolated { residual: r });
        }
    }
    Ok(sys)
}

/// Directed coupling between two basis states of one excitation manifold.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct FlowEdge {
    pub from: BasisLabel,
    pub to: BasisLabel,
    pub strength: f64,
}

/// Population-flow schematic in the `N_tot = N` manifold.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct FlowGraph {
    pub photons: usize,
    pub nodes: Vec<BasisLabel>,
    pub edges: Vec<FlowEdge>,
    /// Incoming path count per unwanted state `|G, n, N−n⟩`, `1 ≤ n ≤ N−1`.
    pub incoming: BTreeMap<BasisLabel, usize>,
}

impl FlowGraph {
    /// A GES may exist only if no unwanted state is fed by a single path.
    pub fn candidate(&self) -> bool {
        self.incoming.values().all(|&c| c != 1)
    }

    pub fn blocking_states(&self) -> Vec<(BasisLabel, usize)> {
        self.incoming
            .iter()
            .filter(|(_, &c)| c == 1)
            .map(|(l, &c)| (*l, c))
            .collect()
    }
}

/// Unwanted states `|G, n, N−n⟩` with `1 ≤ n ≤ N−1`, ordered by `n` descending.
pub fn unwanted_states(photons: usize) -> Vec<BasisLabel> {
    (1..photons)
        .rev()
        .map(|n| BasisLabel::new(QdState::G, n, photons - n))
        .collect()
}

/// Builds the flow graph of `h` in the `N_tot = photons` manifold with the
/// GES support taken as every state except the unwanted ones.
pub fn flow_graph(h: &Operator, photons: usize) -> Result<FlowGraph> {
    let unwanted = unwanted_states(photons);
    let space = h.space();
    let support: Vec<BasisLabel> = space
        .sector(photons)
        .into_iter()
        .map(|i| space.label(i))
        .filter(|l| !unwanted.contains(l))
        .collect();
    flow_graph_with_support(h, &support, photons)
}

/// Flow graph with an explicit GES support.
pub fn flow_graph_with_support(
    h: &Operator,
    support: &[BasisLabel],
    photons: usize,
) -> Result<FlowGraph> {
    h.check_excitation_conserving(1e-12)?;
    let space = h.space();
    if space.n_max() < photons {
        return Err(Error::TruncationTooSmall {
            n_max: space.n_max(),
            required: photons,
        });
    }
    let sector = space.sector(photons);
    let nodes: Vec<BasisLabel> = sector.iter().map(|&i| space.label(i)).collect();
    let m = h.matrix();
    let mut edges = Vec::new();
    for from in support {
        let j = space.require_index(from)?;
        for &i in &sector {
            if i != j && m[(i, j)].norm() > 0.0 {
                edges.push(FlowEdge {
                    from: *from,
                    to: space.label(i),
                    strength: m[(i, j)].norm(),
                });
            }
        }
    }
    let incoming = unwanted_states(photons)
        .into_iter()
        .map(|u| (u, edges.iter().filter(|e| e.to == u).count()))
        .collect();
    Ok(FlowGraph {
        photons,
        nodes,
        edges,
        incoming,
    })
}

// ---------------------------------------------------------------------------
// Four-photon design

/// Design parameters `(J, Δ1, Δ2, Δ_B)` in units of `√2 g_1`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct N4Point {
    pub j: f64,
    pub delta1: f64,
    pub delta2: f64,
    pub delta_b: f64,
}

impl N4Point {
    pub const fn new(j: f64, delta1: f64, delta2: f64, delta_b: f64) -> Self {
        Self {
            j,
            delta1,
            delta2,
            delta_b,
        }
    }

    fn to_vector(self) -> Vector4<f64> {
        Vector4::new(self.j, self.delta1, self.delta2, self.delta_b)
    }

    fn from_vector(v: &Vector4<f64>) -> Self {
        Self::new(v[0], v[1], v[2], v[3])
    }

    /// Hamiltonian parameters for coupling ratio `g2/g1`.
    pub fn params(&self, ratio: f64) -> ParamsN4 {
        ParamsN4 {
            g1: G_REF,
            g2: ratio * G_REF,
            j: self.j,
            delta1: self.delta1,
            delta2: self.delta2,
            delta_b: self.delta_b,
            kappa: 0.0,
            omega_pump_detuning: 0.0,
            rabi: 0.0,
            pump_port: crate::hilbert::Cavity::One,
        }
    }
}

/// Published design point at `g2/g1 = 2`, used as continuation anchor.
pub const N4_ANCHOR: (f64, N4Point) = (2.0, N4Point::new(1.61, -0.78, 1.90, 2.68));

/// Labels of the four-photon block in amplitude order.
pub const N4_BLOCK: [BasisLabel; 12] = [
    BasisLabel::new(QdState::Q, 0, 0),
    BasisLabel::new(QdState::B1, 2, 0),
    BasisLabel::new(QdState::B1, 1, 1),
    BasisLabel::new(QdState::B1, 0, 2),
    BasisLabel::new(QdState::B2, 2, 0),
    BasisLabel::new(QdState::B2, 1, 1),
    BasisLabel::new(QdState::B2, 0, 2),
    BasisLabel::new(QdState::G, 4, 0),
    BasisLabel::new(QdState::G, 3, 1),
    BasisLabel::new(QdState::G, 2, 2),
    BasisLabel::new(QdState::G, 1, 3),
    BasisLabel::new(QdState::G, 0, 4),
];

const IQ: usize = 0;
const IB1_11: usize = 2;
const IB1_02: usize = 3;
const IB2_20: usize = 4;
const IB2_11: usize = 5;
const IG40: usize = 7;
const IG31: usize = 8;
const IG22: usize = 9;
const IG13: usize = 10;
const IG04: usize = 11;

/// Four-photon block of the two-dot Hamiltonian in [`N4_BLOCK`] order.
pub fn n4_block(point: &N4Point, ratio: f64) -> Result<DMatrix<f64>> {
    let space = build_space(Topology::FourPhoton, 4)?;
    let h = hamiltonian_n4(&point.params(ratio), &space)?;
    let idx: Vec<usize> = N4_BLOCK
        .iter()
        .map(|l| space.require_index(l))
        .collect::<Result<_>>()?;
    Ok(DMatrix::from_fn(12, 12, |a, b| h.matrix()[(idx[a], idx[b])].re))
}

/// Requirement residuals on the eigenvector closest to the GES form.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct RequirementResiduals {
    /// `2J A_04 + √6 g2 A_{B2,11}`, `√2 g2 A_{B2,20} + √2 g1 A_{B1,02}`,
    /// `√6 g1 A_{B1,11} + 2J A_40`, `|A_40| − |A_04|`.
    pub values: [f64; 4],
    /// `A_40 + A_04`, which vanishes for the antisymmetric GES form.
    pub symmetric_part: f64,
    pub energy: f64,
    pub amplitudes: [f64; 12],
}

impl RequirementResiduals {
    pub fn max_abs(&self) -> f64 {
        self.values.iter().fold(0.0f64, |m, v| m.max(v.abs()))
    }

    /// Root-finding objective: the three interference conditions and the
    /// antisymmetry of the NOON component.
    fn objective(&self) -> Vector4<f64> {
        Vector4::new(
            self.values[0],
            self.values[1],
            self.values[2],
            self.symmetric_part,
        )
    }

    pub fn unwanted_max(&self) -> f64 {
        [IG31, IG22, IG13]
            .iter()
            .fold(0.0f64, |m, &i| m.max(self.amplitudes[i].abs()))
    }
}

fn unwanted_weight(v: &[f64]) -> f64 {
    v[IG31].powi(2) + v[IG22].powi(2) + v[IG13].powi(2)
}

/// Evaluates the four GES requirements at `point`.
pub fn requirement_residuals_n4(point: &N4Point, ratio: f64) -> Result<RequirementResiduals> {
    let m = n4_block(point, ratio)?;
    let eig = SymmetricEigen::new(m);
    let n = eig.eigenvalues.len();
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&a, &b| eig.eigenvalues[a].total_cmp(&eig.eigenvalues[b]));
    let weights: Vec<f64> = (0..n)
        .map(|k| unwanted_weight(eig.eigenvectors.column(k).as_slice()))
        .collect();
    // eigenvalue order breaks ties
    let best = *order
        .iter()
        .min_by(|&&a, &&b| weights[a].total_cmp(&weights[b]))
        .expect("non-empty spectrum");
    let energy = eig.eigenvalues[best];
    let group: Vec<usize> = order
        .iter()
        .copied()
        .filter(|&k| (eig.eigenvalues[k] - energy).abs() < 1e-8)
        .collect();
    let mut v: Vec<f64> = if group.len() > 1 {
        // re-minimize the unwanted weight inside the degenerate subspace
        let g = group.len();
        let w = DMatrix::from_fn(g, g, |a, b| {
            let ca = eig.eigenvectors.column(group[a]);
            let cb = eig.eigenvectors.column(group[b]);
            [IG31, IG22, IG13].iter().map(|&i| ca[i] * cb[i]).sum::<f64>()
        });
        let sub = SymmetricEigen::new(w);
        let kmin = sub.eigenvalues.imin();
        let coeff = sub.eigenvectors.column(kmin);
        let mut v = vec![0.0; n];
        for (a, &k) in group.iter().enumerate() {
            for i in 0..n {
                v[i] += coeff[a] * eig.eigenvectors[(i, k)];
            }
        }
        let norm = v.iter().map(|x| x * x).sum::<f64>().sqrt();
        v.iter_mut().for_each(|x| *x /= norm);
        v
    } else {
        eig.eigenvectors.column(best).iter().copied().collect()
    };
    let flip = if v[IQ].abs() > 1e-12 {
        v[IQ] < 0.0
    } else {
        v[IG40] - v[IG04] < 0.0
    };
    if flip {
        v.iter_mut().for_each(|x| *x = -*x);
    }
    let g1 = G_REF;
    let g2 = ratio * G_REF;
    let j = point.j;
    let s6 = 6f64.sqrt();
    let s2 = std::f64::consts::SQRT_2;
    let values = [
        2.0 * j * v[IG04] + s6 * g2 * v[IB2_11],
        s2 * g2 * v[IB2_20] + s2 * g1 * v[IB1_02],
        s6 * g1 * v[IB1_11] + 2.0 * j * v[IG40],
        v[IG40].abs() - v[IG04].abs(),
    ];
    let mut amplitudes = [0.0; 12];
    amplitudes.copy_from_slice(&v);
    Ok(RequirementResiduals {
        values,
        symmetric_part: v[IG40] + v[IG04],
        energy,
        amplitudes,
    })
}

/// The two closed-form expressions for the GES energy; `None` where the
/// square-root argument is negative.
pub fn closed_form_energies_n4(point: &N4Point, ratio: f64) -> [Option<f64>; 2] {
    let g1 = G_REF;
    let g2 = ratio * G_REF;
    let N4Point {
        j,
        delta1,
        delta2,
        delta_b,
    } = *point;
    let a1 = (delta1 - delta_b / 2.0).powi(2) + 12.0 * g1 * g1 - 4.0 * j * j;
    let a2 = (delta2 + delta_b / 2.0).powi(2) + 12.0 * g2 * g2 - 4.0 * j * j;
    [
        (a1 >= 0.0).then(|| (6.0 * delta1 + delta_b) / 2.0 + a1.sqrt()),
        (a2 >= 0.0).then(|| (6.0 * delta2 - delta_b) / 2.0 - a2.sqrt()),
    ]
}

/// A verified four-photon GES design.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct DesignSolutionN4 {
    pub ratio: f64,
    pub params: N4Point,
    pub energy: f64,
    pub amplitudes: [f64; 12],
    pub residual: f64,
    pub closed_form_energies: [f64; 2],
}

impl DesignSolutionN4 {
    pub fn amplitude(&self, label: &BasisLabel) -> Option<f64> {
        N4_BLOCK
            .iter()
            .position(|l| l == label)
            .map(|i| self.amplitudes[i])
    }

    pub fn hamiltonian_params(&self) -> ParamsN4 {
        self.params.params(self.ratio)
    }
}

/// Why no GES was returned at a ratio.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct N4NoSolution {
    pub ratio: f64,
    pub reason: String,
    /// Smallest ratio at which the tracked branch still is a GES.
    pub branch_end: Option<f64>,
    /// Point satisfying the four requirements that fails the closed-form
    /// energy check, if the continuation reached one.
    pub requirement_root: Option<N4Point>,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub enum N4Outcome {
    Found(DesignSolutionN4),
    NoSolution(N4NoSolution),
}

impl N4Outcome {
    pub fn solution(&self) -> Option<&DesignSolutionN4> {
        match self {
            N4Outcome::Found(s) => Some(s),
            N4Outcome::NoSolution(_) => None,
        }
    }
}

const NEWTON_TOL: f64 = 1e-13;

/// Damped Newton on the requirement objective with a finite-difference
/// Jacobian.
fn newton(start: N4Point, ratio: f64) -> Result<(N4Point, RequirementResiduals)> {
    let mut x = start.to_vector();
    let mut res = requirement_residuals_n4(&N4Point::from_vector(&x), ratio)?;
    let mut f = res.objective();
    for _ in 0..60 {
        if f.amax() <= NEWTON_TOL {
            return Ok((N4Point::from_vector(&x), res));
        }
        let mut jac = Matrix4::zeros();
        for k in 0..4 {
            let h = 1e-7 * (1.0 + x[k].abs());
            let mut xp = x;
            let mut xm = x;
            xp[k] += h;
            xm[k] -= h;
            let fp = requirement_residuals_n4(&N4Point::from_vector(&xp), ratio)?.objective();
            let fm = requirement_residuals_n4(&N4Point::from_vector(&xm), ratio)?.objective();
            jac.set_column(k, &((fp - fm) / (2.0 * h)));
        }
        let Some(dx) = jac.lu().solve(&(-f)) else {
            break;
        };
        let norm0 = f.norm();
        let mut lambda = 1.0;
        let mut accepted = false;
        while lambda >= 1e-4 {
            let xt = x + dx * lambda;
            let rt = requirement_residuals_n4(&N4Point::from_vector(&xt), ratio)?;
            let ft = rt.objective();
            if ft.norm() < (1.0 - 1e-4 * lambda) * norm0 || ft.amax() <= NEWTON_TOL {
                x = xt;
                res = rt;
                f = ft;
                accepted = true;
                break;
            }
            lambda *= 0.5;
        }
        if !accepted {
            break;
        }
    }
    if f.amax() <= 1e-11 {
        Ok((N4Point::from_vector(&x), res))
    } else {
        Err(Error::NoConvergence {
            best_residual: f.amax(),
        })
    }
}

/// Accepts a requirement root as a GES when `J > 0` and both closed-form
/// energies agree with the eigenvalue.
fn classify(point: N4Point, ratio: f64, res: RequirementResiduals) -> std::result::Result<DesignSolutionN4, String> {
    if res.max_abs() > 1e-9 || res.unwanted_max() > 1e-9 {
        return Err(format!("requirements violated (residual {:.3e})", res.max_abs()));
    }
    if point.j <= 0.0 {
        return Err("tunneling rate is not positive".into());
    }
    let [e1, e2] = closed_form_energies_n4(&point, ratio);
    let (Some(e1), Some(e2)) = (e1, e2) else {
        return Err("closed-form GES energy is complex".into());
    };
    let tol = 1e-9 * (1.0 + res.energy.abs());
    if (e1 - res.energy).abs() > tol || (e2 - res.energy).abs() > tol {
        return Err(format!(
            "eigenvalue {:.9} lies on the other closed-form branch ({e1:.9}, {e2:.9})",
            res.energy
        ));
    }
    Ok(DesignSolutionN4 {
        ratio,
        params: point,
        energy: res.energy,
        amplitudes: res.amplitudes,
        residual: res.max_abs(),
        closed_form_energies: [e1, e2],
    })
}

/// Requirement root tracked by natural-parameter continuation from
/// `(from_ratio, from)` to `to_ratio`.
fn track(from: N4Point, from_ratio: f64, to_ratio: f64) -> Result<(N4Point, RequirementResiduals)> {
    let mut x = from;
    let mut r = from_ratio;
    let mut res = requirement_residuals_n4(&x, r)?;
    let mut h = 0.05f64;
    let mut prev: Option<(f64, N4Point)> = None;
    while (to_ratio - r).abs() > 1e-14 {
        let step = h.min((to_ratio - r).abs()) * (to_ratio - r).signum();
        let r_next = r + step;
        // secant predictor
        let guess = match prev {
            Some((rp, xp)) if (r - rp).abs() > 0.0 => {
                let t = step / (r - rp);
                N4Point::from_vector(&(x.to_vector() + (x.to_vector() - xp.to_vector()) * t))
            }
            _ => x,
        };
        match newton(guess, r_next) {
            Ok((xn, rn)) if (xn.to_vector() - x.to_vector()).amax() < 0.25 => {
                prev = Some((r, x));
                x = xn;
                res = rn;
                r = r_next;
                h = (h * 1.5).min(0.05);
            }
            other => {
                h *= 0.5;
                if h < 1e-6 {
                    let best = match other {
                        Err(Error::NoConvergence { best_residual }) => best_residual,
                        _ => f64::NAN,
                    };
                    return Err(Error::NoConvergence { best_residual: best });
                }
            }
        }
    }
    Ok((x, res))
}

/// Finds the GES design at coupling ratio `g2/g1`.
///
/// Without a seed the branch is continued from [`N4_ANCHOR`].
pub fn solve_ges_n4(ratio: f64, seed: Option<N4Point>) -> Result<N4Outcome> {
    if !(ratio.is_finite() && ratio >= 1.0) {
        return Err(invalid("ratio", format!("g2/g1 must be at least 1, got {ratio}")));
    }
    let (point, res) = match seed {
        Some(s) => newton(s, ratio)?,
        None => {
            let (r0, p0) = N4_ANCHOR;
            let (a, _) = newton(p0, r0)?;
            track(a, r0, ratio)?
        }
    };
    Ok(match classify(point, ratio, res) {
        Ok(sol) => N4Outcome::Found(sol),
        Err(reason) => {
            let branch_end = match seed {
                None => locate_branch_end(ratio).ok().flatten(),
                Some(_) => None,
            };
            N4Outcome::NoSolution(N4NoSolution {
                ratio,
                reason,
                branch_end,
                requirement_root: Some(point),
            })
        }
    })
}

/// Bisects for the ratio where the anchored branch stops being a GES,
/// searching between the anchor and `ratio`.
fn locate_branch_end(ratio: f64) -> Result<Option<f64>> {
    let (r0, p0) = N4_ANCHOR;
    let (a, _) = newton(p0, r0)?;
    let mut good = (r0, a);
    let mut bad = ratio;
    while (good.0 - bad).abs() > 1e-4 {
        let mid = 0.5 * (good.0 + bad);
        let (x, res) = track(good.1, good.0, mid)?;
        if classify(x, mid, res).is_ok() {
            good = (mid, x);
        } else {
            bad = mid;
        }
    }
    Ok(Some(good.0))
}

/// Solutions along a list of ratios, each continued from its neighbour.
pub fn fig9_curve(ratios: &[f64]) -> Result<Vec<N4Outcome>> {
    for &r in ratios {
        if !(r.is_finite() && r >= 1.0) {
            return Err(invalid("ratio", format!("g2/g1 must be at least 1, got {r}")));
        }
    }
    let (r0, p0) = N4_ANCHOR;
    let (anchor, _) = newton(p0, r0)?;
    let mut out: Vec<Option<N4Outcome>> = vec![None; ratios.len()];
    let mut up: Vec<usize> = (0..ratios.len()).filter(|&i| ratios[i] >= r0).collect();
    let mut down: Vec<usize> = (0..ratios.len()).filter(|&i| ratios[i] < r0).collect();
    up.sort_by(|&a, &b| ratios[a].total_cmp(&ratios[b]));
    down.sort_by(|&a, &b| ratios[b].total_cmp(&ratios[a]));
    let mut branch_end_cache: Option<Option<f64>> = None;
    for chain in [up, down] {
        let mut cur = (r0, anchor);
        let mut lost = false;
        for i in chain {
            let r = ratios[i];
            let outcome = if lost {
                N4Outcome::NoSolution(N4NoSolution {
                    ratio: r,
                    reason: "continuation lost the branch".into(),
                    branch_end: None,
                    requirement_root: None,
                })
            } else {
                match track(cur.1, cur.0, r) {
                    Ok((x, res)) => {
                        cur = (r, x);
                        match classify(x, r, res) {
                            Ok(sol) => N4Outcome::Found(sol),
                            Err(reason) => {
                                let end = *branch_end_cache
                                    .get_or_insert_with(|| locate_branch_end(r).ok().flatten());
                                N4Outcome::NoSolution(N4NoSolution {
                                    ratio: r,
                                    reason,
                                    branch_end: end,
                                    requirement_root: Some(x),
                                })
                            }
                        }
                    }
                    Err(e) => {
                        lost = true;
                        N4Outcome::NoSolution(N4NoSolution {
                            ratio: r,
                            reason: e.to_string(),
                            branch_end: None,
                            requirement_root: None,
                        })
                    }
                }
            };
            out[i] = Some(outcome);
        }
    }
    Ok(out.into_iter().map(|o| o.expect("every ratio visited")).collect())
}
