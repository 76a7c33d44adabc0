//! Effective Hamiltonians, drive terms and open-system assembly.
//!
//! Energies are expressed in units of `√2 g_ref`, with `g_ref = g_2P` for the
//! two-photon system and `g_ref = g_1` for the four-photon system.

use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::error::{invalid, require_finite, Result};
use crate::hilbert::{
    annihilator, build_space, diagonal, total_excitation_operator, BasisLabel, Cavity,
    HilbertSpace, Operator, QdState, Topology,
};
use crate::linalg::C64;

/// Coupling of the reference QD in energy units of `√2 g_ref`.
pub const G_REF: f64 = std::f64::consts::FRAC_1_SQRT_2;

/// Parameters of the single-QD, two-cavity system.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ParamsN2 {
    pub g2p: f64,
    pub j: f64,
    pub delta1: f64,
    pub delta2: f64,
    pub kappa: f64,
    pub omega_pump_detuning: f64,
    pub rabi: f64,
    pub pump_port: Cavity,
}

impl ParamsN2 {
    pub fn validate(&self) -> Result<()> {
        for (name, v) in [
            ("g2p", self.g2p),
            ("j", self.j),
            ("delta1", self.delta1),
            ("delta2", self.delta2),
            ("kappa", self.kappa),
            ("omega_pump_detuning", self.omega_pump_detuning),
            ("rabi", self.rabi),
        ] {
            require_finite(name, v)?;
        }
        if self.g2p <= 0.0 {
            return Err(invalid("g2p", "must be positive"));
        }
        if self.kappa < 0.0 {
            return Err(invalid("kappa", "must be non-negative"));
        }
        if self.rabi < 0.0 {
            return Err(invalid("rabi", "must be non-negative"));
        }
        Ok(())
    }
}

/// Parameters of the two-QD, two-cavity system.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ParamsN4 {
    pub g1: f64,
    pub g2: f64,
    pub j: f64,
    pub delta1: f64,
    pub delta2: f64,
    pub delta_b: f64,
    pub kappa: f64,
    pub omega_pump_detuning: f64,
    pub rabi: f64,
    pub pump_port: Cavity,
}

impl ParamsN4 {
    pub fn validate(&self) -> Result<()> {
        for (name, v) in [
            ("g1", self.g1),
            ("g2", self.g2),
            ("j", self.j),
            ("delta1", self.delta1),
            ("delta2", self.delta2),
            ("delta_b", self.delta_b),
            ("kappa", self.kappa),
            ("omega_pump_detuning", self.omega_pump_detuning),
            ("rabi", self.rabi),
        ] {
            require_finite(name, v)?;
        }
        if self.g1 <= 0.0 {
            return Err(invalid("g1", "must be positive"));
        }
        if self.g2 <= 0.0 {
            return Err(invalid("g2", "must be positive"));
        }
        if self.kappa < 0.0 {
            return Err(invalid("kappa", "must be non-negative"));
        }
        if self.rabi < 0.0 {
            return Err(invalid("rabi", "must be non-negative"));
        }
        Ok(())
    }
}

/// Exciton–cavity coupling and biexciton binding energy, in any common unit.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct MicroscopicParams {
    pub g: f64,
    pub chi: f64,
}

impl MicroscopicParams {
    /// True when `g` leaves the regime where the two-photon elimination is
    /// trustworthy.
    pub fn outside_two_photon_regime(&self) -> bool {
        self.g > self.chi / 4.0
    }
}

/// `g_2P = 4 g² / χ`.
pub fn effective_coupling(micro: &MicroscopicParams) -> Result<f64> {
    if !(micro.chi > 0.0) {
        return Err(invalid("chi", "binding energy must be positive"));
    }
    Ok(4.0 * micro.g * micro.g / micro.chi)
}

fn sqrt_f(n: usize) -> f64 {
    (n as f64).sqrt()
}

/// Adds `value` to `⟨bra|H|ket⟩` and its conjugate to `⟨ket|H|bra⟩`.
fn add_hermitian_pair(h: &mut Operator, bra: usize, ket: usize, value: f64) {
    h.add_element(bra, ket, C64::new(value, 0.0));
    h.add_element(ket, bra, C64::new(value, 0.0));
}

/// Photon part shared by all systems: detunings and inter-cavity tunneling.
fn photon_part(space: &Arc<HilbertSpace>, j: f64, delta1: f64, delta2: f64) -> Operator {
    let mut h = diagonal(space, |l| delta1 * l.n1 as f64 + delta2 * l.n2 as f64);
    let n_max = space.n_max();
    for (k, l) in space.labels().iter().enumerate() {
        // a1† a2: |n1, n2⟩ -> √((n1+1) n2) |n1+1, n2-1⟩
        if l.n2 > 0 && l.n1 < n_max && j != 0.0 {
            let to = space
                .index_of(&BasisLabel::new(l.qd, l.n1 + 1, l.n2 - 1))
                .expect("label inside truncation");
            add_hermitian_pair(&mut h, to, k, j * sqrt_f((l.n1 + 1) * l.n2));
        }
    }
    h
}

/// Adds `g (c² |upper⟩⟨lower| + h.c.)` for cavity `c`.
fn two_photon_transition(
    h: &mut Operator,
    g: f64,
    cavity: Cavity,
    lower: QdState,
    upper: QdState,
) {
    if g == 0.0 {
        return;
    }
    let space = h.space().clone();
    for (k, l) in space.labels().iter().enumerate() {
        if l.qd != lower {
            continue;
        }
        let n = l.photons(cavity);
        if n < 2 {
            continue;
        }
        let target = match cavity {
            Cavity::One => BasisLabel::new(upper, l.n1 - 2, l.n2),
            Cavity::Two => BasisLabel::new(upper, l.n1, l.n2 - 2),
        };
        let to = space.index_of(&target).expect("label inside truncation");
        add_hermitian_pair(h, to, k, g * sqrt_f(n * (n - 1)));
    }
}

/// `H = Σ Δ_j n_j + J (a1†a2 + h.c.) + g_2P (a1² |B⟩⟨G| + h.c.)`.
pub fn hamiltonian_n2(p: &ParamsN2, space: &Arc<HilbertSpace>) -> Result<Operator> {
    if space.topology() != Topology::TwoPhoton {
        return Err(invalid("space", "two-photon Hamiltonian needs a TwoPhoton space"));
    }
    let mut h = photon_part(space, p.j, p.delta1, p.delta2);
    two_photon_transition(&mut h, p.g2p, Cavity::One, QdState::G, QdState::B);
    Ok(h)
}

fn hamiltonian_n4_with(
    p: &ParamsN4,
    space: &Arc<HilbertSpace>,
    qd2_cavity: Cavity,
) -> Result<Operator> {
    if space.topology() == Topology::TwoPhoton {
        return Err(invalid("space", "four-photon Hamiltonian needs a two-QD space"));
    }
    let mut h = photon_part(space, p.j, p.delta1, p.delta2);
    let db = p.delta_b;
    h = &h
        + &diagonal(space, |l| match l.qd {
            QdState::B1 => db,
            QdState::B2 => -db,
            _ => 0.0,
        });
    // each dot flips independently of the other
    two_photon_transition(&mut h, p.g1, Cavity::One, QdState::G, QdState::B1);
    two_photon_transition(&mut h, p.g1, Cavity::One, QdState::B2, QdState::Q);
    two_photon_transition(&mut h, p.g2, qd2_cavity, QdState::G, QdState::B2);
    two_photon_transition(&mut h, p.g2, qd2_cavity, QdState::B1, QdState::Q);
    Ok(h)
}

/// Two dots, QD1 on cavity 1 and QD2 on cavity 2.
pub fn hamiltonian_n4(p: &ParamsN4, space: &Arc<HilbertSpace>) -> Result<Operator> {
    hamiltonian_n4_with(p, space, Cavity::Two)
}

/// Two dots, both emitting into cavity 1.
pub fn hamiltonian_n4_variant(p: &ParamsN4, space: &Arc<HilbertSpace>) -> Result<Operator> {
    hamiltonian_n4_with(p, space, Cavity::One)
}

/// `H - δ_p N_tot`.
pub fn rotating_frame(h: &Operator, pump_detuning: f64) -> Operator {
    let n = total_excitation_operator(h.space());
    h - &(&n * pump_detuning)
}

/// `Ω (a_k + a_k†)`.
pub fn pump_term(space: &Arc<HilbertSpace>, rabi: f64, port: Cavity) -> Operator {
    let a = annihilator(space, port);
    &(&a + &a.adjoint()) * rabi
}

/// Pump-free rotating-frame Hamiltonian, unit pump operator, drive strength
/// and loss rate of one open system.
#[derive(Clone, Debug)]
pub struct OpenSystem {
    pub hamiltonian: Operator,
    pub pump: Operator,
    pub rabi: f64,
    pub kappa: f64,
}

impl OpenSystem {
    pub fn n2(p: &ParamsN2, n_max: usize) -> Result<Self> {
        p.validate()?;
        let space = build_space(Topology::TwoPhoton, n_max)?;
        let h = rotating_frame(&hamiltonian_n2(p, &space)?, p.omega_pump_detuning);
        Ok(Self {
            pump: pump_term(&space, 1.0, p.pump_port),
            hamiltonian: h,
            rabi: p.rabi,
            kappa: p.kappa,
        })
    }

    pub fn n4(p: &ParamsN4, n_max: usize, topology: Topology) -> Result<Self> {
        p.validate()?;
        let space = build_space(topology, n_max)?;
        let h = match topology {
            Topology::FourPhoton => hamiltonian_n4(p, &space)?,
            Topology::FourPhotonSingleCavity => hamiltonian_n4_variant(p, &space)?,
            Topology::TwoPhoton => {
                return Err(invalid("topology", "four-photon system needs a two-QD topology"))
            }
        };
        Ok(Self {
            hamiltonian: rotating_frame(&h, p.omega_pump_detuning),
            pump: pump_term(&space, 1.0, p.pump_port),
            rabi: p.rabi,
            kappa: p.kappa,
        })
    }

    pub fn space(&self) -> &Arc<HilbertSpace> {
        self.hamiltonian.space()
    }

    pub fn with_rabi(&self, rabi: f64) -> Self {
        Self {
            rabi,
            ..self.clone()
        }
    }

    /// `H' + Ω V`.
    pub fn total_hamiltonian(&self) -> Operator {
        &self.hamiltonian + &(&self.pump * self.rabi)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::hilbert::{creator, projector};

    fn p2() -> ParamsN2 {
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
    fn effective_coupling_examples() {
        let g = effective_coupling(&MicroscopicParams { g: 100.0, chi: 800.0 }).unwrap();
        assert!((g - 50.0).abs() < 1e-12);
        let g = effective_coupling(&MicroscopicParams { g: 50.0, chi: 1000.0 }).unwrap();
        assert!((g - 10.0).abs() < 1e-12);
        assert_eq!(
            effective_coupling(&MicroscopicParams { g: 0.0, chi: 1.0 }).unwrap(),
            0.0
        );
        assert!(effective_coupling(&MicroscopicParams { g: 1.0, chi: 0.0 }).is_err());
    }

    #[test]
    fn n2_matches_operator_products() {
        let p = p2();
        let s = build_space(Topology::TwoPhoton, 4).unwrap();
        let h = hamiltonian_n2(&p, &s).unwrap();
        let a1 = annihilator(&s, Cavity::One);
        let a2 = annihilator(&s, Cavity::Two);
        let n1 = &creator(&s, Cavity::One) * &a1;
        let n2 = &creator(&s, Cavity::Two) * &a2;
        let hop = &creator(&s, Cavity::One) * &a2;
        let raise = &(&a1 * &a1) * &projector(&s, QdState::G, QdState::B).unwrap();
        let expected = &(&(&(&n1 * p.delta1) + &(&n2 * p.delta2))
            + &(&(&hop + &hop.adjoint()) * p.j))
            + &(&(&raise + &raise.adjoint()) * p.g2p);
        assert!((&h - &expected).max_abs() < 1e-14);
    }

    #[test]
    fn n4_matches_operator_products() {
        let p = ParamsN4 {
            g1: G_REF,
            g2: 2.0 * G_REF,
            j: 1.6,
            delta1: -0.78,
            delta2: 1.9,
            delta_b: 2.68,
            kappa: 0.01,
            omega_pump_detuning: 0.0,
            rabi: 0.0,
            pump_port: Cavity::One,
        };
        for (topology, c2) in [
            (Topology::FourPhoton, Cavity::Two),
            (Topology::FourPhotonSingleCavity, Cavity::One),
        ] {
            let s = build_space(topology, 5).unwrap();
            let h = match topology {
                Topology::FourPhoton => hamiltonian_n4(&p, &s).unwrap(),
                _ => hamiltonian_n4_variant(&p, &s).unwrap(),
            };
            let a1 = annihilator(&s, Cavity::One);
            let a2 = annihilator(&s, Cavity::Two);
            let ac = annihilator(&s, c2);
            let pr = |f, t| projector(&s, f, t).unwrap();
            let sigma1 = &pr(QdState::G, QdState::B1) + &pr(QdState::B2, QdState::Q);
            let sigma2 = &pr(QdState::G, QdState::B2) + &pr(QdState::B1, QdState::Q);
            let x1 = &(&a1 * &a1) * &sigma1;
            let x2 = &(&ac * &ac) * &sigma2;
            let hop = &a1.adjoint() * &a2;
            let mut e = &(&a1.adjoint() * &a1) * p.delta1;
            e = &e + &(&(&a2.adjoint() * &a2) * p.delta2);
            e = &e + &(&(&hop + &hop.adjoint()) * p.j);
            e = &e + &(&(&pr(QdState::B1, QdState::B1) - &pr(QdState::B2, QdState::B2)) * p.delta_b);
            e = &e + &(&(&x1 + &x1.adjoint()) * p.g1);
            e = &e + &(&(&x2 + &x2.adjoint()) * p.g2);
            assert!((&h - &e).max_abs() < 1e-13, "{topology:?}");
        }
    }

    #[test]
    fn rotating_frame_and_pump() {
        let p = p2();
        let s = build_space(Topology::TwoPhoton, 3).unwrap();
        let h = hamiltonian_n2(&p, &s).unwrap();
        assert!((&rotating_frame(&h, 0.0) - &h).max_abs() == 0.0);
        let v = pump_term(&s, 0.3, Cavity::Two);
        let el = v
            .element(&BasisLabel::new(QdState::G, 0, 1), &BasisLabel::new(QdState::G, 0, 0))
            .unwrap();
        assert!((el.re - 0.3).abs() < 1e-15);
        assert!(v.hermiticity_error() == 0.0);
    }

    #[test]
    fn rejects_bad_params() {
        let mut p = p2();
        p.g2p = 0.0;
        assert!(p.validate().is_err());
        let mut p = p2();
        p.rabi = -1.0;
        assert!(p.validate().is_err());
        let mut p = p2();
        p.kappa = f64::NAN;
        assert!(p.validate().is_err());
    }
}
