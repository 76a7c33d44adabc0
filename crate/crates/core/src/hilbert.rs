//! Truncated QD ⊗ two-cavity Fock spaces and the operators acting on them.

use std::collections::HashMap;
use std::fmt;
use std::ops::{Add, Mul, Sub};
use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::error::{invalid, Error, Result};
use crate::linalg::{max_abs, CMatrix, SparseMatrix, C64, ONE, ZERO};

/// Electronic state of the QD subsystem.
///
/// `B` is the biexciton of a single dot; `B1`, `B2` and `Q` are the
/// two-dot states (one dot excited, or both).
#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum QdState {
    G,
    B,
    B1,
    B2,
    Q,
}

impl QdState {
    /// Excitation carried by the QD, counted in photons.
    pub fn weight(self) -> usize {
        match self {
            QdState::G => 0,
            QdState::B | QdState::B1 | QdState::B2 => 2,
            QdState::Q => 4,
        }
    }
}

/// Which emitter arrangement the space describes.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Topology {
    /// One QD biexciton coupled to cavity 1.
    TwoPhoton,
    /// Two QDs; QD1 on cavity 1, QD2 on cavity 2.
    FourPhoton,
    /// Two QDs both on cavity 1.
    FourPhotonSingleCavity,
}

impl Topology {
    pub fn qd_states(self) -> &'static [QdState] {
        match self {
            Topology::TwoPhoton => &[QdState::G, QdState::B],
            _ => &[QdState::G, QdState::B1, QdState::B2, QdState::Q],
        }
    }

    /// Photon number of the NOON state this system is designed for.
    pub fn target_photons(self) -> usize {
        match self {
            Topology::TwoPhoton => 2,
            _ => 4,
        }
    }
}

/// Cavity index.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Cavity {
    #[serde(rename = "1")]
    One,
    #[serde(rename = "2")]
    Two,
}

impl TryFrom<u8> for Cavity {
    type Error = Error;

    fn try_from(k: u8) -> Result<Self> {
        match k {
            1 => Ok(Cavity::One),
            2 => Ok(Cavity::Two),
            _ => Err(invalid("cavity", format!("must be 1 or 2, got {k}"))),
        }
    }
}

/// Basis ket `|qd, n1 n2⟩`.
#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct BasisLabel {
    pub qd: QdState,
    pub n1: usize,
    pub n2: usize,
}

impl BasisLabel {
    pub const fn new(qd: QdState, n1: usize, n2: usize) -> Self {
        Self { qd, n1, n2 }
    }

    pub fn excitation(&self) -> usize {
        self.qd.weight() + self.n1 + self.n2
    }

    pub fn photons(&self, cavity: Cavity) -> usize {
        match cavity {
            Cavity::One => self.n1,
            Cavity::Two => self.n2,
        }
    }

    fn with_photons(self, cavity: Cavity, n: usize) -> Self {
        match cavity {
            Cavity::One => Self { n1: n, ..self },
            Cavity::Two => Self { n2: n, ..self },
        }
    }
}

impl fmt::Display for BasisLabel {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "|{:?},{}{}⟩", self.qd, self.n1, self.n2)
    }
}

/// Truncated product space with at most `n_max` photons per cavity.
#[derive(Debug)]
pub struct HilbertSpace {
    topology: Topology,
    n_max: usize,
    labels: Vec<BasisLabel>,
    index: HashMap<BasisLabel, usize>,
}

/// Builds the space; labels are sorted by `(qd, n1, n2)`.
pub fn build_space(topology: Topology, n_max: usize) -> Result<Arc<HilbertSpace>> {
    let required = topology.target_photons();
    if n_max < required {
        return Err(Error::TruncationTooSmall { n_max, required });
    }
    let mut labels = Vec::new();
    for &qd in topology.qd_states() {
        for n1 in 0..=n_max {
            for n2 in 0..=n_max {
                labels.push(BasisLabel::new(qd, n1, n2));
            }
        }
    }
    labels.sort();
    let index = labels.iter().enumerate().map(|(i, l)| (*l, i)).collect();
    Ok(Arc::new(HilbertSpace {
        topology,
        n_max,
        labels,
        index,
    }))
}

impl HilbertSpace {
    pub fn topology(&self) -> Topology {
        self.topology
    }

    pub fn n_max(&self) -> usize {
        self.n_max
    }

    pub fn dim(&self) -> usize {
        self.labels.len()
    }

    pub fn labels(&self) -> &[BasisLabel] {
        &self.labels
    }

    pub fn label(&self, i: usize) -> BasisLabel {
        self.labels[i]
    }

    pub fn index_of(&self, label: &BasisLabel) -> Option<usize> {
        self.index.get(label).copied()
    }

    pub fn require_index(&self, label: &BasisLabel) -> Result<usize> {
        if !self.topology.qd_states().contains(&label.qd) {
            return Err(Error::UnknownQdState(label.qd));
        }
        self.index_of(label).ok_or(Error::TruncationTooSmall {
            n_max: self.n_max,
            required: label.n1.max(label.n2),
        })
    }

    pub fn vacuum(&self) -> usize {
        self.index[&BasisLabel::new(QdState::G, 0, 0)]
    }

    /// Largest total excitation present in the space.
    pub fn max_excitation(&self) -> usize {
        self.labels.iter().map(BasisLabel::excitation).max().unwrap_or(0)
    }

    /// Indices of basis states with total excitation `n`, in label order.
    pub fn sector(&self, n: usize) -> Vec<usize> {
        (0..self.dim())
            .filter(|&i| self.labels[i].excitation() == n)
            .collect()
    }

    /// Indices with `n1 + n2 == photons` and the QD in its ground state.
    pub fn photon_manifold(&self, photons: usize) -> Vec<usize> {
        (0..self.dim())
            .filter(|&i| {
                let l = self.labels[i];
                l.qd == QdState::G && l.n1 + l.n2 == photons
            })
            .collect()
    }
}

/// A dense operator bound to a space.
#[derive(Clone, Debug)]
pub struct Operator {
    space: Arc<HilbertSpace>,
    matrix: CMatrix,
}

impl Operator {
    pub fn zeros(space: &Arc<HilbertSpace>) -> Self {
        let d = space.dim();
        Self {
            space: space.clone(),
            matrix: CMatrix::zeros(d, d),
        }
    }

    pub fn identity(space: &Arc<HilbertSpace>) -> Self {
        let d = space.dim();
        Self {
            space: space.clone(),
            matrix: CMatrix::identity(d, d),
        }
    }

    pub fn from_matrix(space: &Arc<HilbertSpace>, matrix: CMatrix) -> Result<Self> {
        if matrix.shape() != (space.dim(), space.dim()) {
            return Err(Error::SpaceMismatch);
        }
        Ok(Self {
            space: space.clone(),
            matrix,
        })
    }

    pub fn space(&self) -> &Arc<HilbertSpace> {
        &self.space
    }

    pub fn matrix(&self) -> &CMatrix {
        &self.matrix
    }

    pub fn into_matrix(self) -> CMatrix {
        self.matrix
    }

    /// `⟨bra| O |ket⟩`.
    pub fn element(&self, bra: &BasisLabel, ket: &BasisLabel) -> Result<C64> {
        let i = self.space.require_index(bra)?;
        let j = self.space.require_index(ket)?;
        Ok(self.matrix[(i, j)])
    }

    pub(crate) fn add_element(&mut self, bra: usize, ket: usize, value: C64) {
        self.matrix[(bra, ket)] += value;
    }

    pub fn adjoint(&self) -> Self {
        Self {
            space: self.space.clone(),
            matrix: self.matrix.adjoint(),
        }
    }

    pub fn scale(&self, s: C64) -> Self {
        Self {
            space: self.space.clone(),
            matrix: &self.matrix * s,
        }
    }

    pub fn commutator(&self, other: &Operator) -> Result<Self> {
        self.check_space(other)?;
        Ok(Self {
            space: self.space.clone(),
            matrix: &self.matrix * &other.matrix - &other.matrix * &self.matrix,
        })
    }

    pub fn max_abs(&self) -> f64 {
        max_abs(&self.matrix)
    }

    pub fn hermiticity_error(&self) -> f64 {
        crate::linalg::hermiticity_error(&self.matrix)
    }

    pub fn to_sparse(&self) -> SparseMatrix {
        SparseMatrix::from_dense(&self.matrix)
    }

    pub fn same_space(&self, other: &Operator) -> bool {
        Arc::ptr_eq(&self.space, &other.space)
            || (self.space.topology == other.space.topology
                && self.space.n_max == other.space.n_max)
    }

    fn check_space(&self, other: &Operator) -> Result<()> {
        if self.same_space(other) {
            Ok(())
        } else {
            Err(Error::SpaceMismatch)
        }
    }

    /// Checks that `self` commutes with the total-excitation operator.
    pub fn check_excitation_conserving(&self, tol: f64) -> Result<()> {
        let n = total_excitation_operator(&self.space);
        let c = self.commutator(&n)?.max_abs();
        if c > tol {
            Err(Error::NotExcitationConserving(c))
        } else {
            Ok(())
        }
    }
}

fn binary(a: &Operator, b: &Operator, f: impl Fn(&CMatrix, &CMatrix) -> CMatrix) -> Operator {
    assert!(a.same_space(b), "operators live on different Hilbert spaces");
    Operator {
        space: a.space.clone(),
        matrix: f(&a.matrix, &b.matrix),
    }
}

impl Add for &Operator {
    type Output = Operator;
    fn add(self, rhs: &Operator) -> Operator {
        binary(self, rhs, |a, b| a + b)
    }
}

impl Sub for &Operator {
    type Output = Operator;
    fn sub(self, rhs: &Operator) -> Operator {
        binary(self, rhs, |a, b| a - b)
    }
}

impl Mul for &Operator {
    type Output = Operator;
    fn mul(self, rhs: &Operator) -> Operator {
        binary(self, rhs, |a, b| a * b)
    }
}

impl Mul<f64> for &Operator {
    type Output = Operator;
    fn mul(self, rhs: f64) -> Operator {
        self.scale(C64::new(rhs, 0.0))
    }
}

/// Photon annihilation operator of `cavity`, truncated at `n_max`.
pub fn annihilator(space: &Arc<HilbertSpace>, cavity: Cavity) -> Operator {
    let mut op = Operator::zeros(space);
    for (j, l) in space.labels().iter().enumerate() {
        let n = l.photons(cavity);
        if n > 0 {
            let i = space.index[&l.with_photons(cavity, n - 1)];
            op.matrix[(i, j)] = C64::new((n as f64).sqrt(), 0.0);
        }
    }
    op
}

pub fn creator(space: &Arc<HilbertSpace>, cavity: Cavity) -> Operator {
    annihilator(space, cavity).adjoint()
}

/// `|to⟩⟨from| ⊗ 1` on the QD factor.
pub fn projector(space: &Arc<HilbertSpace>, from: QdState, to: QdState) -> Result<Operator> {
    let states = space.topology().qd_states();
    for s in [from, to] {
        if !states.contains(&s) {
            return Err(Error::UnknownQdState(s));
        }
    }
    let mut op = Operator::zeros(space);
    for (j, l) in space.labels().iter().enumerate() {
        if l.qd == from {
            let i = space.index[&BasisLabel::new(to, l.n1, l.n2)];
            op.matrix[(i, j)] = ONE;
        }
    }
    Ok(op)
}

/// Photon number operator of one cavity.
pub fn number(space: &Arc<HilbertSpace>, cavity: Cavity) -> Operator {
    diagonal(space, |l| l.photons(cavity) as f64)
}

/// Total excitation operator: QD weight plus photons in both cavities.
pub fn total_excitation_operator(space: &Arc<HilbertSpace>) -> Operator {
    diagonal(space, |l| l.excitation() as f64)
}

pub(crate) fn diagonal(space: &Arc<HilbertSpace>, f: impl Fn(&BasisLabel) -> f64) -> Operator {
    let mut op = Operator::zeros(space);
    for (i, l) in space.labels().iter().enumerate() {
        op.matrix[(i, i)] = C64::new(f(l), 0.0);
    }
    op
}

/// Basis vector for `label`.
pub fn ket(space: &Arc<HilbertSpace>, label: &BasisLabel) -> Result<crate::linalg::CVector> {
    let i = space.require_index(label)?;
    let mut v = crate::linalg::CVector::from_element(space.dim(), ZERO);
    v[i] = ONE;
    Ok(v)
}
