//! Exact inverse of the pump-free Liouvillian by excitation-sector
//! back-substitution.
//!
//! Without drive, `H − iκ/2 n_ph` conserves the total excitation and every
//! jump operator lowers it by one, so the block `X_mn` of `L0 X = R` couples
//! only to `X_{m+1,n+1}`.

use crate::error::{Error, Result};
use crate::hilbert::{annihilator, Cavity, Operator};
use crate::linalg::{sylvester, CMatrix, SchurForm, C64, I, ZERO};

pub(crate) struct SectorSolver {
    dim: usize,
    sectors: Vec<Vec<usize>>,
    schur: Vec<SchurForm>,
    /// `√κ a_j` restricted to rows in sector `n` and columns in `n + 1`.
    lowering: Vec<[CMatrix; 2]>,

}

impl SectorSolver {
    /// `h` is the pump-free rotating-frame Hamiltonian.
    pub(crate) fn new(h: &Operator, kappa: f64) -> Result<Self> {
        h.check_excitation_conserving(1e-12)?;
        let space = h.space();
        let dim = space.dim();
        let top = space.max_excitation();
        let sectors: Vec<Vec<usize>> = (0..=top).map(|n| space.sector(n)).collect();
        let a = [annihilator(space, Cavity::One), annihilator(space, Cavity::Two)];
        let mut schur = Vec::with_capacity(sectors.len());
        for idx in &sectors {
            let block = CMatrix::from_fn(idx.len(), idx.len(), |r, c| {
                let mut v = h.matrix()[(idx[r], idx[c])];
                if r == c {
                    let l = space.label(idx[r]);
                    v -= C64::new(0.0, 0.5 * kappa * (l.n1 + l.n2) as f64);
                }
                v
            });
            schur.push(SchurForm::new(&block)?);
        }
        let sk = kappa.sqrt();
        let lowering = (0..sectors.len())
            .map(|n| {
                let rows = &sectors[n];
                let cols = sectors.get(n + 1).map(Vec::as_slice).unwrap_or(&[]);
                let pick = |op: &Operator| {
                    CMatrix::from_fn(rows.len(), cols.len(), |r, c| {
                        op.matrix()[(rows[r], cols[c])] * sk
                    })
                };
                [pick(&a[0]), pick(&a[1])]
            })
            .collect();
        Ok(Self {
            dim,
            sectors,
            schur,
            lowering,

        })
    }

    /// Solves `L0 X = R` on every entry except the vacuum–vacuum one, which
    /// `L0` leaves undetermined; that entry of the result is zero and the
    /// corresponding entry of `R` is ignored.
    pub(crate) fn solve(&self, r: &CMatrix) -> Result<CMatrix> {
        let k = self.sectors.len();
        let mut blocks: Vec<Vec<CMatrix>> = vec![Vec::new(); k];
        for m in (0..k).rev() {
            let mut row = Vec::with_capacity(k);
            for n in 0..k {
                let rm = &self.sectors[m];
                let rn = &self.sectors[n];
                let mut c = CMatrix::from_fn(rm.len(), rn.len(), |a, b| r[(rm[a], rn[b])]);
                if m + 1 < k && n + 1 < k {
                    let x_up: &CMatrix = &blocks[m + 1][n + 1];
                    for j in 0..2 {
                        let lm = &self.lowering[m][j];
                        let ln = &self.lowering[n][j];
                        c -= lm * x_up * ln.adjoint();
                    }
                }
                // -i (A X - X A†) = c  <=>  A X - X A† = i c
                c *= I;
                let x = if m == 0 && n == 0 {
                    CMatrix::from_element(1, 1, ZERO)
                } else {
                    sylvester(&self.schur[m], &self.schur[n], &c, 1e-13).ok_or_else(|| {
                        Error::LinearSolver(format!(
                            "pump-free Liouvillian is singular on sector block ({m}, {n})"
                        ))
                    })?
                };
                row.push(x);
            }
            blocks[m] = row;
        }
        let mut out = CMatrix::zeros(self.dim, self.dim);
        for (m, rm) in self.sectors.iter().enumerate() {
            for (n, rn) in self.sectors.iter().enumerate() {
                let b = &blocks[m][n];
                for (a, &i) in rm.iter().enumerate() {
                    for (c, &j) in rn.iter().enumerate() {
                        out[(i, j)] = b[(a, c)];
                    }
                }
            }
        }
        let v = self.sectors[0][0];
        out[(v, v)] = ZERO;
        Ok(out)
    }
}
