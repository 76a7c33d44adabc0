//! Complex linear-algebra helpers: sparse row storage, triangular Sylvester
//! solves and restarted GMRES.

use nalgebra::{DMatrix, DVector, Schur};
use num_complex::Complex64;

use crate::error::{Error, Result};

pub type C64 = Complex64;
pub type CMatrix = DMatrix<C64>;
pub type CVector = DVector<C64>;

pub const ZERO: C64 = C64::new(0.0, 0.0);
pub const ONE: C64 = C64::new(1.0, 0.0);
pub const I: C64 = C64::new(0.0, 1.0);

/// Compressed-row sparse matrix used for the hot Liouvillian products.
#[derive(Clone, Debug)]
pub struct SparseMatrix {
    nrows: usize,
    ncols: usize,
    row_ptr: Vec<usize>,
    cols: Vec<usize>,
    vals: Vec<C64>,
}

impl SparseMatrix {
    pub fn from_dense(m: &CMatrix) -> Self {
        let (nrows, ncols) = m.shape();
        let mut row_ptr = Vec::with_capacity(nrows + 1);
        let mut cols = Vec::new();
        let mut vals = Vec::new();
        row_ptr.push(0);
        for i in 0..nrows {
            for j in 0..ncols {
                let v = m[(i, j)];
                if v != ZERO {
                    cols.push(j);
                    vals.push(v);
                }
            }
            row_ptr.push(cols.len());
        }
        Self {
            nrows,
            ncols,
            row_ptr,
            cols,
            vals,
        }
    }

    pub fn nrows(&self) -> usize {
        self.nrows
    }

    pub fn nnz(&self) -> usize {
        self.vals.len()
    }

    /// Iterates over `(row, col, value)` triples.
    pub fn triplets(&self) -> impl Iterator<Item = (usize, usize, C64)> + '_ {
        (0..self.nrows).flat_map(move |i| {
            (self.row_ptr[i]..self.row_ptr[i + 1]).map(move |k| (i, self.cols[k], self.vals[k]))
        })
    }

    pub fn adjoint(&self) -> Self {
        let mut dense = CMatrix::zeros(self.ncols, self.nrows);
        for (i, j, v) in self.triplets() {
            dense[(j, i)] = v.conj();
        }
        Self::from_dense(&dense)
    }

    /// `out += alpha * self * x` where `x` is column-major with `self.ncols`
    /// rows.
    pub fn left_mul_acc(&self, alpha: C64, x: &[C64], out: &mut [C64]) {
        let n = self.ncols;
        let on = self.nrows;
        let ncol = x.len() / n;
        for c in 0..ncol {
            let xc = &x[c * n..(c + 1) * n];
            let oc = &mut out[c * on..(c + 1) * on];
            for (i, o) in oc.iter_mut().enumerate() {
                let mut acc = ZERO;
                for k in self.row_ptr[i]..self.row_ptr[i + 1] {
                    acc += self.vals[k] * xc[self.cols[k]];
                }
                *o += alpha * acc;
            }
        }
    }

    /// `out += alpha * x * self` where `x` is column-major with `self.nrows`
    /// columns.
    pub fn right_mul_acc(&self, alpha: C64, x: &[C64], out: &mut [C64]) {
        let n = x.len() / self.nrows;
        for k in 0..self.nrows {
            let xk = &x[k * n..(k + 1) * n];
            for p in self.row_ptr[k]..self.row_ptr[k + 1] {
                let j = self.cols[p];
                let v = alpha * self.vals[p];
                let oj = &mut out[j * n..(j + 1) * n];
                for (o, xv) in oj.iter_mut().zip(xk) {
                    *o += v * xv;
                }
            }
        }
    }
}

/// Maximum modulus over all entries.
pub fn max_abs(m: &CMatrix) -> f64 {
    m.iter().fold(0.0, |acc, z| acc.max(z.norm()))
}

/// Largest deviation from Hermiticity.
pub fn hermiticity_error(m: &CMatrix) -> f64 {
    let n = m.nrows();
    let mut worst: f64 = 0.0;
    for i in 0..n {
        for j in i..n {
            worst = worst.max((m[(i, j)] - m[(j, i)].conj()).norm());
        }
    }
    worst
}

/// Eigenvalues of a Hermitian matrix, ascending.
pub fn hermitian_eigenvalues(m: &CMatrix) -> Vec<f64> {
    let h = (m + m.adjoint()) * C64::new(0.5, 0.0);
    let mut ev: Vec<f64> = nalgebra::SymmetricEigen::new(h).eigenvalues.iter().copied().collect();
    ev.sort_by(f64::total_cmp);
    ev
}

/// Complex Schur factorization `A = U T U^H`.
#[derive(Clone, Debug)]
pub struct SchurForm {
    pub u: CMatrix,
    pub t: CMatrix,
}

impl SchurForm {
    pub fn new(a: &CMatrix) -> Result<Self> {
        if a.nrows() == 0 {
            return Ok(Self {
                u: CMatrix::zeros(0, 0),
                t: CMatrix::zeros(0, 0),
            });
        }
        let schur = Schur::try_new(a.clone(), f64::EPSILON, 10_000)
            .ok_or_else(|| Error::LinearSolver("Schur decomposition did not converge".into()))?;
        let (u, mut t) = schur.unpack();
        for j in 0..t.ncols() {
            for i in (j + 1)..t.nrows() {
                t[(i, j)] = ZERO;
            }
        }
        let recon = &u * &t * u.adjoint();
        let err = max_abs(&(recon - a));
        let scale = max_abs(a).max(1.0);
        if err > 1e-10 * scale {
            return Err(Error::LinearSolver(format!(
                "Schur reconstruction error {err:.3e}"
            )));
        }
        Ok(Self { u, t })
    }
}

/// Solves `A X - X B^H = F` given Schur forms of `A` and `B`.
///
/// Returns `None` when the spectra of `A` and `B^H` overlap closer than
/// `tol`.
pub fn sylvester(a: &SchurForm, b: &SchurForm, f: &CMatrix, tol: f64) -> Option<CMatrix> {
    let m = a.t.nrows();
    let n = b.t.nrows();
    if m == 0 || n == 0 {
        return Some(CMatrix::zeros(m, n));
    }
    // T Y - Y S^H = U^H F W
    let rhs = a.u.adjoint() * f * &b.u;
    let t = &a.t;
    let s = &b.t;
    let mut y = CMatrix::zeros(m, n);
    let mut col = CVector::zeros(m);
    for j in (0..n).rev() {
        for i in 0..m {
            col[i] = rhs[(i, j)];
        }
        for k in (j + 1)..n {
            let c = s[(j, k)].conj();
            if c != ZERO {
                for i in 0..m {
                    col[i] += y[(i, k)] * c;
                }
            }
        }
        let shift = s[(j, j)].conj();
        for i in (0..m).rev() {
            let mut acc = col[i];
            for k in (i + 1)..m {
                acc -= t[(i, k)] * y[(k, j)];
            }
            let d = t[(i, i)] - shift;
            if d.norm() < tol {
                return None;
            }
            y[(i, j)] = acc / d;
        }
    }
    Some(&a.u * y * b.u.adjoint())
}

/// Outcome of a GMRES solve.
#[derive(Clone, Debug)]
pub struct GmresReport {
    pub iterations: usize,
    pub residual: f64,
}

fn dot(a: &[C64], b: &[C64]) -> C64 {
    a.iter().zip(b).map(|(x, y)| x.conj() * y).sum()
}

fn norm(a: &[C64]) -> f64 {
    a.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt()
}

/// Restarted GMRES for `A x = b` starting from `x = 0`.
///
/// `apply` writes `A v` into its second argument.
pub fn gmres<F>(
    mut apply: F,
    b: &[C64],
    restart: usize,
    max_iter: usize,
    tol: f64,
) -> Result<(Vec<C64>, GmresReport)>
where
    F: FnMut(&[C64], &mut [C64]) -> Result<()>,
{
    let n = b.len();
    let mut x = vec![ZERO; n];
    let mut r = b.to_vec();
    let mut beta = norm(&r);
    let mut total = 0;
    let mut w = vec![ZERO; n];
    while total < max_iter {
        if beta <= tol {
            return Ok((
                x,
                GmresReport {
                    iterations: total,
                    residual: beta,
                },
            ));
        }
        let mut basis: Vec<Vec<C64>> = vec![r.iter().map(|z| z / beta).collect()];
        let mut h = vec![vec![ZERO; restart]; restart + 1];
        let mut cs = vec![ZERO; restart];
        let mut sn = vec![ZERO; restart];
        let mut g = vec![ZERO; restart + 1];
        g[0] = C64::new(beta, 0.0);
        let mut k_used = 0;
        for k in 0..restart {
            apply(&basis[k], &mut w)?;
            total += 1;
            for (i, v) in basis.iter().enumerate() {
                let hik = dot(v, &w);
                h[i][k] = hik;
                for (wj, vj) in w.iter_mut().zip(v) {
                    *wj -= hik * vj;
                }
            }
            // one reorthogonalization pass keeps the basis clean
            for (i, v) in basis.iter().enumerate() {
                let c = dot(v, &w);
                h[i][k] += c;
                for (wj, vj) in w.iter_mut().zip(v) {
                    *wj -= c * vj;
                }
            }
            let hn = norm(&w);
            h[k + 1][k] = C64::new(hn, 0.0);
            for i in 0..k {
                let t = cs[i] * h[i][k] + sn[i] * h[i + 1][k];
                h[i + 1][k] = -sn[i].conj() * h[i][k] + cs[i].conj() * h[i + 1][k];
                h[i][k] = t;
            }
            let (c, s) = givens(h[k][k], h[k + 1][k]);
            cs[k] = c;
            sn[k] = s;
            h[k][k] = c * h[k][k] + s * h[k + 1][k];
            h[k + 1][k] = ZERO;
            g[k + 1] = -s.conj() * g[k];
            g[k] *= c;
            k_used = k + 1;
            if g[k + 1].norm() <= tol || hn == 0.0 || total >= max_iter {
                break;
            }
            basis.push(w.iter().map(|z| z / hn).collect());
        }
        let mut yv = vec![ZERO; k_used];
        for i in (0..k_used).rev() {
            let mut acc = g[i];
            for j in (i + 1)..k_used {
                acc -= h[i][j] * yv[j];
            }
            if h[i][i] == ZERO {
                return Err(Error::LinearSolver("singular Hessenberg matrix".into()));
            }
            yv[i] = acc / h[i][i];
        }
        for (j, yj) in yv.iter().enumerate() {
            for (xi, vi) in x.iter_mut().zip(&basis[j]) {
                *xi += yj * vi;
            }
        }
        apply(&x, &mut w)?;
        for i in 0..n {
            r[i] = b[i] - w[i];
        }
        beta = norm(&r);
    }
    if beta <= tol {
        Ok((
            x,
            GmresReport {
                iterations: total,
                residual: beta,
            },
        ))
    } else {
        Err(Error::LinearSolver(format!(
            "GMRES stopped after {total} iterations at residual {beta:.3e}"
        )))
    }
}

fn givens(a: C64, b: C64) -> (C64, C64) {
    let an = a.norm();
    let bn = b.norm();
    if bn == 0.0 {
        return (ONE, ZERO);
    }
    if an == 0.0 {
        return (ZERO, (b / bn).conj());
    }
    let r = (an * an + bn * bn).sqrt();
    let phase = a / an;
    let c = C64::new(an / r, 0.0);
    let s = phase * b.conj() / r;
    (c, s)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn test_matrix(n: usize, seed: u64) -> CMatrix {
        let mut state = seed;
        CMatrix::from_fn(n, n, |_, _| {
            state = state.wrapping_mul(6364136223846793005).wrapping_add(1442695040888963407);
            let a = ((state >> 33) as f64) / (1u64 << 31) as f64 - 0.5;
            state = state.wrapping_mul(6364136223846793005).wrapping_add(1442695040888963407);
            let b = ((state >> 33) as f64) / (1u64 << 31) as f64 - 0.5;
            C64::new(a, b)
        })
    }

    #[test]
    fn sparse_products_match_dense() {
        let a = test_matrix(6, 1);
        let x = test_matrix(6, 2);
        let s = SparseMatrix::from_dense(&a);
        let mut out = CMatrix::zeros(6, 6);
        s.left_mul_acc(ONE, x.as_slice(), out.as_mut_slice());
        assert!(max_abs(&(out - &a * &x)) < 1e-13);
        let mut out = CMatrix::zeros(6, 6);
        s.right_mul_acc(I, x.as_slice(), out.as_mut_slice());
        assert!(max_abs(&(out - &x * &a * I)) < 1e-13);
        let adj = s.adjoint();
        let mut out = CMatrix::zeros(6, 6);
        adj.left_mul_acc(ONE, x.as_slice(), out.as_mut_slice());
        assert!(max_abs(&(out - a.adjoint() * &x)) < 1e-13);
    }

    #[test]
    fn sylvester_solution_satisfies_equation() {
        let a = test_matrix(5, 3) + CMatrix::identity(5, 5) * C64::new(0.0, -2.0);
        let b = test_matrix(3, 4) + CMatrix::identity(3, 3) * C64::new(0.0, -1.0);
        let f = CMatrix::from_fn(5, 3, |i, j| C64::new(i as f64, j as f64 - 1.0));
        let sa = SchurForm::new(&a).unwrap();
        let sb = SchurForm::new(&b).unwrap();
        let x = sylvester(&sa, &sb, &f, 1e-14).unwrap();
        let res = &a * &x - &x * b.adjoint() - f;
        assert!(max_abs(&res) < 1e-11);
    }

    #[test]
    fn gmres_solves_small_system() {
        let a = test_matrix(8, 5) + CMatrix::identity(8, 8) * C64::new(3.0, 0.0);
        let b: Vec<C64> = (0..8).map(|i| C64::new(1.0, i as f64)).collect();
        let (x, rep) = gmres(
            |v, out| {
                let r = &a * CVector::from_column_slice(v);
                out.copy_from_slice(r.as_slice());
                Ok(())
            },
            &b,
            4,
            200,
            1e-12,
        )
        .unwrap();
        assert!(rep.residual <= 1e-12);
        let r = &a * CVector::from_vec(x) - CVector::from_vec(b);
        assert!(r.norm() < 1e-11);
    }
}
