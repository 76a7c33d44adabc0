//! Adaptive Dormand–Prince 5(4) integrator for complex state vectors.

use crate::error::{Error, Result};
use crate::linalg::{C64, ZERO};

/// Error-control settings.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Tolerances {
    pub rtol: f64,
    pub atol: f64,
    /// Upper bound on the step size; `f64::INFINITY` for none.
    pub max_step: f64,
}

impl Default for Tolerances {
    fn default() -> Self {
        Self {
            rtol: 1e-9,
            atol: 1e-12,
            max_step: f64::INFINITY,
        }
    }
}

/// Step statistics of one integration.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
pub struct Stats {
    pub accepted: usize,
    pub rejected: usize,
    pub evaluations: usize,
}

const C2: f64 = 1.0 / 5.0;
const C3: f64 = 3.0 / 10.0;
const C4: f64 = 4.0 / 5.0;
const C5: f64 = 8.0 / 9.0;
const A21: f64 = 1.0 / 5.0;
const A31: f64 = 3.0 / 40.0;
const A32: f64 = 9.0 / 40.0;
const A41: f64 = 44.0 / 45.0;
const A42: f64 = -56.0 / 15.0;
const A43: f64 = 32.0 / 9.0;
const A51: f64 = 19372.0 / 6561.0;
const A52: f64 = -25360.0 / 2187.0;
const A53: f64 = 64448.0 / 6561.0;
const A54: f64 = -212.0 / 729.0;
const A61: f64 = 9017.0 / 3168.0;
const A62: f64 = -355.0 / 33.0;
const A63: f64 = 46732.0 / 5247.0;
const A64: f64 = 49.0 / 176.0;
const A65: f64 = -5103.0 / 18656.0;
const B1: f64 = 35.0 / 384.0;
const B3: f64 = 500.0 / 1113.0;
const B4: f64 = 125.0 / 192.0;
const B5: f64 = -2187.0 / 6784.0;
const B6: f64 = 11.0 / 84.0;
const E1: f64 = 71.0 / 57600.0;
const E3: f64 = -71.0 / 16695.0;
const E4: f64 = 71.0 / 1920.0;
const E5: f64 = -17253.0 / 339200.0;
const E6: f64 = 22.0 / 525.0;
const E7: f64 = -1.0 / 40.0;

/// Integrates `y' = f(t, y)` from `t0` through every time in `outputs`
/// (ascending, all `>= t0`), calling `observe(k, t_k, y)` at each.
pub fn integrate<F, O>(
    mut f: F,
    t0: f64,
    y: &mut [C64],
    outputs: &[f64],
    tol: Tolerances,
    mut observe: O,
) -> Result<Stats>
where
    F: FnMut(f64, &[C64], &mut [C64]),
    O: FnMut(usize, f64, &[C64]) -> Result<()>,
{
    let n = y.len();
    let mut stats = Stats::default();
    let mut k: Vec<Vec<C64>> = (0..7).map(|_| vec![ZERO; n]).collect();
    let mut tmp = vec![ZERO; n];
    let mut ynew = vec![ZERO; n];
    let mut t = t0;
    f(t, y, &mut k[0]);
    stats.evaluations += 1;
    let mut h = initial_step(y, &k[0], tol);
    for (idx, &t_out) in outputs.iter().enumerate() {
        if t_out < t - 1e-12 * t.abs().max(1.0) {
            return Err(Error::IntegrationFailure {
                time: t_out,
                reason: "output times must be ascending".into(),
            });
        }
        while t < t_out {
            let remaining = t_out - t;
            let mut step = h.min(tol.max_step);
            let last = step >= remaining * (1.0 - 1e-12);
            if last {
                step = remaining;
            }
            if step <= 1e-14 * t.abs().max(1.0) {
                return Err(Error::IntegrationFailure {
                    time: t,
                    reason: format!("step size underflow (h = {step:.3e})"),
                });
            }
            let err = dopri_step(&mut f, t, step, y, &mut k, &mut tmp, &mut ynew, tol);
            stats.evaluations += 6;
            if !err.is_finite() {
                return Err(Error::IntegrationFailure {
                    time: t,
                    reason: "non-finite state".into(),
                });
            }
            if err <= 1.0 {
                t = if last { t_out } else { t + step };
                y.copy_from_slice(&ynew);
                // first-same-as-last
                let (first, rest) = k.split_at_mut(1);
                first[0].copy_from_slice(&rest[5]);
                stats.accepted += 1;
                let fac = if err == 0.0 {
                    5.0
                } else {
                    (0.9 * err.powf(-0.2)).clamp(0.2, 5.0)
                };
                if !last || fac < 1.0 {
                    h = step * fac;
                }
            } else {
                stats.rejected += 1;
                h = step * (0.9 * err.powf(-0.2)).clamp(0.1, 1.0);
            }
        }
        observe(idx, t_out, y)?;
    }
    Ok(stats)
}

fn initial_step(y: &[C64], dy: &[C64], tol: Tolerances) -> f64 {
    let n = y.len().max(1) as f64;
    let mut d0 = 0.0;
    let mut d1 = 0.0;
    for (yi, fi) in y.iter().zip(dy) {
        let sc = tol.atol + tol.rtol * yi.norm();
        d0 += (yi.norm() / sc).powi(2);
        d1 += (fi.norm() / sc).powi(2);
    }
    let d0 = (d0 / n).sqrt();
    let d1 = (d1 / n).sqrt();
    let h = if d0 < 1e-5 || d1 < 1e-5 {
        1e-6
    } else {
        0.01 * d0 / d1
    };
    h.min(tol.max_step)
}

#[allow(clippy::too_many_arguments)]
fn dopri_step<F>(
    f: &mut F,
    t: f64,
    h: f64,
    y: &[C64],
    k: &mut [Vec<C64>],
    tmp: &mut [C64],
    ynew: &mut [C64],
    tol: Tolerances,
) -> f64
where
    F: FnMut(f64, &[C64], &mut [C64]),
{
    let n = y.len();
    for i in 0..n {
        tmp[i] = y[i] + k[0][i] * (h * A21);
    }
    f(t + C2 * h, tmp, &mut k[1]);
    for i in 0..n {
        tmp[i] = y[i] + (k[0][i] * A31 + k[1][i] * A32) * h;
    }
    f(t + C3 * h, tmp, &mut k[2]);
    for i in 0..n {
        tmp[i] = y[i] + (k[0][i] * A41 + k[1][i] * A42 + k[2][i] * A43) * h;
    }
    f(t + C4 * h, tmp, &mut k[3]);
    for i in 0..n {
        tmp[i] = y[i] + (k[0][i] * A51 + k[1][i] * A52 + k[2][i] * A53 + k[3][i] * A54) * h;
    }
    f(t + C5 * h, tmp, &mut k[4]);
    for i in 0..n {
        tmp[i] = y[i]
            + (k[0][i] * A61 + k[1][i] * A62 + k[2][i] * A63 + k[3][i] * A64 + k[4][i] * A65) * h;
    }
    f(t + h, tmp, &mut k[5]);
    for i in 0..n {
        ynew[i] = y[i]
            + (k[0][i] * B1 + k[2][i] * B3 + k[3][i] * B4 + k[4][i] * B5 + k[5][i] * B6) * h;
    }
    f(t + h, ynew, &mut k[6]);
    let mut acc = 0.0;
    for i in 0..n {
        let e = (k[0][i] * E1 + k[2][i] * E3 + k[3][i] * E4 + k[4][i] * E5 + k[5][i] * E6
            + k[6][i] * E7)
            * h;
        let sc = tol.atol + tol.rtol * y[i].norm().max(ynew[i].norm());
        acc += (e.norm() / sc).powi(2);
    }
    (acc / n.max(1) as f64).sqrt()
}
