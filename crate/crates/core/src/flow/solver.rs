//! Preconditioned BiCGSTAB and tridiagonal line solves for the
//! frozen-coefficient implicit step.

use crate::error::{Error, Result};

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

fn norm(a: &[f64]) -> f64 {
    dot(a, a).sqrt()
}

/// Solves `A x = b` to relative residual `tol`, starting from `x`.
/// `apply` writes `A v` into its second argument; `precond` writes an
/// approximation of `A⁻¹ v`.
pub(crate) fn bicgstab(
    mut apply: impl FnMut(&[f64], &mut [f64]) -> Result<()>,
    precond: impl Fn(&[f64], &mut [f64]),
    b: &[f64],
    x: &mut [f64],
    tol: f64,
    max_iter: usize,
) -> Result<usize> {
    let len = b.len();
    let bnorm = norm(b);
    if bnorm == 0.0 {
        x.iter_mut().for_each(|v| *v = 0.0);
        return Ok(0);
    }
    let mut r = vec![0.0; len];
    apply(x, &mut r)?;
    for i in 0..len {
        r[i] = b[i] - r[i];
    }
    if norm(&r) <= tol * bnorm {
        return Ok(0);
    }
    let r0 = r.clone();
    let (mut rho, mut alpha, mut omega) = (1.0, 1.0, 1.0);
    let mut v = vec![0.0; len];
    let mut p = vec![0.0; len];
    let mut phat = vec![0.0; len];
    let mut s = vec![0.0; len];
    let mut shat = vec![0.0; len];
    let mut t = vec![0.0; len];
    let mut resid = norm(&r) / bnorm;
    let mut done = 0;
    for it in 1..=max_iter {
        done = it;
        let rho_new = dot(&r0, &r);
        if rho_new == 0.0 || !rho_new.is_finite() {
            break;
        }
        let beta = (rho_new / rho) * (alpha / omega);
        rho = rho_new;
        for i in 0..len {
            p[i] = r[i] + beta * (p[i] - omega * v[i]);
        }
        precond(&p, &mut phat);
        apply(&phat, &mut v)?;
        alpha = rho / dot(&r0, &v);
        for i in 0..len {
            s[i] = r[i] - alpha * v[i];
        }
        if norm(&s) <= tol * bnorm {
            for i in 0..len {
                x[i] += alpha * phat[i];
            }
            return Ok(it);
        }
        precond(&s, &mut shat);
        apply(&shat, &mut t)?;
        let tt = dot(&t, &t);
        omega = if tt > 0.0 { dot(&t, &s) / tt } else { 0.0 };
        for i in 0..len {
            x[i] += alpha * phat[i] + omega * shat[i];
            r[i] = s[i] - omega * t[i];
        }
        resid = norm(&r) / bnorm;
        if resid <= tol {
            return Ok(it);
        }
        if omega == 0.0 || !resid.is_finite() {
            break;
        }
    }
    Err(Error::SolverFailure {
        iterations: done,
        residual: resid,
    })
}

/// Solves a tridiagonal system in place: `sub[i] x[i-1] + diag[i] x[i] +
/// sup[i] x[i+1] = rhs[i]`, with `sub[0]` and `sup[n-1]` ignored.
pub(crate) fn thomas(sub: &[f64], diag: &[f64], sup: &[f64], rhs: &mut [f64], scratch: &mut [f64]) {
    let n = diag.len();
    let mut beta = diag[0];
    rhs[0] /= beta;
    for i in 1..n {
        scratch[i] = sup[i - 1] / beta;
        beta = diag[i] - sub[i] * scratch[i];
        rhs[i] = (rhs[i] - sub[i] * rhs[i - 1]) / beta;
    }
    for i in (0..n - 1).rev() {
        rhs[i] -= scratch[i + 1] * rhs[i + 1];
    }
}

/// Periodic tridiagonal solve (Sherman–Morrison): `sub[0]` couples row 0
/// to x[n-1] and `sup[n-1]` couples row n-1 to x[0].
pub(crate) fn cyclic_thomas(sub: &[f64], diag: &[f64], sup: &[f64], rhs: &mut [f64]) {
    let n = diag.len();
    let gamma = -diag[0];
    let (alpha, beta) = (sup[n - 1], sub[0]);
    let mut bb = diag.to_vec();
    bb[0] -= gamma;
    bb[n - 1] -= alpha * beta / gamma;
    let mut scratch = vec![0.0; n];
    thomas(sub, &bb, sup, rhs, &mut scratch);
    let mut u = vec![0.0; n];
    u[0] = gamma;
    u[n - 1] = alpha;
    thomas(sub, &bb, sup, &mut u, &mut scratch);
    let fact = (rhs[0] + beta * rhs[n - 1] / gamma) / (1.0 + u[0] + beta * u[n - 1] / gamma);
    for i in 0..n {
        rhs[i] -= fact * u[i];
    }
}
