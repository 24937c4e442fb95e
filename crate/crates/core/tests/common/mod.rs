//! Shared test oracles, independent of the library's solve paths.

#![allow(dead_code)]

use nalgebra::{DMatrix, DVector};

use fredholm_core::nonlinear::NonlinearSpec;
use fredholm_core::spectrum::ResonanceGroup;
use fredholm_core::FormTriple;

/// Signed pivot count of an unpivoted LDL^T sweep: `Some(negatives)` or
/// `None` when a pivot degenerates and the probe point must be nudged.
fn negative_pivots(x: &DMatrix<f64>) -> Option<usize> {
    let n = x.nrows();
    let mut a = x.clone();
    let scale = x.amax().max(1e-300);
    let mut neg = 0usize;
    for j in 0..n {
        let d = a[(j, j)];
        if !d.is_finite() || d.abs() <= 1e-14 * scale {
            return None;
        }
        if d < 0.0 {
            neg += 1;
        }
        // Trailing symmetric update on the lower triangle.
        for i in (j + 1)..n {
            let w = a[(i, j)] / d;
            for k in (j + 1)..=i {
                a[(i, k)] -= w * a[(k, j)];
            }
        }
    }
    Some(neg)
}

/// Number of generalized eigenvalues of (S, M) strictly below `t`, by
/// Sylvester inertia of S - t M. Degenerate probes are perturbed.
fn count_below(s: &DMatrix<f64>, m: &DMatrix<f64>, t: f64) -> usize {
    let mut shift = 0.0f64;
    let step = 1e-9 * (1.0 + t.abs());
    for _ in 0..64 {
        let probe = s - m * (t + shift);
        if let Some(neg) = negative_pivots(&probe) {
            return neg;
        }
        shift = if shift <= 0.0 {
            -shift + step
        } else {
            -shift
        };
    }
    panic!("inertia probe failed to stabilize at t={t}");
}

/// Lower bound on the smallest eigenvalue of an SPD matrix by inertia
/// bisection on M - s I.
fn lambda_min_lower_bound(m: &DMatrix<f64>) -> f64 {
    let n = m.nrows();
    let id = DMatrix::identity(n, n);
    let mut lo = 0.0f64;
    let mut hi = m.trace() / n as f64 * (1.0 + 1e-8) + 1e-12;
    for _ in 0..80 {
        let mid = 0.5 * (lo + hi);
        let probe = m - &id * mid;
        let neg = negative_pivots(&probe).unwrap_or(1);
        if neg >= 1 {
            hi = mid;
        } else {
            lo = mid;
        }
    }
    lo.max(1e-12)
}

/// All generalized eigenvalues of (S, M), M SPD, by inertia-count bisection.
/// Entirely independent of any eigendecomposition routine.
pub fn eigenvalues_by_bisection(s: &DMatrix<f64>, m: &DMatrix<f64>) -> Vec<f64> {
    let n = s.nrows();
    let bound = s.norm() / lambda_min_lower_bound(m) + 1.0;
    (0..n)
        .map(|k| {
            let mut lo = -bound;
            let mut hi = bound;
            for _ in 0..120 {
                let mid = 0.5 * (lo + hi);
                if count_below(s, m, mid) > k {
                    hi = mid;
                } else {
                    lo = mid;
                }
            }
            0.5 * (lo + hi)
        })
        .collect()
}

/// Forward-difference Jacobian of a vector map, used by the brute-force
/// Newton oracle (central differences).
fn fd_jacobian(
    f: &dyn Fn(&DVector<f64>) -> DVector<f64>,
    u: &DVector<f64>,
    m_rows: usize,
) -> DMatrix<f64> {
    let n = u.len();
    let mut jac = DMatrix::zeros(m_rows, n);
    for j in 0..n {
        let h = 1e-6 * (1.0 + u[j].abs());
        let mut up = u.clone();
        up[j] += h;
        let mut dn = u.clone();
        dn[j] -= h;
        let col = (f(&up) - f(&dn)) / (2.0 * h);
        jac.set_column(j, &col);
    }
    jac
}

/// Brute-force Newton on the raw residual R(u) = (A - lambda B - mu M) u -
/// eps F(u), with a numerically assembled Jacobian and backtracking. At
/// resonance the side conditions F(u, e_k) = 0 are appended as extra rows and
/// the steps solve the augmented least-squares system.
pub fn full_system_newton(
    triple: &FormTriple,
    lambda: f64,
    mu: f64,
    spec: &NonlinearSpec,
    eps: f64,
    u_init: &DVector<f64>,
    group: Option<&ResonanceGroup>,
) -> Option<DVector<f64>> {
    let pencil = triple.pencil(lambda, mu);
    let rows = triple.dim() + group.map_or(0, |g| g.len());
    let f = |u: &DVector<f64>| -> DVector<f64> {
        let base = &pencil * u - spec.eval_f(u) * eps;
        match group {
            None => base,
            Some(g) => {
                let side = g.basis.transpose() * spec.eval_f(u);
                let mut out = DVector::zeros(rows);
                out.rows_mut(0, triple.dim()).copy_from(&base);
                out.rows_mut(triple.dim(), g.len()).copy_from(&side);
                out
            }
        }
    };
    let mut u = u_init.clone();
    for _ in 0..200 {
        let r = f(&u);
        if r.norm() <= 1e-11 * (1.0 + u.norm()) {
            return Some(u);
        }
        let jac = fd_jacobian(&f, &u, rows);
        let step = if rows == u.len() {
            jac.lu().solve(&r)?
        } else {
            jac.svd(true, true).solve(&r, 1e-13).ok()?
        };
        // Backtracking on the residual norm.
        let base_norm = r.norm();
        let mut alpha = 1.0f64;
        let mut accepted = false;
        for _ in 0..30 {
            let trial = &u - &step * alpha;
            if f(&trial).norm() < base_norm {
                u = trial;
                accepted = true;
                break;
            }
            alpha *= 0.5;
        }
        if !accepted {
            return None;
        }
    }
    None
}
