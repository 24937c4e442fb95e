//! Nonlinear Fredholm equation a(u,v) = lambda b(u,v) + mu m(u,v) + eps F(u,v):
//! Picard contraction and Newton iterations on the spectral fixed-point maps,
//! in the nonresonant and resonant regimes, plus the bifurcation-point search
//! and eigenspace injectivity test used at resonance.

use nalgebra::{DMatrix, DVector};

use crate::error::{Error, Result};
use crate::forms::FormTriple;
use crate::spectrum::{resonance_group, ResonanceGroup, SpectralData, DEFAULT_RESONANCE_RTOL};
use crate::steklov::NemytskiiFn;

/// Newton iteration cap shared by the nonresonant and resonant solvers.
pub const NEWTON_MAX_ITER: usize = 50;

/// Relative singular-value floor for the eigenspace injectivity test.
pub const INJECTIVITY_RTOL: f64 = 1e-10;

/// Multi-start grid (per eigenspace coordinate) for the bifurcation system.
pub const BIFURCATION_STARTS: [f64; 6] = [-2.0, -1.0, -0.5, 0.5, 1.0, 2.0];

/// One rank-one power term c |l(u)|^(p-2) l(u) l(v) with p > 2.
#[derive(Debug, Clone)]
pub struct PowerTerm {
    pub c: f64,
    pub ell: DVector<f64>,
    pub p: f64,
}

impl PowerTerm {
    pub fn new(c: f64, ell: DVector<f64>, p: f64) -> Result<Self> {
        if p.is_nan() || p <= 2.0 {
            return Err(Error::InvalidExponent(p));
        }
        Ok(Self { c, ell, p })
    }

    fn scalar(&self, s: f64) -> f64 {
        self.c * s.abs().powf(self.p - 2.0) * s
    }

    fn scalar_derivative(&self, s: f64) -> f64 {
        self.c * (self.p - 1.0) * s.abs().powf(self.p - 2.0)
    }
}

/// Pointwise superposition term: contributes weight * F.(u) to the dual
/// representation of F(u, .), where the weight matrix carries the quadrature
/// of the test functions.
#[derive(Debug, Clone)]
pub struct NemytskiiTerm {
    pub func: NemytskiiFn,
    pub weight: DMatrix<f64>,
}

/// Composable description of the nonlinear form
/// F(u, v) = l0(v) + sum_i c_i |l_i(u)|^(p_i - 2) l_i(u) l_i(v) + nemytskii.
#[derive(Debug, Clone, Default)]
pub struct NonlinearSpec {
    pub affine: Option<DVector<f64>>,
    pub power_terms: Vec<PowerTerm>,
    pub nemytskii: Option<NemytskiiTerm>,
}

impl NonlinearSpec {
    pub fn affine_only(ell0: DVector<f64>) -> Self {
        Self {
            affine: Some(ell0),
            ..Self::default()
        }
    }

    pub fn dim(&self) -> Option<usize> {
        self.affine
            .as_ref()
            .map(|v| v.len())
            .or_else(|| self.power_terms.first().map(|t| t.ell.len()))
            .or_else(|| self.nemytskii.as_ref().map(|t| t.weight.nrows()))
    }

    /// Dual representation of F(u, .): the vector v -> F(u, v).
    pub fn eval_f(&self, u: &DVector<f64>) -> DVector<f64> {
        let n = u.len();
        let mut out = DVector::zeros(n);
        if let Some(ell0) = &self.affine {
            out += ell0;
        }
        for term in &self.power_terms {
            out += &term.ell * term.scalar(term.ell.dot(u));
        }
        if let Some(nem) = &self.nemytskii {
            let applied = DVector::from_iterator(n, u.iter().map(|&s| nem.func.f(s)));
            out += &nem.weight * applied;
        }
        out
    }

    /// Jacobian of eval_f: the matrix taking v to the gradient of
    /// u -> F(u, v).
    pub fn eval_df(&self, u: &DVector<f64>) -> DMatrix<f64> {
        let n = u.len();
        let mut out = DMatrix::zeros(n, n);
        for term in &self.power_terms {
            let g = term.scalar_derivative(term.ell.dot(u));
            out += &term.ell * term.ell.transpose() * g;
        }
        if let Some(nem) = &self.nemytskii {
            let dflags = DVector::from_iterator(n, u.iter().map(|&s| nem.func.df(s)));
            let mut scaled = nem.weight.clone();
            for j in 0..n {
                for i in 0..n {
                    scaled[(i, j)] *= dflags[j];
                }
            }
            out += scaled;
        }
        out
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SolveMethod {
    Picard,
    Newton,
}

impl SolveMethod {
    pub fn as_str(&self) -> &'static str {
        match self {
            SolveMethod::Picard => "picard",
            SolveMethod::Newton => "newton",
        }
    }
}

/// One entry of a continuation trace in eps.
#[derive(Debug, Clone)]
pub struct BranchPoint {
    pub eps: f64,
    pub distance_to_u0: f64,
    pub residual: f64,
    pub iterations: usize,
}

/// Resonant branch information: the bifurcation point and the eps trace that
/// led to the reported solution.
#[derive(Debug, Clone)]
pub struct BranchInfo {
    pub u0: DVector<f64>,
    pub trace: Vec<BranchPoint>,
}

#[derive(Debug, Clone)]
pub struct NonlinearSolution {
    pub u: DVector<f64>,
    pub eps: f64,
    pub iterations: usize,
    pub residual: f64,
    pub method: SolveMethod,
    pub branch_info: Option<BranchInfo>,
}

/// Relative residual ||(A - lambda B - mu M) u - eps F(u)|| normalized by
/// 1 + |eps| ||F(u)|| + ||u||.
pub fn residual(
    triple: &FormTriple,
    lambda: f64,
    mu: f64,
    spec: &NonlinearSpec,
    eps: f64,
    u: &DVector<f64>,
) -> f64 {
    let fu = spec.eval_f(u);
    let r = triple.pencil(lambda, mu) * u - &fu * eps;
    r.norm() / (1.0 + eps.abs() * fu.norm() + u.norm())
}

fn check_nonresonant(spectral: &SpectralData, mu: f64) -> Result<()> {
    let group = resonance_group(spectral, mu, DEFAULT_RESONANCE_RTOL)?;
    if !group.is_empty() {
        return Err(Error::ResonanceDetected {
            mu,
            indices: group.indices,
        });
    }
    Ok(())
}

/// Applies the spectral map u -> sum_k (f . e_k)/(mu_k - mu) e_k.
fn spectral_apply(spectral: &SpectralData, mu: f64, f: &DVector<f64>) -> DVector<f64> {
    let modal = spectral.modal_values(f);
    let n = spectral.dim();
    let mut out = DVector::zeros(n);
    for k in 0..n {
        out += spectral.e_canon().column(k) * (modal[k] / (spectral.mu()[k] - mu));
    }
    out
}

/// Picard iteration on the contraction map
/// u -> eps sum_k F(u, e_k)/(mu_k - mu) e_k.
/// Convergence is declared when the successive m-norm difference drops to
/// `tol`; sustained difference ratios above 0.99 report non-contraction.
pub fn picard_solve(
    spectral: &SpectralData,
    mu: f64,
    spec: &NonlinearSpec,
    eps: f64,
    u_init: &DVector<f64>,
    tol: f64,
    max_iter: usize,
) -> Result<NonlinearSolution> {
    check_nonresonant(spectral, mu)?;
    let mut u = u_init.clone();
    let mut prev_diff: Option<f64> = None;
    let mut bad_streak = 0usize;
    for it in 1..=max_iter {
        let next = spectral_apply(spectral, mu, &spec.eval_f(&u)) * eps;
        let diff = spectral.triple().m_norm(&(&next - &u));
        if let Some(pd) = prev_diff {
            let ratio = if pd > 0.0 { diff / pd } else { 0.0 };
            if ratio > 0.99 {
                bad_streak += 1;
                if bad_streak >= 5 {
                    return Err(Error::PicardNotContracting { ratio });
                }
            } else {
                bad_streak = 0;
            }
        }
        prev_diff = Some(diff);
        u = next;
        if diff <= tol {
            let res = residual(spectral.triple(), spectral.lambda(), mu, spec, eps, &u);
            return Ok(NonlinearSolution {
                u,
                eps,
                iterations: it,
                residual: res,
                method: SolveMethod::Picard,
                branch_info: None,
            });
        }
    }
    Err(Error::MaxIterExceeded(max_iter))
}

/// Newton iteration on G(eps, u) = u - eps sum_k F(u, e_k)/(mu_k - mu) e_k.
pub fn newton_solve_nonresonant(
    spectral: &SpectralData,
    mu: f64,
    spec: &NonlinearSpec,
    eps: f64,
    u_init: &DVector<f64>,
) -> Result<NonlinearSolution> {
    check_nonresonant(spectral, mu)?;
    let n = spectral.dim();
    // W = E diag(1/(mu_k - mu)) E^T is the spectral preconditioner.
    let mut w = DMatrix::zeros(n, n);
    for k in 0..n {
        let e = spectral.e_canon().column(k);
        w += e * e.transpose() / (spectral.mu()[k] - mu);
    }
    let g = |u: &DVector<f64>| -> DVector<f64> { u - &w * spec.eval_f(u) * eps };
    let jac = |u: &DVector<f64>| -> DMatrix<f64> {
        DMatrix::identity(n, n) - &w * spec.eval_df(u) * eps
    };
    let (u, iterations) = newton_iterate(u_init, g, jac)?;
    let res = residual(spectral.triple(), spectral.lambda(), mu, spec, eps, &u);
    Ok(NonlinearSolution {
        u,
        eps,
        iterations,
        residual: res,
        method: SolveMethod::Newton,
        branch_info: None,
    })
}

fn newton_iterate(
    u_init: &DVector<f64>,
    g: impl Fn(&DVector<f64>) -> DVector<f64>,
    jac: impl Fn(&DVector<f64>) -> DMatrix<f64>,
) -> Result<(DVector<f64>, usize)> {
    let mut u = u_init.clone();
    for it in 0..=NEWTON_MAX_ITER {
        let gu = g(&u);
        if !gu.iter().all(|v| v.is_finite()) {
            return Err(Error::NewtonDiverged {
                iterations: it,
                reason: "non-finite iterate".into(),
            });
        }
        if gu.norm() <= 1e-12 * (1.0 + u.norm()) {
            return Ok((u, it));
        }
        if it == NEWTON_MAX_ITER {
            break;
        }
        let step = jac(&u).lu().solve(&gu).ok_or(Error::NewtonDiverged {
            iterations: it,
            reason: "singular jacobian".into(),
        })?;
        u -= step;
    }
    Err(Error::NewtonDiverged {
        iterations: NEWTON_MAX_ITER,
        reason: "no convergence".into(),
    })
}

/// Matrix of the operator Lambda_w restricted to the resonant eigenspace:
/// L(j, i) = D_u F(w, e_j) applied in direction e_i, over j, i in J.
pub fn lambda_operator(
    spec: &NonlinearSpec,
    w: &DVector<f64>,
    group: &ResonanceGroup,
) -> DMatrix<f64> {
    let df = spec.eval_df(w);
    let m = group.len();
    let mut l = DMatrix::zeros(m, m);
    for (r, _) in group.indices.iter().enumerate() {
        let ej = group.basis.column(r);
        let row = df.transpose() * ej;
        for (c, _) in group.indices.iter().enumerate() {
            l[(r, c)] = row.dot(&group.basis.column(c).into_owned());
        }
    }
    l
}

/// Injectivity of a square matrix to working precision: the smallest singular
/// value must stay above `INJECTIVITY_RTOL` times the largest. Returns the
/// flag and the condition estimate sigma_max / sigma_min.
pub fn injectivity_check(l: &DMatrix<f64>) -> (bool, f64) {
    let sv = l.clone().svd(false, false).singular_values;
    let smax = sv.max();
    let smin = sv.min();
    if smax <= 0.0 {
        return (false, f64::INFINITY);
    }
    let cond = if smin > 0.0 {
        smax / smin
    } else {
        f64::INFINITY
    };
    (smin >= INJECTIVITY_RTOL * smax, cond)
}

/// Solves Phi(t) = 0 with Phi_k(t) = F(sum_j t_j e_j, e_k) over the resonant
/// modes, by Newton from every start in the fixed multi-start grid. Among the
/// converged roots, the one with smallest ||Phi|| wins, ties resolved by
/// start order. Returns u0 = sum_j t_j e_j.
pub fn find_bifurcation_point(group: &ResonanceGroup, spec: &NonlinearSpec) -> Result<DVector<f64>> {
    let m = group.len();
    if m == 0 {
        return Err(Error::PreconditionViolated(
            "bifurcation search needs a nonempty resonance group".into(),
        ));
    }
    let phi = |t: &DVector<f64>| -> DVector<f64> {
        let u = &group.basis * t;
        let fu = spec.eval_f(&u);
        group.basis.transpose() * fu
    };
    let n_starts = BIFURCATION_STARTS.len().pow(m as u32);
    let mut best: Option<(f64, DVector<f64>)> = None;
    let offer = |norm: f64, t: DVector<f64>, best: &mut Option<(f64, DVector<f64>)>| {
        if norm <= 1e-10 && best.as_ref().is_none_or(|(b, _)| norm < *b) {
            *best = Some((norm, t));
        }
    };
    // The origin is an exact root whenever F(0, .) = 0 (pure power specs).
    let zero = DVector::zeros(m);
    offer(phi(&zero).norm(), zero, &mut best);
    for flat in 0..n_starts {
        // Odometer decoding, first coordinate most significant.
        let mut idx = flat;
        let mut t = DVector::zeros(m);
        for c in (0..m).rev() {
            t[c] = BIFURCATION_STARTS[idx % BIFURCATION_STARTS.len()];
            idx /= BIFURCATION_STARTS.len();
        }
        // Run Newton to stall and keep the best iterate; degenerate roots
        // converge only linearly, so no early tolerance exit.
        let mut local: Option<(f64, DVector<f64>)> = None;
        for _ in 0..NEWTON_MAX_ITER {
            let p = phi(&t);
            if !p.iter().all(|v| v.is_finite()) {
                break;
            }
            let norm = p.norm();
            if local.as_ref().is_none_or(|(b, _)| norm < *b) {
                local = Some((norm, t.clone()));
            }
            if norm == 0.0 {
                break;
            }
            let jac = lambda_operator(spec, &(&group.basis * &t), group);
            match jac.lu().solve(&p) {
                Some(step) => {
                    if step.norm() <= 1e-16 * (1.0 + t.norm()) {
                        break;
                    }
                    t -= step;
                }
                None => break,
            }
        }
        if let Some((norm, t)) = local {
            offer(norm, t, &mut best);
        }
    }
    match best {
        Some((_, t)) => Ok(&group.basis * t),
        None => Err(Error::BifurcationRootNotFound { starts: n_starts }),
    }
}

/// Newton iteration on the resonant map
/// G(eps, u) = u - sum_{k in J} [m(u, e_k) - F(u, e_k)] e_k
///               - eps sum_{k not in J} F(u, e_k)/(mu_k - mu) e_k,
/// started at a bifurcation point u0 with F(u0, e_k) = 0 on the group.
pub fn newton_solve_resonant(
    spectral: &SpectralData,
    group: &ResonanceGroup,
    spec: &NonlinearSpec,
    eps: f64,
    u0: &DVector<f64>,
) -> Result<NonlinearSolution> {
    let n = spectral.dim();
    let f0 = spec.eval_f(u0);
    let side0 = (group.basis.transpose() * &f0).amax();
    if side0 > 1e-10 {
        return Err(Error::PreconditionViolated(format!(
            "F(u0, e_k) = {side0:.3e} on the resonant modes; need <= 1e-10"
        )));
    }
    let (ok, cond) = injectivity_check(&lambda_operator(spec, u0, group));
    if !ok {
        return Err(Error::InjectivityFailed(cond));
    }

    // Constant pieces: P_J u = sum_J e_k m(u, e_k); Q f = sum_J e_k (f . e_k);
    // W' f = sum_{k not in J} e_k (f . e_k)/(mu_k - mu).
    let mut p_j = DMatrix::zeros(n, n);
    let mut q = DMatrix::zeros(n, n);
    for (c, _) in group.indices.iter().enumerate() {
        let e = group.basis.column(c).into_owned();
        p_j += &e * (spectral.triple().m() * &e).transpose();
        q += &e * e.transpose();
    }
    let mut w = DMatrix::zeros(n, n);
    for k in 0..n {
        if group.indices.contains(&k) {
            continue;
        }
        let e = spectral.e_canon().column(k);
        w += e * e.transpose() / (spectral.mu()[k] - group.mu);
    }

    let g = |u: &DVector<f64>| -> DVector<f64> {
        let fu = spec.eval_f(u);
        u - &p_j * u + &q * &fu - &w * &fu * eps
    };
    let jac = |u: &DVector<f64>| -> DMatrix<f64> {
        let df = spec.eval_df(u);
        DMatrix::identity(n, n) - &p_j + &q * &df - &w * &df * eps
    };
    let (u, iterations) = newton_iterate(u0, g, jac)?;
    let res = residual(
        spectral.triple(),
        spectral.lambda(),
        group.mu,
        spec,
        eps,
        &u,
    );
    Ok(NonlinearSolution {
        u,
        eps,
        iterations,
        residual: res,
        method: SolveMethod::Newton,
        branch_info: None,
    })
}

/// max_{k in J} |F(u, e_k)|, the side conditions a resonant solution must
/// satisfy.
pub fn side_condition_defect(
    group: &ResonanceGroup,
    spec: &NonlinearSpec,
    u: &DVector<f64>,
) -> f64 {
    if group.is_empty() {
        return 0.0;
    }
    (group.basis.transpose() * spec.eval_f(u)).amax()
}
