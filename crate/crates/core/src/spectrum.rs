//! Canonical spectral data for the shifted one-parameter eigenproblem
//! S e = (mu + tau) M e, tau-invariance verification, resonance grouping,
//! and eigencurve tracing over a lambda grid.

use nalgebra::{DMatrix, DVector};
use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::forms::{find_coercive_shift, shifted_form, FormTriple, ShiftedForm};

/// Relative tolerance under which neighboring eigenvalues count as one cluster.
pub const CLUSTER_RTOL: f64 = 1e-8;

/// Default relative tolerance for resonance matching.
pub const DEFAULT_RESONANCE_RTOL: f64 = 1e-8;

/// Full spectral data of a triple at a fixed lambda: tau-independent values
/// mu_k, shifted values mu_tilde_k = mu_k + tau, m-orthonormal canonical
/// vectors e_k and S-orthonormal shifted vectors e_tilde_k with
/// e_k = sqrt(mu_tilde_k) * e_tilde_k.
#[derive(Debug, Clone)]
pub struct SpectralData {
    triple: FormTriple,
    lambda: f64,
    tau: f64,
    mu: DVector<f64>,
    mu_tilde: DVector<f64>,
    e_canon: DMatrix<f64>,
    e_shift: DMatrix<f64>,
}

impl SpectralData {
    pub fn triple(&self) -> &FormTriple {
        &self.triple
    }

    pub fn lambda(&self) -> f64 {
        self.lambda
    }

    pub fn tau(&self) -> f64 {
        self.tau
    }

    pub fn dim(&self) -> usize {
        self.mu.len()
    }

    /// Ascending tau-independent eigenvalues mu_k(lambda).
    pub fn mu(&self) -> &DVector<f64> {
        &self.mu
    }

    /// Ascending shifted eigenvalues mu_tilde_k = mu_k + tau (all positive).
    pub fn mu_tilde(&self) -> &DVector<f64> {
        &self.mu_tilde
    }

    /// Canonical m-orthonormal eigenvectors as matrix columns.
    pub fn e_canon(&self) -> &DMatrix<f64> {
        &self.e_canon
    }

    /// Shifted-form-orthonormal eigenvectors as matrix columns.
    pub fn e_shift(&self) -> &DMatrix<f64> {
        &self.e_shift
    }

    /// k-th canonical eigenvector (0-based).
    pub fn canonical_vec(&self, k: usize) -> DVector<f64> {
        self.e_canon.column(k).into_owned()
    }

    /// Values l(e_k) of a functional on all canonical modes.
    pub fn modal_values(&self, ell: &DVector<f64>) -> DVector<f64> {
        self.e_canon.transpose() * ell
    }

    /// Groups indices of numerically equal eigenvalues (ascending order).
    pub fn clusters(&self) -> Vec<Vec<usize>> {
        cluster_sorted(self.mu.as_slice(), CLUSTER_RTOL)
    }
}

/// Index set J and eigenspace basis at a resonant pair (lambda, mu).
#[derive(Debug, Clone)]
pub struct ResonanceGroup {
    pub lambda: f64,
    pub mu: f64,
    /// 0-based indices into the ascending mu list; empty means nonresonant.
    pub indices: Vec<usize>,
    /// m-orthonormal basis of the matched eigenspace, as columns.
    pub basis: DMatrix<f64>,
    pub tol_used: f64,
}

impl ResonanceGroup {
    pub fn is_empty(&self) -> bool {
        self.indices.is_empty()
    }

    pub fn len(&self) -> usize {
        self.indices.len()
    }
}

/// One traced eigencurve sample.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CurvePoint {
    pub lambda: f64,
    /// 1-based curve index.
    pub k: usize,
    pub mu: f64,
}

/// Table of (lambda, k, mu_k(lambda)) rows in lambda-major order.
#[derive(Debug, Clone)]
pub struct EigencurveTable {
    pub k_max: usize,
    pub rows: Vec<CurvePoint>,
}

/// Result of the tau-invariance checks between two shifts.
#[derive(Debug, Clone)]
pub struct InvarianceReport {
    pub lambda: f64,
    pub tau1: f64,
    pub tau2: f64,
    /// max_k |mu_k(tau1) - mu_k(tau2)|
    pub max_mu_diff: f64,
    /// max_k |mu_tilde_k(tau2) - mu_tilde_k(tau1) - (tau2 - tau1)|
    pub max_shift_defect: f64,
    /// max over matched clusters of the eigenvector discrepancy: sign-resolved
    /// vector difference for simple eigenvalues, m-orthogonal projector
    /// difference (spectral norm) for clusters.
    pub max_eigvec_diff: f64,
    pub pass_mu: bool,
    pub pass_shift: bool,
    pub pass_eigvec: bool,
    pub pass: bool,
}

/// Solves the generalized problem S e = mu_tilde M e for a coercive S and
/// positive definite M. Reduction: factor M = L L^T, solve the standard
/// symmetric problem for C = L^-1 S L^-T, back-transform, then re-normalize
/// the vectors in the S-inner product.
///
/// Returns ascending eigenvalues and S-orthonormal eigenvectors as columns.
pub fn solve_shifted_eigen(
    shifted: &ShiftedForm,
    m: &DMatrix<f64>,
) -> Result<(DVector<f64>, DMatrix<f64>)> {
    let n = shifted.dim();
    if m.nrows() != n || m.ncols() != n {
        return Err(Error::DimensionMismatch(format!(
            "M is {}x{}, expected {n}x{n}",
            m.nrows(),
            m.ncols()
        )));
    }
    let lm = crate::forms::cholesky_lower(m).map_err(|p| {
        Error::PreconditionViolated(format!("M not positive definite (pivot {p:.3e})"))
    })?;

    // C = L^-1 S L^-T, kept symmetric explicitly.
    let x = lm.forward_solve_mat(shifted.matrix());
    let c = lm.forward_solve_mat(&x.transpose());
    let c = (&c + c.transpose()) * 0.5;

    let eig = nalgebra::SymmetricEigen::try_new(c, f64::EPSILON, 100_000)
        .ok_or_else(|| Error::EigenFailure("symmetric QL iteration did not converge".into()))?;

    // Sort ascending; back-transform Y -> L^-T Y gives M-orthonormal vectors.
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&i, &j| {
        eig.eigenvalues[i]
            .partial_cmp(&eig.eigenvalues[j])
            .expect("eigenvalues are finite")
    });

    let mut mu_tilde = DVector::zeros(n);
    let mut y_sorted = DMatrix::zeros(n, n);
    for (slot, &idx) in order.iter().enumerate() {
        let val = eig.eigenvalues[idx];
        if !val.is_finite() {
            return Err(Error::EigenFailure(format!("non-finite eigenvalue {val}")));
        }
        if val <= 0.0 {
            return Err(Error::EigenFailure(format!(
                "nonpositive shifted eigenvalue {val:.6e}; shifted form not coercive enough"
            )));
        }
        mu_tilde[slot] = val;
        y_sorted.set_column(slot, &eig.eigenvectors.column(idx));
    }
    let mut e_shift = lm.backward_solve_mat(&y_sorted);
    // S-normalization, batched through one product.
    let sx = shifted.matrix() * &e_shift;
    for k in 0..n {
        let s_quad = e_shift.column(k).dot(&sx.column(k));
        if s_quad.is_nan() || s_quad <= 0.0 {
            return Err(Error::EigenFailure(
                "eigenvector has nonpositive S-energy".into(),
            ));
        }
        let scale = 1.0 / s_quad.sqrt();
        e_shift.column_mut(k).scale_mut(scale);
    }
    Ok((mu_tilde, e_shift))
}

/// Canonical spectral data at lambda with tau chosen by the doubling search.
pub fn canonical_data(triple: &FormTriple, lambda: f64) -> Result<SpectralData> {
    let shifted = find_coercive_shift(triple, lambda)?;
    canonical_from_shifted(triple, &shifted)
}

/// Canonical spectral data at lambda using an explicit shift tau.
pub fn canonical_data_with_shift(triple: &FormTriple, lambda: f64, tau: f64) -> Result<SpectralData> {
    let shifted = shifted_form(triple, lambda, tau)?;
    canonical_from_shifted(triple, &shifted)
}

fn canonical_from_shifted(triple: &FormTriple, shifted: &ShiftedForm) -> Result<SpectralData> {
    let (mu_tilde, mut e_shift) = solve_shifted_eigen(shifted, triple.m())?;
    let n = mu_tilde.len();
    let tau = shifted.tau();
    let mut mu = DVector::zeros(n);
    let mut e_canon = DMatrix::zeros(n, n);
    for k in 0..n {
        mu[k] = mu_tilde[k] - tau;
        let mut e = e_shift.column(k) * mu_tilde[k].sqrt();
        if sign_flip_needed(e.as_slice()) {
            e.neg_mut();
            let flipped = -e_shift.column(k);
            e_shift.set_column(k, &flipped);
        }
        e_canon.set_column(k, &e);
    }
    Ok(SpectralData {
        triple: triple.clone(),
        lambda: shifted.lambda(),
        tau,
        mu,
        mu_tilde,
        e_canon,
        e_shift,
    })
}

/// Sign convention: the largest-magnitude coordinate is made positive, ties
/// broken by lowest index.
fn sign_flip_needed(v: &[f64]) -> bool {
    let mut best = 0usize;
    for (i, x) in v.iter().enumerate() {
        if x.abs() > v[best].abs() {
            best = i;
        }
    }
    v[best] < 0.0
}

fn cluster_sorted(values: &[f64], rtol: f64) -> Vec<Vec<usize>> {
    let mut clusters: Vec<Vec<usize>> = Vec::new();
    for k in 0..values.len() {
        let joins = clusters.last().is_some_and(|c| {
            let prev = values[*c.last().unwrap()];
            (values[k] - prev).abs() <= rtol * (1.0 + prev.abs().max(values[k].abs()))
        });
        if joins {
            clusters.last_mut().unwrap().push(k);
        } else {
            clusters.push(vec![k]);
        }
    }
    clusters
}

/// Checks tau-independence of (mu_k, e_k) and the shift relation
/// mu_tilde_k(tau2) = mu_tilde_k(tau1) + (tau2 - tau1) between two admissible
/// shifts. Individual eigenvectors are compared up to sign; clustered
/// eigenvalues are compared through m-orthogonal projectors onto the cluster
/// eigenspace.
pub fn verify_tau_invariance(
    triple: &FormTriple,
    lambda: f64,
    tau1: f64,
    tau2: f64,
) -> Result<InvarianceReport> {
    let d1 = canonical_data_with_shift(triple, lambda, tau1)?;
    let d2 = canonical_data_with_shift(triple, lambda, tau2)?;
    let n = d1.dim();

    let mut max_mu_diff = 0.0f64;
    let mut pass_mu = true;
    for k in 0..n {
        let diff = (d1.mu()[k] - d2.mu()[k]).abs();
        max_mu_diff = max_mu_diff.max(diff);
        if diff > 1e-8 * (1.0 + d1.mu()[k].abs()) {
            pass_mu = false;
        }
    }

    let delta = tau2 - tau1;
    let mut max_shift_defect = 0.0f64;
    let mut pass_shift = true;
    for k in 0..n {
        let defect = (d2.mu_tilde()[k] - d1.mu_tilde()[k] - delta).abs();
        max_shift_defect = max_shift_defect.max(defect);
        // Scale-aware: large eigenvalues carry proportionally large rounding.
        if defect > 1e-10 * (1.0 + d1.mu_tilde()[k].abs()) {
            pass_shift = false;
        }
    }

    let clusters1 = d1.clusters();
    let clusters2 = d2.clusters();
    let mut max_eigvec_diff = 0.0f64;
    let mut pass_eigvec = clusters1.len() == clusters2.len()
        && clusters1
            .iter()
            .zip(&clusters2)
            .all(|(c1, c2)| c1.len() == c2.len());
    if pass_eigvec {
        for (c1, c2) in clusters1.iter().zip(&clusters2) {
            let diff = if c1.len() == 1 {
                let e1 = d1.canonical_vec(c1[0]);
                let e2 = d2.canonical_vec(c2[0]);
                (&e1 - &e2).norm().min((&e1 + &e2).norm())
            } else {
                let p1 = m_projector(&d1, c1);
                let p2 = m_projector(&d2, c2);
                spectral_norm(&(p1 - p2))
            };
            max_eigvec_diff = max_eigvec_diff.max(diff);
        }
        pass_eigvec = max_eigvec_diff <= 1e-6;
    } else {
        max_eigvec_diff = f64::INFINITY;
    }

    Ok(InvarianceReport {
        lambda,
        tau1,
        tau2,
        max_mu_diff,
        max_shift_defect,
        max_eigvec_diff,
        pass_mu,
        pass_shift,
        pass_eigvec,
        pass: pass_mu && pass_shift && pass_eigvec,
    })
}

/// m-orthogonal projector onto span{e_k : k in cluster} in coefficient space.
fn m_projector(data: &SpectralData, cluster: &[usize]) -> DMatrix<f64> {
    let n = data.dim();
    let mut p = DMatrix::zeros(n, n);
    for &k in cluster {
        let e = data.canonical_vec(k);
        let me = data.triple().m() * &e;
        p += e * me.transpose();
    }
    p
}

fn spectral_norm(x: &DMatrix<f64>) -> f64 {
    x.clone().svd(false, false).singular_values.max()
}

/// Traces mu_k(lambda) for k = 1..=k_count over an ascending lambda grid.
/// Grid points may be evaluated in parallel; rows are assembled lambda-major.
pub fn trace_eigencurves(
    triple: &FormTriple,
    lambda_grid: &[f64],
    k_count: usize,
) -> Result<EigencurveTable> {
    if lambda_grid.is_empty() {
        return Err(Error::PreconditionViolated("empty lambda grid".into()));
    }
    if k_count == 0 || k_count > triple.dim() {
        return Err(Error::PreconditionViolated(format!(
            "curve count {k_count} not in 1..={}",
            triple.dim()
        )));
    }
    let per_point: Vec<Result<Vec<CurvePoint>>> = lambda_grid
        .par_iter()
        .map(|&lambda| {
            let data = canonical_data(triple, lambda).map_err(|e| Error::EigencurvePoint {
                lambda,
                source: Box::new(e),
            })?;
            Ok((0..k_count)
                .map(|k| CurvePoint {
                    lambda,
                    k: k + 1,
                    mu: data.mu()[k],
                })
                .collect())
        })
        .collect();
    let mut rows = Vec::with_capacity(lambda_grid.len() * k_count);
    for chunk in per_point {
        rows.extend(chunk?);
    }
    Ok(EigencurveTable { k_max: k_count, rows })
}

/// Builds the index set J = {k : |mu_k - mu| <= tol (1 + |mu|)} and the
/// m-orthonormal basis of the matched eigenspace. The match is closed under
/// eigenvalue clustering so the basis spans the full numerical eigenspace.
/// Eigenvalues strictly outside the match band but within ten times of it
/// raise `AmbiguousResonance`.
pub fn resonance_group(spectral: &SpectralData, mu: f64, tol: f64) -> Result<ResonanceGroup> {
    if tol.is_nan() || tol <= 0.0 {
        return Err(Error::PreconditionViolated(format!(
            "resonance tolerance must be positive, got {tol}"
        )));
    }
    let n = spectral.dim();
    let band = tol * (1.0 + mu.abs());
    let mut matched: Vec<bool> = spectral
        .mu()
        .iter()
        .map(|&v| (v - mu).abs() <= band)
        .collect();
    // Close the match under clustering of equal eigenvalues.
    for cluster in spectral.clusters() {
        if cluster.iter().any(|&k| matched[k]) {
            for &k in &cluster {
                matched[k] = true;
            }
        }
    }
    for (k, &hit) in matched.iter().enumerate() {
        let dist = (spectral.mu()[k] - mu).abs();
        if !hit && dist <= 10.0 * band {
            return Err(Error::AmbiguousResonance {
                index: k,
                value: spectral.mu()[k],
                mu,
                tol,
            });
        }
    }
    let indices: Vec<usize> = (0..n).filter(|&k| matched[k]).collect();
    let mut basis = DMatrix::zeros(n, indices.len());
    for (c, &k) in indices.iter().enumerate() {
        basis.set_column(c, &spectral.e_canon().column(k));
    }
    Ok(ResonanceGroup {
        lambda: spectral.lambda(),
        mu,
        indices,
        basis,
        tol_used: tol,
    })
}
