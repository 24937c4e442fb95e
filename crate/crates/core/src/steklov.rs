//! Steklov-Robin problems on 1D meshes: P1 assembly of the form triple,
//! rank-one power nonlinearities, the transcendental eigencurve oracle for
//! constant coefficients, and the pointwise superposition operator with its
//! derivative check.

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::forms::{BasisMeta, FormTriple};
use crate::nonlinear::{NemytskiiTerm, PowerTerm};

/// Uniform or user-supplied 1D mesh; the boundary is the two endpoint nodes.
#[derive(Debug, Clone)]
pub struct Mesh1D {
    nodes: Vec<f64>,
}

impl Mesh1D {
    pub fn uniform(n_elems: usize, interval: [f64; 2]) -> Result<Self> {
        if n_elems == 0 {
            return Err(Error::MeshTooCoarse(0));
        }
        if interval.iter().any(|v| v.is_nan()) || interval[0] >= interval[1] {
            return Err(Error::Config(format!(
                "degenerate interval [{}, {}]",
                interval[0], interval[1]
            )));
        }
        let h = (interval[1] - interval[0]) / n_elems as f64;
        let nodes = (0..=n_elems)
            .map(|i| interval[0] + h * i as f64)
            .collect();
        Ok(Self { nodes })
    }

    pub fn from_nodes(nodes: Vec<f64>) -> Result<Self> {
        if nodes.len() < 2 {
            return Err(Error::MeshTooCoarse(nodes.len().saturating_sub(1)));
        }
        if !nodes.windows(2).all(|w| w[0] < w[1]) {
            return Err(Error::Config("mesh nodes must be strictly increasing".into()));
        }
        Ok(Self { nodes })
    }

    pub fn n_elems(&self) -> usize {
        self.nodes.len() - 1
    }

    pub fn n_nodes(&self) -> usize {
        self.nodes.len()
    }

    pub fn nodes(&self) -> &[f64] {
        &self.nodes
    }

    pub fn h(&self, e: usize) -> f64 {
        self.nodes[e + 1] - self.nodes[e]
    }

    /// Nodal interpolant of a scalar function.
    pub fn interpolate(&self, f: impl Fn(f64) -> f64) -> DVector<f64> {
        DVector::from_iterator(self.n_nodes(), self.nodes.iter().map(|&x| f(x)))
    }

    /// Unit-weight P1 mass matrix (exact integrals).
    pub fn unit_mass(&self) -> DMatrix<f64> {
        let n = self.n_nodes();
        let mut m = DMatrix::zeros(n, n);
        for e in 0..self.n_elems() {
            let h = self.h(e);
            m[(e, e)] += h / 3.0;
            m[(e, e + 1)] += h / 6.0;
            m[(e + 1, e)] += h / 6.0;
            m[(e + 1, e + 1)] += h / 3.0;
        }
        m
    }

    /// Unit-coefficient P1 stiffness matrix.
    pub fn unit_stiffness(&self) -> DMatrix<f64> {
        let n = self.n_nodes();
        let mut k = DMatrix::zeros(n, n);
        for e in 0..self.n_elems() {
            let w = 1.0 / self.h(e);
            k[(e, e)] += w;
            k[(e, e + 1)] -= w;
            k[(e + 1, e)] -= w;
            k[(e + 1, e + 1)] += w;
        }
        k
    }

    /// Sobolev-style norm ||v||_2 + ||v'||_2 of a P1 function, computed with
    /// exact elementwise integration.
    pub fn norm_h12(&self, v: &DVector<f64>) -> f64 {
        let l2 = (&self.unit_mass() * v).dot(v).max(0.0).sqrt();
        let semi = (&self.unit_stiffness() * v).dot(v).max(0.0).sqrt();
        l2 + semi
    }
}

/// Piecewise-constant coefficient: one value, or one value per element.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(untagged)]
pub enum Coef {
    Const(f64),
    PerElement(Vec<f64>),
}

impl Coef {
    pub fn value(&self, e: usize) -> f64 {
        match self {
            Coef::Const(v) => *v,
            Coef::PerElement(vs) => vs[e],
        }
    }

    pub fn as_const(&self) -> Option<f64> {
        match self {
            Coef::Const(v) => Some(*v),
            Coef::PerElement(vs) => {
                let first = *vs.first()?;
                vs.iter().all(|&v| v == first).then_some(first)
            }
        }
    }

    fn check_len(&self, n_elems: usize, name: &str) -> Result<()> {
        if let Coef::PerElement(vs) = self {
            if vs.len() != n_elems {
                return Err(Error::IncompatibleCoefficients(format!(
                    "{name} has {} element values, mesh has {n_elems} elements",
                    vs.len()
                )));
            }
        }
        Ok(())
    }

    fn min_value(&self, n_elems: usize) -> f64 {
        (0..n_elems).fold(f64::INFINITY, |acc, e| acc.min(self.value(e)))
    }
}

/// Coefficients of the Steklov-Robin problem: diffusion A, interior potential
/// c, interior weight m0, Robin absorption b_c at the endpoints, and
/// sign-unrestricted Steklov weights b0 at the endpoints.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct SteklovCoefficients {
    #[serde(rename = "A")]
    pub a_coef: Coef,
    pub c: Coef,
    pub m0: Coef,
    pub b_c: [f64; 2],
    pub b0: [f64; 2],
}

impl SteklovCoefficients {
    pub fn constant(a: f64, c: f64, m0: f64, b_c: [f64; 2], b0: [f64; 2]) -> Self {
        Self {
            a_coef: Coef::Const(a),
            c: Coef::Const(c),
            m0: Coef::Const(m0),
            b_c,
            b0,
        }
    }

    fn validate(&self, n_elems: usize) -> Result<()> {
        self.a_coef.check_len(n_elems, "A")?;
        self.c.check_len(n_elems, "c")?;
        self.m0.check_len(n_elems, "m0")?;
        if self.a_coef.min_value(n_elems) <= 0.0 {
            return Err(Error::IncompatibleCoefficients(
                "diffusion A must be positive on every element".into(),
            ));
        }
        if self.c.min_value(n_elems) < 0.0 {
            return Err(Error::IncompatibleCoefficients(
                "potential c must be nonnegative".into(),
            ));
        }
        if self.m0.min_value(n_elems) <= 0.0 {
            return Err(Error::IncompatibleCoefficients(
                "weight m0 must be positive".into(),
            ));
        }
        if self.b_c[0] < 0.0 || self.b_c[1] < 0.0 {
            return Err(Error::IncompatibleCoefficients(
                "Robin weights b_c must be nonnegative".into(),
            ));
        }
        Ok(())
    }
}

/// Compatibility condition: the interior potential and Robin weights must
/// carry positive total mass, int c dx + b_c(0) + b_c(1) > 0.
pub fn check_compatibility(mesh: &Mesh1D, coeffs: &SteklovCoefficients) -> bool {
    let mut total = coeffs.b_c[0] + coeffs.b_c[1];
    for e in 0..mesh.n_elems() {
        total += coeffs.c.value(e) * mesh.h(e);
    }
    total > 0.0
}

/// Assembles the P1 Galerkin triple: A = stiffness + c-mass + Robin endpoint
/// terms, B = Steklov endpoint terms (rank at most 2), M = m0-mass. Element
/// integrals are exact for piecewise-constant coefficients.
pub fn assemble_forms(mesh: &Mesh1D, coeffs: &SteklovCoefficients) -> Result<FormTriple> {
    if mesh.n_elems() < 2 {
        return Err(Error::MeshTooCoarse(mesh.n_elems()));
    }
    coeffs.validate(mesh.n_elems())?;
    if !check_compatibility(mesh, coeffs) {
        return Err(Error::IncompatibleCoefficients(
            "compatibility failed: int c dx + b_c(0) + b_c(1) must be positive".into(),
        ));
    }
    let n = mesh.n_nodes();
    let mut a = DMatrix::zeros(n, n);
    let mut m = DMatrix::zeros(n, n);
    for e in 0..mesh.n_elems() {
        let h = mesh.h(e);
        let stiff = coeffs.a_coef.value(e) / h;
        a[(e, e)] += stiff;
        a[(e, e + 1)] -= stiff;
        a[(e + 1, e)] -= stiff;
        a[(e + 1, e + 1)] += stiff;
        for (w, x) in [(coeffs.c.value(e), &mut a), (coeffs.m0.value(e), &mut m)] {
            x[(e, e)] += w * h / 3.0;
            x[(e, e + 1)] += w * h / 6.0;
            x[(e + 1, e)] += w * h / 6.0;
            x[(e + 1, e + 1)] += w * h / 3.0;
        }
    }
    a[(0, 0)] += coeffs.b_c[0];
    a[(n - 1, n - 1)] += coeffs.b_c[1];
    let mut b = DMatrix::zeros(n, n);
    b[(0, 0)] = coeffs.b0[0];
    b[(n - 1, n - 1)] = coeffs.b0[1];
    FormTriple::new(a, b, m, BasisMeta::Steklov1d)
}

/// Density of a rank-one functional: piecewise-constant in the interior or
/// two endpoint values on the boundary.
#[derive(Debug, Clone)]
pub enum Density {
    Interior(Coef),
    Boundary([f64; 2]),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum PositivityMode {
    /// Enforce the positive-integral requirement of the power nonlinearities.
    Strict,
    /// Skip the check; used to construct resonant test problems.
    Relaxed,
}

/// Functional values l(phi_i): exact integrals of the density against the
/// P1 hat functions, or endpoint evaluations on the boundary.
pub fn build_rank_one_functional(
    mesh: &Mesh1D,
    density: &Density,
    mode: PositivityMode,
) -> Result<DVector<f64>> {
    let n = mesh.n_nodes();
    match density {
        Density::Interior(f0) => {
            f0.check_len(mesh.n_elems(), "f0")?;
            if mode == PositivityMode::Strict {
                let integral: f64 = (0..mesh.n_elems()).map(|e| f0.value(e) * mesh.h(e)).sum();
                if integral <= 0.0 {
                    return Err(Error::PositivityViolated(format!(
                        "interior density integrates to {integral:.6e}, need > 0"
                    )));
                }
            }
            let mut ell = DVector::zeros(n);
            for e in 0..mesh.n_elems() {
                let w = f0.value(e) * mesh.h(e) / 2.0;
                ell[e] += w;
                ell[e + 1] += w;
            }
            Ok(ell)
        }
        Density::Boundary(g0) => {
            if mode == PositivityMode::Strict && g0[0] + g0[1] <= 0.0 {
                return Err(Error::PositivityViolated(format!(
                    "boundary density sums to {:.6e}, need > 0",
                    g0[0] + g0[1]
                )));
            }
            let mut ell = DVector::zeros(n);
            ell[0] = g0[0];
            ell[n - 1] = g0[1];
            Ok(ell)
        }
    }
}

/// Wraps a functional into the power term c |l(u)|^(p-2) l(u) l(v), p > 2.
pub fn build_power_nonlinearity(ell: DVector<f64>, p: f64, c: f64) -> Result<PowerTerm> {
    PowerTerm::new(c, ell, p)
}

/// Value of the functional sum_i (c_i / p_i) |l_i(u)|^(p_i); its first
/// variation is exactly the power part of F(u, .).
pub fn functional_value(terms: &[PowerTerm], u: &DVector<f64>) -> f64 {
    terms
        .iter()
        .map(|t| t.c / t.p * t.ell.dot(u).abs().powf(t.p))
        .sum()
}

/// Named scalar functions for the superposition operator, with first and
/// second derivatives and their bounds on the working range.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase", tag = "fn")]
pub enum NemytskiiFn {
    Sin,
    Tanh,
    Identity,
    Affine { a: f64, b: f64 },
    /// s^2; derivative bounds stated for |s| <= 1.
    Quadratic,
}

impl NemytskiiFn {
    pub fn by_name(name: &str) -> Option<Self> {
        match name {
            "sin" => Some(Self::Sin),
            "tanh" => Some(Self::Tanh),
            "identity" => Some(Self::Identity),
            "quadratic" => Some(Self::Quadratic),
            _ => None,
        }
    }

    pub fn name(&self) -> &'static str {
        match self {
            Self::Sin => "sin",
            Self::Tanh => "tanh",
            Self::Identity => "identity",
            Self::Affine { .. } => "affine",
            Self::Quadratic => "quadratic",
        }
    }

    pub fn f(&self, s: f64) -> f64 {
        match self {
            Self::Sin => s.sin(),
            Self::Tanh => s.tanh(),
            Self::Identity => s,
            Self::Affine { a, b } => a + b * s,
            Self::Quadratic => s * s,
        }
    }

    pub fn df(&self, s: f64) -> f64 {
        match self {
            Self::Sin => s.cos(),
            Self::Tanh => {
                let t = s.tanh();
                1.0 - t * t
            }
            Self::Identity => 1.0,
            Self::Affine { b, .. } => *b,
            Self::Quadratic => 2.0 * s,
        }
    }

    pub fn d2f(&self, s: f64) -> f64 {
        match self {
            Self::Sin => -s.sin(),
            Self::Tanh => {
                let t = s.tanh();
                -2.0 * t * (1.0 - t * t)
            }
            Self::Identity => 0.0,
            Self::Affine { .. } => 0.0,
            Self::Quadratic => 2.0,
        }
    }

    pub fn df_bound(&self) -> f64 {
        match self {
            Self::Sin | Self::Tanh | Self::Identity => 1.0,
            Self::Affine { b, .. } => b.abs(),
            Self::Quadratic => 2.0,
        }
    }

    pub fn d2f_bound(&self) -> f64 {
        match self {
            Self::Sin => 1.0,
            Self::Tanh => 0.769900358919501, // max of |2 tanh sech^2|
            Self::Identity | Self::Affine { .. } => 0.0,
            Self::Quadratic => 2.0,
        }
    }
}

/// Nodal application of the superposition operator: exact for the P1
/// interpolant at the nodes.
pub fn nemytskii_apply(func: &NemytskiiFn, u: &DVector<f64>) -> DVector<f64> {
    DVector::from_iterator(u.len(), u.iter().map(|&s| func.f(s)))
}

/// Builds the dual-space term for F(u, v) contributions of a superposition
/// function, on the interior (mass-matrix weight) or the boundary (endpoint
/// evaluations).
pub fn build_nemytskii_term(
    mesh: &Mesh1D,
    func: NemytskiiFn,
    location: NemytskiiLocation,
) -> NemytskiiTerm {
    let n = mesh.n_nodes();
    let weight = match location {
        NemytskiiLocation::Interior => mesh.unit_mass(),
        NemytskiiLocation::Boundary => {
            let mut w = DMatrix::zeros(n, n);
            w[(0, 0)] = 1.0;
            w[(n - 1, n - 1)] = 1.0;
            w
        }
    };
    NemytskiiTerm { func, weight }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum NemytskiiLocation {
    Interior,
    Boundary,
}

/// One row of the shrinking-step derivative check.
#[derive(Debug, Clone, Copy)]
pub struct RemainderRow {
    /// Step scale 2^-j.
    pub scale: f64,
    pub h_norm: f64,
    pub remainder_norm: f64,
    /// remainder / ||h||^2 in the (1,2)-norm.
    pub ratio: f64,
}

/// Report of the quadratic-remainder check certifying differentiability.
#[derive(Debug, Clone)]
pub struct NemytskiiCheckReport {
    pub rows: Vec<RemainderRow>,
    pub max_ratio: f64,
    pub min_ratio: f64,
    pub pass: bool,
}

/// For h_j = 2^-j h computes
/// r_j = ||T(u + h_j) - T(u) - F'(u) h_j||_{1,2} / ||h_j||^2_{1,2}
/// over j = 0..=shrink_steps and passes when the r_j stay within a factor 10
/// band (or the remainders vanish outright, as for affine F).
pub fn nemytskii_derivative_check(
    mesh: &Mesh1D,
    func: &NemytskiiFn,
    u: &DVector<f64>,
    h: &DVector<f64>,
    shrink_steps: usize,
) -> NemytskiiCheckReport {
    let fu = nemytskii_apply(func, u);
    let dfu = DVector::from_iterator(u.len(), u.iter().map(|&s| func.df(s)));
    let mut rows = Vec::with_capacity(shrink_steps + 1);
    for j in 0..=shrink_steps {
        let scale = 0.5f64.powi(j as i32);
        let hj = h * scale;
        let shifted = nemytskii_apply(func, &(u + &hj));
        let remainder = &shifted - &fu - dfu.component_mul(&hj);
        let h_norm = mesh.norm_h12(&hj);
        let remainder_norm = mesh.norm_h12(&remainder);
        let ratio = remainder_norm / (h_norm * h_norm);
        rows.push(RemainderRow {
            scale,
            h_norm,
            remainder_norm,
            ratio,
        });
    }
    let max_ratio = rows.iter().map(|r| r.ratio).fold(f64::NEG_INFINITY, f64::max);
    let min_ratio = rows.iter().map(|r| r.ratio).fold(f64::INFINITY, f64::min);
    let all_tiny = rows.iter().all(|r| r.remainder_norm <= 1e-12);
    let pass = all_tiny || (min_ratio > 0.0 && max_ratio / min_ratio <= 10.0);
    NemytskiiCheckReport {
        rows,
        max_ratio,
        min_ratio,
        pass,
    }
}

/// Transcendental eigencurve oracle for the constant-coefficient problem
/// -u'' + c u = mu u with -u'(0) + b_c(0) u(0) = lambda b0(0) u(0) and
/// u'(1) + b_c(1) u(1) = lambda b0(1) u(1). Requires A = 1 and m0 = 1.
///
/// The shooting solution with u(0) = 1, u'(0) = -(lambda b0(0) - b_c(0))
/// has closed form through C(s) = cos(sqrt(s)) / cosh(sqrt(-s)) and
/// S(s) = sin(sqrt(s))/sqrt(s) / sinh analog; the characteristic function is
/// chi(mu) = -(s - g0 g1) S(s) - (g0 + g1) C(s) with s = mu - c. Its k-th
/// root (bracketed scan plus bisection) is returned; k is 1-based.
pub fn eigencurve_oracle_1d(
    coeffs: &SteklovCoefficients,
    lambda: f64,
    k: usize,
) -> Result<f64> {
    if k == 0 {
        return Err(Error::PreconditionViolated("oracle index k is 1-based".into()));
    }
    let a_const = coeffs.a_coef.as_const();
    let m_const = coeffs.m0.as_const();
    let c_const = coeffs.c.as_const();
    let (Some(a), Some(m0), Some(c)) = (a_const, m_const, c_const) else {
        return Err(Error::PreconditionViolated(
            "oracle needs constant coefficients".into(),
        ));
    };
    if a != 1.0 || m0 != 1.0 {
        return Err(Error::PreconditionViolated(
            "oracle needs A = 1 and m0 = 1".into(),
        ));
    }
    let g0 = lambda * coeffs.b0[0] - coeffs.b_c[0];
    let g1 = lambda * coeffs.b0[1] - coeffs.b_c[1];
    let chi = |s: f64| -> f64 {
        let (cc, ss) = cosc_sinc(s);
        -(s - g0 * g1) * ss - (g0 + g1) * cc
    };

    // Analytic lower bound on the first eigenvalue via the trace inequality.
    let gamma = g0.abs() + g1.abs();
    let s_lo = -(gamma * (4.0 * gamma + 3.0)) - 1.0;

    let mut roots: Vec<f64> = Vec::new();
    let push_root = |r: f64, roots: &mut Vec<f64>| {
        if !roots
            .iter()
            .any(|&x: &f64| (x - r).abs() <= 1e-9 * (1.0 + x.abs()))
        {
            roots.push(r);
        }
    };

    let mut omega_max = (k as f64 + 3.0) * std::f64::consts::PI + gamma.sqrt() + 1.0;
    for _attempt in 0..3 {
        roots.clear();
        // Negative-s region: uniform scan.
        let neg_steps = 4000usize;
        let mut prev_s = s_lo;
        let mut prev_v = chi(prev_s);
        for i in 1..=neg_steps {
            let s = s_lo + (0.0 - s_lo) * i as f64 / neg_steps as f64;
            let v = chi(s);
            if let Some(r) = bracket_root(&chi, prev_s, prev_v, s, v) {
                push_root(r, &mut roots);
            }
            prev_s = s;
            prev_v = v;
        }
        // Positive-s region: uniform scan in omega = sqrt(s).
        let d_omega = 0.002f64;
        let mut omega = 0.0f64;
        while omega < omega_max {
            let next = omega + d_omega;
            let (s1, s2) = (omega * omega, next * next);
            let (v1, v2) = (chi(s1), chi(s2));
            if let Some(r) = bracket_root(&chi, s1, v1, s2, v2) {
                push_root(r, &mut roots);
            }
            omega = next;
        }
        roots.sort_by(|x, y| x.partial_cmp(y).unwrap());
        if roots.len() >= k {
            return Ok(roots[k - 1] + c);
        }
        omega_max *= 2.0;
    }
    Err(Error::RootBracketFailed(format!(
        "found {} roots, needed {k}",
        roots.len()
    )))
}

/// (C(s), S(s)) with C = cos(sqrt(s)), S = sin(sqrt(s))/sqrt(s) continued
/// through s <= 0 by the hyperbolic counterparts; series near zero.
fn cosc_sinc(s: f64) -> (f64, f64) {
    if s > 1e-10 {
        let w = s.sqrt();
        (w.cos(), w.sin() / w)
    } else if s < -1e-10 {
        let w = (-s).sqrt();
        (w.cosh(), w.sinh() / w)
    } else {
        (1.0 - s / 2.0 + s * s / 24.0, 1.0 - s / 6.0 + s * s / 120.0)
    }
}

fn bracket_root(
    chi: &impl Fn(f64) -> f64,
    mut lo: f64,
    mut v_lo: f64,
    mut hi: f64,
    v_hi_in: f64,
) -> Option<f64> {
    let mut v_hi = v_hi_in;
    if v_lo == 0.0 {
        return Some(lo);
    }
    if v_hi == 0.0 || v_lo.signum() == v_hi.signum() {
        return None;
    }
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        let v = chi(mid);
        if v == 0.0 {
            return Some(mid);
        }
        if v.signum() == v_lo.signum() {
            lo = mid;
            v_lo = v;
        } else {
            hi = mid;
            v_hi = v;
        }
        if (hi - lo).abs() <= 1e-15 * (1.0 + mid.abs()) {
            break;
        }
    }
    let _ = (v_lo, v_hi);
    Some(0.5 * (lo + hi))
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;
    use std::f64::consts::PI;

    fn unit_coeffs() -> SteklovCoefficients {
        SteklovCoefficients::constant(1.0, 1.0, 1.0, [0.0, 0.0], [1.0, 1.0])
    }

    #[test]
    fn assembly_two_elements_matches_hand_integrals() {
        let mesh = Mesh1D::uniform(2, [0.0, 1.0]).unwrap();
        let coeffs = SteklovCoefficients::constant(1.0, 0.0, 1.0, [1.0, 0.0], [1.0, 1.0]);
        let triple = assemble_forms(&mesh, &coeffs).unwrap();
        let a_expect = DMatrix::from_row_slice(
            3,
            3,
            &[2.0 + 1.0, -2.0, 0.0, -2.0, 4.0, -2.0, 0.0, -2.0, 2.0],
        );
        assert_relative_eq!((triple.a() - a_expect).norm(), 0.0, epsilon = 1e-14);
        let b_expect = DMatrix::from_diagonal(&DVector::from_vec(vec![1.0, 0.0, 1.0]));
        assert_relative_eq!((triple.b() - b_expect).norm(), 0.0, epsilon = 1e-15);
        let m_expect = DMatrix::from_row_slice(
            3,
            3,
            &[
                1.0 / 6.0,
                1.0 / 12.0,
                0.0,
                1.0 / 12.0,
                1.0 / 3.0,
                1.0 / 12.0,
                0.0,
                1.0 / 12.0,
                1.0 / 6.0,
            ],
        );
        assert_relative_eq!((triple.m() - m_expect).norm(), 0.0, epsilon = 1e-14);
    }

    #[test]
    fn zero_boundary_weights_degenerate_b() {
        let mesh = Mesh1D::uniform(4, [0.0, 1.0]).unwrap();
        let coeffs = SteklovCoefficients::constant(1.0, 1.0, 1.0, [0.0, 0.0], [0.0, 0.0]);
        let triple = assemble_forms(&mesh, &coeffs).unwrap();
        assert_eq!(triple.b().norm(), 0.0);
    }

    #[test]
    fn b_has_rank_at_most_two() {
        let mesh = Mesh1D::uniform(8, [0.0, 1.0]).unwrap();
        let triple = assemble_forms(&mesh, &unit_coeffs()).unwrap();
        let nnz = triple.b().iter().filter(|&&v| v != 0.0).count();
        assert!(nnz <= 2);
    }

    #[test]
    fn compatibility_condition() {
        let mesh = Mesh1D::uniform(4, [0.0, 1.0]).unwrap();
        let mut coeffs = SteklovCoefficients::constant(1.0, 0.0, 1.0, [0.0, 0.0], [1.0, 1.0]);
        assert!(!check_compatibility(&mesh, &coeffs));
        coeffs.c = Coef::Const(1.0);
        assert!(check_compatibility(&mesh, &coeffs));
        coeffs.c = Coef::Const(0.0);
        coeffs.b_c = [1.0, 0.0];
        assert!(check_compatibility(&mesh, &coeffs));
    }

    #[test]
    fn incompatible_coefficients_rejected() {
        let mesh = Mesh1D::uniform(4, [0.0, 1.0]).unwrap();
        let coeffs = SteklovCoefficients::constant(1.0, 0.0, 1.0, [0.0, 0.0], [1.0, 1.0]);
        assert!(matches!(
            assemble_forms(&mesh, &coeffs),
            Err(Error::IncompatibleCoefficients(_))
        ));
        let mesh1 = Mesh1D::uniform(1, [0.0, 1.0]).unwrap();
        assert!(matches!(
            assemble_forms(&mesh1, &unit_coeffs()),
            Err(Error::MeshTooCoarse(1))
        ));
    }

    #[test]
    fn rank_one_functional_interior_constant() {
        let mesh = Mesh1D::uniform(2, [0.0, 1.0]).unwrap();
        let ell = build_rank_one_functional(
            &mesh,
            &Density::Interior(Coef::Const(1.0)),
            PositivityMode::Strict,
        )
        .unwrap();
        assert_relative_eq!(ell[0], 0.25);
        assert_relative_eq!(ell[1], 0.5);
        assert_relative_eq!(ell[2], 0.25);
    }

    #[test]
    fn rank_one_functional_boundary() {
        let mesh = Mesh1D::uniform(2, [0.0, 1.0]).unwrap();
        let ell = build_rank_one_functional(
            &mesh,
            &Density::Boundary([1.0, 0.0]),
            PositivityMode::Strict,
        )
        .unwrap();
        assert_eq!(ell.as_slice(), &[1.0, 0.0, 0.0]);
    }

    #[test]
    fn positivity_enforced_in_strict_mode() {
        let mesh = Mesh1D::uniform(2, [0.0, 1.0]).unwrap();
        let zero_mean = Coef::PerElement(vec![1.0, -1.0]);
        assert!(matches!(
            build_rank_one_functional(
                &mesh,
                &Density::Interior(zero_mean.clone()),
                PositivityMode::Strict
            ),
            Err(Error::PositivityViolated(_))
        ));
        assert!(build_rank_one_functional(
            &mesh,
            &Density::Interior(zero_mean),
            PositivityMode::Relaxed
        )
        .is_ok());
    }

    #[test]
    fn functional_value_power_three() {
        let terms = [PowerTerm::new(1.0, DVector::from_vec(vec![1.0, 0.0]), 3.0).unwrap()];
        let u = DVector::from_vec(vec![2.0, 5.0]);
        assert_relative_eq!(functional_value(&terms, &u), 8.0 / 3.0);
        assert_eq!(functional_value(&terms, &DVector::zeros(2)), 0.0);
    }

    #[test]
    fn oracle_neumann_case() {
        // c=1, b_c=0, b0=(1,1), lambda=0: Neumann spectrum mu = 1 + (k-1)^2 pi^2.
        let coeffs = unit_coeffs();
        let mu1 = eigencurve_oracle_1d(&coeffs, 0.0, 1).unwrap();
        assert_relative_eq!(mu1, 1.0, epsilon = 1e-9);
        let mu2 = eigencurve_oracle_1d(&coeffs, 0.0, 2).unwrap();
        assert_relative_eq!(mu2, 1.0 + PI * PI, max_relative = 1e-12);
        let mu3 = eigencurve_oracle_1d(&coeffs, 0.0, 3).unwrap();
        assert_relative_eq!(mu3, 1.0 + 4.0 * PI * PI, max_relative = 1e-12);
    }

    #[test]
    fn oracle_rejects_nonconstant() {
        let mut coeffs = unit_coeffs();
        coeffs.a_coef = Coef::PerElement(vec![1.0, 2.0]);
        assert!(eigencurve_oracle_1d(&coeffs, 0.0, 1).is_err());
    }

    #[test]
    fn nemytskii_apply_examples() {
        let u = DVector::from_vec(vec![0.0, PI / 2.0, PI]);
        let v = nemytskii_apply(&NemytskiiFn::Sin, &u);
        assert_relative_eq!(v[0], 0.0);
        assert_relative_eq!(v[1], 1.0);
        assert_relative_eq!(v[2], 0.0, epsilon = 1e-15);
        let w = nemytskii_apply(&NemytskiiFn::Identity, &u);
        assert_eq!(w, u);
        let t = nemytskii_apply(&NemytskiiFn::Tanh, &DVector::from_vec(vec![-3.0, 0.4, 9.0]));
        assert!(t.iter().all(|&x| x > -1.0 && x < 1.0));
    }

    #[test]
    fn nemytskii_check_sin_bounded_ratio() {
        let mesh = Mesh1D::uniform(64, [0.0, 1.0]).unwrap();
        let u = mesh.interpolate(|x| x);
        let h = mesh.interpolate(|x| x * (1.0 - x));
        let report = nemytskii_derivative_check(&mesh, &NemytskiiFn::Sin, &u, &h, 8);
        assert!(report.pass, "{report:?}");
    }

    #[test]
    fn nemytskii_check_affine_exact() {
        let mesh = Mesh1D::uniform(32, [0.0, 1.0]).unwrap();
        let u = mesh.interpolate(|x| x);
        let h = mesh.interpolate(|x| x * (1.0 - x));
        let f = NemytskiiFn::Affine { a: 0.3, b: -1.7 };
        let report = nemytskii_derivative_check(&mesh, &f, &u, &h, 8);
        assert!(report.pass);
        assert!(report.rows.iter().all(|r| r.remainder_norm <= 1e-12));
    }

    #[test]
    fn nemytskii_check_quadratic_constant_ratio() {
        let mesh = Mesh1D::uniform(32, [0.0, 1.0]).unwrap();
        let u = mesh.interpolate(|x| 0.5 * x);
        let h = mesh.interpolate(|x| 0.25 * x * (1.0 - x));
        let report = nemytskii_derivative_check(&mesh, &NemytskiiFn::Quadratic, &u, &h, 8);
        assert!(report.pass);
        // Exact quadratic remainder: all ratios equal.
        assert_relative_eq!(report.max_ratio, report.min_ratio, max_relative = 1e-9);
    }

    #[test]
    fn nonuniform_mesh_assembly() {
        let mesh = Mesh1D::from_nodes(vec![0.0, 0.1, 0.35, 0.6, 1.0]).unwrap();
        assert_eq!(mesh.n_elems(), 4);
        let triple = assemble_forms(&mesh, &unit_coeffs()).unwrap();
        assert!(triple.validate().pass);
        // Total mass is the interval length regardless of grading.
        let ones = DVector::from_element(5, 1.0);
        let mass = (triple.m() * &ones).dot(&ones);
        assert_relative_eq!(mass, 1.0, epsilon = 1e-14);
        // Constants are stiffness-free.
        let k = mesh.unit_stiffness();
        assert_relative_eq!((k * &ones).norm(), 0.0, epsilon = 1e-13);

        assert!(Mesh1D::from_nodes(vec![0.0, 0.5, 0.5, 1.0]).is_err());
        assert!(Mesh1D::from_nodes(vec![0.0]).is_err());
    }

    #[test]
    fn boundary_nemytskii_term_hits_endpoints_only() {
        use crate::nonlinear::NonlinearSpec;
        let mesh = Mesh1D::uniform(4, [0.0, 1.0]).unwrap();
        let term = build_nemytskii_term(&mesh, NemytskiiFn::Quadratic, NemytskiiLocation::Boundary);
        let spec = NonlinearSpec {
            affine: None,
            power_terms: vec![],
            nemytskii: Some(term),
        };
        let u = DVector::from_vec(vec![2.0, 5.0, 7.0, 11.0, 3.0]);
        let f = spec.eval_f(&u);
        assert_relative_eq!(f[0], 4.0);
        assert_relative_eq!(f[4], 9.0);
        assert_eq!(f.rows(1, 3).norm(), 0.0);
        // The Jacobian is the derivative of that map.
        let df = spec.eval_df(&u);
        assert_relative_eq!(df[(0, 0)], 4.0);
        assert_relative_eq!(df[(4, 4)], 6.0);
        assert_relative_eq!(df.norm(), (16.0f64 + 36.0).sqrt());
    }

    #[test]
    fn refinement_converges_for_mu1() {
        // mu_1(0) approaches the oracle value quadratically under refinement.
        let coeffs = unit_coeffs();
        let oracle = eigencurve_oracle_1d(&coeffs, 0.5, 1).unwrap();
        let mut errs = Vec::new();
        for n in [16usize, 32, 64] {
            let mesh = Mesh1D::uniform(n, [0.0, 1.0]).unwrap();
            let triple = assemble_forms(&mesh, &coeffs).unwrap();
            let data = crate::spectrum::canonical_data(&triple, 0.5).unwrap();
            errs.push((data.mu()[0] - oracle).abs());
        }
        assert!(errs[0] > errs[1] && errs[1] > errs[2]);
        let rate = (errs[0] / errs[2]).log2() / 2.0;
        assert!((1.7..=2.3).contains(&rate), "rate {rate}");
    }
}
