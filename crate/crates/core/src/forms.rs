//! Symmetric bilinear-form triples (a, b, m) on a finite Galerkin basis and
//! the coercive shifted forms a - lambda*b + tau*m built from them.

use std::fmt;

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Relative symmetry tolerance for input matrices.
pub const SYMMETRY_RTOL: f64 = 1e-12;

/// Minimum-pivot acceptance factor used by the coercive shift search:
/// the smallest Cholesky pivot must be at least `PIVOT_RTOL * trace(S)/n`.
pub const PIVOT_RTOL: f64 = 1e-10;

/// Provenance tag for the Galerkin basis a triple was assembled on.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum BasisMeta {
    Toy,
    Steklov1d,
    UserSupplied,
}

#[derive(Debug, Clone, Copy)]
pub struct SymmetryCheck {
    /// max |X_ij - X_ji| relative to the largest |X_ij|.
    pub max_rel_defect: f64,
    pub pass: bool,
}

#[derive(Debug, Clone, Copy)]
pub struct DefinitenessCheck {
    pub pass: bool,
    /// Smallest pivot seen by the factorization; for a failed factorization
    /// this is the first nonpositive pivot encountered.
    pub min_pivot: f64,
}

/// Outcome of the structural checks (symmetry of all three matrices,
/// positive definiteness of A and M) on a candidate triple.
#[derive(Debug, Clone)]
pub struct ValidationReport {
    pub dim: usize,
    pub symmetry_a: SymmetryCheck,
    pub symmetry_b: SymmetryCheck,
    pub symmetry_m: SymmetryCheck,
    pub positive_definite_a: DefinitenessCheck,
    pub positive_definite_m: DefinitenessCheck,
    pub pass: bool,
}

impl ValidationReport {
    /// Validates raw matrices before a `FormTriple` is constructed.
    pub fn for_matrices(a: &DMatrix<f64>, b: &DMatrix<f64>, m: &DMatrix<f64>) -> Result<Self> {
        let n = a.nrows();
        if n == 0 {
            return Err(Error::DimensionMismatch("empty matrices".into()));
        }
        for (name, x) in [("A", a), ("B", b), ("M", m)] {
            if x.nrows() != n || x.ncols() != n {
                return Err(Error::DimensionMismatch(format!(
                    "{name} is {}x{}, expected {n}x{n}",
                    x.nrows(),
                    x.ncols()
                )));
            }
        }
        let symmetry_a = symmetry_check(a);
        let symmetry_b = symmetry_check(b);
        let symmetry_m = symmetry_check(m);
        let positive_definite_a = definiteness_check(&symmetrize(a));
        let positive_definite_m = definiteness_check(&symmetrize(m));
        let pass = symmetry_a.pass
            && symmetry_b.pass
            && symmetry_m.pass
            && positive_definite_a.pass
            && positive_definite_m.pass;
        Ok(Self {
            dim: n,
            symmetry_a,
            symmetry_b,
            symmetry_m,
            positive_definite_a,
            positive_definite_m,
            pass,
        })
    }
}

impl fmt::Display for ValidationReport {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let s = |c: &SymmetryCheck| if c.pass { "pass" } else { "FAIL" };
        let d = |c: &DefinitenessCheck| if c.pass { "pass" } else { "FAIL" };
        writeln!(f, "triple validation (dim {}):", self.dim)?;
        writeln!(
            f,
            "  symmetry A: {} (rel defect {:.3e})",
            s(&self.symmetry_a),
            self.symmetry_a.max_rel_defect
        )?;
        writeln!(
            f,
            "  symmetry B: {} (rel defect {:.3e})",
            s(&self.symmetry_b),
            self.symmetry_b.max_rel_defect
        )?;
        writeln!(
            f,
            "  symmetry M: {} (rel defect {:.3e})",
            s(&self.symmetry_m),
            self.symmetry_m.max_rel_defect
        )?;
        writeln!(
            f,
            "  A positive definite: {} (min pivot {:.3e})",
            d(&self.positive_definite_a),
            self.positive_definite_a.min_pivot
        )?;
        writeln!(
            f,
            "  M positive definite: {} (min pivot {:.3e})",
            d(&self.positive_definite_m),
            self.positive_definite_m.min_pivot
        )?;
        write!(f, "  overall: {}", if self.pass { "pass" } else { "FAIL" })
    }
}

fn symmetry_check(x: &DMatrix<f64>) -> SymmetryCheck {
    let scale = x.iter().fold(0.0f64, |acc, v| acc.max(v.abs()));
    let mut defect = 0.0f64;
    for i in 0..x.nrows() {
        for j in (i + 1)..x.ncols() {
            defect = defect.max((x[(i, j)] - x[(j, i)]).abs());
        }
    }
    let rel = if scale > 0.0 { defect / scale } else { 0.0 };
    SymmetryCheck {
        max_rel_defect: rel,
        pass: rel <= SYMMETRY_RTOL,
    }
}

fn definiteness_check(x: &DMatrix<f64>) -> DefinitenessCheck {
    match cholesky_lower(x) {
        Ok(f) => DefinitenessCheck {
            pass: true,
            min_pivot: f.min_pivot,
        },
        Err(pivot) => DefinitenessCheck {
            pass: false,
            min_pivot: pivot,
        },
    }
}

fn symmetrize(x: &DMatrix<f64>) -> DMatrix<f64> {
    (x + x.transpose()) * 0.5
}

/// The triple (a, b, m) restricted to a Galerkin basis: three symmetric
/// matrices with a and m positive definite, b unrestricted.
///
/// Construction validates symmetry and definiteness and symmetrizes the
/// stored matrices, so downstream algebra sees exactly symmetric data.
#[derive(Debug, Clone)]
pub struct FormTriple {
    dim: usize,
    a: DMatrix<f64>,
    b: DMatrix<f64>,
    m: DMatrix<f64>,
    basis_meta: BasisMeta,
}

impl FormTriple {
    pub fn new(
        a: DMatrix<f64>,
        b: DMatrix<f64>,
        m: DMatrix<f64>,
        basis_meta: BasisMeta,
    ) -> Result<Self> {
        let report = ValidationReport::for_matrices(&a, &b, &m)?;
        if !report.pass {
            return Err(Error::TripleInvalid(report));
        }
        Ok(Self {
            dim: a.nrows(),
            a: symmetrize(&a),
            b: symmetrize(&b),
            m: symmetrize(&m),
            basis_meta,
        })
    }

    /// The 2x2 triple A = I, B = diag(1, -1), M = I used throughout the tests.
    pub fn toy() -> Self {
        Self::new(
            DMatrix::identity(2, 2),
            DMatrix::from_diagonal(&DVector::from_vec(vec![1.0, -1.0])),
            DMatrix::identity(2, 2),
            BasisMeta::Toy,
        )
        .expect("toy triple is valid")
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn a(&self) -> &DMatrix<f64> {
        &self.a
    }

    pub fn b(&self) -> &DMatrix<f64> {
        &self.b
    }

    pub fn m(&self) -> &DMatrix<f64> {
        &self.m
    }

    pub fn basis_meta(&self) -> BasisMeta {
        self.basis_meta
    }

    /// Re-runs the structural checks on the stored (already symmetrized) data.
    pub fn validate(&self) -> ValidationReport {
        ValidationReport::for_matrices(&self.a, &self.b, &self.m)
            .expect("dimensions are consistent by construction")
    }

    /// A - lambda*B - mu*M, the operator of the linear Fredholm equation.
    pub fn pencil(&self, lambda: f64, mu: f64) -> DMatrix<f64> {
        &self.a - &self.b * lambda - &self.m * mu
    }

    /// m-inner product of two coefficient vectors.
    pub fn m_inner(&self, u: &DVector<f64>, v: &DVector<f64>) -> f64 {
        (&self.m * v).dot(u)
    }

    /// m-norm of a coefficient vector.
    pub fn m_norm(&self, u: &DVector<f64>) -> f64 {
        self.m_inner(u, u).max(0.0).sqrt()
    }
}

/// Validates the structural requirements for a triple.
pub fn validate_triple(triple: &FormTriple) -> ValidationReport {
    triple.validate()
}

/// Lower-triangular Cholesky factor with pivot bookkeeping.
#[derive(Debug, Clone)]
pub struct CholFactor {
    l: DMatrix<f64>,
    min_pivot: f64,
}

impl CholFactor {
    pub fn lower(&self) -> &DMatrix<f64> {
        &self.l
    }

    /// Smallest pivot d_j = L_jj^2 seen during factorization.
    pub fn min_pivot(&self) -> f64 {
        self.min_pivot
    }

    /// Solves L y = rhs in place.
    pub fn forward_solve(&self, rhs: &DVector<f64>) -> DVector<f64> {
        let n = self.l.nrows();
        let mut y = rhs.clone();
        for i in 0..n {
            for k in 0..i {
                y[i] -= self.l[(i, k)] * y[k];
            }
            y[i] /= self.l[(i, i)];
        }
        y
    }

    /// Solves L^T x = rhs.
    pub fn backward_solve(&self, rhs: &DVector<f64>) -> DVector<f64> {
        let n = self.l.nrows();
        let mut x = rhs.clone();
        for i in (0..n).rev() {
            for k in (i + 1)..n {
                x[i] -= self.l[(k, i)] * x[k];
            }
            x[i] /= self.l[(i, i)];
        }
        x
    }

    /// Solves (L L^T) x = rhs.
    pub fn solve(&self, rhs: &DVector<f64>) -> DVector<f64> {
        self.backward_solve(&self.forward_solve(rhs))
    }

    /// Solves L Y = RHS column-wise.
    pub fn forward_solve_mat(&self, rhs: &DMatrix<f64>) -> DMatrix<f64> {
        self.l
            .solve_lower_triangular(rhs)
            .expect("factor diagonal is strictly positive")
    }

    /// Solves L^T X = RHS column-wise.
    pub fn backward_solve_mat(&self, rhs: &DMatrix<f64>) -> DMatrix<f64> {
        self.l
            .tr_solve_lower_triangular(rhs)
            .expect("factor diagonal is strictly positive")
    }
}

/// Dense Cholesky of a symmetric matrix, left-looking over columns (the
/// storage is column-major). Returns the first nonpositive pivot as the
/// error value when the matrix is not positive definite.
pub fn cholesky_lower(s: &DMatrix<f64>) -> std::result::Result<CholFactor, f64> {
    let n = s.nrows();
    let mut l = DMatrix::zeros(n, n);
    let mut min_pivot = f64::INFINITY;
    let data = l.as_mut_slice();
    let src = s.as_slice();
    for j in 0..n {
        for i in j..n {
            data[j * n + i] = src[j * n + i];
        }
        for k in 0..j {
            let f = data[k * n + j];
            if f != 0.0 {
                for i in j..n {
                    data[j * n + i] -= f * data[k * n + i];
                }
            }
        }
        let d = data[j * n + j];
        if d <= 0.0 {
            return Err(d);
        }
        min_pivot = min_pivot.min(d);
        let ljj = d.sqrt();
        data[j * n + j] = ljj;
        for i in (j + 1)..n {
            data[j * n + i] /= ljj;
        }
    }
    Ok(CholFactor { l, min_pivot })
}

/// A coercive shifted form S = A - lambda*B + tau*M together with its
/// Cholesky factorization.
#[derive(Debug, Clone)]
pub struct ShiftedForm {
    lambda: f64,
    tau: f64,
    s: DMatrix<f64>,
    chol: CholFactor,
    min_eig_estimate: f64,
}

impl ShiftedForm {
    pub fn lambda(&self) -> f64 {
        self.lambda
    }

    pub fn tau(&self) -> f64 {
        self.tau
    }

    pub fn matrix(&self) -> &DMatrix<f64> {
        &self.s
    }

    pub fn chol(&self) -> &CholFactor {
        &self.chol
    }

    pub fn min_eig_estimate(&self) -> f64 {
        self.min_eig_estimate
    }

    pub fn dim(&self) -> usize {
        self.s.nrows()
    }

    /// Energy norm sqrt(u^T S u) induced by the shifted form.
    pub fn energy_norm(&self, u: &DVector<f64>) -> f64 {
        assert_eq!(u.len(), self.dim(), "energy_norm: dimension mismatch");
        (&self.s * u).dot(u).max(0.0).sqrt()
    }

    /// Dual norm sqrt(l^T S^-1 l) of a functional given by its values on the
    /// basis; equals the supremum of l(v) over energy-norm-one v.
    pub fn dual_norm(&self, ell: &DVector<f64>) -> f64 {
        assert_eq!(ell.len(), self.dim(), "dual_norm: dimension mismatch");
        self.chol.forward_solve(ell).norm()
    }

    /// Solves S x = rhs via the cached factorization.
    pub fn solve(&self, rhs: &DVector<f64>) -> DVector<f64> {
        self.chol.solve(rhs)
    }
}

/// Builds S = A - lambda*B + tau*M and certifies coercivity by factorization.
pub fn shifted_form(triple: &FormTriple, lambda: f64, tau: f64) -> Result<ShiftedForm> {
    let s = triple.a() - triple.b() * lambda + triple.m() * tau;
    match cholesky_lower(&s) {
        Ok(chol) => {
            let min_eig_estimate = chol.min_pivot();
            Ok(ShiftedForm {
                lambda,
                tau,
                s,
                chol,
                min_eig_estimate,
            })
        }
        Err(pivot) => Err(Error::NotCoercive {
            lambda,
            tau,
            min_eig_estimate: pivot,
        }),
    }
}

/// Doubling search for the first tau in 1, 2, 4, ... making the shifted form
/// coercive with minimum pivot at least `PIVOT_RTOL * trace(S)/n`.
pub fn find_coercive_shift(triple: &FormTriple, lambda: f64) -> Result<ShiftedForm> {
    let n = triple.dim() as f64;
    let mut tau = 1.0f64;
    while tau <= 2f64.powi(60) {
        if let Ok(form) = shifted_form(triple, lambda, tau) {
            let threshold = PIVOT_RTOL * form.matrix().trace() / n;
            if form.chol().min_pivot() >= threshold {
                return Ok(form);
            }
        }
        tau *= 2.0;
    }
    Err(Error::ShiftSearchExceeded { lambda })
}
