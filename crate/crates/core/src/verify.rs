//! Built-in invariant suites behind the `verify` command: orthonormality and
//! residual checks on the spectral data, the a-priori bound inequalities,
//! solver cross-agreement, and the superposition-derivative check.

use nalgebra::{DMatrix, DVector};
use rand::Rng;
use rand_chacha::rand_core::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::error::Result;
use crate::forms::{find_coercive_shift, shifted_form, BasisMeta, FormTriple};
use crate::linear::{bound_below_first, bound_between, solve_nonresonant};
use crate::nonlinear::{newton_solve_nonresonant, picard_solve, NonlinearSpec, PowerTerm};
use crate::spectrum::{canonical_data, verify_tau_invariance, SpectralData};
use crate::steklov::{nemytskii_derivative_check, Mesh1D, NemytskiiFn};

#[derive(Debug, Clone)]
pub struct PropertyCheck {
    pub name: String,
    pub pass: bool,
    pub detail: String,
}

#[derive(Debug, Clone)]
pub struct SuiteReport {
    pub suite: String,
    pub checks: Vec<PropertyCheck>,
}

impl SuiteReport {
    pub fn pass(&self) -> bool {
        self.checks.iter().all(|c| c.pass)
    }
}

fn check(name: &str, pass: bool, detail: String) -> PropertyCheck {
    PropertyCheck {
        name: name.to_string(),
        pass,
        detail,
    }
}

/// Deterministic random triple: A and M are well-conditioned SPD, B is a
/// symmetric indefinite perturbation.
pub fn random_triple(n: usize, rng: &mut impl Rng) -> FormTriple {
    let gauss = |rng: &mut dyn rand::RngCore| -> f64 {
        // Box-Muller from two uniforms.
        let u1: f64 = rng.gen_range(f64::EPSILON..1.0);
        let u2: f64 = rng.gen_range(0.0..1.0);
        (-2.0 * u1.ln()).sqrt() * (2.0 * std::f64::consts::PI * u2).cos()
    };
    let mut rand_mat = |scale: f64| {
        DMatrix::from_fn(n, n, |_, _| gauss(rng) * scale)
    };
    let g = rand_mat(1.0);
    let a = &g * g.transpose() / n as f64 + DMatrix::identity(n, n);
    let hb = rand_mat(1.0);
    let b = (&hb + hb.transpose()) * 0.5;
    let k = rand_mat(1.0);
    let m = &k * k.transpose() / n as f64 + DMatrix::identity(n, n);
    FormTriple::new(a, b, m, BasisMeta::UserSupplied).expect("construction is SPD by design")
}

/// Random functional with entries in [-1, 1].
pub fn random_functional(n: usize, rng: &mut impl Rng) -> DVector<f64> {
    DVector::from_fn(n, |_, _| rng.gen_range(-1.0..1.0))
}

fn orthonormality_defect(gram: &DMatrix<f64>) -> f64 {
    let n = gram.nrows();
    let mut defect = 0.0f64;
    for i in 0..n {
        for j in 0..n {
            let target = if i == j { 1.0 } else { 0.0 };
            defect = defect.max((gram[(i, j)] - target).abs());
        }
    }
    defect
}

fn spectral_checks(data: &SpectralData, checks: &mut Vec<PropertyCheck>) {
    let triple = data.triple();
    let n = data.dim();

    let gram_m = data.e_canon().transpose() * triple.m() * data.e_canon();
    let d = orthonormality_defect(&gram_m);
    checks.push(check(
        "m-orthonormality of e_k",
        d <= 1e-9,
        format!("max |e_i^T M e_j - delta| = {d:.3e}"),
    ));

    let s = shifted_form(triple, data.lambda(), data.tau()).expect("stored tau is admissible");
    let gram_s = data.e_shift().transpose() * s.matrix() * data.e_shift();
    let d = orthonormality_defect(&gram_s);
    checks.push(check(
        "S-orthonormality of e_tilde_k",
        d <= 1e-9,
        format!("max |et_i^T S et_j - delta| = {d:.3e}"),
    ));

    let mut rel = 0.0f64;
    for k in 0..n {
        let et = data.e_shift().column(k).into_owned();
        let e = data.canonical_vec(k);
        let diff = (&e - et * data.mu_tilde()[k].sqrt()).amax();
        rel = rel.max(diff);
    }
    checks.push(check(
        "canonical scaling e_k = sqrt(mu_tilde_k) e_tilde_k",
        rel <= 1e-9,
        format!("max coordinate defect = {rel:.3e}"),
    ));

    let mut positive = true;
    for k in 0..n {
        if data.mu_tilde()[k] <= 0.0 {
            positive = false;
        }
    }
    checks.push(check(
        "positivity of mu_tilde",
        positive,
        format!("min mu_tilde = {:.6e}", data.mu_tilde().min()),
    ));

    let mut rayleigh = 0.0f64;
    for k in 0..n {
        let et = data.e_shift().column(k).into_owned();
        let num = (s.matrix() * &et).dot(&et);
        let den = (triple.m() * &et).dot(&et);
        rayleigh = rayleigh.max(((num / den) - data.mu_tilde()[k]).abs() / data.mu_tilde()[k].abs());
    }
    checks.push(check(
        "Rayleigh identity",
        rayleigh <= 1e-9,
        format!("max relative defect = {rayleigh:.3e}"),
    ));

    let mut resid = 0.0f64;
    for k in 0..n {
        let pencil = triple.pencil(data.lambda(), data.mu()[k]);
        let e = data.canonical_vec(k);
        let r = (&pencil * &e).norm() / (pencil.norm() * e.norm());
        resid = resid.max(r);
    }
    checks.push(check(
        "eigenequation residual",
        resid <= 1e-8,
        format!("max normalized residual = {resid:.3e}"),
    ));
}

/// Spectral-data invariants plus the tau-invariance identities on `triple`.
pub fn spectrum_suite(triple: &FormTriple, lambda: f64) -> Result<SuiteReport> {
    let mut checks = Vec::new();
    let data = canonical_data(triple, lambda)?;
    spectral_checks(&data, &mut checks);

    let tau1 = data.tau() + 1.0;
    let tau2 = data.tau() + 3.0;
    let inv = verify_tau_invariance(triple, lambda, tau1, tau2)?;
    checks.push(check(
        "tau-invariance of mu_k",
        inv.pass_mu,
        format!("max |mu(tau1) - mu(tau2)| = {:.3e}", inv.max_mu_diff),
    ));
    checks.push(check(
        "mu_tilde shift relation",
        inv.pass_shift,
        format!("max shift defect = {:.3e}", inv.max_shift_defect),
    ));
    checks.push(check(
        "tau-invariance of eigenvectors",
        inv.pass_eigvec,
        format!("max vector/projector difference = {:.3e}", inv.max_eigvec_diff),
    ));

    Ok(SuiteReport {
        suite: "spectrum".into(),
        checks,
    })
}

/// Randomized first-gap and interior-gap bound checks and the Parseval identity on
/// `triple`.
pub fn bounds_suite(triple: &FormTriple, seed: u64, trials: usize) -> Result<SuiteReport> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut checks = Vec::new();
    let lambda = 0.0;
    let data = canonical_data(triple, lambda)?;
    let tau = data.tau();
    let n = triple.dim();
    let mu1 = data.mu()[0];

    // Admissible shifts must also cover mu: tau >= -mu.
    let shift_for = |mu: f64| if mu + tau < 0.0 { 1.0 - mu } else { tau };

    let mut below_ok = 0usize;
    let mut min_slack = f64::INFINITY;
    for _ in 0..trials {
        let ell = random_functional(n, &mut rng);
        let mu = mu1 - rng.gen_range(0.05..2.0);
        let report = bound_below_first(&data, mu, &ell, shift_for(mu))?;
        if report.pass {
            below_ok += 1;
        }
        min_slack = min_slack.min(report.slack);
    }
    checks.push(check(
        "first-gap bound",
        below_ok == trials,
        format!("{below_ok}/{trials} trials, min slack = {min_slack:.3e}"),
    ));

    // Widest interior gap hosts the between-bound trials.
    let mut k0_best = None;
    let mut width = 0.0;
    for k in 1..n {
        let w = data.mu()[k] - data.mu()[k - 1];
        if w > width {
            width = w;
            k0_best = Some(k);
        }
    }
    if let Some(k0) = k0_best.filter(|_| width > 1e-6) {
        let lo = data.mu()[k0 - 1];
        let mut between_ok = 0usize;
        let mut min_slack = f64::INFINITY;
        for _ in 0..trials {
            let ell = random_functional(n, &mut rng);
            let mu = lo + width * rng.gen_range(0.1..0.9);
            let report = bound_between(&data, mu, &ell, shift_for(mu), k0)?;
            if report.pass {
                between_ok += 1;
            }
            min_slack = min_slack.min(report.slack);
        }
        checks.push(check(
            "interior-gap bound",
            between_ok == trials,
            format!("{between_ok}/{trials} trials, min slack = {min_slack:.3e}"),
        ));
    }

    // Parseval: sum of shifted-basis coefficients squared = energy norm^2.
    let shifted = find_coercive_shift(triple, lambda)?;
    let mut parseval = 0.0f64;
    for _ in 0..trials.min(20) {
        let ell = random_functional(n, &mut rng);
        let mu = mu1 - rng.gen_range(0.05..2.0);
        let sol = solve_nonresonant(&data, mu, &ell)?;
        let coeffs = data.e_shift().transpose() * shifted.matrix() * &sol.u;
        let sum: f64 = coeffs.iter().map(|c| c * c).sum();
        let energy = shifted.energy_norm(&sol.u).powi(2);
        parseval = parseval.max((sum - energy).abs() / (1.0 + energy));
    }
    checks.push(check(
        "Parseval identity",
        parseval <= 1e-9,
        format!("max relative defect = {parseval:.3e}"),
    ));

    // Riesz identity ties dual and energy norms together.
    let mut riesz = 0.0f64;
    for _ in 0..trials.min(20) {
        let u = random_functional(n, &mut rng);
        let su = shifted.matrix() * &u;
        riesz = riesz
            .max((shifted.dual_norm(&su) - shifted.energy_norm(&u)).abs() / shifted.energy_norm(&u));
    }
    checks.push(check(
        "Riesz identity",
        riesz <= 1e-10,
        format!("max relative defect = {riesz:.3e}"),
    ));

    Ok(SuiteReport {
        suite: "bounds".into(),
        checks,
    })
}

/// Nonresonant solver agreement and the zero-branch exactness checks.
pub fn nonlinear_suite(triple: &FormTriple, seed: u64) -> Result<SuiteReport> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut checks = Vec::new();
    let lambda = 0.0;
    let data = canonical_data(triple, lambda)?;
    let n = triple.dim();
    let mu = data.mu()[0] - 0.7;

    // Scale with dimension so the sweep stays inside the contraction ball:
    // modal coefficients of an O(1) functional grow like sqrt(n).
    let scale = 1.0 / n as f64;
    let ell0 = random_functional(n, &mut rng) * scale;
    let ellp = random_functional(n, &mut rng) * scale;
    let spec = NonlinearSpec {
        affine: Some(ell0),
        power_terms: vec![PowerTerm::new(0.6, ellp, 3.0).expect("p > 2")],
        nemytskii: None,
    };

    let mut agree = 0.0f64;
    let mut shrink_ok = true;
    let mut prev_norm = f64::INFINITY;
    for eps in [0.2, 0.1, 0.05, 0.025] {
        let newton = newton_solve_nonresonant(&data, mu, &spec, eps, &DVector::zeros(n))?;
        let picard = picard_solve(&data, mu, &spec, eps, &DVector::zeros(n), 1e-13, 500)?;
        agree = agree.max((&newton.u - &picard.u).norm() / (1.0 + newton.u.norm()));
        if newton.u.norm() >= prev_norm {
            shrink_ok = false;
        }
        prev_norm = newton.u.norm();
    }
    checks.push(check(
        "picard/newton agreement",
        agree <= 1e-8,
        format!("max relative disagreement = {agree:.3e}"),
    ));
    checks.push(check(
        "solution norm shrinks with eps",
        shrink_ok,
        format!("final norm = {prev_norm:.3e}"),
    ));

    let pure = NonlinearSpec {
        affine: None,
        power_terms: spec.power_terms.clone(),
        nemytskii: None,
    };
    let start = DVector::from_fn(n, |_, _| rng.gen_range(-0.01..0.01));
    let sol = newton_solve_nonresonant(&data, mu, &pure, 0.05, &start)?;
    checks.push(check(
        "zero branch from small starts",
        sol.u.norm() <= 1e-10,
        format!("norm = {:.3e}", sol.u.norm()),
    ));

    Ok(SuiteReport {
        suite: "nonlinear".into(),
        checks,
    })
}

/// Superposition derivative checks for sin, tanh and an affine function.
pub fn nemytskii_suite(mesh: &Mesh1D) -> Result<SuiteReport> {
    let mut checks = Vec::new();
    let u = mesh.interpolate(|x| x);
    let h = mesh.interpolate(|x| x * (1.0 - x));
    for func in [NemytskiiFn::Sin, NemytskiiFn::Tanh] {
        let report = nemytskii_derivative_check(mesh, &func, &u, &h, 8);
        checks.push(check(
            &format!("quadratic remainder for {}", func.name()),
            report.pass,
            format!(
                "ratio band [{:.3e}, {:.3e}]",
                report.min_ratio, report.max_ratio
            ),
        ));
    }
    let affine = NemytskiiFn::Affine { a: 0.5, b: 2.0 };
    let report = nemytskii_derivative_check(mesh, &affine, &u, &h, 8);
    let max_rem = report
        .rows
        .iter()
        .map(|r| r.remainder_norm)
        .fold(0.0f64, f64::max);
    checks.push(check(
        "affine remainder vanishes",
        max_rem <= 1e-12,
        format!("max remainder = {max_rem:.3e}"),
    ));
    Ok(SuiteReport {
        suite: "nemytskii".into(),
        checks,
    })
}
