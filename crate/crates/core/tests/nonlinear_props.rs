//! Nonlinear solver properties: derivative consistency by finite differences,
//! agreement of Picard, Newton-on-G and the brute-force full-system oracle,
//! eps-sweep behavior, and the resonant branch through a bifurcation point.

mod common;

use nalgebra::{DMatrix, DVector};
use rand::Rng;
use rand_chacha::rand_core::SeedableRng;
use rand_chacha::ChaCha8Rng;

use fredholm_core::nonlinear::{
    find_bifurcation_point, injectivity_check, lambda_operator, newton_solve_nonresonant,
    newton_solve_resonant, picard_solve, residual, side_condition_defect, NonlinearSpec, PowerTerm,
};
use fredholm_core::spectrum::{canonical_data, resonance_group, ResonanceGroup};
use fredholm_core::steklov::functional_value;
use fredholm_core::verify::{random_functional, random_triple};
use fredholm_core::FormTriple;

fn random_spec(n: usize, rng: &mut impl Rng) -> NonlinearSpec {
    NonlinearSpec {
        affine: Some(random_functional(n, rng)),
        power_terms: vec![
            PowerTerm::new(rng.gen_range(0.2..1.0), random_functional(n, rng), 3.0).unwrap(),
            PowerTerm::new(rng.gen_range(-1.0..-0.2), random_functional(n, rng), 4.0).unwrap(),
        ],
        nemytskii: None,
    }
}

#[test]
fn eval_df_is_the_derivative_of_eval_f() {
    let mut rng = ChaCha8Rng::seed_from_u64(2);
    for _ in 0..10 {
        let n = 8;
        let spec = random_spec(n, &mut rng);
        let u = random_functional(n, &mut rng);
        let h0 = random_functional(n, &mut rng) * 0.1;
        let df = spec.eval_df(&u);
        let f0 = spec.eval_f(&u);
        let mut ratios = Vec::new();
        for j in 0..6 {
            let h = &h0 * 0.5f64.powi(j);
            let rem = (spec.eval_f(&(&u + &h)) - &f0 - &df * &h).norm();
            ratios.push(rem / h.norm_squared());
        }
        let max = ratios.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
        let min = ratios.iter().cloned().fold(f64::INFINITY, f64::min);
        assert!(max / min.max(1e-300) <= 10.0, "ratios {ratios:?}");
    }
}

#[test]
fn functional_gradient_matches_power_part() {
    // Central differences of the functional value reproduce the power part of
    // F(u, v) with O(step^2) error.
    let mut rng = ChaCha8Rng::seed_from_u64(4);
    let n = 6;
    let terms = vec![
        PowerTerm::new(0.8, random_functional(n, &mut rng), 3.0).unwrap(),
        PowerTerm::new(0.5, random_functional(n, &mut rng), 4.0).unwrap(),
    ];
    let spec = NonlinearSpec {
        affine: None,
        power_terms: terms.clone(),
        nemytskii: None,
    };
    let u = random_functional(n, &mut rng);
    let v = random_functional(n, &mut rng);
    let grad_v = spec.eval_f(&u).dot(&v);
    let mut errs = Vec::new();
    for j in 0..4 {
        let step = 1e-3 * 0.5f64.powi(j);
        let fp = functional_value(&terms, &(&u + &v * step));
        let fm = functional_value(&terms, &(&u - &v * step));
        errs.push(((fp - fm) / (2.0 * step) - grad_v).abs());
    }
    for j in 1..errs.len() {
        // Quadratic decay, allowing generous slack for rounding.
        assert!(errs[j] <= errs[j - 1] * 0.3 + 1e-12, "errs {errs:?}");
    }
}

#[test]
fn convexity_of_power_functional() {
    let mut rng = ChaCha8Rng::seed_from_u64(14);
    let n = 6;
    let terms = vec![
        PowerTerm::new(0.8, random_functional(n, &mut rng), 3.0).unwrap(),
        PowerTerm::new(0.5, random_functional(n, &mut rng), 4.0).unwrap(),
    ];
    for _ in 0..50 {
        let u = random_functional(n, &mut rng);
        let w = random_functional(n, &mut rng);
        for theta in [0.25, 0.5, 0.75] {
            let mix = &u * theta + &w * (1.0 - theta);
            let lhs = functional_value(&terms, &mix);
            let rhs = theta * functional_value(&terms, &u)
                + (1.0 - theta) * functional_value(&terms, &w);
            assert!(lhs <= rhs + 1e-12, "convexity violated: {lhs} > {rhs}");
        }
    }
}

#[test]
fn solvers_agree_with_full_system_oracle() {
    let mut rng = ChaCha8Rng::seed_from_u64(8);
    for trial in 0..10 {
        let n = 10;
        let triple = random_triple(n, &mut rng);
        let data = canonical_data(&triple, 0.2).unwrap();
        let mu = data.mu()[0] - 0.8;
        let spec = random_spec(n, &mut rng);
        let eps = 0.05;
        let zeros = DVector::zeros(n);

        let newton = newton_solve_nonresonant(&data, mu, &spec, eps, &zeros).unwrap();
        let picard = picard_solve(&data, mu, &spec, eps, &zeros, 1e-13, 500).unwrap();
        let oracle =
            common::full_system_newton(&triple, 0.2, mu, &spec, eps, &zeros, None).unwrap();

        let d1 = (&newton.u - &picard.u).norm() / (1.0 + newton.u.norm());
        let d2 = (&newton.u - &oracle).norm() / (1.0 + newton.u.norm());
        assert!(d1 <= 1e-8, "trial {trial}: picard/newton {d1:.3e}");
        assert!(d2 <= 1e-8, "trial {trial}: newton/oracle {d2:.3e}");
        assert!(newton.residual <= 1e-8);
        assert!(picard.residual <= 1e-8);
    }
}

#[test]
fn eps_sweep_shrinks_toward_zero() {
    let mut rng = ChaCha8Rng::seed_from_u64(16);
    let n = 10;
    let triple = random_triple(n, &mut rng);
    let data = canonical_data(&triple, -0.1).unwrap();
    let mu = data.mu()[0] - 0.5;
    let spec = random_spec(n, &mut rng);
    let mut norms = Vec::new();
    let mut prev: Option<DVector<f64>> = None;
    let mut prev_gap = f64::INFINITY;
    for eps in [0.2, 0.1, 0.05, 0.025] {
        let sol = newton_solve_nonresonant(&data, mu, &spec, eps, &DVector::zeros(n)).unwrap();
        norms.push(sol.u.norm());
        if let Some(p) = prev {
            let gap = (&sol.u - &p).norm();
            assert!(gap < prev_gap, "continuity in eps violated");
            prev_gap = gap;
        }
        prev = Some(sol.u);
    }
    for w in norms.windows(2) {
        assert!(w[1] < w[0], "norms not decreasing: {norms:?}");
    }
}

#[test]
fn lambda_operator_matches_finite_differences() {
    // Synthetic |J| = 2 group out of the first two canonical vectors.
    let mut rng = ChaCha8Rng::seed_from_u64(23);
    let n = 8;
    let triple = random_triple(n, &mut rng);
    let data = canonical_data(&triple, 0.0).unwrap();
    let mut basis = DMatrix::zeros(n, 2);
    basis.set_column(0, &data.e_canon().column(0));
    basis.set_column(1, &data.e_canon().column(1));
    let group = ResonanceGroup {
        lambda: 0.0,
        mu: data.mu()[0],
        indices: vec![0, 1],
        basis,
        tol_used: 1e-8,
    };
    let spec = random_spec(n, &mut rng);
    let w = random_functional(n, &mut rng);
    let l = lambda_operator(&spec, &w, &group);
    let step = 1e-6;
    for r in 0..2 {
        let ej = group.basis.column(r).into_owned();
        for c in 0..2 {
            let ei = group.basis.column(c).into_owned();
            let fp = spec.eval_f(&(&w + &ei * step)).dot(&ej);
            let fm = spec.eval_f(&(&w - &ei * step)).dot(&ej);
            let fd = (fp - fm) / (2.0 * step);
            assert!(
                (l[(r, c)] - fd).abs() <= 1e-6 * (1.0 + fd.abs()),
                "entry ({r},{c}): {} vs fd {fd}",
                l[(r, c)]
            );
        }
    }
}

fn crafted_resonant_toy() -> (FormTriple, NonlinearSpec) {
    let triple = FormTriple::toy();
    let spec = NonlinearSpec {
        affine: Some(DVector::from_vec(vec![1.0, 0.5])),
        power_terms: vec![
            PowerTerm::new(-1.0, DVector::from_vec(vec![1.0, 0.0]), 3.0).unwrap(),
        ],
        nemytskii: None,
    };
    (triple, spec)
}

#[test]
fn resonant_branch_matches_constrained_oracle() {
    let (triple, spec) = crafted_resonant_toy();
    let data = canonical_data(&triple, 1.0).unwrap();
    let group = resonance_group(&data, 0.0, 1e-8).unwrap();
    let u0 = find_bifurcation_point(&group, &spec).unwrap();
    let (ok, cond) = injectivity_check(&lambda_operator(&spec, &u0, &group));
    assert!(ok, "condition estimate {cond}");

    for eps in [0.02, 0.01, -0.01] {
        let sol = newton_solve_resonant(&data, &group, &spec, eps, &u0).unwrap();
        assert!(sol.residual <= 1e-8);
        assert!(side_condition_defect(&group, &spec, &sol.u) <= 1e-8);
        let oracle = common::full_system_newton(
            &triple,
            1.0,
            0.0,
            &spec,
            eps,
            &u0,
            Some(&group),
        )
        .unwrap();
        let rel = (&sol.u - &oracle).norm() / (1.0 + oracle.norm());
        assert!(rel <= 1e-8, "eps {eps}: oracle disagreement {rel:.3e}");
        // Independent re-evaluation of the residual definition.
        let recomputed = residual(&triple, 1.0, 0.0, &spec, eps, &sol.u);
        assert!((recomputed - sol.residual).abs() <= 1e-14);
    }
}

#[test]
fn resonant_branch_linear_in_eps() {
    let (triple, spec) = crafted_resonant_toy();
    let data = canonical_data(&triple, 1.0).unwrap();
    let group = resonance_group(&data, 0.0, 1e-8).unwrap();
    let u0 = find_bifurcation_point(&group, &spec).unwrap();
    let mut ratios = Vec::new();
    for eps in [0.02, 0.01, 0.005, -0.005, -0.01, -0.02] {
        let sol = newton_solve_resonant(&data, &group, &spec, eps, &u0).unwrap();
        ratios.push((&sol.u - &u0).norm() / eps.abs());
    }
    let max = ratios.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    let min = ratios.iter().cloned().fold(f64::INFINITY, f64::min);
    assert!(max / min <= 2.0, "ratios {ratios:?}");
}

#[test]
fn picard_reports_non_contraction() {
    // Large eps breaks the contraction; the iteration must say so rather
    // than loop forever.
    let triple = FormTriple::toy();
    let data = canonical_data(&triple, 1.0).unwrap();
    let spec = NonlinearSpec {
        affine: Some(DVector::from_vec(vec![1.0, 1.0])),
        power_terms: vec![PowerTerm::new(5.0, DVector::from_vec(vec![1.0, 0.0]), 3.0).unwrap()],
        nemytskii: None,
    };
    let err = picard_solve(
        &data,
        1.0,
        &spec,
        5.0,
        &DVector::from_vec(vec![1.0, 1.0]),
        1e-13,
        200,
    )
    .unwrap_err();
    assert!(
        matches!(
            err,
            fredholm_core::Error::PicardNotContracting { .. }
                | fredholm_core::Error::MaxIterExceeded(_)
        ),
        "{err:?}"
    );
}
