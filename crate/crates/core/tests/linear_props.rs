//! Linear Fredholm solver properties: equivalence with a direct
//! factorization oracle, randomized a-priori bound trials, Parseval, and the
//! resonant alternative with its affine solution structure.

mod common;

use nalgebra::DVector;
use rand::Rng;
use rand_chacha::rand_core::SeedableRng;
use rand_chacha::ChaCha8Rng;

use fredholm_core::forms::find_coercive_shift;
use fredholm_core::linear::{
    bound_below_first, bound_between, solvability_check, solve_nonresonant, solve_resonant,
};
use fredholm_core::spectrum::{canonical_data, resonance_group};
use fredholm_core::verify::{random_functional, random_triple};

/// Shift that is both coercive and covers mu (mu + tau >= 0).
fn admissible_tau(base: f64, mu: f64) -> f64 {
    if mu + base < 0.0 {
        1.0 - mu
    } else {
        base
    }
}

#[test]
fn spectral_solution_matches_direct_factorization() {
    let mut rng = ChaCha8Rng::seed_from_u64(12);
    for trial in 0..40 {
        let n = 25;
        let triple = random_triple(n, &mut rng);
        let lambda: f64 = rng.gen_range(-1.0..1.0);
        let data = canonical_data(&triple, lambda).unwrap();
        // Keep a healthy distance from the spectrum.
        let mu = data.mu()[0] - rng.gen_range(0.1..1.0);
        let ell = random_functional(n, &mut rng);
        let sol = solve_nonresonant(&data, mu, &ell).unwrap();
        assert!(sol.residual <= 1e-8, "trial {trial}: residual {}", sol.residual);

        let direct = triple
            .pencil(lambda, mu)
            .full_piv_lu()
            .solve(&ell)
            .expect("pencil is nonsingular off the spectrum");
        let rel = (&sol.u - &direct).norm() / (1.0 + direct.norm());
        assert!(rel <= 1e-8, "trial {trial}: disagreement {rel:.3e}");
    }
}

#[test]
fn parseval_identity_on_random_instances() {
    let mut rng = ChaCha8Rng::seed_from_u64(21);
    for _ in 0..20 {
        let n = 15;
        let triple = random_triple(n, &mut rng);
        let data = canonical_data(&triple, 0.1).unwrap();
        let shifted = find_coercive_shift(&triple, 0.1).unwrap();
        let mu = data.mu()[0] - rng.gen_range(0.1..1.0);
        let ell = random_functional(n, &mut rng);
        let sol = solve_nonresonant(&data, mu, &ell).unwrap();
        let coeffs = data.e_shift().transpose() * shifted.matrix() * &sol.u;
        let sum: f64 = coeffs.iter().map(|c| c * c).sum();
        let energy = shifted.energy_norm(&sol.u).powi(2);
        assert!(
            (sum - energy).abs() <= 1e-9 * (1.0 + energy),
            "parseval defect {}",
            (sum - energy).abs()
        );
    }
}

#[test]
fn bound_below_first_holds_on_random_instances() {
    let mut rng = ChaCha8Rng::seed_from_u64(33);
    for trial in 0..100 {
        let n = 20;
        let triple = random_triple(n, &mut rng);
        let lambda: f64 = rng.gen_range(-0.5..0.5);
        let data = canonical_data(&triple, lambda).unwrap();
        let mu = data.mu()[0] - rng.gen_range(0.05..2.0);
        let tau = admissible_tau(data.tau(), mu);
        let ell = random_functional(n, &mut rng);
        let report = bound_below_first(&data, mu, &ell, tau).unwrap();
        assert!(
            report.slack >= 0.0,
            "trial {trial}: slack {:.3e}",
            report.slack
        );
    }
}

#[test]
fn bound_between_holds_on_random_instances() {
    let mut rng = ChaCha8Rng::seed_from_u64(34);
    let mut done = 0usize;
    while done < 100 {
        let n = 20;
        let triple = random_triple(n, &mut rng);
        let lambda: f64 = rng.gen_range(-0.5..0.5);
        let data = canonical_data(&triple, lambda).unwrap();
        // Pick a random gap wide enough to place mu inside.
        let k0 = rng.gen_range(1..n);
        let lo = data.mu()[k0 - 1];
        let hi = data.mu()[k0];
        if hi - lo < 1e-3 {
            continue;
        }
        let mu = lo + (hi - lo) * rng.gen_range(0.1..0.9);
        let tau = admissible_tau(data.tau(), mu);
        let ell = random_functional(n, &mut rng);
        let report = bound_between(&data, mu, &ell, tau, k0).unwrap();
        assert!(
            report.slack >= 0.0,
            "trial {done}: slack {:.3e}",
            report.slack
        );
        done += 1;
    }
}

#[test]
fn resonant_alternative_on_random_triples() {
    let mut rng = ChaCha8Rng::seed_from_u64(55);
    for _ in 0..20 {
        let n = 12;
        let triple = random_triple(n, &mut rng);
        let data = canonical_data(&triple, 0.3).unwrap();
        let k = rng.gen_range(0..n);
        let mu = data.mu()[k];
        let group = resonance_group(&data, mu, 1e-8).unwrap();
        assert!(!group.is_empty());

        // Project a random functional onto the solvable complement:
        // subtracting l(e_k) M e_k zeroes the pairing with each basis vector.
        let mut ell = random_functional(n, &mut rng);
        for c in 0..group.basis.ncols() {
            let e = group.basis.column(c).into_owned();
            let val = ell.dot(&e);
            ell -= triple.m() * &e * val;
        }
        let (ok, defect) = solvability_check(&group, &ell, 1e-9);
        assert!(ok, "defect {defect:.3e}");

        let sol = solve_resonant(&data, &group, &ell, &DVector::zeros(n)).unwrap();
        assert!(sol.residual <= 1e-8, "residual {}", sol.residual);

        // Special solution is m-orthogonal to the eigenspace.
        for c in 0..group.basis.ncols() {
            let e = group.basis.column(c).into_owned();
            assert!(triple.m_inner(&sol.u, &e).abs() <= 1e-9);
        }

        // Affine structure: two solutions differ by a pencil null vector.
        let vhat = group.basis.column(0) * rng.gen_range(0.5..2.0);
        let sol2 = solve_resonant(&data, &group, &ell, &vhat.clone_owned()).unwrap();
        let diff = &sol2.u - &sol.u;
        let defect = (triple.pencil(0.3, mu) * diff).norm();
        assert!(defect <= 1e-9 * (1.0 + sol.u.norm()), "defect {defect:.3e}");
    }
}

#[test]
fn resonant_rejection_of_contaminated_functional() {
    let mut rng = ChaCha8Rng::seed_from_u64(56);
    let triple = random_triple(12, &mut rng);
    let data = canonical_data(&triple, 0.0).unwrap();
    let mu = data.mu()[2];
    let group = resonance_group(&data, mu, 1e-8).unwrap();

    let mut ell = random_functional(12, &mut rng);
    for c in 0..group.basis.ncols() {
        let e = group.basis.column(c).into_owned();
        let val = ell.dot(&e);
        ell -= triple.m() * &e * val;
    }
    // Contaminate with a 1e-3 eigenspace component.
    let e0 = group.basis.column(0).into_owned();
    let contaminated = &ell + triple.m() * &e0 * 1e-3;
    let (ok, defect) = solvability_check(&group, &contaminated, 1e-8);
    assert!(!ok);
    assert!(defect >= 1e-4, "defect {defect:.3e}");
    assert!(
        solve_resonant(&data, &group, &contaminated, &DVector::zeros(12)).is_err()
    );
}
