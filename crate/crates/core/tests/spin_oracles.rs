mod common;

use std::f64::consts::{FRAC_PI_2, PI};

use approx::assert_abs_diff_eq;
use common::{max_abs_diff, rotation_oracle};
use kicked_tops::spin::{build_angular_momentum, coherent_state, husimi, husimi_grid, wigner_d, wigner_d_real};
use kicked_tops::{Axis, CoherentParams, SpinBasis};
use ndarray::Array2;
use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

/// Textbook finite sum over `l`, in plain floating point; fine for small `j`.
fn explicit_sum_d(j: f64, mp: f64, m: f64, beta: f64) -> f64 {
    let fact = |n: f64| -> f64 { (1..=n.round() as u64).map(|v| v as f64).product() };
    let (s, c) = (0.5 * beta).sin_cos();
    let mut total = 0.0;
    let l_max = (2.0 * j).round() as i64;
    for l in 0..=l_max {
        let l = l as f64;
        let a = j + m - l;
        let b = j - l - mp;
        let e = l - m + mp;
        if a < 0.0 || b < 0.0 || e < 0.0 {
            continue;
        }
        let sign = if ((l - m + mp).round() as i64) % 2 == 0 {
            1.0
        } else {
            -1.0
        };
        let num = (fact(j + m) * fact(j - m) * fact(j + mp) * fact(j - mp)).sqrt();
        let den = fact(a) * fact(l) * fact(b) * fact(e);
        total += sign * num / den
            * c.powi((2.0 * j - 2.0 * l + m - mp).round() as i32)
            * s.powi((2.0 * l - m + mp).round() as i32);
    }
    total
}

#[test]
fn d_matrix_matches_matrix_exponential() {
    for (j, tol) in [(0.5, 1e-12), (1.0, 1e-12), (3.5, 1e-12), (80.0, 1e-10)] {
        let basis = SpinBasis::new(j).unwrap();
        for beta in [FRAC_PI_2, 0.37, -1.3, 2.9] {
            let d = wigner_d(basis, beta).unwrap();
            let oracle = rotation_oracle(basis, beta);
            let err = max_abs_diff(d.entries(), &oracle);
            assert!(err <= tol, "j={j} beta={beta}: {err}");
        }
    }
}

#[test]
fn d_matrix_matches_explicit_sum_at_small_j() {
    for two_j in 1..=16u32 {
        let basis = SpinBasis::from_two_j(two_j).unwrap();
        for beta in [0.2, FRAC_PI_2, 2.4] {
            let d = wigner_d_real(basis, beta).unwrap();
            for r in 0..basis.dim() {
                for c in 0..basis.dim() {
                    let oracle = explicit_sum_d(basis.j(), basis.m(r), basis.m(c), beta);
                    assert_abs_diff_eq!(d[[r, c]], oracle, epsilon = 1e-12);
                }
            }
        }
    }
}

#[test]
fn d_matrix_orthogonal_at_large_j() {
    for j in [80.0, 100.0] {
        let basis = SpinBasis::new(j).unwrap();
        let d = wigner_d(basis, FRAC_PI_2).unwrap();
        assert!(d.unitarity_defect() <= 1e-10, "j={j}: {}", d.unitarity_defect());
    }
}

#[test]
fn rotation_composition() {
    let mut rng = ChaCha8Rng::seed_from_u64(11);
    for j in [0.5, 5.0, 80.0] {
        let basis = SpinBasis::new(j).unwrap();
        for _ in 0..5 {
            let b1 = rng.random_range(-PI..PI);
            let b2 = rng.random_range(-PI..PI);
            let lhs = wigner_d_real(basis, b1)
                .unwrap()
                .dot(&wigner_d_real(basis, b2).unwrap());
            let rhs = wigner_d_real(basis, b1 + b2).unwrap();
            let err = (&lhs - &rhs).iter().fold(0.0f64, |m, v| m.max(v.abs()));
            assert!(err <= 1e-10, "j={j} ({b1}, {b2}): {err}");
        }
    }
}

#[test]
fn commutator_at_large_j() {
    let basis = SpinBasis::new(80.0).unwrap();
    let jx = build_angular_momentum(basis, Axis::X);
    let jy = build_angular_momentum(basis, Axis::Y);
    let jz = build_angular_momentum(basis, Axis::Z);
    let comm = jx.entries().dot(jy.entries()) - jy.entries().dot(jx.entries());
    let target = jz.entries().mapv(|z| z * num_complex::Complex64::i());
    assert!(max_abs_diff(&comm, &target) <= 1e-10 * 80.0);
}

#[test]
fn coherent_expectations_at_random_points() {
    let basis = SpinBasis::new(40.0).unwrap();
    let jx = build_angular_momentum(basis, Axis::X);
    let jz = build_angular_momentum(basis, Axis::Z);
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    for _ in 0..20 {
        let theta = rng.random_range(0.0..PI);
        let phi = rng.random_range(-PI..PI);
        let state = coherent_state(basis, CoherentParams::new(theta, phi).unwrap());
        assert_abs_diff_eq!(state.norm(), 1.0, epsilon = 1e-12);
        assert_abs_diff_eq!(state.expectation(&jz).unwrap().re / 40.0, theta.cos(), epsilon = 1e-10);
        assert_abs_diff_eq!(
            state.expectation(&jx).unwrap().re / 40.0,
            theta.sin() * phi.cos(),
            epsilon = 1e-10
        );
    }
}

#[test]
fn coherent_state_poles() {
    let basis = SpinBasis::new(80.0).unwrap();
    let south = coherent_state(basis, CoherentParams::new(PI, 0.4).unwrap());
    let amps = south.amplitudes();
    assert_abs_diff_eq!(amps[basis.dim() - 1].norm(), 1.0, epsilon = 1e-15);
    assert!(amps.iter().take(basis.dim() - 1).all(|z| z.norm() == 0.0));
    let north = coherent_state(basis, CoherentParams::new(0.0, 0.0).unwrap());
    assert_abs_diff_eq!(north.amplitudes()[0].re, 1.0, epsilon = 1e-15);
}

#[test]
fn husimi_resolution_of_identity() {
    let basis = SpinBasis::new(20.0).unwrap();
    let (nt, np) = (200, 200);
    let grid = husimi_grid(nt, np);
    let state = coherent_state(basis, CoherentParams::new(1.1, -0.7).unwrap());
    let q = husimi(&state, &grid).unwrap();
    let cell = (PI / nt as f64) * (2.0 * PI / np as f64);
    let integral: f64 = grid.iter().zip(&q).map(|(p, v)| v * p.theta().sin() * cell).sum();
    let norm = (2.0 * 20.0 + 1.0) / (4.0 * PI) * integral;
    assert!((norm - 1.0).abs() <= 1e-3, "{norm}");
    assert!(q.iter().all(|v| (0.0..=1.0).contains(v)));
}

#[test]
fn husimi_peaks_at_centre() {
    let basis = SpinBasis::new(10.0).unwrap();
    let centre = CoherentParams::new(1.3, 0.9).unwrap();
    let grid = husimi_grid(40, 80);
    let q = husimi(&coherent_state(basis, centre), &grid).unwrap();
    let best = (0..grid.len()).max_by(|&a, &b| q[a].total_cmp(&q[b])).unwrap();
    let dist = |p: &CoherentParams| {
        let a = kicked_tops::ClassicalPoint::from_params(*p);
        let b = kicked_tops::ClassicalPoint::from_params(centre);
        (a.x * b.x + a.y * b.y + a.z * b.z).clamp(-1.0, 1.0).acos()
    };
    let nearest = (0..grid.len())
        .min_by(|&a, &b| dist(&grid[a]).total_cmp(&dist(&grid[b])))
        .unwrap();
    assert_eq!(best, nearest);
}

proptest! {
    #[test]
    fn coherent_states_are_normalized(two_j in 1u32..=200, theta in 0.0..=PI, phi in -PI..PI) {
        let basis = SpinBasis::from_two_j(two_j).unwrap();
        let state = coherent_state(basis, CoherentParams::new(theta, phi).unwrap());
        prop_assert!((state.norm() - 1.0).abs() <= 1e-12);
    }

    #[test]
    fn d_matrix_is_orthogonal(two_j in 1u32..=60, beta in -10.0f64..10.0) {
        let basis = SpinBasis::from_two_j(two_j).unwrap();
        let d = wigner_d_real(basis, beta).unwrap();
        let defect = d.t().dot(&d) - Array2::<f64>::eye(basis.dim());
        prop_assert!(defect.iter().all(|v| v.abs() <= 1e-10));
    }
}
