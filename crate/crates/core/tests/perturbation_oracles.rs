mod common;

use approx::assert_relative_eq;
use common::floquet_oracle;
use kicked_tops::coupled::linear_entropy_series;
use kicked_tops::perturbation::{
    correlation_matrix, estimate_omega, gamma_eff, improved_rate, least_squares_line, pheno_entropy,
    product_correlation, production_rate, s0, s_lin_pt, s_lin_pt_series, strong_chaos_rate, OmegaConfig, D0,
};
use kicked_tops::quantum_top::variance_series;
use kicked_tops::spin::coherent_state;
use kicked_tops::{
    CoherentParams, CorrelationLabel, CorrelationMatrix, CoupledParams, FitWindow, PhenoParams, SpinBasis, TopParams,
};
use ndarray::{Array1, Array2};
use num_complex::Complex64;
use proptest::prelude::*;

fn reference() -> CoherentParams {
    CoherentParams::new(0.89, 0.63).unwrap()
}

fn adjoint(a: &Array2<Complex64>) -> Array2<Complex64> {
    a.t().mapv(|z| z.conj())
}

fn expect(psi: &Array1<Complex64>, op: &Array2<Complex64>) -> Complex64 {
    psi.mapv(|z| z.conj()).dot(&op.dot(psi))
}

#[test]
fn correlation_matches_heisenberg_operators() {
    let basis = SpinBasis::new(2.0).unwrap();
    let k = 3.0;
    let horizon = 5;
    let u = floquet_oracle(basis, k);
    let n = basis.dim();
    let z = Array2::from_shape_fn((n, n), |(r, c)| {
        if r == c {
            Complex64::new(basis.m(r) / basis.j(), 0.0)
        } else {
            Complex64::new(0.0, 0.0)
        }
    });
    // z(l) = U^{dagger l} z U^l as explicit matrices
    let mut z_of = vec![z.clone()];
    let mut power = Array2::<Complex64>::eye(n);
    for _ in 1..=horizon {
        power = u.dot(&power);
        z_of.push(adjoint(&power).dot(&z).dot(&power));
    }
    let psi = coherent_state(basis, reference()).into_amplitudes();
    let c = correlation_matrix(
        &TopParams::new(basis, k).unwrap(),
        reference(),
        horizon,
        CorrelationLabel::Top1,
    )
    .unwrap();
    for l in 1..=horizon {
        for m in 1..=horizon {
            let oracle = expect(&psi, &z_of[l].dot(&z_of[m])) - expect(&psi, &z_of[l]) * expect(&psi, &z_of[m]);
            assert!((c.get(l, m) - oracle).norm() <= 1e-12, "({l},{m})");
        }
    }
}

#[test]
fn equal_time_correlation_is_variance() {
    let basis = SpinBasis::new(80.0).unwrap();
    let params = TopParams::new(basis, 3.0).unwrap();
    let c = correlation_matrix(&params, reference(), 40, CorrelationLabel::Top1).unwrap();
    let var = variance_series(&params, reference(), 40).unwrap();
    for t in 1..=40 {
        assert!((c.get(t, t).re - var.values[t]).abs() <= 1e-10);
    }
}

#[test]
fn product_symmetry_and_realness() {
    let basis = SpinBasis::new(20.0).unwrap();
    let c1 = correlation_matrix(
        &TopParams::new(basis, 3.0).unwrap(),
        reference(),
        60,
        CorrelationLabel::Top1,
    )
    .unwrap();
    let c2 = correlation_matrix(
        &TopParams::new(basis, 4.5).unwrap(),
        CoherentParams::new(1.9, -2.0).unwrap(),
        60,
        CorrelationLabel::Top2,
    )
    .unwrap();
    let d = product_correlation(&c1, &c2).unwrap();
    for l in 1..=60 {
        for m in 1..=60 {
            assert!((d.get(m, l) - d.get(l, m).conj()).norm() <= 1e-12);
        }
    }
    for t in [1, 10, 60] {
        let total: Complex64 = d.entries().slice(ndarray::s![..t, ..t]).iter().sum();
        assert!(total.im.abs() <= 1e-10 * total.re.abs().max(1e-300));
    }
    let ones = CorrelationMatrix::new(
        Array2::from_elem((60, 60), Complex64::new(1.0, 0.0)),
        CorrelationLabel::Top2,
    )
    .unwrap();
    assert_eq!(product_correlation(&c1, &ones).unwrap().entries(), c1.entries());
    let short = correlation_matrix(
        &TopParams::new(basis, 3.0).unwrap(),
        reference(),
        10,
        CorrelationLabel::Top2,
    )
    .unwrap();
    assert!(product_correlation(&c1, &short).is_err());
}

#[test]
fn perturbative_entropy_tracks_exact_at_small_j() {
    let basis = SpinBasis::new(2.0).unwrap();
    let eps = 1e-5;
    let params = CoupledParams::new(basis, 3.0, 3.0, eps).unwrap();
    let exact = linear_entropy_series(&params, reference(), reference(), 30).unwrap();
    let c = correlation_matrix(&params.top1(), reference(), 30, CorrelationLabel::Top1).unwrap();
    let d = product_correlation(&c, &c).unwrap();
    let pt = s_lin_pt_series(&d, eps, 2.0).unwrap();
    for t in 1..=30 {
        assert!(
            (pt[t] - exact[t]).abs() <= 0.05 * exact[t],
            "t={t}: {} vs {}",
            pt[t],
            exact[t]
        );
        assert_relative_eq!(pt[t], s_lin_pt(&d, eps, 2.0, t).unwrap(), max_relative = 1e-12);
    }
    assert_relative_eq!(pt[1], s0(eps, 2.0) * d.get(1, 1).re, max_relative = 1e-15);
}

#[test]
fn perturbative_entropy_scales_as_eps_squared() {
    let basis = SpinBasis::new(10.0).unwrap();
    let c = correlation_matrix(
        &TopParams::new(basis, 3.0).unwrap(),
        reference(),
        50,
        CorrelationLabel::Top1,
    )
    .unwrap();
    let d = product_correlation(&c, &c).unwrap();
    for t in [1, 17, 50] {
        let a = s_lin_pt(&d, 1e-4, 10.0, t).unwrap();
        let b = s_lin_pt(&d, 2e-4, 10.0, t).unwrap();
        assert_relative_eq!(b, 4.0 * a, max_relative = 1e-12);
    }
}

#[test]
fn strong_chaos_correlations_decay_quickly() {
    let basis = SpinBasis::new(80.0).unwrap();
    let c = correlation_matrix(
        &TopParams::new(basis, 3.0).unwrap(),
        reference(),
        70,
        CorrelationLabel::Top1,
    )
    .unwrap();
    let d = product_correlation(&c, &c).unwrap();
    for t in [40, 50, 60, 70] {
        let d_tt = d.get(t, t).re;
        assert!((d_tt - D0).abs() <= 0.5 * D0, "D({t},{t}) = {d_tt}");
        let tail = (6..=20).map(|tau| d.get(t, t - tau).re.abs()).fold(0.0, f64::max);
        assert!(tail <= 0.1 * d_tt, "t={t}: tail {tail} vs {d_tt}");
    }
}

fn brute_double_sum(gamma: f64, omega: f64, t: usize) -> f64 {
    let mut total = 0.0;
    for l in 1..=t {
        for m in 1..=t {
            let tau = l as f64 - m as f64;
            total += (-gamma * tau.abs()).exp() * (omega * tau).cos();
        }
    }
    total
}

#[test]
fn closed_form_matches_double_sum() {
    let p = PhenoParams::strong_chaos(0.8, 1e-4, 80.0);
    let closed = pheno_entropy(&p, 50.0).unwrap();
    assert_relative_eq!(
        closed,
        p.gamma0() * brute_double_sum(0.8, 0.0, 50),
        max_relative = 1e-12
    );
}

#[test]
fn fitted_rate_of_closed_form() {
    let p = PhenoParams::strong_chaos(1.0, 1e-4, 80.0);
    let series: Vec<f64> = (0..=100).map(|t| pheno_entropy(&p, t as f64).unwrap()).collect();
    let rate = production_rate(&series, FitWindow::default()).unwrap();
    assert_relative_eq!(rate, strong_chaos_rate(&p).unwrap(), max_relative = 0.01);
    let linear: Vec<f64> = (0..=100).map(|t| 0.002 * t as f64).collect();
    assert_relative_eq!(
        production_rate(&linear, FitWindow::default()).unwrap(),
        0.002,
        max_relative = 1e-12
    );
}

#[test]
fn improved_rate_matches_oscillating_double_sum() {
    let (gamma, omega) = (0.7, 0.9);
    let (s1, s2) = (0.3, 0.2);
    let mut p = PhenoParams::strong_chaos(gamma, 1e-4, 80.0);
    p.omega = omega;
    p.sigma1_sq = s1;
    p.sigma2_sq = s2;
    let t: Vec<f64> = (20..=100).map(|v| v as f64).collect();
    let s: Vec<f64> = (20..=100)
        .map(|v| p.s0() * s1 * s2 * brute_double_sum(gamma, omega, v))
        .collect();
    let slope = least_squares_line(&t, &s).unwrap().slope;
    assert_relative_eq!(slope, improved_rate(&p).unwrap(), max_relative = 0.01);
    // the same rate in closed form: sinh(gamma) / (cosh(gamma) - cos(omega))
    let exact = p.s0() * s1 * s2 * gamma.sinh() / (gamma.cosh() - omega.cos());
    assert_relative_eq!(improved_rate(&p).unwrap(), exact, max_relative = 1e-12);
}

#[test]
fn gamma_eff_inverts_rate_law() {
    for i in 0..=99 {
        let gamma = 0.1 + 0.1 * i as f64;
        let p = PhenoParams::strong_chaos(gamma, 1e-4, 80.0);
        let back = gamma_eff(strong_chaos_rate(&p).unwrap(), p.gamma0()).unwrap();
        assert!((back - gamma).abs() <= 1e-12 * gamma.max(1.0), "{gamma} -> {back}");
    }
    let gamma0 = 1.0;
    assert!((gamma_eff(1.0 / 0.5f64.tanh(), gamma0).unwrap() - 1.0).abs() <= 1e-12);
    assert!(gamma_eff(0.9, gamma0).is_err());
    assert!(gamma_eff(1e12, gamma0).unwrap() < 1e-11);
}

#[test]
fn strong_chaos_rate_decreases_with_gamma() {
    let rates: Vec<f64> = (1..=200)
        .map(|i| strong_chaos_rate(&PhenoParams::strong_chaos(0.05 * i as f64, 1e-4, 80.0)).unwrap())
        .collect();
    assert!(rates.windows(2).all(|w| w[1] < w[0]));
}

#[test]
fn omega_of_synthetic_signals() {
    let horizon = 128;
    let make = |f: &dyn Fn(i64) -> Complex64| {
        let e = Array2::from_shape_fn((horizon, horizon), |(l, m)| f(l as i64 - m as i64));
        CorrelationMatrix::new(e, CorrelationLabel::Product).unwrap()
    };
    let osc = make(&|tau| Complex64::from_polar((-0.5 * tau.abs() as f64).exp(), 0.9 * tau as f64));
    let est = estimate_omega(&osc, &OmegaConfig::default()).unwrap();
    assert!((est.omega - 0.9).abs() <= 2.0 * std::f64::consts::PI / horizon as f64);
    let decay = make(&|tau| Complex64::new((-0.4 * tau.abs() as f64).exp(), 0.0));
    assert!(
        estimate_omega(&decay, &OmegaConfig::default()).unwrap().omega <= 2.0 * std::f64::consts::PI / horizon as f64
    );
}

#[test]
fn torus_start_oscillates() {
    let basis = SpinBasis::new(80.0).unwrap();
    let params = TopParams::new(basis, 3.0).unwrap();
    let c1 = correlation_matrix(&params, reference(), 128, CorrelationLabel::Top1).unwrap();
    let c2 = correlation_matrix(
        &params,
        CoherentParams::new(2.2, 0.63).unwrap(),
        128,
        CorrelationLabel::Top2,
    )
    .unwrap();
    let est = estimate_omega(&product_correlation(&c1, &c2).unwrap(), &OmegaConfig::default()).unwrap();
    assert!(est.omega > 0.0 && !est.flat);
}

proptest! {
    #[test]
    fn closed_form_equals_double_sum(gamma in 0.05f64..6.0, t in 1usize..150) {
        let p = PhenoParams::strong_chaos(gamma, 1e-3, 40.0);
        let closed = pheno_entropy(&p, t as f64).unwrap();
        let brute = p.gamma0() * brute_double_sum(gamma, 0.0, t);
        prop_assert!((closed - brute).abs() <= 1e-10 * brute);
    }
}
