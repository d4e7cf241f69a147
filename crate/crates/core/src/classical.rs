//! Classical kicked top on the unit sphere.
//!
//! One kick maps `(x, y, z)` to
//! `(z cos kx + y sin kx, -z sin kx + y cos kx, -x)`, a rotation by `pi/2`
//! about `y` followed by a `z`-dependent twist.

use std::f64::consts::PI;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{invalid, Error, Result};
use crate::quantum_top::VarianceSeries;
use crate::spin::{wrap_phase, CoherentParams};

/// Radius drift tolerated before a point is pulled back onto the sphere.
const SPHERE_SLACK: f64 = 4.0 * f64::EPSILON;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ClassicalPoint {
    pub x: f64,
    pub y: f64,
    pub z: f64,
}

impl ClassicalPoint {
    /// Point at polar angle `theta` and azimuth `phi` (any finite values).
    pub fn from_angles(theta: f64, phi: f64) -> Self {
        let (st, ct) = theta.sin_cos();
        let (sp, cp) = phi.sin_cos();
        Self {
            x: st * cp,
            y: st * sp,
            z: ct,
        }
    }

    pub fn from_params(p: CoherentParams) -> Self {
        Self::from_angles(p.theta(), p.phi())
    }

    /// `(theta, phi)` with `theta` in `[0, pi]` and `phi` in `[-pi, pi)`.
    pub fn to_angles(&self) -> (f64, f64) {
        let theta = self.z.clamp(-1.0, 1.0).acos();
        (theta, wrap_phase(self.y.atan2(self.x)))
    }

    pub fn radius(&self) -> f64 {
        (self.x * self.x + self.y * self.y + self.z * self.z).sqrt()
    }

    fn as_array(&self) -> [f64; 3] {
        [self.x, self.y, self.z]
    }

    fn renormalized(self) -> Self {
        let r2 = self.x * self.x + self.y * self.y + self.z * self.z;
        if (r2 - 1.0).abs() <= SPHERE_SLACK {
            return self;
        }
        let r = r2.sqrt();
        Self {
            x: self.x / r,
            y: self.y / r,
            z: self.z / r,
        }
    }
}

/// One kick of the classical map.
pub fn map_step(p: ClassicalPoint, k: f64) -> ClassicalPoint {
    let (s, c) = (k * p.x).sin_cos();
    ClassicalPoint {
        x: p.z * c + p.y * s,
        y: -p.z * s + p.y * c,
        z: -p.x,
    }
    .renormalized()
}

/// Analytic Jacobian `d(x', y', z') / d(x, y, z)` of [`map_step`].
pub fn jacobian(p: ClassicalPoint, k: f64) -> [[f64; 3]; 3] {
    let (s, c) = (k * p.x).sin_cos();
    let x_new = p.z * c + p.y * s;
    let y_new = -p.z * s + p.y * c;
    [[k * y_new, s, c], [-k * x_new, c, -s], [-1.0, 0.0, 0.0]]
}

/// Vector in the tangent plane of the sphere at some point.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TangentVector {
    pub components: [f64; 3],
}

impl TangentVector {
    /// Removes the radial component relative to `at`.
    pub fn projected(v: [f64; 3], at: ClassicalPoint) -> Self {
        let n = at.as_array();
        let radial: f64 = v.iter().zip(&n).map(|(a, b)| a * b).sum();
        Self {
            components: [v[0] - radial * n[0], v[1] - radial * n[1], v[2] - radial * n[2]],
        }
    }

    pub fn norm(&self) -> f64 {
        self.components.iter().map(|c| c * c).sum::<f64>().sqrt()
    }

    fn scaled(self, factor: f64) -> Self {
        Self {
            components: self.components.map(|c| c * factor),
        }
    }
}

fn initial_tangent(p: ClassicalPoint) -> TangentVector {
    for seed in [[0.6, -0.48, 0.64], [0.0, 1.0, 0.0], [1.0, 0.0, 0.0]] {
        let v = TangentVector::projected(seed, p);
        let n = v.norm();
        if n > 1e-3 {
            return v.scaled(1.0 / n);
        }
    }
    unreachable!("three independent seeds cannot all be radial")
}

/// Finite-time Lyapunov exponent per kick over `steps` kicks.
///
/// A unit tangent vector is pushed through the Jacobian, projected back onto
/// the tangent plane and renormalized each kick; the exponent is the mean of
/// the logarithmic stretch factors.
pub fn finite_time_lyapunov(start: ClassicalPoint, k: f64, steps: usize) -> Result<f64> {
    if steps == 0 {
        return Err(invalid("steps", "need at least one kick"));
    }
    if k == 0.0 {
        // pure rotation: every stretch factor is exactly one
        return Ok(0.0);
    }
    let mut p = start.renormalized();
    let mut v = initial_tangent(p);
    let mut log_growth = 0.0;
    for _ in 0..steps {
        let jac = jacobian(p, k);
        let pushed = [0, 1, 2].map(|r| (0..3).map(|c| jac[r][c] * v.components[c]).sum::<f64>());
        p = map_step(p, k);
        let w = TangentVector::projected(pushed, p);
        let growth = w.norm();
        if growth == 0.0 || !growth.is_finite() {
            return Err(Error::Numerical("tangent vector collapsed".into()));
        }
        log_growth += growth.ln();
        v = w.scaled(1.0 / growth);
    }
    Ok(log_growth / steps as f64)
}

/// Sampled classical stand-in for a spin coherent state.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ClassicalEnsemble {
    pub points: Vec<ClassicalPoint>,
    pub seed: u64,
    pub origin: CoherentParams,
    pub sigma: f64,
}

/// Draws `n` points with `theta` and `phi` independently normal around the
/// origin, standard deviation `sigma` in both chart coordinates.
///
/// Origins within `3 sigma` of a pole are rejected: the flat chart Gaussian is
/// meaningless there.
pub fn sample_ensemble(origin: CoherentParams, sigma: f64, n: usize, seed: u64) -> Result<ClassicalEnsemble> {
    if n == 0 {
        return Err(invalid("ensemble_size", "need at least one point"));
    }
    if !(sigma > 0.0 && sigma.is_finite()) {
        return Err(invalid("sigma", format!("width {sigma} must be positive")));
    }
    if origin.theta() < 3.0 * sigma || origin.theta() > PI - 3.0 * sigma {
        return Err(invalid(
            "theta",
            format!("origin theta {} within 3 sigma of a pole", origin.theta()),
        ));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let theta_dist = Normal::new(origin.theta(), sigma).map_err(|e| invalid("sigma", e.to_string()))?;
    let phi_dist = Normal::new(origin.phi(), sigma).map_err(|e| invalid("sigma", e.to_string()))?;
    let points = (0..n)
        .map(|_| {
            let theta = theta_dist.sample(&mut rng);
            let phi = phi_dist.sample(&mut rng);
            ClassicalPoint::from_angles(theta, phi)
        })
        .collect();
    Ok(ClassicalEnsemble {
        points,
        seed,
        origin,
        sigma,
    })
}

fn z_variance(points: &[ClassicalPoint]) -> f64 {
    let n = points.len() as f64;
    let mean = points.iter().map(|p| p.z).sum::<f64>() / n;
    let square = points.iter().map(|p| p.z * p.z).sum::<f64>() / n;
    (square - mean * mean).max(0.0)
}

/// Ensemble variance of `z` for `t = 0..=steps`.
pub fn ensemble_variance_series(ensemble: &ClassicalEnsemble, k: f64, steps: usize) -> Result<VarianceSeries> {
    if steps == 0 {
        return Err(invalid("steps", "need at least one kick"));
    }
    let mut points = ensemble.points.clone();
    let mut values = Vec::with_capacity(steps + 1);
    values.push(z_variance(&points));
    for _ in 0..steps {
        for p in points.iter_mut() {
            *p = map_step(*p, k);
        }
        values.push(z_variance(&points));
    }
    Ok(VarianceSeries {
        times: (0..=steps).collect(),
        values,
    })
}

/// How the phase-space average of the finite-time exponent is taken.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LyapunovAveraging {
    pub sigma: f64,
    pub size: usize,
    pub steps: usize,
    pub seed: u64,
}

impl LyapunovAveraging {
    /// Width `1/sqrt(j)`, 100 points, 100 kicks.
    pub fn for_spin(j: f64, seed: u64) -> Self {
        Self {
            sigma: 1.0 / j.sqrt(),
            size: 100,
            steps: 100,
            seed,
        }
    }
}

/// Finite-time exponent averaged over a Gaussian ensemble at `origin`.
pub fn averaged_lyapunov(origin: CoherentParams, k: f64, avg: &LyapunovAveraging) -> Result<f64> {
    let ensemble = sample_ensemble(origin, avg.sigma, avg.size, avg.seed)?;
    let exponents: Vec<f64> = ensemble
        .points
        .par_iter()
        .map(|&p| finite_time_lyapunov(p, k, avg.steps))
        .collect::<Result<_>>()?;
    Ok(exponents.iter().sum::<f64>() / exponents.len() as f64)
}

/// `lambda_1 + lambda_2`, each phase-space averaged around its own origin.
///
/// Both ensembles use the same seed, so identical tops give exactly twice the
/// single-top value.
pub fn lambda_sum(
    origin1: CoherentParams,
    k1: f64,
    origin2: CoherentParams,
    k2: f64,
    avg: &LyapunovAveraging,
) -> Result<f64> {
    Ok(averaged_lyapunov(origin1, k1, avg)? + averaged_lyapunov(origin2, k2, avg)?)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PoincarePoint {
    pub orbit_id: usize,
    pub t: usize,
    pub theta: f64,
    pub phi: f64,
}

/// Stroboscopic orbits from each starting point, `t = 0..=steps`.
pub fn poincare_section(k: f64, starts: &[CoherentParams], steps: usize) -> Result<Vec<PoincarePoint>> {
    if steps == 0 {
        return Err(invalid("steps", "need at least one kick"));
    }
    let mut out = Vec::with_capacity(starts.len() * (steps + 1));
    for (orbit_id, start) in starts.iter().enumerate() {
        let mut p = ClassicalPoint::from_params(*start);
        for t in 0..=steps {
            let (theta, phi) = p.to_angles();
            out.push(PoincarePoint {
                orbit_id,
                t,
                theta,
                phi,
            });
            p = map_step(p, k);
        }
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;

    fn start() -> ClassicalPoint {
        ClassicalPoint::from_angles(0.89, 0.63)
    }

    #[test]
    fn zero_kick_has_period_four() {
        let p0 = start();
        let mut p = p0;
        for _ in 0..4 {
            p = map_step(p, 0.0);
        }
        assert_eq!(p, p0);
        let q = map_step(p0, 0.0);
        assert_eq!((q.x, q.y, q.z), (p0.z, p0.y, -p0.x));
    }

    #[test]
    fn long_orbit_stays_on_sphere() {
        let mut p = start();
        let mut worst: f64 = 0.0;
        for _ in 0..10_000 {
            p = map_step(p, 3.0);
            worst = worst.max((p.radius() - 1.0).abs());
        }
        assert!(worst <= 1e-10, "{worst}");
    }

    #[test]
    fn angles_round_trip() {
        let p = ClassicalPoint::from_angles(2.1, -2.9);
        let (t, f) = p.to_angles();
        assert_abs_diff_eq!(t, 2.1, epsilon = 1e-12);
        assert_abs_diff_eq!(f, -2.9, epsilon = 1e-12);
        let (_, f) = ClassicalPoint {
            x: -1.0,
            y: 0.0,
            z: 0.0,
        }
        .to_angles();
        assert_eq!(f, -PI);
    }

    #[test]
    fn lyapunov_vanishes_without_kick() {
        assert_eq!(finite_time_lyapunov(start(), 0.0, 50).unwrap(), 0.0);
        assert!(finite_time_lyapunov(start(), 3.0, 0).is_err());
    }

    #[test]
    fn lyapunov_positive_in_chaotic_sea() {
        assert!(finite_time_lyapunov(start(), 3.0, 100).unwrap() > 0.0);
    }

    #[test]
    fn tangent_projection_is_orthogonal() {
        let p = start();
        let v = TangentVector::projected([0.3, -1.2, 0.8], p);
        let dot = v.components[0] * p.x + v.components[1] * p.y + v.components[2] * p.z;
        assert!(dot.abs() <= 1e-12);
    }

    #[test]
    fn ensemble_is_reproducible_and_validated() {
        let o = CoherentParams::new(0.89, 0.63).unwrap();
        let a = sample_ensemble(o, 0.1, 50, 9).unwrap();
        let b = sample_ensemble(o, 0.1, 50, 9).unwrap();
        assert_eq!(a, b);
        assert_ne!(a, sample_ensemble(o, 0.1, 50, 10).unwrap());
        assert!(sample_ensemble(o, 0.1, 0, 9).is_err());
        assert!(sample_ensemble(o, 0.0, 5, 9).is_err());
        assert!(sample_ensemble(CoherentParams::new(0.1, 0.0).unwrap(), 0.1, 5, 9).is_err());
    }

    #[test]
    fn degenerate_ensemble_sits_on_origin() {
        let o = CoherentParams::new(1.3, -2.0).unwrap();
        let centre = ClassicalPoint::from_params(o);
        let ens = sample_ensemble(o, 1e-8, 200, 1).unwrap();
        for p in &ens.points {
            let cos = (p.x * centre.x + p.y * centre.y + p.z * centre.z).min(1.0);
            assert!(cos.acos() <= 1e-6);
        }
    }

    #[test]
    fn zero_kick_variance_is_periodic() {
        let o = CoherentParams::new(0.89, 0.63).unwrap();
        let ens = sample_ensemble(o, 0.2, 300, 4).unwrap();
        let series = ensemble_variance_series(&ens, 0.0, 12).unwrap();
        for t in 0..8 {
            assert_eq!(series.values[t], series.values[t + 4]);
        }
    }

    #[test]
    fn identical_tops_double_the_exponent() {
        let o = CoherentParams::new(0.89, 0.63).unwrap();
        let avg = LyapunovAveraging {
            sigma: 0.1118,
            size: 20,
            steps: 50,
            seed: 3,
        };
        let single = averaged_lyapunov(o, 3.0, &avg).unwrap();
        assert_eq!(lambda_sum(o, 3.0, o, 3.0, &avg).unwrap(), 2.0 * single);
        assert_eq!(lambda_sum(o, 0.0, o, 0.0, &avg).unwrap(), 0.0);
    }

    #[test]
    fn poincare_ranges_and_period() {
        let starts = [
            CoherentParams::new(0.5, 0.2).unwrap(),
            CoherentParams::new(2.0, -1.0).unwrap(),
        ];
        let pts = poincare_section(0.0, &starts, 20).unwrap();
        for id in 0..2 {
            let mut seen: Vec<(f64, f64)> = Vec::new();
            for p in pts.iter().filter(|p| p.orbit_id == id) {
                if !seen
                    .iter()
                    .any(|s| (s.0 - p.theta).abs() < 1e-9 && (s.1 - p.phi).abs() < 1e-9)
                {
                    seen.push((p.theta, p.phi));
                }
            }
            assert!(seen.len() <= 4);
        }
        let chaotic = poincare_section(3.0, &starts, 200).unwrap();
        assert!(chaotic
            .iter()
            .all(|p| (0.0..=PI).contains(&p.theta) && (-PI..PI).contains(&p.phi)));
    }
}
