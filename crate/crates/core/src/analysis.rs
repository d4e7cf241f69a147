//! End-to-end measurements: exact production rates, their phenomenological
//! predictions, and the weak-chaos comparison.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::classical::{lambda_sum, LyapunovAveraging};
use crate::coupled::{entropy_series, linear_entropy_series, CoupledParams};
use crate::error::{invalid, Error, Result};
use crate::perturbation::{
    correlation_matrix, estimate_omega, gamma_eff, improved_rate, least_squares_line, product_correlation,
    production_rate, strong_chaos_rate, CorrelationLabel, FitWindow, LineFit, OmegaConfig, OmegaEstimate, PhenoParams,
    D0, SIGMA_SAT_SQ,
};
use crate::spin::{CoherentParams, SpinBasis};

/// Exponent of the empirical von Neumann scaling used to normalize `Gamma_vN`.
pub const VN_EXPONENT: f64 = 1.8;

/// `Gamma_tilde_0 = 2 eps^1.8 j^2 D0`.
pub fn gamma_tilde0(eps: f64, j: f64) -> f64 {
    2.0 * eps.powf(VN_EXPONENT) * j * j * D0
}

/// Chaotic-sea starting points `(theta, phi)` for strong-chaos sweeps.
///
/// The nodes of the grid `theta in {0.5, 0.9, ..., 2.5}`,
/// `phi in {-2.5, -1.5, ..., 2.5}` whose phase-space averaged finite-time
/// exponent at `k = 3` (`j = 80`, seed 7) exceeds 0.25; the rejected nodes
/// sit on or next to tori.
pub const CHAOTIC_SEA: [(f64, f64); 31] = [
    (0.5, -2.5),
    (0.5, -1.5),
    (0.5, -0.5),
    (0.5, 0.5),
    (0.5, 2.5),
    (0.9, -2.5),
    (0.9, -1.5),
    (0.9, 0.5),
    (0.9, 1.5),
    (1.3, -2.5),
    (1.3, -1.5),
    (1.3, -0.5),
    (1.3, 0.5),
    (1.3, 1.5),
    (1.3, 2.5),
    (1.7, -2.5),
    (1.7, -1.5),
    (1.7, -0.5),
    (1.7, 0.5),
    (1.7, 1.5),
    (1.7, 2.5),
    (2.1, -1.5),
    (2.1, -0.5),
    (2.1, 1.5),
    (2.1, 2.5),
    (2.5, -2.5),
    (2.5, -1.5),
    (2.5, -0.5),
    (2.5, 0.5),
    (2.5, 1.5),
    (2.5, 2.5),
];

/// Reference start of the first top in the weak-chaos scan.
pub const SCAN_FIRST_TOP: (f64, f64) = (0.89, 0.63);

/// Second-top starts of the weak-chaos scan: `phi = 0.63`, `theta` from 0.5
/// to 2.6 in steps of 0.1, crossing the large torus near `theta = 2.2`.
pub fn weak_chaos_scan() -> Vec<(f64, f64)> {
    (0..=21).map(|i| (0.5 + 0.1 * i as f64, 0.63)).collect()
}

/// Exact production rates of one coupled run.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RateMeasurement {
    /// Slope of `S_lin` over the fit window.
    pub rate: f64,
    /// Slope of `S_vN`, when requested.
    pub rate_vn: Option<f64>,
    pub gamma0: f64,
}

impl RateMeasurement {
    pub fn ratio(&self) -> f64 {
        self.rate / self.gamma0
    }

    /// `Gamma_vN / Gamma_tilde_0`, when the von Neumann rate was measured.
    pub fn vn_ratio(&self, eps: f64, j: f64) -> Option<f64> {
        self.rate_vn.map(|r| r / gamma_tilde0(eps, j))
    }

    /// Decay rate implied by `Gamma/Gamma0`, or the out-of-domain error.
    pub fn gamma_eff(&self) -> Result<f64> {
        gamma_eff(self.rate, self.gamma0)
    }
}

/// Evolves the coupled tops up to `window.end` and fits the entropy slopes.
pub fn measure_rate(
    params: &CoupledParams,
    init1: CoherentParams,
    init2: CoherentParams,
    window: FitWindow,
    with_vn: bool,
) -> Result<RateMeasurement> {
    let gamma0 = PhenoParams::strong_chaos(1.0, params.eps(), params.j()).gamma0();
    if gamma0.is_nan() || gamma0 <= 0.0 {
        return Err(invalid("eps", "rates need a nonzero coupling"));
    }
    let (rate, rate_vn) = if with_vn {
        let series = entropy_series(params, init1, init2, window.end)?;
        (
            production_rate(&series.s_lin, window)?,
            Some(production_rate(&series.s_vn, window)?),
        )
    } else {
        let s_lin = linear_entropy_series(params, init1, init2, window.end)?;
        (production_rate(&s_lin, window)?, None)
    };
    Ok(RateMeasurement { rate, rate_vn, gamma0 })
}

/// Fluctuation and oscillation content of the uncoupled correlations.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CorrelationSummary {
    /// Mean of `C_1(t,t)` over the window.
    pub sigma1_sq: f64,
    /// Mean of `C_2(t,t)` over the window.
    pub sigma2_sq: f64,
    pub omega: OmegaEstimate,
}

/// Builds `C_1`, `C_2` and `D` up to `horizon` and summarizes them.
pub fn correlation_summary(
    params: &CoupledParams,
    init1: CoherentParams,
    init2: CoherentParams,
    horizon: usize,
    window: FitWindow,
    omega: &OmegaConfig,
) -> Result<CorrelationSummary> {
    if window.end > horizon {
        return Err(invalid("fit_window", "window extends past the correlation horizon"));
    }
    let c1 = correlation_matrix(&params.top1(), init1, horizon, CorrelationLabel::Top1)?;
    let c2 = correlation_matrix(&params.top2(), init2, horizon, CorrelationLabel::Top2)?;
    let d = product_correlation(&c1, &c2)?;
    Ok(CorrelationSummary {
        sigma1_sq: c1.diagonal_mean(window.start, window.end)?,
        sigma2_sq: c2.diagonal_mean(window.start, window.end)?,
        omega: estimate_omega(&d, omega)?,
    })
}

/// Rate predictions in units of `Gamma0`, both with `gamma = lambda_sum`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RatePrediction {
    /// `coth(lambda_sum / 2)`.
    pub strong: f64,
    /// Oscillation- and fluctuation-corrected rate, first top taken saturated.
    pub improved: f64,
}

pub fn predict_rates(lambda_sum: f64, omega: f64, sigma2_sq: f64, eps: f64, j: f64) -> Result<RatePrediction> {
    let mut p = PhenoParams::strong_chaos(lambda_sum, eps, j);
    let gamma0 = p.gamma0();
    let strong = strong_chaos_rate(&p)? / gamma0;
    p.omega = omega;
    p.sigma1_sq = SIGMA_SAT_SQ;
    p.sigma2_sq = sigma2_sq;
    Ok(RatePrediction {
        strong,
        improved: improved_rate(&p)? / gamma0,
    })
}

/// Everything measured for one `(k, initial condition)` pair.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FitRow {
    pub k: f64,
    pub init1: CoherentParams,
    pub init2: CoherentParams,
    pub rate_ratio: f64,
    pub vn_ratio: Option<f64>,
    /// `None` when `Gamma/Gamma0 <= 1`.
    pub gamma_eff: Option<f64>,
    pub lambda_sum: f64,
    pub omega: f64,
    pub omega_flat: bool,
    /// `(sigma_2 / sigma_sat)^2`.
    pub sigma2_ratio: f64,
}

/// Shared settings of a fit sweep.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FitSettings {
    pub j: f64,
    pub eps: f64,
    pub window: FitWindow,
    /// Correlation horizon for `sigma_2^2` and `omega`; at least `window.end`.
    pub horizon: usize,
    pub with_vn: bool,
    pub lyapunov: LyapunovAveraging,
    pub omega: OmegaConfig,
}

impl FitSettings {
    pub fn new(j: f64, eps: f64, seed: u64) -> Self {
        Self {
            j,
            eps,
            window: FitWindow::default(),
            horizon: 128,
            with_vn: false,
            lyapunov: LyapunovAveraging::for_spin(j, seed),
            omega: OmegaConfig::default(),
        }
    }
}

/// Measures one row; both tops share the kick strength `k`.
pub fn fit_row(k: f64, init1: CoherentParams, init2: CoherentParams, settings: &FitSettings) -> Result<FitRow> {
    let basis = SpinBasis::new(settings.j)?;
    let params = CoupledParams::new(basis, k, k, settings.eps)?;
    let rate = measure_rate(&params, init1, init2, settings.window, settings.with_vn)?;
    let summary = correlation_summary(
        &params,
        init1,
        init2,
        settings.horizon,
        settings.window,
        &settings.omega,
    )?;
    let lsum = lambda_sum(init1, k, init2, k, &settings.lyapunov)?;
    let gamma_eff = match rate.gamma_eff() {
        Ok(g) => Some(g),
        Err(Error::OutOfDomain(_)) => None,
        Err(e) => return Err(e),
    };
    Ok(FitRow {
        k,
        init1,
        init2,
        rate_ratio: rate.ratio(),
        vn_ratio: rate.vn_ratio(settings.eps, settings.j),
        gamma_eff,
        lambda_sum: lsum,
        omega: summary.omega.omega,
        omega_flat: summary.omega.flat,
        sigma2_ratio: summary.sigma2_sq / SIGMA_SAT_SQ,
    })
}

/// Compares a set of rows against the two rate predictions.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct WeakChaosSummary {
    /// `Gamma/Gamma0` against `lambda_sum`.
    pub fit: LineFit,
    pub mae_strong: f64,
    pub mae_improved: f64,
}

impl WeakChaosSummary {
    /// Fractional reduction of the mean absolute error by the improved model.
    pub fn improvement(&self) -> f64 {
        1.0 - self.mae_improved / self.mae_strong
    }
}

pub fn weak_chaos_summary(rows: &[FitRow], eps: f64, j: f64) -> Result<WeakChaosSummary> {
    if rows.len() < 2 {
        return Err(invalid("rows", "need at least two scan points"));
    }
    let x: Vec<f64> = rows.iter().map(|r| r.lambda_sum).collect();
    let y: Vec<f64> = rows.iter().map(|r| r.rate_ratio).collect();
    let fit = least_squares_line(&x, &y)?;
    let (mut strong, mut improved) = (0.0, 0.0);
    for r in rows {
        let p = predict_rates(r.lambda_sum, r.omega, r.sigma2_ratio * SIGMA_SAT_SQ, eps, j)?;
        strong += (p.strong - r.rate_ratio).abs();
        improved += (p.improved - r.rate_ratio).abs();
    }
    let n = rows.len() as f64;
    Ok(WeakChaosSummary {
        fit,
        mae_strong: strong / n,
        mae_improved: improved / n,
    })
}

/// Median of a non-empty sample; NaNs sort last.
pub fn median(values: &[f64]) -> Option<f64> {
    if values.is_empty() {
        return None;
    }
    let mut v = values.to_vec();
    v.sort_by(|a, b| a.total_cmp(b));
    let n = v.len();
    Some(if n % 2 == 1 {
        v[n / 2]
    } else {
        0.5 * (v[n / 2 - 1] + v[n / 2])
    })
}

/// Maps `f` over `items` on at most `workers` threads (0 = rayon default),
/// returning results in input order.
pub fn parallel_map<T, R, F>(items: &[T], workers: usize, f: F) -> Result<Vec<R>>
where
    T: Sync,
    R: Send,
    F: Fn(&T) -> Result<R> + Sync + Send,
{
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(workers)
        .build()
        .map_err(|e| Error::Numerical(format!("thread pool: {e}")))?;
    pool.install(|| items.par_iter().map(&f).collect())
}
