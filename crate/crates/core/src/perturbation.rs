//! Second-order perturbative linear entropy and the rate models built on it.
//!
//! To second order in the coupling, `S_lin(t) = S0 sum_{l,m<=t} D(l,m)` with
//! `S0 = 2 eps^2 j^2` and `D = C_1 C_2` the entrywise product of the
//! interaction-picture correlation functions
//! `C(l,m) = <z(l) z(m)> - <z(l)><z(m)>` of the *uncoupled* tops.
//!
//! The phenomenological side assumes `D(l,m) = D0 exp(-gamma |l-m|)` (strong
//! chaos), optionally dressed by an oscillation `exp(i omega (l-m))` and
//! reduced fluctuations `sigma_i^2` (mixed phase space).

use std::sync::Arc;

use ndarray::{s, Array2};
use num_complex::Complex64;
use rustfft::FftPlanner;
use serde::{Deserialize, Serialize};

use crate::error::{invalid, Error, Result};
use crate::quantum_top::{build_floquet, TopParams};
use crate::spin::{coherent_state, CoherentParams};

/// Variance of `z` for a uniform distribution on the sphere.
pub const SIGMA_SAT_SQ: f64 = 1.0 / 3.0;
/// `sigma_sat^4`.
pub const D0: f64 = SIGMA_SAT_SQ * SIGMA_SAT_SQ;

const ZERO: Complex64 = Complex64::new(0.0, 0.0);

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum CorrelationLabel {
    Top1,
    Top2,
    Product,
}

/// `T x T` correlation matrix indexed by kicks `1..=T`.
#[derive(Debug, Clone, PartialEq)]
pub struct CorrelationMatrix {
    entries: Array2<Complex64>,
    label: CorrelationLabel,
}

impl CorrelationMatrix {
    /// Wraps raw entries (row `l-1`, column `m-1`), checking conjugate
    /// symmetry to `1e-10` and a real, non-negative diagonal.
    pub fn new(entries: Array2<Complex64>, label: CorrelationLabel) -> Result<Self> {
        let n = entries.nrows();
        if entries.ncols() != n {
            return Err(Error::DimensionMismatch {
                expected: n,
                found: entries.ncols(),
            });
        }
        if n == 0 {
            return Err(invalid("horizon", "correlation horizon must be >= 1"));
        }
        let c = Self { entries, label };
        c.check_symmetry()?;
        Ok(c)
    }

    fn check_symmetry(&self) -> Result<()> {
        let n = self.horizon();
        for l in 0..n {
            let d = self.entries[[l, l]];
            if d.im.abs() > 1e-12 || d.re < -1e-12 {
                return Err(Error::Numerical(format!("diagonal entry {l} is {d}")));
            }
            for m in 0..l {
                if (self.entries[[l, m]] - self.entries[[m, l]].conj()).norm() > 1e-10 {
                    return Err(Error::Numerical(format!(
                        "conjugate symmetry broken at ({}, {})",
                        l + 1,
                        m + 1
                    )));
                }
            }
        }
        Ok(())
    }

    pub fn horizon(&self) -> usize {
        self.entries.nrows()
    }

    pub fn label(&self) -> CorrelationLabel {
        self.label
    }

    pub fn entries(&self) -> &Array2<Complex64> {
        &self.entries
    }

    /// Entry at kicks `(l, m)`, both 1-based.
    pub fn get(&self, l: usize, m: usize) -> Complex64 {
        self.entries[[l - 1, m - 1]]
    }

    /// Equal-time values `C(l,l)` for `l = 1..=T`.
    pub fn diagonal(&self) -> Vec<f64> {
        self.entries.diag().iter().map(|z| z.re).collect()
    }

    /// Mean of `C(l,l)` over `lo <= l <= hi`, clipped to the horizon.
    pub fn diagonal_mean(&self, lo: usize, hi: usize) -> Result<f64> {
        let lo = lo.max(1);
        let hi = hi.min(self.horizon());
        if lo > hi {
            return Err(invalid("window", format!("[{lo}, {hi}] is empty")));
        }
        Ok((lo..=hi).map(|l| self.get(l, l).re).sum::<f64>() / (hi - lo + 1) as f64)
    }

    /// `D(t, t - tau)` for `tau = 0..=tau_max`, normalized as requested.
    pub fn lag_profile(&self, t: usize, tau_max: usize, normalization: LagNormalization) -> Result<Vec<Complex64>> {
        if t == 0 || t > self.horizon() {
            return Err(invalid("t", format!("{t} outside 1..={}", self.horizon())));
        }
        let scale = match normalization {
            LagNormalization::None => 1.0,
            LagNormalization::Saturation => D0,
            LagNormalization::Diagonal => self.get(t, t).re,
        };
        Ok((0..=tau_max.min(t - 1))
            .map(|tau| self.get(t, t - tau) / scale)
            .collect())
    }
}

/// Reference used when plotting `D(t, t - tau)`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "kebab-case")]
pub enum LagNormalization {
    #[default]
    None,
    /// Divide by `D0 = 1/9`.
    Saturation,
    /// Divide by the measured `D(t, t)`.
    Diagonal,
}

/// Interaction-picture correlation `C(l,m)` of one uncoupled top.
///
/// For `l >= m`, `C(l,m) = <psi(l)| z U^{l-m} z |psi(m)> - <z>_l <z>_m`. All
/// `z|psi(m)>` are propagated together, so each lag costs one
/// matrix-matrix product over the columns still in range.
pub fn correlation_matrix(
    params: &TopParams,
    init: CoherentParams,
    horizon: usize,
    label: CorrelationLabel,
) -> Result<CorrelationMatrix> {
    if horizon == 0 {
        return Err(invalid("horizon", "correlation horizon must be >= 1"));
    }
    let basis = params.basis();
    let n = basis.dim();
    let j = basis.j();
    let floquet = build_floquet(params);
    let u = floquet.entries();
    let z: Vec<f64> = basis.m_values().map(|m| m / j).collect();

    // Column t-1 holds |psi(t)>, t = 1..=T.
    let mut psi = Array2::from_elem((n, horizon), ZERO);
    let mut current = coherent_state(basis, init).into_amplitudes();
    for t in 0..horizon {
        current = u.dot(&current);
        psi.column_mut(t).assign(&current);
    }
    let mut z_psi = psi.clone();
    for (mut row, &zv) in z_psi.rows_mut().into_iter().zip(&z) {
        row.mapv_inplace(|a| a * zv);
    }
    let means: Vec<f64> = (0..horizon)
        .map(|t| psi.column(t).iter().zip(&z).map(|(a, zv)| a.norm_sqr() * zv).sum())
        .collect();

    let mut entries = Array2::from_elem((horizon, horizon), ZERO);
    let mut propagated = z_psi.clone();
    for lag in 0..horizon {
        let columns = horizon - lag;
        for m in 0..columns {
            let l = m + lag;
            let inner: Complex64 = z_psi
                .column(l)
                .iter()
                .zip(propagated.column(m).iter())
                .map(|(a, b)| a.conj() * b)
                .sum();
            entries[[l, m]] = inner - means[l] * means[m];
        }
        if columns > 1 {
            propagated = u.dot(&propagated.slice(s![.., ..columns - 1]));
        }
    }
    for l in 0..horizon {
        let d = entries[[l, l]];
        if d.im.abs() > 1e-12 {
            return Err(Error::Numerical(format!(
                "C({0},{0}) has imaginary part {1:e}",
                l + 1,
                d.im
            )));
        }
        entries[[l, l]] = Complex64::new(d.re, 0.0);
        for m in 0..l {
            entries[[m, l]] = entries[[l, m]].conj();
        }
    }
    CorrelationMatrix::new(entries, label)
}

/// `D(l,m) = C_1(l,m) C_2(l,m)`.
pub fn product_correlation(c1: &CorrelationMatrix, c2: &CorrelationMatrix) -> Result<CorrelationMatrix> {
    if c1.horizon() != c2.horizon() {
        return Err(Error::HorizonMismatch {
            left: c1.horizon(),
            right: c2.horizon(),
        });
    }
    let mut entries = &c1.entries * &c2.entries;
    for l in 0..entries.nrows() {
        let d = entries[[l, l]];
        entries[[l, l]] = Complex64::new(d.re, 0.0);
    }
    CorrelationMatrix::new(entries, CorrelationLabel::Product)
}

/// `S0 = 2 eps^2 j^2`.
pub fn s0(eps: f64, j: f64) -> f64 {
    2.0 * eps * eps * j * j
}

fn real_sum(d: &CorrelationMatrix, t: usize) -> Result<f64> {
    let block = d.entries.slice(s![..t, ..t]);
    let total: Complex64 = block.iter().sum();
    let magnitude: f64 = block.iter().map(|z| z.norm()).sum();
    let tol = 1e-10 * total.re.abs() + 1e-13 * magnitude;
    if total.im.abs() > tol {
        return Err(Error::Numerical(format!(
            "double sum has imaginary part {:e} (real {:e})",
            total.im, total.re
        )));
    }
    Ok(total.re)
}

/// Second-order perturbative linear entropy at kick `t`.
pub fn s_lin_pt(d: &CorrelationMatrix, eps: f64, j: f64, t: usize) -> Result<f64> {
    if t == 0 || t > d.horizon() {
        return Err(invalid("t", format!("{t} outside 1..={}", d.horizon())));
    }
    Ok(s0(eps, j) * real_sum(d, t)?)
}

/// [`s_lin_pt`] for every `t = 0..=T` by running sums.
pub fn s_lin_pt_series(d: &CorrelationMatrix, eps: f64, j: f64) -> Result<Vec<f64>> {
    real_sum(d, d.horizon())?;
    let scale = s0(eps, j);
    let mut out = Vec::with_capacity(d.horizon() + 1);
    let mut acc = 0.0;
    out.push(0.0);
    for l in 1..=d.horizon() {
        let off: f64 = (1..l).map(|m| d.get(l, m).re).sum();
        acc += d.get(l, l).re + 2.0 * off;
        out.push(scale * acc);
    }
    Ok(out)
}

/// Inputs of the phenomenological rate models.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PhenoParams {
    /// Correlation decay rate per kick.
    pub gamma: f64,
    /// Oscillation frequency of `D`, radians per kick.
    pub omega: f64,
    pub sigma1_sq: f64,
    pub sigma2_sq: f64,
    pub eps: f64,
    pub j: f64,
}

impl PhenoParams {
    /// Saturated fluctuations and no oscillation.
    pub fn strong_chaos(gamma: f64, eps: f64, j: f64) -> Self {
        Self {
            gamma,
            omega: 0.0,
            sigma1_sq: SIGMA_SAT_SQ,
            sigma2_sq: SIGMA_SAT_SQ,
            eps,
            j,
        }
    }

    pub fn s0(&self) -> f64 {
        s0(self.eps, self.j)
    }

    /// `Gamma0 = S0 D0`.
    pub fn gamma0(&self) -> f64 {
        self.s0() * D0
    }

    fn check_gamma(&self) -> Result<()> {
        if self.gamma.is_nan() || self.gamma <= 0.0 {
            return Err(Error::OutOfDomain(format!(
                "decay rate gamma = {} must be > 0",
                self.gamma
            )));
        }
        Ok(())
    }
}

/// Closed form of `S0 D0 sum_{l,m=1}^t exp(-gamma |l-m|)`:
/// `S0 D0 [t coth(gamma/2) - (1 - e^{-gamma t}) / (cosh gamma - 1)]`.
pub fn pheno_entropy(p: &PhenoParams, t: f64) -> Result<f64> {
    p.check_gamma()?;
    let g = p.gamma;
    let coth = 1.0 / (0.5 * g).tanh();
    // cosh(g) - 1 = 2 sinh^2(g/2), without the cancellation at small g.
    let denom = 2.0 * (0.5 * g).sinh().powi(2);
    Ok(p.gamma0() * (coth * t + (-g * t).exp_m1() / denom))
}

/// `Gamma0 coth(gamma/2)`, the long-time slope of [`pheno_entropy`].
pub fn strong_chaos_rate(p: &PhenoParams) -> Result<f64> {
    p.check_gamma()?;
    Ok(p.gamma0() / (0.5 * p.gamma).tanh())
}

/// Ordinary least-squares line `y = slope x + intercept`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LineFit {
    pub slope: f64,
    pub intercept: f64,
}

pub fn least_squares_line(x: &[f64], y: &[f64]) -> Result<LineFit> {
    if x.len() != y.len() {
        return Err(Error::DimensionMismatch {
            expected: x.len(),
            found: y.len(),
        });
    }
    if x.len() < 2 {
        return Err(invalid("points", "need at least two points for a line"));
    }
    let n = x.len() as f64;
    let mx = x.iter().sum::<f64>() / n;
    let my = y.iter().sum::<f64>() / n;
    let sxx: f64 = x.iter().map(|v| (v - mx).powi(2)).sum();
    if sxx == 0.0 {
        return Err(invalid("points", "abscissae are all equal"));
    }
    let sxy: f64 = x.iter().zip(y).map(|(a, b)| (a - mx) * (b - my)).sum();
    let slope = sxy / sxx;
    Ok(LineFit {
        slope,
        intercept: my - slope * mx,
    })
}

/// Inclusive fitting window in kicks.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct FitWindow {
    pub start: usize,
    pub end: usize,
}

impl Default for FitWindow {
    fn default() -> Self {
        Self { start: 20, end: 100 }
    }
}

/// Entanglement production rate: least-squares slope of `values[t]` against
/// `t` over the window. `values` is indexed by kick count from `t = 0`.
pub fn production_rate(values: &[f64], window: FitWindow) -> Result<f64> {
    if window.end >= values.len() {
        return Err(invalid(
            "fit_window",
            format!(
                "window end {} beyond series end {}",
                window.end,
                values.len().saturating_sub(1)
            ),
        ));
    }
    if window.end < window.start || window.end - window.start + 1 < 3 {
        return Err(invalid("fit_window", "window must contain at least 3 points"));
    }
    let t: Vec<f64> = (window.start..=window.end).map(|v| v as f64).collect();
    Ok(least_squares_line(&t, &values[window.start..=window.end])?.slope)
}

/// Decay rate implied by a measured rate: inverse of `Gamma = Gamma0 coth(gamma/2)`.
pub fn gamma_eff(rate: f64, gamma0: f64) -> Result<f64> {
    let ratio = rate / gamma0;
    if !ratio.is_finite() || ratio <= 1.0 {
        return Err(Error::OutOfDomain(format!("Gamma/Gamma0 = {ratio} must exceed 1")));
    }
    Ok(((ratio + 1.0) / (ratio - 1.0)).ln())
}

/// Rate for `D = sigma1^2 sigma2^2 exp(-gamma|l-m|) exp(i omega (l-m))`:
/// `(sigma1/sigma_sat)^2 (sigma2/sigma_sat)^2 Gamma0 coth(gamma/2)
///  / (1 + (sin(omega/2) / sinh(gamma/2))^2)`.
pub fn improved_rate(p: &PhenoParams) -> Result<f64> {
    let base = strong_chaos_rate(p)?;
    let fluct = (p.sigma1_sq / SIGMA_SAT_SQ) * (p.sigma2_sq / SIGMA_SAT_SQ);
    let detune = (0.5 * p.omega).sin() / (0.5 * p.gamma).sinh();
    Ok(fluct * base / (1.0 + detune * detune))
}

/// Continuous-time rate `(2 S0 D0 / gamma)(1 - e^{-gamma t})`.
pub fn flow_rate(p: &PhenoParams, t: f64) -> Result<f64> {
    p.check_gamma()?;
    Ok(2.0 * p.gamma0() / p.gamma * -(-(p.gamma * t)).exp_m1())
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct OmegaConfig {
    /// Lags are averaged over `t` in `[ceil(fraction * T), T]`.
    pub window_start_fraction: f64,
    /// Zero-padding factor of the transform.
    pub padding: usize,
    /// Local maxima within this fraction of the highest one count as tied;
    /// the lowest such frequency wins.
    pub tie_tolerance: f64,
}

impl Default for OmegaConfig {
    fn default() -> Self {
        Self {
            window_start_fraction: 0.5,
            padding: 4,
            tie_tolerance: 0.1,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct OmegaEstimate {
    /// Peak frequency in `[0, pi]`.
    pub omega: f64,
    /// Frequency resolution of the padded transform.
    pub resolution: f64,
    /// Set when the spectrum has no peak; `omega` is then 0.
    pub flat: bool,
}

/// Oscillation frequency of `D` from the spectrum of its lag sequence.
///
/// `d(tau)` is the mean of `D(t, t - tau)` over the late half of the
/// horizon; negative lags are filled by conjugate symmetry before a
/// zero-padded FFT.
pub fn estimate_omega(d: &CorrelationMatrix, config: &OmegaConfig) -> Result<OmegaEstimate> {
    let horizon = d.horizon();
    if horizon < 16 {
        return Err(invalid("horizon", format!("{horizon} < 16 kicks")));
    }
    if !(0.0..1.0).contains(&config.window_start_fraction) || config.padding == 0 {
        return Err(invalid("omega", "bad window fraction or padding"));
    }
    if !(0.0..1.0).contains(&config.tie_tolerance) {
        return Err(invalid("omega", "tie tolerance must lie in [0, 1)"));
    }
    let t_lo = ((config.window_start_fraction * horizon as f64).ceil() as usize).max(2);
    let tau_max = t_lo - 1;
    let lags: Vec<Complex64> = (0..=tau_max)
        .map(|tau| {
            let sum: Complex64 = (t_lo..=horizon).map(|t| d.get(t, t - tau)).sum();
            sum / (horizon - t_lo + 1) as f64
        })
        .collect();

    let len = config.padding * (2 * tau_max + 1);
    let mut buffer = vec![ZERO; len];
    buffer[0] = lags[0];
    for tau in 1..=tau_max {
        buffer[tau] = lags[tau];
        buffer[len - tau] = lags[tau].conj();
    }
    let fft: Arc<dyn rustfft::Fft<f64>> = FftPlanner::new().plan_fft_forward(len);
    fft.process(&mut buffer);

    let magnitudes: Vec<f64> = buffer.iter().map(|z| z.norm()).collect();
    let max = magnitudes.iter().copied().fold(f64::MIN, f64::max);
    let min = magnitudes.iter().copied().fold(f64::MAX, f64::min);
    let resolution = 2.0 * std::f64::consts::PI / len as f64;
    if max.is_nan() || max <= 0.0 || max - min <= 1e-12 * max {
        return Ok(OmegaEstimate {
            omega: 0.0,
            resolution,
            flat: true,
        });
    }
    // A period-4 rotation makes D carry equal weight at 0 and pi in strong
    // chaos; resolve such ties toward the non-oscillating reading.
    let threshold = (1.0 - config.tie_tolerance) * max;
    let bin = (0..len)
        .filter(|&i| {
            let v = magnitudes[i];
            v >= threshold && v >= magnitudes[(i + len - 1) % len] && v >= magnitudes[(i + 1) % len]
        })
        .map(|i| if i > len / 2 { len - i } else { i })
        .min()
        .expect("the global maximum is a local maximum");
    Ok(OmegaEstimate {
        omega: bin as f64 * resolution,
        resolution,
        flat: false,
    })
}
