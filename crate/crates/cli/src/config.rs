//! Experiment configuration: one TOML file per experiment.

use std::path::PathBuf;

use kicked_tops::analysis::{weak_chaos_scan, FitSettings, CHAOTIC_SEA, SCAN_FIRST_TOP};
use kicked_tops::perturbation::{LagNormalization, OmegaConfig};
use kicked_tops::{CoherentParams, FitWindow, LyapunovAveraging, SpinBasis};
use serde::{Deserialize, Serialize};

use crate::error::CliError;

/// Start used when a kind has no documented default set.
pub const REFERENCE_START: [f64; 2] = [0.89, 0.63];

/// Env var naming the output directory when neither the file nor a flag does.
pub const OUTPUT_DIR_ENV: &str = "KTOPS_OUTPUT_DIR";
pub const FALLBACK_OUTPUT_DIR: &str = "ktops-out";

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ExperimentKind {
    SingleTop,
    Classical,
    Coupled,
    SweepEps,
    SweepK,
    Correlation,
    WeakChaosScan,
    PhenoFit,
}

impl ExperimentKind {
    pub fn name(self) -> &'static str {
        match self {
            Self::SingleTop => "single-top",
            Self::Classical => "classical",
            Self::Coupled => "coupled",
            Self::SweepEps => "sweep-eps",
            Self::SweepK => "sweep-k",
            Self::Correlation => "correlation",
            Self::WeakChaosScan => "weak-chaos-scan",
            Self::PhenoFit => "pheno-fit",
        }
    }

    /// Kinds whose outputs are rate measurements over a fit window.
    fn measures_rates(self) -> bool {
        matches!(self, Self::SweepK | Self::WeakChaosScan | Self::PhenoFit)
    }

    fn coupled(self) -> bool {
        !matches!(self, Self::SingleTop | Self::Classical)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub kind: ExperimentKind,
    pub j: f64,
    #[serde(default = "default_seed")]
    pub seed: u64,
    /// Number of kicks `T`.
    #[serde(default = "default_steps")]
    pub steps: usize,
    #[serde(default)]
    pub tops: Tops,
    #[serde(default)]
    pub fit: Fit,
    #[serde(default)]
    pub ensemble: Ensemble,
    #[serde(default)]
    pub husimi: Husimi,
    #[serde(default)]
    pub poincare: Poincare,
    #[serde(default)]
    pub correlation: Correlation,
    #[serde(default)]
    pub run: RunSection,
}

fn default_seed() -> u64 {
    7
}

fn default_steps() -> usize {
    128
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct Tops {
    /// Kick strengths swept; the first top always uses these.
    pub k: Vec<f64>,
    /// Fixed kick strength of the second top; defaults to the swept `k`.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub k2: Option<f64>,
    pub eps: Vec<f64>,
    /// `[theta, phi]` starts of the first top; the default depends on `kind`.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub init1: Option<Vec<[f64; 2]>>,
    /// Starts of the second top, paired with `init1`; a single entry on
    /// either side is broadcast.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub init2: Option<Vec<[f64; 2]>>,
}

impl Default for Tops {
    fn default() -> Self {
        Self {
            k: vec![3.0],
            k2: None,
            eps: vec![1e-4],
            init1: None,
            init2: None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct Fit {
    /// Inclusive `[start, end]` in kicks.
    pub window: [usize; 2],
    /// Correlation horizon for `sigma_2^2` and `omega`.
    pub horizon: usize,
    /// Also fit the von Neumann entropy (one SVD per kick).
    pub with_vn: bool,
    pub omega_window_start_fraction: f64,
    pub omega_padding: usize,
    pub omega_tie_tolerance: f64,
    /// Phase-space average of the finite-time exponents; the width is `1/sqrt(j)`.
    pub lyapunov_size: usize,
    pub lyapunov_steps: usize,
}

impl Default for Fit {
    fn default() -> Self {
        let omega = OmegaConfig::default();
        Self {
            window: [20, 100],
            horizon: 128,
            with_vn: true,
            omega_window_start_fraction: omega.window_start_fraction,
            omega_padding: omega.padding,
            omega_tie_tolerance: omega.tie_tolerance,
            lyapunov_size: 100,
            lyapunov_steps: 100,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct Ensemble {
    pub size: usize,
    /// Chart width; `1/sqrt(j)` when absent.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub sigma: Option<f64>,
}

impl Default for Ensemble {
    fn default() -> Self {
        Self {
            size: 10_000,
            sigma: None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct Husimi {
    /// Kicks at which a grid is written; empty disables.
    pub times: Vec<usize>,
    pub n_theta: usize,
    pub n_phi: usize,
}

impl Default for Husimi {
    fn default() -> Self {
        Self {
            times: Vec::new(),
            n_theta: 60,
            n_phi: 120,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct Poincare {
    /// Orbit length; 0 disables.
    pub steps: usize,
}

impl Default for Poincare {
    fn default() -> Self {
        Self { steps: 500 }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct Correlation {
    pub tau_max: usize,
    pub normalization: LagNormalization,
}

impl Default for Correlation {
    fn default() -> Self {
        Self {
            tau_max: 40,
            normalization: LagNormalization::None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct RunSection {
    /// Worker threads for sweep points; 0 lets the pool decide.
    pub workers: usize,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub output_dir: Option<PathBuf>,
}

fn bad(field: impl Into<String>, reason: impl Into<String>) -> CliError {
    CliError::Config {
        field: field.into(),
        reason: reason.into(),
    }
}

fn finite(field: &str, v: f64) -> Result<(), CliError> {
    if v.is_finite() {
        Ok(())
    } else {
        Err(bad(field, format!("{v} is not finite")))
    }
}

fn starts(field: &str, raw: &[[f64; 2]]) -> Result<Vec<CoherentParams>, CliError> {
    if raw.is_empty() {
        return Err(bad(field, "needs at least one start"));
    }
    raw.iter()
        .enumerate()
        .map(|(i, &[theta, phi])| {
            CoherentParams::new(theta, phi).map_err(|e| bad(format!("{field}[{i}]"), e.to_string()))
        })
        .collect()
}

impl ExperimentConfig {
    pub fn from_toml(text: &str) -> Result<Self, CliError> {
        toml::from_str(text).map_err(|e| bad("config", e.message().to_string() + &span_hint(text, e.span())))
    }

    pub fn to_toml(&self) -> String {
        toml::to_string(self).expect("config is always representable")
    }

    fn default_init1(&self) -> Vec<[f64; 2]> {
        match self.kind {
            ExperimentKind::SweepK | ExperimentKind::PhenoFit => CHAOTIC_SEA.iter().map(|&(t, p)| [t, p]).collect(),
            ExperimentKind::WeakChaosScan => vec![[SCAN_FIRST_TOP.0, SCAN_FIRST_TOP.1]],
            _ => vec![REFERENCE_START],
        }
    }

    fn default_init2(&self, init1: &[[f64; 2]]) -> Vec<[f64; 2]> {
        match self.kind {
            ExperimentKind::WeakChaosScan => weak_chaos_scan().iter().map(|&(t, p)| [t, p]).collect(),
            _ => init1.to_vec(),
        }
    }

    /// Resolved starts of the first top.
    pub fn init1(&self) -> Result<Vec<CoherentParams>, CliError> {
        let raw = self.tops.init1.clone().unwrap_or_else(|| self.default_init1());
        starts("tops.init1", &raw)
    }

    /// Resolved `(first, second)` start pairs of a coupled experiment.
    pub fn start_pairs(&self) -> Result<Vec<(CoherentParams, CoherentParams)>, CliError> {
        let first = self.init1()?;
        let raw1 = self.tops.init1.clone().unwrap_or_else(|| self.default_init1());
        let raw2 = self.tops.init2.clone().unwrap_or_else(|| self.default_init2(&raw1));
        let second = starts("tops.init2", &raw2)?;
        match (first.len(), second.len()) {
            (a, b) if a == b => Ok(first.into_iter().zip(second).collect()),
            (1, _) => Ok(second.into_iter().map(|s| (first[0], s)).collect()),
            (_, 1) => Ok(first.into_iter().map(|f| (f, second[0])).collect()),
            (a, b) => Err(bad(
                "tops.init2",
                format!("{b} starts cannot pair with {a} in tops.init1"),
            )),
        }
    }

    pub fn fit_window(&self) -> FitWindow {
        FitWindow {
            start: self.fit.window[0],
            end: self.fit.window[1],
        }
    }

    pub fn ensemble_sigma(&self) -> f64 {
        self.ensemble.sigma.unwrap_or(1.0 / self.j.sqrt())
    }

    pub fn fit_settings(&self, eps: f64) -> FitSettings {
        let mut s = FitSettings::new(self.j, eps, self.seed);
        s.window = self.fit_window();
        s.horizon = self.fit.horizon;
        s.with_vn = self.fit.with_vn;
        s.lyapunov = LyapunovAveraging {
            size: self.fit.lyapunov_size,
            steps: self.fit.lyapunov_steps,
            ..LyapunovAveraging::for_spin(self.j, self.seed)
        };
        s.omega = OmegaConfig {
            window_start_fraction: self.fit.omega_window_start_fraction,
            padding: self.fit.omega_padding,
            tie_tolerance: self.fit.omega_tie_tolerance,
        };
        s
    }

    /// Checks every field against the preconditions of the routines it feeds.
    pub fn validate(&self) -> Result<(), CliError> {
        finite("j", self.j)?;
        let basis = SpinBasis::new(self.j).map_err(|e| bad("j", e.to_string()))?;
        if basis.j() > 400.0 {
            return Err(bad("j", format!("{} is beyond the supported range (<= 400)", self.j)));
        }
        if self.steps == 0 {
            return Err(bad("steps", "need at least one kick"));
        }

        if self.tops.k.is_empty() {
            return Err(bad("tops.k", "needs at least one value"));
        }
        for (i, &k) in self.tops.k.iter().enumerate() {
            finite(&format!("tops.k[{i}]"), k)?;
        }
        if let Some(k2) = self.tops.k2 {
            finite("tops.k2", k2)?;
        }
        if self.tops.eps.is_empty() {
            return Err(bad("tops.eps", "needs at least one value"));
        }
        let needs_positive = self.kind.measures_rates() || self.kind == ExperimentKind::SweepEps;
        for (i, &eps) in self.tops.eps.iter().enumerate() {
            let field = format!("tops.eps[{i}]");
            finite(&field, eps)?;
            if eps < 0.0 || (needs_positive && eps == 0.0) {
                return Err(bad(
                    field,
                    format!("{eps} must be {}", if needs_positive { "> 0" } else { ">= 0" }),
                ));
            }
        }
        if self.kind.measures_rates() {
            if self.tops.eps.len() != 1 {
                return Err(bad(
                    "tops.eps",
                    format!("{} takes exactly one coupling", self.kind.name()),
                ));
            }
            if self.tops.k2.is_some() {
                return Err(bad("tops.k2", format!("{} kicks both tops with k", self.kind.name())));
            }
        }
        if self.kind.coupled() {
            let pairs = self.start_pairs()?;
            if self.kind.measures_rates() {
                // the finite-time exponents are averaged over a 1/sqrt(j) ensemble
                let sigma = 1.0 / self.j.sqrt();
                for (i, (a, b)) in pairs.iter().enumerate() {
                    for (field, p) in [("tops.init1", a), ("tops.init2", b)] {
                        if off_pole(p, sigma).is_err() {
                            return Err(bad(
                                format!("{field} (pair {i})"),
                                format!("theta {} within 3/sqrt(j) of a pole", p.theta()),
                            ));
                        }
                    }
                }
            }
        } else {
            self.init1()?;
        }

        let [start, end] = self.fit.window;
        if end < start || end - start + 1 < 3 {
            return Err(bad("fit.window", "must contain at least 3 kicks"));
        }
        if self.kind.measures_rates() && end > self.steps {
            return Err(bad("fit.window", format!("end {end} beyond steps {}", self.steps)));
        }
        if self.fit.horizon < 16 || self.fit.horizon < end {
            return Err(bad("fit.horizon", "must be at least 16 and cover the fit window"));
        }
        if !(0.0..1.0).contains(&self.fit.omega_window_start_fraction) {
            return Err(bad("fit.omega_window_start_fraction", "must lie in [0, 1)"));
        }
        if self.fit.omega_padding == 0 {
            return Err(bad("fit.omega_padding", "must be at least 1"));
        }
        if !(0.0..1.0).contains(&self.fit.omega_tie_tolerance) {
            return Err(bad("fit.omega_tie_tolerance", "must lie in [0, 1)"));
        }
        if self.fit.lyapunov_size == 0 {
            return Err(bad("fit.lyapunov_size", "must be at least 1"));
        }
        if self.fit.lyapunov_steps == 0 {
            return Err(bad("fit.lyapunov_steps", "must be at least 1"));
        }

        if self.ensemble.size < 2 {
            return Err(bad("ensemble.size", "must be at least 2"));
        }
        if let Some(sigma) = self.ensemble.sigma {
            if !(sigma > 0.0 && sigma.is_finite()) {
                return Err(bad("ensemble.sigma", format!("{sigma} must be positive")));
            }
        }
        if self.kind == ExperimentKind::Classical {
            let sigma = self.ensemble_sigma();
            for (i, p) in self.init1()?.iter().enumerate() {
                off_pole(p, sigma)
                    .map_err(|_| bad(format!("tops.init1[{i}]"), "theta within 3 ensemble widths of a pole"))?;
            }
        }

        if let Some(t) = self.husimi.times.iter().find(|&&t| t > self.steps) {
            return Err(bad("husimi.times", format!("{t} beyond steps {}", self.steps)));
        }
        if self.husimi.n_theta == 0 || self.husimi.n_phi == 0 {
            return Err(bad("husimi", "grid needs at least one point per axis"));
        }
        Ok(())
    }
}

fn off_pole(p: &CoherentParams, sigma: f64) -> Result<(), ()> {
    if p.theta() < 3.0 * sigma || p.theta() > std::f64::consts::PI - 3.0 * sigma {
        Err(())
    } else {
        Ok(())
    }
}

/// ` (line L)` for a byte span, when known.
fn span_hint(text: &str, span: Option<std::ops::Range<usize>>) -> String {
    match span {
        Some(r) => format!(" (line {})", text[..r.start.min(text.len())].lines().count().max(1)),
        None => String::new(),
    }
}
