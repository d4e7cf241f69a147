//! One runner per experiment kind. Each computes its points concurrently,
//! then writes them in sweep order, stopping at the first failed point so
//! that everything written before it stays valid.

use kicked_tops::analysis::{
    fit_row, gamma_tilde0, measure_rate, median, parallel_map, weak_chaos_summary, FitRow, RateMeasurement,
};
use kicked_tops::classical::{ensemble_variance_series, lambda_sum, poincare_section, sample_ensemble};
use kicked_tops::coupled::{entropy_series, final_entropies};
use kicked_tops::perturbation::{
    correlation_matrix, estimate_omega, least_squares_line, product_correlation, production_rate, s0, D0,
};
use kicked_tops::quantum_top::{build_floquet, variance_series};
use kicked_tops::spin::{coherent_state, husimi, husimi_grid};
use kicked_tops::{CoherentParams, CorrelationLabel, CoupledParams, SpinBasis, TopParams, VarianceSeries};
use serde_json::{json, Value};

use crate::config::{ExperimentConfig, ExperimentKind};
use crate::error::CliError;
use crate::output::{fmt_f64 as f, Outputs};

pub const FIT_REPORT_HEADER: [&str; 9] = [
    "k",
    "ic",
    "Gamma_over_Gamma0",
    "GammaVN_over_GammaTilde0",
    "gamma_eff",
    "lambda_sum",
    "omega",
    "sigma2_ratio",
    "gamma_eff_status",
];

pub const RATES_HEADER: [&str; 7] = [
    "k",
    "ic",
    "Gamma_over_Gamma0",
    "GammaVN_over_GammaTilde0",
    "gamma_eff",
    "lambda_sum",
    "gamma_eff_status",
];

/// Runs `config` and returns the manifest summary.
pub fn execute(config: &ExperimentConfig, out: &mut Outputs) -> Result<Value, CliError> {
    match config.kind {
        ExperimentKind::SingleTop => single_top(config, out),
        ExperimentKind::Classical => classical(config, out),
        ExperimentKind::Coupled => coupled(config, out),
        ExperimentKind::SweepEps => sweep_eps(config, out),
        ExperimentKind::SweepK => sweep_k(config, out),
        ExperimentKind::Correlation => correlation(config, out),
        ExperimentKind::WeakChaosScan | ExperimentKind::PhenoFit => fit_report(config, out),
    }
}

fn batch<T, R, F>(config: &ExperimentConfig, items: &[T], f: F) -> Result<Vec<kicked_tops::Result<R>>, CliError>
where
    T: Sync,
    R: Send,
    F: Fn(&T) -> kicked_tops::Result<R> + Sync + Send,
{
    Ok(parallel_map(items, config.run.workers, |item| Ok(f(item)))?)
}

fn basis(config: &ExperimentConfig) -> kicked_tops::Result<SpinBasis> {
    SpinBasis::new(config.j)
}

fn series_rows(s: &VarianceSeries) -> Vec<Vec<String>> {
    s.times
        .iter()
        .zip(&s.values)
        .map(|(t, v)| vec![t.to_string(), f(*v)])
        .collect()
}

fn variance_summary(config: &ExperimentConfig, s: &VarianceSeries) -> Value {
    let w = config.fit_window();
    json!({
        "final": s.values.last(),
        "window_mean": s.window_mean(w.start, w.end),
    })
}

fn single_top(config: &ExperimentConfig, out: &mut Outputs) -> Result<Value, CliError> {
    let starts = config.init1()?;
    let jobs: Vec<(usize, f64, usize, CoherentParams)> = config
        .tops
        .k
        .iter()
        .enumerate()
        .flat_map(|(ki, &k)| starts.iter().enumerate().map(move |(ii, &s)| (ki, k, ii, s)))
        .collect();
    let mut times = config.husimi.times.clone();
    times.sort_unstable();
    times.dedup();
    let grid = husimi_grid(config.husimi.n_theta, config.husimi.n_phi);
    let results = batch(config, &jobs, |&(_, k, _, start)| {
        let params = TopParams::new(basis(config)?, k)?;
        let series = variance_series(&params, start, config.steps)?;
        let mut frames = Vec::with_capacity(times.len());
        if !times.is_empty() {
            let floquet = build_floquet(&params);
            let mut state = coherent_state(params.basis(), start);
            let mut t = 0;
            for &target in &times {
                while t < target {
                    state = floquet.apply(&state)?;
                    t += 1;
                }
                frames.push((target, husimi(&state, &grid)?));
            }
        }
        Ok((series, frames))
    })?;
    let mut summary = Vec::new();
    for (&(ki, k, ii, _), res) in jobs.iter().zip(results) {
        let (series, frames) = res?;
        out.write_csv(
            &format!("variance_k{ki}_ic{ii}.csv"),
            &["t", "sigma2"],
            series_rows(&series),
        )?;
        for (t, q) in frames {
            let rows = grid.iter().zip(q).map(|(p, v)| vec![f(p.theta()), f(p.phi()), f(v)]);
            out.write_csv(&format!("husimi_k{ki}_ic{ii}_t{t}.csv"), &["theta", "phi", "Q"], rows)?;
        }
        summary.push(json!({"k": k, "ic": ii, "sigma2": variance_summary(config, &series)}));
    }
    Ok(json!({ "variance": summary }))
}

fn classical(config: &ExperimentConfig, out: &mut Outputs) -> Result<Value, CliError> {
    let starts = config.init1()?;
    let jobs: Vec<(usize, f64, usize, CoherentParams)> = config
        .tops
        .k
        .iter()
        .enumerate()
        .flat_map(|(ki, &k)| starts.iter().enumerate().map(move |(ii, &s)| (ki, k, ii, s)))
        .collect();
    let results = batch(config, &jobs, |&(_, k, _, start)| {
        let ensemble = sample_ensemble(start, config.ensemble_sigma(), config.ensemble.size, config.seed)?;
        ensemble_variance_series(&ensemble, k, config.steps)
    })?;
    let mut summary = Vec::new();
    for (&(ki, k, ii, _), res) in jobs.iter().zip(results) {
        let series = res?;
        out.write_csv(
            &format!("variance_classical_k{ki}_ic{ii}.csv"),
            &["t", "sigma2"],
            series_rows(&series),
        )?;
        summary.push(json!({"k": k, "ic": ii, "sigma2": variance_summary(config, &series)}));
    }
    if config.poincare.steps > 0 {
        for (ki, &k) in config.tops.k.iter().enumerate() {
            let points = poincare_section(k, &starts, config.poincare.steps)?;
            let rows = points
                .iter()
                .map(|p| vec![p.orbit_id.to_string(), p.t.to_string(), f(p.theta), f(p.phi)]);
            out.write_csv(&format!("poincare_k{ki}.csv"), &["orbit_id", "t", "theta", "phi"], rows)?;
        }
    }
    Ok(json!({ "variance": summary }))
}

type Pair = (CoherentParams, CoherentParams);
/// `(k index, k, eps index, eps, ic index, pair)`.
type Job = (usize, f64, usize, f64, usize, Pair);

/// Every `(k, eps, start pair)` combination, k slowest.
fn coupled_jobs(config: &ExperimentConfig) -> Result<Vec<Job>, CliError> {
    let pairs = config.start_pairs()?;
    let mut jobs = Vec::new();
    for (ki, &k) in config.tops.k.iter().enumerate() {
        for (ei, &eps) in config.tops.eps.iter().enumerate() {
            for (ii, &pair) in pairs.iter().enumerate() {
                jobs.push((ki, k, ei, eps, ii, pair));
            }
        }
    }
    Ok(jobs)
}

fn coupled_params(config: &ExperimentConfig, k: f64, eps: f64) -> kicked_tops::Result<CoupledParams> {
    CoupledParams::new(basis(config)?, k, config.tops.k2.unwrap_or(k), eps)
}

fn coupled(config: &ExperimentConfig, out: &mut Outputs) -> Result<Value, CliError> {
    let jobs = coupled_jobs(config)?;
    let results = batch(config, &jobs, |&(_, k, _, eps, _, (a, b))| {
        entropy_series(&coupled_params(config, k, eps)?, a, b, config.steps)
    })?;
    let window = config.fit_window();
    let mut summary = Vec::new();
    for (&(ki, k, ei, eps, ii, _), res) in jobs.iter().zip(results) {
        let s = res?;
        let rows = s
            .times
            .iter()
            .zip(s.s_lin.iter().zip(&s.s_vn))
            .map(|(t, (l, v))| vec![t.to_string(), f(*l), f(*v)]);
        out.write_csv(
            &format!("entropy_k{ki}_eps{ei}_ic{ii}.csv"),
            &["t", "S_lin", "S_vN"],
            rows,
        )?;
        let (rate_lin, rate_vn) = if window.end <= config.steps {
            (
                production_rate(&s.s_lin, window).ok(),
                production_rate(&s.s_vn, window).ok(),
            )
        } else {
            (None, None)
        };
        summary.push(json!({
            "k": k, "eps": eps, "ic": ii,
            "final_S_lin": s.s_lin.last(), "final_S_vN": s.s_vn.last(),
            "rate_S_lin": rate_lin, "rate_S_vN": rate_vn,
        }));
    }
    Ok(json!({ "entropy": summary }))
}

fn sweep_eps(config: &ExperimentConfig, out: &mut Outputs) -> Result<Value, CliError> {
    let jobs = coupled_jobs(config)?;
    let results = batch(config, &jobs, |&(_, k, _, eps, _, (a, b))| {
        final_entropies(&coupled_params(config, k, eps)?, a, b, config.steps)
    })?;
    let mut finals = Vec::with_capacity(jobs.len());
    let mut failure = None;
    for res in results {
        match res {
            Ok(v) => finals.push(v),
            Err(e) => {
                failure = Some(e);
                break;
            }
        }
    }
    let mut order: Vec<usize> = (0..finals.len()).collect();
    // grouped by (k, ic) so each eps series is contiguous
    order.sort_by_key(|&i| (jobs[i].0, jobs[i].4, jobs[i].2));
    let rows = order.iter().map(|&i| {
        let (_, k, _, eps, ii, _) = jobs[i];
        vec![f(k), ii.to_string(), f(eps), f(finals[i].0), f(finals[i].1)]
    });
    out.write_csv("sweep_eps.csv", &["k", "ic", "eps", "S_lin", "S_vN"], rows)?;
    if let Some(e) = failure {
        return Err(e.into());
    }

    let mut slopes = Vec::new();
    for (ki, &k) in config.tops.k.iter().enumerate() {
        for ii in 0..config.start_pairs()?.len() {
            let picked: Vec<usize> = (0..jobs.len())
                .filter(|&i| jobs[i].0 == ki && jobs[i].4 == ii)
                .collect();
            let usable: Vec<usize> = picked
                .iter()
                .copied()
                .filter(|&i| finals[i].0 > 0.0 && finals[i].1 > 0.0)
                .collect();
            if usable.len() < 2 {
                continue;
            }
            let x: Vec<f64> = usable.iter().map(|&i| jobs[i].3.ln()).collect();
            let lin: Vec<f64> = usable.iter().map(|&i| finals[i].0.ln()).collect();
            let vn: Vec<f64> = usable.iter().map(|&i| finals[i].1.ln()).collect();
            slopes.push(json!({
                "k": k, "ic": ii,
                "loglog_slope_S_lin": least_squares_line(&x, &lin)?.slope,
                "loglog_slope_S_vN": least_squares_line(&x, &vn)?.slope,
            }));
        }
    }
    Ok(json!({ "slopes": slopes }))
}

fn gamma_eff_cells(g: Option<f64>) -> (String, &'static str) {
    match g {
        Some(v) => (f(v), "ok"),
        None => ("NaN".into(), "out_of_domain"),
    }
}

fn opt(v: Option<f64>) -> String {
    v.map_or_else(|| "NaN".into(), f)
}

/// Median of `gamma_eff` counting out-of-domain rows as infinitely fast decay.
fn median_gamma_eff(values: &[Option<f64>]) -> Option<f64> {
    let v: Vec<f64> = values.iter().map(|g| g.unwrap_or(f64::INFINITY)).collect();
    median(&v).filter(|m| m.is_finite())
}

fn per_k_medians(ks: &[f64], rows: &[(f64, f64, Option<f64>)]) -> Vec<Value> {
    ks.iter()
        .map(|&k| {
            let picked: Vec<&(f64, f64, Option<f64>)> = rows.iter().filter(|r| r.0 == k).collect();
            let ratios: Vec<f64> = picked.iter().map(|r| r.1).collect();
            let gammas: Vec<Option<f64>> = picked.iter().map(|r| r.2).collect();
            json!({
                "k": k,
                "n": picked.len(),
                "median_Gamma_over_Gamma0": median(&ratios),
                "median_gamma_eff": median_gamma_eff(&gammas),
            })
        })
        .collect()
}

fn sweep_k(config: &ExperimentConfig, out: &mut Outputs) -> Result<Value, CliError> {
    let jobs = coupled_jobs(config)?;
    let eps = config.tops.eps[0];
    let settings = config.fit_settings(eps);
    let results = batch(config, &jobs, |&(_, k, _, eps, _, (a, b))| {
        let rate = measure_rate(
            &coupled_params(config, k, eps)?,
            a,
            b,
            settings.window,
            settings.with_vn,
        )?;
        Ok((rate, lambda_sum(a, k, b, k, &settings.lyapunov)?))
    })?;
    let mut done: Vec<(f64, usize, RateMeasurement, f64)> = Vec::new();
    let mut failure = None;
    for (&(_, k, _, _, ii, _), res) in jobs.iter().zip(results) {
        match res {
            Ok((rate, lsum)) => done.push((k, ii, rate, lsum)),
            Err(e) => {
                failure = Some(e);
                break;
            }
        }
    }
    let rows = done.iter().map(|(k, ii, rate, lsum)| {
        let (g, status) = gamma_eff_cells(rate.gamma_eff().ok());
        vec![
            f(*k),
            ii.to_string(),
            f(rate.ratio()),
            opt(rate.vn_ratio(eps, config.j)),
            g,
            f(*lsum),
            status.into(),
        ]
    });
    out.write_csv("rates.csv", &RATES_HEADER, rows)?;
    if let Some(e) = failure {
        return Err(e.into());
    }
    let triples: Vec<(f64, f64, Option<f64>)> = done
        .iter()
        .map(|(k, _, r, _)| (*k, r.ratio(), r.gamma_eff().ok()))
        .collect();
    let mut medians = per_k_medians(&config.tops.k, &triples);
    for (m, &k) in medians.iter_mut().zip(&config.tops.k) {
        let l: Vec<f64> = done.iter().filter(|r| r.0 == k).map(|r| r.3).collect();
        m["median_lambda_sum"] = json!(median(&l));
    }
    Ok(json!({ "rates": rate_scales(eps, config.j), "per_k": medians }))
}

fn rate_scales(eps: f64, j: f64) -> Value {
    json!({ "Gamma0": s0(eps, j) * D0, "GammaTilde0": gamma_tilde0(eps, j) })
}

fn fit_report(config: &ExperimentConfig, out: &mut Outputs) -> Result<Value, CliError> {
    let jobs = coupled_jobs(config)?;
    let eps = config.tops.eps[0];
    let settings = config.fit_settings(eps);
    let results = batch(config, &jobs, |&(_, k, _, _, _, (a, b))| fit_row(k, a, b, &settings))?;
    let mut done: Vec<(usize, FitRow)> = Vec::new();
    let mut failure = None;
    for (&(_, _, _, _, ii, _), res) in jobs.iter().zip(results) {
        match res {
            Ok(row) => done.push((ii, row)),
            Err(e) => {
                failure = Some(e);
                break;
            }
        }
    }
    let rows = done.iter().map(|(ii, r)| {
        let (g, status) = gamma_eff_cells(r.gamma_eff);
        vec![
            f(r.k),
            ii.to_string(),
            f(r.rate_ratio),
            opt(r.vn_ratio),
            g,
            f(r.lambda_sum),
            f(r.omega),
            f(r.sigma2_ratio),
            status.into(),
        ]
    });
    out.write_csv("fit_report.csv", &FIT_REPORT_HEADER, rows)?;
    if let Some(e) = failure {
        return Err(e.into());
    }
    let fit_rows: Vec<FitRow> = done.into_iter().map(|(_, r)| r).collect();
    let triples: Vec<(f64, f64, Option<f64>)> = fit_rows.iter().map(|r| (r.k, r.rate_ratio, r.gamma_eff)).collect();
    let comparison = if fit_rows.len() >= 2 {
        let s = weak_chaos_summary(&fit_rows, eps, config.j)?;
        json!({
            "slope": s.fit.slope,
            "intercept": s.fit.intercept,
            "mae_strong": s.mae_strong,
            "mae_improved": s.mae_improved,
            "improvement": s.improvement(),
        })
    } else {
        Value::Null
    };
    Ok(json!({
        "rates": rate_scales(eps, config.j),
        "per_k": per_k_medians(&config.tops.k, &triples),
        "linear_fit_vs_lambda_sum": comparison,
    }))
}

fn correlation(config: &ExperimentConfig, out: &mut Outputs) -> Result<Value, CliError> {
    let pairs = config.start_pairs()?;
    let jobs: Vec<(usize, f64, usize, Pair)> = config
        .tops
        .k
        .iter()
        .enumerate()
        .flat_map(|(ki, &k)| pairs.iter().enumerate().map(move |(ii, &p)| (ki, k, ii, p)))
        .collect();
    let omega_config = config.fit_settings(config.tops.eps[0]).omega;
    let results = batch(config, &jobs, |&(_, k, _, (a, b))| {
        let b1 = basis(config)?;
        let c1 = correlation_matrix(&TopParams::new(b1, k)?, a, config.steps, CorrelationLabel::Top1)?;
        let k2 = config.tops.k2.unwrap_or(k);
        let c2 = correlation_matrix(&TopParams::new(b1, k2)?, b, config.steps, CorrelationLabel::Top2)?;
        product_correlation(&c1, &c2)
    })?;
    let mut summary = Vec::new();
    for (&(ki, k, ii, _), res) in jobs.iter().zip(results) {
        let d = res?;
        let mut rows = Vec::new();
        for t in 1..=d.horizon() {
            let lags = d.lag_profile(t, config.correlation.tau_max, config.correlation.normalization)?;
            for (tau, z) in lags.iter().enumerate() {
                rows.push(vec![t.to_string(), tau.to_string(), f(z.re), f(z.im)]);
            }
        }
        out.write_csv(
            &format!("correlation_k{ki}_ic{ii}.csv"),
            &["t", "tau", "ReD", "ImD"],
            rows,
        )?;
        let omega = if d.horizon() >= 16 {
            estimate_omega(&d, &omega_config).ok()
        } else {
            None
        };
        summary.push(json!({
            "k": k, "ic": ii,
            "omega": omega.map(|o| o.omega),
            "omega_flat": omega.map(|o| o.flat),
        }));
    }
    Ok(json!({ "correlation": summary }))
}
