use std::path::Path;

use serde_json::{json, Value};

use mixrank_core::container;
use mixrank_core::lowrank::{
    beta_general, beta_isotropic, beta_mixed, beta_split, dof_estimates, optimal_sigma, rank_bound_bivariate,
    rank_bound_split, SplitLayout,
};
use mixrank_core::sparse_tensor::{
    index_set, predicted_sparse_rate, sigma_choices, sparse_dim, AnisotropyWeights, SmoothnessProfile,
};
use mixrank_core::tensor_train::{rank_schedule, tt_error_bound, tt_storage, tt_svd, tt_to_full, TtPolicy};
use mixrank_core::testbed::{
    dense_svd_reference, fit_decay, pipeline_singular_values, rank_errors, sparse_convergence, wavelet_coefficients,
    FitWindow, OracleFunction,
};
use mixrank_core::{DenseTensor, Error};

use crate::config::{
    resolve_weights, DecayConfig, DimConfig, FunctionSpec, RatesConfig, SparseConvergenceConfig, SpectrumMethod,
    TtConfig, TtInput, TtPolicySpec,
};
use crate::error::CliError;
use crate::output::{write_json, Cell, Table};

fn config_error(msg: impl Into<String>) -> CliError {
    CliError::Config(msg.into())
}

/// Budgets sorted ascending; NaN is rejected.
fn sorted_budgets(budgets: &[f64]) -> Result<Vec<f64>, CliError> {
    if budgets.is_empty() {
        return Err(config_error("budgets must not be empty"));
    }
    if budgets.iter().any(|b| !b.is_finite()) {
        return Err(config_error("budgets must be finite"));
    }
    let mut sorted = budgets.to_vec();
    sorted.sort_by(f64::total_cmp);
    sorted.dedup();
    Ok(sorted)
}

pub fn dim(cfg: &DimConfig, out: &Path) -> Result<(), CliError> {
    let m = cfg.n.len();
    let weights = resolve_weights(&cfg.alpha, cfg.sigma, m)?;
    // Only n enters the dimension count.
    let profile = SmoothnessProfile::from_smoothness(cfg.n.clone(), vec![1.0; m])?;
    let mut table = Table::new(&["J", "exact_dim", "bound", "ratio"]);
    let mut sets = Vec::new();
    for budget in sorted_budgets(&cfg.budgets)? {
        let set = index_set(&weights, budget, m)?;
        let d = sparse_dim(&set, &profile)?;
        table.push(vec![budget.into(), d.exact.into(), d.bound.into(), d.ratio().into()]);
        if cfg.index_sets {
            sets.push(json!({ "budget": budget, "indices": set.indices, "surface": set.surface }));
        }
    }
    table.write(&out.join("dim.csv"))?;
    if cfg.index_sets {
        write_json(&out.join("index_sets.json"), &sets)?;
    }
    Ok(())
}

fn valid_name(name: &str) -> bool {
    !name.is_empty() && name.chars().all(|c| c.is_ascii_alphanumeric() || c == '_' || c == '-')
}

pub fn decay(cfg: &DecayConfig, out: &Path) -> Result<(), CliError> {
    if cfg.runs.is_empty() {
        return Err(config_error("decay needs at least one run"));
    }
    if cfg.max_rank < 4 {
        return Err(config_error("max_rank must be at least 4"));
    }
    let mut names: Vec<&str> = cfg.runs.iter().map(|r| r.name.as_str()).collect();
    if let Some(bad) = names.iter().find(|n| !valid_name(n)) {
        return Err(config_error(format!(
            "run name {bad:?} must be nonempty ASCII letters, digits, '_' or '-'"
        )));
    }
    names.sort_unstable();
    if names.windows(2).any(|w| w[0] == w[1]) {
        return Err(config_error("run names must be unique"));
    }
    let window = match cfg.window {
        Some(w) => w,
        None => FitWindow {
            min: 3.0,
            max: cfg.max_rank as f64,
        },
    };
    let mut reports = Vec::new();
    for run in &cfg.runs {
        let f = run.oracle.build()?;
        let sv = match cfg.method {
            SpectrumMethod::Dense => dense_svd_reference(&f, cfg.level, cfg.split)?,
            SpectrumMethod::Pipeline => pipeline_singular_values(&f, cfg.level, cfg.split)?,
        };
        let errors = rank_errors(&sv);
        let error_at = |tail: &[f64], r: usize| tail.get(r).copied().unwrap_or(0.0);
        let ranks: Vec<f64> = (1..=cfg.max_rank).map(|r| r as f64).collect();
        let measured: Vec<f64> = (1..=cfg.max_rank).map(|r| error_at(&errors, r)).collect();

        let prediction = match &run.prediction {
            Some(p) => {
                let profile = SmoothnessProfile::from_smoothness(p.n.clone(), p.s.clone())?;
                if profile.m() != f.arity() {
                    return Err(config_error(format!(
                        "run {}: prediction has the wrong number of subdomains",
                        run.name
                    )));
                }
                Some((beta_split(&SplitLayout::new(profile, cfg.split)?)?, p.log_correction))
            }
            None => None,
        };
        let log_power = prediction.and_then(|(p, correct)| correct.then_some(p.log_exponent));
        let fit = fit_decay(&ranks, &measured, window, log_power, prediction.map(|(p, _)| p.beta))?;

        let exact_tail = f.exact_singular_values().map(rank_errors);
        let mut table = Table::new(&["rank", "error", "predicted"]);
        for (i, &e) in measured.iter().enumerate() {
            let r = i + 1;
            let predicted = match &exact_tail {
                Some(tail) => Some(error_at(tail, r)),
                None => {
                    let x = r as f64;
                    let model = fit.constant * x.powf(-fit.exponent) * x.ln().powf(log_power.unwrap_or(0.0));
                    model.is_finite().then_some(model)
                }
            };
            table.push(vec![r.into(), e.into(), predicted.into()]);
        }
        table.write(&out.join(format!("decay_{}.csv", run.name)))?;
        reports.push(json!({
            "name": run.name,
            "oracle": run.oracle,
            "level": cfg.level,
            "split": cfg.split,
            "method": cfg.method,
            "predicted_column": if exact_tail.is_some() { "closed-form tail" } else { "fitted model" },
            "rate_prediction": prediction.map(|(p, _)| p),
            "leading_singular_values": &sv[..sv.len().min(cfg.max_rank)],
            "fit": fit,
        }));
    }
    write_json(&out.join("decay.json"), &reports)
}

fn sin_product(x: &[f64]) -> f64 {
    (std::f64::consts::PI * x[0]).sin() * (std::f64::consts::PI * x[1]).sin()
}

pub fn sparse_convergence_cmd(cfg: &SparseConvergenceConfig, out: &Path) -> Result<(), CliError> {
    let weights = resolve_weights(&cfg.alpha, cfg.sigma, 2)?;
    let budgets = sorted_budgets(&cfg.budgets)?;
    let rows = match &cfg.function {
        FunctionSpec::SinProduct => sparse_convergence(sin_product, &weights, &budgets, cfg.ref_level)?,
        FunctionSpec::Constant { value } => {
            let v = *value;
            sparse_convergence(move |_: &[f64]| v, &weights, &budgets, cfg.ref_level)?
        }
        FunctionSpec::Oracle { oracle } => {
            let f = oracle.build()?;
            if f.arity() != 2 {
                return Err(config_error("sparse convergence needs a bivariate function"));
            }
            sparse_convergence(|x: &[f64]| f.eval(x), &weights, &budgets, cfg.ref_level)?
        }
    };
    let mut table = Table::new(&["J", "dof", "error"]);
    for row in &rows {
        table.push(vec![row.budget.into(), row.dof.into(), row.error.into()]);
    }
    table.write(&out.join("sparse_convergence.csv"))?;

    let xs: Vec<f64> = rows.iter().map(|r| r.budget.exp2()).collect();
    let es: Vec<f64> = rows.iter().map(|r| r.error).collect();
    // Too few usable points (for example an exactly represented function)
    // leaves the fit empty rather than failing the run.
    let fit = match cfg.window.map_or_else(|| FitWindow::skip_two_smallest(&xs), Ok) {
        Ok(window) => match fit_decay(&xs, &es, window, cfg.log_power, cfg.predicted) {
            Ok(report) => Some(report),
            Err(Error::Validation(_)) => None,
            Err(e) => return Err(e.into()),
        },
        Err(_) => None,
    };
    write_json(
        &out.join("sparse_convergence.json"),
        &json!({ "function": cfg.function, "weights": weights, "ref_level": cfg.ref_level, "rows": rows, "fit": fit }),
    )
}

fn tt_input(input: &TtInput) -> Result<(DenseTensor, Option<OracleFunction>), CliError> {
    match input {
        TtInput::Oracle { oracle, level } => {
            let f = oracle.build()?;
            let coeffs = wavelet_coefficients(&f, &vec![*level; f.arity()])?;
            Ok((coeffs.to_dense(), Some(f)))
        }
        TtInput::RankOne { factors } => {
            if factors.len() < 2 || factors.iter().any(|v| v.is_empty()) {
                return Err(config_error("rank-one input needs at least two nonempty factors"));
            }
            if factors.iter().flatten().any(|v| !v.is_finite()) {
                return Err(config_error("rank-one factors must be finite"));
            }
            let refs: Vec<&[f64]> = factors.iter().map(Vec::as_slice).collect();
            Ok((DenseTensor::outer(&refs), None))
        }
    }
}

pub fn tt(cfg: &TtConfig, out: &Path) -> Result<(), CliError> {
    let (x, oracle) = tt_input(&cfg.input)?;
    let m = x.ndim();
    let needs_eps = !matches!(cfg.policy, TtPolicySpec::Full | TtPolicySpec::Fixed { .. });
    if needs_eps && cfg.eps.is_empty() {
        return Err(config_error("this policy needs a nonempty eps list"));
    }
    if !needs_eps && !cfg.eps.is_empty() {
        return Err(config_error("eps is only used by the schedule and tolerance policies"));
    }
    let runs: Vec<(Option<f64>, TtPolicy)> = match &cfg.policy {
        TtPolicySpec::Full => vec![(None, TtPolicy::Full)],
        TtPolicySpec::Fixed { ranks } => {
            if ranks.len() + 1 != m {
                return Err(config_error(format!("{} fixed ranks for {m} modes", ranks.len())));
            }
            vec![(None, TtPolicy::FixedRanks(ranks.clone()))]
        }
        TtPolicySpec::Schedule { s } => {
            let s = match (s, &oracle) {
                (Some(s), _) => s.clone(),
                (None, Some(OracleFunction::MixedSmoothSynthetic { s, .. })) => s.clone(),
                _ => {
                    return Err(config_error(
                        "schedule needs s unless the input is the synthetic oracle",
                    ))
                }
            };
            if s.len() != m {
                return Err(config_error(format!("{} smoothness values for {m} modes", s.len())));
            }
            let profile = SmoothnessProfile::from_smoothness(vec![1; m], s)?;
            cfg.eps
                .iter()
                .map(|&e| Ok((Some(e), TtPolicy::Schedule(rank_schedule(e, &profile)?))))
                .collect::<Result<_, CliError>>()?
        }
        TtPolicySpec::StepTolerance => cfg.eps.iter().map(|&e| (Some(e), TtPolicy::StepTolerance(e))).collect(),
        TtPolicySpec::TotalTolerance => cfg
            .eps
            .iter()
            .map(|&e| (Some(e), TtPolicy::TotalTolerance(e)))
            .collect(),
    };
    if cfg.eps.iter().any(|e| !(e.is_finite() && *e > 0.0)) {
        return Err(config_error("eps values must be positive"));
    }

    let mut table = Table::new(&[
        "run",
        "eps",
        "ranks",
        "storage_continuous",
        "storage_discrete",
        "error",
        "bound",
    ]);
    let mut reports = Vec::new();
    for (k, (eps, policy)) in runs.into_iter().enumerate() {
        let train = tt_svd(&x, &policy)?;
        let error = tt_to_full(&train)?.distance(&x)?;
        let bound = tt_error_bound(&train.truncation_log);
        let storage = train.storage();
        let container_name = format!("tt_{k}.mxtt");
        container::save(&out.join(&container_name), &train)?;
        let inner = train.inner_ranks();
        let schedule_storage = match &train.schedule {
            Some(s) => Some(tt_storage(&s.ranks, None)?.continuous),
            None => None,
        };
        let rank_text = inner.iter().map(ToString::to_string).collect::<Vec<_>>().join(" ");
        table.push(vec![
            k.into(),
            eps.into(),
            rank_text.into(),
            storage.continuous.into(),
            storage.discrete.map_or(Cell::Empty, Cell::from),
            error.into(),
            bound.into(),
        ]);
        reports.push(json!({
            "run": k,
            "eps": eps,
            "ranks": inner,
            "mode_dims": train.mode_dims(),
            "clamped": train.clamped(),
            "storage": storage,
            "schedule": train.schedule,
            "schedule_storage_continuous": schedule_storage,
            "error": error,
            "relative_error": if x.norm() > 0.0 { error / x.norm() } else { 0.0 },
            "bound": bound,
            "container": container_name,
        }));
    }
    table.write(&out.join("tt.csv"))?;
    write_json(
        &out.join("tt.json"),
        &json!({ "input": cfg.input, "policy": cfg.policy, "runs": reports }),
    )
}

/// Runs a formula that only exists for two subdomains.
fn bivariate<T: serde::Serialize>(m: usize, f: impl FnOnce() -> mixrank_core::Result<T>) -> Result<Value, CliError> {
    if m != 2 {
        return Ok(Value::Null);
    }
    Ok(serde_json::to_value(f()?).expect("plain data serializes"))
}

pub fn rates(cfg: &RatesConfig, out: &Path) -> Result<(), CliError> {
    let profile = match &cfg.r {
        Some(r) => SmoothnessProfile::new(cfg.n.clone(), cfg.s.clone(), r.clone())?,
        None => SmoothnessProfile::from_smoothness(cfg.n.clone(), cfg.s.clone())?,
    };
    let m = profile.m();
    if cfg.sigma.is_some() && m != 2 {
        return Err(config_error("sigma applies to two subdomains only"));
    }
    let sigma = match (cfg.sigma, m) {
        (Some(s), _) => Some(s),
        (None, 2) => Some(optimal_sigma(profile.s[0], profile.s[1])?),
        _ => None,
    };
    let optimal = bivariate(m, || optimal_sigma(profile.s[0], profile.s[1]))?;
    let general = match sigma {
        Some(s) => bivariate(m, || beta_general(s, &profile))?,
        None => Value::Null,
    };
    let weights = match sigma {
        Some(s) => AnisotropyWeights::from_sigma(s)?,
        None => AnisotropyWeights::uniform(m),
    };
    let layout = SplitLayout::new(profile.clone(), cfg.split)?;
    let schedule = cfg.eps.map(|e| rank_schedule(e, &profile)).transpose()?;
    let dof = match cfg.eps {
        Some(e) => bivariate(m, || dof_estimates(e, &profile))?,
        None => Value::Null,
    };
    let (bivariate_bound, split_bound) = match cfg.budget {
        Some(b) => (
            match sigma {
                Some(s) => bivariate(m, || rank_bound_bivariate(b, s, (profile.n[0], profile.n[1])))?,
                None => Value::Null,
            },
            serde_json::to_value(rank_bound_split(b, &weights, &layout)?).expect("plain data serializes"),
        ),
        None => (Value::Null, Value::Null),
    };
    let report = json!({
        "profile": profile,
        "sigma": sigma,
        "optimal_sigma": optimal,
        "beta_general": general,
        "beta_mixed": bivariate(m, || beta_mixed(&profile))?,
        "beta_isotropic": bivariate(m, || beta_isotropic(&profile))?,
        "sigma_choices": bivariate(m, || sigma_choices(&profile))?,
        "split": cfg.split,
        "beta_split": beta_split(&layout)?,
        "sparse_rate": predicted_sparse_rate(&weights, &profile)?,
        "schedule": schedule,
        "dof": dof,
        "budget": cfg.budget,
        "rank_bound_bivariate": bivariate_bound,
        "rank_bound_split": split_bound,
    });
    write_json(&out.join("rates.json"), &report)
}
