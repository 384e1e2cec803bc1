use std::path::Path;

use pnrbench::benchmarks::{
    effective_efficiency_sweep, joint_probability_benchmark_with, pnrd_joint_probability,
    JointOptions,
};
use pnrbench::certify::{evaluate, Comparison, MeasuredInput, NORMALIZATION_TOL};
use pnrbench::detectors::{min_detectors_for_threshold, no_collision_probability};
use pnrbench::fock::{idealized_fidelity, DEFAULT_N_MAX};
use pnrbench::nongauss::{witness, BoundConfig, FrontierCache, WitnessResult, BOUND_CLASS};
use pnrbench::preparation::{
    condition, prepare_along, tradeoff_curve_with, TmsvSource, SOURCE_TAIL,
};
use pnrbench::{DetectorSpec, PhotonDistribution};
use serde_json::json;
use sha2::{Digest, Sha256};

use crate::config::{MeasuredFile, RunConfig, Task};
use crate::error::CliError;
use crate::output::Table;

/// Run the configured task and return its tables in output order.
pub fn run(cfg: &RunConfig, out_dir: &Path) -> Result<Vec<Table>, CliError> {
    let task = cfg.task()?;
    let ctx = |e: CliError| e.context(&task.to_string());
    let mut tables = match task {
        Task::Povm => povm(cfg),
        Task::Prepare => prepare(cfg),
        Task::Tradeoff => tradeoff(cfg),
        Task::Joint => joint(cfg),
        Task::EtaEff => eta_eff(cfg),
        Task::Witness => witness_task(cfg, out_dir),
        Task::Evaluate => evaluate_task(cfg),
        Task::Thresholds => thresholds(cfg),
    }
    .map_err(ctx)?;
    let hash = cfg.hash();
    let n_max = cfg.n_max.map_or(
        format!("auto (default {DEFAULT_N_MAX}, raised until source tail <= {SOURCE_TAIL:e})"),
        |n| format!("{n} (raised if the source tail needs more)"),
    );
    for t in &mut tables {
        let mut header = vec![
            (
                "program".to_string(),
                format!("pnrbench {}", env!("CARGO_PKG_VERSION")),
            ),
            ("task".to_string(), task.to_string()),
            ("table".to_string(), t.name.clone()),
            ("config_sha256".to_string(), hash.clone()),
            ("n_max".to_string(), n_max.clone()),
        ];
        header.append(&mut t.header);
        t.header = header;
    }
    Ok(tables)
}

/// Herald detector with the idler-arm efficiency folded in.
fn herald_detector(det: &DetectorSpec, eta_m: f64) -> Result<DetectorSpec, CliError> {
    Ok(det.with_efficiency(det.efficiency * eta_m)?)
}

fn povm(cfg: &RunConfig) -> Result<Vec<Table>, CliError> {
    let targets = cfg.n.to_vec();
    let top = *targets.iter().max().unwrap();
    let outcomes = cfg
        .povm
        .outcomes
        .clone()
        .unwrap_or_else(|| (0..=top).collect());
    let k_max = cfg.povm.k_max.or(cfg.n_max).unwrap_or(2 * top + 4);
    let mut t = Table::new("povm").meta(
        "tolerances",
        "exact surjection counts rounded once; efficiency folded by adjoint loss",
    );
    for det in &cfg.detectors {
        for &outcome in &outcomes {
            if det.bins().is_some_and(|m| outcome as u64 > m) {
                continue;
            }
            let element = det.povm(outcome, k_max)?;
            for (k, p) in element.response.iter().enumerate() {
                t.push(json!({ "detector": det.to_string(), "outcome": outcome, "k": k, "probability": p }));
            }
        }
    }
    Ok(vec![t])
}

fn prepare(cfg: &RunConfig) -> Result<Vec<Table>, CliError> {
    let tol = format!("source tail <= {SOURCE_TAIL:e}");
    let mut summary = Table::new("summary").meta("tolerances", &tol);
    let mut states = Table::new("states").meta("tolerances", &tol);
    for det in &cfg.detectors {
        for n in cfg.n.to_vec() {
            for lambda in cfg.lambda.for_target(n) {
                let mut source = TmsvSource::new(lambda, cfg.source.eta_s, cfg.source.eta_m)?;
                if let Some(n_max) = cfg.n_max {
                    source = source.with_n_max(n_max);
                }
                let r = condition(&source, det, n)?;
                let d = &r.conditioned;
                summary.push(json!({
                    "detector": det.to_string(),
                    "n": n,
                    "lambda": lambda,
                    "eta_s": cfg.source.eta_s,
                    "eta_m": cfg.source.eta_m,
                    "n_max": d.n_max(),
                    "success_probability": r.success_probability,
                    "fidelity": r.fidelity,
                    "mean_photons": d.mean(),
                    "p_nplus": d.tail_above(n),
                }));
                for (k, p) in d.probs().iter().enumerate() {
                    states.push(json!({ "detector": det.to_string(), "n": n, "lambda": lambda, "k": k, "probability": p }));
                }
            }
        }
    }
    Ok(vec![summary, states])
}

fn tradeoff(cfg: &RunConfig) -> Result<Vec<Table>, CliError> {
    let mut t = Table::new("curve").meta("tolerances", format!("source tail <= {SOURCE_TAIL:e}"));
    if cfg.tradeoff.idealized {
        t = t.meta(
            "idealized",
            "loss-compensated fidelity maximized over physical inverse-loss efficiencies",
        );
    }
    for det in &cfg.detectors {
        let herald = herald_detector(det, cfg.source.eta_m)?;
        for n in cfg.n.to_vec() {
            let lambdas = cfg.lambda.for_target(n);
            let curve = tradeoff_curve_with(&herald, cfg.source.eta_s, n, &lambdas, cfg.n_max)?;
            let branch = curve.increasing_branch().len();
            let idealized = if cfg.tradeoff.idealized {
                let states = prepare_along(&herald, cfg.source.eta_s, n, &lambdas, cfg.n_max)?;
                Some(
                    states
                        .iter()
                        .map(|r| idealized_fidelity(&r.conditioned, n))
                        .collect::<Result<Vec<_>, _>>()?,
                )
            } else {
                None
            };
            for (i, p) in curve.points.iter().enumerate() {
                let mut rec = json!({
                    "detector": det.to_string(),
                    "n": n,
                    "eta_s": cfg.source.eta_s,
                    "eta_m": cfg.source.eta_m,
                    "n_max": curve.n_max,
                    "lambda": p.lambda,
                    "success_probability": p.success_probability,
                    "fidelity": p.fidelity,
                    "increasing_branch": i < branch,
                });
                if let Some(id) = &idealized {
                    rec["fidelity_idealized"] = json!(id[i].fidelity);
                    rec["eta_opt"] = json!(id[i].eta_opt);
                }
                t.push(rec);
            }
        }
    }
    Ok(vec![t])
}

fn joint(cfg: &RunConfig) -> Result<Vec<Table>, CliError> {
    let opts = JointOptions {
        eta_s: cfg.source.eta_s,
        eta_m: cfg.source.eta_m,
        lambda_max: cfg.joint.lambda_max,
        scan_points: cfg.joint.scan_points,
        n_max: cfg.n_max,
    };
    let mut t = Table::new("joint").meta(
        "tolerances",
        format!(
            "scan {} points then golden section to 1e-10 in lambda; source tail <= {SOURCE_TAIL:e}",
            opts.scan_points
        ),
    );
    for det in &cfg.detectors {
        for n in cfg.n.to_vec() {
            let j = joint_probability_benchmark_with(det, n, &opts)?;
            t.push(json!({
                "detector": det.to_string(),
                "n": n,
                "probability": j.probability,
                "lambda_opt": j.lambda_opt,
                "at_boundary": j.at_boundary,
                "n_max": j.n_max,
                "pnrd_closed_form": pnrd_joint_probability(n),
            }));
        }
    }
    Ok(vec![t])
}

fn eta_eff(cfg: &RunConfig) -> Result<Vec<Table>, CliError> {
    let m = &cfg.eta_eff.matching;
    let mut t = Table::new("eta-eff").meta(
        "tolerances",
        format!(
            "sup-norm fidelity gap over {} log-spaced P_S in [{:e}, {:e}]; clean match <= {:e}; eta tolerance {:e}",
            m.samples, m.success_min, m.success_max, m.tolerance, m.eta_tol
        ),
    );
    for r in effective_efficiency_sweep(&cfg.eta_eff.cases, m) {
        let r = r?;
        t.push(json!({
            "bins": r.bins,
            "n": r.n,
            "eta_eff": r.eta_eff,
            "residual": r.residual,
            "clean_match": r.clean_match,
        }));
    }
    Ok(vec![t])
}

fn read_measured(path: &Path) -> Result<(MeasuredFile, String), CliError> {
    let bytes = std::fs::read(path)
        .map_err(|e| CliError::Config(format!("cannot read {}: {e}", path.display())))?;
    let file: MeasuredFile = serde_json::from_slice(&bytes)
        .map_err(|e| CliError::Config(format!("{}: {e}", path.display())))?;
    Ok((file, hex::encode(Sha256::digest(&bytes))))
}

fn witness_task(cfg: &RunConfig, out_dir: &Path) -> Result<Vec<Table>, CliError> {
    let bound = BoundConfig {
        seed: cfg.seed,
        ..cfg.witness.bound.clone()
    };
    let cache = FrontierCache::new(
        cfg.witness
            .cache_dir
            .clone()
            .unwrap_or_else(|| out_dir.join("frontier-cache")),
    );
    let tol = format!(
        "feasibility slack {:e}; penalty weight {:e}; {} restarts",
        bound.feasibility_slack, bound.penalty, bound.restarts
    );
    let mut frontier_table = Table::new("frontier")
        .meta("bound_class", BOUND_CLASS)
        .meta("seed", cfg.seed)
        .meta("bound_config_sha256", bound.hash())
        .meta("tolerances", &tol);
    let mut wt = Table::new("witness")
        .meta("bound_class", BOUND_CLASS)
        .meta("seed", cfg.seed)
        .meta("tolerances", &tol);

    let measured = match (&cfg.witness.input, &cfg.witness.distribution) {
        (Some(path), _) => {
            let (file, digest) = read_measured(path)?;
            wt = wt.meta("input_sha256", digest);
            Some(file.distribution)
        }
        (None, Some(d)) => Some(d.clone()),
        (None, None) => None,
    };
    let measured = measured
        .map(|d| PhotonDistribution::normalized(d).map_err(CliError::from))
        .transpose()?;

    let witness_record = |w: &WitnessResult| {
        json!({
            "fidelity": w.fidelity,
            "p_nplus": w.p_nplus,
            "bound": w.bound,
            "witness": w.witness,
            "inconclusive": w.inconclusive,
            "certifies": w.certifies(),
        })
    };
    for n in cfg.n.to_vec() {
        let frontier = cache.load_or_compute(n, &bound)?;
        for p in &frontier.points {
            frontier_table.push(json!({
                "n": n,
                "p_nplus": p.p_nplus,
                "bound": p.bound,
                "optimized": p.optimized,
                "converged": p.converged,
            }));
        }
        match &measured {
            Some(d) => {
                let w = witness(d, n, &frontier)?;
                let mut rec = json!({ "n": n });
                rec.as_object_mut()
                    .unwrap()
                    .extend(witness_record(&w).as_object().unwrap().clone());
                wt.push(rec);
            }
            None => {
                for det in &cfg.detectors {
                    let herald = herald_detector(det, cfg.source.eta_m)?;
                    let lambdas = cfg.lambda.for_target(n);
                    for r in prepare_along(&herald, cfg.source.eta_s, n, &lambdas, cfg.n_max)? {
                        let w = witness(&r.conditioned, n, &frontier)?;
                        let mut rec = json!({
                            "detector": det.to_string(),
                            "n": n,
                            "lambda": r.lambda,
                            "success_probability": r.success_probability,
                        });
                        rec.as_object_mut()
                            .unwrap()
                            .extend(witness_record(&w).as_object().unwrap().clone());
                        wt.push(rec);
                    }
                }
            }
        }
    }
    Ok(vec![frontier_table, wt])
}

fn comparison_rows(
    t: &mut Table,
    path: &str,
    c: &Comparison,
    eta_opt: Option<f64>,
    summary: &mut Table,
    p: f64,
) {
    for v in &c.verdicts {
        t.push(json!({
            "path": path,
            "bins": v.bins,
            "status": serde_json::to_value(v.status).unwrap(),
            "beats": v.beats,
            "benchmark_fidelity": v.benchmark_fidelity,
            "margin": v.margin,
        }));
    }
    let (kind, bins) = match c.certificate {
        pnrbench::Certificate::BelowMinimum => ("below_minimum", None),
        pnrbench::Certificate::Mspd(m) => ("mspd", Some(m)),
        pnrbench::Certificate::AtLeast(m) => ("at_least", Some(m)),
    };
    summary.push(json!({
        "path": path,
        "success_probability": p,
        "fidelity": c.fidelity,
        "eta_opt": eta_opt,
        "certificate": c.certificate.to_string(),
        "certificate_kind": kind,
        "certificate_bins": bins,
    }));
}

fn evaluate_task(cfg: &RunConfig) -> Result<Vec<Table>, CliError> {
    let e = &cfg.evaluate;
    let sel = &e.benchmarks;
    let mut input_digest = None;
    let (distribution, success, target) = match (&e.input, &e.distribution) {
        (Some(path), _) => {
            let (file, digest) = read_measured(path)?;
            input_digest = Some(digest);
            let success = file
                .success_probability
                .or(e.success_probability)
                .ok_or_else(|| {
                    CliError::Config(format!(
                        "{}: no success_probability in the file or the config",
                        path.display()
                    ))
                })?;
            (file.distribution, success, file.target)
        }
        (None, Some(d)) => (d.clone(), e.success_probability.expect("validated"), None),
        (None, None) => unreachable!("validated"),
    };
    let target = match (target, cfg.n.to_vec().as_slice()) {
        (Some(t), _) => t,
        (None, [n]) => *n,
        (None, _) => return Err(CliError::Config("evaluate needs a single target n".into())),
    };
    let measured = MeasuredInput::new(distribution, success, target)?;
    let report = evaluate(&measured, sel)?;
    let tol = format!(
        "tie tolerance {:e}; normalization tolerance {NORMALIZATION_TOL:e}; no extrapolation outside curve ranges",
        sel.tie_tolerance
    );
    let mut verdicts = Table::new("verdicts").meta("tolerances", &tol);
    let mut summary = Table::new("summary").meta("tolerances", &tol);
    if let Some(d) = input_digest {
        verdicts = verdicts.meta("input_sha256", &d);
        summary = summary.meta("input_sha256", &d);
    }
    if let Some(total) = report.renormalized_from {
        summary = summary.meta("renormalized_from", total);
    }
    comparison_rows(
        &mut verdicts,
        "plain",
        &report.plain,
        None,
        &mut summary,
        success,
    );
    if let Some(id) = &report.idealized {
        comparison_rows(
            &mut verdicts,
            "idealized",
            &id.comparison,
            Some(id.eta_opt),
            &mut summary,
            success,
        );
    }
    Ok(vec![summary, verdicts])
}

fn thresholds(cfg: &RunConfig) -> Result<Vec<Table>, CliError> {
    let mut t = Table::new("thresholds").meta(
        "tolerances",
        "exact surjection counts; smallest M found by doubling and bisection",
    );
    for &level in &cfg.thresholds.levels {
        for &n in &cfg.thresholds.photons {
            let m = min_detectors_for_threshold(n, level)?;
            t.push(json!({
                "threshold": level,
                "n": n,
                "min_bins": m,
                "no_collision_probability": no_collision_probability(n, m),
            }));
        }
    }
    Ok(vec![t])
}
