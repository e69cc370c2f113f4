use std::f64::consts::E;
use std::fs;
use std::path::Path;

use serde::Serialize;
use serde_json::{json, Value};

use qicert::certificate::{
    check_hypotheses, chernoff_envelope, coherence, decoupling_constants, tune_parameters,
    CoherenceStats, TheoremParams,
};
use qicert::ensembles::{gen_matrix, EnsembleKind, EnsembleSpec};
use qicert::matrix::{hollow_gram, parse_csv, rank_warning, spectral_norm_default, to_csv};
use qicert::montecarlo::{
    bound_verdict, decoupling_experiment, failure_probability_experiment, interior_grid,
    intermediate_tails, linspace, poissonization_experiment, Verdict, VerdictStatus,
};
use qicert::oracles::{
    chaos_moments_exact, chaos_moments_formula, chernoff_empirical, ChaosInstance,
    ChernoffInstance, CHAOS_RATIO_BOUND, MAX_ENUMERATION_P,
};
use qicert::rng::derive_seed;
use qicert::DenseMatrix;

use crate::args::{
    CertifyArgs, ExperimentArgs, ExperimentKind, GenArgs, SourceArgs, VerifyArgs, VerifyKind,
};
use crate::report::Report;
use crate::{CliError, CliResult};

/// Grid size used when `--grid` is omitted.
pub const DEFAULT_GRID_POINTS: usize = 8;
/// Relative agreement demanded between the two chaos moment computations.
pub const CHAOS_AGREEMENT_TOL: f64 = 1e-10;

fn usage(msg: impl Into<String>) -> CliError {
    CliError::Usage(msg.into())
}

fn to_value<T: Serialize>(v: &T) -> Value {
    serde_json::to_value(v).expect("serializable")
}

fn read(path: &Path) -> CliResult<String> {
    fs::read_to_string(path).map_err(|source| CliError::Io {
        path: path.to_path_buf(),
        source,
    })
}

/// Loads or generates the matrix and echoes its source.
pub fn load_matrix(source: &SourceArgs) -> CliResult<(DenseMatrix, Value)> {
    match (&source.matrix, &source.gen) {
        (Some(path), None) => {
            let m = parse_csv(&read(path)?).map_err(|e| CliError::Input {
                path: path.clone(),
                source: e,
            })?;
            Ok((m, json!({ "matrix": path.display().to_string() })))
        }
        (None, Some(spec)) => {
            let kind: EnsembleKind = spec.parse()?;
            let ens = EnsembleSpec {
                kind,
                seed: source.gen_seed,
            };
            let m = gen_matrix(&ens)?;
            Ok((
                m,
                json!({ "gen": kind.to_string(), "gen_seed": source.gen_seed }),
            ))
        }
        (None, None) => Err(usage("one of --matrix or --gen is required")),
        (Some(_), Some(_)) => Err(usage("--matrix and --gen are mutually exclusive")),
    }
}

/// `a,b,c` or `linspace(a,b,k)`.
pub fn parse_grid(text: &str) -> CliResult<Vec<f64>> {
    let t = text.trim();
    let bad = |why: &str| usage(format!("bad grid {text:?}: {why}"));
    let num = |s: &str| s.trim().parse::<f64>().ok().filter(|x| x.is_finite());
    let grid = if let Some(inner) = t
        .strip_prefix("linspace(")
        .and_then(|r| r.strip_suffix(')'))
    {
        let parts: Vec<&str> = inner.split(',').collect();
        if parts.len() != 3 {
            return Err(bad("linspace takes a, b, k"));
        }
        let a = num(parts[0]).ok_or_else(|| bad("a is not a number"))?;
        let b = num(parts[1]).ok_or_else(|| bad("b is not a number"))?;
        let k: usize = parts[2]
            .trim()
            .parse()
            .map_err(|_| bad("k is not a count"))?;
        if k == 0 {
            return Err(bad("k must be positive"));
        }
        linspace(a, b, k)
    } else {
        t.split(',')
            .map(|s| num(s).ok_or_else(|| bad("entries must be finite numbers")))
            .collect::<CliResult<Vec<f64>>>()?
    };
    if grid.is_empty() {
        return Err(bad("empty"));
    }
    if grid.windows(2).any(|w| w[1] <= w[0]) {
        return Err(bad("thresholds must increase strictly"));
    }
    Ok(grid)
}

/// `mu=..,op_norm=..,p=..` with optional `n=..`; `op_norm_sq` may replace
/// `op_norm`.
pub fn parse_scalars(text: &str) -> CliResult<CoherenceStats> {
    let bad = |why: String| usage(format!("bad --scalars {text:?}: {why}"));
    let (mut mu, mut op, mut op_sq, mut n, mut p) = (None, None, None, None, None);
    for kv in text.split(',').filter(|s| !s.trim().is_empty()) {
        let (k, v) = kv
            .split_once('=')
            .ok_or_else(|| bad(format!("expected key=value, got {kv:?}")))?;
        let v = v.trim();
        let float = || {
            v.parse::<f64>()
                .map_err(|_| bad(format!("{k} is not a number")))
        };
        let count = || {
            v.parse::<f64>()
                .ok()
                .filter(|x| *x >= 1.0 && x.fract() == 0.0 && *x <= 9.0e15)
                .map(|x| x as usize)
                .ok_or_else(|| bad(format!("{k} must be a positive integer")))
        };
        match k.trim() {
            "mu" => mu = Some(float()?),
            "op_norm" => op = Some(float()?),
            "op_norm_sq" => op_sq = Some(float()?),
            "n" => n = Some(count()?),
            "p" => p = Some(count()?),
            other => return Err(bad(format!("unknown key {other:?}"))),
        }
    }
    let mu = mu.ok_or_else(|| bad("mu is required".into()))?;
    let p = p.ok_or_else(|| bad("p is required".into()))?;
    let op = match (op, op_sq) {
        (Some(o), None) => o,
        (None, Some(sq)) if sq >= 0.0 => sq.sqrt(),
        (None, Some(_)) => return Err(bad("op_norm_sq must be nonnegative".into())),
        _ => return Err(bad("give exactly one of op_norm and op_norm_sq".into())),
    };
    Ok(CoherenceStats::from_scalars(mu, op, n.unwrap_or(p), p)?)
}

fn check_mc(trials: u64, gamma: f64) -> CliResult<()> {
    if trials == 0 {
        return Err(usage("--trials must be at least 1"));
    }
    if !(gamma > 0.0 && gamma < 1.0) {
        return Err(usage(format!("--gamma must lie in (0, 1), got {gamma}")));
    }
    Ok(())
}

fn verdict(check: impl Into<String>, status: VerdictStatus, lhs: f64, rhs: f64) -> Verdict {
    Verdict {
        check: check.into(),
        status,
        lhs,
        rhs,
    }
}

/// Moves `verdicts` out of a serialized experiment into the report.
fn split_verdicts(mut value: Value) -> Value {
    if let Value::Object(m) = &mut value {
        m.remove("verdicts");
    }
    value
}

pub fn cmd_certify(args: &CertifyArgs) -> CliResult<Report> {
    let (stats, source, warning) = match &args.scalars {
        Some(text) => (parse_scalars(text)?, json!({ "scalars": text }), None),
        None => {
            let (x, source) = load_matrix(&args.source)?;
            (coherence(&x)?, source, rank_warning(&x))
        }
    };
    let params = TheoremParams::new(args.r, args.alpha, args.s, stats.p)?;
    let inputs = json!({
        "source": source,
        "r": args.r,
        "alpha": args.alpha,
        "s": args.s,
    });
    let mut report = Report::new("certify", inputs);
    report.stats = to_value(&stats);

    let hyp = check_hypotheses(&stats, &params)?;
    let tuning = tune_parameters(&stats, &params)?;
    let envelope = chernoff_envelope(
        args.s as f64,
        stats.p as f64,
        tuning.r_prime,
        tuning.u_sq,
        tuning.v_sq,
        stats.op_norm_sq(),
        stats.mu,
    );
    let (envelope, envelope_note) = match envelope {
        Ok(env) => (
            json!({
                "ln_terms": env.ln_terms,
                "value": env.value,
                "lemma_sum": env.lemma_sum(),
            }),
            Value::Null,
        ),
        Err(e) => (Value::Null, Value::String(e.to_string())),
    };

    let summary = format!(
        "certified: {}; failure bound 216/p^alpha = {:e}{}",
        hyp.certified,
        hyp.failure_bound,
        if hyp.vacuous { " (vacuous)" } else { "" }
    );
    report.results = json!({
        "hypotheses": hyp,
        "tuning": tuning,
        "failure_bound": hyp.failure_bound,
        "envelope": envelope,
        "envelope_note": envelope_note,
        "constants": decoupling_constants(),
        "rank_warning": warning,
        "summary": summary,
    });

    let within = |ok| {
        if ok {
            VerdictStatus::Pass
        } else {
            VerdictStatus::OutOfDomain
        }
    };
    report.verdicts = vec![
        verdict(
            "coherence mu <= mu_bound",
            within(hyp.mu_ok),
            stats.mu,
            hyp.mu_bound,
        ),
        verdict(
            "sparsity s <= s_bound",
            within(hyp.s_ok),
            args.s as f64,
            hyp.s_bound,
        ),
        verdict(
            "failure bound 216/p^alpha < 1",
            if hyp.vacuous {
                VerdictStatus::Vacuous
            } else {
                VerdictStatus::Pass
            },
            hyp.failure_bound,
            1.0,
        ),
    ];
    Ok(report)
}

pub fn cmd_experiment(args: &ExperimentArgs) -> CliResult<Report> {
    let mc = &args.mc;
    check_mc(mc.trials, mc.gamma)?;
    let (x, source) = load_matrix(&args.source)?;
    let stats = coherence(&x)?;
    let p = x.cols();
    let grid = || -> CliResult<Vec<f64>> {
        match &args.grid {
            Some(g) => parse_grid(g),
            None => {
                let top = 2.0 * spectral_norm_default(&hollow_gram(&x)?)?;
                if top.is_nan() || top <= 0.0 {
                    return Err(usage("H = 0, so there is no default grid; pass --grid"));
                }
                Ok(interior_grid(top, DEFAULT_GRID_POINTS))
            }
        }
    };
    let need_s = || args.s.ok_or_else(|| usage("--s is required"));
    let need_delta = || args.delta.ok_or_else(|| usage("--delta is required"));

    let kind = match args.kind {
        ExperimentKind::Failure => "failure",
        ExperimentKind::Decoupling => "decoupling",
        ExperimentKind::Poissonization => "poissonization",
        ExperimentKind::Intermediate => "intermediate",
    };
    let mut inputs = json!({
        "kind": kind,
        "source": source,
        "seed": mc.seed,
        "trials": mc.trials,
        "gamma": mc.gamma,
    });

    let (results, verdicts) = match args.kind {
        ExperimentKind::Failure => {
            let (s, grid) = (need_s()?, grid()?);
            inputs["s"] = json!(s);
            inputs["grid"] = json!(grid);
            let tails = failure_probability_experiment(&x, s, &grid, mc.trials, mc.seed, mc.gamma)?;
            let worst_rise = tails
                .windows(2)
                .map(|w| w[1].p_hat - w[0].p_hat)
                .fold(0.0, f64::max);
            let status = if worst_rise > 0.0 {
                VerdictStatus::Fail
            } else {
                VerdictStatus::Pass
            };
            let v = verdict("tails nonincreasing in r", status, worst_rise, 0.0);
            (json!({ "tails": tails }), vec![v])
        }
        ExperimentKind::Decoupling => {
            let (delta, grid) = (need_delta()?, grid()?);
            inputs["delta"] = json!(delta);
            inputs["grid"] = json!(grid);
            let e = decoupling_experiment(&x, delta, &grid, mc.trials, mc.seed, mc.gamma)?;
            let verdicts = e.verdicts.clone();
            (split_verdicts(to_value(&e)), verdicts)
        }
        ExperimentKind::Poissonization => {
            let (s, grid) = (need_s()?, grid()?);
            inputs["s"] = json!(s);
            inputs["grid"] = json!(grid);
            let e = poissonization_experiment(&x, s, &grid, mc.trials, mc.seed, mc.gamma)?;
            let verdicts = e.verdicts.clone();
            (split_verdicts(to_value(&e)), verdicts)
        }
        ExperimentKind::Intermediate => {
            let delta = need_delta()?;
            if args.alpha < 1.0 || !args.alpha.is_finite() {
                return Err(usage(format!("--alpha must be >= 1, got {}", args.alpha)));
            }
            // u² = α' log p ‖X‖² and v² = α' log p μ² with α' = α + 1.
            let scale = (args.alpha + 1.0) * (p as f64).ln();
            let u = args
                .u
                .unwrap_or_else(|| (scale * stats.op_norm_sq()).sqrt());
            let v = args
                .v
                .unwrap_or_else(|| (scale * stats.mu * stats.mu).sqrt());
            inputs["delta"] = json!(delta);
            inputs["alpha"] = json!(args.alpha);
            inputs["u"] = json!(u);
            inputs["v"] = json!(v);
            inputs["tuned"] = json!({ "u": args.u.is_none(), "v": args.v.is_none() });
            let e = intermediate_tails(&x, delta, u, v, mc.trials, mc.seed, mc.gamma)?;
            let verdicts = e.verdicts.clone();
            (split_verdicts(to_value(&e)), verdicts)
        }
    };

    let mut report = Report::new(format!("experiment {kind}"), inputs);
    report.stats = to_value(&stats);
    report.results = results;
    report.verdicts = verdicts;
    Ok(report)
}

#[derive(Debug, Serialize)]
struct ChaosRow {
    p: usize,
    sum_sq: f64,
    m2_exact: Option<f64>,
    m4_exact: Option<f64>,
    m2_formula: f64,
    m4_formula: f64,
    ratio: Option<f64>,
}

fn rel_diff(a: f64, b: f64) -> f64 {
    let scale = a.abs().max(b.abs());
    if scale == 0.0 {
        0.0
    } else {
        (a - b).abs() / scale
    }
}

pub fn cmd_verify(args: &VerifyArgs) -> CliResult<Report> {
    match args.kind {
        VerifyKind::Chaos => verify_chaos(args),
        VerifyKind::Chernoff => verify_chernoff(args),
    }
}

fn verify_chaos(args: &VerifyArgs) -> CliResult<Report> {
    let (instances, inputs) = match &args.instance {
        Some(path) => {
            let inst =
                ChaosInstance::parse_triples(&read(path)?, None).map_err(|e| CliError::Input {
                    path: path.clone(),
                    source: e,
                })?;
            (
                vec![inst],
                json!({ "instance": path.display().to_string() }),
            )
        }
        None => {
            if args.p_min < 2 || args.p_min > args.p_max {
                return Err(usage("need 2 <= --p-min <= --p-max"));
            }
            if args.count == 0 {
                return Err(usage("--count must be at least 1"));
            }
            let span = args.p_max - args.p_min + 1;
            let insts = (0..args.count)
                .map(|k| {
                    let p = args.p_min + k % span;
                    ChaosInstance::random(p, derive_seed(args.mc.seed, "chaos-verify", k as u64))
                })
                .collect();
            let inputs = json!({
                "count": args.count,
                "p_min": args.p_min,
                "p_max": args.p_max,
                "seed": args.mc.seed,
            });
            (insts, inputs)
        }
    };

    let mut rows = Vec::with_capacity(instances.len());
    let (mut worst_ratio, mut worst_m4, mut worst_m2) = (0.0f64, 0.0f64, 0.0f64);
    let mut with_ratio = 0;
    for inst in &instances {
        let p = inst.p();
        let sum_sq: f64 = (0..p)
            .flat_map(|i| (i + 1..p).map(move |j| (i, j)))
            .map(|(i, j)| inst.get(i, j).powi(2))
            .sum();
        let formula = chaos_moments_formula(inst);
        let exact = if p <= MAX_ENUMERATION_P {
            Some(chaos_moments_exact(inst)?)
        } else {
            None
        };
        let reference = exact.unwrap_or(formula);
        let ratio = reference.ratio();
        if let Some(r) = ratio {
            worst_ratio = worst_ratio.max(r);
            with_ratio += 1;
        }
        if let Some(ex) = exact {
            worst_m4 = worst_m4.max(rel_diff(ex.m4, formula.m4));
            worst_m2 = worst_m2.max(rel_diff(ex.m2, sum_sq));
        }
        rows.push(ChaosRow {
            p,
            sum_sq,
            m2_exact: exact.map(|m| m.m2),
            m4_exact: exact.map(|m| m.m4),
            m2_formula: formula.m2,
            m4_formula: formula.m4,
            ratio,
        });
    }

    let le = |ok: bool| {
        if ok {
            VerdictStatus::Pass
        } else {
            VerdictStatus::Fail
        }
    };
    let mut verdicts = Vec::new();
    if with_ratio > 0 {
        verdicts.push(verdict(
            "max m4/m2^2 <= 9",
            le(worst_ratio <= CHAOS_RATIO_BOUND),
            worst_ratio,
            CHAOS_RATIO_BOUND,
        ));
    }
    if rows.iter().any(|r| r.m4_exact.is_some()) {
        verdicts.push(verdict(
            "closed-form m4 equals enumeration",
            le(worst_m4 <= CHAOS_AGREEMENT_TOL),
            worst_m4,
            CHAOS_AGREEMENT_TOL,
        ));
        verdicts.push(verdict(
            "enumerated m2 equals sum of squares",
            le(worst_m2 <= CHAOS_AGREEMENT_TOL),
            worst_m2,
            CHAOS_AGREEMENT_TOL,
        ));
    }

    let mut report = Report::new("verify chaos", inputs);
    report.results = json!({ "instances": rows });
    report.verdicts = verdicts;
    Ok(report)
}

fn verify_chernoff(args: &VerifyArgs) -> CliResult<Report> {
    let mc = &args.mc;
    check_mc(mc.trials, mc.gamma)?;
    let inst = ChernoffInstance::diagonal_selector(args.d, args.delta)?;
    let grid = match &args.grid {
        Some(g) => parse_grid(g)?,
        None => (1..=12).map(|k| E * inst.mu_max * k as f64).collect(),
    };
    let points = chernoff_empirical(&inst, &grid, mc.trials, mc.seed, mc.gamma)?;
    let verdicts = points
        .iter()
        .map(|pt| {
            bound_verdict(
                format!("chernoff r={}", pt.estimate.threshold),
                &pt.estimate,
                pt.bound,
            )
        })
        .collect();
    let inputs = json!({
        "ensemble": "diagonal_selector",
        "d": args.d,
        "delta": args.delta,
        "grid": grid,
        "seed": mc.seed,
        "trials": mc.trials,
        "gamma": mc.gamma,
    });
    let mut report = Report::new("verify chernoff", inputs);
    report.results = json!({
        "b": inst.b,
        "mu_max": inst.mu_max,
        "points": points,
    });
    report.verdicts = verdicts;
    Ok(report)
}

pub fn cmd_gen(args: &GenArgs) -> CliResult<String> {
    if args.source.matrix.is_some() {
        return Err(usage("gen takes --gen, not --matrix"));
    }
    let (x, _) = load_matrix(&args.source)?;
    Ok(to_csv(&x))
}
