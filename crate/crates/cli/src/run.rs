use std::fs;

use kdesign::designmetrics::{
    choi_error, measurable_experiment, state_design_error, verify_blocked_phase_identity, verify_fact2,
    verify_fact5, verify_pfc_fact1, ErrorEstimate, ExperimentPlan, Sampling, TwirlSource,
};
use kdesign::ensembles::{compose, EnsembleSpec, Independence};
use kdesign::gf2field::{field_spec, selftest};
use kdesign::kwise::{eval_tree, verify_kwise_all, KWiseSeed};
use kdesign::lbtest::{run_collision_test, CollisionConfig, CollisionSource};
use kdesign::randomness::{Chooser, StreamChooser};
use kdesign::revcircuit::{
    build_kwise_circuit, design_resource_calculator, resources_table, to_text, DesignFamily, KWiseMode,
};
use kdesign::{Error, Result};
use serde::Serialize;
use serde_json::{json, Value};

use crate::args::*;

/// Tabular form of a report.
pub struct Table {
    pub header: Vec<String>,
    pub rows: Vec<Vec<String>>,
}

impl Table {
    fn from_rows<T: Serialize>(rows: &[T]) -> Table {
        let mut header = Vec::new();
        let mut out = Vec::new();
        for r in rows {
            let Value::Object(map) = serde_json::to_value(r).expect("rows serialize") else {
                continue;
            };
            if header.is_empty() {
                header = map.keys().cloned().collect();
            }
            out.push(map.values().map(cell).collect());
        }
        Table { header, rows: out }
    }
}

fn cell(v: &Value) -> String {
    match v {
        Value::Null => String::new(),
        Value::String(s) => s.clone(),
        other => other.to_string(),
    }
}

pub struct Outcome {
    pub estimate: Option<f64>,
    pub std_error: Option<f64>,
    pub samples: Option<u64>,
    pub residual: Option<f64>,
    pub details: Value,
    pub table: Option<Table>,
    /// False when a check ran to completion and found a mismatch.
    pub passed: bool,
}

impl Outcome {
    fn new(details: Value) -> Self {
        Self {
            estimate: None,
            std_error: None,
            samples: None,
            residual: None,
            details,
            table: None,
            passed: true,
        }
    }

    fn from_error(e: ErrorEstimate) -> Self {
        let mut o = Outcome::new(serde_json::to_value(&e).expect("serializable"));
        o.estimate = Some(e.estimate);
        o.std_error = e.std_error;
        o.samples = Some(e.samples);
        o
    }
}

pub fn params(cmd: &Command) -> Value {
    let v = match cmd {
        Command::Field(FieldCmd::Selftest(a)) => serde_json::to_value(a),
        Command::Kwise(KwiseCmd::Verify(a)) => serde_json::to_value(a),
        Command::Circuit(CircuitCmd::Build(a)) => serde_json::to_value(a),
        Command::Resources(ResourcesCmd::Table(a)) => serde_json::to_value(a),
        Command::Resources(ResourcesCmd::Design(a)) => serde_json::to_value(a),
        Command::StateError(a) | Command::ChoiError(a) => serde_json::to_value(a),
        Command::Measurable(a) => serde_json::to_value(a),
        Command::Verify(VerifyCmd::Fact1(a)) => serde_json::to_value(a),
        Command::Verify(VerifyCmd::Fact2(a)) => serde_json::to_value(a),
        Command::Verify(VerifyCmd::Fact5(a)) => serde_json::to_value(a),
        Command::Verify(VerifyCmd::BlockedIdentity(a)) => serde_json::to_value(a),
        Command::Distinguish(a) => serde_json::to_value(a),
    };
    v.expect("arguments serialize")
}

fn kwise_mode(m: CircuitMode) -> KWiseMode {
    match m {
        CircuitMode::LowDepth => KWiseMode::LowDepth,
        CircuitMode::LowAncilla => KWiseMode::LowAncilla,
    }
}

fn config_error(msg: impl Into<String>) -> Error {
    Error::Config(msg.into())
}

/// The ensemble named by the flags; `k` is the design order.
pub fn ensemble_spec(a: &EnsembleArgs, k: usize) -> Result<EnsembleSpec> {
    let base = if let Some(text) = &a.spec {
        serde_json::from_str(text).map_err(|e| config_error(format!("--spec is not a valid ensemble: {e}")))?
    } else {
        let independence = match a.independence {
            IndependenceArg::Exact => Independence::ExactFunction,
            IndependenceArg::Kwise => Independence::KWise { k: 2 * k },
        };
        let (n, xi, p) = (a.n, a.xi, a.p);
        match a.family {
            Family::RandomPhase => EnsembleSpec::RandomPhase { n, independence },
            Family::BlockedPhase => EnsembleSpec::BlockedPhase { n, xi, independence },
            Family::Pfc => EnsembleSpec::Pfc { n, independence },
            Family::Lrfc => EnsembleSpec::Lrfc { n, independence },
            Family::BlockedLrfc => EnsembleSpec::BlockedLrfc { n, xi, independence },
            Family::AmplifiedBlockedLrfc => EnsembleSpec::AmplifiedBlockedLrfc {
                n,
                xi,
                p,
                independence,
            },
            Family::Haar => EnsembleSpec::Haar { n },
            Family::Identity => EnsembleSpec::Identity { n },
            Family::ProductState | Family::BasisState => {
                return Err(config_error("product-state and basis-state are only valid for distinguish"))
            }
        }
    };
    base.validate()?;
    match a.repeat {
        0 => Err(config_error("--repeat must be at least 1")),
        1 => Ok(base),
        r => compose(vec![base; r]),
    }
}

fn sampling(a: &EstimateArgs, seed: u64) -> Sampling {
    let mut s = match a.mode {
        ModeArg::Exact => Sampling::exact(a.budget),
        ModeArg::MonteCarlo => Sampling::monte_carlo(a.trials, seed),
    };
    s.master_seed = seed;
    s.budget = a.budget;
    s
}

pub fn dispatch(cmd: &Command, seed: u64) -> Result<Outcome> {
    match cmd {
        Command::Field(FieldCmd::Selftest(a)) => {
            let rows = selftest(&a.widths, a.trials, seed)?;
            let mismatches: u64 = rows.iter().map(|r| r.mismatches).sum();
            let mut o = Outcome::new(json!({ "rows": rows }));
            o.samples = Some(rows.iter().map(|r| r.pairs).sum());
            o.residual = Some(mismatches as f64);
            o.passed = mismatches == 0;
            o.table = Some(Table::from_rows(&rows));
            Ok(o)
        }
        Command::Kwise(KwiseCmd::Verify(a)) => {
            let spec = field_spec(a.m)?;
            let sweep = verify_kwise_all(&spec, a.k)?;
            let mut o = Outcome::new(serde_json::to_value(&sweep).expect("serializable"));
            o.samples = Some(sweep.cases);
            o.residual = Some(sweep.mismatches as f64);
            o.passed = sweep.mismatches == 0;
            Ok(o)
        }
        Command::Circuit(CircuitCmd::Build(a)) => circuit_build(a, seed),
        Command::Resources(ResourcesCmd::Table(a)) => {
            let rows = resources_table(a.n, a.k, a.eps)?;
            let mut o = Outcome::new(json!({ "rows": rows }));
            o.table = Some(Table::from_rows(&rows));
            Ok(o)
        }
        Command::Resources(ResourcesCmd::Design(a)) => {
            let family = match a.family {
                DesignFamilyArg::BlockedPhase => DesignFamily::BlockedPhase,
                DesignFamilyArg::BlockedLrfc => DesignFamily::BlockedLrfc,
            };
            let r = design_resource_calculator(a.n, a.k, a.eps, family, kwise_mode(a.mode))?;
            Ok(Outcome::new(serde_json::to_value(&r).expect("serializable")))
        }
        Command::StateError(a) => {
            let spec = ensemble_spec(&a.ensemble, a.k)?;
            Ok(Outcome::from_error(state_design_error(&spec, a.k, &sampling(a, seed))?))
        }
        Command::ChoiError(a) => {
            let spec = ensemble_spec(&a.ensemble, a.k)?;
            Ok(Outcome::from_error(choi_error(&spec, a.k, &sampling(a, seed))?))
        }
        Command::Measurable(a) => {
            let e = &a.estimate;
            let spec = ensemble_spec(&e.ensemble, e.k)?;
            let n = spec.n();
            let plan = match a.plan {
                PlanArg::Identity => ExperimentPlan::identity(n, e.k, a.m_anc)?,
                PlanArg::Random => ExperimentPlan::random(n, e.k, a.m_anc, seed, a.plan_index)?,
            };
            Ok(Outcome::from_error(measurable_experiment(&spec, &plan, &sampling(e, seed))?))
        }
        Command::Verify(VerifyCmd::Fact1(a)) => {
            let r = verify_pfc_fact1(a.n, a.k)?;
            let mut o = Outcome::new(serde_json::to_value(&r).expect("serializable"));
            o.residual = Some(r.residual);
            o.samples = Some(r.samples);
            Ok(o)
        }
        Command::Verify(VerifyCmd::Fact2(a)) => {
            let source = match a.family {
                TwirlArg::Clifford => TwirlSource::Clifford,
                TwirlArg::Haar => TwirlSource::Haar,
            };
            let r = verify_fact2(a.size.n, a.size.k, source, a.trials, seed)?;
            let within = r.estimate <= r.bound + 3.0 * r.std_error;
            let mut details = serde_json::to_value(&r).expect("serializable");
            details["within_bound"] = json!(within);
            let mut o = Outcome::new(details);
            o.estimate = Some(r.estimate);
            o.std_error = Some(r.std_error);
            o.samples = Some(r.samples);
            Ok(o)
        }
        Command::Verify(VerifyCmd::Fact5(a)) => {
            let (n, k) = (a.size.n, a.size.k);
            let mut reports = Vec::new();
            for i in 0..a.trials {
                let plan = ExperimentPlan::random(n, k, a.m_anc, seed, i)?;
                reports.push(verify_fact5(n, k, &plan)?);
            }
            let worst = reports.iter().map(|r| r.residual).fold(0.0, f64::max);
            let mut o = Outcome::new(json!({ "plans": reports }));
            o.residual = Some(worst);
            o.samples = Some(a.trials);
            o.table = Some(Table::from_rows(&reports));
            Ok(o)
        }
        Command::Verify(VerifyCmd::BlockedIdentity(a)) => {
            let r = verify_blocked_phase_identity(a.n, a.xi, a.k)?;
            let mut o = Outcome::new(serde_json::to_value(&r).expect("serializable"));
            o.residual = Some(r.residual);
            o.samples = Some(r.samples);
            Ok(o)
        }
        Command::Distinguish(a) => distinguish(a, seed),
    }
}

fn circuit_build(a: &CircuitBuildArgs, seed: u64) -> Result<Outcome> {
    let spec = field_spec(a.m)?;
    let built = build_kwise_circuit(&spec, a.k, kwise_mode(a.mode))?;
    let mut rng = StreamChooser::new(seed, "circuit");
    let mut cases = Vec::with_capacity(a.trials as usize);
    for _ in 0..a.trials {
        let x = rng.bits(a.m);
        let coeffs: Vec<u64> = (0..a.k).map(|_| rng.bits(a.m)).collect();
        cases.push((vec![x], coeffs));
    }
    let got = built.evaluate_batch(&cases)?;
    let mut mismatches = 0u64;
    for ((ins, coeffs), y) in cases.iter().zip(&got) {
        let want = eval_tree(&KWiseSeed::new(spec.clone(), coeffs.clone())?, spec.elem(ins[0])?)?;
        mismatches += (want.bits() != *y) as u64;
    }
    if let Some(path) = &a.emit {
        fs::write(path, to_text(&built.circuit))
            .map_err(|e| config_error(format!("cannot write {}: {e}", path.display())))?;
    }
    let mut o = Outcome::new(json!({
        "resources": built.circuit.report(),
        "field_polynomial": format!("{:#x}", spec.p_bits()),
        "inputs": built.inputs,
        "seeds": built.seeds,
        "output": built.output,
        "mismatches": mismatches,
    }));
    o.samples = Some(a.trials);
    o.residual = Some(mismatches as f64);
    o.passed = mismatches == 0;
    Ok(o)
}

fn distinguish(a: &DistinguishArgs, seed: u64) -> Result<Outcome> {
    let e = &a.ensemble;
    let source = match e.family {
        Family::ProductState if e.spec.is_none() => CollisionSource::ProductState { n: e.n },
        Family::BasisState if e.spec.is_none() => CollisionSource::BasisState { n: e.n, x: 0 },
        _ => CollisionSource::Ensemble {
            spec: ensemble_spec(e, a.k)?,
        },
    };
    let mut cfg = CollisionConfig::contiguous(source.n(), a.patch, a.trials)?;
    cfg.s_star = a.s_star;
    cfg.computational_basis = a.computational;
    let r = run_collision_test(&source, &cfg, seed)?;
    let rows: Vec<Vec<String>> = (0..r.patches)
        .map(|i| {
            vec![
                i.to_string(),
                r.source.per_patch_rates[i].to_string(),
                r.source.per_patch_stderr[i].to_string(),
                r.compare.per_patch_rates[i].to_string(),
                r.compare.per_patch_stderr[i].to_string(),
            ]
        })
        .collect();
    let mut o = Outcome::new(serde_json::to_value(&r).expect("serializable"));
    o.estimate = Some(r.advantage);
    o.std_error = Some((r.advantage_ci[1] - r.advantage_ci[0]) / (2.0 * 1.959964));
    o.samples = Some(r.trials);
    o.table = Some(Table {
        header: ["patch_index", "rate", "stderr", "haar_rate", "haar_stderr"].map(String::from).to_vec(),
        rows,
    });
    Ok(o)
}
