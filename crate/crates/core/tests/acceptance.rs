//! End-to-end acceptance checks. Runs without the libtest harness so that
//! every criterion prints exactly one PASS or FAIL line.

use std::collections::BTreeMap;
use std::process::ExitCode;
use std::time::{Duration, Instant};

use kdesign::designmetrics::{
    haar_superoperator, measurable_experiment, state_design_error, state_moment, unitary_superoperator,
    verify_blocked_phase_identity, verify_fact2, verify_fact5, verify_pfc_fact1, ExperimentPlan, Sampling,
    TwirlSource, DEFAULT_BUDGET,
};
use kdesign::ensembles::{compose, EnsembleSpec, Independence};
use kdesign::gf2field::{field_spec, selftest};
use kdesign::kwise::{eval_tree, verify_kwise_all, KWiseSeed};
use kdesign::lbtest::{run_collision_test, CollisionConfig, CollisionSource};
use kdesign::randomness::{Chooser, StreamChooser};
use kdesign::revcircuit::{
    build_kwise_circuit, design_resource_calculator, patch_size, randomness_bits, simulate_reversible, DesignFamily,
    KWiseMode,
};
use kdesign::Result;

const SEED: u64 = 20_240_601;

type Check = Result<(bool, String)>;

fn criterion(id: u32, title: &str, limit: Duration, f: impl FnOnce() -> Check) -> bool {
    let start = Instant::now();
    let outcome = f();
    let elapsed = start.elapsed();
    let (ok, detail) = match outcome {
        Ok((ok, d)) if elapsed <= limit => (ok, d),
        Ok((_, d)) => (false, format!("{d}; over the {:.0} s limit", limit.as_secs_f64())),
        Err(e) => (false, format!("error: {e}")),
    };
    println!(
        "criterion {id:>2} {}: {title}: {detail} [{:.2} s]",
        if ok { "PASS" } else { "FAIL" },
        elapsed.as_secs_f64()
    );
    ok
}

fn secs(s: u64) -> Duration {
    Duration::from_secs(s)
}

fn field_correctness() -> Check {
    let small = selftest(&[1, 2, 3, 4], 0, SEED)?;
    let wide = selftest(&[8, 16, 32], 100_000, SEED)?;
    let rows: Vec<_> = small.iter().chain(&wide).collect();
    let mismatches: u64 = rows.iter().map(|r| r.mismatches).sum();
    let pairs: u64 = rows.iter().map(|r| r.pairs).sum();
    Ok((mismatches == 0, format!("{pairs} products, {mismatches} mismatches")))
}

fn kwise_exact() -> Check {
    let mut cases = 0;
    let mut bad = 0;
    for m in 1..=3 {
        for k in 1..=2 {
            let s = verify_kwise_all(&field_spec(m)?, k)?;
            cases += s.cases;
            bad += s.mismatches;
        }
    }
    Ok((bad == 0, format!("{cases} (point set, target) cases, {bad} not equal to 2^-mt")))
}

fn circuit_equivalence() -> Check {
    let mut rng = StreamChooser::new(SEED, "acceptance/circuit");
    let mut mismatches = 0;
    let mut dirty = 0;
    let mut runs = 0;
    for (m, k) in [(3u32, 2usize), (4, 3)] {
        let spec = field_spec(m)?;
        for mode in [KWiseMode::LowDepth, KWiseMode::LowAncilla] {
            let b = build_kwise_circuit(&spec, k, mode)?;
            let ancillas = b.circuit.wires_with(kdesign::revcircuit::WireRole::Ancilla);
            for _ in 0..1000 {
                let x = rng.bits(m);
                let coeffs: Vec<u64> = (0..k).map(|_| rng.bits(m)).collect();
                let mut assign = BTreeMap::new();
                for (reg, v) in b.inputs.iter().chain(&b.seeds).zip(std::iter::once(&x).chain(&coeffs)) {
                    for (i, &w) in reg.wires.iter().enumerate() {
                        assign.insert(w, v >> i & 1 == 1);
                    }
                }
                let wires = simulate_reversible(&b.circuit, &assign)?;
                let got = b.output.wires.iter().enumerate().fold(0u64, |acc, (i, &w)| acc | (wires[w] as u64) << i);
                let want = eval_tree(&KWiseSeed::new(spec.clone(), coeffs)?, spec.elem(x)?)?.bits();
                mismatches += (got != want) as u32;
                dirty += ancillas.iter().any(|&w| wires[w]) as u32;
                runs += 1;
            }
        }
    }
    Ok((
        mismatches == 0 && dirty == 0,
        format!("{runs} runs, {mismatches} mismatches, {dirty} with dirty ancillas"),
    ))
}

fn state_design_bound() -> Check {
    let spec = EnsembleSpec::RandomPhase {
        n: 4,
        independence: Independence::ExactFunction,
    };
    let a = state_design_error(&spec, 2, &Sampling::exact(DEFAULT_BUDGET))?;
    let b = state_design_error(&spec, 2, &Sampling::exact(DEFAULT_BUDGET))?;
    let same = a.estimate.to_bits() == b.estimate.to_bits();
    Ok((
        a.estimate <= 1.0 && same,
        format!(
            "trace distance {:.12} over {} draws (bound 1.0), reproducible: {same}",
            a.estimate, a.samples
        ),
    ))
}

fn derandomized_moment() -> Check {
    let spec = |independence| EnsembleSpec::BlockedPhase { n: 2, xi: 1, independence };
    let exact = Sampling::exact(DEFAULT_BUDGET);
    let a = state_moment(&spec(Independence::KWise { k: 4 }), 2, &exact)?;
    let b = state_moment(&spec(Independence::ExactFunction), 2, &exact)?;
    let diff = a.operator.max_abs_diff(&b.operator);
    Ok((diff < 1e-10, format!("max entry difference {diff:.3e}")))
}

fn blocked_identity() -> Check {
    let a = verify_blocked_phase_identity(2, 1, 2)?.residual;
    let b = verify_blocked_phase_identity(4, 1, 2)?.residual;
    Ok((a < 1e-10 && b < 1e-10, format!("residuals {a:.3e} (n=2), {b:.3e} (n=4)")))
}

fn pfc_fact1() -> Check {
    let a = verify_pfc_fact1(1, 2)?.residual;
    let b = verify_pfc_fact1(2, 2)?.residual;
    Ok((a < 1e-10 && b < 1e-10, format!("residuals {a:.3e} (n=1), {b:.3e} (n=2)")))
}

fn fact2() -> Check {
    let r = verify_fact2(2, 2, TwirlSource::Clifford, 10_000, SEED)?;
    let limit = r.bound + 3.0 * r.std_error;
    Ok((
        r.estimate <= limit,
        format!("estimate {:.4} +- {:.4}, bound {:.4}", r.estimate, r.std_error, r.bound),
    ))
}

fn fact5() -> Check {
    let mut worst: f64 = 0.0;
    for (n, k) in [(1, 2), (2, 2)] {
        for i in 0..20 {
            let plan = ExperimentPlan::random(n, k, 1, SEED, i)?;
            worst = worst.max(verify_fact5(n, k, &plan)?.residual);
        }
    }
    Ok((worst < 1e-10, format!("40 plans, worst residual {worst:.3e}")))
}

fn measurable() -> Check {
    let id_plan = ExperimentPlan::random(2, 1, 0, SEED, 0)?;
    let id = measurable_experiment(&EnsembleSpec::Identity { n: 2 }, &id_plan, &Sampling::monte_carlo(10_000, SEED))?;
    let lrfc = EnsembleSpec::Lrfc {
        n: 2,
        independence: Independence::ExactFunction,
    };
    let plan = ExperimentPlan::random(2, 2, 1, SEED, 1)?;
    let e = measurable_experiment(&lrfc, &plan, &Sampling::monte_carlo(10_000, SEED))?;
    Ok((
        id.estimate >= 1.0 && e.estimate <= 0.3,
        format!("identity {:.4} (want >= 1.0), lrfc {:.4} (want <= 0.3)", id.estimate, e.estimate),
    ))
}

fn collision() -> Check {
    let n = 8;
    let cfg = CollisionConfig::contiguous(n, 1, 100_000)?;
    let r = run_collision_test(&CollisionSource::ProductState { n }, &cfg, SEED)?;
    let hi = 0.5 + 4.0 / 256.0;
    let haar_ok = r
        .compare
        .per_patch_rates
        .iter()
        .zip(&r.compare.per_patch_stderr)
        .all(|(&q, &s)| q >= 0.5 - 3.0 * s && q <= hi + 3.0 * s);
    let prod_ok = r
        .source
        .per_patch_rates
        .iter()
        .zip(&r.source.per_patch_stderr)
        .all(|(&q, &s)| (q - 2.0 / 3.0).abs() <= 3.0 * s);
    let mean = |v: &[f64]| v.iter().sum::<f64>() / v.len() as f64;
    Ok((
        haar_ok && prod_ok && r.advantage >= 0.3,
        format!(
            "haar rate {:.4}, product rate {:.4}, advantage {:.4} at s* = {:.3}",
            mean(&r.compare.per_patch_rates),
            mean(&r.source.per_patch_rates),
            r.advantage,
            r.s_star
        ),
    ))
}

fn resource_calculator() -> Check {
    let mut rng = StreamChooser::new(SEED, "acceptance/resources");
    let mut bad = Vec::new();
    for _ in 0..10 {
        let n = 1 + rng.below(1024);
        let k = 1 + rng.below(64);
        if randomness_bits(DesignFamily::BlockedPhase, n, k) != 2 * n * k {
            bad.push(format!("blocked phase n={n} k={k}"));
        }
        if randomness_bits(DesignFamily::BlockedLrfc, n, k) != 3 * n * k + (5 * n).div_ceil(2) {
            bad.push(format!("blocked lrfc n={n} k={k}"));
        }
    }
    for _ in 0..10 {
        let n = 16 + rng.below(49) as u32;
        let k = 1 + rng.below(8) as u32;
        let eps = 0.05 + 0.45 * rng.uniform01()?;
        let want = ((3.0 * n as f64 * (k * k) as f64 / eps).log2().ceil() as u32).max(3);
        let got = patch_size(n, k, eps)?;
        if got != want {
            bad.push(format!("xi n={n} k={k} eps={eps}: {got} vs {want}"));
        }
    }
    for family in [DesignFamily::BlockedPhase, DesignFamily::BlockedLrfc] {
        let r = design_resource_calculator(24, 1, 0.5, family, KWiseMode::LowDepth)?;
        if r.report.randomness_bits != randomness_bits(family, 24, 1) {
            bad.push(format!("calculator {family:?}"));
        }
    }
    Ok((bad.is_empty(), if bad.is_empty() { "all 32 checks agree".into() } else { bad.join("; ") }))
}

fn composition() -> Check {
    let exact = Sampling::exact(DEFAULT_BUDGET);
    let pfc = EnsembleSpec::Pfc {
        n: 1,
        independence: Independence::ExactFunction,
    };
    let m_pfc = unitary_superoperator(&pfc, 2, &exact)?.operator;
    let m_id = unitary_superoperator(&EnsembleSpec::Identity { n: 1 }, 2, &exact)?.operator;
    let pp = unitary_superoperator(&compose(vec![pfc.clone(), pfc.clone()])?, 2, &exact)?.operator;
    let pi = unitary_superoperator(&compose(vec![pfc.clone(), EnsembleSpec::Identity { n: 1 }])?, 2, &exact)?.operator;
    let h = haar_superoperator(1, 2)?;
    let d1 = pp.max_abs_diff(&m_pfc.mul(&m_pfc));
    let d2 = pi.max_abs_diff(&m_pfc.mul(&m_id));
    let d3 = h.mul(&m_pfc).max_abs_diff(&h).max(m_pfc.mul(&h).max_abs_diff(&h));
    let worst = d1.max(d2).max(d3);
    Ok((
        worst < 1e-10,
        format!("product {d1:.3e}, with identity {d2:.3e}, haar absorption {d3:.3e}"),
    ))
}

fn main() -> ExitCode {
    let results = [
        criterion(1, "field products agree with long division", secs(5), field_correctness),
        criterion(2, "k-wise output distribution is exactly uniform", secs(30), kwise_exact),
        criterion(3, "compiled circuits match the field oracle", secs(10), circuit_equivalence),
        criterion(4, "random phase state 2-design error at n=4", secs(120), state_design_bound),
        criterion(5, "k-wise seeds reproduce the exact blocked phase moment", secs(60), derandomized_moment),
        criterion(6, "blocked phase projection identity", secs(300), blocked_identity),
        criterion(7, "permutation-phase twirl identity", secs(300), pfc_fact1),
        criterion(8, "Clifford twirl of the distinct projector", secs(120), fact2),
        criterion(9, "parallel reformulation weight", secs(120), fact5),
        criterion(10, "measurable error separates identity from LRFC", secs(300), measurable),
        criterion(11, "collision distinguisher at n=8, L=1", secs(180), collision),
        criterion(12, "resource calculator formulas", secs(5), resource_calculator),
        criterion(13, "composition algebra of moment superoperators", secs(60), composition),
    ];
    let failed = results.iter().filter(|ok| !**ok).count();
    println!("acceptance: {} passed, {failed} failed", results.len() - failed);
    if failed == 0 {
        ExitCode::SUCCESS
    } else {
        ExitCode::FAILURE
    }
}
