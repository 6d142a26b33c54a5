//! Moment operators, design errors and small-scale checks of the operator
//! identities behind the design proofs.
//!
//! k-copy spaces put copy j on bits [jn, (j+1)n). Superoperators act on
//! row-major vectorizations, vec(ρ)[a·D + b] = ρ[a, b], so a channel
//! ρ ↦ VρV† has matrix V ⊗ conj(V).

use nalgebra::DMatrix;
use num_bigint::BigUint;
use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::ensembles::{draw_state, draw_unitary, sample_bool_fn, sample_permutation, EnsembleSpec, Independence};
use crate::error::{precondition, resource, Result};
use crate::quantsim::{
    all_permutations, distinct_dimension, distinct_projector, local_distinct_projector, permute_index,
    sample_clifford, sample_haar_unitary, DenseOp, PatchLayout, StateVec, C64, ZERO,
};
use crate::randomness::{exhaustive_sum, merge_groups, monte_carlo_groups, Accumulator, Chooser, StreamChooser};

/// Largest k-copy dimension for state moments.
pub const MAX_MOMENT_DIM: usize = 4096;
/// Largest n·k for superoperators, which have dimension 4^{nk}.
pub const MAX_SUPEROP_QUBITS: usize = 6;
/// Largest register n + m_anc for sequential experiments.
pub const MAX_EXPERIMENT_QUBITS: usize = 10;
/// Largest register of the parallel reformulation n + m_anc + 2nk.
pub const MAX_REFORMULATION_QUBITS: usize = 20;
pub const BOOTSTRAP_RESAMPLES: usize = 2000;
pub const BOOTSTRAP_RESAMPLES_LARGE: usize = 200;
/// Monte-Carlo draws are split into this many contiguous groups; error
/// bars resample group means.
pub const MC_GROUPS: u64 = 100;
pub const DEFAULT_BUDGET: u64 = 1 << 22;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Mode {
    ExactEnum,
    MonteCarlo,
}

/// How an ensemble average is taken. `draws` and `master_seed` also drive
/// any Monte-Carlo Haar reference in exact mode.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct Sampling {
    pub mode: Mode,
    pub draws: u64,
    pub master_seed: u64,
    /// Leaf limit for exact enumeration.
    pub budget: u64,
}

impl Sampling {
    pub fn exact(budget: u64) -> Self {
        Self {
            mode: Mode::ExactEnum,
            draws: 10_000,
            master_seed: 0,
            budget,
        }
    }

    pub fn monte_carlo(draws: u64, master_seed: u64) -> Self {
        Self {
            mode: Mode::MonteCarlo,
            draws,
            master_seed,
            budget: DEFAULT_BUDGET,
        }
    }
}

/// Packed upper triangle of Σ v v†; the imaginary part is allocated only
/// once a complex vector arrives.
#[derive(Debug, Clone)]
struct HermAcc {
    dim: usize,
    re: Vec<f64>,
    im: Vec<f64>,
}

impl HermAcc {
    fn new(dim: usize) -> Self {
        Self {
            dim,
            re: vec![0.0; dim * (dim + 1) / 2],
            im: Vec::new(),
        }
    }

    fn add_rank1(&mut self, v: &[C64], w: f64) {
        let d = self.dim;
        let real = v.iter().all(|a| a.im == 0.0);
        if !real && self.im.is_empty() {
            self.im = vec![0.0; self.re.len()];
        }
        let mut idx = 0;
        for i in 0..d {
            let vi = v[i] * w;
            if vi == ZERO {
                idx += d - i;
                continue;
            }
            if real {
                let r = vi.re;
                for (acc, b) in self.re[idx..idx + d - i].iter_mut().zip(&v[i..]) {
                    *acc += r * b.re;
                }
            } else {
                for j in i..d {
                    let p = vi * v[j].conj();
                    self.re[idx + j - i] += p.re;
                    self.im[idx + j - i] += p.im;
                }
            }
            idx += d - i;
        }
    }

    fn to_op(&self, scale: f64) -> DenseOp {
        let d = self.dim;
        let mut m = DMatrix::from_element(d, d, ZERO);
        let mut idx = 0;
        for i in 0..d {
            for j in i..d {
                let im = self.im.get(idx).copied().unwrap_or(0.0);
                let v = C64::new(self.re[idx], im) * scale;
                m[(i, j)] = v;
                m[(j, i)] = v.conj();
                idx += 1;
            }
        }
        DenseOp::from_matrix(m)
    }
}

impl Accumulator for HermAcc {
    fn merge(&mut self, other: Self) {
        if self.im.is_empty() && !other.im.is_empty() {
            self.im = vec![0.0; self.re.len()];
        }
        for (a, b) in self.re.iter_mut().zip(other.re) {
            *a += b;
        }
        for (a, b) in self.im.iter_mut().zip(other.im) {
            *a += b;
        }
    }
}

/// An ensemble average of an operator.
#[derive(Debug, Clone)]
pub struct MomentEstimate {
    pub operator: DenseOp,
    pub mode: Mode,
    pub samples: u64,
    /// Frobenius-norm standard error of the mean (Monte-Carlo only).
    pub std_error: Option<f64>,
    /// Per-group means with their draw counts (Monte-Carlo only).
    pub groups: Vec<(DenseOp, u64)>,
}

fn group_std_error(groups: &[(DenseOp, u64)], mean: &DenseOp) -> Option<f64> {
    let g = groups.len();
    if g < 2 {
        return None;
    }
    let var: f64 = groups.iter().map(|(m, _)| m.sub(mean).frobenius_norm().powi(2)).sum::<f64>() / (g - 1) as f64;
    Some((var / g as f64).sqrt())
}

/// Averages an accumulator-producing visitor exactly or by Monte-Carlo.
fn average<A, N, F, T>(sampling: &Sampling, label: &str, new_acc: N, visit: F, finish: T) -> Result<MomentEstimate>
where
    A: Accumulator,
    N: Fn() -> A + Sync,
    F: Fn(&mut dyn Chooser, &mut A) -> Result<()> + Sync,
    T: Fn(&A, f64) -> DenseOp,
{
    match sampling.mode {
        Mode::ExactEnum => {
            let (acc, leaves) = exhaustive_sum(sampling.budget, &new_acc, &visit)?;
            Ok(MomentEstimate {
                operator: finish(&acc, 1.0 / leaves as f64),
                mode: Mode::ExactEnum,
                samples: leaves,
                std_error: None,
                groups: Vec::new(),
            })
        }
        Mode::MonteCarlo => {
            let groups = monte_carlo_groups(sampling.master_seed, label, sampling.draws, MC_GROUPS, &new_acc, &visit)?;
            let means: Vec<(DenseOp, u64)> = groups.iter().map(|(a, c)| (finish(a, 1.0 / *c as f64), *c)).collect();
            let (total, count) = merge_groups(groups).expect("at least one group");
            let operator = finish(&total, 1.0 / count as f64);
            Ok(MomentEstimate {
                std_error: group_std_error(&means, &operator),
                operator,
                mode: Mode::MonteCarlo,
                samples: count,
                groups: means,
            })
        }
    }
}

fn check_moment_dim(n: usize, k: usize) -> Result<usize> {
    if k == 0 {
        return Err(precondition("k must be at least 1"));
    }
    if n * k > 12 || (1usize << (n * k)) > MAX_MOMENT_DIM {
        return Err(resource(format!(
            "(2^n)^k = 2^{} exceeds the moment limit {MAX_MOMENT_DIM}",
            n * k
        )));
    }
    Ok(1 << (n * k))
}

/// E[|ψ⟩⟨ψ|^⊗k] over a state family.
pub fn state_moment(spec: &EnsembleSpec, k: usize, sampling: &Sampling) -> Result<MomentEstimate> {
    if !spec.is_state() {
        return Err(precondition(format!("{} is not a state family", spec.variant_name())));
    }
    spec.validate()?;
    let dim = check_moment_dim(spec.n(), k)?;
    average(
        sampling,
        "ensemble",
        || HermAcc::new(dim),
        |c, acc: &mut HermAcc| {
            let psi = draw_state(spec, c)?;
            acc.add_rank1(&psi.tensor_power(k), 1.0);
            Ok(())
        },
        |acc, s| acc.to_op(s),
    )
}

/// (2^n − 1)!/(2^n + k − 1)! Σ_π π.
pub fn haar_state_moment(n: usize, k: usize) -> Result<DenseOp> {
    let dim = check_moment_dim(n, k)?;
    if k > 6 {
        return Err(resource("the Haar moment is built for k <= 6"));
    }
    let d = (1u64 << n) as f64;
    let coeff = 1.0 / (0..k).map(|j| d + j as f64).product::<f64>();
    let mut m = DMatrix::from_element(dim, dim, ZERO);
    for pi in all_permutations(k) {
        for x in 0..dim as u64 {
            m[(permute_index(x, &pi, n) as usize, x as usize)] += C64::new(coeff, 0.0);
        }
    }
    Ok(DenseOp::from_matrix(m))
}

/// A design-error estimate with optional bootstrap statistics.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ErrorEstimate {
    pub estimate: f64,
    /// The plug-in distance before any bias correction.
    pub raw: f64,
    pub std_error: Option<f64>,
    /// 95% bootstrap interval.
    pub ci: Option<[f64; 2]>,
    pub samples: u64,
    pub mode: Mode,
}

fn bootstrap_rng(master_seed: u64, label: &str) -> StreamChooser {
    StreamChooser::new(master_seed, label)
}

/// Weighted mean of a resample of group means.
fn resample_mean(groups: &[(DenseOp, u64)], rng: &mut StreamChooser) -> DenseOp {
    let dim = groups[0].0.dim();
    let mut acc = DenseOp::zeros(dim);
    let mut total = 0u64;
    for _ in 0..groups.len() {
        let (m, c) = &groups[rng.rng().random_range(0..groups.len())];
        acc = acc.add(&m.scale(*c as f64));
        total += c;
    }
    acc.scale(1.0 / total as f64)
}

/// Every resample costs one dense eigendecomposition, so large operators
/// get fewer resamples.
fn resample_count(dim: usize) -> usize {
    if dim > 64 {
        BOOTSTRAP_RESAMPLES_LARGE
    } else {
        BOOTSTRAP_RESAMPLES
    }
}

struct BootStats {
    mean: f64,
    sd: f64,
    lo: f64,
    hi: f64,
}

fn boot_stats(mut values: Vec<f64>) -> BootStats {
    values.sort_by(f64::total_cmp);
    let n = values.len() as f64;
    let mean = values.iter().sum::<f64>() / n;
    let sd = (values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (n - 1.0)).sqrt();
    let q = |p: f64| values[((p * (n - 1.0)).round() as usize).min(values.len() - 1)];
    BootStats {
        mean,
        sd,
        lo: q(0.025),
        hi: q(0.975),
    }
}

/// ‖χ_S − χ_H‖₁ with a percentile bootstrap interval in Monte-Carlo mode.
pub fn state_design_error(spec: &EnsembleSpec, k: usize, sampling: &Sampling) -> Result<ErrorEstimate> {
    let est = state_moment(spec, k, sampling)?;
    let haar = haar_state_moment(spec.n(), k)?;
    let raw = est.operator.sub(&haar).trace_norm();
    if est.mode == Mode::ExactEnum {
        return Ok(ErrorEstimate {
            estimate: raw,
            raw,
            std_error: None,
            ci: None,
            samples: est.samples,
            mode: Mode::ExactEnum,
        });
    }
    let mut rng = bootstrap_rng(sampling.master_seed, "bootstrap");
    let values: Vec<f64> = (0..resample_count(haar.dim()))
        .map(|_| resample_mean(&est.groups, &mut rng).sub(&haar).trace_norm())
        .collect();
    let b = boot_stats(values);
    Ok(ErrorEstimate {
        estimate: raw,
        raw,
        std_error: Some(b.sd),
        ci: Some([b.lo, b.hi]),
        samples: est.samples,
        mode: Mode::MonteCarlo,
    })
}

fn check_superop(n: usize, k: usize) -> Result<usize> {
    if k == 0 {
        return Err(precondition("k must be at least 1"));
    }
    if n * k > MAX_SUPEROP_QUBITS {
        return Err(resource(format!(
            "superoperators need n*k <= {MAX_SUPEROP_QUBITS}, got {}",
            n * k
        )));
    }
    Ok(1 << (n * k))
}

fn add_superop(acc: &mut [C64], v: &DenseOp) {
    let d = v.dim();
    let m = v.matrix();
    let dd = d * d;
    for a in 0..d {
        for i in 0..d {
            let x = m[(a, i)];
            if x == ZERO {
                continue;
            }
            for b in 0..d {
                let row = (a * d + b) * dd;
                for j in 0..d {
                    acc[row + i * d + j] += x * m[(b, j)].conj();
                }
            }
        }
    }
}

fn square_from(v: &[C64], scale: f64) -> DenseOp {
    let d = (v.len() as f64).sqrt().round() as usize;
    DenseOp::from_matrix(DMatrix::from_row_slice(d, d, v).map(|x| x * scale))
}

/// E[V ⊗ conj(V)] for V = U^⊗k.
pub fn unitary_superoperator(spec: &EnsembleSpec, k: usize, sampling: &Sampling) -> Result<MomentEstimate> {
    if !spec.is_unitary() {
        return Err(precondition(format!("{} is not a unitary family", spec.variant_name())));
    }
    spec.validate()?;
    let d = check_superop(spec.n(), k)?;
    average(
        sampling,
        "ensemble",
        || vec![ZERO; d * d * d * d],
        |c, acc: &mut Vec<C64>| {
            let u = draw_unitary(spec, c)?.to_dense()?;
            add_superop(acc, &u.tensor_power(k));
            Ok(())
        },
        |acc, s| square_from(acc, s),
    )
}

/// The k-copy Haar twirl Σ_{σ,τ} (G⁺)_{στ} vec(σ) vec(τ)†, with G the Gram
/// matrix of permutation operators. The pseudo-inverse covers d < k.
pub fn haar_superoperator(n: usize, k: usize) -> Result<DenseOp> {
    let d = check_superop(n, k)?;
    if k > 3 {
        return Err(resource("the exact Haar twirl is built for k <= 3"));
    }
    let perms = all_permutations(k);
    let images: Vec<Vec<u64>> = perms
        .iter()
        .map(|p| (0..d as u64).map(|x| permute_index(x, p, n)).collect())
        .collect();
    let r = perms.len();
    let gram = DMatrix::from_fn(r, r, |s, t| images[s].iter().zip(&images[t]).filter(|(a, b)| a == b).count() as f64);
    let wg = gram.pseudo_inverse(1e-9).map_err(|e| precondition(e.to_string()))?;
    let dd = d * d;
    let mut m = DMatrix::from_element(dd, dd, ZERO);
    for s in 0..r {
        for t in 0..r {
            let w = wg[(s, t)];
            if w == 0.0 {
                continue;
            }
            for (x, &sx) in images[s].iter().enumerate() {
                let row = sx as usize * d + x;
                for (y, &ty) in images[t].iter().enumerate() {
                    m[(row, ty as usize * d + y)] += C64::new(w, 0.0);
                }
            }
        }
    }
    Ok(DenseOp::from_matrix(m))
}

/// Choi state (Φ ⊗ id)(|Ω⟩⟨Ω|) from a superoperator on D-dimensional inputs.
pub fn choi_from_superop(m: &DenseOp) -> DenseOp {
    let dd = m.dim();
    let d = (dd as f64).sqrt().round() as usize;
    let src = m.matrix();
    let inv = 1.0 / d as f64;
    let j = DMatrix::from_fn(dd, dd, |r, c| {
        let (a, i) = (r / d, r % d);
        let (b, jj) = (c / d, c % d);
        src[(a * d + b, i * d + jj)] * inv
    });
    DenseOp::from_matrix(j)
}

/// The Choi state of the k-th moment channel.
pub fn unitary_moment_choi(spec: &EnsembleSpec, k: usize, sampling: &Sampling) -> Result<MomentEstimate> {
    let mut est = unitary_superoperator(spec, k, sampling)?;
    est.operator = choi_from_superop(&est.operator);
    for g in est.groups.iter_mut() {
        g.0 = choi_from_superop(&g.0);
    }
    Ok(est)
}

fn haar_choi(n: usize, k: usize, sampling: &Sampling) -> Result<DenseOp> {
    if k <= 3 {
        return Ok(choi_from_superop(&haar_superoperator(n, k)?));
    }
    let mc = Sampling::monte_carlo(sampling.draws, sampling.master_seed ^ 0x4841_4152);
    Ok(unitary_moment_choi(&EnsembleSpec::Haar { n }, k, &mc)?.operator)
}

/// ‖J_E − J_H‖₁ between Choi states: a lower bound on the diamond distance.
pub fn choi_error(spec: &EnsembleSpec, k: usize, sampling: &Sampling) -> Result<ErrorEstimate> {
    let est = unitary_moment_choi(spec, k, sampling)?;
    let haar = haar_choi(spec.n(), k, sampling)?;
    let raw = est.operator.sub(&haar).trace_norm();
    if est.mode == Mode::ExactEnum {
        return Ok(ErrorEstimate {
            estimate: raw,
            raw,
            std_error: None,
            ci: None,
            samples: est.samples,
            mode: Mode::ExactEnum,
        });
    }
    let mut rng = bootstrap_rng(sampling.master_seed, "bootstrap");
    let values: Vec<f64> = (0..resample_count(haar.dim()))
        .map(|_| resample_mean(&est.groups, &mut rng).sub(&haar).trace_norm())
        .collect();
    let b = boot_stats(values);
    Ok(ErrorEstimate {
        estimate: raw,
        raw,
        std_error: Some(b.sd),
        ci: Some([b.lo, b.hi]),
        samples: est.samples,
        mode: Mode::MonteCarlo,
    })
}

/// A k-query experiment: W_{k+1} U W_k ⋯ U W_1 |0⟩ with U on qubits [0, n).
#[derive(Debug, Clone, PartialEq)]
pub struct ExperimentPlan {
    pub n: usize,
    pub k: usize,
    pub m_anc: usize,
    pub interleavers: Vec<DenseOp>,
}

impl ExperimentPlan {
    pub fn new(n: usize, k: usize, m_anc: usize, interleavers: Vec<DenseOp>) -> Result<Self> {
        if n + m_anc > MAX_EXPERIMENT_QUBITS {
            return Err(resource(format!(
                "experiments support n + m_anc <= {MAX_EXPERIMENT_QUBITS}"
            )));
        }
        if interleavers.len() != k + 1 {
            return Err(precondition(format!(
                "{k} queries need {} interleavers, got {}",
                k + 1,
                interleavers.len()
            )));
        }
        for (i, w) in interleavers.iter().enumerate() {
            if w.dim() != 1 << (n + m_anc) || !w.is_unitary(1e-10) {
                return Err(precondition(format!("interleaver {i} is not a unitary on n + m_anc qubits")));
            }
        }
        Ok(Self {
            n,
            k,
            m_anc,
            interleavers,
        })
    }

    /// Every interleaver is the identity.
    pub fn identity(n: usize, k: usize, m_anc: usize) -> Result<Self> {
        Self::new(n, k, m_anc, vec![DenseOp::identity(1 << (n + m_anc)); k + 1])
    }

    /// Haar-random interleavers drawn from stream `plan/index` of `seed`.
    pub fn random(n: usize, k: usize, m_anc: usize, seed: u64, index: u64) -> Result<Self> {
        if n + m_anc > MAX_EXPERIMENT_QUBITS {
            return Err(resource(format!(
                "experiments support n + m_anc <= {MAX_EXPERIMENT_QUBITS}"
            )));
        }
        let mut c = StreamChooser::child(seed, "plan", index);
        let ws = (0..=k)
            .map(|_| sample_haar_unitary(1 << (n + m_anc), &mut c))
            .collect::<Result<Vec<_>>>()?;
        Self::new(n, k, m_anc, ws)
    }

    pub fn width(&self) -> usize {
        self.n + self.m_anc
    }

    /// The output state for one fixed U.
    pub fn output(&self, u: &DenseOp) -> Result<StateVec> {
        if u.dim() != 1 << self.n {
            return Err(precondition("query unitary does not act on n qubits"));
        }
        let all: Vec<usize> = (0..self.width()).collect();
        let a: Vec<usize> = (0..self.n).collect();
        let mut psi = StateVec::zero(self.width());
        psi.apply_op(&all, &self.interleavers[0])?;
        for w in &self.interleavers[1..] {
            psi.apply_op(&a, u)?;
            psi.apply_op(&all, w)?;
        }
        Ok(psi)
    }
}

fn output_density(spec: &EnsembleSpec, plan: &ExperimentPlan, sampling: &Sampling, label: &str) -> Result<MomentEstimate> {
    let dim = 1 << plan.width();
    average(
        sampling,
        label,
        || HermAcc::new(dim),
        |c, acc: &mut HermAcc| {
            let u = draw_unitary(spec, c)?.to_dense()?;
            acc.add_rank1(plan.output(&u)?.amps(), 1.0);
            Ok(())
        },
        |acc, s| acc.to_op(s),
    )
}

/// ‖ρ_E − ρ_H‖₁ for the plan's output states. The Haar side is always
/// Monte-Carlo over `sampling.draws` draws; the estimate is bootstrap
/// bias-corrected, max(2·raw − mean_boot, 0).
pub fn measurable_experiment(spec: &EnsembleSpec, plan: &ExperimentPlan, sampling: &Sampling) -> Result<ErrorEstimate> {
    if !spec.is_unitary() {
        return Err(precondition(format!("{} is not a unitary family", spec.variant_name())));
    }
    if spec.n() != plan.n {
        return Err(precondition(format!(
            "ensemble acts on {} qubits, plan queries {}",
            spec.n(),
            plan.n
        )));
    }
    let rho_e = output_density(spec, plan, sampling, "ensemble")?;
    let haar_sampling = Sampling {
        mode: Mode::MonteCarlo,
        ..*sampling
    };
    let rho_h = output_density(&EnsembleSpec::Haar { n: plan.n }, plan, &haar_sampling, "haar")?;
    let raw = rho_e.operator.sub(&rho_h.operator).trace_norm();
    let mut rng = bootstrap_rng(sampling.master_seed, "bootstrap");
    let values: Vec<f64> = (0..resample_count(rho_h.operator.dim()))
        .map(|_| {
            let e = if rho_e.groups.is_empty() {
                rho_e.operator.clone()
            } else {
                resample_mean(&rho_e.groups, &mut rng)
            };
            e.sub(&resample_mean(&rho_h.groups, &mut rng)).trace_norm()
        })
        .collect();
    let b = boot_stats(values);
    Ok(ErrorEstimate {
        estimate: (2.0 * raw - b.mean).max(0.0),
        raw,
        std_error: Some(b.sd),
        ci: Some([(2.0 * raw - b.hi).max(0.0), (2.0 * raw - b.lo).max(0.0)]),
        samples: rho_e.samples,
        mode: rho_e.mode,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ResidualReport {
    pub residual: f64,
    /// Leaves enumerated.
    pub samples: u64,
}

/// ‖B′(Π⊗Π) − (2^{nk}/D) B(Π⊗Π)‖_F with B′ = 4^{nk} E_{P,F}[(PF)^{†⊗k} |Bell⟩⟨Bell| (PF)^{⊗k}]
/// and B = Σ_π π ⊗ π, by enumerating every function and permutation.
pub fn verify_pfc_fact1(n: usize, k: usize) -> Result<ResidualReport> {
    if n == 0 || k == 0 {
        return Err(precondition("n and k must be positive"));
    }
    if n > 2 || k > 2 {
        return Err(resource("exhaustive enumeration supports n <= 2, k <= 2"));
    }
    let nk = n * k;
    let d = 1usize << nk;
    let big = d * d;
    let mask = (1u64 << n) - 1;
    let (acc, leaves) = exhaustive_sum(
        u64::MAX,
        || vec![0.0f64; big * big],
        |c, acc: &mut Vec<f64>| {
            let f = sample_bool_fn(n, Independence::ExactFunction, c)?;
            let g = sample_permutation(1 << n, c);
            let mut ginv = vec![0u64; g.len()];
            for (x, &y) in g.iter().enumerate() {
                ginv[y as usize] = x as u64;
            }
            // (PF)^{†⊗k}|x⟩ = (−1)^{Σ f(g⁻¹x_i)} |g⁻¹x⟩; w = Σ_x (PF)^{†⊗k}|x⟩ ⊗ |x⟩.
            let entries: Vec<(usize, f64)> = (0..d as u64)
                .map(|x| {
                    let (mut gx, mut parity) = (0u64, false);
                    for j in 0..k {
                        let xi = ginv[(x >> (j * n) & mask) as usize];
                        parity ^= f.eval(xi);
                        gx |= xi << (j * n);
                    }
                    ((gx | x << nk) as usize, if parity { -1.0 } else { 1.0 })
                })
                .collect();
            for &(r, sr) in &entries {
                for &(c2, sc) in &entries {
                    acc[r * big + c2] += sr * sc;
                }
            }
            Ok(())
        },
    )?;
    let dist = distinct_projector(n, k)?;
    let both = |idx: usize| dist.diag[idx % d] && dist.diag[idx / d];
    let scale = d as f64 / leaves as f64;
    let ratio = d as f64 / distinct_dimension(n, k) as f64;
    let mut rhs = vec![0.0f64; big * big];
    for pi in all_permutations(k) {
        for col in 0..big {
            if both(col) {
                let (x, y) = ((col % d) as u64, (col / d) as u64);
                let row = permute_index(x, &pi, n) as usize + permute_index(y, &pi, n) as usize * d;
                rhs[row * big + col] += ratio;
            }
        }
    }
    let mut sq = 0.0;
    for r in 0..big {
        for c in 0..big {
            let lhs = if both(c) { acc[r * big + c] * scale } else { 0.0 };
            sq += (lhs - rhs[r * big + c]).powi(2);
        }
    }
    Ok(ResidualReport {
        residual: sq.sqrt(),
        samples: leaves,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TwirlSource {
    Clifford,
    Haar,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TwirlReport {
    /// ‖1 − E[C^{†⊗k} Π_dist C^{⊗k}]‖_∞.
    pub estimate: f64,
    pub std_error: f64,
    /// k²/2^n.
    pub bound: f64,
    pub samples: u64,
}

/// Monte-Carlo twirl of the distinct projector over Cliffords or Haar.
pub fn verify_fact2(n: usize, k: usize, source: TwirlSource, trials: u64, master_seed: u64) -> Result<TwirlReport> {
    if n == 0 || k == 0 {
        return Err(precondition("n and k must be positive"));
    }
    if n * k > 8 {
        return Err(resource(format!("twirl needs n*k <= 8, got {}", n * k)));
    }
    let d = 1usize << (n * k);
    let pi = distinct_projector(n, k)?;
    let label = match source {
        TwirlSource::Clifford => "trial/clifford",
        TwirlSource::Haar => "trial/haar",
    };
    let est = average(
        &Sampling::monte_carlo(trials, master_seed),
        label,
        || vec![ZERO; d * d],
        |c, acc: &mut Vec<C64>| {
            let u = match source {
                TwirlSource::Clifford => sample_clifford(n, c)?,
                TwirlSource::Haar => sample_haar_unitary(1 << n, c)?,
            };
            let v = u.tensor_power(k);
            let mut pv = v.matrix().clone();
            for (r, &keep) in pi.diag.iter().enumerate() {
                if !keep {
                    pv.row_mut(r).fill(ZERO);
                }
            }
            let t = v.matrix().adjoint() * pv;
            for (a, b) in acc.iter_mut().zip(t.transpose().iter()) {
                *a += b;
            }
            Ok(())
        },
        |acc, s| square_from(acc, s),
    )?;
    let id = DenseOp::identity(d);
    let estimate = id.sub(&est.operator).operator_norm();
    let norms: Vec<f64> = est.groups.iter().map(|(m, _)| id.sub(m).operator_norm()).collect();
    let g = norms.len() as f64;
    let mean = norms.iter().sum::<f64>() / g;
    let sd = (norms.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (g - 1.0).max(1.0)).sqrt();
    Ok(TwirlReport {
        estimate,
        std_error: sd / g.sqrt(),
        bound: (k * k) as f64 / (1u64 << n) as f64,
        samples: est.samples,
    })
}

/// Register offsets of the parallel reformulation: A A′ on [0, n+m), then
/// X₁..X_k, then Y₁..Y_k, n qubits each.
fn reformulation_layout(plan: &ExperimentPlan) -> (usize, usize, usize) {
    let base = plan.width();
    let nk = plan.n * plan.k;
    (base, base + nk, base + 2 * nk)
}

/// |Ψ⟩ such that 2^{nk} ⟨Bell|_{XY} U^{⊗k}_X |Ψ⟩ is the sequential output.
///
/// After W_j, register A is swapped into X_j and re-prepared as half of a
/// Bell pair with Y_j; projecting X_j Y_j onto Bell later teleports U's
/// output back into A.
pub fn parallel_reformulation(plan: &ExperimentPlan) -> Result<StateVec> {
    let (x0, y0, total) = reformulation_layout(plan);
    if total > MAX_REFORMULATION_QUBITS {
        return Err(resource(format!(
            "reformulation needs {total} qubits; the limit is {MAX_REFORMULATION_QUBITS}"
        )));
    }
    let n = plan.n;
    let aa: Vec<usize> = (0..plan.width()).collect();
    let a: Vec<usize> = (0..n).collect();
    let h = {
        let s = std::f64::consts::FRAC_1_SQRT_2;
        let mut m = DenseOp::zeros(2);
        m.matrix_mut()[(0, 0)] = C64::new(s, 0.0);
        m.matrix_mut()[(0, 1)] = C64::new(s, 0.0);
        m.matrix_mut()[(1, 0)] = C64::new(s, 0.0);
        m.matrix_mut()[(1, 1)] = C64::new(-s, 0.0);
        m
    };
    let mut psi = StateVec::zero(total);
    psi.apply_op(&aa, &plan.interleavers[0])?;
    for j in 0..plan.k {
        let xj: Vec<usize> = (x0 + j * n..x0 + (j + 1) * n).collect();
        let yj: Vec<usize> = (y0 + j * n..y0 + (j + 1) * n).collect();
        psi.apply_xor_fn(&a, &xj, |v| v)?;
        psi.apply_xor_fn(&xj, &a, |v| v)?;
        psi.apply_xor_fn(&a, &xj, |v| v)?;
        for &q in &a {
            psi.apply_op(&[q], &h)?;
        }
        psi.apply_xor_fn(&a, &yj, |v| v)?;
        psi.apply_op(&aa, &plan.interleavers[j + 1])?;
    }
    Ok(psi)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Fact5Report {
    /// tr(B (1 ⊗ Π_dist) |Ψ⟩⟨Ψ|).
    pub value: f64,
    /// D/2^{nk}.
    pub expected: f64,
    pub residual: f64,
}

/// Evaluates tr(B (1 ⊗ Π_dist) |Ψ⟩⟨Ψ|) exactly for the plan's |Ψ⟩.
pub fn verify_fact5(n: usize, k: usize, plan: &ExperimentPlan) -> Result<Fact5Report> {
    if plan.n != n || plan.k != k {
        return Err(precondition("plan does not match (n, k)"));
    }
    if n * k > 6 {
        return Err(resource(format!("fact 5 check needs n*k <= 6, got {}", n * k)));
    }
    let psi = parallel_reformulation(plan)?;
    let (x0, y0, _) = reformulation_layout(plan);
    let nk = n * k;
    let mask = (1u64 << nk) - 1;
    let dist = distinct_projector(n, k)?;
    let amps = psi.amps();
    let mut value = C64::new(0.0, 0.0);
    for pi in all_permutations(k) {
        for (idx, a) in amps.iter().enumerate() {
            let idx = idx as u64;
            let y = idx >> y0 & mask;
            if *a == ZERO || !dist.diag[y as usize] {
                continue;
            }
            let x = idx >> x0 & mask;
            let rest = idx & !(mask << x0) & !(mask << y0);
            let moved = rest | permute_index(x, &pi, n) << x0 | permute_index(y, &pi, n) << y0;
            value += amps[moved as usize].conj() * a;
        }
    }
    let expected = distinct_dimension(n, k) as f64 / (1u64 << nk) as f64;
    Ok(Fact5Report {
        value: value.re,
        expected,
        residual: (value - C64::new(expected, 0.0)).norm(),
    })
}

/// ‖Π_loc χ_B Π_loc − Π_loc χ_F Π_loc‖_F between the exact blocked and
/// global phase-state moments.
pub fn verify_blocked_phase_identity(n: usize, xi: usize, k: usize) -> Result<ResidualReport> {
    if n > 4 || !(1..=2).contains(&xi) || !(1..=2).contains(&k) {
        return Err(resource("exhaustive check supports n <= 4, xi in {1, 2}, k <= 2"));
    }
    let ind = Independence::ExactFunction;
    let exact = Sampling::exact(u64::MAX);
    let blocked = state_moment(&EnsembleSpec::BlockedPhase { n, xi, independence: ind }, k, &exact)?;
    let global = state_moment(&EnsembleSpec::RandomPhase { n, independence: ind }, k, &exact)?;
    let proj = local_distinct_projector(&PatchLayout::contiguous(n, xi)?, k)?.to_op();
    let lhs = proj.mul(&blocked.operator).mul(&proj);
    let rhs = proj.mul(&global.operator).mul(&proj);
    Ok(ResidualReport {
        residual: lhs.sub(&rhs).frobenius_norm(),
        samples: blocked.samples + global.samples,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RelativeBound {
    /// 2^{nk} · C(2^n + k − 1, k), exact.
    pub factor: String,
    pub eps_rel: f64,
}

/// Converts an additive error to a relative one.
pub fn relative_error_bound(eps_add: f64, n: u32, k: u32) -> Result<RelativeBound> {
    if !(eps_add >= 0.0) {
        return Err(precondition(format!("eps_add must be nonnegative, got {eps_add}")));
    }
    let top = (BigUint::from(1u8) << n) + BigUint::from(k) - BigUint::from(1u8);
    let mut binom = BigUint::from(1u8);
    for j in 0..k {
        binom = binom * (&top - BigUint::from(j)) / BigUint::from(j + 1);
    }
    let factor = (BigUint::from(1u8) << (n as u64 * k as u64)) * binom;
    let f: f64 = factor.to_string().parse().expect("decimal digits parse");
    Ok(RelativeBound {
        factor: factor.to_string(),
        eps_rel: if eps_add == 0.0 { 0.0 } else { f * eps_add },
    })
}

/// 4k²/2^n.
pub fn random_phase_bound(n: u32, k: u32) -> f64 {
    4.0 * (k * k) as f64 / 2f64.powi(n as i32)
}

/// Both readings of the blocked phase error: 3(n/ξ)k²/2^ξ + 2k²/2^n and
/// 3nk²ξ/2^ξ + 2k²/2^n. The first is tighter and is the one checked.
pub fn blocked_phase_bounds(n: u32, xi: u32, k: u32) -> (f64, f64) {
    let (n, xi, k2) = (n as f64, xi as f64, (k * k) as f64);
    let tail = 2.0 * k2 / 2f64.powf(n);
    (3.0 * n / xi * k2 / 2f64.powf(xi) + tail, 3.0 * n * k2 * xi / 2f64.powf(xi) + tail)
}

/// One machine-readable result.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MetricRecord {
    pub op: String,
    pub params: serde_json::Value,
    pub estimate: Option<f64>,
    pub std_error: Option<f64>,
    pub samples: Option<u64>,
    pub residual: Option<f64>,
    pub elapsed_ms: u64,
    pub master_seed: u64,
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::quantsim::permutation_op;

    fn phase(n: usize) -> EnsembleSpec {
        EnsembleSpec::RandomPhase {
            n,
            independence: Independence::ExactFunction,
        }
    }

    /// 2^{−nk} when every string occurs an even number of times among
    /// (x̃₁..x̃_k, x₁..x_k), else 0.
    fn stabilization_moment(n: usize, k: usize) -> DenseOp {
        let d = 1usize << (n * k);
        let mask = (1u64 << n) - 1;
        let mut m = DenseOp::zeros(d);
        for r in 0..d as u64 {
            for c in 0..d as u64 {
                let mut counts = vec![0u32; 1 << n];
                for j in 0..k {
                    counts[(r >> (j * n) & mask) as usize] += 1;
                    counts[(c >> (j * n) & mask) as usize] += 1;
                }
                if counts.iter().all(|v| v % 2 == 0) {
                    m.matrix_mut()[(r as usize, c as usize)] = C64::new(1.0 / d as f64, 0.0);
                }
            }
        }
        m
    }

    #[test]
    fn first_moment_is_maximally_mixed() {
        let m = state_moment(&phase(3), 1, &Sampling::exact(1 << 10)).unwrap();
        assert!(m.operator.max_abs_diff(&DenseOp::identity(8).scale(0.125)) < 1e-12);
        assert!(haar_state_moment(3, 1).unwrap().max_abs_diff(&DenseOp::identity(8).scale(0.125)) < 1e-15);
    }

    #[test]
    fn random_phase_second_moment_matches_stabilizations() {
        let m = state_moment(&phase(2), 2, &Sampling::exact(1 << 10)).unwrap();
        assert_eq!(m.samples, 16);
        assert!(m.operator.max_abs_diff(&stabilization_moment(2, 2)) < 1e-12);
    }

    #[test]
    fn haar_pair_moment() {
        let h = haar_state_moment(1, 2).unwrap();
        let want = DenseOp::identity(4).add(&permutation_op(&[1, 0], 1).unwrap()).scale(1.0 / 6.0);
        assert!(h.max_abs_diff(&want) < 1e-15);
        for (n, k) in [(1, 3), (2, 2), (3, 2), (2, 3)] {
            let t = haar_state_moment(n, k).unwrap().trace();
            assert!((t.re - 1.0).abs() < 1e-12);
        }
    }

    #[test]
    fn haar_states_have_small_error() {
        let e = state_design_error(&EnsembleSpec::Haar { n: 1 }, 2, &Sampling::monte_carlo(20_000, 1)).unwrap();
        let [lo, hi] = e.ci.unwrap();
        assert!(lo <= e.estimate && e.estimate <= hi + 1e-12);
        assert!(e.estimate < 0.05, "{e:?}");
    }

    #[test]
    fn identity_choi_distance() {
        let e = choi_error(&EnsembleSpec::Identity { n: 1 }, 1, &Sampling::exact(1)).unwrap();
        assert!((e.estimate - 1.5).abs() < 1e-12, "{e:?}");
    }

    #[test]
    fn haar_superoperator_is_idempotent_projector() {
        for (n, k) in [(1, 1), (1, 2), (1, 3), (2, 2)] {
            let m = haar_superoperator(n, k).unwrap();
            assert!(m.mul(&m).max_abs_diff(&m) < 1e-10, "n={n} k={k}");
        }
    }

    #[test]
    fn identity_ensemble_measurable_error() {
        let plan = ExperimentPlan::identity(2, 1, 0).unwrap();
        let e = measurable_experiment(&EnsembleSpec::Identity { n: 2 }, &plan, &Sampling::monte_carlo(4000, 3)).unwrap();
        assert!((e.estimate - 1.5).abs() < 0.1, "{e:?}");
    }

    #[test]
    fn reformulation_reproduces_sequential_output() {
        let plan = ExperimentPlan::random(1, 2, 1, 8, 0).unwrap();
        let mut c = StreamChooser::new(2, "u");
        let u = sample_haar_unitary(2, &mut c).unwrap();
        let want = plan.output(&u).unwrap();
        let psi = parallel_reformulation(&plan).unwrap();
        let (x0, y0, _) = reformulation_layout(&plan);
        let v = u.tensor_power(2);
        let nk = 2;
        let mut got = vec![ZERO; 1 << plan.width()];
        // 2^{nk} ⟨Bell|_{XY} V_X |Ψ⟩ = 2^{nk/2} Σ_{x,y} V[y,x] Ψ[aa, x, y].
        for (idx, a) in psi.amps().iter().enumerate() {
            let aa = idx & ((1 << x0) - 1);
            let x = idx >> x0 & 3;
            let y = idx >> y0 & 3;
            got[aa] += v.matrix()[(y, x)] * a;
        }
        let scale = ((1u64 << nk) as f64).sqrt();
        for (g, w) in got.iter().zip(want.amps()) {
            assert!((g * scale - w).norm() < 1e-12);
        }
    }

    #[test]
    fn fact5_small_cases() {
        let r = verify_fact5(1, 1, &ExperimentPlan::random(1, 1, 1, 0, 0).unwrap()).unwrap();
        assert!((r.value - 1.0).abs() < 1e-12);
        let r = verify_fact5(1, 2, &ExperimentPlan::random(1, 2, 1, 5, 0).unwrap()).unwrap();
        assert!((r.value - 0.5).abs() < 1e-10, "{r:?}");
    }

    #[test]
    fn fact1_base_cases() {
        assert!(verify_pfc_fact1(1, 1).unwrap().residual < 1e-12);
        assert!(verify_pfc_fact1(1, 2).unwrap().residual < 1e-10);
        assert!(verify_pfc_fact1(3, 1).is_err());
    }

    #[test]
    fn fact2_k1_is_exact() {
        let r = verify_fact2(2, 1, TwirlSource::Clifford, 20, 0).unwrap();
        assert!(r.estimate < 1e-12);
    }

    #[test]
    fn blocked_identity_small() {
        assert!(verify_blocked_phase_identity(2, 1, 2).unwrap().residual < 1e-10);
        assert!(verify_blocked_phase_identity(2, 1, 1).unwrap().residual < 1e-12);
    }

    #[test]
    fn relative_factor_examples() {
        assert_eq!(relative_error_bound(1.0, 1, 1).unwrap().factor, "4");
        assert_eq!(relative_error_bound(1.0, 2, 2).unwrap().factor, "160");
        assert_eq!(relative_error_bound(0.0, 5, 3).unwrap().eps_rel, 0.0);
        assert!(relative_error_bound(-1.0, 1, 1).is_err());
        let big = relative_error_bound(1e-300, 40, 8).unwrap();
        assert!(big.factor.len() > 90);
    }

    #[test]
    fn bound_forms() {
        let (main, literal) = blocked_phase_bounds(4, 1, 2);
        assert!((main - 24.5).abs() < 1e-12);
        assert!((literal - 24.5).abs() < 1e-12);
        let (main, literal) = blocked_phase_bounds(16, 4, 2);
        assert!(main < literal);
        assert_eq!(random_phase_bound(4, 2), 1.0);
    }
}
