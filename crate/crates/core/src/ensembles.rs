//! Random state and unitary families and their deterministic samplers.
//!
//! Patches are contiguous blocks of ξ qubits, indexed 0..m−1 with m = n/ξ
//! even. Even pairs are (0,1), (2,3), ...; odd pairs are (1,2), ...,
//! (m−1,0), wrapping at the end so every layer tiles the register.
//!
//! A sampled unitary is a list of layers in product order: U = L₀·L₁⋯, so
//! the last layer acts first on a state.

use serde::{Deserialize, Serialize};

use crate::error::{precondition, resource, Result};
use crate::gf2field::field_spec;
use crate::kwise::{sample_seed, KWiseSeed};
use crate::quantsim::{
    haar_state, sample_clifford, sample_haar_unitary, DenseOp, PatchLayout, StateVec, MAX_CLIFFORD_QUBITS, MAX_HAAR_DIM,
};
use crate::randomness::{Chooser, StreamChooser};

/// Largest register for sampled states.
pub const MAX_STATE_QUBITS: usize = 16;
/// Largest register for dense unitaries.
pub const MAX_DENSE_QUBITS: usize = 6;
/// Largest PFC register; the permutation is uniform over 2^n items.
pub const MAX_PFC_QUBITS: usize = 3;
/// Largest input width of a truth-table function.
pub const MAX_TABLE_BITS: usize = 20;

/// Source of every random function in an ensemble.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Default, Serialize, Deserialize)]
#[serde(tag = "mode", rename_all = "snake_case")]
pub enum Independence {
    /// Uniformly random truth tables.
    #[default]
    ExactFunction,
    /// Degree-(k−1) polynomials over GF(2^w), i.e. k-wise independent.
    /// A k-design uses 2k here.
    #[serde(rename = "kwise")]
    KWise { k: usize },
}

#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(tag = "variant", rename_all = "snake_case")]
pub enum EnsembleSpec {
    RandomPhase {
        n: usize,
        #[serde(default)]
        independence: Independence,
    },
    BlockedPhase {
        n: usize,
        xi: usize,
        #[serde(default)]
        independence: Independence,
    },
    Pfc {
        n: usize,
        #[serde(default)]
        independence: Independence,
    },
    Lrfc {
        n: usize,
        #[serde(default)]
        independence: Independence,
    },
    BlockedLrfc {
        n: usize,
        xi: usize,
        #[serde(default)]
        independence: Independence,
    },
    AmplifiedBlockedLrfc {
        n: usize,
        xi: usize,
        p: usize,
        #[serde(default)]
        independence: Independence,
    },
    Haar {
        n: usize,
    },
    /// The ensemble holding only the identity.
    Identity {
        n: usize,
    },
    /// Independent draws multiplied left to right.
    Composed {
        factors: Vec<EnsembleSpec>,
    },
}

/// Composition of independent draws; all factors must share n.
pub fn compose(specs: Vec<EnsembleSpec>) -> Result<EnsembleSpec> {
    let spec = EnsembleSpec::Composed { factors: specs };
    spec.validate()?;
    Ok(spec)
}

fn check_patches(n: usize, xi: usize) -> Result<PatchLayout> {
    if xi == 0 || n % xi != 0 {
        return Err(precondition(format!("patch size {xi} must divide n = {n}")));
    }
    let m = n / xi;
    if m < 2 || m % 2 != 0 {
        return Err(precondition(format!(
            "n/xi = {m} patches; need an even count of at least 2"
        )));
    }
    PatchLayout::contiguous(n, xi)
}

fn check_independence(ind: Independence) -> Result<()> {
    match ind {
        Independence::KWise { k: 0 } => Err(precondition("k-wise independence needs k >= 1")),
        _ => Ok(()),
    }
}

impl EnsembleSpec {
    pub fn n(&self) -> usize {
        match self {
            EnsembleSpec::RandomPhase { n, .. }
            | EnsembleSpec::BlockedPhase { n, .. }
            | EnsembleSpec::Pfc { n, .. }
            | EnsembleSpec::Lrfc { n, .. }
            | EnsembleSpec::BlockedLrfc { n, .. }
            | EnsembleSpec::AmplifiedBlockedLrfc { n, .. }
            | EnsembleSpec::Haar { n }
            | EnsembleSpec::Identity { n } => *n,
            EnsembleSpec::Composed { factors } => factors.first().map_or(0, EnsembleSpec::n),
        }
    }

    pub fn variant_name(&self) -> &'static str {
        match self {
            EnsembleSpec::RandomPhase { .. } => "random_phase",
            EnsembleSpec::BlockedPhase { .. } => "blocked_phase",
            EnsembleSpec::Pfc { .. } => "pfc",
            EnsembleSpec::Lrfc { .. } => "lrfc",
            EnsembleSpec::BlockedLrfc { .. } => "blocked_lrfc",
            EnsembleSpec::AmplifiedBlockedLrfc { .. } => "amplified_blocked_lrfc",
            EnsembleSpec::Haar { .. } => "haar",
            EnsembleSpec::Identity { .. } => "identity",
            EnsembleSpec::Composed { .. } => "composed",
        }
    }

    /// Variants that produce states rather than unitaries.
    pub fn is_state(&self) -> bool {
        matches!(
            self,
            EnsembleSpec::RandomPhase { .. } | EnsembleSpec::BlockedPhase { .. } | EnsembleSpec::Haar { .. }
        )
    }

    /// Variants that produce unitaries.
    pub fn is_unitary(&self) -> bool {
        !matches!(self, EnsembleSpec::RandomPhase { .. } | EnsembleSpec::BlockedPhase { .. })
    }

    pub fn validate(&self) -> Result<()> {
        if self.n() == 0 && !matches!(self, EnsembleSpec::Composed { .. }) {
            return Err(precondition("n must be positive"));
        }
        match self {
            EnsembleSpec::RandomPhase { independence, .. } | EnsembleSpec::Pfc { independence, .. } => {
                check_independence(*independence)
            }
            EnsembleSpec::Lrfc { n, independence } => {
                if n % 2 != 0 {
                    return Err(precondition(format!("LRFC needs even n, got {n}")));
                }
                check_independence(*independence)
            }
            EnsembleSpec::BlockedPhase { n, xi, independence }
            | EnsembleSpec::BlockedLrfc { n, xi, independence } => {
                check_patches(*n, *xi)?;
                check_independence(*independence)
            }
            EnsembleSpec::AmplifiedBlockedLrfc { n, xi, p, independence } => {
                check_patches(*n, *xi)?;
                if *p == 0 {
                    return Err(precondition("amplification p must be at least 1"));
                }
                check_independence(*independence)
            }
            EnsembleSpec::Haar { .. } | EnsembleSpec::Identity { .. } => Ok(()),
            EnsembleSpec::Composed { factors } => {
                let first = factors
                    .first()
                    .ok_or_else(|| precondition("composition of zero ensembles"))?;
                for f in factors {
                    f.validate()?;
                    if !f.is_unitary() {
                        return Err(precondition(format!("cannot compose the state family {}", f.variant_name())));
                    }
                    if f.n() != first.n() {
                        return Err(precondition(format!(
                            "composed factors act on {} and {} qubits",
                            first.n(),
                            f.n()
                        )));
                    }
                }
                Ok(())
            }
        }
    }
}

/// Identifies one draw: stream `ensemble/{draw_index}` of `master_seed`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct SampleHandle {
    pub master_seed: u64,
    pub draw_index: u64,
}

impl SampleHandle {
    pub fn new(master_seed: u64, draw_index: u64) -> Self {
        Self { master_seed, draw_index }
    }

    pub fn chooser(&self) -> StreamChooser {
        StreamChooser::child(self.master_seed, "ensemble", self.draw_index)
    }
}

/// A random Boolean function on w-bit inputs.
#[derive(Debug, Clone, PartialEq)]
pub enum BoolFn {
    Table(Vec<bool>),
    Seed(KWiseSeed),
}

impl BoolFn {
    pub fn eval(&self, x: u64) -> bool {
        match self {
            BoolFn::Table(t) => t[x as usize],
            BoolFn::Seed(s) => s.bit(x),
        }
    }
}

/// A random function from w-bit words to w-bit words.
#[derive(Debug, Clone, PartialEq)]
pub enum WordFn {
    Table(Vec<u64>),
    Seed(KWiseSeed),
}

impl WordFn {
    pub fn eval(&self, x: u64) -> u64 {
        match self {
            WordFn::Table(t) => t[x as usize],
            WordFn::Seed(s) => s.eval(x),
        }
    }
}

fn check_table(w: usize) -> Result<()> {
    if w > MAX_TABLE_BITS {
        return Err(resource(format!(
            "truth table on {w} bits exceeds the limit {MAX_TABLE_BITS}"
        )));
    }
    Ok(())
}

/// One below(2) per truth-table entry, or one k-wise seed.
pub fn sample_bool_fn(w: usize, ind: Independence, rng: &mut dyn Chooser) -> Result<BoolFn> {
    match ind {
        Independence::ExactFunction => {
            check_table(w)?;
            Ok(BoolFn::Table((0..1u64 << w).map(|_| rng.below(2) == 1).collect()))
        }
        Independence::KWise { k } => Ok(BoolFn::Seed(sample_seed(&field_spec(w as u32)?, k, rng)?)),
    }
}

/// One below(2^w) per table entry, or one k-wise seed.
pub fn sample_word_fn(w: usize, ind: Independence, rng: &mut dyn Chooser) -> Result<WordFn> {
    match ind {
        Independence::ExactFunction => {
            check_table(w)?;
            Ok(WordFn::Table((0..1u64 << w).map(|_| rng.bits(w as u32)).collect()))
        }
        Independence::KWise { k } => Ok(WordFn::Seed(sample_seed(&field_spec(w as u32)?, k, rng)?)),
    }
}

/// Uniform permutation of 0..size by Fisher–Yates; radices size, size−1, ..., 2.
pub fn sample_permutation(size: usize, rng: &mut dyn Chooser) -> Vec<u64> {
    let mut p: Vec<u64> = (0..size as u64).collect();
    for i in (1..size).rev() {
        let j = rng.below(i as u64 + 1) as usize;
        p.swap(i, j);
    }
    p
}

/// One gate of a layer.
#[derive(Debug, Clone, PartialEq)]
pub enum Step {
    /// A dense unitary on `qubits`; local bit i is qubits[i].
    Clifford { qubits: Vec<usize>, op: DenseOp },
    /// Diagonal (−1)^{f(x|qubits)}.
    Phase { qubits: Vec<usize>, f: BoolFn },
    /// target ⊕= h(control).
    Shuffle {
        control: Vec<usize>,
        target: Vec<usize>,
        h: WordFn,
    },
    /// |x⟩ ↦ |perm[x]⟩ on the whole register.
    Permutation { perm: Vec<u64> },
    /// A dense unitary on the whole register.
    Dense { op: DenseOp },
}

impl Step {
    fn apply(&self, psi: &mut StateVec) -> Result<()> {
        match self {
            Step::Clifford { qubits, op } => psi.apply_op(qubits, op),
            Step::Phase { qubits, f } => psi.apply_phase_fn(qubits, |x| f.eval(x)),
            Step::Shuffle { control, target, h } => psi.apply_xor_fn(control, target, |x| h.eval(x)),
            Step::Permutation { perm } => psi.apply_basis_permutation(perm),
            Step::Dense { op } => {
                let all: Vec<usize> = (0..psi.n()).collect();
                psi.apply_op(&all, op)
            }
        }
    }
}

/// Steps on disjoint qubits, or commuting diagonal steps.
#[derive(Debug, Clone, PartialEq)]
pub struct Layer {
    pub name: String,
    pub steps: Vec<Step>,
}

/// A drawn unitary as layers in product order.
#[derive(Debug, Clone, PartialEq)]
pub struct SampledUnitary {
    pub n: usize,
    pub layers: Vec<Layer>,
}

impl SampledUnitary {
    pub fn layer_names(&self) -> Vec<&str> {
        self.layers.iter().map(|l| l.name.as_str()).collect()
    }

    /// ψ ↦ Uψ, applying the last layer first.
    pub fn apply(&self, psi: &mut StateVec) -> Result<()> {
        if psi.n() != self.n {
            return Err(precondition(format!(
                "{}-qubit unitary applied to a {}-qubit state",
                self.n,
                psi.n()
            )));
        }
        for layer in self.layers.iter().rev() {
            for step in &layer.steps {
                step.apply(psi)?;
            }
        }
        Ok(())
    }

    pub fn to_dense(&self) -> Result<DenseOp> {
        if self.n > MAX_DENSE_QUBITS {
            return Err(resource(format!(
                "dense unitaries support n <= {MAX_DENSE_QUBITS}, got {}",
                self.n
            )));
        }
        let dim = 1usize << self.n;
        let mut op = DenseOp::zeros(dim);
        for c in 0..dim {
            let mut psi = StateVec::basis(self.n, c as u64);
            self.apply(&mut psi)?;
            for (r, a) in psi.amps().iter().enumerate() {
                op.matrix_mut()[(r, c)] = *a;
            }
        }
        Ok(op)
    }
}

fn check_clifford(w: usize) -> Result<()> {
    if w > MAX_CLIFFORD_QUBITS {
        return Err(resource(format!(
            "Clifford layers act on {w} qubits; the sampler supports {MAX_CLIFFORD_QUBITS}"
        )));
    }
    Ok(())
}

fn clifford_step(qubits: Vec<usize>, rng: &mut dyn Chooser) -> Result<Step> {
    check_clifford(qubits.len())?;
    let op = sample_clifford(qubits.len(), rng)?;
    Ok(Step::Clifford { qubits, op })
}

/// LRFC layers S_L, S_R, F, C on `qubits`, with L the low half.
fn lrfc_layers(qubits: &[usize], ind: Independence, rng: &mut dyn Chooser) -> Result<[Vec<Step>; 4]> {
    let w = qubits.len();
    check_clifford(w)?;
    let (l, r) = qubits.split_at(w / 2);
    let c = clifford_step(qubits.to_vec(), rng)?;
    let f = sample_bool_fn(w, ind, rng)?;
    let h_r = sample_word_fn(w / 2, ind, rng)?;
    let h_l = sample_word_fn(w / 2, ind, rng)?;
    Ok([
        vec![Step::Shuffle {
            control: r.to_vec(),
            target: l.to_vec(),
            h: h_l,
        }],
        vec![Step::Shuffle {
            control: l.to_vec(),
            target: r.to_vec(),
            h: h_r,
        }],
        vec![Step::Phase {
            qubits: qubits.to_vec(),
            f,
        }],
        vec![c],
    ])
}

fn even_pairs(m: usize) -> impl Iterator<Item = (usize, usize)> {
    (0..m).step_by(2).map(|a| (a, a + 1))
}

fn odd_pairs(m: usize) -> impl Iterator<Item = (usize, usize)> {
    (1..m).step_by(2).map(move |a| (a, (a + 1) % m))
}

fn named(name: &str, steps: Vec<Step>) -> Layer {
    Layer {
        name: name.to_string(),
        steps,
    }
}

/// Draws a unitary. Randomness is consumed in the order the layers act.
pub fn draw_unitary(spec: &EnsembleSpec, rng: &mut dyn Chooser) -> Result<SampledUnitary> {
    spec.validate()?;
    let n = spec.n();
    let all: Vec<usize> = (0..n).collect();
    let layers = match spec {
        EnsembleSpec::RandomPhase { .. } | EnsembleSpec::BlockedPhase { .. } => {
            return Err(precondition(format!("{} is a state family", spec.variant_name())));
        }
        EnsembleSpec::Identity { .. } => Vec::new(),
        EnsembleSpec::Haar { .. } => {
            if (1usize << n) > MAX_HAAR_DIM {
                return Err(resource(format!("Haar unitaries support dim <= {MAX_HAAR_DIM}")));
            }
            vec![named("U", vec![Step::Dense {
                op: sample_haar_unitary(1 << n, rng)?,
            }])]
        }
        EnsembleSpec::Pfc { independence, .. } => {
            if n > MAX_PFC_QUBITS {
                return Err(resource(format!(
                    "PFC samples a uniform permutation of 2^n items; supported for n <= {MAX_PFC_QUBITS}"
                )));
            }
            let c = clifford_step(all.clone(), rng)?;
            let f = sample_bool_fn(n, *independence, rng)?;
            let perm = sample_permutation(1 << n, rng);
            vec![
                named("P", vec![Step::Permutation { perm }]),
                named("F", vec![Step::Phase { qubits: all, f }]),
                named("C", vec![c]),
            ]
        }
        EnsembleSpec::Lrfc { independence, .. } => {
            let [sl, sr, f, c] = lrfc_layers(&all, *independence, rng)?;
            vec![named("S_L", sl), named("S_R", sr), named("F", f), named("C", c)]
        }
        EnsembleSpec::BlockedLrfc { xi, independence, .. } => {
            let layout = check_patches(n, *xi)?;
            let m = layout.count();
            check_clifford(*xi)?;
            let ind = *independence;
            let mut c_o = Vec::new();
            for a in (1..m).step_by(2) {
                c_o.push(clifford_step(layout.patch(a).to_vec(), rng)?);
            }
            let shuffles = |pairs: &mut dyn Iterator<Item = (usize, usize)>, rng: &mut dyn Chooser| {
                pairs
                    .map(|(a, b)| {
                        Ok(Step::Shuffle {
                            control: layout.patch(a).to_vec(),
                            target: layout.patch(b).to_vec(),
                            h: sample_word_fn(*xi, ind, rng)?,
                        })
                    })
                    .collect::<Result<Vec<_>>>()
            };
            let phases = |pairs: &mut dyn Iterator<Item = (usize, usize)>, rng: &mut dyn Chooser| {
                pairs
                    .map(|(a, b)| {
                        Ok(Step::Phase {
                            qubits: layout.pair(a, b),
                            f: sample_bool_fn(2 * xi, ind, rng)?,
                        })
                    })
                    .collect::<Result<Vec<_>>>()
            };
            let s_e = shuffles(&mut odd_pairs(m), rng)?;
            let f_o = phases(&mut odd_pairs(m), rng)?;
            let f_e = phases(&mut even_pairs(m), rng)?;
            let s_o = shuffles(&mut even_pairs(m), rng)?;
            vec![
                named("S_o", s_o),
                named("F_e", f_e),
                named("F_o", f_o),
                named("S_e", s_e),
                named("C_o", c_o),
            ]
        }
        EnsembleSpec::AmplifiedBlockedLrfc { xi, p, independence, .. } => {
            let layout = check_patches(n, *xi)?;
            let m = layout.count();
            check_clifford(2 * xi)?;
            let blocks = |parity: &str, pairs: Vec<(usize, usize)>, rng: &mut dyn Chooser| -> Result<Vec<Layer>> {
                let mut per_rep: Vec<[Vec<Step>; 4]> = (0..*p).map(|_| Default::default()).collect();
                for (a, b) in pairs {
                    let q = layout.pair(a, b);
                    // Rightmost factor of the power acts first, so it is drawn first.
                    for rep in per_rep.iter_mut().rev() {
                        let ls = lrfc_layers(&q, *independence, rng)?;
                        for (dst, src) in rep.iter_mut().zip(ls) {
                            dst.extend(src);
                        }
                    }
                }
                let mut out = Vec::new();
                for (r, rep) in per_rep.into_iter().enumerate() {
                    for (name, steps) in ["S_L", "S_R", "F", "C"].iter().zip(rep) {
                        out.push(named(&format!("{name}_{parity}{r}"), steps));
                    }
                }
                Ok(out)
            };
            let odd = blocks("o", odd_pairs(m).collect(), rng)?;
            let even = blocks("e", even_pairs(m).collect(), rng)?;
            even.into_iter().chain(odd).collect()
        }
        EnsembleSpec::Composed { factors } => {
            let mut draws = Vec::with_capacity(factors.len());
            for f in factors {
                draws.push(draw_unitary(f, rng)?);
            }
            let mut layers = Vec::new();
            for (i, d) in draws.into_iter().enumerate() {
                for mut l in d.layers {
                    l.name = format!("{i}:{}", l.name);
                    layers.push(l);
                }
            }
            layers
        }
    };
    Ok(SampledUnitary { n, layers })
}

/// Draws a state from a state family.
pub fn draw_state(spec: &EnsembleSpec, rng: &mut dyn Chooser) -> Result<StateVec> {
    spec.validate()?;
    let n = spec.n();
    if n > MAX_STATE_QUBITS {
        return Err(resource(format!(
            "state sampling supports n <= {MAX_STATE_QUBITS}, got {n}"
        )));
    }
    match spec {
        EnsembleSpec::RandomPhase { independence, .. } => {
            let f = sample_bool_fn(n, *independence, rng)?;
            let mut psi = StateVec::plus(n);
            psi.apply_phase_fn(&(0..n).collect::<Vec<_>>(), |x| f.eval(x))?;
            Ok(psi)
        }
        EnsembleSpec::BlockedPhase { xi, independence, .. } => {
            let layout = check_patches(n, *xi)?;
            let m = layout.count();
            let mut psi = StateVec::plus(n);
            for (a, b) in odd_pairs(m).chain(even_pairs(m)) {
                let f = sample_bool_fn(2 * xi, *independence, rng)?;
                psi.apply_phase_fn(&layout.pair(a, b), |x| f.eval(x))?;
            }
            Ok(psi)
        }
        EnsembleSpec::Haar { .. } => haar_state(n, rng),
        _ => Err(precondition(format!(
            "{} is not a state family; use sample_unitary",
            spec.variant_name()
        ))),
    }
}

pub fn sample_state(spec: &EnsembleSpec, handle: &SampleHandle) -> Result<StateVec> {
    draw_state(spec, &mut handle.chooser())
}

pub fn sample_unitary(spec: &EnsembleSpec, handle: &SampleHandle) -> Result<DenseOp> {
    draw_unitary(spec, &mut handle.chooser())?.to_dense()
}

/// The structured draw, usable beyond the dense size limit.
pub fn sample_structured(spec: &EnsembleSpec, handle: &SampleHandle) -> Result<SampledUnitary> {
    draw_unitary(spec, &mut handle.chooser())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::gf2field::field_spec;
    use crate::quantsim::C64;
    use crate::randomness::ZeroChooser;

    fn exact(n: usize) -> EnsembleSpec {
        EnsembleSpec::RandomPhase {
            n,
            independence: Independence::ExactFunction,
        }
    }

    #[test]
    fn json_round_trip() {
        let s = EnsembleSpec::BlockedLrfc {
            n: 4,
            xi: 1,
            independence: Independence::KWise { k: 4 },
        };
        let j = serde_json::to_string(&s).unwrap();
        assert_eq!(j, r#"{"variant":"blocked_lrfc","n":4,"xi":1,"independence":{"mode":"kwise","k":4}}"#);
        assert_eq!(serde_json::from_str::<EnsembleSpec>(&j).unwrap(), s);
        let d: EnsembleSpec = serde_json::from_str(r#"{"variant":"pfc","n":2}"#).unwrap();
        assert_eq!(
            d,
            EnsembleSpec::Pfc {
                n: 2,
                independence: Independence::ExactFunction
            }
        );
    }

    #[test]
    fn zero_function_gives_plus_state() {
        let psi = draw_state(&exact(3), &mut ZeroChooser).unwrap();
        assert_eq!(psi, StateVec::plus(3));
    }

    #[test]
    fn phase_states_have_flat_amplitudes() {
        let specs = [
            exact(4),
            EnsembleSpec::BlockedPhase {
                n: 4,
                xi: 1,
                independence: Independence::KWise { k: 4 },
            },
        ];
        for s in &specs {
            for i in 0..5 {
                let psi = sample_state(s, &SampleHandle::new(1, i)).unwrap();
                assert!(psi.amps().iter().all(|a| (a.norm() - 0.25).abs() < 1e-14));
            }
        }
    }

    #[test]
    fn blocked_phase_matches_phase_sum() {
        // Replays the seeds drawn for n=4, ξ=1 and evaluates Σ_a f_{a,a+1} directly.
        let spec = EnsembleSpec::BlockedPhase {
            n: 4,
            xi: 1,
            independence: Independence::KWise { k: 4 },
        };
        let handle = SampleHandle::new(7, 3);
        let psi = sample_state(&spec, &handle).unwrap();
        let f2 = field_spec(2).unwrap();
        let mut c = handle.chooser();
        let pairs = [(1, 2), (3, 0), (0, 1), (2, 3)];
        let seeds: Vec<KWiseSeed> = pairs.iter().map(|_| sample_seed(&f2, 4, &mut c).unwrap()).collect();
        for x in 0..16u64 {
            let bit = |q: usize| x >> q & 1;
            let parity = pairs
                .iter()
                .zip(&seeds)
                .map(|(&(a, b), s)| s.bit(bit(a) | bit(b) << 1) as u32)
                .sum::<u32>();
            let sign = if parity % 2 == 1 { -0.25 } else { 0.25 };
            assert!((psi.amps()[x as usize] - C64::new(sign, 0.0)).norm() < 1e-14);
        }
    }

    #[test]
    fn handles_are_deterministic() {
        let spec = EnsembleSpec::Lrfc {
            n: 2,
            independence: Independence::ExactFunction,
        };
        let a = sample_unitary(&spec, &SampleHandle::new(5, 9)).unwrap();
        let b = sample_unitary(&spec, &SampleHandle::new(5, 9)).unwrap();
        assert_eq!(a, b);
        assert_ne!(a, sample_unitary(&spec, &SampleHandle::new(5, 10)).unwrap());
    }

    #[test]
    fn all_variants_are_unitary() {
        let ind = Independence::ExactFunction;
        let kw = Independence::KWise { k: 4 };
        let specs = vec![
            EnsembleSpec::Pfc { n: 3, independence: ind },
            EnsembleSpec::Pfc { n: 2, independence: kw },
            EnsembleSpec::Lrfc { n: 4, independence: ind },
            EnsembleSpec::Lrfc { n: 2, independence: kw },
            EnsembleSpec::BlockedLrfc { n: 4, xi: 1, independence: ind },
            EnsembleSpec::BlockedLrfc { n: 4, xi: 2, independence: kw },
            EnsembleSpec::AmplifiedBlockedLrfc { n: 4, xi: 1, p: 2, independence: ind },
            EnsembleSpec::Haar { n: 3 },
            EnsembleSpec::Identity { n: 2 },
            compose(vec![EnsembleSpec::Haar { n: 2 }, EnsembleSpec::Lrfc { n: 2, independence: ind }]).unwrap(),
        ];
        for s in &specs {
            for i in 0..3 {
                let u = sample_unitary(s, &SampleHandle::new(3, i)).unwrap();
                assert!(u.is_unitary(1e-10), "{s:?}");
            }
        }
    }

    #[test]
    fn blocked_lrfc_layer_order_and_zero_draw() {
        let spec = EnsembleSpec::BlockedLrfc {
            n: 4,
            xi: 1,
            independence: Independence::ExactFunction,
        };
        let d = draw_unitary(&spec, &mut ZeroChooser).unwrap();
        assert_eq!(d.layer_names(), ["S_o", "F_e", "F_o", "S_e", "C_o"]);
        let u = d.to_dense().unwrap();
        // The zero-stream Clifford is the identity up to a global phase.
        let phase = u.matrix()[(0, 0)];
        assert!((phase.norm() - 1.0).abs() < 1e-12);
        let scaled = DenseOp::from_matrix(u.matrix().map(|v| v / phase));
        assert!(scaled.max_abs_diff(&DenseOp::identity(16)) < 1e-12);
    }

    #[test]
    fn lrfc_matches_stepwise_application() {
        // n=2: C, then F, then S_R (x_R ⊕= h_R(x_L)), then S_L (x_L ⊕= h_L(x_R)).
        let spec = EnsembleSpec::Lrfc {
            n: 2,
            independence: Independence::ExactFunction,
        };
        let handle = SampleHandle::new(12, 0);
        let u = sample_unitary(&spec, &handle).unwrap();
        let mut c = handle.chooser();
        let cl = sample_clifford(2, &mut c).unwrap();
        let f: Vec<bool> = (0..4).map(|_| c.below(2) == 1).collect();
        let h_r: Vec<u64> = (0..2).map(|_| c.below(2)).collect();
        let h_l: Vec<u64> = (0..2).map(|_| c.below(2)).collect();
        let mut v = cl.apply(StateVec::zero(2).amps());
        for (x, a) in v.iter_mut().enumerate() {
            if f[x] {
                *a = -*a;
            }
        }
        let mut w = vec![C64::new(0.0, 0.0); 4];
        for (x, a) in v.iter().enumerate() {
            let (l, r) = (x as u64 & 1, x as u64 >> 1);
            w[(l | (r ^ h_r[l as usize]) << 1) as usize] = *a;
        }
        let mut out = vec![C64::new(0.0, 0.0); 4];
        for (x, a) in w.iter().enumerate() {
            let (l, r) = (x as u64 & 1, x as u64 >> 1);
            out[((l ^ h_l[r as usize]) | r << 1) as usize] = *a;
        }
        let got = u.apply(StateVec::zero(2).amps());
        assert!(got.iter().zip(&out).all(|(a, b)| (a - b).norm() < 1e-12));
    }

    #[test]
    fn preconditions() {
        assert!(compose(vec![]).is_err());
        assert!(compose(vec![EnsembleSpec::Haar { n: 1 }, EnsembleSpec::Haar { n: 2 }]).is_err());
        let bad = EnsembleSpec::BlockedPhase {
            n: 3,
            xi: 1,
            independence: Independence::ExactFunction,
        };
        assert!(bad.validate().is_err());
        let big = EnsembleSpec::Pfc {
            n: 4,
            independence: Independence::ExactFunction,
        };
        assert!(matches!(draw_unitary(&big, &mut ZeroChooser), Err(e) if e.is_resource_limit()));
        assert!(sample_state(&EnsembleSpec::Identity { n: 1 }, &SampleHandle::new(0, 0)).is_err());
    }
}
