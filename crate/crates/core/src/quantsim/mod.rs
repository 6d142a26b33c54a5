//! Dense statevector and operator engine for a handful of qubits.
//!
//! Qubit q is bit q of a basis index. In a k-copy space over n qubits,
//! copy j occupies bits [jn, (j+1)n) of the index.

mod clifford;
mod haar;
mod perm;

use nalgebra::DMatrix;
use num_complex::Complex;

use crate::error::{precondition, Result};
use crate::kwise::KWiseSeed;

pub use clifford::{pauli_op, sample_clifford, sample_tableau, CliffordTableau, MAX_CLIFFORD_QUBITS};
pub use haar::{haar_state, sample_haar_unitary, MAX_HAAR_DIM};
pub use perm::{
    all_permutations, cycle_count, distinct_dimension, distinct_projector, local_distinct_dimension,
    local_distinct_projector, permutation_op, permute_index, DiagProjector, MAX_COPY_QUBITS,
};

pub type C64 = Complex<f64>;

pub const ZERO: C64 = C64::new(0.0, 0.0);
pub const ONE: C64 = C64::new(1.0, 0.0);

/// Collects the bits of `x` at positions `qubits` into a word.
#[inline]
pub fn gather_bits(x: u64, qubits: &[usize]) -> u64 {
    qubits
        .iter()
        .enumerate()
        .fold(0, |acc, (i, &q)| acc | ((x >> q & 1) << i))
}

/// Spreads the low bits of `v` onto positions `qubits`.
#[inline]
pub fn scatter_bits(v: u64, qubits: &[usize]) -> u64 {
    qubits
        .iter()
        .enumerate()
        .fold(0, |acc, (i, &q)| acc | ((v >> i & 1) << q))
}

fn check_qubits(n: usize, qubits: &[usize]) -> Result<()> {
    for (i, &q) in qubits.iter().enumerate() {
        if q >= n {
            return Err(precondition(format!("qubit {q} out of range for {n} qubits")));
        }
        if qubits[..i].contains(&q) {
            return Err(precondition(format!("qubit {q} listed twice")));
        }
    }
    Ok(())
}

/// Pure state on n qubits.
#[derive(Debug, Clone, PartialEq)]
pub struct StateVec {
    n: usize,
    amps: Vec<C64>,
}

impl StateVec {
    pub fn basis(n: usize, x: u64) -> Self {
        let mut amps = vec![ZERO; 1 << n];
        amps[x as usize] = ONE;
        Self { n, amps }
    }

    pub fn zero(n: usize) -> Self {
        Self::basis(n, 0)
    }

    /// |+⟩^⊗n.
    pub fn plus(n: usize) -> Self {
        let a = C64::new(((1u64 << n) as f64).sqrt().recip(), 0.0);
        Self {
            n,
            amps: vec![a; 1 << n],
        }
    }

    pub fn from_amps(amps: Vec<C64>) -> Result<Self> {
        if !amps.len().is_power_of_two() {
            return Err(precondition("amplitude count must be a power of two"));
        }
        Ok(Self {
            n: amps.len().trailing_zeros() as usize,
            amps,
        })
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn dim(&self) -> usize {
        self.amps.len()
    }

    pub fn amps(&self) -> &[C64] {
        &self.amps
    }

    pub fn amps_mut(&mut self) -> &mut [C64] {
        &mut self.amps
    }

    pub fn norm_sqr(&self) -> f64 {
        self.amps.iter().map(|a| a.norm_sqr()).sum()
    }

    pub fn inner(&self, other: &StateVec) -> C64 {
        self.amps.iter().zip(&other.amps).map(|(a, b)| a.conj() * b).sum()
    }

    pub fn probabilities(&self) -> Vec<f64> {
        self.amps.iter().map(|a| a.norm_sqr()).collect()
    }

    /// amp(x) ↦ (−1)^{f(x|qubits)} amp(x).
    pub fn apply_phase_fn(&mut self, qubits: &[usize], f: impl Fn(u64) -> bool) -> Result<()> {
        check_qubits(self.n, qubits)?;
        for (x, a) in self.amps.iter_mut().enumerate() {
            if f(gather_bits(x as u64, qubits)) {
                *a = -*a;
            }
        }
        Ok(())
    }

    /// Phase oracle (−1)^{phase_bit(seed, x|qubits)}.
    pub fn apply_phase_oracle(&mut self, qubits: &[usize], seed: &KWiseSeed) -> Result<()> {
        if qubits.len() != seed.spec().m() as usize {
            return Err(precondition(format!(
                "phase oracle on {} qubits needs a GF(2^{}) seed",
                qubits.len(),
                qubits.len()
            )));
        }
        self.apply_phase_fn(qubits, |v| seed.bit(v))
    }

    /// |c, t⟩ ↦ |c, t ⊕ h(c)⟩ on disjoint control and target qubits.
    pub fn apply_xor_fn(&mut self, control: &[usize], target: &[usize], h: impl Fn(u64) -> u64) -> Result<()> {
        check_qubits(self.n, &[control, target].concat())?;
        let tmask = if target.len() >= 64 { u64::MAX } else { (1u64 << target.len()) - 1 };
        let old = std::mem::replace(&mut self.amps, vec![ZERO; 1 << self.n]);
        for (x, a) in old.into_iter().enumerate() {
            let x = x as u64;
            let flip = scatter_bits(h(gather_bits(x, control)) & tmask, target);
            self.amps[(x ^ flip) as usize] = a;
        }
        Ok(())
    }

    /// Conditional shuffle target ⊕= h(control) with h given by a seed.
    pub fn apply_shuffle(&mut self, control: &[usize], target: &[usize], seed: &KWiseSeed) -> Result<()> {
        let w = seed.spec().m() as usize;
        if control.len() != w || target.len() != w {
            return Err(precondition(format!(
                "shuffle patches of widths {} and {} need a GF(2^{w}) seed of equal width",
                control.len(),
                target.len()
            )));
        }
        self.apply_xor_fn(control, target, |c| seed.eval(c))
    }

    /// |x⟩ ↦ |perm[x]⟩ on the full register.
    pub fn apply_basis_permutation(&mut self, perm: &[u64]) -> Result<()> {
        if perm.len() != self.amps.len() {
            return Err(precondition("permutation size differs from state dimension"));
        }
        let old = std::mem::replace(&mut self.amps, vec![ZERO; 1 << self.n]);
        for (x, a) in old.into_iter().enumerate() {
            self.amps[perm[x] as usize] = a;
        }
        Ok(())
    }

    /// Applies a 2^w × 2^w operator to `qubits`; local bit i is qubits[i].
    pub fn apply_op(&mut self, qubits: &[usize], op: &DenseOp) -> Result<()> {
        check_qubits(self.n, qubits)?;
        let w = qubits.len();
        if op.dim() != 1 << w {
            return Err(precondition(format!(
                "operator of dimension {} applied to {w} qubits",
                op.dim()
            )));
        }
        let offsets: Vec<usize> = (0..1u64 << w).map(|l| scatter_bits(l, qubits) as usize).collect();
        let qmask = qubits.iter().fold(0usize, |m, &q| m | 1 << q);
        let mat = op.matrix();
        let mut local = vec![ZERO; 1 << w];
        for base in 0..self.amps.len() {
            if base & qmask != 0 {
                continue;
            }
            for (l, &o) in offsets.iter().enumerate() {
                local[l] = self.amps[base | o];
            }
            for (r, &o) in offsets.iter().enumerate() {
                let mut acc = ZERO;
                for (c, v) in local.iter().enumerate() {
                    acc += mat[(r, c)] * v;
                }
                self.amps[base | o] = acc;
            }
        }
        Ok(())
    }

    /// Amplitudes of |ψ⟩^⊗k with copy j on bits [jn, (j+1)n).
    pub fn tensor_power(&self, k: usize) -> Vec<C64> {
        let mut out = vec![ONE];
        for _ in 0..k {
            let mut next = Vec::with_capacity(out.len() * self.amps.len());
            for a in &self.amps {
                for o in &out {
                    next.push(o * a);
                }
            }
            out = next;
        }
        out
    }

    /// Density matrix |ψ⟩⟨ψ|.
    pub fn projector(&self) -> DenseOp {
        let v = nalgebra::DVector::from_column_slice(&self.amps);
        DenseOp::from_matrix(&v * v.adjoint())
    }
}

/// A dense square complex matrix.
#[derive(Debug, Clone, PartialEq)]
pub struct DenseOp {
    mat: DMatrix<C64>,
}

impl DenseOp {
    pub fn identity(dim: usize) -> Self {
        Self {
            mat: DMatrix::identity(dim, dim),
        }
    }

    pub fn zeros(dim: usize) -> Self {
        Self {
            mat: DMatrix::zeros(dim, dim),
        }
    }

    pub fn from_matrix(mat: DMatrix<C64>) -> Self {
        assert!(mat.is_square(), "DenseOp must be square");
        Self { mat }
    }

    /// Diagonal operator.
    pub fn diagonal(d: &[C64]) -> Self {
        Self {
            mat: DMatrix::from_diagonal(&nalgebra::DVector::from_column_slice(d)),
        }
    }

    pub fn dim(&self) -> usize {
        self.mat.nrows()
    }

    pub fn matrix(&self) -> &DMatrix<C64> {
        &self.mat
    }

    pub fn matrix_mut(&mut self) -> &mut DMatrix<C64> {
        &mut self.mat
    }

    pub fn into_matrix(self) -> DMatrix<C64> {
        self.mat
    }

    pub fn mul(&self, other: &DenseOp) -> DenseOp {
        DenseOp {
            mat: &self.mat * &other.mat,
        }
    }

    pub fn adjoint(&self) -> DenseOp {
        DenseOp {
            mat: self.mat.adjoint(),
        }
    }

    /// self ⊗ other with `other` on the low index bits.
    pub fn kron(&self, other: &DenseOp) -> DenseOp {
        DenseOp {
            mat: self.mat.kronecker(&other.mat),
        }
    }

    /// U^⊗k.
    pub fn tensor_power(&self, k: usize) -> DenseOp {
        let mut out = DenseOp::identity(1);
        for _ in 0..k {
            out = out.kron(self);
        }
        out
    }

    pub fn scale(&self, s: f64) -> DenseOp {
        DenseOp {
            mat: self.mat.map(|v| v * s),
        }
    }

    pub fn sub(&self, other: &DenseOp) -> DenseOp {
        DenseOp {
            mat: &self.mat - &other.mat,
        }
    }

    pub fn add(&self, other: &DenseOp) -> DenseOp {
        DenseOp {
            mat: &self.mat + &other.mat,
        }
    }

    pub fn trace(&self) -> C64 {
        self.mat.trace()
    }

    pub fn apply(&self, v: &[C64]) -> Vec<C64> {
        let out = &self.mat * nalgebra::DVector::from_column_slice(v);
        out.as_slice().to_vec()
    }

    /// Largest entrywise modulus of self − other.
    pub fn max_abs_diff(&self, other: &DenseOp) -> f64 {
        self.mat
            .iter()
            .zip(other.mat.iter())
            .map(|(a, b)| (a - b).norm())
            .fold(0.0, f64::max)
    }

    pub fn frobenius_norm(&self) -> f64 {
        self.mat.iter().map(|v| v.norm_sqr()).sum::<f64>().sqrt()
    }

    pub fn is_unitary(&self, tol: f64) -> bool {
        let p = self.mat.adjoint() * &self.mat;
        DenseOp { mat: p }.max_abs_diff(&DenseOp::identity(self.dim())) <= tol
    }

    pub fn is_hermitian(&self, tol: f64) -> bool {
        DenseOp {
            mat: self.mat.adjoint(),
        }
        .max_abs_diff(self)
            <= tol
    }

    /// Eigenvalues of the Hermitian part (self + self†)/2.
    pub fn hermitian_eigenvalues(&self) -> Vec<f64> {
        let h = (&self.mat + self.mat.adjoint()).map(|v| v * 0.5);
        if h.iter().all(|v| v.im == 0.0) {
            let re = h.map(|v| v.re);
            re.symmetric_eigenvalues().as_slice().to_vec()
        } else {
            h.symmetric_eigenvalues().as_slice().to_vec()
        }
    }

    /// Trace norm of a Hermitian operator, Σ|λ_i|.
    pub fn trace_norm(&self) -> f64 {
        self.hermitian_eigenvalues().iter().map(|l| l.abs()).sum()
    }

    /// Operator norm of a Hermitian operator, max |λ_i|.
    pub fn operator_norm(&self) -> f64 {
        self.hermitian_eigenvalues().iter().fold(0.0, |m, l| m.max(l.abs()))
    }
}

/// ‖a − b‖₁ for Hermitian a and b.
pub fn trace_distance(a: &DenseOp, b: &DenseOp) -> f64 {
    a.sub(b).trace_norm()
}

/// A partition of n qubits into patches of ξ qubits.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct PatchLayout {
    n: usize,
    xi: usize,
    patches: Vec<Vec<usize>>,
}

impl PatchLayout {
    /// Contiguous patches [aξ, (a+1)ξ).
    pub fn contiguous(n: usize, xi: usize) -> Result<Self> {
        if xi == 0 || n % xi != 0 {
            return Err(precondition(format!("patch size {xi} must divide n = {n}")));
        }
        let patches = (0..n / xi).map(|a| (a * xi..(a + 1) * xi).collect()).collect();
        Ok(Self { n, xi, patches })
    }

    /// Arbitrary equal-size patches that partition [0, n).
    pub fn from_patches(n: usize, patches: Vec<Vec<usize>>) -> Result<Self> {
        let xi = patches.first().map(Vec::len).unwrap_or(0);
        if xi == 0 || patches.iter().any(|p| p.len() != xi) {
            return Err(precondition("patches must be nonempty and of equal size"));
        }
        let mut seen = vec![false; n];
        for &q in patches.iter().flatten() {
            if q >= n || std::mem::replace(&mut seen[q], true) {
                return Err(precondition(format!("qubit {q} out of range or in two patches")));
            }
        }
        if seen.iter().any(|s| !s) {
            return Err(precondition("patches do not cover every qubit"));
        }
        Ok(Self { n, xi, patches })
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn xi(&self) -> usize {
        self.xi
    }

    pub fn count(&self) -> usize {
        self.patches.len()
    }

    pub fn patch(&self, a: usize) -> &[usize] {
        &self.patches[a]
    }

    pub fn patches(&self) -> &[Vec<usize>] {
        &self.patches
    }

    /// The 2ξ qubits of patches a then b; patch a supplies the low bits.
    pub fn pair(&self, a: usize, b: usize) -> Vec<usize> {
        [self.patches[a].as_slice(), self.patches[b].as_slice()].concat()
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::gf2field::field_spec;
    use crate::randomness::StreamChooser;

    fn random_state(n: usize, seed: u64) -> StateVec {
        let mut s = StreamChooser::new(seed, "state");
        haar_state(n, &mut s).unwrap()
    }

    #[test]
    fn phase_oracle_basics() {
        let spec = field_spec(3).unwrap();
        let psi = random_state(4, 1);
        let mut a = psi.clone();
        a.apply_phase_oracle(&[0, 2, 3], &KWiseSeed::zero(spec, 2)).unwrap();
        assert_eq!(a, psi);
        let seed = KWiseSeed::new(spec, vec![3, 5]).unwrap();
        a.apply_phase_oracle(&[0, 2, 3], &seed).unwrap();
        assert!((a.norm_sqr() - 1.0).abs() < 1e-12);
        a.apply_phase_oracle(&[0, 2, 3], &seed).unwrap();
        assert!(a.amps().iter().zip(psi.amps()).all(|(x, y)| (x - y).norm() < 1e-15));
        assert!(a.apply_phase_oracle(&[0, 1], &seed).is_err());
    }

    #[test]
    fn shuffle_maps_basis_states() {
        let spec = field_spec(2).unwrap();
        let seed = KWiseSeed::new(spec, vec![1, 2, 3]).unwrap();
        for x in 0..16u64 {
            let mut s = StateVec::basis(4, x);
            s.apply_shuffle(&[0, 1], &[2, 3], &seed).unwrap();
            let want = x ^ (seed.eval(x & 3) << 2);
            assert_eq!(s.amps()[want as usize], ONE);
            s.apply_shuffle(&[0, 1], &[2, 3], &seed).unwrap();
            assert_eq!(s, StateVec::basis(4, x));
        }
        let mut s = StateVec::zero(4);
        assert!(s.apply_shuffle(&[0, 1], &[1, 2], &seed).is_err());
    }

    #[test]
    fn local_op_matches_kron() {
        let mut c = StreamChooser::new(4, "u");
        let u = sample_haar_unitary(4, &mut c).unwrap();
        let psi = random_state(3, 2);
        let mut a = psi.clone();
        a.apply_op(&[1, 2], &u).unwrap();
        let full = u.kron(&DenseOp::identity(2));
        let b = full.apply(psi.amps());
        assert!(a.amps().iter().zip(&b).all(|(x, y)| (x - y).norm() < 1e-12));
    }

    #[test]
    fn trace_norm_of_simple_operators() {
        let d = DenseOp::diagonal(&[C64::new(0.75, 0.0), C64::new(-0.25, 0.0)]);
        assert!((d.trace_norm() - 1.0).abs() < 1e-12);
        let mut m = DenseOp::zeros(2);
        m.matrix_mut()[(0, 1)] = C64::new(0.0, 1.0);
        m.matrix_mut()[(1, 0)] = C64::new(0.0, -1.0);
        assert!((m.trace_norm() - 2.0).abs() < 1e-12);
    }

    #[test]
    fn patch_layout_checks() {
        let l = PatchLayout::contiguous(6, 2).unwrap();
        assert_eq!(l.count(), 3);
        assert_eq!(l.pair(2, 0), vec![4, 5, 0, 1]);
        assert!(PatchLayout::contiguous(6, 4).is_err());
        assert!(PatchLayout::from_patches(4, vec![vec![0, 1], vec![1, 2]]).is_err());
        assert!(PatchLayout::from_patches(4, vec![vec![3, 1], vec![0, 2]]).is_ok());
    }
}
