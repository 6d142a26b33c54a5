//! Uniform Clifford sampling through a random symplectic basis.
//!
//! Pauli operators on w qubits are packed as x | z << w. A Clifford is fixed,
//! up to global phase, by the signed images of X_q and Z_q. The images are
//! chosen pair by pair: v uniform among nonzero vectors of the remaining
//! symplectic subspace, w uniform among vectors of that subspace with
//! ⟨v, w⟩ = 1, then the subspace shrinks to the symplectic complement of
//! span(v, w). Every draw has a fixed radix, so the sampler can be
//! enumerated exactly.

use super::{DenseOp, C64, ONE, ZERO};
use crate::error::{resource, Result};
use crate::randomness::Chooser;

pub const MAX_CLIFFORD_QUBITS: usize = 5;

#[inline]
fn form(a: u64, b: u64, w: usize) -> u32 {
    let mask = (1u64 << w) - 1;
    let (ax, az) = (a & mask, a >> w);
    let (bx, bz) = (b & mask, b >> w);
    ((ax & bz).count_ones() + (az & bx).count_ones()) & 1
}

fn combine(basis: &[u64], index: u64) -> u64 {
    basis
        .iter()
        .enumerate()
        .filter(|(i, _)| index >> i & 1 == 1)
        .fold(0, |acc, (_, &b)| acc ^ b)
}

/// A basis of span(vectors) by elimination on leading bits.
fn independent(vectors: &[u64]) -> Vec<u64> {
    let mut rows: Vec<u64> = Vec::new();
    for &v in vectors {
        let mut r = v;
        for &p in &rows {
            let lead = 63 - p.leading_zeros();
            if r >> lead & 1 == 1 {
                r ^= p;
            }
        }
        if r != 0 {
            rows.push(r);
            rows.sort_unstable_by(|a, b| b.cmp(a));
        }
    }
    rows
}

/// Signed images of the Pauli generators under a Clifford.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct CliffordTableau {
    pub w: usize,
    pub x_images: Vec<u64>,
    pub z_images: Vec<u64>,
    pub x_signs: Vec<bool>,
    pub z_signs: Vec<bool>,
}

pub fn sample_tableau(w: usize, rng: &mut dyn Chooser) -> Result<CliffordTableau> {
    if w > MAX_CLIFFORD_QUBITS {
        return Err(resource(format!(
            "Clifford sampling supports w <= {MAX_CLIFFORD_QUBITS}, got {w}"
        )));
    }
    let mut basis: Vec<u64> = (0..2 * w).map(|i| 1u64 << i).collect();
    let (mut xs, mut zs) = (Vec::with_capacity(w), Vec::with_capacity(w));
    for j in (1..=w).rev() {
        debug_assert_eq!(basis.len(), 2 * j);
        let v = combine(&basis, rng.below((1u64 << (2 * j)) - 1) + 1);
        let pivot = basis.iter().position(|&b| form(v, b, w) == 1).expect("form is nondegenerate");
        let kernel: Vec<u64> = basis
            .iter()
            .enumerate()
            .filter(|&(i, _)| i != pivot)
            .map(|(_, &b)| if form(v, b, w) == 1 { b ^ basis[pivot] } else { b })
            .collect();
        let u = basis[pivot] ^ combine(&kernel, rng.below(1u64 << (2 * j - 1)));
        let projected: Vec<u64> = basis
            .iter()
            .map(|&b| {
                let mut r = b;
                if form(b, u, w) == 1 {
                    r ^= v;
                }
                if form(b, v, w) == 1 {
                    r ^= u;
                }
                r
            })
            .collect();
        basis = independent(&projected);
        xs.push(v);
        zs.push(u);
    }
    let x_signs = (0..w).map(|_| rng.below(2) == 1).collect();
    let z_signs = (0..w).map(|_| rng.below(2) == 1).collect();
    Ok(CliffordTableau {
        w,
        x_images: xs,
        z_images: zs,
        x_signs,
        z_signs,
    })
}

/// i^{|x∧z|} X^x Z^z applied to a vector, times −1 when `negate`.
fn apply_pauli(w: usize, packed: u64, negate: bool, v: &[C64]) -> Vec<C64> {
    let mask = (1u64 << w) - 1;
    let (x, z) = (packed & mask, packed >> w);
    let base = match (x & z).count_ones() % 4 {
        0 => ONE,
        1 => C64::new(0.0, 1.0),
        2 => -ONE,
        _ => C64::new(0.0, -1.0),
    };
    let base = if negate { -base } else { base };
    let mut out = vec![ZERO; v.len()];
    for (b, a) in v.iter().enumerate() {
        let sign = if (z & b as u64).count_ones() % 2 == 1 { -base } else { base };
        out[b ^ x as usize] = sign * a;
    }
    out
}

/// The Hermitian Pauli i^{|x∧z|} X^x Z^z as a dense matrix.
pub fn pauli_op(w: usize, x: u64, z: u64) -> DenseOp {
    let dim = 1usize << w;
    let mut op = DenseOp::zeros(dim);
    for b in 0..dim {
        let mut e = vec![ZERO; dim];
        e[b] = ONE;
        let col = apply_pauli(w, x | z << w, false, &e);
        for (r, v) in col.into_iter().enumerate() {
            op.matrix_mut()[(r, b)] = v;
        }
    }
    op
}

impl CliffordTableau {
    /// Dense unitary U with U X_q U† = ±P(x_q) and U Z_q U† = ±P(z_q).
    ///
    /// U|0⟩ is the joint +1 eigenvector of the Z images, obtained by
    /// projecting the first basis vector with nonzero overlap; column x is
    /// then the product of the X images selected by x applied to U|0⟩.
    pub fn to_dense(&self) -> DenseOp {
        let w = self.w;
        let dim = 1usize << w;
        let mut psi0 = Vec::new();
        for b in 0..dim {
            let mut v = vec![ZERO; dim];
            v[b] = ONE;
            for q in 0..w {
                let pv = apply_pauli(w, self.z_images[q], self.z_signs[q], &v);
                for (a, p) in v.iter_mut().zip(pv) {
                    *a = (*a + p) * 0.5;
                }
            }
            let norm: f64 = v.iter().map(|a| a.norm_sqr()).sum::<f64>().sqrt();
            if norm > 1e-6 {
                psi0 = v.into_iter().map(|a| a / norm).collect();
                break;
            }
        }
        let mut cols: Vec<Vec<C64>> = vec![psi0];
        for x in 1..dim {
            let q = x.trailing_zeros() as usize;
            let prev = &cols[x & (x - 1)];
            cols.push(apply_pauli(w, self.x_images[q], self.x_signs[q], prev));
        }
        let mut op = DenseOp::zeros(dim);
        for (c, col) in cols.into_iter().enumerate() {
            for (r, v) in col.into_iter().enumerate() {
                op.matrix_mut()[(r, c)] = v;
            }
        }
        op
    }
}

/// Uniformly random w-qubit Clifford, up to global phase, as a dense matrix.
pub fn sample_clifford(w: usize, rng: &mut dyn Chooser) -> Result<DenseOp> {
    Ok(sample_tableau(w, rng)?.to_dense())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::randomness::{exhaustive_sum, StreamChooser};

    /// ±1 when `op` equals ± a Hermitian Pauli, else None.
    fn pauli_sign(w: usize, op: &DenseOp) -> Option<(u64, u64, f64)> {
        for x in 0..1u64 << w {
            for z in 0..1u64 << w {
                let p = pauli_op(w, x, z);
                for s in [1.0, -1.0] {
                    if op.max_abs_diff(&p.scale(s)) < 1e-10 {
                        return Some((x, z, s));
                    }
                }
            }
        }
        None
    }

    #[test]
    fn samples_are_unitary_and_normalize_paulis() {
        for w in 1..=3 {
            for i in 0..20 {
                let mut s = StreamChooser::child(11, "cliff", i);
                let u = sample_clifford(w, &mut s).unwrap();
                assert!(u.is_unitary(1e-12));
                for x in 0..1u64 << w {
                    for z in 0..1u64 << w {
                        let c = u.mul(&pauli_op(w, x, z)).mul(&u.adjoint());
                        assert!(pauli_sign(w, &c).is_some(), "w={w} x={x} z={z}");
                    }
                }
            }
        }
    }

    #[test]
    fn tableau_images_match_dense_conjugation() {
        let mut s = StreamChooser::new(3, "tab");
        let t = sample_tableau(2, &mut s).unwrap();
        let u = t.to_dense();
        for q in 0..2 {
            let cx = u.mul(&pauli_op(2, 1 << q, 0)).mul(&u.adjoint());
            let (x, z, sign) = pauli_sign(2, &cx).unwrap();
            assert_eq!(x | z << 2, t.x_images[q]);
            assert_eq!(sign < 0.0, t.x_signs[q]);
        }
    }

    struct Collect(Vec<DenseOp>);

    impl crate::randomness::Accumulator for Collect {
        fn merge(&mut self, other: Self) {
            self.0.extend(other.0);
        }
    }

    #[test]
    fn single_qubit_group_has_24_elements() {
        let (mats, leaves) = exhaustive_sum(
            100,
            || Collect(Vec::new()),
            |c, acc| {
                acc.0.push(sample_clifford(1, c)?);
                Ok(())
            },
        )
        .unwrap();
        assert_eq!(leaves, 24);
        let mats = mats.0;
        for i in 0..mats.len() {
            for j in 0..i {
                let ov = (mats[i].adjoint().mul(&mats[j]).trace() / 2.0).norm();
                assert!(ov < 1.0 - 1e-9, "duplicate Clifford {i} {j}");
            }
        }
    }

    #[test]
    fn width_limit() {
        let mut s = StreamChooser::new(0, "x");
        assert!(matches!(sample_clifford(6, &mut s), Err(e) if e.is_resource_limit()));
    }
}
