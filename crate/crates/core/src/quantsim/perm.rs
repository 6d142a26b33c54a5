//! Register permutations and distinct-subspace projectors on k-copy spaces.

use super::{DenseOp, PatchLayout, C64};
use crate::error::{precondition, resource, Result};

/// Largest n·k for which dense k-copy operators are built.
pub const MAX_COPY_QUBITS: usize = 12;

fn check_copy_size(n: usize, k: usize) -> Result<()> {
    if n * k > MAX_COPY_QUBITS {
        return Err(resource(format!(
            "k-copy space on n*k = {} qubits exceeds the dense limit {MAX_COPY_QUBITS}",
            n * k
        )));
    }
    Ok(())
}

/// All permutations of 0..k in lexicographic order.
pub fn all_permutations(k: usize) -> Vec<Vec<usize>> {
    let mut out = Vec::new();
    let mut cur: Vec<usize> = (0..k).collect();
    loop {
        out.push(cur.clone());
        let Some(i) = (1..k).rev().find(|&i| cur[i - 1] < cur[i]) else {
            return out;
        };
        let j = (i..k).rev().find(|&j| cur[j] > cur[i - 1]).unwrap();
        cur.swap(i - 1, j);
        cur[i..].reverse();
    }
}

pub fn cycle_count(pi: &[usize]) -> usize {
    let mut seen = vec![false; pi.len()];
    let mut cycles = 0;
    for s in 0..pi.len() {
        if !seen[s] {
            cycles += 1;
            let mut j = s;
            while !seen[j] {
                seen[j] = true;
                j = pi[j];
            }
        }
    }
    cycles
}

/// Basis index after moving register j to slot pi[j].
#[inline]
pub fn permute_index(idx: u64, pi: &[usize], n: usize) -> u64 {
    let mask = (1u64 << n) - 1;
    pi.iter()
        .enumerate()
        .fold(0, |acc, (j, &t)| acc | ((idx >> (j * n) & mask) << (t * n)))
}

fn check_perm(pi: &[usize]) -> Result<()> {
    let mut seen = vec![false; pi.len()];
    for &t in pi {
        if t >= pi.len() || std::mem::replace(&mut seen[t], true) {
            return Err(precondition(format!("{pi:?} is not a permutation")));
        }
    }
    Ok(())
}

/// The operator moving register j of k n-qubit registers to slot pi[j].
pub fn permutation_op(pi: &[usize], n: usize) -> Result<DenseOp> {
    check_perm(pi)?;
    check_copy_size(n, pi.len())?;
    let dim = 1usize << (n * pi.len());
    let mut op = DenseOp::zeros(dim);
    for x in 0..dim as u64 {
        op.matrix_mut()[(permute_index(x, pi, n) as usize, x as usize)] = C64::new(1.0, 0.0);
    }
    Ok(op)
}

/// A diagonal 0/1 projector on a k-copy space.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct DiagProjector {
    pub n: usize,
    pub k: usize,
    pub diag: Vec<bool>,
    /// Set when k exceeds the number of strings, leaving the projector empty.
    pub empty_warning: bool,
}

impl DiagProjector {
    pub fn rank(&self) -> u64 {
        self.diag.iter().filter(|&&b| b).count() as u64
    }

    pub fn to_op(&self) -> DenseOp {
        let d: Vec<C64> = self
            .diag
            .iter()
            .map(|&b| C64::new(if b { 1.0 } else { 0.0 }, 0.0))
            .collect();
        DenseOp::diagonal(&d)
    }
}

fn all_distinct(vals: &mut [u64]) -> bool {
    vals.sort_unstable();
    vals.windows(2).all(|w| w[0] != w[1])
}

/// Projector onto k-tuples of pairwise distinct n-bit strings.
pub fn distinct_projector(n: usize, k: usize) -> Result<DiagProjector> {
    check_copy_size(n, k)?;
    let dim = 1u64 << (n * k);
    let mask = (1u64 << n) - 1;
    let mut vals = vec![0u64; k];
    let diag = (0..dim)
        .map(|x| {
            for (j, v) in vals.iter_mut().enumerate() {
                *v = x >> (j * n) & mask;
            }
            all_distinct(&mut vals)
        })
        .collect();
    Ok(DiagProjector {
        n,
        k,
        diag,
        empty_warning: (k as u128) > (1u128 << n),
    })
}

/// Projector onto k-tuples whose strings are pairwise distinct on every patch.
pub fn local_distinct_projector(layout: &PatchLayout, k: usize) -> Result<DiagProjector> {
    let n = layout.n();
    check_copy_size(n, k)?;
    let dim = 1u64 << (n * k);
    let mask = (1u64 << n) - 1;
    let mut vals = vec![0u64; k];
    let diag = (0..dim)
        .map(|x| {
            layout.patches().iter().all(|patch| {
                for (j, v) in vals.iter_mut().enumerate() {
                    *v = super::gather_bits(x >> (j * n) & mask, patch);
                }
                all_distinct(&mut vals)
            })
        })
        .collect();
    Ok(DiagProjector {
        n,
        k,
        diag,
        empty_warning: (k as u128) > (1u128 << layout.xi()),
    })
}

/// ∏_{j<k} (2^n − j), the number of distinct k-tuples.
pub fn distinct_dimension(n: usize, k: usize) -> u128 {
    let d = 1u128 << n;
    (0..k as u128).map(|j| d.saturating_sub(j)).product()
}

/// The per-patch count raised to the number of patches.
pub fn local_distinct_dimension(n: usize, xi: usize, k: usize) -> u128 {
    distinct_dimension(xi, k).pow((n / xi) as u32)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn permutations_enumerate_and_count_cycles() {
        let ps = all_permutations(3);
        assert_eq!(ps.len(), 6);
        assert_eq!(ps[0], vec![0, 1, 2]);
        assert_eq!(cycle_count(&[0, 1, 2]), 3);
        assert_eq!(cycle_count(&[1, 0, 2]), 2);
        assert_eq!(cycle_count(&[1, 2, 0]), 1);
    }

    #[test]
    fn swap_and_identity() {
        let id = permutation_op(&[0, 1], 1).unwrap();
        assert_eq!(id, DenseOp::identity(4));
        let swap = permutation_op(&[1, 0], 1).unwrap();
        let m = swap.matrix();
        for (r, c) in [(0, 0), (1, 2), (2, 1), (3, 3)] {
            assert_eq!(m[(r, c)].re, 1.0);
        }
        assert!(permutation_op(&[0, 0], 1).is_err());
        assert!(permutation_op(&[0, 1, 2], 5).is_err());
    }

    #[test]
    fn projector_traces() {
        let p = distinct_projector(1, 2).unwrap();
        assert_eq!(p.diag, vec![false, true, true, false]);
        assert_eq!(distinct_projector(2, 2).unwrap().rank(), 12);
        assert_eq!(distinct_projector(3, 1).unwrap().rank(), 8);
        let empty = distinct_projector(1, 3).unwrap();
        assert!(empty.empty_warning);
        assert_eq!(empty.rank(), 0);
        let l = PatchLayout::contiguous(2, 1).unwrap();
        let loc = local_distinct_projector(&l, 2).unwrap();
        assert_eq!(loc.rank() as u128, local_distinct_dimension(2, 1, 2));
        assert_eq!(loc.rank(), 4);
    }
}
