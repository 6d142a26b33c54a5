//! Haar-random unitaries and states.

use nalgebra::DMatrix;

use super::{DenseOp, StateVec, C64};
use crate::error::{precondition, resource, Result};
use crate::randomness::Chooser;

pub const MAX_HAAR_DIM: usize = 256;

fn ginibre_entry(rng: &mut dyn Chooser) -> Result<C64> {
    let s = std::f64::consts::FRAC_1_SQRT_2;
    Ok(C64::new(rng.normal()? * s, rng.normal()? * s))
}

/// Haar unitary: QR of a complex Ginibre matrix with R's diagonal phases
/// moved into Q, which makes the law invariant under left multiplication.
pub fn sample_haar_unitary(dim: usize, rng: &mut dyn Chooser) -> Result<DenseOp> {
    if dim == 0 {
        return Err(precondition("dimension must be positive"));
    }
    if dim > MAX_HAAR_DIM {
        return Err(resource(format!("Haar sampling supports dim <= {MAX_HAAR_DIM}, got {dim}")));
    }
    let mut entries = Vec::with_capacity(dim * dim);
    for _ in 0..dim * dim {
        entries.push(ginibre_entry(rng)?);
    }
    let g = DMatrix::from_vec(dim, dim, entries);
    let qr = g.qr();
    let mut q = qr.q();
    let r = qr.r();
    for j in 0..dim {
        let d = r[(j, j)];
        let phase = if d.norm() > 0.0 { d / d.norm() } else { C64::new(1.0, 0.0) };
        for i in 0..dim {
            q[(i, j)] *= phase;
        }
    }
    Ok(DenseOp::from_matrix(q))
}

/// Haar state: a normalized complex Gaussian vector, equal in law to U|0⟩.
pub fn haar_state(n: usize, rng: &mut dyn Chooser) -> Result<StateVec> {
    let dim = 1usize << n;
    let mut amps = Vec::with_capacity(dim);
    for _ in 0..dim {
        amps.push(ginibre_entry(rng)?);
    }
    let norm = amps.iter().map(|a| a.norm_sqr()).sum::<f64>().sqrt();
    for a in amps.iter_mut() {
        *a /= norm;
    }
    StateVec::from_amps(amps)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::randomness::StreamChooser;

    #[test]
    fn unitary_and_first_moment() {
        let dim = 4;
        let trials = 4000;
        let mut acc = 0.0;
        for i in 0..trials {
            let mut s = StreamChooser::child(2, "haar", i);
            let u = sample_haar_unitary(dim, &mut s).unwrap();
            assert!(u.is_unitary(1e-12));
            acc += u.matrix()[(0, 0)].norm_sqr();
        }
        let mean = acc / trials as f64;
        // Var |U00|² = (d−1)/(d²(d+1)) for Haar.
        let sd = ((dim as f64 - 1.0) / (dim as f64).powi(2) / (dim as f64 + 1.0) / trials as f64).sqrt();
        assert!((mean - 0.25).abs() < 4.0 * sd, "mean {mean}");
    }

    #[test]
    fn dimension_one_is_a_phase() {
        let mut s = StreamChooser::new(5, "p");
        let u = sample_haar_unitary(1, &mut s).unwrap();
        assert!((u.matrix()[(0, 0)].norm() - 1.0).abs() < 1e-14);
        assert!(sample_haar_unitary(257, &mut s).is_err());
    }

    #[test]
    fn states_are_normalized() {
        let mut s = StreamChooser::new(6, "s");
        let psi = haar_state(5, &mut s).unwrap();
        assert!((psi.norm_sqr() - 1.0).abs() < 1e-12);
    }
}
