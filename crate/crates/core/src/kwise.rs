//! k-wise independent functions f(x) = Σ_{i<k} a_i x^i over GF(2^m).

use serde::{Deserialize, Serialize};

use crate::error::{precondition, Error, Result};
use crate::gf2field::{FieldElem, FieldSpec};
use crate::randomness::Chooser;

/// Coefficients a_0..a_{k−1} of a degree-(k−1) polynomial over GF(2^m).
#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct KWiseSeed {
    spec: FieldSpec,
    coeffs: Vec<u64>,
}

impl KWiseSeed {
    pub fn new(spec: FieldSpec, coeffs: Vec<u64>) -> Result<Self> {
        if coeffs.is_empty() {
            return Err(precondition("a k-wise seed needs k >= 1 coefficients"));
        }
        for &c in &coeffs {
            spec.elem(c)?;
        }
        Ok(Self { spec, coeffs })
    }

    pub fn zero(spec: FieldSpec, k: usize) -> Self {
        assert!(k >= 1);
        Self {
            spec,
            coeffs: vec![0; k],
        }
    }

    pub fn spec(&self) -> &FieldSpec {
        &self.spec
    }

    pub fn k(&self) -> usize {
        self.coeffs.len()
    }

    pub fn coeffs(&self) -> &[u64] {
        &self.coeffs
    }

    /// Seed length in bits, k·m.
    pub fn bit_len(&self) -> u64 {
        self.coeffs.len() as u64 * self.spec.m() as u64
    }

    /// Tree-ordered evaluation on a raw word.
    pub fn eval(&self, x: u64) -> u64 {
        eval_tree_bits(&self.spec, &self.coeffs, x)
    }

    /// Low bit of [`Self::eval`].
    pub fn bit(&self, x: u64) -> bool {
        self.eval(x) & 1 == 1
    }
}

/// Draws k coefficients, consuming exactly k·m bits from a stream.
pub fn sample_seed(spec: &FieldSpec, k: usize, rng: &mut dyn Chooser) -> Result<KWiseSeed> {
    if k == 0 {
        return Err(precondition("k must be at least 1"));
    }
    let coeffs = (0..k).map(|_| rng.bits(spec.m())).collect();
    Ok(KWiseSeed { spec: *spec, coeffs })
}

fn check_point(seed: &KWiseSeed, x: FieldElem) -> Result<()> {
    if x.m() != seed.spec.m() {
        return Err(Error::FieldMismatch(x.m(), seed.spec.m()));
    }
    Ok(())
}

/// Pairwise tree reduction with a binary operation; input must be nonempty.
fn tree_fold(mut items: Vec<u64>, op: impl Fn(u64, u64) -> u64) -> u64 {
    while items.len() > 1 {
        items = items
            .chunks(2)
            .map(|c| if c.len() == 2 { op(c[0], c[1]) } else { c[0] })
            .collect();
    }
    items[0]
}

/// Powers x^0..x^{k−1}: a squaring chain for x^{2^i}, then each remaining
/// power as a tree product over its binary decomposition.
fn powers_tree(spec: &FieldSpec, x: u64, k: usize) -> Vec<u64> {
    let mut squares = vec![x];
    while (1usize << squares.len()) < k {
        let last = *squares.last().unwrap();
        squares.push(spec.mul(last, last));
    }
    (0..k)
        .map(|j| {
            if j == 0 {
                return 1;
            }
            let factors: Vec<u64> = (0..squares.len())
                .filter(|&i| j >> i & 1 == 1)
                .map(|i| squares[i])
                .collect();
            tree_fold(factors, |a, b| spec.mul(a, b))
        })
        .collect()
}

pub(crate) fn eval_tree_bits(spec: &FieldSpec, coeffs: &[u64], x: u64) -> u64 {
    let pows = powers_tree(spec, x, coeffs.len());
    let terms: Vec<u64> = coeffs
        .iter()
        .zip(&pows)
        .map(|(&a, &p)| spec.mul(a, p))
        .collect();
    tree_fold(terms, |a, b| a ^ b)
}

/// Σ a_i x^i with powers by squaring, parallel coefficient products and a
/// binary-tree sum.
pub fn eval_tree(seed: &KWiseSeed, x: FieldElem) -> Result<FieldElem> {
    check_point(seed, x)?;
    seed.spec.elem(eval_tree_bits(&seed.spec, &seed.coeffs, x.bits()))
}

/// Σ a_i x^i by the sequential loop: result += a_i·power; power ·= x.
pub fn eval_horner(seed: &KWiseSeed, x: FieldElem) -> Result<FieldElem> {
    check_point(seed, x)?;
    let spec = &seed.spec;
    let mut result = seed.coeffs[0];
    let mut power = x.bits();
    for &a in &seed.coeffs[1..] {
        result ^= spec.mul(a, power);
        power = spec.mul(power, x.bits());
    }
    spec.elem(result)
}

/// Least-significant bit of the field value.
pub fn phase_bit(seed: &KWiseSeed, x: FieldElem) -> Result<bool> {
    Ok(eval_tree(seed, x)?.bits() & 1 == 1)
}

/// A nonnegative fraction in lowest terms.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct Fraction {
    pub num: u64,
    pub den: u64,
}

impl Fraction {
    pub fn new(num: u64, den: u64) -> Self {
        assert!(den != 0);
        let g = gcd(num, den);
        Self {
            num: num / g,
            den: den / g,
        }
    }

    pub fn to_f64(self) -> f64 {
        self.num as f64 / self.den as f64
    }
}

fn gcd(mut a: u64, mut b: u64) -> u64 {
    while b != 0 {
        (a, b) = (b, a % b);
    }
    a
}

/// Largest k·m for which [`verify_kwise`] enumerates seeds.
pub const VERIFY_MAX_SEED_BITS: u32 = 24;

/// Exact fraction of all seeds whose function maps each point to its target.
pub fn verify_kwise(spec: &FieldSpec, k: usize, points: &[u64], targets: &[u64]) -> Result<Fraction> {
    if k == 0 {
        return Err(precondition("k must be at least 1"));
    }
    if points.len() != targets.len() {
        return Err(precondition("points and targets differ in length"));
    }
    if points.len() > k {
        return Err(precondition(format!(
            "{} points exceed the independence parameter k={k}",
            points.len()
        )));
    }
    for (i, &p) in points.iter().enumerate() {
        spec.elem(p)?;
        spec.elem(targets[i])?;
        if points[..i].contains(&p) {
            return Err(precondition(format!("duplicate point {p:#x}")));
        }
    }
    let m = spec.m();
    let seed_bits = k as u32 * m;
    if seed_bits > VERIFY_MAX_SEED_BITS {
        return Err(crate::error::resource(format!(
            "k*m = {seed_bits} exceeds the enumeration limit {VERIFY_MAX_SEED_BITS}"
        )));
    }
    let mask = spec.mask();
    let total = 1u64 << seed_bits;
    let mut coeffs = vec![0u64; k];
    let mut hits = 0u64;
    for s in 0..total {
        for (i, c) in coeffs.iter_mut().enumerate() {
            *c = (s >> (i as u32 * m)) & mask;
        }
        if points
            .iter()
            .zip(targets)
            .all(|(&x, &y)| eval_tree_bits(spec, &coeffs, x) == y)
        {
            hits += 1;
        }
    }
    Ok(Fraction::new(hits, total))
}

/// Result of checking every point set and target tuple.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct KWiseSweep {
    pub m: u32,
    pub k: usize,
    pub cases: u64,
    pub mismatches: u64,
    /// First failing (points, targets, observed), if any.
    pub first_failure: Option<(Vec<u64>, Vec<u64>, Fraction)>,
}

/// Runs [`verify_kwise`] on every set of t ≤ k distinct points, in
/// increasing order, with every target tuple, and compares each result
/// with exactly 2^{−mt}.
pub fn verify_kwise_all(spec: &FieldSpec, k: usize) -> Result<KWiseSweep> {
    let m = spec.m();
    if k as u32 * m > VERIFY_MAX_SEED_BITS {
        return Err(crate::error::resource(format!(
            "k*m = {} exceeds the enumeration limit {VERIFY_MAX_SEED_BITS}",
            k as u32 * m
        )));
    }
    let size = 1u64 << m;
    let mut sweep = KWiseSweep {
        m,
        k,
        cases: 0,
        mismatches: 0,
        first_failure: None,
    };
    for t in 1..=k.min(size as usize) {
        let expected = Fraction::new(1, 1u64 << (m * t as u32));
        let mut points: Vec<u64> = (0..t as u64).collect();
        loop {
            for tv in 0..1u64 << (m * t as u32) {
                let targets: Vec<u64> = (0..t).map(|i| (tv >> (i as u32 * m)) & spec.mask()).collect();
                let got = verify_kwise(spec, k, &points, &targets)?;
                sweep.cases += 1;
                if got != expected {
                    sweep.mismatches += 1;
                    if sweep.first_failure.is_none() {
                        sweep.first_failure = Some((points.clone(), targets, got));
                    }
                }
            }
            // Next combination in lexicographic order.
            let mut i = t;
            while i > 0 && points[i - 1] == size - (t - i + 1) as u64 {
                i -= 1;
            }
            if i == 0 {
                break;
            }
            points[i - 1] += 1;
            for j in i..t {
                points[j] = points[j - 1] + 1;
            }
        }
    }
    Ok(sweep)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::gf2field::field_spec;
    use crate::randomness::{StreamChooser, ZeroChooser};

    #[test]
    fn seed_consumes_k_times_m_bits() {
        let spec = field_spec(11).unwrap();
        let mut s = StreamChooser::new(9, "seed");
        let seed = sample_seed(&spec, 2, &mut s).unwrap();
        assert_eq!(s.bits_consumed(), 22);
        assert_eq!(seed.bit_len(), 22);
        let mut t = StreamChooser::new(9, "seed");
        assert_eq!(sample_seed(&spec, 2, &mut t).unwrap(), seed);
    }

    #[test]
    fn zero_stream_gives_zero_constant() {
        let spec = field_spec(5).unwrap();
        let seed = sample_seed(&spec, 1, &mut ZeroChooser).unwrap();
        for x in 0..32 {
            assert_eq!(seed.eval(x), 0);
        }
    }

    #[test]
    fn worked_evaluations() {
        let f = field_spec(3).unwrap();
        let s = KWiseSeed::new(f, vec![0b001, 0b010]).unwrap();
        assert_eq!(eval_tree(&s, f.elem(0b011).unwrap()).unwrap().bits(), 0b111);
        let s = KWiseSeed::new(f, vec![0b001, 0b010, 0b100]).unwrap();
        // 1 + x·x + x²·x² = 1 + x² + (x² + x) = 1 + x.
        assert_eq!(eval_horner(&s, f.elem(0b010).unwrap()).unwrap().bits(), 0b011);
        assert_eq!(eval_tree(&s, f.elem(0b010).unwrap()).unwrap().bits(), 0b011);
        let c = KWiseSeed::new(f, vec![0b001]).unwrap();
        for x in 0..8 {
            assert!(phase_bit(&c, f.elem(x).unwrap()).unwrap());
        }
    }

    #[test]
    fn verify_small_cases() {
        let f2 = field_spec(2).unwrap();
        assert_eq!(verify_kwise(&f2, 2, &[0, 1], &[3, 2]).unwrap(), Fraction::new(1, 16));
        assert_eq!(verify_kwise(&f2, 1, &[2], &[1]).unwrap(), Fraction::new(1, 4));
        assert!(verify_kwise(&f2, 2, &[1, 1], &[0, 0]).is_err());
        assert!(verify_kwise(&f2, 1, &[0, 1], &[0, 0]).is_err());
    }

    #[test]
    fn mismatched_point_width_rejected() {
        let f3 = field_spec(3).unwrap();
        let f4 = field_spec(4).unwrap();
        let s = KWiseSeed::zero(f3, 2);
        assert!(eval_tree(&s, f4.one()).is_err());
        assert!(KWiseSeed::new(f3, vec![]).is_err());
        assert!(KWiseSeed::new(f3, vec![8]).is_err());
    }
}
