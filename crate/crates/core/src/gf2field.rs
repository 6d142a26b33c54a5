//! Arithmetic in GF(2^m) for 1 ≤ m ≤ 64.
//!
//! Elements are m-bit words whose bit i is the coefficient of x^i. Products
//! are formed by carryless multiplication and reduced with a precomputed
//! Barrett constant, so a reduction costs two carryless products and no
//! division.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub const MAX_M: u32 = 64;

/// Exponents strictly between 0 and m of the lowest-weight irreducible
/// polynomial of each degree, lexicographically smallest among ties.
/// Entry m−1 describes x^m + Σ x^e + 1.
const MIDDLE_TERMS: [&[u32]; 64] = [
    &[],
    &[1],
    &[1],
    &[1],
    &[2],
    &[1],
    &[1],
    &[4, 3, 1],
    &[1],
    &[3],
    &[2],
    &[3],
    &[4, 3, 1],
    &[5],
    &[1],
    &[5, 3, 1],
    &[3],
    &[3],
    &[5, 2, 1],
    &[3],
    &[2],
    &[1],
    &[5],
    &[4, 3, 1],
    &[3],
    &[4, 3, 1],
    &[5, 2, 1],
    &[1],
    &[2],
    &[1],
    &[3],
    &[7, 3, 2],
    &[10],
    &[7],
    &[2],
    &[9],
    &[6, 4, 1],
    &[6, 5, 1],
    &[4],
    &[5, 4, 3],
    &[3],
    &[7],
    &[6, 4, 3],
    &[5],
    &[4, 3, 1],
    &[1],
    &[5],
    &[5, 3, 2],
    &[9],
    &[4, 3, 2],
    &[6, 3, 1],
    &[3],
    &[6, 2, 1],
    &[9],
    &[7],
    &[7, 4, 2],
    &[4],
    &[19],
    &[7, 4, 2],
    &[1],
    &[5, 2, 1],
    &[29],
    &[1],
    &[4, 3, 1],
];

/// A binary field GF(2^m) with its modulus and Barrett constant.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct FieldSpec {
    m: u32,
    p_bits: u128,
    mu_bits: u64,
}

/// An element of GF(2^m), tagged with its width.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct FieldElem {
    bits: u64,
    m: u32,
}

/// Degree of a nonzero polynomial; `None` for the zero polynomial.
pub fn degree(poly: u128) -> Option<u32> {
    if poly == 0 {
        None
    } else {
        Some(127 - poly.leading_zeros())
    }
}

/// Polynomial long division over GF(2). Returns (quotient, remainder).
pub fn poly_divmod(mut num: u128, den: u128) -> (u128, u128) {
    let dd = degree(den).expect("division by the zero polynomial");
    let mut quot = 0u128;
    while let Some(dn) = degree(num) {
        if dn < dd {
            break;
        }
        quot |= 1u128 << (dn - dd);
        num ^= den << (dn - dd);
    }
    (quot, num)
}

/// Carryless product of two 64-bit words.
#[inline]
pub fn clmul64(a: u64, b: u64) -> u128 {
    let a = a as u128;
    let mut acc = 0u128;
    let mut rest = b;
    while rest != 0 {
        let i = rest.trailing_zeros();
        acc ^= a << i;
        rest &= rest - 1;
    }
    acc
}

/// Carryless product of a 128-bit and a 64-bit word as (low, high) halves.
#[inline]
fn clmul_wide(a: u128, b: u64) -> (u128, u128) {
    let (mut lo, mut hi) = (0u128, 0u128);
    let mut rest = b;
    while rest != 0 {
        let i = rest.trailing_zeros();
        lo ^= a << i;
        if i > 0 {
            hi ^= a >> (128 - i);
        }
        rest &= rest - 1;
    }
    (lo, hi)
}

/// Returns the field of width m.
pub fn field_spec(m: u32) -> Result<FieldSpec> {
    if !(1..=MAX_M).contains(&m) {
        return Err(Error::Config(format!(
            "field width m={m} unsupported (need 1 <= m <= {MAX_M})"
        )));
    }
    let mut p_bits = (1u128 << m) | 1;
    for &e in MIDDLE_TERMS[(m - 1) as usize] {
        p_bits |= 1u128 << e;
    }
    let (mu, _) = poly_divmod(1u128 << (2 * m - 2), p_bits);
    Ok(FieldSpec {
        m,
        p_bits,
        mu_bits: mu as u64,
    })
}

impl FieldSpec {
    pub fn m(&self) -> u32 {
        self.m
    }

    /// The modulus as an (m+1)-bit word.
    pub fn p_bits(&self) -> u128 {
        self.p_bits
    }

    /// ⌊x^{2m−2} / p⌋, of degree at most m−2.
    pub fn mu_bits(&self) -> u64 {
        self.mu_bits
    }

    /// Number of field elements, 2^m, as u128 so that m = 64 fits.
    pub fn order(&self) -> u128 {
        1u128 << self.m
    }

    /// Bit mask of width m.
    pub fn mask(&self) -> u64 {
        if self.m == 64 {
            u64::MAX
        } else {
            (1u64 << self.m) - 1
        }
    }

    pub fn elem(&self, bits: u64) -> Result<FieldElem> {
        if bits & !self.mask() != 0 {
            return Err(Error::Precondition(format!(
                "value {bits:#x} does not fit in {} bits",
                self.m
            )));
        }
        Ok(FieldElem { bits, m: self.m })
    }

    pub fn zero(&self) -> FieldElem {
        FieldElem { bits: 0, m: self.m }
    }

    pub fn one(&self) -> FieldElem {
        FieldElem { bits: 1, m: self.m }
    }

    /// Barrett reduction of a polynomial of degree ≤ 2m−2 on raw words.
    #[inline]
    pub fn reduce(&self, c: u128) -> u64 {
        debug_assert!(c >> (2 * self.m - 1) == 0);
        let s = 2 * self.m - 2;
        let (lo, hi) = clmul_wide(c, self.mu_bits);
        let q = if s == 0 {
            lo
        } else {
            (lo >> s) | (hi << (128 - s))
        } as u64;
        let (qp, _) = clmul_wide(self.p_bits, q);
        let r = c ^ qp;
        debug_assert!(r >> self.m == 0);
        r as u64
    }

    /// Field product on raw words. Inputs must already be reduced.
    #[inline]
    pub fn mul(&self, a: u64, b: u64) -> u64 {
        self.reduce(clmul64(a, b))
    }

    /// Square-and-multiply exponentiation on raw words.
    pub fn pow(&self, a: u64, mut e: u128) -> u64 {
        let mut base = a;
        let mut acc = 1u64;
        while e != 0 {
            if e & 1 == 1 {
                acc = self.mul(acc, base);
            }
            base = self.mul(base, base);
            e >>= 1;
        }
        acc
    }

    /// Multiplicative inverse on raw words; maps 0 to 0.
    pub fn inv(&self, a: u64) -> u64 {
        self.pow(a, self.order() - 2)
    }
}

impl FieldElem {
    pub fn bits(&self) -> u64 {
        self.bits
    }

    pub fn m(&self) -> u32 {
        self.m
    }

    pub fn is_zero(&self) -> bool {
        self.bits == 0
    }
}

fn same_width(a: u32, b: u32) -> Result<()> {
    if a == b {
        Ok(())
    } else {
        Err(Error::FieldMismatch(a, b))
    }
}

pub fn gf_add(a: FieldElem, b: FieldElem) -> Result<FieldElem> {
    same_width(a.m, b.m)?;
    Ok(FieldElem {
        bits: a.bits ^ b.bits,
        m: a.m,
    })
}

/// Unreduced product a(x)·b(x); the result has degree ≤ 2m−2.
pub fn clmul(a: FieldElem, b: FieldElem) -> Result<u128> {
    same_width(a.m, b.m)?;
    Ok(clmul64(a.bits, b.bits))
}

/// cprime mod p via q = ⌊cprime·μ / x^{2m−2}⌋ and r = cprime + q·p.
pub fn barrett_reduce(cprime: u128, spec: &FieldSpec) -> Result<FieldElem> {
    if cprime >> (2 * spec.m - 1) != 0 {
        return Err(Error::Precondition(format!(
            "polynomial of degree {} exceeds 2m-2 = {}",
            degree(cprime).unwrap_or(0),
            2 * spec.m - 2
        )));
    }
    Ok(FieldElem {
        bits: spec.reduce(cprime),
        m: spec.m,
    })
}

pub fn gf_mul(a: FieldElem, b: FieldElem, spec: &FieldSpec) -> Result<FieldElem> {
    same_width(a.m, spec.m)?;
    same_width(b.m, spec.m)?;
    barrett_reduce(clmul(a, b)?, spec)
}

pub fn gf_pow(a: FieldElem, e: u128, spec: &FieldSpec) -> Result<FieldElem> {
    same_width(a.m, spec.m)?;
    Ok(FieldElem {
        bits: spec.pow(a.bits, e),
        m: spec.m,
    })
}

/// Inverse of a nonzero element.
pub fn gf_inv(a: FieldElem, spec: &FieldSpec) -> Result<FieldElem> {
    same_width(a.m, spec.m)?;
    if a.bits == 0 {
        return Err(Error::Precondition("zero has no inverse".into()));
    }
    Ok(FieldElem {
        bits: spec.inv(a.bits),
        m: spec.m,
    })
}

/// Outcome of checking the Barrett product against long division.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct SelfTestRow {
    pub m: u32,
    pub pairs: u64,
    pub exhaustive: bool,
    pub mismatches: u64,
}

/// Largest width whose pairs are checked exhaustively by [`selftest`].
pub const SELFTEST_EXHAUSTIVE_M: u32 = 4;

/// Compares [`gf_mul`] with the remainder of clmul(a, b) by p for every pair
/// at each width m ≤ 4, and for `random_pairs` pairs drawn from stream
/// "field/m" at each listed wider width.
pub fn selftest(widths: &[u32], random_pairs: u64, master_seed: u64) -> Result<Vec<SelfTestRow>> {
    use crate::randomness::{Chooser, StreamChooser};
    let mut rows = Vec::new();
    for &m in widths {
        let spec = field_spec(m)?;
        let check = |a: u64, b: u64| -> Result<bool> {
            let fast = gf_mul(spec.elem(a)?, spec.elem(b)?, &spec)?.bits();
            Ok(poly_divmod(clmul64(a, b), spec.p_bits()).1 == fast as u128)
        };
        let mut row = SelfTestRow {
            m,
            pairs: 0,
            exhaustive: m <= SELFTEST_EXHAUSTIVE_M,
            mismatches: 0,
        };
        if row.exhaustive {
            for a in 0..1u64 << m {
                for b in 0..1u64 << m {
                    row.pairs += 1;
                    row.mismatches += !check(a, b)? as u64;
                }
            }
        } else {
            let mut rng = StreamChooser::child(master_seed, "field", m as u64);
            for _ in 0..random_pairs {
                let a = rng.bits(m);
                let b = rng.bits(m);
                row.pairs += 1;
                row.mismatches += !check(a, b)? as u64;
            }
        }
        rows.push(row);
    }
    Ok(rows)
}
