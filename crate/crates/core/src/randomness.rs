//! Randomness plumbing shared by every sampler.
//!
//! Samplers never own a generator. They draw through a [`Chooser`], which is
//! either a seeded stream (Monte-Carlo) or a replay of one leaf of the full
//! randomness tree (exact enumeration). A sampler that only calls
//! [`Chooser::below`] with a fixed sequence of radices is exhaustible: the
//! average over all leaves, each weighted 1/∏radix, is the exact ensemble
//! average.

use rand::{Rng, RngCore, SeedableRng};
use rand_chacha::ChaCha20Rng;
use rand_distr::StandardNormal;
use rayon::prelude::*;
use sha2::{Digest, Sha256};

use crate::error::{precondition, resource, Result};

/// Source of random choices for samplers.
pub trait Chooser {
    /// Uniform integer in [0, n). Requires n ≥ 1.
    fn below(&mut self, n: u64) -> u64;

    /// Uniform in [0, 1). Not available under exact enumeration.
    fn uniform01(&mut self) -> Result<f64>;

    /// Standard normal. Not available under exact enumeration.
    fn normal(&mut self) -> Result<f64>;

    /// Uniform b-bit word, b ≤ 64.
    fn bits(&mut self, b: u32) -> u64 {
        match b {
            0 => 0,
            64 => (self.below(1 << 32) << 32) | self.below(1 << 32),
            _ => self.below(1u64 << b),
        }
    }
}

/// Deterministic stream keyed by SHA-256(master_seed, label).
///
/// Power-of-two radices consume exactly log2(n) bits of the stream, so the
/// consumed-bit counter doubles as a randomness budget meter.
pub struct StreamChooser {
    rng: ChaCha20Rng,
    buf: u64,
    avail: u32,
    consumed: u64,
}

impl StreamChooser {
    pub fn new(master_seed: u64, label: &str) -> Self {
        let mut h = Sha256::new();
        h.update(b"kdesign/stream/v1");
        h.update(master_seed.to_le_bytes());
        h.update((label.len() as u64).to_le_bytes());
        h.update(label.as_bytes());
        let digest = h.finalize();
        let mut seed = [0u8; 32];
        seed.copy_from_slice(digest.as_slice());
        Self {
            rng: ChaCha20Rng::from_seed(seed),
            buf: 0,
            avail: 0,
            consumed: 0,
        }
    }

    /// The stream `label/index`, the naming scheme used for per-draw streams.
    pub fn child(master_seed: u64, label: &str, index: u64) -> Self {
        Self::new(master_seed, &format!("{label}/{index}"))
    }

    /// Bits consumed through `below` and `bits` so far.
    pub fn bits_consumed(&self) -> u64 {
        self.consumed
    }

    fn take(&mut self, b: u32) -> u64 {
        debug_assert!(b <= 64);
        self.consumed += b as u64;
        let mut out = 0u64;
        let mut got = 0u32;
        while got < b {
            if self.avail == 0 {
                self.buf = self.rng.next_u64();
                self.avail = 64;
            }
            let t = (b - got).min(self.avail);
            let chunk = if t == 64 { self.buf } else { self.buf & ((1u64 << t) - 1) };
            out |= chunk << got;
            self.buf = if t == 64 { 0 } else { self.buf >> t };
            self.avail -= t;
            got += t;
        }
        out
    }

    /// Direct access for continuous draws.
    pub fn rng(&mut self) -> &mut ChaCha20Rng {
        &mut self.rng
    }
}

impl Chooser for StreamChooser {
    fn below(&mut self, n: u64) -> u64 {
        assert!(n >= 1, "below(0)");
        if n.is_power_of_two() {
            return self.take(n.trailing_zeros());
        }
        let b = 64 - (n - 1).leading_zeros();
        loop {
            let v = self.take(b);
            if v < n {
                return v;
            }
        }
    }

    fn uniform01(&mut self) -> Result<f64> {
        Ok(self.rng.random::<f64>())
    }

    fn normal(&mut self) -> Result<f64> {
        Ok(self.rng.sample(StandardNormal))
    }

    fn bits(&mut self, b: u32) -> u64 {
        self.take(b)
    }
}

/// Always chooses 0; continuous draws return 0.0.
#[derive(Debug, Default, Clone, Copy)]
pub struct ZeroChooser;

impl Chooser for ZeroChooser {
    fn below(&mut self, _n: u64) -> u64 {
        0
    }
    fn uniform01(&mut self) -> Result<f64> {
        Ok(0.0)
    }
    fn normal(&mut self) -> Result<f64> {
        Ok(0.0)
    }
}

struct ProbeChooser {
    radices: Vec<u64>,
    continuous: bool,
}

impl Chooser for ProbeChooser {
    fn below(&mut self, n: u64) -> u64 {
        self.radices.push(n);
        0
    }
    fn uniform01(&mut self) -> Result<f64> {
        self.continuous = true;
        Err(precondition("sampler uses continuous randomness; exact enumeration impossible"))
    }
    fn normal(&mut self) -> Result<f64> {
        self.uniform01()
    }
}

struct ReplayChooser<'a> {
    radices: &'a [u64],
    digits: &'a [u64],
    pos: usize,
    regular: bool,
}

impl Chooser for ReplayChooser<'_> {
    fn below(&mut self, n: u64) -> u64 {
        if self.pos < self.radices.len() && self.radices[self.pos] == n {
            let d = self.digits[self.pos];
            self.pos += 1;
            d
        } else {
            self.regular = false;
            0
        }
    }
    fn uniform01(&mut self) -> Result<f64> {
        Err(precondition("sampler uses continuous randomness; exact enumeration impossible"))
    }
    fn normal(&mut self) -> Result<f64> {
        self.uniform01()
    }
}

/// Accumulators merged in a fixed pairwise order.
pub trait Accumulator: Send + Sized {
    fn merge(&mut self, other: Self);
}

impl Accumulator for f64 {
    fn merge(&mut self, other: Self) {
        *self += other;
    }
}

impl<T: Copy + Send + std::ops::AddAssign> Accumulator for Vec<T> {
    fn merge(&mut self, other: Self) {
        debug_assert_eq!(self.len(), other.len());
        for (a, b) in self.iter_mut().zip(other) {
            *a += b;
        }
    }
}

fn pairwise_merge<A: Accumulator>(mut parts: Vec<A>) -> Option<A> {
    while parts.len() > 1 {
        let mut next = Vec::with_capacity(parts.len().div_ceil(2));
        let mut it = parts.into_iter();
        while let Some(mut a) = it.next() {
            if let Some(b) = it.next() {
                a.merge(b);
            }
            next.push(a);
        }
        parts = next;
    }
    parts.pop()
}

/// Radices drawn by a sampler along its all-zero path, and the leaf count.
pub fn probe_radices<F>(f: F) -> Result<(Vec<u64>, u128)>
where
    F: FnOnce(&mut dyn Chooser) -> Result<()>,
{
    let mut probe = ProbeChooser {
        radices: Vec::new(),
        continuous: false,
    };
    let r = f(&mut probe);
    if probe.continuous {
        return Err(precondition(
            "sampler uses continuous randomness; exact enumeration impossible",
        ));
    }
    r?;
    let mut leaves: u128 = 1;
    for &n in &probe.radices {
        leaves = leaves
            .checked_mul(n as u128)
            .ok_or_else(|| resource("randomness space overflows 128 bits"))?;
    }
    Ok((probe.radices, leaves))
}

/// Sum of `visit` over every leaf of a sampler's randomness tree.
///
/// Returns the summed accumulator and the number of leaves; each leaf
/// carries weight 1/leaves. All leaves must draw the same radix sequence.
/// Chunking is fixed by the leaf count, so the result does not depend on
/// the number of worker threads.
pub fn exhaustive_sum<A, N, F>(budget: u64, new_acc: N, visit: F) -> Result<(A, u64)>
where
    A: Accumulator,
    N: Fn() -> A + Sync,
    F: Fn(&mut dyn Chooser, &mut A) -> Result<()> + Sync,
{
    let (radices, leaves) = probe_radices(|c| {
        let mut scratch = new_acc();
        visit(c, &mut scratch)
    })?;
    if leaves > budget as u128 {
        return Err(resource(format!(
            "exact enumeration needs {leaves} leaves, budget is {budget}"
        )));
    }
    let leaves = leaves as u64;
    let chunk = 256u64;
    let n_chunks = leaves.div_ceil(chunk);
    let parts: Vec<A> = (0..n_chunks)
        .into_par_iter()
        .map(|ci| -> Result<A> {
            let start = ci * chunk;
            let end = (start + chunk).min(leaves);
            let mut digits = decode_mixed_radix(start, &radices);
            let mut acc = new_acc();
            for leaf in start..end {
                let mut rc = ReplayChooser {
                    radices: &radices,
                    digits: &digits,
                    pos: 0,
                    regular: true,
                };
                visit(&mut rc, &mut acc)?;
                if !rc.regular || rc.pos != radices.len() {
                    return Err(precondition(
                        "sampler draws a leaf-dependent radix sequence; exact enumeration impossible",
                    ));
                }
                if leaf + 1 < end {
                    increment_mixed_radix(&mut digits, &radices);
                }
            }
            Ok(acc)
        })
        .collect::<Result<Vec<A>>>()?;
    let total = pairwise_merge(parts).unwrap_or_else(new_acc);
    Ok((total, leaves))
}

/// Per-group sums of `visit` over Monte-Carlo draws.
///
/// Draw i reads the stream `label/i` of `master_seed`. Draws are split
/// into `groups` contiguous blocks of near-equal size; the returned vector
/// holds one (sum, count) per block in index order.
pub fn monte_carlo_groups<A, N, F>(
    master_seed: u64,
    label: &str,
    draws: u64,
    groups: u64,
    new_acc: N,
    visit: F,
) -> Result<Vec<(A, u64)>>
where
    A: Accumulator,
    N: Fn() -> A + Sync,
    F: Fn(&mut dyn Chooser, &mut A) -> Result<()> + Sync,
{
    if draws == 0 {
        return Err(precondition("at least one draw is required"));
    }
    let groups = groups.clamp(1, draws);
    (0..groups)
        .into_par_iter()
        .map(|g| -> Result<(A, u64)> {
            let start = g * draws / groups;
            let end = (g + 1) * draws / groups;
            let mut acc = new_acc();
            for i in start..end {
                let mut s = StreamChooser::child(master_seed, label, i);
                visit(&mut s, &mut acc)?;
            }
            Ok((acc, end - start))
        })
        .collect()
}

/// Merge group sums into the overall sum, pairwise in index order.
pub fn merge_groups<A: Accumulator>(groups: Vec<(A, u64)>) -> Option<(A, u64)> {
    let count = groups.iter().map(|g| g.1).sum();
    pairwise_merge(groups.into_iter().map(|g| g.0).collect()).map(|a| (a, count))
}

fn decode_mixed_radix(mut index: u64, radices: &[u64]) -> Vec<u64> {
    let mut digits = vec![0u64; radices.len()];
    for (d, &r) in digits.iter_mut().zip(radices).rev() {
        *d = index % r;
        index /= r;
    }
    digits
}

fn increment_mixed_radix(digits: &mut [u64], radices: &[u64]) {
    for (d, &r) in digits.iter_mut().zip(radices).rev() {
        *d += 1;
        if *d < r {
            return;
        }
        *d = 0;
    }
}
