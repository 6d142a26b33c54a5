//! Two-copy collision test against shallow states.
//!
//! Each trial draws one state, rotates every qubit by an independent Haar
//! single-qubit unitary, and samples two outcomes from the same
//! distribution. z_a = 1 when the outcomes agree on every qubit of patch a;
//! the test accepts when |z| > s*.

use serde::{Deserialize, Serialize};

use crate::ensembles::{draw_state, draw_unitary, EnsembleSpec};
use crate::error::{precondition, resource, Result};
use crate::quantsim::{haar_state, sample_haar_unitary, PatchLayout, StateVec, C64};
use crate::randomness::{merge_groups, monte_carlo_groups, Chooser};

pub const MAX_COLLISION_QUBITS: usize = 16;
const GROUPS: u64 = 64;

/// What is measured.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "source", rename_all = "snake_case")]
pub enum CollisionSource {
    /// A state family, or a unitary family applied to |0⟩.
    Ensemble { spec: EnsembleSpec },
    /// Independent Haar single-qubit states (a depth-0 circuit).
    ProductState { n: usize },
    /// A fixed computational basis state.
    BasisState { n: usize, x: u64 },
}

impl CollisionSource {
    pub fn n(&self) -> usize {
        match self {
            CollisionSource::Ensemble { spec } => spec.n(),
            CollisionSource::ProductState { n } | CollisionSource::BasisState { n, .. } => *n,
        }
    }

    fn draw(&self, rng: &mut dyn Chooser) -> Result<StateVec> {
        match self {
            CollisionSource::Ensemble { spec } if spec.is_state() => draw_state(spec, rng),
            CollisionSource::Ensemble { spec } => {
                let mut psi = StateVec::zero(spec.n());
                draw_unitary(spec, rng)?.apply(&mut psi)?;
                Ok(psi)
            }
            CollisionSource::ProductState { n } => {
                let mut amps = vec![C64::new(1.0, 0.0)];
                for _ in 0..*n {
                    let q = haar_state(1, rng)?;
                    let mut next = Vec::with_capacity(amps.len() * 2);
                    for b in q.amps() {
                        next.extend(amps.iter().map(|a| a * b));
                    }
                    amps = next;
                }
                StateVec::from_amps(amps)
            }
            CollisionSource::BasisState { n, x } => Ok(StateVec::basis(*n, *x)),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct CollisionConfig {
    /// Patches of L qubits each.
    pub layout: PatchLayout,
    pub trials: u64,
    /// Acceptance cut; `None` derives s* from q_H = 2^{−L} and the
    /// product-state rate 2^{−L}(1 + 3^{−L}).
    pub s_star: Option<f64>,
    /// Measure in the computational basis instead of random product bases.
    pub computational_basis: bool,
}

impl CollisionConfig {
    pub fn contiguous(n: usize, l: usize, trials: u64) -> Result<Self> {
        Ok(Self {
            layout: PatchLayout::contiguous(n, l)?,
            trials,
            s_star: None,
            computational_basis: false,
        })
    }

    fn resolved_s_star(&self) -> Result<f64> {
        let m = self.layout.count();
        let s = match self.s_star {
            Some(s) => s,
            None => {
                let l = self.layout.xi();
                let q_low = 0.5f64.powi(l as i32);
                let q_high = q_low * (1.0 + (1.0 / 3f64).powi(l as i32));
                threshold_star(l, m, q_low, q_high)?
            }
        };
        if !(0.0..=m as f64).contains(&s) {
            return Err(precondition(format!("s* = {s} lies outside [0, {m}]")));
        }
        Ok(s)
    }
}

/// Statistics of one source.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SideReport {
    pub per_patch_rates: Vec<f64>,
    pub per_patch_stderr: Vec<f64>,
    pub mean_collisions: f64,
    pub accept_rate: f64,
    /// Empirical covariance of (z_a, z_b).
    pub pair_covariance: Vec<Vec<f64>>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CollisionReport {
    pub patch_size: usize,
    pub patches: usize,
    pub trials: u64,
    pub s_star: f64,
    pub source: SideReport,
    /// The same statistics for Haar-random states.
    pub compare: SideReport,
    /// accept_rate(source) − accept_rate(Haar).
    pub advantage: f64,
    /// 95% normal interval for the advantage.
    pub advantage_ci: [f64; 2],
}

impl CollisionReport {
    /// RFC-4180 rows `patch_index,rate,stderr` for the source.
    pub fn to_csv(&self) -> String {
        let mut out = String::from("patch_index,rate,stderr\r\n");
        for (a, (r, s)) in self
            .source
            .per_patch_rates
            .iter()
            .zip(&self.source.per_patch_stderr)
            .enumerate()
        {
            out.push_str(&format!("{a},{r},{s}\r\n"));
        }
        out
    }
}

fn sample_outcome(cdf: &[f64], rng: &mut dyn Chooser) -> Result<u64> {
    let u = rng.uniform01()? * cdf[cdf.len() - 1];
    Ok(cdf.partition_point(|&c| c <= u).min(cdf.len() - 1) as u64)
}

fn patch_masks(layout: &PatchLayout) -> Vec<u64> {
    layout
        .patches()
        .iter()
        .map(|p| p.iter().fold(0u64, |m, &q| m | 1 << q))
        .collect()
}

/// One side of the test; accumulator layout is
/// [hits per patch (M), pair hits (M·M), accepts, Σ|z|].
fn run_side(source: &CollisionSource, cfg: &CollisionConfig, s_star: f64, seed: u64, label: &str) -> Result<SideReport> {
    let n = source.n();
    let masks = patch_masks(&cfg.layout);
    let m = masks.len();
    let width = m + m * m + 2;
    let groups = monte_carlo_groups(
        seed,
        label,
        cfg.trials,
        GROUPS,
        || vec![0.0f64; width],
        |rng, acc: &mut Vec<f64>| {
            let mut psi = source.draw(rng)?;
            if !cfg.computational_basis {
                for q in 0..n {
                    psi.apply_op(&[q], &sample_haar_unitary(2, rng)?)?;
                }
            }
            let mut cdf = psi.probabilities();
            for i in 1..cdf.len() {
                cdf[i] += cdf[i - 1];
            }
            let diff = sample_outcome(&cdf, rng)? ^ sample_outcome(&cdf, rng)?;
            let z: Vec<bool> = masks.iter().map(|&mk| diff & mk == 0).collect();
            let count = z.iter().filter(|&&b| b).count();
            for a in 0..m {
                if z[a] {
                    acc[a] += 1.0;
                    for b in 0..m {
                        if z[b] {
                            acc[m + a * m + b] += 1.0;
                        }
                    }
                }
            }
            if count as f64 > s_star {
                acc[m + m * m] += 1.0;
            }
            acc[m + m * m + 1] += count as f64;
            Ok(())
        },
    )?;
    let (acc, t) = merge_groups(groups).expect("at least one group");
    let t = t as f64;
    let rates: Vec<f64> = acc[..m].iter().map(|h| h / t).collect();
    let stderr = rates.iter().map(|r| (r * (1.0 - r) / t).sqrt()).collect();
    let pair_covariance = (0..m)
        .map(|a| (0..m).map(|b| acc[m + a * m + b] / t - rates[a] * rates[b]).collect())
        .collect();
    Ok(SideReport {
        per_patch_rates: rates,
        per_patch_stderr: stderr,
        mean_collisions: acc[m + m * m + 1] / t,
        accept_rate: acc[m + m * m] / t,
        pair_covariance,
    })
}

/// Runs the test on `source` and on Haar states. Trial i of the source uses
/// stream `trial/i`; the Haar side uses `reference/i`.
pub fn run_collision_test(source: &CollisionSource, cfg: &CollisionConfig, master_seed: u64) -> Result<CollisionReport> {
    let n = source.n();
    if n == 0 || n != cfg.layout.n() {
        return Err(precondition(format!(
            "source has {n} qubits, layout covers {}",
            cfg.layout.n()
        )));
    }
    if n > MAX_COLLISION_QUBITS {
        return Err(resource(format!(
            "collision sampling supports n <= {MAX_COLLISION_QUBITS}"
        )));
    }
    if cfg.trials == 0 {
        return Err(precondition("at least one trial is required"));
    }
    let s_star = cfg.resolved_s_star()?;
    let side = run_side(source, cfg, s_star, master_seed, "trial")?;
    let haar = CollisionSource::Ensemble {
        spec: EnsembleSpec::Haar { n },
    };
    let compare = run_side(&haar, cfg, s_star, master_seed, "reference")?;
    let t = cfg.trials as f64;
    let (p1, p2) = (side.accept_rate, compare.accept_rate);
    let advantage = p1 - p2;
    let half = 1.96 * (p1 * (1.0 - p1) / t + p2 * (1.0 - p2) / t).sqrt();
    Ok(CollisionReport {
        patch_size: cfg.layout.xi(),
        patches: cfg.layout.count(),
        trials: cfg.trials,
        s_star,
        source: side,
        compare,
        advantage,
        advantage_ci: [advantage - half, advantage + half],
    })
}

/// The collision count at which Bin(M, q_high) and Bin(M, q_low) have equal
/// likelihood:
/// s* = M·ln((1−q_l)/(1−q_h)) / (ln(q_h/q_l) + ln((1−q_l)/(1−q_h))).
pub fn threshold_star(l: usize, m: usize, q_low: f64, q_high: f64) -> Result<f64> {
    if l == 0 || m == 0 {
        return Err(precondition("L and M must be positive"));
    }
    if !(0.0 < q_low && q_low < q_high && q_high < 1.0) {
        return Err(precondition(format!(
            "need 0 < q_low < q_high < 1, got q_low = {q_low}, q_high = {q_high}"
        )));
    }
    let a = (q_high / q_low).ln();
    let b = ((1.0 - q_low) / (1.0 - q_high)).ln();
    Ok(m as f64 * b / (a + b))
}

/// (n/L⁴)/36^L / ln 2 − 2/2^n.
pub fn predicted_advantage(n: u32, l: u32) -> Result<f64> {
    if l == 0 {
        return Err(precondition("L must be at least 1"));
    }
    let m = n as f64 / (l as f64).powi(4);
    Ok(m / 36f64.powi(l as i32) / std::f64::consts::LN_2 - 2.0 / 2f64.powi(n as i32))
}

/// Pr[|z| > s*] for independent z_a ~ Bernoulli(q_a).
pub fn accept_probability(q: &[f64], s_star: f64) -> f64 {
    let mut dist = vec![1.0f64];
    for &p in q {
        let mut next = vec![0.0; dist.len() + 1];
        for (c, &w) in dist.iter().enumerate() {
            next[c] += w * (1.0 - p);
            next[c + 1] += w * p;
        }
        dist = next;
    }
    dist.iter()
        .enumerate()
        .filter(|&(c, _)| c as f64 > s_star)
        .map(|(_, w)| w)
        .sum()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn basis_state_always_collides() {
        let mut cfg = CollisionConfig::contiguous(4, 1, 200).unwrap();
        cfg.computational_basis = true;
        let r = run_collision_test(&CollisionSource::BasisState { n: 4, x: 0b1010 }, &cfg, 1).unwrap();
        assert!(r.source.per_patch_rates.iter().all(|&q| q == 1.0));
        assert_eq!(r.source.accept_rate, 1.0);
    }

    #[test]
    fn threshold_examples() {
        let s = threshold_star(1, 16, 0.5, 2.0 / 3.0).unwrap();
        // Counting non-collisions instead gives the conjugate cut M − s*.
        let conj = 16.0 * (4.0f64 / 3.0).ln() / ((4.0f64 / 3.0).ln() + 1.5f64.ln());
        assert!((16.0 - s - conj).abs() < 1e-12);
        assert!((s - 9.3597).abs() < 1e-3);
        assert!((threshold_star(1, 10, 0.3, 0.7).unwrap() - 5.0).abs() < 1e-12);
        assert!(threshold_star(1, 4, 0.5, 0.5).is_err());
    }

    #[test]
    fn advantage_formula() {
        assert!((predicted_advantage(16, 1).unwrap() - 0.6412).abs() < 1e-3);
        // 1/1296/ln 2 ≈ 1.113e-3, less 2/2^16.
        assert!((predicted_advantage(16, 2).unwrap() - 1.0827e-3).abs() < 1e-6);
        assert!(predicted_advantage(16, 8).unwrap() <= 0.0);
        assert!(predicted_advantage(4, 0).is_err());
    }

    #[test]
    fn accept_probability_edges() {
        assert_eq!(accept_probability(&[1.0; 4], 3.5), 1.0);
        assert_eq!(accept_probability(&[0.0; 4], 0.0), 0.0);
        assert!((accept_probability(&[0.5; 2], 0.5) - 0.75).abs() < 1e-15);
    }

    #[test]
    fn csv_layout() {
        let mut cfg = CollisionConfig::contiguous(2, 1, 10).unwrap();
        cfg.s_star = Some(1.0);
        let r = run_collision_test(&CollisionSource::ProductState { n: 2 }, &cfg, 0).unwrap();
        let csv = r.to_csv();
        assert!(csv.starts_with("patch_index,rate,stderr\r\n0,"));
        assert_eq!(csv.lines().count(), 3);
    }
}
