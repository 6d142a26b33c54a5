//! Resource accounting for blocked ensembles built from compiled hash circuits.

use serde::{Deserialize, Serialize};

use super::{build_kwise_circuit, KWiseMode, ResourceReport, MAX_BUILD_K, MAX_BUILD_M};
use crate::error::{precondition, resource, Result};
use crate::gf2field::field_spec;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum DesignFamily {
    BlockedPhase,
    BlockedLrfc,
}

/// Patch width ξ = max(⌈log2(3nk²/ε)⌉, 3), valid when k²/ε ≤ 2^n/3.
pub fn patch_size(n: u32, k: u32, epsilon: f64) -> Result<u32> {
    if n == 0 || k == 0 {
        return Err(precondition("n and k must be positive"));
    }
    if !(epsilon > 0.0 && epsilon.is_finite()) {
        return Err(precondition(format!("epsilon must be positive, got {epsilon}")));
    }
    let k2 = (k as f64) * (k as f64);
    if k2 / epsilon > 2f64.powi(n as i32) / 3.0 {
        return Err(precondition(format!(
            "k^2/eps = {} exceeds 2^n/3 = {}",
            k2 / epsilon,
            2f64.powi(n as i32) / 3.0
        )));
    }
    let target = 3.0 * n as f64 * k2 / epsilon;
    let mut xi = 0u32;
    while 2f64.powi(xi as i32) < target {
        xi += 1;
    }
    Ok(xi.max(3))
}

/// Seed bits charged by the closed-form accounting: 2nk for blocked phase
/// states and 3nk + ⌈5n/2⌉ for blocked LRFC circuits.
pub fn randomness_bits(family: DesignFamily, n: u64, k: u64) -> u64 {
    match family {
        DesignFamily::BlockedPhase => 2 * n * k,
        DesignFamily::BlockedLrfc => 3 * n * k + (5 * n).div_ceil(2),
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DesignResources {
    pub family: DesignFamily,
    pub mode: KWiseMode,
    pub n: u32,
    pub k: u32,
    pub epsilon: f64,
    pub xi: u32,
    /// Function instances per brickwork layer, ⌈n/2ξ⌉.
    pub blocks_per_layer: u32,
    /// Independence of every hash function, 2k.
    pub independence: u32,
    /// The 2ξ-bit phase function circuit.
    pub phase_function: ResourceReport,
    /// The ξ-bit shuffle function circuit (blocked LRFC only).
    pub shuffle_function: Option<ResourceReport>,
    /// Totals. `randomness_bits` follows the closed-form accounting.
    pub report: ResourceReport,
    /// Seed wires of all compiled function instances.
    pub compiled_seed_bits: u64,
    pub depth_expression: String,
    pub ancilla_expression: String,
    /// The Clifford layer C_o is not compiled; totals omit it.
    pub excludes_clifford_layer: bool,
}

fn expressions(mode: KWiseMode) -> (&'static str, &'static str) {
    match mode {
        KWiseMode::LowDepth => ("O(log k * log log(nk/eps))", "O(kn * log log(n/eps))"),
        KWiseMode::LowAncilla => ("O(k * log log(nk/eps))", "O(n * log log(nk/eps))"),
    }
}

fn function_report(bits: u32, independence: u32, mode: KWiseMode) -> Result<ResourceReport> {
    if bits > MAX_BUILD_M || independence as usize > MAX_BUILD_K {
        return Err(resource(format!(
            "compiling a {independence}-wise function on {bits} bits exceeds the builder limits \
             (m <= {MAX_BUILD_M}, k <= {MAX_BUILD_K})"
        )));
    }
    let spec = field_spec(bits)?;
    Ok(build_kwise_circuit(&spec, independence as usize, mode)?.circuit.report())
}

/// ξ from the error target, concrete depth and ancilla from circuits built
/// at that ξ, and the closed-form randomness count.
pub fn design_resource_calculator(
    n: u32,
    k: u32,
    epsilon: f64,
    family: DesignFamily,
    mode: KWiseMode,
) -> Result<DesignResources> {
    let xi = patch_size(n, k, epsilon)?;
    let independence = 2 * k;
    let blocks = n.div_ceil(2 * xi);
    let f = function_report(2 * xi, independence, mode)?;
    let h = match family {
        DesignFamily::BlockedPhase => None,
        DesignFamily::BlockedLrfc => Some(function_report(xi, independence, mode)?),
    };
    let instances = 2 * blocks as u64;
    let (depth, ancilla, gates, toffoli, seeds) = match h {
        None => (
            2 * f.depth,
            blocks as u64 * f.ancilla,
            instances * f.gate_count,
            instances * f.toffoli_count,
            instances * f.randomness_bits,
        ),
        Some(h) => (
            2 * f.depth + 2 * h.depth,
            blocks as u64 * f.ancilla.max(h.ancilla),
            instances * (f.gate_count + h.gate_count),
            instances * (f.toffoli_count + h.toffoli_count),
            instances * (f.randomness_bits + h.randomness_bits),
        ),
    };
    let (de, ae) = expressions(mode);
    Ok(DesignResources {
        family,
        mode,
        n,
        k,
        epsilon,
        xi,
        blocks_per_layer: blocks,
        independence,
        phase_function: f,
        shuffle_function: h,
        report: ResourceReport {
            depth,
            width: n as u64 + ancilla,
            ancilla,
            gate_count: gates,
            toffoli_count: toffoli,
            randomness_bits: randomness_bits(family, n as u64, k as u64),
        },
        compiled_seed_bits: seeds,
        depth_expression: de.into(),
        ancilla_expression: ae.into(),
        excludes_clifford_layer: family == DesignFamily::BlockedLrfc,
    })
}

/// One row of the comparison table.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TableRow {
    pub construction: String,
    pub kind: String,
    pub mode: Option<KWiseMode>,
    pub xi: Option<u32>,
    pub depth_expression: String,
    pub depth: Option<u64>,
    pub ancilla_expression: String,
    pub ancilla: Option<u64>,
    pub randomness_bits: Option<u64>,
    pub error: String,
}

/// Comparison rows for the global and blocked constructions at (n, k, ε).
pub fn resources_table(n: u32, k: u32, epsilon: f64) -> Result<Vec<TableRow>> {
    patch_size(n, k, epsilon)?;
    let mut rows = Vec::new();
    rows.push(TableRow {
        construction: "pfc".into(),
        kind: "unitary".into(),
        mode: None,
        xi: None,
        depth_expression: "O(nk * polylog n)".into(),
        depth: None,
        ancilla_expression: "none".into(),
        ancilla: None,
        randomness_bits: None,
        error: "measurable".into(),
    });
    for mode in [KWiseMode::LowDepth, KWiseMode::LowAncilla] {
        let r = design_resource_calculator(n, k, epsilon, DesignFamily::BlockedLrfc, mode)?;
        rows.push(TableRow {
            construction: "blocked_lrfc".into(),
            kind: "unitary".into(),
            mode: Some(mode),
            xi: Some(r.xi),
            depth_expression: r.depth_expression,
            depth: Some(r.report.depth),
            ancilla_expression: r.ancilla_expression,
            ancilla: Some(r.report.ancilla),
            randomness_bits: Some(r.report.randomness_bits),
            error: "measurable".into(),
        });
    }
    let global = |mode: KWiseMode| -> Option<ResourceReport> { function_report(n, 2 * k, mode).ok() };
    for mode in [KWiseMode::LowDepth, KWiseMode::LowAncilla] {
        let g = global(mode);
        let (de, ae) = match mode {
            KWiseMode::LowDepth => ("O(log k * log n)", "O(kn * log n)"),
            KWiseMode::LowAncilla => ("O(k * log n)", "O(n * log n)"),
        };
        rows.push(TableRow {
            construction: "random_phase".into(),
            kind: "state".into(),
            mode: Some(mode),
            xi: None,
            depth_expression: de.into(),
            depth: g.map(|r| r.depth),
            ancilla_expression: ae.into(),
            ancilla: g.map(|r| r.ancilla),
            randomness_bits: g.map(|r| r.randomness_bits),
            error: "additive".into(),
        });
    }
    for mode in [KWiseMode::LowDepth, KWiseMode::LowAncilla] {
        let r = design_resource_calculator(n, k, epsilon, DesignFamily::BlockedPhase, mode)?;
        rows.push(TableRow {
            construction: "blocked_phase".into(),
            kind: "state".into(),
            mode: Some(mode),
            xi: Some(r.xi),
            depth_expression: r.depth_expression,
            depth: Some(r.report.depth),
            ancilla_expression: r.ancilla_expression,
            ancilla: Some(r.report.ancilla),
            randomness_bits: Some(r.report.randomness_bits),
            error: "additive".into(),
        });
    }
    for (de, ae) in [("Omega(log k + log log(n/eps))", "any"), ("Omega(k + log log(n/eps))", "O(n)")] {
        rows.push(TableRow {
            construction: "lower_bound".into(),
            kind: "state".into(),
            mode: None,
            xi: None,
            depth_expression: de.into(),
            depth: None,
            ancilla_expression: ae.into(),
            ancilla: None,
            randomness_bits: None,
            error: "additive".into(),
        });
    }
    Ok(rows)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn worked_resource_numbers() {
        assert_eq!(patch_size(16, 2, 0.1).unwrap(), 11);
        assert_eq!(randomness_bits(DesignFamily::BlockedPhase, 16, 2), 64);
        assert_eq!(randomness_bits(DesignFamily::BlockedLrfc, 16, 2), 136);
        assert_eq!(randomness_bits(DesignFamily::BlockedLrfc, 3, 1), 9 + 8);
    }

    #[test]
    fn patch_floor_and_precondition() {
        assert_eq!(patch_size(8, 1, 100.0).unwrap(), 3);
        assert!(patch_size(4, 4, 0.01).is_err());
        assert!(patch_size(4, 1, 0.0).is_err());
    }

    #[test]
    fn calculator_builds_at_patch_width() {
        let r = design_resource_calculator(16, 2, 0.1, DesignFamily::BlockedPhase, KWiseMode::LowAncilla)
            .unwrap();
        assert_eq!(r.xi, 11);
        assert_eq!(r.blocks_per_layer, 1);
        assert_eq!(r.report.randomness_bits, 64);
        assert_eq!(r.report.depth, 2 * r.phase_function.depth);
        assert_eq!(r.compiled_seed_bits, 2 * 22 * 4);
    }
}
