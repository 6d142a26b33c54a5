//! Layered reversible circuits over NOT, CNOT and Toffoli gates.
//!
//! Wires carry one of four roles. Input and seed wires are only ever read;
//! output wires are XOR targets; ancilla wires start at 0 and every builder
//! in this module returns them to 0 by running its compute stage backwards.

mod build;
mod resources;
mod text;

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use crate::error::{precondition, Error, Result};
use crate::gf2field::FieldSpec;

pub use build::{build_kwise_circuit, build_mul_circuit, KWiseMode, MAX_BUILD_K, MAX_BUILD_M};
pub use resources::{
    design_resource_calculator, patch_size, randomness_bits, resources_table, DesignFamily,
    DesignResources, TableRow,
};
pub use text::{from_text, to_text};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Gate {
    Not(usize),
    /// (control, target)
    Cnot(usize, usize),
    /// (control, control, target)
    Toffoli(usize, usize, usize),
}

impl Gate {
    pub fn wires(&self) -> Vec<usize> {
        match *self {
            Gate::Not(t) => vec![t],
            Gate::Cnot(c, t) => vec![c, t],
            Gate::Toffoli(a, b, t) => vec![a, b, t],
        }
    }

    pub fn target(&self) -> usize {
        match *self {
            Gate::Not(t) | Gate::Cnot(_, t) | Gate::Toffoli(_, _, t) => t,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum WireRole {
    Input,
    Seed,
    Ancilla,
    Output,
}

/// Immutable layered circuit. Gates in one layer touch disjoint wires.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ReversibleCircuit {
    roles: Vec<WireRole>,
    layers: Vec<Vec<Gate>>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct ResourceReport {
    pub depth: u64,
    pub width: u64,
    pub ancilla: u64,
    pub gate_count: u64,
    pub toffoli_count: u64,
    pub randomness_bits: u64,
}

impl ReversibleCircuit {
    /// Validates wire indices, gate arity, layer disjointness and that no
    /// gate targets an input or seed wire.
    pub fn new(roles: Vec<WireRole>, layers: Vec<Vec<Gate>>) -> Result<Self> {
        let n = roles.len();
        let mut stamp = vec![usize::MAX; n];
        for (li, layer) in layers.iter().enumerate() {
            for g in layer {
                let ws = g.wires();
                for &w in &ws {
                    if w >= n {
                        return Err(precondition(format!(
                            "layer {li}: wire {w} out of range (circuit has {n} wires)"
                        )));
                    }
                    if stamp[w] == li {
                        return Err(precondition(format!(
                            "layer {li}: wire {w} used by more than one gate operand"
                        )));
                    }
                    stamp[w] = li;
                }
                if matches!(roles[g.target()], WireRole::Input | WireRole::Seed) {
                    return Err(precondition(format!(
                        "layer {li}: gate targets read-only wire {}",
                        g.target()
                    )));
                }
            }
        }
        Ok(Self { roles, layers })
    }

    pub fn roles(&self) -> &[WireRole] {
        &self.roles
    }

    pub fn layers(&self) -> &[Vec<Gate>] {
        &self.layers
    }

    pub fn wires_with(&self, role: WireRole) -> Vec<usize> {
        (0..self.roles.len()).filter(|&w| self.roles[w] == role).collect()
    }

    pub fn depth(&self) -> usize {
        self.layers.len()
    }

    pub fn width(&self) -> usize {
        self.roles.len()
    }

    pub fn report(&self) -> ResourceReport {
        let gates = self.layers.iter().flatten();
        ResourceReport {
            depth: self.layers.len() as u64,
            width: self.roles.len() as u64,
            ancilla: self.wires_with(WireRole::Ancilla).len() as u64,
            gate_count: gates.clone().count() as u64,
            toffoli_count: gates.filter(|g| matches!(g, Gate::Toffoli(..))).count() as u64,
            randomness_bits: self.wires_with(WireRole::Seed).len() as u64,
        }
    }

    /// Bit-sliced simulation: lane j of every word is an independent run.
    /// Afterwards every ancilla lane must be zero.
    pub fn run_lanes(&self, state: &mut [u64]) -> Result<()> {
        if state.len() != self.roles.len() {
            return Err(precondition("lane state length differs from wire count"));
        }
        for (w, role) in self.roles.iter().enumerate() {
            if *role == WireRole::Ancilla && state[w] != 0 {
                return Err(precondition(format!("ancilla wire {w} must start at 0")));
            }
        }
        for layer in &self.layers {
            for g in layer {
                match *g {
                    Gate::Not(t) => state[t] = !state[t],
                    Gate::Cnot(c, t) => state[t] ^= state[c],
                    Gate::Toffoli(a, b, t) => state[t] ^= state[a] & state[b],
                }
            }
        }
        for (w, role) in self.roles.iter().enumerate() {
            if *role == WireRole::Ancilla && state[w] != 0 {
                return Err(Error::AncillaDirty(w));
            }
        }
        Ok(())
    }
}

/// Runs the circuit on one assignment. Every input and seed wire must be
/// assigned; unassigned ancilla and output wires start at 0. Returns the
/// final value of every wire.
pub fn simulate_reversible(
    c: &ReversibleCircuit,
    inputs: &BTreeMap<usize, bool>,
) -> Result<Vec<bool>> {
    let n = c.width();
    let mut state = vec![0u64; n];
    for (&w, &v) in inputs {
        if w >= n {
            return Err(precondition(format!("assigned wire {w} does not exist")));
        }
        state[w] = v as u64;
    }
    for (w, role) in c.roles.iter().enumerate() {
        if matches!(role, WireRole::Input | WireRole::Seed) && !inputs.contains_key(&w) {
            return Err(precondition(format!("{role:?} wire {w} is not assigned")));
        }
    }
    c.run_lanes(&mut state)?;
    Ok(state.into_iter().map(|v| v & 1 == 1).collect())
}

/// A named group of wires; `wires[i]` holds bit i.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Register {
    pub name: String,
    pub wires: Vec<usize>,
}

/// A circuit together with the word-level meaning of its wires.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct BuiltCircuit {
    pub circuit: ReversibleCircuit,
    pub field: FieldSpec,
    pub inputs: Vec<Register>,
    pub seeds: Vec<Register>,
    pub output: Register,
}

impl BuiltCircuit {
    /// Evaluates one case: a word per input register and per seed register.
    pub fn evaluate(&self, inputs: &[u64], seeds: &[u64]) -> Result<u64> {
        Ok(self.evaluate_batch(&[(inputs.to_vec(), seeds.to_vec())])?[0])
    }

    /// Evaluates many cases, 64 at a time through bit-sliced lanes.
    pub fn evaluate_batch(&self, cases: &[(Vec<u64>, Vec<u64>)]) -> Result<Vec<u64>> {
        let mut out = Vec::with_capacity(cases.len());
        for chunk in cases.chunks(64) {
            let mut state = vec![0u64; self.circuit.width()];
            for (lane, (ins, sds)) in chunk.iter().enumerate() {
                if ins.len() != self.inputs.len() || sds.len() != self.seeds.len() {
                    return Err(precondition("case does not match the register layout"));
                }
                for (reg, &v) in self.inputs.iter().chain(&self.seeds).zip(ins.iter().chain(sds)) {
                    if reg.wires.len() < 64 && v >> reg.wires.len() != 0 {
                        return Err(precondition(format!(
                            "value {v:#x} too wide for register {}",
                            reg.name
                        )));
                    }
                    for (i, &w) in reg.wires.iter().enumerate() {
                        state[w] |= (v >> i & 1) << lane;
                    }
                }
            }
            self.circuit.run_lanes(&mut state)?;
            for lane in 0..chunk.len() {
                let mut v = 0u64;
                for (i, &w) in self.output.wires.iter().enumerate() {
                    v |= (state[w] >> lane & 1) << i;
                }
                out.push(v);
            }
        }
        Ok(out)
    }
}
