//! Circuit builders for field multiplication and polynomial evaluation.
//!
//! Every block produced here has the shape compute · copy · compute⁻¹, so
//! its scratch wires are zero again when the block ends and can be handed
//! to the next block. Blocks placed side by side in one stage never share
//! scratch: wires are released only after the whole stage is scheduled.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use super::{BuiltCircuit, Gate, Register, ReversibleCircuit, WireRole};
use crate::error::{resource, Result};
use crate::gf2field::FieldSpec;

pub const MAX_BUILD_M: u32 = 32;
pub const MAX_BUILD_K: usize = 16;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum KWiseMode {
    LowDepth,
    LowAncilla,
}

type Layers = Vec<Vec<Gate>>;

struct Builder {
    roles: Vec<WireRole>,
    pool: Vec<usize>,
}

impl Builder {
    fn new() -> Self {
        Self {
            roles: Vec::new(),
            pool: Vec::new(),
        }
    }

    fn fresh(&mut self, role: WireRole, count: usize) -> Vec<usize> {
        let start = self.roles.len();
        self.roles.extend(std::iter::repeat_n(role, count));
        (start..start + count).collect()
    }

    /// Zeroed ancilla wires, reusing released ones first.
    fn ancilla(&mut self, count: usize) -> Vec<usize> {
        let reuse = count.min(self.pool.len());
        let mut out: Vec<usize> = self.pool.drain(self.pool.len() - reuse..).collect();
        out.extend(self.fresh(WireRole::Ancilla, count - reuse));
        out
    }

    /// Returns wires known to be zero to the pool.
    fn release(&mut self, wires: &[usize]) {
        self.pool.extend_from_slice(wires);
    }

    fn finish(self, layers: Layers) -> Result<ReversibleCircuit> {
        ReversibleCircuit::new(self.roles, layers.into_iter().filter(|l| !l.is_empty()).collect())
    }
}

/// Side-by-side composition; layer i of the result merges layer i of each part.
fn par(parts: Vec<Layers>) -> Layers {
    let depth = parts.iter().map(Vec::len).max().unwrap_or(0);
    let mut out = vec![Vec::new(); depth];
    for part in parts {
        for (i, layer) in part.into_iter().enumerate() {
            out[i].extend(layer);
        }
    }
    out
}

fn reversed(layers: &Layers) -> Layers {
    layers.iter().rev().cloned().collect()
}

/// Copies each wire onto fresh ancillas by doubling until it has the
/// requested number of readable copies; copy 0 is the wire itself.
fn fanout(b: &mut Builder, requests: &[(usize, usize)]) -> (Layers, Vec<Vec<usize>>, Vec<usize>) {
    let mut copies: Vec<Vec<usize>> = requests.iter().map(|&(w, _)| vec![w]).collect();
    let mut layers = Layers::new();
    let mut scratch = Vec::new();
    loop {
        let mut layer = Vec::new();
        for (cs, &(_, want)) in copies.iter_mut().zip(requests) {
            let have = cs.len();
            let add = (want.max(1) - have).min(have);
            for j in 0..add {
                let w = b.ancilla(1)[0];
                scratch.push(w);
                layer.push(Gate::Cnot(cs[j], w));
                cs.push(w);
            }
        }
        if layer.is_empty() {
            break;
        }
        layers.push(layer);
    }
    (layers, copies, scratch)
}

/// XORs each nonempty list of wires into its first element with a binary
/// tree; returns the roots.
fn xor_trees(lists: Vec<Vec<usize>>) -> (Layers, Vec<usize>) {
    let mut lists = lists;
    let mut layers = Layers::new();
    while lists.iter().any(|l| l.len() > 1) {
        let mut layer = Vec::new();
        for l in lists.iter_mut() {
            let mut next = Vec::with_capacity(l.len().div_ceil(2));
            for pair in l.chunks(2) {
                if pair.len() == 2 {
                    layer.push(Gate::Cnot(pair[1], pair[0]));
                }
                next.push(pair[0]);
            }
            *l = next;
        }
        layers.push(layer);
    }
    (layers, lists.into_iter().map(|l| l[0]).collect())
}

/// dst ^= a·b over GF(2^m). Operands may be the same register.
///
/// Compute stage: operand fan-out, one Toffoli layer for all m² partial
/// products, per-degree XOR trees, then reduction mod p, which is linear
/// and therefore a CNOT network of fan-outs and XOR trees.
fn mul_block(
    b: &mut Builder,
    spec: &FieldSpec,
    x: &[usize],
    y: &[usize],
    dst: &[usize],
) -> (Layers, Vec<usize>) {
    let m = spec.m() as usize;
    let mut uses: BTreeMap<usize, usize> = BTreeMap::new();
    for &w in x.iter().chain(y) {
        *uses.entry(w).or_default() += m;
    }
    let requests: Vec<(usize, usize)> = uses.into_iter().collect();
    let (mut compute, copies, mut scratch) = fanout(b, &requests);
    let mut pools: BTreeMap<usize, std::vec::IntoIter<usize>> = requests
        .iter()
        .zip(copies)
        .map(|(&(w, _), cs)| (w, cs.into_iter()))
        .collect();

    let mut tof = Vec::with_capacity(m * m);
    let mut by_degree: Vec<Vec<usize>> = vec![Vec::new(); 2 * m - 1];
    for i in 0..m {
        for j in 0..m {
            let cx = pools.get_mut(&x[i]).unwrap().next().unwrap();
            let cy = pools.get_mut(&y[j]).unwrap().next().unwrap();
            let p = b.ancilla(1)[0];
            scratch.push(p);
            tof.push(Gate::Toffoli(cx, cy, p));
            by_degree[i + j].push(p);
        }
    }
    compute.push(tof);
    let (sum_layers, coeff) = xor_trees(by_degree);
    compute.extend(sum_layers);

    // Column d of the reduction matrix is x^d mod p.
    let columns: Vec<u64> = (0..2 * m - 1)
        .map(|d| if d < m { 1u64 << d } else { spec.reduce(1u128 << d) })
        .collect();
    let requests: Vec<(usize, usize)> = coeff
        .iter()
        .zip(&columns)
        .map(|(&w, &col)| (w, col.count_ones() as usize))
        .collect();
    let (fan, copies, more) = fanout(b, &requests);
    compute.extend(fan);
    scratch.extend(more);
    let mut pools: Vec<std::vec::IntoIter<usize>> = copies.into_iter().map(|c| c.into_iter()).collect();
    let rows: Vec<Vec<usize>> = (0..m)
        .map(|t| {
            (0..2 * m - 1)
                .filter(|&d| columns[d] >> t & 1 == 1)
                .map(|d| pools[d].next().unwrap())
                .collect()
        })
        .collect();
    let (red_layers, reduced) = xor_trees(rows);
    compute.extend(red_layers);

    let mut block = compute.clone();
    block.push(reduced.iter().zip(dst).map(|(&r, &d)| Gate::Cnot(r, d)).collect());
    block.extend(reversed(&compute));
    (block, scratch)
}

/// Several multiplications in one stage. Registers read by more than one
/// product are first copied so each product reads its own copy; the copies
/// are undone at the end of the stage.
fn par_muls(
    b: &mut Builder,
    spec: &FieldSpec,
    ops: &[(Vec<usize>, Vec<usize>, Vec<usize>)],
) -> (Layers, Vec<usize>) {
    let mut reads: BTreeMap<Vec<usize>, usize> = BTreeMap::new();
    for (x, y, _) in ops {
        *reads.entry(x.clone()).or_default() += 1;
        if y != x {
            *reads.entry(y.clone()).or_default() += 1;
        }
    }
    let shared: Vec<(Vec<usize>, usize)> = reads.into_iter().filter(|(_, n)| *n > 1).collect();
    let requests: Vec<(usize, usize)> = shared
        .iter()
        .flat_map(|(reg, n)| reg.iter().map(move |&w| (w, *n)))
        .collect();
    let (fan, copies, mut scratch) = fanout(b, &requests);
    let mut next_copy: BTreeMap<Vec<usize>, (Vec<Vec<usize>>, usize)> = BTreeMap::new();
    let mut offset = 0;
    for (reg, n) in &shared {
        let wires = &copies[offset..offset + reg.len()];
        offset += reg.len();
        let regs = (0..*n).map(|c| wires.iter().map(|cs| cs[c]).collect()).collect();
        next_copy.insert(reg.clone(), (regs, 0));
    }
    let mut take = |reg: &Vec<usize>| -> Vec<usize> {
        match next_copy.get_mut(reg) {
            Some((regs, i)) => {
                *i += 1;
                regs[*i - 1].clone()
            }
            None => reg.clone(),
        }
    };
    let mut blocks = Vec::new();
    for (x, y, dst) in ops {
        let cx = take(x);
        let cy = if y == x { cx.clone() } else { take(y) };
        let (blk, s) = mul_block(b, spec, &cx, &cy, dst);
        blocks.push(blk);
        scratch.extend(s);
    }
    let mut stage = fan.clone();
    stage.extend(par(blocks));
    stage.extend(reversed(&fan));
    (stage, scratch)
}

fn check_limits(spec: &FieldSpec, k: usize) -> Result<()> {
    if spec.m() > MAX_BUILD_M {
        return Err(resource(format!(
            "circuit builds support m <= {MAX_BUILD_M}, got {}",
            spec.m()
        )));
    }
    if k > MAX_BUILD_K {
        return Err(resource(format!("circuit builds support k <= {MAX_BUILD_K}, got {k}")));
    }
    Ok(())
}

fn register(name: &str, wires: Vec<usize>) -> Register {
    Register {
        name: name.to_string(),
        wires,
    }
}

/// (a, b, 0) ↦ (a, b, a·b) with all scratch restored.
pub fn build_mul_circuit(spec: &FieldSpec) -> Result<BuiltCircuit> {
    check_limits(spec, 1)?;
    let m = spec.m() as usize;
    let mut b = Builder::new();
    let a = b.fresh(WireRole::Input, m);
    let c = b.fresh(WireRole::Input, m);
    let out = b.fresh(WireRole::Output, m);
    let (layers, _) = mul_block(&mut b, spec, &a, &c, &out);
    Ok(BuiltCircuit {
        circuit: b.finish(layers)?,
        field: *spec,
        inputs: vec![register("a", a), register("b", c)],
        seeds: vec![],
        output: register("out", out),
    })
}

/// (a_0..a_{k−1}, x, 0) ↦ (a, x, Σ a_i x^i) with all scratch restored.
pub fn build_kwise_circuit(spec: &FieldSpec, k: usize, mode: KWiseMode) -> Result<BuiltCircuit> {
    if k == 0 {
        return Err(crate::error::precondition("k must be at least 1"));
    }
    check_limits(spec, k)?;
    let m = spec.m() as usize;
    let mut b = Builder::new();
    let x = b.fresh(WireRole::Input, m);
    let seeds: Vec<Vec<usize>> = (0..k).map(|_| b.fresh(WireRole::Seed, m)).collect();
    let out = b.fresh(WireRole::Output, m);
    let layers = if k == 1 {
        vec![seeds[0].iter().zip(&out).map(|(&a, &o)| Gate::Cnot(a, o)).collect()]
    } else {
        match mode {
            KWiseMode::LowDepth => low_depth(&mut b, spec, &x, &seeds, &out),
            KWiseMode::LowAncilla => low_ancilla(&mut b, spec, &x, &seeds, &out),
        }
    };
    Ok(BuiltCircuit {
        circuit: b.finish(layers)?,
        field: *spec,
        inputs: vec![register("x", x)],
        seeds: seeds
            .into_iter()
            .enumerate()
            .map(|(i, w)| register(&format!("a{i}"), w))
            .collect(),
        output: register("f", out),
    })
}

/// Squaring chain, tree products for the remaining powers, all coefficient
/// products in one stage, then a binary XOR tree of the terms.
fn low_depth(b: &mut Builder, spec: &FieldSpec, x: &[usize], seeds: &[Vec<usize>], out: &[usize]) -> Layers {
    let m = spec.m() as usize;
    let k = seeds.len();
    let mut compute = Layers::new();
    let run_stage = |b: &mut Builder, compute: &mut Layers, ops: Vec<(Vec<usize>, Vec<usize>, Vec<usize>)>| {
        let (stage, scratch) = par_muls(b, spec, &ops);
        compute.extend(stage);
        b.release(&scratch);
    };

    let mut squares = vec![x.to_vec()];
    while (1usize << squares.len()) < k {
        let last = squares.last().unwrap().clone();
        let dst = b.ancilla(m);
        run_stage(b, &mut compute, vec![(last.clone(), last, dst.clone())]);
        squares.push(dst);
    }

    let mut pending: Vec<(usize, Vec<Vec<usize>>)> = (1..k)
        .map(|j| {
            let factors = (0..squares.len())
                .filter(|&i| j >> i & 1 == 1)
                .map(|i| squares[i].clone())
                .collect();
            (j, factors)
        })
        .collect();
    while pending.iter().any(|(_, f)| f.len() > 1) {
        let mut ops = Vec::new();
        for (_, factors) in pending.iter_mut() {
            let mut next = Vec::new();
            for pair in factors.chunks(2) {
                if pair.len() == 2 {
                    let dst = b.ancilla(m);
                    ops.push((pair[0].clone(), pair[1].clone(), dst.clone()));
                    next.push(dst);
                } else {
                    next.push(pair[0].clone());
                }
            }
            *factors = next;
        }
        run_stage(b, &mut compute, ops);
    }
    let powers: Vec<Vec<usize>> = pending.into_iter().map(|(_, mut f)| f.remove(0)).collect();

    let t0 = b.ancilla(m);
    let copy_a0: Layers = vec![seeds[0].iter().zip(&t0).map(|(&a, &t)| Gate::Cnot(a, t)).collect()];
    let mut terms = vec![t0];
    let mut ops = Vec::new();
    for (i, p) in powers.iter().enumerate() {
        let dst = b.ancilla(m);
        ops.push((seeds[i + 1].clone(), p.clone(), dst.clone()));
        terms.push(dst);
    }
    let (stage, scratch) = par_muls(b, spec, &ops);
    compute.extend(par(vec![copy_a0, stage]));
    b.release(&scratch);

    let lists: Vec<Vec<usize>> = (0..m).map(|t| terms.iter().map(|r| r[t]).collect()).collect();
    let (sum, roots) = xor_trees(lists);
    compute.extend(sum);

    let mut layers = compute.clone();
    layers.push(roots.iter().zip(out).map(|(&r, &o)| Gate::Cnot(r, o)).collect());
    layers.extend(reversed(&compute));
    layers
}

/// Sequential accumulation out += a_i·A with A stepping through x^i.
///
/// A is advanced reversibly with the field inverse: B ^= A·x, then
/// A ^= B·x⁻¹ clears A (also when x = 0, where both are 0), and the roles
/// of A and B swap. Scratch is independent of k.
fn low_ancilla(b: &mut Builder, spec: &FieldSpec, x: &[usize], seeds: &[Vec<usize>], out: &[usize]) -> Layers {
    let m = spec.m() as usize;
    let k = seeds.len();
    let mul = |b: &mut Builder, p: &[usize], q: &[usize], dst: &[usize]| -> Layers {
        let (blk, scratch) = mul_block(b, spec, p, q, dst);
        b.release(&scratch);
        blk
    };

    let inv = b.ancilla(m);
    let mut inv_block = Layers::new();
    if m == 1 {
        inv_block.push(vec![Gate::Not(inv[0])]);
    } else {
        // x^{2^s−1} for s = 1..m−1, then its square x^{2^m−2} = x⁻¹.
        let mut chain = Layers::new();
        let mut chain_regs = Vec::new();
        let mut cur = x.to_vec();
        for _ in 1..m - 1 {
            let sq = b.ancilla(m);
            chain.extend(mul(b, &cur, &cur, &sq));
            let nx = b.ancilla(m);
            chain.extend(mul(b, &sq, x, &nx));
            chain_regs.push(sq);
            chain_regs.push(nx.clone());
            cur = nx;
        }
        let last = b.ancilla(m);
        chain.extend(mul(b, &cur, &cur, &last));
        chain_regs.push(last.clone());
        inv_block.extend(chain.clone());
        inv_block.push(last.iter().zip(&inv).map(|(&s, &t)| Gate::Cnot(s, t)).collect());
        inv_block.extend(reversed(&chain));
        for r in &chain_regs {
            b.release(r);
        }
    }

    let mut layers = inv_block.clone();
    layers.push(seeds[0].iter().zip(out).map(|(&a, &o)| Gate::Cnot(a, o)).collect());
    let mut acc = b.ancilla(m);
    let load_x: Vec<Gate> = x.iter().zip(&acc).map(|(&s, &t)| Gate::Cnot(s, t)).collect();
    layers.push(load_x.clone());
    let mut spare: Option<Vec<usize>> = None;
    let mut advances = Vec::new();
    for i in 1..k {
        layers.extend(mul(b, &seeds[i], &acc, out));
        if i + 1 < k {
            let other = spare.get_or_insert_with(|| b.ancilla(m)).clone();
            let mut step = mul(b, &acc, x, &other);
            step.extend(mul(b, &other, &inv, &acc));
            layers.extend(step.clone());
            advances.push(step);
            spare = Some(acc);
            acc = other;
        }
    }
    for step in advances.iter().rev() {
        layers.extend(reversed(step));
    }
    layers.push(load_x);
    layers.extend(reversed(&inv_block));
    layers
}
