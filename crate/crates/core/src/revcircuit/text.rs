//! Line-oriented text form of a [`ReversibleCircuit`].
//!
//! ```text
//! wires 6 inputs 0,1 seeds - ancilla 2,3 outputs 4,5
//! TOF 0 1 2 | NOT 3
//! CNOT 2 4
//! ```
//!
//! Role lists are comma-separated wire indices, `-` when empty. Each later
//! line is one layer with gates separated by `|`; an empty layer is `-`.

use super::{Gate, ReversibleCircuit, WireRole};
use crate::error::{Error, Result};

fn list(ws: &[usize]) -> String {
    if ws.is_empty() {
        "-".into()
    } else {
        ws.iter().map(|w| w.to_string()).collect::<Vec<_>>().join(",")
    }
}

pub fn to_text(c: &ReversibleCircuit) -> String {
    let mut s = format!(
        "wires {} inputs {} seeds {} ancilla {} outputs {}\n",
        c.width(),
        list(&c.wires_with(WireRole::Input)),
        list(&c.wires_with(WireRole::Seed)),
        list(&c.wires_with(WireRole::Ancilla)),
        list(&c.wires_with(WireRole::Output)),
    );
    for layer in c.layers() {
        if layer.is_empty() {
            s.push('-');
        } else {
            let gates: Vec<String> = layer
                .iter()
                .map(|g| match *g {
                    Gate::Not(t) => format!("NOT {t}"),
                    Gate::Cnot(c, t) => format!("CNOT {c} {t}"),
                    Gate::Toffoli(a, b, t) => format!("TOF {a} {b} {t}"),
                })
                .collect();
            s.push_str(&gates.join(" | "));
        }
        s.push('\n');
    }
    s
}

fn err(line: usize, msg: impl Into<String>) -> Error {
    Error::Parse {
        line,
        msg: msg.into(),
    }
}

fn num(tok: &str, line: usize) -> Result<usize> {
    tok.parse().map_err(|_| err(line, format!("expected a wire index, found {tok:?}")))
}

pub fn from_text(text: &str) -> Result<ReversibleCircuit> {
    let mut lines = text.lines().enumerate().map(|(i, l)| (i + 1, l.trim()));
    let (_, header) = lines.next().ok_or_else(|| err(1, "empty input"))?;
    let toks: Vec<&str> = header.split_whitespace().collect();
    let keys = ["wires", "inputs", "seeds", "ancilla", "outputs"];
    if toks.len() != 10 || (0..5).any(|i| toks[2 * i] != keys[i]) {
        return Err(err(1, "header must read: wires N inputs L seeds L ancilla L outputs L"));
    }
    let n = num(toks[1], 1)?;
    let mut roles: Vec<Option<WireRole>> = vec![None; n];
    let kinds = [WireRole::Input, WireRole::Seed, WireRole::Ancilla, WireRole::Output];
    for (i, role) in kinds.into_iter().enumerate() {
        let field = toks[3 + 2 * i];
        if field == "-" {
            continue;
        }
        for t in field.split(',') {
            let w = num(t, 1)?;
            if w >= n {
                return Err(err(1, format!("wire {w} out of range")));
            }
            if roles[w].replace(role).is_some() {
                return Err(err(1, format!("wire {w} listed twice")));
            }
        }
    }
    let roles: Vec<WireRole> = roles
        .into_iter()
        .enumerate()
        .map(|(w, r)| r.ok_or_else(|| err(1, format!("wire {w} has no role"))))
        .collect::<Result<_>>()?;

    let mut layers = Vec::new();
    for (ln, line) in lines {
        if line.is_empty() {
            continue;
        }
        let mut layer = Vec::new();
        if line != "-" {
            for g in line.split('|') {
                let t: Vec<&str> = g.split_whitespace().collect();
                let gate = match t.as_slice() {
                    ["NOT", a] => Gate::Not(num(a, ln)?),
                    ["CNOT", c, a] => Gate::Cnot(num(c, ln)?, num(a, ln)?),
                    ["TOF", c1, c2, a] => Gate::Toffoli(num(c1, ln)?, num(c2, ln)?, num(a, ln)?),
                    _ => return Err(err(ln, format!("unrecognized gate {:?}", g.trim()))),
                };
                layer.push(gate);
            }
        }
        layers.push(layer);
    }
    ReversibleCircuit::new(roles, layers).map_err(|e| match e {
        Error::Precondition(msg) => err(0, msg),
        other => other,
    })
}
