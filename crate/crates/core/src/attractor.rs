//! Heteroclinic connection graph of the global attractor.
//!
//! Nodes are the equilibria at a common `λ`. An edge `u → v` means a
//! heteroclinic orbit from `u` to `v`. The graph is built twice: once from
//! the index-drop-one rules (Morse blocking, zero-number blocking, liberalism)
//! closed under cascading, and once from the direct criterion "adjacent and
//! `i(u) > i(v)`". Both must agree.

use std::collections::BTreeSet;
use std::fmt::Write as _;

use serde::{Deserialize, Serialize};

use crate::equilibria::{zero_number, EquilibriumSet, VortexEquilibrium, NOISE_FLOOR};
use crate::error::{Error, Result};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Node {
    pub id: String,
    pub index: usize,
    pub zero_number: usize,
    pub d: f64,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Justification {
    PermittedByLiberalism,
    Cascaded,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum BlockReason {
    BlockedMorse,
    BlockedZeroNumber,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Edge {
    pub src: String,
    pub dst: String,
    pub justification: Justification,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct BlockedPair {
    pub src: String,
    pub dst: String,
    pub reason: BlockReason,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct ConnectionGraph {
    pub lambda: f64,
    pub m: u32,
    pub nodes: Vec<Node>,
    pub edges: Vec<Edge>,
    /// Index-drop-one pairs without an edge.
    pub blocked: Vec<BlockedPair>,
    /// Index-drop-one pairs whose zero-number verdict would change if
    /// betweenness were tested at some `s > 0` instead of at the vortex.
    pub section_sensitive: Vec<(String, String)>,
}

impl ConnectionGraph {
    pub fn edge_set(&self) -> BTreeSet<(String, String)> {
        self.edges.iter().map(|e| (e.src.clone(), e.dst.clone())).collect()
    }

    pub fn node(&self, id: &str) -> Option<&Node> {
        self.nodes.iter().find(|n| n.id == id)
    }

    /// Graphviz rendering.
    pub fn to_dot(&self) -> String {
        let mut out = String::from("digraph attractor {\n  rankdir=TB;\n");
        for n in &self.nodes {
            let _ = writeln!(out, "  \"{}\" [label=\"{}\\ni={}\"];", n.id, n.id, n.index);
        }
        for e in &self.edges {
            let style = match e.justification {
                Justification::PermittedByLiberalism => "solid",
                Justification::Cascaded => "dashed",
            };
            let _ = writeln!(out, "  \"{}\" -> \"{}\" [style={style}];", e.src, e.dst);
        }
        out.push_str("}\n");
        out
    }

    /// Invariance of the edge set under `u ↦ −u`.
    pub fn is_sign_symmetric(&self) -> bool {
        let flip = |id: &str| -> String {
            if let Some(k) = id.strip_suffix('+') {
                format!("{k}-")
            } else if let Some(k) = id.strip_suffix('-') {
                format!("{k}+")
            } else {
                id.to_string()
            }
        };
        let edges = self.edge_set();
        edges.iter().all(|(a, b)| edges.contains(&(flip(a), flip(b))))
    }
}

/// `z(a − b)` on the common mesh.
pub fn difference_zeros(a: &VortexEquilibrium, b: &VortexEquilibrium) -> Result<usize> {
    let diff: Vec<f64> = a.profile.iter().zip(&b.profile).map(|(x, y)| x - y).collect();
    zero_number(&diff, &a.mesh, NOISE_FLOOR)
}

fn strictly_between(x: f64, lo: f64, hi: f64) -> bool {
    x > lo.min(hi) && x < lo.max(hi)
}

/// An equilibrium between `e1` and `e2` at the vortex realizing the same
/// difference zero numbers, if any.
fn separating<'a>(e1: &VortexEquilibrium, e2: &VortexEquilibrium, all: &[&'a VortexEquilibrium]) -> Result<Option<&'a VortexEquilibrium>> {
    let z12 = difference_zeros(e1, e2)?;
    for &u in all {
        if !strictly_between(u.d, e1.d, e2.d) {
            continue;
        }
        if difference_zeros(e1, u)? == z12 && difference_zeros(e2, u)? == z12 {
            return Ok(Some(u));
        }
    }
    Ok(None)
}

/// No equilibrium strictly between `e1` and `e2` at the vortex (ordered by
/// `d`) with `z(e1 − u) = z(e1 − e2) = z(e2 − u)`.
pub fn adjacent(e1: &VortexEquilibrium, e2: &VortexEquilibrium, all: &[&VortexEquilibrium]) -> Result<bool> {
    Ok(separating(e1, e2, all)?.is_none())
}

/// Blocking verdict for `i(hi) = i(lo) + 1`.
pub fn blocked(hi: &VortexEquilibrium, lo: &VortexEquilibrium, all: &[&VortexEquilibrium]) -> Result<Option<BlockReason>> {
    if hi.morse_index != lo.morse_index + 1 {
        return Err(Error::InvalidArgument(format!("blocked() needs index drop one, got {} -> {}", hi.morse_index, lo.morse_index)));
    }
    if difference_zeros(hi, lo)? != lo.morse_index {
        return Ok(Some(BlockReason::BlockedMorse));
    }
    if separating(hi, lo, all)?.is_some() {
        return Ok(Some(BlockReason::BlockedZeroNumber));
    }
    Ok(None)
}

/// Zero-number verdict with betweenness tested at every mesh node.
fn blocked_at_some_section(hi: &VortexEquilibrium, lo: &VortexEquilibrium, all: &[&VortexEquilibrium]) -> Result<bool> {
    let z = difference_zeros(hi, lo)?;
    for &u in all {
        if std::ptr::eq(u, hi) || std::ptr::eq(u, lo) {
            continue;
        }
        let between = (1..u.profile.len() - 1).any(|i| strictly_between(u.profile[i], hi.profile[i], lo.profile[i]));
        if between && difference_zeros(hi, u)? == z && difference_zeros(lo, u)? == z {
            return Ok(true);
        }
    }
    Ok(false)
}

/// Connection graph of a set of equilibria at a common `λ`.
pub fn connection_graph(set: &EquilibriumSet) -> Result<ConnectionGraph> {
    graph_from(&set.all(), set.lambda, set.m)
}

pub fn graph_from(all: &[&VortexEquilibrium], lambda: f64, m: u32) -> Result<ConnectionGraph> {
    let nodes: Vec<Node> =
        all.iter().map(|e| Node { id: e.label(), index: e.morse_index, zero_number: e.zero_number, d: e.d }).collect();
    let n = all.len();
    let mut direct_one = vec![vec![false; n]; n];
    let mut blocked_pairs = Vec::new();
    let mut section_sensitive = Vec::new();
    for i in 0..n {
        for j in 0..n {
            if all[i].morse_index != all[j].morse_index + 1 {
                continue;
            }
            let verdict = blocked(all[i], all[j], all)?;
            match verdict {
                None => direct_one[i][j] = true,
                Some(reason) => blocked_pairs.push(BlockedPair { src: nodes[i].id.clone(), dst: nodes[j].id.clone(), reason }),
            }
            if verdict != Some(BlockReason::BlockedMorse) {
                let zero_blocked = verdict == Some(BlockReason::BlockedZeroNumber);
                if blocked_at_some_section(all[i], all[j], all)? != zero_blocked {
                    section_sensitive.push((nodes[i].id.clone(), nodes[j].id.clone()));
                }
            }
        }
    }
    // cascade: transitive closure of the index-drop-one edges
    let mut reach = direct_one.clone();
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by_key(|&i| all[i].morse_index);
    for &i in &order {
        for j in 0..n {
            if direct_one[i][j] {
                for t in 0..n {
                    if reach[j][t] {
                        reach[i][t] = true;
                    }
                }
            }
        }
    }
    let mut edges = Vec::new();
    for i in 0..n {
        for j in 0..n {
            let direct = all[i].morse_index > all[j].morse_index && adjacent(all[i], all[j], all)?;
            if reach[i][j] != direct {
                return Err(Error::RuleDisagreement(format!(
                    "{} -> {}: construction says {}, adjacency criterion says {}",
                    nodes[i].id, nodes[j].id, reach[i][j], direct
                )));
            }
            if reach[i][j] {
                let justification = if direct_one[i][j] { Justification::PermittedByLiberalism } else { Justification::Cascaded };
                edges.push(Edge { src: nodes[i].id.clone(), dst: nodes[j].id.clone(), justification });
            }
        }
    }
    Ok(ConnectionGraph { lambda, m, nodes, edges, blocked: blocked_pairs, section_sensitive })
}

/// The Chafee–Infante graph for `λ ∈ (λ_k, λ_{k+1})`: the trivial node of
/// index `k + 1`, nodes `j±` of index `j ≤ k`, and an edge from every node to
/// every node of lower index.
pub fn is_chafee_infante(graph: &ConnectionGraph, k: usize) -> bool {
    let mut want_nodes = vec![("O".to_string(), k + 1)];
    for j in 0..=k {
        want_nodes.push((format!("{j}+"), j));
        want_nodes.push((format!("{j}-"), j));
    }
    if graph.nodes.len() != want_nodes.len() {
        return false;
    }
    for (id, index) in &want_nodes {
        match graph.node(id) {
            Some(n) if n.index == *index => {}
            _ => return false,
        }
    }
    let mut want_edges = BTreeSet::new();
    for (a, ia) in &want_nodes {
        for (b, ib) in &want_nodes {
            if ia > ib {
                want_edges.insert((a.clone(), b.clone()));
            }
        }
    }
    graph.edge_set() == want_edges
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::equilibria::{solve_all, SolveOptions};
    use crate::geometry::make_sphere;

    fn graph(lambda: f64) -> ConnectionGraph {
        connection_graph(&solve_all(&make_sphere(), 1, lambda, &SolveOptions::default()).unwrap()).unwrap()
    }

    #[test]
    fn below_first_point_single_node() {
        let g = graph(1.0);
        assert_eq!(g.nodes.len(), 1);
        assert!(g.edges.is_empty());
        assert!(!is_chafee_infante(&g, 0));
    }

    #[test]
    fn figure_a_graph() {
        let g = graph(4.0);
        let want: BTreeSet<(String, String)> =
            [("O", "0+"), ("O", "0-")].iter().map(|(a, b)| (a.to_string(), b.to_string())).collect();
        assert_eq!(g.edge_set(), want);
        assert!(is_chafee_infante(&g, 0));
        assert!(g.is_sign_symmetric());
    }

    #[test]
    fn figure_b_graph() {
        let g = graph(8.0);
        assert_eq!(g.nodes.len(), 5);
        assert_eq!(g.edges.len(), 8);
        assert!(is_chafee_infante(&g, 1));
        let mut broken = g.clone();
        broken.edges.retain(|e| !(e.src == "1+" && e.dst == "0-"));
        assert!(!is_chafee_infante(&broken, 1));
    }

    #[test]
    fn principal_pair_not_adjacent() {
        let set = solve_all(&make_sphere(), 1, 4.0, &SolveOptions::default()).unwrap();
        let all = set.all();
        assert!(!adjacent(&set.nontrivial[0], &set.nontrivial[1], &all).unwrap());
        assert!(adjacent(&set.trivial, &set.nontrivial[0], &all).unwrap());
    }

    #[test]
    fn contrived_morse_block() {
        let set = solve_all(&make_sphere(), 1, 8.0, &SolveOptions::default()).unwrap();
        let mut hi = set.nontrivial[2].clone();
        let lo = set.nontrivial[0].clone();
        // a profile with two sign changes relative to lo
        for (i, v) in hi.profile.iter_mut().enumerate() {
            let s = hi.mesh[i];
            *v = lo.profile[i] + 0.1 * (s * (std::f64::consts::PI - s)) * (2.0 * s).cos();
        }
        assert_eq!(difference_zeros(&hi, &lo).unwrap(), 2);
        assert_eq!(blocked(&hi, &lo, &[&hi, &lo]).unwrap(), Some(BlockReason::BlockedMorse));
    }
}
