//! Shared fixtures for the benchmarks.

use glvortex::{make_sphere, solve_all, EquilibriumSet, SolveOptions, Surface};

/// Sphere with its `m = 1` equilibria at `lambda` on a mesh of `nodes`.
pub fn sphere_set(lambda: f64, nodes: usize) -> (Surface, EquilibriumSet) {
    let s = make_sphere();
    let set = solve_all(&s, 1, lambda, &SolveOptions { mesh_nodes: nodes, ..Default::default() }).expect("sphere equilibria");
    (s, set)
}
