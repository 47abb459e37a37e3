//! Finite bounded-degree graphs, the edge-subdivided lattice, and harmonic
//! functions on graph windows.

use std::collections::VecDeque;

use rustc_hash::{FxHashMap, FxHashSet};

use crate::balls::CayleyBall;
use crate::groups::{GroupElement, GroupSpec};
use crate::numeric::NeumaierSum;
use crate::solver::{InteriorSystem, SolveOptions, SolveStats};
use crate::{Error, Result};

/// Simple undirected graph in CSR form: no self-loops, no multi-edges, connected.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct FiniteGraph {
    offsets: Vec<usize>,
    adj: Vec<u32>,
}

impl FiniteGraph {
    pub fn from_edges(n: usize, edges: &[(u32, u32)]) -> Result<Self> {
        if n == 0 {
            return Err(Error::InvalidInput("graph without vertices".into()));
        }
        let mut lists: Vec<Vec<u32>> = vec![Vec::new(); n];
        let mut seen = FxHashSet::default();
        for &(u, v) in edges {
            if u as usize >= n || v as usize >= n {
                return Err(Error::InvalidInput(format!("edge ({u}, {v}) out of range")));
            }
            if u == v {
                return Err(Error::InvalidInput(format!("self-loop at {u}")));
            }
            if !seen.insert((u.min(v), u.max(v))) {
                return Err(Error::InvalidInput(format!("multi-edge ({u}, {v})")));
            }
            lists[u as usize].push(v);
            lists[v as usize].push(u);
        }
        let mut offsets = Vec::with_capacity(n + 1);
        let mut adj = Vec::with_capacity(2 * edges.len());
        offsets.push(0);
        for mut l in lists {
            l.sort_unstable();
            adj.extend(l);
            offsets.push(adj.len());
        }
        let g = FiniteGraph { offsets, adj };
        if g.bfs(0).contains(&u32::MAX) {
            return Err(Error::InvalidInput("graph is not connected".into()));
        }
        Ok(g)
    }

    pub fn len(&self) -> usize {
        self.offsets.len() - 1
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn neighbors(&self, v: usize) -> &[u32] {
        &self.adj[self.offsets[v]..self.offsets[v + 1]]
    }

    pub fn degree(&self, v: usize) -> usize {
        self.offsets[v + 1] - self.offsets[v]
    }

    pub fn max_degree(&self) -> usize {
        (0..self.len()).map(|v| self.degree(v)).max().unwrap_or(0)
    }

    pub fn edge_count(&self) -> usize {
        self.adj.len() / 2
    }

    pub(crate) fn csr(&self) -> (&[usize], &[u32]) {
        (&self.offsets, &self.adj)
    }

    /// BFS distances from `src`; `u32::MAX` marks unreachable vertices.
    pub fn bfs(&self, src: usize) -> Vec<u32> {
        let mut d = vec![u32::MAX; self.len()];
        d[src] = 0;
        let mut queue = VecDeque::from([src as u32]);
        while let Some(v) = queue.pop_front() {
            let dv = d[v as usize];
            for &w in self.neighbors(v as usize) {
                if d[w as usize] == u32::MAX {
                    d[w as usize] = dv + 1;
                    queue.push_back(w);
                }
            }
        }
        d
    }

    /// Vertices within distance `r` of `src`, sorted.
    pub fn ball(&self, src: usize, r: u32) -> Vec<u32> {
        let d = self.bfs(src);
        (0..self.len() as u32).filter(|&v| d[v as usize] <= r).collect()
    }
}

/// Every lattice edge of the window `|p|₁ <= W` subdivided by a midpoint.
///
/// Vertices are stored with doubled coordinates: lattice point `p` becomes
/// `2p`, the midpoint of `p -- p + e_i` becomes `2p + e_i`. Lattice points
/// come first, in the vertex order of the lattice ball, then midpoints.
/// The window is the `X`-ball of radius `2W` about the origin.
#[derive(Clone, Debug)]
pub struct SubdividedLattice {
    pub dim: usize,
    pub window: u32,
    pub graph: FiniteGraph,
    pub doubled: Vec<GroupElement>,
    pub lattice_count: usize,
    /// `d^X(origin, v)`.
    pub depth: Vec<u32>,
    /// Canonical map to `Z^D`: lattice points to themselves, midpoints to
    /// the lexicographically smaller endpoint.
    pub phi: Vec<GroupElement>,
    pub spec: GroupSpec,
    index: FxHashMap<GroupElement, u32>,
}

pub const SUBDIVISION_A: f64 = 2.0;
pub const SUBDIVISION_B: f64 = 1.0;

pub fn make_subdivided_lattice(dim: usize, window: u32) -> Result<SubdividedLattice> {
    if !(1..=3).contains(&dim) {
        return Err(Error::InvalidInput(format!(
            "subdivided lattice is built for D in 1..=3, got {dim}"
        )));
    }
    let spec = GroupSpec::lattice(dim)?;
    let ball = CayleyBall::enumerate(&spec, &spec.standard_generators(), &spec.identity(), window)?;
    let lattice_count = ball.len();
    let mut doubled: Vec<GroupElement> = ball
        .vertices()
        .iter()
        .map(|p| GroupElement::new(p.coords().iter().map(|c| 2 * c)))
        .collect();
    let mut phi: Vec<GroupElement> = ball.vertices().to_vec();
    let mut edges = Vec::new();
    for (i, p) in ball.vertices().iter().enumerate() {
        for axis in 0..dim {
            let mut q = p.coords().to_vec();
            q[axis] += 1;
            if let Some(j) = ball.index_of(&GroupElement::new(q)) {
                let m = doubled.len() as u32;
                let mut mid = doubled[i].coords().to_vec();
                mid[axis] += 1;
                doubled.push(GroupElement::new(mid));
                phi.push(p.clone());
                edges.push((i as u32, m));
                edges.push((j as u32, m));
            }
        }
    }
    let graph = FiniteGraph::from_edges(doubled.len(), &edges)?;
    let depth = graph.bfs(0);
    let index = doubled
        .iter()
        .enumerate()
        .map(|(i, g)| (g.clone(), i as u32))
        .collect();
    Ok(SubdividedLattice {
        dim,
        window,
        graph,
        doubled,
        lattice_count,
        depth,
        phi,
        spec,
        index,
    })
}

impl SubdividedLattice {
    pub fn len(&self) -> usize {
        self.graph.len()
    }

    pub fn is_empty(&self) -> bool {
        self.graph.is_empty()
    }

    pub fn is_lattice_point(&self, v: usize) -> bool {
        v < self.lattice_count
    }

    /// Index of the vertex with the given doubled coordinates.
    pub fn index_of_doubled(&self, doubled: &GroupElement) -> Option<usize> {
        self.index.get(doubled).map(|&i| i as usize)
    }

    /// Index of lattice point `p`.
    pub fn index_of_point(&self, p: &GroupElement) -> Option<usize> {
        self.index_of_doubled(&GroupElement::new(p.coords().iter().map(|c| 2 * c)))
    }

    pub fn degree_bound(&self) -> usize {
        2 * self.dim
    }

    /// Radius in `G` within which every fiber of `phi` lies inside the window.
    pub fn complete_fiber_radius(&self) -> u32 {
        self.window.saturating_sub(1)
    }
}

/// Harmonic function on a graph window: prescribed values on the vertices
/// of maximal depth, `L u = 0` on all others.
#[derive(Clone, Debug)]
pub struct WindowHarmonic {
    pub values: Vec<f64>,
    pub stats: SolveStats,
}

/// Solves `L u = 0` on `{v : depth[v] < max depth}` with `boundary` given in
/// increasing vertex order over `{v : depth[v] = max depth}`.
pub fn solve_window_dirichlet(
    graph: &FiniteGraph,
    depth: &[u32],
    boundary: &[f64],
    opts: SolveOptions,
) -> Result<WindowHarmonic> {
    let top = *depth.iter().max().unwrap_or(&0);
    let outer: Vec<usize> = (0..graph.len()).filter(|&v| depth[v] == top).collect();
    if outer.len() != boundary.len() {
        return Err(Error::InvalidInput(format!(
            "{} boundary values for {} boundary vertices",
            boundary.len(),
            outer.len()
        )));
    }
    let mut values = vec![0.0; graph.len()];
    for (&v, &g) in outer.iter().zip(boundary) {
        values[v] = g;
    }
    let unknown: Vec<u32> = (0..graph.len() as u32).filter(|&v| depth[v as usize] < top).collect();
    let (offsets, adj) = graph.csr();
    let system = InteriorSystem::new(offsets, adj, &unknown)?;
    let stats = system.solve(offsets, adj, &mut values, opts)?;
    Ok(WindowHarmonic { values, stats })
}

/// `max |L u|` over the vertices with `depth < max depth`.
pub fn window_residual(graph: &FiniteGraph, depth: &[u32], u: &[f64]) -> f64 {
    let top = *depth.iter().max().unwrap_or(&0);
    (0..graph.len())
        .filter(|&v| depth[v] < top)
        .map(|v| {
            graph
                .neighbors(v)
                .iter()
                .map(|&w| u[w as usize] - u[v])
                .sum::<f64>()
                .abs()
        })
        .fold(0.0, f64::max)
}

/// `u(p)² |B_p(R)| / Σ_{B_p(R)} u²` on a graph; `None` when the sum vanishes.
pub fn graph_mean_value_constant(graph: &FiniteGraph, u: &[f64], p: usize, r: u32) -> Option<f64> {
    let ball = graph.ball(p, r);
    let s = ball
        .iter()
        .map(|&v| u[v as usize] * u[v as usize])
        .collect::<NeumaierSum>()
        .value();
    (s > 0.0).then(|| u[p] * u[p] * ball.len() as f64 / s)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::harmonic::solve_dirichlet;
    use std::sync::Arc;

    #[test]
    fn graph_validation() {
        assert!(FiniteGraph::from_edges(2, &[(0, 0)]).is_err());
        assert!(FiniteGraph::from_edges(2, &[(0, 1), (1, 0)]).is_err());
        assert!(FiniteGraph::from_edges(3, &[(0, 1)]).is_err());
        let g = FiniteGraph::from_edges(3, &[(0, 1), (1, 2)]).unwrap();
        assert_eq!(g.bfs(0), vec![0, 1, 2]);
        assert_eq!(g.max_degree(), 2);
    }

    #[test]
    fn path_counts() {
        let x = make_subdivided_lattice(1, 3).unwrap();
        assert_eq!(x.len(), 13);
        assert_eq!(x.lattice_count, 7);
        assert_eq!(x.graph.max_degree(), 2);
        assert_eq!(*x.depth.iter().max().unwrap(), 6);
    }

    #[test]
    fn plane_structure() {
        let x = make_subdivided_lattice(2, 4).unwrap();
        assert_eq!(x.lattice_count, 41);
        assert_eq!(x.len(), 41 + 4 * 4 * 4);
        assert_eq!(x.degree_bound(), 4);
        for v in 0..x.len() {
            let want = if x.is_lattice_point(v) { x.graph.degree(v) <= 4 } else { x.graph.degree(v) == 2 };
            assert!(want);
            let norm: i64 = x.doubled[v].coords().iter().map(|c| c.abs()).sum();
            assert_eq!(x.depth[v] as i64, norm);
        }
        let m = x.index_of_doubled(&GroupElement::new([1, 0])).unwrap();
        assert_eq!(x.phi[m], GroupElement::new([0, 0]));
        let m = x.index_of_doubled(&GroupElement::new([-1, 0])).unwrap();
        assert_eq!(x.phi[m], GroupElement::new([-1, 0]));
    }

    /// Harmonic on X is lattice-harmonic with midpoints at the endpoint average.
    #[test]
    fn window_harmonic_matches_lattice_route() {
        let w = 6;
        let x = make_subdivided_lattice(2, w).unwrap();
        let top = 2 * w;
        let outer: Vec<usize> = (0..x.len()).filter(|&v| x.depth[v] == top).collect();
        let data: Vec<f64> = outer
            .iter()
            .map(|&v| ((v * 37) % 11) as f64 - 5.0)
            .collect();
        let u = solve_window_dirichlet(&x.graph, &x.depth, &data, SolveOptions::default()).unwrap();
        assert!(window_residual(&x.graph, &x.depth, &u.values) <= u.stats.tol);

        let spec = GroupSpec::lattice(2).unwrap();
        let ball = Arc::new(
            CayleyBall::enumerate(&spec, &spec.standard_generators(), &spec.identity(), w).unwrap(),
        );
        let bdry: Vec<f64> = ball
            .boundary(w - 1)
            .unwrap()
            .iter()
            .map(|i| u.values[x.index_of_point(ball.vertex(i)).unwrap()])
            .collect();
        let lat = solve_dirichlet(&ball, w - 1, &bdry, SolveOptions::default()).unwrap();
        for i in 0..ball.len() {
            assert!((lat.field.value(i) - u.values[i]).abs() < 1e-11);
        }
        for m in x.lattice_count..x.len() {
            let ends = x.graph.neighbors(m);
            let avg = (u.values[ends[0] as usize] + u.values[ends[1] as usize]) / 2.0;
            assert!((u.values[m] - avg).abs() < 1e-11);
        }
    }

    #[test]
    fn graph_mean_value_constant_hand() {
        let g = FiniteGraph::from_edges(3, &[(0, 1), (1, 2)]).unwrap();
        assert_eq!(graph_mean_value_constant(&g, &[1.0, 2.0, 3.0], 1, 1), Some(12.0 / 14.0));
        assert_eq!(graph_mean_value_constant(&g, &[0.0; 3], 1, 1), None);
    }
}
