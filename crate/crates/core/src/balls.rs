//! Word-metric balls `B_p(n)` enumerated by breadth-first search.
//!
//! Vertices are ordered by BFS layer and, inside a layer, lexicographically by
//! coordinates. A consequence used throughout the crate: the vertices of a
//! concentric ball of smaller radius form a prefix of the vertex list.

use std::collections::VecDeque;

use rayon::prelude::*;
use rustc_hash::{FxHashMap, FxHashSet};
use smallvec::SmallVec;

use crate::groups::{GeneratingSet, GroupElement, GroupSpec};
use crate::{Error, Result};

pub const DEFAULT_MAX_VERTICES: usize = 20_000_000;

#[derive(Clone, Debug, PartialEq)]
pub struct CayleyBall {
    spec: GroupSpec,
    generators: GeneratingSet,
    center: GroupElement,
    radius: u32,
    vertices: Vec<GroupElement>,
    dist: Vec<u32>,
    adj_offsets: Vec<usize>,
    adj: Vec<u32>,
    /// `layer_ends[k]` is the number of vertices at distance `<= k`.
    layer_ends: Vec<usize>,
    element_index: FxHashMap<GroupElement, u32>,
}

/// A sorted, deduplicated set of vertex indices of some ball.
#[derive(Clone, Debug, PartialEq, Eq, Default)]
pub struct VertexSubset {
    indices: Vec<u32>,
}

impl VertexSubset {
    pub fn new(mut indices: Vec<u32>, ball_len: usize) -> Result<Self> {
        indices.sort_unstable();
        indices.dedup();
        if let Some(&last) = indices.last() {
            if last as usize >= ball_len {
                return Err(Error::InvalidInput(format!(
                    "vertex index {last} out of range for a ball with {ball_len} vertices"
                )));
            }
        }
        Ok(VertexSubset { indices })
    }

    fn range(lo: usize, hi: usize) -> Self {
        VertexSubset {
            indices: (lo as u32..hi as u32).collect(),
        }
    }

    pub fn indices(&self) -> &[u32] {
        &self.indices
    }

    pub fn iter(&self) -> impl Iterator<Item = usize> + '_ {
        self.indices.iter().map(|&i| i as usize)
    }

    pub fn len(&self) -> usize {
        self.indices.len()
    }

    pub fn is_empty(&self) -> bool {
        self.indices.is_empty()
    }

    pub fn contains(&self, i: usize) -> bool {
        self.indices.binary_search(&(i as u32)).is_ok()
    }
}

impl CayleyBall {
    pub fn enumerate(
        spec: &GroupSpec,
        generators: &GeneratingSet,
        center: &GroupElement,
        radius: u32,
    ) -> Result<Self> {
        Self::enumerate_with_cap(spec, generators, center, radius, DEFAULT_MAX_VERTICES)
    }

    pub fn enumerate_with_cap(
        spec: &GroupSpec,
        generators: &GeneratingSet,
        center: &GroupElement,
        radius: u32,
        max_vertices: usize,
    ) -> Result<Self> {
        spec.validate()?;
        if !spec.conforms(center) {
            return Err(Error::RepresentationMismatch {
                spec: spec.text(),
                element: center.to_string(),
            });
        }
        if !generators.is_symmetric(spec) {
            return Err(Error::InvalidGenerators("generating set is not symmetric".into()));
        }
        let gens = generators.elements();

        let mut vertices = vec![center.clone()];
        let mut dist = vec![0u32];
        let mut layer_ends = vec![1usize];
        let mut element_index = FxHashMap::default();
        element_index.insert(center.clone(), 0u32);

        let mut start = 0;
        for layer in 1..=radius {
            let end = vertices.len();
            let mut fresh: FxHashSet<GroupElement> = FxHashSet::default();
            for v in &vertices[start..end] {
                for s in gens {
                    let w = spec.multiply_unchecked(v, s)?;
                    if !element_index.contains_key(&w) {
                        fresh.insert(w);
                    }
                }
            }
            let mut fresh: Vec<GroupElement> = fresh.into_iter().collect();
            fresh.sort_unstable();
            if vertices.len() + fresh.len() > max_vertices {
                return Err(Error::MemoryCap { cap: max_vertices });
            }
            for w in fresh {
                element_index.insert(w.clone(), vertices.len() as u32);
                vertices.push(w);
                dist.push(layer);
            }
            layer_ends.push(vertices.len());
            start = end;
        }

        let lists: Vec<SmallVec<[u32; 8]>> = vertices
            .par_iter()
            .map(|v| -> Result<SmallVec<[u32; 8]>> {
                let mut out = SmallVec::new();
                for s in gens {
                    let w = spec.multiply_unchecked(v, s)?;
                    if let Some(&j) = element_index.get(&w) {
                        out.push(j);
                    }
                }
                Ok(out)
            })
            .collect::<Result<_>>()?;
        let mut adj_offsets = Vec::with_capacity(vertices.len() + 1);
        let mut adj = Vec::with_capacity(vertices.len() * gens.len());
        adj_offsets.push(0);
        for l in lists {
            adj.extend_from_slice(&l);
            adj_offsets.push(adj.len());
        }

        Ok(CayleyBall {
            spec: spec.clone(),
            generators: generators.clone(),
            center: center.clone(),
            radius,
            vertices,
            dist,
            adj_offsets,
            adj,
            layer_ends,
            element_index,
        })
    }

    /// Reassembles a ball from stored parts; used by the cache loader.
    #[allow(clippy::too_many_arguments)]
    pub(crate) fn from_parts(
        spec: GroupSpec,
        generators: GeneratingSet,
        center: GroupElement,
        radius: u32,
        vertices: Vec<GroupElement>,
        dist: Vec<u32>,
        adj_offsets: Vec<usize>,
        adj: Vec<u32>,
    ) -> Result<Self> {
        let n = vertices.len();
        if dist.len() != n || adj_offsets.len() != n + 1 {
            return Err(Error::InvalidInput("inconsistent ball arrays".into()));
        }
        if adj.iter().any(|&j| j as usize >= n) {
            return Err(Error::InvalidInput("adjacency index out of range".into()));
        }
        let mut layer_ends = vec![0usize; radius as usize + 1];
        for &d in &dist {
            if d > radius {
                return Err(Error::InvalidInput("distance label exceeds radius".into()));
            }
            layer_ends[d as usize] += 1;
        }
        for k in 1..layer_ends.len() {
            layer_ends[k] += layer_ends[k - 1];
        }
        let element_index = vertices
            .iter()
            .enumerate()
            .map(|(i, v)| (v.clone(), i as u32))
            .collect();
        Ok(CayleyBall {
            spec,
            generators,
            center,
            radius,
            vertices,
            dist,
            adj_offsets,
            adj,
            layer_ends,
            element_index,
        })
    }

    pub fn spec(&self) -> &GroupSpec {
        &self.spec
    }

    pub fn generators(&self) -> &GeneratingSet {
        &self.generators
    }

    pub fn center(&self) -> &GroupElement {
        &self.center
    }

    pub fn radius(&self) -> u32 {
        self.radius
    }

    pub fn len(&self) -> usize {
        self.vertices.len()
    }

    pub fn is_empty(&self) -> bool {
        self.vertices.is_empty()
    }

    pub fn vertices(&self) -> &[GroupElement] {
        &self.vertices
    }

    pub fn vertex(&self, i: usize) -> &GroupElement {
        &self.vertices[i]
    }

    pub fn dist(&self, i: usize) -> u32 {
        self.dist[i]
    }

    pub fn dists(&self) -> &[u32] {
        &self.dist
    }

    pub fn neighbors(&self, i: usize) -> &[u32] {
        &self.adj[self.adj_offsets[i]..self.adj_offsets[i + 1]]
    }

    pub(crate) fn adjacency_parts(&self) -> (&[usize], &[u32]) {
        (&self.adj_offsets, &self.adj)
    }

    pub fn degree(&self, i: usize) -> usize {
        self.adj_offsets[i + 1] - self.adj_offsets[i]
    }

    /// Whether every generator step from vertex `i` stays inside the ball.
    pub fn has_full_neighborhood(&self, i: usize) -> bool {
        self.degree(i) == self.generators.len()
    }

    pub fn index_of(&self, g: &GroupElement) -> Option<usize> {
        self.element_index.get(g).map(|&i| i as usize)
    }

    /// Number of vertices at distance `<= r` from the center.
    pub fn count_within(&self, r: u32) -> usize {
        self.layer_ends[r.min(self.radius) as usize]
    }

    /// Sizes of the spheres `S(0), .., S(radius)`.
    pub fn layer_sizes(&self) -> Vec<usize> {
        let mut prev = 0;
        self.layer_ends
            .iter()
            .map(|&e| {
                let s = e - prev;
                prev = e;
                s
            })
            .collect()
    }

    /// Number of undirected edges with both endpoints in the ball.
    pub fn edge_count(&self) -> usize {
        self.adj.len() / 2
    }

    /// `{v : dist[v] <= r}`.
    pub fn interior(&self, r: u32) -> VertexSubset {
        VertexSubset::range(0, self.count_within(r))
    }

    /// `{v : dist[v] = r}`.
    pub fn sphere(&self, r: u32) -> VertexSubset {
        if r > self.radius {
            return VertexSubset::default();
        }
        let lo = if r == 0 { 0 } else { self.layer_ends[r as usize - 1] };
        VertexSubset::range(lo, self.layer_ends[r as usize])
    }

    /// The vertex boundary `∂B(r)`, which for balls is the sphere of radius `r + 1`.
    pub fn boundary(&self, r: u32) -> Result<VertexSubset> {
        if r >= self.radius {
            return Err(Error::InvalidInput(format!(
                "boundary of B({r}) needs a ball of radius > {r}, have {}",
                self.radius
            )));
        }
        Ok(self.sphere(r + 1))
    }

    /// The concentric ball of radius `r <= radius`, sharing this ball's vertex order.
    pub fn truncate(&self, r: u32) -> Result<CayleyBall> {
        if r > self.radius {
            return Err(Error::InvalidInput(format!(
                "cannot truncate a radius {} ball to radius {r}",
                self.radius
            )));
        }
        let n = self.count_within(r);
        let mut adj_offsets = Vec::with_capacity(n + 1);
        let mut adj = Vec::new();
        adj_offsets.push(0);
        for i in 0..n {
            adj.extend(self.neighbors(i).iter().copied().filter(|&j| (j as usize) < n));
            adj_offsets.push(adj.len());
        }
        let vertices = self.vertices[..n].to_vec();
        let element_index = vertices
            .iter()
            .enumerate()
            .map(|(i, v)| (v.clone(), i as u32))
            .collect();
        Ok(CayleyBall {
            spec: self.spec.clone(),
            generators: self.generators.clone(),
            center: self.center.clone(),
            radius: r,
            vertices,
            dist: self.dist[..n].to_vec(),
            adj_offsets,
            adj,
            layer_ends: self.layer_ends[..=r as usize].to_vec(),
            element_index,
        })
    }

    /// Whether `smaller` is a concentric truncation of this ball, so that its
    /// vertices are a prefix of ours.
    pub fn has_prefix(&self, smaller: &CayleyBall) -> bool {
        smaller.radius <= self.radius
            && smaller.spec == self.spec
            && smaller.generators == self.generators
            && smaller.center == self.center
    }

    /// BFS distances from vertex `p` using only edges inside the ball;
    /// unreachable vertices get `u32::MAX`.
    pub fn distances_from(&self, p: usize) -> Vec<u32> {
        let mut d = vec![u32::MAX; self.len()];
        d[p] = 0;
        let mut queue = VecDeque::from([p]);
        while let Some(v) = queue.pop_front() {
            for &w in self.neighbors(v) {
                if d[w as usize] == u32::MAX {
                    d[w as usize] = d[v] + 1;
                    queue.push_back(w as usize);
                }
            }
        }
        d
    }

    /// The ball `B_p(r)` around vertex `p` as a vertex subset. Requires
    /// `dist[p] + r <= radius`, which guarantees the whole ball and all of
    /// its geodesics from `p` lie inside this one.
    pub fn sub_ball(&self, p: usize, r: u32) -> Result<VertexSubset> {
        if self.dist[p] + r > self.radius {
            return Err(Error::InvalidInput(format!(
                "B_p({r}) around a vertex at distance {} does not fit in radius {}",
                self.dist[p], self.radius
            )));
        }
        let mut d: FxHashMap<u32, u32> = FxHashMap::default();
        d.insert(p as u32, 0);
        let mut queue = VecDeque::from([p as u32]);
        while let Some(v) = queue.pop_front() {
            let dv = d[&v];
            if dv == r {
                continue;
            }
            for &w in self.neighbors(v as usize) {
                if let std::collections::hash_map::Entry::Vacant(e) = d.entry(w) {
                    e.insert(dv + 1);
                    queue.push_back(w);
                }
            }
        }
        VertexSubset::new(d.into_keys().collect(), self.len())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn ball(spec: &GroupSpec, r: u32) -> CayleyBall {
        CayleyBall::enumerate(spec, &spec.standard_generators(), &spec.identity(), r).unwrap()
    }

    fn l1_ball_count(dim: usize, r: i64) -> usize {
        // brute-force lattice count over the bounding cube
        let side = 2 * r + 1;
        (0..side.pow(dim as u32))
            .filter(|&k| {
                let mut k = k;
                let mut s = 0;
                for _ in 0..dim {
                    s += (k % side - r).abs();
                    k /= side;
                }
                s <= r
            })
            .count()
    }

    #[test]
    fn small_balls() {
        let z2 = GroupSpec::lattice(2).unwrap();
        let b = ball(&z2, 1);
        assert_eq!(b.len(), 5);
        assert_eq!(b.layer_sizes(), vec![1, 4]);
        assert_eq!(b.vertex(0), &z2.identity());

        let b0 = ball(&GroupSpec::Heisenberg, 0);
        assert_eq!(b0.len(), 1);
        assert_eq!(b0.edge_count(), 0);
        assert_eq!(ball(&GroupSpec::Heisenberg, 1).len(), 5);
    }

    #[test]
    fn lattice_balls_match_brute_force() {
        for dim in 1..=3 {
            let spec = GroupSpec::lattice(dim).unwrap();
            let b = ball(&spec, 6);
            for r in 0..=6 {
                assert_eq!(b.count_within(r), l1_ball_count(dim, r as i64));
            }
        }
    }

    #[test]
    fn boundaries() {
        let z2 = GroupSpec::lattice(2).unwrap();
        let b = ball(&z2, 2);
        let bd = b.boundary(1).unwrap();
        assert_eq!(bd.len(), 8);
        assert!(bd.iter().all(|i| b.dist(i) == 2));

        let z1 = GroupSpec::lattice(1).unwrap();
        let b = ball(&z1, 2);
        let bd: Vec<_> = b.boundary(1).unwrap().iter().map(|i| b.vertex(i).clone()).collect();
        assert_eq!(bd, vec![GroupElement::new([-2]), GroupElement::new([2])]);
        assert!(b.boundary(2).is_err());
    }

    #[test]
    fn adjacency_matches_group_law() {
        for spec in [
            GroupSpec::lattice(2).unwrap(),
            GroupSpec::Heisenberg,
            "z1xZ5".parse().unwrap(),
        ] {
            let b = ball(&spec, 4);
            let gens = spec.standard_generators();
            for i in 0..b.len() {
                let x = b.vertex(i);
                let xinv = spec.inverse(x).unwrap();
                let nbrs: FxHashSet<u32> = b.neighbors(i).iter().copied().collect();
                for j in 0..b.len() {
                    let step = spec.multiply(&xinv, b.vertex(j)).unwrap();
                    assert_eq!(gens.elements().contains(&step), nbrs.contains(&(j as u32)));
                }
                assert!(b.degree(i) <= gens.len());
                if b.dist(i) < b.radius() {
                    assert!(b.has_full_neighborhood(i));
                }
            }
        }
    }

    #[test]
    fn ball_size_is_center_independent() {
        let h = GroupSpec::Heisenberg;
        let gens = h.standard_generators();
        let sizes: Vec<usize> = [[0, 0, 0], [3, -2, 7], [-5, 1, -4]]
            .iter()
            .map(|c| {
                CayleyBall::enumerate(&h, &gens, &GroupElement::new(*c), 5)
                    .unwrap()
                    .len()
            })
            .collect();
        assert!(sizes.windows(2).all(|w| w[0] == w[1]));
    }

    #[test]
    fn metric_is_symmetric() {
        let h = GroupSpec::Heisenberg;
        let gens = h.standard_generators();
        let b = ball(&h, 4);
        for i in (0..b.len()).step_by(b.len() / 10) {
            let around = CayleyBall::enumerate(&h, &gens, b.vertex(i), 4).unwrap();
            let back = around.index_of(&h.identity()).expect("center within distance 4");
            assert_eq!(around.dist(back), b.dist(i));
        }
    }

    #[test]
    fn truncation_is_a_prefix() {
        let h = GroupSpec::Heisenberg;
        let big = ball(&h, 6);
        let small = ball(&h, 4);
        assert_eq!(big.truncate(4).unwrap(), small);
        assert!(big.has_prefix(&small));
        assert_eq!(&big.vertices()[..small.len()], small.vertices());
    }

    #[test]
    fn sub_balls_are_translates() {
        let z2 = GroupSpec::lattice(2).unwrap();
        let b = ball(&z2, 5);
        let p = b.index_of(&GroupElement::new([1, 0])).unwrap();
        let sb = b.sub_ball(p, 1).unwrap();
        assert_eq!(sb.len(), 5);
        assert!(b.sub_ball(p, 5).is_err());
        let h = GroupSpec::Heisenberg;
        let b = ball(&h, 6);
        let p = b.index_of(&GroupElement::new([1, 1, 1])).unwrap();
        assert_eq!(b.sub_ball(p, 3).unwrap().len(), ball(&h, 3).len());
    }

    #[test]
    fn memory_cap_is_enforced() {
        let z3 = GroupSpec::lattice(3).unwrap();
        let err = CayleyBall::enumerate_with_cap(
            &z3,
            &z3.standard_generators(),
            &z3.identity(),
            10,
            100,
        )
        .unwrap_err();
        assert!(matches!(err, Error::MemoryCap { cap: 100 }));
    }
}
