//! Distances on the two sides of a rough isometry: an all-pairs table for a
//! finite graph window, and the word metric of a group via an identity ball.

use rayon::prelude::*;

use crate::balls::CayleyBall;
use crate::groups::{GeneratingSet, GroupElement, GroupSpec};
use crate::rough::graph::FiniteGraph;
use crate::{Error, Result};

/// All-pairs BFS distances of a (small) graph.
#[derive(Clone, Debug)]
pub struct DistanceTable {
    n: usize,
    table: Vec<u16>,
}

impl DistanceTable {
    pub fn new(graph: &FiniteGraph) -> Result<Self> {
        let n = graph.len();
        if n > 40_000 {
            return Err(Error::InvalidInput(format!(
                "all-pairs table for {n} vertices is too large"
            )));
        }
        let rows: Vec<Vec<u16>> = (0..n)
            .into_par_iter()
            .map(|s| {
                graph
                    .bfs(s)
                    .into_iter()
                    .map(|d| u16::try_from(d).unwrap_or(u16::MAX))
                    .collect()
            })
            .collect();
        Ok(DistanceTable {
            n,
            table: rows.concat(),
        })
    }

    pub fn len(&self) -> usize {
        self.n
    }

    pub fn is_empty(&self) -> bool {
        self.n == 0
    }

    #[inline]
    pub fn get(&self, x: usize, y: usize) -> u32 {
        self.table[x * self.n + y] as u32
    }
}

/// Word metric `d(g, h) = |g⁻¹h|` for `|g⁻¹h|` up to a fixed reach.
#[derive(Clone, Debug)]
pub struct WordMetric {
    spec: GroupSpec,
    ball: CayleyBall,
}

impl WordMetric {
    pub fn new(spec: &GroupSpec, generators: &GeneratingSet, reach: u32) -> Result<Self> {
        Ok(WordMetric {
            spec: spec.clone(),
            ball: CayleyBall::enumerate(spec, generators, &spec.identity(), reach)?,
        })
    }

    pub fn reach(&self) -> u32 {
        self.ball.radius()
    }

    pub fn spec(&self) -> &GroupSpec {
        &self.spec
    }

    /// `|g|`, or `None` beyond the reach.
    pub fn length(&self, g: &GroupElement) -> Option<u32> {
        self.ball.index_of(g).map(|i| self.ball.dist(i))
    }

    pub fn distance(&self, g: &GroupElement, h: &GroupElement) -> Result<Option<u32>> {
        let step = self.spec.multiply(&self.spec.inverse(g)?, h)?;
        Ok(self.length(&step))
    }

    /// The identity ball of radius `r <= reach`, in ball order (distance, then coordinates).
    pub fn offsets(&self, r: u32) -> &[GroupElement] {
        &self.ball.vertices()[..self.ball.count_within(r)]
    }

    pub fn offset_dist(&self, i: usize) -> u32 {
        self.ball.dist(i)
    }
}
