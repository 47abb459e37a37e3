//! Matrix-free Dirichlet solver for the graph Laplacian
//! `L u(x) = Σ_{y~x} (u(y) - u(x))`.
//!
//! Unknowns are a set of vertices whose neighbours all carry either an unknown
//! or a prescribed value. The interior system `deg(x) u(x) - Σ_{y~x, y unknown}
//! u(y) = Σ_{y~x, y known} g(y)` is symmetric positive definite on a connected
//! graph with nonempty boundary, and is solved by Jacobi-preconditioned
//! conjugate gradients with a Gauss–Seidel fallback.

use rayon::prelude::*;

use crate::numeric::{dot, max_abs};
use crate::{Error, Result};

const NONE: u32 = u32::MAX;
const PAR_MIN: usize = 16_384;

#[derive(Clone, Copy, Debug, PartialEq, Default)]
pub struct SolveOptions {
    /// Absolute bound on `max |L u|` over the unknowns; `None` selects
    /// `max(1e-12 * max|g|, 1e-14)`.
    pub tol: Option<f64>,
    pub max_iter: Option<usize>,
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct SolveStats {
    pub residual: f64,
    pub iterations: usize,
    pub tol: f64,
}

pub fn default_tolerance(boundary_max_abs: f64) -> f64 {
    (1e-12 * boundary_max_abs).max(1e-14)
}

/// The interior operator restricted to the unknowns, in local numbering.
pub struct InteriorSystem {
    unknown: Vec<u32>,
    deg: Vec<f64>,
    offsets: Vec<usize>,
    adj: Vec<u32>,
}

impl InteriorSystem {
    /// `offsets`/`adj` describe the whole graph in CSR form.
    pub fn new(offsets: &[usize], adj: &[u32], unknown: &[u32]) -> Result<Self> {
        let n = offsets.len() - 1;
        let mut local = vec![NONE; n];
        for (i, &v) in unknown.iter().enumerate() {
            if local[v as usize] != NONE {
                return Err(Error::InvalidInput(format!("unknown vertex {v} listed twice")));
            }
            local[v as usize] = i as u32;
        }
        let mut deg = Vec::with_capacity(unknown.len());
        let mut loc_offsets = Vec::with_capacity(unknown.len() + 1);
        let mut loc_adj = Vec::new();
        loc_offsets.push(0);
        for &v in unknown {
            let nbrs = &adj[offsets[v as usize]..offsets[v as usize + 1]];
            deg.push(nbrs.len() as f64);
            loc_adj.extend(nbrs.iter().map(|&w| local[w as usize]).filter(|&j| j != NONE));
            loc_offsets.push(loc_adj.len());
        }
        Ok(InteriorSystem {
            unknown: unknown.to_vec(),
            deg,
            offsets: loc_offsets,
            adj: loc_adj,
        })
    }

    pub fn len(&self) -> usize {
        self.unknown.len()
    }

    pub fn is_empty(&self) -> bool {
        self.unknown.is_empty()
    }

    fn row_apply(&self, i: usize, x: &[f64]) -> f64 {
        let mut s = self.deg[i] * x[i];
        for &j in &self.adj[self.offsets[i]..self.offsets[i + 1]] {
            s -= x[j as usize];
        }
        s
    }

    fn apply(&self, x: &[f64], out: &mut [f64]) {
        if x.len() >= PAR_MIN {
            out.par_iter_mut()
                .enumerate()
                .with_min_len(4096)
                .for_each(|(i, o)| *o = self.row_apply(i, x));
        } else {
            for (i, o) in out.iter_mut().enumerate() {
                *o = self.row_apply(i, x);
            }
        }
    }

    fn residual(&self, b: &[f64], x: &[f64], r: &mut [f64]) -> f64 {
        self.apply(x, r);
        for (ri, bi) in r.iter_mut().zip(b) {
            *ri = bi - *ri;
        }
        max_abs(r)
    }

    fn pcg(&self, b: &[f64], x: &mut [f64], target: f64, max_iter: usize) -> usize {
        let m = self.len();
        let mut r = vec![0.0; m];
        if self.residual(b, x, &mut r) <= target {
            return 0;
        }
        let mut z: Vec<f64> = r.iter().zip(&self.deg).map(|(ri, d)| ri / d).collect();
        let mut p = z.clone();
        let mut ap = vec![0.0; m];
        let mut rz = dot(&r, &z);
        for it in 1..=max_iter {
            self.apply(&p, &mut ap);
            let pap = dot(&p, &ap);
            if pap <= 0.0 || !pap.is_finite() {
                return it;
            }
            let alpha = rz / pap;
            for i in 0..m {
                x[i] += alpha * p[i];
                r[i] -= alpha * ap[i];
            }
            if max_abs(&r) <= target {
                return it;
            }
            for i in 0..m {
                z[i] = r[i] / self.deg[i];
            }
            let rz_new = dot(&r, &z);
            let beta = rz_new / rz;
            rz = rz_new;
            for i in 0..m {
                p[i] = z[i] + beta * p[i];
            }
        }
        max_iter
    }

    fn gauss_seidel(&self, b: &[f64], x: &mut [f64], sweeps: usize) {
        for _ in 0..sweeps {
            for i in 0..self.len() {
                let mut s = b[i];
                for &j in &self.adj[self.offsets[i]..self.offsets[i + 1]] {
                    s += x[j as usize];
                }
                x[i] = s / self.deg[i];
            }
        }
    }

    /// Solves in place: `values` holds the prescribed data on known vertices
    /// and receives the solution on the unknowns.
    pub fn solve(
        &self,
        graph_offsets: &[usize],
        graph_adj: &[u32],
        values: &mut [f64],
        opts: SolveOptions,
    ) -> Result<SolveStats> {
        let m = self.len();
        let mut is_unknown = vec![false; values.len()];
        for &v in &self.unknown {
            is_unknown[v as usize] = true;
        }
        let mut b = vec![0.0; m];
        let (mut gmin, mut gmax, mut gsum, mut gcount) = (f64::INFINITY, f64::NEG_INFINITY, 0.0, 0usize);
        for (i, &v) in self.unknown.iter().enumerate() {
            for &w in &graph_adj[graph_offsets[v as usize]..graph_offsets[v as usize + 1]] {
                if !is_unknown[w as usize] {
                    let g = values[w as usize];
                    if !g.is_finite() {
                        return Err(Error::InvalidInput(format!("non-finite boundary value at {w}")));
                    }
                    b[i] += g;
                    gmin = gmin.min(g);
                    gmax = gmax.max(g);
                    gsum += g;
                    gcount += 1;
                }
            }
        }
        if m == 0 {
            return Ok(SolveStats {
                residual: 0.0,
                iterations: 0,
                tol: opts.tol.unwrap_or(1e-14),
            });
        }
        if gcount == 0 {
            return Err(Error::InvalidInput("Dirichlet problem without boundary".into()));
        }
        let tol = opts
            .tol
            .unwrap_or_else(|| default_tolerance(gmin.abs().max(gmax.abs())));
        let max_iter = opts.max_iter.unwrap_or(10_000 + 4 * m);

        let mut x = vec![gsum / gcount as f64; m];
        let mut r = vec![0.0; m];
        let target = 1e-3 * tol;
        let mut iterations = 0;
        let mut best = self.residual(&b, &x, &mut r);
        let mut best_x = x.clone();
        for _ in 0..6 {
            if best <= target || iterations >= max_iter {
                break;
            }
            iterations += self.pcg(&b, &mut x, target, max_iter - iterations);
            let res = self.residual(&b, &x, &mut r);
            let improved = res < 0.5 * best;
            if res < best {
                best = res;
                best_x.copy_from_slice(&x);
            }
            if !improved {
                break;
            }
        }
        x = best_x;
        if best > tol {
            for _ in 0..50 {
                self.gauss_seidel(&b, &mut x, 20);
                iterations += 20;
                best = self.residual(&b, &x, &mut r);
                if best <= tol {
                    break;
                }
            }
        }
        // Rounding can push values a few ulps past the boundary range; the
        // exact solution satisfies the maximum principle, so clamp.
        for xi in x.iter_mut() {
            *xi = xi.clamp(gmin, gmax);
        }
        let residual = self.residual(&b, &x, &mut r);
        if residual > tol {
            return Err(Error::NonConvergence {
                residual,
                iterations,
                tol,
            });
        }
        for (i, &v) in self.unknown.iter().enumerate() {
            values[v as usize] = x[i];
        }
        Ok(SolveStats {
            residual,
            iterations,
            tol,
        })
    }
}

/// One-shot helper around [`InteriorSystem`].
pub fn solve_dirichlet_graph(
    offsets: &[usize],
    adj: &[u32],
    unknown: &[u32],
    values: &mut [f64],
    opts: SolveOptions,
) -> Result<SolveStats> {
    InteriorSystem::new(offsets, adj, unknown)?.solve(offsets, adj, values, opts)
}
