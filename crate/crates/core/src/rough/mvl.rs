//! Mean-value stability of extended harmonic functions on `Z^D × Z_q`,
//! built from the subdivided lattice and its canonical map.

use std::sync::Arc;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::balls::CayleyBall;
use crate::groups::GroupElement;
use crate::rough::extension::{mvl_constant, w_radius, ProductExtension, Provenance};
use crate::rough::graph::{graph_mean_value_constant, make_subdivided_lattice, solve_window_dirichlet};
use crate::rough::{injectivize, RoughIsometry};
use crate::solver::SolveOptions;
use crate::{Error, Result};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct MvlSuiteConfig {
    pub dim: usize,
    pub fields: usize,
    pub seed: u64,
    pub radii: Vec<u32>,
    /// Elements of `Z^D × Z_q`, residue last.
    pub probes: Vec<Vec<i64>>,
    pub stability_bound: f64,
    pub alpha: i64,
    pub beta: i64,
}

impl Default for MvlSuiteConfig {
    fn default() -> Self {
        MvlSuiteConfig {
            dim: 2,
            fields: 20,
            seed: crate::inequalities::DEFAULT_SEED,
            radii: vec![10, 20, 40],
            probes: vec![vec![0, 0, 0], vec![1, 0, 0], vec![0, 0, 5], vec![2, 1, 3]],
            stability_bound: 10.0,
            alpha: 2,
            beta: 3,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct MvlRow {
    pub r: u32,
    /// Largest constant over fields and probes.
    pub max_c: f64,
    pub min_c: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct LinearityReport {
    pub fields: usize,
    pub alpha: i64,
    pub beta: i64,
    /// Integer numerators and denominators agree exactly.
    pub exact: bool,
    /// Largest `|E(αu+βv) - (αEu + βEv)|` on float fields.
    pub float_max_dev: f64,
    /// `ũ(φ′(x)) = u(x)` for every source whose image is in the region.
    pub injective: bool,
    pub direct_vertices: usize,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct MvlSuiteReport {
    pub config: MvlSuiteConfig,
    pub q: u64,
    pub w_radius: u32,
    pub w_rule: String,
    pub window: u32,
    pub region_radius: u32,
    /// Calibrated lower end of the probe grid, `max{6ab, 2b/a, 10}`.
    pub radius_floor: u32,
    /// Requested radii under the floor; reported, not excluded.
    pub below_floor: Vec<u32>,
    pub x_vertices: usize,
    pub region_vertices: usize,
    pub max_solver_residual: f64,
    pub rows: Vec<MvlRow>,
    /// `max_R max C / min_R max C`.
    pub ratio: f64,
    pub stable: bool,
    pub sup_norm_ok: bool,
    /// Same statistic for `u` itself on `X` around the origin.
    pub source_rows: Vec<MvlRow>,
    pub source_ratio: f64,
    pub linearity: LinearityReport,
}

impl MvlSuiteReport {
    pub fn passed(&self) -> bool {
        self.stable && self.sup_norm_ok && self.linearity.exact && self.linearity.injective
    }
}

fn ratio(rows: &[MvlRow]) -> f64 {
    let hi = rows.iter().map(|r| r.max_c).fold(f64::MIN, f64::max);
    let lo = rows.iter().map(|r| r.max_c).fold(f64::MAX, f64::min);
    hi / lo
}

pub fn run_mvl_suite(cfg: &MvlSuiteConfig) -> Result<MvlSuiteReport> {
    if cfg.radii.is_empty() || cfg.probes.is_empty() || cfg.fields < 2 {
        return Err(Error::InvalidInput("need radii, probes and at least two fields".into()));
    }
    let (a, b) = (crate::rough::graph::SUBDIVISION_A, crate::rough::graph::SUBDIVISION_B);
    let q = crate::rough::injectivity_order(2 * cfg.dim, a, b)?;
    let w = w_radius(b, q);
    let radius_floor = (6.0 * a * b).max(2.0 * b / a).max(10.0).ceil() as u32;
    let probe_len = |p: &Vec<i64>| -> Result<u32> {
        if p.len() != cfg.dim + 1 {
            return Err(Error::InvalidInput(format!("probe {p:?} is not in Z^{} x Z_q", cfg.dim)));
        }
        let base: i64 = p[..cfg.dim].iter().map(|c| c.abs()).sum();
        let s = p[cfg.dim].rem_euclid(q as i64) as u64;
        Ok(base as u32 + s.min(q - s) as u32)
    };
    let max_probe = cfg.probes.iter().map(probe_len).collect::<Result<Vec<_>>>()?;
    let region_radius = max_probe.into_iter().max().unwrap() + cfg.radii.iter().max().unwrap();
    let window = region_radius + w + 1;

    let x = make_subdivided_lattice(cfg.dim, window)?;
    let phi = RoughIsometry::subdivision(&x);
    let inj = injectivize(&phi, x.degree_bound())?;
    debug_assert_eq!(inj.q, q);
    let region = Arc::new(CayleyBall::enumerate(
        &inj.spec,
        &inj.generators,
        &inj.spec.identity(),
        region_radius,
    )?);
    let op = ProductExtension::new(&inj, region.clone(), w, x.complete_fiber_radius())?;

    // Harmonic fields with seeded boundary data on the outermost layer of X.
    let top = *x.depth.iter().max().unwrap();
    let outer = x.depth.iter().filter(|&&d| d == top).count();
    let harmonics = (0..cfg.fields)
        .into_par_iter()
        .map(|i| {
            let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed.wrapping_add(i as u64));
            let g: Vec<f64> = (0..outer).map(|_| rng.gen_range(-1.0..=1.0)).collect();
            solve_window_dirichlet(&x.graph, &x.depth, &g, SolveOptions::default())
        })
        .collect::<Result<Vec<_>>>()?;
    let max_solver_residual = harmonics.iter().map(|h| h.stats.residual).fold(0.0, f64::max);
    let views: Vec<&[f64]> = harmonics.iter().map(|h| h.values.as_slice()).collect();
    let extended = op.apply_batch(&views)?;

    let sup_norm_ok = harmonics
        .iter()
        .zip(&extended)
        .all(|(h, e)| e.sup_norm() <= h.values.iter().fold(0.0, |m: f64, v| m.max(v.abs())));

    let probe_idx = cfg
        .probes
        .iter()
        .map(|p| {
            let mut c = p.clone();
            c[cfg.dim] = c[cfg.dim].rem_euclid(q as i64);
            region
                .index_of(&GroupElement::new(c))
                .ok_or_else(|| Error::InvalidInput(format!("probe {p:?} outside the region")))
        })
        .collect::<Result<Vec<_>>>()?;
    let mut rows = Vec::new();
    let mut source_rows = Vec::new();
    for &r in &cfg.radii {
        let cs: Vec<f64> = probe_idx
            .par_iter()
            .map(|&y| extended.iter().map(|e| mvl_constant(e, y, r)).collect::<Result<Vec<_>>>())
            .collect::<Result<Vec<_>>>()?
            .concat();
        rows.push(MvlRow {
            r,
            max_c: cs.iter().copied().fold(f64::MIN, f64::max),
            min_c: cs.iter().copied().fold(f64::MAX, f64::min),
        });
        let src: Vec<f64> = harmonics
            .par_iter()
            .map(|h| graph_mean_value_constant(&x.graph, &h.values, 0, r).ok_or(Error::ZeroDenominator))
            .collect::<Result<_>>()?;
        source_rows.push(MvlRow {
            r,
            max_c: src.iter().copied().fold(f64::MIN, f64::max),
            min_c: src.iter().copied().fold(f64::MAX, f64::min),
        });
    }
    let ratio_ext = ratio(&rows);

    let linearity = linearity_check(cfg, &op, &views, x.len())?;
    Ok(MvlSuiteReport {
        config: cfg.clone(),
        q,
        w_radius: w,
        w_rule: "b + floor(q/2)".into(),
        window,
        region_radius,
        radius_floor,
        below_floor: cfg.radii.iter().copied().filter(|&r| r < radius_floor).collect(),
        x_vertices: x.len(),
        region_vertices: region.len(),
        max_solver_residual,
        stable: ratio_ext <= cfg.stability_bound,
        ratio: ratio_ext,
        sup_norm_ok,
        source_ratio: ratio(&source_rows),
        source_rows,
        rows,
        linearity,
    })
}

fn linearity_check(
    cfg: &MvlSuiteConfig,
    op: &ProductExtension,
    floats: &[&[f64]],
    n: usize,
) -> Result<LinearityReport> {
    let (alpha, beta) = (cfg.alpha as i128, cfg.beta as i128);
    let ints: Vec<Vec<i128>> = (0..cfg.fields)
        .map(|i| {
            let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed ^ 0x11AE_u64 ^ ((i as u64) << 20));
            (0..n).map(|_| rng.gen_range(-1000..=1000)).collect()
        })
        .collect();
    let combos: Vec<Vec<i128>> = (0..cfg.fields)
        .map(|i| {
            let (u, v) = (&ints[i], &ints[(i + 1) % cfg.fields]);
            u.iter().zip(v).map(|(a, b)| alpha * a + beta * b).collect()
        })
        .collect();
    let base_views: Vec<&[i128]> = ints.iter().map(|v| v.as_slice()).collect();
    let combo_views: Vec<&[i128]> = combos.iter().map(|v| v.as_slice()).collect();
    let eu = op.sums(&base_views)?;
    let ec = op.sums(&combo_views)?;
    // Denominators are shared by all fields, so comparing numerators is exact.
    let exact = (0..cfg.fields).all(|i| {
        let (u, v) = (&eu[i], &eu[(i + 1) % cfg.fields]);
        ec[i].iter().zip(u.iter().zip(v)).all(|(c, (a, b))| *c == alpha * a + beta * b)
    });

    let fcombo: Vec<Vec<f64>> = (0..floats.len())
        .map(|i| {
            let (u, v) = (floats[i], floats[(i + 1) % floats.len()]);
            u.iter().zip(v).map(|(a, b)| cfg.alpha as f64 * a + cfg.beta as f64 * b).collect()
        })
        .collect();
    let fviews: Vec<&[f64]> = fcombo.iter().map(|v| v.as_slice()).collect();
    let ef = op.apply_batch(floats)?;
    let efc = op.apply_batch(&fviews)?;
    let mut float_max_dev: f64 = 0.0;
    for i in 0..floats.len() {
        let (u, v) = (&ef[i].values, &ef[(i + 1) % floats.len()].values);
        for (c, (a, b)) in efc[i].values.iter().zip(u.iter().zip(v)) {
            float_max_dev = float_max_dev.max((c - (cfg.alpha as f64 * a + cfg.beta as f64 * b)).abs());
        }
    }

    let direct: Vec<(usize, usize)> = op
        .provenance()
        .iter()
        .enumerate()
        .filter_map(|(y, p)| match p {
            Provenance::Direct(x) => Some((y, *x as usize)),
            Provenance::Averaged(_) => None,
        })
        .collect();
    let injective = (0..cfg.fields).all(|i| direct.iter().all(|&(y, x)| eu[i][y] == ints[i][x]));
    Ok(LinearityReport {
        fields: cfg.fields,
        alpha: cfg.alpha,
        beta: cfg.beta,
        exact,
        float_max_dev,
        injective,
        direct_vertices: direct.len(),
    })
}
