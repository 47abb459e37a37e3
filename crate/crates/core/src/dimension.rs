//! Gram-matrix estimates of `dim H^d(G, S)`.
//!
//! Candidates are harmonic extensions of monomial boundary data from a large
//! ball `B(R_out)`, restricted to `B(R)` with `R_out >= 3R`. The numerical rank
//! of their Gram matrix `A_R(u, v) = Σ_{B(R)} u v` estimates the dimension;
//! for `Z^D` it is compared against the exact count from [`crate::polytable`].

use std::sync::Arc;

use nalgebra::{DMatrix, SymmetricEigen};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::balls::CayleyBall;
use crate::groups::{GeneratingSet, GroupSpec, STANDARD_CONVENTION};
use crate::harmonic::{solve_dirichlet, ScalarField};
use crate::inequalities::{chart_len, exponents_between, monomial_value};
use crate::numeric::NeumaierSum;
use crate::polytable::symbolic_kernel_dim;
use crate::solver::SolveOptions;
use crate::{Error, Result};

pub const DEFAULT_REL_TOL: f64 = 1e-8;
pub const NO_ORACLE: &str = "no oracle";

#[derive(Clone, Debug, PartialEq)]
pub struct GramMatrix {
    pub r: u32,
    pub entries: DMatrix<f64>,
}

/// `A_R(u_i, u_j) = Σ_{x in B(R)} u_i(x) u_j(x)` with compensated summation in
/// a fixed vertex order.
pub fn gram(fields: &[ScalarField], r: u32) -> Result<GramMatrix> {
    let Some(first) = fields.first() else {
        return Ok(GramMatrix {
            r,
            entries: DMatrix::zeros(0, 0),
        });
    };
    if fields.iter().any(|f| !f.shares_ball(first)) {
        return Err(Error::MismatchedBalls);
    }
    let ball = first.ball();
    if r > ball.radius() {
        return Err(Error::InvalidInput(format!(
            "Gram radius {r} exceeds the ball radius {}",
            ball.radius()
        )));
    }
    let n = ball.count_within(r);
    let k = fields.len();
    let pairs: Vec<(usize, usize)> = (0..k).flat_map(|i| (i..k).map(move |j| (i, j))).collect();
    let sums: Vec<f64> = pairs
        .par_iter()
        .map(|&(i, j)| {
            let (u, v) = (&fields[i].values()[..n], &fields[j].values()[..n]);
            u.iter().zip(v).map(|(a, b)| a * b).collect::<NeumaierSum>().value()
        })
        .collect();
    let mut entries = DMatrix::zeros(k, k);
    for (&(i, j), s) in pairs.iter().zip(sums) {
        entries[(i, j)] = s;
        entries[(j, i)] = s;
    }
    Ok(GramMatrix { r, entries })
}

impl GramMatrix {
    pub fn dim(&self) -> usize {
        self.entries.nrows()
    }

    /// Eigenvalues in decreasing order.
    pub fn eigenvalues(&self) -> Vec<f64> {
        if self.dim() == 0 {
            return Vec::new();
        }
        let mut ev: Vec<f64> = SymmetricEigen::new(self.entries.clone())
            .eigenvalues
            .iter()
            .copied()
            .collect();
        ev.sort_by(|a, b| b.total_cmp(a));
        ev
    }

    /// Eigenvalues divided by the largest one (empty or all-zero when `λ_max <= 0`).
    pub fn relative_spectrum(&self) -> Vec<f64> {
        let ev = self.eigenvalues();
        match ev.first() {
            Some(&top) if top > 0.0 => ev.iter().map(|l| l / top).collect(),
            _ => vec![0.0; ev.len()],
        }
    }

    pub fn trace(&self) -> f64 {
        self.entries.trace()
    }

    /// Eigenvalues are `>= -1e-10 * trace`.
    pub fn is_psd(&self) -> bool {
        let floor = -1e-10 * self.trace().abs();
        self.eigenvalues().iter().all(|&l| l >= floor)
    }
}

/// Number of eigenvalues above `rel_tol * λ_max`; zero when `λ_max = 0`.
pub fn numerical_rank(gram: &GramMatrix, rel_tol: f64) -> usize {
    rank_from_spectrum(&gram.relative_spectrum(), rel_tol)
}

pub fn rank_from_spectrum(relative: &[f64], rel_tol: f64) -> usize {
    if relative.first().is_none_or(|&t| t <= 0.0) {
        return 0;
    }
    relative.iter().filter(|&&l| l > rel_tol).count()
}

/// Monomial exponents used as boundary data for degree `d`.
///
/// On `Z^D` (and the base of a product) this is every monomial of total
/// degree `<= d`. On the Heisenberg group the central coordinate `c` grows
/// quadratically in the word metric, so it gets weight 2: `a^i b^j c^k` with
/// `i + j + 2k <= d`.
pub fn candidate_exponents(spec: &GroupSpec, d: u32) -> Vec<Vec<u32>> {
    let full = spec.coord_len();
    match spec {
        GroupSpec::Heisenberg => exponents_between(3, 0, d)
            .into_iter()
            .filter(|e| e[0] + e[1] + 2 * e[2] <= d)
            .collect(),
        _ => exponents_between(chart_len(spec), 0, d)
            .into_iter()
            .map(|mut e| {
                e.resize(full, 0);
                e
            })
            .collect(),
    }
}

#[derive(Clone, Debug)]
pub struct CandidateSet {
    pub exponents: Vec<Vec<u32>>,
    /// Restrictions to `B(r_inner)`, all sharing one ball.
    pub fields: Vec<ScalarField>,
    pub r_outer: u32,
    pub r_inner: u32,
    pub max_residual: f64,
}

/// Solves the Dirichlet problem on `B(r_outer)` for each monomial and restricts to `B(r_inner)`.
pub fn candidate_fields(
    spec: &GroupSpec,
    generators: &GeneratingSet,
    d: u32,
    r_outer: u32,
    r_inner: u32,
) -> Result<CandidateSet> {
    let ball = CayleyBall::enumerate(spec, generators, &spec.identity(), r_outer + 1)?;
    candidate_fields_on(&Arc::new(ball), d, r_outer, r_inner)
}

/// As [`candidate_fields`], reusing a ball of radius at least `r_outer + 1`.
pub fn candidate_fields_on(
    ball: &Arc<CayleyBall>,
    d: u32,
    r_outer: u32,
    r_inner: u32,
) -> Result<CandidateSet> {
    if r_outer < 3 * r_inner {
        return Err(Error::InvalidInput(format!(
            "outer radius {r_outer} must be at least 3 x inner radius {r_inner}"
        )));
    }
    let domain = if ball.radius() == r_outer + 1 {
        ball.clone()
    } else {
        Arc::new(ball.truncate(r_outer + 1)?)
    };
    let inner = Arc::new(domain.truncate(r_inner)?);
    let exponents = candidate_exponents(domain.spec(), d);
    let boundary = domain.boundary(r_outer)?;
    let solved: Vec<(ScalarField, f64)> = exponents
        .par_iter()
        .map(|e| {
            let data: Vec<f64> = boundary
                .iter()
                .map(|i| monomial_value(domain.vertex(i), e))
                .collect();
            let sol = solve_dirichlet(&domain, r_outer, &data, SolveOptions::default())?;
            Ok((sol.field.restrict(&inner)?, sol.residual))
        })
        .collect::<Result<_>>()?;
    let max_residual = solved.iter().map(|s| s.1).fold(0.0, f64::max);
    Ok(CandidateSet {
        exponents,
        fields: solved.into_iter().map(|s| s.0).collect(),
        r_outer,
        r_inner,
        max_residual,
    })
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct DimensionEstimate {
    pub spec: String,
    pub d: u32,
    pub schedule: Vec<u32>,
    pub candidate_count: usize,
    pub rel_tol: f64,
    /// Numerical rank at each schedule radius.
    pub ranks: Vec<usize>,
    /// The last two ranks agree.
    pub saturated: bool,
    pub saturated_rank: Option<usize>,
    /// First schedule radius from which the rank stays at its saturated
    /// value, i.e. where `A_R` becomes definite on the candidate span.
    pub first_stable_radius: Option<u32>,
    /// Gram eigenvalues relative to the largest, per schedule radius, so
    /// ranks at other tolerances can be recomputed.
    pub spectra: Vec<Vec<f64>>,
    pub max_solver_residual: f64,
    pub oracle: Option<usize>,
    pub oracle_label: String,
}

impl DimensionEstimate {
    pub fn ranks_at(&self, rel_tol: f64) -> Vec<usize> {
        self.spectra
            .iter()
            .map(|s| rank_from_spectrum(s, rel_tol))
            .collect()
    }

    /// Whether the ranks at every schedule radius are the same for all tolerances given.
    pub fn rank_stable(&self, tolerances: &[f64]) -> bool {
        let base = self.ranks_at(self.rel_tol);
        tolerances.iter().all(|&t| self.ranks_at(t) == base)
    }

    pub fn matches_oracle(&self) -> Option<bool> {
        self.oracle.map(|o| self.saturated && self.saturated_rank == Some(o))
    }
}

pub fn oracle_for(spec: &GroupSpec, generators: &GeneratingSet, d: u32) -> Result<Option<usize>> {
    match spec {
        GroupSpec::Lattice { dim } if generators.convention() == STANDARD_CONVENTION => {
            symbolic_kernel_dim(*dim, d).map(Some)
        }
        _ => Ok(None),
    }
}

pub fn estimate_dimension(
    spec: &GroupSpec,
    generators: &GeneratingSet,
    d: u32,
    schedule: &[u32],
    rel_tol: f64,
) -> Result<DimensionEstimate> {
    if schedule.is_empty() || schedule.windows(2).any(|w| w[0] >= w[1]) || schedule[0] == 0 {
        return Err(Error::InvalidInput(
            "schedule must be a nonempty strictly increasing list of positive radii".into(),
        ));
    }
    if !(rel_tol > 0.0 && rel_tol < 1.0) {
        return Err(Error::InvalidInput("rel_tol must lie in (0, 1)".into()));
    }
    let r_max = *schedule.last().unwrap();
    let ball = Arc::new(CayleyBall::enumerate(
        spec,
        generators,
        &spec.identity(),
        3 * r_max + 1,
    )?);
    let mut spectra = Vec::with_capacity(schedule.len());
    let mut max_solver_residual = 0.0_f64;
    let mut candidate_count = 0;
    for &r in schedule {
        let set = candidate_fields_on(&ball, d, 3 * r, r)?;
        candidate_count = set.fields.len();
        max_solver_residual = max_solver_residual.max(set.max_residual);
        spectra.push(gram(&set.fields, r)?.relative_spectrum());
    }
    let ranks: Vec<usize> = spectra.iter().map(|s| rank_from_spectrum(s, rel_tol)).collect();
    let saturated = ranks.len() >= 2 && ranks[ranks.len() - 1] == ranks[ranks.len() - 2];
    let first_stable_radius = saturated.then(|| {
        let last = *ranks.last().unwrap();
        let k = ranks.iter().rposition(|&r| r != last).map_or(0, |i| i + 1);
        schedule[k]
    });
    let oracle = oracle_for(spec, generators, d)?;
    Ok(DimensionEstimate {
        first_stable_radius,
        spec: spec.text(),
        d,
        schedule: schedule.to_vec(),
        candidate_count,
        rel_tol,
        saturated_rank: saturated.then(|| *ranks.last().unwrap()),
        ranks,
        saturated,
        spectra,
        max_solver_residual,
        oracle_label: match oracle {
            Some(_) => "symbolic kernel dimension".to_string(),
            None => NO_ORACLE.to_string(),
        },
        oracle,
    })
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EnergyProbe {
    pub beta: f64,
    pub r: u32,
    pub r_big: u32,
    pub k: usize,
    /// `Σ_i A_R(u_i, u_i)` for an `A_{βR}`-orthonormal basis `u_i`.
    pub ratio: f64,
    pub lambda_min: f64,
    pub lambda_max: f64,
}

/// Orthonormalizes the span of `fields` for `A_{⌊βR⌋}` (Cholesky) and
/// returns `trace(L⁻¹ A_R L⁻ᵀ)`, which does not depend on the chosen basis.
pub fn energy_probe(fields: &[ScalarField], r: u32, beta: f64, rel_tol: f64) -> Result<EnergyProbe> {
    if fields.is_empty() {
        return Err(Error::InvalidInput("energy probe needs at least one field".into()));
    }
    if !(beta >= 1.0) {
        return Err(Error::InvalidInput(format!("scale factor beta = {beta} must be >= 1")));
    }
    let r_big = (beta * r as f64).floor() as u32;
    let big = gram(fields, r_big)?;
    let small = gram(fields, r)?;
    let ev = big.eigenvalues();
    let (lambda_max, lambda_min) = (ev[0], *ev.last().unwrap());
    if lambda_max <= 0.0 || lambda_min <= rel_tol * lambda_max {
        return Err(Error::BelowR1 {
            lambda_min,
            lambda_max,
        });
    }
    let chol = nalgebra::Cholesky::new(big.entries.clone()).ok_or(Error::BelowR1 {
        lambda_min,
        lambda_max,
    })?;
    let l = chol.l();
    let x = l
        .solve_lower_triangular(&small.entries)
        .ok_or(Error::BelowR1 {
            lambda_min,
            lambda_max,
        })?;
    let y = l
        .solve_lower_triangular(&x.transpose())
        .ok_or(Error::BelowR1 {
            lambda_min,
            lambda_max,
        })?;
    Ok(EnergyProbe {
        beta,
        r,
        r_big,
        k: fields.len(),
        ratio: y.trace(),
        lambda_min,
        lambda_max,
    })
}

/// `k β^{-(2d + D + δ)}`, the lower bound for the probe ratio.
pub fn energy_lower_bound(k: usize, beta: f64, d: u32, dim: u32, delta: f64) -> f64 {
    k as f64 * beta.powf(-(2.0 * d as f64 + dim as f64 + delta))
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};

    fn z2(r: u32) -> Arc<CayleyBall> {
        let spec = GroupSpec::lattice(2).unwrap();
        Arc::new(
            CayleyBall::enumerate(&spec, &spec.standard_generators(), &spec.identity(), r).unwrap(),
        )
    }

    fn coord(ball: &Arc<CayleyBall>, i: usize) -> ScalarField {
        ScalarField::from_fn(ball.clone(), |g| g.coords()[i] as f64).unwrap()
    }

    #[test]
    fn gram_hand_values() {
        let b = z2(1);
        let one = ScalarField::constant(b.clone(), 1.0).unwrap();
        assert_eq!(gram(&[one], 1).unwrap().entries[(0, 0)], 5.0);
        let g = gram(&[coord(&b, 0), coord(&b, 1)], 1).unwrap();
        assert_eq!(g.entries[(0, 0)], 2.0);
        assert_eq!(g.entries[(0, 1)], 0.0);
        let other = z2(1);
        let stray = ScalarField::constant(z2(2), 1.0).unwrap();
        assert!(gram(&[coord(&other, 0), stray], 1).is_err());
    }

    #[test]
    fn rank_basics() {
        let g = GramMatrix {
            r: 0,
            entries: DMatrix::from_row_slice(2, 2, &[5.0, 0.0, 0.0, 5.0]),
        };
        assert_eq!(numerical_rank(&g, 1e-8), 2);
        let g = GramMatrix {
            r: 0,
            entries: DMatrix::from_row_slice(2, 2, &[2.0, 2.0, 2.0, 2.0]),
        };
        assert_eq!(numerical_rank(&g, 1e-8), 1);
        let g = GramMatrix {
            r: 0,
            entries: DMatrix::zeros(3, 3),
        };
        assert_eq!(numerical_rank(&g, 1e-8), 0);
    }

    #[test]
    fn gram_monotone_in_radius() {
        let b = z2(8);
        let fields = vec![
            coord(&b, 0),
            coord(&b, 1),
            ScalarField::constant(b.clone(), 1.0).unwrap(),
        ];
        let mut last = 0.0;
        for r in 1..=8 {
            let g = gram(&fields, r).unwrap();
            assert!(g.is_psd());
            let top = g.eigenvalues()[0];
            assert!(top >= last);
            last = top;
        }
    }

    #[test]
    fn heisenberg_weighted_exponents() {
        let e = candidate_exponents(&GroupSpec::Heisenberg, 2);
        assert_eq!(e.len(), 7);
        assert!(e.contains(&vec![0, 0, 1]));
        assert!(!e.contains(&vec![1, 0, 1]));
        let p: GroupSpec = "z2xZ4".parse().unwrap();
        assert!(candidate_exponents(&p, 1).iter().all(|e| e.len() == 3 && e[2] == 0));
    }

    #[test]
    fn affine_candidates_are_exact() {
        let spec = GroupSpec::lattice(2).unwrap();
        let set = candidate_fields(&spec, &spec.standard_generators(), 1, 12, 4).unwrap();
        assert_eq!(set.fields.len(), 3);
        for (e, f) in set.exponents.iter().zip(&set.fields) {
            for (i, g) in f.ball().vertices().iter().enumerate() {
                assert!((f.value(i) - monomial_value(g, e)).abs() < 1e-10);
            }
        }
        assert!(candidate_fields(&spec, &spec.standard_generators(), 1, 11, 4).is_err());
    }

    #[test]
    fn small_estimates() {
        let spec = GroupSpec::lattice(2).unwrap();
        let gens = spec.standard_generators();
        let est = estimate_dimension(&spec, &gens, 1, &[4, 6], DEFAULT_REL_TOL).unwrap();
        assert_eq!(est.saturated_rank, Some(3));
        assert_eq!(est.first_stable_radius, Some(4));
        assert_eq!(est.oracle, Some(3));
        let est = estimate_dimension(&spec, &gens, 0, &[4, 6], DEFAULT_REL_TOL).unwrap();
        assert_eq!(est.saturated_rank, Some(1));
        assert!(estimate_dimension(&spec, &gens, 1, &[6, 4], DEFAULT_REL_TOL).is_err());
        let h = estimate_dimension(&GroupSpec::Heisenberg, &GroupSpec::Heisenberg.standard_generators(), 1, &[2, 3], DEFAULT_REL_TOL).unwrap();
        assert_eq!(h.oracle_label, NO_ORACLE);
    }

    #[test]
    fn probe_on_constants() {
        let b = z2(10);
        let one = ScalarField::constant(b.clone(), 1.0).unwrap();
        let p = energy_probe(std::slice::from_ref(&one), 5, 2.0, 1e-12).unwrap();
        assert!((p.ratio - 61.0 / 221.0).abs() < 1e-15);
        let p = energy_probe(&[one, coord(&b, 0)], 5, 1.0, 1e-12).unwrap();
        assert!((p.ratio - 2.0).abs() < 1e-12);
    }

    #[test]
    fn probe_rejects_degenerate_span() {
        let b = z2(4);
        let x = coord(&b, 0);
        let err = energy_probe(&[x.clone(), x.scale(2.0)], 2, 2.0, 1e-8).unwrap_err();
        assert!(matches!(err, Error::BelowR1 { .. }));
    }

    #[test]
    fn probe_is_basis_independent() {
        let b = z2(12);
        let base = vec![
            ScalarField::constant(b.clone(), 1.0).unwrap(),
            coord(&b, 0),
            coord(&b, 1),
        ];
        let p0 = energy_probe(&base, 6, 2.0, 1e-10).unwrap().ratio;
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(7);
        let mixed: Vec<ScalarField> = (0..3)
            .map(|_| {
                let c: Vec<f64> = (0..3).map(|_| rng.gen_range(-2.0..2.0)).collect();
                base[0]
                    .combine(c[0], &base[1], c[1])
                    .unwrap()
                    .combine(1.0, &base[2], c[2])
                    .unwrap()
            })
            .collect();
        let p1 = energy_probe(&mixed, 6, 2.0, 1e-10).unwrap().ratio;
        assert!((p0 - p1).abs() <= 1e-8 * p0);
    }
}
