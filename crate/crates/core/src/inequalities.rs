//! Empirical constants for the Poincaré and mean value inequalities.
//!
//! Every constant measured here is a lower bound on the optimal constant of
//! the corresponding inequality: sampling fields can only under-estimate a
//! supremum.

use std::sync::Arc;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::balls::CayleyBall;
use crate::groups::{GeneratingSet, GroupElement, GroupSpec};
use crate::harmonic::{check_harmonic_on, solve_dirichlet, ScalarField};
use crate::numeric::NeumaierSum;
use crate::solver::SolveOptions;
use crate::{Error, Result};

pub const DEFAULT_SEED: u64 = 0x4841_524D;
pub const CONSTANT_LABEL: &str = "lower bound on optimal constant";

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct PoincareMeasure {
    pub n: u32,
    /// `Σ_{B(n)} (u - ū)²`
    pub lhs: f64,
    /// `Σ` over unordered edges inside `B(3n)` of `(u(x) - u(y))²`
    pub energy: f64,
    /// `lhs / (n² energy)`; `+∞` when the energy vanishes but `lhs` does not.
    pub constant: f64,
}

/// Smallest `C` with `Σ_{B(n)} (u - ū)² <= C n² Σ_{x~y in B(3n)} (u(x) - u(y))²`,
/// on balls centered at the field's ball center. Each unordered edge counts once.
pub fn poincare_constant(field: &ScalarField, n: u32) -> Result<PoincareMeasure> {
    if n < 1 {
        return Err(Error::InvalidInput("Poincaré scale n must be at least 1".into()));
    }
    let ball = field.ball();
    if ball.radius() < 3 * n {
        return Err(Error::InvalidInput(format!(
            "Poincaré at scale {n} needs a ball of radius {}, have {}",
            3 * n,
            ball.radius()
        )));
    }
    let u = field.values();
    let inner = &u[..ball.count_within(n)];
    let mean = inner.iter().copied().collect::<NeumaierSum>().value() / inner.len() as f64;
    let lhs = inner.iter().map(|v| (v - mean).powi(2)).collect::<NeumaierSum>().value();

    let outer = ball.count_within(3 * n);
    let mut energy = NeumaierSum::new();
    for x in 0..outer {
        for &y in ball.neighbors(x) {
            let y = y as usize;
            if y > x && y < outer {
                energy.add((u[x] - u[y]).powi(2));
            }
        }
    }
    let energy = energy.value();
    let constant = if energy > 0.0 {
        lhs / ((n as f64).powi(2) * energy)
    } else if lhs > 0.0 {
        f64::INFINITY
    } else {
        0.0
    };
    Ok(PoincareMeasure {
        n,
        lhs,
        energy,
        constant,
    })
}

/// `u(p)² |B_p(R)| / Σ_{B_p(R)} u²` for a field harmonic on `B_p(R)`.
/// `Ok(None)` when the field vanishes on the ball (0/0).
pub fn mean_value_constant(field: &ScalarField, p: usize, r: u32, tol: f64) -> Result<Option<f64>> {
    let ball = field.ball();
    if ball.dist(p) + r >= ball.radius() {
        return Err(Error::InvalidInput(format!(
            "harmonicity on B_p({r}) needs the ball to extend one step beyond it"
        )));
    }
    let sub = ball.sub_ball(p, r)?;
    let check = check_harmonic_on(field, sub.iter(), tol)?;
    if !check.harmonic {
        return Err(Error::NotHarmonic {
            index: check.worst_index,
            value: check.worst_value,
            tol,
        });
    }
    let u = field.values();
    let sum_sq = sub.iter().map(|i| u[i] * u[i]).collect::<NeumaierSum>().value();
    let up2 = u[p] * u[p];
    if sum_sq == 0.0 {
        return Ok(None);
    }
    Ok(Some(up2 * sub.len() as f64 / sum_sq))
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case")]
pub enum TestField {
    /// Product of chart coordinates raised to `exponents`.
    Monomial { exponents: Vec<u32> },
    /// Harmonic extension into `B(3n)` of uniform `[-1, 1]` boundary data.
    RandomDirichlet { index: u32 },
}

impl TestField {
    pub fn id(&self) -> String {
        match self {
            TestField::Monomial { exponents } => format!(
                "mono:{}",
                exponents.iter().map(u32::to_string).collect::<Vec<_>>().join(",")
            ),
            TestField::RandomDirichlet { index } => format!("dirichlet:{index}"),
        }
    }
}

/// Number of leading coordinates that form a real chart of the group
/// (the cyclic residue of a product is left out).
pub fn chart_len(spec: &GroupSpec) -> usize {
    match spec {
        GroupSpec::Product { base, .. } => base.coord_len(),
        _ => spec.coord_len(),
    }
}

pub fn monomial_value(g: &GroupElement, exponents: &[u32]) -> f64 {
    exponents
        .iter()
        .zip(g.coords())
        .map(|(&e, &c)| (c as f64).powi(e as i32))
        .product()
}

/// Exponent vectors of total degree in `lo..=hi`, graded then lexicographically descending.
pub fn exponents_between(vars: usize, lo: u32, hi: u32) -> Vec<Vec<u32>> {
    fn rec(vars: usize, total: u32, prefix: &mut Vec<u32>, out: &mut Vec<Vec<u32>>) {
        if prefix.len() + 1 == vars {
            prefix.push(total);
            out.push(prefix.clone());
            prefix.pop();
            return;
        }
        for first in (0..=total).rev() {
            prefix.push(first);
            rec(vars, total - first, prefix, out);
            prefix.pop();
        }
    }
    let mut out = Vec::new();
    for total in lo..=hi {
        rec(vars, total, &mut Vec::new(), &mut out);
    }
    out
}

/// Monomials of degree 1 and 2 in the chart coordinates plus `random` seeded Dirichlet fields.
pub fn default_battery(spec: &GroupSpec, random: u32) -> Vec<TestField> {
    let mut fields: Vec<TestField> = exponents_between(chart_len(spec), 1, 2)
        .into_iter()
        .map(|e| {
            let mut exponents = e;
            exponents.resize(spec.coord_len(), 0);
            TestField::Monomial { exponents }
        })
        .collect();
    fields.extend((0..random).map(|index| TestField::RandomDirichlet { index }));
    fields
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum InequalityKind {
    Poincare,
    MeanValue,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct InequalityRow {
    pub scale: u32,
    pub field_id: String,
    /// `None` for fields skipped at this scale (non-harmonic for the mean
    /// value inequality, or vanishing).
    pub constant: Option<f64>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct InequalityReport {
    pub kind: InequalityKind,
    pub scales: Vec<u32>,
    pub rows: Vec<InequalityRow>,
    /// Maximum over the battery at each scale, aligned with `scales`.
    pub per_scale_max: Vec<f64>,
    pub seed: u64,
    pub label: String,
    pub fields: String,
}

impl InequalityReport {
    /// `max / min` of the per-scale maxima.
    pub fn spread(&self) -> f64 {
        let (lo, hi) = self
            .per_scale_max
            .iter()
            .fold((f64::INFINITY, 0.0_f64), |(l, h), &x| (l.min(x), h.max(x)));
        hi / lo
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct BatteryReport {
    pub poincare: InequalityReport,
    pub mean_value: InequalityReport,
}

struct Measured {
    field_id: String,
    poincare: f64,
    mean_value: Option<f64>,
}

fn measure(
    ball: &Arc<CayleyBall>,
    scale: u32,
    field: &TestField,
    seed: u64,
) -> Result<Measured> {
    let r = 3 * scale;
    let (u, tol) = match field {
        TestField::Monomial { exponents } => {
            let u = ScalarField::from_fn(ball.clone(), |g| monomial_value(g, exponents))?;
            let scale_mag = crate::numeric::max_abs(u.values()).max(1.0);
            (u, 1e-12 * scale_mag)
        }
        TestField::RandomDirichlet { index } => {
            let mut rng = ChaCha8Rng::seed_from_u64(
                seed ^ ((scale as u64) << 32) ^ ((*index as u64) << 48),
            );
            let bsize = ball.boundary(r)?.len();
            let data: Vec<f64> = (0..bsize).map(|_| rng.gen_range(-1.0..=1.0)).collect();
            let sol = solve_dirichlet(ball, r, &data, SolveOptions::default())?;
            let tol = 10.0 * sol.tol;
            (sol.field, tol)
        }
    };
    let poincare = poincare_constant(&u, scale)?.constant;
    let mean_value = match mean_value_constant(&u, 0, scale, tol) {
        Ok(c) => c,
        Err(Error::NotHarmonic { .. }) => None,
        Err(e) => return Err(e),
    };
    Ok(Measured {
        field_id: field.id(),
        poincare,
        mean_value,
    })
}

/// Runs both estimators on every field at every scale `n`, on balls
/// `B_e(3n + 1)`. Mean value constants use `p = e`, `R = n` and only the
/// fields that are harmonic there.
pub fn battery(
    spec: &GroupSpec,
    generators: &GeneratingSet,
    scales: &[u32],
    fields: &[TestField],
    seed: u64,
) -> Result<BatteryReport> {
    if fields.is_empty() {
        return Err(Error::EmptyBattery);
    }
    if scales.is_empty() || scales.contains(&0) {
        return Err(Error::InvalidInput("battery scales must be positive and nonempty".into()));
    }
    let max_scale = *scales.iter().max().unwrap();
    let big = CayleyBall::enumerate(spec, generators, &spec.identity(), 3 * max_scale + 1)?;
    let balls: Vec<Arc<CayleyBall>> = scales
        .iter()
        .map(|&n| big.truncate(3 * n + 1).map(Arc::new))
        .collect::<Result<_>>()?;

    let jobs: Vec<(usize, &TestField)> = (0..scales.len())
        .flat_map(|s| fields.iter().map(move |f| (s, f)))
        .collect();
    let measured: Vec<Measured> = jobs
        .par_iter()
        .map(|&(s, f)| measure(&balls[s], scales[s], f, seed))
        .collect::<Result<_>>()?;

    let field_list = fields.iter().map(TestField::id).collect::<Vec<_>>().join(";");
    let mut reports = [InequalityKind::Poincare, InequalityKind::MeanValue].map(|kind| {
        InequalityReport {
            kind,
            scales: scales.to_vec(),
            rows: Vec::new(),
            per_scale_max: vec![0.0; scales.len()],
            seed,
            label: CONSTANT_LABEL.to_string(),
            fields: field_list.clone(),
        }
    });
    for (&(s, _), m) in jobs.iter().zip(measured) {
        let scale = scales[s];
        for (rep, c) in reports.iter_mut().zip([Some(m.poincare), m.mean_value]) {
            if let Some(c) = c {
                rep.per_scale_max[s] = rep.per_scale_max[s].max(c);
            }
            rep.rows.push(InequalityRow {
                scale,
                field_id: m.field_id.clone(),
                constant: c,
            });
        }
    }
    let [poincare, mean_value] = reports;
    Ok(BatteryReport {
        poincare,
        mean_value,
    })
}
