//! Growth function statistics: doubling, Pansu ratios, degree estimation and
//! the relative volume comparison threshold.

use std::collections::BTreeMap;
use std::fmt;
use std::str::FromStr;

use num_bigint::BigInt;
use num_rational::{BigRational, Ratio};
use num_traits::{One, Signed, Zero};
use rayon::prelude::*;
use rustc_hash::FxHashSet;
use serde::{Deserialize, Serialize};

use crate::balls::DEFAULT_MAX_VERTICES;
use crate::groups::{GeneratingSet, GroupElement, GroupSpec};
use crate::{Error, Result};

/// `beta[n] = |B_e(n)|` for `n = 0..=n_max`.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct GrowthSeries {
    pub spec: GroupSpec,
    pub generators: GeneratingSet,
    beta: Vec<u64>,
    pub d_nominal: Option<u32>,
}

impl GrowthSeries {
    pub fn new(spec: GroupSpec, generators: GeneratingSet, beta: Vec<u64>) -> Result<Self> {
        if beta.first() != Some(&1) {
            return Err(Error::InvalidInput("growth series must start with beta(0) = 1".into()));
        }
        if beta.len() < 2 {
            return Err(Error::InvalidInput("growth series needs n_max >= 1".into()));
        }
        let s = generators.len() as u64;
        for n in 1..beta.len() {
            if beta[n] <= beta[n - 1] {
                return Err(Error::InvalidInput(format!(
                    "growth series is not strictly increasing at n = {n}"
                )));
            }
            if beta[n] > beta[n - 1] * (s + 1) {
                return Err(Error::InvalidInput(format!(
                    "beta({n}) exceeds the BFS expansion bound"
                )));
            }
        }
        Ok(GrowthSeries {
            spec,
            generators,
            beta,
            d_nominal: None,
        })
    }

    pub fn with_nominal_degree(mut self, d: u32) -> Self {
        self.d_nominal = Some(d);
        self
    }

    pub fn beta(&self) -> &[u64] {
        &self.beta
    }

    pub fn n_max(&self) -> u32 {
        (self.beta.len() - 1) as u32
    }
}

/// Counts `|B_e(n)|` for `n <= n_max`. Only three BFS layers are held at a
/// time: with a symmetric generating set the neighbours of layer `n` lie in
/// layers `n - 1`, `n`, `n + 1`.
pub fn growth_function(
    spec: &GroupSpec,
    generators: &GeneratingSet,
    n_max: u32,
) -> Result<GrowthSeries> {
    growth_function_from(spec, generators, &spec.identity(), n_max)
}

pub fn growth_function_from(
    spec: &GroupSpec,
    generators: &GeneratingSet,
    center: &GroupElement,
    n_max: u32,
) -> Result<GrowthSeries> {
    growth_function_with_cap(spec, generators, center, n_max, DEFAULT_MAX_VERTICES)
}

pub fn growth_function_with_cap(
    spec: &GroupSpec,
    generators: &GeneratingSet,
    center: &GroupElement,
    n_max: u32,
    max_vertices: usize,
) -> Result<GrowthSeries> {
    if n_max < 1 {
        return Err(Error::InvalidInput("n_max must be at least 1".into()));
    }
    if !spec.conforms(center) {
        return Err(Error::RepresentationMismatch {
            spec: spec.text(),
            element: center.to_string(),
        });
    }
    if !generators.is_symmetric(spec) {
        return Err(Error::InvalidGenerators("generating set is not symmetric".into()));
    }
    let mut prev: FxHashSet<GroupElement> = FxHashSet::default();
    let mut cur: FxHashSet<GroupElement> = FxHashSet::default();
    cur.insert(center.clone());
    let mut beta = vec![1u64];
    for _ in 1..=n_max {
        let mut next = FxHashSet::default();
        for v in &cur {
            for s in generators.elements() {
                let w = spec.multiply_unchecked(v, s)?;
                if !cur.contains(&w) && !prev.contains(&w) {
                    next.insert(w);
                }
            }
        }
        if prev.len() + cur.len() + next.len() > max_vertices {
            return Err(Error::MemoryCap { cap: max_vertices });
        }
        beta.push(beta.last().unwrap() + next.len() as u64);
        prev = std::mem::replace(&mut cur, next);
    }
    GrowthSeries::new(spec.clone(), generators.clone(), beta)
}

/// `beta(2n) / beta(n)` for `1 <= n <= n_max / 2`, as exact fractions.
pub fn doubling_constants(series: &GrowthSeries) -> Vec<Ratio<u64>> {
    let b = series.beta();
    (1..=series.n_max() as usize / 2)
        .map(|n| Ratio::new(b[2 * n], b[n]))
        .collect()
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PansuRatios {
    pub degree: u32,
    /// `ratios[n - 1] = beta(n) / n^D`.
    pub ratios: Vec<f64>,
    /// First `n` of the tail window (the last quarter of `1..=n_max`).
    pub tail_start: u32,
    /// `max - min` of the ratios over the tail window.
    pub tail_variation: f64,
    /// Mean over the tail window; an estimate of the limit, not a certified value.
    pub tail_mean: f64,
}

pub fn pansu_ratios(series: &GrowthSeries, degree: u32) -> Result<PansuRatios> {
    if degree < 1 {
        return Err(Error::InvalidInput("degree must be at least 1".into()));
    }
    let n_max = series.n_max();
    let ratios: Vec<f64> = (1..=n_max)
        .map(|n| series.beta()[n as usize] as f64 / (n as f64).powi(degree as i32))
        .collect();
    let tail_start = (n_max - n_max / 4).max(1);
    let tail = &ratios[tail_start as usize - 1..];
    let (lo, hi) = tail
        .iter()
        .fold((f64::INFINITY, f64::NEG_INFINITY), |(l, h), &x| (l.min(x), h.max(x)));
    Ok(PansuRatios {
        degree,
        tail_start,
        tail_variation: hi - lo,
        tail_mean: tail.iter().sum::<f64>() / tail.len() as f64,
        ratios,
    })
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct DegreeEstimate {
    pub window: (u32, u32),
    pub d_hat: f64,
    pub d_rounded: u32,
}

/// Ordinary least squares slope of `log beta(n)` against `log n` on `[lo, hi]`.
pub fn estimate_degree(series: &GrowthSeries, lo: u32, hi: u32) -> Result<DegreeEstimate> {
    if lo < 2 || hi > series.n_max() || hi < lo {
        return Err(Error::InvalidInput(format!(
            "window [{lo}, {hi}] is not inside [2, {}]",
            series.n_max()
        )));
    }
    if hi - lo + 1 < 4 {
        return Err(Error::InvalidInput("degree window needs at least 4 points".into()));
    }
    let pts: Vec<(f64, f64)> = (lo..=hi)
        .map(|n| ((n as f64).ln(), (series.beta()[n as usize] as f64).ln()))
        .collect();
    let m = pts.len() as f64;
    let mx = pts.iter().map(|p| p.0).sum::<f64>() / m;
    let my = pts.iter().map(|p| p.1).sum::<f64>() / m;
    let sxy: f64 = pts.iter().map(|p| (p.0 - mx) * (p.1 - my)).sum();
    let sxx: f64 = pts.iter().map(|p| (p.0 - mx).powi(2)).sum();
    let d_hat = sxy / sxx;
    Ok(DegreeEstimate {
        window: (lo, hi),
        d_hat,
        d_rounded: d_hat.round().max(0.0) as u32,
    })
}

/// A positive rational parsed exactly from decimal (`0.1`, `2.5e-1`) or fraction (`1/10`) text.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Theta {
    text: String,
    value: BigRational,
}

impl Theta {
    pub fn value(&self) -> &BigRational {
        &self.value
    }

    pub fn as_f64(&self) -> f64 {
        self.text.parse::<f64>().unwrap_or_else(|_| {
            let n: f64 = self.value.numer().to_string().parse().unwrap_or(f64::NAN);
            let d: f64 = self.value.denom().to_string().parse().unwrap_or(f64::NAN);
            n / d
        })
    }
}

impl fmt::Display for Theta {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.text)
    }
}

fn parse_decimal(s: &str) -> Option<BigRational> {
    let (mantissa, exp) = match s.find(['e', 'E']) {
        Some(i) => (&s[..i], s[i + 1..].parse::<i32>().ok()?),
        None => (s, 0),
    };
    let (int, frac) = mantissa.split_once('.').unwrap_or((mantissa, ""));
    if int.is_empty() && frac.is_empty() {
        return None;
    }
    let digits = format!("{int}{frac}");
    if !digits.chars().all(|c| c.is_ascii_digit()) {
        return None;
    }
    let num: BigInt = digits.parse().ok()?;
    let scale = exp - frac.len() as i32;
    let ten = BigInt::from(10);
    Some(if scale >= 0 {
        BigRational::from_integer(num * num_traits::pow(ten, scale as usize))
    } else {
        BigRational::new(num, num_traits::pow(ten, (-scale) as usize))
    })
}

impl FromStr for Theta {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let t = s.trim();
        let value = match t.split_once('/') {
            Some((n, d)) => {
                let n: BigInt = n.trim().parse().map_err(|_| Error::Parse(format!("theta `{t}`")))?;
                let d: BigInt = d.trim().parse().map_err(|_| Error::Parse(format!("theta `{t}`")))?;
                if d.is_zero() {
                    return Err(Error::Parse(format!("theta `{t}` has zero denominator")));
                }
                BigRational::new(n, d)
            }
            None => parse_decimal(t).ok_or_else(|| Error::Parse(format!("theta `{t}`")))?,
        };
        if !value.is_positive() {
            return Err(Error::InvalidInput(format!("theta must be positive, got {t}")));
        }
        Ok(Theta {
            text: t.to_string(),
            value,
        })
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RvcThreshold {
    pub theta: String,
    /// Largest radius of the grid, `n_max / 2`.
    pub grid_max: u32,
    /// Smallest `R0` with the comparison verified on every pair `R0 <= r <= R <= grid_max`;
    /// `None` when only the trivial pair `r = R = grid_max` would remain.
    pub r0: Option<u32>,
    pub pairs_checked: u64,
}

/// Exhaustive check of `beta(R)/beta(r) <= (1 + theta)(R/r)^D` in exact
/// arithmetic, written as `beta(R) r^D den <= (den + num) R^D beta(r)`.
pub fn rvc_threshold(series: &GrowthSeries, degree: u32, theta: &Theta) -> RvcThreshold {
    let grid_max = series.n_max() / 2;
    let num = theta.value.numer().clone();
    let den = theta.value.denom().clone();
    let factor = &den + &num;
    let pow = |x: u32| num_traits::pow(BigInt::from(x), degree as usize);
    let beta = |n: u32| BigInt::from(series.beta()[n as usize]);

    // bad[r] is true when some R in [r, grid_max] violates the inequality.
    let bad: Vec<bool> = (1..=grid_max)
        .into_par_iter()
        .map(|r| {
            let lhs_r = pow(r) * &den;
            let rhs_r = &factor * beta(r);
            (r..=grid_max).any(|big| beta(big) * &lhs_r > &rhs_r * pow(big))
        })
        .collect();
    let r0 = bad
        .iter()
        .rposition(|&b| b)
        .map(|i| i as u32 + 2)
        .unwrap_or(1);
    let pairs_checked = (1..=grid_max as u64).map(|r| grid_max as u64 - r + 1).sum();
    RvcThreshold {
        theta: theta.text.clone(),
        grid_max,
        r0: (r0 < grid_max).then_some(r0),
        pairs_checked,
    }
}

/// `(min, max)` of `beta(n) / n^D` over `1 <= n <= n_max`.
pub fn two_sided_bounds(series: &GrowthSeries, degree: u32) -> (f64, f64) {
    (1..=series.n_max())
        .map(|n| series.beta()[n as usize] as f64 / (n as f64).powi(degree as i32))
        .fold((f64::INFINITY, f64::NEG_INFINITY), |(l, h), x| (l.min(x), h.max(x)))
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct VolumeReport {
    pub spec: String,
    pub generators: String,
    pub d_nominal: Option<u32>,
    pub beta: Vec<u64>,
    pub doubling: Vec<f64>,
    pub doubling_max: f64,
    pub pansu: PansuRatios,
    pub degree: Option<DegreeEstimate>,
    pub c1: f64,
    pub c2: f64,
    pub r0_by_theta: BTreeMap<String, Option<u32>>,
    pub note: String,
}

pub fn volume_report(
    series: &GrowthSeries,
    degree: u32,
    thetas: &[Theta],
    window: Option<(u32, u32)>,
) -> Result<VolumeReport> {
    let doubling: Vec<f64> = doubling_constants(series)
        .iter()
        .map(|r| *r.numer() as f64 / *r.denom() as f64)
        .collect();
    let pansu = pansu_ratios(series, degree)?;
    let degree_est = window
        .map(|(lo, hi)| estimate_degree(series, lo, hi))
        .transpose()?;
    let (c1, c2) = two_sided_bounds(series, degree);
    let r0_by_theta = thetas
        .iter()
        .map(|t| (t.to_string(), rvc_threshold(series, degree, t).r0))
        .collect();
    Ok(VolumeReport {
        spec: series.spec.text(),
        generators: series.generators.convention().to_string(),
        d_nominal: series.d_nominal,
        beta: series.beta().to_vec(),
        doubling_max: doubling.iter().copied().fold(0.0, f64::max),
        doubling,
        pansu,
        degree: degree_est,
        c1,
        c2,
        r0_by_theta,
        note: "Pansu tail mean is a finite-range estimate; settling thresholds are calibration choices"
            .into(),
    })
}

/// Exact `beta(2n)/beta(n) <= bound` for every `n` in range.
pub fn doubling_within(series: &GrowthSeries, bound: Ratio<u64>) -> bool {
    doubling_constants(series).iter().all(|r| *r <= bound)
}

/// `1 + theta` as an exact rational, for reporting.
pub fn one_plus(theta: &Theta) -> BigRational {
    BigRational::one() + theta.value.clone()
}
