//! Rough isometries `φ: X → G` from a finite graph window into a Cayley
//! graph: exhaustive checks, rough inverses, injectivization into `G × Z_q`,
//! and the extension operator `E u = ũ` (in [`extension`]).
//!
//! Everything runs on finite windows. Distances inside a window can be
//! inflated near its edge, so density and inverse checks exclude a margin of
//! width `⌈ab + b⌉` from the target window.

pub mod extension;
pub mod graph;
pub mod metric;
pub mod mvl;

use rayon::prelude::*;
use rustc_hash::{FxHashMap, FxHashSet};
use serde::{Deserialize, Serialize};

use crate::balls::CayleyBall;
use crate::groups::{GeneratingSet, GroupElement, GroupSpec};
use crate::{Error, Result};

pub use extension::{ExtensionField, ExtensionOperator, ProductExtension, Provenance};
pub use graph::{make_subdivided_lattice, FiniteGraph, SubdividedLattice};
pub use metric::{DistanceTable, WordMetric};
pub use mvl::{run_mvl_suite, MvlSuiteConfig, MvlSuiteReport};

const MAX_EXAMPLES: usize = 20;

/// A vertex map from a graph window into a group, with claimed constants `(a, b)`.
#[derive(Clone, Debug)]
pub struct RoughIsometry {
    pub graph: FiniteGraph,
    /// Center of the source window.
    pub root: usize,
    pub spec: GroupSpec,
    pub generators: GeneratingSet,
    pub images: Vec<GroupElement>,
    pub a: f64,
    pub b: f64,
}

impl RoughIsometry {
    pub fn new(
        graph: FiniteGraph,
        root: usize,
        spec: GroupSpec,
        generators: GeneratingSet,
        images: Vec<GroupElement>,
        a: f64,
        b: f64,
    ) -> Result<Self> {
        if images.len() != graph.len() {
            return Err(Error::InvalidInput(format!(
                "{} images for {} source vertices",
                images.len(),
                graph.len()
            )));
        }
        if root >= graph.len() {
            return Err(Error::InvalidInput("root outside the source window".into()));
        }
        if !(a >= 1.0) || !(b >= 0.0) {
            return Err(Error::InvalidInput(format!("need a >= 1 and b >= 0, got ({a}, {b})")));
        }
        if let Some(g) = images.iter().find(|g| !spec.conforms(g)) {
            return Err(Error::RepresentationMismatch {
                spec: spec.text(),
                element: g.to_string(),
            });
        }
        Ok(RoughIsometry {
            graph,
            root,
            spec,
            generators,
            images,
            a,
            b,
        })
    }

    /// The canonical `(2, 1)` map of the subdivided lattice onto `Z^D`.
    pub fn subdivision(x: &SubdividedLattice) -> Self {
        RoughIsometry {
            graph: x.graph.clone(),
            root: 0,
            spec: x.spec.clone(),
            generators: x.spec.standard_generators(),
            images: x.phi.clone(),
            a: graph::SUBDIVISION_A,
            b: graph::SUBDIVISION_B,
        }
    }

    /// `⌈ab + b⌉`.
    pub fn margin(&self) -> u32 {
        (self.a * self.b + self.b).ceil() as u32
    }

    /// `⌊b⌋`, the radius searched for preimages.
    pub fn b_floor(&self) -> u32 {
        self.b.floor() as u32
    }

    pub fn len(&self) -> usize {
        self.images.len()
    }

    pub fn is_empty(&self) -> bool {
        self.images.is_empty()
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ViolationKind {
    Lower,
    Upper,
    Density,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Violation {
    pub kind: ViolationKind,
    pub x: String,
    pub y: String,
    pub source_distance: Option<u32>,
    pub target_distance: Option<u32>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RoughCheckReport {
    pub a: f64,
    pub b: f64,
    pub pairs_checked: u64,
    pub lower_violations: u64,
    pub upper_violations: u64,
    pub density_checked: u64,
    pub density_violations: u64,
    pub margin: u32,
    /// Up to 20 concrete violations, in a deterministic order.
    pub examples: Vec<Violation>,
}

impl RoughCheckReport {
    pub fn passed(&self) -> bool {
        self.lower_violations == 0 && self.upper_violations == 0 && self.density_violations == 0
    }
}

struct PairOutcome {
    pairs: u64,
    lower: u64,
    upper: u64,
    examples: Vec<Violation>,
}

/// Checks `d_s / a - b <= d_t <= a d_s + b` on all unordered pairs of `0..n`.
/// `d_t = None` means the target distance could not be resolved and counts
/// as an upper violation.
fn pair_check<S, T, L>(n: usize, a: f64, b: f64, d_s: S, d_t: T, label: L) -> PairOutcome
where
    S: Fn(usize, usize) -> u32 + Sync,
    T: Fn(usize, usize) -> Option<u32> + Sync,
    L: Fn(usize) -> String + Sync,
{
    let rows: Vec<PairOutcome> = (0..n)
        .into_par_iter()
        .map(|i| {
            let mut out = PairOutcome {
                pairs: 0,
                lower: 0,
                upper: 0,
                examples: Vec::new(),
            };
            for j in i + 1..n {
                out.pairs += 1;
                let ds = d_s(i, j) as f64;
                let dt = d_t(i, j);
                let kind = match dt {
                    None => Some(ViolationKind::Upper),
                    Some(t) if (t as f64) > a * ds + b => Some(ViolationKind::Upper),
                    Some(t) if ds > a * (t as f64 + b) => Some(ViolationKind::Lower),
                    _ => None,
                };
                match kind {
                    Some(ViolationKind::Upper) => out.upper += 1,
                    Some(_) => out.lower += 1,
                    None => continue,
                }
                if out.examples.len() < MAX_EXAMPLES {
                    out.examples.push(Violation {
                        kind: kind.unwrap(),
                        x: label(i),
                        y: label(j),
                        source_distance: Some(ds as u32),
                        target_distance: dt,
                    });
                }
            }
            out
        })
        .collect();
    let mut total = PairOutcome {
        pairs: 0,
        lower: 0,
        upper: 0,
        examples: Vec::new(),
    };
    for r in rows {
        total.pairs += r.pairs;
        total.lower += r.lower;
        total.upper += r.upper;
        for e in r.examples {
            if total.examples.len() < MAX_EXAMPLES {
                total.examples.push(e);
            }
        }
    }
    total
}

/// Distances and windows shared by the checks on one map.
pub struct RoughContext<'a> {
    pub phi: &'a RoughIsometry,
    pub table: DistanceTable,
    pub metric: WordMetric,
    /// `max_x |φ(root)⁻¹ φ(x)|`.
    pub target_radius: u32,
    image_index: FxHashMap<GroupElement, Vec<u32>>,
}

impl<'a> RoughContext<'a> {
    pub fn new(phi: &'a RoughIsometry) -> Result<Self> {
        let table = DistanceTable::new(&phi.graph)?;
        let center = &phi.images[phi.root];
        let cinv = phi.spec.inverse(center)?;
        // Reach for lengths of φ(root)⁻¹ φ(x): the source window's depth times a, plus b.
        let depth = (0..phi.len()).map(|x| table.get(phi.root, x)).max().unwrap_or(0);
        let bound = (phi.a * depth as f64 + phi.b).ceil() as u32;
        let probe = WordMetric::new(&phi.spec, &phi.generators, bound)?;
        let mut target_radius = 0;
        for g in &phi.images {
            let len = probe
                .length(&phi.spec.multiply(&cinv, g)?)
                .ok_or_else(|| Error::InvalidInput(format!("image {g} is farther than a·depth + b")))?;
            target_radius = target_radius.max(len);
        }
        let metric = WordMetric::new(&phi.spec, &phi.generators, 2 * target_radius + phi.b_floor())?;
        let mut image_index: FxHashMap<GroupElement, Vec<u32>> = FxHashMap::default();
        for (x, g) in phi.images.iter().enumerate() {
            image_index.entry(g.clone()).or_default().push(x as u32);
        }
        Ok(RoughContext {
            phi,
            table,
            metric,
            target_radius,
            image_index,
        })
    }

    /// Target vertices at distance `<= target_radius - margin` from `φ(root)`.
    pub fn target_interior(&self) -> Result<CayleyBall> {
        let r = self.target_radius.saturating_sub(self.phi.margin());
        CayleyBall::enumerate(
            &self.phi.spec,
            &self.phi.generators,
            &self.phi.images[self.phi.root],
            r,
        )
    }

    /// Exhaustive two-sided distance check on all source pairs, plus
    /// `b`-density on the target interior.
    pub fn check(&self) -> Result<RoughCheckReport> {
        let phi = self.phi;
        let pairs = pair_check(
            phi.len(),
            phi.a,
            phi.b,
            |i, j| self.table.get(i, j),
            |i, j| self.metric.distance(&phi.images[i], &phi.images[j]).ok().flatten(),
            |i| format!("x{i}"),
        );
        let interior = self.target_interior()?;
        let offsets = self.metric.offsets(phi.b_floor());
        let uncovered: Vec<usize> = (0..interior.len())
            .into_par_iter()
            .filter(|&i| {
                let y = interior.vertex(i);
                !offsets.iter().any(|o| {
                    phi.spec
                        .multiply(y, o)
                        .map(|z| self.image_index.contains_key(&z))
                        .unwrap_or(false)
                })
            })
            .collect();
        let mut examples = pairs.examples;
        for &i in uncovered.iter() {
            if examples.len() >= MAX_EXAMPLES {
                break;
            }
            examples.push(Violation {
                kind: ViolationKind::Density,
                x: String::new(),
                y: interior.vertex(i).to_string(),
                source_distance: None,
                target_distance: None,
            });
        }
        Ok(RoughCheckReport {
            a: phi.a,
            b: phi.b,
            pairs_checked: pairs.pairs,
            lower_violations: pairs.lower,
            upper_violations: pairs.upper,
            density_checked: interior.len() as u64,
            density_violations: uncovered.len() as u64,
            margin: phi.margin(),
            examples,
        })
    }

    /// `ψ(y)`: among sources whose image is within `b` of `y`, the one at the
    /// smallest target distance, ties broken by smallest source index.
    pub fn rough_inverse(&self) -> Result<RoughInverse> {
        let phi = self.phi;
        let domain = self.target_interior()?;
        let offsets = self.metric.offsets(phi.b_floor());
        let psi: Vec<u32> = (0..domain.len())
            .into_par_iter()
            .map(|i| {
                let y = domain.vertex(i);
                let mut best: Option<(u32, u32)> = None;
                for (k, o) in offsets.iter().enumerate() {
                    let d = self.metric.offset_dist(k);
                    if best.is_some_and(|(bd, _)| d > bd) {
                        break;
                    }
                    let z = phi.spec.multiply(y, o)?;
                    if let Some(xs) = self.image_index.get(&z) {
                        let x = xs[0];
                        if best.is_none_or(|(_, bx)| x < bx) {
                            best = Some((d, x));
                        }
                    }
                }
                best.map(|b| b.1).ok_or_else(|| Error::Uncovered(y.to_string()))
            })
            .collect::<Result<_>>()?;
        let domain_index = (0..domain.len())
            .map(|i| (domain.vertex(i).clone(), i as u32))
            .collect();
        Ok(RoughInverse {
            domain,
            psi,
            domain_index,
        })
    }

    /// Checks `ψ` as an `(a, 3ab)`-rough isometry on its domain.
    pub fn check_inverse(&self, inv: &RoughInverse) -> RoughCheckReport {
        let (a, b) = (self.phi.a, 3.0 * self.phi.a * self.phi.b);
        let d = &inv.domain;
        let pairs = pair_check(
            d.len(),
            a,
            b,
            |i, j| {
                self.metric
                    .distance(d.vertex(i), d.vertex(j))
                    .ok()
                    .flatten()
                    .unwrap_or(u32::MAX)
            },
            |i, j| Some(self.table.get(inv.psi[i] as usize, inv.psi[j] as usize)),
            |i| d.vertex(i).to_string(),
        );
        RoughCheckReport {
            a,
            b,
            pairs_checked: pairs.pairs,
            lower_violations: pairs.lower,
            upper_violations: pairs.upper,
            density_checked: 0,
            density_violations: 0,
            margin: self.phi.margin(),
            examples: pairs.examples,
        }
    }

    /// Checks `ψ ∘ φ: X → X` as an `(a², 4ab)`-rough isometry on the sources
    /// whose image lies in the domain of `ψ`.
    pub fn check_composition(&self, inv: &RoughInverse) -> RoughCheckReport {
        let phi = self.phi;
        let (a, b) = (phi.a * phi.a, 4.0 * phi.a * phi.b);
        let sources: Vec<(usize, usize)> = (0..phi.len())
            .filter_map(|x| inv.apply(&phi.images[x]).map(|px| (x, px)))
            .collect();
        let pairs = pair_check(
            sources.len(),
            a,
            b,
            |i, j| self.table.get(sources[i].0, sources[j].0),
            |i, j| Some(self.table.get(sources[i].1, sources[j].1)),
            |i| format!("x{}", sources[i].0),
        );
        RoughCheckReport {
            a,
            b,
            pairs_checked: pairs.pairs,
            lower_violations: pairs.lower,
            upper_violations: pairs.upper,
            density_checked: 0,
            density_violations: 0,
            margin: phi.margin(),
            examples: pairs.examples,
        }
    }

    /// `|B_p^X(R)| >= C₂ |B_{φ(p)}^G(⌊C₁ R⌋)|` with `C₂ = 1 / max ψ-fiber`,
    /// together with the inclusion `ψ(B_{φ(p)}^G(⌊C₁ R⌋)) ⊆ B_p^X(R)` behind it.
    pub fn volume_sandwich(
        &self,
        inv: &RoughInverse,
        p: usize,
        radii: &[u32],
        c1: f64,
    ) -> Result<Vec<SandwichRow>> {
        let phi = self.phi;
        let window_depth = (0..phi.len()).map(|x| self.table.get(phi.root, x)).max().unwrap_or(0);
        let mut fiber: FxHashMap<u32, usize> = FxHashMap::default();
        for &x in &inv.psi {
            *fiber.entry(x).or_default() += 1;
        }
        let max_fiber = fiber.values().copied().max().unwrap_or(1);
        let c2 = 1.0 / max_fiber as f64;
        let y = &phi.images[p];
        let mut rows = Vec::new();
        for &r in radii {
            if self.table.get(phi.root, p) + r > window_depth {
                return Err(Error::InvalidInput(format!(
                    "B_p^X({r}) leaves the source window"
                )));
            }
            let x_ball = (0..phi.len()).filter(|&x| self.table.get(p, x) <= r).count();
            let gr = (c1 * r as f64).floor() as u32;
            let g_ball = CayleyBall::enumerate(&phi.spec, &phi.generators, y, gr)?;
            let mut inclusion = true;
            for z in g_ball.vertices() {
                match inv.apply(z) {
                    Some(x) if self.table.get(p, x) <= r => {}
                    _ => {
                        inclusion = false;
                        break;
                    }
                }
            }
            rows.push(SandwichRow {
                r,
                x_ball,
                g_ball: g_ball.len(),
                c1,
                c2,
                holds: x_ball as f64 >= c2 * g_ball.len() as f64,
                inclusion,
            });
        }
        Ok(rows)
    }
}

#[derive(Clone, Debug)]
pub struct RoughInverse {
    /// Target vertices on which `ψ` is defined.
    pub domain: CayleyBall,
    /// `psi[i]` is the source index assigned to `domain.vertex(i)`.
    pub psi: Vec<u32>,
    domain_index: FxHashMap<GroupElement, u32>,
}

impl RoughInverse {
    pub fn apply(&self, y: &GroupElement) -> Option<usize> {
        self.domain_index.get(y).map(|&i| self.psi[i as usize] as usize)
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SandwichRow {
    pub r: u32,
    pub x_ball: usize,
    pub g_ball: usize,
    pub c1: f64,
    pub c2: f64,
    pub holds: bool,
    pub inclusion: bool,
}

/// `q = Δ^{⌊ab⌋ + 1}`.
pub fn injectivity_order(degree_bound: usize, a: f64, b: f64) -> Result<u64> {
    let e = (a * b).floor() as u32 + 1;
    (degree_bound as u64)
        .checked_pow(e)
        .filter(|&q| q >= 1)
        .ok_or(Error::Overflow)
}

/// `φ′ = (φ, residue)` into `G × Z_q`.
#[derive(Clone, Debug)]
pub struct Injectivized {
    pub q: u64,
    pub spec: GroupSpec,
    pub generators: GeneratingSet,
    pub images: Vec<GroupElement>,
    pub max_fiber: usize,
}

impl Injectivized {
    pub fn is_injective(&self) -> bool {
        let set: FxHashSet<&GroupElement> = self.images.iter().collect();
        set.len() == self.images.len()
    }

    /// `π_G ∘ φ′ = φ`.
    pub fn projects_to(&self, phi: &RoughIsometry) -> bool {
        self.images
            .iter()
            .zip(&phi.images)
            .all(|(p, g)| self.spec.split_product(p).is_some_and(|(base, _)| &base == g))
    }
}

/// Separates each fiber of `φ` by residues `0, 1, ..` in source-index order.
pub fn injectivize(phi: &RoughIsometry, degree_bound: usize) -> Result<Injectivized> {
    let q = injectivity_order(degree_bound, phi.a, phi.b)?;
    let spec = GroupSpec::product(phi.spec.clone(), q)?;
    let mut next: FxHashMap<&GroupElement, u64> = FxHashMap::default();
    let mut images = Vec::with_capacity(phi.len());
    let mut max_fiber = 0;
    for g in &phi.images {
        let slot = next.entry(g).or_insert(0);
        if *slot >= q {
            let size = phi.images.iter().filter(|h| *h == g).count();
            return Err(Error::FiberOverflow {
                target: g.to_string(),
                size,
                q,
            });
        }
        images.push(spec.join_product(g, *slot));
        *slot += 1;
        max_fiber = max_fiber.max(*slot as usize);
    }
    let generators = product_generators(&spec, &phi.generators)?;
    Ok(Injectivized {
        q,
        spec,
        generators,
        images,
        max_fiber,
    })
}

/// `S × {0} ∪ {(e, ±1)}` for an arbitrary base generating set.
pub fn product_generators(spec: &GroupSpec, base: &GeneratingSet) -> Result<GeneratingSet> {
    let GroupSpec::Product { base: base_spec, q } = spec else {
        return Err(Error::InvalidInput("product generators need a product spec".into()));
    };
    let mut elements: Vec<GroupElement> = base.elements().iter().map(|s| spec.join_product(s, 0)).collect();
    for r in [1 % q, (q - 1 % q) % q] {
        elements.push(spec.join_product(&base_spec.identity(), r));
    }
    let identity = spec.identity();
    elements.retain(|e| *e != identity);
    GeneratingSet::new(spec, elements, format!("{}+cyclic", base.convention()))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn identity_map(w: u32) -> RoughIsometry {
        let spec = GroupSpec::lattice(2).unwrap();
        let ball = CayleyBall::enumerate(&spec, &spec.standard_generators(), &spec.identity(), w).unwrap();
        let mut edges = Vec::new();
        for i in 0..ball.len() {
            for &j in ball.neighbors(i) {
                if (j as usize) > i {
                    edges.push((i as u32, j));
                }
            }
        }
        let graph = FiniteGraph::from_edges(ball.len(), &edges).unwrap();
        RoughIsometry::new(graph, 0, spec.clone(), spec.standard_generators(), ball.vertices().to_vec(), 1.0, 0.0)
            .unwrap()
    }

    #[test]
    fn identity_passes_and_inverts() {
        let phi = identity_map(6);
        let ctx = RoughContext::new(&phi).unwrap();
        let rep = ctx.check().unwrap();
        assert!(rep.passed(), "{rep:?}");
        let inv = ctx.rough_inverse().unwrap();
        for (i, &x) in inv.psi.iter().enumerate() {
            assert_eq!(&phi.images[x as usize], inv.domain.vertex(i));
        }
        assert!(ctx.check_inverse(&inv).passed());
    }

    #[test]
    fn constant_map_fails_lower_bound() {
        let mut phi = identity_map(2);
        let spec = phi.spec.clone();
        phi.images = vec![spec.identity(); phi.len()];
        let ctx = RoughContext::new(&phi).unwrap();
        let rep = ctx.check().unwrap();
        assert!(rep.lower_violations > 0);
        assert!(!rep.passed());
    }

    #[test]
    fn density_failure_blocks_inverse() {
        let x = make_subdivided_lattice(2, 8).unwrap();
        let mut phi = RoughIsometry::subdivision(&x);
        // Scale the images by 3: distances stretch and the image becomes sparse.
        phi.images = phi
            .images
            .iter()
            .map(|g| GroupElement::new(g.coords().iter().map(|c| 3 * c)))
            .collect();
        let ctx = RoughContext::new(&phi).unwrap();
        assert!(ctx.check().unwrap().density_violations > 0);
        assert!(matches!(ctx.rough_inverse(), Err(Error::Uncovered(_))));
    }

    #[test]
    fn injectivity_orders() {
        assert_eq!(injectivity_order(4, 1.0, 1.0).unwrap(), 16);
        assert_eq!(injectivity_order(4, 2.0, 1.0).unwrap(), 64);
        assert_eq!(injectivity_order(2, 2.0, 1.0).unwrap(), 8);
        assert!(injectivity_order(1000, 10.0, 10.0).is_err());
    }

    #[test]
    fn injective_map_gets_residue_zero() {
        let phi = identity_map(3);
        let inj = injectivize(&phi, 4).unwrap();
        assert_eq!(inj.q, 4);
        assert_eq!(inj.max_fiber, 1);
        assert!(inj.images.iter().all(|g| *g.coords().last().unwrap() == 0));
        assert!(inj.projects_to(&phi));
        assert_eq!(inj.generators.len(), 6);
    }

    #[test]
    fn fiber_overflow_is_reported() {
        let mut phi = identity_map(2);
        phi.images = vec![phi.spec.identity(); phi.len()];
        assert!(matches!(injectivize(&phi, 2), Err(Error::FiberOverflow { .. })));
    }
}
