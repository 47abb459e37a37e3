//! The extension operator `E u = ũ` on `G′ = G × Z_q` for an injective
//! rough isometry `φ′: X → G′`.
//!
//! `ũ(y) = u(x)` when `y = φ′(x)`, and otherwise the average of `u` over
//! `W_y = {x : d_{G′}(φ′(x), y) <= w}`. Two routes compute it: a
//! materialized one that lists `W_y` for every `y`, and a layered one for
//! products that accumulates per-residue sums by base distance.

use std::ops::AddAssign;
use std::sync::Arc;

use rayon::prelude::*;
use rustc_hash::FxHashMap;
use serde::{Deserialize, Serialize};

use crate::balls::CayleyBall;
use crate::groups::{GeneratingSet, GroupElement, GroupSpec};
use crate::numeric::NeumaierSum;
use crate::rough::metric::WordMetric;
use crate::rough::Injectivized;
use crate::{Error, Result};

/// Scalar types the operator can be applied to. Integer fields use `i128`
/// sums so linearity can be checked exactly.
pub trait Accumulate: Copy + Default + Send + Sync + AddAssign {}
impl Accumulate for f64 {}
impl Accumulate for i128 {}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Provenance {
    /// `y = φ′(x)` for this source.
    Direct(u32),
    /// Average over `|W_y|` sources.
    Averaged(u32),
}

impl Provenance {
    pub fn count(&self) -> u32 {
        match self {
            Provenance::Direct(_) => 1,
            Provenance::Averaged(n) => *n,
        }
    }
}

/// `ũ` on a ball of `G′`.
#[derive(Clone, Debug)]
pub struct ExtensionField {
    pub ball: Arc<CayleyBall>,
    pub values: Vec<f64>,
    pub provenance: Arc<Vec<Provenance>>,
    pub w_radius: u32,
}

impl ExtensionField {
    fn from_sums(
        ball: &Arc<CayleyBall>,
        sums: Vec<f64>,
        provenance: &Arc<Vec<Provenance>>,
        w_radius: u32,
    ) -> Self {
        let values = sums
            .iter()
            .zip(provenance.iter())
            .map(|(s, p)| s / p.count() as f64)
            .collect();
        ExtensionField {
            ball: ball.clone(),
            values,
            provenance: provenance.clone(),
            w_radius,
        }
    }

    pub fn sup_norm(&self) -> f64 {
        self.values.iter().fold(0.0, |m, v| m.max(v.abs()))
    }
}

/// `ũ(y)² |B_y(R)| / Σ_{B_y(R)} ũ²`, with `y` a vertex index of the field's ball.
pub fn mvl_constant(field: &ExtensionField, y: usize, r: u32) -> Result<f64> {
    let sub = field.ball.sub_ball(y, r)?;
    let s = sub
        .iter()
        .map(|i| field.values[i] * field.values[i])
        .collect::<NeumaierSum>()
        .value();
    if s == 0.0 {
        return Err(Error::ZeroDenominator);
    }
    Ok(field.values[y] * field.values[y] * sub.len() as f64 / s)
}

/// `b + ⌊q/2⌋`.
pub fn w_radius(b: f64, q: u64) -> u32 {
    b.floor() as u32 + (q / 2) as u32
}

fn check_determined(region: &CayleyBall, w: u32, complete_radius: u32) -> Result<()> {
    if region.radius() + w > complete_radius {
        return Err(Error::UndeterminedRegion(format!(
            "region radius {} plus w = {w} exceeds the complete-fiber radius {complete_radius}",
            region.radius()
        )));
    }
    Ok(())
}

fn image_map(inj: &Injectivized) -> FxHashMap<GroupElement, u32> {
    inj.images
        .iter()
        .enumerate()
        .map(|(x, g)| (g.clone(), x as u32))
        .collect()
}

enum Row {
    Direct(u32),
    Average(Vec<u32>),
}

/// Materialized route: every `W_y` is listed explicitly.
pub struct ExtensionOperator {
    region: Arc<CayleyBall>,
    w_radius: u32,
    rows: Vec<Row>,
    provenance: Arc<Vec<Provenance>>,
}

impl ExtensionOperator {
    /// `complete_radius` bounds the `G′`-radius inside which every preimage
    /// of `φ′` is present in the source window.
    pub fn new(
        inj: &Injectivized,
        region: Arc<CayleyBall>,
        w: u32,
        complete_radius: u32,
    ) -> Result<Self> {
        check_determined(&region, w, complete_radius)?;
        let images = image_map(inj);
        let metric = WordMetric::new(&inj.spec, &inj.generators, w)?;
        let offsets = metric.offsets(w);
        let rows: Vec<Row> = (0..region.len())
            .into_par_iter()
            .map(|i| {
                let y = region.vertex(i);
                if let Some(&x) = images.get(y) {
                    return Ok(Row::Direct(x));
                }
                let mut members = Vec::new();
                for o in offsets {
                    if let Some(&x) = images.get(&inj.spec.multiply(y, o)?) {
                        members.push(x);
                    }
                }
                if members.is_empty() {
                    return Err(Error::EmptyW(y.to_string()));
                }
                members.sort_unstable();
                Ok(Row::Average(members))
            })
            .collect::<Result<_>>()?;
        let provenance = Arc::new(
            rows.iter()
                .map(|r| match r {
                    Row::Direct(x) => Provenance::Direct(*x),
                    Row::Average(m) => Provenance::Averaged(m.len() as u32),
                })
                .collect(),
        );
        Ok(ExtensionOperator {
            region,
            w_radius: w,
            rows,
            provenance,
        })
    }

    pub fn region(&self) -> &Arc<CayleyBall> {
        &self.region
    }

    pub fn provenance(&self) -> &[Provenance] {
        &self.provenance
    }

    /// Numerators of `ũ`; the denominators are `provenance()[i].count()`.
    pub fn sums<T: Accumulate>(&self, u: &[T]) -> Vec<T> {
        self.rows
            .par_iter()
            .map(|row| match row {
                Row::Direct(x) => u[*x as usize],
                Row::Average(m) => {
                    let mut s = T::default();
                    for &x in m {
                        s += u[x as usize];
                    }
                    s
                }
            })
            .collect()
    }

    pub fn apply(&self, u: &[f64]) -> ExtensionField {
        ExtensionField::from_sums(&self.region, self.sums(u), &self.provenance, self.w_radius)
    }
}

/// Layered route for `G′ = G × Z_q`: for each base point `g` and each
/// residue `k` in use, cumulative sums of `u` over sources with residue `k`
/// and base image within distance `t` of `g`. Then
/// `Σ_{W_(g,s)} u = Σ_k S_k(g, w - d_q(s, k))`.
pub struct ProductExtension {
    region: Arc<CayleyBall>,
    w_radius: u32,
    q: u64,
    base_spec: GroupSpec,
    base_offsets: Vec<(GroupElement, u32)>,
    /// Sources by residue, keyed by base image.
    by_residue: Vec<(u64, FxHashMap<GroupElement, u32>)>,
    /// Region vertices grouped by base part: `(base, [(vertex, residue)])`.
    groups: Vec<(GroupElement, Vec<(u32, u64)>)>,
    direct: Vec<Option<u32>>,
    provenance: Arc<Vec<Provenance>>,
}

impl ProductExtension {
    pub fn new(
        inj: &Injectivized,
        region: Arc<CayleyBall>,
        w: u32,
        complete_radius: u32,
    ) -> Result<Self> {
        check_determined(&region, w, complete_radius)?;
        let GroupSpec::Product { base, q } = &inj.spec else {
            return Err(Error::InvalidInput("layered route needs a product group".into()));
        };
        let base_spec = (**base).clone();
        let base_elements: Vec<GroupElement> = inj
            .generators
            .elements()
            .iter()
            .filter_map(|s| inj.spec.split_product(s))
            .filter(|(_, r)| *r == 0)
            .map(|(g, _)| g)
            .collect();
        let base_gens = GeneratingSet::new(&base_spec, base_elements, "base".to_string())?;
        let metric = WordMetric::new(&base_spec, &base_gens, w)?;
        let base_offsets = metric
            .offsets(w)
            .iter()
            .enumerate()
            .map(|(i, o)| (o.clone(), metric.offset_dist(i)))
            .collect();

        let mut residues: FxHashMap<u64, FxHashMap<GroupElement, u32>> = FxHashMap::default();
        for (x, g) in inj.images.iter().enumerate() {
            let (b, k) = inj.spec.split_product(g).expect("product element");
            residues.entry(k).or_default().insert(b, x as u32);
        }
        let mut by_residue: Vec<_> = residues.into_iter().collect();
        by_residue.sort_by_key(|(k, _)| *k);

        let images = image_map(inj);
        let mut direct = Vec::with_capacity(region.len());
        let mut group_index: FxHashMap<GroupElement, usize> = FxHashMap::default();
        let mut groups: Vec<(GroupElement, Vec<(u32, u64)>)> = Vec::new();
        for (i, y) in region.vertices().iter().enumerate() {
            direct.push(images.get(y).copied());
            let (b, s) = inj.spec.split_product(y).expect("product element");
            let slot = *group_index.entry(b.clone()).or_insert_with(|| {
                groups.push((b, Vec::new()));
                groups.len() - 1
            });
            groups[slot].1.push((i as u32, s));
        }
        let mut op = ProductExtension {
            region,
            w_radius: w,
            q: *q,
            base_spec,
            base_offsets,
            by_residue,
            groups,
            direct,
            provenance: Arc::new(Vec::new()),
        };
        let (_, counts) = op.run::<f64>(&[])?;
        op.provenance = Arc::new(
            op.direct
                .iter()
                .zip(counts)
                .map(|(d, n)| match d {
                    Some(x) => Provenance::Direct(*x),
                    None => Provenance::Averaged(n),
                })
                .collect(),
        );
        Ok(op)
    }

    pub fn region(&self) -> &Arc<CayleyBall> {
        &self.region
    }

    pub fn provenance(&self) -> &[Provenance] {
        &self.provenance
    }

    fn cyclic_dist(&self, s: u64, k: u64) -> u32 {
        let d = s.abs_diff(k);
        d.min(self.q - d) as u32
    }

    /// Per-field numerators and `|W_y|` for every region vertex.
    fn run<T: Accumulate>(&self, fields: &[&[T]]) -> Result<(Vec<Vec<T>>, Vec<u32>)> {
        let w = self.w_radius as usize;
        let nf = fields.len();
        let per_group: Vec<Vec<(u32, Vec<T>, u32)>> = self
            .groups
            .par_iter()
            .map(|(g, members)| {
                // layers[k][t] = (count, sums per field) at exact base distance t
                let mut cum: Vec<(Vec<u32>, Vec<T>)> = Vec::with_capacity(self.by_residue.len());
                for (_, sources) in &self.by_residue {
                    let mut cnt = vec![0u32; w + 1];
                    let mut sums = vec![T::default(); (w + 1) * nf];
                    for (o, t) in &self.base_offsets {
                        let h = self.base_spec.multiply(g, o)?;
                        if let Some(&x) = sources.get(&h) {
                            let t = *t as usize;
                            cnt[t] += 1;
                            for (f, u) in fields.iter().enumerate() {
                                sums[t * nf + f] += u[x as usize];
                            }
                        }
                    }
                    for t in 1..=w {
                        cnt[t] += cnt[t - 1];
                        for f in 0..nf {
                            let prev = sums[(t - 1) * nf + f];
                            sums[t * nf + f] += prev;
                        }
                    }
                    cum.push((cnt, sums));
                }
                let mut out = Vec::with_capacity(members.len());
                for &(i, s) in members {
                    if let Some(x) = self.direct[i as usize] {
                        let vals = fields.iter().map(|u| u[x as usize]).collect();
                        out.push((i, vals, 1));
                        continue;
                    }
                    let mut n = 0u32;
                    let mut vals = vec![T::default(); nf];
                    for ((k, _), (cnt, sums)) in self.by_residue.iter().zip(&cum) {
                        let d = self.cyclic_dist(s, *k) as usize;
                        if d > w {
                            continue;
                        }
                        let t = w - d;
                        n += cnt[t];
                        for f in 0..nf {
                            vals[f] += sums[t * nf + f];
                        }
                    }
                    if n == 0 {
                        return Err(Error::EmptyW(self.region.vertex(i as usize).to_string()));
                    }
                    out.push((i, vals, n));
                }
                Ok(out)
            })
            .collect::<Result<_>>()?;
        let len = self.region.len();
        let mut sums = vec![vec![T::default(); len]; nf];
        let mut counts = vec![0u32; len];
        for group in per_group {
            for (i, vals, n) in group {
                counts[i as usize] = n;
                for (f, v) in vals.into_iter().enumerate() {
                    sums[f][i as usize] = v;
                }
            }
        }
        Ok((sums, counts))
    }

    /// Numerators of `ũ` for each field; denominators are `provenance()[i].count()`.
    pub fn sums<T: Accumulate>(&self, fields: &[&[T]]) -> Result<Vec<Vec<T>>> {
        Ok(self.run(fields)?.0)
    }

    pub fn apply_batch(&self, fields: &[&[f64]]) -> Result<Vec<ExtensionField>> {
        Ok(self
            .sums(fields)?
            .into_iter()
            .map(|s| ExtensionField::from_sums(&self.region, s, &self.provenance, self.w_radius))
            .collect())
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rough::{injectivize, make_subdivided_lattice, RoughIsometry};
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn setup(dim: usize, window: u32, rho: u32) -> (Injectivized, Arc<CayleyBall>, u32, u32, usize) {
        let x = make_subdivided_lattice(dim, window).unwrap();
        let phi = RoughIsometry::subdivision(&x);
        let inj = injectivize(&phi, x.degree_bound()).unwrap();
        let w = w_radius(phi.b, inj.q);
        let region = Arc::new(
            CayleyBall::enumerate(&inj.spec, &inj.generators, &inj.spec.identity(), rho).unwrap(),
        );
        (inj, region, w, x.complete_fiber_radius(), x.len())
    }

    #[test]
    fn routes_agree_on_subdivided_line() {
        let (inj, region, w, complete, n) = setup(1, 12, 5);
        assert_eq!(inj.q, 8);
        assert_eq!(w, 5);
        let slow = ExtensionOperator::new(&inj, region.clone(), w, complete).unwrap();
        let fast = ProductExtension::new(&inj, region, w, complete).unwrap();
        assert_eq!(slow.provenance(), fast.provenance());
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        let ints: Vec<i128> = (0..n).map(|_| rng.gen_range(-1000..=1000)).collect();
        assert_eq!(slow.sums(&ints), fast.sums(&[&ints]).unwrap()[0]);
        let floats: Vec<f64> = (0..n).map(|_| rng.gen_range(-1.0..1.0)).collect();
        let a = slow.apply(&floats);
        let b = &fast.apply_batch(&[&floats]).unwrap()[0];
        for (p, q) in a.values.iter().zip(&b.values) {
            assert!((p - q).abs() <= 1e-12, "{p} vs {q}");
        }
    }

    #[test]
    fn constants_extend_to_constants() {
        let (inj, region, w, complete, n) = setup(2, 40, 4);
        let op = ProductExtension::new(&inj, region, w, complete).unwrap();
        let u = vec![2.5; n];
        let e = &op.apply_batch(&[&u]).unwrap()[0];
        assert!(e.values.iter().all(|&v| (v - 2.5).abs() < 1e-12));
        assert!((mvl_constant(e, 0, 3).unwrap() - 1.0).abs() < 1e-12);
    }

    #[test]
    fn zero_field_has_no_mvl_constant() {
        let (inj, region, w, complete, n) = setup(1, 12, 4);
        let op = ExtensionOperator::new(&inj, region, w, complete).unwrap();
        let e = op.apply(&vec![0.0; n]);
        assert!(matches!(mvl_constant(&e, 0, 2), Err(Error::ZeroDenominator)));
    }

    #[test]
    fn undetermined_region_is_rejected() {
        let (inj, region, w, complete, _) = setup(1, 8, 4);
        assert!(region.radius() + w > complete);
        assert!(matches!(
            ProductExtension::new(&inj, region, w, complete),
            Err(Error::UndeterminedRegion(_))
        ));
    }
}
