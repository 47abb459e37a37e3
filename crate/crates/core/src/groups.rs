//! Exact arithmetic for the supported groups of polynomial growth.
//!
//! Elements are stored as flat coordinate vectors; the owning [`GroupSpec`]
//! decides how the coordinates are read:
//!
//! | group              | coordinates                                  |
//! |--------------------|----------------------------------------------|
//! | `Z^D`              | `x_1, .., x_D`                               |
//! | Heisenberg `H3(Z)` | `(a, b, c)` for the matrix `[[1,a,c],[0,1,b],[0,0,1]]` |
//! | `base x Z_q`       | base coordinates followed by the residue     |
//!
//! All arithmetic is checked; overflow is reported as [`Error::Overflow`].

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};
use smallvec::SmallVec;

use crate::{Error, Result};

/// Identifier recorded for the generating sets produced by [`GroupSpec::standard_generators`].
pub const STANDARD_CONVENTION: &str = "standard";

pub type Coords = SmallVec<[i64; 4]>;

/// A finitely generated group from the supported family.
#[derive(Clone, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase")]
pub enum GroupSpec {
    Lattice {
        #[serde(rename = "D")]
        dim: usize,
    },
    Heisenberg,
    Product {
        base: Box<GroupSpec>,
        q: u64,
    },
}

/// Element of a group, read through its [`GroupSpec`].
#[derive(Clone, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct GroupElement(Coords);

impl GroupElement {
    pub fn new(coords: impl IntoIterator<Item = i64>) -> Self {
        GroupElement(coords.into_iter().collect())
    }

    pub fn coords(&self) -> &[i64] {
        &self.0
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }
}

impl fmt::Display for GroupElement {
    /// Canonical text form: comma-joined integers.
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for (i, c) in self.0.iter().enumerate() {
            if i > 0 {
                f.write_str(",")?;
            }
            write!(f, "{c}")?;
        }
        Ok(())
    }
}

impl fmt::Debug for GroupElement {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "({self})")
    }
}

impl FromStr for GroupElement {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let s = s.trim().trim_start_matches('(').trim_end_matches(')');
        if s.is_empty() {
            return Err(Error::Parse(format!("empty group element `{s}`")));
        }
        s.split(',')
            .map(|t| {
                t.trim()
                    .parse::<i64>()
                    .map_err(|e| Error::Parse(format!("bad coordinate `{t}`: {e}")))
            })
            .collect::<Result<Coords>>()
            .map(GroupElement)
    }
}

impl GroupSpec {
    pub fn lattice(dim: usize) -> Result<Self> {
        let spec = GroupSpec::Lattice { dim };
        spec.validate()?;
        Ok(spec)
    }

    pub fn heisenberg() -> Self {
        GroupSpec::Heisenberg
    }

    pub fn product(base: GroupSpec, q: u64) -> Result<Self> {
        let spec = GroupSpec::Product {
            base: Box::new(base),
            q,
        };
        spec.validate()?;
        Ok(spec)
    }

    pub fn validate(&self) -> Result<()> {
        match self {
            GroupSpec::Lattice { dim } if *dim == 0 => {
                Err(Error::InvalidSpec("lattice dimension must be at least 1".into()))
            }
            GroupSpec::Lattice { .. } | GroupSpec::Heisenberg => Ok(()),
            GroupSpec::Product { q, .. } if *q == 0 => {
                Err(Error::InvalidSpec("cyclic order must be at least 1".into()))
            }
            GroupSpec::Product { base, .. } => base.validate(),
        }
    }

    /// Growth degree `D` with `β(n) ≍ n^D`: `D` for `Z^D`, 4 for the
    /// Heisenberg group (Bass–Guivarc'h), unchanged by a finite factor.
    pub fn homogeneous_dimension(&self) -> u32 {
        match self {
            GroupSpec::Lattice { dim } => *dim as u32,
            GroupSpec::Heisenberg => 4,
            GroupSpec::Product { base, .. } => base.homogeneous_dimension(),
        }
    }

    /// Number of integer coordinates an element carries.
    pub fn coord_len(&self) -> usize {
        match self {
            GroupSpec::Lattice { dim } => *dim,
            GroupSpec::Heisenberg => 3,
            GroupSpec::Product { base, .. } => base.coord_len() + 1,
        }
    }

    /// Short canonical name, e.g. `z2`, `heisenberg`, `z2xZ16`.
    pub fn text(&self) -> String {
        match self {
            GroupSpec::Lattice { dim } => format!("z{dim}"),
            GroupSpec::Heisenberg => "heisenberg".to_string(),
            GroupSpec::Product { base, q } => format!("{}xZ{q}", base.text()),
        }
    }

    pub fn conforms(&self, g: &GroupElement) -> bool {
        g.len() == self.coord_len() && self.conforms_slice(g.coords())
    }

    fn conforms_slice(&self, c: &[i64]) -> bool {
        match self {
            GroupSpec::Product { base, q } => {
                let (b, r) = c.split_at(c.len() - 1);
                r[0] >= 0 && (r[0] as u64) < *q && base.conforms_slice(b)
            }
            _ => true,
        }
    }

    fn check(&self, g: &GroupElement) -> Result<()> {
        if self.conforms(g) {
            Ok(())
        } else {
            Err(Error::RepresentationMismatch {
                spec: self.text(),
                element: g.to_string(),
            })
        }
    }

    pub fn identity(&self) -> GroupElement {
        GroupElement(SmallVec::from_elem(0, self.coord_len()))
    }

    pub fn multiply(&self, g: &GroupElement, h: &GroupElement) -> Result<GroupElement> {
        self.check(g)?;
        self.check(h)?;
        let mut out = Coords::with_capacity(g.len());
        self.mul_into(g.coords(), h.coords(), &mut out)?;
        Ok(GroupElement(out))
    }

    /// Multiplication without the conformance check, for hot loops over
    /// elements already known to belong to this group.
    pub(crate) fn multiply_unchecked(
        &self,
        g: &GroupElement,
        h: &GroupElement,
    ) -> Result<GroupElement> {
        let mut out = Coords::with_capacity(g.len());
        self.mul_into(g.coords(), h.coords(), &mut out)?;
        Ok(GroupElement(out))
    }

    fn mul_into(&self, g: &[i64], h: &[i64], out: &mut Coords) -> Result<()> {
        match self {
            GroupSpec::Lattice { .. } => {
                for (a, b) in g.iter().zip(h) {
                    out.push(a.checked_add(*b).ok_or(Error::Overflow)?);
                }
            }
            GroupSpec::Heisenberg => {
                // (a,b,c)(a',b',c') = (a+a', b+b', c+c'+ab')
                let cross = g[0].checked_mul(h[1]).ok_or(Error::Overflow)?;
                out.push(g[0].checked_add(h[0]).ok_or(Error::Overflow)?);
                out.push(g[1].checked_add(h[1]).ok_or(Error::Overflow)?);
                out.push(
                    g[2].checked_add(h[2])
                        .and_then(|s| s.checked_add(cross))
                        .ok_or(Error::Overflow)?,
                );
            }
            GroupSpec::Product { base, q } => {
                let n = g.len() - 1;
                base.mul_into(&g[..n], &h[..n], out)?;
                let r = (g[n] as i128 + h[n] as i128).rem_euclid(*q as i128);
                out.push(r as i64);
            }
        }
        Ok(())
    }

    pub fn inverse(&self, g: &GroupElement) -> Result<GroupElement> {
        self.check(g)?;
        let mut out = Coords::with_capacity(g.len());
        self.inv_into(g.coords(), &mut out)?;
        Ok(GroupElement(out))
    }

    fn inv_into(&self, g: &[i64], out: &mut Coords) -> Result<()> {
        match self {
            GroupSpec::Lattice { .. } => {
                for a in g {
                    out.push(a.checked_neg().ok_or(Error::Overflow)?);
                }
            }
            GroupSpec::Heisenberg => {
                // (a,b,c)^-1 = (-a, -b, ab - c)
                let ab = g[0].checked_mul(g[1]).ok_or(Error::Overflow)?;
                out.push(g[0].checked_neg().ok_or(Error::Overflow)?);
                out.push(g[1].checked_neg().ok_or(Error::Overflow)?);
                out.push(ab.checked_sub(g[2]).ok_or(Error::Overflow)?);
            }
            GroupSpec::Product { base, q } => {
                let n = g.len() - 1;
                base.inv_into(&g[..n], out)?;
                out.push(((*q as i128 - g[n] as i128).rem_euclid(*q as i128)) as i64);
            }
        }
        Ok(())
    }

    /// The standard symmetric generating set: `{±e_i}` for `Z^D`,
    /// `{(±1,0,0),(0,±1,0)}` for the Heisenberg group and
    /// `S x {0} ∪ {(e, ±1)}` for a product with a cyclic group.
    pub fn standard_generators(&self) -> GeneratingSet {
        let elements = self.standard_generator_elements();
        GeneratingSet {
            elements,
            convention: STANDARD_CONVENTION.to_string(),
        }
    }

    fn standard_generator_elements(&self) -> Vec<GroupElement> {
        match self {
            GroupSpec::Lattice { dim } => {
                let mut out = Vec::with_capacity(2 * dim);
                for i in 0..*dim {
                    for sign in [1, -1] {
                        let mut c = self.identity();
                        c.0[i] = sign;
                        out.push(c);
                    }
                }
                out
            }
            GroupSpec::Heisenberg => vec![
                GroupElement::new([1, 0, 0]),
                GroupElement::new([-1, 0, 0]),
                GroupElement::new([0, 1, 0]),
                GroupElement::new([0, -1, 0]),
            ],
            GroupSpec::Product { base, q } => {
                let mut out: Vec<GroupElement> = base
                    .standard_generator_elements()
                    .into_iter()
                    .map(|mut s| {
                        s.0.push(0);
                        s
                    })
                    .collect();
                let mut unit = base.identity();
                unit.0.push(0);
                for r in [1 % *q, (*q - 1 % *q) % *q] {
                    let mut s = unit.clone();
                    *s.0.last_mut().unwrap() = r as i64;
                    if s != unit && !out.contains(&s) {
                        out.push(s);
                    }
                }
                out
            }
        }
    }

    /// Splits a product element into its base part and residue.
    pub fn split_product(&self, g: &GroupElement) -> Option<(GroupElement, u64)> {
        match self {
            GroupSpec::Product { .. } => {
                let n = g.len() - 1;
                Some((GroupElement::new(g.0[..n].iter().copied()), g.0[n] as u64))
            }
            _ => None,
        }
    }

    pub fn join_product(&self, base: &GroupElement, residue: u64) -> GroupElement {
        let mut c = base.0.clone();
        c.push(residue as i64);
        GroupElement(c)
    }
}

impl fmt::Display for GroupSpec {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.text())
    }
}

impl FromStr for GroupSpec {
    type Err = Error;

    /// Accepts the short names produced by [`GroupSpec::text`] (`z3`,
    /// `heisenberg`, `h3`, `z2xZ16`) or the JSON object form.
    fn from_str(s: &str) -> Result<Self> {
        let s = s.trim();
        if s.starts_with('{') {
            let spec: GroupSpec = serde_json::from_str(s)
                .map_err(|e| Error::Parse(format!("group spec json: {e}")))?;
            spec.validate()?;
            return Ok(spec);
        }
        if let Some((base, q)) = s.rsplit_once("xZ").or_else(|| s.rsplit_once("xz")) {
            let q: u64 = q
                .parse()
                .map_err(|_| Error::Parse(format!("bad cyclic order in `{s}`")))?;
            return GroupSpec::product(base.parse()?, q);
        }
        match s.to_ascii_lowercase().as_str() {
            "heisenberg" | "h3" | "heis" => Ok(GroupSpec::Heisenberg),
            other => match other.strip_prefix('z').map(str::parse::<usize>) {
                Some(Ok(dim)) => GroupSpec::lattice(dim),
                _ => Err(Error::Parse(format!("unknown group `{s}`"))),
            },
        }
    }
}

/// A finite symmetric generating set without the identity.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct GeneratingSet {
    elements: Vec<GroupElement>,
    convention: String,
}

impl GeneratingSet {
    /// Builds a custom generating set, deduplicating and checking symmetry.
    pub fn new(
        spec: &GroupSpec,
        elements: impl IntoIterator<Item = GroupElement>,
        convention: impl Into<String>,
    ) -> Result<Self> {
        let identity = spec.identity();
        let mut out: Vec<GroupElement> = Vec::new();
        for s in elements {
            spec.check(&s)?;
            if s == identity {
                return Err(Error::InvalidGenerators("identity in generating set".into()));
            }
            if !out.contains(&s) {
                out.push(s);
            }
        }
        if out.is_empty() {
            return Err(Error::InvalidGenerators("empty generating set".into()));
        }
        for s in &out {
            let inv = spec.inverse(s)?;
            if !out.contains(&inv) {
                return Err(Error::InvalidGenerators(format!(
                    "not symmetric: inverse of {s} missing"
                )));
            }
        }
        Ok(GeneratingSet {
            elements: out,
            convention: convention.into(),
        })
    }

    /// Parses `standard` or a `;`-separated list of elements such as `1,0;-1,0;0,1;0,-1`.
    pub fn parse(spec: &GroupSpec, text: &str) -> Result<Self> {
        let text = text.trim();
        if text.is_empty() || text == STANDARD_CONVENTION {
            return Ok(spec.standard_generators());
        }
        let elements = text
            .split(';')
            .map(str::parse)
            .collect::<Result<Vec<GroupElement>>>()?;
        GeneratingSet::new(spec, elements, format!("custom:{text}"))
    }

    pub fn elements(&self) -> &[GroupElement] {
        &self.elements
    }

    pub fn len(&self) -> usize {
        self.elements.len()
    }

    pub fn is_empty(&self) -> bool {
        self.elements.is_empty()
    }

    pub fn convention(&self) -> &str {
        &self.convention
    }

    /// `;`-joined element list, used in cache headers and reports.
    pub fn text(&self) -> String {
        self.elements
            .iter()
            .map(ToString::to_string)
            .collect::<Vec<_>>()
            .join(";")
    }

    pub fn is_symmetric(&self, spec: &GroupSpec) -> bool {
        self.elements.iter().all(|s| {
            spec.inverse(s)
                .map(|inv| self.elements.contains(&inv))
                .unwrap_or(false)
        })
    }
}
