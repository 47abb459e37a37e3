//! Scalar fields on balls, the discrete Laplacian, Dirichlet solves and the
//! Harnack ratio probe.

use std::sync::Arc;

use crate::balls::CayleyBall;
use crate::groups::GroupElement;
use crate::solver::{InteriorSystem, SolveOptions};
use crate::{Error, Result};

/// One real value per vertex of a ball, indexed like `ball.vertices()`.
#[derive(Clone, Debug)]
pub struct ScalarField {
    ball: Arc<CayleyBall>,
    values: Vec<f64>,
}

impl ScalarField {
    pub fn new(ball: Arc<CayleyBall>, values: Vec<f64>) -> Result<Self> {
        if values.len() != ball.len() {
            return Err(Error::InvalidInput(format!(
                "field has {} values for a ball of {} vertices",
                values.len(),
                ball.len()
            )));
        }
        if let Some(i) = values.iter().position(|v| !v.is_finite()) {
            return Err(Error::InvalidInput(format!("non-finite value at vertex {i}")));
        }
        Ok(ScalarField { ball, values })
    }

    pub fn from_fn(ball: Arc<CayleyBall>, f: impl Fn(&GroupElement) -> f64) -> Result<Self> {
        let values = ball.vertices().iter().map(f).collect();
        Self::new(ball, values)
    }

    pub fn constant(ball: Arc<CayleyBall>, c: f64) -> Result<Self> {
        let n = ball.len();
        Self::new(ball, vec![c; n])
    }

    pub fn ball(&self) -> &Arc<CayleyBall> {
        &self.ball
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn value(&self, i: usize) -> f64 {
        self.values[i]
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn shares_ball(&self, other: &ScalarField) -> bool {
        Arc::ptr_eq(&self.ball, &other.ball) || *self.ball == *other.ball
    }

    /// Restriction to a concentric smaller ball, whose vertices are a prefix of ours.
    pub fn restrict(&self, smaller: &Arc<CayleyBall>) -> Result<ScalarField> {
        if !self.ball.has_prefix(smaller) {
            return Err(Error::MismatchedBalls);
        }
        Ok(ScalarField {
            ball: smaller.clone(),
            values: self.values[..smaller.len()].to_vec(),
        })
    }

    /// `alpha * self + beta * other`.
    pub fn combine(&self, alpha: f64, other: &ScalarField, beta: f64) -> Result<ScalarField> {
        if !self.shares_ball(other) {
            return Err(Error::MismatchedBalls);
        }
        let values = self
            .values
            .iter()
            .zip(&other.values)
            .map(|(a, b)| alpha * a + beta * b)
            .collect();
        ScalarField::new(self.ball.clone(), values)
    }

    pub fn scale(&self, alpha: f64) -> ScalarField {
        ScalarField {
            ball: self.ball.clone(),
            values: self.values.iter().map(|v| alpha * v).collect(),
        }
    }
}

/// `L u(x) = Σ_{y~x} (u(y) - u(x))`, summed in generator order.
pub fn laplacian(field: &ScalarField, x: usize) -> Result<f64> {
    let ball = field.ball();
    if !ball.has_full_neighborhood(x) {
        return Err(Error::NotInterior { index: x });
    }
    let ux = field.values[x];
    Ok(ball
        .neighbors(x)
        .iter()
        .map(|&y| field.values[y as usize] - ux)
        .sum())
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct HarmonicCheck {
    pub harmonic: bool,
    /// Vertex attaining `max |L u|`, with the signed value there.
    pub worst_index: usize,
    pub worst_value: f64,
}

/// Checks `max |L u| <= tol` over `B(interior_radius)`.
pub fn is_harmonic(field: &ScalarField, interior_radius: u32, tol: f64) -> Result<HarmonicCheck> {
    let ball = field.ball();
    if interior_radius >= ball.radius() {
        return Err(Error::InvalidInput(format!(
            "interior radius {interior_radius} needs a ball of radius > {interior_radius}"
        )));
    }
    check_harmonic_on(field, 0..ball.count_within(interior_radius), tol)
}

pub(crate) fn check_harmonic_on(
    field: &ScalarField,
    vertices: impl IntoIterator<Item = usize>,
    tol: f64,
) -> Result<HarmonicCheck> {
    let mut worst = HarmonicCheck {
        harmonic: true,
        worst_index: 0,
        worst_value: 0.0,
    };
    for x in vertices {
        let l = laplacian(field, x)?;
        if l.abs() > worst.worst_value.abs() {
            worst.worst_index = x;
            worst.worst_value = l;
        }
    }
    worst.harmonic = worst.worst_value.abs() <= tol;
    Ok(worst)
}

#[derive(Clone, Debug)]
pub struct DirichletSolution {
    /// Lives on the ball of radius `interior_radius + 1`.
    pub field: ScalarField,
    pub interior_radius: u32,
    /// `max |L u|` over `B(interior_radius)`.
    pub residual: f64,
    pub iterations: usize,
    pub tol: f64,
}

/// Harmonic extension into `B(r)` of `boundary_values`, given in the vertex
/// order of the sphere `∂B(r) = S(r + 1)`.
///
/// The returned field lives on the ball truncated to radius `r + 1` (the same
/// `Arc` when `ball` already has that radius).
pub fn solve_dirichlet(
    ball: &Arc<CayleyBall>,
    r: u32,
    boundary_values: &[f64],
    opts: SolveOptions,
) -> Result<DirichletSolution> {
    let boundary = ball.boundary(r)?;
    if boundary_values.len() != boundary.len() {
        return Err(Error::InvalidInput(format!(
            "{} boundary values for a boundary of {} vertices",
            boundary_values.len(),
            boundary.len()
        )));
    }
    let domain = if ball.radius() == r + 1 {
        ball.clone()
    } else {
        Arc::new(ball.truncate(r + 1)?)
    };
    let n_int = domain.count_within(r);
    let mut values = vec![0.0; domain.len()];
    values[n_int..].copy_from_slice(boundary_values);

    if r == 0 {
        let nbrs = domain.neighbors(0);
        let avg = nbrs.iter().map(|&j| values[j as usize]).sum::<f64>() / nbrs.len() as f64;
        values[0] = avg;
        let field = ScalarField::new(domain, values)?;
        let residual = laplacian(&field, 0)?.abs();
        let tol = opts.tol.unwrap_or_else(|| {
            crate::solver::default_tolerance(crate::numeric::max_abs(boundary_values))
        });
        return Ok(DirichletSolution {
            field,
            interior_radius: 0,
            residual,
            iterations: 0,
            tol,
        });
    }

    let (offsets, adj) = domain.adjacency_parts();
    let unknown: Vec<u32> = (0..n_int as u32).collect();
    let system = InteriorSystem::new(offsets, adj, &unknown)?;
    let stats = system.solve(offsets, adj, &mut values, opts)?;
    Ok(DirichletSolution {
        field: ScalarField::new(domain, values)?,
        interior_radius: r,
        residual: stats.residual,
        iterations: stats.iterations,
        tol: stats.tol,
    })
}

/// [`solve_dirichlet`] with boundary data given as a function of the element.
pub fn solve_dirichlet_with(
    ball: &Arc<CayleyBall>,
    r: u32,
    g: impl Fn(&GroupElement) -> f64,
    opts: SolveOptions,
) -> Result<DirichletSolution> {
    let boundary = ball.boundary(r)?;
    let values: Vec<f64> = boundary.iter().map(|i| g(ball.vertex(i))).collect();
    solve_dirichlet(ball, r, &values, opts)
}

/// `max / min` of `u` over `B(n)`. Every value of the field must be positive.
pub fn harnack_ratio(field: &ScalarField, n: u32) -> Result<f64> {
    if let Some((i, &v)) = field.values.iter().enumerate().find(|(_, &v)| v <= 0.0) {
        return Err(Error::NonPositive { index: i, value: v });
    }
    if n > field.ball.radius() {
        return Err(Error::InvalidInput(format!(
            "B({n}) exceeds the field's ball of radius {}",
            field.ball.radius()
        )));
    }
    let vals = &field.values[..field.ball.count_within(n)];
    let (lo, hi) = vals
        .iter()
        .fold((f64::INFINITY, f64::NEG_INFINITY), |(l, h), &v| (l.min(v), h.max(v)));
    Ok(hi / lo)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::groups::GroupSpec;

    fn z(dim: usize, r: u32) -> Arc<CayleyBall> {
        let spec = GroupSpec::lattice(dim).unwrap();
        Arc::new(
            CayleyBall::enumerate(&spec, &spec.standard_generators(), &spec.identity(), r).unwrap(),
        )
    }

    fn poly(ball: &Arc<CayleyBall>, f: impl Fn(f64, f64) -> f64) -> ScalarField {
        ScalarField::from_fn(ball.clone(), |g| f(g.coords()[0] as f64, g.coords()[1] as f64))
            .unwrap()
    }

    #[test]
    fn laplacian_of_quadratics() {
        let b = z(2, 4);
        let c = ScalarField::constant(b.clone(), 3.5).unwrap();
        let saddle = poly(&b, |x, y| x * x - y * y);
        let sq = poly(&b, |x, _| x * x);
        for i in 0..b.count_within(3) {
            assert_eq!(laplacian(&c, i).unwrap(), 0.0);
            assert_eq!(laplacian(&saddle, i).unwrap(), 0.0);
            assert_eq!(laplacian(&sq, i).unwrap(), 2.0);
        }
        let edge = b.count_within(3);
        assert!(matches!(laplacian(&sq, edge), Err(Error::NotInterior { .. })));
    }

    #[test]
    fn harmonicity_predicate() {
        let b = z(2, 5);
        assert!(is_harmonic(&poly(&b, |x, y| 3.0 * x - 2.0 * y + 7.0), 4, 0.0).unwrap().harmonic);
        assert!(is_harmonic(&poly(&b, |x, y| x * y), 4, 0.0).unwrap().harmonic);
        let chk = is_harmonic(&poly(&b, |x, _| x * x), 4, 1e-9).unwrap();
        assert!(!chk.harmonic);
        assert_eq!(chk.worst_value, 2.0);
        assert!(is_harmonic(&poly(&b, |x, _| x), 5, 0.0).is_err());
    }

    #[test]
    fn constant_boundary_gives_constant() {
        let b = z(2, 8);
        let n = b.boundary(7).unwrap().len();
        let sol = solve_dirichlet(&b, 7, &vec![7.0; n], SolveOptions::default()).unwrap();
        assert!(sol.field.values().iter().all(|&v| v == 7.0));
    }

    #[test]
    fn one_dimensional_hand_case() {
        let b = z(1, 2);
        let sol = solve_dirichlet(&b, 1, &[4.0, 4.0], SolveOptions::default()).unwrap();
        assert_eq!(&sol.field.values()[..3], &[4.0, 4.0, 4.0]);
        let sol = solve_dirichlet(&b, 1, &[-2.0, 6.0], SolveOptions::default()).unwrap();
        for i in 0..3 {
            let x = b.vertex(i).coords()[0] as f64;
            assert!((sol.field.value(i) - (2.0 + 2.0 * x)).abs() < 1e-14);
        }
    }

    #[test]
    fn degenerate_radius_zero() {
        let b = z(2, 1);
        let sol = solve_dirichlet(&b, 0, &[1.0, 2.0, 3.0, 6.0], SolveOptions::default()).unwrap();
        assert_eq!(sol.field.value(0), 3.0);
        assert_eq!(sol.residual, 0.0);
    }

    #[test]
    fn saddle_is_reproduced() {
        let b = z(2, 11);
        let sol = solve_dirichlet_with(
            &b,
            10,
            |g| {
                let (x, y) = (g.coords()[0] as f64, g.coords()[1] as f64);
                x * x - y * y
            },
            SolveOptions::default(),
        )
        .unwrap();
        assert!(sol.residual <= sol.tol);
        for (i, g) in b.vertices().iter().enumerate() {
            let (x, y) = (g.coords()[0] as f64, g.coords()[1] as f64);
            assert!((sol.field.value(i) - (x * x - y * y)).abs() <= 1e-10);
        }
    }

    #[test]
    fn solution_lives_on_truncated_ball() {
        let b = z(2, 9);
        let n = b.boundary(4).unwrap().len();
        let sol = solve_dirichlet(&b, 4, &vec![1.0; n], SolveOptions::default()).unwrap();
        assert_eq!(sol.field.ball().radius(), 5);
        assert!(b.has_prefix(sol.field.ball()));
        assert!(solve_dirichlet(&b, 4, &[1.0], SolveOptions::default()).is_err());
    }

    #[test]
    fn harnack_values() {
        let b = z(2, 1);
        assert_eq!(harnack_ratio(&ScalarField::constant(b.clone(), 5.0).unwrap(), 1).unwrap(), 1.0);
        let u = poly(&b, |x, _| x + 10.0);
        assert_eq!(harnack_ratio(&u, 1).unwrap(), 11.0 / 9.0);
        let u = poly(&b, |x, _| x + 1.0);
        assert!(matches!(harnack_ratio(&u, 1), Err(Error::NonPositive { .. })));
    }
}
