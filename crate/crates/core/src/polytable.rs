//! Exact action of the lattice Laplacian on polynomials, and the kernel
//! dimension it certifies.
//!
//! With the standard generators of `Z^D`,
//! `L(x^α) = Σ_i Σ_{k even, k >= 2} 2 C(α_i, k) x^{α - k e_i}`,
//! so `L` maps polynomials of degree `<= d` into degree `<= d - 2` and its
//! matrix in the monomial basis has small integer entries.

use num_bigint::BigInt;
use num_integer::binomial;
use num_rational::BigRational;
use num_traits::{One, Zero};
use rustc_hash::FxHashMap;

use crate::inequalities::exponents_between;
use crate::{Error, Result};

#[derive(Clone, Debug, PartialEq)]
pub struct PolynomialTable {
    pub dim: usize,
    pub degree: u32,
    /// Monomial exponents with `|α| <= degree`, graded order.
    pub monomials: Vec<Vec<u32>>,
    /// `matrix[β][α]` is the coefficient of `x^β` in `L(x^α)`.
    pub matrix: Vec<Vec<BigInt>>,
}

impl PolynomialTable {
    pub fn new(dim: usize, degree: u32) -> Result<Self> {
        if dim == 0 {
            return Err(Error::InvalidInput("polynomial table needs D >= 1".into()));
        }
        let monomials = exponents_between(dim, 0, degree);
        let index: FxHashMap<&[u32], usize> = monomials
            .iter()
            .enumerate()
            .map(|(i, m)| (m.as_slice(), i))
            .collect();
        let n = monomials.len();
        let mut matrix = vec![vec![BigInt::zero(); n]; n];
        for (col, alpha) in monomials.iter().enumerate() {
            for i in 0..dim {
                let mut k = 2;
                while k <= alpha[i] {
                    let mut beta = alpha.clone();
                    beta[i] -= k;
                    let row = index[beta.as_slice()];
                    matrix[row][col] += BigInt::from(2u64 * binomial(alpha[i] as u64, k as u64));
                    k += 2;
                }
            }
        }
        Ok(PolynomialTable {
            dim,
            degree,
            monomials,
            matrix,
        })
    }

    pub fn len(&self) -> usize {
        self.monomials.len()
    }

    pub fn is_empty(&self) -> bool {
        self.monomials.is_empty()
    }

    /// Exact rank by fraction-free (Bareiss) elimination.
    pub fn rank(&self) -> usize {
        bareiss_rank(self.matrix.clone())
    }

    pub fn kernel_dim(&self) -> usize {
        self.len() - self.rank()
    }

    /// A basis of the kernel as coefficient vectors over `self.monomials`,
    /// from the reduced row echelon form over the rationals.
    pub fn kernel_basis(&self) -> Vec<Vec<BigRational>> {
        let n = self.len();
        let mut a: Vec<Vec<BigRational>> = self
            .matrix
            .iter()
            .map(|row| row.iter().cloned().map(BigRational::from_integer).collect())
            .collect();
        let mut pivots = Vec::new();
        let mut row = 0;
        for col in 0..n {
            let Some(p) = (row..n).find(|&r| !a[r][col].is_zero()) else {
                continue;
            };
            a.swap(row, p);
            let inv = a[row][col].recip();
            for v in a[row].iter_mut() {
                *v = &*v * &inv;
            }
            let pivot = a[row].clone();
            for (r, ar) in a.iter_mut().enumerate() {
                if r != row && !ar[col].is_zero() {
                    let f = ar[col].clone();
                    for (x, p) in ar.iter_mut().zip(&pivot) {
                        *x -= &f * p;
                    }
                }
            }
            pivots.push(col);
            row += 1;
        }
        (0..n)
            .filter(|c| !pivots.contains(c))
            .map(|free| {
                let mut v = vec![BigRational::zero(); n];
                v[free] = BigRational::one();
                for (r, &pc) in pivots.iter().enumerate() {
                    v[pc] = -a[r][free].clone();
                }
                v
            })
            .collect()
    }

    /// Exact value of the polynomial with the given coefficients at an integer point.
    pub fn evaluate(&self, coeffs: &[BigRational], point: &[i64]) -> BigRational {
        let mut s = BigRational::zero();
        for (c, alpha) in coeffs.iter().zip(&self.monomials) {
            if c.is_zero() {
                continue;
            }
            let mut m = BigInt::one();
            for (&e, &x) in alpha.iter().zip(point) {
                m *= num_traits::pow(BigInt::from(x), e as usize);
            }
            s += c * BigRational::from_integer(m);
        }
        s
    }

    /// Floating-point value, for use as Dirichlet boundary data.
    pub fn evaluate_f64(&self, coeffs: &[f64], point: &[i64]) -> f64 {
        coeffs
            .iter()
            .zip(&self.monomials)
            .map(|(c, alpha)| {
                c * alpha
                    .iter()
                    .zip(point)
                    .map(|(&e, &x)| (x as f64).powi(e as i32))
                    .product::<f64>()
            })
            .sum()
    }
}

/// Rank of an integer matrix by Bareiss fraction-free elimination; every
/// intermediate entry stays an integer (a minor of the input).
pub fn bareiss_rank(mut a: Vec<Vec<BigInt>>) -> usize {
    let rows = a.len();
    if rows == 0 {
        return 0;
    }
    let cols = a[0].len();
    let mut prev = BigInt::one();
    let mut rank = 0;
    for col in 0..cols {
        if rank == rows {
            break;
        }
        let Some(p) = (rank..rows).find(|&r| !a[r][col].is_zero()) else {
            continue;
        };
        a.swap(rank, p);
        for r in rank + 1..rows {
            for c in col + 1..cols {
                let v = &a[rank][col] * &a[r][c] - &a[r][col] * &a[rank][c];
                debug_assert!((&v % &prev).is_zero());
                a[r][c] = v / &prev;
            }
            a[r][col] = BigInt::zero();
        }
        prev = a[rank][col].clone();
        rank += 1;
    }
    rank
}

/// `dim {p : deg p <= d, L p = 0 on Z^D}` for the standard generators.
pub fn symbolic_kernel_dim(dim: usize, degree: u32) -> Result<usize> {
    Ok(PolynomialTable::new(dim, degree)?.kernel_dim())
}
