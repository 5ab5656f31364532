//! Finite Grassmann algebras and Gaussian integration by Pfaffians.

mod formulation;
mod pfaffian;

use std::collections::{BTreeMap, HashMap};
use std::sync::Mutex;

use nalgebra::DMatrix;
use num_complex::Complex64 as C64;

use crate::error::{Error, Result};

pub use formulation::{
    first_formulation_check, hubbard_stratonovich_check, spinful_covariance, vanishing_property_check, FirstFormulationReport,
    FirstFormulationRow, FormulationParams, HsReport, SpinfulLayout, VanishingReport, vanishing_property_demo,
};
pub use pfaffian::{pfaffian, pfaffian_recursive};

pub const MAX_GENERATORS: usize = 28;

/// Sign of moving monomial `b` to the right of monomial `a`, i.e. the
/// parity of pairs `(i ∈ a, j ∈ b)` with `i > j`.
fn merge_sign(a: u32, b: u32) -> f64 {
    let mut m = b;
    let mut parity = 0;
    while m != 0 {
        let j = m.trailing_zeros();
        m &= m - 1;
        parity ^= (a >> j >> 1).count_ones() & 1;
    }
    if parity == 0 {
        1.0
    } else {
        -1.0
    }
}

/// Element of the Grassmann algebra over `n_gen` generators. A term key is
/// the set of generators, read in ascending order.
#[derive(Debug, Clone, PartialEq)]
pub struct GrassmannPoly {
    pub n_gen: usize,
    pub terms: BTreeMap<u32, C64>,
}

impl GrassmannPoly {
    pub fn zero(n_gen: usize) -> Result<Self> {
        if n_gen > MAX_GENERATORS {
            return Err(Error::Budget {
                what: "Grassmann generators",
                needed: n_gen,
                limit: MAX_GENERATORS,
            });
        }
        Ok(Self {
            n_gen,
            terms: BTreeMap::new(),
        })
    }

    pub fn constant(n_gen: usize, c: C64) -> Result<Self> {
        let mut p = Self::zero(n_gen)?;
        if c != C64::new(0.0, 0.0) {
            p.terms.insert(0, c);
        }
        Ok(p)
    }

    pub fn one(n_gen: usize) -> Result<Self> {
        Self::constant(n_gen, C64::new(1.0, 0.0))
    }

    /// `c·ψ_{i₁}ψ_{i₂}⋯` in the given order; repeated generators give 0.
    pub fn monomial(n_gen: usize, gens: &[usize], c: C64) -> Result<Self> {
        let mut p = Self::zero(n_gen)?;
        let mut mask = 0u32;
        let mut sign = 1.0;
        for &g in gens {
            if g >= n_gen {
                return Err(crate::error::param("generator", g as f64, "out of range"));
            }
            if mask >> g & 1 == 1 {
                return Ok(p);
            }
            sign *= merge_sign(mask, 1 << g);
            mask |= 1 << g;
        }
        if c != C64::new(0.0, 0.0) {
            p.terms.insert(mask, c * sign);
        }
        Ok(p)
    }

    pub fn generator(n_gen: usize, i: usize) -> Result<Self> {
        Self::monomial(n_gen, &[i], C64::new(1.0, 0.0))
    }

    pub fn len(&self) -> usize {
        self.terms.len()
    }

    pub fn is_empty(&self) -> bool {
        self.terms.is_empty()
    }

    pub fn constant_term(&self) -> C64 {
        self.terms.get(&0).copied().unwrap_or_default()
    }

    pub fn is_even(&self) -> bool {
        self.terms.keys().all(|m| m.count_ones() % 2 == 0)
    }

    fn accumulate(terms: &mut BTreeMap<u32, C64>, m: u32, c: C64) {
        let e = terms.entry(m).or_default();
        *e += c;
        if *e == C64::new(0.0, 0.0) {
            terms.remove(&m);
        }
    }

    pub fn add(&self, o: &Self) -> Self {
        let mut terms = self.terms.clone();
        for (&m, &c) in &o.terms {
            Self::accumulate(&mut terms, m, c);
        }
        Self { n_gen: self.n_gen, terms }
    }

    pub fn add_assign(&mut self, o: &Self) {
        for (&m, &c) in &o.terms {
            Self::accumulate(&mut self.terms, m, c);
        }
    }

    pub fn scale(&self, c: C64) -> Self {
        if c == C64::new(0.0, 0.0) {
            return Self {
                n_gen: self.n_gen,
                terms: BTreeMap::new(),
            };
        }
        Self {
            n_gen: self.n_gen,
            terms: self.terms.iter().map(|(&m, &v)| (m, v * c)).collect(),
        }
    }

    pub fn sub(&self, o: &Self) -> Self {
        self.add(&o.scale(C64::new(-1.0, 0.0)))
    }

    pub fn mul(&self, o: &Self) -> Self {
        let mut terms = BTreeMap::new();
        for (&a, &ca) in &self.terms {
            for (&b, &cb) in &o.terms {
                if a & b != 0 {
                    continue;
                }
                Self::accumulate(&mut terms, a | b, ca * cb * merge_sign(a, b));
            }
        }
        Self { n_gen: self.n_gen, terms }
    }

    /// `e^{p}` for even `p`, exact through nilpotency.
    pub fn exp_even(&self) -> Result<Self> {
        if !self.is_even() {
            return Err(Error::Precondition("exponential of an odd Grassmann element".into()));
        }
        let c = self.constant_term();
        let mut nil = self.clone();
        nil.terms.remove(&0);
        let mut out = Self::one(self.n_gen)?;
        let mut power = Self::one(self.n_gen)?;
        for k in 1..=self.n_gen / 2 {
            power = power.mul(&nil).scale(C64::new(1.0 / k as f64, 0.0));
            if power.is_empty() {
                break;
            }
            out.add_assign(&power);
        }
        Ok(out.scale(c.exp()))
    }

    pub fn max_abs_diff(&self, o: &Self) -> f64 {
        self.sub(o).terms.values().map(|z| z.norm()).fold(0.0, f64::max)
    }
}

/// Antisymmetric matrix `G` over the generators, with `∫ψ_iψ_j dμ = G(i,j)`.
#[derive(Debug)]
pub struct WickCovariance {
    pub g: DMatrix<C64>,
    cache: Mutex<HashMap<u32, C64>>,
}

impl WickCovariance {
    pub fn new(g: DMatrix<C64>) -> Result<Self> {
        let n = g.nrows();
        if n != g.ncols() {
            return Err(Error::Precondition("Wick covariance must be square".into()));
        }
        if n > MAX_GENERATORS {
            return Err(Error::Budget {
                what: "Grassmann generators",
                needed: n,
                limit: MAX_GENERATORS,
            });
        }
        for i in 0..n {
            for j in 0..n {
                if g[(i, j)] != -g[(j, i)] {
                    return Err(Error::Precondition("Wick covariance must be antisymmetric".into()));
                }
            }
        }
        Ok(Self {
            g,
            cache: Mutex::new(HashMap::new()),
        })
    }

    /// From a two-point function `C` on `J₀`, with `ψ̄_X = 2X`, `ψ_X = 2X+1`:
    /// `G = 2C̃`.
    pub fn from_two_point(c: &DMatrix<C64>) -> Result<Self> {
        let n = c.nrows();
        let mut g = DMatrix::zeros(2 * n, 2 * n);
        for x in 0..n {
            for y in 0..n {
                g[(2 * x, 2 * y + 1)] = c[(x, y)];
                g[(2 * y + 1, 2 * x)] = -c[(x, y)];
            }
        }
        Self::new(g)
    }

    pub fn n_gen(&self) -> usize {
        self.g.nrows()
    }

    fn monomial(&self, mask: u32) -> C64 {
        if mask == 0 {
            return C64::new(1.0, 0.0);
        }
        if mask.count_ones() % 2 == 1 {
            return C64::new(0.0, 0.0);
        }
        if let Some(v) = self.cache.lock().unwrap().get(&mask) {
            return *v;
        }
        let idx: Vec<usize> = (0..self.n_gen()).filter(|&i| mask >> i & 1 == 1).collect();
        let sub = DMatrix::from_fn(idx.len(), idx.len(), |i, j| self.g[(idx[i], idx[j])]);
        let v = pfaffian(&sub);
        self.cache.lock().unwrap().insert(mask, v);
        v
    }
}

/// `∫ poly dμ_G`
pub fn gaussian_integral(poly: &GrassmannPoly, cov: &WickCovariance) -> Result<C64> {
    if poly.n_gen != cov.n_gen() {
        return Err(Error::Precondition(format!(
            "polynomial over {} generators, covariance over {}",
            poly.n_gen,
            cov.n_gen()
        )));
    }
    Ok(poly.terms.iter().map(|(&m, &c)| c * cov.monomial(m)).sum())
}

#[cfg(test)]
mod tests {
    use super::*;

    fn one() -> C64 {
        C64::new(1.0, 0.0)
    }

    #[test]
    fn anticommutation() {
        let a = GrassmannPoly::generator(4, 1).unwrap();
        let b = GrassmannPoly::generator(4, 3).unwrap();
        assert_eq!(a.mul(&b), b.mul(&a).scale(-one()));
        assert!(a.mul(&a).is_empty());
        let m = GrassmannPoly::monomial(4, &[3, 0, 2], one()).unwrap();
        assert_eq!(m.terms[&0b1101], C64::new(1.0, 0.0));
    }

    #[test]
    fn exp_examples() {
        let z = GrassmannPoly::zero(4).unwrap();
        assert_eq!(z.exp_even().unwrap(), GrassmannPoly::one(4).unwrap());
        let q = GrassmannPoly::monomial(4, &[0, 1], C64::new(0.3, 0.2)).unwrap();
        assert_eq!(q.exp_even().unwrap(), GrassmannPoly::one(4).unwrap().add(&q));
        assert!(GrassmannPoly::generator(4, 0).unwrap().exp_even().is_err());
    }

    #[test]
    fn wick_examples() {
        let c = DMatrix::from_row_slice(2, 2, &[C64::new(0.4, 0.1), C64::new(-0.2, 0.3), C64::new(0.7, 0.0), C64::new(0.1, -0.5)]);
        let w = WickCovariance::from_two_point(&c).unwrap();
        let g = |i: usize, j: usize| GrassmannPoly::monomial(4, &[i, j], one()).unwrap();
        assert_eq!(gaussian_integral(&GrassmannPoly::one(4).unwrap(), &w).unwrap(), one());
        assert_eq!(gaussian_integral(&g(0, 3), &w).unwrap(), c[(0, 1)]);
        let q = g(0, 1).mul(&g(2, 3));
        let want = c[(0, 0)] * c[(1, 1)] - c[(0, 1)] * c[(1, 0)];
        assert!((gaussian_integral(&q, &w).unwrap() - want).norm() < 1e-15);
        assert_eq!(gaussian_integral(&GrassmannPoly::generator(4, 2).unwrap(), &w).unwrap(), C64::new(0.0, 0.0));
    }

    #[test]
    fn budget() {
        assert!(matches!(GrassmannPoly::zero(29), Err(Error::Budget { .. })));
    }
}
