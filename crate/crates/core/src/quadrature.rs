//! Brillouin-zone integration and finite-lattice sums.
//!
//! Every integral is normalized so that `∫ 1 = 1`, i.e. it realizes
//! `D_d ∫_{Γ*∞} dk` (the factor `D_d` cancels the cell volume).

use std::f64::consts::PI;

use nalgebra::{DMatrix, SymmetricEigen};
use num_complex::Complex64 as C64;
use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::lattice::ReciprocalBasis;

const CHUNK: usize = 4096;

/// Pairwise summation, so the rounding pattern only depends on the length.
pub fn pairwise_sum(xs: &[f64]) -> f64 {
    if xs.len() <= 32 {
        return xs.iter().sum();
    }
    let mid = xs.len() / 2;
    pairwise_sum(&xs[..mid]) + pairwise_sum(&xs[mid..])
}

pub fn pairwise_sum_c(xs: &[C64]) -> C64 {
    if xs.len() <= 32 {
        return xs.iter().sum();
    }
    let mid = xs.len() / 2;
    pairwise_sum_c(&xs[..mid]) + pairwise_sum_c(&xs[mid..])
}

/// Deterministic parallel reduction: fixed chunks, each summed pairwise,
/// then the chunk partials summed pairwise in order.
pub fn par_sum<F>(n: usize, f: F) -> f64
where
    F: Fn(usize) -> f64 + Sync,
{
    let n_chunks = n.div_ceil(CHUNK);
    let partial: Vec<f64> = (0..n_chunks)
        .into_par_iter()
        .map(|c| {
            let lo = c * CHUNK;
            let hi = (lo + CHUNK).min(n);
            let v: Vec<f64> = (lo..hi).map(&f).collect();
            pairwise_sum(&v)
        })
        .collect();
    pairwise_sum(&partial)
}

pub fn par_sum_c<F>(n: usize, f: F) -> C64
where
    F: Fn(usize) -> C64 + Sync,
{
    let n_chunks = n.div_ceil(CHUNK);
    let partial: Vec<C64> = (0..n_chunks)
        .into_par_iter()
        .map(|c| {
            let lo = c * CHUNK;
            let hi = (lo + CHUNK).min(n);
            let v: Vec<C64> = (lo..hi).map(&f).collect();
            pairwise_sum_c(&v)
        })
        .collect();
    pairwise_sum_c(&partial)
}

#[derive(Debug, Clone, PartialEq)]
pub struct BZGrid {
    pub basis: ReciprocalBasis,
    pub n_per_axis: usize,
    pub offset: f64,
}

impl BZGrid {
    pub fn new(basis: &ReciprocalBasis, n_per_axis: usize, offset: f64) -> Self {
        Self {
            basis: basis.clone(),
            n_per_axis,
            offset,
        }
    }

    /// The finite momentum lattice of side L.
    pub fn lattice(basis: &ReciprocalBasis, l: usize) -> Self {
        Self::new(basis, l, 0.0)
    }

    pub fn len(&self) -> usize {
        self.n_per_axis.pow(self.basis.d as u32)
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    /// Reduced coordinates of node `idx` (axis 0 fastest).
    pub fn reduced_node(&self, mut idx: usize, out: &mut [f64]) {
        let n = self.n_per_axis;
        let step = 2.0 * PI / n as f64;
        for o in out.iter_mut() {
            let m = idx % n;
            idx /= n;
            *o = (m as f64 + self.offset) * step;
        }
    }

    pub fn node(&self, idx: usize) -> Vec<f64> {
        let mut kh = vec![0.0; self.basis.d];
        self.reduced_node(idx, &mut kh);
        self.basis.k_from_reduced(&kh)
    }

    pub fn refined(&self) -> Self {
        Self::new(&self.basis, 2 * self.n_per_axis, self.offset)
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Estimate {
    pub value: C64,
    pub error: f64,
}

fn grid_mean<F>(f: &F, grid: &BZGrid) -> Result<C64>
where
    F: Fn(&[f64]) -> C64 + Sync,
{
    let n = grid.len();
    let bad = std::sync::Mutex::new(None::<Vec<f64>>);
    let s = par_sum_c(n, |i| {
        let k = grid.node(i);
        let v = f(&k);
        if !v.re.is_finite() || !v.im.is_finite() {
            let mut b = bad.lock().unwrap();
            if b.is_none() {
                *b = Some(k);
            }
            return C64::new(0.0, 0.0);
        }
        v
    });
    if let Some(node) = bad.into_inner().unwrap() {
        return Err(Error::NonFinite { node });
    }
    Ok(s / n as f64)
}

/// `D_d ∫ dk f(k)` by the (possibly shifted) periodic trapezoid rule.
pub fn integrate_bz<F>(f: F, grid: &BZGrid, richardson: bool) -> Result<Estimate>
where
    F: Fn(&[f64]) -> C64 + Sync,
{
    let v = grid_mean(&f, grid)?;
    if !richardson {
        return Ok(Estimate { value: v, error: f64::NAN });
    }
    let v2 = grid_mean(&f, &grid.refined())?;
    Ok(Estimate {
        value: v2,
        error: (v2 - v).norm(),
    })
}

/// `L^{-d} Σ_{k∈Γ*} f(k)`
pub fn sum_lattice<F>(f: F, l: usize, basis: &ReciprocalBasis) -> Result<C64>
where
    F: Fn(&[f64]) -> C64 + Sync,
{
    grid_mean(&f, &BZGrid::lattice(basis, l))
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GapCheck {
    pub lhs: f64,
    pub rhs: f64,
    pub holds: bool,
}

/// Compares `|D_d∫f − L^{-d}Σf|` with `L^{-1} 2π d² sup‖vhat‖ sup|∂f/∂k_j|`.
/// Without an analytic gradient the sup of the partials is taken over the
/// integration grid by central differences.
pub fn discrete_continuum_gap<F>(
    f: F,
    grad: Option<&(dyn Fn(&[f64]) -> Vec<f64> + Sync)>,
    l: usize,
    grid: &BZGrid,
) -> Result<GapCheck>
where
    F: Fn(&[f64]) -> C64 + Sync,
{
    let basis = &grid.basis;
    let d = basis.d;
    let cont = grid_mean(&f, grid)?;
    let disc = sum_lattice(&f, l, basis)?;
    let h = 1e-5;
    let sup = (0..grid.len())
        .into_par_iter()
        .map(|i| {
            let k = grid.node(i);
            match grad {
                Some(g) => g(&k).iter().map(|x| x.abs()).fold(0.0, f64::max),
                None => (0..d)
                    .map(|j| {
                        let mut kp = k.clone();
                        let mut km = k.clone();
                        kp[j] += h;
                        km[j] -= h;
                        ((f(&kp) - f(&km)) / (2.0 * h)).norm()
                    })
                    .fold(0.0, f64::max),
            }
        })
        .reduce(|| 0.0, f64::max);
    if !sup.is_finite() {
        return Err(Error::Domain("derivative bound not computable".into()));
    }
    let lhs = (cont - disc).norm();
    let rhs = 2.0 * PI * (d * d) as f64 * basis.max_dual_norm() * sup / l as f64;
    Ok(GapCheck {
        lhs,
        rhs,
        holds: lhs <= rhs,
    })
}


/// Gauss–Legendre rule on `[-1, 1]` by the Golub–Welsch eigenproblem.
pub fn gauss_legendre(n: usize) -> (Vec<f64>, Vec<f64>) {
    golub_welsch(n, 2.0, |k| {
        let k = k as f64;
        k / (4.0 * k * k - 1.0).sqrt()
    })
}

/// Gauss–Hermite rule for the weight `e^{-x^2}`.
pub fn gauss_hermite(n: usize) -> (Vec<f64>, Vec<f64>) {
    golub_welsch(n, PI.sqrt(), |k| (0.5 * k as f64).sqrt())
}

fn golub_welsch<B: Fn(usize) -> f64>(n: usize, mu0: f64, offdiag: B) -> (Vec<f64>, Vec<f64>) {
    assert!(n >= 1, "rule needs at least one node");
    let mut j = DMatrix::<f64>::zeros(n, n);
    for k in 1..n {
        let b = offdiag(k);
        j[(k - 1, k)] = b;
        j[(k, k - 1)] = b;
    }
    let eig = SymmetricEigen::new(j);
    let mut pairs: Vec<(f64, f64)> = (0..n)
        .map(|i| (eig.eigenvalues[i], mu0 * eig.eigenvectors[(0, i)].powi(2)))
        .collect();
    pairs.sort_by(|a, b| a.0.total_cmp(&b.0));
    // the rule is symmetric, restore that exactly
    for i in 0..n / 2 {
        let x = 0.5 * (pairs[n - 1 - i].0 - pairs[i].0);
        let w = 0.5 * (pairs[n - 1 - i].1 + pairs[i].1);
        pairs[i] = (-x, w);
        pairs[n - 1 - i] = (x, w);
    }
    if n % 2 == 1 {
        pairs[n / 2].0 = 0.0;
    }
    pairs.into_iter().unzip()
}

/// Adaptive Gauss–Legendre on `[a, b]`: a panel is accepted when its
/// 15-point value matches the sum over its two halves.
pub fn adaptive_gauss<F>(f: F, a: f64, b: f64, abs_tol: f64, rel_tol: f64) -> Result<f64>
where
    F: Fn(f64) -> f64,
{
    let (xs, ws) = gauss_legendre(15);
    let panel = |lo: f64, hi: f64| -> f64 {
        let c = 0.5 * (lo + hi);
        let r = 0.5 * (hi - lo);
        r * xs.iter().zip(&ws).map(|(x, w)| w * f(c + r * x)).sum::<f64>()
    };
    let whole = panel(a, b);
    let mut stack = vec![(a, b, whole, 0u32)];
    let mut total = Vec::new();
    let mut scale = whole.abs();
    while let Some((lo, hi, v, depth)) = stack.pop() {
        let mid = 0.5 * (lo + hi);
        let l = panel(lo, mid);
        let r = panel(mid, hi);
        if !(l.is_finite() && r.is_finite()) {
            return Err(Error::NonFinite { node: vec![lo, hi] });
        }
        scale = scale.max((l + r).abs());
        let tol = abs_tol.max(rel_tol * scale) * ((hi - lo) / (b - a)).sqrt();
        if (l + r - v).abs() <= tol || depth >= 40 {
            total.push(l + r);
        } else {
            stack.push((mid, hi, r, depth + 1));
            stack.push((lo, mid, l, depth + 1));
        }
        if total.len() + stack.len() > 100_000 {
            return Err(Error::Budget {
                what: "adaptive Gauss panels",
                needed: total.len() + stack.len(),
                limit: 100_000,
            });
        }
    }
    Ok(pairwise_sum(&total))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::lattice::builtin_model;

    #[test]
    fn normalization() {
        for b in [ReciprocalBasis::canonical(3), ReciprocalBasis::honeycomb()] {
            let g = BZGrid::new(&b, 6, 0.5);
            let e = integrate_bz(|_| C64::new(1.0, 0.0), &g, false).unwrap();
            assert!((e.value.re - 1.0).abs() < 1e-14);
        }
    }

    #[test]
    fn cubic_trace_mean() {
        let m = builtin_model("cubic3", &[0.0]).unwrap();
        let g = BZGrid::new(&m.basis, 8, 0.0);
        let e = integrate_bz(|k| m.hopping(k)[(0, 0)], &g, true).unwrap();
        assert!((e.value.re + 6.0).abs() < 1e-12);
    }

    #[test]
    fn lattice_orthogonality() {
        let b = ReciprocalBasis::honeycomb();
        let x = b.site(&[1, 2]);
        let s = sum_lattice(
            |k| {
                let p: f64 = x.iter().zip(k).map(|(a, b)| a * b).sum();
                C64::new(p.cos(), p.sin())
            },
            6,
            &b,
        )
        .unwrap();
        assert!(s.norm() < 1e-14);
        let c = sum_lattice(|_| C64::new(2.5, 0.0), 5, &b).unwrap();
        assert!((c.re - 2.5).abs() < 1e-14);
    }

    #[test]
    fn non_finite_reports_node() {
        let b = ReciprocalBasis::canonical(1);
        let g = BZGrid::new(&b, 4, 0.0);
        let r = integrate_bz(|k| C64::new(1.0 / k[0], 0.0), &g, false);
        assert!(matches!(r, Err(Error::NonFinite { .. })));
    }

    #[test]
    fn gap_check_cos() {
        let b = ReciprocalBasis::canonical(1);
        let g = BZGrid::new(&b, 64, 0.5);
        let r = discrete_continuum_gap(|k| C64::new(k[0].cos(), 0.0), None, 10, &g).unwrap();
        assert!(r.lhs < 1e-14 && r.holds);
    }
    #[test]
    fn gauss_rules_integrate_polynomials() {
        let (x, w) = gauss_legendre(10);
        let i: f64 = x.iter().zip(&w).map(|(x, w)| w * x.powi(18)).sum();
        assert!((i - 2.0 / 19.0).abs() < 1e-14);
        let (x, w) = gauss_hermite(12);
        // ∫ x^4 e^{-x^2} = 3√π/4
        let i: f64 = x.iter().zip(&w).map(|(x, w)| w * x.powi(4)).sum();
        assert!((i - 0.75 * PI.sqrt()).abs() < 1e-13);
    }

    #[test]
    fn adaptive_gauss_peaked() {
        let v = adaptive_gauss(|x| (-1e4 * (x - 0.3) * (x - 0.3)).exp(), 0.0, 1.0, 0.0, 1e-13).unwrap();
        assert!((v - (PI / 1e4).sqrt()).abs() < 1e-14);
    }
}
