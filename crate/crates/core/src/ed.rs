//! Exact diagonalization on small fermionic Fock spaces.

use std::f64::consts::PI;

use nalgebra::{DMatrix, Schur};
use num_complex::Complex64 as C64;
use serde::{Deserialize, Serialize};

use crate::covariance::{field_hopping, Point};
use crate::error::{param, Error, Result};
use crate::gap::reduced_theta;
use crate::lattice::HoppingModel;
use crate::quadrature::BZGrid;

pub const MAX_MODES: usize = 12;


/// Dense operator on the Fock space of `n_modes` fermionic modes; basis
/// state `n` has mode `i` occupied when bit `i` is set.
#[derive(Debug, Clone, PartialEq)]
pub struct FockOperator {
    pub n_modes: usize,
    pub mat: DMatrix<C64>,
}

impl FockOperator {
    pub fn zeros(n_modes: usize) -> Result<Self> {
        if n_modes > MAX_MODES {
            return Err(Error::Budget {
                what: "Fock modes",
                needed: n_modes,
                limit: MAX_MODES,
            });
        }
        let dim = 1 << n_modes;
        Ok(Self {
            n_modes,
            mat: DMatrix::zeros(dim, dim),
        })
    }

    pub fn identity(n_modes: usize) -> Result<Self> {
        let mut o = Self::zeros(n_modes)?;
        o.mat.fill_with_identity();
        Ok(o)
    }

    /// Jordan–Wigner annihilator of mode `i`.
    pub fn annihilator(n_modes: usize, i: usize) -> Result<Self> {
        let mut o = Self::zeros(n_modes)?;
        if i >= n_modes {
            return Err(param("mode", i as f64, "out of range"));
        }
        for n in 0..(1usize << n_modes) {
            if n >> i & 1 == 1 {
                let sign = if (n & ((1 << i) - 1)).count_ones() % 2 == 0 { 1.0 } else { -1.0 };
                o.mat[(n ^ (1 << i), n)] = C64::new(sign, 0.0);
            }
        }
        Ok(o)
    }

    pub fn creator(n_modes: usize, i: usize) -> Result<Self> {
        Ok(Self::annihilator(n_modes, i)?.adjoint())
    }

    pub fn adjoint(&self) -> Self {
        Self {
            n_modes: self.n_modes,
            mat: self.mat.adjoint(),
        }
    }

    pub fn mul(&self, o: &Self) -> Self {
        Self {
            n_modes: self.n_modes,
            mat: &self.mat * &o.mat,
        }
    }

    pub fn add(&self, o: &Self) -> Self {
        Self {
            n_modes: self.n_modes,
            mat: &self.mat + &o.mat,
        }
    }

    pub fn scale(&self, c: C64) -> Self {
        Self {
            n_modes: self.n_modes,
            mat: &self.mat * c,
        }
    }

    pub fn commutator(&self, o: &Self) -> Self {
        Self {
            n_modes: self.n_modes,
            mat: &self.mat * &o.mat - &o.mat * &self.mat,
        }
    }

    pub fn max_abs(&self) -> f64 {
        self.mat.iter().map(|z| z.norm()).fold(0.0, f64::max)
    }

    pub fn trace(&self) -> C64 {
        self.mat.trace()
    }
}

/// Eigenvalues of a general complex matrix from its Schur form.
pub fn eigenvalues(m: &DMatrix<C64>) -> Result<Vec<C64>> {
    let s = Schur::try_new(m.clone(), 1e-14, 10_000)
        .ok_or_else(|| Error::Domain("Schur iteration did not converge".into()))?;
    let (_, t) = s.unpack();
    Ok((0..t.nrows()).map(|i| t[(i, i)]).collect())
}

/// `Tr e^{−β·op}`
pub fn trace_exp(op: &FockOperator, beta: f64) -> Result<C64> {
    let ev = eigenvalues(&op.mat)?;
    Ok(ev.iter().map(|l| (-l * beta).exp()).sum())
}

/// `e^{−β(op − c)}` together with the shift `c`, the smallest real part of
/// the spectrum, so that traces can be formed as ratios without overflow.
pub fn exp_shifted(op: &FockOperator, beta: f64) -> Result<(DMatrix<C64>, f64)> {
    let ev = eigenvalues(&op.mat)?;
    let c = ev.iter().map(|z| z.re).fold(f64::INFINITY, f64::min);
    let n = op.mat.nrows();
    let m = (&op.mat - DMatrix::<C64>::identity(n, n) * C64::new(c, 0.0)) * C64::new(-beta, 0.0);
    Ok((m.exp(), c))
}

/// `Tr(e^{−β·op} O) / Tr e^{−β·op}`
pub fn thermal_ratio(op: &FockOperator, beta: f64, obs: &FockOperator) -> Result<C64> {
    let (e, _) = exp_shifted(op, beta)?;
    Ok((&e * &obs.mat).trace() / e.trace())
}

/// Real-space hopping `L^{-d} Σ_k e^{i<x−y,k>} M(k)(ρ,η)` for a `k`-dependent
/// block matrix `M`, indexed by `(ρ, x)` with `ρ` slowest.
fn real_space<F>(model: &HoppingModel, l: usize, blocks: usize, f: F) -> DMatrix<C64>
where
    F: Fn(&[f64]) -> DMatrix<C64>,
{
    let d = model.dim();
    let grid = BZGrid::lattice(&model.basis, l);
    let nsite = grid.len();
    let mut out = DMatrix::zeros(blocks * nsite, blocks * nsite);
    let coords: Vec<Vec<usize>> = (0..nsite).map(|s| (0..d).map(|a| (s / l.pow(a as u32)) % l).collect()).collect();
    let mut kh = vec![0.0; d];
    for idx in 0..nsite {
        grid.reduced_node(idx, &mut kh);
        let m = f(&kh);
        for x in 0..nsite {
            for y in 0..nsite {
                let arg: f64 = (0..d).map(|a| kh[a] * (coords[x][a] as f64 - coords[y][a] as f64)).sum();
                let ph = C64::new(arg.cos(), arg.sin()) / nsite as f64;
                for r in 0..blocks {
                    for e in 0..blocks {
                        out[(r * nsite + x, e * nsite + y)] += ph * m[(r, e)];
                    }
                }
            }
        }
    }
    out
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Which {
    H0,
    V,
    Sz,
    F,
    A1,
    A2,
    H0Phi,
}

/// Spinful system `ℬ × Γ × {↑,↓}`, modes ordered `(ρ, x, σ)` lexicographically.
#[derive(Debug, Clone)]
pub struct SpinfulSystem {
    pub model: HoppingModel,
    pub l: usize,
    pub sites: usize,
    hop: DMatrix<C64>,
    ann: Vec<FockOperator>,
}

impl SpinfulSystem {
    pub fn new(model: &HoppingModel, l: usize) -> Result<Self> {
        let sites = l.pow(model.dim() as u32);
        let n = 2 * model.bands * sites;
        if n > MAX_MODES {
            return Err(Error::Budget {
                what: "Fock modes",
                needed: n,
                limit: MAX_MODES,
            });
        }
        let hop = real_space(model, l, model.bands, |kh| model.hopping_reduced(kh));
        let ann = (0..n).map(|i| FockOperator::annihilator(n, i)).collect::<Result<_>>()?;
        Ok(Self {
            model: model.clone(),
            l,
            sites,
            hop,
            ann,
        })
    }

    pub fn n_modes(&self) -> usize {
        self.ann.len()
    }

    /// mode index of `(ρ, x, σ)`, `σ = 0` for ↑
    pub fn mode(&self, rho: usize, x: usize, sigma: usize) -> usize {
        (rho * self.sites + x) * 2 + sigma
    }

    pub fn a(&self, rho: usize, x: usize, sigma: usize) -> &FockOperator {
        &self.ann[self.mode(rho, x, sigma)]
    }

    pub fn c(&self, rho: usize, x: usize, sigma: usize) -> FockOperator {
        self.a(rho, x, sigma).adjoint()
    }

    fn pairs(&self) -> Vec<(usize, usize)> {
        (0..self.model.bands).flat_map(|r| (0..self.sites).map(move |x| (r, x))).collect()
    }

    /// `Σ ψ_{ρx↓} ψ_{ρx↑}`
    fn pair_annihilator(&self) -> Result<FockOperator> {
        let mut b = FockOperator::zeros(self.n_modes())?;
        for (r, x) in self.pairs() {
            b = b.add(&self.a(r, x, 1).mul(self.a(r, x, 0)));
        }
        Ok(b)
    }

    /// `ψ*_{ρ̂x̂↑}ψ*_{ρ̂x̂↓}` at the fixed site `(0, 0)`
    pub fn a1(&self) -> FockOperator {
        self.c(0, 0, 0).mul(&self.c(0, 0, 1))
    }

    /// `ψ_{η̂ŷ↓}ψ_{η̂ŷ↑}` at the fixed site `(b−1, last)`
    pub fn pair_at_last(&self) -> FockOperator {
        let (r, x) = (self.model.bands - 1, self.sites - 1);
        self.a(r, x, 1).mul(self.a(r, x, 0))
    }

    pub fn build(&self, which: Which, u: f64, gamma: f64) -> Result<FockOperator> {
        let n = self.n_modes();
        let mut o = FockOperator::zeros(n)?;
        match which {
            Which::H0 => {
                let pairs = self.pairs();
                for (i, &(r, x)) in pairs.iter().enumerate() {
                    for (j, &(e, y)) in pairs.iter().enumerate() {
                        let t = self.hop[(i, j)];
                        if t.norm() == 0.0 {
                            continue;
                        }
                        for s in 0..2 {
                            o = o.add(&self.c(r, x, s).mul(self.a(e, y, s)).scale(t));
                        }
                    }
                }
            }
            Which::V => {
                let b = self.pair_annihilator()?;
                o = b.adjoint().mul(&b).scale(C64::new(u / self.sites as f64, 0.0));
            }
            Which::Sz => {
                for (r, x) in self.pairs() {
                    let up = self.c(r, x, 0).mul(self.a(r, x, 0));
                    let dn = self.c(r, x, 1).mul(self.a(r, x, 1));
                    o = o.add(&up.add(&dn.scale(C64::new(-1.0, 0.0))).scale(C64::new(0.5, 0.0)));
                }
            }
            Which::F => {
                let b = self.pair_annihilator()?;
                o = b.adjoint().add(&b).scale(C64::new(gamma, 0.0));
            }
            Which::A1 => o = self.a1(),
            Which::A2 => o = self.a1().mul(&self.pair_at_last()),
            Which::H0Phi => {
                return Err(Error::Precondition("H0(φ) lives on the particle-hole space".into()));
            }
        }
        Ok(o)
    }

    /// `H + iθS_z + F`
    pub fn generator(&self, u: f64, theta: f64, gamma: f64) -> Result<FockOperator> {
        let h = self.build(Which::H0, u, gamma)?.add(&self.build(Which::V, u, gamma)?);
        let sz = self.build(Which::Sz, u, gamma)?.scale(C64::new(0.0, theta));
        Ok(h.add(&sz).add(&self.build(Which::F, u, gamma)?))
    }

    /// `H + iθS_z + F + λ₁A₁ + λ₂A₂`
    pub fn generator_with_sources(&self, u: f64, theta: f64, gamma: f64, lambda: [C64; 2]) -> Result<FockOperator> {
        let a = self.build(Which::A1, u, gamma)?.scale(lambda[0]).add(&self.build(Which::A2, u, gamma)?.scale(lambda[1]));
        Ok(self.generator(u, theta, gamma)?.add(&a))
    }

    /// `H₀ + iθS_z`
    pub fn free_generator(&self, theta: f64) -> Result<FockOperator> {
        let sz = self.build(Which::Sz, 0.0, 0.0)?.scale(C64::new(0.0, theta));
        Ok(self.build(Which::H0, 0.0, 0.0)?.add(&sz))
    }

    /// Free spinful two-point function `⟨T ψ*_{ρxσ}(s) ψ_{ηyτ}(t)⟩` under `H₀ + iθS_z`.
    pub fn two_point(&self, beta: f64, theta: f64, x: (usize, usize, usize), s: f64, y: (usize, usize, usize), t: f64) -> Result<C64> {
        let k = self.free_generator(theta)?;
        time_ordered(&k, beta, &self.c(x.0, x.1, x.2), s, self.a(y.0, y.1, y.2), t)
    }

    /// `Π_k det(1 + 2cos(βθ/2)e^{−βE} + e^{−2βE})` from the band energies.
    pub fn free_partition_product(&self, beta: f64, theta: f64) -> Result<C64> {
        let grid = BZGrid::lattice(&self.model.basis, self.l);
        let c = (0.5 * beta * theta).cos();
        let mut kh = vec![0.0; self.model.dim()];
        let mut prod = C64::new(1.0, 0.0);
        for idx in 0..grid.len() {
            grid.reduced_node(idx, &mut kh);
            for e in self.model.spectral_reduced(&kh)?.eigenvalues {
                let q = (-beta * e).exp();
                prod *= 1.0 + 2.0 * c * q + q * q;
            }
        }
        Ok(prod)
    }

    /// The same product in the `e^{−βΣTr E} 2^{bL^d} Π det(cos + cosh)` form.
    pub fn free_partition_product_cosh(&self, beta: f64, theta: f64) -> Result<C64> {
        let grid = BZGrid::lattice(&self.model.basis, self.l);
        let c = (0.5 * beta * theta).cos();
        let mut kh = vec![0.0; self.model.dim()];
        let (mut tr, mut prod) = (0.0, 1.0);
        for idx in 0..grid.len() {
            grid.reduced_node(idx, &mut kh);
            for e in self.model.spectral_reduced(&kh)?.eigenvalues {
                tr += e;
                prod *= c + (beta * e).cosh();
            }
        }
        let n = (self.model.bands * self.sites) as i32;
        Ok(C64::new((-beta * tr).exp() * 2f64.powi(n) * prod, 0.0))
    }
}

/// Particle-hole system `{1,2} × ℬ × Γ`, modes ordered `(ρ̄, ρ, x)`.
#[derive(Debug, Clone)]
pub struct ParticleHoleSystem {
    pub model: HoppingModel,
    pub l: usize,
    pub sites: usize,
    ann: Vec<FockOperator>,
}

impl ParticleHoleSystem {
    pub fn new(model: &HoppingModel, l: usize) -> Result<Self> {
        let sites = l.pow(model.dim() as u32);
        let n = 2 * model.bands * sites;
        if n > MAX_MODES {
            return Err(Error::Budget {
                what: "Fock modes",
                needed: n,
                limit: MAX_MODES,
            });
        }
        let ann = (0..n).map(|i| FockOperator::annihilator(n, i)).collect::<Result<_>>()?;
        Ok(Self {
            model: model.clone(),
            l,
            sites,
            ann,
        })
    }

    pub fn n_modes(&self) -> usize {
        self.ann.len()
    }

    pub fn mode(&self, ph: usize, band: usize, x: usize) -> usize {
        (ph * self.model.bands + band) * self.sites + x
    }

    /// `H₀(φ)` with `θ` taken as given (callers pass `θ(β)`).
    pub fn h0_phi(&self, theta: f64, phi: C64) -> Result<FockOperator> {
        let b = self.model.bands;
        let t = real_space(&self.model, self.l, 2 * b, |kh| {
            let e = self.model.hopping_reduced(kh);
            // [[iθ/2 + E, φ I], [φ̄ I, iθ/2 − E]] = iθ/2 + E(φ̄)
            let mut m = field_hopping(&e, phi.conj());
            for i in 0..2 * b {
                m[(i, i)] += C64::new(0.0, 0.5 * theta);
            }
            m
        });
        let n = self.n_modes();
        let mut o = FockOperator::zeros(n)?;
        for i in 0..n {
            for j in 0..n {
                if t[(i, j)].norm() == 0.0 {
                    continue;
                }
                o = o.add(&self.ann[i].adjoint().mul(&self.ann[j]).scale(t[(i, j)]));
            }
        }
        Ok(o)
    }

    /// `e^{−iβθbL^d/2} 2^{bL^d} Π_k det(cos(βθ/2) + cosh(β√(E² + |φ|²)))`
    pub fn partition_product(&self, beta: f64, theta: f64, phi: C64) -> Result<C64> {
        let grid = BZGrid::lattice(&self.model.basis, self.l);
        let c = (0.5 * beta * theta).cos();
        let mut kh = vec![0.0; self.model.dim()];
        let mut prod = 1.0;
        for idx in 0..grid.len() {
            grid.reduced_node(idx, &mut kh);
            for e in self.model.spectral_reduced(&kh)?.eigenvalues {
                prod *= c + (beta * (e * e + phi.norm_sqr()).sqrt()).cosh();
            }
        }
        let n = (self.model.bands * self.sites) as f64;
        let a = -0.5 * beta * theta * n;
        Ok(C64::new(a.cos(), a.sin()) * 2f64.powf(n) * prod)
    }

    /// Operator definition of `C(φ)(X, Y)` with `ψ*(s) = e^{sH₀(φ)}ψ*e^{−sH₀(φ)}`.
    pub fn two_point(&self, beta: f64, theta: f64, phi: C64, x: &Point, y: &Point) -> Result<C64> {
        let theta = reduced_theta(beta, theta);
        if (0.5 * beta * theta - PI).abs() < 1e-12 {
            return Err(Error::Singular("βθ(β)/2 = π".into()));
        }
        let h = self.h0_phi(theta, phi)?;
        let site = |p: &Point| -> usize { (0..p.site.len()).rev().fold(0, |acc, a| acc * self.l + p.site[a]) };
        let cx = self.ann[self.mode(x.ph, x.band, site(x))].adjoint();
        let ay = &self.ann[self.mode(y.ph, y.band, site(y))];
        time_ordered(&h, beta, &cx, x.time, ay, y.time)
    }
}

/// `Tr(e^{−βK}(1_{s≥t}c(s)a(t) − 1_{s<t}a(t)c(s))) / Tr e^{−βK}` with
/// `O(s) = e^{sK}Oe^{−sK}`.
pub fn time_ordered(k: &FockOperator, beta: f64, c: &FockOperator, s: f64, a: &FockOperator, t: f64) -> Result<C64> {
    let evolve = |op: &FockOperator, s: f64| -> FockOperator {
        let fwd = (&k.mat * C64::new(s, 0.0)).exp();
        let bwd = (&k.mat * C64::new(-s, 0.0)).exp();
        FockOperator {
            n_modes: op.n_modes,
            mat: &fwd * &op.mat * &bwd,
        }
    };
    let cs = evolve(c, s);
    let at = evolve(a, t);
    let obs = if s >= t { cs.mul(&at) } else { at.mul(&cs).scale(C64::new(-1.0, 0.0)) };
    thermal_ratio(k, beta, &obs)
}

/// Largest deviation from `{a_i, a_j*} = δ_ij`, `{a_i, a_j} = 0`.
pub fn car_residual(n_modes: usize) -> Result<f64> {
    let a: Vec<FockOperator> = (0..n_modes).map(|i| FockOperator::annihilator(n_modes, i)).collect::<Result<_>>()?;
    let id = FockOperator::identity(n_modes)?;
    let mut worst: f64 = 0.0;
    for i in 0..n_modes {
        for j in 0..n_modes {
            let ad = a[j].adjoint();
            let anti = a[i].mul(&ad).add(&ad.mul(&a[i]));
            let want = if i == j { id.clone() } else { FockOperator::zeros(n_modes)? };
            worst = worst.max(anti.add(&want.scale(C64::new(-1.0, 0.0))).max_abs());
            let aa = a[i].mul(&a[j]).add(&a[j].mul(&a[i]));
            worst = worst.max(aa.max_abs());
        }
    }
    Ok(worst)
}

/// The traces whose reality is asserted: `Tr e^{−βG}`, `Tr(e^{−βG}A₁)`,
/// `Tr(e^{−βG}A₁ψψ)` and `Tr(e^{−βG}ψ↓ψ↑)`, for `G = H + iθS_z + F`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ThermalTraces {
    pub z: C64,
    pub pair_create: C64,
    pub pair_pair: C64,
    pub pair_annihilate: C64,
}

pub fn thermal_traces(sys: &SpinfulSystem, beta: f64, theta: f64, u: f64, gamma: f64) -> Result<ThermalTraces> {
    let g = sys.generator(u, theta, gamma)?;
    let (e, c) = exp_shifted(&g, beta)?;
    let scale = (-beta * c).exp();
    let a1 = sys.a1();
    let a2 = sys.build(Which::A2, u, gamma)?;
    let down_up = sys.a(0, 0, 1).mul(sys.a(0, 0, 0));
    let tr = |o: &FockOperator| (&e * &o.mat).trace() * scale;
    Ok(ThermalTraces {
        z: e.trace() * scale,
        pair_create: tr(&a1),
        pair_pair: tr(&a2),
        pair_annihilate: tr(&down_up),
    })
}

/// `−(βL^d)^{-1} log Tr e^{−β(H₀ + iθS_z)}`, real part.
pub fn free_energy_density(sys: &SpinfulSystem, beta: f64, theta: f64) -> Result<f64> {
    let z = trace_exp(&sys.free_generator(theta)?, beta)?;
    Ok(-z.ln().re / (beta * sys.sites as f64))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn car() {
        assert_eq!(car_residual(5).unwrap(), 0.0);
    }

    #[test]
    fn single_site_spectrum() {
        let m = HoppingModel::flat_band(0.8, 1);
        let sys = SpinfulSystem::new(&m, 1).unwrap();
        let h = sys.build(Which::H0, -1.0, 0.0).unwrap();
        let mut ev: Vec<f64> = eigenvalues(&h.mat).unwrap().iter().map(|z| z.re).collect();
        ev.sort_by(f64::total_cmp);
        for (a, b) in ev.iter().zip([0.0, 0.8, 0.8, 1.6]) {
            assert!((a - b).abs() < 1e-12);
        }
    }

    #[test]
    fn budget() {
        let m = HoppingModel::chain(1.0, 0.0, 1);
        assert!(matches!(SpinfulSystem::new(&m, 7), Err(Error::Budget { .. })));
    }
}

#[cfg(test)]
mod identities {
    use super::*;
    use crate::covariance::Covariance;

    fn rel(a: C64, b: C64) -> f64 {
        (a - b).norm() / b.norm()
    }

    #[test]
    fn free_partition_forms() {
        let m = HoppingModel::chain(1.0, 0.3, 1);
        let sys = SpinfulSystem::new(&m, 2).unwrap();
        let (beta, theta) = (1.0, 1.3);
        let g = sys.build(Which::H0, -1.0, 0.0).unwrap().add(&sys.build(Which::Sz, -1.0, 0.0).unwrap().scale(C64::new(0.0, theta)));
        let z = trace_exp(&g, beta).unwrap();
        assert!(rel(z, sys.free_partition_product(beta, theta).unwrap()) < 1e-10);
        assert!(rel(z, sys.free_partition_product_cosh(beta, theta).unwrap()) < 1e-10);
    }

    #[test]
    fn field_partition() {
        let m = HoppingModel::chain(1.0, 0.3, 1);
        let sys = ParticleHoleSystem::new(&m, 2).unwrap();
        for phi in [C64::new(0.0, 0.0), C64::new(0.7, 0.0), C64::new(1.0, 1.0)] {
            let h = sys.h0_phi(1.3, phi).unwrap();
            let z = trace_exp(&h, 1.0).unwrap();
            assert!(rel(z, sys.partition_product(1.0, 1.3, phi).unwrap()) < 1e-10, "{phi}");
        }
    }

    #[test]
    fn two_point_matches_covariance() {
        let m = HoppingModel::chain(1.0, 0.3, 1);
        let sys = ParticleHoleSystem::new(&m, 2).unwrap();
        let (beta, theta, phi) = (1.0, 1.3, C64::new(0.4, -0.2));
        let cov = Covariance::new(&m, beta, theta, phi, 2).unwrap();
        let mut worst: f64 = 0.0;
        for (s, t) in [(0.3, 0.1), (0.1, 0.6), (0.5, 0.5)] {
            for ph in 0..2 {
                for q in 0..2 {
                    for x in 0..2 {
                        let a = Point::new(ph, 0, vec![x], s);
                        let b = Point::new(q, 0, vec![0], t);
                        let e = sys.two_point(beta, theta, phi, &a, &b).unwrap();
                        let c = cov.continuum(&a, &b).unwrap();
                        worst = worst.max((e - c).norm());
                    }
                }
            }
        }
        assert!(worst < 1e-10, "{worst}");
    }

    #[test]
    fn pairing_conserves_sz_not_n() {
        let sys = SpinfulSystem::new(&HoppingModel::chain(1.0, 0.2, 1), 2).unwrap();
        let f = sys.build(Which::F, -0.5, 0.3).unwrap();
        let sz = sys.build(Which::Sz, 0.0, 0.0).unwrap();
        let h = sys.build(Which::H0, 0.0, 0.0).unwrap().add(&sys.build(Which::V, -0.5, 0.0).unwrap());
        let mut n = FockOperator::zeros(sys.n_modes()).unwrap();
        for i in 0..sys.n_modes() {
            n = n.add(&sys.ann[i].adjoint().mul(&sys.ann[i]));
        }
        assert_eq!(f.commutator(&sz).max_abs(), 0.0);
        assert!(h.commutator(&sz).max_abs() < 1e-14);
        assert!(f.commutator(&n).max_abs() > 0.1);
    }

    #[test]
    fn reality_and_theta_period() {
        let m = HoppingModel::chain(1.0, 0.2, 1);
        let sys = SpinfulSystem::new(&m, 2).unwrap();
        let (beta, theta, u, gamma) = (1.2, 0.9, -0.8, 0.3);
        let t = thermal_traces(&sys, beta, theta, u, gamma).unwrap();
        for z in [t.z, t.pair_create, t.pair_pair, t.pair_annihilate] {
            assert!(z.im.abs() < 1e-10 * z.norm().max(1.0), "{z}");
        }
        assert!((t.pair_create - t.pair_annihilate).norm() < 1e-10 * t.z.norm());
        let s = thermal_traces(&sys, beta, theta + 4.0 * PI / beta, u, gamma).unwrap();
        assert!(rel(s.z, t.z) < 1e-10 && rel(s.pair_pair, t.pair_pair) < 1e-10);
    }
}
