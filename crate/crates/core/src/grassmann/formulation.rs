use std::f64::consts::PI;

use nalgebra::DMatrix;
use num_complex::Complex64 as C64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::{gaussian_integral, GrassmannPoly, WickCovariance, MAX_GENERATORS};
use crate::covariance::{fermi_kernel, time_steps};
use crate::ed::{trace_exp, SpinfulSystem, Which};
use crate::error::{param, Error, Result};
use crate::gap::reduced_theta;
use crate::lattice::HoppingModel;
use crate::quadrature::{gauss_hermite, BZGrid};

fn c(x: f64) -> C64 {
    C64::new(x, 0.0)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FormulationParams {
    pub beta: f64,
    pub theta: f64,
    pub u: f64,
    pub gamma: f64,
    #[serde(default)]
    pub lambda: [C64; 2],
}

/// `J₀ = ℬ × Γ × {↑,↓} × [0,β)_h` flattened as `m + βh(σ + 2(x + L^d ρ))`;
/// `ψ̄_X` is generator `2X`, `ψ_X` is `2X + 1`.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct SpinfulLayout {
    pub bands: usize,
    pub sites: usize,
    pub bh: usize,
}

impl SpinfulLayout {
    pub fn new(bands: usize, sites: usize, bh: usize) -> Result<Self> {
        let s = Self { bands, sites, bh };
        if s.n_gen() > MAX_GENERATORS {
            return Err(Error::Budget {
                what: "Grassmann generators",
                needed: s.n_gen(),
                limit: MAX_GENERATORS,
            });
        }
        Ok(s)
    }

    pub fn points(&self) -> usize {
        2 * self.bands * self.sites * self.bh
    }

    pub fn n_gen(&self) -> usize {
        2 * self.points()
    }

    pub fn index(&self, band: usize, site: usize, sigma: usize, m: usize) -> usize {
        m + self.bh * (sigma + 2 * (site + self.sites * band))
    }

    pub fn bar(&self, band: usize, site: usize, sigma: usize, m: usize) -> usize {
        2 * self.index(band, site, sigma, m)
    }

    pub fn psi(&self, band: usize, site: usize, sigma: usize, m: usize) -> usize {
        2 * self.index(band, site, sigma, m) + 1
    }

    fn cells(&self) -> impl Iterator<Item = (usize, usize)> + '_ {
        (0..self.bands).flat_map(move |r| (0..self.sites).map(move |x| (r, x)))
    }
}

/// Free spinful two-point function `G` under `H₀ + iθS_z` on `J₀²`.
pub fn spinful_covariance(model: &HoppingModel, l: usize, beta: f64, theta: f64, lay: &SpinfulLayout) -> Result<DMatrix<C64>> {
    let d = model.dim();
    let grid = BZGrid::lattice(&model.basis, l);
    let sites = grid.len();
    let coords: Vec<Vec<f64>> = (0..sites).map(|s| (0..d).map(|a| ((s / l.pow(a as u32)) % l) as f64).collect()).collect();
    let h = lay.bh as f64 / beta;
    let mut kh = vec![0.0; d];
    let spectra: Vec<_> = (0..sites)
        .map(|i| {
            grid.reduced_node(i, &mut kh);
            model.spectral_reduced(&kh).map(|s| (kh.clone(), s))
        })
        .collect::<Result<_>>()?;
    let n = lay.points();
    let mut g = DMatrix::zeros(n, n);
    for sigma in 0..2 {
        let th = if sigma == 0 { theta } else { -theta };
        for dm in -(lay.bh as i64 - 1)..lay.bh as i64 {
            let tau = dm as f64 / h;
            let kern: Vec<Vec<C64>> = spectra
                .iter()
                .map(|(_, sp)| sp.eigenvalues.iter().map(|&lam| fermi_kernel(beta, th, lam, tau)).collect::<Result<Vec<_>>>())
                .collect::<Result<_>>()?;
            for (r, x) in lay.cells() {
                for (e, y) in lay.cells() {
                    let mut v = C64::new(0.0, 0.0);
                    for (ki, (kv, sp)) in spectra.iter().enumerate() {
                        let arg: f64 = (0..d).map(|a| kv[a] * (coords[y][a] - coords[x][a])).sum();
                        let mut s = C64::new(0.0, 0.0);
                        for (nn, k) in kern[ki].iter().enumerate() {
                            s += sp.unitary[(e, nn)] * sp.unitary[(r, nn)].conj() * k;
                        }
                        v += C64::new(arg.cos(), arg.sin()) * s;
                    }
                    v /= sites as f64;
                    for ms in 0..lay.bh {
                        let mt = ms as i64 - dm;
                        if mt < 0 || mt >= lay.bh as i64 {
                            continue;
                        }
                        g[(lay.index(r, x, sigma, ms), lay.index(e, y, sigma, mt as usize))] = v;
                    }
                }
            }
        }
    }
    Ok(g)
}

struct Polys {
    v: GrassmannPoly,
    f: GrassmannPoly,
    a1: GrassmannPoly,
    a2: GrassmannPoly,
    w: GrassmannPoly,
    v_plus: GrassmannPoly,
    v_minus: GrassmannPoly,
}

fn build_polys(lay: &SpinfulLayout, p: &FormulationParams) -> Result<Polys> {
    let n = lay.n_gen();
    let h = lay.bh as f64 / p.beta;
    let vol = lay.sites as f64;
    let mono = |g: &[usize], k: f64| GrassmannPoly::monomial(n, g, c(k));
    let (xr, xx) = (0, 0);
    let (yr, yx) = (lay.bands - 1, lay.sites - 1);
    let mut v = GrassmannPoly::zero(n)?;
    let mut f = v.clone();
    let mut a1 = v.clone();
    let mut a2 = v.clone();
    let mut w = v.clone();
    let mut vp = v.clone();
    let mut vm = v.clone();
    let hs = (p.u.abs() / (p.beta * vol)).sqrt() / h;
    for m in 0..lay.bh {
        for (r, x) in lay.cells() {
            let (bu, bd) = (lay.bar(r, x, 0, m), lay.bar(r, x, 1, m));
            let (pd, pu) = (lay.psi(r, x, 1, m), lay.psi(r, x, 0, m));
            f.add_assign(&mono(&[bu, bd], p.gamma / h)?);
            f.add_assign(&mono(&[pd, pu], p.gamma / h)?);
            vp.add_assign(&mono(&[bu, bd], hs)?);
            vm.add_assign(&mono(&[pd, pu], hs)?);
            for (e, y) in lay.cells() {
                let (qd, qu) = (lay.psi(e, y, 1, m), lay.psi(e, y, 0, m));
                v.add_assign(&mono(&[bu, bd, qd, qu], p.u / (vol * h))?);
                for t in 0..lay.bh {
                    let (qd, qu) = (lay.psi(e, y, 1, t), lay.psi(e, y, 0, t));
                    w.add_assign(&mono(&[bu, bd, qd, qu], p.u / (p.beta * vol * h * h))?);
                }
            }
        }
        let (bu, bd) = (lay.bar(xr, xx, 0, m), lay.bar(xr, xx, 1, m));
        a1.add_assign(&mono(&[bu, bd], 1.0 / h)?);
        a2.add_assign(&mono(&[bu, bd, lay.psi(yr, yx, 1, m), lay.psi(yr, yx, 0, m)], 1.0 / h)?);
    }
    Ok(Polys {
        v,
        f,
        a1,
        a2,
        w,
        v_plus: vp,
        v_minus: vm,
    })
}

fn setup(model: &HoppingModel, l: usize, p: &FormulationParams, h: f64) -> Result<(SpinfulLayout, WickCovariance, Polys, f64)> {
    let bh = time_steps(p.beta, h)?;
    let sites = l.pow(model.dim() as u32);
    let lay = SpinfulLayout::new(model.bands, sites, bh)?;
    let theta = reduced_theta(p.beta, p.theta);
    if (0.5 * p.beta * theta - PI).abs() < 1e-12 {
        return Err(Error::Singular("βθ(β)/2 = π".into()));
    }
    let g = spinful_covariance(model, l, p.beta, theta, &lay)?;
    let cov = WickCovariance::from_two_point(&g)?;
    let polys = build_polys(&lay, p)?;
    Ok((lay, cov, polys, theta))
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct FirstFormulationRow {
    pub h: f64,
    pub n_gen: usize,
    pub grassmann: C64,
    pub trace_ratio: C64,
    pub gap: f64,
    /// `∂_{λ₂}` at `λ = 0` of both sides
    pub source_derivative_grassmann: C64,
    pub source_derivative_trace: C64,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct FirstFormulationReport {
    pub rows: Vec<FirstFormulationRow>,
    pub decreasing: bool,
}

impl FirstFormulationReport {
    pub fn final_gap(&self) -> f64 {
        self.rows.last().map_or(f64::NAN, |r| r.gap)
    }
}

/// `∫e^{−V−F−A}dμ_G` against `Tr e^{−β(H+iθ(β)S_z+F+A)} / Tr e^{−β(H₀+iθ(β)S_z)}`
/// for each `h`.
pub fn first_formulation_check(model: &HoppingModel, l: usize, p: &FormulationParams, hs: &[f64]) -> Result<FirstFormulationReport> {
    let theta = reduced_theta(p.beta, p.theta);
    let sys = SpinfulSystem::new(model, l)?;
    let z0 = trace_exp(&sys.free_generator(theta)?, p.beta)?;
    let k = sys.generator_with_sources(p.u, theta, p.gamma, p.lambda)?;
    let ratio = trace_exp(&k, p.beta)? / z0;
    let k0 = sys.generator(p.u, theta, p.gamma)?;
    let (e, shift) = crate::ed::exp_shifted(&k0, p.beta)?;
    let a2 = sys.build(Which::A2, p.u, p.gamma)?;
    let d_trace = -(&e * &a2.mat).trace() * (-p.beta * shift).exp() * p.beta / z0;
    let mut rows = Vec::with_capacity(hs.len());
    for &h in hs {
        let (lay, cov, q, _) = setup(model, l, p, h)?;
        let base = q.v.add(&q.f).scale(c(-1.0));
        let src = q.a1.scale(p.lambda[0]).add(&q.a2.scale(p.lambda[1]));
        let full = base.sub(&src).exp_even()?;
        let lhs = gaussian_integral(&full, &cov)?;
        let d_grass = -gaussian_integral(&q.a2.mul(&base.exp_even()?), &cov)?;
        rows.push(FirstFormulationRow {
            h,
            n_gen: lay.n_gen(),
            grassmann: lhs,
            trace_ratio: ratio,
            gap: (lhs - ratio).norm(),
            source_derivative_grassmann: d_grass,
            source_derivative_trace: d_trace,
        });
    }
    let decreasing = rows.windows(2).all(|w| w[1].gap < w[0].gap);
    Ok(FirstFormulationReport { rows, decreasing })
}

#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
pub struct HsReport {
    pub lhs: C64,
    pub rhs: C64,
    pub residual: f64,
}

/// `∫e^{−V−F−A}dμ_G` against
/// `π^{-1}∫dφ₁dφ₂ e^{−|φ|²} ∫e^{−V+W−F−A+φV₊+φ̄V₋}dμ_G`, the outer
/// integral by tensor Gauss–Hermite quadrature.
pub fn hubbard_stratonovich_check(model: &HoppingModel, l: usize, p: &FormulationParams, h: f64, quad_n: usize) -> Result<HsReport> {
    if p.u > 0.0 {
        return Err(param("U", p.u, "the transformation needs U ≤ 0"));
    }
    if quad_n == 0 {
        return Err(param("quad_n", 0.0, "need at least one node"));
    }
    let (_, cov, q, _) = setup(model, l, p, h)?;
    let src = q.a1.scale(p.lambda[0]).add(&q.a2.scale(p.lambda[1]));
    let base = q.v.add(&q.f).add(&src).scale(c(-1.0));
    let lhs = gaussian_integral(&base.exp_even()?, &cov)?;
    let inner = base.add(&q.w);
    let (x, wts) = gauss_hermite(quad_n);
    let mut rhs = C64::new(0.0, 0.0);
    for (i, &a) in x.iter().enumerate() {
        for (j, &b) in x.iter().enumerate() {
            let phi = C64::new(a, b);
            let e = inner.add(&q.v_plus.scale(phi)).add(&q.v_minus.scale(phi.conj()));
            rhs += wts[i] * wts[j] * gaussian_integral(&e.exp_even()?, &cov)?;
        }
    }
    rhs /= PI;
    Ok(HsReport {
        lhs,
        rhs,
        residual: (lhs - rhs).norm(),
    })
}

/// `∫V_v(ψ)f(ψ)dμ_Ĉ` with `V_v = γL^{-1}Σ_{x,y,t,u}(δ_{tu} − 1/n)ψ̄_{xt}ψ_{xt}ψ̄_{yu}ψ_{yu}`.
/// `chat` is indexed by `t + n·x`.
pub fn vanishing_property_check(n: usize, l: usize, gamma: f64, chat: &DMatrix<C64>, f: &GrassmannPoly) -> Result<C64> {
    let pts = n * l;
    if chat.nrows() != pts || chat.ncols() != pts {
        return Err(param("covariance", chat.nrows() as f64, format!("expected {pts}×{pts}")));
    }
    let ng = 2 * pts;
    let cov = WickCovariance::from_two_point(chat)?;
    let mut v = GrassmannPoly::zero(ng)?;
    for x in 0..l {
        for y in 0..l {
            for t in 0..n {
                for u in 0..n {
                    let k = gamma / l as f64 * (if t == u { 1.0 } else { 0.0 } - 1.0 / n as f64);
                    let (i, j) = (t + n * x, u + n * y);
                    v.add_assign(&GrassmannPoly::monomial(ng, &[2 * i, 2 * i + 1, 2 * j, 2 * j + 1], c(k))?);
                }
            }
        }
    }
    gaussian_integral(&v.mul(f), &cov)
}

#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
pub struct VanishingReport {
    pub value: C64,
    pub with_unit_f: C64,
    /// same construction with a time-dependent covariance
    pub control: C64,
}

/// Random even `f` and random time-constant `Ĉ`, plus a time-dependent control.
pub fn vanishing_property_demo(n: usize, l: usize, gamma: f64, seed: u64) -> Result<VanishingReport> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let pts = n * l;
    let ng = 2 * pts;
    let rc = |rng: &mut ChaCha8Rng| C64::new(rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0));
    let space = DMatrix::from_fn(l, l, |_, _| rc(&mut rng));
    let chat = DMatrix::from_fn(pts, pts, |i, j| space[(i / n, j / n)]);
    let noisy = DMatrix::from_fn(pts, pts, |_, _| rc(&mut rng));
    let mut f = GrassmannPoly::constant(ng, rc(&mut rng))?;
    for _ in 0..24 {
        let deg = 2 * rng.gen_range(1..=3usize);
        let mut gens: Vec<usize> = Vec::with_capacity(deg);
        while gens.len() < deg {
            let g = rng.gen_range(0..ng);
            if !gens.contains(&g) {
                gens.push(g);
            }
        }
        f.add_assign(&GrassmannPoly::monomial(ng, &gens, rc(&mut rng))?);
    }
    Ok(VanishingReport {
        value: vanishing_property_check(n, l, gamma, &chat, &f)?,
        with_unit_f: vanishing_property_check(n, l, gamma, &chat, &GrassmannPoly::one(ng)?)?,
        control: vanishing_property_check(n, l, gamma, &noisy, &f)?,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn params(u: f64, gamma: f64) -> FormulationParams {
        FormulationParams {
            beta: 1.0,
            theta: 1.0,
            u,
            gamma,
            lambda: [C64::new(0.0, 0.0); 2],
        }
    }

    #[test]
    fn covariance_matches_ed() {
        let m = HoppingModel::chain(1.0, 0.3, 1);
        let lay = SpinfulLayout::new(1, 2, 2).unwrap();
        let (beta, theta) = (1.0, 1.3);
        let g = spinful_covariance(&m, 2, beta, theta, &lay).unwrap();
        let sys = SpinfulSystem::new(&m, 2).unwrap();
        let h = lay.bh as f64 / beta;
        let mut worst: f64 = 0.0;
        for sigma in 0..2 {
            for x in 0..2 {
                for y in 0..2 {
                    for ms in 0..2 {
                        for mt in 0..2 {
                            let e = sys.two_point(beta, theta, (0, x, sigma), ms as f64 / h, (0, y, sigma), mt as f64 / h).unwrap();
                            worst = worst.max((e - g[(lay.index(0, x, sigma, ms), lay.index(0, y, sigma, mt))]).norm());
                        }
                    }
                }
            }
        }
        assert!(worst < 1e-10, "{worst}");
    }

    #[test]
    fn free_normalization() {
        let m = HoppingModel::chain(1.0, 0.4, 1);
        let r = first_formulation_check(&m, 1, &params(0.0, 0.0), &[2.0, 4.0]).unwrap();
        for row in &r.rows {
            assert!((row.grassmann - 1.0).norm() < 1e-12 && (row.trace_ratio - 1.0).norm() < 1e-12);
        }
    }

    #[test]
    fn hs_small() {
        let m = HoppingModel::chain(1.0, 0.4, 1);
        let r = hubbard_stratonovich_check(&m, 1, &params(-0.5, 0.2), 2.0, 8).unwrap();
        assert!(r.residual < 1e-10, "{r:?}");
    }

    #[test]
    fn vanishing() {
        let r = vanishing_property_demo(3, 2, 0.7, 5).unwrap();
        assert!(r.value.norm() < 1e-12 && r.with_unit_f.norm() < 1e-12, "{r:?}");
        assert!(r.control.norm() > 1e-6, "{r:?}");
    }
}
