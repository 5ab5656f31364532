//! Closed-form infinite-volume observables, the effective potentials `f`,
//! `f_L`, `F_L`, and the mean-field finite-volume φ-integrals.

use std::f64::consts::LN_2;

use num_complex::Complex64 as C64;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{param, Error, Result};
use crate::gap::{g_prime, g_value, solve_gap, solve_perturbed, Field, PhysParams};
use crate::lattice::HoppingModel;
use crate::measure::SpectralMeasure;
use crate::quadrature::{gauss_legendre, pairwise_sum, par_sum, BZGrid};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Observables {
    pub free_energy: f64,
    pub ssb_per_band: Vec<f64>,
    pub odlro: Vec<Vec<f64>>,
    pub cooper_pair_density: f64,
    pub delta: f64,
}

/// `Δ²/|U| − (1/β) D_d ∫ Tr log(2c e^{−βE} + e^{β(s−E)} + e^{−β(s+E)})`
/// with `s = √(E²+Δ²)`, using `2e^{−βE}(c + cosh βs)` for the log argument.
pub fn free_energy_density(meas: &SpectralMeasure, field: &Field, u: f64, delta: f64) -> Result<f64> {
    if delta == 0.0 && field.opc <= 0.0 && meas.min_abs_eigenvalue() == 0.0 {
        return Err(Error::Domain("log argument vanishes at the singular field".into()));
    }
    let d2 = delta * delta;
    let lc = meas.sum_tr(|l| field.log_cosh((l * l + d2).sqrt()));
    if !lc.is_finite() {
        return Err(Error::Domain(format!("nonpositive log argument, Σ log = {lc}")));
    }
    let b = meas.bands as f64;
    Ok(d2 / u.abs() - b * LN_2 / field.beta + meas.mean_trace - lc / field.beta)
}

/// `D_d ∫ Tr(E − |E|)`, the β → ∞ limit of the free energy.
pub fn zero_temperature_free_energy(meas: &SpectralMeasure) -> f64 {
    meas.sum_tr(|l| l - l.abs())
}

/// `s(ρ) = (D_d/2) ∫ G_{β,θ,Δ}(k)(ρ,ρ)`
pub fn band_factors(meas: &SpectralMeasure, field: &Field, delta: f64) -> Result<Vec<f64>> {
    let d2 = delta * delta;
    (0..meas.bands)
        .map(|r| Ok(0.5 * meas.sum_diag(r, |l| field.kernel((l * l + d2).sqrt()))?))
        .collect()
}

pub fn observables_at(meas: &SpectralMeasure, field: &Field, u: f64, delta: f64) -> Result<Observables> {
    let free_energy = free_energy_density(meas, field, u, delta)?;
    let s = if delta > 0.0 {
        band_factors(meas, field, delta)?
    } else {
        vec![0.0; meas.bands]
    };
    let ssb_per_band = s.iter().map(|x| -delta * x).collect();
    let odlro = s.iter().map(|a| s.iter().map(|b| delta * delta * a * b).collect()).collect();
    Ok(Observables {
        free_energy,
        ssb_per_band,
        odlro,
        cooper_pair_density: delta * delta / (u * u),
        delta,
    })
}

/// Solves the gap equation and evaluates every closed-form observable.
pub fn observables(meas: &SpectralMeasure, field: &Field, u: f64, tol: f64) -> Result<Observables> {
    let sol = solve_gap(meas, field, u, tol)?;
    observables_at(meas, field, u, sol.delta)
}

/// `f(x) = −x²/|U| + (1/β) ∫ Tr[log(c + cosh β√(E²+x²)) − log(c + cosh βE)]`
/// on whatever measure is supplied (continuum grid or `Γ*`).
#[derive(Debug, Clone, Copy)]
pub struct EffectivePotential<'a> {
    pub meas: &'a SpectralMeasure,
    pub field: Field,
    pub u: f64,
}

impl<'a> EffectivePotential<'a> {
    pub fn new(meas: &'a SpectralMeasure, field: Field, u: f64) -> Self {
        Self { meas, field, u }
    }

    pub fn value(&self, x: f64) -> f64 {
        let x2 = x * x;
        let f = &self.field;
        -x2 / self.u.abs()
            + self.meas.sum_tr(|l| {
                if x2 == 0.0 {
                    return 0.0;
                }
                f.log_cosh((l * l + x2).sqrt()) - f.log_cosh(l)
            }) / f.beta
    }

    /// `f'(x) = x g(x)`
    pub fn d1(&self, x: f64) -> f64 {
        x * g_value(self.meas, &self.field, self.u, x)
    }

    pub fn d2(&self, x: f64) -> f64 {
        g_value(self.meas, &self.field, self.u, x) + x * g_prime(self.meas, &self.field, x)
    }

    /// `F(x₁,x₂) = f(|x|) + (|x|² − (x₁−γ)² − x₂²)/|U|`
    pub fn value_2d(&self, x1: f64, x2: f64, gamma: f64) -> f64 {
        let r2 = x1 * x1 + x2 * x2;
        self.value(r2.sqrt()) + (r2 - (x1 - gamma).powi(2) - x2 * x2) / self.u.abs()
    }
}

/// `½(f₊ + f₋) = (e^{−iw} + cosh βs) / (2(cos w + cosh βs))`, `w = βθ/2`.
pub fn half_occupation(field: &Field, s: f64) -> C64 {
    let x = field.beta * s.abs();
    let w = 0.5 * field.beta * field.theta;
    let e = C64::new(w.cos(), -w.sin());
    if x > 30.0 {
        let q = (-x).exp();
        // divide through by cosh x
        let r = 2.0 * q / (1.0 + q * q);
        return (e * r + 1.0) / (2.0 * (field.c * r + 1.0));
    }
    (e + x.cosh()) / (2.0 * field.denom(x))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Quantity {
    Ssb,
    Odlro,
    Cpd,
    LogZ,
}

impl std::str::FromStr for Quantity {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "ssb" => Ok(Self::Ssb),
            "odlro" => Ok(Self::Odlro),
            "cpd" => Ok(Self::Cpd),
            "logz" => Ok(Self::LogZ),
            _ => Err(Error::Config(format!("unknown quantity {s}"))),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FiniteVolumeValue {
    pub value: f64,
    /// imaginary part of the ratio, expected to be negligible
    pub imag: f64,
    /// maximizer of `f_L` (or `F_L` along `x₁`)
    pub maximizer: f64,
    /// Laplace width `(βL^d |f_L''|)^{-1/2}`
    pub width: f64,
}

const PANELS: usize = 8;
const HALF_WIDTH: f64 = 12.0;

/// Composite Gauss–Legendre nodes on `[lo, hi]`.
fn panel_nodes(lo: f64, hi: f64, panels: usize, order: usize) -> Vec<(f64, f64)> {
    let (xs, ws) = gauss_legendre(order);
    let h = (hi - lo) / panels as f64;
    let mut out = Vec::with_capacity(panels * order);
    for p in 0..panels {
        let c = lo + (p as f64 + 0.5) * h;
        for (x, w) in xs.iter().zip(&ws) {
            out.push((c + 0.5 * h * x, 0.5 * h * w));
        }
    }
    out
}

/// Extends `[lo, hi]` around the maximizer until the shifted exponent has
/// dropped by at least `drop` at both ends.
fn laplace_window<F: Fn(f64) -> f64>(g: &F, a: f64, sigma: f64, floor: Option<f64>, drop: f64) -> Result<(f64, f64)> {
    let top = g(a);
    let mut w = HALF_WIDTH * sigma;
    let mut hi = a + w;
    while g(hi) - top > -drop {
        w *= 1.5;
        hi = a + w;
        if !hi.is_finite() || w > 1e8 * (1.0 + a.abs()) {
            return Err(Error::Domain("exponent is not eventually decreasing".into()));
        }
    }
    let mut w = HALF_WIDTH * sigma;
    let mut lo = a - w;
    loop {
        if let Some(f) = floor {
            if lo <= f {
                lo = f;
                break;
            }
        }
        if g(lo) - top <= -drop {
            break;
        }
        w *= 1.5;
        lo = a - w;
        if w > 1e8 * (1.0 + a.abs()) {
            return Err(Error::Domain("exponent is not eventually decreasing".into()));
        }
    }
    Ok((lo, hi))
}

/// Mean-field finite-volume expectation value of `quantity`.
///
/// The φ-integral over `e^{βL^d F_L}` is done with the Grassmann factor set
/// to one; insertions are the equal-time Wick values of the quadratic state
/// at pairing field φ. `ssb` and `odlro` refer to band 0 and, for `odlro`,
/// the sites `0` and `(L/2,…,L/2)`.
pub fn finite_volume_expectation(
    model: &HoppingModel,
    p: &PhysParams,
    l: usize,
    quantity: Quantity,
    mean_field: bool,
) -> Result<FiniteVolumeValue> {
    if !mean_field {
        return Err(Error::Precondition(
            "only the mean-field mode is supported (Grassmann correction factor set to 1)".into(),
        ));
    }
    if l == 0 {
        return Err(param("L", 0.0, "must be positive"));
    }
    let with_vectors = matches!(quantity, Quantity::Ssb | Quantity::Odlro) && model.bands > 1;
    let meas = SpectralMeasure::lattice(model, l, with_vectors)?;
    let field = p.field();
    let pot = EffectivePotential::new(&meas, field, p.u);
    let vol = (l as f64).powi(model.dim() as i32);
    let n = field.beta * vol;

    if quantity == Quantity::Ssb && p.gamma > 0.0 {
        return ssb_2d(&pot, p.gamma, n);
    }
    if quantity == Quantity::Ssb {
        // the phase average of φ̄ vanishes
        let sol = solve_gap(&meas, &field, p.u, 1e-13)?;
        return Ok(FiniteVolumeValue {
            value: 0.0,
            imag: 0.0,
            maximizer: sol.delta,
            width: f64::NAN,
        });
    }

    let sol = solve_gap(&meas, &field, p.u, 1e-13)?;
    let a = sol.delta;
    let curv = if a > 0.0 { pot.d2(a) } else { sol.criterion_value };
    if !(curv < 0.0) {
        return Err(Error::Domain(format!("maximizer is degenerate, f_L'' = {curv}")));
    }
    let sigma = 1.0 / (n * curv.abs()).sqrt();
    let expo = |x: f64| n * pot.value(x);
    let (lo, hi) = laplace_window(&expo, a, sigma, Some(0.0), 80.0)?;
    let top = expo(a);
    let nodes = panel_nodes(lo, hi, PANELS, 20);

    let insertion: Box<dyn Fn(f64) -> C64 + Sync> = match quantity {
        Quantity::Cpd => Box::new(|x| cpd_insertion(&meas, &field, x, vol)),
        Quantity::Odlro => {
            let phases = odlro_phases(model, l);
            let m = &meas;
            Box::new(move |x| odlro_insertion(m, &field, x, &phases))
        }
        Quantity::LogZ => Box::new(|_| C64::new(1.0, 0.0)),
        Quantity::Ssb => unreachable!(),
    };
    let vals: Vec<(f64, C64)> = nodes
        .par_iter()
        .map(|&(x, w)| {
            let e = w * x * (expo(x) - top).exp();
            (e, insertion(x) * e)
        })
        .collect();
    let den = pairwise_sum(&vals.iter().map(|v| v.0).collect::<Vec<_>>());
    let num_re = pairwise_sum(&vals.iter().map(|v| v.1.re).collect::<Vec<_>>());
    let num_im = pairwise_sum(&vals.iter().map(|v| v.1.im).collect::<Vec<_>>());
    if !(den > 0.0 && den.is_finite()) {
        return Err(Error::Overflow(format!("normalizing integral {den}")));
    }
    let (value, imag) = match quantity {
        Quantity::LogZ => {
            // Z = Z_free · (βL^d/(π|U|)) · 2π ∫ x e^{βL^d f_L}
            let free = -field.beta * meas.mean_trace
                + meas.bands as f64 * LN_2
                + meas.sum_tr(|x| field.log_cosh(x));
            let log_int = (2.0 * n / p.u.abs()).ln() + top + den.ln();
            (free + log_int / vol, 0.0)
        }
        _ => (num_re / den, num_im / den),
    };
    Ok(FiniteVolumeValue {
        value,
        imag,
        maximizer: a,
        width: sigma,
    })
}

/// Wick value of `L^{-2d} Σ ⟨ψ*↑ψ*↓(ρx) ψ↓ψ↑(ηy)⟩` at `|φ| = x`:
/// `x²S²/4 + L^{-d}[Σ Tr n₁₁ − Σ Tr n₁₁n₂₂]` in the Nambu band blocks.
pub fn cpd_insertion(meas: &SpectralMeasure, field: &Field, x: f64, vol: f64) -> C64 {
    let x2 = x * x;
    let b = meas.bands;
    let parts: Vec<(f64, C64)> = (0..meas.len())
        .into_par_iter()
        .map(|i| {
            let w = meas.weights[i];
            let mut k_sum = 0.0;
            let mut corr = C64::new(0.0, 0.0);
            for &l in &meas.eig[i * b..(i + 1) * b] {
                let s = (l * l + x2).sqrt();
                let k = field.kernel(s);
                let h = half_occupation(field, s);
                let p11 = h - 0.5 * k * l;
                let p22 = h + 0.5 * k * l;
                k_sum += k;
                corr += p11 - p11 * p22;
            }
            (w * k_sum, corr * w)
        })
        .collect();
    let s_tot = pairwise_sum(&parts.iter().map(|p| p.0).collect::<Vec<_>>());
    let c_re = pairwise_sum(&parts.iter().map(|p| p.1.re).collect::<Vec<_>>());
    let c_im = pairwise_sum(&parts.iter().map(|p| p.1.im).collect::<Vec<_>>());
    C64::new(0.25 * x2 * s_tot * s_tot, 0.0) + C64::new(c_re, c_im) / vol
}

fn odlro_phases(model: &HoppingModel, l: usize) -> Vec<C64> {
    let g = BZGrid::lattice(&model.basis, l);
    let m = (l / 2) as f64;
    let mut kh = vec![0.0; model.dim()];
    (0..g.len())
        .map(|i| {
            g.reduced_node(i, &mut kh);
            let ph: f64 = kh.iter().map(|k| k * m).sum();
            C64::new(ph.cos(), ph.sin())
        })
        .collect()
}

/// Wick value of `⟨ψ*↑ψ*↓(0,0) ψ↓ψ↑(0,y)⟩` at `|φ| = x`, phase averaged.
fn odlro_insertion(meas: &SpectralMeasure, field: &Field, x: f64, phases: &[C64]) -> C64 {
    let x2 = x * x;
    let b = meas.bands;
    let bw = meas.band_weights.as_ref();
    let parts: Vec<(f64, C64, C64)> = (0..meas.len())
        .into_par_iter()
        .map(|i| {
            let w = meas.weights[i];
            let mut s0 = 0.0;
            let mut n11 = C64::new(0.0, 0.0);
            let mut n22 = C64::new(0.0, 0.0);
            for (j, &l) in meas.eig[i * b..(i + 1) * b].iter().enumerate() {
                let uw = bw.map_or(1.0, |v| v[i * b * b + j]);
                let s = (l * l + x2).sqrt();
                let k = field.kernel(s);
                let h = half_occupation(field, s);
                s0 += uw * k;
                n11 += (h - 0.5 * k * l) * uw;
                n22 += (h + 0.5 * k * l) * uw;
            }
            // ⟨ψ*₁(0)ψ₁(y)⟩ carries e^{i⟨k,y⟩}, ⟨ψ*₂(y)ψ₂(0)⟩ carries e^{-i⟨k,y⟩}
            (w * s0, n11 * phases[i] * w, n22 * phases[i].conj() * w)
        })
        .collect();
    let s0 = pairwise_sum(&parts.iter().map(|p| p.0).collect::<Vec<_>>());
    let sum_c = |f: &dyn Fn(&(f64, C64, C64)) -> C64| {
        let v: Vec<C64> = parts.iter().map(f).collect();
        crate::quadrature::pairwise_sum_c(&v)
    };
    let a = sum_c(&|p| p.1);
    let c = sum_c(&|p| p.2);
    C64::new(0.25 * x2 * s0 * s0, 0.0) - a * c
}

/// Symmetry-broken one-point function by a tensor Gauss rule around `(a_L(γ), 0)`.
fn ssb_2d(pot: &EffectivePotential, gamma: f64, n: f64) -> Result<FiniteVolumeValue> {
    let meas = pot.meas;
    let field = pot.field;
    let a = solve_perturbed(meas, &field, pot.u, gamma, 1e-13)?;
    let g_a = g_value(meas, &field, pot.u, a);
    let c11 = g_a + a * g_prime(meas, &field, a);
    let c22 = g_a;
    if !(c11 < 0.0 && c22 < 0.0) {
        return Err(Error::Domain("maximizer of F_L is degenerate".into()));
    }
    let s1 = 1.0 / (n * c11.abs()).sqrt();
    let s2 = 1.0 / (n * c22.abs()).sqrt();
    let e1 = |x: f64| n * pot.value_2d(x, 0.0, gamma);
    let e2 = |y: f64| n * pot.value_2d(a, y, gamma);
    let (lo1, hi1) = laplace_window(&e1, a, s1, None, 60.0)?;
    let (_, hi2) = laplace_window(&e2, 0.0, s2, Some(0.0), 60.0)?;
    let top = e1(a);
    let xs = panel_nodes(lo1, hi1, 4, 16);
    // even in x₂: integrate over [0, hi2] and double
    let ys = panel_nodes(0.0, hi2, 4, 16);
    let pts: Vec<(f64, f64, f64)> = xs
        .iter()
        .flat_map(|&(x, wx)| ys.iter().map(move |&(y, wy)| (x, y, wx * wy)))
        .collect();
    let vals: Vec<(f64, f64)> = pts
        .par_iter()
        .map(|&(x, y, w)| {
            let r = x.hypot(y);
            let e = w * (n * pot.value_2d(x, y, gamma) - top).exp();
            if e == 0.0 {
                return (0.0, 0.0);
            }
            let s = 0.5 * meas.sum_diag(0, |l| field.kernel((l * l + r * r).sqrt())).unwrap_or(f64::NAN);
            // −(φ̄/2)·2s with the imaginary part odd in x₂
            (e, -x * s * e)
        })
        .collect();
    let den = pairwise_sum(&vals.iter().map(|v| v.0).collect::<Vec<_>>());
    let num = pairwise_sum(&vals.iter().map(|v| v.1).collect::<Vec<_>>());
    if !(den > 0.0 && num.is_finite()) {
        return Err(Error::Overflow(format!("normalizing integral {den}")));
    }
    Ok(FiniteVolumeValue {
        value: num / den,
        imag: 0.0,
        maximizer: a,
        width: s1.max(s2),
    })
}

/// One family for the 1D Laplace check.
pub struct LaplaceFamily<'a> {
    /// `(L, x) ↦ f_L(x)`
    pub f_l: &'a (dyn Fn(f64, f64) -> f64 + Sync),
    pub f: &'a (dyn Fn(f64) -> f64 + Sync),
    pub u_l: &'a (dyn Fn(f64, f64) -> f64 + Sync),
    pub g_l: &'a (dyn Fn(f64, f64) -> f64 + Sync),
    pub u: &'a (dyn Fn(f64) -> f64 + Sync),
    pub g: &'a (dyn Fn(f64) -> f64 + Sync),
    /// maximizer of `f` on `[0, ∞)`
    pub a: f64,
    pub d: u32,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LaplaceRow {
    pub l: f64,
    pub ratio: f64,
    pub ratio_error: f64,
    pub log_limit: f64,
    pub log_error: f64,
}

/// Golden-section maximization of `f` on `[a, b]`.
pub fn golden_max<F: Fn(f64) -> f64>(f: F, mut a: f64, mut b: f64, tol: f64) -> f64 {
    let r = 0.5 * (5f64.sqrt() - 1.0);
    let mut c = b - r * (b - a);
    let mut d = a + r * (b - a);
    let (mut fc, mut fd) = (f(c), f(d));
    while (b - a).abs() > tol {
        if fc > fd {
            b = d;
            d = c;
            fd = fc;
            c = b - r * (b - a);
            fc = f(c);
        } else {
            a = c;
            c = d;
            fc = fd;
            d = a + r * (b - a);
            fd = f(d);
        }
    }
    0.5 * (a + b)
}

/// `∫₀^∞ x e^{L^d f_L} u_L / ∫₀^∞ x e^{L^d f_L} g_L` against `u(a)/g(a)`, and
/// `L^{-d} log ∫₀^∞ x e^{L^d f_L} g_L` against `f(a)`.
pub fn laplace_check_1d(fam: &LaplaceFamily, ls: &[f64]) -> Result<Vec<LaplaceRow>> {
    let target = (fam.u)(fam.a) / (fam.g)(fam.a);
    let fa = (fam.f)(fam.a);
    ls.iter()
        .map(|&l| {
            let n = l.powi(fam.d as i32);
            let fl = |x: f64| (fam.f_l)(l, x);
            // locate the maximizer from a coarse scan, then golden section
            let span = 4.0 * (fam.a.abs() + 1.0);
            let m = 400;
            let best = (0..=m)
                .map(|i| span * i as f64 / m as f64)
                .max_by(|x, y| fl(*x).total_cmp(&fl(*y)))
                .unwrap_or(0.0);
            let h = span / m as f64;
            let xm = golden_max(fl, (best - h).max(0.0), best + h, 1e-14 * (1.0 + best));
            let top = fl(xm);
            // curvature from a difference quotient, fallback quartic width
            let hh = 1e-4 * (1.0 + xm);
            let c2 = (fl(xm + hh) - 2.0 * top + fl((xm - hh).max(0.0))) / (hh * hh);
            let sigma = if c2 < 0.0 { 1.0 / (n * c2.abs()).sqrt() } else { n.powf(-0.25) };
            let expo = |x: f64| n * fl(x);
            let (lo, hi) = laplace_window(&expo, xm, sigma, Some(0.0), 80.0)?;
            let nodes = panel_nodes(lo, hi, 16, 20);
            let (mut num, mut den) = (Vec::new(), Vec::new());
            for (x, w) in nodes {
                let e = w * x * (n * (fl(x) - top)).exp();
                num.push(e * (fam.u_l)(l, x));
                den.push(e * (fam.g_l)(l, x));
            }
            let (num, den) = (pairwise_sum(&num), pairwise_sum(&den));
            if !(den.is_finite() && den != 0.0 && num.is_finite()) {
                return Err(Error::Domain(format!("non-integrable family at L = {l}")));
            }
            let ratio = num / den;
            let log_limit = top + den.abs().ln() / n;
            Ok(LaplaceRow {
                l,
                ratio,
                ratio_error: (ratio - target).abs(),
                log_limit,
                log_error: (log_limit - fa).abs(),
            })
        })
        .collect()
}

/// `Σ_ρ s(ρ)` on a measure; equals `1/|U|` at a solution of the gap equation.
pub fn band_factor_sum(meas: &SpectralMeasure, field: &Field, delta: f64) -> f64 {
    let d2 = delta * delta;
    0.5 * par_sum(meas.len(), |i| {
        let b = meas.bands;
        meas.weights[i]
            * meas.eig[i * b..(i + 1) * b]
                .iter()
                .map(|l| field.kernel((l * l + d2).sqrt()))
                .sum::<f64>()
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn flat_band_free_energy() {
        let eps = 1.0;
        let m = HoppingModel::flat_band(eps, 1);
        let meas = SpectralMeasure::uniform(&m, 2, 0.5, false).unwrap();
        let (beta, theta, delta, u) = (1.7, 0.6, 0.4, -2.0);
        let f = Field::from_theta(beta, theta);
        let got = free_energy_density(&meas, &f, u, delta).unwrap();
        let s = (eps * eps + delta * delta).sqrt();
        let c = (beta * theta / 2.0).cos();
        let arg = 2.0 * c * (-beta * eps).exp() + (beta * (s - eps)).exp() + (-beta * (s + eps)).exp();
        let want = delta * delta / u.abs() - arg.ln() / beta;
        assert!((got - want).abs() < 1e-14, "{got} {want}");
    }

    #[test]
    fn half_occupation_branches() {
        let f = Field::from_theta(3.0, 0.7);
        let w = 0.5 * 3.0 * f.theta;
        for s in [9.9, 10.0, 10.1] {
            let x: f64 = 3.0 * s;
            let want = (C64::new(w.cos(), -w.sin()) + x.cosh()) / (2.0 * (w.cos() + x.cosh()));
            assert!((half_occupation(&f, s) - want).norm() < 1e-14);
        }
    }

    #[test]
    fn golden_section_quadratic() {
        let x = golden_max(|x| -(x - 0.3).powi(2), 0.0, 1.0, 1e-12);
        assert!((x - 0.3).abs() < 1e-8);
    }

    #[test]
    fn laplace_trivial_family() {
        let fl = |_: f64, x: f64| -(x - 1.0) * (x - 1.0);
        let f = |x: f64| -(x - 1.0) * (x - 1.0);
        let one2 = |_: f64, _: f64| 1.0;
        let one = |_: f64| 1.0;
        let fam = LaplaceFamily {
            f_l: &fl,
            f: &f,
            u_l: &one2,
            g_l: &one2,
            u: &one,
            g: &one,
            a: 1.0,
            d: 2,
        };
        let rows = laplace_check_1d(&fam, &[4.0, 16.0, 64.0]).unwrap();
        assert!(rows.iter().all(|r| r.ratio_error < 1e-14));
        assert!(rows[2].log_error < rows[0].log_error);
    }
}
