//! The free covariance `C(φ)` of the particle-hole Hamiltonian, its
//! Matsubara form, the multi-scale decomposition and kernel norms.

mod cutoff;
mod norms;
mod table;

use std::f64::consts::PI;

use nalgebra::DMatrix;
use num_complex::Complex64 as C64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{param, Error, Result};
use crate::gap::{reduced_theta, Field};
use crate::lattice::HoppingModel;
use crate::quadrature::BZGrid;

pub use cutoff::{chi, CutoffFamily};
pub use norms::{bracket_one, bracket_one_inf, coupled_norm, norm_one, norm_one_inf, prime_norm, IndexSpace};
pub use table::{fft_nd, CovarianceTable};

/// A point of `{1,2} × ℬ × Γ × [0,β)`, zero based: `ph ∈ {0,1}`, `band < b`,
/// site coordinates in `0..L`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Point {
    pub ph: usize,
    pub band: usize,
    pub site: Vec<usize>,
    pub time: f64,
}

impl Point {
    pub fn new(ph: usize, band: usize, site: Vec<usize>, time: f64) -> Self {
        Self { ph, band, site, time }
    }

    /// row/column of the `2b × 2b` block, `(ρ̄−1)b + ρ`
    pub fn block_index(&self, b: usize) -> usize {
        self.ph * b + self.band
    }
}

#[derive(Debug, Clone)]
struct KMode {
    kh: Vec<f64>,
    envelope: f64,
    /// eigenvalues of `E(φ)(k)`
    lambda: Vec<f64>,
    vecs: DMatrix<C64>,
}

/// `E(φ)(k) = [[E(k), φ̄ I], [φ I, −E(k)]]`
pub fn field_hopping(e: &DMatrix<C64>, phi: C64) -> DMatrix<C64> {
    let b = e.nrows();
    DMatrix::from_fn(2 * b, 2 * b, |i, j| match (i < b, j < b) {
        (true, true) => e[(i, j)],
        (false, false) => -e[(i - b, j - b)],
        (true, false) => if i == j - b { phi.conj() } else { C64::new(0.0, 0.0) },
        (false, true) => if i - b == j { phi } else { C64::new(0.0, 0.0) },
    })
}

/// `e^{τa}(1_{τ≥0}(1+e^{βa})^{-1} − 1_{τ<0}(1+e^{−βa})^{-1})`, `a = iθ/2 + λ`.
pub fn fermi_kernel(beta: f64, theta: f64, lambda: f64, tau: f64) -> Result<C64> {
    let a = C64::new(lambda, 0.5 * theta);
    let (num, den) = if tau >= 0.0 {
        if lambda > 0.0 {
            ((a * (tau - beta)).exp(), (-a * beta).exp() + 1.0)
        } else {
            ((a * tau).exp(), (a * beta).exp() + 1.0)
        }
    } else if lambda < 0.0 {
        (-(a * (tau + beta)).exp(), (a * beta).exp() + 1.0)
    } else {
        (-(a * tau).exp(), (-a * beta).exp() + 1.0)
    };
    if den.norm() < 1e-13 {
        return Err(Error::Singular(format!(
            "1 + e^(±β(iθ/2+λ)) vanishes at λ = {lambda}, θ = {theta}"
        )));
    }
    Ok(num / den)
}

/// Matsubara frequencies `(π/β)(2n+1)`, `n = −βh/2 … βh/2 − 1`.
pub fn matsubara_frequencies(beta: f64, h: f64) -> Result<Vec<f64>> {
    let bh = time_steps(beta, h)?;
    let half = (bh / 2) as i64;
    Ok((-half..half).map(|n| PI / beta * (2 * n + 1) as f64).collect())
}

/// `βh`, required to be a positive even integer.
pub fn time_steps(beta: f64, h: f64) -> Result<usize> {
    let bh = beta * h;
    let r = bh.round();
    if !(r >= 2.0 && (bh - r).abs() < 1e-9 * r && (r as u64) % 2 == 0) {
        return Err(param("h", h, "βh must be a positive even integer"));
    }
    Ok(r as usize)
}

/// Momentum-diagonalized `E(φ)(k)` on the lattice `Γ*` of side `L`.
#[derive(Debug, Clone)]
pub struct Covariance {
    pub model: HoppingModel,
    pub beta: f64,
    /// reduced field `θ(β)`
    pub theta: f64,
    pub phi: C64,
    pub l: usize,
    modes: Vec<KMode>,
}

impl Covariance {
    pub fn new(model: &HoppingModel, beta: f64, theta: f64, phi: C64, l: usize) -> Result<Self> {
        if !(beta > 0.0 && beta.is_finite()) {
            return Err(param("beta", beta, "must be positive"));
        }
        if l == 0 {
            return Err(param("L", 0.0, "must be positive"));
        }
        let grid = BZGrid::lattice(&model.basis, l);
        let d = model.dim();
        let modes = (0..grid.len())
            .map(|idx| {
                let mut kh = vec![0.0; d];
                grid.reduced_node(idx, &mut kh);
                let e = model.hopping_reduced(&kh);
                let m = field_hopping(&e, phi);
                let m = (&m + m.adjoint()).scale(0.5);
                let eig = m.symmetric_eigen();
                KMode {
                    envelope: model.envelope_reduced(&kh),
                    kh,
                    lambda: eig.eigenvalues.iter().copied().collect(),
                    vecs: eig.eigenvectors,
                }
            })
            .collect();
        Ok(Self {
            model: model.clone(),
            beta,
            theta: reduced_theta(beta, theta),
            phi,
            l,
            modes,
        })
    }

    pub fn bands(&self) -> usize {
        self.model.bands
    }

    pub fn volume(&self) -> usize {
        self.modes.len()
    }

    pub fn field(&self) -> Field {
        Field::from_theta(self.beta, self.theta)
    }

    /// `π/β − θ(β)/2`
    pub fn distance(&self) -> f64 {
        PI / self.beta - 0.5 * self.theta
    }

    fn check_point(&self, p: &Point) -> Result<()> {
        if p.ph > 1 || p.band >= self.bands() || p.site.len() != self.model.dim() || p.site.iter().any(|&x| x >= self.l) {
            return Err(Error::Domain(format!("index {p:?} outside the lattice")));
        }
        if !(0.0..self.beta).contains(&p.time) {
            return Err(param("time", p.time, "must lie in [0, β)"));
        }
        Ok(())
    }

    fn phase(kh: &[f64], x: &Point, y: &Point) -> C64 {
        let arg: f64 = kh
            .iter()
            .zip(x.site.iter().zip(&y.site))
            .map(|(k, (&a, &b))| k * (a as f64 - b as f64))
            .sum();
        C64::new(arg.cos(), arg.sin())
    }

    /// `C(φ)(X, Y)` with continuous times.
    pub fn continuum(&self, x: &Point, y: &Point) -> Result<C64> {
        self.check_point(x)?;
        self.check_point(y)?;
        let b = self.bands();
        let (i, j) = (x.block_index(b), y.block_index(b));
        let tau = x.time - y.time;
        let mut acc = C64::new(0.0, 0.0);
        for m in &self.modes {
            let mut s = C64::new(0.0, 0.0);
            for (n, &lam) in m.lambda.iter().enumerate() {
                s += m.vecs[(i, n)] * m.vecs[(j, n)].conj() * fermi_kernel(self.beta, self.theta, lam, tau)?;
            }
            acc += Self::phase(&m.kh, x, y) * s;
        }
        Ok(acc / self.volume() as f64)
    }

    /// `(1/β) Σ_ω e^{iωτ} h^{-1}(1 − e^{(−iω + iθ/2 + λ)/h})^{-1}` per eigenvalue,
    /// with an optional cutoff weight depending on `(ω, e(k))`.
    fn matsubara_generic<W>(&self, x: &Point, y: &Point, h: f64, shift: bool, weight: W) -> Result<C64>
    where
        W: Fn(f64, f64) -> f64,
    {
        self.check_point(x)?;
        self.check_point(y)?;
        let freqs = matsubara_frequencies(self.beta, h)?;
        for p in [x, y] {
            let m = p.time * h;
            if (m - m.round()).abs() > 1e-9 {
                return Err(param("time", p.time, "must be a multiple of 1/h"));
            }
        }
        let b = self.bands();
        let (i, j) = (x.block_index(b), y.block_index(b));
        let tau = (x.time * h).round() / h - (y.time * h).round() / h;
        let mut acc = C64::new(0.0, 0.0);
        for m in &self.modes {
            let mut s = C64::new(0.0, 0.0);
            for &w in &freqs {
                let wt = weight(w, m.envelope);
                if wt == 0.0 {
                    continue;
                }
                let ph = if shift { (w - PI / self.beta) * tau } else { w * tau };
                let mut g = C64::new(0.0, 0.0);
                for (n, &lam) in m.lambda.iter().enumerate() {
                    let z = (C64::new(lam, 0.5 * self.theta - w) / h).exp();
                    let den = (C64::new(1.0, 0.0) - z) * h;
                    if den.norm() < 1e-300 {
                        return Err(Error::Singular(format!("1 − e^(…) vanishes at ω = {w}, λ = {lam}")));
                    }
                    g += m.vecs[(i, n)] * m.vecs[(j, n)].conj() / den;
                }
                s += C64::new(ph.cos(), ph.sin()) * g * wt;
            }
            acc += Self::phase(&m.kh, x, y) * s;
        }
        Ok(acc / (self.beta * self.volume() as f64))
    }

    /// Time-discretized form; times must lie in `[0,β)_h`.
    pub fn matsubara(&self, x: &Point, y: &Point, h: f64) -> Result<C64> {
        self.matsubara_generic(x, y, h, false, |_, _| 1.0)
    }

    /// `C_l(X, Y)`
    pub fn scale(&self, fam: &CutoffFamily, l: i32, x: &Point, y: &Point) -> Result<C64> {
        fam.check_scale(l)?;
        self.check_family(fam)?;
        self.matsubara_generic(x, y, fam.h, true, |w, e| fam.chi_l(l, w, e))
    }

    fn check_family(&self, fam: &CutoffFamily) -> Result<()> {
        if (fam.beta - self.beta).abs() > 1e-12 * self.beta {
            return Err(param("beta", fam.beta, "cutoff family built for another β"));
        }
        Ok(())
    }

    /// `max |Σ_l C_l(X,Y) − e^{−iπ(s−t)/β} C(φ)(X,Y)|` over the given pairs.
    pub fn scale_sum_residual(&self, fam: &CutoffFamily, pairs: &[(Point, Point)]) -> Result<f64> {
        let mut worst: f64 = 0.0;
        for (x, y) in pairs {
            let mut sum = C64::new(0.0, 0.0);
            for l in fam.n_beta..=fam.n_h {
                sum += self.scale(fam, l, x, y)?;
            }
            let tau = x.time - y.time;
            let a = -PI / self.beta * tau;
            let full = self.continuum(x, y)? * C64::new(a.cos(), a.sin());
            worst = worst.max((sum - full).norm());
        }
        Ok(worst)
    }

    /// Equal-time entries from the closed forms in terms of `E(k)` alone
    /// (no diagonalization of the `2b × 2b` block).
    pub fn equal_time_closed_form(&self, x: &Point, y: &Point) -> Result<C64> {
        self.check_point(x)?;
        self.check_point(y)?;
        let field = self.field();
        let w = 0.5 * self.beta * self.theta;
        let p2 = self.phi.norm_sqr();
        let mut acc = C64::new(0.0, 0.0);
        for m in &self.modes {
            let sp = self.model.spectral_reduced(&m.kh)?;
            let mut s = C64::new(0.0, 0.0);
            for (n, &e) in sp.eigenvalues.iter().enumerate() {
                let r = (e * e + p2).sqrt();
                let proj = sp.unitary[(x.band, n)] * sp.unitary[(y.band, n)].conj();
                let k = field.kernel(r);
                let v = if x.ph == y.ph {
                    let occ = occupation_ratio(self.beta * r, w, field.opc);
                    let sign = if x.ph == 0 { -1.0 } else { 1.0 };
                    occ + sign * k * e
                } else {
                    let f = if x.ph == 0 { self.phi.conj() } else { self.phi };
                    -f * k
                };
                s += proj * v;
            }
            acc += Self::phase(&m.kh, x, y) * s;
        }
        Ok(acc * 0.5 / self.volume() as f64)
    }

    /// Largest deviation of the spectrum of `E(φ)(k)` from `±√(e_j² + |φ|²)`.
    pub fn spectrum_pairing_deviation(&self) -> Result<f64> {
        let mut worst: f64 = 0.0;
        for m in &self.modes {
            let sp = self.model.spectral_reduced(&m.kh)?;
            let mut want: Vec<f64> = sp
                .eigenvalues
                .iter()
                .flat_map(|e| {
                    let r = (e * e + self.phi.norm_sqr()).sqrt();
                    [r, -r]
                })
                .collect();
            want.sort_by(f64::total_cmp);
            let mut got = m.lambda.clone();
            got.sort_by(f64::total_cmp);
            for (a, b) in want.iter().zip(&got) {
                worst = worst.max((a - b).abs());
            }
        }
        Ok(worst)
    }

    /// `2⁴ b² (1 + (π/β)|θ(β)/2 − π/β|^{-1})`
    pub fn determinant_constant(&self) -> f64 {
        let b = self.bands() as f64;
        16.0 * b * b * (1.0 + PI / self.beta / self.distance().abs())
    }

    /// The sharper, `φ`-dependent form of the same bound: the `L^{-d}` sum of
    /// `Tr(1 + 2cos(βθ/2)e^{−βS} + e^{−2βS})^{−1/2}` times `2⁴ b`.
    pub fn determinant_constant_sharp(&self) -> Result<f64> {
        let b = self.bands() as f64;
        let field = self.field();
        let mut acc = 0.0;
        for m in &self.modes {
            let sp = self.model.spectral_reduced(&m.kh)?;
            for &e in &sp.eigenvalues {
                let q = (-self.beta * (e * e + self.phi.norm_sqr()).sqrt()).exp();
                // 1 + 2cq + q² = (1−q)² + 2(1+c)q
                let v = (1.0 - q).powi(2) + 2.0 * field.opc * q;
                acc += 1.0 / v.sqrt();
            }
        }
        Ok(16.0 * b * acc / self.volume() as f64)
    }

    /// Randomized Gram-type minors `det(<u_i, v_j> C(X_i, Y_j))` against `D^n`.
    pub fn determinant_bound_check(&self, n_trials: usize, n_max: usize, seed: u64) -> Result<DeterminantReport> {
        if n_max == 0 {
            return Err(param("n_max", 0.0, "must be positive"));
        }
        let dim = 4;
        let bound = self.determinant_constant();
        let sharp = self.determinant_constant_sharp()?;
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut report = DeterminantReport {
            bound,
            sharp_bound: sharp,
            trials: n_trials,
            max_ratio: 0.0,
            max_ratio_sharp: 0.0,
            violations: 0,
        };
        let d = self.model.dim();
        let b = self.bands();
        let point = |rng: &mut ChaCha8Rng| {
            Point::new(
                rng.gen_range(0..2),
                rng.gen_range(0..b),
                (0..d).map(|_| rng.gen_range(0..self.l)).collect(),
                rng.gen_range(0.0..self.beta),
            )
        };
        let unit = |rng: &mut ChaCha8Rng| {
            let v: Vec<C64> = (0..dim).map(|_| C64::new(rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0))).collect();
            let nrm = v.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt();
            let r: f64 = rng.gen_range(0.0..=1.0);
            v.into_iter().map(|z| z * (r / nrm)).collect::<Vec<_>>()
        };
        for _ in 0..n_trials {
            let n = rng.gen_range(1..=n_max);
            let xs: Vec<Point> = (0..n).map(|_| point(&mut rng)).collect();
            let ys: Vec<Point> = (0..n).map(|_| point(&mut rng)).collect();
            let us: Vec<Vec<C64>> = (0..n).map(|_| unit(&mut rng)).collect();
            let vs: Vec<Vec<C64>> = (0..n).map(|_| unit(&mut rng)).collect();
            let mut m = DMatrix::<C64>::zeros(n, n);
            for i in 0..n {
                for j in 0..n {
                    let ip: C64 = us[i].iter().zip(&vs[j]).map(|(a, b)| a.conj() * b).sum();
                    m[(i, j)] = ip * self.continuum(&xs[i], &ys[j])?;
                }
            }
            let det = m.determinant().norm();
            let ratio = det / bound.powi(n as i32);
            let ratio_sharp = det / sharp.powi(n as i32);
            report.max_ratio = report.max_ratio.max(ratio);
            report.max_ratio_sharp = report.max_ratio_sharp.max(ratio_sharp);
            if ratio > 1.0 {
                report.violations += 1;
            }
        }
        Ok(report)
    }

    /// Table of `C(φ)` over `[0,β)_h` difference classes, built by FFT.
    pub fn table(&self, h: f64) -> Result<CovarianceTable> {
        CovarianceTable::build(self, h, None)
    }

    /// Table of `C_l`.
    pub fn scale_table(&self, fam: &CutoffFamily, l: i32) -> Result<CovarianceTable> {
        fam.check_scale(l)?;
        self.check_family(fam)?;
        CovarianceTable::build(self, fam.h, Some((fam, l)))
    }

    /// `‖C̃_l‖_{1,∞}`: half the largest row or column sum of `|C_l|` over
    /// `{1,2} × ℬ × Γ × [0,β)_h`, divided by `h`. Streams one block pair at a
    /// time so that large lattices fit in memory.
    pub fn scale_norm_one_inf(&self, fam: &CutoffFamily, l: i32) -> Result<f64> {
        fam.check_scale(l)?;
        self.check_family(fam)?;
        let n = 2 * self.bands();
        let mut rows = vec![0.0; n];
        let mut cols = vec![0.0; n];
        for i in 0..n {
            for j in 0..n {
                let block = table::block_values(self, fam.h, Some((fam, l)), i, j)?;
                let s: f64 = block.iter().map(|z| z.norm()).sum();
                rows[i] += s;
                cols[j] += s;
            }
        }
        let mx = rows.iter().chain(&cols).copied().fold(0.0, f64::max);
        Ok(0.5 * mx / fam.h)
    }
}

/// `(e^{−iw} + cosh x)/(cos w + cosh x)`, written as `1 − i sin w/(cos w + cosh x)`.
fn occupation_ratio(x: f64, w: f64, opc: f64) -> C64 {
    let den = opc + 2.0 * (0.5 * x).sinh().powi(2);
    C64::new(1.0, -w.sin() / den)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DeterminantReport {
    pub bound: f64,
    pub sharp_bound: f64,
    pub trials: usize,
    pub max_ratio: f64,
    pub max_ratio_sharp: f64,
    pub violations: usize,
}

/// Least-squares slope of `log_M y` against `l`.
pub fn decay_slope(m: f64, rows: &[(i32, f64)]) -> f64 {
    let n = rows.len() as f64;
    let xs: Vec<f64> = rows.iter().map(|r| r.0 as f64).collect();
    let ys: Vec<f64> = rows.iter().map(|r| r.1.ln() / m.ln()).collect();
    let mx = xs.iter().sum::<f64>() / n;
    let my = ys.iter().sum::<f64>() / n;
    let sxy: f64 = xs.iter().zip(&ys).map(|(x, y)| (x - mx) * (y - my)).sum();
    let sxx: f64 = xs.iter().map(|x| (x - mx).powi(2)).sum();
    sxy / sxx
}

#[cfg(test)]
mod tests {
    use super::*;

    fn chain(eps: f64) -> HoppingModel {
        HoppingModel::flat_band(eps, 1)
    }

    #[test]
    fn fermi_factor_at_zero_field() {
        let cov = Covariance::new(&chain(0.7), 1.3, 0.0, C64::new(0.0, 0.0), 1).unwrap();
        let p = Point::new(0, 0, vec![0], 0.0);
        let v = cov.continuum(&p, &p).unwrap();
        assert!((v.re - 1.0 / (1.0 + (1.3f64 * 0.7).exp())).abs() < 1e-14 && v.im.abs() < 1e-15);
    }

    #[test]
    fn scalar_reduction() {
        let (beta, theta, eps) = (1.1, 0.9, -0.4);
        let cov = Covariance::new(&chain(eps), beta, theta, C64::new(0.0, 0.0), 1).unwrap();
        let p = Point::new(0, 0, vec![0], 0.0);
        let w = 0.5f64 * beta * theta;
        let x = beta * eps;
        let want = (C64::new(w.cos(), -w.sin()) + x.cosh() - x.sinh()) / (2.0 * (w.cos() + x.cosh()));
        assert!((cov.continuum(&p, &p).unwrap() - want).norm() < 1e-14);
    }

    #[test]
    fn singular_at_inadmissible_field() {
        let beta = 2.0;
        let cov = Covariance::new(&chain(0.0), beta, PI, C64::new(0.0, 0.0), 1).unwrap();
        let p = Point::new(0, 0, vec![0], 0.0);
        assert!(matches!(cov.continuum(&p, &p), Err(Error::Singular(_))));
    }

    #[test]
    fn kms_sign_flip() {
        for &lam in &[0.37, -2.0, 40.0, -40.0] {
            let k1 = fermi_kernel(1.5, 0.8, lam, -0.7).unwrap();
            let k2 = fermi_kernel(1.5, 0.8, lam, 0.8).unwrap();
            assert!((k1 + k2).norm() < 1e-14 * (1.0 + k1.norm()), "{lam}");
        }
    }

    fn site(i: usize, l: usize, d: usize) -> Vec<usize> {
        (0..d).map(|a| (i / l.pow(a as u32)) % l).collect()
    }

    fn all_points(cov: &Covariance, h: f64) -> Vec<Point> {
        let bh = time_steps(cov.beta, h).unwrap();
        let d = cov.model.dim();
        let mut v = Vec::new();
        for ph in 0..2 {
            for band in 0..cov.bands() {
                for s in 0..cov.l.pow(d as u32) {
                    for m in 0..bh {
                        v.push(Point::new(ph, band, site(s, cov.l, d), m as f64 / h));
                    }
                }
            }
        }
        v
    }

    #[test]
    fn matsubara_equals_continuum() {
        let model = HoppingModel::chain(1.0, 0.3, 1);
        let beta = 1.0;
        let h = 16.0;
        let cov = Covariance::new(&model, beta, 1.3, C64::new(0.4, 0.25), 2).unwrap();
        let pts = all_points(&cov, h);
        let mut worst: f64 = 0.0;
        for x in pts.iter().step_by(3) {
            for y in pts.iter().step_by(5) {
                let a = cov.matsubara(x, y, h).unwrap();
                let b = cov.continuum(x, y).unwrap();
                worst = worst.max((a - b).norm());
            }
        }
        assert!(worst < 1e-9, "{worst}");
    }

    #[test]
    fn table_matches_direct_sums() {
        let model = builtin_model_honeycomb();
        let (beta, h) = (1.0, 4.0);
        let cov = Covariance::new(&model, beta, 0.6, C64::new(0.3, 0.1), 2).unwrap();
        let tab = cov.table(h).unwrap();
        let fam = CutoffFamily::new(2.0, h, beta).unwrap();
        let l = fam.n_beta + 1;
        let stab = cov.scale_table(&fam, l).unwrap();
        let pts = all_points(&cov, h);
        let mut worst: f64 = 0.0;
        for x in pts.iter().step_by(7) {
            for y in pts.iter().step_by(3) {
                worst = worst.max((tab.get(x, y).unwrap() - cov.matsubara(x, y, h).unwrap()).norm());
                worst = worst.max((stab.get(x, y).unwrap() - cov.scale(&fam, l, x, y).unwrap()).norm());
            }
        }
        assert!(worst < 1e-12, "{worst}");
    }

    fn builtin_model_honeycomb() -> HoppingModel {
        crate::lattice::builtin_model("honeycomb", &[]).unwrap()
    }

    #[test]
    fn equal_time_closed_forms() {
        for (model, l) in [(HoppingModel::chain(1.0, 0.3, 1), 3), (builtin_model_honeycomb(), 2)] {
            for phi in [C64::new(0.0, 0.0), C64::new(0.7, -0.4)] {
                let cov = Covariance::new(&model, 1.7, 0.9, phi, l).unwrap();
                let pts: Vec<Point> = all_points(&cov, 2.0 / 1.7).into_iter().filter(|p| p.time == 0.0).collect();
                for x in &pts {
                    for y in &pts {
                        let a = cov.continuum(x, y).unwrap();
                        let b = cov.equal_time_closed_form(x, y).unwrap();
                        assert!((a - b).norm() < 1e-12, "{x:?} {y:?} {a} {b}");
                    }
                }
                assert!(cov.spectrum_pairing_deviation().unwrap() < 1e-10);
            }
        }
    }

    #[test]
    fn scale_sum_identity_and_time_independence() {
        let model = HoppingModel::chain(1.0, 0.3, 1);
        let (beta, h) = (1.0, 16.0);
        let cov = Covariance::new(&model, beta, 1.0, C64::new(0.3, 0.0), 2).unwrap();
        let fam = CutoffFamily::new(2.0, h, beta).unwrap();
        let pts = all_points(&cov, h);
        let pairs: Vec<(Point, Point)> = pts
            .iter()
            .step_by(5)
            .flat_map(|x| pts.iter().step_by(11).map(move |y| (x.clone(), y.clone())))
            .collect();
        assert!(cov.scale_sum_residual(&fam, &pairs).unwrap() < 1e-10);
        let t = cov.scale_table(&fam, fam.n_beta).unwrap();
        for x in pts.iter().step_by(3) {
            for y in pts.iter().step_by(4) {
                let x0 = Point { time: 0.0, ..x.clone() };
                let y0 = Point { time: 0.0, ..y.clone() };
                assert!((t.get(x, y).unwrap() - t.get(&x0, &y0).unwrap()).norm() < 1e-12);
            }
        }
    }

    #[test]
    fn streamed_norm_matches_generic() {
        let model = HoppingModel::chain(1.0, 0.3, 1);
        let (beta, h) = (2.0, 2.0);
        let cov = Covariance::new(&model, beta, 0.4, C64::new(0.2, 0.0), 2).unwrap();
        let fam = CutoffFamily::new(2.0, h, beta).unwrap();
        let sp = IndexSpace::new(1, 2, beta, h).unwrap();
        let n = sp.len();
        for l in fam.scales() {
            let t = cov.scale_table(&fam, l).unwrap();
            let mut g = vec![C64::new(0.0, 0.0); n * n];
            for a in 0..n {
                for b in 0..n {
                    let (p1, b1, s1, m1, x1) = sp.decode(a);
                    let (p2, b2, s2, m2, x2) = sp.decode(b);
                    let pa = Point::new(p1, b1, vec![s1], m1 as f64 / h);
                    let pb = Point::new(p2, b2, vec![s2], m2 as f64 / h);
                    g[a * n + b] = match (x1, x2) {
                        (1, -1) => t.get(&pa, &pb).unwrap() * 0.5,
                        (-1, 1) => -t.get(&pb, &pa).unwrap() * 0.5,
                        _ => C64::new(0.0, 0.0),
                    };
                }
            }
            let generic = norm_one_inf(&g, 2, &sp).unwrap();
            let fast = cov.scale_norm_one_inf(&fam, l).unwrap();
            assert!((generic - fast).abs() < 1e-12 * (1.0 + fast), "{l}: {generic} {fast}");
        }
    }

    #[test]
    fn frequency_count() {
        assert_eq!(matsubara_frequencies(1.5, 16.0 / 1.5 * 2.0).unwrap().len(), 32);
        assert!(matsubara_frequencies(1.0, 3.0).is_err());
    }
}
