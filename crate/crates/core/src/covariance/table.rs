use std::f64::consts::PI;
use std::fmt::Write as _;

use num_complex::Complex64 as C64;
use rustfft::FftPlanner;

use super::{matsubara_frequencies, time_steps, Covariance, CutoffFamily, Point};
use crate::error::{Error, Result};

/// In-place multidimensional DFT; `dims[0]` varies fastest. Unnormalized,
/// `e^{+2πi…}` when `inverse`.
pub fn fft_nd(data: &mut [C64], dims: &[usize], inverse: bool) {
    let total: usize = dims.iter().product();
    assert_eq!(total, data.len());
    let mut planner = FftPlanner::<f64>::new();
    let mut stride = 1;
    for &n in dims {
        let fft = if inverse { planner.plan_fft_inverse(n) } else { planner.plan_fft_forward(n) };
        let mut buf = vec![C64::new(0.0, 0.0); n];
        let outer = total / (stride * n);
        for hi in 0..outer {
            for lo in 0..stride {
                let base = lo + hi * stride * n;
                for (t, b) in buf.iter_mut().enumerate() {
                    *b = data[base + t * stride];
                }
                fft.process(&mut buf);
                for (t, b) in buf.iter().enumerate() {
                    data[base + t * stride] = *b;
                }
            }
        }
        stride *= n;
    }
}

/// Values of block `(i, j)` at every `(Δx, τ = m/h)` with `0 ≤ m < βh`,
/// laid out as `m + βh·(Δx₀ + L·Δx₁ + …)`.
pub(super) fn block_values(
    cov: &Covariance,
    h: f64,
    cut: Option<(&CutoffFamily, i32)>,
    i: usize,
    j: usize,
) -> Result<Vec<C64>> {
    let bh = time_steps(cov.beta, h)?;
    let freqs = matsubara_frequencies(cov.beta, h)?;
    let nk = cov.volume();
    let mut data = vec![C64::new(0.0, 0.0); bh * nk];
    for (kidx, m) in cov.modes.iter().enumerate() {
        let w: Vec<C64> = (0..m.lambda.len()).map(|n| m.vecs[(i, n)] * m.vecs[(j, n)].conj()).collect();
        for (fi, &om) in freqs.iter().enumerate() {
            let wt = match cut {
                Some((fam, l)) => fam.chi_l(l, om, m.envelope),
                None => 1.0,
            };
            if wt == 0.0 {
                continue;
            }
            let mut g = C64::new(0.0, 0.0);
            for (n, &lam) in m.lambda.iter().enumerate() {
                let z = (C64::new(lam, 0.5 * cov.theta - om) / h).exp();
                let den = (C64::new(1.0, 0.0) - z) * h;
                if den.norm() < 1e-300 {
                    return Err(Error::Singular(format!("1 − e^(…) vanishes at ω = {om}, λ = {lam}")));
                }
                g += w[n] / den;
            }
            // frequency index n ↦ n mod βh
            let p = (fi + bh / 2) % bh;
            data[p + bh * kidx] = g * wt;
        }
    }
    let mut dims = vec![bh];
    dims.extend(std::iter::repeat(cov.l).take(cov.model.dim()));
    fft_nd(&mut data, &dims, true);
    let norm = 1.0 / (cov.beta * nk as f64);
    let shifted = cut.is_some();
    for (idx, v) in data.iter_mut().enumerate() {
        let mt = (idx % bh) as f64;
        let f = if shifted {
            C64::new(norm, 0.0)
        } else {
            let a = PI * mt / bh as f64;
            C64::new(a.cos(), a.sin()) * norm
        };
        *v *= f;
    }
    Ok(data)
}

/// A covariance on `I₀²` stored by difference class `(i, j, Δx, τ)`.
#[derive(Debug, Clone)]
pub struct CovarianceTable {
    pub bands: usize,
    pub l: usize,
    pub d: usize,
    pub bh: usize,
    pub h: f64,
    pub beta: f64,
    /// β-periodic in time (scale covariances) rather than antiperiodic
    pub periodic: bool,
    blocks: Vec<Vec<C64>>,
}

impl CovarianceTable {
    pub(super) fn build(cov: &Covariance, h: f64, cut: Option<(&CutoffFamily, i32)>) -> Result<Self> {
        let bh = time_steps(cov.beta, h)?;
        let n = 2 * cov.bands();
        let need = n * n * bh * cov.volume();
        const LIMIT: usize = 1 << 24;
        if need > LIMIT {
            return Err(Error::Budget {
                what: "covariance table entries",
                needed: need,
                limit: LIMIT,
            });
        }
        let mut blocks = Vec::with_capacity(n * n);
        for i in 0..n {
            for j in 0..n {
                blocks.push(block_values(cov, h, cut, i, j)?);
            }
        }
        Ok(Self {
            bands: cov.bands(),
            l: cov.l,
            d: cov.model.dim(),
            bh,
            h,
            beta: cov.beta,
            periodic: cut.is_some(),
            blocks,
        })
    }

    fn step(&self, t: f64) -> Result<usize> {
        let m = t * self.h;
        let r = m.round();
        if (m - r).abs() > 1e-9 || r < 0.0 || r as usize >= self.bh {
            return Err(Error::Domain(format!("time {t} not on [0,β)_h")));
        }
        Ok(r as usize)
    }

    /// Entry at a pair of discrete-time points.
    pub fn get(&self, x: &Point, y: &Point) -> Result<C64> {
        let (mx, my) = (self.step(x.time)?, self.step(y.time)?);
        let (mut tau, mut sign) = (mx as i64 - my as i64, 1.0);
        if tau < 0 {
            tau += self.bh as i64;
            if !self.periodic {
                sign = -1.0;
            }
        }
        let mut q = 0;
        for a in (0..self.d).rev() {
            let dx = (x.site[a] as i64 - y.site[a] as i64).rem_euclid(self.l as i64) as usize;
            q = q * self.l + dx;
        }
        let n = 2 * self.bands;
        let blk = &self.blocks[x.block_index(self.bands) * n + y.block_index(self.bands)];
        Ok(blk[tau as usize + self.bh * q] * sign)
    }

    /// `((ρ̄,ρ),(η̄,η),Δx,Δs)` rows with 17 significant digits.
    pub fn to_csv(&self) -> String {
        let n = 2 * self.bands;
        let mut out = String::from("ph_x,band_x,ph_y,band_y,dx,ds,re,im\n");
        for i in 0..n {
            for j in 0..n {
                let blk = &self.blocks[i * n + j];
                for (idx, v) in blk.iter().enumerate() {
                    let m = idx % self.bh;
                    let mut q = idx / self.bh;
                    let mut dx = Vec::with_capacity(self.d);
                    for _ in 0..self.d {
                        dx.push((q % self.l).to_string());
                        q /= self.l;
                    }
                    let _ = writeln!(
                        out,
                        "{},{},{},{},{},{:.16e},{:.16e},{:.16e}",
                        i / self.bands + 1,
                        i % self.bands,
                        j / self.bands + 1,
                        j % self.bands,
                        dx.join(" "),
                        m as f64 / self.h,
                        v.re,
                        v.im
                    );
                }
            }
        }
        out
    }
}
