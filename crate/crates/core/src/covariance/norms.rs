use num_complex::Complex64 as C64;
use serde::{Deserialize, Serialize};

use crate::error::{param, Error, Result};

/// The index set `I = {1,2} × ℬ × Γ × [0,β)_h × {1,−1}`, flattened as
/// `ξ + 2(m + βh(site + L^d(band + b·ph)))` with `ξ = 0` for `+1`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct IndexSpace {
    pub bands: usize,
    pub sites: usize,
    pub bh: usize,
    pub h: f64,
    pub beta: f64,
}

const MAX_AXIS: usize = 2048;
const MAX_TABLE: usize = 1 << 26;

impl IndexSpace {
    pub fn new(bands: usize, sites: usize, beta: f64, h: f64) -> Result<Self> {
        let bh = super::time_steps(beta, h)?;
        let s = Self { bands, sites, bh, h, beta };
        if s.len() > MAX_AXIS {
            return Err(Error::Budget {
                what: "kernel index set",
                needed: s.len(),
                limit: MAX_AXIS,
            });
        }
        Ok(s)
    }

    pub fn len(&self) -> usize {
        4 * self.bands * self.sites * self.bh
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn encode(&self, ph: usize, band: usize, site: usize, m: usize, xi: i8) -> usize {
        let x = if xi > 0 { 0 } else { 1 };
        x + 2 * (m + self.bh * (site + self.sites * (band + self.bands * ph)))
    }

    /// `(ph, band, site, m, ξ)`
    pub fn decode(&self, idx: usize) -> (usize, usize, usize, usize, i8) {
        let xi = if idx % 2 == 0 { 1 } else { -1 };
        let mut r = idx / 2;
        let m = r % self.bh;
        r /= self.bh;
        let site = r % self.sites;
        r /= self.sites;
        (r / self.bands, r % self.bands, site, m, xi)
    }

    /// `X + s` with the time wrapped into `[0,β)_h`
    pub fn shift(&self, idx: usize, s: usize) -> usize {
        let (ph, band, site, m, xi) = self.decode(idx);
        self.encode(ph, band, site, (m + s) % self.bh, xi)
    }

    fn check(&self, f: &[C64], arity: usize) -> Result<()> {
        let n = self.len();
        let need = (0..arity).try_fold(1usize, |a, _| a.checked_mul(n)).unwrap_or(usize::MAX);
        if need > MAX_TABLE {
            return Err(Error::Budget {
                what: "kernel table",
                needed: need,
                limit: MAX_TABLE,
            });
        }
        if f.len() != need {
            return Err(param("kernel", f.len() as f64, format!("expected {need} entries")));
        }
        Ok(())
    }
}

fn components(mut idx: usize, n: usize, arity: usize, out: &mut [usize]) {
    for a in (0..arity).rev() {
        out[a] = idx % n;
        idx /= n;
    }
}

/// `sup_j sup_{X₀} h^{-(n−1)} Σ |f(…, X₀ at slot j, …)|`
pub fn norm_one_inf(f: &[C64], arity: usize, sp: &IndexSpace) -> Result<f64> {
    if arity == 0 {
        return Ok(f.first().map_or(0.0, |z| z.norm()));
    }
    sp.check(f, arity)?;
    let n = sp.len();
    let mut marg = vec![vec![0.0; n]; arity];
    let mut comp = vec![0; arity];
    for (idx, v) in f.iter().enumerate() {
        let a = v.norm();
        if a == 0.0 {
            continue;
        }
        components(idx, n, arity, &mut comp);
        for (j, &c) in comp.iter().enumerate() {
            marg[j][c] += a;
        }
    }
    let mx = marg.iter().flatten().copied().fold(0.0, f64::max);
    Ok(mx * sp.h.powi(1 - arity as i32))
}

/// `h^{-n} Σ |f|`
pub fn norm_one(f: &[C64], arity: usize, sp: &IndexSpace) -> Result<f64> {
    if arity == 0 {
        return Ok(f.first().map_or(0.0, |z| z.norm()));
    }
    sp.check(f, arity)?;
    Ok(f.iter().map(|z| z.norm()).sum::<f64>() * sp.h.powi(-(arity as i32)))
}

/// `sup_{X₀, s} Σ_{X ∈ I⁰} |g(X₀, X + s)|`
pub fn prime_norm(g: &[C64], sp: &IndexSpace) -> Result<f64> {
    sp.check(g, 2)?;
    let n = sp.len();
    let zero: Vec<usize> = (0..n).filter(|&i| sp.decode(i).3 == 0).collect();
    let mut best: f64 = 0.0;
    for x0 in 0..n {
        for s in 0..sp.bh {
            let v: f64 = zero.iter().map(|&x| g[x0 * n + sp.shift(x, s)].norm()).sum();
            best = best.max(v);
        }
    }
    Ok(best)
}

/// `‖g‖ = ‖g‖' + (1 + β^{-1})‖g‖_{1,∞}`
pub fn coupled_norm(g: &[C64], sp: &IndexSpace) -> Result<f64> {
    Ok(prime_norm(g, sp)? + (1.0 + 1.0 / sp.beta) * norm_one_inf(g, 2, sp)?)
}

/// For each `X ∈ I^m`, `sup_{Y₀,k} h^{-n} Σ_Y |f(X,Y)||g(Y₀,Y_k)|`; `f`
/// is `X`-major. With `swap` the roles of the two tuples exchange.
fn inner_sup(f: &[C64], m: usize, n: usize, g: &[C64], sp: &IndexSpace, swap: bool) -> Vec<f64> {
    let big = sp.len();
    let (outer, inner) = if swap { (n, m) } else { (m, n) };
    let no = big.pow(outer as u32);
    let ni = big.pow(inner as u32);
    let mut comp = vec![0; inner];
    let mut res = vec![0.0; no];
    let mut marg = vec![vec![0.0; big]; inner];
    for (o, r) in res.iter_mut().enumerate() {
        for row in marg.iter_mut() {
            row.iter_mut().for_each(|v| *v = 0.0);
        }
        for i in 0..ni {
            let idx = if swap { i * no + o } else { o * ni + i };
            let a = f[idx].norm();
            if a == 0.0 {
                continue;
            }
            components(i, big, inner, &mut comp);
            for (k, &c) in comp.iter().enumerate() {
                marg[k][c] += a;
            }
        }
        let mut best: f64 = 0.0;
        for mk in &marg {
            for y0 in 0..big {
                let s: f64 = (0..big).map(|y| mk[y] * g[y0 * big + y].norm()).sum();
                best = best.max(s);
            }
        }
        *r = best * sp.h.powi(-(inner as i32));
    }
    res
}

/// `[f, g]_{1,∞}` for `f` on `I^m × I^n` (`X`-major) and `g` on `I²`.
pub fn bracket_one_inf(f: &[C64], m: usize, n: usize, g: &[C64], sp: &IndexSpace) -> Result<f64> {
    sp.check(f, m + n)?;
    sp.check(g, 2)?;
    let big = sp.len();
    let mut best: f64 = 0.0;
    for (swap, outer) in [(false, m), (true, n)] {
        let inner = inner_sup(f, m, n, g, sp, swap);
        let mut marg = vec![vec![0.0; big]; outer];
        let mut comp = vec![0; outer];
        for (o, v) in inner.iter().enumerate() {
            components(o, big, outer, &mut comp);
            for (j, &c) in comp.iter().enumerate() {
                marg[j][c] += v;
            }
        }
        let mx = marg.iter().flatten().copied().fold(0.0, f64::max);
        best = best.max(mx * sp.h.powi(1 - outer as i32));
    }
    Ok(best)
}

/// `[f, g]_1 = sup_{j,k} h^{-(m+n)} Σ |f(X,Y)||g(X_j,Y_k)|`
pub fn bracket_one(f: &[C64], m: usize, n: usize, g: &[C64], sp: &IndexSpace) -> Result<f64> {
    sp.check(f, m + n)?;
    sp.check(g, 2)?;
    let big = sp.len();
    let mut comp = vec![0; m + n];
    let mut sums = vec![0.0; m * n];
    for (idx, v) in f.iter().enumerate() {
        let a = v.norm();
        if a == 0.0 {
            continue;
        }
        components(idx, big, m + n, &mut comp);
        for j in 0..m {
            for k in 0..n {
                sums[j * n + k] += a * g[comp[j] * big + comp[m + k]].norm();
            }
        }
    }
    Ok(sums.iter().copied().fold(0.0, f64::max) * sp.h.powi(-((m + n) as i32)))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn delta_kernel() {
        let sp = IndexSpace::new(1, 2, 1.0, 2.0).unwrap();
        let n = sp.len();
        let mut f = vec![C64::new(0.0, 0.0); n * n];
        for i in 0..n {
            f[i * n + i] = C64::new(sp.h, 0.0);
        }
        assert!((norm_one_inf(&f, 2, &sp).unwrap() - 1.0).abs() < 1e-15);
        assert!((norm_one(&f, 2, &sp).unwrap() - n as f64 / sp.h).abs() < 1e-12);
    }

    #[test]
    fn encode_roundtrip() {
        let sp = IndexSpace::new(2, 3, 2.0, 2.0).unwrap();
        for i in 0..sp.len() {
            let (a, b, c, d, e) = sp.decode(i);
            assert_eq!(sp.encode(a, b, c, d, e), i);
        }
    }

    #[test]
    fn bracket_zero() {
        let sp = IndexSpace::new(1, 1, 1.0, 2.0).unwrap();
        let n = sp.len();
        let f: Vec<C64> = (0..n.pow(4)).map(|i| C64::new((i % 7) as f64, 1.0)).collect();
        let g = vec![C64::new(0.0, 0.0); n * n];
        assert_eq!(bracket_one_inf(&f, 2, 2, &g, &sp).unwrap(), 0.0);
        assert_eq!(bracket_one(&f, 2, 2, &g, &sp).unwrap(), 0.0);
    }
}
