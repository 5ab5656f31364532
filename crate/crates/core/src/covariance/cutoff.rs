use std::f64::consts::PI;

use serde::{Deserialize, Serialize};

use crate::error::{param, Result};

fn p(t: f64) -> f64 {
    if t > 0.0 {
        (-1.0 / t).exp()
    } else {
        0.0
    }
}

/// Smooth step: 1 on `(−∞, 8/5]`, 0 on `[2, ∞)`, strictly between and
/// nonincreasing in the transition.
pub fn chi(x: f64) -> f64 {
    if x <= 1.6 {
        return 1.0;
    }
    if x >= 2.0 {
        return 0.0;
    }
    let a = p(2.0 - x);
    a / (a + p(x - 1.6))
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CutoffFamily {
    pub m: f64,
    pub h: f64,
    pub beta: f64,
    pub n_beta: i32,
    pub nhat_beta: i32,
    pub n_h: i32,
    /// `β^{-1} M^{−N_β}`
    pub a: f64,
}

/// Largest `n` with `M^n ≤ x`.
fn floor_log(m: f64, x: f64) -> i32 {
    let mut n = (x.ln() / m.ln()).floor() as i32;
    while m.powi(n + 1) <= x {
        n += 1;
    }
    while m.powi(n) > x {
        n -= 1;
    }
    n
}

impl CutoffFamily {
    pub fn new(m: f64, h: f64, beta: f64) -> Result<Self> {
        if !(m >= 2.0 && m.is_finite()) {
            return Err(param("M", m, "must be at least 2"));
        }
        super::time_steps(beta, h)?;
        let n_beta = floor_log(m, 1.0 / beta);
        let nhat_beta = if beta <= 1.0 { n_beta + 1 } else { 0 };
        let n_h = floor_log(m, h) + 2;
        let a = 1.0 / (beta * m.powi(n_beta));
        Ok(Self { m, h, beta, n_beta, nhat_beta, n_h, a })
    }

    pub fn scales(&self) -> std::ops::RangeInclusive<i32> {
        self.n_beta..=self.n_h
    }

    pub fn check_scale(&self, l: i32) -> Result<()> {
        if !self.scales().contains(&l) {
            return Err(param("l", l as f64, format!("scale outside [{}, {}]", self.n_beta, self.n_h)));
        }
        Ok(())
    }

    /// `√(h² sin²((ω − π/β)/(2h)) + e²)`
    pub fn radius(&self, omega: f64, e: f64) -> f64 {
        let s = self.h * ((omega - PI / self.beta) / (2.0 * self.h)).sin();
        (s * s + e * e).sqrt()
    }

    fn chi_at(&self, l: i32, r: f64) -> f64 {
        chi(self.m.powi(-l) / self.a * r)
    }

    /// `χ_l(ω, k)` as a function of `ω` and the envelope `e(k)`.
    pub fn chi_l(&self, l: i32, omega: f64, e: f64) -> f64 {
        let r = self.radius(omega, e);
        if l == self.n_beta {
            self.chi_at(l, r)
        } else {
            self.chi_at(l, r) - self.chi_at(l - 1, r)
        }
    }

    /// `|Σ_l χ_l − 1|`
    pub fn unity_residual(&self, omega: f64, e: f64) -> f64 {
        let s: f64 = self.scales().map(|l| self.chi_l(l, omega, e)).sum();
        (s - 1.0).abs()
    }
}
