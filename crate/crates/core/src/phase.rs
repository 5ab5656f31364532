//! Critical field curves, the lobe classification of the (β, θ) plane and
//! the second-order character of the transition.

use std::f64::consts::PI;
use std::fmt::Write as _;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{param, Error, Result};
use crate::gap::{g_value, reduced_theta, solve_gap, Field};
use crate::lattice::HoppingModel;
use crate::measure::{adaptive_leaves, AdaptiveOpts, SpectralMeasure};
use crate::thermo::free_energy_density;

/// `D_d ∫ 1/e` from the leaves of an adaptive tree.
pub fn inv_envelope_integral(model: &HoppingModel, opts: &AdaptiveOpts) -> Result<f64> {
    let leaves = adaptive_leaves(model, opts)?;
    let v: Vec<f64> = leaves.iter().map(|l| l.weight() / l.e).collect();
    Ok(crate::quadrature::pairwise_sum(&v))
}

/// `2 / (b D_d ∫ 1/e)`
pub fn smallness_bound(model: &HoppingModel, opts: &AdaptiveOpts) -> Result<f64> {
    Ok(crate::gap::smallness_bound(model, inv_envelope_integral(model, opts)?))
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CriticalPoint {
    pub beta: f64,
    pub j: u8,
    pub theta: f64,
    /// `|θ_c/2 − π/β|`
    pub distance: f64,
    /// `g(β, θ_c, 0)`
    pub residual: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PhaseVerdict {
    pub in_sc_phase: bool,
    pub m_index: Option<i64>,
    pub distance_to_boundary: f64,
    /// `g(β, θ, 0)`, positive exactly inside a lobe
    pub g0: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Crossing {
    /// θ fixed, β varies
    VaryBeta,
    /// β fixed, θ varies
    VaryTheta,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct JumpReport {
    pub left_d1: f64,
    pub right_d1: f64,
    pub left_d2: f64,
    pub right_d2: f64,
    /// which side of the point lies inside the lobe
    pub left_inside: bool,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ScanPoint {
    pub beta: f64,
    pub theta: f64,
    pub delta: f64,
    pub in_phase: bool,
    pub m_index: Option<i64>,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CurvePoint {
    pub beta: f64,
    pub theta_c: f64,
    pub j: u8,
    pub m: u32,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PhaseScan {
    pub points: Vec<ScanPoint>,
    pub curves: Vec<CurvePoint>,
}

impl PhaseScan {
    pub fn points_csv(&self) -> String {
        let mut s = String::from("beta,theta,delta,in_phase,m_index\n");
        for p in &self.points {
            let m = p.m_index.map(|m| m.to_string()).unwrap_or_default();
            let _ = writeln!(
                s,
                "{:.16e},{:.16e},{:.16e},{},{}",
                p.beta, p.theta, p.delta, p.in_phase as u8, m
            );
        }
        s
    }

    pub fn curves_csv(&self) -> String {
        let mut s = String::from("beta,theta_c,j,m\n");
        for c in &self.curves {
            let _ = writeln!(s, "{:.16e},{:.16e},{},{}", c.beta, c.theta_c, c.j, c.m);
        }
        s
    }
}

/// A model at fixed coupling inside the small-coupling window, with one
/// spectral measure used for every evaluation.
#[derive(Debug, Clone, Copy)]
pub struct PhaseModel<'a> {
    pub meas: &'a SpectralMeasure,
    pub u: f64,
    pub bound: f64,
    pub tol: f64,
}

impl<'a> PhaseModel<'a> {
    /// Fails unless `|U|` is below the smallness bound `bound`.
    pub fn new(meas: &'a SpectralMeasure, u: f64, bound: f64) -> Result<Self> {
        if !(u < 0.0) {
            return Err(param("U", u, "must be negative"));
        }
        if u.abs() >= bound {
            return Err(Error::Precondition(format!(
                "|U| = {} is not below the smallness bound {bound}; critical curves may not exist",
                u.abs()
            )));
        }
        Ok(Self {
            meas,
            u,
            bound,
            tol: 1e-12,
        })
    }

    pub fn g0(&self, beta: f64, theta: f64) -> f64 {
        g_value(self.meas, &Field::from_theta(beta, theta), self.u, 0.0)
    }

    /// `g(β, θ, 0)` at `θ(β) = 2π/β − 2·dist`
    pub fn g0_distance(&self, beta: f64, dist: f64) -> f64 {
        g_value(self.meas, &Field::from_distance(beta, dist), self.u, 0.0)
    }

    /// Distance of `θ_{c,1}(β)` from the singular value `π/β` of `θ/2`.
    pub fn critical_distance(&self, beta: f64) -> Result<f64> {
        let g = |d: f64| self.g0_distance(beta, d);
        let mut hi = PI / beta;
        let g_hi = g(hi);
        if !(g_hi < 0.0) {
            return Err(Error::Precondition(format!("g(β, 0, 0) = {g_hi} is not negative")));
        }
        let mut lo = 1e-6 * PI / beta;
        let mut g_lo = g(lo);
        while g_lo <= 0.0 {
            let next = lo * 1e-3;
            let g_next = g(next);
            if next < 1e-300 || g_next <= g_lo * (1.0 - 1e-14) {
                return Err(Error::NoRoot(format!(
                    "critical field at β = {beta} lies closer than {lo:.3e} to the singular value \
                     (g = {g_lo:.3e} there), not resolvable on this measure"
                )));
            }
            lo = next;
            g_lo = g_next;
        }
        // g decreases in the distance; geometric steps while the bracket is wide
        for _ in 0..400 {
            let mid = if hi > 4.0 * lo { (lo * hi).sqrt() } else { 0.5 * (lo + hi) };
            if mid <= lo || mid >= hi {
                break;
            }
            if g(mid) > 0.0 {
                lo = mid;
            } else {
                hi = mid;
            }
            if hi - lo <= self.tol * 1e-3 * hi {
                break;
            }
        }
        let (gl, gh) = (g(lo), g(hi));
        // one secant step inside the bracket
        let s = lo + (hi - lo) * gl / (gl - gh);
        let mut best = if gl.abs() < gh.abs() { lo } else { hi };
        if s > lo && s < hi && g(s).abs() < g(best).abs() {
            best = s;
        }
        Ok(best)
    }

    /// `θ_{c,j}(β)` for `j ∈ {1, 2}`; `θ_{c,2} = 4π/β − θ_{c,1}`.
    pub fn critical_theta(&self, beta: f64, j: u8) -> Result<CriticalPoint> {
        if !(beta > 0.0 && beta.is_finite()) {
            return Err(param("beta", beta, "must be positive"));
        }
        let d = self.critical_distance(beta)?;
        let theta = match j {
            1 => 2.0 * PI / beta - 2.0 * d,
            2 => 2.0 * PI / beta + 2.0 * d,
            _ => return Err(param("j", j as f64, "must be 1 or 2")),
        };
        Ok(CriticalPoint {
            beta,
            j,
            theta,
            distance: d,
            residual: self.g0_distance(beta, d),
        })
    }

    pub fn theta_cjm(&self, beta: f64, j: u8, m: u32) -> Result<f64> {
        Ok(self.critical_theta(beta, j)?.theta + 4.0 * PI * m as f64 / beta)
    }

    /// Inverse of the decreasing map `β ↦ θ_{c,j,m}(β)` on `[lo, hi]`.
    pub fn beta_cjm(&self, theta: f64, j: u8, m: u32, mut lo: f64, mut hi: f64) -> Result<f64> {
        let h = |b: f64| self.theta_cjm(b, j, m).map(|t| t - theta);
        let (mut hl, hh) = (h(lo)?, h(hi)?);
        if !(hl > 0.0 && hh < 0.0) {
            return Err(Error::NoRoot(format!(
                "θ_c{j},{m} - θ does not change sign on [{lo}, {hi}]"
            )));
        }
        while hi - lo > 1e-13 * hi {
            let mid = 0.5 * (lo + hi);
            let v = h(mid)?;
            if v > 0.0 {
                lo = mid;
                hl = v;
            } else {
                hi = mid;
            }
        }
        let _ = hl;
        Ok(0.5 * (lo + hi))
    }

    pub fn classify(&self, beta: f64, theta: f64) -> Result<PhaseVerdict> {
        let dc = self.critical_distance(beta)?;
        let t = theta.abs();
        let m = (t * beta / (4.0 * PI)).floor();
        let d = (PI / beta - 0.5 * reduced_theta(beta, theta)).abs();
        let inside = d < dc;
        Ok(PhaseVerdict {
            in_sc_phase: inside,
            m_index: if inside { Some(m as i64) } else { None },
            distance_to_boundary: 2.0 * (d - dc).abs(),
            g0: self.g0(beta, theta),
        })
    }

    /// `F(β, θ)` with `Δ` re-solved at the point.
    pub fn free_energy(&self, beta: f64, theta: f64) -> Result<f64> {
        let f = Field::from_theta(beta, theta);
        let sol = solve_gap(self.meas, &f, self.u, self.tol)?;
        free_energy_density(self.meas, &f, self.u, sol.delta)
    }

    /// One-sided first and second derivatives of `F` at a boundary point,
    /// from 5-point stencils at offsets `±(3..7)h`.
    pub fn second_derivative_jump(&self, crossing: Crossing, beta: f64, theta: f64, h: f64) -> Result<JumpReport> {
        let g0 = self.g0(beta, theta);
        if g0.abs() > 1e-8 {
            return Err(Error::Precondition(format!("point is not on a critical curve, g = {g0:.3e}")));
        }
        let at = |t: f64| match crossing {
            Crossing::VaryBeta => (beta + t, theta),
            Crossing::VaryTheta => (beta, theta + t),
        };
        let offs: Vec<f64> = (3..=7).map(|j| j as f64 * h).collect();
        let side = |s: f64| -> Result<(f64, f64, bool)> {
            let ts: Vec<f64> = offs.iter().map(|o| s * o).collect();
            let pts: Vec<(f64, f64)> = ts.iter().map(|&t| at(t)).collect();
            let vals: Vec<Result<(f64, f64)>> = pts
                .par_iter()
                .map(|&(b, th)| Ok((self.free_energy(b, th)?, self.g0(b, th))))
                .collect();
            let mut fs = Vec::new();
            let mut inside = Vec::new();
            for v in vals {
                let (f, g) = v?;
                fs.push(f);
                inside.push(g > 0.0);
            }
            if inside.iter().any(|&x| x != inside[0]) {
                return Err(Error::Precondition("stencil crosses the boundary".into()));
            }
            let (w1, w2) = derivative_weights(&ts);
            let d1 = w1.iter().zip(&fs).map(|(w, f)| w * f).sum();
            let d2 = w2.iter().zip(&fs).map(|(w, f)| w * f).sum();
            Ok((d1, d2, inside[0]))
        };
        let (left_d1, left_d2, li) = side(-1.0)?;
        let (right_d1, right_d2, ri) = side(1.0)?;
        if li == ri {
            return Err(Error::Precondition("both stencils lie on the same side of the boundary".into()));
        }
        Ok(JumpReport {
            left_d1,
            right_d1,
            left_d2,
            right_d2,
            left_inside: li,
        })
    }

    /// Tabulates `Δ` and the verdict on a grid and the curves `θ_{c,j,m}`.
    pub fn scan(&self, betas: &[f64], thetas: &[f64], m_max: u32) -> Result<PhaseScan> {
        let per_beta: Vec<Result<(f64, Vec<ScanPoint>)>> = betas
            .par_iter()
            .map(|&b| {
                let dc = self.critical_distance(b)?;
                let pts = thetas
                    .iter()
                    .map(|&t| {
                        let f = Field::from_theta(b, t);
                        let sol = solve_gap(self.meas, &f, self.u, self.tol)?;
                        let d = (PI / b - 0.5 * f.theta).abs();
                        let inside = d < dc;
                        let m = (t.abs() * b / (4.0 * PI)).floor() as i64;
                        Ok(ScanPoint {
                            beta: b,
                            theta: t,
                            delta: sol.delta,
                            in_phase: inside,
                            m_index: if inside { Some(m) } else { None },
                        })
                    })
                    .collect::<Result<Vec<_>>>()?;
                Ok((dc, pts))
            })
            .collect();
        let mut points = Vec::new();
        let mut curves = Vec::new();
        for (&b, r) in betas.iter().zip(per_beta) {
            let (dc, pts) = r?;
            points.extend(pts);
            for m in 0..=m_max {
                let shift = 4.0 * PI * m as f64 / b;
                curves.push(CurvePoint {
                    beta: b,
                    theta_c: 2.0 * PI / b - 2.0 * dc + shift,
                    j: 1,
                    m,
                });
                curves.push(CurvePoint {
                    beta: b,
                    theta_c: 2.0 * PI / b + 2.0 * dc + shift,
                    j: 2,
                    m,
                });
            }
        }
        Ok(PhaseScan { points, curves })
    }
}

/// Weights for `f'(0)` and `f''(0)` from values at the offsets `ts`
/// (exact for polynomials of degree `ts.len() − 1`).
pub fn derivative_weights(ts: &[f64]) -> (Vec<f64>, Vec<f64>) {
    let n = ts.len();
    // V[i][j] = t_j^i ; solve V w = e_k · k!
    let v = nalgebra::DMatrix::from_fn(n, n, |i, j| ts[j].powi(i as i32));
    let lu = v.lu();
    let mut r1 = nalgebra::DVector::zeros(n);
    r1[1] = 1.0;
    let mut r2 = nalgebra::DVector::zeros(n);
    r2[2] = 2.0;
    let w1 = lu.solve(&r1).expect("distinct offsets");
    let w2 = lu.solve(&r2).expect("distinct offsets");
    (w1.iter().copied().collect(), w2.iter().copied().collect())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn one_sided_weights() {
        let ts: Vec<f64> = (3..=7).map(|j| j as f64 * 0.01).collect();
        let (w1, w2) = derivative_weights(&ts);
        let f = |x: f64| 1.0 + 2.0 * x - 3.0 * x * x + x.powi(4);
        let d1: f64 = w1.iter().zip(&ts).map(|(w, t)| w * f(*t)).sum();
        let d2: f64 = w2.iter().zip(&ts).map(|(w, t)| w * f(*t)).sum();
        assert!((d1 - 2.0).abs() < 1e-8 && (d2 + 6.0).abs() < 1e-6);
    }

    #[test]
    fn chain_curve_is_symmetric_and_zero() {
        let m = HoppingModel::chain(1.0, 0.0, 1);
        let meas = SpectralMeasure::uniform(&m, 64, 0.5, false).unwrap();
        // plenty of room below the bound at this size
        let pm = PhaseModel::new(&meas, -0.3, 1.0).unwrap();
        let c1 = pm.critical_theta(2.0, 1).unwrap();
        let c2 = pm.critical_theta(2.0, 2).unwrap();
        assert!(c1.residual.abs() < 1e-9);
        assert!((c1.theta + c2.theta - 4.0 * PI / 2.0).abs() < 1e-12);
        assert!(pm.g0(2.0, c2.theta).abs() < 1e-6);
        assert!(c1.theta > 0.0 && c1.theta < PI);
    }
}
