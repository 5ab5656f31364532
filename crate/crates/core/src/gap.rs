//! The mean-field gap equation at imaginary magnetic field.

use std::f64::consts::{LN_2, PI};

use serde::{Deserialize, Serialize};

use crate::error::{param, Error, Result};
use crate::lattice::HoppingModel;
use crate::measure::SpectralMeasure;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PhysParams {
    pub beta: f64,
    pub theta: f64,
    /// coupling, strictly negative
    pub u: f64,
    pub gamma: f64,
}

/// `θ(β)`: θ reduced into `[0, 2π/β]` using the `4π/β` period and `θ ↦ −θ`.
pub fn reduced_theta(beta: f64, theta: f64) -> f64 {
    let p = 4.0 * PI / beta;
    let mut t = theta.rem_euclid(p);
    if t > 0.5 * p {
        t -= p;
    }
    t.abs()
}

impl PhysParams {
    pub fn new(beta: f64, theta: f64, u: f64, gamma: f64) -> Result<Self> {
        if !(beta.is_finite() && beta > 0.0) {
            return Err(param("beta", beta, "must be positive and finite"));
        }
        if !theta.is_finite() {
            return Err(param("theta", theta, "must be finite"));
        }
        if !(u.is_finite() && u < 0.0) {
            return Err(param("U", u, "must be negative"));
        }
        if !(0.0..=1.0).contains(&gamma) {
            return Err(param("gamma", gamma, "must lie in [0,1]"));
        }
        Ok(Self { beta, theta, u, gamma })
    }

    pub fn theta_reduced(&self) -> f64 {
        reduced_theta(self.beta, self.theta)
    }

    /// `βθ(β)/2 ≠ π`
    pub fn admissible(&self) -> bool {
        self.field().opc > 0.0
    }

    pub fn field(&self) -> Field {
        Field::from_theta(self.beta, self.theta)
    }
}

/// `β` together with `c = cos(βθ(β)/2)` and an accurate `1 + c`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Field {
    pub beta: f64,
    pub theta: f64,
    pub c: f64,
    pub opc: f64,
}

impl Field {
    pub fn from_theta(beta: f64, theta: f64) -> Self {
        let t = reduced_theta(beta, theta);
        let q = 0.25 * beta * t;
        Self {
            beta,
            theta: t,
            c: (2.0 * q).cos(),
            opc: 2.0 * q.cos().powi(2),
        }
    }

    /// Parametrized by the distance `u = π/β − θ(β)/2 ∈ [0, π/β]` to the
    /// singular field, which keeps `1 + c` accurate when `u` is tiny.
    pub fn from_distance(beta: f64, u: f64) -> Self {
        let x = beta * u;
        Self {
            beta,
            theta: 2.0 * PI / beta - 2.0 * u,
            c: -x.cos(),
            opc: 2.0 * (0.5 * x).sin().powi(2),
        }
    }

    pub fn distance(&self) -> f64 {
        PI / self.beta - 0.5 * self.theta
    }

    /// `c + cosh x`
    pub fn denom(&self, x: f64) -> f64 {
        self.opc + 2.0 * (0.5 * x).sinh().powi(2)
    }

    /// `sinh(βs) / ((c + cosh βs) s)`, continuous at `s = 0`.
    pub fn kernel(&self, s: f64) -> f64 {
        let s = s.abs();
        let x = self.beta * s;
        if x > 30.0 {
            let q = (-x).exp();
            return (1.0 - q * q) / ((1.0 + 2.0 * self.c * q + q * q) * s);
        }
        let shc = if x < 1e-4 { self.beta * (1.0 + x * x / 6.0) } else { x.sinh() / s };
        shc / self.denom(x)
    }

    /// `log(c + cosh βs)`
    pub fn log_cosh(&self, s: f64) -> f64 {
        let x = self.beta * s.abs();
        if x > 30.0 {
            let q = (-x).exp();
            return x - LN_2 + (2.0 * self.c * q + q * q).ln_1p();
        }
        self.denom(x).ln()
    }

    /// `d/ds log(c + cosh βs) = β sinh(βs)/(c + cosh βs)`
    pub fn log_cosh_prime(&self, s: f64) -> f64 {
        s * self.beta * self.kernel(s)
    }
}

/// `g(z) = −2/|U| + D_d ∫ Tr[G(√(E² + z²))]` on a spectral measure.
pub fn g_value(meas: &SpectralMeasure, field: &Field, u: f64, z: f64) -> f64 {
    let z2 = z * z;
    -2.0 / u.abs() + meas.sum_tr(|l| field.kernel((l * l + z2).sqrt()))
}

/// `∂g/∂z`, analytic. Used by the polishing step and the observables.
pub fn g_prime(meas: &SpectralMeasure, field: &Field, z: f64) -> f64 {
    let z2 = z * z;
    let b = field.beta;
    z * meas.sum_tr(|l| {
        let s = (l * l + z2).sqrt();
        if s == 0.0 {
            return 0.0;
        }
        // K'(s)/s with K = sinh(x)/((c+cosh x)s), x = βs
        let x = b * s;
        let k = field.kernel(s);
        // β(1 + c cosh x)/(c + cosh x)^2
        let t = if x > 30.0 {
            let q = (-x).exp();
            let den = 1.0 + 2.0 * field.c * q + q * q;
            b * 2.0 * q * (field.c * (1.0 + q * q) + 2.0 * q) / (den * den)
        } else {
            let den = field.denom(x);
            b * (1.0 + field.c * x.cosh()) / (den * den)
        };
        (t / s - k / s) / s
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GapSolution {
    pub delta: f64,
    pub residual: f64,
    pub solvable: bool,
    /// `g(0)`
    pub criterion_value: f64,
}

fn polish<G, D>(g: G, dg: D, mut lo: f64, mut hi: f64, tol: f64) -> Result<(f64, f64)>
where
    G: Fn(f64) -> f64,
    D: Fn(f64) -> f64,
{
    // g(lo) > 0 > g(hi)
    let mut it = 0;
    while hi - lo > tol {
        let mid = 0.5 * (lo + hi);
        let v = g(mid);
        if !v.is_finite() {
            return Err(Error::NonFinite { node: vec![mid] });
        }
        if v > 0.0 {
            lo = mid;
        } else {
            hi = mid;
        }
        it += 1;
        if it > 200 {
            break;
        }
    }
    let mut z = 0.5 * (lo + hi);
    let mut r = g(z);
    for _ in 0..4 {
        let d = dg(z);
        if !(d.is_finite() && d != 0.0) {
            break;
        }
        let zn = z - r / d;
        if !(zn >= lo && zn <= hi) {
            break;
        }
        let rn = g(zn);
        if rn.abs() >= r.abs() {
            break;
        }
        z = zn;
        r = rn;
    }
    Ok((z, r))
}

/// Finds the positive root of `g` if `g(0) > 0`, and reports `Δ = 0` otherwise.
pub fn solve_gap(meas: &SpectralMeasure, field: &Field, u: f64, tol: f64) -> Result<GapSolution> {
    if !(u < 0.0) {
        return Err(param("U", u, "must be negative"));
    }
    let g0 = g_value(meas, field, u, 0.0);
    if g0.is_nan() {
        return Err(Error::NonFinite { node: vec![0.0] });
    }
    if g0 <= 0.0 {
        return Ok(GapSolution {
            delta: 0.0,
            residual: 0.0,
            solvable: g0 == 0.0,
            criterion_value: g0,
        });
    }
    let target = -1.0 / u.abs();
    let mut hi = 1.0;
    while g_value(meas, field, u, hi) >= target {
        hi *= 2.0;
        if hi > 1e12 {
            return Err(Error::NoRoot("gap equation bracket did not close".into()));
        }
    }
    let (delta, residual) = polish(
        |z| g_value(meas, field, u, z),
        |z| g_prime(meas, field, z),
        0.0,
        hi,
        tol.max(1e-15 * hi),
    )?;
    Ok(GapSolution {
        delta,
        residual,
        solvable: true,
        criterion_value: g0,
    })
}

/// Same equation with the momentum integral replaced by the `Γ*` average.
pub fn solve_gap_finite(model: &HoppingModel, p: &PhysParams, l: usize, tol: f64) -> Result<GapSolution> {
    let meas = SpectralMeasure::lattice(model, l, false)?;
    solve_gap(&meas, &p.field(), p.u, tol)
}

/// Root `a > 0` of `a g(a) + 2γ/|U| = 0`, the symmetry-broken gap.
pub fn solve_perturbed(meas: &SpectralMeasure, field: &Field, u: f64, gamma: f64, tol: f64) -> Result<f64> {
    if !(gamma > 0.0 && gamma <= 1.0) {
        return Err(param("gamma", gamma, "must lie in (0,1]"));
    }
    let shift = 2.0 * gamma / u.abs();
    let h = |a: f64| a * g_value(meas, field, u, a) + shift;
    let mut hi = 1.0;
    while h(hi) >= 0.0 {
        hi *= 2.0;
        if hi > 1e12 {
            return Err(Error::NoRoot("perturbed gap bracket did not close".into()));
        }
    }
    let (a, _) = polish(
        h,
        |a| g_value(meas, field, u, a) + a * g_prime(meas, field, a),
        0.0,
        hi,
        tol.max(1e-15 * hi),
    )?;
    Ok(a)
}

/// `2 / (b D_d ∫ 1/e)`: for `|U|` below this the gap vanishes for every β, θ.
pub fn smallness_bound(model: &HoppingModel, inv_e_integral: f64) -> f64 {
    2.0 / (model.bands as f64 * inv_e_integral)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::lattice::HoppingModel;

    #[test]
    fn reduction_is_even_and_periodic() {
        let b = 2.5;
        for t in [0.1, 1.0, 2.3, 5.0, -7.0] {
            let r = reduced_theta(b, t);
            assert!((0.0..=2.0 * PI / b + 1e-15).contains(&r));
            assert!((reduced_theta(b, -t) - r).abs() < 1e-12);
            assert!((reduced_theta(b, t + 4.0 * PI / b) - r).abs() < 1e-12);
        }
    }

    #[test]
    fn flat_band_scalar() {
        let m = HoppingModel::flat_band(1.0, 1);
        let meas = SpectralMeasure::uniform(&m, 4, 0.5, false).unwrap();
        let f = Field::from_theta(1.0, 0.0);
        let g = g_value(&meas, &f, -1.0, 0.0);
        assert!((g - (-2.0 + 0.5f64.tanh())).abs() < 1e-14);
    }

    #[test]
    fn distance_and_theta_agree() {
        let b = 3.0;
        let th = 1.7;
        let a = Field::from_theta(b, th);
        let c = Field::from_distance(b, a.distance());
        assert!((a.c - c.c).abs() < 1e-14 && (a.opc - c.opc).abs() < 1e-14);
    }

    #[test]
    fn kernel_branches_agree() {
        let f = Field::from_theta(2.0, 0.4);
        for s in [14.9, 15.0, 15.1] {
            let direct = (f.beta * s).sinh() / ((f.c + (f.beta * s).cosh()) * s);
            assert!((f.kernel(s) - direct).abs() < 1e-14 * direct);
        }
        let x: f64 = 0.5e-4 / 2.0;
        let direct = (2.0 * x).sinh() / ((f.c + (2.0 * x).cosh()) * x);
        assert!((f.kernel(x) - direct).abs() < 1e-12 * direct);
    }

    #[test]
    fn g_prime_matches_difference() {
        let m = HoppingModel::chain(1.0, 0.3, 1);
        let meas = SpectralMeasure::uniform(&m, 64, 0.5, false).unwrap();
        let f = Field::from_theta(4.0, 0.9);
        for z in [0.05, 0.4, 2.0, 12.0] {
            let h = 1e-5 * z;
            let fd = (g_value(&meas, &f, -1.0, z + h) - g_value(&meas, &f, -1.0, z - h)) / (2.0 * h);
            let an = g_prime(&meas, &f, z);
            assert!((fd - an).abs() < 1e-6 * an.abs().max(1.0), "{z} {fd} {an}");
        }
    }

    #[test]
    fn flat_band_gap_closed_form() {
        // b = 1, E ≡ 0, θ = 0: g(z) = −2/|U| + tanh(βz/2)/z
        let m = HoppingModel::flat_band(0.0, 1);
        let meas = SpectralMeasure::uniform(&m, 2, 0.5, false).unwrap();
        let f = Field::from_theta(10.0, 0.0);
        let sol = solve_gap(&meas, &f, -1.0, 1e-12).unwrap();
        assert!(sol.solvable && sol.residual.abs() < 1e-10);
        let z = sol.delta;
        assert!(((5.0 * z).tanh() / z - 2.0).abs() < 1e-10);
    }
}
