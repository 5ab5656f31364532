use std::f64::consts::PI;

use nalgebra::{DMatrix, Matrix3};
use num_complex::Complex64 as C64;
use serde::{Deserialize, Serialize};

use super::basis::ReciprocalBasis;
use crate::error::{param, Error, Result};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StencilTerm {
    pub displacement: Vec<i64>,
    /// row-major b×b block
    pub block: Vec<C64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub enum ModelKind {
    Cubic { hop: u8 },
    Honeycomb,
    Square6,
    Aniso3d,
    Flat5d,
    /// k-independent scalar band, any dimension
    Flat { eps: f64 },
    /// `-2t Σ cos k_j - mu`, b = 1
    Chain { t: f64, mu: f64 },
    Stencil { terms: Vec<StencilTerm> },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HoppingModel {
    pub name: String,
    pub basis: ReciprocalBasis,
    pub bands: usize,
    pub kind: ModelKind,
    pub const_c: f64,
    pub const_a: f64,
    pub exponents: Vec<u32>,
    /// exponents of the two additional integral bounds, when known
    pub rs: Option<(f64, f64)>,
}

#[derive(Debug, Clone)]
pub struct SpectralData {
    /// descending
    pub eigenvalues: Vec<f64>,
    pub unitary: DMatrix<C64>,
    pub k: Vec<f64>,
}

pub const BUILTIN_NAMES: [&str; 6] = ["cubic3", "cubic4", "honeycomb", "square6band", "aniso3d", "flat5d"];

pub fn builtin_model(name: &str, params: &[f64]) -> Result<HoppingModel> {
    let hop = || -> Result<u8> {
        match params.first().copied().unwrap_or(0.0) {
            h if h == 0.0 => Ok(0),
            h if h == 1.0 => Ok(1),
            h => Err(param("hop", h, "must be 0 or 1")),
        }
    };
    let m = match name {
        "cubic3" | "cubic4" => {
            let d = if name == "cubic3" { 3 } else { 4 };
            HoppingModel {
                name: name.into(),
                basis: ReciprocalBasis::canonical(d),
                bands: 1,
                kind: ModelKind::Cubic { hop: hop()? },
                const_c: 4.0 * d as f64,
                const_a: d as f64 / 2.0,
                exponents: vec![2; d],
                rs: Some(if d == 3 { (0.5, 2.5) } else { (0.5, 2.0) }),
            }
        }
        "honeycomb" => HoppingModel {
            name: name.into(),
            basis: ReciprocalBasis::honeycomb(),
            bands: 2,
            kind: ModelKind::Honeycomb,
            const_c: 3.0,
            const_a: 2.0,
            exponents: vec![1, 1],
            rs: Some((0.5, 2.0)),
        },
        "square6band" => HoppingModel {
            name: name.into(),
            basis: ReciprocalBasis::canonical(2),
            bands: 6,
            kind: ModelKind::Square6,
            const_c: 11f64.sqrt(),
            const_a: 2.0,
            exponents: vec![1, 1],
            rs: Some((0.5, 2.0)),
        },
        "aniso3d" => HoppingModel {
            name: name.into(),
            basis: ReciprocalBasis::canonical(3),
            bands: 1,
            kind: ModelKind::Aniso3d,
            const_c: 8.0,
            const_a: 1.25,
            exponents: vec![2, 2, 4],
            rs: Some((0.75, 2.75)),
        },
        "flat5d" => HoppingModel {
            name: name.into(),
            basis: ReciprocalBasis::canonical(5),
            bands: 1,
            kind: ModelKind::Flat5d,
            const_c: 10.0,
            const_a: 1.8,
            exponents: vec![2; 5],
            rs: Some((0.5, 2.0)),
        },
        _ => return Err(Error::UnknownModel(name.into())),
    };
    Ok(m)
}

fn cis(x: f64) -> C64 {
    C64::new(x.cos(), x.sin())
}

fn one_plus_cis(x: f64) -> C64 {
    C64::new(1.0, 0.0) + cis(x)
}

/// |1 + e^{ix}|^2 = 4 cos^2(x/2)
fn opc_sq(x: f64) -> f64 {
    let c = (x / 2.0).cos();
    4.0 * c * c
}

impl HoppingModel {
    pub fn flat_band(eps: f64, d: usize) -> Self {
        HoppingModel {
            name: "flat".into(),
            basis: ReciprocalBasis::canonical(d),
            bands: 1,
            kind: ModelKind::Flat { eps },
            const_c: eps.abs().max(1.0),
            const_a: 2.0,
            exponents: vec![1; d],
            rs: None,
        }
    }

    pub fn chain(t: f64, mu: f64, d: usize) -> Self {
        HoppingModel {
            name: "chain".into(),
            basis: ReciprocalBasis::canonical(d),
            bands: 1,
            kind: ModelKind::Chain { t, mu },
            const_c: (2.0 * t.abs() * d as f64 + mu.abs()).max(1.0),
            const_a: 2.0,
            exponents: vec![1; d],
            rs: None,
        }
    }

    pub fn from_stencil(
        name: &str,
        basis: ReciprocalBasis,
        bands: usize,
        terms: Vec<StencilTerm>,
        exponents: Option<Vec<u32>>,
        const_a: Option<f64>,
    ) -> Result<Self> {
        let d = basis.d;
        for t in &terms {
            if t.displacement.len() != d || t.block.len() != bands * bands {
                return Err(Error::Config(format!(
                    "stencil term {:?} does not match d={d}, b={bands}",
                    t.displacement
                )));
            }
        }
        let m = HoppingModel {
            name: name.into(),
            basis,
            bands,
            kind: ModelKind::Stencil { terms },
            const_c: 1.0,
            const_a: const_a.unwrap_or(2.0),
            exponents: exponents.unwrap_or_else(|| vec![1; d]),
            rs: None,
        };
        // hermiticity at a few generic points
        for s in [0.123, 1.7, 4.1] {
            let kh: Vec<f64> = (0..d).map(|j| s * (j as f64 + 1.0)).collect();
            let e = m.hopping_reduced(&kh);
            let dev = max_abs(&(&e - e.adjoint()));
            if dev > 1e-9 {
                return Err(Error::Config(format!("stencil is not Hermitian (deviation {dev:e})")));
            }
        }
        let sup = m.sup_envelope_estimate();
        m.clone().with_c(sup.max(1.0))
    }

    fn with_c(mut self, c: f64) -> Result<Self> {
        self.const_c = c;
        Ok(self)
    }

    fn sup_envelope_estimate(&self) -> f64 {
        let n = 24usize;
        let d = self.basis.d;
        let mut best: f64 = 0.0;
        let total = n.pow(d.min(4) as u32);
        for idx in 0..total {
            let mut r = idx;
            let kh: Vec<f64> = (0..d)
                .map(|_| {
                    let m = r % n;
                    r /= n;
                    2.0 * PI * (m as f64 + 0.5) / n as f64
                })
                .collect();
            best = best.max(self.envelope_reduced(&kh));
        }
        best
    }

    pub fn dim(&self) -> usize {
        self.basis.d
    }

    pub fn power_condition(&self) -> f64 {
        2.0 * self.const_a - 1.0 - self.exponents.iter().map(|&n| 1.0 / n as f64).sum::<f64>()
    }

    /// `a - 1 - Σ 1/n_j`, the scale exponent of the decay bound
    pub fn decay_exponent(&self) -> f64 {
        self.const_a - 1.0 - self.exponents.iter().map(|&n| 1.0 / n as f64).sum::<f64>()
    }

    pub fn hopping(&self, k: &[f64]) -> DMatrix<C64> {
        self.hopping_reduced(&self.basis.reduced_from_k(k))
    }

    pub fn envelope(&self, k: &[f64]) -> f64 {
        self.envelope_reduced(&self.basis.reduced_from_k(k))
    }

    /// E as a function of reduced coordinates `khat_j = <v_j, k>`
    pub fn hopping_reduced(&self, kh: &[f64]) -> DMatrix<C64> {
        let b = self.bands;
        let re = |x: f64| DMatrix::from_element(1, 1, C64::new(x, 0.0));
        match &self.kind {
            ModelKind::Cubic { .. } | ModelKind::Aniso3d | ModelKind::Flat5d | ModelKind::Flat { .. } | ModelKind::Chain { .. } => {
                re(self.scalar_band(kh))
            }
            ModelKind::Honeycomb => {
                let w = C64::new(1.0, 0.0) + cis(-kh[0]) + cis(-kh[1]);
                DMatrix::from_row_slice(2, 2, &[C64::new(0.0, 0.0), w, w.conj(), C64::new(0.0, 0.0)])
            }
            ModelKind::Square6 => {
                let e0 = square6_block(kh);
                let mut m = DMatrix::zeros(6, 6);
                for i in 0..3 {
                    for j in 0..3 {
                        m[(i, 3 + j)] = e0[(i, j)];
                        m[(3 + j, i)] = e0[(i, j)].conj();
                    }
                }
                m
            }
            ModelKind::Stencil { terms } => {
                let mut m = DMatrix::zeros(b, b);
                for t in terms {
                    let ph = cis(t.displacement.iter().zip(kh).map(|(&m, &k)| m as f64 * k).sum());
                    for i in 0..b {
                        for j in 0..b {
                            m[(i, j)] += ph * t.block[i * b + j];
                        }
                    }
                }
                m
            }
        }
    }

    fn scalar_band(&self, kh: &[f64]) -> f64 {
        match &self.kind {
            ModelKind::Cubic { hop } => {
                let d = kh.len() as f64;
                let s: f64 = kh.iter().map(|k| k.cos()).sum();
                if *hop == 0 {
                    2.0 * s - 2.0 * d
                } else {
                    -2.0 * s - 2.0 * d
                }
            }
            ModelKind::Aniso3d => {
                let c3 = kh[2].cos() + 1.0;
                kh[0].cos() + kh[1].cos() + 2.0 + c3 * c3
            }
            ModelKind::Flat5d => {
                let c = kh[0].cos() + kh[1].cos();
                c * c + kh[2..].iter().map(|k| k.cos()).sum::<f64>() + 3.0
            }
            ModelKind::Flat { eps } => *eps,
            ModelKind::Chain { t, mu } => -2.0 * t * kh.iter().map(|k| k.cos()).sum::<f64>() - mu,
            _ => unreachable!("not a scalar band"),
        }
    }

    /// Scalar envelope e(k) in reduced coordinates.
    pub fn envelope_reduced(&self, kh: &[f64]) -> f64 {
        match &self.kind {
            ModelKind::Cubic { hop } => {
                let sh = if *hop == 1 { PI / 2.0 } else { 0.0 };
                4.0 * kh.iter().map(|k| (k / 2.0 + sh).sin().powi(2)).sum::<f64>()
            }
            ModelKind::Honeycomb => (C64::new(1.0, 0.0) + cis(kh[0]) + cis(kh[1])).norm(),
            ModelKind::Square6 => ((opc_sq(kh[0]) + opc_sq(kh[1])) / 22.0).sqrt(),
            ModelKind::Aniso3d => {
                let s1 = ((kh[0] - PI) / 2.0).sin().powi(2);
                let s2 = ((kh[1] - PI) / 2.0).sin().powi(2);
                let s3 = ((kh[2] - PI) / 2.0).sin().powi(2);
                2.0 * (s1 + s2) + 4.0 * s3 * s3
            }
            ModelKind::Flat5d => {
                // (cos k1 + cos k2)^2 + Σ_{j≥3} 2 cos^2(k_j/2)
                let c = kh[0].cos() + kh[1].cos();
                c * c + kh[2..].iter().map(|k| 2.0 * (k / 2.0).cos().powi(2)).sum::<f64>()
            }
            ModelKind::Flat { eps } => eps.abs(),
            ModelKind::Chain { .. } => self.scalar_band(kh).abs(),
            ModelKind::Stencil { .. } => {
                let mut ev = vec![0.0; self.bands];
                self.eigenvalues_reduced(kh, &mut ev);
                ev.iter().map(|x| x.abs()).fold(f64::INFINITY, f64::min)
            }
        }
    }

    /// Eigenvalues of E in descending order, written to `out` (length b).
    pub fn eigenvalues_reduced(&self, kh: &[f64], out: &mut [f64]) {
        match &self.kind {
            ModelKind::Cubic { .. } | ModelKind::Aniso3d | ModelKind::Flat5d | ModelKind::Flat { .. } | ModelKind::Chain { .. } => {
                out[0] = self.scalar_band(kh)
            }
            ModelKind::Honeycomb => {
                let w = (C64::new(1.0, 0.0) + cis(kh[0]) + cis(kh[1])).norm();
                out[0] = w;
                out[1] = -w;
            }
            ModelKind::Square6 => {
                let svd = square6_block(kh).svd(false, false);
                let mut s = [svd.singular_values[0], svd.singular_values[1], svd.singular_values[2]];
                s.sort_by(|a, b| b.total_cmp(a));
                out[..3].copy_from_slice(&s);
                for j in 0..3 {
                    out[3 + j] = -s[2 - j];
                }
            }
            ModelKind::Stencil { .. } => {
                let eig = self.hopping_reduced(kh).symmetric_eigen();
                let mut v: Vec<f64> = eig.eigenvalues.iter().copied().collect();
                v.sort_by(|a, b| b.total_cmp(a));
                out.copy_from_slice(&v);
            }
        }
    }

    pub fn eigenvalues(&self, k: &[f64]) -> Vec<f64> {
        let mut out = vec![0.0; self.bands];
        self.eigenvalues_reduced(&self.basis.reduced_from_k(k), &mut out);
        out
    }

    pub fn spectral_reduced(&self, kh: &[f64]) -> Result<SpectralData> {
        let e = self.hopping_reduced(kh);
        let k = self.basis.k_from_reduced(kh);
        spectral_of(&e, k)
    }

    /// Eigendecomposition of E(k), eigenvalues descending.
    pub fn spectral(&self, k: &[f64]) -> Result<SpectralData> {
        spectral_of(&self.hopping(k), k.to_vec())
    }

    /// `f(E(k)) = U f(D) U*`
    pub fn matrix_function<F>(&self, k: &[f64], f: F) -> Result<DMatrix<C64>>
    where
        F: Fn(f64) -> C64,
    {
        let sd = self.spectral(k)?;
        sd.apply(f)
    }

    /// Closed-form lower bound used for the chemical-potential-free check of
    /// the square model: the characteristic polynomial of E0 E0^*.
    pub fn square6_charpoly(kh: &[f64], x: f64) -> f64 {
        let p = opc_sq(kh[0]);
        let q = opc_sq(kh[1]);
        x.powi(3) - (5.0 + 3.0 * p + 2.0 * q) * x * x + (6.0 * (p + q) + 2.0 * p * p + q * q - p * q) * x
            - (p + q).powi(2)
    }
}

fn square6_block(kh: &[f64]) -> Matrix3<C64> {
    let z = C64::new(0.0, 0.0);
    let r = |x: f64| C64::new(x, 0.0);
    Matrix3::new(
        r(2.0),
        one_plus_cis(kh[1]),
        one_plus_cis(-kh[0]),
        z,
        one_plus_cis(kh[0]),
        one_plus_cis(-kh[1]),
        r(1.0),
        z,
        one_plus_cis(-kh[0]),
    )
}

pub(crate) fn max_abs(m: &DMatrix<C64>) -> f64 {
    m.iter().map(|z| z.norm()).fold(0.0, f64::max)
}

pub fn spectral_of(e: &DMatrix<C64>, k: Vec<f64>) -> Result<SpectralData> {
    let dev = max_abs(&(e - e.adjoint()));
    if dev > 1e-9 {
        return Err(Error::Domain(format!("E(k) not Hermitian at k={k:?} (deviation {dev:e})")));
    }
    let herm = (e + e.adjoint()).scale(0.5);
    let eig = herm.symmetric_eigen();
    let n = e.nrows();
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&a, &b| eig.eigenvalues[b].total_cmp(&eig.eigenvalues[a]));
    let eigenvalues = order.iter().map(|&i| eig.eigenvalues[i]).collect();
    let unitary = DMatrix::from_fn(n, n, |r, c| eig.eigenvectors[(r, order[c])]);
    Ok(SpectralData { eigenvalues, unitary, k })
}

impl SpectralData {
    pub fn apply<F>(&self, f: F) -> Result<DMatrix<C64>>
    where
        F: Fn(f64) -> C64,
    {
        let n = self.eigenvalues.len();
        let mut fd = Vec::with_capacity(n);
        for &l in &self.eigenvalues {
            let v = f(l);
            if !v.re.is_finite() || !v.im.is_finite() {
                return Err(Error::Domain(format!("function undefined at eigenvalue {l}")));
            }
            fd.push(v);
        }
        let u = &self.unitary;
        Ok(DMatrix::from_fn(n, n, |i, j| {
            (0..n).map(|m| u[(i, m)] * fd[m] * u[(j, m)].conj()).sum()
        }))
    }

    /// |U_{ρ j}|^2
    pub fn band_weight(&self, rho: usize, j: usize) -> f64 {
        self.unitary[(rho, j)].norm_sqr()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn honeycomb_dirac_point() {
        let m = builtin_model("honeycomb", &[]).unwrap();
        let k = m.basis.k_from_reduced(&[2.0 * PI / 3.0, 4.0 * PI / 3.0]);
        assert!(m.envelope(&k) < 1e-12);
        let f = m.matrix_function(&k, |x| C64::new((x * x + 0.49).sqrt(), 0.0)).unwrap();
        assert!((f[(0, 0)].re - 0.7).abs() < 1e-12 && f[(0, 1)].norm() < 1e-12);
    }

    #[test]
    fn honeycomb_eigenvalues_closed_form() {
        let m = builtin_model("honeycomb", &[]).unwrap();
        let k = [0.37, -1.21];
        let sd = m.spectral(&k).unwrap();
        let kh = m.basis.reduced_from_k(&k);
        let w = (C64::new(1.0, 0.0) + cis(kh[0]) + cis(kh[1])).norm();
        assert!((sd.eigenvalues[0] - w).abs() < 1e-12 && (sd.eigenvalues[1] + w).abs() < 1e-12);
    }

    #[test]
    fn cubic_symmetry_points() {
        let m0 = builtin_model("cubic3", &[0.0]).unwrap();
        let m1 = builtin_model("cubic3", &[1.0]).unwrap();
        assert!(m0.envelope(&[0.0; 3]).abs() < 1e-14);
        assert!((m0.envelope(&[PI; 3]) - 12.0).abs() < 1e-12);
        assert!(m1.envelope(&[PI; 3]).abs() < 1e-12);
        assert!((m1.envelope(&[0.0; 3]) - 12.0).abs() < 1e-12);
        let f = m0.matrix_function(&[PI; 3], |x| C64::new(x.abs(), 0.0)).unwrap();
        assert!((f[(0, 0)].re - 12.0).abs() < 1e-12);
    }

    #[test]
    fn square6_fast_path_matches_dense() {
        let m = builtin_model("square6band", &[]).unwrap();
        for kh in [[0.3, 2.2], [PI, PI], [1.0, -0.4]] {
            let mut fast = vec![0.0; 6];
            m.eigenvalues_reduced(&kh, &mut fast);
            let dense = m.spectral_reduced(&kh).unwrap();
            for (a, b) in fast.iter().zip(&dense.eigenvalues) {
                assert!((a - b).abs() < 1e-10, "{fast:?} {:?}", dense.eigenvalues);
            }
        }
    }

    #[test]
    fn square6_charpoly_roots() {
        let m = builtin_model("square6band", &[]).unwrap();
        for kh in [[PI, PI], [0.7, 2.9], [0.0, 0.0]] {
            let mut ev = vec![0.0; 6];
            m.eigenvalues_reduced(&kh, &mut ev);
            for s in &ev[..3] {
                let r = HoppingModel::square6_charpoly(&kh, s * s);
                assert!(r.abs() < 1e-8, "residual {r} at {kh:?}");
            }
        }
    }

    #[test]
    fn unknown_name() {
        assert!(matches!(builtin_model("kagome", &[]), Err(Error::UnknownModel(_))));
    }
}
