use std::f64::consts::PI;

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use crate::error::{param, Result};

/// Real-space basis `v_j` with its dual `vhat_j` (`<v_i, vhat_j> = δ_ij`).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReciprocalBasis {
    pub d: usize,
    pub v: Vec<Vec<f64>>,
    pub vhat: Vec<Vec<f64>>,
    /// `|det(vhat)|^{-1} (2π)^{-d}`
    pub dd: f64,
}

impl ReciprocalBasis {
    pub fn canonical(d: usize) -> Self {
        let v: Vec<Vec<f64>> = (0..d)
            .map(|i| (0..d).map(|j| if i == j { 1.0 } else { 0.0 }).collect())
            .collect();
        Self::from_real(v).expect("identity basis")
    }

    pub fn from_real(v: Vec<Vec<f64>>) -> Result<Self> {
        let d = v.len();
        if d == 0 || v.iter().any(|r| r.len() != d) {
            return Err(param("basis", d as f64, "need d vectors of length d"));
        }
        // rows of V are v_j; vhat rows are the rows of (V^T)^{-1}
        let m = DMatrix::from_fn(d, d, |i, j| v[i][j]);
        let inv = m
            .clone()
            .transpose()
            .try_inverse()
            .ok_or_else(|| param("basis", m.determinant(), "singular basis"))?;
        let vhat: Vec<Vec<f64>> = (0..d).map(|i| (0..d).map(|j| inv[(i, j)]).collect()).collect();
        let det_hat = DMatrix::from_fn(d, d, |i, j| vhat[i][j]).determinant();
        let dd = 1.0 / (det_hat.abs() * (2.0 * PI).powi(d as i32));
        Ok(Self { d, v, vhat, dd })
    }

    pub fn honeycomb() -> Self {
        Self::from_real(vec![vec![1.0, 0.0], vec![0.5, 3f64.sqrt() / 2.0]]).expect("honeycomb basis")
    }

    /// `k = Σ khat_j vhat_j`
    pub fn k_from_reduced(&self, khat: &[f64]) -> Vec<f64> {
        let mut k = vec![0.0; self.d];
        for (j, &c) in khat.iter().enumerate() {
            for (ki, vi) in k.iter_mut().zip(&self.vhat[j]) {
                *ki += c * vi;
            }
        }
        k
    }

    /// inverse of `k_from_reduced`: `khat_j = <k, v_j>`
    pub fn reduced_from_k(&self, k: &[f64]) -> Vec<f64> {
        self.v.iter().map(|vj| dot(vj, k)).collect()
    }

    pub fn site(&self, m: &[i64]) -> Vec<f64> {
        let mut x = vec![0.0; self.d];
        for (j, &c) in m.iter().enumerate() {
            for (xi, vi) in x.iter_mut().zip(&self.v[j]) {
                *xi += c as f64 * vi;
            }
        }
        x
    }

    pub fn max_dual_norm(&self) -> f64 {
        self.vhat
            .iter()
            .map(|r| dot(r, r).sqrt())
            .fold(0.0, f64::max)
    }
}

pub fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn duality_and_volume() {
        for b in [ReciprocalBasis::canonical(3), ReciprocalBasis::honeycomb()] {
            for i in 0..b.d {
                for j in 0..b.d {
                    let want = if i == j { 1.0 } else { 0.0 };
                    assert!((dot(&b.v[i], &b.vhat[j]) - want).abs() < 1e-12);
                }
            }
        }
        let c = ReciprocalBasis::canonical(2);
        assert!((c.dd - 1.0 / (4.0 * PI * PI)).abs() < 1e-15);
    }

    #[test]
    fn honeycomb_dual() {
        let b = ReciprocalBasis::honeycomb();
        let s = 3f64.sqrt();
        assert!((b.vhat[0][0] - 1.0).abs() < 1e-12 && (b.vhat[0][1] + 1.0 / s).abs() < 1e-12);
        assert!(b.vhat[1][0].abs() < 1e-12 && (b.vhat[1][1] - 2.0 / s).abs() < 1e-12);
        let dd = (s / 2.0) / (4.0 * PI * PI);
        assert!((b.dd - dd).abs() < 1e-12);
    }

    #[test]
    fn reduced_roundtrip() {
        let b = ReciprocalBasis::honeycomb();
        let kh = [0.3, -1.7];
        let back = b.reduced_from_k(&b.k_from_reduced(&kh));
        assert!((back[0] - kh[0]).abs() < 1e-12 && (back[1] - kh[1]).abs() < 1e-12);
    }
}
