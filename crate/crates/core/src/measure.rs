//! Discretized spectral measures `D_d ∫ dk Σ_j δ(λ − λ_j(k))`.
//!
//! All scalar Brillouin-zone integrals the solver needs are of the form
//! `D_d ∫ dk Tr f(E(k))`, so the eigenvalues are computed once per node and
//! every later evaluation is a weighted sum.

use std::f64::consts::PI;
use std::sync::atomic::{AtomicUsize, Ordering};

use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::lattice::HoppingModel;
use crate::quadrature::{par_sum, BZGrid};

#[derive(Debug, Clone)]
pub struct SpectralMeasure {
    pub bands: usize,
    pub weights: Vec<f64>,
    /// node-major, `bands` entries per node, descending
    pub eig: Vec<f64>,
    /// node-major `|U_{ρj}|^2` stored at `[node][ρ][j]`, when requested
    pub band_weights: Option<Vec<f64>>,
    /// `Σ w Tr E`
    pub mean_trace: f64,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AdaptiveOpts {
    pub base_n: usize,
    /// cells are resolved relative to `max(e, floor)`
    pub floor: f64,
    pub eta: f64,
    pub max_leaves: usize,
}

impl Default for AdaptiveOpts {
    fn default() -> Self {
        Self {
            base_n: 16,
            floor: 1e-3,
            eta: 0.25,
            max_leaves: 2_000_000,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Leaf {
    pub center: Vec<f64>,
    pub width: Vec<f64>,
    pub e: f64,
}

impl Leaf {
    /// normalized volume, `Π w_j / 2π`
    pub fn weight(&self) -> f64 {
        self.width.iter().map(|w| w / (2.0 * PI)).product()
    }
}

/// k-d refinement of the reduced cube `[0,2π)^d`.
///
/// A cell is split along the axis whose face values of `e` differ most from
/// the center value, until that spread is at most `eta·max(e(center), floor)`.
pub fn adaptive_leaves(model: &HoppingModel, opts: &AdaptiveOpts) -> Result<Vec<Leaf>> {
    let d = model.dim();
    let n = opts.base_n.max(1);
    let w0 = 2.0 * PI / n as f64;
    let base = BZGrid::new(&model.basis, n, 0.5);
    let roots: Vec<Vec<f64>> = (0..base.len())
        .map(|i| {
            let mut kh = vec![0.0; d];
            base.reduced_node(i, &mut kh);
            kh
        })
        .collect();
    let count = AtomicUsize::new(0);
    let per_root: Vec<Result<Vec<Leaf>>> = roots
        .into_par_iter()
        .map(|c| refine_cell(model, c, vec![w0; d], opts, &count))
        .collect();
    let mut out = Vec::new();
    for r in per_root {
        out.extend(r?);
        if out.len() > opts.max_leaves {
            return Err(Error::Budget {
                what: "adaptive leaves",
                needed: out.len(),
                limit: opts.max_leaves,
            });
        }
    }
    Ok(out)
}

fn refine_cell(
    model: &HoppingModel,
    center: Vec<f64>,
    width: Vec<f64>,
    opts: &AdaptiveOpts,
    count: &AtomicUsize,
) -> Result<Vec<Leaf>> {
    let d = center.len();
    let mut stack = vec![(center, width)];
    let mut leaves = Vec::new();
    let mut probe = vec![0.0; d];
    while let Some((c, w)) = stack.pop() {
        let e0 = model.envelope_reduced(&c);
        let mut worst = 0.0;
        let mut axis = 0;
        for j in 0..d {
            probe.copy_from_slice(&c);
            probe[j] = c[j] + 0.5 * w[j];
            let ep = model.envelope_reduced(&probe);
            probe[j] = c[j] - 0.5 * w[j];
            let em = model.envelope_reduced(&probe);
            let s = (ep - e0).abs().max((em - e0).abs());
            if s > worst {
                worst = s;
                axis = j;
            }
        }
        if worst <= opts.eta * e0.max(opts.floor) || w[axis] < 1e-13 {
            leaves.push(Leaf { center: c, width: w, e: e0 });
            let total = count.fetch_add(1, Ordering::Relaxed) + 1;
            if total > opts.max_leaves {
                return Err(Error::Budget {
                    what: "adaptive leaves",
                    needed: total,
                    limit: opts.max_leaves,
                });
            }
            continue;
        }
        let mut w2 = w.clone();
        w2[axis] *= 0.5;
        let mut lo = c.clone();
        let mut hi = c;
        lo[axis] -= 0.25 * w[axis];
        hi[axis] += 0.25 * w[axis];
        stack.push((hi, w2.clone()));
        stack.push((lo, w2));
    }
    Ok(leaves)
}

impl SpectralMeasure {
    fn from_nodes(model: &HoppingModel, nodes: Vec<(Vec<f64>, f64)>, with_vectors: bool) -> Result<Self> {
        let b = model.bands;
        let per: Vec<Result<(Vec<f64>, Option<Vec<f64>>)>> = nodes
            .par_iter()
            .map(|(kh, _)| {
                if with_vectors {
                    let sd = model.spectral_reduced(kh)?;
                    let mut bw = vec![0.0; b * b];
                    for r in 0..b {
                        for j in 0..b {
                            bw[r * b + j] = sd.band_weight(r, j);
                        }
                    }
                    Ok((sd.eigenvalues, Some(bw)))
                } else {
                    let mut ev = vec![0.0; b];
                    model.eigenvalues_reduced(kh, &mut ev);
                    Ok((ev, None))
                }
            })
            .collect();
        let mut eig = Vec::with_capacity(nodes.len() * b);
        let mut bws = if with_vectors { Some(Vec::with_capacity(nodes.len() * b * b)) } else { None };
        for (i, r) in per.into_iter().enumerate() {
            let (ev, bw) = r?;
            if ev.iter().any(|x| !x.is_finite()) {
                return Err(Error::NonFinite { node: nodes[i].0.clone() });
            }
            eig.extend(ev);
            if let (Some(all), Some(bw)) = (bws.as_mut(), bw) {
                all.extend(bw);
            }
        }
        let weights: Vec<f64> = nodes.iter().map(|(_, w)| *w).collect();
        let mut m = SpectralMeasure {
            bands: b,
            weights,
            eig,
            band_weights: bws,
            mean_trace: 0.0,
        };
        m.mean_trace = m.sum_tr(|x| x);
        Ok(m)
    }

    /// Periodic trapezoid rule on an `n^d` grid with fractional `offset`.
    pub fn uniform(model: &HoppingModel, n: usize, offset: f64, with_vectors: bool) -> Result<Self> {
        let g = BZGrid::new(&model.basis, n, offset);
        let w = 1.0 / g.len() as f64;
        let nodes = (0..g.len())
            .map(|i| {
                let mut kh = vec![0.0; model.dim()];
                g.reduced_node(i, &mut kh);
                (kh, w)
            })
            .collect();
        Self::from_nodes(model, nodes, with_vectors)
    }

    /// The finite momentum lattice `Γ*` of side `l` (weights `L^{-d}`).
    pub fn lattice(model: &HoppingModel, l: usize, with_vectors: bool) -> Result<Self> {
        Self::uniform(model, l, 0.0, with_vectors)
    }

    pub fn adaptive(model: &HoppingModel, opts: &AdaptiveOpts, with_vectors: bool) -> Result<Self> {
        let leaves = adaptive_leaves(model, opts)?;
        let nodes = leaves
            .into_iter()
            .map(|l| {
                let w = l.weight();
                (l.center, w)
            })
            .collect();
        Self::from_nodes(model, nodes, with_vectors)
    }

    pub fn len(&self) -> usize {
        self.weights.len()
    }

    pub fn is_empty(&self) -> bool {
        self.weights.is_empty()
    }

    pub fn total_weight(&self) -> f64 {
        par_sum(self.len(), |i| self.weights[i])
    }

    /// `Σ_nodes w Σ_j f(λ_j)`
    pub fn sum_tr<F>(&self, f: F) -> f64
    where
        F: Fn(f64) -> f64 + Sync,
    {
        let b = self.bands;
        par_sum(self.len(), |i| {
            let ev = &self.eig[i * b..(i + 1) * b];
            self.weights[i] * ev.iter().map(|&x| f(x)).sum::<f64>()
        })
    }

    /// `Σ_nodes w Σ_j |U_{ρj}|^2 f(λ_j)`, the (ρ,ρ) entry of `f(E)`.
    pub fn sum_diag<F>(&self, rho: usize, f: F) -> Result<f64>
    where
        F: Fn(f64) -> f64 + Sync,
    {
        let b = self.bands;
        if b == 1 && rho == 0 {
            return Ok(self.sum_tr(f));
        }
        let bw = self
            .band_weights
            .as_ref()
            .ok_or_else(|| Error::Precondition("measure built without eigenvectors".into()))?;
        if rho >= b {
            return Err(Error::Precondition(format!("band {rho} out of range")));
        }
        Ok(par_sum(self.len(), |i| {
            let ev = &self.eig[i * b..(i + 1) * b];
            let w = &bw[i * b * b + rho * b..i * b * b + (rho + 1) * b];
            self.weights[i] * ev.iter().zip(w).map(|(&x, &u)| u * f(x)).sum::<f64>()
        }))
    }

    pub fn min_abs_eigenvalue(&self) -> f64 {
        self.eig.iter().map(|x| x.abs()).fold(f64::INFINITY, f64::min)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::lattice::builtin_model;

    #[test]
    fn adaptive_weights_sum_to_one() {
        let m = builtin_model("honeycomb", &[]).unwrap();
        let opts = AdaptiveOpts {
            base_n: 8,
            floor: 1e-3,
            eta: 0.3,
            max_leaves: 200_000,
        };
        let meas = SpectralMeasure::adaptive(&m, &opts, false).unwrap();
        assert!((meas.total_weight() - 1.0).abs() < 1e-13);
        assert!(meas.len() > 64);
    }

    #[test]
    fn band_weights_are_stochastic() {
        let m = builtin_model("square6band", &[]).unwrap();
        let meas = SpectralMeasure::uniform(&m, 6, 0.5, true).unwrap();
        let s: f64 = (0..6).map(|r| meas.sum_diag(r, |_| 1.0).unwrap()).sum();
        assert!((s - 6.0).abs() < 1e-12);
    }

    #[test]
    fn budget_is_enforced() {
        let m = builtin_model("flat5d", &[]).unwrap();
        let opts = AdaptiveOpts {
            base_n: 4,
            floor: 1e-6,
            eta: 0.1,
            max_leaves: 1000,
        };
        assert!(matches!(adaptive_leaves(&m, &opts), Err(Error::Budget { .. })));
    }
}
