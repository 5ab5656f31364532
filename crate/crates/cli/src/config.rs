use std::path::{Path, PathBuf};

use anyhow::{bail, Context, Result};
use imbcs::lattice::{HoppingModel, ReciprocalBasis, StencilTerm};
use imbcs::measure::AdaptiveOpts;
use imbcs::SpectralMeasure;
use serde::Deserialize;

/// A scalar or an inclusive `lo:hi:n` sweep.
#[derive(Debug, Clone, PartialEq, Deserialize)]
#[serde(untagged)]
pub enum Sweep {
    Value(f64),
    Text(String),
}

impl Sweep {
    pub fn values(&self) -> Result<Vec<f64>> {
        match self {
            Sweep::Value(v) => Ok(vec![*v]),
            Sweep::Text(s) => parse_sweep(s),
        }
    }
}

pub fn parse_sweep(s: &str) -> Result<Vec<f64>> {
    let parts: Vec<&str> = s.split(':').collect();
    let num = |p: &str| -> Result<f64> {
        let v: f64 = p.trim().parse().with_context(|| format!("`{p}` is not a number"))?;
        if !v.is_finite() {
            bail!("`{p}` is not finite");
        }
        Ok(v)
    };
    match parts.as_slice() {
        [v] => Ok(vec![num(v)?]),
        [lo, hi, n] => {
            let (lo, hi) = (num(lo)?, num(hi)?);
            let n: usize = n.trim().parse().with_context(|| format!("`{n}` is not a point count"))?;
            match n {
                0 => bail!("sweep `{s}` is empty"),
                1 if lo != hi => bail!("sweep `{s}` has one point but lo != hi"),
                1 => Ok(vec![lo]),
                _ => Ok((0..n).map(|i| lo + (hi - lo) * i as f64 / (n - 1) as f64).collect()),
            }
        }
        _ => bail!("sweep `{s}` is neither a number nor lo:hi:n"),
    }
}

/// Custom model file: a hopping stencil on a real-space basis.
#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ModelFile {
    pub name: String,
    pub bands: usize,
    /// real-space basis vectors, one per row
    pub basis: Vec<Vec<f64>>,
    pub terms: Vec<StencilTerm>,
    pub exponents: Option<Vec<u32>>,
    pub const_a: Option<f64>,
}

/// Everything a subcommand may read. Fields left unset fall back to the
/// subcommand's defaults; command-line flags override the file.
#[derive(Debug, Clone, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    pub model: Option<String>,
    pub model_params: Option<Vec<f64>>,
    pub model_file: Option<PathBuf>,
    pub beta: Option<Sweep>,
    pub theta: Option<Sweep>,
    #[serde(rename = "U", alias = "u")]
    pub u: Option<Sweep>,
    pub gamma: Option<Sweep>,
    pub grid: Option<GridConfig>,
    pub output: Option<PathBuf>,
    pub seed: Option<u64>,
    pub tol: Option<f64>,
}

#[derive(Debug, Clone, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GridConfig {
    /// uniform grid points per axis; when absent the adaptive tree is used
    pub n: Option<usize>,
    pub offset: Option<f64>,
    pub base_n: Option<usize>,
    pub floor: Option<f64>,
    pub eta: Option<f64>,
    pub max_leaves: Option<usize>,
}

impl RunConfig {
    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
        let ext = path.extension().and_then(|e| e.to_str()).unwrap_or("");
        let cfg: RunConfig = match ext {
            "json" => serde_json::from_str(&text).with_context(|| format!("parsing {}", path.display()))?,
            "toml" => toml::from_str(&text).with_context(|| format!("parsing {}", path.display()))?,
            _ => bail!("config {} must end in .toml or .json", path.display()),
        };
        let base = path.parent().unwrap_or(Path::new("."));
        Ok(RunConfig {
            model_file: cfg.model_file.map(|p| if p.is_relative() { base.join(p) } else { p }),
            ..cfg
        })
    }

    pub fn model(&self) -> Result<HoppingModel> {
        if let Some(path) = &self.model_file {
            return load_model_file(path);
        }
        let name = self.model.as_deref().unwrap_or("cubic3");
        let params = self.model_params.clone().unwrap_or_default();
        Ok(imbcs::builtin_model(name, &params)?)
    }

    pub fn sweep(&self, s: &Option<Sweep>, name: &str, default: Option<f64>) -> Result<Vec<f64>> {
        match (s, default) {
            (Some(s), _) => s.values().with_context(|| format!("parameter {name}")),
            (None, Some(d)) => Ok(vec![d]),
            (None, None) => bail!("parameter {name} is required"),
        }
    }

    /// Couplings, forced negative: a positive entry is read as `|U|`.
    pub fn couplings(&self, default: Option<f64>) -> Result<Vec<f64>> {
        let us = self.sweep(&self.u, "U", default)?;
        if us.iter().any(|&u| u == 0.0) {
            bail!("U must be nonzero");
        }
        Ok(us.into_iter().map(|u| -u.abs()).collect())
    }

    pub fn tol(&self) -> f64 {
        self.tol.unwrap_or(1e-12)
    }

    pub fn measure(&self, model: &HoppingModel, with_vectors: bool) -> Result<SpectralMeasure> {
        let g = self.grid.clone().unwrap_or_default();
        Ok(match g.n {
            Some(n) => SpectralMeasure::uniform(model, n, g.offset.unwrap_or(0.5), with_vectors)?,
            None => SpectralMeasure::adaptive(model, &self.adaptive(model), with_vectors)?,
        })
    }

    pub fn adaptive(&self, model: &HoppingModel) -> AdaptiveOpts {
        let g = self.grid.clone().unwrap_or_default();
        let def = AdaptiveOpts::default();
        let base = match model.dim() {
            1 | 2 => 32,
            3 => 16,
            4 => 10,
            _ => 6,
        };
        AdaptiveOpts {
            base_n: g.base_n.unwrap_or(base),
            floor: g.floor.unwrap_or(1e-5),
            eta: g.eta.unwrap_or(0.5),
            max_leaves: g.max_leaves.unwrap_or(def.max_leaves),
        }
    }
}

pub fn load_model_file(path: &Path) -> Result<HoppingModel> {
    let text = std::fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
    let mf: ModelFile = match path.extension().and_then(|e| e.to_str()) {
        Some("json") => serde_json::from_str(&text)?,
        _ => toml::from_str(&text).with_context(|| format!("parsing {}", path.display()))?,
    };
    let basis = ReciprocalBasis::from_real(mf.basis)?;
    Ok(HoppingModel::from_stencil(&mf.name, basis, mf.bands, mf.terms, mf.exponents, mf.const_a)?)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn sweeps() {
        assert_eq!(parse_sweep("1:2:3").unwrap(), vec![1.0, 1.5, 2.0]);
        assert_eq!(parse_sweep("0.25").unwrap(), vec![0.25]);
        assert!(parse_sweep("1:2:0").is_err());
        assert!(parse_sweep("1:2").is_err());
        assert!(parse_sweep("a:2:3").is_err());
    }
}
