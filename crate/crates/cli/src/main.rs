mod config;
mod identities;
mod table;

use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{bail, Context, Result};
use clap::{Args, Parser, Subcommand, ValueEnum};
use imbcs::covariance::{Covariance, CutoffFamily};
use imbcs::gap::{reduced_theta, solve_gap, solve_perturbed, Field, PhysParams};
use imbcs::lattice::verify_conditions;
use imbcs::phase::{smallness_bound, PhaseModel, PhaseScan};
use imbcs::thermo::{finite_volume_expectation, free_energy_density, observables, Quantity};
use imbcs::{Complex64, HoppingModel};
use rayon::prelude::*;

use config::{RunConfig, Sweep};
use table::{Cell, Table};

#[derive(Debug, Parser)]
#[command(name = "imbcs", version, about = "Reduced BCS model with an imaginary magnetic field")]
struct Cli {
    /// TOML or JSON run configuration; flags override its entries
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// write here instead of stdout
    #[arg(short, long, global = true)]
    output: Option<PathBuf>,
    #[arg(long, global = true, value_enum, default_value_t = Format::Csv)]
    format: Format,
    #[command(subcommand)]
    cmd: Cmd,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
enum Format {
    Csv,
    Json,
}

#[derive(Debug, Clone, Default, Args)]
struct ModelArgs {
    /// built-in model: cubic3, cubic4, honeycomb, square6band, aniso3d, flat5d
    #[arg(long)]
    model: Option<String>,
    /// model parameters, comma separated
    #[arg(long, value_delimiter = ',', allow_hyphen_values = true)]
    model_param: Option<Vec<f64>>,
    /// custom stencil model (TOML or JSON)
    #[arg(long)]
    model_file: Option<PathBuf>,
    /// uniform momentum grid points per axis instead of the adaptive tree
    #[arg(long)]
    grid_n: Option<usize>,
}

/// Scalars or `lo:hi:n` sweeps.
#[derive(Debug, Clone, Default, Args)]
struct PhysArgs {
    #[arg(long, allow_hyphen_values = true)]
    beta: Option<String>,
    #[arg(long, allow_hyphen_values = true)]
    theta: Option<String>,
    /// coupling; the sign is ignored and U = -|value| is used
    #[arg(short = 'U', long = "coupling", allow_hyphen_values = true)]
    u: Option<String>,
    #[arg(long, allow_hyphen_values = true)]
    gamma: Option<String>,
}

#[derive(Debug, Subcommand)]
enum Cmd {
    /// Gap equation solutions over a parameter sweep
    Gap {
        #[command(flatten)]
        model: ModelArgs,
        #[command(flatten)]
        phys: PhysArgs,
    },
    /// Mean-field free energy density at the gap solution
    FreeEnergy {
        #[command(flatten)]
        model: ModelArgs,
        #[command(flatten)]
        phys: PhysArgs,
    },
    /// Critical curves theta_c(beta) and optionally a classified grid
    PhaseDiagram {
        #[command(flatten)]
        model: ModelArgs,
        #[command(flatten)]
        phys: PhysArgs,
        /// highest period index m of the curves
        #[arg(long, default_value_t = 3)]
        mmax: u32,
        /// also write the (beta, theta) grid verdicts here as CSV
        #[arg(long)]
        points: Option<PathBuf>,
    },
    /// Order parameters and Cooper pair density in the infinite-volume limit
    Observables {
        #[command(flatten)]
        model: ModelArgs,
        #[command(flatten)]
        phys: PhysArgs,
    },
    /// Free covariance table on the discrete-time lattice (CSV only)
    Covariance {
        #[command(flatten)]
        model: ModelArgs,
        #[arg(long, allow_hyphen_values = true, default_value = "1")]
        beta: f64,
        #[arg(long, allow_hyphen_values = true, default_value = "0")]
        theta: f64,
        #[arg(long, allow_hyphen_values = true, default_value_t = 0.0)]
        phi_re: f64,
        #[arg(long, allow_hyphen_values = true, default_value_t = 0.0)]
        phi_im: f64,
        /// linear lattice size
        #[arg(short = 'L', long, default_value_t = 2)]
        l: usize,
        /// time step count per unit time; beta*h must be an even integer
        #[arg(long, default_value_t = 4.0)]
        h: f64,
        /// emit the single-scale covariance C_l instead of the full one
        #[arg(long, allow_hyphen_values = true)]
        scale: Option<i32>,
        /// scale ratio M of the cutoff family
        #[arg(long, default_value_t = 2.0)]
        m: f64,
    },
    /// Check the structural conditions on a hopping model
    VerifyModel {
        #[command(flatten)]
        model: ModelArgs,
        #[arg(long, default_value_t = 64)]
        samples: usize,
        #[arg(long, default_value_t = 1e-10)]
        tol: f64,
    },
    /// Run identity checks against exact diagonalization and Grassmann integration
    VerifyIdentities {
        #[arg(long, value_enum, default_value_t = identities::Suite::All)]
        suite: identities::Suite,
        #[arg(long)]
        seed: Option<u64>,
    },
    /// Finite-volume mean-field expectation values
    FiniteVolume {
        #[command(flatten)]
        model: ModelArgs,
        #[command(flatten)]
        phys: PhysArgs,
        /// linear lattice sizes, comma separated
        #[arg(short = 'L', long, value_delimiter = ',', default_value = "4")]
        l: Vec<usize>,
        /// ssb, odlro, cpd or logz
        #[arg(long, default_value = "cpd")]
        quantity: String,
    },
}

enum Outcome {
    Ok,
    Failed,
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { ExitCode::from(1) } else { ExitCode::SUCCESS };
        }
    };
    if let Err(e) = init_threads() {
        eprintln!("error: {e:#}");
        return ExitCode::from(1);
    }
    match run(cli) {
        Ok(Outcome::Ok) => ExitCode::SUCCESS,
        Ok(Outcome::Failed) => ExitCode::from(2),
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(1)
        }
    }
}

fn init_threads() -> Result<()> {
    if let Ok(v) = std::env::var("IMBCS_THREADS") {
        let n: usize = v.parse().with_context(|| format!("IMBCS_THREADS={v} is not a thread count"))?;
        rayon::ThreadPoolBuilder::new().num_threads(n).build_global()?;
    }
    Ok(())
}

fn load_config(cli: &Cli) -> Result<RunConfig> {
    match &cli.config {
        Some(p) => RunConfig::load(p),
        None => Ok(RunConfig::default()),
    }
}

fn apply_model(cfg: &mut RunConfig, m: &ModelArgs) {
    if m.model.is_some() || m.model_file.is_some() {
        cfg.model = m.model.clone();
        cfg.model_file = m.model_file.clone();
        cfg.model_params = None;
    }
    if m.model_param.is_some() {
        cfg.model_params = m.model_param.clone();
    }
    if let Some(n) = m.grid_n {
        cfg.grid.get_or_insert_with(Default::default).n = Some(n);
    }
}

fn apply_phys(cfg: &mut RunConfig, p: &PhysArgs) {
    let set = |slot: &mut Option<Sweep>, v: &Option<String>| {
        if let Some(s) = v {
            *slot = Some(Sweep::Text(s.clone()));
        }
    };
    set(&mut cfg.beta, &p.beta);
    set(&mut cfg.theta, &p.theta);
    set(&mut cfg.u, &p.u);
    set(&mut cfg.gamma, &p.gamma);
}

fn emit(cli: &Cli, cfg: &RunConfig, body: &str) -> Result<()> {
    match cli.output.as_ref().or(cfg.output.as_ref()) {
        Some(p) => write_file(p, body),
        None => {
            print!("{body}");
            Ok(())
        }
    }
}

fn write_file(p: &Path, body: &str) -> Result<()> {
    std::fs::write(p, body).with_context(|| format!("writing {}", p.display()))
}

fn render(cli: &Cli, t: &Table) -> String {
    match cli.format {
        Format::Csv => t.to_csv(),
        Format::Json => t.to_json(),
    }
}

/// Cartesian product in row-major order, last factor fastest.
fn grid4(a: &[f64], b: &[f64], c: &[f64], d: &[f64]) -> Vec<[f64; 4]> {
    let mut out = Vec::with_capacity(a.len() * b.len() * c.len() * d.len());
    for &x in a {
        for &y in b {
            for &z in c {
                for &w in d {
                    out.push([x, y, z, w]);
                }
            }
        }
    }
    out
}

struct Sweeps {
    points: Vec<[f64; 4]>,
}

fn sweeps(cfg: &RunConfig) -> Result<Sweeps> {
    let betas = cfg.sweep(&cfg.beta, "beta", Some(1.0))?;
    if betas.iter().any(|&b| !(b > 0.0)) {
        bail!("beta must be positive");
    }
    let thetas = cfg.sweep(&cfg.theta, "theta", Some(0.0))?;
    let us = cfg.couplings(None)?;
    let gammas = cfg.sweep(&cfg.gamma, "gamma", Some(0.0))?;
    Ok(Sweeps {
        points: grid4(&betas, &thetas, &us, &gammas),
    })
}

/// Maps `f` over the sweep on the worker pool; rows keep sweep order.
fn sweep_rows<F>(pts: &[[f64; 4]], f: F) -> Result<Vec<Vec<Cell>>>
where
    F: Fn([f64; 4]) -> Result<Vec<Cell>> + Sync,
{
    pts.par_iter().map(|&p| f(p)).collect()
}

fn run(cli: Cli) -> Result<Outcome> {
    let mut cfg = load_config(&cli)?;
    match &cli.cmd {
        Cmd::Gap { model, phys } => {
            apply_model(&mut cfg, model);
            apply_phys(&mut cfg, phys);
            let m = cfg.model().context("lattice_models")?;
            let meas = cfg.measure(&m, false).context("quadrature")?;
            let tol = cfg.tol();
            let mut t = Table::new(&[
                "beta",
                "theta",
                "U",
                "gamma",
                "theta_reduced",
                "delta",
                "residual",
                "solvable",
                "g0",
                "a_gamma",
            ]);
            t.rows = sweep_rows(&sweeps(&cfg)?.points, |[b, th, u, g]| {
                let p = PhysParams::new(b, th, u, g)?;
                let sol = solve_gap(&meas, &p.field(), u, tol)?;
                let a = if g > 0.0 {
                    Some(solve_perturbed(&meas, &p.field(), u, g, tol)?)
                } else {
                    None
                };
                Ok(vec![
                    b.into(),
                    th.into(),
                    u.into(),
                    g.into(),
                    p.theta_reduced().into(),
                    sol.delta.into(),
                    sol.residual.into(),
                    sol.solvable.into(),
                    sol.criterion_value.into(),
                    a.into(),
                ])
            })
            .context("gap_solver")?;
            emit(&cli, &cfg, &render(&cli, &t))?;
        }
        Cmd::FreeEnergy { model, phys } => {
            apply_model(&mut cfg, model);
            apply_phys(&mut cfg, phys);
            let m = cfg.model().context("lattice_models")?;
            let meas = cfg.measure(&m, false).context("quadrature")?;
            let tol = cfg.tol();
            let mut t = Table::new(&["beta", "theta", "U", "theta_reduced", "delta", "free_energy"]);
            let pts: Vec<[f64; 4]> = sweeps(&cfg)?.points.into_iter().filter(|p| p[3] == 0.0).collect();
            if pts.is_empty() {
                bail!("free-energy is defined at gamma = 0");
            }
            t.rows = sweep_rows(&pts, |[b, th, u, _]| {
                let f = Field::from_theta(b, th);
                let sol = solve_gap(&meas, &f, u, tol)?;
                let fe = free_energy_density(&meas, &f, u, sol.delta)?;
                Ok(vec![
                    b.into(),
                    th.into(),
                    u.into(),
                    reduced_theta(b, th).into(),
                    sol.delta.into(),
                    fe.into(),
                ])
            })
            .context("thermodynamics")?;
            emit(&cli, &cfg, &render(&cli, &t))?;
        }
        Cmd::PhaseDiagram {
            model,
            phys,
            mmax,
            points,
        } => {
            apply_model(&mut cfg, model);
            apply_phys(&mut cfg, phys);
            let m = cfg.model().context("lattice_models")?;
            let bound = smallness_bound(&m, &cfg.adaptive(&m)).context("phase_diagram")?;
            let meas = cfg.measure(&m, false).context("quadrature")?;
            let us = cfg.couplings(None)?;
            let [u] = us.as_slice() else {
                bail!("phase-diagram takes a single U");
            };
            let betas = cfg.sweep(&cfg.beta, "beta", None)?;
            let thetas = match &cfg.theta {
                Some(s) => s.values().context("parameter theta")?,
                None => Vec::new(),
            };
            let pm = PhaseModel::new(&meas, *u, bound).context("phase_diagram")?;
            // one scan per beta, so a beta whose critical field is below double
            // precision is reported rather than aborting the sweep
            let per_beta: Vec<imbcs::Result<PhaseScan>> = betas.par_iter().map(|&b| pm.scan(&[b], &thetas, *mmax)).collect();
            let mut t = Table::new(&["beta", "theta_c", "j", "m", "resolved"]);
            let mut pts = String::from("beta,theta,delta,in_phase,m_index\n");
            let mut unresolved = 0;
            for (&b, r) in betas.iter().zip(per_beta) {
                match r {
                    Ok(scan) => {
                        for c in &scan.curves {
                            t.push(vec![c.beta.into(), c.theta_c.into(), usize::from(c.j).into(), (c.m as usize).into(), true.into()]);
                        }
                        pts.extend(scan.points_csv().lines().skip(1).map(|l| format!("{l}\n")));
                    }
                    Err(e @ imbcs::Error::NoRoot(_)) => {
                        unresolved += 1;
                        eprintln!("phase_diagram: {e}");
                        for m in 0..=*mmax {
                            for j in [1usize, 2] {
                                t.push(vec![b.into(), Cell::Empty, j.into(), (m as usize).into(), false.into()]);
                            }
                        }
                    }
                    Err(e) => return Err(anyhow::Error::new(e).context("phase_diagram")),
                }
            }
            if unresolved == betas.len() {
                bail!("phase_diagram: no beta in the sweep has a resolvable critical field");
            }
            if let Some(p) = points {
                write_file(p, &pts)?;
            }
            emit(&cli, &cfg, &render(&cli, &t))?;
        }
        Cmd::Observables { model, phys } => {
            apply_model(&mut cfg, model);
            apply_phys(&mut cfg, phys);
            let m = cfg.model().context("lattice_models")?;
            let meas = cfg.measure(&m, m.bands > 1).context("quadrature")?;
            let tol = cfg.tol();
            let b = m.bands;
            let mut header: Vec<String> = ["beta", "theta", "U", "delta", "free_energy", "cooper_pair_density"]
                .iter()
                .map(|s| s.to_string())
                .collect();
            header.extend((0..b).map(|r| format!("ssb_{r}")));
            header.extend((0..b).flat_map(|r| (0..b).map(move |e| format!("odlro_{r}_{e}"))));
            let names: Vec<&str> = header.iter().map(String::as_str).collect();
            let mut t = Table::new(&names);
            let pts: Vec<[f64; 4]> = sweeps(&cfg)?.points.into_iter().filter(|p| p[3] == 0.0).collect();
            if pts.is_empty() {
                bail!("observables are defined at gamma = 0");
            }
            t.rows = sweep_rows(&pts, |[beta, th, u, _]| {
                let o = observables(&meas, &Field::from_theta(beta, th), u, tol)?;
                let mut row: Vec<Cell> = vec![
                    beta.into(),
                    th.into(),
                    u.into(),
                    o.delta.into(),
                    o.free_energy.into(),
                    o.cooper_pair_density.into(),
                ];
                row.extend(o.ssb_per_band.iter().map(|&v| Cell::from(v)));
                row.extend(o.odlro.iter().flatten().map(|&v| Cell::from(v)));
                Ok(row)
            })
            .context("thermodynamics")?;
            emit(&cli, &cfg, &render(&cli, &t))?;
        }
        Cmd::Covariance {
            model,
            beta,
            theta,
            phi_re,
            phi_im,
            l,
            h,
            scale,
            m: ratio,
        } => {
            if cli.format == Format::Json {
                bail!("covariance tables are written as CSV only");
            }
            apply_model(&mut cfg, model);
            let m = cfg.model().context("lattice_models")?;
            let cov = Covariance::new(&m, *beta, *theta, Complex64::new(*phi_re, *phi_im), *l).context("covariance_engine")?;
            let table = match scale {
                None => cov.table(*h),
                Some(s) => CutoffFamily::new(*ratio, *h, *beta).and_then(|fam| cov.scale_table(&fam, *s)),
            }
            .context("covariance_engine")?;
            emit(&cli, &cfg, &table.to_csv())?;
        }
        Cmd::VerifyModel { model, samples, tol } => {
            apply_model(&mut cfg, model);
            let m: HoppingModel = cfg.model().context("lattice_models")?;
            let rep = verify_conditions(&m, *samples, *tol);
            let body = match cli.format {
                Format::Json => {
                    let mut s = serde_json::to_string_pretty(&rep)?;
                    s.push('\n');
                    s
                }
                Format::Csv => {
                    let mut t = Table::new(&["model", "condition", "pass", "value", "detail"]);
                    for e in &rep.entries {
                        t.push(vec![
                            rep.model.as_str().into(),
                            e.name.as_str().into(),
                            e.pass.into(),
                            e.value.into(),
                            e.detail.as_str().into(),
                        ]);
                    }
                    t.to_csv()
                }
            };
            emit(&cli, &cfg, &body)?;
            if !rep.all_pass() {
                eprintln!("lattice_models: model {} fails at least one condition", rep.model);
                return Ok(Outcome::Failed);
            }
        }
        Cmd::VerifyIdentities { suite, seed } => {
            let seed = seed.or(cfg.seed).unwrap_or(7);
            let t = identities::run(*suite, seed).context("grassmann_desk")?;
            emit(&cli, &cfg, &render(&cli, &t))?;
            let failed = t.rows.iter().filter(|r| r.last() == Some(&Cell::Bool(false))).count();
            if failed > 0 {
                eprintln!("{failed} identity check(s) failed");
                return Ok(Outcome::Failed);
            }
        }
        Cmd::FiniteVolume {
            model,
            phys,
            l,
            quantity,
        } => {
            apply_model(&mut cfg, model);
            apply_phys(&mut cfg, phys);
            let m = cfg.model().context("lattice_models")?;
            let q: Quantity = quantity.parse().context("thermodynamics")?;
            if l.iter().any(|&l| l == 0) {
                bail!("lattice sizes must be positive");
            }
            let mut t = Table::new(&["L", "beta", "theta", "U", "gamma", "quantity", "value", "imag", "maximizer", "width"]);
            let pts: Vec<(usize, [f64; 4])> =
                sweeps(&cfg)?.points.iter().flat_map(|&p| l.iter().map(move |&l| (l, p))).collect();
            t.rows = pts
                .par_iter()
                .map(|&(l, [b, th, u, g])| -> Result<Vec<Cell>> {
                    let p = PhysParams::new(b, th, u, g)?;
                    let v = finite_volume_expectation(&m, &p, l, q, true)?;
                    Ok(vec![
                        l.into(),
                        b.into(),
                        th.into(),
                        u.into(),
                        g.into(),
                        quantity.to_ascii_lowercase().into(),
                        v.value.into(),
                        v.imag.into(),
                        v.maximizer.into(),
                        v.width.into(),
                    ])
                })
                .collect::<Result<_>>()
                .context("thermodynamics")?;
            emit(&cli, &cfg, &render(&cli, &t))?;
        }
    }
    Ok(Outcome::Ok)
}
