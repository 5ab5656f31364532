//! Suites behind `verify-identities`. Each row is one check with its
//! measured value and the threshold it is held to.

use std::f64::consts::PI;

use anyhow::{Context, Result};
use clap::ValueEnum;
use imbcs::covariance::{matsubara_frequencies, Covariance, CutoffFamily, Point};
use imbcs::ed::{thermal_traces, trace_exp, ParticleHoleSystem, SpinfulSystem};
use imbcs::grassmann::{
    first_formulation_check, hubbard_stratonovich_check, vanishing_property_demo, FormulationParams,
};
use imbcs::{builtin_model, Complex64 as C64, HoppingModel};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::table::Table;

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum Suite {
    All,
    FreePartition,
    Covariance,
    Reality,
    HubbardStratonovich,
    Vanishing,
    FirstFormulation,
    Determinant,
    Multiscale,
}

impl Suite {
    fn name(self) -> &'static str {
        match self {
            Suite::All => "all",
            Suite::FreePartition => "free-partition",
            Suite::Covariance => "covariance",
            Suite::Reality => "reality",
            Suite::HubbardStratonovich => "hubbard-stratonovich",
            Suite::Vanishing => "vanishing",
            Suite::FirstFormulation => "first-formulation",
            Suite::Determinant => "determinant",
            Suite::Multiscale => "multiscale",
        }
    }
}

const SUITES: [Suite; 8] = [
    Suite::FreePartition,
    Suite::Covariance,
    Suite::Reality,
    Suite::HubbardStratonovich,
    Suite::Vanishing,
    Suite::FirstFormulation,
    Suite::Determinant,
    Suite::Multiscale,
];

struct Rows<'a> {
    suite: &'static str,
    table: &'a mut Table,
}

impl Rows<'_> {
    /// `value ≤ threshold` passes.
    fn below(&mut self, check: &str, value: f64, threshold: f64) {
        self.row(check, value, threshold, value <= threshold, "max");
    }

    /// `value ≥ threshold` passes.
    fn above(&mut self, check: &str, value: f64, threshold: f64) {
        self.row(check, value, threshold, value >= threshold, "min");
    }

    fn row(&mut self, check: &str, value: f64, threshold: f64, pass: bool, kind: &str) {
        self.table.push(vec![
            self.suite.into(),
            check.into(),
            value.into(),
            kind.into(),
            threshold.into(),
            pass.into(),
        ]);
    }
}

fn chain() -> HoppingModel {
    HoppingModel::chain(1.0, 0.3, 1)
}

fn rel(a: C64, b: C64) -> f64 {
    (a - b).norm() / b.norm()
}

pub fn run(suite: Suite, seed: u64) -> Result<Table> {
    let mut table = Table::new(&["suite", "check", "value", "kind", "threshold", "pass"]);
    let list: Vec<Suite> = if suite == Suite::All { SUITES.to_vec() } else { vec![suite] };
    for s in list {
        let mut rows = Rows {
            suite: s.name(),
            table: &mut table,
        };
        run_one(s, seed, &mut rows).with_context(|| format!("suite {}", s.name()))?;
    }
    Ok(table)
}

fn run_one(s: Suite, seed: u64, rows: &mut Rows) -> Result<()> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    match s {
        Suite::All => unreachable!("expanded by the caller"),
        Suite::FreePartition => {
            let m = chain();
            let (beta, theta) = (1.0, 1.3);
            let sys = SpinfulSystem::new(&m, 2)?;
            let z = trace_exp(&sys.free_generator(theta)?, beta)?;
            rows.below("trace vs product", rel(z, sys.free_partition_product(beta, theta)?), 1e-10);
            rows.below("trace vs cosh product", rel(z, sys.free_partition_product_cosh(beta, theta)?), 1e-10);
            let ph = ParticleHoleSystem::new(&m, 2)?;
            for phi in [C64::new(0.0, 0.0), C64::new(0.7, 0.0), C64::new(1.0, 1.0)] {
                let zf = trace_exp(&ph.h0_phi(theta, phi)?, beta)?;
                rows.below(&format!("field trace phi={phi}"), rel(zf, ph.partition_product(beta, theta, phi)?), 1e-10);
            }
        }
        Suite::Covariance => {
            let m = chain();
            let (beta, theta) = (1.0, 1.3);
            let sys = ParticleHoleSystem::new(&m, 2)?;
            for phi in [C64::new(0.0, 0.0), C64::new(0.7, 0.0)] {
                let cov = Covariance::new(&m, beta, theta, phi, 2)?;
                let mut worst: f64 = 0.0;
                for _ in 0..64 {
                    let mut pt = || Point::new(rng.gen_range(0..2), 0, vec![rng.gen_range(0..2)], rng.gen_range(0.0..beta));
                    let (x, y) = (pt(), pt());
                    worst = worst.max((sys.two_point(beta, theta, phi, &x, &y)? - cov.continuum(&x, &y)?).norm());
                }
                rows.below(&format!("exact vs continuum phi={phi}"), worst, 1e-10);
            }
        }
        Suite::Reality => {
            let sys = SpinfulSystem::new(&HoppingModel::chain(1.0, 0.2, 1), 2)?;
            let mut im: f64 = 0.0;
            let mut pair: f64 = 0.0;
            let mut period: f64 = 0.0;
            for _ in 0..4 {
                let beta = rng.gen_range(0.5..2.0);
                let theta = rng.gen_range(0.0..4.0 * PI / beta);
                let u = -rng.gen_range(0.1..1.0);
                let gamma = rng.gen_range(0.0..0.5);
                let t = thermal_traces(&sys, beta, theta, u, gamma)?;
                for z in [t.z, t.pair_create, t.pair_pair, t.pair_annihilate] {
                    im = im.max(z.im.abs() / z.norm().max(1.0));
                }
                pair = pair.max((t.pair_create - t.pair_annihilate).norm() / t.z.norm());
                let s = thermal_traces(&sys, beta, theta + 4.0 * PI / beta, u, gamma)?;
                period = period.max(rel(s.z, t.z)).max(rel(s.pair_pair, t.pair_pair));
            }
            rows.below("imaginary parts", im, 1e-10);
            rows.below("pair creation vs annihilation", pair, 1e-10);
            rows.below("theta period 4pi/beta", period, 1e-10);
        }
        Suite::HubbardStratonovich => {
            let m = HoppingModel::chain(1.0, 0.4, 1);
            for i in 0..3 {
                let beta = 1.0;
                let p = FormulationParams {
                    beta,
                    theta: rng.gen_range(0.05..1.95) * PI / beta,
                    u: -rng.gen_range(0.1..1.0),
                    gamma: rng.gen_range(0.0..0.5),
                    lambda: [C64::new(0.0, 0.0); 2],
                };
                let r = hubbard_stratonovich_check(&m, 1, &p, 4.0, 24)?;
                rows.below(&format!("draw {i}: theta={:.4} U={:.4} gamma={:.4}", p.theta, p.u, p.gamma), r.residual, 1e-8);
            }
        }
        Suite::Vanishing => {
            let r = vanishing_property_demo(3, 2, 0.7, seed)?;
            rows.below("integral with random f", r.value.norm(), 1e-12);
            rows.below("integral with f = 1", r.with_unit_f.norm(), 1e-12);
            rows.above("time-dependent control", r.control.norm(), 1e-6);
        }
        Suite::FirstFormulation => {
            let p = FormulationParams {
                beta: 1.0,
                theta: 1.0,
                u: -0.3,
                gamma: 0.2,
                lambda: [C64::new(0.0, 0.0); 2],
            };
            let r = first_formulation_check(&chain(), 1, &p, &[2.0, 4.0, 6.0])?;
            for row in &r.rows {
                rows.below(&format!("gap at h={}", row.h), row.gap, f64::INFINITY);
            }
            rows.row("gap decreasing in h", f64::from(u8::from(r.decreasing)), 1.0, r.decreasing, "min");
            rows.below("final gap", r.final_gap(), 5e-2);
        }
        Suite::Determinant => {
            let m = builtin_model("honeycomb", &[])?;
            for phi in [C64::new(0.0, 0.0), C64::new(1.0, 0.0), C64::new(0.0, 3.0)] {
                let cov = Covariance::new(&m, 1.0, 0.6, phi, 2)?;
                let r = cov.determinant_bound_check(1000, 6, seed)?;
                rows.below(&format!("violations of |det| <= D^n phi={phi}"), r.violations as f64, 0.0);
            }
        }
        Suite::Multiscale => {
            let (beta, h) = (1.0, 16.0);
            let fam = CutoffFamily::new(2.0, h, beta)?;
            let honey = builtin_model("honeycomb", &[])?;
            let freqs = matsubara_frequencies(beta, h)?;
            let mut unity: f64 = 0.0;
            for _ in 0..1000 {
                let om = freqs[rng.gen_range(0..freqs.len())];
                let k: Vec<f64> = (0..2).map(|_| rng.gen_range(-PI..PI)).collect();
                unity = unity.max(fam.unity_residual(om, honey.envelope(&k)));
            }
            rows.below("partition of unity", unity, 1e-12);
            let cov = Covariance::new(&chain(), beta, 1.0, C64::new(0.3, 0.0), 2)?;
            let pts: Vec<Point> = (0..2)
                .flat_map(|ph| (0..2).flat_map(move |x| (0..16).map(move |k| Point::new(ph, 0, vec![x], k as f64 / h))))
                .collect();
            let pairs: Vec<(Point, Point)> = pts.iter().flat_map(|x| pts.iter().map(move |y| (x.clone(), y.clone()))).collect();
            rows.below("scale sum", cov.scale_sum_residual(&fam, &pairs)?, 1e-10);
        }
    }
    Ok(())
}
