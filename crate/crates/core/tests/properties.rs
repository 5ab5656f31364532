use std::f64::consts::PI;

use imbcs::covariance::{chi, fermi_kernel, CutoffFamily};
use imbcs::gap::{g_value, reduced_theta, Field};
use imbcs::grassmann::{gaussian_integral, pfaffian, pfaffian_recursive, GrassmannPoly, WickCovariance};
use imbcs::{builtin_model, Complex64 as C64, SpectralMeasure};
use nalgebra::DMatrix;
use proptest::prelude::*;

const N: usize = 6;

fn poly_from(n: usize, terms: &[(u32, f64, f64)]) -> GrassmannPoly {
    let mut p = GrassmannPoly::zero(n).unwrap();
    for &(mask, re, im) in terms {
        let gens: Vec<usize> = (0..n).filter(|&i| mask >> i & 1 == 1).collect();
        p.add_assign(&GrassmannPoly::monomial(n, &gens, C64::new(re, im)).unwrap());
    }
    p
}

fn terms(max_mask: u32, even: bool) -> impl Strategy<Value = Vec<(u32, f64, f64)>> {
    prop::collection::vec((0..max_mask, -1.0..1.0f64, -1.0..1.0f64), 1..8).prop_map(move |v| {
        v.into_iter().filter(|t| !even || t.0.count_ones() % 2 == 0).collect()
    })
}

fn antisym(n: usize, vals: &[(f64, f64)]) -> DMatrix<C64> {
    let mut a = DMatrix::zeros(n, n);
    let mut k = 0;
    for i in 0..n {
        for j in i + 1..n {
            let z = C64::new(vals[k].0, vals[k].1);
            a[(i, j)] = z;
            a[(j, i)] = -z;
            k += 1;
        }
    }
    a
}

fn entries(n: usize) -> impl Strategy<Value = Vec<(f64, f64)>> {
    prop::collection::vec((-1.0..1.0f64, -1.0..1.0f64), n * (n - 1) / 2)
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn product_is_associative(a in terms(1 << N, false), b in terms(1 << N, false), c in terms(1 << N, false)) {
        let (a, b, c) = (poly_from(N, &a), poly_from(N, &b), poly_from(N, &c));
        prop_assert!(a.mul(&b).mul(&c).max_abs_diff(&a.mul(&b.mul(&c))) < 1e-12);
    }

    #[test]
    fn generators_anticommute(i in 0..N, j in 0..N) {
        let (gi, gj) = (GrassmannPoly::generator(N, i).unwrap(), GrassmannPoly::generator(N, j).unwrap());
        prop_assert!(gi.mul(&gj).add(&gj.mul(&gi)).max_abs_diff(&GrassmannPoly::zero(N).unwrap()) == 0.0);
    }

    #[test]
    fn even_elements_are_central(e in terms(1 << N, true), f in terms(1 << N, false)) {
        let (e, f) = (poly_from(N, &e), poly_from(N, &f));
        prop_assert!(e.mul(&f).max_abs_diff(&f.mul(&e)) < 1e-12);
    }

    #[test]
    fn exponential_inverse(v in terms(1 << N, true)) {
        let mut v = poly_from(N, &v);
        let c0 = v.constant_term();
        v = v.sub(&GrassmannPoly::constant(N, c0).unwrap());
        let p = v.exp_even().unwrap().mul(&v.scale(C64::new(-1.0, 0.0)).exp_even().unwrap());
        prop_assert!(p.max_abs_diff(&GrassmannPoly::one(N).unwrap()) < 1e-12);
    }

    #[test]
    fn pfaffian_squares_to_determinant(n in 1usize..=6, vals in entries(6)) {
        let a = antisym(n, &vals);
        let pf = pfaffian(&a);
        let det = a.determinant();
        prop_assert!((pf * pf - det).norm() <= 1e-8 * det.norm().max(1.0));
        prop_assert!((pf - pfaffian_recursive(&a)).norm() <= 1e-12 * pf.norm().max(1.0));
    }

    #[test]
    fn quadratic_shift(pairs in 1usize..=4, a in prop::collection::vec((-1.0..1.0f64, -1.0..1.0f64), 16),
                       c in prop::collection::vec((-1.0..1.0f64, -1.0..1.0f64), 16)) {
        let n = 2 * pairs;
        let am = DMatrix::from_fn(pairs, pairs, |i, j| C64::new(a[i * 4 + j].0, a[i * 4 + j].1));
        let cm = DMatrix::from_fn(pairs, pairs, |i, j| C64::new(c[i * 4 + j].0, c[i * 4 + j].1));
        let mut q = GrassmannPoly::zero(n).unwrap();
        for x in 0..pairs {
            for y in 0..pairs {
                q.add_assign(&GrassmannPoly::monomial(n, &[2 * x, 2 * y + 1], am[(x, y)]).unwrap());
            }
        }
        let cov = WickCovariance::from_two_point(&cm).unwrap();
        let lhs = gaussian_integral(&q.exp_even().unwrap(), &cov).unwrap();
        let rhs = (DMatrix::identity(pairs, pairs) + am.transpose() * &cm).determinant();
        prop_assert!((lhs - rhs).norm() < 1e-10 * rhs.norm().max(1.0), "{lhs} {rhs}");
    }

    #[test]
    fn disjoint_blocks_factorize(v1 in entries(4), v2 in entries(4), f in terms(1 << 4, false), g in terms(1 << 4, false)) {
        let (b1, b2) = (antisym(4, &v1), antisym(4, &v2));
        let mut big = DMatrix::zeros(8, 8);
        big.view_mut((0, 0), (4, 4)).copy_from(&b1);
        big.view_mut((4, 4), (4, 4)).copy_from(&b2);
        let f8 = poly_from(8, &f);
        let shifted: Vec<(u32, f64, f64)> = g.iter().map(|&(m, re, im)| (m << 4, re, im)).collect();
        let g8 = poly_from(8, &shifted);
        let whole = gaussian_integral(&f8.mul(&g8), &WickCovariance::new(big).unwrap()).unwrap();
        let i1 = gaussian_integral(&poly_from(4, &f), &WickCovariance::new(b1).unwrap()).unwrap();
        let i2 = gaussian_integral(&poly_from(4, &g), &WickCovariance::new(b2).unwrap()).unwrap();
        prop_assert!((whole - i1 * i2).norm() < 1e-12);
    }

    #[test]
    fn theta_reduction(beta in 0.1..20.0f64, theta in -50.0..50.0f64, m in -3i32..3) {
        let r = reduced_theta(beta, theta);
        prop_assert!((0.0..=2.0 * PI / beta * (1.0 + 1e-12)).contains(&r));
        let shifted = reduced_theta(beta, theta + 4.0 * PI / beta * m as f64);
        prop_assert!((shifted - r).abs() < 1e-9 * (1.0 + theta.abs()) * beta);
        prop_assert!((reduced_theta(beta, -theta) - r).abs() < 1e-9 * (1.0 + theta.abs()) * beta);
        let f = Field::from_theta(beta, theta);
        let d = Field::from_distance(beta, f.distance());
        prop_assert!((f.opc - d.opc).abs() < 1e-9 && (f.c - d.c).abs() < 1e-9);
    }

    #[test]
    fn kernel_antiperiodic(beta in 0.2..5.0f64, frac in 0.0..1.0f64, tau in 0.01..0.99f64, lambda in -10.0..10.0f64) {
        let theta = frac * 2.0 * PI / beta * 0.98;
        let t = tau * beta;
        let a = fermi_kernel(beta, theta, lambda, t - beta).unwrap();
        let b = fermi_kernel(beta, theta, lambda, t).unwrap();
        prop_assert!((a + b).norm() < 1e-12 * (1.0 + b.norm()));
    }

    #[test]
    fn cutoff_partition(beta in 0.1..20.0f64, extra in 0usize..200, n in -200i64..200, e in 0.0..12.0f64) {
        // the partition needs h ≥ max(2, sup e), with βh an even integer
        let half_steps = (e.max(2.0) * beta / 2.0).ceil() as usize + extra;
        let h = 2.0 * half_steps as f64 / beta;
        let fam = CutoffFamily::new(2.0, h, beta).unwrap();
        let om = (2 * n + 1) as f64 * PI / beta;
        prop_assert!(fam.unity_residual(om, e) < 1e-12);
        for l in fam.scales() {
            let v = fam.chi_l(l, om, e);
            prop_assert!((0.0..=1.0).contains(&v));
        }
        prop_assert!(chi(1.6 * (1.0 - 1e-9)) == 1.0 && chi(2.0) == 0.0);
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(24))]

    #[test]
    fn gap_function_decreases(beta in 0.25..16.0f64, frac in 0.0..0.999f64, u in 0.05..5.0f64) {
        let m = builtin_model("honeycomb", &[]).unwrap();
        let meas = SpectralMeasure::uniform(&m, 24, 0.5, false).unwrap();
        let f = Field::from_distance(beta, (1.0 - frac) * PI / beta);
        let mut prev = f64::INFINITY;
        for k in 0..=40 {
            let z = 10.0 * k as f64 / 40.0;
            let v = g_value(&meas, &f, -u, z);
            prop_assert!(v < prev);
            prev = v;
        }
    }
}

#[test]
fn cutoff_partition_fails_below_h_bound() {
    // h = 2/β < e: the top scale no longer covers the envelope
    let beta = 9.05;
    let fam = CutoffFamily::new(2.0, 2.0 / beta, beta).unwrap();
    assert_eq!(fam.unity_residual(PI / beta, 10.58), 1.0);
    assert!(fam.unity_residual(PI / beta, 0.1) < 1e-12);
}
