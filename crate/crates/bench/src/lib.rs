//! Shared fixtures for the benchmarks.

use imbcs::{builtin_model, Complex64, HoppingModel};
use nalgebra::DMatrix;

pub fn model(name: &str) -> HoppingModel {
    builtin_model(name, &[]).expect("built-in model")
}

/// Deterministic antisymmetric `n×n` matrix.
pub fn antisymmetric(n: usize) -> DMatrix<Complex64> {
    DMatrix::from_fn(n, n, |i, j| {
        let v = Complex64::new(((3 * i + 7 * j) % 11) as f64 - 5.0, ((5 * i + j) % 7) as f64 - 3.0) / 4.0;
        match i.cmp(&j) {
            std::cmp::Ordering::Less => v,
            std::cmp::Ordering::Greater => -Complex64::new(((3 * j + 7 * i) % 11) as f64 - 5.0, ((5 * j + i) % 7) as f64 - 3.0) / 4.0,
            std::cmp::Ordering::Equal => Complex64::new(0.0, 0.0),
        }
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn fixture_is_antisymmetric() {
        let a = antisymmetric(9);
        assert!((&a + a.transpose()).norm() == 0.0);
    }
}
