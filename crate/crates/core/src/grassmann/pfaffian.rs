use std::collections::HashMap;

use nalgebra::DMatrix;
use num_complex::Complex64 as C64;

/// Pfaffian by Parlett–Reid reduction with row/column pivoting.
pub fn pfaffian(a: &DMatrix<C64>) -> C64 {
    let n = a.nrows();
    assert_eq!(n, a.ncols());
    if n % 2 == 1 {
        return C64::new(0.0, 0.0);
    }
    let mut a = a.clone();
    let mut pf = C64::new(1.0, 0.0);
    for k in (0..n.saturating_sub(1)).step_by(2) {
        let kp = (k + 1..n).max_by(|&i, &j| a[(i, k)].norm().total_cmp(&a[(j, k)].norm())).unwrap();
        if kp != k + 1 {
            a.swap_rows(k + 1, kp);
            a.swap_columns(k + 1, kp);
            pf = -pf;
        }
        let piv = a[(k, k + 1)];
        if piv.norm() == 0.0 {
            return C64::new(0.0, 0.0);
        }
        pf *= piv;
        if k + 2 < n {
            let tau: Vec<C64> = (k + 2..n).map(|j| a[(k, j)] / piv).collect();
            let col: Vec<C64> = (k + 2..n).map(|i| a[(i, k + 1)]).collect();
            for (ii, i) in (k + 2..n).enumerate() {
                for (jj, j) in (k + 2..n).enumerate() {
                    a[(i, j)] += tau[ii] * col[jj] - col[ii] * tau[jj];
                }
            }
        }
    }
    pf
}

/// Expansion along the first row, memoized on index subsets. Exponential
/// cost; used as an independent reference.
pub fn pfaffian_recursive(a: &DMatrix<C64>) -> C64 {
    let n = a.nrows();
    assert!(n <= 28, "recursive Pfaffian limited to 28 rows");
    fn go(a: &DMatrix<C64>, mask: u32, memo: &mut HashMap<u32, C64>) -> C64 {
        if mask == 0 {
            return C64::new(1.0, 0.0);
        }
        if mask.count_ones() % 2 == 1 {
            return C64::new(0.0, 0.0);
        }
        if let Some(v) = memo.get(&mask) {
            return *v;
        }
        let i = mask.trailing_zeros() as usize;
        let rest = mask & !(1 << i);
        let mut acc = C64::new(0.0, 0.0);
        let mut sign = 1.0;
        let mut m = rest;
        while m != 0 {
            let j = m.trailing_zeros() as usize;
            m &= m - 1;
            let aij = a[(i, j)];
            if aij.norm() != 0.0 {
                acc += aij * sign * go(a, rest & !(1 << j), memo);
            }
            sign = -sign;
        }
        memo.insert(mask, acc);
        acc
    }
    let full = if n == 32 { u32::MAX } else { (1u32 << n) - 1 };
    go(a, full, &mut HashMap::new())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn two_by_two_and_block() {
        let z = C64::new(0.0, 0.0);
        let a = DMatrix::from_row_slice(2, 2, &[z, C64::new(2.0, 1.0), -C64::new(2.0, 1.0), z]);
        assert_eq!(pfaffian(&a), C64::new(2.0, 1.0));
        assert_eq!(pfaffian_recursive(&a), C64::new(2.0, 1.0));
        // Pf of a 4×4: a01 a23 − a02 a13 + a03 a12
        let v = [1.0, 2.0, 3.0, 4.0, 5.0, 6.0];
        let mut m = DMatrix::<C64>::zeros(4, 4);
        let mut it = v.iter();
        for i in 0..4 {
            for j in i + 1..4 {
                let x = C64::new(*it.next().unwrap(), 0.0);
                m[(i, j)] = x;
                m[(j, i)] = -x;
            }
        }
        let want = 1.0 * 6.0 - 2.0 * 5.0 + 3.0 * 4.0;
        assert!((pfaffian(&m).re - want).abs() < 1e-12);
        assert!((pfaffian_recursive(&m).re - want).abs() < 1e-12);
    }
}
