/// Inverts a row-major `n x n` matrix in place by Gauss-Jordan elimination
/// with partial pivoting. Returns the smallest pivot magnitude encountered,
/// or `None` if the matrix is numerically singular.
pub(crate) fn invert_in_place(a: &mut [f64], n: usize, pivot_tol: f64) -> Option<f64> {
    debug_assert_eq!(a.len(), n * n);
    let mut inv = vec![0.0; n * n];
    for i in 0..n {
        inv[i * n + i] = 1.0;
    }
    let mut min_pivot = f64::INFINITY;
    for col in 0..n {
        let (pivot_row, pivot_abs) = (col..n)
            .map(|r| (r, a[r * n + col].abs()))
            .fold((col, -1.0), |best, cur| if cur.1 > best.1 { cur } else { best });
        if pivot_abs < pivot_tol {
            return None;
        }
        min_pivot = min_pivot.min(pivot_abs);
        if pivot_row != col {
            for k in 0..n {
                a.swap(col * n + k, pivot_row * n + k);
                inv.swap(col * n + k, pivot_row * n + k);
            }
        }
        let p = a[col * n + col];
        for k in 0..n {
            a[col * n + k] /= p;
            inv[col * n + k] /= p;
        }
        for r in 0..n {
            if r == col {
                continue;
            }
            let f = a[r * n + col];
            if f == 0.0 {
                continue;
            }
            for k in 0..n {
                a[r * n + k] -= f * a[col * n + k];
                inv[r * n + k] -= f * inv[col * n + k];
            }
        }
    }
    a.copy_from_slice(&inv);
    Some(min_pivot)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn inverts_small_matrix() {
        let orig = [0.0, 2.0, 1.0, 1.0, 1.0, 0.0, 3.0, 0.0, 1.0];
        let mut a = orig;
        assert!(invert_in_place(&mut a, 3, 1e-12).is_some());
        for i in 0..3 {
            for j in 0..3 {
                let v: f64 = (0..3).map(|k| orig[i * 3 + k] * a[k * 3 + j]).sum();
                let expect = if i == j { 1.0 } else { 0.0 };
                assert!((v - expect).abs() < 1e-14);
            }
        }
    }

    #[test]
    fn detects_singular() {
        let mut a = [1.0, 2.0, 2.0, 4.0];
        assert!(invert_in_place(&mut a, 2, 1e-12).is_none());
    }
}
