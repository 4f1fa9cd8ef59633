//! Dense helpers for the small matrices used here (noise covariances up to
//! ~10×10, ridge systems up to ~100×100). Row-major `Vec<f64>` storage.

/// Lower-triangular factor `L` with `L Lᵀ = a` for a symmetric positive
/// semidefinite `a` (n×n). Zero pivots are allowed and produce zero columns;
/// returns `None` if `a` is not symmetric or has a materially negative pivot.
pub fn psd_factor(a: &[f64], n: usize) -> Option<Vec<f64>> {
    if a.len() != n * n {
        return None;
    }
    let scale = a.iter().fold(0.0f64, |m, v| m.max(v.abs())).max(1.0);
    let tol = 1e-12 * scale;
    for i in 0..n {
        for j in 0..i {
            if (a[i * n + j] - a[j * n + i]).abs() > tol {
                return None;
            }
        }
    }
    let mut l = vec![0.0; n * n];
    for j in 0..n {
        let mut d = a[j * n + j];
        for k in 0..j {
            d -= l[j * n + k] * l[j * n + k];
        }
        if d < -tol {
            return None;
        }
        if d <= tol {
            // Zero pivot: the remainder of column j must vanish too.
            for i in (j + 1)..n {
                let mut s = a[i * n + j];
                for k in 0..j {
                    s -= l[i * n + k] * l[j * n + k];
                }
                if s.abs() > 1e-9 * scale {
                    return None;
                }
            }
            continue;
        }
        let djj = d.sqrt();
        l[j * n + j] = djj;
        for i in (j + 1)..n {
            let mut s = a[i * n + j];
            for k in 0..j {
                s -= l[i * n + k] * l[j * n + k];
            }
            l[i * n + j] = s / djj;
        }
    }
    Some(l)
}

/// Solves `(XᵀX + ridge·I) W = XᵀY` for `W` (f×o) given the accumulated
/// Gram matrix `xtx` (f×f) and cross term `xty` (f×o).
pub fn ridge_solve(xtx: &[f64], xty: &[f64], f: usize, o: usize, ridge: f64) -> Option<Vec<f64>> {
    let mut a = xtx.to_vec();
    for i in 0..f {
        a[i * f + i] += ridge;
    }
    // In-place Cholesky of the (strictly) positive definite system.
    for j in 0..f {
        let mut d = a[j * f + j];
        for k in 0..j {
            d -= a[j * f + k] * a[j * f + k];
        }
        if !(d > 0.0) {
            return None;
        }
        let djj = d.sqrt();
        a[j * f + j] = djj;
        for i in (j + 1)..f {
            let mut s = a[i * f + j];
            for k in 0..j {
                s -= a[i * f + k] * a[j * f + k];
            }
            a[i * f + j] = s / djj;
        }
    }
    let mut w = xty.to_vec();
    for c in 0..o {
        // forward: L z = b
        for i in 0..f {
            let mut s = w[i * o + c];
            for k in 0..i {
                s -= a[i * f + k] * w[k * o + c];
            }
            w[i * o + c] = s / a[i * f + i];
        }
        // backward: Lᵀ w = z
        for i in (0..f).rev() {
            let mut s = w[i * o + c];
            for k in (i + 1)..f {
                s -= a[k * f + i] * w[k * o + c];
            }
            w[i * o + c] = s / a[i * f + i];
        }
    }
    Some(w)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn reconstruct(l: &[f64], n: usize) -> Vec<f64> {
        let mut out = vec![0.0; n * n];
        for i in 0..n {
            for j in 0..n {
                out[i * n + j] = (0..n).map(|k| l[i * n + k] * l[j * n + k]).sum();
            }
        }
        out
    }

    #[test]
    fn factors_singular_psd() {
        let a = [4.0, 2.0, 0.0, 2.0, 1.0, 0.0, 0.0, 0.0, 0.0];
        let l = psd_factor(&a, 3).unwrap();
        for (x, y) in reconstruct(&l, 3).iter().zip(a.iter()) {
            assert!((x - y).abs() < 1e-12);
        }
    }

    #[test]
    fn rejects_indefinite_and_asymmetric() {
        assert!(psd_factor(&[1.0, 2.0, 2.0, 1.0], 2).is_none());
        assert!(psd_factor(&[1.0, 0.5, 0.0, 1.0], 2).is_none());
    }

    #[test]
    fn ridge_recovers_exact_linear_map() {
        // y = 2 x0 - x1 sampled on a small grid
        let rows: Vec<[f64; 2]> = vec![[1.0, 0.0], [0.0, 1.0], [1.0, 1.0], [2.0, -1.0]];
        let mut xtx = vec![0.0; 4];
        let mut xty = vec![0.0; 2];
        for r in &rows {
            let y = 2.0 * r[0] - r[1];
            for i in 0..2 {
                xty[i] += r[i] * y;
                for j in 0..2 {
                    xtx[i * 2 + j] += r[i] * r[j];
                }
            }
        }
        let w = ridge_solve(&xtx, &xty, 2, 1, 1e-12).unwrap();
        assert!((w[0] - 2.0).abs() < 1e-9 && (w[1] + 1.0).abs() < 1e-9);
    }
}
