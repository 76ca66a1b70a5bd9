//! Dense symmetric kernels for the per-node matrices, dimensions 1..=3.
//!
//! Everything works on row-major slices with the top-left `n x n` block in
//! use; storage is always a fixed 9-element array so node loops stay
//! allocation-free.

use num_complex::Complex64;

use crate::error::{Error, Result};

pub const MAX_DIM: usize = 3;

/// Row-major n x n matrix in a fixed buffer.
pub type Mat = [f64; 9];
pub type Vec3 = [f64; 3];

pub fn mat_zero() -> Mat {
    [0.0; 9]
}

pub fn identity(n: usize) -> Mat {
    let mut m = mat_zero();
    for i in 0..n {
        m[i * n + i] = 1.0;
    }
    m
}

pub fn det(a: &[f64], n: usize) -> f64 {
    match n {
        1 => a[0],
        2 => a[0] * a[3] - a[1] * a[2],
        3 => {
            a[0] * (a[4] * a[8] - a[5] * a[7]) - a[1] * (a[3] * a[8] - a[5] * a[6])
                + a[2] * (a[3] * a[7] - a[4] * a[6])
        }
        _ => panic!("dimension {n} out of range"),
    }
}

/// Lower-triangular L with A = L L^T. Fails on a non-positive pivot.
pub fn cholesky(a: &[f64], n: usize) -> Result<Mat> {
    let mut l = mat_zero();
    for i in 0..n {
        for j in 0..=i {
            let mut s = a[i * n + j];
            for k in 0..j {
                s -= l[i * n + k] * l[j * n + k];
            }
            if i == j {
                if !(s > 0.0) || !s.is_finite() {
                    return Err(Error::NotPositiveDefinite);
                }
                l[i * n + i] = s.sqrt();
            } else {
                l[i * n + j] = s / l[j * n + j];
            }
        }
    }
    Ok(l)
}

/// Solve L y = b in place.
fn solve_lower(l: &Mat, n: usize, b: &mut Vec3) {
    for i in 0..n {
        let mut s = b[i];
        for k in 0..i {
            s -= l[i * n + k] * b[k];
        }
        b[i] = s / l[i * n + i];
    }
}

/// Solve L^T y = b in place.
fn solve_lower_t(l: &Mat, n: usize, b: &mut Vec3) {
    for i in (0..n).rev() {
        let mut s = b[i];
        for k in i + 1..n {
            s -= l[k * n + i] * b[k];
        }
        b[i] = s / l[i * n + i];
    }
}

/// Inverse of a symmetric positive definite matrix via its Cholesky factor.
pub fn invert_spd(a: &[f64], n: usize) -> Result<Mat> {
    let l = cholesky(a, n)?;
    let mut inv = mat_zero();
    for col in 0..n {
        let mut e = [0.0; 3];
        e[col] = 1.0;
        solve_lower(&l, n, &mut e);
        solve_lower_t(&l, n, &mut e);
        for row in 0..n {
            inv[row * n + col] = e[row];
        }
    }
    // Symmetrize away the last rounding asymmetry.
    for i in 0..n {
        for j in 0..i {
            let v = 0.5 * (inv[i * n + j] + inv[j * n + i]);
            inv[i * n + j] = v;
            inv[j * n + i] = v;
        }
    }
    Ok(inv)
}

/// Cyclic Jacobi for a symmetric matrix. Eigenvalues ascending, eigenvectors
/// as matching columns of the returned matrix. Deterministic sweep order.
pub fn sym_eigen(a: &[f64], n: usize) -> (Vec3, Mat) {
    let mut d = mat_zero();
    for i in 0..n {
        for j in 0..n {
            d[i * n + j] = a[i * n + j];
        }
    }
    let mut v = identity(n);
    if n > 1 {
        let scale: f64 = (0..n * n).map(|k| d[k] * d[k]).sum::<f64>().sqrt().max(1.0);
        for _sweep in 0..64 {
            let mut off = 0.0f64;
            for p in 0..n {
                for q in p + 1..n {
                    off += d[p * n + q] * d[p * n + q];
                }
            }
            if off.sqrt() <= 1e-16 * scale {
                break;
            }
            for p in 0..n - 1 {
                for q in p + 1..n {
                    let apq = d[p * n + q];
                    if apq.abs() <= 1e-18 * scale {
                        continue;
                    }
                    let theta = (d[q * n + q] - d[p * n + p]) / (2.0 * apq);
                    let t = theta.signum() / (theta.abs() + (theta * theta + 1.0).sqrt());
                    let c = 1.0 / (t * t + 1.0).sqrt();
                    let s = t * c;
                    for k in 0..n {
                        let dkp = d[k * n + p];
                        let dkq = d[k * n + q];
                        d[k * n + p] = c * dkp - s * dkq;
                        d[k * n + q] = s * dkp + c * dkq;
                    }
                    for k in 0..n {
                        let dpk = d[p * n + k];
                        let dqk = d[q * n + k];
                        d[p * n + k] = c * dpk - s * dqk;
                        d[q * n + k] = s * dpk + c * dqk;
                    }
                    for k in 0..n {
                        let vkp = v[k * n + p];
                        let vkq = v[k * n + q];
                        v[k * n + p] = c * vkp - s * vkq;
                        v[k * n + q] = s * vkp + c * vkq;
                    }
                }
            }
        }
    }
    let mut vals = [0.0; 3];
    for i in 0..n {
        vals[i] = d[i * n + i];
    }
    // Insertion sort carrying eigenvector columns along.
    for i in 1..n {
        let mut j = i;
        while j > 0 && vals[j - 1] > vals[j] {
            vals.swap(j - 1, j);
            for k in 0..n {
                v.swap(k * n + j - 1, k * n + j);
            }
            j -= 1;
        }
    }
    (vals, v)
}

/// Eigenvalues of H w = lambda Sigma w for symmetric H and SPD Sigma,
/// ascending. Reduction: Sigma = L L^T, then the standard symmetric problem
/// for L^-1 H L^-T.
pub fn generalized_eigenvalues(h: &[f64], sigma: &[f64], n: usize) -> Result<Vec3> {
    let (vals, _) = generalized_eigenpairs(h, sigma, n)?;
    Ok(vals)
}

/// Eigenvalues ascending plus eigenvector columns W with W^T Sigma W = I.
pub fn generalized_eigenpairs(h: &[f64], sigma: &[f64], n: usize) -> Result<(Vec3, Mat)> {
    for k in 0..n * n {
        if !h[k].is_finite() || !sigma[k].is_finite() {
            return Err(Error::NonFinite("generalized eigenvalue input"));
        }
    }
    let l = cholesky(sigma, n)?;
    // B = L^-1 H L^-T, assembled column by column.
    let mut b = mat_zero();
    for col in 0..n {
        let mut y = [0.0; 3];
        for row in 0..n {
            y[row] = h[row * n + col];
        }
        solve_lower(&l, n, &mut y);
        for row in 0..n {
            b[row * n + col] = y[row];
        }
    }
    for row in 0..n {
        let mut y = [0.0; 3];
        for col in 0..n {
            y[col] = b[row * n + col];
        }
        solve_lower(&l, n, &mut y);
        for col in 0..n {
            b[row * n + col] = y[col];
        }
    }
    for i in 0..n {
        for j in 0..i {
            let v = 0.5 * (b[i * n + j] + b[j * n + i]);
            b[i * n + j] = v;
            b[j * n + i] = v;
        }
    }
    let (vals, vecs) = sym_eigen(&b, n);
    // Back-transform columns: w = L^-T v keeps w^T Sigma w = v^T v = 1.
    let mut w = mat_zero();
    for col in 0..n {
        let mut y = [0.0; 3];
        for row in 0..n {
            y[row] = vecs[row * n + col];
        }
        solve_lower_t(&l, n, &mut y);
        for row in 0..n {
            w[row * n + col] = y[row];
        }
    }
    Ok((vals, w))
}

/// det(Sigma + i Hess) by complex LU with partial pivoting.
pub fn complex_det(sigma: &[f64], hess: &[f64], n: usize) -> Complex64 {
    let mut m = [[Complex64::new(0.0, 0.0); 3]; 3];
    for i in 0..n {
        for j in 0..n {
            m[i][j] = Complex64::new(sigma[i * n + j], hess[i * n + j]);
        }
    }
    let mut d = Complex64::new(1.0, 0.0);
    for k in 0..n {
        let mut piv = k;
        for r in k + 1..n {
            if m[r][k].norm_sqr() > m[piv][k].norm_sqr() {
                piv = r;
            }
        }
        if m[piv][k].norm_sqr() == 0.0 {
            return Complex64::new(0.0, 0.0);
        }
        if piv != k {
            m.swap(piv, k);
            d = -d;
        }
        d *= m[k][k];
        for r in k + 1..n {
            let f = m[r][k] / m[k][k];
            for c in k..n {
                let sub = f * m[k][c];
                m[r][c] -= sub;
            }
        }
    }
    d
}

#[cfg(test)]
mod tests {
    use super::*;

    fn assert_close(a: f64, b: f64, tol: f64) {
        assert!((a - b).abs() <= tol, "{a} vs {b} (tol {tol})");
    }

    #[test]
    fn determinants() {
        assert_close(det(&[5.0], 1), 5.0, 0.0);
        assert_close(det(&[1.0, 2.0, 3.0, 4.0], 2), -2.0, 1e-15);
        let a = [2.0, 0.0, 1.0, 0.0, 3.0, 0.0, 1.0, 0.0, 2.0];
        assert_close(det(&a, 3), 9.0, 1e-14);
    }

    #[test]
    fn cholesky_known_factor() {
        let a = [4.0, 2.0, 2.0, 3.0];
        let l = cholesky(&a, 2).unwrap();
        assert_close(l[0], 2.0, 1e-15);
        assert_close(l[2], 1.0, 1e-15);
        assert_close(l[3], 2.0f64.sqrt(), 1e-15);
    }

    #[test]
    fn cholesky_rejects_indefinite() {
        let a = [1.0, 2.0, 2.0, 1.0];
        assert!(matches!(cholesky(&a, 2), Err(Error::NotPositiveDefinite)));
    }

    #[test]
    fn spd_inverse_round_trip() {
        let a = [2.0, 0.4, 0.1, 0.4, 1.5, -0.2, 0.1, -0.2, 3.0];
        let inv = invert_spd(&a, 3).unwrap();
        for i in 0..3 {
            for j in 0..3 {
                let mut s = 0.0;
                for k in 0..3 {
                    s += a[i * 3 + k] * inv[k * 3 + j];
                }
                let want = if i == j { 1.0 } else { 0.0 };
                assert_close(s, want, 1e-13);
            }
        }
    }

    #[test]
    fn generalized_eigenvalues_match_hand_solutions() {
        // det(H - lambda Sigma) with H = Sigma = diag(2, 1): double root 1.
        let vals = generalized_eigenvalues(&[2.0, 0.0, 0.0, 1.0], &[2.0, 0.0, 0.0, 1.0], 2).unwrap();
        assert_close(vals[0], 1.0, 1e-14);
        assert_close(vals[1], 1.0, 1e-14);

        // H = diag(1, -1), Sigma = [[2,1],[1,2]]: 3 lambda^2 = 1.
        let vals =
            generalized_eigenvalues(&[1.0, 0.0, 0.0, -1.0], &[2.0, 1.0, 1.0, 2.0], 2).unwrap();
        let r = 1.0 / 3.0f64.sqrt();
        assert_close(vals[0], -r, 1e-14);
        assert_close(vals[1], r, 1e-14);

        let vals = generalized_eigenvalues(
            &[3.0, 0.0, 0.0, 0.0, 1.0, 0.0, 0.0, 0.0, 2.0],
            &identity(3),
            3,
        )
        .unwrap();
        assert_close(vals[0], 1.0, 1e-14);
        assert_close(vals[1], 2.0, 1e-14);
        assert_close(vals[2], 3.0, 1e-14);
    }

    #[test]
    fn generalized_eigenvectors_are_sigma_orthonormal() {
        let sigma = [2.0, 0.5, 0.1, 0.5, 1.5, -0.3, 0.1, -0.3, 1.0];
        let h = [0.7, -1.1, 0.2, -1.1, 0.4, 0.9, 0.2, 0.9, -0.6];
        let (vals, w) = generalized_eigenpairs(&h, &sigma, 3).unwrap();
        for a in 0..3 {
            for b in 0..3 {
                let mut s = 0.0;
                for i in 0..3 {
                    for j in 0..3 {
                        s += w[i * 3 + a] * sigma[i * 3 + j] * w[j * 3 + b];
                    }
                }
                let want = if a == b { 1.0 } else { 0.0 };
                assert_close(s, want, 1e-12);
            }
        }
        // H w = lambda Sigma w for each pair.
        for a in 0..3 {
            for i in 0..3 {
                let mut hw = 0.0;
                let mut sw = 0.0;
                for j in 0..3 {
                    hw += h[i * 3 + j] * w[j * 3 + a];
                    sw += sigma[i * 3 + j] * w[j * 3 + a];
                }
                assert_close(hw, vals[a] * sw, 1e-11);
            }
        }
    }

    #[test]
    fn complex_det_known_values() {
        // det(I + i I) in 2d: (1+i)^2 = 2i.
        let d = complex_det(&identity(2), &identity(2), 2);
        assert_close(d.re, 0.0, 1e-14);
        assert_close(d.im, 2.0, 1e-14);

        // Diagonal 3d: (1+i)(1+2i)(1+3i) = -10.
        let h = [1.0, 0.0, 0.0, 0.0, 2.0, 0.0, 0.0, 0.0, 3.0];
        let d = complex_det(&identity(3), &h, 3);
        assert_close(d.re, -10.0, 1e-13);
        assert_close(d.im, 0.0, 1e-13);
    }
}
