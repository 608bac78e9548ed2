//! Small dense linear-algebra kernels shared by the quantum-dynamics and
//! metrics modules: a symmetric eigensolver (Householder tridiagonalization
//! followed by implicit-shift QL), Hermitian eigenvalues via the real
//! embedding, and Kronecker products for operator lifting.

use ndarray::Array2;
use num_complex::Complex64 as C64;

use crate::{Error, Result};

/// Eigendecomposition of a real symmetric matrix.
///
/// Returns `(eigenvalues, eigenvectors)` with eigenvalues ascending and
/// eigenvectors as the columns of the returned matrix, so
/// `m = V diag(w) V^T`.
pub fn eigh_sym(m: &Array2<f64>) -> Result<(Vec<f64>, Array2<f64>)> {
    let n = m.nrows();
    if m.ncols() != n {
        return Err(Error::Shape(format!(
            "eigh_sym needs a square matrix, got {}x{}",
            m.nrows(),
            m.ncols()
        )));
    }
    let asym = symmetry_residual(m);
    if asym > 1e-10 {
        return Err(Error::Numerical(format!(
            "eigh_sym input asymmetric by {asym:.3e} (tolerance 1e-10)"
        )));
    }
    if n == 0 {
        return Err(Error::Shape("eigh_sym on empty matrix".into()));
    }

    // Householder reduction to tridiagonal form (tred2) on a flat row-major
    // copy, accumulating the orthogonal transform in `v`.
    let mut v: Vec<f64> = m.iter().copied().collect();
    let at = |i: usize, j: usize| i * n + j;
    let mut d = vec![0.0f64; n]; // diagonal
    let mut e = vec![0.0f64; n]; // off-diagonal
    for i in (1..n).rev() {
        let l = i;
        let mut h = 0.0;
        if l > 1 {
            let mut scale = 0.0;
            for k in 0..l {
                scale += v[at(i, k)].abs();
            }
            if scale == 0.0 {
                e[i] = v[at(i, l - 1)];
            } else {
                for k in 0..l {
                    v[at(i, k)] /= scale;
                    h += v[at(i, k)] * v[at(i, k)];
                }
                let mut f = v[at(i, l - 1)];
                let g = if f >= 0.0 { -h.sqrt() } else { h.sqrt() };
                e[i] = scale * g;
                h -= f * g;
                v[at(i, l - 1)] = f - g;
                f = 0.0;
                for j in 0..l {
                    v[at(j, i)] = v[at(i, j)] / h;
                    let mut g = 0.0;
                    // Contiguous row segments carry the quadratic work.
                    for k in 0..=j {
                        g += v[at(j, k)] * v[at(i, k)];
                    }
                    for k in (j + 1)..l {
                        g += v[at(k, j)] * v[at(i, k)];
                    }
                    e[j] = g / h;
                    f += e[j] * v[at(i, j)];
                }
                let hh = f / (h + h);
                for j in 0..l {
                    let f = v[at(i, j)];
                    let g = e[j] - hh * f;
                    e[j] = g;
                    for k in 0..=j {
                        v[at(j, k)] -= f * e[k] + g * v[at(i, k)];
                    }
                }
            }
        } else {
            e[i] = v[at(i, l - 1)];
        }
        d[i] = h;
    }
    d[0] = 0.0;
    e[0] = 0.0;
    for i in 0..n {
        if d[i] != 0.0 {
            for j in 0..i {
                let mut g = 0.0;
                for k in 0..i {
                    g += v[at(i, k)] * v[at(k, j)];
                }
                for k in 0..i {
                    v[at(k, j)] -= g * v[at(k, i)];
                }
            }
        }
        d[i] = v[at(i, i)];
        v[at(i, i)] = 1.0;
        for j in 0..i {
            v[at(j, i)] = 0.0;
            v[at(i, j)] = 0.0;
        }
    }

    // Transpose the accumulated transform so the QL plane rotations act on
    // contiguous rows instead of strided columns.
    let mut vt = vec![0.0f64; n * n];
    for i in 0..n {
        for j in 0..n {
            vt[at(j, i)] = v[at(i, j)];
        }
    }

    // Implicit-shift QL iteration on the tridiagonal form (tqli).
    for i in 1..n {
        e[i - 1] = e[i];
    }
    e[n - 1] = 0.0;
    for l in 0..n {
        let mut iter = 0;
        loop {
            let mut mm = l;
            while mm + 1 < n {
                let dd = d[mm].abs() + d[mm + 1].abs();
                if e[mm].abs() <= f64::EPSILON * dd {
                    break;
                }
                mm += 1;
            }
            if mm == l {
                break;
            }
            iter += 1;
            if iter > 50 {
                return Err(Error::Numerical(
                    "eigh_sym: QL iteration failed to converge".into(),
                ));
            }
            let mut g = (d[l + 1] - d[l]) / (2.0 * e[l]);
            let mut r = g.hypot(1.0);
            g = d[mm] - d[l] + e[l] / (g + r.copysign(g));
            let (mut s, mut c) = (1.0f64, 1.0f64);
            let mut p = 0.0f64;
            for i in (l..mm).rev() {
                let mut f = s * e[i];
                let b = c * e[i];
                r = f.hypot(g);
                e[i + 1] = r;
                if r == 0.0 {
                    d[i + 1] -= p;
                    e[mm] = 0.0;
                    break;
                }
                s = f / r;
                c = g / r;
                g = d[i + 1] - p;
                r = (d[i] - g) * s + 2.0 * c * b;
                p = s * r;
                d[i + 1] = g + p;
                g = c * r - b;
                // Rotate the two eigenvector rows in place.
                let (lo, hi) = vt.split_at_mut(at(i + 1, 0));
                let row_i = &mut lo[at(i, 0)..at(i, 0) + n];
                let row_ip1 = &mut hi[..n];
                for (xi, xip1) in row_i.iter_mut().zip(row_ip1.iter_mut()) {
                    f = *xip1;
                    *xip1 = s * *xi + c * f;
                    *xi = c * *xi - s * f;
                }
            }
            if r == 0.0 && mm > l {
                continue;
            }
            d[l] -= p;
            e[l] = g;
            e[mm] = 0.0;
        }
    }

    // Sort ascending; row `r` of `vt` is the eigenvector of `d[r]`, returned
    // as column `new_col` of the output.
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&a, &b| d[a].partial_cmp(&d[b]).unwrap());
    let w: Vec<f64> = order.iter().map(|&i| d[i]).collect();
    let mut vs = Array2::<f64>::zeros((n, n));
    for (new_col, &old_row) in order.iter().enumerate() {
        for r in 0..n {
            vs[[r, new_col]] = vt[at(old_row, r)];
        }
    }
    Ok((w, vs))
}

/// Eigenvalues of a complex Hermitian matrix, ascending.
///
/// Uses the real embedding `[[Re, -Im], [Im, Re]]`, whose spectrum is that of
/// the Hermitian matrix with every eigenvalue doubled in multiplicity.
pub fn eigvals_hermitian(m: &Array2<C64>) -> Result<Vec<f64>> {
    let n = m.nrows();
    if m.ncols() != n {
        return Err(Error::Shape("eigvals_hermitian needs a square matrix".into()));
    }
    let mut emb = Array2::<f64>::zeros((2 * n, 2 * n));
    for i in 0..n {
        for j in 0..n {
            // Symmetrize the Hermitian input so roundoff in ρ does not leak
            // into an asymmetric embedding.
            let re = 0.5 * (m[[i, j]].re + m[[j, i]].re);
            let im = 0.5 * (m[[i, j]].im - m[[j, i]].im);
            emb[[i, j]] = re;
            emb[[i + n, j + n]] = re;
            emb[[i + n, j]] = im;
            emb[[i, j + n]] = -im;
        }
    }
    let (w, _) = eigh_sym(&emb)?;
    // Every eigenvalue appears twice; take every other one.
    Ok(w.into_iter().step_by(2).collect())
}

/// Maximum absolute deviation from symmetry.
pub fn symmetry_residual(m: &Array2<f64>) -> f64 {
    let mut worst = 0.0f64;
    for i in 0..m.nrows() {
        for j in (i + 1)..m.ncols() {
            worst = worst.max((m[[i, j]] - m[[j, i]]).abs());
        }
    }
    worst
}

/// Maximum absolute deviation from Hermiticity.
pub fn hermiticity_residual(m: &Array2<C64>) -> f64 {
    let mut worst = 0.0f64;
    for i in 0..m.nrows() {
        for j in 0..m.ncols() {
            worst = worst.max((m[[i, j]] - m[[j, i]].conj()).norm());
        }
    }
    worst
}

/// Kronecker product of complex matrices.
pub fn kron(a: &Array2<C64>, b: &Array2<C64>) -> Array2<C64> {
    let (ar, ac) = a.dim();
    let (br, bc) = b.dim();
    let mut out = Array2::<C64>::zeros((ar * br, ac * bc));
    for i in 0..ar {
        for j in 0..ac {
            let aij = a[[i, j]];
            for k in 0..br {
                for l in 0..bc {
                    out[[i * br + k, j * bc + l]] = aij * b[[k, l]];
                }
            }
        }
    }
    out
}

/// Conjugate transpose.
pub fn dagger(m: &Array2<C64>) -> Array2<C64> {
    m.t().mapv(|z| z.conj())
}

/// `[a, b] = ab - ba`.
pub fn commutator(a: &Array2<C64>, b: &Array2<C64>) -> Array2<C64> {
    a.dot(b) - b.dot(a)
}

/// `{a, b} = ab + ba`.
pub fn anticommutator(a: &Array2<C64>, b: &Array2<C64>) -> Array2<C64> {
    a.dot(b) + b.dot(a)
}

#[cfg(test)]
mod tests {
    use super::*;
    use ndarray::array;
    use rand::Rng;

    #[test]
    fn eigh_diagonal_passthrough() {
        let m = Array2::from_diag(&ndarray::arr1(&[3.0, 1.0, 2.0]));
        let (w, _) = eigh_sym(&m).unwrap();
        assert_eq!(w, vec![1.0, 2.0, 3.0]);
    }

    #[test]
    fn eigh_reconstructs_random_symmetric() {
        let mut rng = crate::rng::seeded(11);
        for n in [2usize, 5, 8, 17] {
            let mut m = Array2::<f64>::zeros((n, n));
            for i in 0..n {
                for j in 0..=i {
                    let x: f64 = rng.gen_range(-1.0..1.0);
                    m[[i, j]] = x;
                    m[[j, i]] = x;
                }
            }
            let (w, v) = eigh_sym(&m).unwrap();
            let recon = v.dot(&Array2::from_diag(&ndarray::arr1(&w))).dot(&v.t());
            let err = (&recon - &m).iter().fold(0.0f64, |a, x| a.max(x.abs()));
            assert!(err < 1e-9, "n={n} reconstruction error {err}");
            // Orthonormality of eigenvectors.
            let gram = v.t().dot(&v);
            for i in 0..n {
                for j in 0..n {
                    let want = if i == j { 1.0 } else { 0.0 };
                    assert!((gram[[i, j]] - want).abs() < 1e-10);
                }
            }
        }
    }

    #[test]
    fn hermitian_eigvals_match_known() {
        // Pauli-Y has eigenvalues ±1.
        let m = array![
            [C64::new(0.0, 0.0), C64::new(0.0, -1.0)],
            [C64::new(0.0, 1.0), C64::new(0.0, 0.0)]
        ];
        let w = eigvals_hermitian(&m).unwrap();
        assert!((w[0] + 1.0).abs() < 1e-12);
        assert!((w[1] - 1.0).abs() < 1e-12);
    }

    #[test]
    fn kron_dimensions_and_values() {
        let i2 = Array2::<C64>::eye(2);
        let x = array![
            [C64::new(0.0, 0.0), C64::new(1.0, 0.0)],
            [C64::new(1.0, 0.0), C64::new(0.0, 0.0)]
        ];
        let k = kron(&i2, &x);
        assert_eq!(k.dim(), (4, 4));
        assert_eq!(k[[0, 1]], C64::new(1.0, 0.0));
        assert_eq!(k[[2, 3]], C64::new(1.0, 0.0));
        assert_eq!(k[[0, 3]], C64::new(0.0, 0.0));
    }

    #[test]
    fn eigh_rejects_asymmetric() {
        let m = array![[1.0, 2.0], [0.0, 1.0]];
        assert!(matches!(eigh_sym(&m), Err(Error::Numerical(_))));
    }
}
