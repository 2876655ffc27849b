//! Small dense linear-algebra helpers on top of `nalgebra`.

use nalgebra::{DMatrix, DVector};

/// Distance from `x` to the nearest integer.
#[inline]
pub fn dist_to_int(x: f64) -> f64 {
    (x - x.round()).abs()
}

/// Fractional part in `[0, 1)`.
#[inline]
pub fn frac(x: f64) -> f64 {
    let f = x - x.floor();
    if f >= 1.0 {
        0.0
    } else {
        f
    }
}

/// Gram-Schmidt data of the columns of `b`: squared norms of the orthogonalised
/// vectors and the lower-triangular coefficient matrix `mu`.
pub fn gram_schmidt(b: &DMatrix<f64>) -> (Vec<f64>, DMatrix<f64>) {
    let n = b.ncols();
    let mut bstar: Vec<DVector<f64>> = Vec::with_capacity(n);
    let mut norms = vec![0.0; n];
    let mut mu = DMatrix::<f64>::zeros(n, n);
    for i in 0..n {
        let mut v = b.column(i).clone_owned();
        for j in 0..i {
            let m = if norms[j] > 0.0 {
                b.column(i).dot(&bstar[j]) / norms[j]
            } else {
                0.0
            };
            mu[(i, j)] = m;
            v -= &bstar[j] * m;
        }
        mu[(i, i)] = 1.0;
        norms[i] = v.norm_squared();
        bstar.push(v);
    }
    (norms, mu)
}

/// LLL reduction (delta = 0.99) of the columns of `b`.
///
/// Returns the reduced basis and the unimodular matrix `u` with
/// `reduced = b * u`.
pub fn lll_reduce(b: &DMatrix<f64>) -> (DMatrix<f64>, DMatrix<i64>) {
    let n = b.ncols();
    let mut b = b.clone();
    let mut u = DMatrix::<i64>::identity(n, n);
    if n < 2 {
        return (b, u);
    }
    let delta = 0.99;
    let (mut norms, mut mu) = gram_schmidt(&b);
    let mut k = 1;
    let mut guard = 0usize;
    while k < n {
        guard += 1;
        if guard > 200_000 {
            break;
        }
        for j in (0..k).rev() {
            let q = mu[(k, j)].round();
            if q != 0.0 {
                let bj = b.column(j).clone_owned();
                let mut bk = b.column_mut(k);
                bk -= bj * q;
                let qi = q as i64;
                for r in 0..n {
                    u[(r, k)] -= qi * u[(r, j)];
                }
                for jj in 0..j {
                    mu[(k, jj)] -= q * mu[(j, jj)];
                }
                mu[(k, j)] -= q;
            }
        }
        if norms[k] >= (delta - mu[(k, k - 1)] * mu[(k, k - 1)]) * norms[k - 1] {
            k += 1;
        } else {
            b.swap_columns(k, k - 1);
            u.swap_columns(k, k - 1);
            let gs = gram_schmidt(&b);
            norms = gs.0;
            mu = gs.1;
            k = k.saturating_sub(1).max(1);
        }
    }
    (b, u)
}

/// Numerical rank of a set of vectors (Gram-Schmidt with relative tolerance).
pub fn rank_of(vectors: &[DVector<f64>], rel_tol: f64) -> usize {
    let mut basis: Vec<DVector<f64>> = Vec::new();
    for v in vectors {
        let scale = v.norm();
        if scale == 0.0 {
            continue;
        }
        let mut w = v.clone();
        for e in &basis {
            let c = w.dot(e);
            w -= e * c;
        }
        let r = w.norm();
        if r > rel_tol * scale {
            basis.push(w / r);
        }
    }
    basis.len()
}

/// Orthonormal basis (as columns) of the orthogonal complement of the column
/// span of `a` (an `N x k` matrix of full column rank).
pub fn orthonormal_complement(a: &DMatrix<f64>) -> DMatrix<f64> {
    let n = a.nrows();
    let mut basis: Vec<DVector<f64>> = Vec::new();
    for j in 0..a.ncols() {
        let mut w = a.column(j).clone_owned();
        for e in &basis {
            let c = w.dot(e);
            w -= e * c;
        }
        let r = w.norm();
        if r > 1e-12 {
            basis.push(w / r);
        }
    }
    let span = basis.len();
    for i in 0..n {
        let mut w = DVector::<f64>::zeros(n);
        w[i] = 1.0;
        for e in &basis {
            let c = w.dot(e);
            w -= e * c;
        }
        let r = w.norm();
        if r > 1e-8 {
            basis.push(w / r);
        }
        if basis.len() == n {
            break;
        }
    }
    let cols: Vec<DVector<f64>> = basis.into_iter().skip(span).collect();
    if cols.is_empty() {
        return DMatrix::zeros(n, 0);
    }
    DMatrix::from_columns(&cols)
}

/// Least-squares residual `|| y - P y ||` where `P` projects onto the column
/// span of `a`. Rank-deficient `a` is handled through an SVD.
pub fn residual_from_span(a: &DMatrix<f64>, y: &DVector<f64>) -> f64 {
    let q = orthonormal_span(a, 1e-10);
    let mut r = y.clone();
    for j in 0..q.ncols() {
        let c = q.column(j).dot(&r);
        r -= q.column(j) * c;
    }
    r.norm()
}

/// Orthonormal basis of the column span of `a`, dropping directions whose
/// singular value is below `rel_tol` times the largest one.
pub fn orthonormal_span(a: &DMatrix<f64>, rel_tol: f64) -> DMatrix<f64> {
    if a.ncols() == 0 || a.nrows() == 0 {
        return DMatrix::zeros(a.nrows(), 0);
    }
    let svd = a.clone().svd(true, false);
    let u = svd.u.expect("left singular vectors requested");
    let smax = svd.singular_values.iter().cloned().fold(0.0, f64::max);
    let cols: Vec<DVector<f64>> = svd
        .singular_values
        .iter()
        .enumerate()
        .filter(|(_, &s)| smax > 0.0 && s > rel_tol * smax)
        .map(|(i, _)| u.column(i).clone_owned())
        .collect();
    if cols.is_empty() {
        return DMatrix::zeros(a.nrows(), 0);
    }
    DMatrix::from_columns(&cols)
}

/// Smallest singular value of a square or tall matrix.
pub fn sigma_min(a: &DMatrix<f64>) -> f64 {
    let svd = a.clone().svd(false, false);
    svd.singular_values.iter().cloned().fold(f64::INFINITY, f64::min)
}

/// Format a real with 12 significant digits, `%.12g` style.
pub fn fmt_sig12(x: f64) -> String {
    if x == 0.0 {
        return "0".to_string();
    }
    if !x.is_finite() {
        return format!("{x}");
    }
    let e = format!("{:.11e}", x);
    let (mant, exp) = e.split_once('e').expect("exponent form");
    let exp: i32 = exp.parse().expect("integer exponent");
    if (-5..12).contains(&exp) {
        let decimals = (11 - exp).max(0) as usize;
        let s = format!("{:.*}", decimals, x);
        trim_zeros(&s)
    } else {
        format!("{}e{}", trim_zeros(mant), exp)
    }
}

fn trim_zeros(s: &str) -> String {
    if s.contains('.') {
        let t = s.trim_end_matches('0').trim_end_matches('.');
        if t == "-0" {
            "0".to_string()
        } else {
            t.to_string()
        }
    } else {
        s.to_string()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn lll_keeps_lattice_and_shortens() {
        let b = DMatrix::from_row_slice(2, 2, &[1.0, 100.0, 0.0, 1.0]);
        let (r, u) = lll_reduce(&b);
        let uf = u.map(|x| x as f64);
        assert!((&b * uf - &r).norm() < 1e-9);
        assert!((u.map(|x| x as f64).determinant().abs() - 1.0).abs() < 1e-12);
        assert!(r.column(0).norm() <= 1.0 + 1e-12);
        assert!(r.column(1).norm() <= 1.0 + 1e-12);
    }

    #[test]
    fn complement_is_orthogonal() {
        let a = DMatrix::from_row_slice(3, 1, &[1.0, 2.0, 3.0]);
        let c = orthonormal_complement(&a);
        assert_eq!(c.ncols(), 2);
        for j in 0..2 {
            assert!(c.column(j).dot(&a.column(0)).abs() < 1e-12);
        }
    }

    #[test]
    fn residual_matches_hand_value() {
        let a = DMatrix::from_row_slice(3, 1, &[1.0, 0.0, 0.0]);
        let y = DVector::from_vec(vec![3.0, 4.0, 0.0]);
        assert!((residual_from_span(&a, &y) - 4.0).abs() < 1e-12);
    }

    #[test]
    fn sig12_formatting() {
        assert_eq!(fmt_sig12(1.0), "1");
        assert_eq!(fmt_sig12(-0.5), "-0.5");
        assert_eq!(fmt_sig12(1.0 / 3.0), "0.333333333333");
        assert_eq!(fmt_sig12(1.618033988749895), "1.61803398875");
        assert_eq!(fmt_sig12(1234.5), "1234.5");
        assert_eq!(fmt_sig12(1e-7), "1e-7");
    }

    #[test]
    fn dist_and_frac() {
        assert_eq!(dist_to_int(2.25), 0.25);
        assert_eq!(dist_to_int(-0.75), 0.25);
        assert_eq!(frac(-0.25), 0.75);
    }
}
