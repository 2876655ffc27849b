//! Integer solutions of `|(A z - t)_i| <= h_i` for an invertible square `A`.
//!
//! The box is rescaled to the unit cube, the scaled matrix is LLL-reduced, and
//! the reduced coordinates are enumerated with the last one solved as an
//! interval. Returned candidates satisfy the scaled constraint up to `1e-9`;
//! callers apply their own exact filter.

use nalgebra::{DMatrix, DVector};
use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::linalg::lll_reduce;

const SLACK: f64 = 1e-9;

/// Expected number of solutions, `prod(2 h_i) / |det A|`.
pub fn box_estimate(a: &DMatrix<f64>, h: &[f64]) -> f64 {
    let det = a.determinant().abs();
    h.iter().map(|x| 2.0 * x).product::<f64>() / det
}

/// All integer `z` (flattened, stride `A.ncols()`) with `|(A z - t)_i| <= h_i`.
///
/// `budget` caps the expected number of solutions; the scan itself is capped
/// at a generous multiple of it.
pub fn box_solutions(
    a: &DMatrix<f64>,
    t: &DVector<f64>,
    h: &[f64],
    budget: usize,
) -> Result<Vec<i64>> {
    let n = a.ncols();
    if a.nrows() != n || t.len() != n || h.len() != n {
        return Err(Error::DimensionMismatch { expected: n, got: t.len().min(h.len()) });
    }
    if n == 0 {
        return Ok(Vec::new());
    }
    if h.iter().any(|&x| !(x >= 0.0) || !x.is_finite()) {
        return Err(Error::InvalidInput("box half-widths must be finite and nonnegative".into()));
    }
    if h.iter().any(|&x| x == 0.0) {
        // Degenerate box: treat zero width as a tiny positive one and rely on
        // the exact filter downstream.
        let h2: Vec<f64> = h.iter().map(|&x| if x == 0.0 { 1e-12 } else { x }).collect();
        return box_solutions(a, t, &h2, budget);
    }
    let det = a.determinant();
    let colnorm: f64 = a.column_iter().map(|c| c.norm()).product();
    if det.abs() <= 1e-12 * colnorm {
        return Err(Error::DegenerateLattice);
    }
    let estimate = box_estimate(a, h);
    if estimate > budget as f64 {
        return Err(Error::WindowTooLarge { estimate, budget });
    }

    let mut s = a.clone();
    for i in 0..n {
        for j in 0..n {
            s[(i, j)] /= h[i];
        }
    }
    let target = DVector::from_iterator(n, (0..n).map(|i| t[i] / h[i]));
    let (r, u) = lll_reduce(&s);
    let rinv = r.clone().try_inverse().ok_or(Error::DegenerateLattice)?;
    let c = &rinv * &target;
    let mut lo = vec![0i64; n];
    let mut hi = vec![0i64; n];
    for i in 0..n {
        let w: f64 = rinv.row(i).iter().map(|x| x.abs()).sum::<f64>() * (1.0 + SLACK);
        lo[i] = (c[i] - w).ceil() as i64;
        hi[i] = (c[i] + w).floor() as i64;
        if hi[i] < lo[i] {
            return Ok(Vec::new());
        }
    }
    let work: f64 = (0..n - 1).map(|i| (hi[i] - lo[i] + 1) as f64).product();
    let work_cap = 64.0 * (budget as f64) + 1e7;
    if work > work_cap {
        return Err(Error::EnumerationLimit(format!(
            "box scan of {work:.3e} cells exceeds {work_cap:.3e}"
        )));
    }

    let scan = |first: Option<i64>| -> Vec<i64> {
        let mut out = Vec::new();
        let mut y = lo.clone();
        if let Some(f) = first {
            y[0] = f;
        }
        let fixed = usize::from(first.is_some());
        let outer = n - 1;
        let mut resid = vec![0.0; n];
        let mut z = vec![0i64; n];
        loop {
            for i in 0..n {
                let mut acc = -target[i];
                for j in 0..outer {
                    acc += r[(i, j)] * y[j] as f64;
                }
                resid[i] = acc;
            }
            let (mut ylo, mut yhi) = (f64::NEG_INFINITY, f64::INFINITY);
            let mut feasible = true;
            for i in 0..n {
                let col = r[(i, n - 1)];
                if col.abs() < 1e-300 {
                    if resid[i].abs() > 1.0 + SLACK {
                        feasible = false;
                        break;
                    }
                    continue;
                }
                let a1 = (-1.0 - SLACK - resid[i]) / col;
                let a2 = (1.0 + SLACK - resid[i]) / col;
                let (l, h) = if a1 < a2 { (a1, a2) } else { (a2, a1) };
                ylo = ylo.max(l);
                yhi = yhi.min(h);
            }
            if feasible && ylo <= yhi {
                let a0 = (ylo.ceil() as i64).max(lo[n - 1]);
                let b0 = (yhi.floor() as i64).min(hi[n - 1]);
                for last in a0..=b0 {
                    y[n - 1] = last;
                    for (row, zr) in z.iter_mut().enumerate() {
                        let mut acc = 0i64;
                        for j in 0..n {
                            acc += u[(row, j)] * y[j];
                        }
                        *zr = acc;
                    }
                    out.extend_from_slice(&z);
                }
            }
            // odometer over coordinates fixed..outer
            let mut k = outer;
            loop {
                if k == fixed {
                    return out;
                }
                k -= 1;
                if y[k] < hi[k] {
                    y[k] += 1;
                    for j in k + 1..outer {
                        y[j] = lo[j];
                    }
                    break;
                }
            }
        }
    };

    let out: Vec<i64> = if n == 1 {
        scan(None)
    } else {
        let firsts: Vec<i64> = (lo[0]..=hi[0]).collect();
        firsts
            .par_iter()
            .map(|&f| scan(Some(f)))
            .collect::<Vec<_>>()
            .concat()
    };
    if out.len() / n > budget.saturating_mul(4).max(1024) {
        return Err(Error::WindowTooLarge { estimate: (out.len() / n) as f64, budget });
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn brute(a: &DMatrix<f64>, t: &DVector<f64>, h: &[f64], k: i64) -> usize {
        let mut count = 0;
        for x in -k..=k {
            for y in -k..=k {
                let z = DVector::from_vec(vec![x as f64, y as f64]);
                let v = a * z - t;
                if (0..2).all(|i| v[i].abs() <= h[i] * (1.0 + 1e-12)) {
                    count += 1;
                }
            }
        }
        count
    }

    fn exact(a: &DMatrix<f64>, t: &DVector<f64>, h: &[f64], sol: &[i64]) -> usize {
        let n = a.ncols();
        sol.chunks(n)
            .filter(|z| {
                let zv = DVector::from_iterator(n, z.iter().map(|&x| x as f64));
                let v = a * zv - t;
                (0..n).all(|i| v[i].abs() <= h[i] * (1.0 + 1e-12))
            })
            .count()
    }

    #[test]
    fn unit_square_counts() {
        let a = DMatrix::identity(2, 2);
        let t = DVector::zeros(2);
        let s = box_solutions(&a, &t, &[1.5, 1.5], 1000).unwrap();
        assert_eq!(exact(&a, &t, &[1.5, 1.5], &s), 9);
    }

    #[test]
    fn sheared_matches_brute_force() {
        let phi = (1.0 + 5f64.sqrt()) / 2.0;
        let a = DMatrix::from_row_slice(2, 2, &[1.0, 0.0, phi, 1.0]);
        let t = DVector::from_vec(vec![0.3, -0.7]);
        let h = [7.0, 7.0];
        let s = box_solutions(&a, &t, &h, 10_000).unwrap();
        assert_eq!(exact(&a, &t, &h, &s), brute(&a, &t, &h, 40));
    }

    #[test]
    fn thin_slab_three_dims() {
        let phi = (1.0 + 5f64.sqrt()) / 2.0;
        let a = DMatrix::from_row_slice(3, 3, &[1.0, 0.0, phi * phi, phi, 1.0, -phi, 0.0, phi, 1.0]);
        let t = DVector::zeros(3);
        let h = [20.0, 20.0, 0.25];
        let s = box_solutions(&a, &t, &h, 100_000).unwrap();
        let mut brute_count = 0;
        let inv = a.clone().try_inverse().unwrap();
        let mut bound = [0i64; 3];
        for i in 0..3 {
            bound[i] = (inv.row(i).iter().zip(h.iter()).map(|(x, y)| x.abs() * y).sum::<f64>()).ceil() as i64 + 1;
        }
        for x in -bound[0]..=bound[0] {
            for y in -bound[1]..=bound[1] {
                for z in -bound[2]..=bound[2] {
                    let v = &a * DVector::from_vec(vec![x as f64, y as f64, z as f64]);
                    if (0..3).all(|i| v[i].abs() <= h[i] * (1.0 + 1e-12)) {
                        brute_count += 1;
                    }
                }
            }
        }
        assert_eq!(exact(&a, &t, &h, &s), brute_count);
        assert!(brute_count > 0);
    }

    #[test]
    fn over_budget_is_reported() {
        let a = DMatrix::identity(2, 2);
        let t = DVector::zeros(2);
        let e = box_solutions(&a, &t, &[1000.0, 1000.0], 100).unwrap_err();
        assert!(matches!(e, Error::WindowTooLarge { .. }));
    }
}
