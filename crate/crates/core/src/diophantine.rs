//! Uniformly Diophantine margins, wedge-norm residuals, exponent calculus and
//! the exception-volume Monte Carlo.

use std::str::FromStr;

use nalgebra::{DMatrix, DVector};
use num_rational::Rational64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::{dist_to_int, orthonormal_span, rank_of, residual_from_span};
use crate::torus_dynamics::small_vectors;

/// Cap on `grid points * s * (2T+1)^d / 2` for margin scans.
pub const MARGIN_BUDGET: f64 = 4e9;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ThetaTuple {
    pub s: usize,
    pub d: usize,
    pub thetas: Vec<Vec<f64>>,
}

impl ThetaTuple {
    pub fn new(thetas: Vec<Vec<f64>>) -> Result<Self> {
        let s = thetas.len();
        let d = thetas.first().map(|r| r.len()).unwrap_or(0);
        if s == 0 || d == 0 || thetas.iter().any(|r| r.len() != d) {
            return Err(Error::InvalidInput("theta needs s >= 1 rows of a common length d >= 1".into()));
        }
        Ok(ThetaTuple { s, d, thetas })
    }

    pub fn validate(&self) -> Result<()> {
        ThetaTuple::new(self.thetas.clone()).map(|_| ())
    }
}

/// `Phi(T) = c T^(-tau) (ln T)^beta`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PhiSpec {
    pub c: f64,
    pub tau: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub beta: Option<f64>,
}

impl PhiSpec {
    pub fn power(c: f64, tau: f64) -> Self {
        PhiSpec { c, tau, beta: None }
    }

    pub fn eval(&self, t: f64) -> f64 {
        let base = self.c * t.powf(-self.tau);
        match self.beta {
            Some(b) => base * t.ln().powf(b),
            None => base,
        }
    }
}

impl FromStr for PhiSpec {
    type Err = Error;

    /// Accepts `T^-2`, `0.3*T^-1.2` and `0.3*T^-1.2*log(T)^1`.
    fn from_str(s: &str) -> Result<Self> {
        let bad = || Error::InvalidInput(format!("cannot parse phi '{s}'"));
        let compact: String = s.chars().filter(|c| !c.is_whitespace()).collect();
        let mut c = 1.0;
        let mut tau = None;
        let mut beta = None;
        for factor in compact.split('*') {
            if let Some(e) = factor.strip_prefix("T^") {
                let e = e.trim_start_matches('(').trim_end_matches(')');
                tau = Some(-e.parse::<f64>().map_err(|_| bad())?);
            } else if let Some(e) = factor.strip_prefix("log(T)^") {
                beta = Some(e.parse::<f64>().map_err(|_| bad())?);
            } else if factor == "T" {
                tau = Some(-1.0);
            } else {
                c *= factor.parse::<f64>().map_err(|_| bad())?;
            }
        }
        let tau = tau.ok_or_else(bad)?;
        if !(c > 0.0) || !(tau > 0.0) {
            return Err(Error::InvalidInput("phi must be positive and decreasing".into()));
        }
        Ok(PhiSpec { c, tau, beta })
    }
}

impl std::fmt::Display for PhiSpec {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "{}*T^-{}", self.c, self.tau)?;
        if let Some(b) = self.beta {
            write!(f, "*log(T)^{b}")?;
        }
        Ok(())
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct UdtReport {
    #[serde(rename = "T")]
    pub t: u64,
    pub mesh: f64,
    pub raw_min: f64,
    pub slack: f64,
    pub certified: f64,
    pub argmin_xi: Vec<f64>,
}

/// Nonzero `u` with `|u|_inf <= T`, one per sign pair.
fn half_box(d: usize, t: u64) -> Vec<Vec<i64>> {
    small_vectors(d, t as i64)
}

fn check_margin_budget(points: f64, s: usize, d: usize, t: u64) -> Result<()> {
    let cost = points * s as f64 * ((2 * t + 1) as f64).powi(d as i32) / 2.0;
    if cost > MARGIN_BUDGET {
        return Err(Error::BudgetExceeded(format!(
            "margin scan needs {cost:.3e} evaluations; use a smaller T or coarser mesh"
        )));
    }
    Ok(())
}

fn margin_with(theta: &ThetaTuple, us: &[Vec<i64>], xi: &[f64]) -> f64 {
    let mut best: f64 = 0.0;
    for th in &theta.thetas {
        let diff: Vec<f64> = xi.iter().zip(th).map(|(x, t)| x - t).collect();
        let mut m = 0.5f64;
        for u in us {
            let dot: f64 = u.iter().zip(&diff).map(|(&a, b)| a as f64 * b).sum();
            m = m.min(dist_to_int(dot));
            if m <= best {
                break;
            }
        }
        best = best.max(m);
    }
    best
}

fn margin_1d(theta: &ThetaTuple, t: u64, xi: f64) -> f64 {
    let mut best: f64 = 0.0;
    for th in &theta.thetas {
        let diff = xi - th[0];
        let mut m = 0.5f64;
        for u in 1..=t {
            m = m.min(dist_to_int(u as f64 * diff));
            if m <= best {
                break;
            }
        }
        best = best.max(m);
    }
    best
}

/// `max_i min_{0 < |u|_inf <= T} <u . (xi - theta_i)>`.
pub fn udt_margin(theta: &ThetaTuple, t: u64, xi: &[f64]) -> Result<f64> {
    theta.validate()?;
    if t < 1 {
        return Err(Error::InvalidInput("T must be at least 1".into()));
    }
    if xi.len() != theta.d {
        return Err(Error::DimensionMismatch { expected: theta.d, got: xi.len() });
    }
    check_margin_budget(1.0, theta.s, theta.d, t)?;
    if theta.d == 1 {
        return Ok(margin_1d(theta, t, xi[0]));
    }
    Ok(margin_with(theta, &half_box(theta.d, t), xi))
}

fn grid_points(d: usize, per_axis: usize, h: f64, offset: &[f64]) -> Vec<Vec<f64>> {
    let total = per_axis.pow(d as u32);
    (0..total)
        .map(|idx| {
            let mut rest = idx;
            let mut x = vec![0.0; d];
            for (k, slot) in x.iter_mut().enumerate().rev() {
                *slot = offset[k] + (rest % per_axis) as f64 * h;
                rest /= per_axis;
            }
            x
        })
        .collect()
}

/// Grid scan of the margin over `[0,1)^d` shifted by `offset`, certified by
/// the Lipschitz slack `d T h`.
pub fn udt_certified_inf_shifted(theta: &ThetaTuple, t: u64, h: f64, offset: &[f64]) -> Result<UdtReport> {
    theta.validate()?;
    if !(h > 0.0 && h <= 1.0) {
        return Err(Error::InvalidInput("mesh must lie in (0, 1]".into()));
    }
    let d = theta.d;
    let per_axis = (1.0 / h).ceil() as usize;
    check_margin_budget((per_axis as f64).powi(d as i32), theta.s, d, t)?;
    let us = half_box(d, t);
    let pts = grid_points(d, per_axis, h, offset);
    let (raw_min, argmin) = pts
        .par_iter()
        .map(|xi| {
            let m = if d == 1 { margin_1d(theta, t, xi[0]) } else { margin_with(theta, &us, xi) };
            (m, xi.clone())
        })
        .reduce(
            || (f64::INFINITY, Vec::new()),
            |a, b| if b.0 < a.0 || (b.0 == a.0 && b.1 < a.1) { b } else { a },
        );
    let slack = d as f64 * t as f64 * h;
    Ok(UdtReport { t, mesh: h, raw_min, slack, certified: raw_min - slack, argmin_xi: argmin })
}

pub fn udt_certified_inf(theta: &ThetaTuple, t: u64, h: f64) -> Result<UdtReport> {
    udt_certified_inf_shifted(theta, t, h, &vec![0.0; theta.d])
}

/// `T^3 min_{1 <= |q|, |v| <= T} <q v sigma> / sqrt(q^2 + v^2)`.
pub fn bad_pair_margin(sigma: f64, t: u64) -> f64 {
    let t = t.max(1);
    let best = (1..=t)
        .into_par_iter()
        .map(|q| {
            let mut m = f64::INFINITY;
            for v in 1..=t {
                let val = dist_to_int((q * v) as f64 * sigma) / ((q * q + v * v) as f64).sqrt();
                m = m.min(val);
            }
            m
        })
        .reduce(|| f64::INFINITY, f64::min);
    (t as f64).powi(3) * best
}

/// `min_{(P,Q) != 0, |P|,|Q| <= T} max(|P|,|Q|)^(2+eta) <P a + Q b>`.
pub fn schmidt_margin(a: f64, b: f64, t: u64, eta: f64) -> f64 {
    small_vectors(2, t as i64)
        .par_iter()
        .map(|u| {
            let n = u[0].abs().max(u[1].abs()) as f64;
            n.powf(2.0 + eta) * dist_to_int(u[0] as f64 * a + u[1] as f64 * b)
        })
        .reduce(|| f64::INFINITY, f64::min)
}

fn rat(n: i64) -> Rational64 {
    Rational64::from_integer(n)
}

/// `d (tau - d + 1)`; requires `tau >= d`.
pub fn phi_visibility_exponent(d: i64, tau: Rational64) -> Result<Rational64> {
    if d < 1 {
        return Err(Error::InvalidInput("d must be positive".into()));
    }
    if tau < rat(d) {
        return Err(Error::InvalidInput(format!("tau = {tau} is below d = {d}")));
    }
    Ok(rat(d) * (tau - rat(d) + rat(1)))
}

/// `d (s + 1) / (s - d)`; requires `s > d`.
pub fn convergence_threshold(s: i64, d: i64) -> Result<Rational64> {
    if s <= d || d < 1 {
        return Err(Error::InvalidInput(format!("need s > d >= 1, got s = {s}, d = {d}")));
    }
    Ok(Rational64::new(d * (s + 1), s - d))
}

/// `n (n - 1)^2 / (s - (n - 1))`; requires `s >= n >= 2`.
pub fn alpha_exponent(n: i64, s: i64) -> Result<Rational64> {
    if n < 2 || s < n {
        return Err(Error::InvalidInput(format!("need s >= n >= 2, got n = {n}, s = {s}")));
    }
    Ok(Rational64::new(n * (n - 1) * (n - 1), s - (n - 1)))
}

/// `sqrt(det Gram)` of the given vectors.
pub fn wedge_norm(vectors: &[Vec<f64>]) -> f64 {
    let r = vectors.len();
    if r == 0 {
        return 0.0;
    }
    let g = DMatrix::from_fn(r, r, |i, j| vectors[i].iter().zip(&vectors[j]).map(|(a, b)| a * b).sum::<f64>());
    g.determinant().max(0.0).sqrt()
}

/// Residual of `y` against the column span of the integer matrix `U`
/// (rows of `u` are the `s` rows of the matrix).
pub fn projective_residual(u: &[Vec<i64>], y: &[f64]) -> Result<f64> {
    let s = u.len();
    if s == 0 || y.len() != s {
        return Err(Error::DimensionMismatch { expected: s, got: y.len() });
    }
    let d = u[0].len();
    if u.iter().all(|r| r.iter().all(|&x| x == 0)) {
        return Err(Error::InvalidInput("U must be nonzero".into()));
    }
    let m = DMatrix::from_fn(s, d, |i, j| u[i][j] as f64);
    Ok(residual_from_span(&m, &DVector::from_column_slice(y)))
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ConsistencyReport {
    pub trials: usize,
    pub violations_found: usize,
    pub skipped: usize,
    pub failures: usize,
    /// Largest `residual / (sqrt(s) Phi(T))` seen.
    pub worst_ratio: f64,
}

/// Default `T_max` by dimension.
pub fn default_t_max(d: usize) -> u64 {
    match d {
        1 => 1000,
        2 => 60,
        _ => 16,
    }
}

fn argmin_u(us: &[Vec<i64>], diff: &[f64]) -> (Vec<i64>, f64) {
    let mut best = (us[0].clone(), f64::INFINITY);
    for u in us {
        let dot: f64 = u.iter().zip(diff).map(|(&a, b)| a as f64 * b).sum();
        let v = dist_to_int(dot);
        if v < best.1 {
            best = (u.clone(), v);
        }
    }
    best
}

/// Search for `xi` with margin below `Phi(T)`: a coarse grid, then repeated
/// local refinement around the best cell.
fn find_violation(theta: &ThetaTuple, us: &[Vec<i64>], bound: f64) -> Option<Vec<f64>> {
    let d = theta.d;
    let per_axis = match d {
        1 => 2000,
        2 => 60,
        _ => 16,
    };
    let h = 1.0 / per_axis as f64;
    let pts = grid_points(d, per_axis, h, &vec![0.0; d]);
    let mut scored: Vec<(f64, Vec<f64>)> = pts.into_iter().map(|x| (margin_with(theta, us, &x), x)).collect();
    scored.sort_by(|a, b| a.0.partial_cmp(&b.0).unwrap().then(a.1.partial_cmp(&b.1).unwrap()));
    for (m, x) in scored.iter().take(8) {
        if *m < bound {
            return Some(x.clone());
        }
        let mut center = x.clone();
        let mut width = h;
        for _ in 0..8 {
            let k = 11usize;
            let step = 2.0 * width / (k - 1) as f64;
            let off: Vec<f64> = center.iter().map(|c| c - width).collect();
            let (bm, bx) = grid_points(d, k, step, &off)
                .into_iter()
                .map(|p| {
                    let p: Vec<f64> = p.iter().map(|v| v - v.floor()).collect();
                    (margin_with(theta, us, &p), p)
                })
                .fold((f64::INFINITY, Vec::new()), |a, b| if b.0 < a.0 { b } else { a });
            if bm < bound {
                return Some(bx);
            }
            center = bx;
            width = step;
        }
    }
    None
}

/// For each trial, look for a margin violation against `phi` and check that
/// the reconstructed `(U, p)` satisfies the wedge bound and the size bound on
/// `p`.
pub fn udt_violation_consistency(theta: &ThetaTuple, phi: &PhiSpec, trials: usize) -> Result<ConsistencyReport> {
    theta.validate()?;
    let d = theta.d;
    let s = theta.s;
    let t_max = default_t_max(d);
    let mut ts = vec![1u64];
    while ts.last().unwrap() * 2 <= t_max {
        let next = ts.last().unwrap() * 2;
        ts.push(next);
    }
    let mut rep = ConsistencyReport { trials, violations_found: 0, skipped: 0, failures: 0, worst_ratio: 0.0 };
    for trial in 0..trials {
        let t = ts[trial % ts.len()];
        let bound = phi.eval(t as f64);
        let us = half_box(d, t);
        let Some(xi) = find_violation(theta, &us, bound) else {
            rep.skipped += 1;
            continue;
        };
        rep.violations_found += 1;
        let mut rows = Vec::with_capacity(s);
        let mut y = Vec::with_capacity(s);
        let mut ok = true;
        for th in &theta.thetas {
            let diff: Vec<f64> = xi.iter().zip(th).map(|(x, t)| x - t).collect();
            let (u, _) = argmin_u(&us, &diff);
            let dot: f64 = u.iter().zip(&diff).map(|(&a, b)| a as f64 * b).sum();
            let p = dot.round();
            let unorm = u.iter().map(|&x| (x * x) as f64).sum::<f64>().sqrt();
            let tnorm = th.iter().fold(1.0f64, |m, x| m.max(x.abs()));
            if p.abs() > 4.0 * (d as f64).sqrt() * unorm * tnorm {
                ok = false;
            }
            let tu: f64 = u.iter().zip(th).map(|(&a, b)| a as f64 * b).sum();
            y.push(p + tu);
            rows.push(u);
        }
        let umat: Vec<Vec<i64>> = (0..s).map(|i| rows[i].clone()).collect();
        let resid = projective_residual(&umat, &y)?;
        let limit = (s as f64).sqrt() * bound;
        rep.worst_ratio = rep.worst_ratio.max(resid / limit);
        if !(resid < limit) || !ok {
            rep.failures += 1;
        }
    }
    Ok(rep)
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct McReport {
    #[serde(rename = "T")]
    pub t: u64,
    pub rank: usize,
    pub samples: usize,
    pub hits: usize,
    pub estimate: f64,
    pub std_err: f64,
    pub bound: f64,
    pub bound_ratio: f64,
    pub seed: u64,
}

const MC_CHUNK: usize = 4096;

/// Monte Carlo volume of `Theta in (-N, N)^(d x s)` admitting `p` with
/// `|p_i| <= 4 sqrt(d) N |u_i|` and `residual(U, p + t_U(Theta)) < sqrt(s) Phi(T)`.
///
/// Rows of `u` are the `u_i`. Candidate `p` are enumerated on a pivot set of
/// `rank(U)` rows; the remaining coordinates take the two nearest integers to
/// the lifted point.
pub fn exception_volume_mc(
    u: &[Vec<i64>],
    t: u64,
    phi: &PhiSpec,
    n_box: f64,
    samples: usize,
    seed: u64,
) -> Result<McReport> {
    let s = u.len();
    if s == 0 {
        return Err(Error::InvalidInput("U needs at least one row".into()));
    }
    let d = u[0].len();
    if d == 0 || u.iter().any(|r| r.len() != d) {
        return Err(Error::InvalidInput("U rows must share a positive length".into()));
    }
    if u.iter().any(|r| {
        let m = r.iter().map(|x| x.abs()).max().unwrap_or(0);
        m < 1 || m as u64 > t
    }) {
        return Err(Error::InvalidInput("each row needs 1 <= |u_i|_inf <= T".into()));
    }
    // U as an s x d matrix; its column span lives in R^s
    let um = DMatrix::from_fn(s, d, |i, j| u[i][j] as f64);
    let cols: Vec<DVector<f64>> = (0..d).map(|j| um.column(j).clone_owned()).collect();
    let r = rank_of(&cols, 1e-10);
    let q = orthonormal_span(&um, 1e-10);
    let rho = (s as f64).sqrt() * phi.eval(t as f64);

    // greedy pivot rows: maximise |det| of the r x r restriction of q
    let mut pivots: Vec<usize> = Vec::new();
    for _ in 0..r {
        let mut best = (0usize, -1.0);
        for i in 0..s {
            if pivots.contains(&i) {
                continue;
            }
            let mut rows = pivots.clone();
            rows.push(i);
            let sub = DMatrix::from_fn(rows.len(), r, |a, b| q[(rows[a], b)]);
            let sv = sub.svd(false, false).singular_values;
            let vol: f64 = sv.iter().product();
            if vol > best.1 {
                best = (i, vol);
            }
        }
        pivots.push(best.0);
    }
    let qp = DMatrix::from_fn(r, r, |a, b| q[(pivots[a], b)]);
    let qp_inv = qp.try_inverse().ok_or(Error::DegenerateLattice)?;
    let others: Vec<usize> = (0..s).filter(|i| !pivots.contains(i)).collect();
    let pbound: Vec<i64> = u
        .iter()
        .map(|row| {
            let n2 = row.iter().map(|&x| (x * x) as f64).sum::<f64>().sqrt();
            (4.0 * (d as f64).sqrt() * n_box * n2).floor() as i64
        })
        .collect();

    let residual = |y: &[f64]| -> f64 {
        let mut proj = vec![0.0; r];
        for (k, pk) in proj.iter_mut().enumerate() {
            *pk = (0..s).map(|i| q[(i, k)] * y[i]).sum();
        }
        (0..s)
            .map(|i| {
                let v = y[i] - (0..r).map(|k| q[(i, k)] * proj[k]).sum::<f64>();
                v * v
            })
            .sum::<f64>()
            .sqrt()
    };

    let hit = |tv: &[f64]| -> bool {
        // enumerate integer p on pivot rows
        let mut idx: Vec<i64> = pivots.iter().map(|&i| -pbound[i]).collect();
        let mut y = vec![0.0; s];
        loop {
            for (a, &i) in pivots.iter().enumerate() {
                y[i] = idx[a] as f64 + tv[i];
            }
            // lift: the span point agreeing with y on the pivots
            let yp = DVector::from_iterator(r, pivots.iter().map(|&i| y[i]));
            let coef = &qp_inv * yp;
            let combos = 1usize << others.len();
            let mut feasible = true;
            let mut lifted = vec![0.0; others.len()];
            for (a, &i) in others.iter().enumerate() {
                lifted[a] = (0..r).map(|k| q[(i, k)] * coef[k]).sum::<f64>() - tv[i];
                if (lifted[a].round().abs() as i64) > pbound[i] + 1 {
                    feasible = false;
                }
            }
            if feasible {
                for mask in 0..combos {
                    let mut okp = true;
                    for (a, &i) in others.iter().enumerate() {
                        let base = lifted[a].floor() as i64;
                        let p = if mask >> a & 1 == 1 { base + 1 } else { base };
                        if p.abs() > pbound[i] {
                            okp = false;
                            break;
                        }
                        y[i] = p as f64 + tv[i];
                    }
                    if okp && residual(&y) < rho {
                        return true;
                    }
                }
            }
            let mut k = 0;
            loop {
                if k == r {
                    return false;
                }
                if idx[k] < pbound[pivots[k]] {
                    idx[k] += 1;
                    break;
                }
                idx[k] = -pbound[pivots[k]];
                k += 1;
            }
        }
    };

    let chunks = samples.div_ceil(MC_CHUNK);
    let hits: usize = (0..chunks)
        .into_par_iter()
        .map(|c| {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            rng.set_stream(c as u64);
            let count = MC_CHUNK.min(samples - c * MC_CHUNK);
            let mut tv = vec![0.0; s];
            let mut local = 0usize;
            for _ in 0..count {
                for (i, row) in u.iter().enumerate() {
                    tv[i] = row.iter().map(|&x| x as f64 * rng.random_range(-n_box..n_box)).sum();
                }
                if hit(&tv) {
                    local += 1;
                }
            }
            local
        })
        .sum();
    let vol = (2.0 * n_box).powi((d * s) as i32);
    let p = hits as f64 / samples as f64;
    let estimate = p * vol;
    let std_err = vol * (p * (1.0 - p) / samples as f64).sqrt();
    let bound = (t as f64).powi(r as i32) * phi.eval(t as f64).powi((s - r) as i32);
    Ok(McReport {
        t,
        rank: r,
        samples,
        hits,
        estimate,
        std_err,
        bound,
        bound_ratio: estimate / bound,
        seed,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::forest_gen::golden_ratio;

    fn peres_theta() -> ThetaTuple {
        ThetaTuple::new(vec![vec![0.0], vec![golden_ratio()]]).unwrap()
    }

    #[test]
    fn margin_examples() {
        let th = peres_theta();
        assert!((udt_margin(&th, 1, &[0.0]).unwrap() - (2.0 - golden_ratio())).abs() < 1e-12);
        assert!((udt_margin(&th, 1, &[0.5]).unwrap() - 0.5).abs() < 1e-12);
    }

    #[test]
    fn rational_kill() {
        let th = ThetaTuple::new(vec![vec![0.0], vec![0.5]]).unwrap();
        let r = udt_certified_inf(&th, 2, 0.01).unwrap();
        assert_eq!(r.raw_min, 0.0);
        assert!(r.certified <= r.raw_min);
    }

    #[test]
    fn bad_pair_small_cases() {
        let v = bad_pair_margin(golden_ratio(), 1);
        assert!((v - (2.0 - golden_ratio()) / 2f64.sqrt()).abs() < 1e-12);
        assert_eq!(bad_pair_margin(0.5, 2), 0.0);
    }

    #[test]
    fn schmidt_rational_kill() {
        assert!(schmidt_margin(0.5, 1.0 / 3.0, 6, 0.1) < 1e-12);
    }

    #[test]
    fn exponents() {
        assert_eq!(phi_visibility_exponent(1, rat(3)).unwrap(), rat(3));
        assert_eq!(phi_visibility_exponent(1, rat(1)).unwrap(), rat(1));
        assert!(phi_visibility_exponent(2, rat(1)).is_err());
        assert_eq!(convergence_threshold(2, 1).unwrap(), rat(3));
        assert_eq!(convergence_threshold(4, 3).unwrap(), rat(15));
        assert!(convergence_threshold(2, 2).is_err());
        assert_eq!(alpha_exponent(2, 3).unwrap(), rat(1));
        assert!(alpha_exponent(3, 2).is_err());
    }

    #[test]
    fn wedge_examples() {
        assert!((wedge_norm(&[vec![1.0, 0.0], vec![0.0, 1.0]]) - 1.0).abs() < 1e-12);
        assert!((wedge_norm(&[vec![1.0, 1.0, 0.0], vec![0.0, 1.0, 1.0]]) - 3f64.sqrt()).abs() < 1e-12);
        assert_eq!(wedge_norm(&[vec![1.0, 2.0], vec![2.0, 4.0]]), 0.0);
    }

    #[test]
    fn residual_examples() {
        assert!((projective_residual(&[vec![1], vec![0], vec![0]], &[3.0, 4.0, 0.0]).unwrap() - 4.0).abs() < 1e-12);
        assert!(projective_residual(&[vec![1], vec![2], vec![3]], &[2.0, 4.0, 6.0]).unwrap() < 1e-12);
    }

    #[test]
    fn phi_parsing() {
        let p: PhiSpec = "T^-2".parse().unwrap();
        assert_eq!(p, PhiSpec::power(1.0, 2.0));
        let p: PhiSpec = "0.3*T^-1.2".parse().unwrap();
        assert_eq!(p, PhiSpec::power(0.3, 1.2));
        assert!("T^2".parse::<PhiSpec>().is_err());
        assert!("banana".parse::<PhiSpec>().is_err());
    }

    #[test]
    fn zero_theta_violation_has_zero_residual() {
        let th = ThetaTuple::new(vec![vec![0.0], vec![0.0], vec![0.0]]).unwrap();
        let rep = udt_violation_consistency(&th, &PhiSpec::power(0.1, 1.0), 3).unwrap();
        assert_eq!(rep.violations_found, 3);
        assert_eq!(rep.failures, 0);
        assert!(rep.worst_ratio < 1e-9);
    }

    #[test]
    fn vacuous_phi_counts_everything() {
        let u = vec![vec![1], vec![2], vec![3]];
        let r = exception_volume_mc(&u, 4, &PhiSpec::power(100.0, 1.0), 1.0, 2000, 0).unwrap();
        assert_eq!(r.hits, 2000);
        assert!((r.estimate - 8.0).abs() < 1e-12);
    }
}
