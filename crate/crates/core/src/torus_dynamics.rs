//! Orbits of rotations on `T^d`: density tests, small-denominator witnesses,
//! rational-orbit lattices, Mahler transference, and finite certification of
//! unavoidable sections of `T^3`.

use nalgebra::{DMatrix, DVector};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::circle::uncovered;
use crate::error::{Error, Result};
use crate::forest_gen::Section;
use crate::lattice_core::{dual, Lattice};
use crate::linalg::{dist_to_int, frac, rank_of, sigma_min};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct OrbitQuery {
    pub d: usize,
    pub xi: Vec<f64>,
    #[serde(rename = "M")]
    pub m: u64,
    pub epsilon: f64,
}

impl OrbitQuery {
    pub fn new(xi: Vec<f64>, m: u64, epsilon: f64) -> Result<Self> {
        let q = OrbitQuery { d: xi.len(), xi, m, epsilon };
        q.validate()?;
        Ok(q)
    }

    pub fn validate(&self) -> Result<()> {
        if self.d == 0 || self.xi.len() != self.d {
            return Err(Error::DimensionMismatch { expected: self.d, got: self.xi.len() });
        }
        if !(self.epsilon > 0.0 && self.epsilon < 0.5) {
            return Err(Error::InvalidInput("epsilon must lie in (0, 1/2)".into()));
        }
        if self.m < 1 {
            return Err(Error::InvalidInput("M must be at least 1".into()));
        }
        Ok(())
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SWitness {
    pub u: Vec<i64>,
    /// `<u . xi>`
    pub distance: f64,
    /// `d^(3/2) eps^(d-1) / M^(1/d)`
    pub bound: f64,
}

/// Sup-norm distance on the torus.
fn torus_sup(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).fold(0.0, |m, (x, y)| m.max(dist_to_int(x - y)))
}

fn orbit(q: &OrbitQuery) -> Vec<Vec<f64>> {
    (0..=q.m)
        .map(|k| q.xi.iter().map(|x| frac(k as f64 * x)).collect())
        .collect()
}

/// Whether `{k xi mod 1 : 0 <= k <= M}` is `eps`-dense in `T^d` (sup-norm).
///
/// `d = 1` sorts the orbit and checks the largest gap against `2 eps`. For
/// `d = 2, 3` cells are refined adaptively: a cell of half-width `w` is covered
/// once its center lies within `eps - w` of the orbit, and a center farther
/// than `eps` from the orbit disproves density.
pub fn is_eps_dense(q: &OrbitQuery) -> Result<bool> {
    q.validate()?;
    let eps = q.epsilon;
    let pts = orbit(q);
    match q.d {
        1 => {
            let mut xs: Vec<f64> = pts.iter().map(|p| p[0]).collect();
            xs.sort_by(|a, b| a.partial_cmp(b).unwrap());
            let mut gap = xs[0] + 1.0 - xs[xs.len() - 1];
            for w in xs.windows(2) {
                gap = gap.max(w[1] - w[0]);
            }
            Ok(gap <= 2.0 * eps)
        }
        2 | 3 => {
            let d = q.d;
            let per_axis = (1.0 / eps).ceil() as usize;
            let half = 0.5 / per_axis as f64;
            let mut stack: Vec<(Vec<f64>, f64)> = Vec::new();
            let mut idx = vec![0usize; d];
            for _ in 0..per_axis.pow(d as u32) {
                stack.push((idx.iter().map(|&i| (2 * i + 1) as f64 * half).collect(), half));
                for s in idx.iter_mut() {
                    *s += 1;
                    if *s < per_axis {
                        break;
                    }
                    *s = 0;
                }
            }
            while let Some((c, w)) = stack.pop() {
                let dist = pts.iter().map(|p| torus_sup(p, &c)).fold(f64::INFINITY, f64::min);
                if dist > eps {
                    return Ok(false);
                }
                if dist <= eps - w || w < 1e-9 {
                    continue;
                }
                let h = w / 2.0;
                for mask in 0..(1usize << d) {
                    let child: Vec<f64> =
                        (0..d).map(|i| c[i] + if mask >> i & 1 == 1 { h } else { -h }).collect();
                    stack.push((child, h));
                }
            }
            Ok(true)
        }
        _ => Err(Error::Unsupported(format!("density test in dimension {}", q.d))),
    }
}

/// Integer vectors with `0 < |u|_inf <= k`, one per `+-` pair (first nonzero
/// entry positive), ordered by sup-norm then lexicographically.
pub fn small_vectors(d: usize, k: i64) -> Vec<Vec<i64>> {
    (1..=k).flat_map(|r| shell_vectors(d, r)).collect()
}

/// The sup-norm shell `|u|_inf = r` of [`small_vectors`].
pub fn shell_vectors(d: usize, r: i64) -> Vec<Vec<i64>> {
    let mut out = Vec::new();
    let side = (2 * r + 1) as usize;
    let mut u = vec![0i64; d];
    for idx in 0..side.pow(d as u32) {
        let mut rest = idx;
        for slot in u.iter_mut().rev() {
            *slot = (rest % side) as i64 - r;
            rest /= side;
        }
        let norm = u.iter().map(|x| x.abs()).max().unwrap_or(0);
        let first = u.iter().find(|&&x| x != 0).copied().unwrap_or(0);
        if norm == r && first > 0 {
            out.push(u.clone());
        }
    }
    out
}

/// First `u` with `0 < |u|_inf <= floor(d / eps)` and
/// `<u . xi> <= d^(3/2) eps^(d-1) / M^(1/d)`.
pub fn s_witness(xi: &[f64], d: usize, epsilon: f64, m: u64) -> Option<SWitness> {
    let df = d as f64;
    let bound = df.powf(1.5) * epsilon.powi(d as i32 - 1) / (m as f64).powf(1.0 / df);
    let k = (df / epsilon + 1e-9).floor() as i64;
    for u in small_vectors(d, k) {
        let dot: f64 = u.iter().zip(xi).map(|(&a, &b)| a as f64 * b).sum();
        let dist = dist_to_int(dot);
        if dist <= bound + 1e-12 {
            return Some(SWitness { u, distance: dist, bound });
        }
    }
    None
}

/// `n` probe points of `[0,1)^d`: a centered grid with `floor((n/2)^(1/d))`
/// points per axis, the rest uniform from a seeded stream.
pub fn probe_points(d: usize, n: usize, seed: u64) -> Vec<Vec<f64>> {
    let mut g = ((n / 2) as f64).powf(1.0 / d as f64).floor() as usize;
    while g.pow(d as u32) > n / 2 {
        g -= 1;
    }
    let mut out = Vec::with_capacity(n);
    for idx in 0..g.pow(d as u32) {
        let mut rest = idx;
        let mut x = Vec::with_capacity(d);
        for _ in 0..d {
            x.push(((rest % g) as f64 + 0.5) / g as f64);
            rest /= g;
        }
        out.push(x);
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    while out.len() < n {
        out.push((0..d).map(|_| rng.random::<f64>()).collect());
    }
    out
}

/// `ceil(2^d eps^-d)`.
pub fn propreduc_m(d: usize, epsilon: f64) -> u64 {
    ((2.0 / epsilon).powi(d as i32) - 1e-9).ceil() as u64
}

/// Samples `xi` where `orbit not eps-dense` holds without a small witness.
pub fn check_propreduc(d: usize, epsilon: f64, xi_samples: &[Vec<f64>]) -> Result<Vec<Vec<f64>>> {
    check_propreduc_with_m(d, epsilon, propreduc_m(d, epsilon), xi_samples)
}

/// Same as [`check_propreduc`] with an explicit `M`.
pub fn check_propreduc_with_m(d: usize, epsilon: f64, m: u64, xi_samples: &[Vec<f64>]) -> Result<Vec<Vec<f64>>> {
    let flags: Vec<Result<Option<Vec<f64>>>> = xi_samples
        .par_iter()
        .map(|xi| {
            let q = OrbitQuery::new(xi.clone(), m, epsilon)?;
            if is_eps_dense(&q)? || s_witness(xi, d, epsilon, m).is_some() {
                Ok(None)
            } else {
                Ok(Some(xi.clone()))
            }
        })
        .collect();
    let mut out = Vec::new();
    for f in flags {
        if let Some(x) = f? {
            out.push(x);
        }
    }
    Ok(out)
}

/// Column Hermite normal form of an integer `d x m` generator matrix; the
/// first `d` columns of the result form a lower-triangular basis.
fn hermite_columns(mut g: Vec<Vec<i128>>, d: usize) -> Vec<Vec<i128>> {
    let m = g.len();
    for row in 0..d {
        for j in row + 1..m {
            // gcd step on (g[row][row], g[j][row])
            while g[j][row] != 0 {
                let q = g[row][row].div_euclid(g[j][row]);
                for r in 0..d {
                    g[row][r] -= q * g[j][r];
                }
                g.swap(row, j);
            }
        }
        if g[row][row] < 0 {
            for r in 0..d {
                g[row][r] = -g[row][r];
            }
        }
    }
    g.truncate(d);
    g
}

/// `Lambda(p, q) = span_Z {p / q, e_1 .. e_d}` and its dual.
pub fn rational_orbit_lattices(p: &[i64], q: i64) -> Result<(Lattice, Lattice)> {
    let basis = rational_orbit_basis(p, q)?;
    let d = p.len();
    let m = DMatrix::from_fn(d, d, |i, j| basis[j][i] as f64 / q as f64);
    let l = Lattice::from_matrix(&m)?;
    let ld = dual(&l)?;
    Ok((l, ld))
}

/// Integer columns `q b_j` of the reduced basis of `Lambda(p, q)`.
pub fn rational_orbit_basis(p: &[i64], q: i64) -> Result<Vec<Vec<i128>>> {
    let d = p.len();
    if d == 0 || q < 1 {
        return Err(Error::InvalidInput("need d >= 1 and q >= 1".into()));
    }
    let g = p.iter().fold(q, |acc, &x| num_integer::gcd(acc, x));
    if g != 1 {
        return Err(Error::InvalidInput(format!("gcd(p, q) = {g}, expected 1")));
    }
    let mut gens: Vec<Vec<i128>> = vec![p.iter().map(|&x| x as i128).collect()];
    for i in 0..d {
        let mut e = vec![0i128; d];
        e[i] = q as i128;
        gens.push(e);
    }
    Ok(hermite_columns(gens, d))
}

/// `[Lambda(p,q) : Z^d] = q`, checked exactly on the integer basis.
pub fn orbit_lattice_index_ok(p: &[i64], q: i64) -> Result<bool> {
    let b = rational_orbit_basis(p, q)?;
    let d = p.len();
    let det: i128 = (0..d).map(|i| b[i][i]).product();
    Ok(det.abs() == (q as i128).pow(d as u32 - 1))
}

/// Nonzero `v` with `|v|_inf <= d U^(1/d)` and `<xi . v> <= d U^(-(d-1)/d) C`.
pub fn mahler_transfer(xi: &[f64], q: i64, c: f64, u: f64) -> Result<Vec<i64>> {
    let d = xi.len();
    if d == 0 {
        return Err(Error::InvalidInput("empty xi".into()));
    }
    let qdist = xi.iter().fold(0.0, |m: f64, x| m.max(dist_to_int(q as f64 * x)));
    if !(c > 0.0 && c < 1.0 && u >= 1.0) || (q.unsigned_abs() as f64) > u || q == 0 || qdist > c + 1e-12 {
        return Err(Error::InvalidInput("transference hypotheses fail".into()));
    }
    let df = d as f64;
    let norm_bound = df * u.powf(1.0 / df);
    let dist_bound = df * u.powf(-(df - 1.0) / df) * c;
    let k = (norm_bound + 1e-9).floor() as i64;
    for v in small_vectors(d, k) {
        let dot: f64 = v.iter().zip(xi).map(|(&a, &b)| a as f64 * b).sum();
        if dist_to_int(dot) <= dist_bound + 1e-12 {
            return Ok(v);
        }
    }
    Err(Error::TransferenceWitnessNotFound)
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CheckedQ {
    pub q: [i64; 3],
    /// Segments whose arcs jointly cover the circle.
    pub cover: Vec<usize>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct UnavoidabilityCertificate {
    pub q_tail_bound: f64,
    pub sigma_min: f64,
    pub min_length: f64,
    /// `sqrt(k)` for `k` segments, from `|D w|_inf >= |D w|_2 / sqrt(k)`.
    pub norm_constant: f64,
    pub checked: Vec<CheckedQ>,
}

impl UnavoidabilityCertificate {
    /// Re-check of `min_length * sigma_min / norm_constant * q_tail_bound >= 1`.
    pub fn tail_ok(&self) -> bool {
        self.min_length * self.sigma_min / self.norm_constant * self.q_tail_bound >= 1.0 - 1e-12
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "result", rename_all = "snake_case")]
pub enum UnavoidOutcome {
    Certified(UnavoidabilityCertificate),
    /// `q . x mod 1` misses the arc `(gap_start, gap_start + gap_width)`.
    Counterexample { q: [i64; 3], gap_start: f64, gap_width: f64 },
}

/// Arcs `q . J_i` on the circle, as `(start, signed length)`.
pub fn section_arcs(section: &Section, q: &[i64; 3]) -> Vec<(f64, f64)> {
    section
        .segments
        .iter()
        .map(|s| {
            let dir = s.direction();
            let start: f64 = (0..3).map(|k| q[k] as f64 * s.a[k]).sum();
            let len: f64 = (0..3).map(|k| q[k] as f64 * dir[k]).sum();
            (start, len)
        })
        .collect()
}

/// Largest sup-norm shell scanned by [`certify_unavoidable`].
pub const MAX_SHELL: i64 = 60;

/// Check every primitive `q` up to the tail bound; beyond it one arc alone
/// has length at least one.
pub fn certify_unavoidable(section: &Section) -> Result<UnavoidOutcome> {
    let k = section.segments.len();
    if k < 3 {
        return Err(Error::InvalidInput("need at least three segments".into()));
    }
    let dirs: Vec<DVector<f64>> = section
        .segments
        .iter()
        .map(|s| DVector::from_column_slice(&s.direction()))
        .collect();
    if rank_of(&dirs, 1e-9) < 3 {
        return Err(Error::InvalidInput("segment directions are dependent".into()));
    }
    let unit = DMatrix::from_fn(k, 3, |i, j| dirs[i][j] / dirs[i].norm());
    let smin = sigma_min(&unit);
    let lmin = section.segments.iter().map(|s| s.length()).fold(f64::INFINITY, f64::min);
    let norm_constant = (k as f64).sqrt();
    let bound = norm_constant / (smin * lmin);
    // sup-norm shells, each sorted by Euclidean norm
    let mut checked = Vec::new();
    let mut r = 1i64;
    while (r as f64) <= bound * (1.0 + 1e-12) {
        if r > MAX_SHELL {
            return Err(Error::BudgetExceeded(format!("tail bound {bound:.3e} exceeds the scan limit")));
        }
        let mut shell: Vec<(f64, [i64; 3])> = shell_vectors(3, r)
            .into_iter()
            .filter(|u| num_integer::gcd(num_integer::gcd(u[0], u[1]), u[2]) == 1)
            .map(|u| {
                let n = ((u[0] * u[0] + u[1] * u[1] + u[2] * u[2]) as f64).sqrt();
                (n, [u[0], u[1], u[2]])
            })
            .filter(|(n, _)| *n <= bound * (1.0 + 1e-12))
            .collect();
        shell.sort_by(|x, y| x.0.partial_cmp(&y.0).unwrap().then(x.1.cmp(&y.1)));
        for (n, q) in shell {
            let arcs = section_arcs(section, &q);
            let gaps = uncovered(&arcs, 1e-9);
            if let Some(&(s, w)) = gaps.first() {
                return Ok(UnavoidOutcome::Counterexample { q, gap_start: s, gap_width: w });
            }
            let cover = match arcs.iter().position(|a| a.1.abs() >= 1.0 - 1e-9) {
                Some(i) => vec![i],
                None => (0..k).filter(|&i| arcs[i].1 != 0.0).collect(),
            };
            checked.push((n, CheckedQ { q, cover }));
        }
        r += 1;
    }
    checked.sort_by(|x, y| x.0.partial_cmp(&y.0).unwrap().then(x.1.q.cmp(&y.1.q)));
    let checked = checked.into_iter().map(|(_, c)| c).collect();
    Ok(UnavoidOutcome::Certified(UnavoidabilityCertificate {
        q_tail_bound: bound,
        sigma_min: smin,
        min_length: lmin,
        norm_constant,
        checked,
    }))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::forest_gen::Segment3;
    use crate::lattice_core::covolume;

    #[test]
    fn density_examples_d1() {
        assert!(is_eps_dense(&OrbitQuery::new(vec![0.5], 2, 0.3).unwrap()).unwrap());
        assert!(!is_eps_dense(&OrbitQuery::new(vec![0.0], 50, 0.25).unwrap()).unwrap());
        assert!(OrbitQuery::new(vec![0.5], 2, 0.5).is_err());
    }

    #[test]
    fn density_d2_rational_grid() {
        // orbit of (1/4, 1/2) has 4 points; column gaps make it sparse
        assert!(!is_eps_dense(&OrbitQuery::new(vec![0.25, 0.5], 10, 0.2).unwrap()).unwrap());
        assert!(is_eps_dense(&OrbitQuery::new(vec![0.1, 0.3], 100, 0.2).unwrap()).unwrap());
    }

    #[test]
    fn witnesses() {
        assert_eq!(s_witness(&[0.0], 1, 0.25, 8).unwrap().u, vec![1]);
        assert_eq!(s_witness(&[0.5], 1, 0.25, 8).unwrap().u, vec![2]);
    }

    #[test]
    fn small_vector_order() {
        let v = small_vectors(2, 1);
        assert_eq!(v, vec![vec![0, 1], vec![1, -1], vec![1, 0], vec![1, 1]]);
    }

    #[test]
    fn orbit_lattice_examples() {
        let (l, ld) = rational_orbit_lattices(&[1], 3).unwrap();
        assert!((covolume(&l) - 1.0 / 3.0).abs() < 1e-15);
        assert!((covolume(&ld) - 3.0).abs() < 1e-12);
        let (l, ld) = rational_orbit_lattices(&[1, 1], 2).unwrap();
        assert!((covolume(&l) - 0.5).abs() < 1e-15);
        assert!((covolume(&ld) - 2.0).abs() < 1e-12);
        let (l, _) = rational_orbit_lattices(&[0], 1).unwrap();
        assert!(l.same_as(&Lattice::identity(1), 1e-12));
        assert!(rational_orbit_lattices(&[2, 4], 2).is_err());
        assert!(orbit_lattice_index_ok(&[3, 5, 7], 11).unwrap());
    }

    #[test]
    fn mahler_examples() {
        let v = mahler_transfer(&[0.3], 3, 0.2, 3.0).unwrap();
        assert!(v[0].abs() <= 3);
        let v = mahler_transfer(&[1.0 / 3.0, 1.0 / 3.0], 3, 0.01, 3.0).unwrap();
        let dot = (v[0] + v[1]) as f64 / 3.0;
        assert!(dist_to_int(dot) <= 2.0 / 3f64.sqrt() * 0.01 + 1e-12);
        assert!(mahler_transfer(&[0.3], 3, 0.01, 3.0).is_err());
    }

    #[test]
    fn axis_circles_certify() {
        match certify_unavoidable(&Section::axis_circles()).unwrap() {
            UnavoidOutcome::Certified(c) => {
                assert!(c.tail_ok());
                assert!((c.q_tail_bound - 3f64.sqrt()).abs() < 1e-9);
                assert!(!c.checked.is_empty());
            }
            other => panic!("expected certificate, got {other:?}"),
        }
    }

    #[test]
    fn short_parallel_segments_fail() {
        let mk = |a: [f64; 3], d: [f64; 3]| Segment3 { a, b: [a[0] + d[0], a[1] + d[1], a[2] + d[2]] };
        let s = Section {
            segments: vec![
                mk([0.1, 0.1, 0.1], [0.1, 0.0, 0.0]),
                mk([0.5, 0.5, 0.5], [0.099, 0.01, 0.0]),
                mk([0.7, 0.2, 0.9], [0.099, 0.0, 0.01]),
            ],
        };
        assert!(matches!(certify_unavoidable(&s).unwrap(), UnavoidOutcome::Counterexample { .. }));
        let two = Section { segments: s.segments[..2].to_vec() };
        assert!(certify_unavoidable(&two).is_err());
    }
}
