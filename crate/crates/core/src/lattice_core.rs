//! Full-rank lattices and grids: duals, covolumes, successive minima,
//! covering-radius bounds and window enumeration.

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::enumerate::box_solutions;
use crate::error::{Error, Result};
use crate::forest_gen::{ForestSpec, PointCloud, Provenance};
use crate::linalg::{gram_schmidt, lll_reduce};

/// Default cap on the expected number of enumerated points.
pub const DEFAULT_POINT_BUDGET: usize = 20_000_000;

/// Cap on enumeration tree nodes for minima and closest-vector searches.
pub const NODE_BUDGET: usize = 50_000_000;

/// Exact field the basis entries were drawn from, when known.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ExactField {
    /// `Q(sqrt2, sqrt3)`
    Q23,
    /// `Q(sqrt5)`
    Q5,
}

/// Full-rank lattice; `basis` is row-major and its columns are the generators.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Lattice {
    pub dim: usize,
    pub basis: Vec<Vec<f64>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub field: Option<ExactField>,
}

/// A translated lattice `shift + L`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Grid {
    #[serde(flatten)]
    pub lattice: Lattice,
    pub shift: Vec<f64>,
}

/// Closed axis box of half-width `radius` around `center`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Window {
    pub center: Vec<f64>,
    pub radius: f64,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum Norm {
    #[default]
    Euclidean,
    Sup,
}

impl Norm {
    pub fn of(&self, v: &[f64]) -> f64 {
        match self {
            Norm::Euclidean => v.iter().map(|x| x * x).sum::<f64>().sqrt(),
            Norm::Sup => v.iter().fold(0.0, |m, x| m.max(x.abs())),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct MinimaReport {
    pub norm: Norm,
    pub lambdas: Vec<f64>,
    /// Jarnik lower bound `lambda_d / 2` on the covering radius.
    pub covering_lo: f64,
    /// Jarnik upper bound `d lambda_d / 2` on the covering radius.
    pub covering_hi: f64,
}

/// Sampled covering-radius bounds (Euclidean).
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct CoveringBounds {
    /// Largest closest-vector distance over the sample; never above the true radius.
    pub lower: f64,
    /// Nearest-plane bound `sqrt(sum |b*_i|^2) / 2`; never below the true radius.
    pub upper: f64,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct JarnikCheck {
    pub lambda_d: f64,
    pub lower: f64,
    pub upper: f64,
    pub ok: bool,
}

impl Lattice {
    /// Build from a row-major matrix whose columns generate the lattice.
    pub fn new(basis: Vec<Vec<f64>>) -> Result<Self> {
        let l = Lattice { dim: basis.len(), basis, field: None };
        l.validate()?;
        Ok(l)
    }

    pub fn from_matrix(m: &DMatrix<f64>) -> Result<Self> {
        let rows = (0..m.nrows()).map(|i| m.row(i).iter().cloned().collect()).collect();
        Lattice::new(rows)
    }

    pub fn identity(d: usize) -> Self {
        Lattice::from_matrix(&DMatrix::identity(d, d)).expect("identity is full rank")
    }

    pub fn with_field(mut self, field: ExactField) -> Self {
        self.field = Some(field);
        self
    }

    pub fn matrix(&self) -> DMatrix<f64> {
        let d = self.dim;
        DMatrix::from_fn(d, d, |i, j| self.basis[i][j])
    }

    pub fn column(&self, j: usize) -> Vec<f64> {
        (0..self.dim).map(|i| self.basis[i][j]).collect()
    }

    /// Square, finite and `|det| > 1e-12 * prod |b_i|`.
    pub fn validate(&self) -> Result<()> {
        let d = self.dim;
        if d == 0 {
            return Err(Error::InvalidInput("lattice dimension must be positive".into()));
        }
        if self.basis.iter().any(|r| r.len() != d) {
            return Err(Error::InvalidInput("basis must be a square matrix".into()));
        }
        if self.basis.iter().flatten().any(|x| !x.is_finite()) {
            return Err(Error::InvalidInput("basis entries must be finite".into()));
        }
        let m = self.matrix();
        let scale: f64 = m.column_iter().map(|c| c.norm()).product();
        if m.determinant().abs() <= 1e-12 * scale {
            return Err(Error::DegenerateLattice);
        }
        Ok(())
    }

    /// Whether `v` is a lattice vector, up to `tol` in the coefficients.
    pub fn contains(&self, v: &[f64], tol: f64) -> bool {
        let Some(inv) = self.matrix().try_inverse() else {
            return false;
        };
        let c = inv * DVector::from_column_slice(v);
        c.iter().all(|x| (x - x.round()).abs() <= tol)
    }

    /// Same point set: each basis contains the other's columns.
    pub fn same_as(&self, other: &Lattice, tol: f64) -> bool {
        self.dim == other.dim
            && (0..self.dim).all(|j| self.contains(&other.column(j), tol))
            && (0..self.dim).all(|j| other.contains(&self.column(j), tol))
    }
}

impl Grid {
    pub fn new(lattice: Lattice, shift: Vec<f64>) -> Result<Self> {
        if shift.len() != lattice.dim {
            return Err(Error::DimensionMismatch { expected: lattice.dim, got: shift.len() });
        }
        Ok(Grid { lattice, shift })
    }

    pub fn unshifted(lattice: Lattice) -> Self {
        let d = lattice.dim;
        Grid { lattice, shift: vec![0.0; d] }
    }

    /// Same point set as `other`, up to `tol` in coefficients.
    pub fn same_as(&self, other: &Grid, tol: f64) -> bool {
        if !self.lattice.same_as(&other.lattice, tol) {
            return false;
        }
        let diff: Vec<f64> = self.shift.iter().zip(&other.shift).map(|(a, b)| a - b).collect();
        self.lattice.contains(&diff, tol)
    }
}

impl Window {
    pub fn new(center: Vec<f64>, radius: f64) -> Result<Self> {
        if !(radius > 0.0) || !radius.is_finite() {
            return Err(Error::InvalidInput("window radius must be positive".into()));
        }
        Ok(Window { center, radius })
    }

    pub fn centered(dim: usize, radius: f64) -> Self {
        Window { center: vec![0.0; dim], radius }
    }

    pub fn dim(&self) -> usize {
        self.center.len()
    }

    /// Membership in the closed box, with a relative tolerance of `1e-9`.
    pub fn contains(&self, p: &[f64]) -> bool {
        let tol = 1e-9 * self.radius.max(1.0);
        p.iter().zip(&self.center).all(|(x, c)| (x - c).abs() <= self.radius + tol)
    }

    /// Euclidean diameter of the box.
    pub fn diameter(&self) -> f64 {
        2.0 * self.radius * (self.dim() as f64).sqrt()
    }
}

/// Inverse-transpose basis.
pub fn dual(l: &Lattice) -> Result<Lattice> {
    l.validate()?;
    let inv = l.matrix().try_inverse().ok_or(Error::DegenerateLattice)?;
    let mut out = Lattice::from_matrix(&inv.transpose())?;
    out.field = l.field;
    Ok(out)
}

pub fn covolume(l: &Lattice) -> f64 {
    l.matrix().determinant().abs()
}

/// Fincke-Pohst enumeration of `y` with `|R y - x|^2 <= rho2`, where the
/// visitor may shrink `rho2` (closest-vector search) as it goes.
struct Enumerator<'a> {
    mu: &'a DMatrix<f64>,
    bnorm: &'a [f64],
    c: Vec<f64>,
    nodes: usize,
    budget: usize,
}

impl Enumerator<'_> {
    fn run<F: FnMut(&[i64], f64, &mut f64)>(&mut self, rho2: &mut f64, visit: &mut F) -> Result<()> {
        let n = self.bnorm.len();
        let mut y = vec![0i64; n];
        self.rec(n - 1, 0.0, &mut y, rho2, visit)
    }

    fn rec<F: FnMut(&[i64], f64, &mut f64)>(
        &mut self,
        j: usize,
        partial: f64,
        y: &mut [i64],
        rho2: &mut f64,
        visit: &mut F,
    ) -> Result<()> {
        let n = y.len();
        let mut center = self.c[j];
        for i in j + 1..n {
            center -= self.mu[(i, j)] * y[i] as f64;
        }
        let rem = *rho2 * (1.0 + 1e-12) - partial;
        if rem < 0.0 {
            return Ok(());
        }
        let w = (rem / self.bnorm[j]).sqrt();
        let lo = (center - w).ceil() as i64;
        let hi = (center + w).floor() as i64;
        for v in lo..=hi {
            self.nodes += 1;
            if self.nodes > self.budget {
                return Err(Error::EnumerationLimit(format!(
                    "more than {} enumeration nodes",
                    self.budget
                )));
            }
            let t = v as f64 - center;
            let next = partial + t * t * self.bnorm[j];
            if next > *rho2 * (1.0 + 1e-12) {
                continue;
            }
            y[j] = v;
            if j == 0 {
                visit(y, next, rho2);
            } else {
                self.rec(j - 1, next, y, rho2, visit)?;
            }
        }
        y[j] = 0;
        Ok(())
    }
}

/// LLL-reduced basis plus its Gram-Schmidt data.
struct Reduced {
    r: DMatrix<f64>,
    bnorm: Vec<f64>,
    mu: DMatrix<f64>,
}

impl Reduced {
    fn of(l: &Lattice) -> Self {
        let (r, _) = lll_reduce(&l.matrix());
        let (bnorm, mu) = gram_schmidt(&r);
        Reduced { r, bnorm, mu }
    }

    /// Gram-Schmidt coordinates `c_j = <x, b*_j> / |b*_j|^2`.
    fn gs_coords(&self, x: &DVector<f64>) -> Vec<f64> {
        let n = self.bnorm.len();
        // b*_j = b_j - sum_{i<j} mu_{j,i} b*_i, built incrementally
        let mut bstar: Vec<DVector<f64>> = Vec::with_capacity(n);
        for j in 0..n {
            let mut v = self.r.column(j).clone_owned();
            for (i, bs) in bstar.iter().enumerate() {
                v -= bs * self.mu[(j, i)];
            }
            bstar.push(v);
        }
        (0..n).map(|j| x.dot(&bstar[j]) / self.bnorm[j]).collect()
    }

    /// All nonzero lattice vectors of Euclidean length at most `radius`, one per
    /// `+-` pair.
    fn short_vectors(&self, radius: f64) -> Result<Vec<DVector<f64>>> {
        let n = self.bnorm.len();
        let mut e = Enumerator {
            mu: &self.mu,
            bnorm: &self.bnorm,
            c: vec![0.0; n],
            nodes: 0,
            budget: NODE_BUDGET,
        };
        let mut out = Vec::new();
        let mut rho2 = radius * radius;
        let r = &self.r;
        e.run(&mut rho2, &mut |y: &[i64], _d2, _rho| {
            // keep the representative whose last nonzero coefficient is positive
            match y.iter().rev().find(|&&v| v != 0) {
                Some(&v) if v > 0 => {
                    let yf = DVector::from_iterator(y.len(), y.iter().map(|&v| v as f64));
                    out.push(r * yf);
                }
                _ => {}
            }
        })?;
        Ok(out)
    }

    /// Euclidean distance from `x` to the lattice.
    fn distance(&self, x: &DVector<f64>) -> Result<f64> {
        let n = self.bnorm.len();
        let c = self.gs_coords(x);
        // nearest plane for the starting radius
        let mut y = vec![0i64; n];
        let mut d2 = 0.0;
        for j in (0..n).rev() {
            let mut center = c[j];
            for i in j + 1..n {
                center -= self.mu[(i, j)] * y[i] as f64;
            }
            y[j] = center.round() as i64;
            let t = y[j] as f64 - center;
            d2 += t * t * self.bnorm[j];
        }
        let mut e = Enumerator { mu: &self.mu, bnorm: &self.bnorm, c, nodes: 0, budget: NODE_BUDGET };
        let mut rho2 = d2;
        e.run(&mut rho2, &mut |_y: &[i64], dist2, rho| {
            if dist2 < *rho {
                *rho = dist2;
            }
        })?;
        Ok(rho2.max(0.0).sqrt())
    }
}

/// Successive minima by exhaustive short-vector enumeration.
///
/// The enumeration radius is `1.5` times the longest reduced basis vector,
/// which bounds `lambda_d` from above.
pub fn successive_minima(l: &Lattice, norm: Norm) -> Result<MinimaReport> {
    l.validate()?;
    let d = l.dim;
    if d > 6 {
        return Err(Error::EnumerationLimit(format!("dimension {d} exceeds 6")));
    }
    let red = Reduced::of(l);
    let rho = red
        .r
        .column_iter()
        .map(|c| norm.of(c.as_slice()))
        .fold(0.0, f64::max);
    let euclid_radius = match norm {
        Norm::Euclidean => 1.5 * rho,
        Norm::Sup => 1.5 * rho * (d as f64).sqrt(),
    };
    let mut vecs: Vec<(f64, DVector<f64>)> = red
        .short_vectors(euclid_radius)?
        .into_iter()
        .map(|v| (norm.of(v.as_slice()), v))
        .filter(|(n, _)| *n <= 1.5 * rho * (1.0 + 1e-12))
        .collect();
    vecs.sort_by(|a, b| {
        a.0.partial_cmp(&b.0).unwrap().then_with(|| {
            a.1.iter()
                .zip(b.1.iter())
                .map(|(x, y)| x.partial_cmp(y).unwrap())
                .find(|o| o.is_ne())
                .unwrap_or(std::cmp::Ordering::Equal)
        })
    });
    let mut chosen: Vec<DVector<f64>> = Vec::new();
    let mut lambdas = Vec::with_capacity(d);
    for (n, v) in vecs {
        let mut w = v.clone();
        for e in &chosen {
            let c = w.dot(e);
            w -= e * c;
        }
        if w.norm() > 1e-9 * v.norm() {
            chosen.push(w.normalize());
            lambdas.push(n);
            if lambdas.len() == d {
                break;
            }
        }
    }
    if lambdas.len() < d {
        return Err(Error::EnumerationLimit("short-vector set did not span".into()));
    }
    let ld = lambdas[d - 1];
    Ok(MinimaReport { norm, lambdas, covering_lo: ld / 2.0, covering_hi: d as f64 * ld / 2.0 })
}

/// Exact Euclidean distance from `x` to the lattice.
pub fn distance_to_lattice(l: &Lattice, x: &[f64]) -> Result<f64> {
    l.validate()?;
    Reduced::of(l).distance(&DVector::from_column_slice(x))
}

fn sample_resolution(d: usize) -> usize {
    match d {
        1 => 16,
        2 => 8,
        3 | 4 => 4,
        _ => 3,
    }
}

/// Sampled lower and nearest-plane upper bounds on the covering radius.
pub fn covering_estimates(l: &Lattice) -> Result<CoveringBounds> {
    l.validate()?;
    let d = l.dim;
    let red = Reduced::of(l);
    let upper = 0.5 * red.bnorm.iter().sum::<f64>().sqrt();
    let g = sample_resolution(d);
    let total = g.pow(d as u32);
    let mut lower: f64 = 0.0;
    let mut k = vec![0usize; d];
    for _ in 0..total {
        let frac = DVector::from_iterator(d, k.iter().map(|&v| v as f64 / g as f64));
        let x = &red.r * frac;
        lower = lower.max(red.distance(&x)?);
        for slot in k.iter_mut() {
            *slot += 1;
            if *slot < g {
                break;
            }
            *slot = 0;
        }
    }
    Ok(CoveringBounds { lower, upper })
}

/// Jarnik sandwich on the sampled bounds, Euclidean norm.
pub fn jarnik_check(l: &Lattice) -> Result<JarnikCheck> {
    let m = successive_minima(l, Norm::Euclidean)?;
    let b = covering_estimates(l)?;
    let ld = m.lambdas[l.dim - 1];
    let tol = 1e-9 * ld.max(1.0);
    let ok = ld / 2.0 <= b.upper + tol && b.lower <= l.dim as f64 * ld / 2.0 + tol;
    Ok(JarnikCheck { lambda_d: ld, lower: b.lower, upper: b.upper, ok })
}

/// Sampled covering radius times the dual's first minimum, against `d/2`.
pub fn banaszczyk_check(l: &Lattice) -> Result<(f64, bool)> {
    let b = covering_estimates(l)?;
    let lam1 = successive_minima(&dual(l)?, Norm::Euclidean)?.lambdas[0];
    let product = b.lower * lam1;
    Ok((product, product <= l.dim as f64 / 2.0 + 1e-9))
}

/// Grid points inside the closed window.
pub fn enumerate_points(g: &Grid, w: &Window) -> Result<PointCloud> {
    enumerate_points_with_budget(g, w, DEFAULT_POINT_BUDGET)
}

pub fn enumerate_points_with_budget(g: &Grid, w: &Window, budget: usize) -> Result<PointCloud> {
    let d = g.lattice.dim;
    g.lattice.validate()?;
    if g.shift.len() != d {
        return Err(Error::DimensionMismatch { expected: d, got: g.shift.len() });
    }
    if w.dim() != d {
        return Err(Error::DimensionMismatch { expected: d, got: w.dim() });
    }
    let b = g.lattice.matrix();
    let t = DVector::from_iterator(d, (0..d).map(|i| w.center[i] - g.shift[i]));
    let h = vec![w.radius; d];
    let z = box_solutions(&b, &t, &h, budget)?;
    let mut coords = Vec::with_capacity(z.len());
    let mut p = vec![0.0; d];
    for zz in z.chunks(d) {
        for i in 0..d {
            let mut acc = g.shift[i];
            for j in 0..d {
                acc += b[(i, j)] * zz[j] as f64;
            }
            p[i] = acc;
        }
        if w.contains(&p) {
            coords.extend_from_slice(&p);
        }
    }
    Ok(PointCloud {
        dim: d,
        coords,
        provenance: Some(Box::new(Provenance {
            spec: ForestSpec::UnionOfGrids { grids: vec![g.clone()] },
            window: w.clone(),
        })),
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn phi() -> f64 {
        (1.0 + 5f64.sqrt()) / 2.0
    }

    #[test]
    fn dual_examples() {
        let z2 = Lattice::identity(2);
        assert!(dual(&z2).unwrap().same_as(&z2, 1e-12));
        let l = Lattice::new(vec![vec![2.0, 0.0], vec![0.0, 0.5]]).unwrap();
        let dl = dual(&l).unwrap();
        assert_eq!(dl.basis, vec![vec![0.5, 0.0], vec![0.0, 2.0]]);
        let p = Lattice::new(vec![vec![1.0, 0.0], vec![phi(), 1.0]]).unwrap();
        assert!((covolume(&p) * covolume(&dual(&p).unwrap()) - 1.0).abs() < 1e-12);
    }

    #[test]
    fn dual_pairs_integrally() {
        let l = Lattice::new(vec![vec![1.0, 0.3, 0.0], vec![0.2, 2.0, 0.1], vec![0.0, 0.7, 1.5]]).unwrap();
        let dl = dual(&l).unwrap();
        for i in 0..3 {
            for j in 0..3 {
                let ip: f64 = l.column(i).iter().zip(dl.column(j)).map(|(a, b)| a * b).sum();
                assert!((ip - ip.round()).abs() < 1e-9);
            }
        }
    }

    #[test]
    fn degenerate_is_rejected() {
        let e = Lattice::new(vec![vec![1.0, 2.0], vec![2.0, 4.0]]).unwrap_err();
        assert_eq!(e, Error::DegenerateLattice);
    }

    #[test]
    fn covolume_examples() {
        assert_eq!(covolume(&Lattice::identity(3)), 1.0);
        assert_eq!(covolume(&Lattice::new(vec![vec![3.0]]).unwrap()), 3.0);
    }

    #[test]
    fn minima_simple() {
        let m = successive_minima(&Lattice::identity(4), Norm::Euclidean).unwrap();
        assert!(m.lambdas.iter().all(|&x| (x - 1.0).abs() < 1e-12));
        let m = successive_minima(&Lattice::new(vec![vec![1.0, 0.0], vec![0.0, 5.0]]).unwrap(), Norm::Sup).unwrap();
        assert_eq!(m.lambdas, vec![1.0, 5.0]);
        assert_eq!(m.covering_lo, 2.5);
        assert_eq!(m.covering_hi, 5.0);
    }

    #[test]
    fn minima_too_big() {
        let e = successive_minima(&Lattice::identity(7), Norm::Euclidean).unwrap_err();
        assert!(matches!(e, Error::EnumerationLimit(_)));
    }

    #[test]
    fn z2_deep_hole() {
        let (p, ok) = banaszczyk_check(&Lattice::identity(2)).unwrap();
        assert!((p - 0.5f64.sqrt()).abs() < 1e-12);
        assert!(ok);
        let (_, ok) = banaszczyk_check(&Lattice::new(vec![vec![1.0, 0.0], vec![0.0, 4.0]]).unwrap()).unwrap();
        assert!(ok);
    }

    #[test]
    fn enumerate_small_windows() {
        let z2 = Grid::unshifted(Lattice::identity(2));
        assert_eq!(enumerate_points(&z2, &Window::centered(2, 1.5)).unwrap().len(), 9);
        let sh = Grid::new(Lattice::identity(2), vec![0.5, 0.5]).unwrap();
        assert_eq!(enumerate_points(&sh, &Window::centered(2, 1.0)).unwrap().len(), 4);
    }

    #[test]
    fn distance_to_deep_hole() {
        let d = distance_to_lattice(&Lattice::identity(3), &[0.5, 0.5, 0.5]).unwrap();
        assert!((d - 0.75f64.sqrt()).abs() < 1e-12);
    }
}
