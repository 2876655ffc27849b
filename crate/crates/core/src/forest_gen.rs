//! Point-set families: unions of grids, cut-and-project sets, toral visit
//! sets and rotated honeycomb unions, plus separation checks.

use std::collections::HashMap;

use nalgebra::{DMatrix, DVector};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::enumerate::box_solutions;
use crate::error::{Error, Result};
use crate::lattice_core::{
    dual, enumerate_points_with_budget, ExactField, Grid, Lattice, Window, DEFAULT_POINT_BUDGET,
};
use crate::linalg::{fmt_sig12, rank_of};

pub fn golden_ratio() -> f64 {
    (1.0 + 5f64.sqrt()) / 2.0
}

/// Cut-and-project data: `L = lattice_shift + Z^N`, physical and internal
/// bases given as lists of column vectors in `R^N`, and a box window in
/// internal coordinates.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CutProjectSpec {
    #[serde(rename = "N")]
    pub big_n: usize,
    pub n: usize,
    pub phys_basis: Vec<Vec<f64>>,
    pub int_basis: Vec<Vec<f64>>,
    pub lattice_shift: Vec<f64>,
    pub window: InternalWindow,
}

/// Axis box `[lo, hi]` in internal coordinates.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct InternalWindow {
    pub lo: Vec<f64>,
    pub hi: Vec<f64>,
}

impl InternalWindow {
    pub fn is_empty(&self) -> bool {
        self.lo.iter().zip(&self.hi).any(|(l, h)| l > h)
    }

    pub fn center(&self) -> Vec<f64> {
        self.lo.iter().zip(&self.hi).map(|(l, h)| 0.5 * (l + h)).collect()
    }

    pub fn half_widths(&self) -> Vec<f64> {
        self.lo.iter().zip(&self.hi).map(|(l, h)| 0.5 * (h - l)).collect()
    }

    /// Euclidean circumradius of the box.
    pub fn circumradius(&self) -> f64 {
        self.half_widths().iter().map(|x| x * x).sum::<f64>().sqrt()
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Segment3 {
    pub a: [f64; 3],
    pub b: [f64; 3],
}

impl Segment3 {
    pub fn direction(&self) -> [f64; 3] {
        [self.b[0] - self.a[0], self.b[1] - self.a[1], self.b[2] - self.a[2]]
    }

    pub fn length(&self) -> f64 {
        let d = self.direction();
        (d[0] * d[0] + d[1] * d[1] + d[2] * d[2]).sqrt()
    }

    fn at(&self, s: f64) -> [f64; 3] {
        let d = self.direction();
        [self.a[0] + s * d[0], self.a[1] + s * d[1], self.a[2] + s * d[2]]
    }

    /// Euclidean distance from `p` to the segment in `R^3`.
    fn distance_to(&self, p: &[f64; 3]) -> f64 {
        let d = self.direction();
        let l2 = d.iter().map(|x| x * x).sum::<f64>();
        let s = if l2 > 0.0 {
            (0..3).map(|i| (p[i] - self.a[i]) * d[i]).sum::<f64>() / l2
        } else {
            0.0
        };
        let q = self.at(s.clamp(0.0, 1.0));
        (0..3).map(|i| (p[i] - q[i]).powi(2)).sum::<f64>().sqrt()
    }

    /// Distance in the torus `R^3 / Z^3` from `p` to the projected segment.
    pub fn torus_distance(&self, p: &[f64; 3]) -> f64 {
        let mut best = f64::INFINITY;
        let lo: Vec<i64> = (0..3).map(|i| (self.a[i].min(self.b[i]) - p[i] - 1.0).floor() as i64).collect();
        let hi: Vec<i64> = (0..3).map(|i| (self.a[i].max(self.b[i]) - p[i] + 1.0).ceil() as i64).collect();
        for m0 in lo[0]..=hi[0] {
            for m1 in lo[1]..=hi[1] {
                for m2 in lo[2]..=hi[2] {
                    let q = [p[0] + m0 as f64, p[1] + m1 as f64, p[2] + m2 as f64];
                    best = best.min(self.distance_to(&q));
                }
            }
        }
        best
    }
}

/// Finitely many segments in `R^3`, read modulo `Z^3`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Section {
    pub segments: Vec<Segment3>,
}

impl Section {
    /// Segments pairwise disjoint mod `Z^3` (sampled at step `1e-3` of each
    /// segment's length, separation `1e-6`) and, with three or more segments,
    /// directions spanning `R^3`.
    pub fn validate(&self) -> Result<()> {
        let segs = &self.segments;
        for (i, s) in segs.iter().enumerate() {
            for (j, t) in segs.iter().enumerate() {
                if i == j {
                    continue;
                }
                for k in 0..=1000 {
                    let p = s.at(k as f64 / 1000.0);
                    if t.torus_distance(&p) < 1e-6 {
                        return Err(Error::InvalidInput(format!("segments {i} and {j} meet in the torus")));
                    }
                }
            }
        }
        if segs.len() >= 3 {
            let dirs: Vec<DVector<f64>> =
                segs.iter().map(|s| DVector::from_column_slice(&s.direction())).collect();
            if rank_of(&dirs, 1e-9) < 3 {
                return Err(Error::InvalidInput("segment directions do not span R^3".into()));
            }
        }
        Ok(())
    }

    /// Three full circles along the coordinate axes.
    pub fn axis_circles() -> Self {
        let base = [[0.1, 0.2, 0.3], [0.25, 0.5, 0.55], [0.4, 0.65, 0.8]];
        let segments = (0..3)
            .map(|i| {
                let a = base[i];
                let mut b = a;
                b[i] += 1.0;
                Segment3 { a, b }
            })
            .collect();
        Section { segments }
    }
}

/// Tagged description of a point-set family.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum ForestSpec {
    UnionOfGrids { grids: Vec<Grid> },
    CutProject(CutProjectSpec),
    ToralVisit { section: Section, plane: [[f64; 3]; 2], base: [f64; 3] },
    Tbg { angles: Vec<f64>, shifts: Vec<[f64; 2]> },
}

impl ForestSpec {
    pub fn dim(&self) -> usize {
        match self {
            ForestSpec::UnionOfGrids { grids } => grids.first().map(|g| g.lattice.dim).unwrap_or(0),
            ForestSpec::CutProject(c) => c.n,
            ForestSpec::ToralVisit { .. } | ForestSpec::Tbg { .. } => 2,
        }
    }

    /// Grids of a grid-based spec (`Tbg` is expanded).
    pub fn grids(&self) -> Option<Vec<Grid>> {
        match self {
            ForestSpec::UnionOfGrids { grids } => Some(grids.clone()),
            ForestSpec::Tbg { angles, shifts } => match tbg_union(angles.len(), angles, shifts) {
                Ok(ForestSpec::UnionOfGrids { grids }) => Some(grids),
                _ => None,
            },
            _ => None,
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct Provenance {
    pub spec: ForestSpec,
    pub window: Window,
}

/// Points stored flat, `dim` coordinates each.
#[derive(Clone, Debug, PartialEq)]
pub struct PointCloud {
    pub dim: usize,
    pub coords: Vec<f64>,
    pub provenance: Option<Box<Provenance>>,
}

impl PointCloud {
    pub fn empty(dim: usize) -> Self {
        PointCloud { dim, coords: Vec::new(), provenance: None }
    }

    pub fn from_points(dim: usize, pts: &[Vec<f64>]) -> Self {
        PointCloud { dim, coords: pts.iter().flatten().cloned().collect(), provenance: None }
    }

    pub fn len(&self) -> usize {
        if self.dim == 0 {
            0
        } else {
            self.coords.len() / self.dim
        }
    }

    pub fn is_empty(&self) -> bool {
        self.coords.is_empty()
    }

    pub fn point(&self, i: usize) -> &[f64] {
        &self.coords[i * self.dim..(i + 1) * self.dim]
    }

    pub fn iter(&self) -> impl Iterator<Item = &[f64]> {
        self.coords.chunks(self.dim.max(1))
    }

    /// One point per line, 12 significant digits.
    pub fn to_csv(&self) -> String {
        let mut s = String::with_capacity(self.coords.len() * 16);
        for p in self.iter() {
            let row: Vec<String> = p.iter().map(|&x| fmt_sig12(x)).collect();
            s.push_str(&row.join(","));
            s.push('\n');
        }
        s
    }

    /// Drop points within `tol` (sup-norm) of an earlier point.
    pub fn dedup(&mut self, tol: f64) {
        let d = self.dim;
        if d == 2 && self.len() > 1 {
            self.dedup_plane(tol);
            return;
        }
        let mut cells: HashMap<Vec<i64>, Vec<usize>> = HashMap::new();
        let mut kept: Vec<f64> = Vec::with_capacity(self.coords.len());
        let key = |p: &[f64]| -> Vec<i64> { p.iter().map(|x| (x / tol).floor() as i64).collect() };
        let offsets: Vec<Vec<i64>> = neighbour_offsets(d);
        for p in self.coords.chunks(d) {
            let k = key(p);
            let mut dup = false;
            'outer: for off in &offsets {
                let nk: Vec<i64> = k.iter().zip(off).map(|(a, b)| a + b).collect();
                if let Some(list) = cells.get(&nk) {
                    for &idx in list {
                        let q = &kept[idx * d..(idx + 1) * d];
                        if p.iter().zip(q).all(|(a, b)| (a - b).abs() <= tol) {
                            dup = true;
                            break 'outer;
                        }
                    }
                }
            }
            if !dup {
                let idx = kept.len() / d;
                kept.extend_from_slice(p);
                cells.entry(k).or_default().push(idx);
            }
        }
        self.coords = kept;
    }

    /// Planar dedup on a dense bucket grid.
    fn dedup_plane(&mut self, tol: f64) {
        let n = self.len();
        let (mut lo, mut hi) = ([f64::INFINITY; 2], [f64::NEG_INFINITY; 2]);
        for q in self.iter() {
            for i in 0..2 {
                lo[i] = lo[i].min(q[i]);
                hi[i] = hi[i].max(q[i]);
            }
        }
        let area = (hi[0] - lo[0]).max(tol) * (hi[1] - lo[1]).max(tol);
        let cell = (area / n as f64).sqrt().max(4.0 * tol);
        let nx = ((hi[0] - lo[0]) / cell).floor() as usize + 1;
        let ny = ((hi[1] - lo[1]) / cell).floor() as usize + 1;
        if (nx as f64) * (ny as f64) > 4.0 * n as f64 + 1e6 {
            // too sparse for a dense grid; fall back to hashing
            let mut cells: HashMap<(i64, i64), Vec<usize>> = HashMap::new();
            let mut keep = vec![true; n];
            for i in 0..n {
                let p = self.point(i);
                let k = ((p[0] / cell).floor() as i64, (p[1] / cell).floor() as i64);
                let hit = (-1..=1).any(|dx| {
                    (-1..=1).any(|dy| {
                        cells.get(&(k.0 + dx, k.1 + dy)).is_some_and(|l| {
                            l.iter().any(|&j| {
                                let q = self.point(j);
                                (p[0] - q[0]).abs() <= tol && (p[1] - q[1]).abs() <= tol
                            })
                        })
                    })
                });
                if hit {
                    keep[i] = false;
                } else {
                    cells.entry(k).or_default().push(i);
                }
            }
            self.retain(&keep);
            return;
        }
        let idx = |q: &[f64]| -> usize {
            let ix = (((q[0] - lo[0]) / cell).floor() as usize).min(nx - 1);
            let iy = (((q[1] - lo[1]) / cell).floor() as usize).min(ny - 1);
            ix * ny + iy
        };
        let mut start = vec![0u32; nx * ny + 1];
        for q in self.iter() {
            start[idx(q) + 1] += 1;
        }
        for k in 0..nx * ny {
            start[k + 1] += start[k];
        }
        let mut fill = start.clone();
        let mut order = vec![0u32; n];
        for (i, q) in self.iter().enumerate() {
            let c = idx(q);
            order[fill[c] as usize] = i as u32;
            fill[c] += 1;
        }
        // a point is dropped when an earlier point lies within tol; within a
        // bucket the order is increasing, and tol < cell keeps the search to
        // the 3x3 block
        let keep: Vec<bool> = (0..n)
            .into_par_iter()
            .map(|i| {
                let p = self.point(i);
                let c = idx(p);
                let (ix, iy) = ((c / ny) as i64, (c % ny) as i64);
                for jx in (ix - 1).max(0)..=(ix + 1).min(nx as i64 - 1) {
                    for jy in (iy - 1).max(0)..=(iy + 1).min(ny as i64 - 1) {
                        let c2 = jx as usize * ny + jy as usize;
                        for &j in &order[start[c2] as usize..start[c2 + 1] as usize] {
                            let j = j as usize;
                            if j >= i {
                                break;
                            }
                            let q = self.point(j);
                            if (p[0] - q[0]).abs() <= tol && (p[1] - q[1]).abs() <= tol {
                                return false;
                            }
                        }
                    }
                }
                true
            })
            .collect();
        self.retain(&keep);
    }

    fn retain(&mut self, keep: &[bool]) {
        let d = self.dim;
        let mut out = Vec::with_capacity(self.coords.len());
        for (p, &k) in self.coords.chunks(d).zip(keep) {
            if k {
                out.extend_from_slice(p);
            }
        }
        self.coords = out;
    }
}

fn neighbour_offsets(d: usize) -> Vec<Vec<i64>> {
    let mut out = vec![vec![]];
    for _ in 0..d {
        out = out
            .into_iter()
            .flat_map(|v| {
                (-1..=1).map(move |o| {
                    let mut w = v.clone();
                    w.push(o);
                    w
                })
            })
            .collect();
    }
    out
}

/// Remove grids that coincide as point sets (coefficient tolerance `1e-9`).
pub fn dedup_grids(grids: Vec<Grid>) -> Vec<Grid> {
    let mut out: Vec<Grid> = Vec::new();
    for g in grids {
        if !out.iter().any(|h| h.same_as(&g, 1e-9)) {
            out.push(g);
        }
    }
    out
}

/// The three golden lattices `Z^2`, `[[1,0],[phi,1]] Z^2`, `[[phi,1],[1,0]] Z^2`.
pub fn peres_forest() -> ForestSpec {
    let phi = golden_ratio();
    let mk = |rows: Vec<Vec<f64>>| {
        Grid::unshifted(Lattice::new(rows).expect("golden bases are unimodular").with_field(ExactField::Q5))
    };
    ForestSpec::UnionOfGrids {
        grids: vec![
            mk(vec![vec![1.0, 0.0], vec![0.0, 1.0]]),
            mk(vec![vec![1.0, 0.0], vec![phi, 1.0]]),
            mk(vec![vec![phi, 1.0], vec![1.0, 0.0]]),
        ],
    }
}

/// `J^(l-1) M(theta_i) Z^n` over `l = 1..n` and the rows `theta_i`.
pub fn generalized_forest(theta: &[Vec<f64>]) -> Result<ForestSpec> {
    let s = theta.len();
    if s == 0 {
        return Err(Error::InvalidInput("theta needs at least one row".into()));
    }
    let d = theta[0].len();
    if d == 0 || theta.iter().any(|r| r.len() != d) {
        return Err(Error::InvalidInput("theta rows must share a positive length".into()));
    }
    let n = d + 1;
    // J (x_1..x_n) = (x_2..x_n, x_1)
    let j = DMatrix::from_fn(n, n, |r, c| if c == (r + 1) % n { 1.0 } else { 0.0 });
    let mut grids = Vec::new();
    for row in theta {
        let mut m = DMatrix::<f64>::identity(n, n);
        for (k, &t) in row.iter().enumerate() {
            m[(k + 1, 0)] = t;
        }
        let mut jm = m;
        for _ in 0..n {
            grids.push(Grid::unshifted(Lattice::from_matrix(&jm)?));
            jm = &j * jm;
        }
    }
    Ok(ForestSpec::UnionOfGrids { grids: dedup_grids(grids) })
}

/// `Z^2`, `x2 + [[gamma, alpha],[0,1]] Z^2` and `x3 + [[1,0],[beta, delta]] Z^2`.
pub fn three_lattice_forest() -> ForestSpec {
    let (s2, s3, s6) = (2f64.sqrt(), 3f64.sqrt(), 6f64.sqrt());
    let (alpha, beta, gamma, delta) = (s2, 3.0 - s2 + s3 - s6, s3, -3.0 + s6);
    let l1 = Lattice::identity(2).with_field(ExactField::Q23);
    let l2 = Lattice::new(vec![vec![gamma, alpha], vec![0.0, 1.0]]).expect("full rank").with_field(ExactField::Q23);
    let l3 = Lattice::new(vec![vec![1.0, 0.0], vec![beta, delta]]).expect("full rank").with_field(ExactField::Q23);
    ForestSpec::UnionOfGrids {
        grids: vec![
            Grid::unshifted(l1),
            Grid { lattice: l2, shift: vec![0.0, 0.5] },
            Grid { lattice: l3, shift: vec![0.5, 5f64.sqrt() / 5.0] },
        ],
    }
}

/// Rotated and shifted copies of the triangular lattice spanned by
/// `(1,0)` and `(1/2, sqrt3/2)`.
pub fn tbg_union(k: usize, angles: &[f64], shifts: &[[f64; 2]]) -> Result<ForestSpec> {
    if k == 0 || angles.len() != k || shifts.len() != k {
        return Err(Error::InvalidInput("tbg needs k >= 1 angles and shifts".into()));
    }
    let h = 3f64.sqrt() / 2.0;
    let grids = angles
        .iter()
        .zip(shifts)
        .map(|(&t, x)| {
            let (c, s) = (t.cos(), t.sin());
            let rows = vec![vec![c, 0.5 * c - h * s], vec![s, 0.5 * s + h * c]];
            Ok(Grid { lattice: Lattice::new(rows)?, shift: x.to_vec() })
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(ForestSpec::UnionOfGrids { grids: dedup_grids(grids) })
}

impl CutProjectSpec {
    pub fn validate(&self) -> Result<()> {
        let (nn, n) = (self.big_n, self.n);
        if n == 0 || n >= nn {
            return Err(Error::InvalidInput("need 1 <= n < N".into()));
        }
        if self.phys_basis.len() != n || self.int_basis.len() != nn - n {
            return Err(Error::InvalidInput("basis sizes must be n and N - n".into()));
        }
        if self.phys_basis.iter().chain(&self.int_basis).any(|c| c.len() != nn) {
            return Err(Error::DimensionMismatch { expected: nn, got: 0 });
        }
        if self.lattice_shift.len() != nn {
            return Err(Error::DimensionMismatch { expected: nn, got: self.lattice_shift.len() });
        }
        if self.window.lo.len() != nn - n || self.window.hi.len() != nn - n {
            return Err(Error::DimensionMismatch { expected: nn - n, got: self.window.lo.len() });
        }
        let c = self.concatenated();
        let scale: f64 = c.column_iter().map(|v| v.norm()).product();
        if c.determinant().abs() <= 1e-12 * scale {
            return Err(Error::DegenerateLattice);
        }
        Ok(())
    }

    /// `[phys | int]` as an `N x N` matrix.
    pub fn concatenated(&self) -> DMatrix<f64> {
        let nn = self.big_n;
        let cols: Vec<&Vec<f64>> = self.phys_basis.iter().chain(&self.int_basis).collect();
        DMatrix::from_fn(nn, nn, |i, j| cols[j][i])
    }

    /// Internal directions as an `N x (N-n)` matrix.
    pub fn int_matrix(&self) -> DMatrix<f64> {
        DMatrix::from_fn(self.big_n, self.int_basis.len(), |i, j| self.int_basis[j][i])
    }

    /// Physical directions as an `N x n` matrix.
    pub fn phys_matrix(&self) -> DMatrix<f64> {
        DMatrix::from_fn(self.big_n, self.n, |i, j| self.phys_basis[j][i])
    }

    /// Strip of `Z^2` around the line of slope `phi`, window `[-1/2, 1/2]`.
    pub fn golden_strip() -> Self {
        let phi = golden_ratio();
        CutProjectSpec {
            big_n: 2,
            n: 1,
            phys_basis: vec![vec![1.0, phi]],
            int_basis: vec![vec![-phi, 1.0]],
            lattice_shift: vec![0.0, 0.0],
            window: InternalWindow { lo: vec![-0.5], hi: vec![0.5] },
        }
    }

    /// Two-dimensional physical plane in `R^3` spanned by `(1, phi, 0)` and
    /// `(0, 1, phi)`, internal line `(phi^2, -phi, 1)`, window `[-1/1000, 1/1000]`,
    /// about 0.021 points per unit area.
    pub fn golden_2_3() -> Self {
        let phi = golden_ratio();
        CutProjectSpec {
            big_n: 3,
            n: 2,
            phys_basis: vec![vec![1.0, phi, 0.0], vec![0.0, 1.0, phi]],
            int_basis: vec![vec![phi * phi, -phi, 1.0]],
            lattice_shift: vec![0.0, 0.0, 0.0],
            window: InternalWindow { lo: vec![-0.001], hi: vec![0.001] },
        }
    }
}

/// Physical and internal coordinates of the selected lattice points.
pub struct CutProjectCoords {
    pub phys: Vec<f64>,
    pub int: Vec<f64>,
}

/// Selected points with both coordinate sets, budget configurable.
pub fn cut_and_project_coords(spec: &CutProjectSpec, w: &Window, budget: usize) -> Result<CutProjectCoords> {
    spec.validate()?;
    let (nn, n) = (spec.big_n, spec.n);
    if w.dim() != n {
        return Err(Error::DimensionMismatch { expected: n, got: w.dim() });
    }
    let empty = CutProjectCoords { phys: Vec::new(), int: Vec::new() };
    if spec.window.is_empty() {
        return Ok(empty);
    }
    let a = spec.concatenated().try_inverse().ok_or(Error::DegenerateLattice)?;
    let shift = DVector::from_column_slice(&spec.lattice_shift);
    let ashift = &a * &shift;
    let ic = spec.window.center();
    let ih = spec.window.half_widths();
    let center = DVector::from_iterator(nn, (0..nn).map(|i| if i < n { w.center[i] } else { ic[i - n] }));
    let h: Vec<f64> = (0..nn).map(|i| if i < n { w.radius } else { ih[i - n] }).collect();
    let t = &center - &ashift;
    let z = box_solutions(&a, &t, &h, budget)?;
    let mut phys = Vec::new();
    let mut int = Vec::new();
    let mut c = vec![0.0; nn];
    for zz in z.chunks(nn) {
        for (i, ci) in c.iter_mut().enumerate() {
            let mut acc = ashift[i];
            for j in 0..nn {
                acc += a[(i, j)] * zz[j] as f64;
            }
            *ci = acc;
        }
        let inside_int = (0..nn - n).all(|k| {
            let tol = 1e-12 * (1.0 + ih[k]);
            c[n + k] >= spec.window.lo[k] - tol && c[n + k] <= spec.window.hi[k] + tol
        });
        if inside_int && w.contains(&c[..n]) {
            phys.extend_from_slice(&c[..n]);
            int.extend_from_slice(&c[n..]);
        }
    }
    Ok(CutProjectCoords { phys, int })
}

/// Cut-and-project points inside `w`, in physical-basis coordinates.
pub fn cut_and_project(spec: &CutProjectSpec, w: &Window) -> Result<PointCloud> {
    let cp = cut_and_project_coords(spec, w, DEFAULT_POINT_BUDGET)?;
    Ok(PointCloud {
        dim: spec.n,
        coords: cp.phys,
        provenance: Some(Box::new(Provenance { spec: ForestSpec::CutProject(spec.clone()), window: w.clone() })),
    })
}

/// Plane spanned by `(1, sqrt2, sqrt3)` and `(sqrt5, -1, sqrt7)`; its normal
/// has no zero coordinate, so it is transverse to every axis direction.
pub fn generic_plane() -> [[f64; 3]; 2] {
    [[1.0, 2f64.sqrt(), 3f64.sqrt()], [5f64.sqrt(), -1.0, 7f64.sqrt()]]
}

/// One cut-and-project spec per segment: plane directions as the physical
/// basis, the segment direction as the internal one, window `[-1, 0]`.
pub fn visit_specs(section: &Section, plane: &[[f64; 3]; 2], base: &[f64; 3]) -> Result<Vec<CutProjectSpec>> {
    let v1 = DVector::from_column_slice(&plane[0]);
    let v2 = DVector::from_column_slice(&plane[1]);
    if rank_of(&[v1.clone(), v2.clone()], 1e-12) < 2 {
        return Err(Error::InvalidInput("plane directions are dependent".into()));
    }
    section
        .segments
        .iter()
        .enumerate()
        .map(|(i, seg)| {
            let d = seg.direction();
            let m = DMatrix::from_columns(&[v1.clone(), v2.clone(), DVector::from_column_slice(&d)]);
            let scale = v1.norm() * v2.norm() * seg.length();
            if m.determinant().abs() <= 1e-12 * scale || seg.length() == 0.0 {
                return Err(Error::NonTransverseSection(i));
            }
            Ok(CutProjectSpec {
                big_n: 3,
                n: 2,
                phys_basis: vec![plane[0].to_vec(), plane[1].to_vec()],
                int_basis: vec![d.to_vec()],
                lattice_shift: (0..3).map(|k| seg.a[k] - base[k]).collect(),
                window: InternalWindow { lo: vec![-1.0], hi: vec![0.0] },
            })
        })
        .collect()
}

/// Times `v in W` with `x0 + v_1 V_1 + v_2 V_2` on the section mod `Z^3`.
pub fn toral_visit_set(section: &Section, plane: &[[f64; 3]; 2], base: &[f64; 3], w: &Window) -> Result<PointCloud> {
    let specs = visit_specs(section, plane, base)?;
    let mut coords = Vec::new();
    for (spec, seg) in specs.iter().zip(&section.segments) {
        let mut part = cut_and_project(spec, w)?;
        // a closed loop in the torus lists each visit at both ends
        if seg.direction().iter().all(|x| (x - x.round()).abs() < 1e-12) {
            part.dedup(1e-9 * w.radius.max(1.0));
        }
        coords.extend(part.coords);
    }
    Ok(PointCloud {
        dim: 2,
        coords,
        provenance: Some(Box::new(Provenance {
            spec: ForestSpec::ToralVisit { section: section.clone(), plane: *plane, base: *base },
            window: w.clone(),
        })),
    })
}

/// Points of any spec inside `w`; unions are deduplicated.
pub fn generate(spec: &ForestSpec, w: &Window) -> Result<PointCloud> {
    match spec {
        ForestSpec::CutProject(c) => cut_and_project(c, w),
        ForestSpec::ToralVisit { section, plane, base } => toral_visit_set(section, plane, base, w),
        ForestSpec::UnionOfGrids { .. } | ForestSpec::Tbg { .. } => {
            let grids = spec.grids().ok_or_else(|| Error::InvalidInput("bad tbg spec".into()))?;
            let d = grids.first().map(|g| g.lattice.dim).unwrap_or(w.dim());
            let mut coords = Vec::new();
            for g in &grids {
                coords.extend(enumerate_points_with_budget(g, w, DEFAULT_POINT_BUDGET)?.coords);
            }
            let mut pc = PointCloud { dim: d, coords, provenance: None };
            if grids.len() > 1 {
                pc.dedup(1e-9);
            }
            pc.provenance = Some(Box::new(Provenance { spec: spec.clone(), window: w.clone() }));
            Ok(pc)
        }
    }
}

/// Exact minimum distance over distinct pairs.
pub fn min_pairwise_distance(p: &PointCloud) -> Result<f64> {
    let n = p.len();
    if n < 2 {
        return Err(Error::InvalidInput("need at least two points".into()));
    }
    let d = p.dim;
    let mut lo = vec![f64::INFINITY; d];
    let mut hi = vec![f64::NEG_INFINITY; d];
    for q in p.iter() {
        for i in 0..d {
            lo[i] = lo[i].min(q[i]);
            hi[i] = hi[i].max(q[i]);
        }
    }
    let vol: f64 = (0..d).map(|i| (hi[i] - lo[i]).max(1e-300)).product();
    let mut cell = (vol / n as f64).powf(1.0 / d as f64);
    if !(cell > 0.0) || !cell.is_finite() {
        cell = 1.0;
    }
    loop {
        let best = if d == 2 { closest_pair_grid2(p, &lo, &hi, cell) } else { closest_pair_hash(p, cell) };
        if best <= cell {
            return Ok(best);
        }
        cell *= 2.0;
    }
}

/// Closest pair among pairs in adjacent cells of a dense 2D grid; any pair at
/// distance `<= cell` is seen.
fn closest_pair_grid2(p: &PointCloud, lo: &[f64], hi: &[f64], cell: f64) -> f64 {
    let n = p.len();
    let nx = (((hi[0] - lo[0]) / cell).floor() as usize + 1).max(1);
    let ny = (((hi[1] - lo[1]) / cell).floor() as usize + 1).max(1);
    if (nx as f64) * (ny as f64) > 4.0 * n as f64 + 1e6 {
        return closest_pair_hash(p, cell);
    }
    let idx = |q: &[f64]| -> (usize, usize) {
        let ix = (((q[0] - lo[0]) / cell).floor() as usize).min(nx - 1);
        let iy = (((q[1] - lo[1]) / cell).floor() as usize).min(ny - 1);
        (ix, iy)
    };
    let mut start = vec![0u32; nx * ny + 1];
    for q in p.iter() {
        let (ix, iy) = idx(q);
        start[ix * ny + iy + 1] += 1;
    }
    for k in 0..nx * ny {
        start[k + 1] += start[k];
    }
    let mut fill = start.clone();
    let mut order = vec![0u32; n];
    for (i, q) in p.iter().enumerate() {
        let (ix, iy) = idx(q);
        let c = ix * ny + iy;
        order[fill[c] as usize] = i as u32;
        fill[c] += 1;
    }
    let mut best2 = f64::INFINITY;
    for ix in 0..nx {
        for iy in 0..ny {
            let c = ix * ny + iy;
            let (a0, a1) = (start[c] as usize, start[c + 1] as usize);
            if a0 == a1 {
                continue;
            }
            // same cell, then the four forward neighbours
            for a in a0..a1 {
                let pa = p.point(order[a] as usize);
                for &b in &order[a + 1..a1] {
                    let pb = p.point(b as usize);
                    best2 = best2.min((pa[0] - pb[0]).powi(2) + (pa[1] - pb[1]).powi(2));
                }
            }
            for (dx, dy) in [(1i64, -1i64), (1, 0), (1, 1), (0, 1)] {
                let jx = ix as i64 + dx;
                let jy = iy as i64 + dy;
                if jx < 0 || jy < 0 || jx >= nx as i64 || jy >= ny as i64 {
                    continue;
                }
                let c2 = jx as usize * ny + jy as usize;
                let (b0, b1) = (start[c2] as usize, start[c2 + 1] as usize);
                for a in a0..a1 {
                    let pa = p.point(order[a] as usize);
                    for &b in &order[b0..b1] {
                        let pb = p.point(b as usize);
                        best2 = best2.min((pa[0] - pb[0]).powi(2) + (pa[1] - pb[1]).powi(2));
                    }
                }
            }
        }
    }
    best2.sqrt()
}

fn closest_pair_hash(p: &PointCloud, cell: f64) -> f64 {
    let d = p.dim;
    let mut cells: HashMap<Vec<i64>, Vec<usize>> = HashMap::new();
    for (i, q) in p.iter().enumerate() {
        let k: Vec<i64> = q.iter().map(|x| (x / cell).floor() as i64).collect();
        cells.entry(k).or_default().push(i);
    }
    let offsets = neighbour_offsets(d);
    let mut best2 = f64::INFINITY;
    for (k, list) in &cells {
        for off in &offsets {
            let nk: Vec<i64> = k.iter().zip(off).map(|(a, b)| a + b).collect();
            if nk < *k {
                continue;
            }
            let Some(other) = cells.get(&nk) else { continue };
            let same = nk == *k;
            for (ai, &a) in list.iter().enumerate() {
                let pa = p.point(a);
                let rest: &[usize] = if same { &list[ai + 1..] } else { other };
                for &b in rest {
                    let pb = p.point(b);
                    let d2: f64 = pa.iter().zip(pb).map(|(x, y)| (x - y) * (x - y)).sum();
                    best2 = best2.min(d2);
                }
            }
        }
    }
    best2.sqrt()
}

/// Continued-fraction rational recognition: `p/q` with `q <= 1e6`, depth at
/// most 40, `|x - p/q| <= 1e-9 max(1, |x|)` and `|x - p/q| <= 1e-3 / q^2`.
///
/// The second test rejects convergents that are merely as good as every
/// irrational admits.
pub fn recognize_rational(x: f64) -> Option<(i64, i64)> {
    if !x.is_finite() {
        return None;
    }
    let tol = 1e-9 * x.abs().max(1.0);
    let (mut h0, mut h1) = (0i128, 1i128);
    let (mut k0, mut k1) = (1i128, 0i128);
    let mut y = x;
    for _ in 0..40 {
        let a = y.floor();
        if a.abs() > 1e12 {
            return None;
        }
        let ai = a as i128;
        let h2 = ai * h1 + h0;
        let k2 = ai * k1 + k0;
        if k2 > 1_000_000 {
            return None;
        }
        (h0, h1, k0, k1) = (h1, h2, k1, k2);
        let err = (x - h1 as f64 / k1 as f64).abs();
        if err <= tol && err <= 1e-3 / (k1 as f64 * k1 as f64) {
            return Some((h1 as i64, k1 as i64));
        }
        let f = y - a;
        if f.abs() < 1e-15 {
            return None;
        }
        y = 1.0 / f;
    }
    None
}

/// Outcome of the closure test for `L1 - L2` in the plane.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "result", rename_all = "snake_case")]
pub enum ClosureResult {
    /// `functional` takes integer values on both lattices, so their difference
    /// set lies on the parallel lines `functional = k`, spaced `gap` apart
    /// along `direction`'s normal.
    Obstruction { functional: [f64; 2], direction: [f64; 2], gap: f64 },
    /// No common dual vector up to `search_norm`; not a proof of density.
    Dense { verified: bool, search_norm: f64 },
}

/// Search for a nonzero vector of `L1* ∩ L2*`.
///
/// Primitive vectors `g` of `L1*` are scanned by increasing length; the
/// pairings of `g` with a basis of `L2` are tested for rationality and the
/// common denominator gives the multiple of `g` lying in `L2*`.
pub fn union_closure_obstruction(l1: &Lattice, l2: &Lattice) -> Result<ClosureResult> {
    if l1.dim != 2 || l2.dim != 2 {
        return Err(Error::Unsupported("closure test is planar".into()));
    }
    let d1 = dual(l1)?;
    let b = d1.matrix();
    let (red, _) = crate::linalg::lll_reduce(&b);
    let search_norm = 200.0 * red.column(0).norm().max(red.column(1).norm());
    let inv = red.clone().try_inverse().ok_or(Error::DegenerateLattice)?;
    let kx = (inv.row(0).norm() * search_norm).ceil() as i64;
    let ky = (inv.row(1).norm() * search_norm).ceil() as i64;
    let mut cands: Vec<(f64, i64, i64)> = Vec::new();
    for i in -kx..=kx {
        for j in 0..=ky {
            if (j == 0 && i <= 0) || num_integer::gcd(i, j) != 1 {
                continue;
            }
            let g = &red.column(0) * i as f64 + &red.column(1) * j as f64;
            let n = g.norm();
            if n <= search_norm {
                cands.push((n, i, j));
            }
        }
    }
    cands.sort_by(|a, b| a.partial_cmp(b).unwrap());
    for (_, i, j) in cands {
        let g = &red.column(0) * i as f64 + &red.column(1) * j as f64;
        let mut lcm = 1i64;
        let mut ok = true;
        for col in 0..2 {
            let x = g[0] * l2.basis[0][col] + g[1] * l2.basis[1][col];
            match recognize_rational(x) {
                Some((_, q)) => lcm = num_integer::lcm(lcm, q),
                None => {
                    ok = false;
                    break;
                }
            }
        }
        if ok && lcm <= 1_000_000 {
            let f = g * lcm as f64;
            let n = f.norm();
            return Ok(ClosureResult::Obstruction {
                functional: [f[0], f[1]],
                direction: [-f[1] / n, f[0] / n],
                gap: 1.0 / n,
            });
        }
    }
    Ok(ClosureResult::Dense { verified: false, search_norm })
}

/// Whether rotation by `theta` maps the triangular lattice onto itself.
pub fn honeycomb_rotation_is_symmetry(theta: f64) -> bool {
    let h = 3f64.sqrt() / 2.0;
    let base = Lattice::new(vec![vec![1.0, 0.5], vec![0.0, h]]).expect("full rank");
    let (c, s) = (theta.cos(), theta.sin());
    let rot = Lattice::new(vec![vec![c, 0.5 * c - h * s], vec![s, 0.5 * s + h * c]]).expect("full rank");
    base.same_as(&rot, 1e-9)
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::f64::consts::PI;

    #[test]
    fn peres_contains_origin() {
        let pc = generate(&peres_forest(), &Window::centered(2, 1.0)).unwrap();
        assert!(pc.iter().any(|p| p[0] == 0.0 && p[1] == 0.0));
    }

    #[test]
    fn generalized_matches_peres() {
        let g = generalized_forest(&[vec![0.0], vec![golden_ratio()]]).unwrap();
        let (ForestSpec::UnionOfGrids { grids: a }, ForestSpec::UnionOfGrids { grids: b }) = (g, peres_forest()) else {
            panic!("grid unions expected");
        };
        assert_eq!(a.len(), 3);
        for x in &a {
            assert!(b.iter().any(|y| y.same_as(x, 1e-9)));
        }
    }

    #[test]
    fn zero_theta_collapses() {
        let g = generalized_forest(&[vec![0.0, 0.0]]).unwrap();
        assert_eq!(g.grids().unwrap().len(), 1);
    }

    #[test]
    fn strip_picks_row() {
        let spec = CutProjectSpec {
            big_n: 2,
            n: 1,
            phys_basis: vec![vec![1.0, 0.0]],
            int_basis: vec![vec![0.0, 1.0]],
            lattice_shift: vec![0.0, 0.0],
            window: InternalWindow { lo: vec![-0.5], hi: vec![0.5] },
        };
        let pc = cut_and_project(&spec, &Window::centered(1, 5.0)).unwrap();
        assert_eq!(pc.len(), 11);
        let empty = CutProjectSpec { window: InternalWindow { lo: vec![0.5], hi: vec![-0.5] }, ..spec };
        assert!(cut_and_project(&empty, &Window::centered(1, 5.0)).unwrap().is_empty());
    }

    #[test]
    fn min_distance_examples() {
        let z = generate(
            &ForestSpec::UnionOfGrids { grids: vec![Grid::unshifted(Lattice::identity(2))] },
            &Window::centered(2, 5.0),
        )
        .unwrap();
        assert!((min_pairwise_distance(&z).unwrap() - 1.0).abs() < 1e-12);
        let two = ForestSpec::UnionOfGrids {
            grids: vec![
                Grid::unshifted(Lattice::identity(2)),
                Grid::new(Lattice::identity(2), vec![0.3, 0.0]).unwrap(),
            ],
        };
        let pc = generate(&two, &Window::centered(2, 5.0)).unwrap();
        assert!((min_pairwise_distance(&pc).unwrap() - 0.3).abs() < 1e-12);
        assert!(min_pairwise_distance(&PointCloud::from_points(2, &[vec![0.0, 0.0]])).is_err());
    }

    #[test]
    fn rational_recognition() {
        assert_eq!(recognize_rational(0.75), Some((3, 4)));
        assert_eq!(recognize_rational(-1.0 / 3.0), Some((-1, 3)));
        assert_eq!(recognize_rational(golden_ratio()), None);
        assert_eq!(recognize_rational(2f64.sqrt()), None);
    }

    #[test]
    fn tbg_symmetry() {
        assert!(honeycomb_rotation_is_symmetry(PI / 3.0));
        assert!(!honeycomb_rotation_is_symmetry(PI / 6.0));
        let t = tbg_union(2, &[0.0, PI / 3.0], &[[0.0, 0.0], [0.0, 0.0]]).unwrap();
        assert_eq!(t.grids().unwrap().len(), 1);
    }

    #[test]
    fn axis_section_is_valid() {
        Section::axis_circles().validate().unwrap();
    }

    #[test]
    fn csv_format() {
        let pc = PointCloud::from_points(2, &[vec![0.5, 1.0 / 3.0]]);
        assert_eq!(pc.to_csv(), "0.5,0.333333333333\n");
    }
}
