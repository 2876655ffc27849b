//! Empty-segment search in planar point sets and empty-slab certificates for
//! cut-and-project sets.
//!
//! A line family is fixed by a window, a direction count `K` (directions
//! `k pi / K`) and an offset step `h` (lines `j h` from the window center).
//! For a clearance `e` every point at perpendicular distance `d < e` forbids
//! the open interval of half-length `sqrt(e^2 - d^2)` around its foot; the
//! estimator returns the longest free piece of any chord in the family.

use std::cmp::Ordering;
use std::f64::consts::PI;

use nalgebra::DVector;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::circle::{in_open_arc, uncovered};
use crate::error::{Error, Result};
use crate::forest_gen::{generate, CutProjectSpec, ForestSpec, PointCloud};
use crate::lattice_core::{covolume, Grid, Window};
use crate::linalg::{frac, orthonormal_complement};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SegmentQuery {
    pub epsilon: f64,
    pub window: Window,
    pub direction_count: usize,
    pub offset_step: f64,
}

impl SegmentQuery {
    /// Step `eps / 2` and `ceil(pi R / eps)` directions rounded up to a
    /// multiple of four, so the axes and diagonals belong to the family.
    pub fn standard(epsilon: f64, window: Window) -> Self {
        let k = (PI * window.radius / epsilon).ceil() as usize;
        SegmentQuery { epsilon, direction_count: k.div_ceil(4).max(1) * 4, offset_step: epsilon / 2.0, window }
    }

    pub fn validate(&self) -> Result<()> {
        if self.window.dim() != 2 {
            return Err(Error::DimensionMismatch { expected: 2, got: self.window.dim() });
        }
        if !(self.epsilon > 0.0) || !(self.offset_step > 0.0) {
            return Err(Error::InvalidInput("epsilon and offset step must be positive".into()));
        }
        if self.offset_step > self.epsilon / 2.0 * (1.0 + 1e-12) {
            return Err(Error::ResolutionTooCoarse(format!(
                "offset step {} exceeds eps/2 = {}",
                self.offset_step,
                self.epsilon / 2.0
            )));
        }
        if (self.direction_count as f64) < PI * self.window.radius / self.epsilon * (1.0 - 1e-12) {
            return Err(Error::ResolutionTooCoarse(format!(
                "{} directions, need at least pi R / eps",
                self.direction_count
            )));
        }
        Ok(())
    }

    /// Clearance actually certified, `eps - h/2`.
    pub fn effective_epsilon(&self) -> f64 {
        self.epsilon - self.offset_step / 2.0
    }
}

/// Longest free piece found, with its endpoints and family indices.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EmptySegment {
    pub length: f64,
    pub a: [f64; 2],
    pub b: [f64; 2],
    pub direction: usize,
    pub line: i64,
    /// Length of the whole chord carrying the segment.
    pub chord: f64,
}

impl EmptySegment {
    pub fn spans_chord(&self) -> bool {
        self.length >= self.chord * (1.0 - 1e-12)
    }

    /// Larger length wins; ties go to the smaller `(direction, line)`.
    fn beats(&self, other: &Option<EmptySegment>) -> bool {
        match other {
            None => true,
            Some(o) => match self.length.partial_cmp(&o.length).unwrap_or(Ordering::Equal) {
                Ordering::Greater => true,
                Ordering::Less => false,
                Ordering::Equal => (self.direction, self.line) < (o.direction, o.line),
            },
        }
    }
}

fn better(a: Option<EmptySegment>, b: Option<EmptySegment>) -> Option<EmptySegment> {
    match (&a, &b) {
        (_, None) => a,
        (None, _) => b,
        (Some(_), Some(y)) => {
            if y.beats(&a) {
                b
            } else {
                a
            }
        }
    }
}

/// The line family shared by every clearance in a curve.
#[derive(Clone, Debug)]
struct Family {
    center: [f64; 2],
    radius: f64,
    k: usize,
    h: f64,
    max_line: i64,
}

#[derive(Clone, Copy, Debug)]
struct Frame {
    u: [f64; 2],
    n: [f64; 2],
}

impl Family {
    fn new(window: &Window, k: usize, h: f64) -> Self {
        let max_line = (window.radius * 2f64.sqrt() / h).floor() as i64;
        Family { center: [window.center[0], window.center[1]], radius: window.radius, k, h, max_line }
    }

    fn frame(&self, dir: usize) -> Frame {
        let t = dir as f64 * PI / self.k as f64;
        let (s, c) = t.sin_cos();
        Frame { u: [c, s], n: [-s, c] }
    }

    /// Chord `[s_lo, s_hi]` of line `c` (perpendicular offset) in the window.
    fn chord(&self, f: &Frame, c: f64) -> Option<(f64, f64)> {
        let r = self.radius;
        let (mut lo, mut hi) = (f64::NEG_INFINITY, f64::INFINITY);
        for a in 0..2 {
            let base = c * f.n[a];
            if f.u[a].abs() < 1e-15 {
                if base.abs() > r {
                    return None;
                }
                continue;
            }
            let x = (-r - base) / f.u[a];
            let y = (r - base) / f.u[a];
            lo = lo.max(x.min(y));
            hi = hi.min(x.max(y));
        }
        (hi > lo).then_some((lo, hi))
    }

    fn max_chord(&self, f: &Frame) -> f64 {
        // the longest chord passes through the center
        self.chord(f, 0.0).map(|(a, b)| b - a).unwrap_or(0.0)
    }

    fn endpoint(&self, f: &Frame, c: f64, s: f64) -> [f64; 2] {
        [self.center[0] + c * f.n[0] + s * f.u[0], self.center[1] + c * f.n[1] + s * f.u[1]]
    }

    fn segment(&self, f: &Frame, dir: usize, line: i64, chord: (f64, f64), gap: (f64, f64)) -> EmptySegment {
        let c = line as f64 * self.h;
        EmptySegment {
            length: gap.1 - gap.0,
            a: self.endpoint(f, c, gap.0),
            b: self.endpoint(f, c, gap.1),
            direction: dir,
            line,
            chord: chord.1 - chord.0,
        }
    }
}

/// Longest free piece of `chord` given forbidden intervals; `intervals` is
/// sorted in place.
fn longest_gap(intervals: &mut [(f64, f64)], chord: (f64, f64)) -> (f64, f64) {
    intervals.sort_unstable_by(|a, b| a.0.partial_cmp(&b.0).unwrap_or(Ordering::Equal));
    let mut reach = chord.0;
    let mut best = (chord.0, chord.0);
    for &(lo, hi) in intervals.iter() {
        if lo >= chord.1 {
            break;
        }
        if lo > reach && lo - reach > best.1 - best.0 {
            best = (reach, lo);
        }
        reach = reach.max(hi);
    }
    if chord.1 > reach && chord.1 - reach > best.1 - best.0 {
        best = (reach, chord.1);
    }
    best
}

/// Exact scan of a point cloud for several clearances at once.
fn cloud_scan(p: &PointCloud, fam: &Family, effs: &[f64]) -> Vec<Option<EmptySegment>> {
    let emax = effs.iter().cloned().fold(0.0, f64::max);
    let per_dir: Vec<Vec<Option<EmptySegment>>> = (0..fam.k)
        .into_par_iter()
        .map(|dir| {
            let f = fam.frame(dir);
            let nl = (2 * fam.max_line + 1) as usize;
            let mut counts = vec![0u32; nl + 1];
            let mut sc: Vec<(f64, f64)> = Vec::with_capacity(p.len());
            for q in p.iter() {
                let x = q[0] - fam.center[0];
                let y = q[1] - fam.center[1];
                let s = x * f.u[0] + y * f.u[1];
                let c = x * f.n[0] + y * f.n[1];
                sc.push((s, c));
                let j0 = (((c - emax) / fam.h).ceil() as i64).max(-fam.max_line);
                let j1 = (((c + emax) / fam.h).floor() as i64).min(fam.max_line);
                for j in j0..=j1 {
                    counts[(j + fam.max_line) as usize + 1] += 1;
                }
            }
            for i in 0..nl {
                counts[i + 1] += counts[i];
            }
            let mut fill = counts.clone();
            let mut entries = vec![(0.0f64, 0.0f64); counts[nl] as usize];
            for &(s, c) in &sc {
                let j0 = (((c - emax) / fam.h).ceil() as i64).max(-fam.max_line);
                let j1 = (((c + emax) / fam.h).floor() as i64).min(fam.max_line);
                for j in j0..=j1 {
                    let slot = (j + fam.max_line) as usize;
                    entries[fill[slot] as usize] = (s, c - j as f64 * fam.h);
                    fill[slot] += 1;
                }
            }
            let mut out: Vec<Option<EmptySegment>> = vec![None; effs.len()];
            let mut buf: Vec<(f64, f64)> = Vec::new();
            for j in -fam.max_line..=fam.max_line {
                let c = j as f64 * fam.h;
                let Some(chord) = fam.chord(&f, c) else { continue };
                let slot = (j + fam.max_line) as usize;
                let list = &entries[counts[slot] as usize..counts[slot + 1] as usize];
                for (ei, &e) in effs.iter().enumerate() {
                    if let Some(o) = &out[ei] {
                        if chord.1 - chord.0 < o.length {
                            continue;
                        }
                    }
                    buf.clear();
                    for &(s, d) in list {
                        if d.abs() < e {
                            let a = (e * e - d * d).sqrt();
                            buf.push((s - a, s + a));
                        }
                    }
                    let gap = longest_gap(&mut buf, chord);
                    let seg = fam.segment(&f, dir, j, chord, gap);
                    if seg.beats(&out[ei]) {
                        out[ei] = Some(seg);
                    }
                }
            }
            out
        })
        .collect();
    let mut best: Vec<Option<EmptySegment>> = vec![None; effs.len()];
    for row in per_dir {
        for (i, s) in row.into_iter().enumerate() {
            best[i] = better(best[i].take(), s);
        }
    }
    best
}

/// Longest `eps'`-clear chord piece of a planar cloud over the query's family.
pub fn max_empty_segment(p: &PointCloud, q: &SegmentQuery) -> Result<EmptySegment> {
    q.validate()?;
    if !p.is_empty() && p.dim != 2 {
        return Err(Error::DimensionMismatch { expected: 2, got: p.dim });
    }
    let fam = Family::new(&q.window, q.direction_count, q.offset_step);
    let e = q.effective_epsilon();
    let empty = PointCloud::empty(2);
    let pts = if p.is_empty() { &empty } else { p };
    cloud_scan(pts, &fam, &[e])
        .pop()
        .flatten()
        .ok_or_else(|| Error::InvalidInput("window has no chords".into()))
}

/// Lattice basis vector tracked by integer coefficients in the original basis.
#[derive(Clone, Copy, Debug)]
struct LVec {
    coef: [i64; 2],
    s: f64,
    p: f64,
}

/// One grid seen in a direction frame.
#[derive(Clone, Debug)]
struct GridFrame {
    b: [[f64; 2]; 2],
    shift: [f64; 2],
    e1: (f64, f64),
    e2: (f64, f64),
    covol: f64,
}

impl GridFrame {
    fn new(g: &Grid, f: &Frame) -> Self {
        let b = [[g.lattice.basis[0][0], g.lattice.basis[0][1]], [g.lattice.basis[1][0], g.lattice.basis[1][1]]];
        let col = |j: usize| (b[0][j] * f.u[0] + b[1][j] * f.u[1], b[0][j] * f.n[0] + b[1][j] * f.n[1]);
        GridFrame {
            b,
            shift: [g.shift[0], g.shift[1]],
            e1: col(0),
            e2: col(1),
            covol: covolume(&g.lattice),
        }
    }

    fn vec(&self, coef: [i64; 2]) -> LVec {
        let (m, n) = (coef[0] as f64, coef[1] as f64);
        LVec { coef, s: m * self.e1.0 + n * self.e2.0, p: m * self.e1.1 + n * self.e2.1 }
    }

    /// Lagrange-Gauss reduction in the metric `(ws s)^2 + (wp p)^2`.
    fn gauss(&self, ws: f64, wp: f64) -> (LVec, LVec) {
        let norm = |v: &LVec| (ws * v.s).powi(2) + (wp * v.p).powi(2);
        let dot = |a: &LVec, b: &LVec| ws * ws * a.s * b.s + wp * wp * a.p * b.p;
        let mut a = self.vec([1, 0]);
        let mut b = self.vec([0, 1]);
        if norm(&b) < norm(&a) {
            std::mem::swap(&mut a, &mut b);
        }
        for _ in 0..200 {
            let mu = (dot(&a, &b) / norm(&a)).round();
            if mu != 0.0 {
                if mu.abs() > 1e15 {
                    break;
                }
                let m = mu as i64;
                b = self.vec([b.coef[0] - m * a.coef[0], b.coef[1] - m * a.coef[1]]);
            }
            if norm(&b) < norm(&a) {
                std::mem::swap(&mut a, &mut b);
            } else {
                break;
            }
        }
        (a, b)
    }

    /// Candidate bases near a reduced pair.
    fn neighbours(&self, a: LVec, b: LVec) -> [(LVec, LVec); 4] {
        let plus = self.vec([a.coef[0] + b.coef[0], a.coef[1] + b.coef[1]]);
        let minus = self.vec([a.coef[0] - b.coef[0], a.coef[1] - b.coef[1]]);
        [(a, b), (b, a), (plus, b), (minus, b)]
    }

    /// Upper bound on every gap of every line in this direction: any basis
    /// with `|p1| + |p2| < 2e` puts a point within `e` of each line point,
    /// at along-distance at most `(|s1| + |s2|) / 2`.
    fn direction_bound(&self, e: f64) -> f64 {
        let mut best = f64::INFINITY;
        let mut wp = 1.0;
        for _ in 0..40 {
            let (a, b) = self.gauss(1.0, wp);
            for (x, y) in self.neighbours(a, b) {
                if x.p.abs() + y.p.abs() < 2.0 * e {
                    best = best.min(x.s.abs() + y.s.abs());
                }
            }
            wp *= 2.0;
        }
        best
    }

    /// Basis `(b1, b2)` with `|s1| < target` and `|p1|` small.
    fn row_basis(&self, target: f64) -> Option<(LVec, LVec)> {
        let mut best: Option<(LVec, LVec)> = None;
        let mut scale = 1.0;
        for _ in 0..3 {
            let (a, b) = self.gauss(scale * 2.0 / target, target / self.covol / scale);
            for (x, y) in self.neighbours(a, b) {
                if x.s.abs() < target && x.p.abs() > 0.0 || x.s.abs() < target && x.p == 0.0 {
                    if best.as_ref().is_none_or(|(c, _)| x.p.abs() < c.p.abs()) {
                        best = Some((x, y));
                    }
                }
            }
            scale *= 2.0;
        }
        best
    }

    /// Along and perpendicular coordinates of the point with coefficients
    /// `coef`, recomputed in the original basis.
    fn point(&self, fam: &Family, f: &Frame, coef: [i64; 2]) -> (f64, f64) {
        let (m, n) = (coef[0] as f64, coef[1] as f64);
        let x = self.shift[0] + self.b[0][0] * m + self.b[0][1] * n - fam.center[0];
        let y = self.shift[1] + self.b[1][0] * m + self.b[1][1] * n - fam.center[1];
        (x * f.u[0] + y * f.u[1], x * f.n[0] + y * f.n[1])
    }
}

const RANGE_CAP: f64 = (1u64 << 40) as f64;

/// Rows of a grid crossing the tube `|perp - c| < e` near the chord.
struct RowScan<'a> {
    g: &'a GridFrame,
    b1: LVec,
    b2: LVec,
    s0: f64,
    c0: f64,
}

impl<'a> RowScan<'a> {
    fn new(g: &'a GridFrame, fam: &Family, f: &Frame, b1: LVec, b2: LVec) -> Self {
        let (s0, c0) = g.point(fam, f, [0, 0]);
        RowScan { g, b1, b2, s0, c0 }
    }

    fn coef(&self, m: i64, n: i64) -> [i64; 2] {
        [m * self.b1.coef[0] + n * self.b2.coef[0], m * self.b1.coef[1] + n * self.b2.coef[1]]
    }

    /// Calls `visit(n, m_lo, m_hi)` for every nonempty run.
    fn runs<F: FnMut(i64, i64, i64)>(&self, fam: &Family, f: &Frame, c: f64, e: f64, chord: (f64, f64), mut visit: F) {
        let (s1, p1, s2, p2) = (self.b1.s, self.b1.p, self.b2.s, self.b2.p);
        let (lo_s, hi_s) = (chord.0 - e, chord.1 + e);
        let m_range = |n: i64| -> (i64, i64) {
            let base = self.s0 + n as f64 * s2;
            let x = (lo_s - base) / s1;
            let y = (hi_s - base) / s1;
            if s1 == 0.0 {
                // rows perpendicular to the line: either all of the row or none
                let cap = RANGE_CAP as i64;
                return if base >= lo_s && base <= hi_s { (-cap, cap) } else { (1, 0) };
            }
            let lo = x.min(y).ceil().clamp(-RANGE_CAP, RANGE_CAP);
            let hi = x.max(y).floor().clamp(-RANGE_CAP, RANGE_CAP);
            (lo as i64, hi as i64)
        };
        let inside = |m: i64, n: i64| -> bool {
            let (s, d) = self.g.point(fam, f, self.coef(m, n));
            (d - c).abs() < e && s >= lo_s && s <= hi_s
        };
        if p1.abs() < 1e-13 {
            let x = (c - e - self.c0) / p2;
            let y = (c + e - self.c0) / p2;
            for n in x.min(y).floor() as i64..=x.max(y).ceil() as i64 {
                let (a, b) = m_range(n);
                let (mut a, mut b) = (a - 1, b + 1);
                while a <= b && !inside(a, n) {
                    a += 1;
                }
                while b >= a && !inside(b, n) {
                    b -= 1;
                }
                if a <= b {
                    visit(n, a, b);
                }
            }
            return;
        }
        // crossing positions s*(n) = big_a + n delta
        let delta = s2 - p2 * s1 / p1;
        let big_a = self.s0 + (c - self.c0) * s1 / p1;
        let ext = e * s1.abs() / p1.abs() + s1.abs();
        let x = (lo_s - ext - big_a) / delta;
        let y = (hi_s + ext - big_a) / delta;
        for n in x.min(y).floor() as i64..=x.max(y).ceil() as i64 {
            let base = c - self.c0 - n as f64 * p2;
            let u = (base - e) / p1;
            let v = (base + e) / p1;
            let (ma, mb) = m_range(n);
            let mut a = (u.min(v).ceil() as i64).max(ma) - 1;
            let mut b = (u.max(v).floor() as i64).min(mb) + 1;
            while a <= b && !inside(a, n) {
                a += 1;
            }
            while b >= a && !inside(b, n) {
                b -= 1;
            }
            if a <= b {
                visit(n, a, b);
            }
        }
    }
}

fn reach_of(scan: &RowScan, fam: &Family, f: &Frame, c: f64, e: f64, n: i64, a: i64, b: i64) -> (f64, f64) {
    let k = ((e / scan.b1.s.abs()).floor() + 1.0).min((b - a + 1) as f64) as i64;
    let mut lo = f64::INFINITY;
    let mut hi = f64::NEG_INFINITY;
    let mut eval = |m: i64| {
        let (s, d) = scan.g.point(fam, f, scan.coef(m, n));
        let dd = d - c;
        if dd.abs() < e {
            let h = (e * e - dd * dd).sqrt();
            lo = lo.min(s - h);
            hi = hi.max(s + h);
        }
    };
    for m in a..a + k {
        eval(m);
    }
    for m in (b - k + 1).max(a + k)..=b {
        eval(m);
    }
    (lo, hi)
}

/// Exact gap of one line for a union of grids, listing every tube point.
fn grid_line_exact(
    scans: &[RowScan],
    fam: &Family,
    f: &Frame,
    c: f64,
    e: f64,
    chord: (f64, f64),
    buf: &mut Vec<(f64, f64)>,
) -> (f64, f64) {
    buf.clear();
    for sc in scans {
        sc.runs(fam, f, c, e, chord, |n, a, b| {
            for m in a..=b {
                let (s, d) = sc.g.point(fam, f, sc.coef(m, n));
                let dd = d - c;
                if dd.abs() < e {
                    let h = (e * e - dd * dd).sqrt();
                    buf.push((s - h, s + h));
                }
            }
        });
    }
    longest_gap(buf, chord)
}

/// Gap of one line from run hulls; exact whenever it is at least the
/// largest `|s1|` among the scans.
fn grid_line_hulls(
    scans: &[RowScan],
    fam: &Family,
    f: &Frame,
    c: f64,
    e: f64,
    chord: (f64, f64),
    buf: &mut Vec<(f64, f64)>,
) -> (f64, f64) {
    buf.clear();
    for sc in scans {
        sc.runs(fam, f, c, e, chord, |n, a, b| {
            buf.push(reach_of(sc, fam, f, c, e, n, a, b));
        });
    }
    longest_gap(buf, chord)
}

/// Default cap on row runs visited by one grid search.
pub const DEFAULT_WORK_BUDGET: u64 = 400_000_000;

/// Result of a grid search: the best segment, whether every direction that
/// could beat it was scanned, and the run count spent.
#[derive(Clone, Debug)]
struct GridOutcome {
    best: Option<EmptySegment>,
    exhaustive: bool,
    work: u64,
}

/// Pruned search over a union of grids. Directions are visited by
/// decreasing upper bound; the search is exact when it stops on the bound
/// and a lower bound when it stops on the budget.
fn grid_search(grids: &[Grid], fam: &Family, e: f64, budget: u64, seed: Option<EmptySegment>) -> GridOutcome {
    let mut order: Vec<(f64, usize)> = (0..fam.k)
        .into_par_iter()
        .map(|dir| {
            let f = fam.frame(dir);
            let bound = grids
                .iter()
                .map(|g| GridFrame::new(g, &f).direction_bound(e))
                .fold(f64::INFINITY, f64::min)
                .min(fam.max_chord(&f));
            (bound, dir)
        })
        .collect();
    order.sort_by(|a, b| b.0.partial_cmp(&a.0).unwrap_or(Ordering::Equal).then(a.1.cmp(&b.1)));

    let mut best: Option<EmptySegment> = seed;
    let mut work = 0u64;
    // seed with exact scans of a few lines in the most promising directions
    for &(_, dir) in order.iter().take(16) {
        let f = fam.frame(dir);
        let frames: Vec<GridFrame> = grids.iter().map(|g| GridFrame::new(g, &f)).collect();
        let scans: Vec<RowScan> = frames
            .iter()
            .map(|g| {
                let (a, b) = g.gauss(1.0, 1.0);
                let (b1, b2) = if a.s.abs() >= b.s.abs() { (a, b) } else { (b, a) };
                RowScan::new(g, fam, &f, b1, b2)
            })
            .collect();
        let mut buf = Vec::new();
        for j in (-fam.max_line..=fam.max_line).step_by((fam.max_line as usize / 8).max(1)) {
            let c = j as f64 * fam.h;
            let Some(chord) = fam.chord(&f, c) else { continue };
            let gap = grid_line_exact(&scans, fam, &f, c, e, chord, &mut buf);
            work += buf.len() as u64;
            let seg = fam.segment(&f, dir, j, chord, gap);
            if seg.beats(&best) {
                best = Some(seg);
            }
        }
    }

    let mut exhaustive = true;
    for &(bound, dir) in &order {
        let floor = best.as_ref().map(|b| b.length).unwrap_or(0.0);
        if bound < floor {
            break;
        }
        if work >= budget {
            exhaustive = false;
            break;
        }
        let f = fam.frame(dir);
        let frames: Vec<GridFrame> = grids.iter().map(|g| GridFrame::new(g, &f)).collect();
        let bases: Option<Vec<(LVec, LVec)>> =
            if floor > 0.0 { frames.iter().map(|g| g.row_basis(floor)).collect() } else { None };
        let exact = bases.is_none();
        let scans: Vec<RowScan> = match &bases {
            Some(bs) => frames.iter().zip(bs).map(|(g, &(b1, b2))| RowScan::new(g, fam, &f, b1, b2)).collect(),
            None => frames
                .iter()
                .map(|g| {
                    let (a, b) = g.gauss(1.0, 1.0);
                    let (b1, b2) = if a.s.abs() >= b.s.abs() { (a, b) } else { (b, a) };
                    RowScan::new(g, fam, &f, b1, b2)
                })
                .collect(),
        };
        let smax = scans.iter().map(|s| s.b1.s.abs()).fold(0.0, f64::max);
        let lines: Vec<i64> = (-fam.max_line..=fam.max_line).collect();
        let (found, spent) = lines
            .par_chunks(256)
            .map(|chunk| {
                let mut buf = Vec::new();
                let mut local: Option<EmptySegment> = None;
                let mut spent = 0u64;
                for &j in chunk {
                    let c = j as f64 * fam.h;
                    let Some(chord) = fam.chord(&f, c) else { continue };
                    if chord.1 - chord.0 < floor {
                        continue;
                    }
                    let gap = if exact {
                        grid_line_exact(&scans, fam, &f, c, e, chord, &mut buf)
                    } else {
                        grid_line_hulls(&scans, fam, &f, c, e, chord, &mut buf)
                    };
                    spent += buf.len() as u64 + 1;
                    // pieces inside a run are shorter than smax < floor
                    if !exact && gap.1 - gap.0 < smax {
                        continue;
                    }
                    let seg = fam.segment(&f, dir, j, chord, gap);
                    if seg.length >= floor && seg.beats(&local) {
                        local = Some(seg);
                    }
                }
                (local, spent)
            })
            .reduce(|| (None, 0), |a, b| (better(a.0, b.0), a.1 + b.1));
        work += spent;
        best = better(best, found);
    }
    GridOutcome { best, exhaustive, work }
}

/// One row of a visibility curve.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct VisibilityRecord {
    pub epsilon: f64,
    pub effective_epsilon: f64,
    pub direction_count: usize,
    pub offset_step: f64,
    /// Best length on this epsilon's own line family.
    pub family_length: f64,
    /// Reported length: the family length, or a longer witness carried
    /// over from a larger epsilon (still clear at the smaller clearance).
    pub max_empty_length: f64,
    pub witness: EmptySegment,
    pub carried: bool,
    /// False when the grid search stopped on its work budget.
    pub exhaustive: bool,
    pub work: u64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct VisibilityReport {
    pub window: Window,
    pub records: Vec<VisibilityRecord>,
    /// Least-squares slope of `ln length` against `ln (1/eps)`.
    pub slope: Option<f64>,
    /// Every witness spans its whole chord.
    pub not_a_forest: bool,
    /// Family lengths are nonincreasing in epsilon.
    pub monotone: bool,
}

/// Least-squares slope of `ln y` against `ln (1/x)`.
pub fn loglog_slope(xs: &[f64], ys: &[f64]) -> Option<f64> {
    if xs.len() < 2 || xs.len() != ys.len() || ys.iter().any(|&y| !(y > 0.0)) {
        return None;
    }
    let lx: Vec<f64> = xs.iter().map(|x| (1.0 / x).ln()).collect();
    let ly: Vec<f64> = ys.iter().map(|y| y.ln()).collect();
    let n = lx.len() as f64;
    let mx = lx.iter().sum::<f64>() / n;
    let my = ly.iter().sum::<f64>() / n;
    let sxx: f64 = lx.iter().map(|x| (x - mx).powi(2)).sum();
    if sxx == 0.0 {
        return None;
    }
    let sxy: f64 = lx.iter().zip(&ly).map(|(x, y)| (x - mx) * (y - my)).sum();
    Some(sxy / sxx)
}

/// Smallest radius of the window ladder used for unions of grids.
const LADDER_MIN_RADIUS: f64 = 20.0;

/// Longest empty segment for a forest spec.
///
/// Unions of grids are searched on the windows `R / 2^k, ..., R / 2, R`
/// sharing one work budget; each stage starts from the previous witness,
/// which stays clear in every larger window. The result is the longest of
/// that witness and the pieces on the family of `q`. Other specs scan a
/// generated cloud. Returns the segment, the exhaustive flag and the work.
pub fn max_empty_segment_for(spec: &ForestSpec, q: &SegmentQuery, budget: u64) -> Result<(EmptySegment, bool, u64)> {
    q.validate()?;
    if spec.dim() != 2 {
        return Err(Error::DimensionMismatch { expected: 2, got: spec.dim() });
    }
    let e = q.effective_epsilon();
    let (seg, exhaustive, work) = match spec.grids() {
        Some(grids) => {
            let mut radii = vec![q.window.radius];
            while radii[radii.len() - 1] / 2.0 >= LADDER_MIN_RADIUS {
                radii.push(radii[radii.len() - 1] / 2.0);
            }
            let mut best: Option<EmptySegment> = None;
            let mut work = 0u64;
            let mut exhaustive = false;
            for &r in radii.iter().rev() {
                let sub = if r == q.window.radius {
                    q.clone()
                } else {
                    SegmentQuery::standard(q.epsilon, Window { center: q.window.center.clone(), radius: r })
                };
                let fam = Family::new(&sub.window, sub.direction_count, sub.offset_step);
                let out = grid_search(&grids, &fam, e, budget.saturating_sub(work), best.take());
                work += out.work;
                best = out.best;
                exhaustive = out.exhaustive;
            }
            (best, exhaustive, work)
        }
        None => {
            let fam = Family::new(&q.window, q.direction_count, q.offset_step);
            let big = Window { center: q.window.center.clone(), radius: q.window.radius + q.epsilon };
            let cloud = generate(spec, &big)?;
            let work = (cloud.len() * fam.k) as u64;
            (cloud_scan(&cloud, &fam, &[e]).pop().flatten(), true, work)
        }
    };
    let seg = seg.ok_or_else(|| Error::InvalidInput("window has no chords".into()))?;
    Ok((seg, exhaustive, work))
}

pub fn visibility_curve(spec: &ForestSpec, epsilons: &[f64], w: &Window) -> Result<VisibilityReport> {
    visibility_curve_with(spec, epsilons, w, DEFAULT_WORK_BUDGET)
}

/// Visibility curve with one standard line family per epsilon.
pub fn visibility_curve_with(spec: &ForestSpec, epsilons: &[f64], w: &Window, budget: u64) -> Result<VisibilityReport> {
    if epsilons.len() < 2 {
        return Err(Error::InvalidInput("need at least two epsilon values".into()));
    }
    if epsilons.windows(2).any(|p| !(p[0] > p[1])) || !(epsilons[epsilons.len() - 1] > 0.0) {
        return Err(Error::InvalidInput("epsilons must be positive and decreasing".into()));
    }
    if w.dim() != 2 {
        return Err(Error::DimensionMismatch { expected: 2, got: w.dim() });
    }
    let mut records: Vec<VisibilityRecord> = Vec::with_capacity(epsilons.len());
    for &eps in epsilons {
        let q = SegmentQuery::standard(eps, w.clone());
        let (seg, exhaustive, work) = max_empty_segment_for(spec, &q, budget)?;
        let family_length = seg.length;
        let (witness, carried) = match records.last() {
            Some(prev) if prev.witness.length > seg.length => (prev.witness.clone(), true),
            _ => (seg, false),
        };
        records.push(VisibilityRecord {
            epsilon: eps,
            effective_epsilon: q.effective_epsilon(),
            direction_count: q.direction_count,
            offset_step: q.offset_step,
            family_length,
            max_empty_length: witness.length,
            witness,
            carried,
            exhaustive,
            work,
        });
    }
    let lens: Vec<f64> = records.iter().map(|r| r.max_empty_length).collect();
    let not_a_forest = records.iter().all(|r| r.witness.spans_chord());
    // epsilons decrease, so lengths must not decrease
    let monotone = records.windows(2).all(|p| p[1].family_length >= p[0].family_length);
    let slope = if not_a_forest { None } else { loglog_slope(epsilons, &lens) };
    Ok(VisibilityReport { window: w.clone(), records, slope, not_a_forest, monotone })
}

/// Smallest distance from any cloud point to the closed segment `[a, b]`.
pub fn segment_clearance(p: &PointCloud, a: [f64; 2], b: [f64; 2]) -> f64 {
    let d = [b[0] - a[0], b[1] - a[1]];
    let l2 = d[0] * d[0] + d[1] * d[1];
    p.iter()
        .map(|q| {
            let t = if l2 > 0.0 { (((q[0] - a[0]) * d[0] + (q[1] - a[1]) * d[1]) / l2).clamp(0.0, 1.0) } else { 0.0 };
            ((q[0] - a[0] - t * d[0]).powi(2) + (q[1] - a[1] - t * d[1]).powi(2)).sqrt()
        })
        .fold(f64::INFINITY, f64::min)
}

/// An arc of coset values `q_phys . x mod 1` that no point attains.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EmptySlabCertificate {
    pub q: Vec<i64>,
    /// Gap as `(start, width)` on `R / Z`.
    pub gap: (f64, f64),
    /// Clearance `width / (2 |q_phys|)` in physical coordinates.
    pub epsilon: f64,
    /// `(q . phys_j)_j`, the functional in physical coordinates.
    pub q_phys: Vec<f64>,
    pub checked_window: Window,
    pub seed: u64,
}

/// Default norm bound on the certificate search.
pub const SLAB_NORM_BOUND: f64 = 1000.0;

/// Primitive integer vectors within distance `delta` of the line `R l`,
/// `0 < |q| <= bound`, one per sign pair, sorted by norm.
fn cylinder_vectors(l: &DVector<f64>, delta: f64, bound: f64) -> Vec<Vec<i64>> {
    let nn = l.len();
    let lead = (0..nn).max_by(|&a, &b| l[a].abs().partial_cmp(&l[b].abs()).unwrap()).unwrap_or(0);
    let mut out: Vec<(f64, Vec<i64>)> = Vec::new();
    let steps = (bound * l[lead].abs() + delta).ceil() as i64;
    let r = delta.ceil() as i64 + 1;
    for t in 0..=steps {
        let lam = t as f64 / l[lead];
        let center: Vec<f64> = (0..nn).map(|i| lam * l[i]).collect();
        let others: Vec<usize> = (0..nn).filter(|&i| i != lead).collect();
        let mut q = vec![0i64; nn];
        q[lead] = t;
        let side = (2 * r + 1) as usize;
        for idx in 0..side.pow(others.len() as u32) {
            let mut rest = idx;
            for &i in &others {
                q[i] = center[i].round() as i64 + (rest % side) as i64 - r;
                rest /= side;
            }
            if q.iter().all(|&x| x == 0) {
                continue;
            }
            let first = q.iter().find(|&&x| x != 0).copied().unwrap_or(0);
            if t == 0 && first < 0 {
                continue;
            }
            let qv = DVector::from_iterator(nn, q.iter().map(|&x| x as f64));
            let along = qv.dot(l);
            let dist = (qv.norm_squared() - along * along).max(0.0).sqrt();
            let norm = qv.norm();
            if dist < delta && norm <= bound && q.iter().fold(0i64, |g, &x| num_integer::gcd(g, x)) == 1 {
                out.push((norm, q.clone()));
            }
        }
    }
    out.sort_by(|a, b| a.0.partial_cmp(&b.0).unwrap().then(a.1.cmp(&b.1)));
    out.dedup_by(|a, b| a.1 == b.1);
    out.into_iter().map(|(_, q)| q).collect()
}

/// Arc of `q . (phys a)` values and its complement for one `q`.
fn slab_gap(spec: &CutProjectSpec, q: &[i64]) -> Option<(f64, f64)> {
    let qf: Vec<f64> = q.iter().map(|&x| x as f64).collect();
    let dot = |v: &[f64]| v.iter().zip(&qf).map(|(a, b)| a * b).sum::<f64>();
    let len: f64 = spec
        .int_basis
        .iter()
        .zip(spec.window.lo.iter().zip(&spec.window.hi))
        .map(|(col, (lo, hi))| dot(col).abs() * (hi - lo))
        .sum();
    let ic = spec.window.center();
    let mid = dot(&spec.lattice_shift) - spec.int_basis.iter().zip(&ic).map(|(col, c)| dot(col) * c).sum::<f64>();
    let gaps = uncovered(&[(mid - len / 2.0, len)], 1e-12);
    gaps.first().copied()
}

/// Search primitive `q` near a random line orthogonal to the internal
/// space, by increasing norm, for one whose internal image leaves a gap.
pub fn empty_slab_certificate(spec: &CutProjectSpec, w: &Window) -> Result<EmptySlabCertificate> {
    empty_slab_certificate_with(spec, w, SLAB_NORM_BOUND, 0)
}

pub fn empty_slab_certificate_with(spec: &CutProjectSpec, w: &Window, bound: f64, seed: u64) -> Result<EmptySlabCertificate> {
    spec.validate()?;
    if w.dim() != spec.n {
        return Err(Error::DimensionMismatch { expected: spec.n, got: w.dim() });
    }
    let k = spec.big_n - spec.n;
    let t = spec.window.circumradius();
    let delta = if t > 0.0 { 1.0 / (2.0 * (k as f64).sqrt() * t) } else { 1.0 };
    let delta = delta.clamp(0.5, 8.0);
    let perp = orthonormal_complement(&spec.int_matrix());
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    for _ in 0..8 {
        let coeffs: Vec<f64> = (0..perp.ncols()).map(|_| rng.random_range(-1.0..1.0)).collect();
        let mut l = DVector::<f64>::zeros(spec.big_n);
        for (j, c) in coeffs.iter().enumerate() {
            l += perp.column(j) * *c;
        }
        if l.norm() < 1e-9 {
            continue;
        }
        let l = l.normalize();
        for q in cylinder_vectors(&l, delta, bound) {
            if let Some((start, width)) = slab_gap(spec, &q) {
                let q_phys: Vec<f64> = spec
                    .phys_basis
                    .iter()
                    .map(|col| col.iter().zip(&q).map(|(a, &b)| a * b as f64).sum())
                    .collect();
                let qn = q_phys.iter().map(|x| x * x).sum::<f64>().sqrt();
                if qn < 1e-12 {
                    continue;
                }
                return Ok(EmptySlabCertificate {
                    q,
                    gap: (frac(start), width),
                    epsilon: width / (2.0 * qn),
                    q_phys,
                    checked_window: w.clone(),
                    seed,
                });
            }
        }
    }
    Err(Error::CertificateSearchExhausted { bound })
}

/// Every point's coset value avoids the gap shrunk by `1e-9`.
pub fn verify_slab(cert: &EmptySlabCertificate, p: &PointCloud) -> Result<bool> {
    if p.is_empty() {
        return Ok(true);
    }
    if p.dim != cert.q_phys.len() {
        return Err(Error::DimensionMismatch { expected: cert.q_phys.len(), got: p.dim });
    }
    let (start, width) = cert.gap;
    Ok(p.coords.par_chunks(p.dim).all(|x| {
        let v: f64 = x.iter().zip(&cert.q_phys).map(|(a, b)| a * b).sum();
        !in_open_arc(v, start, width, 1e-9)
    }))
}
