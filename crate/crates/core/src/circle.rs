//! Arc unions on the circle `R / Z`.

/// Uncovered arcs `(start, width)` of the union of arcs `(start, length)`,
/// with `start` in `[0, 1)`. Arcs closer than `tol` are merged and gaps no
/// wider than `tol` are dropped.
pub fn uncovered(arcs: &[(f64, f64)], tol: f64) -> Vec<(f64, f64)> {
    if arcs.iter().any(|&(_, l)| l.abs() >= 1.0 - tol) {
        return Vec::new();
    }
    let mut pieces: Vec<(f64, f64)> = Vec::with_capacity(arcs.len() * 2);
    for &(s, l) in arcs {
        let (s, l) = if l < 0.0 { (s + l, -l) } else { (s, l) };
        let s = s - s.floor();
        let e = s + l;
        if e > 1.0 {
            pieces.push((s, 1.0));
            pieces.push((0.0, e - 1.0));
        } else {
            pieces.push((s, e));
        }
    }
    if pieces.is_empty() {
        return vec![(0.0, 1.0)];
    }
    pieces.sort_by(|a, b| a.partial_cmp(b).unwrap());
    let mut gaps = Vec::new();
    let mut reach = pieces[0].1;
    let first = pieces[0].0;
    for &(s, e) in &pieces[1..] {
        if s > reach + tol {
            gaps.push((reach, s - reach));
        }
        reach = reach.max(e);
    }
    // wrap-around gap between the last reach and the first start
    let wrap = first + 1.0 - reach;
    if wrap > tol {
        let start = if reach >= 1.0 { reach - 1.0 } else { reach };
        gaps.push((start, wrap));
    }
    gaps
}

/// Whether `t` (mod 1) lies strictly inside the arc `(start, width)` shrunk
/// by `shrink` at both ends.
pub fn in_open_arc(t: f64, start: f64, width: f64, shrink: f64) -> bool {
    let w = width - 2.0 * shrink;
    if w <= 0.0 {
        return false;
    }
    let x = t - start - shrink;
    let x = x - x.floor();
    x > 0.0 && x < w
}
