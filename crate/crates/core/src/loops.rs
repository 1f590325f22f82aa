//! Decomposition of a closed, quantized current into weighted closed curves.

use crate::error::{Error, Result};
use crate::geometry::{boundary, cluster_points, PolyCurve, SegmentCurrent};
use crate::point::Point;

/// Relative tolerance for recognizing weights as integer multiples of the
/// quantum.
pub const QUANTUM_REL_TOL: f64 = 1e-6;

/// Smallest absolute weight, provided every weight is an integer multiple of
/// it (within `QUANTUM_REL_TOL`).
pub fn detect_quantum(mu: &SegmentCurrent) -> Result<f64> {
    let q = mu.segments().iter().map(|s| s.weight.abs()).fold(f64::INFINITY, f64::min);
    if !q.is_finite() {
        return Err(Error::InvalidInput("empty current has no weight quantum".into()));
    }
    for s in mu.segments() {
        units(s.weight.abs(), q)?;
    }
    Ok(q)
}

fn units(w: f64, q: f64) -> Result<usize> {
    let k = (w / q).round();
    if k < 1.0 || ((w - k * q) / w).abs() > QUANTUM_REL_TOL {
        return Err(Error::NonCommensurable { weight: w, quantum: q });
    }
    Ok(k as usize)
}

/// Splits a boundary-free current into closed polygons of weight `quantum`
/// (detected from the weights when `None`).
///
/// Each segment of weight `k·quantum` becomes `k` unit edges of a directed
/// multigraph (negative weights reverse the edge). Cycles are peeled off by
/// walking from the lexicographically smallest vertex with unused edges,
/// always taking the unused outgoing edge whose head is lexicographically
/// smallest, and cutting a loop whenever the walk revisits a vertex of the
/// current path. Every returned curve is therefore simple as a vertex cycle.
pub fn loop_decompose(mu: &SegmentCurrent, tol: f64, quantum: Option<f64>) -> Result<Vec<PolyCurve>> {
    if mu.is_empty() {
        return Ok(Vec::new());
    }
    let chain = boundary(mu, tol);
    if !chain.is_empty() {
        return Err(Error::NonzeroBoundary { atoms: chain.atoms });
    }
    let q = match quantum {
        Some(q) if q > 0.0 && q.is_finite() => q,
        Some(q) => return Err(Error::InvalidInput(format!("quantum must be positive, got {q}"))),
        None => detect_quantum(mu)?,
    };

    let mut pts = Vec::with_capacity(2 * mu.len());
    for s in mu.segments() {
        pts.push(s.start);
        pts.push(s.end);
    }
    let (ids, nnodes) = cluster_points(&pts, tol.max(0.0));
    let mut coords = vec![Point::ZERO; nnodes];
    let mut have = vec![false; nnodes];
    for (i, &id) in ids.iter().enumerate() {
        if !have[id] || pts[i].lex_cmp(&coords[id]).is_lt() {
            coords[id] = pts[i];
            have[id] = true;
        }
    }

    // outgoing edge lists: (head, remaining multiplicity)
    let mut out: Vec<Vec<(usize, usize)>> = vec![Vec::new(); nnodes];
    for (k, s) in mu.segments().iter().enumerate() {
        let (mut a, mut b) = (ids[2 * k], ids[2 * k + 1]);
        if s.weight < 0.0 {
            std::mem::swap(&mut a, &mut b);
        }
        if a == b {
            continue;
        }
        out[a].push((b, units(s.weight.abs(), q)?));
    }
    // node ids are already in lexicographic order of their coordinates
    for list in &mut out {
        list.sort_by_key(|e| e.0);
    }
    let mut cursor = vec![0usize; nnodes];
    let mut next_edge = |u: usize, out: &mut Vec<Vec<(usize, usize)>>| -> Option<usize> {
        let list = &mut out[u];
        while cursor[u] < list.len() {
            let e = &mut list[cursor[u]];
            if e.1 > 0 {
                e.1 -= 1;
                return Some(e.0);
            }
            cursor[u] += 1;
        }
        None
    };

    let mut curves = Vec::new();
    let mut on_path = vec![usize::MAX; nnodes];
    for start in 0..nnodes {
        let mut path = vec![start];
        on_path[start] = 0;
        loop {
            let u = *path.last().unwrap();
            let Some(v) = next_edge(u, &mut out) else {
                if path.len() == 1 {
                    break;
                }
                // unreachable for balanced graphs
                return Err(Error::NonzeroBoundary { atoms: vec![(coords[u], 0.0)] });
            };
            if on_path[v] != usize::MAX {
                let k = on_path[v];
                let verts: Vec<Point> = path[k..].iter().map(|&i| coords[i]).collect();
                for &i in &path[k + 1..] {
                    on_path[i] = usize::MAX;
                }
                path.truncate(k + 1);
                curves.push(PolyCurve::new(mu.dim(), verts, true, q)?);
            } else {
                on_path[v] = path.len();
                path.push(v);
            }
        }
        on_path[start] = usize::MAX;
    }
    Ok(curves)
}
