//! Oriented polygonal curves, discrete 1-currents and their boundary.

use std::collections::HashMap;
use std::f64::consts::PI;

use crate::error::{Error, Result};
use crate::point::{check_dim, Point};

/// A weighted oriented segment.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct OrientedSegment {
    pub start: Point,
    pub end: Point,
    pub weight: f64,
}

impl OrientedSegment {
    pub fn new(start: Point, end: Point, weight: f64) -> Result<Self> {
        if !start.is_finite() || !end.is_finite() || !weight.is_finite() {
            return Err(Error::InvalidInput("non-finite segment data".into()));
        }
        if start == end {
            return Err(Error::DegenerateEdge { index: 0, next: 1 });
        }
        Ok(Self { start, end, weight })
    }

    #[inline]
    pub fn vector(&self) -> Point {
        self.end - self.start
    }

    #[inline]
    pub fn length(&self) -> f64 {
        self.vector().norm()
    }

    /// Unit tangent `(end - start) / length`.
    #[inline]
    pub fn tangent(&self) -> Point {
        let v = self.vector();
        v * (1.0 / v.norm())
    }

    #[inline]
    pub fn midpoint(&self) -> Point {
        (self.start + self.end) * 0.5
    }

    pub fn at(&self, t: f64) -> Point {
        self.start + self.vector() * t
    }

    pub fn reversed(&self) -> Self {
        Self { start: self.end, end: self.start, weight: self.weight }
    }
}

/// Oriented piecewise-linear curve. For closed curves the closing edge from
/// the last vertex back to the first is implicit.
#[derive(Debug, Clone, PartialEq)]
pub struct PolyCurve {
    dim: usize,
    vertices: Vec<Point>,
    closed: bool,
    weight: f64,
}

impl PolyCurve {
    pub fn new(dim: usize, vertices: Vec<Point>, closed: bool, weight: f64) -> Result<Self> {
        check_dim(dim)?;
        if vertices.len() < 2 {
            return Err(Error::InvalidInput(format!("a curve needs at least 2 vertices, got {}", vertices.len())));
        }
        if !(weight > 0.0 && weight.is_finite()) {
            return Err(Error::InvalidInput(format!("curve weight must be positive, got {weight}")));
        }
        for v in &vertices {
            if !v.is_finite() {
                return Err(Error::InvalidInput("non-finite vertex".into()));
            }
            if dim == 2 && v.0[2] != 0.0 {
                return Err(Error::DimensionMismatch { expected: 2, found: 3 });
            }
        }
        let n = vertices.len();
        let edges = if closed { n } else { n - 1 };
        for i in 0..edges {
            let j = (i + 1) % n;
            if vertices[i] == vertices[j] {
                return Err(Error::DegenerateEdge { index: i, next: j });
            }
        }
        Ok(Self { dim, vertices, closed, weight })
    }

    /// Planar curve from `(x, y)` pairs.
    pub fn planar(xy: &[(f64, f64)], closed: bool) -> Result<Self> {
        Self::new(2, xy.iter().map(|&(x, y)| Point::new2(x, y)).collect(), closed, 1.0)
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn vertices(&self) -> &[Point] {
        &self.vertices
    }

    pub fn is_closed(&self) -> bool {
        self.closed
    }

    pub fn weight(&self) -> f64 {
        self.weight
    }

    pub fn with_weight(mut self, weight: f64) -> Result<Self> {
        if !(weight > 0.0 && weight.is_finite()) {
            return Err(Error::InvalidInput(format!("curve weight must be positive, got {weight}")));
        }
        self.weight = weight;
        Ok(self)
    }

    pub fn num_edges(&self) -> usize {
        if self.closed {
            self.vertices.len()
        } else {
            self.vertices.len() - 1
        }
    }

    /// Edge `i` as `(start, end)`.
    pub fn edge(&self, i: usize) -> (Point, Point) {
        let n = self.vertices.len();
        (self.vertices[i], self.vertices[(i + 1) % n])
    }

    pub fn edges(&self) -> impl Iterator<Item = (Point, Point)> + '_ {
        (0..self.num_edges()).map(|i| self.edge(i))
    }

    pub fn chordal_length(&self) -> f64 {
        self.edges().map(|(a, b)| a.dist(&b)).sum()
    }

    pub fn reversed(&self) -> Self {
        let mut v = self.vertices.clone();
        v.reverse();
        if self.closed {
            // keep the same starting vertex
            v.rotate_right(1);
        }
        Self { vertices: v, ..self.clone() }
    }

    /// Signed (shoelace) area of a closed planar curve; positive when
    /// counterclockwise.
    pub fn signed_area(&self) -> f64 {
        let n = self.vertices.len();
        let mut acc = crate::quadrature::NeumaierSum::new();
        for i in 0..n {
            let a = self.vertices[i];
            let b = self.vertices[(i + 1) % n];
            acc.add(0.5 * (a[0] * b[1] - b[0] * a[1]));
        }
        acc.value()
    }

    /// Unit tangent at vertex `i`: normalized average of the adjacent edge
    /// tangents, or the single edge tangent at an open endpoint.
    pub fn vertex_tangent(&self, i: usize) -> Point {
        let n = self.vertices.len();
        let t_out =
            if self.closed || i + 1 < n { (self.vertices[(i + 1) % n] - self.vertices[i]).normalized() } else { None };
        let t_in =
            if self.closed || i > 0 { (self.vertices[i] - self.vertices[(i + n - 1) % n]).normalized() } else { None };
        match (t_in, t_out) {
            (Some(a), Some(b)) => (a + b).normalized().unwrap_or(b),
            (Some(a), None) => a,
            (None, Some(b)) => b,
            (None, None) => unreachable!("validated curves have at least one edge"),
        }
    }

    /// Applies `p -> scale * p + shift` to every vertex.
    pub fn transformed(&self, scale: f64, shift: Point) -> Self {
        let vertices = self.vertices.iter().map(|&p| p * scale + shift).collect();
        Self { vertices, ..self.clone() }
    }

    /// Applies `f` to every vertex and revalidates.
    pub fn mapped(&self, f: impl Fn(Point) -> Point) -> Result<Self> {
        Self::new(self.dim, self.vertices.iter().map(|&p| f(p)).collect(), self.closed, self.weight)
    }

    /// Resamples to `n` vertices equally spaced in arc length along the
    /// polygon, keeping the first vertex (and the last one for open curves).
    pub fn resample_arclength(&self, n: usize) -> Result<Self> {
        let min = if self.closed { 3 } else { 2 };
        if n < min {
            return Err(Error::InvalidInput(format!("resampling needs at least {min} vertices")));
        }
        let lens: Vec<f64> = self.edges().map(|(a, b)| a.dist(&b)).collect();
        let total: f64 = lens.iter().sum();
        let steps = if self.closed { n } else { n - 1 };
        let mut out = Vec::with_capacity(n);
        let mut edge = 0;
        let mut acc = 0.0;
        for k in 0..n {
            if !self.closed && k == n - 1 {
                out.push(*self.vertices.last().unwrap());
                break;
            }
            let target = total * k as f64 / steps as f64;
            while edge + 1 < lens.len() && acc + lens[edge] < target {
                acc += lens[edge];
                edge += 1;
            }
            let (a, b) = self.edge(edge);
            let t = ((target - acc) / lens[edge]).clamp(0.0, 1.0);
            out.push(a + (b - a) * t);
        }
        Self::new(self.dim, out, self.closed, self.weight)
    }
}

/// Weighted family of oriented segments in R^dim: a discrete 1-current.
#[derive(Debug, Clone, PartialEq)]
pub struct SegmentCurrent {
    dim: usize,
    segments: Vec<OrientedSegment>,
}

impl SegmentCurrent {
    /// Builds a current, dropping zero-weight segments.
    pub fn new(dim: usize, segments: Vec<OrientedSegment>) -> Result<Self> {
        check_dim(dim)?;
        let mut kept = Vec::with_capacity(segments.len());
        for (i, s) in segments.into_iter().enumerate() {
            if s.start == s.end {
                return Err(Error::DegenerateEdge { index: i, next: i });
            }
            if !s.start.is_finite() || !s.end.is_finite() || !s.weight.is_finite() {
                return Err(Error::InvalidInput(format!("segment {i} is not finite")));
            }
            if dim == 2 && (s.start.0[2] != 0.0 || s.end.0[2] != 0.0) {
                return Err(Error::DimensionMismatch { expected: 2, found: 3 });
            }
            if s.weight != 0.0 {
                kept.push(s);
            }
        }
        Ok(Self { dim, segments: kept })
    }

    pub fn empty(dim: usize) -> Self {
        Self { dim, segments: Vec::new() }
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn segments(&self) -> &[OrientedSegment] {
        &self.segments
    }

    pub fn len(&self) -> usize {
        self.segments.len()
    }

    pub fn is_empty(&self) -> bool {
        self.segments.is_empty()
    }

    /// Total variation `sum |w| L`.
    pub fn mass(&self) -> f64 {
        crate::quadrature::compensated_sum(self.segments.iter().map(|s| s.weight.abs() * s.length()))
    }

    /// Vector mass `sum w L tau`, which vanishes for closed currents.
    pub fn vector_mass(&self) -> Point {
        self.segments.iter().fold(Point::ZERO, |acc, s| acc + s.vector() * s.weight)
    }

    pub fn reversed(&self) -> Self {
        Self { dim: self.dim, segments: self.segments.iter().map(|s| s.reversed()).collect() }
    }

    /// Multiplies every weight by `k` (drops everything when `k == 0`).
    pub fn scaled_weights(&self, k: f64) -> Self {
        if k == 0.0 {
            return Self::empty(self.dim);
        }
        let segments = self.segments.iter().map(|s| OrientedSegment { weight: s.weight * k, ..*s }).collect();
        Self { dim: self.dim, segments }
    }

    /// Formal sum: the concatenated segment lists.
    pub fn union(&self, other: &SegmentCurrent) -> Result<Self> {
        if self.dim != other.dim {
            return Err(Error::DimensionMismatch { expected: self.dim, found: other.dim });
        }
        let mut segments = self.segments.clone();
        segments.extend_from_slice(&other.segments);
        Ok(Self { dim: self.dim, segments })
    }

    /// Axis-aligned bounding box `(min, max)`; `None` for the empty current.
    pub fn bbox(&self) -> Option<(Point, Point)> {
        let first = self.segments.first()?.start;
        let (mut lo, mut hi) = (first, first);
        for s in &self.segments {
            for p in [s.start, s.end] {
                for k in 0..3 {
                    lo.0[k] = lo.0[k].min(p.0[k]);
                    hi.0[k] = hi.0[k].max(p.0[k]);
                }
            }
        }
        Some((lo, hi))
    }

    pub fn bbox_diameter(&self) -> f64 {
        self.bbox().map_or(0.0, |(lo, hi)| lo.dist(&hi))
    }
}

impl From<&PolyCurve> for SegmentCurrent {
    fn from(c: &PolyCurve) -> Self {
        curve_to_current(c)
    }
}

/// One segment per edge of `c`, each carrying the curve weight.
pub fn curve_to_current(c: &PolyCurve) -> SegmentCurrent {
    let segments = c.edges().map(|(a, b)| OrientedSegment { start: a, end: b, weight: c.weight }).collect();
    SegmentCurrent { dim: c.dim, segments }
}

/// Union of the currents of several curves (all of dimension `dim`).
pub fn curves_to_current(dim: usize, curves: &[PolyCurve]) -> Result<SegmentCurrent> {
    check_dim(dim)?;
    let mut segments = Vec::new();
    for c in curves {
        if c.dim != dim {
            return Err(Error::DimensionMismatch { expected: dim, found: c.dim });
        }
        segments.extend(curve_to_current(c).segments);
    }
    Ok(SegmentCurrent { dim, segments })
}

/// `p -> scale * p + shift` applied to every segment; weights unchanged.
pub fn transform(mu: &SegmentCurrent, scale: f64, shift: Point) -> Result<SegmentCurrent> {
    if !(scale > 0.0 && scale.is_finite()) {
        return Err(Error::InvalidInput(format!("scale must be positive, got {scale}")));
    }
    if mu.dim == 2 && shift.0[2] != 0.0 {
        return Err(Error::DimensionMismatch { expected: 2, found: 3 });
    }
    let segments = mu
        .segments
        .iter()
        .map(|s| OrientedSegment { start: s.start * scale + shift, end: s.end * scale + shift, weight: s.weight })
        .collect();
    Ok(SegmentCurrent { dim: mu.dim, segments })
}

/// Boundary 0-current: signed point charges.
#[derive(Debug, Clone, PartialEq)]
pub struct BoundaryChain {
    pub atoms: Vec<(Point, f64)>,
    pub tol: f64,
}

impl BoundaryChain {
    pub fn is_empty(&self) -> bool {
        self.atoms.is_empty()
    }

    pub fn total_charge(&self) -> f64 {
        crate::quadrature::compensated_sum(self.atoms.iter().map(|a| a.1))
    }
}

/// Default merge tolerance: `1e-9` times the bounding-box diameter.
pub fn default_merge_tol(mu: &SegmentCurrent) -> f64 {
    1e-9 * mu.bbox_diameter()
}

/// Groups points closer than `tol` (transitively). Returns a cluster id per
/// point; ids are numbered in lexicographic order of the clusters' smallest
/// members, and `tol == 0` merges only bitwise-equal points.
pub(crate) fn cluster_points(points: &[Point], tol: f64) -> (Vec<usize>, usize) {
    let n = points.len();
    let mut parent: Vec<usize> = (0..n).collect();
    fn find(parent: &mut [usize], mut i: usize) -> usize {
        while parent[i] != i {
            parent[i] = parent[parent[i]];
            i = parent[i];
        }
        i
    }
    fn union(parent: &mut [usize], a: usize, b: usize) {
        let (ra, rb) = (find(parent, a), find(parent, b));
        if ra != rb {
            let (lo, hi) = if ra < rb { (ra, rb) } else { (rb, ra) };
            parent[hi] = lo;
        }
    }
    if tol > 0.0 {
        let mut grid: HashMap<[i64; 3], Vec<usize>> = HashMap::new();
        let cell = |p: &Point| p.0.map(|c| (c / tol).floor() as i64);
        for (i, p) in points.iter().enumerate() {
            let c = cell(p);
            for dx in -1..=1 {
                for dy in -1..=1 {
                    for dz in -1..=1 {
                        if let Some(list) = grid.get(&[c[0] + dx, c[1] + dy, c[2] + dz]) {
                            for &j in list {
                                if points[j].dist(p) <= tol {
                                    union(&mut parent, i, j);
                                }
                            }
                        }
                    }
                }
            }
            grid.entry(c).or_default().push(i);
        }
    } else {
        let mut seen: HashMap<[u64; 3], usize> = HashMap::new();
        for (i, p) in points.iter().enumerate() {
            match seen.get(&p.bits()) {
                Some(&j) => union(&mut parent, i, j),
                None => {
                    seen.insert(p.bits(), i);
                }
            }
        }
    }
    // representative = lexicographically smallest member
    let mut rep: HashMap<usize, usize> = HashMap::new();
    for i in 0..n {
        let r = find(&mut parent, i);
        let e = rep.entry(r).or_insert(i);
        if points[i].lex_cmp(&points[*e]).is_lt() {
            *e = i;
        }
    }
    let mut roots: Vec<(usize, usize)> = rep.into_iter().collect();
    roots.sort_by(|a, b| points[a.1].lex_cmp(&points[b.1]).then(a.1.cmp(&b.1)));
    let id_of: HashMap<usize, usize> = roots.iter().enumerate().map(|(k, &(r, _))| (r, k)).collect();
    let ids = (0..n).map(|i| id_of[&find(&mut parent, i)]).collect();
    (ids, roots.len())
}

/// Boundary of `mu`: `+w` at each segment end, `-w` at each start; points
/// within `tol` are merged and vanishing charges dropped. Atoms are sorted
/// lexicographically.
pub fn boundary(mu: &SegmentCurrent, tol: f64) -> BoundaryChain {
    let mut pts = Vec::with_capacity(2 * mu.len());
    let mut charges = Vec::with_capacity(2 * mu.len());
    let mut wmax: f64 = 0.0;
    for s in &mu.segments {
        pts.push(s.end);
        charges.push(s.weight);
        pts.push(s.start);
        charges.push(-s.weight);
        wmax = wmax.max(s.weight.abs());
    }
    let (ids, k) = cluster_points(&pts, tol.max(0.0));
    let mut sums = vec![crate::quadrature::NeumaierSum::new(); k];
    let mut reps: Vec<Option<Point>> = vec![None; k];
    for (i, &id) in ids.iter().enumerate() {
        sums[id].add(charges[i]);
        match reps[id] {
            Some(r) if r.lex_cmp(&pts[i]).is_le() => {}
            _ => reps[id] = Some(pts[i]),
        }
    }
    let zero = 1e-12 * wmax;
    let atoms = sums
        .iter()
        .zip(reps)
        .filter_map(|(s, r)| {
            let q = s.value();
            (q.abs() > zero).then(|| (r.unwrap(), q))
        })
        .collect();
    BoundaryChain { atoms, tol }
}

/// Parameters of the smooth curve samplers.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum CurveKind {
    /// Circle of the given radius centered at the origin, counterclockwise,
    /// starting at `(r, 0)`.
    Circle { radius: f64 },
    /// Axis-aligned ellipse with semi-axes `a` (x) and `b` (y).
    Ellipse { a: f64, b: f64 },
    /// Helix of radius `radius` rising `pitch` per turn, in R^3.
    Helix { radius: f64, pitch: f64, turns: f64 },
    /// Straight segment from the origin along `e_1`.
    Segment { length: f64 },
}

/// Samples a smooth curve at `n` equally spaced parameter values.
pub fn sample_smooth_curve(kind: CurveKind, n: usize) -> Result<PolyCurve> {
    let positive = |name: &str, v: f64| {
        if v > 0.0 && v.is_finite() {
            Ok(())
        } else {
            Err(Error::InvalidInput(format!("{name} must be positive, got {v}")))
        }
    };
    match kind {
        CurveKind::Circle { radius } => {
            positive("radius", radius)?;
            closed_samples(n)?;
            let v = (0..n)
                .map(|k| {
                    let t = 2.0 * PI * k as f64 / n as f64;
                    Point::new2(radius * t.cos(), radius * t.sin())
                })
                .collect();
            PolyCurve::new(2, v, true, 1.0)
        }
        CurveKind::Ellipse { a, b } => {
            positive("a", a)?;
            positive("b", b)?;
            closed_samples(n)?;
            let v = (0..n)
                .map(|k| {
                    let t = 2.0 * PI * k as f64 / n as f64;
                    Point::new2(a * t.cos(), b * t.sin())
                })
                .collect();
            PolyCurve::new(2, v, true, 1.0)
        }
        CurveKind::Helix { radius, pitch, turns } => {
            positive("radius", radius)?;
            positive("pitch", pitch)?;
            positive("turns", turns)?;
            if n < 2 {
                return Err(Error::InvalidInput("a helix needs at least 2 samples".into()));
            }
            let v = (0..n)
                .map(|k| {
                    let u = turns * k as f64 / (n - 1) as f64;
                    let t = 2.0 * PI * u;
                    Point::new3(radius * t.cos(), radius * t.sin(), pitch * u)
                })
                .collect();
            PolyCurve::new(3, v, false, 1.0)
        }
        CurveKind::Segment { length } => {
            positive("length", length)?;
            if n < 2 {
                return Err(Error::InvalidInput("a segment needs at least 2 samples".into()));
            }
            let v = (0..n).map(|k| Point::new2(length * k as f64 / (n - 1) as f64, 0.0)).collect();
            PolyCurve::new(2, v, false, 1.0)
        }
    }
}

fn closed_samples(n: usize) -> Result<()> {
    if n < 3 {
        Err(Error::InvalidInput(format!("closed curves need n >= 3, got {n}")))
    } else {
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn square() -> PolyCurve {
        PolyCurve::planar(&[(0.0, 0.0), (1.0, 0.0), (1.0, 1.0), (0.0, 1.0)], true).unwrap()
    }

    #[test]
    fn square_has_four_unit_segments() {
        let mu = curve_to_current(&square());
        assert_eq!(mu.len(), 4);
        assert!(mu.segments().iter().all(|s| s.weight == 1.0 && s.length() == 1.0));
        assert!(boundary(&mu, 0.0).is_empty());
    }

    #[test]
    fn open_curve_carries_weight() {
        let c = PolyCurve::new(2, vec![Point::new2(0.0, 0.0), Point::new2(1.0, 0.0)], false, 2.0).unwrap();
        let mu = curve_to_current(&c);
        assert_eq!(mu.len(), 1);
        assert_eq!(mu.segments()[0].weight, 2.0);
    }

    #[test]
    fn triangle_with_half_weight_is_closed() {
        let c = PolyCurve::planar(&[(0.0, 0.0), (1.0, 0.0), (0.3, 0.8)], true).unwrap().with_weight(0.5).unwrap();
        let mu = curve_to_current(&c);
        assert_eq!(mu.len(), 3);
        assert!(mu.segments().iter().all(|s| s.weight == 0.5));
        assert!(boundary(&mu, default_merge_tol(&mu)).is_empty());
    }

    #[test]
    fn degenerate_edges_are_rejected_with_index() {
        let err = PolyCurve::planar(&[(0.0, 0.0), (1.0, 0.0), (1.0, 0.0)], false).unwrap_err();
        assert_eq!(err, Error::DegenerateEdge { index: 1, next: 2 });
        let err = PolyCurve::planar(&[(0.0, 0.0), (1.0, 0.0), (0.0, 0.0)], true).unwrap_err();
        assert_eq!(err, Error::DegenerateEdge { index: 2, next: 0 });
    }

    #[test]
    fn boundary_of_segment_chain_telescopes() {
        let (a, b, c) = (Point::new2(0.0, 0.0), Point::new2(1.0, 0.0), Point::new2(1.0, 2.0));
        let single = SegmentCurrent::new(2, vec![OrientedSegment::new(a, b, 1.0).unwrap()]).unwrap();
        let ch = boundary(&single, 0.0);
        assert_eq!(ch.atoms, vec![(a, -1.0), (b, 1.0)]);
        let chain = SegmentCurrent::new(
            2,
            vec![OrientedSegment::new(a, b, 1.0).unwrap(), OrientedSegment::new(b, c, 1.0).unwrap()],
        )
        .unwrap();
        assert_eq!(boundary(&chain, 0.0).atoms, vec![(a, -1.0), (c, 1.0)]);
    }

    #[test]
    fn boundary_merges_within_tolerance() {
        let (a, b) = (Point::new2(0.0, 0.0), Point::new2(1.0, 0.0));
        let b2 = Point::new2(1.0 + 1e-12, 0.0);
        let mu = SegmentCurrent::new(
            2,
            vec![OrientedSegment::new(a, b, 1.0).unwrap(), OrientedSegment::new(b2, a, 1.0).unwrap()],
        )
        .unwrap();
        assert_eq!(boundary(&mu, 0.0).atoms.len(), 2);
        assert!(boundary(&mu, 1e-9).is_empty());
    }

    #[test]
    fn zero_weight_segments_are_dropped() {
        let s = OrientedSegment { start: Point::new2(0.0, 0.0), end: Point::new2(1.0, 0.0), weight: 0.0 };
        assert!(SegmentCurrent::new(2, vec![s]).unwrap().is_empty());
    }

    #[test]
    fn transform_scales_lengths() {
        let mu = curve_to_current(&sample_smooth_curve(CurveKind::Segment { length: 1.0 }, 2).unwrap());
        let id = transform(&mu, 1.0, Point::ZERO).unwrap();
        assert_eq!(id, mu);
        let big = transform(&mu, 2.0, Point::ZERO).unwrap();
        assert_eq!(big.segments()[0].length(), 2.0);
        assert!(transform(&mu, 0.0, Point::ZERO).is_err());
    }

    #[test]
    fn circle_with_four_samples_is_inscribed_square() {
        let c = sample_smooth_curve(CurveKind::Circle { radius: 1.0 }, 4).unwrap();
        let expect = [(1.0, 0.0), (0.0, 1.0), (-1.0, 0.0), (0.0, -1.0)];
        for (v, e) in c.vertices().iter().zip(expect) {
            assert!((v[0] - e.0).abs() < 1e-15 && (v[1] - e.1).abs() < 1e-15);
        }
        assert!((c.chordal_length() - 4.0 * 2f64.sqrt()).abs() < 1e-14);
    }

    #[test]
    fn fine_circle_length_approaches_two_pi() {
        let c = sample_smooth_curve(CurveKind::Circle { radius: 1.0 }, 10_000).unwrap();
        assert!((c.chordal_length() - 2.0 * PI).abs() < 1e-6);
    }

    #[test]
    fn unit_segment_sample() {
        let c = sample_smooth_curve(CurveKind::Segment { length: 1.0 }, 2).unwrap();
        assert_eq!(c.vertices(), &[Point::new2(0.0, 0.0), Point::new2(1.0, 0.0)]);
        assert!(!c.is_closed());
    }

    #[test]
    fn sampler_rejects_bad_parameters() {
        assert!(sample_smooth_curve(CurveKind::Circle { radius: 1.0 }, 2).is_err());
        assert!(sample_smooth_curve(CurveKind::Ellipse { a: -1.0, b: 1.0 }, 10).is_err());
    }

    #[test]
    fn reversal_keeps_start_vertex_of_closed_curves() {
        let r = square().reversed();
        assert_eq!(r.vertices()[0], Point::new2(0.0, 0.0));
        assert_eq!(r.vertices()[1], Point::new2(0.0, 1.0));
        assert!(r.signed_area() < 0.0);
    }

    #[test]
    fn resampling_preserves_length_of_square() {
        let r = square().resample_arclength(8).unwrap();
        assert_eq!(r.vertices().len(), 8);
        assert!((r.chordal_length() - 4.0).abs() < 1e-12);
    }
}
