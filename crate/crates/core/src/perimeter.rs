//! Fractional perimeter of planar polygonal sets.

use std::f64::consts::PI;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::geometry::{curves_to_current, PolyCurve, SegmentCurrent};
use crate::point::Point;
use crate::quadrature::NeumaierSum;
use crate::riesz::{check_s, fractional_mass, FracParams};
use crate::variation::{check_simple, segment_distance};

/// A bounded planar set: a counterclockwise outer polygon minus clockwise
/// holes.
#[derive(Debug, Clone, PartialEq)]
pub struct PlanarRegion {
    outer: PolyCurve,
    holes: Vec<PolyCurve>,
    area: f64,
}

impl PlanarRegion {
    pub fn new(outer: PolyCurve, holes: Vec<PolyCurve>) -> Result<Self> {
        for c in std::iter::once(&outer).chain(&holes) {
            if c.dim() != 2 {
                return Err(Error::DimensionMismatch { expected: 2, found: c.dim() });
            }
            if !c.is_closed() {
                return Err(Error::InvalidInput("region boundaries must be closed".into()));
            }
        }
        let a_out = outer.signed_area();
        if a_out < 0.0 {
            return Err(Error::InvalidInput("outer boundary must be counterclockwise".into()));
        }
        if a_out == 0.0 {
            if !holes.is_empty() {
                return Err(Error::InvalidInput("degenerate outer boundary with holes".into()));
            }
            return Ok(Self { outer, holes, area: 0.0 });
        }
        check_simple(&outer)?;
        let mut area = a_out;
        for h in &holes {
            let a = h.signed_area();
            if a >= 0.0 {
                return Err(Error::InvalidInput("holes must be clockwise".into()));
            }
            check_simple(h)?;
            area += a;
        }
        let region = Self { outer, holes, area };
        let curves: Vec<&PolyCurve> = region.boundary_curves().collect();
        let tol = 1e-9 * region.diameter();
        for (i, a) in curves.iter().enumerate() {
            for b in &curves[i + 1..] {
                for (p, q) in a.edges() {
                    for (u, v) in b.edges() {
                        if segment_distance(p, q, u, v) <= tol {
                            return Err(Error::InvalidInput("region boundaries intersect".into()));
                        }
                    }
                }
            }
        }
        for (k, h) in region.holes.iter().enumerate() {
            let v = h.vertices()[0];
            if winding(&region.outer, &v) != 1 {
                return Err(Error::InvalidInput(format!("hole {k} is not inside the outer boundary")));
            }
            for (j, g) in region.holes.iter().enumerate() {
                if j != k && winding(g, &v) != 0 {
                    return Err(Error::InvalidInput(format!("hole {k} is nested in hole {j}")));
                }
            }
        }
        Ok(region)
    }

    /// Axis-aligned square `[x0, x0+side] x [y0, y0+side]`.
    pub fn square(x0: f64, y0: f64, side: f64) -> Result<Self> {
        let c = PolyCurve::planar(&[(x0, y0), (x0 + side, y0), (x0 + side, y0 + side), (x0, y0 + side)], true)?;
        Self::new(c, Vec::new())
    }

    pub fn outer(&self) -> &PolyCurve {
        &self.outer
    }

    pub fn holes(&self) -> &[PolyCurve] {
        &self.holes
    }

    pub fn boundary_curves(&self) -> impl Iterator<Item = &PolyCurve> {
        std::iter::once(&self.outer).chain(&self.holes)
    }

    pub fn area(&self) -> f64 {
        self.area
    }

    pub fn perimeter(&self) -> f64 {
        self.boundary_curves().map(|c| c.chordal_length()).sum()
    }

    pub fn bbox(&self) -> (Point, Point) {
        let mut lo = Point::new2(f64::INFINITY, f64::INFINITY);
        let mut hi = Point::new2(f64::NEG_INFINITY, f64::NEG_INFINITY);
        for v in self.outer.vertices() {
            for k in 0..2 {
                lo.0[k] = lo.0[k].min(v[k]);
                hi.0[k] = hi.0[k].max(v[k]);
            }
        }
        (lo, hi)
    }

    pub fn diameter(&self) -> f64 {
        let (lo, hi) = self.bbox();
        lo.dist(&hi)
    }

    /// Point membership by winding numbers; boundary points count as
    /// whatever the half-open crossing rule gives (a null set).
    pub fn contains(&self, p: &Point) -> bool {
        winding(&self.outer, p) != 0 && self.holes.iter().all(|h| winding(h, p) == 0)
    }

    /// `dE` as a current: outer counterclockwise, holes clockwise.
    pub fn boundary_current(&self) -> SegmentCurrent {
        let curves: Vec<PolyCurve> = self.boundary_curves().cloned().collect();
        curves_to_current(2, &curves).expect("validated planar curves")
    }

    pub fn transformed(&self, scale: f64, shift: Point) -> Result<Self> {
        Self::new(
            self.outer.transformed(scale, shift),
            self.holes.iter().map(|h| h.transformed(scale, shift)).collect(),
        )
    }

    fn edges(&self) -> Vec<(Point, Point)> {
        self.boundary_curves().flat_map(|c| c.edges()).collect()
    }
}

#[inline]
fn orient(a: &Point, b: &Point, p: &Point) -> f64 {
    (b[0] - a[0]) * (p[1] - a[1]) - (p[0] - a[0]) * (b[1] - a[1])
}

/// Winding number of a closed polygon around `p`.
fn winding(c: &PolyCurve, p: &Point) -> i32 {
    let mut w = 0;
    for (a, b) in c.edges() {
        if a[1] <= p[1] {
            if b[1] > p[1] && orient(&a, &b, p) > 0.0 {
                w += 1;
            }
        } else if b[1] <= p[1] && orient(&a, &b, p) < 0.0 {
            w -= 1;
        }
    }
    w
}

/// Edge with precomputed frame; `normal` points into the region.
struct Edge {
    a: Point,
    tau: Point,
    normal: Point,
    len: f64,
}

/// Mixture proposal for the outer variable: uniform on `E` with
/// probability `ALPHA`, otherwise a strip along a boundary edge (chosen by
/// length) with inward depth density `(1-a) u^-a / h^(1-a)` on `(0, h]`.
struct Proposal {
    edges: Vec<Edge>,
    cum_len: Vec<f64>,
    total_len: f64,
    depth: f64,
    a: f64,
    area: f64,
    lo: Point,
    hi: Point,
}

const ALPHA: f64 = 0.3;

impl Proposal {
    fn new(e: &PlanarRegion, s: f64) -> Self {
        let edges: Vec<Edge> = e
            .edges()
            .into_iter()
            .map(|(a, b)| {
                let v = b - a;
                let len = v.norm();
                let tau = v * (1.0 / len);
                Edge { a, tau, normal: Point::new2(-tau[1], tau[0]), len }
            })
            .collect();
        let mut cum_len = Vec::with_capacity(edges.len());
        let mut acc = 0.0;
        for ed in &edges {
            acc += ed.len;
            cum_len.push(acc);
        }
        let (lo, hi) = e.bbox();
        Self { edges, cum_len, total_len: acc, depth: 0.1 * e.diameter(), a: s.min(0.9), area: e.area(), lo, hi }
    }

    fn depth_density(&self, u: f64) -> f64 {
        (1.0 - self.a) * u.powf(-self.a) / self.depth.powf(1.0 - self.a)
    }

    fn density(&self, e: &PlanarRegion, x: &Point) -> f64 {
        let mut strip = 0.0;
        for ed in &self.edges {
            let d = *x - ed.a;
            let t = d.dot(&ed.tau);
            let u = d.dot(&ed.normal);
            if t >= 0.0 && t <= ed.len && u > 0.0 && u <= self.depth {
                strip += self.depth_density(u);
            }
        }
        let uni = if e.contains(x) { 1.0 / self.area } else { 0.0 };
        ALPHA * uni + (1.0 - ALPHA) * strip / self.total_len
    }

    fn sample<R: Rng>(&self, e: &PlanarRegion, rng: &mut R) -> Point {
        if rng.random::<f64>() < ALPHA {
            loop {
                let p = Point::new2(
                    self.lo[0] + (self.hi[0] - self.lo[0]) * rng.random::<f64>(),
                    self.lo[1] + (self.hi[1] - self.lo[1]) * rng.random::<f64>(),
                );
                if e.contains(&p) {
                    return p;
                }
            }
        }
        let l = rng.random::<f64>() * self.total_len;
        let k = self.cum_len.partition_point(|&c| c <= l).min(self.edges.len() - 1);
        let ed = &self.edges[k];
        let t = rng.random::<f64>() * ed.len;
        // inverse CDF of the depth density: u = h * U^(1/(1-a))
        let v: f64 = 1.0 - rng.random::<f64>();
        let u = self.depth * v.powf(1.0 / (1.0 - self.a));
        ed.a + ed.tau * t + ed.normal * u
    }

    fn boundary_distance(&self, x: &Point) -> f64 {
        self.edges
            .iter()
            .map(|ed| {
                let t = (*x - ed.a).dot(&ed.tau).clamp(0.0, ed.len);
                x.dist(&(ed.a + ed.tau * t))
            })
            .fold(f64::INFINITY, f64::min)
    }
}

/// Samples per seeded batch; batch `k` uses ChaCha8 stream `k` of the
/// master seed.
const MC_BATCH: usize = 1 << 16;

fn mc_core(e: &PlanarRegion, s: f64, n: usize, seed: u64, r_min: f64) -> Result<(f64, f64)> {
    check_s(s)?;
    if n < 10_000 {
        return Err(Error::InvalidInput(format!("need at least 10^4 samples, got {n}")));
    }
    if e.area() == 0.0 {
        return Ok((0.0, 0.0));
    }
    let prop = Proposal::new(e, s);
    let batches = n.div_ceil(MC_BATCH);
    let sums: Vec<(f64, f64)> = (0..batches)
        .into_par_iter()
        .map(|b| {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            rng.set_stream(b as u64);
            let count = MC_BATCH.min(n - b * MC_BATCH);
            let mut s1 = NeumaierSum::new();
            let mut s2 = NeumaierSum::new();
            for _ in 0..count {
                let x = prop.sample(e, &mut rng);
                let mut val = 0.0;
                if e.contains(&x) {
                    // y = x + r theta, r Pareto on [r0, inf): the disc
                    // B(x, dist(x, dE)) lies in E and is skipped exactly
                    let r0 = prop.boundary_distance(&x).max(r_min);
                    if r0 > 0.0 {
                        let th = 2.0 * PI * rng.random::<f64>();
                        let v: f64 = 1.0 - rng.random::<f64>();
                        let r = r0 * v.powf(-1.0 / s);
                        let y = x + Point::new2(r * th.cos(), r * th.sin());
                        if !e.contains(&y) {
                            val = 2.0 * PI / (s * r0.powf(s)) / prop.density(e, &x);
                        }
                    }
                }
                s1.add(val);
                s2.add(val * val);
            }
            (s1.value(), s2.value())
        })
        .collect();
    let mut t1 = NeumaierSum::new();
    let mut t2 = NeumaierSum::new();
    for (a, b) in sums {
        t1.add(a);
        t2.add(b);
    }
    let nf = n as f64;
    let mean = t1.value() / nf;
    let var = (t2.value() / nf - mean * mean).max(0.0) * nf / (nf - 1.0);
    Ok((mean, (var / nf).sqrt()))
}

/// Monte-Carlo estimate of `P_s(E) = int_E int_{R^2 \ E} |x-y|^(-2-s)`
/// with its standard error. The exterior is sampled without truncation.
pub fn fractional_perimeter_mc(e: &PlanarRegion, s: f64, n: usize, seed: u64) -> Result<(f64, f64)> {
    mc_core(e, s, n, seed, 0.0)
}

/// The same estimator restricted to pairs with `|x - y| >= r_min`.
pub fn fractional_perimeter_mc_truncated(
    e: &PlanarRegion,
    s: f64,
    n: usize,
    seed: u64,
    r_min: f64,
) -> Result<(f64, f64)> {
    if !(r_min >= 0.0) {
        return Err(Error::InvalidInput(format!("r_min must be nonnegative, got {r_min}")));
    }
    mc_core(e, s, n, seed, r_min)
}

/// `M_s(dE) / s^2` with the boundary oriented as in the region.
pub fn boundary_mass_perimeter(e: &PlanarRegion, s: f64, p: &FracParams) -> Result<f64> {
    check_s(s)?;
    if e.outer.signed_area() < 0.0 || e.holes.iter().any(|h| h.signed_area() > 0.0) {
        return Err(Error::InvalidInput("region orientation violated".into()));
    }
    let p = FracParams { s, ..*p };
    Ok(fractional_mass(&e.boundary_current(), &p)? / (s * s))
}
