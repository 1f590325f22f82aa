//! First variation of the fractional mass, fractional curvature and a
//! demonstration gradient flow.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::geometry::{curve_to_current, OrientedSegment, PolyCurve};
use crate::point::Point;
use crate::quadrature::{gauss_legendre, NeumaierSum};
use crate::riesz::{check_s, fractional_mass, integrate_pair, tensor_gauss, FracParams, PairGeom, QuadConfig};

/// Vertex values of a piecewise-linear vector field along a curve.
#[derive(Debug, Clone, PartialEq)]
pub struct Perturbation {
    pub values: Vec<Point>,
}

impl Perturbation {
    /// Checks compatibility with `c`: one value per vertex, and vanishing
    /// endpoint values on open curves.
    pub fn new(c: &PolyCurve, values: Vec<Point>) -> Result<Self> {
        if values.len() != c.vertices().len() {
            return Err(Error::InvalidInput(format!(
                "perturbation has {} values for {} vertices",
                values.len(),
                c.vertices().len()
            )));
        }
        if values.iter().any(|v| !v.is_finite() || (c.dim() == 2 && v.0[2] != 0.0)) {
            return Err(Error::InvalidInput("perturbation values must be finite and in the curve's dimension".into()));
        }
        if !c.is_closed() && (values[0] != Point::ZERO || *values.last().unwrap() != Point::ZERO) {
            return Err(Error::InvalidInput("perturbation must vanish at both endpoints of an open curve".into()));
        }
        Ok(Self { values })
    }

    pub fn zero(c: &PolyCurve) -> Self {
        Self { values: vec![Point::ZERO; c.vertices().len()] }
    }

    pub fn max_norm(&self) -> f64 {
        self.values.iter().map(|v| v.norm()).fold(0.0, f64::max)
    }
}

/// Curve with every vertex moved by `t * h`.
pub fn perturbed(c: &PolyCurve, h: &Perturbation, t: f64) -> Result<PolyCurve> {
    let v = c.vertices().iter().zip(&h.values).map(|(&p, &d)| p + d * t).collect();
    PolyCurve::new(c.dim(), v, c.is_closed(), c.weight())
}

/// `d/dt M_s(c + t h)` at `t = 0` with default quadrature.
pub fn first_variation(c: &PolyCurve, h: &Perturbation, s: f64) -> Result<f64> {
    first_variation_with(c, h, &FracParams::new(s))
}

/// First variation for a polygon whose vertices move by `h`:
///
/// `int int 2 h'(u).g'(v) |g(u)-g(v)|^-s - s (g'(u).g'(v)) (g(u)-g(v)).(h(u)-h(v)) |g(u)-g(v)|^(-2-s)`
///
/// with edge-wise linear parametrizations. The same-edge term is in closed
/// form; other pairs use the near-pair subdivision of the mass quadrature.
/// Closed curves are accepted (the perturbation is then periodic).
pub fn first_variation_with(c: &PolyCurve, h: &Perturbation, p: &FracParams) -> Result<f64> {
    check_s(p.s)?;
    p.quad.validate()?;
    if p.eps != 0.0 {
        return Err(Error::InvalidInput("first variation is defined for the Riesz kernel only".into()));
    }
    let h = Perturbation::new(c, h.values.clone())?;
    let s = p.s;
    let w2 = c.weight() * c.weight();
    let n = c.vertices().len();
    let edges: Vec<(OrientedSegment, Point, Point)> = (0..c.num_edges())
        .map(|i| {
            let (a, b) = c.edge(i);
            let (ha, hb) = (h.values[i], h.values[(i + 1) % n]);
            (OrientedSegment { start: a, end: b, weight: 1.0 }, ha, hb - ha)
        })
        .collect();
    let quad = p.quad;
    let rows: Vec<f64> = (0..edges.len())
        .into_par_iter()
        .map(|i| {
            let (si, _, dhi) = &edges[i];
            let ei = si.vector();
            let mut acc = NeumaierSum::new();
            acc.add(2.0 * ei.dot(dhi) * ei.norm().powf(-s) / (1.0 - s));
            for (sj, hj, dhj) in &edges[i + 1..] {
                acc.add(variation_pair(si, &edges[i].1, dhi, sj, hj, dhj, s, &quad));
            }
            acc.value()
        })
        .collect();
    let v = w2 * rows.into_iter().collect::<NeumaierSum>().value();
    if v.is_finite() {
        Ok(v)
    } else {
        Err(Error::Domain("non-finite first variation".into()))
    }
}

/// Both orderings of an edge pair in the first-variation integrand.
#[allow(clippy::too_many_arguments)]
fn variation_pair(
    si: &OrientedSegment,
    hi: &Point,
    dhi: &Point,
    sj: &OrientedSegment,
    hj: &Point,
    dhj: &Point,
    s: f64,
    quad: &QuadConfig,
) -> f64 {
    let g = PairGeom::new(si, sj);
    let (ei, ej) = (g.ea, g.eb);
    let lin = 2.0 * (dhi.dot(&ej) + dhj.dot(&ei));
    let tt = 2.0 * s * ei.dot(&ej);
    let mut f = |t: f64, r: f64| {
        let d = (g.a + ei * t) - (g.b + ej * r);
        let dh = (*hi + *dhi * t) - (*hj + *dhj * r);
        let r2 = d.norm_sq();
        let k = r2.powf(-0.5 * s);
        lin * k - tt * d.dot(&dh) * k / r2
    };
    let mid_gap = si.midpoint().dist(&sj.midpoint()) - 0.5 * (g.la + g.lb);
    if mid_gap >= quad.near_ratio * g.la.max(g.lb) {
        tensor_gauss(0.0, 1.0, 0.0, 1.0, quad.gauss_order, &mut f)
    } else {
        integrate_pair(&g, quad, None, f)
    }
}

/// Smallest distance between segments `[p1, q1]` and `[p2, q2]`.
pub fn segment_distance(p1: Point, q1: Point, p2: Point, q2: Point) -> f64 {
    let d1 = q1 - p1;
    let d2 = q2 - p2;
    let r = p1 - p2;
    let a = d1.dot(&d1);
    let e = d2.dot(&d2);
    let f = d2.dot(&r);
    let c = d1.dot(&r);
    let b = d1.dot(&d2);
    let denom = a * e - b * b;
    let mut sc = if denom > 1e-300 * a * e { ((b * f - c * e) / denom).clamp(0.0, 1.0) } else { 0.0 };
    let mut tc = (b * sc + f) / e;
    if tc < 0.0 {
        tc = 0.0;
        sc = (-c / a).clamp(0.0, 1.0);
    } else if tc > 1.0 {
        tc = 1.0;
        sc = ((b - c) / a).clamp(0.0, 1.0);
    }
    ((p1 + d1 * sc) - (p2 + d2 * tc)).norm()
}

/// Fails when two non-adjacent edges come within `1e-9` times the bounding
/// diameter of each other.
pub fn check_simple(c: &PolyCurve) -> Result<()> {
    let mu = curve_to_current(c);
    let tol = 1e-9 * mu.bbox_diameter();
    let m = c.num_edges();
    let edges: Vec<(Point, Point)> = c.edges().collect();
    let lens: Vec<f64> = edges.iter().map(|(a, b)| a.dist(b)).collect();
    let mids: Vec<Point> = edges.iter().map(|(a, b)| (*a + *b) * 0.5).collect();
    let bad = (0..m).into_par_iter().find_map_first(|i| {
        for j in i + 2..m {
            if c.is_closed() && i == 0 && j == m - 1 {
                continue;
            }
            if mids[i].dist(&mids[j]) - 0.5 * (lens[i] + lens[j]) > tol {
                continue;
            }
            let d = segment_distance(edges[i].0, edges[i].1, edges[j].0, edges[j].1);
            if d <= tol {
                return Some((i, j, d));
            }
        }
        None
    });
    match bad {
        Some((first, second, distance)) => Err(Error::SelfIntersection { first, second, distance }),
        None => Ok(()),
    }
}

/// `ln(sin x / x)` without cancellation for small `x`.
fn ln_sinc(x: f64) -> f64 {
    if x.abs() < 0.1 {
        let x2 = x * x;
        -x2 / 6.0 - x2 * x2 / 180.0 - x2 * x2 * x2 / 2835.0
    } else {
        (x.sin() / x).ln()
    }
}

/// Integrand of the curvature along the circle through three consecutive
/// vertices, for the two edges incident to the middle one. On a circle of
/// curvature `kappa` the bracket equals
/// `kappa^(1+s) 2^(-1-s) |sin(kappa v / 2)|^-s` times the outward normal,
/// and the leading power singularity is integrated exactly.
fn arc_contribution(pm: Point, p0: Point, pp: Point, tangent: Point, s: f64) -> Point {
    let a = pm - p0;
    let b = pp - p0;
    let axb = a.cross(&b);
    let cross = axb.norm();
    let (la, lb) = (a.norm(), b.norm());
    let chord = (pp - pm).norm();
    if cross <= 1e-14 * la * lb {
        return Point::ZERO;
    }
    let kappa = 2.0 * cross / (la * lb * chord);
    let center = p0 + ((b * a.norm_sq() - a * b.norm_sq()).cross(&axb)) * (1.0 / (2.0 * cross * cross));
    let to_center = center - p0;
    let normal = match (to_center - tangent * to_center.dot(&tangent)).normalized() {
        Some(n) => n,
        None => return Point::ZERO,
    };
    let arc = |chord: f64| 2.0 * (0.5 * chord * kappa).min(1.0).asin() / kappa;
    let (arc_a, arc_b) = (arc(la), arc(lb));
    let half_k = 0.5 * kappa;
    let singular = half_k.powf(-s) * (arc_a.powf(1.0 - s) + arc_b.powf(1.0 - s)) / (1.0 - s);
    let rule = gauss_legendre(16);
    let smooth = |v: f64| {
        let x = half_k * v;
        x.powf(-s) * (-s * ln_sinc(x)).exp_m1()
    };
    let regular = rule.integrate(0.0, arc_a, smooth) + rule.integrate(0.0, arc_b, smooth);
    let mag = s * kappa.powf(1.0 + s) * 2f64.powf(-1.0 - s) * (singular + regular);
    normal * (-mag)
}

/// Curvature integrand over a straight edge `a -> b` seen from `x` with unit
/// tangent `tangent`; panels are graded toward the point of the edge nearest
/// to `x`.
fn edge_contribution(x: Point, tangent: Point, a: Point, b: Point, s: f64, order: usize) -> Point {
    let e = b - a;
    let l2 = e.norm_sq();
    let len = l2.sqrt();
    let rule = gauss_legendre(order);
    let integrand = |r: f64| {
        let d = x - (a + e * r);
        let r2 = d.norm_sq();
        let w = r2.powf(-1.0 - 0.5 * s);
        (e * d.dot(&tangent) - d * tangent.dot(&e)) * w
    };
    let tstar = ((x - a).dot(&e) / l2).clamp(0.0, 1.0);
    let dist = (x - (a + e * tstar)).norm() / len;
    let mut acc = Point::ZERO;
    let mut panel = |lo: f64, hi: f64| {
        let h = hi - lo;
        for (node, w) in rule.nodes.iter().zip(&rule.weights) {
            acc += integrand(lo + h * node) * (w * h);
        }
    };
    if dist >= 2.0 {
        panel(0.0, 1.0);
    } else {
        for (from, to) in [(tstar, 0.0), (tstar, 1.0)] {
            let span = (to - from).abs();
            let dir = if to >= from { 1.0 } else { -1.0 };
            let mut x0 = 0.0;
            let mut width = (0.5 * dist).max(1e-12);
            while x0 < span {
                let x1 = if x0 + width >= span * (1.0 - 1e-12) { span } else { x0 + width };
                let (p, q) = (from + dir * x0, from + dir * x1);
                panel(p.min(q), p.max(q));
                x0 = x1;
                width = x0.max(dist);
            }
        }
    }
    acc * s
}

/// Discrete fractional curvature at vertex `i`.
///
/// The point is the vertex, the tangent the normalized average of the
/// incident edge tangents. Non-incident edges are integrated with graded
/// Gauss rules; the two incident edges are replaced by the arc of the circle
/// through the vertex and its neighbors, on which the integrand is known in
/// closed form (on a polygon the bracket vanishes identically on the
/// incident edges, which would discard the whole local contribution).
pub fn fractional_curvature(c: &PolyCurve, i: usize, s: f64) -> Result<Point> {
    check_curvature_input(c, s)?;
    if i >= c.vertices().len() || (!c.is_closed() && (i == 0 || i + 1 == c.vertices().len())) {
        return Err(Error::InvalidInput(format!("vertex {i} is not an interior vertex")));
    }
    check_simple(c)?;
    Ok(curvature_unchecked(c, i, s, QuadConfig::default().gauss_order))
}

/// Curvature at every vertex (interior vertices only for open curves; the
/// endpoints get zero).
pub fn fractional_curvature_all(c: &PolyCurve, s: f64) -> Result<Vec<Point>> {
    check_curvature_input(c, s)?;
    check_simple(c)?;
    let n = c.vertices().len();
    let order = QuadConfig::default().gauss_order;
    Ok((0..n)
        .into_par_iter()
        .map(
            |i| {
                if !c.is_closed() && (i == 0 || i + 1 == n) {
                    Point::ZERO
                } else {
                    curvature_unchecked(c, i, s, order)
                }
            },
        )
        .collect())
}

fn check_curvature_input(c: &PolyCurve, s: f64) -> Result<()> {
    check_s(s)?;
    if c.vertices().len() < 8 {
        return Err(Error::InvalidInput("curvature needs at least 8 vertices".into()));
    }
    Ok(())
}

fn curvature_unchecked(c: &PolyCurve, i: usize, s: f64, order: usize) -> Point {
    let v = c.vertices();
    let n = v.len();
    let x = v[i];
    let tangent = c.vertex_tangent(i);
    let prev = (i + n - 1) % n;
    let next = (i + 1) % n;
    let mut acc = arc_contribution(v[prev], x, v[next], tangent, s);
    for j in 0..c.num_edges() {
        if j == i || j == prev && (c.is_closed() || i > 0) {
            continue;
        }
        let (a, b) = c.edge(j);
        acc += edge_contribution(x, tangent, a, b, s, order);
    }
    acc
}

/// One explicit Euler step `v_i <- v_i - dt k_s(v_i)` followed by uniform
/// arc-length resampling. Open curves keep their endpoints fixed.
pub fn gradient_flow_step(c: &PolyCurve, s: f64, dt: f64) -> Result<PolyCurve> {
    if !(dt >= 0.0 && dt.is_finite()) {
        return Err(Error::InvalidInput(format!("dt must be nonnegative, got {dt}")));
    }
    if dt == 0.0 {
        return Ok(c.clone());
    }
    let k = fractional_curvature_all(c, s)?;
    let moved: Vec<Point> = c.vertices().iter().zip(&k).map(|(&p, &kv)| p - kv * dt).collect();
    let next = PolyCurve::new(c.dim(), moved, c.is_closed(), c.weight())?;
    let next = next.resample_arclength(c.vertices().len())?;
    check_simple(&next)?;
    Ok(next)
}

/// Smooth random normal field: a few low Fourier modes in each coordinate,
/// times `sin(pi u / L)` on open curves so that it vanishes at the
/// endpoints (periodic on closed curves), with the tangential component
/// removed at every vertex.
pub fn random_smooth_perturbation(c: &PolyCurve, seed: u64) -> Perturbation {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let v = c.vertices();
    let n = v.len();
    let total = c.chordal_length();
    let mut arc = Vec::with_capacity(n);
    let mut acc = 0.0;
    for i in 0..n {
        arc.push(acc / total);
        if i + 1 < n {
            acc += v[i].dist(&v[i + 1]);
        }
    }
    if !c.is_closed() {
        *arc.last_mut().unwrap() = 1.0;
    }
    const MODES: usize = 3;
    let mut coef = [[[0.0; 2]; MODES]; 3];
    for dimc in coef.iter_mut().take(c.dim()) {
        for m in dimc.iter_mut() {
            m[0] = rng.random_range(-1.0..1.0);
            m[1] = rng.random_range(-1.0..1.0);
        }
    }
    let scale = 0.1 * total / std::f64::consts::PI;
    let values = arc
        .iter()
        .map(|&u| {
            let mut p = Point::ZERO;
            for (k, dimc) in coef.iter().enumerate().take(c.dim()) {
                let mut val = 0.0;
                for (m, ab) in dimc.iter().enumerate() {
                    let w = 2.0 * std::f64::consts::PI * m as f64 * u;
                    val += ab[0] * w.cos() + ab[1] * w.sin();
                }
                if !c.is_closed() {
                    val *= (std::f64::consts::PI * u).sin();
                }
                p.0[k] = scale * val;
            }
            p
        })
        .collect::<Vec<_>>();

    // keep only the normal part: tangential motion is a reparametrization
    let mut values: Vec<Point> = values
        .iter()
        .enumerate()
        .map(|(i, &h)| {
            let t = c.vertex_tangent(i);
            h - t * h.dot(&t)
        })
        .collect();
    if !c.is_closed() {
        values[0] = Point::ZERO;
        values[n - 1] = Point::ZERO;
    }
    Perturbation { values }
}

/// Central difference `(M(c + t h) - M(c - t h)) / 2t` with the cube-root
/// step rule `t = eps^(1/3) * diam / max|h|`.
pub fn finite_difference_variation(c: &PolyCurve, h: &Perturbation, p: &FracParams) -> Result<f64> {
    let hmax = h.max_norm();
    if hmax == 0.0 {
        return Ok(0.0);
    }
    let diam = curve_to_current(c).bbox_diameter();
    let t = f64::EPSILON.cbrt() * diam / hmax;
    let plus = fractional_mass(&curve_to_current(&perturbed(c, h, t)?), p)?;
    let minus = fractional_mass(&curve_to_current(&perturbed(c, h, -t)?), p)?;
    Ok((plus - minus) / (2.0 * t))
}

/// One row of a first-variation check.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct VariationCheck {
    pub analytic: f64,
    pub finite_difference: f64,
    pub rel_err: f64,
}

/// Compares `first_variation` with central differences on `count` random
/// smooth perturbations seeded by `seed, seed + 1, ...`.
pub fn variation_check(c: &PolyCurve, s: f64, seed: u64, count: usize) -> Result<Vec<VariationCheck>> {
    let p = FracParams::new(s);
    (0..count as u64)
        .map(|k| {
            let h = random_smooth_perturbation(c, seed.wrapping_add(k));
            let analytic = first_variation_with(c, &h, &p)?;
            let fd = finite_difference_variation(c, &h, &p)?;
            let rel_err = (analytic - fd).abs() / (fd.abs() + 1e-12);
            Ok(VariationCheck { analytic, finite_difference: fd, rel_err })
        })
        .collect()
}
