//! Fractional mass of segment currents by singular-kernel quadrature.

use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::geometry::{OrientedSegment, SegmentCurrent};
use crate::point::Point;
use crate::quadrature::{gauss_legendre, graded_panels, order_for_separation, NeumaierSum};

/// Quadrature settings for segment-pair integrals.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct QuadConfig {
    /// Gauss–Legendre order per axis on far pairs and leaf cells.
    pub gauss_order: usize,
    /// Maximum depth of the dyadic subdivision of near pairs.
    pub near_split_depth: usize,
    /// A pair (or cell) is near when the gap between bounding spheres is
    /// below `near_ratio` times the larger length.
    pub near_ratio: f64,
    /// When positive, far cells use the smallest Gauss order whose
    /// Bernstein-ellipse error estimate is below this tolerance (capped at
    /// `gauss_order`). Zero keeps the fixed order.
    pub far_tol: f64,
    /// Use the closed forms for self and collinear terms of the Riesz
    /// kernel; when false these are integrated numerically as well.
    pub closed_forms: bool,
}

impl Default for QuadConfig {
    fn default() -> Self {
        Self { gauss_order: 8, near_split_depth: 20, near_ratio: 2.0, far_tol: 0.0, closed_forms: true }
    }
}

impl QuadConfig {
    pub fn validate(&self) -> Result<()> {
        if self.gauss_order < 2 || self.gauss_order > crate::quadrature::MAX_GAUSS_ORDER {
            return Err(Error::InvalidInput(format!("gauss_order must lie in 2..=64, got {}", self.gauss_order)));
        }
        if !(self.near_ratio > 0.0 && self.near_ratio.is_finite()) {
            return Err(Error::InvalidInput(format!("near_ratio must be positive, got {}", self.near_ratio)));
        }
        if !(self.far_tol >= 0.0) {
            return Err(Error::InvalidInput("far_tol must be nonnegative".into()));
        }
        Ok(())
    }

    /// Twice the order and depth; used by the refinement gate.
    pub fn refined(&self) -> Self {
        Self {
            gauss_order: (2 * self.gauss_order).min(crate::quadrature::MAX_GAUSS_ORDER),
            near_split_depth: 2 * self.near_split_depth,
            ..*self
        }
    }
}

/// Exponent, regularization and quadrature for a mass evaluation.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FracParams {
    pub s: f64,
    /// Zero for the Riesz kernel `r^-s`; positive selects the regularized
    /// exponent-one kernel `1/max(r, eps)`.
    pub eps: f64,
    /// With `eps > 0`, use `1/sqrt(r^2 + eps^2)` instead of the clamp.
    pub smooth_m1: bool,
    pub quad: QuadConfig,
}

impl FracParams {
    pub fn new(s: f64) -> Self {
        Self { s, eps: 0.0, smooth_m1: false, quad: QuadConfig::default() }
    }

    pub fn m1(eps: f64) -> Self {
        Self { s: 1.0, eps, smooth_m1: false, quad: QuadConfig::default() }
    }

    pub fn with_quad(mut self, quad: QuadConfig) -> Self {
        self.quad = quad;
        self
    }

    pub fn kernel(&self) -> Result<Kernel> {
        self.quad.validate()?;
        if self.eps > 0.0 {
            if !self.eps.is_finite() {
                return Err(Error::InvalidInput("eps must be finite".into()));
            }
            Ok(if self.smooth_m1 { Kernel::Smooth(self.eps) } else { Kernel::Clamped(self.eps) })
        } else if self.eps < 0.0 || self.eps.is_nan() {
            Err(Error::InvalidInput(format!("eps must be nonnegative, got {}", self.eps)))
        } else {
            check_s(self.s)?;
            Ok(Kernel::Riesz(self.s))
        }
    }
}

pub(crate) fn check_s(s: f64) -> Result<()> {
    if s > 0.0 && s < 1.0 {
        Ok(())
    } else {
        Err(Error::InvalidInput(format!("s must lie in (0, 1), got {s}")))
    }
}

/// Radial interaction kernels.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Kernel {
    /// `r^-s`
    Riesz(f64),
    /// `1 / max(r, eps)`
    Clamped(f64),
    /// `1 / sqrt(r^2 + eps^2)`
    Smooth(f64),
}

impl Kernel {
    #[inline]
    pub fn eval(&self, r: f64) -> f64 {
        match *self {
            Kernel::Riesz(s) => r.powf(-s),
            Kernel::Clamped(e) => 1.0 / r.max(e),
            Kernel::Smooth(e) => 1.0 / (r * r + e * e).sqrt(),
        }
    }

    /// Kernel as a function of the squared distance.
    #[inline]
    pub fn eval_sq(&self, r2: f64) -> f64 {
        match *self {
            Kernel::Riesz(s) => r2.powf(-0.5 * s),
            Kernel::Clamped(e) => 1.0 / r2.sqrt().max(e),
            Kernel::Smooth(e) => 1.0 / (r2 + e * e).sqrt(),
        }
    }

    fn kink(&self) -> Option<f64> {
        match *self {
            Kernel::Clamped(e) => Some(e),
            _ => None,
        }
    }
}

/// `r^-s`, or `1/max(r, eps)` on the regularized path.
pub fn kernel(r: f64, p: &FracParams) -> Result<f64> {
    let k = p.kernel()?;
    if r.is_nan() || r < 0.0 {
        return Err(Error::Domain(format!("kernel distance must be nonnegative, got {r}")));
    }
    if r == 0.0 && matches!(k, Kernel::Riesz(_)) {
        return Err(Error::Domain("Riesz kernel is singular at r = 0".into()));
    }
    Ok(k.eval(r))
}

/// `int_0^L int_0^L |u - v|^-s du dv = 2 L^(2-s) / ((1-s)(2-s))`.
pub fn self_energy_segment(len: f64, s: f64) -> Result<f64> {
    check_s(s)?;
    if !(len > 0.0 && len.is_finite()) {
        return Err(Error::InvalidInput(format!("segment length must be positive, got {len}")));
    }
    Ok(2.0 * len.powf(2.0 - s) / ((1.0 - s) * (2.0 - s)))
}

/// `int_{a0}^{a1} int_{b0}^{b1} |p - q|^-s dq dp` in closed form.
fn collinear_closed_form(a0: f64, a1: f64, b0: f64, b1: f64, s: f64) -> f64 {
    let g = |t: f64| t.abs().powf(2.0 - s);
    -(g(a1 - b1) - g(a1 - b0) - g(a0 - b1) + g(a0 - b0)) / ((1.0 - s) * (2.0 - s))
}

/// `int_{a0}^{a1} int_{b0}^{b1} K(sqrt(h^2 + (p - q)^2)) dq dp`, reduced to a
/// one-dimensional integral over `u = p - q` against the (piecewise linear)
/// overlap length of the two intervals.
pub(crate) fn parallel_pair_integral(a0: f64, a1: f64, b0: f64, b1: f64, h: f64, k: &Kernel, order: usize) -> f64 {
    let lo = a0 - b1;
    let hi = a1 - b0;
    let mut bp = vec![lo, hi, a0 - b0, a1 - b1, 0.0];
    if let Some(e) = k.kink() {
        if h < e {
            let uk = (e * e - h * h).sqrt();
            bp.push(uk);
            bp.push(-uk);
        }
    }
    bp.retain(|&u| u >= lo && u <= hi);
    bp.sort_by(f64::total_cmp);
    bp.dedup();
    let m = |u: f64| (a1.min(b1 + u) - a0.max(b0 + u)).max(0.0);
    let mut acc = NeumaierSum::new();
    for w in bp.windows(2) {
        let (p, q) = (w[0], w[1]);
        if q <= p {
            continue;
        }
        if q <= 0.0 {
            acc.add(graded_line(q, p, h, k, &m, order));
        } else {
            acc.add(graded_line(p, q, h, k, &m, order));
        }
    }
    acc.value()
}

/// `|int_z^w K(sqrt(h^2 + u^2)) m(u) du|` with panels growing geometrically
/// away from `z`, the endpoint nearest the kernel peak at `u = 0`.
fn graded_line(z: f64, w: f64, h: f64, k: &Kernel, m: &dyn Fn(f64) -> f64, order: usize) -> f64 {
    let len = (w - z).abs();
    let dir = if w >= z { 1.0 } else { -1.0 };
    let base = h.max(z.abs());
    let rule = gauss_legendre(order);
    let f = |u: f64| k.eval_sq(h * h + u * u) * m(u);
    let mut acc = NeumaierSum::new();
    let mut x0;
    let mut width;
    if base == 0.0 {
        // singular start for the Riesz kernel: u^-s on [0, w0] via
        // u = w0 x^(1/(1-s)), which turns the weight into a constant.
        let w0 = len * 1e-9;
        match *k {
            Kernel::Riesz(s) => {
                let p = 1.0 / (1.0 - s);
                let pref = w0.powf(1.0 - s) / (1.0 - s);
                acc.add(pref * rule.integrate(0.0, 1.0, |x| m(z + dir * w0 * x.powf(p))));
            }
            _ => acc.add(rule.integrate(0.0, w0, |t| f(z + dir * t))),
        }
        x0 = w0;
        width = w0;
    } else {
        x0 = 0.0;
        width = 0.5 * base;
    }
    while x0 < len {
        let x1 = if x0 + width >= len * (1.0 - 1e-12) { len } else { x0 + width };
        acc.add(rule.integrate(x0, x1, |t| f(z + dir * t)));
        x0 = x1;
        width = x0;
    }
    acc.value()
}

/// Geometry of a segment pair in parametric form `a + t ea`, `b + r eb`,
/// `t, r` in `[0, 1]`.
#[derive(Debug, Clone, Copy)]
pub(crate) struct PairGeom {
    pub a: Point,
    pub ea: Point,
    pub la: f64,
    pub b: Point,
    pub eb: Point,
    pub lb: f64,
}

impl PairGeom {
    pub fn new(sa: &OrientedSegment, sb: &OrientedSegment) -> Self {
        let (ea, eb) = (sa.vector(), sb.vector());
        Self { a: sa.start, ea, la: ea.norm(), b: sb.start, eb, lb: eb.norm() }
    }
}

/// Maximum number of cells examined for one pair before subdivision stops.
const CELL_BUDGET: usize = 1 << 17;
/// Depth cap for cells straddling the kink of the clamped kernel.
const KINK_DEPTH: usize = 12;

/// `int_0^1 int_0^1 f(t, r) dt dr` for an integrand singular (at most) where
/// the two segments touch. Cells are split dyadically in both parameters
/// while they are near in the bounding-sphere sense, up to
/// `near_split_depth`; leaves use tensor Gauss rules.
pub(crate) fn integrate_pair<F: FnMut(f64, f64) -> f64>(
    g: &PairGeom,
    quad: &QuadConfig,
    kink: Option<f64>,
    mut f: F,
) -> f64 {
    let mut acc = NeumaierSum::new();
    let mut stack: Vec<(f64, f64, f64, f64, usize)> = vec![(0.0, 1.0, 0.0, 1.0, 0)];
    let mut visited = 0usize;
    while let Some((t0, t1, r0, r1, depth)) = stack.pop() {
        visited += 1;
        let ra = 0.5 * g.la * (t1 - t0);
        let rb = 0.5 * g.lb * (r1 - r0);
        let ca = g.a + g.ea * (0.5 * (t0 + t1));
        let cb = g.b + g.eb * (0.5 * (r0 + r1));
        let cd = ca.dist(&cb);
        let gap = cd - ra - rb;
        let size = 2.0 * ra.max(rb);
        let mut split = gap < quad.near_ratio * size && depth < quad.near_split_depth;
        if let Some(e) = kink {
            if gap.max(0.0) < e && e < cd + ra + rb && depth < KINK_DEPTH.min(quad.near_split_depth) {
                split = true;
            }
        }
        if split && visited + stack.len() < CELL_BUDGET {
            let (tm, rm) = (0.5 * (t0 + t1), 0.5 * (r0 + r1));
            let d = depth + 1;
            stack.push((t0, tm, r0, rm, d));
            stack.push((t0, tm, rm, r1, d));
            stack.push((tm, t1, r0, rm, d));
            stack.push((tm, t1, rm, r1, d));
            continue;
        }
        let n = leaf_order(quad, gap, ra.max(rb));
        acc.add(tensor_gauss(t0, t1, r0, r1, n, &mut f));
    }
    acc.value()
}

#[inline]
fn leaf_order(quad: &QuadConfig, gap: f64, half: f64) -> usize {
    if quad.far_tol > 0.0 && gap > 0.0 {
        order_for_separation(1.0 + gap / half, quad.far_tol, quad.gauss_order).max(1)
    } else {
        quad.gauss_order
    }
}

#[inline]
pub(crate) fn tensor_gauss<F: FnMut(f64, f64) -> f64>(t0: f64, t1: f64, r0: f64, r1: f64, n: usize, f: &mut F) -> f64 {
    let rule = gauss_legendre(n);
    let (ht, hr) = (t1 - t0, r1 - r0);
    let mut acc = 0.0;
    for (x, wx) in rule.nodes.iter().zip(&rule.weights) {
        let t = t0 + ht * x;
        let mut row = 0.0;
        for (y, wy) in rule.nodes.iter().zip(&rule.weights) {
            row += wy * f(t, r0 + hr * y);
        }
        acc += wx * row;
    }
    acc * ht * hr
}

/// Per-segment data cached for the pair loops.
#[derive(Debug, Clone, Copy)]
pub(crate) struct SegData {
    pub seg: OrientedSegment,
    pub tau: Point,
    pub len: f64,
    pub mid: Point,
}

impl SegData {
    pub fn new(seg: &OrientedSegment) -> Self {
        let len = seg.length();
        Self { seg: *seg, tau: seg.vector() * (1.0 / len), len, mid: seg.midpoint() }
    }
}

/// `int int K(|x - y|) ds dt` over two segments (arc-length measure),
/// without the weight and tangent prefactor.
pub(crate) fn kernel_pair_integral(a: &SegData, b: &SegData, k: &Kernel, quad: &QuadConfig) -> f64 {
    let gap = a.mid.dist(&b.mid) - 0.5 * (a.len + b.len);
    let near = gap < quad.near_ratio * a.len.max(b.len);
    let g = PairGeom::new(&a.seg, &b.seg);
    if !near {
        let n = leaf_order(quad, gap, 0.5 * a.len.max(b.len));
        let (la, lb) = (a.len, b.len);
        return tensor_gauss(0.0, 1.0, 0.0, 1.0, n, &mut |t, r| {
            let d = (g.a + g.ea * t) - (g.b + g.eb * r);
            k.eval_sq(d.norm_sq())
        }) * la
            * lb;
    }
    let cross = a.tau.cross(&b.tau).norm();
    if cross < 1e-12 {
        // parallel or antiparallel: reduce to one dimension along a.tau
        let rel = b.seg.start - a.seg.start;
        let along = rel.dot(&a.tau);
        let h = (rel - a.tau * along).norm();
        let q0 = along;
        let q1 = (b.seg.end - a.seg.start).dot(&a.tau);
        let (b0, b1) = if q0 <= q1 { (q0, q1) } else { (q1, q0) };
        let scale = a.len.max(b.len);
        if h <= 1e-13 * scale {
            if let (Kernel::Riesz(s), true) = (k, quad.closed_forms) {
                return collinear_closed_form(0.0, a.len, b0, b1, *s);
            }
            return parallel_pair_integral(0.0, a.len, b0, b1, 0.0, k, quad.gauss_order);
        }
        return parallel_pair_integral(0.0, a.len, b0, b1, h, k, quad.gauss_order);
    }
    if let Kernel::Riesz(s) = *k {
        if let Some((ta, tb)) = contact(a, b) {
            return touching_pair_riesz(a, b, ta, tb, cross, s);
        }
    }
    let (la, lb) = (a.len, b.len);
    integrate_pair(&g, quad, k.kink(), |t, r| {
        let d = (g.a + g.ea * t) - (g.b + g.eb * r);
        k.eval_sq(d.norm_sq())
    }) * la
        * lb
}

/// Parameters `(t, r)` of a common point `a(t) = b(r)` of two non-parallel
/// segments, if they touch.
fn contact(a: &SegData, b: &SegData) -> Option<(f64, f64)> {
    let (sa, sb) = (&a.seg, &b.seg);
    for (ta, pa) in [(0.0, sa.start), (1.0, sa.end)] {
        for (tb, pb) in [(0.0, sb.start), (1.0, sb.end)] {
            if pa == pb {
                return Some((ta, tb));
            }
        }
    }
    let (t, r) = closest_params(sa, sb);
    let gap = sa.at(t).dist(&sb.at(r));
    (gap <= 1e-13 * a.len.max(b.len)).then_some((t, r))
}

/// Closest points of two segments as parameters in `[0, 1]`.
fn closest_params(sa: &OrientedSegment, sb: &OrientedSegment) -> (f64, f64) {
    let (d1, d2) = (sa.vector(), sb.vector());
    let w = sa.start - sb.start;
    let (aa, bb, ee) = (d1.norm_sq(), d1.dot(&d2), d2.norm_sq());
    let (c, f) = (d1.dot(&w), d2.dot(&w));
    let denom = aa * ee - bb * bb;
    let mut t = if denom > 0.0 { ((bb * f - c * ee) / denom).clamp(0.0, 1.0) } else { 0.0 };
    let mut r = (bb * t + f) / ee;
    if r < 0.0 {
        r = 0.0;
        t = (-c / aa).clamp(0.0, 1.0);
    } else if r > 1.0 {
        r = 1.0;
        t = ((bb - c) / aa).clamp(0.0, 1.0);
    }
    (t, r)
}

/// `int int |x - y|^-s` over two segments that meet at `a(ta) = b(tb)`.
/// Each is split at the contact point into pieces leaving it.
fn touching_pair_riesz(a: &SegData, b: &SegData, ta: f64, tb: f64, sin: f64, s: f64) -> f64 {
    let pieces = |d: &SegData, t: f64| {
        let mut out = Vec::with_capacity(2);
        if t > 0.0 {
            out.push((d.len * t, -1.0));
        }
        if t < 1.0 {
            out.push((d.len * (1.0 - t), 1.0));
        }
        out
    };
    let cos = a.tau.dot(&b.tau);
    let mut acc = 0.0;
    for (la, sa) in pieces(a, ta) {
        for (lb, sb) in pieces(b, tb) {
            acc += corner_riesz(la, lb, sa * sb * cos, sin, s);
        }
    }
    acc
}

/// `int_0^la int_0^lb |u e - v f|^-s dv du` for unit vectors with
/// `e . f = cos`. Split along `v = (lb/la) u`; on each triangle the radial
/// integral is exact and the angular one is a smooth 1-D integral.
fn corner_riesz(la: f64, lb: f64, cos: f64, sin: f64, s: f64) -> f64 {
    let c = lb / la;
    (la.powf(2.0 - s) * corner_angular(c, cos, sin, s) + lb.powf(2.0 - s) * corner_angular(1.0 / c, cos, sin, s))
        / (2.0 - s)
}

/// `int_0^c ((z - cos)^2 + sin^2)^(-s/2) dz`, with panels graded away from
/// the peak at `z = cos`.
fn corner_angular(c: f64, cos: f64, sin: f64, s: f64) -> f64 {
    let zs = cos.clamp(0.0, c);
    let f = |z: f64| ((z - cos) * (z - cos) + sin * sin).powf(-0.5 * s);
    let rule = gauss_legendre(16);
    let mut panels = Vec::new();
    graded_panels(zs, c, sin, &mut panels);
    let mut acc = NeumaierSum::new();
    for &(p, q) in &panels {
        acc.add(rule.integrate(p, q, f));
    }
    panels.clear();
    graded_panels(0.0, zs, sin, &mut panels);
    for &(p, q) in &panels {
        acc.add(rule.integrate(zs - q, zs - p, f));
    }
    acc.value()
}

fn self_term(a: &SegData, k: &Kernel, quad: &QuadConfig) -> f64 {
    match (k, quad.closed_forms) {
        (Kernel::Riesz(s), true) => 2.0 * a.len.powf(2.0 - s) / ((1.0 - s) * (2.0 - s)),
        _ => parallel_pair_integral(0.0, a.len, 0.0, a.len, 0.0, k, quad.gauss_order),
    }
}

/// `w_a w_b (tau_a . tau_b) int int K(|x - y|)` over the two segments.
pub fn pair_energy(a: &OrientedSegment, b: &OrientedSegment, p: &FracParams) -> Result<f64> {
    let k = p.kernel()?;
    let (da, db) = (SegData::new(a), SegData::new(b));
    let pref = a.weight * b.weight * da.tau.dot(&db.tau);
    if pref == 0.0 {
        return Ok(0.0);
    }
    let v = if a.start == b.start && a.end == b.end {
        self_term(&da, &k, &p.quad)
    } else {
        kernel_pair_integral(&da, &db, &k, &p.quad)
    };
    finite(pref * v)
}

fn finite(v: f64) -> Result<f64> {
    if v.is_finite() {
        Ok(v)
    } else {
        Err(Error::Domain(format!("non-finite quadrature result {v}")))
    }
}

/// Rows per work unit in the pair loops; fixed so that the reduction order
/// does not depend on the thread count.
pub(crate) const ROW_CHUNK: usize = 16;

/// Sum over all ordered pairs `(i, j)` of `pair_energy`: each unordered pair
/// is evaluated once and counted twice. Rows are reduced in fixed chunks with
/// compensated sums, so the result is bitwise independent of scheduling.
pub fn fractional_mass(mu: &SegmentCurrent, p: &FracParams) -> Result<f64> {
    let k = p.kernel()?;
    if mu.is_empty() {
        return Err(Error::InvalidInput("fractional mass of an empty current".into()));
    }
    let data: Vec<SegData> = mu.segments().iter().map(SegData::new).collect();
    let quad = p.quad;
    let chunks: Vec<f64> = (0..data.len().div_ceil(ROW_CHUNK))
        .into_par_iter()
        .map(|c| {
            let mut acc = NeumaierSum::new();
            for i in c * ROW_CHUNK..((c + 1) * ROW_CHUNK).min(data.len()) {
                acc.add(row_energy(&data, i, &k, &quad));
            }
            acc.value()
        })
        .collect();
    finite(chunks.into_iter().collect::<NeumaierSum>().value())
}

fn row_energy(data: &[SegData], i: usize, k: &Kernel, quad: &QuadConfig) -> f64 {
    let a = &data[i];
    let mut acc = NeumaierSum::new();
    acc.add(a.seg.weight * a.seg.weight * self_term(a, k, quad));
    for b in &data[i + 1..] {
        let pref = a.seg.weight * b.seg.weight * a.tau.dot(&b.tau);
        if pref == 0.0 {
            continue;
        }
        acc.add(2.0 * pref * kernel_pair_integral(a, b, k, quad));
    }
    acc.value()
}

/// Mass with the regularized kernel `1/max(r, eps)` (exponent one).
pub fn regularized_mass_m1(mu: &SegmentCurrent, eps: f64, quad: QuadConfig) -> Result<f64> {
    if !(eps > 0.0 && eps.is_finite()) {
        return Err(Error::InvalidInput(format!("eps must be positive, got {eps}")));
    }
    fractional_mass(mu, &FracParams::m1(eps).with_quad(quad))
}
