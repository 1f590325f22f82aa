//! Approximation of divergence-free fields by weighted closed polygons.
//!
//! Pipeline: cover the support by cubes of side `eps`, put on every cube
//! face a lattice whose point count carries the face flux in units of
//! `delta`, connect inflow to outflow points inside each cube along thin
//! cylinders parallel to the mean field, connect what is left inside the
//! cube, close the remainder globally, and finally split the result into
//! closed loops of weight `delta`.

use std::collections::BTreeMap;
use std::time::Instant;

use rayon::prelude::*;

use crate::cellmass::fractional_mass_cells;
use crate::error::{Error, Result};
use crate::field::{field_riesz_energy, FieldSpec};
use crate::geometry::{boundary, OrientedSegment, PolyCurve, SegmentCurrent};
use crate::loops::loop_decompose;
use crate::point::Point;
use crate::quadrature::{gauss_legendre, NeumaierSum};

/// Scales of the construction.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ApproxParams {
    /// Cube side.
    pub eps: f64,
    /// Flux quantum, also the weight of every output loop.
    pub delta: f64,
    /// Cubes where the sampled `|psi|` stays below `rho` skip cylinder
    /// matching.
    pub rho: f64,
    pub dim: usize,
    /// Seed of the Monte-Carlo diagnostics.
    pub seed: u64,
    /// Gauss order per axis of the face-flux quadrature.
    pub face_order: usize,
}

impl ApproxParams {
    pub fn new(eps: f64, delta: f64, rho: f64, dim: usize) -> Self {
        Self { eps, delta, rho, dim, seed: 0, face_order: 8 }
    }

    pub fn validate(&self, psi: &FieldSpec) -> Result<()> {
        if !(self.eps > 0.0 && self.eps.is_finite()) || !(self.delta > 0.0 && self.delta.is_finite()) {
            return Err(Error::InvalidInput(format!(
                "need eps > 0 and delta > 0, got {} and {}",
                self.eps, self.delta
            )));
        }
        if !(self.rho >= 0.0 && self.rho.is_finite()) {
            return Err(Error::InvalidInput(format!("rho must be nonnegative, got {}", self.rho)));
        }
        if self.dim != psi.dim() {
            return Err(Error::DimensionMismatch { expected: psi.dim(), found: self.dim });
        }
        if self.face_order == 0 || self.face_order > crate::quadrature::MAX_GAUSS_ORDER {
            return Err(Error::InvalidInput(format!("face order must be in 1..=64, got {}", self.face_order)));
        }
        Ok(())
    }
}

/// Axis-aligned cube of the cover.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Cube {
    pub index: [usize; 3],
    pub min: Point,
    pub side: f64,
}

impl Cube {
    pub fn center(&self, dim: usize) -> Point {
        let mut c = self.min;
        for k in 0..dim {
            c.0[k] += 0.5 * self.side;
        }
        c
    }
}

/// Face of the cover orthogonal to `axis`; `index[axis]` counts planes.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Face {
    pub axis: usize,
    pub index: [usize; 3],
    pub min: Point,
    pub side: f64,
}

/// Grid of cubes anchored at the support box's min corner.
#[derive(Debug, Clone, Copy)]
struct Cover {
    dim: usize,
    lo: Point,
    eps: f64,
    counts: [usize; 3],
}

impl Cover {
    fn new(psi: &FieldSpec, eps: f64) -> Self {
        let (lo, hi) = psi.support_box();
        let mut counts = [1usize; 3];
        for k in 0..psi.dim() {
            let n = ((hi[k] - lo[k]) / eps * (1.0 - 1e-12)).ceil();
            counts[k] = (n as usize).max(1);
        }
        Self { dim: psi.dim(), lo, eps, counts }
    }

    fn num_cubes(&self) -> usize {
        self.counts.iter().product()
    }

    fn coord(&self, k: usize, i: usize) -> f64 {
        self.lo[k] + i as f64 * self.eps
    }

    fn cube(&self, id: usize) -> Cube {
        let index = [id / (self.counts[1] * self.counts[2]), id / self.counts[2] % self.counts[1], id % self.counts[2]];
        let mut min = Point::ZERO;
        for k in 0..self.dim {
            min.0[k] = self.coord(k, index[k]);
        }
        Cube { index, min, side: self.eps }
    }

    fn face_dims(&self, axis: usize) -> [usize; 3] {
        let mut d = self.counts;
        d[axis] += 1;
        d
    }

    fn face_id(&self, axis: usize, index: [usize; 3]) -> usize {
        let d = self.face_dims(axis);
        (index[0] * d[1] + index[1]) * d[2] + index[2]
    }

    fn face(&self, axis: usize, id: usize) -> Face {
        let d = self.face_dims(axis);
        let index = [id / (d[1] * d[2]), id / d[2] % d[1], id % d[2]];
        let mut min = Point::ZERO;
        for k in 0..self.dim {
            min.0[k] = self.coord(k, index[k]);
        }
        Face { axis, index, min, side: self.eps }
    }
}

/// Cubes of side `eps` covering the support box, in lexicographic index
/// order.
pub fn cube_cover(psi: &FieldSpec, eps: f64) -> Result<Vec<Cube>> {
    if !(eps > 0.0 && eps.is_finite()) {
        return Err(Error::InvalidInput(format!("eps must be positive, got {eps}")));
    }
    let cover = Cover::new(psi, eps);
    Ok((0..cover.num_cubes()).map(|i| cover.cube(i)).collect())
}

/// Gauss rule on `[a, b]` split at the given interior breakpoints.
fn split_rule(a: f64, b: f64, breaks: &[f64], order: usize, out: &mut Vec<(f64, f64)>) {
    out.clear();
    if b <= a {
        return;
    }
    let mut cuts: Vec<f64> = breaks.iter().copied().filter(|&x| x > a && x < b).collect();
    cuts.push(a);
    cuts.push(b);
    cuts.sort_by(|x, y| x.total_cmp(y));
    let rule = gauss_legendre(order);
    for w in cuts.windows(2) {
        let h = w[1] - w[0];
        for (x, wt) in rule.nodes.iter().zip(&rule.weights) {
            out.push((w[0] + h * x, wt * h));
        }
    }
}

/// `int_F psi . e_axis` by tensor Gauss-Legendre quadrature. For fields
/// with a supporting ball the rule is restricted to the ball and split at
/// its trace, where the presets stop being polynomial.
pub fn face_flux(psi: &FieldSpec, face: &Face, order: usize) -> f64 {
    if psi.is_zero() {
        return 0.0;
    }
    let d = psi.dim();
    let others: Vec<usize> = (0..d).filter(|&k| k != face.axis).collect();
    let mut x = face.min;
    let flux_at = |x: &Point| psi.eval(x)[face.axis];
    let (u0, u1) = (face.min[others[0]], face.min[others[0]] + face.side);
    let mut ru = Vec::new();
    let mut acc = NeumaierSum::new();
    match psi.support_ball() {
        Some((c, r)) => {
            let dx = face.min[face.axis] - c[face.axis];
            let rf2 = r * r - dx * dx;
            if rf2 <= 0.0 {
                return 0.0;
            }
            let rf = rf2.sqrt();
            let cu = c[others[0]];
            if d == 2 {
                split_rule(u0.max(cu - rf), u1.min(cu + rf), &[], order, &mut ru);
                for &(u, w) in &ru {
                    x.0[others[0]] = u;
                    acc.add(w * flux_at(&x));
                }
            } else {
                let cv = c[others[1]];
                let (v0, v1) = (face.min[others[1]], face.min[others[1]] + face.side);
                // chord ends cross v0 / v1 here
                let mut breaks = Vec::new();
                for v in [v0, v1] {
                    let t = rf2 - (v - cv) * (v - cv);
                    if t > 0.0 {
                        breaks.push(cu - t.sqrt());
                        breaks.push(cu + t.sqrt());
                    }
                }
                split_rule(u0.max(cu - rf), u1.min(cu + rf), &breaks, order, &mut ru);
                let mut rv = Vec::new();
                for &(u, wu) in &ru {
                    let hc = (rf2 - (u - cu) * (u - cu)).max(0.0).sqrt();
                    split_rule(v0.max(cv - hc), v1.min(cv + hc), &[], order, &mut rv);
                    x.0[others[0]] = u;
                    let mut inner = NeumaierSum::new();
                    for &(v, wv) in &rv {
                        x.0[others[1]] = v;
                        inner.add(wv * flux_at(&x));
                    }
                    acc.add(wu * inner.value());
                }
            }
        }
        None => {
            split_rule(u0, u1, &[], order, &mut ru);
            for &(u, wu) in &ru {
                x.0[others[0]] = u;
                if d == 2 {
                    acc.add(wu * flux_at(&x));
                } else {
                    for &(v, wv) in &ru {
                        x.0[others[1]] = face.min[others[1]] + (v - u0);
                        acc.add(wu * wv * flux_at(&x));
                    }
                }
            }
        }
    }
    acc.value()
}

/// Lattice of flux quanta on a face.
#[derive(Debug, Clone, PartialEq)]
pub struct FaceLattice {
    pub face: Face,
    /// `e_axis`; `sign` refers to this normal.
    pub normal: Point,
    pub spacing: f64,
    pub points: Vec<Point>,
    pub sign: i8,
}

/// Upper bound on the points of a single face lattice.
const MAX_FACE_POINTS: usize = 50_000_000;

/// Grid of spacing `d_F = (delta |F| / |flux|)^(1/(d-1))` on the face,
/// anchored at its min corner; points are the centers of the
/// `floor(side / d_F)^(d-1)` grid cells.
pub fn build_lattice(face: &Face, dim: usize, flux: f64, delta: f64) -> Result<FaceLattice> {
    let normal = Point::basis(face.axis);
    if flux == 0.0 || !flux.is_finite() {
        return Ok(FaceLattice { face: *face, normal, spacing: f64::INFINITY, points: Vec::new(), sign: 0 });
    }
    let m = (dim - 1) as f64;
    let area = face.side.powi(dim as i32 - 1);
    let spacing = (delta * area / flux.abs()).powf(1.0 / m);
    let per_axis = (face.side / spacing * (1.0 + 1e-12)).floor() as usize;
    let total = per_axis
        .checked_pow(dim as u32 - 1)
        .filter(|&t| t <= MAX_FACE_POINTS)
        .ok_or_else(|| Error::InvalidInput(format!("face lattice too large: flux {flux:e} at delta {delta:e}")))?;
    let others: Vec<usize> = (0..dim).filter(|&k| k != face.axis).collect();
    let mut points = Vec::with_capacity(total);
    for idx in 0..total {
        let mut p = face.min;
        let mut rest = idx;
        for &k in others.iter().rev() {
            let j = rest % per_axis;
            rest /= per_axis;
            p.0[k] = face.min[k] + (j as f64 + 0.5) * spacing;
        }
        points.push(p);
    }
    Ok(FaceLattice { face: *face, normal, spacing, points, sign: if flux > 0.0 { 1 } else { -1 } })
}

/// Orthonormal completion of `eta`: Gram-Schmidt on the standard basis
/// with the axis most parallel to `eta` dropped.
pub fn cylinder_frame(eta: &Point, dim: usize) -> Vec<Point> {
    let drop = (0..dim).max_by(|&a, &b| eta[a].abs().total_cmp(&eta[b].abs())).unwrap_or(0);
    let mut frame: Vec<Point> = Vec::with_capacity(dim - 1);
    for k in (0..dim).filter(|&k| k != drop) {
        let mut v = Point::basis(k) - *eta * eta[k];
        for f in &frame {
            v -= *f * v.dot(f);
        }
        frame.push(v.normalized().expect("basis vector independent of eta"));
    }
    frame
}

/// A lattice point seen from a cube: `+1` outflow, `-1` inflow.
pub type SignedPoint = (Point, i8);

/// Pairs inflow and outflow points inside the cylinders of square cross
/// section `width` parallel to `eta` (frame origin `origin`). Within a
/// cylinder both signs are sorted by position along `eta` and paired in
/// order; each segment runs from the inflow to the outflow point. Returns
/// the segments and the unpaired points.
pub fn cylinder_match(
    points: &[SignedPoint],
    eta: &Point,
    origin: &Point,
    width: f64,
    dim: usize,
) -> (Vec<(Point, Point)>, Vec<SignedPoint>) {
    let frame = cylinder_frame(eta, dim);
    let mut cyl: BTreeMap<Vec<i64>, (Vec<(f64, Point)>, Vec<(f64, Point)>)> = BTreeMap::new();
    for (p, sg) in points {
        let rel = *p - *origin;
        let key: Vec<i64> = frame.iter().map(|f| (rel.dot(f) / width).floor() as i64).collect();
        let e = cyl.entry(key).or_default();
        let item = (rel.dot(eta), *p);
        if *sg < 0 {
            e.0.push(item);
        } else {
            e.1.push(item);
        }
    }
    let mut segs = Vec::new();
    let mut left = Vec::new();
    let order = |a: &(f64, Point), b: &(f64, Point)| a.0.total_cmp(&b.0).then(a.1.lex_cmp(&b.1));
    for (_, (mut minus, mut plus)) in cyl {
        minus.sort_by(order);
        plus.sort_by(order);
        let k = minus.len().min(plus.len());
        for i in 0..k {
            segs.push((minus[i].1, plus[i].1));
        }
        left.extend(minus[k..].iter().map(|x| (x.1, -1)));
        left.extend(plus[k..].iter().map(|x| (x.1, 1)));
    }
    (segs, left)
}

/// Greedy nearest-neighbour pairing: sources in lexicographic order each
/// take the nearest unused target (ties to the lexicographically smaller
/// one). Returns `(source, target)` pairs and the unused points of both
/// lists.
fn greedy_pairs(mut sources: Vec<Point>, mut targets: Vec<Point>) -> (Vec<(Point, Point)>, Vec<Point>, Vec<Point>) {
    sources.sort_by(|a, b| a.lex_cmp(b));
    targets.sort_by(|a, b| a.lex_cmp(b));
    let mut used = vec![false; targets.len()];
    let mut pairs = Vec::new();
    let mut rest_src = Vec::new();
    for s in sources {
        let mut best: Option<(f64, usize)> = None;
        for (j, t) in targets.iter().enumerate() {
            if used[j] {
                continue;
            }
            let d = s.dist_sq(t);
            // targets are lex sorted, so strict < keeps the smaller on ties
            if best.is_none_or(|(bd, _)| d < bd) {
                best = Some((d, j));
            }
        }
        match best {
            Some((_, j)) => {
                used[j] = true;
                pairs.push((s, targets[j]));
            }
            None => rest_src.push(s),
        }
    }
    let rest_tgt = targets.into_iter().zip(used).filter(|(_, u)| !u).map(|(t, _)| t).collect();
    (pairs, rest_src, rest_tgt)
}

/// Pairs leftover inflow points with outflow points of the same cube by
/// greedy nearest neighbour. Returns segments (inflow to outflow) and the
/// `|N+ - N-|` points that remain.
pub fn boundary_match(leftovers: &[SignedPoint]) -> (Vec<(Point, Point)>, Vec<SignedPoint>) {
    let minus: Vec<Point> = leftovers.iter().filter(|x| x.1 < 0).map(|x| x.0).collect();
    let plus: Vec<Point> = leftovers.iter().filter(|x| x.1 > 0).map(|x| x.0).collect();
    let (pairs, rm, rp) = greedy_pairs(minus, plus);
    let rest = rm.into_iter().map(|p| (p, -1)).chain(rp.into_iter().map(|p| (p, 1))).collect();
    (pairs, rest)
}

/// Closes a current whose boundary is `atoms` (charges as returned by
/// `geometry::boundary`, integers in units of the quantum): every positive
/// atom is joined to a negative one by a segment from the positive to the
/// negative point, which cancels both.
pub fn close_current(atoms: &[(Point, f64)]) -> Result<Vec<(Point, Point)>> {
    let mut plus = Vec::new();
    let mut minus = Vec::new();
    for &(p, q) in atoms {
        let k = q.round();
        if (q - k).abs() > 1e-9 * q.abs().max(1.0) {
            return Err(Error::InvalidInput(format!("non-integer boundary charge {q}")));
        }
        let list = if k > 0.0 { &mut plus } else { &mut minus };
        for _ in 0..k.abs() as usize {
            list.push(p);
        }
    }
    if plus.len() != minus.len() {
        return Err(Error::FluxImbalance { plus: plus.len(), minus: minus.len() });
    }
    Ok(greedy_pairs(plus, minus).0)
}

/// Smooth test 1-form `b(x) dx_k` with `b = (1 - |x-c|^2/r^2)^4` on the ball.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TestForm {
    pub center: Point,
    pub radius: f64,
    pub component: usize,
}

impl TestForm {
    pub fn bump(&self, x: &Point) -> f64 {
        let q = x.dist_sq(&self.center) / (self.radius * self.radius);
        if q >= 1.0 {
            0.0
        } else {
            let t = 1.0 - q;
            t * t * t * t
        }
    }

    /// `<mu, omega>` by composite Gauss rules along each segment.
    pub fn pair_current(&self, mu: &SegmentCurrent) -> f64 {
        let rule = gauss_legendre(4);
        let k = self.component;
        let parts: Vec<f64> = mu
            .segments()
            .par_chunks(4096)
            .map(|chunk| {
                let mut acc = NeumaierSum::new();
                for s in chunk {
                    let v = s.vector();
                    if v[k] == 0.0 || segment_ball_gap(s, &self.center) >= self.radius {
                        continue;
                    }
                    let pieces = (s.length() / (0.25 * self.radius)).ceil().max(1.0) as usize;
                    let mut seg_acc = 0.0;
                    for p in 0..pieces {
                        for (x, w) in rule.nodes.iter().zip(&rule.weights) {
                            let t = (p as f64 + x) / pieces as f64;
                            seg_acc += w / pieces as f64 * self.bump(&s.at(t));
                        }
                    }
                    acc.add(s.weight * v[k] * seg_acc);
                }
                acc.value()
            })
            .collect();
        parts.into_iter().collect::<NeumaierSum>().value()
    }
}

fn segment_ball_gap(s: &OrientedSegment, c: &Point) -> f64 {
    let v = s.vector();
    let t = ((*c - s.start).dot(&v) / v.norm_sq()).clamp(0.0, 1.0);
    s.at(t).dist(c)
}

/// Coordinate bumps at three scales: radii `R, R/2, R/4` (with `R` half
/// the largest box extent), centered at the box center and at the center
/// shifted by `R/2` along each axis, one form per coordinate.
pub fn test_form_panel(psi: &FieldSpec) -> Vec<TestForm> {
    let d = psi.dim();
    let (lo, hi) = psi.support_box();
    let c = (lo + hi) * 0.5;
    let big = (0..d).map(|k| 0.5 * (hi[k] - lo[k])).fold(0.0, f64::max);
    let mut centers = vec![c];
    for k in 0..d {
        centers.push(c + Point::basis(k) * (0.5 * big));
        centers.push(c - Point::basis(k) * (0.5 * big));
    }
    let mut forms = Vec::new();
    for level in 0..3 {
        let radius = big / (1 << level) as f64;
        for center in &centers {
            for component in 0..d {
                forms.push(TestForm { center: *center, radius, component });
            }
        }
    }
    forms
}

/// Settings of the diagnostics computed after the construction.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DiagnosticsConfig {
    pub enabled: bool,
    /// Exponent for the fractional masses.
    pub s: f64,
    /// Pairs for the Monte-Carlo field energy.
    pub mc_samples: usize,
    /// Grid cells per axis for the cell-moment mass of the output; `None`
    /// picks 128 in the plane and 24 in space.
    pub cells_per_axis: Option<usize>,
}

impl Default for DiagnosticsConfig {
    fn default() -> Self {
        Self { enabled: true, s: 0.5, mc_samples: 4_000_000, cells_per_axis: None }
    }
}

/// Counts of the pipeline stages.
#[derive(Debug, Clone, Copy, Default, PartialEq)]
pub struct StageCounts {
    pub cubes: usize,
    pub qualifying_cubes: usize,
    pub lattice_points: usize,
    pub cylinder_segments: usize,
    pub boundary_segments: usize,
    pub closing_segments: usize,
    pub loops: usize,
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct Diagnostics {
    pub eps: f64,
    pub delta: f64,
    pub rho: f64,
    pub s: f64,
    /// `|mu|(R^d)`.
    pub mass_mu: f64,
    /// `||psi||_L1`.
    pub mass_psi: f64,
    /// Mass of the cylinder, in-cube and closing parts of `mu`.
    pub mass_cylinder: f64,
    pub mass_boundary: f64,
    pub mass_closing: f64,
    /// `|<mu - psi, omega>| / int |psi||omega|` over the test panel.
    pub pairing_errors: Vec<f64>,
    pub pairing_err_max: f64,
    pub ms_mu: f64,
    pub ms_psi: f64,
    pub ms_psi_sigma: f64,
    /// Fraction of cylinder-segment length whose tangent has cosine at
    /// least 0.9 with the cube's mean direction.
    pub direction_fidelity: f64,
    /// Largest `|sum of outward face fluxes|` of a cube, relative to the
    /// largest face flux.
    pub max_cube_divergence: f64,
    pub counts: StageCounts,
    pub runtime_s: f64,
}

impl Diagnostics {
    pub fn mass_error(&self) -> f64 {
        if self.mass_psi == 0.0 {
            self.mass_mu
        } else {
            (self.mass_mu - self.mass_psi).abs() / self.mass_psi
        }
    }

    pub fn ms_error(&self) -> f64 {
        if self.ms_psi == 0.0 {
            self.ms_mu.abs()
        } else {
            (self.ms_mu - self.ms_psi).abs() / self.ms_psi.abs()
        }
    }

    pub const CSV_HEADER: &'static str = "eps,delta,rho,mass_mu,mass_psi,pairing_err_max,Ms_mu,Ms_psi,runtime_s";

    pub fn csv_row(&self) -> String {
        format!(
            "{},{},{},{},{},{},{},{},{}",
            self.eps,
            self.delta,
            self.rho,
            self.mass_mu,
            self.mass_psi,
            self.pairing_err_max,
            self.ms_mu,
            self.ms_psi,
            self.runtime_s
        )
    }
}

#[derive(Debug, Clone)]
pub struct Approximation {
    pub current: SegmentCurrent,
    pub loops: Vec<PolyCurve>,
    pub diagnostics: Diagnostics,
}

/// Mean field and sampled maximum of `|psi|` on a cube (Gauss nodes of
/// order 4 per axis plus the center).
fn cube_samples(psi: &FieldSpec, cube: &Cube) -> (Point, f64) {
    let d = psi.dim();
    let rule = gauss_legendre(4);
    let n = rule.order();
    let mut mean = Point::ZERO;
    let mut max = psi.eval(&cube.center(d)).norm();
    for idx in 0..n.pow(d as u32) {
        let mut x = cube.min;
        let mut w = 1.0;
        let mut rest = idx;
        for k in 0..d {
            let j = rest % n;
            rest /= n;
            x.0[k] += cube.side * rule.nodes[j];
            w *= rule.weights[j];
        }
        let v = psi.eval(&x);
        mean += v * w;
        max = max.max(v.norm());
    }
    (mean, max)
}

struct CubeOutput {
    cylinder: Vec<(Point, Point)>,
    inner: Vec<(Point, Point)>,
    aligned_len: f64,
    cyl_len: f64,
    qualifies: bool,
    points: usize,
    divergence: f64,
}

/// Runs the construction and its diagnostics.
pub fn approximate(psi: &FieldSpec, p: &ApproxParams) -> Result<Approximation> {
    approximate_with(psi, p, &DiagnosticsConfig::default())
}

pub fn approximate_with(psi: &FieldSpec, p: &ApproxParams, dc: &DiagnosticsConfig) -> Result<Approximation> {
    let t0 = Instant::now();
    p.validate(psi)?;
    let d = psi.dim();
    let cover = Cover::new(psi, p.eps);

    // face fluxes and lattices, computed once per face
    let mut lattices: Vec<Vec<FaceLattice>> = Vec::with_capacity(d);
    let mut fluxes: Vec<Vec<f64>> = Vec::with_capacity(d);
    for axis in 0..d {
        let nf: usize = cover.face_dims(axis).iter().product();
        let lat = (0..nf)
            .into_par_iter()
            .map(|id| {
                let face = cover.face(axis, id);
                let flux = face_flux(psi, &face, p.face_order);
                build_lattice(&face, d, flux, p.delta).map(|l| (flux, l))
            })
            .collect::<Result<Vec<_>>>()?;
        let (f, l): (Vec<f64>, Vec<FaceLattice>) = lat.into_iter().unzip();
        fluxes.push(f);
        lattices.push(l);
    }

    let per_cube: Vec<CubeOutput> = (0..cover.num_cubes())
        .into_par_iter()
        .map(|id| {
            let cube = cover.cube(id);
            let mut pts: Vec<SignedPoint> = Vec::new();
            let mut div = NeumaierSum::new();
            for axis in 0..d {
                for (side, out_sign) in [(0usize, -1i8), (1, 1)] {
                    let mut idx = cube.index;
                    idx[axis] += side;
                    let fid = cover.face_id(axis, idx);
                    let lat = &lattices[axis][fid];
                    let f = fluxes[axis][fid];
                    div.add(out_sign as f64 * f);
                    pts.extend(lat.points.iter().map(|q| (*q, lat.sign * out_sign)));
                }
            }
            let divergence = div.value().abs();
            let npts = pts.len();
            let (mean, max) = cube_samples(psi, &cube);
            let qualifies = npts > 0 && max >= p.rho && mean.norm() > 0.0;
            let (cylinder, leftovers, aligned_len, cyl_len) = if qualifies {
                let eta = mean.normalized().expect("nonzero mean");
                let (segs, left) = cylinder_match(&pts, &eta, &cube.min, p.eps * p.eps, d);
                let mut aligned = 0.0;
                let mut total = 0.0;
                for (a, b) in &segs {
                    let v = *b - *a;
                    let l = v.norm();
                    total += l;
                    if v.dot(&eta) >= 0.9 * l {
                        aligned += l;
                    }
                }
                (segs, left, aligned, total)
            } else {
                (Vec::new(), pts, 0.0, 0.0)
            };
            let (inner, _) = boundary_match(&leftovers);
            CubeOutput { cylinder, inner, aligned_len, cyl_len, qualifies, points: npts, divergence }
        })
        .collect();

    let flux_scale = fluxes.iter().flatten().fold(0.0f64, |m, f| m.max(f.abs()));
    let mut counts = StageCounts { cubes: cover.num_cubes(), ..Default::default() };
    let mut unit_segments = Vec::new();
    let (mut aligned, mut cyl_len, mut max_div) = (0.0, 0.0, 0.0f64);
    let (mut len_cyl, mut len_in) = (NeumaierSum::new(), NeumaierSum::new());
    for c in &per_cube {
        counts.qualifying_cubes += c.qualifies as usize;
        counts.lattice_points += c.points;
        counts.cylinder_segments += c.cylinder.len();
        counts.boundary_segments += c.inner.len();
        aligned += c.aligned_len;
        cyl_len += c.cyl_len;
        max_div = max_div.max(c.divergence);
        for (a, b) in &c.cylinder {
            len_cyl.add(a.dist(b));
        }
        for (a, b) in &c.inner {
            len_in.add(a.dist(b));
        }
        unit_segments.extend(c.cylinder.iter().chain(&c.inner).copied());
    }
    // every lattice point is shared by two cubes; each side may or may not
    // have used it, so the open ends are found from the exact boundary
    let to_segments = |list: &[(Point, Point)], w: f64| -> Result<Vec<OrientedSegment>> {
        list.iter().map(|(a, b)| OrientedSegment::new(*a, *b, w)).collect()
    };
    let unit = SegmentCurrent::new(d, to_segments(&unit_segments, 1.0)?)?;
    let closing = close_current(&boundary(&unit, 0.0).atoms)?;
    counts.closing_segments = closing.len();
    let len_close: f64 = closing.iter().map(|(a, b)| a.dist(b)).collect::<NeumaierSum>().value();
    unit_segments.extend(closing);
    let current = SegmentCurrent::new(d, to_segments(&unit_segments, p.delta)?)?;
    let chain = boundary(&current, 0.0);
    if !chain.is_empty() {
        return Err(Error::NonzeroBoundary { atoms: chain.atoms });
    }
    let loops = loop_decompose(&current, 0.0, Some(p.delta))?;
    counts.loops = loops.len();

    let mut diag = Diagnostics {
        eps: p.eps,
        delta: p.delta,
        rho: p.rho,
        s: dc.s,
        mass_mu: current.mass(),
        mass_cylinder: p.delta * len_cyl.value(),
        mass_boundary: p.delta * len_in.value(),
        mass_closing: p.delta * len_close,
        direction_fidelity: if cyl_len > 0.0 { aligned / cyl_len } else { 1.0 },
        max_cube_divergence: if flux_scale > 0.0 { max_div / flux_scale } else { 0.0 },
        counts,
        ..Default::default()
    };
    if dc.enabled {
        diag.mass_psi = psi.l1_norm();
        let panel = test_form_panel(psi);
        diag.pairing_errors = panel
            .iter()
            .filter_map(|w| {
                let norm = psi.integrate(|x| psi.eval(x).norm() * w.bump(x));
                if norm <= 1e-12 * diag.mass_psi || norm == 0.0 {
                    return None;
                }
                let target = psi.integrate(|x| psi.eval(x)[w.component] * w.bump(x));
                Some((w.pair_current(&current) - target).abs() / norm)
            })
            .collect();
        diag.pairing_err_max = diag.pairing_errors.iter().copied().fold(0.0, f64::max);
        let cells = dc.cells_per_axis.unwrap_or(if d == 2 { 128 } else { 24 });
        diag.ms_mu = fractional_mass_cells(&current, dc.s, cells)?;
        let (e, sig) = field_riesz_energy(psi, dc.s, dc.mc_samples, p.seed)?;
        diag.ms_psi = e;
        diag.ms_psi_sigma = sig;
    }
    diag.runtime_s = t0.elapsed().as_secs_f64();
    Ok(Approximation { current, loops, diagnostics: diag })
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::sync::Arc;

    fn unit_box_field(dim: usize, f: impl Fn(&Point) -> Point + Send + Sync + 'static) -> FieldSpec {
        let hi = if dim == 2 { Point::new2(1.0, 1.0) } else { Point::new3(1.0, 1.0, 1.0) };
        FieldSpec::custom(dim, Point::ZERO, hi, Arc::new(f)).unwrap()
    }

    #[test]
    fn cover_counts() {
        let f2 = unit_box_field(2, |_| Point::ZERO);
        assert_eq!(cube_cover(&f2, 0.25).unwrap().len(), 16);
        let f3 = unit_box_field(3, |_| Point::ZERO);
        assert_eq!(cube_cover(&f3, 0.5).unwrap().len(), 8);
        assert_eq!(cube_cover(&f2, 3.0).unwrap().len(), 1);
        assert_eq!(cube_cover(&f2, 0.3).unwrap().len(), 16);
        let cubes = cube_cover(&f2, 0.5).unwrap();
        assert_eq!(cubes[1].index, [0, 1, 0]);
        assert_eq!(cubes[2].min, Point::new2(0.5, 0.0));
    }

    #[test]
    fn lattice_counts_and_scaling() {
        let face = Face { axis: 0, index: [0; 3], min: Point::ZERO, side: 1.0 };
        // flux = delta * area: spacing 1, one point
        let l = build_lattice(&face, 2, 1e-3, 1e-3).unwrap();
        assert_eq!((l.points.len(), l.spacing), (1, 1.0));
        let l3 = build_lattice(&face, 3, -0.01, 1e-4).unwrap();
        assert_eq!(l3.points.len(), 100);
        assert_eq!(l3.sign, -1);
        assert!(l3.points.iter().all(|p| p[0] == 0.0 && p[1] > 0.0 && p[1] < 1.0));
        assert!(build_lattice(&face, 2, 0.0, 1e-3).unwrap().points.is_empty());
        let a = build_lattice(&face, 3, 0.37, 1e-3).unwrap().spacing;
        let b = build_lattice(&face, 3, 0.37, 2e-3).unwrap().spacing;
        assert!((b / a - 2f64.sqrt()).abs() < 1e-12);
    }

    #[test]
    fn constant_field_pairs_straight_across() {
        // psi = e1 inside a single cube (not divergence-free at the box
        // faces, which is fine for matching)
        let f = unit_box_field(2, |_| Point::new2(1.0, 0.0));
        let cube = cube_cover(&f, 1.0).unwrap()[0];
        let cover = Cover::new(&f, 1.0);
        let mut pts = Vec::new();
        for axis in 0..2 {
            for (side, s) in [(0usize, -1i8), (1, 1)] {
                let mut idx = cube.index;
                idx[axis] += side;
                let face = cover.face(axis, cover.face_id(axis, idx));
                let lat = build_lattice(&face, 2, face_flux(&f, &face, 8), 0.01).unwrap();
                pts.extend(lat.points.iter().map(|q| (*q, lat.sign * s)));
            }
        }
        assert_eq!(pts.len(), 200);
        let (segs, left) = cylinder_match(&pts, &Point::new2(1.0, 0.0), &cube.min, 1e-3, 2);
        assert!(left.is_empty());
        assert_eq!(segs.len(), 100);
        assert!(segs.iter().all(|(a, b)| a[1] == b[1] && a[0] == 0.0 && b[0] == 1.0));
    }

    #[test]
    fn boundary_match_leaves_the_imbalance() {
        let p = |x: f64| Point::new2(x, 0.0);
        let pts = vec![(p(0.0), -1), (p(1.0), 1), (p(2.0), 1), (p(3.0), 1), (p(4.0), 1), (p(5.0), -1)];
        let (segs, rest) = boundary_match(&pts);
        assert_eq!(segs, vec![(p(0.0), p(1.0)), (p(5.0), p(4.0))]);
        assert_eq!(rest.len(), 2);
        let (segs, rest) = boundary_match(&[(p(0.0), 1), (p(1.0), 1), (p(2.0), 1)]);
        assert!(segs.is_empty());
        assert_eq!(rest.len(), 3);
    }

    #[test]
    fn closing_two_atoms() {
        let (a, b) = (Point::new2(0.0, 0.0), Point::new2(1.0, 2.0));
        assert!(close_current(&[]).unwrap().is_empty());
        // boundary +1 at b (flow arrives), -1 at a (flow leaves): close b -> a
        assert_eq!(close_current(&[(a, -1.0), (b, 1.0)]).unwrap(), vec![(b, a)]);
        assert!(matches!(close_current(&[(a, 1.0)]), Err(Error::FluxImbalance { .. })));
    }

    #[test]
    fn frame_is_orthonormal() {
        let eta = Point::new3(0.3, -0.4, 0.866).normalized().unwrap();
        let f = cylinder_frame(&eta, 3);
        assert_eq!(f.len(), 2);
        for (i, a) in f.iter().enumerate() {
            assert!(a.dot(&eta).abs() < 1e-15);
            assert!((a.norm() - 1.0).abs() < 1e-15);
            for b in &f[i + 1..] {
                assert!(a.dot(b).abs() < 1e-15);
            }
        }
    }

    #[test]
    fn zero_field_gives_empty_output() {
        let z = FieldSpec::zero(2).unwrap();
        let out = approximate(&z, &ApproxParams::new(0.25, 1e-3, 0.0, 2)).unwrap();
        assert!(out.current.is_empty());
        assert!(out.loops.is_empty());
        assert_eq!(out.diagnostics.mass_mu, 0.0);
    }

    #[test]
    fn dimension_mismatch_is_rejected() {
        let z = FieldSpec::zero(2).unwrap();
        assert!(approximate(&z, &ApproxParams::new(0.25, 1e-3, 0.0, 3)).is_err());
    }
}
