//! Fourier-side representation of segment currents.
//!
//! Transforms use the convention `F[f](xi) = int f(x) exp(-i x.xi) dx`.

use std::f64::consts::PI;

use num_complex::Complex64;
use rayon::prelude::*;
use statrs::function::gamma::ln_gamma;

use crate::error::{Error, Result};
use crate::geometry::{boundary, default_merge_tol, SegmentCurrent};
use crate::perimeter::PlanarRegion;
use crate::point::Point;
use crate::quadrature::{gauss_legendre, NeumaierSum};
use crate::riesz::check_s;

/// `c(alpha, d) = 2^(d-alpha) pi^(d/2) Gamma((d-alpha)/2) / Gamma(alpha/2)`,
/// the constant in `F[|x|^-alpha] = c(alpha, d) |xi|^(alpha-d)`.
pub fn riesz_constant(alpha: f64, d: usize) -> Result<f64> {
    let df = d as f64;
    if d == 0 || !(alpha > 0.0 && alpha < df) {
        return Err(Error::Domain(format!("riesz_constant needs 0 < alpha < d, got alpha={alpha}, d={d}")));
    }
    let ln = (df - alpha) * std::f64::consts::LN_2 + 0.5 * df * PI.ln() + ln_gamma(0.5 * (df - alpha))
        - ln_gamma(0.5 * alpha);
    Ok(ln.exp())
}

#[inline]
fn sinc(x: f64) -> f64 {
    if x.abs() < 1e-4 {
        let x2 = x * x;
        1.0 - x2 / 6.0 + x2 * x2 / 120.0
    } else {
        x.sin() / x
    }
}

/// `int_seg exp(-i x.xi) ds = L exp(-i m.xi) sinc(L tau.xi / 2)` with `m`
/// the midpoint.
#[inline]
fn segment_exp_integral(mid: Point, vec: Point, xi: &Point) -> Complex64 {
    let phase = -mid.dot(xi);
    let amp = sinc(0.5 * vec.dot(xi));
    Complex64::from_polar(amp, phase)
}

/// A frequency with the transform of the vector measure there.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FourierSample {
    pub xi: Point,
    pub value: [Complex64; 3],
}

/// `F[mu](xi) = sum_seg w tau int_seg exp(-i x.xi) ds`, exact up to rounding.
pub fn fourier_of_current(mu: &SegmentCurrent, xi: Point) -> FourierSample {
    let mut re = [NeumaierSum::new(); 3];
    let mut im = [NeumaierSum::new(); 3];
    for s in mu.segments() {
        let v = s.vector();
        let e = segment_exp_integral(s.midpoint(), v, &xi) * s.weight;
        for k in 0..mu.dim() {
            // w tau L = w (end - start)
            re[k].add(e.re * v.0[k]);
            im[k].add(e.im * v.0[k]);
        }
    }
    let mut value = [Complex64::new(0.0, 0.0); 3];
    for k in 0..3 {
        value[k] = Complex64::new(re[k].value(), im[k].value());
    }
    FourierSample { xi, value }
}

/// Precomputed segment data for fast `|F|^2` evaluation.
struct SegTable {
    mid: Vec<Point>,
    wvec: Vec<Point>,
    vec: Vec<Point>,
}

impl SegTable {
    fn new(mu: &SegmentCurrent) -> Self {
        Self {
            mid: mu.segments().iter().map(|s| s.midpoint()).collect(),
            wvec: mu.segments().iter().map(|s| s.vector() * s.weight).collect(),
            vec: mu.segments().iter().map(|s| s.vector()).collect(),
        }
    }

    fn power(&self, xi: &Point) -> f64 {
        let mut acc = [Complex64::new(0.0, 0.0); 3];
        for ((m, wv), v) in self.mid.iter().zip(&self.wvec).zip(&self.vec) {
            let e = segment_exp_integral(*m, *v, xi);
            for k in 0..3 {
                acc[k] += e * wv.0[k];
            }
        }
        acc.iter().map(|c| c.norm_sqr()).sum()
    }
}

/// Truncated-annulus quadrature settings.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SpectralConfig {
    pub radial_nodes: usize,
    pub angular_nodes: usize,
    pub xi_min: f64,
    pub xi_max: f64,
}

impl Default for SpectralConfig {
    fn default() -> Self {
        Self { radial_nodes: 2000, angular_nodes: 256, xi_min: 1e-2, xi_max: 1e3 }
    }
}

/// Gauss order of the radial panels.
const RADIAL_ORDER: usize = 8;

impl SpectralConfig {
    pub fn validate(&self) -> Result<()> {
        if self.radial_nodes < 8 || self.angular_nodes < 8 {
            return Err(Error::InvalidInput("spectral node counts must be at least 8".into()));
        }
        if !(self.xi_min > 0.0 && self.xi_max > self.xi_min && self.xi_max.is_finite()) {
            return Err(Error::InvalidInput(format!(
                "need 0 < xi_min < xi_max, got [{}, {}]",
                self.xi_min, self.xi_max
            )));
        }
        Ok(())
    }

    /// Radial nodes and weights: geometric panels (ratio 2) from `xi_min` up
    /// to `r_c`, where the integrand stops being a smooth power law, then
    /// panels of equal width up to `xi_max`. `scale` is the diameter of the
    /// current, which fixes the oscillation period `~ 2 pi / scale`.
    fn radial_rule(&self, scale: f64) -> Vec<(f64, f64)> {
        let panels = (self.radial_nodes / RADIAL_ORDER).max(2);
        let rc = (4.0 / scale.max(1e-300)).clamp(self.xi_min, self.xi_max);
        let mut geo = if rc > self.xi_min { (rc / self.xi_min).log2().ceil() as usize } else { 0 };
        geo = geo.min(panels / 2);
        let uni = panels - geo;
        let mut edges = Vec::with_capacity(panels + 1);
        if geo > 0 {
            let ratio = (rc / self.xi_min).powf(1.0 / geo as f64);
            for k in 0..geo {
                edges.push(self.xi_min * ratio.powi(k as i32));
            }
        }
        let start = if geo > 0 { rc } else { self.xi_min };
        for k in 0..=uni {
            edges.push(start + (self.xi_max - start) * k as f64 / uni as f64);
        }
        let rule = gauss_legendre(RADIAL_ORDER);
        let mut out = Vec::with_capacity(panels * RADIAL_ORDER);
        for w in edges.windows(2) {
            let h = w[1] - w[0];
            for (x, wt) in rule.nodes.iter().zip(&rule.weights) {
                out.push((w[0] + h * x, wt * h));
            }
        }
        out
    }
}

/// Spectral estimate with a flag telling whether the current had a
/// boundary (then the low-frequency truncation dominates the error).
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SpectralEstimate {
    pub value: f64,
    pub has_boundary: bool,
}

const GOLDEN: f64 = 0.618_033_988_749_894_9;

/// `int |xi|^(s-d) g(xi) d xi` over the annulus, where `g` is even in `xi`.
/// The angular rule is the trapezoid rule on a half circle (2-D) or
/// Gauss-in-`cos(theta)` times trapezoid-in-`phi` on a half sphere (3-D);
/// successive radial nodes rotate the angular grid by the golden ratio so
/// that aliasing errors at high frequency do not accumulate coherently.
fn annulus_integral<G: Fn(&Point) -> f64 + Sync>(dim: usize, s: f64, cfg: &SpectralConfig, scale: f64, g: G) -> f64 {
    let radial = cfg.radial_rule(scale);
    let na = cfg.angular_nodes;
    let rows: Vec<f64> = radial
        .par_iter()
        .enumerate()
        .map(|(j, &(r, wr))| {
            let shift = (j as f64 * GOLDEN).fract();
            let ang = if dim == 2 {
                let mut acc = NeumaierSum::new();
                for k in 0..na {
                    let th = PI * (k as f64 + shift) / na as f64;
                    acc.add(g(&Point::new2(r * th.cos(), r * th.sin())));
                }
                // half circle, doubled: 2 * (pi / na) * sum
                2.0 * PI / na as f64 * acc.value()
            } else {
                let npol = (na / 2).max(8);
                let panels = npol.div_ceil(8);
                let rule = gauss_legendre(8);
                let mut acc = NeumaierSum::new();
                for p in 0..panels {
                    let (z0, z1) = (p as f64 / panels as f64, (p + 1) as f64 / panels as f64);
                    for (x, wz) in rule.nodes.iter().zip(&rule.weights) {
                        let z = z0 + (z1 - z0) * x;
                        let rho = (1.0 - z * z).max(0.0).sqrt();
                        for k in 0..na {
                            let ph = 2.0 * PI * (k as f64 + shift) / na as f64;
                            let dir = Point::new3(rho * ph.cos(), rho * ph.sin(), z);
                            acc.add(wz * (z1 - z0) * g(&(dir * r)));
                        }
                    }
                }
                // upper hemisphere (z in [0,1]) doubled
                2.0 * 2.0 * PI / na as f64 * acc.value()
            };
            let jac = r.powi(dim as i32 - 1);
            wr * r.powf(s - dim as f64) * jac * ang
        })
        .collect();
    rows.into_iter().collect::<NeumaierSum>().value()
}

/// `(2 pi)^-d c(s, d) int |F[mu]|^2 |xi|^(s-d) d xi` over the truncated
/// annulus.
pub fn spectral_mass(mu: &SegmentCurrent, s: f64, cfg: &SpectralConfig) -> Result<SpectralEstimate> {
    check_s(s)?;
    cfg.validate()?;
    let d = mu.dim();
    if mu.is_empty() {
        return Ok(SpectralEstimate { value: 0.0, has_boundary: false });
    }
    let has_boundary = !boundary(mu, default_merge_tol(mu)).is_empty();
    let table = SegTable::new(mu);
    let integral = annulus_integral(d, s, cfg, mu.bbox_diameter(), |xi| table.power(xi));
    let c = riesz_constant(s, d)?;
    Ok(SpectralEstimate { value: (2.0 * PI).powi(-(d as i32)) * c * integral, has_boundary })
}

/// Angular mean of `|F[mu]|^2` at each radial node of the configuration.
pub fn radial_profile(mu: &SegmentCurrent, cfg: &SpectralConfig) -> Result<Vec<(f64, f64)>> {
    cfg.validate()?;
    let table = SegTable::new(mu);
    let radial = cfg.radial_rule(mu.bbox_diameter());
    let na = cfg.angular_nodes;
    let d = mu.dim();
    Ok(radial
        .par_iter()
        .map(|&(r, _)| {
            let mut acc = NeumaierSum::new();
            for k in 0..na {
                let th = PI * (k as f64 + 0.5) / na as f64;
                let xi = if d == 2 {
                    Point::new2(r * th.cos(), r * th.sin())
                } else {
                    Point::new3(r * th.cos(), 0.0, r * th.sin())
                };
                acc.add(table.power(&xi));
            }
            (r, acc.value() / na as f64)
        })
        .collect())
}

/// Fourier transform of the indicator of a polygonal region, by the
/// divergence theorem: `(i/|xi|^2) sum_edges (xi.nu) L exp(-i m.xi) sinc(L tau.xi/2)`
/// with `nu` the outward (right-hand) normal of each oriented edge.
pub fn indicator_fourier(region: &PlanarRegion, xi: Point) -> Complex64 {
    let r2 = xi.norm_sq();
    if r2 == 0.0 {
        return Complex64::new(region.area(), 0.0);
    }
    let mut re = NeumaierSum::new();
    let mut im = NeumaierSum::new();
    for c in region.boundary_curves() {
        for (a, b) in c.edges() {
            let v = b - a;
            let nu_len = Point::new2(v[1], -v[0]); // L * nu
            let e = segment_exp_integral((a + b) * 0.5, v, &xi) * xi.dot(&nu_len);
            re.add(e.re);
            im.add(e.im);
        }
    }
    // multiply by i / |xi|^2
    Complex64::new(-im.value(), re.value()) / r2
}

/// Midpoint-rule transform of the indicator on a `cells x cells` grid over
/// the bounding box. Validation fallback only.
pub fn indicator_fourier_raster(region: &PlanarRegion, xi: Point, cells: usize) -> Complex64 {
    let (lo, hi) = region.bbox();
    let (hx, hy) = ((hi[0] - lo[0]) / cells as f64, (hi[1] - lo[1]) / cells as f64);
    let mut re = NeumaierSum::new();
    let mut im = NeumaierSum::new();
    for i in 0..cells {
        for j in 0..cells {
            let p = Point::new2(lo[0] + (i as f64 + 0.5) * hx, lo[1] + (j as f64 + 0.5) * hy);
            if region.contains(&p) {
                let ph = -p.dot(&xi);
                re.add(ph.cos());
                im.add(ph.sin());
            }
        }
    }
    Complex64::new(re.value(), im.value()) * (hx * hy)
}

/// `(2 pi)^-2 c(s, 2) int |xi|^s |F[chi_E]|^2 d xi`, the spectral side of
/// `s^2 P_s(E) = M_s(boundary of E)`.
pub fn spectral_perimeter(region: &PlanarRegion, s: f64, cfg: &SpectralConfig) -> Result<f64> {
    check_s(s)?;
    cfg.validate()?;
    let scale = region.diameter();
    // |xi|^s |F|^2 = |xi|^(s-2) (|xi|^2 |F|^2)
    let integral = annulus_integral(2, s, cfg, scale, |xi| xi.norm_sq() * indicator_fourier(region, *xi).norm_sqr());
    Ok((2.0 * PI).powi(-2) * riesz_constant(s, 2)? * integral)
}

/// Both sides of the perimeter identity for a simple counterclockwise
/// polygon: the spectral value and `s^2 P_s(E)` from the boundary mass.
pub fn perimeter_identity_check(
    polygon: &crate::geometry::PolyCurve,
    s: f64,
    cfg: &SpectralConfig,
) -> Result<(f64, f64)> {
    let region = PlanarRegion::new(polygon.clone(), Vec::new())?;
    let spectral = spectral_perimeter(&region, s, cfg)?;
    let p = crate::perimeter::boundary_mass_perimeter(&region, s, &crate::riesz::FracParams::new(s))?;
    Ok((spectral, s * s * p))
}
