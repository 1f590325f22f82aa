//! Divergence-free analytic vector fields with compact support.

use std::f64::consts::PI;
use std::fmt;
use std::sync::Arc;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::point::{check_dim, Point};
use crate::quadrature::{gauss_legendre, NeumaierSum};
use crate::riesz::check_s;

pub type FieldFn = Arc<dyn Fn(&Point) -> Point + Send + Sync>;

#[derive(Clone)]
pub enum FieldKind {
    /// `psi = (-d2 phi, d1 phi)` with `phi = A (1 - |x-c|^2/R^2)^4` on the disc.
    CurlBump2d {
        center: Point,
        radius: f64,
        amplitude: f64,
    },
    /// `psi = grad(phi) x a = curl(phi a)` with the same `phi` on the ball.
    CurlBump3d {
        center: Point,
        radius: f64,
        amplitude: f64,
        axis: Point,
    },
    Zero,
    /// User-supplied field; divergence-freeness is the caller's promise.
    Custom(FieldFn),
}

impl fmt::Debug for FieldKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            FieldKind::CurlBump2d { center, radius, amplitude } => f
                .debug_struct("CurlBump2d")
                .field("center", center)
                .field("radius", radius)
                .field("amplitude", amplitude)
                .finish(),
            FieldKind::CurlBump3d { center, radius, amplitude, axis } => f
                .debug_struct("CurlBump3d")
                .field("center", center)
                .field("radius", radius)
                .field("amplitude", amplitude)
                .field("axis", axis)
                .finish(),
            FieldKind::Zero => f.write_str("Zero"),
            FieldKind::Custom(_) => f.write_str("Custom(..)"),
        }
    }
}

/// A field together with an axis-aligned box outside which it vanishes.
#[derive(Debug, Clone)]
pub struct FieldSpec {
    kind: FieldKind,
    dim: usize,
    lo: Point,
    hi: Point,
}

impl FieldSpec {
    pub fn curl_bump_2d(center: Point, radius: f64, amplitude: f64) -> Result<Self> {
        check_bump(&center, radius, amplitude)?;
        let r = Point::new2(radius, radius);
        Ok(Self { kind: FieldKind::CurlBump2d { center, radius, amplitude }, dim: 2, lo: center - r, hi: center + r })
    }

    pub fn curl_bump_3d(center: Point, radius: f64, amplitude: f64, axis: Point) -> Result<Self> {
        check_bump(&center, radius, amplitude)?;
        if !axis.is_finite() {
            return Err(Error::InvalidInput("axis must be finite".into()));
        }
        let r = Point::new3(radius, radius, radius);
        Ok(Self {
            kind: FieldKind::CurlBump3d { center, radius, amplitude, axis },
            dim: 3,
            lo: center - r,
            hi: center + r,
        })
    }

    /// The zero field on the unit box.
    pub fn zero(dim: usize) -> Result<Self> {
        check_dim(dim)?;
        let mut hi = Point::ZERO;
        for k in 0..dim {
            hi.0[k] = 1.0;
        }
        Ok(Self { kind: FieldKind::Zero, dim, lo: Point::ZERO, hi })
    }

    pub fn custom(dim: usize, lo: Point, hi: Point, f: FieldFn) -> Result<Self> {
        check_dim(dim)?;
        if !(lo.is_finite() && hi.is_finite()) || (0..dim).any(|k| !(hi[k] > lo[k])) {
            return Err(Error::InvalidInput("custom field needs a bounded, nondegenerate support box".into()));
        }
        Ok(Self { kind: FieldKind::Custom(f), dim, lo, hi })
    }

    pub fn kind(&self) -> &FieldKind {
        &self.kind
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn support_box(&self) -> (Point, Point) {
        (self.lo, self.hi)
    }

    /// Supporting ball of the presets.
    pub fn support_ball(&self) -> Option<(Point, f64)> {
        match self.kind {
            FieldKind::CurlBump2d { center, radius, .. } | FieldKind::CurlBump3d { center, radius, .. } => {
                Some((center, radius))
            }
            _ => None,
        }
    }

    pub fn is_zero(&self) -> bool {
        matches!(self.kind, FieldKind::Zero)
            || matches!(self.kind, FieldKind::CurlBump2d { amplitude, .. } | FieldKind::CurlBump3d { amplitude, .. } if amplitude == 0.0)
    }

    /// `psi(x / lambda)` supported on the dilated box. Only presets and the
    /// zero field can be dilated.
    pub fn dilated(&self, lambda: f64) -> Result<Self> {
        if !(lambda > 0.0 && lambda.is_finite()) {
            return Err(Error::InvalidInput(format!("dilation must be positive, got {lambda}")));
        }
        // phi_l(x) = l phi(x / l) has grad phi_l(x) = (grad phi)(x / l)
        match self.kind {
            FieldKind::CurlBump2d { center, radius, amplitude } => {
                Self::curl_bump_2d(center * lambda, radius * lambda, amplitude * lambda)
            }
            FieldKind::CurlBump3d { center, radius, amplitude, axis } => {
                Self::curl_bump_3d(center * lambda, radius * lambda, amplitude * lambda, axis)
            }
            FieldKind::Zero => Ok(Self { lo: self.lo * lambda, hi: self.hi * lambda, ..self.clone() }),
            FieldKind::Custom(_) => Err(Error::InvalidInput("custom fields cannot be dilated".into())),
        }
    }

    pub fn eval(&self, x: &Point) -> Point {
        match &self.kind {
            FieldKind::CurlBump2d { center, radius, amplitude } => {
                let g = bump_gradient(x, center, *radius, *amplitude);
                Point::new2(-g[1], g[0])
            }
            FieldKind::CurlBump3d { center, radius, amplitude, axis } => {
                bump_gradient(x, center, *radius, *amplitude).cross(axis)
            }
            FieldKind::Zero => Point::ZERO,
            FieldKind::Custom(f) => {
                if (0..self.dim).any(|k| x[k] < self.lo[k] || x[k] > self.hi[k]) {
                    Point::ZERO
                } else {
                    f(x)
                }
            }
        }
    }

    /// `int f(x) dx` over the support. Ball presets use polar (spherical)
    /// coordinates about the center; other fields a composite Gauss rule on
    /// the box.
    pub fn integrate<F: Fn(&Point) -> f64 + Sync>(&self, f: F) -> f64 {
        let rule = gauss_legendre(8);
        if let Some((c, r)) = self.support_ball() {
            let panels = 32;
            let rows: Vec<f64> = (0..panels * rule.order())
                .into_par_iter()
                .map(|idx| {
                    let (p, q) = (idx / rule.order(), idx % rule.order());
                    let rad = r * (p as f64 + rule.nodes[q]) / panels as f64;
                    let wr = rule.weights[q] * r / panels as f64;
                    let mut acc = NeumaierSum::new();
                    if self.dim == 2 {
                        let na = 256;
                        for k in 0..na {
                            let th = 2.0 * PI * (k as f64 + 0.5) / na as f64;
                            acc.add(f(&(c + Point::new2(rad * th.cos(), rad * th.sin()))));
                        }
                        wr * rad * 2.0 * PI / na as f64 * acc.value()
                    } else {
                        let (npol, naz) = (32, 64);
                        let pr = gauss_legendre(npol);
                        for (z, wz) in pr.nodes.iter().zip(&pr.weights) {
                            let z = 2.0 * z - 1.0;
                            let rho = (1.0 - z * z).sqrt();
                            for k in 0..naz {
                                let ph = 2.0 * PI * (k as f64 + 0.5) / naz as f64;
                                let dir = Point::new3(rho * ph.cos(), rho * ph.sin(), z);
                                acc.add(2.0 * wz * f(&(c + dir * rad)));
                            }
                        }
                        wr * rad * rad * 2.0 * PI / naz as f64 * acc.value()
                    }
                })
                .collect();
            return rows.into_iter().collect::<NeumaierSum>().value();
        }
        let panels = if self.dim == 2 { 48 } else { 12 };
        let n = panels * rule.order();
        let h: Vec<f64> = (0..self.dim).map(|k| (self.hi[k] - self.lo[k]) / panels as f64).collect();
        let node = |k: usize, i: usize| {
            let (p, q) = (i / rule.order(), i % rule.order());
            (self.lo[k] + h[k] * (p as f64 + rule.nodes[q]), rule.weights[q] * h[k])
        };
        let rows: Vec<f64> = (0..n)
            .into_par_iter()
            .map(|i| {
                let (x, wx) = node(0, i);
                let mut acc = NeumaierSum::new();
                for j in 0..n {
                    let (y, wy) = node(1, j);
                    if self.dim == 2 {
                        acc.add(wy * f(&Point::new2(x, y)));
                    } else {
                        for l in 0..n {
                            let (z, wz) = node(2, l);
                            acc.add(wy * wz * f(&Point::new3(x, y, z)));
                        }
                    }
                }
                wx * acc.value()
            })
            .collect();
        rows.into_iter().collect::<NeumaierSum>().value()
    }

    /// `||psi||_L1` by quadrature.
    pub fn l1_norm(&self) -> f64 {
        if self.is_zero() {
            return 0.0;
        }
        self.integrate(|x| self.eval(x).norm())
    }
}

fn check_bump(center: &Point, radius: f64, amplitude: f64) -> Result<()> {
    if !(radius > 0.0 && radius.is_finite() && amplitude.is_finite() && center.is_finite()) {
        return Err(Error::InvalidInput(format!("bump needs finite center, radius > 0 (got {radius})")));
    }
    Ok(())
}

/// Gradient of `A (1 - |x-c|^2/R^2)^4`, zero outside the ball.
fn bump_gradient(x: &Point, c: &Point, r: f64, a: f64) -> Point {
    let d = *x - *c;
    let q = d.norm_sq() / (r * r);
    if q >= 1.0 {
        return Point::ZERO;
    }
    let t = 1.0 - q;
    d * (-8.0 * a * t * t * t / (r * r))
}

/// Samples per seeded batch for the field energy.
const MC_BATCH: usize = 1 << 16;

/// Monte-Carlo estimate of `int int psi(x).psi(y) |x-y|^-s dx dy` over
/// uniform pairs in the support box, with its standard error.
pub fn field_riesz_energy(psi: &FieldSpec, s: f64, n_samples: usize, seed: u64) -> Result<(f64, f64)> {
    check_s(s)?;
    if n_samples < 1000 {
        return Err(Error::InvalidInput(format!("need at least 10^3 samples, got {n_samples}")));
    }
    if psi.is_zero() {
        return Ok((0.0, 0.0));
    }
    let d = psi.dim();
    let (lo, hi) = psi.support_box();
    let vol: f64 = (0..d).map(|k| hi[k] - lo[k]).product();
    let scale = vol * vol;
    let batches = n_samples.div_ceil(MC_BATCH);
    let sums: Vec<(f64, f64)> = (0..batches)
        .into_par_iter()
        .map(|b| {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            rng.set_stream(b as u64);
            let count = MC_BATCH.min(n_samples - b * MC_BATCH);
            let mut s1 = NeumaierSum::new();
            let mut s2 = NeumaierSum::new();
            let draw = |rng: &mut ChaCha8Rng| {
                let mut p = Point::ZERO;
                for k in 0..d {
                    p.0[k] = lo[k] + (hi[k] - lo[k]) * rng.random::<f64>();
                }
                p
            };
            for _ in 0..count {
                let x = draw(&mut rng);
                let y = draw(&mut rng);
                let r = x.dist(&y);
                let v = if r > 0.0 { scale * psi.eval(&x).dot(&psi.eval(&y)) * r.powf(-s) } else { 0.0 };
                s1.add(v);
                s2.add(v * v);
            }
            (s1.value(), s2.value())
        })
        .collect();
    let (mut t1, mut t2) = (NeumaierSum::new(), NeumaierSum::new());
    for (a, b) in sums {
        t1.add(a);
        t2.add(b);
    }
    let nf = n_samples as f64;
    let mean = t1.value() / nf;
    let var = (t2.value() / nf - mean * mean).max(0.0) * nf / (nf - 1.0);
    Ok((mean, (var / nf).sqrt()))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn divergence(f: &FieldSpec, x: &Point, h: f64) -> f64 {
        (0..f.dim())
            .map(|k| {
                let e = Point::basis(k) * h;
                (f.eval(&(*x + e))[k] - f.eval(&(*x - e))[k]) / (2.0 * h)
            })
            .sum()
    }

    #[test]
    fn presets_are_divergence_free_and_supported() {
        let f2 = FieldSpec::curl_bump_2d(Point::new2(0.1, -0.2), 0.8, 1.3).unwrap();
        let f3 = FieldSpec::curl_bump_3d(Point::new3(0.0, 0.1, 0.2), 0.7, 0.9, Point::new3(0.3, -0.5, 0.8)).unwrap();
        for f in [&f2, &f3] {
            let (lo, hi) = f.support_box();
            for i in 0..7 {
                let t = (i as f64 + 0.5) / 7.0;
                let mut x = lo;
                for k in 0..f.dim() {
                    x.0[k] = lo[k] + (hi[k] - lo[k]) * (t + 0.13 * k as f64).fract();
                }
                let scale = f.eval(&x).norm().max(1e-3);
                assert!(divergence(f, &x, 1e-5).abs() < 1e-6 * scale.max(1.0));
            }
            // zero on the box faces
            let mut edge = lo;
            edge.0[1] = 0.5 * (lo[1] + hi[1]);
            assert_eq!(f.eval(&edge), Point::ZERO);
        }
    }

    #[test]
    fn curl_bump_l1_norm() {
        // ||psi||_L1 = 2 pi int_0^R 8 A r/R^2 (1-r^2/R^2)^3 r dr = 16 pi A R (16/315)
        let (r, a) = (0.8, 1.3);
        let f = FieldSpec::curl_bump_2d(Point::new2(0.1, -0.2), r, a).unwrap();
        let want = 16.0 * PI * a * r * 16.0 / 315.0;
        assert!((f.l1_norm() - want).abs() < 1e-9 * want);
    }

    #[test]
    fn zero_field_energy() {
        let z = FieldSpec::zero(2).unwrap();
        assert_eq!(field_riesz_energy(&z, 0.5, 1000, 3).unwrap(), (0.0, 0.0));
        assert_eq!(z.l1_norm(), 0.0);
        assert!(field_riesz_energy(&z, 0.5, 10, 3).is_err());
    }

    #[test]
    fn dilation_matches_definition() {
        let f = FieldSpec::curl_bump_2d(Point::new2(0.2, 0.0), 0.5, 2.0).unwrap();
        let g = f.dilated(2.0).unwrap();
        let x = Point::new2(0.3, 0.1);
        let a = g.eval(&(x * 2.0));
        let b = f.eval(&x);
        assert!(a.dist(&b) < 1e-14 * b.norm());
    }
}
