use std::ops::{Add, AddAssign, Index, Mul, Neg, Sub, SubAssign};

use crate::error::{Error, Result};

/// Largest ambient dimension the crate stores inline.
pub const MAX_DIM: usize = 3;

/// A point (or vector) in R^2 or R^3.
///
/// Coordinates are stored inline in a fixed array; planar points keep a zero
/// third coordinate so that every vector operation is dimension-agnostic. The
/// ambient dimension itself is carried by the containers (`PolyCurve`,
/// `SegmentCurrent`), never by the point.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct Point(pub [f64; MAX_DIM]);

impl Point {
    pub const ZERO: Point = Point([0.0; MAX_DIM]);

    pub fn new2(x: f64, y: f64) -> Self {
        Point([x, y, 0.0])
    }

    pub fn new3(x: f64, y: f64, z: f64) -> Self {
        Point([x, y, z])
    }

    /// Builds a point from a coordinate slice of length 2 or 3.
    pub fn from_slice(coords: &[f64]) -> Result<Self> {
        check_dim(coords.len())?;
        if coords.iter().any(|c| !c.is_finite()) {
            return Err(Error::InvalidInput(format!("non-finite coordinate in {coords:?}")));
        }
        let mut p = [0.0; MAX_DIM];
        p[..coords.len()].copy_from_slice(coords);
        Ok(Point(p))
    }

    /// Unit basis vector `e_k`.
    pub fn basis(k: usize) -> Self {
        let mut p = [0.0; MAX_DIM];
        p[k] = 1.0;
        Point(p)
    }

    pub fn coords(&self, dim: usize) -> &[f64] {
        &self.0[..dim]
    }

    #[inline]
    pub fn dot(&self, o: &Point) -> f64 {
        self.0[0] * o.0[0] + self.0[1] * o.0[1] + self.0[2] * o.0[2]
    }

    #[inline]
    pub fn norm_sq(&self) -> f64 {
        self.dot(self)
    }

    #[inline]
    pub fn norm(&self) -> f64 {
        self.norm_sq().sqrt()
    }

    #[inline]
    pub fn dist(&self, o: &Point) -> f64 {
        (*self - *o).norm()
    }

    #[inline]
    pub fn dist_sq(&self, o: &Point) -> f64 {
        (*self - *o).norm_sq()
    }

    pub fn cross(&self, o: &Point) -> Point {
        let [a0, a1, a2] = self.0;
        let [b0, b1, b2] = o.0;
        Point([a1 * b2 - a2 * b1, a2 * b0 - a0 * b2, a0 * b1 - a1 * b0])
    }

    pub fn normalized(&self) -> Option<Point> {
        let n = self.norm();
        (n > 0.0 && n.is_finite()).then(|| *self * (1.0 / n))
    }

    pub fn is_finite(&self) -> bool {
        self.0.iter().all(|c| c.is_finite())
    }

    /// Lexicographic comparison on the raw coordinates; NaN never occurs for
    /// validated points.
    pub fn lex_cmp(&self, o: &Point) -> std::cmp::Ordering {
        for k in 0..MAX_DIM {
            match self.0[k].total_cmp(&o.0[k]) {
                std::cmp::Ordering::Equal => continue,
                ord => return ord,
            }
        }
        std::cmp::Ordering::Equal
    }

    /// Bit pattern key; equal for exactly equal coordinates (with -0 folded to 0).
    pub fn bits(&self) -> [u64; MAX_DIM] {
        self.0.map(|c| if c == 0.0 { 0u64 } else { c.to_bits() })
    }
}

pub fn check_dim(dim: usize) -> Result<()> {
    if dim == 2 || dim == 3 {
        Ok(())
    } else {
        Err(Error::UnsupportedDimension(dim))
    }
}

impl Add for Point {
    type Output = Point;
    #[inline]
    fn add(self, o: Point) -> Point {
        Point([self.0[0] + o.0[0], self.0[1] + o.0[1], self.0[2] + o.0[2]])
    }
}

impl Sub for Point {
    type Output = Point;
    #[inline]
    fn sub(self, o: Point) -> Point {
        Point([self.0[0] - o.0[0], self.0[1] - o.0[1], self.0[2] - o.0[2]])
    }
}

impl Mul<f64> for Point {
    type Output = Point;
    #[inline]
    fn mul(self, k: f64) -> Point {
        Point([self.0[0] * k, self.0[1] * k, self.0[2] * k])
    }
}

impl Neg for Point {
    type Output = Point;
    fn neg(self) -> Point {
        self * -1.0
    }
}

impl AddAssign for Point {
    fn add_assign(&mut self, o: Point) {
        *self = *self + o;
    }
}

impl SubAssign for Point {
    fn sub_assign(&mut self, o: Point) {
        *self = *self - o;
    }
}

impl Index<usize> for Point {
    type Output = f64;
    fn index(&self, k: usize) -> &f64 {
        &self.0[k]
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn from_slice_pads_planar_points() {
        let p = Point::from_slice(&[1.0, 2.0]).unwrap();
        assert_eq!(p, Point::new3(1.0, 2.0, 0.0));
        assert!(Point::from_slice(&[1.0]).is_err());
        assert!(Point::from_slice(&[1.0, f64::NAN]).is_err());
    }

    #[test]
    fn cross_and_dot() {
        let x = Point::basis(0);
        let y = Point::basis(1);
        assert_eq!(x.cross(&y), Point::basis(2));
        assert_eq!(x.dot(&y), 0.0);
        assert_eq!((x + y).norm_sq(), 2.0);
    }

    #[test]
    fn negative_zero_shares_bits_with_zero() {
        assert_eq!(Point::new2(-0.0, 1.0).bits(), Point::new2(0.0, 1.0).bits());
    }
}
