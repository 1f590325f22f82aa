//! JSON interchange for curves, currents and planar regions.
//!
//! Floats are written with the shortest representation that round-trips, so
//! reading back a written file reproduces every coordinate bit for bit.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geometry::{OrientedSegment, PolyCurve, SegmentCurrent};
use crate::perimeter::PlanarRegion;
use crate::point::{check_dim, Point};

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct CurveRecord {
    pub closed: bool,
    #[serde(default = "one")]
    pub weight: f64,
    pub vertices: Vec<Vec<f64>>,
}

fn one() -> f64 {
    1.0
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct CurvesFile {
    pub dim: usize,
    pub curves: Vec<CurveRecord>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct SegmentRecord {
    pub a: Vec<f64>,
    pub b: Vec<f64>,
    pub w: f64,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct SegmentsFile {
    pub dim: usize,
    pub segments: Vec<SegmentRecord>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct RegionFile {
    #[serde(default = "two")]
    pub dim: usize,
    pub outer: CurveRecord,
    #[serde(default)]
    pub holes: Vec<CurveRecord>,
}

fn two() -> usize {
    2
}

fn parse_err(e: serde_json::Error) -> Error {
    Error::Parse(e.to_string())
}

fn point(dim: usize, c: &[f64]) -> Result<Point> {
    if c.len() != dim {
        return Err(Error::DimensionMismatch { expected: dim, found: c.len() });
    }
    Point::from_slice(c)
}

fn record_to_curve(dim: usize, r: &CurveRecord) -> Result<PolyCurve> {
    let v = r.vertices.iter().map(|c| point(dim, c)).collect::<Result<Vec<_>>>()?;
    PolyCurve::new(dim, v, r.closed, r.weight)
}

fn curve_to_record(c: &PolyCurve) -> CurveRecord {
    CurveRecord {
        closed: c.is_closed(),
        weight: c.weight(),
        vertices: c.vertices().iter().map(|p| p.coords(c.dim()).to_vec()).collect(),
    }
}

pub fn curves_from_json(text: &str) -> Result<(usize, Vec<PolyCurve>)> {
    let f: CurvesFile = serde_json::from_str(text).map_err(parse_err)?;
    check_dim(f.dim)?;
    let curves = f.curves.iter().map(|r| record_to_curve(f.dim, r)).collect::<Result<_>>()?;
    Ok((f.dim, curves))
}

pub fn curves_to_json(dim: usize, curves: &[PolyCurve]) -> String {
    let f = CurvesFile { dim, curves: curves.iter().map(curve_to_record).collect() };
    serde_json::to_string(&f).expect("plain data serializes")
}

pub fn current_from_json(text: &str) -> Result<SegmentCurrent> {
    let f: SegmentsFile = serde_json::from_str(text).map_err(parse_err)?;
    check_dim(f.dim)?;
    let segs = f
        .segments
        .iter()
        .enumerate()
        .map(|(i, s)| {
            let (a, b) = (point(f.dim, &s.a)?, point(f.dim, &s.b)?);
            if a == b {
                return Err(Error::DegenerateEdge { index: i, next: i });
            }
            Ok(OrientedSegment { start: a, end: b, weight: s.w })
        })
        .collect::<Result<Vec<_>>>()?;
    SegmentCurrent::new(f.dim, segs)
}

pub fn current_to_json(mu: &SegmentCurrent) -> String {
    let d = mu.dim();
    let f = SegmentsFile {
        dim: d,
        segments: mu
            .segments()
            .iter()
            .map(|s| SegmentRecord { a: s.start.coords(d).to_vec(), b: s.end.coords(d).to_vec(), w: s.weight })
            .collect(),
    };
    serde_json::to_string(&f).expect("plain data serializes")
}

/// Reads either file flavor: a `curves` file or a `segments` file.
pub fn any_current_from_json(text: &str) -> Result<SegmentCurrent> {
    let v: serde_json::Value = serde_json::from_str(text).map_err(parse_err)?;
    if v.get("segments").is_some() {
        current_from_json(text)
    } else if v.get("curves").is_some() {
        let (dim, curves) = curves_from_json(text)?;
        crate::geometry::curves_to_current(dim, &curves)
    } else {
        Err(Error::Parse("expected a \"curves\" or \"segments\" key".into()))
    }
}

pub fn region_from_json(text: &str) -> Result<PlanarRegion> {
    let f: RegionFile = serde_json::from_str(text).map_err(parse_err)?;
    if f.dim != 2 {
        return Err(Error::DimensionMismatch { expected: 2, found: f.dim });
    }
    let outer = record_to_curve(2, &f.outer)?;
    let holes = f.holes.iter().map(|r| record_to_curve(2, r)).collect::<Result<_>>()?;
    PlanarRegion::new(outer, holes)
}

pub fn region_to_json(e: &PlanarRegion) -> String {
    let f = RegionFile {
        dim: 2,
        outer: curve_to_record(e.outer()),
        holes: e.holes().iter().map(curve_to_record).collect(),
    };
    serde_json::to_string(&f).expect("plain data serializes")
}
