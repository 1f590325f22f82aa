//! `key = value` run files for the `approximate` command.
//!
//! ```text
//! # curl bump on the unit disc
//! field = curl_bump_2d
//! amplitude = 0.1
//! schedule = 0.2:1e-3, 0.1:1e-4, 0.05:1e-5
//! rho = 1e-3
//! ```

use std::collections::BTreeMap;

use fracmass::{FieldSpec, Point};
use serde_json::{json, Value};

const KEYS: &[&str] = &[
    "field",
    "center",
    "radius",
    "amplitude",
    "axis",
    "dim",
    "eps",
    "delta",
    "schedule",
    "rho",
    "seed",
    "s",
    "mc_samples",
    "cells",
    "diagnostics",
];

#[derive(Debug, Clone)]
pub struct ApproxConfig {
    pub preset: String,
    pub field: FieldSpec,
    pub field_params: Value,
    /// `(eps, delta)` per level.
    pub levels: Vec<(f64, f64)>,
    pub rho: f64,
    pub seed: u64,
    pub s: f64,
    pub mc_samples: usize,
    pub cells: Option<usize>,
    pub diagnostics: bool,
}

/// Command-line values that take precedence over the file.
#[derive(Debug, Clone, Copy, Default)]
pub struct Overrides {
    pub eps: Option<f64>,
    pub delta: Option<f64>,
    pub rho: Option<f64>,
    pub seed: Option<u64>,
    pub s: Option<f64>,
    pub n: Option<usize>,
}

pub fn parse_pairs(text: &str) -> Result<BTreeMap<String, String>, String> {
    let mut map = BTreeMap::new();
    for (lineno, raw) in text.lines().enumerate() {
        let line = raw.split('#').next().unwrap_or("").trim();
        if line.is_empty() {
            continue;
        }
        let Some((k, v)) = line.split_once('=') else {
            return Err(format!("line {}: expected key = value", lineno + 1));
        };
        let (k, v) = (k.trim().to_string(), v.trim().to_string());
        if !KEYS.contains(&k.as_str()) {
            return Err(format!("line {}: unknown key {k:?}", lineno + 1));
        }
        if map.insert(k.clone(), v).is_some() {
            return Err(format!("line {}: duplicate key {k:?}", lineno + 1));
        }
    }
    Ok(map)
}

fn num<T: std::str::FromStr>(map: &BTreeMap<String, String>, key: &str) -> Result<Option<T>, String> {
    map.get(key).map(|v| v.parse::<T>().map_err(|_| format!("{key}: cannot parse {v:?}"))).transpose()
}

fn point(map: &BTreeMap<String, String>, key: &str, dim: usize, default: Point) -> Result<Point, String> {
    let Some(v) = map.get(key) else {
        return Ok(default);
    };
    let c = v
        .split(',')
        .map(|x| x.trim().parse::<f64>().map_err(|_| format!("{key}: cannot parse {v:?}")))
        .collect::<Result<Vec<_>, _>>()?;
    if c.len() != dim {
        return Err(format!("{key}: expected {dim} coordinates, got {}", c.len()));
    }
    Point::from_slice(&c).map_err(|e| e.to_string())
}

fn schedule(v: &str) -> Result<Vec<(f64, f64)>, String> {
    v.split(',')
        .map(|item| {
            let (e, d) =
                item.trim().split_once(':').ok_or_else(|| format!("schedule entry {item:?} is not eps:delta"))?;
            let e = e.trim().parse::<f64>().map_err(|_| format!("schedule: cannot parse {e:?}"))?;
            let d = d.trim().parse::<f64>().map_err(|_| format!("schedule: cannot parse {d:?}"))?;
            Ok((e, d))
        })
        .collect()
}

impl ApproxConfig {
    pub fn from_text(text: &str, ov: &Overrides) -> Result<Self, String> {
        let map = parse_pairs(text)?;
        let preset = map.get("field").cloned().ok_or("missing field preset (curl_bump_2d, curl_bump_3d or zero)")?;
        let radius = num::<f64>(&map, "radius")?.unwrap_or(1.0);
        let amplitude = num::<f64>(&map, "amplitude")?.unwrap_or(0.1);
        let (field, field_params) = match preset.as_str() {
            "curl_bump_2d" => {
                let c = point(&map, "center", 2, Point::ZERO)?;
                let f = FieldSpec::curl_bump_2d(c, radius, amplitude).map_err(|e| e.to_string())?;
                (f, json!({"center": c.coords(2), "radius": radius, "amplitude": amplitude}))
            }
            "curl_bump_3d" => {
                let c = point(&map, "center", 3, Point::ZERO)?;
                let a = point(&map, "axis", 3, Point::new3(0.0, 0.0, 1.0))?;
                let f = FieldSpec::curl_bump_3d(c, radius, amplitude, a).map_err(|e| e.to_string())?;
                (f, json!({"center": c.coords(3), "radius": radius, "amplitude": amplitude, "axis": a.coords(3)}))
            }
            "zero" => {
                let dim = num::<usize>(&map, "dim")?.unwrap_or(2);
                let f = FieldSpec::zero(dim).map_err(|e| e.to_string())?;
                (f, json!({"dim": dim}))
            }
            other => return Err(format!("unknown field preset {other:?}")),
        };

        let mut levels = match map.get("schedule") {
            Some(v) => schedule(v)?,
            None => vec![(num::<f64>(&map, "eps")?.unwrap_or(0.1), num::<f64>(&map, "delta")?.unwrap_or(1e-4))],
        };
        if ov.eps.is_some() || ov.delta.is_some() {
            let (e0, d0) = levels[0];
            levels = vec![(ov.eps.unwrap_or(e0), ov.delta.unwrap_or(d0))];
        }
        if levels.is_empty() {
            return Err("empty schedule".into());
        }
        Ok(Self {
            preset,
            field,
            field_params,
            levels,
            rho: ov.rho.map_or_else(|| num::<f64>(&map, "rho").map(|v| v.unwrap_or(1e-3)), Ok)?,
            seed: ov.seed.map_or_else(|| num::<u64>(&map, "seed").map(|v| v.unwrap_or(0)), Ok)?,
            s: ov.s.map_or_else(|| num::<f64>(&map, "s").map(|v| v.unwrap_or(0.5)), Ok)?,
            mc_samples: ov.n.map_or_else(|| num::<usize>(&map, "mc_samples").map(|v| v.unwrap_or(4_000_000)), Ok)?,
            cells: num::<usize>(&map, "cells")?,
            diagnostics: num::<bool>(&map, "diagnostics")?.unwrap_or(true),
        })
    }

    pub fn echo(&self) -> Value {
        json!({
            "field": self.preset,
            "field_params": self.field_params,
            "levels": self.levels.iter().map(|(e, d)| json!({"eps": e, "delta": d})).collect::<Vec<_>>(),
            "rho": self.rho,
            "seed": self.seed,
            "s": self.s,
            "mc_samples": self.mc_samples,
            "cells": self.cells,
            "diagnostics": self.diagnostics,
        })
    }
}
