//! Fractional mass of very large currents from cell moments.
//!
//! The current is deposited on a uniform grid (each segment is clipped to
//! the cells it crosses and its vector `w (b - a)` is split accordingly) and
//! every cell moment is spread uniformly over its cell. The energy of the
//! smeared measure is then an exact double sum over occupied cells with the
//! cell-averaged kernel. Detail below the cell size is lost, so this is
//! meant for currents that approximate a density (many nearby segments of
//! small weight), where that detail carries vanishing energy.

use std::collections::HashMap;

use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::geometry::SegmentCurrent;
use crate::point::Point;
use crate::quadrature::{gauss_legendre, NeumaierSum};
use crate::riesz::check_s;

/// `int_{[-1,1]^d} prod(1 - |w_k|) |w + delta|^-s dw`: the mean of
/// `|x - y|^-s` over two unit cells offset by `delta`.
pub fn cell_kernel(delta: [i64; 3], d: usize, s: f64) -> f64 {
    let q: Vec<f64> = (0..d).map(|k| -(delta[k] as f64)).collect();
    let mut total = 0.0;
    for quad in 0..(1usize << d) {
        // quadrant: w_k in [0,1] if bit set, else [-1,0]
        let (lo, hi): (Vec<f64>, Vec<f64>) =
            (0..d).map(|k| if quad >> k & 1 == 1 { (0.0, 1.0) } else { (-1.0, 0.0) }).unzip();
        let touches = (0..d).all(|k| q[k] >= lo[k] && q[k] <= hi[k]);
        total += if touches { singular_quadrant(&q, &lo, &hi, s) } else { smooth_quadrant(&q, &lo, &hi, s) };
    }
    total
}

fn smooth_quadrant(q: &[f64], lo: &[f64], hi: &[f64], s: f64) -> f64 {
    let d = q.len();
    let rule = gauss_legendre(8);
    let n = rule.order();
    let mut acc = NeumaierSum::new();
    let mut idx = vec![0usize; d];
    loop {
        let mut w = 1.0;
        let mut r2 = 0.0;
        for k in 0..d {
            let x = lo[k] + (hi[k] - lo[k]) * rule.nodes[idx[k]];
            w *= rule.weights[idx[k]] * (hi[k] - lo[k]) * (1.0 - x.abs());
            r2 += (x - q[k]) * (x - q[k]);
        }
        acc.add(w * r2.powf(-0.5 * s));
        let mut k = 0;
        while k < d {
            idx[k] += 1;
            if idx[k] < n {
                break;
            }
            idx[k] = 0;
            k += 1;
        }
        if k == d {
            break;
        }
    }
    acc.value()
}

/// Quadrant with the kernel singularity at one of its corners. In local
/// coordinates `x in [0,1]^d` about that corner the weight is
/// `prod(a_k + b_k x_k)`; the cube is split into `d` pyramids
/// `x_j = u, x_k = u t_k`, where the `u`-integral is done exactly.
fn singular_quadrant(q: &[f64], lo: &[f64], hi: &[f64], s: f64) -> f64 {
    let d = q.len();
    // w_k = q_k + sigma_k x_k stays in the quadrant
    let sigma: Vec<f64> = (0..d).map(|k| if q[k] == lo[k] { 1.0 } else { -1.0 }).collect();
    // 1 - |w_k| = a_k + b_k x_k with |w_k| = sign * w_k on the quadrant
    let (a, b): (Vec<f64>, Vec<f64>) = (0..d)
        .map(|k| {
            let sg = if hi[k] > 0.0 { 1.0 } else { -1.0 };
            (1.0 - sg * q[k], -sg * sigma[k])
        })
        .unzip();
    let rule = gauss_legendre(16);
    let n = rule.order();
    let mut total = NeumaierSum::new();
    for j in 0..d {
        let others: Vec<usize> = (0..d).filter(|&k| k != j).collect();
        let mut idx = vec![0usize; others.len()];
        loop {
            let mut tau = vec![1.0; d];
            let mut wt = 1.0;
            for (m, &k) in others.iter().enumerate() {
                tau[k] = rule.nodes[idx[m]];
                wt *= rule.weights[idx[m]];
            }
            let t2: f64 = tau.iter().map(|t| t * t).sum();
            // prod_k (a_k + b_k tau_k u) as a polynomial in u
            let mut poly = vec![1.0];
            for k in 0..d {
                let mut next = vec![0.0; poly.len() + 1];
                for (m, c) in poly.iter().enumerate() {
                    next[m] += c * a[k];
                    next[m + 1] += c * b[k] * tau[k];
                }
                poly = next;
            }
            // int_0^1 u^(d-1-s+m) du = 1/(d-s+m)
            let radial: f64 = poly.iter().enumerate().map(|(m, c)| c / (d as f64 - s + m as f64)).sum();
            total.add(wt * t2.powf(-0.5 * s) * radial);
            let mut m = 0;
            while m < idx.len() {
                idx[m] += 1;
                if idx[m] < n {
                    break;
                }
                idx[m] = 0;
                m += 1;
            }
            if m == idx.len() {
                break;
            }
        }
    }
    total.value()
}

/// Cell index and vector moment of every piece of every segment.
fn deposit(mu: &SegmentCurrent, lo: &Point, h: f64, m: usize) -> HashMap<[usize; 3], Point> {
    let d = mu.dim();
    let mut cells: HashMap<[usize; 3], Point> = HashMap::new();
    let mut cuts = Vec::new();
    for seg in mu.segments() {
        let (a, b) = (seg.start, seg.end);
        cuts.clear();
        cuts.push(0.0);
        cuts.push(1.0);
        for k in 0..d {
            let (x0, x1) = ((a[k] - lo[k]) / h, (b[k] - lo[k]) / h);
            if x0 == x1 {
                continue;
            }
            let (u0, u1) = (x0.min(x1), x0.max(x1));
            let mut g = u0.floor() + 1.0;
            while g < u1 {
                cuts.push((g - x0) / (x1 - x0));
                g += 1.0;
            }
        }
        cuts.sort_by(|x, y| x.total_cmp(y));
        let v = b - a;
        for w in cuts.windows(2) {
            if w[1] <= w[0] {
                continue;
            }
            let mid = a + v * (0.5 * (w[0] + w[1]));
            let mut key = [0usize; 3];
            for k in 0..d {
                key[k] = (((mid[k] - lo[k]) / h).floor().max(0.0) as usize).min(m - 1);
            }
            *cells.entry(key).or_insert(Point::ZERO) += v * (seg.weight * (w[1] - w[0]));
        }
    }
    cells
}

/// Cell-moment approximation of the fractional mass on an `m^d` grid over
/// the bounding cube of the current.
pub fn fractional_mass_cells(mu: &SegmentCurrent, s: f64, m: usize) -> Result<f64> {
    check_s(s)?;
    if m == 0 || m > 4096 {
        return Err(Error::InvalidInput(format!("cells per axis must be in 1..=4096, got {m}")));
    }
    let Some((lo, hi)) = mu.bbox() else {
        return Ok(0.0);
    };
    let d = mu.dim();
    let side = (0..d).map(|k| hi[k] - lo[k]).fold(0.0, f64::max);
    if side == 0.0 {
        return Ok(0.0);
    }
    let h = side * (1.0 + 1e-12) / m as f64;
    let mut occupied: Vec<([usize; 3], Point)> =
        deposit(mu, &lo, h, m).into_iter().filter(|(_, v)| v.norm_sq() > 0.0).collect();
    occupied.sort_by_key(|x| x.0);

    // kernel table over nonnegative offsets, filled on demand in parallel
    let dims: Vec<usize> = (0..3).map(|k| if k < d { m } else { 1 }).collect();
    let mut needed = vec![false; dims.iter().product()];
    let flat = |o: [usize; 3]| (o[0] * dims[1] + o[1]) * dims[2] + o[2];
    let offset = |a: &[usize; 3], b: &[usize; 3]| {
        let mut o = [0usize; 3];
        for k in 0..3 {
            o[k] = a[k].abs_diff(b[k]);
        }
        o
    };
    for (i, (a, _)) in occupied.iter().enumerate() {
        for (b, _) in &occupied[i..] {
            needed[flat(offset(a, b))] = true;
        }
    }
    let table: Vec<f64> = needed
        .par_iter()
        .enumerate()
        .map(|(idx, &need)| {
            if !need {
                return 0.0;
            }
            let o = [idx / (dims[1] * dims[2]), idx / dims[2] % dims[1], idx % dims[2]];
            cell_kernel([o[0] as i64, o[1] as i64, o[2] as i64], d, s)
        })
        .collect();

    let rows: Vec<f64> = (0..occupied.len())
        .into_par_iter()
        .map(|i| {
            let (a, va) = &occupied[i];
            let mut acc = NeumaierSum::new();
            acc.add(va.norm_sq() * table[0]);
            for (b, vb) in &occupied[i + 1..] {
                acc.add(2.0 * va.dot(vb) * table[flat(offset(a, b))]);
            }
            acc.value()
        })
        .collect();
    Ok(h.powf(-s) * rows.into_iter().collect::<NeumaierSum>().value())
}
