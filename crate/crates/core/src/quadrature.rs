//! Gauss–Legendre rules, compensated summation and polynomial extrapolation.

use std::sync::OnceLock;

/// Highest Gauss–Legendre order kept in the rule table.
pub const MAX_GAUSS_ORDER: usize = 64;

/// Gauss–Legendre rule on the unit interval `[0, 1]`.
#[derive(Debug, Clone)]
pub struct GaussRule {
    pub nodes: Vec<f64>,
    pub weights: Vec<f64>,
}

impl GaussRule {
    pub fn order(&self) -> usize {
        self.nodes.len()
    }

    /// Integrates `f` over `[a, b]`.
    pub fn integrate(&self, a: f64, b: f64, mut f: impl FnMut(f64) -> f64) -> f64 {
        let h = b - a;
        let mut acc = 0.0;
        for (x, w) in self.nodes.iter().zip(&self.weights) {
            acc += w * f(a + h * x);
        }
        acc * h
    }
}

fn legendre_rule(n: usize) -> GaussRule {
    // Newton iteration on P_n from the Chebyshev-like initial guess.
    let mut nodes = vec![0.0; n];
    let mut weights = vec![0.0; n];
    let nf = n as f64;
    for i in 0..n.div_ceil(2) {
        let mut x = (std::f64::consts::PI * (i as f64 + 0.75) / (nf + 0.5)).cos();
        let mut dp = 1.0;
        for _ in 0..100 {
            let (mut p0, mut p1) = (1.0, x);
            for k in 2..=n {
                let kf = k as f64;
                let p2 = ((2.0 * kf - 1.0) * x * p1 - (kf - 1.0) * p0) / kf;
                p0 = p1;
                p1 = p2;
            }
            let pn = if n == 1 { x } else { p1 };
            let pn1 = if n == 1 { 1.0 } else { p0 };
            dp = nf * (x * pn - pn1) / (x * x - 1.0);
            let dx = pn / dp;
            x -= dx;
            if dx.abs() < 1e-16 {
                break;
            }
        }
        let w = 2.0 / ((1.0 - x * x) * dp * dp);
        // map [-1,1] -> [0,1]
        nodes[i] = 0.5 * (1.0 - x);
        nodes[n - 1 - i] = 0.5 * (1.0 + x);
        weights[i] = 0.5 * w;
        weights[n - 1 - i] = 0.5 * w;
    }
    if n % 2 == 1 {
        nodes[n / 2] = 0.5;
    }
    GaussRule { nodes, weights }
}

/// Cached Gauss–Legendre rule of order `n` on `[0, 1]`; `n` is clamped to
/// `1..=MAX_GAUSS_ORDER`.
pub fn gauss_legendre(n: usize) -> &'static GaussRule {
    static TABLE: OnceLock<Vec<GaussRule>> = OnceLock::new();
    let table = TABLE.get_or_init(|| (1..=MAX_GAUSS_ORDER).map(legendre_rule).collect());
    &table[n.clamp(1, MAX_GAUSS_ORDER) - 1]
}

/// Gauss order needed for an analytic integrand whose nearest singularity
/// sits at normalized distance `a > 1` from the center of the (half-width 1)
/// panel, so that the error is about `tol`. Bernstein-ellipse estimate.
pub fn order_for_separation(a: f64, tol: f64, max_order: usize) -> usize {
    if a <= 1.0 {
        return max_order;
    }
    let rho = a + (a * a - 1.0).sqrt();
    let n = ((1.0 / tol).ln() / (2.0 * rho.ln())).ceil();
    (n.max(1.0) as usize).min(max_order)
}

/// Neumaier (improved Kahan) compensated accumulator.
#[derive(Debug, Clone, Copy, Default)]
pub struct NeumaierSum {
    sum: f64,
    comp: f64,
}

impl NeumaierSum {
    pub fn new() -> Self {
        Self::default()
    }

    #[inline]
    pub fn add(&mut self, x: f64) {
        let t = self.sum + x;
        if self.sum.abs() >= x.abs() {
            self.comp += (self.sum - t) + x;
        } else {
            self.comp += (x - t) + self.sum;
        }
        self.sum = t;
    }

    pub fn value(&self) -> f64 {
        self.sum + self.comp
    }
}

impl FromIterator<f64> for NeumaierSum {
    fn from_iter<I: IntoIterator<Item = f64>>(iter: I) -> Self {
        let mut s = NeumaierSum::new();
        for x in iter {
            s.add(x);
        }
        s
    }
}

/// Compensated sum of a sequence in iteration order.
pub fn compensated_sum(values: impl IntoIterator<Item = f64>) -> f64 {
    values.into_iter().collect::<NeumaierSum>().value()
}

/// Evaluates at `h = 0` the interpolating polynomial through `(h_i, f_i)`
/// (Neville's scheme).
pub fn richardson(h: &[f64], f: &[f64]) -> f64 {
    assert_eq!(h.len(), f.len());
    assert!(!h.is_empty());
    let mut p = f.to_vec();
    let n = h.len();
    for m in 1..n {
        for i in 0..n - m {
            p[i] = (h[i] * p[i + 1] - h[i + m] * p[i]) / (h[i] - h[i + m]);
        }
    }
    p[0]
}

/// Splits `[a, b]` into panels whose widths grow geometrically (factor 2)
/// away from `a`, starting at `first` (or the whole interval if shorter).
pub fn graded_panels(a: f64, b: f64, first: f64, out: &mut Vec<(f64, f64)>) {
    let len = b - a;
    if len <= 0.0 {
        return;
    }
    let mut w = first.max(len * 1e-300).min(len);
    let mut x = 0.0;
    while x < len {
        let next = if x + w >= len * (1.0 - 1e-12) { len } else { x + w };
        out.push((a + x, a + next));
        x = next;
        w = x.max(w);
    }
}
