//! Cumulative quadrature on uniform grids.

/// `out[i] = ∫_{x_0}^{x_i} g` on a uniform grid with spacing `h`, using the
/// four-point cubic rule on every cell (one-sided at the ends).
pub fn cumulative(h: f64, g: &[f64]) -> Vec<f64> {
    let n = g.len();
    let mut out = vec![0.0; n];
    for i in 0..n.saturating_sub(1) {
        out[i + 1] = out[i] + cell(h, g, i);
    }
    out
}

/// `out[i] = ∫_{x_i}^{x_last} g`, accumulated from the right so that the last
/// entry is exactly zero.
pub fn cumulative_from_right(h: f64, g: &[f64]) -> Vec<f64> {
    let n = g.len();
    let mut out = vec![0.0; n];
    for i in (0..n.saturating_sub(1)).rev() {
        out[i] = out[i + 1] + cell(h, g, i);
    }
    out
}

/// Integral over all of the grid.
pub fn integrate(h: f64, g: &[f64]) -> f64 {
    (0..g.len().saturating_sub(1)).map(|i| cell(h, g, i)).sum()
}

/// `∫_{x_i}^{x_{i+1}} g` from the cubic through four neighbouring samples.
fn cell(h: f64, g: &[f64], i: usize) -> f64 {
    let n = g.len();
    if n < 4 {
        return 0.5 * h * (g[i] + g[i + 1]);
    }
    let c = h / 24.0;
    if i == 0 {
        c * (9.0 * g[0] + 19.0 * g[1] - 5.0 * g[2] + g[3])
    } else if i + 2 == n {
        c * (g[n - 4] - 5.0 * g[n - 3] + 19.0 * g[n - 2] + 9.0 * g[n - 1])
    } else {
        c * (-g[i - 1] + 13.0 * g[i] + 13.0 * g[i + 1] - g[i + 2])
    }
}

const GAUSS3_NODES: [f64; 3] = [-0.774_596_669_241_483_4, 0.0, 0.774_596_669_241_483_4];
const GAUSS3_WEIGHTS: [f64; 3] = [5.0 / 9.0, 8.0 / 9.0, 5.0 / 9.0];

/// `∫_{x_i}^{x_{i+1}} τ^β g(τ) dτ` with `g` linear on the cell and the weight
/// integrated exactly near the origin (where it may be singular) and by
/// Gauss-Legendre further out, where exact moments cancel badly.
fn weighted_cell(x0: f64, h: f64, beta: f64, g0: f64, g1: f64) -> f64 {
    if x0 < 8.0 * h {
        let b = x0 + h;
        let m0 = (b.powf(beta + 1.0) - x0.powf(beta + 1.0)) / (beta + 1.0);
        let m1 = (b.powf(beta + 2.0) - x0.powf(beta + 2.0)) / (beta + 2.0);
        // ∫ τ^β (g0 (b-τ) + g1 (τ-x0))/h dτ
        return (g0 * (b * m0 - m1) + g1 * (m1 - x0 * m0)) / h;
    }
    let mid = x0 + 0.5 * h;
    GAUSS3_NODES
        .iter()
        .zip(GAUSS3_WEIGHTS)
        .map(|(&t, w)| {
            let tau = mid + 0.5 * h * t;
            let lin = g0 + (g1 - g0) * (0.5 + 0.5 * t);
            w * tau.powf(beta) * lin
        })
        .sum::<f64>()
        * 0.5
        * h
}

/// `out[i] = ∫_0^{x_i} τ^β g(τ) dτ` on the uniform grid `x_i = i h` by product
/// integration against the piecewise-linear interpolant of `g`.
pub fn cumulative_weighted(h: f64, beta: f64, g: &[f64]) -> Vec<f64> {
    let n = g.len();
    let mut out = vec![0.0; n];
    for i in 0..n.saturating_sub(1) {
        out[i + 1] = out[i] + weighted_cell(i as f64 * h, h, beta, g[i], g[i + 1]);
    }
    out
}

pub fn integrate_weighted(h: f64, beta: f64, g: &[f64]) -> f64 {
    (0..g.len().saturating_sub(1))
        .map(|i| weighted_cell(i as f64 * h, h, beta, g[i], g[i + 1]))
        .sum()
}

/// Trapezoid-rule partial integrals, `out[i] = ∫_{x_i}^{x_last} g`.
pub fn trapezoid_from_right(h: f64, g: &[f64]) -> Vec<f64> {
    let n = g.len();
    let mut out = vec![0.0; n];
    for i in (0..n.saturating_sub(1)).rev() {
        out[i] = out[i + 1] + 0.5 * h * (g[i] + g[i + 1]);
    }
    out
}
