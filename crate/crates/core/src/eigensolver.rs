//! First eigenvalues: `λ₁` of the `N`-homogeneous problem by shooting, and
//! `μ₁(p)` of the weighted `p`-Laplacian problem
//! `-(φ_p(w'))' = μ^{p-1} (p-1) r^{p-2} φ_p(w)`, `w'(0) = w(1) = 0`,
//! by normalized power iteration on its integral operator.

use std::io::Write;

use serde::Serialize;

use crate::error::{Error, Result};
use crate::nonlinearity::{abs_pow, Nonlinearity};
use crate::profile::{uniform_nodes, RadialProfile, Sign};
use crate::quadrature;
use crate::radial_solver::{lambda_for_amplitude, map_parallel, shoot, SolverOptions};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Method {
    Shooting,
    InverseIteration,
}

#[derive(Debug, Clone)]
pub struct EigenResult {
    pub value: f64,
    pub eigenfunction: RadialProfile,
    pub method: Method,
    /// Boundary defect for shooting, `‖w - μ T w‖∞` for inverse iteration.
    pub residual: f64,
    pub p: f64,
    /// `η₁ = μ₁^{p-1}`; only set by inverse iteration.
    pub eta: Option<f64>,
    pub iterations: usize,
}

/// `λ₁(N)` by shooting `f = s^N` from `a = 1`. The `λ` bracket is seeded by
/// a coarse inverse-iteration estimate at `p = N + 1`.
pub fn lambda1_shoot(dim: u32, opts: &SolverOptions) -> Result<EigenResult> {
    lambda1_shoot_from(dim, 1.0, opts)
}

/// As [`lambda1_shoot`] with an arbitrary amplitude; the eigenvalue does not
/// depend on it.
pub fn lambda1_shoot_from(dim: u32, amplitude: f64, opts: &SolverOptions) -> Result<EigenResult> {
    if dim == 0 {
        return Err(Error::InvalidArgument("N must be at least 1".into()));
    }
    let f = Nonlinearity::power(dim as f64)?;
    let seed = mu1_inverse_iteration(dim as f64 + 1.0, &InverseOptions { grid: 256, tol: 1e-8, ..Default::default() }, None)
        .ok()
        .map(|r| r.value);
    let lam = lambda_for_amplitude(&f, dim, amplitude, opts, seed)?;
    let shot = shoot(&f, dim, lam, amplitude, opts)?;
    if !shot.profile.is_complete() {
        return Err(Error::NotConverged("eigenfunction changes sign before r = 1".into()));
    }
    Ok(EigenResult {
        value: lam,
        residual: shot.defect.abs(),
        eigenfunction: shot.profile,
        method: Method::Shooting,
        p: dim as f64 + 1.0,
        eta: None,
        iterations: 0,
    })
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct InverseOptions {
    pub grid: usize,
    /// Sup-norm change between successive normalized iterates.
    pub tol: f64,
    pub maxiter: usize,
}

impl Default for InverseOptions {
    fn default() -> Self {
        Self {
            grid: 4096,
            tol: 1e-10,
            maxiter: 10_000,
        }
    }
}

fn phi(x: f64, p: f64) -> f64 {
    let m = abs_pow(x, p - 1.0);
    if x < 0.0 {
        -m
    } else {
        m
    }
}

/// The unit-`μ` operator `T^p w(r) = ∫_r^1 φ_{p'}((p-1) ∫_0^s τ^{p-2} φ_p(w) dτ) ds`.
/// Returns `(T^p w, (T^p w)')`.
pub fn apply_tp(p: f64, w: &[f64]) -> (Vec<f64>, Vec<f64>) {
    let m = w.len() - 1;
    let h = 1.0 / m as f64;
    let g: Vec<f64> = w.iter().map(|&x| phi(x, p)).collect();
    let inner = quadrature::cumulative_weighted(h, p - 2.0, &g);
    let q = 1.0 / (p - 1.0);
    let root: Vec<f64> = inner.iter().map(|&x| phi((p - 1.0) * x, 1.0 + q)).collect();
    let out = quadrature::cumulative_from_right(h, &root);
    (out, root.iter().map(|x| -x).collect())
}

/// `η = ∫|w'|^p / ((p-1) ∫ r^{p-2} |w|^p)`.
pub fn rayleigh(p: f64, w: &[f64], dw: &[f64]) -> f64 {
    let h = 1.0 / (w.len() - 1) as f64;
    let num: Vec<f64> = dw.iter().map(|&d| abs_pow(d, p)).collect();
    let den: Vec<f64> = w.iter().map(|&x| abs_pow(x, p)).collect();
    quadrature::integrate(h, &num) / ((p - 1.0) * quadrature::integrate_weighted(h, p - 2.0, &den))
}

/// `μ₁(p)` by iterating `w ← T^p w / ‖T^p w‖∞` from `start` (default `1 - r²`).
pub fn mu1_inverse_iteration(p: f64, opts: &InverseOptions, start: Option<&[f64]>) -> Result<EigenResult> {
    if !(p >= 2.0 && p.is_finite()) {
        return Err(Error::InvalidArgument(format!("p must be at least 2, got {p}")));
    }
    if opts.grid < 8 {
        return Err(Error::InvalidArgument("grid must be at least 8".into()));
    }
    let m = opts.grid;
    let nodes = uniform_nodes(m);
    let mut w: Vec<f64> = match start {
        Some(s) if s.len() == m + 1 => s.to_vec(),
        Some(s) => {
            return Err(Error::InvalidArgument(format!(
                "start vector has {} entries, grid needs {}",
                s.len(),
                m + 1
            )))
        }
        None => nodes.iter().map(|r| 1.0 - r * r).collect(),
    };
    let mut dw = vec![0.0; m + 1];
    let mut history = Vec::new();
    let mut converged = None;
    for it in 1..=opts.maxiter {
        let (tw, dtw) = apply_tp(p, &w);
        let norm = tw.iter().fold(0.0f64, |a, x| a.max(x.abs()));
        if !(norm > 0.0 && norm.is_finite()) {
            return Err(Error::Diverged { iterations: it, norms: history });
        }
        let next: Vec<f64> = tw.iter().map(|x| x / norm).collect();
        dw = dtw.iter().map(|x| x / norm).collect();
        let change = next.iter().zip(&w).fold(0.0f64, |a, (x, y)| a.max((x - y).abs()));
        history.push(change);
        w = next;
        if change < opts.tol {
            converged = Some(it);
            break;
        }
    }
    let Some(iterations) = converged else {
        return Err(Error::Stalled {
            iterations: opts.maxiter,
            norms: history,
        });
    };
    let eta = rayleigh(p, &w, &dw);
    let mu = eta.powf(1.0 / (p - 1.0));
    let (tw, _) = apply_tp(p, &w);
    let residual = w.iter().zip(&tw).fold(0.0f64, |a, (x, t)| a.max((x - mu * t).abs()));
    Ok(EigenResult {
        value: mu,
        eigenfunction: RadialProfile {
            nodes,
            values: w,
            derivs: dw,
            sign: Sign::Positive,
            lambda: mu,
            dim: (p - 1.0).round().max(1.0) as u32,
            grid: m,
        },
        method: Method::InverseIteration,
        residual,
        p,
        eta: Some(eta),
        iterations,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct ScanRow {
    pub p: f64,
    pub mu1: f64,
    pub eta1: f64,
    pub residual: f64,
    pub iterations: usize,
}

#[derive(Debug, Clone)]
pub struct Mu1Scan {
    pub rows: Vec<ScanRow>,
    /// Largest `|μ₁(p_{i+1}) - μ₁(p_i)|`, zero for a single entry.
    pub max_jump: f64,
}

/// `p_from, p_from + step, ...` up to `p_to` inclusive.
pub fn p_grid(p_from: f64, p_to: f64, step: f64) -> Result<Vec<f64>> {
    if !(p_from >= 2.0 && p_to >= p_from && p_to.is_finite()) {
        return Err(Error::InvalidArgument(format!("need 2 <= p_from <= p_to, got [{p_from}, {p_to}]")));
    }
    if p_to == p_from {
        return Ok(vec![p_from]);
    }
    if !(step > 0.0) {
        return Err(Error::InvalidArgument("step must be positive".into()));
    }
    let n = ((p_to - p_from) / step + 1e-9).floor() as usize;
    let mut ps: Vec<f64> = (0..=n).map(|i| p_from + i as f64 * step).collect();
    if p_to - ps[n] > 1e-9 * step {
        ps.push(p_to);
    }
    Ok(ps)
}

/// `μ₁` over a `p` grid. With `warm` set each entry starts from the previous
/// eigenfunction and the scan runs sequentially; otherwise entries are
/// independent and may use `threads` workers.
pub fn mu1_scan(p_from: f64, p_to: f64, step: f64, opts: &InverseOptions, warm: bool, threads: usize) -> Result<Mu1Scan> {
    let ps = p_grid(p_from, p_to, step)?;
    let results: Vec<EigenResult> = if warm {
        let mut out: Vec<EigenResult> = Vec::with_capacity(ps.len());
        for &p in &ps {
            let start = out.last().map(|r| r.eigenfunction.values.clone());
            out.push(mu1_inverse_iteration(p, opts, start.as_deref())?);
        }
        out
    } else {
        map_parallel(&ps, threads, |&p| mu1_inverse_iteration(p, opts, None))
            .into_iter()
            .collect::<Result<_>>()?
    };
    let rows: Vec<ScanRow> = results
        .iter()
        .map(|r| ScanRow {
            p: r.p,
            mu1: r.value,
            eta1: r.eta.unwrap_or(f64::NAN),
            residual: r.residual,
            iterations: r.iterations,
        })
        .collect();
    let max_jump = rows.windows(2).map(|w| (w[1].mu1 - w[0].mu1).abs()).fold(0.0, f64::max);
    Ok(Mu1Scan { rows, max_jump })
}

impl Mu1Scan {
    /// `p,mu1,eta1,residual,iterations`.
    pub fn write_csv<W: Write>(&self, w: W) -> Result<()> {
        let mut wr = csv::Writer::from_writer(w);
        wr.write_record(["p", "mu1", "eta1", "residual", "iterations"])?;
        for r in &self.rows {
            wr.write_record([
                r.p.to_string(),
                r.mu1.to_string(),
                r.eta1.to_string(),
                r.residual.to_string(),
                r.iterations.to_string(),
            ])?;
        }
        wr.flush()?;
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;
    use std::f64::consts::PI;

    #[test]
    fn n1_shooting_is_analytic() {
        let r = lambda1_shoot(1, &SolverOptions::default()).unwrap();
        assert_relative_eq!(r.value, PI * PI / 4.0, max_relative = 1e-10);
        assert!(r.residual < 1e-10);
    }

    #[test]
    fn p2_inverse_iteration_is_analytic() {
        let r = mu1_inverse_iteration(2.0, &InverseOptions::default(), None).unwrap();
        assert!((r.value - PI * PI / 4.0).abs() < 1e-6, "{}", r.value);
        let w = &r.eigenfunction;
        for (x, v) in w.nodes.iter().zip(&w.values) {
            assert!((v - (PI * x / 2.0).cos()).abs() < 1e-6);
        }
        assert!(r.residual < 1e-5);
    }

    #[test]
    fn shooting_is_amplitude_free() {
        let o = SolverOptions::default().with_grid(1024);
        let a = lambda1_shoot_from(2, 1.0, &o).unwrap();
        let b = lambda1_shoot_from(2, 7.0, &o).unwrap();
        assert_relative_eq!(a.value, b.value, max_relative = 1e-10);
        for (x, y) in a.eigenfunction.values.iter().zip(&b.eigenfunction.values) {
            assert!((7.0 * x - y).abs() < 1e-9);
        }
    }

    #[test]
    fn methods_agree_at_p_n_plus_one() {
        let o = SolverOptions::default().with_grid(2048);
        let io = InverseOptions { grid: 2048, ..Default::default() };
        for n in 1..=3u32 {
            let s = lambda1_shoot(n, &o).unwrap().value;
            let i = mu1_inverse_iteration(n as f64 + 1.0, &io, None).unwrap().value;
            assert!((s - i).abs() / s < 1e-4, "N={n}: {s} vs {i}");
        }
    }

    #[test]
    fn eta_lower_bound_and_scan_shape() {
        let io = InverseOptions { grid: 512, ..Default::default() };
        let scan = mu1_scan(2.0, 5.0, 0.5, &io, true, 1).unwrap();
        assert_eq!(scan.rows.len(), 7);
        for r in &scan.rows {
            assert!(r.eta1 >= 1.0 / (r.p - 1.0));
        }
        let single = mu1_scan(2.0, 2.0, 0.1, &io, true, 1).unwrap();
        assert_eq!(single.rows.len(), 1);
        assert_eq!(single.max_jump, 0.0);
        assert!((single.rows[0].mu1 - PI * PI / 4.0).abs() < 1e-4);
    }

    #[test]
    fn warm_and_cold_starts_agree() {
        let io = InverseOptions { grid: 1024, tol: 1e-12, ..Default::default() };
        let prev = mu1_inverse_iteration(2.9, &io, None).unwrap();
        let warm = mu1_inverse_iteration(3.0, &io, Some(&prev.eigenfunction.values)).unwrap();
        let cold = mu1_inverse_iteration(3.0, &io, None).unwrap();
        assert!((warm.value - cold.value).abs() < 1e-8);
    }

    #[test]
    fn random_starts_reach_the_same_eigenpair() {
        let io = InverseOptions { grid: 512, tol: 1e-12, ..Default::default() };
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        let mut runs = Vec::new();
        for _ in 0..2 {
            let start: Vec<f64> = (0..=512).map(|_| rng.gen_range(0.1..1.0)).collect();
            runs.push(mu1_inverse_iteration(3.5, &io, Some(&start)).unwrap());
        }
        let (a, b) = (&runs[0].eigenfunction.values, &runs[1].eigenfunction.values);
        let dot: f64 = a.iter().zip(b).map(|(x, y)| x * y).sum();
        let na: f64 = a.iter().map(|x| x * x).sum::<f64>().sqrt();
        let nb: f64 = b.iter().map(|x| x * x).sum::<f64>().sqrt();
        assert!(dot / (na * nb) > 1.0 - 1e-8);
        assert!((runs[0].value - runs[1].value).abs() < 1e-8);
    }

    #[test]
    fn p_grid_includes_endpoint() {
        assert_eq!(p_grid(2.0, 2.3, 0.1).unwrap().len(), 4);
        assert_eq!(p_grid(2.0, 2.25, 0.1).unwrap().last().copied(), Some(2.25));
        assert!(p_grid(1.5, 3.0, 0.1).is_err());
    }
}
