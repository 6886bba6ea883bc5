//! The fixed-point operator `T_f`, shooting from the degenerate origin, and
//! the solvers built on it.
//!
//! The boundary value problem is `((-v')^N)' = λ^N N r^{N-1} f(v)` on `(0, 1)`
//! with `v'(0) = v(1) = 0`. Shooting integrates the state `(v, q)` where
//! `q(r) = λ^N ∫_0^r N τ^{N-1} f(v) dτ`. For a positive profile `v' = -q^{1/N}`
//! (signed root). For a negative one the root branch is chosen so that `|v|`
//! still decreases, which is the raw equation read with `v' > 0`.

use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::nonlinearity::{log_space, reflect, Nonlinearity};
use crate::profile::{uniform_nodes, RadialProfile, Sign};
use crate::quadrature;
use crate::roots::brent;

/// `sign(x) |x|^{1/n}`.
pub fn signed_root(x: f64, n: u32) -> f64 {
    let m = match n {
        1 => x.abs(),
        2 => x.abs().sqrt(),
        3 => x.abs().cbrt(),
        _ => x.abs().powf(1.0 / n as f64),
    };
    if x < 0.0 {
        -m
    } else {
        m
    }
}

/// Numerical settings shared by the shooting-based solvers.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SolverOptions {
    /// Number of uniform cells on `[0, 1]`.
    pub grid: usize,
    /// Relative tolerance on `λ`.
    pub tol: f64,
    pub lambda_min: f64,
    pub lambda_max: f64,
    /// `|v|` beyond this is treated as blow-up.
    pub cap: f64,
}

impl Default for SolverOptions {
    fn default() -> Self {
        Self {
            grid: 4096,
            tol: 1e-10,
            lambda_min: 1e-8,
            lambda_max: 1e8,
            cap: 1e12,
        }
    }
}

impl SolverOptions {
    pub fn with_grid(self, grid: usize) -> Self {
        Self { grid, ..self }
    }

    pub(crate) fn validate(&self) -> Result<()> {
        if self.grid < 8 {
            return Err(Error::InvalidArgument(format!("grid must be at least 8, got {}", self.grid)));
        }
        if !(self.tol > 0.0) {
            return Err(Error::InvalidArgument("tolerance must be positive".into()));
        }
        if !(self.lambda_min > 0.0 && self.lambda_min < self.lambda_max) {
            return Err(Error::InvalidArgument("need 0 < lambda_min < lambda_max".into()));
        }
        Ok(())
    }
}

/// Result of one initial-value integration.
#[derive(Debug, Clone)]
pub struct Shot {
    /// Stops at the first node past an early sign change.
    pub profile: RadialProfile,
    pub first_zero: Option<f64>,
    /// Signed boundary defect, carrying the sign of `v`: `v(1)` when `v` keeps
    /// its sign on `[0, 1]`, otherwise `-(1 - r_z) |v'(r_z)|` (mirrored for
    /// negative profiles). Continuous and monotone in `λ`.
    pub defect: f64,
}

struct Rhs<'a> {
    f: &'a Nonlinearity,
    dim: u32,
    lam_n: f64,
    sigma: f64,
    // Sign applied to q before the root: 1 for positive profiles, (-1)^N otherwise.
    tilt: f64,
}

impl Rhs<'_> {
    fn dv(&self, q: f64) -> f64 {
        -self.sigma * signed_root(self.tilt * q, self.dim)
    }

    fn dq(&self, r: f64, v: f64) -> f64 {
        self.lam_n * self.dim as f64 * r.powi(self.dim as i32 - 1) * self.f.eval(v)
    }
}

/// Cubic Hermite zero of `v` on `[r0, r0 + h]`, returning `(r_z, v'(r_z))`.
fn hermite_zero(r0: f64, h: f64, v0: f64, v1: f64, d0: f64, d1: f64) -> (f64, f64) {
    let val = |t: f64| {
        let t2 = t * t;
        let t3 = t2 * t;
        (2.0 * t3 - 3.0 * t2 + 1.0) * v0 + (t3 - 2.0 * t2 + t) * h * d0 + (-2.0 * t3 + 3.0 * t2) * v1 + (t3 - t2) * h * d1
    };
    let slope = |t: f64| {
        let t2 = t * t;
        ((6.0 * t2 - 6.0 * t) * v0 + (3.0 * t2 - 4.0 * t + 1.0) * h * d0 + (-6.0 * t2 + 6.0 * t) * v1 + (3.0 * t2 - 2.0 * t) * h * d1) / h
    };
    let t = if v1 == 0.0 {
        1.0
    } else {
        brent(|t| Ok(val(t)), 0.0, 1.0, v0, v1, 1e-15, 200).unwrap_or_else(|_| v0 / (v0 - v1))
    };
    (r0 + t * h, slope(t))
}

/// Integrates from `r = 0` with `v(0) = a` on a uniform grid with `opts.grid`
/// cells. The first `ceil(grid / 256)` cells use a two-term series so that
/// the `q ~ r^N` degeneracy never enters the Runge-Kutta stages.
pub fn shoot(f: &Nonlinearity, dim: u32, lambda: f64, a: f64, opts: &SolverOptions) -> Result<Shot> {
    if dim == 0 {
        return Err(Error::InvalidArgument("N must be at least 1".into()));
    }
    if !(lambda >= 0.0 && lambda.is_finite()) || !a.is_finite() {
        return Err(Error::InvalidArgument(format!("bad shooting data lambda={lambda}, a={a}")));
    }
    let m = opts.grid;
    let h = 1.0 / m as f64;
    let nodes = uniform_nodes(m);
    let sign = Sign::of(a);
    let sigma = sign.value();
    let parity = if dim % 2 == 0 { 1.0 } else { -1.0 };
    let rhs = Rhs {
        f,
        dim,
        lam_n: lambda.powi(dim as i32),
        sigma,
        tilt: if sigma > 0.0 { 1.0 } else { parity },
    };
    let nf = dim as f64;

    let fa = f.eval(a);
    if !fa.is_finite() {
        return Err(Error::Evaluation(a));
    }
    let c = sigma * lambda * signed_root(rhs.tilt * fa, dim);
    let ratio = if fa != 0.0 { f.deriv(a) / fa } else { 0.0 };
    if !ratio.is_finite() {
        return Err(Error::Evaluation(a));
    }
    let series = |r: f64| {
        let r2 = r * r;
        let corr = ratio * c * r2 / (2.0 * (nf + 2.0));
        let v = a - c * r2 / 2.0 + ratio * c * c * r2 * r2 / (8.0 * (nf + 2.0));
        let q = rhs.lam_n * fa * r.powi(dim as i32) * (1.0 - nf * corr);
        (v, q, -c * r * (1.0 - corr))
    };

    let k_series = m.div_ceil(256).min(m);
    // With λ far too large the leading term already crosses zero inside the
    // series cells; the series is then meaningless but the crossing is not.
    let r_s = nodes[k_series];
    if a != 0.0 && sigma * c > 0.0 && c.abs() * r_s * r_s / 2.0 >= a.abs() {
        let rz = (2.0 * a.abs() / c.abs()).sqrt();
        let slope = c.abs() * rz;
        return Ok(Shot {
            profile: RadialProfile {
                nodes: vec![0.0],
                values: vec![a],
                derivs: vec![0.0],
                sign,
                lambda,
                dim,
                grid: m,
            },
            first_zero: Some(rz),
            defect: -sigma * (1.0 - rz) * slope,
        });
    }
    let mut values = Vec::with_capacity(m + 1);
    let mut derivs = Vec::with_capacity(m + 1);
    let mut qs = Vec::with_capacity(m + 1);
    values.push(a);
    derivs.push(0.0);
    qs.push(0.0);

    let crossed = |v: f64| sigma * v <= 0.0 && a != 0.0;
    let mut first_zero = None;
    let mut zero_slope = 0.0;
    for i in 0..m {
        let r0 = nodes[i];
        let r1 = nodes[i + 1];
        let (v0, q0) = (values[i], qs[i]);
        let (v1, q1, d1) = if i < k_series {
            series(r1)
        } else {
            let k1v = rhs.dv(q0);
            let k1q = rhs.dq(r0, v0);
            let rm = r0 + 0.5 * h;
            let k2v = rhs.dv(q0 + 0.5 * h * k1q);
            let k2q = rhs.dq(rm, v0 + 0.5 * h * k1v);
            let k3v = rhs.dv(q0 + 0.5 * h * k2q);
            let k3q = rhs.dq(rm, v0 + 0.5 * h * k2v);
            let k4v = rhs.dv(q0 + h * k3q);
            let k4q = rhs.dq(r1, v0 + h * k3v);
            let v1 = v0 + h / 6.0 * (k1v + 2.0 * k2v + 2.0 * k3v + k4v);
            let q1 = q0 + h / 6.0 * (k1q + 2.0 * k2q + 2.0 * k3q + k4q);
            (v1, q1, rhs.dv(q1))
        };
        // A crossing decides the defect sign even if the step overshot wildly.
        let overshoot = v1.is_finite() && crossed(v1) && !crossed(v0);
        if !overshoot && (!(v1.is_finite() && q1.is_finite()) || v1.abs() > opts.cap) {
            return Err(Error::BlowUp { r: r1, value: v1.abs() });
        }
        values.push(v1);
        derivs.push(d1);
        qs.push(q1);
        if first_zero.is_none() && crossed(v1) && !crossed(v0) {
            let (rz, dz) = hermite_zero(r0, h, v0, v1, derivs[i], d1);
            first_zero = Some(rz);
            zero_slope = dz;
            if i + 1 < m {
                break;
            }
        }
    }
    let defect = match first_zero {
        None => *values.last().unwrap(),
        Some(rz) => -sigma * (1.0 - rz) * zero_slope.abs(),
    };
    Ok(Shot {
        profile: RadialProfile {
            nodes: nodes[..values.len()].to_vec(),
            values,
            derivs,
            sign,
            lambda,
            dim,
            grid: m,
        },
        first_zero,
        defect,
    })
}

/// `λ` with zero boundary defect for amplitude `a`. The bracket starts at
/// `guess` (default 1) and grows by factors of 4 within the option bounds;
/// Brent's method then refines it to relative `opts.tol`.
pub fn lambda_for_amplitude(
    f: &Nonlinearity,
    dim: u32,
    a: f64,
    opts: &SolverOptions,
    guess: Option<f64>,
) -> Result<f64> {
    opts.validate()?;
    if a == 0.0 || !a.is_finite() {
        return Err(Error::InvalidArgument(format!("amplitude must be finite and nonzero, got {a}")));
    }
    let sigma = a.signum();
    // Decreasing in λ for both signs.
    let d = |lam: f64| shoot(f, dim, lam, a, opts).map(|s| sigma * s.defect);
    let start = guess
        .filter(|g| g.is_finite() && *g > 0.0)
        .unwrap_or(1.0)
        .clamp(opts.lambda_min, opts.lambda_max);
    let no_bracket = || Error::NoBracket {
        amplitude: a,
        lo: opts.lambda_min,
        hi: opts.lambda_max,
    };
    let d0 = d(start)?;
    if d0 == 0.0 {
        return Ok(start);
    }
    let step = if guess.is_some() { 1.05 } else { 4.0 };
    let (mut lo, mut dlo, mut hi, mut dhi);
    if d0 > 0.0 {
        lo = start;
        dlo = d0;
        let mut factor = step;
        loop {
            hi = (lo * factor).min(opts.lambda_max);
            dhi = d(hi)?;
            if dhi <= 0.0 {
                break;
            }
            if hi >= opts.lambda_max {
                return Err(no_bracket());
            }
            lo = hi;
            dlo = dhi;
            factor = 4.0;
        }
    } else {
        hi = start;
        dhi = d0;
        let mut factor = step;
        loop {
            lo = (hi / factor).max(opts.lambda_min);
            dlo = d(lo)?;
            if dlo >= 0.0 {
                break;
            }
            if lo <= opts.lambda_min {
                return Err(no_bracket());
            }
            hi = lo;
            dhi = dlo;
            factor = 4.0;
        }
    }
    let lam = brent(d, lo, hi, dlo, dhi, opts.tol * lo, 200)?;
    // A sign change can also come from a jump in the defect; accept only a
    // root where the boundary value actually vanishes.
    let defect = d(lam)?;
    if defect.abs() > 1e-6 * a.abs() {
        return Err(Error::NotConverged(format!(
            "boundary defect {defect:e} at lambda = {lam} (sign change without a root)"
        )));
    }
    Ok(lam)
}

/// The converged profile at amplitude `a`.
pub fn profile_for_amplitude(
    f: &Nonlinearity,
    dim: u32,
    a: f64,
    opts: &SolverOptions,
    guess: Option<f64>,
) -> Result<RadialProfile> {
    let lam = lambda_for_amplitude(f, dim, a, opts, guess)?;
    let shot = shoot(f, dim, lam, a, opts)?;
    if !shot.profile.is_complete() {
        return Err(Error::NotConverged(format!(
            "profile at a={a}, lambda={lam} changes sign at r={:?}",
            shot.first_zero
        )));
    }
    Ok(shot.profile)
}

/// `T_f v(r) = ∫_r^1 (∫_0^s N τ^{N-1} f(v) dτ)^{1/N} ds` on the uniform grid
/// carrying `v`. Returns `(T_f v, (T_f v)')`; the last value and the first
/// derivative are exactly zero.
pub fn apply_tf(f: &Nonlinearity, dim: u32, v: &[f64]) -> (Vec<f64>, Vec<f64>) {
    let m = v.len() - 1;
    let h = 1.0 / m as f64;
    let nf = dim as f64;
    let g: Vec<f64> = v
        .iter()
        .enumerate()
        .map(|(i, &vi)| nf * (i as f64 * h).powi(dim as i32 - 1) * f.eval(vi))
        .collect();
    let inner = quadrature::cumulative(h, &g);
    let root: Vec<f64> = inner.iter().map(|&x| signed_root(x, dim)).collect();
    let w = quadrature::cumulative_from_right(h, &root);
    (w, root.iter().map(|x| -x).collect())
}

/// Settings for [`picard`].
#[derive(Debug, Clone, Copy)]
pub struct PicardOptions {
    pub tol: f64,
    pub maxiter: usize,
    pub cap: f64,
}

impl Default for PicardOptions {
    fn default() -> Self {
        Self {
            tol: 1e-10,
            maxiter: 20_000,
            cap: 1e12,
        }
    }
}

/// Fixed-point iteration `v ← λ T_f v` from a one-signed start. Negative
/// starts run on the reflected nonlinearity and are negated back.
pub fn picard(f: &Nonlinearity, dim: u32, lambda: f64, v0: &RadialProfile, opts: &PicardOptions) -> Result<RadialProfile> {
    if v0.sign == Sign::Negative {
        let r = reflect(f, dim);
        return picard(&r, dim, lambda, &v0.negated(), opts).map(|p| p.negated());
    }
    if !v0.is_complete() {
        return Err(Error::InvalidArgument("picard needs a profile on the full grid".into()));
    }
    let mut v = v0.values.clone();
    let mut norms = Vec::new();
    for it in 1..=opts.maxiter {
        let (w, dw) = apply_tf(f, dim, &v);
        let next: Vec<f64> = w.iter().map(|x| lambda * x).collect();
        let diff = next.iter().zip(&v).fold(0.0f64, |m, (a, b)| m.max((a - b).abs()));
        let norm = next.iter().fold(0.0f64, |m, x| m.max(x.abs()));
        norms.push(norm);
        if !norm.is_finite() || norm > opts.cap {
            return Err(Error::Diverged { iterations: it, norms });
        }
        v = next;
        if diff < opts.tol {
            return Ok(RadialProfile {
                nodes: v0.nodes.clone(),
                derivs: dw.iter().map(|x| lambda * x).collect(),
                values: v,
                sign: Sign::Positive,
                lambda,
                dim,
                grid: v0.grid,
            });
        }
    }
    Err(Error::Stalled {
        iterations: opts.maxiter,
        norms,
    })
}

/// Amplitude window for scans, log-spaced.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ScanOptions {
    pub a_min: f64,
    pub a_max: f64,
    pub points_per_decade: usize,
    pub threads: usize,
}

impl Default for ScanOptions {
    fn default() -> Self {
        Self {
            a_min: 1e-4,
            a_max: 1e4,
            points_per_decade: 200,
            threads: 1,
        }
    }
}

impl ScanOptions {
    pub fn amplitudes(&self) -> Result<Vec<f64>> {
        if !(self.a_min > 0.0 && self.a_min < self.a_max && self.a_max.is_finite()) {
            return Err(Error::InvalidArgument(format!(
                "need 0 < a_min < a_max, got [{}, {}]",
                self.a_min, self.a_max
            )));
        }
        if self.points_per_decade == 0 {
            return Err(Error::InvalidArgument("points per decade must be positive".into()));
        }
        let decades = (self.a_max / self.a_min).log10();
        let n = ((decades * self.points_per_decade as f64).round() as usize).max(1) + 1;
        Ok(log_space(self.a_min, self.a_max, n))
    }
}

/// Runs `work` on a dedicated pool when more than one thread is requested.
pub(crate) fn map_parallel<T, R, F>(items: &[T], threads: usize, work: F) -> Vec<R>
where
    T: Sync,
    R: Send,
    F: Fn(&T) -> R + Sync + Send,
{
    if threads <= 1 {
        return items.iter().map(work).collect();
    }
    match rayon::ThreadPoolBuilder::new().num_threads(threads).build() {
        Ok(pool) => pool.install(|| items.par_iter().map(&work).collect()),
        Err(_) => items.iter().map(work).collect(),
    }
}

/// `λ(a)` at every amplitude of the scan; failures are kept per point.
pub fn scan_lambda(
    f: &Nonlinearity,
    dim: u32,
    sign: Sign,
    amplitudes: &[f64],
    opts: &SolverOptions,
    threads: usize,
) -> Vec<Result<f64>> {
    let s = sign.value();
    map_parallel(amplitudes, threads, |&a| lambda_for_amplitude(f, dim, s * a, opts, None))
}

/// Relative spread below which `λ(a)` is treated as constant.
pub const CONTINUUM_SPAN: f64 = 1e-8;

/// Refines every crossing of `λ(a) = target` between consecutive successful
/// scan points, bisecting in `log a`. Amplitudes are magnitudes.
pub(crate) fn crossings(
    f: &Nonlinearity,
    dim: u32,
    sign: Sign,
    samples: &[(f64, f64)],
    target: f64,
    opts: &SolverOptions,
) -> Result<Vec<f64>> {
    if let Some(c) = continuum_level(samples) {
        if (target - c).abs() <= CONTINUUM_SPAN * c {
            return Err(Error::Continuum { lambda: c });
        }
        return Ok(Vec::new());
    }
    let s = sign.value();
    let mut out = Vec::new();
    for w in samples.windows(2) {
        let (a0, l0) = w[0];
        let (a1, l1) = w[1];
        let (g0, g1) = (l0 - target, l1 - target);
        if g0 == 0.0 {
            out.push(a0);
            continue;
        }
        if g0.signum() == g1.signum() || g1 == 0.0 {
            continue;
        }
        let guess = 0.5 * (l0 + l1);
        let x = brent(
            |x: f64| lambda_for_amplitude(f, dim, s * x.exp(), opts, Some(guess)).map(|l| l - target),
            a0.ln(),
            a1.ln(),
            g0,
            g1,
            1e-12,
            200,
        )?;
        out.push(x.exp());
    }
    if let Some(&(a, l)) = samples.last() {
        if l == target {
            out.push(a);
        }
    }
    Ok(out)
}

/// The common value when the sampled `λ` spread is below [`CONTINUUM_SPAN`].
pub fn continuum_level(samples: &[(f64, f64)]) -> Option<f64> {
    if samples.len() < 2 {
        return None;
    }
    let (lo, hi) = samples
        .iter()
        .fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), &(_, l)| (lo.min(l), hi.max(l)));
    let mid = 0.5 * (lo + hi);
    ((hi - lo) <= CONTINUUM_SPAN * mid).then_some(mid)
}

/// All one-sign solutions of sign `sign` at `lambda` whose amplitude lies in
/// the scan window. An empty list means none were found.
pub fn solve_at_lambda(
    f: &Nonlinearity,
    dim: u32,
    lambda: f64,
    sign: Sign,
    scan: &ScanOptions,
    opts: &SolverOptions,
) -> Result<Vec<RadialProfile>> {
    let amps = scan.amplitudes()?;
    let lams = scan_lambda(f, dim, sign, &amps, opts, scan.threads);
    let samples: Vec<(f64, f64)> = amps
        .iter()
        .zip(lams)
        .filter_map(|(&a, l)| l.ok().map(|l| (a, l)))
        .collect();
    let roots = crossings(f, dim, sign, &samples, lambda, opts)?;
    let s = sign.value();
    roots
        .into_iter()
        .map(|a| {
            let shot = shoot(f, dim, lambda, s * a, opts)?;
            Ok(shot.profile)
        })
        .collect()
}
