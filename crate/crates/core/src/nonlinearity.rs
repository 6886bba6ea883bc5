//! Nonlinearities `f`, their asymptotic classes at `0` and `+inf`, and the
//! derived nonlinearities (reflection and truncations) used to realize the
//! negative branch and the limiting-continuum constructions.
//!
//! A nonlinearity is built from a registry spec string `name:p1,p2,...`:
//!
//! | spec                 | `f(s)` for `s > 0`     |
//! |----------------------|------------------------|
//! | `power:k`            | `s^k`                  |
//! | `polynomial:c0,c1,..`| `c0 + c1 s + ...`      |
//! | `gelfand`            | `e^s`                  |
//! | `power_mix:k,m`      | `s^k (1 + s^m)`        |
//! | `power_decay:k`      | `s^k e^{-s}`           |
//! | `rational:k`         | `s^k / (1 + s^2)`      |
//!
//! Power-type families are extended to `s < 0` oddly through the signed power
//! `|s|^{k-1} s`; `polynomial` and `gelfand` are evaluated literally.

use std::fmt;
use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// `|x|^k`, exact for integral exponents.
pub(crate) fn abs_pow(x: f64, k: f64) -> f64 {
    let ax = x.abs();
    if k.fract() == 0.0 && k.abs() <= 64.0 {
        ax.powi(k as i32)
    } else {
        ax.powf(k)
    }
}

/// Signed power `sign(x) |x|^k`.
pub(crate) fn signed_pow(x: f64, k: f64) -> f64 {
    let m = abs_pow(x, k);
    if x < 0.0 {
        -m
    } else {
        m
    }
}

/// Which end of the real line a truncation rewrites.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum TruncationMode {
    /// Core `s^N / n^N` on `[-1/n, 1/n]`, so that `f0` becomes `1/n`.
    Small,
    /// Core `n^N s^N` on `[-1/n, 1/n]`, so that `f0` becomes `n`.
    Large,
}

type ScalarFn = Arc<dyn Fn(f64) -> f64 + Send + Sync>;

#[derive(Clone)]
enum Kind {
    Power { k: f64 },
    Polynomial { coeffs: Vec<f64> },
    Gelfand,
    PowerMix { k: f64, m: f64 },
    PowerDecay { k: f64 },
    Rational { k: f64 },
    Tabulated { f: ScalarFn, step: f64 },
    Reflected { inner: Arc<Nonlinearity>, dim: u32 },
    Truncated { inner: Arc<Nonlinearity>, n: u32, dim: u32, mode: TruncationMode },
}

/// An immutable evaluator for `f` and `f'`.
#[derive(Clone)]
pub struct Nonlinearity {
    name: String,
    params: Vec<f64>,
    kind: Kind,
}

impl fmt::Debug for Nonlinearity {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("Nonlinearity")
            .field("spec", &self.spec())
            .finish()
    }
}

impl fmt::Display for Nonlinearity {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.spec())
    }
}

fn invalid(family: &str, reason: impl Into<String>) -> Error {
    Error::InvalidParameter {
        family: family.to_string(),
        reason: reason.into(),
    }
}

fn positive(family: &str, label: &str, value: f64) -> Result<f64> {
    if value.is_finite() && value > 0.0 {
        Ok(value)
    } else {
        Err(invalid(family, format!("{label} must be positive, got {value}")))
    }
}

impl Nonlinearity {
    /// Parses a registry spec string such as `power:2`, `power_mix:2,2` or `gelfand`.
    pub fn parse(spec: &str) -> Result<Self> {
        let spec = spec.trim();
        let (name, rest) = match spec.split_once(':') {
            Some((n, r)) => (n.trim(), r.trim()),
            None => (spec, ""),
        };
        let params = if rest.is_empty() {
            Vec::new()
        } else {
            rest.split(',')
                .map(|p| {
                    p.trim()
                        .parse::<f64>()
                        .map_err(|_| invalid(name, format!("cannot parse `{}` as a number", p.trim())))
                })
                .collect::<Result<Vec<_>>>()?
        };
        Self::make(name, &params)
    }

    /// Builds a registered family from its name and parameter list.
    pub fn make(name: &str, params: &[f64]) -> Result<Self> {
        let arity = |n: usize| -> Result<()> {
            if params.len() == n {
                Ok(())
            } else {
                Err(invalid(
                    name,
                    format!("expected {n} parameter(s), got {}", params.len()),
                ))
            }
        };
        let kind = match name {
            "power" => {
                arity(1)?;
                Kind::Power { k: positive(name, "k", params[0])? }
            }
            "polynomial" => {
                if params.is_empty() {
                    return Err(invalid(name, "at least one coefficient required"));
                }
                if params.iter().any(|c| !c.is_finite()) {
                    return Err(invalid(name, "coefficients must be finite"));
                }
                Kind::Polynomial { coeffs: params.to_vec() }
            }
            "gelfand" => {
                arity(0)?;
                Kind::Gelfand
            }
            "power_mix" => {
                arity(2)?;
                Kind::PowerMix {
                    k: positive(name, "k", params[0])?,
                    m: positive(name, "m", params[1])?,
                }
            }
            "power_decay" => {
                arity(1)?;
                Kind::PowerDecay { k: positive(name, "k", params[0])? }
            }
            "rational" => {
                arity(1)?;
                Kind::Rational { k: positive(name, "k", params[0])? }
            }
            other => return Err(Error::UnknownFamily(other.to_string())),
        };
        Ok(Self {
            name: name.to_string(),
            params: params.to_vec(),
            kind,
        })
    }

    /// Signed power `|s|^{k-1} s`.
    pub fn power(k: f64) -> Result<Self> {
        Self::make("power", &[k])
    }

    /// A user-supplied nonlinearity whose derivative is taken by central
    /// differences with the given step.
    pub fn tabulated<F>(name: &str, step: f64, f: F) -> Result<Self>
    where
        F: Fn(f64) -> f64 + Send + Sync + 'static,
    {
        let step = positive(name, "finite-difference step", step)?;
        Ok(Self {
            name: name.to_string(),
            params: vec![step],
            kind: Kind::Tabulated { f: Arc::new(f), step },
        })
    }

    pub fn name(&self) -> &str {
        &self.name
    }

    pub fn params(&self) -> &[f64] {
        &self.params
    }

    /// Registry-style description; derived nonlinearities nest their source.
    pub fn spec(&self) -> String {
        match &self.kind {
            Kind::Reflected { inner, dim } => format!("reflect({};N={dim})", inner.spec()),
            Kind::Truncated { inner, n, dim, mode } => {
                let m = match mode {
                    TruncationMode::Small => "small",
                    TruncationMode::Large => "large",
                };
                format!("truncate({};n={n},N={dim},{m})", inner.spec())
            }
            _ if self.params.is_empty() => self.name.clone(),
            _ => {
                let ps: Vec<String> = self.params.iter().map(|p| p.to_string()).collect();
                format!("{}:{}", self.name, ps.join(","))
            }
        }
    }

    /// True when `deriv` is an analytic formula rather than a finite difference.
    pub fn has_analytic_derivative(&self) -> bool {
        match &self.kind {
            Kind::Tabulated { .. } => false,
            Kind::Reflected { inner, .. } | Kind::Truncated { inner, .. } => {
                inner.has_analytic_derivative()
            }
            _ => true,
        }
    }

    pub fn eval(&self, s: f64) -> f64 {
        match &self.kind {
            Kind::Power { k } => signed_pow(s, *k),
            Kind::Polynomial { coeffs } => coeffs.iter().rev().fold(0.0, |acc, c| acc * s + c),
            Kind::Gelfand => s.exp(),
            Kind::PowerMix { k, m } => signed_pow(s, *k) * (1.0 + abs_pow(s, *m)),
            Kind::PowerDecay { k } => signed_pow(s, *k) * (-s.abs()).exp(),
            Kind::Rational { k } => signed_pow(s, *k) / (1.0 + s * s),
            Kind::Tabulated { f, .. } => f(s),
            Kind::Reflected { inner, dim } => parity(*dim) * inner.eval(-s),
            Kind::Truncated { inner, n, dim, mode } => truncated_eval(inner, *n, *dim, *mode, s),
        }
    }

    pub fn deriv(&self, s: f64) -> f64 {
        match &self.kind {
            Kind::Power { k } => k * abs_pow(s, k - 1.0),
            Kind::Polynomial { coeffs } => coeffs
                .iter()
                .enumerate()
                .skip(1)
                .rev()
                .fold(0.0, |acc, (i, c)| acc * s + i as f64 * c),
            Kind::Gelfand => s.exp(),
            Kind::PowerMix { k, m } => {
                k * abs_pow(s, k - 1.0) * (1.0 + abs_pow(s, *m)) + m * abs_pow(s, k + m - 1.0)
            }
            Kind::PowerDecay { k } => abs_pow(s, k - 1.0) * (-s.abs()).exp() * (k - s.abs()),
            Kind::Rational { k } => {
                let d = 1.0 + s * s;
                abs_pow(s, k - 1.0) * (k * d - 2.0 * s * s) / (d * d)
            }
            Kind::Tabulated { f, step } => (f(s + step) - f(s - step)) / (2.0 * step),
            Kind::Reflected { inner, dim } => -parity(*dim) * inner.deriv(-s),
            Kind::Truncated { inner, n, dim, mode } => truncated_deriv(inner, *n, *dim, *mode, s),
        }
    }

    /// `f(s) s^N > 0` at every nonzero sample.
    pub fn satisfies_signum(&self, dim: u32, grid: &[f64]) -> bool {
        grid.iter()
            .filter(|&&s| s != 0.0)
            .all(|&s| self.eval(s) * s.powi(dim as i32) > 0.0)
    }
}

fn parity(dim: u32) -> f64 {
    if dim % 2 == 0 {
        1.0
    } else {
        -1.0
    }
}

/// Central finite difference of `f.eval`.
pub fn central_difference(f: &Nonlinearity, s: f64, h: f64) -> f64 {
    (f.eval(s + h) - f.eval(s - h)) / (2.0 * h)
}

/// The reflected nonlinearity `s -> (-1)^N f(-s)`.
///
/// A negative solution `v` for `f` is `-w` where `w` is a positive solution
/// for the reflected nonlinearity.
pub fn reflect(f: &Nonlinearity, dim: u32) -> Nonlinearity {
    if let Kind::Reflected { inner, dim: d } = &f.kind {
        if *d % 2 == dim % 2 {
            return (**inner).clone();
        }
    }
    Nonlinearity {
        name: "reflect".to_string(),
        params: vec![dim as f64],
        kind: Kind::Reflected {
            inner: Arc::new(f.clone()),
            dim,
        },
    }
}

/// Piecewise truncation `f^n`: a homogeneous core on `[-1/n, 1/n]`, linear
/// bridges on `±(1/n, 2/n)` and `f` itself for `|s| >= 2/n`.
pub fn truncate(f: &Nonlinearity, n: u32, dim: u32, mode: TruncationMode) -> Result<Nonlinearity> {
    if n == 0 {
        return Err(invalid("truncate", "n must be at least 1"));
    }
    Ok(Nonlinearity {
        name: "truncate".to_string(),
        params: vec![n as f64, dim as f64],
        kind: Kind::Truncated {
            inner: Arc::new(f.clone()),
            n,
            dim,
            mode,
        },
    })
}

fn core_scale(n: u32, dim: u32, mode: TruncationMode) -> f64 {
    let nn = (n as f64).powi(dim as i32);
    match mode {
        TruncationMode::Small => 1.0 / nn,
        TruncationMode::Large => nn,
    }
}

fn truncated_core(n: u32, dim: u32, mode: TruncationMode, s: f64) -> f64 {
    core_scale(n, dim, mode) * s.powi(dim as i32)
}

/// The bridge line through `(±1/n, core(±1/n))` and `(±2/n, f(±2/n))`,
/// with the side picked by the sign of `s`.
fn truncated_bridge(inner: &Nonlinearity, n: u32, dim: u32, mode: TruncationMode, s: f64) -> (f64, f64) {
    let nf = n as f64;
    let sign = if s < 0.0 { -1.0 } else { 1.0 };
    let c1 = truncated_core(n, dim, mode, sign / nf);
    let c2 = inner.eval(sign * 2.0 / nf);
    let slope = (c2 - c1) * nf * sign;
    (c1 + (c2 - c1) * (s.abs() * nf - 1.0), slope)
}

fn truncated_eval(inner: &Nonlinearity, n: u32, dim: u32, mode: TruncationMode, s: f64) -> f64 {
    let nf = n as f64;
    let a = s.abs();
    if a * nf <= 1.0 {
        truncated_core(n, dim, mode, s)
    } else if a * nf < 2.0 {
        truncated_bridge(inner, n, dim, mode, s).0
    } else {
        inner.eval(s)
    }
}

fn truncated_deriv(inner: &Nonlinearity, n: u32, dim: u32, mode: TruncationMode, s: f64) -> f64 {
    let nf = n as f64;
    let a = s.abs();
    if a * nf <= 1.0 {
        core_scale(n, dim, mode) * dim as f64 * s.powi(dim as i32 - 1)
    } else if a * nf < 2.0 {
        truncated_bridge(inner, n, dim, mode, s).1
    } else {
        inner.deriv(s)
    }
}

/// Limit of `f(s) / s^N` at one end, reported as its `N`-th root when finite.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", content = "value")]
pub enum Limit {
    Zero,
    Finite(f64),
    Infinite,
}

impl Limit {
    /// `lambda1 / limit` with `/0 = +inf` and `/inf = 0`.
    pub fn divide(self, lambda1: f64) -> f64 {
        match self {
            Limit::Zero => f64::INFINITY,
            Limit::Finite(c) => lambda1 / c,
            Limit::Infinite => 0.0,
        }
    }

    pub fn label(self) -> String {
        match self {
            Limit::Zero => "0".to_string(),
            Limit::Finite(c) => format!("{c}"),
            Limit::Infinite => "inf".to_string(),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AsymptoticClass {
    pub f0: Limit,
    pub f_inf: Limit,
}

impl AsymptoticClass {
    pub fn label(&self) -> String {
        format!("f0={}, finf={}", self.f0.label(), self.f_inf.label())
    }
}

#[derive(Debug, Clone, Copy)]
pub struct ClassifyOptions {
    pub small: (f64, f64),
    pub large: (f64, f64),
    pub samples: usize,
    pub slope_tol: f64,
}

impl Default for ClassifyOptions {
    fn default() -> Self {
        Self {
            small: (1e-6, 1e-3),
            large: (1e3, 1e6),
            samples: 31,
            slope_tol: 0.05,
        }
    }
}

pub(crate) fn log_space(lo: f64, hi: f64, n: usize) -> Vec<f64> {
    if n == 1 {
        return vec![lo];
    }
    let (a, b) = (lo.ln(), hi.ln());
    (0..n)
        .map(|i| (a + (b - a) * i as f64 / (n - 1) as f64).exp())
        .collect()
}

fn ls_slope(x: &[f64], y: &[f64]) -> f64 {
    let n = x.len() as f64;
    let mx = x.iter().sum::<f64>() / n;
    let my = y.iter().sum::<f64>() / n;
    let sxy: f64 = x.iter().zip(y).map(|(a, b)| (a - mx) * (b - my)).sum();
    let sxx: f64 = x.iter().map(|a| (a - mx) * (a - mx)).sum();
    sxy / sxx
}

/// Classifies one end. `toward` lists the probe points ordered toward the
/// limit point (decreasing `s` for `0`, increasing for `+inf`).
fn classify_end(
    f: &Nonlinearity,
    dim: u32,
    toward: &[f64],
    slope_tol: f64,
    end: &'static str,
) -> Result<Limit> {
    let ratios: Vec<f64> = toward
        .iter()
        .map(|&s| f.eval(s) / s.powi(dim as i32))
        .collect();
    if let Some(i) = ratios.iter().position(|r| r.is_nan()) {
        return Err(Error::Evaluation(toward[i]));
    }
    if ratios.iter().any(|&r| r < 0.0) {
        return Err(Error::Inconclusive {
            end,
            reason: "f(s)/s^N takes negative values".to_string(),
        });
    }
    let last = *ratios.last().unwrap();
    // Overflow or underflow at the extreme probe decides the limit when the
    // trend toward it is monotone.
    let monotone = |increasing: bool| {
        ratios.windows(2).all(|w| {
            if increasing {
                w[1] >= w[0] * (1.0 - 1e-12)
            } else {
                w[1] <= w[0] * (1.0 + 1e-12)
            }
        })
    };
    if last.is_infinite() {
        return if monotone(true) {
            Ok(Limit::Infinite)
        } else {
            Err(Error::Inconclusive {
                end,
                reason: "overflow without monotone growth".to_string(),
            })
        };
    }
    if last == 0.0 {
        return if monotone(false) {
            Ok(Limit::Zero)
        } else {
            Err(Error::Inconclusive {
                end,
                reason: "underflow without monotone decay".to_string(),
            })
        };
    }
    if ratios.iter().any(|&r| r == 0.0 || r.is_infinite()) {
        return Err(Error::Inconclusive {
            end,
            reason: "f(s)/s^N vanishes or overflows inside the probe range".to_string(),
        });
    }
    // d ln(ratio) / d ln(distance to the limit), positive when the ratio grows toward it.
    let xs: Vec<f64> = toward.iter().map(|s| s.ln()).collect();
    let ys: Vec<f64> = ratios.iter().map(|r| r.ln()).collect();
    let half = xs.len() / 2;
    let slope_near = ls_slope(&xs[half..], &ys[half..]);
    let slope_all = ls_slope(&xs, &ys);
    let growth = |slope: f64| if end == "0" { -slope } else { slope };
    let (g_near, g_all) = (growth(slope_near), growth(slope_all));
    if g_near.abs() <= slope_tol {
        let mean = ys[half..].iter().sum::<f64>() / (ys.len() - half) as f64;
        let spread = ys[half..].iter().map(|y| (y - mean).abs()).fold(0.0, f64::max);
        if spread > slope_tol {
            return Err(Error::Inconclusive {
                end,
                reason: format!("f(s)/s^N oscillates (log spread {spread:.3})"),
            });
        }
        if g_all.abs() <= 4.0 * slope_tol {
            return Ok(Limit::Finite(last.powf(1.0 / dim as f64)));
        }
        return Err(Error::Inconclusive {
            end,
            reason: format!("slope settles only on the near half ({slope_near:.3} vs {slope_all:.3})"),
        });
    }
    if g_near > slope_tol && monotone(true) {
        Ok(Limit::Infinite)
    } else if g_near < -slope_tol && monotone(false) {
        Ok(Limit::Zero)
    } else {
        Err(Error::Inconclusive {
            end,
            reason: format!("slope {slope_near:.3} is neither stable nor monotone"),
        })
    }
}

/// Estimates `(f0, finf)` by log-log slope fitting of `f(s)/s^N` on the probe ranges.
pub fn classify(f: &Nonlinearity, dim: u32, opts: &ClassifyOptions) -> Result<AsymptoticClass> {
    if dim == 0 {
        return Err(Error::InvalidArgument("N must be at least 1".into()));
    }
    let mut small = log_space(opts.small.0, opts.small.1, opts.samples);
    small.reverse();
    let large = log_space(opts.large.0, opts.large.1, opts.samples);
    Ok(AsymptoticClass {
        f0: classify_end(f, dim, &small, opts.slope_tol, "0")?,
        f_inf: classify_end(f, dim, &large, opts.slope_tol, "inf")?,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SubhomogeneityReport {
    pub holds: bool,
    /// Smallest `N f(s)/s - f'(s)` over the grid.
    pub min_margin: f64,
    pub first_violation: Option<f64>,
}

/// Checks `f'(s) < N f(s) / s` on a positive grid. Equality within a relative
/// `1e-12` counts as a violation.
pub fn check_subhomogeneity(f: &Nonlinearity, dim: u32, grid: &[f64]) -> Result<SubhomogeneityReport> {
    let mut min_margin = f64::INFINITY;
    let mut first_violation = None;
    for &s in grid {
        if !(s > 0.0) {
            return Err(Error::InvalidArgument(format!("grid point {s} is not positive")));
        }
        let fs = f.eval(s);
        let ds = f.deriv(s);
        if !fs.is_finite() || !ds.is_finite() {
            return Err(Error::Evaluation(s));
        }
        let rhs = dim as f64 * fs / s;
        let margin = rhs - ds;
        min_margin = min_margin.min(margin);
        if margin <= 1e-12 * (rhs.abs() + ds.abs()) && first_violation.is_none() {
            first_violation = Some(s);
        }
    }
    Ok(SubhomogeneityReport {
        holds: first_violation.is_none(),
        min_margin,
        first_violation,
    })
}
