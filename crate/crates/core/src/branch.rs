//! The amplitude-parameterized branch `a ↦ λ(a)`: tracing, folds, solution
//! counts and endpoint limits.

use std::io::Write;

use serde::Serialize;

use crate::error::{Error, Result};
use crate::nonlinearity::{reflect, AsymptoticClass, Limit, Nonlinearity};
use crate::profile::{RadialProfile, Sign};
use crate::radial_solver::{
    continuum_level, crossings, lambda_for_amplitude, map_parallel, profile_for_amplitude, ScanOptions, SolverOptions,
};
use crate::roots::golden_max;

#[derive(Debug, Clone)]
pub struct BranchPoint {
    /// `|v(0)|`.
    pub amplitude: f64,
    pub lambda: f64,
    /// Kept only when the trace was asked to keep profiles.
    pub profile: Option<RadialProfile>,
    pub mu1_lin: Option<f64>,
    pub morse: Option<usize>,
    pub dlambda_da: Option<f64>,
}

#[derive(Debug, Clone, Serialize)]
pub struct Gap {
    pub amplitude: f64,
    pub reason: String,
}

#[derive(Debug, Clone)]
pub struct Branch {
    pub sign: Sign,
    pub dim: u32,
    pub f: Nonlinearity,
    pub points: Vec<BranchPoint>,
    pub gaps: Vec<Gap>,
    pub opts: SolverOptions,
}

/// Traces `λ(a)` on the log-spaced amplitude window. Negative branches are
/// computed as the positive branch of the reflected nonlinearity; stored
/// profiles are negated back. Per-point failures become gaps.
pub fn trace_branch(
    f: &Nonlinearity,
    dim: u32,
    sign: Sign,
    scan: &ScanOptions,
    opts: &SolverOptions,
    keep_profiles: bool,
) -> Result<Branch> {
    opts.validate()?;
    let amps = scan.amplitudes()?;
    let work = match sign {
        Sign::Positive => f.clone(),
        Sign::Negative => reflect(f, dim),
    };
    let results = map_parallel(&amps, scan.threads, |&a| {
        if keep_profiles {
            profile_for_amplitude(&work, dim, a, opts, None).map(|p| (p.lambda, Some(p)))
        } else {
            lambda_for_amplitude(&work, dim, a, opts, None).map(|l| (l, None))
        }
    });
    let mut points = Vec::new();
    let mut gaps = Vec::new();
    for (&a, r) in amps.iter().zip(results) {
        match r {
            Ok((lambda, profile)) => points.push(BranchPoint {
                amplitude: a,
                lambda,
                profile: profile.map(|p| if sign == Sign::Negative { p.negated() } else { p }),
                mu1_lin: None,
                morse: None,
                dlambda_da: None,
            }),
            Err(e) => gaps.push(Gap {
                amplitude: a,
                reason: e.to_string(),
            }),
        }
    }
    Ok(Branch {
        sign,
        dim,
        f: f.clone(),
        points,
        gaps,
        opts: *opts,
    })
}

impl Branch {
    pub fn samples(&self) -> Vec<(f64, f64)> {
        self.points.iter().map(|p| (p.amplitude, p.lambda)).collect()
    }

    /// `λ(a)` at an amplitude magnitude off the sampled grid.
    pub fn lambda_at(&self, a: f64, guess: Option<f64>) -> Result<f64> {
        lambda_for_amplitude(&self.f, self.dim, self.sign.value() * a, &self.opts, guess)
    }

    /// The converged profile at an amplitude magnitude.
    pub fn profile_at(&self, a: f64, guess: Option<f64>) -> Result<RadialProfile> {
        profile_for_amplitude(&self.f, self.dim, self.sign.value() * a, &self.opts, guess)
    }

    /// `Some(λ)` when the branch is a vertical line in the `(λ, a)` plane.
    pub fn continuum(&self) -> Option<f64> {
        continuum_level(&self.samples())
    }

    /// Writes `a,lambda,vmax,morse,mu1_lin,dlambda_da,fold`. Refined folds are
    /// merged in as extra rows flagged with `fold = 1`.
    pub fn write_csv<W: Write>(&self, w: W, folds: &[Fold]) -> Result<()> {
        let opt = |x: Option<f64>| x.map(|v| v.to_string()).unwrap_or_default();
        let mut rows: Vec<(f64, [String; 7])> = self
            .points
            .iter()
            .map(|p| {
                (
                    p.amplitude,
                    [
                        p.amplitude.to_string(),
                        p.lambda.to_string(),
                        p.amplitude.to_string(),
                        p.morse.map(|m| m.to_string()).unwrap_or_default(),
                        opt(p.mu1_lin),
                        opt(p.dlambda_da),
                        "0".to_string(),
                    ],
                )
            })
            .collect();
        for fd in folds {
            rows.push((
                fd.amplitude,
                [
                    fd.amplitude.to_string(),
                    fd.lambda.to_string(),
                    fd.amplitude.to_string(),
                    String::new(),
                    String::new(),
                    "0".to_string(),
                    "1".to_string(),
                ],
            ));
        }
        rows.sort_by(|x, y| x.0.total_cmp(&y.0));
        let mut wr = csv::Writer::from_writer(w);
        wr.write_record(["a", "lambda", "vmax", "morse", "mu1_lin", "dlambda_da", "fold"])?;
        for (_, r) in rows {
            wr.write_record(&r)?;
        }
        wr.flush()?;
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum ExtremumKind {
    Max,
    Min,
}

/// An interior extremum of `λ(a)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Fold {
    pub lambda: f64,
    pub amplitude: f64,
    pub kind: ExtremumKind,
}

/// Indices of interior extrema, ignoring wiggles smaller than `delta(λ)`.
fn discrete_extrema(lams: &[f64], delta: impl Fn(f64) -> f64) -> Vec<(usize, ExtremumKind)> {
    let mut out = Vec::new();
    if lams.len() < 3 {
        return out;
    }
    let (mut imax, mut imin) = (0, 0);
    let mut trend: Option<ExtremumKind> = None; // direction of travel: Max = rising
    let mut ext = 0;
    for i in 1..lams.len() {
        let l = lams[i];
        match trend {
            None => {
                if l > lams[imax] {
                    imax = i;
                }
                if l < lams[imin] {
                    imin = i;
                }
                if lams[imax] - lams[imin] > delta(lams[imax]) {
                    if imax > imin {
                        trend = Some(ExtremumKind::Max);
                        ext = imax;
                    } else {
                        trend = Some(ExtremumKind::Min);
                        ext = imin;
                    }
                }
            }
            Some(ExtremumKind::Max) => {
                if l >= lams[ext] {
                    ext = i;
                } else if lams[ext] - l > delta(lams[ext]) {
                    out.push((ext, ExtremumKind::Max));
                    trend = Some(ExtremumKind::Min);
                    ext = i;
                }
            }
            Some(ExtremumKind::Min) => {
                if l <= lams[ext] {
                    ext = i;
                } else if l - lams[ext] > delta(lams[ext]) {
                    out.push((ext, ExtremumKind::Min));
                    trend = Some(ExtremumKind::Max);
                    ext = i;
                }
            }
        }
    }
    out
}

/// All interior extrema of `λ(a)`, each refined by golden-section search in
/// `log a` between the neighbouring samples. Empty for monotone branches
/// and for the vertical homogeneous branch.
pub fn detect_fold(branch: &Branch) -> Result<Vec<Fold>> {
    if branch.continuum().is_some() {
        return Ok(Vec::new());
    }
    let pts = &branch.points;
    let lams: Vec<f64> = pts.iter().map(|p| p.lambda).collect();
    let noise = 100.0 * branch.opts.tol;
    let mut folds = Vec::new();
    for (i, kind) in discrete_extrema(&lams, |l| noise * l.abs()) {
        let lo = pts[i.saturating_sub(1)].amplitude.ln();
        let hi = pts[(i + 1).min(pts.len() - 1)].amplitude.ln();
        let s = match kind {
            ExtremumKind::Max => 1.0,
            ExtremumKind::Min => -1.0,
        };
        let guess = pts[i].lambda;
        let (x, v) = golden_max(|x: f64| branch.lambda_at(x.exp(), Some(guess)).map(|l| s * l), lo, hi, 1e-9, 200)?;
        folds.push(Fold {
            lambda: s * v,
            amplitude: x.exp(),
            kind,
        });
    }
    Ok(folds)
}

/// Number of one-sign solutions at `lambda` within the branch window.
#[derive(Debug, Clone, Serialize)]
pub struct CountReport {
    pub lambda: f64,
    pub count: usize,
    pub amplitudes: Vec<f64>,
    /// Set when `lambda` sits within `1e-6` relative of a fold value, where
    /// the count is not robust.
    pub near_fold: bool,
}

/// Counts crossings of `λ(a) = lambda`, each refined by bisection in `log a`.
/// Fails with [`Error::Continuum`] on a vertical branch at that level.
pub fn count_solutions(branch: &Branch, lambda: f64, folds: &[Fold]) -> Result<CountReport> {
    let amps = crossings(&branch.f, branch.dim, branch.sign, &branch.samples(), lambda, &branch.opts)?;
    let near_fold = folds.iter().any(|f| (f.lambda - lambda).abs() <= 1e-6 * lambda.abs());
    Ok(CountReport {
        lambda,
        count: amps.len(),
        amplitudes: amps,
        near_fold,
    })
}

/// Behaviour of `λ(a)` at one end of the window.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Trend {
    Converges(f64),
    ToZero,
    ToInfinity,
}

impl Trend {
    pub fn value(self) -> f64 {
        match self {
            Trend::Converges(v) => v,
            Trend::ToZero => 0.0,
            Trend::ToInfinity => f64::INFINITY,
        }
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct EndpointEstimate {
    /// `"0"` or `"inf"`: which amplitude limit.
    pub end: &'static str,
    /// Extrapolated limit; `None` encodes `+inf`.
    pub observed: Option<f64>,
    /// `λ₁/f₀` or `λ₁/f∞`; `None` encodes `+inf`.
    pub expected: Option<f64>,
    pub rel_error: Option<f64>,
    pub agrees: bool,
    /// `d log λ / d log a` over the tail decade.
    pub tail_slope: f64,
}

#[derive(Debug, Clone, Serialize)]
pub struct EndpointReport {
    pub small: EndpointEstimate,
    pub large: EndpointEstimate,
}

fn finite_or_none(x: f64) -> Option<f64> {
    x.is_finite().then_some(x)
}

/// Aitken extrapolation through three samples equally spaced in `log a`.
fn aitken(l0: f64, l1: f64, l2: f64) -> f64 {
    let den = l0 + l2 - 2.0 * l1;
    let a = (l0 * l2 - l1 * l1) / den;
    if den.abs() <= 1e-14 * l2.abs() || !a.is_finite() {
        l2
    } else {
        a
    }
}

/// `tail` runs toward the limit (first element farthest from it).
fn extrapolate(tail: &[(f64, f64)], toward_zero: bool, slope_tol: f64) -> Result<(Trend, f64)> {
    if tail.len() < 3 {
        return Err(Error::InsufficientTail(format!("{} usable points", tail.len())));
    }
    let (a0, l0) = tail[0];
    let (a2, l2) = tail[tail.len() - 1];
    let span = (a2 / a0).log10().abs();
    if span < 0.99 {
        return Err(Error::InsufficientTail(format!("tail spans only {span:.2} decades")));
    }
    // Growth of log λ as the limit is approached.
    let slope = (l2 / l0).ln() / (a2 / a0).ln();
    let growth = if toward_zero { -slope } else { slope };
    if growth > slope_tol {
        return Ok((Trend::ToInfinity, slope));
    }
    if growth < -slope_tol {
        return Ok((Trend::ToZero, slope));
    }
    let mid = (a0.ln() + a2.ln()) / 2.0;
    let l1 = tail
        .iter()
        .min_by(|x, y| (x.0.ln() - mid).abs().total_cmp(&(y.0.ln() - mid).abs()))
        .unwrap()
        .1;
    Ok((Trend::Converges(aitken(l0, l1, l2)), slope))
}

/// Extrapolates both ends from the outermost decade of samples and compares
/// with `λ₁/f₀` (small amplitudes) and `λ₁/f∞` (large amplitudes).
pub fn branch_endpoints(branch: &Branch, class: &AsymptoticClass, lambda1: f64, rel_tol: f64) -> Result<EndpointReport> {
    let pts = branch.samples();
    if pts.len() < 3 {
        return Err(Error::InsufficientTail(format!("{} points", pts.len())));
    }
    let decade = |from_start: bool| -> Vec<(f64, f64)> {
        if from_start {
            let a0 = pts[0].0;
            let mut t: Vec<_> = pts.iter().copied().take_while(|p| p.0 <= a0 * 10.0 * (1.0 + 1e-9)).collect();
            t.reverse();
            t
        } else {
            let a1 = pts[pts.len() - 1].0;
            pts.iter().copied().filter(|p| p.0 >= a1 / 10.0 * (1.0 - 1e-9)).collect()
        }
    };
    let estimate = |end: &'static str, limit: Limit, tail: Vec<(f64, f64)>| -> Result<EndpointEstimate> {
        let (trend, slope) = extrapolate(&tail, end == "0", 0.05)?;
        let expected = limit.divide(lambda1);
        let observed = trend.value();
        let (rel_error, agrees) = match trend {
            Trend::Converges(v) if expected.is_finite() && expected > 0.0 => {
                let e = (v - expected).abs() / expected;
                (Some(e), e <= rel_tol)
            }
            Trend::ToZero => (None, expected == 0.0),
            Trend::ToInfinity => (None, expected.is_infinite()),
            _ => (None, false),
        };
        Ok(EndpointEstimate {
            end,
            observed: finite_or_none(observed),
            expected: finite_or_none(expected),
            rel_error,
            agrees,
            tail_slope: slope,
        })
    };
    Ok(EndpointReport {
        small: estimate("0", class.f0, decade(true))?,
        large: estimate("inf", class.f_inf, decade(false))?,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::eigensolver::lambda1_shoot;
    use crate::nonlinearity::{classify, ClassifyOptions};

    fn opts() -> SolverOptions {
        SolverOptions::default().with_grid(1024)
    }

    fn scan(a_min: f64, a_max: f64, ppd: usize) -> ScanOptions {
        ScanOptions {
            a_min,
            a_max,
            points_per_decade: ppd,
            threads: 4,
        }
    }

    #[test]
    fn extrema_ignore_noise() {
        let l = [1.0, 1.0 + 1e-12, 1.0, 1.0 + 2e-12, 1.0];
        assert!(discrete_extrema(&l, |x| 1e-8 * x).is_empty());
        let l = [1.0, 2.0, 3.0, 2.5, 1.0, 0.5, 0.7];
        assert_eq!(
            discrete_extrema(&l, |x| 1e-8 * x),
            vec![(2, ExtremumKind::Max), (5, ExtremumKind::Min)]
        );
    }

    #[test]
    fn homogeneous_branch_is_vertical() {
        let f = Nonlinearity::power(2.0).unwrap();
        let b = trace_branch(&f, 2, Sign::Positive, &scan(1e-3, 1e3, 4), &opts(), false).unwrap();
        let l1 = lambda1_shoot(2, &opts()).unwrap().value;
        assert!(b.points.iter().all(|p| (p.lambda - l1).abs() < 1e-8));
        assert!(b.continuum().is_some());
        assert!(detect_fold(&b).unwrap().is_empty());
        assert!(matches!(count_solutions(&b, l1, &[]), Err(Error::Continuum { .. })));
        assert_eq!(count_solutions(&b, 1.0, &[]).unwrap().count, 0);
        let class = classify(&f, 2, &ClassifyOptions::default()).unwrap();
        let ends = branch_endpoints(&b, &class, l1, 1e-6).unwrap();
        assert!(ends.small.agrees && ends.large.agrees);
    }

    #[test]
    fn gelfand_has_one_fold_and_two_solutions_below_it() {
        let f = Nonlinearity::parse("gelfand").unwrap();
        let b = trace_branch(&f, 2, Sign::Positive, &scan(1e-3, 30.0, 8), &opts(), false).unwrap();
        assert!(b.gaps.is_empty(), "{:?}", b.gaps);
        let folds = detect_fold(&b).unwrap();
        assert_eq!(folds.len(), 1);
        let star = folds[0];
        assert_eq!(star.kind, ExtremumKind::Max);
        assert_eq!(count_solutions(&b, 0.5 * star.lambda, &folds).unwrap().count, 2);
        assert_eq!(count_solutions(&b, 1.5 * star.lambda, &folds).unwrap().count, 0);
        let sols = crate::radial_solver::solve_at_lambda(
            &f,
            2,
            0.5 * star.lambda,
            Sign::Positive,
            &scan(1e-3, 30.0, 8),
            &opts(),
        )
        .unwrap();
        assert_eq!(sols.len(), 2);
        for s in &sols {
            assert!(s.terminal().abs() < 1e-8);
        }
    }

    #[test]
    fn rational_and_mix_endpoints() {
        let o = opts();
        let l1 = lambda1_shoot(2, &o).unwrap().value;
        let rat = Nonlinearity::parse("rational:2").unwrap();
        let b = trace_branch(&rat, 2, Sign::Positive, &scan(1e-4, 1e4, 4), &o, false).unwrap();
        assert!(b.gaps.is_empty(), "{:?}", b.gaps);
        let class = classify(&rat, 2, &ClassifyOptions::default()).unwrap();
        let ends = branch_endpoints(&b, &class, l1, 1e-3).unwrap();
        assert!(ends.small.agrees, "{:?}", ends.small);
        assert!(ends.large.agrees && ends.large.observed.is_none());
        assert!(detect_fold(&b).unwrap().is_empty());
        assert_eq!(count_solutions(&b, 2.0 * l1, &[]).unwrap().count, 1);
        assert_eq!(count_solutions(&b, 0.5 * l1, &[]).unwrap().count, 0);

        let mix = Nonlinearity::parse("power_mix:2,2").unwrap();
        let b = trace_branch(&mix, 2, Sign::Positive, &scan(1e-4, 1e4, 4), &o, false).unwrap();
        let class = classify(&mix, 2, &ClassifyOptions::default()).unwrap();
        let ends = branch_endpoints(&b, &class, l1, 1e-3).unwrap();
        assert!(ends.small.agrees && ends.large.agrees, "{ends:?}");
        assert!(b.points.iter().all(|p| p.lambda < l1));
    }

    #[test]
    fn negative_branch_mirrors_reflection() {
        let f = Nonlinearity::parse("gelfand").unwrap();
        let o = opts();
        let s = scan(1e-2, 10.0, 3);
        let neg = trace_branch(&f, 2, Sign::Negative, &s, &o, true).unwrap();
        let pos = trace_branch(&reflect(&f, 2), 2, Sign::Positive, &s, &o, true).unwrap();
        assert_eq!(neg.points.len(), pos.points.len());
        for (n, p) in neg.points.iter().zip(&pos.points) {
            assert_eq!(n.lambda, p.lambda);
            let (np, pp) = (n.profile.as_ref().unwrap(), p.profile.as_ref().unwrap());
            assert_eq!(np.sign, Sign::Negative);
            assert!(np.values.iter().zip(&pp.values).all(|(x, y)| x == &-y));
            // Direct shooting with a negative amplitude gives the same branch.
            let direct = neg.lambda_at(n.amplitude, None).unwrap();
            assert!((direct - n.lambda).abs() <= 1e-8 * n.lambda);
        }
    }

    #[test]
    fn csv_flags_fold_rows() {
        let f = Nonlinearity::parse("gelfand").unwrap();
        let b = trace_branch(&f, 1, Sign::Positive, &scan(1e-2, 10.0, 3), &opts(), false).unwrap();
        let folds = detect_fold(&b).unwrap();
        assert_eq!(folds.len(), 1);
        let mut buf = Vec::new();
        b.write_csv(&mut buf, &folds).unwrap();
        let text = String::from_utf8(buf).unwrap();
        assert!(text.starts_with("a,lambda,vmax,morse,mu1_lin,dlambda_da,fold\n"));
        assert_eq!(text.lines().filter(|l| l.ends_with(",1")).count(), 1);
        // N = 1 Gelfand fold: λ* = 0.878457... for -v'' = λ e^v on (-1, 1).
        assert!((folds[0].lambda - 0.878_457_679_727_2).abs() < 1e-6, "{}", folds[0].lambda);
    }
}
