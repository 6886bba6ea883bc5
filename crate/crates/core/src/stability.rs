//! Linearized stability of one-sign solutions.
//!
//! About a solution `v` the linearized problem is
//! `-(w φ')' - λ^N r^{N-1} f'(v) φ = (μ/N) φ`, `w = (-v')^{N-1}`, with
//! `φ(1) = 0`. It is discretized in flux form on the profile grid (cell
//! volumes `h/2` at the origin, `h` elsewhere), symmetrized, and solved by
//! Sturm-sequence bisection. Negative profiles are analysed through their
//! reflection.

use serde::Serialize;

use crate::branch::{Branch, Fold};
use crate::error::{Error, Result};
use crate::nonlinearity::{check_subhomogeneity, log_space, reflect, Nonlinearity};
use crate::profile::{RadialProfile, Sign};
use crate::quadrature;
use crate::radial_solver::map_parallel;
use crate::roots::brent;

/// Symmetric tridiagonal matrix: `diag[i]` and `off[i] = T[i][i+1]`.
#[derive(Debug, Clone)]
pub struct Tridiagonal {
    pub diag: Vec<f64>,
    pub off: Vec<f64>,
}

impl Tridiagonal {
    pub fn len(&self) -> usize {
        self.diag.len()
    }

    pub fn is_empty(&self) -> bool {
        self.diag.is_empty()
    }

    /// Number of eigenvalues strictly below `x`.
    pub fn count_below(&self, x: f64) -> usize {
        let mut count = 0;
        let mut d = 1.0;
        for i in 0..self.len() {
            let b2 = if i == 0 { 0.0 } else { self.off[i - 1] * self.off[i - 1] };
            d = self.diag[i] - x - if i == 0 { 0.0 } else { b2 / d };
            if d == 0.0 {
                d = -f64::EPSILON * (self.diag[i].abs() + x.abs()).max(f64::MIN_POSITIVE);
            }
            if d < 0.0 {
                count += 1;
            }
        }
        count
    }

    fn gershgorin(&self) -> (f64, f64) {
        let n = self.len();
        let mut lo = f64::INFINITY;
        let mut hi = f64::NEG_INFINITY;
        for i in 0..n {
            let r = if i > 0 { self.off[i - 1].abs() } else { 0.0 } + if i + 1 < n { self.off[i].abs() } else { 0.0 };
            lo = lo.min(self.diag[i] - r);
            hi = hi.max(self.diag[i] + r);
        }
        (lo, hi)
    }

    /// The `k` smallest eigenvalues, ascending, by bisection on the Sturm count.
    pub fn smallest(&self, k: usize) -> Vec<f64> {
        let (glo, ghi) = self.gershgorin();
        let scale = glo.abs().max(ghi.abs()).max(f64::MIN_POSITIVE);
        (0..k.min(self.len()))
            .map(|j| {
                let (mut lo, mut hi) = (glo, ghi);
                while hi - lo > 4.0 * f64::EPSILON * scale {
                    let mid = 0.5 * (lo + hi);
                    if mid <= lo || mid >= hi {
                        break;
                    }
                    if self.count_below(mid) > j {
                        hi = mid;
                    } else {
                        lo = mid;
                    }
                }
                0.5 * (lo + hi)
            })
            .collect()
    }

    /// Solves `(T - s I) x = b` by the Thomas algorithm.
    fn solve_shifted(&self, s: f64, b: &[f64]) -> Vec<f64> {
        let n = self.len();
        let mut c = vec![0.0; n];
        let mut d = vec![0.0; n];
        let mut denom = self.diag[0] - s;
        c[0] = if n > 1 { self.off[0] / denom } else { 0.0 };
        d[0] = b[0] / denom;
        for i in 1..n {
            denom = self.diag[i] - s - self.off[i - 1] * c[i - 1];
            if i + 1 < n {
                c[i] = self.off[i] / denom;
            }
            d[i] = (b[i] - self.off[i - 1] * d[i - 1]) / denom;
        }
        let mut x = d;
        for i in (0..n - 1).rev() {
            let next = x[i + 1];
            x[i] -= c[i] * next;
        }
        x
    }
}

/// Spectrum of the linearized problem about one profile.
#[derive(Debug, Clone)]
pub struct SlSpectrum {
    /// Smallest `μ`, ascending.
    pub eigenvalues: Vec<f64>,
    /// Number of negative `μ`.
    pub morse: usize,
    /// Principal eigenfunction on the profile grid, `φ₁(1) = 0`, sup-normalized and positive.
    pub phi1: Vec<f64>,
}

impl SlSpectrum {
    pub fn mu1(&self) -> f64 {
        self.eigenvalues[0]
    }
}

/// Relative boundary defect accepted as a converged solution.
pub const BOUNDARY_TOL: f64 = 1e-6;

fn check_input(profile: &RadialProfile, f: &Nonlinearity) -> Result<()> {
    if !f.has_analytic_derivative() {
        return Err(Error::NonAnalytic(f.spec()));
    }
    if !profile.is_complete() {
        return Err(Error::NotConverged("profile does not reach r = 1".into()));
    }
    let scale = profile.amplitude().abs().max(f64::MIN_POSITIVE);
    if profile.terminal().abs() > BOUNDARY_TOL * scale {
        return Err(Error::NotConverged(format!("boundary defect {:e}", profile.terminal())));
    }
    Ok(())
}

/// The symmetrized operator (spectral parameter `μ/N`) and the cell volumes.
pub fn assemble(profile: &RadialProfile, f: &Nonlinearity, dim: u32) -> (Tridiagonal, Vec<f64>) {
    let parts = Parts::new(profile, f, dim);
    let h = parts.h;
    let m = parts.vol.len();
    let diag: Vec<f64> = (0..m)
        .map(|i| {
            let left = if i == 0 { 0.0 } else { parts.w_half[i - 1] };
            (left + parts.w_half[i]) / (h * parts.vol[i]) + parts.pot[i]
        })
        .collect();
    let off: Vec<f64> = (0..m - 1)
        .map(|i| -parts.w_half[i] / (h * (parts.vol[i] * parts.vol[i + 1]).sqrt()))
        .collect();
    (Tridiagonal { diag, off }, parts.vol)
}

/// Flux weights at half nodes, cell volumes and the potential at nodes.
struct Parts {
    h: f64,
    w_half: Vec<f64>,
    vol: Vec<f64>,
    pot: Vec<f64>,
}

impl Parts {
    fn new(profile: &RadialProfile, f: &Nonlinearity, dim: u32) -> Self {
        let m = profile.grid;
        let h = profile.step();
        let lam_n = profile.lambda.powi(dim as i32);
        let d = &profile.derivs;
        Self {
            h,
            w_half: (0..m)
                .map(|i| (-(d[i] + d[i + 1]) / 2.0).max(0.0).powi(dim as i32 - 1))
                .collect(),
            vol: (0..m).map(|i| if i == 0 { h / 2.0 } else { h }).collect(),
            pot: (0..m)
                .map(|i| -lam_n * profile.nodes[i].powi(dim as i32 - 1) * f.deriv(profile.values[i]))
                .collect(),
        }
    }

    /// Discrete Rayleigh quotient with the stiffness term summed in flux form,
    /// which avoids the `O(ε/h²)` cancellation of forming `T φ`.
    fn rayleigh(&self, phi: &[f64]) -> f64 {
        let m = self.vol.len();
        let mut num = 0.0;
        let mut den = 0.0;
        for i in 0..m {
            let jump = phi[i + 1] - phi[i];
            num += self.w_half[i] * jump * jump / self.h + self.vol[i] * self.pot[i] * phi[i] * phi[i];
            den += self.vol[i] * phi[i] * phi[i];
        }
        num / den
    }
}

/// The `k` smallest eigenvalues `μ` (at least one), the Morse index and `φ₁`.
pub fn linearized_eigs(profile: &RadialProfile, f: &Nonlinearity, dim: u32, k: usize) -> Result<SlSpectrum> {
    if profile.sign == Sign::Negative {
        return linearized_eigs(&profile.negated(), &reflect(f, dim), dim, k);
    }
    check_input(profile, f)?;
    let (t, vol) = assemble(profile, f, dim);
    let nus = t.smallest(k.max(2));
    let morse = t.count_below(0.0);

    // Inverse iteration just below ν₁ keeps T - sI positive definite.
    let gap = (nus[1] - nus[0]).abs().max(1e-12 * nus[0].abs().max(1.0));
    let shift = nus[0] - 1e-3 * gap;
    let mut y = vec![1.0; t.len()];
    for _ in 0..8 {
        let z = t.solve_shifted(shift, &y);
        let n = z.iter().fold(0.0f64, |a, x| a.max(x.abs()));
        y = z.iter().map(|x| x / n).collect();
    }
    let mut phi: Vec<f64> = y.iter().zip(&vol).map(|(x, b)| x / b.sqrt()).collect();
    phi.push(0.0);
    let top = phi.iter().copied().fold(0.0f64, |a, x| if x.abs() > a.abs() { x } else { a });
    for x in &mut phi {
        *x /= top;
    }
    let n = dim as f64;
    let mut nus = nus;
    nus[0] = Parts::new(profile, f, dim).rayleigh(&phi);
    Ok(SlSpectrum {
        eigenvalues: nus.iter().take(k.max(1)).map(|x| n * x).collect(),
        morse,
        phi1: phi,
    })
}

/// Relative defect of `μ₁ ∫ φ₁ v = N ∫ λ^N r^{N-1} φ₁ (N f(v) - f'(v) v)`,
/// scaled by `N ∫ λ^N r^{N-1} φ₁ (N |f| + |f' v|)`.
pub fn identity_residual(profile: &RadialProfile, phi1: &[f64], mu1: f64, f: &Nonlinearity, dim: u32) -> f64 {
    if profile.sign == Sign::Negative {
        return identity_residual(&profile.negated(), phi1, mu1, &reflect(f, dim), dim);
    }
    let h = profile.step();
    let n = dim as f64;
    let lam_n = profile.lambda.powi(dim as i32);
    let lhs_g: Vec<f64> = phi1.iter().zip(&profile.values).map(|(p, v)| p * v).collect();
    let mut rhs_g = Vec::with_capacity(phi1.len());
    let mut den_g = Vec::with_capacity(phi1.len());
    for i in 0..phi1.len() {
        let v = profile.values[i];
        let wgt = n * lam_n * profile.nodes[i].powi(dim as i32 - 1) * phi1[i];
        let (fv, dfv) = (f.eval(v), f.deriv(v) * v);
        rhs_g.push(wgt * (n * fv - dfv));
        den_g.push(wgt.abs() * (n * fv.abs() + dfv.abs()));
    }
    let lhs = mu1 * quadrature::integrate(h, &lhs_g);
    let rhs = quadrature::integrate(h, &rhs_g);
    let den = quadrature::integrate(h, &den_g);
    (lhs - rhs).abs() / den
}

/// Findings of a stability sweep along a branch.
#[derive(Debug, Clone, Serialize)]
pub struct SweepReport {
    /// `f'(s) < N f(s)/s` on the sampled amplitude range.
    pub subhomogeneous: bool,
    pub all_stable: bool,
    /// `+1` or `-1` when `dλ/da` keeps one sign, `0` otherwise.
    pub dlambda_sign: i8,
    /// Amplitudes where `μ₁` changes sign, refined by bisection.
    pub mu1_zero_crossings: Vec<f64>,
    /// Largest `|a_cross - a*| / a*` over detected folds; `None` without folds.
    pub fold_mismatch: Option<f64>,
    /// Common `λ` of a vertical branch.
    pub continuum: Option<f64>,
    /// Every point with strictly positive `N f(v) - f'(v) v` has `μ₁ > 0`.
    pub sign_implication_holds: bool,
    /// Whether the regime expectations were met: uniqueness/monotonicity for
    /// subhomogeneous `f`, sign change at each fold otherwise.
    pub expectations_met: bool,
}

fn principal(branch: &Branch, a: f64, guess: f64) -> Result<f64> {
    let p = branch.profile_at(a, Some(guess))?;
    Ok(linearized_eigs(&p, &branch.f, branch.dim, 2)?.mu1())
}

fn strictly_subhomogeneous_on(profile: &RadialProfile, f: &Nonlinearity, dim: u32) -> bool {
    let (p, f) = if profile.sign == Sign::Negative {
        (profile.negated(), reflect(f, dim))
    } else {
        (profile.clone(), f.clone())
    };
    let n = dim as f64;
    p.values[..p.values.len() - 1]
        .iter()
        .all(|&v| n * f.eval(v) - f.deriv(v) * v > 0.0)
}

/// Fills `mu1_lin`, `morse` and `dlambda_da` on every branch point and
/// cross-checks the regime: subhomogeneous `f` should give `μ₁ > 0` and a
/// one-signed `dλ/da`; folds should coincide with sign changes of `μ₁`.
pub fn branch_stability_sweep(branch: &mut Branch, folds: &[Fold], threads: usize) -> Result<SweepReport> {
    if !branch.f.has_analytic_derivative() {
        return Err(Error::NonAnalytic(branch.f.spec()));
    }
    let dim = branch.dim;
    let f = branch.f.clone();
    let b: &Branch = branch;
    let results: Vec<Result<(f64, usize, bool)>> = map_parallel(&b.points, threads, |pt| {
        let owned;
        let prof = match &pt.profile {
            Some(p) => p,
            None => {
                owned = b.profile_at(pt.amplitude, Some(pt.lambda))?;
                &owned
            }
        };
        let s = linearized_eigs(prof, &f, dim, 2)?;
        Ok((s.mu1(), s.morse, strictly_subhomogeneous_on(prof, &f, dim)))
    });
    let mut implication = true;
    for (pt, r) in branch.points.iter_mut().zip(results) {
        let (mu, morse, sub) = r?;
        pt.mu1_lin = Some(mu);
        pt.morse = Some(morse);
        if sub && mu <= 0.0 {
            implication = false;
        }
    }
    let n = branch.points.len();
    for i in 0..n {
        let (l, r) = (i.saturating_sub(1), (i + 1).min(n - 1));
        if l == r {
            continue;
        }
        let (p, q) = (&branch.points[l], &branch.points[r]);
        let slope = (q.lambda - p.lambda) / (q.amplitude - p.amplitude);
        branch.points[i].dlambda_da = Some(slope);
    }

    let continuum = branch.continuum();
    let amps: Vec<f64> = branch.points.iter().map(|p| p.amplitude).collect();
    let (a_lo, a_hi) = (amps.first().copied().unwrap_or(1.0), amps.last().copied().unwrap_or(1.0));
    let subhomogeneous = check_subhomogeneity(&f, dim, &log_space(a_lo * 1e-2, a_hi, 400))?.holds;
    let all_stable = branch.points.iter().all(|p| p.mu1_lin.is_some_and(|m| m > 0.0));
    let slopes: Vec<f64> = branch.points.iter().filter_map(|p| p.dlambda_da).collect();
    let dlambda_sign = if !slopes.is_empty() && slopes.iter().all(|&s| s > 0.0) {
        1
    } else if !slopes.is_empty() && slopes.iter().all(|&s| s < 0.0) {
        -1
    } else {
        0
    };

    let mut crossings = Vec::new();
    if continuum.is_none() {
        for w in branch.points.windows(2) {
            let (m0, m1) = (w[0].mu1_lin.unwrap(), w[1].mu1_lin.unwrap());
            if m0.signum() != m1.signum() {
                let guess = 0.5 * (w[0].lambda + w[1].lambda);
                let x = brent(
                    |x: f64| principal(branch, x.exp(), guess),
                    w[0].amplitude.ln(),
                    w[1].amplitude.ln(),
                    m0,
                    m1,
                    1e-10,
                    100,
                )?;
                crossings.push(x.exp());
            }
        }
    }
    let fold_mismatch = (!folds.is_empty()).then(|| {
        folds
            .iter()
            .map(|fd| {
                crossings
                    .iter()
                    .map(|c| (c - fd.amplitude).abs() / fd.amplitude)
                    .fold(f64::INFINITY, f64::min)
            })
            .fold(0.0, f64::max)
    });
    let expectations_met = if continuum.is_some() {
        true
    } else if subhomogeneous {
        all_stable && dlambda_sign != 0
    } else {
        fold_mismatch.is_none_or(|m| m < 1e-2) && crossings.len() >= folds.len()
    };
    Ok(SweepReport {
        subhomogeneous,
        all_stable,
        dlambda_sign,
        mu1_zero_crossings: crossings,
        fold_mismatch,
        continuum,
        sign_implication_holds: implication,
        expectations_met,
    })
}
