//! Acceptance suite: one PASS/FAIL line per criterion, nonzero exit on any failure.

use std::f64::consts::PI;
use std::time::Instant;

use ma_radial::branch::{branch_endpoints, count_solutions, detect_fold, trace_branch, Branch, ExtremumKind};
use ma_radial::domain_bounds::{bounds_from_radii, unit_window, ExistenceReport, UnitWindow};
use ma_radial::eigensolver::{lambda1_shoot, mu1_inverse_iteration, mu1_scan, InverseOptions};
use ma_radial::nonlinearity::{classify, reflect, truncate, ClassifyOptions, Nonlinearity, TruncationMode};
use ma_radial::profile::{RadialProfile, Sign};
use ma_radial::radial_solver::{lambda_for_amplitude, profile_for_amplitude, shoot, ScanOptions, SolverOptions};
use ma_radial::stability::{branch_stability_sweep, identity_residual, linearized_eigs};
use ma_radial::Result;

type Outcome = Result<(bool, String)>;

fn f(spec: &str) -> Nonlinearity {
    Nonlinearity::parse(spec).expect("registered family")
}

fn window(a_min: f64, a_max: f64, ppd: usize) -> ScanOptions {
    ScanOptions {
        a_min,
        a_max,
        points_per_decade: ppd,
        threads: 4,
    }
}

fn solver(grid: usize) -> SolverOptions {
    SolverOptions::default().with_grid(grid)
}

fn lambda1(dim: u32) -> Result<f64> {
    Ok(lambda1_shoot(dim, &SolverOptions::default())?.value)
}

fn c1_analytic_eigenvalue() -> Outcome {
    let exact = PI * PI / 4.0;
    let t = Instant::now();
    let shot = lambda1_shoot(1, &SolverOptions::default())?.value;
    let t_shoot = t.elapsed().as_secs_f64();
    let t = Instant::now();
    let inv = mu1_inverse_iteration(2.0, &InverseOptions::default(), None)?.value;
    let t_inv = t.elapsed().as_secs_f64();
    let (es, ei) = ((shot - exact).abs(), (inv - exact).abs());
    Ok((
        es < 1e-8 && ei < 1e-3 && t_shoot < 1.0 && t_inv < 1.0,
        format!("|shoot-π²/4|={es:.2e} (<1e-8), |inverse-π²/4|={ei:.2e} (<1e-3), times {t_shoot:.3}s/{t_inv:.3}s (<1s)"),
    ))
}

fn c2_cross_method() -> Outcome {
    let mut worst: f64 = 0.0;
    let mut parts = Vec::new();
    for n in 1..=3u32 {
        let l = lambda1(n)?;
        let m = mu1_inverse_iteration(n as f64 + 1.0, &InverseOptions::default(), None)?.value;
        let rel = (l - m).abs() / l;
        worst = worst.max(rel);
        parts.push(format!("N={n}: {rel:.1e}"));
    }
    Ok((worst < 1e-3, format!("relative gaps {} (<1e-3)", parts.join(", "))))
}

fn c3_eta_lower_bound() -> Outcome {
    let scan = mu1_scan(2.0, 5.0, 0.1, &InverseOptions::default(), true, 1)?;
    let margins: Vec<f64> = scan.rows.iter().map(|r| r.eta1 - 1.0 / (r.p - 1.0)).collect();
    let min = margins.iter().copied().fold(f64::INFINITY, f64::min);
    Ok((
        margins.len() == 31 && min >= 0.0,
        format!("{} p values, min η₁ - 1/(p-1) = {min:.3e} (>=0)", margins.len()),
    ))
}

fn c4_continuity() -> Outcome {
    let opts = InverseOptions::default();
    let coarse = mu1_scan(2.0, 5.0, 0.1, &opts, true, 1)?.max_jump;
    let fine = mu1_scan(2.0, 5.0, 0.05, &opts, true, 1)?.max_jump;
    let ratio = coarse / fine;
    Ok((ratio >= 1.8, format!("max jump {coarse:.4e} -> {fine:.4e}, ratio {ratio:.3} (>=1.8)")))
}

fn c5_homogeneous_branch() -> Outcome {
    let mut ok = true;
    let mut parts = Vec::new();
    for n in 1..=2u32 {
        let l1 = lambda1(n)?;
        let b = trace_branch(&f(&format!("power:{n}")), n, Sign::Positive, &window(1e-3, 1e3, 10), &SolverOptions::default(), false)?;
        let dev = b.points.iter().map(|p| (p.lambda - l1).abs()).fold(0.0, f64::max);
        let prof = b.profile_at(1.0, Some(l1))?;
        let s = linearized_eigs(&prof, &b.f, n, 2)?;
        let scaled = (s.mu1() / s.eigenvalues[1]).abs();
        ok &= dev < 1e-6 && scaled < 1e-5 && b.gaps.is_empty() && b.points.len() == 61;
        parts.push(format!("N={n}: max|λ-λ₁|={dev:.1e}, |μ₁/μ₂|={scaled:.1e}"));
    }
    Ok((ok, format!("{} (<1e-6, <1e-5)", parts.join("; "))))
}

fn c6_bifurcation_endpoint() -> Outcome {
    let mut ok = true;
    let mut parts = Vec::new();
    for n in 1..=2u32 {
        let fnl = f(&format!("power_mix:{n},2"));
        let l1 = lambda1(n)?;
        let opts = SolverOptions::default();
        let small = lambda_for_amplitude(&fnl, n, 1e-4, &opts, Some(l1))?;
        let rel = (small - l1).abs() / l1;
        let b = trace_branch(&fnl, n, Sign::Positive, &window(1e2, 1e4, 10), &opts, false)?;
        let lams: Vec<f64> = b.points.iter().map(|p| p.lambda).collect();
        let decreasing = lams.windows(2).all(|w| w[1] < w[0]);
        let class = classify(&fnl, n, &ClassifyOptions::default())?;
        let full = trace_branch(&fnl, n, Sign::Positive, &window(1e-4, 1e4, 5), &opts, false)?;
        let to_zero = branch_endpoints(&full, &class, l1, 1e-3)?.large.observed == Some(0.0);
        ok &= rel < 1e-3 && decreasing && to_zero && b.gaps.is_empty();
        parts.push(format!(
            "N={n}: |λ(1e-4)-λ₁|/λ₁={rel:.1e}, decreasing on [1e2,1e4]={decreasing}, λ(1e4)={:.2e}, tail->0={to_zero}, gaps {}",
            lams.last().copied().unwrap_or(f64::NAN),
            b.gaps.len()
        ));
    }
    Ok((ok, parts.join("; ")))
}

fn c7_sublinear_regime() -> Outcome {
    let mut ok = true;
    let mut parts = Vec::new();
    for n in 1..=2u32 {
        let fnl = f(&format!("rational:{n}"));
        let l1 = lambda1(n)?;
        // For N = 1, λ(1e4) is above the default bracket ceiling of 1e8.
        let opts = SolverOptions { lambda_max: 1e12, ..SolverOptions::default() };
        let b = trace_branch(&fnl, n, Sign::Positive, &window(1e-4, 1e4, 10), &opts, false)?;
        let last = b.points.last().map(|p| (p.amplitude, p.lambda)).unwrap_or((0.0, 0.0));
        let class = classify(&fnl, n, &ClassifyOptions::default())?;
        let ends = branch_endpoints(&b, &class, l1, 1e-3)?;
        let small_err = ends.small.rel_error.unwrap_or(f64::INFINITY);
        let folds = detect_fold(&b)?;
        let c2 = count_solutions(&b, 2.0 * l1, &folds)?.count;
        let c05 = count_solutions(&b, 0.5 * l1, &folds)?.count;
        ok &= (last.0 - 1e4).abs() < 1e-6 && b.gaps.is_empty() && last.1 > 10.0 * l1 && small_err < 1e-3 && c2 == 1 && c05 == 0;
        parts.push(format!(
            "N={n}: λ({:.0e})/λ₁={:.1}, small-end err={small_err:.1e}, counts {c2}@2λ₁ {c05}@0.5λ₁, gaps {}",
            last.0,
            last.1 / l1,
            b.gaps.len()
        ));
    }
    Ok((ok, parts.join("; ")))
}

fn gelfand_branch(grid: usize) -> Result<Branch> {
    trace_branch(&f("gelfand"), 2, Sign::Positive, &window(1e-3, 30.0, 20), &solver(grid), false)
}

fn c8_gelfand_fold() -> Outcome {
    let coarse = detect_fold(&gelfand_branch(4096)?)?;
    let mut b = gelfand_branch(8192)?;
    let folds = detect_fold(&b)?;
    if folds.len() != 1 || coarse.len() != 1 || folds[0].kind != ExtremumKind::Max {
        return Ok((false, format!("expected one maximum, got {} / {}", coarse.len(), folds.len())));
    }
    let star = folds[0].lambda;
    let drift = (star - coarse[0].lambda).abs() / star;
    let lo = count_solutions(&b, 0.5 * star, &folds)?.count;
    let hi = count_solutions(&b, 1.5 * star, &folds)?.count;
    let sweep = branch_stability_sweep(&mut b, &folds, 4)?;
    let mismatch = sweep.fold_mismatch.unwrap_or(f64::INFINITY);
    Ok((
        drift < 1e-4 && lo == 2 && hi == 0 && mismatch < 1e-2,
        format!(
            "λ*={star:.10} (a*={:.6}), drift M 4096->8192 {drift:.1e} (<1e-4), counts {lo}@0.5λ* {hi}@1.5λ*, μ₁ sign change offset {mismatch:.1e} (<1e-2)",
            folds[0].amplitude
        ),
    ))
}

fn residual_at(fnl: &Nonlinearity, a: f64, grid: usize) -> Result<f64> {
    let p = profile_for_amplitude(fnl, 2, a, &solver(grid), None)?;
    let s = linearized_eigs(&p, fnl, 2, 2)?;
    Ok(identity_residual(&p, &s.phi1, s.mu1(), fnl, 2))
}

fn c9_stability_regime() -> Outcome {
    let fnl = f("power_decay:2");
    let mut b = trace_branch(&fnl, 2, Sign::Positive, &window(1e-2, 10.0, 10), &SolverOptions::default(), false)?;
    let folds = detect_fold(&b)?;
    let sweep = branch_stability_sweep(&mut b, &folds, 4)?;
    let stable = b.points.iter().all(|p| p.mu1_lin.is_some_and(|m| m > 0.0) && p.morse == Some(0));
    let increasing = b.points.iter().all(|p| p.dlambda_da.is_some_and(|d| d > 0.0));
    let (mut r_fine, mut r_coarse) = (0.0f64, 0.0f64);
    let mut worst_ratio = f64::INFINITY;
    for p in &b.points {
        let fine = residual_at(&fnl, p.amplitude, 4096)?;
        let coarse = residual_at(&fnl, p.amplitude, 2048)?;
        r_fine = r_fine.max(fine);
        r_coarse = r_coarse.max(coarse);
        worst_ratio = worst_ratio.min(coarse / fine);
    }
    let ratio = r_coarse / r_fine;
    Ok((
        stable && increasing && sweep.all_stable && sweep.dlambda_sign == 1 && r_fine < 1e-4 && ratio >= 4.0,
        format!(
            "{} points: μ₁>0 & Morse 0 = {stable}, dλ/da>0 = {increasing}, max residual {r_fine:.2e} (<1e-4), M 2048->4096 shrink {ratio:.3}x (>=4; worst single point {worst_ratio:.3}x)",
            b.points.len()
        ),
    ))
}

fn c10_double_zero() -> Outcome {
    let mut ok = true;
    let mut parts = Vec::new();
    for (spec, n) in [("power:2", 2u32), ("power_mix:2,2", 2), ("gelfand_free", 1)] {
        let fnl = if spec == "gelfand_free" { f("rational:1") } else { f(spec) };
        let half = 0.5 * lambda1(n)?;
        let opts = SolverOptions::default();
        let zero = shoot(&fnl, n, half, 0.0, &opts)?.profile.sup_norm();
        let tiny = shoot(&fnl, n, half, 1e-8, &opts)?.profile.sup_norm();
        ok &= zero < 1e-12 && tiny < 1e-6;
        parts.push(format!("{}(N={n}): {zero:.1e}/{tiny:.1e}", fnl.spec()));
    }
    Ok((ok, format!("sup-norms at a=0 / a=1e-8, λ=λ₁/2: {} (<1e-12, <1e-6)", parts.join(", "))))
}

fn max_abs_diff(x: &RadialProfile, y: &RadialProfile) -> f64 {
    if x.values.len() != y.values.len() {
        return f64::INFINITY;
    }
    x.values.iter().zip(&y.values).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max)
}

fn c11_reflection() -> Outcome {
    let g = f("gelfand");
    let opts = SolverOptions::default();
    let mut worst: f64 = 0.0;
    let mut parts = Vec::new();
    // Negative gelfand solutions need f(s)s^N > 0 for s < 0, i.e. even N.
    let mut total = 0;
    for n in [2u32, 4] {
        let r = reflect(&g, n);
        let pos = trace_branch(&r, n, Sign::Positive, &window(1e-2, 10.0, 5), &opts, true)?;
        let mut dev: f64 = 0.0;
        for p in &pos.points {
            let reflected = p.profile.as_ref().expect("profiles kept").negated();
            let direct = profile_for_amplitude(&g, n, -p.amplitude, &opts, Some(p.lambda))?;
            let scale = p.amplitude.max(1.0);
            dev = dev
                .max((direct.lambda - p.lambda).abs() / p.lambda)
                .max(max_abs_diff(&direct, &reflected) / scale);
        }
        worst = worst.max(dev);
        total += pos.points.len();
        parts.push(format!("N={n}: {dev:.1e} over {} amplitudes", pos.points.len()));
    }
    Ok((worst < 1e-8 && total == 32, format!("direct ν=- shooting vs negated reflected branch: {} (<1e-8)", parts.join(", "))))
}

fn reports_close(a: &ExistenceReport, b: &ExistenceReport, r: f64) -> bool {
    let sets = |x: &ExistenceReport| [x.exists_on.clone(), x.none_on.clone(), x.unresolved.clone()];
    sets(a).iter().zip(sets(b).iter()).all(|(u, s)| {
        u.len() == s.len()
            && u.iter().zip(s).all(|(iu, is)| {
                [(iu.lo, is.lo), (iu.hi, is.hi)].iter().all(|&(x, y)| {
                    let want = x / (r * r);
                    (want.is_infinite() && y.is_infinite()) || (want - y).abs() <= 1e-6 * want.abs().max(f64::MIN_POSITIVE)
                })
            })
    })
}

fn c12_domain_bounds() -> Outcome {
    let opts = SolverOptions::default();
    let mut windows: Vec<(String, UnitWindow)> = Vec::new();
    for (spec, n, a_max) in [("gelfand", 2u32, 30.0), ("rational:2", 2, 1e4), ("power_decay:2", 2, 10.0), ("power_mix:1,2", 1, 1e3)] {
        let fnl = f(spec);
        let class = classify(&fnl, n, &ClassifyOptions::default())?;
        let b = trace_branch(&fnl, n, Sign::Positive, &window(1e-3, a_max, 5), &opts, false)?;
        let folds = detect_fold(&b)?;
        windows.push((format!("{spec}(N={n})"), unit_window(&b, &folds, &class, lambda1(n)?)?));
    }
    let mut scaled_ok = true;
    let mut disjoint_ok = true;
    let mut tested = 0;
    for (_, w) in &windows {
        let unit = bounds_from_radii(*w, "", 1.0, 1.0)?;
        for r in [0.5, 2.0] {
            scaled_ok &= reports_close(&unit, &bounds_from_radii(*w, "", r, r)?, r);
        }
        for (ri, ro) in [(1.0, 1.0), (0.5, 0.5), (2.0, 2.0), (0.8, 1.25), (0.5, 2.0), (0.9, 1.0), (1.0, 3.0)] {
            disjoint_ok &= bounds_from_radii(*w, "", ri, ro)?.is_disjoint();
            tested += 1;
        }
    }
    let names: Vec<String> = windows.iter().map(|(n, w)| format!("{n} [{:.4}, {:.4}]", w.lo, w.hi)).collect();
    Ok((
        scaled_ok && disjoint_ok,
        format!("R∈{{0.5,2}} scaling ok={scaled_ok}, disjoint in {tested} reports={disjoint_ok}; unit windows {}", names.join(", ")),
    ))
}

/// Largest one-sided jump at the knots ±1/n, ±2/n, relative to the function
/// scale on the bridge. Each side is extrapolated linearly from just inside
/// its own piece.
fn knot_jump(t: &Nonlinearity, n: u32) -> f64 {
    let mut worst: f64 = 0.0;
    for sign in [1.0, -1.0] {
        let k1 = sign / n as f64;
        let k2 = 2.0 * k1;
        let d1 = 1e-9 * k1;
        let scale = t.eval(k1).abs().max(t.eval(k2).abs());
        let bridge_at_k1 = t.eval(k1 + d1) - t.deriv(k1 + d1) * d1;
        let bridge_at_k2 = t.eval(k2 - d1) + t.deriv(k2 - d1) * d1;
        worst = worst
            .max((bridge_at_k1 - t.eval(k1)).abs() / scale)
            .max((bridge_at_k2 - t.eval(k2)).abs() / scale);
    }
    worst
}

fn c13_truncation() -> Outcome {
    let opts = SolverOptions::default();
    let mut ok = true;
    let mut parts = Vec::new();
    for (spec, mode) in [("power_decay:2", TruncationMode::Small), ("gelfand", TruncationMode::Large)] {
        let base = f(spec);
        let amps = window(0.5, 5.0, 10);
        let reference = trace_branch(&base, 2, Sign::Positive, &amps, &opts, false)?;
        let mut devs = Vec::new();
        let mut jump: f64 = 0.0;
        for n in [10u32, 100, 1000] {
            let t = truncate(&base, n, 2, mode)?;
            jump = jump.max(knot_jump(&t, n));
            let b = trace_branch(&t, 2, Sign::Positive, &amps, &opts, false)?;
            if b.points.len() != reference.points.len() {
                return Ok((false, format!("{spec}: truncated branch n={n} has gaps")));
            }
            let dev = b
                .points
                .iter()
                .zip(&reference.points)
                .map(|(p, q)| (p.lambda - q.lambda).abs() / q.lambda)
                .fold(0.0, f64::max);
            devs.push(dev);
        }
        let monotone = devs.windows(2).all(|w| w[1] < w[0]);
        ok &= monotone && jump < 1e-12;
        parts.push(format!(
            "{spec}: knot jump {jump:.1e}, deviation n=10/100/1000: {:.2e}/{:.2e}/{:.2e}",
            devs[0], devs[1], devs[2]
        ));
    }
    Ok((ok, format!("{} (jump<1e-12, strictly decreasing) on a∈[0.5,5]", parts.join("; "))))
}

fn main() {
    let criteria: [(&str, fn() -> Outcome); 13] = [
        ("analytic eigenvalue N=1", c1_analytic_eigenvalue),
        ("lambda1(N) = mu1(N+1)", c2_cross_method),
        ("eta1(p) >= 1/(p-1)", c3_eta_lower_bound),
        ("mu1(p) continuity", c4_continuity),
        ("homogeneous vertical branch", c5_homogeneous_branch),
        ("bifurcation from lambda1, decay to 0", c6_bifurcation_endpoint),
        ("sublinear regime and counts", c7_sublinear_regime),
        ("gelfand fold", c8_gelfand_fold),
        ("stability regime power_decay", c9_stability_regime),
        ("double-zero rigidity", c10_double_zero),
        ("reflection of negative branch", c11_reflection),
        ("domain bounds scaling/disjointness", c12_domain_bounds),
        ("truncation families", c13_truncation),
    ];
    let mut failed = 0;
    for (i, (name, check)) in criteria.iter().enumerate() {
        let t = Instant::now();
        let (pass, detail) = match check() {
            Ok(r) => r,
            Err(e) => (false, format!("error: {e}")),
        };
        if !pass {
            failed += 1;
        }
        println!(
            "{} [{:>2}] {name}: {detail} ({:.1}s)",
            if pass { "PASS" } else { "FAIL" },
            i + 1,
            t.elapsed().as_secs_f64()
        );
    }
    println!("acceptance: {} passed, {failed} failed", criteria.len() - failed);
    if failed > 0 {
        std::process::exit(1);
    }
}
