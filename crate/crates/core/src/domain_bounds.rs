//! Existence and nonexistence λ-intervals on a convex domain sandwiched
//! between two balls, `B(r_in) ⊆ Ω ⊆ B(r_out)`.
//!
//! A solution on a larger domain yields one on any smaller domain, so the
//! unit-ball existence window transfers inward from `B(r_out)` and the
//! nonexistence set transfers outward from `B(r_in)`. The lower edge of a
//! window is handled conservatively (see [`bounds_from_radii`]).

use serde::ser::{SerializeSeq, Serializer};
use serde::Serialize;

use crate::branch::{Branch, Fold};
use crate::error::{Error, Result};
use crate::nonlinearity::AsymptoticClass;

/// Unit-ball parameter equivalent to `lambda` posed on the ball of radius `r`.
/// `scale_lambda(x, 1/r)` is the inverse map.
pub fn scale_lambda(lambda: f64, r: f64) -> f64 {
    lambda * r * r
}

/// Parameter on the ball of radius `r` equivalent to `lambda` on the unit ball.
fn unscale(lambda: f64, r: f64) -> f64 {
    lambda / (r * r)
}

/// A λ-interval; `hi` may be `+inf`, written as `null` in JSON.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Interval {
    pub lo: f64,
    pub hi: f64,
}

impl Interval {
    pub fn new(lo: f64, hi: f64) -> Self {
        Self { lo, hi }
    }

    fn is_empty(&self) -> bool {
        !(self.hi > self.lo)
    }

    fn overlaps(&self, other: &Interval) -> bool {
        self.lo.max(other.lo) < self.hi.min(other.hi)
    }

    pub fn contains(&self, x: f64) -> bool {
        self.lo <= x && x <= self.hi
    }
}

impl Serialize for Interval {
    fn serialize<S: Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        let mut seq = s.serialize_seq(Some(2))?;
        for x in [self.lo, self.hi] {
            seq.serialize_element(&x.is_finite().then_some(x))?;
        }
        seq.end()
    }
}

/// Range of `λ` over the unit-ball branch, including its endpoint limits.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct UnitWindow {
    pub lo: f64,
    pub hi: f64,
}

/// Window from the sampled branch, its refined folds, and the limits
/// `λ₁/f₀` and `λ₁/f∞` approached as the amplitude tends to `0` and `∞`.
pub fn unit_window(branch: &Branch, folds: &[Fold], class: &AsymptoticClass, lambda1: f64) -> Result<UnitWindow> {
    let samples = branch.samples();
    if samples.is_empty() {
        return Err(Error::InvalidArgument("branch has no points".into()));
    }
    let ends = [class.f0.divide(lambda1), class.f_inf.divide(lambda1)];
    let all = samples.iter().map(|s| s.1).chain(folds.iter().map(|f| f.lambda)).chain(ends);
    let lo = all.clone().fold(f64::INFINITY, f64::min);
    let hi = all.fold(0.0, f64::max);
    Ok(UnitWindow { lo, hi })
}

#[derive(Debug, Clone, Serialize)]
pub struct ExistenceReport {
    pub r_in: f64,
    pub r_out: f64,
    pub regime: String,
    pub exists_on: Vec<Interval>,
    pub none_on: Vec<Interval>,
    pub unresolved: Vec<Interval>,
}

impl ExistenceReport {
    /// No existence interval meets a nonexistence interval.
    pub fn is_disjoint(&self) -> bool {
        self.exists_on
            .iter()
            .all(|e| self.none_on.iter().all(|n| !e.overlaps(n)))
    }

    pub fn to_json(&self) -> serde_json::Value {
        serde_json::to_value(self).expect("report is plain data")
    }
}

fn keep(parts: impl IntoIterator<Item = Interval>) -> Vec<Interval> {
    parts.into_iter().filter(|i| !i.is_empty()).collect()
}

/// Existence on `[lo/r_in², hi/r_out²]`, nonexistence on
/// `(0, lo/r_out²) ∪ (hi/r_in², ∞)`.
///
/// Upper edges follow the ball comparison directly. Lower edges use the
/// opposite radius: taking them from the same balls would make the two sets
/// overlap whenever `lo > 0` and `r_in < r_out`.
pub fn bounds_from_radii(window: UnitWindow, regime: &str, r_in: f64, r_out: f64) -> Result<ExistenceReport> {
    if !(r_in > 0.0 && r_in.is_finite() && r_out.is_finite()) {
        return Err(Error::InvalidArgument(format!("radii must be positive, got r_in={r_in}, r_out={r_out}")));
    }
    if r_in > r_out {
        return Err(Error::InvalidArgument(format!("r_in = {r_in} exceeds r_out = {r_out}")));
    }
    if !(window.lo >= 0.0 && window.hi >= window.lo) {
        return Err(Error::InvalidArgument(format!("bad unit window [{}, {}]", window.lo, window.hi)));
    }
    let e_lo = unscale(window.lo, r_in);
    let e_hi = unscale(window.hi, r_out);
    let n_lo = unscale(window.lo, r_out);
    let n_hi = unscale(window.hi, r_in);
    // r_in = r_out with a single-valued window leaves a degenerate point.
    let exists_on = if e_lo <= e_hi && (e_hi > e_lo || window.lo == window.hi) {
        vec![Interval::new(e_lo, e_hi)]
    } else {
        Vec::new()
    };
    let none_on = keep([Interval::new(0.0, n_lo), Interval::new(n_hi, f64::INFINITY)]);
    let unresolved = if exists_on.is_empty() {
        keep([Interval::new(n_lo, n_hi)])
    } else {
        keep([Interval::new(n_lo, e_lo), Interval::new(e_hi, n_hi)])
    };
    Ok(ExistenceReport {
        r_in,
        r_out,
        regime: regime.to_string(),
        exists_on,
        none_on,
        unresolved,
    })
}
