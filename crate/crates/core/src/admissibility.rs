//! Admissible `(alpha, beta)` pairs for the Li–Yau estimate of
//! `u_t = Δu + u^p`, the threshold exponent `p̄_n`, and the restricted
//! region on which the time-convexity estimate applies.
//!
//! A pair is admissible for `(n, p)` when
//!
//! ```text
//! (p-1)(βp-α) + 4α(1-α)(1-β)/n ≥ 0      (curvature-term condition)
//! p < 1 + 8α(1-β)/n                      (strict slack condition)
//! ```
//!
//! and then `ε = n(p-1)/(8α(1-β)²) · [1 + 8α(1-β)/n - p] > 0`.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Dimension and nonlinearity exponent.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Problem {
    pub n: u32,
    pub p: f64,
}

impl Problem {
    pub fn new(n: u32, p: f64) -> Result<Self> {
        if n == 0 {
            return Err(Error::domain("dimension n must be at least 1"));
        }
        if !(p.is_finite() && p > 0.0) {
            return Err(Error::domain(format!("exponent p must be finite and > 0, got {p}")));
        }
        Ok(Problem { n, p })
    }

    fn nf(&self) -> f64 {
        f64::from(self.n)
    }
}

/// A candidate `(alpha, beta)`.
///
/// Pairs built with [`ParamPair::classical`] remember that `beta` is the
/// reciprocal of a specific exponent, so that the admissibility test can
/// use the exact reductions `βp = 1` instead of the rounded product.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "RawPair", into = "RawPair")]
pub struct ParamPair {
    alpha: f64,
    beta: f64,
    reciprocal_of: Option<f64>,
}

#[derive(Serialize, Deserialize)]
struct RawPair {
    alpha: f64,
    beta: f64,
}

impl TryFrom<RawPair> for ParamPair {
    type Error = Error;
    fn try_from(raw: RawPair) -> Result<Self> {
        ParamPair::new(raw.alpha, raw.beta)
    }
}

impl From<ParamPair> for RawPair {
    fn from(pair: ParamPair) -> Self {
        RawPair {
            alpha: pair.alpha,
            beta: pair.beta,
        }
    }
}

impl ParamPair {
    /// Accepts any `alpha, beta ∈ [0, 1]`; the degenerate values `alpha = 0`
    /// and `beta = 1` are rejected later by the operations that need them.
    pub fn new(alpha: f64, beta: f64) -> Result<Self> {
        if !(0.0..=1.0).contains(&alpha) {
            return Err(Error::domain(format!("alpha must lie in [0, 1], got {alpha}")));
        }
        if !(0.0..=1.0).contains(&beta) {
            return Err(Error::domain(format!("beta must lie in [0, 1], got {beta}")));
        }
        Ok(ParamPair {
            alpha,
            beta,
            reciprocal_of: None,
        })
    }

    /// The pair `(1, 1/p)`, admissible for every `p < 8/n` when `n ≤ 3`.
    pub fn classical(p: f64) -> Result<Self> {
        if !(p.is_finite() && p > 1.0) {
            return Err(Error::domain(format!("classical pair needs p > 1, got {p}")));
        }
        Ok(ParamPair {
            alpha: 1.0,
            beta: 1.0 / p,
            reciprocal_of: Some(p),
        })
    }

    pub fn alpha(&self) -> f64 {
        self.alpha
    }

    pub fn beta(&self) -> f64 {
        self.beta
    }

    fn is_classical_for(&self, p: f64) -> bool {
        self.alpha == 1.0 && self.reciprocal_of == Some(p)
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct AdmissibilityResult {
    pub admissible: bool,
    /// Left side of the curvature-term condition.
    pub cond2_value: f64,
    /// `1 + 8α(1-β)/n - p`.
    pub cond1_slack: f64,
    pub epsilon: Option<f64>,
}

fn cond2_raw(n: f64, p: f64, alpha: f64, beta: f64) -> f64 {
    (p - 1.0) * (beta * p - alpha) + 4.0 * alpha * (1.0 - alpha) * (1.0 - beta) / n
}

fn cond1_slack_raw(n: f64, p: f64, alpha: f64, beta: f64) -> f64 {
    1.0 + 8.0 * alpha * (1.0 - beta) / n - p
}

fn epsilon_raw(n: f64, p: f64, alpha: f64, beta: f64, slack: f64) -> f64 {
    let one_minus_beta = 1.0 - beta;
    n * (p - 1.0) / (8.0 * alpha * one_minus_beta * one_minus_beta) * slack
}

pub(crate) fn admissible_raw(n: f64, p: f64, alpha: f64, beta: f64) -> bool {
    cond2_raw(n, p, alpha, beta) >= 0.0 && cond1_slack_raw(n, p, alpha, beta) > 0.0
}

pub fn check_admissible(prob: Problem, pair: ParamPair) -> Result<AdmissibilityResult> {
    let Problem { p, .. } = prob;
    if p <= 1.0 {
        return Err(Error::domain(format!(
            "admissibility is defined for p > 1 (got p = {p}); use special_case_p_le_1"
        )));
    }
    if pair.alpha == 0.0 {
        return Err(Error::domain("alpha = 0 leaves epsilon undefined"));
    }
    if pair.beta == 1.0 {
        return Err(Error::domain("beta = 1 leaves epsilon undefined"));
    }
    let n = prob.nf();
    let (cond2_value, cond1_slack) = if pair.is_classical_for(p) {
        // α = 1 and βp = 1: both terms of the first condition vanish, and the
        // slack reduces to (p-1)(8-np)/(np).
        let np = n * p;
        (0.0, (p - 1.0) * (8.0 - np) / np)
    } else {
        (
            cond2_raw(n, p, pair.alpha, pair.beta),
            cond1_slack_raw(n, p, pair.alpha, pair.beta),
        )
    };
    let admissible = cond2_value >= 0.0 && cond1_slack > 0.0;
    let epsilon = if admissible {
        let eps = epsilon_raw(n, p, pair.alpha, pair.beta, cond1_slack);
        assert!(eps > 0.0, "admissible pair produced non-positive epsilon {eps}");
        Some(eps)
    } else {
        None
    };
    Ok(AdmissibilityResult {
        admissible,
        cond2_value,
        cond1_slack,
        epsilon,
    })
}

/// The constant `ε(n, p, α, β)` of the Li–Yau estimate.
pub fn epsilon(prob: Problem, pair: ParamPair) -> Result<f64> {
    let res = check_admissible(prob, pair)?;
    res.epsilon.ok_or(Error::NotAdmissible {
        n: prob.n,
        p: prob.p,
        alpha: pair.alpha,
        beta: pair.beta,
    })
}

/// Closed form of the threshold exponent: `8/n` for `n ≤ 3`, otherwise
/// `(3n + 4 + 3√(n(n+4))) / (2(3n - 4))`.
pub fn p_bar_closed(n: u32) -> f64 {
    assert!(n >= 1, "dimension must be positive");
    if n <= 3 {
        return 8.0 / f64::from(n);
    }
    let n64 = u64::from(n);
    // n(n+4) is an exact integer, so the radical carries one rounding.
    let root = ((n64 * (n64 + 4)) as f64).sqrt();
    let nf = f64::from(n);
    (3.0 * nf + 4.0 + 3.0 * root) / (2.0 * (3.0 * nf - 4.0))
}

/// Resolution of the `(alpha, beta)` sweeps.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct SweepGrid {
    /// Grid points per axis.
    pub points: usize,
    /// Bisection stopping width in `p`.
    pub p_tol: f64,
    /// Distance kept from the open ends of the parameter box.
    pub delta: f64,
    /// Number of zoom levels around the least-violating grid points.
    pub refine_levels: usize,
    /// How many coarse candidates get refined.
    pub refine_candidates: usize,
}

impl Default for SweepGrid {
    fn default() -> Self {
        SweepGrid {
            points: 400,
            p_tol: 1e-4,
            delta: 1e-4,
            refine_levels: 4,
            refine_candidates: 8,
        }
    }
}

impl SweepGrid {
    pub fn with_points(points: usize) -> Self {
        SweepGrid {
            points,
            ..Default::default()
        }
    }

    fn validate(&self) -> Result<()> {
        if self.points < 100 {
            return Err(Error::Resolution(format!(
                "sweep needs at least 100 points per axis, got {}",
                self.points
            )));
        }
        if !(self.p_tol > 0.0) || !(self.delta > 0.0 && self.delta < 0.5) {
            return Err(Error::Resolution("p_tol and delta must be positive".into()));
        }
        Ok(())
    }

    /// Grid step along alpha; alpha runs over `[delta, 1]`.
    fn alpha_at(&self, i: usize) -> f64 {
        if i + 1 == self.points {
            return 1.0;
        }
        self.delta + (1.0 - self.delta) * i as f64 / (self.points - 1) as f64
    }

    /// Beta runs over `[delta, 1 - delta]`.
    fn beta_at(&self, j: usize) -> f64 {
        self.delta + (1.0 - 2.0 * self.delta) * j as f64 / (self.points - 1) as f64
    }

    fn alpha_step(&self) -> f64 {
        (1.0 - self.delta) / (self.points - 1) as f64
    }

    fn beta_step(&self) -> f64 {
        (1.0 - 2.0 * self.delta) / (self.points - 1) as f64
    }
}

/// How far a point is from satisfying both conditions; `<= 0` with a
/// strictly positive slack means admissible.
fn violation(n: f64, p: f64, alpha: f64, beta: f64) -> f64 {
    let c2 = cond2_raw(n, p, alpha, beta);
    let c1 = cond1_slack_raw(n, p, alpha, beta);
    (-c2).max(-c1)
}

/// Whether some point of the grid (plus local refinement) is admissible at `p`.
pub fn grid_feasible(n: u32, p: f64, grid: &SweepGrid) -> Result<bool> {
    grid.validate()?;
    let nf = f64::from(n);
    let n_pts = grid.points;

    // Coarse pass: each alpha row reports feasibility or its best point.
    let rows: Vec<(bool, f64, usize, usize)> = (0..n_pts)
        .into_par_iter()
        .map(|i| {
            let a = grid.alpha_at(i);
            let mut best = (f64::INFINITY, i, 0);
            for j in 0..n_pts {
                let b = grid.beta_at(j);
                if admissible_raw(nf, p, a, b) {
                    return (true, 0.0, i, j);
                }
                let v = violation(nf, p, a, b);
                if v < best.0 {
                    best = (v, i, j);
                }
            }
            (false, best.0, best.1, best.2)
        })
        .collect();
    if rows.iter().any(|r| r.0) {
        return Ok(true);
    }

    let mut candidates: Vec<(f64, usize, usize)> = rows.iter().map(|r| (r.1, r.2, r.3)).collect();
    candidates.sort_by(|x, y| x.0.total_cmp(&y.0));
    candidates.truncate(grid.refine_candidates);

    let found = candidates.par_iter().any(|&(_, i, j)| {
        refine_around(
            nf,
            p,
            grid,
            grid.alpha_at(i),
            grid.beta_at(j),
            grid.alpha_step(),
            grid.beta_step(),
        )
    });
    Ok(found)
}

fn refine_around(n: f64, p: f64, grid: &SweepGrid, mut ca: f64, mut cb: f64, mut ha: f64, mut hb: f64) -> bool {
    const SUB: usize = 21;
    let (a_lo, a_hi) = (grid.delta, 1.0);
    let (b_lo, b_hi) = (grid.delta, 1.0 - grid.delta);
    for _ in 0..grid.refine_levels {
        let alo = (ca - ha).max(a_lo);
        let ahi = (ca + ha).min(a_hi);
        let blo = (cb - hb).max(b_lo);
        let bhi = (cb + hb).min(b_hi);
        let mut best = (f64::INFINITY, ca, cb);
        for i in 0..SUB {
            let a = if i + 1 == SUB {
                ahi
            } else {
                alo + (ahi - alo) * i as f64 / (SUB - 1) as f64
            };
            for j in 0..SUB {
                let b = blo + (bhi - blo) * j as f64 / (SUB - 1) as f64;
                if admissible_raw(n, p, a, b) {
                    return true;
                }
                let v = violation(n, p, a, b);
                if v < best.0 {
                    best = (v, a, b);
                }
            }
        }
        ca = best.1;
        cb = best.2;
        ha = 2.0 * (ahi - alo) / (SUB - 1) as f64;
        hb = 2.0 * (bhi - blo) / (SUB - 1) as f64;
    }
    false
}

/// Numerical supremum of the exponents admitting an admissible grid pair,
/// found by bisection in `p`.
pub fn p_bar_sweep(n: u32, grid: &SweepGrid) -> Result<f64> {
    if n == 0 {
        return Err(Error::domain("dimension n must be at least 1"));
    }
    grid.validate()?;
    let mut lo = 1.0 + grid.p_tol.min(1e-6);
    // No pair with alpha <= 1 and beta >= delta satisfies the slack
    // condition beyond this exponent.
    let mut hi = 1.0 + 8.0 / f64::from(n);
    if !grid_feasible(n, lo, grid)? {
        return Err(Error::Resolution(format!(
            "no admissible grid point just above p = 1 for n = {n}"
        )));
    }
    if grid_feasible(n, hi, grid)? {
        return Err(Error::Resolution(format!("upper bracket {hi} unexpectedly feasible")));
    }
    while hi - lo > grid.p_tol {
        let mid = 0.5 * (lo + hi);
        if grid_feasible(n, mid, grid)? {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    Ok(lo)
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct ThresholdReport {
    pub n: u32,
    pub p_bar_closed: f64,
    pub p_bar_sweep: f64,
    /// `(n+2)/(n-2)`, only for `n ≥ 3`.
    pub sobolev_ps: Option<f64>,
    /// `n(n+2)/(n-1)²`.
    pub ref_upper: f64,
    /// `n/(n-2)`, only for `n ≥ 3`.
    pub ref_lower: Option<f64>,
    pub ordering_ok: bool,
}

pub fn threshold_report(n: u32) -> Result<ThresholdReport> {
    threshold_report_with(n, &SweepGrid::default())
}

pub fn threshold_report_with(n: u32, grid: &SweepGrid) -> Result<ThresholdReport> {
    if n < 2 {
        return Err(Error::domain(format!(
            "threshold report needs n >= 2 (reference exponent degenerates), got {n}"
        )));
    }
    let nf = f64::from(n);
    let closed = p_bar_closed(n);
    let sweep = p_bar_sweep(n, grid)?;
    let ref_upper = nf * (nf + 2.0) / ((nf - 1.0) * (nf - 1.0));
    let (sobolev_ps, ref_lower) = if n >= 3 {
        (Some((nf + 2.0) / (nf - 2.0)), Some(nf / (nf - 2.0)))
    } else {
        (None, None)
    };
    let ordering_ok = ordering_holds(n);
    Ok(ThresholdReport {
        n,
        p_bar_closed: closed,
        p_bar_sweep: sweep,
        sobolev_ps,
        ref_upper,
        ref_lower,
        ordering_ok,
    })
}

/// `n/(n-2) < p̄_n < n(n+2)/(n-1)²` for `n ≥ 4`; only the upper bound for `n ∈ {2, 3}`.
pub fn ordering_holds(n: u32) -> bool {
    assert!(n >= 2);
    let nf = f64::from(n);
    let closed = p_bar_closed(n);
    let upper = closed < nf * (nf + 2.0) / ((nf - 1.0) * (nf - 1.0));
    if n >= 4 {
        upper && nf / (nf - 2.0) < closed
    } else {
        upper
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct ConvexityCoefficient {
    pub value: f64,
    pub theta: f64,
}

/// The bracket `α + β(p-2) - n(p-1)(α-β)²/(8α(1-α)(1-β))` without any
/// ordering guard on `alpha` and `beta`.
pub fn raw_convexity_coefficient(prob: Problem, pair: ParamPair) -> Result<f64> {
    let (a, b) = (pair.alpha, pair.beta);
    if a == 0.0 || a == 1.0 || b == 1.0 {
        return Err(Error::domain("convexity coefficient needs 0 < alpha < 1 and beta < 1"));
    }
    let (n, p) = (prob.nf(), prob.p);
    Ok(a + b * (p - 2.0) - n * (p - 1.0) * (a - b) * (a - b) / (8.0 * a * (1.0 - a) * (1.0 - b)))
}

pub fn convexity_coefficient(prob: Problem, pair: ParamPair) -> Result<ConvexityCoefficient> {
    let (a, b) = (pair.alpha, pair.beta);
    if a == 0.0 || a == 1.0 || b == 0.0 || b == 1.0 {
        return Err(Error::domain(
            "convexity coefficient needs alpha and beta strictly inside (0, 1)",
        ));
    }
    if a <= b {
        return Err(Error::domain(format!(
            "convexity bound needs alpha > beta (got alpha={a}, beta={b})"
        )));
    }
    let (n, p) = (prob.nf(), prob.p);
    let value = raw_convexity_coefficient(prob, pair)?;
    let theta = n * p * (p - 1.0) * (a - b) / (8.0 * a * (1.0 - a) * (1.0 - b));
    Ok(ConvexityCoefficient { value, theta })
}

/// Best point of the convexity-admissible region found on a grid.
#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct ConvexityPoint {
    pub pair: ParamPair,
    pub coefficient: f64,
    pub theta: f64,
    pub epsilon: f64,
}

/// Searches a `points × points` grid over `[delta, 1-delta]²` for an admissible
/// pair with `alpha > beta` and nonnegative convexity coefficient, returning
/// the one with the largest coefficient.
pub fn convexity_region_nonempty(prob: Problem, grid: &SweepGrid) -> Result<Option<ConvexityPoint>> {
    if prob.n < 5 {
        return Err(Error::domain(format!(
            "time convexity is established for n >= 5, got n = {}",
            prob.n
        )));
    }
    let pbar = p_bar_closed(prob.n);
    if !(prob.p > 1.0 && prob.p < pbar) {
        return Err(Error::domain(format!("need 1 < p < p̄_n = {pbar}, got p = {}", prob.p)));
    }
    if grid.points < 2 {
        return Err(Error::Resolution("convexity sweep needs at least 2 points".into()));
    }
    let nf = prob.nf();
    let p = prob.p;
    let axis = |k: usize| grid.delta + (1.0 - 2.0 * grid.delta) * k as f64 / (grid.points - 1) as f64;
    let best = (0..grid.points)
        .into_par_iter()
        .filter_map(|i| {
            let a = axis(i);
            let mut row_best: Option<(f64, f64, f64)> = None;
            for j in 0..grid.points {
                let b = axis(j);
                if a <= b || !admissible_raw(nf, p, a, b) {
                    continue;
                }
                let c = a + b * (p - 2.0) - nf * (p - 1.0) * (a - b) * (a - b) / (8.0 * a * (1.0 - a) * (1.0 - b));
                if c >= 0.0 && row_best.is_none_or(|r| c > r.0) {
                    row_best = Some((c, a, b));
                }
            }
            row_best
        })
        .reduce_with(|x, y| {
            // Ties resolve toward the lexicographically smaller pair so the
            // result does not depend on the reduction order.
            match x.0.total_cmp(&y.0) {
                std::cmp::Ordering::Greater => x,
                std::cmp::Ordering::Less => y,
                std::cmp::Ordering::Equal => {
                    if (x.1, x.2) <= (y.1, y.2) {
                        x
                    } else {
                        y
                    }
                }
            }
        });
    match best {
        None => Ok(None),
        Some((_, a, b)) => {
            let pair = ParamPair::new(a, b)?;
            let coef = convexity_coefficient(prob, pair)?;
            let eps = epsilon(prob, pair)?;
            Ok(Some(ConvexityPoint {
                pair,
                coefficient: coef.value,
                theta: coef.theta,
                epsilon: eps,
            }))
        }
    }
}

/// For `0 < p ≤ 1` the estimate holds with `α = β = 1` and bound `2/n`:
/// `u_t - |∇u|²/u - u^p ≥ -(2/n)·u/t`.
pub fn special_case_p_le_1(prob: Problem) -> Result<(ParamPair, f64)> {
    if prob.p > 1.0 {
        return Err(Error::domain(format!(
            "the alpha = beta = 1 estimate needs p <= 1, got {}",
            prob.p
        )));
    }
    let pair = ParamPair {
        alpha: 1.0,
        beta: 1.0,
        reciprocal_of: None,
    };
    Ok((pair, 2.0 / prob.nf()))
}

/// One row of the `region` table.
#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct RegionRow {
    pub alpha: f64,
    pub beta: f64,
    pub admissible: bool,
    pub cond2: f64,
    pub cond1_slack: f64,
    pub epsilon: Option<f64>,
    pub convexity_coeff: Option<f64>,
}

/// Evaluates every point of a `points × points` grid on `[delta, 1-delta]²`.
/// The convexity coefficient is filled where it is defined (`alpha > beta`).
pub fn region_table(prob: Problem, points: usize, delta: f64) -> Result<Vec<RegionRow>> {
    if points < 2 {
        return Err(Error::Resolution("region grid needs at least 2 points".into()));
    }
    let axis = |k: usize| delta + (1.0 - 2.0 * delta) * k as f64 / (points - 1) as f64;
    let mut rows = Vec::with_capacity(points * points);
    for i in 0..points {
        for j in 0..points {
            let pair = ParamPair::new(axis(i), axis(j))?;
            let res = check_admissible(prob, pair)?;
            let convexity_coeff = convexity_coefficient(prob, pair).ok().map(|c| c.value);
            rows.push(RegionRow {
                alpha: pair.alpha,
                beta: pair.beta,
                admissible: res.admissible,
                cond2: res.cond2_value,
                cond1_slack: res.cond1_slack,
                epsilon: res.epsilon,
                convexity_coeff,
            });
        }
    }
    Ok(rows)
}
