//! Signed margins of the Li–Yau, Harnack, monotonicity, convexity and decay
//! inequalities on computed solutions. Time derivatives are always taken
//! from the equation itself, never by differencing snapshots.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::admissibility::{self, ParamPair, Problem};
use crate::error::{Error, Result};
use crate::geometry::Geometry;
use crate::solver::Solution;

/// Default factor `c` in `tol_disc = c · h² · scale`.
pub const DEFAULT_TOL_FACTOR: f64 = 10.0;

/// ε for the pair, or `n/2` for `p ≤ 1` with the pair (1, 1).
pub fn effective_epsilon(n: u32, p: f64, pair: ParamPair) -> Result<f64> {
    if p <= 1.0 {
        let (special, bound) = admissibility::special_case_p_le_1(Problem::new(n, p)?)?;
        if pair.alpha() != special.alpha() || pair.beta() != special.beta() {
            return Err(Error::NotAdmissible {
                n,
                p,
                alpha: pair.alpha(),
                beta: pair.beta(),
            });
        }
        return Ok(1.0 / bound);
    }
    admissibility::epsilon(Problem::new(n, p)?, pair)
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct LiYauSample {
    pub t: f64,
    pub min_margin: f64,
    pub tol_disc: f64,
    /// Largest |F_time − F_spatial| on the snapshot.
    pub identity_gap: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct LiYauReport {
    pub pair: ParamPair,
    pub epsilon: f64,
    pub per_snapshot: Vec<LiYauSample>,
    pub worst_margin: f64,
    pub worst_time: f64,
    /// True when some snapshot falls below its own `-tol_disc`.
    pub violated: bool,
    pub checked_region: Vec<bool>,
}

/// `F = t(Δf + (1−α)|∇f|² + (1−β)u^{p−1})`, `f = log u`, on one field.
/// Returns (F, F in time form, Δf).
fn f_fields(geom: &Geometry, u: &[f64], t: f64, p: f64, pair: ParamPair) -> (Vec<f64>, Vec<f64>, Vec<f64>) {
    let f: Vec<f64> = u.iter().map(|v| v.ln()).collect();
    let lap = geom.laplacian(&f);
    let gs = geom.grad_sq(&f);
    let (a, b) = (pair.alpha(), pair.beta());
    let mut spatial = Vec::with_capacity(u.len());
    let mut time = Vec::with_capacity(u.len());
    for i in 0..u.len() {
        let react = u[i].powf(p - 1.0);
        spatial.push(t * (lap[i] + (1.0 - a) * gs[i] + (1.0 - b) * react));
        // f_t from the equation written for log u
        let f_t = lap[i] + gs[i] + react;
        time.push(t * (f_t - a * gs[i] - b * react));
    }
    (spatial, time, lap)
}

fn masked_min(values: &[f64], mask: &[bool]) -> f64 {
    values
        .iter()
        .zip(mask)
        .filter(|(_, &m)| m)
        .map(|(v, _)| *v)
        .fold(f64::INFINITY, f64::min)
}

fn masked_abs_max(values: &[f64], mask: &[bool]) -> f64 {
    values
        .iter()
        .zip(mask)
        .filter(|(_, &m)| m)
        .map(|(v, _)| v.abs())
        .fold(0.0, f64::max)
}

/// Li–Yau margin `F + 1/ε` on every snapshot with `t_lo < t ≤ t_hi`.
pub fn liyau_check(sol: &Solution, pair: ParamPair, t_range: (f64, f64)) -> Result<LiYauReport> {
    liyau_check_with(sol, pair, t_range, DEFAULT_TOL_FACTOR)
}

pub fn liyau_check_with(sol: &Solution, pair: ParamPair, t_range: (f64, f64), tol_factor: f64) -> Result<LiYauReport> {
    let geom = sol.geometry();
    let p = sol.p();
    let eps = effective_epsilon(geom.n(), p, pair)?;
    let (lo, hi) = t_range;
    let selected: Vec<_> = sol
        .snapshots()
        .iter()
        .filter(|s| s.t > lo.max(0.0) && s.t <= hi)
        .collect();
    if selected.is_empty() {
        return Err(Error::domain(format!("no snapshots in the time range ({lo}, {hi}]")));
    }
    let mask = geom.checked_mask();
    let h2 = geom.spacing().powi(2);
    let per_snapshot: Vec<LiYauSample> = selected
        .par_iter()
        .map(|s| {
            let (spatial, time, lap) = f_fields(geom, &s.u, s.t, p, pair);
            let margins: Vec<f64> = spatial.iter().map(|f| f + 1.0 / eps).collect();
            let gap = spatial
                .iter()
                .zip(&time)
                .map(|(a, b)| (a - b).abs())
                .fold(0.0, f64::max);
            LiYauSample {
                t: s.t,
                min_margin: masked_min(&margins, &mask),
                tol_disc: tol_factor * h2 * masked_abs_max(&lap, &mask),
                identity_gap: gap,
            }
        })
        .collect();
    let worst = per_snapshot
        .iter()
        .min_by(|a, b| a.min_margin.total_cmp(&b.min_margin))
        .expect("nonempty");
    let violated = per_snapshot.iter().any(|s| s.min_margin < -s.tol_disc);
    Ok(LiYauReport {
        pair,
        epsilon: eps,
        worst_margin: worst.min_margin,
        worst_time: worst.t,
        violated,
        per_snapshot,
        checked_region: mask,
    })
}

/// Space-time endpoints of a Harnack comparison: `u(x1,t1) ≤ … u(x2,t2)`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct PathSpec {
    pub x1: f64,
    pub t1: f64,
    pub x2: f64,
    pub t2: f64,
    pub segments: usize,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct HarnackReport {
    pub path: PathSpec,
    pub lhs: f64,
    pub rhs_full: f64,
    pub rhs_simple: f64,
    pub rho: f64,
    pub rho_simple: f64,
    pub holds_full: bool,
    pub holds_simple: bool,
}

pub fn harnack_check(sol: &Solution, pair: ParamPair, path: PathSpec, tol_harnack: f64) -> Result<HarnackReport> {
    let geom = sol.geometry();
    let p = sol.p();
    let eps = effective_epsilon(geom.n(), p, pair)?;
    let PathSpec {
        x1,
        t1,
        x2,
        t2,
        segments,
    } = path;
    if !(t1 > 0.0 && t1 < t2) {
        return Err(Error::TimeOrder(format!("need 0 < t1 < t2, got t1={t1}, t2={t2}")));
    }
    if segments == 0 {
        return Err(Error::domain("a path needs at least one segment"));
    }
    let dt = t2 - t1;
    let d = geom.distance(x1, x2);
    let kinetic = d * d / (4.0 * pair.alpha() * dt);

    // γ(0) = x2 at time t2, γ(1) = x1 at time t1.
    let mut integral = 0.0;
    for j in 0..=segments {
        let s = j as f64 / segments as f64;
        let x = geom.path_point(x2, x1, s);
        let t = (1.0 - s) * t2 + s * t1;
        let w = if j == 0 || j == segments { 0.5 } else { 1.0 };
        integral += w * sol.value_at(x, t)?.powf(p - 1.0);
    }
    integral /= segments as f64;

    let lhs = sol.value_at(x1, t1)?;
    let base = sol.value_at(x2, t2)? * (t2 / t1).powf(1.0 / eps);
    let rho = kinetic - pair.beta() * dt * integral;
    let rhs_full = base * rho.exp();
    let rhs_simple = base * kinetic.exp();
    Ok(HarnackReport {
        path,
        lhs,
        rhs_full,
        rhs_simple,
        rho,
        rho_simple: kinetic,
        holds_full: lhs <= rhs_full * (1.0 + tol_harnack),
        holds_simple: lhs <= rhs_simple * (1.0 + tol_harnack),
    })
}

/// Seeded random Harnack endpoints: positions over the checked region,
/// `t_lo < t1 < t2 ≤ t_hi`.
pub fn random_paths(geom: &Geometry, t_range: (f64, f64), count: usize, segments: usize, seed: u64) -> Vec<PathSpec> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mask = geom.checked_mask();
    let last_checked = mask.iter().rposition(|&m| m).unwrap_or(0);
    let x_hi = match geom.kind() {
        crate::geometry::GeometryKind::FlatTorus1D => geom.extent(),
        _ => geom.coords()[last_checked],
    };
    let (lo, hi) = (t_range.0.max(0.0), t_range.1);
    (0..count)
        .map(|_| {
            let x1 = rng.gen_range(0.0..x_hi);
            let x2 = rng.gen_range(0.0..x_hi);
            let mut ta = rng.gen_range(lo..hi);
            let mut tb = rng.gen_range(lo..hi);
            if ta > tb {
                std::mem::swap(&mut ta, &mut tb);
            }
            if ta <= 0.0 {
                ta = f64::MIN_POSITIVE.max(1e-12 * hi);
            }
            if tb <= ta {
                tb = (ta + 1e-9 * hi).min(hi);
            }
            PathSpec {
                x1,
                t1: ta,
                x2,
                t2: tb,
                segments,
            }
        })
        .collect()
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct MonotoneConvexReport {
    pub t0: f64,
    pub epsilon: f64,
    /// Min of `u_t − α|∇u|²/u − βu^p + u/(ε(t−T0))`.
    pub mono_margin: f64,
    pub mono_tol: f64,
    /// Start of the convexity window: the later of T0 and the first time
    /// after which `v = u_t` stays positive on the checked nodes.
    pub convex_t0: Option<f64>,
    /// Min of `v_t/v − α|∇v|²/v² − βh + n/(2α(t−T0'))` with `T0' = convex_t0`.
    pub convex_margin: Option<f64>,
    pub convex_tol: Option<f64>,
}

/// `want_convex` asks for the convexity margin, which needs n ≥ 5 and a pair
/// from the convexity-admissible region.
pub fn monotone_convex_check(
    sol: &Solution,
    pair: ParamPair,
    t0: f64,
    want_convex: bool,
) -> Result<MonotoneConvexReport> {
    monotone_convex_check_with(sol, pair, t0, want_convex, DEFAULT_TOL_FACTOR)
}

pub fn monotone_convex_check_with(
    sol: &Solution,
    pair: ParamPair,
    t0: f64,
    want_convex: bool,
    tol_factor: f64,
) -> Result<MonotoneConvexReport> {
    let geom = sol.geometry();
    let p = sol.p();
    let n = geom.n();
    let eps = effective_epsilon(n, p, pair)?;
    if want_convex {
        if n < 5 {
            return Err(Error::domain(format!(
                "the convexity estimate needs n ≥ 5, got n = {n}"
            )));
        }
        let c = admissibility::convexity_coefficient(Problem::new(n, p)?, pair)?;
        if c.value < 0.0 {
            return Err(Error::domain(format!(
                "pair (alpha={}, beta={}) has negative convexity coefficient {}",
                pair.alpha(),
                pair.beta(),
                c.value
            )));
        }
    }
    let selected: Vec<_> = sol.snapshots().iter().filter(|s| s.t > t0).collect();
    if selected.is_empty() {
        return Err(Error::TimeOrder(format!("T0 = {t0} is not before any snapshot")));
    }
    let mask = geom.checked_mask();
    let h2 = geom.spacing().powi(2);
    let (a, b) = (pair.alpha(), pair.beta());

    // u_t from the equation, per selected snapshot
    let fields: Vec<(Vec<f64>, Vec<f64>)> = selected
        .par_iter()
        .map(|s| {
            let lap_u = geom.laplacian(&s.u);
            let v = s.u.iter().zip(&lap_u).map(|(ui, l)| l + ui.powf(p)).collect();
            (v, geom.grad_sq(&s.u))
        })
        .collect();

    let mono_parts: Vec<(f64, f64)> = selected
        .par_iter()
        .zip(&fields)
        .map(|(s, (v, gs_u))| {
            let u = &s.u;
            let dt0 = s.t - t0;
            let lap_v = geom.laplacian(v);
            let margin = (0..u.len())
                .filter(|&i| mask[i])
                .map(|i| v[i] - a * gs_u[i] / u[i] - b * u[i].powf(p) + u[i] / (eps * dt0))
                .fold(f64::INFINITY, f64::min);
            (margin, tol_factor * h2 * masked_abs_max(&lap_v, &mask))
        })
        .collect();

    let (mut convex_t0, mut convex_margin, mut convex_tol) = (None, None, None);
    if want_convex {
        let positive = |v: &Vec<f64>| v.iter().zip(&mask).all(|(x, &m)| !m || *x > 0.0);
        let first = fields.iter().rposition(|(v, _)| !positive(v)).map_or(0, |k| k + 1);
        let start = if first == 0 { t0 } else { selected[first - 1].t };
        convex_t0 = Some(start);
        let parts: Vec<(f64, f64)> = selected[first..]
            .par_iter()
            .zip(&fields[first..])
            .filter(|(s, _)| s.t > start)
            .map(|(s, (v, _))| {
                let u = &s.u;
                let dt0 = s.t - start;
                let gs_v = geom.grad_sq(v);
                let lap_v = geom.laplacian(v);
                let h: Vec<f64> = u.iter().map(|ui| p * ui.powf(p - 1.0)).collect();
                let v_t: Vec<f64> = (0..u.len()).map(|i| lap_v[i] + h[i] * v[i]).collect();
                let lap_vt = geom.laplacian(&v_t);
                let mut margin = f64::INFINITY;
                let mut tol: f64 = 0.0;
                for i in (0..u.len()).filter(|&i| mask[i]) {
                    let m = v_t[i] / v[i] - a * gs_v[i] / (v[i] * v[i]) - b * h[i] + f64::from(n) / (2.0 * a * dt0);
                    margin = margin.min(m);
                    tol = tol.max(tol_factor * h2 * (lap_vt[i] / v[i]).abs());
                }
                (margin, tol)
            })
            .collect();
        if !parts.is_empty() {
            convex_margin = Some(parts.iter().map(|q| q.0).fold(f64::INFINITY, f64::min));
            convex_tol = Some(parts.iter().map(|q| q.1).fold(0.0, f64::max));
        }
    }

    Ok(MonotoneConvexReport {
        t0,
        epsilon: eps,
        mono_margin: mono_parts.iter().map(|q| q.0).fold(f64::INFINITY, f64::min),
        mono_tol: mono_parts.iter().map(|q| q.1).fold(0.0, f64::max),
        convex_t0,
        convex_margin,
        convex_tol,
    })
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct DecayReport {
    pub t_bar: f64,
    pub constant: f64,
    /// Min of `C/(T̄−t)^{1/(p−1)} − u`.
    pub margin: f64,
    /// Min of `1 − u(T̄−t)^{1/(p−1)}/C`.
    pub relative_margin: f64,
}

/// Upper bound `u ≤ C/(T̄−t)^{1/(p−1)}`, `C = (β(p−1))^{−1/(p−1)}`.
pub fn decay_bound_check(sol: &Solution, pair: ParamPair, t_bar: f64) -> Result<DecayReport> {
    let p = sol.p();
    if p <= 1.0 {
        return Err(Error::domain(format!("the decay bound needs p > 1, got {p}")));
    }
    if pair.beta() <= 0.0 {
        return Err(Error::domain("the decay bound needs beta > 0"));
    }
    let (_, last) = sol.span();
    if t_bar <= last {
        return Err(Error::TimeOrder(format!(
            "T_bar = {t_bar} must exceed the last snapshot time {last}"
        )));
    }
    let k = 1.0 / (p - 1.0);
    let c = (pair.beta() * (p - 1.0)).powf(-k);
    let (mut margin, mut rel) = (f64::INFINITY, f64::INFINITY);
    for s in sol.snapshots() {
        let bound = c * (t_bar - s.t).powf(-k);
        for &u in &s.u {
            margin = margin.min(bound - u);
            rel = rel.min(1.0 - u / bound);
        }
    }
    Ok(DecayReport {
        t_bar,
        constant: c,
        margin,
        relative_margin: rel,
    })
}
