//! Blow-up time fitting, the rate `u_max^{p−1}(T−t)`, and the rescaled
//! solutions `u_k(x,s) = u(x, t_k + s/λ_k)/u(x_k,t_k)`, `λ_k = u(x_k,t_k)^{p−1}`.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::solver::Solution;

/// Minimum number of samples in the fitting window.
pub const MIN_WINDOW: usize = 50;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct BlowupFit {
    pub p: f64,
    pub t_fit: f64,
    pub window: (f64, f64),
    pub samples: usize,
    /// `(t, u_max^{p−1}(T_fit − t))` over the fitting window.
    pub rate_series: Vec<(f64, f64)>,
    /// Mean rate over the last decade of growth of `u_max`.
    pub q_limit: f64,
    /// Largest rate seen in the window; the run's type-I constant.
    pub q_max: f64,
    /// Weighted RMS relative residual of the linear fit of `u_max^{1−p}`.
    pub residual: f64,
    /// Largest relative error of predicting a sample of `u_max^{1−p}` by
    /// linear interpolation of its neighbours.
    pub interp_error: f64,
    /// Relative error of `T_fit − t` caused by representing t near T_fit in
    /// floating point, amplified by the exponent `1/(p−1)`.
    pub roundoff: f64,
    /// `3 · (residual + interp_error + roundoff)`.
    pub tol_fit: f64,
}

/// Fits `u_max^{1−p} ≈ (p−1)(T − t)` on the samples with `u_max ≥ 10·u_max(0)`.
pub fn fit_blowup_time(series: &[(f64, f64)], p: f64) -> Result<BlowupFit> {
    if !(p > 1.0) {
        return Err(Error::domain(format!("blow-up fitting needs p > 1, got {p}")));
    }
    let (initial, last) = match (series.first(), series.last()) {
        (Some(a), Some(b)) => (a.1, b.1),
        _ => return Err(Error::DegenerateWindow("empty series".into())),
    };
    let window: Vec<(f64, f64)> = series.iter().copied().filter(|&(_, m)| m >= 10.0 * initial).collect();
    if window.is_empty() {
        return Err(Error::NoBlowup {
            initial_max: initial,
            final_max: last,
        });
    }
    if window.len() < MIN_WINDOW {
        return Err(Error::DegenerateWindow(format!(
            "{} samples above 10x the initial max, need {MIN_WINDOW}",
            window.len()
        )));
    }

    let ys: Vec<f64> = window.iter().map(|&(_, m)| m.powf(1.0 - p)).collect();
    let ts: Vec<f64> = window.iter().map(|&(t, _)| t).collect();
    // Weights 1/y² make the residual relative; without them the tail near T,
    // which fixes the root, carries almost no weight.
    let ws: Vec<f64> = ys.iter().map(|y| 1.0 / (y * y)).collect();
    let wsum: f64 = ws.iter().sum();
    let tc = ts.iter().zip(&ws).map(|(t, w)| t * w).sum::<f64>() / wsum;
    let yc = ys.iter().zip(&ws).map(|(y, w)| y * w).sum::<f64>() / wsum;
    let (mut sxy, mut sxx) = (0.0, 0.0);
    for i in 0..ts.len() {
        let dt = ts[i] - tc;
        sxy += ws[i] * dt * (ys[i] - yc);
        sxx += ws[i] * dt * dt;
    }
    if sxx == 0.0 {
        return Err(Error::DegenerateWindow("all window samples share one time".into()));
    }
    let slope = sxy / sxx;
    if !(slope < 0.0) {
        return Err(Error::DegenerateWindow(format!("fitted slope {slope} is not negative")));
    }
    let t_fit = tc - yc / slope;
    let (t_lo, t_hi) = (ts[0], ts[ts.len() - 1]);
    if !(t_fit > t_hi) {
        return Err(Error::DegenerateWindow(format!(
            "fitted blow-up time {t_fit} does not exceed the last sample {t_hi}"
        )));
    }

    let residual = (ys
        .iter()
        .zip(&ts)
        .map(|(y, t)| {
            let r = (y - (yc + slope * (t - tc))) / y;
            r * r
        })
        .sum::<f64>()
        / ys.len() as f64)
        .sqrt();
    let interp_error = (1..ys.len() - 1)
        .map(|i| {
            let w = (ts[i] - ts[i - 1]) / (ts[i + 1] - ts[i - 1]);
            let pred = ys[i - 1] + w * (ys[i + 1] - ys[i - 1]);
            ((ys[i] - pred) / ys[i]).abs()
        })
        .fold(0.0, f64::max);

    let rate_series: Vec<(f64, f64)> = window
        .iter()
        .map(|&(t, m)| (t, m.powf(p - 1.0) * (t_fit - t)))
        .collect();
    let decade: Vec<f64> = window
        .iter()
        .zip(&rate_series)
        .filter(|((_, m), _)| *m >= last / 10.0)
        .map(|(_, (_, q))| *q)
        .collect();
    let q_limit = decade.iter().sum::<f64>() / decade.len() as f64;
    let q_max = rate_series.iter().map(|r| r.1).fold(f64::NEG_INFINITY, f64::max);
    let roundoff = f64::EPSILON * t_fit.abs() / ((p - 1.0) * (t_fit - t_hi));

    Ok(BlowupFit {
        p,
        t_fit,
        window: (t_lo, t_hi),
        samples: window.len(),
        rate_series,
        q_limit,
        q_max,
        residual,
        interp_error,
        roundoff,
        tol_fit: 3.0 * (residual + interp_error + roundoff),
    })
}

/// Trivial lower solution `[(p−1)(T−t)]^{−1/(p−1)}`.
pub fn trivial_solution(p: f64, t_blowup: f64, t: f64) -> f64 {
    ((p - 1.0) * (t_blowup - t)).powf(-1.0 / (p - 1.0))
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct LowerBoundReport {
    /// Min of `u_max(t) − ū(t)`.
    pub margin: f64,
    /// Min of `u_max(t)/ū(t) − 1`.
    pub relative_margin: f64,
    /// Max of `|u_max(t)/ū(t) − 1|`; zero for an exactly trivial run.
    pub max_relative_deviation: f64,
    pub tol_fit: f64,
    pub holds: bool,
}

/// Compares the series with the trivial solution blowing up at `T_fit`,
/// over every sample before `T_fit`. The verdict uses the relative margin
/// because `tol_fit` is relative.
pub fn check_lower_bound(series: &[(f64, f64)], fit: &BlowupFit) -> Result<LowerBoundReport> {
    let p = fit.p;
    if !(p > 1.0) {
        return Err(Error::domain(format!("the lower bound needs p > 1, got {p}")));
    }
    let (mut margin, mut rel, mut dev) = (f64::INFINITY, f64::INFINITY, 0.0_f64);
    for &(t, m) in series.iter().filter(|(t, _)| *t < fit.t_fit) {
        let ubar = trivial_solution(p, fit.t_fit, t);
        margin = margin.min(m - ubar);
        rel = rel.min(m / ubar - 1.0);
        dev = dev.max((m / ubar - 1.0).abs());
    }
    Ok(LowerBoundReport {
        margin,
        relative_margin: rel,
        max_relative_deviation: dev,
        tol_fit: fit.tol_fit,
        holds: rel >= -fit.tol_fit,
    })
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct RescaleWindow {
    /// Look-back `S`: s starts at −S.
    pub back: f64,
    /// Look-ahead `ω`.
    pub ahead: f64,
    pub ds: f64,
    /// Rescaled radius used by the limit-profile comparison.
    pub radius: f64,
}

impl Default for RescaleWindow {
    fn default() -> Self {
        RescaleWindow {
            back: 5.0,
            ahead: 0.5,
            ds: 0.05,
            radius: 1.0,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RescaledSlice {
    pub k_index: usize,
    pub node: usize,
    pub x_k: f64,
    pub t_k: f64,
    pub scale: f64,
    pub lambda: f64,
    pub s_grid: Vec<f64>,
    /// `values[j][i] = u_k(x_i, s_j)`.
    pub values: Vec<Vec<f64>>,
    /// Nodes within rescaled distance `radius` of `x_k`.
    pub near_nodes: Vec<usize>,
}

impl RescaledSlice {
    pub fn max_value(&self) -> f64 {
        self.values.iter().flatten().copied().fold(f64::NEG_INFINITY, f64::max)
    }

    /// `u_k(x_k, 0)`; exactly 1.
    pub fn value_at_origin(&self) -> f64 {
        let j = self
            .s_grid
            .iter()
            .position(|&s| s == 0.0)
            .expect("s = 0 is always sampled");
        self.values[j][self.node]
    }

    /// Max of `|u_k(x,s) − [1−(p−1)s]^{−1/(p−1)}|` over near nodes and the s grid.
    pub fn profile_error(&self, p: f64) -> f64 {
        let mut err = 0.0_f64;
        for (s, row) in self.s_grid.iter().zip(&self.values) {
            let limit = (1.0 - (p - 1.0) * s).powf(-1.0 / (p - 1.0));
            for &i in &self.near_nodes {
                err = err.max((row[i] - limit).abs());
            }
        }
        err
    }
}

/// Spatial argmax, ties to the lowest index.
fn argmax(u: &[f64]) -> usize {
    let mut best = 0;
    for (i, &v) in u.iter().enumerate() {
        if v > u[best] {
            best = i;
        }
    }
    best
}

/// Builds one slice per time in `k_times`, based at the spatial maximum.
pub fn rescale(sol: &Solution, k_times: &[f64], window: RescaleWindow) -> Result<Vec<RescaledSlice>> {
    let p = sol.p();
    if !(p > 1.0) {
        return Err(Error::domain(format!("rescaling needs p > 1, got {p}")));
    }
    if !(window.ds > 0.0 && window.back >= 0.0 && window.ahead >= 0.0 && window.radius >= 0.0) {
        return Err(Error::domain("rescale window needs ds > 0 and nonnegative extents"));
    }
    let geom = sol.geometry();
    let (lo, hi) = sol.span();
    k_times
        .par_iter()
        .enumerate()
        .map(|(k, &t_k)| {
            let base = sol.field_at(t_k)?;
            let node = argmax(&base);
            let scale = base[node];
            let lambda = scale.powf(p - 1.0);
            let s_lo = (-window.back).max(lambda * (lo - t_k));
            let s_hi = window.ahead.min(lambda * (hi - t_k));
            let j_lo = (s_lo / window.ds).ceil() as i64;
            let j_hi = (s_hi / window.ds).floor() as i64;
            let s_grid: Vec<f64> = (j_lo..=j_hi).map(|j| j as f64 * window.ds).collect();
            let mut values = Vec::with_capacity(s_grid.len());
            for &s in &s_grid {
                let field = if s == 0.0 {
                    base.clone()
                } else {
                    sol.field_at((t_k + s / lambda).clamp(lo, hi))?
                };
                values.push(field.iter().map(|v| v / scale).collect());
            }
            let x_k = geom.coords()[node];
            let near_nodes = (0..geom.num_points())
                .filter(|&i| i == node || geom.distance(geom.coords()[i], x_k) * lambda.sqrt() <= window.radius)
                .collect();
            Ok(RescaledSlice {
                k_index: k,
                node,
                x_k,
                t_k,
                scale,
                lambda,
                s_grid,
                values,
                near_nodes,
            })
        })
        .collect()
}

/// Error of the last slice against the limit profile.
pub fn limit_profile_error(slices: &[RescaledSlice], p: f64) -> Option<f64> {
    slices.last().map(|s| s.profile_error(p))
}

/// True when every error is at most `(1 + slack)` times its predecessor.
pub fn nonincreasing_within(errors: &[f64], slack: f64) -> bool {
    errors.windows(2).all(|w| w[1] <= w[0] * (1.0 + slack))
}

/// Hamilton-style choice of `t_k`: over stored snapshots with
/// `t ≤ T − 1/k`, maximize `u_max(t)^{p−1}(T − 1/k − t)`.
pub fn hamilton_times(sol: &Solution, t_blowup: f64, ks: &[f64]) -> Result<Vec<f64>> {
    let p = sol.p();
    ks.iter()
        .map(|&k| {
            let cap = t_blowup - 1.0 / k;
            sol.snapshots()
                .iter()
                .filter(|s| s.t <= cap)
                .map(|s| {
                    let m = s.u.iter().copied().fold(f64::NEG_INFINITY, f64::max);
                    (s.t, m.powf(p - 1.0) * (cap - s.t))
                })
                .max_by(|a, b| a.1.total_cmp(&b.1))
                .map(|(t, _)| t)
                .ok_or_else(|| Error::OutOfSpan {
                    t: cap,
                    lo: sol.span().0,
                    hi: sol.span().1,
                })
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::Geometry;
    use crate::solver::Snapshot;
    use approx::assert_relative_eq;

    fn trivial_series(p: f64, big_t: f64, count: usize) -> Vec<(f64, f64)> {
        // geometric approach to T so the window is well populated
        (0..count)
            .map(|i| {
                let t = big_t * (1.0 - 0.9_f64.powi(i as i32));
                (t, trivial_solution(p, big_t, t))
            })
            .collect()
    }

    #[test]
    fn exact_trivial_fit() {
        for p in [2.0, 3.0, 1.5] {
            let series = trivial_series(p, 0.7, 160);
            let fit = fit_blowup_time(&series, p).unwrap();
            assert_relative_eq!(fit.t_fit, 0.7, max_relative = 1e-10);
            assert_relative_eq!(fit.q_limit, 1.0 / (p - 1.0), max_relative = 1e-8);
            assert!(fit.t_fit > fit.window.1);
            let lb = check_lower_bound(&series, &fit).unwrap();
            assert!(lb.holds && lb.max_relative_deviation < 1e-8, "{lb:?}");
        }
    }

    #[test]
    fn fit_errors() {
        let flat: Vec<(f64, f64)> = (0..100).map(|i| (i as f64, 1.0)).collect();
        assert!(matches!(fit_blowup_time(&flat, 2.0), Err(Error::NoBlowup { .. })));
        let short = trivial_series(2.0, 1.0, 60);
        let few: Vec<_> = short.iter().copied().take(30).collect();
        assert!(matches!(
            fit_blowup_time(&few, 2.0),
            Err(Error::DegenerateWindow(_)) | Err(Error::NoBlowup { .. })
        ));
        assert!(matches!(fit_blowup_time(&short, 1.0), Err(Error::Domain(_))));
    }

    #[test]
    fn trivial_rescaling_is_the_limit_profile() {
        let p = 2.0;
        let big_t = 1.0;
        let times: Vec<f64> = (0..200).map(|i| big_t * (1.0 - 0.95_f64.powi(i))).collect();
        let g = Geometry::flat_torus(16, 1.0).unwrap();
        let snaps = times
            .iter()
            .map(|&t| Snapshot {
                t,
                u: vec![trivial_solution(p, big_t, t); 16],
            })
            .collect();
        let sol = Solution::from_parts(g, p, snaps, false, times[199], vec![]).unwrap();
        let slices = rescale(&sol, &[times[100], times[150]], RescaleWindow::default()).unwrap();
        for s in &slices {
            assert_eq!(s.value_at_origin(), 1.0);
            assert_eq!(s.s_grid.first(), Some(&-5.0));
            assert_eq!(s.s_grid.last(), Some(&0.5));
            // log-linear interpolation of an exactly geometric profile
            assert!(s.profile_error(p) < 2e-3, "{}", s.profile_error(p));
        }
    }

    #[test]
    fn hamilton_picks_late_times() {
        let p = 2.0;
        let times: Vec<f64> = (0..100).map(|i| 1.0 - 0.9_f64.powi(i)).collect();
        let g = Geometry::flat_torus(16, 1.0).unwrap();
        let snaps = times
            .iter()
            .map(|&t| Snapshot {
                t,
                u: vec![trivial_solution(p, 1.0, t); 16],
            })
            .collect();
        let sol = Solution::from_parts(g, p, snaps, false, times[99], vec![]).unwrap();
        let picks = hamilton_times(&sol, 1.0, &[10.0, 100.0, 1000.0]).unwrap();
        assert!(picks.windows(2).all(|w| w[1] >= w[0]));
        assert!(picks.iter().zip([0.9, 0.99, 0.999]).all(|(t, cap)| *t <= cap));
    }

    #[test]
    fn trend_check() {
        assert!(nonincreasing_within(&[1.0, 0.5, 0.52], 0.1));
        assert!(!nonincreasing_within(&[1.0, 0.5, 0.6], 0.1));
        assert!(nonincreasing_within(&[3.0], 0.1));
    }
}
