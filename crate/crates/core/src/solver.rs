//! Method-of-lines RK4 integration of `u_t = Δu + u^p`.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geometry::Geometry;

const MAX_HALVINGS: u32 = 40;
const PAR_THRESHOLD: usize = 8192;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SolverConfig {
    pub p: f64,
    pub dt_max: f64,
    #[serde(default = "default_cfl")]
    pub cfl: f64,
    #[serde(default = "default_cutoff")]
    pub blowup_cutoff: f64,
    pub snapshot_interval: f64,
    #[serde(default)]
    pub t_end: Option<f64>,
    /// Extra snapshot whenever `max u` has grown by this factor since the
    /// last one; resolves the final approach to blow-up.
    #[serde(default)]
    pub snapshot_growth: Option<f64>,
    /// Relative growth of `max u` allowed per step near blow-up.
    #[serde(default = "default_growth_fraction")]
    pub growth_fraction: f64,
    #[serde(default = "default_max_steps")]
    pub max_steps: usize,
}

fn default_cfl() -> f64 {
    0.9
}
fn default_cutoff() -> f64 {
    1e8
}
fn default_growth_fraction() -> f64 {
    0.05
}
fn default_max_steps() -> usize {
    50_000_000
}

impl SolverConfig {
    pub fn new(p: f64, dt_max: f64, snapshot_interval: f64, t_end: Option<f64>) -> Self {
        SolverConfig {
            p,
            dt_max,
            cfl: default_cfl(),
            blowup_cutoff: default_cutoff(),
            snapshot_interval,
            t_end,
            snapshot_growth: None,
            growth_fraction: default_growth_fraction(),
            max_steps: default_max_steps(),
        }
    }

    pub fn validate(&self) -> Result<()> {
        let positive = |v: f64| v.is_finite() && v > 0.0;
        if !positive(self.p) {
            return Err(Error::config("solver.p", format!("must be positive, got {}", self.p)));
        }
        if !positive(self.dt_max) {
            return Err(Error::config(
                "solver.dt_max",
                format!("must be positive, got {}", self.dt_max),
            ));
        }
        if !(self.cfl > 0.0 && self.cfl <= 1.0) {
            return Err(Error::config(
                "solver.cfl",
                format!("must lie in (0, 1], got {}", self.cfl),
            ));
        }
        if !positive(self.snapshot_interval) {
            return Err(Error::config(
                "solver.snapshot_interval",
                format!("must be positive, got {}", self.snapshot_interval),
            ));
        }
        if let Some(t) = self.t_end {
            if !(t.is_finite() && t >= 0.0) {
                return Err(Error::config("solver.t_end", format!("must be nonnegative, got {t}")));
            }
        }
        if let Some(g) = self.snapshot_growth {
            if !(g.is_finite() && g > 1.0) {
                return Err(Error::config(
                    "solver.snapshot_growth",
                    format!("must exceed 1, got {g}"),
                ));
            }
        }
        if !(self.growth_fraction > 0.0 && self.growth_fraction < 1.0) {
            return Err(Error::config(
                "solver.growth_fraction",
                format!("must lie in (0, 1), got {}", self.growth_fraction),
            ));
        }
        if self.blowup_cutoff.is_nan() {
            return Err(Error::config("solver.blowup_cutoff", "is NaN"));
        }
        Ok(())
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Snapshot {
    pub t: f64,
    pub u: Vec<f64>,
}

#[derive(Clone, Debug)]
pub struct Solution {
    geometry: Geometry,
    p: f64,
    snapshots: Vec<Snapshot>,
    blew_up: bool,
    t_stop: f64,
    u_max_series: Vec<(f64, f64)>,
}

fn field_max(u: &[f64]) -> f64 {
    u.iter().copied().fold(f64::NEG_INFINITY, f64::max)
}

impl Solution {
    /// Reassembles a solution from stored parts, e.g. after reading a run back from disk.
    pub fn from_parts(
        geometry: Geometry,
        p: f64,
        snapshots: Vec<Snapshot>,
        blew_up: bool,
        t_stop: f64,
        u_max_series: Vec<(f64, f64)>,
    ) -> Result<Self> {
        if snapshots.is_empty() {
            return Err(Error::domain("a solution needs at least one snapshot"));
        }
        for w in snapshots.windows(2) {
            if w[1].t <= w[0].t {
                return Err(Error::TimeOrder(format!(
                    "snapshot times must increase strictly ({} then {})",
                    w[0].t, w[1].t
                )));
            }
        }
        for s in &snapshots {
            if s.u.len() != geometry.num_points() {
                return Err(Error::Dimension(format!(
                    "snapshot at t={} has {} values, geometry has {} nodes",
                    s.t,
                    s.u.len(),
                    geometry.num_points()
                )));
            }
            if let Some(bad) = s.u.iter().find(|v| !(v.is_finite() && **v > 0.0)) {
                return Err(Error::domain(format!(
                    "snapshot at t={} holds non-positive value {bad}",
                    s.t
                )));
            }
        }
        for w in u_max_series.windows(2) {
            if w[1].0 < w[0].0 {
                return Err(Error::TimeOrder("u_max series must be time-ordered".into()));
            }
        }
        Ok(Solution {
            geometry,
            p,
            snapshots,
            blew_up,
            t_stop,
            u_max_series,
        })
    }

    pub fn geometry(&self) -> &Geometry {
        &self.geometry
    }

    pub fn p(&self) -> f64 {
        self.p
    }

    pub fn snapshots(&self) -> &[Snapshot] {
        &self.snapshots
    }

    pub fn blew_up(&self) -> bool {
        self.blew_up
    }

    pub fn t_stop(&self) -> f64 {
        self.t_stop
    }

    pub fn span(&self) -> (f64, f64) {
        (self.snapshots[0].t, self.snapshots[self.snapshots.len() - 1].t)
    }

    pub fn max_series(&self) -> &[(f64, f64)] {
        &self.u_max_series
    }

    /// Field at time `t`, geometric (log-linear) interpolation between the
    /// bracketing snapshots.
    pub fn field_at(&self, t: f64) -> Result<Vec<f64>> {
        let (k, w) = self.bracket(t)?;
        let a = &self.snapshots[k].u;
        if w == 0.0 {
            return Ok(a.clone());
        }
        let b = &self.snapshots[k + 1].u;
        Ok(a.iter().zip(b).map(|(&x, &y)| x * (y / x).powf(w)).collect())
    }

    /// Single-node value of `field_at`, interpolated in space as well.
    pub fn value_at(&self, x: f64, t: f64) -> Result<f64> {
        let (k, w) = self.bracket(t)?;
        let a = self.geometry.interpolate(&self.snapshots[k].u, x);
        if w == 0.0 {
            return Ok(a);
        }
        let b = self.geometry.interpolate(&self.snapshots[k + 1].u, x);
        Ok(a * (b / a).powf(w))
    }

    /// Index of the snapshot at or just before `t` and the fractional weight
    /// towards the next one.
    fn bracket(&self, t: f64) -> Result<(usize, f64)> {
        let (lo, hi) = self.span();
        if !(t >= lo && t <= hi) {
            return Err(Error::OutOfSpan { t, lo, hi });
        }
        let k = self.snapshots.partition_point(|s| s.t <= t) - 1;
        if k == self.snapshots.len() - 1 {
            return Ok((k, 0.0));
        }
        let (t0, t1) = (self.snapshots[k].t, self.snapshots[k + 1].t);
        Ok((k, (t - t0) / (t1 - t0)))
    }
}

pub fn max_series(sol: &Solution) -> &[(f64, f64)] {
    sol.max_series()
}

fn reaction(v: f64, p: f64) -> f64 {
    if p == 2.0 {
        v * v
    } else {
        v.powf(p)
    }
}

struct Rhs<'a> {
    geom: &'a Geometry,
    p: f64,
}

impl Rhs<'_> {
    fn eval(&self, u: &[f64], out: &mut [f64]) {
        self.geom.laplacian_into(u, out);
        let p = self.p;
        if u.len() >= PAR_THRESHOLD {
            out.par_iter_mut()
                .zip(u.par_iter())
                .for_each(|(o, &v)| *o += reaction(v, p));
        } else {
            for (o, &v) in out.iter_mut().zip(u) {
                *o += reaction(v, p);
            }
        }
    }
}

struct Workspace {
    k1: Vec<f64>,
    k2: Vec<f64>,
    k3: Vec<f64>,
    k4: Vec<f64>,
    stage: Vec<f64>,
}

enum StepOutcome {
    Accepted,
    NonPositive,
    NonFinite,
}

fn rk4_step(rhs: &Rhs, u: &[f64], dt: f64, ws: &mut Workspace, next: &mut [f64]) -> StepOutcome {
    let combine = |stage: &mut [f64], k: &[f64], c: f64| {
        for ((s, &ui), &ki) in stage.iter_mut().zip(u).zip(k) {
            *s = ui + c * ki;
        }
    };
    rhs.eval(u, &mut ws.k1);
    combine(&mut ws.stage, &ws.k1, 0.5 * dt);
    rhs.eval(&ws.stage, &mut ws.k2);
    combine(&mut ws.stage, &ws.k2, 0.5 * dt);
    rhs.eval(&ws.stage, &mut ws.k3);
    combine(&mut ws.stage, &ws.k3, dt);
    rhs.eval(&ws.stage, &mut ws.k4);
    let mut non_positive = false;
    for i in 0..u.len() {
        let v = u[i] + dt / 6.0 * (ws.k1[i] + 2.0 * (ws.k2[i] + ws.k3[i]) + ws.k4[i]);
        if !v.is_finite() {
            return StepOutcome::NonFinite;
        }
        non_positive |= v <= 0.0;
        next[i] = v;
    }
    if non_positive {
        StepOutcome::NonPositive
    } else {
        StepOutcome::Accepted
    }
}

/// Integrates from `u0` at t = 0 until `t_end`, blow-up (`max u ≥ blowup_cutoff`)
/// or `max_steps`, whichever comes first.
pub fn evolve(geom: &Geometry, u0: &[f64], cfg: &SolverConfig) -> Result<Solution> {
    cfg.validate()?;
    if u0.len() != geom.num_points() {
        return Err(Error::Dimension(format!(
            "initial data has {} values, geometry has {} nodes",
            u0.len(),
            geom.num_points()
        )));
    }
    if let Some(bad) = u0.iter().find(|v| !(v.is_finite() && **v > 0.0)) {
        return Err(Error::domain(format!(
            "initial data must be positive and finite, found {bad}"
        )));
    }
    let initial_max = field_max(u0);
    if cfg.blowup_cutoff <= initial_max {
        return Err(Error::config(
            "solver.blowup_cutoff",
            format!("must exceed the initial max {initial_max}"),
        ));
    }

    let n = geom.num_points();
    let p = cfg.p;
    let rhs = Rhs { geom, p };
    let dt_diffusive = 2.0 * cfg.cfl / geom.stiffness_bound();
    let mut ws = Workspace {
        k1: vec![0.0; n],
        k2: vec![0.0; n],
        k3: vec![0.0; n],
        k4: vec![0.0; n],
        stage: vec![0.0; n],
    };

    let mut t = 0.0_f64;
    let mut u = u0.to_vec();
    let mut next = vec![0.0; n];
    let mut umax = initial_max;
    let mut snapshots = vec![Snapshot { t, u: u.clone() }];
    let mut series = vec![(t, umax)];
    let mut last_snap_max = umax;
    let mut snap_index = 1u64;
    let snap_time = |k: u64| {
        let ts = k as f64 * cfg.snapshot_interval;
        match cfg.t_end {
            Some(te) if (ts - te).abs() <= 1e-9 * cfg.snapshot_interval => te,
            _ => ts,
        }
    };
    let mut next_snap = snap_time(snap_index);
    let mut blew_up = false;
    let mut steps = 0usize;

    loop {
        if let Some(te) = cfg.t_end {
            if t >= te {
                break;
            }
        }
        if steps >= cfg.max_steps {
            break;
        }
        let mut dt = cfg.dt_max.min(dt_diffusive);
        if p > 1.0 {
            dt = dt.min(cfg.growth_fraction * umax.powf(1.0 - p) / (p - 1.0));
            // Time can no longer resolve the approach to the singularity.
            if dt <= 64.0 * f64::EPSILON * t.abs() {
                blew_up = true;
                break;
            }
        }
        // Land exactly on snapshot times and t_end.
        let mut target = next_snap;
        if let Some(te) = cfg.t_end {
            target = target.min(te);
        }
        let mut landing = false;
        if t + dt >= target * (1.0 - 1e-14) {
            dt = target - t;
            landing = true;
        }

        let mut halvings = 0;
        loop {
            match rk4_step(&rhs, &u, dt, &mut ws, &mut next) {
                StepOutcome::Accepted => break,
                StepOutcome::NonFinite => return Err(Error::Instability { t: t + dt }),
                StepOutcome::NonPositive => {
                    halvings += 1;
                    if halvings > MAX_HALVINGS {
                        return Err(Error::PositivityLoss {
                            t,
                            halvings: MAX_HALVINGS,
                        });
                    }
                    dt *= 0.5;
                    landing = false;
                }
            }
        }
        t = if landing { target } else { t + dt };
        std::mem::swap(&mut u, &mut next);
        steps += 1;
        umax = field_max(&u);
        series.push((t, umax));

        if umax >= cfg.blowup_cutoff {
            blew_up = true;
            break;
        }
        let on_grid = landing && t >= next_snap * (1.0 - 1e-14);
        let grown = cfg.snapshot_growth.is_some_and(|g| umax >= g * last_snap_max);
        if on_grid || grown {
            snapshots.push(Snapshot { t, u: u.clone() });
            last_snap_max = umax;
        }
        while next_snap <= t * (1.0 + 1e-14) {
            snap_index += 1;
            next_snap = snap_time(snap_index);
        }
    }

    if snapshots.last().is_some_and(|s| s.t < t) {
        snapshots.push(Snapshot { t, u });
    }
    Solution::from_parts(geom.clone(), p, snapshots, blew_up, t, series)
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    fn torus() -> Geometry {
        Geometry::flat_torus(32, 1.0).unwrap()
    }

    #[test]
    fn constant_data_follows_ode() {
        let g = torus();
        let cfg = SolverConfig::new(2.0, 1e-4, 0.1, Some(0.9));
        let sol = evolve(&g, &vec![1.0; 32], &cfg).unwrap();
        assert!(!sol.blew_up());
        assert_eq!(sol.t_stop(), 0.9);
        let last = sol.snapshots().last().unwrap();
        assert_eq!(last.t, 0.9);
        for &v in &last.u {
            assert_relative_eq!(v, 10.0, max_relative = 1e-6);
            assert_eq!(v, last.u[0]);
        }
        // snapshots at 0, 0.1, ..., 0.9
        assert_eq!(sol.snapshots().len(), 10);
    }

    #[test]
    fn blow_up_time_for_half() {
        let g = torus();
        let cfg = SolverConfig::new(2.0, 1e-3, 0.5, None);
        let sol = evolve(&g, &vec![0.5; 32], &cfg).unwrap();
        assert!(sol.blew_up());
        assert!((sol.t_stop() - 2.0).abs() < 0.02, "{}", sol.t_stop());
        let series = sol.max_series();
        assert!(series.windows(2).all(|w| w[1].1 >= w[0].1));
    }

    #[test]
    fn empty_run() {
        let g = torus();
        let cfg = SolverConfig::new(2.0, 1e-3, 0.5, Some(0.0));
        let sol = evolve(&g, &vec![0.7; 32], &cfg).unwrap();
        assert_eq!(sol.max_series(), &[(0.0, 0.7)]);
        assert_eq!(sol.snapshots().len(), 1);
    }

    #[test]
    fn rejects_bad_input() {
        let g = torus();
        let cfg = SolverConfig::new(2.0, 1e-3, 0.5, Some(1.0));
        let mut u = vec![1.0; 32];
        u[3] = 0.0;
        assert!(matches!(evolve(&g, &u, &cfg), Err(Error::Domain(_))));
        assert!(matches!(evolve(&g, &[1.0; 8], &cfg), Err(Error::Dimension(_))));
        let mut bad = cfg.clone();
        bad.blowup_cutoff = 0.5;
        assert!(matches!(evolve(&g, &vec![1.0; 32], &bad), Err(Error::Config { .. })));
        bad = cfg.clone();
        bad.cfl = 1.5;
        assert!(bad.validate().is_err());
    }

    #[test]
    fn growth_snapshots() {
        let g = torus();
        let mut cfg = SolverConfig::new(2.0, 1e-3, 10.0, None);
        cfg.snapshot_growth = Some(2.0);
        let sol = evolve(&g, &vec![1.0; 32], &cfg).unwrap();
        // 1 → 1e8 doubling ≈ 27 snapshots
        assert!(sol.snapshots().len() >= 26, "{}", sol.snapshots().len());
    }

    #[test]
    fn field_interpolation_is_geometric() {
        let g = torus();
        let snaps = vec![
            Snapshot {
                t: 0.0,
                u: vec![1.0; 32],
            },
            Snapshot {
                t: 1.0,
                u: vec![4.0; 32],
            },
        ];
        let sol = Solution::from_parts(g, 2.0, snaps, false, 1.0, vec![(0.0, 1.0), (1.0, 4.0)]).unwrap();
        assert_relative_eq!(sol.field_at(0.5).unwrap()[7], 2.0, max_relative = 1e-14);
        assert_relative_eq!(sol.value_at(0.3, 0.5).unwrap(), 2.0, max_relative = 1e-14);
        assert!(matches!(sol.field_at(1.5), Err(Error::OutOfSpan { .. })));
    }

    #[test]
    fn from_parts_validation() {
        let g = torus();
        let s = |t: f64, v: f64| Snapshot { t, u: vec![v; 32] };
        assert!(Solution::from_parts(g.clone(), 2.0, vec![], false, 0.0, vec![]).is_err());
        assert!(matches!(
            Solution::from_parts(g.clone(), 2.0, vec![s(0.0, 1.0), s(0.0, 1.0)], false, 0.0, vec![]),
            Err(Error::TimeOrder(_))
        ));
        assert!(Solution::from_parts(g, 2.0, vec![s(0.0, -1.0)], false, 0.0, vec![]).is_err());
    }
}
