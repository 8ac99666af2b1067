//! Run configurations and the end-to-end experiment: simulate, check, analyse
//! blow-up, persist.

use std::f64::consts::PI;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use serde_json::{json, Value};

use crate::admissibility::{self, ParamPair, Problem, SweepGrid};
use crate::blowup::{self, RescaleWindow};
use crate::checks;
use crate::error::{Error, Result};
use crate::geometry::{Geometry, GeometryKind, GeometrySpec};
use crate::persist::{self, with_suffix};
use crate::solver::{self, Solution, SolverConfig};
use crate::statics::{self, Talenti};

pub const VERSION: &str = env!("CARGO_PKG_VERSION");

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case", deny_unknown_fields)]
pub enum InitialData {
    Constant {
        value: f64,
    },
    /// `base + amplitude·φ_mode`, with φ = sin(2π·mode·x/L) on the torus,
    /// cos(mode·θ) on the sphere and cos(π·mode·r/R) on radial ℝⁿ.
    Sinusoidal {
        #[serde(default = "one")]
        base: f64,
        amplitude: f64,
        #[serde(default = "one_u32")]
        mode: u32,
    },
    Profile {
        name: String,
    },
}

fn one() -> f64 {
    1.0
}
fn one_u32() -> u32 {
    1
}

impl InitialData {
    pub fn sample(&self, geom: &Geometry) -> Result<Vec<f64>> {
        let u: Vec<f64> = match self {
            InitialData::Constant { value } => vec![*value; geom.num_points()],
            InitialData::Sinusoidal { base, amplitude, mode } => {
                let m = f64::from(*mode);
                let l = geom.extent();
                geom.coords()
                    .iter()
                    .map(|&x| {
                        let phase = match geom.kind() {
                            GeometryKind::FlatTorus1D => (2.0 * PI * m * x / l).sin(),
                            GeometryKind::RadialSphere => (m * x).cos(),
                            GeometryKind::RadialEuclidean => (PI * m * x / l).cos(),
                        };
                        base + amplitude * phase
                    })
                    .collect()
            }
            InitialData::Profile { name } => match name.as_str() {
                "talenti" => statics::seed_from_profile(&Talenti, geom)?,
                other => return Err(Error::config("initial.name", format!("unknown profile `{other}`"))),
            },
        };
        if let Some(v) = u.iter().find(|v| !(v.is_finite() && **v > 0.0)) {
            return Err(Error::config(
                "initial",
                format!("initial data must be positive, found {v}"),
            ));
        }
        Ok(u)
    }
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct CheckToggles {
    pub liyau: bool,
    pub harnack: bool,
    pub monotone: bool,
    pub convexity: bool,
    pub decay: bool,
    pub blowup: bool,
    pub rescale: bool,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct Tolerances {
    /// `c` in `tol_disc = c·h²·scale`.
    pub tol_disc_factor: f64,
    pub tol_harnack: f64,
    /// Worst Li–Yau margin must be at least `-liyau_floor`.
    pub liyau_floor: f64,
    /// Li–Yau is checked on `(0, liyau_fraction·t_stop]`.
    pub liyau_fraction: f64,
    /// Bound on `max u_k` over the rescaling window.
    pub rescale_max: f64,
    /// Relative slack for the nonincreasing limit-profile errors.
    pub profile_slack: f64,
}

impl Default for Tolerances {
    fn default() -> Self {
        Tolerances {
            tol_disc_factor: checks::DEFAULT_TOL_FACTOR,
            tol_harnack: 0.05,
            liyau_floor: 0.05,
            liyau_fraction: 0.5,
            rescale_max: 1.05,
            profile_slack: 0.1,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct HarnackConfig {
    pub draws: usize,
    pub segments: usize,
}

impl Default for HarnackConfig {
    fn default() -> Self {
        HarnackConfig {
            draws: 20,
            segments: 64,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    pub geometry: GeometrySpec,
    pub solver: SolverConfig,
    pub initial: InitialData,
    #[serde(default)]
    pub pairs: Vec<ParamPair>,
    #[serde(default)]
    pub checks: CheckToggles,
    #[serde(default)]
    pub tolerances: Tolerances,
    #[serde(default)]
    pub harnack: HarnackConfig,
    #[serde(default)]
    pub out: Option<String>,
    #[serde(default)]
    pub seed: u64,
}

impl RunConfig {
    /// Parses and validates; parse errors carry line and column.
    pub fn from_json(text: &str) -> Result<Self> {
        let cfg: RunConfig = serde_json::from_str(text).map_err(|e| Error::Parse {
            what: "run config".into(),
            source: e,
        })?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn from_file(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(format!("reading {}", path.display()), e))?;
        let cfg: RunConfig = serde_json::from_str(&text).map_err(|e| Error::Parse {
            what: path.display().to_string(),
            source: e,
        })?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn validate(&self) -> Result<()> {
        let geom = Geometry::from_spec(&self.geometry).map_err(|e| Error::config("geometry", e.to_string()))?;
        self.solver.validate()?;
        let p = self.solver.p;
        let needs_pair = self.checks.liyau || self.checks.harnack || self.checks.monotone || self.checks.decay;
        if needs_pair && self.pairs.is_empty() {
            return Err(Error::config(
                "pairs",
                "at least one pair is needed for the enabled checks",
            ));
        }
        for (i, &pair) in self.pairs.iter().enumerate() {
            checks::effective_epsilon(geom.n(), p, pair)
                .map_err(|e| Error::config(format!("pairs[{i}]"), e.to_string()))?;
        }
        if (self.checks.blowup || self.checks.decay || self.checks.rescale) && p <= 1.0 {
            return Err(Error::config("checks", "blow-up analysis needs p > 1"));
        }
        if self.checks.convexity && geom.n() < 5 {
            return Err(Error::config("checks.convexity", "needs n ≥ 5"));
        }
        let t = &self.tolerances;
        for (name, v) in [
            ("tolerances.tol_disc_factor", t.tol_disc_factor),
            ("tolerances.tol_harnack", t.tol_harnack),
            ("tolerances.liyau_floor", t.liyau_floor),
            ("tolerances.profile_slack", t.profile_slack),
        ] {
            if !(v.is_finite() && v >= 0.0) {
                return Err(Error::config(name, format!("must be nonnegative, got {v}")));
            }
        }
        if !(t.liyau_fraction > 0.0 && t.liyau_fraction <= 1.0) {
            return Err(Error::config("tolerances.liyau_fraction", "must lie in (0, 1]"));
        }
        if self.checks.harnack && (self.harnack.draws == 0 || self.harnack.segments == 0) {
            return Err(Error::config("harnack", "draws and segments must be positive"));
        }
        self.initial.sample(&geom)?;
        Ok(())
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CheckOutcome {
    pub name: String,
    pub passed: bool,
    pub data: Value,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ExperimentReport {
    pub version: String,
    pub config: Value,
    pub simulation: Value,
    pub checks: Vec<CheckOutcome>,
    pub passed: bool,
}

fn to_value<T: Serialize>(v: &T) -> Value {
    serde_json::to_value(v).expect("report types serialize")
}

fn failed(name: &str, err: &Error) -> CheckOutcome {
    CheckOutcome {
        name: name.into(),
        passed: false,
        data: json!({ "error": err.to_string() }),
    }
}

/// Simulates the configured run.
pub fn simulate(cfg: &RunConfig) -> Result<Solution> {
    let geom = Geometry::from_spec(&cfg.geometry)?;
    let u0 = cfg.initial.sample(&geom)?;
    solver::evolve(&geom, &u0, &cfg.solver)
}

/// Runs the configured checks on an existing solution. Artifacts go under
/// `out` when given.
pub fn analyse(cfg: &RunConfig, sol: &Solution, out: Option<&Path>) -> Result<Vec<CheckOutcome>> {
    let tol = &cfg.tolerances;
    let mut outcomes = Vec::new();

    for (i, &pair) in cfg.pairs.iter().enumerate() {
        if cfg.checks.liyau {
            let name = format!("liyau[{i}]");
            match checks::liyau_check_with(sol, pair, (0.0, tol.liyau_fraction * sol.t_stop()), tol.tol_disc_factor) {
                Ok(r) => {
                    if let Some(prefix) = out {
                        persist::write_csv(
                            &with_suffix(prefix, &format!("_liyau_{i}.csv")),
                            &["t", "min_margin"],
                            r.per_snapshot.iter().map(|s| [s.t, s.min_margin]),
                        )?;
                    }
                    outcomes.push(CheckOutcome {
                        name,
                        passed: r.worst_margin >= -tol.liyau_floor,
                        data: json!({
                            "alpha": pair.alpha(),
                            "beta": pair.beta(),
                            "epsilon": r.epsilon,
                            "worst_margin": r.worst_margin,
                            "worst_time": r.worst_time,
                            "violated_tol_disc": r.violated,
                            "snapshots": r.per_snapshot.len(),
                        }),
                    });
                }
                Err(e) => outcomes.push(failed(&name, &e)),
            }
        }
        if cfg.checks.harnack {
            let name = format!("harnack[{i}]");
            let (lo, hi) = sol.span();
            let paths = checks::random_paths(
                sol.geometry(),
                (lo, hi),
                cfg.harnack.draws,
                cfg.harnack.segments,
                cfg.seed.wrapping_add(i as u64),
            );
            let reports: Result<Vec<_>> = paths
                .iter()
                .map(|&path| checks::harnack_check(sol, pair, path, tol.tol_harnack))
                .collect();
            match reports {
                Ok(rs) => {
                    let passed = rs.iter().all(|r| r.holds_simple && r.rhs_simple >= r.rhs_full);
                    let worst = rs.iter().map(|r| r.lhs / r.rhs_simple).fold(0.0, f64::max);
                    outcomes.push(CheckOutcome {
                        name,
                        passed,
                        data: json!({
                            "draws": rs.len(),
                            "holds_simple": rs.iter().filter(|r| r.holds_simple).count(),
                            "holds_full": rs.iter().filter(|r| r.holds_full).count(),
                            "max_lhs_over_rhs_simple": worst,
                            "reports": to_value(&rs),
                        }),
                    });
                }
                Err(e) => outcomes.push(failed(&name, &e)),
            }
        }
        if cfg.checks.monotone || cfg.checks.convexity {
            let name = format!("monotone[{i}]");
            match checks::monotone_convex_check_with(sol, pair, 0.0, cfg.checks.convexity, tol.tol_disc_factor) {
                Ok(r) => {
                    let mono_ok = r.mono_margin >= -r.mono_tol;
                    let convex_ok = match (r.convex_margin, r.convex_tol) {
                        (Some(m), Some(t)) => m >= -t,
                        _ => !cfg.checks.convexity,
                    };
                    outcomes.push(CheckOutcome {
                        name,
                        passed: mono_ok && convex_ok,
                        data: to_value(&r),
                    });
                }
                Err(e) => outcomes.push(failed(&name, &e)),
            }
        }
    }

    let wants_fit = cfg.checks.blowup || cfg.checks.decay || cfg.checks.rescale;
    if !wants_fit {
        return Ok(outcomes);
    }
    let fit = if sol.blew_up() {
        blowup::fit_blowup_time(sol.max_series(), sol.p())
    } else {
        let series = sol.max_series();
        Err(Error::NoBlowup {
            initial_max: series.first().map_or(f64::NAN, |s| s.1),
            final_max: series.last().map_or(f64::NAN, |s| s.1),
        })
    };
    let fit = match fit {
        Ok(f) => f,
        Err(e) => {
            outcomes.push(failed("blowup", &e));
            return Ok(outcomes);
        }
    };

    if cfg.checks.blowup {
        let lb = blowup::check_lower_bound(sol.max_series(), &fit)?;
        if let Some(prefix) = out {
            let rows: Vec<[f64; 3]> = sol
                .max_series()
                .iter()
                .filter(|(t, _)| *t < fit.t_fit)
                .map(|&(t, m)| [t, m, m.powf(sol.p() - 1.0) * (fit.t_fit - t)])
                .collect();
            persist::write_csv(&with_suffix(prefix, "_blowup.csv"), &["t", "umax", "q"], rows)?;
        }
        let rate_ok = fit
            .rate_series
            .iter()
            .all(|&(_, q)| q >= 1.0 / (fit.p - 1.0) - fit.tol_fit);
        outcomes.push(CheckOutcome {
            name: "blowup".into(),
            passed: lb.holds && rate_ok,
            data: json!({
                "t_fit": fit.t_fit,
                "window": [fit.window.0, fit.window.1],
                "samples": fit.samples,
                "q_limit": fit.q_limit,
                "q_max": fit.q_max,
                "residual": fit.residual,
                "interp_error": fit.interp_error,
                "roundoff": fit.roundoff,
                "tol_fit": fit.tol_fit,
                "lower_bound": to_value(&lb),
                "rate_bound_ok": rate_ok,
            }),
        });
    }

    if cfg.checks.decay {
        for (i, &pair) in cfg.pairs.iter().enumerate() {
            let name = format!("decay[{i}]");
            match checks::decay_bound_check(sol, pair, fit.t_fit) {
                Ok(r) => outcomes.push(CheckOutcome {
                    name,
                    passed: r.relative_margin >= -fit.tol_fit,
                    data: to_value(&r),
                }),
                Err(e) => outcomes.push(failed(&name, &e)),
            }
        }
    }

    if cfg.checks.rescale {
        let snaps = sol.snapshots();
        let times: Vec<f64> = snaps[snaps.len().saturating_sub(3)..].iter().map(|s| s.t).collect();
        match blowup::rescale(sol, &times, RescaleWindow::default()) {
            Ok(slices) => {
                let errors: Vec<f64> = slices.iter().map(|s| s.profile_error(sol.p())).collect();
                let maxima: Vec<f64> = slices.iter().map(|s| s.max_value()).collect();
                let origin_ok = slices.iter().all(|s| s.value_at_origin() == 1.0);
                let max_ok = maxima.iter().all(|&m| m <= tol.rescale_max);
                let trend_ok = blowup::nonincreasing_within(&errors, tol.profile_slack);
                outcomes.push(CheckOutcome {
                    name: "rescale".into(),
                    passed: origin_ok && max_ok && trend_ok,
                    data: json!({
                        "t_k": times,
                        "scales": slices.iter().map(|s| s.scale).collect::<Vec<_>>(),
                        "s_ranges": slices.iter().map(|s| [s.s_grid[0], s.s_grid[s.s_grid.len() - 1]]).collect::<Vec<_>>(),
                        "max_u_k": maxima,
                        "profile_errors": errors,
                        "origin_exact": origin_ok,
                    }),
                });
            }
            Err(e) => outcomes.push(failed("rescale", &e)),
        }
    }
    Ok(outcomes)
}

/// Simulates, runs the enabled checks and writes every artifact under
/// `cfg.out` (or `out_override`).
pub fn run_experiment(cfg: &RunConfig, out_override: Option<&Path>) -> Result<ExperimentReport> {
    cfg.validate()?;
    let sol = simulate(cfg)?;
    let out: Option<PathBuf> = out_override
        .map(Path::to_path_buf)
        .or_else(|| cfg.out.as_ref().map(PathBuf::from));
    let config = to_value(cfg);
    if let Some(prefix) = &out {
        persist::write_run(prefix, &sol, config.clone())?;
    }
    let outcomes = analyse(cfg, &sol, out.as_deref())?;
    let report = ExperimentReport {
        version: VERSION.into(),
        config,
        simulation: json!({
            "t_stop": sol.t_stop(),
            "blew_up": sol.blew_up(),
            "snapshots": sol.snapshots().len(),
            "steps": sol.max_series().len() - 1,
            "final_max": sol.max_series().last().map(|s| s.1),
        }),
        passed: outcomes.iter().all(|c| c.passed),
        checks: outcomes,
    };
    if let Some(prefix) = &out {
        persist::write_json(&with_suffix(prefix, "_report.json"), &report)?;
    }
    Ok(report)
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ConvexityRow {
    pub n: u32,
    pub p: f64,
    pub nonempty: bool,
    pub alpha: Option<f64>,
    pub beta: Option<f64>,
    pub coefficient: Option<f64>,
}

/// Threshold comparison that also covers n = 1, where the reference
/// exponents degenerate and the ordering is not applicable.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ThresholdRow {
    pub n: u32,
    pub p_bar_closed: f64,
    pub p_bar_sweep: f64,
    pub ref_lower: Option<f64>,
    pub ref_upper: Option<f64>,
    pub ordering_ok: Option<bool>,
}

pub fn threshold_row(n: u32, grid: &SweepGrid) -> Result<ThresholdRow> {
    if n >= 2 {
        let r = admissibility::threshold_report_with(n, grid)?;
        return Ok(ThresholdRow {
            n,
            p_bar_closed: r.p_bar_closed,
            p_bar_sweep: r.p_bar_sweep,
            ref_lower: r.ref_lower,
            ref_upper: Some(r.ref_upper),
            ordering_ok: Some(r.ordering_ok),
        });
    }
    Ok(ThresholdRow {
        n,
        p_bar_closed: admissibility::p_bar_closed(n),
        p_bar_sweep: admissibility::p_bar_sweep(n, grid)?,
        ref_lower: None,
        ref_upper: None,
        ordering_ok: None,
    })
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct AppendixReport {
    pub thresholds: Vec<ThresholdRow>,
    pub convexity: Vec<ConvexityRow>,
    /// Largest |p̄ closed − p̄ sweep|.
    pub max_sweep_gap: f64,
    pub passed: bool,
}

/// Threshold table for n = 1..=12 and the convexity search for n = 5..=10
/// over 20 exponents each. Writes `PREFIX_appendix.csv` and `PREFIX_region.csv`.
pub fn reproduce_appendix(grid: &SweepGrid, out: Option<&Path>) -> Result<AppendixReport> {
    let thresholds: Vec<_> = (1..=12).map(|n| threshold_row(n, grid)).collect::<Result<_>>()?;
    let conv_grid = SweepGrid::with_points(200);
    let mut convexity = Vec::new();
    for n in 5..=10 {
        let pbar = admissibility::p_bar_closed(n);
        for j in 0..20 {
            let p = 1.01 + (0.99 * pbar - 1.01) * j as f64 / 19.0;
            let found = admissibility::convexity_region_nonempty(Problem::new(n, p)?, &conv_grid)?;
            convexity.push(ConvexityRow {
                n,
                p,
                nonempty: found.is_some(),
                alpha: found.map(|f| f.pair.alpha()),
                beta: found.map(|f| f.pair.beta()),
                coefficient: found.map(|f| f.coefficient),
            });
        }
    }
    let max_sweep_gap = thresholds
        .iter()
        .map(|r| (r.p_bar_closed - r.p_bar_sweep).abs())
        .fold(0.0, f64::max);
    let passed = max_sweep_gap <= 2e-3
        && thresholds.iter().all(|r| r.ordering_ok != Some(false))
        && convexity.iter().all(|r| r.nonempty);

    if let Some(prefix) = out {
        let opt = |v: Option<f64>| v.map(|x| x.to_string()).unwrap_or_default();
        let mut text = String::from("n,p_bar_closed,p_bar_sweep,ref_lower,ref_upper,ordering_ok\n");
        for r in &thresholds {
            text.push_str(&format!(
                "{},{},{},{},{},{}\n",
                r.n,
                r.p_bar_closed,
                r.p_bar_sweep,
                opt(r.ref_lower),
                opt(r.ref_upper),
                r.ordering_ok.map(|b| b.to_string()).unwrap_or_default()
            ));
        }
        persist::write_text(&with_suffix(prefix, "_appendix.csv"), &text)?;
        let mut text = String::from("n,p,nonempty,alpha,beta,coefficient\n");
        for r in &convexity {
            text.push_str(&format!(
                "{},{},{},{},{},{}\n",
                r.n,
                r.p,
                r.nonempty,
                opt(r.alpha),
                opt(r.beta),
                opt(r.coefficient)
            ));
        }
        persist::write_text(&with_suffix(prefix, "_region.csv"), &text)?;
    }
    Ok(AppendixReport {
        thresholds,
        convexity,
        max_sweep_gap,
        passed,
    })
}
