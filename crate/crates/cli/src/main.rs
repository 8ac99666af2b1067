use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{bail, Context};
use clap::{Args, Parser, Subcommand, ValueEnum};
use serde_json::{json, Value};

use liyau_core::admissibility::{self, ParamPair, Problem, SweepGrid};
use liyau_core::blowup::{self, RescaleWindow};
use liyau_core::checks::{self, PathSpec};
use liyau_core::experiment::{self, RunConfig};
use liyau_core::persist::{self, with_suffix};
use liyau_core::statics::{self, FdProfile, RadialProfile, Talenti};
use liyau_core::Solution;

#[derive(Parser)]
#[command(name = "liyau", version, about = "Li–Yau estimates for u_t = Δu + u^p")]
struct Cli {
    /// Prefix for written artifacts.
    #[arg(long, global = true, value_name = "PREFIX")]
    out: Option<PathBuf>,
    /// Print the report as a single compact JSON line.
    #[arg(long, global = true)]
    json: bool,
    /// Print nothing on standard output.
    #[arg(long, global = true)]
    quiet: bool,
    #[command(subcommand)]
    command: Command,
}

#[derive(Args)]
struct PairArgs {
    #[arg(long)]
    alpha: f64,
    #[arg(long)]
    beta: f64,
}

impl PairArgs {
    fn pair(&self) -> anyhow::Result<ParamPair> {
        Ok(ParamPair::new(self.alpha, self.beta)?)
    }
}

#[derive(Clone, Copy, ValueEnum)]
enum PickRule {
    Simple,
    Hamilton,
}

#[derive(Subcommand)]
enum Command {
    /// Critical exponent p̄ₙ, closed form against the grid sweep.
    Pbar {
        #[arg(long)]
        n: u32,
        /// Grid points per axis of the sweep.
        #[arg(long, default_value_t = 400)]
        points: usize,
    },
    /// Admissibility of one (α, β) pair. Exits 1 when inadmissible.
    Admissible {
        #[arg(long)]
        n: u32,
        #[arg(long)]
        p: f64,
        #[command(flatten)]
        pair: PairArgs,
    },
    /// Feasible region on a grid of (α, β).
    Region {
        #[arg(long)]
        n: u32,
        #[arg(long)]
        p: f64,
        /// Also search for a pair with a nonnegative convexity coefficient.
        #[arg(long)]
        convexity: bool,
        #[arg(long, default_value_t = 200)]
        points: usize,
        /// Write the full grid as CSV.
        #[arg(long, value_name = "FILE")]
        csv: Option<PathBuf>,
    },
    /// Run the solver and store the run under --out.
    Simulate {
        #[arg(long)]
        config: PathBuf,
    },
    /// Li–Yau margin per snapshot of a stored run.
    CheckLiyau {
        #[arg(long, value_name = "PREFIX")]
        run: PathBuf,
        #[command(flatten)]
        pair: PairArgs,
        #[arg(long, default_value_t = 0.0)]
        t_lo: f64,
        /// Defaults to the end of the run.
        #[arg(long)]
        t_hi: Option<f64>,
        #[arg(long, default_value_t = checks::DEFAULT_TOL_FACTOR)]
        tol_factor: f64,
    },
    /// Harnack inequality along explicit or seeded random paths.
    CheckHarnack {
        #[arg(long, value_name = "PREFIX")]
        run: PathBuf,
        #[command(flatten)]
        pair: PairArgs,
        #[arg(long, requires_all = ["t1", "x2", "t2"])]
        x1: Option<f64>,
        #[arg(long)]
        t1: Option<f64>,
        #[arg(long)]
        x2: Option<f64>,
        #[arg(long)]
        t2: Option<f64>,
        #[arg(long, default_value_t = 20)]
        draws: usize,
        #[arg(long, default_value_t = 64)]
        segments: usize,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long, default_value_t = 0.05)]
        tol: f64,
    },
    /// Monotonicity margin, optionally with the convexity margin (n ≥ 5).
    CheckMono {
        #[arg(long, value_name = "PREFIX")]
        run: PathBuf,
        #[command(flatten)]
        pair: PairArgs,
        #[arg(long, default_value_t = 0.0)]
        t0: f64,
        #[arg(long)]
        convexity: bool,
        #[arg(long, default_value_t = checks::DEFAULT_TOL_FACTOR)]
        tol_factor: f64,
    },
    /// Upper decay bound before a blow-up time (fitted unless --t-bar is given).
    CheckDecay {
        #[arg(long, value_name = "PREFIX")]
        run: PathBuf,
        #[command(flatten)]
        pair: PairArgs,
        #[arg(long)]
        t_bar: Option<f64>,
    },
    /// Blow-up time fit, lower bound and rescaled slices.
    Blowup {
        #[arg(long, value_name = "PREFIX")]
        run: PathBuf,
        #[arg(long, value_enum, default_value = "simple")]
        pick_rule: PickRule,
    },
    /// Static-solution residual of a radial profile.
    StaticCheck {
        #[arg(long, default_value = "talenti")]
        profile: String,
        /// `start:stop:step`, inclusive of stop.
        #[arg(long, default_value = "0:10:0.1")]
        radii: String,
        /// Use finite-difference derivatives with this step.
        #[arg(long)]
        fd_step: Option<f64>,
        /// Pass when |residual| ≤ tol·u² at every radius.
        #[arg(long, default_value_t = 1e-9)]
        tol: f64,
    },
    /// Threshold table and convexity search over dimensions.
    Appendix {
        #[arg(long, default_value_t = 400)]
        points: usize,
    },
    /// Full experiment from a config file.
    Run {
        #[arg(long)]
        config: PathBuf,
    },
}

struct Outcome {
    report: Value,
    passed: bool,
}

fn outcome(report: Value, passed: bool) -> anyhow::Result<Outcome> {
    Ok(Outcome { report, passed })
}

fn load_run(prefix: &Path) -> anyhow::Result<Solution> {
    persist::read_run(prefix).with_context(|| format!("loading run {}", prefix.display()))
}

fn parse_radii(spec: &str) -> anyhow::Result<Vec<f64>> {
    let parts: Vec<f64> = spec
        .split(':')
        .map(|s| s.trim().parse::<f64>())
        .collect::<Result<_, _>>()
        .with_context(|| format!("radii `{spec}`"))?;
    let [a, b, step] = parts[..] else {
        bail!("radii must be start:stop:step, got `{spec}`");
    };
    if !(step > 0.0 && b >= a) {
        bail!("radii need step > 0 and stop ≥ start, got `{spec}`");
    }
    let count = ((b - a) / step + 1e-9).floor() as usize;
    Ok((0..=count).map(|k| a + k as f64 * step).collect())
}

fn opt_cell(v: Option<f64>) -> String {
    v.map(|x| x.to_string()).unwrap_or_default()
}

fn fit_for(sol: &Solution) -> anyhow::Result<blowup::BlowupFit> {
    Ok(blowup::fit_blowup_time(sol.max_series(), sol.p())?)
}

fn execute(cli: &Cli) -> anyhow::Result<Outcome> {
    let out = cli.out.as_deref();
    match &cli.command {
        Command::Pbar { n, points } => {
            let r = experiment::threshold_row(*n, &SweepGrid::with_points(*points))?;
            let ok = (r.p_bar_closed - r.p_bar_sweep).abs() <= 2e-3;
            outcome(serde_json::to_value(r)?, ok)
        }
        Command::Admissible { n, p, pair } => {
            let prob = Problem::new(*n, *p)?;
            let pair = pair.pair()?;
            let r = admissibility::check_admissible(prob, pair)?;
            let mut v = json!({ "n": n, "p": p, "alpha": pair.alpha(), "beta": pair.beta() });
            merge(&mut v, serde_json::to_value(r)?);
            outcome(v, r.admissible)
        }
        Command::Region {
            n,
            p,
            convexity,
            points,
            csv,
        } => {
            let prob = Problem::new(*n, *p)?;
            let rows = admissibility::region_table(prob, *points, 1e-4)?;
            if let Some(path) = csv {
                let mut text = String::from("alpha,beta,admissible,cond2,cond1_slack,epsilon,convexity_coeff\n");
                for r in &rows {
                    text.push_str(&format!(
                        "{},{},{},{},{},{},{}\n",
                        r.alpha,
                        r.beta,
                        r.admissible,
                        r.cond2,
                        r.cond1_slack,
                        opt_cell(r.epsilon),
                        opt_cell(r.convexity_coeff)
                    ));
                }
                persist::write_text(path, &text)?;
            }
            let feasible = rows.iter().filter(|r| r.admissible).count();
            let mut v = json!({
                "n": n,
                "p": p,
                "points": points,
                "feasible": feasible,
                "total": rows.len(),
                "p_bar": admissibility::p_bar_closed(*n),
            });
            if *convexity {
                let found = admissibility::convexity_region_nonempty(prob, &SweepGrid::with_points(*points))?;
                v["convexity"] = serde_json::to_value(found)?;
            }
            outcome(v, feasible > 0)
        }
        Command::Simulate { config } => {
            let cfg = RunConfig::from_file(config)?;
            let sol = experiment::simulate(&cfg)?;
            let prefix = out
                .map(Path::to_path_buf)
                .or_else(|| cfg.out.as_ref().map(PathBuf::from))
                .context("simulate needs --out PREFIX (or `out` in the config)")?;
            let files = persist::write_run(&prefix, &sol, serde_json::to_value(&cfg)?)?;
            outcome(
                json!({
                    "blew_up": sol.blew_up(),
                    "t_stop": sol.t_stop(),
                    "snapshots": files.snapshots.len(),
                    "final_max": sol.max_series().last().map(|s| s.1),
                    "meta": files.meta,
                }),
                true,
            )
        }
        Command::CheckLiyau {
            run,
            pair,
            t_lo,
            t_hi,
            tol_factor,
        } => {
            let sol = load_run(run)?;
            let hi = t_hi.unwrap_or(sol.t_stop());
            let r = checks::liyau_check_with(&sol, pair.pair()?, (*t_lo, hi), *tol_factor)?;
            if let Some(prefix) = out {
                persist::write_csv(
                    &with_suffix(prefix, "_liyau.csv"),
                    &["t", "min_margin"],
                    r.per_snapshot.iter().map(|s| [s.t, s.min_margin]),
                )?;
            }
            let passed = !r.violated;
            outcome(serde_json::to_value(r)?, passed)
        }
        Command::CheckHarnack {
            run,
            pair,
            x1,
            t1,
            x2,
            t2,
            draws,
            segments,
            seed,
            tol,
        } => {
            let sol = load_run(run)?;
            let pair = pair.pair()?;
            let paths = match (x1, t1, x2, t2) {
                (Some(x1), Some(t1), Some(x2), Some(t2)) => vec![PathSpec {
                    x1: *x1,
                    t1: *t1,
                    x2: *x2,
                    t2: *t2,
                    segments: *segments,
                }],
                _ => checks::random_paths(sol.geometry(), sol.span(), *draws, *segments, *seed),
            };
            let reports = paths
                .iter()
                .map(|&path| checks::harnack_check(&sol, pair, path, *tol))
                .collect::<Result<Vec<_>, _>>()?;
            let passed = reports.iter().all(|r| r.holds_simple && r.rhs_simple >= r.rhs_full);
            if let Some(prefix) = out {
                persist::write_csv(
                    &with_suffix(prefix, "_harnack.csv"),
                    &["x1", "t1", "x2", "t2", "lhs", "rhs_full", "rhs_simple"],
                    reports.iter().map(|r| {
                        [
                            r.path.x1,
                            r.path.t1,
                            r.path.x2,
                            r.path.t2,
                            r.lhs,
                            r.rhs_full,
                            r.rhs_simple,
                        ]
                    }),
                )?;
            }
            outcome(
                json!({
                    "draws": reports.len(),
                    "holds_simple": reports.iter().filter(|r| r.holds_simple).count(),
                    "holds_full": reports.iter().filter(|r| r.holds_full).count(),
                    "reports": reports,
                }),
                passed,
            )
        }
        Command::CheckMono {
            run,
            pair,
            t0,
            convexity,
            tol_factor,
        } => {
            let sol = load_run(run)?;
            let r = checks::monotone_convex_check_with(&sol, pair.pair()?, *t0, *convexity, *tol_factor)?;
            let convex_ok = match (r.convex_margin, r.convex_tol) {
                (Some(m), Some(t)) => m >= -t,
                _ => !convexity,
            };
            let passed = r.mono_margin >= -r.mono_tol && convex_ok;
            outcome(serde_json::to_value(r)?, passed)
        }
        Command::CheckDecay { run, pair, t_bar } => {
            let sol = load_run(run)?;
            let (t_bar, tol) = match t_bar {
                Some(t) => (*t, 0.0),
                None => {
                    let fit = fit_for(&sol)?;
                    (fit.t_fit, fit.tol_fit)
                }
            };
            let r = checks::decay_bound_check(&sol, pair.pair()?, t_bar)?;
            let passed = r.relative_margin >= -tol;
            let mut v = serde_json::to_value(r)?;
            v["tol"] = json!(tol);
            outcome(v, passed)
        }
        Command::Blowup { run, pick_rule } => {
            let sol = load_run(run)?;
            let fit = fit_for(&sol)?;
            let lb = blowup::check_lower_bound(sol.max_series(), &fit)?;
            let times = match pick_rule {
                PickRule::Simple => {
                    let snaps = sol.snapshots();
                    snaps[snaps.len().saturating_sub(3)..].iter().map(|s| s.t).collect()
                }
                PickRule::Hamilton => blowup::hamilton_times(&sol, fit.t_fit, &[1e2, 1e4, 1e6])?,
            };
            let slices = blowup::rescale(&sol, &times, RescaleWindow::default())?;
            let errors: Vec<f64> = slices.iter().map(|s| s.profile_error(sol.p())).collect();
            if let Some(prefix) = out {
                persist::write_csv(
                    &with_suffix(prefix, "_blowup.csv"),
                    &["t", "umax", "q"],
                    sol.max_series()
                        .iter()
                        .filter(|(t, _)| *t < fit.t_fit)
                        .map(|&(t, m)| [t, m, m.powf(sol.p() - 1.0) * (fit.t_fit - t)]),
                )?;
            }
            outcome(
                json!({
                    "t_fit": fit.t_fit,
                    "q_limit": fit.q_limit,
                    "q_max": fit.q_max,
                    "tol_fit": fit.tol_fit,
                    "samples": fit.samples,
                    "lower_bound": lb,
                    "slices": slices.iter().map(|s| json!({
                        "t_k": s.t_k,
                        "x_k": s.x_k,
                        "scale": s.scale,
                        "s_range": [s.s_grid[0], s.s_grid[s.s_grid.len() - 1]],
                        "max_u_k": s.max_value(),
                        "origin": s.value_at_origin(),
                    })).collect::<Vec<_>>(),
                    "profile_errors": errors,
                }),
                lb.holds,
            )
        }
        Command::StaticCheck {
            profile,
            radii,
            fd_step,
            tol,
        } => {
            if profile != "talenti" {
                bail!("unknown profile `{profile}` (available: talenti)");
            }
            let radii = parse_radii(radii)?;
            let fd;
            let prof: &dyn RadialProfile = match fd_step {
                Some(h) => {
                    fd = FdProfile::new(statics::talenti_value, *h, Talenti.n(), Talenti.p())?;
                    &fd
                }
                None => &Talenti,
            };
            let residuals = statics::static_residual(prof, &radii)?;
            let rows: Vec<[f64; 3]> = radii
                .iter()
                .zip(&residuals)
                .map(|(&r, &res)| [r, statics::talenti_value(r), res])
                .collect();
            let passed = rows.iter().all(|[_, u, res]| res.abs() <= tol * u * u);
            let max_abs = residuals.iter().fold(0.0_f64, |m, r| m.max(r.abs()));
            let csv = persist::csv_string(&["r", "u", "residual"], &rows);
            match out {
                Some(prefix) => persist::write_text(&with_suffix(prefix, "_static.csv"), &csv)?,
                // Without --out the CSV itself is the output.
                None if !cli.json => {
                    if !cli.quiet {
                        print!("{csv}");
                    }
                    return outcome(Value::Null, passed);
                }
                None => {}
            }
            outcome(
                json!({ "radii": radii.len(), "max_abs_residual": max_abs, "tol": tol }),
                passed,
            )
        }
        Command::Appendix { points } => {
            let r = experiment::reproduce_appendix(&SweepGrid::with_points(*points), out)?;
            let passed = r.passed;
            outcome(serde_json::to_value(r)?, passed)
        }
        Command::Run { config } => {
            let cfg = RunConfig::from_file(config)?;
            let r = experiment::run_experiment(&cfg, out)?;
            let passed = r.passed;
            outcome(serde_json::to_value(r)?, passed)
        }
    }
}

fn merge(into: &mut Value, from: Value) {
    if let (Value::Object(a), Value::Object(b)) = (into, from) {
        a.extend(b);
    }
}

fn configure_threads() -> anyhow::Result<()> {
    if let Ok(v) = std::env::var("LIYAU_THREADS") {
        let n: usize = v.parse().with_context(|| format!("LIYAU_THREADS=`{v}`"))?;
        rayon::ThreadPoolBuilder::new().num_threads(n).build_global()?;
    }
    Ok(())
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = configure_threads().and_then(|()| execute(&cli));
    match result {
        Ok(Outcome { report, passed }) => {
            if !cli.quiet && !report.is_null() {
                let text = if cli.json {
                    serde_json::to_string(&report)
                } else {
                    serde_json::to_string_pretty(&report)
                };
                println!("{}", text.expect("reports serialize"));
            }
            if passed {
                ExitCode::SUCCESS
            } else {
                ExitCode::from(1)
            }
        }
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(2)
        }
    }
}
