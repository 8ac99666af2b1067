//! Run files on disk.
//!
//! A run stored under `PREFIX` consists of `PREFIX_umax.csv` (`t,umax`),
//! one `PREFIX_snap_<k>.csv` (`coord,u`) per snapshot and `PREFIX_meta.json`.
//! CSVs carry a header row, `.` decimals and `\n` line ends; floats use the
//! shortest round-trip representation, so rereading is lossless.

use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geometry::{Geometry, GeometrySpec};
use crate::solver::{Snapshot, Solution};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RunMeta {
    pub blew_up: bool,
    pub t_stop: f64,
    pub p: f64,
    pub geometry: GeometrySpec,
    pub snapshot_times: Vec<f64>,
    /// Whatever configuration produced the run, echoed verbatim.
    #[serde(default)]
    pub config: serde_json::Value,
}

pub fn with_suffix(prefix: &Path, suffix: &str) -> PathBuf {
    let mut name = prefix.as_os_str().to_os_string();
    name.push(suffix);
    PathBuf::from(name)
}

/// Renders rows as CSV text.
pub fn csv_string<R: AsRef<[f64]>>(header: &[&str], rows: impl IntoIterator<Item = R>) -> String {
    let mut out = header.join(",");
    out.push('\n');
    for row in rows {
        let mut first = true;
        for v in row.as_ref() {
            if !first {
                out.push(',');
            }
            first = false;
            write!(out, "{v}").expect("writing to a String");
        }
        out.push('\n');
    }
    out
}

pub fn write_text(path: &Path, text: &str) -> Result<()> {
    if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
        fs::create_dir_all(dir).map_err(|e| Error::io(format!("creating {}", dir.display()), e))?;
    }
    fs::write(path, text).map_err(|e| Error::io(format!("writing {}", path.display()), e))
}

pub fn write_csv<R: AsRef<[f64]>>(path: &Path, header: &[&str], rows: impl IntoIterator<Item = R>) -> Result<()> {
    write_text(path, &csv_string(header, rows))
}

pub fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<()> {
    let mut text = serde_json::to_string_pretty(value).map_err(|e| Error::Parse {
        what: format!("serializing {}", path.display()),
        source: e,
    })?;
    text.push('\n');
    write_text(path, &text)
}

/// Reads a numeric CSV with the expected header.
pub fn read_csv(path: &Path, header: &[&str]) -> Result<Vec<Vec<f64>>> {
    let text = fs::read_to_string(path).map_err(|e| Error::io(format!("reading {}", path.display()), e))?;
    let bad = |line: usize, reason: String| Error::Format {
        path: path.display().to_string(),
        reason: format!("line {line}: {reason}"),
    };
    let mut lines = text.lines();
    let found = lines.next().unwrap_or_default();
    if found != header.join(",") {
        return Err(bad(
            1,
            format!("expected header `{}`, found `{found}`", header.join(",")),
        ));
    }
    lines
        .enumerate()
        .filter(|(_, l)| !l.is_empty())
        .map(|(i, line)| {
            let row: Vec<f64> = line
                .split(',')
                .map(|c| c.trim().parse::<f64>().map_err(|e| bad(i + 2, format!("`{c}`: {e}"))))
                .collect::<Result<_>>()?;
            if row.len() != header.len() {
                return Err(bad(
                    i + 2,
                    format!("expected {} columns, found {}", header.len(), row.len()),
                ));
            }
            Ok(row)
        })
        .collect()
}

#[derive(Clone, Debug, Default, PartialEq)]
pub struct RunFiles {
    pub umax: PathBuf,
    pub meta: PathBuf,
    pub snapshots: Vec<PathBuf>,
}

pub fn write_run(prefix: &Path, sol: &Solution, config: serde_json::Value) -> Result<RunFiles> {
    let geom = sol.geometry();
    let umax = with_suffix(prefix, "_umax.csv");
    write_csv(&umax, &["t", "umax"], sol.max_series().iter().map(|&(t, m)| [t, m]))?;
    let mut snapshots = Vec::with_capacity(sol.snapshots().len());
    for (k, s) in sol.snapshots().iter().enumerate() {
        let path = with_suffix(prefix, &format!("_snap_{k}.csv"));
        write_csv(
            &path,
            &["coord", "u"],
            geom.coords().iter().zip(&s.u).map(|(&x, &u)| [x, u]),
        )?;
        snapshots.push(path);
    }
    let meta = RunMeta {
        blew_up: sol.blew_up(),
        t_stop: sol.t_stop(),
        p: sol.p(),
        geometry: geom.spec(),
        snapshot_times: sol.snapshots().iter().map(|s| s.t).collect(),
        config,
    };
    let meta_path = with_suffix(prefix, "_meta.json");
    write_json(&meta_path, &meta)?;
    Ok(RunFiles {
        umax,
        meta: meta_path,
        snapshots,
    })
}

pub fn read_meta(prefix: &Path) -> Result<RunMeta> {
    let path = with_suffix(prefix, "_meta.json");
    let text = fs::read_to_string(&path).map_err(|e| Error::io(format!("reading {}", path.display()), e))?;
    serde_json::from_str(&text).map_err(|e| Error::Parse {
        what: path.display().to_string(),
        source: e,
    })
}

pub fn read_run(prefix: &Path) -> Result<Solution> {
    let meta = read_meta(prefix)?;
    let geom = Geometry::from_spec(&meta.geometry)?;
    let series = read_csv(&with_suffix(prefix, "_umax.csv"), &["t", "umax"])?
        .into_iter()
        .map(|r| (r[0], r[1]))
        .collect();
    let mut snaps = Vec::with_capacity(meta.snapshot_times.len());
    for (k, &t) in meta.snapshot_times.iter().enumerate() {
        let path = with_suffix(prefix, &format!("_snap_{k}.csv"));
        let rows = read_csv(&path, &["coord", "u"])?;
        if rows.len() != geom.num_points() {
            return Err(Error::Format {
                path: path.display().to_string(),
                reason: format!("{} rows for a {}-node geometry", rows.len(), geom.num_points()),
            });
        }
        snaps.push(Snapshot {
            t,
            u: rows.into_iter().map(|r| r[1]).collect(),
        });
    }
    Solution::from_parts(geom, meta.p, snaps, meta.blew_up, meta.t_stop, series)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::solver::{evolve, SolverConfig};

    #[test]
    fn csv_layout() {
        let s = csv_string(&["t", "umax"], [[0.0, 1.0], [0.1, 1.25]]);
        assert_eq!(s, "t,umax\n0,1\n0.1,1.25\n");
    }

    #[test]
    fn round_trip() {
        let dir = tempfile::tempdir().unwrap();
        let prefix = dir.path().join("runs/a");
        let g = Geometry::flat_torus(20, 1.0).unwrap();
        let u0: Vec<f64> = g.coords().iter().map(|x| 1.0 + 0.1 * x).collect();
        let sol = evolve(&g, &u0, &SolverConfig::new(1.5, 1e-3, 0.05, Some(0.2))).unwrap();
        let files = write_run(&prefix, &sol, serde_json::json!({"note": "x"})).unwrap();
        assert_eq!(files.snapshots.len(), sol.snapshots().len());
        let back = read_run(&prefix).unwrap();
        assert_eq!(back.snapshots(), sol.snapshots());
        assert_eq!(back.max_series(), sol.max_series());
        assert_eq!(back.t_stop(), sol.t_stop());
        assert_eq!(read_meta(&prefix).unwrap().config["note"], "x");
    }

    #[test]
    fn malformed_csv() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("x.csv");
        fs::write(&path, "t,umax\n0,1\n0.5,abc\n").unwrap();
        let err = read_csv(&path, &["t", "umax"]).unwrap_err().to_string();
        assert!(err.contains("line 3"), "{err}");
        fs::write(&path, "a,b\n").unwrap();
        assert!(read_csv(&path, &["t", "umax"]).is_err());
    }
}
