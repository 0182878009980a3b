//! Tidy long-format CSVs for external plotting, derived from a run's artifacts.

use std::path::Path;

use anyhow::{anyhow, bail, Context, Result};
use serde::{Deserialize, Serialize};

use crate::output::{num, write_csv, Artifact, Manifest};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, clap::ValueEnum)]
#[serde(rename_all = "snake_case")]
#[value(rename_all = "snake_case")]
pub enum PlotKind {
    DriftVsLogt,
    ProfileOverlay,
    ResidualHeatmap,
}

fn read_rows(path: &Path) -> Result<(csv::StringRecord, Vec<csv::StringRecord>)> {
    let mut rd = csv::Reader::from_path(path).with_context(|| format!("reading {}", path.display()))?;
    let header = rd.headers()?.clone();
    let rows = rd.records().collect::<Result<Vec<_>, _>>()?;
    Ok((header, rows))
}

fn column(header: &csv::StringRecord, name: &str) -> Result<usize> {
    header.iter().position(|h| h == name).ok_or_else(|| anyhow!("column {name} missing"))
}

fn parse(rec: &csv::StringRecord, i: usize) -> Result<f64> {
    rec[i].parse::<f64>().with_context(|| format!("non-numeric field {:?}", &rec[i]))
}

fn label_a(a: &Artifact) -> Result<f64> {
    a.label.strip_prefix("a=").and_then(|v| v.parse().ok()).ok_or_else(|| anyhow!("artifact label {:?}", a.label))
}

/// Closed-form waves of `u(1−u)(1+au)` with `U(0) = 1/2`, where one exists.
fn closed_form(a: f64, z: f64) -> Option<f64> {
    if (a - 2.0).abs() < 1e-12 {
        Some(1.0 / (1.0 + z.exp()))
    } else if a > 2.0 {
        Some(1.0 / (1.0 + ((a / 2.0).sqrt() * z).exp()))
    } else {
        None
    }
}

/// Writes the requested plot data to `out` and returns the row count.
pub fn emit_plot_data(manifest_path: &Path, kind: PlotKind, out: &Path) -> Result<usize> {
    let m = Manifest::load(manifest_path)?;
    let dir = manifest_path.parent().unwrap_or(Path::new("."));
    let missing = |k: &str| anyhow!("manifest has no {k} artifact (task was {})", m.task);
    let mut rows: Vec<Vec<String>> = Vec::new();
    match kind {
        PlotKind::DriftVsLogt => {
            let summary = m.find("drift").next().ok_or_else(|| missing("drift"))?;
            let (h, fits) = read_rows(&dir.join(&summary.path))?;
            let (ia, ir, ix) = (column(&h, "a")?, column(&h, "r_fit")?, column(&h, "X")?);
            let traces: Vec<&Artifact> = m.find("trace").collect();
            if traces.is_empty() {
                return Err(missing("trace"));
            }
            for tr in traces {
                let a = label_a(tr)?;
                let fit = fits
                    .iter()
                    .find(|r| parse(r, ia).is_ok_and(|v| v == a))
                    .ok_or_else(|| anyhow!("no fit for a = {a}"))?;
                let (r, x0) = (parse(fit, ir)?, parse(fit, ix)?);
                let (th, entries) = read_rows(&dir.join(&tr.path))?;
                let (it, im) = (column(&th, "t")?, column(&th, "m")?);
                for e in &entries {
                    let t = parse(e, it)?;
                    if t < 1.0 {
                        continue;
                    }
                    let lt = t.ln();
                    rows.push(vec![num(a), num(lt), num(parse(e, im)?), num(r * lt + x0)]);
                }
            }
            write_csv(out, &["a", "ln_t", "m", "fitted_line"], rows.iter().cloned())?;
        }
        PlotKind::ProfileOverlay => {
            let profiles: Vec<&Artifact> = m.find("profile").collect();
            if profiles.is_empty() {
                return Err(missing("profile"));
            }
            for p in profiles {
                let a = label_a(p)?;
                let (h, recs) = read_rows(&dir.join(&p.path))?;
                let (iz, iu) = (column(&h, "z")?, column(&h, "U")?);
                for rec in &recs {
                    let z = parse(rec, iz)?;
                    if let Some(u) = closed_form(a, z) {
                        rows.push(vec![num(a), num(z), rec[iu].to_string(), num(u)]);
                    }
                }
            }
            if rows.is_empty() {
                bail!("no profile in the manifest has a closed form (need a >= 2)");
            }
            write_csv(out, &["a", "z", "U_numeric", "U_closed_form"], rows.iter().cloned())?;
        }
        PlotKind::ResidualHeatmap => {
            let art = m.find("residuals").next().ok_or_else(|| missing("residuals"))?;
            let (h, recs) = read_rows(&dir.join(&art.path))?;
            let idx = ["t", "x", "residual", "margin"].map(|c| column(&h, c));
            let idx: Vec<usize> = idx.into_iter().collect::<Result<_>>()?;
            rows = recs.iter().map(|r| idx.iter().map(|&i| r[i].to_string()).collect()).collect();
            write_csv(out, &["t", "x", "residual", "margin"], rows.iter().cloned())?;
        }
    }
    Ok(rows.len())
}
