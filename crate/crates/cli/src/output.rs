//! Artifact writers. Numbers use `{:.10e}` (lowercase `e`, no locale).

use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};

use mcflow::Field;
use serde::Serialize;

use crate::error::CliError;
use crate::runner::RunOutcome;

pub fn fmt_num(v: f64) -> String {
    format!("{v:.10e}")
}

fn create(path: &Path) -> Result<csv::Writer<fs::File>, CliError> {
    let file = fs::File::create(path).map_err(|e| CliError::io(path, e))?;
    Ok(csv::Writer::from_writer(file))
}

fn csv_err(path: &Path, e: csv::Error) -> CliError {
    CliError::io(path, std::io::Error::other(e))
}

/// Writes rows of preformatted cells under `header`.
pub fn write_csv(path: &Path, header: &[&str], rows: impl IntoIterator<Item = Vec<String>>) -> Result<(), CliError> {
    let mut w = create(path)?;
    w.write_record(header).map_err(|e| csv_err(path, e))?;
    for row in rows {
        w.write_record(&row).map_err(|e| csv_err(path, e))?;
    }
    w.flush().map_err(|e| CliError::io(path, e))
}

pub fn write_text(path: &Path, text: &str) -> Result<(), CliError> {
    fs::write(path, text).map_err(|e| CliError::io(path, e))
}

pub fn write_json(path: &Path, value: &impl Serialize) -> Result<(), CliError> {
    let mut text = serde_json::to_string_pretty(value).expect("summaries always serialize");
    text.push('\n');
    write_text(path, &text)
}

/// 8-bit binary PGM with `u` mapped linearly from `[-1, 1]` to `[0, 255]`;
/// the first raster row is the top of the box.
pub fn pgm_bytes(u: &Field) -> Vec<u8> {
    let m = u.grid().nodes_per_side();
    let mut out = format!("P5\n{m} {m}\n255\n").into_bytes();
    out.reserve(m * m);
    for j in (0..m).rev() {
        for i in 0..m {
            let v = u.at(i, j).clamp(-1.0, 1.0);
            out.push(((v + 1.0) * 127.5).round() as u8);
        }
    }
    out
}

fn write_field_csv(path: &Path, u: &Field) -> Result<(), CliError> {
    let g = u.grid();
    let m = g.nodes_per_side();
    let rows = (0..m).flat_map(|j| (0..m).map(move |i| (i, j))).map(|(i, j)| {
        vec![fmt_num(g.x(i)), fmt_num(g.y(j)), fmt_num(u.at(i, j))]
    });
    write_csv(path, &["x", "y", "u"], rows)
}

/// Writes every artifact of a finished run into `dir`.
pub fn write_artifacts(outcome: &RunOutcome, dir: &Path) -> Result<(), CliError> {
    fs::create_dir_all(dir).map_err(|e| CliError::io(dir, e))?;
    write_text(&dir.join("config.toml"), &outcome.config.to_toml_string())?;

    if !outcome.energies.is_empty() {
        let rows = outcome
            .energies
            .iter()
            .map(|r| vec![r.step.to_string(), fmt_num(r.time), fmt_num(r.j_eps)]);
        write_csv(&dir.join("energy.csv"), &["step", "time", "J_eps"], rows)?;
    }

    let tl = &outcome.timeline;
    let rows = tl.times.iter().zip(&tl.component_counts).enumerate().map(|(idx, (t, c))| {
        let event = tl.events.iter().find(|e| e.index == idx).map_or("", |e| e.kind.as_str());
        vec![fmt_num(*t), c.to_string(), event.to_string()]
    });
    write_csv(&dir.join("topology.csv"), &["time", "component_count", "event"], rows)?;

    if let Some(radii) = &outcome.radii {
        let rows = radii.iter().map(|r| vec![fmt_num(r.time), fmt_num(r.radius)]);
        write_csv(&dir.join("radius.csv"), &["time", "radius"], rows)?;
    }

    let mut index = Vec::new();
    for (i, (time, field)) in outcome.snapshots.iter().enumerate() {
        let stem = format!("snapshot_{i:03}");
        let pgm = dir.join(format!("{stem}.pgm"));
        fs::File::create(&pgm)
            .and_then(|mut f| f.write_all(&pgm_bytes(field)))
            .map_err(|e| CliError::io(&pgm, e))?;
        write_field_csv(&dir.join(format!("{stem}.csv")), field)?;
        index.push(vec![i.to_string(), fmt_num(*time), format!("{stem}.pgm"), format!("{stem}.csv")]);
    }
    if !index.is_empty() {
        write_csv(&dir.join("snapshots.csv"), &["index", "time", "raster", "values"], index)?;
    }

    write_json(&dir.join("result.json"), &outcome.summary())?;
    write_json(&dir.join("timing.json"), &serde_json::json!({ "runtime_seconds": outcome.runtime_seconds }))?;
    Ok(())
}

/// Machine-readable description of a solver failure.
pub fn failure_report(err: &CliError) -> serde_json::Value {
    fn solver(e: &mcflow::Error) -> serde_json::Value {
        use mcflow::Error as E;
        let (kind, report) = match e {
            E::Stagnation(r) => ("stagnation", serde_json::to_value(r).ok()),
            E::MaxIterations(r) => ("max_iterations", serde_json::to_value(r).ok()),
            E::LinearSolve(r) => ("linear_solve", serde_json::to_value(r).ok()),
            E::NewtonDiverged { iterations, residual } | E::NewtonStalled { iterations, residual } => (
                if matches!(e, E::NewtonDiverged { .. }) { "newton_diverged" } else { "newton_stalled" },
                Some(serde_json::json!({ "iterations": iterations, "residual": residual })),
            ),
            E::Step { step, source } => {
                return serde_json::json!({ "kind": "step", "step": step, "source": solver(source) })
            }
            E::Level { level, source } => {
                return serde_json::json!({ "kind": "level", "level": level, "source": solver(source) })
            }
            _ => ("other", None),
        };
        serde_json::json!({ "kind": kind, "message": e.to_string(), "report": report })
    }
    match err {
        CliError::Solver(e) => serde_json::json!({ "error": err.to_string(), "solver": solver(e) }),
        other => serde_json::json!({ "error": other.to_string() }),
    }
}

pub fn write_failure(dir: &Path, err: &CliError) -> Result<PathBuf, CliError> {
    fs::create_dir_all(dir).map_err(|e| CliError::io(dir, e))?;
    let path = dir.join("failure.json");
    write_json(&path, &failure_report(err))?;
    Ok(path)
}
