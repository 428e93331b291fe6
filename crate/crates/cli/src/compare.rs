//! Side-by-side runs summarized in one table.

use std::collections::HashSet;
use std::path::Path;

use serde::Serialize;

use crate::config::RunConfig;
use crate::error::CliError;
use crate::output::{fmt_num, write_artifacts, write_csv, write_failure};
use crate::runner::{execute, RadiusRow, RunOutcome};

/// One line of `compare.csv`.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CompareRow {
    pub name: String,
    pub method: String,
    pub eps: Option<f64>,
    pub delta: f64,
    pub k: f64,
    /// `merge`, `separate`, `vanish` or `error`.
    pub classification: String,
    pub final_time: Option<f64>,
    pub peak_components: Option<usize>,
    /// `ok` or the failure message.
    pub status: String,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RadiusDeviation {
    pub run_a: String,
    pub run_b: String,
    pub max_deviation: f64,
    /// Number of common sample times compared.
    pub samples: usize,
}

#[derive(Debug, Clone)]
pub struct CompareReport {
    pub rows: Vec<CompareRow>,
    /// Present when every run succeeded and tracked a radius.
    pub deviations: Option<Vec<RadiusDeviation>>,
    pub outcomes: Vec<Result<RunOutcome, String>>,
}

fn same_time(a: f64, b: f64) -> bool {
    (a - b).abs() <= 1e-9 * a.abs().max(b.abs()).max(1e-3)
}

/// Largest radius difference over the sample times both curves share.
pub fn radius_deviation(a: &[RadiusRow], b: &[RadiusRow]) -> (f64, usize) {
    let mut worst = 0.0f64;
    let mut samples = 0;
    let mut j = 0;
    for ra in a {
        while j < b.len() && b[j].time < ra.time && !same_time(b[j].time, ra.time) {
            j += 1;
        }
        if j < b.len() && same_time(b[j].time, ra.time) {
            worst = worst.max((ra.radius - b[j].radius).abs());
            samples += 1;
        }
    }
    (worst, samples)
}

fn unique_names(configs: &[RunConfig]) -> Vec<String> {
    let mut seen = HashSet::new();
    configs
        .iter()
        .enumerate()
        .map(|(i, c)| {
            let base = c.display_name();
            if seen.insert(base.clone()) {
                base
            } else {
                format!("{base}_{i}")
            }
        })
        .collect()
}

fn row_for(name: &str, cfg: &RunConfig, outcome: &Result<RunOutcome, String>) -> CompareRow {
    let eps = match cfg.method {
        crate::config::MethodConfig::LevelSet => None,
        _ => cfg.run.eps,
    };
    let base = CompareRow {
        name: name.to_string(),
        method: cfg.method.label(),
        eps,
        delta: cfg.method.delta(),
        k: cfg.run.k,
        classification: "error".into(),
        final_time: None,
        peak_components: None,
        status: String::new(),
    };
    match outcome {
        Ok(o) => CompareRow {
            classification: o.classification().as_str().into(),
            final_time: Some(o.final_time),
            peak_components: Some(o.timeline.peak_count()),
            status: "ok".into(),
            ..base
        },
        Err(msg) => CompareRow { status: format!("failed: {msg}"), ..base },
    }
}

/// Runs every configuration into `out_root/<name>` and writes
/// `compare.csv` (and `radius_deviation.csv` when applicable) to `out_root`.
///
/// A failing run does not stop the others; its row carries the failure.
pub fn compare(configs: &[RunConfig], out_root: &Path) -> Result<CompareReport, CliError> {
    if configs.len() < 2 {
        return Err(CliError::Config("compare needs at least two configurations".into()));
    }
    let names = unique_names(configs);
    let mut outcomes = Vec::with_capacity(configs.len());
    for (name, cfg) in names.iter().zip(configs) {
        let dir = out_root.join(name);
        let outcome = match execute(cfg) {
            Ok(o) => {
                write_artifacts(&o, &dir)?;
                Ok(o)
            }
            Err(e) => {
                log::error!("{name}: {e}");
                write_failure(&dir, &e)?;
                Err(e.to_string())
            }
        };
        outcomes.push(outcome);
    }

    let rows: Vec<CompareRow> =
        names.iter().zip(configs).zip(&outcomes).map(|((n, c), o)| row_for(n, c, o)).collect();
    let opt = |v: Option<String>| v.unwrap_or_default();
    write_csv(
        &out_root.join("compare.csv"),
        &["name", "method", "eps", "delta", "k", "classification", "final_time", "peak_components", "status"],
        rows.iter().map(|r| {
            vec![
                r.name.clone(),
                r.method.clone(),
                opt(r.eps.map(fmt_num)),
                fmt_num(r.delta),
                fmt_num(r.k),
                r.classification.clone(),
                opt(r.final_time.map(fmt_num)),
                opt(r.peak_components.map(|c| c.to_string())),
                r.status.clone(),
            ]
        }),
    )?;

    let radii: Option<Vec<&Vec<RadiusRow>>> =
        outcomes.iter().map(|o| o.as_ref().ok().and_then(|o| o.radii.as_ref())).collect();
    let deviations = radii.map(|radii| {
        let mut out = Vec::new();
        for a in 0..radii.len() {
            for b in a + 1..radii.len() {
                let (max_deviation, samples) = radius_deviation(radii[a], radii[b]);
                out.push(RadiusDeviation {
                    run_a: names[a].clone(),
                    run_b: names[b].clone(),
                    max_deviation,
                    samples,
                });
            }
        }
        out
    });
    if let Some(devs) = &deviations {
        write_csv(
            &out_root.join("radius_deviation.csv"),
            &["run_a", "run_b", "max_deviation", "samples"],
            devs.iter().map(|d| {
                vec![d.run_a.clone(), d.run_b.clone(), fmt_num(d.max_deviation), d.samples.to_string()]
            }),
        )?;
    }
    Ok(CompareReport { rows, deviations, outcomes })
}
