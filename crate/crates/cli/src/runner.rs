//! Executes a [`RunConfig`] and collects the diagnostics written by `run`.

use std::ops::ControlFlow;
use std::time::Instant;

use mcflow::bench::{
    classify_topology, interface_components, make_initial_condition, measure_radius, Classification,
    IcKind, TopologyEvent, TopologyTimeline,
};
use mcflow::levelset::ls_run_with;
use mcflow::minimize::{MinimizationStepper, MultilevelStepper};
use mcflow::schemes::{evolve, NewtonConfig, SchemeStepper, SolveStats, Stepper};
use mcflow::Field;
use serde::Serialize;

use crate::config::{InitialGuess, MethodConfig, RunConfig};
use crate::error::CliError;

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct EnergyRow {
    pub step: usize,
    pub time: f64,
    pub j_eps: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct RadiusRow {
    pub time: f64,
    pub radius: f64,
}

/// Everything a finished run produced.
#[derive(Debug, Clone)]
pub struct RunOutcome {
    pub config: RunConfig,
    /// Empty for the level-set method.
    pub energies: Vec<EnergyRow>,
    pub timeline: TopologyTimeline,
    /// Present for single-circle initial conditions.
    pub radii: Option<Vec<RadiusRow>>,
    pub snapshots: Vec<(f64, Field)>,
    pub final_field: Field,
    pub final_time: f64,
    pub steps: usize,
    pub vanished_at: Option<f64>,
    pub solver: SolveStats,
    pub runtime_seconds: f64,
}

/// Deterministic part of a run's result, written as `result.json`.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RunSummary {
    pub name: String,
    pub method: String,
    pub eps: Option<f64>,
    pub delta: f64,
    pub k: f64,
    pub n: usize,
    pub h: f64,
    pub classification: Classification,
    pub events: Vec<TopologyEvent>,
    pub peak_components: usize,
    pub final_time: f64,
    pub steps: usize,
    pub vanished_at: Option<f64>,
    pub solver: SolveStats,
}

impl RunOutcome {
    pub fn classification(&self) -> Classification {
        self.timeline.classification()
    }

    pub fn summary(&self) -> RunSummary {
        let grid = self.final_field.grid();
        RunSummary {
            name: self.config.display_name(),
            method: self.config.method.label(),
            eps: match self.config.method {
                MethodConfig::LevelSet => None,
                _ => self.config.run.eps,
            },
            delta: self.config.method.delta(),
            k: self.config.run.k,
            n: grid.n(),
            h: grid.h(),
            classification: self.classification(),
            events: self.timeline.events.clone(),
            peak_components: self.timeline.peak_count(),
            final_time: self.final_time,
            steps: self.steps,
            vanished_at: self.vanished_at,
            solver: self.solver,
        }
    }
}

/// Samples component counts (and radii) along a run.
struct Monitor {
    every: usize,
    stop_on_vanish: bool,
    track_radius: bool,
    times: Vec<f64>,
    counts: Vec<usize>,
    radii: Vec<RadiusRow>,
    last_step: usize,
    last_time: f64,
    last_sampled: Option<usize>,
}

impl Monitor {
    fn new(cfg: &RunConfig) -> Self {
        let k = cfg.run.k;
        let every = cfg.run.topology_interval.map_or(1, |dt| ((dt / k).round() as usize).max(1));
        Self {
            every,
            stop_on_vanish: cfg.run.stop_on_vanish,
            track_radius: matches!(cfg.initial_condition.kind, IcKind::Circle { .. }),
            times: Vec::new(),
            counts: Vec::new(),
            radii: Vec::new(),
            last_step: 0,
            last_time: 0.0,
            last_sampled: None,
        }
    }

    fn sample(&mut self, step: usize, time: f64, u: &Field) -> usize {
        let count = interface_components(u);
        self.times.push(time);
        self.counts.push(count);
        if self.track_radius {
            if let Ok(r) = measure_radius(u) {
                self.radii.push(RadiusRow { time, radius: r });
            }
        }
        self.last_sampled = Some(step);
        count
    }

    fn observe(&mut self, step: usize, time: f64, u: &Field) -> ControlFlow<()> {
        self.last_step = step;
        self.last_time = time;
        if step.is_multiple_of(self.every) {
            let count = self.sample(step, time, u);
            if count == 0 && self.stop_on_vanish {
                return ControlFlow::Break(());
            }
        }
        ControlFlow::Continue(())
    }

    /// Makes sure the final state is part of the count sequence.
    fn finish(&mut self, u: &Field) {
        if self.last_sampled != Some(self.last_step) {
            self.sample(self.last_step, self.last_time, u);
        }
    }
}

fn stepper_for(cfg: &RunConfig, u0: &Field) -> Result<Box<dyn Stepper>, CliError> {
    let p = cfg.step_params()?;
    let guess = match cfg.initial_guess() {
        InitialGuess::Previous => None,
        InitialGuess::Adversarial => Some(u0.map(|v| 1.0 - v)?),
    };
    Ok(match &cfg.method {
        MethodConfig::Scheme { scheme } => {
            Box::new(SchemeStepper::new(*scheme, p, NewtonConfig::with_tol(cfg.run.tol)))
        }
        MethodConfig::Minimize { .. } => Box::new(MinimizationStepper::new(p, cfg.run.tol, guess)),
        MethodConfig::Multilevel { .. } => {
            let schedule = cfg.schedule()?.expect("multilevel method has a schedule");
            Box::new(MultilevelStepper::new(schedule, p, cfg.run.tol, guess))
        }
        MethodConfig::LevelSet => unreachable!("level-set runs have no phase-field stepper"),
    })
}

/// Runs the configuration in memory.
pub fn execute(cfg: &RunConfig) -> Result<RunOutcome, CliError> {
    cfg.validate()?;
    let start = Instant::now();
    let grid = cfg.grid_spec()?;
    let u0 = make_initial_condition(&cfg.initial_condition, &grid)?;
    let run = &cfg.run;
    let mut monitor = Monitor::new(cfg);
    log::info!(
        "{}: {} on n = {}, k = {:e}, t_end = {:e}",
        cfg.display_name(),
        cfg.method.label(),
        grid.n(),
        run.k,
        run.t_end
    );

    let (energies, snapshots, final_field, vanished_at, solver) = match &cfg.method {
        MethodConfig::LevelSet => {
            let result = ls_run_with(&u0, run.k, run.t_end, &run.snapshot_times, |s| {
                let step = (s.time / run.k).round() as usize;
                monitor.observe(step, s.time, &s.omega)
            })?;
            let snapshots = result.snapshots.into_iter().map(|s| (s.time, s.omega)).collect();
            let last = result.final_state.expect("runs always end in a state").omega;
            (Vec::new(), snapshots, last, result.vanished_at, SolveStats::default())
        }
        _ => {
            let eps = cfg.step_params()?.eps;
            let mut stepper = stepper_for(cfg, &u0)?;
            let mut energies = Vec::new();
            let record = evolve(stepper.as_mut(), &u0, eps, run.k, run.t_end, &run.snapshot_times, |v| {
                energies.push(EnergyRow { step: v.step, time: v.time, j_eps: v.energy });
                if v.step > 0 && v.step % 100 == 0 {
                    log::debug!("step {} t = {:e} J = {:e}", v.step, v.time, v.energy);
                }
                monitor.observe(v.step, v.time, v.field)
            })?;
            let last = record.final_field.expect("runs always end in a field");
            (energies, record.snapshots, last, record.vanished_at, stepper.stats())
        }
    };
    monitor.finish(&final_field);

    let timeline = classify_topology(&monitor.times, &monitor.counts)?;
    let vanished_at = vanished_at.or_else(|| {
        timeline.events.iter().find(|e| e.kind == mcflow::bench::EventKind::Vanish).map(|e| e.time)
    });
    let radii = monitor.track_radius.then_some(monitor.radii);
    let outcome = RunOutcome {
        config: cfg.clone(),
        energies,
        timeline,
        radii,
        snapshots,
        final_time: monitor.last_time,
        steps: monitor.last_step,
        final_field,
        vanished_at,
        solver,
        runtime_seconds: start.elapsed().as_secs_f64(),
    };
    log::info!(
        "{}: {} at t = {:e} after {:.1} s",
        cfg.display_name(),
        outcome.classification().as_str(),
        outcome.final_time,
        outcome.runtime_seconds
    );
    Ok(outcome)
}
