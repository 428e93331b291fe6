//! End-to-end acceptance criteria. Prints one `[PASS]`/`[FAIL]` line per
//! criterion and exits nonzero when any fails.
//!
//! Optional arguments select criteria by number or by a substring of their
//! title, e.g. `cargo test -p mcflow-validation --test acceptance -- 2 wedges`.

use std::path::Path;
use std::process::ExitCode;
use std::time::Instant;

use mcflow::bench::{make_initial_condition, Classification, EventKind, IcKind, InitialCondition, Profile};
use mcflow::discretization::{
    apply_neumann_laplacian, lumped_inner_product, lumped_norm, prolongate,
};
use mcflow::energy::{energy_gradient, functional_value};
use mcflow::minimize::{minimize_functional, multilevel_step, MultilevelSchedule};
use mcflow::schemes::{run_evolution, scheme_residual, step_scheme, NewtonConfig, SchemeId};
use mcflow::{Field, Functional, GridSpec, StepParams};
use mcflow_cli::{execute, run_to_dir, RunConfig, RunOutcome};

struct Verdict {
    pass: bool,
    detail: String,
}

type Criterion = (u32, &'static str, fn() -> Verdict);

const CRITERIA: &[Criterion] = &[
    (1, "shrinking circle radius law, four schemes", shrinking_circle),
    (2, "penalized minimizer equals FIS at the reduced length", penalized_equivalence),
    (3, "distant circles separate under every method", distant_circles),
    (4, "close circles: interaction length decides the topology", close_circles),
    (5, "penalized minimization matches the level set on close circles", penalized_close_circles),
    (6, "wedges: interaction length decides the topology", wedges),
    (7, "multilevel step recovers the reference from a bad guess", multilevel_circle),
    (8, "multilevel evolution of close circles from a bad guess", multilevel_close_circles),
    (9, "property suite", property_suite),
    (10, "random initial data: penalized event order matches the level set", random_initial_data),
];

fn main() -> ExitCode {
    let filters: Vec<String> = std::env::args().skip(1).filter(|a| !a.starts_with('-')).collect();
    let selected = |n: u32, title: &str| {
        filters.is_empty() || filters.iter().any(|f| f == &n.to_string() || title.contains(f.as_str()))
    };
    let mut failed = Vec::new();
    let mut ran = 0;
    for &(n, title, check) in CRITERIA {
        if !selected(n, title) {
            continue;
        }
        ran += 1;
        let start = Instant::now();
        let verdict = check();
        let tag = if verdict.pass { "PASS" } else { "FAIL" };
        println!("[{tag}] criterion {n}: {title} ({:.1}s)", start.elapsed().as_secs_f64());
        for line in verdict.detail.lines() {
            println!("       {line}");
        }
        if !verdict.pass {
            failed.push(n);
        }
    }
    println!("acceptance: {} of {ran} criteria passed", ran - failed.len());
    if failed.is_empty() {
        ExitCode::SUCCESS
    } else {
        println!("failing criteria: {failed:?}");
        ExitCode::FAILURE
    }
}

// ---------------------------------------------------------------------------
// configuration helpers

const SIGNED_DISTANCE: &str = "[initial_condition.profile]\ntype = \"signed_distance\"\n";

fn tanh_profile(eps: f64) -> String {
    format!("[initial_condition.profile]\ntype = \"tanh\"\neps = {eps:?}\n")
}

fn two_circles(gap: f64) -> String {
    format!("[initial_condition.kind]\ntype = \"two_circles\"\ngap = {gap:?}\nradius = 0.14\n")
}

fn wedge_pair(m: f64) -> String {
    format!("[initial_condition.kind]\ntype = \"wedges\"\nm = {m:?}\n")
}

fn random_ic(seed: u64) -> String {
    format!(
        "[initial_condition.kind]\ntype = \"random\"\nseed = {seed}\npresmooth_steps = 50\npresmooth_k = 1e-5\n"
    )
}

#[derive(Clone, Copy)]
enum Method {
    LevelSet,
    Scheme(&'static str),
    Minimize(&'static str, f64),
}

impl Method {
    fn toml(self) -> String {
        match self {
            Method::LevelSet => "[method]\nkind = \"level_set\"\n".into(),
            Method::Scheme(s) => format!("[method]\nkind = \"scheme\"\nscheme = \"{s}\"\n"),
            Method::Minimize(f, delta) if delta > 0.0 => {
                format!("[method]\nkind = \"minimize\"\nfunctional = \"{f}\"\ndelta = {delta:?}\n")
            }
            Method::Minimize(f, _) => format!("[method]\nkind = \"minimize\"\nfunctional = \"{f}\"\n"),
        }
    }

    fn label(self) -> String {
        match self {
            Method::LevelSet => "level set".into(),
            Method::Scheme(s) => s.into(),
            Method::Minimize(f, d) if d > 0.0 => format!("{f} minimization, delta = {d}"),
            Method::Minimize(f, _) => format!("{f} minimization"),
        }
    }
}

struct Setup {
    method: Method,
    ic: String,
    /// `None` for the level set.
    eps: Option<f64>,
    /// Width of the tanh profile; defaults to `eps`, signed distance when
    /// neither is set.
    profile: Option<f64>,
    h: f64,
    k: f64,
    t_end: f64,
    interval: f64,
}

impl Setup {
    fn config(&self) -> RunConfig {
        let width = match self.method {
            Method::LevelSet => self.profile,
            _ => self.profile.or(self.eps),
        };
        let profile = width.map_or_else(|| SIGNED_DISTANCE.to_string(), tanh_profile);
        let eps_line = self.eps.map(|e| format!("eps = {e:?}\n")).unwrap_or_default();
        let text = format!(
            "{}\n{}\n{}\n[grid]\nh = {:?}\n\n[run]\n{eps_line}k = {:?}\nt_end = {:?}\ntopology_interval = {:?}\noutput_dir = \"unused\"\n",
            self.method.toml(),
            self.ic,
            profile,
            self.h,
            self.k,
            self.t_end,
            self.interval,
        );
        RunConfig::from_toml_str(&text).unwrap_or_else(|e| panic!("acceptance config rejected: {e}\n{text}"))
    }

    fn run(&self) -> Result<RunOutcome, String> {
        execute(&self.config()).map_err(|e| e.to_string())
    }
}

fn kinds(o: &RunOutcome) -> Vec<&'static str> {
    o.timeline.event_kinds().iter().map(|k| k.as_str()).collect()
}

/// Runs `setup` and compares its classification with `expected`.
fn expect_class(label: &str, setup: &Setup, expected: Classification, detail: &mut String) -> bool {
    let start = Instant::now();
    match setup.run() {
        Ok(o) => {
            let got = o.classification();
            detail.push_str(&format!(
                "{label} ({}, n = {}): {} [expected {}], events {:?}, peak {}, vanished at {:?}, {:.0}s\n",
                setup.method.label(),
                o.final_field.grid().n(),
                got.as_str(),
                expected.as_str(),
                kinds(&o),
                o.timeline.peak_count(),
                o.vanished_at,
                start.elapsed().as_secs_f64(),
            ));
            got == expected
        }
        Err(e) => {
            detail.push_str(&format!("{label} ({}): run failed: {e}\n", setup.method.label()));
            false
        }
    }
}

// ---------------------------------------------------------------------------
// criteria

fn shrinking_circle() -> Verdict {
    let (r0, eps, h, k, t_end) = (0.2, 0.01, 0.004, 1e-5, 0.015);
    let tol = 2.0 * h;
    let ic = format!("[initial_condition.kind]\ntype = \"circle\"\ncenter = [0.0, 0.0]\nradius = {r0:?}\n");
    let mut detail = String::new();
    let mut pass = true;
    let mut curves = Vec::new();
    for scheme in ["fis", "convex_splitting", "semi_implicit", "modified_cn"] {
        let setup = Setup {
            method: Method::Scheme(scheme),
            ic: ic.clone(),
            eps: Some(eps),
            profile: None,
            h,
            k,
            t_end,
            interval: 5e-4,
        };
        match setup.run() {
            Ok(o) => {
                let radii = o.radii.clone().unwrap_or_default();
                let worst = radii
                    .iter()
                    .map(|r| (r.radius - (r0 * r0 - 2.0 * r.time).sqrt()).abs())
                    .fold(0.0, f64::max);
                let covered = radii.last().map_or(0.0, |r| r.time);
                let ok = !radii.is_empty() && worst <= tol && covered >= t_end - 1e-12;
                pass &= ok;
                detail.push_str(&format!(
                    "{scheme}: {} radius samples to t = {covered:.4}, max deviation from sqrt(R0^2 - 2t) {worst:.2e} (limit {tol:.0e})\n",
                    radii.len()
                ));
                curves.push((scheme, radii));
            }
            Err(e) => {
                pass = false;
                detail.push_str(&format!("{scheme}: run failed: {e}\n"));
            }
        }
    }
    let mut pair_worst: f64 = 0.0;
    for a in 0..curves.len() {
        for b in a + 1..curves.len() {
            for (ra, rb) in curves[a].1.iter().zip(&curves[b].1) {
                assert!((ra.time - rb.time).abs() < 1e-9, "sampling times differ");
                pair_worst = pair_worst.max((ra.radius - rb.radius).abs());
            }
        }
    }
    pass &= curves.len() == 4 && pair_worst <= tol;
    detail.push_str(&format!("pairwise max radius difference {pair_worst:.2e} (limit {tol:.0e})\n"));
    // a convex splitting step is a FIS step of length k / (1 + k / eps²)
    if let Some((_, radii)) = curves.iter().find(|c| c.0 == "convex_splitting") {
        let slow = 1.0 / (1.0 + k / (eps * eps));
        let worst = radii
            .iter()
            .map(|r| (r.radius - (r0 * r0 - 2.0 * slow * r.time).sqrt()).abs())
            .fold(0.0, f64::max);
        detail.push_str(&format!(
            "(reference only) convex_splitting vs sqrt(R0^2 - 2t / (1 + k/eps^2)): max deviation {worst:.2e}"
        ));
    }
    Verdict { pass, detail }
}

fn penalized_equivalence() -> Verdict {
    let (eps, delta, k) = (0.02, 3.0, 5e-5);
    let eps_reduced = eps / (delta + 1.0_f64).sqrt();
    let grid = GridSpec::unit_box(32).unwrap();
    let penalized = StepParams::new(eps, k, delta, Functional::Penalized).unwrap();
    let fis = StepParams::plain(eps_reduced, k).unwrap();
    let mut pass = true;
    let mut detail = format!("eps' = {eps_reduced}, k = {k:e}, 33x33 nodes\n");
    for seed in 1..=5u64 {
        let ic = InitialCondition::new(
            IcKind::Random { seed, presmooth_steps: 0, presmooth_k: 1e-5 },
            Profile::Tanh { eps: 0.01 },
        );
        let prev = make_initial_condition(&ic, &grid).unwrap();
        let guess = prev.map(|v| -v).unwrap();
        let outcome = minimize_functional(Functional::Penalized, &guess, &prev, &penalized, 1e-10).and_then(|(u, _)| {
            let residual = lumped_norm(&scheme_residual(SchemeId::Fis, &u, &prev, &fis)?);
            let v = step_scheme(SchemeId::Fis, &prev, &fis, &NewtonConfig::with_tol(1e-10))?;
            let gap = lumped_norm(&Field::new(grid, u.values().iter().zip(v.values()).map(|(a, b)| a - b).collect()).unwrap());
            Ok((residual, gap))
        });
        match outcome {
            Ok((residual, gap)) => {
                pass &= residual <= 1e-7 && gap <= 1e-7;
                detail.push_str(&format!("seed {seed}: FIS residual {residual:.2e}, |u_min - u_fis| {gap:.2e} (limit 1e-7)\n"));
            }
            Err(e) => {
                pass = false;
                detail.push_str(&format!("seed {seed}: solve failed: {e}\n"));
            }
        }
    }
    Verdict { pass, detail: detail.trim_end().into() }
}

fn distant_circles() -> Verdict {
    let mut detail = String::new();
    let ls = Setup {
        method: Method::LevelSet,
        ic: two_circles(0.05),
        eps: None,
        profile: None,
        h: 0.01,
        k: 2.5e-5,
        t_end: 0.015,
        interval: 1e-4,
    };
    let mut pass = expect_class("d = 0.05", &ls, Classification::Separate, &mut detail);
    for method in [Method::Scheme("fis"), Method::Minimize("plain", 0.0)] {
        let setup = Setup { method, eps: Some(0.01), h: 0.008, k: 1e-4, ..ls_like(&ls) };
        pass &= expect_class("d = 0.05", &setup, Classification::Separate, &mut detail);
    }
    Verdict { pass, detail: detail.trim_end().into() }
}

fn ls_like(s: &Setup) -> Setup {
    Setup {
        method: s.method,
        ic: s.ic.clone(),
        eps: s.eps,
        profile: s.profile,
        h: s.h,
        k: s.k,
        t_end: s.t_end,
        interval: s.interval,
    }
}

fn close_circles() -> Verdict {
    let mut detail = String::new();
    let base = Setup {
        method: Method::LevelSet,
        ic: two_circles(0.02),
        eps: None,
        profile: None,
        h: 0.005,
        k: 2.5e-6,
        t_end: 0.015,
        interval: 1e-4,
    };
    let mut pass = expect_class("d = 0.02", &base, Classification::Separate, &mut detail);
    for method in [Method::Scheme("fis"), Method::Minimize("plain", 0.0)] {
        let coarse = Setup { method, eps: Some(0.01), k: 1e-4, ..ls_like(&base) };
        pass &= expect_class("d = 0.02, eps = 0.01", &coarse, Classification::Merge, &mut detail);
    }
    for method in [Method::Scheme("fis"), Method::Minimize("plain", 0.0)] {
        let fine = Setup { method, eps: Some(0.002), h: 0.0018, k: 4e-6, ..ls_like(&base) };
        pass &= expect_class("d = 0.02, eps = 0.002", &fine, Classification::Separate, &mut detail);
    }
    Verdict { pass, detail: detail.trim_end().into() }
}

fn penalized_close_circles() -> Verdict {
    let mut detail = String::new();
    let ls = Setup {
        method: Method::LevelSet,
        ic: two_circles(0.02),
        eps: None,
        profile: None,
        h: 0.005,
        k: 2.5e-6,
        t_end: 0.015,
        interval: 1e-4,
    };
    let mut pass = expect_class("d = 0.02", &ls, Classification::Separate, &mut detail);
    let pen = Setup { method: Method::Minimize("penalized", 4.0), eps: Some(0.01), k: 1e-4, ..ls_like(&ls) };
    pass &= expect_class("d = 0.02", &pen, Classification::Separate, &mut detail);
    Verdict { pass, detail: detail.trim_end().into() }
}

fn wedges() -> Verdict {
    // neck width 0.02; the 0.01 neck is reported below for reference only
    let neck = 0.02;
    let mut detail = String::new();
    let ls = Setup {
        method: Method::LevelSet,
        ic: wedge_pair(neck),
        eps: None,
        profile: None,
        h: 0.005,
        k: 6.25e-6,
        t_end: 0.06,
        interval: 1e-4,
    };
    let mut pass = expect_class("M = 0.02", &ls, Classification::Merge, &mut detail);
    for method in [Method::Scheme("fis"), Method::Minimize("plain", 0.0)] {
        let s = Setup { method, eps: Some(0.01), k: 1e-4, ..ls_like(&ls) };
        pass &= expect_class("M = 0.02, eps = 0.01", &s, Classification::Separate, &mut detail);
    }
    for method in [Method::Scheme("fis"), Method::Minimize("plain", 0.0)] {
        let s = Setup { method, eps: Some(0.0033), h: 0.0033, k: 1.11e-5, ..ls_like(&ls) };
        pass &= expect_class("M = 0.02, eps = 0.0033", &s, Classification::Merge, &mut detail);
    }
    let pen = Setup { method: Method::Minimize("penalized", 8.0), eps: Some(0.01), k: 1e-4, ..ls_like(&ls) };
    pass &= expect_class("M = 0.02, eps = 0.01", &pen, Classification::Merge, &mut detail);

    let mut info = String::new();
    let ls_narrow = Setup { ic: wedge_pair(0.01), ..ls_like(&ls) };
    expect_class("M = 0.01", &ls_narrow, Classification::Merge, &mut info);
    let fine_narrow = Setup {
        method: Method::Scheme("fis"),
        ic: wedge_pair(0.01),
        eps: Some(0.0033),
        profile: None,
        h: 0.0033,
        k: 1.11e-5,
        ..ls_like(&ls)
    };
    expect_class("M = 0.01, eps = 0.0033", &fine_narrow, Classification::Merge, &mut info);
    for line in info.lines() {
        detail.push_str(&format!("(reference only) {line}\n"));
    }
    Verdict { pass, detail: detail.trim_end().into() }
}

/// Value of `field` on the line `y = 0`, interpolated between node rows.
fn cross_section(field: &Field) -> Vec<f64> {
    let g = field.grid();
    let (_, _, y_min, _) = g.bounds();
    let s = (0.0 - y_min) / g.h();
    let j0 = (s.floor() as usize).min(g.n() - 1);
    let w = s - j0 as f64;
    let v = field.values();
    (0..=g.n())
        .map(|i| (1.0 - w) * v[g.index(i, j0)] + w * v[g.index(i, j0 + 1)])
        .collect()
}

fn max_diff(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y).abs()).fold(0.0, f64::max)
}

fn multilevel_circle() -> Verdict {
    let (eps, k, tol) = (0.005, 1e-3, 1e-8);
    let fine = GridSpec::unit_box(1).unwrap().with_spacing(1e-3).unwrap();
    let ic = InitialCondition::new(IcKind::Circle { center: [0.0, 0.0], radius: 0.25 }, Profile::Tanh { eps });
    // -1 inside the circle
    let u0 = make_initial_condition(&ic, &fine).unwrap().map(|v| -v).unwrap();
    let bad = u0.map(|v| 1.0 - v).unwrap();
    let p = StepParams::plain(eps, k).unwrap();
    let schedule = MultilevelSchedule::from_pairs(&[
        (0.12, 0.1),
        (0.07, 0.076),
        (0.035, 0.028),
        (0.018, 0.019),
        (0.009, 0.005),
        (0.001, 0.005),
    ])
    .unwrap();
    let solved = (|| -> mcflow::Result<_> {
        let (reference, _) = minimize_functional(Functional::Plain, &u0, &u0, &p, tol)?;
        let (single, _) = minimize_functional(Functional::Plain, &bad, &u0, &p, tol)?;
        let multi = multilevel_step(&u0, &bad, &schedule, &p, tol)?;
        Ok((reference, single, multi))
    })();
    match solved {
        Ok((reference, single, multi)) => {
            let r = cross_section(&reference);
            let dm = max_diff(&r, &cross_section(&multi));
            let ds = max_diff(&r, &cross_section(&single));
            let depth = r.iter().copied().fold(f64::INFINITY, f64::min);
            Verdict {
                pass: dm <= 1e-3 && ds >= 0.5,
                detail: format!(
                    "n = {}, one step to t = {k}; reference depth {depth:.4}\nmultilevel vs reference at y = 0: {dm:.2e} (limit 1e-3)\nsingle level vs reference at y = 0: {ds:.3} (must be >= 0.5)",
                    fine.n()
                ),
            }
        }
        Err(e) => Verdict { pass: false, detail: format!("solve failed: {e}") },
    }
}

fn multilevel_close_circles() -> Verdict {
    let levels = "levels = [[0.002, 0.0047], [0.001, 0.00335], [0.0005, 0.002]]";
    let config = |method: &str| {
        let text = format!(
            "{method}initial_guess = \"adversarial\"\n\n{}\n{}\n[grid]\nh = 0.0005\n\n[run]\neps = 0.002\nk = 1e-4\nt_end = 0.0015\ntopology_interval = 1e-4\noutput_dir = \"unused\"\n",
            two_circles(0.02),
            tanh_profile(0.002),
        );
        RunConfig::from_toml_str(&text).unwrap_or_else(|e| panic!("{e}\n{text}"))
    };
    let multi = config(&format!("[method]\nkind = \"multilevel\"\n{levels}\n"));
    let single = config("[method]\nkind = \"minimize\"\nfunctional = \"plain\"\n");
    let mut detail = String::new();
    let mut describe = |label: &str, cfg: &RunConfig| -> Option<Classification> {
        match execute(cfg) {
            Ok(o) => {
                let u = o.final_field.values();
                let (lo, hi) = u.iter().fold((f64::INFINITY, f64::NEG_INFINITY), |(a, b), &v| (a.min(v), b.max(v)));
                detail.push_str(&format!(
                    "{label}: {} with events {:?} (counts {:?}), final time {}, field range [{lo:.3}, {hi:.3}]\n",
                    o.classification().as_str(),
                    kinds(&o),
                    o.timeline.component_counts,
                    o.final_time,
                ));
                Some(o.classification())
            }
            Err(e) => {
                detail.push_str(&format!("{label}: run failed: {e}\n"));
                None
            }
        }
    };
    let m = describe("multilevel", &multi);
    let s = describe("single level", &single);
    let pass = m == Some(Classification::Separate) && s.is_some() && s != Some(Classification::Separate);
    Verdict { pass, detail: detail.trim_end().into() }
}

fn property_suite() -> Verdict {
    let mut checks: Vec<(&str, bool)> = Vec::new();
    let grid = GridSpec::unit_box(12).unwrap();
    let noise = |seed: u64, g: &GridSpec| {
        let ic = InitialCondition::new(
            IcKind::Random { seed, presmooth_steps: 0, presmooth_k: 1e-5 },
            Profile::Tanh { eps: 0.01 },
        );
        make_initial_condition(&ic, g).unwrap()
    };
    let axpy = |a: &Field, b: &Field, s: f64| {
        Field::new(*a.grid(), a.values().iter().zip(b.values()).map(|(x, y)| x + s * y).collect()).unwrap()
    };

    let mut gradient_ok = true;
    for functional in [Functional::Plain, Functional::Penalized, Functional::ScaledRemark] {
        let p = StepParams::new(0.05, 1e-2, 0.5, functional).unwrap();
        for seed in 0..4 {
            let (u, prev, dir) = (noise(seed, &grid), noise(seed + 100, &grid), noise(seed + 200, &grid));
            let analytic = lumped_inner_product(&energy_gradient(&u, &prev, &p).unwrap(), &dir).unwrap();
            let t = 1e-5;
            let fd = (functional_value(&axpy(&u, &dir, t), &prev, &p).unwrap()
                - functional_value(&axpy(&u, &dir, -t), &prev, &p).unwrap())
                / (2.0 * t);
            gradient_ok &= (fd - analytic).abs() <= 1e-6 * analytic.abs().max(1.0);
        }
    }
    checks.push(("gradient matches central differences (1e-6 relative)", gradient_ok));

    let circle = InitialCondition::new(IcKind::Circle { center: [0.0, 0.0], radius: 0.25 }, Profile::Tanh { eps: 0.04 });
    let g48 = GridSpec::unit_box(48).unwrap();
    let u0 = make_initial_condition(&circle, &g48).unwrap();
    let p = StepParams::plain(0.04, 1e-3).unwrap();
    let monotone = [SchemeId::Fis, SchemeId::ConvexSplitting].iter().all(|&id| {
        run_evolution(id, &u0, &p, 0.03, &NewtonConfig::default(), &[])
            .map(|r| r.energies.windows(2).all(|w| w[1] <= w[0] + 1e-10))
            .unwrap_or(false)
    });
    checks.push(("FIS and convex splitting energies never increase", monotone));

    let stationary = [Functional::Plain, Functional::Penalized, Functional::ScaledRemark].iter().all(|&f| {
        let p = StepParams::new(0.05, 1e-2, 0.5, f).unwrap();
        let prev = noise(7, &grid);
        minimize_functional(f, &noise(8, &grid), &prev, &p, 1e-9)
            .map(|(u, _)| lumped_norm(&energy_gradient(&u, &prev, &p).unwrap()) <= 1e-9)
            .unwrap_or(false)
    });
    checks.push(("minimizers carry a stationarity certificate", stationary));

    let laplacian_ok = (0..4).all(|seed| {
        let (u, v) = (noise(seed, &grid), noise(seed + 50, &grid));
        let uv = lumped_inner_product(&apply_neumann_laplacian(&u), &v).unwrap();
        let vu = lumped_inner_product(&u, &apply_neumann_laplacian(&v)).unwrap();
        (uv - vu).abs() <= 1e-10 && lumped_inner_product(&apply_neumann_laplacian(&u), &u).unwrap() <= 1e-10
    });
    checks.push(("discrete Laplacian is symmetric and negative semidefinite", laplacian_ok));

    let linear = |x: f64, y: f64| 0.3 - 1.7 * x + 0.9 * y;
    let exact = [(4, 9), (7, 20), (10, 37)].iter().all(|&(nc, nf)| {
        let coarse = Field::from_fn(GridSpec::unit_box(nc).unwrap(), linear).unwrap();
        let fine_grid = GridSpec::unit_box(nf).unwrap();
        let fine = prolongate(&coarse, &fine_grid).unwrap();
        fine.max_abs_diff(&Field::from_fn(fine_grid, linear).unwrap()).unwrap() <= 1e-12
    });
    checks.push(("prolongation reproduces linear functions", exact));

    checks.push(("rerun artifacts are byte-identical", rerun_identical()));

    let pass = checks.iter().all(|c| c.1);
    let detail = checks
        .iter()
        .map(|(name, ok)| format!("{}: {name}", if *ok { "ok" } else { "FAILED" }))
        .collect::<Vec<_>>()
        .join("\n");
    Verdict { pass, detail }
}

fn rerun_identical() -> bool {
    let setup = Setup {
        method: Method::Minimize("penalized", 2.0),
        ic: two_circles(0.05),
        eps: Some(0.04),
        profile: None,
        h: 1.0 / 32.0,
        k: 1e-3,
        t_end: 0.01,
        interval: 2e-3,
    };
    let mut cfg = setup.config();
    cfg.run.snapshot_times = vec![0.0, 0.005];
    let (a, b) = (tempfile::tempdir().unwrap(), tempfile::tempdir().unwrap());
    if run_to_dir(&cfg, a.path()).is_err() || run_to_dir(&cfg, b.path()).is_err() {
        return false;
    }
    let listing = |dir: &Path| {
        let mut names: Vec<_> = std::fs::read_dir(dir).unwrap().map(|e| e.unwrap().file_name()).collect();
        names.sort();
        names
    };
    let names = listing(a.path());
    names == listing(b.path())
        && names.iter().filter(|n| *n != "timing.json").all(|n| {
            std::fs::read(a.path().join(n)).unwrap() == std::fs::read(b.path().join(n)).unwrap()
        })
}

/// Event kinds with consecutive repeats collapsed.
fn event_order(o: &RunOutcome) -> Vec<EventKind> {
    let mut order = o.timeline.event_kinds();
    order.dedup();
    order
}

fn random_initial_data() -> Verdict {
    // seed chosen before any run
    let seed = 2021;
    let ic = random_ic(seed);
    let base = Setup {
        method: Method::LevelSet,
        ic,
        eps: Some(0.01),
        profile: Some(0.01),
        h: 0.005,
        k: 6.25e-6,
        t_end: 0.01,
        interval: 1e-4,
    };
    let runs = [
        base.method,
        Method::Minimize("penalized", 8.0),
        Method::Minimize("plain", 0.0),
    ]
    .map(|method| {
        let k = if matches!(method, Method::LevelSet) { 6.25e-6 } else { 5e-5 };
        Setup { method, k, ..ls_like(&base) }.run()
    });
    let mut detail = format!("seed {seed}, presmoothed 50 steps of k = 1e-5 at eps = 0.01\n");
    let mut orders = Vec::new();
    for (method, run) in ["level set", "penalized, delta = 8", "plain"].iter().zip(&runs) {
        match run {
            Ok(o) => {
                let order = event_order(o);
                detail.push_str(&format!(
                    "{method}: event order {:?} from events {:?}, counts {} -> {}\n",
                    order.iter().map(|k| k.as_str()).collect::<Vec<_>>(),
                    kinds(o),
                    o.timeline.component_counts.first().unwrap_or(&0),
                    o.timeline.component_counts.last().unwrap_or(&0),
                ));
                orders.push(Some(order));
            }
            Err(e) => {
                detail.push_str(&format!("{method}: run failed: {e}\n"));
                orders.push(None);
            }
        }
    }
    let pass = orders.iter().all(Option::is_some) && orders[0] == orders[1] && orders[2] != orders[0];
    Verdict { pass, detail: detail.trim_end().into() }
}
