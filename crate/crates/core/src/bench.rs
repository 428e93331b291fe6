//! Initial conditions for the benchmark problems and diagnostics on computed
//! fields: interface radius, component counts and topology classification.

use std::collections::VecDeque;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::discretization::{Field, GridSpec};
use crate::energy::StepParams;
use crate::error::{Error, Result};
use crate::schemes::{step_scheme, NewtonConfig, SchemeId};

/// Radius of each disk in the two-circle benchmark.
pub const TWO_CIRCLE_RADIUS: f64 = 0.14;
/// Amplitude bound of the random nodal values before presmoothing.
pub const RANDOM_AMPLITUDE: f64 = 0.9;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case", deny_unknown_fields)]
pub enum IcKind {
    Circle { center: [f64; 2], radius: f64 },
    /// Two disks on the x-axis, `gap` apart at their closest points.
    TwoCircles { gap: f64, radius: f64 },
    /// Two wedges whose tips are joined by a neck of width `m`.
    Wedges { m: f64 },
    Random { seed: u64, presmooth_steps: usize, presmooth_k: f64 },
    /// Spatially constant field.
    Uniform { value: f64 },
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case", deny_unknown_fields)]
pub enum Profile {
    /// `tanh(d / (√2 eps))` of the signed distance `d`.
    Tanh { eps: f64 },
    /// The signed distance itself (level-set initial data).
    SignedDistance,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct InitialCondition {
    pub kind: IcKind,
    pub profile: Profile,
}

impl InitialCondition {
    pub fn new(kind: IcKind, profile: Profile) -> Self {
        Self { kind, profile }
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |msg: String| Err(Error::InvalidParameter(msg));
        match self.kind {
            IcKind::Circle { center, radius } => {
                if !(radius > 0.0) || !center.iter().all(|c| c.is_finite()) {
                    return bad(format!("circle needs radius > 0 and a finite center, got {radius}"));
                }
            }
            IcKind::TwoCircles { gap, radius } => {
                if !(gap >= 0.0) || !(radius > 0.0) {
                    return bad(format!("two circles need gap >= 0 and radius > 0, got {gap}, {radius}"));
                }
            }
            IcKind::Wedges { m } => {
                if !(m > 0.0 && m < 2.0 / 3.0) {
                    return bad(format!("wedge neck width must be in (0, 2/3), got {m}"));
                }
            }
            IcKind::Random { presmooth_steps, presmooth_k, .. } => {
                if presmooth_steps > 0 && !(presmooth_k > 0.0) {
                    return bad(format!("presmoothing step must be positive, got {presmooth_k}"));
                }
                if presmooth_steps > 0 && self.profile == Profile::SignedDistance {
                    return bad("presmoothing needs a tanh profile to fix eps".into());
                }
            }
            IcKind::Uniform { value } => {
                if !value.is_finite() {
                    return bad(format!("uniform value must be finite, got {value}"));
                }
            }
        }
        if let Profile::Tanh { eps } = self.profile {
            if !(eps > 0.0 && eps.is_finite()) {
                return bad(format!("profile eps must be positive, got {eps}"));
            }
        }
        Ok(())
    }

    /// Signed distance to the interface, positive in the `u = +1` phase.
    /// `None` for kinds without a geometric interface.
    pub fn signed_distance(&self, x: f64, y: f64) -> Option<f64> {
        match self.kind {
            IcKind::Circle { center, radius } => {
                Some(radius - (x - center[0]).hypot(y - center[1]))
            }
            IcKind::TwoCircles { gap, radius } => {
                let c = radius + 0.5 * gap;
                let d = (x - c).hypot(y).min((x + c).hypot(y));
                Some(radius - d)
            }
            IcKind::Wedges { m } => Some(-wedge_distance(m, x, y)),
            IcKind::Random { .. } | IcKind::Uniform { .. } => None,
        }
    }

    /// Errors when the geometry does not fit inside the box of `grid`.
    pub fn check_geometry(&self, grid: &GridSpec) -> Result<()> {
        let (x0, x1, y0, y1) = grid.bounds();
        let inside = |cx: f64, cy: f64, r: f64| {
            cx - r >= x0 - 1e-12 && cx + r <= x1 + 1e-12 && cy - r >= y0 - 1e-12 && cy + r <= y1 + 1e-12
        };
        let ok = match self.kind {
            IcKind::Circle { center, radius } => inside(center[0], center[1], radius),
            IcKind::TwoCircles { gap, radius } => {
                let c = radius + 0.5 * gap;
                inside(c, 0.0, radius) && inside(-c, 0.0, radius)
            }
            // the central ball of radius 1/3 bounds the wedges
            IcKind::Wedges { .. } => inside(0.0, 0.0, 1.0 / 3.0),
            IcKind::Random { .. } | IcKind::Uniform { .. } => true,
        };
        if ok {
            Ok(())
        } else {
            Err(Error::Geometry(format!("{:?} does not fit inside the grid box", self.kind)))
        }
    }
}

/// `max{-d1, d2, -d3}` with balls 1 and 3 centered at `(0, ±2/3)` of radius
/// `2/3 - m/2` and ball 2 at the origin of radius `1/3`.
fn wedge_distance(m: f64, x: f64, y: f64) -> f64 {
    let r_outer = 2.0 / 3.0 - 0.5 * m;
    let d1 = x.hypot(y - 2.0 / 3.0) - r_outer;
    let d2 = x.hypot(y) - 1.0 / 3.0;
    let d3 = x.hypot(y + 2.0 / 3.0) - r_outer;
    (-d1).max(d2).max(-d3)
}

/// Samples the initial condition on `grid`.
pub fn make_initial_condition(ic: &InitialCondition, grid: &GridSpec) -> Result<Field> {
    ic.validate()?;
    ic.check_geometry(grid)?;
    match (ic.kind, ic.profile) {
        (IcKind::Uniform { value }, _) => Ok(Field::constant(*grid, value)),
        (IcKind::Random { seed, presmooth_steps, presmooth_k }, profile) => {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let values = (0..grid.node_count())
                .map(|_| rng.gen_range(-RANDOM_AMPLITUDE..=RANDOM_AMPLITUDE))
                .collect();
            let mut u = Field::new(*grid, values)?;
            if presmooth_steps > 0 {
                let Profile::Tanh { eps } = profile else { unreachable!("checked in validate") };
                let p = StepParams::plain(eps, presmooth_k)?;
                let cfg = NewtonConfig::default();
                for _ in 0..presmooth_steps {
                    u = step_scheme(SchemeId::Fis, &u, &p, &cfg)?;
                }
            }
            Ok(u)
        }
        (_, Profile::Tanh { eps }) => {
            let scale = 1.0 / (std::f64::consts::SQRT_2 * eps);
            Field::from_fn(*grid, |x, y| (ic.signed_distance(x, y).unwrap_or(0.0) * scale).tanh())
        }
        (_, Profile::SignedDistance) => {
            Field::from_fn(*grid, |x, y| ic.signed_distance(x, y).unwrap_or(0.0))
        }
    }
}

fn bilinear(u: &Field, x: f64, y: f64) -> f64 {
    let g = u.grid();
    let (x0, _, y0, _) = g.bounds();
    let n = g.n();
    let h = g.h();
    let sx = ((x - x0) / h).clamp(0.0, n as f64);
    let sy = ((y - y0) / h).clamp(0.0, n as f64);
    let i = (sx.floor() as usize).min(n - 1);
    let j = (sy.floor() as usize).min(n - 1);
    let (tx, ty) = (sx - i as f64, sy - j as f64);
    let a = u.at(i, j) * (1.0 - tx) + u.at(i + 1, j) * tx;
    let b = u.at(i, j + 1) * (1.0 - tx) + u.at(i + 1, j + 1) * tx;
    a * (1.0 - ty) + b * ty
}

/// Interface radius: distance from the centroid of `{u > 0}` to the first
/// zero crossing along the `+x` direction, located by linear interpolation
/// of bilinearly sampled values.
pub fn measure_radius(u: &Field) -> Result<f64> {
    let g = *u.grid();
    let m = g.nodes_per_side();
    let (mut cx, mut cy, mut count) = (0.0, 0.0, 0usize);
    for j in 0..m {
        for i in 0..m {
            if u.at(i, j) > 0.0 {
                cx += g.x(i);
                cy += g.y(j);
                count += 1;
            }
        }
    }
    if count == 0 || count == g.node_count() {
        return Err(Error::VanishedInterface);
    }
    cx /= count as f64;
    cy /= count as f64;

    let (_, x_max, _, _) = g.bounds();
    let mut xs = vec![cx];
    xs.extend((0..m).map(|i| g.x(i)).filter(|&x| x > cx + 1e-12 * g.h()));
    if *xs.last().unwrap() < x_max {
        xs.push(x_max);
    }
    let mut prev = (xs[0], bilinear(u, xs[0], cy));
    for &x in &xs[1..] {
        let val = bilinear(u, x, cy);
        if (prev.1 > 0.0) != (val > 0.0) {
            let t = prev.1 / (prev.1 - val);
            return Ok(prev.0 + t * (x - prev.0) - cx);
        }
        prev = (x, val);
    }
    Err(Error::VanishedInterface)
}

/// Number of 4-connected components of the nodes with `u > threshold`.
pub fn count_components(u: &Field, threshold: f64) -> usize {
    let m = u.grid().nodes_per_side();
    let v = u.values();
    let mut seen = vec![false; v.len()];
    let mut queue = VecDeque::new();
    let mut components = 0;
    for start in 0..v.len() {
        if seen[start] || !(v[start] > threshold) {
            continue;
        }
        components += 1;
        seen[start] = true;
        queue.push_back(start);
        while let Some(idx) = queue.pop_front() {
            let (i, j) = (idx % m, idx / m);
            let mut visit = |nb: usize| {
                if !seen[nb] && v[nb] > threshold {
                    seen[nb] = true;
                    queue.push_back(nb);
                }
            };
            if i > 0 {
                visit(idx - 1);
            }
            if i + 1 < m {
                visit(idx + 1);
            }
            if j > 0 {
                visit(idx - m);
            }
            if j + 1 < m {
                visit(idx + m);
            }
        }
    }
    components
}

/// Components of `{u > 0}` when both signs occur, otherwise 0 (no interface).
pub fn interface_components(u: &Field) -> usize {
    let v = u.values();
    let any_pos = v.iter().any(|&x| x > 0.0);
    let any_nonpos = v.iter().any(|&x| x <= 0.0);
    if any_pos && any_nonpos {
        count_components(u, 0.0)
    } else {
        0
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum EventKind {
    Merge,
    Split,
    Vanish,
}

impl EventKind {
    pub fn as_str(&self) -> &'static str {
        match self {
            EventKind::Merge => "merge",
            EventKind::Split => "split",
            EventKind::Vanish => "vanish",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TopologyEvent {
    pub kind: EventKind,
    pub time: f64,
    /// Position in the count sequence.
    pub index: usize,
}

/// Overall outcome of a run.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Classification {
    Merge,
    Separate,
    Vanish,
}

impl Classification {
    pub fn as_str(&self) -> &'static str {
        match self {
            Classification::Merge => "merge",
            Classification::Separate => "separate",
            Classification::Vanish => "vanish",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TopologyTimeline {
    pub times: Vec<f64>,
    pub component_counts: Vec<usize>,
    pub events: Vec<TopologyEvent>,
}

impl TopologyTimeline {
    /// Event kinds in order of occurrence.
    pub fn event_kinds(&self) -> Vec<EventKind> {
        self.events.iter().map(|e| e.kind).collect()
    }

    pub fn peak_count(&self) -> usize {
        self.component_counts.iter().copied().max().unwrap_or(0)
    }

    /// `Vanish` when there is no interface at the first sample; otherwise
    /// `Separate` when the last nonzero count is at least two (the pieces
    /// disappear apart) and `Merge` when it is one (a single connected
    /// piece remains).
    pub fn classification(&self) -> Classification {
        match self.component_counts.first() {
            None | Some(0) => return Classification::Vanish,
            _ => {}
        }
        match self.component_counts.iter().rev().find(|&&c| c > 0) {
            Some(&c) if c >= 2 => Classification::Separate,
            _ => Classification::Merge,
        }
    }
}

/// Builds the event list from a count sequence.
///
/// A drop to a nonzero count is a merge, a rise is a split and reaching zero
/// is a vanish; nothing is recorded after a vanish.
pub fn classify_topology(times: &[f64], counts: &[usize]) -> Result<TopologyTimeline> {
    if times.len() != counts.len() {
        return Err(Error::LengthMismatch { len: counts.len(), expected: times.len() });
    }
    let mut events = Vec::new();
    for idx in 1..counts.len() {
        let (before, now) = (counts[idx - 1], counts[idx]);
        if before == 0 {
            break;
        }
        let kind = match now.cmp(&before) {
            _ if now == 0 => EventKind::Vanish,
            std::cmp::Ordering::Less => EventKind::Merge,
            std::cmp::Ordering::Greater => EventKind::Split,
            std::cmp::Ordering::Equal => continue,
        };
        events.push(TopologyEvent { kind, time: times[idx], index: idx });
        if kind == EventKind::Vanish {
            break;
        }
    }
    Ok(TopologyTimeline { times: times.to_vec(), component_counts: counts.to_vec(), events })
}
