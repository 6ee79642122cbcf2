//! Symmetric shooting from the axis of the primaries.
//!
//! A shot starts at `q = (s, 0)` with velocity perpendicular to the axis,
//! which on the axis means `p1 = 0`. Such a state is fixed by the reversing
//! reflection `rho(q1, q2, p1, p2) = (q1, -q2, -p1, p2)`, so its orbit
//! satisfies `x(-t) = rho(x(t))`: if it runs into `O` at time `t*`, it also
//! came out of `O` at `-t*`, and the arc between is a consecutive collision
//! orbit.
//!
//! Collisions are detected through the miss function `m = a x b` (the
//! chart-invariant cross product, equal to `p1 q2 - p2 q1`) evaluated at the
//! `k`-th close pericenter. It changes sign across a collision, so roots can
//! be bracketed on a grid in `s` and bisected.

use nalgebra::Vector2;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::dynamics::{hamiltonian, hill_component_interval, EnergyLevel, HillInterval, PhaseState};
use crate::error::{Error, Result};
use crate::integrator::{
    integrate_until, step_roots, EventDirection, FlowModel, Frame, Initial, IntegrationSettings, Step, TrajPoint,
    Trajectory,
};
use crate::regularization::{Chart, MoserChartPoint, RegularizedLevel};

/// Sign in front of the square root in `p2`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Branch {
    Plus,
    Minus,
}

impl Branch {
    pub fn sign(self) -> f64 {
        match self {
            Branch::Plus => 1.0,
            Branch::Minus => -1.0,
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            Branch::Plus => "plus",
            Branch::Minus => "minus",
        }
    }
}

/// Which side of `O` the shot starts on.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Side {
    /// `s < 0`, away from `E`.
    Negative,
    /// `s > 0`, towards `E`.
    Positive,
}

impl Side {
    pub fn of(s: f64) -> Self {
        if s < 0.0 {
            Side::Negative
        } else {
            Side::Positive
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            Side::Negative => "negative",
            Side::Positive => "positive",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ShotSpec {
    pub s: f64,
    pub branch: Branch,
    pub level: RegularizedLevel,
}

impl ShotSpec {
    pub fn new(s: f64, branch: Branch, level: RegularizedLevel) -> Self {
        Self { s, branch, level }
    }

    pub fn side(&self) -> Side {
        Side::of(self.s)
    }

    fn with_s(&self, s: f64) -> Self {
        Self { s, ..*self }
    }
}

/// `(s - mu)^2 + 2 (c + (1 - mu)/|s| + mu/|s - 1|)`, which is `2 (c - U(s, 0))`.
pub fn axis_discriminant(s: f64, level: &RegularizedLevel) -> f64 {
    let mu = level.params.mu();
    let c = level.jacobi();
    let mut grav = level.params.mass_o() / s.abs();
    if mu > 0.0 {
        grav += mu / (s - 1.0).abs();
    }
    (s - mu) * (s - mu) + 2.0 * (c + grav)
}

/// The Hill interval when the level is below the first critical value, and
/// `None` above it (forced runs).
pub fn hill_interval_if_bounded(level: &RegularizedLevel) -> Result<Option<HillInterval>> {
    let energy = EnergyLevel::from_jacobi(level.jacobi(), &level.params)?;
    match hill_component_interval(&level.params, &energy) {
        Ok(h) => Ok(Some(h)),
        Err(Error::AboveCritical { .. }) => Ok(None),
        Err(e) => Err(e),
    }
}

fn axis_state_unchecked(spec: &ShotSpec) -> Result<PhaseState> {
    let s = spec.s;
    let d = axis_discriminant(s, &spec.level);
    if !(d >= 0.0) {
        return Err(Error::Forbidden { s, discriminant: d });
    }
    let p2 = (s - spec.level.params.mu()) + spec.branch.sign() * d.sqrt();
    Ok(PhaseState::new(s, 0.0, 0.0, p2))
}

/// The shot `((s, 0), (0, p2))` on the level of `spec`. When the level is
/// below the first critical value, `s` must lie in the Hill interval around
/// `O`.
pub fn axis_initial_state(spec: &ShotSpec) -> Result<PhaseState> {
    if let Some(hill) = hill_interval_if_bounded(&spec.level)? {
        if !hill.contains(spec.s) {
            return Err(Error::OutsideHill {
                s: spec.s,
                lo: hill.s_min,
                hi: hill.s_max,
            });
        }
    }
    let st = axis_state_unchecked(spec)?;
    hamiltonian(&st, &spec.level.params)?;
    Ok(st)
}

/// Tunables of the search.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ShootingOptions {
    /// Pericenters farther than this from `O` are ignored.
    pub r_near: f64,
    /// Pericenter indices `1..=k_max` each define a miss function.
    pub k_max: usize,
    /// Grid points with `|m|` below this and no sign change are flagged.
    pub grazing_tol: f64,
    /// Bisection stops once the `s`-interval is this narrow.
    pub s_tol: f64,
    /// Required pericenter distance of a refined shot.
    pub r_collision: f64,
    /// Earlier pericenters closer than this disqualify a chord.
    pub r_intermediate: f64,
}

impl Default for ShootingOptions {
    fn default() -> Self {
        Self {
            r_near: 0.2,
            k_max: 3,
            grazing_tol: 1e-6,
            s_tol: 1e-13,
            r_collision: 1e-9,
            r_intermediate: 1e-6,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MissSample {
    pub s: f64,
    pub branch: Branch,
    /// Pericenter index `k >= 1`.
    pub k: usize,
    pub m: f64,
    pub r_peri: f64,
    /// Regularized time of the pericenter.
    pub t_peri: f64,
    /// Physical time of the pericenter.
    pub t_phys_peri: f64,
    pub valid: bool,
}

impl MissSample {
    fn invalid(s: f64, branch: Branch, k: usize) -> Self {
        Self {
            s,
            branch,
            k,
            m: f64::NAN,
            r_peri: f64::NAN,
            t_peri: f64::NAN,
            t_phys_peri: f64::NAN,
            valid: false,
        }
    }
}

/// A located close pericenter.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Pericenter {
    pub point: TrajPoint,
    pub r: f64,
    pub m: f64,
}

/// A function with the sign of `d/dt |q|^2` that is smooth through the
/// collision fiber. In the South chart `|q|^2 = |a|^4 |b|^2`; dividing its
/// derivative by `2 |a|^2` leaves a simple zero at the collision.
fn pericenter_rate(model: &FlowModel, p: &TrajPoint) -> f64 {
    let Ok(d) = model.rhs(p.frame, &p.y) else {
        return f64::NAN;
    };
    let y = &p.y;
    let a_dot_da = y[0] * d[0] + y[1] * d[1];
    let b_dot_db = y[2] * d[2] + y[3] * d[3];
    match p.frame {
        Frame::North => b_dot_db,
        Frame::South => {
            let a2 = y[0] * y[0] + y[1] * y[1];
            let b2 = y[2] * y[2] + y[3] * y[3];
            2.0 * a_dot_da * b2 + a2 * b_dot_db
        }
        Frame::Physical => y[0] * d[0] + y[1] * d[1],
    }
}

/// `d/dt |a_S|^2 / 2`, defined on South-chart steps only.
fn collision_rate(model: &FlowModel, p: &TrajPoint) -> f64 {
    if p.frame != Frame::South {
        return f64::NAN;
    }
    match model.rhs(p.frame, &p.y) {
        Ok(d) => p.y[0] * d[0] + p.y[1] * d[1],
        Err(_) => f64::NAN,
    }
}

/// Passages through the collision fiber: minima of `|a_S|` below `tol`.
pub fn collision_passages(traj: &Trajectory, tol: f64) -> Vec<TrajPoint> {
    let model = traj.model();
    crate::integrator::locate_event(traj, |p| collision_rate(model, p), EventDirection::Rising)
        .into_iter()
        .filter(|p| p.chart_point().is_some_and(|c| c.south_base_norm() < tol))
        .collect()
}

fn pericenter_at(p: TrajPoint) -> Option<Pericenter> {
    let pt = p.chart_point()?;
    Some(Pericenter {
        point: p,
        r: pt.radius(),
        m: pt.cross(),
    })
}

/// Integrates the regularized flow from `initial` until `count` close
/// pericenters are found (plus `extra_steps` further steps) or `t_max`.
pub fn close_pericenters(
    model: &FlowModel,
    initial: &Initial,
    settings: &IntegrationSettings,
    r_near: f64,
    count: usize,
    extra_steps: usize,
) -> Result<(Trajectory, Vec<Pericenter>)> {
    let mut found: Vec<Pericenter> = Vec::new();
    let mut after = 0usize;
    let g = |p: &TrajPoint| pericenter_rate(model, p);
    let traj = integrate_until(model, initial, settings, |step: &Step| {
        if found.len() >= count {
            after += 1;
            return after >= extra_steps;
        }
        for root in step_roots(step, &g, EventDirection::Rising, settings.event_tol) {
            if let Some(pc) = pericenter_at(root) {
                if pc.r < r_near && found.len() < count {
                    found.push(pc);
                }
            }
        }
        found.len() >= count && extra_steps == 0
    })?;
    Ok((traj, found))
}

fn shot_model(spec: &ShotSpec) -> FlowModel {
    FlowModel::regularized(spec.level)
}

/// Miss samples for pericenter indices `1..=opts.k_max` from one integration.
pub fn miss_samples(
    spec: &ShotSpec,
    opts: &ShootingOptions,
    settings: &IntegrationSettings,
) -> Result<Vec<MissSample>> {
    let st = axis_initial_state(spec)?;
    miss_samples_from(spec, &st, opts.k_max, opts, settings)
}

fn miss_samples_from(
    spec: &ShotSpec,
    st: &PhaseState,
    k_max: usize,
    opts: &ShootingOptions,
    settings: &IntegrationSettings,
) -> Result<Vec<MissSample>> {
    let model = shot_model(spec);
    let (_, found) = close_pericenters(&model, &Initial::Physical(*st), settings, opts.r_near, k_max, 0)?;
    Ok((1..=k_max)
        .map(|k| match found.get(k - 1) {
            Some(pc) => MissSample {
                s: spec.s,
                branch: spec.branch,
                k,
                m: pc.m,
                r_peri: pc.r,
                t_peri: pc.point.t,
                t_phys_peri: pc.point.t_phys(),
                valid: true,
            },
            None => MissSample::invalid(spec.s, spec.branch, k),
        })
        .collect())
}

/// Miss value at the first close pericenter with the default `r_near`.
pub fn miss_function(spec: &ShotSpec, settings: &IntegrationSettings) -> Result<MissSample> {
    let opts = ShootingOptions {
        k_max: 1,
        ..Default::default()
    };
    Ok(miss_samples(spec, &opts, settings)?.remove(0))
}

fn miss_at(spec: &ShotSpec, k: usize, opts: &ShootingOptions, settings: &IntegrationSettings) -> Result<MissSample> {
    let st = axis_state_unchecked(spec)?;
    Ok(miss_samples_from(spec, &st, k, opts, settings)?.remove(k - 1))
}

/// A candidate root of one miss function.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub enum Bracket {
    /// Consecutive grid points with opposite signs of `m`.
    SignChange { k: usize, lo: MissSample, hi: MissSample },
    /// A grid point with small `|m|` that is a local minimum of `|m|`
    /// without a sign change.
    Grazing { k: usize, at: MissSample },
}

impl Bracket {
    pub fn k(&self) -> usize {
        match self {
            Bracket::SignChange { k, .. } | Bracket::Grazing { k, .. } => *k,
        }
    }

    pub fn s_range(&self) -> (f64, f64) {
        match self {
            Bracket::SignChange { lo, hi, .. } => (lo.s, hi.s),
            Bracket::Grazing { at, .. } => (at.s, at.s),
        }
    }
}

/// The uniform grid of `n` points on `[lo, hi]`.
pub fn scan_grid(range: (f64, f64), n: usize) -> Vec<f64> {
    let (lo, hi) = range;
    (0..n)
        .map(|i| {
            if i + 1 == n {
                hi
            } else {
                lo + (hi - lo) * i as f64 / (n - 1) as f64
            }
        })
        .collect()
}

/// Miss samples on the uniform grid, one row per grid point. Shots that
/// cannot be started or integrated yield invalid samples.
pub fn scan_samples(
    range: (f64, f64),
    n: usize,
    branch: Branch,
    level: &RegularizedLevel,
    opts: &ShootingOptions,
    settings: &IntegrationSettings,
) -> Vec<Vec<MissSample>> {
    scan_grid(range, n)
        .into_par_iter()
        .map(|s| {
            let spec = ShotSpec::new(s, branch, *level);
            axis_state_unchecked(&spec)
                .and_then(|st| miss_samples_from(&spec, &st, opts.k_max, opts, settings))
                .unwrap_or_else(|_| (1..=opts.k_max).map(|k| MissSample::invalid(s, branch, k)).collect())
        })
        .collect()
}

/// Brackets of all miss functions `k = 1..=k_max` from precomputed grid rows.
pub fn brackets_from_samples(rows: &[Vec<MissSample>], opts: &ShootingOptions) -> Vec<Bracket> {
    let mut out = Vec::new();
    for k in 1..=opts.k_max {
        let col: Vec<MissSample> = rows.iter().map(|r| r[k - 1]).collect();
        for w in col.windows(2) {
            let (x, y) = (w[0], w[1]);
            if x.valid && y.valid && ((x.m < 0.0 && y.m >= 0.0) || (x.m > 0.0 && y.m <= 0.0)) {
                out.push(Bracket::SignChange { k, lo: x, hi: y });
            }
        }
        for i in 0..col.len() {
            let c = col[i];
            if !c.valid || !(c.m.abs() < opts.grazing_tol) || c.m == 0.0 {
                continue;
            }
            let left = i.checked_sub(1).map(|j| col[j]);
            let right = col.get(i + 1).copied();
            let same_sign_min = |n: Option<MissSample>| match n {
                None => true,
                Some(n) => !n.valid || (n.m.signum() == c.m.signum() && n.m.abs() >= c.m.abs()),
            };
            if same_sign_min(left) && same_sign_min(right) {
                out.push(Bracket::Grazing { k, at: c });
            }
        }
    }
    out.sort_by(|a, b| a.k().cmp(&b.k()).then(a.s_range().0.total_cmp(&b.s_range().0)));
    out
}

/// Sign-change brackets and grazing flags of the miss functions on a uniform
/// grid of `n >= 2` points.
pub fn scan_and_bracket(
    range: (f64, f64),
    n: usize,
    branch: Branch,
    level: &RegularizedLevel,
    opts: &ShootingOptions,
    settings: &IntegrationSettings,
) -> Vec<Bracket> {
    if n < 2 {
        return Vec::new();
    }
    let rows = scan_samples(range, n, branch, level, opts, settings);
    brackets_from_samples(&rows, opts)
}

/// A refined consecutive collision orbit from `O` to `O`.
#[derive(Debug, Clone, PartialEq)]
pub struct Chord {
    pub spec: ShotSpec,
    pub pericenter_index: usize,
    /// Bisection interval the refined `s` came from.
    pub s_interval: (f64, f64),
    /// Secant slope `dm/ds` near the root; a conditioning proxy.
    pub dm_ds: f64,
    pub r_peri: f64,
    pub tau_reeb: f64,
    pub action: f64,
    pub flight_time: f64,
    /// South-chart collision point the chord starts from.
    pub endpoint_start: MoserChartPoint,
    pub endpoint_end: MoserChartPoint,
    /// From the shot forward to the end collision.
    pub forward: Trajectory,
    /// From the shot backward to the start collision.
    pub backward: Trajectory,
    /// Regularized duration of each half.
    pub half_tau: f64,
    pub half_tau_backward: f64,
    pub symmetry_defect: f64,
    pub symmetric: bool,
    pub periodic_candidate: bool,
    pub kcheck_drift: f64,
}

/// Tolerance of the interior symmetry check.
pub const SYMMETRY_TOL: f64 = 1e-7;
/// Tolerance of the Legendrian membership of endpoints.
pub const ENDPOINT_TOL: f64 = 1e-8;
/// Tolerance on `|action - tau_reeb|`.
pub const ACTION_TOL: f64 = 1e-6;
/// Tolerance on the drift of `Kc` along a chord.
pub const KCHECK_TOL: f64 = 1e-9;
/// Closeness of start and end for the periodic flag.
pub const PERIODIC_TOL: f64 = 1e-8;

impl Chord {
    pub fn mu(&self) -> f64 {
        self.spec.level.params.mu()
    }

    pub fn jacobi(&self) -> f64 {
        self.spec.level.jacobi()
    }

    /// Checks the invariants every catalog entry must satisfy.
    pub fn check_invariants(&self) -> Result<()> {
        let level = &self.spec.level;
        for (name, pt) in [("start", &self.endpoint_start), ("end", &self.endpoint_end)] {
            if !crate::regularization::legendrian_membership(pt, level, ENDPOINT_TOL) {
                return Err(Error::Integrity(format!(
                    "{name} point is not on the Legendrian: {pt:?}"
                )));
            }
        }
        if !(self.kcheck_drift < KCHECK_TOL) {
            return Err(Error::Integrity(format!(
                "Kc drift {:e} along the chord",
                self.kcheck_drift
            )));
        }
        if !(self.symmetry_defect < SYMMETRY_TOL) {
            return Err(Error::Integrity(format!("symmetry defect {:e}", self.symmetry_defect)));
        }
        if !(self.tau_reeb > 0.0) {
            return Err(Error::Integrity(format!("non-positive Reeb period {}", self.tau_reeb)));
        }
        if !((self.action - self.tau_reeb).abs() < ACTION_TOL) {
            return Err(Error::Integrity(format!(
                "action {} differs from the Reeb period {}",
                self.action, self.tau_reeb
            )));
        }
        Ok(())
    }

    /// Physical positions along the whole chord, in time order from the start
    /// collision, sampled at `n` points per half.
    pub fn positions(&self, n: usize) -> Vec<Vector2<f64>> {
        let mut out = Vec::with_capacity(2 * n + 1);
        for i in (1..=n).rev() {
            let u = self.half_tau_backward * i as f64 / n as f64;
            out.push(
                self.backward
                    .at(u)
                    .map(|p| p.position())
                    .unwrap_or_else(|_| Vector2::zeros()),
            );
        }
        for i in 0..=n {
            let u = self.half_tau * i as f64 / n as f64;
            out.push(
                self.forward
                    .at(u)
                    .map(|p| p.position())
                    .unwrap_or_else(|_| Vector2::zeros()),
            );
        }
        out
    }
}

/// Collision passage nearest to `near` on the South-chart steps around it.
fn collision_near(model: &FlowModel, traj: &Trajectory, near: f64) -> Result<TrajPoint> {
    let idx = traj
        .step_index(near)
        .ok_or_else(|| Error::Integrity(format!("pericenter time {near} outside the trajectory")))?;
    let g = |p: &TrajPoint| collision_rate(model, p);
    let lo = idx.saturating_sub(1);
    let hi = (idx + 1).min(traj.steps().len() - 1);
    traj.steps()[lo..=hi]
        .iter()
        .flat_map(|s| step_roots(s, &g, EventDirection::Rising, traj.settings().event_tol))
        .min_by(|x, y| (x.t - near).abs().total_cmp(&(y.t - near).abs()))
        .ok_or_else(|| Error::Integrity(format!("no collision passage near t = {near}")))
}

struct Half {
    traj: Trajectory,
    end: TrajPoint,
    r_peri: f64,
}

fn chord_half(
    model: &FlowModel,
    st: &PhaseState,
    k: usize,
    opts: &ShootingOptions,
    settings: &IntegrationSettings,
) -> Result<Half> {
    let (traj, found) = close_pericenters(model, &Initial::Physical(*st), settings, opts.r_near, k, 2)?;
    if found.len() < k {
        return Err(Error::Integrity(format!("pericenter {k} not reached within t_max")));
    }
    for (i, pc) in found[..k - 1].iter().enumerate() {
        if pc.r < opts.r_intermediate {
            return Err(Error::IntermediateCollision { index: i + 1, r: pc.r });
        }
    }
    let target = found[k - 1];
    let end = collision_near(model, &traj, target.point.t)?;
    Ok(Half {
        traj,
        end,
        r_peri: target.r,
    })
}

fn south(p: &TrajPoint) -> Result<MoserChartPoint> {
    p.chart_point()
        .ok_or_else(|| Error::Integrity("regularized trajectory expected".into()))?
        .in_chart(Chart::South)
}

fn point_distance(x: &MoserChartPoint, y: &MoserChartPoint) -> f64 {
    (x.a - y.a).abs().max().max((x.b - y.b).abs().max())
}

/// Distance of `x` from `rho(y)`, compared in the chart where `x` has
/// `|a| <= 1`.
fn mirror_distance(x: &TrajPoint, y: &TrajPoint) -> Result<f64> {
    let x = x.chart_point().expect("chart").canonical();
    let y = y.chart_point().expect("chart").reflect().in_chart(x.chart)?;
    Ok(point_distance(&x, &y))
}

/// Largest deviation of `forward(u)` from `rho(backward(u))` on `n` interior
/// times.
fn halves_defect(forward: &Trajectory, backward: &Trajectory, t_end: f64, n: usize) -> Result<f64> {
    let mut worst: f64 = 0.0;
    for i in 1..=n {
        let u = t_end * i as f64 / (n + 1) as f64;
        worst = worst.max(mirror_distance(&forward.at(u)?, &backward.at(u)?)?);
    }
    Ok(worst)
}

/// Integrates the chord once more from its start collision over its full
/// duration `total` and measures `x(total - u)` against `rho(x(u))` on `n`
/// interior times, and the end against `endpoint_end`.
fn replay_defect(
    model: &FlowModel,
    start: &MoserChartPoint,
    end: &MoserChartPoint,
    total: f64,
    settings: &IntegrationSettings,
    n: usize,
) -> Result<f64> {
    let replay = crate::integrator::integrate(model, &Initial::Chart(*start), &settings.with_t_max(total))?;
    let mut worst = point_distance(&south(&replay.end())?, end);
    for i in 1..=n {
        let u = total * i as f64 / (n + 1) as f64;
        worst = worst.max(mirror_distance(&replay.at(total - u)?, &replay.at(u)?)?);
    }
    Ok(worst)
}

/// Refines a sign-change bracket of the `k`-th miss function to a chord.
pub fn refine_chord(
    bracket: &Bracket,
    opts: &ShootingOptions,
    settings: &IntegrationSettings,
    level: &RegularizedLevel,
) -> Result<Chord> {
    let (k, lo, hi) = match *bracket {
        Bracket::SignChange { k, lo, hi } => (k, lo, hi),
        Bracket::Grazing { at, .. } => return Err(Error::TangentialRoot { s: at.s, miss: at.m }),
    };
    let spec0 = ShotSpec::new(lo.s, lo.branch, *level);
    let (mut a, mut b) = (lo, hi);
    if a.s > b.s {
        std::mem::swap(&mut a, &mut b);
    }
    let mut dm_ds = (b.m - a.m) / (b.s - a.s);
    let mut slope_fixed = false;
    while b.s - a.s > opts.s_tol && a.m != 0.0 && b.m != 0.0 {
        let mid = 0.5 * (a.s + b.s);
        if mid <= a.s || mid >= b.s {
            break;
        }
        let m = miss_at(&spec0.with_s(mid), k, opts, settings)?;
        if !m.valid || !m.m.is_finite() {
            return Err(Error::Stagnation {
                lo: a.s,
                hi: b.s,
                reason: format!("pericenter {k} lost at s = {mid}"),
            });
        }
        if (m.m < 0.0) == (a.m < 0.0) && m.m != 0.0 {
            a = m;
        } else {
            b = m;
        }
        if !slope_fixed && b.s - a.s < 1e-6 {
            dm_ds = (b.m - a.m) / (b.s - a.s);
            slope_fixed = true;
        }
    }
    let best = if a.m.abs() <= b.m.abs() { a } else { b };
    if !(best.r_peri < opts.r_collision) {
        return Err(Error::Stagnation {
            lo: a.s,
            hi: b.s,
            reason: format!("pericenter distance {:e} after bisection", best.r_peri),
        });
    }

    chord_from_shot(&spec0.with_s(best.s), k, (a.s, b.s), dm_ds, opts, settings)
}

/// Builds the chord through the `k`-th pericenter of an already refined shot.
/// `s_interval` and `dm_ds` are carried into the result as provenance of the
/// refinement.
pub fn chord_from_shot(
    spec: &ShotSpec,
    k: usize,
    s_interval: (f64, f64),
    dm_ds: f64,
    opts: &ShootingOptions,
    settings: &IntegrationSettings,
) -> Result<Chord> {
    let spec = *spec;
    let level = &spec.level;
    let st = axis_state_unchecked(&spec)?;
    let model = shot_model(&spec);
    let fwd = chord_half(&model, &st, k, opts, settings)?;
    let bwd = chord_half(&model.reversed(), &st, k, opts, settings)?;

    let endpoint_end = south(&fwd.end)?;
    let endpoint_start = south(&bwd.end)?;
    let half_tau = fwd.end.t;
    let half_tau_backward = bwd.end.t;
    let tau_reeb = fwd.end.reeb_time() - bwd.end.reeb_time();
    let flight_time = 2.0 * fwd.end.t_phys();

    let defect_interior =
        halves_defect(&fwd.traj, &bwd.traj, half_tau.min(half_tau_backward), 100)?.max(replay_defect(
            &model,
            &endpoint_start,
            &endpoint_end,
            half_tau + half_tau_backward,
            settings,
            100,
        )?);
    let defect_ends = point_distance(&endpoint_end.reflect(), &endpoint_start)
        .max((half_tau - half_tau_backward).abs())
        .max((fwd.end.t_phys() + bwd.end.t_phys()).abs());
    let symmetry_defect = defect_interior.max(defect_ends);
    let kcheck_drift = fwd
        .traj
        .max_conserved_drift(level.target)
        .max(bwd.traj.max_conserved_drift(level.target));
    let periodic_candidate = (endpoint_end.b - endpoint_start.b).norm() < PERIODIC_TOL;

    let mut chord = Chord {
        spec,
        pericenter_index: k,
        s_interval,
        dm_ds,
        r_peri: fwd.r_peri.max(bwd.r_peri),
        tau_reeb,
        action: f64::NAN,
        flight_time,
        endpoint_start,
        endpoint_end,
        forward: fwd.traj,
        backward: bwd.traj,
        half_tau,
        half_tau_backward,
        symmetry_defect,
        symmetric: symmetry_defect < SYMMETRY_TOL,
        periodic_candidate,
        kcheck_drift,
    };
    chord.action = crate::diagnostics::chord_action(&chord)?;
    Ok(chord)
}

/// Collision-to-collision time of the radial orbits of the rotating Kepler
/// problem at Jacobi energy `c < 0`: the full radial period
/// `2 pi (-2c)^(-3/2)`.
pub fn kepler_oracle_return_time(c: f64) -> Result<f64> {
    if !(c < 0.0) {
        return Err(Error::InvalidParameter(format!(
            "Kepler return time needs c < 0, got {c}"
        )));
    }
    Ok(2.0 * std::f64::consts::PI * (-2.0 * c).powf(-1.5))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dynamics::SystemParams;
    use approx::assert_abs_diff_eq;

    fn kepler_level(c: f64) -> RegularizedLevel {
        RegularizedLevel::from_jacobi(SystemParams::new(0.0).unwrap(), c)
    }

    #[test]
    fn radial_shot_has_zero_momentum() {
        let st = axis_initial_state(&ShotSpec::new(0.5, Branch::Minus, kepler_level(-2.0))).unwrap();
        assert_eq!(st, PhaseState::new(0.5, 0.0, 0.0, 0.0));
    }

    #[test]
    fn shots_lie_on_the_level() {
        let level = RegularizedLevel::from_jacobi(SystemParams::new(0.1).unwrap(), -1.8);
        for &s in &[-0.6, -0.3, 0.2, 0.5] {
            for br in [Branch::Plus, Branch::Minus] {
                let st = axis_initial_state(&ShotSpec::new(s, br, level)).unwrap();
                let h = hamiltonian(&st, &level.params).unwrap();
                assert_abs_diff_eq!(h, -1.8, epsilon = 1e-12);
                assert_eq!(st.p.x + st.q.y, 0.0);
            }
        }
    }

    #[test]
    fn shots_are_refused_outside_the_lobe() {
        let level = RegularizedLevel::from_jacobi(SystemParams::new(0.1).unwrap(), -1.8);
        let r = axis_initial_state(&ShotSpec::new(0.95, Branch::Plus, level));
        assert!(matches!(r, Err(Error::OutsideHill { .. })), "{r:?}");
        // Above the critical value the interval check is skipped, but the
        // discriminant still applies.
        let r = axis_initial_state(&ShotSpec::new(1.8, Branch::Plus, kepler_level(-0.5)));
        assert!(r.is_ok());
        let above = RegularizedLevel::from_jacobi(SystemParams::new(0.1).unwrap(), -1.7);
        let r = axis_initial_state(&ShotSpec::new(-0.95, Branch::Plus, above));
        assert!(matches!(r, Err(Error::Forbidden { .. })), "{r:?}");
    }

    #[test]
    fn near_the_zero_velocity_curve_the_root_vanishes() {
        let level = RegularizedLevel::from_jacobi(SystemParams::new(0.1).unwrap(), -1.8);
        let hill = hill_interval_if_bounded(&level).unwrap().unwrap();
        let s = hill.s_max * (1.0 - 1e-9);
        let st = axis_initial_state(&ShotSpec::new(s, Branch::Plus, level)).unwrap();
        assert!((st.p.y - (s - 0.1)).abs() < 1e-3);
    }

    #[test]
    fn kepler_miss_is_minus_angular_momentum() {
        // For mu = 0 the inertial angular momentum s p2 is conserved and
        // m = p1 q2 - p2 q1 = -s p2 at every pericenter.
        let level = kepler_level(-2.0);
        let opts = ShootingOptions::default();
        let settings = IntegrationSettings::default();
        for &s in &[0.3, 0.45, 0.53] {
            let spec = ShotSpec::new(s, Branch::Minus, level);
            let st = axis_initial_state(&spec).unwrap();
            let rows = miss_samples(&spec, &opts, &settings).unwrap();
            for row in rows {
                assert!(row.valid, "{row:?}");
                assert_abs_diff_eq!(row.m, -s * st.p.y, epsilon = 1e-9);
            }
        }
        let lo = miss_function(&ShotSpec::new(0.45, Branch::Minus, level), &settings).unwrap();
        let hi = miss_function(&ShotSpec::new(0.53, Branch::Minus, level), &settings).unwrap();
        assert!(lo.m * hi.m < 0.0);
    }

    #[test]
    fn radial_shot_collides() {
        let spec = ShotSpec::new(0.5, Branch::Minus, kepler_level(-2.0));
        let m = miss_function(&spec, &IntegrationSettings::default()).unwrap();
        assert!(m.valid);
        assert!(m.m.abs() < 1e-9 && m.r_peri < 1e-9, "{m:?}");
        assert_abs_diff_eq!(m.t_phys_peri, std::f64::consts::PI / 8.0, epsilon = 1e-8);
    }

    #[test]
    fn backward_miss_matches_forward() {
        // The backward orbit is the mirror of the forward one and a x b is
        // invariant under the mirror.
        let level = RegularizedLevel::from_jacobi(SystemParams::new(0.1).unwrap(), -1.8);
        let settings = IntegrationSettings::default();
        for &(s, br) in &[(0.25, Branch::Minus), (-0.4, Branch::Plus), (0.4, Branch::Plus)] {
            let spec = ShotSpec::new(s, br, level);
            let st = axis_initial_state(&spec).unwrap();
            let model = FlowModel::regularized(level);
            let (_, f) = close_pericenters(&model, &Initial::Physical(st), &settings, 0.2, 1, 0).unwrap();
            let (_, b) = close_pericenters(&model.reversed(), &Initial::Physical(st), &settings, 0.2, 1, 0).unwrap();
            if let (Some(f), Some(b)) = (f.first(), b.first()) {
                assert_abs_diff_eq!(f.m, b.m, epsilon = 1e-8);
                assert_abs_diff_eq!(f.r, b.r, epsilon = 1e-8);
            }
        }
    }

    #[test]
    fn kepler_scan_has_one_bracket() {
        let level = kepler_level(-2.0);
        let opts = ShootingOptions {
            k_max: 1,
            ..Default::default()
        };
        let br = scan_and_bracket(
            (0.1, 0.53),
            50,
            Branch::Minus,
            &level,
            &opts,
            &IntegrationSettings::default(),
        );
        assert_eq!(br.len(), 1, "{br:?}");
        let (lo, hi) = br[0].s_range();
        assert!(lo < 0.5 && 0.5 < hi);
        assert!(scan_and_bracket(
            (0.1, 0.2),
            2,
            Branch::Minus,
            &level,
            &opts,
            &IntegrationSettings::default()
        )
        .is_empty());
    }

    #[test]
    fn kepler_chord() {
        let level = kepler_level(-2.0);
        let opts = ShootingOptions {
            k_max: 1,
            ..Default::default()
        };
        let settings = IntegrationSettings::default();
        let br = scan_and_bracket((0.1, 0.53), 50, Branch::Minus, &level, &opts, &settings);
        let chord = refine_chord(&br[0], &opts, &settings, &level).unwrap();
        assert_abs_diff_eq!(chord.spec.s, 0.5, epsilon = 1e-8);
        assert_abs_diff_eq!(
            chord.flight_time,
            kepler_oracle_return_time(-2.0).unwrap(),
            epsilon = 1e-8
        );
        assert!((chord.action - chord.tau_reeb).abs() < 1e-6);
        assert_abs_diff_eq!(chord.endpoint_end.b.norm(), 2.0, epsilon = 1e-7);
        chord.check_invariants().unwrap();
        assert!(chord.symmetric);
    }

    #[test]
    fn grazing_bracket_is_refused() {
        let at = MissSample {
            s: 0.3,
            branch: Branch::Plus,
            k: 1,
            m: 1e-8,
            r_peri: 1e-3,
            t_peri: 1.0,
            t_phys_peri: 1.0,
            valid: true,
        };
        let r = refine_chord(
            &Bracket::Grazing { k: 1, at },
            &ShootingOptions::default(),
            &IntegrationSettings::default(),
            &kepler_level(-2.0),
        );
        assert!(matches!(r, Err(Error::TangentialRoot { .. })));
    }

    #[test]
    fn oracle_return_times() {
        assert_abs_diff_eq!(
            kepler_oracle_return_time(-2.0).unwrap(),
            std::f64::consts::FRAC_PI_4,
            epsilon = 1e-15
        );
        assert_abs_diff_eq!(
            kepler_oracle_return_time(-0.5).unwrap(),
            2.0 * std::f64::consts::PI,
            epsilon = 1e-14
        );
        assert!(kepler_oracle_return_time(-1e8).unwrap() < 1e-11);
        assert!(kepler_oracle_return_time(0.0).is_err());
    }
}
