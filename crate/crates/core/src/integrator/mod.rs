//! Adaptive integration of the physical `H`-flow and the regularized
//! `Kc`-flow, with dense output and event location.
//!
//! The integrated state has six slots. The first four hold `(q, p)` for the
//! physical flow or `(a, b)` for the regularized flow. Slot 4 accumulates
//! physical time and slot 5 the Reeb time `∫ λ(X) dτ`, where
//! `λ = -b · da` is the Liouville form. For the physical flow slot 4 equals the
//! integration time and slot 5 stays zero.
//!
//! Regularized trajectories switch charts at step boundaries: a step begun in
//! a chart with `|a| > 1.25` is re-expressed in the other chart (where
//! `|a| < 0.8`).

mod csv;
mod dopri;
mod events;
mod trajectory;

pub use self::csv::{write_csv, AT_COLLISION_TOL};
pub use self::dopri::StateVec;
pub use self::events::{locate_event, step_roots, EventDirection};
pub use self::trajectory::{Step, TrajPoint, Trajectory};

use serde::{Deserialize, Serialize};

use self::dopri::{initial_step, trial_step, Controller, DIM};
use crate::dynamics::{hamiltonian, hamiltonian_vector_field, PhaseState, SystemParams};
use crate::error::{Error, Result};
use crate::regularization::{
    chart_transition, kcheck_value, physical_state, scaled_energy, Chart, MoserChartPoint, RegularizedLevel,
};

/// Chart switch threshold on `|a|`.
pub const CHART_SWITCH: f64 = 1.25;
/// Closest approach to `O` tolerated by the physical flow.
pub const PHYSICAL_MIN_RADIUS: f64 = 1e-6;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct IntegrationSettings {
    pub rel_tol: f64,
    pub abs_tol: f64,
    pub max_step: f64,
    /// Horizon in the integration variable (regularized time for the
    /// regularized flow).
    pub t_max: f64,
    pub event_tol: f64,
}

impl Default for IntegrationSettings {
    fn default() -> Self {
        Self {
            rel_tol: 1e-10,
            abs_tol: 1e-12,
            max_step: 0.5,
            t_max: 50.0,
            event_tol: 1e-12,
        }
    }
}

impl IntegrationSettings {
    pub fn with_t_max(mut self, t_max: f64) -> Self {
        self.t_max = t_max;
        self
    }

    pub fn with_tolerances(mut self, rel_tol: f64, abs_tol: f64) -> Self {
        self.rel_tol = rel_tol;
        self.abs_tol = abs_tol;
        self
    }

    pub fn validate(&self) -> Result<()> {
        let ok = self.rel_tol > 0.0
            && self.abs_tol > 0.0
            && self.max_step > 0.0
            && self.t_max > 0.0
            && self.event_tol > 0.0
            && self.t_max.is_finite();
        if ok {
            Ok(())
        } else {
            Err(Error::InvalidParameter(format!(
                "integration settings out of range: {self:?}"
            )))
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Frame {
    Physical,
    North,
    South,
}

impl Frame {
    pub fn chart(self) -> Option<Chart> {
        match self {
            Frame::Physical => None,
            Frame::North => Some(Chart::North),
            Frame::South => Some(Chart::South),
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            Frame::Physical => "physical",
            Frame::North => "north",
            Frame::South => "south",
        }
    }
}

impl From<Chart> for Frame {
    fn from(c: Chart) -> Self {
        match c {
            Chart::North => Frame::North,
            Chart::South => Frame::South,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Flow {
    Physical,
    Regularized,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Direction {
    Forward,
    Backward,
}

impl Direction {
    pub fn sign(self) -> f64 {
        match self {
            Direction::Forward => 1.0,
            Direction::Backward => -1.0,
        }
    }
}

/// The vector field being integrated, with everything needed to evaluate it.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FlowModel {
    pub flow: Flow,
    pub level: RegularizedLevel,
    pub direction: Direction,
}

impl FlowModel {
    pub fn physical(params: SystemParams, f: f64) -> Self {
        Self {
            flow: Flow::Physical,
            level: RegularizedLevel::new(params, f),
            direction: Direction::Forward,
        }
    }

    pub fn regularized(level: RegularizedLevel) -> Self {
        Self {
            flow: Flow::Regularized,
            level,
            direction: Direction::Forward,
        }
    }

    pub fn reversed(mut self) -> Self {
        self.direction = match self.direction {
            Direction::Forward => Direction::Backward,
            Direction::Backward => Direction::Forward,
        };
        self
    }

    pub fn params(&self) -> &SystemParams {
        &self.level.params
    }

    /// Time derivative of the six-slot state in `frame`, in the integration
    /// direction.
    pub fn rhs(&self, frame: Frame, y: &StateVec) -> Result<StateVec> {
        let sign = self.direction.sign();
        let mut out = [0.0; DIM];
        match frame {
            Frame::Physical => {
                let st = PhaseState::from_array(y);
                let v = hamiltonian_vector_field(&st, self.params())?;
                out[..4].copy_from_slice(&v);
                out[4] = 1.0;
            }
            Frame::North | Frame::South => {
                let pt = MoserChartPoint::from_array(frame.chart().expect("chart frame"), y);
                let g = scaled_energy(&pt, &self.level)?;
                let va = -g.value * g.grad_b;
                let vb = g.value * g.grad_a;
                out[0] = va.x;
                out[1] = va.y;
                out[2] = vb.x;
                out[3] = vb.y;
                out[4] = g.value * pt.radius();
                out[5] = g.value * pt.b.dot(&g.grad_b);
            }
        }
        if sign < 0.0 {
            for v in &mut out {
                *v = -*v;
            }
        }
        Ok(out)
    }

    /// The conserved quantity of the flow: `H` or `Kc`.
    pub fn conserved(&self, frame: Frame, y: &StateVec) -> Result<f64> {
        match frame {
            Frame::Physical => hamiltonian(&PhaseState::from_array(y), self.params()),
            Frame::North | Frame::South => {
                let pt = MoserChartPoint::from_array(frame.chart().expect("chart frame"), y);
                kcheck_value(&pt, &self.level)
            }
        }
    }
}

/// Initial condition for [`integrate`].
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Initial {
    Physical(PhaseState),
    Chart(MoserChartPoint),
}

fn start_state(model: &FlowModel, initial: &Initial) -> Result<(Frame, StateVec)> {
    let mut y = [0.0; DIM];
    match (model.flow, initial) {
        (Flow::Physical, Initial::Physical(st)) => {
            y[..4].copy_from_slice(&st.to_array());
            Ok((Frame::Physical, y))
        }
        (Flow::Physical, Initial::Chart(pt)) => {
            let st = physical_state(pt)?;
            y[..4].copy_from_slice(&st.to_array());
            Ok((Frame::Physical, y))
        }
        (Flow::Regularized, init) => {
            let pt = match init {
                Initial::Physical(st) => MoserChartPoint::from_physical(st),
                Initial::Chart(pt) => *pt,
            };
            let pt = pt.canonical();
            let kc = kcheck_value(&pt, &model.level)?;
            let miss = (kc - model.level.target).abs();
            if !(miss < 1e-10) {
                return Err(Error::InvalidParameter(format!(
                    "initial point is off the regularized level: |Kc - target| = {miss:e}"
                )));
            }
            let g = scaled_energy(&pt, &model.level)?.value;
            if !(g > 0.0) {
                return Err(Error::InvalidParameter(
                    "initial point lies on the K = -2(1 - mu) branch".into(),
                ));
            }
            y[..4].copy_from_slice(&pt.to_array());
            Ok((pt.chart.into(), y))
        }
    }
}

fn check_physical_radius(frame: Frame, t: f64, y: &StateVec) -> Result<()> {
    if frame == Frame::Physical {
        let r = (y[0] * y[0] + y[1] * y[1]).sqrt();
        if !(r >= PHYSICAL_MIN_RADIUS) {
            return Err(Error::UseRegularized { t, r });
        }
    }
    Ok(())
}

fn maybe_switch(frame: Frame, y: &mut StateVec) -> Result<Option<Frame>> {
    let Some(chart) = frame.chart() else {
        return Ok(None);
    };
    let a2 = y[0] * y[0] + y[1] * y[1];
    if a2 <= CHART_SWITCH * CHART_SWITCH {
        return Ok(None);
    }
    let pt = chart_transition(&MoserChartPoint::from_array(chart, y))?;
    y[..4].copy_from_slice(&pt.to_array());
    Ok(Some(pt.chart.into()))
}

/// Integrates to `settings.t_max`.
pub fn integrate(model: &FlowModel, initial: &Initial, settings: &IntegrationSettings) -> Result<Trajectory> {
    integrate_until(model, initial, settings, |_| false)
}

/// Integrates until `t_max` or until `stop` returns `true` for a freshly
/// accepted step. The step sequence does not depend on `stop`, so a stopped
/// run is a prefix of the full run.
pub fn integrate_until<S>(
    model: &FlowModel,
    initial: &Initial,
    settings: &IntegrationSettings,
    mut stop: S,
) -> Result<Trajectory>
where
    S: FnMut(&Step) -> bool,
{
    settings.validate()?;
    let (mut frame, mut y) = start_state(model, initial)?;
    check_physical_radius(frame, 0.0, &y)?;
    let (rtol, atol) = (settings.rel_tol, settings.abs_tol);

    let mut traj = Trajectory::new(*model, *settings);
    traj.log_conserved(model.conserved(frame, &y)?);

    let mut k1 = model.rhs(frame, &y)?;
    let mut h = {
        let fr = frame;
        let rhs = |s: &StateVec| model.rhs(fr, s).ok();
        initial_step(&rhs, &y, &k1, rtol, atol, settings.max_step)
    };
    let mut ctl = Controller::new();
    let mut t = 0.0;
    let t_end = settings.t_max;

    while t < t_end {
        let h_cand = h.min(settings.max_step);
        let last = t + h_cand >= t_end;
        let h_try = if last { t_end - t } else { h_cand };
        let fr = frame;
        let rhs = |s: &StateVec| model.rhs(fr, s).ok();
        let trial = trial_step(&rhs, &y, &k1, h_try, rtol, atol);
        match trial {
            Some(tr) if tr.err <= 1.0 => {
                let step = Step::new(t, h_try, frame, y, tr.y1, tr.cont);
                let t_next = if last { t_end } else { t + h_try };
                check_physical_radius(frame, t_next, &tr.y1)?;
                let halt = stop(&step);
                traj.push(step);
                t = t_next;
                y = tr.y1;
                k1 = tr.k7;
                let h_next = ctl.accept(h_try, tr.err);
                if let Some(new_frame) = maybe_switch(frame, &mut y)? {
                    frame = new_frame;
                    k1 = model.rhs(frame, &y)?;
                }
                traj.log_conserved(model.conserved(frame, &y)?);
                if halt {
                    break;
                }
                h = h_next.min(settings.max_step);
            }
            other => {
                h = ctl.reject(h_try, other.map(|tr| tr.err));
                if !(h > 1e-14 * t.abs().max(1.0)) {
                    return Err(Error::StepSizeUnderflow { t, h });
                }
            }
        }
    }
    traj.finish(t, frame, y);
    Ok(traj)
}
