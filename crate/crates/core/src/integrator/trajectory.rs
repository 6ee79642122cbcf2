use crate::dynamics::PhaseState;
use crate::error::{Error, Result};
use crate::regularization::{physical_state, MoserChartPoint};

use super::dopri::{dense_derivative, dense_eval, StateVec, DIM};
use super::{Flow, FlowModel, Frame, IntegrationSettings};

/// A state on a trajectory, tagged with the frame it is expressed in.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TrajPoint {
    pub t: f64,
    pub frame: Frame,
    pub y: StateVec,
}

impl TrajPoint {
    pub fn chart_point(&self) -> Option<MoserChartPoint> {
        self.frame.chart().map(|c| MoserChartPoint::from_array(c, &self.y))
    }

    /// Physical state; errors on the collision fiber.
    pub fn physical(&self) -> Result<PhaseState> {
        match self.chart_point() {
            None => Ok(PhaseState::from_array(&self.y)),
            Some(pt) => physical_state(&pt),
        }
    }

    /// Accumulated physical time.
    pub fn t_phys(&self) -> f64 {
        self.y[4]
    }

    /// Accumulated Reeb time.
    pub fn reeb_time(&self) -> f64 {
        self.y[5]
    }

    /// Physical position, defined through collisions.
    pub fn position(&self) -> nalgebra::Vector2<f64> {
        match self.chart_point() {
            None => nalgebra::Vector2::new(self.y[0], self.y[1]),
            Some(pt) => pt.position(),
        }
    }
}

/// One accepted step with its continuous extension.
#[derive(Debug, Clone, PartialEq)]
pub struct Step {
    pub t0: f64,
    pub h: f64,
    pub frame: Frame,
    pub y0: StateVec,
    pub y1: StateVec,
    cont: [StateVec; 5],
}

impl Step {
    pub(crate) fn new(t0: f64, h: f64, frame: Frame, y0: StateVec, y1: StateVec, cont: [StateVec; 5]) -> Self {
        Self {
            t0,
            h,
            frame,
            y0,
            y1,
            cont,
        }
    }

    pub fn t1(&self) -> f64 {
        self.t0 + self.h
    }

    fn theta(&self, t: f64) -> f64 {
        ((t - self.t0) / self.h).clamp(0.0, 1.0)
    }

    /// Dense-output state at `t` (clamped to the step).
    pub fn eval(&self, t: f64) -> TrajPoint {
        let theta = self.theta(t);
        let y = if theta == 0.0 {
            self.y0
        } else if theta == 1.0 {
            self.y1
        } else {
            dense_eval(&self.cont, theta)
        };
        TrajPoint {
            t,
            frame: self.frame,
            y,
        }
    }

    /// Time derivative of the dense output at `t`.
    pub fn derivative(&self, t: f64) -> StateVec {
        let mut d = dense_derivative(&self.cont, self.theta(t));
        for v in d.iter_mut() {
            *v /= self.h;
        }
        d
    }

    pub fn start(&self) -> TrajPoint {
        TrajPoint {
            t: self.t0,
            frame: self.frame,
            y: self.y0,
        }
    }

    pub fn end(&self) -> TrajPoint {
        TrajPoint {
            t: self.t1(),
            frame: self.frame,
            y: self.y1,
        }
    }
}

/// Immutable record of an integration: accepted steps with dense output and
/// a log of the conserved quantity at every sample.
#[derive(Debug, Clone, PartialEq)]
pub struct Trajectory {
    model: FlowModel,
    settings: IntegrationSettings,
    steps: Vec<Step>,
    conserved: Vec<f64>,
    end: Option<TrajPoint>,
}

impl Trajectory {
    pub(crate) fn new(model: FlowModel, settings: IntegrationSettings) -> Self {
        Self {
            model,
            settings,
            steps: Vec::new(),
            conserved: Vec::new(),
            end: None,
        }
    }

    pub(crate) fn push(&mut self, step: Step) {
        self.steps.push(step);
    }

    pub(crate) fn log_conserved(&mut self, v: f64) {
        self.conserved.push(v);
    }

    pub(crate) fn finish(&mut self, t: f64, frame: Frame, y: StateVec) {
        self.end = Some(TrajPoint { t, frame, y });
    }

    pub fn model(&self) -> &FlowModel {
        &self.model
    }

    pub fn settings(&self) -> &IntegrationSettings {
        &self.settings
    }

    pub fn flow(&self) -> Flow {
        self.model.flow
    }

    pub fn steps(&self) -> &[Step] {
        &self.steps
    }

    pub fn conserved_log(&self) -> &[f64] {
        &self.conserved
    }

    pub fn t_end(&self) -> f64 {
        self.end.map(|p| p.t).unwrap_or(0.0)
    }

    pub fn start(&self) -> TrajPoint {
        self.steps
            .first()
            .map(Step::start)
            .or(self.end)
            .expect("trajectory has a start")
    }

    pub fn end(&self) -> TrajPoint {
        self.end.expect("trajectory is finished")
    }

    /// Step starts followed by the final state. After a chart switch the
    /// sample carries the new chart.
    pub fn samples(&self) -> Vec<TrajPoint> {
        let mut out: Vec<TrajPoint> = self.steps.iter().map(Step::start).collect();
        if let Some(e) = self.end {
            out.push(e);
        }
        out
    }

    /// Index of the step covering `t`.
    pub fn step_index(&self, t: f64) -> Option<usize> {
        if self.steps.is_empty() || t < 0.0 || t > self.steps.last()?.t1() {
            return None;
        }
        let i = self.steps.partition_point(|s| s.t1() < t);
        Some(i.min(self.steps.len() - 1))
    }

    /// Dense-output state at `t`.
    pub fn at(&self, t: f64) -> Result<TrajPoint> {
        let i = self
            .step_index(t)
            .ok_or_else(|| Error::InvalidParameter(format!("t = {t} outside [0, {}]", self.t_end())))?;
        Ok(self.steps[i].eval(t))
    }

    /// Largest deviation of the conserved quantity from `reference` over the
    /// logged samples.
    pub fn max_conserved_drift(&self, reference: f64) -> f64 {
        self.conserved.iter().map(|v| (v - reference).abs()).fold(0.0, f64::max)
    }

    pub fn dim(&self) -> usize {
        DIM
    }
}
