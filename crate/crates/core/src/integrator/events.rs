//! Event location on the dense-output interpolant.
//!
//! Events never clip steps; they are searched for after the fact on the
//! continuous extension of each accepted step.

use super::trajectory::{Step, TrajPoint, Trajectory};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum EventDirection {
    /// `g` crosses from negative to non-negative. For `g = d/dt f` these are
    /// the local minima of `f`.
    Rising,
    /// `g` crosses from positive to non-positive.
    Falling,
    Any,
}

impl EventDirection {
    fn crosses(self, lo: f64, hi: f64) -> bool {
        let rising = lo < 0.0 && hi >= 0.0;
        let falling = lo > 0.0 && hi <= 0.0;
        match self {
            EventDirection::Rising => rising,
            EventDirection::Falling => falling,
            EventDirection::Any => rising || falling,
        }
    }
}

/// Sign-change probes per step.
const PROBES: usize = 4;

/// Roots of `g` inside one step, refined by bisection to `tol` in time.
/// A root exactly at the step start is not reported (it belongs to the
/// previous step).
pub fn step_roots<G>(step: &Step, g: &G, direction: EventDirection, tol: f64) -> Vec<TrajPoint>
where
    G: Fn(&TrajPoint) -> f64,
{
    let mut out = Vec::new();
    let mut t_lo = step.t0;
    let mut g_lo = g(&step.start());
    for k in 1..=PROBES {
        let t_hi = if k == PROBES {
            step.t1()
        } else {
            step.t0 + step.h * k as f64 / PROBES as f64
        };
        let p_hi = if k == PROBES { step.end() } else { step.eval(t_hi) };
        let g_hi = g(&p_hi);
        if g_lo.is_finite() && g_hi.is_finite() && direction.crosses(g_lo, g_hi) {
            let (mut a, mut b) = (t_lo, t_hi);
            let mut ga = g_lo;
            while b - a > tol {
                let m = 0.5 * (a + b);
                if m <= a || m >= b {
                    break;
                }
                let gm = g(&step.eval(m));
                if (ga < 0.0) == (gm < 0.0) && gm != 0.0 {
                    a = m;
                    ga = gm;
                } else {
                    b = m;
                }
            }
            out.push(step.eval(0.5 * (a + b)));
        }
        t_lo = t_hi;
        g_lo = g_hi;
    }
    out
}

/// All roots of `g` along the trajectory, in time order.
pub fn locate_event<G>(traj: &Trajectory, g: G, direction: EventDirection) -> Vec<TrajPoint>
where
    G: Fn(&TrajPoint) -> f64,
{
    let tol = traj.settings().event_tol;
    traj.steps()
        .iter()
        .flat_map(|s| step_roots(s, &g, direction, tol))
        .collect()
}
