//! Rotating-frame model of the planar circular restricted three-body problem.
//!
//! The primary `O` of mass `1 - mu` sits at the origin and the primary `E` of
//! mass `mu` at `(1, 0)`. The frame rotates about the barycenter `(mu, 0)`.
//! Potentials are attractive:
//!
//! ```text
//! H(q, p) = |p|^2 / 2 + p1 q2 - p2 (q1 - mu) - mu / |q - E| - (1 - mu) / |q|
//! ```
//!
//! With `mu = 0` the model degenerates to the rotating Kepler problem, which
//! is accepted everywhere as a closed-form reference.

use nalgebra::Vector2;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::roots::bisect_secant;

/// Distances to a primary below this are treated as singular.
pub const SINGULAR_RADIUS: f64 = 1e-14;

/// Position of the secondary primary `E`.
pub fn primary_e() -> Vector2<f64> {
    Vector2::new(1.0, 0.0)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SystemParams {
    mu: f64,
}

impl SystemParams {
    pub fn new(mu: f64) -> Result<Self> {
        if !(mu.is_finite() && (0.0..1.0).contains(&mu)) {
            return Err(Error::InvalidParameter(format!(
                "mass ratio must satisfy 0 <= mu < 1, got {mu}"
            )));
        }
        Ok(Self { mu })
    }

    #[inline]
    pub fn mu(&self) -> f64 {
        self.mu
    }

    /// Mass of the primary at the origin.
    #[inline]
    pub fn mass_o(&self) -> f64 {
        1.0 - self.mu
    }

    /// `mu = 0`: the rotating Kepler problem.
    pub fn is_kepler(&self) -> bool {
        self.mu == 0.0
    }
}

/// Physical rotating-frame state of the massless body.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PhaseState {
    pub q: Vector2<f64>,
    pub p: Vector2<f64>,
}

impl PhaseState {
    pub fn new(q1: f64, q2: f64, p1: f64, p2: f64) -> Self {
        Self {
            q: Vector2::new(q1, q2),
            p: Vector2::new(p1, p2),
        }
    }

    pub fn to_array(&self) -> [f64; 4] {
        [self.q.x, self.q.y, self.p.x, self.p.y]
    }

    pub fn from_array(y: &[f64]) -> Self {
        Self::new(y[0], y[1], y[2], y[3])
    }

    pub fn is_finite(&self) -> bool {
        self.to_array().iter().all(|v| v.is_finite())
    }

    /// The reversing reflection `(q1, q2, p1, p2) -> (q1, -q2, -p1, p2)`.
    pub fn reflect(&self) -> Self {
        Self::new(self.q.x, -self.q.y, -self.p.x, self.p.y)
    }
}

/// The energy hypersurface `{H + f = 0}`; `c = -f` is the Jacobi energy.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EnergyLevel {
    pub f: f64,
    pub below_first_critical: bool,
}

impl EnergyLevel {
    pub fn from_jacobi(jacobi: f64, params: &SystemParams) -> Result<Self> {
        if !jacobi.is_finite() {
            return Err(Error::InvalidParameter(format!(
                "Jacobi energy must be finite, got {jacobi}"
            )));
        }
        let critical = lagrange_points(params)?.first_critical_value;
        Ok(Self {
            f: -jacobi,
            below_first_critical: jacobi < critical,
        })
    }

    #[inline]
    pub fn jacobi(&self) -> f64 {
        -self.f
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum LagrangeLabel {
    L1,
    L2,
    L3,
    L4,
    L5,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LagrangePoint {
    pub label: LagrangeLabel,
    pub position: [f64; 2],
    /// `H` at the point with critical momenta, equal to the effective potential.
    pub value: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LagrangeConfig {
    pub mu: f64,
    pub points: [LagrangePoint; 5],
    pub first_critical_value: f64,
    /// Set for `mu = 0`, where the critical set is the whole unit circle.
    pub degenerate: bool,
}

impl LagrangeConfig {
    pub fn point(&self, label: LagrangeLabel) -> &LagrangePoint {
        self.points
            .iter()
            .find(|pt| pt.label == label)
            .expect("all five labels are present")
    }
}

fn check_distances(q: &Vector2<f64>, params: &SystemParams) -> Result<(f64, f64)> {
    let r = q.norm();
    if !(r >= SINGULAR_RADIUS) {
        return Err(Error::Singular {
            what: "|q| at primary O",
            distance: r,
        });
    }
    let rd = (q - primary_e()).norm();
    if !params.is_kepler() && !(rd >= SINGULAR_RADIUS) {
        return Err(Error::Singular {
            what: "|q - E| at primary E",
            distance: rd,
        });
    }
    Ok((r, rd))
}

pub fn hamiltonian(state: &PhaseState, params: &SystemParams) -> Result<f64> {
    let mu = params.mu();
    let (q, p) = (&state.q, &state.p);
    let (r, rd) = check_distances(q, params)?;
    let mut h = 0.5 * p.norm_squared() + p.x * q.y - p.y * (q.x - mu) - (1.0 - mu) / r;
    if mu != 0.0 {
        h -= mu / rd;
    }
    Ok(h)
}

/// `(dq/dt, dp/dt) = (dH/dp, -dH/dq)` as `[q1', q2', p1', p2']`.
pub fn hamiltonian_vector_field(state: &PhaseState, params: &SystemParams) -> Result<[f64; 4]> {
    let mu = params.mu();
    let (q, p) = (&state.q, &state.p);
    let (r, rd) = check_distances(q, params)?;
    let ko = (1.0 - mu) / (r * r * r);
    let ke = if mu != 0.0 { mu / (rd * rd * rd) } else { 0.0 };
    let dh_dq1 = -p.y + ke * (q.x - 1.0) + ko * q.x;
    let dh_dq2 = p.x + ke * q.y + ko * q.y;
    Ok([p.x + q.y, p.y - (q.x - mu), -dh_dq1, -dh_dq2])
}

/// `U(q) = -|q - (mu, 0)|^2 / 2 - (1 - mu)/|q| - mu/|q - E|`, the minimum of
/// `H` over the momentum fiber at `q`.
pub fn effective_potential(q: &Vector2<f64>, params: &SystemParams) -> Result<f64> {
    let mu = params.mu();
    let (r, rd) = check_distances(q, params)?;
    let dx = q.x - mu;
    let mut u = -0.5 * (dx * dx + q.y * q.y) - (1.0 - mu) / r;
    if mu != 0.0 {
        u -= mu / rd;
    }
    Ok(u)
}

pub fn effective_potential_gradient(q: &Vector2<f64>, params: &SystemParams) -> Result<Vector2<f64>> {
    let mu = params.mu();
    let (r, rd) = check_distances(q, params)?;
    let ko = (1.0 - mu) / (r * r * r);
    let ke = if mu != 0.0 { mu / (rd * rd * rd) } else { 0.0 };
    Ok(Vector2::new(
        -(q.x - mu) + ko * q.x + ke * (q.x - 1.0),
        -q.y + ko * q.y + ke * q.y,
    ))
}

/// Momenta at which `H(q, .)` is minimal: `p = (-q2, q1 - mu)`.
pub fn critical_momentum(q: &Vector2<f64>, params: &SystemParams) -> Vector2<f64> {
    Vector2::new(-q.y, q.x - params.mu())
}

// Bracket ends keep a small gap to the singularities so that the slope of U
// is finite there while keeping its sign.
const AXIS_GAP: f64 = 1e-9;
const HILL_GAP: f64 = 2.0 * SINGULAR_RADIUS;

fn axis_slope(x: f64, params: &SystemParams) -> f64 {
    let mu = params.mu();
    let mut d = -(x - mu) + (1.0 - mu) * x / (x.abs() * x * x);
    if mu != 0.0 {
        let dx = x - 1.0;
        d += mu * dx / (dx.abs() * dx * dx);
    }
    d
}

fn collinear_point(label: LagrangeLabel, lo: f64, hi: f64, params: &SystemParams) -> Result<LagrangePoint> {
    let x = bisect_secant(|x| axis_slope(x, params), lo, hi)?;
    let q = Vector2::new(x, 0.0);
    let value = effective_potential(&q, params)?;
    let grad = effective_potential_gradient(&q, params)?.norm();
    if !(grad < 1e-10) {
        return Err(Error::RootFinding {
            lo,
            hi,
            reason: format!("{label:?} residual gradient {grad:e} exceeds 1e-10"),
        });
    }
    Ok(LagrangePoint {
        label,
        position: [x, 0.0],
        value,
    })
}

/// The five Lagrange points and the first critical value.
///
/// Collinear points come from bracketed root finding of `dU/dq1` on the axis
/// in `[-2, 0)`, `(0, 1)` and `(1, 2]`. For `mu = 0` the critical set is the
/// unit circle; representatives on it are returned with `degenerate = true`
/// and the critical value `-3/2`.
pub fn lagrange_points(params: &SystemParams) -> Result<LagrangeConfig> {
    let mu = params.mu();
    let h = 0.5 * 3f64.sqrt();
    if params.is_kepler() {
        let mk = |label, x: f64, y: f64| LagrangePoint {
            label,
            position: [x, y],
            value: -1.5,
        };
        return Ok(LagrangeConfig {
            mu,
            points: [
                mk(LagrangeLabel::L1, 1.0, 0.0),
                mk(LagrangeLabel::L2, 1.0, 0.0),
                mk(LagrangeLabel::L3, -1.0, 0.0),
                mk(LagrangeLabel::L4, 0.5, h),
                mk(LagrangeLabel::L5, 0.5, -h),
            ],
            first_critical_value: -1.5,
            degenerate: true,
        });
    }
    let l1 = collinear_point(LagrangeLabel::L1, AXIS_GAP, 1.0 - AXIS_GAP, params)?;
    let l2 = collinear_point(LagrangeLabel::L2, 1.0 + AXIS_GAP, 2.0, params)?;
    let l3 = collinear_point(LagrangeLabel::L3, -2.0, -AXIS_GAP, params)?;
    let triangular = |label, y: f64| -> Result<LagrangePoint> {
        let q = Vector2::new(0.5, y);
        Ok(LagrangePoint {
            label,
            position: [q.x, q.y],
            value: effective_potential(&q, params)?,
        })
    };
    let l4 = triangular(LagrangeLabel::L4, h)?;
    let l5 = triangular(LagrangeLabel::L5, -h)?;
    let first_critical_value = l1.value.min(l2.value).min(l3.value);
    Ok(LagrangeConfig {
        mu,
        points: [l1, l2, l3, l4, l5],
        first_critical_value,
        degenerate: false,
    })
}

/// Boundary of the bounded Hill component around `O` on the axis `q2 = 0`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct HillInterval {
    /// Zero-velocity point on the negative side (`s_min < 0`).
    pub s_min: f64,
    /// Zero-velocity point on the positive side (`s_max > 0`).
    pub s_max: f64,
}

impl HillInterval {
    pub fn contains(&self, s: f64) -> bool {
        s != 0.0 && s >= self.s_min && s <= self.s_max
    }
}

/// The axis segment around `O` on which `U(s, 0) <= c`.
pub fn hill_component_interval(params: &SystemParams, level: &EnergyLevel) -> Result<HillInterval> {
    let config = lagrange_points(params)?;
    let c = level.jacobi();
    if !(c < config.first_critical_value) {
        return Err(Error::AboveCritical {
            jacobi: c,
            critical: config.first_critical_value,
        });
    }
    let x_l1 = config.point(LagrangeLabel::L1).position[0];
    let x_l3 = config.point(LagrangeLabel::L3).position[0];
    let g = |s: f64| {
        effective_potential(&Vector2::new(s, 0.0), params)
            .map(|u| u - c)
            .unwrap_or(f64::NAN)
    };
    let s_max = bisect_secant(g, HILL_GAP, x_l1)?;
    let s_min = bisect_secant(g, x_l3, -HILL_GAP)?;
    Ok(HillInterval { s_min, s_max })
}

/// Kinetic energy gained by a burn `dv` at speed `v`: `dv^2/2 + v dv`.
pub fn oberth_energy_gain(v: f64, dv: f64) -> f64 {
    0.5 * dv * dv + v * dv
}
