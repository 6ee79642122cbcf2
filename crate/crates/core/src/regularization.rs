//! Moser regularization of collisions with `O`.
//!
//! On `{H + f = 0}` time is rescaled by `|q|`, giving
//! `K = |q| (H + f)`, and the flow of `K` on `{K = 0}` agrees up to a
//! constant factor with the flow of `Kc = (K + (1 - mu))^2 / 2` on
//! `{Kc = (1 - mu)^2 / 2}`. Momentum space is then compactified to the sphere
//! by stereographic projection, with `p` playing the role of position and
//! `-q` the conjugate momentum.
//!
//! Two charts cover the sphere:
//!
//! * `North`: `a = p`, `b = q`;
//! * `South`: `a = p / |p|^2`, `b = |p|^2 q - 2 (p . q) p` (the cotangent lift
//!   of the inversion).
//!
//! The collision fiber is `a = 0` in the South chart. There every term of
//! `Kc` extends smoothly through the substitutions `|q| = |a|^2 |b|`,
//! `p1 q2 - p2 q1 = a1 b2 - a2 b1` and `p2 |q| = a2 |b|`, so the pole is an
//! ordinary interior point and `K(0, b) = |b| / 2 - (1 - mu)`.

use nalgebra::Vector2;
use serde::{Deserialize, Serialize};

use crate::dynamics::{hamiltonian, primary_e, PhaseState, SystemParams, SINGULAR_RADIUS};
use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Chart {
    North,
    South,
}

impl Chart {
    pub fn other(self) -> Self {
        match self {
            Chart::North => Chart::South,
            Chart::South => Chart::North,
        }
    }
}

/// A point of the regularized phase space `T*S^2` in one of the two charts.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MoserChartPoint {
    pub chart: Chart,
    pub a: Vector2<f64>,
    pub b: Vector2<f64>,
}

impl MoserChartPoint {
    pub fn new(chart: Chart, a: [f64; 2], b: [f64; 2]) -> Self {
        Self {
            chart,
            a: Vector2::new(a[0], a[1]),
            b: Vector2::new(b[0], b[1]),
        }
    }

    /// North-chart image of a physical state.
    pub fn from_physical(state: &PhaseState) -> Self {
        Self {
            chart: Chart::North,
            a: state.p,
            b: state.q,
        }
    }

    pub fn from_array(chart: Chart, y: &[f64]) -> Self {
        Self::new(chart, [y[0], y[1]], [y[2], y[3]])
    }

    pub fn to_array(&self) -> [f64; 4] {
        [self.a.x, self.a.y, self.b.x, self.b.y]
    }

    pub fn is_finite(&self) -> bool {
        self.to_array().iter().all(|v| v.is_finite())
    }

    /// `a1 b2 - a2 b1`, identical in both charts and equal to `p1 q2 - p2 q1`.
    #[inline]
    pub fn cross(&self) -> f64 {
        self.a.x * self.b.y - self.a.y * self.b.x
    }

    /// Physical position, smooth through the collision fiber.
    pub fn position(&self) -> Vector2<f64> {
        match self.chart {
            Chart::North => self.b,
            Chart::South => self.a.norm_squared() * self.b - 2.0 * self.a.dot(&self.b) * self.a,
        }
    }

    /// `|q|`; in the South chart `|a|^2 |b|`.
    pub fn radius(&self) -> f64 {
        match self.chart {
            Chart::North => self.b.norm(),
            Chart::South => self.a.norm_squared() * self.b.norm(),
        }
    }

    /// The reversing reflection, which has the same form in both charts.
    pub fn reflect(&self) -> Self {
        Self {
            chart: self.chart,
            a: Vector2::new(-self.a.x, self.a.y),
            b: Vector2::new(self.b.x, -self.b.y),
        }
    }

    /// Re-expressed in `chart` (identity when already there).
    pub fn in_chart(&self, chart: Chart) -> Result<Self> {
        if self.chart == chart {
            Ok(*self)
        } else {
            chart_transition(self)
        }
    }

    /// Expressed in the chart where `|a| <= 1`.
    pub fn canonical(&self) -> Self {
        if self.a.norm_squared() > 1.0 {
            chart_transition(self).unwrap_or(*self)
        } else {
            *self
        }
    }

    /// `|a|` measured in the South chart (`0` on the collision fiber).
    pub fn south_base_norm(&self) -> f64 {
        match self.chart {
            Chart::South => self.a.norm(),
            Chart::North => {
                let n = self.a.norm();
                if n == 0.0 {
                    f64::INFINITY
                } else {
                    1.0 / n
                }
            }
        }
    }
}

/// The regularized energy hypersurface `{Kc = (1 - mu)^2 / 2}` for `{H + f = 0}`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RegularizedLevel {
    pub params: SystemParams,
    pub f: f64,
    pub target: f64,
}

impl RegularizedLevel {
    pub fn new(params: SystemParams, f: f64) -> Self {
        let m = params.mass_o();
        Self {
            params,
            f,
            target: 0.5 * m * m,
        }
    }

    pub fn from_jacobi(params: SystemParams, jacobi: f64) -> Self {
        Self::new(params, -jacobi)
    }

    pub fn jacobi(&self) -> f64 {
        -self.f
    }

    /// `|b|` of Legendrian points: `2 (1 - mu)`.
    pub fn legendrian_radius(&self) -> f64 {
        2.0 * self.params.mass_o()
    }
}

/// `K = |q| (H + f)` at a physical state.
pub fn k_value(state: &PhaseState, level: &RegularizedLevel) -> Result<f64> {
    let h = hamiltonian(state, &level.params)?;
    Ok(state.q.norm() * (h + level.f))
}

/// `G = K + (1 - mu)` together with its partial derivatives in the chart.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ScaledEnergy {
    pub value: f64,
    pub grad_a: Vector2<f64>,
    pub grad_b: Vector2<f64>,
}

pub fn scaled_energy(pt: &MoserChartPoint, level: &RegularizedLevel) -> Result<ScaledEnergy> {
    let mu = level.params.mu();
    let f = level.f;
    let (a, b) = (&pt.a, &pt.b);
    let r = b.norm();
    if !(r > 0.0) || !pt.is_finite() {
        return Err(Error::Singular {
            what: "fiber coordinate b on the zero section",
            distance: r,
        });
    }
    match pt.chart {
        Chart::North => {
            let d = b - primary_e();
            let rd = d.norm();
            let (inv_rd, grad_inv_rd) = if mu != 0.0 {
                if !(rd >= SINGULAR_RADIUS) {
                    return Err(Error::Singular {
                        what: "|q - E| at primary E",
                        distance: rd,
                    });
                }
                (1.0 / rd, -d / (rd * rd * rd))
            } else {
                (0.0, Vector2::zeros())
            };
            let w = 0.5 * (a.norm_squared() + 1.0) + a.x * b.y - a.y * (b.x - mu) + f - 0.5 - mu * inv_rd;
            let dw_db = Vector2::new(-a.y, a.x) - mu * grad_inv_rd;
            Ok(ScaledEnergy {
                value: r * w,
                grad_a: r * Vector2::new(a.x + b.y, a.y - (b.x - mu)),
                grad_b: w / r * b + r * dw_db,
            })
        }
        Chart::South => {
            let s2 = a.norm_squared();
            let cross = pt.cross();
            let ab = a.dot(b);
            let q = s2 * b - 2.0 * ab * a;
            let d = q - primary_e();
            let rd = d.norm();
            let mut w = 0.5 * (1.0 + s2) + cross * s2 + mu * a.y + (f - 0.5) * s2;
            let mut dw_da = a + 2.0 * cross * a + s2 * Vector2::new(b.y, -b.x) + 2.0 * (f - 0.5) * a;
            let mut dw_db = s2 * Vector2::new(-a.y, a.x);
            dw_da.y += mu;
            if mu != 0.0 {
                if !(rd >= SINGULAR_RADIUS) {
                    return Err(Error::Singular {
                        what: "pullback of primary E",
                        distance: rd,
                    });
                }
                let inv_rd = 1.0 / rd;
                let inv_rd3 = inv_rd * inv_rd * inv_rd;
                let da = d.dot(a);
                let db = d.dot(b);
                // d(1/rd)/da_j = -(2 a_j (d.b) - 2 b_j (d.a) - 2 (a.b) d_j) / rd^3
                let dinv_da = -(2.0 * db * a - 2.0 * da * b - 2.0 * ab * d) * inv_rd3;
                // d(1/rd)/db_j = -(s2 d_j - 2 (d.a) a_j) / rd^3
                let dinv_db = -(s2 * d - 2.0 * da * a) * inv_rd3;
                w -= mu * s2 * inv_rd;
                dw_da -= mu * (2.0 * inv_rd * a + s2 * dinv_da);
                dw_db -= mu * s2 * dinv_db;
            }
            Ok(ScaledEnergy {
                value: r * w,
                grad_a: r * dw_da,
                grad_b: w / r * b + r * dw_db,
            })
        }
    }
}

/// `K` evaluated in a chart; on the collision fiber `K(0, b) = |b|/2 - (1 - mu)`.
pub fn k_in_chart(pt: &MoserChartPoint, level: &RegularizedLevel) -> Result<f64> {
    Ok(scaled_energy(pt, level)?.value - level.params.mass_o())
}

/// `Kc = (K + (1 - mu))^2 / 2`.
pub fn kcheck_value(pt: &MoserChartPoint, level: &RegularizedLevel) -> Result<f64> {
    let g = scaled_energy(pt, level)?.value;
    Ok(0.5 * g * g)
}

/// Cotangent lift of `p -> p / |p|^2`: `a' = a / |a|^2`,
/// `b' = |a|^2 b - 2 (a . b) a`. An involution between the charts.
pub fn chart_transition(pt: &MoserChartPoint) -> Result<MoserChartPoint> {
    let s2 = pt.a.norm_squared();
    if !(s2 > 0.0) {
        return Err(Error::PoleTransition);
    }
    Ok(MoserChartPoint {
        chart: pt.chart.other(),
        a: pt.a / s2,
        b: s2 * pt.b - 2.0 * pt.a.dot(&pt.b) * pt.a,
    })
}

/// Hamilton's equations of `Kc` with `a` as position and `-b` as momentum:
/// `a' = -dKc/db`, `b' = dKc/da`. Returned as `[a1', a2', b1', b2']`.
pub fn regularized_vector_field(pt: &MoserChartPoint, level: &RegularizedLevel) -> Result<[f64; 4]> {
    let g = scaled_energy(pt, level)?;
    let va = -g.value * g.grad_b;
    let vb = g.value * g.grad_a;
    Ok([va.x, va.y, vb.x, vb.y])
}

pub fn physical_state(pt: &MoserChartPoint) -> Result<PhaseState> {
    match pt.chart {
        Chart::North => Ok(PhaseState { q: pt.b, p: pt.a }),
        Chart::South => {
            let s2 = pt.a.norm_squared();
            if !(s2 > 0.0) {
                return Err(Error::AtCollision);
            }
            Ok(PhaseState {
                q: s2 * pt.b - 2.0 * pt.a.dot(&pt.b) * pt.a,
                p: pt.a / s2,
            })
        }
    }
}

/// Membership in the Legendrian collision set `{a_S = 0} ∩ {Kc = target}`.
pub fn legendrian_membership(pt: &MoserChartPoint, level: &RegularizedLevel, tol: f64) -> bool {
    let south = match pt.in_chart(Chart::South) {
        Ok(s) => s,
        Err(_) => return false,
    };
    if !(south.a.norm() < tol) {
        return false;
    }
    match kcheck_value(&south, level) {
        Ok(k) => (k - level.target).abs() < tol,
        Err(_) => false,
    }
}

/// The point of the collision fiber with fiber coordinate `b` rescaled onto
/// the Legendrian circle `|b| = 2 (1 - mu)`.
pub fn snap_to_legendrian(b: Vector2<f64>, level: &RegularizedLevel) -> Result<MoserChartPoint> {
    let n = b.norm();
    if !(n > 0.0) {
        return Err(Error::Singular {
            what: "fiber coordinate b on the zero section",
            distance: n,
        });
    }
    Ok(MoserChartPoint {
        chart: Chart::South,
        a: Vector2::zeros(),
        b: b * (level.legendrian_radius() / n),
    })
}
