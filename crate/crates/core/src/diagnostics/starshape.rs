//! Fiberwise star-shapedness of the regularized level set.
//!
//! For a base point `a` on the momentum sphere and a fiber direction `b0`,
//! the ray `t b0` maps to the physical ray `q = t M(a) b0` with `M = I` in the
//! North chart and `M = |a|^2 I - 2 a a^T` in the South chart. Along it,
//! `G = K + (1 - mu)` starts at `0` at the zero section and exceeds `1 - mu`
//! once `q` leaves the Hill component of `O`. The level set is star-shaped on
//! the ray when `G = 1 - mu` is crossed exactly once, transversally, before
//! that exit.

use std::collections::BTreeMap;

use nalgebra::Vector2;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::dynamics::{effective_potential, lagrange_points};
use crate::error::{Error, Result};
use crate::regularization::{scaled_energy, Chart, MoserChartPoint, RegularizedLevel};

/// Samples per ray when counting crossings.
const RAY_SAMPLES: usize = 400;
/// Innermost sample, relative to the exit parameter.
const RAY_START: f64 = 1e-10;
/// Ray parameter used on the collision fiber, where `G = t/2` for unit `b0`.
const COLLISION_FIBER_EXIT: f64 = 8.0;
/// Failing rays kept in a report.
const MAX_FAILURES: usize = 20;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RayFailure {
    pub chart: Chart,
    pub a: [f64; 2],
    pub direction: [f64; 2],
    pub crossings: usize,
    pub margin: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StarshapeReport {
    pub mu: f64,
    pub jacobi: f64,
    pub first_critical_value: f64,
    /// Latitudes and longitudes of the base grid (plus both poles).
    pub base_grid: usize,
    /// Fiber directions per base point.
    pub ray_grid: usize,
    pub base_points: usize,
    pub rays: usize,
    /// Crossing count to number of rays with that count.
    pub crossing_histogram: BTreeMap<usize, usize>,
    /// Smallest `dKc/dt` over all crossings.
    pub min_margin: f64,
    pub failures: Vec<RayFailure>,
    pub failure_count: usize,
    pub pass: bool,
}

/// Base points: a `base_grid x base_grid` latitude-longitude grid on the
/// sphere plus both poles, each in the chart where `|a| <= 1`.
pub fn base_points(base_grid: usize) -> Vec<(Chart, Vector2<f64>)> {
    let n = base_grid.max(1);
    let mut out = vec![(Chart::North, Vector2::zeros())];
    for i in 0..n {
        let theta = std::f64::consts::PI * (i as f64 + 0.5) / n as f64;
        for j in 0..n {
            let phi = std::f64::consts::TAU * j as f64 / n as f64;
            let dir = Vector2::new(phi.cos(), phi.sin());
            // |p| = tan(theta / 2); the far hemisphere uses a = p / |p|^2.
            let half = 0.5 * theta;
            if theta < std::f64::consts::FRAC_PI_2 {
                out.push((Chart::North, half.tan() * dir));
            } else {
                out.push((Chart::South, (half.cos() / half.sin()) * dir));
            }
        }
    }
    out.push((Chart::South, Vector2::zeros()));
    out
}

/// Fiber directions `b0`, evenly spaced on the unit circle.
pub fn ray_directions(ray_grid: usize) -> Vec<Vector2<f64>> {
    (0..ray_grid)
        .map(|k| {
            let psi = std::f64::consts::TAU * (k as f64 + 0.5) / ray_grid as f64;
            Vector2::new(psi.cos(), psi.sin())
        })
        .collect()
}

fn physical_direction(chart: Chart, a: &Vector2<f64>, b0: &Vector2<f64>) -> Vector2<f64> {
    match chart {
        Chart::North => *b0,
        Chart::South => a.norm_squared() * b0 - 2.0 * a.dot(b0) * a,
    }
}

/// First `t` at which `q = t v` leaves the Hill component of `O`.
fn exit_parameter(level: &RegularizedLevel, v: &Vector2<f64>) -> Result<f64> {
    let speed = v.norm();
    if speed == 0.0 {
        return Ok(COLLISION_FIBER_EXIT);
    }
    let c = level.jacobi();
    let outside = |t: f64| -> Result<bool> { Ok(effective_potential(&(t * v), &level.params)? > c) };
    let mut lo = 1e-12 / speed;
    let mut hi = lo;
    while !outside(hi)? {
        lo = hi;
        hi *= 1.25;
        if hi * speed > 1e3 {
            return Err(Error::Integrity("ray never leaves the Hill component".into()));
        }
    }
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if mid <= lo || mid >= hi {
            break;
        }
        if outside(mid)? {
            hi = mid;
        } else {
            lo = mid;
        }
    }
    Ok(hi)
}

struct RayResult {
    crossings: usize,
    margin: f64,
}

fn ray_scan(level: &RegularizedLevel, chart: Chart, a: &Vector2<f64>, b0: &Vector2<f64>) -> Result<RayResult> {
    let v = physical_direction(chart, a, b0);
    let t_exit = exit_parameter(level, &v)?;
    let m = level.params.mass_o();
    let point = |t: f64| MoserChartPoint {
        chart,
        a: *a,
        b: t * b0,
    };
    let excess = |t: f64| -> Result<f64> { Ok(scaled_energy(&point(t), level)?.value - m) };

    let ratio = (1.0 / RAY_START).powf(1.0 / RAY_SAMPLES as f64);
    let mut t_prev = t_exit * RAY_START;
    let mut g_prev = excess(t_prev)?;
    let mut crossings = 0;
    let mut margin = f64::INFINITY;
    for k in 1..=RAY_SAMPLES {
        let t = if k == RAY_SAMPLES { t_exit } else { t_prev * ratio };
        let g = excess(t)?;
        if (g_prev < 0.0) != (g < 0.0) {
            crossings += 1;
            let (mut lo, mut hi, mut glo) = (t_prev, t, g_prev);
            for _ in 0..100 {
                let mid = 0.5 * (lo + hi);
                if mid <= lo || mid >= hi {
                    break;
                }
                let gm = excess(mid)?;
                if (gm < 0.0) == (glo < 0.0) {
                    lo = mid;
                    glo = gm;
                } else {
                    hi = mid;
                }
            }
            let e = scaled_energy(&point(0.5 * (lo + hi)), level)?;
            // dKc/dt along t b0 with Kc = G^2 / 2.
            margin = margin.min(e.value * e.grad_b.dot(b0));
        }
        t_prev = t;
        g_prev = g;
    }
    Ok(RayResult { crossings, margin })
}

/// Counts crossings of the regularized level set along every sampled ray.
/// Refuses levels at or above the first critical value.
pub fn starshape_scan(level: &RegularizedLevel, base_grid: usize, ray_grid: usize) -> Result<StarshapeReport> {
    let config = lagrange_points(&level.params)?;
    let c = level.jacobi();
    if !(c < config.first_critical_value) {
        return Err(Error::AboveCritical {
            jacobi: c,
            critical: config.first_critical_value,
        });
    }
    if ray_grid == 0 {
        return Err(Error::InvalidParameter("ray_grid must be positive".into()));
    }
    let bases = base_points(base_grid);
    let dirs = ray_directions(ray_grid);
    let per_base: Vec<Vec<(RayResult, Vector2<f64>)>> = bases
        .par_iter()
        .map(|(chart, a)| {
            dirs.iter()
                .map(|b0| ray_scan(level, *chart, a, b0).map(|r| (r, *b0)))
                .collect::<Result<Vec<_>>>()
        })
        .collect::<Result<Vec<_>>>()?;

    let mut histogram = BTreeMap::new();
    let mut min_margin = f64::INFINITY;
    let mut failures = Vec::new();
    let mut failure_count = 0;
    for ((chart, a), rays) in bases.iter().zip(&per_base) {
        for (r, b0) in rays {
            *histogram.entry(r.crossings).or_insert(0) += 1;
            min_margin = min_margin.min(r.margin);
            if r.crossings != 1 || !(r.margin > 0.0) {
                failure_count += 1;
                if failures.len() < MAX_FAILURES {
                    failures.push(RayFailure {
                        chart: *chart,
                        a: [a.x, a.y],
                        direction: [b0.x, b0.y],
                        crossings: r.crossings,
                        margin: r.margin,
                    });
                }
            }
        }
    }
    Ok(StarshapeReport {
        mu: level.params.mu(),
        jacobi: c,
        first_critical_value: config.first_critical_value,
        base_grid,
        ray_grid,
        base_points: bases.len(),
        rays: bases.len() * dirs.len(),
        crossing_histogram: histogram,
        min_margin,
        failures,
        failure_count,
        pass: failure_count == 0,
    })
}
