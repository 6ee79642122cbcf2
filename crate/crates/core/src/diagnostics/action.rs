//! Liouville action of chords by Gauss–Legendre quadrature on the dense
//! output.
//!
//! The integrand `-b . da/dt` is the canonical one-form evaluated on the
//! velocity. The chart transition preserves that form, so values taken in
//! different charts can be summed directly.

use crate::error::{Error, Result};
use crate::integrator::Trajectory;
use crate::shooting::Chord;

/// Nodes and weights of the `n`-point Gauss–Legendre rule on `[-1, 1]`.
pub fn gauss_legendre(n: usize) -> Vec<(f64, f64)> {
    let mut out = Vec::with_capacity(n);
    for i in 0..n {
        // Chebyshev guess, then Newton on P_n.
        let mut x = (std::f64::consts::PI * (i as f64 + 0.75) / (n as f64 + 0.5)).cos();
        let mut dp = 1.0;
        for _ in 0..100 {
            let (mut p0, mut p1) = (1.0, x);
            for k in 2..=n {
                let p2 = ((2 * k - 1) as f64 * x * p1 - (k - 1) as f64 * p0) / k as f64;
                p0 = p1;
                p1 = p2;
            }
            dp = n as f64 * (x * p1 - p0) / (x * x - 1.0);
            let dx = p1 / dp;
            x -= dx;
            if dx.abs() < 1e-16 {
                break;
            }
        }
        out.push((x, 2.0 / ((1.0 - x * x) * dp * dp)));
    }
    out.sort_by(|a, b| a.0.total_cmp(&b.0));
    out
}

fn integrand(traj: &Trajectory, t: f64) -> Result<f64> {
    let i = traj
        .step_index(t)
        .ok_or_else(|| Error::InvalidParameter(format!("t = {t} outside the trajectory")))?;
    let step = &traj.steps()[i];
    let p = step.eval(t);
    if p.frame.chart().is_none() {
        return Err(Error::InvalidParameter("action needs a regularized trajectory".into()));
    }
    let d = step.derivative(t);
    Ok(-(p.y[2] * d[0] + p.y[3] * d[1]))
}

/// `∫ -b . da` over the partition `breaks` (increasing), with `nodes` points
/// per interval.
pub fn liouville_integral_on(traj: &Trajectory, breaks: &[f64], nodes: usize) -> Result<f64> {
    let rule = gauss_legendre(nodes);
    let mut total = 0.0;
    for w in breaks.windows(2) {
        let (lo, hi) = (w[0], w[1]);
        let (mid, half) = (0.5 * (lo + hi), 0.5 * (hi - lo));
        for &(x, wt) in &rule {
            total += wt * half * integrand(traj, mid + half * x)?;
        }
    }
    Ok(total)
}

/// Step boundaries of `traj` up to `t_end`.
pub fn step_breaks(traj: &Trajectory, t_end: f64) -> Vec<f64> {
    let mut breaks: Vec<f64> = traj.steps().iter().map(|s| s.t0).take_while(|&t| t < t_end).collect();
    breaks.push(t_end);
    breaks
}

/// `∫ -b . da` from `0` to `t_end` on the step partition.
pub fn liouville_integral(traj: &Trajectory, t_end: f64, nodes: usize) -> Result<f64> {
    liouville_integral_on(traj, &step_breaks(traj, t_end), nodes)
}

/// Action of the forward half, from the shot to the end collision.
pub fn half_action(chord: &Chord, nodes: usize) -> Result<f64> {
    liouville_integral(&chord.forward, chord.half_tau, nodes)
}

fn full_action(chord: &Chord, nodes: usize) -> Result<f64> {
    // The backward half runs against the chord's orientation.
    let fwd = liouville_integral(&chord.forward, chord.half_tau, nodes)?;
    let bwd = liouville_integral(&chord.backward, chord.half_tau_backward, nodes)?;
    Ok(fwd - bwd)
}

/// Agreement required between the two quadrature resolutions.
pub const RESOLUTION_TOL: f64 = 1e-6;

/// The Liouville action of the whole chord. Computed with 4 and 8 nodes per
/// step; the finer value is returned.
pub fn chord_action(chord: &Chord) -> Result<f64> {
    let coarse = full_action(chord, 4)?;
    let fine = full_action(chord, 8)?;
    if !((coarse - fine).abs() < RESOLUTION_TOL) {
        return Err(Error::Integrity(format!(
            "action depends on the quadrature resolution: {coarse} vs {fine}"
        )));
    }
    if !(fine > 0.0) {
        return Err(Error::Integrity(format!("non-positive action {fine}")));
    }
    Ok(fine)
}

/// The action recomputed on a uniform partition of each half into `pieces`
/// intervals, ignoring the step boundaries.
pub fn chord_action_resampled(chord: &Chord, pieces: usize, nodes: usize) -> Result<f64> {
    let uniform = |t_end: f64| -> Vec<f64> { (0..=pieces).map(|i| t_end * i as f64 / pieces as f64).collect() };
    let fwd = liouville_integral_on(&chord.forward, &uniform(chord.half_tau), nodes)?;
    let bwd = liouville_integral_on(&chord.backward, &uniform(chord.half_tau_backward), nodes)?;
    Ok(fwd - bwd)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn gauss_legendre_integrates_polynomials() {
        for n in [1, 2, 4, 8] {
            let rule = gauss_legendre(n);
            let total: f64 = rule.iter().map(|(_, w)| w).sum();
            assert!((total - 2.0).abs() < 1e-14);
            let deg = 2 * n - 1;
            let exact = if deg % 2 == 1 { 0.0 } else { 2.0 / (deg + 1) as f64 };
            let got: f64 = rule.iter().map(|(x, w)| w * x.powi(deg as i32)).sum();
            assert!((got - exact).abs() < 1e-14);
            let even = 2 * n - 2;
            let got: f64 = rule.iter().map(|(x, w)| w * x.powi(even as i32)).sum();
            assert!((got - 2.0 / (even + 1) as f64).abs() < 1e-14, "n = {n}");
        }
    }
}
