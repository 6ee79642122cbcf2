//! Dormand–Prince 5(4) stepper with Hairer's 4th-order continuous extension.

pub(crate) const DIM: usize = 6;
pub type StateVec = [f64; DIM];

const A21: f64 = 1.0 / 5.0;
const A31: f64 = 3.0 / 40.0;
const A32: f64 = 9.0 / 40.0;
const A41: f64 = 44.0 / 45.0;
const A42: f64 = -56.0 / 15.0;
const A43: f64 = 32.0 / 9.0;
const A51: f64 = 19372.0 / 6561.0;
const A52: f64 = -25360.0 / 2187.0;
const A53: f64 = 64448.0 / 6561.0;
const A54: f64 = -212.0 / 729.0;
const A61: f64 = 9017.0 / 3168.0;
const A62: f64 = -355.0 / 33.0;
const A63: f64 = 46732.0 / 5247.0;
const A64: f64 = 49.0 / 176.0;
const A65: f64 = -5103.0 / 18656.0;
const A71: f64 = 35.0 / 384.0;
const A73: f64 = 500.0 / 1113.0;
const A74: f64 = 125.0 / 192.0;
const A75: f64 = -2187.0 / 6784.0;
const A76: f64 = 11.0 / 84.0;

const E1: f64 = 71.0 / 57600.0;
const E3: f64 = -71.0 / 16695.0;
const E4: f64 = 71.0 / 1920.0;
const E5: f64 = -17253.0 / 339200.0;
const E6: f64 = 22.0 / 525.0;
const E7: f64 = -1.0 / 40.0;

const D1: f64 = -12715105075.0 / 11282082432.0;
const D3: f64 = 87487479700.0 / 32700410799.0;
const D4: f64 = -10690763975.0 / 1880347072.0;
const D5: f64 = 701980252875.0 / 199316789632.0;
const D6: f64 = -1453857185.0 / 822651844.0;
const D7: f64 = 69997945.0 / 29380423.0;

#[inline]
fn axpy(y: &StateVec, terms: &[(f64, &StateVec)], h: f64) -> StateVec {
    let mut out = *y;
    for (i, slot) in out.iter_mut().enumerate() {
        let mut acc = 0.0;
        for (coef, k) in terms {
            acc += coef * k[i];
        }
        *slot += h * acc;
    }
    out
}

/// Outcome of one trial step.
pub(crate) struct Trial {
    pub y1: StateVec,
    pub k7: StateVec,
    pub err: f64,
    pub cont: [StateVec; 5],
}

/// One trial step from `y0` with slope `k1`. Returns `None` when a stage
/// evaluation fails (singular field), which the driver treats as rejection.
pub(crate) fn trial_step<F>(rhs: &F, y0: &StateVec, k1: &StateVec, h: f64, rtol: f64, atol: f64) -> Option<Trial>
where
    F: Fn(&StateVec) -> Option<StateVec>,
{
    let k2 = rhs(&axpy(y0, &[(A21, k1)], h))?;
    let k3 = rhs(&axpy(y0, &[(A31, k1), (A32, &k2)], h))?;
    let k4 = rhs(&axpy(y0, &[(A41, k1), (A42, &k2), (A43, &k3)], h))?;
    let k5 = rhs(&axpy(y0, &[(A51, k1), (A52, &k2), (A53, &k3), (A54, &k4)], h))?;
    let k6 = rhs(&axpy(
        y0,
        &[(A61, k1), (A62, &k2), (A63, &k3), (A64, &k4), (A65, &k5)],
        h,
    ))?;
    let y1 = axpy(y0, &[(A71, k1), (A73, &k3), (A74, &k4), (A75, &k5), (A76, &k6)], h);
    let k7 = rhs(&y1)?;

    let mut sum = 0.0;
    for i in 0..DIM {
        let e = h * (E1 * k1[i] + E3 * k3[i] + E4 * k4[i] + E5 * k5[i] + E6 * k6[i] + E7 * k7[i]);
        let sc = atol + rtol * y0[i].abs().max(y1[i].abs());
        sum += (e / sc) * (e / sc);
    }
    let err = (sum / DIM as f64).sqrt();
    if !err.is_finite() || !y1.iter().all(|v| v.is_finite()) {
        return None;
    }

    let mut cont = [[0.0; DIM]; 5];
    for i in 0..DIM {
        let dy = y1[i] - y0[i];
        let bspl = h * k1[i] - dy;
        cont[0][i] = y0[i];
        cont[1][i] = dy;
        cont[2][i] = bspl;
        cont[3][i] = dy - h * k7[i] - bspl;
        cont[4][i] = h * (D1 * k1[i] + D3 * k3[i] + D4 * k4[i] + D5 * k5[i] + D6 * k6[i] + D7 * k7[i]);
    }
    Some(Trial { y1, k7, err, cont })
}

/// Dense output at `theta in [0, 1]`.
#[inline]
pub(crate) fn dense_eval(cont: &[StateVec; 5], theta: f64) -> StateVec {
    let t1 = 1.0 - theta;
    let mut out = [0.0; DIM];
    for i in 0..DIM {
        out[i] = cont[0][i] + theta * (cont[1][i] + t1 * (cont[2][i] + theta * (cont[3][i] + t1 * cont[4][i])));
    }
    out
}

/// Derivative of the dense output with respect to `theta` (divide by `h` for time).
#[inline]
pub(crate) fn dense_derivative(cont: &[StateVec; 5], theta: f64) -> StateVec {
    let t1 = 1.0 - theta;
    let mut out = [0.0; DIM];
    for i in 0..DIM {
        let a = cont[3][i] + t1 * cont[4][i];
        let da = -cont[4][i];
        let b = cont[2][i] + theta * a;
        let db = a + theta * da;
        let c = cont[1][i] + t1 * b;
        let dc = -b + t1 * db;
        out[i] = c + theta * dc;
    }
    out
}

/// PI step-size controller after Hairer, Nørsett & Wanner.
#[derive(Debug, Clone, Copy)]
pub(crate) struct Controller {
    facold: f64,
}

const SAFE: f64 = 0.9;
const BETA: f64 = 0.04;
const EXPO1: f64 = 0.2 - BETA * 0.75;
const FACC1: f64 = 1.0 / 0.2;
const FACC2: f64 = 1.0 / 10.0;

impl Controller {
    pub fn new() -> Self {
        Self { facold: 1e-4 }
    }

    /// Next step after an accepted step with normalized error `err <= 1`.
    pub fn accept(&mut self, h: f64, err: f64) -> f64 {
        let fac11 = err.powf(EXPO1);
        let fac = (fac11 / self.facold.powf(BETA) / SAFE).clamp(FACC2, FACC1);
        self.facold = err.max(1e-4);
        h / fac
    }

    /// Retry step after a rejection; `err = None` means a failed stage.
    pub fn reject(&self, h: f64, err: Option<f64>) -> f64 {
        match err {
            Some(e) => h / FACC1.min(e.powf(EXPO1) / SAFE),
            None => 0.2 * h,
        }
    }
}

/// Starting step from the local scale of the field (Hairer's heuristic).
pub(crate) fn initial_step<F>(rhs: &F, y0: &StateVec, k1: &StateVec, rtol: f64, atol: f64, h_max: f64) -> f64
where
    F: Fn(&StateVec) -> Option<StateVec>,
{
    let mut dnf = 0.0;
    let mut dny = 0.0;
    for i in 0..DIM {
        let sk = atol + rtol * y0[i].abs();
        dnf += (k1[i] / sk).powi(2);
        dny += (y0[i] / sk).powi(2);
    }
    let mut h = if dnf <= 1e-10 || dny <= 1e-10 {
        1e-6
    } else {
        (dny / dnf).sqrt() * 0.01
    };
    h = h.min(h_max);
    let y1 = axpy(y0, &[(1.0, k1)], h);
    let Some(k2) = rhs(&y1) else {
        return h * 1e-3;
    };
    let mut der2 = 0.0;
    for i in 0..DIM {
        let sk = atol + rtol * y0[i].abs();
        der2 += ((k2[i] - k1[i]) / sk).powi(2);
    }
    let der2 = der2.sqrt() / h;
    let der12 = der2.max(dnf.sqrt());
    let h1 = if der12 <= 1e-15 {
        (h * 1e-3).max(1e-6)
    } else {
        (0.01 / der12).powf(0.2)
    };
    (100.0 * h).min(h1).min(h_max)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn dense_output_matches_endpoints_and_slopes() {
        // y' = cos-like rotation in the first two slots; remaining slots linear.
        let rhs = |y: &StateVec| Some([-y[1], y[0], 1.0, 0.0, 0.0, 0.0]);
        let y0 = [1.0, 0.0, 0.0, 0.0, 0.0, 0.0];
        let k1 = rhs(&y0).unwrap();
        let h = 0.1;
        let tr = trial_step(&rhs, &y0, &k1, h, 1e-10, 1e-12).unwrap();
        assert_eq!(dense_eval(&tr.cont, 0.0), y0);
        let end = dense_eval(&tr.cont, 1.0);
        for (e, y) in end.iter().zip(&tr.y1) {
            assert!((e - y).abs() < 1e-15);
        }
        let d0 = dense_derivative(&tr.cont, 0.0);
        let d1 = dense_derivative(&tr.cont, 1.0);
        for i in 0..DIM {
            assert!((d0[i] / h - k1[i]).abs() < 1e-12);
            assert!((d1[i] / h - tr.k7[i]).abs() < 1e-12);
        }
        let mid = dense_eval(&tr.cont, 0.5);
        assert!((mid[0] - 0.05f64.cos()).abs() < 1e-8);
        assert!((mid[1] - 0.05f64.sin()).abs() < 1e-8);
    }

    #[test]
    fn local_error_is_fifth_order() {
        let rhs = |y: &StateVec| Some([-y[1], y[0], 0.0, 0.0, 0.0, 0.0]);
        let y0 = [1.0, 0.0, 0.0, 0.0, 0.0, 0.0];
        let k1 = rhs(&y0).unwrap();
        let err_at = |h: f64| {
            let tr = trial_step(&rhs, &y0, &k1, h, 1e-10, 1e-12).unwrap();
            ((tr.y1[0] - h.cos()).powi(2) + (tr.y1[1] - h.sin()).powi(2)).sqrt()
        };
        let ratio = err_at(0.2) / err_at(0.1);
        // local error of a 5th-order method scales like h^6
        assert!(ratio > 50.0 && ratio < 80.0, "ratio {ratio}");
    }
}
