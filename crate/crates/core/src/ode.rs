//! Adaptive Dormand–Prince 5(4) integrator for complex first-order systems.

use crate::error::{Error, Result};
use crate::linalg::c64;

#[derive(Debug, Clone, Copy)]
pub struct OdeOptions {
    pub rtol: f64,
    pub atol: f64,
    /// Initial step; chosen from the output spacing when `None`.
    pub h0: Option<f64>,
    pub max_steps: usize,
}

impl Default for OdeOptions {
    fn default() -> Self {
        Self {
            rtol: 1e-10,
            atol: 1e-12,
            h0: None,
            max_steps: 5_000_000,
        }
    }
}

const C: [f64; 7] = [0.0, 1.0 / 5.0, 3.0 / 10.0, 4.0 / 5.0, 8.0 / 9.0, 1.0, 1.0];
const A: [[f64; 6]; 7] = [
    [0.0; 6],
    [1.0 / 5.0, 0.0, 0.0, 0.0, 0.0, 0.0],
    [3.0 / 40.0, 9.0 / 40.0, 0.0, 0.0, 0.0, 0.0],
    [44.0 / 45.0, -56.0 / 15.0, 32.0 / 9.0, 0.0, 0.0, 0.0],
    [
        19372.0 / 6561.0,
        -25360.0 / 2187.0,
        64448.0 / 6561.0,
        -212.0 / 729.0,
        0.0,
        0.0,
    ],
    [
        9017.0 / 3168.0,
        -355.0 / 33.0,
        46732.0 / 5247.0,
        49.0 / 176.0,
        -5103.0 / 18656.0,
        0.0,
    ],
    [
        35.0 / 384.0,
        0.0,
        500.0 / 1113.0,
        125.0 / 192.0,
        -2187.0 / 6784.0,
        11.0 / 84.0,
    ],
];
// fifth-order minus embedded fourth-order weights
const E: [f64; 7] = [
    71.0 / 57600.0,
    0.0,
    -71.0 / 16695.0,
    71.0 / 1920.0,
    -17253.0 / 339200.0,
    22.0 / 525.0,
    -1.0 / 40.0,
];

/// Integrates `dy/dt = f(t, y)` from `(t0, y0)` and returns `y` at each of
/// `t_out` (ascending, all ≥ `t0`).
pub fn integrate<F>(mut f: F, t0: f64, y0: &[c64], t_out: &[f64], opts: OdeOptions) -> Result<Vec<Vec<c64>>>
where
    F: FnMut(f64, &[c64], &mut [c64]),
{
    if t_out.windows(2).any(|w| w[1] < w[0]) || t_out.first().is_some_and(|&t| t < t0) {
        return Err(Error::domain("output times must be ascending and >= t0"));
    }
    let n = y0.len();
    let mut y = y0.to_vec();
    let mut t = t0;
    let mut k: Vec<Vec<c64>> = vec![vec![c64::new(0.0, 0.0); n]; 7];
    let mut tmp = vec![c64::new(0.0, 0.0); n];
    let mut y_new = vec![c64::new(0.0, 0.0); n];
    f(t, &y, &mut k[0]);

    let span = t_out.last().map_or(0.0, |&e| e - t0);
    let mut h = opts.h0.unwrap_or((span * 1e-4).max(1e-9));
    let mut out = Vec::with_capacity(t_out.len());
    let mut steps = 0usize;

    for &target in t_out {
        while t < target {
            steps += 1;
            if steps > opts.max_steps {
                return Err(Error::StiffnessFailure(t));
            }
            let last = t + h >= target;
            let hs = if last { target - t } else { h };

            for s in 1..7 {
                for i in 0..n {
                    let mut acc = y[i];
                    for (j, kj) in k.iter().enumerate().take(s) {
                        if A[s][j] != 0.0 {
                            acc += kj[i] * (hs * A[s][j]);
                        }
                    }
                    tmp[i] = acc;
                }
                let (_, tail) = k.split_at_mut(s);
                f(t + C[s] * hs, &tmp, &mut tail[0]);
                if s == 6 {
                    y_new.copy_from_slice(&tmp);
                }
            }

            let mut err = 0.0;
            for i in 0..n {
                let mut e = c64::new(0.0, 0.0);
                for (s, ks) in k.iter().enumerate() {
                    if E[s] != 0.0 {
                        e += ks[i] * E[s];
                    }
                }
                let scale = opts.atol + opts.rtol * y[i].norm().max(y_new[i].norm());
                err += (e.norm() * hs / scale).powi(2);
            }
            let err = (err / n.max(1) as f64).sqrt();
            let err = if err.is_finite() { err } else { f64::INFINITY };

            if err <= 1.0 {
                t = if last { target } else { t + hs };
                y.copy_from_slice(&y_new);
                k.swap(0, 6);
            }
            let factor = if err == 0.0 {
                5.0
            } else {
                (0.9 * err.powf(-0.2)).clamp(0.2, 5.0)
            };
            if !last || err > 1.0 {
                h = hs * factor;
            }
            if h < 1e-14 * t.abs().max(1.0) {
                return Err(Error::StiffnessFailure(t));
            }
        }
        out.push(y.clone());
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn exponential_decay() {
        let ts: Vec<f64> = (1..=10).map(|k| k as f64 * 0.5).collect();
        let ys = integrate(
            |_, y, dy| dy[0] = -y[0] * 1.3,
            0.0,
            &[c64::new(1.0, 0.0)],
            &ts,
            OdeOptions::default(),
        )
        .unwrap();
        for (t, y) in ts.iter().zip(&ys) {
            assert!((y[0].re - (-1.3 * t).exp()).abs() < 1e-10);
        }
    }

    #[test]
    fn complex_rotation() {
        let w = 7.0;
        let ts = [0.0, 1.0, 10.0];
        let ys = integrate(
            |_, y, dy| dy[0] = c64::new(0.0, -w) * y[0],
            0.0,
            &[c64::new(1.0, 0.0)],
            &ts,
            OdeOptions::default(),
        )
        .unwrap();
        for (t, y) in ts.iter().zip(&ys) {
            let want = c64::new(0.0, -w * t).exp();
            assert!((y[0] - want).norm() < 1e-8);
        }
    }

    #[test]
    fn blow_up_is_reported() {
        let r = integrate(
            |_, y, dy| dy[0] = y[0] * y[0],
            0.0,
            &[c64::new(1.0, 0.0)],
            &[2.0],
            OdeOptions::default(),
        );
        assert!(matches!(r, Err(Error::StiffnessFailure(_))));
    }

    #[test]
    fn rejects_unsorted_outputs() {
        let r = integrate(|_, _, _| {}, 0.0, &[c64::new(1.0, 0.0)], &[1.0, 0.5], OdeOptions::default());
        assert!(r.is_err());
    }
}
