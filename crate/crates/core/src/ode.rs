//! Adaptive Dormand–Prince 5(4) integrator for small fixed-size systems.
//!
//! The shooting and eigenvalue solvers integrate 2- to 4-dimensional systems
//! over `[s0, s1]` with tight relative tolerances. Output is delivered through
//! an observer called after every accepted step and at every requested output
//! abscissa (the stepper lands on those exactly).

use crate::error::{Error, Result};

/// What the observer wants the integrator to do after an accepted step.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Control {
    Continue,
    Stop,
}

#[derive(Clone, Copy, Debug)]
pub struct Tolerance {
    pub rtol: f64,
    pub atol: f64,
    /// Hard cap on accepted + rejected steps.
    pub max_steps: usize,
}

impl Tolerance {
    pub const fn new(rtol: f64, atol: f64) -> Self {
        Self { rtol, atol, max_steps: 200_000 }
    }
}

impl Default for Tolerance {
    fn default() -> Self {
        Self::new(1e-10, 1e-13)
    }
}

/// Result of an integration run.
#[derive(Clone, Copy, Debug)]
pub struct Outcome<const N: usize> {
    pub s: f64,
    pub y: [f64; N],
    pub stopped: bool,
    pub steps: usize,
}

const C2: f64 = 1.0 / 5.0;
const C3: f64 = 3.0 / 10.0;
const C4: f64 = 4.0 / 5.0;
const C5: f64 = 8.0 / 9.0;
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
const B1: f64 = 35.0 / 384.0;
const B3: f64 = 500.0 / 1113.0;
const B4: f64 = 125.0 / 192.0;
const B5: f64 = -2187.0 / 6784.0;
const B6: f64 = 11.0 / 84.0;
// error coefficients: b - b*
const E1: f64 = 71.0 / 57600.0;
const E3: f64 = -71.0 / 16695.0;
const E4: f64 = 71.0 / 1920.0;
const E5: f64 = -17253.0 / 339200.0;
const E6: f64 = 22.0 / 525.0;
const E7: f64 = -1.0 / 40.0;

#[inline]
fn axpy<const N: usize>(y: &[f64; N], terms: &[(f64, &[f64; N])], h: f64) -> [f64; N] {
    let mut out = *y;
    for (c, k) in terms {
        let ch = c * h;
        for i in 0..N {
            out[i] += ch * k[i];
        }
    }
    out
}

/// Integrate `y' = f(s, y)` from `s0` to `s1 > s0`.
///
/// `outputs` must be sorted increasing; the stepper visits each one inside
/// `(s0, s1]` exactly and calls `observe(s, y, true)` there. After every other
/// accepted step `observe(s, y, false)` is called. Returning [`Control::Stop`]
/// ends the run early with `stopped = true`.
pub fn integrate<const N: usize, F, O>(
    f: F,
    s0: f64,
    y0: [f64; N],
    s1: f64,
    outputs: &[f64],
    tol: Tolerance,
    mut observe: O,
) -> Result<Outcome<N>>
where
    F: Fn(f64, &[f64; N]) -> [f64; N],
    O: FnMut(f64, &[f64; N], bool) -> Control,
{
    assert!(s1 > s0, "integration interval must be increasing");
    let mut s = s0;
    let mut y = y0;
    let mut k1 = f(s, &y);
    let mut out_idx = outputs.partition_point(|&o| o <= s0);

    // initial step from the usual two-norm heuristic
    let scale = |y: &[f64; N]| -> [f64; N] {
        let mut sc = [0.0; N];
        for i in 0..N {
            sc[i] = tol.atol + tol.rtol * y[i].abs();
        }
        sc
    };
    let sc0 = scale(&y);
    let d0 = rms(&y, &sc0);
    let d1 = rms(&k1, &sc0);
    let mut h = if d0 < 1e-5 || d1 < 1e-5 { 1e-6 * (s1 - s0).max(s0.abs()) } else { 0.01 * d0 / d1 };
    h = h.min(s1 - s0).max(1e-14 * s0.abs().max(1e-300));

    let mut steps = 0usize;
    let mut last_err: f64 = 1e-4;
    while s < s1 {
        steps += 1;
        if steps > tol.max_steps {
            return Err(Error::StepFailure { s, reason: "step budget exhausted".into() });
        }
        // land exactly on the next output abscissa or the endpoint
        let target = if out_idx < outputs.len() && outputs[out_idx] < s1 { outputs[out_idx] } else { s1 };
        let landing = s + h >= target - 1e-13 * target.abs();
        if landing {
            h = target - s;
        }
        if h <= 0.0 {
            // an output coincides with the current abscissa
            s = target;
            let is_out = out_idx < outputs.len() && outputs[out_idx] == target;
            if is_out {
                out_idx += 1;
            } else {
                break;
            }
            if observe(s, &y, true) == Control::Stop {
                return Ok(Outcome { s, y, stopped: true, steps });
            }
            continue;
        }
        if h <= 1e-15 * s.abs().max(1e-300) && !landing {
            return Err(Error::StepFailure { s, reason: "step size underflow".into() });
        }

        let k2 = f(s + C2 * h, &axpy(&y, &[(A21, &k1)], h));
        let k3 = f(s + C3 * h, &axpy(&y, &[(A31, &k1), (A32, &k2)], h));
        let k4 = f(s + C4 * h, &axpy(&y, &[(A41, &k1), (A42, &k2), (A43, &k3)], h));
        let k5 = f(s + C5 * h, &axpy(&y, &[(A51, &k1), (A52, &k2), (A53, &k3), (A54, &k4)], h));
        let k6 = f(s + h, &axpy(&y, &[(A61, &k1), (A62, &k2), (A63, &k3), (A64, &k4), (A65, &k5)], h));
        let ynew = axpy(&y, &[(B1, &k1), (B3, &k3), (B4, &k4), (B5, &k5), (B6, &k6)], h);
        let k7 = f(s + h, &ynew);

        let mut err = 0.0;
        for i in 0..N {
            let e = h * (E1 * k1[i] + E3 * k3[i] + E4 * k4[i] + E5 * k5[i] + E6 * k6[i] + E7 * k7[i]);
            let sc = tol.atol + tol.rtol * y[i].abs().max(ynew[i].abs());
            err += (e / sc).powi(2);
        }
        let err = (err / N as f64).sqrt();
        if !err.is_finite() {
            h *= 0.2;
            continue;
        }

        if err <= 1.0 {
            s = if landing { target } else { s + h };
            y = ynew;
            k1 = k7;
            // PI controller
            let fac = 0.9 * err.max(1e-10).powf(-0.7 / 5.0) * last_err.powf(0.4 / 5.0);
            last_err = err.max(1e-4);
            let h_next = h * fac.clamp(0.2, 5.0);
            let is_out = landing && out_idx < outputs.len() && outputs[out_idx] == target;
            if is_out {
                out_idx += 1;
            }
            if observe(s, &y, is_out) == Control::Stop {
                return Ok(Outcome { s, y, stopped: true, steps });
            }
            h = h_next;
        } else {
            h *= (0.9 * err.powf(-0.2)).clamp(0.1, 0.9);
        }
    }
    Ok(Outcome { s, y, stopped: false, steps })
}

fn rms<const N: usize>(v: &[f64; N], sc: &[f64; N]) -> f64 {
    (v.iter().zip(sc).map(|(x, s)| (x / s).powi(2)).sum::<f64>() / N as f64).sqrt()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn harmonic_oscillator_period() {
        let out = integrate(
            |_, y: &[f64; 2]| [y[1], -y[0]],
            0.0,
            [1.0, 0.0],
            2.0 * std::f64::consts::PI,
            &[],
            Tolerance::new(1e-12, 1e-14),
            |_, _, _| Control::Continue,
        )
        .unwrap();
        assert!((out.y[0] - 1.0).abs() < 1e-10);
        assert!(out.y[1].abs() < 1e-10);
    }

    #[test]
    fn lands_on_outputs() {
        let outs = [0.5, 1.0, 1.5];
        let mut seen = Vec::new();
        integrate(
            |_, y: &[f64; 1]| [y[0]],
            0.0,
            [1.0],
            2.0,
            &outs,
            Tolerance::new(1e-12, 1e-14),
            |s, y, is_out| {
                if is_out {
                    seen.push((s, y[0]));
                }
                Control::Continue
            },
        )
        .unwrap();
        assert_eq!(seen.len(), 3);
        for ((s, y), o) in seen.iter().zip(outs) {
            assert_eq!(*s, o);
            assert!((y - o.exp()).abs() < 1e-10 * o.exp());
        }
    }

    #[test]
    fn observer_can_stop() {
        let out = integrate(
            |_, y: &[f64; 1]| [y[0]],
            0.0,
            [1.0],
            10.0,
            &[],
            Tolerance::default(),
            |_, y, _| if y[0] > 5.0 { Control::Stop } else { Control::Continue },
        )
        .unwrap();
        assert!(out.stopped);
        assert!(out.s < 10.0);
    }
}
