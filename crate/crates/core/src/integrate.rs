//! Adaptive Dormand–Prince 5(4) stepper with continuous (dense) output for
//! complex matrix-valued ODEs `y' = f(t, y)`.
//!
//! State vectors are `n × 1` matrices so that the same stepper drives both
//! wave functions and density matrices.

use num_complex::Complex64 as C64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::hilbert::CMatrix;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Tolerances {
    pub rtol: f64,
    pub atol: f64,
    /// Upper bound on a single step; `None` means unbounded.
    #[serde(default)]
    pub h_max: Option<f64>,
    pub max_steps: usize,
}

impl Default for Tolerances {
    fn default() -> Self {
        Self { rtol: 1e-8, atol: 1e-10, h_max: None, max_steps: 50_000_000 }
    }
}

impl Tolerances {
    pub fn tightened(&self, factor: f64) -> Self {
        Self { rtol: self.rtol / factor, atol: self.atol / factor, ..*self }
    }
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

// dense output (Hairer & Wanner, contd5)
const D1: f64 = -12715105075.0 / 11282082432.0;
const D3: f64 = 87487479700.0 / 32700410799.0;
const D4: f64 = -10690763975.0 / 1880347072.0;
const D5: f64 = 701980252875.0 / 199316789632.0;
const D6: f64 = -1453857185.0 / 822651844.0;
const D7: f64 = 69997945.0 / 29380423.0;

/// Record of the most recent accepted step, for dense output.
#[derive(Debug, Clone, Copy)]
pub struct AcceptedStep {
    pub t_start: f64,
    pub h: f64,
}

#[derive(Debug, Clone)]
pub struct Dopri5 {
    tol: Tolerances,
    h: f64,
    k: [CMatrix; 7],
    y_start: CMatrix,
    y_stage: CMatrix,
    /// `k[6]` holds `f(t, y)` at the current point.
    fsal_valid: bool,
    last: Option<AcceptedStep>,
    steps: usize,
}

fn axpy(dst: &mut CMatrix, a: C64, x: &CMatrix) {
    for (d, s) in dst.as_mut_slice().iter_mut().zip(x.as_slice()) {
        *d += a * s;
    }
}

fn rms_scaled(err: &CMatrix, y0: &CMatrix, y1: &CMatrix, tol: &Tolerances) -> f64 {
    let n = err.len().max(1) as f64;
    let sum: f64 = err
        .iter()
        .zip(y0.iter())
        .zip(y1.iter())
        .map(|((e, a), b)| {
            let sc = tol.atol + tol.rtol * a.norm().max(b.norm());
            (e.norm() / sc).powi(2)
        })
        .sum();
    (sum / n).sqrt()
}

impl Dopri5 {
    pub fn new(shape: (usize, usize), tol: Tolerances) -> Self {
        let z = CMatrix::zeros(shape.0, shape.1);
        Self {
            tol,
            h: 0.0,
            k: std::array::from_fn(|_| z.clone()),
            y_start: z.clone(),
            y_stage: z,
            fsal_valid: false,
            last: None,
            steps: 0,
        }
    }

    pub fn tolerances(&self) -> &Tolerances {
        &self.tol
    }

    /// Forget cached derivative information (after the state was modified
    /// outside the integrator, e.g. by a quantum jump).
    pub fn reset(&mut self) {
        self.fsal_valid = false;
        self.last = None;
    }

    pub fn last_step(&self) -> Option<AcceptedStep> {
        self.last
    }

    pub fn steps_taken(&self) -> usize {
        self.steps
    }

    fn initial_step<F>(&mut self, f: &mut F, t: f64, y: &CMatrix, span: f64) -> f64
    where
        F: FnMut(f64, &CMatrix, &mut CMatrix),
    {
        let f0 = &self.k[6];
        let scale = |v: &CMatrix| {
            let n = v.len().max(1) as f64;
            (v.iter()
                .zip(y.iter())
                .map(|(a, b)| (a.norm() / (self.tol.atol + self.tol.rtol * b.norm())).powi(2))
                .sum::<f64>()
                / n)
                .sqrt()
        };
        let d0 = scale(y);
        let d1 = scale(f0);
        let mut h0 = if d0 < 1e-5 || d1 < 1e-5 { 1e-6 } else { 0.01 * d0 / d1 };
        h0 = h0.min(span);
        // one explicit Euler probe for the second derivative
        self.y_stage.copy_from(y);
        axpy(&mut self.y_stage, C64::from(h0), f0);
        let mut f1 = CMatrix::zeros(y.nrows(), y.ncols());
        f(t + h0, &self.y_stage, &mut f1);
        let d2 = scale(&(f1 - &self.k[6])) / h0;
        let h1 = if d1.max(d2) <= 1e-15 {
            (h0 * 1e-3).max(1e-6)
        } else {
            (0.01 / d1.max(d2)).powf(0.2)
        };
        (100.0 * h0).min(h1).min(span)
    }

    /// Takes one accepted step from `t` towards `t_end` (never past it).
    /// Updates `t` and `y` in place.
    pub fn step<F>(&mut self, f: &mut F, t: &mut f64, y: &mut CMatrix, t_end: f64) -> Result<AcceptedStep>
    where
        F: FnMut(f64, &CMatrix, &mut CMatrix),
    {
        let span = t_end - *t;
        if span <= 0.0 {
            return Err(Error::Integration(format!("step requested past the end point ({} >= {t_end})", *t)));
        }
        if !self.fsal_valid {
            f(*t, y, &mut self.k[6]);
            self.fsal_valid = true;
            if self.h <= 0.0 || self.last.is_none() {
                self.h = self.initial_step(f, *t, y, span);
            }
        }
        self.k.swap(0, 6);
        self.y_start.copy_from(y);
        let mut h = self.h.min(span);
        if let Some(h_max) = self.tol.h_max {
            h = h.min(h_max);
        }
        loop {
            if self.steps >= self.tol.max_steps {
                return Err(Error::Integration(format!("exceeded {} steps", self.tol.max_steps)));
            }
            if !(h > 1e-15 * t.abs().max(1.0)) {
                return Err(Error::Integration(format!("step size underflow at t = {}", *t)));
            }
            self.steps += 1;
            let t0 = *t;
            let hc = |a: f64| C64::from(h * a);

            macro_rules! stage {
                ($dst:expr, $c:expr; $($ai:expr => $ki:expr),+) => {{
                    self.y_stage.copy_from(&self.y_start);
                    $( axpy(&mut self.y_stage, hc($ai), &self.k[$ki]); )+
                    let (ys, ks) = (&self.y_stage, &mut self.k[$dst]);
                    f(t0 + $c * h, ys, ks);
                }};
            }
            stage!(1, C2; A21 => 0);
            stage!(2, C3; A31 => 0, A32 => 1);
            stage!(3, C4; A41 => 0, A42 => 1, A43 => 2);
            stage!(4, C5; A51 => 0, A52 => 1, A53 => 2, A54 => 3);
            stage!(5, 1.0; A61 => 0, A62 => 1, A63 => 2, A64 => 3, A65 => 4);
            // 5th-order solution into y
            y.copy_from(&self.y_start);
            for (a, i) in [(A71, 0), (A73, 2), (A74, 3), (A75, 4), (A76, 5)] {
                axpy(y, hc(a), &self.k[i]);
            }
            {
                let (ys, ks) = (&*y, &mut self.k[6]);
                f(t0 + h, ys, ks);
            }
            // error estimate into y_stage
            self.y_stage.fill(C64::from(0.0));
            for (e, i) in [(E1, 0), (E3, 2), (E4, 3), (E5, 4), (E6, 5), (E7, 6)] {
                axpy(&mut self.y_stage, hc(e), &self.k[i]);
            }
            let err = rms_scaled(&self.y_stage, &self.y_start, y, &self.tol);
            if err.is_finite() && err <= 1.0 {
                let factor = if err == 0.0 { 5.0 } else { (0.9 * err.powf(-0.2)).clamp(0.2, 5.0) };
                let accepted = AcceptedStep { t_start: t0, h };
                *t = if h == span { t_end } else { t0 + h };
                // a step clipped to t_end leaves the nominal size alone
                if h < span {
                    self.h = h * factor;
                }
                self.last = Some(accepted);
                return Ok(accepted);
            }
            let factor = if err.is_finite() { (0.9 * err.powf(-0.2)).clamp(0.1, 0.9) } else { 0.1 };
            h *= factor;
            self.h = h;
            y.copy_from(&self.y_start);
        }
    }

    /// State at `t_start + theta·h` within the last accepted step,
    /// `theta ∈ [0, 1]`. `y_end` must be the state at the end of that step.
    pub fn dense_output(&self, theta: f64, y_end: &CMatrix) -> Result<CMatrix> {
        let Some(last) = self.last else {
            return Err(Error::Integration("no accepted step for dense output".into()));
        };
        let h = C64::from(last.h);
        let th = C64::from(theta);
        let th1 = C64::from(1.0 - theta);
        let y0 = &self.y_start;
        let k = &self.k;
        let ydiff = y_end - y0;
        let bspl = &k[0] * h - &ydiff;
        let rc4 = &ydiff - &k[6] * h - &bspl;
        let rc5 = (&k[0] * C64::from(D1)
            + &k[2] * C64::from(D3)
            + &k[3] * C64::from(D4)
            + &k[4] * C64::from(D5)
            + &k[5] * C64::from(D6)
            + &k[6] * C64::from(D7))
            * h;
        let inner = (rc4 + rc5 * th1) * th + bspl;
        Ok(y0 + (ydiff + inner * th1) * th)
    }
}

/// Integrates `y' = f(t, y)` and returns the state at each requested time
/// (the first entry is `y0` at `times[0]`).
pub fn integrate_to_grid<F>(mut f: F, y0: &CMatrix, times: &[f64], tol: Tolerances) -> Result<Vec<CMatrix>>
where
    F: FnMut(f64, &CMatrix, &mut CMatrix),
{
    check_grid(times)?;
    let mut solver = Dopri5::new(y0.shape(), tol);
    let mut y = y0.clone();
    let mut t = times[0];
    let mut out = Vec::with_capacity(times.len());
    out.push(y.clone());
    for &tg in &times[1..] {
        while t < tg {
            solver.step(&mut f, &mut t, &mut y, tg)?;
        }
        out.push(y.clone());
    }
    Ok(out)
}

pub(crate) fn check_grid(times: &[f64]) -> Result<()> {
    if times.is_empty() {
        return Err(Error::config("time grid is empty"));
    }
    if times.iter().any(|t| !t.is_finite()) || times.windows(2).any(|w| w[1] <= w[0]) {
        return Err(Error::config("time grid must be finite and strictly increasing"));
    }
    Ok(())
}

/// `n` equally spaced points from `t0` to `t1` inclusive.
pub fn uniform_grid(t0: f64, t1: f64, n: usize) -> Vec<f64> {
    if n <= 1 {
        return vec![t0];
    }
    (0..n).map(|i| t0 + (t1 - t0) * i as f64 / (n - 1) as f64).collect()
}
