//! Homogeneous reduction of the flow, `du/dt = e^{-psi(u)} / H-bar(u)`, solved with
//! the Dormand-Prince 5(4) pair and its fifth-order continuous extension.

use crate::error::{ImcfError, Result};
use crate::spacetime::{slice_geometry, spatial_probes, SpacetimeModel};

#[cfg(test)]
const C: [f64; 7] = [0.0, 1.0 / 5.0, 3.0 / 10.0, 4.0 / 5.0, 8.0 / 9.0, 1.0, 1.0];
const A: [[f64; 6]; 7] = [
    [0.0; 6],
    [1.0 / 5.0, 0.0, 0.0, 0.0, 0.0, 0.0],
    [3.0 / 40.0, 9.0 / 40.0, 0.0, 0.0, 0.0, 0.0],
    [44.0 / 45.0, -56.0 / 15.0, 32.0 / 9.0, 0.0, 0.0, 0.0],
    [19372.0 / 6561.0, -25360.0 / 2187.0, 64448.0 / 6561.0, -212.0 / 729.0, 0.0, 0.0],
    [9017.0 / 3168.0, -355.0 / 33.0, 46732.0 / 5247.0, 49.0 / 176.0, -5103.0 / 18656.0, 0.0],
    [35.0 / 384.0, 0.0, 500.0 / 1113.0, 125.0 / 192.0, -2187.0 / 6784.0, 11.0 / 84.0],
];
/// Fifth-order solution minus embedded fourth-order solution.
const E: [f64; 7] = [
    71.0 / 57600.0,
    0.0,
    -71.0 / 16695.0,
    71.0 / 1920.0,
    -17253.0 / 339200.0,
    22.0 / 525.0,
    -1.0 / 40.0,
];
/// Continuous-extension weights.
const D: [f64; 7] = [
    -12715105075.0 / 11282082432.0,
    0.0,
    87487479700.0 / 32700410799.0,
    -10690763975.0 / 1880347072.0,
    701980252875.0 / 199316789632.0,
    -1453857185.0 / 822651844.0,
    69997945.0 / 29380423.0,
];

const MIN_STEP: f64 = 1e-14;
const MAX_STEPS: usize = 1_000_000;
const DENSE_MARGIN: f64 = 1e-2;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Dopri5Options {
    pub rtol: f64,
    pub atol: f64,
    pub h0: Option<f64>,
}

impl Dopri5Options {
    pub fn tol(tol: f64) -> Self {
        Self { rtol: tol, atol: tol, h0: None }
    }
}

/// One accepted step with its interpolation coefficients.
#[derive(Debug, Clone, Copy)]
struct DenseStep {
    t0: f64,
    h: f64,
    r: [f64; 5],
}

impl DenseStep {
    fn eval(&self, t: f64) -> f64 {
        let th = (t - self.t0) / self.h;
        let th1 = 1.0 - th;
        let r = &self.r;
        r[0] + th * (r[1] + th1 * (r[2] + th * (r[3] + th1 * r[4])))
    }
}

/// Dense-output trajectory of a scalar autonomous ODE.
#[derive(Debug, Clone)]
pub struct OdeSolution {
    steps: Vec<DenseStep>,
    t_start: f64,
    y_start: f64,
    t_end: f64,
    /// True when integration stopped early because the right-hand side left its domain.
    pub truncated: bool,
}

impl OdeSolution {
    pub fn t_span(&self) -> (f64, f64) {
        (self.t_start, self.t_end)
    }

    pub fn steps(&self) -> usize {
        self.steps.len()
    }

    pub fn final_value(&self) -> f64 {
        self.steps.last().map(|s| s.eval(s.t0 + s.h)).unwrap_or(self.y_start)
    }

    pub fn eval(&self, t: f64) -> Result<f64> {
        if !(t >= self.t_start && t <= self.t_end) {
            return Err(ImcfError::Range(format!("t = {t} outside [{}, {}]", self.t_start, self.t_end)));
        }
        if self.steps.is_empty() {
            return Ok(self.y_start);
        }
        let k = self.steps.partition_point(|s| s.t0 + s.h < t).min(self.steps.len() - 1);
        Ok(self.steps[k].eval(t))
    }
}

/// Integrates `y' = f(y)` from `(t0, y0)` to `t_end`.
///
/// An `Err(ImcfError::Domain)` from `f` shrinks the step; once the step cannot
/// shrink further the solution is returned truncated. Other errors propagate.
pub fn dopri5<F>(f: F, t0: f64, y0: f64, t_end: f64, opts: Dopri5Options) -> Result<OdeSolution>
where
    F: Fn(f64) -> Result<f64>,
{
    if !(t_end > t0) {
        return Err(ImcfError::Precondition(format!("t_end = {t_end} must exceed t0 = {t0}")));
    }
    let err_norm = |y: f64, yn: f64, e: f64| e.abs() / (opts.atol + opts.rtol * y.abs().max(yn.abs()));
    let mut sol = OdeSolution { steps: Vec::new(), t_start: t0, y_start: y0, t_end: t0, truncated: false };
    let (mut t, mut y) = (t0, y0);
    let mut k1 = f(y)?;
    let mut h = opts.h0.unwrap_or_else(|| (0.01 * (t_end - t0)).min(1e-3 * (1.0 + y.abs()) / k1.abs().max(1e-300)));
    let span = t_end - t0;
    let mut domain_limited = false;
    for _ in 0..MAX_STEPS {
        if t >= t_end {
            break;
        }
        h = h.min(t_end - t);
        if h < MIN_STEP * span.max(1.0) {
            if domain_limited {
                sol.truncated = true;
                break;
            }
            return Err(ImcfError::StiffnessFailure(h));
        }
        let mut k = [0.0; 7];
        k[0] = k1;
        let mut stage_failed = None;
        for s in 1..7 {
            let ys = y + h * (0..s).map(|j| A[s][j] * k[j]).sum::<f64>();
            match f(ys) {
                Ok(v) => k[s] = v,
                Err(e) => {
                    stage_failed = Some(e);
                    break;
                }
            }
        }
        if let Some(e) = stage_failed {
            if matches!(e, ImcfError::Domain(_)) {
                domain_limited = true;
                h *= 0.5;
                continue;
            }
            return Err(e);
        }
        let yn = y + h * (0..6).map(|j| A[6][j] * k[j]).sum::<f64>();
        let est = h * (0..7).map(|j| E[j] * k[j]).sum::<f64>();
        let err = err_norm(y, yn, est);
        if !err.is_finite() {
            return Err(ImcfError::NumericalBlowup(format!("non-finite error estimate at t = {t}")));
        }
        if err <= 1.0 {
            let r1 = yn - y;
            let r2 = h * k[0] - r1;
            let r3 = r1 - h * k[6] - r2;
            let r4 = h * (0..7).map(|j| D[j] * k[j]).sum::<f64>();
            sol.steps.push(DenseStep { t0: t, h, r: [y, r1, r2, r3, r4] });
            t += h;
            y = yn;
            k1 = k[6];
            domain_limited = false;
        }
        let fac = if err == 0.0 { 10.0 } else { (0.9 * err.powf(-0.2)).clamp(0.2, 10.0) };
        h *= if err <= 1.0 { fac } else { fac.min(1.0) };
    }
    if t < t_end && !sol.truncated {
        return Err(ImcfError::StiffnessFailure(h));
    }
    sol.t_end = t.min(t_end);
    if let Some(last) = sol.steps.last_mut() {
        if t >= t_end {
            // absorb rounding in the accumulated time
            last.h = t_end - last.t0;
        }
    }
    Ok(sol)
}

fn check_homogeneous(model: &SpacetimeModel, x0: f64) -> Result<()> {
    let probes = spatial_probes(model.periods());
    let s0 = model.sigma(x0, &probes[0]);
    let p0 = model.psi(x0, &probes[0]);
    for x in &probes {
        let (_, grad) = model.dpsi(x0, x);
        let flat = model.sigma(x0, x).sub(&s0).max_abs() <= 1e-14 * s0.max_abs()
            && (model.psi(x0, x) - p0).abs() <= 1e-14 * p0.abs().max(1.0)
            && grad.norm() == 0.0;
        if !flat {
            return Err(ImcfError::Precondition(format!("model {} is not spatially homogeneous", model.name())));
        }
    }
    Ok(())
}

/// Reference trajectory for spatially constant data `u(0) = u0` in a homogeneous model.
pub fn homogeneous_oracle(model: &SpacetimeModel, u0: f64, t_max: f64, tol: f64) -> Result<OdeSolution> {
    check_homogeneous(model, u0)?;
    let x = vec![0.0; model.dim()];
    let rhs = |u: f64| -> Result<f64> {
        let sg = slice_geometry(model, u, &x)?;
        if !(sg.hbar_trace > 0.0) {
            return Err(ImcfError::NonPositiveH { value: sg.hbar_trace, point: 0 });
        }
        Ok(1.0 / (sg.conf * sg.hbar_trace))
    };
    // the continuous extension is one order below the step, so the step runs tighter
    dopri5(rhs, 0.0, u0, t_max, Dopri5Options::tol(tol * DENSE_MARGIN))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn tableau_is_consistent() {
        for (s, row) in A.iter().enumerate() {
            let sum: f64 = row.iter().sum();
            let c = if s == 6 { 1.0 } else { C[s] };
            assert!((sum - c).abs() < 1e-14, "row {s}");
        }
        assert!(E.iter().sum::<f64>().abs() < 1e-15);
    }

    #[test]
    fn exponential_growth_with_dense_output() {
        let sol = dopri5(Ok, 0.0, 1.0, 2.0, Dopri5Options::tol(1e-12)).unwrap();
        for k in 0..=200 {
            let t = 0.01 * k as f64;
            assert!((sol.eval(t).unwrap() - t.exp()).abs() < 1e-10 * t.exp(), "t = {t}");
        }
        assert!(sol.eval(2.5).is_err());
        assert!(!sol.truncated);
    }

    #[test]
    fn blowup_is_reported_as_stiffness() {
        // y' = y^2 from y = 1 explodes at t = 1
        let r = dopri5(|y| Ok(y * y), 0.0, 1.0, 2.0, Dopri5Options::tol(1e-10));
        assert!(matches!(r, Err(ImcfError::StiffnessFailure(_)) | Err(ImcfError::NumericalBlowup(_))), "{r:?}");
    }

    #[test]
    fn domain_edge_truncates() {
        let f = |y: f64| if y < 1.0 { Ok(1.0) } else { Err(ImcfError::Domain("edge".into())) };
        let sol = dopri5(f, 0.0, 0.0, 5.0, Dopri5Options::tol(1e-10)).unwrap();
        assert!(sol.truncated);
        assert!(sol.t_span().1 < 1.0 && sol.t_span().1 > 0.99);
    }
}
