//! Fixed-step gradient descent that checks the descent inequality at every step.
//!
//! For a concavifiable objective with concavifier `α` and a step `η ≤ 1/α`,
//! each step satisfies `f(x_{t+1}) ≤ f(x_t) − (η/2)‖∇f(x_t)‖²`. The trace records
//! the slack of that inequality so runs can be audited after the fact.

use crate::eigen::norm2;
use crate::error::{Error, Result};
use crate::objective::Objective;

/// Default relative tolerance for the descent and monotonicity checks.
pub const DEFAULT_DESCENT_TOL: f64 = 1e-9;

#[derive(Clone, Debug, PartialEq)]
pub struct DescentConfig {
    pub step_size: f64,
    pub max_steps: usize,
    pub initial: Vec<f64>,
    /// Relative tolerance: a gap counts as satisfied when `g_t ≥ −tol·max(1,|f(x_t)|)`.
    pub tolerance: f64,
    /// Stop early once `‖∇f‖` drops below this value.
    pub grad_norm_stop: Option<f64>,
}

impl DescentConfig {
    pub fn new(step_size: f64, max_steps: usize, initial: Vec<f64>) -> Self {
        DescentConfig {
            step_size,
            max_steps,
            initial,
            tolerance: DEFAULT_DESCENT_TOL,
            grad_norm_stop: None,
        }
    }

    pub fn with_tolerance(mut self, tol: f64) -> Self {
        self.tolerance = tol;
        self
    }

    /// Enables the optional early stop at `‖∇f‖ < 1e-12`.
    pub fn with_default_grad_stop(mut self) -> Self {
        self.grad_norm_stop = Some(1e-12);
        self
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.step_size > 0.0) || !self.step_size.is_finite() {
            return Err(Error::invalid(format!(
                "step size must be positive and finite, got {}",
                self.step_size
            )));
        }
        if self.max_steps == 0 {
            return Err(Error::invalid("max steps must be at least 1"));
        }
        if !(self.tolerance >= 0.0) {
            return Err(Error::invalid("descent tolerance must be non-negative"));
        }
        if self.initial.iter().any(|v| !v.is_finite()) {
            return Err(Error::invalid("initial point has non-finite entries"));
        }
        Ok(())
    }

    pub fn tolerance_at(&self, loss: f64) -> f64 {
        self.tolerance * loss.abs().max(1.0)
    }
}

/// One row of a [`DescentTrace`].
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct TraceStep {
    pub step: usize,
    pub loss: f64,
    pub grad_norm: f64,
    /// `f(x_t) − f(x_{t+1}) − (η/2)‖∇f(x_t)‖²`; `None` on the final row.
    pub descent_gap: Option<f64>,
    pub monotone_so_far: bool,
}

#[derive(Clone, Debug, PartialEq)]
pub struct DescentTrace {
    pub step_size: f64,
    pub tolerance: f64,
    pub steps: Vec<TraceStep>,
    /// True iff the objective never increased by more than the tolerance.
    pub monotone: bool,
    /// The objective or gradient became non-finite and the run was cut short.
    pub diverged: bool,
    pub final_point: Vec<f64>,
}

impl DescentTrace {
    pub fn losses(&self) -> impl Iterator<Item = f64> + '_ {
        self.steps.iter().map(|s| s.loss)
    }

    pub fn final_loss(&self) -> f64 {
        self.steps.last().map_or(f64::NAN, |s| s.loss)
    }

    pub fn min_descent_gap(&self) -> Option<f64> {
        self.steps
            .iter()
            .filter_map(|s| s.descent_gap)
            .reduce(f64::min)
    }

    /// Steps whose descent gap is below `−tol·max(1,|f(x_t)|)`.
    pub fn descent_violations(&self) -> Vec<usize> {
        self.steps
            .iter()
            .filter(|s| {
                s.descent_gap
                    .is_some_and(|g| !(g >= -self.tolerance * s.loss.abs().max(1.0)))
            })
            .map(|s| s.step)
            .collect()
    }
}

/// `x − η·g`.
pub fn gd_step(x: &[f64], grad: &[f64], eta: f64) -> Result<Vec<f64>> {
    if x.len() != grad.len() {
        return Err(Error::dim_mismatch("gradient", x.len(), grad.len()));
    }
    if !(eta > 0.0) || !eta.is_finite() {
        return Err(Error::invalid(format!("step size must be positive, got {eta}")));
    }
    if let Some(i) = grad.iter().position(|g| !g.is_finite()) {
        return Err(Error::Numerical(format!("gradient entry {i} is {}", grad[i])));
    }
    Ok(x.iter().zip(grad).map(|(xi, gi)| xi - eta * gi).collect())
}

/// Runs `max_steps` fixed-size gradient steps from `config.initial`.
///
/// The trace has one row per visited iterate (at most `max_steps + 1`). A
/// non-finite objective or gradient ends the run with `diverged = true`.
pub fn run_descent<F: Objective + ?Sized>(f: &F, config: &DescentConfig) -> Result<DescentTrace> {
    config.validate()?;
    if config.initial.len() != f.dim() {
        return Err(Error::dim_mismatch("initial point", f.dim(), config.initial.len()));
    }
    let eta = config.step_size;
    let mut x = config.initial.clone();
    let mut loss = f.value(&x);
    if !loss.is_finite() {
        return Err(Error::Numerical(format!("objective is {loss} at the initial point")));
    }
    let mut grad = f.gradient(&x);

    let mut steps = Vec::with_capacity(config.max_steps + 1);
    let mut monotone = true;
    let mut diverged = false;

    for t in 0..=config.max_steps {
        let gn = norm2(&grad);
        if !gn.is_finite() {
            diverged = true;
            monotone = false;
            steps.push(TraceStep {
                step: t,
                loss,
                grad_norm: gn,
                descent_gap: None,
                monotone_so_far: false,
            });
            break;
        }
        let stop_on_grad = config.grad_norm_stop.is_some_and(|s| gn < s);
        if t == config.max_steps || stop_on_grad {
            steps.push(TraceStep {
                step: t,
                loss,
                grad_norm: gn,
                descent_gap: None,
                monotone_so_far: monotone,
            });
            break;
        }

        let next = gd_step(&x, &grad, eta)?;
        let next_loss = f.value(&next);
        let gap = loss - next_loss - 0.5 * eta * gn * gn;
        if !next_loss.is_finite() {
            diverged = true;
            monotone = false;
        } else if next_loss > loss + config.tolerance_at(loss) {
            monotone = false;
        }
        steps.push(TraceStep {
            step: t,
            loss,
            grad_norm: gn,
            descent_gap: Some(gap),
            monotone_so_far: monotone,
        });
        x = next;
        loss = next_loss;
        if diverged {
            steps.push(TraceStep {
                step: t + 1,
                loss,
                grad_norm: f64::NAN,
                descent_gap: None,
                monotone_so_far: false,
            });
            break;
        }
        grad = f.gradient(&x);
    }

    Ok(DescentTrace {
        step_size: eta,
        tolerance: config.tolerance,
        steps,
        monotone,
        diverged,
        final_point: x,
    })
}
