//! Differentiable objectives and sampled estimates of their concavifier.
//!
//! A concavifier of `f` is any `α ≥ 0` such that `(α/2)‖x‖² − f(x)` is convex.
//! Equivalently `f` admits the upper quadratic model
//! `f(y) ≤ f(x) + ∇f(x)ᵀ(y−x) + (α/2)‖y−x‖²`, and the mid-point acceleration
//! `Ψ(x, y)` never exceeds `α`. The smallest such `α` plays the role of the
//! gradient-Lipschitz constant when choosing a fixed step `η = 1/α`.

use rand::Rng;

use crate::eigen::{self, dot, norm2, SymMatrix};
use crate::error::{Error, Result};

/// Minimum `‖x − y‖` accepted by [`midpoint_acceleration`].
pub const SEPARATION_FLOOR: f64 = 1e-8;

/// A scalar field over `R^d` with its gradient and, optionally, its Hessian.
///
/// Implementations may assume their inputs have length [`Objective::dim`];
/// the operations in this crate check dimensions before calling in.
pub trait Objective {
    fn dim(&self) -> usize;

    fn value(&self, x: &[f64]) -> f64;

    fn gradient(&self, x: &[f64]) -> Vec<f64>;

    /// `None` when the objective does not provide second derivatives.
    fn hessian(&self, _x: &[f64]) -> Option<SymMatrix> {
        None
    }
}

impl<T: Objective + ?Sized> Objective for &T {
    fn dim(&self) -> usize {
        (**self).dim()
    }
    fn value(&self, x: &[f64]) -> f64 {
        (**self).value(x)
    }
    fn gradient(&self, x: &[f64]) -> Vec<f64> {
        (**self).gradient(x)
    }
    fn hessian(&self, x: &[f64]) -> Option<SymMatrix> {
        (**self).hessian(x)
    }
}

/// `f(x) = ½ xᵀ A x`.
#[derive(Clone, Debug)]
pub struct Quadratic {
    a: SymMatrix,
}

impl Quadratic {
    pub fn new(a: SymMatrix) -> Self {
        Quadratic { a }
    }

    pub fn matrix(&self) -> &SymMatrix {
        &self.a
    }
}

impl Objective for Quadratic {
    fn dim(&self) -> usize {
        self.a.size()
    }

    fn value(&self, x: &[f64]) -> f64 {
        0.5 * dot(x, &self.a.mul_vec(x))
    }

    fn gradient(&self, x: &[f64]) -> Vec<f64> {
        self.a.mul_vec(x)
    }

    fn hessian(&self, _x: &[f64]) -> Option<SymMatrix> {
        Some(self.a.clone())
    }
}

type ValueFn = Box<dyn Fn(&[f64]) -> f64 + Send + Sync>;
type GradFn = Box<dyn Fn(&[f64]) -> Vec<f64> + Send + Sync>;
type HessFn = Box<dyn Fn(&[f64]) -> SymMatrix + Send + Sync>;

/// Objective assembled from closures.
pub struct FnObjective {
    dim: usize,
    value: ValueFn,
    gradient: GradFn,
    hessian: Option<HessFn>,
}

impl FnObjective {
    pub fn new(
        dim: usize,
        value: impl Fn(&[f64]) -> f64 + Send + Sync + 'static,
        gradient: impl Fn(&[f64]) -> Vec<f64> + Send + Sync + 'static,
    ) -> Self {
        FnObjective {
            dim,
            value: Box::new(value),
            gradient: Box::new(gradient),
            hessian: None,
        }
    }

    pub fn with_hessian(
        mut self,
        hessian: impl Fn(&[f64]) -> SymMatrix + Send + Sync + 'static,
    ) -> Self {
        self.hessian = Some(Box::new(hessian));
        self
    }
}

impl std::fmt::Debug for FnObjective {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("FnObjective")
            .field("dim", &self.dim)
            .field("has_hessian", &self.hessian.is_some())
            .finish()
    }
}

impl Objective for FnObjective {
    fn dim(&self) -> usize {
        self.dim
    }
    fn value(&self, x: &[f64]) -> f64 {
        (self.value)(x)
    }
    fn gradient(&self, x: &[f64]) -> Vec<f64> {
        (self.gradient)(x)
    }
    fn hessian(&self, x: &[f64]) -> Option<SymMatrix> {
        self.hessian.as_ref().map(|h| h(x))
    }
}

/// Axis-aligned box `[lower, upper]` with a sampling budget.
#[derive(Clone, Debug, PartialEq)]
pub struct BoxDomain {
    lower: Vec<f64>,
    upper: Vec<f64>,
    budget: usize,
}

impl BoxDomain {
    pub fn new(lower: Vec<f64>, upper: Vec<f64>, budget: usize) -> Result<Self> {
        if lower.len() != upper.len() {
            return Err(Error::dim_mismatch("box bounds", lower.len(), upper.len()));
        }
        if lower.is_empty() {
            return Err(Error::invalid("box must have at least one dimension"));
        }
        for (i, (l, u)) in lower.iter().zip(&upper).enumerate() {
            if !l.is_finite() || !u.is_finite() {
                return Err(Error::invalid(format!("box bound {i} is not finite")));
            }
            if l > u {
                return Err(Error::invalid(format!("box lower {l} > upper {u} at {i}")));
            }
        }
        if budget == 0 {
            return Err(Error::invalid("sample budget must be at least 1"));
        }
        Ok(BoxDomain {
            lower,
            upper,
            budget,
        })
    }

    /// `[lo, hi]^d`.
    pub fn cube(dim: usize, lo: f64, hi: f64, budget: usize) -> Result<Self> {
        Self::new(vec![lo; dim], vec![hi; dim], budget)
    }

    pub fn dim(&self) -> usize {
        self.lower.len()
    }

    pub fn budget(&self) -> usize {
        self.budget
    }

    pub fn lower(&self) -> &[f64] {
        &self.lower
    }

    pub fn upper(&self) -> &[f64] {
        &self.upper
    }

    pub fn diameter(&self) -> f64 {
        self.lower
            .iter()
            .zip(&self.upper)
            .map(|(l, u)| (u - l).powi(2))
            .sum::<f64>()
            .sqrt()
    }

    pub fn center(&self) -> Vec<f64> {
        self.lower
            .iter()
            .zip(&self.upper)
            .map(|(l, u)| 0.5 * (l + u))
            .collect()
    }

    pub fn contains(&self, x: &[f64]) -> bool {
        x.len() == self.dim()
            && x
                .iter()
                .zip(self.lower.iter().zip(&self.upper))
                .all(|(v, (l, u))| *l <= *v && *v <= *u)
    }

    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> Vec<f64> {
        self.lower
            .iter()
            .zip(&self.upper)
            .map(|(&l, &u)| if l == u { l } else { rng.random_range(l..=u) })
            .collect()
    }

    /// Uniform center `c` such that `c ± half·e` stays inside the box, or `None`
    /// if the box is too thin along `e`.
    fn sample_center_for<R: Rng + ?Sized>(
        &self,
        rng: &mut R,
        e: &[f64],
        half: f64,
    ) -> Option<Vec<f64>> {
        let mut c = Vec::with_capacity(self.dim());
        for ((&l, &u), &ei) in self.lower.iter().zip(&self.upper).zip(e) {
            let margin = half * ei.abs();
            let (lo, hi) = (l + margin, u - margin);
            if lo > hi {
                return None;
            }
            c.push(if lo == hi { lo } else { rng.random_range(lo..=hi) });
        }
        Some(c)
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum EstimateMethod {
    HessianSampling,
    MidpointSup,
    Analytic,
}

/// A concavifier value together with how it was obtained.
#[derive(Clone, Debug, PartialEq)]
pub struct ConcavifierEstimate {
    pub value: f64,
    pub method: EstimateMethod,
    pub samples_used: usize,
    /// The point (Hessian sampling) or pair (mid-point sup) achieving `value`.
    pub witness: Vec<Vec<f64>>,
}

/// Result of evaluating the upper quadratic model at one pair.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct QuadraticCheck {
    pub holds: bool,
    /// `f(x) + ∇f(x)ᵀ(y−x) + (α/2)‖y−x‖² − f(y)`.
    pub slack: f64,
}

/// Checks `f(y) ≤ f(x) + ∇f(x)ᵀ(y−x) + (α/2)‖y−x‖²` up to `1e-9·max(1,|f(x)|)`.
pub fn upper_quadratic_check<F: Objective + ?Sized>(
    f: &F,
    x: &[f64],
    y: &[f64],
    alpha: f64,
) -> Result<QuadraticCheck> {
    check_dim(f, x, "x")?;
    check_dim(f, y, "y")?;
    if !(alpha >= 0.0) || !alpha.is_finite() {
        return Err(Error::invalid(format!("alpha must be finite and >= 0, got {alpha}")));
    }
    let fx = f.value(x);
    let fy = f.value(y);
    let g = f.gradient(x);
    let mut lin = 0.0;
    let mut sq = 0.0;
    for i in 0..x.len() {
        let d = y[i] - x[i];
        lin += g[i] * d;
        sq += d * d;
    }
    let slack = fx + lin + 0.5 * alpha * sq - fy;
    let tol = 1e-9 * fx.abs().max(1.0);
    Ok(QuadraticCheck {
        holds: slack >= -tol,
        slack,
    })
}

/// `Ψ(x, y) = 4 [f(x) + f(y) − 2 f((x+y)/2)] / ‖x − y‖²`.
pub fn midpoint_acceleration<F: Objective + ?Sized>(f: &F, x: &[f64], y: &[f64]) -> Result<f64> {
    check_dim(f, x, "x")?;
    check_dim(f, y, "y")?;
    let sep2: f64 = x.iter().zip(y).map(|(a, b)| (a - b).powi(2)).sum();
    let sep = sep2.sqrt();
    if !(sep >= SEPARATION_FLOOR) {
        return Err(Error::DegeneratePair {
            separation: sep,
            floor: SEPARATION_FLOOR,
        });
    }
    let mid: Vec<f64> = x.iter().zip(y).map(|(a, b)| 0.5 * (a + b)).collect();
    Ok(4.0 * (f.value(x) + f.value(y) - 2.0 * f.value(&mid)) / sep2)
}

/// Supremum of `Ψ` over sampled pairs in `domain`.
///
/// Half the budget goes to uniform pairs. The other half goes to short pairs
/// `c ± (ε/2)e` with `ε = 1e-3·diameter`, where `e` is the top Hessian
/// eigenvector at `c` when the objective provides a Hessian and a coordinate
/// axis (cycled) otherwise. The result is a lower bound on the optimal
/// concavifier over the domain.
pub fn estimate_concavifier_midpoint<F, R>(
    f: &F,
    domain: &BoxDomain,
    rng: &mut R,
) -> Result<ConcavifierEstimate>
where
    F: Objective + ?Sized,
    R: Rng + ?Sized,
{
    check_domain(f, domain)?;
    if domain.budget() < 2 {
        return Err(Error::invalid("mid-point estimate needs a budget of at least 2"));
    }
    let diameter = domain.diameter();
    if !(diameter >= SEPARATION_FLOOR) {
        return Err(Error::invalid("domain has no extent to sample pairs from"));
    }
    let d = domain.dim();
    let n_uniform = domain.budget() / 2;
    let n_aligned = domain.budget() - n_uniform;
    let eps = 1e-3 * diameter;

    let mut best = f64::NEG_INFINITY;
    let mut witness = Vec::new();
    let mut used = 0usize;
    let mut consider = |x: Vec<f64>, y: Vec<f64>| -> Result<()> {
        let psi = match midpoint_acceleration(f, &x, &y) {
            Ok(v) => v,
            Err(Error::DegeneratePair { .. }) => return Ok(()),
            Err(e) => return Err(e),
        };
        if !psi.is_finite() {
            return Err(Error::Numerical(format!("mid-point acceleration is {psi}")));
        }
        used += 1;
        if psi > best {
            best = psi;
            witness = vec![x, y];
        }
        Ok(())
    };

    for _ in 0..n_uniform {
        let x = domain.sample(rng);
        let y = domain.sample(rng);
        consider(x, y)?;
    }

    let mut axis = 0usize;
    for _ in 0..n_aligned {
        let c0 = domain.sample(rng);
        let principal = f
            .hessian(&c0)
            .map(|h| eigen::lambda_max(&h))
            .transpose()?
            .map(|r| r.vector);
        let mut pair = principal.and_then(|e| {
            domain
                .sample_center_for(rng, &e, 0.5 * eps)
                .map(|c| offset_pair(&c, &e, 0.5 * eps))
        });
        // coordinate axes, skipping ones the box is too thin for
        let mut tries = 0;
        while pair.is_none() && tries < d {
            let mut e = vec![0.0; d];
            e[axis % d] = 1.0;
            axis += 1;
            tries += 1;
            pair = domain
                .sample_center_for(rng, &e, 0.5 * eps)
                .map(|c| offset_pair(&c, &e, 0.5 * eps));
        }
        if let Some((x, y)) = pair {
            consider(x, y)?;
        }
    }

    if used == 0 {
        return Err(Error::invalid("no admissible pair could be sampled from the domain"));
    }
    Ok(ConcavifierEstimate {
        value: best.max(0.0),
        method: EstimateMethod::MidpointSup,
        samples_used: used,
        witness,
    })
}

/// Maximum of `λ_max(∇²f(x))` over the box center plus `budget − 1` uniform samples.
///
/// Concavifiers are non-negative, so a strictly concave objective reports 0.
pub fn estimate_concavifier_hessian<F, R>(
    f: &F,
    domain: &BoxDomain,
    rng: &mut R,
) -> Result<ConcavifierEstimate>
where
    F: Objective + ?Sized,
    R: Rng + ?Sized,
{
    check_domain(f, domain)?;
    let mut best = f64::NEG_INFINITY;
    let mut arg = Vec::new();
    for s in 0..domain.budget() {
        let x = if s == 0 {
            domain.center()
        } else {
            domain.sample(rng)
        };
        let h = f.hessian(&x).ok_or_else(|| {
            Error::Unsupported("objective does not provide a Hessian".to_string())
        })?;
        let top = eigen::lambda_max(&h)?;
        if !top.converged {
            return Err(Error::Numerical(format!(
                "Hessian eigen-solve did not converge at sample {s}"
            )));
        }
        if top.value > best {
            best = top.value;
            arg = x;
        }
    }
    Ok(ConcavifierEstimate {
        value: best.max(0.0),
        method: EstimateMethod::HessianSampling,
        samples_used: domain.budget(),
        witness: vec![arg],
    })
}

/// Step used by the finite-difference helpers: `1e-6·max(1, ‖x‖)`.
pub fn fd_step(x: &[f64]) -> f64 {
    1e-6 * norm2(x).max(1.0)
}

/// Central-difference gradient of `f` at `x`.
pub fn finite_difference_gradient<F: Objective + ?Sized>(f: &F, x: &[f64]) -> Vec<f64> {
    let h = fd_step(x);
    let mut p = x.to_vec();
    (0..x.len())
        .map(|i| {
            p[i] = x[i] + h;
            let up = f.value(&p);
            p[i] = x[i] - h;
            let down = f.value(&p);
            p[i] = x[i];
            (up - down) / (2.0 * h)
        })
        .collect()
}

/// Central differences of the analytic gradient, symmetrized.
pub fn finite_difference_hessian<F: Objective + ?Sized>(f: &F, x: &[f64]) -> SymMatrix {
    let n = x.len();
    let h = fd_step(x);
    let mut p = x.to_vec();
    let mut cols = Vec::with_capacity(n);
    for i in 0..n {
        p[i] = x[i] + h;
        let up = f.gradient(&p);
        p[i] = x[i] - h;
        let down = f.gradient(&p);
        p[i] = x[i];
        cols.push(
            up.iter()
                .zip(&down)
                .map(|(a, b)| (a - b) / (2.0 * h))
                .collect::<Vec<_>>(),
        );
    }
    SymMatrix::from_fn(n, |i, j| 0.5 * (cols[i][j] + cols[j][i]))
}

/// `‖∇f(x) − ∇_fd f(x)‖ / max(‖∇f(x)‖, ‖∇_fd f(x)‖, 1e-6)`.
pub fn gradient_relative_error<F: Objective + ?Sized>(f: &F, x: &[f64]) -> Result<f64> {
    check_dim(f, x, "x")?;
    let g = f.gradient(x);
    let fd = finite_difference_gradient(f, x);
    let diff = g
        .iter()
        .zip(&fd)
        .map(|(a, b)| (a - b).powi(2))
        .sum::<f64>()
        .sqrt();
    Ok(diff / norm2(&g).max(norm2(&fd)).max(1e-6))
}

fn offset_pair(c: &[f64], e: &[f64], half: f64) -> (Vec<f64>, Vec<f64>) {
    let x = c.iter().zip(e).map(|(ci, ei)| ci - half * ei).collect();
    let y = c.iter().zip(e).map(|(ci, ei)| ci + half * ei).collect();
    (x, y)
}

fn check_dim<F: Objective + ?Sized>(f: &F, x: &[f64], name: &str) -> Result<()> {
    if x.len() != f.dim() {
        return Err(Error::dim_mismatch(name, f.dim(), x.len()));
    }
    Ok(())
}

fn check_domain<F: Objective + ?Sized>(f: &F, domain: &BoxDomain) -> Result<()> {
    if domain.dim() != f.dim() {
        return Err(Error::dim_mismatch("domain", f.dim(), domain.dim()));
    }
    Ok(())
}
