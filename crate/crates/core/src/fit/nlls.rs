//! Bounded nonlinear least squares by damped Gauss-Newton iteration
//! (Levenberg-Marquardt with Marquardt diagonal scaling).
//!
//! The iteration starts undamped, so a problem that is linear in its
//! parameters is solved by the first step. Damping is introduced only when a
//! step fails to reduce the cost and is relaxed again with Nielsen's update.
//! Parameters are clamped to their box after every step.

#[allow(unused_imports)] // float methods when std is absent
use num_traits::Float;
use alloc::vec;
use alloc::vec::Vec;


/// Residual vector `r(p)` to be minimized in the sum-of-squares sense.
pub trait LeastSquaresProblem {
    fn num_params(&self) -> usize;
    fn num_residuals(&self) -> usize;
    fn residuals(&self, params: &[f64], out: &mut [f64]);

    /// Row-major `num_residuals × num_params` Jacobian of the residuals.
    /// Returns `false` when no analytic Jacobian exists, in which case
    /// central finite differences are used.
    fn jacobian(&self, _params: &[f64], _out: &mut [f64]) -> bool {
        false
    }
}

/// A scalar model `y = f(x; p)`.
pub trait CurveModel {
    fn num_params(&self) -> usize;
    fn value(&self, x: f64, params: &[f64]) -> f64;

    /// Fills `grad` with `∂f/∂p`. Returns `false` if not implemented.
    fn gradient(&self, _x: f64, _params: &[f64], _grad: &mut [f64]) -> bool {
        false
    }
}

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum FitError {
    #[error("{points} data points cannot determine {params} parameters")]
    Underdetermined { points: usize, params: usize },

    #[error("initial guess for parameter {index} is not finite")]
    NonFiniteGuess { index: usize },

    #[error("parameter {index} = {value} outside bounds [{lower}, {upper}]")]
    BoundViolation { index: usize, value: f64, lower: f64, upper: f64 },

    #[error("no convergence after {iterations} iterations (cost {cost:e}, gradient {gradient:e})")]
    IterationLimit { iterations: usize, cost: f64, gradient: f64 },

    #[error("normal equations singular at iteration {iteration}")]
    SingularNormalEquations { iteration: usize },

    #[error("residuals not finite at iteration {iteration}")]
    NonFiniteResidual { iteration: usize },

    #[error("degenerate data: {0}")]
    Degenerate(&'static str),
}

#[derive(Debug, Clone, PartialEq)]
pub struct Bounds {
    pub lower: Vec<f64>,
    pub upper: Vec<f64>,
}

impl Bounds {
    pub fn unbounded(n: usize) -> Self {
        Bounds { lower: vec![f64::NEG_INFINITY; n], upper: vec![f64::INFINITY; n] }
    }

    pub fn new(lower: Vec<f64>, upper: Vec<f64>) -> Self {
        assert_eq!(lower.len(), upper.len(), "bounds length mismatch");
        Bounds { lower, upper }
    }

    fn clamp(&self, p: &mut [f64]) {
        for ((x, lo), hi) in p.iter_mut().zip(&self.lower).zip(&self.upper) {
            *x = x.max(*lo).min(*hi);
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct NllsOptions {
    pub max_iterations: usize,
    /// Relative cost reduction below which an accepted step ends the fit.
    pub ftol: f64,
    /// Relative step size below which the fit ends.
    pub xtol: f64,
    /// Largest cosine between residual and any Jacobian column at convergence.
    pub gtol: f64,
    pub force_finite_difference: bool,
    /// Scale the covariance by the reduced chi-square.
    pub scale_covariance: bool,
}

impl Default for NllsOptions {
    fn default() -> Self {
        NllsOptions {
            max_iterations: 200,
            ftol: 1e-15,
            xtol: 1e-13,
            gtol: 1e-14,
            force_finite_difference: false,
            scale_covariance: true,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Termination {
    ZeroResidual,
    SmallGradient,
    SmallStep,
    SmallCostReduction,
}

#[derive(Debug, Clone, PartialEq)]
pub struct NllsSolution {
    pub params: Vec<f64>,
    /// Row-major parameter covariance; entries are infinite when the
    /// normal matrix at the solution is singular.
    pub covariance: Vec<f64>,
    pub covariance_singular: bool,
    /// Sum of squared residuals at the solution.
    pub chi2: f64,
    pub dof: usize,
    /// Accepted steps.
    pub iterations: usize,
    pub evaluations: usize,
    pub termination: Termination,
}

impl NllsSolution {
    pub fn sigma(&self, i: usize) -> f64 {
        let n = self.params.len();
        self.covariance[i * n + i].sqrt()
    }

    pub fn sigmas(&self) -> Vec<f64> {
        (0..self.params.len()).map(|i| self.sigma(i)).collect()
    }

    pub fn reduced_chi2(&self) -> f64 {
        if self.dof == 0 {
            f64::NAN
        } else {
            self.chi2 / self.dof as f64
        }
    }
}

/// Minimizes `Σ rᵢ(p)²` starting from `initial`.
pub fn nlls_fit<P: LeastSquaresProblem + ?Sized>(
    problem: &P,
    initial: &[f64],
    bounds: Option<&Bounds>,
    options: &NllsOptions,
) -> Result<NllsSolution, FitError> {
    let n = problem.num_params();
    let m = problem.num_residuals();
    assert_eq!(initial.len(), n, "initial guess length");
    if m < n || n == 0 {
        return Err(FitError::Underdetermined { points: m, params: n });
    }
    if let Some(index) = initial.iter().position(|x| !x.is_finite()) {
        return Err(FitError::NonFiniteGuess { index });
    }
    let unbounded;
    let bounds = match bounds {
        Some(b) => {
            assert_eq!(b.lower.len(), n, "bounds length");
            b
        }
        None => {
            unbounded = Bounds::unbounded(n);
            &unbounded
        }
    };
    for (index, &value) in initial.iter().enumerate() {
        let (lower, upper) = (bounds.lower[index], bounds.upper[index]);
        if !(lower..=upper).contains(&value) {
            return Err(FitError::BoundViolation { index, value, lower, upper });
        }
    }

    let mut ws = Workspace::new(m, n);
    let mut p = initial.to_vec();
    let mut r = vec![0.0; m];
    problem.residuals(&p, &mut r);
    let mut evaluations = 1;
    if r.iter().any(|x| !x.is_finite()) {
        return Err(FitError::NonFiniteResidual { iteration: 0 });
    }
    let mut cost = dot(&r, &r);
    let mut lambda = 0.0;
    let mut nu = 2.0;
    let mut accepted = 0;
    let mut p_new = vec![0.0; n];
    let mut r_new = vec![0.0; m];

    let finish = |p: Vec<f64>, cost: f64, accepted, evaluations, termination, ws: &mut Workspace| {
        evaluate_jacobian(problem, &p, bounds, options, ws);
        let (covariance, singular) = covariance(ws, cost, m, n, options.scale_covariance);
        Ok(NllsSolution {
            params: p,
            covariance,
            covariance_singular: singular,
            chi2: cost,
            dof: m - n,
            iterations: accepted,
            evaluations,
            termination,
        })
    };

    for iteration in 0..options.max_iterations {
        if cost == 0.0 {
            return finish(p, cost, accepted, evaluations, Termination::ZeroResidual, &mut ws);
        }
        evaluations += evaluate_jacobian(problem, &p, bounds, options, &mut ws);
        ws.normal_equations(&r);
        ws.mark_active(&p, bounds);
        if ws.gradient_cosine(cost) <= options.gtol {
            return finish(p, cost, accepted, evaluations, Termination::SmallGradient, &mut ws);
        }

        loop {
            if !ws.solve_damped(lambda) {
                lambda = if lambda == 0.0 { 1e-6 } else { lambda * 10.0 };
                if lambda > 1e30 {
                    return Err(FitError::SingularNormalEquations { iteration });
                }
                continue;
            }
            for j in 0..n {
                p_new[j] = p[j] + ws.step[j];
            }
            bounds.clamp(&mut p_new);
            let step_small = p_new
                .iter()
                .zip(&p)
                .all(|(a, b)| (a - b).abs() <= options.xtol * (b.abs() + options.xtol));
            if step_small {
                return finish(p, cost, accepted, evaluations, Termination::SmallStep, &mut ws);
            }
            problem.residuals(&p_new, &mut r_new);
            evaluations += 1;
            let cost_new = if r_new.iter().all(|x| x.is_finite()) { dot(&r_new, &r_new) } else { f64::INFINITY };

            if cost_new < cost {
                for j in 0..n {
                    ws.step[j] = p_new[j] - p[j];
                }
                let predicted = ws.predicted_reduction();
                let rho = if predicted > 0.0 { (cost - cost_new) / predicted } else { 0.0 };
                if lambda > 0.0 {
                    let t = 2.0 * rho - 1.0;
                    lambda *= (1.0 / 3.0f64).max(1.0 - t * t * t);
                    if lambda < 1e-12 {
                        lambda = 0.0;
                    }
                }
                nu = 2.0;
                let reduction = (cost - cost_new) / cost;
                core::mem::swap(&mut p, &mut p_new);
                core::mem::swap(&mut r, &mut r_new);
                cost = cost_new;
                accepted += 1;
                if reduction <= options.ftol {
                    return finish(p, cost, accepted, evaluations, Termination::SmallCostReduction, &mut ws);
                }
                break;
            }
            lambda = if lambda == 0.0 { 1e-3 } else { lambda * nu };
            nu *= 2.0;
        }
    }

    evaluate_jacobian(problem, &p, bounds, options, &mut ws);
    ws.normal_equations(&r);
    ws.mark_active(&p, bounds);
    Err(FitError::IterationLimit {
        iterations: options.max_iterations,
        cost,
        gradient: ws.gradient_cosine(cost),
    })
}

/// Fits `model` to `(x, y)` minimizing `Σ wᵢ² (f(xᵢ) - yᵢ)²`.
pub fn fit_curve<M: CurveModel + ?Sized>(
    model: &M,
    x: &[f64],
    y: &[f64],
    weights: Option<&[f64]>,
    initial: &[f64],
    bounds: Option<&Bounds>,
    options: &NllsOptions,
) -> Result<NllsSolution, FitError> {
    assert_eq!(x.len(), y.len(), "x and y length");
    if let Some(w) = weights {
        assert_eq!(w.len(), x.len(), "weights length");
    }
    let problem = CurveProblem { model, x, y, weights };
    nlls_fit(&problem, initial, bounds, options)
}

struct CurveProblem<'a, M: ?Sized> {
    model: &'a M,
    x: &'a [f64],
    y: &'a [f64],
    weights: Option<&'a [f64]>,
}

impl<M: CurveModel + ?Sized> CurveProblem<'_, M> {
    fn weight(&self, i: usize) -> f64 {
        self.weights.map_or(1.0, |w| w[i])
    }
}

impl<M: CurveModel + ?Sized> LeastSquaresProblem for CurveProblem<'_, M> {
    fn num_params(&self) -> usize {
        self.model.num_params()
    }

    fn num_residuals(&self) -> usize {
        self.x.len()
    }

    fn residuals(&self, params: &[f64], out: &mut [f64]) {
        for (i, o) in out.iter_mut().enumerate() {
            *o = self.weight(i) * (self.model.value(self.x[i], params) - self.y[i]);
        }
    }

    fn jacobian(&self, params: &[f64], out: &mut [f64]) -> bool {
        let n = self.model.num_params();
        for (i, row) in out.chunks_exact_mut(n).enumerate() {
            if !self.model.gradient(self.x[i], params, row) {
                return false;
            }
            let w = self.weight(i);
            row.iter_mut().for_each(|g| *g *= w);
        }
        true
    }
}

/// Row-major Jacobian of `model` over `x` by central differences.
pub fn finite_difference_gradient<M: CurveModel + ?Sized>(model: &M, x: f64, params: &[f64]) -> Vec<f64> {
    let mut p = params.to_vec();
    (0..params.len())
        .map(|j| {
            let h = FD_STEP * params[j].abs().max(1.0);
            p[j] = params[j] + h;
            let up = model.value(x, &p);
            p[j] = params[j] - h;
            let down = model.value(x, &p);
            p[j] = params[j];
            (up - down) / (2.0 * h)
        })
        .collect()
}

// cube root of machine epsilon
const FD_STEP: f64 = 6.055_454_452_393_343e-6;

struct Workspace {
    m: usize,
    n: usize,
    jac: Vec<f64>,
    jtj: Vec<f64>,
    grad: Vec<f64>,
    chol: Vec<f64>,
    step: Vec<f64>,
    /// Parameters pinned at a bound with the gradient pushing outward.
    active: Vec<bool>,
    r_plus: Vec<f64>,
    r_minus: Vec<f64>,
    p_tmp: Vec<f64>,
}

impl Workspace {
    fn new(m: usize, n: usize) -> Self {
        Workspace {
            m,
            n,
            jac: vec![0.0; m * n],
            jtj: vec![0.0; n * n],
            grad: vec![0.0; n],
            chol: vec![0.0; n * n],
            step: vec![0.0; n],
            active: vec![false; n],
            r_plus: vec![0.0; m],
            r_minus: vec![0.0; m],
            p_tmp: vec![0.0; n],
        }
    }

    fn normal_equations(&mut self, r: &[f64]) {
        let (m, n) = (self.m, self.n);
        self.jtj.iter_mut().for_each(|x| *x = 0.0);
        self.grad.iter_mut().for_each(|x| *x = 0.0);
        for i in 0..m {
            let row = &self.jac[i * n..(i + 1) * n];
            for a in 0..n {
                self.grad[a] += row[a] * r[i];
                for b in 0..=a {
                    self.jtj[a * n + b] += row[a] * row[b];
                }
            }
        }
        for a in 0..n {
            for b in 0..a {
                self.jtj[b * n + a] = self.jtj[a * n + b];
            }
        }
    }

    fn mark_active(&mut self, p: &[f64], bounds: &Bounds) {
        for j in 0..self.n {
            let g = self.grad[j];
            self.active[j] = (p[j] <= bounds.lower[j] && g > 0.0) || (p[j] >= bounds.upper[j] && g < 0.0);
        }
    }

    fn gradient_cosine(&self, cost: f64) -> f64 {
        let rnorm = cost.sqrt();
        (0..self.n)
            .filter(|&j| !self.active[j])
            .map(|j| {
                let col = self.jtj[j * self.n + j].sqrt();
                if col == 0.0 || rnorm == 0.0 {
                    0.0
                } else {
                    self.grad[j].abs() / (col * rnorm)
                }
            })
            .fold(0.0, f64::max)
    }

    /// Solves `(JᵀJ + λ·diag(JᵀJ)) δ = -Jᵀr` into `self.step`.
    fn solve_damped(&mut self, lambda: f64) -> bool {
        let n = self.n;
        let max_diag = (0..n).map(|j| self.jtj[j * n + j]).fold(0.0, f64::max);
        self.chol.copy_from_slice(&self.jtj);
        for j in 0..n {
            let d = self.jtj[j * n + j].max(1e-12 * max_diag).max(f64::MIN_POSITIVE);
            self.chol[j * n + j] += lambda * d;
        }
        for j in (0..n).filter(|&j| self.active[j]) {
            for k in 0..n {
                self.chol[j * n + k] = 0.0;
                self.chol[k * n + j] = 0.0;
            }
            self.chol[j * n + j] = 1.0;
        }
        if !cholesky(&mut self.chol, n) {
            return false;
        }
        for j in 0..n {
            self.step[j] = if self.active[j] { 0.0 } else { -self.grad[j] };
        }
        cholesky_solve(&self.chol, n, &mut self.step);
        self.step.iter().all(|x| x.is_finite())
    }

    /// Decrease of `|r + Jδ|²` relative to `|r|²` for the current step.
    fn predicted_reduction(&self) -> f64 {
        let n = self.n;
        let mut quad = 0.0;
        let mut lin = 0.0;
        for a in 0..n {
            lin += self.step[a] * self.grad[a];
            for b in 0..n {
                quad += self.step[a] * self.jtj[a * n + b] * self.step[b];
            }
        }
        -(2.0 * lin + quad)
    }
}

fn evaluate_jacobian<P: LeastSquaresProblem + ?Sized>(
    problem: &P,
    p: &[f64],
    bounds: &Bounds,
    options: &NllsOptions,
    ws: &mut Workspace,
) -> usize {
    if !options.force_finite_difference && problem.jacobian(p, &mut ws.jac) {
        return 0;
    }
    let (m, n) = (ws.m, ws.n);
    ws.p_tmp.copy_from_slice(p);
    for j in 0..n {
        let h = FD_STEP * p[j].abs().max(1.0);
        let up = (p[j] + h).min(bounds.upper[j]);
        let down = (p[j] - h).max(bounds.lower[j]);
        ws.p_tmp[j] = up;
        problem.residuals(&ws.p_tmp, &mut ws.r_plus);
        ws.p_tmp[j] = down;
        problem.residuals(&ws.p_tmp, &mut ws.r_minus);
        ws.p_tmp[j] = p[j];
        let span = up - down;
        for i in 0..m {
            ws.jac[i * n + j] = if span > 0.0 { (ws.r_plus[i] - ws.r_minus[i]) / span } else { 0.0 };
        }
    }
    2 * n
}

fn covariance(ws: &mut Workspace, cost: f64, m: usize, n: usize, scale: bool) -> (Vec<f64>, bool) {
    ws.normal_equations(&vec![0.0; m]);
    let mut a = ws.jtj.clone();
    if !cholesky(&mut a, n) {
        return (vec![f64::INFINITY; n * n], true);
    }
    let s2 = if scale && m > n { cost / (m - n) as f64 } else { 1.0 };
    let mut cov = vec![0.0; n * n];
    let mut col = vec![0.0; n];
    for j in 0..n {
        col.iter_mut().enumerate().for_each(|(i, c)| *c = if i == j { 1.0 } else { 0.0 });
        cholesky_solve(&a, n, &mut col);
        for i in 0..n {
            cov[i * n + j] = col[i] * s2;
        }
    }
    (cov, false)
}

/// In-place lower Cholesky factor of a symmetric positive definite matrix.
fn cholesky(a: &mut [f64], n: usize) -> bool {
    for j in 0..n {
        let mut d = a[j * n + j];
        for k in 0..j {
            d -= a[j * n + k] * a[j * n + k];
        }
        if !(d > 0.0) || !d.is_finite() {
            return false;
        }
        let d = d.sqrt();
        a[j * n + j] = d;
        for i in j + 1..n {
            let mut s = a[i * n + j];
            for k in 0..j {
                s -= a[i * n + k] * a[j * n + k];
            }
            a[i * n + j] = s / d;
        }
    }
    true
}

fn cholesky_solve(l: &[f64], n: usize, b: &mut [f64]) {
    for i in 0..n {
        let mut s = b[i];
        for k in 0..i {
            s -= l[i * n + k] * b[k];
        }
        b[i] = s / l[i * n + i];
    }
    for i in (0..n).rev() {
        let mut s = b[i];
        for k in i + 1..n {
            s -= l[k * n + i] * b[k];
        }
        b[i] = s / l[i * n + i];
    }
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

#[cfg(test)]
mod tests {
    use super::*;

    struct Line;
    impl CurveModel for Line {
        fn num_params(&self) -> usize {
            2
        }
        fn value(&self, x: f64, p: &[f64]) -> f64 {
            p[0] + p[1] * x
        }
    }

    struct AnalyticLine;
    impl CurveModel for AnalyticLine {
        fn num_params(&self) -> usize {
            2
        }
        fn value(&self, x: f64, p: &[f64]) -> f64 {
            p[0] + p[1] * x
        }
        fn gradient(&self, x: f64, _p: &[f64], grad: &mut [f64]) -> bool {
            grad[0] = 1.0;
            grad[1] = x;
            true
        }
    }

    struct Rosenbrock;
    impl LeastSquaresProblem for Rosenbrock {
        fn num_params(&self) -> usize {
            2
        }
        fn num_residuals(&self) -> usize {
            2
        }
        fn residuals(&self, p: &[f64], out: &mut [f64]) {
            out[0] = 10.0 * (p[1] - p[0] * p[0]);
            out[1] = 1.0 - p[0];
        }
    }

    // Powell's badly scaled function: minimum (1.098e-5, 9.106) with zero cost
    struct PowellBadlyScaled;
    impl LeastSquaresProblem for PowellBadlyScaled {
        fn num_params(&self) -> usize {
            2
        }
        fn num_residuals(&self) -> usize {
            2
        }
        fn residuals(&self, p: &[f64], out: &mut [f64]) {
            out[0] = 1e4 * p[0] * p[1] - 1.0;
            out[1] = (-p[0]).exp() + (-p[1]).exp() - 1.0001;
        }
    }

    #[test]
    fn linear_model_one_step() {
        let x: Vec<f64> = (0..10).map(|i| i as f64).collect();
        let y: Vec<f64> = x.iter().map(|x| 2.5 - 0.75 * x).collect();
        let sol = fit_curve(&AnalyticLine, &x, &y, None, &[0.0, 0.0], None, &NllsOptions::default()).unwrap();
        assert!((sol.params[0] - 2.5).abs() < 1e-10);
        assert!((sol.params[1] + 0.75).abs() < 1e-10);
        assert_eq!(sol.iterations, 1);
        // finite-difference Jacobian: same answer, possibly one polishing step
        let sol = fit_curve(&Line, &x, &y, None, &[0.0, 0.0], None, &NllsOptions::default()).unwrap();
        assert!((sol.params[0] - 2.5).abs() < 1e-10);
        assert!((sol.params[1] + 0.75).abs() < 1e-10);
    }

    #[test]
    fn rosenbrock_valley() {
        let sol = nlls_fit(&Rosenbrock, &[-1.2, 1.0], None, &NllsOptions::default()).unwrap();
        assert!((sol.params[0] - 1.0).abs() < 1e-6);
        assert!((sol.params[1] - 1.0).abs() < 1e-6);
    }

    #[test]
    fn powell_badly_scaled() {
        let sol = nlls_fit(&PowellBadlyScaled, &[0.0, 1.0], None, &NllsOptions::default()).unwrap();
        assert!(sol.chi2 < 1e-20, "{sol:?}");
        assert!((sol.params[0] - 1.098_159_329_699_759_7e-5).abs() < 1e-10);
    }

    #[test]
    fn underdetermined_rejected() {
        let err = fit_curve(&Line, &[1.0], &[2.0], None, &[0.0, 0.0], None, &NllsOptions::default()).unwrap_err();
        assert_eq!(err, FitError::Underdetermined { points: 1, params: 2 });
    }

    #[test]
    fn bound_violation_and_nonfinite_guess() {
        let b = Bounds::new(vec![0.0, 0.0], vec![1.0, 1.0]);
        let x = [0.0, 1.0, 2.0];
        let err = fit_curve(&Line, &x, &x, None, &[2.0, 0.5], Some(&b), &NllsOptions::default()).unwrap_err();
        assert!(matches!(err, FitError::BoundViolation { index: 0, .. }));
        let err = fit_curve(&Line, &x, &x, None, &[f64::NAN, 0.5], None, &NllsOptions::default()).unwrap_err();
        assert_eq!(err, FitError::NonFiniteGuess { index: 0 });
    }

    #[test]
    fn bounds_are_respected() {
        // unconstrained optimum has slope -0.75; clamp slope at >= 0
        let x: Vec<f64> = (0..10).map(|i| i as f64).collect();
        let y: Vec<f64> = x.iter().map(|x| 2.5 - 0.75 * x).collect();
        let b = Bounds::new(vec![f64::NEG_INFINITY, 0.0], vec![f64::INFINITY, 10.0]);
        let sol = fit_curve(&Line, &x, &y, None, &[0.0, 1.0], Some(&b), &NllsOptions::default()).unwrap();
        assert_eq!(sol.params[1], 0.0);
        let mean = y.iter().sum::<f64>() / y.len() as f64;
        assert!((sol.params[0] - mean).abs() < 1e-8);
    }

    #[test]
    fn iteration_cap_reported() {
        let opts = NllsOptions { max_iterations: 1, ..NllsOptions::default() };
        let err = nlls_fit(&Rosenbrock, &[-1.2, 1.0], None, &opts).unwrap_err();
        assert!(matches!(err, FitError::IterationLimit { iterations: 1, .. }));
    }

    #[test]
    fn covariance_of_straight_line() {
        // Unit-weight OLS with exact covariance σ²(XᵀX)⁻¹, unscaled.
        let x = [0.0, 1.0, 2.0, 3.0];
        let y = [0.1, 0.9, 2.1, 2.9];
        let opts = NllsOptions { scale_covariance: false, ..NllsOptions::default() };
        let sol = fit_curve(&AnalyticLine, &x, &y, None, &[0.0, 0.0], None, &opts).unwrap();
        // XᵀX = [[4, 6], [6, 14]], det 20
        assert!((sol.covariance[0] - 14.0 / 20.0).abs() < 1e-12);
        assert!((sol.covariance[1] + 6.0 / 20.0).abs() < 1e-12);
        assert!((sol.covariance[3] - 4.0 / 20.0).abs() < 1e-12);
    }
}
