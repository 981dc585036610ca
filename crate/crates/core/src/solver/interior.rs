//! Log-barrier interior-point method for small dense smooth convex programs
//!
//! ```text
//! minimize f(x)  subject to  g_i(x) <= 0,  i = 1..m
//! ```
//!
//! Each stage centres `tau f - sum ln(-g_i)` by damped Newton with an Armijo
//! backtracking search that keeps the iterate strictly feasible, then grows
//! `tau`. Multipliers are read off the central path, `lambda_i = 1 / (tau (-g_i))`,
//! so the duality gap of a centred point is `m / tau`.

use std::fmt;

use nalgebra::{DMatrix, DVector};

/// Objective and constraint values with their first derivatives.
#[derive(Debug, Clone)]
pub struct FirstOrder {
    pub objective: f64,
    pub grad: DVector<f64>,
    pub cons: DVector<f64>,
    /// Row `i` is the gradient of `g_i`.
    pub jac: DMatrix<f64>,
}

pub trait ConvexProgram {
    fn dim(&self) -> usize;
    fn num_constraints(&self) -> usize;
    /// `None` when `x` lies outside the domain of `f` or some `g_i`.
    fn first_order(&self, x: &DVector<f64>) -> Option<FirstOrder>;
    /// `grad^2 f(x) + sum_i lambda_i grad^2 g_i(x)`.
    fn lagrangian_hessian(&self, x: &DVector<f64>, lambda: &DVector<f64>) -> DMatrix<f64>;
}

/// Infinity-norm KKT violations of a primal-dual pair. Stationarity is
/// measured relative to `max(1, |grad f|_inf)`.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct KktResidual {
    pub stationarity: f64,
    pub primal: f64,
    pub complementarity: f64,
}

impl KktResidual {
    pub fn of(eval: &FirstOrder, lambda: &DVector<f64>) -> Self {
        let dual = &eval.grad + eval.jac.transpose() * lambda;
        Self {
            stationarity: dual.amax() / eval.grad.amax().max(1.0),
            primal: eval.cons.iter().fold(0.0, |acc: f64, g| acc.max(*g)),
            complementarity: eval
                .cons
                .iter()
                .zip(lambda.iter())
                .fold(0.0, |acc: f64, (g, l)| acc.max((g * l).abs())),
        }
    }

    pub fn max(&self) -> f64 {
        self.stationarity.max(self.primal).max(self.complementarity)
    }
}

impl fmt::Display for KktResidual {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(
            f,
            "stationarity {:.3e}, primal {:.3e}, complementarity {:.3e}",
            self.stationarity, self.primal, self.complementarity
        )
    }
}

#[derive(Debug, Clone, Copy)]
pub struct IpmSettings {
    pub tol: f64,
    pub max_iters: usize,
    /// Barrier weight growth per stage.
    pub mu: f64,
    pub alpha: f64,
    pub beta: f64,
}

#[derive(Debug, Clone)]
pub struct IpmSolution {
    pub x: DVector<f64>,
    pub lambda: DVector<f64>,
    pub objective: f64,
    pub residual: KktResidual,
    pub gap: f64,
    pub iterations: usize,
    pub converged: bool,
}

/// `tau f(x) - sum_i ln(-g_i(x))`, or `None` outside the strict interior.
fn barrier(eval: &FirstOrder, tau: f64) -> Option<f64> {
    if !strictly_feasible(eval) {
        return None;
    }
    Some(tau * eval.objective - eval.cons.iter().map(|g| (-g).ln()).sum::<f64>())
}

fn strictly_feasible(eval: &FirstOrder) -> bool {
    eval.objective.is_finite() && eval.cons.iter().all(|g| *g < 0.0 && g.is_finite())
}

/// Multipliers on the central path at barrier weight `tau`.
fn central_duals(eval: &FirstOrder, tau: f64) -> DVector<f64> {
    eval.cons.map(|g| 1.0 / (tau * -g))
}

/// Solve `(M + delta I) dx = rhs`, growing `delta` until Cholesky succeeds.
fn regularized_solve(m: DMatrix<f64>, rhs: &DVector<f64>) -> Option<DVector<f64>> {
    let scale = m.diagonal().amax().max(1.0);
    let mut delta = 0.0;
    for _ in 0..12 {
        let mut trial = m.clone();
        for i in 0..trial.nrows() {
            trial[(i, i)] += delta;
        }
        if let Some(chol) = trial.cholesky() {
            return Some(chol.solve(rhs));
        }
        delta = if delta == 0.0 { 1e-14 * scale } else { delta * 100.0 };
    }
    None
}

/// Central-path multipliers with the near-active ones re-fitted. Slacks of
/// budget constraints carry cancellation error of order `1e-16`, which the
/// `1 / (tau (-g))` estimate amplifies by `tau`; the fit does not use slacks.
fn refined_duals(eval: &FirstOrder, tau: f64) -> DVector<f64> {
    fit_duals(eval, central_duals(eval, tau))
}

/// Re-fit the multipliers of constraints with `lambda_i > -g_i` so that the
/// Lagrangian gradient is minimized in least squares; keeps `central` when
/// the fit is not an improvement or leaves the nonnegative orthant.
pub fn fit_duals(eval: &FirstOrder, central: DVector<f64>) -> DVector<f64> {
    let active: Vec<usize> = (0..central.len()).filter(|&i| central[i] > -eval.cons[i]).collect();
    if active.is_empty() {
        return central;
    }
    let r = &eval.grad + eval.jac.transpose() * &central;
    let ja = DMatrix::from_fn(eval.grad.len(), active.len(), |row, j| eval.jac[(active[j], row)]);
    let Ok(delta) = ja.svd(true, true).solve(&(-&r), 1e-14) else {
        return central;
    };
    let mut refined = central.clone();
    for (j, &i) in active.iter().enumerate() {
        refined[i] += delta[j];
    }
    let better = |l: &DVector<f64>| (&eval.grad + eval.jac.transpose() * l).amax();
    if refined.iter().all(|l| *l >= 0.0) && better(&refined) < better(&central) {
        refined
    } else {
        central
    }
}

const CENTERING_DECREMENT: f64 = 1e-12;

/// Run the method from a strictly feasible `x0`. Returns `None` if `x0` is
/// not strictly feasible. A solution with `converged == false` carries the
/// last iterate.
pub fn solve<P: ConvexProgram>(prog: &P, x0: DVector<f64>, s: &IpmSettings) -> Option<IpmSolution> {
    let m = prog.num_constraints().max(1) as f64;
    let mut x = x0;
    let mut eval = prog.first_order(&x)?;
    if !strictly_feasible(&eval) {
        return None;
    }
    let mut tau = (m / (1.0 + eval.objective.abs())).max(1e-3);
    let mut iterations = 0;
    let finish = |x: DVector<f64>, eval: &FirstOrder, tau: f64, iterations| {
        let lambda = refined_duals(eval, tau);
        let gap = -eval.cons.dot(&lambda);
        let residual = KktResidual::of(eval, &lambda);
        let converged = residual.stationarity <= s.tol && gap <= s.tol;
        IpmSolution { objective: eval.objective, x, lambda, residual, gap, iterations, converged }
    };

    loop {
        // centre at the current tau by damped Newton on the barrier function
        loop {
            if iterations >= s.max_iters {
                return Some(finish(x, &eval, tau, iterations));
            }
            let lambda = central_duals(&eval, tau);
            let mut grad = &eval.grad * tau;
            let mut hess = prog.lagrangian_hessian(&x, &lambda) * tau;
            for i in 0..eval.cons.len() {
                let row = eval.jac.row(i).transpose();
                let inv = 1.0 / -eval.cons[i];
                grad.axpy(inv, &row, 1.0);
                hess.ger(inv * inv, &row, &row, 1.0);
            }
            let Some(dx) = regularized_solve(hess, &(-&grad)) else {
                return Some(finish(x, &eval, tau, iterations));
            };
            let slope = grad.dot(&dx);
            if -slope / 2.0 <= CENTERING_DECREMENT {
                break;
            }
            iterations += 1;
            let phi = barrier(&eval, tau).expect("iterate is strictly feasible");
            let mut step = 1.0;
            let mut accepted = None;
            while step > 1e-16 {
                let xt = &x + &dx * step;
                if let Some(et) = prog.first_order(&xt) {
                    if let Some(pt) = barrier(&et, tau) {
                        if pt <= phi + s.alpha * step * slope {
                            accepted = Some((xt, et));
                            break;
                        }
                    }
                }
                step *= s.beta;
            }
            match accepted {
                Some((xt, et)) => {
                    let stalled = phi - barrier(&et, tau).unwrap() <= 1e-15 * phi.abs();
                    x = xt;
                    eval = et;
                    if stalled {
                        break;
                    }
                }
                // no descent possible in floating point: centred as far as it goes
                None => break,
            }
        }
        let done = finish(x.clone(), &eval, tau, iterations);
        if done.converged || m / tau <= 0.01 * s.tol {
            return Some(done);
        }
        tau *= s.mu;
    }
}
