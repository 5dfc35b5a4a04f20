//! Polak-Ribiere nonlinear conjugate gradient with a strong-Wolfe line search.

use super::NumericsError;
use crate::Real;

const C1: f64 = 1e-4;
const C2: f64 = 0.1;
const GRAD_TOL: f64 = 1e-8;
const F_REL_TOL: f64 = 1e-10;

/// Why the minimizer stopped.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum CgStop {
    /// Gradient norm fell below 1e-8.
    GradientNorm,
    /// Relative objective change fell below 1e-10.
    FunctionChange,
    /// Objective evaluation budget exhausted.
    EvalBudget,
    /// No acceptable step found; best point so far is returned.
    LineSearchStalled,
}

/// Minimization result.
#[derive(Debug, Clone)]
pub struct CgOutcome<T> {
    pub x: Vec<T>,
    pub value: T,
    pub evals: usize,
    pub iterations: usize,
    pub stop: CgStop,
}

struct Eval<T> {
    value: T,
    grad: Vec<T>,
}

fn dot<T: Real>(a: &[T], b: &[T]) -> T {
    a.iter().zip(b).map(|(&x, &y)| x * y).sum()
}

/// Minimizes `objective` (value and gradient) starting from `x0`.
///
/// Search directions are Polak-Ribiere with nonnegativity restart; steps
/// satisfy the strong Wolfe conditions (c1 = 1e-4, c2 = 0.1). Never returns a
/// point worse than `x0`.
pub fn cg_minimize<T: Real, F>(
    mut objective: F,
    x0: &[T],
    max_evals: usize,
) -> Result<CgOutcome<T>, NumericsError>
where
    F: FnMut(&[T]) -> (T, Vec<T>),
{
    let n = x0.len();
    let mut evals = 0usize;
    let mut eval_at = |x: &[T], evals: &mut usize| -> Eval<T> {
        *evals += 1;
        let (value, grad) = objective(x);
        Eval { value, grad }
    };

    let mut x = x0.to_vec();
    let first = eval_at(&x, &mut evals);
    if !first.value.is_finite() || first.grad.iter().any(|g| !g.is_finite()) {
        return Err(NumericsError::InvalidStart);
    }
    let mut f = first.value;
    let mut g = first.grad;
    let mut d: Vec<T> = g.iter().map(|&gi| -gi).collect();
    let mut prev_step: Option<(T, T)> = None; // (alpha, directional derivative)
    let mut iterations = 0usize;

    let stop = loop {
        let gnorm = dot(&g, &g).sqrt();
        if gnorm < T::of(GRAD_TOL) {
            break CgStop::GradientNorm;
        }
        if evals >= max_evals {
            break CgStop::EvalBudget;
        }
        let mut dg0 = dot(&d, &g);
        if !(dg0 < T::zero()) {
            // not a descent direction: restart on steepest descent
            d = g.iter().map(|&gi| -gi).collect();
            dg0 = -gnorm * gnorm;
        }

        // initial trial step: carry the previous directional scale forward
        let mut alpha = match prev_step {
            Some((a_prev, dg_prev)) => {
                let scaled = a_prev * dg_prev / dg0;
                if scaled.is_finite() && scaled > T::zero() {
                    scaled.min(T::of(1e4))
                } else {
                    T::one()
                }
            }
            None => (T::one() / gnorm).min(T::one()),
        };
        alpha = alpha.max(T::of(1e-16));

        match line_search(
            &mut eval_at,
            &x,
            &d,
            f,
            dg0,
            alpha,
            max_evals,
            &mut evals,
        ) {
            LineSearchResult::Accepted { alpha, eval, point } => {
                iterations += 1;
                let f_change = f - eval.value;
                let g_new = eval.grad;
                let gg = dot(&g, &g);
                let beta = {
                    let num = dot(&g_new, &g_new) - dot(&g_new, &g);
                    (num / gg).max(T::zero())
                };
                x = point;
                d = g_new
                    .iter()
                    .zip(&d)
                    .map(|(&gn, &di)| -gn + beta * di)
                    .collect();
                f = eval.value;
                g = g_new;
                prev_step = Some((alpha, dg0));
                if f_change <= T::of(F_REL_TOL) * (T::one() + f.abs()) {
                    break CgStop::FunctionChange;
                }
            }
            LineSearchResult::Improved { eval, point } => {
                // budget ran out mid-search but a better point was found
                x = point;
                f = eval.value;
                break CgStop::EvalBudget;
            }
            LineSearchResult::Failed => {
                break if evals >= max_evals {
                    CgStop::EvalBudget
                } else {
                    CgStop::LineSearchStalled
                };
            }
        }
        if evals >= max_evals {
            break CgStop::EvalBudget;
        }
    };

    debug_assert_eq!(x.len(), n);
    Ok(CgOutcome {
        x,
        value: f,
        evals,
        iterations,
        stop,
    })
}

enum LineSearchResult<T> {
    Accepted { alpha: T, eval: Eval<T>, point: Vec<T> },
    Improved { eval: Eval<T>, point: Vec<T> },
    Failed,
}

#[allow(clippy::too_many_arguments)]
fn line_search<T: Real>(
    eval_at: &mut impl FnMut(&[T], &mut usize) -> Eval<T>,
    x: &[T],
    d: &[T],
    phi0: T,
    dphi0: T,
    alpha0: T,
    max_evals: usize,
    evals: &mut usize,
) -> LineSearchResult<T> {
    let c1 = T::of(C1);
    let c2 = T::of(C2);
    let armijo = |a: T, phi: T| phi <= phi0 + c1 * a * dphi0;
    let point_at = |a: T| -> Vec<T> { x.iter().zip(d).map(|(&xi, &di)| xi + a * di).collect() };

    // best Armijo point seen, as the fallback when the budget runs out
    let mut best: Option<(T, Eval<T>, Vec<T>)> = None;

    let mut a_prev = T::zero();
    let mut phi_prev = phi0;
    let mut a = alpha0;
    let a_max = T::of(1e12);

    for iter in 0..30 {
        if *evals >= max_evals {
            return match best {
                Some((_, eval, point)) => LineSearchResult::Improved { eval, point },
                None => LineSearchResult::Failed,
            };
        }
        let point = point_at(a);
        let eval = eval_at(&point, evals);
        let dphi = dot(&eval.grad, d);
        let phi = eval.value;
        let finite = phi.is_finite();

        if !finite || !armijo(a, phi) || (iter > 0 && phi >= phi_prev) {
            return zoom(
                eval_at, x, d, phi0, dphi0, a_prev, phi_prev, a, max_evals, evals, best,
            );
        }
        if best.as_ref().map_or(true, |(_, b, _)| phi < b.value) {
            best = Some((a, Eval { value: phi, grad: eval.grad.clone() }, point.clone()));
        }
        if dphi.abs() <= -c2 * dphi0 {
            return LineSearchResult::Accepted { alpha: a, eval, point };
        }
        if dphi >= T::zero() {
            return zoom(
                eval_at, x, d, phi0, dphi0, a, phi, a_prev, max_evals, evals, best,
            );
        }
        a_prev = a;
        phi_prev = phi;
        a = (a * T::of(2.0)).min(a_max);
        if a_prev >= a_max {
            break;
        }
    }
    match best {
        Some((_, eval, point)) => LineSearchResult::Improved { eval, point },
        None => LineSearchResult::Failed,
    }
}

/// Refines a bracketing interval by bisection until the strong Wolfe
/// conditions hold; `a_lo` always satisfies Armijo with the lowest value.
#[allow(clippy::too_many_arguments)]
fn zoom<T: Real>(
    eval_at: &mut impl FnMut(&[T], &mut usize) -> Eval<T>,
    x: &[T],
    d: &[T],
    phi0: T,
    dphi0: T,
    mut a_lo: T,
    mut phi_lo: T,
    mut a_hi: T,
    max_evals: usize,
    evals: &mut usize,
    mut best: Option<(T, Eval<T>, Vec<T>)>,
) -> LineSearchResult<T> {
    let c1 = T::of(C1);
    let c2 = T::of(C2);
    let point_at = |a: T| -> Vec<T> { x.iter().zip(d).map(|(&xi, &di)| xi + a * di).collect() };

    for _ in 0..40 {
        if *evals >= max_evals || (a_hi - a_lo).abs() <= a_lo.abs() * T::of(1e-14) + T::of(1e-300) {
            break;
        }
        let a = (a_lo + a_hi) * T::of(0.5);
        let point = point_at(a);
        let eval = eval_at(&point, evals);
        let phi = eval.value;
        let dphi = dot(&eval.grad, d);

        if !phi.is_finite() || phi > phi0 + c1 * a * dphi0 || phi >= phi_lo {
            a_hi = a;
            continue;
        }
        if best.as_ref().map_or(true, |(_, b, _)| phi < b.value) {
            best = Some((a, Eval { value: phi, grad: eval.grad.clone() }, point.clone()));
        }
        if dphi.abs() <= -c2 * dphi0 {
            return LineSearchResult::Accepted { alpha: a, eval, point };
        }
        if dphi * (a_hi - a_lo) >= T::zero() {
            a_hi = a_lo;
        }
        a_lo = a;
        phi_lo = phi;
    }
    // interval collapsed: settle for the best decrease found
    match best {
        Some((alpha, eval, point)) if eval.value < phi0 => {
            LineSearchResult::Accepted { alpha, eval, point }
        }
        Some((_, eval, point)) => LineSearchResult::Improved { eval, point },
        None => LineSearchResult::Failed,
    }
}

/// Maximum relative error between the analytic gradient of `objective` and a
/// central finite-difference estimate with the given step, at `x`.
pub fn gradient_rel_err<T: Real, F>(mut objective: F, x: &[T], step: T) -> T
where
    F: FnMut(&[T]) -> (T, Vec<T>),
{
    let (_, grad) = objective(x);
    let mut worst = T::zero();
    for i in 0..x.len() {
        let mut xp = x.to_vec();
        let mut xm = x.to_vec();
        xp[i] += step;
        xm[i] -= step;
        let (fp, _) = objective(&xp);
        let (fm, _) = objective(&xm);
        let fd = (fp - fm) / (T::of(2.0) * step);
        let denom = grad[i].abs().max(fd.abs()).max(T::of(1e-8));
        let err = (grad[i] - fd).abs() / denom;
        if err > worst {
            worst = err;
        }
    }
    worst
}
