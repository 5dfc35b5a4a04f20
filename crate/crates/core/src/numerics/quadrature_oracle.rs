//! Test-only adaptive quadrature used as an independent oracle for moment and
//! posterior computations. Plain Simpson refinement on the raw density: no
//! error functions, no shared code with the implementations under test.

/// Adaptive Simpson integration of `f` over `[a, b]`.
pub fn adaptive_simpson(f: &dyn Fn(f64) -> f64, a: f64, b: f64, rel_tol: f64) -> f64 {
    fn simpson(fa: f64, fm: f64, fb: f64, h: f64) -> f64 {
        h / 6.0 * (fa + 4.0 * fm + fb)
    }
    #[allow(clippy::too_many_arguments)]
    fn recurse(
        f: &dyn Fn(f64) -> f64,
        a: f64,
        b: f64,
        fa: f64,
        fm: f64,
        fb: f64,
        whole: f64,
        eps: f64,
        depth: u32,
    ) -> f64 {
        let m = 0.5 * (a + b);
        let lm = 0.5 * (a + m);
        let rm = 0.5 * (m + b);
        let flm = f(lm);
        let frm = f(rm);
        let left = simpson(fa, flm, fm, m - a);
        let right = simpson(fm, frm, fb, b - m);
        let delta = left + right - whole;
        // second disjunct: the piece has converged relative to its own size,
        // which bounds the tail pieces without chasing an absolute target
        if depth == 0
            || delta.abs() <= 15.0 * eps
            || delta.abs() <= 1e-14 * (left.abs() + right.abs())
        {
            return left + right + delta / 15.0;
        }
        recurse(f, a, m, fa, flm, fm, left, 0.5 * eps, depth - 1)
            + recurse(f, m, b, fm, frm, fb, right, 0.5 * eps, depth - 1)
    }

    let m = 0.5 * (a + b);
    let fa = f(a);
    let fm = f(m);
    let fb = f(b);
    let whole = simpson(fa, fm, fb, b - a);
    let eps = (whole.abs() * rel_tol).max(f64::MIN_POSITIVE * 16.0);
    recurse(f, a, b, fa, fm, fb, whole, eps, 26)
}

/// Truncated-normal mean, second moment and log-mass by direct quadrature.
pub fn truncnorm_moments_quadrature(mu: f64, var: f64, l: f64, u: f64) -> (f64, f64, f64) {
    let dens = move |x: f64| {
        let z = (x - mu) / var.sqrt();
        (-0.5 * z * z).exp() / (var * 2.0 * std::f64::consts::PI).sqrt()
    };
    let g0 = adaptive_simpson(&|x| dens(x), l, u, 1e-13);
    let g1 = adaptive_simpson(&|x| x * dens(x), l, u, 1e-13);
    let g2 = adaptive_simpson(&|x| x * x * dens(x), l, u, 1e-13);
    (g1 / g0, g2 / g0, g0.ln())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn integrates_polynomials_exactly() {
        let got = adaptive_simpson(&|x| x * x, 0.0, 3.0, 1e-13);
        assert!((got - 9.0).abs() < 1e-10);
    }

    #[test]
    fn half_normal_mean_from_quadrature() {
        let (mean, second, log_mass) = truncnorm_moments_quadrature(0.0, 1.0, 0.0, 40.0);
        assert!((mean - (2.0 / std::f64::consts::PI).sqrt()).abs() < 1e-11);
        assert!((second - 1.0).abs() < 1e-11);
        assert!((log_mass - 0.5_f64.ln()).abs() < 1e-11);
    }
}
