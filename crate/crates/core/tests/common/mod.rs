//! Shared oracles and dataset builders for the integration suites. The
//! quadrature here is deliberately independent of the library's special
//! functions: plain adaptive Simpson refinement over raw densities.

use ordmix::evaluation::{EpsilonPrior, SynthConfig};

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

/// True single-rating posterior by nested quadrature over (z, x): returns
/// (posterior mean of z, p(y = 1 | r), log marginal). Latent precision 1.
pub fn quadrature_single_rating(
    lambda: f64,
    mu: f64,
    eps: f64,
    pi_r: f64,
    bin: (f64, f64),
) -> (f64, f64, f64) {
    let sd_z = (1.0 / lambda).sqrt();
    let prior = move |z: f64| {
        (-(z - mu) * (z - mu) / (2.0 / lambda)).exp() / (sd_z * (2.0 * std::f64::consts::PI).sqrt())
    };
    let bin_mass = move |z: f64| {
        adaptive_simpson(
            &move |x: f64| (-(x - z) * (x - z) / 2.0).exp() / (2.0 * std::f64::consts::PI).sqrt(),
            bin.0,
            bin.1,
            1e-12,
        )
    };
    let lo = mu - 12.0 * sd_z - 8.0;
    let hi = mu + 12.0 * sd_z + 8.0;
    let marginal = adaptive_simpson(
        &move |z: f64| prior(z) * (eps * bin_mass(z) + (1.0 - eps) * pi_r),
        lo,
        hi,
        1e-11,
    );
    let z_weighted = adaptive_simpson(
        &move |z: f64| z * prior(z) * (eps * bin_mass(z) + (1.0 - eps) * pi_r),
        lo,
        hi,
        1e-11,
    );
    let truth_branch =
        adaptive_simpson(&move |z: f64| prior(z) * eps * bin_mass(z), lo, hi, 1e-11);
    (z_weighted / marginal, truth_branch / marginal, marginal.ln())
}

/// The randomized dataset family for the monotonicity criteria: 50 small
/// configurations with varied priors, loads and spam fractions.
pub fn monotonicity_suite() -> Vec<SynthConfig<f64>> {
    (0..50u64)
        .map(|seed| {
            let mut cfg: SynthConfig<f64> = SynthConfig::new(100, 10, 5).with_seed(seed);
            let pick = |lo: f64, hi: f64, salt: u64| {
                // cheap deterministic spread over the range
                let u = ((seed.wrapping_mul(2654435761).wrapping_add(salt * 97)) % 1000) as f64 / 999.0;
                lo + (hi - lo) * u
            };
            cfg.ratings_per_instance = 3 + (seed % 4) as usize;
            cfg.alpha = pick(1.5, 8.0, 1);
            cfg.beta = cfg.alpha / pick(0.6, 3.0, 2);
            cfg.eta = pick(2.0, 10.0, 3);
            cfg.lambda = pick(0.3, 1.5, 4);
            cfg.num_categories = match seed % 3 {
                0 => 1,
                1 => 5,
                _ => 100,
            };
            cfg.epsilon = if seed % 2 == 0 {
                EpsilonPrior::Fixed(pick(0.7, 0.99, 5))
            } else {
                EpsilonPrior::TwoPoint {
                    hi: 0.95,
                    lo: pick(0.02, 0.3, 6),
                    frac_hi: pick(0.6, 0.9, 7),
                }
            };
            cfg
        })
        .collect()
}

