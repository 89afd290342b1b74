//! Adaptive quadrature used for the non-closed-form nonlinearity integrals
//! and for numeric kernel tails and window moments.

/// Evaluation budget for one [`adaptive_simpson`] call. Smooth integrands use
/// a few dozen evaluations; the cap only engages for integrands that are
/// noisy or oscillatory at scales the tolerance cannot justify resolving.
const SIMPSON_EVAL_BUDGET: u64 = 2_000_000;

/// Shared evaluation budget for one [`integrate_to_infinity`] call.
const TAIL_EVAL_BUDGET: u64 = 400_000;

/// Adaptive Simpson integration of `f` over `[a, b]` to absolute tolerance
/// `abs_tol`.
///
/// Classic bisection scheme with the Richardson term `(s_left + s_right -
/// s_whole) / 15`. Recursion stops at the tolerance, at depth 48, or when the
/// evaluation budget runs out, whichever comes first; past the budget the
/// current extrapolated estimates are accepted, so the routine always
/// terminates with the best answer the allotted work can buy.
pub fn adaptive_simpson<F: Fn(f64) -> f64>(f: &F, a: f64, b: f64, abs_tol: f64) -> f64 {
    let mut budget = SIMPSON_EVAL_BUDGET;
    adaptive_simpson_budgeted(f, a, b, abs_tol, &mut budget)
}

fn adaptive_simpson_budgeted<F: Fn(f64) -> f64>(
    f: &F,
    a: f64,
    b: f64,
    abs_tol: f64,
    budget: &mut u64,
) -> f64 {
    if a == b || *budget < 3 {
        return 0.0;
    }
    *budget -= 3;
    let fa = f(a);
    let fb = f(b);
    let m = 0.5 * (a + b);
    let fm = f(m);
    let whole = simpson(a, b, fa, fm, fb);
    adapt(f, a, b, fa, fm, fb, whole, abs_tol, 48, budget)
}

/// Adaptive Simpson over `[a, b]` with the interval pre-split at the interior
/// points of `breaks`.
///
/// Splitting at the known kinks of a piecewise integrand keeps every
/// subinterval smooth, so the error estimate is trustworthy there.
pub fn adaptive_simpson_split<F: Fn(f64) -> f64>(
    f: &F,
    a: f64,
    b: f64,
    breaks: &[f64],
    abs_tol: f64,
) -> f64 {
    if a == b {
        return 0.0;
    }
    let (lo, hi, sign) = if a < b { (a, b, 1.0) } else { (b, a, -1.0) };
    let mut cuts: Vec<f64> = breaks.iter().copied().filter(|&c| c > lo && c < hi).collect();
    cuts.sort_by(|p, q| p.partial_cmp(q).unwrap());
    cuts.dedup();
    let mut total = 0.0;
    let mut left = lo;
    let per_piece = abs_tol / (cuts.len() + 1) as f64;
    for cut in cuts {
        total += adaptive_simpson(f, left, cut, per_piece);
        left = cut;
    }
    total += adaptive_simpson(f, left, hi, per_piece);
    sign * total
}

/// Integral of `f` over `[a, inf)` for an integrand decaying at least like a
/// negative power.
///
/// The half-line is covered by geometrically growing panels `[a 2^k, a 2^{k+1}]`
/// (requires `a > 0`); summation stops when a panel contributes less than
/// `abs_tol / 4` and the panel magnitudes are decreasing, or after 120 panels
/// (range beyond ~1e36 a). All panels share one evaluation budget: once it is
/// spent, the remaining panels fall back to their plain Simpson estimates,
/// trading accuracy for guaranteed termination on integrands with unbounded
/// oscillation ranges.
pub fn integrate_to_infinity<F: Fn(f64) -> f64>(f: &F, a: f64, abs_tol: f64) -> f64 {
    assert!(a > 0.0, "geometric panels need a positive start point");
    let mut budget = TAIL_EVAL_BUDGET;
    let mut total = 0.0;
    let mut left = a;
    let mut prev = f64::INFINITY;
    for _ in 0..120 {
        let right = left * 2.0;
        let panel = adaptive_simpson_budgeted(f, left, right, abs_tol / 8.0, &mut budget);
        total += panel;
        if panel.abs() < abs_tol / 4.0 && panel.abs() <= prev {
            break;
        }
        prev = panel.abs();
        left = right;
    }
    total
}

fn simpson(a: f64, b: f64, fa: f64, fm: f64, fb: f64) -> f64 {
    (b - a) / 6.0 * (fa + 4.0 * fm + fb)
}

#[allow(clippy::too_many_arguments)]
fn adapt<F: Fn(f64) -> f64>(
    f: &F,
    a: f64,
    b: f64,
    fa: f64,
    fm: f64,
    fb: f64,
    whole: f64,
    abs_tol: f64,
    depth: u32,
    budget: &mut u64,
) -> f64 {
    if *budget < 2 {
        return whole;
    }
    *budget -= 2;
    let m = 0.5 * (a + b);
    let lm = 0.5 * (a + m);
    let rm = 0.5 * (m + b);
    let flm = f(lm);
    let frm = f(rm);
    let left = simpson(a, m, fa, flm, fm);
    let right = simpson(m, b, fm, frm, fb);
    let delta = left + right - whole;
    if depth == 0 || delta.abs() <= 15.0 * abs_tol {
        return left + right + delta / 15.0;
    }
    adapt(f, a, m, fa, flm, fm, left, 0.5 * abs_tol, depth - 1, budget)
        + adapt(f, m, b, fm, frm, fb, right, 0.5 * abs_tol, depth - 1, budget)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn polynomial_is_exact() {
        // Simpson is exact on cubics, so the adaptive error estimate is 0.
        let f = |x: f64| 3.0 * x * x - 2.0 * x + 1.0;
        let got = adaptive_simpson(&f, -1.0, 2.0, 1e-12);
        let exact = (8.0 - 4.0 + 2.0) - (-1.0 - 1.0 - 1.0);
        assert!((got - exact).abs() < 1e-12);
    }

    #[test]
    fn meets_absolute_tolerance_on_oscillatory_integrand() {
        let f = |x: f64| (10.0 * x).sin() * (-x).exp();
        // exact: int_0^2 sin(10x)e^{-x} dx = [10 - e^{-2}(10 cos 20 + sin 20)] / 101
        let exact = (10.0 - (-2.0f64).exp() * (10.0 * (20.0f64).cos() + (20.0f64).sin())) / 101.0;
        let got = adaptive_simpson(&f, 0.0, 2.0, 1e-10);
        assert!((got - exact).abs() < 1e-9, "err {:e}", (got - exact).abs());
    }

    #[test]
    fn split_handles_kinks() {
        // |x - 0.3| has a kink; exact integral over [0,1] is 0.09/2 + 0.49/2.
        let f = |x: f64| (x - 0.3f64).abs();
        let got = adaptive_simpson_split(&f, 0.0, 1.0, &[0.3], 1e-12);
        assert!((got - 0.29).abs() < 1e-11);
    }

    #[test]
    fn split_is_antisymmetric_in_the_interval() {
        let f = |x: f64| x * x;
        let fwd = adaptive_simpson_split(&f, 0.0, 1.0, &[0.5], 1e-12);
        let bwd = adaptive_simpson_split(&f, 1.0, 0.0, &[0.5], 1e-12);
        assert_eq!(fwd, -bwd);
    }

    #[test]
    fn improper_tail_matches_closed_form() {
        // int_1^inf r^{-2.5} dr = 1/1.5
        let f = |r: f64| r.powf(-2.5);
        let got = integrate_to_infinity(&f, 1.0, 1e-10);
        assert!((got - 2.0 / 3.0).abs() < 1e-8, "got {got}");
    }

    #[test]
    fn improper_tail_respects_truncation_to_zero() {
        // integrand vanishing beyond 4: int_1^4 r^{-2} dr = 3/4
        let f = |r: f64| if r <= 4.0 { r.powi(-2) } else { 0.0 };
        let got = integrate_to_infinity(&f, 1.0, 1e-10);
        assert!((got - 0.75).abs() < 1e-8);
    }

    #[test]
    fn endless_oscillation_terminates_within_budget() {
        // amplitude decays like r^{-1.8} but the phase never settles; the
        // budget bounds the work while the estimate stays envelope-accurate
        let f = |r: f64| (1.0 + 0.2 * (0.7 * r).sin()) * r.powf(-1.8);
        let got = integrate_to_infinity(&f, 0.05, 1e-10);
        // envelope mean: int_0.05^inf r^{-1.8} dr = 0.05^{-0.8} / 0.8
        let mean = 0.05f64.powf(-0.8) / 0.8;
        assert!((got - mean).abs() < 0.05 * mean, "got {got} vs mean {mean}");
    }
}
