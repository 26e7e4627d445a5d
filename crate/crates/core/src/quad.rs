//! Adaptive Simpson quadrature on finite intervals.

/// Integrates `f` over `[a, b]` to absolute tolerance `tol`.
pub fn integrate(f: impl Fn(f64) -> f64, a: f64, b: f64, tol: f64) -> f64 {
    if a == b {
        return 0.0;
    }
    let (lo, hi, sign) = if a < b { (a, b, 1.0) } else { (b, a, -1.0) };
    // A coarse first pass keeps narrow peaks from being skipped.
    let pieces = 16;
    let h = (hi - lo) / pieces as f64;
    let mut total = 0.0;
    for i in 0..pieces {
        let x0 = lo + i as f64 * h;
        let x1 = if i + 1 == pieces { hi } else { x0 + h };
        let xm = 0.5 * (x0 + x1);
        let (f0, fm, f1) = (f(x0), f(xm), f(x1));
        let whole = (x1 - x0) / 6.0 * (f0 + 4.0 * fm + f1);
        total += recurse(&f, x0, x1, f0, fm, f1, whole, tol / pieces as f64, 48);
    }
    sign * total
}

#[allow(clippy::too_many_arguments)]
fn recurse(
    f: &impl Fn(f64) -> f64,
    a: f64,
    b: f64,
    fa: f64,
    fm: f64,
    fb: f64,
    whole: f64,
    tol: f64,
    depth: u32,
) -> f64 {
    let m = 0.5 * (a + b);
    let (lm, rm) = (0.5 * (a + m), 0.5 * (m + b));
    let (flm, frm) = (f(lm), f(rm));
    let left = (m - a) / 6.0 * (fa + 4.0 * flm + fm);
    let right = (b - m) / 6.0 * (fm + 4.0 * frm + fb);
    let delta = left + right - whole;
    if depth == 0 || delta.abs() <= 15.0 * tol || (b - a) < 1e-14 * a.abs().max(1.0) {
        return left + right + delta / 15.0;
    }
    recurse(f, a, m, fa, flm, fm, left, 0.5 * tol, depth - 1)
        + recurse(f, m, b, fm, frm, fb, right, 0.5 * tol, depth - 1)
}

/// Cumulative integrals of `f` from `a` to each point of the sorted `points`.
pub fn cumulative(f: impl Fn(f64) -> f64, a: f64, points: &[f64], tol: f64) -> Vec<f64> {
    let mut out = Vec::with_capacity(points.len());
    let mut acc = 0.0;
    let mut prev = a;
    for &p in points {
        if p > prev {
            acc += integrate(&f, prev, p, tol);
            prev = p;
        }
        out.push(acc);
    }
    out
}
