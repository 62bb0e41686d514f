//! Deterministic one-dimensional search helpers: dense grid bootstrap,
//! golden-section refinement and bisection.

const INV_PHI: f64 = 0.618_033_988_749_894_9;

/// Result of a bounded 1-D minimization.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Minimum {
    pub x: f64,
    pub value: f64,
    /// The minimizer sits on an interval endpoint, so the true optimum may lie outside.
    pub bound_hit: bool,
}

/// Golden-section search for a minimum of `f` on `[a, b]`, stopping when the
/// bracket is narrower than `tol`.
pub fn golden_section<F: FnMut(f64) -> f64>(mut f: F, mut a: f64, mut b: f64, tol: f64) -> (f64, f64) {
    let mut c = b - INV_PHI * (b - a);
    let mut d = a + INV_PHI * (b - a);
    let mut fc = f(c);
    let mut fd = f(d);
    for _ in 0..300 {
        if (b - a).abs() <= tol {
            break;
        }
        if fc <= fd {
            b = d;
            d = c;
            fd = fc;
            c = b - INV_PHI * (b - a);
            fc = f(c);
        } else {
            a = c;
            c = d;
            fc = fd;
            d = a + INV_PHI * (b - a);
            fd = f(d);
        }
    }
    let (x, fx) = if fc <= fd { (c, fc) } else { (d, fd) };
    // Endpoints are never probed by the interior points.
    let fa = f(a);
    let fb = f(b);
    if fa < fx && fa <= fb {
        (a, fa)
    } else if fb < fx {
        (b, fb)
    } else {
        (x, fx)
    }
}

/// Minimizes `f` on `[lo, hi]`: evaluate `points` equally spaced values, then
/// golden-section refine between the neighbours of the best grid point.
///
/// Ties on the grid go to the first (leftmost) index.
pub fn grid_then_golden<F: FnMut(f64) -> f64>(mut f: F, lo: f64, hi: f64, points: usize, tol: f64) -> Minimum {
    assert!(points >= 3 && hi > lo);
    let step = (hi - lo) / (points - 1) as f64;
    let mut best = (0usize, f64::INFINITY);
    for i in 0..points {
        let v = f(lo + step * i as f64);
        if v < best.1 {
            best = (i, v);
        }
    }
    let i = best.0;
    let a = lo + step * i.saturating_sub(1) as f64;
    let b = lo + step * (i + 1).min(points - 1) as f64;
    let (mut x, mut value) = golden_section(&mut f, a, b, tol);
    let grid_x = lo + step * i as f64;
    if best.1 < value {
        x = grid_x;
        value = best.1;
    }
    let bound_hit = (x - lo).abs() <= tol.max(1e-12) || (hi - x).abs() <= tol.max(1e-12);
    Minimum { x, value, bound_hit }
}

/// Bisection for a sign change of `f` on `[lo, hi]`. Returns `None` when the
/// endpoint values share a sign.
pub fn bisect<F: FnMut(f64) -> f64>(mut f: F, mut lo: f64, mut hi: f64, tol: f64) -> Option<f64> {
    let mut flo = f(lo);
    let fhi = f(hi);
    if flo == 0.0 {
        return Some(lo);
    }
    if fhi == 0.0 {
        return Some(hi);
    }
    if flo.signum() == fhi.signum() || flo.is_nan() || fhi.is_nan() {
        return None;
    }
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if hi - lo <= tol || mid <= lo || mid >= hi {
            break;
        }
        let fm = f(mid);
        if fm == 0.0 {
            return Some(mid);
        }
        if fm.signum() == flo.signum() {
            lo = mid;
            flo = fm;
        } else {
            hi = mid;
        }
    }
    Some(0.5 * (lo + hi))
}

/// Sharpens a minimizer of a smooth `f` by bisecting the sign of a central
/// difference derivative within `x ± radius`. Keeps `x` if no sign change
/// is bracketed or the polished point is clearly worse.
pub fn polish_minimum<F: FnMut(f64) -> f64>(mut f: F, x: f64, radius: f64) -> (f64, f64) {
    let h = 1e-5 * x.abs().max(1.0);
    let fx = f(x);
    let root = bisect(|t| f(t + h) - f(t - h), x - radius, x + radius, 1e-14 * x.abs().max(1.0));
    match root {
        Some(t) => {
            let ft = f(t);
            // Near the optimum f is flat to rounding, so trust the derivative.
            if ft <= fx + 1e-12 * (1.0 + fx.abs()) {
                (t, ft)
            } else {
                (x, fx)
            }
        }
        None => (x, fx),
    }
}

/// Grid bootstrap, golden-section refinement and derivative polish.
pub fn minimize_smooth<F: FnMut(f64) -> f64>(mut f: F, lo: f64, hi: f64, points: usize) -> Minimum {
    let m = grid_then_golden(&mut f, lo, hi, points, 1e-10);
    if m.bound_hit {
        return m;
    }
    let (x, value) = polish_minimum(&mut f, m.x, 1e-4 * m.x.abs().max(1.0));
    Minimum {
        x,
        value,
        bound_hit: false,
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn golden_finds_parabola_vertex() {
        let (x, v) = golden_section(|x| (x - 0.3).powi(2) + 1.0, -2.0, 5.0, 1e-10);
        assert!((x - 0.3).abs() < 1e-7);
        assert!((v - 1.0).abs() < 1e-14);
    }

    #[test]
    fn grid_escapes_local_minimum_and_flags_bounds() {
        // Local min near -1, global near 2.
        let f = |x: f64| (x + 1.0).powi(2) * (x - 2.0).powi(2) - 0.5 * x;
        let m = grid_then_golden(f, -3.0, 3.0, 601, 1e-10);
        assert!((m.x - 2.0).abs() < 0.1);
        assert!(!m.bound_hit);

        let m = grid_then_golden(|x| x, -1.0, 1.0, 11, 1e-10);
        assert_eq!(m.x, -1.0);
        assert!(m.bound_hit);
    }

    #[test]
    fn polish_reaches_flat_minimum() {
        let f = |x: f64| 1.0 + 0.05 * (x - 0.123456789).powi(2);
        let m = minimize_smooth(f, -10.0, 10.0, 2001);
        assert!((m.x - 0.123456789).abs() < 1e-9, "{}", m.x);
    }

    #[test]
    fn bisect_root_and_no_root() {
        let r = bisect(|x| x * x - 2.0, 0.0, 2.0, 1e-14).unwrap();
        assert!((r - 2f64.sqrt()).abs() < 1e-13);
        assert!(bisect(|x| x * x + 1.0, -1.0, 1.0, 1e-12).is_none());
    }
}
