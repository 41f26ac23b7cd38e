//! One-dimensional search helpers.

const INV_PHI: f64 = 0.618_033_988_749_894_9;

/// Golden-section minimisation of `f` on `[lo, hi]`. Stops when the bracket is
/// narrower than `tol * max(|x|, tiny)`. Returns `(argmin, min)`; the endpoints
/// are included as candidates so a boundary minimum is reported exactly.
pub fn golden_min<F: Fn(f64) -> f64>(f: F, lo: f64, hi: f64, tol: f64) -> (f64, f64) {
    let (mut a, mut b) = (lo, hi);
    let mut c = b - INV_PHI * (b - a);
    let mut d = a + INV_PHI * (b - a);
    let (mut fc, mut fd) = (f(c), f(d));
    for _ in 0..200 {
        if (b - a).abs() <= tol * a.abs().max(b.abs()).max(1e-300) {
            break;
        }
        if fc < fd {
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
    let mut best = if fc < fd { (c, fc) } else { (d, fd) };
    for x in [lo, hi] {
        let fx = f(x);
        if fx < best.1 {
            best = (x, fx);
        }
    }
    best
}

pub fn golden_max<F: Fn(f64) -> f64>(f: F, lo: f64, hi: f64, tol: f64) -> (f64, f64) {
    let (x, v) = golden_min(|x| -f(x), lo, hi, tol);
    (x, -v)
}

/// Bisection on a bracket where `pred(lo)` holds and `pred(hi)` does not,
/// halving in `ln r` while the bracket spans more than a factor two. Returns
/// the final `(lo, hi)` with `hi - lo <= rel_tol * hi`.
pub fn bisect_radius<P: Fn(f64) -> bool>(pred: P, mut lo: f64, mut hi: f64, rel_tol: f64) -> (f64, f64) {
    for _ in 0..400 {
        if (hi - lo).abs() <= rel_tol * lo.abs().max(hi.abs()) {
            break;
        }
        let mid = if lo > 0.0 && hi > 0.0 && (hi / lo > 2.0 || lo / hi > 2.0) {
            (lo * hi).sqrt()
        } else {
            0.5 * (lo + hi)
        };
        if mid == lo || mid == hi {
            break;
        }
        if pred(mid) {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    (lo, hi)
}
