//! Bounded scalar maximization: dense scan followed by golden-section refinement.

const SCAN_POINTS: usize = 4096;
const GOLDEN_ITERS: usize = 200;

/// Maximizes `g` on `[lo, hi]`, returning `(argmax, max)`.
///
/// The scan locates the basin of the global maximum, so `g` only needs to be
/// unimodal on the scale of one scan cell.
pub fn maximize_scalar<F: Fn(f64) -> f64>(g: F, lo: f64, hi: f64) -> (f64, f64) {
    assert!(lo <= hi, "empty interval [{lo}, {hi}]");
    if lo == hi {
        return (lo, g(lo));
    }
    let step = (hi - lo) / SCAN_POINTS as f64;
    let mut best = (lo, g(lo));
    let mut best_k = 0;
    for k in 1..=SCAN_POINTS {
        let x = if k == SCAN_POINTS { hi } else { lo + k as f64 * step };
        let gx = g(x);
        if gx > best.1 {
            best = (x, gx);
            best_k = k;
        }
    }

    let mut a = lo + best_k.saturating_sub(1) as f64 * step;
    let mut b = (lo + (best_k + 1) as f64 * step).min(hi);
    let inv_phi = 0.5 * (5.0_f64.sqrt() - 1.0);
    let mut c = b - inv_phi * (b - a);
    let mut d = a + inv_phi * (b - a);
    let mut gc = g(c);
    let mut gd = g(d);
    for _ in 0..GOLDEN_ITERS {
        if (b - a).abs() <= 1e-15 * (1.0 + a.abs().max(b.abs())) {
            break;
        }
        if gc > gd {
            b = d;
            d = c;
            gd = gc;
            c = b - inv_phi * (b - a);
            gc = g(c);
        } else {
            a = c;
            c = d;
            gc = gd;
            d = a + inv_phi * (b - a);
            gd = g(d);
        }
    }
    for (x, gx) in [(c, gc), (d, gd)] {
        if gx > best.1 {
            best = (x, gx);
        }
    }
    best
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn parabola() {
        let (x, m) = maximize_scalar(|u| u - u * u, 0.0, 2.0);
        assert!((x - 0.5).abs() < 1e-7);
        assert!((m - 0.25).abs() < 1e-15);
    }

    #[test]
    fn endpoint_maximum() {
        let (x, m) = maximize_scalar(|u| -u, 0.0, 3.0);
        assert_eq!(x, 0.0);
        assert_eq!(m, 0.0);
    }

    #[test]
    fn picks_global_of_two_bumps() {
        let g = |u: f64| (-(u - 1.0).powi(2) * 50.0).exp() + 2.0 * (-(u - 3.0).powi(2) * 50.0).exp();
        let (x, m) = maximize_scalar(g, 0.0, 4.0);
        assert!((x - 3.0).abs() < 1e-6);
        assert!((m - 2.0).abs() < 1e-10);
    }
}
