/// Differentiable, strictly concave, increasing utility of the source rate.
pub trait Utility {
    fn value(&self, z: f64) -> f64;

    fn derivative(&self, z: f64) -> f64;

    /// Solves `x = z + step * (U'(x) - price)` for `x > 0`.
    ///
    /// The left side minus the right is increasing in `x` because `U'` is
    /// decreasing, so bisection on a bracketing interval is enough. Utilities
    /// with a closed form should override this.
    fn implicit_step(&self, z: f64, step: f64, price: f64) -> f64 {
        let residual = |x: f64| x - z - step * (self.derivative(x) - price);
        let mut lo = f64::MIN_POSITIVE;
        let mut hi = z.max(1.0);
        while residual(hi) < 0.0 {
            hi *= 2.0;
        }
        if residual(lo) >= 0.0 {
            return lo;
        }
        for _ in 0..200 {
            let mid = 0.5 * (lo + hi);
            if residual(mid) < 0.0 {
                lo = mid;
            } else {
                hi = mid;
            }
            if hi - lo <= 1e-15 * hi {
                break;
            }
        }
        0.5 * (lo + hi)
    }
}

/// `U(z) = ln z`.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
pub struct LogUtility;

impl Utility for LogUtility {
    fn value(&self, z: f64) -> f64 {
        z.ln()
    }

    fn derivative(&self, z: f64) -> f64 {
        1.0 / z
    }

    // x^2 - (z - step*price) x - step = 0, positive root.
    fn implicit_step(&self, z: f64, step: f64, price: f64) -> f64 {
        let b = z - step * price;
        if b >= 0.0 {
            0.5 * (b + (b * b + 4.0 * step).sqrt())
        } else {
            // Rationalized form avoids cancellation when b is very negative.
            2.0 * step / ((b * b + 4.0 * step).sqrt() - b)
        }
    }
}
