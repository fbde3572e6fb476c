//! Scalar activations shared by the recurrent kernels.

/// Numerically stable logistic function.
#[inline]
pub fn sigmoid(x: f64) -> f64 {
    if x >= 0.0 {
        1.0 / (1.0 + (-x).exp())
    } else {
        let e = x.exp();
        e / (1.0 + e)
    }
}

#[inline]
pub fn tanh(x: f64) -> f64 {
    x.tanh()
}

/// swish(x) = x·σ(x).
#[inline]
pub fn swish(x: f64) -> f64 {
    x * sigmoid(x)
}

/// d/dx swish(x) = σ(x)·(1 + x·(1 − σ(x))).
#[inline]
pub fn swish_prime(x: f64) -> f64 {
    let s = sigmoid(x);
    s * (1.0 + x * (1.0 - s))
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;

    #[test]
    fn swish_fixed_points() {
        assert_eq!(swish(0.0), 0.0);
        // 1/(1+e⁻¹) evaluated directly
        assert_abs_diff_eq!(swish(1.0), 0.731059, epsilon = 1e-6);
    }

    #[test]
    fn swish_global_minimum() {
        // locate the minimum independently with a golden-section search
        let (mut a, mut b) = (-3.0f64, 0.0f64);
        let phi = (5.0f64.sqrt() - 1.0) / 2.0;
        for _ in 0..200 {
            let c = b - phi * (b - a);
            let d = a + phi * (b - a);
            if swish(c) < swish(d) {
                b = d;
            } else {
                a = c;
            }
        }
        let x_min = 0.5 * (a + b);
        assert_abs_diff_eq!(x_min, -1.27846, epsilon = 1e-4);
        assert_abs_diff_eq!(swish(x_min), -0.2784645, epsilon = 1e-6);
        // bounded below by the minimum everywhere
        let mut x = -60.0;
        while x < 60.0 {
            assert!(swish(x) >= swish(x_min) - 1e-12);
            x += 0.01;
        }
    }

    #[test]
    fn swish_negative_tail_approaches_zero_from_below() {
        assert!(swish(-30.0) < 0.0);
        assert!(swish(-30.0).abs() < 1e-11);
    }

    #[test]
    fn swish_prime_matches_finite_difference() {
        let eps = 1e-6;
        let mut x = -4.0;
        while x < 4.0 {
            let fd = (swish(x + eps) - swish(x - eps)) / (2.0 * eps);
            assert_abs_diff_eq!(swish_prime(x), fd, epsilon = 1e-8);
            x += 0.1;
        }
    }

    #[test]
    fn sigmoid_stable_at_extremes() {
        assert_eq!(sigmoid(800.0), 1.0);
        assert_eq!(sigmoid(-800.0), 0.0);
        assert_abs_diff_eq!(sigmoid(0.0), 0.5, epsilon = 1e-15);
    }
}
