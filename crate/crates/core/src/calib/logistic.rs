use serde::{Deserialize, Serialize};

/// Parameters of `f(x) = 1 / (1 + exp(a·x + b))`. Increasing in `x` iff
/// `a < 0`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LogisticParams {
    pub a: f64,
    pub b: f64,
}

impl LogisticParams {
    pub fn new(a: f64, b: f64) -> Self {
        Self { a, b }
    }

    pub fn apply(&self, x: f64) -> f64 {
        logistic(x, *self)
    }
}

/// `1 / (1 + exp(a·x + b))` without overflow for large `|a·x + b|`.
pub fn logistic(x: f64, p: LogisticParams) -> f64 {
    let z = p.a * x + p.b;
    if z >= 0.0 {
        let e = (-z).exp();
        e / (1.0 + e)
    } else {
        1.0 / (1.0 + z.exp())
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;
    use proptest::prelude::*;

    #[test]
    fn examples() {
        for x in [-3.0, 0.0, 0.7, 1e9] {
            assert_eq!(logistic(x, LogisticParams::new(0.0, 0.0)), 0.5);
        }
        assert_eq!(logistic(0.5, LogisticParams::new(-2.0, 1.0)), 0.5);
        let expected = 1.0 / (1.0 + (-2f64).exp());
        assert_abs_diff_eq!(logistic(2.0, LogisticParams::new(-1.0, 0.0)), expected, epsilon = 1e-15);
        assert_abs_diff_eq!(expected, 0.8807971, epsilon = 1e-7);
    }

    #[test]
    fn saturates_without_nan() {
        let p = LogisticParams::new(-1.0, 0.0);
        assert_eq!(logistic(1e6, p), 1.0);
        assert_eq!(logistic(-1e6, p), 0.0);
        assert!(logistic(-750.0, p).is_finite());
        assert!(logistic(750.0, LogisticParams::new(1.0, 0.0)) >= 0.0);
    }

    proptest! {
        #[test]
        fn strictly_monotone_in_the_sign_of_a(
            a in prop_oneof![-10.0f64..-0.01, 0.01f64..10.0],
            b in -3.0f64..3.0,
            x in -1.0f64..1.0,
            dx in 1e-3f64..0.5,
        ) {
            let p = LogisticParams::new(a, b);
            let (lo, hi) = (logistic(x, p), logistic(x + dx, p));
            if a < 0.0 {
                prop_assert!(hi > lo);
            } else {
                prop_assert!(hi < lo);
            }
            prop_assert!(lo > 0.0 && lo < 1.0);
        }
    }
}
