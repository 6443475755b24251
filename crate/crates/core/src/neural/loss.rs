/// Clamped L1 distance loss `|min(pred, delta) - min(gt, delta)|`.
pub fn clamped_l1(pred: f64, gt: f64, delta: f64) -> f64 {
    (pred.min(delta) - gt.min(delta)).abs()
}

/// Derivative of [`clamped_l1`] with respect to `pred` (0 at kinks).
pub fn clamped_l1_grad(pred: f64, gt: f64, delta: f64) -> f64 {
    if pred >= delta {
        return 0.0;
    }
    let r = pred - gt.min(delta);
    if r > 0.0 {
        1.0
    } else if r < 0.0 {
        -1.0
    } else {
        0.0
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn worked_values() {
        assert!((clamped_l1(0.2, 0.05, 0.1) - 0.05).abs() < 1e-15);
        assert_eq!(clamped_l1(0.03, 0.03, 0.1), 0.0);
        assert_eq!(clamped_l1(0.5, 0.7, 0.1), 0.0);
    }

    proptest! {
        #[test]
        fn lipschitz_and_bounded(a in 0.0..1.0f64, b in 0.0..1.0f64, g in 0.0..1.0f64, delta in 0.01..0.5f64) {
            let la = clamped_l1(a, g, delta);
            let lb = clamped_l1(b, g, delta);
            prop_assert!((la - lb).abs() <= (a - b).abs() + 1e-15);
            prop_assert!((clamped_l1(g, a, delta) - clamped_l1(g, b, delta)).abs() <= (a - b).abs() + 1e-15);
            prop_assert!(la <= delta);
        }
    }
}
