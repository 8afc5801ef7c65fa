//! Empirical statistics of imbalance series.

/// Mean of the worst `(1 - alpha)` share of `values`, with the boundary
/// observation weighted fractionally when `(1 - alpha) n` is not whole. This
/// equals `min_v v + Σ max(x - v, 0) / ((1 - alpha) n)`, the form used in the
/// training constraint.
pub fn empirical_cvar(values: &[f64], alpha: f64) -> f64 {
    assert!(!values.is_empty(), "CVaR of an empty series");
    assert!(alpha > 0.0 && alpha < 1.0, "alpha must lie in (0, 1)");
    let mut sorted = values.to_vec();
    sorted.sort_by(|a, b| b.total_cmp(a));
    let n = sorted.len() as f64;
    // Snap to the nearest whole count when rounding error is all that separates them.
    let mut m = (1.0 - alpha) * n;
    if (m - m.round()).abs() < 1e-9 {
        m = m.round();
    }
    let m = m.max(f64::MIN_POSITIVE);
    let whole = (m.floor() as usize).min(sorted.len());
    let frac = m - whole as f64;
    let mut total: f64 = sorted[..whole].iter().sum();
    if frac > 0.0 && whole < sorted.len() {
        total += frac * sorted[whole];
    }
    total / m
}

/// Imbalance magnitude statistics.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct ImbalanceStats {
    pub mean_abs: f64,
    pub cvar_abs: f64,
    pub max_abs: f64,
}

impl ImbalanceStats {
    pub fn of(imbalance: &[f64], alpha: f64) -> Self {
        let abs: Vec<f64> = imbalance.iter().map(|v| v.abs()).collect();
        Self {
            mean_abs: abs.iter().sum::<f64>() / abs.len() as f64,
            cvar_abs: empirical_cvar(&abs, alpha),
            max_abs: abs.iter().copied().fold(0.0, f64::max),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn tail_mean_of_whole_counts() {
        let v: Vec<f64> = (1..=100).map(f64::from).collect();
        assert!((empirical_cvar(&v, 0.95) - 98.0).abs() < 1e-12);
        assert!((empirical_cvar(&v, 0.5) - 75.5).abs() < 1e-12);
    }

    #[test]
    fn constant_series() {
        assert!((empirical_cvar(&[3.0; 17], 0.95) - 3.0).abs() < 1e-12);
        let s = ImbalanceStats::of(&[-2.0, 2.0, 2.0, -2.0], 0.9);
        assert_eq!(s.mean_abs, 2.0);
        assert!((s.cvar_abs - 2.0).abs() < 1e-12);
        assert_eq!(s.max_abs, 2.0);
    }

    proptest! {
        /// The sort-based value equals the minimum over thresholds of the
        /// excess-loss form; the minimum is attained at a sample value.
        #[test]
        fn matches_threshold_minimization(v in proptest::collection::vec(0.0f64..100.0, 1..60), alpha in 0.5f64..0.99) {
            let n = v.len() as f64;
            let best = v
                .iter()
                .map(|&t| t + v.iter().map(|&x| (x - t).max(0.0)).sum::<f64>() / ((1.0 - alpha) * n))
                .fold(f64::INFINITY, f64::min);
            let got = empirical_cvar(&v, alpha);
            prop_assert!((got - best).abs() <= 1e-9 * (1.0 + best.abs()), "{} vs {}", got, best);
            let max = v.iter().copied().fold(0.0, f64::max);
            let mean = v.iter().sum::<f64>() / n;
            prop_assert!(got <= max + 1e-9 && got >= mean - 1e-9);
        }
    }
}
