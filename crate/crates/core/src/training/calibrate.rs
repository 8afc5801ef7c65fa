use super::{RiskConfig, TrainingError, TrainingReport};
use crate::stats::ImbalanceStats;

/// Risk limits as a fraction of the imbalance statistics of a betting model.
pub fn calibrate_risk_limits(betting: &TrainingReport, fraction: f64, alpha: f64) -> Result<RiskConfig, TrainingError> {
    calibrate_from_series(&betting.imbalance, fraction, alpha)
}

pub(crate) fn calibrate_from_series(imbalance: &[f64], fraction: f64, alpha: f64) -> Result<RiskConfig, TrainingError> {
    if imbalance.is_empty() {
        return Err(TrainingError::EmptyImbalanceSeries);
    }
    if !(fraction > 0.0 && fraction <= 1.0) {
        return Err(TrainingError::InvalidConfig("fraction must lie in (0, 1]".into()));
    }
    if !(alpha > 0.0 && alpha < 1.0) {
        return Err(TrainingError::InvalidConfig("alpha must lie in (0, 1)".into()));
    }
    let s = ImbalanceStats::of(imbalance, alpha);
    Ok(RiskConfig {
        limit_mean: fraction * s.mean_abs,
        limit_cvar: fraction * s.cvar_abs,
        limit_ext: fraction * s.max_abs,
        alpha,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn limits_scale_statistics() {
        let r = calibrate_from_series(&[2.0, -6.0, 4.0, -4.0], 0.5, 0.95).unwrap();
        assert!((r.limit_mean - 2.0).abs() < 1e-12);

        let v: Vec<f64> = (1..=100).map(f64::from).collect();
        let r = calibrate_from_series(&v, 0.3, 0.95).unwrap();
        assert!((r.limit_cvar - 29.4).abs() < 1e-9);
        assert!((r.limit_ext - 30.0).abs() < 1e-12);

        let r = calibrate_from_series(&[-7.0; 24], 0.5, 0.9).unwrap();
        for l in [r.limit_mean, r.limit_cvar, r.limit_ext] {
            assert!((l - 3.5).abs() < 1e-12);
        }
    }

    #[test]
    fn rejects_empty_series() {
        assert!(matches!(
            calibrate_from_series(&[], 0.5, 0.95),
            Err(TrainingError::EmptyImbalanceSeries)
        ));
    }
}
