#![allow(dead_code)]

use hpp_core::electrolyzer::{ElectrolyzerSpec, Plant};
use hpp_core::market_data::{
    compute_price_domains, generate_synthetic, Dataset, FeatureConfig, HourlyRecord, PriceDomains, Role,
    SyntheticGenConfig,
};

pub fn plant() -> Plant {
    let el = ElectrolyzerSpec::from_anchors(&[(1.5, 27.0), (6.0, 110.0), (10.0, 170.0)], 0.88, 880.0, 4.0).unwrap();
    Plant::new(10.0, el)
}

pub fn synthetic(days: usize, seed: u64) -> Dataset {
    generate_synthetic(&SyntheticGenConfig {
        seed,
        hours: 24 * days,
        ..Default::default()
    })
    .unwrap()
}

pub fn domains(data: &Dataset, k: usize) -> PriceDomains {
    compute_price_domains(data, k, -500.0, 4000.0).unwrap()
}

pub fn features4() -> FeatureConfig {
    FeatureConfig::new(["da_price_realized", "da_price_forecast", "wind_forecast", "constant_one"]).unwrap()
}

/// Builds a dataset from per-hour `(da price, balancing price, wind)`.
pub fn handmade(hours: &[(f64, f64, f64)]) -> Dataset {
    let records = hours
        .iter()
        .enumerate()
        .map(|(i, &(da, bal, wind))| HourlyRecord {
            t: i + 1,
            da_price_realized: da,
            da_price_forecast: da,
            balancing_price_realized: bal,
            wind_realized: wind,
            wind_forecast: wind,
            wind_forecast_agg: Some(50.0 * wind),
        })
        .collect();
    Dataset::new(records, Role::Train).unwrap()
}
