//! Hourly market and wind data: loading, synthetic generation, feature
//! vectors and day-ahead price domains.

use std::collections::HashSet;
use std::fs::File;
use std::io::{Read, Write};
use std::path::Path;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

pub const COLUMNS: [&str; 7] = [
    "t",
    "da_price_realized",
    "da_price_forecast",
    "balancing_price_realized",
    "wind_realized",
    "wind_forecast",
    "wind_forecast_agg",
];

pub const REALIZED_PRICE: &str = "da_price_realized";
pub const CONSTANT: &str = "constant_one";

#[derive(Debug, thiserror::Error)]
pub enum DataError {
    #[error("cannot read {path}: {source}")]
    Io { path: String, source: std::io::Error },
    #[error("malformed CSV: {0}")]
    Csv(#[from] csv::Error),
    #[error("missing column `{0}`")]
    MissingColumn(String),
    #[error("row {row}: column `{column}` is not a number")]
    NonNumericCell { row: usize, column: String },
    #[error("row {row}: time index {found} does not follow {previous}")]
    GapInTimeIndex { row: usize, previous: usize, found: usize },
    #[error("{hours} hours do not make whole days")]
    PartialDay { hours: usize },
    #[error("dataset is empty")]
    Empty,
    #[error("row {row}: {reason}")]
    InvalidRecord { row: usize, reason: String },
    #[error("feature `{0}` is not available")]
    MissingFeature(String),
    #[error("invalid feature list: {0}")]
    InvalidFeatures(String),
    #[error("price domains are degenerate: {0}")]
    DegenerateDomains(String),
    #[error("price {price} outside [{floor}, {ceiling}]")]
    OutOfRange { price: f64, floor: f64, ceiling: f64 },
    #[error("invalid generator settings: {0}")]
    InvalidGenerator(String),
}

/// One hour of realized and forecast prices and wind.
#[derive(Clone, Debug, PartialEq)]
pub struct HourlyRecord {
    /// Global hour index, starting at 1.
    pub t: usize,
    pub da_price_realized: f64,
    pub da_price_forecast: f64,
    pub balancing_price_realized: f64,
    pub wind_realized: f64,
    pub wind_forecast: f64,
    /// Regional aggregate wind forecast, when the source provides one.
    pub wind_forecast_agg: Option<f64>,
}

impl HourlyRecord {
    pub fn feature(&self, name: &str) -> Option<f64> {
        match name {
            "da_price_realized" => Some(self.da_price_realized),
            "da_price_forecast" => Some(self.da_price_forecast),
            "wind_forecast" => Some(self.wind_forecast),
            "wind_forecast_agg" => self.wind_forecast_agg,
            CONSTANT => Some(1.0),
            _ => None,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Role {
    Train,
    Test,
}

/// A gapless run of whole days.
#[derive(Clone, Debug, PartialEq)]
pub struct Dataset {
    records: Vec<HourlyRecord>,
    pub role: Role,
}

impl Dataset {
    pub fn new(records: Vec<HourlyRecord>, role: Role) -> Result<Self, DataError> {
        if records.is_empty() {
            return Err(DataError::Empty);
        }
        for (row, w) in records.windows(2).enumerate() {
            if w[1].t != w[0].t + 1 {
                return Err(DataError::GapInTimeIndex {
                    row: row + 2,
                    previous: w[0].t,
                    found: w[1].t,
                });
            }
        }
        if records[0].t == 0 {
            return Err(DataError::InvalidRecord {
                row: 1,
                reason: "time index starts at 1".into(),
            });
        }
        if records.len() % 24 != 0 || (records[0].t - 1) % 24 != 0 {
            return Err(DataError::PartialDay { hours: records.len() });
        }
        Ok(Self { records, role })
    }

    pub fn records(&self) -> &[HourlyRecord] {
        &self.records
    }

    pub fn len(&self) -> usize {
        self.records.len()
    }

    pub fn is_empty(&self) -> bool {
        self.records.is_empty()
    }

    pub fn num_days(&self) -> usize {
        self.records.len() / 24
    }

    /// Records of day `d` (0-based within this dataset).
    pub fn day(&self, d: usize) -> &[HourlyRecord] {
        &self.records[24 * d..24 * (d + 1)]
    }

    /// Splits after `train_days` whole days.
    pub fn split(&self, train_days: usize) -> Result<(Dataset, Dataset), DataError> {
        if train_days == 0 || train_days >= self.num_days() {
            return Err(DataError::InvalidRecord {
                row: 0,
                reason: format!(
                    "cannot split {} days into {} training days and a non-empty test set",
                    self.num_days(),
                    train_days
                ),
            });
        }
        let (a, b) = self.records.split_at(24 * train_days);
        Ok((Dataset::new(a.to_vec(), Role::Train)?, Dataset::new(b.to_vec(), Role::Test)?))
    }

    /// Keeps only days `from..to` (0-based).
    pub fn days(&self, from: usize, to: usize, role: Role) -> Result<Dataset, DataError> {
        Dataset::new(self.records[24 * from..24 * to].to_vec(), role)
    }

    pub fn max_da_price(&self) -> f64 {
        self.records.iter().map(|r| r.da_price_realized).fold(f64::NEG_INFINITY, f64::max)
    }

    pub fn min_da_price(&self) -> f64 {
        self.records.iter().map(|r| r.da_price_realized).fold(f64::INFINITY, f64::min)
    }
}

/// `j = (t - 1) mod 24 + 1`.
pub fn hour_of_day(t: usize) -> usize {
    debug_assert!(t >= 1);
    (t - 1) % 24 + 1
}

fn parse_cell(row: usize, column: &str, s: &str) -> Result<f64, DataError> {
    s.trim().parse::<f64>().ok().filter(|v| v.is_finite()).ok_or_else(|| DataError::NonNumericCell {
        row,
        column: column.to_string(),
    })
}

pub fn load_csv(path: &Path) -> Result<Dataset, DataError> {
    let mut text = String::new();
    File::open(path)
        .and_then(|mut f| f.read_to_string(&mut text))
        .map_err(|source| DataError::Io {
            path: path.display().to_string(),
            source,
        })?;
    parse_csv(&text)
}

pub fn parse_csv(text: &str) -> Result<Dataset, DataError> {
    let mut reader = csv::ReaderBuilder::new().trim(csv::Trim::All).from_reader(text.as_bytes());
    let headers = reader.headers()?.clone();
    let find = |name: &str| headers.iter().position(|h| h == name);
    let mut idx = [0usize; 6];
    for (slot, name) in idx.iter_mut().zip(&COLUMNS[..6]) {
        *slot = find(name).ok_or_else(|| DataError::MissingColumn(name.to_string()))?;
    }
    let agg = find(COLUMNS[6]);

    let mut records = Vec::new();
    for (i, row) in reader.records().enumerate() {
        let row_no = i + 1;
        let row = row?;
        let get = |c: usize, name: &str| parse_cell(row_no, name, row.get(c).unwrap_or(""));
        let t = get(idx[0], "t")?;
        if t < 1.0 || t.fract() != 0.0 {
            return Err(DataError::NonNumericCell {
                row: row_no,
                column: "t".into(),
            });
        }
        let rec = HourlyRecord {
            t: t as usize,
            da_price_realized: get(idx[1], COLUMNS[1])?,
            da_price_forecast: get(idx[2], COLUMNS[2])?,
            balancing_price_realized: get(idx[3], COLUMNS[3])?,
            wind_realized: get(idx[4], COLUMNS[4])?,
            wind_forecast: get(idx[5], COLUMNS[5])?,
            wind_forecast_agg: match agg {
                Some(c) => Some(get(c, COLUMNS[6])?),
                None => None,
            },
        };
        if rec.wind_realized < 0.0 || rec.wind_forecast < 0.0 {
            return Err(DataError::InvalidRecord {
                row: row_no,
                reason: "negative wind".into(),
            });
        }
        records.push(rec);
    }
    Dataset::new(records, Role::Train)
}

pub fn write_csv(data: &Dataset, out: &mut impl Write) -> std::io::Result<()> {
    writeln!(out, "{}", COLUMNS.join(","))?;
    for r in data.records() {
        let agg = r.wind_forecast_agg.map(|v| v.to_string()).unwrap_or_default();
        writeln!(
            out,
            "{},{},{},{},{},{},{}",
            r.t,
            r.da_price_realized,
            r.da_price_forecast,
            r.balancing_price_realized,
            r.wind_realized,
            r.wind_forecast,
            agg
        )?;
    }
    Ok(())
}

/// Ordered feature names. The realized day-ahead price comes first and the
/// constant feature last.
#[derive(Clone, Debug, PartialEq)]
pub struct FeatureConfig {
    names: Vec<String>,
}

impl FeatureConfig {
    pub fn new<S: Into<String>>(names: impl IntoIterator<Item = S>) -> Result<Self, DataError> {
        let names: Vec<String> = names.into_iter().map(Into::into).collect();
        if names.len() < 2 {
            return Err(DataError::InvalidFeatures("need at least the realized price and the constant".into()));
        }
        if names[0] != REALIZED_PRICE {
            return Err(DataError::InvalidFeatures(format!("first feature must be `{REALIZED_PRICE}`")));
        }
        if names[names.len() - 1] != CONSTANT {
            return Err(DataError::InvalidFeatures(format!("last feature must be `{CONSTANT}`")));
        }
        let mut seen = HashSet::new();
        for n in &names {
            if !seen.insert(n.as_str()) {
                return Err(DataError::InvalidFeatures(format!("duplicate feature `{n}`")));
            }
        }
        Ok(Self { names })
    }

    pub fn names(&self) -> &[String] {
        &self.names
    }

    /// Number of features N, including the constant.
    pub fn len(&self) -> usize {
        self.names.len()
    }

    pub fn is_empty(&self) -> bool {
        false
    }
}

impl Default for FeatureConfig {
    fn default() -> Self {
        Self::new([REALIZED_PRICE, "da_price_forecast", "wind_forecast", "wind_forecast_agg", CONSTANT])
            .expect("valid default features")
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct FeatureVector {
    pub x: Vec<f64>,
}

impl FeatureVector {
    /// The features without the realized day-ahead price.
    pub fn breve(&self) -> &[f64] {
        &self.x[1..]
    }
}

pub fn build_feature_vector(rec: &HourlyRecord, cfg: &FeatureConfig) -> Result<FeatureVector, DataError> {
    let x = cfg
        .names()
        .iter()
        .map(|n| rec.feature(n).ok_or_else(|| DataError::MissingFeature(n.clone())))
        .collect::<Result<Vec<_>, _>>()?;
    Ok(FeatureVector { x })
}

/// The features known before the day-ahead auction clears.
pub fn breve_features(rec: &HourlyRecord, cfg: &FeatureConfig) -> Result<Vec<f64>, DataError> {
    cfg.names()[1..]
        .iter()
        .map(|n| rec.feature(n).ok_or_else(|| DataError::MissingFeature(n.clone())))
        .collect()
}

/// Partition of the day-ahead price axis into `K` right-closed intervals.
#[derive(Clone, Debug, PartialEq)]
pub struct PriceDomains {
    boundaries: Vec<f64>,
    pub floor: f64,
    pub ceiling: f64,
}

impl PriceDomains {
    pub fn new(boundaries: Vec<f64>, floor: f64, ceiling: f64) -> Result<Self, DataError> {
        if !(floor < ceiling) {
            return Err(DataError::DegenerateDomains(format!("floor {floor} is not below ceiling {ceiling}")));
        }
        let mut prev = floor;
        for &b in &boundaries {
            if !(b > prev) {
                return Err(DataError::DegenerateDomains(format!("boundary {b} does not increase past {prev}")));
            }
            prev = b;
        }
        if !(prev < ceiling) {
            return Err(DataError::DegenerateDomains(format!("boundary {prev} is not below ceiling {ceiling}")));
        }
        Ok(Self {
            boundaries,
            floor,
            ceiling,
        })
    }

    pub fn boundaries(&self) -> &[f64] {
        &self.boundaries
    }

    pub fn count(&self) -> usize {
        self.boundaries.len() + 1
    }

    /// Lower and upper edge of domain `k` (1-based).
    pub fn edges(&self, k: usize) -> (f64, f64) {
        let lo = if k == 1 { self.floor } else { self.boundaries[k - 2] };
        let hi = if k == self.count() { self.ceiling } else { self.boundaries[k - 1] };
        (lo, hi)
    }
}

/// Linear interpolation between order statistics at position `(n-1) p`.
pub fn quantile_sorted(sorted: &[f64], p: f64) -> f64 {
    let h = (sorted.len() - 1) as f64 * p;
    let lo = h.floor() as usize;
    let hi = (lo + 1).min(sorted.len() - 1);
    sorted[lo] + (h - lo as f64) * (sorted[hi] - sorted[lo])
}

/// Boundaries at the `i/K` quantiles of the realized day-ahead prices.
pub fn compute_price_domains(train: &Dataset, k: usize, floor: f64, ceiling: f64) -> Result<PriceDomains, DataError> {
    if k == 0 {
        return Err(DataError::DegenerateDomains("need at least one domain".into()));
    }
    if train.is_empty() {
        return Err(DataError::Empty);
    }
    let mut prices: Vec<f64> = train.records().iter().map(|r| r.da_price_realized).collect();
    prices.sort_by(f64::total_cmp);
    let mut bounds: Vec<f64> = (1..k).map(|i| quantile_sorted(&prices, i as f64 / k as f64)).collect();
    bounds.dedup();
    if bounds.len() < k - 1 {
        return Err(DataError::DegenerateDomains(format!(
            "only {} distinct quantiles for {} domains",
            bounds.len(),
            k
        )));
    }
    // Every domain must hold at least one training price.
    if bounds.last().is_some_and(|&b| b >= prices[prices.len() - 1]) {
        return Err(DataError::DegenerateDomains("top domain holds no training price".into()));
    }
    PriceDomains::new(bounds, floor, ceiling)
}

/// 1-based domain `k` with `price` in `(λ_{k-1}, λ_k]`; the floor belongs to domain 1.
pub fn domain_index(price: f64, domains: &PriceDomains) -> Result<usize, DataError> {
    if !(price >= domains.floor && price <= domains.ceiling) {
        return Err(DataError::OutOfRange {
            price,
            floor: domains.floor,
            ceiling: domains.ceiling,
        });
    }
    Ok(domains.boundaries.partition_point(|&b| b < price) + 1)
}

/// Parameters of the synthetic price and wind generator.
#[derive(Clone, Debug, PartialEq)]
pub struct SyntheticGenConfig {
    pub seed: u64,
    pub hours: usize,
    /// Long-run mean of the day-ahead price, €/MWh.
    pub mean_price: f64,
    /// Fraction of the price deviation that decays each hour.
    pub reversion: f64,
    /// Hourly shock of the price deviation, €/MWh.
    pub volatility: f64,
    /// Amplitude of the intraday price shape, €/MWh.
    pub daily_amplitude: f64,
    pub price_floor: f64,
    pub price_ceiling: f64,
    pub wind_capacity: f64,
    /// Lag-one correlation of the latent wind state.
    pub wind_autocorr: f64,
    /// Offset of the latent wind state; 0 centres output at half capacity.
    pub wind_level: f64,
    /// Spread of the latent wind state.
    pub wind_spread: f64,
    pub price_forecast_noise: f64,
    pub wind_forecast_noise: f64,
    /// Capacity of the region behind the aggregate wind forecast, MW.
    pub agg_capacity: f64,
    pub agg_noise: f64,
    /// Balancing-price response to the wind forecast error, €/MWh per MW.
    pub spread_per_mw: f64,
    /// Amplitude of the hour-of-day pattern in the balancing spread, €/MWh.
    pub spread_daily: f64,
    pub spread_noise: f64,
}

impl Default for SyntheticGenConfig {
    fn default() -> Self {
        Self {
            seed: 1,
            hours: 24 * 90,
            mean_price: 50.0,
            reversion: 0.1,
            volatility: 6.0,
            daily_amplitude: 12.0,
            price_floor: -500.0,
            price_ceiling: 4000.0,
            wind_capacity: 10.0,
            wind_autocorr: 0.95,
            wind_level: 0.0,
            wind_spread: 1.6,
            price_forecast_noise: 6.0,
            wind_forecast_noise: 1.2,
            agg_capacity: 500.0,
            agg_noise: 0.08,
            spread_per_mw: 4.0,
            spread_daily: 6.0,
            spread_noise: 10.0,
        }
    }
}

impl SyntheticGenConfig {
    pub fn validate(&self) -> Result<(), DataError> {
        let bad = |m: &str| Err(DataError::InvalidGenerator(m.to_string()));
        if self.hours == 0 || self.hours % 24 != 0 {
            return bad("hours must be a positive multiple of 24");
        }
        let non_negative = [
            self.volatility,
            self.daily_amplitude,
            self.wind_spread,
            self.price_forecast_noise,
            self.wind_forecast_noise,
            self.agg_noise,
            self.spread_noise,
        ];
        if non_negative.iter().any(|v| !(v.is_finite() && *v >= 0.0)) {
            return bad("volatilities and noise levels must be non-negative");
        }
        if !(self.reversion > 0.0 && self.reversion <= 1.0) {
            return bad("reversion must lie in (0, 1]");
        }
        if !(self.wind_autocorr >= 0.0 && self.wind_autocorr < 1.0) {
            return bad("wind autocorrelation must lie in [0, 1)");
        }
        if !(self.wind_capacity > 0.0 && self.agg_capacity > 0.0) {
            return bad("capacities must be positive");
        }
        if !(self.price_floor < self.mean_price && self.mean_price < self.price_ceiling) {
            return bad("mean price must lie between floor and ceiling");
        }
        Ok(())
    }
}

fn cents(v: f64) -> f64 {
    (v * 100.0).round() / 100.0
}

/// Generates a reproducible dataset: a mean-reverting day-ahead price with an
/// intraday shape, a bounded autocorrelated wind series, noisy forecasts of
/// both, and a balancing price that deviates from the day-ahead price in
/// either direction depending on the wind forecast error.
pub fn generate_synthetic(cfg: &SyntheticGenConfig) -> Result<Dataset, DataError> {
    cfg.validate()?;
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let mut normal = move || -> f64 { rng.sample(StandardNormal) };
    let tau = std::f64::consts::TAU;
    let innovation = (1.0 - cfg.wind_autocorr * cfg.wind_autocorr).sqrt();

    let mut deviation = 0.0;
    let mut latent: f64 = normal();
    let mut records = Vec::with_capacity(cfg.hours);
    for t in 1..=cfg.hours {
        let j = hour_of_day(t) as f64;
        deviation = (1.0 - cfg.reversion) * deviation + cfg.volatility * normal();
        let shape = cfg.daily_amplitude * (tau * (j - 9.0) / 24.0).sin();
        let price = (cfg.mean_price + shape + deviation).clamp(cfg.price_floor, cfg.price_ceiling);
        let price_fc = (price + cfg.price_forecast_noise * normal()).clamp(cfg.price_floor, cfg.price_ceiling);

        latent = cfg.wind_autocorr * latent + innovation * normal();
        let share = 1.0 / (1.0 + (-(cfg.wind_level + cfg.wind_spread * latent)).exp());
        let wind = (cfg.wind_capacity * share).clamp(0.0, cfg.wind_capacity);
        let wind_fc = (wind + cfg.wind_forecast_noise * normal()).clamp(0.0, cfg.wind_capacity);
        let agg_share = (wind_fc / cfg.wind_capacity + cfg.agg_noise * normal()).clamp(0.0, 1.0);
        let agg = cfg.agg_capacity * agg_share;

        // More wind than forecast leaves the system long, which pushes the
        // imbalance price below the day-ahead price, and vice versa.
        let spread = cfg.spread_daily * (tau * (j - 3.0) / 24.0).cos() - cfg.spread_per_mw * (wind - wind_fc)
            + cfg.spread_noise * normal();
        let balancing = (price + spread).clamp(cfg.price_floor, cfg.price_ceiling);

        records.push(HourlyRecord {
            t,
            da_price_realized: cents(price),
            da_price_forecast: cents(price_fc),
            balancing_price_realized: cents(balancing),
            wind_realized: (wind * 1e4).round() / 1e4,
            wind_forecast: (wind_fc * 1e4).round() / 1e4,
            wind_forecast_agg: Some((agg * 1e3).round() / 1e3),
        });
    }
    Dataset::new(records, Role::Train)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn rec(t: usize) -> HourlyRecord {
        HourlyRecord {
            t,
            da_price_realized: 150.0,
            da_price_forecast: 140.0,
            balancing_price_realized: 120.0,
            wind_realized: 4.0,
            wind_forecast: 5.0,
            wind_forecast_agg: None,
        }
    }

    fn csv_rows(n: usize, drop: Option<&str>) -> String {
        let cols: Vec<&str> = COLUMNS.iter().copied().filter(|c| Some(*c) != drop).collect();
        let mut s = cols.join(",") + "\n";
        for t in 1..=n {
            let vals: Vec<String> = cols
                .iter()
                .map(|c| if *c == "t" { t.to_string() } else { "1.5".to_string() })
                .collect();
            s += &(vals.join(",") + "\n");
        }
        s
    }

    #[test]
    fn loads_whole_days() {
        let d = parse_csv(&csv_rows(48, None)).unwrap();
        assert_eq!(d.num_days(), 2);
        assert_eq!(d.records()[47].t, 48);
    }

    #[test]
    fn missing_column_is_reported() {
        let err = parse_csv(&csv_rows(24, Some("balancing_price_realized"))).unwrap_err();
        assert!(matches!(err, DataError::MissingColumn(c) if c == "balancing_price_realized"));
    }

    #[test]
    fn partial_day_is_rejected() {
        assert!(matches!(parse_csv(&csv_rows(36, None)), Err(DataError::PartialDay { hours: 36 })));
    }

    #[test]
    fn gaps_and_bad_cells_are_rejected() {
        let mut text = csv_rows(24, None);
        text = text.replacen("\n5,", "\n6,", 1);
        assert!(matches!(parse_csv(&text), Err(DataError::GapInTimeIndex { .. })));
        let text = csv_rows(24, None).replacen("1.5", "abc", 1);
        assert!(matches!(parse_csv(&text), Err(DataError::NonNumericCell { row: 1, .. })));
    }

    #[test]
    fn aggregate_column_is_optional() {
        let d = parse_csv(&csv_rows(24, Some("wind_forecast_agg"))).unwrap();
        assert_eq!(d.records()[0].wind_forecast_agg, None);
        let cfg = FeatureConfig::default();
        assert!(matches!(
            build_feature_vector(&d.records()[0], &cfg),
            Err(DataError::MissingFeature(f)) if f == "wind_forecast_agg"
        ));
    }

    #[test]
    fn feature_vector_assembly() {
        let cfg = FeatureConfig::new([REALIZED_PRICE, "da_price_forecast", "wind_forecast", CONSTANT]).unwrap();
        let fv = build_feature_vector(&rec(1), &cfg).unwrap();
        assert_eq!(fv.x, vec![150.0, 140.0, 5.0, 1.0]);
        assert_eq!(fv.breve(), &[140.0, 5.0, 1.0]);
        assert_eq!(breve_features(&rec(1), &cfg).unwrap(), vec![140.0, 5.0, 1.0]);

        let minimal = FeatureConfig::new([REALIZED_PRICE, CONSTANT]).unwrap();
        assert_eq!(build_feature_vector(&rec(1), &minimal).unwrap().x, vec![150.0, 1.0]);

        let absent = FeatureConfig::new([REALIZED_PRICE, "wind_forecast_agg", CONSTANT]).unwrap();
        assert!(matches!(build_feature_vector(&rec(1), &absent), Err(DataError::MissingFeature(_))));
    }

    #[test]
    fn feature_config_rules() {
        assert!(FeatureConfig::new([CONSTANT, REALIZED_PRICE]).is_err());
        assert!(FeatureConfig::new([REALIZED_PRICE]).is_err());
        assert!(FeatureConfig::new([REALIZED_PRICE, "wind_forecast", "wind_forecast", CONSTANT]).is_err());
    }

    fn dataset_with_prices(prices: &[f64]) -> Dataset {
        let records = prices
            .iter()
            .enumerate()
            .map(|(i, &p)| HourlyRecord {
                da_price_realized: p,
                ..rec(i + 1)
            })
            .collect();
        Dataset { records, role: Role::Train }
    }

    #[test]
    fn quantile_domains() {
        let prices: Vec<f64> = (1..=100).map(f64::from).collect();
        let d = compute_price_domains(&dataset_with_prices(&prices), 4, -500.0, 4000.0).unwrap();
        // Oracle: sort, then interpolate at (n-1)p by hand.
        let expected: Vec<f64> = [0.25, 0.5, 0.75]
            .iter()
            .map(|p| {
                let h = 99.0 * p;
                let lo = h as usize;
                prices[lo] + (h - lo as f64) * (prices[lo + 1] - prices[lo])
            })
            .collect();
        for (got, want) in d.boundaries().iter().zip(&expected) {
            assert!((got - want).abs() < 1e-12);
        }
        assert!((d.boundaries()[0] - 25.75).abs() < 1e-12);
        assert!((d.boundaries()[1] - 50.5).abs() < 1e-12);
        assert!((d.boundaries()[2] - 75.25).abs() < 1e-12);

        let one = compute_price_domains(&dataset_with_prices(&prices), 1, -500.0, 4000.0).unwrap();
        assert_eq!(one.count(), 1);
        assert!(one.boundaries().is_empty());

        let flat = dataset_with_prices(&[50.0; 24]);
        assert!(matches!(
            compute_price_domains(&flat, 2, -500.0, 4000.0),
            Err(DataError::DegenerateDomains(_))
        ));
    }

    #[test]
    fn domain_membership_is_right_closed() {
        let d = PriceDomains::new(vec![100.0], 0.0, 1000.0).unwrap();
        assert_eq!(domain_index(150.0, &d).unwrap(), 2);
        assert_eq!(domain_index(100.0, &d).unwrap(), 1);
        assert_eq!(domain_index(0.0, &d).unwrap(), 1);
        assert_eq!(domain_index(1000.0, &d).unwrap(), 2);
        assert!(matches!(domain_index(2000.0, &d), Err(DataError::OutOfRange { .. })));
        assert_eq!(d.edges(1), (0.0, 100.0));
        assert_eq!(d.edges(2), (100.0, 1000.0));
    }

    #[test]
    fn hours_of_day() {
        assert_eq!(hour_of_day(25), 1);
        assert_eq!(hour_of_day(24), 24);
        assert_eq!(hour_of_day(1), 1);
    }

    #[test]
    fn generator_is_reproducible() {
        let cfg = SyntheticGenConfig {
            hours: 240,
            ..Default::default()
        };
        assert_eq!(generate_synthetic(&cfg).unwrap(), generate_synthetic(&cfg).unwrap());
        let other = SyntheticGenConfig { seed: 2, ..cfg.clone() };
        assert_ne!(generate_synthetic(&cfg).unwrap(), generate_synthetic(&other).unwrap());
    }

    #[test]
    fn generator_mean_price_matches_configuration() {
        let cfg = SyntheticGenConfig {
            hours: 10_008,
            ..Default::default()
        };
        let d = generate_synthetic(&cfg).unwrap();
        let mean = d.records().iter().map(|r| r.da_price_realized).sum::<f64>() / d.len() as f64;
        assert!((mean - cfg.mean_price).abs() <= 0.1 * cfg.mean_price, "mean {mean}");
    }

    #[test]
    fn generated_series_respect_bounds_and_both_spread_signs() {
        let cfg = SyntheticGenConfig::default();
        let d = generate_synthetic(&cfg).unwrap();
        let mut above = 0;
        let mut below = 0;
        for r in d.records() {
            assert!(r.wind_realized >= 0.0 && r.wind_realized <= cfg.wind_capacity);
            assert!(r.wind_forecast >= 0.0 && r.wind_forecast <= cfg.wind_capacity);
            if r.balancing_price_realized > r.da_price_realized {
                above += 1;
            } else if r.balancing_price_realized < r.da_price_realized {
                below += 1;
            }
        }
        assert!(above > d.len() / 5 && below > d.len() / 5);
    }

    #[test]
    fn csv_round_trip() {
        let d = generate_synthetic(&SyntheticGenConfig {
            hours: 48,
            ..Default::default()
        })
        .unwrap();
        let mut buf = Vec::new();
        write_csv(&d, &mut buf).unwrap();
        let back = parse_csv(std::str::from_utf8(&buf).unwrap()).unwrap();
        assert_eq!(back, d);
    }
}
