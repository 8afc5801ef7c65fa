//! Run configuration: a TOML file with one table per concern. Every field has
//! a default, so an empty file is a valid configuration.

use std::path::PathBuf;

use serde::Deserialize;

use hpp_core::electrolyzer::{ElectrolyzerSpec, Plant};
use hpp_core::market_data::{FeatureConfig, SyntheticGenConfig};
use hpp_core::training::{ConditionalBuyConfig, ModelVariant, RiskConfig};

use crate::error::CliError;

#[derive(Clone, Debug, Default, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RunConfig {
    pub seed: u64,
    pub paths: Paths,
    pub synthetic: Synthetic,
    pub data: DataSplit,
    pub features: Features,
    pub plant: PlantSection,
    pub electrolyzer: Electrolyzer,
    pub domains: Domains,
    pub curves: Curves,
    pub training: Training,
    pub conditional: Conditional,
    pub sweep: Sweep,
    pub compare: Compare,
}

#[derive(Clone, Debug, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct Paths {
    /// Input CSV. Without it the synthetic generator supplies the data.
    pub data: Option<PathBuf>,
    pub out: PathBuf,
}

impl Default for Paths {
    fn default() -> Self {
        Self {
            data: None,
            out: PathBuf::from("out"),
        }
    }
}

/// Overrides of the generator defaults.
#[derive(Clone, Debug, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct Synthetic {
    pub days: usize,
    pub mean_price: Option<f64>,
    pub reversion: Option<f64>,
    pub volatility: Option<f64>,
    pub daily_amplitude: Option<f64>,
    pub wind_autocorr: Option<f64>,
    pub wind_level: Option<f64>,
    pub wind_spread: Option<f64>,
    pub price_forecast_noise: Option<f64>,
    pub wind_forecast_noise: Option<f64>,
    pub agg_capacity: Option<f64>,
    pub agg_noise: Option<f64>,
    pub spread_per_mw: Option<f64>,
    pub spread_daily: Option<f64>,
    pub spread_noise: Option<f64>,
}

impl Default for Synthetic {
    fn default() -> Self {
        Self {
            days: 90,
            mean_price: None,
            reversion: None,
            volatility: None,
            daily_amplitude: None,
            wind_autocorr: None,
            wind_level: None,
            wind_spread: None,
            price_forecast_noise: None,
            wind_forecast_noise: None,
            agg_capacity: None,
            agg_noise: None,
            spread_per_mw: None,
            spread_daily: None,
            spread_noise: None,
        }
    }
}

#[derive(Clone, Debug, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct DataSplit {
    /// Leading whole days used for training; the rest is the test set.
    pub train_days: usize,
}

impl Default for DataSplit {
    fn default() -> Self {
        Self { train_days: 60 }
    }
}

#[derive(Clone, Debug, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct Features {
    pub names: Vec<String>,
}

impl Default for Features {
    fn default() -> Self {
        Self {
            names: FeatureConfig::default().names().to_vec(),
        }
    }
}

#[derive(Clone, Debug, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct PlantSection {
    pub wind_capacity: f64,
    pub electrolyzer_online: bool,
}

impl Default for PlantSection {
    fn default() -> Self {
        Self {
            wind_capacity: 10.0,
            electrolyzer_online: true,
        }
    }
}

#[derive(Clone, Debug, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct Electrolyzer {
    /// `[power MW, hydrogen kg/h]` points: minimum load, best efficiency, full load.
    pub anchors: Vec<[f64; 2]>,
    pub storage_efficiency: f64,
    pub daily_min_kg: f64,
    /// €/kg.
    pub h2_price: f64,
}

impl Default for Electrolyzer {
    fn default() -> Self {
        Self {
            anchors: vec![[1.5, 27.0], [6.0, 110.0], [10.0, 170.0]],
            storage_efficiency: 0.88,
            daily_min_kg: 880.0,
            h2_price: 4.0,
        }
    }
}

#[derive(Clone, Debug, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct Domains {
    pub count: usize,
    pub floor: f64,
    pub ceiling: f64,
}

impl Default for Domains {
    fn default() -> Self {
        Self {
            count: 10,
            floor: -500.0,
            ceiling: 4000.0,
        }
    }
}

#[derive(Clone, Debug, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct Curves {
    pub grid_step: f64,
    pub histogram_bin: f64,
}

impl Default for Curves {
    fn default() -> Self {
        Self {
            grid_step: 1.0,
            histogram_bin: 1.0,
        }
    }
}

#[derive(Clone, Debug, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct Training {
    pub variants: Vec<String>,
    pub alpha: f64,
    pub penalty: f64,
    /// Share of the betting model's imbalance statistics used as limits.
    pub fraction: f64,
    pub limit_mean: Option<f64>,
    pub limit_cvar: Option<f64>,
    pub limit_ext: Option<f64>,
}

impl Default for Training {
    fn default() -> Self {
        Self {
            variants: vec!["B".into(), "T_cvar".into()],
            alpha: 0.95,
            penalty: hpp_core::training::DEFAULT_PENALTY,
            fraction: 0.5,
            limit_mean: None,
            limit_cvar: None,
            limit_ext: None,
        }
    }
}

#[derive(Clone, Debug, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct Conditional {
    pub lambda_s: f64,
    pub epsilon: f64,
    pub big_m: Option<f64>,
}

impl Default for Conditional {
    fn default() -> Self {
        let c = ConditionalBuyConfig::default();
        Self {
            lambda_s: c.lambda_s,
            epsilon: c.epsilon,
            big_m: c.big_m,
        }
    }
}

#[derive(Clone, Debug, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct Sweep {
    pub h2_prices: Vec<f64>,
    pub variant: String,
    pub fraction: f64,
}

impl Default for Sweep {
    fn default() -> Self {
        Self {
            h2_prices: vec![2.0, 4.0, 6.0],
            variant: "T_cvar".into(),
            fraction: 0.3,
        }
    }
}

#[derive(Clone, Debug, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct Compare {
    pub fraction: f64,
    pub h2_price: f64,
}

impl Default for Compare {
    fn default() -> Self {
        Self {
            fraction: 0.5,
            h2_price: 6.0,
        }
    }
}

/// A checked configuration with every sub-config built.
#[derive(Clone, Debug)]
pub struct Settings {
    pub raw: RunConfig,
    pub plant: Plant,
    pub features: FeatureConfig,
    pub variants: Vec<ModelVariant>,
    pub cond: ConditionalBuyConfig,
    /// Fixed limits from the file; `None` means calibrate from the betting model.
    pub fixed_limits: Option<RiskConfig>,
    pub sweep_variant: ModelVariant,
    pub generator: SyntheticGenConfig,
}

fn parse_variant(name: &str) -> Result<ModelVariant, CliError> {
    name.parse().map_err(CliError::Config)
}

pub fn check_fraction(name: &str, f: f64) -> Result<(), CliError> {
    if f > 0.0 && f <= 1.0 {
        Ok(())
    } else {
        Err(CliError::Config(format!("{name} must lie in (0, 1], got {f}")))
    }
}

impl RunConfig {
    pub fn parse(text: &str) -> Result<Self, CliError> {
        toml::from_str(text).map_err(|e| CliError::Config(e.to_string()))
    }

    pub fn settings(self) -> Result<Settings, CliError> {
        let cfg_err = |e: &dyn std::fmt::Display| CliError::Config(e.to_string());
        let anchors: Vec<(f64, f64)> = self.electrolyzer.anchors.iter().map(|a| (a[0], a[1])).collect();
        let el = ElectrolyzerSpec::from_anchors(
            &anchors,
            self.electrolyzer.storage_efficiency,
            self.electrolyzer.daily_min_kg,
            self.electrolyzer.h2_price,
        )
        .map_err(|e| cfg_err(&e))?;
        let mut plant = Plant::new(self.plant.wind_capacity, el);
        plant.electrolyzer_online = self.plant.electrolyzer_online;
        plant.validate().map_err(|e| cfg_err(&e))?;

        let features = FeatureConfig::new(self.features.names.iter().cloned()).map_err(|e| cfg_err(&e))?;
        if self.training.variants.is_empty() {
            return Err(CliError::Config("at least one model variant is required".into()));
        }
        let variants = self
            .training
            .variants
            .iter()
            .map(|v| parse_variant(v))
            .collect::<Result<Vec<_>, _>>()?;
        let cond = ConditionalBuyConfig {
            lambda_s: self.conditional.lambda_s,
            big_m: self.conditional.big_m,
            epsilon: self.conditional.epsilon,
        };
        cond.validate().map_err(|e| cfg_err(&e))?;

        let t = &self.training;
        if !(t.alpha > 0.0 && t.alpha < 1.0) {
            return Err(CliError::Config(format!("training.alpha must lie in (0, 1), got {}", t.alpha)));
        }
        if !(t.penalty > 0.0 && t.penalty.is_finite()) {
            return Err(CliError::Config("training.penalty must be positive".into()));
        }
        check_fraction("training.fraction", t.fraction)?;
        check_fraction("sweep.fraction", self.sweep.fraction)?;
        check_fraction("compare.fraction", self.compare.fraction)?;
        let fixed_limits = match (t.limit_mean, t.limit_cvar, t.limit_ext) {
            (None, None, None) => None,
            (Some(limit_mean), Some(limit_cvar), Some(limit_ext)) => {
                let r = RiskConfig {
                    limit_mean,
                    limit_cvar,
                    limit_ext,
                    alpha: t.alpha,
                };
                r.validate().map_err(|e| cfg_err(&e))?;
                Some(r)
            }
            _ => {
                return Err(CliError::Config(
                    "give all three of limit_mean, limit_cvar and limit_ext, or none".into(),
                ))
            }
        };

        let d = &self.domains;
        if d.count == 0 {
            return Err(CliError::Config("domains.count must be at least 1".into()));
        }
        if !(d.floor < d.ceiling && d.floor.is_finite() && d.ceiling.is_finite()) {
            return Err(CliError::Config("domains.floor must lie below domains.ceiling".into()));
        }
        let c = &self.curves;
        for (name, v) in [("curves.grid_step", c.grid_step), ("curves.histogram_bin", c.histogram_bin)] {
            if !(v > 0.0 && v.is_finite()) {
                return Err(CliError::Config(format!("{name} must be positive")));
            }
        }
        if self.sweep.h2_prices.is_empty() || self.sweep.h2_prices.iter().any(|p| !p.is_finite()) {
            return Err(CliError::Config("sweep.h2_prices must be a non-empty list of numbers".into()));
        }
        if !self.compare.h2_price.is_finite() {
            return Err(CliError::Config("compare.h2_price must be finite".into()));
        }
        let sweep_variant = parse_variant(&self.sweep.variant)?;
        if self.data.train_days == 0 {
            return Err(CliError::Config("data.train_days must be at least 1".into()));
        }

        let generator = self.generator(plant.wind_capacity);
        if self.paths.data.is_none() {
            generator.validate().map_err(|e| cfg_err(&e))?;
            if self.data.train_days >= self.synthetic.days {
                return Err(CliError::Config(format!(
                    "data.train_days ({}) leaves no test days out of {}",
                    self.data.train_days, self.synthetic.days
                )));
            }
        }
        Ok(Settings {
            plant,
            features,
            variants,
            cond,
            fixed_limits,
            sweep_variant,
            generator,
            raw: self,
        })
    }

    fn generator(&self, wind_capacity: f64) -> SyntheticGenConfig {
        let s = &self.synthetic;
        let mut g = SyntheticGenConfig {
            seed: self.seed,
            hours: 24 * s.days,
            wind_capacity,
            price_floor: self.domains.floor,
            price_ceiling: self.domains.ceiling,
            ..Default::default()
        };
        let overrides = [
            (&mut g.mean_price, s.mean_price),
            (&mut g.reversion, s.reversion),
            (&mut g.volatility, s.volatility),
            (&mut g.daily_amplitude, s.daily_amplitude),
            (&mut g.wind_autocorr, s.wind_autocorr),
            (&mut g.wind_level, s.wind_level),
            (&mut g.wind_spread, s.wind_spread),
            (&mut g.price_forecast_noise, s.price_forecast_noise),
            (&mut g.wind_forecast_noise, s.wind_forecast_noise),
            (&mut g.agg_capacity, s.agg_capacity),
            (&mut g.agg_noise, s.agg_noise),
            (&mut g.spread_per_mw, s.spread_per_mw),
            (&mut g.spread_daily, s.spread_daily),
            (&mut g.spread_noise, s.spread_noise),
        ];
        for (field, value) in overrides {
            if let Some(v) = value {
                *field = v;
            }
        }
        g
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn empty_file_gives_defaults() {
        let s = RunConfig::parse("").unwrap().settings().unwrap();
        assert_eq!(s.plant.wind_capacity, 10.0);
        assert_eq!(s.plant.electrolyzer.p_min, 1.5);
        assert_eq!(s.raw.domains.count, 10);
        assert_eq!(s.variants.len(), 2);
        assert_eq!(s.generator.hours, 24 * 90);
    }

    #[test]
    fn unknown_keys_are_rejected() {
        assert!(matches!(RunConfig::parse("[plant]\nwind = 3\n"), Err(CliError::Config(_))));
    }

    #[test]
    fn partial_limits_are_rejected() {
        let cfg = RunConfig::parse("[training]\nlimit_mean = 2.0\n").unwrap();
        assert!(matches!(cfg.settings(), Err(CliError::Config(_))));
    }

    #[test]
    fn bad_variant_is_a_config_error() {
        let cfg = RunConfig::parse("[training]\nvariants = [\"T_foo\"]\n").unwrap();
        assert!(matches!(cfg.settings(), Err(CliError::Config(_))));
    }

    #[test]
    fn generator_overrides_apply() {
        let cfg = RunConfig::parse("seed = 7\n[synthetic]\ndays = 10\nspread_noise = 3.5\n").unwrap();
        let g = cfg.generator(10.0);
        assert_eq!((g.seed, g.hours, g.spread_noise), (7, 240, 3.5));
    }
}
