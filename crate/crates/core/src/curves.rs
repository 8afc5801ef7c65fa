//! Price-quantity bidding curves derived from trained policies.

use std::io::Write;

use crate::electrolyzer::Plant;
use crate::market_data::{breve_features, domain_index, hour_of_day, HourlyRecord, PriceDomains};
use crate::policy::{curve_coefficients, PolicyError, PolicySet};
use crate::training::Regime;

#[derive(Debug, thiserror::Error)]
pub enum CurveError {
    #[error(transparent)]
    Policy(#[from] PolicyError),
    #[error("price {price} lies outside the curve's range [{lo}, {hi}]")]
    OutOfRange { price: f64, lo: f64, hi: f64 },
    #[error("grid step must be positive and finite, got {0}")]
    InvalidStep(f64),
    #[error("features: {0}")]
    Features(String),
}

/// Affine piece `slope * λ + intercept` on `(lower, upper]`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Segment {
    pub lower: f64,
    pub upper: f64,
    pub slope: f64,
    pub intercept: f64,
}

/// One hour's curve before discretization, one piece per price domain.
#[derive(Clone, Debug, PartialEq)]
pub struct BiddingCurve {
    pub hour: usize,
    pub segments: Vec<Segment>,
    pub q_min: f64,
    pub q_max: f64,
    domains: PriceDomains,
}

impl BiddingCurve {
    /// Raw value at `price`, using the piece of the domain that holds it.
    pub fn value(&self, price: f64) -> Result<f64, CurveError> {
        let k = domain_index(price, &self.domains).map_err(|_| CurveError::OutOfRange {
            price,
            lo: self.domains.floor,
            hi: self.domains.ceiling,
        })?;
        let s = &self.segments[k - 1];
        Ok(s.slope * price + s.intercept)
    }

    pub fn price_range(&self) -> (f64, f64) {
        (self.domains.floor, self.domains.ceiling)
    }
}

/// Step curve on a price grid.
#[derive(Clone, Debug, PartialEq)]
pub struct DiscretizedCurve {
    pub prices: Vec<f64>,
    pub quantities: Vec<f64>,
}

impl DiscretizedCurve {
    pub fn len(&self) -> usize {
        self.prices.len()
    }

    pub fn is_empty(&self) -> bool {
        self.prices.is_empty()
    }
}

/// The power curve and the electrolyzer consumption curve of hour `j`, from
/// the forecast features `breve_x`.
pub fn build_curves(
    ps: &PolicySet,
    j: usize,
    breve_x: &[f64],
    plant: &Plant,
) -> Result<(BiddingCurve, BiddingCurve), CurveError> {
    let domains = &ps.domains;
    let mut power = Vec::with_capacity(domains.count());
    let mut hydrogen = Vec::with_capacity(domains.count());
    for k in 1..=domains.count() {
        let c = curve_coefficients(ps, j, k, breve_x)?;
        let (lower, upper) = domains.edges(k);
        power.push(Segment {
            lower,
            upper,
            slope: c.a1,
            intercept: c.b1,
        });
        hydrogen.push(Segment {
            lower,
            upper,
            slope: c.a2,
            intercept: c.b2,
        });
    }
    let (h_lo, h_hi) = plant.consumption_range();
    Ok((
        BiddingCurve {
            hour: j,
            segments: power,
            q_min: -plant.max_buy(),
            q_max: plant.wind_capacity,
            domains: domains.clone(),
        },
        BiddingCurve {
            hour: j,
            segments: hydrogen,
            q_min: h_lo,
            q_max: h_hi,
            domains: domains.clone(),
        },
    ))
}

/// Uniform grid from the floor price to the ceiling, both included.
pub fn price_grid(floor: f64, ceiling: f64, step: f64) -> Result<Vec<f64>, CurveError> {
    if !(step > 0.0 && step.is_finite()) {
        return Err(CurveError::InvalidStep(step));
    }
    let n = ((ceiling - floor) / step + 1e-9).floor() as usize;
    let mut grid: Vec<f64> = (0..=n).map(|i| floor + i as f64 * step).collect();
    if let Some(&last) = grid.last() {
        if ceiling - last > 1e-9 * step {
            grid.push(ceiling);
        }
    }
    Ok(grid)
}

/// Samples `curve` on the grid. A grid price on a domain boundary takes the
/// value of the lower domain, whose interval it closes.
pub fn discretize(curve: &BiddingCurve, grid_step: f64) -> Result<DiscretizedCurve, CurveError> {
    let (floor, ceiling) = curve.price_range();
    let prices = price_grid(floor, ceiling, grid_step)?;
    let quantities = prices.iter().map(|&p| curve.value(p)).collect::<Result<_, _>>()?;
    Ok(DiscretizedCurve { prices, quantities })
}

/// Which negative quantities survive restoration.
#[derive(Clone, Copy, Debug, PartialEq)]
pub enum SignRule {
    /// Any sign, as for purchases under the permitted regime or for the
    /// electrolyzer curve.
    Free,
    NonNegative,
    /// Negative only at prices strictly below the threshold.
    NegativeBelow(f64),
}

impl SignRule {
    pub fn for_regime(regime: Regime, lambda_s: f64) -> Self {
        match regime {
            Regime::Permitted => SignRule::Free,
            Regime::Restricted => SignRule::NonNegative,
            Regime::Conditional => SignRule::NegativeBelow(lambda_s),
        }
    }
}

/// Projects a sampled curve onto the feasible ones: clamp to `bounds`, zero
/// the negative quantities the sign rule forbids, then raise each quantity to
/// the running maximum so the curve never decreases.
pub fn restore_feasibility(curve: &DiscretizedCurve, rule: SignRule, bounds: (f64, f64)) -> DiscretizedCurve {
    let (lo, hi) = bounds;
    let mut running = f64::NEG_INFINITY;
    let quantities = curve
        .prices
        .iter()
        .zip(&curve.quantities)
        .map(|(&price, &q)| {
            let mut q = q.clamp(lo, hi);
            let forbidden = match rule {
                SignRule::Free => false,
                SignRule::NonNegative => true,
                SignRule::NegativeBelow(threshold) => price >= threshold,
            };
            if forbidden && q < 0.0 {
                q = 0.0;
            }
            running = running.max(q);
            running
        })
        .collect();
    DiscretizedCurve {
        prices: curve.prices.clone(),
        quantities,
    }
}

/// Quantity of the highest grid price at or below `price`.
pub fn evaluate(curve: &DiscretizedCurve, price: f64) -> Result<f64, CurveError> {
    let (lo, hi) = match (curve.prices.first(), curve.prices.last()) {
        (Some(&lo), Some(&hi)) => (lo, hi),
        _ => {
            return Err(CurveError::OutOfRange {
                price,
                lo: f64::NAN,
                hi: f64::NAN,
            })
        }
    };
    if !(price >= lo && price <= hi) {
        return Err(CurveError::OutOfRange { price, lo, hi });
    }
    let i = curve.prices.partition_point(|&p| p <= price) - 1;
    Ok(curve.quantities[i])
}

/// Restored power and consumption curves of one delivery hour.
#[derive(Clone, Debug, PartialEq)]
pub struct HourCurves {
    pub hour: usize,
    pub power: DiscretizedCurve,
    pub hydrogen: DiscretizedCurve,
}

/// Restored curves submitted for the hour of `rec`. They depend on the
/// forecast features only, never on the realized prices of that hour.
pub fn delivery_curves(
    ps: &PolicySet,
    rec: &HourlyRecord,
    plant: &Plant,
    rule: SignRule,
    grid_step: f64,
) -> Result<HourCurves, CurveError> {
    let j = hour_of_day(rec.t);
    let breve = breve_features(rec, &ps.features).map_err(|e| CurveError::Features(e.to_string()))?;
    let (power, hydrogen) = build_curves(ps, j, &breve, plant)?;
    Ok(HourCurves {
        hour: j,
        power: restore_feasibility(&discretize(&power, grid_step)?, rule, (power.q_min, power.q_max)),
        hydrogen: restore_feasibility(
            &discretize(&hydrogen, grid_step)?,
            SignRule::Free,
            (hydrogen.q_min, hydrogen.q_max),
        ),
    })
}

/// Writes `j,price,quantity_power,quantity_h2` rows for one delivery day.
pub fn write_curve_dump(curves: &[HourCurves], out: &mut impl Write) -> std::io::Result<()> {
    writeln!(out, "j,price,quantity_power,quantity_h2")?;
    for c in curves {
        for ((p, qp), qh) in c.power.prices.iter().zip(&c.power.quantities).zip(&c.hydrogen.quantities) {
            writeln!(out, "{},{},{},{}", c.hour, p, qp, qh)?;
        }
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::electrolyzer::ElectrolyzerSpec;
    use crate::market_data::FeatureConfig;
    use crate::policy::Target;
    use proptest::prelude::*;

    fn plant() -> Plant {
        let el = ElectrolyzerSpec::from_anchors(&[(1.5, 27.0), (6.0, 110.0), (10.0, 170.0)], 0.88, 880.0, 4.0).unwrap();
        Plant::new(10.0, el)
    }

    fn minimal_features() -> FeatureConfig {
        FeatureConfig::new(["da_price_realized", "constant_one"]).unwrap()
    }

    fn curve(prices: &[f64], quantities: &[f64]) -> DiscretizedCurve {
        DiscretizedCurve {
            prices: prices.to_vec(),
            quantities: quantities.to_vec(),
        }
    }

    #[test]
    fn flat_policy_gives_constant_curve() {
        let dom = PriceDomains::new(vec![], 0.0, 100.0).unwrap();
        let mut ps = PolicySet::zeros(minimal_features(), dom);
        ps.set(Target::Power, 5, 1, 2, 5.0);
        let (power, h2) = build_curves(&ps, 5, &[1.0], &plant()).unwrap();
        let d = discretize(&power, 10.0).unwrap();
        assert_eq!(d.len(), 11);
        assert!(d.quantities.iter().all(|&q| q == 5.0));
        assert_eq!((power.q_min, power.q_max), (-10.0, 10.0));
        assert_eq!((h2.q_min, h2.q_max), (1.5, 10.0));
        assert_eq!((plant().wind_only().consumption_range()), (0.0, 0.0));
    }

    #[test]
    fn equal_pieces_are_continuous() {
        let dom = PriceDomains::new(vec![40.0], 0.0, 100.0).unwrap();
        let mut ps = PolicySet::zeros(minimal_features(), dom);
        for k in 1..=2 {
            ps.set(Target::Power, 1, k, 1, 0.1);
            ps.set(Target::Power, 1, k, 2, -2.0);
        }
        let (power, _) = build_curves(&ps, 1, &[1.0], &plant()).unwrap();
        let left = power.value(40.0).unwrap();
        let right = power.value(40.0 + 1e-9).unwrap();
        assert!((left - right).abs() < 1e-9);
    }

    #[test]
    fn boundary_price_takes_lower_domain() {
        let dom = PriceDomains::new(vec![50.0], 0.0, 100.0).unwrap();
        let mut ps = PolicySet::zeros(minimal_features(), dom);
        ps.set(Target::Power, 1, 1, 2, 1.0);
        ps.set(Target::Power, 1, 2, 2, 4.0);
        let (power, _) = build_curves(&ps, 1, &[1.0], &plant()).unwrap();
        let d = discretize(&power, 25.0).unwrap();
        assert_eq!(d.prices, vec![0.0, 25.0, 50.0, 75.0, 100.0]);
        assert_eq!(d.quantities, vec![1.0, 1.0, 1.0, 4.0, 4.0]);
    }

    #[test]
    fn samples_linear_curve() {
        let dom = PriceDomains::new(vec![], 0.0, 100.0).unwrap();
        let mut ps = PolicySet::zeros(minimal_features(), dom);
        ps.set(Target::Power, 1, 1, 1, 0.1);
        let (power, _) = build_curves(&ps, 1, &[1.0], &plant()).unwrap();
        let d = discretize(&power, 50.0).unwrap();
        assert_eq!(d.prices, vec![0.0, 50.0, 100.0]);
        assert_eq!(d.quantities, vec![0.0, 5.0, 10.0]);
        assert!(discretize(&power, 0.0).is_err());
        // A step that does not divide the range still ends at the ceiling.
        assert_eq!(price_grid(0.0, 10.0, 3.0).unwrap(), vec![0.0, 3.0, 6.0, 9.0, 10.0]);
    }

    #[test]
    fn sell_full_capacity_at_high_prices() {
        // Crosses zero at 50 and reaches the bounds at 0 and 100.
        let dom = PriceDomains::new(vec![], -100.0, 300.0).unwrap();
        let mut ps = PolicySet::zeros(minimal_features(), dom);
        ps.set(Target::Power, 12, 1, 1, 0.2);
        ps.set(Target::Power, 12, 1, 2, -10.0);
        let (power, _) = build_curves(&ps, 12, &[1.0], &plant()).unwrap();
        let d = discretize(&power, 1.0).unwrap();
        let r = restore_feasibility(&d, SignRule::Free, (power.q_min, power.q_max));
        assert_eq!(evaluate(&r, 250.0).unwrap(), 10.0);
        assert_eq!(evaluate(&r, 50.0).unwrap(), 0.0);
        assert_eq!(evaluate(&r, -50.0).unwrap(), -10.0);
        assert!(matches!(evaluate(&r, -100.5), Err(CurveError::OutOfRange { .. })));
        assert!(matches!(evaluate(&r, 300.5), Err(CurveError::OutOfRange { .. })));
    }

    #[test]
    fn restoration_rules() {
        let r = restore_feasibility(&curve(&[10.0, 50.0, 90.0], &[-3.0, 2.0, 5.0]), SignRule::NonNegative, (-10.0, 10.0));
        assert_eq!(r.quantities, vec![0.0, 2.0, 5.0]);
        let r = restore_feasibility(
            &curve(&[10.0, 30.0, 90.0], &[-3.0, -2.0, 5.0]),
            SignRule::NegativeBelow(20.0),
            (-10.0, 10.0),
        );
        assert_eq!(r.quantities, vec![-3.0, 0.0, 5.0]);
        let r = restore_feasibility(&curve(&[1.0, 2.0, 3.0], &[2.0, 1.0, 3.0]), SignRule::Free, (-10.0, 10.0));
        assert_eq!(r.quantities, vec![2.0, 2.0, 3.0]);
        let r = restore_feasibility(&curve(&[1.0], &[12.0]), SignRule::Free, (-10.0, 10.0));
        assert_eq!(r.quantities, vec![10.0]);
        // The threshold price itself admits no purchase.
        let r = restore_feasibility(&curve(&[20.0], &[-1.0]), SignRule::NegativeBelow(20.0), (-10.0, 10.0));
        assert_eq!(r.quantities, vec![0.0]);
    }

    #[test]
    fn evaluates_on_grid_points() {
        let c = curve(&[0.0, 1.0, 2.0], &[1.0, 2.0, 3.0]);
        assert_eq!(evaluate(&c, 1.0).unwrap(), 2.0);
        assert_eq!(evaluate(&c, 1.99).unwrap(), 2.0);
        assert_eq!(evaluate(&c, 2.0).unwrap(), 3.0);
    }

    #[test]
    fn dump_lists_every_grid_point() {
        let c = HourCurves {
            hour: 3,
            power: curve(&[0.0, 1.0], &[-1.0, 2.5]),
            hydrogen: curve(&[0.0, 1.0], &[1.5, 1.5]),
        };
        let mut buf = Vec::new();
        write_curve_dump(&[c], &mut buf).unwrap();
        assert_eq!(String::from_utf8(buf).unwrap(), "j,price,quantity_power,quantity_h2\n3,0,-1,1.5\n3,1,2.5,1.5\n");
    }

    fn rule() -> impl Strategy<Value = SignRule> {
        prop_oneof![
            Just(SignRule::Free),
            Just(SignRule::NonNegative),
            (-50.0f64..100.0).prop_map(SignRule::NegativeBelow),
        ]
    }

    proptest! {
        #[test]
        fn restored_curves_are_feasible_and_stable(
            q in proptest::collection::vec(-30.0f64..30.0, 1..80),
            rule in rule(),
            lo in -15.0f64..0.0,
            hi in 0.0f64..15.0,
        ) {
            let prices: Vec<f64> = (0..q.len()).map(|i| -60.0 + 3.0 * i as f64).collect();
            let c = curve(&prices, &q);
            let r = restore_feasibility(&c, rule, (lo, hi));
            for w in r.quantities.windows(2) {
                prop_assert!(w[0] <= w[1]);
            }
            for (&p, &v) in r.prices.iter().zip(&r.quantities) {
                prop_assert!(v >= lo && v <= hi);
                match rule {
                    SignRule::NonNegative => prop_assert!(v >= 0.0),
                    SignRule::NegativeBelow(s) => prop_assert!(v >= 0.0 || p < s),
                    SignRule::Free => {}
                }
            }
            prop_assert_eq!(restore_feasibility(&r, rule, (lo, hi)), r.clone());
            // Evaluation never decreases with the price.
            let mut last = f64::NEG_INFINITY;
            for i in 0..(3 * q.len() - 2) {
                let v = evaluate(&r, -60.0 + i as f64).unwrap();
                prop_assert!(v >= last);
                last = v;
            }
        }

        #[test]
        fn already_feasible_curves_are_untouched(mut q in proptest::collection::vec(-10.0f64..10.0, 1..50)) {
            q.sort_by(f64::total_cmp);
            let prices: Vec<f64> = (0..q.len()).map(|i| i as f64).collect();
            let c = curve(&prices, &q);
            prop_assert_eq!(restore_feasibility(&c, SignRule::Free, (-10.0, 10.0)), c);
        }
    }
}
