//! Electrolyzer model: a concave piecewise-linear hydrogen production curve
//! expressed as cuts, the operating range and the daily production target.

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum ElectrolyzerError {
    #[error("anchors must have strictly increasing power and non-decreasing hydrogen")]
    NonMonotoneAnchors,
    #[error("at least two anchors are needed")]
    TooFewAnchors,
    #[error("power {power} MW outside [{p_min}, {p_max}]")]
    PowerOutOfRange { power: f64, p_min: f64, p_max: f64 },
    #[error("invalid electrolyzer: {0}")]
    Invalid(String),
}

/// `h <= slope * p + intercept`, in sellable kg/h.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Cut {
    pub slope: f64,
    pub intercept: f64,
}

impl Cut {
    pub fn eval(&self, p: f64) -> f64 {
        self.slope * p + self.intercept
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct ElectrolyzerSpec {
    pub p_min: f64,
    pub p_max: f64,
    /// Cuts already scaled by the storage efficiency.
    pub cuts: Vec<Cut>,
    pub storage_eff: f64,
    /// Daily sellable hydrogen requirement, kg.
    pub daily_min: f64,
    /// €/kg.
    pub h2_price: f64,
}

impl ElectrolyzerSpec {
    pub fn new(
        p_min: f64,
        p_max: f64,
        cuts: Vec<Cut>,
        storage_eff: f64,
        daily_min: f64,
        h2_price: f64,
    ) -> Result<Self, ElectrolyzerError> {
        let spec = Self {
            p_min,
            p_max,
            cuts,
            storage_eff,
            daily_min,
            h2_price,
        };
        spec.validate()?;
        Ok(spec)
    }

    pub fn validate(&self) -> Result<(), ElectrolyzerError> {
        let bad = |m: &str| Err(ElectrolyzerError::Invalid(m.to_string()));
        if !(0.0 <= self.p_min && self.p_min < self.p_max && self.p_max.is_finite()) {
            return bad("need 0 <= p_min < p_max");
        }
        if self.cuts.is_empty() {
            return bad("need at least one cut");
        }
        if self.cuts.iter().any(|c| !c.slope.is_finite() || !c.intercept.is_finite()) {
            return bad("cut coefficients must be finite");
        }
        if !(self.storage_eff > 0.0 && self.storage_eff <= 1.0) {
            return bad("storage efficiency must lie in (0, 1]");
        }
        if !(self.daily_min >= 0.0 && self.daily_min.is_finite()) {
            return bad("daily minimum must be non-negative");
        }
        if !self.h2_price.is_finite() {
            return bad("hydrogen price must be finite");
        }
        Ok(())
    }

    /// Builds the cuts from `(MW, kg/h)` anchors of the raw production curve.
    pub fn from_anchors(
        anchors: &[(f64, f64)],
        storage_eff: f64,
        daily_min: f64,
        h2_price: f64,
    ) -> Result<Self, ElectrolyzerError> {
        let cuts = linearize_curve(anchors, storage_eff)?;
        let p_min = anchors[0].0;
        let p_max = anchors[anchors.len() - 1].0;
        Self::new(p_min, p_max, cuts, storage_eff, daily_min, h2_price)
    }

    pub fn with_h2_price(&self, h2_price: f64) -> Self {
        Self {
            h2_price,
            ..self.clone()
        }
    }

    /// Lowest production over the cuts at `p`, without range checks.
    pub fn hydrogen_at(&self, p: f64) -> f64 {
        self.cuts.iter().map(|c| c.eval(p)).fold(f64::INFINITY, f64::min)
    }
}

/// One cut through each consecutive anchor pair, scaled by `storage_eff`.
pub fn linearize_curve(anchors: &[(f64, f64)], storage_eff: f64) -> Result<Vec<Cut>, ElectrolyzerError> {
    if anchors.len() < 2 {
        return Err(ElectrolyzerError::TooFewAnchors);
    }
    if !(storage_eff > 0.0 && storage_eff <= 1.0) {
        return Err(ElectrolyzerError::Invalid("storage efficiency must lie in (0, 1]".into()));
    }
    anchors
        .windows(2)
        .map(|w| {
            let ((p0, h0), (p1, h1)) = (w[0], w[1]);
            if !(p1 > p0) || h1 < h0 {
                return Err(ElectrolyzerError::NonMonotoneAnchors);
            }
            let slope = (h1 - h0) / (p1 - p0);
            Ok(Cut {
                slope: storage_eff * slope,
                intercept: storage_eff * (h0 - slope * p0),
            })
        })
        .collect()
}

pub fn max_hydrogen(p: f64, spec: &ElectrolyzerSpec) -> Result<f64, ElectrolyzerError> {
    let tol = 1e-9 * (1.0 + spec.p_max.abs());
    if p < spec.p_min - tol || p > spec.p_max + tol {
        return Err(ElectrolyzerError::PowerOutOfRange {
            power: p,
            p_min: spec.p_min,
            p_max: spec.p_max,
        });
    }
    Ok(spec.hydrogen_at(p))
}

/// A wind farm and electrolyzer behind one grid connection.
#[derive(Clone, Debug, PartialEq)]
pub struct Plant {
    pub wind_capacity: f64,
    pub electrolyzer: ElectrolyzerSpec,
    /// With the electrolyzer offline the plant trades wind only; grid
    /// purchases are still bounded by the electrolyzer capacity.
    pub electrolyzer_online: bool,
}

impl Plant {
    pub fn new(wind_capacity: f64, electrolyzer: ElectrolyzerSpec) -> Self {
        Self {
            wind_capacity,
            electrolyzer,
            electrolyzer_online: true,
        }
    }

    pub fn wind_only(&self) -> Self {
        Self {
            electrolyzer_online: false,
            ..self.clone()
        }
    }

    pub fn with_h2_price(&self, price: f64) -> Self {
        Self {
            electrolyzer: self.electrolyzer.with_h2_price(price),
            ..self.clone()
        }
    }

    /// Largest purchase, in MW.
    pub fn max_buy(&self) -> f64 {
        self.electrolyzer.p_max
    }

    /// Bounds of the electrolyzer schedule.
    pub fn consumption_range(&self) -> (f64, f64) {
        if self.electrolyzer_online {
            (self.electrolyzer.p_min, self.electrolyzer.p_max)
        } else {
            (0.0, 0.0)
        }
    }

    /// Sellable hydrogen for a consumption of `p` MW.
    pub fn hydrogen(&self, p: f64) -> Result<f64, ElectrolyzerError> {
        if self.electrolyzer_online {
            max_hydrogen(p, &self.electrolyzer)
        } else {
            Ok(0.0)
        }
    }

    pub fn validate(&self) -> Result<(), ElectrolyzerError> {
        if !(self.wind_capacity > 0.0 && self.wind_capacity.is_finite()) {
            return Err(ElectrolyzerError::Invalid("wind capacity must be positive".into()));
        }
        self.electrolyzer.validate()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    const ANCHORS: [(f64, f64); 3] = [(1.5, 27.0), (6.0, 110.0), (10.0, 170.0)];

    fn spec() -> ElectrolyzerSpec {
        ElectrolyzerSpec::from_anchors(&ANCHORS, 0.88, 880.0, 4.0).unwrap()
    }

    /// Line through two points, fitted independently of the cut builder.
    fn two_point(a: (f64, f64), b: (f64, f64)) -> (f64, f64) {
        let m = (b.1 - a.1) / (b.0 - a.0);
        (m, a.1 - m * a.0)
    }

    #[test]
    fn cuts_through_anchor_pairs() {
        let cuts = linearize_curve(&ANCHORS, 0.88).unwrap();
        assert_eq!(cuts.len(), 2);
        for (cut, w) in cuts.iter().zip(ANCHORS.windows(2)) {
            let (m, c) = two_point(w[0], w[1]);
            assert!((cut.slope - 0.88 * m).abs() < 1e-12);
            assert!((cut.intercept - 0.88 * c).abs() < 1e-12);
        }
        assert!((cuts[0].slope - 16.231).abs() < 5e-4);
        assert!((cuts[0].intercept + 0.587).abs() < 5e-4);
        assert!((cuts[1].slope - 13.2).abs() < 1e-12);
        assert!((cuts[1].intercept - 17.6).abs() < 1e-12);
        assert!(cuts[0].slope > cuts[1].slope);
    }

    #[test]
    fn identity_and_bad_anchors() {
        let cuts = linearize_curve(&[(0.0, 0.0), (10.0, 10.0)], 1.0).unwrap();
        assert_eq!(cuts, vec![Cut { slope: 1.0, intercept: 0.0 }]);
        assert_eq!(
            linearize_curve(&[(5.0, 1.0), (2.0, 3.0)], 1.0),
            Err(ElectrolyzerError::NonMonotoneAnchors)
        );
        assert_eq!(
            linearize_curve(&[(1.0, 5.0), (2.0, 3.0)], 1.0),
            Err(ElectrolyzerError::NonMonotoneAnchors)
        );
    }

    #[test]
    fn hydrogen_at_anchor_is_where_cuts_meet() {
        let s = spec();
        let mid = max_hydrogen(6.0, &s).unwrap();
        assert!((s.cuts[0].eval(6.0) - s.cuts[1].eval(6.0)).abs() < 1e-9);
        assert!((mid - 0.88 * 110.0).abs() < 1e-9);
        assert!((max_hydrogen(1.5, &s).unwrap() - 0.88 * 27.0).abs() < 1e-9);
        assert!((max_hydrogen(10.0, &s).unwrap() - 0.88 * 170.0).abs() < 1e-9);

        let single = ElectrolyzerSpec::new(0.0, 10.0, vec![Cut { slope: 1.0, intercept: 0.0 }], 1.0, 0.0, 1.0).unwrap();
        assert_eq!(max_hydrogen(5.0, &single).unwrap(), 5.0);
        assert!(matches!(max_hydrogen(11.0, &s), Err(ElectrolyzerError::PowerOutOfRange { .. })));
    }

    #[test]
    fn production_is_concave_and_increasing() {
        let s = spec();
        let n = 200;
        let ps: Vec<f64> = (0..=n).map(|i| s.p_min + (s.p_max - s.p_min) * i as f64 / n as f64).collect();
        let hs: Vec<f64> = ps.iter().map(|&p| max_hydrogen(p, &s).unwrap()).collect();
        for w in hs.windows(2) {
            assert!(w[1] >= w[0] - 1e-12);
        }
        for i in 1..n {
            assert!(hs[i] >= 0.5 * (hs[i - 1] + hs[i + 1]) - 1e-9);
        }
        // Every cut lies above the anchor interpolation.
        for &p in &ps {
            let interp = if p <= 6.0 {
                27.0 + (110.0 - 27.0) * (p - 1.5) / 4.5
            } else {
                110.0 + (170.0 - 110.0) * (p - 6.0) / 4.0
            } * 0.88;
            for c in &s.cuts {
                assert!(c.eval(p) >= interp - 1e-9);
            }
        }
    }
}
