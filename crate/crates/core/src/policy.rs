//! Linear decision policies indexed by hour of day and price domain.

use std::io::Write;

use crate::market_data::{FeatureConfig, PriceDomains};

#[derive(Debug, thiserror::Error)]
pub enum PolicyError {
    #[error("expected {expected} values, got {found}")]
    DimensionMismatch { expected: usize, found: usize },
    #[error("hour {j} / domain {k} out of range")]
    IndexOutOfRange { j: usize, k: usize },
    #[error("policy file: {0}")]
    Format(String),
    #[error("malformed CSV: {0}")]
    Csv(#[from] csv::Error),
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Target {
    /// Day-ahead power trade.
    Power,
    /// Electrolyzer consumption.
    Hydrogen,
}

impl Target {
    pub fn label(self) -> &'static str {
        match self {
            Target::Power => "da",
            Target::Hydrogen => "h",
        }
    }
}

/// Coefficients of the two affine curves `a1 λ + b1` (power) and `a2 λ + b2`
/// (consumption) for one hour and domain.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct CurveCoefficients {
    pub a1: f64,
    pub b1: f64,
    pub a2: f64,
    pub b2: f64,
}

#[derive(Clone, Debug, PartialEq)]
pub struct PolicySet {
    q_da: Vec<f64>,
    q_h: Vec<f64>,
    pub features: FeatureConfig,
    pub domains: PriceDomains,
}

impl PolicySet {
    pub fn zeros(features: FeatureConfig, domains: PriceDomains) -> Self {
        let len = 24 * domains.count() * features.len();
        Self {
            q_da: vec![0.0; len],
            q_h: vec![0.0; len],
            features,
            domains,
        }
    }

    /// `q_da` and `q_h` laid out hour-major, then domain, then feature.
    pub fn from_flat(
        q_da: Vec<f64>,
        q_h: Vec<f64>,
        features: FeatureConfig,
        domains: PriceDomains,
    ) -> Result<Self, PolicyError> {
        let expected = 24 * domains.count() * features.len();
        for v in [&q_da, &q_h] {
            if v.len() != expected {
                return Err(PolicyError::DimensionMismatch {
                    expected,
                    found: v.len(),
                });
            }
            if v.iter().any(|c| !c.is_finite()) {
                return Err(PolicyError::Format("non-finite coefficient".into()));
            }
        }
        Ok(Self {
            q_da,
            q_h,
            features,
            domains,
        })
    }

    pub fn num_features(&self) -> usize {
        self.features.len()
    }

    pub fn num_domains(&self) -> usize {
        self.domains.count()
    }

    /// Flat offset of coefficient `n` for hour `j` and domain `k`, all 1-based.
    pub fn offset(&self, j: usize, k: usize, n: usize) -> usize {
        ((j - 1) * self.num_domains() + (k - 1)) * self.num_features() + (n - 1)
    }

    fn check(&self, j: usize, k: usize) -> Result<(), PolicyError> {
        if j == 0 || j > 24 || k == 0 || k > self.num_domains() {
            return Err(PolicyError::IndexOutOfRange { j, k });
        }
        Ok(())
    }

    pub fn coefficients(&self, target: Target, j: usize, k: usize) -> Result<&[f64], PolicyError> {
        self.check(j, k)?;
        let start = self.offset(j, k, 1);
        let v = match target {
            Target::Power => &self.q_da,
            Target::Hydrogen => &self.q_h,
        };
        Ok(&v[start..start + self.num_features()])
    }

    pub fn set(&mut self, target: Target, j: usize, k: usize, n: usize, value: f64) {
        let i = self.offset(j, k, n);
        match target {
            Target::Power => self.q_da[i] = value,
            Target::Hydrogen => self.q_h[i] = value,
        }
    }

    pub fn write_csv(&self, out: &mut impl Write) -> std::io::Result<()> {
        writeln!(out, "j,k,target,n,coefficient")?;
        for j in 1..=24 {
            for k in 1..=self.num_domains() {
                for target in [Target::Power, Target::Hydrogen] {
                    let q = self.coefficients(target, j, k).expect("in range");
                    for (n, c) in q.iter().enumerate() {
                        writeln!(out, "{j},{k},{},{},{c}", target.label(), n + 1)?;
                    }
                }
            }
        }
        Ok(())
    }

    /// Reads a policy table written by [`PolicySet::write_csv`]. Every
    /// coefficient must be present exactly once.
    pub fn read_csv(text: &str, features: FeatureConfig, domains: PriceDomains) -> Result<Self, PolicyError> {
        let mut ps = Self::zeros(features, domains);
        let len = ps.q_da.len();
        let mut seen = vec![[false; 2]; len];
        let mut reader = csv::ReaderBuilder::new().trim(csv::Trim::All).from_reader(text.as_bytes());
        let headers = reader.headers()?.clone();
        if headers.iter().collect::<Vec<_>>() != ["j", "k", "target", "n", "coefficient"] {
            return Err(PolicyError::Format("header must be j,k,target,n,coefficient".into()));
        }
        for (i, row) in reader.records().enumerate() {
            let row = row?;
            let bad = |what: &str| PolicyError::Format(format!("row {}: bad {what}", i + 1));
            let j: usize = row[0].parse().map_err(|_| bad("j"))?;
            let k: usize = row[1].parse().map_err(|_| bad("k"))?;
            let target = match &row[2] {
                "da" => Target::Power,
                "h" => Target::Hydrogen,
                _ => return Err(bad("target")),
            };
            let n: usize = row[3].parse().map_err(|_| bad("n"))?;
            let c: f64 = row[4].parse().map_err(|_| bad("coefficient"))?;
            ps.check(j, k)?;
            if n == 0 || n > ps.num_features() || !c.is_finite() {
                return Err(bad("feature index or value"));
            }
            let off = ps.offset(j, k, n);
            let slot = &mut seen[off][target as usize];
            if *slot {
                return Err(bad("duplicate entry"));
            }
            *slot = true;
            ps.set(target, j, k, n, c);
        }
        if seen.iter().any(|s| !s[0] || !s[1]) {
            return Err(PolicyError::Format("missing coefficients".into()));
        }
        Ok(ps)
    }
}

fn dot(q: &[f64], x: &[f64]) -> f64 {
    q.iter().zip(x).map(|(a, b)| a * b).sum()
}

/// Raw policy output `(q_da · x, q_h · x)` for hour `j` and domain `k`.
pub fn evaluate_policy(ps: &PolicySet, j: usize, k: usize, x: &[f64]) -> Result<(f64, f64), PolicyError> {
    if x.len() != ps.num_features() {
        return Err(PolicyError::DimensionMismatch {
            expected: ps.num_features(),
            found: x.len(),
        });
    }
    Ok((
        dot(ps.coefficients(Target::Power, j, k)?, x),
        dot(ps.coefficients(Target::Hydrogen, j, k)?, x),
    ))
}

/// Slope from the realized-price coefficient, intercept from the remaining
/// coefficients applied to `breve_x`.
pub fn curve_coefficients(ps: &PolicySet, j: usize, k: usize, breve_x: &[f64]) -> Result<CurveCoefficients, PolicyError> {
    if breve_x.len() + 1 != ps.num_features() {
        return Err(PolicyError::DimensionMismatch {
            expected: ps.num_features() - 1,
            found: breve_x.len(),
        });
    }
    let qd = ps.coefficients(Target::Power, j, k)?;
    let qh = ps.coefficients(Target::Hydrogen, j, k)?;
    Ok(CurveCoefficients {
        a1: qd[0],
        b1: dot(&qd[1..], breve_x),
        a2: qh[0],
        b2: dot(&qh[1..], breve_x),
    })
}
