//! Uncertain input factors and the map from the unit hypercube to factor units.
//!
//! Every factor is independent; a [`FactorSet`] fixes the column order used by
//! every design matrix and evaluation batch built against it.

use std::collections::HashSet;
use std::f64::consts::SQRT_2;

use serde::{Deserialize, Serialize};
use statrs::function::erf::{erfc, erfc_inv};

use crate::error::{Error, Result};

/// Quantile arguments for unbounded marginals are clamped to `[EPS, 1 - EPS]`
/// so that the driver never emits non-finite inputs.
pub const TAIL_CLAMP: f64 = 1e-12;

/// Marginal distribution of a single factor, in natural units.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "distribution", rename_all = "kebab-case")]
pub enum Distribution {
    Uniform {
        lo: f64,
        hi: f64,
    },
    Normal {
        mean: f64,
        sd: f64,
    },
    TruncatedNormal {
        mean: f64,
        sd: f64,
        lo: f64,
        hi: f64,
    },
    Triangular {
        lo: f64,
        mode: f64,
        hi: f64,
    },
    LogUniform {
        lo: f64,
        hi: f64,
    },
    DiscreteUniform {
        values: Vec<f64>,
    },
}

impl Distribution {
    pub fn validate(&self) -> Result<()> {
        let finite = |v: &[f64]| v.iter().all(|x| x.is_finite());
        let ok = match self {
            Distribution::Uniform { lo, hi } => finite(&[*lo, *hi]) && lo < hi,
            Distribution::Normal { mean, sd } => finite(&[*mean, *sd]) && *sd > 0.0,
            Distribution::TruncatedNormal { mean, sd, lo, hi } => {
                finite(&[*mean, *sd, *lo, *hi]) && *sd > 0.0 && lo < hi
            }
            Distribution::Triangular { lo, mode, hi } => {
                finite(&[*lo, *mode, *hi]) && lo <= mode && mode <= hi && lo < hi
            }
            Distribution::LogUniform { lo, hi } => finite(&[*lo, *hi]) && 0.0 < *lo && lo < hi,
            Distribution::DiscreteUniform { values } => {
                !values.is_empty() && finite(values) && values.windows(2).all(|w| w[0] <= w[1])
            }
        };
        if ok {
            Ok(())
        } else {
            Err(Error::input(format!(
                "invalid {} parameters: {}",
                self.keyword(),
                self.describe_constraint()
            )))
        }
    }

    pub fn keyword(&self) -> &'static str {
        match self {
            Distribution::Uniform { .. } => "uniform",
            Distribution::Normal { .. } => "normal",
            Distribution::TruncatedNormal { .. } => "truncated-normal",
            Distribution::Triangular { .. } => "triangular",
            Distribution::LogUniform { .. } => "log-uniform",
            Distribution::DiscreteUniform { .. } => "discrete-uniform",
        }
    }

    fn describe_constraint(&self) -> &'static str {
        match self {
            Distribution::Uniform { .. } => "requires finite lo < hi",
            Distribution::Normal { .. } => "requires finite mean and sd > 0",
            Distribution::TruncatedNormal { .. } => "requires sd > 0 and finite lo < hi",
            Distribution::Triangular { .. } => "requires lo <= mode <= hi and lo < hi",
            Distribution::LogUniform { .. } => "requires 0 < lo < hi",
            Distribution::DiscreteUniform { .. } => {
                "requires a non-empty ascending list of finite values"
            }
        }
    }

    /// The `u`-quantile of the marginal. Assumes `self` is valid.
    pub fn quantile(&self, u: f64) -> Result<f64> {
        if !(0.0..=1.0).contains(&u) {
            return Err(Error::input(format!("quantile level {u} outside [0, 1]")));
        }
        Ok(match self {
            Distribution::Uniform { lo, hi } => lo + u * (hi - lo),
            Distribution::Normal { mean, sd } => {
                mean + sd * standard_normal_quantile(u.clamp(TAIL_CLAMP, 1.0 - TAIL_CLAMP))
            }
            Distribution::TruncatedNormal { mean, sd, lo, hi } => {
                truncated_normal_quantile(*mean, *sd, *lo, *hi, u)
            }
            Distribution::Triangular { lo, mode, hi } => {
                let width = hi - lo;
                let split = (mode - lo) / width;
                if u <= split {
                    lo + (u * width * (mode - lo)).sqrt()
                } else {
                    hi - ((1.0 - u) * width * (hi - mode)).sqrt()
                }
            }
            Distribution::LogUniform { lo, hi } => {
                if u == 0.0 {
                    *lo
                } else if u == 1.0 {
                    *hi
                } else {
                    (lo.ln() + u * (hi.ln() - lo.ln())).exp().clamp(*lo, *hi)
                }
            }
            Distribution::DiscreteUniform { values } => {
                let m = values.len();
                let j = ((u * m as f64).floor() as usize).min(m - 1);
                values[j]
            }
        })
    }

    pub fn mean(&self) -> f64 {
        match self {
            Distribution::Uniform { lo, hi } => 0.5 * (lo + hi),
            Distribution::Normal { mean, .. } => *mean,
            Distribution::TruncatedNormal { mean, sd, lo, hi } => {
                let t = TruncatedMoments::new(*mean, *sd, *lo, *hi);
                mean + sd * t.shift
            }
            Distribution::Triangular { lo, mode, hi } => (lo + mode + hi) / 3.0,
            Distribution::LogUniform { lo, hi } => (hi - lo) / (hi / lo).ln(),
            Distribution::DiscreteUniform { values } => {
                values.iter().sum::<f64>() / values.len() as f64
            }
        }
    }

    pub fn variance(&self) -> f64 {
        match self {
            Distribution::Uniform { lo, hi } => (hi - lo).powi(2) / 12.0,
            Distribution::Normal { sd, .. } => sd * sd,
            Distribution::TruncatedNormal { mean, sd, lo, hi } => {
                let t = TruncatedMoments::new(*mean, *sd, *lo, *hi);
                sd * sd * t.variance_factor
            }
            Distribution::Triangular {
                lo: a,
                mode: c,
                hi: b,
            } => (a * a + b * b + c * c - a * b - a * c - b * c) / 18.0,
            Distribution::LogUniform { lo, hi } => {
                let log_ratio = (hi / lo).ln();
                let second = (hi * hi - lo * lo) / (2.0 * log_ratio);
                let m = (hi - lo) / log_ratio;
                (second - m * m).max(0.0)
            }
            Distribution::DiscreteUniform { values } => {
                let m = self.mean();
                values.iter().map(|v| (v - m).powi(2)).sum::<f64>() / values.len() as f64
            }
        }
    }

    /// Coefficient of variation `sd / |mean|`; `None` when the mean is zero.
    pub fn coefficient_of_variation(&self) -> Option<f64> {
        let m = self.mean();
        (m != 0.0).then(|| self.variance().sqrt() / m.abs())
    }
}

struct TruncatedMoments {
    shift: f64,
    variance_factor: f64,
}

impl TruncatedMoments {
    fn new(mean: f64, sd: f64, lo: f64, hi: f64) -> Self {
        let (a, b) = ((lo - mean) / sd, (hi - mean) / sd);
        let pdf = |z: f64| (-0.5 * z * z).exp() / (2.0 * std::f64::consts::PI).sqrt();
        let mass = normal_interval_mass(a, b);
        let shift = (pdf(a) - pdf(b)) / mass;
        let term = |z: f64| if z.is_finite() { z * pdf(z) } else { 0.0 };
        let variance_factor = 1.0 + (term(a) - term(b)) / mass - shift * shift;
        TruncatedMoments {
            shift,
            variance_factor: variance_factor.max(0.0),
        }
    }
}

/// Standard normal CDF.
pub fn standard_normal_cdf(z: f64) -> f64 {
    0.5 * erfc(-z / SQRT_2)
}

/// `P(a < Z < b)` computed on whichever tail keeps precision.
fn normal_interval_mass(a: f64, b: f64) -> f64 {
    if a >= 0.0 {
        standard_normal_cdf(-a) - standard_normal_cdf(-b)
    } else {
        standard_normal_cdf(b) - standard_normal_cdf(a)
    }
}

/// Standard normal quantile for `p` in `(0, 1)`.
///
/// Upper-half arguments are reflected through `1 - p`, which is exact in binary
/// floating point for `p >= 0.5`, so tail quantiles keep full precision.
pub fn standard_normal_quantile(p: f64) -> f64 {
    if p < 0.5 {
        -SQRT_2 * erfc_inv(2.0 * p)
    } else {
        SQRT_2 * erfc_inv(2.0 * (1.0 - p))
    }
}

fn truncated_normal_quantile(mean: f64, sd: f64, lo: f64, hi: f64, u: f64) -> f64 {
    if u == 0.0 {
        return lo;
    }
    if u == 1.0 {
        return hi;
    }
    let (a, b) = ((lo - mean) / sd, (hi - mean) / sd);
    let z = if a >= 0.0 {
        // Whole support in the upper tail: work on the mirrored lower tail.
        -truncated_standard_quantile(-b, -a, 1.0 - u)
    } else {
        truncated_standard_quantile(a, b, u)
    };
    (mean + sd * z).clamp(lo, hi)
}

fn truncated_standard_quantile(a: f64, b: f64, u: f64) -> f64 {
    let fa = standard_normal_cdf(a);
    let fb = standard_normal_cdf(b);
    let p = fa + u * (fb - fa);
    if p <= 0.0 {
        return a;
    }
    if p >= 1.0 {
        return b;
    }
    standard_normal_quantile(p)
}

/// One uncertain input factor.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "RawFactorSpec")]
pub struct FactorSpec {
    pub name: String,
    #[serde(flatten)]
    pub distribution: Distribution,
}

#[derive(Deserialize)]
struct RawFactorSpec {
    name: String,
    #[serde(flatten)]
    distribution: Distribution,
}

impl TryFrom<RawFactorSpec> for FactorSpec {
    type Error = Error;

    fn try_from(raw: RawFactorSpec) -> Result<Self> {
        FactorSpec::new(raw.name, raw.distribution)
    }
}

impl FactorSpec {
    pub fn new(name: impl Into<String>, distribution: Distribution) -> Result<Self> {
        let name = name.into();
        if name.trim().is_empty() {
            return Err(Error::input("factor name must be non-empty"));
        }
        distribution
            .validate()
            .map_err(|e| Error::input(format!("factor '{name}': {e}")))?;
        Ok(FactorSpec { name, distribution })
    }

    pub fn uniform(name: impl Into<String>, lo: f64, hi: f64) -> Result<Self> {
        Self::new(name, Distribution::Uniform { lo, hi })
    }

    pub fn normal(name: impl Into<String>, mean: f64, sd: f64) -> Result<Self> {
        Self::new(name, Distribution::Normal { mean, sd })
    }

    pub fn discrete(name: impl Into<String>, values: Vec<f64>) -> Result<Self> {
        Self::new(name, Distribution::DiscreteUniform { values })
    }
}

/// Maps a unit-interval coordinate to factor units.
pub fn inverse_transform(spec: &FactorSpec, u: f64) -> Result<f64> {
    if !u.is_finite() {
        return Err(Error::input(format!(
            "factor '{}': non-finite unit coordinate {u}",
            spec.name
        )));
    }
    spec.distribution
        .quantile(u)
        .map_err(|e| Error::input(format!("factor '{}': {e}", spec.name)))
}

/// Ordered, non-empty set of uniquely named factors.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "Vec<FactorSpec>", into = "Vec<FactorSpec>")]
pub struct FactorSet {
    factors: Vec<FactorSpec>,
}

impl TryFrom<Vec<FactorSpec>> for FactorSet {
    type Error = Error;

    fn try_from(factors: Vec<FactorSpec>) -> Result<Self> {
        FactorSet::new(factors)
    }
}

impl From<FactorSet> for Vec<FactorSpec> {
    fn from(set: FactorSet) -> Self {
        set.factors
    }
}

impl FactorSet {
    pub fn new(factors: Vec<FactorSpec>) -> Result<Self> {
        if factors.is_empty() {
            return Err(Error::input("a factor set needs at least one factor"));
        }
        let mut seen = HashSet::new();
        for f in &factors {
            if !seen.insert(f.name.as_str()) {
                return Err(Error::input(format!("duplicate factor name '{}'", f.name)));
            }
        }
        Ok(FactorSet { factors })
    }

    /// `k` identical uniform factors named `x1..xk`.
    pub fn uniform_cube(k: usize, lo: f64, hi: f64) -> Result<Self> {
        let factors = (1..=k)
            .map(|i| FactorSpec::uniform(format!("x{i}"), lo, hi))
            .collect::<Result<Vec<_>>>()?;
        Self::new(factors)
    }

    pub fn k(&self) -> usize {
        self.factors.len()
    }

    pub fn factors(&self) -> &[FactorSpec] {
        &self.factors
    }

    pub fn names(&self) -> Vec<&str> {
        self.factors.iter().map(|f| f.name.as_str()).collect()
    }

    pub fn iter(&self) -> std::slice::Iter<'_, FactorSpec> {
        self.factors.iter()
    }

    /// Applies [`inverse_transform`] column by column.
    pub fn transform_row(&self, u_row: &[f64]) -> Result<Vec<f64>> {
        if u_row.len() != self.k() {
            return Err(Error::input(format!(
                "row has {} coordinates but the factor set has {}",
                u_row.len(),
                self.k()
            )));
        }
        self.factors
            .iter()
            .zip(u_row)
            .map(|(spec, &u)| inverse_transform(spec, u))
            .collect()
    }
}
