use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::harness::EvaluationBatch;

/// Probability levels reported by [`uncertainty_analysis`].
pub const UA_LEVELS: [f64; 7] = [0.01, 0.05, 0.25, 0.5, 0.75, 0.95, 0.99];

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Quantile {
    pub p: f64,
    pub value: f64,
}

/// Distribution of the model output.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct UncertaintyResult {
    #[serde(default)]
    pub study_id: String,
    pub mean: f64,
    /// Unbiased (`n - 1`) sample variance.
    pub variance: f64,
    pub sd: f64,
    pub quantiles: Vec<Quantile>,
    pub min: f64,
    pub max: f64,
    /// Sorted outputs; the empirical CDF jumps by `1/n` at each entry.
    pub ecdf: Vec<f64>,
    pub n: usize,
}

impl UncertaintyResult {
    pub fn quantile(&self, p: f64) -> Option<f64> {
        self.quantiles.iter().find(|q| q.p == p).map(|q| q.value)
    }

    /// `sd / |mean|`, or `None` for a zero mean.
    pub fn coefficient_of_variation(&self) -> Option<f64> {
        (self.mean != 0.0).then(|| self.sd / self.mean.abs())
    }

    /// Summary statistics as `statistic,value` rows; quantiles appear as `q0.05` etc.
    pub fn write_csv<W: std::io::Write>(&self, out: W) -> Result<()> {
        let mut w = csv::WriterBuilder::new()
            .terminator(csv::Terminator::Any(b'\n'))
            .from_writer(out);
        w.write_record(["statistic", "value"])?;
        w.write_record(["n".to_string(), self.n.to_string()])?;
        for (name, v) in [
            ("mean", self.mean),
            ("variance", self.variance),
            ("sd", self.sd),
            ("min", self.min),
            ("max", self.max),
        ] {
            w.write_record([name.to_string(), v.to_string()])?;
        }
        for q in &self.quantiles {
            w.write_record([format!("q{}", q.p), q.value.to_string()])?;
        }
        w.flush()?;
        Ok(())
    }
}

/// Linear interpolation between order statistics: position `(n - 1) p`.
pub fn quantile_sorted(sorted: &[f64], p: f64) -> f64 {
    debug_assert!(!sorted.is_empty());
    let h = (sorted.len() - 1) as f64 * p.clamp(0.0, 1.0);
    let lo = h.floor() as usize;
    let hi = (lo + 1).min(sorted.len() - 1);
    let frac = h - lo as f64;
    if frac == 0.0 {
        sorted[lo]
    } else {
        sorted[lo] + frac * (sorted[hi] - sorted[lo])
    }
}

pub fn uncertainty_from_values(values: &[f64]) -> Result<UncertaintyResult> {
    let n = values.len();
    if n < 2 {
        return Err(Error::InsufficientData(format!(
            "uncertainty analysis needs at least 2 outputs, got {n}"
        )));
    }
    if values.iter().any(|v| !v.is_finite()) {
        return Err(Error::input("outputs must be finite"));
    }
    let mut ecdf = values.to_vec();
    ecdf.sort_by(f64::total_cmp);
    // A constant sample gets exact moments rather than summation residue.
    let (mean, variance) = if ecdf[0] == ecdf[n - 1] {
        (ecdf[0], 0.0)
    } else {
        let mean = values.iter().sum::<f64>() / n as f64;
        (
            mean,
            values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (n - 1) as f64,
        )
    };
    let quantiles = UA_LEVELS
        .iter()
        .map(|&p| Quantile {
            p,
            value: quantile_sorted(&ecdf, p),
        })
        .collect();
    Ok(UncertaintyResult {
        study_id: String::new(),
        mean,
        variance,
        sd: variance.sqrt(),
        quantiles,
        min: ecdf[0],
        max: ecdf[n - 1],
        ecdf,
        n,
    })
}

/// Moments and quantiles of every kept output in the batch.
pub fn uncertainty_analysis(batch: &EvaluationBatch) -> Result<UncertaintyResult> {
    uncertainty_from_values(batch.y())
}
