//! Total-effect indices over binary inclusion factors.
//!
//! Both procedures here define a meta-model on `Z in {0,1}^p`: for variable
//! selection `Z_i` says whether regressor `i` enters the fit, and the output
//! is the fit criterion; for grouped permutation importance `Z_i` says
//! whether column `i` is shuffled, and the output is the prediction loss.
//! `T_i` over that cube measures how much the output depends on the choice
//! for `i`, interactions with the other choices included.

mod permutation;
mod regression;

use std::collections::{BTreeSet, HashMap};
use std::path::Path;

use nalgebra::{DMatrix, DVector};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::design::{radial_design, RowTag};
use crate::error::{Error, Result};
use crate::estimators::RadialSample;
use crate::factors::{FactorSet, FactorSpec};

pub use permutation::{
    group_permutation_importance, FeatureImportance, PermutationImportance, PermutationOptions,
    Predictor, MIN_PERMUTATION_BASE,
};
pub use regression::{subset_criterion, Criterion};

/// Largest `p` accepted by exhaustive enumeration of the `2^p` corners.
pub const MAX_EXHAUSTIVE: usize = 20;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum SelectionMode {
    /// Every corner of the inclusion cube; indices carry no Monte Carlo error.
    #[default]
    Exhaustive,
    /// Radial design with discrete `{0, 1}` factors.
    Sampled,
}

/// Exact first-order and total-effect indices of a function on `{0,1}^p`
/// given as `values[mask]`, with bit `i` of `mask` holding `Z_i`.
pub fn binary_cube_indices(values: &[f64], p: usize) -> Result<(Vec<f64>, Vec<f64>)> {
    if p == 0 || p > 63 || values.len() != 1usize << p {
        return Err(Error::input(format!(
            "expected 2^p corner values for p = {p}, got {}",
            values.len()
        )));
    }
    let corners = values.len() as f64;
    let mean = values.iter().sum::<f64>() / corners;
    let variance = values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / corners;
    if variance.is_nan() || variance <= 0.0 {
        return Err(Error::DegenerateOutput(
            "meta-model output is identical at every corner".into(),
        ));
    }
    let mut first = Vec::with_capacity(p);
    let mut total = Vec::with_capacity(p);
    for i in 0..p {
        let bit = 1usize << i;
        let (mut on, mut sq) = (0.0, 0.0);
        for (mask, &v) in values.iter().enumerate() {
            if mask & bit == 0 {
                let w = values[mask | bit];
                sq += (w - v).powi(2);
                on += w - v;
            }
        }
        let half = corners / 2.0;
        // E(Y | Z_i = 1) - E(Y | Z_i = 0) = on / half; each level has weight 1/2.
        first.push((on / half / 2.0).powi(2) / variance);
        total.push(sq / 4.0 / half / variance);
    }
    Ok((first, total))
}

/// Indices of a binary meta-model plus the corner values that were computed.
struct MetaOutcome {
    first_order: Vec<f64>,
    total: Vec<f64>,
    values: HashMap<u64, f64>,
    unavailable: usize,
    sentinel: Option<f64>,
}

/// Evaluates `eval` on the corners needed by `mode` (plus `extra`) and
/// computes the indices. Corners where `eval` yields `None` take the worst
/// value seen among the others, in the direction given by `higher_is_worse`.
fn meta_indices<F>(
    p: usize,
    mode: SelectionMode,
    n_base: usize,
    seed: u64,
    extra: &[u64],
    higher_is_worse: bool,
    eval: F,
) -> Result<MetaOutcome>
where
    F: Fn(u64) -> Result<Option<f64>> + Sync,
{
    let (mut masks, radial) = match mode {
        SelectionMode::Exhaustive => {
            if p > MAX_EXHAUSTIVE {
                return Err(Error::Capability(format!(
                    "exhaustive mode enumerates 2^p corners; p = {p} exceeds {MAX_EXHAUSTIVE}"
                )));
            }
            ((0..1u64 << p).collect::<Vec<_>>(), None)
        }
        SelectionMode::Sampled => {
            let factors = binary_factors(p)?;
            let design = radial_design(&factors, n_base, seed)?;
            let row_masks: Vec<u64> = design
                .iter_rows()
                .map(|u| {
                    let z = factors.transform_row(u)?;
                    Ok(z.iter()
                        .enumerate()
                        .filter(|(_, &v)| v > 0.5)
                        .fold(0u64, |m, (i, _)| m | 1 << i))
                })
                .collect::<Result<_>>()?;
            let unique: BTreeSet<u64> = row_masks
                .iter()
                .copied()
                .chain(extra.iter().copied())
                .collect();
            (unique.into_iter().collect(), Some((design, row_masks)))
        }
    };
    masks.sort_unstable();

    let raw: Vec<Option<f64>> = masks.par_iter().map(|&m| eval(m)).collect::<Result<_>>()?;
    let unavailable = raw.iter().filter(|v| v.is_none()).count();
    let worst =
        raw.iter().flatten().copied().reduce(
            |a, b| {
                if higher_is_worse {
                    a.max(b)
                } else {
                    a.min(b)
                }
            },
        );
    let sentinel = match (unavailable, worst) {
        (0, _) => None,
        (_, Some(w)) => Some(w),
        (_, None) => {
            return Err(Error::DegenerateOutput(
                "meta-model could not be evaluated at any corner".into(),
            ))
        }
    };
    let values: HashMap<u64, f64> = masks
        .iter()
        .zip(&raw)
        .map(|(&m, v)| {
            (
                m,
                v.or(sentinel)
                    .expect("sentinel set when a corner is missing"),
            )
        })
        .collect();

    let (first_order, total) = match radial {
        None => {
            let dense: Vec<f64> = (0..1u64 << p).map(|m| values[&m]).collect();
            binary_cube_indices(&dense, p)?
        }
        Some((design, row_masks)) => {
            let n = design.n_base;
            let at = |tag| values[&row_masks[design.radial_index(tag).expect("radial tag")]];
            let fa = (0..n).map(|j| at(RowTag::A(j))).collect();
            let fb = (0..n).map(|j| at(RowTag::B(j))).collect();
            let fab = (0..p)
                .map(|i| {
                    (0..n)
                        .map(|j| {
                            at(RowTag::AB {
                                factor: i,
                                sample: j,
                            })
                        })
                        .collect()
                })
                .collect();
            let est = RadialSample::from_blocks(fa, fb, fab)?.estimate()?;
            (est.first_order, est.total)
        }
    };
    Ok(MetaOutcome {
        first_order,
        total,
        values,
        unavailable,
        sentinel,
    })
}

fn binary_factors(p: usize) -> Result<FactorSet> {
    FactorSet::new(
        (0..p)
            .map(|i| FactorSpec::discrete(format!("z{}", i + 1), vec![0.0, 1.0]))
            .collect::<Result<_>>()?,
    )
}

/// Candidate regressors, response and fit criterion.
#[derive(Debug, Clone, PartialEq)]
pub struct SelectionProblem {
    names: Vec<String>,
    x: DMatrix<f64>,
    y: DVector<f64>,
    criterion: Criterion,
}

impl SelectionProblem {
    pub fn new(
        names: Vec<String>,
        x: DMatrix<f64>,
        y: Vec<f64>,
        criterion: Criterion,
    ) -> Result<Self> {
        let (n, p) = x.shape();
        if p == 0 || names.len() != p {
            return Err(Error::input(format!(
                "{} candidate names for {p} columns",
                names.len()
            )));
        }
        if y.len() != n || n < 3 {
            return Err(Error::input(format!(
                "need at least 3 observations with one response each, got {n} rows and {} responses",
                y.len()
            )));
        }
        if x.iter().chain(&y).any(|v| !v.is_finite()) {
            return Err(Error::input("regression data contain non-finite values"));
        }
        for (c, name) in names.iter().enumerate() {
            let col = x.column(c);
            if col.iter().all(|&v| v == col[0]) {
                return Err(Error::input(format!(
                    "candidate '{name}' has zero variance"
                )));
            }
        }
        if y.iter().all(|&v| v == y[0]) {
            return Err(Error::DegenerateOutput("response has zero variance".into()));
        }
        Ok(SelectionProblem {
            names,
            x,
            y: DVector::from_vec(y),
            criterion,
        })
    }

    /// Reads candidates from a CSV with a header row. Without `y_path` the
    /// last column of `x_path` must be named `y` and is the response;
    /// otherwise `y_path` holds a single column `y`.
    pub fn from_csv(x_path: &Path, y_path: Option<&Path>, criterion: Criterion) -> Result<Self> {
        let (mut header, mut rows) = read_numeric_csv(x_path)?;
        let y = match y_path {
            None => {
                if header.last().map(String::as_str) != Some("y") {
                    return Err(Error::input(format!(
                        "{}: last column must be 'y' when no response file is given",
                        x_path.display()
                    )));
                }
                header.pop();
                rows.iter_mut()
                    .map(|r| r.pop().expect("row width checked"))
                    .collect()
            }
            Some(path) => {
                let (h, r) = read_numeric_csv(path)?;
                if h != ["y"] {
                    return Err(Error::input(format!(
                        "{}: expected a single column 'y'",
                        path.display()
                    )));
                }
                r.into_iter().map(|mut v| v.remove(0)).collect()
            }
        };
        let p = header.len();
        let x = DMatrix::from_row_iterator(rows.len(), p, rows.into_iter().flatten());
        SelectionProblem::new(header, x, y, criterion)
    }

    pub fn p(&self) -> usize {
        self.names.len()
    }

    pub fn n_obs(&self) -> usize {
        self.y.len()
    }

    pub fn names(&self) -> &[String] {
        &self.names
    }

    pub fn criterion(&self) -> Criterion {
        self.criterion
    }

    pub fn x(&self) -> &DMatrix<f64> {
        &self.x
    }

    pub fn y(&self) -> &DVector<f64> {
        &self.y
    }

    /// Criterion of the fit on the columns whose bits are set in `mask`.
    pub fn criterion_for(&self, mask: u64) -> Option<f64> {
        let cols: Vec<usize> = (0..self.p()).filter(|i| mask >> i & 1 == 1).collect();
        subset_criterion(&self.x, &self.y, &cols, self.criterion)
    }
}

fn read_numeric_csv(path: &Path) -> Result<(Vec<String>, Vec<Vec<f64>>)> {
    let file = std::fs::File::open(path).map_err(|e| Error::at_path(path, e))?;
    let mut reader = csv::ReaderBuilder::new()
        .trim(csv::Trim::All)
        .from_reader(file);
    let header: Vec<String> = reader.headers()?.iter().map(str::to_string).collect();
    let mut rows = Vec::new();
    for (i, record) in reader.records().enumerate() {
        let record = record?;
        let row = record
            .iter()
            .map(|s| {
                s.parse::<f64>().map_err(|_| {
                    Error::input(format!(
                        "{} row {}: '{s}' is not a number",
                        path.display(),
                        i + 1
                    ))
                })
            })
            .collect::<Result<Vec<_>>>()?;
        rows.push(row);
    }
    Ok((header, rows))
}

#[derive(Debug, Clone, PartialEq)]
pub struct SelectionOptions {
    pub mode: SelectionMode,
    /// Base sample size for [`SelectionMode::Sampled`].
    pub n_base: usize,
    pub seed: u64,
    /// Defaults to `1 / p`.
    pub threshold: Option<f64>,
}

impl Default for SelectionOptions {
    fn default() -> Self {
        SelectionOptions {
            mode: SelectionMode::Exhaustive,
            n_base: 1 << 10,
            seed: 0,
            threshold: None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CandidateIndex {
    pub name: String,
    #[serde(rename = "S_i")]
    pub first_order: f64,
    #[serde(rename = "T_i")]
    pub total: f64,
    pub selected: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SelectionResult {
    pub candidates: Vec<CandidateIndex>,
    pub selected: Vec<String>,
    pub threshold: f64,
    pub criterion: Criterion,
    pub mode: SelectionMode,
    /// Distinct subsets fitted.
    pub evaluations: usize,
    /// Subsets whose design was rank deficient; they score `sentinel`, the
    /// worst criterion value among the subsets that could be fitted.
    pub singular_subsets: usize,
    pub sentinel: Option<f64>,
    pub n_obs: usize,
    pub n_base: Option<usize>,
    pub seed: Option<u64>,
}

impl SelectionResult {
    pub fn total(&self) -> Vec<f64> {
        self.candidates.iter().map(|c| c.total).collect()
    }

    pub fn write_csv<W: std::io::Write>(&self, out: W) -> Result<()> {
        let mut w = csv::WriterBuilder::new()
            .terminator(csv::Terminator::Any(b'\n'))
            .from_writer(out);
        w.write_record(["candidate", "S_i", "T_i", "selected"])?;
        for c in &self.candidates {
            w.write_record([
                c.name.clone(),
                c.first_order.to_string(),
                c.total.to_string(),
                c.selected.to_string(),
            ])?;
        }
        w.flush()?;
        Ok(())
    }
}

/// Total-effect indices of the fit criterion over the inclusion cube, and the
/// candidates whose `T_i` exceeds the threshold.
pub fn ti_variable_selection(
    problem: &SelectionProblem,
    opts: &SelectionOptions,
) -> Result<SelectionResult> {
    let p = problem.p();
    if opts.mode == SelectionMode::Exhaustive && problem.n_obs() <= p + 1 {
        return Err(Error::input(format!(
            "exhaustive mode needs more than p + 1 = {} observations, got {}",
            p + 1,
            problem.n_obs()
        )));
    }
    let threshold = opts.threshold.unwrap_or(1.0 / p as f64);
    if !threshold.is_finite() {
        return Err(Error::input("selection threshold must be finite"));
    }
    let outcome = meta_indices(
        p,
        opts.mode,
        opts.n_base,
        opts.seed,
        &[],
        !problem.criterion().higher_is_better(),
        |mask| Ok(problem.criterion_for(mask)),
    )?;

    let candidates: Vec<CandidateIndex> = problem
        .names()
        .iter()
        .enumerate()
        .map(|(i, name)| CandidateIndex {
            name: name.clone(),
            first_order: outcome.first_order[i],
            total: outcome.total[i],
            selected: outcome.total[i] > threshold,
        })
        .collect();
    let sampled = opts.mode == SelectionMode::Sampled;
    Ok(SelectionResult {
        selected: candidates
            .iter()
            .filter(|c| c.selected)
            .map(|c| c.name.clone())
            .collect(),
        candidates,
        threshold,
        criterion: problem.criterion(),
        mode: opts.mode,
        evaluations: outcome.values.len(),
        singular_subsets: outcome.unavailable,
        sentinel: outcome.sentinel,
        n_obs: problem.n_obs(),
        n_base: sampled.then_some(opts.n_base),
        seed: sampled.then_some(opts.seed),
    })
}
