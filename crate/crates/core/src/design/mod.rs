//! Sample designs over the unit hypercube.
//!
//! * [`radial_design`]: the paired `A`, `B`, `A_B^i` blocks needed for
//!   first-order and total-effect estimation at `N (k + 2)` runs.
//! * [`plain_design`]: a single quasi-random block, for uncertainty analysis
//!   and moment-independent indices.
//! * [`oat_design`]: one-factor-at-a-time sweeps around a nominal point. Kept
//!   as a foil to show how little of the space such designs visit.

mod direction_numbers;
mod sobol;

use std::fmt;
use std::io::Write;
use std::str::FromStr;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::factors::FactorSet;

pub use sobol::{sobol_points, sobol_sequence, MAX_DIMENSION};

/// Production base sample size.
pub const DEFAULT_BASE_SIZE: usize = 1 << 13;
/// Base sample size for smoke tests.
pub const SMOKE_BASE_SIZE: usize = 1 << 7;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum DesignKind {
    Radial,
    Plain,
    Oat,
}

/// Source of the base points.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Sampler {
    /// Owen-scrambled Sobol' points keyed by the seed, seed 0 included.
    #[default]
    Sobol,
    /// Independent uniform draws from a seeded ChaCha8 stream. Bootstrap
    /// intervals assume independent base samples and are calibrated only here.
    Random,
}

fn base_block(dim: usize, n: usize, seed: u64, sampler: Sampler) -> Result<Vec<f64>> {
    match sampler {
        // Designs always scramble: the raw sequence starts at the origin and its
        // high-dimensional projections bias products of many factors.
        Sampler::Sobol => sobol_points(dim, n, Some(seed)),
        Sampler::Random => {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            Ok((0..dim * n).map(|_| rng.random::<f64>()).collect())
        }
    }
}

/// Provenance of one design row. Indices are zero-based.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum RowTag {
    A(usize),
    B(usize),
    /// `AB { factor: i, sample: j }`: row `A(j)` with column `i` taken from `B(j)`.
    AB {
        factor: usize,
        sample: usize,
    },
    Oat {
        factor: usize,
        step: usize,
    },
    Nominal,
}

impl fmt::Display for RowTag {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            RowTag::A(j) => write!(f, "A:{j}"),
            RowTag::B(j) => write!(f, "B:{j}"),
            RowTag::AB { factor, sample } => write!(f, "AB:{factor}:{sample}"),
            RowTag::Oat { factor, step } => write!(f, "OAT:{factor}:{step}"),
            RowTag::Nominal => f.write_str("NOMINAL"),
        }
    }
}

impl FromStr for RowTag {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let bad = || Error::input(format!("malformed row tag '{s}'"));
        let parts: Vec<&str> = s.split(':').collect();
        let num = |p: &str| p.parse::<usize>().map_err(|_| bad());
        match parts.as_slice() {
            ["NOMINAL"] => Ok(RowTag::Nominal),
            ["A", j] => Ok(RowTag::A(num(j)?)),
            ["B", j] => Ok(RowTag::B(num(j)?)),
            ["AB", i, j] => Ok(RowTag::AB {
                factor: num(i)?,
                sample: num(j)?,
            }),
            ["OAT", i, step] => Ok(RowTag::Oat {
                factor: num(i)?,
                step: num(step)?,
            }),
            _ => Err(bad()),
        }
    }
}

impl Serialize for RowTag {
    fn serialize<S: serde::Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        s.collect_str(self)
    }
}

impl<'de> Deserialize<'de> for RowTag {
    fn deserialize<D: serde::Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        let s = String::deserialize(d)?;
        s.parse().map_err(serde::de::Error::custom)
    }
}

/// Row-major matrix of unit-hypercube points with per-row provenance.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DesignMatrix {
    values: Vec<f64>,
    row_tags: Vec<RowTag>,
    /// Base sample size (`N`); for OAT designs, the levels per factor.
    pub n_base: usize,
    pub k: usize,
    pub seed: u64,
    pub kind: DesignKind,
    #[serde(default)]
    pub sampler: Sampler,
}

impl DesignMatrix {
    /// Assembles a design from raw parts, checking shape and range.
    pub fn from_parts(
        values: Vec<f64>,
        row_tags: Vec<RowTag>,
        n_base: usize,
        k: usize,
        seed: u64,
        kind: DesignKind,
    ) -> Result<Self> {
        if k == 0 || values.len() != row_tags.len() * k {
            return Err(Error::input(format!(
                "design shape mismatch: {} values for {} rows of {k} columns",
                values.len(),
                row_tags.len()
            )));
        }
        if let Some(v) = values.iter().find(|v| !(0.0..=1.0).contains(*v)) {
            return Err(Error::input(format!("design value {v} outside [0, 1]")));
        }
        Ok(DesignMatrix {
            values,
            row_tags,
            n_base,
            k,
            seed,
            kind,
            sampler: Sampler::Sobol,
        })
    }

    pub fn rows(&self) -> usize {
        self.row_tags.len()
    }

    pub fn row(&self, j: usize) -> &[f64] {
        &self.values[j * self.k..(j + 1) * self.k]
    }

    pub fn iter_rows(&self) -> std::slice::ChunksExact<'_, f64> {
        self.values.chunks_exact(self.k)
    }

    pub fn tag(&self, j: usize) -> RowTag {
        self.row_tags[j]
    }

    pub fn row_tags(&self) -> &[RowTag] {
        &self.row_tags
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    /// Row index of a tag in a radial design (`A`, then `B`, then `A_B^0`, `A_B^1`, ...).
    pub fn radial_index(&self, tag: RowTag) -> Option<usize> {
        if self.kind != DesignKind::Radial {
            return None;
        }
        let n = self.n_base;
        match tag {
            RowTag::A(j) if j < n => Some(j),
            RowTag::B(j) if j < n => Some(n + j),
            RowTag::AB { factor, sample } if factor < self.k && sample < n => {
                Some((2 + factor) * n + sample)
            }
            _ => None,
        }
    }

    /// Writes the design as CSV: factor-name header plus a `__tag` column.
    pub fn write_csv<W: Write>(&self, factors: &FactorSet, out: W) -> Result<()> {
        if factors.k() != self.k {
            return Err(Error::input("factor set does not match design width"));
        }
        let mut w = csv::WriterBuilder::new()
            .terminator(csv::Terminator::Any(b'\n'))
            .from_writer(out);
        let mut header: Vec<&str> = factors.names();
        header.push("__tag");
        w.write_record(&header)?;
        for (row, tag) in self.iter_rows().zip(&self.row_tags) {
            let mut rec: Vec<String> = row.iter().map(|v| v.to_string()).collect();
            rec.push(tag.to_string());
            w.write_record(&rec)?;
        }
        w.flush()?;
        Ok(())
    }
}

/// Radial design: `A` and `B` are the first and last `k` columns of one
/// `2k`-dimensional Sobol' block; then one `A_B^i` block per factor.
pub fn radial_design(factors: &FactorSet, n_base: usize, seed: u64) -> Result<DesignMatrix> {
    radial_design_with(factors, n_base, seed, Sampler::Sobol)
}

pub fn radial_design_with(
    factors: &FactorSet,
    n_base: usize,
    seed: u64,
    sampler: Sampler,
) -> Result<DesignMatrix> {
    let k = factors.k();
    if n_base < 2 {
        return Err(Error::input(format!(
            "base sample size N must be >= 2, got {n_base}"
        )));
    }
    if sampler == Sampler::Sobol && 2 * k > MAX_DIMENSION {
        return Err(Error::Capability(format!(
            "radial designs need 2k <= {MAX_DIMENSION} Sobol' dimensions; k = {k}"
        )));
    }
    let base = base_block(2 * k, n_base, seed, sampler)?;
    let a = |j: usize| &base[j * 2 * k..j * 2 * k + k];
    let b = |j: usize| &base[j * 2 * k + k..(j + 1) * 2 * k];

    let total = n_base * (k + 2);
    let mut values = Vec::with_capacity(total * k);
    let mut tags = Vec::with_capacity(total);
    for j in 0..n_base {
        values.extend_from_slice(a(j));
        tags.push(RowTag::A(j));
    }
    for j in 0..n_base {
        values.extend_from_slice(b(j));
        tags.push(RowTag::B(j));
    }
    for i in 0..k {
        for j in 0..n_base {
            let start = values.len();
            values.extend_from_slice(a(j));
            values[start + i] = b(j)[i];
            tags.push(RowTag::AB {
                factor: i,
                sample: j,
            });
        }
    }
    let mut design = DesignMatrix::from_parts(values, tags, n_base, k, seed, DesignKind::Radial)?;
    design.sampler = sampler;
    Ok(design)
}

/// Single quasi-random block of `n` rows, tagged `A(j)`.
pub fn plain_design(factors: &FactorSet, n: usize, seed: u64) -> Result<DesignMatrix> {
    plain_design_with(factors, n, seed, Sampler::Sobol)
}

pub fn plain_design_with(
    factors: &FactorSet,
    n: usize,
    seed: u64,
    sampler: Sampler,
) -> Result<DesignMatrix> {
    let k = factors.k();
    if n == 0 {
        return Err(Error::input("sample size N must be positive"));
    }
    let values = base_block(k, n, seed, sampler)?;
    let tags = (0..n).map(RowTag::A).collect();
    let mut design = DesignMatrix::from_parts(values, tags, n, k, seed, DesignKind::Plain)?;
    design.sampler = sampler;
    Ok(design)
}

/// One-factor-at-a-time design around the centre of the cube.
#[derive(Debug, Clone, PartialEq)]
pub struct OatDesign {
    pub nominal: Vec<f64>,
    pub levels_per_factor: usize,
    pub half_width: f64,
    pub design: DesignMatrix,
}

impl OatDesign {
    /// Row indices of factor `i`'s sweep.
    pub fn sweep_rows(&self, i: usize) -> std::ops::Range<usize> {
        let l = self.levels_per_factor;
        1 + i * l..1 + (i + 1) * l
    }
}

/// Nominal point at `0.5^k` followed by `levels` equispaced values of each
/// factor over `[0.5 - half_width, 0.5 + half_width]`, one factor at a time.
pub fn oat_design(factors: &FactorSet, levels: usize, half_width: f64) -> Result<OatDesign> {
    if levels < 2 {
        return Err(Error::input(format!(
            "OAT needs at least 2 levels, got {levels}"
        )));
    }
    if !(half_width > 0.0 && half_width <= 0.5) {
        return Err(Error::input(format!(
            "OAT half-width {half_width} outside (0, 0.5]"
        )));
    }
    let k = factors.k();
    let nominal = vec![0.5; k];
    let mut values = nominal.clone();
    let mut tags = vec![RowTag::Nominal];
    for i in 0..k {
        for step in 0..levels {
            let t = step as f64 / (levels - 1) as f64;
            let mut row = nominal.clone();
            row[i] = (0.5 - half_width) + 2.0 * half_width * t;
            values.extend_from_slice(&row);
            tags.push(RowTag::Oat { factor: i, step });
        }
    }
    let design = DesignMatrix::from_parts(values, tags, levels, k, 0, DesignKind::Oat)?;
    Ok(OatDesign {
        nominal,
        levels_per_factor: levels,
        half_width,
        design,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn radial_shape_and_tags() {
        let f = FactorSet::uniform_cube(3, 0.0, 1.0).unwrap();
        let d = radial_design(&f, 4, 0).unwrap();
        assert_eq!(d.rows(), 20);
        let count = |p: fn(&RowTag) -> bool| d.row_tags().iter().filter(|t| p(t)).count();
        assert_eq!(count(|t| matches!(t, RowTag::A(_))), 4);
        assert_eq!(count(|t| matches!(t, RowTag::B(_))), 4);
        assert_eq!(count(|t| matches!(t, RowTag::AB { .. })), 12);
        for (j, tag) in d.row_tags().iter().enumerate() {
            assert_eq!(d.radial_index(*tag), Some(j));
        }
    }

    #[test]
    fn radial_is_deterministic() {
        let f = FactorSet::uniform_cube(2, 0.0, 1.0).unwrap();
        let a = radial_design(&f, 1 << 10, 7).unwrap();
        let b = radial_design(&f, 1 << 10, 7).unwrap();
        let bits = |d: &DesignMatrix| d.values().iter().map(|v| v.to_bits()).collect::<Vec<_>>();
        assert_eq!(bits(&a), bits(&b));
        assert_eq!(a.row_tags(), b.row_tags());
    }

    #[test]
    fn radial_rejects_small_or_wide() {
        let f = FactorSet::uniform_cube(2, 0.0, 1.0).unwrap();
        assert!(radial_design(&f, 1, 0).is_err());
        let wide = FactorSet::uniform_cube(33, 0.0, 1.0).unwrap();
        assert!(matches!(
            radial_design(&wide, 8, 0),
            Err(Error::Capability(_))
        ));
    }

    #[test]
    fn oat_small_example() {
        let f = FactorSet::uniform_cube(2, 0.0, 1.0).unwrap();
        let oat = oat_design(&f, 2, 0.5).unwrap();
        let rows: Vec<&[f64]> = oat.design.iter_rows().collect();
        let expected: [[f64; 2]; 5] = [[0.5, 0.5], [0.0, 0.5], [1.0, 0.5], [0.5, 0.0], [0.5, 1.0]];
        assert_eq!(rows.len(), 5);
        for (r, e) in rows.iter().zip(expected) {
            assert_eq!(*r, e);
        }
        assert_eq!(oat.sweep_rows(1), 3..5);
    }

    #[test]
    fn oat_rows_differ_from_nominal_in_one_coordinate() {
        let f = FactorSet::uniform_cube(10, 0.0, 1.0).unwrap();
        let oat = oat_design(&f, 4, 0.3).unwrap();
        assert_eq!(oat.design.rows(), 41);
        for j in 1..oat.design.rows() {
            let diff = oat
                .design
                .row(j)
                .iter()
                .zip(&oat.nominal)
                .filter(|(a, b)| a != b)
                .count();
            assert_eq!(diff, 1, "row {j}");
        }
        assert!(oat_design(&f, 1, 0.3).is_err());
        assert!(oat_design(&f, 3, 0.0).is_err());
        assert!(oat_design(&f, 3, 0.6).is_err());
    }

    #[test]
    fn tags_round_trip_through_strings() {
        for tag in [
            RowTag::A(17),
            RowTag::B(0),
            RowTag::AB {
                factor: 2,
                sample: 17,
            },
            RowTag::Oat { factor: 1, step: 3 },
            RowTag::Nominal,
        ] {
            assert_eq!(tag.to_string().parse::<RowTag>().unwrap(), tag);
        }
        assert_eq!(
            RowTag::AB {
                factor: 2,
                sample: 17
            }
            .to_string(),
            "AB:2:17"
        );
        assert!("AB:1".parse::<RowTag>().is_err());
    }

    #[test]
    fn csv_export_has_tag_column() {
        let f = FactorSet::uniform_cube(2, 0.0, 1.0).unwrap();
        let d = radial_design(&f, 2, 0).unwrap();
        let mut buf = Vec::new();
        d.write_csv(&f, &mut buf).unwrap();
        let text = String::from_utf8(buf).unwrap();
        let lines: Vec<&str> = text.lines().collect();
        assert_eq!(lines[0], "x1,x2,__tag");
        assert_eq!(lines.len(), 1 + 8);
        assert!(lines[1].ends_with(",A:0"));
        assert!(lines[8].ends_with(",AB:1:1"));
        assert!(!text.contains('\r'));
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(48))]

        #[test]
        fn ab_rows_splice_one_column_from_b(k in 1usize..8, log_n in 1u32..7, seed in 0u64..1000) {
            let f = FactorSet::uniform_cube(k, 0.0, 1.0).unwrap();
            let n = 1usize << log_n;
            let d = radial_design(&f, n, seed).unwrap();
            prop_assert_eq!(d.rows(), n * (k + 2));
            prop_assert!(d.values().iter().all(|v| (0.0..=1.0).contains(v)));
            for i in 0..k {
                for j in 0..n {
                    let ab = d.row(d.radial_index(RowTag::AB { factor: i, sample: j }).unwrap());
                    let a = d.row(d.radial_index(RowTag::A(j)).unwrap());
                    let b = d.row(d.radial_index(RowTag::B(j)).unwrap());
                    for c in 0..k {
                        let expected = if c == i { b[c] } else { a[c] };
                        prop_assert_eq!(ab[c].to_bits(), expected.to_bits());
                    }
                }
            }
        }
    }
}
