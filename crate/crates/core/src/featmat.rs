//! Binary feature matrices, Bernoulli-process sampling and summary statistics.

use std::cmp::Ordering;
use std::fmt::Write as _;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::levy::{LevyDensity, TruncationRule};
use crate::measures::{sample_jot, sample_scaled_levy, ScalingLaw, UnitaryMeasure};
use crate::special::{binomial, lgamma, poisson, poisson_count, RngStream};

/// One feature: an id and the sorted rows that possess it.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Column {
    pub id: u64,
    pub rows: Vec<u32>,
}

/// Sparse object-by-feature incidence. Stored columns are never empty.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct FeatureMatrix {
    n_rows: usize,
    columns: Vec<Column>,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct MatrixStats {
    pub k_n: usize,
    /// `n_k`, the number of rows holding each feature, in column order.
    pub counts: Vec<u32>,
    pub row_sums: Vec<u32>,
    pub col_sums: Vec<u32>,
}

impl MatrixStats {
    /// Column counts in decreasing order.
    pub fn sorted_counts(&self) -> Vec<u32> {
        let mut c = self.counts.clone();
        c.sort_unstable_by(|a, b| b.cmp(a));
        c
    }
}

/// Descending order of membership strings read from the top row down.
fn binary_desc(a: &[u32], b: &[u32]) -> Ordering {
    for (x, y) in a.iter().zip(b) {
        if x != y {
            // the column holding the earlier row has the larger string
            return x.cmp(y);
        }
    }
    b.len().cmp(&a.len())
}

impl FeatureMatrix {
    /// Builds a matrix, dropping empty columns and sorting row sets.
    pub fn new(n_rows: usize, columns: Vec<Column>) -> Result<Self> {
        let mut kept = Vec::with_capacity(columns.len());
        for mut c in columns {
            c.rows.sort_unstable();
            c.rows.dedup();
            if let Some(&r) = c.rows.last() {
                if r as usize >= n_rows {
                    return Err(Error::param(format!("column {} uses row {r} of {n_rows}", c.id)));
                }
                kept.push(c);
            }
        }
        Ok(FeatureMatrix { n_rows, columns: kept })
    }

    pub fn empty(n_rows: usize) -> Self {
        FeatureMatrix {
            n_rows,
            columns: Vec::new(),
        }
    }

    /// Builds a matrix from row sets of column ids, as emitted by urn schemes.
    pub fn from_rows(rows: &[Vec<u64>]) -> Result<Self> {
        let mut cols: std::collections::BTreeMap<u64, Vec<u32>> = Default::default();
        for (i, r) in rows.iter().enumerate() {
            for &k in r {
                cols.entry(k).or_default().push(i as u32);
            }
        }
        let columns = cols.into_iter().map(|(id, rows)| Column { id, rows }).collect();
        Self::new(rows.len(), columns)
    }

    pub fn n_rows(&self) -> usize {
        self.n_rows
    }

    pub fn columns(&self) -> &[Column] {
        &self.columns
    }

    pub fn push_column(&mut self, id: u64, rows: Vec<u32>) -> Result<()> {
        let m = Self::new(self.n_rows, vec![Column { id, rows }])?;
        self.columns.extend(m.columns);
        Ok(())
    }

    /// Left-ordered representative of the equivalence class. Columns are
    /// sorted by their binary membership string, read top-down, in
    /// decreasing order and relabelled `0..K`.
    pub fn canonicalize(&self) -> FeatureMatrix {
        let mut rows: Vec<Vec<u32>> = self.columns.iter().map(|c| c.rows.clone()).collect();
        rows.sort_by(|a, b| binary_desc(a, b));
        FeatureMatrix {
            n_rows: self.n_rows,
            columns: rows
                .into_iter()
                .enumerate()
                .map(|(i, rows)| Column { id: i as u64, rows })
                .collect(),
        }
    }

    pub fn stats(&self) -> MatrixStats {
        let mut row_sums = vec![0u32; self.n_rows];
        let mut counts = Vec::with_capacity(self.columns.len());
        for c in &self.columns {
            counts.push(c.rows.len() as u32);
            for &r in &c.rows {
                row_sums[r as usize] += 1;
            }
        }
        MatrixStats {
            k_n: self.columns.len(),
            col_sums: counts.clone(),
            counts,
            row_sums,
        }
    }

    pub fn to_dense(&self) -> Vec<Vec<u8>> {
        let mut d = vec![vec![0u8; self.columns.len()]; self.n_rows];
        for (j, c) in self.columns.iter().enumerate() {
            for &r in &c.rows {
                d[r as usize][j] = 1;
            }
        }
        d
    }

    /// Dense 0/1 CSV with a header row of column ids.
    pub fn to_csv(&self) -> String {
        let mut out = String::new();
        let ids: Vec<String> = self.columns.iter().map(|c| c.id.to_string()).collect();
        out.push_str(&ids.join(","));
        out.push('\n');
        for row in self.to_dense() {
            let cells: Vec<&str> = row.iter().map(|&b| if b == 1 { "1" } else { "0" }).collect();
            let _ = writeln!(out, "{}", cells.join(","));
        }
        out
    }
}

pub(crate) fn random_subset(n: usize, m: usize, rng: &mut RngStream) -> Vec<u32> {
    if m >= n {
        return (0..n as u32).collect();
    }
    rand::seq::index::sample(rng, n, m).into_iter().map(|i| i as u32).collect()
}

/// Rows `Z_{ik} ~ Bernoulli(J_k)` independently; empty columns are dropped.
pub fn sample_bernoulli_matrix(m: &UnitaryMeasure, n: usize, rng: &mut RngStream) -> Result<FeatureMatrix> {
    if n == 0 {
        return Err(Error::param("a feature matrix needs n >= 1 rows"));
    }
    let mut columns = Vec::new();
    for (&w, &id) in m.weights.iter().zip(&m.atoms) {
        // the column sum is Binomial(n, w) and, given the sum, the rows are a uniform subset
        let k = binomial(n as u64, w, rng) as usize;
        if k > 0 {
            columns.push(Column {
                id,
                rows: random_subset(n, k, rng),
            });
        }
    }
    FeatureMatrix::new(n, columns)
}

fn ln_choose(n: u32, m: u32) -> f64 {
    lgamma(n as f64 + 1.0) - lgamma(m as f64 + 1.0) - lgamma((n - m) as f64 + 1.0)
}

/// Rates `C(n, m) ∫_0^x s^m (1-s)^{n-m} λ(s) ds`, `m = 1..n`: the expected
/// number of features with column sum `m` coming from jumps below `x`.
pub fn profile_rates(lv: &LevyDensity, n: u32, x: f64) -> Result<Vec<f64>> {
    (1..=n)
        .map(|m| Ok(ln_choose(n, m).exp() * lv.beta_moment(m, n, x)?))
        .collect()
}

/// Features contributed by the jumps of `lv` below `x`, sampled exactly
/// without materializing the jumps: the number with column sum `m` is
/// Poisson with the rate from [`profile_rates`], and each such feature holds
/// a uniform `m`-subset of the rows. Ids start at `first_id`.
pub fn sample_dust(lv: &LevyDensity, x: f64, n: usize, first_id: u64, rng: &mut RngStream) -> Result<Vec<Column>> {
    let rates = profile_rates(lv, n as u32, x)?;
    let mut out = Vec::new();
    let mut id = first_id;
    for (i, &r) in rates.iter().enumerate() {
        let count = poisson(r, rng)?;
        for _ in 0..count {
            out.push(Column {
                id,
                rows: random_subset(n, i + 1, rng),
            });
            id += 1;
        }
    }
    Ok(out)
}

/// Hierarchical draw: a JOT measure, its Bernoulli rows, and the exact
/// contribution of the jumps cut by the truncation rule.
pub fn sample_jot_matrix(
    lv: &LevyDensity,
    pstar: &ScalingLaw,
    trunc: &TruncationRule,
    n: usize,
    rng: &mut RngStream,
) -> Result<(FeatureMatrix, UnitaryMeasure)> {
    let m = sample_jot(lv, pstar, trunc, rng)?;
    let a = m.delta_ref.expect("jot measures record their scaling");
    let cond = lv.conditional(a)?;
    let z = matrix_with_dust(&m, &cond, n, rng)?;
    Ok((z, m))
}

/// Hierarchical draw from the subordinator with density `zeta λ`.
pub fn sample_scaled_matrix(
    lv: &LevyDensity,
    zeta: f64,
    trunc: &TruncationRule,
    n: usize,
    rng: &mut RngStream,
) -> Result<(FeatureMatrix, UnitaryMeasure)> {
    let m = sample_scaled_levy(lv, zeta, trunc, rng)?;
    let z = matrix_with_dust(&m, &lv.scaled(zeta)?, n, rng)?;
    Ok((z, m))
}

/// Bernoulli rows from the kept weights of `m` plus the features of the
/// jumps of `lv` below the truncation floor.
pub fn matrix_with_dust(m: &UnitaryMeasure, lv: &LevyDensity, n: usize, rng: &mut RngStream) -> Result<FeatureMatrix> {
    let mut z = sample_bernoulli_matrix(m, n, rng)?;
    if !m.truncation.exhausted && m.truncation.floor > 0.0 {
        let dust = sample_dust(lv, m.truncation.floor, n, m.len() as u64, rng)?;
        z.columns.extend(dust);
    }
    Ok(z)
}

/// Number of features by column sum, for matrices too large to store.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct CountProfile {
    pub n: u32,
    /// Entry `m - 1` counts the features held by exactly `m` rows.
    pub by_count: Vec<u64>,
}

impl CountProfile {
    pub fn k_n(&self) -> u64 {
        self.by_count.iter().sum()
    }
}

/// Column-sum profile of `n` Bernoulli rows from the subordinator `zeta λ`;
/// counts above `1e9` use the normal approximation of [`poisson_count`].
pub fn sample_count_profile(lv: &LevyDensity, zeta: f64, n: u32, rng: &mut RngStream) -> Result<CountProfile> {
    let (_, hi) = lv.support();
    let rates = profile_rates(lv, n, hi)?;
    let by_count = rates
        .iter()
        .map(|r| poisson_count(zeta * r, rng))
        .collect::<Result<Vec<_>>>()?;
    Ok(CountProfile { n, by_count })
}
