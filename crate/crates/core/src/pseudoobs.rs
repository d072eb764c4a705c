//! Normalized-rank pseudo-observations and empirical copula machinery.
//!
//! A pseudo-sample stores every entry as an exact rational rank
//! `k / denom` (integer numerator plus shared denominator) rather than as
//! a pre-rounded `f64`. Rank-vs-rank indicator comparisons are therefore
//! carried out in integer arithmetic, which matches the mathematical
//! definitions exactly; a naive `1.0 - u` reflection would miss boundary
//! equalities such as `1 - 1/3 <= 2/3` already at `T = 2`.
//!
//! The denominator is `T + 1` for normalized ranks of a raw sample and
//! `T` for the re-ranked bootstrap samples.

use serde::Serialize;
use thiserror::Error;

use crate::matrix::Matrix;

#[derive(Debug, Error)]
pub enum PseudoError {
    #[error("non-finite input value at row {row}, column {col}")]
    NonFinite { row: usize, col: usize },
    #[error("empty sample")]
    Empty,
    #[error("dimension {n} too large for inclusion-exclusion (max 20)")]
    DimensionTooLarge { n: usize },
    #[error("rank {rank} exceeds denominator {denom}")]
    RankOutOfRange { rank: u32, denom: u32 },
    #[error("point coordinate {value} outside [0, 1]")]
    PointOutOfRange { value: f64 },
}

/// Evaluation point in the unit hypercube.
#[derive(Clone, Debug, PartialEq)]
pub struct CopulaPoint {
    coords: Vec<f64>,
}

impl CopulaPoint {
    pub fn new(coords: Vec<f64>) -> Result<Self, PseudoError> {
        for &v in &coords {
            if !(0.0..=1.0).contains(&v) {
                return Err(PseudoError::PointOutOfRange { value: v });
            }
        }
        Ok(Self { coords })
    }

    pub fn coords(&self) -> &[f64] {
        &self.coords
    }

    pub fn dim(&self) -> usize {
        self.coords.len()
    }
}

/// T x N sample of rank pseudo-observations with entries `rank / denom`.
///
/// For a rank sample built by [`normalized_ranks`] every entry lies in
/// `(0, 1)` and, absent ties in the source column, each column is a
/// permutation of `{1/(T+1), ..., T/(T+1)}`. Re-ranked bootstrap samples
/// use denominator `T`, so their entries lie in `(0, 1]`; reflected
/// samples may contain `0`.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct PseudoSample {
    t_len: usize,
    dim: usize,
    denom: u32,
    ranks: Vec<u32>, // row-major T x N
}

impl PseudoSample {
    /// Builds a sample from explicit integer ranks over `denom`.
    pub fn from_ranks(
        ranks: Vec<u32>,
        denom: u32,
        t_len: usize,
        dim: usize,
    ) -> Result<Self, PseudoError> {
        assert_eq!(ranks.len(), t_len * dim, "rank buffer does not match dimensions");
        if t_len == 0 || dim == 0 {
            return Err(PseudoError::Empty);
        }
        for &r in &ranks {
            if r > denom {
                return Err(PseudoError::RankOutOfRange { rank: r, denom });
            }
        }
        Ok(Self { t_len, dim, denom, ranks })
    }

    pub fn t_len(&self) -> usize {
        self.t_len
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn denom(&self) -> u32 {
        self.denom
    }

    #[inline]
    pub(crate) fn rank_row(&self, t: usize) -> &[u32] {
        &self.ranks[t * self.dim..(t + 1) * self.dim]
    }

    /// Value of entry `(t, i)` as `f64`.
    pub fn value(&self, t: usize, i: usize) -> f64 {
        self.ranks[t * self.dim + i] as f64 / self.denom as f64
    }

    /// The full sample as an `f64` matrix.
    pub fn values(&self) -> Matrix {
        let d = self.denom as f64;
        Matrix::from_vec(
            self.t_len,
            self.dim,
            self.ranks.iter().map(|&k| k as f64 / d).collect(),
        )
    }

    /// Entrywise reflection `u -> 1 - u`, performed on the integer ranks
    /// (`k -> denom - k`), hence an exact involution.
    pub fn reflect(&self) -> PseudoSample {
        PseudoSample {
            t_len: self.t_len,
            dim: self.dim,
            denom: self.denom,
            ranks: self.ranks.iter().map(|&k| self.denom - k).collect(),
        }
    }

    /// Reflects the selected observations only (`k -> denom - k` on rows
    /// with a true flag), leaving the rest untouched.
    pub(crate) fn reflect_rows(&self, flags: &[bool]) -> PseudoSample {
        assert_eq!(flags.len(), self.t_len, "one flag per observation");
        let mut ranks = self.ranks.clone();
        for (t, &flip) in flags.iter().enumerate() {
            if flip {
                for k in &mut ranks[t * self.dim..(t + 1) * self.dim] {
                    *k = self.denom - *k;
                }
            }
        }
        PseudoSample { t_len: self.t_len, dim: self.dim, denom: self.denom, ranks }
    }

    /// Pools the sample with its reflection into a reflection-closed
    /// sample of size `2T` (the empirical symmetrization construction).
    pub fn pool_with_reflection(&self) -> PseudoSample {
        let mut ranks = self.ranks.clone();
        ranks.extend(self.ranks.iter().map(|&k| self.denom - k));
        PseudoSample { t_len: 2 * self.t_len, dim: self.dim, denom: self.denom, ranks }
    }
}

/// Counts of `<=` per entry for one column: `counts[t] = #{s : x[s] <= x[t]}`.
///
/// Ties share the full `<=` count, matching the rank definition.
pub(crate) fn le_counts(column: &[f64]) -> Vec<u32> {
    let mut sorted = column.to_vec();
    sorted.sort_by(|a, b| a.partial_cmp(b).expect("finite values"));
    column
        .iter()
        .map(|&x| sorted.partition_point(|&v| v <= x) as u32)
        .collect()
}

/// Normalized ranks `U[t][i] = #{s : X[s][i] <= X[t][i]} / (T + 1)`.
pub fn normalized_ranks(values: &Matrix) -> Result<PseudoSample, PseudoError> {
    let t_len = values.rows();
    let dim = values.cols();
    if t_len == 0 || dim == 0 {
        return Err(PseudoError::Empty);
    }
    for t in 0..t_len {
        for i in 0..dim {
            if !values.get(t, i).is_finite() {
                return Err(PseudoError::NonFinite { row: t, col: i });
            }
        }
    }
    let mut ranks = vec![0u32; t_len * dim];
    for i in 0..dim {
        let col = values.column(i);
        for (t, k) in le_counts(&col).into_iter().enumerate() {
            ranks[t * dim + i] = k;
        }
    }
    Ok(PseudoSample { t_len, dim, denom: (t_len + 1) as u32, ranks })
}

fn assert_point_dim(sample: &PseudoSample, point: &CopulaPoint) {
    assert_eq!(sample.dim(), point.dim(), "point dimension does not match sample");
}

/// Empirical copula `C_T(u) = #{t : U_t <= u} / T`.
pub fn ecdf_copula(sample: &PseudoSample, point: &CopulaPoint) -> f64 {
    assert_point_dim(sample, point);
    let d = sample.denom as f64;
    let count = (0..sample.t_len)
        .filter(|&t| {
            sample
                .rank_row(t)
                .iter()
                .zip(point.coords())
                .all(|(&k, &p)| k as f64 / d <= p)
        })
        .count();
    count as f64 / sample.t_len as f64
}

/// Empirical survival copula `C̄_T(u) = #{t : 1 - U_t <= u} / T`,
/// the CDF (not the survival function) of the reflected sample.
pub fn survival_copula(sample: &PseudoSample, point: &CopulaPoint) -> f64 {
    assert_point_dim(sample, point);
    let d = sample.denom as f64;
    let count = (0..sample.t_len)
        .filter(|&t| {
            sample
                .rank_row(t)
                .iter()
                .zip(point.coords())
                .all(|(&k, &p)| (sample.denom - k) as f64 / d <= p)
        })
        .count();
    count as f64 / sample.t_len as f64
}

/// Signed integer numerators of `(C_T, C̄_T)` at a rank-valued evaluation
/// row, computed entirely in integer arithmetic.
#[inline]
pub(crate) fn count_pair_at_rank_row(sample: &PseudoSample, at: &[u32]) -> (u32, u32) {
    let denom = sample.denom;
    let dim = sample.dim;
    let mut c = 0u32;
    let mut cbar = 0u32;
    for s in 0..sample.t_len {
        let row = &sample.ranks[s * dim..(s + 1) * dim];
        if row.iter().zip(at).all(|(&k, &a)| k <= a) {
            c += 1;
        }
        if row.iter().zip(at).all(|(&k, &a)| denom - k <= a) {
            cbar += 1;
        }
    }
    (c, cbar)
}

fn count_pair_at_point(sample: &PseudoSample, point: &CopulaPoint) -> (u32, u32) {
    let d = sample.denom as f64;
    let mut c = 0u32;
    let mut cbar = 0u32;
    for t in 0..sample.t_len {
        let row = sample.rank_row(t);
        if row.iter().zip(point.coords()).all(|(&k, &p)| k as f64 / d <= p) {
            c += 1;
        }
        if row.iter().zip(point.coords()).all(|(&k, &p)| (sample.denom - k) as f64 / d <= p) {
            cbar += 1;
        }
    }
    (c, cbar)
}

/// Antisymmetrization `(C_T(u) - C̄_T(u)) / 2`, in `[-1/2, 1/2]`.
pub fn antisymmetrization(sample: &PseudoSample, point: &CopulaPoint) -> f64 {
    assert_point_dim(sample, point);
    let (c, cbar) = count_pair_at_point(sample, point);
    (c as f64 - cbar as f64) / (2.0 * sample.t_len as f64)
}

/// Symmetrization `(C_T(u) + C̄_T(u)) / 2`, itself a copula CDF.
pub fn symmetrization(sample: &PseudoSample, point: &CopulaPoint) -> f64 {
    assert_point_dim(sample, point);
    let (c, cbar) = count_pair_at_point(sample, point);
    (c as f64 + cbar as f64) / (2.0 * sample.t_len as f64)
}

/// Survival copula through the inclusion–exclusion identity
/// `C̄_T(u) = Σ_{I ⊆ {1..N}} (-1)^{|I|} C_T^{(I)}(1 - u_I)`,
/// where `C_T^{(I)}` is the marginal empirical copula of the sub-vector
/// with coordinates in `I`.
///
/// Equals [`survival_copula`] whenever no coordinate of `u` coincides
/// with a sample atom; at atoms the two finite-sample versions may
/// disagree on boundary ties.
pub fn survival_by_inclusion_exclusion(
    sample: &PseudoSample,
    point: &CopulaPoint,
) -> Result<f64, PseudoError> {
    assert_point_dim(sample, point);
    let n = sample.dim;
    if n > 20 {
        return Err(PseudoError::DimensionTooLarge { n });
    }
    let d = sample.denom as f64;
    let reflected: Vec<f64> = point.coords().iter().map(|&p| 1.0 - p).collect();
    // Empty subset contributes +1, i.e. T in numerator units.
    let mut numer: i64 = sample.t_len as i64;
    for mask in 1u32..(1u32 << n) {
        let mut count = 0i64;
        for t in 0..sample.t_len {
            let row = sample.rank_row(t);
            let mut inside = true;
            for i in 0..n {
                if mask & (1 << i) != 0 && !(row[i] as f64 / d <= reflected[i]) {
                    inside = false;
                    break;
                }
            }
            if inside {
                count += 1;
            }
        }
        if mask.count_ones() % 2 == 1 {
            numer -= count;
        } else {
            numer += count;
        }
    }
    Ok(numer as f64 / sample.t_len as f64)
}
