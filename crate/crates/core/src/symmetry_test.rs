//! Cramér–von Mises symmetry statistic and the tie-break block bootstrap.
//!
//! The statistic is
//!
//! ```text
//! S_T = (1/T) Σ_t (C_T(U_t) - C̄_T(U_t))²
//! ```
//!
//! the squared distance between the empirical copula and the empirical
//! survival copula integrated under the empirical copula measure. Both
//! counts are integers, so `S_T` is computed as an exact integer
//! numerator divided once by `T³`.
//!
//! P-values come from a moving-block bootstrap with a null-enforcing
//! randomization. Each replicate resamples overlapping blocks of length
//! `l_T` with replacement, ranks the resample, reflects the ranks of
//! every drawn block with an independent fair coin (`u -> 1 - u`, the
//! group action under which the null is invariant), breaks the rank ties
//! induced by block duplication and reflection through a shared uniform
//! perturbation `-η_t / T` per observation, and ranks the perturbed rows
//! again with denominator `T`. The replicate statistic is the same
//! Cramér–von Mises kernel on that randomized sample: the reflections
//! force the resample toward the symmetrized copula, so the draws
//! approximate the null distribution of `S_T` whether or not the data is
//! symmetric. Without the reflection step (or an equivalent recentering)
//! the bootstrap difference `C* - C̄*` keeps the sample's own asymmetry
//! drift, which destroys both size and power.
//!
//! Replicate `m` draws from the ChaCha stream `(seed, m)` in a fixed
//! order — block indices, reflection coins, then `η_1..η_T` — so results
//! are deterministic at any thread count.

use std::ops::Range;

use rand::Rng;
use rayon::prelude::*;
use serde::ser::SerializeStruct;
use serde::{Serialize, Serializer};
use thiserror::Error;

use crate::matrix::Matrix;
use crate::pseudoobs::{self, normalized_ranks, PseudoSample};
use crate::rng::stream_rng;

#[derive(Debug, Error)]
pub enum TestError {
    #[error("sample too short: need at least 2 observations, got {t}")]
    TooFewObservations { t: usize },
    #[error("need at least 2 series, got {n}")]
    TooFewSeries { n: usize },
    #[error("block length {l} must be positive and satisfy {l} * {min_t_over_l} < T = {t}")]
    BadBlockLength { l: usize, t: usize, min_t_over_l: usize },
    #[error("bootstrap needs at least one replicate")]
    NoReplicates,
    #[error(transparent)]
    Rank(#[from] pseudoobs::PseudoError),
}

/// Block length selection: a fixed value or the `1.25 * T^(1/3)` rule.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum BlockLength {
    Auto,
    Fixed(usize),
}

impl Serialize for BlockLength {
    fn serialize<S: Serializer>(&self, serializer: S) -> Result<S::Ok, S::Error> {
        match self {
            BlockLength::Auto => serializer.serialize_str("auto"),
            BlockLength::Fixed(l) => serializer.serialize_u64(*l as u64),
        }
    }
}

/// Bootstrap configuration.
#[derive(Clone, Debug, Serialize)]
pub struct BootstrapConfig {
    /// Number of bootstrap replicates M.
    pub replicates: usize,
    /// Block length, fixed or automatic.
    pub block_length: BlockLength,
    /// Master seed; replicate m uses stream (seed, m).
    pub seed: u64,
    /// Use the (1 + count) / (M + 1) p-value instead of count / M.
    pub add_one_pvalue: bool,
    /// Require T > min_t_over_l * l_T. The default 1 only rules out
    /// l_T >= T; set 2 to enforce the recommended T >= 2 l_T.
    pub min_t_over_l: usize,
}

impl Default for BootstrapConfig {
    fn default() -> Self {
        Self {
            replicates: 250,
            block_length: BlockLength::Auto,
            seed: 42,
            add_one_pvalue: false,
            min_t_over_l: 1,
        }
    }
}

/// Outcome of one symmetry test.
#[derive(Clone, Debug)]
pub struct TestResult {
    /// S_T.
    pub statistic: f64,
    /// T * S_T, the quantity with a nondegenerate limit.
    pub scaled_statistic: f64,
    /// (1/M) #\{m : S*_m > S_T\}, or the add-one variant if configured.
    pub p_value: f64,
    /// Bootstrap draws S*_m, on the same scale as `statistic`.
    pub boot_stats: Vec<f64>,
    pub t_len: usize,
    pub dim: usize,
    pub block_length_used: usize,
    /// Rows removed by the caller's data cleaning, echoed for reports.
    pub dropped_rows: usize,
    pub config: BootstrapConfig,
}

impl Serialize for TestResult {
    fn serialize<S: Serializer>(&self, serializer: S) -> Result<S::Ok, S::Error> {
        let mut s = serializer.serialize_struct("TestResult", 9)?;
        s.serialize_field("statistic", &self.statistic)?;
        s.serialize_field("scaled_statistic", &self.scaled_statistic)?;
        s.serialize_field("p_value", &self.p_value)?;
        s.serialize_field("m", &self.config.replicates)?;
        s.serialize_field("block_length", &self.block_length_used)?;
        s.serialize_field("seed", &self.config.seed)?;
        s.serialize_field("t", &self.t_len)?;
        s.serialize_field("n", &self.dim)?;
        s.serialize_field("dropped_rows", &self.dropped_rows)?;
        s.end()
    }
}

/// Cramér–von Mises distance between the empirical copula and the
/// empirical survival copula, evaluated at the sample points.
pub fn cvm_statistic(sample: &PseudoSample) -> Result<f64, TestError> {
    let t = sample.t_len();
    if t < 2 {
        return Err(TestError::TooFewObservations { t });
    }
    let numer: u128 = (0..t)
        .map(|a| {
            let (c, cbar) = pseudoobs::count_pair_at_rank_row(sample, sample.rank_row(a));
            let diff = c as i64 - cbar as i64;
            (diff * diff) as u128
        })
        .sum();
    let tf = t as f64;
    Ok(numer as f64 / (tf * tf * tf))
}

/// Statistic of a tie-broken bootstrap sample. Identical kernel to
/// [`cvm_statistic`]; kept as its own entry point because it is the
/// quantity the bootstrap replicates.
pub fn bootstrap_statistic(resampled_pseudo: &PseudoSample) -> Result<f64, TestError> {
    cvm_statistic(resampled_pseudo)
}

/// Block length rule `max(1, round(1.25 * T^(1/3)))`, clipped to `T - 1`.
pub fn auto_block_length(t: usize) -> Result<usize, TestError> {
    if t < 2 {
        return Err(TestError::TooFewObservations { t });
    }
    let l = (1.25 * (t as f64).powf(1.0 / 3.0)).round() as usize;
    Ok(l.clamp(1, t - 1))
}

/// The `T - l + 1` overlapping blocks of `l` consecutive row indices.
pub fn moving_blocks(t_len: usize, block_len: usize) -> Result<Vec<Range<usize>>, TestError> {
    if block_len == 0 || block_len >= t_len {
        return Err(TestError::BadBlockLength { l: block_len, t: t_len, min_t_over_l: 1 });
    }
    Ok((0..=t_len - block_len).map(|j| j..j + block_len).collect())
}

/// Source row index and originating draw for each row of a resample:
/// drawn blocks concatenate in draw order and truncate to `t_len` rows.
fn plan_rows(blocks: &[Range<usize>], draws: &[usize], t_len: usize) -> Vec<(usize, usize)> {
    let mut plan = Vec::with_capacity(t_len);
    'outer: for (d, &b) in draws.iter().enumerate() {
        for row in blocks[b].clone() {
            if plan.len() == t_len {
                break 'outer;
            }
            plan.push((row, d));
        }
    }
    debug_assert_eq!(plan.len(), t_len);
    plan
}

/// Concatenates the drawn blocks in order and truncates to `t_len` rows.
pub(crate) fn assemble_blocks(
    series: &Matrix,
    blocks: &[Range<usize>],
    draws: &[usize],
    t_len: usize,
) -> Matrix {
    let n = series.cols();
    let mut data = Vec::with_capacity(t_len * n);
    for (row, _) in plan_rows(blocks, draws, t_len) {
        data.extend_from_slice(series.row(row));
    }
    Matrix::from_vec(t_len, n, data)
}

/// Draws `ceil(T / l)` blocks uniformly with replacement and assembles a
/// resample of exactly `T` rows.
pub fn resample(
    series: &Matrix,
    blocks: &[Range<usize>],
    block_len: usize,
    rng: &mut impl Rng,
) -> Matrix {
    let t_len = series.rows();
    let n_draws = t_len.div_ceil(block_len);
    let draws: Vec<usize> = (0..n_draws).map(|_| rng.random_range(0..blocks.len())).collect();
    assemble_blocks(series, blocks, &draws, t_len)
}

/// Deterministic core of the tie break: subtracts `η_t / T` from every
/// coordinate of observation `t` and ranks the perturbed columns again
/// with denominator `T`.
pub fn tie_break_with_etas(u_star: &Matrix, etas: &[f64]) -> PseudoSample {
    let t_len = u_star.rows();
    let n = u_star.cols();
    assert_eq!(etas.len(), t_len, "one eta per observation");
    let tf = t_len as f64;
    let mut ranks = vec![0u32; t_len * n];
    let mut col = vec![0.0f64; t_len];
    for i in 0..n {
        for t in 0..t_len {
            col[t] = u_star.get(t, i) - etas[t] / tf;
        }
        for (t, k) in pseudoobs::le_counts(&col).into_iter().enumerate() {
            ranks[t * n + i] = k;
        }
    }
    PseudoSample::from_ranks(ranks, t_len as u32, t_len, n).expect("ranks in range")
}

/// Bootstrapped normalized ranks followed by the shared-η tie break.
/// Consumes exactly `T` uniforms from `rng`.
pub fn tie_break_ranks(resampled: &Matrix, rng: &mut impl Rng) -> Result<PseudoSample, TestError> {
    let u_star = normalized_ranks(resampled)?;
    let etas: Vec<f64> = (0..resampled.rows()).map(|_| rng.random::<f64>()).collect();
    Ok(tie_break_with_etas(&u_star.values(), &etas))
}

fn resolve_block_length(config: &BootstrapConfig, t: usize) -> Result<usize, TestError> {
    let l = match config.block_length {
        BlockLength::Auto => auto_block_length(t)?,
        BlockLength::Fixed(l) => l,
    };
    let guard = config.min_t_over_l.max(1);
    if l == 0 || l * guard >= t {
        return Err(TestError::BadBlockLength { l, t, min_t_over_l: guard });
    }
    Ok(l)
}

fn replicate_pseudo_sample(
    values: &Matrix,
    blocks: &[Range<usize>],
    block_len: usize,
    seed: u64,
    replicate: u64,
) -> PseudoSample {
    let t_len = values.rows();
    let mut rng = stream_rng(seed, replicate);
    let n_draws = t_len.div_ceil(block_len);
    let draws: Vec<usize> = (0..n_draws).map(|_| rng.random_range(0..blocks.len())).collect();
    let coins: Vec<bool> = (0..n_draws).map(|_| rng.random::<f64>() < 0.5).collect();

    let plan = plan_rows(blocks, &draws, t_len);
    let n = values.cols();
    let mut data = Vec::with_capacity(t_len * n);
    for &(row, _) in &plan {
        data.extend_from_slice(values.row(row));
    }
    let resampled = Matrix::from_vec(t_len, n, data);
    let u_star = normalized_ranks(&resampled).expect("finite resample");
    let flags: Vec<bool> = plan.iter().map(|&(_, d)| coins[d]).collect();
    let randomized = u_star.reflect_rows(&flags);

    let etas: Vec<f64> = (0..t_len).map(|_| rng.random::<f64>()).collect();
    tie_break_with_etas(&randomized.values(), &etas)
}

/// The tie-broken pseudo-sample of bootstrap replicate `replicate` under
/// the test's seed (diagnostic surface; [`run_test`] takes its draws
/// from exactly this pipeline). Stream draw order: block indices,
/// reflection coins, then etas.
pub fn bootstrap_pseudo_sample(
    values: &Matrix,
    config: &BootstrapConfig,
    replicate: u64,
) -> Result<PseudoSample, TestError> {
    let t = values.rows();
    if t < 2 {
        return Err(TestError::TooFewObservations { t });
    }
    let block_len = resolve_block_length(config, t)?;
    let blocks = moving_blocks(t, block_len)?;
    Ok(replicate_pseudo_sample(values, &blocks, block_len, config.seed, replicate))
}

/// P-value under the strict-exceedance rule, optionally add-one corrected.
pub(crate) fn p_value_from_draws(s_t: f64, boot: &[f64], add_one: bool) -> f64 {
    let count = boot.iter().filter(|&&s| s > s_t).count();
    if add_one {
        (1 + count) as f64 / (boot.len() + 1) as f64
    } else {
        count as f64 / boot.len() as f64
    }
}

/// Runs the full symmetry test on a raw `T x N` panel of values.
pub fn run_test(values: &Matrix, config: &BootstrapConfig) -> Result<TestResult, TestError> {
    let t = values.rows();
    let n = values.cols();
    if t < 2 {
        return Err(TestError::TooFewObservations { t });
    }
    if n < 2 {
        return Err(TestError::TooFewSeries { n });
    }
    if config.replicates == 0 {
        return Err(TestError::NoReplicates);
    }
    let pseudo = normalized_ranks(values)?;
    let statistic = cvm_statistic(&pseudo)?;
    let block_len = resolve_block_length(config, t)?;
    let blocks = moving_blocks(t, block_len)?;

    let boot_stats: Vec<f64> = (0..config.replicates)
        .into_par_iter()
        .map(|rep| {
            let v = replicate_pseudo_sample(values, &blocks, block_len, config.seed, rep as u64);
            bootstrap_statistic(&v).expect("T >= 2")
        })
        .collect();

    let p_value = p_value_from_draws(statistic, &boot_stats, config.add_one_pvalue);
    Ok(TestResult {
        statistic,
        scaled_statistic: t as f64 * statistic,
        p_value,
        boot_stats,
        t_len: t,
        dim: n,
        block_length_used: block_len,
        dropped_rows: 0,
        config: config.clone(),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::pseudoobs::PseudoSample;

    fn sample(ranks: Vec<u32>, denom: u32, t: usize, n: usize) -> PseudoSample {
        PseudoSample::from_ranks(ranks, denom, t, n).unwrap()
    }

    #[test]
    fn statistic_on_reflection_closed_samples_is_zero() {
        let comonotone = sample(vec![1, 1, 2, 2], 3, 2, 2);
        assert_eq!(cvm_statistic(&comonotone).unwrap(), 0.0);
        let countermonotone = sample(vec![1, 2, 2, 1], 3, 2, 2);
        assert_eq!(cvm_statistic(&countermonotone).unwrap(), 0.0);
    }

    #[test]
    fn statistic_worked_three_point_sample() {
        let s = sample(vec![1, 1, 2, 3, 3, 2], 4, 3, 2);
        let v = cvm_statistic(&s).unwrap();
        assert!((v - 1.0 / 27.0).abs() < 1e-15);
        // not reflection-closed, and the statistic sees it
        assert!(v > 0.0);
    }

    #[test]
    fn statistic_rejects_degenerate_sample() {
        let s = sample(vec![1, 1], 2, 1, 2);
        assert!(matches!(cvm_statistic(&s), Err(TestError::TooFewObservations { t: 1 })));
    }

    #[test]
    fn auto_block_length_examples() {
        assert_eq!(auto_block_length(250).unwrap(), 8);
        assert_eq!(auto_block_length(50).unwrap(), 5);
        assert_eq!(auto_block_length(2).unwrap(), 1);
        assert!(auto_block_length(1).is_err());
    }

    #[test]
    fn moving_blocks_construction() {
        let blocks = moving_blocks(5, 2).unwrap();
        assert_eq!(blocks, vec![0..2, 1..3, 2..4, 3..5]);
        assert_eq!(moving_blocks(5, 1).unwrap().len(), 5);
        assert_eq!(moving_blocks(5, 4).unwrap().len(), 2);
        assert!(moving_blocks(5, 5).is_err());
    }

    #[test]
    fn assemble_blocks_truncates_to_t() {
        // T=5, l=2, draws = blocks 3, 1, 4 (1-based) -> rows 3,4,1,2,4 (1-based)
        let series = Matrix::from_vec(5, 1, vec![1.0, 2.0, 3.0, 4.0, 5.0]);
        let blocks = moving_blocks(5, 2).unwrap();
        let out = assemble_blocks(&series, &blocks, &[2, 0, 3], 5);
        assert_eq!(out.data(), &[3.0, 4.0, 1.0, 2.0, 4.0]);
    }

    #[test]
    fn resample_has_exactly_t_rows_for_any_draws() {
        let series = Matrix::from_vec(7, 2, (0..14).map(f64::from).collect());
        let blocks = moving_blocks(7, 3).unwrap();
        let mut rng = stream_rng(1, 0);
        for _ in 0..50 {
            let r = resample(&series, &blocks, 3, &mut rng);
            assert_eq!(r.rows(), 7);
            assert_eq!(r.cols(), 2);
        }
    }

    #[test]
    fn singleton_blocks_are_iid_row_resampling() {
        let series = Matrix::from_vec(4, 1, vec![10.0, 20.0, 30.0, 40.0]);
        let blocks = moving_blocks(4, 1).unwrap();
        let mut rng = stream_rng(3, 0);
        let r = resample(&series, &blocks, 1, &mut rng);
        assert_eq!(r.rows(), 4);
        for t in 0..4 {
            assert!(series.data().contains(&r.get(t, 0)));
        }
    }

    #[test]
    fn tie_break_worked_eta_example() {
        // U* column [2/3, 2/3, 1/3], etas (0.5, 0.2, 0.9), T = 3:
        // perturbed [0.5, 0.6, 0.0333...] -> V = [2/3, 1, 1/3]
        let u_star = Matrix::from_vec(3, 1, vec![2.0 / 3.0, 2.0 / 3.0, 1.0 / 3.0]);
        let v = tie_break_with_etas(&u_star, &[0.5, 0.2, 0.9]);
        assert_eq!(v.value(0, 0), 2.0 / 3.0);
        assert_eq!(v.value(1, 0), 1.0);
        assert_eq!(v.value(2, 0), 1.0 / 3.0);
    }

    #[test]
    fn tie_break_below_rank_gap_is_plain_reranking() {
        // distinct rows, max eta/T far below the smallest rank gap
        let u_star = Matrix::from_vec(3, 1, vec![0.25, 0.75, 0.5]);
        let v = tie_break_with_etas(&u_star, &[0.001, 0.002, 0.0005]);
        assert_eq!(v.value(0, 0), 1.0 / 3.0);
        assert_eq!(v.value(1, 0), 1.0);
        assert_eq!(v.value(2, 0), 2.0 / 3.0);
    }

    #[test]
    fn tie_break_columns_are_permutations() {
        let mut rng = stream_rng(8, 0);
        let data: Vec<f64> = (0..30).map(|i| f64::from(i % 7)).collect();
        let resampled = Matrix::from_vec(15, 2, data);
        for _ in 0..20 {
            let v = tie_break_ranks(&resampled, &mut rng).unwrap();
            for i in 0..2 {
                let mut ks: Vec<u32> = (0..15).map(|t| v.rank_row(t)[i]).collect();
                ks.sort_unstable();
                let expect: Vec<u32> = (1..=15).collect();
                assert_eq!(ks, expect);
                // integer column sum T(T+1)/2, i.e. values sum to (T+1)/2
                let total: u32 = (0..15).map(|t| v.rank_row(t)[i]).sum();
                assert_eq!(total, 15 * 16 / 2);
            }
        }
    }

    #[test]
    fn p_value_counting_rules() {
        assert_eq!(p_value_from_draws(0.5, &[0.6, 0.7, 0.8], false), 1.0);
        assert_eq!(p_value_from_draws(0.9, &[0.6, 0.7, 0.8], false), 0.0);
        assert_eq!(p_value_from_draws(0.5, &[0.6, 0.2, 0.3, 0.4], false), 0.25);
        // ties are not exceedances under the strict rule
        assert_eq!(p_value_from_draws(0.5, &[0.5, 0.5], false), 0.0);
        // add-one variant
        assert_eq!(p_value_from_draws(0.9, &[0.6, 0.7, 0.8], true), 0.25);
    }

    #[test]
    fn run_test_validates_inputs() {
        let m = Matrix::from_vec(6, 1, (0..6).map(f64::from).collect());
        assert!(matches!(
            run_test(&m, &BootstrapConfig::default()),
            Err(TestError::TooFewSeries { n: 1 })
        ));

        let m = Matrix::from_vec(6, 2, (0..12).map(f64::from).collect());
        let cfg = BootstrapConfig {
            block_length: BlockLength::Fixed(6),
            replicates: 5,
            ..Default::default()
        };
        assert!(matches!(run_test(&m, &cfg), Err(TestError::BadBlockLength { .. })));

        let cfg = BootstrapConfig { replicates: 0, ..Default::default() };
        assert!(matches!(run_test(&m, &cfg), Err(TestError::NoReplicates)));
    }

    #[test]
    fn run_test_is_deterministic_across_thread_counts() {
        let mut rng = stream_rng(17, 0);
        let data: Vec<f64> = (0..120).map(|_| rng.random::<f64>()).collect();
        let m = Matrix::from_vec(60, 2, data);
        let cfg = BootstrapConfig { replicates: 40, seed: 123, ..Default::default() };

        let pool1 = rayon::ThreadPoolBuilder::new().num_threads(1).build().unwrap();
        let pool4 = rayon::ThreadPoolBuilder::new().num_threads(4).build().unwrap();
        let r1 = pool1.install(|| run_test(&m, &cfg)).unwrap();
        let r4 = pool4.install(|| run_test(&m, &cfg)).unwrap();

        assert_eq!(r1.statistic.to_bits(), r4.statistic.to_bits());
        assert_eq!(r1.p_value.to_bits(), r4.p_value.to_bits());
        assert_eq!(r1.boot_stats.len(), r4.boot_stats.len());
        for (a, b) in r1.boot_stats.iter().zip(&r4.boot_stats) {
            assert_eq!(a.to_bits(), b.to_bits());
        }
    }

    #[test]
    fn bootstrap_pseudo_sample_columns_are_permutations() {
        let mut rng = stream_rng(77, 0);
        let data: Vec<f64> = (0..160).map(|_| rng.random::<f64>()).collect();
        let m = Matrix::from_vec(40, 4, data);
        let cfg = BootstrapConfig { replicates: 25, seed: 5, ..Default::default() };
        for rep in 0..25 {
            let v = bootstrap_pseudo_sample(&m, &cfg, rep).unwrap();
            for i in 0..4 {
                let mut ks: Vec<u32> = (0..40).map(|t| v.rank_row(t)[i]).collect();
                ks.sort_unstable();
                assert_eq!(ks, (1..=40).collect::<Vec<u32>>(), "rep {rep} col {i}");
            }
        }
    }

    #[test]
    fn p_values_approximately_uniform_under_iid_symmetric_null() {
        use rand_distr::{Distribution, StandardNormal};
        let runs = 500usize;
        let mut p_values = Vec::with_capacity(runs);
        for r in 0..runs {
            let mut rng = stream_rng(9000, r as u64);
            let normal = StandardNormal;
            let data: Vec<f64> = (0..120).map(|_| normal.sample(&mut rng)).collect();
            let x = Matrix::from_vec(60, 2, data);
            let cfg = BootstrapConfig {
                replicates: 99,
                seed: crate::rng::mix_seed(9001, r as u64),
                ..Default::default()
            };
            p_values.push(run_test(&x, &cfg).unwrap().p_value);
        }
        p_values.sort_by(|a, b| a.partial_cmp(b).unwrap());
        let n = runs as f64;
        let mut ks = 0.0f64;
        for (i, &p) in p_values.iter().enumerate() {
            ks = ks.max(((i + 1) as f64 / n - p).abs()).max((p - i as f64 / n).abs());
        }
        assert!(ks < 0.1, "KS distance from uniform = {ks}");
    }

    #[test]
    fn statistic_invariant_under_monotone_transform_and_zero_iff_demo() {
        let mut rng = stream_rng(21, 0);
        let data: Vec<f64> = (0..80).map(|_| rng.random::<f64>() - 0.5).collect();
        let m = Matrix::from_vec(40, 2, data);
        let base = cvm_statistic(&normalized_ranks(&m).unwrap()).unwrap();

        let mut mapped = Matrix::zeros(40, 2);
        for t in 0..40 {
            mapped.set(t, 0, m.get(t, 0).exp());
            mapped.set(t, 1, 2.0 * m.get(t, 1) + 3.0);
        }
        let transformed = cvm_statistic(&normalized_ranks(&mapped).unwrap()).unwrap();
        assert_eq!(base.to_bits(), transformed.to_bits());
    }
}
