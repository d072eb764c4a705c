//! Benjamini–Hochberg FDR control across per-year symmetry tests.

use rayon::prelude::*;
use serde::Serialize;
use thiserror::Error;

use crate::panel::{split_by_year, ReturnPanel};
use crate::rng::mix_seed;
use crate::symmetry_test::{run_test, BootstrapConfig, TestError, TestResult};

#[derive(Debug, Error)]
pub enum FdrError {
    #[error("empty p-value list")]
    EmptyInput,
    #[error("p-value {value} outside [0, 1]")]
    BadPValue { value: f64 },
    #[error("nominal level {level} outside (0, 1)")]
    BadLevel { level: f64 },
    #[error("no testable windows (all shorter than min_obs)")]
    NoTestableWindows,
    #[error(transparent)]
    Test(#[from] TestError),
}

/// Benjamini–Hochberg step-up procedure at level `q`.
///
/// Sorts the p-values, finds the largest index `k` (1-based) with
/// `p_(k) <= k q / m`, and rejects every hypothesis with `p <= p_(k)`;
/// ties at the threshold are all rejected. Returns one reject flag per
/// input position.
pub fn bh_fdr(p_values: &[f64], q: f64) -> Result<Vec<bool>, FdrError> {
    if p_values.is_empty() {
        return Err(FdrError::EmptyInput);
    }
    if !(q > 0.0 && q < 1.0) {
        return Err(FdrError::BadLevel { level: q });
    }
    for &p in p_values {
        if !(0.0..=1.0).contains(&p) {
            return Err(FdrError::BadPValue { value: p });
        }
    }
    let m = p_values.len();
    let mut sorted = p_values.to_vec();
    sorted.sort_by(|a, b| a.partial_cmp(b).expect("finite p-values"));
    let mut threshold: Option<f64> = None;
    for (i, &p) in sorted.iter().enumerate().rev() {
        if p <= (i + 1) as f64 * q / m as f64 {
            threshold = Some(p);
            break;
        }
    }
    Ok(match threshold {
        Some(thr) => p_values.iter().map(|&p| p <= thr).collect(),
        None => vec![false; m],
    })
}

/// Per-year testing configuration.
#[derive(Clone, Debug, Serialize)]
pub struct YearlyConfig {
    pub test: BootstrapConfig,
    /// Nominal FDR levels, each in (0, 1).
    pub levels: Vec<f64>,
    /// Minimum number of observations for a window to be tested.
    pub min_obs: usize,
}

impl Default for YearlyConfig {
    fn default() -> Self {
        Self { test: BootstrapConfig::default(), levels: vec![0.01, 0.05, 0.10], min_obs: 50 }
    }
}

/// One tested window.
#[derive(Clone, Debug, Serialize)]
pub struct YearEntry {
    pub year: i32,
    pub result: TestResult,
}

/// A window excluded from testing, with the reason.
#[derive(Clone, Debug, Serialize)]
pub struct SkippedWindow {
    pub year: i32,
    pub t_len: usize,
    pub reason: String,
}

/// Batch outcome: per-year results plus FDR decisions at each level.
#[derive(Clone, Debug, Serialize)]
pub struct YearlyReport {
    pub entries: Vec<YearEntry>,
    pub levels: Vec<f64>,
    /// `decisions[level_index][entry_index]`.
    pub decisions: Vec<Vec<bool>>,
    pub skipped: Vec<SkippedWindow>,
    pub config: YearlyConfig,
}

impl YearlyReport {
    /// Reject flags of one entry across levels, in level order.
    pub fn flags_for_entry(&self, entry_index: usize) -> Vec<bool> {
        self.decisions.iter().map(|d| d[entry_index]).collect()
    }
}

/// Runs the symmetry test on every calendar-year window and controls the
/// FDR jointly across the tested windows at each configured level.
///
/// Window `year` draws its bootstrap seeds from `mix_seed(seed, year)`;
/// windows run in parallel but the report is ordered and deterministic.
/// Windows shorter than `min_obs` (or shorter than a fixed block length)
/// are recorded as skipped and excluded from the FDR family.
pub fn yearly_procedure(
    panel: &ReturnPanel,
    config: &YearlyConfig,
) -> Result<YearlyReport, FdrError> {
    for &q in &config.levels {
        if !(q > 0.0 && q < 1.0) {
            return Err(FdrError::BadLevel { level: q });
        }
    }
    let slices = split_by_year(panel, config.min_obs);
    let mut skipped: Vec<SkippedWindow> = Vec::new();
    let mut testable = Vec::new();
    for s in &slices {
        if s.skipped {
            skipped.push(SkippedWindow {
                year: s.year,
                t_len: s.panel.t_len(),
                reason: format!(
                    "window has {} observations, fewer than min_obs = {}",
                    s.panel.t_len(),
                    config.min_obs
                ),
            });
        } else {
            testable.push(s);
        }
    }

    let outcomes: Vec<(i32, usize, Result<TestResult, TestError>)> = testable
        .par_iter()
        .map(|s| {
            let cfg = BootstrapConfig {
                seed: mix_seed(config.test.seed, s.year as u64),
                ..config.test.clone()
            };
            let mut res = run_test(s.panel.values(), &cfg);
            if let Ok(r) = res.as_mut() {
                r.dropped_rows = s.panel.dropped_rows();
            }
            (s.year, s.panel.t_len(), res)
        })
        .collect();

    let mut entries = Vec::new();
    for (year, t_len, outcome) in outcomes {
        match outcome {
            Ok(result) => entries.push(YearEntry { year, result }),
            Err(TestError::BadBlockLength { l, t, .. }) => skipped.push(SkippedWindow {
                year,
                t_len,
                reason: format!("fixed block length {l} unusable for window length {t}"),
            }),
            Err(e) => return Err(e.into()),
        }
    }
    if entries.is_empty() {
        return Err(FdrError::NoTestableWindows);
    }

    let p_values: Vec<f64> = entries.iter().map(|e| e.result.p_value).collect();
    let mut decisions = Vec::with_capacity(config.levels.len());
    for &q in &config.levels {
        decisions.push(bh_fdr(&p_values, q)?);
    }
    skipped.sort_by_key(|s| s.year);
    Ok(YearlyReport { entries, levels: config.levels.clone(), decisions, skipped, config: config.clone() })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::matrix::Matrix;
    use crate::rng::stream_rng;
    use chrono::NaiveDate;
    use proptest::prelude::*;
    use rand::Rng;

    #[test]
    fn bh_worked_example() {
        let flags = bh_fdr(&[0.01, 0.02, 0.04, 0.20], 0.05).unwrap();
        assert_eq!(flags, vec![true, true, false, false]);
    }

    #[test]
    fn bh_degenerate_inputs() {
        assert_eq!(bh_fdr(&[1.0, 1.0, 1.0], 0.05).unwrap(), vec![false; 3]);
        assert_eq!(bh_fdr(&[0.0, 0.0], 0.05).unwrap(), vec![true; 2]);
        assert!(matches!(bh_fdr(&[], 0.05), Err(FdrError::EmptyInput)));
        assert!(matches!(bh_fdr(&[0.5], 0.0), Err(FdrError::BadLevel { .. })));
        assert!(matches!(bh_fdr(&[1.5], 0.05), Err(FdrError::BadPValue { .. })));
    }

    #[test]
    fn bh_ties_at_threshold_all_rejected() {
        // p_(2) = 0.02 passes at q=0.05, m=4; both 0.02 entries rejected
        let flags = bh_fdr(&[0.02, 0.02, 0.5, 0.9], 0.05).unwrap();
        assert_eq!(flags, vec![true, true, false, false]);
    }

    /// Reference implementation by exhaustive subset search: the BH
    /// rejection set is the largest downward-closed set S with
    /// max(p in S) <= |S| q / m.
    fn bh_oracle(p: &[f64], q: f64) -> Vec<bool> {
        let m = p.len();
        let mut best: Vec<bool> = vec![false; m];
        let mut best_size = 0usize;
        for mask in 0u32..(1 << m) {
            let members: Vec<usize> = (0..m).filter(|&i| mask & (1 << i) != 0).collect();
            if members.is_empty() {
                continue;
            }
            let max_in = members.iter().map(|&i| p[i]).fold(f64::MIN, f64::max);
            let closed = (0..m).all(|i| members.contains(&i) || p[i] > max_in);
            let valid = max_in <= members.len() as f64 * q / m as f64;
            if closed && valid && members.len() > best_size {
                best_size = members.len();
                best = (0..m).map(|i| members.contains(&i)).collect();
            }
        }
        best
    }

    #[test]
    fn bh_matches_exhaustive_oracle_on_grid_vectors() {
        let mut rng = stream_rng(31, 0);
        for _ in 0..10_000 {
            let m = rng.random_range(1..=8);
            let p: Vec<f64> =
                (0..m).map(|_| rng.random_range(0..=100) as f64 / 100.0).collect();
            let q = 0.05;
            assert_eq!(bh_fdr(&p, q).unwrap(), bh_oracle(&p, q), "p = {p:?}");
        }
    }

    proptest! {
        /// Lowering q never enlarges the rejection set.
        #[test]
        fn bh_monotone_in_q(
            p in proptest::collection::vec(0.0f64..=1.0, 1..12),
            q1 in 0.01f64..0.5,
            q2 in 0.01f64..0.5,
        ) {
            let (lo, hi) = if q1 <= q2 { (q1, q2) } else { (q2, q1) };
            let reject_lo = bh_fdr(&p, lo).unwrap();
            let reject_hi = bh_fdr(&p, hi).unwrap();
            for (a, b) in reject_lo.iter().zip(&reject_hi) {
                prop_assert!(!a || *b, "rejection at {lo} but not at {hi}");
            }
        }
    }

    fn synthetic_panel(years: i32, rows_per_year: usize, seed: u64) -> ReturnPanel {
        let mut rng = stream_rng(seed, 0);
        let mut dates = Vec::new();
        for y in 0..years {
            let start = NaiveDate::from_ymd_opt(2000 + y, 1, 1).unwrap();
            for k in 0..rows_per_year {
                dates.push(start + chrono::Days::new(k as u64));
            }
        }
        let t = dates.len();
        let values = Matrix::from_vec(t, 2, (0..2 * t).map(|_| rng.random::<f64>()).collect());
        ReturnPanel::new(dates, values, vec!["a".into(), "b".into()]).unwrap()
    }

    #[test]
    fn yearly_procedure_tests_each_window_with_nested_rejections() {
        let panel = synthetic_panel(4, 60, 5);
        let config = YearlyConfig {
            test: BootstrapConfig { replicates: 30, seed: 9, ..Default::default() },
            ..Default::default()
        };
        let report = yearly_procedure(&panel, &config).unwrap();
        assert_eq!(report.entries.len(), 4);
        assert!(report.skipped.is_empty());
        // nested rejection sets across 1% <= 5% <= 10%
        for e in 0..report.entries.len() {
            let flags = report.flags_for_entry(e);
            assert!(!flags[0] || flags[1]);
            assert!(!flags[1] || flags[2]);
        }
        // single-window panel reduces BH to the plain level-q test
        let single = synthetic_panel(1, 80, 6);
        let rep = yearly_procedure(&single, &config).unwrap();
        assert_eq!(rep.entries.len(), 1);
        for (li, &q) in rep.levels.iter().enumerate() {
            assert_eq!(rep.decisions[li][0], rep.entries[0].result.p_value <= q);
        }
    }

    #[test]
    fn yearly_procedure_skips_short_windows_and_derives_seeds() {
        let panel = synthetic_panel(3, 55, 7);
        // third year truncated below min_obs by slicing rows
        let cut = 2 * 55 + 20;
        let dates = panel.dates()[..cut].to_vec();
        let values = panel.values().slice_rows(0..cut);
        let short = ReturnPanel::new(dates, values, panel.labels().to_vec()).unwrap();

        let config = YearlyConfig {
            test: BootstrapConfig { replicates: 25, seed: 11, ..Default::default() },
            ..Default::default()
        };
        let report = yearly_procedure(&short, &config).unwrap();
        assert_eq!(report.entries.len(), 2);
        assert_eq!(report.skipped.len(), 1);
        assert_eq!(report.skipped[0].year, 2002);
        assert_eq!(report.skipped[0].t_len, 20);

        // determinism and per-year seed derivation
        let again = yearly_procedure(&short, &config).unwrap();
        for (a, b) in report.entries.iter().zip(&again.entries) {
            assert_eq!(a.result.p_value.to_bits(), b.result.p_value.to_bits());
            assert_eq!(a.result.config.seed, mix_seed(11, a.year as u64));
        }
        assert!(matches!(
            yearly_procedure(
                &short,
                &YearlyConfig { min_obs: 1000, ..config.clone() }
            ),
            Err(FdrError::NoTestableWindows)
        ));
    }
}
