//! Report rendering: JSON and CSV with a full config echo, so any output
//! can be regenerated from the parameters it carries.

use std::fmt::Write as _;

use serde::ser::{SerializeMap, Serializer};
use serde::Serialize;

use crate::diagnostics::{exceedance_stats, DiagError};
use crate::dgp::{PowerCell, PowerStudyConfig};
use crate::multiple_testing::YearlyReport;
use crate::panel::ReturnPanel;
use crate::pseudoobs::{normalized_ranks, PseudoError};
use crate::symmetry_test::TestResult;

/// Column suffix for a nominal level: 0.05 -> "5pct", 0.025 -> "2.5pct".
pub fn level_label(q: f64) -> String {
    let pct = q * 100.0;
    if (pct - pct.round()).abs() < 1e-9 {
        format!("{}pct", pct.round() as i64)
    } else {
        format!("{pct}pct")
    }
}

/// Single test result as JSON
/// (`statistic, scaled_statistic, p_value, m, block_length, seed, t, n, dropped_rows`).
pub fn test_result_json(result: &TestResult) -> String {
    serde_json::to_string_pretty(result).expect("serializable result")
}

/// Single test result as a one-row CSV with the same fields as the JSON.
pub fn test_result_csv(result: &TestResult) -> String {
    let mut out =
        String::from("statistic,scaled_statistic,p_value,m,block_length,seed,t,n,dropped_rows\n");
    let _ = writeln!(
        out,
        "{},{},{},{},{},{},{},{},{}",
        result.statistic,
        result.scaled_statistic,
        result.p_value,
        result.config.replicates,
        result.block_length_used,
        result.config.seed,
        result.t_len,
        result.dim,
        result.dropped_rows
    );
    out
}

struct YearlyJson<'a>(&'a YearlyReport);

impl Serialize for YearlyJson<'_> {
    fn serialize<S: Serializer>(&self, serializer: S) -> Result<S::Ok, S::Error> {
        let rep = self.0;
        let mut map = serializer.serialize_map(Some(3))?;
        map.serialize_entry("config", &rep.config)?;

        #[derive(Serialize)]
        struct Entry<'a> {
            year: i32,
            #[serde(flatten)]
            result: &'a TestResult,
            reject: std::collections::BTreeMap<String, bool>,
        }
        let entries: Vec<Entry> = rep
            .entries
            .iter()
            .enumerate()
            .map(|(idx, e)| Entry {
                year: e.year,
                result: &e.result,
                reject: rep
                    .levels
                    .iter()
                    .enumerate()
                    .map(|(li, &q)| (level_label(q), rep.decisions[li][idx]))
                    .collect(),
            })
            .collect();
        map.serialize_entry("entries", &entries)?;
        map.serialize_entry("skipped", &rep.skipped)?;
        map.end()
    }
}

/// Yearly report as JSON: config echo, per-year entries with reject
/// flags, and the skipped windows.
pub fn yearly_report_json(report: &YearlyReport) -> String {
    serde_json::to_string_pretty(&YearlyJson(report)).expect("serializable report")
}

/// Yearly report as CSV, one row per tested year, directly plottable.
/// The config echo and skipped windows ride along as `#` comment lines.
pub fn yearly_report_csv(report: &YearlyReport) -> String {
    let mut out = String::new();
    let _ = writeln!(
        out,
        "# config {}",
        serde_json::to_string(&report.config).expect("serializable config")
    );
    out.push_str("year,t,statistic,scaled_statistic,p_value");
    for &q in &report.levels {
        let _ = write!(out, ",reject_{}", level_label(q));
    }
    out.push('\n');
    for (idx, e) in report.entries.iter().enumerate() {
        let _ = write!(
            out,
            "{},{},{},{},{}",
            e.year, e.result.t_len, e.result.statistic, e.result.scaled_statistic, e.result.p_value
        );
        for li in 0..report.levels.len() {
            let _ = write!(out, ",{}", report.decisions[li][idx]);
        }
        out.push('\n');
    }
    for s in &report.skipped {
        let _ = writeln!(out, "# skipped {} t={} ({})", s.year, s.t_len, s.reason);
    }
    out
}

/// Rejection-rate table as CSV with a config echo comment.
pub fn power_table_csv(cells: &[PowerCell], config: &PowerStudyConfig) -> String {
    let mut out = String::new();
    let _ = writeln!(
        out,
        "# config {}",
        serde_json::to_string(config).expect("serializable config")
    );
    out.push_str("gamma,T,N,level,rejection_rate,mc_se,mc_reps,seed\n");
    for c in cells {
        let _ = writeln!(
            out,
            "{},{},{},{},{},{},{},{}",
            c.gamma, c.t_len, c.dim, c.level, c.rejection_rate, c.mc_se, c.mc_reps, c.seed
        );
    }
    out
}

/// Rejection-rate table as JSON.
pub fn power_table_json(cells: &[PowerCell], config: &PowerStudyConfig) -> String {
    #[derive(Serialize)]
    struct Out<'a> {
        config: &'a PowerStudyConfig,
        cells: &'a [PowerCell],
    }
    serde_json::to_string_pretty(&Out { config, cells }).expect("serializable table")
}

fn opt(v: Option<f64>) -> String {
    v.map_or(String::new(), |x| format!("{x}"))
}

fn opt_pair(v: Option<[f64; 2]>, idx: usize) -> String {
    v.map_or(String::new(), |x| format!("{}", x[idx]))
}

/// Pairwise exceedance table over all column pairs and levels, as CSV.
/// Undefined moments (empty tails, zero variance) are empty cells.
pub fn exceedance_table_csv(panel: &ReturnPanel, levels: &[f64]) -> Result<String, DiagError> {
    let mut out = String::from(
        "series1,series2,a,n_plus,n_minus,\
         mu1_plus,mu2_plus,mu1_minus,mu2_minus,\
         sigma1_plus,sigma2_plus,sigma1_minus,sigma2_minus,\
         cov_plus,cov_minus,rho_plus,rho_minus\n",
    );
    for i in 0..panel.dim() {
        for j in (i + 1)..panel.dim() {
            let x1 = panel.values().column(i);
            let x2 = panel.values().column(j);
            for &a in levels {
                let s = exceedance_stats(&x1, &x2, a)?;
                let _ = writeln!(
                    out,
                    "{},{},{},{},{},{},{},{},{},{},{},{},{},{},{},{},{}",
                    panel.labels()[i],
                    panel.labels()[j],
                    a,
                    s.n_plus,
                    s.n_minus,
                    opt_pair(s.mu_plus, 0),
                    opt_pair(s.mu_plus, 1),
                    opt_pair(s.mu_minus, 0),
                    opt_pair(s.mu_minus, 1),
                    opt_pair(s.sigma_plus, 0),
                    opt_pair(s.sigma_plus, 1),
                    opt_pair(s.sigma_minus, 0),
                    opt_pair(s.sigma_minus, 1),
                    opt(s.cov_plus),
                    opt(s.cov_minus),
                    opt(s.rho_plus),
                    opt(s.rho_minus)
                );
            }
        }
    }
    Ok(out)
}

/// Pseudo-observations of a panel as CSV (debug dump).
pub fn pseudo_csv(panel: &ReturnPanel) -> Result<String, PseudoError> {
    let sample = normalized_ranks(panel.values())?;
    let mut out = String::from("date");
    for l in panel.labels() {
        out.push(',');
        out.push_str(l);
    }
    out.push('\n');
    for (t, date) in panel.dates().iter().enumerate() {
        let _ = write!(out, "{}", date.format("%Y-%m-%d"));
        for i in 0..sample.dim() {
            let _ = write!(out, ",{}", sample.value(t, i));
        }
        out.push('\n');
    }
    Ok(out)
}
