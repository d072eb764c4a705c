//! Finite-sample symmetry diagnostics: exceedance moments/correlations
//! and odd mixed moments.
//!
//! Under central symmetry the upper and lower joint-tail conditional
//! moments agree (`μ⁺ = -μ⁻`, `σ⁺ = σ⁻`, `ρ⁺ = ρ⁻`) and every odd mixed
//! moment vanishes. On a sample pooled with its own negation these
//! identities hold *exactly* here: standardization and all conditional
//! moments use correctly rounded sums, so mirrored conditioning sets
//! produce exactly mirrored statistics.

use serde::Serialize;
use thiserror::Error;

use crate::matrix::Matrix;
use crate::numeric::exact_sum;

#[derive(Debug, Error)]
pub enum DiagError {
    #[error("series must have equal length >= 2")]
    BadLength,
    #[error("non-finite value in input")]
    NonFinite,
    #[error("series {index} has zero standard deviation")]
    ZeroStdDev { index: usize },
    #[error("max_order must be at least 1")]
    BadOrder,
    #[error("panel must be non-empty")]
    EmptyPanel,
}

/// Conditional moments of a standardized pair in its joint tails.
///
/// The upper set is `{t : x̃1 > a and x̃2 > a}`, the lower set
/// `{t : x̃1 < -a and x̃2 < -a}`. Plug-in (1/n) denominators throughout.
/// Moment fields are `None` when the conditioning set is empty;
/// correlations additionally require both tail standard deviations to be
/// positive (which rules out singleton sets).
#[derive(Clone, Copy, Debug, Serialize)]
pub struct ExceedanceStats {
    pub level: f64,
    pub n_plus: usize,
    pub n_minus: usize,
    pub mu_plus: Option<[f64; 2]>,
    pub mu_minus: Option<[f64; 2]>,
    pub sigma_plus: Option<[f64; 2]>,
    pub sigma_minus: Option<[f64; 2]>,
    pub cov_plus: Option<f64>,
    pub cov_minus: Option<f64>,
    pub rho_plus: Option<f64>,
    pub rho_minus: Option<f64>,
}

fn standardize(xs: &[f64], index: usize) -> Result<Vec<f64>, DiagError> {
    let n = xs.len() as f64;
    let mean = exact_sum(xs.iter().copied()) / n;
    let sd = (exact_sum(xs.iter().map(|x| (x - mean) * (x - mean))) / n).sqrt();
    if sd == 0.0 {
        return Err(DiagError::ZeroStdDev { index });
    }
    Ok(xs.iter().map(|x| (x - mean) / sd).collect())
}

struct TailMoments {
    n: usize,
    mu: Option<[f64; 2]>,
    sigma: Option<[f64; 2]>,
    cov: Option<f64>,
    rho: Option<f64>,
}

fn tail_moments(z1: &[f64], z2: &[f64], idx: &[usize]) -> TailMoments {
    let n = idx.len();
    if n == 0 {
        return TailMoments { n, mu: None, sigma: None, cov: None, rho: None };
    }
    let nf = n as f64;
    let mu1 = exact_sum(idx.iter().map(|&t| z1[t])) / nf;
    let mu2 = exact_sum(idx.iter().map(|&t| z2[t])) / nf;
    let var1 = exact_sum(idx.iter().map(|&t| (z1[t] - mu1) * (z1[t] - mu1))) / nf;
    let var2 = exact_sum(idx.iter().map(|&t| (z2[t] - mu2) * (z2[t] - mu2))) / nf;
    let cov = exact_sum(idx.iter().map(|&t| (z1[t] - mu1) * (z2[t] - mu2))) / nf;
    let (s1, s2) = (var1.sqrt(), var2.sqrt());
    let rho = if n >= 2 && s1 > 0.0 && s2 > 0.0 { Some(cov / (s1 * s2)) } else { None };
    TailMoments { n, mu: Some([mu1, mu2]), sigma: Some([s1, s2]), cov: Some(cov), rho }
}

/// Exceedance moments and correlations of a pair of series at level `a`.
///
/// Each series is standardized by its own plug-in mean and standard
/// deviation before conditioning.
pub fn exceedance_stats(x1: &[f64], x2: &[f64], a: f64) -> Result<ExceedanceStats, DiagError> {
    if x1.len() != x2.len() || x1.len() < 2 {
        return Err(DiagError::BadLength);
    }
    if !a.is_finite() || x1.iter().chain(x2).any(|v| !v.is_finite()) {
        return Err(DiagError::NonFinite);
    }
    let z1 = standardize(x1, 0)?;
    let z2 = standardize(x2, 1)?;

    let plus: Vec<usize> = (0..z1.len()).filter(|&t| z1[t] > a && z2[t] > a).collect();
    let minus: Vec<usize> = (0..z1.len()).filter(|&t| z1[t] < -a && z2[t] < -a).collect();
    let up = tail_moments(&z1, &z2, &plus);
    let down = tail_moments(&z1, &z2, &minus);

    Ok(ExceedanceStats {
        level: a,
        n_plus: up.n,
        n_minus: down.n,
        mu_plus: up.mu,
        mu_minus: down.mu,
        sigma_plus: up.sigma,
        sigma_minus: down.sigma,
        cov_plus: up.cov,
        cov_minus: down.cov,
        rho_plus: up.rho,
        rho_minus: down.rho,
    })
}

/// One mixed central moment: `value = (1/T) Σ_t Π_i (x[t][i] - mean_i)^orders[i]`.
#[derive(Clone, Debug, Serialize)]
pub struct MixedMoment {
    pub orders: Vec<u32>,
    pub value: f64,
}

fn enumerate_odd_multi_indices(dim: usize, max_order: u32) -> Vec<Vec<u32>> {
    let mut out = Vec::new();
    let mut current = vec![0u32; dim];
    fn rec(current: &mut Vec<u32>, pos: usize, remaining: u32, out: &mut Vec<Vec<u32>>) {
        if pos == current.len() {
            let total: u32 = current.iter().sum();
            if total >= 1 && total % 2 == 1 {
                out.push(current.clone());
            }
            return;
        }
        for k in 0..=remaining {
            current[pos] = k;
            rec(current, pos + 1, remaining - k, out);
        }
        current[pos] = 0;
    }
    rec(&mut current, 0, max_order, &mut out);
    out.sort_by_key(|m| (m.iter().sum::<u32>(), m.clone()));
    out
}

/// All sample mixed central moments with odd total order `<= max_order`.
///
/// On a panel pooled with its own negation every reported value is an
/// exact zero. The number of multi-indices grows combinatorially in the
/// panel width; intended for panels of moderate dimension.
pub fn odd_moment_check(values: &Matrix, max_order: u32) -> Result<Vec<MixedMoment>, DiagError> {
    if max_order < 1 {
        return Err(DiagError::BadOrder);
    }
    if values.rows() == 0 || values.cols() == 0 {
        return Err(DiagError::EmptyPanel);
    }
    if values.data().iter().any(|v| !v.is_finite()) {
        return Err(DiagError::NonFinite);
    }
    let t_len = values.rows();
    let dim = values.cols();
    let means: Vec<f64> =
        (0..dim).map(|i| exact_sum(values.column(i).into_iter()) / t_len as f64).collect();

    let mut report = Vec::new();
    for orders in enumerate_odd_multi_indices(dim, max_order) {
        let value = exact_sum((0..t_len).map(|t| {
            let mut prod = 1.0;
            for (i, &m) in orders.iter().enumerate() {
                if m > 0 {
                    prod *= (values.get(t, i) - means[i]).powi(m as i32);
                }
            }
            prod
        })) / t_len as f64;
        report.push(MixedMoment { orders, value });
    }
    Ok(report)
}
