//! Simulation designs for size and power studies.
//!
//! The main design is a one-factor copula with group loadings: a latent
//! AR(1) factor driven by standardized skew-t innovations is shared by
//! all series, each series adds independent symmetric-t noise, and the
//! asymmetry knob is the factor's skewness `γ`. `γ = 0` gives a centrally
//! symmetric copula (size studies); `γ != 0` produces copula central
//! asymmetry (power studies). A Clayton copula sampler provides an
//! exactly asymmetric baseline with known direction.

use rand::Rng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Exp1, Gamma, StudentT};
use rayon::prelude::*;
use serde::Serialize;
use statrs::function::gamma::ln_gamma;
use thiserror::Error;

use crate::matrix::Matrix;
use crate::rng::{mix_seed, stream_rng};
use crate::symmetry_test::{run_test, BlockLength, BootstrapConfig, TestError};

#[derive(Debug, Error)]
pub enum DgpError {
    #[error("degrees of freedom must exceed 2, got {nu}")]
    InvalidNu { nu: f64 },
    #[error("asymmetry parameter must lie in [-1, 1], got {gamma}")]
    InvalidGamma { gamma: f64 },
    #[error("AR(1) coefficient must lie in [0, 1), got {phi}")]
    InvalidPhi { phi: f64 },
    #[error("Clayton parameter must be positive and finite, got {theta}")]
    InvalidTheta { theta: f64 },
    #[error("loadings must be non-negative, got {loading}")]
    InvalidLoading { loading: f64 },
    #[error("need 1 <= n_groups <= n_series and one loading per group")]
    BadGroups,
    #[error("empty dimensions: n_obs and n_series must be positive")]
    EmptyDimensions,
    #[error("empty simulation grid")]
    EmptyGrid,
    #[error("symmetry test failed inside the study: {0}")]
    Test(#[from] TestError),
}

/// Standardized two-piece skew-t sampler.
///
/// Draws `W = s (1 + s γ) |T_ν|` where `s = +1` with probability
/// `(1 + γ)/2`, then standardizes with the closed-form mean and variance
/// of `W`. At `γ = 0` this is exactly the standardized symmetric
/// Student-t, and flipping the sign of `γ` mirrors the distribution.
#[derive(Clone, Debug)]
pub struct SkewT {
    gamma: f64,
    inner: StudentT<f64>,
    mean_w: f64,
    sd_w: f64,
}

impl SkewT {
    pub fn new(gamma: f64, nu: f64) -> Result<Self, DgpError> {
        if !nu.is_finite() || nu <= 2.0 {
            return Err(DgpError::InvalidNu { nu });
        }
        if !gamma.is_finite() || gamma.abs() > 1.0 {
            return Err(DgpError::InvalidGamma { gamma });
        }
        // E|T_ν| and E T_ν² for the half-t moments of the two pieces.
        let m1 = (0.5 * nu.ln() + ln_gamma((nu + 1.0) / 2.0) - ln_gamma(nu / 2.0)).exp() * 2.0
            / (std::f64::consts::PI.sqrt() * (nu - 1.0));
        let m2 = nu / (nu - 2.0);
        let mean_w = 2.0 * gamma * m1;
        let var_w = m2 * (1.0 + 3.0 * gamma * gamma) - mean_w * mean_w;
        Ok(Self {
            gamma,
            inner: StudentT::new(nu).expect("validated nu"),
            mean_w,
            sd_w: var_w.sqrt(),
        })
    }

    /// One standardized draw. Consumes one t variate and one uniform.
    pub fn sample(&self, rng: &mut impl Rng) -> f64 {
        let h = self.inner.sample(rng).abs();
        let u: f64 = rng.random();
        let s = if u < (1.0 + self.gamma) / 2.0 { 1.0 } else { -1.0 };
        let w = s * (1.0 + s * self.gamma) * h;
        (w - self.mean_w) / self.sd_w
    }
}

/// One standardized skew-t draw (zero mean, unit variance).
pub fn skew_t_draw(gamma: f64, nu: f64, rng: &mut impl Rng) -> Result<f64, DgpError> {
    Ok(SkewT::new(gamma, nu)?.sample(rng))
}

/// Skew-t group factor copula specification.
#[derive(Clone, Debug, Serialize)]
pub struct FactorDgpSpec {
    pub n_series: usize,
    pub n_obs: usize,
    /// Factor skewness in [-1, 1].
    pub gamma: f64,
    /// Degrees of freedom, > 2, shared by factor and noise.
    pub nu: f64,
    /// Number of loading groups.
    pub n_groups: usize,
    /// One loading per group, >= 0.
    pub loadings: Vec<f64>,
    /// AR(1) coefficient of the latent factor, in [0, 1).
    pub phi: f64,
    pub seed: u64,
}

impl FactorDgpSpec {
    /// Group count rule used throughout the simulation studies:
    /// 2 groups up to 10 series, 5 groups above.
    pub fn default_group_count(n_series: usize) -> usize {
        if n_series <= 10 {
            2
        } else {
            5
        }
    }

    /// Spec with the study defaults: ν = 6, φ = 0.5, unit loadings,
    /// group count from [`Self::default_group_count`].
    pub fn with_defaults(n_series: usize, n_obs: usize, gamma: f64, seed: u64) -> Self {
        let n_groups = Self::default_group_count(n_series).min(n_series.max(1));
        Self {
            n_series,
            n_obs,
            gamma,
            nu: 6.0,
            n_groups,
            loadings: vec![1.0; n_groups],
            phi: 0.5,
            seed,
        }
    }

    pub fn validate(&self) -> Result<(), DgpError> {
        if self.n_series == 0 || self.n_obs == 0 {
            return Err(DgpError::EmptyDimensions);
        }
        if !self.nu.is_finite() || self.nu <= 2.0 {
            return Err(DgpError::InvalidNu { nu: self.nu });
        }
        if !self.gamma.is_finite() || self.gamma.abs() > 1.0 {
            return Err(DgpError::InvalidGamma { gamma: self.gamma });
        }
        if !self.phi.is_finite() || !(0.0..1.0).contains(&self.phi) {
            return Err(DgpError::InvalidPhi { phi: self.phi });
        }
        if self.n_groups == 0 || self.n_groups > self.n_series || self.loadings.len() != self.n_groups
        {
            return Err(DgpError::BadGroups);
        }
        for &b in &self.loadings {
            if !b.is_finite() || b < 0.0 {
                return Err(DgpError::InvalidLoading { loading: b });
            }
        }
        Ok(())
    }

    /// Group of a series: contiguous blocks, the first `n_series mod
    /// n_groups` groups take one extra member.
    pub fn group_of(&self, series: usize) -> usize {
        let base = self.n_series / self.n_groups;
        let extra = self.n_series % self.n_groups;
        let boundary = extra * (base + 1);
        if series < boundary {
            series / (base + 1)
        } else {
            extra + (series - boundary) / base
        }
    }
}

const FACTOR_BURN_IN: usize = 1000;

/// Simulates the raw `T x N` panel `X[t][i] = β_g(i) Z_t + e[t][i]` with
/// `Z_t = φ Z_{t-1} + sqrt(1 - φ²) ε_t`, `ε_t` standardized skew-t and
/// `e[t][i]` i.i.d. standardized symmetric t. The factor starts from a
/// 1000-step burn-in. Draw order per kept step: factor innovation first,
/// then the N noise terms.
pub fn factor_copula_sample(spec: &FactorDgpSpec) -> Result<Matrix, DgpError> {
    spec.validate()?;
    let mut rng = stream_rng(spec.seed, 0);
    let skew = SkewT::new(spec.gamma, spec.nu)?;
    let noise = StudentT::new(spec.nu).expect("validated nu");
    let noise_sd = (spec.nu / (spec.nu - 2.0)).sqrt();
    let a = spec.phi;
    let b = (1.0 - a * a).sqrt();

    let mut z = 0.0f64;
    for _ in 0..FACTOR_BURN_IN {
        z = a * z + b * skew.sample(&mut rng);
    }

    let mut data = Vec::with_capacity(spec.n_obs * spec.n_series);
    for _ in 0..spec.n_obs {
        z = a * z + b * skew.sample(&mut rng);
        for i in 0..spec.n_series {
            let e = noise.sample(&mut rng) / noise_sd;
            data.push(spec.loadings[spec.group_of(i)] * z + e);
        }
    }
    Ok(Matrix::from_vec(spec.n_obs, spec.n_series, data))
}

/// Clayton copula sample via the Marshall–Olkin gamma-frailty
/// construction: `V ~ Gamma(1/θ, 1)`, `U_i = (1 + E_i / V)^(-1/θ)` with
/// `E_i` unit exponentials. Lower-tail dependent for θ > 0, hence copula
/// centrally asymmetric. Rows are i.i.d.; per row the frailty is drawn
/// first, then the N exponentials.
pub fn clayton_sample(
    theta: f64,
    t_len: usize,
    dim: usize,
    rng: &mut ChaCha8Rng,
) -> Result<Matrix, DgpError> {
    if !theta.is_finite() || theta <= 0.0 {
        return Err(DgpError::InvalidTheta { theta });
    }
    if t_len == 0 || dim == 0 {
        return Err(DgpError::EmptyDimensions);
    }
    let frailty = Gamma::new(1.0 / theta, 1.0).expect("positive shape");
    let mut data = Vec::with_capacity(t_len * dim);
    for _ in 0..t_len {
        let v: f64 = frailty.sample(rng);
        for _ in 0..dim {
            let e: f64 = rng.sample(Exp1);
            data.push((1.0 + e / v).powf(-1.0 / theta));
        }
    }
    Ok(Matrix::from_vec(t_len, dim, data))
}

/// Grid of simulation cells for the rejection-rate study.
#[derive(Clone, Debug)]
pub struct PowerGrid {
    pub gammas: Vec<f64>,
    pub t_values: Vec<usize>,
    pub n_values: Vec<usize>,
}

/// Study configuration: Monte Carlo size, test settings, DGP defaults.
#[derive(Clone, Debug, Serialize)]
pub struct PowerStudyConfig {
    pub mc_reps: usize,
    pub levels: Vec<f64>,
    pub replicates: usize,
    pub block_length: BlockLength,
    pub seed: u64,
    pub nu: f64,
    pub phi: f64,
}

impl Default for PowerStudyConfig {
    fn default() -> Self {
        Self {
            mc_reps: 1000,
            levels: vec![0.01, 0.05, 0.10],
            replicates: 250,
            block_length: BlockLength::Auto,
            seed: 42,
            nu: 6.0,
            phi: 0.5,
        }
    }
}

/// One output row of the study: a grid cell at one nominal level.
#[derive(Clone, Debug, Serialize)]
pub struct PowerCell {
    pub gamma: f64,
    pub t_len: usize,
    pub dim: usize,
    pub level: f64,
    pub rejection_rate: f64,
    pub mc_se: f64,
    pub mc_reps: usize,
    pub seed: u64,
}

/// Empirical rejection frequencies over the grid. Cells iterate in
/// (gamma, T, N) order; replicate r of cell c uses the derived seeds
/// `(seed -> c -> 2r)` for the DGP and `(seed -> c -> 2r + 1)` for the
/// bootstrap, so the table is reproducible at any parallelism.
pub fn power_study(grid: &PowerGrid, cfg: &PowerStudyConfig) -> Result<Vec<PowerCell>, DgpError> {
    if grid.gammas.is_empty() || grid.t_values.is_empty() || grid.n_values.is_empty() {
        return Err(DgpError::EmptyGrid);
    }
    if cfg.mc_reps == 0 {
        return Err(DgpError::EmptyGrid);
    }
    let mut cells = Vec::new();
    for &gamma in &grid.gammas {
        for &t_len in &grid.t_values {
            for &dim in &grid.n_values {
                cells.push((gamma, t_len, dim));
            }
        }
    }

    let rows: Result<Vec<Vec<PowerCell>>, DgpError> = cells
        .par_iter()
        .enumerate()
        .map(|(cell_idx, &(gamma, t_len, dim))| {
            let cell_seed = mix_seed(cfg.seed, cell_idx as u64);
            let reject_counts: Result<Vec<Vec<bool>>, DgpError> = (0..cfg.mc_reps)
                .into_par_iter()
                .map(|rep| {
                    let mut spec =
                        FactorDgpSpec::with_defaults(dim, t_len, gamma, mix_seed(cell_seed, 2 * rep as u64));
                    spec.nu = cfg.nu;
                    spec.phi = cfg.phi;
                    let x = factor_copula_sample(&spec)?;
                    let test_cfg = BootstrapConfig {
                        replicates: cfg.replicates,
                        block_length: cfg.block_length,
                        seed: mix_seed(cell_seed, 2 * rep as u64 + 1),
                        ..Default::default()
                    };
                    let result = run_test(&x, &test_cfg)?;
                    Ok(cfg.levels.iter().map(|&q| result.p_value <= q).collect())
                })
                .collect();
            let reject_counts = reject_counts?;
            Ok(cfg
                .levels
                .iter()
                .enumerate()
                .map(|(li, &level)| {
                    let hits = reject_counts.iter().filter(|r| r[li]).count();
                    let rate = hits as f64 / cfg.mc_reps as f64;
                    PowerCell {
                        gamma,
                        t_len,
                        dim,
                        level,
                        rejection_rate: rate,
                        mc_se: (rate * (1.0 - rate) / cfg.mc_reps as f64).sqrt(),
                        mc_reps: cfg.mc_reps,
                        seed: cfg.seed,
                    }
                })
                .collect())
        })
        .collect();

    Ok(rows?.into_iter().flatten().collect())
}
