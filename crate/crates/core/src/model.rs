//! Outcome model, design parameters, covariance of the stage-wise test
//! statistics and Wang–Tsiatis stopping boundaries.
//!
//! All statistic vectors in this crate are laid out stage-major, outcome-minor:
//! the statistic for stage `j` and outcome `k` (both zero-based) lives at
//! position `j * K + k`.

use crate::error::{DesignError, Result};
use crate::matrix::Matrix;
use crate::sim::cholesky_factor;

/// True effects, standard deviations and correlation of the `K` outcomes.
#[derive(Debug, Clone, PartialEq)]
pub struct OutcomeModel {
    mu: Vec<f64>,
    sigma: Vec<f64>,
    rho: Matrix,
}

impl OutcomeModel {
    /// Validates and builds a model. `rho` must be a symmetric correlation
    /// matrix with unit diagonal that admits a Cholesky factorization.
    pub fn new(mu: Vec<f64>, sigma: Vec<f64>, rho: Matrix) -> Result<Self> {
        let k = sigma.len();
        if k == 0 {
            return Err(DesignError::invalid("sigma", "at least one outcome is required"));
        }
        if mu.len() != k {
            return Err(DesignError::DimensionMismatch {
                what: "mu",
                expected: k,
                actual: mu.len(),
            });
        }
        if rho.dim() != k {
            return Err(DesignError::DimensionMismatch {
                what: "rho",
                expected: k,
                actual: rho.dim(),
            });
        }
        if let Some(s) = sigma.iter().find(|s| !(s.is_finite() && **s > 0.0)) {
            return Err(DesignError::invalid(
                "sigma",
                format!("standard deviations must be positive and finite, got {s}"),
            ));
        }
        if mu.iter().any(|m| !m.is_finite()) {
            return Err(DesignError::invalid("mu", "effects must be finite"));
        }
        for i in 0..k {
            if rho[(i, i)] != 1.0 {
                return Err(DesignError::invalid(
                    "rho",
                    format!("diagonal entry {} is {}, expected 1", i + 1, rho[(i, i)]),
                ));
            }
            for j in 0..i {
                let v = rho[(i, j)];
                if !(-1.0..=1.0).contains(&v) {
                    return Err(DesignError::invalid(
                        "rho",
                        format!("entry ({}, {}) = {v} is outside [-1, 1]", i + 1, j + 1),
                    ));
                }
                if v != rho[(j, i)] {
                    return Err(DesignError::invalid(
                        "rho",
                        format!("matrix is not symmetric at ({}, {})", i + 1, j + 1),
                    ));
                }
            }
        }
        cholesky_factor(&rho)?;
        Ok(OutcomeModel { mu, sigma, rho })
    }

    /// `K` outcomes sharing one correlation `rho` between every pair.
    pub fn shared(mu: Vec<f64>, sigma: Vec<f64>, rho: f64) -> Result<Self> {
        let k = sigma.len();
        OutcomeModel::new(mu, sigma, shared_correlation(k, rho))
    }

    /// Unit-variance outcomes with zero true effect and a shared correlation.
    pub fn standard(outcomes: usize, rho: f64) -> Result<Self> {
        OutcomeModel::shared(vec![0.0; outcomes], vec![1.0; outcomes], rho)
    }

    pub fn with_mu(mut self, mu: Vec<f64>) -> Result<Self> {
        if mu.len() != self.outcomes() {
            return Err(DesignError::DimensionMismatch {
                what: "mu",
                expected: self.outcomes(),
                actual: mu.len(),
            });
        }
        self.mu = mu;
        Ok(self)
    }

    pub fn outcomes(&self) -> usize {
        self.sigma.len()
    }

    pub fn mu(&self) -> &[f64] {
        &self.mu
    }

    pub fn sigma(&self) -> &[f64] {
        &self.sigma
    }

    pub fn rho(&self) -> &Matrix {
        &self.rho
    }
}

/// `K x K` matrix with unit diagonal and `rho` everywhere else.
pub fn shared_correlation(outcomes: usize, rho: f64) -> Matrix {
    let mut m = Matrix::identity(outcomes);
    for i in 0..outcomes {
        for j in 0..outcomes {
            if i != j {
                m[(i, j)] = rho;
            }
        }
    }
    m
}

/// Parameters of a group-sequential (or composite) m-of-K design.
#[derive(Debug, Clone, PartialEq)]
pub struct GsDesignSpec {
    /// Maximum number of stages `J`.
    pub stages: usize,
    /// Number of outcomes `K`.
    pub outcomes: usize,
    /// Outcomes `m` that must clear the upper boundary simultaneously.
    pub required: usize,
    /// Wang–Tsiatis shape parameter; 0 gives O'Brien–Fleming, 0.5 gives Pocock.
    pub shape: f64,
    pub alpha: f64,
    pub beta: f64,
    /// Lower anticipated effects.
    pub delta0: Vec<f64>,
    /// Greater anticipated effects.
    pub delta1: Vec<f64>,
    /// Evaluate the per-stage sum of the outcome statistics instead of the m-of-K rule.
    pub composite: bool,
}

impl GsDesignSpec {
    pub fn validate(&self) -> Result<()> {
        if self.stages == 0 {
            return Err(DesignError::invalid("J", "at least one stage is required"));
        }
        if self.outcomes == 0 {
            return Err(DesignError::invalid("K", "at least one outcome is required"));
        }
        if self.required == 0 || self.required > self.outcomes {
            return Err(DesignError::invalid(
                "m",
                format!("must satisfy 1 <= m <= K = {}, got {}", self.outcomes, self.required),
            ));
        }
        if !self.shape.is_finite() {
            return Err(DesignError::invalid("Delta", "must be finite"));
        }
        validate_error_rates(self.alpha, self.beta)?;
        validate_effects(self.outcomes, &self.delta0, &self.delta1)
    }
}

pub(crate) fn validate_error_rates(alpha: f64, beta: f64) -> Result<()> {
    if !(alpha > 0.0 && alpha < 1.0) {
        return Err(DesignError::invalid("alpha", format!("must lie in (0, 1), got {alpha}")));
    }
    if !(beta > 0.0 && beta < 1.0) {
        return Err(DesignError::invalid("beta", format!("must lie in (0, 1), got {beta}")));
    }
    Ok(())
}

pub(crate) fn validate_effects(outcomes: usize, delta0: &[f64], delta1: &[f64]) -> Result<()> {
    if delta0.len() != outcomes {
        return Err(DesignError::DimensionMismatch {
            what: "delta0",
            expected: outcomes,
            actual: delta0.len(),
        });
    }
    if delta1.len() != outcomes {
        return Err(DesignError::DimensionMismatch {
            what: "delta1",
            expected: outcomes,
            actual: delta1.len(),
        });
    }
    for (k, (d0, d1)) in delta0.iter().zip(delta1).enumerate() {
        if !(d0.is_finite() && d1.is_finite()) {
            return Err(DesignError::invalid("delta1", "anticipated effects must be finite"));
        }
        if d1 < d0 {
            return Err(DesignError::invalid(
                "delta1",
                format!("outcome {}: delta1 = {d1} is below delta0 = {d0}", k + 1),
            ));
        }
    }
    Ok(())
}

/// Cumulative sample sizes `N_1 < N_2 < ... < N_J` at the analyses.
#[derive(Debug, Clone, PartialEq)]
pub struct StageSchedule {
    cumulative: Vec<f64>,
}

impl StageSchedule {
    /// `n` participants per stage, so `N_j = j n`.
    pub fn equal(per_stage: usize, stages: usize) -> Result<Self> {
        if per_stage == 0 {
            return Err(DesignError::invalid("n", "per-stage sample size must be positive"));
        }
        StageSchedule::from_cumulative((1..=stages).map(|j| (j * per_stage) as f64).collect())
    }

    pub fn from_cumulative(cumulative: Vec<f64>) -> Result<Self> {
        if cumulative.is_empty() {
            return Err(DesignError::invalid("J", "at least one stage is required"));
        }
        if !(cumulative[0] > 0.0) || cumulative.windows(2).any(|w| !(w[1] > w[0])) {
            return Err(DesignError::invalid(
                "N",
                "cumulative sample sizes must be positive and strictly increasing",
            ));
        }
        Ok(StageSchedule { cumulative })
    }

    pub fn stages(&self) -> usize {
        self.cumulative.len()
    }

    pub fn cumulative(&self) -> &[f64] {
        &self.cumulative
    }

    /// Maximum sample size `N_J`.
    pub fn max_sample_size(&self) -> f64 {
        *self.cumulative.last().expect("schedule has at least one stage")
    }

    /// Statistical information `N_j / sigma_k^2` for outcome `k` at stage `j`.
    pub fn information(&self, stage: usize, sigma: f64) -> f64 {
        self.cumulative[stage] / (sigma * sigma)
    }
}

/// Covariance between `Z[ja][k1]` and `Z[jb][k2]` (zero-based indices).
pub fn covariance_entry(
    ja: usize,
    jb: usize,
    k1: usize,
    k2: usize,
    schedule: &StageSchedule,
    model: &OutcomeModel,
) -> Result<f64> {
    let stages = schedule.stages();
    let outcomes = model.outcomes();
    for (what, index, limit) in [
        ("stage", ja, stages),
        ("stage", jb, stages),
        ("outcome", k1, outcomes),
        ("outcome", k2, outcomes),
    ] {
        if index >= limit {
            return Err(DesignError::IndexOutOfRange { what, index, limit });
        }
    }
    let (early, late) = if ja <= jb { (ja, jb) } else { (jb, ja) };
    let n = schedule.cumulative();
    let time = if early == late {
        1.0
    } else {
        (n[early] / n[late]).sqrt()
    };
    let corr = if k1 == k2 { 1.0 } else { model.rho()[(k1, k2)] };
    Ok(corr * time)
}

/// Full `JK x JK` covariance of the stacked statistics, stage-major.
pub fn assemble_covariance(schedule: &StageSchedule, model: &OutcomeModel) -> Matrix {
    let stages = schedule.stages();
    let outcomes = model.outcomes();
    let n = schedule.cumulative();
    let rho = model.rho();
    let dim = stages * outcomes;
    let mut cov = Matrix::zeros(dim);
    for ja in 0..stages {
        for jb in 0..stages {
            let (early, late) = (ja.min(jb), ja.max(jb));
            let time = (n[early] / n[late]).sqrt();
            for k1 in 0..outcomes {
                for k2 in 0..outcomes {
                    let corr = if k1 == k2 { 1.0 } else { rho[(k1, k2)] };
                    let t = if ja == jb { 1.0 } else { time };
                    cov[(ja * outcomes + k1, jb * outcomes + k2)] = corr * t;
                }
            }
        }
    }
    cov
}

/// Lower (`f`) and upper (`e`) stopping boundaries with the constant that generated them.
#[derive(Debug, Clone, PartialEq)]
pub struct Boundaries {
    pub lower: Vec<f64>,
    pub upper: Vec<f64>,
    pub constant: f64,
}

impl Boundaries {
    pub fn stages(&self) -> usize {
        self.upper.len()
    }
}

/// `e_j = C j^(Delta - 1/2)`, `f_j = -e_j` before the last stage and `f_J = e_J`.
pub fn wang_tsiatis_boundaries(constant: f64, stages: usize, shape: f64) -> Result<Boundaries> {
    if !(constant > 0.0) {
        return Err(DesignError::invalid(
            "C",
            format!("boundary constant must be positive, got {constant}"),
        ));
    }
    if stages == 0 {
        return Err(DesignError::invalid("J", "at least one stage is required"));
    }
    Ok(boundaries_unchecked(constant, stages, shape))
}

pub(crate) fn boundaries_unchecked(constant: f64, stages: usize, shape: f64) -> Boundaries {
    let upper: Vec<f64> = (1..=stages)
        .map(|j| constant * (j as f64).powf(shape - 0.5))
        .collect();
    let mut lower: Vec<f64> = upper.iter().map(|e| -e).collect();
    lower[stages - 1] = upper[stages - 1];
    Boundaries {
        lower,
        upper,
        constant,
    }
}

/// Which outcomes receive their greater anticipated effect in the power configuration.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum LfcMode {
    /// The first `m` outcomes.
    #[default]
    FirstM,
    /// The `m` outcomes with the smallest `delta1 / sigma`, ties to the lower index.
    SmallestStandardized,
}

/// Indices of the `m` "working" outcomes under the given mode, in ascending order.
pub fn working_outcomes(
    required: usize,
    delta1: &[f64],
    sigma: &[f64],
    mode: LfcMode,
) -> Vec<usize> {
    let mut chosen: Vec<usize> = match mode {
        LfcMode::FirstM => (0..required).collect(),
        LfcMode::SmallestStandardized => {
            let mut order: Vec<usize> = (0..delta1.len()).collect();
            // sort_by is stable, so equal standardized effects keep index order
            order.sort_by(|&a, &b| {
                (delta1[a] / sigma[a]).total_cmp(&(delta1[b] / sigma[b]))
            });
            order.truncate(required);
            order
        }
    };
    chosen.sort_unstable();
    chosen
}

/// Least favourable configuration: exactly `m` outcomes at `delta1`, the rest at `delta0`.
pub fn lfc_effects(spec: &GsDesignSpec, sigma: &[f64], mode: LfcMode) -> Vec<f64> {
    lfc_from_parts(spec.required, &spec.delta0, &spec.delta1, sigma, mode)
}

pub(crate) fn lfc_from_parts(
    required: usize,
    delta0: &[f64],
    delta1: &[f64],
    sigma: &[f64],
    mode: LfcMode,
) -> Vec<f64> {
    let mut effects = delta0.to_vec();
    for k in working_outcomes(required, delta1, sigma, mode) {
        effects[k] = delta1[k];
    }
    effects
}
