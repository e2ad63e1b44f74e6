//! Seedable generation of correlated standardized test statistics.
//!
//! Rows are produced in chunks of `chunk_size`. Chunk `c` draws from its own
//! ChaCha8 stream `(seed, c)`, which makes a block a pure function of
//! `(seed, nsims, chunk_size)` whatever the number of worker threads.

use std::io::{self, Read, Write};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

use crate::error::{DesignError, Result};
use crate::matrix::Matrix;
use crate::model::{assemble_covariance, OutcomeModel, StageSchedule};
use crate::par;

/// Diagonal jitter applied once when a covariance is PSD only up to rounding.
pub const CHOLESKY_JITTER: f64 = 1e-10;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct SimConfig {
    pub seed: u64,
    pub nsims: usize,
    pub chunk_size: usize,
}

impl Default for SimConfig {
    fn default() -> Self {
        SimConfig {
            seed: 1,
            nsims: 100_000,
            chunk_size: 4096,
        }
    }
}

impl SimConfig {
    pub fn new(seed: u64, nsims: usize) -> Self {
        SimConfig {
            seed,
            nsims,
            ..SimConfig::default()
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.nsims == 0 {
            return Err(DesignError::invalid("nsims", "at least one replicate is required"));
        }
        if self.chunk_size == 0 {
            return Err(DesignError::invalid("chunk_size", "must be at least 1"));
        }
        Ok(())
    }
}

/// `nsims x (J K)` matrix of test statistics, row-major, stage-major columns.
#[derive(Debug, Clone, PartialEq)]
pub struct StatisticBlock {
    stages: usize,
    outcomes: usize,
    seed: u64,
    values: Vec<f64>,
}

impl StatisticBlock {
    pub fn from_values(stages: usize, outcomes: usize, seed: u64, values: Vec<f64>) -> Result<Self> {
        let cols = stages * outcomes;
        if cols == 0 || values.len() % cols != 0 {
            return Err(DesignError::DimensionMismatch {
                what: "block values",
                expected: cols,
                actual: values.len(),
            });
        }
        if values.iter().any(|v| !v.is_finite()) {
            return Err(DesignError::invalid("block", "statistics must be finite"));
        }
        Ok(StatisticBlock {
            stages,
            outcomes,
            seed,
            values,
        })
    }

    pub fn stages(&self) -> usize {
        self.stages
    }

    pub fn outcomes(&self) -> usize {
        self.outcomes
    }

    pub fn cols(&self) -> usize {
        self.stages * self.outcomes
    }

    pub fn nsims(&self) -> usize {
        self.values.len() / self.cols()
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn row(&self, i: usize) -> &[f64] {
        let c = self.cols();
        &self.values[i * c..(i + 1) * c]
    }

    pub fn rows(&self) -> std::slice::ChunksExact<'_, f64> {
        self.values.chunks_exact(self.cols())
    }

    /// Sample mean of one column.
    pub fn column_mean(&self, col: usize) -> f64 {
        self.rows().map(|r| r[col]).sum::<f64>() / self.nsims() as f64
    }

    /// Sample covariance matrix of all columns (divisor `nsims`).
    pub fn empirical_covariance(&self) -> Matrix {
        let cols = self.cols();
        let n = self.nsims() as f64;
        let means: Vec<f64> = (0..cols).map(|c| self.column_mean(c)).collect();
        let mut cov = Matrix::zeros(cols);
        for row in self.rows() {
            for a in 0..cols {
                let da = row[a] - means[a];
                for b in a..cols {
                    cov[(a, b)] += da * (row[b] - means[b]);
                }
            }
        }
        for a in 0..cols {
            for b in a..cols {
                let v = cov[(a, b)] / n;
                cov[(a, b)] = v;
                cov[(b, a)] = v;
            }
        }
        cov
    }

    /// Writes the block as a little-endian header `(seed, nsims, J, K)` of
    /// `u64`s followed by the row-major `f64` values.
    pub fn write_to<W: Write>(&self, mut w: W) -> io::Result<()> {
        for h in [
            self.seed,
            self.nsims() as u64,
            self.stages as u64,
            self.outcomes as u64,
        ] {
            w.write_all(&h.to_le_bytes())?;
        }
        for v in &self.values {
            w.write_all(&v.to_le_bytes())?;
        }
        Ok(())
    }

    pub fn read_from<R: Read>(mut r: R) -> io::Result<Self> {
        let mut word = [0u8; 8];
        let mut header = [0u64; 4];
        for h in header.iter_mut() {
            r.read_exact(&mut word)?;
            *h = u64::from_le_bytes(word);
        }
        let [seed, nsims, stages, outcomes] = header;
        let len = (nsims * stages * outcomes) as usize;
        let mut values = Vec::with_capacity(len);
        for _ in 0..len {
            r.read_exact(&mut word)?;
            values.push(f64::from_le_bytes(word));
        }
        StatisticBlock::from_values(stages as usize, outcomes as usize, seed, values)
            .map_err(|e| io::Error::new(io::ErrorKind::InvalidData, e.to_string()))
    }
}

/// Lower-triangular `L` with `L L^T = cov`.
///
/// A matrix that is singular or slightly indefinite from rounding gets
/// [`CHOLESKY_JITTER`] added to its diagonal once; anything still failing is
/// rejected.
pub fn cholesky_factor(cov: &Matrix) -> Result<Matrix> {
    match cholesky_plain(cov, 0.0) {
        Ok(l) => Ok(l),
        Err(_) => cholesky_plain(cov, CHOLESKY_JITTER),
    }
}

fn cholesky_plain(cov: &Matrix, jitter: f64) -> Result<Matrix> {
    let n = cov.dim();
    let mut l = Matrix::zeros(n);
    for j in 0..n {
        let mut d = cov[(j, j)] + jitter;
        for p in 0..j {
            d -= l[(j, p)] * l[(j, p)];
        }
        if !(d > 0.0) {
            return Err(DesignError::NotPositiveSemidefinite { pivot: j, value: d });
        }
        let djj = d.sqrt();
        l[(j, j)] = djj;
        for i in (j + 1)..n {
            let mut s = cov[(i, j)];
            for p in 0..j {
                s -= l[(i, p)] * l[(j, p)];
            }
            l[(i, j)] = s / djj;
        }
    }
    Ok(l)
}

/// Draws `nsims` rows from `MVN(0, assemble_covariance(schedule, model))`.
pub fn simulate_null_block(
    schedule: &StageSchedule,
    model: &OutcomeModel,
    cfg: &SimConfig,
) -> Result<StatisticBlock> {
    cfg.validate()?;
    let cov = assemble_covariance(schedule, model);
    let chol = cholesky_factor(&cov)?;
    let dim = cov.dim();
    let mut values = vec![0.0; cfg.nsims * dim];
    par::fill_chunks(&mut values, cfg.chunk_size * dim, |chunk, out| {
        let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
        rng.set_stream(chunk as u64);
        let mut u = vec![0.0; dim];
        for row in out.chunks_exact_mut(dim) {
            for x in u.iter_mut() {
                *x = rng.sample(StandardNormal);
            }
            for (i, z) in row.iter_mut().enumerate() {
                let li = chol.row(i);
                *z = li[..=i].iter().zip(&u).map(|(a, b)| a * b).sum();
            }
        }
    });
    Ok(StatisticBlock {
        stages: schedule.stages(),
        outcomes: model.outcomes(),
        seed: cfg.seed,
        values,
    })
}

/// Mean of each statistic under true effects `mu`: `mu_k sqrt(N_j) / sigma_k`.
pub fn mean_shift(mu: &[f64], schedule: &StageSchedule, sigma: &[f64]) -> Vec<f64> {
    schedule
        .cumulative()
        .iter()
        .flat_map(|n| mu.iter().zip(sigma).map(move |(m, s)| m * n.sqrt() / s))
        .collect()
}

/// Adds the mean structure for effects `mu` to a null block.
pub fn apply_mean_shift(
    block: &StatisticBlock,
    mu: &[f64],
    schedule: &StageSchedule,
    model: &OutcomeModel,
) -> Result<StatisticBlock> {
    check_dims(block, mu.len(), schedule.stages())?;
    if model.outcomes() != mu.len() {
        return Err(DesignError::DimensionMismatch {
            what: "model outcomes",
            expected: mu.len(),
            actual: model.outcomes(),
        });
    }
    let shift = mean_shift(mu, schedule, model.sigma());
    let mut out = block.clone();
    for row in out.values.chunks_exact_mut(shift.len()) {
        for (z, s) in row.iter_mut().zip(&shift) {
            *z += s;
        }
    }
    Ok(out)
}

pub(crate) fn check_dims(block: &StatisticBlock, outcomes: usize, stages: usize) -> Result<()> {
    if block.outcomes() != outcomes {
        return Err(DesignError::DimensionMismatch {
            what: "block outcomes",
            expected: outcomes,
            actual: block.outcomes(),
        });
    }
    if block.stages() != stages {
        return Err(DesignError::DimensionMismatch {
            what: "block stages",
            expected: stages,
            actual: block.stages(),
        });
    }
    Ok(())
}
