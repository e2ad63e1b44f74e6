//! Two-stage drop-the-loser design driven by conditional power.
//!
//! At the interim every outcome gets a conditional power `CP_k`, the chance
//! its final statistic clears the shared boundary `r` if its effect equals
//! `delta1_k`. The trial stops for no-go when `K - m + 1` outcomes have
//! `CP_k < CP_L`, for go when `m` outcomes have `CP_k > CP_U`, and otherwise
//! carries at most `K_max` of the outcomes with the highest CP into stage 2.

use std::collections::BTreeMap;

use crate::error::{DesignError, Result};
use crate::model::{lfc_from_parts, validate_effects, validate_error_rates, LfcMode, OutcomeModel, StageSchedule};
use crate::normal;
use crate::optimize::{calibrate_to_rate, CalibrationOptions};
use crate::par;
use crate::sim::{check_dims, mean_shift, simulate_null_block, SimConfig, StatisticBlock};

const EVAL_CHUNK_ROWS: usize = 4096;

#[derive(Debug, Clone, PartialEq)]
pub struct DtlDesignSpec {
    pub outcomes: usize,
    pub required: usize,
    /// Maximum number of outcomes carried into stage 2.
    pub max_retained: usize,
    pub cp_lower: f64,
    pub cp_upper: f64,
    pub alpha: f64,
    pub beta: f64,
    pub delta0: Vec<f64>,
    pub delta1: Vec<f64>,
}

impl DtlDesignSpec {
    pub const STAGES: usize = 2;

    pub fn validate(&self) -> Result<()> {
        if self.outcomes < 2 {
            return Err(DesignError::invalid("K", "dropping outcomes needs at least two"));
        }
        if self.required == 0 || self.required > self.outcomes {
            return Err(DesignError::invalid(
                "m",
                format!("must satisfy 1 <= m <= K = {}, got {}", self.outcomes, self.required),
            ));
        }
        if self.max_retained == 0 || self.max_retained >= self.outcomes {
            return Err(DesignError::invalid(
                "K_max",
                format!("must satisfy 1 <= K_max < K = {}, got {}", self.outcomes, self.max_retained),
            ));
        }
        validate_thresholds(self.cp_lower, self.cp_upper)?;
        validate_error_rates(self.alpha, self.beta)?;
        validate_effects(self.outcomes, &self.delta0, &self.delta1)
    }
}

fn validate_thresholds(cp_lower: f64, cp_upper: f64) -> Result<()> {
    if !(0.0..=1.0).contains(&cp_lower) {
        return Err(DesignError::invalid("CP_L", format!("must lie in [0, 1], got {cp_lower}")));
    }
    if !(0.0..=1.0).contains(&cp_upper) {
        return Err(DesignError::invalid("CP_U", format!("must lie in [0, 1], got {cp_upper}")));
    }
    if cp_lower >= cp_upper {
        return Err(DesignError::invalid(
            "CP_U",
            format!("must exceed CP_L = {cp_lower}, got {cp_upper}"),
        ));
    }
    Ok(())
}

fn check_information(i1: f64, i2: f64) -> Result<()> {
    if !(i1 > 0.0 && i2 > i1) {
        return Err(DesignError::invalid(
            "information",
            format!("need 0 < I1 < I2, got I1 = {i1}, I2 = {i2}"),
        ));
    }
    Ok(())
}

/// Probability that the final statistic exceeds `r` given interim statistic `z`
/// and an effect of `delta1`.
pub fn conditional_power(z: f64, r: f64, i1: f64, i2: f64, delta1: f64) -> Result<f64> {
    check_information(i1, i2)?;
    Ok(normal::cdf(cp_argument(z, r, i1, i2, delta1)))
}

#[inline]
fn cp_argument(z: f64, r: f64, i1: f64, i2: f64, delta1: f64) -> f64 {
    (z * i1.sqrt() - r * i2.sqrt() + (i2 - i1) * delta1) / (i2 - i1).sqrt()
}

/// Interim statistic at which the conditional power equals `cp`; infinite at 0 and 1.
pub fn cp_boundary(cp: f64, r: f64, i1: f64, i2: f64, delta1: f64) -> f64 {
    let q = normal::quantile(cp);
    if q.is_infinite() {
        return q;
    }
    ((i2 - i1).sqrt() * q + r * i2.sqrt() - (i2 - i1) * delta1) / i1.sqrt()
}

/// Interim futility (`lower`) and efficacy (`upper`) boundaries on the statistic scale.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CpBoundaries {
    pub lower: f64,
    pub upper: f64,
}

/// Converts the CP thresholds into boundaries for one outcome's interim
/// statistic. A threshold of 0 (or 1) gives an infinite boundary, i.e. that
/// kind of early stop is disabled.
pub fn invert_cp_boundaries(
    cp_lower: f64,
    cp_upper: f64,
    r: f64,
    i1: f64,
    i2: f64,
    delta1: f64,
) -> Result<CpBoundaries> {
    validate_thresholds(cp_lower, cp_upper)?;
    check_information(i1, i2)?;
    Ok(CpBoundaries {
        lower: cp_boundary(cp_lower, r, i1, i2, delta1),
        upper: cp_boundary(cp_upper, r, i1, i2, delta1),
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum DtlDecision {
    GoInterim,
    NoGoInterim,
    GoFinal,
    NoGoFinal,
}

impl DtlDecision {
    pub fn is_go(self) -> bool {
        matches!(self, DtlDecision::GoInterim | DtlDecision::GoFinal)
    }

    pub fn stopped_early(self) -> bool {
        matches!(self, DtlDecision::GoInterim | DtlDecision::NoGoInterim)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct DtlRowOutcome {
    pub decision: DtlDecision,
    /// Outcomes measured in stage 2; 0 when the trial stopped at the interim.
    pub retained: usize,
}

/// Shared interim/final logic. `score(k)` is any strictly increasing transform
/// of `CP_k`; `lower`/`upper` are the thresholds on the same scale.
#[inline]
fn decide<S, F>(
    score: S,
    final_stat: F,
    outcomes: usize,
    required: usize,
    max_retained: usize,
    lower: f64,
    upper: f64,
    r: f64,
    order: &mut Vec<(f64, usize)>,
) -> DtlRowOutcome
where
    S: Fn(usize) -> f64,
    F: Fn(usize) -> f64,
{
    order.clear();
    let mut dropped = 0;
    let mut promising = 0;
    for k in 0..outcomes {
        let s = score(k);
        if s < lower {
            dropped += 1;
        }
        if s > upper {
            promising += 1;
        }
        if s > lower {
            order.push((s, k));
        }
    }
    if dropped >= outcomes - required + 1 {
        return DtlRowOutcome {
            decision: DtlDecision::NoGoInterim,
            retained: 0,
        };
    }
    if promising >= required {
        return DtlRowOutcome {
            decision: DtlDecision::GoInterim,
            retained: 0,
        };
    }
    let retained = max_retained.min(order.len());
    // highest score first, lower index on ties
    order.sort_by(|a, b| b.0.total_cmp(&a.0).then(a.1.cmp(&b.1)));
    let above = order[..retained]
        .iter()
        .filter(|&&(_, k)| final_stat(k) > r)
        .count();
    DtlRowOutcome {
        decision: if above >= required {
            DtlDecision::GoFinal
        } else {
            DtlDecision::NoGoFinal
        },
        retained,
    }
}

/// Decision for one simulated trial given its stage-1 and stage-2 statistics.
///
/// `i1`/`i2` hold the per-outcome information at the interim and final analyses.
pub fn evaluate_dtl_row(
    stage1: &[f64],
    stage2: &[f64],
    spec: &DtlDesignSpec,
    r: f64,
    i1: &[f64],
    i2: &[f64],
) -> Result<DtlRowOutcome> {
    let k = spec.outcomes;
    for (what, len) in [("stage1", stage1.len()), ("stage2", stage2.len()), ("I1", i1.len()), ("I2", i2.len())] {
        if len != k {
            return Err(DesignError::DimensionMismatch {
                what,
                expected: k,
                actual: len,
            });
        }
    }
    let cps = (0..k)
        .map(|j| conditional_power(stage1[j], r, i1[j], i2[j], spec.delta1[j]))
        .collect::<Result<Vec<f64>>>()?;
    let mut order = Vec::with_capacity(k);
    Ok(decide(
        |j| cps[j],
        |j| stage2[j],
        k,
        spec.required,
        spec.max_retained,
        spec.cp_lower,
        spec.cp_upper,
        r,
        &mut order,
    ))
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DtlOperatingCharacteristics {
    pub p_reject: f64,
    /// Probability of stopping at the interim.
    pub pet: f64,
    pub ess: f64,
    pub enm: f64,
    /// Mean number of outcomes measured in stage 2 (0 for stopped trials).
    pub expected_retained: f64,
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
struct DtlTally {
    go_interim: u64,
    nogo_interim: u64,
    go_final: u64,
    retained: u64,
}

impl DtlTally {
    fn add(self, o: DtlTally) -> DtlTally {
        DtlTally {
            go_interim: self.go_interim + o.go_interim,
            nogo_interim: self.nogo_interim + o.nogo_interim,
            go_final: self.go_final + o.go_final,
            retained: self.retained + o.retained,
        }
    }
}

/// Per-outcome affine map from interim statistic to CP argument, for fixed `r` and `n`.
struct CpScale {
    slope: Vec<f64>,
    offset: Vec<f64>,
    lower: f64,
    upper: f64,
}

impl CpScale {
    fn new(spec: &DtlDesignSpec, sigma: &[f64], r: f64, per_stage: usize) -> CpScale {
        let n = per_stage as f64;
        let mut slope = Vec::with_capacity(sigma.len());
        let mut offset = Vec::with_capacity(sigma.len());
        for (s, d) in sigma.iter().zip(&spec.delta1) {
            let i1 = n / (s * s);
            let i2 = 2.0 * i1;
            let denom = (i2 - i1).sqrt();
            slope.push(i1.sqrt() / denom);
            offset.push((-r * i2.sqrt() + (i2 - i1) * d) / denom);
        }
        CpScale {
            slope,
            offset,
            lower: normal::quantile(spec.cp_lower),
            upper: normal::quantile(spec.cp_upper),
        }
    }
}

fn tally_dtl(block: &StatisticBlock, shift: &[f64], spec: &DtlDesignSpec, sigma: &[f64], r: f64, per_stage: usize) -> DtlTally {
    let k = spec.outcomes;
    let cols = 2 * k;
    let scale = CpScale::new(spec, sigma, r, per_stage);
    let shift_or_zero = |c: usize| if shift.is_empty() { 0.0 } else { shift[c] };
    let parts = par::map_chunks(block.values(), EVAL_CHUNK_ROWS * cols, |chunk| {
        let mut t = DtlTally::default();
        let mut order = Vec::with_capacity(k);
        for row in chunk.chunks_exact(cols) {
            let out = decide(
                |j| (row[j] + shift_or_zero(j)) * scale.slope[j] + scale.offset[j],
                |j| row[k + j] + shift_or_zero(k + j),
                k,
                spec.required,
                spec.max_retained,
                scale.lower,
                scale.upper,
                r,
                &mut order,
            );
            match out.decision {
                DtlDecision::GoInterim => t.go_interim += 1,
                DtlDecision::NoGoInterim => t.nogo_interim += 1,
                DtlDecision::GoFinal => t.go_final += 1,
                DtlDecision::NoGoFinal => {}
            }
            t.retained += out.retained as u64;
        }
        t
    });
    parts.into_iter().fold(DtlTally::default(), DtlTally::add)
}

fn oc_from_tally(t: DtlTally, nsims: usize, outcomes: usize, per_stage: usize) -> DtlOperatingCharacteristics {
    let ns = nsims as f64;
    let n = per_stage as f64;
    let pet = (t.go_interim + t.nogo_interim) as f64 / ns;
    let expected_retained = t.retained as f64 / ns;
    DtlOperatingCharacteristics {
        p_reject: (t.go_interim + t.go_final) as f64 / ns,
        pet,
        ess: pet * n + (1.0 - pet) * 2.0 * n,
        enm: n * (outcomes as f64 + expected_retained),
        expected_retained,
    }
}

fn check_dtl_inputs(block: &StatisticBlock, spec: &DtlDesignSpec, sigma: &[f64]) -> Result<()> {
    check_dims(block, spec.outcomes, DtlDesignSpec::STAGES)?;
    if sigma.len() != spec.outcomes {
        return Err(DesignError::DimensionMismatch {
            what: "sigma",
            expected: spec.outcomes,
            actual: sigma.len(),
        });
    }
    if spec.delta1.len() != spec.outcomes {
        return Err(DesignError::DimensionMismatch {
            what: "delta1",
            expected: spec.outcomes,
            actual: spec.delta1.len(),
        });
    }
    Ok(())
}

/// Operating characteristics of the design with boundary `r` and per-stage
/// size `n` on a two-stage block (already shifted for the effects of interest).
pub fn estimate_dtl_oc(
    block: &StatisticBlock,
    spec: &DtlDesignSpec,
    sigma: &[f64],
    r: f64,
    per_stage: usize,
) -> Result<DtlOperatingCharacteristics> {
    check_dtl_inputs(block, spec, sigma)?;
    if per_stage == 0 {
        return Err(DesignError::invalid("n", "per-stage sample size must be positive"));
    }
    let t = tally_dtl(block, &[], spec, sigma, r, per_stage);
    Ok(oc_from_tally(t, block.nsims(), spec.outcomes, per_stage))
}

pub(crate) fn dtl_oc_shifted(
    block: &StatisticBlock,
    shift: &[f64],
    spec: &DtlDesignSpec,
    sigma: &[f64],
    r: f64,
    per_stage: usize,
) -> DtlOperatingCharacteristics {
    let t = tally_dtl(block, shift, spec, sigma, r, per_stage);
    oc_from_tally(t, block.nsims(), spec.outcomes, per_stage)
}

/// Calibrates the final boundary `r` for a fixed per-stage size on a null
/// block. Unlike the group-sequential constant, the result depends on `n`.
pub fn calibrate_r(
    null_block: &StatisticBlock,
    spec: &DtlDesignSpec,
    sigma: &[f64],
    per_stage: usize,
    opts: &CalibrationOptions,
) -> Result<(f64, f64)> {
    check_dtl_inputs(null_block, spec, sigma)?;
    if per_stage == 0 {
        return Err(DesignError::invalid("n", "per-stage sample size must be positive"));
    }
    let nsims = null_block.nsims() as f64;
    let rate = |r: f64| {
        let t = tally_dtl(null_block, &[], spec, sigma, r, per_stage);
        (t.go_interim + t.go_final) as f64 / nsims
    };
    calibrate_to_rate(rate, spec.alpha, opts)
}

#[derive(Debug, Clone, PartialEq)]
pub struct DtlSearchOptions {
    pub nmin: usize,
    pub nmax: usize,
    pub lfc_mode: LfcMode,
    pub calibration: CalibrationOptions,
}

impl Default for DtlSearchOptions {
    fn default() -> Self {
        DtlSearchOptions {
            nmin: 1,
            nmax: 1000,
            lfc_mode: LfcMode::FirstM,
            calibration: CalibrationOptions::default(),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct DtlRealisation {
    pub spec: DtlDesignSpec,
    pub model: OutcomeModel,
    pub sim: SimConfig,
    pub r: f64,
    pub per_stage: usize,
    pub delta_beta: Vec<f64>,
    pub alpha_star: f64,
    pub power_star: f64,
    pub null_oc: DtlOperatingCharacteristics,
    pub lfc_oc: DtlOperatingCharacteristics,
    /// Diagnostics from the search, e.g. power that is not monotone in `n`.
    pub warnings: Vec<String>,
}

impl DtlRealisation {
    /// Maximum sample size `N = 2 n`.
    pub fn max_sample_size(&self) -> usize {
        2 * self.per_stage
    }

    pub fn information(&self) -> (Vec<f64>, Vec<f64>) {
        let n = self.per_stage as f64;
        let i1: Vec<f64> = self.model.sigma().iter().map(|s| n / (s * s)).collect();
        let i2 = i1.iter().map(|i| 2.0 * i).collect();
        (i1, i2)
    }

    /// Interim boundaries for every outcome.
    pub fn interim_boundaries(&self) -> Vec<CpBoundaries> {
        let (i1, i2) = self.information();
        (0..self.spec.outcomes)
            .map(|k| CpBoundaries {
                lower: cp_boundary(self.spec.cp_lower, self.r, i1[k], i2[k], self.spec.delta1[k]),
                upper: cp_boundary(self.spec.cp_upper, self.r, i1[k], i2[k], self.spec.delta1[k]),
            })
            .collect()
    }
}

/// One entry of the interim lookup table.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CpLookupRow {
    /// Zero-based outcome index.
    pub outcome: usize,
    pub z: f64,
    pub cp: f64,
}

/// Conditional power of every outcome at each interim statistic in `z_grid`.
pub fn cp_lookup_table(design: &DtlRealisation, z_grid: &[f64]) -> Vec<CpLookupRow> {
    let (i1, i2) = design.information();
    (0..design.spec.outcomes)
        .flat_map(|k| {
            let (a, b, d) = (i1[k], i2[k], design.spec.delta1[k]);
            z_grid.iter().map(move |&z| CpLookupRow {
                outcome: k,
                z,
                cp: normal::cdf(cp_argument(z, design.r, a, b, d)),
            })
        })
        .collect()
}

pub(crate) fn dtl_null_block(model: &OutcomeModel, cfg: &SimConfig) -> Result<StatisticBlock> {
    let schedule = StageSchedule::equal(1, DtlDesignSpec::STAGES)?;
    simulate_null_block(&schedule, model, cfg)
}

pub(crate) fn dtl_shift(mu: &[f64], sigma: &[f64], per_stage: usize) -> Vec<f64> {
    let schedule = StageSchedule::equal(per_stage, DtlDesignSpec::STAGES).expect("n >= 1");
    mean_shift(mu, &schedule, sigma)
}

struct Probe {
    r: f64,
    alpha_star: f64,
    power: f64,
}

/// Operating characteristics of a drop-the-loser design with given `n` and `r`.
pub fn realise_dtl_design(
    spec: &DtlDesignSpec,
    model: &OutcomeModel,
    cfg: &SimConfig,
    per_stage: usize,
    r: f64,
    lfc_mode: LfcMode,
) -> Result<DtlRealisation> {
    spec.validate()?;
    if model.outcomes() != spec.outcomes {
        return Err(DesignError::DimensionMismatch {
            what: "model outcomes",
            expected: spec.outcomes,
            actual: model.outcomes(),
        });
    }
    if per_stage == 0 {
        return Err(DesignError::invalid("n", "per-stage sample size must be positive"));
    }
    if !r.is_finite() {
        return Err(DesignError::invalid("r", format!("must be finite, got {r}")));
    }
    let sigma = model.sigma();
    let block = dtl_null_block(model, cfg)?;
    let delta_beta = lfc_from_parts(spec.required, &spec.delta0, &spec.delta1, sigma, lfc_mode);
    let null_oc = dtl_oc_shifted(&block, &[], spec, sigma, r, per_stage);
    let lfc_oc = dtl_oc_shifted(&block, &dtl_shift(&delta_beta, sigma, per_stage), spec, sigma, r, per_stage);
    Ok(DtlRealisation {
        spec: spec.clone(),
        model: model.clone(),
        sim: *cfg,
        r,
        per_stage,
        delta_beta,
        alpha_star: null_oc.p_reject,
        power_star: lfc_oc.p_reject,
        null_oc,
        lfc_oc,
        warnings: Vec::new(),
    })
}

/// Bisection over the per-stage sample size, recalibrating `r` at every probe.
pub fn search_dtl_design(
    spec: &DtlDesignSpec,
    model: &OutcomeModel,
    cfg: &SimConfig,
    opts: &DtlSearchOptions,
) -> Result<DtlRealisation> {
    spec.validate()?;
    if model.outcomes() != spec.outcomes {
        return Err(DesignError::DimensionMismatch {
            what: "model outcomes",
            expected: spec.outcomes,
            actual: model.outcomes(),
        });
    }
    if opts.nmin == 0 || opts.nmin >= opts.nmax {
        return Err(DesignError::invalid(
            "nmax",
            format!("need 1 <= nmin < nmax, got nmin = {}, nmax = {}", opts.nmin, opts.nmax),
        ));
    }
    let sigma = model.sigma();
    let block = dtl_null_block(model, cfg)?;
    let delta_beta = lfc_from_parts(spec.required, &spec.delta0, &spec.delta1, sigma, opts.lfc_mode);
    let target = 1.0 - spec.beta;

    let mut probes: BTreeMap<usize, Probe> = BTreeMap::new();
    let mut probe = |n: usize| -> Result<f64> {
        if let Some(p) = probes.get(&n) {
            return Ok(p.power);
        }
        let (r, alpha_star) = calibrate_r(&block, spec, sigma, n, &opts.calibration)?;
        let shift = dtl_shift(&delta_beta, sigma, n);
        let power = dtl_oc_shifted(&block, &shift, spec, sigma, r, n).p_reject;
        probes.insert(n, Probe { r, alpha_star, power });
        Ok(power)
    };

    let top = probe(opts.nmax)?;
    if top < target {
        return Err(DesignError::NoFeasibleDesign {
            n: opts.nmax,
            power: top,
            target,
        });
    }
    let chosen = if probe(opts.nmin)? >= target {
        opts.nmin
    } else {
        let (mut a, mut b) = (opts.nmin, opts.nmax);
        while b - a > 1 {
            let d = a + (b - a).div_ceil(2);
            if probe(d)? < target {
                a = d;
            } else {
                b = d;
            }
        }
        b
    };

    let mut warnings = Vec::new();
    if chosen < opts.nmax {
        let next = probe(chosen + 1)?;
        if next < target {
            let below = chosen
                .checked_sub(1)
                .and_then(|a| probes.get(&a))
                .map(|p| p.power);
            warnings.push(format!(
                "power is not monotone in n near the selected design: power(n={}) = {:?}, \
                 power(n={chosen}) = {:.4}, power(n={}) = {next:.4}",
                chosen.saturating_sub(1),
                below,
                probes[&chosen].power,
                chosen + 1
            ));
        }
    }

    let p = &probes[&chosen];
    let null_oc = dtl_oc_shifted(&block, &[], spec, sigma, p.r, chosen);
    let shift = dtl_shift(&delta_beta, sigma, chosen);
    let lfc_oc = dtl_oc_shifted(&block, &shift, spec, sigma, p.r, chosen);
    Ok(DtlRealisation {
        spec: spec.clone(),
        model: model.clone(),
        sim: *cfg,
        r: p.r,
        per_stage: chosen,
        delta_beta,
        alpha_star: p.alpha_star,
        power_star: lfc_oc.p_reject,
        null_oc,
        lfc_oc,
        warnings,
    })
}
