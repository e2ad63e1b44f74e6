//! Simultaneous-stopping group-sequential designs and the composite comparator.
//!
//! A trial stops for a go decision at the first stage where at least `m`
//! outcome statistics exceed `e_j`, and for a no-go decision where at least
//! `K - m + 1` fall below `f_j`. Because `f_J = e_J` every trial is decided by
//! the last stage.

use crate::error::{DesignError, Result};
use crate::model::{
    boundaries_unchecked, lfc_effects, Boundaries, GsDesignSpec, LfcMode, OutcomeModel,
    StageSchedule,
};
use crate::optimize::{calibrate_to_rate, CalibrationOptions};
use crate::par;
use crate::sim::{check_dims, mean_shift, simulate_null_block, SimConfig, StatisticBlock};

/// Rows evaluated per parallel work unit.
const EVAL_CHUNK_ROWS: usize = 4096;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Decision {
    Go,
    NoGo,
}

/// Outcome of one simulated trial: the decision and the (1-based) stage it was taken at.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct TrialPath {
    pub decision: Decision,
    pub stop_stage: usize,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GsOperatingCharacteristics {
    pub p_reject: f64,
    pub expected_stages: f64,
    /// Probability of stopping before the final stage.
    pub pet: f64,
    /// Expected sample size, `n * expected_stages`.
    pub ess: f64,
    /// Expected number of outcome measurements, `K * ess`.
    pub enm: f64,
}

/// The counting rule applied to each row: `m` of `K` statistics per stage.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub(crate) struct Rule {
    pub required: usize,
    pub outcomes: usize,
}

impl Rule {
    pub(crate) fn for_spec(spec: &GsDesignSpec) -> Rule {
        if spec.composite {
            Rule {
                required: 1,
                outcomes: 1,
            }
        } else {
            Rule {
                required: spec.required,
                outcomes: spec.outcomes,
            }
        }
    }
}

#[inline]
pub(crate) fn evaluate_path<V: Fn(usize) -> f64>(
    value: V,
    boundaries: &Boundaries,
    rule: Rule,
) -> TrialPath {
    let k = rule.outcomes;
    let stages = boundaries.stages();
    let needed_below = k - rule.required + 1;
    for j in 0..stages {
        let (f, e) = (boundaries.lower[j], boundaries.upper[j]);
        let mut above = 0;
        let mut below = 0;
        for c in j * k..(j + 1) * k {
            let z = value(c);
            if z > e {
                above += 1;
            } else if z < f {
                below += 1;
            }
        }
        if above >= rule.required {
            return TrialPath {
                decision: Decision::Go,
                stop_stage: j + 1,
            };
        }
        if below >= needed_below {
            return TrialPath {
                decision: Decision::NoGo,
                stop_stage: j + 1,
            };
        }
    }
    // Only reachable through NaN statistics or hand-built boundaries with f_J != e_J.
    TrialPath {
        decision: Decision::NoGo,
        stop_stage: stages,
    }
}

/// Decision for one row of `J K` statistics (stage-major).
pub fn evaluate_gs_row(
    row: &[f64],
    boundaries: &Boundaries,
    required: usize,
    outcomes: usize,
) -> TrialPath {
    evaluate_path(
        |c| row[c],
        boundaries,
        Rule {
            required,
            outcomes,
        },
    )
}

/// Go count, summed stopping stage and early-stop count over a block, with an
/// optional per-column shift.
pub(crate) fn tally(block: &StatisticBlock, shift: &[f64], boundaries: &Boundaries, rule: Rule) -> (u64, u64, u64) {
    let last = boundaries.stages();
    let cols = block.cols();
    debug_assert!(shift.is_empty() || shift.len() == cols);
    let parts = par::map_chunks(block.values(), EVAL_CHUNK_ROWS * cols, |chunk| {
        let mut go = 0u64;
        let mut stages = 0u64;
        let mut early = 0u64;
        for row in chunk.chunks_exact(cols) {
            let path = if shift.is_empty() {
                evaluate_path(|c| row[c], boundaries, rule)
            } else {
                evaluate_path(|c| row[c] + shift[c], boundaries, rule)
            };
            go += (path.decision == Decision::Go) as u64;
            stages += path.stop_stage as u64;
            early += (path.stop_stage < last) as u64;
        }
        (go, stages, early)
    });
    parts
        .into_iter()
        .fold((0, 0, 0), |(g, s, e), (pg, ps, pe)| (g + pg, s + ps, e + pe))
}

pub(crate) fn oc_from_tally(
    tally: (u64, u64, u64),
    nsims: usize,
    per_stage: usize,
    measured_outcomes: usize,
) -> GsOperatingCharacteristics {
    let p_reject = tally.0 as f64 / nsims as f64;
    let expected_stages = tally.1 as f64 / nsims as f64;
    let ess = per_stage as f64 * expected_stages;
    GsOperatingCharacteristics {
        p_reject,
        expected_stages,
        pet: tally.2 as f64 / nsims as f64,
        ess,
        enm: measured_outcomes as f64 * ess,
    }
}

fn expected_block_outcomes(spec: &GsDesignSpec) -> usize {
    if spec.composite {
        1
    } else {
        spec.outcomes
    }
}

/// Operating characteristics of a design on a block of statistics.
///
/// For a composite spec the block must already be the output of
/// [`composite_transform`]. `per_stage` is the per-stage sample size `n`.
pub fn estimate_gs_oc(
    block: &StatisticBlock,
    boundaries: &Boundaries,
    spec: &GsDesignSpec,
    per_stage: usize,
) -> Result<GsOperatingCharacteristics> {
    check_dims(block, expected_block_outcomes(spec), boundaries.stages())?;
    let t = tally(block, &[], boundaries, Rule::for_spec(spec));
    Ok(oc_from_tally(t, block.nsims(), per_stage, spec.outcomes))
}

/// Calibrates the Wang–Tsiatis constant so that the rejection rate on a
/// null block matches `spec.alpha`. Returns `(C, alpha_star)`.
pub fn calibrate_c(
    null_block: &StatisticBlock,
    spec: &GsDesignSpec,
    opts: &CalibrationOptions,
) -> Result<(f64, f64)> {
    check_dims(null_block, expected_block_outcomes(spec), spec.stages)?;
    let rule = Rule::for_spec(spec);
    let nsims = null_block.nsims() as f64;
    let rate = |c: f64| {
        let b = boundaries_unchecked(c, spec.stages, spec.shape);
        tally(null_block, &[], &b, rule).0 as f64 / nsims
    };
    calibrate_to_rate(rate, spec.alpha, opts)
}

/// Sums the outcome statistics within each stage, giving a block with one column per stage.
pub fn composite_transform(block: &StatisticBlock) -> StatisticBlock {
    let k = block.outcomes();
    let values: Vec<f64> = if k == 1 {
        block.values().to_vec()
    } else {
        block.values().chunks_exact(k).map(|s| s.iter().sum()).collect()
    };
    StatisticBlock::from_values(block.stages(), 1, block.seed(), values)
        .expect("finite input gives finite sums")
}

/// Per-stage sums of a shift vector, matching [`composite_transform`].
pub(crate) fn composite_shift(shift: &[f64], outcomes: usize) -> Vec<f64> {
    shift.chunks_exact(outcomes).map(|s| s.iter().sum()).collect()
}

#[derive(Debug, Clone, PartialEq)]
pub struct GsSearchOptions {
    /// First per-stage sample size tried.
    pub nmin: usize,
    /// Largest per-stage sample size tried before giving up.
    pub n_cap: usize,
    pub lfc_mode: LfcMode,
    pub calibration: CalibrationOptions,
}

impl Default for GsSearchOptions {
    fn default() -> Self {
        GsSearchOptions {
            nmin: 1,
            n_cap: 10_000,
            lfc_mode: LfcMode::FirstM,
            calibration: CalibrationOptions::default(),
        }
    }
}

/// A calibrated group-sequential or composite design.
#[derive(Debug, Clone, PartialEq)]
pub struct GsRealisation {
    pub spec: GsDesignSpec,
    pub model: OutcomeModel,
    pub sim: SimConfig,
    pub per_stage: usize,
    pub boundaries: Boundaries,
    pub delta_beta: Vec<f64>,
    pub alpha_star: f64,
    pub power_star: f64,
    pub null_oc: GsOperatingCharacteristics,
    pub lfc_oc: GsOperatingCharacteristics,
}

impl GsRealisation {
    pub fn constant(&self) -> f64 {
        self.boundaries.constant
    }

    /// Maximum sample size `N = J n`.
    pub fn max_sample_size(&self) -> usize {
        self.spec.stages * self.per_stage
    }

    /// Final go boundary `e_J = C J^(Delta - 0.5)`. This is also the constant
    /// when boundaries are written as `e_j = C' (j / J)^(Delta - 0.5)`.
    pub fn final_boundary(&self) -> f64 {
        self.boundaries.upper[self.spec.stages - 1]
    }
}

/// Operating characteristics of a given design, without searching.
///
/// `constant` is `C` in `e_j = C j^(Delta - 0.5)`.
pub fn realise_gs_design(
    spec: &GsDesignSpec,
    model: &OutcomeModel,
    cfg: &SimConfig,
    per_stage: usize,
    constant: f64,
    lfc_mode: LfcMode,
) -> Result<GsRealisation> {
    spec.validate()?;
    check_model(spec.outcomes, model)?;
    if per_stage == 0 {
        return Err(DesignError::invalid("n", "per-stage sample size must be positive"));
    }
    let boundaries = crate::model::wang_tsiatis_boundaries(constant, spec.stages, spec.shape)?;
    let block = working_null_block(spec, model, cfg)?;
    let rule = Rule::for_spec(spec);
    let delta_beta = lfc_effects(spec, model.sigma(), lfc_mode);
    let shift = working_shift(spec, model.sigma(), &delta_beta, per_stage);
    let nsims = block.nsims();
    let null_oc = oc_from_tally(tally(&block, &[], &boundaries, rule), nsims, per_stage, spec.outcomes);
    let lfc_oc = oc_from_tally(tally(&block, &shift, &boundaries, rule), nsims, per_stage, spec.outcomes);
    Ok(GsRealisation {
        spec: spec.clone(),
        model: model.clone(),
        sim: *cfg,
        per_stage,
        boundaries,
        delta_beta,
        alpha_star: null_oc.p_reject,
        power_star: lfc_oc.p_reject,
        null_oc,
        lfc_oc,
    })
}

fn check_model(outcomes: usize, model: &OutcomeModel) -> Result<()> {
    if model.outcomes() != outcomes {
        return Err(DesignError::DimensionMismatch {
            what: "model outcomes",
            expected: outcomes,
            actual: model.outcomes(),
        });
    }
    Ok(())
}

/// Null block for a spec, already reduced to composite statistics when needed.
pub(crate) fn working_null_block(
    spec: &GsDesignSpec,
    model: &OutcomeModel,
    cfg: &SimConfig,
) -> Result<StatisticBlock> {
    // correlations depend only on N_i / N_j, so any equal per-stage size works
    let schedule = StageSchedule::equal(1, spec.stages)?;
    let null = simulate_null_block(&schedule, model, cfg)?;
    Ok(if spec.composite {
        composite_transform(&null)
    } else {
        null
    })
}

/// Shift to add to a working block for effects `mu` at per-stage size `n`.
pub(crate) fn working_shift(spec: &GsDesignSpec, sigma: &[f64], mu: &[f64], per_stage: usize) -> Vec<f64> {
    let schedule = StageSchedule::equal(per_stage, spec.stages).expect("per-stage size >= 1");
    let shift = mean_shift(mu, &schedule, sigma);
    if spec.composite {
        composite_shift(&shift, spec.outcomes)
    } else {
        shift
    }
}

/// Calibrates `C` once on a null block, then increases the per-stage sample
/// size from `nmin` until the power at the least favourable configuration
/// reaches `1 - beta`. Honors `spec.composite`.
pub fn search_gs_design(
    spec: &GsDesignSpec,
    model: &OutcomeModel,
    cfg: &SimConfig,
    opts: &GsSearchOptions,
) -> Result<GsRealisation> {
    spec.validate()?;
    check_model(spec.outcomes, model)?;
    if opts.nmin == 0 || opts.nmin > opts.n_cap {
        return Err(DesignError::invalid(
            "nmin",
            format!("must satisfy 1 <= nmin <= {}", opts.n_cap),
        ));
    }
    let block = working_null_block(spec, model, cfg)?;
    let (constant, alpha_star) = calibrate_c(&block, spec, &opts.calibration)?;
    let boundaries = boundaries_unchecked(constant, spec.stages, spec.shape);
    let rule = Rule::for_spec(spec);
    let delta_beta = lfc_effects(spec, model.sigma(), opts.lfc_mode);
    let nsims = block.nsims();

    let mut last_power = 0.0;
    for n in opts.nmin..=opts.n_cap {
        let shift = working_shift(spec, model.sigma(), &delta_beta, n);
        let t = tally(&block, &shift, &boundaries, rule);
        let lfc_oc = oc_from_tally(t, nsims, n, spec.outcomes);
        last_power = lfc_oc.p_reject;
        if lfc_oc.p_reject >= 1.0 - spec.beta {
            let null_oc = oc_from_tally(
                tally(&block, &[], &boundaries, rule),
                nsims,
                n,
                spec.outcomes,
            );
            return Ok(GsRealisation {
                spec: spec.clone(),
                model: model.clone(),
                sim: *cfg,
                per_stage: n,
                boundaries,
                delta_beta,
                alpha_star,
                power_star: lfc_oc.p_reject,
                null_oc,
                lfc_oc,
            });
        }
    }
    Err(DesignError::NoFeasibleDesign {
        n: opts.n_cap,
        power: last_power,
        target: 1.0 - spec.beta,
    })
}

/// [`search_gs_design`] on the per-stage sum of the outcome statistics.
pub fn search_composite_design(
    spec: &GsDesignSpec,
    model: &OutcomeModel,
    cfg: &SimConfig,
    opts: &GsSearchOptions,
) -> Result<GsRealisation> {
    let spec = GsDesignSpec {
        composite: true,
        ..spec.clone()
    };
    search_gs_design(&spec, model, cfg, opts)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::wang_tsiatis_boundaries;

    fn flat(c: f64, stages: usize) -> Boundaries {
        wang_tsiatis_boundaries(c, stages, 0.5).unwrap()
    }

    #[test]
    fn single_stage_go() {
        let p = evaluate_gs_row(&[2.5, -1.0], &flat(2.0, 1), 1, 2);
        assert_eq!(p, TrialPath { decision: Decision::Go, stop_stage: 1 });
    }

    #[test]
    fn final_stage_closure_forces_nogo() {
        // one above, two below e_1 = f_1 = 2 with K - m + 1 = 2
        let p = evaluate_gs_row(&[2.5, 1.9, -3.0], &flat(2.0, 1), 2, 3);
        assert_eq!(p, TrialPath { decision: Decision::NoGo, stop_stage: 1 });
    }

    #[test]
    fn boundary_equal_counts_neither_way() {
        let b = Boundaries { lower: vec![-1.0, 2.0], upper: vec![2.0, 2.0], constant: 2.0 };
        // stage 1: value == e and value == f are both ignored, so continue
        let p = evaluate_gs_row(&[2.0, -1.0, 3.0, 0.0], &b, 1, 2);
        assert_eq!(p, TrialPath { decision: Decision::Go, stop_stage: 2 });
    }

    #[test]
    fn simultaneous_go_at_stage_three() {
        // K = 3, m = 2, J = 4: outcome 1 above at stage 2 alone, outcomes 1 and 3 above at stage 3
        let b = wang_tsiatis_boundaries(2.0, 4, 0.0).unwrap();
        let row = [
            0.5, 0.2, 0.1, //
            1.6, 0.3, 0.5, //
            1.4, 0.0, 1.3, //
            1.0, 1.0, 1.0,
        ];
        let p = evaluate_gs_row(&row, &b, 2, 3);
        assert_eq!(p, TrialPath { decision: Decision::Go, stop_stage: 3 });
    }

    #[test]
    fn degenerate_boundaries_always_reject_at_stage_one() {
        let spec = GsDesignSpec {
            stages: 2,
            outcomes: 2,
            required: 1,
            shape: 0.0,
            alpha: 0.025,
            beta: 0.2,
            delta0: vec![0.2; 2],
            delta1: vec![0.4; 2],
            composite: false,
        };
        let model = OutcomeModel::standard(2, 0.3).unwrap();
        let block = working_null_block(&spec, &model, &SimConfig::new(1, 1000)).unwrap();
        let b = Boundaries {
            lower: vec![f64::NEG_INFINITY; 2],
            upper: vec![f64::NEG_INFINITY; 2],
            constant: f64::NEG_INFINITY,
        };
        let oc = estimate_gs_oc(&block, &b, &spec, 10).unwrap();
        assert_eq!(oc.p_reject, 1.0);
        assert_eq!(oc.expected_stages, 1.0);
        assert_eq!(oc.ess, 10.0);
        assert_eq!(oc.enm, 20.0);
    }

    #[test]
    fn composite_sums_by_stage() {
        let block = StatisticBlock::from_values(2, 2, 0, vec![1.0, -1.0, 0.5, 2.0]).unwrap();
        let c = composite_transform(&block);
        assert_eq!(c.outcomes(), 1);
        assert_eq!(c.values(), &[0.0, 2.5]);
        let one = StatisticBlock::from_values(3, 1, 0, vec![1.0, 2.0, 3.0]).unwrap();
        assert_eq!(composite_transform(&one), one);
    }

    #[test]
    fn search_rejects_bad_inputs() {
        let spec = GsDesignSpec {
            stages: 2,
            outcomes: 2,
            required: 1,
            shape: 0.0,
            alpha: 0.025,
            beta: 0.2,
            delta0: vec![0.2; 2],
            delta1: vec![0.4; 2],
            composite: false,
        };
        let model = OutcomeModel::standard(3, 0.3).unwrap();
        let cfg = SimConfig::new(1, 1000);
        assert!(search_gs_design(&spec, &model, &cfg, &GsSearchOptions::default()).is_err());
        let model = OutcomeModel::standard(2, 0.3).unwrap();
        let opts = GsSearchOptions { nmin: 0, ..Default::default() };
        assert!(search_gs_design(&spec, &model, &cfg, &opts).is_err());
    }

    #[test]
    fn cap_reached_is_infeasible() {
        let spec = GsDesignSpec {
            stages: 1,
            outcomes: 1,
            required: 1,
            shape: 0.0,
            alpha: 0.025,
            beta: 0.2,
            delta0: vec![0.0],
            delta1: vec![0.1],
            composite: false,
        };
        let model = OutcomeModel::standard(1, 0.0).unwrap();
        let opts = GsSearchOptions { n_cap: 20, ..Default::default() };
        let err = search_gs_design(&spec, &model, &SimConfig::new(2, 20_000), &opts).unwrap_err();
        assert!(matches!(err, DesignError::NoFeasibleDesign { n: 20, .. }));
    }
}
