//! Comparisons between design realisations: effect grids, correlation sweeps,
//! identified power and conditional-power threshold sensitivity.

use crate::dtl::{dtl_null_block, dtl_oc_shifted, dtl_shift, search_dtl_design, DtlDesignSpec, DtlRealisation, DtlSearchOptions};
use crate::error::{DesignError, Result};
use crate::gs::{oc_from_tally, search_gs_design, tally, working_null_block, working_shift, GsRealisation, GsSearchOptions, Rule};
use crate::model::{shared_correlation, GsDesignSpec, OutcomeModel, StageSchedule};
use crate::par;
use crate::sim::{check_dims, mean_shift, SimConfig, StatisticBlock};

/// A design found by one of the searches.
#[derive(Debug, Clone, PartialEq)]
pub enum Realisation {
    Gs(GsRealisation),
    Dtl(DtlRealisation),
}

/// Headline numbers of a realisation, with ESS and ENM under the least favourable configuration.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DesignSummary {
    pub per_stage: usize,
    pub max_sample_size: usize,
    /// `C` for group-sequential designs, `r` for drop-the-loser designs.
    pub constant: f64,
    pub alpha_star: f64,
    pub power_star: f64,
    pub ess: f64,
    pub enm: f64,
}

impl Realisation {
    pub fn outcomes(&self) -> usize {
        match self {
            Realisation::Gs(g) => g.spec.outcomes,
            Realisation::Dtl(d) => d.spec.outcomes,
        }
    }

    pub fn model(&self) -> &OutcomeModel {
        match self {
            Realisation::Gs(g) => &g.model,
            Realisation::Dtl(d) => &d.model,
        }
    }

    pub fn summary(&self) -> DesignSummary {
        match self {
            Realisation::Gs(g) => DesignSummary {
                per_stage: g.per_stage,
                max_sample_size: g.max_sample_size(),
                constant: g.constant(),
                alpha_star: g.alpha_star,
                power_star: g.power_star,
                ess: g.lfc_oc.ess,
                enm: g.lfc_oc.enm,
            },
            Realisation::Dtl(d) => DesignSummary {
                per_stage: d.per_stage,
                max_sample_size: d.max_sample_size(),
                constant: d.r,
                alpha_star: d.alpha_star,
                power_star: d.power_star,
                ess: d.lfc_oc.ess,
                enm: d.lfc_oc.enm,
            },
        }
    }
}

/// Rejection probability, ESS and ENM at one vector of true effects.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PointOc {
    pub p_reject: f64,
    pub ess: f64,
    pub enm: f64,
}

/// A realisation together with the null block it was calibrated on, ready to
/// be evaluated at arbitrary true effects.
#[derive(Debug, Clone)]
pub struct PreparedDesign {
    realisation: Realisation,
    block: StatisticBlock,
}

impl PreparedDesign {
    /// Regenerates the working null block from the realisation's own simulation settings.
    pub fn new(realisation: Realisation) -> Result<Self> {
        let block = match &realisation {
            Realisation::Gs(g) => working_null_block(&g.spec, &g.model, &g.sim)?,
            Realisation::Dtl(d) => dtl_null_block(&d.model, &d.sim)?,
        };
        Ok(PreparedDesign { realisation, block })
    }

    pub fn realisation(&self) -> &Realisation {
        &self.realisation
    }

    pub fn block(&self) -> &StatisticBlock {
        &self.block
    }

    pub fn evaluate(&self, mu: &[f64]) -> Result<PointOc> {
        let k = self.realisation.outcomes();
        if mu.len() != k {
            return Err(DesignError::DimensionMismatch {
                what: "mu",
                expected: k,
                actual: mu.len(),
            });
        }
        if let Some(bad) = mu.iter().find(|v| !v.is_finite()) {
            return Err(DesignError::invalid("mu", format!("effects must be finite, got {bad}")));
        }
        let sigma = self.realisation.model().sigma();
        Ok(match &self.realisation {
            Realisation::Gs(g) => {
                let shift = working_shift(&g.spec, sigma, mu, g.per_stage);
                let t = tally(&self.block, &shift, &g.boundaries, Rule::for_spec(&g.spec));
                let oc = oc_from_tally(t, self.block.nsims(), g.per_stage, g.spec.outcomes);
                PointOc {
                    p_reject: oc.p_reject,
                    ess: oc.ess,
                    enm: oc.enm,
                }
            }
            Realisation::Dtl(d) => {
                let shift = dtl_shift(mu, sigma, d.per_stage);
                let oc = dtl_oc_shifted(&self.block, &shift, &d.spec, sigma, d.r, d.per_stage);
                PointOc {
                    p_reject: oc.p_reject,
                    ess: oc.ess,
                    enm: oc.enm,
                }
            }
        })
    }

    /// Probability of a go decision in which at least `m` of the outcomes
    /// above the go boundary at the deciding stage are in `working`.
    pub fn identified_power(&self, delta_beta: &[f64], working: &[usize]) -> Result<f64> {
        match &self.realisation {
            Realisation::Gs(g) => identified_power(&self.block, g, delta_beta, working),
            Realisation::Dtl(_) => Err(DesignError::invalid(
                "design",
                "identified power is defined for group-sequential designs",
            )),
        }
    }
}

/// Identified power of a group-sequential design.
///
/// `block` holds null statistics for the design's stages and outcomes; they
/// are shifted to `delta_beta` at the design's per-stage size.
pub fn identified_power(
    block: &StatisticBlock,
    design: &GsRealisation,
    delta_beta: &[f64],
    working: &[usize],
) -> Result<f64> {
    let spec = &design.spec;
    if spec.composite {
        return Err(DesignError::invalid(
            "design",
            "identified power needs per-outcome statistics, not a composite",
        ));
    }
    let (k, m, stages) = (spec.outcomes, spec.required, spec.stages);
    check_dims(block, k, stages)?;
    if delta_beta.len() != k {
        return Err(DesignError::DimensionMismatch {
            what: "delta_beta",
            expected: k,
            actual: delta_beta.len(),
        });
    }
    let mut in_set = vec![false; k];
    for &w in working {
        if w >= k {
            return Err(DesignError::IndexOutOfRange {
                what: "working outcome",
                index: w,
                limit: k,
            });
        }
        in_set[w] = true;
    }
    let schedule = StageSchedule::equal(design.per_stage, stages)?;
    let shift = mean_shift(delta_beta, &schedule, design.model.sigma());
    let b = &design.boundaries;
    let cols = k * stages;
    let hits: u64 = par::map_chunks(block.values(), 4096 * cols, |chunk| {
        let mut hits = 0u64;
        'rows: for row in chunk.chunks_exact(cols) {
            for j in 0..stages {
                let (f, e) = (b.lower[j], b.upper[j]);
                let (mut above, mut above_working, mut below) = (0, 0, 0);
                for c in 0..k {
                    let z = row[j * k + c] + shift[j * k + c];
                    if z > e {
                        above += 1;
                        above_working += in_set[c] as usize;
                    } else if z < f {
                        below += 1;
                    }
                }
                if above >= m {
                    hits += (above_working >= m) as u64;
                    continue 'rows;
                }
                if below > k - m {
                    continue 'rows;
                }
            }
        }
        hits
    })
    .into_iter()
    .sum();
    Ok(hits as f64 / block.nsims() as f64)
}

/// Results of two designs over a set of true-effect vectors.
#[derive(Debug, Clone, PartialEq)]
pub struct EffectGrid {
    /// Per-outcome axis values, empty when the points were given explicitly.
    pub axes: Vec<Vec<f64>>,
    pub points: Vec<GridPoint>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct GridPoint {
    pub mu: Vec<f64>,
    pub a: PointOc,
    pub b: PointOc,
}

impl GridPoint {
    pub fn ess_ratio(&self) -> f64 {
        self.a.ess / self.b.ess
    }

    pub fn enm_ratio(&self) -> f64 {
        self.a.enm / self.b.enm
    }
}

/// Every combination of the axis values, first axis varying slowest.
pub fn cartesian(axes: &[Vec<f64>]) -> Vec<Vec<f64>> {
    let mut out: Vec<Vec<f64>> = vec![Vec::new()];
    for axis in axes {
        out = out
            .into_iter()
            .flat_map(|prefix| {
                axis.iter().map(move |&v| {
                    let mut p = prefix.clone();
                    p.push(v);
                    p
                })
            })
            .collect();
    }
    out
}

/// Evaluates both designs at each effect vector.
pub fn compare_at(a: &PreparedDesign, b: &PreparedDesign, points: &[Vec<f64>]) -> Result<Vec<GridPoint>> {
    if a.realisation.outcomes() != b.realisation.outcomes() {
        return Err(DesignError::DimensionMismatch {
            what: "outcomes of compared designs",
            expected: a.realisation.outcomes(),
            actual: b.realisation.outcomes(),
        });
    }
    par::map_items(points, |mu| {
        Ok(GridPoint {
            mu: mu.clone(),
            a: a.evaluate(mu)?,
            b: b.evaluate(mu)?,
        })
    })
    .into_iter()
    .collect()
}

/// Rejection probability, ESS and ENM of both designs on the full grid spanned by `axes`.
pub fn effect_grid(a: &PreparedDesign, b: &PreparedDesign, axes: &[Vec<f64>]) -> Result<EffectGrid> {
    let k = a.realisation.outcomes();
    if axes.len() != k {
        return Err(DesignError::DimensionMismatch {
            what: "grid axes",
            expected: k,
            actual: axes.len(),
        });
    }
    if let Some(i) = axes.iter().position(|ax| ax.is_empty()) {
        return Err(DesignError::invalid("grid", format!("axis {} has no values", i + 1)));
    }
    let points = compare_at(a, b, &cartesian(axes))?;
    Ok(EffectGrid {
        axes: axes.to_vec(),
        points,
    })
}

/// A design search that can be rerun under different correlations.
#[derive(Debug, Clone, PartialEq)]
pub enum DesignRequest {
    Gs { spec: GsDesignSpec, opts: GsSearchOptions },
    Dtl { spec: DtlDesignSpec, opts: DtlSearchOptions },
}

impl DesignRequest {
    pub fn outcomes(&self) -> usize {
        match self {
            DesignRequest::Gs { spec, .. } => spec.outcomes,
            DesignRequest::Dtl { spec, .. } => spec.outcomes,
        }
    }

    pub fn search(&self, model: &OutcomeModel, cfg: &SimConfig) -> Result<Realisation> {
        match self {
            DesignRequest::Gs { spec, opts } => search_gs_design(spec, model, cfg, opts).map(Realisation::Gs),
            DesignRequest::Dtl { spec, opts } => search_dtl_design(spec, model, cfg, opts).map(Realisation::Dtl),
        }
    }
}

/// Single-stage multi-outcome comparator for a drop-the-loser spec.
pub fn single_stage_spec(spec: &DtlDesignSpec) -> GsDesignSpec {
    GsDesignSpec {
        stages: 1,
        outcomes: spec.outcomes,
        required: spec.required,
        shape: 0.0,
        alpha: spec.alpha,
        beta: spec.beta,
        delta0: spec.delta0.clone(),
        delta1: spec.delta1.clone(),
        composite: false,
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SweepPoint {
    pub rho: f64,
    pub a: Option<DesignSummary>,
    pub b: Option<DesignSummary>,
    /// Why the point is invalid, if either search failed.
    pub error: Option<String>,
}

impl SweepPoint {
    pub fn is_valid(&self) -> bool {
        self.a.is_some() && self.b.is_some()
    }

    pub fn ess_ratio(&self) -> Option<f64> {
        Some(self.a?.ess / self.b?.ess)
    }

    pub fn enm_ratio(&self) -> Option<f64> {
        Some(self.a?.enm / self.b?.enm)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct RatioCurve {
    pub points: Vec<SweepPoint>,
}

impl RatioCurve {
    pub fn rho_values(&self) -> Vec<f64> {
        self.points.iter().map(|p| p.rho).collect()
    }
}

/// Searches both designs at every shared correlation `rho` and records their
/// LFC summaries. A failed search marks that point invalid.
pub fn correlation_sweep(
    a: &DesignRequest,
    b: &DesignRequest,
    sigma: &[f64],
    rhos: &[f64],
    cfg: &SimConfig,
) -> Result<RatioCurve> {
    let k = a.outcomes();
    if b.outcomes() != k || sigma.len() != k {
        return Err(DesignError::DimensionMismatch {
            what: "outcomes in sweep",
            expected: k,
            actual: if b.outcomes() != k { b.outcomes() } else { sigma.len() },
        });
    }
    let points = rhos
        .iter()
        .map(|&rho| {
            let run = || -> Result<(DesignSummary, DesignSummary)> {
                let model = OutcomeModel::new(vec![0.0; k], sigma.to_vec(), shared_correlation(k, rho))?;
                Ok((a.search(&model, cfg)?.summary(), b.search(&model, cfg)?.summary()))
            };
            match run() {
                Ok((sa, sb)) => SweepPoint {
                    rho,
                    a: Some(sa),
                    b: Some(sb),
                    error: None,
                },
                Err(e) => SweepPoint {
                    rho,
                    a: None,
                    b: None,
                    error: Some(e.to_string()),
                },
            }
        })
        .collect();
    Ok(RatioCurve { points })
}

#[derive(Debug, Clone, PartialEq)]
pub struct SensitivityPoint {
    pub cp_lower: f64,
    pub cp_upper: f64,
    pub design: Option<DtlRealisation>,
    pub error: Option<String>,
}

/// Reruns the drop-the-loser search for every `(CP_L, CP_U)` pair with `CP_L < CP_U`.
pub fn cp_sensitivity(
    spec: &DtlDesignSpec,
    model: &OutcomeModel,
    cfg: &SimConfig,
    opts: &DtlSearchOptions,
    cp_lower: &[f64],
    cp_upper: &[f64],
) -> Vec<SensitivityPoint> {
    let mut out = Vec::new();
    for &lo in cp_lower {
        for &hi in cp_upper {
            let s = DtlDesignSpec {
                cp_lower: lo,
                cp_upper: hi,
                ..spec.clone()
            };
            let (design, error) = match search_dtl_design(&s, model, cfg, opts) {
                Ok(d) => (Some(d), None),
                Err(e) => (None, Some(e.to_string())),
            };
            out.push(SensitivityPoint {
                cp_lower: lo,
                cp_upper: hi,
                design,
                error,
            });
        }
    }
    out
}

/// Outcomes at which the least favourable configuration takes the alternative effect.
pub fn lfc_working_set(design: &GsRealisation) -> Vec<usize> {
    design
        .delta_beta
        .iter()
        .zip(&design.spec.delta1)
        .enumerate()
        .filter(|(_, (a, b))| a == b)
        .map(|(i, _)| i)
        .collect()
}
