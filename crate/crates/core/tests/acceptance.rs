//! Acceptance checks. Each test prints one `criterion N: PASS|FAIL` line with
//! the values it compared, then asserts.
//!
//! Constants of group-sequential designs are compared on the final-boundary
//! scale `e_J`, which is how published realisations quote `C`.

use std::io::Write;
use std::sync::OnceLock;

use multiout::analysis::{correlation_sweep, single_stage_spec, DesignRequest, PreparedDesign, Realisation};
use multiout::dtl::{conditional_power, cp_boundary, evaluate_dtl_row, DtlDecision};
use multiout::gs::{composite_transform, evaluate_gs_row};
use multiout::*;
use proptest::prelude::*;
use proptest::test_runner::{Config, TestRunner};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha20Rng;

const NSIMS: usize = 100_000;
const SEED: u64 = 1;

fn report(id: u32, pass: bool, detail: &str) {
    let verdict = if pass { "PASS" } else { "FAIL" };
    let mut out = std::io::stdout().lock();
    writeln!(out, "criterion {id}: {verdict} | {detail}").unwrap();
}

fn within(value: f64, target: f64, tol: f64) -> bool {
    (value - target).abs() <= tol + 1e-12
}

fn gs_spec(k: usize, m: usize, j: usize, composite: bool) -> GsDesignSpec {
    GsDesignSpec {
        stages: j,
        outcomes: k,
        required: m,
        shape: 0.0,
        alpha: 0.025,
        beta: 0.2,
        delta0: vec![0.2; k],
        delta1: vec![0.4; k],
        composite,
    }
}

fn dtl_spec(k: usize, m: usize, kmax: usize) -> DtlDesignSpec {
    DtlDesignSpec {
        outcomes: k,
        required: m,
        max_retained: kmax,
        cp_lower: 0.3,
        cp_upper: 0.95,
        alpha: 0.025,
        beta: 0.2,
        delta0: vec![0.2; k],
        delta1: vec![0.4; k],
    }
}

fn cfg() -> SimConfig {
    SimConfig::new(SEED, NSIMS)
}

fn gs_design(k: usize, m: usize, composite: bool) -> GsRealisation {
    let model = OutcomeModel::standard(k, 0.3).unwrap();
    search_gs_design(&gs_spec(k, m, 3, composite), &model, &cfg(), &GsSearchOptions::default()).unwrap()
}

/// Checks an `(N, C)` pair and returns the description fragment.
fn check_gs(label: &str, d: &GsRealisation, n: usize, n_tol: usize, c: f64, c_tol: f64, ok: &mut bool) -> String {
    let n_ok = d.max_sample_size().abs_diff(n) <= n_tol;
    let c_ok = within(d.final_boundary(), c, c_tol);
    *ok &= n_ok && c_ok;
    format!(
        "{label} N={} (want {n}±{n_tol}) C={:.6} (want {c}±{c_tol}; raw constant {:.6})",
        d.max_sample_size(),
        d.final_boundary(),
        d.constant()
    )
}

#[test]
fn criterion_1_two_outcome_gs() {
    let mo = gs_design(2, 1, false);
    let comp = gs_design(2, 1, true);
    let mut ok = true;
    let a = check_gs("MO", &mo, 57, 3, 2.256490, 0.05, &mut ok);
    let b = check_gs("composite", &comp, 60, 3, 3.240066, 0.07, &mut ok);
    report(1, ok, &format!("{a}; {b}"));
    assert!(ok);
}

struct ThreeOutcomeDesigns {
    mo: GsRealisation,
    comp: GsRealisation,
    mo_m2: GsRealisation,
    comp_m2: GsRealisation,
}

fn three_outcome_designs() -> &'static ThreeOutcomeDesigns {
    static CELL: OnceLock<ThreeOutcomeDesigns> = OnceLock::new();
    CELL.get_or_init(|| ThreeOutcomeDesigns {
        mo: gs_design(3, 1, false),
        comp: gs_design(3, 1, true),
        mo_m2: gs_design(3, 2, false),
        comp_m2: gs_design(3, 2, true),
    })
}

#[test]
fn criterion_2_three_outcome_gs() {
    let d = three_outcome_designs();
    let mut ok = true;
    let a = check_gs("m=1 MO", &d.mo, 60, 3, 2.394350, 0.05, &mut ok);
    let b = check_gs("m=1 composite", &d.comp, 63, 3, 4.387731, 0.09, &mut ok);
    let c = check_gs("m=2 MO", &d.mo_m2, 42, 3, 1.579395, 0.05, &mut ok);
    // the composite constant does not depend on N
    let comp_c = d.comp_m2.final_boundary();
    ok &= within(comp_c, 4.389363, 0.09);
    report(
        2,
        ok,
        &format!("{a}; {b}; {c}; m=2 composite C={comp_c:.6} (want 4.389363±0.09)"),
    );
    assert!(ok);
}

const TABLE_MO_COMPOSITE: [([f64; 3], f64, f64, f64); 7] = [
    ([0.4, 0.4, 0.4], 0.96, 0.99, 1.13),
    ([0.4, 0.2, 0.2], 0.81, 0.82, 0.99),
    ([0.4, 0.0, 0.0], 0.76, 0.30, 0.87),
    ([0.4, -0.2, -0.2], 0.76, 0.02, 0.84),
    ([0.0, 0.0, 0.0], 0.02, 0.02, 0.96),
    ([0.3, 0.3, 0.3], 0.78, 0.90, 1.07),
    ([0.2, 0.2, 0.2], 0.44, 0.58, 1.00),
];

/// Published three-stage realisation, quoted by per-stage size and final boundary.
fn published_gs(k: usize, m: usize, composite: bool, per_stage: usize, final_boundary: f64) -> GsRealisation {
    let spec = gs_spec(k, m, 3, composite);
    let constant = final_boundary * 3f64.powf(0.5 - spec.shape);
    let model = OutcomeModel::standard(k, 0.3).unwrap();
    realise_gs_design(&spec, &model, &cfg(), per_stage, constant, LfcMode::FirstM).unwrap()
}

#[test]
fn criterion_3_mo_vs_composite_rows() {
    let mo = PreparedDesign::new(Realisation::Gs(published_gs(3, 1, false, 20, 2.394350))).unwrap();
    let comp = PreparedDesign::new(Realisation::Gs(published_gs(3, 1, true, 21, 4.387731))).unwrap();
    let mut ok = true;
    let mut rows = Vec::new();
    for (mu, r_mo, r_comp, ratio) in TABLE_MO_COMPOSITE {
        let a = mo.evaluate(&mu).unwrap();
        let b = comp.evaluate(&mu).unwrap();
        let got = a.ess / b.ess;
        let row_ok = within(a.p_reject, r_mo, 0.02) && within(b.p_reject, r_comp, 0.02) && within(got, ratio, 0.04);
        ok &= row_ok;
        rows.push(format!(
            "{mu:?}: {:.3}/{:.3}/{:.3} (want {r_mo}/{r_comp}/{ratio}){}",
            a.p_reject,
            b.p_reject,
            got,
            if row_ok { "" } else { " <-" }
        ));
    }
    report(3, ok, &rows.join("; "));
    assert!(ok);
}

struct DtlPair {
    dtl: DtlRealisation,
    single: GsRealisation,
}

fn dtl_pair(k: usize) -> DtlPair {
    let spec = dtl_spec(k, 1, 1);
    let model = OutcomeModel::standard(k, 0.3).unwrap();
    DtlPair {
        dtl: search_dtl_design(&spec, &model, &cfg(), &DtlSearchOptions::default()).unwrap(),
        single: search_gs_design(&single_stage_spec(&spec), &model, &cfg(), &GsSearchOptions::default()).unwrap(),
    }
}

fn dtl_pairs() -> &'static (DtlPair, DtlPair) {
    static CELL: OnceLock<(DtlPair, DtlPair)> = OnceLock::new();
    CELL.get_or_init(|| (dtl_pair(2), dtl_pair(3)))
}

#[test]
fn criterion_4_drop_the_loser_designs() {
    let (two, three) = dtl_pairs();
    let mut ok = true;
    let mut parts = Vec::new();
    for (label, p, n_dtl, r_dtl, n_ss, r_ss) in [
        ("K=2", two, 64, 2.273714, 56, 2.221584),
        ("K=3", three, 72, 2.435647, 59, 2.380403),
    ] {
        let d_ok = p.dtl.max_sample_size().abs_diff(n_dtl) <= 4 && within(p.dtl.r, r_dtl, 0.05);
        let s_ok = p.single.max_sample_size().abs_diff(n_ss) <= 3 && within(p.single.constant(), r_ss, 0.05);
        ok &= d_ok && s_ok && p.dtl.warnings.is_empty();
        parts.push(format!(
            "{label} DtL r={:.6} N={} (want {r_dtl}±0.05, {n_dtl}±4), single-stage r={:.6} N={} (want {r_ss}±0.05, {n_ss}±3)",
            p.dtl.r,
            p.dtl.max_sample_size(),
            p.single.constant(),
            p.single.max_sample_size()
        ));
    }
    report(4, ok, &parts.join("; "));
    assert!(ok);
}

const TABLE_DTL_SINGLE: [([f64; 3], f64, f64, f64, f64); 7] = [
    ([0.4, 0.4, 0.4], 0.95, 0.96, 0.80, 0.47),
    ([0.4, 0.2, 0.2], 0.81, 0.80, 0.95, 0.52),
    ([0.4, 0.0, 0.0], 0.82, 0.76, 0.97, 0.53),
    ([0.4, -0.2, -0.2], 0.83, 0.76, 0.97, 0.53),
    ([0.0, 0.0, 0.0], 0.02, 0.02, 0.96, 0.52),
    ([0.3, 0.3, 0.3], 0.77, 0.77, 0.97, 0.53),
    ([0.2, 0.2, 0.2], 0.43, 0.43, 1.09, 0.57),
];

#[test]
fn criterion_5_dtl_vs_single_stage_rows() {
    // published realisations: DtL {r = 2.435647, N = 72}, single stage {r = 2.380403, N = 59}
    let spec = dtl_spec(3, 1, 1);
    let model = OutcomeModel::standard(3, 0.3).unwrap();
    let dtl = realise_dtl_design(&spec, &model, &cfg(), 36, 2.435647, LfcMode::FirstM).unwrap();
    let single = realise_gs_design(&single_stage_spec(&spec), &model, &cfg(), 59, 2.380403, LfcMode::FirstM).unwrap();
    let a = PreparedDesign::new(Realisation::Dtl(dtl)).unwrap();
    let b = PreparedDesign::new(Realisation::Gs(single)).unwrap();
    let mut ok = true;
    let mut rows = Vec::new();
    for (mu, p_dtl, p_ss, ess, enm) in TABLE_DTL_SINGLE {
        let x = a.evaluate(&mu).unwrap();
        let y = b.evaluate(&mu).unwrap();
        let (ess_got, enm_got) = (x.ess / y.ess, x.enm / y.enm);
        let flags = [
            within(x.p_reject, p_dtl, 0.02),
            within(y.p_reject, p_ss, 0.02),
            within(ess_got, ess, 0.04),
            within(enm_got, enm, 0.04),
        ];
        ok &= flags.iter().all(|&f| f);
        let failed: Vec<&str> = ["p_DtL", "p_SS", "ESS", "ENM"]
            .iter()
            .zip(flags)
            .filter(|(_, f)| !f)
            .map(|(n, _)| *n)
            .collect();
        rows.push(format!(
            "{mu:?}: {:.3}/{:.3}/{:.3}/{:.3} (want {p_dtl}/{p_ss}/{ess}/{enm}){}",
            x.p_reject,
            y.p_reject,
            ess_got,
            enm_got,
            if failed.is_empty() { String::new() } else { format!(" off: {}", failed.join(",")) }
        ));
    }
    report(5, ok, &rows.join("; "));
    assert!(ok);
}

fn rhos() -> Vec<f64> {
    (0..=8).map(|i| i as f64 / 10.0).collect()
}

#[test]
fn criterion_6_correlation_trends() {
    let sweep_cfg = cfg();
    let mut ok = true;
    let mut parts = Vec::new();
    for (k, m) in [(2, 1), (4, 2), (6, 1), (6, 3), (10, 5)] {
        let a = DesignRequest::Gs { spec: gs_spec(k, m, 3, false), opts: GsSearchOptions::default() };
        let b = DesignRequest::Gs { spec: gs_spec(k, m, 3, true), opts: GsSearchOptions::default() };
        let curve = correlation_sweep(&a, &b, &vec![1.0; k], &rhos(), &sweep_cfg).unwrap();
        let ratios: Vec<f64> = curve.points.iter().map(|p| p.ess_ratio().unwrap_or(f64::NAN)).collect();
        let trend = ratios[8] < ratios[0];
        let high = ratios[5..].iter().all(|&r| r < 1.0);
        ok &= trend && high;
        parts.push(format!(
            "GS K={k} m={m} ESS ratio rho=0 {:.3} rho=0.5..0.8 [{}]{}",
            ratios[0],
            ratios[5..].iter().map(|r| format!("{r:.3}")).collect::<Vec<_>>().join(","),
            if trend && high { "" } else { " <-" }
        ));
    }
    for (k, m, kmax) in [(2, 1, 1), (6, 1, 3), (6, 1, 5), (6, 3, 3), (6, 3, 5)] {
        let spec = dtl_spec(k, m, kmax);
        let a = DesignRequest::Dtl { spec: spec.clone(), opts: DtlSearchOptions::default() };
        let b = DesignRequest::Gs { spec: single_stage_spec(&spec), opts: GsSearchOptions::default() };
        let curve = correlation_sweep(&a, &b, &vec![1.0; k], &rhos(), &sweep_cfg).unwrap();
        let ess: Vec<f64> = curve.points.iter().map(|p| p.ess_ratio().unwrap_or(f64::NAN)).collect();
        let enm: Vec<f64> = curve.points.iter().map(|p| p.enm_ratio().unwrap_or(f64::NAN)).collect();
        let trend = ess[8] < ess[0];
        let enm_ok = enm.iter().all(|&r| r < 1.0);
        ok &= trend && enm_ok;
        parts.push(format!(
            "DtL K={k} m={m} K_max={kmax} ESS ratio {:.3}->{:.3}, max ENM ratio {:.3}{}",
            ess[0],
            ess[8],
            enm.iter().cloned().fold(f64::NAN, f64::max),
            if trend && enm_ok { "" } else { " <-" }
        ));
    }
    report(6, ok, &parts.join("; "));
    assert!(ok);
}

#[test]
fn criterion_7_analytic_constants() {
    let big = SimConfig::new(SEED, 1_000_000);
    let schedule = StageSchedule::equal(1, 1).unwrap();
    let mut ok = true;
    let mut parts = Vec::new();
    for (k, m, want) in [(1, 1, 1.959964), (2, 1, 2.23877), (2, 2, 1.00273)] {
        let model = OutcomeModel::standard(k, 0.0).unwrap();
        let block = simulate_null_block(&schedule, &model, &big).unwrap();
        let (c, _) = calibrate_c(&block, &gs_spec(k, m, 1, false), &CalibrationOptions::default()).unwrap();
        let good = within(c, want, 0.02);
        ok &= good;
        parts.push(format!("K={k} m={m} C={c:.5} (want {want}±0.02)"));
    }
    report(7, ok, &parts.join("; "));
    assert!(ok);
}

fn run_property<S, F>(name: &str, strategy: S, test: F) -> std::result::Result<(), String>
where
    S: Strategy,
    F: Fn(S::Value) -> std::result::Result<(), TestCaseError>,
{
    let mut config = Config::with_cases(200);
    config.failure_persistence = None;
    let mut runner = TestRunner::new_with_rng(config, proptest::test_runner::TestRng::deterministic_rng(proptest::test_runner::RngAlgorithm::ChaCha));
    runner.run(&strategy, test).map_err(|e| format!("{name}: {e}"))
}

fn shared_rho(k: usize, frac: f64) -> f64 {
    // valid shared correlations lie in (-1/(K-1), 1]
    let lo = if k > 1 { -1.0 / (k as f64 - 1.0) + 0.05 } else { 0.0 };
    lo + frac * (0.95 - lo)
}

fn property_covariance() -> std::result::Result<(), String> {
    let strategy = (1usize..=3, 1usize..=3, 0.0f64..1.0, prop::collection::vec(1.0f64..20.0, 3), any::<u64>());
    run_property("covariance", strategy, |(k, j, frac, incr, seed)| {
        let rho = shared_rho(k, frac);
        let model = OutcomeModel::standard(k, rho).unwrap();
        let mut acc = 0.0;
        let cumulative: Vec<f64> = incr[..j].iter().map(|x| {
            acc += x;
            acc
        }).collect();
        let schedule = StageSchedule::from_cumulative(cumulative).unwrap();
        let nsims = 20_000;
        let block = simulate_null_block(&schedule, &model, &SimConfig::new(seed, nsims)).unwrap();
        let emp = block.empirical_covariance();
        let exact = assemble_covariance(&schedule, &model);
        let tol = 6.0 * 2f64.sqrt() / (nsims as f64).sqrt();
        let diff = emp.max_abs_diff(&exact);
        prop_assert!(diff < tol, "max deviation {diff} exceeds {tol}");
        Ok(())
    })
}

fn property_decision_totality() -> std::result::Result<(), String> {
    let strategy = (1usize..=5, 1usize..=4, 0.5f64..4.0, -0.5f64..0.5, any::<u64>())
        .prop_flat_map(|(k, j, c, shape, seed)| (Just(k), 1..=k, Just(j), Just(c), Just(shape), prop::collection::vec(-4.0f64..4.0, j * k), Just(seed)));
    run_property("decision totality", strategy, |(k, m, j, c, shape, row, _)| {
        let b = wang_tsiatis_boundaries(c, j, shape).unwrap();
        let path = evaluate_gs_row(&row, &b, m, k);
        prop_assert!((1..=j).contains(&path.stop_stage));
        for s in 0..path.stop_stage {
            let stats = &row[s * k..(s + 1) * k];
            let above = stats.iter().filter(|&&z| z > b.upper[s]).count();
            let below = stats.iter().filter(|&&z| z < b.lower[s]).count();
            let stops = above >= m || below >= k - m + 1;
            if s + 1 < path.stop_stage {
                prop_assert!(!stops, "should have stopped at stage {}", s + 1);
            } else {
                prop_assert!(stops, "no stopping condition holds at the reported stage");
                prop_assert_eq!(path.decision == Decision::Go, above >= m);
            }
        }
        Ok(())
    })
}

fn property_enm_identity() -> std::result::Result<(), String> {
    let strategy = (1usize..=4, 1usize..=3, 1.0f64..3.5, prop::collection::vec(-0.3f64..0.6, 4), 1usize..40, any::<u64>())
        .prop_flat_map(|(k, j, c, mu, n, seed)| (Just(k), 1..=k, Just(j), Just(c), Just(mu), Just(n), Just(seed), any::<bool>()));
    run_property("enm identity", strategy, |(k, m, j, c, mu, n, seed, composite)| {
        let model = OutcomeModel::standard(k, 0.2).unwrap();
        let schedule = StageSchedule::equal(n, j).unwrap();
        let null = simulate_null_block(&StageSchedule::equal(1, j).unwrap(), &model, &SimConfig::new(seed, 2000)).unwrap();
        let shifted = apply_mean_shift(&null, &mu[..k], &schedule, &model).unwrap();
        let spec = GsDesignSpec { composite, ..gs_spec(k, m, j, false) };
        let block = if composite { composite_transform(&shifted) } else { shifted };
        let b = wang_tsiatis_boundaries(c, j, 0.0).unwrap();
        let oc = estimate_gs_oc(&block, &b, &spec, n).unwrap();
        prop_assert_eq!(oc.enm, k as f64 * oc.ess);
        prop_assert!(oc.ess >= n as f64 && oc.ess <= (j * n) as f64);
        Ok(())
    })
}

fn property_cp_roundtrip() -> std::result::Result<(), String> {
    let strategy = (0.001f64..0.998, 0.0f64..1.0, 0.5f64..4.0, 1.0f64..200.0, 0.05f64..3.0, -0.5f64..1.0);
    run_property("cp inversion roundtrip", strategy, |(lo, gap, r, i1, ratio, delta)| {
        let hi = lo + (0.999 - lo) * gap.max(1e-3);
        let i2 = i1 * (1.0 + ratio);
        let b = invert_cp_boundaries(lo, hi, r, i1, i2, delta).unwrap();
        let cp_lo = conditional_power(b.lower, r, i1, i2, delta).unwrap();
        let cp_hi = conditional_power(b.upper, r, i1, i2, delta).unwrap();
        prop_assert!((cp_lo - lo).abs() <= 1e-10, "lower {cp_lo} vs {lo}");
        prop_assert!((cp_hi - hi).abs() <= 1e-10, "upper {cp_hi} vs {hi}");
        prop_assert!(b.lower < b.upper);
        Ok(())
    })
}

fn property_composite_single_outcome() -> std::result::Result<(), String> {
    let strategy = (1usize..=4, 0.8f64..3.5, -0.5f64..0.5, -0.3f64..0.6, 1usize..50, any::<u64>());
    run_property("composite K=1 equivalence", strategy, |(j, c, shape, mu, n, seed)| {
        let model = OutcomeModel::standard(1, 0.0).unwrap();
        let null = simulate_null_block(&StageSchedule::equal(1, j).unwrap(), &model, &SimConfig::new(seed, 3000)).unwrap();
        let block = apply_mean_shift(&null, &[mu], &StageSchedule::equal(n, j).unwrap(), &model).unwrap();
        let b = wang_tsiatis_boundaries(c, j, shape).unwrap();
        let mo = estimate_gs_oc(&block, &b, &gs_spec(1, 1, j, false), n).unwrap();
        let comp = estimate_gs_oc(&composite_transform(&block), &b, &gs_spec(1, 1, j, true), n).unwrap();
        prop_assert_eq!(mo, comp);
        Ok(())
    })
}

fn property_dtl_degenerate() -> std::result::Result<(), String> {
    let strategy = (1usize..=4, 0.0f64..1.0, 0.5f64..3.5, prop::collection::vec(-0.3f64..0.6, 4), 2usize..60, any::<u64>())
        .prop_flat_map(|(k, frac, r, mu, n, seed)| (Just(k), 1..=k, Just(frac), Just(r), Just(mu), Just(n), Just(seed)));
    run_property("DtL degenerate thresholds", strategy, |(k, m, frac, r, mu, n, seed)| {
        let model = OutcomeModel::standard(k, shared_rho(k, frac)).unwrap();
        let nsims = 3000;
        let null = simulate_null_block(&StageSchedule::equal(1, 2).unwrap(), &model, &SimConfig::new(seed, nsims)).unwrap();
        let two = apply_mean_shift(&null, &mu[..k], &StageSchedule::equal(n, 2).unwrap(), &model).unwrap();
        let spec = DtlDesignSpec { cp_lower: 0.0, cp_upper: 1.0, max_retained: k, delta0: vec![0.2; k], delta1: vec![0.4; k], ..dtl_spec(k, m, k) };
        let dtl = estimate_dtl_oc(&two, &spec, model.sigma(), r, n).unwrap();
        // final-stage statistics alone form a single-stage design on 2n with boundary r
        let finals: Vec<f64> = two.rows().flat_map(|row| row[k..].to_vec()).collect();
        let single = StatisticBlock::from_values(1, k, seed, finals).unwrap();
        let b = Boundaries { lower: vec![r], upper: vec![r], constant: r };
        let gs = estimate_gs_oc(&single, &b, &gs_spec(k, m, 1, false), 2 * n).unwrap();
        prop_assert_eq!(dtl.p_reject, gs.p_reject);
        prop_assert_eq!(dtl.pet, 0.0);
        Ok(())
    })
}

fn property_thread_determinism() -> std::result::Result<(), String> {
    let pools: Vec<rayon::ThreadPool> = [1, 3, 8]
        .iter()
        .map(|&t| rayon::ThreadPoolBuilder::new().num_threads(t).build().unwrap())
        .collect();
    let strategy = (1usize..=4, 1usize..=3, 16usize..700, 200usize..3000, any::<u64>(), 1.0f64..3.0);
    run_property("thread-count determinism", strategy, |(k, j, chunk, nsims, seed, c)| {
        let model = OutcomeModel::standard(k, 0.25).unwrap();
        let sim = SimConfig { seed, nsims, chunk_size: chunk };
        let run = || {
            let block = simulate_null_block(&StageSchedule::equal(1, j).unwrap(), &model, &sim).unwrap();
            let b = wang_tsiatis_boundaries(c, j, 0.0).unwrap();
            let oc = estimate_gs_oc(&block, &b, &gs_spec(k, 1, j, false), 10).unwrap();
            (block, oc)
        };
        let reference = pools[0].install(run);
        for pool in &pools[1..] {
            let other = pool.install(run);
            prop_assert!(other.0 == reference.0, "blocks differ across thread counts");
            prop_assert_eq!(other.1, reference.1);
        }
        Ok(())
    })
}

#[test]
fn criterion_8_property_suites() {
    let results = [
        property_covariance(),
        property_decision_totality(),
        property_enm_identity(),
        property_cp_roundtrip(),
        property_composite_single_outcome(),
        property_dtl_degenerate(),
        property_thread_determinism(),
    ];
    let failures: Vec<&String> = results.iter().filter_map(|r| r.as_ref().err()).collect();
    let ok = failures.is_empty();
    report(
        8,
        ok,
        &if ok {
            "7 suites x 200 random cases: covariance, decision totality, enm = K ess, CP inversion, composite K=1, DtL degenerate thresholds, thread-count determinism".to_string()
        } else {
            failures.iter().map(|s| s.as_str()).collect::<Vec<_>>().join("; ")
        },
    );
    assert!(ok);
}

/// Independent Box-Muller normal generator.
fn box_muller(rng: &mut ChaCha20Rng) -> (f64, f64) {
    let u1: f64 = 1.0 - rng.random::<f64>();
    let u2: f64 = rng.random::<f64>();
    let rad = (-2.0 * u1.ln()).sqrt();
    let ang = std::f64::consts::TAU * u2;
    (rad * ang.cos(), rad * ang.sin())
}

/// Direct estimate of P(at least m of K shared-correlation normals exceed
/// `c - shift_k`), using a one-factor construction instead of a Cholesky factor.
fn brute_force_reject(k: usize, m: usize, rho: f64, shift: &[f64], c: f64, reps: usize, seed: u64) -> f64 {
    use rayon::prelude::*;
    let chunks = 64usize;
    let per = reps / chunks;
    let hits: usize = (0..chunks)
        .into_par_iter()
        .map(|i| {
            let mut rng = ChaCha20Rng::seed_from_u64(seed ^ (i as u64).wrapping_mul(0x9E37_79B9_7F4A_7C15));
            let (a, b) = (rho.sqrt(), (1.0 - rho).sqrt());
            let mut pool = Vec::with_capacity(k + 2);
            let mut hits = 0;
            for _ in 0..per {
                pool.clear();
                while pool.len() < k + 1 {
                    let (x, y) = box_muller(&mut rng);
                    pool.push(x);
                    pool.push(y);
                }
                let common = pool[0];
                let above = (0..k).filter(|&q| a * common + b * pool[q + 1] + shift[q] > c).count();
                hits += (above >= m) as usize;
            }
            hits
        })
        .sum();
    hits as f64 / (per * chunks) as f64
}

#[test]
fn criterion_9_brute_force_single_stage() {
    let mut pick = ChaCha20Rng::seed_from_u64(2024);
    let reps = 10_000_000;
    let mut ok = true;
    let mut parts = Vec::new();
    for case in 0..10 {
        let k = pick.random_range(1..=4usize);
        let m = pick.random_range(1..=k);
        let rho = if k == 1 { 0.0 } else { pick.random_range(0.0..0.8) };
        let n = pick.random_range(10..80usize);
        let mu: Vec<f64> = (0..k).map(|_| pick.random_range(-0.1..0.4)).collect();
        let model = OutcomeModel::standard(k, rho).unwrap();
        let spec = gs_spec(k, m, 1, false);
        let null = simulate_null_block(&StageSchedule::equal(1, 1).unwrap(), &model, &SimConfig::new(100 + case, NSIMS)).unwrap();
        let (c, _) = calibrate_c(&null, &spec, &CalibrationOptions::default()).unwrap();
        let shifted = apply_mean_shift(&null, &mu, &StageSchedule::equal(n, 1).unwrap(), &model).unwrap();
        let b = wang_tsiatis_boundaries(c, 1, 0.0).unwrap();
        let engine = estimate_gs_oc(&shifted, &b, &spec, n).unwrap().p_reject;
        let shift: Vec<f64> = mu.iter().map(|x| x * (n as f64).sqrt()).collect();
        let direct = brute_force_reject(k, m, rho, &shift, c, reps, 7_000 + case);
        let p = direct.clamp(1e-6, 1.0 - 1e-6);
        let se = (p * (1.0 - p) / NSIMS as f64 + p * (1.0 - p) / reps as f64).sqrt();
        let good = (engine - direct).abs() <= 3.0 * se;
        ok &= good;
        parts.push(format!(
            "K={k} m={m} rho={rho:.2}: {engine:.4} vs {direct:.4} ({:.1} SE)",
            (engine - direct).abs() / se
        ));
    }
    report(9, ok, &parts.join("; "));
    assert!(ok);
}

#[test]
fn worked_interim_trace() {
    // K = 3, m = 1, K_max = 1 with CP = (0.6, 0.5, 0.2): continue with outcome 1 only
    let spec = dtl_spec(3, 1, 1);
    let (i1, i2) = (vec![32.0; 3], vec![64.0; 3]);
    let r = 2.273714;
    let z1: Vec<f64> = [0.6, 0.5, 0.2].iter().map(|&cp| cp_boundary(cp, r, 32.0, 64.0, 0.4)).collect();
    let go = evaluate_dtl_row(&z1, &[r + 0.01, -9.0, -9.0], &spec, r, &i1, &i2).unwrap();
    assert_eq!(go.decision, DtlDecision::GoFinal);
    assert_eq!(go.retained, 1);
    let nogo = evaluate_dtl_row(&z1, &[r - 0.01, 9.0, 9.0], &spec, r, &i1, &i2).unwrap();
    assert_eq!(nogo.decision, DtlDecision::NoGoFinal);
}
