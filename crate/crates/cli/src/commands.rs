use std::path::PathBuf;

use multiout::analysis::{correlation_sweep, cp_sensitivity, effect_grid, PreparedDesign, Realisation};
use multiout::dtl::cp_lookup_table;
use multiout::{DtlRealisation, GsRealisation};

use crate::config::{DesignKind, RunConfig};
use crate::error::CliError;
use crate::output::{ensure_dir, sig6, sig6_list, write_csv, write_text, Summary, Table};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Command {
    /// Search for (or evaluate) the configured design.
    Design,
    /// Compare the design with its comparator on a grid of true effects.
    Grid,
    /// Rerun both searches across shared correlations.
    Sweep,
    /// Rerun the drop-the-loser search across CP thresholds.
    Sensitivity,
}

/// What a command produced.
#[derive(Debug, Clone, PartialEq)]
pub struct Report {
    pub summary: Summary,
    pub files: Vec<PathBuf>,
}

pub fn run(command: Command, cfg: &RunConfig) -> Result<Report, CliError> {
    let dir = ensure_dir(&cfg.out)?;
    let mut files = Vec::new();
    let mut emit_text = |name: &str, text: &str| -> Result<(), CliError> {
        let path = dir.join(name);
        write_text(&path, text)?;
        files.push(path);
        Ok(())
    };
    emit_text("config.txt", &cfg.to_config_text())?;

    let mut tables = Vec::new();
    let summary = match command {
        Command::Design => {
            let design = cfg.realise(cfg.design, cfg.fixed)?;
            let summary = design_summary(cfg.design, &design);
            emit_text("summary.txt", &summary.render())?;
            match &design {
                Realisation::Gs(g) => tables.push(("boundaries.csv", gs_boundaries(g))),
                Realisation::Dtl(d) => {
                    tables.push(("boundaries.csv", dtl_boundaries(d)));
                    tables.push(("cp_lookup.csv", cp_lookup(d, &cfg.z_grid)));
                }
            }
            summary
        }
        Command::Grid => {
            let axes = cfg
                .grid
                .as_ref()
                .ok_or_else(|| CliError::config("grid_mu", "required by `oc grid`"))?;
            let a = cfg.realise(cfg.design, cfg.fixed)?;
            let b = cfg.realise(cfg.compare, cfg.fixed_b)?;
            let (sa, sb) = (design_summary(cfg.design, &a), design_summary(cfg.compare, &b));
            emit_text("summary_A.txt", &sa.render())?;
            emit_text("summary_B.txt", &sb.render())?;
            let grid = effect_grid(&PreparedDesign::new(a)?, &PreparedDesign::new(b)?, axes)?;
            let k = cfg.outcomes;
            let mut header: Vec<String> = (1..=k).map(|i| format!("mu_{i}")).collect();
            header.extend(
                [
                    "p_reject_A",
                    "p_reject_B",
                    "ess_A",
                    "ess_B",
                    "enm_A",
                    "enm_B",
                    "ess_ratio",
                    "enm_ratio",
                ]
                .map(String::from),
            );
            let mut t = Table::new(header);
            for p in &grid.points {
                let mut row: Vec<String> = p.mu.iter().map(|&m| sig6(m)).collect();
                row.extend(
                    [
                        p.a.p_reject,
                        p.b.p_reject,
                        p.a.ess,
                        p.b.ess,
                        p.a.enm,
                        p.b.enm,
                        p.ess_ratio(),
                        p.enm_ratio(),
                    ]
                    .map(sig6),
                );
                t.push(row);
            }
            tables.push(("grid.csv", t));
            let mut s = Summary::default();
            s.push("A", cfg.design.as_str());
            s.push("B", cfg.compare.as_str());
            s.push("grid_points", grid.points.len().to_string());
            s
        }
        Command::Sweep => {
            let curve = correlation_sweep(
                &cfg.request(cfg.design),
                &cfg.request(cfg.compare),
                &cfg.sigma,
                &cfg.rho_list,
                &cfg.sim(),
            )?;
            let mut header = vec!["rho".to_string()];
            for side in ["A", "B"] {
                for col in ["n", "N", "constant", "alpha_star", "power_star", "ess", "enm"] {
                    header.push(format!("{col}_{side}"));
                }
            }
            header.extend(["ess_ratio", "enm_ratio", "error"].map(String::from));
            let mut t = Table::new(header);
            for p in &curve.points {
                let mut row = vec![sig6(p.rho)];
                for d in [p.a, p.b] {
                    match d {
                        Some(d) => row.extend([
                            d.per_stage.to_string(),
                            d.max_sample_size.to_string(),
                            sig6(d.constant),
                            sig6(d.alpha_star),
                            sig6(d.power_star),
                            sig6(d.ess),
                            sig6(d.enm),
                        ]),
                        None => row.extend(std::iter::repeat_n(String::new(), 7)),
                    }
                }
                row.push(p.ess_ratio().map(sig6).unwrap_or_default());
                row.push(p.enm_ratio().map(sig6).unwrap_or_default());
                row.push(p.error.clone().unwrap_or_default());
                t.push(row);
            }
            tables.push(("sweep.csv", t));
            let mut s = Summary::default();
            s.push("A", cfg.design.as_str());
            s.push("B", cfg.compare.as_str());
            s.push("points", curve.points.len().to_string());
            s.push("valid_points", curve.points.iter().filter(|p| p.is_valid()).count().to_string());
            s
        }
        Command::Sensitivity => {
            if cfg.design != DesignKind::Dtl {
                return Err(CliError::config("design", "`oc sensitivity` needs design = dtl"));
            }
            let points = cp_sensitivity(
                &cfg.dtl_spec(),
                &cfg.model()?,
                &cfg.sim(),
                &cfg.dtl_options(),
                &cfg.cp_lower_list,
                &cfg.cp_upper_list,
            );
            let mut t = Table::new([
                "CP_L",
                "CP_U",
                "n",
                "N",
                "r",
                "alpha_star",
                "power_star",
                "ess",
                "enm",
                "pet",
                "expected_retained",
                "error",
            ]);
            for p in &points {
                let mut row = vec![sig6(p.cp_lower), sig6(p.cp_upper)];
                match &p.design {
                    Some(d) => {
                        row.extend([d.per_stage.to_string(), d.max_sample_size().to_string()]);
                        row.extend(
                            [
                                d.r,
                                d.alpha_star,
                                d.power_star,
                                d.lfc_oc.ess,
                                d.lfc_oc.enm,
                                d.lfc_oc.pet,
                                d.lfc_oc.expected_retained,
                            ]
                            .map(sig6),
                        );
                    }
                    None => row.extend(std::iter::repeat_n(String::new(), 9)),
                }
                row.push(p.error.clone().unwrap_or_default());
                t.push(row);
            }
            tables.push(("sensitivity.csv", t));
            let mut s = Summary::default();
            s.push("points", points.len().to_string());
            s.push("feasible_points", points.iter().filter(|p| p.design.is_some()).count().to_string());
            s
        }
    };
    for (name, table) in tables {
        let path = dir.join(name);
        write_csv(&path, &table)?;
        files.push(path);
    }
    Ok(Report { summary, files })
}

/// Key-value summary of a realisation. ESS, ENM and PET are at the least
/// favourable configuration; the `_null` variants at zero effects.
pub fn design_summary(kind: DesignKind, design: &Realisation) -> Summary {
    let mut s = Summary::default();
    s.push("design", kind.as_str());
    match design {
        Realisation::Gs(g) => gs_summary(&mut s, g),
        Realisation::Dtl(d) => dtl_summary(&mut s, d),
    }
    s
}

fn gs_summary(s: &mut Summary, g: &GsRealisation) {
    s.push("K", g.spec.outcomes.to_string());
    s.push("m", g.spec.required.to_string());
    s.push("J", g.spec.stages.to_string());
    s.num("Delta", g.spec.shape);
    s.num("C", g.constant());
    s.num("final_boundary", g.final_boundary());
    s.push("n", g.per_stage.to_string());
    s.push("N", g.max_sample_size().to_string());
    s.push("f", sig6_list(&g.boundaries.lower));
    s.push("e", sig6_list(&g.boundaries.upper));
    s.push("delta_beta", sig6_list(&g.delta_beta));
    s.num("alpha_star", g.alpha_star);
    s.num("power_star", g.power_star);
    s.num("ess", g.lfc_oc.ess);
    s.num("enm", g.lfc_oc.enm);
    s.num("pet", g.lfc_oc.pet);
    s.num("ess_null", g.null_oc.ess);
    s.num("enm_null", g.null_oc.enm);
    s.num("pet_null", g.null_oc.pet);
    s.push("seed", g.sim.seed.to_string());
    s.push("nsims", g.sim.nsims.to_string());
    s.push("warnings", "");
}

fn dtl_summary(s: &mut Summary, d: &DtlRealisation) {
    let bounds = d.interim_boundaries();
    s.push("K", d.spec.outcomes.to_string());
    s.push("m", d.spec.required.to_string());
    s.push("K_max", d.spec.max_retained.to_string());
    s.num("CP_L", d.spec.cp_lower);
    s.num("CP_U", d.spec.cp_upper);
    s.num("r", d.r);
    s.push("n", d.per_stage.to_string());
    s.push("N", d.max_sample_size().to_string());
    s.push("f", sig6_list(&bounds.iter().map(|b| b.lower).collect::<Vec<_>>()));
    s.push("e", sig6_list(&bounds.iter().map(|b| b.upper).collect::<Vec<_>>()));
    s.push("delta_beta", sig6_list(&d.delta_beta));
    s.num("alpha_star", d.alpha_star);
    s.num("power_star", d.power_star);
    s.num("ess", d.lfc_oc.ess);
    s.num("enm", d.lfc_oc.enm);
    s.num("pet", d.lfc_oc.pet);
    s.num("expected_retained", d.lfc_oc.expected_retained);
    s.num("ess_null", d.null_oc.ess);
    s.num("enm_null", d.null_oc.enm);
    s.num("pet_null", d.null_oc.pet);
    s.push("seed", d.sim.seed.to_string());
    s.push("nsims", d.sim.nsims.to_string());
    s.push("warnings", d.warnings.join("; "));
}

fn gs_boundaries(g: &GsRealisation) -> Table {
    let mut t = Table::new(["stage", "N", "f", "e"]);
    for j in 0..g.spec.stages {
        t.push(vec![
            (j + 1).to_string(),
            ((j + 1) * g.per_stage).to_string(),
            sig6(g.boundaries.lower[j]),
            sig6(g.boundaries.upper[j]),
        ]);
    }
    t
}

/// Interim z boundaries per outcome and the final critical value.
fn dtl_boundaries(d: &DtlRealisation) -> Table {
    let mut t = Table::new(["outcome", "f_interim", "e_interim", "r"]);
    for (k, b) in d.interim_boundaries().iter().enumerate() {
        t.push(vec![(k + 1).to_string(), sig6(b.lower), sig6(b.upper), sig6(d.r)]);
    }
    t
}

fn cp_lookup(d: &DtlRealisation, z_grid: &[f64]) -> Table {
    let mut t = Table::new(["outcome", "z", "cp"]);
    for row in cp_lookup_table(d, z_grid) {
        t.push(vec![(row.outcome + 1).to_string(), sig6(row.z), sig6(row.cp)]);
    }
    t
}
