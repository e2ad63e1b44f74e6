//! Run configuration: a flat `key = value` grammar layered from defaults, a
//! file and command-line overrides.
//!
//! Grammar:
//!
//! ```text
//! # comment            (also allowed after a value)
//! K = 3                 integer
//! delta1 = 0.4          scalar, broadcast to every outcome
//! delta1 = 0.4,0.2,0.4  one value per outcome
//! rho = 0.3             shared off-diagonal correlation
//! rho = 1,0.3;0.3,1     full matrix, rows separated by ';'
//! grid_mu = 0:0.6:0.1   inclusive range start:stop:step, or a comma list
//! ```
//!
//! Keys are case-sensitive. Unknown keys are rejected.

use std::collections::BTreeMap;
use std::fmt::{self, Write as _};
use std::path::{Path, PathBuf};
use std::str::FromStr;

use multiout::analysis::{DesignRequest, Realisation};
use multiout::{
    realise_dtl_design, realise_gs_design, CalibrationOptions, DtlDesignSpec, DtlSearchOptions, GsDesignSpec,
    GsSearchOptions, LfcMode, Matrix, OutcomeModel, SimConfig,
};

use crate::error::CliError;

type Result<T> = std::result::Result<T, CliError>;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum DesignKind {
    Gs,
    Composite,
    Dtl,
    SingleStage,
}

impl DesignKind {
    pub fn as_str(self) -> &'static str {
        match self {
            DesignKind::Gs => "gs",
            DesignKind::Composite => "composite",
            DesignKind::Dtl => "dtl",
            DesignKind::SingleStage => "single-stage",
        }
    }

    /// The usual comparator for each design.
    pub fn default_comparator(self) -> DesignKind {
        match self {
            DesignKind::Gs => DesignKind::Composite,
            DesignKind::Composite => DesignKind::Gs,
            DesignKind::Dtl => DesignKind::SingleStage,
            DesignKind::SingleStage => DesignKind::Dtl,
        }
    }
}

impl fmt::Display for DesignKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for DesignKind {
    type Err = String;

    fn from_str(s: &str) -> std::result::Result<Self, String> {
        match s {
            "gs" => Ok(DesignKind::Gs),
            "composite" => Ok(DesignKind::Composite),
            "dtl" => Ok(DesignKind::Dtl),
            "single-stage" => Ok(DesignKind::SingleStage),
            _ => Err(format!("expected gs, composite, dtl or single-stage, got `{s}`")),
        }
    }
}

/// Key-value pairs before interpretation. Later layers replace earlier ones.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct RawConfig {
    entries: BTreeMap<String, String>,
}

impl RawConfig {
    /// Parses config text. `source_name` is used in error messages.
    pub fn parse(text: &str, source_name: &str) -> Result<Self> {
        let mut entries = BTreeMap::new();
        for (i, line) in text.lines().enumerate() {
            let syntax = |reason: String| CliError::Syntax {
                source_name: source_name.to_string(),
                line: i + 1,
                reason,
            };
            let body = line.split('#').next().unwrap_or("").trim();
            if body.is_empty() {
                continue;
            }
            let (key, value) = split_pair(body).map_err(syntax)?;
            if entries.insert(key.to_string(), value.to_string()).is_some() {
                return Err(syntax(format!("duplicate key `{key}`")));
            }
        }
        Ok(RawConfig { entries })
    }

    pub fn from_file(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|source| CliError::Io {
            path: path.to_path_buf(),
            source,
        })?;
        Self::parse(&text, &path.display().to_string())
    }

    /// Parses one `key=value` override.
    pub fn set_pair(&mut self, pair: &str) -> Result<()> {
        let (k, v) = split_pair(pair.trim()).map_err(|reason| CliError::config("--param", reason))?;
        self.set(k, v);
        Ok(())
    }

    pub fn set(&mut self, key: &str, value: impl Into<String>) {
        self.entries.insert(key.to_string(), value.into());
    }

    pub fn get(&self, key: &str) -> Option<&str> {
        self.entries.get(key).map(String::as_str)
    }

    pub fn keys(&self) -> impl Iterator<Item = &str> {
        self.entries.keys().map(String::as_str)
    }
}

fn split_pair(s: &str) -> std::result::Result<(&str, &str), String> {
    let (k, v) = s
        .split_once('=')
        .ok_or_else(|| format!("expected `key = value`, got `{s}`"))?;
    let (k, v) = (k.trim(), v.trim());
    if k.is_empty() {
        return Err("empty key".into());
    }
    if v.is_empty() {
        return Err(format!("empty value for `{k}`"));
    }
    Ok((k, v))
}

const KEYS: &[&str] = &[
    "design",
    "compare",
    "K",
    "m",
    "J",
    "Delta",
    "alpha",
    "beta",
    "delta0",
    "delta1",
    "sigma",
    "rho",
    "K_max",
    "CP_L",
    "CP_U",
    "lfc",
    "strict",
    "seed",
    "nsims",
    "chunk_size",
    "nmin",
    "nmax",
    "n",
    "constant",
    "n_B",
    "constant_B",
    "grid_mu",
    "rho_list",
    "cp_lower_list",
    "cp_upper_list",
    "z_grid",
    "out",
];

/// Everything a run needs, fully validated.
#[derive(Debug, Clone, PartialEq)]
pub struct RunConfig {
    pub design: DesignKind,
    /// Comparator used by the `oc` commands.
    pub compare: DesignKind,
    pub outcomes: usize,
    pub required: usize,
    pub stages: usize,
    pub shape: f64,
    pub alpha: f64,
    pub beta: f64,
    pub delta0: Vec<f64>,
    pub delta1: Vec<f64>,
    pub sigma: Vec<f64>,
    /// Full correlation matrix, rows in order.
    pub rho: Vec<Vec<f64>>,
    pub max_retained: usize,
    pub cp_lower: f64,
    pub cp_upper: f64,
    pub lfc: LfcMode,
    pub strict: bool,
    pub seed: u64,
    pub nsims: usize,
    pub chunk_size: usize,
    pub nmin: usize,
    pub nmax: Option<usize>,
    /// Fixed `(n, constant)` for the main design; skips the search.
    pub fixed: Option<(usize, f64)>,
    /// Fixed `(n, constant)` for the comparator.
    pub fixed_b: Option<(usize, f64)>,
    /// One axis of true effects per outcome.
    pub grid: Option<Vec<Vec<f64>>>,
    pub rho_list: Vec<f64>,
    pub cp_lower_list: Vec<f64>,
    pub cp_upper_list: Vec<f64>,
    pub z_grid: Vec<f64>,
    pub out: PathBuf,
}

/// Reads `file` (if any), applies `overrides` in order and validates.
pub fn parse_config(file: Option<&Path>, overrides: &[(String, String)]) -> Result<RunConfig> {
    let mut raw = match file {
        Some(p) => RawConfig::from_file(p)?,
        None => RawConfig::default(),
    };
    for (k, v) in overrides {
        raw.set(k, v.clone());
    }
    RunConfig::from_raw(&raw)
}

struct Reader<'a> {
    raw: &'a RawConfig,
}

impl Reader<'_> {
    fn scalar<T: FromStr>(&self, key: &str, default: Option<T>) -> Result<T>
    where
        T::Err: fmt::Display,
    {
        match self.raw.get(key) {
            Some(v) => v
                .parse()
                .map_err(|e: T::Err| CliError::config(key, format!("cannot parse `{v}`: {e}"))),
            None => default.ok_or_else(|| CliError::config(key, "required but missing")),
        }
    }

    fn optional<T: FromStr>(&self, key: &str) -> Result<Option<T>>
    where
        T::Err: fmt::Display,
    {
        match self.raw.get(key) {
            Some(_) => self.scalar(key, None).map(Some),
            None => Ok(None),
        }
    }

    fn float_list(&self, key: &str, default: &str) -> Result<Vec<f64>> {
        parse_list(self.raw.get(key).unwrap_or(default), key)
    }

    /// A per-outcome vector: a scalar is broadcast, otherwise exactly `k` entries.
    fn per_outcome(&self, key: &str, default: f64, k: usize) -> Result<Vec<f64>> {
        let Some(v) = self.raw.get(key) else {
            return Ok(vec![default; k]);
        };
        broadcast(parse_list(v, key)?, k, key)
    }
}

fn parse_float(s: &str, key: &str) -> Result<f64> {
    let x: f64 = s
        .trim()
        .parse()
        .map_err(|e| CliError::config(key, format!("cannot parse `{}`: {e}", s.trim())))?;
    if !x.is_finite() {
        return Err(CliError::config(key, format!("`{}` is not finite", s.trim())));
    }
    Ok(x)
}

/// A comma list, or an inclusive range `start:stop:step`.
pub fn parse_list(s: &str, key: &str) -> Result<Vec<f64>> {
    if s.contains(':') {
        let parts: Vec<&str> = s.split(':').collect();
        if parts.len() != 3 {
            return Err(CliError::config(key, format!("range must be start:stop:step, got `{s}`")));
        }
        let (start, stop, step) = (
            parse_float(parts[0], key)?,
            parse_float(parts[1], key)?,
            parse_float(parts[2], key)?,
        );
        if step <= 0.0 || stop < start {
            return Err(CliError::config(key, "range needs step > 0 and stop >= start"));
        }
        // the small slack keeps `stop` when it is a multiple of `step` up to rounding
        let count = ((stop - start) / step + 1e-9).floor() as usize + 1;
        if count > 1_000_000 {
            return Err(CliError::config(key, "range has more than 10^6 points"));
        }
        // rounding to 12 decimals turns 0.30000000000000004 back into 0.3
        return Ok((0..count)
            .map(|i| ((start + i as f64 * step) * 1e12).round() / 1e12)
            .collect());
    }
    s.split(',').map(|p| parse_float(p, key)).collect()
}

fn broadcast(values: Vec<f64>, k: usize, key: &str) -> Result<Vec<f64>> {
    match values.len() {
        1 => Ok(vec![values[0]; k]),
        len if len == k => Ok(values),
        len => Err(CliError::config(key, format!("expected 1 or K = {k} values, got {len}"))),
    }
}

fn parse_rho(s: &str, k: usize) -> Result<Vec<Vec<f64>>> {
    if !s.contains(';') && !s.contains(',') {
        let r = parse_float(s, "rho")?;
        return Ok((0..k)
            .map(|i| (0..k).map(|j| if i == j { 1.0 } else { r }).collect())
            .collect());
    }
    let rows: Vec<Vec<f64>> = s
        .split(';')
        .map(|row| row.split(',').map(|p| parse_float(p, "rho")).collect())
        .collect::<Result<_>>()?;
    if rows.len() != k || rows.iter().any(|r| r.len() != k) {
        return Err(CliError::config("rho", format!("matrix must be {k} x {k}")));
    }
    Ok(rows)
}

fn parse_lfc(s: &str) -> Result<LfcMode> {
    match s {
        "first-m" => Ok(LfcMode::FirstM),
        "smallest-standardized" => Ok(LfcMode::SmallestStandardized),
        _ => Err(CliError::config(
            "lfc",
            format!("expected first-m or smallest-standardized, got `{s}`"),
        )),
    }
}

fn lfc_name(mode: LfcMode) -> &'static str {
    match mode {
        LfcMode::FirstM => "first-m",
        LfcMode::SmallestStandardized => "smallest-standardized",
    }
}

fn parse_fixed(r: &Reader<'_>, n_key: &str, c_key: &str) -> Result<Option<(usize, f64)>> {
    match (r.optional::<usize>(n_key)?, r.optional::<f64>(c_key)?) {
        (Some(n), Some(c)) => Ok(Some((n, c))),
        (None, None) => Ok(None),
        (Some(_), None) => Err(CliError::config(c_key, format!("must be given together with `{n_key}`"))),
        (None, Some(_)) => Err(CliError::config(n_key, format!("must be given together with `{c_key}`"))),
    }
}

fn list_text(values: &[f64]) -> String {
    values.iter().map(|v| v.to_string()).collect::<Vec<_>>().join(",")
}

impl RunConfig {
    /// Interprets and validates a layered key-value set.
    pub fn from_raw(raw: &RawConfig) -> Result<RunConfig> {
        for key in raw.keys() {
            let is_axis = key
                .strip_prefix("grid_mu_")
                .is_some_and(|i| i.parse::<usize>().is_ok());
            if !KEYS.contains(&key) && !is_axis {
                return Err(CliError::config(key, "unknown key"));
            }
        }
        let r = Reader { raw };
        let design: DesignKind = r.scalar("design", Some(DesignKind::Gs))?;
        let compare = r.scalar("compare", Some(design.default_comparator()))?;
        let k: usize = r.scalar("K", None)?;
        if k == 0 {
            return Err(CliError::config("K", "must be at least 1"));
        }
        let required: usize = r.scalar("m", None)?;
        let rho = match raw.get("rho") {
            Some(v) => parse_rho(v, k)?,
            None => parse_rho("0", k)?,
        };
        let grid = parse_grid(raw, k)?;

        let cfg = RunConfig {
            design,
            compare,
            outcomes: k,
            required,
            stages: r.scalar("J", Some(3))?,
            shape: r.scalar("Delta", Some(0.0))?,
            alpha: r.scalar("alpha", Some(0.025))?,
            beta: r.scalar("beta", Some(0.2))?,
            delta0: r.per_outcome("delta0", 0.2, k)?,
            delta1: r.per_outcome("delta1", 0.4, k)?,
            sigma: r.per_outcome("sigma", 1.0, k)?,
            rho,
            max_retained: r.scalar("K_max", Some(k - 1))?,
            cp_lower: r.scalar("CP_L", Some(0.3))?,
            cp_upper: r.scalar("CP_U", Some(0.95))?,
            lfc: parse_lfc(raw.get("lfc").unwrap_or("first-m"))?,
            strict: r.scalar("strict", Some(false))?,
            seed: r.scalar("seed", Some(1))?,
            nsims: r.scalar("nsims", Some(100_000))?,
            chunk_size: r.scalar("chunk_size", Some(SimConfig::new(0, 1).chunk_size))?,
            nmin: r.scalar("nmin", Some(1))?,
            nmax: r.optional("nmax")?,
            fixed: parse_fixed(&r, "n", "constant")?,
            fixed_b: parse_fixed(&r, "n_B", "constant_B")?,
            grid,
            rho_list: r.float_list("rho_list", "0:0.8:0.1")?,
            cp_lower_list: r.float_list("cp_lower_list", "0.1,0.2,0.3,0.4")?,
            cp_upper_list: r.float_list("cp_upper_list", "0.8,0.9,0.95")?,
            z_grid: r.float_list("z_grid", "-2:4:0.25")?,
            out: PathBuf::from(raw.get("out").unwrap_or("multiout-out")),
        };
        cfg.validate()?;
        Ok(cfg)
    }

    fn uses(&self, kind: DesignKind) -> bool {
        self.design == kind || self.compare == kind
    }

    fn validate(&self) -> Result<()> {
        for (name, v) in [("CP_L", self.cp_lower), ("CP_U", self.cp_upper)] {
            if !(0.0..=1.0).contains(&v) {
                return Err(CliError::config(name, format!("{v} is outside [0, 1]")));
            }
        }
        if self.cp_lower >= self.cp_upper {
            return Err(CliError::config(
                "CP_U",
                format!("CP_L = {} must be below CP_U = {}", self.cp_lower, self.cp_upper),
            ));
        }
        if self.nmin == 0 {
            return Err(CliError::config("nmin", "must be at least 1"));
        }
        if let Some(nmax) = self.nmax {
            if nmax < self.nmin {
                return Err(CliError::config("nmax", format!("{nmax} is below nmin = {}", self.nmin)));
            }
        }
        for (name, fixed) in [("n", self.fixed), ("n_B", self.fixed_b)] {
            if fixed.is_some_and(|(n, _)| n == 0) {
                return Err(CliError::config(name, "must be at least 1"));
            }
        }
        if let Some(axes) = &self.grid {
            if axes.iter().any(Vec::is_empty) {
                return Err(CliError::config("grid_mu", "every axis needs at least one value"));
            }
        }
        for (name, list) in [
            ("rho_list", &self.rho_list),
            ("cp_lower_list", &self.cp_lower_list),
            ("cp_upper_list", &self.cp_upper_list),
            ("z_grid", &self.z_grid),
        ] {
            if list.is_empty() {
                return Err(CliError::config(name, "must not be empty"));
            }
        }
        self.sim().validate()?;
        self.model()?;
        for kind in [DesignKind::Gs, DesignKind::Composite, DesignKind::SingleStage] {
            if self.uses(kind) {
                self.gs_spec(kind).validate()?;
            }
        }
        if self.uses(DesignKind::Dtl) {
            self.dtl_spec().validate()?;
        }
        Ok(())
    }

    /// Outcome model with zero true effects.
    pub fn model(&self) -> multiout::Result<OutcomeModel> {
        let rho = Matrix::from_rows(&self.rho).ok_or(multiout::DesignError::DimensionMismatch {
            what: "rho",
            expected: self.outcomes,
            actual: self.rho.len(),
        })?;
        OutcomeModel::new(vec![0.0; self.outcomes], self.sigma.clone(), rho)
    }

    pub fn sim(&self) -> SimConfig {
        SimConfig {
            seed: self.seed,
            nsims: self.nsims,
            chunk_size: self.chunk_size,
        }
    }

    /// Group-sequential spec for `kind`; single-stage forces `J = 1`.
    pub fn gs_spec(&self, kind: DesignKind) -> GsDesignSpec {
        GsDesignSpec {
            stages: if kind == DesignKind::SingleStage { 1 } else { self.stages },
            outcomes: self.outcomes,
            required: self.required,
            shape: self.shape,
            alpha: self.alpha,
            beta: self.beta,
            delta0: self.delta0.clone(),
            delta1: self.delta1.clone(),
            composite: kind == DesignKind::Composite,
        }
    }

    pub fn dtl_spec(&self) -> DtlDesignSpec {
        DtlDesignSpec {
            outcomes: self.outcomes,
            required: self.required,
            max_retained: self.max_retained,
            cp_lower: self.cp_lower,
            cp_upper: self.cp_upper,
            alpha: self.alpha,
            beta: self.beta,
            delta0: self.delta0.clone(),
            delta1: self.delta1.clone(),
        }
    }

    fn calibration(&self) -> CalibrationOptions {
        CalibrationOptions {
            strict: self.strict,
            ..CalibrationOptions::default()
        }
    }

    pub fn request(&self, kind: DesignKind) -> DesignRequest {
        match kind {
            DesignKind::Dtl => DesignRequest::Dtl {
                spec: self.dtl_spec(),
                opts: self.dtl_options(),
            },
            _ => {
                let defaults = GsSearchOptions::default();
                DesignRequest::Gs {
                    spec: self.gs_spec(kind),
                    opts: GsSearchOptions {
                        nmin: self.nmin,
                        n_cap: self.nmax.unwrap_or(defaults.n_cap),
                        lfc_mode: self.lfc,
                        calibration: self.calibration(),
                    },
                }
            }
        }
    }

    pub fn dtl_options(&self) -> DtlSearchOptions {
        let defaults = DtlSearchOptions::default();
        DtlSearchOptions {
            nmin: self.nmin,
            nmax: self.nmax.unwrap_or(defaults.nmax),
            lfc_mode: self.lfc,
            calibration: self.calibration(),
        }
    }

    /// Searches for `kind`, or evaluates the fixed `(n, constant)` when given.
    pub fn realise(&self, kind: DesignKind, fixed: Option<(usize, f64)>) -> multiout::Result<Realisation> {
        let model = self.model()?;
        let sim = self.sim();
        match (kind, fixed) {
            (DesignKind::Dtl, Some((n, r))) => {
                realise_dtl_design(&self.dtl_spec(), &model, &sim, n, r, self.lfc).map(Realisation::Dtl)
            }
            (_, Some((n, c))) => {
                realise_gs_design(&self.gs_spec(kind), &model, &sim, n, c, self.lfc).map(Realisation::Gs)
            }
            (_, None) => self.request(kind).search(&model, &sim),
        }
    }

    /// Config text that parses back to an identical value.
    pub fn to_config_text(&self) -> String {
        let mut s = String::new();
        let mut put = |k: &str, v: String| {
            let _ = writeln!(s, "{k} = {v}");
        };
        put("design", self.design.to_string());
        put("compare", self.compare.to_string());
        put("K", self.outcomes.to_string());
        put("m", self.required.to_string());
        put("J", self.stages.to_string());
        put("Delta", self.shape.to_string());
        put("alpha", self.alpha.to_string());
        put("beta", self.beta.to_string());
        put("delta0", list_text(&self.delta0));
        put("delta1", list_text(&self.delta1));
        put("sigma", list_text(&self.sigma));
        put(
            "rho",
            self.rho.iter().map(|r| list_text(r)).collect::<Vec<_>>().join(";"),
        );
        put("K_max", self.max_retained.to_string());
        put("CP_L", self.cp_lower.to_string());
        put("CP_U", self.cp_upper.to_string());
        put("lfc", lfc_name(self.lfc).to_string());
        put("strict", self.strict.to_string());
        put("seed", self.seed.to_string());
        put("nsims", self.nsims.to_string());
        put("chunk_size", self.chunk_size.to_string());
        put("nmin", self.nmin.to_string());
        if let Some(n) = self.nmax {
            put("nmax", n.to_string());
        }
        if let Some((n, c)) = self.fixed {
            put("n", n.to_string());
            put("constant", c.to_string());
        }
        if let Some((n, c)) = self.fixed_b {
            put("n_B", n.to_string());
            put("constant_B", c.to_string());
        }
        if let Some(axes) = &self.grid {
            for (i, axis) in axes.iter().enumerate() {
                put(&format!("grid_mu_{}", i + 1), list_text(axis));
            }
        }
        put("rho_list", list_text(&self.rho_list));
        put("cp_lower_list", list_text(&self.cp_lower_list));
        put("cp_upper_list", list_text(&self.cp_upper_list));
        put("z_grid", list_text(&self.z_grid));
        put("out", self.out.display().to_string());
        s
    }
}

fn parse_grid(raw: &RawConfig, k: usize) -> Result<Option<Vec<Vec<f64>>>> {
    let per_axis: Vec<&str> = raw.keys().filter(|key| key.starts_with("grid_mu_")).collect();
    if let Some(shared) = raw.get("grid_mu") {
        if let Some(key) = per_axis.first() {
            return Err(CliError::config(*key, "cannot be combined with `grid_mu`"));
        }
        let axis = parse_list(shared, "grid_mu")?;
        return Ok(Some(vec![axis; k]));
    }
    if per_axis.is_empty() {
        return Ok(None);
    }
    let mut axes = Vec::with_capacity(k);
    for i in 1..=k {
        let key = format!("grid_mu_{i}");
        let v = raw
            .get(&key)
            .ok_or_else(|| CliError::config(key.clone(), "missing; give every axis or use `grid_mu`"))?;
        axes.push(parse_list(v, &key)?);
    }
    for key in per_axis {
        let idx: usize = key["grid_mu_".len()..].parse().unwrap_or(0);
        if idx == 0 || idx > k {
            return Err(CliError::config(key, format!("axis index must be in 1..={k}")));
        }
    }
    Ok(Some(axes))
}
