//! JSON scenarios: a model, a field and a list of checks, executed into a report.
//!
//! ```json
//! {
//!   "name": "flat circle",
//!   "seed": 7,
//!   "model": {"kind": "circle", "n": 200, "circumference": 6.283185307179586},
//!   "field": {"kind": "cosine", "offset": 2.0, "amplitude": 1.0, "frequency": 1.0},
//!   "checks": [
//!     {"check": "li_yau", "T": 0.5},
//!     {"check": "bochner", "tolerance": {"c": 10.0, "power": 2.0}}
//!   ]
//! }
//! ```
//!
//! A tolerance is either an absolute number or `{"c": C, "power": p}`, meaning
//! `C h^p` for the grid spacing `h` of the level being run.

use std::collections::BTreeMap;
use std::fmt::{self, Write as _};

use serde::{Deserialize, Serialize};

use crate::calculus::{bochner_margin, ScalarField};
use crate::error::LabError;
use crate::fields::{bochner_oracle_error, FieldSpec, ResolvedField};
use crate::heat::SpectralSolver;
use crate::inequalities::{
    baudoin_garofalo_check, bakry_qian_check, be_flow_check, eks_check, harnack_check, harnack_scan,
    kernel_corollary_suite, li_yau_check_scaled, matching_gamma, phi_derivative_check, pre_li_yau_check,
    prop2_check, SquaredProfile, VProfile,
};
use crate::report::{InequalityReport, ReportParams, Verdict};
use crate::space::{CurvatureDimension, ModelSpace, ModelSpec};
use crate::transport::{cd_star_check, harnack_transport_check, DiscreteMeasure};

pub const VERSION: &str = env!("CARGO_PKG_VERSION");

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum Tolerance {
    Absolute(f64),
    Scaled {
        c: f64,
        #[serde(default = "two")]
        power: f64,
    },
}

fn two() -> f64 {
    2.0
}

impl Tolerance {
    pub fn resolve(self, h: f64) -> f64 {
        match self {
            Tolerance::Absolute(v) => v,
            Tolerance::Scaled { c, power } => c * h.powf(power),
        }
    }

    fn validate(self) -> std::result::Result<(), String> {
        let ok = match self {
            Tolerance::Absolute(v) => v > 0.0 && v.is_finite(),
            Tolerance::Scaled { c, power } => c > 0.0 && c.is_finite() && power.is_finite(),
        };
        if ok {
            Ok(())
        } else {
            Err(format!("tolerance must be positive and finite, got {self:?}"))
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "check", rename_all = "snake_case", deny_unknown_fields)]
pub enum CheckSpec {
    LiYau {
        #[serde(alias = "T")]
        t: f64,
        #[serde(default)]
        dim: Option<f64>,
        #[serde(default)]
        bound_scale: Option<f64>,
        #[serde(default)]
        tolerance: Option<Tolerance>,
    },
    BakryQian {
        #[serde(alias = "T")]
        t: f64,
        #[serde(default)]
        tolerance: Option<Tolerance>,
    },
    BaudoinGarofalo {
        #[serde(alias = "T")]
        t: f64,
        #[serde(default)]
        tolerance: Option<Tolerance>,
    },
    Harnack {
        x: usize,
        y: usize,
        s: f64,
        t: f64,
        #[serde(default)]
        tolerance: Option<Tolerance>,
    },
    HarnackScan {
        pairs: Vec<[usize; 2]>,
        times: Vec<[f64; 2]>,
        #[serde(default)]
        tolerance: Option<Tolerance>,
    },
    HarnackTransport {
        x: usize,
        y: usize,
        s: f64,
        t: f64,
        /// Ball radius; two grid steps when absent.
        #[serde(default)]
        radius: Option<f64>,
        #[serde(default)]
        tolerance: Option<Tolerance>,
    },
    BeFlow {
        t: f64,
        #[serde(default)]
        tolerance: Option<Tolerance>,
    },
    Eks {
        t: f64,
        #[serde(default)]
        tolerance: Option<Tolerance>,
    },
    Bochner {
        #[serde(default)]
        tolerance: Option<Tolerance>,
    },
    PhiDerivative {
        #[serde(alias = "T")]
        horizon: f64,
        t: f64,
        dt: f64,
        #[serde(default)]
        test: Option<FieldSpec>,
        #[serde(default)]
        tolerance: Option<Tolerance>,
    },
    Prop2 {
        #[serde(alias = "T")]
        horizon: f64,
        grid: Vec<f64>,
        dt: f64,
        #[serde(default)]
        test: Option<FieldSpec>,
        #[serde(default)]
        tolerance: Option<Tolerance>,
    },
    PreLiYau {
        profile: VProfile,
        #[serde(default)]
        tolerance: Option<Tolerance>,
    },
    KernelCorollary {
        x: usize,
        times: Vec<f64>,
        #[serde(default)]
        tolerance: Option<Tolerance>,
    },
    CdStar {
        t: f64,
        target: FieldSpec,
        #[serde(default)]
        n_prime: Option<f64>,
        #[serde(default)]
        tolerance: Option<Tolerance>,
    },
    EigenError {
        #[serde(default = "first_mode")]
        mode: usize,
        #[serde(default)]
        tolerance: Option<Tolerance>,
    },
}

fn first_mode() -> usize {
    1
}

impl CheckSpec {
    pub fn name(&self) -> &'static str {
        match self {
            CheckSpec::LiYau { .. } => "li_yau",
            CheckSpec::BakryQian { .. } => "bakry_qian",
            CheckSpec::BaudoinGarofalo { .. } => "baudoin_garofalo",
            CheckSpec::Harnack { .. } => "harnack",
            CheckSpec::HarnackScan { .. } => "harnack_scan",
            CheckSpec::HarnackTransport { .. } => "harnack_transport",
            CheckSpec::BeFlow { .. } => "be_flow",
            CheckSpec::Eks { .. } => "eks",
            CheckSpec::Bochner { .. } => "bochner",
            CheckSpec::PhiDerivative { .. } => "phi_derivative",
            CheckSpec::Prop2 { .. } => "prop2",
            CheckSpec::PreLiYau { .. } => "pre_li_yau",
            CheckSpec::KernelCorollary { .. } => "kernel_corollary",
            CheckSpec::CdStar { .. } => "cd_star",
            CheckSpec::EigenError { .. } => "eigen_error",
        }
    }

    fn tolerance_override(&self) -> Option<Tolerance> {
        match self {
            CheckSpec::LiYau { tolerance, .. }
            | CheckSpec::BakryQian { tolerance, .. }
            | CheckSpec::BaudoinGarofalo { tolerance, .. }
            | CheckSpec::Harnack { tolerance, .. }
            | CheckSpec::HarnackScan { tolerance, .. }
            | CheckSpec::HarnackTransport { tolerance, .. }
            | CheckSpec::BeFlow { tolerance, .. }
            | CheckSpec::Eks { tolerance, .. }
            | CheckSpec::Bochner { tolerance }
            | CheckSpec::PhiDerivative { tolerance, .. }
            | CheckSpec::Prop2 { tolerance, .. }
            | CheckSpec::PreLiYau { tolerance, .. }
            | CheckSpec::KernelCorollary { tolerance, .. }
            | CheckSpec::CdStar { tolerance, .. }
            | CheckSpec::EigenError { tolerance, .. } => *tolerance,
        }
    }

    pub fn default_tolerance(&self) -> Tolerance {
        use Tolerance::{Absolute, Scaled};
        match self {
            CheckSpec::LiYau { .. } | CheckSpec::Harnack { .. } | CheckSpec::HarnackScan { .. } => Absolute(1e-6),
            CheckSpec::HarnackTransport { .. } | CheckSpec::PreLiYau { .. } => Absolute(1e-6),
            CheckSpec::BakryQian { .. } | CheckSpec::BaudoinGarofalo { .. } | CheckSpec::KernelCorollary { .. } => {
                Absolute(1e-5)
            }
            CheckSpec::PhiDerivative { .. } | CheckSpec::Prop2 { .. } => Absolute(1e-4),
            CheckSpec::BeFlow { .. } | CheckSpec::Eks { .. } | CheckSpec::Bochner { .. } | CheckSpec::EigenError { .. } => {
                Scaled { c: 10.0, power: 2.0 }
            }
            CheckSpec::CdStar { .. } => Scaled { c: 1.0, power: 1.0 },
        }
    }

    pub fn tolerance(&self) -> Tolerance {
        self.tolerance_override().unwrap_or_else(|| self.default_tolerance())
    }

    /// Node indices are given on the base grid; refined grids use the nearest node.
    fn node_indices_mut(&mut self) -> Vec<&mut usize> {
        match self {
            CheckSpec::Harnack { x, y, .. } | CheckSpec::HarnackTransport { x, y, .. } => vec![x, y],
            CheckSpec::HarnackScan { pairs, .. } => pairs.iter_mut().flat_map(|p| p.iter_mut()).collect(),
            CheckSpec::KernelCorollary { x, .. } => vec![x],
            _ => Vec::new(),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CdOverride {
    pub k: f64,
    pub n: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SweepSpec {
    #[serde(default)]
    pub levels: Option<usize>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Scenario {
    #[serde(default)]
    pub name: String,
    #[serde(default)]
    pub seed: u64,
    pub model: ModelSpec,
    pub field: FieldSpec,
    /// Curvature-dimension pair handed to the checks; the model's own pair when absent.
    #[serde(default)]
    pub cd: Option<CdOverride>,
    pub checks: Vec<CheckSpec>,
    #[serde(default)]
    pub sweep: Option<SweepSpec>,
}

/// Configuration problem, optionally anchored to a line of the scenario file.
#[derive(Debug, Clone, PartialEq)]
pub struct ConfigError {
    pub line: Option<usize>,
    pub message: String,
}

impl fmt::Display for ConfigError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self.line {
            Some(line) => write!(f, "line {line}: {}", self.message),
            None => write!(f, "{}", self.message),
        }
    }
}

impl std::error::Error for ConfigError {}

fn config(line: Option<usize>, message: impl Into<String>) -> ConfigError {
    ConfigError { line, message: message.into() }
}

/// A scenario together with the source text it came from.
#[derive(Debug, Clone)]
pub struct LoadedScenario {
    pub scenario: Scenario,
    check_lines: Vec<Option<usize>>,
    model_line: Option<usize>,
}

impl LoadedScenario {
    pub fn parse(text: &str) -> std::result::Result<Self, ConfigError> {
        let check_lines = key_lines(text, "check");
        let scenario: Scenario = serde_json::from_str(text).map_err(|e| {
            if e.is_data() {
                if let Some(found) = first_bad_check(text, &check_lines) {
                    return found;
                }
            }
            let line = (e.line() > 0).then_some(e.line());
            config(line, format!("{e}"))
        })?;
        let model_line = key_lines(text, "model").first().copied().flatten();
        let loaded = Self {
            check_lines: (0..scenario.checks.len()).map(|i| check_lines.get(i).copied().flatten()).collect(),
            scenario,
            model_line,
        };
        loaded.validate()?;
        Ok(loaded)
    }

    pub fn from_scenario(scenario: Scenario) -> std::result::Result<Self, ConfigError> {
        let loaded = Self { check_lines: vec![None; scenario.checks.len()], scenario, model_line: None };
        loaded.validate()?;
        Ok(loaded)
    }

    fn validate(&self) -> std::result::Result<(), ConfigError> {
        if self.scenario.checks.is_empty() {
            return Err(config(None, "scenario lists no checks"));
        }
        self.scenario.model.build().map_err(|e| config(self.model_line, format!("model: {e}")))?;
        if let Some(cd) = self.scenario.cd {
            CurvatureDimension::new(cd.k, cd.n).map_err(|e| config(None, format!("cd: {e}")))?;
        }
        for (i, check) in self.scenario.checks.iter().enumerate() {
            check
                .tolerance()
                .validate()
                .map_err(|m| config(self.check_lines[i], format!("checks[{i}] ({}): {m}", check.name())))?;
        }
        Ok(())
    }

    fn check_error(&self, index: usize, name: &str, err: &LabError) -> ConfigError {
        config(self.check_lines[index], format!("checks[{index}] ({name}): {err}"))
    }
}

/// Re-reads the check list entry by entry, since errors inside tagged entries are
/// reported by serde at the end of the buffered object.
fn first_bad_check(text: &str, check_lines: &[Option<usize>]) -> Option<ConfigError> {
    let value: serde_json::Value = serde_json::from_str(text).ok()?;
    let checks = value.get("checks")?.as_array()?;
    checks.iter().enumerate().find_map(|(i, c)| {
        serde_json::from_value::<CheckSpec>(c.clone())
            .err()
            .map(|e| config(check_lines.get(i).copied().flatten(), format!("checks[{i}]: {e}")))
    })
}

/// 1-based lines of every occurrence of `"key":`, in file order.
fn key_lines(text: &str, key: &str) -> Vec<Option<usize>> {
    let needle = format!("\"{key}\"");
    let mut out = Vec::new();
    let mut from = 0;
    while let Some(pos) = text[from..].find(&needle) {
        let at = from + pos;
        from = at + needle.len();
        if text[from..].trim_start().starts_with(':') {
            out.push(Some(text[..at].matches('\n').count() + 1));
        }
    }
    out
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RunOptions {
    pub seed: Option<u64>,
    pub tolerance_scale: f64,
}

impl Default for RunOptions {
    fn default() -> Self {
        Self { seed: None, tolerance_scale: 1.0 }
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct CheckOutcome {
    pub index: usize,
    pub check: String,
    pub tolerance: f64,
    pub verdict: Verdict,
    pub margins_file: String,
    /// Scalar summary used by refinement sweeps.
    pub defect: f64,
    pub reports: Vec<InequalityReport>,
}

#[derive(Debug, Clone, Serialize)]
struct ModelSummary {
    spec: ModelSpec,
    name: String,
    nodes: usize,
    spacing: f64,
    fingerprint: String,
    expected_cd: CurvatureDimension,
}

#[derive(Debug, Clone, Default, Serialize)]
pub struct Summary {
    pub checks: usize,
    pub pass: usize,
    pub fail: usize,
    pub error: usize,
    pub vacuous_pass: usize,
    pub outside_regime: usize,
}

#[derive(Debug, Clone, Serialize)]
pub struct RunReport {
    pub version: &'static str,
    pub scenario: String,
    pub seed: u64,
    pub tolerance_scale: f64,
    model: ModelSummary,
    pub cd: CurvatureDimension,
    pub checks: Vec<CheckOutcome>,
    pub summary: Summary,
    pub exit_code: i32,
}

impl RunReport {
    pub fn to_json(&self) -> String {
        let mut s = serde_json::to_string_pretty(self).expect("report serializes");
        s.push('\n');
        s
    }

    /// `(file name, contents)` for every margin table.
    pub fn margin_files(&self) -> Vec<(String, String)> {
        self.checks.iter().map(|c| (c.margins_file.clone(), margins_table(&c.reports))).collect()
    }
}

fn margins_table(reports: &[InequalityReport]) -> String {
    let mut out = String::from("report,node,margin,asserted\n");
    for (r, report) in reports.iter().enumerate() {
        for (i, (m, a)) in report.margin_field.iter().zip(&report.asserted).enumerate() {
            let _ = writeln!(out, "{r},{i},{m:.17e},{}", u8::from(*a));
        }
    }
    out
}

fn verdict_of(reports: &[InequalityReport]) -> Verdict {
    let vs: Vec<Verdict> = reports.iter().map(|r| r.verdict).collect();
    if vs.contains(&Verdict::Error) {
        Verdict::Error
    } else if vs.contains(&Verdict::Fail) {
        Verdict::Fail
    } else if vs.iter().all(|v| *v == Verdict::OutsideRegime) && !vs.is_empty() {
        Verdict::OutsideRegime
    } else if vs.iter().all(|v| *v == Verdict::VacuousPass) && !vs.is_empty() {
        Verdict::VacuousPass
    } else {
        Verdict::Pass
    }
}

fn error_report(name: &str, space: &ModelSpace, cd: CurvatureDimension, tolerance: f64, err: &LabError) -> InequalityReport {
    InequalityReport {
        name: name.to_string(),
        params: ReportParams::new(space, cd, &[]),
        margin_field: Vec::new(),
        asserted: Vec::new(),
        min_margin: f64::NAN,
        unasserted_min_margin: None,
        tolerance,
        verdict: Verdict::Error,
        notes: vec![err.to_string()],
        extras: BTreeMap::new(),
    }
}

/// Exact nonzero eigenvalue `mode` of the continuum operator, where known.
pub fn exact_eigenvalue(spec: &ModelSpec, mode: usize) -> Option<f64> {
    let k = mode as f64;
    match *spec {
        ModelSpec::Interval { length, .. } => Some(-(k * std::f64::consts::PI / length).powi(2)),
        ModelSpec::Circle { circumference, .. } => {
            let m = mode.div_ceil(2) as f64;
            Some(-(2.0 * std::f64::consts::PI * m / circumference).powi(2))
        }
        ModelSpec::SphereModel { dim, .. } => Some(-k * (k + dim - 1.0)),
        ModelSpec::HyperbolicModel { .. } => None,
    }
}

struct Level<'a> {
    space: &'a ModelSpace,
    solver: &'a SpectralSolver,
    field: &'a ScalarField,
    resolved: &'a ResolvedField,
    cd: CurvatureDimension,
    seed: u64,
}

/// Runs one check; `Ok((reports, defect))`, or the underlying error.
fn execute(check: &CheckSpec, lv: &Level, tol: f64) -> crate::error::Result<(Vec<InequalityReport>, f64)> {
    let (space, solver, f, cd) = (lv.space, lv.solver, lv.field, lv.cd);
    let one = |r: InequalityReport| {
        let defect = (-r.min_margin).max(0.0);
        (vec![r], defect)
    };
    let test_field = |spec: &Option<FieldSpec>| match spec {
        Some(s) => s.sample(space, lv.seed),
        None => Ok(ScalarField::constant(space, 1.0)),
    };
    Ok(match check {
        CheckSpec::LiYau { t, dim, bound_scale, .. } => {
            one(li_yau_check_scaled(solver, f, *t, dim.unwrap_or(cd.n), tol, bound_scale.unwrap_or(1.0))?)
        }
        CheckSpec::BakryQian { t, .. } => one(bakry_qian_check(solver, f, *t, cd, tol)?),
        CheckSpec::BaudoinGarofalo { t, .. } => one(baudoin_garofalo_check(solver, f, *t, cd, tol)?),
        CheckSpec::Harnack { x, y, s, t, .. } => one(harnack_check(solver, f, *x, *y, *s, *t, cd, tol)?),
        CheckSpec::HarnackScan { pairs, times, .. } => {
            let pairs: Vec<(usize, usize)> = pairs.iter().map(|p| (p[0], p[1])).collect();
            let times: Vec<(f64, f64)> = times.iter().map(|p| (p[0], p[1])).collect();
            one(harnack_scan(solver, f, &pairs, &times, cd, tol)?)
        }
        CheckSpec::HarnackTransport { x, y, s, t, radius, .. } => {
            if *x >= space.len() || *y >= space.len() {
                return Err(LabError::InvalidParameter(format!("node pair ({x}, {y}) out of range")));
            }
            let r = radius.unwrap_or(2.0 * space.spacing());
            one(harnack_transport_check(solver, f, *x, *y, *s, *t, cd, r, tol)?)
        }
        CheckSpec::BeFlow { t, .. } => one(be_flow_check(solver, f, *t, cd, tol)?),
        CheckSpec::Eks { t, .. } => one(eks_check(solver, f, *t, cd, tol)?),
        CheckSpec::Bochner { .. } => {
            let margin = bochner_margin(space, f, cd)?.into_inner();
            let report = InequalityReport::from_field("bochner", ReportParams::new(space, cd, &[]), margin, space.interior_mask(), tol)?;
            let extent = space.nodes()[space.len() - 1] - space.nodes()[0];
            let (lo, hi) = (space.nodes()[0] + 0.1 * extent, space.nodes()[space.len() - 1] - 0.1 * extent);
            match bochner_oracle_error(space, lv.resolved, cd, lo, hi) {
                Ok(err) => (vec![report.extra("oracle_error", err)], err),
                Err(_) => one(report),
            }
        }
        CheckSpec::PhiDerivative { horizon, t, dt, test, .. } => {
            let d = phi_derivative_check(solver, f, *horizon, *t, &test_field(test)?, *dt)?;
            let params = ReportParams::new(space, cd, &[*horizon, *t]).with("dt", *dt);
            let r = InequalityReport::scalar("phi_derivative", params, -d.defect, tol)?
                .extra("central_difference", d.central_difference)
                .extra("discrete_derivative", d.discrete_derivative)
                .extra("gamma2_form", d.gamma2_form)
                .extra("time_defect", d.time_defect)
                .extra("space_defect", d.space_defect);
            (vec![r], d.defect)
        }
        CheckSpec::Prop2 { horizon, grid, dt, test, .. } => {
            let profile = VProfile::linear(*horizon)?;
            let a = SquaredProfile(&profile);
            let gamma_fn = |t: f64| matching_gamma(&a, t, cd);
            one(prop2_check(solver, f, *horizon, &a, &gamma_fn, &test_field(test)?, grid, *dt, cd, tol)?)
        }
        CheckSpec::PreLiYau { profile, .. } => {
            let profile = profile.clone().validated()?;
            one(pre_li_yau_check(solver, f, &profile, cd, tol)?)
        }
        CheckSpec::KernelCorollary { x, times, .. } => {
            if *x >= space.len() {
                return Err(LabError::InvalidParameter(format!("base node {x} out of range")));
            }
            let reports = kernel_corollary_suite(solver, *x, cd, times, tol)?;
            let defect = reports.iter().map(|r| (-r.min_margin).max(0.0)).fold(0.0, f64::max);
            (reports, defect)
        }
        CheckSpec::CdStar { t, target, n_prime, .. } => {
            let mu0 = DiscreteMeasure::from_density(space, f)?;
            let mu1 = DiscreteMeasure::from_density(space, &target.sample(space, lv.seed)?)?;
            let np = n_prime.unwrap_or(cd.n);
            let outcome = cd_star_check(space, &mu0, &mu1, *t, cd, np)?;
            let params = ReportParams::new(space, cd, &[*t]).with("n_prime", np);
            let mut r = InequalityReport::scalar("cd_star", params, outcome.margin, tol)?;
            if outcome.vacuous {
                r.verdict = Verdict::VacuousPass;
                r = r.note("an infinite distortion coefficient makes the bound vacuous");
            }
            one(r)
        }
        CheckSpec::EigenError { mode, .. } => {
            let spec = space.spec().ok_or_else(|| LabError::InvalidParameter("model has no constructor spec".into()))?;
            let exact = exact_eigenvalue(spec, *mode).ok_or_else(|| {
                LabError::InvalidParameter(format!("no closed-form spectrum for {}", spec.name()))
            })?;
            let discrete = *solver
                .eigenvalues()
                .get(*mode)
                .ok_or_else(|| LabError::InvalidParameter(format!("mode {mode} exceeds the grid")))?;
            let err = (discrete - exact).abs();
            let params = ReportParams::new(space, cd, &[]).with("mode", *mode as f64);
            let r = InequalityReport::scalar("eigen_error", params, -err, tol)?
                .extra("discrete", discrete)
                .extra("exact", exact);
            (vec![r], err)
        }
    })
}

fn margin_file_names(checks: &[CheckSpec]) -> Vec<String> {
    let mut seen: BTreeMap<&str, usize> = BTreeMap::new();
    checks
        .iter()
        .map(|c| {
            let count = seen.entry(c.name()).or_insert(0);
            *count += 1;
            if *count == 1 {
                format!("margins_{}.csv", c.name())
            } else {
                format!("margins_{}_{}.csv", c.name(), count)
            }
        })
        .collect()
}

/// Runs every check of `loaded` on the model as given (or as overridden by `checks`).
fn run_level(
    loaded: &LoadedScenario,
    spec: &ModelSpec,
    checks: &[CheckSpec],
    opts: RunOptions,
) -> std::result::Result<RunReport, ConfigError> {
    let sc = &loaded.scenario;
    if !(opts.tolerance_scale > 0.0) || !opts.tolerance_scale.is_finite() {
        return Err(config(None, format!("tolerance scale must be positive, got {}", opts.tolerance_scale)));
    }
    let seed = opts.seed.unwrap_or(sc.seed);
    let space = spec.build().map_err(|e| config(loaded.model_line, format!("model: {e}")))?;
    let cd = match sc.cd {
        Some(c) => CurvatureDimension::new(c.k, c.n).map_err(|e| config(None, format!("cd: {e}")))?,
        None => space.expected_cd(),
    };
    let resolved = sc.field.resolve(&space, seed).map_err(|e| config(None, format!("field: {e}")))?;
    let field = resolved.sample(&space).map_err(|e| config(None, format!("field: {e}")))?;
    let solver = SpectralSolver::new(&space).map_err(|e| config(loaded.model_line, format!("model: {e}")))?;
    let level = Level { space: &space, solver: &solver, field: &field, resolved: &resolved, cd, seed };
    let names = margin_file_names(checks);

    let mut outcomes = Vec::with_capacity(checks.len());
    for (index, check) in checks.iter().enumerate() {
        let tolerance = check.tolerance().resolve(space.spacing()) * opts.tolerance_scale;
        let (reports, defect) = match execute(check, &level, tolerance) {
            Ok(done) => done,
            Err(e @ LabError::Numerical(_)) => (vec![error_report(check.name(), &space, cd, tolerance, &e)], f64::NAN),
            Err(e) => return Err(loaded.check_error(index, check.name(), &e)),
        };
        outcomes.push(CheckOutcome {
            index,
            check: check.name().to_string(),
            tolerance,
            verdict: verdict_of(&reports),
            margins_file: names[index].clone(),
            defect,
            reports,
        });
    }

    let mut summary = Summary { checks: outcomes.len(), ..Summary::default() };
    for o in &outcomes {
        match o.verdict {
            Verdict::Pass => summary.pass += 1,
            Verdict::Fail => summary.fail += 1,
            Verdict::Error => summary.error += 1,
            Verdict::VacuousPass => summary.vacuous_pass += 1,
            Verdict::OutsideRegime => summary.outside_regime += 1,
        }
    }
    let exit_code = i32::from(summary.fail + summary.error > 0);
    Ok(RunReport {
        version: VERSION,
        scenario: sc.name.clone(),
        seed,
        tolerance_scale: opts.tolerance_scale,
        model: ModelSummary {
            spec: spec.clone(),
            name: space.name().to_string(),
            nodes: space.len(),
            spacing: space.spacing(),
            fingerprint: space.fingerprint(),
            expected_cd: space.expected_cd(),
        },
        cd,
        checks: outcomes,
        summary,
        exit_code,
    })
}

pub fn run(loaded: &LoadedScenario, opts: RunOptions) -> std::result::Result<RunReport, ConfigError> {
    run_level(loaded, &loaded.scenario.model, &loaded.scenario.checks, opts)
}

/// Node count of refinement level `j`, nesting the grids.
pub fn refined_nodes(spec: &ModelSpec, level: u32) -> usize {
    let n = spec.nodes();
    let factor = 1usize << level;
    match spec {
        ModelSpec::Interval { .. } | ModelSpec::SphereModel { .. } => (n - 1) * factor + 1,
        ModelSpec::Circle { .. } | ModelSpec::HyperbolicModel { .. } => n * factor,
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SweepRow {
    pub check: String,
    pub index: usize,
    pub level: u32,
    pub nodes: usize,
    pub h: f64,
    pub min_margin: f64,
    pub defect: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SweepTable {
    pub rows: Vec<SweepRow>,
    /// Least-squares slope of `log defect` against `log h`, per check index.
    pub orders: Vec<Option<f64>>,
    pub exit_code: i32,
}

impl SweepTable {
    pub fn to_csv(&self) -> String {
        let mut out = String::from("check,index,level,nodes,h,min_margin,defect,fitted_order\n");
        for r in &self.rows {
            let order = self.orders[r.index].map(|p| format!("{p:.6}")).unwrap_or_default();
            let _ = writeln!(
                out,
                "{},{},{},{},{:.17e},{:.17e},{:.17e},{order}",
                r.check, r.index, r.level, r.nodes, r.h, r.min_margin, r.defect
            );
        }
        out
    }
}

/// Slope of the least-squares line through `(ln x, ln y)` over pairs with `y > 0`.
pub fn fit_order(points: &[(f64, f64)]) -> Option<f64> {
    let pts: Vec<(f64, f64)> =
        points.iter().filter(|(x, y)| *x > 0.0 && *y > 0.0 && y.is_finite()).map(|(x, y)| (x.ln(), y.ln())).collect();
    if pts.len() < 2 {
        return None;
    }
    let n = pts.len() as f64;
    let mx = pts.iter().map(|p| p.0).sum::<f64>() / n;
    let my = pts.iter().map(|p| p.1).sum::<f64>() / n;
    let sxx: f64 = pts.iter().map(|p| (p.0 - mx).powi(2)).sum();
    let sxy: f64 = pts.iter().map(|p| (p.0 - mx) * (p.1 - my)).sum();
    (sxx > 0.0).then(|| sxy / sxx)
}

pub fn sweep(loaded: &LoadedScenario, levels: usize, opts: RunOptions) -> std::result::Result<SweepTable, ConfigError> {
    if levels < 3 {
        return Err(config(None, format!("a sweep needs at least 3 levels, got {levels}")));
    }
    if matches!(loaded.scenario.field, FieldSpec::Tabulated { .. }) {
        return Err(config(None, "tabulated fields cannot be refined; use an analytic field for sweeps"));
    }
    let base_spec = &loaded.scenario.model;
    let base = base_spec.build().map_err(|e| config(loaded.model_line, format!("model: {e}")))?;
    let mut rows = Vec::new();
    let mut failed = false;
    for level in 0..levels as u32 {
        let spec = base_spec.with_nodes(refined_nodes(base_spec, level));
        let space = spec.build().map_err(|e| config(loaded.model_line, format!("model: {e}")))?;
        let checks: Vec<CheckSpec> = loaded
            .scenario
            .checks
            .iter()
            .map(|c| {
                let mut c = c.clone();
                for idx in c.node_indices_mut() {
                    if let Some(&x) = base.nodes().get(*idx) {
                        *idx = nearest_node(&space, x);
                    }
                }
                c
            })
            .collect();
        let report = run_level(loaded, &spec, &checks, opts)?;
        for o in &report.checks {
            failed |= o.verdict == Verdict::Error;
            let min_margin = o.reports.iter().map(|r| r.min_margin).fold(f64::INFINITY, f64::min);
            rows.push(SweepRow {
                check: o.check.clone(),
                index: o.index,
                level,
                nodes: space.len(),
                h: space.spacing(),
                min_margin,
                defect: o.defect,
            });
        }
    }
    let orders = (0..loaded.scenario.checks.len())
        .map(|i| fit_order(&rows.iter().filter(|r| r.index == i).map(|r| (r.h, r.defect)).collect::<Vec<_>>()))
        .collect();
    Ok(SweepTable { rows, orders, exit_code: i32::from(failed) })
}

fn nearest_node(space: &ModelSpace, x: f64) -> usize {
    let nodes = space.nodes();
    (0..nodes.len()).min_by(|&a, &b| (nodes[a] - x).abs().total_cmp(&(nodes[b] - x).abs())).unwrap_or(0)
}

pub fn list_models() -> String {
    let rows = [
        ("interval", "n, length", "(0, 1)", "flat Neumann interval [0, length]"),
        ("circle", "n, circumference", "(0, 1)", "flat circle, arc-length distance"),
        ("sphere_model", "n, dim", "(dim - 1, dim)", "[0, pi] with weight sin^(dim-1)"),
        ("hyperbolic_model", "n, dim, radius", "(-(dim - 1), dim)", "[h, radius] with weight sinh^(dim-1)"),
    ];
    let mut out = String::from("model             parameters          expected (K, N)     description\n");
    for (name, params, cd, what) in rows {
        let _ = writeln!(out, "{name:<17} {params:<19} {cd:<19} {what}");
    }
    out.push_str("\nchecks: ");
    let names = [
        "bakry_qian", "baudoin_garofalo", "be_flow", "bochner", "cd_star", "eigen_error", "eks", "harnack",
        "harnack_scan", "harnack_transport", "kernel_corollary", "li_yau", "phi_derivative", "pre_li_yau", "prop2",
    ];
    out.push_str(&names.join(", "));
    out.push('\n');
    out
}
