//! Pointwise verifiers for Li-Yau type gradient estimates, Harnack inequalities and the
//! `Phi`-functional machinery behind them.

use serde::{Deserialize, Serialize};

use crate::calculus::{carre_du_champ, gamma, gamma2, integrate, laplacian, ScalarField};
use crate::error::{LabError, Result};
use crate::heat::SpectralSolver;
use crate::report::{InequalityReport, ReportParams};
use crate::space::{CurvatureDimension, ModelSpace};

/// `expm1(x) / x`, continuous through `x = 0`.
pub fn expm1_ratio(x: f64) -> f64 {
    if x.abs() < 1e-4 {
        1.0 + x / 2.0 + x * x / 6.0 + x * x * x / 24.0
    } else {
        x.exp_m1() / x
    }
}

/// Adds `eps = 1e-12 max(|f|_inf, 1)` after checking `f >= 0`.
fn regularize(f: &ScalarField) -> Result<ScalarField> {
    if let Some(v) = f.iter().find(|v| !(**v >= 0.0)) {
        return Err(LabError::Precondition(format!("field must be nonnegative, found {v}")));
    }
    let eps = 1e-12 * f.sup_norm().max(1.0);
    Ok(f.map(|v| v + eps))
}

fn check_time(t: f64) -> Result<()> {
    if !(t > 0.0) || !t.is_finite() {
        return Err(LabError::Domain(format!("time must be positive and finite, got {t}")));
    }
    Ok(())
}

/// Coefficients `(c1, c2)` with `c1 = e^{-2KT/3}` and `c2 = (NK/3) e^{-4KT/3} / (1 - e^{-2KT/3})`.
pub fn bg_bound(t: f64, cd: CurvatureDimension) -> Result<(f64, f64)> {
    check_time(t)?;
    let x = 2.0 * cd.k * t / 3.0;
    let c1 = (-x).exp();
    let c2 = 0.5 * cd.n * (-2.0 * x).exp() / (t * expm1_ratio(-x));
    Ok((c1, c2))
}

/// `4 K t^2 / (N (e^{2Kt} - 1))`, equal to `2t/N` at `K = 0`.
pub fn eks_coefficient(t: f64, cd: CurvatureDimension) -> f64 {
    2.0 * t / (cd.n * expm1_ratio(2.0 * cd.k * t))
}

/// `(1 / (4 (t-s) e^{2K tau/3}), (N/2) log((1 - e^{2Kt/3}) / (1 - e^{2Ks/3})))` with `tau = s` for
/// `K >= 0` and `tau = t` for `K < 0`.
pub fn harnack_constants(cd: CurvatureDimension, s: f64, t: f64) -> Result<(f64, f64)> {
    if !(s > 0.0 && s < t) || !t.is_finite() {
        return Err(LabError::Domain(format!("need 0 < s < t, got s = {s}, t = {t}")));
    }
    let tau = if cd.k >= 0.0 { s } else { t };
    let dist = 1.0 / (4.0 * (t - s) * (2.0 * cd.k * tau / 3.0).exp());
    let a = 2.0 * cd.k / 3.0;
    let log_term = 0.5 * cd.n * (t * expm1_ratio(a * t) / (s * expm1_ratio(a * s))).ln();
    Ok((dist, log_term))
}

/// `(N/2) int_s^t (NK/3) e^{-2K tau/3} / (1 - e^{-2K tau/3}) d tau` in closed form, i.e. the same
/// log term with negated exponents.
pub fn harnack_integrated_log_term(cd: CurvatureDimension, s: f64, t: f64) -> f64 {
    let a = -2.0 * cd.k / 3.0;
    0.5 * cd.n * (t * expm1_ratio(a * t) / (s * expm1_ratio(a * s))).ln()
}

fn interior(space: &ModelSpace) -> Vec<bool> {
    space.interior_mask()
}

/// Li-Yau margin `(N/2T)(scale) u^2 + u Lap u - Gamma(u)` with `u = H_T f`.
pub fn li_yau_check(solver: &SpectralSolver, f: &ScalarField, t: f64, dim: f64, tolerance: f64) -> Result<InequalityReport> {
    li_yau_check_scaled(solver, f, t, dim, tolerance, 1.0)
}

/// As [`li_yau_check`], with the bound constant multiplied by `bound_scale`.
pub fn li_yau_check_scaled(
    solver: &SpectralSolver,
    f: &ScalarField,
    t: f64,
    dim: f64,
    tolerance: f64,
    bound_scale: f64,
) -> Result<InequalityReport> {
    check_time(t)?;
    let space = solver.space();
    let cd = CurvatureDimension::new(0.0, dim)?;
    let u = solver.heat_apply(&regularize(f)?, t)?;
    let lap = laplacian(space, &u)?;
    let g = gamma(space, &u)?;
    let c = bound_scale * dim / (2.0 * t);
    let margin: Vec<f64> = (0..space.len()).map(|i| c * u[i] * u[i] + lap[i] * u[i] - g[i]).collect();
    let mask = interior(space);
    let log_form = margin
        .iter()
        .zip(u.iter())
        .zip(&mask)
        .filter(|(_, &a)| a)
        .map(|((m, v), _)| m / (v * v))
        .fold(f64::INFINITY, f64::min);
    let params = ReportParams::new(space, cd, &[t]).with("bound_scale", bound_scale);
    let mut report = InequalityReport::from_field("li_yau", params, margin, mask, tolerance)?
        .extra("bound_constant", c)
        .extra("log_form_min_margin", log_form);
    if space.expected_cd().k != 0.0 {
        report = report.note("model curvature is nonzero; the K = 0 bound is evaluated as is");
    }
    Ok(report)
}

/// Bakry-Qian margin `(NK/4) u - Lap u`; flagged outside the proven regime for `T < 2/K`.
pub fn bakry_qian_check(
    solver: &SpectralSolver,
    f: &ScalarField,
    t: f64,
    cd: CurvatureDimension,
    tolerance: f64,
) -> Result<InequalityReport> {
    check_time(t)?;
    if !(cd.k > 0.0) {
        return Err(LabError::InvalidParameter(format!("Bakry-Qian needs K > 0, got {}", cd.k)));
    }
    let space = solver.space();
    let u = solver.heat_apply(&regularize(f)?, t)?;
    let lap = laplacian(space, &u)?;
    let c = cd.n * cd.k / 4.0;
    let margin: Vec<f64> = (0..space.len()).map(|i| c * u[i] - lap[i]).collect();
    let report = InequalityReport::from_field("bakry_qian", ReportParams::new(space, cd, &[t]), margin, interior(space), tolerance)?
        .extra("bound_constant", c)
        .extra("regime_threshold", 2.0 / cd.k);
    Ok(if t < 2.0 / cd.k { report.mark_outside_regime("T < 2/K: below the time range where the bound is established") } else { report })
}

/// Baudoin-Garofalo margin `c1 u Lap u + c2 u^2 - Gamma(u)`.
pub fn baudoin_garofalo_check(
    solver: &SpectralSolver,
    f: &ScalarField,
    t: f64,
    cd: CurvatureDimension,
    tolerance: f64,
) -> Result<InequalityReport> {
    let (c1, c2) = bg_bound(t, cd)?;
    let space = solver.space();
    let u = solver.heat_apply(&regularize(f)?, t)?;
    let lap = laplacian(space, &u)?;
    let g = gamma(space, &u)?;
    let margin: Vec<f64> = (0..space.len()).map(|i| c1 * lap[i] * u[i] + c2 * u[i] * u[i] - g[i]).collect();
    Ok(InequalityReport::from_field(
        "baudoin_garofalo",
        ReportParams::new(space, cd, &[t]),
        margin,
        interior(space),
        tolerance,
    )?
    .extra("c1", c1)
    .extra("c2", c2))
}

fn harnack_margin(
    space: &ModelSpace,
    us: &ScalarField,
    ut: &ScalarField,
    x: usize,
    y: usize,
    dist_coeff: f64,
    log_term: f64,
) -> f64 {
    let d = space.distance(x, y);
    ut[y] - us[x] * (-d * d * dist_coeff - log_term).exp()
}

/// Two-time comparison `H_t f(y) - H_s f(x) e^{-d^2 c} e^{-log term}`.
#[allow(clippy::too_many_arguments)]
pub fn harnack_check(
    solver: &SpectralSolver,
    f: &ScalarField,
    x: usize,
    y: usize,
    s: f64,
    t: f64,
    cd: CurvatureDimension,
    tolerance: f64,
) -> Result<InequalityReport> {
    harnack_scan(solver, f, &[(x, y)], &[(s, t)], cd, tolerance).map(|mut r| {
        r.name = "harnack".into();
        r.params.extra.insert("x".into(), x as f64);
        r.params.extra.insert("y".into(), y as f64);
        r
    })
}

/// Harnack margins over every `(x, y)` pair and `(s, t)` pair; the field is indexed
/// time-pair-major.
pub fn harnack_scan(
    solver: &SpectralSolver,
    f: &ScalarField,
    pairs: &[(usize, usize)],
    times: &[(f64, f64)],
    cd: CurvatureDimension,
    tolerance: f64,
) -> Result<InequalityReport> {
    let space = solver.space();
    if let Some(&(x, y)) = pairs.iter().find(|(x, y)| *x >= space.len() || *y >= space.len()) {
        return Err(LabError::InvalidParameter(format!("node pair ({x}, {y}) out of range")));
    }
    let fe = regularize(f)?;
    let mut margin = Vec::with_capacity(pairs.len() * times.len());
    let mut worst_integrated = f64::INFINITY;
    for &(s, t) in times {
        let (dist, log_term) = harnack_constants(cd, s, t)?;
        let us = solver.heat_apply(&fe, s)?;
        let ut = solver.heat_apply(&fe, t)?;
        let alt = harnack_integrated_log_term(cd, s, t);
        for &(x, y) in pairs {
            margin.push(harnack_margin(space, &us, &ut, x, y, dist, log_term));
            worst_integrated = worst_integrated.min(harnack_margin(space, &us, &ut, x, y, dist, alt));
        }
    }
    let flat: Vec<f64> = times.iter().flat_map(|&(s, t)| [s, t]).collect();
    let mask = vec![true; margin.len()];
    Ok(InequalityReport::from_field("harnack_scan", ReportParams::new(space, cd, &flat), margin, mask, tolerance)?
        .extra("instances", (pairs.len() * times.len()) as f64)
        .extra("integrated_log_term_min_margin", worst_integrated))
}

/// `e^{-2Kt} H_t(Gamma f) - Gamma(H_t f)`.
pub fn be_flow_check(
    solver: &SpectralSolver,
    f: &ScalarField,
    t: f64,
    cd: CurvatureDimension,
    tolerance: f64,
) -> Result<InequalityReport> {
    gradient_estimate(solver, f, t, cd, tolerance, false)
}

/// `e^{-2Kt} H_t(Gamma f) - Gamma(H_t f) - c(t) (Lap H_t f)^2` with `c` from [`eks_coefficient`].
pub fn eks_check(
    solver: &SpectralSolver,
    f: &ScalarField,
    t: f64,
    cd: CurvatureDimension,
    tolerance: f64,
) -> Result<InequalityReport> {
    gradient_estimate(solver, f, t, cd, tolerance, true)
}

fn gradient_estimate(
    solver: &SpectralSolver,
    f: &ScalarField,
    t: f64,
    cd: CurvatureDimension,
    tolerance: f64,
    dimensional: bool,
) -> Result<InequalityReport> {
    check_time(t)?;
    let space = solver.space();
    let u = solver.heat_apply(f, t)?;
    let smoothed_energy = solver.heat_apply(&gamma(space, f)?, t)?;
    let g = gamma(space, &u)?;
    let decay = (-2.0 * cd.k * t).exp();
    let c = if dimensional { eks_coefficient(t, cd) } else { 0.0 };
    let lap = if dimensional { laplacian(space, &u)? } else { ScalarField::constant(space, 0.0) };
    let margin: Vec<f64> = (0..space.len()).map(|i| decay * smoothed_energy[i] - g[i] - c * lap[i] * lap[i]).collect();
    let name = if dimensional { "eks" } else { "be_flow" };
    let report = InequalityReport::from_field(name, ReportParams::new(space, cd, &[t]), margin, interior(space), tolerance)?;
    Ok(if dimensional { report.extra("coefficient", c) } else { report })
}

/// Enforces `min f >= 1e-6 |f|_inf > 0`.
fn check_floor(f: &ScalarField) -> Result<()> {
    let floor = 1e-6 * f.sup_norm();
    if !(f.min() >= floor) || !(floor > 0.0) {
        return Err(LabError::Precondition(format!(
            "field must be bounded below by 1e-6 |f|_inf = {floor}, min is {}",
            f.min()
        )));
    }
    Ok(())
}

fn check_window(big_t: f64, t: f64) -> Result<()> {
    check_time(big_t)?;
    if !(0.0..big_t).contains(&t) {
        return Err(LabError::Domain(format!("need 0 <= t < T, got t = {t}, T = {big_t}")));
    }
    Ok(())
}

/// `v Gamma(log v)` with `v = H_{T-t} f`.
fn phi_integrand(solver: &SpectralSolver, f: &ScalarField, big_t: f64, t: f64) -> Result<(ScalarField, ScalarField)> {
    let v = solver.heat_apply(f, big_t - t)?;
    let g = gamma(solver.space(), &v.map(f64::ln))?;
    Ok((v.zip_map(&g, |a, b| a * b), v))
}

/// `Phi(t) = H_t(v Gamma(log v))`, `v = H_{T-t} f`.
pub fn phi(solver: &SpectralSolver, f: &ScalarField, big_t: f64, t: f64) -> Result<ScalarField> {
    check_floor(f)?;
    check_window(big_t, t)?;
    let (w, _) = phi_integrand(solver, f, big_t, t)?;
    solver.heat_apply(&w, t)
}

/// `int Phi(t) phi dm`, computed as `int v Gamma(log v) H_t phi dm` by self-adjointness.
fn phi_moment(solver: &SpectralSolver, f: &ScalarField, big_t: f64, t: f64, test: &ScalarField) -> Result<f64> {
    let (w, _) = phi_integrand(solver, f, big_t, t)?;
    let psi = solver.heat_apply(test, t)?;
    Ok(integrate(solver.space(), &w.zip_map(&psi, |a, b| a * b)))
}

/// Breakdown of the derivative identity for `int Phi(t) phi dm`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PhiDerivative {
    /// Central difference of `t -> int Phi(t) phi dm`.
    pub central_difference: f64,
    /// Exact time derivative of the discrete functional.
    pub discrete_derivative: f64,
    /// `2 int v H_t(phi) gamma_2(log v) dm`.
    pub gamma2_form: f64,
    /// `|central_difference - gamma2_form|`.
    pub defect: f64,
    /// `|central_difference - discrete_derivative|`, the part that shrinks with `dt`.
    pub time_defect: f64,
    /// `|discrete_derivative - gamma2_form|`, the part that shrinks with `h`.
    pub space_defect: f64,
}

pub fn phi_derivative_check(
    solver: &SpectralSolver,
    f: &ScalarField,
    big_t: f64,
    t: f64,
    test: &ScalarField,
    dt: f64,
) -> Result<PhiDerivative> {
    check_floor(f)?;
    check_time(dt)?;
    if !(t - dt > 0.0 && t + dt < big_t) {
        return Err(LabError::Domain(format!("stencil [{}, {}] leaves (0, {big_t})", t - dt, t + dt)));
    }
    if let Some(v) = test.iter().find(|v| **v < 0.0) {
        return Err(LabError::Precondition(format!("test function must be nonnegative, found {v}")));
    }
    let space = solver.space();
    let up = phi_moment(solver, f, big_t, t + dt, test)?;
    let down = phi_moment(solver, f, big_t, t - dt, test)?;
    let central_difference = (up - down) / (2.0 * dt);

    let v = solver.heat_apply(f, big_t - t)?;
    let g = v.map(f64::ln);
    let psi = solver.heat_apply(test, t)?;
    let lap_v = laplacian(space, &v)?;
    let lap_psi = laplacian(space, &psi)?;
    let gam = gamma(space, &g)?;
    let mixed = carre_du_champ(space, &g, &lap_v.zip_map(&v, |a, b| a / b))?;
    let discrete: Vec<f64> = (0..space.len())
        .map(|i| psi[i] * (-lap_v[i] * gam[i] - 2.0 * v[i] * mixed[i]) + v[i] * gam[i] * lap_psi[i])
        .collect();
    let discrete_derivative = integrate(space, &discrete);
    let g2 = gamma2(space, &g)?;
    let gamma2_form = 2.0 * integrate(space, &(0..space.len()).map(|i| v[i] * psi[i] * g2[i]).collect::<Vec<_>>());
    Ok(PhiDerivative {
        central_difference,
        discrete_derivative,
        gamma2_form,
        defect: (central_difference - gamma2_form).abs(),
        time_defect: (central_difference - discrete_derivative).abs(),
        space_defect: (discrete_derivative - gamma2_form).abs(),
    })
}

/// Time profile `a(t) >= 0` with derivative.
pub trait Profile {
    fn value(&self, t: f64) -> f64;
    fn derivative(&self, t: f64) -> f64;
}

/// `gamma(t) = (N/4)(a'/a + 2K)`, which cancels the `Phi` coefficient in the differential inequality.
pub fn matching_gamma(a: &dyn Profile, t: f64, cd: CurvatureDimension) -> f64 {
    cd.n / 4.0 * (a.derivative(t) / a.value(t) + 2.0 * cd.k)
}

/// Checks `d/dt int Phi a phi >= int [(a' - 4a gamma/N + 2Ka) Phi + (4a gamma/N) Lap H_T f - (2a gamma^2/N) H_T f] phi`
/// at each time of `grid`, with the derivative taken by central differences of width `dt`.
#[allow(clippy::too_many_arguments)]
pub fn prop2_check(
    solver: &SpectralSolver,
    f: &ScalarField,
    big_t: f64,
    a: &dyn Profile,
    gamma_fn: &dyn Fn(f64) -> f64,
    test: &ScalarField,
    grid: &[f64],
    dt: f64,
    cd: CurvatureDimension,
    tolerance: f64,
) -> Result<InequalityReport> {
    check_floor(f)?;
    check_time(dt)?;
    if let Some(v) = test.iter().find(|v| **v < 0.0) {
        return Err(LabError::Precondition(format!("test function must be nonnegative, found {v}")));
    }
    let space = solver.space();
    let u_big = solver.heat_apply(f, big_t)?;
    let lap_big = laplacian(space, &u_big)?;
    let lap_term = integrate(space, &lap_big.zip_map(test, |a, b| a * b));
    let mass_term = integrate(space, &u_big.zip_map(test, |a, b| a * b));
    let mut margin = Vec::with_capacity(grid.len());
    for &t in grid {
        if !(t - dt > 0.0 && t + dt < big_t) {
            return Err(LabError::Domain(format!("grid time {t} with stencil {dt} leaves (0, {big_t})")));
        }
        let av = a.value(t);
        if av < 0.0 {
            return Err(LabError::InvalidProfile(format!("a({t}) = {av} is negative")));
        }
        let up = a.value(t + dt) * phi_moment(solver, f, big_t, t + dt, test)?;
        let down = a.value(t - dt) * phi_moment(solver, f, big_t, t - dt, test)?;
        let lhs = (up - down) / (2.0 * dt);
        let gm = gamma_fn(t);
        let coeff = a.derivative(t) - 4.0 * av * gm / cd.n + 2.0 * cd.k * av;
        let rhs = coeff * phi_moment(solver, f, big_t, t, test)? + 4.0 * av * gm / cd.n * lap_term
            - 2.0 * av * gm * gm / cd.n * mass_term;
        margin.push(lhs - rhs);
    }
    let params = ReportParams::new(space, cd, &[big_t]).with("dt", dt);
    let mask = vec![true; margin.len()];
    InequalityReport::from_field("prop2", params, margin, mask, tolerance)
}

/// Square-root profile `V` with `V(0) = 1`, `V(T) = 0`, `V >= 0`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum VProfile {
    /// `1 - t/T`
    Linear { horizon: f64 },
    /// `e^{-Kt/3} (e^{-2Kt/3} - e^{-2KT/3}) / (1 - e^{-2KT/3})`
    BakryGarofalo { horizon: f64, k: f64 },
    /// `sum c_j (t/T)^j`
    Polynomial { horizon: f64, coefficients: Vec<f64> },
}

impl VProfile {
    pub fn linear(horizon: f64) -> Result<Self> {
        Self::Linear { horizon }.validated()
    }

    pub fn bakry_garofalo(horizon: f64, k: f64) -> Result<Self> {
        Self::BakryGarofalo { horizon, k }.validated()
    }

    pub fn polynomial(horizon: f64, coefficients: Vec<f64>) -> Result<Self> {
        Self::Polynomial { horizon, coefficients }.validated()
    }

    pub fn horizon(&self) -> f64 {
        match self {
            VProfile::Linear { horizon } | VProfile::BakryGarofalo { horizon, .. } | VProfile::Polynomial { horizon, .. } => *horizon,
        }
    }

    /// Checks the endpoint values and nonnegativity on a sample grid.
    pub fn validated(self) -> Result<Self> {
        let big_t = self.horizon();
        if !(big_t > 0.0) || !big_t.is_finite() {
            return Err(LabError::InvalidProfile(format!("horizon must be positive, got {big_t}")));
        }
        let (v0, v1) = (self.v(0.0), self.v(big_t));
        if (v0 - 1.0).abs() > 1e-12 || v1.abs() > 1e-12 {
            return Err(LabError::InvalidProfile(format!("need V(0) = 1 and V(T) = 0, got {v0} and {v1}")));
        }
        if (0..=1000).any(|i| self.v(big_t * i as f64 / 1000.0) < -1e-12) {
            return Err(LabError::InvalidProfile("V must be nonnegative on [0, T]".into()));
        }
        Ok(self)
    }

    pub fn v(&self, t: f64) -> f64 {
        match self {
            VProfile::Linear { horizon } => 1.0 - t / horizon,
            VProfile::BakryGarofalo { horizon, k } => {
                let b = 2.0 * k / 3.0;
                let g = (-b * t).exp() * ((horizon - t) / horizon) * expm1_ratio(-b * (horizon - t)) / expm1_ratio(-b * horizon);
                (-k * t / 3.0).exp() * g
            }
            VProfile::Polynomial { horizon, coefficients } => {
                let x = t / horizon;
                coefficients.iter().rev().fold(0.0, |acc, c| acc * x + c)
            }
        }
    }

    pub fn dv(&self, t: f64) -> f64 {
        match self {
            VProfile::Linear { horizon } => -1.0 / horizon,
            VProfile::BakryGarofalo { horizon, k } => {
                let b = 2.0 * k / 3.0;
                let dg = -(-b * t).exp() / (horizon * expm1_ratio(-b * horizon));
                -k / 3.0 * self.v(t) + (-k * t / 3.0).exp() * dg
            }
            VProfile::Polynomial { horizon, coefficients } => {
                let x = t / horizon;
                coefficients.iter().enumerate().skip(1).rev().fold(0.0, |acc, (j, c)| acc * x + j as f64 * c) / horizon
            }
        }
    }

    /// `(int_0^T V^2, int_0^T V'^2)`.
    pub fn integrals(&self) -> (f64, f64) {
        let big_t = self.horizon();
        (adaptive_simpson(&|t| self.v(t).powi(2), 0.0, big_t, 1e-12), adaptive_simpson(&|t| self.dv(t).powi(2), 0.0, big_t, 1e-12))
    }
}

/// `a = V^2` as a [`Profile`].
pub struct SquaredProfile<'a>(pub &'a VProfile);

impl Profile for SquaredProfile<'_> {
    fn value(&self, t: f64) -> f64 {
        self.0.v(t).powi(2)
    }
    fn derivative(&self, t: f64) -> f64 {
        2.0 * self.0.v(t) * self.0.dv(t)
    }
}

/// Adaptive Simpson quadrature to absolute tolerance `tol`.
pub fn adaptive_simpson(f: &dyn Fn(f64) -> f64, a: f64, b: f64, tol: f64) -> f64 {
    fn step(f: &dyn Fn(f64) -> f64, a: f64, b: f64, fa: f64, fm: f64, fb: f64, whole: f64, tol: f64, depth: u32) -> f64 {
        let m = 0.5 * (a + b);
        let (lm, rm) = (0.5 * (a + m), 0.5 * (m + b));
        let (flm, frm) = (f(lm), f(rm));
        let left = (m - a) / 6.0 * (fa + 4.0 * flm + fm);
        let right = (b - m) / 6.0 * (fm + 4.0 * frm + fb);
        let delta = left + right - whole;
        if depth == 0 || delta.abs() <= 15.0 * tol {
            left + right + delta / 15.0
        } else {
            step(f, a, m, fa, flm, fm, left, 0.5 * tol, depth - 1) + step(f, m, b, fm, frm, fb, right, 0.5 * tol, depth - 1)
        }
    }
    let (fa, fb, fm) = (f(a), f(b), f(0.5 * (a + b)));
    let whole = (b - a) / 6.0 * (fa + 4.0 * fm + fb);
    step(f, a, b, fa, fm, fb, whole, tol, 40)
}

/// Pointwise form of the profile inequality, scaled by `u^2`:
/// `u^2 (N/2)(int V'^2 - K + K^2 int V^2) - Gamma(u) - (2K int V^2 - 1) u Lap u`, `u = H_T f`.
pub fn pre_li_yau_check(
    solver: &SpectralSolver,
    f: &ScalarField,
    profile: &VProfile,
    cd: CurvatureDimension,
    tolerance: f64,
) -> Result<InequalityReport> {
    let big_t = profile.horizon();
    let space = solver.space();
    let u = solver.heat_apply(&regularize(f)?, big_t)?;
    let lap = laplacian(space, &u)?;
    let g = gamma(space, &u)?;
    let (iv2, idv2) = profile.integrals();
    let c0 = 0.5 * cd.n * (idv2 - cd.k + cd.k * cd.k * iv2);
    let c1 = 2.0 * cd.k * iv2 - 1.0;
    let margin: Vec<f64> = (0..space.len()).map(|i| c0 * u[i] * u[i] - g[i] - c1 * lap[i] * u[i]).collect();
    Ok(InequalityReport::from_field("pre_li_yau", ReportParams::new(space, cd, &[big_t]), margin, interior(space), tolerance)?
        .extra("int_v2", iv2)
        .extra("int_dv2", idv2))
}

/// Heat-kernel versions of the gradient and Harnack estimates, started from `H_{t0} delta_x`
/// with `t0 = 5 h^2` so that `H_{t - t0}` of it is exactly the kernel at time `t`.
pub fn kernel_corollary_suite(
    solver: &SpectralSolver,
    x: usize,
    cd: CurvatureDimension,
    times: &[f64],
    tolerance: f64,
) -> Result<Vec<InequalityReport>> {
    let space = solver.space();
    let t0 = 5.0 * space.spacing().powi(2);
    let warm = solver.heat_kernel(x, t0)?;
    let f = warm.density.map(|p| p.max(0.0));
    let t_min = solver.min_kernel_time() + t0;
    let n = space.len();
    let targets: Vec<(usize, usize)> = [0, n / 8, n / 4, n / 2, 3 * n / 4].iter().map(|&z| (x, z % n)).collect();
    let mut out = Vec::new();
    for &t in times {
        if !(t > t_min) || !(t / 2.0 > t0) {
            return Err(LabError::InvalidParameter(format!("kernel time {t} must exceed {t_min} and 2 t0 = {}", 2.0 * t0)));
        }
        let big_t = t - t0;
        let tag = |r: InequalityReport, item: &str| -> InequalityReport {
            let mut r = r.note(format!("kernel item {item}, warm-up t0 = {t0:e}"));
            r.name = format!("kernel_{}", r.name);
            r.params.extra.insert("kernel_time".into(), t);
            r.params.extra.insert("base".into(), x as f64);
            r
        };
        if cd.k == 0.0 {
            out.push(tag(li_yau_check(solver, &f, big_t, cd.n, tolerance)?, "i"));
        }
        if cd.k > 0.0 {
            out.push(tag(bakry_qian_check(solver, &f, big_t, cd, tolerance)?, "ii"));
        }
        out.push(tag(baudoin_garofalo_check(solver, &f, big_t, cd, tolerance)?, "iii"));
        out.push(tag(harnack_scan(solver, &f, &targets, &[(t / 2.0 - t0, big_t)], cd, tolerance)?, "iv"));
    }
    out.sort_by_key(|r| r.sort_key());
    Ok(out)
}
