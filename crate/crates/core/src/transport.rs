//! Quadratic optimal transport on the 1-D model spaces.

use std::collections::BTreeMap;
use std::f64::consts::PI;
use std::fmt::Write as _;

use serde::{Deserialize, Serialize};

use crate::calculus::ScalarField;
use crate::error::{LabError, Result};
use crate::heat::SpectralSolver;
use crate::inequalities::harnack_constants;
use crate::report::{InequalityReport, ReportParams};
use crate::space::{CurvatureDimension, ModelSpace, Topology};

/// Largest combined support accepted by [`w2_lp`].
pub const LP_SUPPORT_LIMIT: usize = 400;

/// Distortion coefficient value; the `Infinite` branch is where the CD* bound degenerates.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Sigma {
    Finite(f64),
    Infinite,
}

impl Sigma {
    pub fn value(self) -> f64 {
        match self {
            Sigma::Finite(v) => v,
            Sigma::Infinite => f64::INFINITY,
        }
    }

    pub fn is_infinite(self) -> bool {
        self == Sigma::Infinite
    }
}

/// `sigma^{(t)}_{K,N}(theta)`.
pub fn sigma_coefficient(t: f64, theta: f64, k: f64, n: f64) -> Result<Sigma> {
    if !(0.0..=1.0).contains(&t) || !(theta >= 0.0) || !(n >= 1.0) || !k.is_finite() {
        return Err(LabError::InvalidParameter(format!(
            "sigma needs t in [0,1], theta >= 0, N >= 1 and finite K (t = {t}, theta = {theta}, K = {k}, N = {n})"
        )));
    }
    let kt2 = k * theta * theta;
    if kt2 >= n * PI * PI {
        return Ok(Sigma::Infinite);
    }
    if kt2 == 0.0 {
        return Ok(Sigma::Finite(t));
    }
    let alpha = theta * (k.abs() / n).sqrt();
    let v = if kt2 > 0.0 { (t * alpha).sin() / alpha.sin() } else { (t * alpha).sinh() / alpha.sinh() };
    Ok(Sigma::Finite(v))
}

/// Probability masses on the nodes of one space.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DiscreteMeasure {
    masses: Vec<f64>,
    space_id: String,
}

impl DiscreteMeasure {
    /// Accepts masses summing to 1 within `1e-9` and renormalizes exactly.
    pub fn new(space: &ModelSpace, masses: Vec<f64>) -> Result<Self> {
        if masses.len() != space.len() {
            return Err(LabError::Dimension { expected: space.len(), actual: masses.len() });
        }
        if masses.iter().any(|m| !m.is_finite() || *m < 0.0) {
            return Err(LabError::Domain("masses must be finite and nonnegative".into()));
        }
        let total: f64 = masses.iter().sum();
        if (total - 1.0).abs() > 1e-9 {
            return Err(LabError::InvalidParameter(format!("masses sum to {total}, expected 1")));
        }
        Ok(Self { masses: masses.iter().map(|m| m / total).collect(), space_id: space.fingerprint() })
    }

    /// `mu_i proportional to rho_i m_i`.
    pub fn from_density(space: &ModelSpace, density: &[f64]) -> Result<Self> {
        if density.len() != space.len() {
            return Err(LabError::Dimension { expected: space.len(), actual: density.len() });
        }
        if density.iter().any(|r| !r.is_finite() || *r < 0.0) {
            return Err(LabError::Domain("density must be finite and nonnegative".into()));
        }
        let raw: Vec<f64> = density.iter().zip(space.measure()).map(|(r, m)| r * m).collect();
        let total: f64 = raw.iter().sum();
        if !(total > 0.0) {
            return Err(LabError::InvalidParameter("density has zero mass".into()));
        }
        Ok(Self { masses: raw.iter().map(|v| v / total).collect(), space_id: space.fingerprint() })
    }

    pub fn reference(space: &ModelSpace) -> Self {
        Self { masses: space.measure().to_vec(), space_id: space.fingerprint() }
    }

    pub fn dirac(space: &ModelSpace, node: usize) -> Result<Self> {
        if node >= space.len() {
            return Err(LabError::InvalidParameter(format!("node {node} out of range")));
        }
        let mut masses = vec![0.0; space.len()];
        masses[node] = 1.0;
        Ok(Self { masses, space_id: space.fingerprint() })
    }

    /// Normalized restriction of `m` to the closed ball `B_r(center)`.
    pub fn ball_uniform(space: &ModelSpace, center: usize, radius: f64) -> Result<Self> {
        if center >= space.len() || !(radius >= 0.0) {
            return Err(LabError::InvalidParameter(format!("bad ball (center {center}, radius {radius})")));
        }
        let slack = 1e-9 * space.spacing();
        let density: Vec<f64> =
            (0..space.len()).map(|i| f64::from(u8::from(space.distance(center, i) <= radius + slack))).collect();
        Self::from_density(space, &density)
    }

    pub fn masses(&self) -> &[f64] {
        &self.masses
    }

    /// Density `mu_i / m_i` with respect to the reference measure.
    pub fn density(&self, space: &ModelSpace) -> ScalarField {
        ScalarField(self.masses.iter().zip(space.measure()).map(|(a, m)| a / m).collect())
    }

    pub fn support_size(&self) -> usize {
        self.masses.iter().filter(|&&m| m > 0.0).count()
    }

    fn check_space(&self, space: &ModelSpace) -> Result<()> {
        if self.masses.len() != space.len() || self.space_id != space.fingerprint() {
            return Err(LabError::InvalidParameter("measure belongs to a different space".into()));
        }
        Ok(())
    }
}

/// One coupled mass element. `shift` is the signed number of grid steps travelled.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PlanEntry {
    pub from: usize,
    pub to: usize,
    pub mass: f64,
    pub shift: i64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TransportPlan {
    pub entries: Vec<PlanEntry>,
    /// `sum mass * d(from, to)^2`.
    pub cost: f64,
}

impl TransportPlan {
    fn from_entries(space: &ModelSpace, entries: Vec<PlanEntry>) -> Self {
        let cost = entries.iter().map(|e| e.mass * space.distance(e.from, e.to).powi(2)).sum();
        Self { entries, cost }
    }

    pub fn source_marginal(&self, n: usize) -> Vec<f64> {
        let mut out = vec![0.0; n];
        for e in &self.entries {
            out[e.from] += e.mass;
        }
        out
    }

    pub fn target_marginal(&self, n: usize) -> Vec<f64> {
        let mut out = vec![0.0; n];
        for e in &self.entries {
            out[e.to] += e.mass;
        }
        out
    }

    /// Largest deviation of either marginal from the given measures.
    pub fn marginal_defect(&self, mu0: &DiscreteMeasure, mu1: &DiscreteMeasure) -> f64 {
        let n = mu0.masses.len();
        let a = self.source_marginal(n);
        let b = self.target_marginal(n);
        a.iter()
            .zip(&mu0.masses)
            .chain(b.iter().zip(&mu1.masses))
            .map(|(x, y)| (x - y).abs())
            .fold(0.0, f64::max)
    }

    pub fn w2(&self) -> f64 {
        self.cost.sqrt()
    }

    /// `i,j,mass` table.
    pub fn to_csv(&self) -> String {
        let mut out = String::from("i,j,mass\n");
        for e in &self.entries {
            let _ = writeln!(out, "{},{},{:.17e}", e.from, e.to, e.mass);
        }
        out
    }
}

fn check_pair(space: &ModelSpace, mu0: &DiscreteMeasure, mu1: &DiscreteMeasure) -> Result<()> {
    mu0.check_space(space)?;
    mu1.check_space(space)
}

fn cumulative(masses: &[f64]) -> Vec<f64> {
    let mut levels = Vec::with_capacity(masses.len() + 1);
    let mut acc = 0.0;
    levels.push(0.0);
    for m in masses {
        acc += m;
        levels.push(acc);
    }
    *levels.last_mut().expect("nonempty") = 1.0;
    levels
}

/// Atom carrying quantile level `u in [0, 1)`.
fn atom_at(levels: &[f64], u: f64) -> usize {
    let idx = levels.partition_point(|&a| a <= u);
    idx.saturating_sub(1).min(levels.len() - 2)
}

/// Couples `mu0` at level `u` with `mu1` at level `u + theta`, lifting periodically on the circle.
fn quantile_pieces(n: usize, a: &[f64], b: &[f64], theta: f64) -> Vec<PlanEntry> {
    let mut cuts: Vec<f64> = a.to_vec();
    cuts.extend(b.iter().map(|&v| (v - theta).rem_euclid(1.0)));
    cuts.push(1.0);
    cuts.sort_by(f64::total_cmp);
    cuts.dedup();
    let mut merged: BTreeMap<(usize, usize, i64), f64> = BTreeMap::new();
    for w in cuts.windows(2) {
        let (u0, u1) = (w[0], w[1]);
        if !(u1 > u0) || u0 >= 1.0 {
            continue;
        }
        let um = 0.5 * (u0 + u1);
        let i = atom_at(a, um);
        let v = um + theta;
        let wraps = v.floor();
        let j = atom_at(b, v - wraps);
        let shift = j as i64 + wraps as i64 * n as i64 - i as i64;
        *merged.entry((i, j, shift)).or_insert(0.0) += u1 - u0;
    }
    merged.into_iter().map(|((from, to, shift), mass)| PlanEntry { from, to, mass, shift }).collect()
}

fn lifted_cost(pieces: &[PlanEntry]) -> f64 {
    pieces.iter().map(|e| e.mass * (e.shift as f64).powi(2)).sum()
}

/// Monotone (quantile) optimal coupling.
///
/// On the circle the coupling is a quantile coupling after a shift of cumulative levels; the
/// lifted cost is convex and piecewise linear in the shift with kinks at level differences
/// (modulo 1), so the minimum is found exactly by a ternary search over those candidates.
pub fn w2_quantile(space: &ModelSpace, mu0: &DiscreteMeasure, mu1: &DiscreteMeasure) -> Result<TransportPlan> {
    check_pair(space, mu0, mu1)?;
    let n = space.len();
    let a = cumulative(&mu0.masses);
    let b = cumulative(&mu1.masses);
    let pieces = match space.topology() {
        Topology::IntervalNeumann => quantile_pieces(n, &a, &b, 0.0),
        Topology::Circle => {
            let support_levels = |levels: &[f64], masses: &[f64]| -> Vec<f64> {
                let mut v: Vec<f64> = std::iter::once(0.0)
                    .chain(masses.iter().zip(&levels[1..]).filter(|(m, _)| **m > 0.0).map(|(_, &l)| l))
                    .collect();
                v.dedup();
                v
            };
            let la = support_levels(&a, &mu0.masses);
            let lb = support_levels(&b, &mu1.masses);
            let mut candidates: Vec<f64> = lb
                .iter()
                .flat_map(|&y| la.iter().flat_map(move |&x| [y - x - 1.0, y - x, y - x + 1.0]))
                .filter(|th| (-1.0..=1.0).contains(th))
                .collect();
            candidates.sort_by(f64::total_cmp);
            candidates.dedup();
            let eval = |idx: usize| lifted_cost(&quantile_pieces(n, &a, &b, candidates[idx]));
            let (mut lo, mut hi) = (0usize, candidates.len() - 1);
            while hi - lo > 2 {
                let m1 = lo + (hi - lo) / 3;
                let m2 = hi - (hi - lo) / 3;
                if eval(m1) < eval(m2) {
                    hi = m2;
                } else {
                    lo = m1;
                }
            }
            let best = (lo..=hi).min_by(|&x, &y| eval(x).total_cmp(&eval(y))).expect("nonempty range");
            let mut pieces = quantile_pieces(n, &a, &b, candidates[best]);
            for e in &mut pieces {
                if e.shift.unsigned_abs() as usize > space.steps_between(e.from, e.to) {
                    e.shift = space.signed_steps(e.from, e.to);
                }
            }
            pieces
        }
    };
    Ok(TransportPlan::from_entries(space, pieces))
}

/// Exact transport by successive shortest paths on the dense bipartite network.
///
/// Intended as an oracle on small supports; refuses above [`LP_SUPPORT_LIMIT`] atoms.
pub fn w2_lp(space: &ModelSpace, mu0: &DiscreteMeasure, mu1: &DiscreteMeasure) -> Result<TransportPlan> {
    check_pair(space, mu0, mu1)?;
    let src: Vec<usize> = (0..space.len()).filter(|&i| mu0.masses[i] > 0.0).collect();
    let dst: Vec<usize> = (0..space.len()).filter(|&j| mu1.masses[j] > 0.0).collect();
    let support = src.len() + dst.len();
    if support > LP_SUPPORT_LIMIT {
        return Err(LabError::SizeGuard { support, limit: LP_SUPPORT_LIMIT });
    }
    let cost: Vec<Vec<f64>> =
        src.iter().map(|&i| dst.iter().map(|&j| space.distance(i, j).powi(2)).collect()).collect();
    let supply: Vec<f64> = src.iter().map(|&i| mu0.masses[i]).collect();
    let demand: Vec<f64> = dst.iter().map(|&j| mu1.masses[j]).collect();
    let flow = min_cost_transport(&cost, supply, demand);
    let mut entries = Vec::new();
    for (a, &i) in src.iter().enumerate() {
        for (b, &j) in dst.iter().enumerate() {
            if flow[a][b] > 0.0 {
                entries.push(PlanEntry { from: i, to: j, mass: flow[a][b], shift: space.signed_steps(i, j) });
            }
        }
    }
    Ok(TransportPlan::from_entries(space, entries))
}

/// Successive shortest paths with Dijkstra on reduced costs.
///
/// Graph nodes: `0..p` sources, `p..p+q` sinks, `p+q` super source, `p+q+1` super sink.
fn min_cost_transport(cost: &[Vec<f64>], mut supply: Vec<f64>, mut demand: Vec<f64>) -> Vec<Vec<f64>> {
    const EPS: f64 = 1e-15;
    let p = supply.len();
    let q = demand.len();
    let (s, t) = (p + q, p + q + 1);
    let v = p + q + 2;
    let mut flow = vec![vec![0.0; q]; p];
    let mut pot = vec![0.0; v];

    // Residual arcs out of `u`: (target, capacity, cost).
    let arcs = |u: usize, flow: &[Vec<f64>], supply: &[f64], demand: &[f64]| -> Vec<(usize, f64, f64)> {
        let mut out = Vec::new();
        if u == s {
            for (a, &cap) in supply.iter().enumerate() {
                if cap > EPS {
                    out.push((a, cap, 0.0));
                }
            }
        } else if u < p {
            for b in 0..q {
                out.push((p + b, f64::INFINITY, cost[u][b]));
            }
        } else if u < p + q {
            let b = u - p;
            for a in 0..p {
                if flow[a][b] > EPS {
                    out.push((a, flow[a][b], -cost[a][b]));
                }
            }
            if demand[b] > EPS {
                out.push((t, demand[b], 0.0));
            }
        }
        out
    };

    loop {
        let mut dist = vec![f64::INFINITY; v];
        let mut prev: Vec<Option<(usize, f64)>> = vec![None; v];
        let mut done = vec![false; v];
        dist[s] = 0.0;
        loop {
            let mut u = usize::MAX;
            let mut best = f64::INFINITY;
            for (node, &d) in dist.iter().enumerate() {
                if !done[node] && d < best {
                    best = d;
                    u = node;
                }
            }
            if u == usize::MAX {
                break;
            }
            done[u] = true;
            for (w, cap, c) in arcs(u, &flow, &supply, &demand) {
                let reduced = (c + pot[u] - pot[w]).max(0.0);
                if !done[w] && dist[u] + reduced < dist[w] {
                    dist[w] = dist[u] + reduced;
                    prev[w] = Some((u, cap));
                }
            }
        }
        if !dist[t].is_finite() {
            break;
        }
        for node in 0..v {
            if dist[node].is_finite() {
                pot[node] += dist[node];
            }
        }
        let mut bottleneck = f64::INFINITY;
        let mut node = t;
        while let Some((u, cap)) = prev[node] {
            bottleneck = bottleneck.min(cap);
            node = u;
        }
        let mut node = t;
        while let Some((u, _)) = prev[node] {
            if u == s {
                supply[node] -= bottleneck;
            } else if node == t {
                demand[u - p] -= bottleneck;
            } else if u < p {
                flow[u][node - p] += bottleneck;
            } else {
                flow[node][u - p] -= bottleneck;
            }
            node = u;
        }
        if bottleneck <= EPS {
            break;
        }
    }
    flow
}

/// Displacement interpolation generated by the quantile plan.
#[derive(Debug, Clone, PartialEq)]
pub struct InterpolationPath {
    pub times: Vec<f64>,
    pub slices: Vec<DiscreteMeasure>,
    pub plan: TransportPlan,
}

impl InterpolationPath {
    /// `slice,node,density` table.
    pub fn density_csv(&self, space: &ModelSpace) -> String {
        let mut out = String::from("t,node,density\n");
        for (t, mu) in self.times.iter().zip(&self.slices) {
            for (i, r) in mu.density(space).iter().enumerate() {
                let _ = writeln!(out, "{t},{i},{r:.17e}");
            }
        }
        out
    }
}

/// Pushes every plan entry a fraction `t` along its geodesic, splitting mass linearly between
/// the two bracketing nodes.
fn interpolate_plan(space: &ModelSpace, plan: &TransportPlan, t: f64) -> Vec<f64> {
    let n = space.len() as i64;
    let mut masses = vec![0.0; space.len()];
    let wrap = |k: i64| -> usize {
        match space.topology() {
            Topology::Circle => k.rem_euclid(n) as usize,
            Topology::IntervalNeumann => k.clamp(0, n - 1) as usize,
        }
    };
    for e in &plan.entries {
        let pos = e.from as f64 + t * e.shift as f64;
        let base = pos.floor();
        let frac = pos - base;
        let k = base as i64;
        masses[wrap(k)] += e.mass * (1.0 - frac);
        if frac > 0.0 {
            masses[wrap(k + 1)] += e.mass * frac;
        }
    }
    masses
}

pub fn displacement_interpolation(
    space: &ModelSpace,
    mu0: &DiscreteMeasure,
    mu1: &DiscreteMeasure,
    times: &[f64],
) -> Result<InterpolationPath> {
    if let Some(t) = times.iter().find(|t| !(0.0..=1.0).contains(*t)) {
        return Err(LabError::InvalidParameter(format!("interpolation time {t} outside [0, 1]")));
    }
    let plan = w2_quantile(space, mu0, mu1)?;
    let slices = times
        .iter()
        .map(|&t| {
            let masses = match t {
                0.0 => mu0.masses.clone(),
                1.0 => mu1.masses.clone(),
                _ => interpolate_plan(space, &plan, t),
            };
            DiscreteMeasure { masses, space_id: mu0.space_id.clone() }
        })
        .collect();
    Ok(InterpolationPath { times: times.to_vec(), slices, plan })
}

/// Action of the constant-speed lift: `sum mass * (length of the travelled geodesic)^2`.
pub fn plan_action(space: &ModelSpace, path: &InterpolationPath) -> f64 {
    path.plan
        .entries
        .iter()
        .map(|e| e.mass * space.distance(e.from, e.to).max(e.shift.unsigned_abs() as f64 * space.spacing()).powi(2))
        .sum()
}

/// `max_{t, i} mu_t(i) / m_i` over all slices.
pub fn compression_bound(space: &ModelSpace, path: &InterpolationPath) -> f64 {
    path.slices.iter().flat_map(|mu| mu.density(space).into_inner()).fold(0.0, f64::max)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct CdStarOutcome {
    /// `int rho_t^{1-1/N'} dm - int [sigma^{(1-t)} rho_0^{-1/N'} + sigma^{(t)} rho_1^{-1/N'}] dpi`.
    pub margin: f64,
    /// An infinite distortion coefficient was hit on the support of the plan.
    pub vacuous: bool,
}

/// Reduced curvature-dimension convexity along the quantile geodesic at time `t`.
pub fn cd_star_check(
    space: &ModelSpace,
    mu0: &DiscreteMeasure,
    mu1: &DiscreteMeasure,
    t: f64,
    cd: CurvatureDimension,
    n_prime: f64,
) -> Result<CdStarOutcome> {
    if !(n_prime >= cd.n) {
        return Err(LabError::InvalidParameter(format!("need N' >= N, got N' = {n_prime}, N = {}", cd.n)));
    }
    let path = displacement_interpolation(space, mu0, mu1, &[t])?;
    let expo = 1.0 / n_prime;
    let rho_t = path.slices[0].density(space);
    let lhs: f64 = rho_t.iter().zip(space.measure()).map(|(r, m)| r.powf(1.0 - expo) * m).sum();
    let rho0 = mu0.density(space);
    let rho1 = mu1.density(space);
    let mut rhs = 0.0;
    for e in &path.plan.entries {
        let theta = space.distance(e.from, e.to);
        let s0 = sigma_coefficient(1.0 - t, theta, cd.k, n_prime)?;
        let s1 = sigma_coefficient(t, theta, cd.k, n_prime)?;
        if s0.is_infinite() || s1.is_infinite() {
            return Ok(CdStarOutcome { margin: f64::INFINITY, vacuous: true });
        }
        rhs += e.mass * (s0.value() * rho0[e.from].powf(-expo) + s1.value() * rho1[e.to].powf(-expo));
    }
    Ok(CdStarOutcome { margin: lhs - rhs, vacuous: false })
}

/// Transport replay of the two-time log estimate between balls `B_r(y)` (time `t`) and `B_r(x)` (time `s`).
///
/// The margin is `RHS - LHS` of
/// `int log(u(g1, s) / u(g0, t)) dpi <= A / (4 (t-s) e^{2K tau/3}) + (N/2) log((1 - e^{2Kt/3}) / (1 - e^{2Ks/3}))`,
/// with `tau = s` for `K >= 0` and `tau = t` otherwise, `A` the plan action and `u = H f + eps`.
#[allow(clippy::too_many_arguments)]
pub fn harnack_transport_check(
    solver: &SpectralSolver,
    f: &ScalarField,
    x: usize,
    y: usize,
    s: f64,
    t: f64,
    cd: CurvatureDimension,
    r: f64,
    tolerance: f64,
) -> Result<InequalityReport> {
    let space = solver.space();
    if !(s > 0.0 && s < t) {
        return Err(LabError::Domain(format!("need 0 < s < t, got s = {s}, t = {t}")));
    }
    if !(r > 0.0) {
        return Err(LabError::InvalidParameter(format!("ball radius must be > 0, got {r}")));
    }
    if f.iter().any(|&v| v < 0.0) {
        return Err(LabError::Precondition("f must be nonnegative".into()));
    }
    let eps = 1e-12 * f.sup_norm().max(1.0);
    let us = solver.heat_apply(f, s)?.map(|v| v + eps);
    let ut = solver.heat_apply(f, t)?.map(|v| v + eps);
    let mu0 = DiscreteMeasure::ball_uniform(space, y, r)?;
    let mu1 = DiscreteMeasure::ball_uniform(space, x, r)?;
    let path = displacement_interpolation(space, &mu0, &mu1, &[0.0, 1.0])?;
    let action = plan_action(space, &path);
    let lhs: f64 = path.plan.entries.iter().map(|e| e.mass * (us[e.to].ln() - ut[e.from].ln())).sum();
    let (dist_coeff, log_term) = harnack_constants(cd, s, t)?;
    let rhs = action * dist_coeff + log_term;
    let params = ReportParams::new(space, cd, &[s, t])
        .with("x", x as f64)
        .with("y", y as f64)
        .with("r", r);
    Ok(InequalityReport::scalar("harnack_transport", params, rhs - lhs, tolerance)?
        .extra("lhs", lhs)
        .extra("action", action)
        .extra("ball_nodes_x", mu1.support_size() as f64)
        .extra("ball_nodes_y", mu0.support_size() as f64))
}
