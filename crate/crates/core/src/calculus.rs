//! Discrete Dirichlet-form calculus on a [`ModelSpace`].
//!
//! The form is `E(f, g) = sum_e w_e h (Df)_e (Dg)_e / Z` over edges, with
//! `(Df)_e = (f_j - f_i) / h`. The Laplacian is the operator it induces in
//! `L^2(m)`, so self-adjointness and integration by parts hold to roundoff.
//! Node values of `Gamma` redistribute each edge's energy density to its two
//! endpoints in proportion to the measure, which keeps `int Gamma dm` equal to
//! the edge form.

use std::ops::{Deref, DerefMut};

use serde::{Deserialize, Serialize};

use crate::error::{LabError, Result};
use crate::space::{CurvatureDimension, ModelSpace};

/// One real value per node.
#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(transparent)]
pub struct ScalarField(pub Vec<f64>);

/// One real value per edge.
#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(transparent)]
pub struct EdgeField(pub Vec<f64>);

impl ScalarField {
    pub fn constant(space: &ModelSpace, value: f64) -> Self {
        Self(vec![value; space.len()])
    }

    pub fn from_fn(space: &ModelSpace, f: impl Fn(f64) -> f64) -> Self {
        Self(space.nodes().iter().map(|&x| f(x)).collect())
    }

    pub fn map(&self, f: impl Fn(f64) -> f64) -> Self {
        Self(self.0.iter().map(|&v| f(v)).collect())
    }

    pub fn zip_map(&self, other: &Self, f: impl Fn(f64, f64) -> f64) -> Self {
        Self(self.0.iter().zip(&other.0).map(|(&a, &b)| f(a, b)).collect())
    }

    pub fn min(&self) -> f64 {
        self.0.iter().copied().fold(f64::INFINITY, f64::min)
    }

    pub fn max(&self) -> f64 {
        self.0.iter().copied().fold(f64::NEG_INFINITY, f64::max)
    }

    pub fn sup_norm(&self) -> f64 {
        self.0.iter().fold(0.0, |acc, v| acc.max(v.abs()))
    }

    pub fn into_inner(self) -> Vec<f64> {
        self.0
    }
}

impl From<Vec<f64>> for ScalarField {
    fn from(v: Vec<f64>) -> Self {
        Self(v)
    }
}

impl Deref for ScalarField {
    type Target = [f64];
    fn deref(&self) -> &[f64] {
        &self.0
    }
}

impl DerefMut for ScalarField {
    fn deref_mut(&mut self) -> &mut [f64] {
        &mut self.0
    }
}

impl Deref for EdgeField {
    type Target = [f64];
    fn deref(&self) -> &[f64] {
        &self.0
    }
}

pub(crate) fn check_len(space: &ModelSpace, f: &[f64]) -> Result<()> {
    if f.len() != space.len() {
        return Err(LabError::Dimension { expected: space.len(), actual: f.len() });
    }
    if let Some(v) = f.iter().find(|v| !v.is_finite()) {
        return Err(LabError::Domain(format!("field contains a non-finite entry {v}")));
    }
    Ok(())
}

/// `int f g dm`.
pub fn inner(space: &ModelSpace, f: &[f64], g: &[f64]) -> f64 {
    space.measure().iter().zip(f).zip(g).map(|((m, a), b)| m * a * b).sum()
}

/// `int f dm`.
pub fn integrate(space: &ModelSpace, f: &[f64]) -> f64 {
    space.measure().iter().zip(f).map(|(m, a)| m * a).sum()
}

fn edge_diff(space: &ModelSpace, f: &[f64], e: usize) -> f64 {
    let (i, j) = space.edge_nodes(e);
    (f[j] - f[i]) / space.spacing()
}

/// Weighted-Sturm-Liouville Laplacian `(1/w)(w f')'` with reflected Neumann
/// closure on intervals and wrap-around on the circle.
pub fn laplacian(space: &ModelSpace, f: &ScalarField) -> Result<ScalarField> {
    check_len(space, f)?;
    Ok(ScalarField(laplacian_raw(space, f)))
}

pub(crate) fn laplacian_raw(space: &ModelSpace, f: &[f64]) -> Vec<f64> {
    let h = space.spacing();
    let mut flux = vec![0.0; space.len()];
    for (e, &w) in space.edge_weights().iter().enumerate() {
        let (i, j) = space.edge_nodes(e);
        let q = w * (f[j] - f[i]);
        flux[i] += q;
        flux[j] -= q;
    }
    flux.iter().zip(space.cell_volumes()).map(|(q, v)| q / (v * h)).collect()
}

pub fn carre_du_champ_edge(space: &ModelSpace, f: &ScalarField, g: &ScalarField) -> Result<EdgeField> {
    check_len(space, f)?;
    check_len(space, g)?;
    Ok(EdgeField(
        (0..space.edge_count()).map(|e| edge_diff(space, f, e) * edge_diff(space, g, e)).collect(),
    ))
}

/// Node-centred `Gamma(f, g)`.
pub fn carre_du_champ(space: &ModelSpace, f: &ScalarField, g: &ScalarField) -> Result<ScalarField> {
    let edge = carre_du_champ_edge(space, f, g)?;
    Ok(ScalarField(edge_to_nodes(space, &edge)))
}

/// `Gamma(f) = Gamma(f, f)`.
pub fn gamma(space: &ModelSpace, f: &ScalarField) -> Result<ScalarField> {
    check_len(space, f)?;
    let edge: Vec<f64> = (0..space.edge_count())
        .map(|e| {
            let d = edge_diff(space, f, e);
            d * d
        })
        .collect();
    Ok(ScalarField(edge_to_nodes(space, &edge)))
}

fn edge_to_nodes(space: &ModelSpace, edge: &[f64]) -> Vec<f64> {
    // node i receives w_e h / 2 of each incident edge, divided by its cell volume
    let h = space.spacing();
    let mut acc = vec![0.0; space.len()];
    for (e, (&w, &val)) in space.edge_weights().iter().zip(edge).enumerate() {
        let (i, j) = space.edge_nodes(e);
        let share = 0.5 * w * h * val;
        acc[i] += share;
        acc[j] += share;
    }
    acc.iter().zip(space.cell_volumes()).map(|(a, v)| a / v).collect()
}

/// `E(f, g) = int Gamma(f, g) dm` in edge form.
pub fn dirichlet_form(space: &ModelSpace, f: &ScalarField, g: &ScalarField) -> Result<f64> {
    check_len(space, f)?;
    check_len(space, g)?;
    let h = space.spacing();
    let sum: f64 = space
        .edge_weights()
        .iter()
        .enumerate()
        .map(|(e, &w)| w * h * edge_diff(space, f, e) * edge_diff(space, g, e))
        .sum();
    Ok(sum / space.total_volume())
}

/// `Ch(f) = 1/2 int Gamma(f) dm`.
pub fn cheeger_energy(space: &ModelSpace, f: &ScalarField) -> Result<f64> {
    Ok(0.5 * dirichlet_form(space, f, f)?)
}

/// `int Gamma(f, g) dm + int f Laplacian(g) dm`, zero up to roundoff.
pub fn integration_by_parts_defect(space: &ModelSpace, f: &ScalarField, g: &ScalarField) -> Result<f64> {
    let form = dirichlet_form(space, f, g)?;
    let lap = laplacian(space, g)?;
    Ok(form + inner(space, f, &lap))
}

/// `gamma_2(f) = 1/2 Laplacian(Gamma(f)) - Gamma(f, Laplacian f)`.
pub fn gamma2(space: &ModelSpace, f: &ScalarField) -> Result<ScalarField> {
    let g = gamma(space, f)?;
    let lap = laplacian(space, f)?;
    let lap_g = laplacian(space, &g)?;
    let mixed = carre_du_champ(space, f, &lap)?;
    Ok(lap_g.zip_map(&mixed, |a, b| 0.5 * a - b))
}

/// `sqrt(Gamma(f)) / f`, the slope of `log f` relative to the measure `f m`.
pub fn weighted_gradient_log(space: &ModelSpace, f: &ScalarField) -> Result<ScalarField> {
    check_len(space, f)?;
    if let Some(v) = f.iter().find(|v| **v <= 0.0) {
        return Err(LabError::Domain(format!("log-gradient needs a positive field, found {v}")));
    }
    let g = gamma(space, f)?;
    Ok(g.zip_map(f, |gv, fv| gv.sqrt() / fv))
}

/// Integrated Bochner inequality, returned as LHS minus RHS:
/// `int 1/2 Lap(phi) Gamma(f) - phi Gamma(Lap f, f) - K phi Gamma(f) - phi (Lap f)^2 / N`.
pub fn be_check(space: &ModelSpace, f: &ScalarField, phi: &ScalarField, cd: CurvatureDimension) -> Result<f64> {
    check_len(space, f)?;
    check_len(space, phi)?;
    if let Some(v) = phi.iter().find(|v| **v < 0.0) {
        return Err(LabError::Precondition(format!("test function must be nonnegative, found {v}")));
    }
    let g = gamma(space, f)?;
    let lap_f = laplacian(space, f)?;
    let lap_phi = laplacian(space, phi)?;
    let mixed = carre_du_champ(space, &lap_f, f)?;
    let mut total = 0.0;
    for i in 0..space.len() {
        let m = space.measure()[i];
        total += m
            * (0.5 * lap_phi[i] * g[i]
                - phi[i] * mixed[i]
                - cd.k * phi[i] * g[i]
                - phi[i] * lap_f[i] * lap_f[i] / cd.n);
    }
    Ok(total)
}

/// Pointwise Bochner margin `gamma_2(f) - K Gamma(f) - (Lap f)^2 / N`.
pub fn bochner_margin(space: &ModelSpace, f: &ScalarField, cd: CurvatureDimension) -> Result<ScalarField> {
    let g2 = gamma2(space, f)?;
    let g = gamma(space, f)?;
    let lap = laplacian(space, f)?;
    Ok(ScalarField(
        (0..space.len()).map(|i| g2[i] - cd.k * g[i] - lap[i] * lap[i] / cd.n).collect(),
    ))
}

/// A discrete curve visiting adjacent (or repeated) nodes at uniform parameter steps.
#[derive(Debug, Clone, PartialEq)]
pub struct CurvePath {
    nodes: Vec<usize>,
}

impl CurvePath {
    pub fn new(space: &ModelSpace, nodes: Vec<usize>) -> Result<Self> {
        if nodes.len() < 2 {
            return Err(LabError::InvalidPath("a path needs at least two nodes".into()));
        }
        for w in nodes.windows(2) {
            if w[0] >= space.len() || w[1] >= space.len() {
                return Err(LabError::InvalidPath(format!("node index out of range in {w:?}")));
            }
            if space.steps_between(w[0], w[1]) > 1 {
                return Err(LabError::InvalidPath(format!("nodes {} and {} are not adjacent", w[0], w[1])));
            }
        }
        Ok(Self { nodes })
    }

    /// Straight path between two nodes of an interval, or along increasing index on a circle.
    pub fn monotone(space: &ModelSpace, from: usize, to: usize) -> Result<Self> {
        let nodes = if from <= to { (from..=to).collect() } else { (to..=from).rev().collect() };
        Self::new(space, nodes)
    }

    pub fn nodes(&self) -> &[usize] {
        &self.nodes
    }

    pub fn reversed(&self) -> Self {
        Self { nodes: self.nodes.iter().rev().copied().collect() }
    }

    /// Metric speed on each parameter step `1 / (len - 1)`.
    pub fn speeds(&self, space: &ModelSpace) -> Vec<f64> {
        let ds = 1.0 / (self.nodes.len() - 1) as f64;
        self.nodes.windows(2).map(|w| space.distance(w[0], w[1]) / ds).collect()
    }
}

/// `int_0^1 G(gamma_s) |gamma'_s| ds - |f(gamma_1) - f(gamma_0)|` with `G = sqrt(Gamma f)`.
pub fn upper_gradient_check(space: &ModelSpace, f: &ScalarField, path: &CurvePath) -> Result<f64> {
    check_len(space, f)?;
    let g = gamma(space, f)?.map(f64::sqrt);
    let ds = 1.0 / (path.nodes.len() - 1) as f64;
    let integral: f64 = path
        .nodes
        .windows(2)
        .zip(path.speeds(space))
        .map(|(w, speed)| 0.5 * (g[w[0]] + g[w[1]]) * speed * ds)
        .sum();
    let first = path.nodes[0];
    let last = *path.nodes.last().expect("path is non-empty");
    Ok(integral - (f[last] - f[first]).abs())
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::f64::consts::PI;

    fn interior_max_err(space: &ModelSpace, a: &[f64], b: impl Fn(f64) -> f64) -> f64 {
        let mask = space.interior_mask();
        (0..space.len())
            .filter(|&i| mask[i])
            .map(|i| (a[i] - b(space.nodes()[i])).abs())
            .fold(0.0, f64::max)
    }

    #[test]
    fn laplacian_of_constant_is_zero() {
        for s in [ModelSpace::interval(11, 2.0).unwrap(), ModelSpace::sphere_model(21, 3.0).unwrap()] {
            let lap = laplacian(&s, &ScalarField::constant(&s, 4.2)).unwrap();
            assert!(lap.iter().all(|&v| v == 0.0));
        }
    }

    #[test]
    fn laplacian_of_cosine_on_interval() {
        let s = ModelSpace::interval(201, PI).unwrap();
        let f = ScalarField::from_fn(&s, f64::cos);
        let lap = laplacian(&s, &f).unwrap();
        let err = interior_max_err(&s, &lap, |x| -x.cos());
        assert!(err < 0.1 * s.spacing().powi(2), "err {err}");
    }

    #[test]
    fn laplacian_on_sphere_model() {
        let s = ModelSpace::sphere_model(201, 2.0).unwrap();
        let f = ScalarField::from_fn(&s, f64::cos);
        let lap = laplacian(&s, &f).unwrap();
        let err = interior_max_err(&s, &lap, |x| -2.0 * x.cos());
        assert!(err < 1.0 * s.spacing().powi(2), "err {err}");
    }

    #[test]
    fn laplacian_dimension_mismatch() {
        let s = ModelSpace::interval(5, 1.0).unwrap();
        let err = laplacian(&s, &ScalarField(vec![0.0; 4])).unwrap_err();
        assert_eq!(err, LabError::Dimension { expected: 5, actual: 4 });
    }

    #[test]
    fn edge_gamma_examples() {
        let s = ModelSpace::interval(9, 1.0).unwrap();
        let x = ScalarField::from_fn(&s, |x| x);
        let two_x = ScalarField::from_fn(&s, |x| 2.0 * x);
        let c = ScalarField::constant(&s, 3.0);
        assert!(carre_du_champ_edge(&s, &c, &c).unwrap().iter().all(|&v| v == 0.0));
        assert!(carre_du_champ_edge(&s, &x, &x).unwrap().iter().all(|&v| (v - 1.0).abs() < 1e-12));
        assert!(carre_du_champ_edge(&s, &x, &two_x).unwrap().iter().all(|&v| (v - 2.0).abs() < 1e-12));
        let g = carre_du_champ(&s, &x, &x).unwrap();
        assert!(g.iter().all(|&v| (v - 1.0).abs() < 1e-12));
    }

    #[test]
    fn gamma_of_cosine_on_circle() {
        let s = ModelSpace::circle(200, 2.0 * PI).unwrap();
        let f = ScalarField::from_fn(&s, f64::cos);
        let g = gamma(&s, &f).unwrap();
        let err = interior_max_err(&s, &g, |x| x.sin().powi(2));
        assert!(err < s.spacing().powi(2), "err {err}");
    }

    #[test]
    fn cheeger_energy_examples() {
        let s = ModelSpace::interval(101, 1.0).unwrap();
        assert_eq!(cheeger_energy(&s, &ScalarField::constant(&s, 2.0)).unwrap(), 0.0);
        let x = ScalarField::from_fn(&s, |x| x);
        assert!((cheeger_energy(&s, &x).unwrap() - 0.5).abs() < 1e-12);
        let f = ScalarField::from_fn(&s, |x| (3.0 * x).sin());
        let f3 = f.map(|v| 3.0 * v);
        let (a, b) = (cheeger_energy(&s, &f).unwrap(), cheeger_energy(&s, &f3).unwrap());
        assert!((b - 9.0 * a).abs() < 1e-12 * b);
    }

    #[test]
    fn integration_by_parts_is_exact() {
        let s = ModelSpace::interval(20, 1.0).unwrap();
        let f = ScalarField::from_fn(&s, |x| (5.0 * x).sin() + x * x);
        let g = ScalarField::from_fn(&s, |x| (2.0 * x).exp());
        assert!(integration_by_parts_defect(&s, &f, &g).unwrap().abs() < 1e-13 * 8.0);
        assert!(integration_by_parts_defect(&s, &f, &f).unwrap().abs() < 1e-13 * 4.0);
        let c = ScalarField::constant(&s, 1.5);
        assert_eq!(integration_by_parts_defect(&s, &c, &g).unwrap().abs(), 0.0);
    }

    #[test]
    fn gamma2_examples() {
        let s = ModelSpace::interval(101, 1.0).unwrap();
        let lin = ScalarField::from_fn(&s, |x| 3.0 * x - 1.0);
        let g2 = gamma2(&s, &lin).unwrap();
        assert!(interior_max_err(&s, &g2, |_| 0.0) < 1e-9);

        let c = ModelSpace::circle(200, 2.0 * PI).unwrap();
        let f = ScalarField::from_fn(&c, f64::cos);
        let g2 = gamma2(&c, &f).unwrap();
        let err = interior_max_err(&c, &g2, |x| x.cos().powi(2));
        assert!(err < 2.0 * c.spacing().powi(2), "err {err}");

        // BE(1, 2) on the 2-sphere model, saturated by the first harmonic
        let sp = ModelSpace::sphere_model(201, 2.0).unwrap();
        let f = ScalarField::from_fn(&sp, f64::cos);
        let margin = bochner_margin(&sp, &f, CurvatureDimension { k: 1.0, n: 2.0 }).unwrap();
        let worst = (0..sp.len()).filter(|&i| sp.interior_mask()[i]).map(|i| margin[i]).fold(f64::INFINITY, f64::min);
        assert!(worst > -10.0 * sp.spacing().powi(2), "worst {worst}");
    }

    #[test]
    fn weighted_gradient_log_examples() {
        let s = ModelSpace::interval(201, 1.0).unwrap();
        let f = ScalarField::from_fn(&s, f64::exp);
        let g = weighted_gradient_log(&s, &f).unwrap();
        assert!(interior_max_err(&s, &g, |_| 1.0) < s.spacing().powi(2));
        let c = weighted_gradient_log(&s, &ScalarField::constant(&s, 2.0)).unwrap();
        assert!(c.iter().all(|&v| v == 0.0));
        let mut z = ScalarField::constant(&s, 1.0);
        z[7] = 0.0;
        assert!(matches!(weighted_gradient_log(&s, &z), Err(LabError::Domain(_))));
    }

    #[test]
    fn be_check_examples() {
        let s = ModelSpace::interval(201, PI).unwrap();
        let cd01 = CurvatureDimension { k: 0.0, n: 1.0 };
        let c = ScalarField::constant(&s, 1.0);
        assert_eq!(be_check(&s, &c, &c, cd01).unwrap(), 0.0);

        let f = ScalarField::from_fn(&s, |x| (2.0 * x).cos() + 0.3 * x.cos());
        let phi = ScalarField::from_fn(&s, |x| 1.0 + 0.5 * x.cos());
        assert!(be_check(&s, &f, &phi, cd01).unwrap() > -10.0 * s.spacing().powi(2));

        let sp = ModelSpace::sphere_model(201, 2.0).unwrap();
        let f = ScalarField::from_fn(&sp, f64::cos);
        let one = ScalarField::constant(&sp, 1.0);
        let v = be_check(&sp, &f, &one, CurvatureDimension { k: 1.0, n: 2.0 }).unwrap();
        assert!(v > -10.0 * sp.spacing().powi(2), "v {v}");

        let neg = ScalarField::constant(&sp, -1.0);
        assert!(matches!(be_check(&sp, &f, &neg, CurvatureDimension { k: 1.0, n: 2.0 }), Err(LabError::Precondition(_))));
    }

    #[test]
    fn upper_gradient_examples() {
        let s = ModelSpace::interval(101, 1.0).unwrap();
        let path = CurvePath::monotone(&s, 0, 100).unwrap();
        let c = ScalarField::constant(&s, 1.0);
        assert_eq!(upper_gradient_check(&s, &c, &path).unwrap(), 0.0);
        let x = ScalarField::from_fn(&s, |x| x);
        let forward = upper_gradient_check(&s, &x, &path).unwrap();
        assert!(forward.abs() < s.spacing());
        let backward = upper_gradient_check(&s, &x, &path.reversed()).unwrap();
        assert!((forward - backward).abs() < 1e-14);
        assert!(matches!(CurvePath::new(&s, vec![0, 2]), Err(LabError::InvalidPath(_))));
    }

    #[test]
    fn chain_rule_converges() {
        // Gamma(exp f) vs exp(f)^2 Gamma(f) on interior nodes
        let err_at = |n: usize| {
            let s = ModelSpace::interval(n, 1.0).unwrap();
            let f = ScalarField::from_fn(&s, |x| (3.0 * x).sin());
            let phi_f = f.map(f64::exp);
            let lhs = gamma(&s, &phi_f).unwrap();
            let rhs = gamma(&s, &f).unwrap();
            (0..s.len())
                .filter(|&i| s.interior_mask()[i])
                .map(|i| (lhs[i] - phi_f[i].powi(2) * rhs[i]).abs())
                .fold(0.0, f64::max)
        };
        let (e1, e2, e3) = (err_at(51), err_at(101), err_at(201));
        let order = ((e1 / e2).log2() + (e2 / e3).log2()) / 2.0;
        assert!(order >= 1.0, "order {order}");
    }
}
