//! Finite discretizations of weighted one-dimensional model spaces.
//!
//! Every space is a uniform grid carrying a probability measure built from a
//! weight profile `w` by the trapezoid rule, plus the edge weights `w` at the
//! half-nodes that define the Dirichlet form. The flat interval and circle
//! model `CD(0,1)`, the sphere model `([0, pi], sin^{N-1})` models
//! `CD(N-1, N)` and the hyperbolic model `([h, R], sinh^{N-1})` models
//! `CD(-(N-1), N)`.

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::error::{LabError, Result};

/// Lower Ricci bound `k` and upper dimension bound `n`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CurvatureDimension {
    pub k: f64,
    pub n: f64,
}

impl CurvatureDimension {
    pub fn new(k: f64, n: f64) -> Result<Self> {
        if !k.is_finite() {
            return Err(LabError::InvalidParameter(format!("curvature K must be finite, got {k}")));
        }
        if !(n >= 1.0) || !n.is_finite() {
            return Err(LabError::InvalidParameter(format!("dimension N must be finite and >= 1, got {n}")));
        }
        Ok(Self { k, n })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Topology {
    IntervalNeumann,
    Circle,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", tag = "profile")]
pub enum WeightProfile {
    Flat,
    /// `sin(x)^exponent`
    SinPower { exponent: f64 },
    /// `sinh(x)^exponent`
    SinhPower { exponent: f64 },
    /// Node values supplied by the caller; half-node values are midpoint averages.
    Tabulated { values: Vec<f64> },
}

impl WeightProfile {
    fn eval(&self, x: f64) -> f64 {
        match self {
            WeightProfile::Flat => 1.0,
            WeightProfile::SinPower { exponent } => x.sin().powf(*exponent),
            WeightProfile::SinhPower { exponent } => x.sinh().powf(*exponent),
            WeightProfile::Tabulated { .. } => unreachable!("tabulated weights are not evaluated pointwise"),
        }
    }

    /// `(V', V'')` for `V = log w`, or `None` for tabulated weights.
    pub fn log_derivatives(&self, x: f64) -> Option<(f64, f64)> {
        match self {
            WeightProfile::Flat => Some((0.0, 0.0)),
            WeightProfile::SinPower { exponent } => {
                let s = x.sin();
                Some((exponent * x.cos() / s, -exponent / (s * s)))
            }
            WeightProfile::SinhPower { exponent } => {
                let s = x.sinh();
                Some((exponent * x.cosh() / s, -exponent / (s * s)))
            }
            WeightProfile::Tabulated { .. } => None,
        }
    }
}

/// Constructor name plus parameters; rebuilding with another node count is how
/// refinement sweeps are driven.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum ModelSpec {
    Interval { n: usize, length: f64 },
    Circle { n: usize, circumference: f64 },
    SphereModel { n: usize, dim: f64 },
    HyperbolicModel { n: usize, dim: f64, radius: f64 },
}

impl ModelSpec {
    pub fn build(&self) -> Result<ModelSpace> {
        match *self {
            ModelSpec::Interval { n, length } => ModelSpace::interval(n, length),
            ModelSpec::Circle { n, circumference } => ModelSpace::circle(n, circumference),
            ModelSpec::SphereModel { n, dim } => ModelSpace::sphere_model(n, dim),
            ModelSpec::HyperbolicModel { n, dim, radius } => ModelSpace::hyperbolic_model(n, dim, radius),
        }
    }

    pub fn nodes(&self) -> usize {
        match *self {
            ModelSpec::Interval { n, .. }
            | ModelSpec::Circle { n, .. }
            | ModelSpec::SphereModel { n, .. }
            | ModelSpec::HyperbolicModel { n, .. } => n,
        }
    }

    pub fn with_nodes(&self, nodes: usize) -> Self {
        let mut out = self.clone();
        match &mut out {
            ModelSpec::Interval { n, .. }
            | ModelSpec::Circle { n, .. }
            | ModelSpec::SphereModel { n, .. }
            | ModelSpec::HyperbolicModel { n, .. } => *n = nodes,
        }
        out
    }

    pub fn name(&self) -> &'static str {
        match self {
            ModelSpec::Interval { .. } => "interval",
            ModelSpec::Circle { .. } => "circle",
            ModelSpec::SphereModel { .. } => "sphere_model",
            ModelSpec::HyperbolicModel { .. } => "hyperbolic_model",
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ModelSpace {
    spec: Option<ModelSpec>,
    name: String,
    topology: Topology,
    profile: WeightProfile,
    nodes: Vec<f64>,
    spacing: f64,
    /// Weight profile at the nodes (clamped where it vanishes).
    node_density: Vec<f64>,
    /// Weight profile at the half-nodes, one per edge.
    edge_weight: Vec<f64>,
    /// Unnormalized trapezoid cell volumes.
    cell_volume: Vec<f64>,
    total_volume: f64,
    measure: Vec<f64>,
    expected_cd: CurvatureDimension,
}

fn check_nodes(n: usize) -> Result<()> {
    if n < 3 {
        return Err(LabError::InvalidGeometry(format!("need at least 3 nodes, got {n}")));
    }
    Ok(())
}

fn check_positive(name: &str, v: f64) -> Result<()> {
    if !(v > 0.0) || !v.is_finite() {
        return Err(LabError::InvalidGeometry(format!("{name} must be positive and finite, got {v}")));
    }
    Ok(())
}

fn check_dimension(dim: f64) -> Result<()> {
    if !(dim > 1.0) || !dim.is_finite() {
        return Err(LabError::InvalidParameter(format!("model dimension N must exceed 1, got {dim}")));
    }
    Ok(())
}

impl ModelSpace {
    /// Flat Neumann interval `[0, length]`.
    pub fn interval(n: usize, length: f64) -> Result<Self> {
        check_nodes(n)?;
        check_positive("length", length)?;
        let h = length / (n - 1) as f64;
        let nodes = (0..n).map(|i| i as f64 * h).collect::<Vec<_>>();
        let mut space = Self::assemble(
            "interval",
            Topology::IntervalNeumann,
            WeightProfile::Flat,
            nodes,
            h,
            vec![1.0; n],
            vec![1.0; n - 1],
            CurvatureDimension { k: 0.0, n: 1.0 },
        );
        space.spec = Some(ModelSpec::Interval { n, length });
        Ok(space)
    }

    /// Flat circle of the given circumference with arc-length distance.
    pub fn circle(n: usize, circumference: f64) -> Result<Self> {
        check_nodes(n)?;
        check_positive("circumference", circumference)?;
        let h = circumference / n as f64;
        let nodes = (0..n).map(|i| i as f64 * h).collect::<Vec<_>>();
        let mut space = Self::assemble(
            "circle",
            Topology::Circle,
            WeightProfile::Flat,
            nodes,
            h,
            vec![1.0; n],
            vec![1.0; n],
            CurvatureDimension { k: 0.0, n: 1.0 },
        );
        space.spec = Some(ModelSpec::Circle { n, circumference });
        Ok(space)
    }

    /// `([0, pi], sin^{N-1}(x) dx)`, the radial part of the round `N`-sphere.
    pub fn sphere_model(n: usize, dim: f64) -> Result<Self> {
        check_nodes(n)?;
        check_dimension(dim)?;
        let h = std::f64::consts::PI / (n - 1) as f64;
        // mirror the grid so the measure is symmetric about pi/2
        let nodes = (0..n)
            .map(|i| {
                let j = n - 1 - i;
                if i <= j {
                    i as f64 * h
                } else {
                    std::f64::consts::PI - j as f64 * h
                }
            })
            .collect::<Vec<_>>();
        let profile = WeightProfile::SinPower { exponent: dim - 1.0 };
        let half_step = profile.eval(0.5 * h);
        let mut density: Vec<f64> = (0..n).map(|i| profile.eval(i.min(n - 1 - i) as f64 * h)).collect();
        density[0] = half_step;
        density[n - 1] = half_step;
        let edges = (0..n - 1)
            .map(|e| {
                let j = n - 2 - e;
                // sin is symmetric about pi/2; evaluate from the nearer pole
                if e <= j {
                    profile.eval((e as f64 + 0.5) * h)
                } else {
                    profile.eval((j as f64 + 0.5) * h)
                }
            })
            .collect();
        let mut space = Self::assemble(
            "sphere_model",
            Topology::IntervalNeumann,
            profile,
            nodes,
            h,
            density,
            edges,
            CurvatureDimension { k: dim - 1.0, n: dim },
        );
        space.spec = Some(ModelSpec::SphereModel { n, dim });
        Ok(space)
    }

    /// `([h, R], sinh^{N-1}(x) dx)` with the origin excised by one grid step.
    pub fn hyperbolic_model(n: usize, dim: f64, radius: f64) -> Result<Self> {
        check_nodes(n)?;
        check_dimension(dim)?;
        if !(radius > 0.0) || !radius.is_finite() {
            return Err(LabError::InvalidParameter(format!("radius must be positive, got {radius}")));
        }
        let h = radius / n as f64;
        let nodes = (0..n).map(|i| (i + 1) as f64 * h).collect::<Vec<_>>();
        let profile = WeightProfile::SinhPower { exponent: dim - 1.0 };
        let density = nodes.iter().map(|&x| profile.eval(x)).collect();
        let edges = (0..n - 1).map(|e| profile.eval((e as f64 + 1.5) * h)).collect();
        let mut space = Self::assemble(
            "hyperbolic_model",
            Topology::IntervalNeumann,
            profile,
            nodes,
            h,
            density,
            edges,
            CurvatureDimension { k: -(dim - 1.0), n: dim },
        );
        space.spec = Some(ModelSpec::HyperbolicModel { n, dim, radius });
        Ok(space)
    }

    /// Neumann interval `[0, length]` with caller-supplied positive node weights.
    pub fn tabulated(length: f64, weights: Vec<f64>, expected_cd: CurvatureDimension) -> Result<Self> {
        let n = weights.len();
        check_nodes(n)?;
        check_positive("length", length)?;
        if let Some(w) = weights.iter().find(|w| !(**w > 0.0) || !w.is_finite()) {
            return Err(LabError::InvalidParameter(format!("tabulated weights must be positive, found {w}")));
        }
        let h = length / (n - 1) as f64;
        let nodes = (0..n).map(|i| i as f64 * h).collect();
        let edges = weights.windows(2).map(|p| 0.5 * (p[0] + p[1])).collect();
        Ok(Self::assemble(
            "tabulated",
            Topology::IntervalNeumann,
            WeightProfile::Tabulated { values: weights.clone() },
            nodes,
            h,
            weights,
            edges,
            expected_cd,
        ))
    }

    #[allow(clippy::too_many_arguments)]
    fn assemble(
        name: &str,
        topology: Topology,
        profile: WeightProfile,
        nodes: Vec<f64>,
        spacing: f64,
        node_density: Vec<f64>,
        edge_weight: Vec<f64>,
        expected_cd: CurvatureDimension,
    ) -> Self {
        let n = nodes.len();
        let mut cell_volume: Vec<f64> = node_density.iter().map(|w| w * spacing).collect();
        if topology == Topology::IntervalNeumann {
            cell_volume[0] *= 0.5;
            cell_volume[n - 1] *= 0.5;
        }
        let total_volume: f64 = cell_volume.iter().sum();
        let measure = cell_volume.iter().map(|q| q / total_volume).collect();
        Self {
            spec: None,
            name: name.to_string(),
            topology,
            profile,
            nodes,
            spacing,
            node_density,
            edge_weight,
            cell_volume,
            total_volume,
            measure,
            expected_cd,
        }
    }

    pub fn name(&self) -> &str {
        &self.name
    }

    pub fn spec(&self) -> Option<&ModelSpec> {
        self.spec.as_ref()
    }

    pub fn topology(&self) -> Topology {
        self.topology
    }

    pub fn profile(&self) -> &WeightProfile {
        &self.profile
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    pub fn nodes(&self) -> &[f64] {
        &self.nodes
    }

    pub fn spacing(&self) -> f64 {
        self.spacing
    }

    pub fn measure(&self) -> &[f64] {
        &self.measure
    }

    pub fn node_density(&self) -> &[f64] {
        &self.node_density
    }

    pub fn edge_weights(&self) -> &[f64] {
        &self.edge_weight
    }

    pub fn cell_volumes(&self) -> &[f64] {
        &self.cell_volume
    }

    /// Sum of the unnormalized cell volumes; `m_i = cell_i / total`.
    pub fn total_volume(&self) -> f64 {
        self.total_volume
    }

    pub fn expected_cd(&self) -> CurvatureDimension {
        self.expected_cd
    }

    /// Length of the underlying segment or circle.
    pub fn extent(&self) -> f64 {
        match self.topology {
            Topology::Circle => self.spacing * self.len() as f64,
            Topology::IntervalNeumann => self.spacing * (self.len() - 1) as f64,
        }
    }

    pub fn edge_count(&self) -> usize {
        self.edge_weight.len()
    }

    /// Endpoints `(i, i + 1)` of edge `e`, wrapping on the circle.
    pub fn edge_nodes(&self, e: usize) -> (usize, usize) {
        (e, (e + 1) % self.len())
    }

    /// Grid steps along the shortest path between two nodes.
    pub fn steps_between(&self, i: usize, j: usize) -> usize {
        let d = i.abs_diff(j);
        match self.topology {
            Topology::IntervalNeumann => d,
            Topology::Circle => d.min(self.len() - d),
        }
    }

    /// Signed steps of a shortest path from `i` to `j`; on the circle the
    /// antipodal tie resolves in the positive direction.
    pub fn signed_steps(&self, i: usize, j: usize) -> i64 {
        let raw = j as i64 - i as i64;
        match self.topology {
            Topology::IntervalNeumann => raw,
            Topology::Circle => {
                let n = self.len() as i64;
                let mut s = raw.rem_euclid(n);
                if 2 * s > n {
                    s -= n;
                }
                s
            }
        }
    }

    /// Grid distance `steps * h`.
    ///
    /// The step is rounded to 32 significant bits so every product with a step
    /// count below `2^21` is exact, which keeps the triangle inequality exact.
    pub fn distance(&self, i: usize, j: usize) -> f64 {
        self.steps_between(i, j) as f64 * metric_unit(self.spacing)
    }

    /// Nodes at least two grid steps away from any boundary.
    pub fn interior_mask(&self) -> Vec<bool> {
        let n = self.len();
        match self.topology {
            Topology::Circle => vec![true; n],
            Topology::IntervalNeumann => (0..n).map(|i| i >= 2 && i + 2 < n).collect(),
        }
    }

    /// Short hex fingerprint of the discretization.
    pub fn fingerprint(&self) -> String {
        let mut hasher = Sha256::new();
        hasher.update(self.name.as_bytes());
        hasher.update((self.len() as u64).to_le_bytes());
        for v in self.nodes.iter().chain(&self.measure).chain(&self.edge_weight) {
            hasher.update(v.to_bits().to_le_bytes());
        }
        let digest = hasher.finalize();
        digest.iter().take(8).map(|b| format!("{b:02x}")).collect()
    }
}

fn metric_unit(h: f64) -> f64 {
    let bits = h.to_bits();
    let keep = !((1u64 << 20) - 1);
    f64::from_bits(bits.wrapping_add(1u64 << 19) & keep)
}
