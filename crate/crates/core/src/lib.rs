//! Numerical lab for heat semigroups and curvature-dimension inequalities on weighted 1-D spaces.

pub mod calculus;
pub mod error;
pub mod fields;
pub mod heat;
pub mod inequalities;
pub mod report;
pub mod scenario;
pub mod space;
pub mod transport;

pub use calculus::{CurvePath, EdgeField, ScalarField};
pub use error::{LabError, Result};
pub use fields::{FieldSpec, ResolvedField};
pub use heat::{gaussian_kernel_oracle, GaussianKernelSample, HeatKernelField, SpectralSolver};
pub use report::{InequalityReport, ReportParams, Verdict};
pub use space::{CurvatureDimension, ModelSpace, ModelSpec, Topology, WeightProfile};
pub use transport::{DiscreteMeasure, InterpolationPath, PlanEntry, Sigma, TransportPlan};
