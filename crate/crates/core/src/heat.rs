//! Heat semigroup by dense spectral decomposition of the discrete generator.
//!
//! The generator `L` is self-adjoint in `L^2(m)`, so `S = D^{1/2} L D^{-1/2}`
//! (with `D = diag(m)`) is symmetric. We diagonalize `S = Q diag(lambda) Q^T`
//! and represent `H_t f = sum_k e^{lambda_k t} <f, e_k>_m e_k` with
//! `e_k = D^{-1/2} q_k`.

use std::fmt::Write as _;

use nalgebra::{DMatrix, DVector, SymmetricEigen};

use crate::calculus::{check_len, ScalarField};
use crate::error::{LabError, Result};
use crate::space::ModelSpace;

#[derive(Debug, Clone)]
pub struct SpectralSolver {
    space: ModelSpace,
    /// Nonincreasing, `eigenvalues[0] == 0`.
    eigenvalues: Vec<f64>,
    /// Columns are orthonormal eigenvectors of the symmetrized generator.
    basis: DMatrix<f64>,
    sqrt_m: Vec<f64>,
}

/// `p(t, x, .)`, the density of `H_t delta_x` with respect to `m`.
#[derive(Debug, Clone, PartialEq)]
pub struct HeatKernelField {
    pub base: usize,
    pub time: f64,
    pub density: ScalarField,
    /// Set when the discrete kernel dips below `-1e-12` (time below the grid's diffusive scale).
    pub resolution_warning: bool,
}

impl SpectralSolver {
    pub fn new(space: &ModelSpace) -> Result<Self> {
        let n = space.len();
        let h = space.spacing();
        let vol = space.cell_volumes();
        let mut s = DMatrix::<f64>::zeros(n, n);
        for (e, &w) in space.edge_weights().iter().enumerate() {
            let (i, j) = space.edge_nodes(e);
            let off = w / (h * (vol[i] * vol[j]).sqrt());
            s[(i, j)] += off;
            s[(j, i)] += off;
            s[(i, i)] -= w / (h * vol[i]);
            s[(j, j)] -= w / (h * vol[j]);
        }
        let eig = SymmetricEigen::try_new(s, f64::EPSILON, 0)
            .ok_or_else(|| LabError::Numerical(format!("symmetric eigensolver did not converge (n = {n})")))?;

        let mut order: Vec<usize> = (0..n).collect();
        order.sort_by(|&a, &b| eig.eigenvalues[b].total_cmp(&eig.eigenvalues[a]));
        let sqrt_m: Vec<f64> = space.measure().iter().map(|m| m.sqrt()).collect();
        let mut basis = DMatrix::<f64>::zeros(n, n);
        let mut eigenvalues = Vec::with_capacity(n);
        for (col, &k) in order.iter().enumerate() {
            eigenvalues.push(eig.eigenvalues[k].min(0.0));
            basis.set_column(col, &eig.eigenvectors.column(k));
        }
        // the kernel is known exactly: constants, i.e. sqrt(m) after symmetrization
        let top = DVector::from_vec(sqrt_m.clone());
        let top = &top / top.norm();
        basis.set_column(0, &top);
        eigenvalues[0] = 0.0;
        // restore orthogonality lost in the eigensolver; keeps the semigroup law at roundoff
        let qr = basis.qr();
        let signs: Vec<f64> = qr.r().diagonal().iter().map(|d| d.signum()).collect();
        let mut basis = qr.q();
        for (mut col, s) in basis.column_iter_mut().zip(&signs) {
            col *= *s;
        }
        let lambda_gap = eigenvalues.get(1).copied().unwrap_or(0.0);
        if lambda_gap >= 0.0 {
            return Err(LabError::Numerical(format!(
                "spectral gap vanished (lambda_2 = {lambda_gap}); the space must be connected"
            )));
        }
        Ok(Self { space: space.clone(), eigenvalues, basis, sqrt_m })
    }

    pub fn space(&self) -> &ModelSpace {
        &self.space
    }

    pub fn eigenvalues(&self) -> &[f64] {
        &self.eigenvalues
    }

    /// Eigenfield `k`, orthonormal in `L^2(m)`.
    pub fn eigenfield(&self, k: usize) -> ScalarField {
        ScalarField(self.basis.column(k).iter().zip(&self.sqrt_m).map(|(q, s)| q / s).collect())
    }

    fn coefficients(&self, f: &[f64]) -> DVector<f64> {
        let weighted = DVector::from_iterator(f.len(), f.iter().zip(&self.sqrt_m).map(|(v, s)| v * s));
        self.basis.tr_mul(&weighted)
    }

    fn synthesize(&self, coeffs: &DVector<f64>) -> ScalarField {
        let v = &self.basis * coeffs;
        ScalarField(v.iter().zip(&self.sqrt_m).map(|(a, s)| a / s).collect())
    }

    fn spectral_apply(&self, f: &ScalarField, symbol: impl Fn(f64) -> f64) -> Result<ScalarField> {
        check_len(&self.space, f)?;
        let mut c = self.coefficients(f);
        for (ck, &lambda) in c.iter_mut().zip(&self.eigenvalues) {
            *ck *= symbol(lambda);
        }
        Ok(self.synthesize(&c))
    }

    /// `H_t f`.
    pub fn heat_apply(&self, f: &ScalarField, t: f64) -> Result<ScalarField> {
        if !(t >= 0.0) {
            return Err(LabError::Domain(format!("heat flow needs t >= 0, got {t}")));
        }
        check_len(&self.space, f)?;
        if t == 0.0 || f.iter().all(|&v| v == f[0]) {
            return Ok(f.clone());
        }
        self.spectral_apply(f, |lambda| (lambda * t).exp())
    }

    /// `d/dt H_t f = Lap H_t f`, evaluated spectrally.
    pub fn heat_time_derivative(&self, f: &ScalarField, t: f64) -> Result<ScalarField> {
        if !(t > 0.0) {
            return Err(LabError::Domain(format!("time derivative needs t > 0, got {t}")));
        }
        self.spectral_apply(f, |lambda| lambda * (lambda * t).exp())
    }

    /// `Lap f` reconstructed from the spectrum.
    pub fn apply_generator(&self, f: &ScalarField) -> Result<ScalarField> {
        self.spectral_apply(f, |lambda| lambda)
    }

    /// Density of `H_t delta_x`, where `delta_x = indicator(x) / m_x`.
    pub fn heat_kernel(&self, x: usize, t: f64) -> Result<HeatKernelField> {
        if !(t > 0.0) {
            return Err(LabError::Domain(format!("heat kernel needs t > 0, got {t}")));
        }
        if x >= self.space.len() {
            return Err(LabError::InvalidParameter(format!("base node {x} out of range")));
        }
        let n = self.space.len();
        let row = self.basis.row(x);
        let decay: Vec<f64> = self.eigenvalues.iter().map(|l| (l * t).exp()).collect();
        let mut density = vec![0.0; n];
        for (y, slot) in density.iter_mut().enumerate() {
            let mut acc = 0.0;
            for k in 0..n {
                acc += self.basis[(y, k)] * decay[k] * row[k];
            }
            *slot = acc / (self.sqrt_m[y] * self.sqrt_m[x]);
        }
        let resolution_warning = density.iter().any(|&p| p < -1e-12);
        Ok(HeatKernelField { base: x, time: t, density: ScalarField(density), resolution_warning })
    }

    /// Smallest time at which kernel positivity is expected to be resolved.
    pub fn min_kernel_time(&self) -> f64 {
        self.space.spacing().powi(2)
    }

    /// `k, eigenvalue` table.
    pub fn spectrum_csv(&self) -> String {
        let mut out = String::from("k,eigenvalue\n");
        for (k, l) in self.eigenvalues.iter().enumerate() {
            let _ = writeln!(out, "{k},{l:.17e}");
        }
        out
    }
}

/// Closed-form Euclidean heat kernel quantities at distance `r`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GaussianKernelSample {
    pub density: f64,
    /// `|grad log p|^2 = r^2 / 4t^2`
    pub grad_log_sq: f64,
    /// `d/dt log p = r^2 / 4t^2 - N / 2t`
    pub dt_log: f64,
}

pub fn gaussian_kernel_oracle(dim: f64, t: f64, r: f64) -> Result<GaussianKernelSample> {
    if !(t > 0.0) {
        return Err(LabError::Domain(format!("gaussian kernel needs t > 0, got {t}")));
    }
    if !(dim >= 1.0) || !(r >= 0.0) {
        return Err(LabError::InvalidParameter(format!("need N >= 1 and r >= 0, got N = {dim}, r = {r}")));
    }
    let radial = r * r / (4.0 * t * t);
    Ok(GaussianKernelSample {
        density: (4.0 * std::f64::consts::PI * t).powf(-dim / 2.0) * (-r * r / (4.0 * t)).exp(),
        grad_log_sq: radial,
        dt_log: radial - dim / (2.0 * t),
    })
}

/// `node,x,value` table for any nodal field.
pub fn field_csv(space: &ModelSpace, field: &[f64]) -> String {
    let mut out = String::from("node,x,value\n");
    for (i, (x, v)) in space.nodes().iter().zip(field).enumerate() {
        let _ = writeln!(out, "{i},{x:.17e},{v:.17e}");
    }
    out
}
