use alloc::format;

use crate::error::{Error, Result};
use crate::geometry::LaplacianKind;

/// Which smoothness operator the piecewise-affine step penalizes.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
#[cfg_attr(feature = "serde", serde(rename_all = "snake_case"))]
pub enum GridRegularization {
    /// Laplacian over the control-grid adjacency.
    Grid,
    /// Surface Laplacian of the model displacement induced by the grid.
    #[default]
    ModelVertices,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
#[cfg_attr(feature = "serde", serde(default, deny_unknown_fields))]
pub struct StepToggles {
    pub affine: bool,
    pub piecewise: bool,
    pub local: bool,
}

impl Default for StepToggles {
    fn default() -> Self {
        Self { affine: true, piecewise: true, local: true }
    }
}

#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
#[cfg_attr(feature = "serde", serde(default, deny_unknown_fields))]
pub struct RegistrationConfig {
    /// Weight of the squared centerline distance.
    pub alpha: f64,
    /// Weight of the Laplacian smoothness term.
    pub beta: f64,
    /// Normal-disagreement penalty in correspondence search, in mm.
    pub gamma: f64,
    /// Iterations without improvement before a step stops.
    pub patience: usize,
    pub max_iters: usize,
    /// Improvements smaller than this count as stalled iterations.
    pub min_improvement: f64,
    /// Largest per-iteration vertex displacement as a fraction of the
    /// bounding-box diagonal.
    pub step_fraction: f64,
    pub backtrack_factor: f64,
    pub max_backtracks: usize,
    /// Steps shorter than this (mm) end the step with a warning.
    pub min_step_mm: f64,
    pub grid_cells: [usize; 3],
    pub grid_margin_mm: f64,
    pub steps: StepToggles,
    pub grid_regularization: GridRegularization,
    pub surface_laplacian: LaplacianKind,
    /// Keep the centerline term active during local refinement.
    pub local_centerline_term: bool,
}

impl Default for RegistrationConfig {
    fn default() -> Self {
        Self {
            alpha: 2.0,
            beta: 2.0,
            gamma: 1.0,
            patience: 20,
            max_iters: 1000,
            min_improvement: 1e-9,
            step_fraction: 0.05,
            backtrack_factor: 0.5,
            max_backtracks: 10,
            min_step_mm: 1e-6,
            grid_cells: [4, 4, 4],
            grid_margin_mm: 5.0,
            steps: StepToggles::default(),
            grid_regularization: GridRegularization::ModelVertices,
            surface_laplacian: LaplacianKind::Cotangent,
            local_centerline_term: true,
        }
    }
}

impl RegistrationConfig {
    /// The surface-only ablation: no centerline term anywhere.
    pub fn surface_only(&self) -> Self {
        Self { alpha: 0.0, ..self.clone() }
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |msg: alloc::string::String| Err(Error::Config(msg));
        for (name, v) in [("alpha", self.alpha), ("beta", self.beta), ("gamma", self.gamma)] {
            if !(v >= 0.0 && v.is_finite()) {
                return bad(format!("{name} must be a finite non-negative number, got {v}"));
            }
        }
        if self.patience == 0 {
            return bad("patience must be at least 1".into());
        }
        if self.max_iters < self.patience {
            return bad(format!("max_iters ({}) must be at least patience ({})", self.max_iters, self.patience));
        }
        if !(self.min_improvement >= 0.0) {
            return bad("min_improvement must be non-negative".into());
        }
        if !(self.step_fraction > 0.0 && self.step_fraction <= 1.0) {
            return bad(format!("step_fraction must be in (0, 1], got {}", self.step_fraction));
        }
        if !(self.backtrack_factor > 0.0 && self.backtrack_factor < 1.0) {
            return bad(format!("backtrack_factor must be in (0, 1), got {}", self.backtrack_factor));
        }
        if self.max_backtracks == 0 {
            return bad("max_backtracks must be at least 1".into());
        }
        if !(self.min_step_mm > 0.0) {
            return bad("min_step_mm must be positive".into());
        }
        if self.grid_cells.contains(&0) {
            return bad("grid_cells must all be at least 1".into());
        }
        if !(self.grid_margin_mm >= 0.0) {
            return bad("grid_margin_mm must be non-negative".into());
        }
        Ok(())
    }
}
