//! Deformation heterogeneity: splitting displacements into contraction
//! towards the hilum and rotation about it, sampling bronchial branches,
//! and comparing bronchus and parenchyma strain.

mod field;
mod stats;
mod strain;

pub use field::{
    decompose_displacement, field_records, Decomposition, DeformationField, FieldComponent, FieldPart, FieldRecord,
    HILUM_EPS,
};
pub use stats::{compare_regions, f_survival, regularized_incomplete_beta, RegionComparison};
pub use strain::{
    cauchy_strain, regress_strain, sample_branch, strain_report, summarize_cases, BranchSampling, BranchStrain,
    PointKind, RegionSummary, Regression, StrainReference, StrainReport, StrainSample, SurfaceHit,
};
