//! Geometric types shared by every other module: surfaces, tetrahedral
//! meshes, centerline trees, control grids, barycentric bindings and the
//! discrete Laplacian. All lengths are millimetres.

mod barycentric;
mod centerline;
mod grid;
mod laplacian;
pub mod primitives;
mod surface;
mod tetmesh;

use alloc::format;
use alloc::vec::Vec;

pub use barycentric::{apply_deformation, bind_barycentric, BarycentricBinding, TetSpace};
pub use centerline::{CenterlineNode, CenterlineTree, NodeKind};
pub use grid::DeformationGrid;
pub use laplacian::{cotangent_weights, discrete_laplacian, EdgeWeights, LaplacianKind, LaplacianOperator};
pub use surface::{compute_vertex_normals, TriangleSurface};
pub use tetmesh::TetrahedralMesh;

use crate::error::{Error, Result};

/// A position in millimetres.
pub type Point3 = nalgebra::Vector3<f64>;
/// A displacement or direction.
pub type Vec3 = nalgebra::Vector3<f64>;

/// Inside-test tolerance for embedded points, in millimetres.
pub const EMBED_EPS: f64 = 1e-6;
/// Points this close to a mesh are snapped onto it instead of rejected.
pub const SNAP_DISTANCE: f64 = 0.1;

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
#[cfg_attr(feature = "serde", serde(rename_all = "snake_case"))]
pub enum LobeLabel {
    Upper,
    Lower,
}

impl LobeLabel {
    pub fn as_str(self) -> &'static str {
        match self {
            LobeLabel::Upper => "upper",
            LobeLabel::Lower => "lower",
        }
    }
}

/// One lobe: closed surface, its tetrahedralization and the bronchial
/// centerline tree embedded in it. This is the unit of registration.
#[derive(Debug, Clone, PartialEq)]
pub struct LobeModel {
    label: LobeLabel,
    surface: TriangleSurface,
    tet_mesh: TetrahedralMesh,
    centerline: CenterlineTree,
}

impl LobeModel {
    /// Validates the closed-manifold surface, the tet boundary and the
    /// embedding of every centerline node.
    pub fn new(
        label: LobeLabel,
        surface: TriangleSurface,
        tet_mesh: TetrahedralMesh,
        centerline: CenterlineTree,
    ) -> Result<Self> {
        surface.check_closed_manifold()?;
        tet_mesh.check_boundary(&surface)?;
        if let Err(Error::Binding { index, distance }) = bind_barycentric(&centerline.positions(), &tet_mesh) {
            return Err(Error::invariant(
                "centerline embedded in tet mesh",
                format!("centerline node {index} is {distance:.4} mm outside the lobe"),
            ));
        }
        Ok(Self { label, surface, tet_mesh, centerline })
    }

    /// Assembles a model without re-validating the embedding; used for
    /// deformed copies of a validated model.
    pub(crate) fn from_parts(
        label: LobeLabel,
        surface: TriangleSurface,
        tet_mesh: TetrahedralMesh,
        centerline: CenterlineTree,
    ) -> Self {
        Self { label, surface, tet_mesh, centerline }
    }

    pub fn label(&self) -> LobeLabel {
        self.label
    }

    pub fn surface(&self) -> &TriangleSurface {
        &self.surface
    }

    pub fn tet_mesh(&self) -> &TetrahedralMesh {
        &self.tet_mesh
    }

    pub fn centerline(&self) -> &CenterlineTree {
        &self.centerline
    }

    pub fn hilum(&self) -> Point3 {
        self.centerline.hilum()
    }

    /// Surface, tet and centerline vertices in that order.
    pub fn all_points(&self) -> Vec<Point3> {
        let mut pts = Vec::with_capacity(self.surface.len() + self.tet_mesh.vertices().len() + self.centerline.len());
        pts.extend_from_slice(self.surface.vertices());
        pts.extend_from_slice(self.tet_mesh.vertices());
        pts.extend(self.centerline.nodes().iter().map(|n| n.position));
        pts
    }

    /// Length of the diagonal of the axis-aligned bounding box.
    pub fn bbox_diagonal(&self) -> f64 {
        bbox_diagonal(&self.all_points())
    }

    /// Replaces every vertex position, keeping all topology.
    pub fn with_positions(&self, surface: Vec<Point3>, tet: Vec<Point3>, centerline: &[Point3]) -> Result<Self> {
        Ok(Self {
            label: self.label,
            surface: self.surface.with_vertices(surface)?,
            tet_mesh: self.tet_mesh.with_vertices_unchecked(tet),
            centerline: self.centerline.with_positions(centerline)?,
        })
    }

    pub fn with_centerline(&self, centerline: CenterlineTree) -> Self {
        Self { centerline, ..self.clone() }
    }
}

pub fn bbox_diagonal(points: &[Point3]) -> f64 {
    let Some(first) = points.first() else { return 0.0 };
    let (lo, hi) = points.iter().fold((*first, *first), |(lo, hi), p| (lo.inf(p), hi.sup(p)));
    (hi - lo).norm()
}
