//! Deterministic ellipsoidal lobe phantoms with a known deflation
//! deformation: radial contraction with separate bronchus and parenchyma
//! strains, a rigid rotation about the hilum, pruned target branches and
//! surface noise.

mod deform;
mod lobe;
mod prune;

use alloc::format;
use alloc::vec::Vec;

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

pub use deform::{apply_ground_truth_deformation, GroundTruthDeformation};
pub use lobe::generate_lobe;
pub use prune::prune_terminals;

use crate::distance::{Landmark, LandmarkKind};
use crate::error::{Error, Result};
use crate::geometry::{LobeLabel, LobeModel, Point3};

/// Everything needed to generate one phantom case.
#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
#[cfg_attr(feature = "serde", serde(default, deny_unknown_fields))]
pub struct PhantomSpec {
    pub seed: u64,
    pub label: LobeLabel,
    /// Hilum position; the ellipsoid is centred on it.
    pub center: [f64; 3],
    /// Ellipsoid half-axes in mm; the z axis carries the tetrahedral spine.
    pub half_axes: [f64; 3],
    pub target_triangles: usize,
    /// Bifurcation levels; the tree has `2^depth` terminals.
    pub branching_depth: usize,
    /// Terminals sit at this fraction of the hilum-to-surface distance.
    pub bronchus_fraction: f64,
    /// Half-angle of the cone (about +z) that terminal directions fill.
    pub branch_cone_deg: f64,
    /// Longest centerline segment before internal nodes are inserted.
    pub max_segment_mm: f64,
    pub bronchus_strain: f64,
    pub parenchyma_strain: f64,
    /// Width of the cosine ramp between the two strain regions.
    pub blend_band_mm: f64,
    pub rotation_axis: [f64; 3],
    pub rotation_deg: f64,
    pub prune_fraction: f64,
    /// Target surface vertices move along their normal by up to this much.
    pub noise_mm: f64,
    pub landmarks_per_kind: usize,
}

impl Default for PhantomSpec {
    fn default() -> Self {
        Self {
            seed: 0,
            label: LobeLabel::Upper,
            center: [0.0; 3],
            half_axes: [42.0, 38.0, 55.0],
            target_triangles: 500,
            branching_depth: 6,
            bronchus_fraction: 0.65,
            branch_cone_deg: 120.0,
            max_segment_mm: 5.0,
            bronchus_strain: 0.292,
            parenchyma_strain: 0.395,
            blend_band_mm: 2.0,
            rotation_axis: [0.2, 1.0, 0.3],
            rotation_deg: 15.0,
            prune_fraction: 0.3,
            noise_mm: 0.2,
            landmarks_per_kind: 12,
        }
    }
}

impl PhantomSpec {
    pub fn validate(&self) -> Result<()> {
        let bad = |field: &str, why: &str| Err(Error::Spec(format!("{field}: {why}")));
        if self.half_axes.iter().any(|&a| !(a > 0.0)) {
            return bad("half_axes", "must be positive");
        }
        if self.target_triangles < 40 {
            return bad("target_triangles", "must be at least 40");
        }
        if !(1..=10).contains(&self.branching_depth) {
            return bad("branching_depth", "must be in 1..=10");
        }
        if !(self.bronchus_fraction > 0.0 && self.bronchus_fraction < 1.0) {
            return bad("bronchus_fraction", "must be in (0, 1)");
        }
        if !(self.branch_cone_deg > 0.0 && self.branch_cone_deg <= 180.0) {
            return bad("branch_cone_deg", "must be in (0, 180]");
        }
        if !(self.max_segment_mm > 0.0) {
            return bad("max_segment_mm", "must be positive");
        }
        for (name, s) in [("bronchus_strain", self.bronchus_strain), ("parenchyma_strain", self.parenchyma_strain)] {
            if !(s > -1.0) {
                return bad(name, "must exceed -1");
            }
        }
        if !(self.blend_band_mm >= 0.0) {
            return bad("blend_band_mm", "must be non-negative");
        }
        if self.rotation_deg != 0.0 && Point3::from(self.rotation_axis).norm() == 0.0 {
            return bad("rotation_axis", "must be non-zero");
        }
        if !(self.prune_fraction >= 0.0 && self.prune_fraction < 1.0) {
            return bad("prune_fraction", "must be in [0, 1)");
        }
        if !(self.noise_mm >= 0.0) {
            return bad("noise_mm", "must be non-negative");
        }
        Ok(())
    }

    pub(crate) fn rng(&self, stream: u64) -> ChaCha8Rng {
        let mut rng = ChaCha8Rng::seed_from_u64(self.seed);
        rng.set_stream(stream);
        rng
    }
}

/// Ground truth recorded alongside a generated case.
#[derive(Debug, Clone, PartialEq)]
pub struct GroundTruth {
    pub bronchus_strain: f64,
    pub parenchyma_strain: f64,
    /// For every deflated centerline node, the inflated node it came from.
    /// Surface vertices correspond one to one.
    pub centerline_map: Vec<usize>,
    pub landmarks: Vec<Landmark>,
    pub deformation: GroundTruthDeformation,
}

#[derive(Debug, Clone, PartialEq)]
pub struct PhantomCase {
    pub inflated: LobeModel,
    pub deflated: LobeModel,
    /// The deformed inflated model before pruning and noise.
    pub truth_model: LobeModel,
    pub truth: GroundTruth,
}

const STREAM_PRUNE: u64 = 2;
const STREAM_NOISE: u64 = 3;
const STREAM_LANDMARKS: u64 = 4;

/// Generates the inflated model, deforms it, prunes target branches, adds
/// surface noise and draws evaluation landmarks.
pub fn generate_case(spec: &PhantomSpec) -> Result<PhantomCase> {
    spec.validate()?;
    let inflated = generate_lobe(spec)?;
    let (truth_model, deformation) = apply_ground_truth_deformation(&inflated, spec)?;
    let (pruned, centerline_map) =
        prune_terminals(truth_model.centerline(), spec.prune_fraction, spec.rng(STREAM_PRUNE).gen())?;

    let mut rng = spec.rng(STREAM_NOISE);
    let surf = truth_model.surface();
    let noisy: Vec<Point3> = surf
        .vertices()
        .iter()
        .zip(surf.normals())
        .map(|(v, n)| if spec.noise_mm > 0.0 { v + n * rng.gen_range(-spec.noise_mm..=spec.noise_mm) } else { *v })
        .collect();
    let mut tet = truth_model.tet_mesh().vertices().to_vec();
    for (i, &t) in truth_model.tet_mesh().surface_vertices().iter().enumerate() {
        tet[t] = noisy[i];
    }
    let noisy_surface = surf.with_vertices(noisy)?;
    let noisy_tet = crate::geometry::TetrahedralMesh::new(
        tet,
        truth_model.tet_mesh().tetrahedra().to_vec(),
        truth_model.tet_mesh().surface_vertices().to_vec(),
    )
    .map_err(|e| Error::Spec(format!("surface noise inverts the lobe mesh: {e}")))?;
    let deflated = LobeModel::new(spec.label, noisy_surface, noisy_tet, pruned.clone())?;

    let mut rng = spec.rng(STREAM_LANDMARKS);
    let mut surface_ids: Vec<usize> = (0..inflated.surface().len()).collect();
    surface_ids.shuffle(&mut rng);
    let mut landmarks: Vec<Landmark> = surface_ids
        .into_iter()
        .take(spec.landmarks_per_kind)
        .map(|i| Landmark { kind: LandmarkKind::Surface, source_index: i, target: truth_model.surface().vertices()[i] })
        .collect();
    let mut junctions = pruned.junctions();
    junctions.shuffle(&mut rng);
    landmarks.extend(junctions.into_iter().take(spec.landmarks_per_kind).map(|j| Landmark {
        kind: LandmarkKind::Bronchus,
        source_index: centerline_map[j],
        target: pruned.nodes()[j].position,
    }));

    Ok(PhantomCase {
        inflated,
        deflated,
        truth_model,
        truth: GroundTruth {
            bronchus_strain: spec.bronchus_strain,
            parenchyma_strain: spec.parenchyma_strain,
            centerline_map,
            landmarks,
            deformation,
        },
    })
}
