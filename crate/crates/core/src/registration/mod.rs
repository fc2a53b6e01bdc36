//! Three-step deformable registration of an inflated lobe model onto its
//! deflated counterpart: a global affine map, a piecewise-affine control
//! grid, and a Laplacian-regularized refinement of the surface vertices with
//! harmonic propagation into the interior and the bronchial tree.

mod config;
mod objective;
mod optimizer;
mod steps;

use alloc::format;
use alloc::string::String;
use alloc::vec::Vec;

use nalgebra::Matrix4;

pub use config::{GridRegularization, RegistrationConfig, StepToggles};
pub use objective::{FrozenObjective, ObjectiveBreakdown};
pub use optimizer::{Step, StepTrace, Termination};

use crate::distance::{centerline_one_way_distance, surface_distance, MetricReport};
use crate::error::{Error, Result};
use crate::geometry::{bind_barycentric, LaplacianOperator, LobeModel, Vec3};

/// Evaluates `E` for an already deformed source, with the smoothness term
/// taken over `displacement` and `laplacian` (grid or surface field).
pub fn evaluate_objective(
    deformed: &LobeModel,
    target: &LobeModel,
    displacement: &[Vec3],
    laplacian: &LaplacianOperator,
    config: &RegistrationConfig,
) -> Result<ObjectiveBreakdown> {
    config.validate()?;
    if displacement.len() != laplacian.len() {
        return Err(Error::InvalidArgument(format!(
            "displacement field has {} entries but the Laplacian has {} rows",
            displacement.len(),
            laplacian.len()
        )));
    }
    let ds = surface_distance(deformed.surface(), target.surface(), config.gamma)?;
    let dc = centerline_one_way_distance(deformed.centerline(), target.centerline())?;
    let reg: f64 = laplacian.apply(displacement).iter().map(|v| v.norm_squared()).sum();
    Ok(ObjectiveBreakdown::new(ds * ds, config.alpha * dc * dc, config.beta * reg))
}

#[derive(Debug, Clone, PartialEq)]
pub struct RegistrationResult {
    /// The source model moved onto the target; same topology and ordering.
    pub deformed: LobeModel,
    /// Per surface vertex: deformed minus original position.
    pub surface_displacement: Vec<Vec3>,
    pub centerline_displacement: Vec<Vec3>,
    /// The STEP-1 map in homogeneous coordinates (identity if skipped).
    pub affine: Matrix4<f64>,
    pub traces: Vec<StepTrace>,
    pub metrics: MetricReport,
    pub warnings: Vec<String>,
}

impl RegistrationResult {
    pub fn trace(&self, step: Step) -> Option<&StepTrace> {
        self.traces.iter().find(|t| t.step == step)
    }
}

fn check_pair(source: &LobeModel, target: &LobeModel) -> Result<()> {
    if source.label() != target.label() {
        return Err(Error::InvalidArgument(format!(
            "source lobe is {} but target lobe is {}",
            source.label().as_str(),
            target.label().as_str()
        )));
    }
    Ok(())
}

const SCOUT_ITERS: usize = 30;
const SCOUT_PATIENCE: usize = 5;

struct Pipeline<'a> {
    sources: Vec<&'a LobeModel>,
    targets: Vec<&'a LobeModel>,
    config: &'a RegistrationConfig,
    current: Vec<LobeModel>,
    traces: Vec<StepTrace>,
    warnings: Vec<String>,
    affine: Matrix4<f64>,
    max_move: f64,
}

impl<'a> Pipeline<'a> {
    fn new(pairs: &[(&'a LobeModel, &'a LobeModel)], config: &'a RegistrationConfig) -> Result<Self> {
        config.validate()?;
        for (s, t) in pairs {
            check_pair(s, t)?;
        }
        let all: Vec<_> = pairs.iter().flat_map(|(s, _)| s.all_points()).collect();
        Ok(Self {
            sources: pairs.iter().map(|p| p.0).collect(),
            targets: pairs.iter().map(|p| p.1).collect(),
            config,
            current: pairs.iter().map(|p| p.0.clone()).collect(),
            traces: Vec::new(),
            warnings: Vec::new(),
            affine: Matrix4::identity(),
            max_move: config.step_fraction * crate::geometry::bbox_diagonal(&all),
        })
    }

    fn pairs(&self) -> Vec<(&LobeModel, &LobeModel)> {
        self.current.iter().zip(&self.targets).map(|(s, t)| (s, *t)).collect()
    }

    fn record(&mut self, trace: StepTrace) {
        if let Some(w) = &trace.warning {
            self.warnings.push(w.clone());
        }
        self.traces.push(trace);
    }

    fn affine(&mut self) -> Result<()> {
        let (problem, theta0) = steps::affine_problem(&self.pairs(), self.config);
        // short runs from several orientations; the best one is continued
        let scout = RegistrationConfig { max_iters: SCOUT_ITERS, patience: SCOUT_PATIENCE, ..self.config.clone() };
        let mut best: Option<(f64, Vec<Vec3>)> = None;
        for start in steps::affine_starts(&self.pairs(), theta0[3]) {
            let Ok(out) = optimizer::minimize(&problem, start, Step::Affine, &scout, self.max_move) else { continue };
            let e = out.state.breakdown.total;
            if best.as_ref().is_none_or(|(b, _)| e < *b) {
                best = Some((e, out.state.theta));
            }
        }
        let start = best.map_or(theta0, |(_, theta)| theta);
        let out = optimizer::minimize(&problem, start, Step::Affine, self.config, self.max_move)?;
        let hilum = self.current[0].hilum();
        let sources: Vec<&LobeModel> = self.current.iter().collect();
        let moved = steps::deformed_models(&problem, &sources, &out.state.theta)?;
        self.affine = steps::affine_matrix(&out.state.theta, &hilum);
        self.current = moved;
        self.record(out.trace);
        Ok(())
    }

    fn piecewise(&mut self) -> Result<()> {
        let (problem, _grid) = steps::grid_problem(&self.pairs(), self.config)?;
        let out = optimizer::minimize(&problem, problem.zero_controls(), Step::Piecewise, self.config, self.max_move)?;
        let sources: Vec<&LobeModel> = self.current.iter().collect();
        self.current = steps::deformed_models(&problem, &sources, &out.state.theta)?;
        self.record(out.trace);
        Ok(())
    }

    fn local(&mut self) -> Result<()> {
        let bindings = self
            .sources
            .iter()
            .map(|s| bind_barycentric(&s.centerline().positions(), s.tet_mesh()))
            .collect::<Result<Vec<_>>>()?;
        let refs: Vec<&[_]> = bindings.iter().map(|b| b.as_slice()).collect();
        let problem = steps::local_problem(&self.pairs(), &refs, self.config)?;
        let out = optimizer::minimize(&problem, problem.zero_controls(), Step::Local, self.config, self.max_move)?;
        let sources: Vec<&LobeModel> = self.current.iter().collect();
        self.current = steps::deformed_models(&problem, &sources, &out.state.theta)?;
        self.record(out.trace);
        Ok(())
    }

    fn finish(self) -> Result<Vec<RegistrationResult>> {
        self.current
            .into_iter()
            .zip(self.sources.iter().zip(&self.targets))
            .map(|(deformed, (source, target))| {
                let diff = |a: &[Vec3], b: &[Vec3]| a.iter().zip(b).map(|(x, y)| x - y).collect::<Vec<_>>();
                Ok(RegistrationResult {
                    surface_displacement: diff(deformed.surface().vertices(), source.surface().vertices()),
                    centerline_displacement: diff(&deformed.centerline().positions(), &source.centerline().positions()),
                    metrics: MetricReport::evaluate(&deformed, target, &[])?,
                    deformed,
                    affine: self.affine,
                    traces: self.traces.clone(),
                    warnings: self.warnings.clone(),
                })
            })
            .collect()
    }
}

/// Registers `source` (inflated) onto `target` (deflated) with the enabled
/// steps run in order.
pub fn register_lobe(
    source: &LobeModel,
    target: &LobeModel,
    config: &RegistrationConfig,
) -> Result<RegistrationResult> {
    let mut p = Pipeline::new(&[(source, target)], config)?;
    if config.steps.affine {
        p.affine()?;
    }
    if config.steps.piecewise {
        p.piecewise()?;
    }
    if config.steps.local {
        p.local()?;
    }
    Ok(p.finish()?.remove(0))
}

/// Registers every lobe pair independently; failures stay per lobe.
pub fn register_case(pairs: &[(LobeModel, LobeModel)], config: &RegistrationConfig) -> Vec<Result<RegistrationResult>> {
    pairs.iter().map(|(s, t)| register_lobe(s, t, config)).collect()
}

/// Ablation: all lobes share one affine map and one control grid, so they
/// cannot move independently. The per-surface refinement is not run since
/// it is not a shared transform.
pub fn register_shared(
    pairs: &[(LobeModel, LobeModel)],
    config: &RegistrationConfig,
) -> Result<Vec<RegistrationResult>> {
    if pairs.is_empty() {
        return Err(Error::InvalidArgument("no lobe pairs given".into()));
    }
    let refs: Vec<(&LobeModel, &LobeModel)> = pairs.iter().map(|(s, t)| (s, t)).collect();
    let mut p = Pipeline::new(&refs, config)?;
    if config.steps.affine {
        p.affine()?;
    }
    if config.steps.piecewise {
        p.piecewise()?;
    }
    p.finish()
}

/// The STEP-2 objective with correspondences frozen at grid displacement
/// `theta` (one vector per grid vertex, vertex order of
/// [`crate::geometry::DeformationGrid`] built around `source`).
pub fn piecewise_frozen_objective(
    source: &LobeModel,
    target: &LobeModel,
    theta: Vec<Vec3>,
    config: &RegistrationConfig,
) -> Result<FrozenObjective> {
    config.validate()?;
    let (problem, _) = steps::grid_problem(&[(source, target)], config)?;
    if theta.len() != problem.controls {
        return Err(Error::InvalidArgument(format!(
            "expected {} grid displacements, got {}",
            problem.controls,
            theta.len()
        )));
    }
    FrozenObjective::at(problem, theta)
        .map(|(f, _)| f)
        .ok_or_else(|| Error::InvalidArgument("grid displacement inverts an element".into()))
}
