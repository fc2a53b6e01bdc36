use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand, ValueEnum};
use pneumoreg_core::analysis::{strain_report, DeformationField, FieldComponent, StrainReference};
use pneumoreg_core::distance::MetricReport;
use pneumoreg_core::geometry::{LobeLabel, LobeModel};
use pneumoreg_core::phantom::{generate_case, PhantomSpec};
use pneumoreg_core::registration::{
    register_lobe, register_shared, RegistrationConfig, RegistrationResult, StepToggles,
};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::formats::{parse_centerline, parse_surface, parse_tet_mesh, read_json, read_text, write_json};
use crate::manifest::{load_case, model_files, resolve_config, save_case, save_model, LoadedCase, LoadedLobe};
use crate::output::{field_rows, strain_rows, trace_rows, write_csv, MetricRow};

#[derive(Debug, Parser)]
#[command(name = "pneumoreg", version, about = "Deformable registration of inflated/deflated lung lobe models")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Generate a synthetic case with ground truth.
    Phantom(PhantomArgs),
    /// Register the inflated models of each case onto the deflated ones.
    Register(RegisterArgs),
    /// Strain analysis of registered cases.
    Analyze(AnalyzeArgs),
    /// Recompute accuracy metrics of registered cases.
    Evaluate(EvaluateArgs),
}

#[derive(Debug, Args)]
pub struct PhantomArgs {
    /// Phantom spec JSON: one lobe spec, or `{"lobes": [...]}`.
    #[arg(long)]
    pub spec: Option<PathBuf>,
    #[arg(long)]
    pub seed: Option<u64>,
    /// Fraction of terminal branches removed from the deflated tree.
    #[arg(long)]
    pub prune: Option<f64>,
    #[arg(long, default_value = "phantom")]
    pub case_id: String,
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum Ablation {
    /// Surface-only objective (alpha = 0).
    Lsm,
    /// One affine map and control grid shared by all lobes.
    Shared,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum StepName {
    Affine,
    Piecewise,
    Local,
}

#[derive(Debug, Args)]
pub struct RegisterArgs {
    /// Case manifest; repeat for several cases.
    #[arg(long = "case", required = true)]
    pub cases: Vec<PathBuf>,
    #[arg(long)]
    pub config: Option<PathBuf>,
    /// Output root; each case writes into `<out>/<case_id>/`.
    #[arg(long)]
    pub out: PathBuf,
    #[arg(long, value_enum)]
    pub ablation: Option<Ablation>,
    /// Steps to run, in pipeline order.
    #[arg(long, value_enum, value_delimiter = ',')]
    pub steps: Option<Vec<StepName>>,
    /// Cases registered in parallel.
    #[arg(long, default_value_t = 1)]
    pub jobs: usize,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum Reference {
    Inflated,
    Deflated,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum Component {
    Displacement,
    Contraction,
    Rotation,
}

#[derive(Debug, Args)]
pub struct AnalyzeArgs {
    #[arg(long = "case", required = true)]
    pub cases: Vec<PathBuf>,
    /// Output root passed to `register`.
    #[arg(long)]
    pub registration: PathBuf,
    #[arg(long)]
    pub out: PathBuf,
    /// State whose hilum distance is the reference length.
    #[arg(long, value_enum, default_value = "inflated")]
    pub reference: Reference,
    #[arg(long, value_enum, value_delimiter = ',', default_value = "displacement,contraction,rotation")]
    pub components: Vec<Component>,
}

#[derive(Debug, Args)]
pub struct EvaluateArgs {
    #[arg(long = "case", required = true)]
    pub cases: Vec<PathBuf>,
    #[arg(long)]
    pub registration: PathBuf,
    /// CSV destination; standard output if omitted.
    #[arg(long)]
    pub out: Option<PathBuf>,
}

pub fn run(cli: Cli) -> Result<()> {
    match cli.command {
        Command::Phantom(a) => phantom(&a).map(|_| ()),
        Command::Register(a) => register(&a),
        Command::Analyze(a) => analyze(&a),
        Command::Evaluate(a) => evaluate(&a),
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(untagged)]
enum PhantomFile {
    Case { lobes: Vec<PhantomSpec> },
    Lobe(PhantomSpec),
}

/// Ground truth written next to a generated case.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct TruthLobe {
    pub label: LobeLabel,
    pub spec: PhantomSpec,
    pub bronchus_strain: f64,
    pub parenchyma_strain: f64,
    /// Rotation about the hilum, row major.
    pub rotation: [[f64; 3]; 3],
    pub hilum: [f64; 3],
    /// Surface vertices correspond one to one; deflated centerline node `i`
    /// comes from inflated node `centerline_map[i]`.
    pub centerline_map: Vec<usize>,
    /// Deformed inflated model before pruning and noise.
    pub truth: crate::manifest::ModelFiles,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct TruthFile {
    pub case_id: String,
    pub lobes: Vec<TruthLobe>,
}

pub fn phantom(a: &PhantomArgs) -> Result<PathBuf> {
    let specs = match &a.spec {
        Some(p) => match read_json::<PhantomFile>(p)? {
            PhantomFile::Case { lobes } => lobes,
            PhantomFile::Lobe(s) => vec![s],
        },
        None => vec![PhantomSpec::default()],
    };
    let mut lobes = Vec::new();
    let mut truth = Vec::new();
    for mut spec in specs {
        if let Some(s) = a.seed {
            spec.seed = s;
        }
        if let Some(f) = a.prune {
            spec.prune_fraction = f;
        }
        let case = generate_case(&spec).map_err(|e| Error::Invalid(format!("lobe {}: {e}", spec.label.as_str())))?;
        let files = model_files("truth", spec.label);
        save_model(&a.out, &files, &case.truth_model)?;
        let r = case.truth.deformation.rotation.matrix();
        truth.push(TruthLobe {
            label: spec.label,
            bronchus_strain: case.truth.bronchus_strain,
            parenchyma_strain: case.truth.parenchyma_strain,
            rotation: [0, 1, 2].map(|i| [0, 1, 2].map(|j| r[(i, j)])),
            hilum: case.truth.deformation.hilum.into(),
            centerline_map: case.truth.centerline_map.clone(),
            truth: files,
            spec,
        });
        lobes.push(LoadedLobe {
            label: case.inflated.label(),
            inflated: case.inflated,
            deflated: case.deflated,
            landmarks: case.truth.landmarks,
        });
    }
    let mut labels: Vec<_> = lobes.iter().map(|l| l.label).collect();
    labels.sort();
    labels.dedup();
    if labels.len() != lobes.len() {
        return Err(Error::Invalid("phantom lobes need distinct labels".into()));
    }
    write_json(&a.out.join("truth.json"), &TruthFile { case_id: a.case_id.clone(), lobes: truth })?;
    save_case(&a.out, &a.case_id, &lobes)
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct StepSummary {
    pub step: String,
    pub iterations: usize,
    pub termination: String,
    pub final_objective: f64,
    pub warning: Option<String>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct LobeSummary {
    pub label: LobeLabel,
    /// Homogeneous STEP-1 map, row major.
    pub affine: [[f64; 4]; 4],
    pub steps: Vec<StepSummary>,
    pub warnings: Vec<String>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct RegistrationSummary {
    pub case_id: String,
    pub ablation: Option<String>,
    pub config: RegistrationConfig,
    pub lobes: Vec<LobeSummary>,
}

fn step_toggles(steps: &[StepName]) -> StepToggles {
    StepToggles {
        affine: steps.contains(&StepName::Affine),
        piecewise: steps.contains(&StepName::Piecewise),
        local: steps.contains(&StepName::Local),
    }
}

fn case_config(a: &RegisterArgs, case: &LoadedCase) -> Result<RegistrationConfig> {
    let mut config = resolve_config(a.config.as_deref(), &case.manifest.config)?;
    if let Some(steps) = &a.steps {
        config.steps = step_toggles(steps);
    }
    if a.ablation == Some(Ablation::Lsm) {
        config = config.surface_only();
    }
    Ok(config)
}

fn register_one(a: &RegisterArgs, path: &Path) -> Result<()> {
    let case = load_case(path)?;
    let config = case_config(a, &case)?;
    let case_id = case.manifest.case_id.clone();
    let pairs: Vec<(LobeModel, LobeModel)> =
        case.lobes.iter().map(|l| (l.inflated.clone(), l.deflated.clone())).collect();
    let results: Vec<RegistrationResult> = match a.ablation {
        Some(Ablation::Shared) => {
            register_shared(&pairs, &config).map_err(|e| Error::Invalid(format!("{case_id}: {e}")))?
        }
        _ => pairs
            .iter()
            .zip(&case.lobes)
            .map(|((s, t), l)| {
                register_lobe(s, t, &config)
                    .map_err(|e| Error::Invalid(format!("{case_id} lobe {}: {e}", l.label.as_str())))
            })
            .collect::<Result<_>>()?,
    };
    let dir = a.out.join(&case_id);
    let mut metrics = Vec::new();
    let mut lobes = Vec::new();
    for (lobe, result) in case.lobes.iter().zip(&results) {
        let label = lobe.label.as_str();
        for w in &result.warnings {
            eprintln!("warning: {case_id} lobe {label}: {w}");
        }
        save_model(&dir, &model_files("deformed", lobe.label), &result.deformed)?;
        write_csv(&dir.join(format!("trace_{label}.csv")), &trace_rows(&result.traces))?;
        let field = DeformationField::between(&lobe.inflated, &result.deformed)?;
        write_csv(&dir.join(format!("displacement_{label}.csv")), &field_rows(&field, FieldComponent::Displacement))?;
        let report = MetricReport::evaluate(&result.deformed, &lobe.deflated, &lobe.landmarks)?;
        metrics.push(MetricRow::new(&case_id, label, &report));
        lobes.push(LobeSummary {
            label: lobe.label,
            affine: [0, 1, 2, 3].map(|i| [0, 1, 2, 3].map(|j| result.affine[(i, j)])),
            steps: result
                .traces
                .iter()
                .map(|t| StepSummary {
                    step: t.step.as_str().into(),
                    iterations: t.iterations(),
                    termination: format!("{:?}", t.termination).to_lowercase(),
                    final_objective: t.final_objective().total,
                    warning: t.warning.clone(),
                })
                .collect(),
            warnings: result.warnings.clone(),
        });
    }
    write_csv(&dir.join("metrics.csv"), &metrics)?;
    let ablation = a.ablation.map(|x| format!("{x:?}").to_lowercase());
    write_json(&dir.join("registration.json"), &RegistrationSummary { case_id, ablation, config, lobes })
}

fn for_each_case(paths: &[PathBuf], jobs: usize, f: impl Fn(&Path) -> Result<()> + Sync) -> Result<()> {
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(jobs.max(1))
        .build()
        .map_err(|e| Error::Invalid(format!("cannot start worker pool: {e}")))?;
    let results: Vec<Result<()>> = pool.install(|| paths.par_iter().map(|p| f(p)).collect());
    let mut first = None;
    for (p, r) in paths.iter().zip(results) {
        if let Err(e) = r {
            if paths.len() > 1 {
                eprintln!("error: {}: {e}", p.display());
            }
            first.get_or_insert(e);
        }
    }
    first.map_or(Ok(()), Err)
}

pub fn register(a: &RegisterArgs) -> Result<()> {
    for_each_case(&a.cases, a.jobs, |p| register_one(a, p))
}

/// The deformed copy of `source` saved by `register`.
pub fn load_deformed(dir: &Path, source: &LobeModel) -> Result<LobeModel> {
    let files = model_files("deformed", source.label());
    let missing =
        |p: &Path| Error::Invalid(format!("registration artifact {} is missing; run `register` first", p.display()));
    let paths = [&files.surface, &files.tet_mesh, &files.centerline].map(|p| dir.join(p));
    if let Some(p) = paths.iter().find(|p| !p.exists()) {
        return Err(missing(p));
    }
    let surface = parse_surface(&paths[0], &read_text(&paths[0])?)?;
    let tet = parse_tet_mesh(&paths[1], &read_text(&paths[1])?)?;
    let centerline = parse_centerline(&paths[2], &read_text(&paths[2])?)?;
    if surface.triangles() != source.surface().triangles()
        || tet.tetrahedra() != source.tet_mesh().tetrahedra()
        || centerline.parents() != source.centerline().parents()
    {
        return Err(Error::Invalid(format!(
            "{}: deformed model topology differs from the inflated model",
            dir.display()
        )));
    }
    Ok(source.with_positions(surface.vertices().to_vec(), tet.vertices().to_vec(), &centerline.positions())?)
}

fn analyze_one(a: &AnalyzeArgs, path: &Path) -> Result<()> {
    let case = load_case(path)?;
    let case_id = &case.manifest.case_id;
    let reg = a.registration.join(case_id);
    let dir = a.out.join(case_id);
    let reference = match a.reference {
        Reference::Inflated => StrainReference::Inflated,
        Reference::Deflated => StrainReference::Deflated,
    };
    let (mut samples, mut branches, mut summary) = (Vec::new(), Vec::new(), Vec::new());
    for lobe in &case.lobes {
        let label = lobe.label.as_str();
        let deformed = load_deformed(&reg, &lobe.inflated)?;
        let field = DeformationField::between(&lobe.inflated, &deformed)?;
        let report = strain_report(&lobe.inflated, &field, reference)
            .map_err(|e| Error::Invalid(format!("{case_id} lobe {label}: {e}")))?;
        for (branch, why) in &report.skipped {
            eprintln!("note: {case_id} lobe {label}: branch {branch} skipped: {why}");
        }
        let (s, b, m) = strain_rows(case_id, label, &report);
        write_csv(&dir.join(format!("plot_{label}.csv")), &s)?;
        samples.extend(s);
        branches.extend(b);
        summary.push(m);
        for c in &a.components {
            let (component, name) = match c {
                Component::Displacement => (FieldComponent::Displacement, "displacement"),
                Component::Contraction => (FieldComponent::Contraction, "contraction"),
                Component::Rotation => (FieldComponent::Rotation, "rotation"),
            };
            write_csv(&dir.join(format!("field_{name}_{label}.csv")), &field_rows(&field, component))?;
        }
    }
    write_csv(&dir.join("strain_samples.csv"), &samples)?;
    write_csv(&dir.join("strain_branches.csv"), &branches)?;
    write_csv(&dir.join("strain_summary.csv"), &summary)
}

pub fn analyze(a: &AnalyzeArgs) -> Result<()> {
    for_each_case(&a.cases, 1, |p| analyze_one(a, p))
}

pub fn evaluate(a: &EvaluateArgs) -> Result<()> {
    let mut rows = Vec::new();
    for path in &a.cases {
        let case = load_case(path)?;
        let reg = a.registration.join(&case.manifest.case_id);
        for lobe in &case.lobes {
            let deformed = load_deformed(&reg, &lobe.inflated)?;
            let report = MetricReport::evaluate(&deformed, &lobe.deflated, &lobe.landmarks)?;
            rows.push(MetricRow::new(&case.manifest.case_id, lobe.label.as_str(), &report));
        }
    }
    match &a.out {
        Some(p) => write_csv(p, &rows),
        None => {
            let mut w = csv::Writer::from_writer(std::io::stdout());
            for r in &rows {
                w.serialize(r).map_err(Error::csv(Path::new("<stdout>")))?;
            }
            w.flush().map_err(Error::io(Path::new("<stdout>")))
        }
    }
}
