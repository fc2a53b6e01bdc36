//! Case manifests: one JSON file naming the model files of every lobe.
//! Relative paths resolve against the manifest's directory.

use std::collections::BTreeSet;
use std::path::{Path, PathBuf};

use pneumoreg_core::distance::Landmark;
use pneumoreg_core::geometry::{LobeLabel, LobeModel};
use pneumoreg_core::registration::RegistrationConfig;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::formats::{
    centerline_to_string, landmarks_to_string, parse_centerline, parse_landmarks, parse_surface, parse_tet_mesh,
    read_text, surface_to_string, tet_mesh_to_string, write_json, write_text,
};

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ModelFiles {
    pub surface: PathBuf,
    pub tet_mesh: PathBuf,
    pub centerline: PathBuf,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct LobeEntry {
    pub label: LobeLabel,
    pub inflated: ModelFiles,
    pub deflated: ModelFiles,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub landmarks: Option<PathBuf>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CaseManifest {
    pub case_id: String,
    pub lobes: Vec<LobeEntry>,
    /// Registration settings that override the configuration file.
    #[serde(default, skip_serializing_if = "serde_json::Map::is_empty")]
    pub config: serde_json::Map<String, serde_json::Value>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct LoadedLobe {
    pub label: LobeLabel,
    pub inflated: LobeModel,
    pub deflated: LobeModel,
    pub landmarks: Vec<Landmark>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct LoadedCase {
    pub manifest: CaseManifest,
    pub lobes: Vec<LoadedLobe>,
}

fn resolve(base: &Path, p: &Path) -> PathBuf {
    if p.is_absolute() {
        p.to_path_buf()
    } else {
        base.join(p)
    }
}

pub fn load_model(base: &Path, label: LobeLabel, files: &ModelFiles) -> Result<LobeModel> {
    let surface_path = resolve(base, &files.surface);
    let tet_path = resolve(base, &files.tet_mesh);
    let centerline_path = resolve(base, &files.centerline);
    let surface = parse_surface(&surface_path, &read_text(&surface_path)?)?;
    let tet = parse_tet_mesh(&tet_path, &read_text(&tet_path)?)?;
    let centerline = parse_centerline(&centerline_path, &read_text(&centerline_path)?)?;
    LobeModel::new(label, surface, tet, centerline).map_err(Error::model(&surface_path))
}

pub fn save_model(dir: &Path, files: &ModelFiles, model: &LobeModel) -> Result<()> {
    write_text(&resolve(dir, &files.surface), &surface_to_string(model.surface()))?;
    write_text(&resolve(dir, &files.tet_mesh), &tet_mesh_to_string(model.tet_mesh()))?;
    write_text(&resolve(dir, &files.centerline), &centerline_to_string(model.centerline()))
}

/// Conventional file names for one model inside a case directory.
pub fn model_files(state: &str, label: LobeLabel) -> ModelFiles {
    let l = label.as_str();
    ModelFiles {
        surface: format!("{state}_{l}.surf").into(),
        tet_mesh: format!("{state}_{l}.tet").into(),
        centerline: format!("{state}_{l}.centerline.json").into(),
    }
}

pub fn read_manifest(path: &Path) -> Result<CaseManifest> {
    let manifest: CaseManifest = serde_json::from_str(&read_text(path)?).map_err(Error::json(path))?;
    let mut seen = BTreeSet::new();
    for lobe in &manifest.lobes {
        if !seen.insert(lobe.label) {
            return Err(Error::Invalid(format!(
                "{}: lobe label `{}` appears more than once",
                path.display(),
                lobe.label.as_str()
            )));
        }
    }
    if manifest.lobes.is_empty() {
        return Err(Error::Invalid(format!("{}: manifest lists no lobes", path.display())));
    }
    Ok(manifest)
}

/// Reads a manifest and every file it references, validating each model.
pub fn load_case(path: &Path) -> Result<LoadedCase> {
    let manifest = read_manifest(path)?;
    let base = path.parent().unwrap_or(Path::new("."));
    let lobes = manifest
        .lobes
        .iter()
        .map(|e| {
            let landmarks = match &e.landmarks {
                Some(p) => {
                    let p = resolve(base, p);
                    parse_landmarks(&p, &read_text(&p)?)?
                }
                None => Vec::new(),
            };
            Ok(LoadedLobe {
                label: e.label,
                inflated: load_model(base, e.label, &e.inflated)?,
                deflated: load_model(base, e.label, &e.deflated)?,
                landmarks,
            })
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(LoadedCase { manifest, lobes })
}

/// Writes every model and landmark file of `case` into `dir` under the
/// conventional names, then the manifest itself.
pub fn save_case(dir: &Path, case_id: &str, lobes: &[LoadedLobe]) -> Result<PathBuf> {
    let mut entries = Vec::new();
    for lobe in lobes {
        let inflated = model_files("inflated", lobe.label);
        let deflated = model_files("deflated", lobe.label);
        save_model(dir, &inflated, &lobe.inflated)?;
        save_model(dir, &deflated, &lobe.deflated)?;
        let landmarks =
            (!lobe.landmarks.is_empty()).then(|| PathBuf::from(format!("landmarks_{}.json", lobe.label.as_str())));
        if let Some(p) = &landmarks {
            write_text(&dir.join(p), &landmarks_to_string(&lobe.landmarks))?;
        }
        entries.push(LobeEntry { label: lobe.label, inflated, deflated, landmarks });
    }
    let manifest = CaseManifest { case_id: case_id.into(), lobes: entries, config: Default::default() };
    let path = dir.join("manifest.json");
    write_json(&path, &manifest)?;
    Ok(path)
}

/// Defaults, then the config file, then manifest overrides.
pub fn resolve_config(
    file: Option<&Path>,
    overrides: &serde_json::Map<String, serde_json::Value>,
) -> Result<RegistrationConfig> {
    let mut value = serde_json::to_value(RegistrationConfig::default()).expect("config serializes");
    let mut merge = |layer: serde_json::Value, origin: &Path| -> Result<()> {
        let serde_json::Value::Object(map) = layer else {
            return Err(Error::Invalid(format!("{}: configuration must be a JSON object", origin.display())));
        };
        merge_into(&mut value, map);
        Ok(())
    };
    if let Some(p) = file {
        let layer: serde_json::Value = serde_json::from_str(&read_text(p)?).map_err(Error::json(p))?;
        merge(layer, p)?;
    }
    merge(serde_json::Value::Object(overrides.clone()), Path::new("manifest config"))?;
    let origin = file.unwrap_or(Path::new("manifest config"));
    let config: RegistrationConfig = serde_json::from_value(value).map_err(Error::json(origin))?;
    config.validate()?;
    Ok(config)
}

fn merge_into(base: &mut serde_json::Value, layer: serde_json::Map<String, serde_json::Value>) {
    for (k, v) in layer {
        match (base.get_mut(&k), v) {
            (Some(slot @ serde_json::Value::Object(_)), serde_json::Value::Object(inner)) => merge_into(slot, inner),
            (_, v) => {
                base[k.as_str()] = v;
            }
        }
    }
}
