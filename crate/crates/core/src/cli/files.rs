use std::collections::BTreeMap;
use std::fs;
use std::path::{Path, PathBuf};

use anyhow::{bail, Context, Result};
use serde::Serialize;

use crate::anatomy::{LandmarkRecord, LandmarkSet};
use crate::level::Level;
use crate::mesh::{load_mesh, save_mesh, Encoding, MeshFormat, TriangleMesh};
use crate::spine::{SpineModel, Vertebra};

/// Files directly inside `dir` whose extension passes `keep`, sorted by
/// name.
fn list_files(dir: &Path, keep: impl Fn(&Path) -> bool) -> Result<Vec<PathBuf>> {
    let mut files: Vec<PathBuf> = fs::read_dir(dir)
        .with_context(|| format!("cannot read directory {}", dir.display()))?
        .map(|e| e.map(|e| e.path()))
        .collect::<std::io::Result<_>>()
        .with_context(|| format!("cannot list {}", dir.display()))?;
    files.retain(|p| p.is_file() && keep(p));
    files.sort();
    Ok(files)
}

fn file_name(path: &Path) -> String {
    path.file_name()
        .map(|n| n.to_string_lossy().into_owned())
        .unwrap_or_default()
}

/// Assigns a level to each path, either from `overrides` (same order) or
/// from the file name. Fails on unknown or repeated levels.
pub fn assign_levels(paths: &[PathBuf], overrides: Option<&[Level]>) -> Result<Vec<(Level, PathBuf)>> {
    if let Some(levels) = overrides {
        if levels.len() != paths.len() {
            bail!("{} levels given for {} files", levels.len(), paths.len());
        }
    }
    let mut seen = BTreeMap::new();
    for (i, p) in paths.iter().enumerate() {
        let level = match overrides {
            Some(l) => l[i],
            None => Level::infer_from_name(&file_name(p))
                .with_context(|| format!("cannot infer a lumbar level (L1-L5) from file name {}", p.display()))?,
        };
        if let Some(prev) = seen.insert(level, p.clone()) {
            bail!("level {level} appears twice: {} and {}", prev.display(), p.display());
        }
    }
    Ok(seen.into_iter().collect())
}

pub fn load_meshes(assigned: &[(Level, PathBuf)]) -> Result<SpineModel> {
    let vertebrae = assigned
        .iter()
        .map(|(level, p)| {
            let mesh = load_mesh(p).with_context(|| format!("{level}: failed to load {}", p.display()))?;
            Ok(Vertebra::new(*level, mesh))
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(SpineModel::new(vertebrae)?)
}

/// Every STL, PLY or OBJ file in `dir`, levels taken from the file names.
pub fn load_mesh_dir(dir: &Path) -> Result<SpineModel> {
    let files = list_files(dir, |p| MeshFormat::from_path(p).is_some())?;
    if files.is_empty() {
        bail!("no mesh files (.stl, .ply, .obj) in {}", dir.display());
    }
    load_meshes(&assign_levels(&files, None)?)
}

/// Landmark JSON files in `dir`, keyed by the `level` field.
pub fn load_landmark_dir(dir: &Path) -> Result<Vec<(Level, LandmarkSet)>> {
    let files = list_files(dir, |p| p.extension().is_some_and(|e| e.eq_ignore_ascii_case("json")))?;
    let mut out = BTreeMap::new();
    for p in files {
        let text = fs::read_to_string(&p).with_context(|| format!("cannot read {}", p.display()))?;
        let record: LandmarkRecord =
            serde_json::from_str(&text).with_context(|| format!("invalid landmark file {}", p.display()))?;
        let level: Level = record
            .level
            .parse()
            .map_err(|e: String| anyhow::anyhow!(e))
            .with_context(|| format!("in {}", p.display()))?;
        let set = record.to_landmarks().with_context(|| format!("in {}", p.display()))?;
        if out.insert(level, set).is_some() {
            bail!("level {level} has more than one landmark file in {}", dir.display());
        }
    }
    Ok(out.into_iter().collect())
}

pub fn create_dir(dir: &Path) -> Result<()> {
    fs::create_dir_all(dir).with_context(|| format!("cannot create directory {}", dir.display()))
}

pub fn write_json<T: Serialize + ?Sized>(path: &Path, value: &T) -> Result<()> {
    let mut text = serde_json::to_string_pretty(value).expect("serializable");
    text.push('\n');
    fs::write(path, text).with_context(|| format!("cannot write {}", path.display()))
}

pub fn write_landmarks(dir: &Path, level: Level, set: &LandmarkSet) -> Result<()> {
    write_json(&dir.join(format!("{level}.json")), &set.to_record(level.as_str()))
}

pub fn write_mesh(
    dir: &Path,
    level: Level,
    mesh: &TriangleMesh,
    format: MeshFormat,
    encoding: Encoding,
) -> Result<PathBuf> {
    let path = dir.join(format!("{level}.{}", format.extension()));
    save_mesh(mesh, &path, format, encoding).with_context(|| format!("{level}: cannot write {}", path.display()))?;
    Ok(path)
}
