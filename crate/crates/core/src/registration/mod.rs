//! Landmark-frame registration of atlas vertebrae onto target vertebral
//! bodies, with rigid ICP as refinement and as a baseline.

mod frame;
mod icp;

pub use frame::{compute_frame, compute_registration, frame_to_transform, VertebraFrame};
pub use icp::{fit_rigid, icp_rigid, sample_points, IcpParams, IcpResult};

use std::fmt;
use std::str::FromStr;
use std::time::Instant;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::anatomy::{analyze_spine, AnatomyError, AnatomyParams, AxesEstimate, LandmarkSet};
use crate::level::Level;
use crate::mesh::SurfaceIndex;
use crate::spine::{vertebral_body, SpineError, SpineModel, Vertebra};
use crate::transform::{Transform4, TransformError};

#[derive(Error, Debug)]
pub enum RegistrationError {
    #[error("degenerate frame: {0}")]
    DegenerateFrame(String),

    #[error("degenerate correspondences: {0}")]
    DegenerateCorrespondences(String),

    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error(transparent)]
    Transform(#[from] TransformError),

    #[error(transparent)]
    Anatomy(#[from] AnatomyError),

    #[error(transparent)]
    Spine(#[from] SpineError),

    #[error("{level}: {source}")]
    Level {
        level: Level,
        #[source]
        source: Box<RegistrationError>,
    },
}

impl RegistrationError {
    fn at(level: Level) -> impl FnOnce(RegistrationError) -> RegistrationError {
        move |e| RegistrationError::Level {
            level,
            source: Box::new(e),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum RegistrationMode {
    /// Landmark-frame affine only.
    #[default]
    Ours,
    /// Landmark-frame affine refined by rigid ICP on the vertebral bodies.
    #[serde(alias = "ours-icp")]
    OursIcp,
    /// Rigid ICP of the whole atlas vertebra from the identity.
    Icp,
    /// Rigid ICP of the atlas vertebral body from the identity, applied to
    /// the whole atlas vertebra.
    #[serde(alias = "icp-vb")]
    IcpVb,
}

impl RegistrationMode {
    pub const ALL: [RegistrationMode; 4] = [
        RegistrationMode::Ours,
        RegistrationMode::OursIcp,
        RegistrationMode::Icp,
        RegistrationMode::IcpVb,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            RegistrationMode::Ours => "ours",
            RegistrationMode::OursIcp => "ours_icp",
            RegistrationMode::Icp => "icp",
            RegistrationMode::IcpVb => "icp_vb",
        }
    }

    fn uses_target_landmarks(self) -> bool {
        matches!(self, RegistrationMode::Ours | RegistrationMode::OursIcp)
    }
}

impl fmt::Display for RegistrationMode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for RegistrationMode {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let norm = s.trim().to_ascii_lowercase().replace('-', "_");
        RegistrationMode::ALL
            .into_iter()
            .find(|m| m.as_str() == norm)
            .ok_or_else(|| format!("unknown mode {s:?}; expected ours, ours-icp, icp or icp-vb"))
    }
}

#[derive(Debug, Clone, Default)]
pub struct RegistrationParams {
    pub mode: RegistrationMode,
    pub anatomy: AnatomyParams,
    pub hint: AxesEstimate,
    pub icp: IcpParams,
}

/// Per-level details beyond the transform itself.
#[derive(Debug, Clone, PartialEq)]
pub struct LevelDiagnostics {
    pub level: Level,
    pub source_skew_deg: Option<f64>,
    pub target_skew_deg: Option<f64>,
    pub icp_iterations: Option<usize>,
    pub icp_mean_distance: Option<f64>,
}

#[derive(Debug, Clone)]
pub struct SpineRegistration {
    /// Atlas vertebrae mapped onto the targets, landmarks included.
    pub registered: SpineModel,
    pub transforms: Vec<(Level, Transform4)>,
    pub diagnostics: Vec<LevelDiagnostics>,
    /// Wall-clock seconds for landmark detection, transform computation and
    /// mesh application.
    pub elapsed: f64,
}

fn detect_all(
    spine: &SpineModel,
    body_only: bool,
    params: &RegistrationParams,
) -> Result<Vec<LandmarkSet>, RegistrationError> {
    let bodies: Vec<_> = spine
        .vertebrae()
        .iter()
        .map(|v| {
            if body_only {
                vertebral_body(&v.mesh)
            } else {
                v.mesh.clone()
            }
        })
        .collect();
    let refs: Vec<_> = bodies.iter().collect();
    let results = analyze_spine(&refs, &params.hint, &params.anatomy)?;
    results
        .into_iter()
        .zip(spine.vertebrae())
        .map(|(r, v)| {
            r.map(|a| a.landmarks)
                .map_err(|e| RegistrationError::at(v.level)(e.into()))
        })
        .collect()
}

/// Registers each atlas vertebra onto the target of the same level.
pub fn register_spine(
    atlas: &SpineModel,
    targets: &SpineModel,
    params: &RegistrationParams,
) -> Result<SpineRegistration, RegistrationError> {
    atlas.check_same_levels(targets)?;
    params.icp.validate()?;
    let start = Instant::now();

    let atlas_landmarks = detect_all(atlas, true, params)?;
    let target_landmarks = if params.mode.uses_target_landmarks() {
        Some(detect_all(targets, true, params)?)
    } else {
        None
    };

    let per_level: Vec<Result<(Vertebra, Transform4, LevelDiagnostics), RegistrationError>> = atlas
        .vertebrae()
        .par_iter()
        .zip(targets.vertebrae().par_iter())
        .enumerate()
        .map(|(i, (a, t))| {
            let target_lm = target_landmarks.as_ref().map(|l| &l[i]);
            register_level(a, &atlas_landmarks[i], t, target_lm, params).map_err(RegistrationError::at(a.level))
        })
        .collect();

    let mut registered = Vec::with_capacity(per_level.len());
    let mut transforms = Vec::with_capacity(per_level.len());
    let mut diagnostics = Vec::with_capacity(per_level.len());
    for r in per_level {
        let (v, t, d) = r?;
        transforms.push((v.level, t));
        registered.push(v);
        diagnostics.push(d);
    }
    let elapsed = start.elapsed().as_secs_f64();
    Ok(SpineRegistration {
        registered: SpineModel::new(registered)?,
        transforms,
        diagnostics,
        elapsed,
    })
}

fn register_level(
    atlas: &Vertebra,
    atlas_landmarks: &LandmarkSet,
    target: &Vertebra,
    target_landmarks: Option<&LandmarkSet>,
    params: &RegistrationParams,
) -> Result<(Vertebra, Transform4, LevelDiagnostics), RegistrationError> {
    let mut diag = LevelDiagnostics {
        level: atlas.level,
        source_skew_deg: None,
        target_skew_deg: None,
        icp_iterations: None,
        icp_mean_distance: None,
    };
    let target_body = vertebral_body(&target.mesh);
    let affine = match target_landmarks {
        Some(tl) => {
            let sf = compute_frame(atlas_landmarks)?;
            let tf = compute_frame(tl)?;
            diag.source_skew_deg = Some(sf.skew_degrees());
            diag.target_skew_deg = Some(tf.skew_degrees());
            compute_registration(&sf, &tf)?
        }
        None => Transform4::identity(),
    };
    let transform = match params.mode {
        RegistrationMode::Ours => affine,
        mode => {
            let source = match mode {
                RegistrationMode::Icp => atlas.mesh.vertices().to_vec(),
                _ => vertebral_body(&atlas.mesh).vertices().to_vec(),
            };
            let index = SurfaceIndex::new(&target_body);
            let res = icp_rigid(&source, &index, &affine, &params.icp)?;
            diag.icp_iterations = Some(res.iterations);
            diag.icp_mean_distance = Some(res.mean_distance);
            res.transform
        }
    };
    let registered = Vertebra {
        level: atlas.level,
        mesh: atlas.mesh.transformed(&transform),
        landmarks: Some(atlas_landmarks.transformed(&transform)?),
    };
    Ok((registered, transform, diag))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn mode_parsing_accepts_both_spellings() {
        assert_eq!(
            "ours-icp".parse::<RegistrationMode>().unwrap(),
            RegistrationMode::OursIcp
        );
        assert_eq!("icp_vb".parse::<RegistrationMode>().unwrap(), RegistrationMode::IcpVb);
        assert!("alpaca".parse::<RegistrationMode>().is_err());
        let m: RegistrationMode = serde_json::from_str("\"ours-icp\"").unwrap();
        assert_eq!(m, RegistrationMode::OursIcp);
        assert_eq!(serde_json::to_string(&RegistrationMode::IcpVb).unwrap(), "\"icp_vb\"");
    }
}
