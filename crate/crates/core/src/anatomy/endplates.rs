use std::fmt;

use super::{AnatomyError, AxesEstimate};
use crate::mesh::{connected_component_indices, face_normals, TriangleMesh};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Plate {
    Superior,
    Inferior,
}

impl fmt::Display for Plate {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Plate::Superior => "superior",
            Plate::Inferior => "inferior",
        })
    }
}

/// Superior and inferior endplates with the input triangle indices they came from.
#[derive(Debug, Clone)]
pub struct Endplates {
    pub superior: TriangleMesh,
    pub inferior: TriangleMesh,
    pub superior_triangles: Vec<usize>,
    pub inferior_triangles: Vec<usize>,
}

/// Keeps triangles whose normal lies within the `cos_threshold` cone around
/// ±longitudinal, then only the largest edge-connected patch of each.
pub fn extract_endplates(
    mesh: &TriangleMesh,
    axes: &AxesEstimate,
    cos_threshold: f64,
) -> Result<Endplates, AnatomyError> {
    if !(cos_threshold > 0.0 && cos_threshold < 1.0) {
        return Err(AnatomyError::InvalidParameter(format!(
            "cos_threshold must lie in (0, 1), got {cos_threshold}"
        )));
    }
    let normals = face_normals(mesh);
    let up = axes.longitudinal.into_inner();
    let select = |plate: Plate| -> Result<Vec<usize>, AnatomyError> {
        let sign = match plate {
            Plate::Superior => 1.0,
            Plate::Inferior => -1.0,
        };
        let candidates: Vec<usize> = normals
            .iter()
            .enumerate()
            .filter_map(|(t, n)| n.filter(|n| sign * n.dot(&up) >= cos_threshold).map(|_| t))
            .collect();
        if candidates.is_empty() {
            return Err(AnatomyError::EmptyEndplate {
                plate,
                threshold: cos_threshold,
            });
        }
        let patch = mesh.submesh(&candidates);
        let largest = connected_component_indices(&patch)
            .into_iter()
            .next()
            .unwrap_or_default();
        let mut kept: Vec<usize> = largest.iter().map(|&i| candidates[i]).collect();
        kept.sort_unstable();
        Ok(kept)
    };
    let superior_triangles = select(Plate::Superior)?;
    let inferior_triangles = select(Plate::Inferior)?;
    Ok(Endplates {
        superior: mesh.submesh(&superior_triangles),
        inferior: mesh.submesh(&inferior_triangles),
        superior_triangles,
        inferior_triangles,
    })
}
