//! Parametric labeled vertebrae and spines with analytically known
//! landmarks, endplates, facet gaps and morphometrics.

mod case;
mod shapes;
mod spine;
mod vertebra;

pub use case::{make_registration_case, Perturbation, RegistrationCase};
pub use shapes::{grid_box, labelled_grid_box, BoxFace};
pub use spine::{generate_spine, GeneratedSpine, PairParams, SpineParams};
pub use vertebra::{generate_vertebra, GeneratedVertebra, VertebraParams};

use thiserror::Error;

use crate::transform::TransformError;

#[derive(Error, Debug)]
pub enum SyntheticError {
    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error(transparent)]
    Transform(#[from] TransformError),
}
