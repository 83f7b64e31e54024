//! Synthetic sensing and everything that randomizes what the policy sees or
//! the dynamics it acts on.

mod augment;
mod camera;
mod randomization;

pub use augment::{augment_image, gaussian_kernel, ImageAugmentation};
pub use camera::{render_grayscale, CameraModel, Renderer, BACKGROUND};
pub use randomization::{
    apply_perturbation, corrupt_observation, randomize_params, CorruptionSpec, ParamRanges, PerturbationSpec,
    RandomizationSpec,
};
