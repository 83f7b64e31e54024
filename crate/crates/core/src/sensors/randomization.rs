use serde::{Deserialize, Serialize};

use super::ImageAugmentation;
use crate::error::{Error, Result};
use crate::rng::EnvRng;
use crate::vehicle::{VehicleParams, VehicleState};

/// Uniform ranges for the physical parameters randomized per episode.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ParamRanges {
    pub friction: [f64; 2],
    pub throttle_gain: [f64; 2],
    pub throttle_time_constant: [f64; 2],
    pub steer_time_constant: [f64; 2],
}

impl Default for ParamRanges {
    fn default() -> Self {
        Self {
            friction: [0.3, 0.5],
            throttle_gain: [50.0, 70.0],
            throttle_time_constant: [0.07, 0.15],
            steer_time_constant: [0.03, 0.08],
        }
    }
}

/// Random velocity and yaw-rate kicks.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PerturbationSpec {
    pub enabled: bool,
    /// Chance of a kick on each control step.
    pub probability: f64,
    /// Planar linear impulse magnitude, N s.
    pub impulse: [f64; 2],
    /// Yaw angular impulse magnitude, N m s.
    pub torque_impulse: [f64; 2],
}

impl Default for PerturbationSpec {
    /// 0 to 0.3 m/s and 0 to 0.5 rad/s for the default 3 kg, 0.05 kg m^2 car.
    fn default() -> Self {
        Self { enabled: false, probability: 0.02, impulse: [0.0, 0.9], torque_impulse: [0.0, 0.025] }
    }
}

/// Additive Gaussian observation noise.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CorruptionSpec {
    pub enabled: bool,
    /// Std of normalized pose/velocity channels.
    pub state_sigma: f64,
    /// Std of elevation-map cells, meters.
    pub elevation_sigma: f64,
}

impl Default for CorruptionSpec {
    fn default() -> Self {
        Self { enabled: false, state_sigma: 0.02, elevation_sigma: 0.01 }
    }
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RandomizationSpec {
    pub domain_randomization: bool,
    #[serde(default)]
    pub params: ParamRanges,
    #[serde(default)]
    pub perturbation: PerturbationSpec,
    #[serde(default)]
    pub corruption: CorruptionSpec,
    #[serde(default)]
    pub image: ImageAugmentation,
}

fn check_range(field: &str, r: [f64; 2]) -> Result<()> {
    if !(r[0].is_finite() && r[1].is_finite()) || r[0] > r[1] {
        return Err(Error::InvalidRange { field: field.into(), reason: format!("[{}, {}] is not a valid range", r[0], r[1]) });
    }
    Ok(())
}

fn check_sigma(field: &str, s: f64) -> Result<()> {
    if !(s.is_finite() && s >= 0.0) {
        return Err(Error::InvalidRange { field: field.into(), reason: format!("{s} must be >= 0") });
    }
    Ok(())
}

impl RandomizationSpec {
    pub fn validate(&self) -> Result<()> {
        let p = &self.params;
        check_range("params.friction", p.friction)?;
        check_range("params.throttle_gain", p.throttle_gain)?;
        check_range("params.throttle_time_constant", p.throttle_time_constant)?;
        check_range("params.steer_time_constant", p.steer_time_constant)?;
        let q = &self.perturbation;
        if !(0.0..=1.0).contains(&q.probability) {
            return Err(Error::InvalidRange {
                field: "perturbation.probability".into(),
                reason: format!("{} is not a probability", q.probability),
            });
        }
        check_range("perturbation.impulse", q.impulse)?;
        check_range("perturbation.torque_impulse", q.torque_impulse)?;
        if q.impulse[0] < 0.0 || q.torque_impulse[0] < 0.0 {
            return Err(Error::InvalidRange { field: "perturbation".into(), reason: "impulse magnitudes must be >= 0".into() });
        }
        check_sigma("corruption.state_sigma", self.corruption.state_sigma)?;
        check_sigma("corruption.elevation_sigma", self.corruption.elevation_sigma)?;
        let im = &self.image;
        check_range("image.brightness", im.brightness)?;
        check_range("image.contrast", im.contrast)?;
        check_range("image.blur_sigma", im.blur_sigma)?;
        check_sigma("image.blur_sigma", im.blur_sigma[0])?;
        check_sigma("image.noise_std", im.noise_std)?;
        Ok(())
    }
}

/// Draws each randomized parameter independently and uniformly from its
/// range; everything else is copied from `base`.
pub fn randomize_params(base: &VehicleParams, spec: &RandomizationSpec, rng: &mut EnvRng) -> Result<VehicleParams> {
    if !spec.domain_randomization {
        return Ok(base.clone());
    }
    spec.validate()?;
    let r = &spec.params;
    let mut p = base.clone();
    p.friction = rng.uniform(r.friction[0], r.friction[1]);
    p.throttle_gain = rng.uniform(r.throttle_gain[0], r.throttle_gain[1]);
    p.throttle_time_constant = rng.uniform(r.throttle_time_constant[0], r.throttle_time_constant[1]);
    p.steer_time_constant = rng.uniform(r.steer_time_constant[0], r.steer_time_constant[1]);
    p.validate().map_err(|e| Error::InvalidRange { field: "params".into(), reason: e.to_string() })?;
    Ok(p)
}

/// With the configured probability, adds a planar velocity kick of
/// `impulse / mass` in a uniformly random body-frame direction and a yaw-rate
/// kick of `torque_impulse / yaw_inertia` with random sign. Returns whether a
/// kick was applied.
pub fn apply_perturbation(
    state: &VehicleState,
    params: &VehicleParams,
    spec: &PerturbationSpec,
    rng: &mut EnvRng,
) -> (VehicleState, bool) {
    if !spec.enabled || !rng.bernoulli(spec.probability) {
        return (state.clone(), false);
    }
    let mut next = state.clone();
    let dv = rng.uniform(spec.impulse[0], spec.impulse[1]) / params.mass;
    let dir = rng.uniform(-std::f64::consts::PI, std::f64::consts::PI);
    next.body_velocity[0] += dv * dir.cos();
    next.body_velocity[1] += dv * dir.sin();
    let dw = rng.uniform(spec.torque_impulse[0], spec.torque_impulse[1]) / params.yaw_inertia;
    next.yaw_rate += if rng.bernoulli(0.5) { dw } else { -dw };
    (next, true)
}

/// Adds independent zero-mean Gaussian noise with per-channel std `sigma`.
pub fn corrupt_observation(obs: &mut [f64], sigma: &[f64], rng: &mut EnvRng) {
    assert_eq!(obs.len(), sigma.len(), "one sigma per channel");
    for (o, &s) in obs.iter_mut().zip(sigma) {
        if s > 0.0 {
            *o += s * rng.normal();
        }
    }
}
