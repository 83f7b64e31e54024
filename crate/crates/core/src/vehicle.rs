//! Planar dynamic bicycle model with saturating tires, per-axle suspension,
//! first-order actuators and heightfield contact.
//!
//! Conventions: world frame x/y on the ground plane, z up. Body frame x
//! forward, y left. Heading and yaw rate are counter-clockwise positive.
//! Pitch is nose-up positive, roll is left-side-up positive.

use serde::{Deserialize, Serialize};
use std::f64::consts::{FRAC_PI_2, PI};

use crate::error::{Error, Result};

pub const GRAVITY: f64 = 9.81;

/// Below this planar speed the slip angle is reported as zero.
pub const SLIP_SPEED_EPS: f64 = 0.05;

/// Floor on the velocity used as the denominator of tire slip ratios. Keeps
/// the tire model well conditioned near standstill.
const SLIP_VELOCITY_FLOOR: f64 = 0.5;

pub const MAX_DT: f64 = 0.05;

/// Anything that can report a ground height at a world-plane point.
pub trait Ground {
    fn height(&self, x: f64, y: f64) -> f64;
}

/// Infinite flat plane at z = 0.
#[derive(Clone, Copy, Debug, Default)]
pub struct FlatGround;

impl Ground for FlatGround {
    fn height(&self, _x: f64, _y: f64) -> f64 {
        0.0
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum DriveLayout {
    RearWheelDrive,
    AllWheelDrive,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Axle {
    Front,
    Rear,
}

impl Axle {
    fn index(self) -> usize {
        match self {
            Axle::Front => 0,
            Axle::Rear => 1,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct VehicleParams {
    /// kg
    pub mass: f64,
    /// kg m^2
    pub yaw_inertia: f64,
    pub wheelbase: f64,
    pub com_to_front: f64,
    pub com_to_rear: f64,
    pub com_height: f64,
    /// Lateral distance between left and right wheels.
    pub track_width: f64,
    pub wheel_radius: f64,
    /// Per-axle cornering stiffness, N/rad.
    pub cornering_stiffness_front: f64,
    pub cornering_stiffness_rear: f64,
    /// Per-axle longitudinal slip stiffness, N per unit slip ratio.
    pub longitudinal_stiffness: f64,
    /// Shape factor of the saturating tire curve.
    pub tire_shape: f64,
    pub friction: f64,
    pub steer_limit: f64,
    /// Wheel speed target per unit throttle command, rad/s.
    pub throttle_gain: f64,
    pub throttle_time_constant: f64,
    pub steer_time_constant: f64,
    pub max_wheel_speed: f64,
    /// Per-axle spring rate, N/m.
    pub suspension_stiffness: f64,
    /// Per-axle damping, N s/m.
    pub suspension_damping: f64,
    pub suspension_travel: f64,
    pub drive_layout: DriveLayout,
    /// Steepest ground gradient the wheels can climb; anything steeper is a
    /// collision.
    pub max_climb_slope: f64,
}

impl Default for VehicleParams {
    /// Roughly a 1/10-scale car. The wheel radius ties 60 rad/s of wheel
    /// rotation to 3 m/s of ground speed.
    fn default() -> Self {
        Self {
            mass: 3.0,
            yaw_inertia: 0.05,
            wheelbase: 0.3,
            com_to_front: 0.15,
            com_to_rear: 0.15,
            com_height: 0.08,
            track_width: 0.2,
            wheel_radius: 0.05,
            cornering_stiffness_front: 55.0,
            cornering_stiffness_rear: 65.0,
            longitudinal_stiffness: 100.0,
            tire_shape: 1.5,
            friction: 0.4,
            steer_limit: 30f64.to_radians(),
            throttle_gain: 60.0,
            throttle_time_constant: 0.1,
            steer_time_constant: 0.05,
            max_wheel_speed: 80.0,
            suspension_stiffness: 735.0,
            suspension_damping: 40.0,
            suspension_travel: 0.04,
            drive_layout: DriveLayout::AllWheelDrive,
            max_climb_slope: 1.0,
        }
    }
}

impl VehicleParams {
    pub fn validate(&self) -> Result<()> {
        let positive = [
            ("mass", self.mass),
            ("yaw_inertia", self.yaw_inertia),
            ("wheelbase", self.wheelbase),
            ("com_to_front", self.com_to_front),
            ("com_to_rear", self.com_to_rear),
            ("com_height", self.com_height),
            ("track_width", self.track_width),
            ("wheel_radius", self.wheel_radius),
            ("cornering_stiffness_front", self.cornering_stiffness_front),
            ("cornering_stiffness_rear", self.cornering_stiffness_rear),
            ("longitudinal_stiffness", self.longitudinal_stiffness),
            ("tire_shape", self.tire_shape),
            ("friction", self.friction),
            ("steer_limit", self.steer_limit),
            ("throttle_gain", self.throttle_gain),
            ("throttle_time_constant", self.throttle_time_constant),
            ("steer_time_constant", self.steer_time_constant),
            ("max_wheel_speed", self.max_wheel_speed),
            ("suspension_stiffness", self.suspension_stiffness),
            ("suspension_damping", self.suspension_damping),
            ("suspension_travel", self.suspension_travel),
            ("max_climb_slope", self.max_climb_slope),
        ];
        for (name, value) in positive {
            if !(value.is_finite() && value > 0.0) {
                return Err(Error::InvalidParams(format!("{name} must be finite and > 0, got {value}")));
            }
        }
        if (self.com_to_front + self.com_to_rear - self.wheelbase).abs() > 1e-9 {
            return Err(Error::InvalidParams(format!(
                "com_to_front + com_to_rear ({}) must equal wheelbase ({})",
                self.com_to_front + self.com_to_rear,
                self.wheelbase
            )));
        }
        if self.steer_limit >= FRAC_PI_2 {
            return Err(Error::InvalidParams("steer_limit must be below 90 degrees".into()));
        }
        Ok(())
    }

    fn cornering_stiffness(&self, axle: Axle) -> f64 {
        match axle {
            Axle::Front => self.cornering_stiffness_front,
            Axle::Rear => self.cornering_stiffness_rear,
        }
    }

    fn drives(&self, axle: Axle) -> bool {
        match self.drive_layout {
            DriveLayout::AllWheelDrive => true,
            DriveLayout::RearWheelDrive => axle == Axle::Rear,
        }
    }

    /// Normal loads at rest on level ground, `[front, rear]`.
    pub fn static_loads(&self) -> [f64; 2] {
        let weight = self.mass * GRAVITY;
        [weight * self.com_to_rear / self.wheelbase, weight * self.com_to_front / self.wheelbase]
    }

    fn static_compression(&self) -> [f64; 2] {
        let loads = self.static_loads();
        [0, 1].map(|i| (loads[i] / self.suspension_stiffness).clamp(0.0, self.suspension_travel))
    }
}

/// Normalized actuator command.
#[derive(Clone, Copy, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct Action {
    pub throttle: f64,
    pub steer: f64,
}

impl Action {
    pub fn new(throttle: f64, steer: f64) -> Self {
        Self { throttle, steer }
    }

    /// Clamps both commands to `[-1, 1]`; NaN becomes 0.
    pub fn clamped(self) -> Self {
        let c = |x: f64| if x.is_nan() { 0.0 } else { x.clamp(-1.0, 1.0) };
        Self { throttle: c(self.throttle), steer: c(self.steer) }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct VehicleState {
    /// World position; z is the ground contact height under the center of mass.
    pub position: [f64; 3],
    pub heading: f64,
    pub yaw_rate: f64,
    /// Body-frame planar velocity (longitudinal u, lateral v).
    pub body_velocity: [f64; 2],
    /// Velocity along the body z axis; negative when falling.
    pub vertical_velocity: f64,
    pub roll: f64,
    pub pitch: f64,
    pub steering_angle: f64,
    pub wheel_speed: f64,
    /// `[front, rear]`, meters.
    pub suspension_compression: [f64; 2],
    pub suspension_velocity: [f64; 2],
    /// Body-frame acceleration from tire forces on the last step; drives load
    /// transfer on the next one.
    pub body_accel: [f64; 2],
}

impl VehicleState {
    /// Vehicle parked at `(x, y)` with suspension at static equilibrium.
    pub fn at_rest(params: &VehicleParams, ground: &dyn Ground, x: f64, y: f64, heading: f64) -> Self {
        let tilt = ground_tilt(params, ground, x, y, heading);
        Self {
            position: [x, y, tilt.height],
            heading: wrap_angle(heading),
            yaw_rate: 0.0,
            body_velocity: [0.0, 0.0],
            vertical_velocity: 0.0,
            roll: tilt.roll,
            pitch: tilt.pitch,
            steering_angle: 0.0,
            wheel_speed: 0.0,
            suspension_compression: params.static_compression(),
            suspension_velocity: [0.0, 0.0],
            body_accel: [0.0, 0.0],
        }
    }

    pub fn speed(&self) -> f64 {
        self.body_velocity[0].hypot(self.body_velocity[1])
    }

    pub fn world_velocity(&self) -> [f64; 2] {
        let (s, c) = self.heading.sin_cos();
        let [u, v] = self.body_velocity;
        [u * c - v * s, u * s + v * c]
    }

    /// Planar translational plus yaw kinetic energy, J.
    pub fn kinetic_energy(&self, params: &VehicleParams) -> f64 {
        let [u, v] = self.body_velocity;
        0.5 * params.mass * (u * u + v * v) + 0.5 * params.yaw_inertia * self.yaw_rate * self.yaw_rate
    }

    pub fn is_finite(&self) -> bool {
        self.position.iter().all(|x| x.is_finite())
            && self.body_velocity.iter().all(|x| x.is_finite())
            && self.suspension_compression.iter().all(|x| x.is_finite())
            && self.suspension_velocity.iter().all(|x| x.is_finite())
            && self.body_accel.iter().all(|x| x.is_finite())
            && [
                self.heading,
                self.yaw_rate,
                self.vertical_velocity,
                self.roll,
                self.pitch,
                self.steering_angle,
                self.wheel_speed,
            ]
            .iter()
            .all(|x| x.is_finite())
    }
}

/// Side-slip angle: the angle from the heading to the velocity vector,
/// positive when the velocity points left of the heading.
pub fn slip_angle(state: &VehicleState) -> f64 {
    if state.speed() < SLIP_SPEED_EPS {
        0.0
    } else {
        state.body_velocity[1].atan2(state.body_velocity[0])
    }
}

/// Saturating tire curve `peak * sin(shape * atan(b * slip))` with the
/// stiffness fixing the initial slope. The argument is capped at pi/2 so the
/// force plateaus at `peak` instead of falling off. Sign follows `slip`.
fn saturating_force(slip: f64, stiffness: f64, peak: f64, shape: f64) -> f64 {
    if peak <= 0.0 || slip == 0.0 {
        return 0.0;
    }
    let b = stiffness / (peak * shape);
    let arg = (shape * (b * slip.abs()).atan()).min(FRAC_PI_2);
    slip.signum() * peak * arg.sin()
}

/// Lateral tire force of one axle. Opposes the slip angle and never exceeds
/// `friction * normal_load` in magnitude.
pub fn tire_lateral_force(slip: f64, normal_load: f64, params: &VehicleParams, axle: Axle) -> f64 {
    let peak = params.friction * normal_load.max(0.0);
    -saturating_force(slip, params.cornering_stiffness(axle), peak, params.tire_shape)
}

fn tire_longitudinal_force(slip_ratio: f64, normal_load: f64, params: &VehicleParams) -> f64 {
    let peak = params.friction * normal_load.max(0.0);
    saturating_force(slip_ratio, params.longitudinal_stiffness, peak, params.tire_shape)
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct ActuatorState {
    pub wheel_speed: f64,
    pub steering_angle: f64,
}

/// Exact first-order lag of wheel speed and steering angle toward the
/// commanded targets over `dt`.
pub fn actuator_step(current: ActuatorState, cmd: Action, params: &VehicleParams, dt: f64) -> ActuatorState {
    let cmd = cmd.clamped();
    let lag = |x: f64, target: f64, tau: f64| x + (target - x) * (1.0 - (-dt / tau).exp());

    let wheel_target = (cmd.throttle * params.throttle_gain).clamp(-params.max_wheel_speed, params.max_wheel_speed);
    let steer_target = cmd.steer * params.steer_limit;
    ActuatorState {
        wheel_speed: lag(current.wheel_speed, wheel_target, params.throttle_time_constant)
            .clamp(-params.max_wheel_speed, params.max_wheel_speed),
        steering_angle: lag(current.steering_angle, steer_target, params.steer_time_constant)
            .clamp(-params.steer_limit, params.steer_limit),
    }
}

/// Quasi-static axle loads `[front, rear]` under body acceleration `accel`
/// (longitudinal, lateral). Longitudinal acceleration shifts
/// `mass * a_x * com_height / wheelbase` from front to rear; lateral
/// acceleration only rolls the body in a per-axle model.
pub fn load_transfer(state: &VehicleState, accel: [f64; 2], params: &VehicleParams) -> [f64; 2] {
    let tilt = state.pitch.cos() * state.roll.cos();
    let [front, rear] = params.static_loads().map(|n| n * tilt.max(0.0));
    let shift = params.mass * accel[0] * params.com_height / params.wheelbase;
    [(front - shift).max(0.0), (rear + shift).max(0.0)]
}

/// Forces acting on the chassis during one step, for inspection and tests.
#[derive(Clone, Copy, Debug, Default, PartialEq)]
pub struct TireForces {
    /// Wheel-frame `(longitudinal, lateral)` force per axle `[front, rear]`.
    pub wheel: [[f64; 2]; 2],
    pub normal: [f64; 2],
    pub slip_angle: [f64; 2],
}

#[derive(Clone, Debug)]
pub struct StepOutput {
    pub state: VehicleState,
    pub forces: TireForces,
    pub collided: bool,
}

struct GroundTilt {
    height: f64,
    pitch: f64,
    roll: f64,
}

fn ground_tilt(params: &VehicleParams, ground: &dyn Ground, x: f64, y: f64, heading: f64) -> GroundTilt {
    let (s, c) = heading.sin_cos();
    let h_front = ground.height(x + params.com_to_front * c, y + params.com_to_front * s);
    let h_rear = ground.height(x - params.com_to_rear * c, y - params.com_to_rear * s);
    let half = 0.5 * params.track_width;
    let h_left = ground.height(x - half * s, y + half * c);
    let h_right = ground.height(x + half * s, y - half * c);
    let lf = params.com_to_front / params.wheelbase;
    GroundTilt {
        height: h_rear + (h_front - h_rear) * (1.0 - lf),
        pitch: (h_front - h_rear).atan2(params.wheelbase),
        roll: (h_left - h_right).atan2(params.track_width),
    }
}

pub fn wrap_angle(a: f64) -> f64 {
    let mut a = (a + PI) % (2.0 * PI);
    if a < 0.0 {
        a += 2.0 * PI;
    }
    a - PI
}

pub fn step(state: &VehicleState, action: Action, params: &VehicleParams, ground: &dyn Ground, dt: f64) -> Result<VehicleState> {
    step_detailed(state, action, params, ground, dt).map(|o| o.state)
}

/// Advances the vehicle by `dt` with semi-implicit Euler: actuators first,
/// then tire forces from the updated actuators, then velocities, then pose.
pub fn step_detailed(
    state: &VehicleState,
    action: Action,
    params: &VehicleParams,
    ground: &dyn Ground,
    dt: f64,
) -> Result<StepOutput> {
    if !(dt > 0.0 && dt <= MAX_DT) {
        return Err(Error::InvalidTimestep(dt));
    }
    let actuators = actuator_step(
        ActuatorState { wheel_speed: state.wheel_speed, steering_angle: state.steering_angle },
        action,
        params,
        dt,
    );
    let delta = actuators.steering_angle;
    // A motor spinning down only brakes; it never pushes the car.
    let spinning_down = actuators.wheel_speed.abs() <= state.wheel_speed.abs();
    let surface_speed = actuators.wheel_speed * params.wheel_radius;

    let [u, v] = state.body_velocity;
    let r = state.yaw_rate;
    let m = params.mass;

    // Loads transmitted through the suspension.
    let normal = [0, 1].map(|i| {
        (params.suspension_stiffness * state.suspension_compression[i]
            + params.suspension_damping * state.suspension_velocity[i])
            .max(0.0)
    });

    let mut forces = TireForces { normal, ..Default::default() };
    let mut body_force = [0.0f64; 2];
    let mut yaw_moment = 0.0;
    for axle in [Axle::Front, Axle::Rear] {
        let i = axle.index();
        let (steer, lever) = match axle {
            Axle::Front => (delta, params.com_to_front),
            Axle::Rear => (0.0, -params.com_to_rear),
        };
        // Contact-point velocity in the wheel frame.
        let (sd, cd) = steer.sin_cos();
        let lat_body = v + lever * r;
        let v_lon = u * cd + lat_body * sd;
        let v_lat = -u * sd + lat_body * cd;

        let slip = v_lat.atan2(v_lon.abs().max(SLIP_VELOCITY_FLOOR));
        let mut f_lat = tire_lateral_force(slip, normal[i], params, axle);
        let mut f_lon = if params.drives(axle) {
            let surface = if spinning_down {
                surface_speed.clamp(v_lon.min(0.0), v_lon.max(0.0))
            } else {
                surface_speed
            };
            let denom = v_lon.abs().max(surface.abs()).max(SLIP_VELOCITY_FLOOR);
            tire_longitudinal_force((surface - v_lon) / denom, normal[i], params)
        } else {
            0.0
        };
        // Combined slip shares one friction budget.
        let peak = params.friction * normal[i];
        let total = f_lon.hypot(f_lat);
        if total > peak && total > 0.0 {
            let scale = peak / total;
            f_lon *= scale;
            f_lat *= scale;
        }
        forces.wheel[i] = [f_lon, f_lat];
        forces.slip_angle[i] = slip;

        let fx = f_lon * cd - f_lat * sd;
        let fy = f_lon * sd + f_lat * cd;
        body_force[0] += fx;
        body_force[1] += fy;
        yaw_moment += lever * fy;
    }

    let tilt = ground_tilt(params, ground, state.position[0], state.position[1], state.heading);
    let gravity = [-m * GRAVITY * tilt.pitch.sin(), -m * GRAVITY * tilt.roll.sin()];

    // Yaw first, then rotate the body velocity by the exact frame rotation so
    // the transport terms neither add nor remove energy.
    let r_new = r + yaw_moment / params.yaw_inertia * dt;
    let (sr, cr) = (r_new * dt).sin_cos();
    let mut u_new = u * cr + v * sr;
    let mut v_new = -u * sr + v * cr;
    u_new += (body_force[0] + gravity[0]) / m * dt;
    v_new += (body_force[1] + gravity[1]) / m * dt;

    let heading = wrap_angle(state.heading + r_new * dt);
    let (sh, ch) = heading.sin_cos();
    let mut x = state.position[0] + (u_new * ch - v_new * sh) * dt;
    let mut y = state.position[1] + (u_new * sh + v_new * ch) * dt;

    // Leading-axle climb check against walls and cliffs.
    let lead = if u_new >= 0.0 { params.com_to_front } else { -params.com_to_rear };
    let (s0, c0) = state.heading.sin_cos();
    let old_lead = (state.position[0] + lead * c0, state.position[1] + lead * s0);
    let new_lead = (x + lead * ch, y + lead * sh);
    let travelled = (new_lead.0 - old_lead.0).hypot(new_lead.1 - old_lead.1);
    let rise = ground.height(new_lead.0, new_lead.1) - ground.height(old_lead.0, old_lead.1);
    let collided = travelled > 1e-12 && rise > params.max_climb_slope * travelled;
    if collided {
        x = state.position[0];
        y = state.position[1];
        u_new = 0.0;
        v_new = 0.0;
    }

    let new_tilt = ground_tilt(params, ground, x, y, heading);
    let accel = [body_force[0] / m, body_force[1] / m];

    // Per-axle spring-damper driven toward the quasi-static loads.
    let demand = load_transfer(state, accel, params);
    let sprung = params.static_loads().map(|n| n / GRAVITY);
    let mut compression = state.suspension_compression;
    let mut comp_velocity = state.suspension_velocity;
    for i in 0..2 {
        let spring = params.suspension_stiffness * compression[i] + params.suspension_damping * comp_velocity[i];
        comp_velocity[i] += (demand[i] - spring) / sprung[i] * dt;
        compression[i] += comp_velocity[i] * dt;
        if compression[i] <= 0.0 {
            compression[i] = 0.0;
            comp_velocity[i] = comp_velocity[i].max(0.0);
        } else if compression[i] >= params.suspension_travel {
            compression[i] = params.suspension_travel;
            comp_velocity[i] = comp_velocity[i].min(0.0);
        }
    }
    let rest = params.static_compression();
    let body_pitch = ((compression[1] - rest[1]) - (compression[0] - rest[0])) / params.wheelbase;
    let roll_stiffness = params.suspension_stiffness * params.track_width * params.track_width / 2.0;
    let max_body_roll = (params.suspension_travel / (0.5 * params.track_width)).atan();
    let body_roll = (m * accel[1] * params.com_height / roll_stiffness).clamp(-max_body_roll, max_body_roll);

    // Body-frame vertical velocity: world velocity projected on the ground normal.
    let vz = (new_tilt.height - state.position[2]) / dt;
    let (tp, tr) = (new_tilt.pitch.tan(), new_tilt.roll.tan());
    let vertical_velocity = (vz - u_new * tp - v_new * tr) / (1.0 + tp * tp + tr * tr).sqrt();

    let next = VehicleState {
        position: [x, y, new_tilt.height],
        heading,
        yaw_rate: if collided { 0.0 } else { r_new },
        body_velocity: [u_new, v_new],
        vertical_velocity,
        roll: new_tilt.roll + body_roll,
        pitch: new_tilt.pitch + body_pitch,
        steering_angle: delta,
        wheel_speed: actuators.wheel_speed,
        suspension_compression: compression,
        suspension_velocity: comp_velocity,
        body_accel: accel,
    };
    if !next.is_finite() {
        return Err(Error::NonFiniteState(format!("dt={dt}, action={action:?}")));
    }
    Ok(StepOutput { state: next, forces, collided })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::assert_close;

    fn rest() -> (VehicleParams, VehicleState) {
        let p = VehicleParams::default();
        let s = VehicleState::at_rest(&p, &FlatGround, 0.0, 0.0, 0.0);
        (p, s)
    }

    #[test]
    fn default_params_are_valid() {
        VehicleParams::default().validate().unwrap();
        assert_close!(VehicleParams::default().steer_limit, 30f64.to_radians(), 1e-12);
    }

    #[test]
    fn invalid_params_rejected() {
        let p = VehicleParams { friction: 0.0, ..Default::default() };
        assert!(p.validate().is_err());
        let p = VehicleParams { com_to_front: 0.2, ..Default::default() };
        assert!(p.validate().is_err());
    }

    #[test]
    fn slip_angle_examples() {
        let (_, mut s) = rest();
        s.body_velocity = [1.0, 0.0];
        assert_eq!(slip_angle(&s), 0.0);
        s.body_velocity = [0.0, 1.0];
        assert_close!(slip_angle(&s), FRAC_PI_2, 1e-15);
        s.body_velocity = [1.0, 1.0];
        assert_close!(slip_angle(&s), 1.0f64.atan2(1.0), 1e-15);
        s.body_velocity = [0.01, 0.03];
        assert_eq!(slip_angle(&s), 0.0);
    }

    #[test]
    fn tire_force_examples() {
        let mut p = VehicleParams::default();
        assert_eq!(tire_lateral_force(0.0, 10.0, &p, Axle::Front), 0.0);
        p.friction = 0.4;
        let far = tire_lateral_force(1e6, 10.0, &p, Axle::Front);
        assert_close!(far.abs(), 4.0, 1e-9);

        p.cornering_stiffness_front = 50.0;
        let f = tire_lateral_force(0.05, 20.0, &p, Axle::Front);
        // Direct evaluation of 8 sin(1.5 atan(50/(8*1.5) * 0.05)).
        let b: f64 = 50.0 / (8.0 * 1.5);
        let expected = -8.0 * (1.5 * (b * 0.05).atan()).sin();
        assert_close!(f, expected, 1e-12);
        assert!(((f - -2.5) / 2.5).abs() < 0.15);
    }

    #[test]
    fn zero_load_gives_zero_force() {
        let p = VehicleParams::default();
        assert_eq!(tire_lateral_force(0.3, 0.0, &p, Axle::Rear), 0.0);
    }

    #[test]
    fn actuator_examples() {
        let p = VehicleParams { throttle_time_constant: 0.1, ..Default::default() };
        let rest = ActuatorState { wheel_speed: 0.0, steering_angle: 0.0 };
        assert_eq!(actuator_step(rest, Action::default(), &p, 0.01), rest);

        let mut a = rest;
        for _ in 0..1000 {
            a = actuator_step(a, Action::new(0.0, 1.0), &p, 0.01);
        }
        assert_close!(a.steering_angle, p.steer_limit, 1e-12);

        let one = actuator_step(rest, Action::new(1.0, 0.0), &p, 0.01);
        let target = p.throttle_gain;
        assert_close!(one.wheel_speed, target * (1.0 - (-0.1f64).exp()), 1e-12);
        assert_close!(one.wheel_speed / target, 0.0952, 1e-4);
    }

    #[test]
    fn actuator_clamps_commands() {
        let p = VehicleParams::default();
        let mut a = ActuatorState { wheel_speed: 0.0, steering_angle: 0.0 };
        for _ in 0..1000 {
            a = actuator_step(a, Action::new(5.0, -7.0), &p, 0.01);
        }
        assert!(a.steering_angle >= -p.steer_limit);
        assert_close!(a.wheel_speed, p.throttle_gain.min(p.max_wheel_speed), 1e-9);
    }

    #[test]
    fn load_transfer_examples() {
        let p = VehicleParams { mass: 3.0, wheelbase: 0.3, com_to_front: 0.1, com_to_rear: 0.2, com_height: 0.1, ..Default::default() };
        let s = VehicleState::at_rest(&p, &FlatGround, 0.0, 0.0, 0.0);
        let [f0, r0] = load_transfer(&s, [0.0, 0.0], &p);
        assert_close!(f0, 3.0 * GRAVITY * 0.2 / 0.3, 1e-12);
        assert_close!(f0 + r0, 3.0 * GRAVITY, 1e-12);
        let [f1, r1] = load_transfer(&s, [-2.0, 0.0], &p);
        assert_close!(f1 - f0, 2.0, 1e-12);
        assert_close!(r0 - r1, 2.0, 1e-12);
    }

    #[test]
    fn rest_is_equilibrium() {
        let (p, s) = rest();
        let mut next = s.clone();
        for _ in 0..100 {
            next = step(&next, Action::default(), &p, &FlatGround, 0.01).unwrap();
        }
        assert_close!(next.position[0], s.position[0], 1e-12);
        assert_close!(next.position[1], s.position[1], 1e-12);
        assert_close!(next.suspension_compression[0], s.suspension_compression[0], 1e-12);
        assert_close!(next.suspension_compression[1], s.suspension_compression[1], 1e-12);
        assert_close!(next.pitch, 0.0, 1e-12);
        assert_eq!(next.body_velocity, [0.0, 0.0]);
    }

    #[test]
    fn wheel_speed_sixty_gives_three_meters_per_second() {
        let (p, mut s) = rest();
        for _ in 0..400 {
            s = step(&s, Action::new(1.0, 0.0), &p, &FlatGround, 0.01).unwrap();
        }
        assert_close!(s.wheel_speed, 60.0, 1e-6);
        assert_close!(s.body_velocity[0], 3.0, 1e-3);
    }

    #[test]
    fn bad_timestep_rejected() {
        let (p, s) = rest();
        assert!(matches!(step(&s, Action::default(), &p, &FlatGround, 0.0), Err(Error::InvalidTimestep(_))));
        assert!(matches!(step(&s, Action::default(), &p, &FlatGround, 0.06), Err(Error::InvalidTimestep(_))));
    }

    #[test]
    fn degenerate_params_signal_non_finite() {
        let (mut p, s) = rest();
        p.yaw_inertia = 1e-310;
        let mut st = s;
        st.body_velocity = [2.0, 0.5];
        st.yaw_rate = 1.0;
        let mut failed = false;
        for _ in 0..50 {
            match step(&st, Action::new(1.0, 1.0), &p, &FlatGround, 0.01) {
                Ok(n) => st = n,
                Err(Error::NonFiniteState(_)) => {
                    failed = true;
                    break;
                }
                Err(e) => panic!("{e}"),
            }
        }
        assert!(failed);
    }

    #[test]
    fn wrap_angle_range() {
        for a in [-10.0, -PI, -1.0, 0.0, 1.0, PI, 7.0] {
            let w = wrap_angle(a);
            assert!((-PI..PI).contains(&w), "{a} -> {w}");
            assert_close!((a - w).rem_euclid(2.0 * PI).min(2.0 * PI - (a - w).rem_euclid(2.0 * PI)), 0.0, 1e-9);
        }
    }
}
