//! Kinematic state, the nearly-constant-velocity transition model and the
//! radar node configuration.
//!
//! State components are always ordered `[x, vx, y, vy]`.

use nalgebra::{Matrix2, Matrix4, Vector4};
use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::rng::sample_gaussian;

pub type StateVector = Vector4<f64>;
pub type StateMatrix = Matrix4<f64>;

/// Position (m) and velocity (m/s) of a point target in the plane.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TargetState {
    pub x: f64,
    pub vx: f64,
    pub y: f64,
    pub vy: f64,
}

impl TargetState {
    pub fn new(x: f64, vx: f64, y: f64, vy: f64) -> Self {
        TargetState { x, vx, y, vy }
    }

    pub fn from_vector(v: &StateVector) -> Self {
        TargetState::new(v[0], v[1], v[2], v[3])
    }

    pub fn to_vector(&self) -> StateVector {
        StateVector::new(self.x, self.vx, self.y, self.vy)
    }

    pub fn to_array(&self) -> [f64; 4] {
        [self.x, self.vx, self.y, self.vy]
    }

    pub fn is_finite(&self) -> bool {
        self.to_array().iter().all(|v| v.is_finite())
    }
}

impl From<[f64; 4]> for TargetState {
    fn from(a: [f64; 4]) -> Self {
        TargetState::new(a[0], a[1], a[2], a[3])
    }
}

/// `blkdiag([1 T; 0 1], [1 T; 0 1])`.
pub fn transition_matrix(dt: f64) -> Result<StateMatrix> {
    if !(dt > 0.0 && dt.is_finite()) {
        return Err(Error::invalid("dt", format!("frame interval must be > 0, got {dt}")));
    }
    let mut f = StateMatrix::identity();
    f[(0, 1)] = dt;
    f[(2, 3)] = dt;
    Ok(f)
}

/// Discretized white-noise-acceleration covariance,
/// `q * [T^3/3, T^2/2; T^2/2, T]` on each axis.
pub fn process_noise_cov(dt: f64, q_intensity: f64) -> Result<StateMatrix> {
    if !(dt > 0.0 && dt.is_finite()) {
        return Err(Error::invalid("dt", format!("frame interval must be > 0, got {dt}")));
    }
    if !(q_intensity >= 0.0 && q_intensity.is_finite()) {
        return Err(Error::invalid(
            "q_intensity",
            format!("process noise intensity must be >= 0, got {q_intensity}"),
        ));
    }
    let block = Matrix2::new(
        dt.powi(3) / 3.0,
        dt.powi(2) / 2.0,
        dt.powi(2) / 2.0,
        dt,
    ) * q_intensity;
    let mut q = StateMatrix::zeros();
    q.fixed_view_mut::<2, 2>(0, 0).copy_from(&block);
    q.fixed_view_mut::<2, 2>(2, 2).copy_from(&block);
    Ok(q)
}

/// Transition matrix and process noise for a fixed frame interval.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TransitionModel {
    dt: f64,
    q_intensity: f64,
    f: StateMatrix,
    q: StateMatrix,
}

impl TransitionModel {
    pub fn new(dt: f64, q_intensity: f64) -> Result<Self> {
        Ok(TransitionModel {
            dt,
            q_intensity,
            f: transition_matrix(dt)?,
            q: process_noise_cov(dt, q_intensity)?,
        })
    }

    pub fn dt(&self) -> f64 {
        self.dt
    }

    pub fn q_intensity(&self) -> f64 {
        self.q_intensity
    }

    pub fn f(&self) -> &StateMatrix {
        &self.f
    }

    pub fn q(&self) -> &StateMatrix {
        &self.q
    }
}

/// Draws the next true state `F x + v`, `v ~ N(0, Q)`.
pub fn propagate_truth<R: Rng + ?Sized>(
    state: &TargetState,
    model: &TransitionModel,
    rng: &mut R,
) -> TargetState {
    let noise = sample_gaussian(model.q(), rng);
    TargetState::from_vector(&(model.f() * state.to_vector() + noise))
}

/// A stationary radar in the network.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RadarNode {
    pub id: u32,
    /// Sensor position `[x, y]` (m).
    pub position: [f64; 2],
    /// Carrier wavelength (m).
    pub wavelength: f64,
    pub p_detect: f64,
    /// Expected false measurements per unit gate volume.
    pub clutter_density: f64,
    /// Chi-square gate threshold on the normalized innovation.
    pub gate_threshold: f64,
}

impl RadarNode {
    /// Returns every violated invariant as `(field, reason)`.
    pub fn violations(&self) -> Vec<(&'static str, String)> {
        let mut out = Vec::new();
        if !self.position.iter().all(|v| v.is_finite()) {
            out.push(("position", "must be finite".to_string()));
        }
        if !(self.wavelength > 0.0 && self.wavelength.is_finite()) {
            out.push(("wavelength", format!("must be > 0, got {}", self.wavelength)));
        }
        if !(self.p_detect > 0.0 && self.p_detect <= 1.0) {
            out.push(("p_detect", format!("must be in (0, 1], got {}", self.p_detect)));
        }
        if !(self.clutter_density >= 0.0 && self.clutter_density.is_finite()) {
            out.push((
                "clutter_density",
                format!("must be >= 0, got {}", self.clutter_density),
            ));
        }
        if !(self.gate_threshold > 0.0 && self.gate_threshold.is_finite()) {
            out.push((
                "gate_threshold",
                format!("must be > 0, got {}", self.gate_threshold),
            ));
        }
        out
    }

    pub fn validate(&self) -> Result<()> {
        match self.violations().into_iter().next() {
            None => Ok(()),
            Some((name, reason)) => Err(Error::invalid(name, reason)),
        }
    }
}

/// One beam of a radar pointed at a target, with its transmit power.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Beam {
    pub radar_id: u32,
    pub power: f64,
}
