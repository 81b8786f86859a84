//! Range/bearing/Doppler measurement function, its Jacobian and the
//! power-dependent noise model.
//!
//! Measurement components are always ordered `[range, bearing, doppler]`
//! in units of m, rad and Hz.

use std::f64::consts::PI;

use nalgebra::{Matrix3, Matrix3x4, Vector3};
use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::{RadarNode, TargetState};
use crate::rng::sample_gaussian;

pub type MeasVector = Vector3<f64>;

/// Index of the bearing component in a measurement vector.
pub const BEARING: usize = 1;

/// Targets closer than this to a radar have no defined bearing.
pub const MIN_RANGE: f64 = 1e-6;

/// Wraps an angle into `(-pi, pi]`.
pub fn wrap_angle(a: f64) -> f64 {
    let mut w = a.rem_euclid(2.0 * PI);
    if w > PI {
        w -= 2.0 * PI;
    }
    if w == -PI {
        w = PI;
    }
    w
}

/// `z - z_ref` with the bearing residual wrapped.
pub fn residual(z: &MeasVector, z_ref: &MeasVector) -> MeasVector {
    let mut d = z - z_ref;
    d[BEARING] = wrap_angle(d[BEARING]);
    d
}

/// Diagonal measurement noise covariance `diag(var_r, var_theta, var_f)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MeasurementCovariance {
    variances: [f64; 3],
}

impl MeasurementCovariance {
    pub fn new(variances: [f64; 3]) -> Result<Self> {
        if variances.iter().all(|v| *v > 0.0 && v.is_finite()) {
            Ok(MeasurementCovariance { variances })
        } else {
            Err(Error::invalid(
                "variances",
                format!("measurement variances must be > 0, got {variances:?}"),
            ))
        }
    }

    pub fn variances(&self) -> [f64; 3] {
        self.variances
    }

    pub fn matrix(&self) -> Matrix3<f64> {
        Matrix3::from_diagonal(&Vector3::from(self.variances))
    }
}

/// Maps beam power to measurement variance,
/// `var(P) = sigma_ref^2 * (p_ref / P)^exponent` per component.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct NoisePowerModel {
    pub sigma_range_ref: f64,
    pub sigma_bearing_ref: f64,
    pub sigma_doppler_ref: f64,
    pub p_ref: f64,
    /// Power-law exponents for `[range, bearing, doppler]`.
    #[serde(default = "default_exponents")]
    pub exponents: [f64; 3],
}

fn default_exponents() -> [f64; 3] {
    [1.0; 3]
}

impl NoisePowerModel {
    pub fn new(sigma_range_ref: f64, sigma_bearing_ref: f64, sigma_doppler_ref: f64, p_ref: f64) -> Self {
        NoisePowerModel {
            sigma_range_ref,
            sigma_bearing_ref,
            sigma_doppler_ref,
            p_ref,
            exponents: default_exponents(),
        }
    }

    pub fn violations(&self) -> Vec<(&'static str, String)> {
        let mut out = Vec::new();
        for (name, v) in [
            ("sigma_range_ref", self.sigma_range_ref),
            ("sigma_bearing_ref", self.sigma_bearing_ref),
            ("sigma_doppler_ref", self.sigma_doppler_ref),
            ("p_ref", self.p_ref),
        ] {
            if !(v > 0.0 && v.is_finite()) {
                out.push((name, format!("must be > 0, got {v}")));
            }
        }
        if !self.exponents.iter().all(|e| *e > 0.0 && e.is_finite()) {
            out.push(("exponents", format!("must all be > 0, got {:?}", self.exponents)));
        }
        out
    }
}

/// Noise covariance of a beam transmitted at `power`.
pub fn noise_cov(model: &NoisePowerModel, power: f64) -> Result<MeasurementCovariance> {
    if !(power > 0.0 && power.is_finite()) {
        return Err(Error::invalid("power", format!("beam power must be > 0, got {power}")));
    }
    let ratio = model.p_ref / power;
    let sig = [
        model.sigma_range_ref,
        model.sigma_bearing_ref,
        model.sigma_doppler_ref,
    ];
    let mut var = [0.0; 3];
    for i in 0..3 {
        var[i] = sig[i] * sig[i] * ratio.powf(model.exponents[i]);
    }
    MeasurementCovariance::new(var)
}

struct Geometry {
    dx: f64,
    dy: f64,
    range: f64,
    bearing: f64,
    k: f64,
}

fn geometry(state: &TargetState, radar: &RadarNode) -> Result<Geometry> {
    let dx = state.x - radar.position[0];
    let dy = state.y - radar.position[1];
    let range = dx.hypot(dy);
    if !(range > MIN_RANGE) {
        return Err(Error::SingularGeometry {
            radar_id: radar.id,
            range,
        });
    }
    Ok(Geometry {
        dx,
        dy,
        range,
        bearing: dy.atan2(dx),
        k: -2.0 / radar.wavelength,
    })
}

/// Noise-free measurement of `state` by `radar`.
pub fn measure(state: &TargetState, radar: &RadarNode) -> Result<MeasVector> {
    let g = geometry(state, radar)?;
    let (sin, cos) = g.bearing.sin_cos();
    let doppler = g.k * (state.vx * cos + state.vy * sin);
    Ok(MeasVector::new(g.range, g.bearing, doppler))
}

/// Jacobian of [`measure`] with respect to `[x, vx, y, vy]`.
pub fn jacobian(state: &TargetState, radar: &RadarNode) -> Result<Matrix3x4<f64>> {
    let g = geometry(state, radar)?;
    let (sin, cos) = g.bearing.sin_cos();
    let r2 = g.range * g.range;
    let dtheta_dx = -g.dy / r2;
    let dtheta_dy = g.dx / r2;
    // f depends on position only through the bearing
    let df_dtheta = g.k * (-state.vx * sin + state.vy * cos);
    Ok(Matrix3x4::new(
        g.dx / g.range,
        0.0,
        g.dy / g.range,
        0.0,
        dtheta_dx,
        0.0,
        dtheta_dy,
        0.0,
        df_dtheta * dtheta_dx,
        g.k * cos,
        df_dtheta * dtheta_dy,
        g.k * sin,
    ))
}

/// A (possibly false) radar report.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Measurement {
    pub range: f64,
    pub bearing: f64,
    pub doppler: f64,
    pub radar_id: u32,
    pub noise_cov: MeasurementCovariance,
}

impl Measurement {
    /// Builds a measurement from a raw vector, wrapping the bearing.
    pub fn from_vector(z: &MeasVector, radar_id: u32, noise_cov: MeasurementCovariance) -> Self {
        Measurement {
            range: z[0],
            bearing: wrap_angle(z[BEARING]),
            doppler: z[2],
            radar_id,
            noise_cov,
        }
    }

    pub fn vector(&self) -> MeasVector {
        MeasVector::new(self.range, self.bearing, self.doppler)
    }
}

/// Noisy measurement `measure(state) + w`, `w ~ N(0, R)`.
pub fn sample_measurement<R: Rng + ?Sized>(
    state: &TargetState,
    radar: &RadarNode,
    noise: &MeasurementCovariance,
    rng: &mut R,
) -> Result<Measurement> {
    let z = measure(state, radar)? + sample_gaussian(&noise.matrix(), rng);
    let mut m = Measurement::from_vector(&z, radar.id, *noise);
    m.range = m.range.abs();
    Ok(m)
}
