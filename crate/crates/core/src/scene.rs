//! Per-frame sensor data: Bernoulli detections of the true targets and
//! Poisson clutter restricted to each validation gate.

use std::f64::consts::PI;

use nalgebra::{Matrix3, Vector3};
use rand::Rng;
use rand_distr::{Distribution, Poisson, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::{cholesky, inv_quad_form};
use crate::measurement::{noise_cov, residual, sample_measurement, wrap_angle, MeasVector, Measurement, NoisePowerModel, BEARING};
use crate::model::{Beam, RadarNode, TargetState};

/// Volume of the unit ball in three dimensions.
const UNIT_BALL_VOLUME: f64 = 4.0 * PI / 3.0;

/// Ellipsoidal validation gate `nu' S^-1 nu <= gamma` around a predicted
/// measurement.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Gate {
    center: MeasVector,
    s: Matrix3<f64>,
    gamma: f64,
    volume: f64,
}

impl Gate {
    pub fn new(center: MeasVector, s: Matrix3<f64>, gamma: f64) -> Result<Self> {
        let volume = gate_volume(&s, gamma)?;
        Ok(Gate {
            center,
            s,
            gamma,
            volume,
        })
    }

    pub fn center(&self) -> &MeasVector {
        &self.center
    }

    pub fn innovation_cov(&self) -> &Matrix3<f64> {
        &self.s
    }

    pub fn gamma(&self) -> f64 {
        self.gamma
    }

    pub fn volume(&self) -> f64 {
        self.volume
    }

    /// Normalized innovation squared of `z` against the gate center.
    pub fn distance_squared(&self, z: &MeasVector) -> Result<f64> {
        inv_quad_form(&self.s, &residual(z, &self.center), "gate innovation covariance")
    }
}

/// True iff `z` lies inside the gate (bearing residual wrapped).
pub fn in_gate(z: &MeasVector, gate: &Gate) -> Result<bool> {
    Ok(gate.distance_squared(z)? <= gate.gamma)
}

/// `V = (4 pi / 3) gamma^(3/2) sqrt(det S)`.
pub fn gate_volume(s: &Matrix3<f64>, gamma: f64) -> Result<f64> {
    if !(gamma > 0.0 && gamma.is_finite()) {
        return Err(Error::invalid("gamma", format!("gate threshold must be > 0, got {gamma}")));
    }
    let chol = cholesky(s, "gate innovation covariance")?;
    // sqrt(det S) = prod diag(L)
    let sqrt_det: f64 = chol.l_dirty().diagonal().iter().product();
    Ok(UNIT_BALL_VOLUME * gamma.powf(1.5) * sqrt_det)
}

/// Draws Poisson(`density * V`) false measurements uniformly over the gate.
pub fn simulate_clutter<R: Rng + ?Sized>(
    gate: &Gate,
    density: f64,
    rng: &mut R,
) -> Result<Vec<MeasVector>> {
    let mean = density * gate.volume;
    if !(mean > 0.0) {
        return Ok(Vec::new());
    }
    let count = Poisson::new(mean)
        .map_err(|e| Error::Numerical(format!("clutter rate {mean}: {e}")))?
        .sample(rng) as usize;
    let l = cholesky(&gate.s, "gate innovation covariance")?.unpack();
    // shrink a hair so rounding never pushes a point onto the wrong side of the boundary
    let scale = gate.gamma.sqrt() * (1.0 - 1e-12);
    let mut out = Vec::with_capacity(count);
    for _ in 0..count {
        let dir = loop {
            let v = Vector3::<f64>::from_fn(|_, _| rng.sample(StandardNormal));
            let n = v.norm();
            if n > 0.0 {
                break v / n;
            }
        };
        let radius = rng.random::<f64>().cbrt();
        let mut z = gate.center + l * (dir * (radius * scale));
        z[BEARING] = wrap_angle(z[BEARING]);
        out.push(z);
    }
    Ok(out)
}

/// Everything one radar reported for one target's gate in a frame.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SensorReport {
    pub target_id: u32,
    pub radar_id: u32,
    pub detection: Option<Measurement>,
    /// False measurements with no target origin.
    pub clutter: Vec<Measurement>,
}

impl SensorReport {
    /// Detection (if any) followed by the clutter points.
    pub fn candidates(&self) -> impl Iterator<Item = &Measurement> {
        self.detection.iter().chain(self.clutter.iter())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FrameData {
    pub frame_index: usize,
    pub truths: Vec<TargetState>,
    pub reports: Vec<SensorReport>,
}

/// A target's true state and the beams pointed at it.
#[derive(Debug, Clone, Copy)]
pub struct Illuminated<'a> {
    pub target_id: u32,
    pub truth: TargetState,
    pub beams: &'a [Beam],
}

pub(crate) fn find_radar(radars: &[RadarNode], id: u32) -> Result<&RadarNode> {
    radars
        .iter()
        .find(|r| r.id == id)
        .ok_or_else(|| Error::invalid("radar_id", format!("unknown radar id {id}")))
}

/// Bernoulli(`p_detect`) detection for every (target, beam) pair.
///
/// Clutter lists are left empty; they depend on the tracker's gates and are
/// filled by the caller with [`simulate_clutter`].
pub fn simulate_detections<R: Rng + ?Sized>(
    frame_index: usize,
    targets: &[Illuminated<'_>],
    radars: &[RadarNode],
    noise: &NoisePowerModel,
    rng: &mut R,
) -> Result<FrameData> {
    let mut reports = Vec::new();
    for t in targets {
        for beam in t.beams {
            let radar = find_radar(radars, beam.radar_id)?;
            let detected = rng.random::<f64>() < radar.p_detect;
            let detection = if detected {
                let r = noise_cov(noise, beam.power)?;
                Some(sample_measurement(&t.truth, radar, &r, rng)?)
            } else {
                None
            };
            reports.push(SensorReport {
                target_id: t.target_id,
                radar_id: radar.id,
                detection,
                clutter: Vec::new(),
            });
        }
    }
    Ok(FrameData {
        frame_index,
        truths: targets.iter().map(|t| t.truth).collect(),
        reports,
    })
}
