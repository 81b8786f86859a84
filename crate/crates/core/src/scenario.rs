//! Scenario files: a single TOML document describing the radar network,
//! the targets and their beams, and the run options.
//!
//! ```toml
//! frame_count = 30
//! master_seed = 7
//!
//! [transition]
//! dt = 1.0            # s
//! q_intensity = 0.5   # m^2/s^3
//!
//! [noise]             # per-component sigma at reference power p_ref
//! sigma_range_ref = 10.0
//! sigma_bearing_ref = 0.005
//! sigma_doppler_ref = 4.0
//! p_ref = 1.0
//!
//! [options]
//! fusion = "normalized"        # or "raw_weights"
//! bound_evaluation = "truth"   # or "estimate"
//!
//! [[radars]]
//! id = 1
//! position = [-5000.0, 0.0]
//! wavelength = 0.1
//! p_detect = 0.9
//! clutter_density = 0.01       # per unit gate volume (m * rad * Hz)
//! gate_threshold = 16.0
//!
//! [[targets]]
//! id = 1
//! initial_state = [0.0, 30.0, 9000.0, -10.0]   # [x, vx, y, vy]
//! initial_cov_diag = [2500.0, 100.0, 2500.0, 100.0]
//! initial_estimate = "perturbed"  # "truth" or an explicit [x, vx, y, vy]
//! beams = [{ radar_id = 1, power = 1.0 }]
//! ```

use std::collections::HashSet;
use std::path::Path;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::bcrlb::BoundEvaluation;
use crate::error::{Error, Result};
use crate::measurement::NoisePowerModel;
use crate::model::{Beam, RadarNode, StateMatrix, TargetState, TransitionModel};
use crate::pda::FusionMode;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TransitionConfig {
    pub dt: f64,
    pub q_intensity: f64,
}

fn default_max_clutter_mean() -> f64 {
    1e4
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunOptions {
    #[serde(default)]
    pub fusion: FusionMode,
    #[serde(default)]
    pub bound_evaluation: BoundEvaluation,
    /// A gate expecting more clutter points than this aborts the run as a
    /// lost track.
    #[serde(default = "default_max_clutter_mean")]
    pub max_clutter_mean: f64,
}

impl Default for RunOptions {
    fn default() -> Self {
        RunOptions {
            fusion: FusionMode::default(),
            bound_evaluation: BoundEvaluation::default(),
            max_clutter_mean: default_max_clutter_mean(),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum EstimateMode {
    /// Truth plus a draw from the initial covariance.
    Perturbed,
    /// Exactly the initial truth.
    Truth,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum InitialEstimate {
    Mode(EstimateMode),
    Explicit([f64; 4]),
}

impl Default for InitialEstimate {
    fn default() -> Self {
        InitialEstimate::Mode(EstimateMode::Perturbed)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TargetConfig {
    pub id: u32,
    pub initial_state: [f64; 4],
    pub initial_cov_diag: [f64; 4],
    #[serde(default)]
    pub initial_estimate: InitialEstimate,
    /// Overrides the scenario-wide process noise intensity.
    #[serde(default)]
    pub q_intensity: Option<f64>,
    pub beams: Vec<Beam>,
}

impl TargetConfig {
    pub fn initial_truth(&self) -> TargetState {
        TargetState::from(self.initial_state)
    }

    pub fn initial_cov(&self) -> StateMatrix {
        StateMatrix::from_diagonal(&nalgebra::Vector4::from(self.initial_cov_diag))
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Scenario {
    pub frame_count: usize,
    pub master_seed: u64,
    pub transition: TransitionConfig,
    pub noise: NoisePowerModel,
    #[serde(default)]
    pub options: RunOptions,
    pub radars: Vec<RadarNode>,
    pub targets: Vec<TargetConfig>,
}

impl Scenario {
    pub fn from_toml_str(text: &str) -> Result<Self> {
        let scenario: Scenario = toml::from_str(text).map_err(|e| Error::Parse(e.to_string()))?;
        scenario.validate()?;
        Ok(scenario)
    }

    pub fn to_toml_string(&self) -> String {
        toml::to_string(self).expect("scenario serializes to TOML")
    }

    /// Collects every invariant violation, each prefixed with its field path.
    pub fn violations(&self) -> Vec<String> {
        let mut out = Vec::new();
        if self.frame_count < 1 {
            out.push(format!("frame_count: must be >= 1, got {}", self.frame_count));
        }
        if !(self.transition.dt > 0.0 && self.transition.dt.is_finite()) {
            out.push(format!("transition.dt: must be > 0, got {}", self.transition.dt));
        }
        if !(self.transition.q_intensity >= 0.0 && self.transition.q_intensity.is_finite()) {
            out.push(format!(
                "transition.q_intensity: must be >= 0, got {}",
                self.transition.q_intensity
            ));
        }
        for (field, reason) in self.noise.violations() {
            out.push(format!("noise.{field}: {reason}"));
        }
        if !(self.options.max_clutter_mean > 0.0) {
            out.push(format!(
                "options.max_clutter_mean: must be > 0, got {}",
                self.options.max_clutter_mean
            ));
        }

        if self.radars.is_empty() {
            out.push("radars: at least one radar is required".into());
        }
        let mut radar_ids = HashSet::new();
        for (i, r) in self.radars.iter().enumerate() {
            if !radar_ids.insert(r.id) {
                out.push(format!("radars[{i}].id: duplicate radar id {}", r.id));
            }
            for (field, reason) in r.violations() {
                out.push(format!("radars[{i}].{field}: {reason}"));
            }
        }

        if self.targets.is_empty() {
            out.push("targets: at least one target is required".into());
        }
        let mut target_ids = HashSet::new();
        for (i, t) in self.targets.iter().enumerate() {
            let path = format!("targets[{i}]");
            if !target_ids.insert(t.id) {
                out.push(format!("{path}.id: duplicate target id {}", t.id));
            }
            if !t.initial_state.iter().all(|v| v.is_finite()) {
                out.push(format!("{path}.initial_state: must be finite"));
            }
            if !t.initial_cov_diag.iter().all(|v| *v > 0.0 && v.is_finite()) {
                out.push(format!(
                    "{path}.initial_cov_diag: entries must be > 0, got {:?}",
                    t.initial_cov_diag
                ));
            }
            if let InitialEstimate::Explicit(x) = t.initial_estimate {
                if !x.iter().all(|v| v.is_finite()) {
                    out.push(format!("{path}.initial_estimate: must be finite"));
                }
            }
            if let Some(q) = t.q_intensity {
                if !(q >= 0.0 && q.is_finite()) {
                    out.push(format!("{path}.q_intensity: must be >= 0, got {q}"));
                }
            }
            if t.beams.is_empty() {
                out.push(format!("{path}.beams: every target needs at least one assigned radar"));
            }
            let mut seen = HashSet::new();
            for (j, b) in t.beams.iter().enumerate() {
                if !radar_ids.contains(&b.radar_id) {
                    out.push(format!("{path}.beams[{j}].radar_id: unknown radar id {}", b.radar_id));
                }
                if !seen.insert(b.radar_id) {
                    out.push(format!(
                        "{path}.beams[{j}].radar_id: radar {} assigned twice",
                        b.radar_id
                    ));
                }
                if !(b.power > 0.0 && b.power.is_finite()) {
                    out.push(format!("{path}.beams[{j}].power: must be > 0, got {}", b.power));
                }
            }
        }
        out
    }

    pub fn validate(&self) -> Result<()> {
        let v = self.violations();
        if v.is_empty() {
            Ok(())
        } else {
            Err(Error::Validation(v))
        }
    }

    /// Transition model of a target, honoring its process-noise override.
    pub fn transition_for(&self, target: &TargetConfig) -> Result<TransitionModel> {
        TransitionModel::new(
            self.transition.dt,
            target.q_intensity.unwrap_or(self.transition.q_intensity),
        )
    }

    /// SHA-256 of the canonical JSON form, as lowercase hex.
    pub fn hash(&self) -> String {
        let canonical = serde_json::to_vec(self).expect("scenario serializes to JSON");
        hex::encode(Sha256::digest(&canonical))
    }

    /// Copy with every beam power multiplied by `factor`.
    pub fn with_power_scale(&self, factor: f64) -> Scenario {
        let mut s = self.clone();
        for t in &mut s.targets {
            for b in &mut t.beams {
                b.power *= factor;
            }
        }
        s
    }

    /// Copy without clutter and with certain detection on every radar.
    pub fn clutter_free(&self) -> Scenario {
        let mut s = self.clone();
        for r in &mut s.radars {
            r.clutter_density = 0.0;
            r.p_detect = 1.0;
        }
        s
    }
}

pub fn load_scenario(path: &Path) -> Result<Scenario> {
    let text = std::fs::read_to_string(path).map_err(|source| Error::Io {
        path: path.to_path_buf(),
        source,
    })?;
    Scenario::from_toml_str(&text)
}

/// The reference scenario shipped with the repository.
pub const REFERENCE_SCENARIO: &str = include_str!("../../../scenarios/reference.toml");

pub fn reference_scenario() -> Scenario {
    Scenario::from_toml_str(REFERENCE_SCENARIO).expect("reference scenario is valid")
}
