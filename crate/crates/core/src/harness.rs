//! Seeded single runs and Monte Carlo aggregation.
//!
//! Per frame and per target a run executes: prediction, detection and
//! clutter simulation, gating, association, fusion, the EKF update and the
//! Fisher information recursion.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::bcrlb::{self, BoundEvaluation, FisherInformation};
use crate::error::{Error, Result};
use crate::measurement::{jacobian, measure, noise_cov, Measurement, MeasVector};
use crate::model::{propagate_truth, RadarNode, TargetState, TransitionModel};
use crate::pda::{association_probabilities, fuse, likelihood, InnovationContext};
use crate::rng::{derive_run_seed, sample_gaussian, stream_rng, SimRng, Stream};
use crate::scenario::{EstimateMode, InitialEstimate, Scenario, TargetConfig};
use crate::scene::{find_radar, in_gate, simulate_clutter, simulate_detections, FrameData, Gate, Illuminated};
use crate::tracker::{predict, update, FusedObservation, TrackEstimate};

/// One (frame, target) row of a run.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunRow {
    pub frame: usize,
    pub target: u32,
    pub truth: [f64; 4],
    pub estimate: [f64; 4],
    pub cov_diag: [f64; 4],
    pub bound_diag: [f64; 4],
    pub nees: f64,
    /// Mean no-target mass over the target's beams (1 for a beam with no
    /// candidates).
    pub beta_none: f64,
}

impl RunRow {
    pub fn position_error_sq(&self) -> f64 {
        (self.truth[0] - self.estimate[0]).powi(2) + (self.truth[2] - self.estimate[2]).powi(2)
    }

    pub fn velocity_error_sq(&self) -> f64 {
        (self.truth[1] - self.estimate[1]).powi(2) + (self.truth[3] - self.estimate[3]).powi(2)
    }
}

/// Association outcome of one beam in one frame.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AssociationRow {
    pub frame: usize,
    pub target: u32,
    pub radar: u32,
    pub gate_volume: f64,
    pub beta_none: f64,
    pub beta: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunRecord {
    pub scenario_hash: String,
    pub master_seed: u64,
    pub run_index: u64,
    pub rows: Vec<RunRow>,
    pub associations: Vec<AssociationRow>,
}

struct TargetRun<'a> {
    config: &'a TargetConfig,
    model: TransitionModel,
    estimate: TrackEstimate,
    info: FisherInformation,
}

/// Whole true trajectory (frames `0..=frame_count`) of every target.
pub fn simulate_truth(scenario: &Scenario, rng: &mut SimRng) -> Result<Vec<Vec<TargetState>>> {
    scenario
        .targets
        .iter()
        .map(|t| {
            let model = scenario.transition_for(t)?;
            let mut path = Vec::with_capacity(scenario.frame_count + 1);
            path.push(t.initial_truth());
            for k in 0..scenario.frame_count {
                let next = propagate_truth(&path[k], &model, rng);
                path.push(next);
            }
            Ok(path)
        })
        .collect()
}

/// Executes run `run_index` of `scenario`; deterministic in
/// `(master_seed, run_index)`.
pub fn run_once(scenario: &Scenario, run_index: u64) -> Result<RunRecord> {
    let seed = derive_run_seed(scenario.master_seed, run_index);
    let mut truth_rng = stream_rng(seed, Stream::Truth);
    let mut estimate_rng = stream_rng(seed, Stream::Estimate);
    let mut sensor_rng = stream_rng(seed, Stream::Sensor);

    let truth = simulate_truth(scenario, &mut truth_rng)?;
    let mut runs = Vec::with_capacity(scenario.targets.len());
    for t in &scenario.targets {
        let cov = t.initial_cov();
        let mean = match t.initial_estimate {
            InitialEstimate::Mode(EstimateMode::Perturbed) => {
                TargetState::from_vector(&(t.initial_truth().to_vector() + sample_gaussian(&cov, &mut estimate_rng)))
            }
            InitialEstimate::Mode(EstimateMode::Truth) => t.initial_truth(),
            InitialEstimate::Explicit(x) => TargetState::from(x),
        };
        runs.push(TargetRun {
            config: t,
            model: scenario.transition_for(t)?,
            estimate: TrackEstimate::new(mean, cov, 0),
            info: FisherInformation::from_covariance(&cov, 0)?,
        });
    }

    let mut record = RunRecord {
        scenario_hash: scenario.hash(),
        master_seed: scenario.master_seed,
        run_index,
        rows: Vec::with_capacity(scenario.frame_count * runs.len()),
        associations: Vec::new(),
    };
    let mut overlap_warned = false;

    for frame in 1..=scenario.frame_count {
        let illuminated: Vec<Illuminated<'_>> = runs
            .iter()
            .enumerate()
            .map(|(i, r)| Illuminated {
                target_id: r.config.id,
                truth: truth[i][frame],
                beams: &r.config.beams,
            })
            .collect();
        let mut data = simulate_detections(frame, &illuminated, &scenario.radars, &scenario.noise, &mut sensor_rng)
            .map_err(|e| wrap(frame, runs[0].config.id, e))?;

        let predictions: Vec<TrackEstimate> = runs.iter().map(|r| predict(&r.estimate, &r.model)).collect();
        if !overlap_warned {
            overlap_warned = warn_on_gate_overlap(scenario, &runs, &predictions);
        }

        for (i, run) in runs.iter_mut().enumerate() {
            let id = run.config.id;
            let step = track_frame(scenario, run, &predictions[i], &truth[i][frame], &mut data, &mut sensor_rng)
                .map_err(|e| wrap(frame, id, e))?;
            record.rows.push(step.row(frame, id, &truth[i][frame], &run.estimate));
            record.associations.extend(step.associations.into_iter().map(|mut a| {
                a.frame = frame;
                a
            }));
        }
    }
    Ok(record)
}

fn wrap(frame: usize, target: u32, e: Error) -> Error {
    Error::Run {
        frame,
        target,
        source: Box::new(e),
    }
}

struct FrameStep {
    bound: crate::model::StateMatrix,
    nees: f64,
    beta_none: f64,
    associations: Vec<AssociationRow>,
}

impl FrameStep {
    fn row(&self, frame: usize, target: u32, truth: &TargetState, est: &TrackEstimate) -> RunRow {
        RunRow {
            frame,
            target,
            truth: truth.to_array(),
            estimate: est.mean.to_array(),
            cov_diag: [est.cov[(0, 0)], est.cov[(1, 1)], est.cov[(2, 2)], est.cov[(3, 3)]],
            bound_diag: [self.bound[(0, 0)], self.bound[(1, 1)], self.bound[(2, 2)], self.bound[(3, 3)]],
            nees: self.nees,
            beta_none: self.beta_none,
        }
    }
}

fn track_frame(
    scenario: &Scenario,
    run: &mut TargetRun<'_>,
    pred: &TrackEstimate,
    truth: &TargetState,
    data: &mut FrameData,
    rng: &mut SimRng,
) -> Result<FrameStep> {
    let mut observations = Vec::new();
    let mut associations = Vec::new();
    let mut beta_none_sum = 0.0;
    let mut bound_terms = Vec::new();

    for beam in &run.config.beams {
        let radar = find_radar(&scenario.radars, beam.radar_id)?;
        let r = noise_cov(&scenario.noise, beam.power)?;
        let z_pred = measure(&pred.mean, radar)?;
        let h = jacobian(&pred.mean, radar)?;
        let ctx = InnovationContext::new(z_pred, h, &pred.cov, &r.matrix())?;
        let gate = Gate::new(z_pred, ctx.s, radar.gate_threshold)?;

        let expected_clutter = radar.clutter_density * gate.volume();
        if expected_clutter > scenario.options.max_clutter_mean {
            return Err(Error::Numerical(format!(
                "gate of radar {} expects {expected_clutter:.3e} clutter points; track lost",
                radar.id
            )));
        }
        let clutter: Vec<Measurement> = simulate_clutter(&gate, radar.clutter_density, rng)?
            .iter()
            .map(|z| Measurement::from_vector(z, radar.id, r))
            .collect();
        let report = data
            .reports
            .iter_mut()
            .find(|rep| rep.target_id == run.config.id && rep.radar_id == radar.id)
            .expect("detections cover every beam");
        report.clutter = clutter;

        let mut candidates: Vec<MeasVector> = Vec::new();
        for m in report.candidates() {
            let z = m.vector();
            if in_gate(&z, &gate)? {
                candidates.push(z);
            }
        }
        let likelihoods = candidates
            .iter()
            .map(|z| likelihood(z, &ctx))
            .collect::<Result<Vec<_>>>()?;
        let weights = match association_probabilities(&likelihoods, radar.p_detect, gate.volume(), radar.clutter_density) {
            Ok(w) => w,
            Err(Error::NoMeasurement) => crate::pda::AssociationWeights {
                beta: Vec::new(),
                beta_none: 1.0,
            },
            Err(e) => return Err(e),
        };
        beta_none_sum += weights.beta_none;
        if !candidates.is_empty() {
            let covs = vec![r.matrix(); candidates.len()];
            let fused = fuse(&candidates, &covs, &weights, z_pred[crate::measurement::BEARING], scenario.options.fusion)?;
            observations.push((radar, FusedObservation { ctx, fused }));
        }
        if scenario.options.bound_evaluation == BoundEvaluation::Truth {
            bound_terms.push((jacobian(truth, radar)?, r.matrix()));
        }
        associations.push(AssociationRow {
            frame: 0,
            target: run.config.id,
            radar: radar.id,
            gate_volume: gate.volume(),
            beta_none: weights.beta_none,
            beta: weights.beta,
        });
    }

    let obs: Vec<FusedObservation> = observations.iter().map(|(_, o)| *o).collect();
    run.estimate = update(pred, &obs)?;

    if scenario.options.bound_evaluation == BoundEvaluation::Estimate {
        for (radar, o) in &observations {
            bound_terms.push((jacobian(&run.estimate.mean, radar)?, o.fused.r_fused));
        }
    }
    run.info = bcrlb::recurse_state(&run.info, run.model.f(), run.model.q(), &bound_terms)?;
    let bound = bcrlb::bound(&run.info.j)?;

    Ok(FrameStep {
        bound,
        nees: run.estimate.nees(truth)?,
        beta_none: beta_none_sum / run.config.beams.len() as f64,
        associations,
    })
}

/// Logs a warning when a target's predicted measurement falls inside
/// another target's gate at the same radar. Returns true once warned.
fn warn_on_gate_overlap(scenario: &Scenario, runs: &[TargetRun<'_>], predictions: &[TrackEstimate]) -> bool {
    let gate_of = |i: usize, radar: &RadarNode| -> Option<Gate> {
        let beam = runs[i].config.beams.iter().find(|b| b.radar_id == radar.id)?;
        let r = noise_cov(&scenario.noise, beam.power).ok()?;
        let z = measure(&predictions[i].mean, radar).ok()?;
        let h = jacobian(&predictions[i].mean, radar).ok()?;
        let ctx = InnovationContext::new(z, h, &predictions[i].cov, &r.matrix()).ok()?;
        Gate::new(z, ctx.s, radar.gate_threshold).ok()
    };
    for radar in &scenario.radars {
        for i in 0..runs.len() {
            let Some(gate) = gate_of(i, radar) else { continue };
            for (j, other) in predictions.iter().enumerate() {
                if i == j {
                    continue;
                }
                let Ok(z) = measure(&other.mean, radar) else { continue };
                if in_gate(&z, &gate).unwrap_or(false) {
                    log::warn!(
                        "targets {} and {} overlap in the gate of radar {}; targets are assumed well separated",
                        runs[i].config.id,
                        runs[j].config.id,
                        radar.id
                    );
                    return true;
                }
            }
        }
    }
    false
}

/// Root mean square of the given errors.
pub fn rmse(errors: impl IntoIterator<Item = f64>) -> f64 {
    let (sum, n) = errors.into_iter().fold((0.0, 0usize), |(s, n), e| (s + e * e, n + 1));
    (sum / n as f64).sqrt()
}

/// Per (frame, target) Monte Carlo statistics.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SummaryRow {
    pub frame: usize,
    pub target: u32,
    pub runs: usize,
    pub position_rmse: f64,
    pub velocity_rmse: f64,
    pub mean_nees: f64,
    pub mean_bound_trace: f64,
    /// `sqrt(mean(B_xx + B_yy))` over runs.
    pub position_bound: f64,
    pub velocity_bound: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Summary {
    pub scenario_hash: String,
    pub master_seed: u64,
    pub requested_runs: usize,
    pub failed_runs: Vec<u64>,
    pub rows: Vec<SummaryRow>,
}

/// Aggregates successful runs, summing in run order.
pub fn summarize(scenario: &Scenario, records: &[RunRecord], requested_runs: usize, failed_runs: Vec<u64>) -> Summary {
    let mut rows = Vec::new();
    if let Some(first) = records.first() {
        let n = records.len() as f64;
        for (idx, template) in first.rows.iter().enumerate() {
            let mut pos = 0.0;
            let mut vel = 0.0;
            let mut nees = 0.0;
            let mut trace = 0.0;
            let mut pos_b = 0.0;
            let mut vel_b = 0.0;
            for rec in records {
                let row = &rec.rows[idx];
                debug_assert_eq!((row.frame, row.target), (template.frame, template.target));
                pos += row.position_error_sq();
                vel += row.velocity_error_sq();
                nees += row.nees;
                trace += row.bound_diag.iter().sum::<f64>();
                pos_b += row.bound_diag[0] + row.bound_diag[2];
                vel_b += row.bound_diag[1] + row.bound_diag[3];
            }
            rows.push(SummaryRow {
                frame: template.frame,
                target: template.target,
                runs: records.len(),
                position_rmse: (pos / n).sqrt(),
                velocity_rmse: (vel / n).sqrt(),
                mean_nees: nees / n,
                mean_bound_trace: trace / n,
                position_bound: (pos_b / n).sqrt(),
                velocity_bound: (vel_b / n).sqrt(),
            });
        }
    }
    Summary {
        scenario_hash: scenario.hash(),
        master_seed: scenario.master_seed,
        requested_runs,
        failed_runs,
        rows,
    }
}

/// Runs `0..n_runs` in parallel, returning successful records in run order
/// and the indices of failed runs.
pub fn monte_carlo_runs(scenario: &Scenario, n_runs: usize) -> (Vec<RunRecord>, Vec<(u64, Error)>) {
    let results: Vec<(u64, Result<RunRecord>)> = (0..n_runs as u64)
        .into_par_iter()
        .map(|i| (i, run_once(scenario, i)))
        .collect();
    let mut ok = Vec::with_capacity(n_runs);
    let mut failed = Vec::new();
    for (i, r) in results {
        match r {
            Ok(rec) => ok.push(rec),
            Err(e) => failed.push((i, e)),
        }
    }
    (ok, failed)
}

/// Monte Carlo summary over `n_runs` runs; more than 10% failed runs
/// aborts with [`Error::TooManyFailures`].
pub fn monte_carlo(scenario: &Scenario, n_runs: usize) -> Result<Summary> {
    if n_runs < 1 {
        return Err(Error::invalid("n_runs", "at least one run is required"));
    }
    let (records, failed) = monte_carlo_runs(scenario, n_runs);
    for (i, e) in &failed {
        log::warn!("run {i} failed: {e}");
    }
    if failed.len() * 10 > n_runs || records.is_empty() {
        return Err(Error::TooManyFailures {
            failed: failed.len(),
            total: n_runs,
        });
    }
    Ok(summarize(scenario, &records, n_runs, failed.into_iter().map(|(i, _)| i).collect()))
}
