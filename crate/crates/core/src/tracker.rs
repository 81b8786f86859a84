//! Fusion EKF: prediction with the transition model and a Joseph-form
//! update against the fused per-radar measurements.

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::{cholesky_dyn, is_psd_dyn, symmetrize, symmetrize_dyn};
use crate::measurement::{residual, BEARING};
use crate::model::{StateMatrix, TargetState, TransitionModel};
use crate::pda::{FusedMeasurement, InnovationContext};

/// Gaussian track estimate at a frame.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TrackEstimate {
    pub mean: TargetState,
    pub cov: StateMatrix,
    pub frame: usize,
}

impl TrackEstimate {
    pub fn new(mean: TargetState, cov: StateMatrix, frame: usize) -> Self {
        TrackEstimate { mean, cov, frame }
    }

    /// Normalized estimation error squared of `truth` under this estimate.
    pub fn nees(&self, truth: &TargetState) -> Result<f64> {
        crate::linalg::inv_quad_form(
            &self.cov,
            &(truth.to_vector() - self.mean.to_vector()),
            "track covariance",
        )
    }
}

/// `x = F x`, `P = F P F' + Q`.
pub fn predict(est: &TrackEstimate, model: &TransitionModel) -> TrackEstimate {
    let f = model.f();
    TrackEstimate {
        mean: TargetState::from_vector(&(f * est.mean.to_vector())),
        cov: symmetrize(&(f * est.cov * f.transpose() + model.q())),
        frame: est.frame + 1,
    }
}

/// `K = P H' S^-1`, solved through a Cholesky factor of `S`.
pub fn kalman_gain(p_pred: &DMatrix<f64>, h: &DMatrix<f64>, s: &DMatrix<f64>) -> Result<DMatrix<f64>> {
    let chol = cholesky_dyn(s, "innovation covariance")?;
    // K' = S^-1 H P since S and P are symmetric
    let kt = chol.solve(&(h * p_pred));
    Ok(kt.transpose())
}

/// Result of one linearized Kalman update.
#[derive(Debug, Clone)]
pub struct KalmanStep {
    pub mean: DVector<f64>,
    pub cov: DMatrix<f64>,
    pub gain: DMatrix<f64>,
    pub innovation_cov: DMatrix<f64>,
}

/// Kalman update of `(mean, cov)` given an innovation already formed by the
/// caller, with the covariance in Joseph form
/// `(I - K H) P (I - K H)' + K R K'`.
pub fn kalman_update(
    mean: &DVector<f64>,
    cov: &DMatrix<f64>,
    h: &DMatrix<f64>,
    innovation: &DVector<f64>,
    r: &DMatrix<f64>,
) -> Result<KalmanStep> {
    let n = mean.len();
    let s = symmetrize_dyn(&(h * cov * h.transpose() + r));
    let gain = kalman_gain(cov, h, &s)?;
    let ikh = DMatrix::identity(n, n) - &gain * h;
    let joseph = &ikh * cov * ikh.transpose() + &gain * r * gain.transpose();
    let cov_post = symmetrize_dyn(&joseph);
    if !is_psd_dyn(&cov_post, 1e-9) {
        return Err(Error::Numerical("posterior covariance is not PSD".into()));
    }
    Ok(KalmanStep {
        mean: mean + &gain * innovation,
        cov: cov_post,
        gain,
        innovation_cov: s,
    })
}

/// One radar's fused measurement together with the linearization it was
/// gated against.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FusedObservation {
    pub ctx: InnovationContext,
    pub fused: FusedMeasurement,
}

/// EKF update of a predicted track against every radar's fused
/// measurement, stacked into one observation with block-diagonal noise.
///
/// With no observations the prediction is returned unchanged.
pub fn update(pred: &TrackEstimate, observations: &[FusedObservation]) -> Result<TrackEstimate> {
    if observations.is_empty() {
        return Ok(*pred);
    }
    let m = 3 * observations.len();
    let mut h = DMatrix::zeros(m, 4);
    let mut r = DMatrix::zeros(m, m);
    let mut nu = DVector::zeros(m);
    for (k, obs) in observations.iter().enumerate() {
        let row = 3 * k;
        h.view_mut((row, 0), (3, 4)).copy_from(&obs.ctx.h);
        r.view_mut((row, row), (3, 3)).copy_from(&obs.fused.r_fused);
        let d = residual(&obs.fused.z_bar, &obs.ctx.z_pred);
        debug_assert!(d[BEARING].abs() <= std::f64::consts::PI);
        nu.rows_mut(row, 3).copy_from(&d);
    }
    let mean = DVector::from_column_slice(pred.mean.to_vector().as_slice());
    let cov = DMatrix::from_column_slice(4, 4, pred.cov.as_slice());
    let step = kalman_update(&mean, &cov, &h, &nu, &r)?;
    let mean = TargetState::new(step.mean[0], step.mean[1], step.mean[2], step.mean[3]);
    if !mean.is_finite() {
        return Err(Error::Numerical("updated state is not finite".into()));
    }
    Ok(TrackEstimate {
        mean,
        cov: StateMatrix::from_column_slice(step.cov.as_slice()),
        frame: pred.frame,
    })
}
