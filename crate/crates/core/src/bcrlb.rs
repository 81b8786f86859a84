//! Recursive Bayesian Cramer-Rao lower bound.
//!
//! The Fisher information is propagated as `J_k = I_P + I_M` where
//! `I_P = (F J_{k-1}^-1 F' + Q)^-1` carries the prior through the linear
//! transition and `I_M = sum H' R^-1 H` adds each sensor's measurement
//! information. The bound on the estimation error covariance is `J_k^-1`.
//!
//! Functions are generic over the state dimension `N` and measurement
//! dimension `M` so low-dimensional surrogates share the same code.

use nalgebra::SMatrix;
use serde::{Deserialize, Serialize};

use crate::error::Result;
use crate::linalg::{spd_inverse, symmetrize};
use crate::model::StateMatrix;

/// Where the measurement Jacobian and noise of the bound are evaluated.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum BoundEvaluation {
    /// Along the true trajectory with the clutter-free noise of every
    /// assigned beam.
    #[default]
    Truth,
    /// At the tracker's updated estimate with the realized fused noise.
    Estimate,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FisherInformation {
    pub j: StateMatrix,
    pub frame: usize,
}

impl FisherInformation {
    /// Information of a Gaussian prior with covariance `cov`.
    pub fn from_covariance(cov: &StateMatrix, frame: usize) -> Result<Self> {
        Ok(FisherInformation {
            j: spd_inverse(cov, "initial covariance")?,
            frame,
        })
    }
}

/// `(F J^-1 F' + Q)^-1`.
pub fn prior_information<const N: usize>(
    j_prev: &SMatrix<f64, N, N>,
    f: &SMatrix<f64, N, N>,
    q: &SMatrix<f64, N, N>,
) -> Result<SMatrix<f64, N, N>> {
    let cov_prev = spd_inverse(j_prev, "previous Fisher information")?;
    let predicted = symmetrize(&(f * cov_prev * f.transpose() + q));
    spd_inverse(&predicted, "predicted bound covariance")
}

/// `H' R^-1 H`.
pub fn measurement_information<const M: usize, const N: usize>(
    h: &SMatrix<f64, M, N>,
    r: &SMatrix<f64, M, M>,
) -> Result<SMatrix<f64, N, N>> {
    let r_inv = spd_inverse(r, "fused measurement covariance")?;
    Ok(symmetrize(&(h.transpose() * r_inv * h)))
}

/// One step of the information recursion with any number of sensor terms.
pub fn recurse<const M: usize, const N: usize>(
    j_prev: &SMatrix<f64, N, N>,
    f: &SMatrix<f64, N, N>,
    q: &SMatrix<f64, N, N>,
    sensors: &[(SMatrix<f64, M, N>, SMatrix<f64, M, M>)],
) -> Result<SMatrix<f64, N, N>> {
    let mut j = prior_information(j_prev, f, q)?;
    for (h, r) in sensors {
        j += measurement_information(h, r)?;
    }
    Ok(symmetrize(&j))
}

/// Advances a tracked [`FisherInformation`] by one frame.
pub fn recurse_state(
    prev: &FisherInformation,
    f: &StateMatrix,
    q: &StateMatrix,
    sensors: &[(nalgebra::Matrix3x4<f64>, nalgebra::Matrix3<f64>)],
) -> Result<FisherInformation> {
    Ok(FisherInformation {
        j: recurse(&prev.j, f, q, sensors)?,
        frame: prev.frame + 1,
    })
}

/// Error covariance bound `J^-1`.
pub fn bound<const N: usize>(j: &SMatrix<f64, N, N>) -> Result<SMatrix<f64, N, N>> {
    spd_inverse(j, "Fisher information")
}

/// `sqrt(B_xx + B_yy)` for a `[x, vx, y, vy]` bound.
pub fn position_rmse_bound(b: &StateMatrix) -> f64 {
    (b[(0, 0)] + b[(2, 2)]).sqrt()
}

/// `sqrt(B_vxvx + B_vyvy)` for a `[x, vx, y, vy]` bound.
pub fn velocity_rmse_bound(b: &StateMatrix) -> f64 {
    (b[(1, 1)] + b[(3, 3)]).sqrt()
}
