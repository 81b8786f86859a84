//! Probabilistic data association over one radar's gated candidates and
//! the fused measurement handed to the filter update.

use std::f64::consts::PI;

use nalgebra::{Matrix3, Matrix3x4};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::{cholesky, inv_quad_form, symmetrize};
use crate::measurement::{residual, wrap_angle, MeasVector, BEARING};
use crate::model::StateMatrix;

/// How candidate weights enter the fused measurement.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum FusionMode {
    /// Weights renormalized over the candidates (`beta_i / sum beta`), so
    /// the no-target mass never drags the fused measurement.
    #[default]
    Normalized,
    /// Raw association probabilities in every sum.
    RawWeights,
}

/// `S = H P H' + R`, symmetrized and checked positive definite.
pub fn innovation_cov(h: &Matrix3x4<f64>, p_pred: &StateMatrix, r: &Matrix3<f64>) -> Result<Matrix3<f64>> {
    let s = symmetrize(&(h * p_pred * h.transpose() + r));
    cholesky(&s, "innovation covariance")?;
    Ok(s)
}

/// Predicted measurement, its Jacobian and innovation covariance for one
/// radar looking at one predicted track.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct InnovationContext {
    pub z_pred: MeasVector,
    pub h: Matrix3x4<f64>,
    pub s: Matrix3<f64>,
}

impl InnovationContext {
    pub fn new(z_pred: MeasVector, h: Matrix3x4<f64>, p_pred: &StateMatrix, r: &Matrix3<f64>) -> Result<Self> {
        Ok(InnovationContext {
            z_pred,
            h,
            s: innovation_cov(&h, p_pred, r)?,
        })
    }
}

/// Gaussian density of the innovation `z - z_pred` under `N(0, S)`.
pub fn likelihood(z: &MeasVector, ctx: &InnovationContext) -> Result<f64> {
    let d2 = inv_quad_form(&ctx.s, &residual(z, &ctx.z_pred), "innovation covariance")?;
    let det = ctx.s.determinant();
    let norm = ((2.0 * PI).powi(3) * det).sqrt();
    let f = (-0.5 * d2).exp() / norm;
    if f > 0.0 && f.is_finite() {
        Ok(f)
    } else {
        Err(Error::Numerical(format!(
            "candidate likelihood {f} (distance^2 {d2}, det S {det})"
        )))
    }
}

/// Association probabilities of each candidate plus the no-target mass.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AssociationWeights {
    pub beta: Vec<f64>,
    pub beta_none: f64,
}

impl AssociationWeights {
    pub fn total(&self) -> f64 {
        self.beta_none + self.beta.iter().sum::<f64>()
    }
}

/// `beta_i = P_D f_i / (V L + P_D sum f)`, `beta_0 = V L / (V L + P_D sum f)`.
///
/// Returns [`Error::NoMeasurement`] when there are no candidates and no
/// clutter mass; the caller then skips the measurement update.
pub fn association_probabilities(
    likelihoods: &[f64],
    p_detect: f64,
    gate_volume: f64,
    clutter_density: f64,
) -> Result<AssociationWeights> {
    if !(p_detect > 0.0 && p_detect <= 1.0) {
        return Err(Error::invalid("p_detect", format!("must be in (0, 1], got {p_detect}")));
    }
    if !(gate_volume > 0.0 && gate_volume.is_finite()) {
        return Err(Error::invalid("gate_volume", format!("must be > 0, got {gate_volume}")));
    }
    if !(clutter_density >= 0.0 && clutter_density.is_finite()) {
        return Err(Error::invalid(
            "clutter_density",
            format!("must be >= 0, got {clutter_density}"),
        ));
    }
    if let Some(bad) = likelihoods.iter().find(|f| !(**f > 0.0 && f.is_finite())) {
        return Err(Error::invalid("likelihoods", format!("must be > 0, got {bad}")));
    }
    let clutter_mass = gate_volume * clutter_density;
    if likelihoods.is_empty() && clutter_mass == 0.0 {
        return Err(Error::NoMeasurement);
    }
    let weighted: Vec<f64> = likelihoods.iter().map(|f| p_detect * f).collect();
    let denom = clutter_mass + weighted.iter().sum::<f64>();
    Ok(AssociationWeights {
        beta: weighted.iter().map(|w| w / denom).collect(),
        beta_none: clutter_mass / denom,
    })
}

/// Fused measurement and its effective covariance.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FusedMeasurement {
    pub z_bar: MeasVector,
    pub r_fused: Matrix3<f64>,
}

/// Weighted mean of the candidates and the weighted covariance including
/// the spread of candidates about that mean.
///
/// Bearings are unwrapped about `bearing_ref` (normally the predicted
/// bearing) before averaging so candidates straddling the `+-pi` seam
/// average correctly.
pub fn fuse(
    measurements: &[MeasVector],
    covariances: &[Matrix3<f64>],
    weights: &AssociationWeights,
    bearing_ref: f64,
    mode: FusionMode,
) -> Result<FusedMeasurement> {
    if measurements.is_empty() {
        return Err(Error::invalid("measurements", "no candidates to fuse"));
    }
    if measurements.len() != covariances.len() || measurements.len() != weights.beta.len() {
        return Err(Error::invalid(
            "measurements",
            format!(
                "length mismatch: {} measurements, {} covariances, {} weights",
                measurements.len(),
                covariances.len(),
                weights.beta.len()
            ),
        ));
    }
    let mass: f64 = weights.beta.iter().sum();
    if !(mass > 0.0) {
        return Err(Error::DegenerateWeights);
    }
    let w: Vec<f64> = match mode {
        FusionMode::Normalized => weights.beta.iter().map(|b| b / mass).collect(),
        FusionMode::RawWeights => weights.beta.clone(),
    };
    let unwrapped: Vec<MeasVector> = measurements
        .iter()
        .map(|z| {
            let mut u = *z;
            u[BEARING] = bearing_ref + wrap_angle(z[BEARING] - bearing_ref);
            u
        })
        .collect();

    let mut z_bar = MeasVector::zeros();
    for (wi, z) in w.iter().zip(&unwrapped) {
        z_bar += z * *wi;
    }
    let mut r_fused = Matrix3::zeros();
    for ((wi, z), r) in w.iter().zip(&unwrapped).zip(covariances) {
        // plain difference: z_bar lives in the same unwrapped coordinates
        let d = z - z_bar;
        r_fused += r * *wi + d * d.transpose() * *wi;
    }
    z_bar[BEARING] = wrap_angle(z_bar[BEARING]);
    Ok(FusedMeasurement {
        z_bar,
        r_fused: symmetrize(&r_fused),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::linalg::is_psd;
    use crate::rng::{stream_rng, Stream};
    use approx::assert_relative_eq;
    use nalgebra::{Matrix4, Vector3};
    use proptest::prelude::*;
    use rand::Rng;

    fn ctx_identity() -> InnovationContext {
        InnovationContext {
            z_pred: Vector3::new(1000.0, 0.2, 5.0),
            h: Matrix3x4::zeros(),
            s: Matrix3::identity(),
        }
    }

    #[test]
    fn innovation_cov_degenerate_inputs() {
        let r = Matrix3::from_diagonal(&Vector3::new(100.0, 1e-4, 25.0));
        let h = Matrix3x4::from_fn(|i, j| (i + 2 * j) as f64 * 0.1);
        assert_eq!(innovation_cov(&h, &Matrix4::zeros(), &r).unwrap(), r);
        assert_eq!(innovation_cov(&Matrix3x4::zeros(), &Matrix4::identity(), &r).unwrap(), r);
        assert!(innovation_cov(&h, &Matrix4::zeros(), &Matrix3::zeros()).is_err());
    }

    #[test]
    fn innovation_cov_dominates_noise() {
        let mut rng = stream_rng(21, Stream::Sensor);
        for _ in 0..100 {
            let a = Matrix4::<f64>::from_fn(|_, _| rng.random_range(-1.0..1.0));
            let p = a * a.transpose();
            let h = Matrix3x4::<f64>::from_fn(|_, _| rng.random_range(-2.0..2.0));
            let r = Matrix3::from_diagonal(&Vector3::from_fn(|_, _| rng.random_range(0.1..3.0)));
            let s = innovation_cov(&h, &p, &r).unwrap();
            assert!(is_psd(&(s - r), 1e-12));
        }
    }

    #[test]
    fn mode_density() {
        let ctx = ctx_identity();
        assert_relative_eq!(likelihood(&ctx.z_pred, &ctx).unwrap(), 0.063494, epsilon = 1e-6);
        assert_relative_eq!(
            likelihood(&ctx.z_pred, &ctx).unwrap(),
            (2.0 * PI).powf(-1.5),
            max_relative = 1e-15
        );
        let wide = InnovationContext { s: Matrix3::identity() * 4.0, ..ctx };
        assert_relative_eq!(
            likelihood(&ctx.z_pred, &wide).unwrap(),
            likelihood(&ctx.z_pred, &ctx).unwrap() / 8.0,
            max_relative = 1e-14
        );
    }

    #[test]
    fn density_integrates_to_one() {
        // importance sampling from N(0, S) itself would be circular, so
        // integrate over a box with uniform samples instead
        let s = Matrix3::from_diagonal(&Vector3::new(4.0, 0.25, 1.0));
        let ctx = InnovationContext { s, ..ctx_identity() };
        let half = Vector3::new(2.0 * 6.0, 0.5 * 6.0, 6.0);
        let volume = 8.0 * half.product();
        let mut rng = stream_rng(31, Stream::Sensor);
        let n = 1_000_000;
        let mut acc = 0.0;
        for _ in 0..n {
            let d = Vector3::from_fn(|i, _| rng.random_range(-half[i]..half[i]));
            acc += likelihood(&(ctx.z_pred + d), &ctx).unwrap();
        }
        let integral = volume * acc / n as f64;
        assert!((integral - 1.0).abs() < 0.01, "integral {integral}");
    }

    #[test]
    fn single_candidate_without_clutter() {
        for pd in [0.1, 0.5, 1.0] {
            let w = association_probabilities(&[3.7e-5], pd, 12.0, 0.0).unwrap();
            assert_eq!(w.beta, vec![1.0]);
            assert_eq!(w.beta_none, 0.0);
        }
    }

    #[test]
    fn closed_form_weights() {
        let w = association_probabilities(&[1.8], 0.9, 0.4, 0.5).unwrap();
        assert_relative_eq!(w.beta[0], 1.62 / 1.82, max_relative = 1e-15);
        assert_relative_eq!(w.beta[0], 0.89011, epsilon = 1e-5);
        assert_relative_eq!(w.beta_none, 0.10989, epsilon = 1e-5);
    }

    #[test]
    fn equal_likelihoods_equal_weights() {
        let w = association_probabilities(&[0.3; 4], 0.8, 2.0, 0.1).unwrap();
        assert!(w.beta.iter().all(|b| *b == w.beta[0]));
    }

    #[test]
    fn empty_candidates() {
        assert!(matches!(
            association_probabilities(&[], 0.9, 3.0, 0.0),
            Err(Error::NoMeasurement)
        ));
        let w = association_probabilities(&[], 0.9, 3.0, 0.2).unwrap();
        assert!(w.beta.is_empty());
        assert_eq!(w.beta_none, 1.0);
        assert!(association_probabilities(&[0.0], 0.9, 3.0, 0.2).is_err());
        assert!(association_probabilities(&[1.0], 0.0, 3.0, 0.2).is_err());
    }

    #[test]
    fn single_measurement_fusion_is_identity() {
        let z = Vector3::new(5000.0, -1.2, 30.0);
        let r = Matrix3::from_diagonal(&Vector3::new(100.0, 1e-4, 25.0));
        let w = AssociationWeights { beta: vec![0.7], beta_none: 0.3 };
        let f = fuse(&[z], &[r], &w, -1.19, FusionMode::Normalized).unwrap();
        assert_relative_eq!(f.z_bar, z, max_relative = 1e-15);
        assert_eq!(f.r_fused, r);
    }

    #[test]
    fn coincident_candidates() {
        let z = Vector3::new(5000.0, 0.4, -3.0);
        let r = Matrix3::from_diagonal(&Vector3::new(100.0, 1e-4, 25.0));
        let w = AssociationWeights { beta: vec![0.45, 0.45], beta_none: 0.1 };
        let f = fuse(&[z, z], &[r, r], &w, 0.4, FusionMode::Normalized).unwrap();
        assert_relative_eq!(f.z_bar, z, max_relative = 1e-15);
        assert_relative_eq!(f.r_fused, r, max_relative = 1e-15);
    }

    #[test]
    fn fusion_across_bearing_seam() {
        let r = Matrix3::identity() * 1e-4;
        let a = Vector3::new(100.0, PI - 0.01, 0.0);
        let b = Vector3::new(100.0, -PI + 0.01, 0.0);
        let w = AssociationWeights { beta: vec![0.5, 0.5], beta_none: 0.0 };
        let f = fuse(&[a, b], &[r, r], &w, PI, FusionMode::Normalized).unwrap();
        assert!((wrap_angle(f.z_bar[1] - PI)).abs() < 1e-12);
        assert!(f.r_fused[(1, 1)] < 2e-4);
    }

    #[test]
    fn degenerate_weights_rejected() {
        let z = Vector3::new(1.0, 0.0, 0.0);
        let w = AssociationWeights { beta: vec![0.0], beta_none: 1.0 };
        assert!(matches!(
            fuse(&[z], &[Matrix3::identity()], &w, 0.0, FusionMode::Normalized),
            Err(Error::DegenerateWeights)
        ));
        let w = AssociationWeights { beta: vec![1.0, 0.0], beta_none: 0.0 };
        assert!(fuse(&[z], &[Matrix3::identity()], &w, 0.0, FusionMode::Normalized).is_err());
    }

    proptest! {
        #[test]
        fn weights_normalize(
            fs in prop::collection::vec(1e-12f64..10.0, 0..8),
            pd in 0.01f64..=1.0,
            v in 1e-3f64..1e3,
            lambda in 0.0f64..1.0,
        ) {
            prop_assume!(!fs.is_empty() || lambda > 0.0);
            let w = association_probabilities(&fs, pd, v, lambda).unwrap();
            prop_assert!((w.total() - 1.0).abs() <= 1e-12);
            prop_assert!(w.beta.iter().chain([&w.beta_none]).all(|b| (0.0..=1.0).contains(b)));
            for i in 0..fs.len() {
                for j in 0..fs.len() {
                    prop_assert!((w.beta[i] / w.beta[j] - fs[i] / fs[j]).abs() <= 1e-10 * fs[i] / fs[j]);
                }
            }
        }

        #[test]
        fn fused_covariance_is_psd(
            seed in any::<u64>(),
            n in 1usize..6,
            literal in any::<bool>(),
        ) {
            let mut rng = stream_rng(seed, Stream::Sensor);
            let zs: Vec<MeasVector> = (0..n).map(|_| Vector3::new(
                rng.random_range(4000.0..4100.0), rng.random_range(-PI..PI), rng.random_range(-50.0..50.0))).collect();
            let rs: Vec<Matrix3<f64>> = (0..n).map(|_| Matrix3::from_diagonal(&Vector3::new(
                rng.random_range(1.0..100.0), rng.random_range(1e-6..1e-3), rng.random_range(1.0..30.0)))).collect();
            let fs: Vec<f64> = (0..n).map(|_| rng.random_range(1e-6..1.0)).collect();
            let w = association_probabilities(&fs, 0.9, 10.0, 0.05).unwrap();
            let mode = if literal { FusionMode::RawWeights } else { FusionMode::Normalized };
            let f = fuse(&zs, &rs, &w, zs[0][1], mode).unwrap();
            prop_assert!(is_psd(&f.r_fused, 1e-12));
            prop_assert!(f.z_bar[1] > -PI && f.z_bar[1] <= PI);
        }

        #[test]
        fn spread_vanishes_only_for_identical_candidates(
            seed in any::<u64>(), offset in 1e-3f64..10.0,
        ) {
            let mut rng = stream_rng(seed, Stream::Sensor);
            let z = Vector3::new(4000.0, rng.random_range(-3.0..3.0), 10.0);
            let r = Matrix3::identity();
            let w = AssociationWeights { beta: vec![0.5, 0.3], beta_none: 0.2 };
            let same = fuse(&[z, z], &[r, r], &w, z[1], FusionMode::Normalized).unwrap();
            prop_assert!((same.r_fused - r).amax() <= 1e-12);
            let moved = fuse(&[z, z + Vector3::new(offset, 0.0, 0.0)], &[r, r], &w, z[1], FusionMode::Normalized).unwrap();
            prop_assert!(moved.r_fused[(0, 0)] > 1.0);
        }
    }
}
