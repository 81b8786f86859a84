//! Acceptance suite: one PASS/FAIL line per criterion, non-zero exit if any
//! criterion fails.
//!
//! Every oracle here is written out directly (explicit inverses, scalar
//! loops, finite differences) rather than going through the library's own
//! helpers.

use std::f64::consts::PI;
use std::path::PathBuf;
use std::process::Command;
use std::time::{Duration, Instant};

use nalgebra::{DMatrix, DVector, Matrix2, Matrix2x4, Matrix3, Matrix4, Vector2, Vector3};
use pdatrack::bcrlb::{bound, recurse};
use pdatrack::harness::{monte_carlo, run_once, Summary};
use pdatrack::measurement::{jacobian, measure, MeasVector};
use pdatrack::model::{process_noise_cov, transition_matrix, TargetState, TransitionModel};
use pdatrack::pda::{association_probabilities, fuse, FusionMode};
use pdatrack::rng::{stream_rng, SimRng, Stream};
use pdatrack::scenario::{reference_scenario, Scenario};
use pdatrack::tracker::{kalman_update, predict, TrackEstimate};
use rand::Rng;

struct Outcome {
    passed: bool,
    detail: String,
}

fn outcome(passed: bool, detail: impl Into<String>) -> Outcome {
    Outcome {
        passed,
        detail: detail.into(),
    }
}

fn rng(seed: u64) -> SimRng {
    stream_rng(seed, Stream::Sensor)
}

fn jacobian_vs_finite_differences() -> Outcome {
    let start = Instant::now();
    let scenario = reference_scenario();
    let mut rng = rng(1);
    let mut worst: f64 = 0.0;
    let mut checked = 0;
    while checked < 100 {
        let state = [
            rng.random_range(-20_000.0..20_000.0),
            rng.random_range(-50.0..50.0),
            rng.random_range(-20_000.0..20_000.0),
            rng.random_range(-50.0..50.0),
        ];
        let near_radar = scenario
            .radars
            .iter()
            .any(|r| (state[0] - r.position[0]).hypot(state[2] - r.position[1]) < 100.0);
        if near_radar {
            continue;
        }
        checked += 1;
        for radar in &scenario.radars {
            let analytic = jacobian(&TargetState::from(state), radar).unwrap();
            for col in 0..4 {
                let h = 1e-6 * state[col].abs().max(1.0);
                let mut plus = state;
                let mut minus = state;
                plus[col] += h;
                minus[col] -= h;
                let zp = measure(&TargetState::from(plus), radar).unwrap();
                let zm = measure(&TargetState::from(minus), radar).unwrap();
                for row in 0..3 {
                    let mut dz = zp[row] - zm[row];
                    if row == 1 {
                        dz = (dz + PI).rem_euclid(2.0 * PI) - PI;
                    }
                    let numeric = dz / (2.0 * h);
                    let a = analytic[(row, col)];
                    let row_scale = (0..4).fold(0.0f64, |m, c| m.max(analytic[(row, c)].abs()));
                    let rel = (a - numeric).abs() / a.abs().max(1e-6 * row_scale).max(f64::MIN_POSITIVE);
                    worst = worst.max(rel);
                }
            }
        }
    }
    let elapsed = start.elapsed();
    outcome(
        worst <= 1e-6 && elapsed < Duration::from_secs(1),
        format!("max relative error {worst:.2e} over 100 states x 2 radars in {elapsed:.2?}"),
    )
}

fn pda_normalization() -> Outcome {
    let mut rng = rng(2);
    let mut worst_sum: f64 = 0.0;
    let mut worst_ratio: f64 = 0.0;
    for _ in 0..1000 {
        let n = rng.random_range(1..=10);
        let f: Vec<f64> = (0..n).map(|_| 10f64.powf(rng.random_range(-12.0..0.0))).collect();
        let p_d = rng.random_range(0.05..=1.0);
        let volume = 10f64.powf(rng.random_range(-2.0..5.0));
        let density = if rng.random_bool(0.1) {
            0.0
        } else {
            10f64.powf(rng.random_range(-6.0..0.0))
        };
        let w = association_probabilities(&f, p_d, volume, density).unwrap();
        worst_sum = worst_sum.max((w.total() - 1.0).abs());
        for i in 0..n {
            for j in 0..n {
                let ratio = w.beta[i] / w.beta[j];
                let expected = f[i] / f[j];
                worst_ratio = worst_ratio.max((ratio - expected).abs() / expected);
            }
        }
    }
    outcome(
        worst_sum <= 1e-12 && worst_ratio <= 1e-10,
        format!("max |sum - 1| {worst_sum:.2e}, max ratio error {worst_ratio:.2e} over 1000 sets"),
    )
}

fn random_spd3(rng: &mut SimRng) -> Matrix3<f64> {
    let a = Matrix3::from_fn(|_, _| rng.random_range(-1.0..1.0));
    let scale = Matrix3::from_diagonal(&Vector3::new(10.0, 0.003, 3.0));
    scale * (a * a.transpose() + Matrix3::identity() * 0.1) * scale
}

/// Direct summation of the weighted covariance with the spread term.
fn fused_cov_oracle(z: &[[f64; 3]], r: &[Matrix3<f64>], weights: &[f64], bearing_ref: f64) -> [[f64; 3]; 3] {
    let unwrapped: Vec<[f64; 3]> = z
        .iter()
        .map(|zi| {
            let d = (zi[1] - bearing_ref + PI).rem_euclid(2.0 * PI) - PI;
            [zi[0], bearing_ref + d, zi[2]]
        })
        .collect();
    let mut mean = [0.0; 3];
    for (w, zi) in weights.iter().zip(&unwrapped) {
        for k in 0..3 {
            mean[k] += w * zi[k];
        }
    }
    let mut out = [[0.0; 3]; 3];
    for i in 0..z.len() {
        for a in 0..3 {
            for b in 0..3 {
                out[a][b] += weights[i] * r[i][(a, b)]
                    + weights[i] * (unwrapped[i][a] - mean[a]) * (unwrapped[i][b] - mean[b]);
            }
        }
    }
    out
}

fn fusion_oracle() -> Outcome {
    let mut rng = rng(3);
    let mut worst: f64 = 0.0;
    let mut all_psd = true;
    for case in 0..1000 {
        let n = rng.random_range(1..=8);
        // every tenth case sits on the bearing seam
        let bearing_ref = if case % 10 == 0 {
            PI - 0.01
        } else {
            rng.random_range(-3.0..3.0)
        };
        let z_pred = [rng.random_range(1000.0..20_000.0), bearing_ref, rng.random_range(-300.0..300.0)];
        let z: Vec<[f64; 3]> = (0..n)
            .map(|_| {
                let b = z_pred[1] + rng.random_range(-0.05..0.05);
                [
                    z_pred[0] + rng.random_range(-80.0..80.0),
                    (b + PI).rem_euclid(2.0 * PI) - PI,
                    z_pred[2] + rng.random_range(-20.0..20.0),
                ]
            })
            .collect();
        let r: Vec<Matrix3<f64>> = (0..n).map(|_| random_spd3(&mut rng)).collect();
        let f: Vec<f64> = (0..n).map(|_| 10f64.powf(rng.random_range(-10.0..-2.0))).collect();
        let weights = association_probabilities(&f, 0.9, rng.random_range(10.0..1000.0), 0.01).unwrap();
        let zs: Vec<MeasVector> = z.iter().map(|v| Vector3::from(*v)).collect();
        for mode in [FusionMode::Normalized, FusionMode::RawWeights] {
            let w: Vec<f64> = match mode {
                FusionMode::Normalized => {
                    let mut total = 0.0;
                    for b in &weights.beta {
                        total += b;
                    }
                    weights.beta.iter().map(|b| b / total).collect()
                }
                FusionMode::RawWeights => weights.beta.clone(),
            };
            let fused = fuse(&zs, &r, &weights, bearing_ref, mode).unwrap();
            let expected = fused_cov_oracle(&z, &r, &w, bearing_ref);
            let scale = expected.iter().flatten().fold(1.0f64, |m, v| m.max(v.abs()));
            for a in 0..3 {
                for b in 0..3 {
                    worst = worst.max((fused.r_fused[(a, b)] - expected[a][b]).abs() / scale);
                }
            }
            let eig = fused.r_fused.symmetric_eigenvalues();
            if eig.min() < -1e-12 * fused.r_fused.trace().abs() {
                all_psd = false;
            }
        }
    }
    outcome(
        worst <= 1e-12 && all_psd,
        format!("max scaled deviation {worst:.2e} over 1000 cases x 2 modes, all PSD: {all_psd}"),
    )
}

fn linear_gaussian_equivalence() -> Outcome {
    let mut rng = rng(4);
    let dt = 1.0;
    let q = 0.5;
    let model = TransitionModel::new(dt, q).unwrap();
    let f = transition_matrix(dt).unwrap();
    let qm = process_noise_cov(dt, q).unwrap();
    let h = Matrix2x4::new(1.0, 0.0, 0.0, 0.0, 0.0, 0.0, 1.0, 0.0);
    let r = Matrix2::new(100.0, 0.0, 0.0, 225.0);
    let p0 = Matrix4::from_diagonal(&nalgebra::Vector4::new(400.0, 4.0, 400.0, 4.0));

    let mut truth = nalgebra::Vector4::new(100.0, 10.0, -200.0, 5.0);
    let mut est = TrackEstimate::new(TargetState::new(120.0, 8.0, -180.0, 6.0), p0, 0);
    let mut kf_x = est.mean.to_vector();
    let mut kf_p = p0;
    let mut j = p0.try_inverse().unwrap();

    let hd = DMatrix::from_column_slice(2, 4, h.as_slice());
    let rd = DMatrix::from_column_slice(2, 2, r.as_slice());
    let mut worst_state: f64 = 0.0;
    let mut worst_bound: f64 = 0.0;
    for _ in 0..50 {
        truth = f * truth + nalgebra::Vector4::from_fn(|_, _| rng.random_range(-1.0..1.0));
        let z = h * truth + Vector2::new(rng.random_range(-10.0..10.0), rng.random_range(-15.0..15.0));

        // library kernel
        let pred = predict(&est, &model);
        let innov = z - h * pred.mean.to_vector();
        let step = kalman_update(
            &DVector::from_column_slice(pred.mean.to_vector().as_slice()),
            &DMatrix::from_column_slice(4, 4, pred.cov.as_slice()),
            &hd,
            &DVector::from_column_slice(innov.as_slice()),
            &rd,
        )
        .unwrap();
        est = TrackEstimate::new(
            TargetState::new(step.mean[0], step.mean[1], step.mean[2], step.mean[3]),
            Matrix4::from_column_slice(step.cov.as_slice()),
            pred.frame,
        );

        // textbook filter with explicit inverses
        let xp = f * kf_x;
        let pp = f * kf_p * f.transpose() + qm;
        let s = h * pp * h.transpose() + r;
        let k = pp * h.transpose() * s.try_inverse().unwrap();
        kf_x = xp + k * (z - h * xp);
        kf_p = (Matrix4::identity() - k * h) * pp;

        j = recurse(&j, &f, &qm, &[(h, r)]).unwrap();
        let b = bound(&j).unwrap();

        let state_dev = (est.mean.to_vector() - kf_x).amax() / kf_x.amax().max(1.0);
        let cov_dev = (est.cov - kf_p).amax() / kf_p.amax();
        worst_state = worst_state.max(state_dev).max(cov_dev);
        worst_bound = worst_bound.max((b - kf_p).amax() / kf_p.amax());
    }
    outcome(
        worst_state <= 1e-10 && worst_bound <= 1e-10,
        format!("max tracker deviation {worst_state:.2e}, max bound deviation {worst_bound:.2e} over 50 frames"),
    )
}

fn fraction<T>(items: &[T], pred: impl Fn(&T) -> bool) -> f64 {
    items.iter().filter(|i| pred(i)).count() as f64 / items.len() as f64
}

fn bound_validity(reference: &Summary, clutter_free: &Summary, elapsed: Duration) -> Outcome {
    let above = fraction(&reference.rows, |r| r.position_rmse >= r.position_bound);
    let within = fraction(&clutter_free.rows, |r| r.position_rmse <= 3.0 * r.position_bound);
    outcome(
        above >= 0.95 && within >= 0.80 && elapsed < Duration::from_secs(60),
        format!(
            "RMSE >= bound on {:.1}% of reference frames, <= 3x bound on {:.1}% of clutter-free frames, {elapsed:.2?}",
            100.0 * above,
            100.0 * within
        ),
    )
}

fn filter_consistency(clutter_free: &Summary) -> Outcome {
    let window: Vec<f64> = clutter_free
        .rows
        .iter()
        .filter(|r| (10..=30).contains(&r.frame))
        .map(|r| r.mean_nees)
        .collect();
    let mean = window.iter().sum::<f64>() / window.len() as f64;
    outcome(
        (3.0..=5.2).contains(&mean),
        format!("mean NEES {mean:.3} over frames 10-30 ({} rows)", window.len()),
    )
}

fn random_scenario(rng: &mut SimRng, base: &Scenario) -> Scenario {
    let mut s = base.clone();
    s.master_seed = rng.random();
    for (i, radar) in s.radars.iter_mut().enumerate() {
        let side = if i % 2 == 0 { -1.0 } else { 1.0 };
        radar.position = [side * rng.random_range(3000.0..8000.0), rng.random_range(-2000.0..2000.0)];
        radar.p_detect = rng.random_range(0.8..=1.0);
        radar.clutter_density = rng.random_range(0.0..0.003);
    }
    for t in &mut s.targets {
        t.initial_state = [
            rng.random_range(-5000.0..5000.0),
            rng.random_range(-15.0..15.0),
            rng.random_range(6000.0..15_000.0),
            rng.random_range(-15.0..15.0),
        ];
        for b in &mut t.beams {
            b.power = rng.random_range(0.5..2.0);
        }
    }
    s
}

fn power_monotonicity() -> Outcome {
    let mut rng = rng(7);
    let base = reference_scenario();
    let mut failures = Vec::new();
    for case in 0..20 {
        let s = random_scenario(&mut rng, &base);
        let doubled = s.with_power_scale(2.0);
        let (a, b) = match (run_once(&s, 0), run_once(&doubled, 0)) {
            (Ok(a), Ok(b)) => (a, b),
            (Err(e), _) | (_, Err(e)) => {
                failures.push(format!("case {case}: {e}"));
                continue;
            }
        };
        let last = s.frame_count;
        for (ra, rb) in a.rows.iter().zip(&b.rows).filter(|(r, _)| r.frame == last) {
            if !(0..4).all(|k| rb.bound_diag[k] < ra.bound_diag[k]) {
                failures.push(format!("case {case} target {}", ra.target));
            }
        }
    }
    outcome(
        failures.is_empty(),
        if failures.is_empty() {
            "every final-frame bound diagonal shrank on 20 scenarios".to_string()
        } else {
            format!("violations: {}", failures.join("; "))
        },
    )
}

fn determinism() -> Outcome {
    let scenario = PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("../../scenarios/reference.toml");
    let dir = tempfile::tempdir().unwrap();
    let mut outputs = Vec::new();
    for name in ["first.csv", "second.csv"] {
        let out = dir.path().join(name);
        let status = Command::new(env!("CARGO_BIN_EXE_pdatrack"))
            .args(["montecarlo", "--runs", "50", "--seed", "77"])
            .arg("--scenario")
            .arg(&scenario)
            .arg("--out")
            .arg(&out)
            .status()
            .unwrap();
        if !status.success() {
            return outcome(false, format!("montecarlo exited with {status}"));
        }
        outputs.push(std::fs::read(&out).unwrap());
    }
    outcome(
        outputs[0] == outputs[1] && !outputs[0].is_empty(),
        format!("two 50-run outputs of {} bytes are identical: {}", outputs[0].len(), outputs[0] == outputs[1]),
    )
}

fn main() {
    let reference = reference_scenario();
    let start = Instant::now();
    let ref_summary = monte_carlo(&reference, 200).expect("reference Monte Carlo");
    let cf_summary = monte_carlo(&reference.clutter_free(), 200).expect("clutter-free Monte Carlo");
    let mc_elapsed = start.elapsed();

    let results = [
        ("1 jacobian", jacobian_vs_finite_differences()),
        ("2 pda normalization", pda_normalization()),
        ("3 fusion oracle", fusion_oracle()),
        ("4 linear-gaussian equivalence", linear_gaussian_equivalence()),
        ("5 bound validity", bound_validity(&ref_summary, &cf_summary, mc_elapsed)),
        ("6 filter consistency", filter_consistency(&cf_summary)),
        ("7 power monotonicity", power_monotonicity()),
        ("8 determinism", determinism()),
    ];
    let mut failed = 0;
    for (name, o) in &results {
        println!("{} {name}: {}", if o.passed { "PASS" } else { "FAIL" }, o.detail);
        if !o.passed {
            failed += 1;
        }
    }
    println!("acceptance: {} passed, {failed} failed", results.len() - failed);
    if failed > 0 {
        std::process::exit(1);
    }
}
