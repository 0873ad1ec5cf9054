//! Ground-truth reachability labels from numerical inverse kinematics.
//!
//! Damped least squares on the geometric Jacobian, restarted from random
//! configurations. A target counts as reachable once a collision-free
//! configuration within joint limits lands within the combined distance
//! threshold (1 mm weighs as much as 1 degree).

use nalgebra::{DMatrix, Isometry3, Matrix6, Rotation3, Vector3, Vector6};
use rand::Rng;

use crate::pose::TcpPose;
use crate::robot::{JointConfig, RobotModel};

/// Error norm below which an attempt has found the target exactly.
const EXACT: f64 = 1e-12;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DistanceWeights {
    /// Millimeters of translation worth one point.
    pub mm_per_point: f64,
    /// Degrees of rotation worth one point.
    pub deg_per_point: f64,
    /// Inclusive acceptance threshold in points.
    pub threshold: f64,
}

impl Default for DistanceWeights {
    fn default() -> Self {
        Self {
            mm_per_point: 1.0,
            deg_per_point: 1.0,
            threshold: 25.0,
        }
    }
}

/// Geodesic angle between two rotations, in radians.
pub fn rotation_angle(a: &Rotation3<f64>, b: &Rotation3<f64>) -> f64 {
    let r = Rotation3::from_matrix_unchecked(a.matrix().transpose() * b.matrix());
    rotation_log(&r).norm()
}

/// Rotation vector (axis times angle) of `r`. Stays accurate near the
/// identity, where an `acos` of the trace would lose half the digits.
pub fn rotation_log(r: &Rotation3<f64>) -> Vector3<f64> {
    let m = r.matrix();
    let vee = 0.5 * Vector3::new(m[(2, 1)] - m[(1, 2)], m[(0, 2)] - m[(2, 0)], m[(1, 0)] - m[(0, 1)]);
    let sin = vee.norm();
    let cos = (m.trace() - 1.0) * 0.5;
    let angle = sin.atan2(cos);
    if angle < 1e-12 {
        vee
    } else if angle < 3.0 {
        vee * (angle / sin)
    } else {
        r.scaled_axis()
    }
}

/// Combined translational + rotational distance in points.
pub fn pose_distance(a: &TcpPose, b: &TcpPose, w: &DistanceWeights) -> f64 {
    let mm = (a.position - b.position).norm() * 1000.0;
    let deg = rotation_angle(&a.rotation, &b.rotation).to_degrees();
    mm / w.mm_per_point + deg / w.deg_per_point
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct IkConfig {
    pub max_attempts: u32,
    pub max_iterations: u32,
    /// Damping factor lambda of the least-squares step.
    pub damping: f64,
    /// An attempt has converged once the applied joint update is smaller
    /// than this (radians).
    pub step_tolerance: f64,
    /// Cap on the joint update norm per iteration (radians).
    pub max_step: f64,
    /// Step halvings tried when an update increases the error.
    pub max_halvings: u32,
    /// An attempt is abandoned when the error dropped by less than
    /// `stall_ratio` (relative) over `stall_window` iterations.
    pub stall_window: u32,
    pub stall_ratio: f64,
    pub weights: DistanceWeights,
}

impl Default for IkConfig {
    fn default() -> Self {
        Self {
            max_attempts: 100,
            max_iterations: 200,
            damping: 0.1,
            step_tolerance: 1e-6,
            max_step: 0.5,
            max_halvings: 5,
            stall_window: 10,
            stall_ratio: 1e-3,
            weights: DistanceWeights::default(),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct IkResult {
    pub reachable: bool,
    pub config: Option<JointConfig>,
    /// Distance of the accepted solution, or the best distance seen.
    pub distance: f64,
    pub attempts_used: u32,
}

/// Error twist `[dp; w]` from `current` to `target`, world frame.
pub fn pose_error(current: &Isometry3<f64>, target: &TcpPose) -> Vector6<f64> {
    let dp = target.position - current.translation.vector;
    let rc = current.rotation.to_rotation_matrix();
    let dw = rotation_log(&(target.rotation * rc.inverse()));
    Vector6::new(dp.x, dp.y, dp.z, dw.x, dw.y, dw.z)
}

fn jacobian_columns(model: &RobotModel, frames: &[Isometry3<f64>], tcp: &Vector3<f64>) -> Vec<Vector6<f64>> {
    model
        .joints()
        .iter()
        .zip(&frames[1..])
        .map(|(joint, frame)| {
            let axis = frame.rotation * joint.axis.into_inner();
            let lin = axis.cross(&(tcp - frame.translation.vector));
            Vector6::new(lin.x, lin.y, lin.z, axis.x, axis.y, axis.z)
        })
        .collect()
}

/// Geometric Jacobian (6 x dof): linear velocity rows first, then angular,
/// both in the world frame.
pub fn jacobian(model: &RobotModel, q: &[f64]) -> DMatrix<f64> {
    let frames = model.link_frames(q);
    let tcp = model.tcp_from_frames(&frames).translation.vector;
    let cols = jacobian_columns(model, &frames, &tcp);
    DMatrix::from_fn(6, cols.len(), |r, c| cols[c][r])
}

fn project(model: &RobotModel, q: &mut [f64]) {
    for (v, j) in q.iter_mut().zip(model.joints()) {
        *v = j.limits.project(*v);
    }
}

/// Labels `target` by damped least squares with random restarts.
pub fn solve_ik<R: Rng + ?Sized>(model: &RobotModel, target: &TcpPose, cfg: &IkConfig, rng: &mut R) -> IkResult {
    let w = &cfg.weights;
    let slack = w.threshold * w.mm_per_point / 1000.0;
    if (target.position - model.shoulder_origin()).norm() > model.reach_bound() + slack {
        return IkResult {
            reachable: false,
            config: None,
            distance: f64::INFINITY,
            attempts_used: 0,
        };
    }

    let lambda_sq = cfg.damping * cfg.damping;
    let mut best = f64::INFINITY;
    let mut history: Vec<f64> = Vec::with_capacity(cfg.max_iterations as usize + 1);

    for attempt in 1..=cfg.max_attempts {
        let mut q = model.sample_config(rng).into_values();
        let mut frames = model.link_frames(&q);
        let mut tcp = model.tcp_from_frames(&frames);
        let mut err_vec = pose_error(&tcp, target);
        let mut err = err_vec.norm();
        history.clear();
        // Closest valid iterate within the threshold seen in this attempt.
        let mut witness: Option<(f64, Vec<f64>)> = None;
        let mut converged = false;

        loop {
            let d = pose_distance(&TcpPose::from_isometry(&tcp), target, w);
            best = best.min(d);
            if d <= w.threshold && witness.as_ref().is_none_or(|(wd, _)| d < *wd) && model.frames_valid(&frames) {
                witness = Some((d, q.clone()));
            }
            if converged || history.len() as u32 == cfg.max_iterations || err < EXACT {
                break;
            }
            history.push(err);
            let n = history.len();
            let sw = cfg.stall_window as usize;
            if sw > 0 && n > sw && history[n - 1 - sw] - err < cfg.stall_ratio * history[n - 1 - sw] {
                break;
            }

            let cols = jacobian_columns(model, &frames, &tcp.translation.vector);
            let mut a = Matrix6::from_diagonal_element(lambda_sq);
            for c in &cols {
                a += c * c.transpose();
            }
            let Some(chol) = a.cholesky() else { break };
            let y = chol.solve(&err_vec);
            let mut dq: Vec<f64> = cols.iter().map(|c| c.dot(&y)).collect();
            let norm = dq.iter().map(|v| v * v).sum::<f64>().sqrt();
            if norm > cfg.max_step {
                let s = cfg.max_step / norm;
                dq.iter_mut().for_each(|v| *v *= s);
            }

            let mut scale = 1.0;
            let mut accepted = None;
            for _ in 0..=cfg.max_halvings {
                let mut q_new: Vec<f64> = q.iter().zip(&dq).map(|(a, b)| a + scale * b).collect();
                project(model, &mut q_new);
                let frames_new = model.link_frames(&q_new);
                let tcp_new = model.tcp_from_frames(&frames_new);
                let e_new = pose_error(&tcp_new, target);
                if e_new.norm() < err {
                    accepted = Some((q_new, frames_new, tcp_new, e_new));
                    break;
                }
                scale *= 0.5;
            }
            let Some((q_new, frames_new, tcp_new, e_new)) = accepted else {
                break;
            };
            // Projection may wrap continuous joints by 2 pi; the applied
            // update is what was asked for, or less if clamped.
            let step = q
                .iter()
                .zip(&q_new)
                .map(|(a, b)| {
                    let d = b - a;
                    d * d
                })
                .sum::<f64>()
                .sqrt()
                .min(scale * norm.min(cfg.max_step));
            q = q_new;
            frames = frames_new;
            tcp = tcp_new;
            err_vec = e_new;
            err = err_vec.norm();
            converged = step < cfg.step_tolerance;
        }

        if let Some((d, q)) = witness {
            return IkResult {
                reachable: true,
                config: Some(JointConfig::from_values_unchecked(q)),
                distance: d,
                attempts_used: attempt,
            };
        }
    }

    IkResult {
        reachable: false,
        config: None,
        distance: best,
        attempts_used: cfg.max_attempts,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::robots;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn random_rotation(rng: &mut ChaCha8Rng) -> Rotation3<f64> {
        let axis = Vector3::new(
            rng.random_range(-1.0..1.0),
            rng.random_range(-1.0..1.0),
            rng.random_range(-1.0..1.0),
        );
        Rotation3::new(axis.normalize() * rng.random_range(0.0..3.1))
    }

    #[test]
    fn distance_examples() {
        let w = DistanceWeights::default();
        let a = TcpPose::from_approach(Vector3::new(0.1, 0.2, 0.9), Vector3::new(0.3, 0.2, 0.1));
        assert_eq!(pose_distance(&a, &a, &w), 0.0);

        let b = TcpPose::from_parts(a.rotation, a.position + Vector3::new(0.0, 0.010, 0.0));
        assert!((pose_distance(&a, &b, &w) - 10.0).abs() < 1e-9);

        let c = b.rolled(15f64.to_radians());
        assert!((pose_distance(&a, &c, &w) - 25.0).abs() < 1e-9);
    }

    #[test]
    fn rotation_angle_matches_known_angles() {
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        for _ in 0..1000 {
            let r = random_rotation(&mut rng);
            let angle = rng.random_range(0.0..std::f64::consts::PI);
            let axis = Vector3::new(rng.random_range(-1.0..1.0), 0.3, rng.random_range(-1.0..1.0)).normalize();
            let s = r * Rotation3::new(axis * angle);
            assert!((rotation_angle(&r, &s) - angle).abs() < 1e-9);
        }
    }

    #[test]
    fn distance_is_pseudometric() {
        let w = DistanceWeights::default();
        let mut rng = ChaCha8Rng::seed_from_u64(12);
        let pose = |rng: &mut ChaCha8Rng| {
            TcpPose::from_parts(
                random_rotation(rng),
                Vector3::new(
                    rng.random_range(-1.0..1.0),
                    rng.random_range(-1.0..1.0),
                    rng.random_range(0.0..1.0),
                ),
            )
        };
        for _ in 0..10_000 {
            let (a, b, c) = (pose(&mut rng), pose(&mut rng), pose(&mut rng));
            let ab = pose_distance(&a, &b, &w);
            assert!(ab >= 0.0);
            assert!((ab - pose_distance(&b, &a, &w)).abs() < 1e-9);
            assert!(pose_distance(&a, &c, &w) <= ab + pose_distance(&b, &c, &w) + 1e-9);
        }
    }

    fn finite_difference_jacobian(model: &RobotModel, q: &[f64], h: f64) -> DMatrix<f64> {
        let mut j = DMatrix::zeros(6, q.len());
        for k in 0..q.len() {
            let mut qp = q.to_vec();
            let mut qm = q.to_vec();
            qp[k] += h;
            qm[k] -= h;
            let (tp, tm) = (model.fk(&qp), model.fk(&qm));
            let lin = (tp.position - tm.position) / (2.0 * h);
            let ang = rotation_log(&(tp.rotation * tm.rotation.inverse())) / (2.0 * h);
            for r in 0..3 {
                j[(r, k)] = lin[r];
                j[(r + 3, k)] = ang[r];
            }
        }
        j
    }

    #[test]
    fn analytic_jacobian_matches_finite_differences() {
        let mut rng = ChaCha8Rng::seed_from_u64(21);
        for model in [robots::panda(), robots::ur5e(), robots::ideal6()] {
            for _ in 0..50 {
                let q = model.sample_config(&mut rng);
                let ja = jacobian(&model, q.values());
                let jf = finite_difference_jacobian(&model, q.values(), 1e-6);
                let diff = (&ja - &jf).amax();
                assert!(diff < 1e-5, "{}: {diff}", model.name());
            }
        }
    }

    #[test]
    fn far_target_is_unreachable() {
        let model = robots::ideal6();
        let target = TcpPose::from_translation(2.0 * model.reach_bound(), 0.0, 0.3);
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        let res = solve_ik(&model, &target, &IkConfig::default(), &mut rng);
        assert!(!res.reachable);
        assert!(res.config.is_none());
    }

    #[test]
    fn fk_targets_are_found_and_reverify() {
        let model = robots::ideal6();
        let cfg = IkConfig::default();
        let mut rng = ChaCha8Rng::seed_from_u64(77);
        let mut found = 0;
        let trials = 60;
        for _ in 0..trials {
            let q = loop {
                let q = model.sample_config(&mut rng);
                if model.is_valid(&q) {
                    break q;
                }
            };
            let target = model.forward_kinematics(&q).unwrap();
            let res = solve_ik(&model, &target, &cfg, &mut rng);
            if res.reachable {
                found += 1;
                let sol = res.config.unwrap();
                let checked = JointConfig::new(&model, sol.values().to_vec()).unwrap();
                assert!(model.is_valid(&checked));
                let reached = model.forward_kinematics(&checked).unwrap();
                assert!(pose_distance(&reached, &target, &cfg.weights) <= 25.0);
            }
        }
        assert!(found >= trials - 1, "found {found} of {trials}");
    }

    #[test]
    fn deterministic_under_seed() {
        let model = robots::panda();
        let target = TcpPose::from_approach(Vector3::new(0.2, 0.1, -1.0), Vector3::new(0.5, 0.1, 0.4));
        let run = || solve_ik(&model, &target, &IkConfig::default(), &mut ChaCha8Rng::seed_from_u64(5));
        assert_eq!(run(), run());
    }
}
