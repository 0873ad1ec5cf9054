//! Serial-chain robot models: description parsing, forward kinematics,
//! configuration sampling and a sphere-based validity check.

use std::f64::consts::PI;

use nalgebra::{Isometry3, Translation3, Unit, UnitQuaternion, Vector3};
use rand::Rng;
use serde::Deserialize;

use crate::error::{Error, Result};
use crate::pose::{rotation_from_rpy, TcpPose};

/// Cell size used to round up reach values that a description leaves out.
pub const DEFAULT_CELL_SIZE: f64 = 0.05;

const AXIS_NORM_TOL: f64 = 1e-9;

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum JointLimits {
    Bounded { lower: f64, upper: f64 },
    Continuous,
}

impl JointLimits {
    pub fn symmetric_deg(range_deg: f64) -> Self {
        let r = range_deg.to_radians();
        JointLimits::Bounded { lower: -r, upper: r }
    }

    pub fn contains(&self, value: f64) -> bool {
        match *self {
            JointLimits::Bounded { lower, upper } => value >= lower && value <= upper,
            JointLimits::Continuous => value.is_finite(),
        }
    }

    /// Clamp bounded joints into range; wrap continuous joints into `[-pi, pi)`.
    pub fn project(&self, value: f64) -> f64 {
        match *self {
            JointLimits::Bounded { lower, upper } => value.clamp(lower, upper),
            JointLimits::Continuous => wrap_angle(value),
        }
    }

    /// Maps `u` in `[0, 1)` onto the joint interval.
    #[inline]
    pub fn from_unit(&self, u: f64) -> f64 {
        match *self {
            JointLimits::Bounded { lower, upper } => lower + u * (upper - lower),
            JointLimits::Continuous => -PI + u * 2.0 * PI,
        }
    }
}

/// Wraps an angle into `[-pi, pi)`.
pub fn wrap_angle(a: f64) -> f64 {
    let w = (a + PI).rem_euclid(2.0 * PI) - PI;
    if w >= PI {
        -PI
    } else {
        w
    }
}

/// A revolute joint. `origin` places the joint frame in its parent link frame.
#[derive(Debug, Clone, PartialEq)]
pub struct Joint {
    pub name: String,
    pub origin: Isometry3<f64>,
    pub axis: Unit<Vector3<f64>>,
    pub limits: JointLimits,
}

/// Collision sphere attached to a link. Link 0 is the fixed base; link `i`
/// (1-based) moves with joint `i`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CollisionSphere {
    pub link: usize,
    pub center: Vector3<f64>,
    pub radius: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct RobotModel {
    name: String,
    joints: Vec<Joint>,
    tcp_offset: Isometry3<f64>,
    reach_xy: f64,
    reach_z: f64,
    collision_spheres: Vec<CollisionSphere>,
    // sphere index pairs on non-adjacent links
    collision_pairs: Vec<(usize, usize)>,
}

impl RobotModel {
    pub fn new(
        name: impl Into<String>,
        joints: Vec<Joint>,
        tcp_offset: Isometry3<f64>,
        reach_xy: f64,
        reach_z: f64,
        collision_spheres: Vec<CollisionSphere>,
    ) -> Result<Self> {
        let name = name.into();
        if joints.is_empty() {
            return Err(Error::Robot("a robot needs at least one joint".into()));
        }
        for j in &joints {
            if ((j.axis.norm()) - 1.0).abs() > AXIS_NORM_TOL {
                return Err(Error::Robot(format!("joint `{}` has a non-unit axis", j.name)));
            }
            if let JointLimits::Bounded { lower, upper } = j.limits {
                if !(lower.is_finite() && upper.is_finite()) || lower > upper {
                    return Err(Error::Robot(format!(
                        "joint `{}` has inverted or non-finite limits [{lower}, {upper}]",
                        j.name
                    )));
                }
            }
        }
        if !(reach_xy > 0.0 && reach_z > 0.0) {
            return Err(Error::Robot(format!(
                "reach must be positive (reach_xy = {reach_xy}, reach_z = {reach_z})"
            )));
        }
        for s in &collision_spheres {
            if s.link > joints.len() {
                return Err(Error::Robot(format!(
                    "collision sphere on link {} but the chain has {} links",
                    s.link,
                    joints.len()
                )));
            }
            if s.radius.is_nan() || s.radius <= 0.0 {
                return Err(Error::Robot(format!(
                    "collision sphere radius {} must be positive",
                    s.radius
                )));
            }
        }

        let mut collision_pairs = Vec::new();
        for a in 0..collision_spheres.len() {
            for b in (a + 1)..collision_spheres.len() {
                if collision_spheres[a].link.abs_diff(collision_spheres[b].link) >= 2 {
                    collision_pairs.push((a, b));
                }
            }
        }

        Ok(Self {
            name,
            joints,
            tcp_offset,
            reach_xy,
            reach_z,
            collision_spheres,
            collision_pairs,
        })
    }

    pub fn name(&self) -> &str {
        &self.name
    }

    pub fn joints(&self) -> &[Joint] {
        &self.joints
    }

    pub fn dof(&self) -> usize {
        self.joints.len()
    }

    pub fn tcp_offset(&self) -> &Isometry3<f64> {
        &self.tcp_offset
    }

    /// Maximum horizontal reach `r_xy` in meters.
    pub fn reach_xy(&self) -> f64 {
        self.reach_xy
    }

    /// Maximum vertical reach `r_z` in meters.
    pub fn reach_z(&self) -> f64 {
        self.reach_z
    }

    pub fn collision_spheres(&self) -> &[CollisionSphere] {
        &self.collision_spheres
    }

    /// Upper bound on the distance between the first joint's origin and the
    /// TCP, over all configurations.
    pub fn reach_bound(&self) -> f64 {
        self.joints[1..]
            .iter()
            .map(|j| j.origin.translation.vector.norm())
            .sum::<f64>()
            + self.tcp_offset.translation.vector.norm()
    }

    /// World position of the first joint's origin (fixed).
    pub fn shoulder_origin(&self) -> Vector3<f64> {
        self.joints[0].origin.translation.vector
    }

    /// Copy of the model with the first and last joint limited to
    /// `±range_deg`.
    pub fn with_first_last_limits(&self, range_deg: f64) -> Result<RobotModel> {
        if !(range_deg > 0.0 && range_deg.is_finite()) {
            return Err(Error::Robot(format!("joint range ±{range_deg}° must be positive")));
        }
        let mut joints = self.joints.clone();
        let last = joints.len() - 1;
        joints[0].limits = JointLimits::symmetric_deg(range_deg);
        joints[last].limits = JointLimits::symmetric_deg(range_deg);
        RobotModel::new(
            self.name.clone(),
            joints,
            self.tcp_offset,
            self.reach_xy,
            self.reach_z,
            self.collision_spheres.clone(),
        )
    }

    /// Link frames in world coordinates: index 0 is the base, index `i` the
    /// frame of joint `i` after applying its rotation.
    pub fn link_frames(&self, q: &[f64]) -> Vec<Isometry3<f64>> {
        debug_assert_eq!(q.len(), self.joints.len());
        let mut frames = Vec::with_capacity(self.joints.len() + 1);
        let mut current = Isometry3::identity();
        frames.push(current);
        for (joint, &angle) in self.joints.iter().zip(q) {
            current = current * joint.origin * joint_rotation(&joint.axis, angle);
            frames.push(current);
        }
        frames
    }

    /// TCP frame given the link frames from [`RobotModel::link_frames`].
    pub fn tcp_from_frames(&self, frames: &[Isometry3<f64>]) -> Isometry3<f64> {
        frames[frames.len() - 1] * self.tcp_offset
    }

    /// Forward kinematics without limit checks.
    pub fn fk(&self, q: &[f64]) -> TcpPose {
        let mut current = Isometry3::identity();
        for (joint, &angle) in self.joints.iter().zip(q) {
            current = current * joint.origin * joint_rotation(&joint.axis, angle);
        }
        TcpPose::from_isometry(&(current * self.tcp_offset))
    }

    pub fn forward_kinematics(&self, q: &JointConfig) -> Result<TcpPose> {
        self.check_dims(q.values.len())?;
        Ok(self.fk(&q.values))
    }

    /// Uniform sample over the joint limits; continuous joints use `[-pi, pi)`.
    pub fn sample_config<R: Rng + ?Sized>(&self, rng: &mut R) -> JointConfig {
        JointConfig {
            values: self
                .joints
                .iter()
                .map(|j| j.limits.from_unit(rng.random::<f64>()))
                .collect(),
        }
    }

    pub fn is_valid(&self, q: &JointConfig) -> bool {
        if q.values.len() != self.joints.len() {
            return false;
        }
        self.frames_valid(&self.link_frames(&q.values))
    }

    /// Ground-plane and self-collision check on precomputed link frames.
    pub fn frames_valid(&self, frames: &[Isometry3<f64>]) -> bool {
        if self.collision_spheres.is_empty() {
            return true;
        }
        let mut centers = [Vector3::zeros(); 64];
        let centers: &mut [Vector3<f64>] = if self.collision_spheres.len() <= 64 {
            &mut centers[..self.collision_spheres.len()]
        } else {
            return self.frames_valid_slow(frames);
        };
        for (c, s) in centers.iter_mut().zip(&self.collision_spheres) {
            *c = frames[s.link].transform_point(&s.center.into()).coords;
            if s.link > 0 && c.z < s.radius {
                return false;
            }
        }
        self.collision_pairs.iter().all(|&(a, b)| {
            let r = self.collision_spheres[a].radius + self.collision_spheres[b].radius;
            (centers[a] - centers[b]).norm_squared() >= r * r
        })
    }

    fn frames_valid_slow(&self, frames: &[Isometry3<f64>]) -> bool {
        let centers: Vec<Vector3<f64>> = self
            .collision_spheres
            .iter()
            .map(|s| frames[s.link].transform_point(&s.center.into()).coords)
            .collect();
        if centers
            .iter()
            .zip(&self.collision_spheres)
            .any(|(c, s)| s.link > 0 && c.z < s.radius)
        {
            return false;
        }
        self.collision_pairs.iter().all(|&(a, b)| {
            let r = self.collision_spheres[a].radius + self.collision_spheres[b].radius;
            (centers[a] - centers[b]).norm_squared() >= r * r
        })
    }

    /// FK plus validity in one pass: the TCP pose if `q` is collision-free.
    pub fn valid_tcp(&self, q: &[f64]) -> Option<TcpPose> {
        let frames = self.link_frames(q);
        if self.frames_valid(&frames) {
            Some(TcpPose::from_isometry(&self.tcp_from_frames(&frames)))
        } else {
            None
        }
    }

    fn check_dims(&self, got: usize) -> Result<()> {
        if got != self.joints.len() {
            return Err(Error::DimensionMismatch {
                expected: self.joints.len(),
                got,
            });
        }
        Ok(())
    }
}

#[inline]
fn joint_rotation(axis: &Unit<Vector3<f64>>, angle: f64) -> UnitQuaternion<f64> {
    UnitQuaternion::from_axis_angle(axis, angle)
}

/// Joint values in radians, one per joint.
#[derive(Debug, Clone, PartialEq)]
pub struct JointConfig {
    values: Vec<f64>,
}

impl JointConfig {
    pub fn new(model: &RobotModel, values: Vec<f64>) -> Result<Self> {
        model.check_dims(values.len())?;
        for (j, &v) in model.joints.iter().zip(&values) {
            if !j.limits.contains(v) {
                let (lower, upper) = match j.limits {
                    JointLimits::Bounded { lower, upper } => (lower, upper),
                    JointLimits::Continuous => (f64::NEG_INFINITY, f64::INFINITY),
                };
                return Err(Error::JointLimit {
                    joint: j.name.clone(),
                    value: v,
                    lower,
                    upper,
                });
            }
        }
        Ok(Self { values })
    }

    pub(crate) fn from_values_unchecked(values: Vec<f64>) -> Self {
        Self { values }
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn into_values(self) -> Vec<f64> {
        self.values
    }
}

// --- description format ---------------------------------------------------

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct RobotDoc {
    name: String,
    joints: Vec<JointDoc>,
    #[serde(default)]
    tcp_offset: FrameDoc,
    reach_xy_m: Option<f64>,
    reach_z_m: Option<f64>,
    #[serde(default)]
    collision_spheres: Vec<SphereDoc>,
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct JointDoc {
    name: String,
    #[serde(default)]
    origin_xyz: [f64; 3],
    #[serde(default)]
    origin_rpy: [f64; 3],
    axis: [f64; 3],
    limit_lower_deg: Option<f64>,
    limit_upper_deg: Option<f64>,
    limit: Option<String>,
}

#[derive(Deserialize, Default)]
#[serde(deny_unknown_fields)]
struct FrameDoc {
    #[serde(default)]
    xyz: [f64; 3],
    #[serde(default)]
    rpy: [f64; 3],
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct SphereDoc {
    link: usize,
    center: [f64; 3],
    radius: f64,
}

fn frame(xyz: [f64; 3], rpy_deg: [f64; 3]) -> Isometry3<f64> {
    let r = rotation_from_rpy(
        rpy_deg[0].to_radians(),
        rpy_deg[1].to_radians(),
        rpy_deg[2].to_radians(),
    );
    Isometry3::from_parts(
        Translation3::new(xyz[0], xyz[1], xyz[2]),
        UnitQuaternion::from_rotation_matrix(&r),
    )
}

/// Rounds `v` up to the next multiple of `step`, tolerating float noise.
pub(crate) fn round_up_to(v: f64, step: f64) -> f64 {
    ((v / step) - 1e-9).ceil().max(1.0) * step
}

/// Parses a robot description document (JSON). Angles are in degrees.
pub fn parse_robot(text: &str) -> Result<RobotModel> {
    let doc: RobotDoc = serde_json::from_str(text).map_err(|e| {
        use serde_json::error::Category;
        match e.classify() {
            Category::Syntax | Category::Eof => Error::Syntax {
                line: e.line(),
                column: e.column(),
                message: e.to_string(),
            },
            _ => Error::Robot(e.to_string()),
        }
    })?;

    let mut joints = Vec::with_capacity(doc.joints.len());
    for jd in doc.joints {
        let axis = Vector3::from(jd.axis);
        if (axis.norm() - 1.0).abs() > AXIS_NORM_TOL {
            return Err(Error::Robot(format!(
                "joint `{}`: axis {:?} is not a unit vector",
                jd.name, jd.axis
            )));
        }
        let limits = match (jd.limit.as_deref(), jd.limit_lower_deg, jd.limit_upper_deg) {
            (Some("continuous"), None, None) => JointLimits::Continuous,
            (Some(other), _, _) => {
                return Err(Error::Robot(format!(
                    "joint `{}`: `limit` must be \"continuous\" without numeric limits, got {other:?}",
                    jd.name
                )))
            }
            (None, Some(lo), Some(hi)) => {
                if lo > hi {
                    return Err(Error::Robot(format!(
                        "joint `{}`: inverted limits [{lo}, {hi}]",
                        jd.name
                    )));
                }
                JointLimits::Bounded {
                    lower: lo.to_radians(),
                    upper: hi.to_radians(),
                }
            }
            (None, _, _) => {
                return Err(Error::Robot(format!(
                    "joint `{}`: needs limit_lower_deg and limit_upper_deg, or \"limit\": \"continuous\"",
                    jd.name
                )))
            }
        };
        joints.push(Joint {
            name: jd.name,
            origin: frame(jd.origin_xyz, jd.origin_rpy),
            axis: Unit::new_unchecked(axis),
            limits,
        });
    }
    if joints.is_empty() {
        return Err(Error::Robot("`joints` is empty".into()));
    }

    let tcp_offset = frame(doc.tcp_offset.xyz, doc.tcp_offset.rpy);
    let link_sum: f64 =
        joints.iter().map(|j| j.origin.translation.vector.norm()).sum::<f64>() + tcp_offset.translation.vector.norm();
    let default_reach = round_up_to(link_sum, DEFAULT_CELL_SIZE);

    let spheres = doc
        .collision_spheres
        .into_iter()
        .map(|s| CollisionSphere {
            link: s.link,
            center: Vector3::from(s.center),
            radius: s.radius,
        })
        .collect();

    RobotModel::new(
        doc.name,
        joints,
        tcp_offset,
        doc.reach_xy_m.unwrap_or(default_reach),
        doc.reach_z_m.unwrap_or(default_reach),
        spheres,
    )
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;
    use std::f64::consts::FRAC_PI_2;

    const SINGLE: &str = r#"{
        "name": "single",
        "joints": [
            {"name": "j1", "axis": [0, 0, 1], "limit": "continuous"}
        ],
        "tcp_offset": {"xyz": [1, 0, 0]}
    }"#;

    #[test]
    fn single_link_arm() {
        let m = parse_robot(SINGLE).unwrap();
        assert_eq!(m.dof(), 1);
        assert!((m.reach_xy() - 1.0).abs() < 1e-12);
        let p = m.fk(&[0.0]);
        assert!((p.position - Vector3::new(1.0, 0.0, 0.0)).norm() < 1e-12);
        assert!((p.approach() - Vector3::z()).norm() < 1e-12);
        let p = m.fk(&[FRAC_PI_2]);
        assert!((p.position - Vector3::new(0.0, 1.0, 0.0)).norm() < 1e-12);
    }

    #[test]
    fn syntax_error_reports_line() {
        let text = "{\n  \"name\": \"x\",\n  \"joints\": [\n    {\"name\": \"j\",, }\n  ]\n}";
        match parse_robot(text) {
            Err(Error::Syntax { line, .. }) => assert_eq!(line, 4),
            other => panic!("expected syntax error, got {other:?}"),
        }
    }

    #[test]
    fn semantic_errors() {
        let missing_axis = r#"{"name": "x", "joints": [{"name": "j", "limit": "continuous"}]}"#;
        assert!(matches!(parse_robot(missing_axis), Err(Error::Robot(_))));

        let non_unit = r#"{"name": "x", "joints": [{"name": "j", "axis": [0, 0, 2], "limit": "continuous"}]}"#;
        assert!(matches!(parse_robot(non_unit), Err(Error::Robot(_))));

        let inverted = r#"{"name": "x", "joints": [{"name": "j", "axis": [0, 0, 1],
            "limit_lower_deg": 10, "limit_upper_deg": -10}]}"#;
        assert!(matches!(parse_robot(inverted), Err(Error::Robot(_))));

        let half = r#"{"name": "x", "joints": [{"name": "j", "axis": [0, 0, 1], "limit_lower_deg": 10}]}"#;
        assert!(matches!(parse_robot(half), Err(Error::Robot(_))));
    }

    #[test]
    fn collapsed_interval_samples_constant() {
        let text = r#"{"name": "x", "joints": [{"name": "j", "axis": [0, 0, 1],
            "limit_lower_deg": 17.188733853924695, "limit_upper_deg": 17.188733853924695}],
            "tcp_offset": {"xyz": [0.5, 0, 0]}}"#;
        let m = parse_robot(text).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        for _ in 0..100 {
            let q = m.sample_config(&mut rng);
            assert!((q.values()[0] - 0.3).abs() < 1e-12);
        }
    }

    #[test]
    fn sampling_is_deterministic() {
        let m = parse_robot(SINGLE).unwrap();
        let draw = |seed| {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            (0..50)
                .map(|_| m.sample_config(&mut rng).values()[0])
                .collect::<Vec<_>>()
        };
        assert_eq!(draw(7), draw(7));
        assert_ne!(draw(7), draw(8));
    }

    #[test]
    fn continuous_sampling_range() {
        let m = parse_robot(SINGLE).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        for _ in 0..10_000 {
            let v = m.sample_config(&mut rng).values()[0];
            assert!((-PI..PI).contains(&v));
        }
    }

    #[test]
    fn uniform_sample_mean() {
        let text = r#"{"name": "x", "joints": [{"name": "j", "axis": [0, 0, 1],
            "limit_lower_deg": -57.29577951308232, "limit_upper_deg": 57.29577951308232}],
            "tcp_offset": {"xyz": [0.5, 0, 0]}}"#;
        let m = parse_robot(text).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        let n = 1_000_000;
        let mean = (0..n).map(|_| m.sample_config(&mut rng).values()[0]).sum::<f64>() / n as f64;
        let sigma = 1.0 / (3.0 * n as f64).sqrt();
        assert!(mean.abs() < 3.0 * sigma, "mean {mean} sigma {sigma}");
    }

    #[test]
    fn config_rejects_out_of_limits() {
        let text = r#"{"name": "x", "joints": [{"name": "j", "axis": [0, 0, 1],
            "limit_lower_deg": -90, "limit_upper_deg": 90}], "tcp_offset": {"xyz": [0.5, 0, 0]}}"#;
        let m = parse_robot(text).unwrap();
        assert!(JointConfig::new(&m, vec![0.5]).is_ok());
        assert!(matches!(JointConfig::new(&m, vec![2.0]), Err(Error::JointLimit { .. })));
        assert!(matches!(
            JointConfig::new(&m, vec![0.0, 0.0]),
            Err(Error::DimensionMismatch { .. })
        ));
    }

    #[test]
    fn wrap_angle_range() {
        for a in [-10.0, -PI, -1.0, 0.0, 1.0, PI, 7.5, 3.0 * PI] {
            let w = wrap_angle(a);
            assert!((-PI..PI).contains(&w), "{a} -> {w}");
            assert!(((a - w) / (2.0 * PI)).fract().abs() < 1e-9 || ((a - w) / (2.0 * PI)).fract().abs() > 1.0 - 1e-9);
        }
    }

    fn stick_arm() -> RobotModel {
        // four vertical-ish links along z, each 0.3 m, with a sphere per link.
        let text = r#"{
            "name": "stick",
            "joints": [
                {"name": "j1", "axis": [0, 0, 1], "limit": "continuous"},
                {"name": "j2", "origin_xyz": [0, 0, 0.3], "axis": [0, 1, 0], "limit": "continuous"},
                {"name": "j3", "origin_xyz": [0, 0, 0.3], "axis": [0, 1, 0], "limit": "continuous"},
                {"name": "j4", "origin_xyz": [0, 0, 0.3], "axis": [0, 1, 0], "limit": "continuous"}
            ],
            "tcp_offset": {"xyz": [0, 0, 0.3]},
            "collision_spheres": [
                {"link": 1, "center": [0, 0, 0.15], "radius": 0.05},
                {"link": 2, "center": [0, 0, 0.15], "radius": 0.05},
                {"link": 3, "center": [0, 0, 0.15], "radius": 0.05},
                {"link": 4, "center": [0, 0, 0.15], "radius": 0.05}
            ]
        }"#;
        parse_robot(text).unwrap()
    }

    #[test]
    fn validity_cases() {
        let m = stick_arm();
        let upright = JointConfig::new(&m, vec![0.0; 4]).unwrap();
        assert!(m.is_valid(&upright));

        // Bend the shoulder down so the TCP sphere ends up below the ground:
        // link 2 horizontal at z = 0.3, links 3-4 pointing down.
        let down = JointConfig::new(&m, vec![0.0, FRAC_PI_2, FRAC_PI_2, 0.0]).unwrap();
        let tcp = m.forward_kinematics(&down).unwrap();
        assert!(tcp.position.z < 0.0);
        assert!(!m.is_valid(&down));

        // Fold link 4 back onto link 1: j2 = 0, j3 = pi (link 3 points down
        // from z=0.6 to 0.3), j4 = 0 continues down. Link 4 sphere at
        // z = 0.3 - 0.15 = 0.15 coincides with link 1's sphere at z = 0.15.
        let folded = JointConfig::new(&m, vec![0.0, 0.0, PI - 1e-12, 0.0]).unwrap();
        let frames = m.link_frames(folded.values());
        let c1 = frames[1].transform_point(&Vector3::new(0.0, 0.0, 0.15).into());
        let c4 = frames[4].transform_point(&Vector3::new(0.0, 0.0, 0.15).into());
        assert!((c1 - c4).norm() < 0.1);
        assert!(!m.is_valid(&folded));

        // deterministic
        assert_eq!(m.is_valid(&folded), m.is_valid(&folded));
    }

    #[test]
    fn limit_ablation_rewrites_first_and_last() {
        let m = stick_arm().with_first_last_limits(150.0).unwrap();
        assert_eq!(m.joints()[0].limits, JointLimits::symmetric_deg(150.0));
        assert_eq!(m.joints()[3].limits, JointLimits::symmetric_deg(150.0));
        assert_eq!(m.joints()[1].limits, JointLimits::Continuous);
    }
}
