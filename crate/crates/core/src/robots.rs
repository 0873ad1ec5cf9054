//! Robot descriptions shipped with the crate.

use std::path::Path;

use crate::error::{Error, Result};
use crate::robot::{parse_robot, RobotModel};

const UR5E: &str = include_str!("../robots/ur5e.json");
const PANDA: &str = include_str!("../robots/panda.json");
const IDEAL6: &str = include_str!("../robots/ideal6.json");

/// Names accepted by [`builtin`].
pub const BUILTIN_NAMES: [&str; 3] = ["ur5e", "panda", "ideal6"];

pub fn builtin(name: &str) -> Option<RobotModel> {
    let text = match name {
        "ur5e" => UR5E,
        "panda" => PANDA,
        "ideal6" => IDEAL6,
        _ => return None,
    };
    Some(parse_robot(text).expect("bundled description parses"))
}

/// Universal Robots UR5e (6 revolute joints, ±360°).
pub fn ur5e() -> RobotModel {
    builtin("ur5e").unwrap()
}

/// Franka Emika Panda (7 revolute joints, asymmetric limits).
pub fn panda() -> RobotModel {
    builtin("panda").unwrap()
}

/// Compact 6-joint arm with unlimited first and last joint.
pub fn ideal6() -> RobotModel {
    builtin("ideal6").unwrap()
}

/// Resolves a builtin name, or else reads a description file.
pub fn load(name_or_path: &str) -> Result<RobotModel> {
    if let Some(m) = builtin(name_or_path) {
        return Ok(m);
    }
    let path = Path::new(name_or_path);
    if !path.exists() {
        return Err(Error::Robot(format!(
            "`{name_or_path}` is neither a builtin robot ({}) nor a file",
            BUILTIN_NAMES.join(", ")
        )));
    }
    parse_robot(&std::fs::read_to_string(path)?)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::robot::JointConfig;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;
    use std::f64::consts::PI;

    #[test]
    fn builtins_parse() {
        assert_eq!(ur5e().dof(), 6);
        assert_eq!(panda().dof(), 7);
        assert_eq!(ideal6().dof(), 6);
        assert!(builtin("kuka").is_none());
    }

    #[test]
    fn panda_ready_pose_is_valid() {
        let m = panda();
        let q = JointConfig::new(&m, vec![0.0, -PI / 4.0, 0.0, -3.0 * PI / 4.0, 0.0, PI / 2.0, PI / 4.0]).unwrap();
        assert!(m.is_valid(&q));
        let tcp = m.forward_kinematics(&q).unwrap();
        // Known TCP of the ready pose with the default hand offset.
        assert!(
            (tcp.position - nalgebra::Vector3::new(0.307, 0.0, 0.487)).norm() < 2e-3,
            "{tcp:?}"
        );
        assert!(tcp.approach().z < -0.999);
    }

    #[test]
    fn ur5e_zero_pose() {
        let m = ur5e();
        let tcp = m.fk(&[0.0; 6]);
        // Stretched along -x at shoulder height minus the wrist offsets.
        let expected = nalgebra::Vector3::new(-0.8172, -0.2329, 0.0628);
        assert!((tcp.position - expected).norm() < 1e-9, "{tcp:?}");
    }

    #[test]
    fn sampled_configs_stay_inside_reach() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        for m in [ur5e(), panda(), ideal6()] {
            let mut valid = 0;
            for _ in 0..200_000 {
                let q = m.sample_config(&mut rng);
                if let Some(t) = m.valid_tcp(q.values()) {
                    valid += 1;
                    assert!(t.position.x.hypot(t.position.y) <= m.reach_xy(), "{}", m.name());
                    assert!(t.position.z >= 0.0 && t.position.z <= m.reach_z(), "{}", m.name());
                }
            }
            assert!(valid > 20_000, "{}: {valid}", m.name());
        }
    }
}
