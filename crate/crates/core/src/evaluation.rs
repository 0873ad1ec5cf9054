//! Evaluation poses, ground-truth labelling and confusion metrics.

use std::f64::consts::TAU;
use std::fmt::Write as _;
use std::io::{BufRead, BufReader, Read, Write};
use std::path::Path;

use nalgebra::{Quaternion, Rotation3, UnitQuaternion, Vector3};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::ik::{solve_ik, IkConfig};
use crate::map::ReachabilityMap;
use crate::pose::TcpPose;
use crate::robot::RobotModel;

/// Upright cylinder centred on the base axis, from `z = 0` to `height`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Cylinder {
    pub radius: f64,
    pub height: f64,
}

impl Cylinder {
    /// The cylinder covered by a robot's reach.
    pub fn of_robot(model: &RobotModel) -> Self {
        Self {
            radius: model.reach_xy(),
            height: model.reach_z(),
        }
    }

    pub fn contains(&self, p: &Vector3<f64>) -> bool {
        p.x.hypot(p.y) <= self.radius && (0.0..=self.height).contains(&p.z)
    }
}

/// Uniform rotation from a uniform unit quaternion.
pub fn uniform_rotation<R: Rng + ?Sized>(rng: &mut R) -> Rotation3<f64> {
    let (u1, u2, u3): (f64, f64, f64) = (rng.random(), rng.random(), rng.random());
    let (a, b) = ((1.0 - u1).sqrt(), u1.sqrt());
    let q = Quaternion::new(
        b * (TAU * u3).cos(),
        a * (TAU * u2).sin(),
        a * (TAU * u2).cos(),
        b * (TAU * u3).sin(),
    );
    UnitQuaternion::from_quaternion(q).to_rotation_matrix()
}

/// Pose with position uniform in the cylinder volume and uniform rotation.
pub fn sample_eval_pose<R: Rng + ?Sized>(cylinder: &Cylinder, rng: &mut R) -> TcpPose {
    let r = cylinder.radius * rng.random::<f64>().sqrt();
    let phi = TAU * rng.random::<f64>();
    let z = cylinder.height * rng.random::<f64>();
    let rotation = uniform_rotation(rng);
    TcpPose::from_parts(rotation, Vector3::new(r * phi.cos(), r * phi.sin(), z))
}

/// `count` poses from a seeded stream.
pub fn sample_eval_poses(cylinder: &Cylinder, count: usize, seed: u64) -> Vec<TcpPose> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    (0..count).map(|_| sample_eval_pose(cylinder, &mut rng)).collect()
}

#[derive(Debug, Clone, PartialEq)]
pub struct LabeledPose {
    pub pose: TcpPose,
    pub reachable: bool,
    /// Distance of the accepted IK solution, or the best one seen.
    pub distance: f64,
    pub attempts: u32,
}

#[derive(Debug, Clone, PartialEq)]
pub struct EvalPoseSet {
    pub cylinder: Cylinder,
    pub entries: Vec<LabeledPose>,
}

const LABEL_HEADER: &str = "r00,r01,r02,r10,r11,r12,r20,r21,r22,px,py,pz,label,distance,attempts";

impl EvalPoseSet {
    /// Labels `poses` with the IK oracle. Pose `i` uses its own rng stream,
    /// so labels do not depend on the thread count.
    pub fn label(model: &RobotModel, cylinder: Cylinder, poses: Vec<TcpPose>, ik: &IkConfig, seed: u64) -> Self {
        let entries = poses
            .into_par_iter()
            .enumerate()
            .map(|(i, pose)| {
                let mut rng = ChaCha8Rng::seed_from_u64(seed);
                rng.set_stream(i as u64);
                let res = solve_ik(model, &pose, ik, &mut rng);
                LabeledPose {
                    pose,
                    reachable: res.reachable,
                    distance: res.distance,
                    attempts: res.attempts_used,
                }
            })
            .collect();
        Self { cylinder, entries }
    }

    /// Samples `count` poses in the robot's cylinder and labels them.
    pub fn generate(model: &RobotModel, count: usize, seed: u64, ik: &IkConfig) -> Self {
        let cylinder = Cylinder::of_robot(model);
        let poses = sample_eval_poses(&cylinder, count, seed);
        Self::label(model, cylinder, poses, ik, seed)
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn positives(&self) -> usize {
        self.entries.iter().filter(|e| e.reachable).count()
    }

    /// CSV with a comment line carrying the cylinder and a cache key.
    pub fn write_csv<W: Write>(&self, sink: &mut W, key: &str) -> Result<()> {
        let mut out = String::new();
        writeln!(
            out,
            "# radius={} height={} key={}",
            self.cylinder.radius, self.cylinder.height, key
        )
        .unwrap();
        out.push_str(LABEL_HEADER);
        out.push('\n');
        for e in &self.entries {
            for v in e.pose.to_row_major12() {
                write!(out, "{v},").unwrap();
            }
            writeln!(out, "{},{},{}", u8::from(e.reachable), e.distance, e.attempts).unwrap();
        }
        sink.write_all(out.as_bytes())?;
        Ok(())
    }

    /// Reads a label file; returns the set and its cache key.
    pub fn read_csv<R: Read>(source: R) -> Result<(Self, String)> {
        let reader = BufReader::new(source);
        let mut lines = reader.lines().enumerate();
        let bad = |line: usize, message: String| Error::Csv {
            line: line + 1,
            message,
        };

        let (n, first) = lines.next().ok_or_else(|| bad(0, "empty file".into()))?;
        let first = first?;
        let meta = first
            .strip_prefix("# ")
            .ok_or_else(|| bad(n, "missing `# radius=... height=... key=...` line".into()))?;
        let mut radius = None;
        let mut height = None;
        let mut key = String::new();
        for part in meta.split(' ') {
            match part.split_once('=') {
                Some(("radius", v)) => radius = v.parse::<f64>().ok(),
                Some(("height", v)) => height = v.parse::<f64>().ok(),
                Some(("key", v)) => key = v.to_string(),
                _ => return Err(bad(n, format!("unexpected field `{part}`"))),
            }
        }
        let (Some(radius), Some(height)) = (radius, height) else {
            return Err(bad(n, "radius and height are required".into()));
        };

        let (n, header) = lines.next().ok_or_else(|| bad(1, "missing header".into()))?;
        if header?.trim() != LABEL_HEADER {
            return Err(bad(n, format!("header must be `{LABEL_HEADER}`")));
        }

        let mut entries = Vec::new();
        for (n, line) in lines {
            let line = line?;
            if line.trim().is_empty() {
                continue;
            }
            let fields: Vec<&str> = line.split(',').map(str::trim).collect();
            if fields.len() != 15 {
                return Err(bad(n, format!("expected 15 fields, got {}", fields.len())));
            }
            let mut vals = [0.0; 12];
            for (v, f) in vals.iter_mut().zip(&fields[..12]) {
                *v = f.parse().map_err(|_| bad(n, format!("`{f}` is not a number")))?;
            }
            let pose = TcpPose::from_row_major12(&vals).map_err(|e| bad(n, e.to_string()))?;
            let reachable = match fields[12] {
                "1" => true,
                "0" => false,
                other => return Err(bad(n, format!("label must be 0 or 1, got `{other}`"))),
            };
            let distance = fields[13]
                .parse()
                .map_err(|_| bad(n, format!("`{}` is not a number", fields[13])))?;
            let attempts = fields[14]
                .parse()
                .map_err(|_| bad(n, format!("`{}` is not a count", fields[14])))?;
            entries.push(LabeledPose {
                pose,
                reachable,
                distance,
                attempts,
            });
        }
        Ok((
            Self {
                cylinder: Cylinder { radius, height },
                entries,
            },
            key,
        ))
    }

    /// Loads labels from `path` if its cache key matches, else generates
    /// and writes them.
    pub fn load_or_generate(
        path: impl AsRef<Path>,
        model: &RobotModel,
        count: usize,
        seed: u64,
        ik: &IkConfig,
    ) -> Result<Self> {
        let path = path.as_ref();
        let key = cache_key(model, count, seed, ik);
        if let Ok(file) = std::fs::File::open(path) {
            if let Ok((set, stored)) = Self::read_csv(file) {
                if stored == key && set.len() == count {
                    return Ok(set);
                }
            }
        }
        let set = Self::generate(model, count, seed, ik);
        if let Some(dir) = path.parent() {
            std::fs::create_dir_all(dir)?;
        }
        let mut file = std::io::BufWriter::new(std::fs::File::create(path)?);
        set.write_csv(&mut file, &key)?;
        file.flush()?;
        Ok(set)
    }
}

/// Identifies a labelling run: robot, limits, sample count, seed and oracle
/// settings.
pub fn cache_key(model: &RobotModel, count: usize, seed: u64, ik: &IkConfig) -> String {
    let mut h = crc32fast::Hasher::new();
    h.update(model.name().as_bytes());
    for j in model.joints() {
        h.update(format!("{:?}{:?}{:?}", j.origin, j.axis, j.limits).as_bytes());
    }
    h.update(format!("{:?}{:?}", model.tcp_offset(), model.collision_spheres()).as_bytes());
    h.update(format!("{} {}", model.reach_xy(), model.reach_z()).as_bytes());
    h.update(format!("{count} {seed} {ik:?}").as_bytes());
    format!("{}-{count}-{seed}-{:08x}", model.name(), h.finalize())
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct Confusion {
    pub tp: u64,
    pub tn: u64,
    pub fp: u64,
    pub fn_: u64,
}

impl Confusion {
    pub fn total(&self) -> u64 {
        self.tp + self.tn + self.fp + self.fn_
    }

    fn add(mut self, o: Self) -> Self {
        self.tp += o.tp;
        self.tn += o.tn;
        self.fp += o.fp;
        self.fn_ += o.fn_;
        self
    }
}

/// Accuracy, true positive rate and false positive rate. A rate whose
/// denominator is zero is `None`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Rates {
    pub accuracy: f64,
    pub tpr: Option<f64>,
    pub fpr: Option<f64>,
    pub confusion: Confusion,
}

impl Rates {
    pub fn from_confusion(c: Confusion) -> Result<Self> {
        let n = c.total();
        if n == 0 {
            return Err(Error::EmptyEvalSet);
        }
        let ratio = |a: u64, b: u64| (b > 0).then(|| a as f64 / b as f64);
        Ok(Self {
            accuracy: (c.tp + c.tn) as f64 / n as f64,
            tpr: ratio(c.tp, c.tp + c.fn_),
            fpr: ratio(c.fp, c.fp + c.tn),
            confusion: c,
        })
    }
}

/// Compares map predictions with the labels.
pub fn evaluate(map: &dyn ReachabilityMap, set: &EvalPoseSet) -> Result<Rates> {
    let c = set
        .entries
        .par_iter()
        .map(|e| {
            let predicted = map.query(&e.pose);
            let mut c = Confusion::default();
            match (predicted, e.reachable) {
                (true, true) => c.tp += 1,
                (false, false) => c.tn += 1,
                (true, false) => c.fp += 1,
                (false, true) => c.fn_ += 1,
            }
            c
        })
        .reduce(Confusion::default, Confusion::add);
    Rates::from_confusion(c)
}
