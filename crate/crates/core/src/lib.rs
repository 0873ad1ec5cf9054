//! Reachability maps for serial robot arms.
//!
//! [`ReachGrid4D`] stores reachability over the reduced coordinates
//! `(p_z, theta, x*, y*)` and answers both forward queries ("is this TCP pose
//! reachable from the base?") and inverse queries ("from which base
//! positions is this world pose reachable?") from the same bit grid. The
//! voxel capability maps in [`capability`] serve as 6D/5D baselines.

pub mod ablation;
pub mod bits;
pub mod canonical;
pub mod capability;
pub mod construction;
mod container;
pub mod error;
pub mod evaluation;
pub mod grid;
pub mod ik;
pub mod map;
pub mod placement;
pub mod pose;
pub mod robot;
pub mod robots;

pub use canonical::{canonicalize, Canonical4, GridParams, MapIndex4};
pub use capability::{CapabilityGrid, SphereDirections};
pub use construction::{build_map, build_maps, BuildOptions, ConstructionSchedule, MetricsRow};
pub use error::{Error, Result};
pub use evaluation::{evaluate, Cylinder, EvalPoseSet, Rates};
pub use grid::{BaseSolutionSet, ReachGrid4D};
pub use ik::{pose_distance, solve_ik, DistanceWeights, IkConfig, IkResult};
pub use map::{MapKind, ReachabilityMap};
pub use placement::{
    aggregate_inverse, combine_min, filter_reachable, select_best, GraspSet, PlacementGrid, PlacementSpec,
};
pub use pose::TcpPose;
pub use robot::{parse_robot, JointConfig, RobotModel};
