//! Joint-limit ablation: how restricting the first and last joint shows up
//! in the accuracy of a yaw- and roll-invariant map.

use std::path::Path;

use crate::canonical::GridParams;
use crate::construction::{build_map, BuildOptions, ConstructionSchedule};
use crate::error::Result;
use crate::evaluation::{evaluate, EvalPoseSet, Rates};
use crate::grid::ReachGrid4D;
use crate::ik::IkConfig;
use crate::map::ReachabilityMap;
use crate::robot::RobotModel;

#[derive(Debug, Clone)]
pub struct AblationSettings {
    pub params: GridParams,
    pub schedule: ConstructionSchedule,
    pub eval_count: usize,
    pub eval_seed: u64,
    pub ik: IkConfig,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AblationRow {
    pub range_deg: f64,
    pub rates: Rates,
    pub positives: usize,
    pub marked: u64,
}

/// For each `±range` in degrees: limit the first and last joint, rebuild
/// the map, re-label the evaluation poses (the same poses for every range)
/// and evaluate. With `cache_dir`, labels are cached per range.
pub fn ablate_joint_limits(
    model: &RobotModel,
    ranges_deg: &[f64],
    settings: &AblationSettings,
    cache_dir: Option<&Path>,
) -> Result<Vec<AblationRow>> {
    let mut rows = Vec::with_capacity(ranges_deg.len());
    for &range in ranges_deg {
        let limited = model.with_first_last_limits(range)?;
        let labels = match cache_dir {
            Some(dir) => EvalPoseSet::load_or_generate(
                dir.join(format!("labels-{}-pm{range}.csv", model.name())),
                &limited,
                settings.eval_count,
                settings.eval_seed,
                &settings.ik,
            )?,
            None => EvalPoseSet::generate(&limited, settings.eval_count, settings.eval_seed, &settings.ik),
        };
        let map = ReachGrid4D::new(limited.name(), settings.params)?;
        build_map(&limited, &map, &settings.schedule, &BuildOptions::default())?;
        rows.push(AblationRow {
            range_deg: range,
            rates: evaluate(&map, &labels)?,
            positives: labels.positives(),
            marked: map.marked_count(),
        });
    }
    Ok(rows)
}
