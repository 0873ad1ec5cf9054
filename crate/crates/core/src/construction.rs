//! Sampling-based map construction with checkpointed metrics.
//!
//! Valid samples are numbered globally. Sample `g` comes from the rng
//! stream of block `g / BLOCK` (seeded by the schedule), so a map built in
//! one go and one built in resumed pieces see the same samples, whatever the
//! thread count.

use std::io::Write;
use std::time::{Duration, Instant};

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::evaluation::{evaluate, EvalPoseSet, Rates};
use crate::map::ReachabilityMap;
use crate::robot::{JointConfig, RobotModel};

/// Valid samples per rng stream and per parallel work item.
pub const BLOCK: u64 = 10_000;

/// Draws allowed per requested valid sample before giving up.
const MAX_DRAWS_PER_SAMPLE: u64 = 1000;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct ConstructionSchedule {
    /// Valid (collision-free) samples to reach, counting any already in
    /// the map.
    pub total_samples: u64,
    pub checkpoint_every: u64,
    pub seed: u64,
}

impl Default for ConstructionSchedule {
    fn default() -> Self {
        Self {
            total_samples: 5_000_000,
            checkpoint_every: 100_000,
            seed: 0,
        }
    }
}

impl ConstructionSchedule {
    pub fn new(total_samples: u64, checkpoint_every: u64, seed: u64) -> Result<Self> {
        let s = Self {
            total_samples,
            checkpoint_every,
            seed,
        };
        s.validate()?;
        Ok(s)
    }

    pub fn validate(&self) -> Result<()> {
        if self.checkpoint_every == 0 {
            return Err(Error::Schedule("checkpoint_every must be positive".into()));
        }
        if self.total_samples > 0 && self.checkpoint_every > self.total_samples {
            return Err(Error::Schedule(format!(
                "checkpoint_every ({}) exceeds total_samples ({})",
                self.checkpoint_every, self.total_samples
            )));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MetricsRow {
    /// Valid samples in the map after this window.
    pub samples: u64,
    /// Cells that went from unmarked to marked during the window.
    pub novel_cells: u64,
    pub accuracy: Option<f64>,
    pub tpr: Option<f64>,
    pub fpr: Option<f64>,
}

#[derive(Debug, Default)]
pub struct BuildOptions<'a> {
    /// Evaluated at every checkpoint when present.
    pub eval: Option<&'a EvalPoseSet>,
    /// Size of the evenly strided subsample of configurations to keep.
    pub retain: usize,
}

#[derive(Debug, Clone)]
pub struct BuildReport {
    /// One table per map, in the order the maps were passed.
    pub metrics: Vec<Vec<MetricsRow>>,
    /// Retained valid configurations, by ascending sample number.
    pub retained: Vec<JointConfig>,
    /// Valid samples added by this run.
    pub samples_added: u64,
    /// Configurations drawn, valid or not.
    pub draws: u64,
    pub elapsed: Duration,
}

/// Builds a single map. See [`build_maps`].
pub fn build_map(
    model: &RobotModel,
    map: &dyn ReachabilityMap,
    schedule: &ConstructionSchedule,
    opts: &BuildOptions,
) -> Result<BuildReport> {
    build_maps(model, &[map], schedule, opts)
}

/// Marks every map with the same stream of valid samples until each holds
/// `schedule.total_samples`. Maps must belong to `model` and hold the same
/// number of samples already.
pub fn build_maps(
    model: &RobotModel,
    maps: &[&dyn ReachabilityMap],
    schedule: &ConstructionSchedule,
    opts: &BuildOptions,
) -> Result<BuildReport> {
    schedule.validate()?;
    let start_time = Instant::now();
    let Some(first) = maps.first() else {
        return Err(Error::Schedule("no maps to build".into()));
    };
    for m in maps {
        if m.robot_name() != model.name() {
            return Err(Error::ParamMismatch(format!(
                "{} map belongs to robot `{}`, not `{}`",
                m.kind(),
                m.robot_name(),
                model.name()
            )));
        }
        if m.sample_count() != first.sample_count() {
            return Err(Error::ParamMismatch(format!(
                "maps hold different sample counts ({} vs {})",
                m.sample_count(),
                first.sample_count()
            )));
        }
    }
    let start = first.sample_count();
    if start > schedule.total_samples {
        return Err(Error::Schedule(format!(
            "map already holds {start} samples, more than the {} scheduled",
            schedule.total_samples
        )));
    }

    let stride = if opts.retain == 0 {
        0
    } else {
        ((schedule.total_samples - start) / opts.retain as u64).max(1)
    };

    let mut metrics = vec![Vec::new(); maps.len()];
    let mut retained: Vec<(u64, JointConfig)> = Vec::new();
    let mut draws = 0;
    let mut lo = start;
    while lo < schedule.total_samples {
        let hi = ((lo / schedule.checkpoint_every + 1) * schedule.checkpoint_every).min(schedule.total_samples);
        let pieces: Vec<(u64, u64)> = split_blocks(lo, hi);
        let results = pieces
            .into_par_iter()
            .map(|(a, b)| run_piece(model, maps, schedule.seed, a, b, start, stride))
            .collect::<Result<Vec<_>>>()?;

        let mut novel = vec![0u64; maps.len()];
        for r in results {
            draws += r.draws;
            for (n, k) in novel.iter_mut().zip(&r.novel) {
                *n += k;
            }
            retained.extend(r.retained);
        }
        for m in maps {
            m.add_samples(hi - lo);
        }
        for (k, m) in maps.iter().enumerate() {
            let rates = opts.eval.map(|set| evaluate(*m, set)).transpose()?;
            metrics[k].push(row(hi, novel[k], rates));
        }
        lo = hi;
    }
    retained.sort_by_key(|(g, _)| *g);
    if opts.retain > 0 {
        retained.truncate(opts.retain);
    }

    Ok(BuildReport {
        metrics,
        retained: retained.into_iter().map(|(_, q)| q).collect(),
        samples_added: schedule.total_samples - start,
        draws,
        elapsed: start_time.elapsed(),
    })
}

fn row(samples: u64, novel_cells: u64, rates: Option<Rates>) -> MetricsRow {
    MetricsRow {
        samples,
        novel_cells,
        accuracy: rates.map(|r| r.accuracy),
        tpr: rates.and_then(|r| r.tpr),
        fpr: rates.and_then(|r| r.fpr),
    }
}

/// Splits `[lo, hi)` at block boundaries.
fn split_blocks(lo: u64, hi: u64) -> Vec<(u64, u64)> {
    let mut out = Vec::new();
    let mut a = lo;
    while a < hi {
        let b = ((a / BLOCK + 1) * BLOCK).min(hi);
        out.push((a, b));
        a = b;
    }
    out
}

struct PieceResult {
    novel: Vec<u64>,
    draws: u64,
    retained: Vec<(u64, JointConfig)>,
}

/// Produces valid samples `a..b` (all inside one block) and marks them.
fn run_piece(
    model: &RobotModel,
    maps: &[&dyn ReachabilityMap],
    seed: u64,
    a: u64,
    b: u64,
    run_start: u64,
    stride: u64,
) -> Result<PieceResult> {
    let block_start = a / BLOCK * BLOCK;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(a / BLOCK);

    let mut out = PieceResult {
        novel: vec![0; maps.len()],
        draws: 0,
        retained: Vec::new(),
    };
    let max_draws = MAX_DRAWS_PER_SAMPLE * (b - block_start);
    let mut g = block_start;
    while g < b {
        if out.draws >= max_draws {
            return Err(Error::Robot(format!(
                "robot `{}`: fewer than 1 in {MAX_DRAWS_PER_SAMPLE} sampled configurations is collision-free",
                model.name()
            )));
        }
        out.draws += 1;
        let q = model.sample_config(&mut rng);
        let Some(tcp) = model.valid_tcp(q.values()) else {
            continue;
        };
        if g >= a {
            for (n, m) in out.novel.iter_mut().zip(maps) {
                if m.mark(&tcp) {
                    *n += 1;
                }
            }
            if stride > 0 && (g - run_start).is_multiple_of(stride) {
                out.retained.push((g, q));
            }
        }
        g += 1;
    }
    Ok(out)
}

/// First checkpoint whose window added fewer than `fraction` of the window's
/// samples as novel cells.
pub fn saturation_point(rows: &[MetricsRow], start: u64, fraction: f64) -> Option<u64> {
    let mut prev = start;
    for r in rows {
        let window = r.samples - prev;
        if window > 0 && (r.novel_cells as f64) < fraction * window as f64 {
            return Some(r.samples);
        }
        prev = r.samples;
    }
    None
}

/// Plot-ready metrics table; undefined rates are written as `nan`.
pub fn write_metrics_csv<W: Write>(
    sink: &mut W,
    rows: &[MetricsRow],
    map_type: &str,
    robot: &str,
    seed: u64,
) -> Result<()> {
    let opt = |v: Option<f64>| v.map_or_else(|| "nan".to_string(), |x| x.to_string());
    writeln!(sink, "samples,novel_cells,accuracy,tpr,fpr,map_type,robot,seed")?;
    for r in rows {
        writeln!(
            sink,
            "{},{},{},{},{},{map_type},{robot},{seed}",
            r.samples,
            r.novel_cells,
            opt(r.accuracy),
            opt(r.tpr),
            opt(r.fpr)
        )?;
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn schedule_validation() {
        assert!(ConstructionSchedule::new(100, 10, 0).is_ok());
        assert!(ConstructionSchedule::new(0, 10, 0).is_ok());
        assert!(matches!(ConstructionSchedule::new(10, 100, 0), Err(Error::Schedule(_))));
        assert!(matches!(ConstructionSchedule::new(10, 0, 0), Err(Error::Schedule(_))));
    }

    #[test]
    fn blocks_split_at_boundaries() {
        assert_eq!(
            split_blocks(0, 25_000),
            vec![(0, 10_000), (10_000, 20_000), (20_000, 25_000)]
        );
        assert_eq!(split_blocks(15_000, 20_000), vec![(15_000, 20_000)]);
        assert!(split_blocks(5, 5).is_empty());
    }

    #[test]
    fn saturation_threshold() {
        let rows = [
            MetricsRow {
                samples: 100,
                novel_cells: 50,
                accuracy: None,
                tpr: None,
                fpr: None,
            },
            MetricsRow {
                samples: 200,
                novel_cells: 1,
                accuracy: None,
                tpr: None,
                fpr: None,
            },
            MetricsRow {
                samples: 300,
                novel_cells: 0,
                accuracy: None,
                tpr: None,
                fpr: None,
            },
        ];
        assert_eq!(saturation_point(&rows, 0, 0.02), Some(200));
        assert_eq!(saturation_point(&rows, 0, 0.005), Some(300));
        assert_eq!(saturation_point(&rows[..2], 0, 0.005), None);
    }
}
