//! Base placement from grasp candidates: inverse queries aggregated into 2D
//! score grids, combined across objects, then forward-filtered.

use std::collections::HashMap;
use std::f64::consts::TAU;
use std::fmt::Write as _;
use std::io::{BufRead, BufReader, Read, Write};

use nalgebra::{Rotation3, Vector3};
use rand::Rng;
use rayon::prelude::*;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::grid::ReachGrid4D;
use crate::map::ReachabilityMap;
use crate::pose::TcpPose;

#[derive(Debug, Clone, PartialEq)]
pub struct GraspSet {
    pub object_id: String,
    pub poses: Vec<TcpPose>,
}

impl GraspSet {
    pub fn new(object_id: impl Into<String>, poses: Vec<TcpPose>) -> Result<Self> {
        let object_id = object_id.into();
        if poses.is_empty() {
            return Err(Error::Placement(format!("grasp set `{object_id}` is empty")));
        }
        Ok(Self { object_id, poses })
    }
}

/// Regular 2D grid over base positions. Cell `(i_x, i_y)` covers
/// `[origin + i * cell_size, origin + (i + 1) * cell_size)` on each axis.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct PlacementSpec {
    pub origin: [f64; 2],
    pub cell_size: f64,
    pub n_x: usize,
    pub n_y: usize,
}

impl PlacementSpec {
    pub fn new(origin: [f64; 2], cell_size: f64, n_x: usize, n_y: usize) -> Result<Self> {
        if !(cell_size > 0.0 && cell_size.is_finite()) {
            return Err(Error::Placement(format!("cell size must be positive, got {cell_size}")));
        }
        if n_x == 0 || n_y == 0 {
            return Err(Error::Placement("placement grid needs at least one cell".into()));
        }
        if !(origin[0].is_finite() && origin[1].is_finite()) {
            return Err(Error::Placement("placement grid origin must be finite".into()));
        }
        Ok(Self {
            origin,
            cell_size,
            n_x,
            n_y,
        })
    }

    /// Grid covering every base position from which any of `grasps` could
    /// lie inside the map's reach, split into square cells of `cell_size`.
    pub fn covering(map: &ReachGrid4D, grasps: &[GraspSet], cell_size: f64) -> Result<Self> {
        let p = map.params();
        let mut lo = [f64::INFINITY; 2];
        let mut hi = [f64::NEG_INFINITY; 2];
        for pose in grasps.iter().flat_map(|g| &g.poses) {
            for k in 0..2 {
                lo[k] = lo[k].min(pose.position[k]);
                hi[k] = hi[k].max(pose.position[k]);
            }
        }
        if !lo[0].is_finite() {
            return Err(Error::Placement("no grasp poses".into()));
        }
        if !(cell_size.is_finite() && cell_size > 0.0) {
            return Err(Error::Placement(format!("cell size must be positive, got {cell_size}")));
        }
        let l = cell_size;
        let origin = [((lo[0] - p.r_xy) / l).floor() * l, ((lo[1] - p.r_xy) / l).floor() * l];
        let n_x = ((hi[0] + p.r_xy - origin[0]) / l).ceil() as usize;
        let n_y = ((hi[1] + p.r_xy - origin[1]) / l).ceil() as usize;
        Self::new(origin, l, n_x.max(1), n_y.max(1))
    }

    pub fn cell_of(&self, x: f64, y: f64) -> Option<(usize, usize)> {
        let fx = ((x - self.origin[0]) / self.cell_size).floor();
        let fy = ((y - self.origin[1]) / self.cell_size).floor();
        if fx < 0.0 || fy < 0.0 || fx >= self.n_x as f64 || fy >= self.n_y as f64 {
            return None;
        }
        Some((fx as usize, fy as usize))
    }

    pub fn cell_center(&self, i_x: usize, i_y: usize) -> (f64, f64) {
        (
            self.origin[0] + (i_x as f64 + 0.5) * self.cell_size,
            self.origin[1] + (i_y as f64 + 0.5) * self.cell_size,
        )
    }

    fn len(&self) -> usize {
        self.n_x * self.n_y
    }
}

/// Reachable-candidate count per base cell, stored with `i_y` fastest.
#[derive(Debug, Clone, PartialEq)]
pub struct PlacementGrid {
    pub spec: PlacementSpec,
    counts: Vec<u32>,
    /// Number of grasp poses aggregated (upper bound on any count).
    pub candidates: usize,
}

impl PlacementGrid {
    pub fn zeros(spec: PlacementSpec) -> Self {
        Self {
            counts: vec![0; spec.len()],
            spec,
            candidates: 0,
        }
    }

    pub fn get(&self, i_x: usize, i_y: usize) -> u32 {
        self.counts[i_x * self.spec.n_y + i_y]
    }

    pub fn counts(&self) -> &[u32] {
        &self.counts
    }

    pub fn max(&self) -> u32 {
        self.counts.iter().copied().max().unwrap_or(0)
    }

    /// CSV matrix: one line per `i_y` row (top to bottom: increasing `i_y`),
    /// one column per `i_x`.
    pub fn write_csv<W: Write>(&self, sink: &mut W) -> Result<()> {
        let mut out = String::new();
        for j in 0..self.spec.n_y {
            for i in 0..self.spec.n_x {
                if i > 0 {
                    out.push(',');
                }
                write!(out, "{}", self.get(i, j)).unwrap();
            }
            out.push('\n');
        }
        sink.write_all(out.as_bytes())?;
        Ok(())
    }

    /// Sidecar describing the CSV matrix and the chosen placement.
    pub fn sidecar_json(&self, best: Option<&Placement>) -> serde_json::Value {
        serde_json::json!({
            "origin": self.spec.origin,
            "cell_size": self.spec.cell_size,
            "n_x": self.spec.n_x,
            "n_y": self.spec.n_y,
            "candidates": self.candidates,
            "argmax": best.map(|b| [b.i_x, b.i_y]),
            "best": best.map(|b| [b.x, b.y]),
            "score": best.map(|b| b.score),
        })
    }
}

/// Counts, per base cell, the grasps reachable from somewhere in that cell.
pub fn aggregate_inverse(map: &ReachGrid4D, grasps: &GraspSet, spec: &PlacementSpec) -> Result<PlacementGrid> {
    let spec = PlacementSpec::new(spec.origin, spec.cell_size, spec.n_x, spec.n_y)?;
    let n = spec.len();
    let counts = grasps
        .poses
        .par_iter()
        .enumerate()
        .fold(
            || (vec![0u32; n], vec![u32::MAX; n]),
            |(mut counts, mut stamp), (k, pose)| {
                // `stamp` remembers the last pose that counted a cell.
                let k = k as u32;
                map.for_each_base(pose, |x, y| {
                    if let Some((i, j)) = spec.cell_of(x, y) {
                        let c = i * spec.n_y + j;
                        if stamp[c] != k {
                            stamp[c] = k;
                            counts[c] += 1;
                        }
                    }
                });
                (counts, stamp)
            },
        )
        .map(|(counts, _)| counts)
        .reduce(
            || vec![0u32; n],
            |mut a, b| {
                a.iter_mut().zip(&b).for_each(|(x, y)| *x += y);
                a
            },
        );
    Ok(PlacementGrid {
        spec,
        counts,
        candidates: grasps.poses.len(),
    })
}

/// Elementwise minimum; a cell unreachable for one object is vetoed.
pub fn combine_min(grids: &[PlacementGrid]) -> Result<PlacementGrid> {
    let Some(first) = grids.first() else {
        return Err(Error::Placement("no grids to combine".into()));
    };
    let mut out = first.clone();
    for g in &grids[1..] {
        if g.spec != first.spec {
            return Err(Error::Placement(format!(
                "grid specs differ: {:?} vs {:?}",
                first.spec, g.spec
            )));
        }
        out.counts
            .iter_mut()
            .zip(&g.counts)
            .for_each(|(a, b)| *a = (*a).min(*b));
        out.candidates = out.candidates.min(g.candidates);
    }
    Ok(out)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Placement {
    pub x: f64,
    pub y: f64,
    pub i_x: usize,
    pub i_y: usize,
    pub score: u32,
}

/// Highest-scoring cell; ties go to the smallest `(i_x, i_y)`.
pub fn select_best(grid: &PlacementGrid) -> Result<Placement> {
    let mut best: Option<(usize, u32)> = None;
    for (c, &v) in grid.counts.iter().enumerate() {
        if v > 0 && best.is_none_or(|(_, b)| v > b) {
            best = Some((c, v));
        }
    }
    let (c, score) = best.ok_or(Error::NoFeasiblePlacement)?;
    let (i_x, i_y) = (c / grid.spec.n_y, c % grid.spec.n_y);
    let (x, y) = grid.spec.cell_center(i_x, i_y);
    Ok(Placement { x, y, i_x, i_y, score })
}

/// Indices of the grasps the map deems reachable from a base at `(x, y, 0)`.
/// The base heading does not matter.
pub fn filter_reachable(map: &dyn ReachabilityMap, base: (f64, f64), grasps: &GraspSet) -> Vec<usize> {
    let offset = Vector3::new(base.0, base.1, 0.0);
    grasps
        .poses
        .iter()
        .enumerate()
        .filter(|(_, p)| map.query(&TcpPose::from_parts(p.rotation, p.position - offset)))
        .map(|(i, _)| i)
        .collect()
}

/// Random grasp poses around an object: approach directions from the upper
/// hemisphere pointing at the object, positions jittered within `spread`,
/// random roll.
pub fn synthesize_grasps<R: Rng + ?Sized>(
    object_id: &str,
    center: Vector3<f64>,
    count: usize,
    spread: f64,
    rng: &mut R,
) -> Result<GraspSet> {
    let mut poses = Vec::with_capacity(count);
    for _ in 0..count {
        let z: f64 = rng.random_range(0.0..1.0);
        let phi = TAU * rng.random::<f64>();
        let s = (1.0 - z * z).sqrt();
        let outward = Vector3::new(s * phi.cos(), s * phi.sin(), z);
        let jitter = Vector3::new(
            rng.random_range(-1.0..1.0),
            rng.random_range(-1.0..1.0),
            rng.random_range(-1.0..1.0),
        ) * spread;
        let base = TcpPose::from_approach(-outward, center + jitter);
        let roll = Rotation3::from_axis_angle(&Vector3::z_axis(), TAU * rng.random::<f64>());
        poses.push(TcpPose::from_parts(base.rotation * roll, base.position));
    }
    GraspSet::new(object_id, poses)
}

const GRASP_HEADER: &str = "object_id,r00,r01,r02,r10,r11,r12,r20,r21,r22,px,py,pz";

/// Reads a grasp file; sets come out in order of first appearance.
pub fn read_grasps_csv<R: Read>(source: R) -> Result<Vec<GraspSet>> {
    let reader = BufReader::new(source);
    let mut order: Vec<String> = Vec::new();
    let mut by_id: HashMap<String, Vec<TcpPose>> = HashMap::new();
    let bad = |line: usize, message: String| Error::Csv {
        line: line + 1,
        message,
    };
    for (n, line) in reader.lines().enumerate() {
        let line = line?;
        let line = line.trim();
        if line.is_empty() || line.starts_with('#') || (n == 0 && line.starts_with("object_id")) {
            continue;
        }
        let fields: Vec<&str> = line.split(',').map(str::trim).collect();
        if fields.len() != 13 {
            return Err(bad(n, format!("expected 13 fields, got {}", fields.len())));
        }
        let mut vals = [0.0; 12];
        for (v, f) in vals.iter_mut().zip(&fields[1..]) {
            *v = f.parse().map_err(|_| bad(n, format!("`{f}` is not a number")))?;
        }
        let pose = TcpPose::from_row_major12(&vals).map_err(|e| bad(n, e.to_string()))?;
        let id = fields[0].to_string();
        by_id
            .entry(id.clone())
            .or_insert_with(|| {
                order.push(id);
                Vec::new()
            })
            .push(pose);
    }
    if order.is_empty() {
        return Err(Error::Placement("grasp file holds no poses".into()));
    }
    order
        .into_iter()
        .map(|id| {
            let poses = by_id.remove(&id).unwrap_or_default();
            GraspSet::new(id, poses)
        })
        .collect()
}

pub fn write_grasps_csv<W: Write>(sink: &mut W, sets: &[GraspSet]) -> Result<()> {
    let mut out = String::new();
    out.push_str(GRASP_HEADER);
    out.push('\n');
    for set in sets {
        for p in &set.poses {
            out.push_str(&set.object_id);
            for v in p.to_row_major12() {
                write!(out, ",{v}").unwrap();
            }
            out.push('\n');
        }
    }
    sink.write_all(out.as_bytes())?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;

    fn spec() -> PlacementSpec {
        PlacementSpec::new([-1.0, -1.0], 0.5, 4, 4).unwrap()
    }

    fn grid_with(values: &[(usize, usize, u32)]) -> PlacementGrid {
        let mut g = PlacementGrid::zeros(spec());
        for &(i, j, v) in values {
            g.counts[i * 4 + j] = v;
        }
        g
    }

    #[test]
    fn spec_rejects_bad_cells() {
        assert!(PlacementSpec::new([0.0, 0.0], 0.0, 3, 3).is_err());
        assert!(PlacementSpec::new([0.0, 0.0], -0.1, 3, 3).is_err());
        assert!(PlacementSpec::new([0.0, 0.0], 0.1, 0, 3).is_err());
    }

    #[test]
    fn cells_are_half_open() {
        let s = spec();
        assert_eq!(s.cell_of(-1.0, -1.0), Some((0, 0)));
        assert_eq!(s.cell_of(-0.5, 0.99), Some((1, 3)));
        assert_eq!(s.cell_of(1.0, 0.0), None);
        assert_eq!(s.cell_of(-1.01, 0.0), None);
        assert_eq!(s.cell_center(0, 3), (-0.75, 0.75));
    }

    #[test]
    fn combine_and_select() {
        let a = grid_with(&[(1, 2, 5), (2, 2, 4), (3, 3, 7)]);
        let b = grid_with(&[(1, 2, 3), (2, 2, 6)]);
        assert_eq!(combine_min(std::slice::from_ref(&a)).unwrap(), a);
        let c = combine_min(&[a.clone(), b.clone()]).unwrap();
        assert_eq!(c.get(1, 2), 3);
        assert_eq!(c.get(2, 2), 4);
        assert_eq!(c.get(3, 3), 0);
        let best = select_best(&c).unwrap();
        assert_eq!((best.i_x, best.i_y, best.score), (2, 2, 4));
        assert_eq!((best.x, best.y), (0.25, 0.25));

        let mut other = PlacementGrid::zeros(PlacementSpec::new([0.0, 0.0], 0.5, 4, 4).unwrap());
        other.counts[0] = 1;
        assert!(matches!(combine_min(&[a, other]), Err(Error::Placement(_))));
    }

    #[test]
    fn select_tie_break_and_empty() {
        let mut uniform = PlacementGrid::zeros(spec());
        uniform.counts.iter_mut().for_each(|c| *c = 2);
        let best = select_best(&uniform).unwrap();
        assert_eq!((best.i_x, best.i_y), (0, 0));

        let two_peaks = grid_with(&[(0, 1, 3), (3, 0, 9)]);
        assert_eq!(select_best(&two_peaks).unwrap().score, 9);
        let two_peaks = grid_with(&[(0, 1, 9), (3, 0, 3)]);
        let best = select_best(&two_peaks).unwrap();
        assert_eq!((best.i_x, best.i_y, best.score), (0, 1, 9));

        assert!(matches!(
            select_best(&PlacementGrid::zeros(spec())),
            Err(Error::NoFeasiblePlacement)
        ));
    }

    #[test]
    fn grasp_csv_roundtrip() {
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(1);
        let a = synthesize_grasps("mug", Vector3::new(0.5, 0.0, 0.2), 5, 0.02, &mut rng).unwrap();
        let b = synthesize_grasps("box", Vector3::new(0.0, 0.5, 0.1), 3, 0.02, &mut rng).unwrap();
        let mut buf = Vec::new();
        write_grasps_csv(&mut buf, &[a.clone(), b.clone()]).unwrap();
        let back = read_grasps_csv(buf.as_slice()).unwrap();
        assert_eq!(back, vec![a, b]);
        assert!(matches!(read_grasps_csv(&b"mug,1,0,0\n"[..]), Err(Error::Csv { .. })));
        assert!(matches!(read_grasps_csv(&b""[..]), Err(Error::Placement(_))));
    }
}
