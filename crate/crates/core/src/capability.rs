//! Zacharias-style voxel capability maps: 3D voxels, a set
//! of approach directions per voxel and optional in-plane rotation bins.
//! With one in-plane bin the map is the 5D variant.

use std::f64::consts::PI;
use std::io::{Read, Write};
use std::sync::atomic::{AtomicU64, Ordering};

use nalgebra::{Rotation3, Vector3};

use crate::bits::AtomicBits;
use crate::canonical::{bin_index, GridParams};
use crate::container::{read_container, write_container, Header};
use crate::error::{Error, Result};
use crate::grid::DEFAULT_MAX_CELLS;
use crate::map::{MapKind, ReachabilityMap};
use crate::pose::TcpPose;

pub const CAPM_MAGIC: &[u8; 4] = b"CAPM";

pub const DEFAULT_DIRECTIONS: usize = 200;
pub const DEFAULT_INPLANE_BINS: usize = 12;

const GOLDEN_ANGLE: f64 = 2.399_963_229_728_653; // pi * (3 - sqrt(5))

/// Quasi-uniform approach directions with a per-direction reference axis for
/// measuring in-plane rotation.
#[derive(Debug, Clone, PartialEq)]
pub struct SphereDirections {
    directions: Vec<Vector3<f64>>,
    // unit vector orthogonal to each direction; roll is measured from it
    references: Vec<Vector3<f64>>,
}

impl SphereDirections {
    /// Generalized spiral with both poles included: point `i` of `n` sits at
    /// `z = 1 - 2i/(n-1)` and longitude `i * golden_angle`.
    pub fn new(count: usize) -> Result<Self> {
        if count == 0 {
            return Err(Error::InvalidParams("direction count must be at least 1".into()));
        }
        let directions: Vec<Vector3<f64>> = if count == 1 {
            vec![Vector3::z()]
        } else {
            (0..count)
                .map(|i| {
                    let z = 1.0 - 2.0 * i as f64 / (count - 1) as f64;
                    let r = (1.0 - z * z).max(0.0).sqrt();
                    let phi = i as f64 * GOLDEN_ANGLE;
                    Vector3::new(r * phi.cos(), r * phi.sin(), z).normalize()
                })
                .collect()
        };
        let references = directions.iter().map(reference_axis).collect();
        Ok(Self { directions, references })
    }

    pub fn len(&self) -> usize {
        self.directions.len()
    }

    pub fn is_empty(&self) -> bool {
        self.directions.is_empty()
    }

    pub fn directions(&self) -> &[Vector3<f64>] {
        &self.directions
    }

    /// Index of the direction closest to `v` (max dot product; lowest index
    /// on ties).
    pub fn nearest(&self, v: &Vector3<f64>) -> usize {
        let mut best = 0;
        let mut best_dot = f64::NEG_INFINITY;
        for (i, d) in self.directions.iter().enumerate() {
            let dot = d.dot(v);
            if dot > best_dot {
                best_dot = dot;
                best = i;
            }
        }
        best
    }
}

/// World x projected onto the plane orthogonal to `d`; world y near the x
/// poles.
fn reference_axis(d: &Vector3<f64>) -> Vector3<f64> {
    let seed = if d.x.abs() < 0.9 { Vector3::x() } else { Vector3::y() };
    (seed - d * d.dot(&seed)).normalize()
}

/// `(dir_index, inplane_index)` for a rotation.
pub fn so3_to_bin(rotation: &Rotation3<f64>, dirs: &SphereDirections, n_inplane: usize) -> (usize, usize) {
    let m = rotation.matrix();
    let approach: Vector3<f64> = m.column(2).into_owned();
    let dir = dirs.nearest(&approach);
    if n_inplane <= 1 {
        return (dir, 0);
    }
    let d = &dirs.directions[dir];
    let ref_x = &dirs.references[dir];
    let ref_y = d.cross(ref_x);
    let rx: Vector3<f64> = m.column(0).into_owned();
    let phi = rx.dot(&ref_y).atan2(rx.dot(ref_x)).rem_euclid(2.0 * PI);
    (dir, bin_index(phi, 0.0, 2.0 * PI / n_inplane as f64, n_inplane))
}

/// Positional voxel grid times approach directions times in-plane bins.
pub struct CapabilityGrid {
    robot_name: String,
    params: GridParams,
    dirs: SphereDirections,
    n_inplane: usize,
    n_xy: usize,
    n_z: usize,
    bits: AtomicBits,
    marked: AtomicU64,
    samples: AtomicU64,
    out_of_range: AtomicU64,
}

/// Capability-map cell address.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct CapabilityIndex {
    pub i_x: usize,
    pub i_y: usize,
    pub i_z: usize,
    pub dir: usize,
    pub inplane: usize,
}

impl CapabilityGrid {
    /// Full 6D map (default 200 directions x 12 in-plane bins).
    pub fn zacharias_6d(robot_name: impl Into<String>, params: GridParams) -> Result<Self> {
        Self::new(robot_name, params, DEFAULT_DIRECTIONS, DEFAULT_INPLANE_BINS)
    }

    /// 5D variant without in-plane rotation.
    pub fn zacharias_5d(robot_name: impl Into<String>, params: GridParams) -> Result<Self> {
        Self::new(robot_name, params, DEFAULT_DIRECTIONS, 1)
    }

    pub fn new(robot_name: impl Into<String>, params: GridParams, n_dirs: usize, n_inplane: usize) -> Result<Self> {
        params.validate()?;
        if n_inplane == 0 {
            return Err(Error::InvalidParams("in-plane bin count must be at least 1".into()));
        }
        let cells = Self::cells_for(&params, n_dirs as u64, n_inplane as u64);
        if cells > DEFAULT_MAX_CELLS {
            return Err(Error::TooLarge {
                cells,
                cap: DEFAULT_MAX_CELLS,
            });
        }
        let dirs = SphereDirections::new(n_dirs)?;
        Ok(Self::from_parts(
            robot_name.into(),
            params,
            dirs,
            n_inplane,
            AtomicBits::new(cells),
            0,
        ))
    }

    fn cells_for(params: &GridParams, n_dirs: u64, n_inplane: u64) -> u64 {
        let n_xy = params.n_xy() as u64;
        n_xy * n_xy * params.n_z() as u64 * n_dirs * n_inplane
    }

    fn from_parts(
        robot_name: String,
        params: GridParams,
        dirs: SphereDirections,
        n_inplane: usize,
        bits: AtomicBits,
        samples: u64,
    ) -> Self {
        let marked = bits.count_ones();
        Self {
            robot_name,
            n_xy: params.n_xy(),
            n_z: params.n_z(),
            params,
            dirs,
            n_inplane,
            bits,
            marked: AtomicU64::new(marked),
            samples: AtomicU64::new(samples),
            out_of_range: AtomicU64::new(0),
        }
    }

    pub fn params(&self) -> &GridParams {
        &self.params
    }

    pub fn directions(&self) -> &SphereDirections {
        &self.dirs
    }

    pub fn n_inplane(&self) -> usize {
        self.n_inplane
    }

    pub fn index_of(&self, tcp: &TcpPose) -> Option<CapabilityIndex> {
        let p = &tcp.position;
        let r = self.params.r_xy;
        if !(p.x >= -r && p.x <= r && p.y >= -r && p.y <= r && p.z >= 0.0 && p.z <= self.params.r_z) {
            return None;
        }
        let (dir, inplane) = so3_to_bin(&tcp.rotation, &self.dirs, self.n_inplane);
        Some(CapabilityIndex {
            i_x: bin_index(p.x, -r, self.params.l_c, self.n_xy),
            i_y: bin_index(p.y, -r, self.params.l_c, self.n_xy),
            i_z: bin_index(p.z, 0.0, self.params.l_c, self.n_z),
            dir,
            inplane,
        })
    }

    #[inline]
    fn linear_index(&self, i: &CapabilityIndex) -> u64 {
        let voxel = (i.i_x * self.n_xy + i.i_y) * self.n_z + i.i_z;
        ((voxel * self.dirs.len() + i.dir) * self.n_inplane + i.inplane) as u64
    }

    pub fn get(&self, i: &CapabilityIndex) -> bool {
        self.bits.get(self.linear_index(i))
    }

    pub fn save<W: Write>(&self, sink: &mut W) -> Result<()> {
        let header = Header {
            robot_name: self.robot_name.clone(),
            params: self.params,
            dims: [self.n_z as u32, self.params.n_theta() as u32, self.n_xy as u32],
            extra: vec![self.dirs.len() as u32, self.n_inplane as u32],
            samples: self.sample_count(),
        };
        write_container(sink, CAPM_MAGIC, &header, &self.bits)
    }

    pub fn load<R: Read>(source: &mut R) -> Result<Self> {
        let (header, bits) = read_container(source, CAPM_MAGIC, 2, |h| {
            let p = &h.params;
            let expected = [p.n_z() as u32, p.n_theta() as u32, p.n_xy() as u32];
            if h.dims != expected {
                return Err(Error::Corrupt(format!(
                    "dims {:?} inconsistent with parameters (expected {:?})",
                    h.dims, expected
                )));
            }
            let (n_dirs, n_inplane) = (h.extra[0] as u64, h.extra[1] as u64);
            if n_dirs == 0 || n_inplane == 0 {
                return Err(Error::Corrupt("zero directions or in-plane bins".into()));
            }
            let cells = Self::cells_for(p, n_dirs, n_inplane);
            if cells > DEFAULT_MAX_CELLS {
                return Err(Error::TooLarge {
                    cells,
                    cap: DEFAULT_MAX_CELLS,
                });
            }
            Ok(cells)
        })?;
        let dirs = SphereDirections::new(header.extra[0] as usize)?;
        Ok(Self::from_parts(
            header.robot_name,
            header.params,
            dirs,
            header.extra[1] as usize,
            bits,
            header.samples,
        ))
    }

    pub fn save_to_path(&self, path: impl AsRef<std::path::Path>) -> Result<()> {
        let mut f = std::io::BufWriter::new(std::fs::File::create(path)?);
        self.save(&mut f)?;
        f.flush()?;
        Ok(())
    }

    pub fn load_from_path(path: impl AsRef<std::path::Path>) -> Result<Self> {
        let mut f = std::io::BufReader::new(std::fs::File::open(path)?);
        Self::load(&mut f)
    }
}

impl ReachabilityMap for CapabilityGrid {
    fn kind(&self) -> MapKind {
        if self.n_inplane == 1 {
            MapKind::Zacharias5d
        } else {
            MapKind::Zacharias6d
        }
    }

    fn robot_name(&self) -> &str {
        &self.robot_name
    }

    fn mark(&self, tcp: &TcpPose) -> bool {
        match self.index_of(tcp) {
            Some(i) => {
                let newly = self.bits.set(self.linear_index(&i));
                if newly {
                    self.marked.fetch_add(1, Ordering::Relaxed);
                }
                newly
            }
            None => {
                self.out_of_range.fetch_add(1, Ordering::Relaxed);
                false
            }
        }
    }

    fn query(&self, tcp: &TcpPose) -> bool {
        self.index_of(tcp).is_some_and(|i| self.get(&i))
    }

    fn cell_count(&self) -> u64 {
        self.bits.len()
    }

    fn marked_count(&self) -> u64 {
        self.marked.load(Ordering::Relaxed)
    }

    fn out_of_range_count(&self) -> u64 {
        self.out_of_range.load(Ordering::Relaxed)
    }

    fn sample_count(&self) -> u64 {
        self.samples.load(Ordering::Relaxed)
    }

    fn add_samples(&self, n: u64) {
        self.samples.fetch_add(n, Ordering::Relaxed);
    }
}

impl PartialEq for CapabilityGrid {
    fn eq(&self, other: &Self) -> bool {
        self.robot_name == other.robot_name
            && self.params == other.params
            && self.dirs.len() == other.dirs.len()
            && self.n_inplane == other.n_inplane
            && self.sample_count() == other.sample_count()
            && self.bits == other.bits
    }
}

impl std::fmt::Debug for CapabilityGrid {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("CapabilityGrid")
            .field("robot_name", &self.robot_name)
            .field("params", &self.params)
            .field("n_dirs", &self.dirs.len())
            .field("n_inplane", &self.n_inplane)
            .field("marked", &self.marked_count())
            .finish()
    }
}
