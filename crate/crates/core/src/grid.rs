//! The RM4D grid: one bit per `(p_z, theta, x*, y*)` cell, queried both
//! forward (is this pose reachable?) and inverse (from where is it
//! reachable?).

use std::io::{Read, Write};
use std::sync::atomic::{AtomicU32, AtomicU64, Ordering};

use crate::bits::AtomicBits;
use crate::canonical::{
    azimuth, canonicalize, cell_center, discretize, discretize_pz, discretize_theta, polar_angle, GridParams, MapIndex4,
};
use crate::container::{read_container, write_container, Header};
use crate::error::{Error, Result};
use crate::map::{MapKind, ReachabilityMap};
use crate::pose::TcpPose;

pub const RM4D_MAGIC: &[u8; 4] = b"RM4D";

/// Default allocation cap (cells) for new grids: 2^33 bits = 1 GiB.
pub const DEFAULT_MAX_CELLS: u64 = 1 << 33;

pub struct ReachGrid4D {
    robot_name: String,
    params: GridParams,
    n_z: usize,
    n_theta: usize,
    n_xy: usize,
    bits: AtomicBits,
    marked: AtomicU64,
    samples: AtomicU64,
    out_of_range: AtomicU64,
    // optional per-cell visit counts, diagnostics only
    counts: Option<Vec<AtomicU32>>,
}

/// Base positions from which a world TCP pose is reachable.
#[derive(Debug, Clone, PartialEq)]
pub struct BaseSolutionSet {
    pub tcp: TcpPose,
    pub positions: Vec<(f64, f64)>,
    /// True when `p_z` of the pose is outside the grid; `positions` is then
    /// empty.
    pub out_of_range: bool,
}

impl ReachGrid4D {
    pub fn new(robot_name: impl Into<String>, params: GridParams) -> Result<Self> {
        Self::with_cap(robot_name, params, DEFAULT_MAX_CELLS)
    }

    pub fn with_cap(robot_name: impl Into<String>, params: GridParams, max_cells: u64) -> Result<Self> {
        params.validate()?;
        let cells = params.cell_count();
        if cells > max_cells {
            return Err(Error::TooLarge { cells, cap: max_cells });
        }
        Ok(Self::from_parts(robot_name.into(), params, AtomicBits::new(cells), 0))
    }

    fn from_parts(robot_name: String, params: GridParams, bits: AtomicBits, samples: u64) -> Self {
        let marked = bits.count_ones();
        Self {
            robot_name,
            n_z: params.n_z(),
            n_theta: params.n_theta(),
            n_xy: params.n_xy(),
            params,
            bits,
            marked: AtomicU64::new(marked),
            samples: AtomicU64::new(samples),
            out_of_range: AtomicU64::new(0),
            counts: None,
        }
    }

    /// Enables per-cell visit counters (4 bytes per cell).
    pub fn with_visit_counts(mut self) -> Self {
        let n = self.bits.len() as usize;
        let mut counts = Vec::with_capacity(n);
        counts.resize_with(n, || AtomicU32::new(0));
        self.counts = Some(counts);
        self
    }

    pub fn params(&self) -> &GridParams {
        &self.params
    }

    /// `(n_z, n_theta, n_xy)`.
    pub fn dims(&self) -> (usize, usize, usize) {
        (self.n_z, self.n_theta, self.n_xy)
    }

    #[inline]
    pub fn linear_index(&self, i: &MapIndex4) -> u64 {
        (((i.i_pz * self.n_theta + i.i_theta) * self.n_xy + i.i_x) * self.n_xy + i.i_y) as u64
    }

    pub fn get(&self, i: &MapIndex4) -> bool {
        self.bits.get(self.linear_index(i))
    }

    pub fn set(&self, i: &MapIndex4) -> bool {
        let lin = self.linear_index(i);
        if let Some(counts) = &self.counts {
            counts[lin as usize].fetch_add(1, Ordering::Relaxed);
        }
        let newly = self.bits.set(lin);
        if newly {
            self.marked.fetch_add(1, Ordering::Relaxed);
        }
        newly
    }

    pub fn visit_count(&self, i: &MapIndex4) -> Option<u32> {
        self.counts
            .as_ref()
            .map(|c| c[self.linear_index(i) as usize].load(Ordering::Relaxed))
    }

    pub fn index_of(&self, tcp: &TcpPose) -> Option<MapIndex4> {
        discretize(&canonicalize(tcp), &self.params).ok()
    }

    /// Slice indices `(i_pz, i_theta)` of a pose, if in range.
    pub fn slice_of(&self, tcp: &TcpPose) -> Option<(usize, usize)> {
        let i_pz = discretize_pz(tcp.position.z, &self.params).ok()?;
        let i_theta = discretize_theta(polar_angle(tcp), &self.params).ok()?;
        Some((i_pz, i_theta))
    }

    pub fn slice_popcount(&self, i_pz: usize, i_theta: usize) -> u64 {
        let start = ((i_pz * self.n_theta + i_theta) * self.n_xy * self.n_xy) as u64;
        self.bits.count_ones_in(start, (self.n_xy * self.n_xy) as u64)
    }

    /// Inverse query: all base positions (cell centers mapped back to the
    /// world) from which `tcp_world` is reachable.
    pub fn query_inverse(&self, tcp_world: &TcpPose) -> BaseSolutionSet {
        let mut positions = Vec::new();
        let out_of_range = !self.for_each_base(tcp_world, |x, y| positions.push((x, y)));
        BaseSolutionSet {
            tcp: *tcp_world,
            positions,
            out_of_range,
        }
    }

    /// Allocation-free inverse query. Returns false if the pose is out of
    /// range.
    pub fn for_each_base(&self, tcp_world: &TcpPose, mut f: impl FnMut(f64, f64)) -> bool {
        let Some((i_pz, i_theta)) = self.slice_of(tcp_world) else {
            return false;
        };
        let (s, c) = azimuth(tcp_world).sin_cos();
        let (px, py) = (tcp_world.position.x, tcp_world.position.y);
        let n_xy = self.n_xy as u64;
        let start = ((i_pz * self.n_theta + i_theta) * self.n_xy * self.n_xy) as u64;
        self.bits.for_each_set_in(start, n_xy * n_xy, |lin| {
            let off = lin - start;
            let x = cell_center((off / n_xy) as usize, &self.params);
            let y = cell_center((off % n_xy) as usize, &self.params);
            f(c * x - s * y + px, s * x + c * y + py);
        });
        true
    }

    /// Resets the out-of-range counter (not persisted).
    pub fn reset_out_of_range(&self) {
        self.out_of_range.store(0, Ordering::Relaxed);
    }

    pub fn save<W: Write>(&self, sink: &mut W) -> Result<()> {
        let header = Header {
            robot_name: self.robot_name.clone(),
            params: self.params,
            dims: [self.n_z as u32, self.n_theta as u32, self.n_xy as u32],
            extra: Vec::new(),
            samples: self.sample_count(),
        };
        write_container(sink, RM4D_MAGIC, &header, &self.bits)
    }

    pub fn load<R: Read>(source: &mut R) -> Result<Self> {
        let (header, bits) = read_container(source, RM4D_MAGIC, 0, |h| {
            let p = &h.params;
            let expected = [p.n_z() as u32, p.n_theta() as u32, p.n_xy() as u32];
            if h.dims != expected {
                return Err(Error::Corrupt(format!(
                    "dims {:?} inconsistent with parameters (expected {:?})",
                    h.dims, expected
                )));
            }
            let cells = p.cell_count();
            if cells > DEFAULT_MAX_CELLS {
                return Err(Error::TooLarge {
                    cells,
                    cap: DEFAULT_MAX_CELLS,
                });
            }
            Ok(cells)
        })?;
        Ok(Self::from_parts(header.robot_name, header.params, bits, header.samples))
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

impl ReachabilityMap for ReachGrid4D {
    fn kind(&self) -> MapKind {
        MapKind::Rm4d
    }

    fn robot_name(&self) -> &str {
        &self.robot_name
    }

    fn mark(&self, tcp: &TcpPose) -> bool {
        match self.index_of(tcp) {
            Some(i) => self.set(&i),
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

impl Clone for ReachGrid4D {
    fn clone(&self) -> Self {
        Self {
            robot_name: self.robot_name.clone(),
            params: self.params,
            n_z: self.n_z,
            n_theta: self.n_theta,
            n_xy: self.n_xy,
            bits: self.bits.clone(),
            marked: AtomicU64::new(self.marked_count()),
            samples: AtomicU64::new(self.sample_count()),
            out_of_range: AtomicU64::new(self.out_of_range_count()),
            counts: self
                .counts
                .as_ref()
                .map(|c| c.iter().map(|v| AtomicU32::new(v.load(Ordering::Relaxed))).collect()),
        }
    }
}

/// Equality covers everything that is persisted: name, parameters, sample
/// count and cell bits (and hence the marked count).
impl PartialEq for ReachGrid4D {
    fn eq(&self, other: &Self) -> bool {
        self.robot_name == other.robot_name
            && self.params == other.params
            && self.sample_count() == other.sample_count()
            && self.marked_count() == other.marked_count()
            && self.bits == other.bits
    }
}

impl std::fmt::Debug for ReachGrid4D {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("ReachGrid4D")
            .field("robot_name", &self.robot_name)
            .field("params", &self.params)
            .field("dims", &self.dims())
            .field("marked", &self.marked_count())
            .field("samples", &self.sample_count())
            .finish()
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use nalgebra::Vector3;
    use std::f64::consts::{FRAC_1_SQRT_2, PI};

    fn params() -> GridParams {
        GridParams::with_degrees(1.05, 1.35, 0.05, 5.0).unwrap()
    }

    fn pose(approach: [f64; 3], p: [f64; 3]) -> TcpPose {
        TcpPose::from_approach(Vector3::from(approach), Vector3::from(p))
    }

    #[test]
    fn new_grid_sizes() {
        let g = ReachGrid4D::new("panda", params()).unwrap();
        assert_eq!(g.cell_count(), 1_714_608);
        assert_eq!(g.marked_count(), 0);
        let tiny = ReachGrid4D::new("t", GridParams::new(1.0, 1.0, 1.0, PI).unwrap()).unwrap();
        assert_eq!(tiny.cell_count(), 4);
        assert!(matches!(
            ReachGrid4D::with_cap("x", params(), 1000),
            Err(Error::TooLarge { .. })
        ));
    }

    #[test]
    fn mark_and_query() {
        let g = ReachGrid4D::new("r", params()).unwrap();
        let t = pose([0.3, 0.4, 0.5], [0.4, 0.1, 0.6]);
        assert!(!g.query(&t));
        assert!(g.mark(&t));
        assert!(!g.mark(&t));
        assert!(g.query(&t));
        assert_eq!(g.marked_count(), 1);

        let related = t.yawed(1.234).rolled(-2.5);
        assert!(!g.mark(&related));
        assert!(g.query(&t.yawed(-0.4)));

        let far = pose([0.0, 0.0, 1.0], [0.1, 0.0, 2.0 * 1.35]);
        assert!(!g.query(&far));
        assert!(!g.mark(&far));
        assert_eq!(g.out_of_range_count(), 1);
    }

    #[test]
    fn inverse_query_contains_origin_neighbourhood() {
        let g = ReachGrid4D::new("r", params()).unwrap();
        assert!(g
            .query_inverse(&pose([1.0, 0.0, 0.0], [0.5, 0.0, 0.5]))
            .positions
            .is_empty());

        let t = pose([0.3, -0.4, 0.5], [0.35, 0.2, 0.6]);
        g.mark(&t);
        let res = g.query_inverse(&t);
        assert_eq!(res.positions.len(), 1);
        let (x, y) = res.positions[0];
        assert!((x * x + y * y).sqrt() <= 0.05 * FRAC_1_SQRT_2 + 1e-12);

        let (i_pz, i_theta) = g.slice_of(&t).unwrap();
        assert_eq!(g.slice_popcount(i_pz, i_theta), 1);
    }

    #[test]
    fn inverse_query_cardinality() {
        let g = ReachGrid4D::new("r", params()).unwrap();
        let t = pose([0.0, 1.0, 0.2], [0.0, 0.0, 0.3]);
        let (i_pz, i_theta) = g.slice_of(&t).unwrap();
        for k in 0..7 {
            g.set(&MapIndex4 {
                i_pz,
                i_theta,
                i_x: 3 * k,
                i_y: 40 - k,
            });
        }
        assert_eq!(g.query_inverse(&t).positions.len(), 7);
    }

    #[test]
    fn inverse_query_out_of_range_flag() {
        let g = ReachGrid4D::new("r", params()).unwrap();
        let res = g.query_inverse(&pose([1.0, 0.0, 0.0], [0.0, 0.0, -0.5]));
        assert!(res.out_of_range);
        assert!(res.positions.is_empty());
    }

    #[test]
    fn visit_counts() {
        let g = ReachGrid4D::new("r", params()).unwrap().with_visit_counts();
        let t = pose([0.3, 0.4, 0.5], [0.4, 0.1, 0.6]);
        g.mark(&t);
        g.mark(&t);
        assert_eq!(g.visit_count(&g.index_of(&t).unwrap()), Some(2));
    }

    #[test]
    fn save_load_roundtrip_and_corruption() {
        let g = ReachGrid4D::new("panda", params()).unwrap();
        for k in 0..500u64 {
            let a = (k as f64) * 0.37;
            g.mark(&pose(
                [a.cos(), a.sin(), (a * 0.3).cos()],
                [0.3 * a.sin(), 0.2, 0.05 + 0.002 * k as f64],
            ));
        }
        g.add_samples(500);
        let mut buf = Vec::new();
        g.save(&mut buf).unwrap();
        let back = ReachGrid4D::load(&mut buf.as_slice()).unwrap();
        assert_eq!(back, g);
        let mut again = Vec::new();
        back.save(&mut again).unwrap();
        assert_eq!(again, buf);

        let mut bad = buf.clone();
        let n = bad.len();
        bad[n - 1] ^= 0xff;
        assert!(matches!(
            ReachGrid4D::load(&mut bad.as_slice()),
            Err(Error::Checksum { .. })
        ));

        let mut flipped = buf.clone();
        flipped[n / 2] ^= 0x10;
        assert!(matches!(
            ReachGrid4D::load(&mut flipped.as_slice()),
            Err(Error::Checksum { .. })
        ));

        assert!(matches!(
            ReachGrid4D::load(&mut &buf[..n - 10]),
            Err(Error::Truncated { .. })
        ));

        let mut magic = buf.clone();
        magic[0] = b'X';
        assert!(matches!(
            ReachGrid4D::load(&mut magic.as_slice()),
            Err(Error::BadMagic { .. })
        ));

        let mut version = buf.clone();
        version[4] = 9;
        assert!(matches!(
            ReachGrid4D::load(&mut version.as_slice()),
            Err(Error::UnsupportedVersion(9))
        ));
    }

    #[test]
    fn header_preserves_distinct_params() {
        let a = ReachGrid4D::new("a", params()).unwrap();
        let b = ReachGrid4D::new("bee", GridParams::with_degrees(0.7, 0.9, 0.1, 10.0).unwrap()).unwrap();
        for g in [&a, &b] {
            let mut buf = Vec::new();
            g.save(&mut buf).unwrap();
            let back = ReachGrid4D::load(&mut buf.as_slice()).unwrap();
            assert_eq!(back.params(), g.params());
            assert_eq!(back.robot_name(), g.robot_name());
            assert_eq!(back.dims(), g.dims());
        }
    }
}
