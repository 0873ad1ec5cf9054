use crate::pose::TcpPose;

/// Which discretization a map uses.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum MapKind {
    Rm4d,
    Zacharias6d,
    Zacharias5d,
}

impl MapKind {
    pub fn as_str(&self) -> &'static str {
        match self {
            MapKind::Rm4d => "rm4d",
            MapKind::Zacharias6d => "zach6d",
            MapKind::Zacharias5d => "zach5d",
        }
    }
}

impl std::str::FromStr for MapKind {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "rm4d" => Ok(MapKind::Rm4d),
            "zach6d" => Ok(MapKind::Zacharias6d),
            "zach5d" => Ok(MapKind::Zacharias5d),
            other => Err(format!("unknown map type `{other}` (expected rm4d, zach6d or zach5d)")),
        }
    }
}

impl std::fmt::Display for MapKind {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.as_str())
    }
}

/// Common surface of binary reachability maps built from base-relative TCP
/// samples. Marking must be safe from many threads at once and must never
/// lose a 0 -> 1 transition.
pub trait ReachabilityMap: Sync {
    fn kind(&self) -> MapKind;

    fn robot_name(&self) -> &str;

    /// Marks the cell of a base-relative pose. Returns true if the cell was
    /// previously unmarked; out-of-range poses are counted and ignored.
    fn mark(&self, tcp: &TcpPose) -> bool;

    /// Forward query; out-of-range poses are unreachable.
    fn query(&self, tcp: &TcpPose) -> bool;

    fn cell_count(&self) -> u64;

    fn marked_count(&self) -> u64;

    fn out_of_range_count(&self) -> u64;

    /// Number of construction samples recorded so far.
    fn sample_count(&self) -> u64;

    fn add_samples(&self, n: u64);
}
